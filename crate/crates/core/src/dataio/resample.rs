//! Temporal downsampling to a fixed resolution.

use super::LocationRecord;
use crate::error::DataError;

/// Buckets each user's records into `minutes`-wide bins anchored at the epoch
/// and keeps, per bin, the record closest to the bin start (the earliest one,
/// since records within a bin are time-ordered). The survivor's timestamp is
/// quantized to the bin start.
///
/// Input must be sorted by time within each user; output is sorted by
/// `(user_id, timestamp)`.
pub fn resample_to_resolution(
    records: &[LocationRecord],
    minutes: u32,
) -> Result<Vec<LocationRecord>, DataError> {
    if minutes == 0 {
        return Err(DataError::BadResolution(minutes));
    }
    let minutes = minutes as i64;

    let mut out: Vec<LocationRecord> = Vec::new();
    let mut last_key: Option<(&str, i64)> = None;
    for record in records {
        let minute_of_epoch = record.timestamp.and_utc().timestamp().div_euclid(60);
        let bin = minute_of_epoch.div_euclid(minutes);
        let key = (record.user_id.as_str(), bin);
        if last_key == Some(key) {
            continue;
        }
        last_key = Some(key);
        let bin_start = chrono::DateTime::from_timestamp(bin * minutes * 60, 0)
            .expect("bin start is a representable time")
            .naive_utc();
        let mut kept = record.clone();
        kept.timestamp = bin_start;
        out.push(kept);
    }
    out.sort_by(|a, b| (a.user_id.as_str(), a.timestamp).cmp(&(b.user_id.as_str(), b.timestamp)));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn rec(user: &str, ts: &str, lat: f64) -> LocationRecord {
        LocationRecord {
            user_id: user.into(),
            timestamp: chrono::NaiveDateTime::parse_from_str(ts, "%Y-%m-%dT%H:%M:%S").unwrap(),
            latitude: lat,
            longitude: 0.0,
            extras: BTreeMap::new(),
        }
    }

    #[test]
    fn keeps_record_closest_to_bin_start() {
        let records = vec![rec("a", "2012-04-12T10:01:00", 1.0), rec("a", "2012-04-12T10:04:00", 2.0)];
        let out = resample_to_resolution(&records, 10).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].latitude, 1.0);
        assert_eq!(out[0].timestamp, rec("a", "2012-04-12T10:00:00", 0.0).timestamp);
    }

    #[test]
    fn bins_are_per_user() {
        let records = vec![
            rec("a", "2012-04-12T10:01:00", 1.0),
            rec("a", "2012-04-12T10:11:00", 2.0),
            rec("b", "2012-04-12T10:02:00", 3.0),
        ];
        let out = resample_to_resolution(&records, 10).unwrap();
        assert_eq!(out.len(), 3);
        let quantized: Vec<_> = out.iter().map(|r| (r.user_id.as_str(), r.timestamp.format("%H:%M").to_string())).collect();
        assert_eq!(
            quantized,
            [("a", "10:00".to_string()), ("a", "10:10".to_string()), ("b", "10:00".to_string())]
        );
    }

    #[test]
    fn consecutive_output_is_at_least_resolution_apart() {
        let records: Vec<_> = (0..60)
            .map(|i| rec("a", &format!("2012-04-12T10:{i:02}:00"), i as f64))
            .collect();
        let out = resample_to_resolution(&records, 10).unwrap();
        assert_eq!(out.len(), 6);
        for pair in out.windows(2) {
            let gap = pair[1].timestamp - pair[0].timestamp;
            assert!(gap >= chrono::Duration::minutes(10));
        }
    }

    #[test]
    fn zero_resolution_is_fatal() {
        assert!(matches!(resample_to_resolution(&[], 0), Err(DataError::BadResolution(0))));
    }

    #[test]
    fn empty_input_is_empty_output() {
        assert!(resample_to_resolution(&[], 10).unwrap().is_empty());
    }
}
