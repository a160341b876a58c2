//! CSV readers and writers for records and trajectory stores.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDateTime;

use super::{DatasetMeta, LocationRecord, Trajectory, TrajectoryDataset, TrajectoryPoint};
use crate::error::DataError;

const REQUIRED_COLUMNS: [&str; 4] = ["user_id", "timestamp", "latitude", "longitude"];

/// Result of reading a record CSV: parsed rows plus a skip count for the
/// rows that did not survive validation.
#[derive(Debug)]
pub struct LoadOutcome {
    /// Records sorted by `(user_id, timestamp)`.
    pub records: Vec<LocationRecord>,
    pub rows_total: usize,
    pub rows_skipped: usize,
}

/// Accepted timestamp shapes, tried in order. All are naive local time;
/// an explicit offset is folded into UTC.
fn parse_timestamp(raw: &str) -> Option<NaiveDateTime> {
    for format in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M:%S", "%Y-%m-%d %H:%M"] {
        if let Ok(ts) = NaiveDateTime::parse_from_str(raw, format) {
            return Some(ts);
        }
    }
    if let Ok(ts) = chrono::DateTime::parse_from_rfc3339(raw) {
        return Some(ts.naive_utc());
    }
    None
}

/// Reads a record CSV with header `user_id,timestamp,latitude,longitude`
/// (extra columns become categorical attributes). Rows that fail to parse or
/// carry out-of-range coordinates are skipped and counted; if more than half
/// of the rows are bad the whole file is rejected.
pub fn load_records(path: impl AsRef<Path>) -> Result<LoadOutcome, DataError> {
    let path = path.as_ref();
    let path_str = path.display().to_string();
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(_) => DataError::Io {
            path: path_str.clone(),
            source: std::io::Error::new(std::io::ErrorKind::Other, e.to_string()),
        },
        _ => DataError::Csv { path: path_str.clone(), source: e },
    })?;

    let headers = reader
        .headers()
        .map_err(|e| DataError::Csv { path: path_str.clone(), source: e })?
        .clone();
    let mut required = [usize::MAX; 4];
    for (slot, name) in required.iter_mut().zip(REQUIRED_COLUMNS) {
        *slot = headers.iter().position(|h| h == name).ok_or_else(|| DataError::MissingColumn {
            path: path_str.clone(),
            column: name.to_string(),
        })?;
    }
    let [user_col, ts_col, lat_col, lon_col] = required;
    let extra_cols: Vec<(usize, String)> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| !required.contains(i))
        .map(|(i, h)| (i, h.to_string()))
        .collect();

    let mut records = Vec::new();
    let mut rows_total = 0usize;
    let mut rows_skipped = 0usize;
    for row in reader.records() {
        let row = row.map_err(|e| DataError::Csv { path: path_str.clone(), source: e })?;
        rows_total += 1;
        let parsed = (|| {
            let user_id = row.get(user_col)?.trim();
            if user_id.is_empty() {
                return None;
            }
            let timestamp = parse_timestamp(row.get(ts_col)?.trim())?;
            let latitude: f64 = row.get(lat_col)?.trim().parse().ok()?;
            let longitude: f64 = row.get(lon_col)?.trim().parse().ok()?;
            if !latitude.is_finite() || !(-90.0..=90.0).contains(&latitude) {
                return None;
            }
            if !longitude.is_finite() || !(-180.0..=180.0).contains(&longitude) {
                return None;
            }
            let extras: BTreeMap<String, String> = extra_cols
                .iter()
                .filter_map(|(i, name)| row.get(*i).map(|v| (name.clone(), v.to_string())))
                .collect();
            Some(LocationRecord { user_id: user_id.to_string(), timestamp, latitude, longitude, extras })
        })();
        match parsed {
            Some(record) => records.push(record),
            None => rows_skipped += 1,
        }
    }

    if rows_total > 0 && rows_skipped * 2 > rows_total {
        return Err(DataError::MostlyUnparseable { path: path_str, skipped: rows_skipped, total: rows_total });
    }

    records.sort_by(|a, b| (a.user_id.as_str(), a.timestamp).cmp(&(b.user_id.as_str(), b.timestamp)));
    Ok(LoadOutcome { records, rows_total, rows_skipped })
}

fn format_timestamp(ts: NaiveDateTime) -> String {
    ts.format("%Y-%m-%dT%H:%M:%S").to_string()
}

/// Writes records back out in the same shape `load_records` consumes, via a
/// temporary file renamed into place so the target is never half-written.
/// Extra attribute columns are the sorted union of keys seen across records.
pub fn write_records(records: &[LocationRecord], path: impl AsRef<Path>) -> Result<(), DataError> {
    let path = path.as_ref();
    let path_str = path.display().to_string();
    let mut extra_names: Vec<String> = records
        .iter()
        .flat_map(|r| r.extras.keys().cloned())
        .collect();
    extra_names.sort();
    extra_names.dedup();

    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<&str> = REQUIRED_COLUMNS.to_vec();
    header.extend(extra_names.iter().map(|s| s.as_str()));
    writer
        .write_record(&header)
        .map_err(|e| DataError::Csv { path: path_str.clone(), source: e })?;
    for record in records {
        let mut row = vec![
            record.user_id.clone(),
            format_timestamp(record.timestamp),
            record.latitude.to_string(),
            record.longitude.to_string(),
        ];
        for name in &extra_names {
            row.push(record.extras.get(name).cloned().unwrap_or_default());
        }
        writer
            .write_record(&row)
            .map_err(|e| DataError::Csv { path: path_str.clone(), source: e })?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| DataError::Io { path: path_str.clone(), source: e.into_error() })?;
    crate::fsutil::write_atomic(path, &bytes)
        .map_err(|e| DataError::Io { path: path_str, source: e })?;
    Ok(())
}

/// Writes a trajectory dataset as a flat CSV with one row per point and the
/// derived columns `trajectory_id,day_of_week,hour_of_day` appended.
pub fn write_trajectories(dataset: &TrajectoryDataset, path: impl AsRef<Path>) -> Result<(), DataError> {
    let path = path.as_ref();
    let path_str = path.display().to_string();
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record([
            "user_id",
            "timestamp",
            "latitude",
            "longitude",
            "trajectory_id",
            "day_of_week",
            "hour_of_day",
        ])
        .map_err(|e| DataError::Csv { path: path_str.clone(), source: e })?;
    for trajectory in &dataset.trajectories {
        for point in &trajectory.points {
            writer
                .write_record([
                    trajectory.user_id.as_str(),
                    &format_timestamp(point.timestamp),
                    &point.latitude.to_string(),
                    &point.longitude.to_string(),
                    trajectory.trajectory_id.as_str(),
                    &point.day_of_week.to_string(),
                    &point.hour_of_day.to_string(),
                ])
                .map_err(|e| DataError::Csv { path: path_str.clone(), source: e })?;
        }
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| DataError::Io { path: path_str.clone(), source: e.into_error() })?;
    crate::fsutil::write_atomic(path, &bytes)
        .map_err(|e| DataError::Io { path: path_str, source: e })?;
    Ok(())
}

/// Reads a trajectory store written by [`write_trajectories`]. Rows sharing a
/// `trajectory_id` must be contiguous; the derived time fields are recomputed
/// from the timestamp rather than trusted.
pub fn load_trajectory_store(
    path: impl AsRef<Path>,
    meta: DatasetMeta,
) -> Result<TrajectoryDataset, DataError> {
    let path = path.as_ref();
    let path_str = path.display().to_string();
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(_) => DataError::Io {
            path: path_str.clone(),
            source: std::io::Error::new(std::io::ErrorKind::Other, e.to_string()),
        },
        _ => DataError::Csv { path: path_str.clone(), source: e },
    })?;
    let headers = reader
        .headers()
        .map_err(|e| DataError::Csv { path: path_str.clone(), source: e })?
        .clone();
    let find = |name: &str| -> Result<usize, DataError> {
        headers.iter().position(|h| h == name).ok_or_else(|| DataError::MissingColumn {
            path: path_str.clone(),
            column: name.to_string(),
        })
    };
    let user_col = find("user_id")?;
    let ts_col = find("timestamp")?;
    let lat_col = find("latitude")?;
    let lon_col = find("longitude")?;
    let traj_col = find("trajectory_id")?;

    let mut trajectories: Vec<Trajectory> = Vec::new();
    for (line, row) in reader.records().enumerate() {
        let row = row.map_err(|e| DataError::Csv { path: path_str.clone(), source: e })?;
        let get = |col: usize| row.get(col).unwrap_or("").trim().to_string();
        let timestamp = parse_timestamp(&get(ts_col)).ok_or_else(|| DataError::Csv {
            path: path_str.clone(),
            source: csv::Error::from(std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                format!("row {}: bad timestamp `{}`", line + 2, get(ts_col)),
            )),
        })?;
        let parse_f64 = |col: usize, what: &str| -> Result<f64, DataError> {
            get(col).parse().map_err(|_| DataError::Csv {
                path: path_str.clone(),
                source: csv::Error::from(std::io::Error::new(
                    std::io::ErrorKind::InvalidData,
                    format!("row {}: bad {what} `{}`", line + 2, get(col)),
                )),
            })
        };
        let record = LocationRecord {
            user_id: get(user_col),
            timestamp,
            latitude: parse_f64(lat_col, "latitude")?,
            longitude: parse_f64(lon_col, "longitude")?,
            extras: BTreeMap::new(),
        };
        let trajectory_id = get(traj_col);
        let point = TrajectoryPoint::from_record(&record);
        match trajectories.last_mut() {
            Some(last) if last.trajectory_id == trajectory_id => last.points.push(point),
            _ => trajectories.push(Trajectory {
                trajectory_id,
                user_id: record.user_id,
                points: vec![point],
            }),
        }
    }
    Ok(TrajectoryDataset::from_trajectories(trajectories, meta))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts(s: &str) -> NaiveDateTime {
        parse_timestamp(s).unwrap()
    }

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        use std::io::Write;
        let mut file = tempfile::NamedTempFile::new().unwrap();
        file.write_all(content.as_bytes()).unwrap();
        file.flush().unwrap();
        file
    }

    #[test]
    fn loads_and_sorts_records() {
        let file = write_temp(
            "user_id,timestamp,latitude,longitude,mode\n\
             b,2012-04-12T10:00:00,46.5,6.6,walk\n\
             a,2012-04-12T11:00:00,46.6,6.7,bus\n\
             a,2012-04-12T10:00:00,46.55,6.65,\n",
        );
        let out = load_records(file.path()).unwrap();
        assert_eq!(out.rows_total, 3);
        assert_eq!(out.rows_skipped, 0);
        let users: Vec<_> = out.records.iter().map(|r| r.user_id.as_str()).collect();
        assert_eq!(users, ["a", "a", "b"]);
        assert!(out.records[0].timestamp < out.records[1].timestamp);
        assert_eq!(out.records[2].extras["mode"], "walk");
    }

    #[test]
    fn missing_column_is_fatal() {
        let file = write_temp("user_id,timestamp,latitude\na,2012-04-12T10:00:00,46.5\n");
        match load_records(file.path()) {
            Err(DataError::MissingColumn { column, .. }) => assert_eq!(column, "longitude"),
            other => panic!("expected MissingColumn, got {other:?}"),
        }
    }

    #[test]
    fn bad_rows_are_skipped_until_majority() {
        let file = write_temp(
            "user_id,timestamp,latitude,longitude\n\
             a,2012-04-12T10:00:00,91.0,6.6\n\
             a,2012-04-12T10:10:00,46.5,6.6\n\
             a,not-a-time,46.5,6.6\n\
             a,2012-04-12T10:20:00,46.5,6.6\n",
        );
        let out = load_records(file.path()).unwrap();
        assert_eq!(out.records.len(), 2);
        assert_eq!(out.rows_skipped, 2);
    }

    #[test]
    fn majority_bad_rows_are_fatal() {
        let file = write_temp(
            "user_id,timestamp,latitude,longitude\n\
             a,2012-04-12T10:00:00,91.0,6.6\n",
        );
        match load_records(file.path()) {
            Err(DataError::MostlyUnparseable { skipped: 1, total: 1, .. }) => {}
            other => panic!("expected MostlyUnparseable, got {other:?}"),
        }
    }

    #[test]
    fn accepts_alternate_timestamp_shapes() {
        assert_eq!(ts("2012-04-12T10:00"), ts("2012-04-12 10:00:00"));
        assert!(parse_timestamp("2012-04-12T10:00:00+02:00").is_some());
        assert!(parse_timestamp("12/04/2012").is_none());
    }

    #[test]
    fn record_round_trip_is_identity() {
        let records = vec![
            LocationRecord {
                user_id: "a".into(),
                timestamp: ts("2012-04-12T10:00:00"),
                latitude: 46.512345678,
                longitude: 6.598765432,
                extras: BTreeMap::from([("mode".to_string(), "walk".to_string())]),
            },
            LocationRecord {
                user_id: "b".into(),
                timestamp: ts("2012-04-13T09:30:00"),
                latitude: -0.25,
                longitude: 179.99999,
                extras: BTreeMap::from([("mode".to_string(), String::new())]),
            },
        ];
        let file = tempfile::NamedTempFile::new().unwrap();
        write_records(&records, file.path()).unwrap();
        let reloaded = load_records(file.path()).unwrap();
        assert_eq!(reloaded.records, records);
    }
}
