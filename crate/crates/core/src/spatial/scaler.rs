//! Centroid min-max scaling of coordinates into [-1, 1]^2, an alternative to
//! discretization for consumers that want continuous inputs.

use super::super::dataio::LocationRecord;
use crate::error::SpatialError;

/// Fitted scaling parameters: per-axis centroid and half-range.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ScalerParams {
    pub lat_center: f64,
    pub lat_half_range: f64,
    pub lon_center: f64,
    pub lon_half_range: f64,
}

/// Fits the scaler on records: centroid is the mean, half-range the maximum
/// absolute deviation from it per axis. An axis with no spread cannot be
/// scaled and is a fatal error.
pub fn fit_minmax(records: &[LocationRecord]) -> Result<ScalerParams, SpatialError> {
    if records.is_empty() {
        return Err(SpatialError::InvalidBounds("cannot fit a scaler on zero records".into()));
    }
    let n = records.len() as f64;
    let lat_center = records.iter().map(|r| r.latitude).sum::<f64>() / n;
    let lon_center = records.iter().map(|r| r.longitude).sum::<f64>() / n;
    let lat_half_range = records
        .iter()
        .map(|r| (r.latitude - lat_center).abs())
        .fold(0.0_f64, f64::max);
    let lon_half_range = records
        .iter()
        .map(|r| (r.longitude - lon_center).abs())
        .fold(0.0_f64, f64::max);
    if lat_half_range == 0.0 {
        return Err(SpatialError::DegenerateAxis { axis: "latitude", value: lat_center });
    }
    if lon_half_range == 0.0 {
        return Err(SpatialError::DegenerateAxis { axis: "longitude", value: lon_center });
    }
    Ok(ScalerParams { lat_center, lat_half_range, lon_center, lon_half_range })
}

impl ScalerParams {
    /// Scales one point. The boolean reports whether clamping fired (the
    /// point lay outside the fitted range).
    pub fn apply(&self, lat: f64, lon: f64) -> ((f64, f64), bool) {
        let x = (lat - self.lat_center) / self.lat_half_range;
        let y = (lon - self.lon_center) / self.lon_half_range;
        let clamped = !(-1.0..=1.0).contains(&x) || !(-1.0..=1.0).contains(&y);
        ((x.clamp(-1.0, 1.0), y.clamp(-1.0, 1.0)), clamped)
    }

    /// Inverse transform of in-range scaled points.
    pub fn invert(&self, x: f64, y: f64) -> (f64, f64) {
        (
            self.lat_center + x * self.lat_half_range,
            self.lon_center + y * self.lon_half_range,
        )
    }
}

/// Scales a batch of points, returning how many were clamped so callers can
/// surface the warning.
pub fn apply_minmax(points: &[(f64, f64)], params: &ScalerParams) -> (Vec<(f64, f64)>, usize) {
    let mut clamped_count = 0;
    let scaled = points
        .iter()
        .map(|&(lat, lon)| {
            let (xy, clamped) = params.apply(lat, lon);
            if clamped {
                clamped_count += 1;
            }
            xy
        })
        .collect();
    (scaled, clamped_count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn record(lat: f64, lon: f64) -> LocationRecord {
        LocationRecord {
            user_id: "a".into(),
            timestamp: chrono::NaiveDateTime::parse_from_str("2012-04-09T10:00:00", "%Y-%m-%dT%H:%M:%S")
                .unwrap(),
            latitude: lat,
            longitude: lon,
            extras: BTreeMap::new(),
        }
    }

    #[test]
    fn extremes_map_to_plus_minus_one() {
        let records = vec![record(46.50, 6.58), record(46.61, 6.73)];
        let params = fit_minmax(&records).unwrap();
        assert!((params.lat_center - 46.555).abs() < 1e-12);
        let ((x, y), clamped) = params.apply(46.61, 6.73);
        assert!(!clamped);
        assert!((x - 1.0).abs() < 1e-9);
        assert!((y - 1.0).abs() < 1e-9);
        let ((x, _), _) = params.apply(46.50, 6.58);
        assert!((x + 1.0).abs() < 1e-9);
    }

    #[test]
    fn round_trip_within_tolerance() {
        let records = vec![record(46.50, 6.58), record(46.61, 6.73), record(46.53, 6.62)];
        let params = fit_minmax(&records).unwrap();
        for r in &records {
            let ((x, y), _) = params.apply(r.latitude, r.longitude);
            let (lat, lon) = params.invert(x, y);
            assert!((lat - r.latitude).abs() < 1e-9);
            assert!((lon - r.longitude).abs() < 1e-9);
        }
    }

    #[test]
    fn out_of_range_points_clamp_and_count() {
        let records = vec![record(46.50, 6.58), record(46.61, 6.73)];
        let params = fit_minmax(&records).unwrap();
        let points = vec![(46.70, 6.60), (46.55, 6.60)];
        let (scaled, clamped) = apply_minmax(&points, &params);
        assert_eq!(clamped, 1);
        assert_eq!(scaled[0].0, 1.0);
    }

    #[test]
    fn degenerate_axis_is_fatal() {
        let records = vec![record(46.50, 6.58), record(46.50, 6.73)];
        match fit_minmax(&records) {
            Err(SpatialError::DegenerateAxis { axis: "latitude", .. }) => {}
            other => panic!("expected DegenerateAxis, got {other:?}"),
        }
    }
}
