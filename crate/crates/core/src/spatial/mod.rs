//! Spatial preprocessing: bounding-box filtering, coordinate scaling, two
//! interchangeable location discretizers (rectangular grid and geohash), the
//! closed location/user vocabulary, and one-hot feature assembly.

mod geohash;
mod grid;
mod onehot;
mod scaler;
mod vocab;

pub use geohash::{geohash_decode, geohash_encode, GeohashCell, GEOHASH_BASE32};
pub use grid::GridSpec;
pub use onehot::{feature_width, one_hot_encode, pad_truncate, DAY_CLASSES, HOUR_CLASSES};
pub(crate) use onehot::write_one_hot_row;
pub use scaler::{apply_minmax, fit_minmax, ScalerParams};
pub use vocab::{build_vocab, Vocab};

use crate::dataio::LocationRecord;
use crate::error::SpatialError;

/// Inclusive geographic bounds, in degrees.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundingBox {
    pub min_lat: f64,
    pub max_lat: f64,
    pub min_lon: f64,
    pub max_lon: f64,
}

impl BoundingBox {
    pub fn validate(&self) -> Result<(), SpatialError> {
        let finite = [self.min_lat, self.max_lat, self.min_lon, self.max_lon]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(SpatialError::InvalidBounds("bounds must be finite".into()));
        }
        if self.min_lat >= self.max_lat {
            return Err(SpatialError::InvalidBounds(format!(
                "min_lat {} must be below max_lat {}",
                self.min_lat, self.max_lat
            )));
        }
        if self.min_lon >= self.max_lon {
            return Err(SpatialError::InvalidBounds(format!(
                "min_lon {} must be below max_lon {}",
                self.min_lon, self.max_lon
            )));
        }
        Ok(())
    }

    /// Boundary points count as inside.
    pub fn contains(&self, lat: f64, lon: f64) -> bool {
        lat >= self.min_lat && lat <= self.max_lat && lon >= self.min_lon && lon <= self.max_lon
    }
}

/// Keeps only records inside `bbox` (boundaries inclusive).
pub fn filter_bbox(records: &[LocationRecord], bbox: &BoundingBox) -> Result<Vec<LocationRecord>, SpatialError> {
    bbox.validate()?;
    Ok(records
        .iter()
        .filter(|r| bbox.contains(r.latitude, r.longitude))
        .cloned()
        .collect())
}

/// Maps coordinates to discrete cell identifiers. Both variants produce
/// strings whose lexicographic order is deterministic, which is all the
/// vocabulary needs.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Discretizer {
    Grid(GridSpec),
    Geohash { precision: usize },
}

impl Discretizer {
    pub fn cell_id(&self, lat: f64, lon: f64) -> Result<String, SpatialError> {
        match self {
            Discretizer::Grid(spec) => {
                let (row, col) = spec.encode(lat, lon)?;
                Ok(spec.cell_id(row, col))
            }
            Discretizer::Geohash { precision } => geohash_encode(lat, lon, *precision),
        }
    }
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
    fn bbox_filter_is_boundary_inclusive() {
        let bbox = BoundingBox { min_lat: 46.50, max_lat: 46.61, min_lon: 6.58, max_lon: 6.73 };
        let records = vec![
            record(46.50, 6.58),  // on the corner: kept
            record(46.61, 6.73),  // opposite corner: kept
            record(46.55, 6.60),  // interior: kept
            record(46.499, 6.60), // just below: dropped
            record(46.55, 6.731), // just east: dropped
        ];
        let kept = filter_bbox(&records, &bbox).unwrap();
        assert_eq!(kept.len(), 3);
    }

    #[test]
    fn inverted_bounds_are_rejected() {
        let bbox = BoundingBox { min_lat: 47.0, max_lat: 46.0, min_lon: 6.0, max_lon: 7.0 };
        assert!(filter_bbox(&[], &bbox).is_err());
        let bbox = BoundingBox { min_lat: 46.0, max_lat: 47.0, min_lon: 6.0, max_lon: f64::NAN };
        assert!(bbox.validate().is_err());
    }
}
