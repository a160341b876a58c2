//! Closed location/user vocabulary fitted on training data.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::Discretizer;
use crate::dataio::TrajectoryDataset;
use crate::error::SpatialError;

/// Bijections between cell ids / user ids and dense class indices.
///
/// Location classes are the distinct cell ids of the fitting dataset in
/// sorted order; the pad class sits at index `num_locations()` (after every
/// real location). Users are indexed the same way. The vocabulary never
/// grows after fitting: lookups for unseen keys return `None` and callers
/// decide whether that drops a window or is fatal.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocab {
    location_classes: Vec<String>,
    user_classes: Vec<String>,
    location_lookup: HashMap<String, usize>,
    user_lookup: HashMap<String, usize>,
}

/// On-disk shape of a vocabulary.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VocabFile {
    schema_version: u32,
    location_classes: Vec<String>,
    user_classes: Vec<String>,
    pad_index: usize,
}

const SCHEMA_VERSION: u32 = 1;

impl Vocab {
    fn from_classes(location_classes: Vec<String>, user_classes: Vec<String>) -> Vocab {
        let location_lookup = location_classes
            .iter()
            .enumerate()
            .map(|(i, c)| (c.clone(), i))
            .collect();
        let user_lookup = user_classes
            .iter()
            .enumerate()
            .map(|(i, u)| (u.clone(), i))
            .collect();
        Vocab { location_classes, user_classes, location_lookup, user_lookup }
    }

    /// Number of real location classes (excluding pad).
    pub fn num_locations(&self) -> usize {
        self.location_classes.len()
    }

    /// The dedicated padding class, placed after all real locations.
    pub fn pad_index(&self) -> usize {
        self.location_classes.len()
    }

    pub fn num_users(&self) -> usize {
        self.user_classes.len()
    }

    pub fn location_index(&self, cell_id: &str) -> Option<usize> {
        self.location_lookup.get(cell_id).copied()
    }

    pub fn location_class(&self, index: usize) -> Option<&str> {
        self.location_classes.get(index).map(|s| s.as_str())
    }

    pub fn user_label(&self, user_id: &str) -> Option<usize> {
        self.user_lookup.get(user_id).copied()
    }

    pub fn user_class(&self, label: usize) -> Option<&str> {
        self.user_classes.get(label).map(|s| s.as_str())
    }

    /// Canonical JSON form; stable across runs for identical contents.
    pub fn to_json(&self) -> String {
        let file = VocabFile {
            schema_version: SCHEMA_VERSION,
            location_classes: self.location_classes.clone(),
            user_classes: self.user_classes.clone(),
            pad_index: self.pad_index(),
        };
        serde_json::to_string_pretty(&file).expect("vocab serialization cannot fail")
    }

    pub fn from_json(json: &str) -> Result<Vocab, SpatialError> {
        let file: VocabFile = serde_json::from_str(json)
            .map_err(|e| SpatialError::InvalidBounds(format!("bad vocabulary file: {e}")))?;
        if file.schema_version != SCHEMA_VERSION {
            return Err(SpatialError::InvalidBounds(format!(
                "unsupported vocabulary schema version {}",
                file.schema_version
            )));
        }
        if file.pad_index != file.location_classes.len() {
            return Err(SpatialError::InvalidBounds(format!(
                "pad_index {} does not follow the {} location classes",
                file.pad_index,
                file.location_classes.len()
            )));
        }
        Ok(Vocab::from_classes(file.location_classes, file.user_classes))
    }

    /// Hash of the canonical JSON form; checkpoints embed this to refuse
    /// evaluation against the wrong vocabulary.
    pub fn sha256(&self) -> String {
        let digest = Sha256::digest(self.to_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Fits a vocabulary on a (training) dataset: every distinct cell the
/// discretizer produces and every user become classes, sorted for
/// determinism.
pub fn build_vocab(dataset: &TrajectoryDataset, discretizer: &Discretizer) -> Result<Vocab, SpatialError> {
    let mut cells: Vec<String> = Vec::new();
    for trajectory in &dataset.trajectories {
        for point in &trajectory.points {
            cells.push(discretizer.cell_id(point.latitude, point.longitude)?);
        }
    }
    cells.sort();
    cells.dedup();
    if cells.is_empty() {
        return Err(SpatialError::EmptyVocab);
    }
    let users: Vec<String> = dataset.user_index.keys().cloned().collect();
    Ok(Vocab::from_classes(cells, users))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{DatasetMeta, Trajectory, TrajectoryPoint};
    use crate::spatial::{BoundingBox, GridSpec};

    fn dataset(points: &[(f64, f64)]) -> TrajectoryDataset {
        let trajectory = Trajectory {
            trajectory_id: "a-2012-W15".into(),
            user_id: "a".into(),
            points: points
                .iter()
                .map(|&(lat, lon)| TrajectoryPoint {
                    timestamp: chrono::NaiveDateTime::parse_from_str(
                        "2012-04-09T10:00:00",
                        "%Y-%m-%dT%H:%M:%S",
                    )
                    .unwrap(),
                    latitude: lat,
                    longitude: lon,
                    day_of_week: 1,
                    hour_of_day: 10,
                })
                .collect(),
        };
        TrajectoryDataset::from_trajectories(
            vec![trajectory],
            DatasetMeta { resolution_minutes: 10, bbox: None },
        )
    }

    fn grid() -> Discretizer {
        let bbox = BoundingBox { min_lat: 0.0, max_lat: 1.0, min_lon: 0.0, max_lon: 1.0 };
        Discretizer::Grid(GridSpec::with_cells(bbox, 10, 10).unwrap())
    }

    #[test]
    fn classes_are_sorted_and_pad_sits_last() {
        // Cells visited out of order: r00002c..., r00000c..., r00001c...
        let ds = dataset(&[(0.25, 0.05), (0.05, 0.05), (0.15, 0.05), (0.05, 0.05)]);
        let vocab = build_vocab(&ds, &grid()).unwrap();
        assert_eq!(vocab.num_locations(), 3);
        assert_eq!(vocab.location_index("r00000c00000"), Some(0));
        assert_eq!(vocab.location_index("r00001c00000"), Some(1));
        assert_eq!(vocab.location_index("r00002c00000"), Some(2));
        assert_eq!(vocab.pad_index(), 3);
        assert_eq!(vocab.location_index("r00009c00009"), None);
        assert_eq!(vocab.user_label("a"), Some(0));
        assert_eq!(vocab.user_label("nobody"), None);
    }

    #[test]
    fn json_round_trip_preserves_identity_and_hash() {
        let ds = dataset(&[(0.25, 0.05), (0.05, 0.05)]);
        let vocab = build_vocab(&ds, &grid()).unwrap();
        let reloaded = Vocab::from_json(&vocab.to_json()).unwrap();
        assert_eq!(reloaded, vocab);
        assert_eq!(reloaded.sha256(), vocab.sha256());
        assert_eq!(vocab.sha256().len(), 64);
    }

    #[test]
    fn corrupt_vocab_files_are_rejected() {
        assert!(Vocab::from_json("{}").is_err());
        let ds = dataset(&[(0.25, 0.05)]);
        let vocab = build_vocab(&ds, &grid()).unwrap();
        let tampered = vocab.to_json().replace("\"pad_index\": 1", "\"pad_index\": 5");
        assert!(Vocab::from_json(&tampered).is_err());
    }

    #[test]
    fn empty_dataset_cannot_fit_a_vocab() {
        let ds = TrajectoryDataset::from_trajectories(
            Vec::new(),
            DatasetMeta { resolution_minutes: 10, bbox: None },
        );
        assert!(matches!(build_vocab(&ds, &grid()), Err(SpatialError::EmptyVocab)));
    }
}
