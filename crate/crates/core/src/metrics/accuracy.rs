//! Top-n classification accuracy with deterministic tie handling.

use ndarray::Array2;

use crate::error::ModelError;

/// The n values reported by default.
pub const TOP_N_VALUES: [usize; 4] = [1, 3, 5, 10];

/// Zero-based rank of the true class in one probability row: the number of
/// classes strictly more probable, plus ties that win on a lower index.
/// The row hits top-n exactly when this rank is below n.
pub(crate) fn label_rank(row: &[f64], label: usize) -> Result<usize, ModelError> {
    let p_true = row[label];
    if !p_true.is_finite() {
        return Err(ModelError::NonFinite {
            what: "probability row",
            location: format!("class {label}"),
        });
    }
    let mut rank = 0;
    for (class, &p) in row.iter().enumerate() {
        if p > p_true || (p == p_true && class < label) {
            rank += 1;
        }
    }
    Ok(rank)
}

/// Fraction of rows whose true label lands among the n highest-probability
/// classes. Ties are broken by ascending class index, so equal-probability
/// classes occupy stable rank positions; n above the class count counts
/// every row as a hit.
pub fn top_n_accuracy(
    probabilities: &Array2<f64>,
    labels: &[usize],
    n: usize,
) -> Result<f64, ModelError> {
    if labels.is_empty() {
        return Err(ModelError::EmptyEvaluationSet);
    }
    if labels.len() != probabilities.nrows() {
        return Err(ModelError::ShapeMismatch(format!(
            "{} labels for {} probability rows",
            labels.len(),
            probabilities.nrows()
        )));
    }
    let classes = probabilities.ncols();
    let n = n.min(classes);
    let mut hits = 0usize;
    for (row, &label) in probabilities.rows().into_iter().zip(labels) {
        if label >= classes {
            return Err(ModelError::LabelOutOfRange { label, classes });
        }
        if label_rank(row.as_slice().expect("row-major layout"), label)? < n {
            hits += 1;
        }
    }
    Ok(hits as f64 / labels.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;
    use rand::Rng;

    use crate::seeding::rng_for;

    /// Brute-force oracle: sort class indices by (probability desc, index
    /// asc) and test membership in the first n.
    fn oracle(probabilities: &Array2<f64>, labels: &[usize], n: usize) -> f64 {
        let n = n.min(probabilities.ncols());
        let mut hits = 0;
        for (row, &label) in probabilities.rows().into_iter().zip(labels) {
            let mut order: Vec<usize> = (0..row.len()).collect();
            order.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
            if order[..n].contains(&label) {
                hits += 1;
            }
        }
        hits as f64 / labels.len() as f64
    }

    #[test]
    fn rank_inspection_on_a_single_row() {
        let probabilities = arr2(&[[0.5, 0.3, 0.2]]);
        assert_eq!(top_n_accuracy(&probabilities, &[1], 1).unwrap(), 0.0);
        assert_eq!(top_n_accuracy(&probabilities, &[1], 2).unwrap(), 1.0);
    }

    #[test]
    fn n_at_or_above_the_class_count_hits_everything() {
        let probabilities = arr2(&[[0.1, 0.2, 0.7], [0.9, 0.05, 0.05]]);
        assert_eq!(top_n_accuracy(&probabilities, &[0, 1], 3).unwrap(), 1.0);
        assert_eq!(top_n_accuracy(&probabilities, &[0, 1], 50).unwrap(), 1.0);
    }

    #[test]
    fn ties_resolve_toward_the_lower_class_index() {
        // Classes 0 and 1 tie; the top-1 slot belongs to class 0.
        let probabilities = arr2(&[[0.4, 0.4, 0.2]]);
        assert_eq!(top_n_accuracy(&probabilities, &[1], 1).unwrap(), 0.0);
        assert_eq!(top_n_accuracy(&probabilities, &[0], 1).unwrap(), 1.0);
        assert_eq!(top_n_accuracy(&probabilities, &[1], 2).unwrap(), 1.0);
    }

    #[test]
    fn zero_n_never_hits() {
        let probabilities = arr2(&[[1.0, 0.0]]);
        assert_eq!(top_n_accuracy(&probabilities, &[0], 0).unwrap(), 0.0);
    }

    #[test]
    fn matches_the_sort_oracle_exactly_on_random_inputs() {
        let mut rng = rng_for(404, "metrics/oracle");
        for _ in 0..50 {
            let rows = rng.gen_range(1..20);
            let classes = rng.gen_range(1..12);
            let probabilities =
                Array2::from_shape_fn((rows, classes), |_| rng.gen_range(0.0..1.0));
            let labels: Vec<usize> = (0..rows).map(|_| rng.gen_range(0..classes)).collect();
            for n in 0..=classes + 1 {
                assert_eq!(
                    top_n_accuracy(&probabilities, &labels, n).unwrap(),
                    oracle(&probabilities, &labels, n),
                    "rows={rows} classes={classes} n={n}"
                );
            }
        }
    }

    #[test]
    fn accuracy_is_monotone_in_n_and_top_1_matches_argmax() {
        let mut rng = rng_for(405, "metrics/monotone");
        let probabilities = Array2::from_shape_fn((40, 7), |_| rng.gen_range(0.0..1.0));
        let labels: Vec<usize> = (0..40).map(|_| rng.gen_range(0..7)).collect();
        let mut previous = 0.0;
        for n in 1..=7 {
            let accuracy = top_n_accuracy(&probabilities, &labels, n).unwrap();
            assert!(accuracy >= previous);
            previous = accuracy;
        }
        let argmax_hits = probabilities
            .rows()
            .into_iter()
            .zip(&labels)
            .filter(|(row, &label)| {
                let best = (0..row.len()).max_by(|&a, &b| row[a].total_cmp(&row[b]).then(b.cmp(&a)));
                best == Some(label)
            })
            .count();
        assert_eq!(
            top_n_accuracy(&probabilities, &labels, 1).unwrap(),
            argmax_hits as f64 / labels.len() as f64
        );
    }

    #[test]
    fn random_rows_score_near_n_over_k() {
        // With uniform-random scores and random labels, each label has
        // probability n/K of landing in the top n.
        let mut rng = rng_for(406, "metrics/chance");
        let probabilities = Array2::from_shape_fn((1000, 10), |_| rng.gen_range(0.0..1.0));
        let labels: Vec<usize> = (0..1000).map(|_| rng.gen_range(0..10)).collect();
        let accuracy = top_n_accuracy(&probabilities, &labels, 3).unwrap();
        assert!((accuracy - 0.3).abs() < 0.05, "got {accuracy}");
    }

    #[test]
    fn bad_inputs_are_rejected() {
        let probabilities = arr2(&[[0.5, 0.5]]);
        assert!(matches!(
            top_n_accuracy(&probabilities, &[], 1),
            Err(ModelError::EmptyEvaluationSet)
        ));
        assert!(matches!(
            top_n_accuracy(&probabilities, &[0, 1], 1),
            Err(ModelError::ShapeMismatch(_))
        ));
        assert!(matches!(
            top_n_accuracy(&probabilities, &[2], 1),
            Err(ModelError::LabelOutOfRange { label: 2, classes: 2 })
        ));
        let bad = arr2(&[[f64::NAN, 0.5]]);
        assert!(matches!(top_n_accuracy(&bad, &[0], 1), Err(ModelError::NonFinite { .. })));
    }
}
