//! Dominance relation and frontier extraction over (utility, privacy) pairs.
//!
//! Both axes point the same way — larger is better — so the frontier is the
//! set of points no other point beats on both axes at once.

use serde::{Deserialize, Serialize};

/// True when `a` is at least as good as `b` on both axes and strictly
/// better on at least one. Irreflexive by the strictness requirement.
pub fn dominates(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 >= b.0 && a.1 >= b.1 && (a.0 > b.0 || a.1 > b.1)
}

/// Indices (ascending, so stable with the input order) of the points no
/// other point dominates. Duplicates of a frontier point all survive:
/// neither copy beats the other strictly.
///
/// Sort-based: walking utility groups from high to low, a point survives iff
/// it holds its group's best privacy **and** that privacy strictly beats
/// every higher-utility group's best (otherwise some higher-utility point
/// ties or beats it on privacy and wins on utility).
pub fn pareto_front(points: &[(f64, f64)]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| points[j].0.total_cmp(&points[i].0));

    let mut front = Vec::new();
    let mut best_privacy = f64::NEG_INFINITY;
    let mut group_start = 0;
    while group_start < order.len() {
        let utility = points[order[group_start]].0;
        let mut group_end = group_start;
        while group_end < order.len() && points[order[group_end]].0 == utility {
            group_end += 1;
        }
        let group = &order[group_start..group_end];
        let group_best = group
            .iter()
            .map(|&i| points[i].1)
            .fold(f64::NEG_INFINITY, f64::max);
        if group_best > best_privacy {
            front.extend(group.iter().copied().filter(|&i| points[i].1 == group_best));
            best_privacy = group_best;
        }
        group_start = group_end;
    }
    front.sort_unstable();
    front
}

/// Where an outside point stands relative to a computed frontier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExternalVerdict {
    /// Nothing on the frontier dominates it — it would extend or sit on it.
    OnFront,
    /// Some frontier member beats it on both axes.
    Dominated,
}

/// Classifies a point against frontier members: dominated iff at least one
/// member dominates it. A point equal to a member is *not* dominated.
pub fn classify_external(point: (f64, f64), front: &[(f64, f64)]) -> ExternalVerdict {
    if front.iter().any(|&member| dominates(member, point)) {
        ExternalVerdict::Dominated
    } else {
        ExternalVerdict::OnFront
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::rng_for;
    use rand::Rng;

    /// Brute-force reference: a point is on the front iff nothing dominates it.
    fn oracle_front(points: &[(f64, f64)]) -> Vec<usize> {
        (0..points.len())
            .filter(|&i| !points.iter().any(|&p| dominates(p, points[i])))
            .collect()
    }

    #[test]
    fn dominance_needs_at_least_one_strict_axis() {
        assert!(dominates((0.9, 0.5), (0.8, 0.4)));
        assert!(dominates((0.9, 0.5), (0.9, 0.4)));
        assert!(dominates((0.9, 0.5), (0.8, 0.5)));
        // Equal on both axes: no strict edge, so no dominance either way.
        assert!(!dominates((0.9, 0.5), (0.9, 0.5)));
        // Incomparable trade-off pair.
        assert!(!dominates((0.9, 0.3), (0.8, 0.4)));
        assert!(!dominates((0.8, 0.4), (0.9, 0.3)));
    }

    #[test]
    fn front_of_the_worked_example() {
        let points = [(1.0, 1.0), (2.0, 2.0), (1.0, 2.0), (3.0, 0.0)];
        assert_eq!(pareto_front(&points), vec![1, 3]);
    }

    #[test]
    fn degenerate_sets() {
        assert_eq!(pareto_front(&[]), Vec::<usize>::new());
        assert_eq!(pareto_front(&[(0.4, 0.6)]), vec![0]);
        // All identical: nothing is strictly better, everything survives.
        let same = [(0.5, 0.5); 4];
        assert_eq!(pareto_front(&same), vec![0, 1, 2, 3]);
    }

    #[test]
    fn duplicates_of_a_front_point_are_all_retained() {
        let points = [(2.0, 2.0), (3.0, 0.0), (2.0, 2.0), (1.0, 1.0)];
        assert_eq!(pareto_front(&points), vec![0, 1, 2]);
    }

    #[test]
    fn matches_the_quadratic_oracle_on_random_sets() {
        let mut rng = rng_for(0, "front-oracle");
        for round in 0..500 {
            let n = rng.gen_range(0..=200);
            // Alternate continuous coordinates with coarsely quantized ones
            // so ties and duplicates get exercised hard.
            let levels = [0, 2, 3, 5][round % 4];
            let mut sample = || -> f64 {
                let v: f64 = rng.gen::<f64>();
                if levels == 0 {
                    v
                } else {
                    (v * levels as f64).floor() / levels as f64
                }
            };
            let points: Vec<(f64, f64)> = (0..n).map(|_| (sample(), sample())).collect();
            assert_eq!(
                pareto_front(&points),
                oracle_front(&points),
                "round {round} diverged on {points:?}"
            );
        }
    }

    #[test]
    fn front_is_idempotent_and_internally_non_dominated() {
        let mut rng = rng_for(1, "front-laws");
        for _ in 0..100 {
            let n = rng.gen_range(1..=80);
            let points: Vec<(f64, f64)> = (0..n)
                .map(|_| {
                    let q = |v: f64| (v * 4.0).floor() / 4.0;
                    (q(rng.gen::<f64>()), q(rng.gen::<f64>()))
                })
                .collect();
            let front = pareto_front(&points);

            // No member dominates another.
            for &i in &front {
                for &j in &front {
                    assert!(!dominates(points[i], points[j]));
                }
            }
            // Every non-member is dominated by at least one member.
            for i in 0..points.len() {
                if !front.contains(&i) {
                    assert!(front.iter().any(|&j| dominates(points[j], points[i])));
                }
            }
            // Taking the front of the front changes nothing.
            let subset: Vec<(f64, f64)> = front.iter().map(|&i| points[i]).collect();
            let again = pareto_front(&subset);
            assert_eq!(again, (0..subset.len()).collect::<Vec<_>>());
        }
    }

    #[test]
    fn adding_points_shifts_the_front_the_expected_way() {
        let base = vec![(2.0, 2.0), (3.0, 0.0)];
        let front: Vec<(f64, f64)> = pareto_front(&base).iter().map(|&i| base[i]).collect();
        assert_eq!(front, base);

        // A dominated addition leaves the surviving set unchanged.
        let mut with_dominated = base.clone();
        with_dominated.push((1.0, 1.0));
        let survivors: Vec<(f64, f64)> = pareto_front(&with_dominated)
            .iter()
            .map(|&i| with_dominated[i])
            .collect();
        assert_eq!(survivors, base);

        // An addition dominating every member evicts them all.
        let mut with_dominating = base.clone();
        with_dominating.push((4.0, 3.0));
        assert_eq!(pareto_front(&with_dominating), vec![2]);
    }

    #[test]
    fn external_points_classify_by_member_dominance() {
        let front = [(0.9, 0.2), (0.6, 0.7)];
        // Equal to a member: not dominated.
        assert_eq!(classify_external((0.9, 0.2), &front), ExternalVerdict::OnFront);
        // Strictly inside.
        assert_eq!(classify_external((0.5, 0.5), &front), ExternalVerdict::Dominated);
        // Beats every member on utility: extends the front.
        assert_eq!(classify_external((0.95, 0.1), &front), ExternalVerdict::OnFront);
        // Fills a gap without being beaten.
        assert_eq!(classify_external((0.8, 0.6), &front), ExternalVerdict::OnFront);
    }
}
