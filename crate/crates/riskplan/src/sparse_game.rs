//! Sparse game graph construction: per-mode top-M agent selection, the
//! interaction mask, and min-max normalization of the retained risk values.

use serde::{Deserialize, Serialize};

use crate::risk::RiskMatrix;

/// Range below which min-max normalization is treated as degenerate: uniform
/// risk carries no discriminative prior, so every active entry maps to 0 and
/// the attention bias vanishes.
pub const DEGENERATE_RANGE: f64 = 1e-12;

/// Scope of the min-max statistics used for normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationScope {
    /// One min/max over every active entry of the matrix, keeping risk
    /// magnitudes comparable across planning modes.
    #[default]
    Global,
    /// Independent min/max per planning-mode row, for ablation.
    PerRow,
}

/// Top-M interaction structure over the plan-vs-agent risk matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseGameGraph {
    pub top_m: usize,
    /// Per row, exactly `min(M, K)` active entries.
    pub active: Vec<Vec<bool>>,
    /// Min-max normalized risk, zero wherever inactive.
    pub normalized: Vec<Vec<f64>>,
}

impl SparseGameGraph {
    pub fn rows(&self) -> usize {
        self.active.len()
    }

    pub fn cols(&self) -> usize {
        self.active.first().map_or(0, Vec::len)
    }

    pub fn active_count(&self, row: usize) -> usize {
        self.active[row].iter().filter(|&&a| a).count()
    }
}

/// Per planning mode, mark the `min(m, K)` highest-risk agents active.
/// Ties break toward the lower agent index, so the mask is deterministic.
pub fn select_top_m(risk: &RiskMatrix, m: usize) -> Vec<Vec<bool>> {
    assert!(m >= 1, "top-M selection requires m >= 1");
    risk.values
        .iter()
        .map(|row| {
            let mut order: Vec<usize> = (0..row.len()).collect();
            order.sort_by(|&i, &j| row[j].total_cmp(&row[i]).then(i.cmp(&j)));
            let mut mask = vec![false; row.len()];
            for &k in order.iter().take(m.min(row.len())) {
                mask[k] = true;
            }
            mask
        })
        .collect()
}

/// Min-max normalize the active risk values into `[0, 1]`; inactive entries
/// are zero. A degenerate range (all active values equal) maps to zero.
pub fn normalize_risk(
    risk: &RiskMatrix,
    active: &[Vec<bool>],
    scope: NormalizationScope,
) -> Vec<Vec<f64>> {
    let normalize_with = |row: &[f64], mask: &[bool], lo: f64, hi: f64| -> Vec<f64> {
        row.iter()
            .zip(mask)
            .map(|(&v, &on)| {
                if !on || hi - lo <= DEGENERATE_RANGE {
                    0.0
                } else {
                    (v - lo) / (hi - lo)
                }
            })
            .collect()
    };

    match scope {
        NormalizationScope::Global => {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for (row, mask) in risk.values.iter().zip(active) {
                for (&v, &on) in row.iter().zip(mask) {
                    if on {
                        lo = lo.min(v);
                        hi = hi.max(v);
                    }
                }
            }
            risk.values
                .iter()
                .zip(active)
                .map(|(row, mask)| normalize_with(row, mask, lo, hi))
                .collect()
        }
        NormalizationScope::PerRow => risk
            .values
            .iter()
            .zip(active)
            .map(|(row, mask)| {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for (&v, &on) in row.iter().zip(mask) {
                    if on {
                        lo = lo.min(v);
                        hi = hi.max(v);
                    }
                }
                normalize_with(row, mask, lo, hi)
            })
            .collect(),
    }
}

/// Selection plus normalization in one step.
pub fn build_graph(risk: &RiskMatrix, m: usize, scope: NormalizationScope) -> SparseGameGraph {
    let active = select_top_m(risk, m);
    let normalized = normalize_risk(risk, &active, scope);
    SparseGameGraph {
        top_m: m,
        active,
        normalized,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn matrix(rows: Vec<Vec<f64>>) -> RiskMatrix {
        RiskMatrix {
            values: rows,
            confidence_applied: true,
        }
    }

    #[test]
    fn saturated_when_m_exceeds_agents() {
        let m = matrix(vec![vec![0.1, 0.2], vec![0.3, 0.4]]);
        let mask = select_top_m(&m, 5);
        assert!(mask.iter().flatten().all(|&on| on));
    }

    #[test]
    fn empty_scene_gives_empty_mask() {
        let m = matrix(vec![vec![], vec![]]);
        let mask = select_top_m(&m, 2);
        assert_eq!(mask, vec![Vec::<bool>::new(); 2]);
    }

    #[test]
    fn top_two_of_four() {
        let m = matrix(vec![vec![0.9, 0.1, 0.9, 0.5]]);
        let mask = select_top_m(&m, 2);
        assert_eq!(mask[0], vec![true, false, true, false]);
    }

    #[test]
    fn ties_break_to_lower_index() {
        let m = matrix(vec![vec![0.7, 0.7, 0.7]]);
        let mask = select_top_m(&m, 2);
        assert_eq!(mask[0], vec![true, true, false]);
    }

    #[test]
    fn degenerate_range_maps_to_zero() {
        let m = matrix(vec![vec![0.4, 0.4], vec![0.4, 0.4]]);
        let mask = select_top_m(&m, 2);
        let n = normalize_risk(&m, &mask, NormalizationScope::Global);
        assert!(n.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn min_max_direct_arithmetic() {
        let m = matrix(vec![vec![0.2, 0.6, 1.0]]);
        let mask = select_top_m(&m, 3);
        let n = normalize_risk(&m, &mask, NormalizationScope::Global);
        for (got, expected) in n[0].iter().zip([0.0, 0.5, 1.0]) {
            assert!((got - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn single_active_entry_is_zero() {
        let m = matrix(vec![vec![0.8]]);
        let mask = select_top_m(&m, 1);
        let n = normalize_risk(&m, &mask, NormalizationScope::Global);
        assert_eq!(n[0], vec![0.0]);
    }

    #[test]
    fn inactive_entries_are_exactly_zero() {
        let m = matrix(vec![vec![0.9, 0.1, 0.5], vec![0.2, 0.8, 0.3]]);
        let g = build_graph(&m, 1, NormalizationScope::Global);
        for (row, mask) in g.normalized.iter().zip(&g.active) {
            for (&v, &on) in row.iter().zip(mask) {
                if !on {
                    assert_eq!(v, 0.0);
                }
            }
        }
    }

    #[test]
    fn per_row_scope_normalizes_rows_independently() {
        let m = matrix(vec![vec![0.1, 0.3], vec![0.5, 0.9]]);
        let mask = select_top_m(&m, 2);
        let n = normalize_risk(&m, &mask, NormalizationScope::PerRow);
        assert_eq!(n[0], vec![0.0, 1.0]);
        assert_eq!(n[1], vec![0.0, 1.0]);
    }

    proptest! {
        #[test]
        fn per_row_active_count_is_min_m_k(
            rows in proptest::collection::vec(
                proptest::collection::vec(0.0..1.0f64, 0..8), 1..5),
            m in 1usize..6,
        ) {
            let g = build_graph(&matrix(rows.clone()), m, NormalizationScope::Global);
            for (row, orig) in g.active.iter().zip(&rows) {
                let count = row.iter().filter(|&&on| on).count();
                prop_assert_eq!(count, m.min(orig.len()));
            }
        }

        #[test]
        fn normalization_preserves_active_ordering(
            row in proptest::collection::vec(0.0..1.0f64, 2..8),
            m in 1usize..8,
        ) {
            let mx = matrix(vec![row.clone()]);
            let mask = select_top_m(&mx, m);
            let n = normalize_risk(&mx, &mask, NormalizationScope::Global);
            for i in 0..row.len() {
                for j in 0..row.len() {
                    if mask[0][i] && mask[0][j] && row[i] < row[j] {
                        prop_assert!(n[0][i] <= n[0][j]);
                    }
                }
            }
        }

        #[test]
        fn selection_invariant_under_monotone_transform(
            rows in proptest::collection::vec(
                proptest::collection::vec(0.0..1.0f64, 1..7), 1..4),
            m in 1usize..5,
        ) {
            let base = select_top_m(&matrix(rows.clone()), m);
            // strictly increasing map: v -> 0.3 * exp(v) + 2 v
            let mapped: Vec<Vec<f64>> = rows
                .iter()
                .map(|r| r.iter().map(|&v| 0.3 * v.exp() + 2.0 * v).collect())
                .collect();
            let transformed = select_top_m(&matrix(mapped), m);
            prop_assert_eq!(base, transformed);
        }

        #[test]
        fn selection_deterministic_under_ties(
            vals in proptest::collection::vec(0.0..0.3f64, 4..8),
            m in 1usize..4,
        ) {
            // Quantize to force frequent ties.
            let row: Vec<f64> = vals.iter().map(|v| (v * 10.0).round() / 10.0).collect();
            let a = select_top_m(&matrix(vec![row.clone()]), m);
            let b = select_top_m(&matrix(vec![row]), m);
            prop_assert_eq!(a, b);
        }
    }
}
