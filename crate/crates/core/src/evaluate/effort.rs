use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Floor on inspection effort so zero-churn changes still get a finite score.
pub const EFFORT_FLOOR: f64 = 1e-6;

/// One change in an effort-aware ranking.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankedChange {
    /// Row index in the input dataset.
    pub row: usize,
    pub probability: f64,
    /// Stored `la + ld`.
    pub effort: f64,
    /// `probability / max(effort, EFFORT_FLOOR)`.
    pub score: f64,
    pub raw_churn: bool,
}

pub fn effort_score(probability: f64, effort: f64) -> f64 {
    probability / effort.max(EFFORT_FLOOR)
}

/// Orders changes by predicted risk per line of churn, highest first.
/// Ties keep input order.
pub fn effort_rank(d: &Dataset, scores: &[f64]) -> Result<Vec<RankedChange>> {
    if scores.len() != d.len() {
        return Err(Error::Dim(format!(
            "{} scores for {} rows",
            scores.len(),
            d.len()
        )));
    }
    let mut ranked: Vec<RankedChange> = d
        .records()
        .iter()
        .zip(scores)
        .enumerate()
        .map(|(row, (r, &p))| RankedChange {
            row,
            probability: p,
            effort: r.churn(),
            score: effort_score(p, r.churn()),
            raw_churn: r.is_raw_churn(),
        })
        .collect();
    ranked.sort_by(|a, b| b.score.total_cmp(&a.score));
    Ok(ranked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{ChangeRecord, Metric};
    use proptest::prelude::*;

    fn churn_rows(churn: &[(f64, f64, f64)]) -> Dataset {
        Dataset::new(
            "e",
            churn
                .iter()
                .map(|&(la, ld, lt)| {
                    let mut r = ChangeRecord::new([1.0; 14], false);
                    r.set(Metric::La, la);
                    r.set(Metric::Ld, ld);
                    r.set(Metric::Lt, lt);
                    r
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn score_example() {
        assert_eq!(effort_score(0.8, 4.0), 0.2);
        assert_eq!(effort_score(0.0, 4.0), 0.0);
        assert_eq!(effort_score(0.5, 0.0), 0.5 / EFFORT_FLOOR);
    }

    #[test]
    fn ranking_order_and_ties() {
        let d = churn_rows(&[(1.0, 1.0, 5.0), (3.0, 1.0, 5.0), (0.0, 0.0, 0.0), (1.0, 1.0, 5.0), (30.0, 0.0, 0.0)]);
        let ranked = effort_rank(&d, &[0.4, 0.8, 0.0, 0.4, 0.9]).unwrap();
        let rows: Vec<usize> = ranked.iter().map(|r| r.row).collect();
        // 0.2, 0.2, 0.2 tie between rows 0, 1, 3 -> input order; 0.03 next; zero last
        assert_eq!(rows, [0, 1, 3, 4, 2]);
        assert!(ranked[3].raw_churn);
        assert!(!ranked[4].raw_churn);
        assert_eq!(effort_rank(&d, &[0.1]).unwrap_err().code(), "E_DIM");
    }

    proptest! {
        #[test]
        fn ranking_is_a_permutation(rows in prop::collection::vec((0.0f64..50.0, 0.0f64..50.0, 0.0f64..1.0), 0..40)) {
            let d = churn_rows(&rows.iter().map(|&(la, ld, _)| (la, ld, 1.0)).collect::<Vec<_>>());
            let scores: Vec<f64> = rows.iter().map(|r| r.2).collect();
            let ranked = effort_rank(&d, &scores).unwrap();
            let mut seen: Vec<usize> = ranked.iter().map(|r| r.row).collect();
            seen.sort();
            prop_assert_eq!(seen, (0..rows.len()).collect::<Vec<_>>());
            prop_assert!(ranked.windows(2).all(|w| w[0].score >= w[1].score));
        }
    }
}
