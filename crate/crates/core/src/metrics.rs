//! Change-metric formulas and classification scores.

use crate::error::{Error, Result};

/// Proportions of a change's modifications that fall on each file.
#[derive(Debug, Clone, PartialEq)]
pub struct FileChangeProfile {
    proportions: Vec<f64>,
}

const PROPORTION_SUM_TOLERANCE: f64 = 1e-9;

impl FileChangeProfile {
    pub fn new(proportions: Vec<f64>) -> Result<Self> {
        if proportions.is_empty() {
            return Err(Error::Probability("profile has no files".into()));
        }
        if let Some(p) = proportions.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::Probability(format!("invalid proportion {p}")));
        }
        let sum: f64 = proportions.iter().sum();
        if (sum - 1.0).abs() > PROPORTION_SUM_TOLERANCE {
            return Err(Error::Probability(format!("proportions sum to {sum}, not 1")));
        }
        Ok(Self { proportions })
    }

    /// Profile from per-file modified line counts.
    pub fn from_counts(counts: &[f64]) -> Result<Self> {
        let total: f64 = counts.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Probability("counts must have a positive total".into()));
        }
        Self::new(counts.iter().map(|c| c / total).collect())
    }

    pub fn proportions(&self) -> &[f64] {
        &self.proportions
    }

    pub fn n(&self) -> usize {
        self.proportions.len()
    }
}

/// Shannon entropy in bits, with `0 * log2(0) = 0`.
pub fn entropy(profile: &FileChangeProfile) -> f64 {
    let h: f64 = profile
        .proportions
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.log2())
        .sum();
    // -0.0 for one-hot profiles
    (-h).max(0.0)
}

/// Mean of the per-file intervals (days) since the previous change.
pub fn average_age(intervals: &[f64]) -> Result<f64> {
    if intervals.is_empty() {
        return Err(Error::Empty("no intervals".into()));
    }
    if let Some(v) = intervals.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::Probability(format!("invalid interval {v}")));
    }
    Ok(intervals.iter().sum::<f64>() / intervals.len() as f64)
}

/// Churn metrics after normalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizedChurn {
    pub la: f64,
    pub ld: f64,
    pub lt: f64,
    pub nuc: f64,
    /// `la`/`ld` were left as raw counts because `lt` was zero.
    pub raw: bool,
}

/// Normalizes `la`/`ld` by `lt` and `lt`/`nuc` by `nf`.
///
/// When `lt` is zero (a change that only adds new files) `la` and `ld` pass
/// through unchanged and the result is marked `raw`.
pub fn normalize_churn(la: f64, ld: f64, lt: f64, nf: f64, nuc: f64) -> Result<NormalizedChurn> {
    if !(nf >= 1.0) {
        return Err(Error::FileCount(nf));
    }
    for (name, v) in [("la", la), ("ld", ld), ("lt", lt), ("nuc", nuc)] {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::Parse {
                row: 0,
                column: name.into(),
                value: v.to_string(),
                reason: "churn inputs must be finite and non-negative".into(),
            });
        }
    }
    let (la_n, ld_n, raw) = if lt > 0.0 {
        (la / lt, ld / lt, false)
    } else {
        (la, ld, la > 0.0 || ld > 0.0)
    };
    Ok(NormalizedChurn {
        la: la_n,
        ld: ld_n,
        lt: lt / nf,
        nuc: nuc / nf,
        raw,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, fp: u64, tn: u64, fn_: u64) -> Self {
        Self { tp, fp, tn, fn_ }
    }

    /// Tallies predictions against truth. Panics on length mismatch.
    pub fn from_predictions(predicted: &[bool], actual: &[bool]) -> Self {
        assert_eq!(predicted.len(), actual.len(), "prediction/label length mismatch");
        let mut c = Self::default();
        for (&p, &a) in predicted.iter().zip(actual) {
            match (p, a) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }
}

/// `tp / (tp + fn)`.
pub fn recall(c: &ConfusionCounts) -> Result<f64> {
    let denom = c.tp + c.fn_;
    if denom == 0 {
        return Err(Error::Undefined("recall needs at least one actual positive"));
    }
    Ok(c.tp as f64 / denom as f64)
}

/// `tp / (tp + fp)`.
pub fn precision(c: &ConfusionCounts) -> Result<f64> {
    let denom = c.tp + c.fp;
    if denom == 0 {
        return Err(Error::Undefined("precision needs at least one predicted positive"));
    }
    Ok(c.tp as f64 / denom as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn profile(p: &[f64]) -> FileChangeProfile {
        FileChangeProfile::new(p.to_vec()).unwrap()
    }

    #[test]
    fn entropy_examples() {
        // 0.5*1 + 2 * 0.25*2 bits. The often-quoted worked value of 1.0 for this
        // profile does not follow from the formula.
        assert_abs_diff_eq!(entropy(&profile(&[0.5, 0.25, 0.25])), 1.5, epsilon = 1e-12);
        assert_eq!(entropy(&profile(&[1.0])), 0.0);
        // mpmath at 30 digits: 1.15677964944703947266...
        assert_abs_diff_eq!(entropy(&profile(&[0.7, 0.2, 0.1])), 1.156_779_649_447_039_5, epsilon = 1e-12);
        assert_eq!(entropy(&profile(&[0.0, 1.0, 0.0])), 0.0);
    }

    #[test]
    fn bad_profiles() {
        for p in [vec![], vec![0.5, 0.6], vec![-0.1, 1.1], vec![f64::NAN, 1.0]] {
            assert_eq!(FileChangeProfile::new(p).unwrap_err().code(), "E_PROB");
        }
        assert!(FileChangeProfile::new(vec![0.5, 0.5 + 5e-10]).is_ok());
        assert_eq!(profile(&[0.25, 0.75]).n(), 2);
        assert_eq!(FileChangeProfile::from_counts(&[2.0, 1.0, 1.0]).unwrap(), profile(&[0.5, 0.25, 0.25]));
    }

    #[test]
    fn age_examples() {
        assert_eq!(average_age(&[3.0, 5.0, 4.0]).unwrap(), 4.0);
        assert_eq!(average_age(&[7.0]).unwrap(), 7.0);
        assert_eq!(average_age(&[]).unwrap_err().code(), "E_EMPTY");
    }

    #[test]
    fn churn_examples() {
        let c = normalize_churn(10.0, 5.0, 100.0, 2.0, 4.0).unwrap();
        assert_eq!((c.la, c.ld, c.lt, c.nuc, c.raw), (0.1, 0.05, 50.0, 2.0, false));
        let c = normalize_churn(30.0, 0.0, 0.0, 1.0, 1.0).unwrap();
        assert_eq!((c.la, c.ld, c.lt, c.nuc, c.raw), (30.0, 0.0, 0.0, 1.0, true));
        let c = normalize_churn(0.0, 0.0, 0.0, 1.0, 0.0).unwrap();
        assert_eq!((c.la, c.ld, c.lt, c.nuc, c.raw), (0.0, 0.0, 0.0, 0.0, false));
        assert_eq!(normalize_churn(1.0, 1.0, 1.0, 0.0, 1.0).unwrap_err().code(), "E_NF");
    }

    #[test]
    fn recall_precision_examples() {
        assert_eq!(recall(&ConfusionCounts::new(5, 0, 0, 5)).unwrap(), 0.5);
        assert_eq!(recall(&ConfusionCounts::new(3, 0, 0, 1)).unwrap(), 0.75);
        assert_eq!(recall(&ConfusionCounts::new(0, 4, 4, 0)).unwrap_err().code(), "E_UNDEFINED");
        assert_eq!(precision(&ConfusionCounts::new(7, 3, 0, 0)).unwrap(), 0.7);
        assert_eq!(precision(&ConfusionCounts::new(0, 5, 0, 0)).unwrap(), 0.0);
        assert_eq!(precision(&ConfusionCounts::new(0, 0, 3, 3)).unwrap_err().code(), "E_UNDEFINED");
    }

    #[test]
    fn confusion_from_predictions() {
        let c = ConfusionCounts::from_predictions(&[true, true, false, false], &[true, false, false, true]);
        assert_eq!(c, ConfusionCounts::new(1, 1, 1, 1));
    }

    fn arb_profile() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..10.0, 1..12).prop_filter_map("positive total", |w| {
            let t: f64 = w.iter().sum();
            (t > 1e-6).then(|| w.iter().map(|x| x / t).collect())
        })
    }

    proptest! {
        #[test]
        fn entropy_bounds(p in arb_profile()) {
            let prof = FileChangeProfile::new(p.clone()).unwrap();
            let h = entropy(&prof);
            let n = p.len() as f64;
            prop_assert!(h >= 0.0);
            prop_assert!(h <= n.log2() + 1e-9);
        }

        #[test]
        fn entropy_permutation_invariant(p in arb_profile(), rot in 0usize..12) {
            let mut q = p.clone();
            let k = rot % q.len();
            q.rotate_left(k);
            q.reverse();
            let a = entropy(&FileChangeProfile::new(p).unwrap());
            let b = entropy(&FileChangeProfile::new(q).unwrap());
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn uniform_attains_log2_n(n in 1usize..64) {
            let h = entropy(&FileChangeProfile::new(vec![1.0 / n as f64; n]).unwrap());
            prop_assert!((h - (n as f64).log2()).abs() < 1e-9);
        }

        #[test]
        fn scores_monotone_in_tp(tp in 0u64..1000, fp in 0u64..1000, fn_ in 0u64..1000) {
            let a = ConfusionCounts::new(tp, fp, 0, fn_);
            let b = ConfusionCounts::new(tp + 1, fp, 0, fn_);
            if let Ok(r) = recall(&a) { prop_assert!(recall(&b).unwrap() >= r); }
            if let Ok(p) = precision(&a) { prop_assert!(precision(&b).unwrap() >= p); }
        }
    }
}
