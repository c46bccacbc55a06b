//! MCC-maximizing decision threshold.

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::eval::ConfusionCounts;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub threshold: f64,
    /// MCC at the threshold; undefined MCC counts as 0.
    pub mcc: f64,
    /// Set when every score was identical and 0.5 was returned.
    pub degenerate: bool,
}

/// Candidate thresholds: 0, midpoints of adjacent distinct scores, and 1.
pub fn candidate_thresholds(scores: &[(f64, Label)]) -> Vec<f64> {
    let mut distinct: Vec<f64> = scores.iter().map(|s| s.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let mut out = vec![0.0];
    out.extend(distinct.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    out.push(1.0);
    out
}

/// Sweeps the candidate thresholds (`score >= t` is positive) and returns the
/// lowest one attaining the maximum MCC.
pub fn calibrate_threshold(scores: &[(f64, Label)]) -> Result<Calibration> {
    let has = |l: Label| scores.iter().any(|s| s.1 == l);
    if !has(Label::Wlt) || !has(Label::Normal) {
        return Err(Error::InvalidInput("threshold calibration needs both classes".into()));
    }
    if scores.iter().any(|s| !s.0.is_finite()) {
        return Err(Error::InvalidInput("non-finite score in calibration set".into()));
    }
    let first = scores[0].0;
    if scores.iter().all(|s| s.0 == first) {
        log::warn!("degenerate calibration: all {} scores equal {first}", scores.len());
        let mcc = ConfusionCounts::at_threshold(scores, 0.5).mcc().unwrap_or(0.0);
        return Ok(Calibration { threshold: 0.5, mcc, degenerate: true });
    }
    let mut best = Calibration { threshold: 0.0, mcc: f64::NEG_INFINITY, degenerate: false };
    for t in candidate_thresholds(scores) {
        let mcc = ConfusionCounts::at_threshold(scores, t).mcc().unwrap_or(0.0);
        if mcc > best.mcc {
            best = Calibration { threshold: t, mcc, degenerate: false };
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labeled(pos: &[f64], neg: &[f64]) -> Vec<(f64, Label)> {
        pos.iter()
            .map(|&s| (s, Label::Wlt))
            .chain(neg.iter().map(|&s| (s, Label::Normal)))
            .collect()
    }

    /// Direct formula MCC over every candidate; no shared code with the sweep.
    fn oracle(scores: &[(f64, Label)]) -> f64 {
        let mut values: Vec<f64> = scores.iter().map(|s| s.0).collect();
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        values.dedup();
        let mut cands = vec![0.0];
        for i in 1..values.len() {
            cands.push((values[i - 1] + values[i]) / 2.0);
        }
        cands.push(1.0);
        let mut best_t = 0.0;
        let mut best = f64::NEG_INFINITY;
        for &t in &cands {
            let (mut tp, mut fp, mut fn_, mut tn) = (0.0, 0.0, 0.0, 0.0);
            for &(s, y) in scores {
                match (s >= t, y == Label::Wlt) {
                    (true, true) => tp += 1.0,
                    (true, false) => fp += 1.0,
                    (false, true) => fn_ += 1.0,
                    (false, false) => tn += 1.0,
                }
            }
            let d: f64 = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
            let m = if d == 0.0 { 0.0 } else { (tp * tn - fp * fn_) / d.sqrt() };
            if m > best {
                best = m;
                best_t = t;
            }
        }
        best_t
    }

    #[test]
    fn separated_scores() {
        let s = labeled(&[0.9, 0.8], &[0.2, 0.1]);
        assert_eq!(candidate_thresholds(&s), vec![0.0, 0.15000000000000002, 0.5, 0.8500000000000001, 1.0]);
        let c = calibrate_threshold(&s).unwrap();
        assert_eq!(c.threshold, 0.5);
        assert_eq!(c.mcc, 1.0);
        let at_015 = ConfusionCounts::at_threshold(&s, 0.15).mcc().unwrap();
        assert!((at_015 - 1.0 / 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn interleaved_scores() {
        let s = labeled(&[0.9, 0.5, 0.3], &[0.7, 0.4, 0.1]);
        assert_eq!(calibrate_threshold(&s).unwrap().threshold, oracle(&s));
    }

    #[test]
    fn degenerate_and_errors() {
        let c = calibrate_threshold(&labeled(&[0.4], &[0.4, 0.4])).unwrap();
        assert!(c.degenerate);
        assert_eq!(c.threshold, 0.5);
        assert!(calibrate_threshold(&labeled(&[0.4, 0.5], &[])).is_err());
        assert!(calibrate_threshold(&labeled(&[f64::NAN], &[0.1])).is_err());
    }

    proptest! {
        #[test]
        fn matches_sweep_oracle(
            raw in proptest::collection::vec((0u32..20, any::<bool>()), 2..50),
        ) {
            let mut scores: Vec<(f64, Label)> =
                raw.iter().map(|&(s, y)| (s as f64 / 19.0, Label::from_bool(y))).collect();
            scores[0].1 = Label::Wlt;
            scores[1].1 = Label::Normal;
            let c = calibrate_threshold(&scores).unwrap();
            if !c.degenerate {
                prop_assert_eq!(c.threshold, oracle(&scores));
            }
        }
    }
}
