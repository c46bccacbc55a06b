//! Binary classification metrics with the positive (WLT) class as class 1.
//!
//! Zero denominators yield 0 and set the matching flag in [`MetricFlags`].
//! AUC is the Mann-Whitney rank statistic with ties counted as one half,
//! which equals trapezoidal integration of the ROC curve.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn record(&mut self, truth: Label, predicted: Label) {
        match (truth, predicted) {
            (Label::Wlt, Label::Wlt) => self.tp += 1,
            (Label::Normal, Label::Wlt) => self.fp += 1,
            (Label::Wlt, Label::Normal) => self.fn_ += 1,
            (Label::Normal, Label::Normal) => self.tn += 1,
        }
    }

    /// Counts with `score >= threshold` predicted positive.
    pub fn at_threshold(scores: &[(f64, Label)], threshold: f64) -> Self {
        let mut c = ConfusionCounts::default();
        for &(s, truth) in scores {
            c.record(truth, Label::from_bool(s >= threshold));
        }
        c
    }

    /// Matthews correlation; `None` when any marginal is empty.
    pub fn mcc(&self) -> Option<f64> {
        let (tp, fp, fn_, tn) = (
            self.tp as f64,
            self.fp as f64,
            self.fn_ as f64,
            self.tn as f64,
        );
        let denom = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
        if denom == 0.0 {
            return None;
        }
        Some((tp * tn - fp * fn_) / denom.sqrt())
    }

    /// Swaps the roles of the two classes.
    pub fn swapped(&self) -> Self {
        ConfusionCounts {
            tp: self.tn,
            fp: self.fn_,
            fn_: self.fp,
            tn: self.tp,
        }
    }
}

pub fn confusion(labels: &[Label], predictions: &[Label]) -> Result<ConfusionCounts> {
    if labels.len() != predictions.len() {
        return Err(Error::InvalidInput(format!(
            "{} labels vs {} predictions",
            labels.len(),
            predictions.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::InvalidInput("empty evaluation set".into()));
    }
    let mut c = ConfusionCounts::default();
    for (&t, &p) in labels.iter().zip(predictions) {
        c.record(t, p);
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricFlags {
    pub precision_degenerate: bool,
    pub recall_degenerate: bool,
    pub f1_degenerate: bool,
    pub mcc_degenerate: bool,
    pub auc_undefined: bool,
}

impl MetricFlags {
    pub fn any(&self) -> bool {
        self.precision_degenerate
            || self.recall_degenerate
            || self.f1_degenerate
            || self.mcc_degenerate
            || self.auc_undefined
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub precision_pos: f64,
    pub recall_pos: f64,
    pub macro_f1: f64,
    pub mcc: f64,
    pub auc: Option<f64>,
    pub n: usize,
    pub flags: MetricFlags,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn f1(tp: usize, fp: usize, fn_: usize) -> Option<f64> {
    ratio(2 * tp, 2 * tp + fp + fn_)
}

/// Computes the report; `scores` (probability, truth) enables AUC.
pub fn metrics(counts: &ConfusionCounts, scores: Option<&[(f64, Label)]>) -> MetricReport {
    let mut flags = MetricFlags::default();
    let or_zero = |v: Option<f64>, flag: &mut bool| {
        v.unwrap_or_else(|| {
            *flag = true;
            0.0
        })
    };
    let precision_pos = or_zero(
        ratio(counts.tp, counts.tp + counts.fp),
        &mut flags.precision_degenerate,
    );
    let recall_pos = or_zero(
        ratio(counts.tp, counts.tp + counts.fn_),
        &mut flags.recall_degenerate,
    );
    let f1_pos = f1(counts.tp, counts.fp, counts.fn_);
    let f1_neg = f1(counts.tn, counts.fn_, counts.fp);
    if f1_pos.is_none() || f1_neg.is_none() {
        flags.f1_degenerate = true;
    }
    let macro_f1 = (f1_pos.unwrap_or(0.0) + f1_neg.unwrap_or(0.0)) / 2.0;
    let mcc = or_zero(counts.mcc(), &mut flags.mcc_degenerate);
    let auc = scores.and_then(|s| {
        let a = rank_auc(s);
        if a.is_none() {
            flags.auc_undefined = true;
        }
        a
    });
    MetricReport {
        precision_pos,
        recall_pos,
        macro_f1,
        mcc,
        auc,
        n: counts.total(),
        flags,
    }
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half. `None` unless both classes are present.
pub fn rank_auc(scores: &[(f64, Label)]) -> Option<f64> {
    let n_pos = scores.iter().filter(|(_, l)| l.is_positive()).count();
    let n_neg = scores.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut sorted: Vec<(f64, Label)> = scores.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Mid-ranks of tied groups are whole or half integers: 2 * rank is exact.
    let mut twice_rank_sum_pos: u128 = 0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1].0 == sorted[i].0 {
            j += 1;
        }
        // 1-based ranks i+1..=j+1
        let twice_mid = (i + 1 + j + 1) as u128;
        let pos_in_group = sorted[i..=j].iter().filter(|(_, l)| l.is_positive()).count() as u128;
        twice_rank_sum_pos += twice_mid * pos_in_group;
        i = j + 1;
    }
    let n_pos_u = n_pos as u128;
    let twice_u = twice_rank_sum_pos - n_pos_u * (n_pos_u + 1);
    Some(twice_u as f64 / (2.0 * n_pos as f64 * n_neg as f64))
}

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Summary> {
        let first = *values.first()?;
        if values.iter().all(|v| v.to_bits() == first.to_bits()) {
            return Some(Summary {
                mean: first,
                std: 0.0,
            });
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(Summary {
            mean,
            std: var.sqrt(),
        })
    }

    /// `mean_{std}` with three decimals, the table subscript form.
    pub fn subscript(&self) -> String {
        format!("{:.3}_{{{:.3}}}", self.mean, self.std)
    }
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3}±{:.3}", self.mean, self.std)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedAggregate {
    pub runs: usize,
    pub precision_pos: Summary,
    pub recall_pos: Summary,
    pub macro_f1: Summary,
    pub mcc: Summary,
    /// Present only when every run reported an AUC.
    pub auc: Option<Summary>,
}

pub fn aggregate_runs(reports: &[MetricReport]) -> Result<SeedAggregate> {
    if reports.is_empty() {
        return Err(Error::InvalidInput("no runs to aggregate".into()));
    }
    let col = |f: fn(&MetricReport) -> f64| {
        Summary::of(&reports.iter().map(f).collect::<Vec<_>>()).expect("non-empty")
    };
    let aucs: Option<Vec<f64>> = reports.iter().map(|r| r.auc).collect();
    Ok(SeedAggregate {
        runs: reports.len(),
        precision_pos: col(|r| r.precision_pos),
        recall_pos: col(|r| r.recall_pos),
        macro_f1: col(|r| r.macro_f1),
        mcc: col(|r| r.mcc),
        auc: aucs.as_deref().and_then(Summary::of),
    })
}

/// One row of the results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub model: String,
    pub input: String,
    pub aggregate: SeedAggregate,
}

/// Writes `model,input,pre,rec,macro_f1,mcc,auc` with `mean±std` cells.
pub fn write_table_csv<W: Write>(rows: &[TableRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["model", "input", "pre", "rec", "macro_f1", "mcc", "auc"])?;
    for row in rows {
        let a = &row.aggregate;
        out.write_record([
            row.model.clone(),
            row.input.clone(),
            a.precision_pos.to_string(),
            a.recall_pos.to_string(),
            a.macro_f1.to_string(),
            a.mcc.to_string(),
            a.auc.map(|s| s.to_string()).unwrap_or_default(),
        ])?;
    }
    out.flush().map_err(|e| Error::io("<table>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use Label::{Normal as N, Wlt as P};

    #[test]
    fn confusion_basics() {
        let c = confusion(&[P, N], &[P, N]).unwrap();
        assert_eq!((c.tp, c.tn, c.fp, c.fn_), (1, 1, 0, 0));
        let c = confusion(&[P, N], &[N, P]).unwrap();
        assert_eq!((c.tp, c.tn, c.fp, c.fn_), (0, 0, 1, 1));
        assert!(confusion(&[P], &[P, N]).is_err());
        assert!(confusion(&[], &[]).is_err());
    }

    #[test]
    fn confusion_matches_hand_tally() {
        let labels = [P, N, N, P, P, N, N, N, P, N];
        let preds = [P, P, N, N, P, N, P, N, P, N];
        let c = confusion(&labels, &preds).unwrap();
        // tally: positions 0,4,8 tp; 1,6 fp; 3 fn; rest tn
        assert_eq!(c, ConfusionCounts { tp: 3, fp: 2, fn_: 1, tn: 4 });
    }

    #[test]
    fn perfect_predictions() {
        let scores = [(0.9, P), (0.8, P), (0.1, N)];
        let c = ConfusionCounts::at_threshold(&scores, 0.5);
        let r = metrics(&c, Some(&scores));
        assert_eq!(
            (r.precision_pos, r.recall_pos, r.macro_f1, r.mcc, r.auc),
            (1.0, 1.0, 1.0, 1.0, Some(1.0))
        );
        assert!(!r.flags.any());
    }

    #[test]
    fn mcc_formula_value() {
        let c = ConfusionCounts { tp: 2, fp: 1, fn_: 1, tn: 6 };
        let r = metrics(&c, None);
        assert!((r.mcc - 11.0 / 21.0).abs() < 1e-15);
        assert!((r.mcc - 0.5238).abs() < 1e-4);
    }

    #[test]
    fn auc_pairwise_value() {
        let scores = [(0.9, P), (0.4, P), (0.6, N), (0.2, N)];
        assert_eq!(rank_auc(&scores), Some(0.75));
        assert_eq!(rank_auc(&[(0.5, P), (0.5, N)]), Some(0.5));
    }

    #[test]
    fn auc_single_class_is_undefined() {
        let scores = [(0.9, P), (0.4, P)];
        let r = metrics(&ConfusionCounts::at_threshold(&scores, 0.5), Some(&scores));
        assert_eq!(r.auc, None);
        assert!(r.flags.auc_undefined);
    }

    #[test]
    fn all_negative_predictions_flag_mcc() {
        let labels = [P, N, N, N, N, N, N, N, N, N];
        let c = confusion(&labels, &[N; 10]).unwrap();
        let r = metrics(&c, None);
        assert_eq!(r.mcc, 0.0);
        assert!(r.flags.mcc_degenerate);
        assert!(r.flags.precision_degenerate);
    }

    fn report(mcc: f64) -> MetricReport {
        MetricReport {
            precision_pos: 0.5,
            recall_pos: 1.0,
            macro_f1: 0.7,
            mcc,
            auc: Some(0.9),
            n: 10,
            flags: MetricFlags::default(),
        }
    }

    #[test]
    fn aggregate_identical_runs() {
        let agg = aggregate_runs(&[report(0.3), report(0.3), report(0.3)]).unwrap();
        assert_eq!(agg.mcc.std, 0.0);
        assert_eq!(agg.precision_pos.std, 0.0);
        assert_eq!(agg.auc.unwrap().std, 0.0);
    }

    #[test]
    fn aggregate_mcc_values() {
        let agg = aggregate_runs(&[report(0.8), report(0.8), report(0.86)]).unwrap();
        assert!((agg.mcc.mean - 0.82).abs() < 1e-12);
        assert!((agg.mcc.std - 0.0008f64.sqrt()).abs() < 1e-12);
        assert!((agg.mcc.std - 0.0283).abs() < 1e-4);
        assert_eq!(agg.mcc.subscript(), "0.820_{0.028}");
        assert_eq!(agg.mcc.to_string(), "0.820±0.028");
    }

    #[test]
    fn aggregate_single_and_empty() {
        let agg = aggregate_runs(&[report(0.42)]).unwrap();
        assert_eq!(agg.mcc, Summary { mean: 0.42, std: 0.0 });
        assert!(aggregate_runs(&[]).is_err());
    }

    #[test]
    fn table_csv_layout() {
        let rows = vec![TableRow {
            model: "word_filter".into(),
            input: "text".into(),
            aggregate: aggregate_runs(&[report(0.5)]).unwrap(),
        }];
        let mut buf = Vec::new();
        write_table_csv(&rows, &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(
            s,
            "model,input,pre,rec,macro_f1,mcc,auc\nword_filter,text,0.500±0.000,1.000±0.000,0.700±0.000,0.500±0.000,0.900±0.000\n"
        );
    }

    fn scored() -> impl Strategy<Value = Vec<(f64, Label)>> {
        proptest::collection::vec(
            ((0u8..20).prop_map(|v| v as f64 / 20.0), any::<bool>().prop_map(Label::from_bool)),
            1..100,
        )
    }

    fn trapezoid_auc(scores: &[(f64, Label)]) -> Option<f64> {
        let p = scores.iter().filter(|s| s.1.is_positive()).count() as f64;
        let n = scores.len() as f64 - p;
        if p == 0.0 || n == 0.0 {
            return None;
        }
        let mut thresholds: Vec<f64> = scores.iter().map(|s| s.0).collect();
        thresholds.sort_by(|a, b| b.total_cmp(a));
        thresholds.dedup();
        let (mut area, mut prev_fpr, mut prev_tpr) = (0.0, 0.0, 0.0);
        for t in thresholds {
            let c = ConfusionCounts::at_threshold(scores, t);
            let (tpr, fpr) = (c.tp as f64 / p, c.fp as f64 / n);
            area += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
            prev_fpr = fpr;
            prev_tpr = tpr;
        }
        Some(area)
    }

    proptest! {
        #[test]
        fn rank_auc_equals_trapezoid(s in scored()) {
            match (rank_auc(&s), trapezoid_auc(&s)) {
                (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-12),
                (a, b) => prop_assert_eq!(a, b),
            }
        }

        #[test]
        fn mcc_symmetric_under_class_swap(tp in 0usize..50, fp in 0usize..50, fn_ in 0usize..50, tn in 0usize..50) {
            let c = ConfusionCounts { tp, fp, fn_, tn };
            prop_assert_eq!(c.mcc(), c.swapped().mcc());
        }

        #[test]
        fn metrics_invariant_under_permutation(s in scored(), seed in any::<u64>()) {
            use rand::{seq::SliceRandom, SeedableRng};
            let mut shuffled = s.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let a = metrics(&ConfusionCounts::at_threshold(&s, 0.5), Some(&s));
            let b = metrics(&ConfusionCounts::at_threshold(&shuffled, 0.5), Some(&shuffled));
            prop_assert_eq!(a, b);
        }

        #[test]
        fn report_ranges(s in scored(), t in 0.0f64..1.0) {
            let r = metrics(&ConfusionCounts::at_threshold(&s, t), Some(&s));
            for v in [r.precision_pos, r.recall_pos, r.macro_f1] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            prop_assert!((-1.0..=1.0).contains(&r.mcc));
            if let Some(a) = r.auc { prop_assert!((0.0..=1.0).contains(&a)); }
        }
    }
}
