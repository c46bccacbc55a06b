//! Trains the word filter and the linear model on a synthetic corpus,
//! calibrates the linear threshold on dev and reports test metrics.
//!
//! cargo run --release --example train_and_evaluate -- [seed]

use wltscan::corpus::{Label, Post};
use wltscan::eval::{self, MetricReport};
use wltscan::model::{calibrate_threshold, LinearTrainer, Scorer, WordFilter};
use wltscan::socialgraph::{synthesize_source, SyntheticParams};
use wltscan::splitter::{balance_classes, user_disjoint_split, Split, SplitConfig};

fn report(scorer: &dyn Scorer, threshold: f64, posts: &[(&Post, Label)]) -> Result<MetricReport, wltscan::Error> {
    let refs: Vec<&Post> = posts.iter().map(|(p, _)| *p).collect();
    let scored: Vec<(f64, Label)> = scorer
        .score_batch(&refs)
        .into_iter()
        .zip(posts)
        .filter_map(|(s, (_, l))| s.map(|s| (s, *l)))
        .collect();
    let truth: Vec<Label> = scored.iter().map(|(_, l)| *l).collect();
    let pred: Vec<Label> = scored.iter().map(|(s, _)| Label::from_bool(*s >= threshold)).collect();
    Ok(eval::metrics(&eval::confusion(&truth, &pred)?, Some(&scored)))
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = std::env::args().nth(1).map(|a| a.parse()).transpose()?.unwrap_or(7);
    let source = synthesize_source(seed, &SyntheticParams::default())?;
    let labels = source.ground_truth();
    let config = SplitConfig { rng_seed: seed, ..SplitConfig::default() };
    let balanced = balance_classes(source.corpus(), &labels, &config)?;
    let assignment = user_disjoint_split(&balanced.post_ids, source.corpus(), &labels, &config)?;
    let posts = |split| -> Vec<(&Post, Label)> {
        assignment.ids_in(split).map(|id| (source.corpus().get(id).unwrap(), labels[id])).collect()
    };
    let (train, dev, test) = (posts(Split::Train), posts(Split::Dev), posts(Split::Test));

    let linear = LinearTrainer::default().fit(&train, &dev)?;
    let dev_refs: Vec<&Post> = dev.iter().map(|(p, _)| *p).collect();
    let dev_scores: Vec<(f64, Label)> = linear
        .score_batch(&dev_refs)
        .into_iter()
        .zip(&dev)
        .filter_map(|(s, (_, l))| s.map(|s| (s, *l)))
        .collect();
    let threshold = calibrate_threshold(&dev_scores)?.threshold;

    println!("train {} dev {} test {}", train.len(), dev.len(), test.len());
    println!("model       precision  recall  macro_f1     mcc     auc");
    let rows: [(&str, Box<dyn Scorer>, f64); 2] =
        [("wordfilter", Box::new(WordFilter::default()), 0.5), ("linear", Box::new(linear), threshold)];
    for (name, scorer, t) in rows {
        let r = report(scorer.as_ref(), t, &test)?;
        println!(
            "{name:<10}  {:>9.3}  {:>6.3}  {:>8.3}  {:>6.3}  {:>6}",
            r.precision_pos,
            r.recall_pos,
            r.macro_f1,
            r.mcc,
            r.auc.map_or("n/a".into(), |a| format!("{a:.3}"))
        );
    }
    Ok(())
}
