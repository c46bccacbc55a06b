use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::BufReader;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use wltscan::corpus::{self, Corpus, Label, LabelMap, Post};
use wltscan::eval::{self, MetricReport, TableRow};
use wltscan::hitl::eventlog::LOG_FILE;
use wltscan::hitl::http::{serve_blocking, ApiConfig};
use wltscan::hitl::{self, recover_state, HitlConfig, Service};
use wltscan::imageprep::image_count_distribution;
use wltscan::model::{
    ExternalScorer, ExternalScorerSpec, Hyper, ImageLayout, LinearTrainer, ModelBody, Scorer, ScorerHandle,
    ScorerKind, Trainer, Transport, WordFilter,
};
use wltscan::socialgraph::{
    crawl, degree_stats, synthesize_source, user_classes, CrawlResult, FetchConfig, GraphSource, SocialGraph,
    SyntheticParams,
};
use wltscan::splitter::{balance_classes, user_disjoint_split, verify_split, Split, SplitAssignment, SplitConfig};
use wltscan::textstats::{class_report, Lexicon, ReportConfig, Stopwords};
use wltscan::Error;

use crate::config::RunConfig;
use crate::manifest::Artifacts;
use crate::{Cli, CliError, Command};

type Res<T = ()> = Result<T, CliError>;

pub fn run(cli: Cli) -> Res {
    let mut cfg = match &cli.global.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::defaults(),
    };
    for kv in &cli.global.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    cfg.set_opt("seed", cli.global.seed)?;
    let out = cli.global.out;
    match cli.command {
        Command::Ingest { input } => ingest(&cfg, &out, &input),
        Command::Crawl { seeds, hops, budget, timeline_cap, graph, corpus, synthetic, parallelism, rate } => {
            cfg.set_opt("graph", graph.map(|p| p.display().to_string()))?;
            cfg.set_opt("corpus", corpus.map(|p| p.display().to_string()))?;
            let fetch = FetchConfig { parallelism, rate_per_sec: rate, burst: 1 };
            crawl_cmd(&cfg, &out, &id_list(&seeds)?, hops, budget, timeline_cap, synthetic, &fetch)
        }
        Command::Analyze { corpus, labels, graph } => {
            set_paths(&mut cfg, &[("corpus", corpus), ("labels", labels), ("graph", graph)])?;
            analyze(&cfg, &out)
        }
        Command::Split { corpus, labels } => {
            set_paths(&mut cfg, &[("corpus", corpus), ("labels", labels)])?;
            split(&cfg, &out)
        }
        Command::Train { model, corpus, labels, split_file } => {
            set_paths(&mut cfg, &[("corpus", corpus), ("labels", labels)])?;
            train(&cfg, &out, model, &split_file.unwrap_or_else(|| out.join("split.csv")))
        }
        Command::Eval { split, model_file, corpus, labels, split_file, run } => {
            set_paths(&mut cfg, &[("corpus", corpus), ("labels", labels)])?;
            let model_file = model_file.unwrap_or_else(|| out.join("model.json"));
            let split_file = split_file.unwrap_or_else(|| out.join("split.csv"));
            let run = run.unwrap_or(cfg.seed()?.to_string());
            evaluate(&cfg, &out, split, &model_file, &split_file, &run)
        }
        Command::Serve { port, host, corpus, seed_posts, seed_users, state_dir, model } => {
            set_paths(&mut cfg, &[("corpus", corpus)])?;
            let addr: SocketAddr = format!("{host}:{port}")
                .parse()
                .map_err(|e| CliError::Usage(format!("bad address {host}:{port}: {e}")))?;
            let state_dir = state_dir.unwrap_or_else(|| out.join("hitl"));
            serve(&cfg, &out, addr, &id_list(&seed_posts)?, &id_list(&seed_users)?, &state_dir, model)
        }
        Command::Export { corpus, state_dir, english_only } => {
            set_paths(&mut cfg, &[("corpus", corpus)])?;
            if english_only {
                cfg.set("hitl.english_only", "true")?;
            }
            export(&cfg, &out, &state_dir.unwrap_or_else(|| out.join("hitl")))
        }
        Command::Report { runs } => report(&cfg, &out, runs),
    }
}

fn set_paths(cfg: &mut RunConfig, paths: &[(&str, Option<PathBuf>)]) -> Res {
    for (k, p) in paths {
        cfg.set_opt(k, p.as_ref().map(|p| p.display().to_string()))?;
    }
    Ok(())
}

/// Comma-separated ids, or `@path` naming a file with one id per line.
fn id_list(arg: &str) -> Res<BTreeSet<String>> {
    let text = match arg.strip_prefix('@') {
        Some(p) => fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
        None => arg.replace(',', "\n"),
    };
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect())
}

fn load_corpus(cfg: &RunConfig) -> Res<Corpus> {
    let path = cfg.existing("corpus")?;
    let ing = corpus::ingest(&path)?;
    if ing.skipped_count() > 0 {
        log::warn!("{}: skipped {} malformed records", path.display(), ing.skipped_count());
    }
    Ok(ing.corpus)
}

fn load_labels(cfg: &RunConfig) -> Res<LabelMap> {
    Ok(corpus::load_labels(&cfg.existing("labels")?)?)
}

fn with_header(header: &[String], body: &[u8]) -> Vec<u8> {
    let mut out: Vec<u8> = header.iter().flat_map(|h| format!("# {h}\n").into_bytes()).collect();
    out.extend_from_slice(body);
    out
}

fn jsonl(corpus: &Corpus) -> Res<Vec<u8>> {
    let mut buf = Vec::new();
    corpus.write_jsonl(&mut buf)?;
    Ok(buf)
}

fn csv_bytes<I, R>(head: &[&str], rows: I) -> Res<Vec<u8>>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(head).map_err(Error::from)?;
    for r in rows {
        w.write_record(r).map_err(Error::from)?;
    }
    w.into_inner().map_err(|e| CliError::Domain(Error::Invariant(e.to_string())))
}

fn ingest(cfg: &RunConfig, out: &Path, input: &Path) -> Res {
    if !input.exists() {
        return Err(Error::InvalidInput(format!("input {} does not exist", input.display())).into());
    }
    let ing = corpus::ingest(input)?;
    let header = cfg.header("ingest")?;
    let mut a = Artifacts::new(out)?;
    a.write("corpus.jsonl", &jsonl(&ing.corpus)?)?;
    let rows = ing.skipped.iter().map(|(line, why)| [line.to_string(), why.clone()]);
    a.write("ingest_skipped.csv", &with_header(&header, &csv_bytes(&["line", "reason"], rows)?))?;
    println!("ingested {} posts, skipped {} records", ing.corpus.len(), ing.skipped_count());
    a.finish("ingest", cfg)
}

#[allow(clippy::too_many_arguments)]
fn crawl_cmd(
    cfg: &RunConfig,
    out: &Path,
    seeds: &BTreeSet<String>,
    hops: usize,
    budget: Option<usize>,
    cap: usize,
    synthetic: Option<u64>,
    fetch: &FetchConfig,
) -> Res {
    if seeds.is_empty() {
        return Err(CliError::Usage("--seeds names no users".into()));
    }
    let (result, truth): (CrawlResult, Option<LabelMap>) = match synthetic {
        Some(seed) => {
            let src = synthesize_source(seed, &SyntheticParams::default())?;
            let r = crawl(&src, seeds, hops, budget, cap, fetch)?;
            let truth = src.ground_truth().into_iter().filter(|(id, _)| r.posts.contains(id)).collect();
            (r, Some(truth))
        }
        None => {
            let src = GraphSource::load(&cfg.existing("graph")?, &cfg.existing("corpus")?)?;
            (crawl(&src, seeds, hops, budget, cap, fetch)?, None)
        }
    };
    let header = cfg.header("crawl")?;
    let mut a = Artifacts::new(out)?;
    let mut edges = Vec::new();
    result.graph.write_edges(&mut edges)?;
    a.write("crawl/graph.txt", &edges)?;
    let rows = result
        .users_by_hop
        .iter()
        .flat_map(|(hop, users)| users.iter().map(move |u| [u.clone(), hop.to_string()]));
    a.write("crawl/users.csv", &with_header(&header, &csv_bytes(&["user_id", "hop"], rows)?))?;
    a.write("crawl/corpus.jsonl", &jsonl(&result.posts)?)?;
    if let Some(truth) = truth {
        let mut buf = Vec::new();
        corpus::write_labels(&truth, &mut buf, &header)?;
        a.write("crawl/labels.csv", &buf)?;
    }
    for u in &result.unreachable {
        eprintln!("warning: could not expand user {u}");
    }
    println!(
        "crawled {} users over {} hops, {} edges, {} posts",
        result.users().len(),
        hops,
        result.graph.edge_count(),
        result.posts.len()
    );
    a.finish("crawl", cfg)
}

fn stopwords(cfg: &RunConfig) -> Res<Stopwords> {
    Ok(match cfg.path("stopwords") {
        Some(_) => Stopwords::load(&cfg.existing("stopwords")?)?,
        None => Stopwords::english(),
    })
}

fn lexicon(cfg: &RunConfig) -> Res<Lexicon> {
    Ok(match cfg.path("lexicon") {
        Some(_) => Lexicon::load(&cfg.existing("lexicon")?)?,
        None => Lexicon::english(),
    })
}

fn analyze(cfg: &RunConfig, out: &Path) -> Res {
    let corpus = load_corpus(cfg)?;
    let labels = match cfg.path("labels") {
        Some(_) => load_labels(cfg)?,
        None => LabelMap::new(),
    };
    let header = cfg.header("analyze")?;
    let mut a = Artifacts::new(out)?;
    let bundle = class_report(&corpus, &labels, &stopwords(cfg)?, &lexicon(cfg)?, &ReportConfig::default());
    for p in bundle.write_to(&a.path("analysis"), &header)? {
        a.record(p);
    }
    let dist = image_count_distribution(&corpus, &labels);
    let rows = dist.iter().flat_map(|(label, h)| {
        (0..h.counts.len()).map(move |n| {
            [label.name().to_string(), n.to_string(), h.counts[n].to_string(), format!("{:.6}", h.fraction(n))]
        })
    });
    let body = csv_bytes(&["class", "images", "posts", "fraction"], rows)?;
    a.write("analysis/image_counts.csv", &with_header(&header, &body))?;
    if cfg.path("graph").is_some() {
        let path = cfg.existing("graph")?;
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let graph = SocialGraph::parse_edges(&text)?;
        for (label, table) in degree_stats(&graph, &user_classes(&corpus, &labels)) {
            let mut buf = Vec::new();
            table.write_csv(&mut buf)?;
            a.write(&format!("analysis/degree_{}.csv", label.name()), &with_header(&header, &buf))?;
        }
    }
    println!("analyzed {} posts ({} labeled)", corpus.len(), labels.len());
    a.finish("analyze", cfg)
}

fn split_config(cfg: &RunConfig) -> Res<SplitConfig> {
    Ok(SplitConfig {
        ratios: [cfg.get("split.train")?, cfg.get("split.dev")?, cfg.get("split.test")?],
        neg_per_pos: cfg.get("split.neg_per_pos")?,
        priority_keyword: cfg.raw("split.keyword").to_string(),
        rng_seed: cfg.seed()?,
    })
}

fn split(cfg: &RunConfig, out: &Path) -> Res {
    let corpus = load_corpus(cfg)?;
    let labels = load_labels(cfg)?;
    let sc = split_config(cfg)?;
    let balanced = balance_classes(&corpus, &labels, &sc)?;
    let assignment = user_disjoint_split(&balanced.post_ids, &corpus, &labels, &sc)?;
    let violations = verify_split(&assignment, &corpus, &labels);
    if !violations.is_empty() {
        return Err(Error::Invariant(format!("split verification failed: {violations:?}")).into());
    }
    let mut header = cfg.header("split")?;
    for w in &balanced.warnings {
        eprintln!("warning: {w:?}");
        header.push(format!("warning: {w:?}"));
    }
    let mut a = Artifacts::new(out)?;
    let mut buf = Vec::new();
    assignment.write_csv(&mut buf, &header)?;
    a.write("split.csv", &buf)?;
    let rows = assignment
        .audit
        .iter()
        .map(|e| [e.label.name().to_string(), e.user_id.clone(), e.split.to_string(), e.posts.to_string()]);
    a.write("split_audit.csv", &with_header(&header, &csv_bytes(&["class", "user_id", "split", "posts"], rows)?))?;
    println!(
        "{} positives, {} negatives; train {}, dev {}, test {}",
        balanced.positives,
        balanced.negatives(),
        assignment.count(Split::Train),
        assignment.count(Split::Dev),
        assignment.count(Split::Test)
    );
    a.finish("split", cfg)
}

fn read_splits(path: &Path) -> Res<BTreeMap<String, Split>> {
    if !path.exists() {
        return Err(Error::InvalidInput(format!("split file {} does not exist; run `split` first", path.display())).into());
    }
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(SplitAssignment::read_csv(BufReader::new(f))?)
}

fn posts_in<'c>(
    splits: &BTreeMap<String, Split>,
    split: Split,
    corpus: &'c Corpus,
    labels: &LabelMap,
) -> Res<Vec<(&'c Post, Label)>> {
    splits
        .iter()
        .filter(|(_, s)| **s == split)
        .map(|(id, _)| {
            let post = corpus.get(id).ok_or_else(|| Error::InvalidInput(format!("split post {id} not in corpus")))?;
            let label = labels.get(id).ok_or_else(|| Error::InvalidInput(format!("split post {id} has no label")))?;
            Ok((post, *label))
        })
        .collect()
}

fn linear_trainer(cfg: &RunConfig) -> Res<LinearTrainer> {
    Ok(LinearTrainer {
        hyper: Hyper {
            lr: cfg.get("model.lr")?,
            l2: cfg.get("model.l2")?,
            epochs: cfg.get("model.epochs")?,
            patience: cfg.get("model.patience")?,
            seed: cfg.seed()?,
            batch_size: cfg.opt("model.batch_size")?,
        },
        min_df: cfg.get("model.min_df")?,
        lexicon: lexicon(cfg)?,
    })
}

fn word_filter(cfg: &RunConfig) -> Res<WordFilter> {
    Ok(WordFilter::new(cfg.raw("wordfilter.keywords").split(','))?)
}

fn external_spec(cfg: &RunConfig) -> Res<ExternalScorerSpec> {
    let transport = match (cfg.raw("external.url"), cfg.raw("external.program")) {
        (url, _) if !url.is_empty() => Transport::Http { url: url.to_string() },
        (_, prog) if !prog.is_empty() => Transport::Subprocess {
            program: PathBuf::from(prog),
            args: cfg.raw("external.args").split_whitespace().map(String::from).collect(),
        },
        _ => return Err(CliError::Usage("external model needs external.url or external.program".into())),
    };
    let layout: Option<ImageLayout> = match cfg.raw("external.layout") {
        "" => None,
        l => Some(
            serde_json::from_value(serde_json::Value::String(l.to_string()))
                .map_err(|_| CliError::Usage(format!("external.layout must be stitch or concat, got {l:?}")))?,
        ),
    };
    let mut spec = ExternalScorerSpec::new(transport, cfg.get("external.variant")?, layout);
    spec.timeout_secs = cfg.get("external.timeout_secs")?;
    spec.parallelism = cfg.get("external.parallelism")?;
    spec.media_root = cfg.path("media_root");
    spec.validate()?;
    Ok(spec)
}

fn score_pairs(scorer: &dyn Scorer, posts: &[(&Post, Label)]) -> Vec<(Option<f64>, Label)> {
    let refs: Vec<&Post> = posts.iter().map(|(p, _)| *p).collect();
    scorer.score_batch(&refs).into_iter().zip(posts.iter().map(|(_, l)| *l)).collect()
}

fn train(cfg: &RunConfig, out: &Path, kind: ScorerKind, split_file: &Path) -> Res {
    let corpus = load_corpus(cfg)?;
    let labels = load_labels(cfg)?;
    let splits = read_splits(split_file)?;
    let train = posts_in(&splits, Split::Train, &corpus, &labels)?;
    let dev = posts_in(&splits, Split::Dev, &corpus, &labels)?;
    let body = match kind {
        ScorerKind::WordFilter => ModelBody::WordFilter(word_filter(cfg)?),
        ScorerKind::Linear => ModelBody::Linear(linear_trainer(cfg)?.fit(&train, &dev)?),
        ScorerKind::External => ModelBody::External(external_spec(cfg)?),
    };
    let mut handle = ScorerHandle::new(body);
    handle.header = cfg.header("train")?;
    if kind != ScorerKind::WordFilter {
        let scorer = handle.scorer()?;
        let scored: Vec<(f64, Label)> =
            score_pairs(scorer.as_ref(), &dev).into_iter().filter_map(|(s, l)| s.map(|s| (s, l))).collect();
        handle.calibrate(&scored)?;
    }
    let mut a = Artifacts::new(out)?;
    let mut json = serde_json::to_vec_pretty(&handle).map_err(Error::from)?;
    json.push(b'\n');
    a.write("model.json", &json)?;
    println!("trained {kind} on {} posts, threshold {:.6}", train.len(), handle.threshold);
    a.finish("train", cfg)
}

/// Metrics for one model on one split, as written by `eval`.
#[derive(Debug, Serialize, Deserialize)]
pub struct EvalRecord {
    pub header: Vec<String>,
    pub model: String,
    pub input: String,
    pub split: String,
    pub run: String,
    pub threshold: f64,
    pub scored: usize,
    pub unscored: usize,
    pub report: MetricReport,
}

fn input_name(handle: &ScorerHandle) -> String {
    match &handle.body {
        ModelBody::External(spec) => spec.variant.to_string(),
        _ => "text".into(),
    }
}

fn evaluate(cfg: &RunConfig, out: &Path, split: Split, model_file: &Path, split_file: &Path, run: &str) -> Res {
    if !model_file.exists() {
        return Err(Error::InvalidInput(format!("model file {} does not exist; run `train` first", model_file.display())).into());
    }
    let corpus = load_corpus(cfg)?;
    let labels = load_labels(cfg)?;
    let splits = read_splits(split_file)?;
    let handle = ScorerHandle::load(model_file)?;
    let posts = posts_in(&splits, split, &corpus, &labels)?;
    if posts.is_empty() {
        return Err(Error::InvalidInput(format!("split {split} has no posts")).into());
    }
    let scorer = handle.scorer()?;
    let mut scored = Vec::new();
    let mut rows = Vec::new();
    let (mut truth, mut predicted) = (Vec::new(), Vec::new());
    for ((post, _), (score, label)) in posts.iter().zip(score_pairs(scorer.as_ref(), &posts)) {
        let Some(s) = score else { continue };
        let p = handle.predict(s);
        scored.push((s, label));
        truth.push(label);
        predicted.push(p);
        rows.push([post.post_id.clone(), label.as_u8().to_string(), s.to_string(), p.as_u8().to_string()]);
    }
    let unscored = posts.len() - scored.len();
    if unscored > 0 {
        eprintln!("warning: {unscored} posts received no score and were left out");
    }
    let counts = eval::confusion(&truth, &predicted)?;
    let report = eval::metrics(&counts, Some(&scored));
    let header = cfg.header("eval")?;
    let record = EvalRecord {
        header: header.clone(),
        model: handle.kind().name().into(),
        input: input_name(&handle),
        split: split.to_string(),
        run: run.to_string(),
        threshold: handle.threshold,
        scored: scored.len(),
        unscored,
        report,
    };
    let mut a = Artifacts::new(out)?;
    let mut json = serde_json::to_vec_pretty(&record).map_err(Error::from)?;
    json.push(b'\n');
    a.write(&format!("eval_{split}_{run}.json"), &json)?;
    let body = csv_bytes(&["post_id", "label", "score", "predicted"], rows)?;
    a.write(&format!("predictions_{split}_{run}.csv"), &with_header(&header, &body))?;
    let r = &record.report;
    println!(
        "{} on {split}: precision {:.3} recall {:.3} macro_f1 {:.3} mcc {:.3} auc {}",
        record.model,
        r.precision_pos,
        r.recall_pos,
        r.macro_f1,
        r.mcc,
        r.auc.map_or("n/a".into(), |v| format!("{v:.3}"))
    );
    a.finish(&format!("eval_{split}_{run}"), cfg)
}

fn metrics_files(out: &Path) -> Res<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = match fs::read_dir(out) {
        Ok(rd) => rd
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("eval_") && n.ends_with(".json"))
            })
            .collect(),
        Err(_) => Vec::new(),
    };
    files.sort();
    Ok(files)
}

fn report(cfg: &RunConfig, out: &Path, runs: Vec<PathBuf>) -> Res {
    let runs = if runs.is_empty() { metrics_files(out)? } else { runs };
    if runs.is_empty() {
        return Err(Error::InvalidInput(format!("no eval_*.json files under {}", out.display())).into());
    }
    let mut groups: BTreeMap<(String, String), Vec<MetricReport>> = BTreeMap::new();
    for path in &runs {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let rec: EvalRecord = serde_json::from_slice(&bytes).map_err(Error::from)?;
        groups.entry((rec.model, rec.input)).or_default().push(rec.report);
    }
    let rows = groups
        .into_iter()
        .map(|((model, input), reports)| Ok(TableRow { model, input, aggregate: eval::aggregate_runs(&reports)? }))
        .collect::<Result<Vec<_>, Error>>()?;
    let mut buf = Vec::new();
    eval::write_table_csv(&rows, &mut buf)?;
    let mut a = Artifacts::new(out)?;
    let bytes = with_header(&cfg.header("report")?, &buf);
    a.write("report.csv", &bytes)?;
    print!("{}", String::from_utf8_lossy(&buf));
    a.finish("report", cfg)
}

fn hitl_config(cfg: &RunConfig) -> Res<HitlConfig> {
    let c = HitlConfig {
        n_bootstrap: cfg.get("hitl.n")?,
        k: cfg.get("hitl.k")?,
        n_stop: cfg.get("hitl.n_stop")?,
        annotators_required: cfg.get("hitl.annotators")?,
        pool_fraction: cfg.get("hitl.pool_fraction")?,
        dev_fraction: cfg.get("hitl.dev_fraction")?,
        seed: cfg.seed()?,
    };
    c.validate()?;
    Ok(c)
}

fn serve(
    cfg: &RunConfig,
    out: &Path,
    addr: SocketAddr,
    seed_posts: &BTreeSet<String>,
    seed_users: &BTreeSet<String>,
    state_dir: &Path,
    kind: ScorerKind,
) -> Res {
    let corpus = Arc::new(load_corpus(cfg)?);
    let trainer: Arc<dyn Trainer> = match kind {
        ScorerKind::WordFilter => Arc::new(word_filter(cfg)?),
        ScorerKind::Linear => Arc::new(linear_trainer(cfg)?),
        ScorerKind::External => Arc::new(ExternalScorer::new(external_spec(cfg)?)?),
    };
    let service = if state_dir.join(LOG_FILE).exists() {
        println!("resuming labeling state from {}", state_dir.display());
        Service::open(state_dir, corpus, trainer)?
    } else {
        if seed_users.is_empty() {
            return Err(CliError::Usage("a new labeling state needs --seed-users".into()));
        }
        Service::bootstrap(corpus, seed_posts, seed_users, hitl_config(cfg)?, trainer, Some(state_dir))?
    };
    Artifacts::new(out)?.finish("serve", cfg)?;
    let api = ApiConfig {
        media_root: cfg.path("media_root"),
        english_only: cfg.get("hitl.english_only")?,
        ..ApiConfig::default()
    };
    println!("labeling service on http://{addr}");
    serve_blocking(Arc::new(service), api, addr)?;
    Ok(())
}

fn export(cfg: &RunConfig, out: &Path, state_dir: &Path) -> Res {
    let corpus = load_corpus(cfg)?;
    if !state_dir.join(LOG_FILE).exists() {
        return Err(Error::InvalidInput(format!("no labeling state under {}", state_dir.display())).into());
    }
    let state = recover_state(state_dir, &corpus)?;
    let e = hitl::export(&state, &corpus, cfg.get("hitl.english_only")?)?;
    let header = cfg.header("export")?;
    let mut a = Artifacts::new(out)?;
    a.write("export/dataset.jsonl", &e.dataset_jsonl)?;
    a.write("export/labels.csv", &with_header(&header, &e.labels_csv))?;
    a.write("export/conflicts.csv", &with_header(&header, &e.conflicts_csv))?;
    let mut manifest = serde_json::to_value(&e.manifest).map_err(Error::from)?;
    manifest["header"] = serde_json::json!(header);
    let mut json = serde_json::to_vec_pretty(&manifest).map_err(Error::from)?;
    json.push(b'\n');
    a.write("export/manifest.json", &json)?;
    println!(
        "exported {} labels ({} positive), {} conflicts",
        e.manifest.labeled, e.manifest.positives, e.manifest.conflicts
    );
    a.finish("export", cfg)
}
