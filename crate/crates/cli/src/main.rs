//! `postmortem` command-line interface.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or validation error,
//! 3 internal error. Diagnostics go to stderr; stdout carries data and
//! summaries only.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::panic;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use postmortem::corpus::{corpus_stats, load_corpus, make_documents, split_profiles, top_ngrams, CorpusStats};
use postmortem::evaluation::{
    cohens_d, cross_validate, default_grid, early_detection, fit_pipeline, grid_search, holm_bonferroni,
    mann_whitney_u, paired_ttest, positive_documents, recall_only_eval, CvReport, PipelineConfig, StatTestResult,
};
use postmortem::models::{load_model, predict_text, save_model, ModelSpec};
use postmortem::synth::{generate, SynthConfig};
use postmortem::text::{NgramRange, VocabConfig};
use postmortem::{Corpus, Error, FeatureKind, Label, ModelKind, TextResources, UnitKind};

const DEFAULT_SEED: u64 = 7;

#[derive(Parser)]
#[command(name = "postmortem", version, about = "Pre-/post-mortem classification of social media text")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled synthetic corpus
    GenSynth(GenSynthArgs),
    /// Descriptive statistics, top n-grams and per-metric class tests
    Stats(StatsArgs),
    /// Cross-validate a pipeline, then fit it on the whole corpus and save it
    Train(PipelineArgs),
    /// Cross-validate a pipeline and write the report
    Cv(PipelineArgs),
    /// Cross-validate a hyperparameter grid over shared folds
    Grid(PipelineArgs),
    /// Label texts from a JSONL file with a saved model
    Classify(ClassifyArgs),
    /// Simulate early detection on held-out post-mortem profiles
    Early(EarlyArgs),
    /// Paired t-test over the per-fold F1 of two cross-validation reports
    Compare(CompareArgs),
    /// Recall of a saved model on a corpus known to be post-mortem
    RecallOnly(RecallOnlyArgs),
}

#[derive(Args)]
struct GenSynthArgs {
    /// Generator config (JSON); defaults to the built-in desk-200 settings
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the number of profiles
    #[arg(long)]
    profiles: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Number of n-grams listed per class and order
    #[arg(long, default_value_t = 10)]
    top_k: usize,
    /// Family-wise significance level for the Holm correction
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct PipelineFlags {
    /// profile or comment
    #[arg(long, default_value = "profile")]
    unit: UnitKind,
    /// ngram, clt or combined [default: combined]
    #[arg(long)]
    features: Option<FeatureKind>,
    /// baseline, nb, lr, svm or gbt
    #[arg(long, default_value = "lr")]
    model: ModelKind,
    /// Keep the k features with the highest chi-squared score; `grid`
    /// accepts a comma-separated list, with 0 meaning no selection
    #[arg(long, value_delimiter = ',')]
    select_k: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    ngram_min: usize,
    #[arg(long, default_value_t = 3)]
    ngram_max: usize,
    #[arg(long, default_value_t = 2)]
    min_df: usize,
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[command(flatten)]
    pipeline: PipelineFlags,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Model file for `train`, report file for `cv` and `grid`
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ClassifyArgs {
    #[arg(long)]
    model: PathBuf,
    /// JSONL rows `{"id": ..., "text": ...}`
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EarlyArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = 0.2)]
    test_fraction: f64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[command(flatten)]
    pipeline: PipelineFlags,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    report_a: PathBuf,
    #[arg(long)]
    report_b: PathBuf,
}

#[derive(Args)]
struct RecallOnlyArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value = "comment")]
    unit: UnitKind,
}

enum Failure {
    Usage(String),
    Data(String),
    Internal(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NonFinite(_) => Failure::Internal(e.to_string()),
            Error::Fold { ref source, .. } if matches!(**source, Error::NonFinite(_)) => Failure::Internal(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn data(msg: impl Into<String>) -> Failure {
    Failure::Data(msg.into())
}

fn write_file(path: &Path, bytes: &[u8]) -> CmdResult {
    fs::write(path, bytes).map_err(|e| data(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CmdResult {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Failure::Internal(e.to_string()))?;
    s.push('\n');
    write_file(path, s.as_bytes())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, Failure> {
    let s = fs::read_to_string(path).map_err(|e| data(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&s).map_err(|e| data(format!("{}: {e}", path.display())))
}

fn gen_synth(a: GenSynthArgs) -> CmdResult {
    let mut cfg = match &a.config {
        Some(p) => SynthConfig::from_path(p)?,
        None => SynthConfig::default(),
    };
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if let Some(n) = a.profiles {
        cfg.n_profiles = n;
    }
    let corpus = generate(&cfg)?;
    corpus.save_jsonl(&a.out)?;
    println!("profiles {} comments {}", corpus.profiles.len(), corpus.n_comments());
    Ok(())
}

#[derive(Serialize)]
struct NgramRow {
    ngram: String,
    count: usize,
}

#[derive(Serialize)]
struct TopNgrams {
    n: usize,
    post: Vec<NgramRow>,
    pre: Vec<NgramRow>,
}

#[derive(Serialize)]
struct MetricRow {
    metric: String,
    mean_post: f64,
    mean_pre: f64,
    test: StatTestResult,
    reject: bool,
    /// |d| > 0.2, at least a small effect
    flagged: bool,
}

#[derive(Serialize)]
struct StatsReport {
    corpus: String,
    top_k: usize,
    alpha: f64,
    stats: CorpusStats,
    top_ngrams: Vec<TopNgrams>,
    metrics: Vec<MetricRow>,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len().max(1) as f64
}

fn stats(a: StatsArgs) -> CmdResult {
    if !(a.alpha > 0.0 && a.alpha < 1.0) {
        return Err(usage("--alpha must lie in (0, 1)"));
    }
    let resources = TextResources::default();
    let corpus = load_corpus(&a.corpus)?;
    let stats = corpus_stats(&corpus)?;
    if stats.post_comments == 0 || stats.pre_comments == 0 {
        return Err(data("corpus needs both pre- and post-mortem comments"));
    }
    let mut grams = Vec::new();
    for n in 1..=3 {
        let rows = |class| -> Result<Vec<NgramRow>, Failure> {
            Ok(top_ngrams(&corpus, n, a.top_k, class, &resources.stopwords)?
                .into_iter()
                .map(|(ngram, count)| NgramRow { ngram, count })
                .collect())
        };
        grams.push(TopNgrams {
            n,
            post: rows(Label::Post)?,
            pre: rows(Label::Pre)?,
        });
    }

    let names = resources.clt.metric_names().to_vec();
    let mut by_class: [Vec<Vec<f64>>; 2] = [vec![Vec::new(); names.len()], vec![Vec::new(); names.len()]];
    for c in corpus.comments() {
        let class = usize::from(c.label.is_some_and(Label::is_post));
        for (i, v) in resources.clt.profile(&c.text).values().iter().enumerate() {
            by_class[class][i].push(*v);
        }
    }
    let mut tests = Vec::new();
    for (post, pre) in by_class[1].iter().zip(&by_class[0]) {
        let mut t = mann_whitney_u(post, pre)?;
        t.effect_size_d = Some(cohens_d(post, pre).unwrap_or(0.0));
        tests.push(t);
    }
    let p: Vec<f64> = tests.iter().map(|t| t.p_value).collect();
    let holm = holm_bonferroni(&p, a.alpha)?;
    let metrics: Vec<MetricRow> = names
        .iter()
        .zip(tests)
        .enumerate()
        .map(|(i, (name, mut test))| {
            test.corrected_p = Some(holm.adjusted[i]);
            let d = test.effect_size_d.unwrap_or(0.0);
            MetricRow {
                metric: name.clone(),
                mean_post: mean(&by_class[1][i]),
                mean_pre: mean(&by_class[0][i]),
                test,
                reject: holm.reject[i],
                flagged: d.abs() > 0.2,
            }
        })
        .collect();

    println!(
        "profiles {} comments {} (post {:.3}, pre {:.3})",
        stats.total_profiles, stats.total_comments, stats.post_fraction, stats.pre_fraction
    );
    for m in metrics.iter().filter(|m| m.flagged) {
        println!(
            "{:<26} post {:.4} pre {:.4} d {:+.3} p_holm {:.3e}",
            m.metric,
            m.mean_post,
            m.mean_pre,
            m.test.effect_size_d.unwrap_or(0.0),
            m.test.corrected_p.unwrap_or(1.0)
        );
    }
    let report = StatsReport {
        corpus: a.corpus.display().to_string(),
        top_k: a.top_k,
        alpha: a.alpha,
        stats,
        top_ngrams: grams,
        metrics,
    };
    match &a.out {
        Some(path) => write_json(path, &report),
        None => Ok(()),
    }
}

impl PipelineFlags {
    fn vocab(&self) -> Result<VocabConfig, Failure> {
        let n_range = NgramRange::new(self.ngram_min, self.ngram_max).map_err(|e| usage(e.to_string()))?;
        if self.min_df == 0 {
            return Err(usage("--min-df must be at least 1"));
        }
        Ok(VocabConfig {
            n_range,
            min_df: self.min_df,
        })
    }

    fn features(&self) -> FeatureKind {
        self.features.unwrap_or(FeatureKind::Combined)
    }

    fn warn_if_ignored(&self) {
        if self.model == ModelKind::Baseline && (self.features.is_some() || !self.select_k.is_empty()) {
            eprintln!("warning: the baseline ignores --features and --select-k");
        }
    }

    fn select_ks(&self) -> Vec<Option<usize>> {
        if self.select_k.is_empty() {
            return vec![None];
        }
        self.select_k.iter().map(|&k| (k > 0).then_some(k)).collect()
    }

    fn config(&self) -> Result<PipelineConfig, Failure> {
        self.warn_if_ignored();
        if self.select_k.len() > 1 {
            return Err(usage("--select-k takes a list only for grid"));
        }
        let mut config = PipelineConfig::new(self.features(), self.model.default_spec());
        config.select_k = self.select_ks()[0];
        config.vocab = self.vocab()?;
        if matches!(config.model, ModelSpec::Baseline) {
            config.select_k = None;
        }
        Ok(config)
    }
}

fn load_documents(path: &Path, unit: UnitKind) -> Result<Vec<postmortem::Document>, Failure> {
    let corpus = load_corpus(path)?;
    Ok(make_documents(&corpus, unit)?)
}

fn check_folds(folds: usize) -> CmdResult {
    if folds < 2 {
        return Err(usage("--folds must be at least 2"));
    }
    Ok(())
}

fn print_cv(report: &CvReport) {
    let m = &report.mean;
    println!(
        "{} {} {}: mean F1 {:.4} precision {:.4} recall {:.4} accuracy {:.4} over {} folds",
        report.config.model.kind(),
        report.config.features,
        report.n_documents,
        m.f1,
        m.precision,
        m.recall,
        m.accuracy,
        report.folds
    );
}

fn train(a: PipelineArgs) -> CmdResult {
    check_folds(a.folds)?;
    let out = a.out.as_ref().ok_or_else(|| usage("train needs --out for the model file"))?;
    let config = a.pipeline.config()?;
    let resources = TextResources::default();
    let docs = load_documents(&a.corpus, a.pipeline.unit)?;
    let report = cross_validate(&config, &docs, a.folds, a.seed, &resources)?;
    print_cv(&report);
    let model = fit_pipeline(&config, &docs, &resources)?;
    save_model(&model, out)?;
    Ok(())
}

fn cv(a: PipelineArgs) -> CmdResult {
    check_folds(a.folds)?;
    let config = a.pipeline.config()?;
    let resources = TextResources::default();
    let docs = load_documents(&a.corpus, a.pipeline.unit)?;
    let report = cross_validate(&config, &docs, a.folds, a.seed, &resources)?;
    print_cv(&report);
    match &a.out {
        Some(path) => write_json(path, &report),
        None => Ok(()),
    }
}

fn grid(a: PipelineArgs) -> CmdResult {
    check_folds(a.folds)?;
    let p = &a.pipeline;
    p.warn_if_ignored();
    let select_ks = if p.model == ModelKind::Baseline { vec![None] } else { p.select_ks() };
    let configs = default_grid(p.model, p.features(), &select_ks, p.vocab()?);
    let resources = TextResources::default();
    let docs = load_documents(&a.corpus, p.unit)?;
    let report = grid_search(&configs, &docs, a.folds, a.seed, &resources)?;
    for (i, r) in report.reports.iter().enumerate() {
        let marker = if i == report.best_index { "*" } else { " " };
        println!(
            "{marker} {} select_k {:?}: mean F1 {:.4}",
            serde_json::to_string(&r.config.model).map_err(|e| Failure::Internal(e.to_string()))?,
            r.config.select_k,
            r.mean.f1
        );
    }
    match &a.out {
        Some(path) => write_json(path, &report),
        None => Ok(()),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ClassifyRow {
    id: String,
    text: String,
}

#[derive(Serialize)]
struct PredictionRow<'a> {
    id: &'a str,
    label: Label,
    score: f64,
}

fn classify(a: ClassifyArgs) -> CmdResult {
    let resources = TextResources::default();
    let model = load_model(&a.model)?;
    if let Some(space) = &model.feature_space {
        space.check_resources(&resources)?;
    }
    let file = File::open(&a.input).map_err(|e| data(format!("{}: {e}", a.input.display())))?;
    let mut out = Vec::new();
    let mut n = 0usize;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| data(format!("{}: {e}", a.input.display())))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: ClassifyRow =
            serde_json::from_str(&line).map_err(|e| data(format!("{} line {}: {e}", a.input.display(), i + 1)))?;
        let p = predict_text(&model, &row.text, &resources)?;
        serde_json::to_writer(&mut out, &PredictionRow { id: &row.id, label: p.label, score: p.score })
            .map_err(|e| Failure::Internal(e.to_string()))?;
        out.push(b'\n');
        n += 1;
    }
    write_file(&a.out, &out)?;
    println!("classified {n}");
    Ok(())
}

fn early(a: EarlyArgs) -> CmdResult {
    if !(a.test_fraction > 0.0 && a.test_fraction < 1.0) {
        return Err(usage("--test-fraction must lie in (0, 1)"));
    }
    let config = a.pipeline.config()?;
    let resources = TextResources::default();
    let corpus: Corpus = load_corpus(&a.corpus)?;
    let (train, test) = split_profiles(&corpus, a.test_fraction, a.seed)?;
    let curve = early_detection(&train, &test, &config, &resources)?;
    let out = BufWriter::new(File::create(&a.out).map_err(|e| data(format!("{}: {e}", a.out.display())))?);
    write_all(out, curve.to_csv().as_bytes(), &a.out)?;
    println!(
        "test profiles {} excluded {}: m=1 {:.3} m=4 {:.3} final {:.3}",
        curve.test_profiles,
        curve.excluded.len(),
        curve.fraction_at_count(1),
        curve.fraction_at_count(4),
        curve.final_fraction()
    );
    Ok(())
}

fn write_all(mut w: impl Write, bytes: &[u8], path: &Path) -> CmdResult {
    w.write_all(bytes)
        .and_then(|_| w.flush())
        .map_err(|e| data(format!("{}: {e}", path.display())))
}

fn compare(a: CompareArgs) -> CmdResult {
    let ra: CvReport = read_json(&a.report_a)?;
    let rb: CvReport = read_json(&a.report_b)?;
    if ra.per_fold.len() != rb.per_fold.len() {
        return Err(data(format!(
            "fold counts differ: {} vs {}",
            ra.per_fold.len(),
            rb.per_fold.len()
        )));
    }
    if ra.seed != rb.seed || ra.n_documents != rb.n_documents {
        eprintln!("warning: reports were not produced on the same folds; the pairing may be meaningless");
    }
    let fa: Vec<f64> = ra.per_fold.iter().map(|m| m.f1).collect();
    let fb: Vec<f64> = rb.per_fold.iter().map(|m| m.f1).collect();
    let t = paired_ttest(&fa, &fb)?;
    println!(
        "mean F1 a {:.4} b {:.4}: t {:.4} df {} p {:.4}",
        mean(&fa),
        mean(&fb),
        t.statistic,
        t.df.unwrap_or(0.0),
        t.p_value
    );
    Ok(())
}

fn recall_only(a: RecallOnlyArgs) -> CmdResult {
    let resources = TextResources::default();
    let model = load_model(&a.model)?;
    let corpus = load_corpus(&a.corpus)?;
    let docs = positive_documents(&corpus, a.unit)?;
    let r = recall_only_eval(&model, &docs, &resources)?;
    println!("n {} predicted_post {} recall {:.4}", r.n, r.predicted_post, r.recall);
    Ok(())
}

fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::GenSynth(a) => gen_synth(a),
        Command::Stats(a) => stats(a),
        Command::Train(a) => train(a),
        Command::Cv(a) => cv(a),
        Command::Grid(a) => grid(a),
        Command::Classify(a) => classify(a),
        Command::Early(a) => early(a),
        Command::Compare(a) => compare(a),
        Command::RecallOnly(a) => recall_only(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    panic::set_hook(Box::new(|info| eprintln!("internal error: {info}")));
    match panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(Failure::Usage(m))) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Ok(Err(Failure::Data(m))) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Ok(Err(Failure::Internal(m))) => {
            eprintln!("internal error: {m}");
            ExitCode::from(3)
        }
        Err(_) => ExitCode::from(3),
    }
}
