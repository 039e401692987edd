//! Command-line front end: argument parsing, config files and reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::corpus::{self, SplitSpec};
use crate::embedding::{self, OovPolicy};
use crate::error::{Error, Result};
use crate::pipeline::{
    self, AugmentMethod, LanguageRegime, Pairing, ReconstructorKind, RunConfig, Scope, RECONSTRUCTOR_URL_ENV,
};
use crate::schedule::{self, PairSchedule};
use crate::stats::{self, FeatureSet, LanguageVector, SignificanceConfig};
use crate::vicinal::ThetaRule;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "vforge", version, about = "Vicinal data augmentation and evaluation statistics")]
pub struct Cli {
    /// Worker threads (defaults to all cores). Output does not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Split a labeled corpus into few-shot and evaluation files.
    Split(SplitArgs),
    /// Generate synthetic instances.
    Augment(AugmentOptions),
    /// Evaluation statistics.
    #[command(subcommand)]
    Stats(StatsCommand),
    /// Pairing schedules.
    #[command(subcommand)]
    Schedule(ScheduleCommand),
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Few-shot fraction, as `p/q` or a decimal.
    #[arg(long, default_value = "1/10")]
    pub fraction: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory (defaults to the corpus directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Augmentation options. Every flag may also be set in a TOML file passed
/// with `--config`, using the flag name as key; flags win.
#[derive(Debug, Clone, Default, Args, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct AugmentOptions {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub method: Option<AugmentMethod>,
    #[arg(long, value_enum)]
    pub regime: Option<LanguageRegime>,
    #[arg(long, value_enum)]
    pub scope: Option<Scope>,
    #[arg(long, value_enum)]
    pub pairing: Option<Pairing>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    #[arg(long)]
    pub pool: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub oov: Option<OovArg>,
    /// Beta(α, α) shape for MIXUP weights.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// `half`, `third`, or a fixed cos θ.
    #[arg(long)]
    pub theta: Option<String>,
    #[arg(long)]
    pub rounds: Option<usize>,
    #[arg(long)]
    pub context_window: Option<usize>,
    #[arg(long)]
    pub mask_token: Option<String>,
    #[arg(long, value_enum)]
    pub reconstructor: Option<ReconstructorKind>,
    #[arg(long)]
    pub reconstructor_url: Option<String>,
    #[arg(long)]
    pub timeout_secs: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum OovArg {
    Error,
    Zero,
}

impl From<OovArg> for OovPolicy {
    fn from(v: OovArg) -> Self {
        match v {
            OovArg::Error => OovPolicy::Error,
            OovArg::Zero => OovPolicy::ZeroVector,
        }
    }
}

pub fn parse_theta(s: &str) -> Result<ThetaRule> {
    match s.trim().to_ascii_lowercase().as_str() {
        "half" | "half-alpha" => Ok(ThetaRule::HalfAlpha),
        "third" | "third-alpha" => Ok(ThetaRule::ThirdAlpha),
        other => other
            .parse::<f64>()
            .map(ThetaRule::Fixed)
            .map_err(|_| Error::InvalidConfig(format!("theta must be half, third or a cosine value, got {s:?}"))),
    }
}

impl AugmentOptions {
    /// Fills unset fields from `other`.
    fn or(self, other: AugmentOptions) -> AugmentOptions {
        AugmentOptions {
            config: self.config.or(other.config),
            method: self.method.or(other.method),
            regime: self.regime.or(other.regime),
            scope: self.scope.or(other.scope),
            pairing: self.pairing.or(other.pairing),
            iterations: self.iterations.or(other.iterations),
            seed: self.seed.or(other.seed),
            corpus: self.corpus.or(other.corpus),
            embeddings: self.embeddings.or(other.embeddings),
            lexicon: self.lexicon.or(other.lexicon),
            pool: self.pool.or(other.pool),
            out: self.out.or(other.out),
            oov: self.oov.or(other.oov),
            alpha: self.alpha.or(other.alpha),
            theta: self.theta.or(other.theta),
            rounds: self.rounds.or(other.rounds),
            context_window: self.context_window.or(other.context_window),
            mask_token: self.mask_token.or(other.mask_token),
            reconstructor: self.reconstructor.or(other.reconstructor),
            reconstructor_url: self.reconstructor_url.or(other.reconstructor_url),
            timeout_secs: self.timeout_secs.or(other.timeout_secs),
        }
    }

    /// Merges flags over the config file and applies defaults.
    pub fn resolve(self) -> Result<RunConfig> {
        let file = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                toml::from_str::<AugmentOptions>(&text)
                    .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?
            }
            None => AugmentOptions::default(),
        };
        let o = self.or(file);
        let missing = |flag: &str| Error::InvalidConfig(format!("--{flag} is required"));
        let mut cfg = RunConfig::new(
            o.method.ok_or_else(|| missing("method"))?,
            o.corpus.ok_or_else(|| missing("corpus"))?,
            o.out.ok_or_else(|| missing("out"))?,
        );
        cfg.regime = o.regime.unwrap_or_default();
        cfg.scope = o.scope.unwrap_or_default();
        cfg.pairing = o.pairing.unwrap_or_default();
        cfg.iterations = o.iterations.unwrap_or(1);
        cfg.seed = o.seed.unwrap_or(0);
        cfg.embeddings = o.embeddings;
        cfg.lexicon = o.lexicon;
        cfg.pool = o.pool;
        cfg.oov = o.oov.map(Into::into).unwrap_or_default();
        if let Some(alpha) = o.alpha {
            cfg.mixup_alpha = alpha;
        }
        if let Some(theta) = o.theta {
            cfg.theta = parse_theta(&theta)?;
        }
        if let Some(r) = o.rounds {
            cfg.ssmba.rounds = r;
        }
        if let Some(w) = o.context_window {
            cfg.ssmba.context_window = w;
        }
        if let Some(m) = o.mask_token {
            cfg.ssmba.mask_token = m;
        }
        cfg.ssmba.reconstructor = o.reconstructor.unwrap_or_default();
        cfg.ssmba.url = o
            .reconstructor_url
            .or_else(|| std::env::var(RECONSTRUCTOR_URL_ENV).ok().filter(|u| !u.is_empty()));
        if cfg.ssmba.reconstructor == ReconstructorKind::Embedding {
            cfg.ssmba.url = None;
        }
        if let Some(t) = o.timeout_secs {
            cfg.ssmba.timeout_secs = t;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Write the JSON report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print JSON instead of the text table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Subcommand)]
pub enum StatsCommand {
    /// McNemar's test on paired predictions, with a Bonferroni level.
    Mcnemar {
        #[arg(long)]
        outcomes: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 1)]
        comparisons: u32,
        /// Exact binomial test instead of the continuity-corrected chi-square.
        #[arg(long)]
        exact: bool,
        #[command(flatten)]
        report: ReportArgs,
    },
    /// Pearson correlation, either of a point file or of typological
    /// similarity to a reference language against per-language scores.
    Pearson {
        /// JSON `{"xs": [..], "ys": [..]}`.
        #[arg(long, conflicts_with_all = ["vectors", "scores"])]
        points: Option<PathBuf>,
        /// Language-vector JSON files.
        #[arg(long, num_args = 1.., requires = "scores")]
        vectors: Vec<PathBuf>,
        #[arg(long, default_value = "en")]
        reference: String,
        /// JSON object mapping language to score.
        #[arg(long)]
        scores: Option<PathBuf>,
        #[command(flatten)]
        report: ReportArgs,
    },
    /// Per-class flip rates between two systems.
    Flip {
        #[arg(long)]
        outcomes: PathBuf,
        #[command(flatten)]
        report: ReportArgs,
    },
    /// Precision and recall of both systems.
    Pr {
        #[arg(long)]
        outcomes: PathBuf,
        #[command(flatten)]
        report: ReportArgs,
    },
    /// Mean loss over synthetic samples.
    Risk {
        /// JSON array or whitespace-separated numbers.
        #[arg(long)]
        losses: PathBuf,
        #[command(flatten)]
        report: ReportArgs,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DumpRegime {
    Mixup,
    Mixag,
    Multilingual,
    NearestNeighbor,
}

#[derive(Debug, Subcommand)]
pub enum ScheduleCommand {
    /// Write schedules as JSON lines.
    Dump {
        #[arg(long, value_enum)]
        regime: DumpRegime,
        /// Instance count; alternatively taken from --corpus.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        pool: Option<PathBuf>,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        iterations: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

pub struct Report {
    pub json: Value,
    pub table: String,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |x| format!("{x:.4}"))
}

/// Left-aligned text table with a header rule.
pub fn render_table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = headers.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: Vec<&str>| {
        let mut s = String::new();
        for (i, (c, w)) in cells.iter().zip(&widths).enumerate() {
            if i > 0 {
                s.push_str("  ");
            }
            let _ = write!(s, "{c:<w$}");
        }
        s.trim_end().to_string()
    };
    let mut out = line(headers.to_vec());
    out.push('\n');
    out.push_str(&line(widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().iter().map(String::as_str).collect()));
    out.push('\n');
    for row in rows {
        out.push_str(&line(row.iter().map(String::as_str).collect()));
        out.push('\n');
    }
    out
}

pub fn mcnemar_report(outcomes: &[stats::PairedOutcome], sig: &SignificanceConfig, exact: bool) -> Result<Report> {
    let alpha_altered = stats::bonferroni(sig)?;
    let m = if exact {
        stats::mcnemar_exact(outcomes)
    } else {
        stats::mcnemar(outcomes)
    };
    let significant = m.p_value < alpha_altered;
    let test = if exact { "exact-binomial" } else { "chi2-continuity-corrected" };
    let json = json!({
        "test": test,
        "n": outcomes.len(),
        "b": m.b,
        "c": m.c,
        "statistic": m.statistic,
        "p_value": m.p_value,
        "alpha": sig.alpha,
        "comparisons": sig.comparisons,
        "alpha_altered": alpha_altered,
        "significant": significant,
    });
    let table = render_table(
        &["test", "n", "b", "c", "statistic", "p_value", "alpha_altered", "significant"],
        &[vec![
            test.to_string(),
            outcomes.len().to_string(),
            m.b.to_string(),
            m.c.to_string(),
            format!("{:.4}", m.statistic),
            format!("{:.4}", m.p_value),
            format!("{alpha_altered:.6}"),
            significant.to_string(),
        ]],
    );
    Ok(Report { json, table })
}

pub fn flip_report(outcomes: &[stats::PairedOutcome]) -> Result<Report> {
    let f = stats::flip_rates(outcomes)?;
    Ok(Report {
        json: serde_json::to_value(f).expect("serializes"),
        table: render_table(
            &["neg_degraded_pct", "pos_gained_pct"],
            &[vec![fmt_opt(f.neg_degraded_pct), fmt_opt(f.pos_gained_pct)]],
        ),
    })
}

pub fn pr_report(outcomes: &[stats::PairedOutcome]) -> Result<Report> {
    let gold: Vec<u8> = outcomes.iter().map(|o| o.gold).collect();
    let a = stats::precision_recall(&gold, &outcomes.iter().map(|o| o.pred_a).collect::<Vec<_>>())?;
    let b = stats::precision_recall(&gold, &outcomes.iter().map(|o| o.pred_b).collect::<Vec<_>>())?;
    Ok(Report {
        json: json!({ "a": a, "b": b }),
        table: render_table(
            &["system", "precision", "recall"],
            &[
                vec!["a".into(), fmt_opt(a.precision), fmt_opt(a.recall)],
                vec!["b".into(), fmt_opt(b.precision), fmt_opt(b.recall)],
            ],
        ),
    })
}

pub fn risk_report(losses: &[f64]) -> Result<Report> {
    let r = stats::vicinal_risk(losses)?;
    Ok(Report {
        json: json!({ "n": losses.len(), "vicinal_risk": r }),
        table: render_table(&["n", "vicinal_risk"], &[vec![losses.len().to_string(), format!("{r:.6}")]]),
    })
}

#[derive(Deserialize)]
struct Points {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

pub fn pearson_points_report(xs: &[f64], ys: &[f64]) -> Result<Report> {
    let p = stats::pearson(xs, ys)?;
    Ok(Report {
        json: json!({ "n": xs.len(), "r": p.r, "p_value": p.p_value }),
        table: render_table(
            &["n", "r", "p_value"],
            &[vec![xs.len().to_string(), format!("{:.6}", p.r), format!("{:.6}", p.p_value)]],
        ),
    })
}

/// Correlates, per feature set, each language's similarity to `reference`
/// with its score.
pub fn pearson_typology_report(
    vectors: &[LanguageVector],
    reference: &str,
    scores: &BTreeMap<String, f64>,
) -> Result<Report> {
    let mut by_set: BTreeMap<FeatureSet, Vec<&LanguageVector>> = BTreeMap::new();
    for v in vectors {
        by_set.entry(v.feature_set).or_default().push(v);
    }
    let mut sets = Vec::new();
    let mut rows = Vec::new();
    for (set, vs) in by_set {
        let Some(reference_vec) = vs.iter().find(|v| v.language == reference) else {
            return Err(Error::InvalidInput(format!(
                "no {} vector for reference language {reference}",
                set.as_str()
            )));
        };
        let mut pairs = Vec::new();
        for v in vs.iter().filter(|v| v.language != reference) {
            let Some(&score) = scores.get(&v.language) else { continue };
            let sim = stats::cosine_language_similarity(reference_vec, v)?;
            pairs.push(json!({ "language": v.language, "similarity": sim, "score": score }));
        }
        let xs: Vec<f64> = pairs.iter().map(|p| p["similarity"].as_f64().unwrap()).collect();
        let ys: Vec<f64> = pairs.iter().map(|p| p["score"].as_f64().unwrap()).collect();
        let (r, p_value) = match stats::pearson(&xs, &ys) {
            Ok(p) => (Some(p.r), Some(p.p_value)),
            Err(Error::UndefinedCorrelation(_) | Error::InvalidInput(_)) => (None, None),
            Err(e) => return Err(e),
        };
        rows.push(vec![set.as_str().to_string(), xs.len().to_string(), fmt_opt(r), fmt_opt(p_value)]);
        sets.push(json!({
            "feature_set": set.as_str(),
            "n": xs.len(),
            "r": r,
            "p_value": p_value,
            "pairs": pairs,
        }));
    }
    Ok(Report {
        json: json!({ "reference": reference, "feature_sets": sets }),
        table: render_table(&["feature_set", "n", "r", "p_value"], &rows),
    })
}

pub fn load_losses(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if text.trim_start().starts_with('[') {
        return serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e.to_string()));
    }
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        for field in line.split_whitespace() {
            out.push(
                field
                    .parse()
                    .map_err(|_| Error::parse(path, idx + 1, format!("not a number: {field:?}")))?,
            );
        }
    }
    Ok(out)
}

pub fn run_stats(cmd: &StatsCommand) -> Result<(Report, &ReportArgs)> {
    Ok(match cmd {
        StatsCommand::Mcnemar {
            outcomes,
            alpha,
            comparisons,
            exact,
            report,
        } => {
            let sig = SignificanceConfig {
                alpha: *alpha,
                comparisons: *comparisons,
            };
            (mcnemar_report(&stats::load_outcomes(outcomes)?, &sig, *exact)?, report)
        }
        StatsCommand::Pearson {
            points,
            vectors,
            reference,
            scores,
            report,
        } => {
            let r = match (points, scores) {
                (Some(path), _) => {
                    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                    let pts: Points =
                        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e.to_string()))?;
                    pearson_points_report(&pts.xs, &pts.ys)?
                }
                (None, Some(scores_path)) => {
                    let text = fs::read_to_string(scores_path).map_err(|e| Error::io(scores_path, e))?;
                    let scores: BTreeMap<String, f64> = serde_json::from_str(&text)
                        .map_err(|e| Error::parse(scores_path, e.line(), e.to_string()))?;
                    let vecs = vectors
                        .iter()
                        .map(stats::load_language_vector)
                        .collect::<Result<Vec<_>>>()?;
                    pearson_typology_report(&vecs, reference, &scores)?
                }
                (None, None) => {
                    return Err(Error::InvalidConfig("pearson needs --points or --vectors with --scores".into()));
                }
            };
            (r, report)
        }
        StatsCommand::Flip { outcomes, report } => (flip_report(&stats::load_outcomes(outcomes)?)?, report),
        StatsCommand::Pr { outcomes, report } => (pr_report(&stats::load_outcomes(outcomes)?)?, report),
        StatsCommand::Risk { losses, report } => (risk_report(&load_losses(losses)?)?, report),
    })
}

fn schedules_for_dump(cmd: &ScheduleCommand) -> Result<(Vec<PairSchedule>, Option<&PathBuf>)> {
    let ScheduleCommand::Dump {
        regime,
        n,
        corpus,
        pool,
        embeddings,
        iterations,
        seed,
        out,
    } = cmd;
    let loaded = corpus.as_ref().map(corpus::load_corpus).transpose()?;
    let count = || -> Result<usize> {
        n.or(loaded.as_ref().map(|c| c.len()))
            .ok_or_else(|| Error::InvalidConfig("--n or --corpus is required".into()))
    };
    let need = |flag: &str| Error::InvalidConfig(format!("--{flag} is required for this regime"));
    let schedules = match regime {
        DumpRegime::Mixup => schedule::mixup_schedule(count()?, *iterations, *seed)?,
        DumpRegime::Mixag => schedule::mixag_schedule(count()?, *seed, *iterations)?,
        DumpRegime::Multilingual => {
            let target = loaded.as_ref().ok_or_else(|| need("corpus"))?;
            let pool = corpus::load_corpus(pool.as_ref().ok_or_else(|| need("pool"))?)?;
            schedule::multilingual_schedule(target, &pool, *iterations, *seed)?
        }
        DumpRegime::NearestNeighbor => {
            let target = loaded.as_ref().ok_or_else(|| need("corpus"))?;
            let table = embedding::load_table(embeddings.as_ref().ok_or_else(|| need("embeddings"))?)?;
            let seqs = target
                .iter()
                .map(|i| embedding::encode(&i.tokens, &table, OovPolicy::Error))
                .collect::<Result<Vec<_>>>()?;
            vec![schedule::nn_schedule(&seqs, n.unwrap_or(seqs.len()))?]
        }
    };
    Ok((schedules, out.as_ref()))
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidConfig(_) => EXIT_USAGE,
        Error::Io { .. }
        | Error::Parse { .. }
        | Error::InvalidInstance { .. }
        | Error::InvalidSplit(_)
        | Error::InvalidTable(_)
        | Error::OutOfVocabulary(_)
        | Error::DimensionMismatch { .. }
        | Error::ExhaustedPairs(_)
        | Error::Reconstruction { .. }
        | Error::UndefinedCorrelation(_)
        | Error::InvalidInput(_) => EXIT_DATA,
        Error::ZeroVector | Error::DegenerateAngle | Error::OutOfRangeTheta { .. } => EXIT_INTERNAL,
    }
}

fn write_or_print(out: Option<&PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Error::io(path, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Executes a parsed command. Informational output goes to stdout.
pub fn execute(cli: Cli) -> Result<()> {
    let work = move || -> Result<()> {
        match cli.command {
            Command::Split(args) => {
                let (num, den) = corpus::parse_fraction(&args.fraction)?;
                let spec = SplitSpec::new(num, den, args.seed)?;
                let out_dir = args
                    .out
                    .clone()
                    .or_else(|| args.corpus.parent().map(Path::to_path_buf))
                    .unwrap_or_default();
                let (few, eval) = pipeline::run_split(&args.corpus, &spec, &out_dir)?;
                println!("{}\n{}", few.display(), eval.display());
            }
            Command::Augment(opts) => {
                let cfg = opts.resolve()?;
                let manifest = pipeline::run_augment(&cfg)?;
                let rows: Vec<Vec<String>> = manifest
                    .counts
                    .iter()
                    .map(|c| {
                        vec![
                            c.group.clone(),
                            c.method.clone(),
                            c.iteration.to_string(),
                            c.generated.to_string(),
                            c.skipped.to_string(),
                        ]
                    })
                    .collect();
                print!("{}", render_table(&["group", "method", "iteration", "generated", "skipped"], &rows));
                println!("{} synthetic instances -> {}", manifest.total_generated, cfg.out.display());
            }
            Command::Stats(cmd) => {
                let (report, args) = run_stats(&cmd)?;
                let mut json = serde_json::to_string_pretty(&report.json).expect("serializes");
                json.push('\n');
                if let Some(path) = &args.out {
                    fs::write(path, &json).map_err(|e| Error::io(path, e))?;
                }
                print!("{}", if args.json { &json } else { &report.table });
            }
            Command::Schedule(cmd) => {
                let (schedules, out) = schedules_for_dump(&cmd)?;
                let mut text = String::new();
                for s in &schedules {
                    text.push_str(&serde_json::to_string(s).expect("serializes"));
                    text.push('\n');
                }
                write_or_print(out, &text)?;
            }
        }
        Ok(())
    };
    match cli.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("cannot start {n} threads: {e}")))?
            .install(work),
        None => work(),
    }
}
