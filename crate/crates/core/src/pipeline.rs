//! Augmentation runs: split → schedule → augment → emit, plus the run
//! manifest.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{self, Corpus, Domain, Instance, Provenance, SplitSpec};
use crate::embedding::{self, EmbeddingTable, OovPolicy, VectorSequence};
use crate::error::{Error, Result};
use crate::schedule::{self, PairSchedule};
use crate::seed;
use crate::ssmba::{self, EmbeddingReconstructor, HttpReconstructor, MaskPolicy, Reconstructor};
use crate::vicinal::{self, MixagConfig, MixupConfig, Parent, SyntheticInstance, ThetaRule};

pub const RECONSTRUCTOR_URL_ENV: &str = "VFORGE_RECONSTRUCTOR_URL";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum AugmentMethod {
    Mixup,
    Mixag,
    Ssmba,
    SsmbaThenMixup,
    SsmbaThenMixag,
}

impl AugmentMethod {
    fn uses_ssmba(self) -> bool {
        matches!(self, Self::Ssmba | Self::SsmbaThenMixup | Self::SsmbaThenMixag)
    }

    fn mixer(self) -> Option<vicinal::Method> {
        match self {
            Self::Mixup | Self::SsmbaThenMixup => Some(vicinal::Method::Mixup),
            Self::Mixag | Self::SsmbaThenMixag => Some(vicinal::Method::Mixag),
            Self::Ssmba => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum LanguageRegime {
    #[default]
    Monolingual,
    Multilingual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Scope {
    #[default]
    PerDomain,
    All,
}

/// How partners are chosen in the monolingual regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Pairing {
    #[default]
    Random,
    NearestNeighbor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ReconstructorKind {
    #[default]
    Embedding,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsmbaSettings {
    pub reconstructor: ReconstructorKind,
    pub rounds: usize,
    pub context_window: usize,
    pub mask_token: String,
    pub url: Option<String>,
    pub timeout_secs: u64,
}

impl Default for SsmbaSettings {
    fn default() -> Self {
        SsmbaSettings {
            reconstructor: ReconstructorKind::Embedding,
            rounds: 1,
            context_window: 2,
            mask_token: ssmba::DEFAULT_MASK_TOKEN.to_string(),
            url: None,
            timeout_secs: 30,
        }
    }
}

/// A fully resolved augmentation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub method: AugmentMethod,
    pub regime: LanguageRegime,
    pub scope: Scope,
    pub pairing: Pairing,
    pub iterations: usize,
    pub seed: u64,
    pub corpus: PathBuf,
    pub embeddings: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    /// Union of all languages' few-shot sets, for the multilingual regime.
    pub pool: Option<PathBuf>,
    pub out: PathBuf,
    pub oov: OovPolicy,
    pub mixup_alpha: f64,
    pub theta: ThetaRule,
    pub ssmba: SsmbaSettings,
}

impl RunConfig {
    pub fn new(method: AugmentMethod, corpus: impl Into<PathBuf>, out: impl Into<PathBuf>) -> Self {
        RunConfig {
            method,
            regime: LanguageRegime::Monolingual,
            scope: Scope::PerDomain,
            pairing: Pairing::Random,
            iterations: 1,
            seed: 0,
            corpus: corpus.into(),
            embeddings: None,
            lexicon: None,
            pool: None,
            out: out.into(),
            oov: OovPolicy::Error,
            mixup_alpha: MixupConfig::default().alpha,
            theta: ThetaRule::HalfAlpha,
            ssmba: SsmbaSettings::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.iterations == 0 {
            return bad("iterations must be at least 1");
        }
        MixupConfig {
            alpha: self.mixup_alpha,
            seed: self.seed,
        }
        .validate()?;
        MixagConfig { theta_rule: self.theta }.validate()?;

        let needs_table = self.method.mixer().is_some()
            || (self.method.uses_ssmba() && self.ssmba.reconstructor == ReconstructorKind::Embedding);
        if needs_table && self.embeddings.is_none() {
            return bad("this method needs an embedding table (--embeddings)");
        }
        if self.method.uses_ssmba() {
            if self.ssmba.rounds == 0 {
                return bad("ssmba rounds must be at least 1");
            }
            if self.ssmba.context_window == 0 {
                return bad("ssmba context window must be at least 1");
            }
            if self.ssmba.reconstructor == ReconstructorKind::Http && self.ssmba.url.is_none() {
                return Err(Error::InvalidConfig(format!(
                    "the http reconstructor needs --reconstructor-url or {RECONSTRUCTOR_URL_ENV}"
                )));
            }
        }
        if self.regime == LanguageRegime::Multilingual {
            if self.method.mixer().is_none() {
                return bad("the multilingual regime applies to mixing methods only");
            }
            if self.pool.is_none() {
                return bad("the multilingual regime needs a pool corpus (--pool)");
            }
            if self.pairing == Pairing::NearestNeighbor {
                return bad("nearest-neighbor pairing is monolingual only");
            }
        }
        if self.pairing == Pairing::NearestNeighbor && self.iterations != 1 {
            return bad("nearest-neighbor pairing is deterministic; use a single iteration");
        }
        for path in [Some(&self.corpus), self.embeddings.as_ref(), self.lexicon.as_ref(), self.pool.as_ref()]
            .into_iter()
            .flatten()
        {
            if !path.is_file() {
                return Err(Error::InvalidConfig(format!("input file {} does not exist", path.display())));
            }
        }
        Ok(())
    }

    pub fn manifest_path(&self) -> PathBuf {
        manifest_path_for(&self.out)
    }
}

pub fn manifest_path_for(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    out.with_file_name(name)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationCount {
    pub group: String,
    pub method: String,
    pub iteration: usize,
    pub generated: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub role: String,
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: RunConfig,
    pub config_sha256: String,
    pub seed: u64,
    pub inputs: Vec<InputDigest>,
    pub schedule_sha256: String,
    pub counts: Vec<IterationCount>,
    pub total_generated: usize,
    pub output_sha256: String,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn file_digest(role: &str, path: &Path) -> Result<InputDigest> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(InputDigest {
        role: role.to_string(),
        path: path.to_path_buf(),
        sha256: sha256_hex(&bytes),
    })
}

struct Inputs {
    corpus: Corpus,
    table: Option<EmbeddingTable>,
    lexicon: Option<std::collections::BTreeSet<String>>,
    pool: Option<Corpus>,
}

fn load_inputs(cfg: &RunConfig) -> Result<Inputs> {
    let corpus = corpus::load_corpus(&cfg.corpus)?;
    if let Some(inst) = corpus.iter().find(|i| i.label.is_none()) {
        return Err(Error::InvalidInstance {
            id: inst.id.clone(),
            message: "augmentation needs labeled instances".into(),
        });
    }
    Ok(Inputs {
        corpus,
        table: cfg.embeddings.as_ref().map(embedding::load_table).transpose()?,
        lexicon: cfg.lexicon.as_ref().map(ssmba::load_lexicon).transpose()?,
        pool: cfg.pool.as_ref().map(corpus::load_corpus).transpose()?,
    })
}

fn mask_policy(cfg: &RunConfig, lexicon: Option<&std::collections::BTreeSet<String>>) -> Result<MaskPolicy> {
    let mut policy = match lexicon {
        Some(words) => MaskPolicy::lexicon(words.iter().cloned(), cfg.seed)?,
        None => MaskPolicy::random_one(cfg.seed),
    };
    policy.mask_token = cfg.ssmba.mask_token.clone();
    policy.validate()?;
    Ok(policy)
}

/// What one group (a domain, or the whole corpus) produced.
struct GroupOutput {
    instances: Vec<Instance>,
    schedules: Vec<PairSchedule>,
    counts: Vec<IterationCount>,
}

struct Mixer<'a> {
    cfg: &'a RunConfig,
    table: &'a EmbeddingTable,
    method: vicinal::Method,
}

impl Mixer<'_> {
    fn encode_all(&self, corpus: &Corpus) -> Result<Vec<VectorSequence>> {
        corpus
            .instances
            .par_iter()
            .map(|inst| {
                embedding::encode(&inst.tokens, self.table, self.cfg.oov).map_err(|e| Error::InvalidInstance {
                    id: inst.id.clone(),
                    message: e.to_string(),
                })
            })
            .collect()
    }

    fn schedules(&self, group: &str, target: &Corpus, pool: Option<&Corpus>, target_enc: &[VectorSequence]) -> Result<Vec<PairSchedule>> {
        let sched_seed = seed::derive_seed(self.cfg.seed, seed::SCHEDULE, group);
        match (pool, self.cfg.pairing, self.method) {
            (Some(pool), _, _) => schedule::multilingual_schedule(target, pool, self.cfg.iterations, sched_seed),
            (None, Pairing::NearestNeighbor, _) => Ok(vec![schedule::nn_schedule(target_enc, target.len())?]),
            (None, Pairing::Random, vicinal::Method::Mixup) => {
                schedule::mixup_schedule(target.len(), self.cfg.iterations, sched_seed)
            }
            (None, Pairing::Random, _) => schedule::mixag_schedule(target.len(), sched_seed, self.cfg.iterations),
        }
    }

    fn combine(&self, group: &str, iteration: usize, k: usize, i: Parent<'_>, j: Parent<'_>) -> Result<SyntheticInstance> {
        match self.method {
            vicinal::Method::Mixup => {
                let cfg = MixupConfig {
                    alpha: self.cfg.mixup_alpha,
                    seed: self.cfg.seed,
                };
                let mut rng = seed::substream(cfg.seed, seed::MIXUP_LAMBDA, &format!("{group}/{iteration}/{k}"));
                let lambda = vicinal::sample_lambda(&cfg, &mut rng)?;
                vicinal::mixup_combine(i, j, lambda, self.table)
            }
            _ => vicinal::mixag_combine(i, j, &MixagConfig { theta_rule: self.cfg.theta }, self.table),
        }
    }

    fn run(&self, group: &str, target: &Corpus, pool: Option<&Corpus>) -> Result<GroupOutput> {
        let target_enc = self.encode_all(target)?;
        let pool_enc = pool.map(|p| self.encode_all(p)).transpose()?;
        let schedules = self.schedules(group, target, pool, &target_enc)?;
        let (partners, partner_enc) = match (pool, &pool_enc) {
            (Some(p), Some(e)) => (p, e.as_slice()),
            _ => (target, target_enc.as_slice()),
        };
        let tag = self.method.as_str().to_lowercase();

        let mut instances = Vec::new();
        let mut counts = Vec::new();
        for sched in &schedules {
            let results: Vec<Result<Option<Instance>>> = sched
                .pairs
                .par_iter()
                .enumerate()
                .map(|(k, &(a, b))| {
                    let (ia, ib) = (&target.instances[a], &partners.instances[b]);
                    let pa = Parent {
                        id: &ia.id,
                        label: ia.require_label()?,
                        embedding: &target_enc[a],
                    };
                    let pb = Parent {
                        id: &ib.id,
                        label: ib.require_label()?,
                        embedding: &partner_enc[b],
                    };
                    match self.combine(group, sched.iteration, k, pa, pb) {
                        Ok(s) => Ok(Some(Instance {
                            id: format!("{group}.{tag}.i{}.p{k}", sched.iteration),
                            tokens: s.tokens,
                            label: Some(s.label),
                            language: ia.language.clone(),
                            domain: ia.domain,
                            provenance: Some(Provenance {
                                method: s.method.as_str().to_string(),
                                parents: vec![s.parent_ids.0, s.parent_ids.1],
                                lambda: Some(s.lambda_used),
                            }),
                        })),
                        Err(e @ (Error::DegenerateAngle | Error::OutOfRangeTheta { .. } | Error::ZeroVector)) => {
                            log::warn!("skipping pair ({}, {}) in {group} iteration {}: {e}", ia.id, ib.id, sched.iteration);
                            Ok(None)
                        }
                        Err(e) => Err(Error::InvalidInstance {
                            id: ia.id.clone(),
                            message: format!("mixing with {} failed: {e}", ib.id),
                        }),
                    }
                })
                .collect();
            let mut generated = 0;
            let mut skipped = 0;
            for r in results {
                match r? {
                    Some(inst) => {
                        generated += 1;
                        instances.push(inst);
                    }
                    None => skipped += 1,
                }
            }
            counts.push(IterationCount {
                group: group.to_string(),
                method: self.method.as_str().to_string(),
                iteration: sched.iteration,
                generated,
                skipped,
            });
        }
        Ok(GroupOutput {
            instances,
            schedules,
            counts,
        })
    }
}

fn run_group(cfg: &RunConfig, inputs: &Inputs, group: &str, target: &Corpus, domain: Option<Domain>) -> Result<GroupOutput> {
    let mut out = GroupOutput {
        instances: Vec::new(),
        schedules: Vec::new(),
        counts: Vec::new(),
    };
    let mut mix_input = target.clone();

    if cfg.method.uses_ssmba() {
        let policy = mask_policy(cfg, inputs.lexicon.as_ref())?;
        let generated = match cfg.ssmba.reconstructor {
            ReconstructorKind::Embedding => {
                let table = inputs.table.as_ref().expect("validated");
                let mut r = EmbeddingReconstructor::new(table, cfg.ssmba.context_window)?;
                r.mask_token = &policy.mask_token;
                ssmba::ssmba_generate(target, &policy, &r as &dyn Reconstructor, cfg.ssmba.rounds)?
            }
            ReconstructorKind::Http => {
                let url = cfg.ssmba.url.as_deref().expect("validated");
                let r = HttpReconstructor::new(url, Duration::from_secs(cfg.ssmba.timeout_secs));
                ssmba::ssmba_generate(target, &policy, &r, cfg.ssmba.rounds)?
            }
        };
        out.counts.push(IterationCount {
            group: group.to_string(),
            method: vicinal::Method::Ssmba.as_str().to_string(),
            iteration: 1,
            generated: generated.len(),
            skipped: 0,
        });
        mix_input = Corpus::concat(target.name.clone(), [target, &generated])?;
        out.instances.extend(generated.instances);
    }

    if let Some(method) = cfg.method.mixer() {
        let table = inputs.table.as_ref().expect("validated");
        let pool = match (&inputs.pool, cfg.regime) {
            (Some(pool), LanguageRegime::Multilingual) => {
                let mut pool = corpus::filter(pool, None, domain);
                // chained runs add the target's reconstructions to the pool
                let known: HashSet<String> = pool.iter().map(|i| i.id.clone()).collect();
                pool.instances
                    .extend(mix_input.iter().filter(|i| !known.contains(&i.id)).cloned());
                Some(pool)
            }
            _ => None,
        };
        let mixer = Mixer { cfg, table, method };
        let mixed = mixer.run(group, &mix_input, pool.as_ref())?;
        out.instances.extend(mixed.instances);
        out.schedules.extend(mixed.schedules);
        out.counts.extend(mixed.counts);
    }
    Ok(out)
}

/// Runs one augmentation and writes the synthetic corpus plus its manifest.
pub fn run_augment(cfg: &RunConfig) -> Result<Manifest> {
    cfg.validate()?;
    let inputs = load_inputs(cfg)?;

    let groups: Vec<(String, Corpus, Option<Domain>)> = match cfg.scope {
        Scope::All => vec![("ALL".to_string(), inputs.corpus.clone(), None)],
        Scope::PerDomain => inputs
            .corpus
            .domain_counts()
            .into_keys()
            .map(|d| (d.as_str().to_string(), corpus::filter(&inputs.corpus, None, Some(d)), Some(d)))
            .collect(),
    };

    let mut instances = Vec::new();
    let mut schedules = Vec::new();
    let mut counts = Vec::new();
    for (name, target, domain) in &groups {
        let out = run_group(cfg, &inputs, name, target, *domain)?;
        instances.extend(out.instances);
        schedules.extend(out.schedules);
        counts.extend(out.counts);
    }

    let out_name = cfg
        .out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let synthetic = Corpus::new(out_name, instances)?;
    let mut bytes = Vec::new();
    corpus::write_corpus(&synthetic, &mut bytes).map_err(|e| Error::io(&cfg.out, e))?;
    fs::write(&cfg.out, &bytes).map_err(|e| Error::io(&cfg.out, e))?;

    let mut inputs_digest = vec![file_digest("corpus", &cfg.corpus)?];
    for (role, path) in [("embeddings", &cfg.embeddings), ("lexicon", &cfg.lexicon), ("pool", &cfg.pool)] {
        if let Some(p) = path {
            inputs_digest.push(file_digest(role, p)?);
        }
    }
    let config_json = serde_json::to_vec(cfg).expect("config serializes");
    let manifest = Manifest {
        config: cfg.clone(),
        config_sha256: sha256_hex(&config_json),
        seed: cfg.seed,
        inputs: inputs_digest,
        schedule_sha256: schedule::schedule_digest(&schedules),
        counts,
        total_generated: synthetic.len(),
        output_sha256: sha256_hex(&bytes),
    };
    let mut manifest_json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    manifest_json.push(b'\n');
    let manifest_path = cfg.manifest_path();
    fs::write(&manifest_path, manifest_json).map_err(|e| Error::io(&manifest_path, e))?;
    Ok(manifest)
}

/// Writes `<name>.fewshot.jsonl` and `<name>.eval.jsonl` into `out_dir`.
pub fn run_split(corpus_path: &Path, spec: &SplitSpec, out_dir: &Path) -> Result<(PathBuf, PathBuf)> {
    let corpus = corpus::load_corpus(corpus_path)?;
    let (few, eval) = corpus::split_few_shot(&corpus, spec)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let few_path = out_dir.join(format!("{}.fewshot.jsonl", corpus.name));
    let eval_path = out_dir.join(format!("{}.eval.jsonl", corpus.name));
    corpus::save_corpus(&few, &few_path)?;
    corpus::save_corpus(&eval, &eval_path)?;
    Ok((few_path, eval_path))
}
