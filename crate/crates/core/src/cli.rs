//! Commands behind the `causaltune` binary. Each command writes a run manifest
//! into its output directory before anything else, and can be replayed from
//! that manifest to byte-identical outputs.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bench::{
    comparison_source, default_objectives, generate_observational, run_comparison, run_method,
    true_hv_series, ComparisonConfig, Method, MethodRun, Summary, TransferScenario,
    DEFAULT_RIDGE_ALPHAS,
};
use crate::causal::{learn_causal_model, Admg, LearnConfig, StructuralConstraints};
use crate::data::{load_dataset, Dataset, VariableRole};
use crate::effects::{rank_and_reduce, AceTable, EffectConfig};
use crate::error::{Error, ErrorClass, Result};
use crate::gp::FitOptions;
use crate::mobo::{run_bo, BoConfig, ObjectiveSpec};
use crate::seed;
use crate::space::{ConfigSpace, SpecFile};

pub const MANIFEST: &str = "manifest.json";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// An error tagged with the pipeline stage that raised it.
#[derive(Debug)]
pub struct Failure {
    pub stage: &'static str,
    pub error: Error,
}

impl Failure {
    pub fn class(&self) -> ErrorClass {
        self.error.class()
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "stage {}: {}", self.stage, self.error)
    }
}

impl std::error::Error for Failure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

fn at(stage: &'static str) -> impl FnOnce(Error) -> Failure {
    move |error| Failure { stage, error }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure {
        stage: "args",
        error: Error::InvalidArgument(msg.into()),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Source,
    Target,
}

/// Observational data from a benchmark environment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerateArgs {
    pub level: u8,
    pub side: Side,
    pub rows: usize,
    pub seed: u64,
    pub out: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnArgs {
    pub train_data: PathBuf,
    pub spec: PathBuf,
    pub alpha: f64,
    /// Bins used when discretizing for entropic orientation.
    pub bins: usize,
    pub max_cond: usize,
    pub seed: u64,
    pub out: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankArgs {
    pub model: PathBuf,
    pub train_data: PathBuf,
    pub spec: PathBuf,
    /// Empty means every objective and constraint column.
    pub targets: Vec<String>,
    pub top_k: usize,
    pub bins: usize,
    pub grid: usize,
    pub out: PathBuf,
}

/// Thresholds and reference point, each overriding the benchmark default.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveOverrides {
    pub f_ref: Option<[f64; 2]>,
    pub preferences: Option<[f64; 2]>,
    pub th1: Option<f64>,
    pub th2: Option<f64>,
    pub theta: Option<f64>,
}

impl ObjectiveOverrides {
    pub fn apply(&self, mut spec: ObjectiveSpec) -> ObjectiveSpec {
        if let Some(r) = self.f_ref {
            spec.f_ref = r.to_vec();
        }
        if let Some(p) = self.preferences {
            spec.preferences = p.to_vec();
        }
        spec.th1 = self.th1.unwrap_or(spec.th1);
        spec.th2 = self.th2.unwrap_or(spec.th2);
        spec.theta = self.theta.unwrap_or(spec.theta);
        spec
    }
}

/// Optimizer settings shared by `optimize` and `bench`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchArgs {
    pub budget: usize,
    pub init_trials: usize,
    pub top_k: usize,
    pub relearn_every: usize,
    pub pool: usize,
    pub restarts: usize,
    pub objectives: ObjectiveOverrides,
}

impl Default for SearchArgs {
    fn default() -> Self {
        let c = ComparisonConfig::default();
        SearchArgs {
            budget: c.budget,
            init_trials: c.n_init,
            top_k: c.top_k,
            relearn_every: c.relearn_every,
            pool: c.pool,
            restarts: c.fit.restarts,
            objectives: ObjectiveOverrides::default(),
        }
    }
}

impl SearchArgs {
    fn validate(&self) -> std::result::Result<(), Failure> {
        if self.init_trials < 2 || self.budget < self.init_trials {
            return Err(usage(format!(
                "need budget >= init trials >= 2, got budget {} and {} init trials",
                self.budget, self.init_trials
            )));
        }
        if self.top_k == 0 || self.relearn_every == 0 || self.pool == 0 {
            return Err(usage(
                "top-k, relearn interval and pool size must be positive",
            ));
        }
        self.objectives
            .apply(default_objectives())
            .validate()
            .map_err(at("args"))
    }

    fn comparison(&self, n_obs: usize) -> ComparisonConfig {
        let base = ComparisonConfig::default();
        ComparisonConfig {
            budget: self.budget,
            n_init: self.init_trials,
            n_obs,
            top_k: self.top_k,
            relearn_every: self.relearn_every,
            pool: self.pool,
            fit: FitOptions {
                restarts: self.restarts,
                ..base.fit
            },
            ridge_folds: base.ridge_folds,
            ridge_alphas: DEFAULT_RIDGE_ALPHAS.to_vec(),
            objectives: self.objectives.apply(default_objectives()),
        }
    }
}

/// One optimization run against a benchmark target environment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizeArgs {
    pub level: u8,
    pub method: Method,
    /// Source observational data; required by `cure` and `ridge`.
    pub train_data: Option<PathBuf>,
    pub spec: Option<PathBuf>,
    /// A previously learned graph; `cure` learns one when absent.
    pub model: Option<PathBuf>,
    pub search: SearchArgs,
    pub seed: u64,
    pub out: PathBuf,
}

/// Every method on one transfer scenario for `repeats` consecutive seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchArgs {
    pub level: u8,
    pub methods: Vec<Method>,
    pub seed: u64,
    pub repeats: u64,
    pub observations: usize,
    pub search: SearchArgs,
    pub out: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Generate(GenerateArgs),
    Learn(LearnArgs),
    Rank(RankArgs),
    Optimize(OptimizeArgs),
    Bench(BenchArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Generate(_) => "generate",
            Command::Learn(_) => "learn",
            Command::Rank(_) => "rank",
            Command::Optimize(_) => "optimize",
            Command::Bench(_) => "bench",
        }
    }

    pub fn out(&self) -> &Path {
        match self {
            Command::Generate(a) => &a.out,
            Command::Learn(a) => &a.out,
            Command::Rank(a) => &a.out,
            Command::Optimize(a) => &a.out,
            Command::Bench(a) => &a.out,
        }
    }

    fn out_mut(&mut self) -> &mut PathBuf {
        match self {
            Command::Generate(a) => &mut a.out,
            Command::Learn(a) => &mut a.out,
            Command::Rank(a) => &mut a.out,
            Command::Optimize(a) => &mut a.out,
            Command::Bench(a) => &mut a.out,
        }
    }

    fn paths_mut(&mut self) -> Vec<&mut PathBuf> {
        match self {
            Command::Generate(a) => vec![&mut a.out],
            Command::Learn(a) => vec![&mut a.train_data, &mut a.spec, &mut a.out],
            Command::Rank(a) => vec![&mut a.model, &mut a.train_data, &mut a.spec, &mut a.out],
            Command::Optimize(a) => {
                let mut v: Vec<&mut PathBuf> = [&mut a.train_data, &mut a.spec, &mut a.model]
                    .into_iter()
                    .filter_map(Option::as_mut)
                    .collect();
                v.push(&mut a.out);
                v
            }
            Command::Bench(a) => vec![&mut a.out],
        }
    }

    /// Files the command reads.
    pub fn inputs(&self) -> Vec<&Path> {
        match self {
            Command::Generate(_) | Command::Bench(_) => vec![],
            Command::Learn(a) => vec![&a.train_data, &a.spec],
            Command::Rank(a) => vec![&a.model, &a.train_data, &a.spec],
            Command::Optimize(a) => [&a.train_data, &a.spec, &a.model]
                .into_iter()
                .filter_map(|p| p.as_deref())
                .collect(),
        }
    }

    pub fn seeds(&self) -> Vec<u64> {
        match self {
            Command::Generate(a) => vec![a.seed],
            Command::Learn(a) => vec![a.seed],
            Command::Rank(_) => vec![],
            Command::Optimize(a) => vec![a.seed],
            Command::Bench(a) => (a.seed..a.seed + a.repeats).collect(),
        }
    }

    /// Flag combinations that cannot work, rejected before any output.
    pub fn validate(&self) -> std::result::Result<(), Failure> {
        let level = |l: u8| {
            if l > 2 {
                Err(usage(format!("transfer level must be 0, 1 or 2, got {l}")))
            } else {
                Ok(())
            }
        };
        match self {
            Command::Generate(a) => {
                level(a.level)?;
                if a.rows == 0 {
                    return Err(usage("rows must be positive"));
                }
            }
            Command::Learn(a) => {
                if !(a.alpha > 0.0 && a.alpha < 1.0) {
                    return Err(usage(format!("alpha must be in (0, 1), got {}", a.alpha)));
                }
                if a.bins < 2 {
                    return Err(usage("bins must be at least 2"));
                }
            }
            Command::Rank(a) => {
                if a.top_k == 0 || a.bins == 0 || a.grid == 0 {
                    return Err(usage("top-k, bins and grid must be positive"));
                }
            }
            Command::Optimize(a) => {
                level(a.level)?;
                a.search.validate()?;
                match a.method {
                    Method::Mobo => {
                        if a.train_data.is_some() || a.spec.is_some() || a.model.is_some() {
                            return Err(usage("mobo searches the full space; it takes no train data, spec or model"));
                        }
                    }
                    Method::Cure | Method::Ridge => {
                        if a.train_data.is_none() || a.spec.is_none() {
                            return Err(usage(format!(
                                "{} needs --train-data and --spec",
                                a.method.id()
                            )));
                        }
                        if a.method == Method::Ridge && a.model.is_some() {
                            return Err(usage("ridge screening does not use a causal model"));
                        }
                    }
                }
            }
            Command::Bench(a) => {
                level(a.level)?;
                a.search.validate()?;
                if a.methods.is_empty() || a.repeats == 0 {
                    return Err(usage("need at least one method and one repeat"));
                }
                if a.observations < 50 {
                    return Err(usage("need at least 50 observations"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub sha256: String,
}

/// Everything needed to rerun a command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub started_unix: u64,
    pub argv: Vec<String>,
    pub seeds: Vec<u64>,
    pub inputs: Vec<InputDigest>,
    pub command: Command,
}

impl RunManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Validates, writes the manifest, then runs the command.
pub fn execute(cmd: &Command, argv: &[String]) -> std::result::Result<RunManifest, Failure> {
    cmd.validate()?;
    let mut cmd = cmd.clone();
    for p in cmd.paths_mut() {
        *p = std::path::absolute(&*p).map_err(|e| at("args")(Error::io(&*p, e)))?;
    }
    let inputs = cmd
        .inputs()
        .into_iter()
        .map(|p| {
            Ok(InputDigest {
                path: p.to_path_buf(),
                sha256: sha256_file(p)?,
            })
        })
        .collect::<Result<Vec<_>>>()
        .map_err(at("load"))?;
    let out = cmd.out().to_path_buf();
    fs::create_dir_all(&out).map_err(|e| at("write")(Error::io(&out, e)))?;
    let manifest = RunManifest {
        tool: "causaltune".into(),
        version: VERSION.into(),
        started_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
        argv: argv.to_vec(),
        seeds: cmd.seeds(),
        inputs,
        command: cmd.clone(),
    };
    write_json(&out.join(MANIFEST), &manifest).map_err(at("write"))?;
    match &cmd {
        Command::Generate(a) => generate(a),
        Command::Learn(a) => learn(a),
        Command::Rank(a) => rank(a),
        Command::Optimize(a) => optimize(a),
        Command::Bench(a) => bench(a),
    }?;
    Ok(manifest)
}

fn load_inputs(data: &Path, spec: &Path) -> std::result::Result<(ConfigSpace, Dataset), Failure> {
    let spec = SpecFile::load(spec).map_err(at("load"))?;
    let space = spec.space().map_err(at("load"))?;
    let ds = load_dataset(data, &space, &spec.roles).map_err(at("load"))?;
    Ok((space, ds))
}

fn generate(a: &GenerateArgs) -> std::result::Result<(), Failure> {
    let scenario = TransferScenario::new(a.level, a.seed).map_err(at("generate"))?;
    let ds = match a.side {
        Side::Source => {
            let cfg = ComparisonConfig {
                n_obs: a.rows,
                ..ComparisonConfig::default()
            };
            comparison_source(&scenario, a.seed, &cfg)
        }
        Side::Target => {
            generate_observational(&scenario.target, a.rows, seed::derive(a.seed, "target", 0))
        }
    }
    .map_err(at("generate"))?;
    let env = match a.side {
        Side::Source => &scenario.source,
        Side::Target => &scenario.target,
    };
    let roles = ds
        .columns()
        .iter()
        .map(|c| (c.name.clone(), c.role))
        .collect();
    SpecFile::from_space(env.space(), roles)
        .save(a.out.join("spec.json"))
        .map_err(at("write"))?;
    ds.write_csv(a.out.join("data.csv")).map_err(at("write"))
}

#[derive(Serialize)]
struct LearnReport<'a> {
    rows: usize,
    directed_edges: usize,
    bidirected_edges: usize,
    #[serde(flatten)]
    diagnostics: &'a crate::causal::LearnDiagnostics,
}

fn learn(a: &LearnArgs) -> std::result::Result<(), Failure> {
    let (_, ds) = load_inputs(&a.train_data, &a.spec)?;
    let mut cfg = LearnConfig {
        alpha: a.alpha,
        max_cond: a.max_cond,
        seed: seed::derive(a.seed, "learn", 0),
        ..LearnConfig::default()
    };
    cfg.entropic.bins = a.bins;
    let model = learn_causal_model(&ds, &StructuralConstraints::from_roles(&ds), &cfg)
        .map_err(at("learn"))?;
    model
        .admg
        .save(a.out.join("model.json"))
        .map_err(at("write"))?;
    let report = LearnReport {
        rows: ds.n_rows(),
        directed_edges: model.admg.directed_edges().count(),
        bidirected_edges: model.admg.bidirected_edges().count(),
        diagnostics: &model.diagnostics,
    };
    write_json(&a.out.join("diagnostics.json"), &report).map_err(at("write"))
}

/// Selected options with the pinned value of everything else.
#[derive(Debug, Serialize, Deserialize)]
pub struct ReducedSpaceFile {
    pub top_k: usize,
    pub targets: Vec<String>,
    pub selected: Vec<String>,
    pub pinned: std::collections::BTreeMap<String, String>,
    pub degenerate: bool,
}

fn default_targets(ds: &Dataset) -> Vec<String> {
    let mut t = ds.names_with_role(VariableRole::Objective);
    t.extend(ds.names_with_role(VariableRole::ConstraintMetric));
    t
}

fn rank(a: &RankArgs) -> std::result::Result<(), Failure> {
    let (space, ds) = load_inputs(&a.train_data, &a.spec)?;
    let g = Admg::load(&a.model).map_err(at("load"))?;
    if let Some(v) = g.vertices().iter().find(|v| ds.get(v).is_none()) {
        return Err(at("load")(Error::UnknownColumn(v.clone())));
    }
    let targets = if a.targets.is_empty() {
        default_targets(&ds)
    } else {
        a.targets.clone()
    };
    let cfg = EffectConfig {
        bins: a.bins,
        grid: a.grid,
        ..EffectConfig::default()
    };
    let table = AceTable::compute(&ds, &g, &space, &targets, &cfg).map_err(at("effects"))?;
    let red = rank_and_reduce(&table, a.top_k, &space).map_err(at("reduce"))?;
    table
        .write_wide_csv(a.out.join("ace.csv"))
        .map_err(at("write"))?;
    let file = ReducedSpaceFile {
        top_k: a.top_k,
        targets,
        selected: red.space.selected().to_vec(),
        pinned: red
            .space
            .pinned()
            .iter()
            .map(|(k, v)| {
                let o = space.option(k).expect("pinned options come from the space");
                (k.clone(), o.format_value(*v))
            })
            .collect(),
        degenerate: red.degenerate,
    };
    write_json(&a.out.join("reduced_space.json"), &file).map_err(at("write"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontPoint {
    pub iter: usize,
    pub objectives: Vec<f64>,
}

/// `summary.json` of an `optimize` run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizeSummary {
    pub method: Method,
    pub level: u8,
    pub budget: usize,
    pub n_init: usize,
    pub selected: Vec<String>,
    pub final_hv: f64,
    pub final_true_hv: f64,
    pub efficiency_literal: f64,
    pub efficiency_alt: f64,
    pub violations: usize,
    pub task_failures: usize,
    pub faults: usize,
    pub front: Vec<FrontPoint>,
}

fn optimize(a: &OptimizeArgs) -> std::result::Result<(), Failure> {
    let scenario = TransferScenario::new(a.level, a.seed).map_err(at("args"))?;
    let cfg = a.search.comparison(0);
    let source = match (&a.train_data, &a.spec) {
        (Some(d), Some(s)) => Some(load_inputs(d, s)?.1),
        _ => None,
    };
    let run = match (&a.model, &source) {
        (Some(model), Some(ds)) => {
            let g = Admg::load(model).map_err(at("load"))?;
            cure_with_model(&scenario, g, ds, a.seed, &cfg)?
        }
        _ => run_method(&scenario, a.method, source.as_ref(), a.seed, &cfg)
            .map_err(at("optimize"))?,
    };
    let space = scenario.target.space();
    run.log
        .write_csv(a.out.join("trials.csv"), space)
        .map_err(at("write"))?;
    if let Some(g) = &run.model {
        g.save(a.out.join("model.json")).map_err(at("write"))?;
    }
    if let Some(t) = &run.ace {
        t.write_wide_csv(a.out.join("ace.csv"))
            .map_err(at("write"))?;
    }
    let last = run.log.rows.last().map(|r| r.efficiency);
    let mut front: Vec<FrontPoint> = run
        .log
        .rows
        .iter()
        .filter(|r| !r.trial.failed)
        .filter(|r| {
            !run.log
                .rows
                .iter()
                .filter(|q| !q.trial.failed)
                .any(|q| crate::mobo::dominates(&q.trial.objectives, &r.trial.objectives))
        })
        .map(|r| FrontPoint {
            iter: r.trial.iter,
            objectives: r.trial.objectives.clone(),
        })
        .collect();
    front.sort_by(|x, y| {
        x.objectives[0]
            .total_cmp(&y.objectives[0])
            .then(x.iter.cmp(&y.iter))
    });
    let summary = OptimizeSummary {
        method: a.method,
        level: a.level,
        budget: cfg.budget,
        n_init: cfg.n_init,
        selected: run.selected.clone(),
        final_hv: run.final_hv(),
        final_true_hv: run.final_true_hv(),
        efficiency_literal: last.map_or(0.0, |e| e.literal),
        efficiency_alt: last.map_or(0.0, |e| e.weighted),
        violations: run.log.violations(),
        task_failures: run.log.task_failures(),
        faults: run.log.faults(&cfg.objectives.preferences),
        front,
    };
    write_json(&a.out.join("summary.json"), &summary).map_err(at("write"))
}

/// CURE with a supplied graph: effects on the source data, reduction, search.
fn cure_with_model(
    scenario: &TransferScenario,
    g: Admg,
    source: &Dataset,
    seed_: u64,
    cfg: &ComparisonConfig,
) -> std::result::Result<MethodRun, Failure> {
    let spec = &cfg.objectives;
    let space = scenario.target.space();
    let mut targets = spec.objectives.clone();
    targets.push(spec.constraint.clone());
    let ace = AceTable::compute(source, &g, space, &targets, &EffectConfig::default())
        .map_err(at("effects"))?;
    let red = rank_and_reduce(&ace, cfg.top_k, space).map_err(at("reduce"))?;
    let bo = BoConfig {
        n_init: cfg.n_init,
        budget: cfg.budget,
        relearn_every: cfg.relearn_every,
        pool: cfg.pool,
        fit: cfg.fit,
        seed: seed::derive(seed_, "bo", 0),
    };
    let run = run_bo(&scenario.target, &red.space, spec, &bo).map_err(at("optimize"))?;
    let true_hv = true_hv_series(&scenario.target, &run.log, &spec.f_ref);
    Ok(MethodRun {
        method: Method::Cure,
        seed: seed_,
        selected: red.space.selected().to_vec(),
        log: run.log,
        true_hv,
        model: Some(g),
        ace: Some(ace),
    })
}

fn bench(a: &BenchArgs) -> std::result::Result<(), Failure> {
    let scenario = TransferScenario::new(a.level, a.seed).map_err(at("args"))?;
    let seeds: Vec<u64> = (a.seed..a.seed + a.repeats).collect();
    let report = run_comparison(
        &scenario,
        &a.methods,
        &seeds,
        &a.search.comparison(a.observations),
    )
    .map_err(at("bench"))?;
    report.write(&a.out).map_err(at("write"))
}

/// Outcome of a replay: files compared against the original run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ReplayReport {
    pub identical: Vec<PathBuf>,
    pub differing: Vec<PathBuf>,
    pub missing: Vec<PathBuf>,
}

impl ReplayReport {
    pub fn is_identical(&self) -> bool {
        self.differing.is_empty() && self.missing.is_empty() && !self.identical.is_empty()
    }
}

fn list_files(root: &Path, rel: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let dir = root.join(rel);
    let mut entries = fs::read_dir(&dir)
        .map_err(|e| Error::io(&dir, e))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(|e| Error::io(&dir, e))?;
    entries.sort();
    for p in entries {
        let name = rel.join(p.file_name().expect("directory entries have names"));
        if p.is_dir() {
            list_files(root, &name, out)?;
        } else if name != Path::new(MANIFEST) {
            out.push(name);
        }
    }
    Ok(())
}

/// Reruns the manifest's command into `out` and compares every output file
/// with the original run. Inputs must be unchanged since the original run.
pub fn replay(
    manifest: &Path,
    out: &Path,
    argv: &[String],
) -> std::result::Result<ReplayReport, Failure> {
    let m = RunManifest::load(manifest).map_err(at("load"))?;
    for d in &m.inputs {
        if sha256_file(&d.path).map_err(at("load"))? != d.sha256 {
            return Err(at("load")(Error::Parse(format!(
                "input {} changed since the recorded run",
                d.path.display()
            ))));
        }
    }
    let original = m.command.out().to_path_buf();
    let out = std::path::absolute(out).map_err(|e| at("args")(Error::io(out, e)))?;
    if out == original {
        return Err(usage(
            "replay output directory must differ from the original",
        ));
    }
    let mut cmd = m.command.clone();
    *cmd.out_mut() = out.clone();
    execute(&cmd, argv)?;
    let mut files = Vec::new();
    list_files(&original, Path::new(""), &mut files).map_err(at("compare"))?;
    let mut report = ReplayReport::default();
    for f in files {
        let a = fs::read(original.join(&f))
            .map_err(|e| at("compare")(Error::io(original.join(&f), e)))?;
        match fs::read(out.join(&f)) {
            Ok(b) if a == b => report.identical.push(f),
            Ok(_) => report.differing.push(f),
            Err(_) => report.missing.push(f),
        }
    }
    Ok(report)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum AnySummary {
    Bench(Summary),
    Optimize(OptimizeSummary),
}

/// Text table of HV, efficiency, violations and failures per method for a
/// `bench` or `optimize` output directory.
pub fn render_report(dir: &Path) -> Result<String> {
    let p = dir.join("summary.json");
    if !p.is_file() {
        return Err(Error::Parse(format!(
            "{} has no summary.json; not a run directory",
            dir.display()
        )));
    }
    let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
    let summary: AnySummary =
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", p.display())))?;
    let mut s = String::new();
    let header = format!(
        "{:<8} {:>5} {:>10} {:>10} {:>9} {:>9} {:>10} {:>9} {:>9}\n",
        "method", "runs", "hv", "true_hv", "eff", "eff_alt", "violations", "failures", "selected"
    );
    match summary {
        AnySummary::Bench(b) => {
            s += &format!(
                "level {}  budget {}  init {}  seeds {:?}  (medians over seeds)\n",
                b.level, b.budget, b.n_init, b.seeds
            );
            s += &header;
            for m in &b.methods {
                s += &format!(
                    "{:<8} {:>5} {:>10.4} {:>10.4} {:>9.4} {:>9.4} {:>10.1} {:>9.1} {:>9.1}\n",
                    m.method.id(),
                    m.runs,
                    m.median_final_hv,
                    m.median_final_true_hv,
                    m.median_efficiency_literal,
                    m.median_efficiency_alt,
                    m.median_violations,
                    m.median_task_failures,
                    m.median_selected
                );
            }
            for h in &b.head_to_head {
                let n = h.cure_reach_true.len();
                let reached = h.cure_reach_true.iter().flatten().count();
                s += &format!(
                    "cure vs {}: hv >= in {}/{n}, true hv >= in {}/{n}, true hv > in {}/{n}, reaches its final true hv in {reached}/{n}\n",
                    h.baseline.id(),
                    h.cure_at_least,
                    h.cure_at_least_true,
                    h.cure_strictly_true
                );
            }
        }
        AnySummary::Optimize(o) => {
            s += &format!(
                "level {}  budget {}  init {}\n",
                o.level, o.budget, o.n_init
            );
            s += &header;
            s += &format!(
                "{:<8} {:>5} {:>10.4} {:>10.4} {:>9.4} {:>9.4} {:>10} {:>9} {:>9}\n",
                o.method.id(),
                1,
                o.final_hv,
                o.final_true_hv,
                o.efficiency_literal,
                o.efficiency_alt,
                o.violations,
                o.task_failures,
                o.selected.len()
            );
            s += &format!("pareto front: {} points\n", o.front.len());
        }
    }
    Ok(s)
}
