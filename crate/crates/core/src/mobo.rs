//! Multi-objective Bayesian optimization with a safety constraint.
//!
//! Objectives are minimized. The acquisition is exact two-objective expected
//! hypervolume improvement weighted by the probability that the constraint
//! metric stays above the hard threshold.

use std::fmt;
use std::path::Path;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal as Gaussian};

use crate::causal::{learn_causal_model, LearnConfig, LearnedModel, StructuralConstraints};
use crate::data::Dataset;
use crate::effects::{rank_and_reduce, AceTable, EffectConfig, Reduction};
use crate::error::{Error, Result};
use crate::gp::{Encoder, FitOptions, Surrogate};
use crate::space::{ConfigSpace, Configuration, OptionKind, ReducedSpace};
use crate::{par, seed};

/// `a` dominates `b`: no worse anywhere, strictly better somewhere.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y) && a.iter().zip(b).any(|(x, y)| x < y)
}

/// Indices of the nondominated points; among equal points the first is kept.
pub fn pareto_indices(points: &[Vec<f64>]) -> Vec<usize> {
    (0..points.len())
        .filter(|&i| {
            !points
                .iter()
                .enumerate()
                .any(|(j, q)| dominates(q, &points[i]) || (j < i && q == &points[i]))
        })
        .collect()
}

pub fn pareto_front(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    pareto_indices(points)
        .into_iter()
        .map(|i| points[i].clone())
        .collect()
}

/// Hypervolume dominated by `front` and bounded by `f_ref`, plus the number of
/// points dropped for not lying strictly inside the reference box.
pub fn hypervolume_clipped(front: &[Vec<f64>], f_ref: &[f64]) -> (f64, usize) {
    let inside: Vec<Vec<f64>> = front
        .iter()
        .filter(|p| p.len() == f_ref.len() && p.iter().zip(f_ref).all(|(a, r)| a < r))
        .cloned()
        .collect();
    let dropped = front.len() - inside.len();
    (hv_recursive(pareto_front(&inside), f_ref), dropped)
}

pub fn hypervolume(front: &[Vec<f64>], f_ref: &[f64]) -> f64 {
    hypervolume_clipped(front, f_ref).0
}

fn hv_recursive(mut pts: Vec<Vec<f64>>, r: &[f64]) -> f64 {
    if pts.is_empty() {
        return 0.0;
    }
    match r.len() {
        1 => r[0] - pts.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min),
        2 => {
            pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
            let mut area = 0.0;
            let mut ceiling = r[1];
            for p in &pts {
                if p[1] < ceiling {
                    area += (r[0] - p[0]) * (ceiling - p[1]);
                    ceiling = p[1];
                }
            }
            area
        }
        m => {
            // Slice along the last objective.
            pts.sort_by(|a, b| a[m - 1].total_cmp(&b[m - 1]));
            let mut vol = 0.0;
            for i in 0..pts.len() {
                let upper = if i + 1 < pts.len() {
                    pts[i + 1][m - 1]
                } else {
                    r[m - 1]
                };
                let depth = upper - pts[i][m - 1];
                if depth > 0.0 {
                    let slice: Vec<Vec<f64>> =
                        pts[..=i].iter().map(|p| p[..m - 1].to_vec()).collect();
                    vol += depth * hv_recursive(pareto_front(&slice), &r[..m - 1]);
                }
            }
            vol
        }
    }
}

/// Safety penalty: 0 above the soft threshold, 1 at or below the hard one,
/// linear in between.
pub fn penalty(h: f64, th1: f64, th2: f64) -> f64 {
    if h >= th1 {
        0.0
    } else if h <= th2 {
        1.0
    } else {
        (th1 - h) / (th1 - th2)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SafetyCheck {
    pub satisfied: bool,
    pub margin: f64,
}

/// Task-completion rate minus the mean penalty, compared with `theta`.
pub fn safety_satisfied(tcr: f64, penalties: &[f64], theta: f64) -> Result<SafetyCheck> {
    if penalties.is_empty() {
        return Err(Error::InvalidArgument(
            "safety check needs at least one penalty".into(),
        ));
    }
    let margin = tcr - penalties.iter().sum::<f64>() / penalties.len() as f64;
    Ok(SafetyCheck {
        satisfied: margin >= theta,
        margin,
    })
}

fn std_normal() -> Gaussian {
    Gaussian::standard()
}

/// `E[(c - Y)^+]` for `Y ~ N(mu, sd^2)`.
fn expected_shortfall(c: f64, mu: f64, sd: f64, n: &Gaussian) -> f64 {
    if c == f64::NEG_INFINITY {
        return 0.0;
    }
    if sd <= 0.0 {
        return (c - mu).max(0.0);
    }
    let z = (c - mu) / sd;
    ((c - mu) * n.cdf(z) + sd * n.pdf(z)).max(0.0)
}

/// Exact expected hypervolume improvement for two objectives with independent
/// Gaussian predictions.
///
/// The region not dominated by the sorted front splits into vertical strips
/// `[a_i, a_{i+1})` with ceiling `b_i`. The improvement of a point `y` is
/// `Σ_i |[a_i, a_{i+1}) ∩ [y1, ∞)| · (b_i − y2)^+`, and each factor has a
/// closed-form expectation.
pub fn ehvi(mean: &[f64], sd: &[f64], front: &[Vec<f64>], f_ref: &[f64]) -> Result<f64> {
    if mean.len() != 2 || sd.len() != 2 || f_ref.len() != 2 {
        return Err(Error::InvalidArgument(format!(
            "EHVI supports exactly 2 objectives, got {}",
            mean.len()
        )));
    }
    if sd.iter().any(|s| *s < 0.0 || !s.is_finite()) {
        return Err(Error::InvalidArgument(
            "standard deviations must be finite and >= 0".into(),
        ));
    }
    let inside: Vec<Vec<f64>> = front
        .iter()
        .filter(|p| p[0] < f_ref[0] && p[1] < f_ref[1])
        .cloned()
        .collect();
    let mut pts = pareto_front(&inside);
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]));
    let n = std_normal();
    let psi1 = |c: f64| expected_shortfall(c, mean[0], sd[0], &n);
    let psi2 = |c: f64| expected_shortfall(c, mean[1], sd[1], &n);
    let mut total = 0.0;
    let mut lower = f64::NEG_INFINITY;
    let mut ceiling = f_ref[1];
    for p in pts
        .iter()
        .map(|p| (p[0], p[1]))
        .chain(std::iter::once((f_ref[0], f64::NAN)))
    {
        let width = psi1(p.0) - psi1(lower);
        if width > 0.0 {
            total += width * psi2(ceiling);
        }
        lower = p.0;
        ceiling = p.1;
    }
    Ok(total.max(0.0))
}

/// Objectives, reference point and safety thresholds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveSpec {
    pub objectives: Vec<String>,
    /// Per-objective limits used by the fault predicate.
    pub preferences: Vec<f64>,
    pub f_ref: Vec<f64>,
    /// Name of the constraint metric `h` (larger is safer).
    pub constraint: String,
    pub th1: f64,
    pub th2: f64,
    pub theta: f64,
}

impl ObjectiveSpec {
    /// Energy / positional-error preset with the artifact's defaults.
    pub fn robot_defaults(objectives: [&str; 2], constraint: &str) -> Self {
        ObjectiveSpec {
            objectives: objectives.iter().map(|s| s.to_string()).collect(),
            preferences: vec![40.0, 0.18],
            f_ref: vec![400.0, 15.0],
            constraint: constraint.to_string(),
            th1: 0.25,
            th2: 0.18,
            theta: 0.8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.objectives.len();
        if m == 0 || self.f_ref.len() != m || self.preferences.len() != m {
            return Err(Error::InvalidArgument(
                "objective names, preferences and reference point must have equal length".into(),
            ));
        }
        if self.th2 >= self.th1 {
            return Err(Error::InvalidArgument(format!(
                "hard threshold {} must be below soft threshold {}",
                self.th2, self.th1
            )));
        }
        Ok(())
    }
}

/// Result of one evaluation of the system under test.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub objectives: Vec<f64>,
    pub h: f64,
    pub success: bool,
}

/// The system being tuned. Must be deterministic given `(config, trial_seed)`.
pub trait Evaluator: Sync {
    fn evaluate(&self, c: &Configuration, trial_seed: u64) -> Result<Outcome>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Init,
    Bo,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Init => "init",
            Phase::Bo => "bo",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trial {
    pub iter: usize,
    pub phase: Phase,
    pub config: Configuration,
    pub objectives: Vec<f64>,
    pub h: f64,
    pub success: bool,
    pub alpha: f64,
    /// The evaluator returned an error; objectives were imputed at `f_ref`.
    pub failed: bool,
}

/// True iff some objective exceeds its limit.
pub fn fault_predicate(trial: &Trial, limits: &[f64]) -> bool {
    trial.objectives.iter().zip(limits).any(|(v, l)| v > l)
}

/// Every trial plus the indices of the current nondominated set.
#[derive(Clone, Debug, Default)]
pub struct ParetoArchive {
    trials: Vec<Trial>,
    front: Vec<usize>,
}

impl ParetoArchive {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a trial; failed evaluations never enter the front.
    pub fn insert(&mut self, t: Trial) {
        let idx = self.trials.len();
        if !t.failed {
            let dominated = self.front.iter().any(|&j| {
                let q = &self.trials[j].objectives;
                dominates(q, &t.objectives) || q == &t.objectives
            });
            if !dominated {
                let objs = t.objectives.clone();
                self.front
                    .retain(|&j| !dominates(&objs, &self.trials[j].objectives));
                self.front.push(idx);
            }
        }
        self.trials.push(t);
    }

    pub fn trials(&self) -> &[Trial] {
        &self.trials
    }

    pub fn front_indices(&self) -> &[usize] {
        &self.front
    }

    pub fn front(&self) -> Vec<&Trial> {
        self.front.iter().map(|&i| &self.trials[i]).collect()
    }

    pub fn front_points(&self) -> Vec<Vec<f64>> {
        self.front
            .iter()
            .map(|&i| self.trials[i].objectives.clone())
            .collect()
    }

    pub fn hypervolume(&self, f_ref: &[f64]) -> f64 {
        hypervolume(&self.front_points(), f_ref)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Efficiency {
    /// Successes divided by `Σ k`.
    pub literal: f64,
    /// `Σ k · success_k` divided by `Σ k`.
    pub weighted: f64,
}

pub fn efficiency(successes: &[bool]) -> Result<Efficiency> {
    let n = successes.len();
    if n == 0 {
        return Err(Error::InvalidArgument(
            "efficiency needs at least one trial".into(),
        ));
    }
    let denom = (n * (n + 1) / 2) as f64;
    let count = successes.iter().filter(|s| **s).count() as f64;
    let weighted: usize = successes
        .iter()
        .enumerate()
        .filter(|(_, s)| **s)
        .map(|(k, _)| k + 1)
        .sum();
    Ok(Efficiency {
        literal: count / denom,
        weighted: weighted as f64 / denom,
    })
}

/// One row of a trial log.
#[derive(Clone, Debug, PartialEq)]
pub struct LogRow {
    pub trial: Trial,
    pub hv: f64,
    pub efficiency: Efficiency,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialLog {
    pub objectives: Vec<String>,
    pub rows: Vec<LogRow>,
}

impl TrialLog {
    pub fn hv_series(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.hv).collect()
    }

    pub fn final_hv(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.hv)
    }

    /// Successful trials that still violated the soft threshold.
    pub fn violations(&self) -> usize {
        self.rows
            .iter()
            .filter(|r| r.trial.success && r.trial.alpha > 0.0)
            .count()
    }

    pub fn task_failures(&self) -> usize {
        self.rows.iter().filter(|r| !r.trial.success).count()
    }

    pub fn faults(&self, limits: &[f64]) -> usize {
        self.rows
            .iter()
            .filter(|r| fault_predicate(&r.trial, limits))
            .count()
    }

    /// First trial count at which the HV reaches `target`.
    pub fn trials_to_reach(&self, target: f64) -> Option<usize> {
        self.rows.iter().position(|r| r.hv >= target).map(|i| i + 1)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>, space: &ConfigSpace) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(Error::from)?;
        let mut header = vec!["iter".to_string(), "phase".to_string()];
        header.extend(space.names().map(str::to_string));
        header.extend(self.objectives.iter().cloned());
        header.extend(
            [
                "h",
                "alpha",
                "success",
                "hv",
                "efficiency_literal",
                "efficiency_alt",
            ]
            .iter()
            .map(|s| s.to_string()),
        );
        w.write_record(&header)?;
        for r in &self.rows {
            let t = &r.trial;
            let mut rec = vec![t.iter.to_string(), t.phase.to_string()];
            for o in space.options() {
                let v = t.config.get(o.name()).unwrap_or(o.default_value());
                rec.push(o.format_value(v));
            }
            rec.extend(t.objectives.iter().map(|v| format!("{v}")));
            rec.push(format!("{}", t.h));
            rec.push(format!("{}", t.alpha));
            rec.push(if t.success { "1" } else { "0" }.to_string());
            rec.push(format!("{}", r.hv));
            rec.push(format!("{}", r.efficiency.literal));
            rec.push(format!("{}", r.efficiency.weighted));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoConfig {
    pub n_init: usize,
    /// Total number of evaluations, initial design included.
    pub budget: usize,
    /// Hyperparameters are refitted every this many BO iterations.
    pub relearn_every: usize,
    pub pool: usize,
    pub fit: FitOptions,
    pub seed: u64,
}

impl Default for BoConfig {
    fn default() -> Self {
        BoConfig {
            n_init: 15,
            budget: 200,
            relearn_every: 10,
            pool: 1000,
            fit: FitOptions::default(),
            seed: 0,
        }
    }
}

/// Fitted surrogates: one per objective plus the constraint metric.
pub struct Models {
    pub objectives: Vec<Surrogate>,
    pub constraint: Surrogate,
}

fn perturb(space: &ReducedSpace, c: &Configuration, rng: &mut seed::Rng) -> Configuration {
    let mut out = c.clone();
    let noise = Normal::new(0.0, 0.1).expect("valid sd");
    for o in space.selected_options() {
        let v = c.get(o.name()).unwrap_or(o.default_value());
        match o.kind() {
            OptionKind::Continuous | OptionKind::Integer => {
                let u = (o.to_unit(v) + noise.sample(rng)).clamp(0.0, 1.0);
                out.set(o.name(), o.from_unit(u));
            }
            OptionKind::Boolean | OptionKind::Categorical => {
                if rng.random::<f64>() < 0.2 {
                    out.set(o.name(), o.sample(rng));
                }
            }
        }
    }
    out
}

/// Candidate pool: `pool` uniform samples followed by one perturbation of each
/// front configuration.
pub fn candidate_pool(
    space: &ReducedSpace,
    front: &[&Configuration],
    pool: usize,
    rng: &mut seed::Rng,
) -> Vec<Configuration> {
    let mut cands = space.sample(pool, rng);
    for c in front {
        cands.push(perturb(space, c, rng));
    }
    cands
}

/// Acquisition value of a candidate: EHVI times the probability that the
/// constraint metric clears the hard threshold.
pub fn acquisition(
    models: &Models,
    c: &Configuration,
    front: &[Vec<f64>],
    spec: &ObjectiveSpec,
) -> Result<f64> {
    let (mut mean, mut sd) = (Vec::new(), Vec::new());
    for m in &models.objectives {
        let (mu, s) = m.predict(c);
        mean.push(mu);
        sd.push(s);
    }
    let e = ehvi(&mean, &sd, front, &spec.f_ref)?;
    let (mh, sh) = models.constraint.predict(c);
    let feas = if sh > 0.0 {
        std_normal().cdf((mh - spec.th2) / sh)
    } else if mh > spec.th2 {
        1.0
    } else {
        0.0
    };
    Ok(e * feas)
}

/// Highest-scoring candidate; ties go to the first.
pub fn propose_next(
    models: &Models,
    space: &ReducedSpace,
    archive: &ParetoArchive,
    spec: &ObjectiveSpec,
    pool: usize,
    rng: &mut seed::Rng,
) -> Result<Configuration> {
    if pool == 0 {
        return Err(Error::InvalidArgument(
            "candidate pool must be at least 1".into(),
        ));
    }
    let front_cfgs: Vec<&Configuration> = archive.front().into_iter().map(|t| &t.config).collect();
    let cands = candidate_pool(space, &front_cfgs, pool, rng);
    let front = archive.front_points();
    let scores = par::map(&cands, |c| acquisition(models, c, &front, spec));
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (i, s) in scores.into_iter().enumerate() {
        let s = s?;
        if s > best_score {
            best = i;
            best_score = s;
        }
    }
    Ok(cands.into_iter().nth(best).expect("pool is nonempty"))
}

fn fit_models(
    space: &ReducedSpace,
    archive: &ParetoArchive,
    spec: &ObjectiveSpec,
    prev: Option<&Models>,
    relearn: bool,
    opts: &FitOptions,
) -> Result<Models> {
    let encoder = Encoder::new(space);
    let configs: Vec<Configuration> = archive.trials().iter().map(|t| t.config.clone()).collect();
    let m = spec.objectives.len();
    let mut targets: Vec<Vec<f64>> = (0..m)
        .map(|j| archive.trials().iter().map(|t| t.objectives[j]).collect())
        .collect();
    targets.push(archive.trials().iter().map(|t| t.h).collect());
    let prev_list: Vec<Option<&Surrogate>> = match prev {
        Some(p) => p
            .objectives
            .iter()
            .chain(std::iter::once(&p.constraint))
            .map(Some)
            .collect(),
        None => vec![None; m + 1],
    };
    let idx: Vec<usize> = (0..=m).collect();
    let fitted = par::map(&idx, |&j| {
        let fopts = FitOptions {
            seed: seed::derive(opts.seed, "surrogate", j as u64),
            ..*opts
        };
        match (relearn, prev_list[j]) {
            (false, Some(p)) => p.update(&configs, &targets[j]),
            (_, p) => Surrogate::fit(&encoder, &configs, &targets[j], p, &fopts),
        }
    });
    let mut fitted = fitted.into_iter().collect::<Result<Vec<_>>>()?;
    let constraint = fitted.pop().expect("constraint surrogate present");
    Ok(Models {
        objectives: fitted,
        constraint,
    })
}

#[derive(Clone, Debug)]
pub struct BoRun {
    pub log: TrialLog,
    pub archive: ParetoArchive,
    /// Surrogate fits that fell back to their initial hyperparameters.
    pub fit_warnings: usize,
}

fn evaluate_trial(
    evaluator: &dyn Evaluator,
    c: Configuration,
    iter: usize,
    phase: Phase,
    spec: &ObjectiveSpec,
    seed_: u64,
) -> Trial {
    let trial_seed = seed::derive(seed_, "trial", iter as u64);
    let (objectives, h, success, failed) = match evaluator.evaluate(&c, trial_seed) {
        Ok(o)
            if o.objectives.len() == spec.objectives.len()
                && o.objectives.iter().all(|v| v.is_finite())
                && o.h.is_finite() =>
        {
            (o.objectives, o.h, o.success, false)
        }
        _ => (spec.f_ref.clone(), spec.th2, false, true),
    };
    Trial {
        iter,
        phase,
        config: c,
        objectives,
        alpha: penalty(h, spec.th1, spec.th2),
        h,
        success,
        failed,
    }
}

/// The optimization loop: an initial random design, then one proposal per
/// iteration until `budget` evaluations are spent.
pub fn run_bo(
    evaluator: &dyn Evaluator,
    space: &ReducedSpace,
    spec: &ObjectiveSpec,
    cfg: &BoConfig,
) -> Result<BoRun> {
    spec.validate()?;
    if spec.objectives.len() != 2 {
        return Err(Error::InvalidArgument(format!(
            "the optimizer supports exactly 2 objectives, got {}",
            spec.objectives.len()
        )));
    }
    if cfg.n_init < 2 || cfg.budget < cfg.n_init {
        return Err(Error::InvalidArgument(format!(
            "need budget >= n_init >= 2, got budget {} and n_init {}",
            cfg.budget, cfg.n_init
        )));
    }
    if cfg.relearn_every == 0 || cfg.pool == 0 {
        return Err(Error::InvalidArgument(
            "relearn interval and pool size must be positive".into(),
        ));
    }
    let mut archive = ParetoArchive::new();
    let mut rows = Vec::with_capacity(cfg.budget);
    let mut successes = Vec::with_capacity(cfg.budget);
    let mut record =
        |archive: &mut ParetoArchive, t: Trial, rows: &mut Vec<LogRow>| -> Result<()> {
            successes.push(t.success);
            archive.insert(t.clone());
            rows.push(LogRow {
                trial: t,
                hv: archive.hypervolume(&spec.f_ref),
                efficiency: efficiency(&successes)?,
            });
            Ok(())
        };
    let mut init_rng = seed::stream(cfg.seed, "bo-init", 0);
    for (i, c) in space
        .sample(cfg.n_init, &mut init_rng)
        .into_iter()
        .enumerate()
    {
        let t = evaluate_trial(evaluator, c, i, Phase::Init, spec, cfg.seed);
        record(&mut archive, t, &mut rows)?;
    }
    let mut models: Option<Models> = None;
    let mut warnings = 0;
    for t in cfg.n_init..cfg.budget {
        let relearn = models.is_none() || (t - cfg.n_init).is_multiple_of(cfg.relearn_every);
        let fit = FitOptions {
            seed: seed::derive(cfg.seed, "hyper", t as u64),
            ..cfg.fit
        };
        let m = fit_models(space, &archive, spec, models.as_ref(), relearn, &fit)?;
        if relearn {
            warnings += m
                .objectives
                .iter()
                .chain(std::iter::once(&m.constraint))
                .filter(|s| s.model().warning)
                .count();
        }
        let mut rng = seed::stream(cfg.seed, "bo-propose", t as u64);
        let c = propose_next(&m, space, &archive, spec, cfg.pool, &mut rng)?;
        models = Some(m);
        let trial = evaluate_trial(evaluator, c, t, Phase::Bo, spec, cfg.seed);
        record(&mut archive, trial, &mut rows)?;
    }
    Ok(BoRun {
        log: TrialLog {
            objectives: spec.objectives.clone(),
            rows,
        },
        archive,
        fit_warnings: warnings,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CureConfig {
    /// Options kept per target.
    pub top_k: usize,
    pub learn: LearnConfig,
    pub effects: EffectConfig,
    pub bo: BoConfig,
}

impl Default for CureConfig {
    fn default() -> Self {
        CureConfig {
            top_k: 5,
            learn: LearnConfig::default(),
            effects: EffectConfig::default(),
            bo: BoConfig::default(),
        }
    }
}

pub struct CureRun {
    pub model: LearnedModel,
    pub ace: AceTable,
    pub reduction: Reduction,
    pub run: BoRun,
}

/// Learns a causal model on `source`, keeps the options with the largest
/// effects on the objectives and the constraint metric, and optimizes the
/// target system over that reduced space.
pub fn run_cure(
    source: &Dataset,
    evaluator: &dyn Evaluator,
    space: &ConfigSpace,
    spec: &ObjectiveSpec,
    cfg: &CureConfig,
) -> Result<CureRun> {
    spec.validate()?;
    let constraints = StructuralConstraints::from_roles(source);
    let model = learn_causal_model(source, &constraints, &cfg.learn)?;
    let mut targets = spec.objectives.clone();
    targets.push(spec.constraint.clone());
    let ace = AceTable::compute(source, &model.admg, space, &targets, &cfg.effects)?;
    let reduction = rank_and_reduce(&ace, cfg.top_k, space)?;
    let run = run_bo(evaluator, &reduction.space, spec, &cfg.bo)?;
    Ok(CureRun {
        model,
        ace,
        reduction,
        run,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(p: &[(f64, f64)]) -> Vec<Vec<f64>> {
        p.iter().map(|&(a, b)| vec![a, b]).collect()
    }

    #[test]
    fn front_basics() {
        assert_eq!(pareto_front(&v(&[(1.0, 1.0)])), v(&[(1.0, 1.0)]));
        assert_eq!(
            pareto_front(&v(&[(1.0, 2.0), (2.0, 1.0), (2.0, 2.0)])),
            v(&[(1.0, 2.0), (2.0, 1.0)])
        );
        assert_eq!(
            pareto_front(&v(&[(3.0, 3.0), (3.0, 3.0), (3.0, 3.0)])).len(),
            1
        );
    }

    #[test]
    fn hv_fixtures() {
        assert_eq!(hypervolume(&v(&[(1.0, 1.0)]), &[2.0, 2.0]), 1.0);
        assert_eq!(
            hypervolume(&v(&[(1.0, 3.0), (2.0, 2.0), (3.0, 1.0)]), &[4.0, 4.0]),
            6.0
        );
        assert_eq!(hypervolume(&[], &[4.0, 4.0]), 0.0);
        let (hv, dropped) = hypervolume_clipped(&v(&[(1.0, 1.0), (5.0, 0.0)]), &[2.0, 2.0]);
        assert_eq!((hv, dropped), (1.0, 1));
        // Three objectives: unit cube corner plus a slab.
        let cube = hypervolume(&[vec![1.0, 1.0, 1.0]], &[2.0, 2.0, 2.0]);
        assert_eq!(cube, 1.0);
    }

    #[test]
    fn penalty_fixtures() {
        assert_eq!(penalty(0.30, 0.25, 0.18), 0.0);
        assert_eq!(penalty(0.18, 0.25, 0.18), 1.0);
        assert!((penalty(0.215, 0.25, 0.18) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn safety_fixtures() {
        let a = safety_satisfied(1.0, &[0.0, 0.0], 0.8).unwrap();
        assert!(a.satisfied && a.margin == 1.0);
        let b = safety_satisfied(0.9, &[0.1, 0.3], 0.8).unwrap();
        assert!(!b.satisfied && (b.margin - 0.7).abs() < 1e-12);
    }

    #[test]
    fn efficiency_fixtures() {
        let e = efficiency(&[true, true, true]).unwrap();
        assert_eq!(e.literal, 0.5);
        let z = efficiency(&[false, false]).unwrap();
        assert_eq!((z.literal, z.weighted), (0.0, 0.0));
        let f = efficiency(&[false, false, true, true]).unwrap();
        assert!((f.literal - 0.2).abs() < 1e-15 && (f.weighted - 0.7).abs() < 1e-15);
    }

    #[test]
    fn ehvi_degenerate_cases() {
        let front = v(&[(1.0, 3.0), (2.0, 2.0), (3.0, 1.0)]);
        let r = [4.0, 4.0];
        assert_eq!(ehvi(&[2.5, 2.5], &[0.0, 0.0], &front, &r).unwrap(), 0.0);
        let gain = ehvi(&[1.5, 1.5], &[0.0, 0.0], &front, &r).unwrap();
        let mut with = front.clone();
        with.push(vec![1.5, 1.5]);
        assert!((gain - (hypervolume(&with, &r) - 6.0)).abs() < 1e-12);
        assert!(ehvi(&[1.0, 1.0, 1.0], &[1.0; 3], &front, &[4.0; 3]).is_err());
    }

    #[test]
    fn fault_predicate_is_a_disjunction() {
        let t = Trial {
            iter: 0,
            phase: Phase::Init,
            config: Configuration::new(),
            objectives: vec![50.0, 0.1],
            h: 1.0,
            success: true,
            alpha: 0.0,
            failed: false,
        };
        assert!(fault_predicate(&t, &[40.0, 0.18]));
        assert!(!fault_predicate(&t, &[60.0, 0.18]));
    }
}
