//! Synthetic robot-navigation benchmark with known causal structure.
//!
//! Twelve options, six of which drive two intermediate metrics (`cpu_load`,
//! `speed`) that in turn drive energy, pose error and obstacle distance. The
//! other six are decoys that appear in no equation. An unobserved terrain factor
//! raises cpu load and slows the robot, confounding the two metrics.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::causal::Admg;
use crate::data::{mean_sd, Column, ColumnData, Dataset, VariableRole};
use crate::effects::AceTable;
use crate::error::{Error, Result};
use crate::gp::FitOptions;
use crate::mobo::{
    hypervolume, pareto_front, run_bo, run_cure, BoConfig, CureConfig, Evaluator, ObjectiveSpec,
    Outcome, TrialLog,
};
use crate::space::{
    sample_uniform, ConfigSpace, Configuration, OptionDef, OptionKind, ReducedSpace,
};
use crate::{par, seed};

pub const CPU_LOAD: &str = "cpu_load";
pub const SPEED: &str = "speed";
pub const ENERGY: &str = "energy";
pub const POSE_ERROR: &str = "pose_error";
pub const OBSTACLE_DISTANCE: &str = "obstacle_distance";
pub const TASK_SUCCESS: &str = "task_success";

pub const CAUSAL_OPTIONS: [&str; 6] = [
    "scaling_speed",
    "min_vel_x",
    "controller_frequency",
    "sim_time",
    "vx_samples",
    "planner",
];
pub const DECOY_OPTIONS: [&str; 6] = [
    "trans_stopped_vel",
    "theta_stopped_vel",
    "max_scaling_factor",
    "sim_granularity",
    "vy_samples",
    "recovery_behavior",
];

/// Default assignment of numeric options to equation slots:
/// A and B (a curved cpu valley along A whose floor moves with B), C (cpu and
/// pose), D and E (speed).
const DEFAULT_SLOTS: [&str; 5] = [
    "controller_frequency",
    "vx_samples",
    "sim_time",
    "scaling_speed",
    "min_vel_x",
];
const PLANNER: &str = "planner";
/// Unit-scale floor of the cpu valley along slot A when slot B is at zero.
const VALLEY_OFFSET: f64 = 0.15;
/// Unit-scale half-width of the valley.
const VALLEY_WIDTH: f64 = 0.12;

// Nominal ranges used to scale noise.
const RANGE_CPU: f64 = 180.0;
const RANGE_SPEED: f64 = 2.2;
const RANGE_ENERGY: f64 = 200.0;
const RANGE_POSE: f64 = 0.5;
const RANGE_H: f64 = 0.35;

pub fn default_space() -> ConfigSpace {
    let o = |r: Result<OptionDef>| r.expect("static option definitions are valid");
    ConfigSpace::new(vec![
        o(OptionDef::continuous("scaling_speed", 0.1, 1.0, 0.55)),
        o(OptionDef::continuous("min_vel_x", 0.0, 0.5, 0.25)),
        o(OptionDef::continuous(
            "controller_frequency",
            5.0,
            30.0,
            27.5,
        )),
        o(OptionDef::continuous("sim_time", 0.5, 4.0, 2.25)),
        o(OptionDef::integer("vx_samples", 3, 20, 3)),
        o(OptionDef::categorical(
            PLANNER,
            &["navfn", "global_planner", "carrot"],
            1,
        )),
        o(OptionDef::continuous("trans_stopped_vel", 0.01, 0.2, 0.1)),
        o(OptionDef::continuous("theta_stopped_vel", 0.01, 0.2, 0.1)),
        o(OptionDef::continuous("max_scaling_factor", 0.1, 0.5, 0.3)),
        o(OptionDef::continuous("sim_granularity", 0.01, 0.1, 0.05)),
        o(OptionDef::integer("vy_samples", 0, 10, 5)),
        o(OptionDef::categorical(
            "recovery_behavior",
            &["rotate", "clear", "none"],
            0,
        )),
    ])
    .expect("option names are unique")
}

/// Objectives, reference point and thresholds in benchmark units.
pub fn default_objectives() -> ObjectiveSpec {
    ObjectiveSpec {
        objectives: vec![ENERGY.into(), POSE_ERROR.into()],
        preferences: vec![70.0, 0.3],
        f_ref: vec![100.0, 0.5],
        constraint: OBSTACLE_DISTANCE.into(),
        th1: 0.25,
        th2: 0.18,
        theta: 0.8,
    }
}

/// Coefficients of the structural equations.
#[derive(Clone, Debug, PartialEq)]
struct Coefs {
    cpu_valley_depth: f64,
    cpu_b: f64,
    cpu_valley_slope: f64,
    cpu_c: f64,
    cpu_latent: f64,
    speed_d: f64,
    speed_e: f64,
    speed_de: f64,
    speed_planner: [f64; 3],
    speed_latent: f64,
    energy_cpu: f64,
    energy_speed: f64,
    pose_speed: f64,
    pose_c: f64,
    h_speed: f64,
    h_planner: [f64; 3],
    success_h: f64,
    success_energy: f64,
}

impl Default for Coefs {
    fn default() -> Self {
        Coefs {
            cpu_valley_depth: 80.0,
            cpu_b: 45.0,
            cpu_valley_slope: 0.5,
            cpu_c: 40.0,
            cpu_latent: 8.0,
            speed_d: 0.8,
            speed_e: 0.6,
            speed_de: 0.3,
            speed_planner: [0.0, 0.25, 0.5],
            speed_latent: -0.12,
            energy_cpu: 0.5,
            energy_speed: 45.0,
            pose_speed: 0.15,
            pose_c: 0.25,
            h_speed: 0.09,
            h_planner: [0.08, 0.04, 0.0],
            success_h: 50.0,
            success_energy: 0.02,
        }
    }
}

impl Coefs {
    fn scaled(&self, rng: &mut seed::Rng) -> Self {
        let mut f = || rng.random_range(0.7..1.3);
        let mut arr = |a: [f64; 3]| {
            let s = f();
            a.map(|v| v * s)
        };
        let speed_planner = arr(self.speed_planner);
        let h_planner = arr(self.h_planner);
        let mut f = || rng.random_range(0.7..1.3);
        Coefs {
            cpu_valley_depth: self.cpu_valley_depth * f(),
            cpu_b: self.cpu_b * f(),
            cpu_valley_slope: self.cpu_valley_slope * f(),
            cpu_c: self.cpu_c * f(),
            cpu_latent: self.cpu_latent * f(),
            speed_d: self.speed_d * f(),
            speed_e: self.speed_e * f(),
            speed_de: self.speed_de * f(),
            speed_planner,
            speed_latent: self.speed_latent * f(),
            energy_cpu: self.energy_cpu * f(),
            energy_speed: self.energy_speed * f(),
            pose_speed: self.pose_speed * f(),
            pose_c: self.pose_c * f(),
            h_speed: self.h_speed * f(),
            h_planner,
            success_h: self.success_h * f(),
            success_energy: self.success_energy * f(),
        }
    }
}

/// A synthetic system under test with known structural equations.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticEnv {
    space: ConfigSpace,
    coefs: Coefs,
    slots: [String; 5],
    /// Per-slot affine remap `u -> lo + (hi - lo) u` of the unit input.
    shifts: [(f64, f64); 5],
    /// Noise sd as a fraction of each variable's nominal range.
    pub noise_frac: f64,
    /// Extra multiplier on all noise and on the latent factor.
    pub noise_mult: f64,
}

impl Default for SyntheticEnv {
    fn default() -> Self {
        SyntheticEnv {
            space: default_space(),
            coefs: Coefs::default(),
            slots: DEFAULT_SLOTS.map(String::from),
            shifts: [(0.0, 1.0); 5],
            noise_frac: 0.05,
            noise_mult: 1.0,
        }
    }
}

/// Noise-free values of every intermediate and output variable.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Response {
    pub cpu_load: f64,
    pub speed: f64,
    pub energy: f64,
    pub pose_error: f64,
    pub obstacle_distance: f64,
    pub success_prob: f64,
}

/// Smooth well: zero at the floor, rising to one away from it.
fn valley(w: f64) -> f64 {
    1.0 - (-0.5 * (w / VALLEY_WIDTH).powi(2)).exp()
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl SyntheticEnv {
    pub fn space(&self) -> &ConfigSpace {
        &self.space
    }

    pub fn noise_free(&self) -> Self {
        SyntheticEnv {
            noise_frac: 0.0,
            ..self.clone()
        }
    }

    fn sd(&self, range: f64) -> f64 {
        self.noise_frac * self.noise_mult * range
    }

    fn unit(&self, c: &Configuration, slot: usize) -> f64 {
        let o = self
            .space
            .get(&self.slots[slot])
            .expect("slot options exist");
        let u = o.to_unit(c.get(o.name()).unwrap_or(o.default_value()));
        let (lo, hi) = self.shifts[slot];
        lo + (hi - lo) * u
    }

    fn planner(&self, c: &Configuration) -> usize {
        let o = self.space.get(PLANNER).expect("planner exists");
        c.get(PLANNER).unwrap_or(o.default_value()).as_f64() as usize
    }

    /// Structural equations with explicit latent and noise terms
    /// (`[latent, cpu, speed, energy, pose, h]`).
    fn equations(&self, c: &Configuration, eps: [f64; 6]) -> Response {
        let k = &self.coefs;
        let (ua, ub, uc, ud, ue) = (
            self.unit(c, 0),
            self.unit(c, 1),
            self.unit(c, 2),
            self.unit(c, 3),
            self.unit(c, 4),
        );
        let p = self.planner(c);
        let latent = eps[0] * self.noise_frac / 0.05 * self.noise_mult;
        let cpu = 15.0
            + k.cpu_valley_depth * valley(ua - VALLEY_OFFSET - k.cpu_valley_slope * ub)
            + k.cpu_b * ub
            + k.cpu_c * uc
            + k.cpu_latent * latent
            + self.sd(RANGE_CPU) * eps[1];
        let speed = 0.2
            + k.speed_d * ud
            + k.speed_e * ue
            + k.speed_de * ud * ue
            + k.speed_planner[p]
            + k.speed_latent * latent
            + self.sd(RANGE_SPEED) * eps[2];
        let energy = 10.0
            + k.energy_cpu * cpu
            + k.energy_speed * (2.0 - speed)
            + self.sd(RANGE_ENERGY) * eps[3];
        let pose =
            0.05 + k.pose_speed * speed + k.pose_c * uc.powi(2) + self.sd(RANGE_POSE) * eps[4];
        let h = 0.36 - k.h_speed * speed + k.h_planner[p] + self.sd(RANGE_H) * eps[5];
        let success_prob =
            logistic(1.5 + k.success_h * (h - 0.25) - k.success_energy * (energy - 80.0));
        Response {
            cpu_load: cpu,
            speed,
            energy,
            pose_error: pose,
            obstacle_distance: h,
            success_prob,
        }
    }

    /// Responses with every noise term and the latent factor at zero.
    pub fn expected(&self, c: &Configuration) -> Response {
        self.equations(c, [0.0; 6])
    }

    /// Noise-free objective vector `[energy, pose_error]`.
    pub fn expected_objectives(&self, c: &Configuration) -> Vec<f64> {
        let r = self.expected(c);
        vec![r.energy, r.pose_error]
    }

    /// One noisy draw of every variable plus the success outcome.
    pub fn simulate(&self, c: &Configuration, trial_seed: u64) -> (Response, bool) {
        let mut rng = seed::rng(trial_seed);
        let mut eps = [0.0; 6];
        for e in eps.iter_mut() {
            *e = StandardNormal.sample(&mut rng);
        }
        let r = self.equations(c, eps);
        let success = rng.random::<f64>() < r.success_prob;
        (r, success)
    }

    /// The ADMG implied by the structural equations.
    pub fn ground_truth(&self) -> Admg {
        let mut vertices: Vec<String> = self.space.names().map(String::from).collect();
        vertices.extend([CPU_LOAD, SPEED, ENERGY, POSE_ERROR, OBSTACLE_DISTANCE].map(String::from));
        let mut g = Admg::new(vertices).expect("vertex names are unique");
        let mut add =
            |a: &str, b: &str| g.add_directed(a, b).expect("structural edges are acyclic");
        for s in 0..3 {
            add(&self.slots[s], CPU_LOAD);
        }
        for s in 3..5 {
            add(&self.slots[s], SPEED);
        }
        add(PLANNER, SPEED);
        add(CPU_LOAD, ENERGY);
        add(SPEED, ENERGY);
        add(SPEED, POSE_ERROR);
        add(&self.slots[2], POSE_ERROR);
        add(SPEED, OBSTACLE_DISTANCE);
        add(PLANNER, OBSTACLE_DISTANCE);
        g.add_bidirected(CPU_LOAD, SPEED).expect("metrics exist");
        g
    }
}

impl Evaluator for SyntheticEnv {
    fn evaluate(&self, c: &Configuration, trial_seed: u64) -> Result<Outcome> {
        self.space.validate(c)?;
        let (r, success) = self.simulate(c, trial_seed);
        Ok(Outcome {
            objectives: vec![r.energy, r.pose_error],
            h: r.obstacle_distance,
            success,
        })
    }
}

/// A source environment and a target derived from it at a severity level:
/// 0 identical, 1 rescaled coefficients and doubled noise, 2 additionally
/// permuted option-to-metric wiring and shifted input domains.
#[derive(Clone, Debug, PartialEq)]
pub struct TransferScenario {
    pub level: u8,
    pub source: SyntheticEnv,
    pub target: SyntheticEnv,
}

impl TransferScenario {
    pub fn new(level: u8, seed_: u64) -> Result<Self> {
        if level > 2 {
            return Err(Error::InvalidArgument(format!(
                "transfer level must be 0, 1 or 2, got {level}"
            )));
        }
        let source = SyntheticEnv::default();
        let mut target = source.clone();
        let mut rng = seed::stream(seed_, "transfer", u64::from(level));
        if level >= 1 {
            target.coefs = source.coefs.scaled(&mut rng);
            target.noise_mult = 2.0 * source.noise_mult;
        }
        if level >= 2 {
            let mut slots = source.slots.clone();
            while slots == source.slots {
                slots.shuffle(&mut rng);
            }
            target.slots = slots;
            for s in target.shifts.iter_mut() {
                let b = rng.random_range(0.0..0.3);
                *s = if rng.random::<bool>() {
                    (b, 1.0)
                } else {
                    (0.0, 1.0 - b)
                };
            }
        }
        Ok(TransferScenario {
            level,
            source,
            target,
        })
    }
}

/// `n` uniform configurations of `env`, evaluated and tagged with roles.
pub fn generate_observational(env: &SyntheticEnv, n: usize, seed_: u64) -> Result<Dataset> {
    let configs = sample_uniform(
        &env.space,
        n,
        seed::derive(seed_, "observational.configs", 0),
    )?;
    let draws = par::map_range(n, |i| {
        env.simulate(&configs[i], seed::derive(seed_, "observational", i as u64))
    });
    let mut cols = Vec::new();
    for o in env.space.options() {
        let vals: Vec<_> = configs
            .iter()
            .map(|c| c.get(o.name()).expect("sampled configs are complete"))
            .collect();
        let data = match o.kind() {
            OptionKind::Continuous => ColumnData::Float(vals.iter().map(|v| v.as_f64()).collect()),
            OptionKind::Integer => {
                ColumnData::Int(vals.iter().map(|v| v.as_f64() as i64).collect())
            }
            OptionKind::Boolean | OptionKind::Categorical => ColumnData::Level {
                levels: o.levels().expect("level options have levels").to_vec(),
                codes: vals.iter().map(|v| v.as_f64() as usize).collect(),
            },
        };
        cols.push(Column::new(o.name(), VariableRole::Option, data));
    }
    let take = |f: fn(&Response) -> f64| draws.iter().map(|(r, _)| f(r)).collect::<Vec<f64>>();
    cols.push(Column::float(
        CPU_LOAD,
        VariableRole::SystemMetric,
        take(|r| r.cpu_load),
    ));
    cols.push(Column::float(
        SPEED,
        VariableRole::SystemMetric,
        take(|r| r.speed),
    ));
    cols.push(Column::float(
        ENERGY,
        VariableRole::Objective,
        take(|r| r.energy),
    ));
    cols.push(Column::float(
        POSE_ERROR,
        VariableRole::Objective,
        take(|r| r.pose_error),
    ));
    cols.push(Column::float(
        OBSTACLE_DISTANCE,
        VariableRole::ConstraintMetric,
        take(|r| r.obstacle_distance),
    ));
    cols.push(Column::new(
        TASK_SUCCESS,
        VariableRole::SuccessFlag,
        ColumnData::Int(draws.iter().map(|(_, s)| i64::from(*s)).collect()),
    ));
    Dataset::new(cols)
}

/// Closed-form ridge coefficients `(XᵀX + λI)⁻¹ Xᵀy`; `None` when singular.
pub fn ridge_fit(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> Option<DVector<f64>> {
    let mut a = x.transpose() * x;
    for i in 0..a.nrows() {
        a[(i, i)] += lambda;
    }
    let chol = a.cholesky()?;
    let b = x.transpose() * y;
    let coef = chol.solve(&b);
    coef.iter().all(|v| v.is_finite()).then_some(coef)
}

/// Ridge with `λ` picked by `folds`-fold cross-validated MSE (contiguous
/// folds; first best wins). Returns `(λ, coefficients)`.
pub fn ridge_cv(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    alphas: &[f64],
    folds: usize,
) -> Result<(f64, DVector<f64>)> {
    let n = x.nrows();
    if folds < 2 || folds > n {
        return Err(Error::InvalidArgument(format!(
            "need 2 <= folds <= rows, got {folds}"
        )));
    }
    let mut best: Option<(f64, f64)> = None;
    for &lambda in alphas {
        let mut sse = 0.0;
        let mut ok = true;
        for f in 0..folds {
            let (lo, hi) = (f * n / folds, (f + 1) * n / folds);
            let train: Vec<usize> = (0..n).filter(|i| *i < lo || *i >= hi).collect();
            let xt = x.select_rows(&train);
            let yt = DVector::from_iterator(train.len(), train.iter().map(|&i| y[i]));
            let Some(coef) = ridge_fit(&xt, &yt, lambda) else {
                ok = false;
                break;
            };
            for i in lo..hi {
                sse += (y[i] - x.row(i).transpose().dot(&coef)).powi(2);
            }
        }
        if ok && best.is_none_or(|(_, b)| sse < b) {
            best = Some((lambda, sse));
        }
    }
    let (lambda, _) =
        best.ok_or_else(|| Error::Singular("every ridge penalty gave a singular system".into()))?;
    let coef = ridge_fit(x, y, lambda)
        .ok_or_else(|| Error::Singular("ridge system is singular".into()))?;
    Ok((lambda, coef))
}

pub const DEFAULT_RIDGE_ALPHAS: [f64; 8] = [0.0, 1e-3, 1e-2, 0.1, 1.0, 10.0, 100.0, 1000.0];

/// Feature screening baseline: standardized ridge per target, options ranked
/// by `|coefficient|`, union of the top `k` across targets.
pub fn ridge_screen(
    ds: &Dataset,
    options: &[String],
    targets: &[String],
    alphas: &[f64],
    folds: usize,
    k: usize,
) -> Result<Vec<String>> {
    if k == 0 {
        return Err(Error::InvalidArgument("K must be at least 1".into()));
    }
    let n = ds.n_rows();
    let zscore = |v: Vec<f64>| {
        let (m, s) = mean_sd(&v);
        let s = if s > 0.0 { s } else { f64::INFINITY };
        v.into_iter().map(move |x| (x - m) / s)
    };
    let mut x = DMatrix::zeros(n, options.len());
    for (j, o) in options.iter().enumerate() {
        for (i, v) in zscore(ds.numeric(o)?).enumerate() {
            x[(i, j)] = v;
        }
    }
    let mut chosen = std::collections::BTreeSet::new();
    for t in targets {
        let y = DVector::from_iterator(n, zscore(ds.numeric(t)?));
        let (_, coef) = ridge_cv(&x, &y, alphas, folds)?;
        let mut order: Vec<usize> = (0..options.len()).collect();
        order.sort_by(|&a, &b| {
            coef[b]
                .abs()
                .total_cmp(&coef[a].abs())
                .then_with(|| options[a].cmp(&options[b]))
        });
        chosen.extend(order.into_iter().take(k).map(|j| options[j].clone()));
    }
    Ok(chosen.into_iter().collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Cure,
    Mobo,
    Ridge,
}

impl Method {
    pub fn id(self) -> &'static str {
        match self {
            Method::Cure => "cure",
            Method::Mobo => "mobo",
            Method::Ridge => "ridge",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "cure" => Ok(Method::Cure),
            "mobo" => Ok(Method::Mobo),
            "ridge" | "ridge+mobo" => Ok(Method::Ridge),
            _ => Err(Error::InvalidArgument(format!("unknown method `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonConfig {
    pub budget: usize,
    pub n_init: usize,
    /// Rows of source observational data.
    pub n_obs: usize,
    pub top_k: usize,
    pub relearn_every: usize,
    pub pool: usize,
    pub fit: FitOptions,
    pub ridge_folds: usize,
    pub ridge_alphas: Vec<f64>,
    pub objectives: ObjectiveSpec,
}

impl Default for ComparisonConfig {
    fn default() -> Self {
        ComparisonConfig {
            budget: 100,
            n_init: 15,
            n_obs: 1000,
            top_k: 5,
            relearn_every: 10,
            pool: 1000,
            fit: FitOptions {
                restarts: 2,
                max_iters: 50,
                seed: 0,
            },
            ridge_folds: 5,
            ridge_alphas: DEFAULT_RIDGE_ALPHAS.to_vec(),
            objectives: default_objectives(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct MethodRun {
    pub method: Method,
    pub seed: u64,
    /// Options searched; every other option stayed at its default.
    pub selected: Vec<String>,
    pub log: TrialLog,
    /// Hypervolume of the noise-free objectives of every configuration
    /// evaluated so far, one entry per trial. Unlike the observed HV this
    /// cannot be inflated by a lucky noise draw.
    pub true_hv: Vec<f64>,
    /// CURE only: the learned graph and its effect table.
    pub model: Option<Admg>,
    pub ace: Option<AceTable>,
}

impl MethodRun {
    pub fn final_hv(&self) -> f64 {
        self.log.final_hv()
    }

    pub fn final_true_hv(&self) -> f64 {
        self.true_hv.last().copied().unwrap_or(0.0)
    }

    /// First trial (1-based) whose true HV reaches `target`.
    pub fn trials_to_reach_true(&self, target: f64) -> Option<usize> {
        self.true_hv
            .iter()
            .position(|&v| v >= target)
            .map(|i| i + 1)
    }
}

/// Running noise-free hypervolume over a trial log.
pub fn true_hv_series(env: &SyntheticEnv, log: &TrialLog, f_ref: &[f64]) -> Vec<f64> {
    let mut pts = Vec::with_capacity(log.rows.len());
    log.rows
        .iter()
        .map(|row| {
            pts.push(env.expected_objectives(&row.trial.config));
            hypervolume(&pareto_front(&pts), f_ref)
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct ComparisonReport {
    pub level: u8,
    pub budget: usize,
    pub n_init: usize,
    pub seeds: Vec<u64>,
    pub spec: ObjectiveSpec,
    pub space: ConfigSpace,
    pub runs: Vec<MethodRun>,
}

/// One method on the scenario's target. CURE and the ridge baseline screen
/// options on `source`; the optimizer seed depends only on `seed_`, so equal
/// search spaces give equal trials.
pub fn run_method(
    scenario: &TransferScenario,
    method: Method,
    source: Option<&Dataset>,
    seed_: u64,
    cfg: &ComparisonConfig,
) -> Result<MethodRun> {
    let spec = cfg.objectives.clone();
    let space = scenario.target.space().clone();
    let bo = BoConfig {
        n_init: cfg.n_init,
        budget: cfg.budget,
        relearn_every: cfg.relearn_every,
        pool: cfg.pool,
        fit: cfg.fit,
        seed: seed::derive(seed_, "bo", 0),
    };
    let source = || {
        source.ok_or_else(|| Error::InvalidArgument(format!("{} needs source data", method.id())))
    };
    let (selected, log, model, ace) = match method {
        Method::Cure => {
            let mut cure = CureConfig {
                top_k: cfg.top_k,
                bo,
                ..CureConfig::default()
            };
            cure.learn.seed = seed::derive(seed_, "learn", 0);
            let run = run_cure(source()?, &scenario.target, &space, &spec, &cure)?;
            (
                run.reduction.space.selected().to_vec(),
                run.run.log,
                Some(run.model.admg),
                Some(run.ace),
            )
        }
        Method::Mobo => {
            let reduced = ReducedSpace::full(space.clone());
            let run = run_bo(&scenario.target, &reduced, &spec, &bo)?;
            (reduced.selected().to_vec(), run.log, None, None)
        }
        Method::Ridge => {
            let options: Vec<String> = space.tunable().map(|o| o.name().to_string()).collect();
            let mut targets = spec.objectives.clone();
            targets.push(spec.constraint.clone());
            let chosen = ridge_screen(
                source()?,
                &options,
                &targets,
                &cfg.ridge_alphas,
                cfg.ridge_folds,
                cfg.top_k,
            )?;
            let reduced = ReducedSpace::new(space.clone(), &chosen)?;
            let run = run_bo(&scenario.target, &reduced, &spec, &bo)?;
            (reduced.selected().to_vec(), run.log, None, None)
        }
    };
    let true_hv = true_hv_series(&scenario.target, &log, &spec.f_ref);
    Ok(MethodRun {
        method,
        seed: seed_,
        selected,
        log,
        true_hv,
        model,
        ace,
    })
}

/// Source data for one comparison seed.
pub fn comparison_source(
    scenario: &TransferScenario,
    seed_: u64,
    cfg: &ComparisonConfig,
) -> Result<Dataset> {
    generate_observational(
        &scenario.source,
        cfg.n_obs,
        seed::derive(seed_, "source", 0),
    )
}

/// Runs every method on the scenario's target for every seed.
pub fn run_comparison(
    scenario: &TransferScenario,
    methods: &[Method],
    seeds: &[u64],
    cfg: &ComparisonConfig,
) -> Result<ComparisonReport> {
    if seeds.is_empty() || methods.is_empty() {
        return Err(Error::InvalidArgument(
            "need at least one seed and one method".into(),
        ));
    }
    let spec = cfg.objectives.clone();
    let space = scenario.target.space().clone();
    let sources = par::map(seeds, |&s| comparison_source(scenario, s, cfg));
    let sources = sources.into_iter().collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, Method)> = (0..seeds.len())
        .flat_map(|i| methods.iter().map(move |m| (i, *m)))
        .collect();
    let runs = par::map(&jobs, |&(i, method)| {
        run_method(scenario, method, Some(&sources[i]), seeds[i], cfg)
    });
    Ok(ComparisonReport {
        level: scenario.level,
        budget: cfg.budget,
        n_init: cfg.n_init,
        seeds: seeds.to_vec(),
        spec,
        space,
        runs: runs.into_iter().collect::<Result<Vec<_>>>()?,
    })
}

pub fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    if s.len() % 2 == 1 {
        s[m]
    } else {
        0.5 * (s[m - 1] + s[m])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub runs: usize,
    pub median_final_hv: f64,
    pub median_final_true_hv: f64,
    pub median_efficiency_literal: f64,
    pub median_efficiency_alt: f64,
    pub median_violations: f64,
    pub median_task_failures: f64,
    pub median_violations_plus_failures: f64,
    pub median_faults: f64,
    pub median_selected: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeadToHead {
    pub baseline: Method,
    /// Seeds where CURE's final HV is at least the baseline's.
    pub cure_at_least: usize,
    /// Seeds where CURE's final HV is strictly higher.
    pub cure_strictly: usize,
    /// Same counts on the noise-free hypervolume.
    pub cure_at_least_true: usize,
    pub cure_strictly_true: usize,
    /// Per seed, the trial at which CURE's true HV first reaches the
    /// baseline's final true HV.
    pub cure_reach_true: Vec<Option<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub level: u8,
    pub budget: usize,
    pub n_init: usize,
    pub seeds: Vec<u64>,
    pub methods: Vec<MethodSummary>,
    pub head_to_head: Vec<HeadToHead>,
}

impl ComparisonReport {
    pub fn runs_of(&self, m: Method) -> Vec<&MethodRun> {
        let mut r: Vec<&MethodRun> = self.runs.iter().filter(|r| r.method == m).collect();
        r.sort_by_key(|r| r.seed);
        r
    }

    pub fn get(&self, m: Method, seed_: u64) -> Option<&MethodRun> {
        self.runs.iter().find(|r| r.method == m && r.seed == seed_)
    }

    fn methods(&self) -> Vec<Method> {
        let mut m: Vec<Method> = self.runs.iter().map(|r| r.method).collect();
        m.sort();
        m.dedup();
        m
    }

    pub fn summary(&self) -> Summary {
        let limits = &self.spec.preferences;
        let methods = self
            .methods()
            .into_iter()
            .map(|m| {
                let runs = self.runs_of(m);
                let stat = |f: &dyn Fn(&MethodRun) -> f64| {
                    median(&runs.iter().map(|r| f(r)).collect::<Vec<_>>())
                };
                let last_eff = |r: &MethodRun| r.log.rows.last().map(|x| x.efficiency);
                MethodSummary {
                    method: m,
                    runs: runs.len(),
                    median_final_hv: stat(&|r| r.final_hv()),
                    median_final_true_hv: stat(&|r| r.final_true_hv()),
                    median_efficiency_literal: stat(&|r| last_eff(r).map_or(0.0, |e| e.literal)),
                    median_efficiency_alt: stat(&|r| last_eff(r).map_or(0.0, |e| e.weighted)),
                    median_violations: stat(&|r| r.log.violations() as f64),
                    median_task_failures: stat(&|r| r.log.task_failures() as f64),
                    median_violations_plus_failures: stat(&|r| {
                        (r.log.violations() + r.log.task_failures()) as f64
                    }),
                    median_faults: stat(&|r| r.log.faults(limits) as f64),
                    median_selected: stat(&|r| r.selected.len() as f64),
                }
            })
            .collect();
        let head_to_head = self
            .methods()
            .into_iter()
            .filter(|m| *m != Method::Cure)
            .filter(|_| self.runs.iter().any(|r| r.method == Method::Cure))
            .map(|b| {
                let (mut ge, mut gt, mut ge_t, mut gt_t) = (0, 0, 0, 0);
                let mut reach = Vec::new();
                for &s in &self.seeds {
                    if let (Some(c), Some(o)) = (self.get(Method::Cure, s), self.get(b, s)) {
                        ge += usize::from(c.final_hv() >= o.final_hv());
                        gt += usize::from(c.final_hv() > o.final_hv());
                        ge_t += usize::from(c.final_true_hv() >= o.final_true_hv());
                        gt_t += usize::from(c.final_true_hv() > o.final_true_hv());
                        reach.push(c.trials_to_reach_true(o.final_true_hv()));
                    }
                }
                HeadToHead {
                    baseline: b,
                    cure_at_least: ge,
                    cure_strictly: gt,
                    cure_at_least_true: ge_t,
                    cure_strictly_true: gt_t,
                    cure_reach_true: reach,
                }
            })
            .collect();
        Summary {
            level: self.level,
            budget: self.budget,
            n_init: self.n_init,
            seeds: self.seeds.clone(),
            methods,
            head_to_head,
        }
    }

    /// Writes `runs/<method>_seed<seed>.csv`, `summary.json`, `hv.csv`,
    /// `efficiency.csv` and `violations.csv` under `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        let runs_dir = dir.join("runs");
        fs::create_dir_all(&runs_dir).map_err(|e| Error::io(&runs_dir, e))?;
        let mut runs: Vec<&MethodRun> = self.runs.iter().collect();
        runs.sort_by_key(|r| (r.method, r.seed));
        for r in &runs {
            r.log.write_csv(
                runs_dir.join(format!("{}_seed{}.csv", r.method.id(), r.seed)),
                &self.space,
            )?;
        }
        let summary = serde_json::to_string_pretty(&self.summary())
            .map_err(|e| Error::Parse(e.to_string()))?;
        let p = dir.join("summary.json");
        fs::write(&p, summary + "\n").map_err(|e| Error::io(&p, e))?;

        let mut hv = csv::Writer::from_path(dir.join("hv.csv"))?;
        let mut eff = csv::Writer::from_path(dir.join("efficiency.csv"))?;
        hv.write_record(["method", "seed", "iter", "hv", "true_hv"])?;
        eff.write_record([
            "method",
            "seed",
            "iter",
            "efficiency_literal",
            "efficiency_alt",
        ])?;
        for r in &runs {
            for (row, t) in r.log.rows.iter().zip(&r.true_hv) {
                let (m, s, i) = (
                    r.method.id(),
                    r.seed.to_string(),
                    row.trial.iter.to_string(),
                );
                hv.write_record([m, &s, &i, &format!("{}", row.hv), &format!("{t}")])?;
                eff.write_record([
                    m,
                    &s,
                    &i,
                    &format!("{}", row.efficiency.literal),
                    &format!("{}", row.efficiency.weighted),
                ])?;
            }
        }
        hv.flush().map_err(|e| Error::io(dir.join("hv.csv"), e))?;
        eff.flush()
            .map_err(|e| Error::io(dir.join("efficiency.csv"), e))?;

        let mut vio = csv::Writer::from_path(dir.join("violations.csv"))?;
        vio.write_record([
            "method",
            "seed",
            "violations",
            "task_failures",
            "faults",
            "selected",
        ])?;
        for r in &runs {
            vio.write_record([
                r.method.id().to_string(),
                r.seed.to_string(),
                r.log.violations().to_string(),
                r.log.task_failures().to_string(),
                r.log.faults(&self.spec.preferences).to_string(),
                r.selected.len().to_string(),
            ])?;
        }
        vio.flush()
            .map_err(|e| Error::io(dir.join("violations.csv"), e))?;
        Ok(())
    }
}
