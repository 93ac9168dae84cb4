//! Gaussian-process surrogates over mixed configuration spaces.
//!
//! Numeric inputs (continuous and integer) are scaled to [0, 1] and enter a
//! Matérn-1/2 factor with per-dimension length-scales; categorical inputs
//! enter a Kronecker-delta factor. The prior mean is linear in the numeric
//! inputs. Hyperparameters are fitted by maximizing the log marginal
//! likelihood with a bounded BFGS from several starts.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::space::{Configuration, OptionDef, OptionKind, ReducedSpace};
use crate::{par, seed};

const LOG_2PI: f64 = 1.837_877_066_409_345_3;
const JITTER_LADDER: [f64; 4] = [1e-9, 1e-8, 1e-7, 1e-6];
const LOG_LO: f64 = -9.210_340_371_976_184; // ln 1e-4
const LOG_HI: f64 = 9.210_340_371_976_184; // ln 1e4
const MEAN_BOUND: f64 = 1e4;

/// A configuration as the kernel sees it.
#[derive(Clone, Debug, PartialEq)]
pub struct Inputs {
    pub num: Vec<f64>,
    pub cat: Vec<usize>,
}

/// Maps configurations of a reduced space onto kernel inputs.
#[derive(Clone, Debug)]
pub struct Encoder {
    numeric: Vec<OptionDef>,
    categorical: Vec<OptionDef>,
}

impl Encoder {
    pub fn new(space: &ReducedSpace) -> Self {
        let (numeric, categorical): (Vec<OptionDef>, Vec<OptionDef>) = space
            .selected_options()
            .cloned()
            .partition(|o| o.kind().is_numeric());
        Encoder {
            numeric,
            categorical,
        }
    }

    pub fn numeric_dims(&self) -> usize {
        self.numeric.len()
    }

    pub fn categorical_dims(&self) -> usize {
        self.categorical.len()
    }

    pub fn encode(&self, c: &Configuration) -> Inputs {
        let get = |o: &OptionDef| c.get(o.name()).unwrap_or(o.default_value());
        Inputs {
            num: self.numeric.iter().map(|o| o.to_unit(get(o))).collect(),
            cat: self
                .categorical
                .iter()
                .map(|o| get(o).as_f64() as usize)
                .collect(),
        }
    }

    pub fn kernel(&self, a: &Configuration, b: &Configuration, p: &KernelParams) -> f64 {
        kernel(&self.encode(a), &self.encode(b), p)
    }

    pub fn default_params(&self) -> (KernelParams, LinearMean) {
        (
            KernelParams {
                amplitude: 1.0,
                lengthscales: vec![0.5; self.numeric.len()],
                cat_scales: vec![0.5; self.categorical.len()],
                noise: 0.05,
            },
            LinearMean {
                slope: vec![0.0; self.numeric.len()],
                offset: 0.0,
            },
        )
    }

    /// Number of integer-valued numeric dims, for callers that round.
    pub fn integer_dims(&self) -> usize {
        self.numeric
            .iter()
            .filter(|o| o.kind() == OptionKind::Integer)
            .count()
    }
}

/// Kernel hyperparameters: amplitude `θ0`, numeric length-scales `ℓ_d`
/// (`Λ = diag(1/ℓ_d²)`), categorical scales `θ_ℓ`, and noise variance `σ²`.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelParams {
    pub amplitude: f64,
    pub lengthscales: Vec<f64>,
    pub cat_scales: Vec<f64>,
    pub noise: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearMean {
    pub slope: Vec<f64>,
    pub offset: f64,
}

impl LinearMean {
    pub fn eval(&self, x: &Inputs) -> f64 {
        self.offset
            + self
                .slope
                .iter()
                .zip(&x.num)
                .map(|(a, v)| a * v)
                .sum::<f64>()
    }
}

/// Scaled distance `r` and the categorical mismatch sum `Σ θ_ℓ δ`.
fn distances(a: &Inputs, b: &Inputs, p: &KernelParams) -> (f64, f64) {
    let r2: f64 = a
        .num
        .iter()
        .zip(&b.num)
        .zip(&p.lengthscales)
        .map(|((x, y), l)| ((x - y) / l).powi(2))
        .sum();
    let c: f64 = a
        .cat
        .iter()
        .zip(&b.cat)
        .zip(&p.cat_scales)
        .filter(|((x, y), _)| x != y)
        .map(|(_, t)| t)
        .sum();
    (r2.sqrt(), c)
}

/// `θ0² exp(-r) exp(-Σ_ℓ θ_ℓ δ(a_ℓ ≠ b_ℓ))`, without the noise term.
pub fn kernel(a: &Inputs, b: &Inputs, p: &KernelParams) -> f64 {
    let (r, c) = distances(a, b, p);
    p.amplitude * p.amplitude * (-r - c).exp()
}

pub fn gram(x: &[Inputs], p: &KernelParams) -> DMatrix<f64> {
    let n = x.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = kernel(&x[i], &x[j], p);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// A GP conditioned on training data with fixed hyperparameters.
#[derive(Clone, Debug)]
pub struct GpModel {
    x: Vec<Inputs>,
    y: Vec<f64>,
    params: KernelParams,
    mean: LinearMean,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    jitter: f64,
    /// Hyperparameter search failed and the initial values were kept.
    pub warning: bool,
}

impl GpModel {
    pub fn new(
        x: Vec<Inputs>,
        y: Vec<f64>,
        params: KernelParams,
        mean: LinearMean,
    ) -> Result<Self> {
        if x.is_empty() || x.len() != y.len() {
            return Err(Error::InvalidArgument(
                "GP needs matching, nonempty x and y".into(),
            ));
        }
        if params.noise < 0.0 || params.amplitude <= 0.0 {
            return Err(Error::InvalidArgument(
                "kernel parameters out of range".into(),
            ));
        }
        let k = gram(&x, &params);
        let n = x.len();
        let mut last = 0.0;
        for &j in &JITTER_LADDER {
            last = j;
            let mut m = k.clone();
            for i in 0..n {
                m[(i, i)] += params.noise + j;
            }
            if let Some(chol) = m.cholesky() {
                let resid =
                    DVector::from_iterator(n, x.iter().zip(&y).map(|(xi, yi)| yi - mean.eval(xi)));
                let alpha = chol.solve(&resid);
                if alpha.iter().all(|v| v.is_finite()) {
                    return Ok(GpModel {
                        x,
                        y,
                        params,
                        mean,
                        chol,
                        alpha,
                        jitter: j,
                        warning: false,
                    });
                }
            }
        }
        Err(Error::NotPositiveDefinite { jitter: last })
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn mean_fn(&self) -> &LinearMean {
        &self.mean
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Same hyperparameters, new data.
    pub fn refit(&self, x: Vec<Inputs>, y: Vec<f64>) -> Result<Self> {
        GpModel::new(x, y, self.params.clone(), self.mean.clone())
    }

    fn latent(&self, x: &Inputs) -> (f64, f64) {
        let kx = DVector::from_iterator(
            self.n(),
            self.x.iter().map(|xi| kernel(x, xi, &self.params)),
        );
        let mean = self.mean.eval(x) + kx.dot(&self.alpha);
        let v = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&kx)
            .expect("cholesky factor is nonsingular");
        let prior = self.params.amplitude * self.params.amplitude;
        (mean, prior - v.norm_squared())
    }

    /// Predictive mean and variance including observation noise, variance clamped at 0.
    pub fn posterior(&self, x: &Inputs) -> (f64, f64) {
        let (m, v) = self.latent(x);
        (m, (v + self.params.noise).max(0.0))
    }

    /// Mean and variance of the noise-free latent function.
    pub fn posterior_latent(&self, x: &Inputs) -> (f64, f64) {
        let (m, v) = self.latent(x);
        (m, v.max(0.0))
    }

    pub fn log_marginal_likelihood(&self) -> f64 {
        let resid = DVector::from_iterator(
            self.n(),
            self.x
                .iter()
                .zip(&self.y)
                .map(|(xi, yi)| yi - self.mean.eval(xi)),
        );
        let logdet: f64 = self
            .chol
            .l_dirty()
            .diagonal()
            .iter()
            .map(|d| d.ln())
            .sum::<f64>()
            * 2.0;
        -0.5 * resid.dot(&self.alpha) - 0.5 * logdet - 0.5 * self.n() as f64 * LOG_2PI
    }

    /// Gradient of the LML with respect to the packed parameter vector
    /// (see [`pack`]).
    pub fn lml_gradient(&self) -> Vec<f64> {
        let p = &self.params;
        let (dn, dc) = (p.lengthscales.len(), p.cat_scales.len());
        let n = self.n();
        let kinv = self.chol.inverse();
        let mut g = vec![0.0; 2 + dn + dc + dn + 1];
        let i_noise = 1 + dn + dc;
        for i in 0..n {
            for j in 0..=i {
                let w = self.alpha[i] * self.alpha[j] - kinv[(i, j)];
                // Off-diagonal pairs appear twice in the trace.
                let w = if i == j { 0.5 * w } else { w };
                let (r, c) = distances(&self.x[i], &self.x[j], p);
                let k = p.amplitude * p.amplitude * (-r - c).exp();
                g[0] += w * 2.0 * k;
                if r > 0.0 {
                    for d in 0..dn {
                        let diff = self.x[i].num[d] - self.x[j].num[d];
                        let l = p.lengthscales[d];
                        g[1 + d] += w * k * diff * diff / (l * l * r);
                    }
                }
                for l in 0..dc {
                    if self.x[i].cat[l] != self.x[j].cat[l] {
                        g[1 + dn + l] -= w * k * p.cat_scales[l];
                    }
                }
                if i == j {
                    g[i_noise] += w * p.noise;
                }
            }
        }
        for i in 0..n {
            for d in 0..dn {
                g[i_noise + 1 + d] += self.alpha[i] * self.x[i].num[d];
            }
            g[i_noise + 1 + dn] += self.alpha[i];
        }
        g
    }
}

/// Packs into `[ln θ0, ln ℓ.., ln θ_ℓ.., ln σ², a.., b]`.
pub fn pack(p: &KernelParams, m: &LinearMean) -> Vec<f64> {
    let mut v = vec![p.amplitude.ln()];
    v.extend(p.lengthscales.iter().map(|l| l.ln()));
    v.extend(p.cat_scales.iter().map(|l| l.ln()));
    v.push(p.noise.max(1e-300).ln());
    v.extend(&m.slope);
    v.push(m.offset);
    v
}

pub fn unpack(v: &[f64], dn: usize, dc: usize) -> (KernelParams, LinearMean) {
    let p = KernelParams {
        amplitude: v[0].exp(),
        lengthscales: v[1..1 + dn].iter().map(|x| x.exp()).collect(),
        cat_scales: v[1 + dn..1 + dn + dc].iter().map(|x| x.exp()).collect(),
        noise: v[1 + dn + dc].exp(),
    };
    let m = LinearMean {
        slope: v[2 + dn + dc..2 + dn + dc + dn].to_vec(),
        offset: v[2 + dn + dc + dn],
    };
    (p, m)
}

fn bounds(dn: usize, dc: usize) -> (Vec<f64>, Vec<f64>) {
    let nk = 2 + dn + dc;
    let lo = (0..nk + dn + 1)
        .map(|i| if i < nk { LOG_LO } else { -MEAN_BOUND })
        .collect();
    let hi = (0..nk + dn + 1)
        .map(|i| if i < nk { LOG_HI } else { MEAN_BOUND })
        .collect();
    (lo, hi)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitOptions {
    pub restarts: usize,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            restarts: 3,
            max_iters: 60,
            seed: 0,
        }
    }
}

/// Minimizes `f` inside a box with BFGS and a backtracking Armijo search.
/// `f` returns `None` where it cannot be evaluated. Returns the final point,
/// its value, and whether any step was accepted.
pub fn minimize_box<F>(
    f: F,
    x0: &[f64],
    lo: &[f64],
    hi: &[f64],
    max_iters: usize,
) -> Option<(Vec<f64>, f64, bool)>
where
    F: Fn(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let n = x0.len();
    let clamp = |x: &mut Vec<f64>| {
        for i in 0..n {
            x[i] = x[i].clamp(lo[i], hi[i]);
        }
    };
    let mut x = x0.to_vec();
    clamp(&mut x);
    let (mut fx, mut g) = f(&x)?;
    let mut h = DMatrix::<f64>::identity(n, n);
    let mut moved = false;
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
    for it in 0..max_iters {
        let mask = |p: &mut Vec<f64>, x: &[f64]| {
            for i in 0..n {
                if (x[i] <= lo[i] && p[i] < 0.0) || (x[i] >= hi[i] && p[i] > 0.0) {
                    p[i] = 0.0;
                }
            }
        };
        let gv = DVector::from_column_slice(&g);
        let mut p: Vec<f64> = (-(&h * &gv)).iter().copied().collect();
        mask(&mut p, &x);
        if dot(&p, &g) >= 0.0 {
            h = DMatrix::identity(n, n);
            p = g.iter().map(|v| -v).collect();
            mask(&mut p, &x);
        }
        if it == 0 || h == DMatrix::identity(n, n) {
            let norm = dot(&p, &p).sqrt();
            if norm > 1.0 {
                p.iter_mut().for_each(|v| *v /= norm);
            }
        }
        if dot(&p, &g) > -1e-14 {
            break;
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let mut xn: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a + step * b).collect();
            clamp(&mut xn);
            let dx: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
            if let Some((fn_, gn)) = f(&xn) {
                if fn_.is_finite() && fn_ <= fx + 1e-4 * dot(&g, &dx) {
                    let clamped = xn
                        .iter()
                        .zip(x.iter().zip(&p))
                        .any(|(a, (b, c))| (a - (b + step * c)).abs() > 1e-15);
                    accepted = Some((xn, fn_, gn, clamped));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((xn, fn_, gn, clamped)) = accepted else {
            break;
        };
        moved = true;
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &yv);
        if clamped || sy <= 1e-12 {
            h = DMatrix::identity(n, n);
        } else {
            let sv = DVector::from_column_slice(&s);
            let yvv = DVector::from_column_slice(&yv);
            let rho = 1.0 / sy;
            let i = DMatrix::<f64>::identity(n, n);
            let a = &i - rho * &sv * yvv.transpose();
            let b = &i - rho * &yvv * sv.transpose();
            h = &a * &h * &b + rho * &sv * sv.transpose();
        }
        let improvement = fx - fn_;
        x = xn;
        fx = fn_;
        g = gn;
        if improvement.abs() < 1e-10 * (1.0 + fx.abs()) {
            break;
        }
    }
    Some((x, fx, moved))
}

fn neg_lml(x: &[Inputs], y: &[f64], v: &[f64], dn: usize, dc: usize) -> Option<(f64, Vec<f64>)> {
    let (p, m) = unpack(v, dn, dc);
    let model = GpModel::new(x.to_vec(), y.to_vec(), p, m).ok()?;
    let l = model.log_marginal_likelihood();
    if !l.is_finite() {
        return None;
    }
    Some((-l, model.lml_gradient().iter().map(|g| -g).collect()))
}

/// Maximizes the LML from `init` plus `restarts - 1` random starts and returns
/// the best model. If every start fails, the model at `init` is returned with
/// its warning flag set.
pub fn fit_hyperparams(
    x: &[Inputs],
    y: &[f64],
    init: (&KernelParams, &LinearMean),
    opts: &FitOptions,
) -> Result<GpModel> {
    if x.len() < 2 {
        return Err(Error::InvalidArgument(
            "hyperparameter fitting needs at least 2 points".into(),
        ));
    }
    if opts.restarts == 0 {
        return Err(Error::InvalidArgument(
            "at least one restart is required".into(),
        ));
    }
    let (dn, dc) = (init.0.lengthscales.len(), init.0.cat_scales.len());
    let (lo, hi) = bounds(dn, dc);
    let ymean = y.iter().sum::<f64>() / y.len() as f64;
    let yvar = y.iter().map(|v| (v - ymean).powi(2)).sum::<f64>() / y.len() as f64;
    let scale = yvar.sqrt().max(1e-6);
    let starts: Vec<Vec<f64>> = (0..opts.restarts)
        .map(|r| {
            if r == 0 {
                return pack(init.0, init.1);
            }
            let mut rng = seed::stream(opts.seed, "gp-restart", r as u64);
            let mut u = |a: f64, b: f64| (a.ln() + rng.random::<f64>() * (b.ln() - a.ln())).exp();
            let p = KernelParams {
                amplitude: scale * u(0.3, 3.0),
                lengthscales: (0..dn).map(|_| u(0.05, 2.0)).collect(),
                cat_scales: (0..dc).map(|_| u(0.05, 2.0)).collect(),
                noise: yvar.max(1e-8) * u(1e-3, 0.5),
            };
            let m = LinearMean {
                slope: vec![0.0; dn],
                offset: ymean,
            };
            pack(&p, &m)
        })
        .collect();
    let results = par::map(&starts, |s| {
        minimize_box(|v| neg_lml(x, y, v, dn, dc), s, &lo, &hi, opts.max_iters)
    });
    let best = results
        .into_iter()
        .flatten()
        .filter(|(_, f, moved)| f.is_finite() && *moved)
        .min_by(|a, b| a.1.total_cmp(&b.1));
    match best {
        Some((v, _, _)) => {
            let (p, m) = unpack(&v, dn, dc);
            GpModel::new(x.to_vec(), y.to_vec(), p, m)
        }
        None => {
            let mut model = GpModel::new(x.to_vec(), y.to_vec(), init.0.clone(), init.1.clone())?;
            model.warning = true;
            Ok(model)
        }
    }
}

/// A GP over configurations with internally standardized targets.
#[derive(Clone, Debug)]
pub struct Surrogate {
    encoder: Encoder,
    model: GpModel,
    y_mean: f64,
    y_sd: f64,
}

impl Surrogate {
    /// Fits hyperparameters from scratch (warm-started from `prev` when given).
    pub fn fit(
        encoder: &Encoder,
        configs: &[Configuration],
        y: &[f64],
        prev: Option<&Surrogate>,
        opts: &FitOptions,
    ) -> Result<Self> {
        let (x, ys, m, s) = Self::prepare(encoder, configs, y);
        let (dp, dm) = encoder.default_params();
        let (p, mean) = match prev {
            Some(s) => (s.model.params.clone(), s.model.mean.clone()),
            None => (dp, dm),
        };
        let model = fit_hyperparams(&x, &ys, (&p, &mean), opts)?;
        Ok(Surrogate {
            encoder: encoder.clone(),
            model,
            y_mean: m,
            y_sd: s,
        })
    }

    /// Conditions on new data keeping the current hyperparameters.
    pub fn update(&self, configs: &[Configuration], y: &[f64]) -> Result<Self> {
        let (x, ys, m, s) = Self::prepare(&self.encoder, configs, y);
        Ok(Surrogate {
            encoder: self.encoder.clone(),
            model: self.model.refit(x, ys)?,
            y_mean: m,
            y_sd: s,
        })
    }

    fn prepare(
        encoder: &Encoder,
        configs: &[Configuration],
        y: &[f64],
    ) -> (Vec<Inputs>, Vec<f64>, f64, f64) {
        let x: Vec<Inputs> = configs.iter().map(|c| encoder.encode(c)).collect();
        let m = y.iter().sum::<f64>() / y.len() as f64;
        let sd = (y.iter().map(|v| (v - m).powi(2)).sum::<f64>() / y.len() as f64).sqrt();
        let sd = if sd > 1e-12 { sd } else { 1.0 };
        (x, y.iter().map(|v| (v - m) / sd).collect(), m, sd)
    }

    pub fn model(&self) -> &GpModel {
        &self.model
    }

    pub fn encoder(&self) -> &Encoder {
        &self.encoder
    }

    /// Latent mean and standard deviation in target units.
    pub fn predict(&self, c: &Configuration) -> (f64, f64) {
        self.predict_inputs(&self.encoder.encode(c))
    }

    pub fn predict_inputs(&self, x: &Inputs) -> (f64, f64) {
        let (m, v) = self.model.posterior_latent(x);
        (m * self.y_sd + self.y_mean, v.sqrt() * self.y_sd)
    }
}
