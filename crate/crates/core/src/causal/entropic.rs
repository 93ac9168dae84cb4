//! Entropy-based resolution of undetermined edges: discretization, a
//! LatentSearch-style search for a low-entropy separating confounder, and
//! greedy minimum-entropy coupling for orienting direct causation.

use std::collections::BTreeMap;

use rand::Rng as _;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::{par, seed};

/// Shannon entropy (bits) of the empirical distribution of `col`.
pub fn entropy<T: Ord>(col: &[T]) -> f64 {
    let mut counts: BTreeMap<&T, usize> = BTreeMap::new();
    for v in col {
        *counts.entry(v).or_default() += 1;
    }
    let n = col.len() as f64;
    entropy_of(counts.values().map(|&c| c as f64 / n))
}

/// Entropy (bits) of a probability vector; zero entries contribute nothing.
pub fn entropy_of(p: impl IntoIterator<Item = f64>) -> f64 {
    let h: f64 = p
        .into_iter()
        .filter(|&q| q > 0.0)
        .map(|q| -q * q.log2())
        .sum();
    h.max(0.0)
}

/// Equal-frequency binning into at most `bins` codes `0..`. Columns with no
/// more than `bins` distinct values keep one code per value.
pub fn discretize(x: &[f64], bins: usize) -> Vec<usize> {
    let mut sorted: Vec<f64> = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut distinct = sorted.clone();
    distinct.dedup();
    if distinct.len() <= bins.max(1) {
        return x
            .iter()
            .map(|v| distinct.partition_point(|d| d < v))
            .collect();
    }
    let n = sorted.len();
    let mut cuts: Vec<f64> = (1..bins).map(|b| sorted[b * n / bins]).collect();
    cuts.dedup();
    x.iter().map(|v| cuts.partition_point(|c| c <= v)).collect()
}

fn cardinality(codes: &[usize]) -> usize {
    codes.iter().max().map_or(0, |m| m + 1)
}

/// Empirical joint `p[x][y]`.
fn joint(x: &[usize], y: &[usize]) -> Vec<Vec<f64>> {
    let (nx, ny) = (cardinality(x), cardinality(y));
    let mut p = vec![vec![0.0; ny]; nx];
    let w = 1.0 / x.len() as f64;
    for (&a, &b) in x.iter().zip(y) {
        p[a][b] += w;
    }
    p
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LatentSearchConfig {
    pub restarts: usize,
    pub iters: usize,
    /// Weight on I(X;Y|Z) relative to H(Z).
    pub cmi_weight: f64,
    /// Largest I(X;Y|Z) (bits) for a latent to count as separating.
    pub cmi_tolerance: f64,
}

impl Default for LatentSearchConfig {
    fn default() -> Self {
        LatentSearchConfig {
            restarts: 20,
            iters: 500,
            cmi_weight: 10.0,
            cmi_tolerance: 1e-3,
        }
    }
}

/// Result of a latent search. `q[x][y][z]` is the joint distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct Latent {
    pub q: Vec<Vec<Vec<f64>>>,
    pub h_z: f64,
    pub cmi: f64,
    pub converged: bool,
    /// True when no restart met the tolerance and Z was set to X or Y.
    pub fallback: bool,
}

impl Latent {
    pub fn xy_marginal(&self) -> Vec<Vec<f64>> {
        self.q
            .iter()
            .map(|row| row.iter().map(|zs| zs.iter().sum()).collect())
            .collect()
    }
}

fn latent_stats(p: &[Vec<f64>], cond: &[Vec<Vec<f64>>], k: usize) -> (f64, f64) {
    let (nx, ny) = (p.len(), p[0].len());
    let mut qz = vec![0.0; k];
    let mut qxz = vec![vec![0.0; k]; nx];
    let mut qyz = vec![vec![0.0; k]; ny];
    for x in 0..nx {
        for y in 0..ny {
            for z in 0..k {
                let m = p[x][y] * cond[x][y][z];
                qz[z] += m;
                qxz[x][z] += m;
                qyz[y][z] += m;
            }
        }
    }
    let mut cmi = 0.0;
    for x in 0..nx {
        for y in 0..ny {
            for z in 0..k {
                let m = p[x][y] * cond[x][y][z];
                if m > 0.0 {
                    cmi += m * (m * qz[z] / (qxz[x][z] * qyz[y][z])).log2();
                }
            }
        }
    }
    (entropy_of(qz), cmi.max(0.0))
}

/// One alternating-minimization run from a random start.
fn latent_run(
    p: &[Vec<f64>],
    k: usize,
    cfg: &LatentSearchConfig,
    rng: &mut seed::Rng,
) -> (Vec<Vec<Vec<f64>>>, bool) {
    let (nx, ny) = (p.len(), p[0].len());
    let px: Vec<f64> = p.iter().map(|r| r.iter().sum()).collect();
    let py: Vec<f64> = (0..ny).map(|y| (0..nx).map(|x| p[x][y]).sum()).collect();
    let mut cond: Vec<Vec<Vec<f64>>> = (0..nx)
        .map(|_| {
            (0..ny)
                .map(|_| {
                    let mut v: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 1e-3).collect();
                    let s: f64 = v.iter().sum();
                    v.iter_mut().for_each(|q| *q /= s);
                    v
                })
                .collect()
        })
        .collect();
    // Objective I(X;Y|Z) + beta H(Z) with beta = 1 / cmi_weight.
    let beta = 1.0 / cfg.cmi_weight;
    let mut last = f64::INFINITY;
    let mut converged = false;
    for _ in 0..cfg.iters {
        let mut qz = vec![0.0; k];
        let mut qzx = vec![vec![0.0; k]; nx];
        let mut qzy = vec![vec![0.0; k]; ny];
        for x in 0..nx {
            for y in 0..ny {
                for z in 0..k {
                    let m = p[x][y] * cond[x][y][z];
                    qz[z] += m;
                    qzx[x][z] += m;
                    qzy[y][z] += m;
                }
            }
        }
        for x in 0..nx {
            for y in 0..ny {
                let mut row: Vec<f64> = (0..k)
                    .map(|z| {
                        if qz[z] <= 0.0 || px[x] <= 0.0 || py[y] <= 0.0 {
                            return 0.0;
                        }
                        (qzx[x][z] / px[x]) * (qzy[y][z] / py[y]) / qz[z].powf(1.0 - beta)
                    })
                    .collect();
                let s: f64 = row.iter().sum();
                if s > 0.0 && s.is_finite() {
                    row.iter_mut().for_each(|q| *q /= s);
                    cond[x][y] = row;
                }
            }
        }
        let (h, cmi) = latent_stats(p, &cond, k);
        let obj = cmi + beta * h;
        if (last - obj).abs() < 1e-12 {
            converged = true;
            break;
        }
        last = obj;
    }
    (cond, converged)
}

/// Searches for a latent `Z` with `k` states that makes `x` and `y`
/// conditionally independent while keeping `H(Z)` small.
pub fn latent_search(
    x: &[usize],
    y: &[usize],
    k: usize,
    cfg: &LatentSearchConfig,
    seed: u64,
) -> Result<Latent> {
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::InvalidArgument(
            "x and y must be nonempty and equally long".into(),
        ));
    }
    if k < 2 {
        return Err(Error::InvalidArgument(
            "latent cardinality must be at least 2".into(),
        ));
    }
    if cfg.restarts == 0 {
        return Err(Error::InvalidArgument(
            "latent search needs at least one restart".into(),
        ));
    }
    let p = joint(x, y);
    let (nx, ny) = (p.len(), p[0].len());
    let runs = par::map_range(cfg.restarts, |r| {
        let mut rng = seed::stream(seed, "latent-search", r as u64);
        let (cond, converged) = latent_run(&p, k, cfg, &mut rng);
        let (h, cmi) = latent_stats(&p, &cond, k);
        (cond, h, cmi, converged)
    });
    let expand = |cond: &Vec<Vec<Vec<f64>>>| -> Vec<Vec<Vec<f64>>> {
        (0..nx)
            .map(|a| {
                (0..ny)
                    .map(|b| cond[a][b].iter().map(|c| p[a][b] * c).collect())
                    .collect()
            })
            .collect()
    };
    let mut best: Option<Latent> = None;
    let mut any_converged = false;
    for (cond, h, cmi, conv) in &runs {
        any_converged |= conv;
        if *cmi <= cfg.cmi_tolerance && best.as_ref().is_none_or(|b| *h < b.h_z) {
            best = Some(Latent {
                q: expand(cond),
                h_z: *h,
                cmi: *cmi,
                converged: *conv,
                fallback: false,
            });
        }
    }
    if let Some(b) = best {
        return Ok(b);
    }
    // Z = X (or Y) always separates; pick the cheaper one that fits in k states.
    let px: Vec<f64> = p.iter().map(|r| r.iter().sum()).collect();
    let py: Vec<f64> = (0..ny).map(|b| (0..nx).map(|a| p[a][b]).sum()).collect();
    let (hx, hy) = (entropy_of(px), entropy_of(py));
    let use_x = match (nx <= k, ny <= k) {
        (true, true) => hx <= hy,
        (true, false) => true,
        (false, true) => false,
        (false, false) => {
            // Neither fits: keep the restart with the smallest CMI.
            let (cond, h, cmi, conv) = runs
                .iter()
                .min_by(|a, b| a.2.total_cmp(&b.2))
                .expect("restarts >= 1");
            return Ok(Latent {
                q: expand(cond),
                h_z: *h,
                cmi: *cmi,
                converged: *conv,
                fallback: true,
            });
        }
    };
    let q = (0..nx)
        .map(|a| {
            (0..ny)
                .map(|b| {
                    let mut zs = vec![0.0; k];
                    zs[if use_x { a } else { b }] = p[a][b];
                    zs
                })
                .collect()
        })
        .collect();
    Ok(Latent {
        q,
        h_z: if use_x { hx } else { hy },
        cmi: 0.0,
        converged: any_converged,
        fallback: true,
    })
}

/// Greedy minimum-entropy coupling of several distributions over the same
/// support; returns the entropy (bits) of the coupling's joint.
pub fn greedy_coupling_entropy(dists: &[Vec<f64>]) -> f64 {
    if dists.is_empty() {
        return 0.0;
    }
    let mut d: Vec<Vec<f64>> = dists.to_vec();
    let mut masses = Vec::new();
    let mut remaining = 1.0;
    while remaining > 1e-12 {
        let maxima: Vec<(usize, f64)> = d
            .iter()
            .map(|p| {
                p.iter()
                    .copied()
                    .enumerate()
                    .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
                    .expect("nonempty support")
            })
            .collect();
        let r = maxima.iter().map(|m| m.1).fold(f64::INFINITY, f64::min);
        if r <= 1e-15 {
            break;
        }
        for (p, (i, _)) in d.iter_mut().zip(&maxima) {
            p[*i] -= r;
        }
        masses.push(r);
        remaining -= r;
    }
    entropy_of(masses)
}

/// Entropy of the exogenous noise needed to write `effect = f(cause, E)`.
pub fn exogenous_entropy(cause: &[usize], effect: &[usize]) -> f64 {
    let p = joint(cause, effect);
    let conditionals: Vec<Vec<f64>> = p
        .iter()
        .filter_map(|row| {
            let s: f64 = row.iter().sum();
            (s > 0.0).then(|| row.iter().map(|v| v / s).collect())
        })
        .collect();
    greedy_coupling_entropy(&conditionals)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdgeDecision {
    Forward,
    Backward,
    Bidirected,
}

/// Outcome of resolving the edge between `x` and `y`. `Forward` means x -> y.
#[derive(Clone, Debug, PartialEq)]
pub struct Resolution {
    pub decision: EdgeDecision,
    pub h_z: f64,
    pub theta_r: f64,
    pub h_e_forward: f64,
    pub h_e_backward: f64,
    /// Orientation fell back to lexical order because the entropies tied.
    pub tie: bool,
    pub latent_converged: bool,
}

impl Resolution {
    pub fn gap(&self) -> f64 {
        (self.h_e_forward - self.h_e_backward).abs()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EntropicConfig {
    pub bins: usize,
    pub threshold_ratio: f64,
    pub latent: LatentSearchConfig,
}

impl Default for EntropicConfig {
    fn default() -> Self {
        EntropicConfig {
            bins: 5,
            threshold_ratio: 0.8,
            latent: LatentSearchConfig::default(),
        }
    }
}

/// Which orientations remain possible for an edge when resolution starts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Candidates {
    /// Nothing known: forward, backward or bidirected.
    Any,
    /// Arrowhead at y already fixed: forward or bidirected.
    ForwardOrLatent,
}

/// Resolves an edge on pre-discretized codes.
pub fn resolve_codes(
    x: (&str, &[usize]),
    y: (&str, &[usize]),
    candidates: Candidates,
    cfg: &EntropicConfig,
    seed: u64,
) -> Result<Resolution> {
    let (hx, hy) = (entropy(x.1), entropy(y.1));
    let theta_r = cfg.threshold_ratio * hx.min(hy);
    let k = cardinality(x.1).min(cardinality(y.1)).max(2);
    let (lo, hi) = if x.0 <= y.0 { (x.0, y.0) } else { (y.0, x.0) };
    let edge_seed = seed::derive(seed, &format!("edge:{lo}|{hi}"), 0);
    let latent = latent_search(x.1, y.1, k, &cfg.latent, edge_seed)?;
    let h_e_forward = exogenous_entropy(x.1, y.1);
    let h_e_backward = exogenous_entropy(y.1, x.1);
    let mut out = Resolution {
        decision: EdgeDecision::Forward,
        h_z: latent.h_z,
        theta_r,
        h_e_forward,
        h_e_backward,
        tie: false,
        latent_converged: latent.converged,
    };
    if latent.h_z < theta_r {
        out.decision = EdgeDecision::Bidirected;
        return Ok(out);
    }
    if candidates == Candidates::ForwardOrLatent {
        return Ok(out);
    }
    out.decision = if (h_e_forward - h_e_backward).abs() <= 1e-9 {
        out.tie = true;
        if x.0 <= y.0 {
            EdgeDecision::Forward
        } else {
            EdgeDecision::Backward
        }
    } else if h_e_forward < h_e_backward {
        EdgeDecision::Forward
    } else {
        EdgeDecision::Backward
    };
    Ok(out)
}

/// Resolves the edge between dataset columns `x` and `y` after equal-frequency
/// discretization into `cfg.bins` bins.
pub fn resolve_edge(
    ds: &Dataset,
    x: &str,
    y: &str,
    cfg: &EntropicConfig,
    seed: u64,
) -> Result<Resolution> {
    let cx = discretize(&ds.numeric(x)?, cfg.bins);
    let cy = discretize(&ds.numeric(y)?, cfg.bins);
    resolve_codes((x, &cx), (y, &cy), Candidates::Any, cfg, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> LatentSearchConfig {
        LatentSearchConfig::default()
    }

    #[test]
    fn entropy_reference_values() {
        assert_eq!(entropy(&[3, 3, 3, 3]), 0.0);
        assert!((entropy(&[0, 1, 0, 1]) - 1.0).abs() < 1e-12);
        let mut col = vec![0; 90];
        col.extend(vec![1; 10]);
        let direct = -(0.1f64 * 0.1f64.log2() + 0.9 * 0.9f64.log2());
        assert!((entropy(&col) - direct).abs() < 1e-12);
        assert!((entropy(&col) - 0.4690).abs() < 1e-4);
    }

    #[test]
    fn discretize_is_equal_frequency() {
        let x: Vec<f64> = (0..100).map(|i| (i as f64 * 0.37).sin()).collect();
        let codes = discretize(&x, 5);
        for b in 0..5 {
            assert_eq!(codes.iter().filter(|&&c| c == b).count(), 20);
        }
        assert_eq!(discretize(&[2.0, 5.0, 2.0, 9.0], 5), vec![0, 1, 0, 2]);
    }

    #[test]
    fn copies_of_a_fair_coin() {
        let z: Vec<usize> = (0..200).map(|i| i % 2).collect();
        let l = latent_search(&z, &z, 2, &cfg(), 4).unwrap();
        assert!(l.h_z <= 1.0 + 1e-3, "H(Z) = {}", l.h_z);
        assert!(l.cmi <= 1e-3);
        // Exhaustive check over deterministic k=2 couplings: nothing below 1 bit separates.
        assert!(l.h_z >= 1.0 - 1e-3);
    }

    #[test]
    fn independent_pair_needs_no_latent() {
        let x: Vec<usize> = (0..400).map(|i| i % 2).collect();
        let y: Vec<usize> = (0..400).map(|i| (i / 2) % 2).collect();
        let l = latent_search(&x, &y, 2, &cfg(), 5).unwrap();
        assert!(l.h_z < 0.05, "H(Z) = {}", l.h_z);
    }

    #[test]
    fn marginal_matches_empirical_joint() {
        let x: Vec<usize> = (0..300).map(|i| (i * 7 % 11) % 3).collect();
        let y: Vec<usize> = (0..300).map(|i| (i * 5 % 13) % 4).collect();
        let l = latent_search(&x, &y, 3, &cfg(), 6).unwrap();
        let p = joint(&x, &y);
        let tv: f64 = l
            .xy_marginal()
            .iter()
            .flatten()
            .zip(p.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv < 1e-6);
    }

    #[test]
    fn zero_restarts_rejected() {
        let c = LatentSearchConfig {
            restarts: 0,
            ..cfg()
        };
        assert!(latent_search(&[0, 1], &[1, 0], 2, &c, 1).is_err());
    }

    #[test]
    fn deterministic_noninvertible_map_points_forward() {
        let x: Vec<usize> = (0..400).map(|i| i % 4).collect();
        let y: Vec<usize> = x.iter().map(|v| v % 2).collect();
        assert_eq!(exogenous_entropy(&x, &y), 0.0);
        assert!((exogenous_entropy(&y, &x) - 1.0).abs() < 1e-9);
        let r = resolve_codes(
            ("x", &x),
            ("y", &y),
            Candidates::Any,
            &EntropicConfig::default(),
            1,
        )
        .unwrap();
        assert_eq!(r.decision, EdgeDecision::Forward);
    }

    #[test]
    fn binary_confounder_becomes_bidirected() {
        // Z ~ Bern(0.2); X = 2Z + U1, Y = 2Z + U2 with fair independent bits U.
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..2000 {
            let z = usize::from(i % 5 == 0);
            let u1 = (i / 5) % 2;
            let u2 = (i / 10) % 2;
            x.push(2 * z + u1);
            y.push(2 * z + u2);
        }
        let r = resolve_codes(
            ("x", &x),
            ("y", &y),
            Candidates::Any,
            &EntropicConfig::default(),
            2,
        )
        .unwrap();
        assert!((r.h_z - 0.7219).abs() < 0.02, "H(Z) = {}", r.h_z);
        assert_eq!(r.decision, EdgeDecision::Bidirected);
    }

    #[test]
    fn symmetric_tie_breaks_lexically() {
        let x: Vec<usize> = (0..400).map(|i| i % 2).collect();
        let y: Vec<usize> = x.iter().map(|v| 1 - v).collect();
        let c = EntropicConfig {
            threshold_ratio: 0.0,
            ..EntropicConfig::default()
        };
        let r = resolve_codes(("b", &x), ("a", &y), Candidates::Any, &c, 3).unwrap();
        assert!(r.tie);
        assert_eq!(r.decision, EdgeDecision::Backward);
    }

    #[test]
    fn greedy_coupling_of_identical_dists_is_their_entropy() {
        let d = vec![vec![0.5, 0.25, 0.25]; 3];
        assert!((greedy_coupling_entropy(&d) - 1.5).abs() < 1e-12);
    }
}
