//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use causaltune::gp::{gram, Inputs, KernelParams, LinearMean};
use causaltune::seed;
use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, Normal};

/// Area dominated by `front` inside `[.., r]`, computed over the slabs between
/// consecutive x coordinates.
pub fn hv_slabs(front: &[Vec<f64>], r: &[f64]) -> f64 {
    let inside: Vec<&Vec<f64>> = front
        .iter()
        .filter(|p| p[0] < r[0] && p[1] < r[1])
        .collect();
    let mut xs: Vec<f64> = inside.iter().map(|p| p[0]).collect();
    xs.push(r[0]);
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let mut area = 0.0;
    for w in xs.windows(2) {
        let low = inside
            .iter()
            .filter(|p| p[0] <= w[0])
            .map(|p| p[1])
            .fold(r[1], f64::min);
        area += (w[1] - w[0]) * (r[1] - low);
    }
    area
}

/// Fraction of midpoints of an `n x n` grid over `[lo, r]` dominated by the
/// front, times the box area.
pub fn hv_grid(front: &[Vec<f64>], lo: [f64; 2], r: &[f64], n: usize) -> f64 {
    let (dx, dy) = ((r[0] - lo[0]) / n as f64, (r[1] - lo[1]) / n as f64);
    let mut hit = 0usize;
    for i in 0..n {
        let x = lo[0] + (i as f64 + 0.5) * dx;
        for j in 0..n {
            let y = lo[1] + (j as f64 + 0.5) * dy;
            hit += usize::from(front.iter().any(|p| p[0] <= x && p[1] <= y));
        }
    }
    hit as f64 * dx * dy
}

pub fn random_front(rng: &mut seed::Rng, k: usize, scale: f64) -> Vec<Vec<f64>> {
    let mut xs: Vec<f64> = (0..k).map(|_| rng.random::<f64>() * scale).collect();
    let mut ys: Vec<f64> = (0..k).map(|_| rng.random::<f64>() * scale).collect();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(|a, b| b.total_cmp(a));
    xs.into_iter().zip(ys).map(|(x, y)| vec![x, y]).collect()
}

pub fn ehvi_mc(
    mean: &[f64],
    sd: &[f64],
    front: &[Vec<f64>],
    r: &[f64],
    n: usize,
    seed_: u64,
) -> f64 {
    let mut rng = seed::rng(seed_);
    let base = hv_slabs(front, r);
    let g = [
        Normal::new(mean[0], sd[0]).unwrap(),
        Normal::new(mean[1], sd[1]).unwrap(),
    ];
    let mut with = front.to_vec();
    with.push(vec![0.0, 0.0]);
    let last = with.len() - 1;
    let mut total = 0.0;
    for _ in 0..n {
        let y = [g[0].sample(&mut rng), g[1].sample(&mut rng)];
        if y[0] >= r[0] || y[1] >= r[1] || front.iter().any(|p| p[0] <= y[0] && p[1] <= y[1]) {
            continue;
        }
        with[last] = y.to_vec();
        total += hv_slabs(&with, r) - base;
    }
    total / n as f64
}

pub fn random_inputs(n: usize, dn: usize, dc: usize, seed_: u64) -> Vec<Inputs> {
    let mut rng = seed::rng(seed_);
    (0..n)
        .map(|_| Inputs {
            num: (0..dn).map(|_| rng.random::<f64>()).collect(),
            cat: (0..dc).map(|_| rng.random_range(0..3)).collect(),
        })
        .collect()
}

pub fn random_params(dn: usize, dc: usize, seed_: u64) -> (KernelParams, LinearMean) {
    let mut rng = seed::rng(seed_);
    (
        KernelParams {
            amplitude: rng.random_range(0.5..2.0),
            lengthscales: (0..dn).map(|_| rng.random_range(0.1..1.0)).collect(),
            cat_scales: (0..dc).map(|_| rng.random_range(0.1..1.5)).collect(),
            noise: rng.random_range(0.01..0.3),
        },
        LinearMean {
            slope: (0..dn).map(|_| rng.random_range(-1.0..1.0)).collect(),
            offset: rng.random_range(-1.0..1.0),
        },
    )
}

pub fn dense_lml(x: &[Inputs], y: &[f64], p: &KernelParams, m: &LinearMean, jitter: f64) -> f64 {
    let n = x.len();
    let mut k = gram(x, p);
    for i in 0..n {
        k[(i, i)] += p.noise + jitter;
    }
    let inv = k.clone().try_inverse().unwrap();
    let r = DVector::from_iterator(n, x.iter().zip(y).map(|(xi, yi)| yi - m.eval(xi)));
    let det = k.determinant();
    -0.5 * (r.transpose() * &inv * &r)[(0, 0)]
        - 0.5 * det.ln()
        - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln()
}
