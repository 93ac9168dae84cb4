use causaltune::gp::{
    fit_hyperparams, gram, kernel, pack, unpack, FitOptions, GpModel, Inputs, KernelParams,
    LinearMean,
};
use causaltune::seed;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

mod common;
use common::{dense_lml, random_inputs, random_params};
use rand_distr::{Distribution, StandardNormal};

#[test]
fn lml_matches_dense_inverse() {
    for s in 0..5 {
        let x = random_inputs(20, 3, 1, s);
        let (p, m) = random_params(3, 1, 100 + s);
        let y: Vec<f64> = x
            .iter()
            .map(|xi| (xi.num[0] * 5.0).sin() + xi.num[1] + xi.cat[0] as f64)
            .collect();
        let gp = GpModel::new(x.clone(), y.clone(), p.clone(), m.clone()).unwrap();
        let oracle = dense_lml(&x, &y, &p, &m, gp.jitter());
        assert!((gp.log_marginal_likelihood() - oracle).abs() < 1e-8);
    }
}

#[test]
fn lml_gradient_matches_central_differences() {
    for s in 0..5 {
        let (dn, dc) = (2, 2);
        let x = random_inputs(15, dn, dc, 10 + s);
        let (p, m) = random_params(dn, dc, 20 + s);
        let y: Vec<f64> = x
            .iter()
            .map(|xi| xi.num[0] * 3.0 - xi.num[1] + 0.5 * xi.cat[1] as f64)
            .collect();
        let gp = GpModel::new(x.clone(), y.clone(), p.clone(), m.clone()).unwrap();
        let g = gp.lml_gradient();
        let v = pack(&p, &m);
        for i in 0..v.len() {
            let h = 1e-5;
            let eval = |d: f64| {
                let mut w = v.clone();
                w[i] += d;
                let (pp, mm) = unpack(&w, dn, dc);
                GpModel::new(x.clone(), y.clone(), pp, mm)
                    .unwrap()
                    .log_marginal_likelihood()
            };
            let fd = (eval(h) - eval(-h)) / (2.0 * h);
            let rel = (g[i] - fd).abs() / fd.abs().max(1e-3);
            assert!(rel < 1e-4, "param {i}: analytic {} vs fd {fd}", g[i]);
        }
    }
}

#[test]
fn noiseless_interpolation() {
    let x = random_inputs(12, 2, 1, 3);
    let y: Vec<f64> = x
        .iter()
        .map(|xi| xi.num[0].powi(2) - xi.num[1] + xi.cat[0] as f64)
        .collect();
    let (mut p, m) = random_params(2, 1, 4);
    p.noise = 0.0;
    let gp = GpModel::new(x.clone(), y.clone(), p, m).unwrap();
    for (xi, yi) in x.iter().zip(&y) {
        let (mu, var) = gp.posterior(xi);
        assert!((mu - yi).abs() < 1e-6);
        assert!(var <= 1e-6);
    }
}

#[test]
fn variance_at_training_points_is_bounded_by_noise() {
    let x = random_inputs(25, 3, 0, 8);
    let y: Vec<f64> = x.iter().map(|xi| xi.num.iter().sum()).collect();
    let (p, m) = random_params(3, 0, 9);
    let gp = GpModel::new(x.clone(), y, p.clone(), m).unwrap();
    for xi in &x {
        let (_, var) = gp.posterior_latent(xi);
        assert!(var >= 0.0 && var <= p.noise + 1e-6);
    }
}

#[test]
fn duplicate_point_adds_its_predictive_log_density() {
    // log p(y, y_dup) = log p(y) + log p(y_dup | y)
    let x = random_inputs(10, 2, 0, 5);
    let y: Vec<f64> = x.iter().map(|xi| xi.num[0] - 2.0 * xi.num[1]).collect();
    let (p, m) = random_params(2, 0, 6);
    let base = GpModel::new(x.clone(), y.clone(), p.clone(), m.clone()).unwrap();
    for i in 0..10 {
        let mut x2 = x.clone();
        let mut y2 = y.clone();
        x2.push(x[i].clone());
        y2.push(y[i]);
        let dup = GpModel::new(x2, y2, p.clone(), m.clone()).unwrap();
        let (mu, var) = base.posterior(&x[i]);
        let var = var + base.jitter();
        let logpdf =
            -0.5 * (y[i] - mu).powi(2) / var - 0.5 * (2.0 * std::f64::consts::PI * var).ln();
        let gain = dup.log_marginal_likelihood() - base.log_marginal_likelihood();
        assert!((gain - logpdf).abs() < 1e-6, "{gain} vs {logpdf}");
    }
}

#[test]
fn posterior_mean_is_order_invariant() {
    let x = random_inputs(15, 2, 1, 11);
    let y: Vec<f64> = x
        .iter()
        .map(|xi| xi.num[0] * xi.num[1] + xi.cat[0] as f64)
        .collect();
    let (p, m) = random_params(2, 1, 12);
    let a = GpModel::new(x.clone(), y.clone(), p.clone(), m.clone()).unwrap();
    let xr: Vec<Inputs> = x.iter().rev().cloned().collect();
    let yr: Vec<f64> = y.iter().rev().copied().collect();
    let b = GpModel::new(xr, yr, p, m).unwrap();
    for q in random_inputs(10, 2, 1, 13) {
        assert!((a.posterior(&q).0 - b.posterior(&q).0).abs() < 1e-10);
    }
}

fn sample_gp(x: &[Inputs], p: &KernelParams, m: &LinearMean, seed_: u64) -> Vec<f64> {
    let n = x.len();
    let mut k = gram(x, p);
    for i in 0..n {
        k[(i, i)] += p.noise + 1e-9;
    }
    let l = k.cholesky().unwrap().unpack();
    let mut rng = seed::rng(seed_);
    let z = DVector::from_iterator(
        n,
        (0..n).map(|_| Distribution::<f64>::sample(&StandardNormal, &mut rng)),
    );
    let f = l * z;
    x.iter()
        .zip(f.iter())
        .map(|(xi, fi)| m.eval(xi) + fi)
        .collect()
}

#[test]
fn fitted_lml_reaches_generator_lml() {
    let p = KernelParams {
        amplitude: 1.2,
        lengthscales: vec![0.3, 0.8],
        cat_scales: vec![0.7],
        noise: 0.05,
    };
    let m = LinearMean {
        slope: vec![0.5, -0.3],
        offset: 0.2,
    };
    let x = random_inputs(50, 2, 1, 21);
    let y = sample_gp(&x, &p, &m, 22);
    let truth = GpModel::new(x.clone(), y.clone(), p, m)
        .unwrap()
        .log_marginal_likelihood();
    let init = (
        KernelParams {
            amplitude: 1.0,
            lengthscales: vec![0.5; 2],
            cat_scales: vec![0.5],
            noise: 0.1,
        },
        LinearMean {
            slope: vec![0.0; 2],
            offset: 0.0,
        },
    );
    let fit = fit_hyperparams(
        &x,
        &y,
        (&init.0, &init.1),
        &FitOptions {
            restarts: 5,
            max_iters: 200,
            seed: 1,
        },
    )
    .unwrap();
    assert!(!fit.warning);
    assert!(
        fit.log_marginal_likelihood() >= truth - 1e-3,
        "{} < {truth}",
        fit.log_marginal_likelihood()
    );
}

#[test]
fn irrelevant_dimension_gets_long_lengthscale() {
    let mut hits = 0;
    for s in 0..10 {
        let x = random_inputs(40, 2, 0, 300 + s);
        let mut rng = seed::rng(400 + s);
        let y: Vec<f64> = x
            .iter()
            .map(|xi| {
                (6.0 * xi.num[0]).sin()
                    + 0.05 * Distribution::<f64>::sample(&StandardNormal, &mut rng)
            })
            .collect();
        let init = KernelParams {
            amplitude: 1.0,
            lengthscales: vec![0.5; 2],
            cat_scales: vec![],
            noise: 0.1,
        };
        let mean = LinearMean {
            slope: vec![0.0; 2],
            offset: 0.0,
        };
        let fit = fit_hyperparams(
            &x,
            &y,
            (&init, &mean),
            &FitOptions {
                seed: s,
                ..Default::default()
            },
        )
        .unwrap();
        let inv: Vec<f64> = fit.params().lengthscales.iter().map(|l| 1.0 / l).collect();
        if inv[1] < 0.1 * inv[0] {
            hits += 1;
        }
    }
    assert!(hits >= 8, "{hits}/10");
}

#[test]
fn more_restarts_never_lower_lml() {
    let x = random_inputs(30, 2, 1, 31);
    let y: Vec<f64> = x
        .iter()
        .map(|xi| (4.0 * xi.num[0]).cos() + xi.num[1] * xi.cat[0] as f64)
        .collect();
    let init = KernelParams {
        amplitude: 1.0,
        lengthscales: vec![0.5; 2],
        cat_scales: vec![0.5],
        noise: 0.1,
    };
    let mean = LinearMean {
        slope: vec![0.0; 2],
        offset: 0.0,
    };
    let one = fit_hyperparams(
        &x,
        &y,
        (&init, &mean),
        &FitOptions {
            restarts: 1,
            max_iters: 60,
            seed: 7,
        },
    )
    .unwrap();
    let five = fit_hyperparams(
        &x,
        &y,
        (&init, &mean),
        &FitOptions {
            restarts: 5,
            max_iters: 60,
            seed: 7,
        },
    )
    .unwrap();
    assert!(five.log_marginal_likelihood() >= one.log_marginal_likelihood() - 1e-9);
}

#[test]
fn fitting_is_deterministic() {
    let x = random_inputs(20, 2, 0, 41);
    let y: Vec<f64> = x.iter().map(|xi| xi.num[0] - xi.num[1].powi(2)).collect();
    let init = KernelParams {
        amplitude: 1.0,
        lengthscales: vec![0.5; 2],
        cat_scales: vec![],
        noise: 0.1,
    };
    let mean = LinearMean {
        slope: vec![0.0; 2],
        offset: 0.0,
    };
    let opts = FitOptions {
        restarts: 3,
        max_iters: 40,
        seed: 3,
    };
    let a = fit_hyperparams(&x, &y, (&init, &mean), &opts).unwrap();
    let b = fit_hyperparams(&x, &y, (&init, &mean), &opts).unwrap();
    assert_eq!(a.params(), b.params());
    assert_eq!(a.mean_fn(), b.mean_fn());
}

proptest! {
    #[test]
    fn kernel_is_symmetric(s in 0u64..1000) {
        let x = random_inputs(2, 3, 2, s);
        let (p, _) = random_params(3, 2, s + 1);
        prop_assert_eq!(kernel(&x[0], &x[1], &p), kernel(&x[1], &x[0], &p));
    }

    #[test]
    fn gram_is_psd(s in 0u64..200, n in 2usize..25) {
        let x = random_inputs(n, 2, 1, s);
        let (p, _) = random_params(2, 1, s + 7);
        let k: DMatrix<f64> = gram(&x, &p);
        let min = k.symmetric_eigenvalues().min();
        prop_assert!(min >= -1e-8);
    }

    #[test]
    fn posterior_variance_nonnegative(s in 0u64..200) {
        let x = random_inputs(15, 2, 1, s);
        let y: Vec<f64> = x.iter().map(|xi| xi.num[0]).collect();
        let (p, m) = random_params(2, 1, s + 3);
        let gp = GpModel::new(x, y, p, m).unwrap();
        for q in random_inputs(20, 2, 1, s + 5) {
            prop_assert!(gp.posterior(&q).1 >= 0.0);
        }
    }
}
