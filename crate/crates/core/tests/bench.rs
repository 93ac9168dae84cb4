use causaltune::bench::{
    default_objectives, default_space, generate_observational, ridge_cv, ridge_fit, ridge_screen,
    run_comparison, ComparisonConfig, Method, Response, SyntheticEnv, TransferScenario,
    CAUSAL_OPTIONS, DECOY_OPTIONS, DEFAULT_RIDGE_ALPHAS, ENERGY, OBSTACLE_DISTANCE, POSE_ERROR,
};
use causaltune::causal::graph_overlap;
use causaltune::data::{Column, Dataset, VariableRole};
use causaltune::effects::{ace, EffectConfig};
use causaltune::gp::FitOptions;
use causaltune::mobo::{run_bo, run_cure, BoConfig, CureConfig, Evaluator};
use causaltune::seed;
use causaltune::space::{sample_uniform, Configuration, ReducedSpace, Value};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

fn pick(r: &Response, target: &str) -> f64 {
    match target {
        ENERGY => r.energy,
        POSE_ERROR => r.pose_error,
        OBSTACLE_DISTANCE => r.obstacle_distance,
        _ => panic!("unknown target {target}"),
    }
}

/// Brute-force `E[target | do(option = v)]` for every grid value and the
/// default, sharing background configurations and noise draws across values.
fn brute_force_ace(env: &SyntheticEnv, option: &str, target: &str, n: usize) -> f64 {
    let space = env.space();
    let def = space.option(option).unwrap();
    let backgrounds = sample_uniform(space, n, 77).unwrap();
    let mean_at = |v: Value| {
        backgrounds
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let mut c = c.clone();
                c.set(option, v);
                pick(&env.simulate(&c, seed::derive(5, "bf", i as u64)).0, target)
            })
            .sum::<f64>()
            / n as f64
    };
    let base = mean_at(def.default_value());
    let grid = def.grid(EffectConfig::default().grid);
    grid.iter().map(|v| (mean_at(*v) - base).abs()).sum::<f64>() / grid.len() as f64
}

#[test]
fn decoys_have_zero_interventional_effect() {
    let env = SyntheticEnv::default().noise_free();
    let space = env.space();
    let backgrounds = sample_uniform(space, 50, 3).unwrap();
    for d in DECOY_OPTIONS {
        let def = space.option(d).unwrap();
        let mut worst: f64 = 0.0;
        for c in &backgrounds {
            let base = env.expected(c);
            for v in def.grid(10) {
                let mut c2 = c.clone();
                c2.set(d, v);
                let r = env.expected(&c2);
                for t in [ENERGY, POSE_ERROR, OBSTACLE_DISTANCE] {
                    worst = worst.max((pick(&r, t) - pick(&base, t)).abs());
                }
            }
        }
        assert!(worst < 1e-6, "decoy {d} moved an output by {worst}");
    }
}

#[test]
fn noise_free_evaluations_reproduce_exactly() {
    let env = SyntheticEnv::default().noise_free();
    let c = env.space().default_configuration();
    let a = env.evaluate(&c, 1).unwrap();
    let b = env.evaluate(&c, 99).unwrap();
    assert_eq!(a.objectives, b.objectives);
    assert_eq!(a.h, b.h);
    let noisy = SyntheticEnv::default();
    assert_eq!(
        noisy.evaluate(&c, 4).unwrap(),
        noisy.evaluate(&c, 4).unwrap()
    );
}

#[test]
fn estimated_ace_matches_brute_force_interventions() {
    let env = SyntheticEnv::default();
    let ds = generate_observational(&env, 5000, 21).unwrap();
    let g = env.ground_truth();
    let cfg = EffectConfig::default();
    let pairs = [
        ("controller_frequency", ENERGY),
        ("vx_samples", ENERGY),
        ("scaling_speed", ENERGY),
        ("min_vel_x", POSE_ERROR),
        ("sim_time", POSE_ERROR),
        ("planner", OBSTACLE_DISTANCE),
    ];
    for (o, t) in pairs {
        let est = ace(&ds, &g, env.space(), o, t, &cfg).unwrap();
        let bf = brute_force_ace(&env, o, t, 9000);
        let rel = (est - bf).abs() / bf;
        assert!(rel < 0.15, "{o} -> {t}: estimated {est}, brute force {bf}");
    }
}

fn skewness(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let m2 = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
    let m3 = x.iter().map(|v| (v - m).powi(3)).sum::<f64>() / n;
    m3 / m2.powf(1.5)
}

#[test]
fn pose_error_is_right_skewed() {
    let ds = generate_observational(&SyntheticEnv::default(), 1000, 0).unwrap();
    assert!(skewness(&ds.numeric(POSE_ERROR).unwrap()) > 0.0);
}

#[test]
fn observational_data_is_reproducible() {
    let env = SyntheticEnv::default();
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    generate_observational(&env, 200, 8)
        .unwrap()
        .write_csv(&a)
        .unwrap();
    generate_observational(&env, 200, 8)
        .unwrap()
        .write_csv(&b)
        .unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let ds = generate_observational(&env, 200, 8).unwrap();
    assert_eq!(ds.n_rows(), 200);
    assert_eq!(ds.role(ENERGY), Some(VariableRole::Objective));
    assert_eq!(
        ds.role(OBSTACLE_DISTANCE),
        Some(VariableRole::ConstraintMetric)
    );
}

#[test]
fn ground_truth_follows_the_equations() {
    let g = SyntheticEnv::default().ground_truth();
    assert!(g.is_acyclic());
    for d in DECOY_OPTIONS {
        assert!(g.children(d).is_empty() && g.parents(d).is_empty(), "{d}");
    }
    for c in CAUSAL_OPTIONS {
        assert!(!g.children(c).is_empty(), "{c}");
    }
    assert_eq!(g.bidirected_edges().count(), 1);
}

#[test]
fn transfer_levels_change_structure_as_documented() {
    let l1 = TransferScenario::new(1, 3).unwrap();
    let o1 = graph_overlap(&l1.source.ground_truth(), &l1.target.ground_truth()).unwrap();
    assert!(o1.only_a.is_empty() && o1.only_b.is_empty());
    assert!(!o1.common.is_empty());
    let l2 = TransferScenario::new(2, 3).unwrap();
    let o2 = graph_overlap(&l2.source.ground_truth(), &l2.target.ground_truth()).unwrap();
    assert!(!o2.only_a.is_empty() && !o2.only_b.is_empty());
    assert_eq!(l2.source.space(), l2.target.space());
    assert!(TransferScenario::new(3, 0).is_err());
}

fn random_design(rows: usize, cols: usize, seed_: u64) -> DMatrix<f64> {
    let mut rng = seed::rng(seed_);
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
}

#[test]
fn ridge_without_penalty_is_least_squares() {
    let x = random_design(60, 5, 1);
    let y = DVector::from_fn(60, |i, _| (i as f64).sin());
    let coef = ridge_fit(&x, &y, 0.0).unwrap();
    let qr = x.clone().qr();
    let ls = qr
        .r()
        .solve_upper_triangular(&(qr.q().transpose() * &y))
        .unwrap();
    assert!((coef - ls).amax() < 1e-8);
}

#[test]
fn ridge_matches_an_iterative_solver() {
    let x = random_design(80, 6, 2);
    let y = DVector::from_fn(80, |i, _| ((i * 7) % 11) as f64 - 5.0);
    let lambda = 2.5;
    let closed = ridge_fit(&x, &y, lambda).unwrap();
    // Conjugate gradient on (XᵀX + λI) b = Xᵀy.
    let a = x.transpose() * &x + DMatrix::identity(6, 6) * lambda;
    let rhs = x.transpose() * &y;
    let mut b = DVector::zeros(6);
    let mut r = &rhs - &a * &b;
    let mut p = r.clone();
    for _ in 0..200 {
        let rr = r.dot(&r);
        if rr < 1e-30 {
            break;
        }
        let ap = &a * &p;
        let step = rr / p.dot(&ap);
        b += &p * step;
        r -= &ap * step;
        p = &r + &p * (r.dot(&r) / rr);
    }
    assert!((closed - b).amax() < 1e-8);
}

#[test]
fn ridge_singular_penalty_is_skipped() {
    let mut x = random_design(30, 3, 3);
    for i in 0..30 {
        x[(i, 2)] = x[(i, 0)];
    }
    let y = DVector::from_fn(30, |i, _| i as f64);
    assert!(ridge_fit(&x, &y, 0.0).is_none());
    let (lambda, _) = ridge_cv(&x, &y, &[0.0, 1.0], 5).unwrap();
    assert_eq!(lambda, 1.0);
    assert!(ridge_cv(&x, &y, &[0.0], 5).is_err());
    assert!(ridge_cv(&x, &y, &[1.0], 1).is_err());
}

#[test]
fn ridge_screen_prefers_the_true_feature() {
    let mut wins = 0;
    for s in 0..10 {
        let mut rng = seed::rng(s);
        let n = 200;
        let x1: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let x2: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let y: Vec<f64> = x1
            .iter()
            .map(|a| {
                let e: f64 = StandardNormal.sample(&mut rng);
                3.0 * a + e
            })
            .collect();
        let ds = Dataset::new(vec![
            Column::float("x1", VariableRole::Option, x1),
            Column::float("x2", VariableRole::Option, x2),
            Column::float("y", VariableRole::Objective, y),
        ])
        .unwrap();
        let chosen = ridge_screen(
            &ds,
            &["x1".into(), "x2".into()],
            &["y".into()],
            &DEFAULT_RIDGE_ALPHAS,
            5,
            1,
        )
        .unwrap();
        wins += usize::from(chosen == ["x1"]);
    }
    assert!(wins >= 9, "x1 ranked first in {wins}/10 seeds");
}

fn small_bo(seed_: u64) -> BoConfig {
    BoConfig {
        n_init: 6,
        budget: 14,
        relearn_every: 4,
        pool: 100,
        fit: FitOptions {
            restarts: 1,
            max_iters: 20,
            seed: 0,
        },
        seed: seed_,
    }
}

#[test]
fn cure_with_every_option_matches_plain_mobo() {
    let env = SyntheticEnv::default();
    let ds = generate_observational(&env, 300, 1).unwrap();
    let spec = default_objectives();
    let cure = CureConfig {
        top_k: 12,
        bo: small_bo(9),
        ..CureConfig::default()
    };
    let a = run_cure(&ds, &env, env.space(), &spec, &cure).unwrap();
    assert_eq!(a.reduction.space.selected().len(), 12);
    let b = run_bo(
        &env,
        &ReducedSpace::full(env.space().clone()),
        &spec,
        &small_bo(9),
    )
    .unwrap();
    assert_eq!(a.run.log, b.log);
}

#[test]
fn comparison_report_has_the_documented_schema() {
    let sc = TransferScenario::new(2, 0).unwrap();
    let cfg = ComparisonConfig {
        budget: 10,
        n_init: 5,
        n_obs: 300,
        pool: 50,
        fit: FitOptions {
            restarts: 1,
            max_iters: 10,
            seed: 0,
        },
        ..ComparisonConfig::default()
    };
    let methods = [Method::Cure, Method::Mobo, Method::Ridge];
    let report = run_comparison(&sc, &methods, &[0, 1], &cfg).unwrap();
    assert_eq!(report.runs.len(), 6);
    for r in &report.runs {
        assert_eq!(r.log.rows.len(), 10);
        assert_eq!(r.true_hv.len(), 10);
        assert!(r.true_hv.windows(2).all(|w| w[1] >= w[0]));
    }
    let dir = tempfile::tempdir().unwrap();
    report.write(dir.path()).unwrap();
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["level"], 2);
    for m in summary["methods"].as_array().unwrap() {
        for key in [
            "median_violations",
            "median_task_failures",
            "median_final_hv",
            "median_final_true_hv",
        ] {
            assert!(m[key].is_number(), "{key}");
        }
    }
    assert_eq!(summary["head_to_head"].as_array().unwrap().len(), 2);
    let vio = std::fs::read_to_string(dir.path().join("violations.csv")).unwrap();
    assert!(vio.starts_with("method,seed,violations,task_failures,faults,selected"));
    assert_eq!(vio.lines().count(), 7);
    for f in [
        "hv.csv",
        "efficiency.csv",
        "runs/cure_seed0.csv",
        "runs/ridge_seed1.csv",
    ] {
        assert!(dir.path().join(f).exists(), "{f}");
    }

    let again = run_comparison(&sc, &methods, &[0, 1], &cfg).unwrap();
    let dir2 = tempfile::tempdir().unwrap();
    again.write(dir2.path()).unwrap();
    for f in ["summary.json", "hv.csv", "violations.csv"] {
        assert_eq!(
            std::fs::read(dir.path().join(f)).unwrap(),
            std::fs::read(dir2.path().join(f)).unwrap()
        );
    }
}

#[test]
fn default_space_and_objectives_are_consistent() {
    let space = default_space();
    let spec = default_objectives();
    spec.validate().unwrap();
    let c: Configuration = space.default_configuration();
    space.validate(&c).unwrap();
    let env = SyntheticEnv::default().noise_free();
    let o = env.evaluate(&c, 0).unwrap();
    // The default sits outside the cpu valley, so it is finite but not good.
    assert!(o.objectives.iter().all(|v| v.is_finite()));
    assert!(o.objectives[0] > spec.preferences[0]);
}

#[test]
fn thread_count_does_not_change_results() {
    let sc = TransferScenario::new(1, 0).unwrap();
    let cfg = ComparisonConfig {
        budget: 14,
        n_init: 10,
        n_obs: 300,
        pool: 200,
        ..ComparisonConfig::default()
    };
    let run = |threads| {
        causaltune::par::with_threads(threads, || {
            let rep = run_comparison(&sc, &[Method::Cure, Method::Ridge], &[0, 1], &cfg).unwrap();
            let dir = tempfile::tempdir().unwrap();
            rep.write(dir.path()).unwrap();
            ["summary.json", "hv.csv", "violations.csv"]
                .map(|f| std::fs::read(dir.path().join(f)).unwrap())
        })
    };
    assert_eq!(run(1), run(4));
}
