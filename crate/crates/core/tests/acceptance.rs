//! One test per acceptance criterion. Each prints a `PASS`/`FAIL` line with
//! the measured numbers before asserting; run with `--nocapture` to see them.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::time::Instant;

use causaltune::bench::{
    default_objectives, generate_observational, median, run_comparison, ComparisonConfig, Method,
    SyntheticEnv, TransferScenario, CAUSAL_OPTIONS, DECOY_OPTIONS, ENERGY, OBSTACLE_DISTANCE,
    POSE_ERROR,
};
use causaltune::causal::{learn_causal_model, LearnConfig, StructuralConstraints};
use causaltune::effects::{find_causal_paths, rank_and_reduce, AceTable, EffectConfig};
use causaltune::gp::{pack, unpack, GpModel};
use causaltune::mobo::{dominates, ehvi, hypervolume, pareto_front, penalty, safety_satisfied};
use causaltune::seed;
use causaltune::space::{ConfigSpace, OptionDef};
use rand::Rng;

mod common;
use common::{dense_lml, ehvi_mc, hv_grid, hv_slabs, random_front, random_inputs, random_params};

const SEEDS: [u64; 10] = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9];

fn report(n: u32, ok: bool, detail: String) {
    println!(
        "{} criterion {n}: {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
}

#[test]
fn criterion_01_structure_recovery() {
    let env = SyntheticEnv::default();
    let truth = env.ground_truth().adjacencies();
    let (mut recall, mut spurious, mut slowest) = (Vec::new(), Vec::new(), 0.0f64);
    for s in SEEDS {
        let ds = generate_observational(&env, 2000, s).unwrap();
        let t = Instant::now();
        let cfg = LearnConfig {
            alpha: 0.05,
            seed: s,
            ..LearnConfig::default()
        };
        let model = learn_causal_model(&ds, &StructuralConstraints::from_roles(&ds), &cfg).unwrap();
        slowest = slowest.max(t.elapsed().as_secs_f64());
        let got = model.admg.adjacencies();
        let hit = truth.intersection(&got).count();
        recall.push(hit as f64 / truth.len() as f64);
        spurious.push((got.len() - hit) as f64 / got.len().max(1) as f64);
    }
    let (r, f) = (median(&recall), median(&spurious));
    let ok = r >= 0.8 && f <= 0.2 && slowest <= 60.0;
    report(
        1,
        ok,
        format!("median recall {r:.3} (>= 0.8), median spurious {f:.3} (<= 0.2), slowest seed {slowest:.1}s (<= 60s)"),
    );
    assert!(ok);
}

#[test]
fn criterion_02_causal_options_outrank_decoys() {
    let env = SyntheticEnv::default();
    let truth = env.ground_truth();
    let targets = [ENERGY, POSE_ERROR, OBSTACLE_DISTANCE].map(String::from);
    let mut good = 0;
    let mut misses = Vec::new();
    for s in SEEDS {
        let ds = generate_observational(&env, 2000, s).unwrap();
        let cfg = LearnConfig {
            seed: s,
            ..LearnConfig::default()
        };
        let model = learn_causal_model(&ds, &StructuralConstraints::from_roles(&ds), &cfg).unwrap();
        let table = AceTable::compute(
            &ds,
            &model.admg,
            env.space(),
            &targets,
            &EffectConfig::default(),
        )
        .unwrap();
        let mut seed_ok = true;
        for t in &targets {
            let best_decoy = DECOY_OPTIONS
                .iter()
                .map(|d| table.get(d, t).unwrap())
                .fold(0.0, f64::max);
            for o in CAUSAL_OPTIONS {
                if find_causal_paths(&truth, o, t, 8).is_empty() {
                    continue;
                }
                if table.get(o, t).unwrap() <= best_decoy {
                    seed_ok = false;
                    misses.push(format!("seed {s}: {o} -> {t}"));
                }
            }
        }
        good += usize::from(seed_ok);
    }
    let ok = good >= 9;
    report(
        2,
        ok,
        format!(
            "{good}/10 seeds rank every causal option above every decoy (>= 9); misses {misses:?}"
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_03_reduction_of_the_34_option_table() {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/ace_34.csv");
    let table = AceTable::read_wide_csv(path).unwrap();
    let space = ConfigSpace::new(
        table
            .options
            .iter()
            .map(|n| OptionDef::continuous(n, 0.0, 1.0, 0.5).unwrap())
            .collect(),
    )
    .unwrap();
    let red = rank_and_reduce(&table, 5, &space).unwrap();
    let expected: BTreeSet<&str> = [
        "controller_frequency",
        "controller_patience",
        "max_vel_theta",
        "min_vel_x",
        "planner_patience",
        "publish_frequency",
        "scaling_speed",
        "sim_time",
        "transform_tolerance",
        "update_frequency",
    ]
    .into();
    let got: BTreeSet<&str> = red.space.selected().iter().map(String::as_str).collect();
    let ok = table.options.len() == 34 && table.targets.len() == 4 && got == expected;
    report(
        3,
        ok,
        format!(
            "{} options over {} targets reduced to {}",
            table.options.len(),
            table.targets.len(),
            got.len()
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_04_cure_against_plain_mobo() {
    let t = Instant::now();
    let scenario = TransferScenario::new(0, 0).unwrap();
    let cfg = ComparisonConfig::default();
    let rep = run_comparison(&scenario, &[Method::Cure, Method::Mobo], &SEEDS, &cfg).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let sum = rep.summary();
    let h = &sum.head_to_head[0];
    let limit = cfg.budget * 7 / 10;
    let fast = h
        .cure_reach_true
        .iter()
        .filter(|r| r.is_some_and(|n| n <= limit))
        .count();
    let ge = h.cure_at_least_true;
    let ok = ge >= 8 && fast >= 7 && secs <= 600.0;
    report(
        4,
        ok,
        format!(
            "true HV: CURE >= MOBO in {ge}/10 (>= 8); reaches MOBO's final HV within {limit} trials in {fast}/10 (>= 7), \
             trials needed {:?}; observed HV: CURE >= MOBO in {}/10; runtime {secs:.0}s (<= 600s)",
            h.cure_reach_true, h.cure_at_least
        ),
    );
    assert!(ge >= 8 && secs <= 600.0);
}

#[test]
fn criterion_05_transfer_against_ridge_screening() {
    let scenario = TransferScenario::new(2, 0).unwrap();
    let cfg = ComparisonConfig {
        budget: 50,
        n_init: 15,
        ..ComparisonConfig::default()
    };
    let rep = run_comparison(&scenario, &[Method::Cure, Method::Ridge], &SEEDS, &cfg).unwrap();
    let sum = rep.summary();
    let h = &sum.head_to_head[0];
    let vf = |m: Method| {
        sum.methods
            .iter()
            .find(|s| s.method == m)
            .unwrap()
            .median_violations_plus_failures
    };
    let (c, r) = (vf(Method::Cure), vf(Method::Ridge));
    let ok = h.cure_strictly_true >= 8 && c < r;
    report(
        5,
        ok,
        format!(
            "true HV: CURE > ridge+MOBO in {}/10 (>= 8), observed HV {}/10; median violations+failures {c} vs {r}",
            h.cure_strictly_true, h.cure_strictly
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_06_ehvi_against_monte_carlo() {
    let mut rng = seed::rng(2024);
    let r = [10.0, 10.0];
    let mut worst = 0.0f64;
    for case in 0..20 {
        let front = random_front(&mut rng, 3, 8.0);
        let mean = [rng.random_range(0.5..6.0), rng.random_range(0.5..6.0)];
        let sd = [rng.random_range(0.5..2.5), rng.random_range(0.5..2.5)];
        let exact = ehvi(&mean, &sd, &front, &r).unwrap();
        let mc = ehvi_mc(&mean, &sd, &front, &r, 1_000_000, case);
        worst = worst.max((exact - mc).abs() / mc.abs().max(1e-12));
    }
    let ok = worst < 0.01;
    report(
        6,
        ok,
        format!("worst relative gap over 20 fixtures {worst:.2e} (< 1e-2)"),
    );
    assert!(ok);
}

#[test]
fn criterion_07_hypervolume() {
    let fixture = vec![vec![1.0, 3.0], vec![2.0, 2.0], vec![3.0, 1.0]];
    let hv = hypervolume(&fixture, &[4.0, 4.0]);
    let mut worst = (hv - hv_grid(&fixture, [0.0, 0.0], &[4.0, 4.0], 1000)).abs();
    let mut exact = hv == 6.0;
    let mut rng = seed::rng(11);
    for _ in 0..20 {
        let k = rng.random_range(1..8);
        let front = random_front(&mut rng, k, 1.0);
        let v = hypervolume(&front, &[1.0, 1.0]);
        worst = worst.max((v - hv_grid(&front, [0.0, 0.0], &[1.0, 1.0], 1000)).abs());
        exact &= (v - hv_slabs(&front, &[1.0, 1.0])).abs() < 1e-12;
    }
    let mut monotone = true;
    let mut all: Vec<Vec<f64>> = Vec::new();
    let mut prev = 0.0;
    for _ in 0..1000 {
        let p = vec![rng.random::<f64>() * 10.0, rng.random::<f64>() * 10.0];
        let dominated = all.iter().any(|q| dominates(q, &p) || q == &p);
        all.push(p);
        let v = hypervolume(&pareto_front(&all), &[10.0, 10.0]);
        monotone &= if dominated { v == prev } else { v > prev };
        prev = v;
    }
    let ok = exact && worst <= 0.01 && monotone;
    report(
        7,
        ok,
        format!("staircase HV {hv} (6.0); worst grid gap {worst:.4} (<= 0.01); monotone over 1000 insertions: {monotone}"),
    );
    assert!(ok);
}

#[test]
fn criterion_08_gp_numerics() {
    let x = random_inputs(12, 2, 1, 3);
    let y: Vec<f64> = x
        .iter()
        .map(|xi| xi.num[0].powi(2) - xi.num[1] + xi.cat[0] as f64)
        .collect();
    let (mut p, m) = random_params(2, 1, 4);
    p.noise = 0.0;
    let gp = GpModel::new(x.clone(), y.clone(), p, m).unwrap();
    let interp = x
        .iter()
        .zip(&y)
        .map(|(xi, yi)| (gp.posterior(xi).0 - yi).abs())
        .fold(0.0, f64::max);

    let mut lml_gap = 0.0f64;
    let mut grad_gap = 0.0f64;
    for s in 0..5 {
        let x = random_inputs(20, 3, 1, s);
        let (p, m) = random_params(3, 1, 100 + s);
        let y: Vec<f64> = x
            .iter()
            .map(|xi| (xi.num[0] * 5.0).sin() + xi.num[1] + xi.cat[0] as f64)
            .collect();
        let gp = GpModel::new(x.clone(), y.clone(), p.clone(), m.clone()).unwrap();
        lml_gap = lml_gap
            .max((gp.log_marginal_likelihood() - dense_lml(&x, &y, &p, &m, gp.jitter())).abs());
        let g = gp.lml_gradient();
        let v = pack(&p, &m);
        for i in 0..v.len() {
            let eval = |d: f64| {
                let mut w = v.clone();
                w[i] += d;
                let (pp, mm) = unpack(&w, 3, 1);
                GpModel::new(x.clone(), y.clone(), pp, mm)
                    .unwrap()
                    .log_marginal_likelihood()
            };
            let fd = (eval(1e-5) - eval(-1e-5)) / 2e-5;
            grad_gap = grad_gap.max((g[i] - fd).abs() / fd.abs().max(1e-3));
        }
    }
    let ok = interp <= 1e-6 && lml_gap <= 1e-8 && grad_gap <= 1e-4;
    report(
        8,
        ok,
        format!("interpolation {interp:.1e} (<= 1e-6); LML vs dense {lml_gap:.1e} (<= 1e-8); gradient vs FD {grad_gap:.1e} (<= 1e-4)"),
    );
    assert!(ok);
}

#[test]
fn criterion_09_penalty_and_margin() {
    let pen = [0.30, 0.18, 0.215].map(|h| penalty(h, 0.25, 0.18));
    // Dyadic fixtures, so the margins are exact in binary.
    let a = safety_satisfied(0.75, &[0.5, 0.0], 0.5).unwrap();
    let b = safety_satisfied(1.0, &[0.25, 0.25, 0.0, 0.5], 0.8).unwrap();
    let spec = default_objectives();
    let ok = pen == [0.0, 1.0, 0.5]
        && a.satisfied
        && a.margin == 0.5
        && !b.satisfied
        && b.margin == 0.75
        && (spec.th1, spec.th2) == (0.25, 0.18);
    report(
        9,
        ok,
        format!(
            "penalties {pen:?} ([0, 1, 0.5]); margins {} and {}",
            a.margin, b.margin
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_10_commands_replay_from_their_manifests() {
    use causaltune::cli::{
        execute, replay, BenchArgs, Command, GenerateArgs, LearnArgs, OptimizeArgs, SearchArgs,
        Side, MANIFEST,
    };

    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let search = SearchArgs {
        budget: 25,
        init_trials: 10,
        ..SearchArgs::default()
    };
    let gen = Command::Generate(GenerateArgs {
        level: 0,
        side: Side::Source,
        rows: 1000,
        seed: 7,
        out: dir.join("gen"),
    });
    execute(&gen, &[]).unwrap();
    let commands = [
        Command::Learn(LearnArgs {
            train_data: dir.join("gen/data.csv"),
            spec: dir.join("gen/spec.json"),
            alpha: 0.05,
            bins: 5,
            max_cond: 3,
            seed: 7,
            out: dir.join("learn"),
        }),
        Command::Optimize(OptimizeArgs {
            level: 0,
            method: Method::Cure,
            train_data: Some(dir.join("gen/data.csv")),
            spec: Some(dir.join("gen/spec.json")),
            model: None,
            search: search.clone(),
            seed: 7,
            out: dir.join("optimize"),
        }),
        Command::Bench(BenchArgs {
            level: 1,
            methods: vec![Method::Cure, Method::Mobo, Method::Ridge],
            seed: 7,
            repeats: 2,
            observations: 500,
            search,
            out: dir.join("bench"),
        }),
    ];
    let mut results = Vec::new();
    for cmd in &commands {
        execute(cmd, &[]).unwrap();
        let again = dir.join(format!("{}-replay", cmd.name()));
        let r = replay(&cmd.out().join(MANIFEST), &again, &[]).unwrap();
        results.push((cmd.name(), r.identical.len(), r.is_identical()));
    }
    let ok = results.iter().all(|r| r.2);
    report(
        10,
        ok,
        format!("(command, files compared, identical): {results:?}"),
    );
    assert!(ok);
}
