use std::path::PathBuf;
use std::process::ExitCode;

use causaltune::bench::Method;
use causaltune::cli::{
    execute, render_report, replay, BenchArgs, Command, GenerateArgs, LearnArgs,
    ObjectiveOverrides, OptimizeArgs, RankArgs, SearchArgs, Side,
};
use causaltune::ErrorClass;
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Causally guided multi-objective configuration tuning.
#[derive(Parser)]
#[command(name = "causaltune", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sample observational data from a benchmark environment.
    Generate(GenerateOpts),
    /// Learn a causal graph from observational data.
    Learn(LearnOpts),
    /// Rank options by causal effect and reduce the search space.
    Rank(RankOpts),
    /// Tune the benchmark target system with one method.
    Optimize(OptimizeOpts),
    /// Compare methods over several seeds.
    Bench(BenchOpts),
    /// Print a summary table for an optimize or bench output directory.
    Report { dir: PathBuf },
    /// Rerun a recorded command and compare its outputs byte for byte.
    Replay {
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SideOpt {
    Source,
    Target,
}

#[derive(Args)]
struct GenerateOpts {
    /// Transfer severity: 0 identical, 1 rescaled, 2 rewired.
    #[arg(long, default_value_t = 0)]
    level: u8,
    #[arg(long, value_enum, default_value = "source")]
    side: SideOpt,
    #[arg(long, default_value_t = 1000)]
    rows: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct LearnOpts {
    #[arg(long = "train-data", alias = "train_data")]
    train_data: PathBuf,
    /// Configuration space and column roles (JSON or TOML).
    #[arg(long)]
    spec: PathBuf,
    /// Significance level of the conditional-independence tests.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 5)]
    bins: usize,
    /// Largest conditioning set.
    #[arg(long = "max-cond", alias = "max_cond", default_value_t = 3)]
    max_cond: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RankOpts {
    #[arg(long)]
    model: PathBuf,
    #[arg(long = "train-data", alias = "train_data")]
    train_data: PathBuf,
    #[arg(long)]
    spec: PathBuf,
    /// Target columns; defaults to every objective and constraint column.
    #[arg(long, value_delimiter = ',', alias = "nf")]
    targets: Vec<String>,
    #[arg(long = "top-k", alias = "top_k", default_value_t = 5)]
    top_k: usize,
    #[arg(long, default_value_t = 10)]
    bins: usize,
    #[arg(long, default_value_t = 10)]
    grid: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    /// Budget 200 with the default reference point.
    E1,
}

#[derive(Args)]
struct SearchOpts {
    /// Total evaluations, initial design included.
    #[arg(long, conflicts_with = "preset")]
    budget: Option<usize>,
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    #[arg(long = "init-trials", aliases = ["init_trials", "init_trails"], default_value_t = 15)]
    init_trials: usize,
    /// Options kept per target.
    #[arg(long = "top-k", alias = "top_k")]
    top_k: Option<usize>,
    /// Refit surrogate hyperparameters every this many iterations.
    #[arg(long = "relearn-every", alias = "relearn_every", default_value_t = 10)]
    relearn_every: usize,
    /// Random candidates scored per proposal.
    #[arg(long, default_value_t = 1000)]
    pool: usize,
    #[arg(long, default_value_t = 2)]
    restarts: usize,
    #[arg(long = "hv-ref-f1", alias = "hv_ref_f1", requires = "hv_ref_f2")]
    hv_ref_f1: Option<f64>,
    #[arg(long = "hv-ref-f2", alias = "hv_ref_f2", requires = "hv_ref_f1")]
    hv_ref_f2: Option<f64>,
    #[arg(long = "f1-pref", alias = "f1_pref", requires = "f2_pref")]
    f1_pref: Option<f64>,
    #[arg(long = "f2-pref", alias = "f2_pref", requires = "f1_pref")]
    f2_pref: Option<f64>,
    /// Soft safety threshold on the constraint metric.
    #[arg(long = "soft-threshold", alias = "sc")]
    soft_threshold: Option<f64>,
    #[arg(long = "hard-threshold")]
    hard_threshold: Option<f64>,
    /// Required task-completion margin.
    #[arg(long)]
    tcr: Option<f64>,
}

impl SearchOpts {
    fn resolve(&self) -> SearchArgs {
        let d = SearchArgs::default();
        let budget = match self.preset {
            Some(Preset::E1) => 200,
            None => self.budget.unwrap_or(d.budget),
        };
        SearchArgs {
            budget,
            init_trials: self.init_trials,
            top_k: self.top_k.unwrap_or(d.top_k),
            relearn_every: self.relearn_every,
            pool: self.pool,
            restarts: self.restarts,
            objectives: ObjectiveOverrides {
                f_ref: self.hv_ref_f1.zip(self.hv_ref_f2).map(|(a, b)| [a, b]),
                preferences: self.f1_pref.zip(self.f2_pref).map(|(a, b)| [a, b]),
                th1: self.soft_threshold,
                th2: self.hard_threshold,
                theta: self.tcr,
            },
        }
    }
}

fn parse_method(s: &str) -> Result<Method, String> {
    Method::parse(s).map_err(|e| e.to_string())
}

#[derive(Args)]
struct OptimizeOpts {
    #[arg(long, default_value_t = 0)]
    level: u8,
    /// cure, mobo or ridge.
    #[arg(long, value_parser = parse_method, default_value = "cure")]
    method: Method,
    #[arg(long = "train-data", alias = "train_data")]
    train_data: Option<PathBuf>,
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Previously learned graph, used instead of learning one.
    #[arg(long)]
    model: Option<PathBuf>,
    #[command(flatten)]
    search: SearchOpts,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchOpts {
    #[arg(long, default_value_t = 0)]
    level: u8,
    #[arg(long, value_delimiter = ',', value_parser = parse_method, default_value = "cure,mobo,ridge")]
    methods: Vec<Method>,
    /// First seed; runs use `seed .. seed + repeats`.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    repeats: u64,
    /// Rows of source observational data per seed.
    #[arg(long, alias = "n_obs", default_value_t = 1000)]
    observations: usize,
    #[command(flatten)]
    search: SearchOpts,
    #[arg(long)]
    out: PathBuf,
}

fn exit_code(class: ErrorClass) -> ExitCode {
    ExitCode::from(match class {
        ErrorClass::Usage => 2,
        ErrorClass::Data => 3,
        ErrorClass::Numerical => 4,
    })
}

fn to_command(cmd: Cmd) -> Result<Command, String> {
    Ok(match cmd {
        Cmd::Generate(o) => Command::Generate(GenerateArgs {
            level: o.level,
            side: match o.side {
                SideOpt::Source => Side::Source,
                SideOpt::Target => Side::Target,
            },
            rows: o.rows,
            seed: o.seed,
            out: o.out,
        }),
        Cmd::Learn(o) => Command::Learn(LearnArgs {
            train_data: o.train_data,
            spec: o.spec,
            alpha: o.alpha,
            bins: o.bins,
            max_cond: o.max_cond,
            seed: o.seed,
            out: o.out,
        }),
        Cmd::Rank(o) => Command::Rank(RankArgs {
            model: o.model,
            train_data: o.train_data,
            spec: o.spec,
            targets: o.targets,
            top_k: o.top_k,
            bins: o.bins,
            grid: o.grid,
            out: o.out,
        }),
        Cmd::Optimize(o) => {
            if o.method == Method::Mobo && o.search.top_k.is_some() {
                return Err("--top-k has no meaning for mobo, which searches every option".into());
            }
            Command::Optimize(OptimizeArgs {
                level: o.level,
                method: o.method,
                train_data: o.train_data,
                spec: o.spec,
                model: o.model,
                search: o.search.resolve(),
                seed: o.seed,
                out: o.out,
            })
        }
        Cmd::Bench(o) => Command::Bench(BenchArgs {
            level: o.level,
            methods: o.methods,
            seed: o.seed,
            repeats: o.repeats,
            observations: o.observations,
            search: o.search.resolve(),
            out: o.out,
        }),
        Cmd::Report { .. } | Cmd::Replay { .. } => unreachable!("handled before conversion"),
    })
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Report { dir } => match render_report(&dir) {
            Ok(text) => {
                print!("{text}");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: stage report: {e}");
                exit_code(e.class())
            }
        },
        Cmd::Replay { manifest, out } => match replay(&manifest, &out, &argv) {
            Ok(r) if r.is_identical() => {
                println!("replay identical: {} files", r.identical.len());
                ExitCode::SUCCESS
            }
            Ok(r) => {
                for f in &r.differing {
                    eprintln!("differs: {}", f.display());
                }
                for f in &r.missing {
                    eprintln!("missing: {}", f.display());
                }
                eprintln!("error: replay produced different outputs");
                ExitCode::from(3)
            }
            Err(f) => {
                eprintln!("error: {f}");
                exit_code(f.class())
            }
        },
        other => {
            let cmd = match to_command(other) {
                Ok(c) => c,
                Err(msg) => {
                    eprintln!("error: stage args: {msg}");
                    return ExitCode::from(2);
                }
            };
            match execute(&cmd, &argv) {
                Ok(_) => {
                    println!("{}: wrote {}", cmd.name(), cmd.out().display());
                    ExitCode::SUCCESS
                }
                Err(f) => {
                    eprintln!("error: {f}");
                    exit_code(f.class())
                }
            }
        }
    }
}
