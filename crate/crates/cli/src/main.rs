//! `wsnmp`: command-line front end for the myopic sensing-transmission
//! policies, the simulator and the DP baselines.
//!
//! Exit codes: 0 on success, 2 on invalid input, 3 on runtime failures
//! (solver iteration caps, I/O).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use wsn_myopic::coordinated::{coord_mp, lambda_threshold, CoordChoice};
use wsn_myopic::decentralized::{dec_mp_b1, dec_mp_solve, myopic_cost, SolverConfig};
use wsn_myopic::dp::{coord_dp, dec_dp, GridSpec};
use wsn_myopic::gamma::AccuracyChain;
use wsn_myopic::sim::{
    policy_structure_dump, simulate, sweep_lambda, CsvRow, RunMetadata, Scheme, SimConfig, SimOutput,
};
use wsn_myopic::{Error, ModelParams};

const THREADS_ENV: &str = "WSNMP_THREADS";

#[derive(Parser)]
#[command(name = "wsnmp", version, about = "Myopic sensing-transmission policies for WSN Kalman estimation")]
#[command(after_help = "Set WSNMP_THREADS to fix the number of worker threads.")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a myopic policy at one or more prior variances.
    Policy(PolicyArgs),
    /// Simulate one scheme at one lambda.
    Simulate(RunArgs),
    /// Simulate one scheme over a list of lambdas.
    Sweep(RunArgs),
    /// Solve a finite-horizon DP and write its value table as JSON.
    Dp(DpArgs),
    /// Tabulate a scheme's decision against the prior variance.
    Structure(StructureArgs),
}

/// Model parameters; unset flags keep the reference values
/// (alpha 0.96, S_A 20, c_TX 1, phi 0.25, B 5, N_S 20).
#[derive(Args, Clone, Default)]
struct ModelArgs {
    #[arg(long)]
    alpha: Option<f64>,
    /// Ambient SNR; `inf` for noiseless sensors.
    #[arg(long)]
    sa: Option<f64>,
    /// Normalised sensing cost phi / c_TX; sets phi from c_TX.
    #[arg(long, conflicts_with = "phi")]
    theta: Option<f64>,
    #[arg(long)]
    ctx: Option<f64>,
    #[arg(long)]
    phi: Option<f64>,
    /// Number of channels.
    #[arg(long)]
    b: Option<usize>,
    /// Number of sensor nodes.
    #[arg(long)]
    ns: Option<usize>,
}

impl ModelArgs {
    fn apply(&self, mut p: ModelParams) -> ModelParams {
        if let Some(x) = self.alpha {
            p.alpha = x;
        }
        if let Some(x) = self.sa {
            p.s_ambient = x;
        }
        if let Some(x) = self.ctx {
            p.c_tx = x;
        }
        if let Some(x) = self.phi {
            p.phi = x;
        }
        if let Some(x) = self.theta {
            p.phi = x * p.c_tx;
        }
        if let Some(x) = self.b {
            p.channels = x;
        }
        if let Some(x) = self.ns {
            p.num_sns = x;
        }
        p
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Csv,
}

#[derive(Args)]
struct PolicyArgs {
    /// coord-mp or dec-mp.
    #[arg(long)]
    scheme: Scheme,
    #[arg(long)]
    lambda: f64,
    /// Prior variances: `0.9`, `0.3,0.9` or `lo:hi:n` (linear).
    #[arg(long)]
    v: String,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
    /// Write the rows to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// JSON config (a SimConfig, or the metadata file of an earlier run).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    scheme: Option<Scheme>,
    #[arg(long)]
    seed: Option<u64>,
    /// Single multiplier (simulate).
    #[arg(long)]
    lambda: Option<f64>,
    /// Multipliers for sweep: `a,b,c` or `lo:hi:n` (log-spaced).
    #[arg(long)]
    lambdas: Option<String>,
    #[arg(long)]
    slots: Option<u64>,
    #[arg(long)]
    replicas: Option<usize>,
    /// JSON accuracy-state chain `{"states": [...], "transition": [[...]]}`.
    #[arg(long)]
    chain: Option<PathBuf>,
    /// Record the slot-by-slot trajectory of replica 0.
    #[arg(long)]
    trajectory: bool,
    #[command(flatten)]
    model: ModelArgs,
    /// Output directory for results.csv and metadata.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DpKind {
    Coord,
    Dec,
}

#[derive(Args, Default)]
struct GridArgs {
    #[arg(long)]
    nv: Option<usize>,
    #[arg(long)]
    nl: Option<usize>,
    #[arg(long)]
    nz: Option<usize>,
    #[arg(long)]
    nm: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
}

impl GridArgs {
    fn apply(&self, mut g: GridSpec) -> GridSpec {
        g.n_v = self.nv.unwrap_or(g.n_v);
        g.n_l = self.nl.unwrap_or(g.n_l);
        g.n_z = self.nz.unwrap_or(g.n_z);
        g.n_m = self.nm.unwrap_or(g.n_m);
        g.horizon = self.horizon.unwrap_or(g.horizon);
        g
    }
}

#[derive(Args)]
struct DpArgs {
    #[arg(long, value_enum)]
    scheme: DpKind,
    #[arg(long)]
    lambda: f64,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Output JSON file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct StructureArgs {
    #[arg(long)]
    scheme: Scheme,
    #[arg(long)]
    lambda: f64,
    /// Prior variances: `0.9`, `0.3,0.9` or `lo:hi:n` (linear).
    #[arg(long, default_value = "0.04:1:97")]
    v: String,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Output CSV file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum CliError {
    Invalid(String),
    Runtime(String),
}

type CliResult<T> = std::result::Result<T, CliError>;

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::NoConvergence { .. } => CliError::Runtime(e.to_string()),
            _ => CliError::Invalid(e.to_string()),
        }
    }
}

fn invalid(flag: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Invalid(format!("invalid {flag}: {msg}"))
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

fn parse_list(flag: &str, text: &str, log: bool) -> CliResult<Vec<f64>> {
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|e| invalid(flag, format!("{s:?}: {e}")))
    };
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() == 3 {
        let (lo, hi) = (num(parts[0])?, num(parts[1])?);
        let n: usize = parts[2]
            .trim()
            .parse()
            .map_err(|e| invalid(flag, format!("count {:?}: {e}", parts[2])))?;
        if n == 0 || !(lo <= hi) || (log && lo <= 0.0) {
            return Err(invalid(flag, format!("bad range {text:?}")));
        }
        if n == 1 {
            return Ok(vec![lo]);
        }
        let t = |i: usize| i as f64 / (n - 1) as f64;
        return Ok((0..n)
            .map(|i| if log { lo * (hi / lo).powf(t(i)) } else { lo + (hi - lo) * t(i) })
            .collect());
    }
    text.split(',').map(num).collect()
}

fn check_params(p: &ModelParams) -> CliResult<()> {
    p.validate().map_err(|e| CliError::Invalid(format!("invalid model flags: {e}")))
}

fn check_lambda(lambda: f64, p: &ModelParams) -> CliResult<()> {
    let lth = lambda_threshold(p.theta(), p.s_ambient);
    if !(lambda > 0.0) {
        return Err(invalid("--lambda", format!("lambda must be > 0, got {lambda}")));
    }
    if lambda > lth {
        return Err(invalid("--lambda", format!("lambda {lambda} exceeds lambda_th {lth:.6}")));
    }
    Ok(())
}

fn write_csv<T: Serialize>(out: Option<&Path>, rows: &[T]) -> CliResult<()> {
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        for r in rows {
            w.serialize(r).map_err(|e| CliError::Runtime(e.to_string()))?;
        }
        w.flush().map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    match out {
        Some(path) => fs::write(path, buf).map_err(|e| io_err(path, e)),
        None => std::io::stdout()
            .write_all(&buf)
            .map_err(|e| CliError::Runtime(e.to_string())),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}

fn read_json<T: serde::de::DeserializeOwned>(flag: &str, path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| invalid(flag, format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| invalid(flag, format!("{}: {e}", path.display())))
}

#[derive(Serialize)]
struct CoordRow {
    v: f64,
    t_active: usize,
    s_meas: f64,
    tie_prob: f64,
    agg_snr: f64,
    objective: f64,
}

#[derive(Serialize)]
struct DecRow {
    v: f64,
    zeta: f64,
    s_meas: f64,
    per_sn_prob: f64,
    cost: f64,
    iterations: usize,
    solver: &'static str,
}

fn cmd_policy(a: &PolicyArgs) -> CliResult<()> {
    let p = a.model.apply(ModelParams::default());
    check_params(&p)?;
    check_lambda(a.lambda, &p)?;
    let vs = parse_list("--v", &a.v, false)?;
    if let Some(v) = vs.iter().find(|&&v| !(v > 0.0 && v <= 1.0)) {
        return Err(invalid("--v", format!("prior variance {v} outside (0, 1]")));
    }
    let table = a.format == Format::Table && a.out.is_none();
    match a.scheme {
        Scheme::CoordMp => {
            let mut rows = Vec::new();
            for &v in &vs {
                let choice = coord_mp(v, a.lambda, &p, &[])?;
                let objective = choice.objective(v, a.lambda, &p);
                let ds = match choice {
                    CoordChoice::Fixed(d) => vec![d],
                    CoordChoice::Tie { upper, lower } => vec![upper, lower],
                };
                for d in ds {
                    rows.push(CoordRow {
                        v,
                        t_active: d.t_active,
                        s_meas: d.s_meas,
                        tie_prob: d.tie_prob,
                        agg_snr: d.agg_snr(p.s_ambient),
                        objective,
                    });
                }
            }
            if table {
                println!("{:>10} {:>8} {:>12} {:>8} {:>12} {:>12}", "v", "t_active", "s_meas", "tie_prob", "agg_snr", "objective");
                for r in &rows {
                    println!(
                        "{:>10.6} {:>8} {:>12.6} {:>8.3} {:>12.6} {:>12.8}",
                        r.v, r.t_active, r.s_meas, r.tie_prob, r.agg_snr, r.objective
                    );
                }
                Ok(())
            } else {
                write_csv(a.out.as_deref(), &rows)
            }
        }
        Scheme::DecMp => {
            let cfg = SolverConfig::default();
            let mut rows = Vec::new();
            for &v in &vs {
                let (sol, solver) = if p.channels == 1 {
                    (dec_mp_b1(v, a.lambda, &p, &cfg)?, "closed-form-b1")
                } else {
                    (dec_mp_solve(v, a.lambda, &p, &cfg)?, "alternating-bisection")
                };
                let d = sol.decision;
                rows.push(DecRow {
                    v,
                    zeta: d.zeta,
                    s_meas: d.s_meas,
                    per_sn_prob: d.per_sn_prob,
                    cost: myopic_cost(d.zeta, d.s_meas, v, a.lambda, &p),
                    iterations: sol.iterations,
                    solver,
                });
            }
            if table {
                println!("{:>10} {:>10} {:>12} {:>11} {:>12} {:>5}  solver", "v", "zeta", "s_meas", "per_sn_prob", "cost", "iters");
                for r in &rows {
                    println!(
                        "{:>10.6} {:>10.6} {:>12.6} {:>11.6} {:>12.8} {:>5}  {}",
                        r.v, r.zeta, r.s_meas, r.per_sn_prob, r.cost, r.iterations, r.solver
                    );
                }
                Ok(())
            } else {
                write_csv(a.out.as_deref(), &rows)
            }
        }
        other => Err(invalid("--scheme", format!("policy supports coord-mp and dec-mp, got {other}"))),
    }
}

fn load_config(a: &RunArgs) -> CliResult<SimConfig> {
    let mut cfg = match &a.config {
        Some(path) => {
            let value: serde_json::Value = read_json("--config", path)?;
            let inner = match value.get("config") {
                Some(c) if value.get("version").is_some() => c.clone(),
                _ => value,
            };
            serde_json::from_value(inner).map_err(|e| invalid("--config", format!("{}: {e}", path.display())))?
        }
        None => {
            let scheme = a.scheme.ok_or_else(|| invalid("--scheme", "required without --config"))?;
            let seed = a.seed.ok_or_else(|| invalid("--seed", "required without --config"))?;
            SimConfig::new(scheme, ModelParams::default(), seed)
        }
    };
    if let Some(s) = a.scheme {
        cfg.scheme = s;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(t) = a.slots {
        cfg.slots = t;
    }
    if let Some(r) = a.replicas {
        cfg.replicas = r;
    }
    if let Some(l) = a.lambda {
        cfg.lambda = Some(l);
    }
    if let Some(text) = &a.lambdas {
        cfg.lambdas = parse_list("--lambdas", text, true)?;
    }
    if let Some(path) = &a.chain {
        cfg.chain = Some(read_json::<AccuracyChain>("--chain", path)?);
    }
    cfg.record_trajectory |= a.trajectory;
    cfg.params = a.model.apply(cfg.params);
    check_params(&cfg.params)?;
    cfg.validate()?;
    Ok(cfg)
}

fn write_run(out: &Path, cfg: &SimConfig, results: &[SimOutput]) -> CliResult<()> {
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    let rows: Vec<CsvRow> = results.iter().map(|o| CsvRow::new(&o.perf, cfg.seed)).collect();
    write_csv(Some(&out.join("results.csv")), &rows)?;
    write_json(&out.join("metadata.json"), &RunMetadata::new(cfg))?;
    if let Some(tr) = results.first().and_then(|o| o.trajectory.as_ref()) {
        write_csv(Some(&out.join("trajectory.csv")), tr)?;
    }
    Ok(())
}

fn summary(o: &SimOutput) -> String {
    format!(
        "{} lambda={} mse={:.6} network_cost={:.6} per_sn_cost={:.6} collisions={}",
        o.scheme, o.perf.lambda, o.perf.avg_mse, o.perf.network_cost, o.perf.per_sn_cost, o.collisions
    )
}

fn cmd_simulate(a: &RunArgs) -> CliResult<()> {
    let cfg = load_config(a)?;
    let lambda = cfg.lambda.ok_or_else(|| invalid("--lambda", "required for simulate"))?;
    check_lambda(lambda, &cfg.params)?;
    let out = simulate(&cfg)?;
    if let Some(dir) = &a.out {
        write_run(dir, &cfg, std::slice::from_ref(&out))?;
    }
    println!("{}", summary(&out));
    Ok(())
}

fn cmd_sweep(a: &RunArgs) -> CliResult<()> {
    let cfg = load_config(a)?;
    if cfg.lambdas.is_empty() {
        return Err(invalid("--lambdas", "required for sweep"));
    }
    for &l in &cfg.lambdas {
        check_lambda(l, &cfg.params).map_err(|_| invalid("--lambdas", format!("{l} outside (0, lambda_th]")))?;
    }
    let outs = sweep_lambda(&cfg)?;
    if let Some(dir) = &a.out {
        write_run(dir, &cfg, &outs)?;
    }
    for o in &outs {
        println!("{}", summary(o));
    }
    Ok(())
}

fn cmd_dp(a: &DpArgs) -> CliResult<()> {
    let p = a.model.apply(ModelParams::default());
    check_params(&p)?;
    check_lambda(a.lambda, &p)?;
    let grid = a.grid.apply(GridSpec::default());
    grid.validate()?;
    let table = match a.scheme {
        DpKind::Coord => coord_dp(a.lambda, &p, &grid)?,
        DpKind::Dec => dec_dp(a.lambda, &p, &grid)?,
    };
    write_json(&a.out, &table)?;
    println!(
        "{} stages, {} V nodes, {} evaluations per stage -> {}",
        table.stages(),
        table.v_nodes.len(),
        table.evaluations_per_stage,
        a.out.display()
    );
    Ok(())
}

fn cmd_structure(a: &StructureArgs) -> CliResult<()> {
    let p = a.model.apply(ModelParams::default());
    check_params(&p)?;
    check_lambda(a.lambda, &p)?;
    let vs = parse_list("--v", &a.v, false)?;
    let grid = a.grid.apply(GridSpec::default());
    let rows = policy_structure_dump(a.scheme, a.lambda, &p, &vs, &grid, &SolverConfig::default())?;
    write_csv(a.out.as_deref(), &rows)
}

fn configure_threads() -> CliResult<()> {
    let Ok(text) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = text
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Invalid(format!("invalid {THREADS_ENV}: {text:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Runtime(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match &cli.command {
        Command::Policy(a) => cmd_policy(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Dp(a) => cmd_dp(a),
        Command::Structure(a) => cmd_structure(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Invalid(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
    }
}
