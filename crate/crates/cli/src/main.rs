//! `chaoscomm` command-line frontend.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chaoscomm::analysis::{self, BoundsQuery, BoundsReport};
use chaoscomm::channel_sim::{run_campaign, worker_limit_from_env, Metrics, SimConfig};
use chaoscomm::config::{ConfigError, ExperimentConfig, Scheme};
use chaoscomm::output;
use chaoscomm::MapKind;
use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "chaoscomm", version, about = "Chaos-based coded modulation with adaptive feedback")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the distance constant, anytime exponent and noise threshold.
    Bounds(BoundsArgs),
    /// Print the tangential-sphere bound as a `d,bound` CSV.
    Tsb(TsbArgs),
    /// Run one Monte-Carlo campaign and write its CSV/JSON outputs.
    Simulate(CampaignArgs),
    /// Run campaigns over maps × noise levels and write `sweep.csv`.
    Sweep(CampaignArgs),
    /// Print the anytime exponent needed to stabilize `x' = A x`.
    ControlThreshold(ControlArgs),
}

#[derive(Debug, Args)]
struct BoundsArgs {
    #[arg(long, default_value = "size")]
    scheme: String,
    #[arg(long, default_value = "bsm")]
    map: String,
    #[arg(long, default_value_t = 2.0)]
    gamma0: f64,
    #[arg(long = "mr", default_value_t = 5)]
    m_r: usize,
    #[arg(long, default_value_t = 3)]
    d0: usize,
    #[arg(long)]
    sigma2: Option<f64>,
    /// Number of points in the auxiliary curves.
    #[arg(long, default_value_t = 0)]
    curve_len: usize,
}

#[derive(Debug, Args)]
struct TsbArgs {
    #[arg(long, default_value = "bsm")]
    map: String,
    #[arg(long, default_value_t = 2.0)]
    gamma0: f64,
    /// Bit position.
    #[arg(short, long, default_value_t = 1)]
    n: usize,
    #[arg(long)]
    sigma2: f64,
    #[arg(long, default_value_t = 30)]
    d_max: usize,
    /// Seed for prefix sampling when `n > 12`.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct CampaignArgs {
    /// Flat `key = value` configuration file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    map: Option<String>,
    /// Maps visited by `sweep`, comma-separated.
    #[arg(long)]
    maps: Option<String>,
    /// Noise variances, comma-separated.
    #[arg(long)]
    sigma2: Option<String>,
    #[arg(long)]
    gamma0: Option<String>,
    #[arg(long = "mr")]
    m_r: Option<String>,
    /// Reference trajectory length.
    #[arg(long = "traj-len")]
    traj_len: Option<String>,
    #[arg(long = "eval-width")]
    eval_width: Option<String>,
    #[arg(long)]
    block_len: Option<String>,
    #[arg(long)]
    n_blocks: Option<String>,
    #[arg(long)]
    pe_res: Option<String>,
    #[arg(long)]
    d_max: Option<String>,
    #[arg(long)]
    q_max: Option<String>,
    #[arg(long)]
    t_flush: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    out: Option<String>,
}

#[derive(Debug, Args)]
struct ControlArgs {
    /// Whitespace-separated square matrix, one row per line.
    matrix: PathBuf,
}

#[derive(Debug)]
enum CliError {
    Config(String),
    Runtime(String),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<chaoscomm::Error> for CliError {
    fn from(e: chaoscomm::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

fn parse_arg<T: std::str::FromStr>(what: &str, s: &str) -> CliResult<T> {
    s.parse().map_err(|_| CliError::Config(format!("invalid {what} `{s}`")))
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

fn load_config(args: &CampaignArgs) -> CliResult<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            ExperimentConfig::parse(&text)?
        }
        None => ExperimentConfig::default(),
    };
    let overrides = [
        ("scheme", &args.scheme),
        ("map", &args.map),
        ("sweep_maps", &args.maps),
        ("sigma2", &args.sigma2),
        ("gamma0", &args.gamma0),
        ("m_r", &args.m_r),
        ("N", &args.traj_len),
        ("W", &args.eval_width),
        ("block_len", &args.block_len),
        ("n_blocks", &args.n_blocks),
        ("pe_res", &args.pe_res),
        ("d_max", &args.d_max),
        ("q_max", &args.q_max),
        ("t_flush", &args.t_flush),
        ("master_seed", &args.seed),
        ("out", &args.out),
    ];
    for (key, value) in overrides {
        if let Some(v) = value {
            cfg.set(key, v)?;
        }
    }
    cfg.validate()?;
    worker_limit_from_env().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(cfg)
}

fn bounds_table(r: &BoundsReport) -> String {
    let opt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.6}"));
    let mut s = String::new();
    writeln!(s, "scheme      {}", r.scheme).unwrap();
    writeln!(s, "map         {}", r.map).unwrap();
    if r.beta_satisfied {
        writeln!(s, "beta        {:.6e}", r.beta).unwrap();
    } else {
        writeln!(s, "beta        not satisfied (inverse CDF slope vanishes)").unwrap();
    }
    writeln!(s, "gamma_bar   {}", opt(r.gamma_bar)).unwrap();
    writeln!(s, "sigma2_sup  {}", opt(r.sigma2_sup)).unwrap();
    writeln!(s, "d0          {}", r.d0).unwrap();
    s
}

fn bounds_csv(r: &BoundsReport) -> String {
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    let mut s = String::from("quantity,x,value\n");
    writeln!(s, "beta,,{}", r.beta).unwrap();
    writeln!(s, "beta_satisfied,,{}", r.beta_satisfied).unwrap();
    writeln!(s, "gamma_bar,,{}", opt(r.gamma_bar)).unwrap();
    writeln!(s, "sigma2_sup,,{}", opt(r.sigma2_sup)).unwrap();
    writeln!(s, "d0,,{}", r.d0).unwrap();
    for (name, pts) in &r.curves {
        for (x, y) in pts {
            writeln!(s, "{name},{x},{y:e}").unwrap();
        }
    }
    s
}

fn cmd_bounds(a: &BoundsArgs) -> CliResult<()> {
    let scheme: Scheme = a.scheme.parse()?;
    let map: MapKind = parse_arg("map", &a.map)?;
    if !(a.gamma0 > 0.0) || a.m_r == 0 || a.sigma2.is_some_and(|s| !(s > 0.0)) {
        return Err(CliError::Config("gamma0, mr and sigma2 must be positive".into()));
    }
    let query = BoundsQuery { scheme, map, gamma0: a.gamma0, m_r: a.m_r, d0: a.d0, sigma2: a.sigma2, curve_len: a.curve_len };
    let report = analysis::bounds_report(&query)?;
    print!("{}\n{}", bounds_table(&report), bounds_csv(&report));
    Ok(())
}

fn cmd_tsb(a: &TsbArgs) -> CliResult<()> {
    let map: MapKind = parse_arg("map", &a.map)?;
    if !(a.sigma2 > 0.0) || a.n == 0 || a.d_max == 0 || !(a.gamma0 > 0.0) {
        return Err(CliError::Config("sigma2, n, d_max and gamma0 must be positive".into()));
    }
    let mut s = String::from("d,bound,std_error\n");
    for d in 1..=a.d_max {
        let t = analysis::tsb(a.n, d, a.sigma2, map, a.gamma0, a.seed)?;
        let se = t.std_error.map_or(String::new(), |v| format!("{v:e}"));
        writeln!(s, "{d},{:e},{se}", t.value).unwrap();
    }
    print!("{s}");
    Ok(())
}

fn write_file(dir: &Path, name: &str, contents: &str) -> CliResult<()> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| io_err(&path, e))
}

fn run(cfg: &SimConfig, n_blocks: usize) -> CliResult<Metrics> {
    let m = run_campaign(cfg, n_blocks)?;
    if m.steps == 0 {
        return Err(CliError::Runtime("campaign produced no data steps".into()));
    }
    Ok(m)
}

fn cmd_simulate(a: &CampaignArgs) -> CliResult<()> {
    let cfg = load_config(a)?;
    let [sigma2] = cfg.sigma2[..] else {
        return Err(CliError::Config(format!("simulate takes one sigma2, got {}; use sweep for lists", cfg.sigma2.len())));
    };
    let sim = SimConfig::from_experiment(&cfg, cfg.map, sigma2);
    let m = run(&sim, cfg.n_blocks)?;
    fs::create_dir_all(&cfg.out).map_err(|e| io_err(&cfg.out, e))?;
    write_file(&cfg.out, "ber_by_position.csv", &output::ber_by_position_csv(&m))?;
    write_file(&cfg.out, "ber_avg.csv", &output::ber_avg_csv(&m))?;
    write_file(&cfg.out, "efficiency_hist.csv", &output::efficiency_hist_csv(&m))?;
    write_file(&cfg.out, "summary.json", &output::summary_json(&m, &sim))?;
    println!(
        "{} {} sigma2={} blocks={}: mean_d={:.4} std_d={:.4} snr_db={:.3} residual_rate={:.3e}",
        sim.scheme,
        sim.map,
        sigma2,
        m.n_blocks,
        m.mean_d(),
        m.std_d(),
        m.snr_db(),
        m.residual_rate()
    );
    Ok(())
}

fn cmd_sweep(a: &CampaignArgs) -> CliResult<()> {
    let cfg = load_config(a)?;
    let mut csv = format!("{}\n", output::SWEEP_HEADER);
    for &map in &cfg.sweep_maps {
        for &sigma2 in &cfg.sigma2 {
            let sim = SimConfig::from_experiment(&cfg, map, sigma2);
            let m = run(&sim, cfg.n_blocks)?;
            let row = output::sweep_row(&sim, &m);
            print!("{row}");
            csv.push_str(&row);
        }
    }
    fs::create_dir_all(&cfg.out).map_err(|e| io_err(&cfg.out, e))?;
    write_file(&cfg.out, "sweep.csv", &csv)
}

fn parse_matrix(text: &str) -> CliResult<Vec<Vec<f64>>> {
    text.lines().filter(|l| !l.trim().is_empty()).map(|l| l.split_whitespace().map(|v| parse_arg("matrix entry", v)).collect()).collect()
}

fn cmd_control(a: &ControlArgs) -> CliResult<()> {
    let text = fs::read_to_string(&a.matrix).map_err(|e| CliError::Config(format!("{}: {e}", a.matrix.display())))?;
    let m = parse_matrix(&text)?;
    let g = analysis::required_exponent(&m).map_err(|e| CliError::Config(e.to_string()))?;
    println!("required_exponent {g}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Bounds(a) => cmd_bounds(a),
        Command::Tsb(a) => cmd_tsb(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::ControlThreshold(a) => cmd_control(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
