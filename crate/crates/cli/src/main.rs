mod config;
mod run;

use clap::{Args, Parser, Subcommand};
use config::{CliError, Experiment, ExperimentConfig, Format};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "kdvlab", version, about = "Critical lengths, control and obstruction experiments for the linearized KdV equation")]
struct Cli {
    /// Output directory (overrides the config file).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Worker threads for sample-parallel experiments.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Roots of λ³ + λ + iz = 0.
    Roots(Opts),
    /// Real zeros of the Paley-Wiener function H and |H| on a line.
    Spectrum(Opts),
    /// Critical pairs (k, l) with k² + kl + l² ≤ smax.
    Critical(Opts),
    /// Linear or nonlinear simulation driven by a bump control.
    Simulate(Opts),
    /// Empirical frequency response against the closed form.
    Response(Opts),
    /// HUM control toward a named target profile.
    Hum(Opts),
    /// A random null control.
    Nullctl(Opts),
    /// Sign-definiteness of the quadratic form on null controls.
    Obstruction(Opts),
    /// Convergence of the form ratio as T decreases.
    Monotone(Opts),
    /// Nonlinear steering along unreachable directions for large T.
    Steer(Opts),
    /// Toy ODE obstruction.
    Toy(Opts),
    /// Sweep over horizons.
    Sweep(Opts),
    /// Run an experiment described by a TOML config file.
    Run { config: PathBuf },
}

#[derive(Args, Default)]
struct Opts {
    #[arg(long)]
    k: Option<u32>,
    #[arg(long)]
    l: Option<u32>,
    /// Domain length (instead of a critical pair).
    #[arg(long = "L")]
    len: Option<f64>,
    #[arg(long = "N")]
    n: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    /// Horizon; a comma-separated list for sweeps.
    #[arg(long = "T", value_delimiter = ',')]
    t: Vec<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, allow_hyphen_values = true)]
    z: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    z_im: Option<f64>,
    #[arg(long)]
    x: Option<f64>,
    #[arg(long)]
    smax: Option<u64>,
    #[arg(long)]
    zmax: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    amplitude: Option<f64>,
    #[arg(long)]
    nonlinear: bool,
    #[arg(long)]
    every: Option<usize>,
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    tikhonov: Option<f64>,
    #[arg(long)]
    project: bool,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    t_factor: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    angle: Option<f64>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    check: bool,
}

fn from_opts(experiment: Experiment, o: Opts) -> Result<ExperimentConfig, CliError> {
    let mut c = ExperimentConfig::new(experiment);
    c.pair = match (o.k, o.l) {
        (Some(k), Some(l)) => Some([k, l]),
        (None, None) => None,
        _ => return config::bad("pair", "give both --k and --l"),
    };
    c.len = o.len;
    c.grid.n = o.n;
    c.grid.dt = o.dt;
    c.grid.steps = o.steps;
    let sweep = matches!(experiment, Experiment::Obstruction | Experiment::Monotone | Experiment::Sweep);
    if sweep {
        if !o.t.is_empty() {
            c.params.t_list = Some(o.t);
        }
    } else {
        match o.t.as_slice() {
            [] => {}
            [t] => c.grid.t = Some(*t),
            _ => return config::bad("grid.T", "this experiment takes a single horizon"),
        }
    }
    c.sampling.n_samples = o.samples;
    c.sampling.seed = o.seed;
    let p = &mut c.params;
    p.z = o.z;
    p.z_im = o.z_im;
    p.x = o.x;
    p.smax = o.smax;
    p.zmax = o.zmax;
    p.points = o.points;
    p.amplitude = o.amplitude;
    p.nonlinear = o.nonlinear.then_some(true);
    p.every = o.every;
    p.target = o.target;
    p.tikhonov = o.tikhonov;
    p.project = o.project.then_some(true);
    p.rho = o.rho;
    p.t_factor = o.t_factor;
    p.angle = o.angle;
    p.iterations = o.iterations;
    p.check = o.check.then_some(true);
    Ok(c)
}

fn build(cli: Cli) -> Result<ExperimentConfig, CliError> {
    use Experiment as E;
    let mut cfg = match cli.cmd {
        Cmd::Run { config } => ExperimentConfig::load(&config)?,
        Cmd::Roots(o) => from_opts(E::Roots, o)?,
        Cmd::Spectrum(o) => from_opts(E::Spectrum, o)?,
        Cmd::Critical(o) => from_opts(E::Critical, o)?,
        Cmd::Simulate(o) => from_opts(E::Simulate, o)?,
        Cmd::Response(o) => from_opts(E::Response, o)?,
        Cmd::Hum(o) => from_opts(E::Hum, o)?,
        Cmd::Nullctl(o) => from_opts(E::Nullctl, o)?,
        Cmd::Obstruction(o) => from_opts(E::Obstruction, o)?,
        Cmd::Monotone(o) => from_opts(E::Monotone, o)?,
        Cmd::Steer(o) => from_opts(E::Steer, o)?,
        Cmd::Toy(o) => from_opts(E::Toy, o)?,
        Cmd::Sweep(o) => from_opts(E::Sweep, o)?,
    };
    if let Some(d) = cli.out {
        cfg.output.dir = d;
    }
    if let Some(f) = cli.format {
        cfg.output.format = f;
    }
    cfg.apply_env()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(j) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(j.max(1)).build_global() {
            eprintln!("kdvlab: error: {e}");
            return ExitCode::from(1);
        }
    }
    let result = build(cli).and_then(|cfg| run::run_and_write(&cfg).map(|o| (cfg, o)));
    match result {
        Ok((cfg, o)) => {
            println!("{}", o.summary);
            println!("artifacts written to {}", cfg.output.dir.display());
            if o.passed {
                ExitCode::SUCCESS
            } else {
                eprintln!("kdvlab: check failed");
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("kdvlab: error: {e}");
            ExitCode::from(1)
        }
    }
}
