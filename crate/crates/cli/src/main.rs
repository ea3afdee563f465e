//! Command-line front end for the qubit-in-a-random-matrix-environment
//! simulation library.
//!
//! Six subcommands cover the study's experiments: `simulate` (ensemble
//! dynamics), `theory` (linear-response predictions), `compare`
//! (simulation vs exponentiated theory), `dmax-grid` (accuracy map over
//! the parameter plane), `spectra-stats` (level-spacing statistics), and
//! `spectra-compare` (purity under correlated vs uncorrelated spectra).
//! Parameters come from built-in presets (`--preset fig1` .. `fig7`),
//! JSON config files, and flag overrides, with flags winning. Every run
//! writes a meta.json that reproduces it bitwise via `--config`.

mod commands;
mod config;
mod output;
mod stats;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{
    apply_scale, config_error, load_config, parse_init, preset, CommandKind, CouplingCfg, Failure,
    RunConfig, SpectrumCfg,
};

#[derive(Parser)]
#[command(
    name = "rmt-decohere",
    version,
    about = "Single-qubit decoherence in a random-matrix environment: \
             ensemble simulation and linear-response theory"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Average the reduced qubit dynamics over an ensemble of environments
    Simulate(CommonOpts),
    /// Evaluate linear-response and exponentiated predictions on a time grid
    Theory(CommonOpts),
    /// Map the worst-case simulation/theory trace distance over (delta, mu)
    #[command(name = "dmax-grid")]
    DmaxGrid(CommonOpts),
    /// Level-spacing statistics of the sampled environment spectra
    #[command(name = "spectra-stats")]
    SpectraStats(CommonOpts),
    /// Time-resolved trace distance between simulation and theory
    Compare(CommonOpts),
    /// Purity under GUE vs Poisson spectra for +x and +z initial states
    #[command(name = "spectra-compare")]
    SpectraCompare(CommonOpts),
}

impl Command {
    fn kind(&self) -> CommandKind {
        match self {
            Command::Simulate(_) => CommandKind::Simulate,
            Command::Theory(_) => CommandKind::Theory,
            Command::DmaxGrid(_) => CommandKind::DmaxGrid,
            Command::SpectraStats(_) => CommandKind::SpectraStats,
            Command::Compare(_) => CommandKind::Compare,
            Command::SpectraCompare(_) => CommandKind::SpectraCompare,
        }
    }

    fn opts(&self) -> &CommonOpts {
        match self {
            Command::Simulate(o)
            | Command::Theory(o)
            | Command::DmaxGrid(o)
            | Command::SpectraStats(o)
            | Command::Compare(o)
            | Command::SpectraCompare(o) => o,
        }
    }
}

#[derive(Args)]
struct CommonOpts {
    /// JSON config file (a meta.json from an earlier run works too)
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in parameter set: fig1 .. fig7
    #[arg(long)]
    preset: Option<String>,
    /// Master seed for all random draws
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: machine parallelism)
    #[arg(long)]
    threads: Option<usize>,
    /// Desk-scale divisor applied to env_dim and n_run
    #[arg(long, allow_negative_numbers = true)]
    scale: Option<f64>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Qubit level splitting
    #[arg(long, allow_negative_numbers = true)]
    delta: Option<f64>,
    /// Coupling strength
    #[arg(long, allow_negative_numbers = true)]
    mu: Option<f64>,
    /// Environment dimension
    #[arg(long)]
    env_dim: Option<usize>,
    /// Number of ensemble realizations
    #[arg(long)]
    n_run: Option<usize>,
    /// Final grid time
    #[arg(long, allow_negative_numbers = true)]
    t_max: Option<f64>,
    /// Number of grid points
    #[arg(long)]
    n_points: Option<usize>,
    /// Initial state: +x, -y, mixed, ... or rx,ry,rz
    #[arg(long)]
    init: Option<String>,
    /// Coupling axis: x or z
    #[arg(long)]
    coupling: Option<String>,
    /// Spectrum statistics: gue or poisson
    #[arg(long)]
    spectrum: Option<String>,
    /// Asymptotic polarization for exponentiated population predictions
    #[arg(long, allow_negative_numbers = true)]
    fit_b: Option<f64>,
    /// Comma-separated delta list (dmax-grid)
    #[arg(long)]
    deltas: Option<String>,
    /// Comma-separated mu list (dmax-grid)
    #[arg(long)]
    mus: Option<String>,
    /// Number of spectra to pool (spectra-stats)
    #[arg(long)]
    n_spectra: Option<usize>,
    /// Histogram bins (spectra-stats)
    #[arg(long)]
    bins: Option<usize>,
}

fn parse_list(name: &str, text: &str) -> Result<Vec<f64>, Failure> {
    text.split(',')
        .map(|part| {
            part.trim()
                .parse::<f64>()
                .map_err(|e| config_error(anyhow::anyhow!("bad {name} entry '{part}': {e}")))
        })
        .collect()
}

/// Build the resolved config: preset or file or defaults, then flag
/// overrides, then the desk-scale divisor. Returns the config and the
/// scale factor that was applied.
fn resolve_config(kind: CommandKind, opts: &CommonOpts) -> Result<(RunConfig, f64), Failure> {
    let mut cfg = if let Some(name) = &opts.preset {
        let (preset_kind, cfg) = preset(name)
            .ok_or_else(|| config_error(anyhow::anyhow!("unknown preset '{name}'")))?;
        if preset_kind != kind {
            return Err(config_error(anyhow::anyhow!(
                "preset '{name}' belongs to the '{}' subcommand",
                preset_kind.name()
            )));
        }
        cfg
    } else if let Some(path) = &opts.config {
        load_config(path)?
    } else {
        RunConfig::default()
    };

    if let Some(seed) = opts.seed {
        cfg.master_seed = seed;
    }
    if let Some(scale) = opts.scale {
        cfg.scale = scale;
    }
    if let Some(out) = &opts.out {
        cfg.out_dir = out.clone();
    }
    if let Some(delta) = opts.delta {
        cfg.delta = delta;
    }
    if let Some(mu) = opts.mu {
        cfg.mu = mu;
    }
    if let Some(env_dim) = opts.env_dim {
        cfg.env_dim = env_dim;
    }
    if let Some(n_run) = opts.n_run {
        cfg.n_run = n_run;
    }
    if let Some(t_max) = opts.t_max {
        cfg.t_max = t_max;
    }
    if let Some(n_points) = opts.n_points {
        cfg.n_points = n_points;
    }
    if let Some(init) = &opts.init {
        cfg.init = parse_init(init).map_err(|e| config_error(anyhow::anyhow!(e)))?;
    }
    if let Some(coupling) = &opts.coupling {
        cfg.coupling_axis = coupling
            .parse::<CouplingCfg>()
            .map_err(|e| config_error(anyhow::anyhow!(e)))?;
    }
    if let Some(spectrum) = &opts.spectrum {
        cfg.spectrum = spectrum
            .parse::<SpectrumCfg>()
            .map_err(|e| config_error(anyhow::anyhow!(e)))?;
    }
    if let Some(fit_b) = opts.fit_b {
        cfg.fit_b = Some(fit_b);
    }
    if let Some(deltas) = &opts.deltas {
        cfg.deltas = Some(parse_list("deltas", deltas)?);
    }
    if let Some(mus) = &opts.mus {
        cfg.mus = Some(parse_list("mus", mus)?);
    }
    if let Some(n_spectra) = opts.n_spectra {
        cfg.n_spectra = Some(n_spectra);
    }
    if let Some(bins) = opts.bins {
        cfg.bins = Some(bins);
    }

    let scale_applied = apply_scale(&mut cfg)?;
    cfg.validate(kind)?;
    Ok((cfg, scale_applied))
}

fn dispatch(kind: CommandKind, cfg: &RunConfig, scale_applied: f64) -> Result<(), Failure> {
    match kind {
        CommandKind::Simulate => commands::cmd_simulate(cfg, scale_applied),
        CommandKind::Theory => commands::cmd_theory(cfg, scale_applied),
        CommandKind::DmaxGrid => commands::cmd_dmax_grid(cfg, scale_applied),
        CommandKind::SpectraStats => commands::cmd_spectra_stats(cfg, scale_applied),
        CommandKind::Compare => commands::cmd_compare(cfg, scale_applied),
        CommandKind::SpectraCompare => commands::cmd_spectra_compare(cfg, scale_applied),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let kind = cli.command.kind();
    let opts = cli.command.opts();
    let (cfg, scale_applied) = resolve_config(kind, opts)?;

    match opts.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| config_error(anyhow::anyhow!("cannot build thread pool: {e}")))?;
            pool.install(|| dispatch(kind, &cfg, scale_applied))
        }
        None => dispatch(kind, &cfg, scale_applied),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {:#}", failure.error);
            ExitCode::from(failure.code)
        }
    }
}
