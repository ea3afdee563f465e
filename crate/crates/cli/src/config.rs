//! Run configuration: JSON files, built-in presets, flag overrides, and
//! the failure type that maps errors onto process exit codes.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use rmt_decohere_core::ensembles::SpectrumKind;
use rmt_decohere_core::model::{CouplingAxis, InitialState, ModelParams};
use rmt_decohere_core::propagation::TimeGrid;

/// Version stamp written into every meta.json.
pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Exit codes: 2 for configuration problems, 3 for numerical or I/O
/// failures during a run.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

pub fn config_error(error: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: 2,
        error: error.into(),
    }
}

pub fn runtime_error(error: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: 3,
        error: error.into(),
    }
}

/// Which experiment a subcommand runs; echoed into meta.json and checked
/// against an `experiment` field if a config file carries one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Simulate,
    Theory,
    DmaxGrid,
    SpectraStats,
    Compare,
    SpectraCompare,
}

impl CommandKind {
    pub fn name(&self) -> &'static str {
        match self {
            CommandKind::Simulate => "simulate",
            CommandKind::Theory => "theory",
            CommandKind::DmaxGrid => "dmax-grid",
            CommandKind::SpectraStats => "spectra-stats",
            CommandKind::Compare => "compare",
            CommandKind::SpectraCompare => "spectra-compare",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectrumCfg {
    Gue,
    Poisson,
}

impl SpectrumCfg {
    pub fn kind(self) -> SpectrumKind {
        match self {
            SpectrumCfg::Gue => SpectrumKind::GueUnfolded,
            SpectrumCfg::Poisson => SpectrumKind::PoissonUniform,
        }
    }
}

impl FromStr for SpectrumCfg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gue" => Ok(SpectrumCfg::Gue),
            "poisson" => Ok(SpectrumCfg::Poisson),
            other => Err(format!("unknown spectrum '{other}' (expected gue|poisson)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplingCfg {
    X,
    Z,
}

impl CouplingCfg {
    pub fn axis(self) -> CouplingAxis {
        match self {
            CouplingCfg::X => CouplingAxis::X,
            CouplingCfg::Z => CouplingAxis::Z,
        }
    }
}

impl FromStr for CouplingCfg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "x" => Ok(CouplingCfg::X),
            "z" => Ok(CouplingCfg::Z),
            other => Err(format!("unknown coupling axis '{other}' (expected x|z)")),
        }
    }
}

/// Parse an initial state given as a named direction or a Bloch triple.
pub fn parse_init(s: &str) -> Result<[f64; 3], String> {
    match s {
        "+x" | "x" => return Ok([1.0, 0.0, 0.0]),
        "-x" => return Ok([-1.0, 0.0, 0.0]),
        "+y" | "y" => return Ok([0.0, 1.0, 0.0]),
        "-y" => return Ok([0.0, -1.0, 0.0]),
        "+z" | "z" => return Ok([0.0, 0.0, 1.0]),
        "-z" => return Ok([0.0, 0.0, -1.0]),
        "mixed" => return Ok([0.0, 0.0, 0.0]),
        _ => {}
    }
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!(
            "initial state '{s}' is neither a named direction (+x, -y, mixed, ...) nor rx,ry,rz"
        ));
    }
    let mut bloch = [0.0; 3];
    for (slot, part) in bloch.iter_mut().zip(&parts) {
        *slot = part
            .trim()
            .parse::<f64>()
            .map_err(|e| format!("bad Bloch component '{part}': {e}"))?;
    }
    Ok(bloch)
}

const EIGHT_PI: f64 = 8.0 * std::f64::consts::PI;

/// Full description of one run. Serialized as-is into meta.json, so a
/// meta.json can be fed back through `--config` to reproduce a run.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Qubit level splitting, in units of the mean level spacing over 2 pi.
    pub delta: f64,
    /// Dimensionless coupling strength.
    pub mu: f64,
    /// Environment Hilbert-space dimension.
    pub env_dim: usize,
    /// Qubit operator the environment couples to.
    pub coupling_axis: CouplingCfg,
    /// Environment spectrum statistics.
    pub spectrum: SpectrumCfg,
    /// Initial qubit Bloch vector.
    pub init: [f64; 3],
    /// Final time of the uniform grid (starts at 0).
    pub t_max: f64,
    /// Number of grid points, endpoints included.
    pub n_points: usize,
    /// Number of ensemble realizations to average.
    pub n_run: usize,
    /// Seed of the counter-based random streams; together with the
    /// parameters it pins every draw bitwise.
    pub master_seed: u64,
    /// Output directory for CSV and meta.json files.
    pub out_dir: PathBuf,
    /// Desk-scale divisor applied to env_dim and n_run at load time;
    /// stored back as 1.0 so a reloaded meta.json is not rescaled twice.
    pub scale: f64,
    /// Asymptotic polarization for exponentiated population predictions;
    /// fitted from the simulation when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit_b: Option<f64>,
    /// Level-splitting list for the accuracy-map grid.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub deltas: Option<Vec<f64>>,
    /// Coupling list for the accuracy-map grid.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mus: Option<Vec<f64>>,
    /// Number of spectra pooled by spectra-stats.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_spectra: Option<usize>,
    /// Histogram bins for spectra-stats.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,
    /// Experiment name; when present it must match the subcommand.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub experiment: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            delta: 1.0,
            mu: 0.1,
            env_dim: 200,
            coupling_axis: CouplingCfg::X,
            spectrum: SpectrumCfg::Gue,
            init: [1.0, 0.0, 0.0],
            t_max: EIGHT_PI,
            n_points: 512,
            n_run: 300,
            master_seed: 7,
            out_dir: PathBuf::from("out"),
            scale: 1.0,
            fit_b: None,
            deltas: None,
            mus: None,
            n_spectra: None,
            bins: None,
            experiment: None,
        }
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "delta={} mu={} env_dim={} n_run={} seed={}",
            self.delta, self.mu, self.env_dim, self.n_run, self.master_seed
        )
    }
}

impl RunConfig {
    /// Check every invariant a run relies on; called after all overrides
    /// are applied.
    pub fn validate(&self, kind: CommandKind) -> Result<(), Failure> {
        let fail = |msg: String| Err(config_error(anyhow::anyhow!(msg)));
        if !self.delta.is_finite() || self.delta <= 0.0 {
            return fail(format!("delta must be positive and finite, got {}", self.delta));
        }
        if !self.mu.is_finite() || self.mu < 0.0 {
            return fail(format!("mu must be non-negative and finite, got {}", self.mu));
        }
        if self.env_dim < 2 {
            return fail(format!("env_dim must be at least 2, got {}", self.env_dim));
        }
        if !self.t_max.is_finite() || self.t_max <= 0.0 {
            return fail(format!("t_max must be positive and finite, got {}", self.t_max));
        }
        if self.n_points < 2 {
            return fail(format!("n_points must be at least 2, got {}", self.n_points));
        }
        if self.n_run < 1 {
            return fail(format!("n_run must be at least 1, got {}", self.n_run));
        }
        let norm2: f64 = self.init.iter().map(|r| r * r).sum();
        if norm2 > 1.0 + 1e-9 {
            return fail(format!(
                "initial Bloch vector {:?} lies outside the unit ball",
                self.init
            ));
        }
        if let Some(b) = self.fit_b {
            if !(0.0..1.0).contains(&b) {
                return fail(format!("fit_b must lie in [0, 1), got {b}"));
            }
        }
        if let Some(name) = &self.experiment {
            if name != kind.name() {
                return fail(format!(
                    "config is for experiment '{}' but the subcommand is '{}'",
                    name,
                    kind.name()
                ));
            }
        }
        Ok(())
    }

    /// Model parameters, initial state, and time grid, ready for the
    /// propagation layer.
    pub fn model_pieces(&self) -> Result<(ModelParams, InitialState, TimeGrid), Failure> {
        let params = ModelParams {
            delta: self.delta,
            mu: self.mu,
            env_dim: self.env_dim,
            coupling_axis: self.coupling_axis.axis(),
            spectrum_kind: self.spectrum.kind(),
        };
        params.validate().map_err(config_error)?;
        let init = InitialState::new(self.init).map_err(config_error)?;
        let grid = TimeGrid::uniform(self.t_max, self.n_points).map_err(config_error)?;
        Ok((params, init, grid))
    }
}

/// Built-in parameter sets reproducing each figure of the study at full
/// scale; combine with `--scale` for desk-scale runs.
pub fn preset(name: &str) -> Option<(CommandKind, RunConfig)> {
    let base = RunConfig::default();
    let fig6_deltas = vec![0.25, 0.5, 0.8, 1.0, 1.5, 2.0];
    let fig6_mus = vec![0.05, 0.1, 0.15, 0.2, 0.25, 0.3];
    Some(match name {
        // Coherence decay of the +x eigenstate at delta = 1, mu = 0.1.
        "fig1" => (CommandKind::Simulate, base),
        "fig2" => (
            CommandKind::Simulate,
            RunConfig {
                init: [0.0, 1.0, 0.0],
                ..base
            },
        ),
        // Population decay toward the residual polarization.
        "fig3" => (
            CommandKind::Simulate,
            RunConfig {
                init: [0.0, 0.0, 1.0],
                ..base
            },
        ),
        // GUE vs Poisson purity at small splitting.
        "fig4" => (
            CommandKind::SpectraCompare,
            RunConfig {
                delta: 0.25,
                ..base
            },
        ),
        // Trace distance between simulation and exponentiated theory.
        "fig5" => (
            CommandKind::Compare,
            RunConfig {
                mu: 0.25,
                env_dim: 300,
                init: [0.0, 1.0, 0.0],
                ..base
            },
        ),
        // Accuracy map over the (delta, mu) plane.
        "fig6" => (
            CommandKind::DmaxGrid,
            RunConfig {
                init: [0.0, 1.0, 0.0],
                deltas: Some(fig6_deltas),
                mus: Some(fig6_mus),
                ..base
            },
        ),
        // Equilibrium away from the Bloch-sphere center at small splitting.
        "fig7" => (
            CommandKind::Simulate,
            RunConfig {
                delta: 0.25,
                ..base
            },
        ),
        _ => return None,
    })
}

/// Load a config file. A meta.json from an earlier run is accepted too:
/// its embedded `config` object is used, which reproduces that run
/// bitwise.
pub fn load_config(path: &Path) -> Result<RunConfig, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_error(anyhow::anyhow!("cannot read {}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| config_error(anyhow::anyhow!("{}: {e}", path.display())))?;
    match value.get("config") {
        Some(inner) => serde_json::from_value(inner.clone())
            .map_err(|e| config_error(anyhow::anyhow!("{} (config object): {e}", path.display()))),
        // Plain config: deserialize from the text so errors carry
        // line and column.
        None => serde_json::from_str(&text)
            .map_err(|e| config_error(anyhow::anyhow!("{}: {e}", path.display()))),
    }
}

/// Apply the desk-scale divisor to the expensive dimensions, keeping the
/// stored scale at 1.0 so the resolved config is idempotent. Returns the
/// factor that was applied.
pub fn apply_scale(cfg: &mut RunConfig) -> Result<f64, Failure> {
    let scale = cfg.scale;
    if !scale.is_finite() || scale < 1.0 {
        return Err(config_error(anyhow::anyhow!(
            "scale must be a finite factor >= 1, got {scale}"
        )));
    }
    if scale > 1.0 {
        cfg.env_dim = ((cfg.env_dim as f64 / scale).round() as usize).max(2);
        cfg.n_run = ((cfg.n_run as f64 / scale).round() as usize).max(1);
    }
    cfg.scale = 1.0;
    Ok(scale)
}
