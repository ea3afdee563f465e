//! Shared fixtures for the criterion benchmarks in `benches/`.

use rmt_decohere_core::ensembles::{EnvironmentDraw, SeedPolicy, SpectrumKind};
use rmt_decohere_core::model::{CouplingAxis, ModelParams};

/// Default model parameters used across the benchmarks.
pub fn bench_params(env_dim: usize) -> ModelParams {
    ModelParams {
        delta: 1.0,
        mu: 0.1,
        env_dim,
        coupling_axis: CouplingAxis::X,
        spectrum_kind: SpectrumKind::GueUnfolded,
    }
}

/// A deterministic environment draw, so benchmark inputs never vary.
pub fn bench_draw(env_dim: usize) -> EnvironmentDraw {
    EnvironmentDraw::sample(env_dim, SpectrumKind::GueUnfolded, &SeedPolicy::new(5, 0)).unwrap()
}
