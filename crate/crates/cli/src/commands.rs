//! Implementations of the six subcommands. Each writes one CSV (or a CSV
//! plus a stats file) and a meta.json that reproduces the run bitwise.

use std::time::Instant;

use log::info;
use num_complex::Complex64;

use rmt_decohere_core::ensembles::{sample_spectrum, spacing_histogram, SeedPolicy, SpectrumKind};
use rmt_decohere_core::linear_response::{
    elr_predict, fit_elr_offset, lr_predict, LrCase, LrCurve,
};
use rmt_decohere_core::model::{qubit_density, InitialState};
use rmt_decohere_core::observables::{
    bloch, purity_series, trace_distance, BlochTrajectory,
};
use rmt_decohere_core::propagation::{run_ensemble, AveragedSeries, TimeGrid};

use crate::config::{
    config_error, runtime_error, CommandKind, CouplingCfg, Failure, RunConfig, SpectrumCfg,
};
use crate::output::{fmt_f64, write_csv, write_meta, Meta};
use crate::stats;

fn run_simulation(cfg: &RunConfig) -> Result<AveragedSeries, Failure> {
    let (params, init, grid) = cfg.model_pieces()?;
    let started = Instant::now();
    let series = run_ensemble(&params, &init, &grid, cfg.n_run, cfg.master_seed)
        .map_err(runtime_error)?;
    info!(
        "averaged {} realizations ({}) in {:.1?}",
        cfg.n_run,
        cfg,
        started.elapsed()
    );
    Ok(series)
}

/// Reduced dynamics of the averaged state on a uniform time grid.
pub fn cmd_simulate(cfg: &RunConfig, scale_applied: f64) -> Result<(), Failure> {
    let series = run_simulation(cfg)?;
    let traj = BlochTrajectory::from_series(&series);
    let purity = purity_series(&series);
    let rows: Vec<String> = series
        .grid
        .points()
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let rho = &series.mean_rho[k];
            let [x, y, z] = traj.vectors[k];
            let (p, p_err) = purity[k];
            [
                t,
                rho[(0, 0)].re,
                rho[(0, 0)].im,
                rho[(1, 0)].re,
                rho[(1, 0)].im,
                p,
                p_err,
                x,
                y,
                z,
            ]
            .map(fmt_f64)
            .join(",")
        })
        .collect();
    write_csv(
        &cfg.out_dir,
        "series.csv",
        "t,re_rho11,im_rho11,re_rho21,im_rho21,purity,stderr_purity,x,y,z",
        &rows,
    )?;
    write_meta(&cfg.out_dir, &Meta::new(CommandKind::Simulate, scale_applied, cfg))?;
    Ok(())
}

/// Linear-response and exponentiated predictions for all four cases.
/// The CSV holds interaction-picture values; the population case uses
/// `fit_b` (default 0, i.e. no residual polarization) for its
/// exponentiated column.
pub fn cmd_theory(cfg: &RunConfig, scale_applied: f64) -> Result<(), Failure> {
    let grid = TimeGrid::uniform(cfg.t_max, cfg.n_points).map_err(config_error)?;
    let fit_b = cfg.fit_b.unwrap_or(0.0);
    let mut rows = Vec::with_capacity(4 * grid.len());
    for case in LrCase::ALL {
        let b = (case == LrCase::ZInit).then_some(fit_b);
        for &t in grid.points() {
            let lr = lr_predict(case, t, cfg.delta, cfg.mu).map_err(runtime_error)?;
            let elr = elr_predict(case, t, cfg.delta, cfg.mu, b).map_err(runtime_error)?;
            rows.push(format!(
                "{},{},{},{},{},{}",
                fmt_f64(t),
                case.label(),
                fmt_f64(lr.re),
                fmt_f64(lr.im),
                fmt_f64(elr.re),
                fmt_f64(elr.im),
            ));
        }
    }
    write_csv(
        &cfg.out_dir,
        "theory.csv",
        "t,case,re_lr,im_lr,re_elr,im_elr",
        &rows,
    )?;
    write_meta(&cfg.out_dir, &Meta::new(CommandKind::Theory, scale_applied, cfg))?;
    Ok(())
}

/// Which prediction a comparison run is checked against, decided by the
/// coupling axis and the initial state.
enum CompareCase {
    /// z coupling with initial coherence `rho21(0)`; populations are
    /// conserved exactly, only the coherence dephases.
    Dephasing(Complex64),
    Standard(LrCase),
}

fn infer_compare_case(cfg: &RunConfig, init: &InitialState) -> Result<CompareCase, Failure> {
    let close = |a: [f64; 3], b: [f64; 3]| {
        a.iter()
            .zip(&b)
            .all(|(x, y)| (x - y).abs() < 1e-12)
    };
    match cfg.coupling_axis {
        CouplingCfg::Z => {
            let rho0 = qubit_density(init).map_err(config_error)?;
            let rho21 = rho0[(1, 0)];
            if rho21.norm() < 1e-12 {
                return Err(config_error(anyhow::anyhow!(
                    "z coupling with a z-axis initial state is stationary; \
                     nothing to compare"
                )));
            }
            Ok(CompareCase::Dephasing(rho21))
        }
        CouplingCfg::X => {
            if close(init.bloch, [1.0, 0.0, 0.0]) {
                Ok(CompareCase::Standard(LrCase::XInit))
            } else if close(init.bloch, [0.0, 1.0, 0.0]) {
                Ok(CompareCase::Standard(LrCase::YInit))
            } else if close(init.bloch, [0.0, 0.0, 1.0]) {
                Ok(CompareCase::Standard(LrCase::ZInit))
            } else {
                Err(config_error(anyhow::anyhow!(
                    "compare with x coupling needs the +x, +y, or +z initial state; \
                     got {:?}",
                    init.bloch
                )))
            }
        }
    }
}

/// Predicted states for the dephasing case: populations frozen at their
/// initial values, coherence damped by the exponentiated factor and
/// rotated by the free qubit phase.
fn dephasing_prediction(
    cfg: &RunConfig,
    grid: &TimeGrid,
    init: &InitialState,
    rho21_0: Complex64,
) -> Result<AveragedSeries, Failure> {
    let rho0 = qubit_density(init).map_err(config_error)?;
    let states = grid
        .points()
        .iter()
        .map(|&t| {
            let factor = elr_predict(LrCase::DephasingOffdiag, t, cfg.delta, cfg.mu, None)?;
            // factor = (1/2) e^{-4 mu^2 C}; rescale to this run's initial
            // coherence and dress with the free rotation.
            let rho21 = Complex64::cis(cfg.delta * t) * 2.0 * rho21_0 * factor;
            Ok(ndarray::array![
                [rho0[(0, 0)], rho21.conj()],
                [rho21, rho0[(1, 1)]]
            ])
        })
        .collect::<rmt_decohere_core::Result<Vec<_>>>()
        .map_err(runtime_error)?;
    Ok(AveragedSeries {
        grid: grid.clone(),
        mean_rho: states,
        stderr_rho: vec![ndarray::Array2::zeros((2, 2)); grid.len()],
        n_run: 0,
    })
}

/// Time-resolved trace distance between the simulated average and the
/// exponentiated prediction, with the squared transverse coherence
/// `x^2 + y^2` of both as overlay columns.
pub fn cmd_compare(cfg: &RunConfig, scale_applied: f64) -> Result<(), Failure> {
    let (_, init, grid) = cfg.model_pieces()?;
    let case = infer_compare_case(cfg, &init)?;
    let series = run_simulation(cfg)?;

    let (prediction, fitted_b) = match case {
        CompareCase::Dephasing(rho21_0) => {
            (dephasing_prediction(cfg, &grid, &init, rho21_0)?, None)
        }
        CompareCase::Standard(LrCase::ZInit) => {
            let b = match cfg.fit_b {
                Some(b) => b,
                None => fit_elr_offset(&series, cfg.delta, cfg.mu).map_err(runtime_error)?,
            };
            info!("population offset b = {b:.4}");
            let curve = LrCurve::exponentiated(&grid, LrCase::ZInit, cfg.delta, cfg.mu, Some(b))
                .map_err(runtime_error)?;
            (curve.to_series(), Some(b))
        }
        CompareCase::Standard(case) => {
            let curve = LrCurve::exponentiated(&grid, case, cfg.delta, cfg.mu, None)
                .map_err(runtime_error)?;
            (curve.to_series(), None)
        }
    };

    let rows: Vec<String> = grid
        .points()
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let distance = trace_distance(&series.mean_rho[k], &prediction.mean_rho[k])
                .map_err(runtime_error)?;
            let [xs, ys, _] = bloch(&series.mean_rho[k]);
            let [xp, yp, _] = bloch(&prediction.mean_rho[k]);
            Ok([t, distance, xs * xs + ys * ys, xp * xp + yp * yp]
                .map(fmt_f64)
                .join(","))
        })
        .collect::<Result<_, Failure>>()?;
    write_csv(
        &cfg.out_dir,
        "compare.csv",
        "t,trace_distance,abs_z2_sim,abs_z2_elr",
        &rows,
    )?;
    let mut meta = Meta::new(CommandKind::Compare, scale_applied, cfg);
    meta.fitted_b = fitted_b;
    write_meta(&cfg.out_dir, &meta)?;
    Ok(())
}

const DEFAULT_GRID_DELTAS: [f64; 6] = [0.25, 0.5, 0.8, 1.0, 1.5, 2.0];
const DEFAULT_GRID_MUS: [f64; 6] = [0.05, 0.1, 0.15, 0.2, 0.25, 0.3];

/// Worst-case trace distance between simulation and exponentiated theory
/// over a (delta, mu) grid, for the +y initial state.
pub fn cmd_dmax_grid(cfg: &RunConfig, scale_applied: f64) -> Result<(), Failure> {
    if cfg.coupling_axis != CouplingCfg::X {
        return Err(config_error(anyhow::anyhow!(
            "the accuracy map is defined for x coupling"
        )));
    }
    if cfg
        .init
        .iter()
        .zip(&[0.0, 1.0, 0.0])
        .any(|(a, b)| (a - b).abs() > 1e-12)
    {
        return Err(config_error(anyhow::anyhow!(
            "the accuracy map is defined for the +y initial state; got {:?}",
            cfg.init
        )));
    }
    let deltas = cfg
        .deltas
        .clone()
        .unwrap_or_else(|| DEFAULT_GRID_DELTAS.to_vec());
    let mus = cfg.mus.clone().unwrap_or_else(|| DEFAULT_GRID_MUS.to_vec());
    if deltas.is_empty() || mus.is_empty() {
        return Err(config_error(anyhow::anyhow!(
            "dmax-grid needs non-empty deltas and mus lists"
        )));
    }

    let mut rows = Vec::with_capacity(deltas.len() * mus.len());
    for &delta in &deltas {
        for &mu in &mus {
            let cell = RunConfig {
                delta,
                mu,
                ..cfg.clone()
            };
            cell.validate(CommandKind::DmaxGrid)?;
            let series = run_simulation(&cell)?;
            let curve = LrCurve::exponentiated(&series.grid, LrCase::YInit, delta, mu, None)
                .map_err(runtime_error)?;
            let dmax =
                rmt_decohere_core::observables::max_trace_distance(&series, &curve.to_series())
                    .map_err(runtime_error)?;
            info!("dmax(delta={delta}, mu={mu}) = {dmax:.4}");
            rows.push([delta, mu, dmax].map(fmt_f64).join(","));
        }
    }
    write_csv(&cfg.out_dir, "dmax.csv", "delta,mu,dmax", &rows)?;
    write_meta(&cfg.out_dir, &Meta::new(CommandKind::DmaxGrid, scale_applied, cfg))?;
    Ok(())
}

/// Purity under correlated (GUE) and uncorrelated (Poisson) spectra for
/// the +x and +z initial states, on one shared time grid.
pub fn cmd_spectra_compare(cfg: &RunConfig, scale_applied: f64) -> Result<(), Failure> {
    if cfg.coupling_axis != CouplingCfg::X {
        return Err(config_error(anyhow::anyhow!(
            "the spectra comparison uses x coupling so both initial states evolve"
        )));
    }
    let variants = [
        (SpectrumCfg::Gue, [1.0, 0.0, 0.0]),
        (SpectrumCfg::Poisson, [1.0, 0.0, 0.0]),
        (SpectrumCfg::Gue, [0.0, 0.0, 1.0]),
        (SpectrumCfg::Poisson, [0.0, 0.0, 1.0]),
    ];
    let mut purities = Vec::with_capacity(4);
    for (spectrum, init) in variants {
        let run_cfg = RunConfig {
            spectrum,
            init,
            ..cfg.clone()
        };
        let series = run_simulation(&run_cfg)?;
        purities.push(purity_series(&series));
    }

    let grid = TimeGrid::uniform(cfg.t_max, cfg.n_points).map_err(config_error)?;
    let rows: Vec<String> = grid
        .points()
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let mut cells = vec![fmt_f64(t)];
            cells.extend(purities.iter().map(|p| fmt_f64(p[k].0)));
            cells.extend(purities.iter().map(|p| fmt_f64(p[k].1)));
            cells.join(",")
        })
        .collect();
    write_csv(
        &cfg.out_dir,
        "spectra_compare.csv",
        "t,purity_gue_x,purity_poisson_x,purity_gue_z,purity_poisson_z,\
         stderr_gue_x,stderr_poisson_x,stderr_gue_z,stderr_poisson_z",
        &rows,
    )?;
    write_meta(
        &cfg.out_dir,
        &Meta::new(CommandKind::SpectraCompare, scale_applied, cfg),
    )?;
    Ok(())
}

#[derive(Debug, serde::Serialize)]
struct SpectraStats {
    n_spectra: usize,
    env_dim: usize,
    bins: usize,
    n_spacings_gue: usize,
    n_spacings_poisson: usize,
    mean_spacing_gue: f64,
    mean_spacing_poisson: f64,
    ks_gue_vs_wigner_surmise: f64,
    ks_poisson_vs_exponential: f64,
}

/// Nearest-neighbor spacing statistics of the sampled spectra: histogram
/// densities next to the reference curves, plus KS distances in
/// stats.json.
pub fn cmd_spectra_stats(cfg: &RunConfig, scale_applied: f64) -> Result<(), Failure> {
    let n_spectra = cfg.n_spectra.unwrap_or(100);
    let bins = cfg.bins.unwrap_or(50);
    if n_spectra == 0 {
        return Err(config_error(anyhow::anyhow!("n_spectra must be positive")));
    }

    // Distinct realization indices keep the two families on independent
    // streams of the same master seed.
    let draw_set = |kind: SpectrumKind, offset: usize| -> Result<Vec<_>, Failure> {
        (0..n_spectra)
            .map(|k| {
                sample_spectrum(
                    cfg.env_dim,
                    kind,
                    &SeedPolicy::new(cfg.master_seed, (offset + k) as u64),
                )
                .map_err(runtime_error)
            })
            .collect()
    };
    let started = Instant::now();
    let gue = draw_set(SpectrumKind::GueUnfolded, 0)?;
    let poisson = draw_set(SpectrumKind::PoissonUniform, n_spectra)?;
    info!(
        "sampled {} spectra per family (env_dim {}) in {:.1?}",
        n_spectra,
        cfg.env_dim,
        started.elapsed()
    );

    let hist_gue = spacing_histogram(&gue, bins).map_err(runtime_error)?;
    let hist_poisson = spacing_histogram(&poisson, bins).map_err(runtime_error)?;
    let rows: Vec<String> = hist_gue
        .bin_centers
        .iter()
        .zip(&hist_gue.density)
        .zip(hist_poisson.bin_centers.iter().zip(&hist_poisson.density))
        .map(|((&sg, &dg), (&sp, &dp))| {
            [
                sg,
                dg,
                stats::wigner_surmise_pdf(sg),
                sp,
                dp,
                stats::poisson_pdf(sp),
            ]
            .map(fmt_f64)
            .join(",")
        })
        .collect();
    write_csv(
        &cfg.out_dir,
        "spacings.csv",
        "s_gue,density_gue,wigner_surmise,s_poisson,density_poisson,poisson_pdf",
        &rows,
    )?;

    let pool = |spectra: &[ndarray::Array1<f64>]| -> Vec<f64> {
        spectra
            .iter()
            .flat_map(rmt_decohere_core::ensembles::nearest_neighbor_spacings)
            .collect()
    };
    let gue_spacings = pool(&gue);
    let poisson_spacings = pool(&poisson);
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let report = SpectraStats {
        n_spectra,
        env_dim: cfg.env_dim,
        bins,
        n_spacings_gue: gue_spacings.len(),
        n_spacings_poisson: poisson_spacings.len(),
        mean_spacing_gue: mean(&gue_spacings),
        mean_spacing_poisson: mean(&poisson_spacings),
        ks_gue_vs_wigner_surmise: stats::ks_distance(&gue_spacings, stats::wigner_surmise_cdf),
        ks_poisson_vs_exponential: stats::ks_distance(&poisson_spacings, stats::poisson_cdf),
    };
    let mut text = serde_json::to_string_pretty(&report)
        .map_err(|e| runtime_error(anyhow::anyhow!("cannot serialize stats: {e}")))?;
    text.push('\n');
    std::fs::write(cfg.out_dir.join("stats.json"), text).map_err(|e| {
        runtime_error(anyhow::anyhow!(
            "cannot write {}: {e}",
            cfg.out_dir.join("stats.json").display()
        ))
    })?;
    write_meta(
        &cfg.out_dir,
        &Meta::new(CommandKind::SpectraStats, scale_applied, cfg),
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    fn tiny_cfg(out: PathBuf) -> RunConfig {
        RunConfig {
            env_dim: 32,
            n_run: 4,
            n_points: 24,
            t_max: 4.0,
            out_dir: out,
            ..RunConfig::default()
        }
    }

    #[test]
    fn simulate_writes_series_and_meta() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_cfg(dir.path().join("run"));
        cmd_simulate(&cfg, 1.0).unwrap();
        let text = std::fs::read_to_string(cfg.out_dir.join("series.csv")).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t,re_rho11,im_rho11,re_rho21,im_rho21,purity,stderr_purity,x,y,z"
        );
        assert_eq!(lines.count(), cfg.n_points);
        assert!(cfg.out_dir.join("meta.json").exists());
    }

    #[test]
    fn simulate_with_zero_coupling_keeps_purity_one() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig {
            mu: 0.0,
            n_run: 2,
            ..tiny_cfg(dir.path().join("run"))
        };
        cmd_simulate(&cfg, 1.0).unwrap();
        let text = std::fs::read_to_string(cfg.out_dir.join("series.csv")).unwrap();
        for line in text.lines().skip(1) {
            let purity: f64 = line.split(',').nth(5).unwrap().parse().unwrap();
            assert!((purity - 1.0).abs() < 1e-12, "purity {purity}");
        }
    }

    #[test]
    fn theory_emits_all_four_cases() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig {
            n_points: 8,
            t_max: 10.0,
            out_dir: dir.path().join("theory"),
            ..RunConfig::default()
        };
        cmd_theory(&cfg, 1.0).unwrap();
        let text = std::fs::read_to_string(cfg.out_dir.join("theory.csv")).unwrap();
        assert_eq!(text.lines().count(), 1 + 4 * 8);
        for label in ["dephasing", "x_init", "y_init", "z_init"] {
            assert_eq!(
                text.lines().filter(|l| l.contains(label)).count(),
                8,
                "{label}"
            );
        }
    }

    #[test]
    fn compare_rejects_stationary_and_noncanonical_setups() {
        let dir = tempfile::tempdir().unwrap();
        let frozen = RunConfig {
            coupling_axis: CouplingCfg::Z,
            init: [0.0, 0.0, 1.0],
            ..tiny_cfg(dir.path().join("a"))
        };
        assert_eq!(cmd_compare(&frozen, 1.0).unwrap_err().code, 2);
        let skew = RunConfig {
            init: [0.6, 0.0, 0.8],
            ..tiny_cfg(dir.path().join("b"))
        };
        assert_eq!(cmd_compare(&skew, 1.0).unwrap_err().code, 2);
    }

    #[test]
    fn compare_with_zero_coupling_is_exact() {
        // mu = 0: the simulation is exactly the free rotation the
        // prediction dresses with, so the distance vanishes.
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig {
            mu: 0.0,
            n_run: 2,
            ..tiny_cfg(dir.path().join("run"))
        };
        cmd_compare(&cfg, 1.0).unwrap();
        let text = std::fs::read_to_string(cfg.out_dir.join("compare.csv")).unwrap();
        for line in text.lines().skip(1) {
            let d: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
            assert!(d < 1e-10, "distance {d}");
        }
    }

    #[test]
    fn dmax_grid_enforces_its_preconditions() {
        let dir = tempfile::tempdir().unwrap();
        let bad_init = RunConfig {
            deltas: Some(vec![1.0]),
            mus: Some(vec![0.1]),
            ..tiny_cfg(dir.path().join("a"))
        };
        assert_eq!(cmd_dmax_grid(&bad_init, 1.0).unwrap_err().code, 2);

        let good = RunConfig {
            init: [0.0, 1.0, 0.0],
            deltas: Some(vec![1.0]),
            mus: Some(vec![0.1]),
            ..tiny_cfg(dir.path().join("b"))
        };
        cmd_dmax_grid(&good, 1.0).unwrap();
        let text = std::fs::read_to_string(good.out_dir.join("dmax.csv")).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.lines().next().unwrap().starts_with("delta,mu,dmax"));
    }

    #[test]
    fn spectra_stats_reports_sane_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig {
            env_dim: 64,
            n_spectra: Some(10),
            bins: Some(20),
            out_dir: dir.path().join("stats"),
            ..RunConfig::default()
        };
        cmd_spectra_stats(&cfg, 1.0).unwrap();
        let text = std::fs::read_to_string(cfg.out_dir.join("stats.json")).unwrap();
        let report: serde_json::Value = serde_json::from_str(&text).unwrap();
        let mean = report["mean_spacing_gue"].as_f64().unwrap();
        assert!((mean - 1.0).abs() < 0.1, "mean spacing {mean}");
        let ks = report["ks_gue_vs_wigner_surmise"].as_f64().unwrap();
        assert!(ks < 0.2, "ks {ks}");
        assert_eq!(report["n_spacings_gue"].as_u64().unwrap(), 10 * 63);
    }
}
