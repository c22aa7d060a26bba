//! Experiment orchestration: runs, κ-sweeps, linear comparisons, and the
//! artifact layout (CSV + JSON + SVG, manifest written last).

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};
use visco_core::compressible::{compressible_energy, CompressibleIntegrator};
use visco_core::diagnostics::{self, DiagnosticsRecord, EnergyConstants};
use visco_core::incompressible::{make_initial_data, Integrator};
use visco_core::kinematics::build_pack;
use visco_core::linear;
use visco_core::ops;

use crate::config::{ExperimentConfig, Model};
use crate::plot::{self, Series};
use crate::CliError;

#[derive(Serialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub code_version: String,
    pub files: Vec<String>,
    pub wall_clock_seconds: f64,
}

pub struct SampledRun {
    pub rows: Vec<DiagnosticsRecord>,
    /// (t, deviation norms) when a linear reference was evaluated
    pub deviations: Vec<(f64, diagnostics::DeviationNorms)>,
}

fn sample_times(cfg: &ExperimentConfig) -> Vec<f64> {
    let mut times = Vec::new();
    let mut k = 1usize;
    loop {
        let t = k as f64 * cfg.sample_interval;
        if t > cfg.t_final * (1.0 + 1e-12) {
            break;
        }
        times.push(t.min(cfg.t_final));
        k += 1;
    }
    if times.last().map_or(true, |&t| t < cfg.t_final * (1.0 - 1e-12)) {
        times.push(cfg.t_final);
    }
    times
}

/// Advances the configured model, recording one diagnostics row per sample
/// time (plus t = 0). When `linear_ref` is set, also evaluates the
/// closed-form solution and records the deviation norms.
pub fn run_sampled(cfg: &ExperimentConfig, linear_ref: bool) -> Result<SampledRun, CliError> {
    let grid = cfg.build_grid()?;
    let scheme = cfg.scheme_config();
    let (eta_raw, u_raw) = cfg.build_initial(grid)?;
    let consts = EnergyConstants::default();
    let mut rows = Vec::new();
    let mut deviations = Vec::new();

    match cfg.model {
        Model::Incompressible => {
            let params = cfg.flow_params()?;
            let (eta0, u0) = make_initial_data(&eta_raw, &u_raw, &params, &scheme)?;
            // reference data for the linear problem, corrector-adjusted
            let lin_data = if linear_ref {
                let pack0 = build_pack(&eta0)?;
                Some(linear::build_adjusted_initial_data(&pack0, &eta0, &u0))
            } else {
                None
            };
            let u0_mean = {
                let m = u0.mean();
                [m[0], m[1], m[2]]
            };
            let varpi = {
                let m = eta0.mean();
                [m[0], m[1], m[2]]
            };
            let mut it = Integrator::new(eta0, u0, params, scheme);
            let record = |it: &Integrator| -> Result<DiagnosticsRecord, CliError> {
                let pack = build_pack(&it.state.eta)?;
                let er = diagnostics::energy_functionals(&pack, &it.state.u, &params, &consts);
                let (_, etabar_l2, etabar_sup) = diagnostics::straightening(&it.state.eta);
                Ok(DiagnosticsRecord {
                    t: it.state.t,
                    dt: it.stats.dt,
                    u_h2: ops::sobolev_norm(&it.state.u, 2),
                    grad_eta_h2: ops::sobolev_norm(&ops::gradient(&it.state.eta), 2),
                    energy: er.energy,
                    dissipation: er.dissipation,
                    e1: er.e1,
                    e2: er.e2,
                    etabar_l2,
                    etabar_sup,
                    drift_h3: diagnostics::drift_residual(&it.state.eta, u0_mean, varpi, it.state.t),
                    div_residual: it.stats.div_residual,
                    picard_iters: it.stats.picard_iters,
                    min_j: it.stats.min_j,
                    max_j: it.stats.max_j,
                })
            };
            rows.push(record(&it)?);
            for t in sample_times(cfg) {
                it.run_to(t, |_| {})?;
                rows.push(record(&it)?);
                if let Some((el0, ul0)) = &lin_data {
                    let (el, ul) = linear::solve_linear_incompressible(el0, ul0, &params, t)?;
                    deviations.push((
                        t,
                        diagnostics::deviation_norms(&it.state.u, &it.state.eta, &ul, &el, params.kappa),
                    ));
                }
            }
        }
        Model::Compressible => {
            let params = cfg.compressible_params()?;
            // Theorem 1.5 protocol: the linear reference starts from the
            // unmodified data, no correctors.
            let lin_data = linear_ref.then(|| (eta_raw.clone(), u_raw.clone()));
            let u0_mean = {
                let m = u_raw.mean();
                [m[0], m[1], m[2]]
            };
            let varpi = {
                let m = eta_raw.mean();
                [m[0], m[1], m[2]]
            };
            let mut it = CompressibleIntegrator::new(eta_raw, u_raw, params, scheme);
            let record = |it: &CompressibleIntegrator| -> Result<DiagnosticsRecord, CliError> {
                let pack = build_pack(&it.state.eta)?;
                let en = compressible_energy(&pack, &it.state.u, &params);
                let (_, etabar_l2, etabar_sup) = diagnostics::straightening(&it.state.eta);
                Ok(DiagnosticsRecord {
                    t: it.state.t,
                    dt: it.stats.dt,
                    u_h2: ops::sobolev_norm(&it.state.u, 2),
                    grad_eta_h2: ops::sobolev_norm(&ops::gradient(&it.state.eta), 2),
                    energy: en.excess,
                    dissipation: 0.0,
                    e1: 0.0,
                    e2: diagnostics::e2p_functional(&pack, &it.state.u, &params, &consts),
                    etabar_l2,
                    etabar_sup,
                    drift_h3: diagnostics::drift_residual(&it.state.eta, u0_mean, varpi, it.state.t),
                    div_residual: 0.0,
                    picard_iters: 0,
                    min_j: it.stats.min_j,
                    max_j: it.stats.max_j,
                })
            };
            rows.push(record(&it)?);
            for t in sample_times(cfg) {
                it.run_to(t, |_| {})?;
                rows.push(record(&it)?);
                if let Some((el0, ul0)) = &lin_data {
                    let (el, ul) = linear::solve_linear_compressible(el0, ul0, &params, t);
                    deviations.push((
                        t,
                        diagnostics::deviation_norms(&it.state.u, &it.state.eta, &ul, &el, params.kappa),
                    ));
                }
            }
        }
    }
    Ok(SampledRun { rows, deviations })
}

fn write_file(dir: &Path, name: &str, content: &str, files: &mut Vec<String>) -> Result<(), CliError> {
    fs::write(dir.join(name), content)?;
    files.push(name.to_string());
    Ok(())
}

fn series_csv(rows: &[DiagnosticsRecord]) -> String {
    let mut out = String::from(DiagnosticsRecord::CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

fn decay_fit_json(samples: &[(f64, f64)]) -> serde_json::Value {
    // trailing half-window fit; absent when the series is unusable
    let trailing: Vec<(f64, f64)> = samples
        .iter()
        .copied()
        .filter(|&(t, _)| t >= samples.last().map_or(0.0, |&(tf, _)| tf) / 2.0)
        .collect();
    match diagnostics::fit_decay_rate(&trailing) {
        Ok(fit) => serde_json::json!({
            "rate": fit.rate,
            "intercept": fit.intercept,
            "r_squared": fit.r_squared,
            "samples": fit.samples,
        }),
        Err(e) => serde_json::json!({ "unavailable": e.to_string() }),
    }
}

/// Writes the artifact set for one run. The manifest goes last, after every
/// file it references is on disk.
pub fn write_run_outputs(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    run: &SampledRun,
    extra_summary: serde_json::Value,
    started: Instant,
) -> Result<RunManifest, CliError> {
    fs::create_dir_all(out_dir)?;
    let mut files = Vec::new();
    let canonical = cfg.canonical_toml();
    write_file(out_dir, "config.toml", &canonical, &mut files)?;
    write_file(out_dir, "series.csv", &series_csv(&run.rows), &mut files)?;

    if !run.deviations.is_empty() {
        let mut csv = String::from("t,u_dev_h2_sq,kappa_eta_dev_h3_sq,combined\n");
        for (t, d) in &run.deviations {
            csv.push_str(&format!(
                "{:.12e},{:.12e},{:.12e},{:.12e}\n",
                t, d.u_h2_sq, d.kappa_eta_h3_sq, d.combined
            ));
        }
        write_file(out_dir, "deviation.csv", &csv, &mut files)?;
        let svg = plot::line_plot(
            "deviation from linear solution",
            "t",
            "norms",
            &[Series {
                label: "combined deviation",
                points: run.deviations.iter().map(|&(t, d)| (t, d.combined)).collect(),
            }],
            false,
            true,
        );
        write_file(out_dir, "deviation.svg", &svg, &mut files)?;
    }

    let energy_series: Vec<(f64, f64)> = run.rows.iter().map(|r| (r.t, r.energy)).collect();
    let u_series: Vec<(f64, f64)> = run.rows.iter().map(|r| (r.t, r.u_h2)).collect();
    let etabar_series: Vec<(f64, f64)> = run.rows.iter().map(|r| (r.t, r.etabar_l2)).collect();
    let drift_series: Vec<(f64, f64)> = run.rows.iter().map(|r| (r.t, r.drift_h3)).collect();
    let svg = plot::line_plot(
        "time series",
        "t",
        "value (log)",
        &[
            Series { label: "energy", points: energy_series.clone() },
            Series { label: "|u|_H2", points: u_series.clone() },
            Series { label: "|etabar|_0", points: etabar_series.clone() },
        ],
        false,
        true,
    );
    write_file(out_dir, "series.svg", &svg, &mut files)?;

    let last = run.rows.last().expect("at least the t=0 row");
    let mut summary = serde_json::json!({
        "schema_version": 1,
        "t_final": last.t,
        "energy_initial": run.rows[0].energy,
        "energy_final": last.energy,
        "min_j": run.rows.iter().map(|r| r.min_j).fold(f64::INFINITY, f64::min),
        "max_j": run.rows.iter().map(|r| r.max_j).fold(f64::NEG_INFINITY, f64::max),
        "energy_fit": decay_fit_json(&energy_series),
        "u_h2_fit": decay_fit_json(&u_series),
        "etabar_fit": decay_fit_json(&etabar_series),
        "drift_fit": decay_fit_json(&drift_series),
    });
    if let serde_json::Value::Object(map) = extra_summary {
        summary.as_object_mut().unwrap().extend(map);
    }
    write_file(out_dir, "summary.json", &serde_json::to_string_pretty(&summary)?, &mut files)?;

    let manifest = RunManifest {
        config_hash: hex_digest(&canonical),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        files,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    // crash-consistency: everything the manifest references is already durable
    for f in &manifest.files {
        debug_assert!(out_dir.join(f).exists());
    }
    fs::write(out_dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

pub fn hex_digest(text: &str) -> String {
    let mut h = Sha256::new();
    h.update(text.as_bytes());
    format!("{:x}", h.finalize())
}

/// One sweep member: the base config with κ replaced, run in its own
/// subdirectory.
fn sweep_member(cfg: &ExperimentConfig, kappa: f64) -> ExperimentConfig {
    let mut member = cfg.clone();
    member.params.kappa = kappa;
    member
}

pub struct SweepRow {
    pub kappa: f64,
    pub etabar_peak_sq: f64,
    pub deviation_sup: f64,
    pub final_energy: f64,
}

fn run_member(cfg: &ExperimentConfig) -> Result<(SampledRun, SweepRow), CliError> {
    let run = run_sampled(cfg, true)?;
    let half = cfg.t_final / 2.0;
    let etabar_peak_sq = run
        .rows
        .iter()
        .filter(|r| r.t >= half)
        .map(|r| r.etabar_l2 * r.etabar_l2)
        .fold(0.0, f64::max);
    let deviation_sup = run.deviations.iter().map(|&(_, d)| d.combined).fold(0.0, f64::max);
    let final_energy = run.rows.last().unwrap().energy;
    Ok((
        run,
        SweepRow {
            kappa: cfg.params.kappa,
            etabar_peak_sq,
            deviation_sup,
            final_energy,
        },
    ))
}

fn worker_cap(requested: usize) -> usize {
    std::env::var("VISCO_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&v| v >= 1)
        .map_or(requested, |cap| requested.min(cap))
}

/// Runs the κ-sweep members (optionally in threads, capped by VISCO_THREADS)
/// and aggregates the scaling summary. Aggregation order is the config
/// order, independent of scheduling.
pub fn cmd_sweep(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunManifest, CliError> {
    let started = Instant::now();
    fs::create_dir_all(out_dir)?;
    let members: Vec<ExperimentConfig> =
        cfg.sweep.kappas.iter().map(|&k| sweep_member(cfg, k)).collect();

    let results: Vec<Result<(SampledRun, SweepRow), CliError>> = if cfg.sweep.parallel {
        let width = worker_cap(members.len()).max(1);
        let mut results: Vec<Option<Result<(SampledRun, SweepRow), CliError>>> =
            members.iter().map(|_| None).collect();
        for chunk_start in (0..members.len()).step_by(width) {
            let chunk_end = (chunk_start + width).min(members.len());
            std::thread::scope(|scope| {
                let handles: Vec<_> = members[chunk_start..chunk_end]
                    .iter()
                    .map(|m| scope.spawn(move || run_member(m)))
                    .collect();
                for (off, h) in handles.into_iter().enumerate() {
                    results[chunk_start + off] = Some(h.join().expect("sweep worker panicked"));
                }
            });
        }
        results.into_iter().map(Option::unwrap).collect()
    } else {
        members.iter().map(run_member).collect()
    };

    let mut files = Vec::new();
    let mut rows = Vec::new();
    for (i, res) in results.into_iter().enumerate() {
        let (run, row) = res?;
        let name = format!("series_{i}.csv");
        write_file(out_dir, &name, &series_csv(&run.rows), &mut files)?;
        rows.push(row);
    }

    let mut csv = String::from("kappa,etabar_peak_sq,deviation_sup,final_energy\n");
    for r in &rows {
        csv.push_str(&format!(
            "{:.12e},{:.12e},{:.12e},{:.12e}\n",
            r.kappa, r.etabar_peak_sq, r.deviation_sup, r.final_energy
        ));
    }
    write_file(out_dir, "sweep.csv", &csv, &mut files)?;

    let slope = |pick: fn(&SweepRow) -> f64| -> Option<f64> {
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| pick(r) > 0.0 && r.kappa > 0.0)
            .map(|r| (r.kappa.ln(), pick(r).ln()))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        Some((n * sxy - sx * sy) / (n * sxx - sx * sx))
    };
    let etabar_slope = slope(|r| r.etabar_peak_sq);
    let deviation_slope = slope(|r| r.deviation_sup);

    let svg = plot::line_plot(
        "kappa sweep",
        "kappa (log)",
        "observable (log)",
        &[
            Series {
                label: "peak |etabar|_0^2",
                points: rows.iter().map(|r| (r.kappa, r.etabar_peak_sq)).collect(),
            },
            Series {
                label: "sup deviation",
                points: rows.iter().map(|r| (r.kappa, r.deviation_sup)).collect(),
            },
        ],
        true,
        true,
    );
    write_file(out_dir, "sweep.svg", &svg, &mut files)?;

    let canonical = cfg.canonical_toml();
    write_file(out_dir, "config.toml", &canonical, &mut files)?;
    let summary = serde_json::json!({
        "schema_version": 1,
        "kappas": cfg.sweep.kappas,
        "etabar_loglog_slope": etabar_slope,
        "deviation_loglog_slope": deviation_slope,
    });
    write_file(out_dir, "summary.json", &serde_json::to_string_pretty(&summary)?, &mut files)?;

    let manifest = RunManifest {
        config_hash: hex_digest(&canonical),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        files,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    fs::write(out_dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

/// Prints a human-readable digest of a previously written output directory.
pub fn cmd_report(out_dir: &Path) -> Result<String, CliError> {
    let manifest_path = out_dir.join("manifest.json");
    let manifest: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(&manifest_path)
            .map_err(|e| CliError::Config(format!("{}: {e}", manifest_path.display())))?,
    )?;
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).map_err(|e| {
            CliError::Config(format!("{}: {e}", out_dir.join("summary.json").display()))
        })?)?;
    let mut out = String::new();
    out.push_str(&format!(
        "config hash : {}\nversion     : {}\nwall clock  : {:.2}s\nfiles       : {}\n",
        manifest["config_hash"].as_str().unwrap_or("?"),
        manifest["code_version"].as_str().unwrap_or("?"),
        manifest["wall_clock_seconds"].as_f64().unwrap_or(0.0),
        manifest["files"]
            .as_array()
            .map_or(0, |a| a.len())
    ));
    out.push_str("summary     :\n");
    out.push_str(&serde_json::to_string_pretty(&summary)?);
    out.push('\n');
    Ok(out)
}

/// Resolves the output directory for a command, creating it.
pub fn prepare_out_dir(cfg: &ExperimentConfig) -> Result<PathBuf, CliError> {
    let dir = PathBuf::from(&cfg.out_dir);
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

/// Extra summary block for compare-linear: deviation fit and maximum.
pub fn deviation_summary(run: &SampledRun) -> serde_json::Value {
    let combined: Vec<(f64, f64)> = run.deviations.iter().map(|&(t, d)| (t, d.combined)).collect();
    let sup = combined.iter().map(|&(_, v)| v).fold(0.0, f64::max);
    serde_json::json!({
        "deviation_sup": sup,
        "deviation_fit": decay_fit_json(&combined),
    })
}

