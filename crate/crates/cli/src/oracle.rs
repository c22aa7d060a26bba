//! Self-check suite: exact identities and closed-form references, emitted as
//! machine-readable pass/fail JSON. Resolution-independent for band-limited
//! inputs, so it passes even on small grids.

use serde::Serialize;
use visco_core::field::{Field, Rank};
use visco_core::grid::{DealiasMode, Grid};
use visco_core::incompressible::pressure_solve;
use visco_core::kinematics::{self, build_pack};
use visco_core::linear;
use visco_core::ops;
use visco_core::synth;

use crate::config::ExperimentConfig;
use crate::CliError;

#[derive(Serialize)]
pub struct OracleCheck {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Serialize)]
pub struct OracleReport {
    pub schema_version: u32,
    pub grid: usize,
    pub checks: Vec<OracleCheck>,
    pub pass: bool,
}

fn check(name: &str, value: f64, tolerance: f64) -> OracleCheck {
    OracleCheck {
        name: name.to_string(),
        value,
        tolerance,
        pass: value.is_finite() && value <= tolerance,
    }
}

pub fn run_oracle(cfg: &ExperimentConfig) -> Result<OracleReport, CliError> {
    let n = cfg.grid.n;
    let grid = Grid::new(n, n, n, DealiasMode::Pad2x).map_err(|e| CliError::Config(e.to_string()))?;
    let trials = cfg.oracle.trials.unwrap_or(5);
    let mut checks = Vec::new();

    // exact kinematic identities on random band-limited displacements
    let mut piola = 0.0f64;
    let mut det = 0.0f64;
    for trial in 0..trials as u64 {
        let eta = synth::random_band_limited(grid, Rank::Vector, 2, 3.0, 0.05, 41 + trial);
        piola = piola.max(kinematics::piola_residual(&eta)?);
        det = det.max(kinematics::det_expansion_residual(&eta));
    }
    checks.push(check("piola_identity", piola, 1e-10));
    checks.push(check("determinant_expansion", det, 1e-10));

    // manufactured solution for the weighted pressure solve
    let eta = kinematics::make_volume_preserving_eta(grid, kinematics::EtaKind::Shear, 0.1, 1)?;
    let pack = build_pack(&eta)?;
    let q_true = Field::from_fn(grid, Rank::Scalar, |y1, _, y3, _| (y1).cos() + (2.0 * y3).sin());
    let rhs = pack.a_laplacian(&q_true);
    let (q, _) = pressure_solve(&pack, &rhs, 1e-12, 200)?;
    let err = ops::l2_norm(&q.sub(&q_true)) / ops::l2_norm(&q_true);
    checks.push(check("manufactured_pressure", err, 1e-9));

    // linear dispersion: the closed-form mode solution must satisfy the
    // characteristic polynomial and the known |k|=1 transverse rate pair
    let sol = linear::characteristic_roots(1.0, 1.0, 1.0, 1.0);
    let roots = [sol.roots.0, sol.roots.1];
    let residual = roots
        .iter()
        .map(|&s| (s * s + s + 1.0).norm())
        .fold(0.0, f64::max);
    checks.push(check("dispersion_polynomial", residual, 1e-12));
    let rate_err = roots
        .iter()
        .map(|s| (-s.re - 0.5).abs())
        .fold(0.0, f64::max);
    checks.push(check("transverse_decay_rate", rate_err, 1e-12));

    if cfg.oracle.inject_fault {
        checks.push(check("injected_fault", 1.0, 0.0));
    }

    let pass = checks.iter().all(|c| c.pass);
    Ok(OracleReport {
        schema_version: 1,
        grid: n,
        checks,
        pass,
    })
}
