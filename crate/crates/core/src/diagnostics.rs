//! Scalar observables of a trajectory: energies, straightening, drift,
//! decay-rate fits, and the higher-order functionals behind the stability
//! estimates.

use crate::compressible::{compressible_energy, CompressibleParams};
use crate::error::{Error, Result};
use crate::field::{Field, Rank};
use crate::incompressible::FlowParams;
use crate::kinematics::{DeformationPack, Weight};
use crate::ops;
use serde::Serialize;

/// One row of the time-series output.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub dt: f64,
    pub u_h2: f64,
    pub grad_eta_h2: f64,
    pub energy: f64,
    pub dissipation: f64,
    pub e1: f64,
    pub e2: f64,
    pub etabar_l2: f64,
    pub etabar_sup: f64,
    pub drift_h3: f64,
    pub div_residual: f64,
    pub picard_iters: usize,
    pub min_j: f64,
    pub max_j: f64,
}

impl DiagnosticsRecord {
    pub const CSV_HEADER: &'static str = "t,dt,u_h2,grad_eta_h2,energy,dissipation,e1,e2,etabar_l2,etabar_sup,drift_h3,div_residual,picard_iters,min_j,max_j";

    pub fn csv_row(&self) -> String {
        format!(
            "{:.12e},{:.6e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.6e},{},{:.9},{:.9}",
            self.t,
            self.dt,
            self.u_h2,
            self.grad_eta_h2,
            self.energy,
            self.dissipation,
            self.e1,
            self.e2,
            self.etabar_l2,
            self.etabar_sup,
            self.drift_h3,
            self.div_residual,
            self.picard_iters,
            self.min_j,
            self.max_j
        )
    }
}

/// I₀ʰ(u⁰, η⁰) = ‖u⁰‖₂² + κ‖∇η⁰‖₂².
pub fn i0h(u0: &Field, eta0: &Field, kappa: f64) -> f64 {
    let n_u = ops::sobolev_norm(u0, 2);
    let g = ops::gradient(eta0);
    let n_g = ops::sobolev_norm(&g, 2);
    n_u * n_u + kappa * n_g * n_g
}

/// The size parameter K = 2√(c₁ I₀ʰ) used by the threshold discussion.
pub fn size_parameter(i0h_value: f64, c1: f64) -> f64 {
    2.0 * (c1 * i0h_value).sqrt()
}

/// η̄ = η − η(y₁, y₂, 0): the y₃ = 0 plane is broadcast along y₃ and
/// subtracted, removing the straightened part of the displacement.
pub fn straightening(eta: &Field) -> (Field, f64, f64) {
    assert_eq!(eta.rank, Rank::Vector);
    let grid = eta.grid;
    let p = eta.to_physical();
    let mut comps = Vec::with_capacity(3);
    for c in 0..3 {
        let src = p.phys(c);
        let mut out = vec![0.0; grid.len()];
        for i3 in 0..grid.n3 {
            for i2 in 0..grid.n2 {
                for i1 in 0..grid.n1 {
                    let idx = grid.idx(i1, i2, i3);
                    out[idx] = src[idx] - src[grid.idx(i1, i2, 0)];
                }
            }
        }
        comps.push(out);
    }
    let etabar = Field::from_physical(grid, Rank::Vector, comps);
    let l2 = ops::l2_norm(&etabar);
    let sup = etabar.max_abs();
    (etabar, l2, sup)
}

/// ‖η(t) − t·(u⁰)_avg − ϖ‖₃ where ϖ is the volume average of η⁰. The mean
/// motion is pure drift, so this measures convergence to a shifted identity.
pub fn drift_residual(eta: &Field, u0_mean: [f64; 3], varpi: [f64; 3], t: f64) -> f64 {
    let s = eta.to_spectral();
    let mut comps: Vec<Vec<num_complex::Complex64>> =
        (0..3).map(|c| s.spec(c).to_vec()).collect();
    for c in 0..3 {
        comps[c][0] -= u0_mean[c] * t + varpi[c];
    }
    let shifted = Field::from_spectral(eta.grid, Rank::Vector, comps);
    ops::sobolev_norm(&shifted, 3)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct DecayFit {
    pub rate: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub samples: usize,
}

/// Least-squares fit of ln f(t) = intercept − rate·t over the given samples.
pub fn fit_decay_rate(samples: &[(f64, f64)]) -> Result<DecayFit> {
    if samples.len() < 10 {
        return Err(Error::WindowTooSmall {
            got: samples.len(),
            need: 10,
        });
    }
    if samples.iter().any(|&(_, v)| v <= 0.0) {
        return Err(Error::NonPositiveSamples);
    }
    let n = samples.len() as f64;
    let (mut st, mut sy, mut stt, mut sty) = (0.0, 0.0, 0.0, 0.0);
    for &(t, v) in samples {
        let y = v.ln();
        st += t;
        sy += y;
        stt += t * t;
        sty += t * y;
    }
    let denom = n * stt - st * st;
    if denom == 0.0 {
        return Err(Error::WindowTooSmall {
            got: samples.len(),
            need: 10,
        });
    }
    let slope = (n * sty - st * sy) / denom;
    let intercept = (sy - slope * st) / n;
    let mean_y = sy / n;
    let (mut ss_res, mut ss_tot) = (0.0, 0.0);
    for &(t, v) in samples {
        let y = v.ln();
        let yhat = intercept + slope * t;
        ss_res += (y - yhat).powi(2);
        ss_tot += (y - mean_y).powi(2);
    }
    let r_squared = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(DecayFit {
        rate: -slope,
        intercept,
        r_squared,
        samples: samples.len(),
    })
}

#[derive(Clone, Copy, Debug)]
pub struct EnergyReport {
    pub energy: f64,
    pub dissipation: f64,
    pub e1: f64,
    pub e2: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct EnergyConstants {
    pub c4: f64,
    pub c5: f64,
}

impl Default for EnergyConstants {
    fn default() -> Self {
        Self { c4: 1.0, c5: 1.0 }
    }
}

/// E = (ρ‖u‖₀² + κ‖∇η‖₀²)/2, D = μ‖∇_A u‖₀² (so that dE/dt + D = 0), and the
/// weighted functionals
/// E₁ = c₄(ρ‖∇²u‖₀² + κ‖∇³η‖₀²) + ρ Σ_{|α|=2} ∫∂^α η·∂^α u + (μ/2)‖∇³η‖₀²,
/// E₂ = E₁ + c₅(ρ‖u‖₀² + κ‖∇η‖₀²).
pub fn energy_functionals(
    pack: &DeformationPack,
    u: &Field,
    params: &FlowParams,
    consts: &EnergyConstants,
) -> EnergyReport {
    let eta = &pack.eta;
    let grad_eta = ops::gradient(eta);
    let u0 = ops::l2_norm_sq(u);
    let ge0 = ops::l2_norm_sq(&grad_eta);
    let energy = 0.5 * (params.rho * u0 + params.kappa * ge0);
    let gau = pack.weighted_gradient_vec(u, Weight::Full);
    let dissipation = params.mu * ops::l2_norm_sq(&gau);
    let u2 = ops::seminorm_sq(u, 2);
    let e3 = ops::seminorm_sq(eta, 3);
    let cross = ops::seminorm_inner(eta, u, 2);
    let e1 = consts.c4 * (params.rho * u2 + params.kappa * e3)
        + params.rho * cross
        + 0.5 * params.mu * e3;
    let e2 = e1 + consts.c5 * (params.rho * u0 + params.kappa * ge0);
    EnergyReport {
        energy,
        dissipation,
        e1,
        e2,
    }
}

/// The compressible counterpart E₂ᴾ, with the P′(ρ̄)ρ̄-weighted divergence
/// blocks and the exact pressure-potential term in the low-order part.
pub fn e2p_functional(
    pack: &DeformationPack,
    u: &Field,
    params: &CompressibleParams,
    consts: &EnergyConstants,
) -> f64 {
    let eta = &pack.eta;
    let div_eta = ops::divergence(eta);
    let dpr = params.pressure.dp(params.rho_bar) * params.rho_bar;
    let div2 = ops::seminorm_sq(&div_eta, 2);
    let u2 = ops::seminorm_sq(u, 2);
    let e3 = ops::seminorm_sq(eta, 3);
    let cross = ops::seminorm_inner(eta, u, 2);
    let low = compressible_energy(pack, u, params);
    consts.c4 * (params.rho_bar * u2 + dpr * div2 + params.kappa * e3)
        + params.rho_bar * cross
        + 0.5 * params.mu * e3
        + 0.5 * params.lambda_ * div2
        + consts.c5 * low.excess
}

/// The displayed quantities of the linear-approximation estimate:
/// (‖u^d‖₂², κ‖η^d‖₃², their sum) for (η^d, u^d) = (η − η¹, u − u¹).
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DeviationNorms {
    pub u_h2_sq: f64,
    pub kappa_eta_h3_sq: f64,
    pub combined: f64,
}

pub fn deviation_norms(u: &Field, eta: &Field, u_lin: &Field, eta_lin: &Field, kappa: f64) -> DeviationNorms {
    let du = ops::sobolev_norm(&u.sub(u_lin), 2);
    let de = ops::sobolev_norm(&eta.sub(eta_lin), 3);
    DeviationNorms {
        u_h2_sq: du * du,
        kappa_eta_h3_sq: kappa * de * de,
        combined: du * du + kappa * de * de,
    }
}
