//! Closed-form per-mode solutions of the linearized systems, plus the Stokes
//! correctors that make initial data divergence-free.

use crate::compressible::CompressibleParams;
use crate::error::{Error, Result};
use crate::field::{Field, Rank};
use crate::incompressible::FlowParams;
use crate::kinematics::{DeformationPack, Weight};
use crate::ops;
use num_complex::Complex64;

/// Relative discriminant threshold below which the repeated-root branch
/// (c₁ + c₂ t) e^{st} is used; chosen so both branches agree to ~1e-8.
const REPEATED_ROOT_TOL: f64 = 1e-9;

/// Characteristic data of one Fourier mode of the damped wave equation
/// ρ ẍ + μ_eff |k|² ẋ + κ_eff |k|² x = 0.
#[derive(Clone, Copy, Debug)]
pub struct ModeSolution {
    pub wavevector: [i64; 3],
    pub roots: (Complex64, Complex64),
    pub repeated: bool,
}

pub fn characteristic_roots(rho: f64, mu_eff: f64, kappa_eff: f64, k2: f64) -> ModeSolution {
    let b = mu_eff * k2;
    let c = kappa_eff * k2;
    let disc = b * b - 4.0 * rho * c;
    let scale = (b * b).max(4.0 * rho * c);
    let repeated = scale > 0.0 && disc.abs() <= REPEATED_ROOT_TOL * scale;
    let sq = Complex64::new(disc, 0.0).sqrt();
    let s1 = (Complex64::new(-b, 0.0) + sq) / (2.0 * rho);
    let s2 = (Complex64::new(-b, 0.0) - sq) / (2.0 * rho);
    ModeSolution {
        wavevector: [0, 0, 0],
        roots: (s1, s2),
        repeated,
    }
}

/// Evolve one mode amplitude pair (η̂, û) to time t.
fn evolve_mode(
    rho: f64,
    mu_eff: f64,
    kappa_eff: f64,
    k2: f64,
    eta0: Complex64,
    u0: Complex64,
    t: f64,
) -> (Complex64, Complex64) {
    if k2 == 0.0 {
        return (eta0 + u0 * t, u0);
    }
    let ms = characteristic_roots(rho, mu_eff, kappa_eff, k2);
    let (s1, s2) = ms.roots;
    if ms.repeated {
        let s = (s1 + s2) / 2.0;
        let c2 = u0 - s * eta0;
        let e = (s * t).exp();
        let eta = (eta0 + c2 * t) * e;
        let u = (u0 + s * c2 * t) * e;
        (eta, u)
    } else {
        let c1 = (u0 - s2 * eta0) / (s1 - s2);
        let c2 = eta0 - c1;
        let e1 = (s1 * t).exp();
        let e2 = (s2 * t).exp();
        (c1 * e1 + c2 * e2, c1 * s1 * e1 + c2 * s2 * e2)
    }
}

/// Exact solution of the pressureless linear system (divergence-free data,
/// for which the pressure gradient vanishes identically).
pub fn solve_linear_incompressible(
    eta0: &Field,
    u0: &Field,
    params: &FlowParams,
    t: f64,
) -> Result<(Field, Field)> {
    let div_tol = 1e-10;
    for (f, name_norm) in [(eta0, ops::sobolev_norm(eta0, 1)), (u0, ops::sobolev_norm(u0, 1))] {
        let r = ops::l2_norm(&ops::divergence(f));
        if r > div_tol * name_norm.max(1e-300) {
            return Err(Error::NotDivergenceFree { residual: r });
        }
    }
    Ok(evolve_fields(eta0, u0, t, |k2| (params.rho, params.mu, params.kappa, k2)))
}

fn evolve_fields(
    eta0: &Field,
    u0: &Field,
    t: f64,
    coeffs: impl Fn(f64) -> (f64, f64, f64, f64),
) -> (Field, Field) {
    let grid = eta0.grid;
    let es = eta0.to_spectral();
    let us = u0.to_spectral();
    let n = grid.len();
    let mut eta_out = vec![vec![Complex64::default(); n]; 3];
    let mut u_out = vec![vec![Complex64::default(); n]; 3];
    for idx in 0..n {
        let k = grid.wavevector(idx);
        let k2 = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64;
        let (rho, mu, kappa, k2) = coeffs(k2);
        for c in 0..3 {
            let (e, u) = evolve_mode(rho, mu, kappa, k2, es.spec(c)[idx], us.spec(c)[idx], t);
            eta_out[c][idx] = e;
            u_out[c][idx] = u;
        }
    }
    (
        Field::from_spectral(grid, Rank::Vector, eta_out),
        Field::from_spectral(grid, Rank::Vector, u_out),
    )
}

/// Exact solution of the compressible linearized problem via the Helmholtz
/// split: transverse parts damp with (μ, κ), longitudinal parts with
/// (μ+λ, κ + P′(ρ̄)ρ̄).
pub fn solve_linear_compressible(
    eta0: &Field,
    u0: &Field,
    params: &CompressibleParams,
    t: f64,
) -> (Field, Field) {
    let grid = eta0.grid;
    let es = eta0.to_spectral();
    let us = u0.to_spectral();
    let n = grid.len();
    let rho = params.rho_bar;
    let dp = params.pressure.dp(params.rho_bar) * params.rho_bar;
    let mut eta_out = vec![vec![Complex64::default(); n]; 3];
    let mut u_out = vec![vec![Complex64::default(); n]; 3];
    for idx in 0..n {
        let kv = grid.wavevector(idx);
        let k2 = (kv[0] * kv[0] + kv[1] * kv[1] + kv[2] * kv[2]) as f64;
        let eh = [es.spec(0)[idx], es.spec(1)[idx], es.spec(2)[idx]];
        let uh = [us.spec(0)[idx], us.spec(1)[idx], us.spec(2)[idx]];
        if k2 == 0.0 {
            for c in 0..3 {
                eta_out[c][idx] = eh[c] + uh[c] * t;
                u_out[c][idx] = uh[c];
            }
            continue;
        }
        let khat = [
            kv[0] as f64 / k2.sqrt(),
            kv[1] as f64 / k2.sqrt(),
            kv[2] as f64 / k2.sqrt(),
        ];
        let edot: Complex64 = (0..3).map(|d| eh[d] * khat[d]).sum();
        let udot: Complex64 = (0..3).map(|d| uh[d] * khat[d]).sum();
        // longitudinal scalar amplitudes
        let (el, ul) = evolve_mode(rho, params.mu + params.lambda_, params.kappa + dp, k2, edot, udot, t);
        for c in 0..3 {
            let (et, ut) = evolve_mode(
                rho,
                params.mu,
                params.kappa,
                k2,
                eh[c] - edot * khat[c],
                uh[c] - udot * khat[c],
                t,
            );
            eta_out[c][idx] = et + el * khat[c];
            u_out[c][idx] = ut + ul * khat[c];
        }
    }
    (
        Field::from_spectral(grid, Rank::Vector, eta_out),
        Field::from_spectral(grid, Rank::Vector, u_out),
    )
}

/// ηʳ = −∇Δ⁻¹ div η⁰: zero-mean, with div(η⁰ + ηʳ) = 0 modewise. Returns the
/// corrector and the pair (‖ηʳ‖₃, ‖∇η⁰‖₂²) behind its bound.
pub fn stokes_corrector_eta(eta0: &Field) -> (Field, (f64, f64)) {
    let grid = eta0.grid;
    let es = eta0.to_spectral();
    let n = grid.len();
    let mut out = vec![vec![Complex64::default(); n]; 3];
    for idx in 0..n {
        let kv = grid.wavevector(idx);
        let k2 = (kv[0] * kv[0] + kv[1] * kv[1] + kv[2] * kv[2]) as f64;
        if k2 == 0.0 {
            continue;
        }
        let kdot: Complex64 = (0..3).map(|d| es.spec(d)[idx] * kv[d] as f64).sum();
        for c in 0..3 {
            out[c][idx] = -kdot * kv[c] as f64 / k2;
        }
    }
    let etar = Field::from_spectral(grid, Rank::Vector, out);
    let g0 = ops::gradient(eta0);
    let h2 = ops::sobolev_norm(&g0, 2);
    let report = (ops::sobolev_norm(&etar, 3), h2 * h2);
    (etar, report)
}

/// uʳ = ∇Δ⁻¹(div_{Ã⁰} u⁰): zero-mean, with div(u⁰ + uʳ) = div_{A⁰} u⁰.
/// Returns the corrector and the pair (‖uʳ‖₂, ‖∇η⁰‖₂·‖u⁰‖₂).
pub fn stokes_corrector_u(pack0: &DeformationPack, u0: &Field) -> (Field, (f64, f64)) {
    let grid = u0.grid;
    let g = pack0.weighted_divergence(u0, Weight::Tilde);
    let gs = g.to_spectral();
    let n = grid.len();
    let mut out = vec![vec![Complex64::default(); n]; 3];
    for idx in 0..n {
        let kv = grid.wavevector(idx);
        let k2 = (kv[0] * kv[0] + kv[1] * kv[1] + kv[2] * kv[2]) as f64;
        if k2 == 0.0 {
            continue;
        }
        // ∇Δ⁻¹ g: (i k)(−1/|k|²) ĝ
        let val = gs.spec(0)[idx] / k2;
        for c in 0..3 {
            out[c][idx] = -Complex64::new(0.0, 1.0) * kv[c] as f64 * val;
        }
    }
    let ur = Field::from_spectral(grid, Rank::Vector, out);
    let g0 = ops::gradient(&pack0.eta);
    let bound = ops::sobolev_norm(&g0, 2) * ops::sobolev_norm(u0, 2);
    let report = (ops::sobolev_norm(&ur, 2), bound);
    (ur, report)
}

/// Applies both correctors: the linear system is started from
/// (η⁰ + ηʳ, u⁰ + uʳ). Any divergence residue left after correction is the
/// caller's to report, not hidden here.
pub fn build_adjusted_initial_data(
    pack0: &DeformationPack,
    eta0: &Field,
    u0: &Field,
) -> (Field, Field) {
    let (etar, _) = stokes_corrector_eta(eta0);
    let (ur, _) = stokes_corrector_u(pack0, u0);
    (eta0.add(&etar), u0.add(&ur))
}
