//! The barotropic flow-map system: γ-law pressure, implicit Helmholtz-split
//! core, explicit geometric correction 𝒩², and the exact energy functional.

use crate::error::{Error, Result};
use crate::field::{Field, Rank};
use crate::incompressible::{theta_mode_update, DtPolicy, SchemeConfig};
use crate::kinematics::{build_pack_with, DeformationPack, Weight};
use crate::ops;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// γ-law pressure P(τ) = a τ^γ, validated positive and strictly increasing on
/// the operating interval [ρ̄/4, 4ρ̄].
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PressureLaw {
    pub a: f64,
    pub gamma: f64,
}

impl PressureLaw {
    pub fn new(a: f64, gamma: f64, rho_bar: f64) -> Result<Self> {
        let law = Self { a, gamma };
        let (lo, hi) = (rho_bar / 4.0, 4.0 * rho_bar);
        let ok = a.is_finite()
            && gamma.is_finite()
            && law.p(lo) > 0.0
            && law.dp(lo) > 0.0
            && law.dp(hi) > 0.0;
        if ok {
            Ok(law)
        } else {
            Err(Error::BadPressureLaw { lo, hi })
        }
    }

    pub fn p(&self, tau: f64) -> f64 {
        self.a * tau.powf(self.gamma)
    }

    pub fn dp(&self, tau: f64) -> f64 {
        self.a * self.gamma * tau.powf(self.gamma - 1.0)
    }

    pub fn d2p(&self, tau: f64) -> f64 {
        self.a * self.gamma * (self.gamma - 1.0) * tau.powf(self.gamma - 2.0)
    }

    /// Second-order Taylor remainder R(x) = P(ρ̄+x) − P(ρ̄) − P′(ρ̄)x,
    /// equal to ∫₀ˣ (x−z) P″(ρ̄+z) dz.
    pub fn taylor_remainder(&self, rho_bar: f64, x: f64) -> f64 {
        self.p(rho_bar + x) - self.p(rho_bar) - self.dp(rho_bar) * x
    }

    /// The same remainder by adaptive Simpson quadrature of the integral form;
    /// kept as an independent cross-check of the closed form.
    pub fn taylor_remainder_quadrature(&self, rho_bar: f64, x: f64) -> f64 {
        simpson_adaptive(|z| (x - z) * self.d2p(rho_bar + z), 0.0, x, 1e-12, 30)
    }

    /// ∫_{ρ̄/4}^{upper} P(z)/z² dz in closed form.
    pub fn energy_integrand(&self, rho_bar: f64, upper: f64) -> f64 {
        let lo = rho_bar / 4.0;
        let g = self.gamma;
        if (g - 1.0).abs() < 1e-12 {
            self.a * (upper / lo).ln()
        } else {
            self.a * (upper.powf(g - 1.0) - lo.powf(g - 1.0)) / (g - 1.0)
        }
    }

    pub fn energy_integrand_quadrature(&self, rho_bar: f64, upper: f64) -> f64 {
        simpson_adaptive(|z| self.p(z) / (z * z), rho_bar / 4.0, upper, 1e-12, 30)
    }
}

fn simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
}

fn simpson_adaptive(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    fn rec(f: &impl Fn(f64) -> f64, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let left = simpson(f, a, m);
        let right = simpson(f, m, b);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            rec(f, a, m, left, tol / 2.0, depth - 1) + rec(f, m, b, right, tol / 2.0, depth - 1)
        }
    }
    if a == b {
        return 0.0;
    }
    rec(&f, a, b, simpson(&f, a, b), tol, depth)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CompressibleParams {
    pub rho_bar: f64,
    pub mu: f64,
    pub lambda_: f64,
    pub kappa: f64,
    pub pressure: PressureLaw,
}

impl CompressibleParams {
    pub fn new(rho_bar: f64, mu: f64, lambda_: f64, kappa: f64, pressure: PressureLaw) -> Result<Self> {
        for (v, name) in [(rho_bar, "rho_bar"), (mu, "mu"), (kappa, "kappa")] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Format(format!("{name} must be positive, got {v}")));
            }
        }
        if lambda_ < -mu / 3.0 {
            return Err(Error::Format(format!(
                "lambda = {lambda_} violates lambda >= -mu/3 = {}",
                -mu / 3.0
            )));
        }
        Ok(Self {
            rho_bar,
            mu,
            lambda_,
            kappa,
            pressure,
        })
    }

    /// Effective longitudinal stiffness κ + P′(ρ̄)ρ̄.
    pub fn kappa_long(&self) -> f64 {
        self.kappa + self.pressure.dp(self.rho_bar) * self.rho_bar
    }
}

/// The Eulerian density pulled back to flow-map coordinates: ϱ = ρ̄ J⁻¹,
/// never a prognostic variable.
pub fn density_field(pack: &DeformationPack, rho_bar: f64) -> Field {
    pack.field_of_j(|j| rho_bar / j)
}

fn check_j_range(pack: &DeformationPack) -> Result<()> {
    // ρ̄J⁻¹ must stay inside the validated interval [ρ̄/4, 4ρ̄]
    if pack.min_j < 0.25 || pack.max_j > 4.0 {
        return Err(Error::OutOfRange {
            value: if pack.min_j < 0.25 { pack.min_j } else { pack.max_j },
            lo: 0.25,
            hi: 4.0,
        });
    }
    Ok(())
}

/// 𝒩² of the nonhomogeneous form: everything left over once the
/// constant-coefficient operator is split off, assembled term by term.
pub fn n2_term(pack: &DeformationPack, u: &Field, params: &CompressibleParams) -> Result<Field> {
    check_j_range(pack)?;
    let (mu, lam) = (params.mu, params.lambda_);
    let rb = params.rho_bar;
    let law = &params.pressure;

    // viscous: μ[(J−1)Δ_A u + div_Ã ∇_A u + div ∇_Ã u]
    let grad_a_u = pack.weighted_gradient_vec(u, Weight::Full);
    let lap_a_u = pack.weighted_divergence_tensor(&grad_a_u, Weight::Full);
    let visc = pack
        .scale_by_j(&lap_a_u, |j| j - 1.0)
        .add(&pack.weighted_divergence_tensor(&grad_a_u, Weight::Tilde))
        .add(&ops::divergence(&pack.weighted_gradient_vec(u, Weight::Tilde)))
        .scale(mu);

    // dilatational: λ[(J−1)∇_A div_A u + ∇_Ã div_A u + ∇ div_Ã u]
    let div_a_u = pack.weighted_divergence(u, Weight::Full);
    let grad_a_div = pack.weighted_gradient(&div_a_u, Weight::Full);
    let dila = pack
        .scale_by_j(&grad_a_div, |j| j - 1.0)
        .add(&pack.weighted_gradient(&div_a_u, Weight::Tilde))
        .add(&ops::gradient(&pack.weighted_divergence(u, Weight::Tilde)))
        .scale(lam);

    // pressure: −(J−1)∇_A P − ∇_Ã P − ∇[P′(ρ̄)ρ̄(J⁻¹−1+div η) + R(ρ̄(J⁻¹−1))]
    let p_field = pack.field_of_j(|j| law.p(rb / j));
    let grad_a_p = pack.weighted_gradient(&p_field, Weight::Full);
    let p1 = pack.scale_by_j(&grad_a_p, |j| j - 1.0);
    let p2 = pack.weighted_gradient(&p_field, Weight::Tilde);
    let dpr = law.dp(rb) * rb;
    let scalar = pack
        .field_of_j(|j| dpr * (1.0 / j - 1.0) + law.taylor_remainder(rb, rb * (1.0 / j - 1.0)))
        .add(&ops::divergence(&pack.eta).scale(dpr));
    let p3 = ops::gradient(&scalar);

    Ok(visc.add(&dila).sub(&p1).sub(&p2).sub(&p3))
}

/// The right-hand side read directly off the momentum equation:
/// μ(JΔ_A u − Δu) + λ(J∇_A div_A u − ∇div u) − J∇_A P(ρ̄J⁻¹) − P′(ρ̄)ρ̄∇div η.
/// Algebraically identical to [`n2_term`]; retained as an oracle.
pub fn n2_term_direct(pack: &DeformationPack, u: &Field, params: &CompressibleParams) -> Result<Field> {
    check_j_range(pack)?;
    let rb = params.rho_bar;
    let law = &params.pressure;
    let grad_a_u = pack.weighted_gradient_vec(u, Weight::Full);
    let lap_a_u = pack.weighted_divergence_tensor(&grad_a_u, Weight::Full);
    let visc = pack
        .scale_by_j(&lap_a_u, |j| j)
        .sub(&ops::divergence(&ops::gradient(u)))
        .scale(params.mu);
    let div_a_u = pack.weighted_divergence(u, Weight::Full);
    let dila = pack
        .scale_by_j(&pack.weighted_gradient(&div_a_u, Weight::Full), |j| j)
        .sub(&ops::gradient(&ops::divergence(u)))
        .scale(params.lambda_);
    let p_field = pack.field_of_j(|j| law.p(rb / j));
    let pres = pack.scale_by_j(&pack.weighted_gradient(&p_field, Weight::Full), |j| j);
    let lin_p = ops::gradient(&ops::divergence(&pack.eta)).scale(law.dp(rb) * rb);
    Ok(visc.add(&dila).sub(&pres).sub(&lin_p))
}

#[derive(Clone, Debug)]
pub struct CompressibleState {
    pub eta: Field,
    pub u: Field,
    pub t: f64,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct CompressibleStepStats {
    pub dt: f64,
    pub min_j: f64,
    pub max_j: f64,
    /// whether J stayed inside the soft window [1/2, 3/2]
    pub in_window: bool,
}

/// Implicit update of the constant-coefficient part of the nonhomogeneous
/// form, solved exactly per mode through the Helmholtz split: transverse
/// components damp with (μ, κ), longitudinal with (μ+λ, κ + P′(ρ̄)ρ̄).
fn implicit_split_update(
    params: &CompressibleParams,
    dt: f64,
    theta: f64,
    eta: &Field,
    u: &Field,
    f: &Field,
) -> (Field, Field) {
    let grid = eta.grid;
    let es = eta.to_spectral();
    let us = u.to_spectral();
    let fs = f.to_spectral();
    let n = grid.len();
    let rho = params.rho_bar;
    let k_long = params.kappa_long();
    let mu_long = params.mu + params.lambda_;
    let mut eta_out = vec![vec![Complex64::default(); n]; 3];
    let mut u_out = vec![vec![Complex64::default(); n]; 3];
    for idx in 0..n {
        let kv = grid.wavevector(idx);
        let a = (kv[0] * kv[0] + kv[1] * kv[1] + kv[2] * kv[2]) as f64;
        let eh = [es.spec(0)[idx], es.spec(1)[idx], es.spec(2)[idx]];
        let uh = [us.spec(0)[idx], us.spec(1)[idx], us.spec(2)[idx]];
        let fh = [fs.spec(0)[idx], fs.spec(1)[idx], fs.spec(2)[idx]];
        if a == 0.0 {
            for c in 0..3 {
                let (e1, u1) =
                    theta_mode_update(rho, 0.0, 0.0, 0.0, dt, theta, eh[c], uh[c], fh[c]);
                eta_out[c][idx] = e1;
                u_out[c][idx] = u1;
            }
            continue;
        }
        let khat = [
            kv[0] as f64 / a.sqrt(),
            kv[1] as f64 / a.sqrt(),
            kv[2] as f64 / a.sqrt(),
        ];
        let dot = |v: &[Complex64; 3]| -> Complex64 { (0..3).map(|d| v[d] * khat[d]).sum() };
        let (el, ul, fl) = (dot(&eh), dot(&uh), dot(&fh));
        let (el1, ul1) = theta_mode_update(rho, mu_long, k_long, a, dt, theta, el, ul, fl);
        for c in 0..3 {
            let (et1, ut1) = theta_mode_update(
                rho,
                params.mu,
                params.kappa,
                a,
                dt,
                theta,
                eh[c] - el * khat[c],
                uh[c] - ul * khat[c],
                fh[c] - fl * khat[c],
            );
            eta_out[c][idx] = et1 + el1 * khat[c];
            u_out[c][idx] = ut1 + ul1 * khat[c];
        }
    }
    (
        Field::from_spectral(grid, Rank::Vector, eta_out),
        Field::from_spectral(grid, Rank::Vector, u_out),
    )
}

pub struct CompressibleIntegrator {
    pub state: CompressibleState,
    pub params: CompressibleParams,
    pub cfg: SchemeConfig,
    pub stats: CompressibleStepStats,
    n2_prev: Option<(f64, Field)>,
}

impl CompressibleIntegrator {
    pub fn new(eta0: Field, u0: Field, params: CompressibleParams, cfg: SchemeConfig) -> Self {
        CompressibleIntegrator {
            state: CompressibleState {
                eta: eta0,
                u: u0,
                t: 0.0,
            },
            params,
            cfg,
            stats: CompressibleStepStats::default(),
            n2_prev: None,
        }
    }

    fn pack(&self, eta: &Field) -> Result<DeformationPack> {
        let pack = build_pack_with(eta, self.cfg.j_floor, self.cfg.dealias)?;
        if pack.min_j <= self.cfg.j_floor {
            return Err(Error::SingularMap { min_j: pack.min_j });
        }
        check_j_range(&pack)?;
        Ok(pack)
    }

    fn substep(&mut self, dt: f64, theta: f64, force: &Field) -> Result<()> {
        let (eta1, u1) = implicit_split_update(&self.params, dt, theta, &self.state.eta, &self.state.u, force);
        let pack1 = self.pack(&eta1)?;
        self.stats = CompressibleStepStats {
            dt,
            min_j: pack1.min_j,
            max_j: pack1.max_j,
            in_window: pack1.min_j >= 0.5 && pack1.max_j <= 1.5,
        };
        self.state = CompressibleState {
            eta: eta1,
            u: u1,
            t: self.state.t + dt,
        };
        Ok(())
    }

    fn eval_n2(&self) -> Result<Field> {
        let pack = self.pack(&self.state.eta)?;
        n2_term(&pack, &self.state.u, &self.params)
    }

    pub fn step(&mut self) -> Result<f64> {
        let dt = match self.cfg.dt {
            DtPolicy::Fixed { dt } => dt,
            DtPolicy::Cfl { dt_max, c_cfl } => {
                let gn = ops::gradient(&self.state.u).max_abs();
                if gn == 0.0 {
                    dt_max
                } else {
                    dt_max.min(c_cfl / gn)
                }
            }
        };
        match self.cfg.order {
            1 => {
                let f = self.eval_n2()?;
                self.substep(dt, 1.0, &f)?;
            }
            2 => {
                if self.n2_prev.is_none() {
                    let f_a = self.eval_n2()?;
                    self.substep(dt / 2.0, 1.0, &f_a)?;
                    let t_mid = self.state.t;
                    let f_b = self.eval_n2()?;
                    self.substep(dt / 2.0, 1.0, &f_b)?;
                    self.n2_prev = Some((t_mid, f_b));
                } else {
                    let (t_prev, f_prev) = self.n2_prev.take().unwrap();
                    let t_now = self.state.t;
                    let f_now = self.eval_n2()?;
                    let theta = (dt / 2.0) / (t_now - t_prev);
                    let f_half = f_now.axpy(1.0 + theta, &f_prev, -theta);
                    self.substep(dt, 0.5, &f_half)?;
                    self.n2_prev = Some((t_now, f_now));
                }
            }
            o => return Err(Error::Format(format!("unsupported scheme order {o}"))),
        }
        Ok(dt)
    }

    pub fn run_to(&mut self, t_final: f64, mut on_step: impl FnMut(&CompressibleIntegrator)) -> Result<()> {
        while self.state.t < t_final - 1e-12 {
            let dt = match self.cfg.dt {
                DtPolicy::Fixed { dt } => dt,
                DtPolicy::Cfl { dt_max, .. } => dt_max,
            }
            .min(t_final - self.state.t);
            let saved = self.cfg.dt;
            self.cfg.dt = DtPolicy::Fixed { dt };
            let r = self.step();
            self.cfg.dt = saved;
            r?;
            on_step(self);
        }
        Ok(())
    }
}

/// The exact dissipated functional
/// ρ̄‖u‖₀² + ρ̄ ∫ ∫_{ρ̄/4}^{ρ̄J⁻¹} P(z)/z² dz dy + κ‖∇η‖₀².
/// `excess` subtracts the rest-state value so that small motions register.
#[derive(Clone, Copy, Debug)]
pub struct CompressibleEnergy {
    pub total: f64,
    pub rest: f64,
    pub excess: f64,
}

pub fn compressible_energy(
    pack: &DeformationPack,
    u: &Field,
    params: &CompressibleParams,
) -> CompressibleEnergy {
    let rb = params.rho_bar;
    let law = &params.pressure;
    let inner = pack.integral_of_j(|j| law.energy_integrand(rb, rb / j));
    let total = rb * ops::l2_norm_sq(u)
        + rb * inner
        + params.kappa * ops::l2_norm_sq(&ops::gradient(&pack.eta));
    let rest = rb * crate::grid::VOLUME * law.energy_integrand(rb, rb);
    CompressibleEnergy {
        total,
        rest,
        excess: total - rest,
    }
}

/// Residual of the Jacobian transport identity J_t = J div_A u, evaluated as
/// ‖(J₁ − J₀)/dt − avg(J div_A u)‖₀ over one step.
pub fn jacobian_transport_residual(
    pack0: &DeformationPack,
    pack1: &DeformationPack,
    u0: &Field,
    u1: &Field,
    dt: f64,
) -> f64 {
    let jdiv = |pack: &DeformationPack, u: &Field| {
        pack.scale_by_j(&pack.weighted_divergence(u, Weight::Full), |j| j)
    };
    let rate = pack1.jac.sub(&pack0.jac).scale(1.0 / dt);
    let mid = jdiv(pack0, u0).add(&jdiv(pack1, u1)).scale(0.5);
    ops::l2_norm(&rate.sub(&mid))
}
