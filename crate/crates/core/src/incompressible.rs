//! Time integration of the incompressible flow map system: implicit
//! constant-coefficient core, explicit geometric correction, and a spectral
//! pressure projection.

use crate::error::{Error, Result};
use crate::field::{Field, Rank};
use crate::grid::{DealiasMode, Grid};
use crate::kinematics::{a_gradient, build_pack_with, DeformationPack, Weight, J_FLOOR};
use crate::ops;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct FlowParams {
    pub rho: f64,
    pub mu: f64,
    pub kappa: f64,
}

impl FlowParams {
    pub fn new(rho: f64, mu: f64, kappa: f64) -> Result<Self> {
        for (v, name) in [(rho, "rho"), (mu, "mu"), (kappa, "kappa")] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Format(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(Self { rho, mu, kappa })
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DtPolicy {
    Fixed { dt: f64 },
    Cfl { dt_max: f64, c_cfl: f64 },
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub dt: DtPolicy,
    pub order: u32,
    pub proj_tol: f64,
    pub max_picard: usize,
    pub vol_tol: f64,
    pub j_floor: f64,
    pub dealias: DealiasMode,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        Self {
            dt: DtPolicy::Fixed { dt: 1e-2 },
            order: 2,
            proj_tol: 1e-10,
            max_picard: 50,
            vol_tol: 1e-6,
            j_floor: J_FLOOR,
            dealias: DealiasMode::Pad32,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FlowState {
    pub eta: Field,
    pub u: Field,
    pub q: Field,
    pub t: f64,
}

/// Per-step bookkeeping for diagnostics rows.
#[derive(Clone, Copy, Debug, Default)]
pub struct StepStats {
    pub dt: f64,
    pub picard_iters: usize,
    pub min_j: f64,
    pub max_j: f64,
    pub div_residual: f64,
}

/// The geometric correction 𝒩¹(η, u, q) = μ(div_Ã ∇_A u + div ∇_Ã u) − ∇_Ã q.
/// Vanishes identically at η = 0 since Ã = 0 there.
pub fn n1_term(pack: &DeformationPack, u: &Field, q: &Field, mu: f64) -> Field {
    let ga = pack.weighted_gradient_vec(u, Weight::Full);
    let t1 = pack.weighted_divergence_tensor(&ga, Weight::Tilde);
    let gt = pack.weighted_gradient_vec(u, Weight::Tilde);
    let t2 = ops::divergence(&gt);
    let t3 = pack.weighted_gradient(q, Weight::Tilde);
    t1.add(&t2).scale(mu).sub(&t3)
}

/// Solves Δ_A q = rhs by the fixed-point iteration
/// q ← q + Δ⁻¹(rhs − Δ_A q), which contracts while ‖Ã‖ stays small.
/// Returns the zero-mean solution and the number of Δ⁻¹ applications.
pub fn pressure_solve(
    pack: &DeformationPack,
    rhs: &Field,
    rel_tol: f64,
    max_iter: usize,
) -> Result<(Field, usize)> {
    let rhs_norm = ops::l2_norm(rhs);
    if rhs_norm == 0.0 {
        return Ok((Field::zeros(rhs.grid, Rank::Scalar), 0));
    }
    // Δ_A maps onto zero-mean functions only up to quadrature error (the J
    // division in A = cof/J breaks the discrete Piola identity at truncation
    // level), so convergence is measured on the zero-mean part; the mean
    // defect has no continuous counterpart and no gradient can remove it.
    let rhs0 = drop_mean(rhs);
    let mut q = ops::inverse_laplacian(&rhs0)?;
    let mut iters = 1;
    loop {
        let res = drop_mean(&rhs0.sub(&pack.a_laplacian(&q)));
        let res_norm = ops::l2_norm(&res);
        if res_norm <= rel_tol * rhs_norm {
            return Ok((q, iters));
        }
        if iters >= max_iter {
            return Err(Error::NoConvergence {
                iterations: iters,
                residual: res_norm / rhs_norm,
            });
        }
        q = q.add(&ops::inverse_laplacian(&res)?);
        iters += 1;
    }
}

/// Zero-mean part of a scalar field.
fn drop_mean(f: &Field) -> Field {
    let mut comps = vec![f.to_spectral().spec(0).to_vec()];
    comps[0][0] = Complex64::default();
    Field::from_spectral(f.grid, Rank::Scalar, comps)
}

/// Projects u* onto div_A u = 0: solves Δ_A q = (ρ/dt) div_A u*, then
/// u = u* − (dt/ρ) ∇_A q. Returns (u, q, iterations).
pub fn project_velocity(
    pack: &DeformationPack,
    u_star: &Field,
    dt: f64,
    params: &FlowParams,
    cfg: &SchemeConfig,
) -> Result<(Field, Field, usize)> {
    // only the zero-mean part of div_A u* is correctable by a gradient; the
    // mean is a quadrature defect bounded by the volume-drift check
    let div = drop_mean(&pack.weighted_divergence(u_star, Weight::Full));
    let grad_norm = ops::l2_norm(&ops::gradient(u_star));
    let div_norm = ops::l2_norm(&div);
    if div_norm <= cfg.proj_tol * grad_norm.max(1e-300) {
        return Ok((u_star.clone(), Field::zeros(u_star.grid, Rank::Scalar), 0));
    }
    // Target: ‖div_A u‖₀ ≤ proj_tol · ‖∇u*‖₀. The solve tolerance is relative
    // to ‖div_A u*‖₀, so rescale.
    let rel_tol = (cfg.proj_tol * grad_norm / div_norm).min(0.5);
    let rhs = div.scale(params.rho / dt);
    let (q, iters) = pressure_solve(pack, &rhs, rel_tol, cfg.max_picard)?;
    let u = u_star.axpy(1.0, &a_gradient(pack, &q), -dt / params.rho);
    Ok((u, q, iters))
}

/// One θ-scheme update of the scalar damped oscillator
/// ρ u̇ = −a μ u − a κ η + F, η̇ = u, with u and F sampled θ-implicitly.
pub(crate) fn theta_mode_update(
    rho: f64,
    mu: f64,
    kappa: f64,
    a: f64,
    dt: f64,
    theta: f64,
    e0: Complex64,
    u0: Complex64,
    f0: Complex64,
) -> (Complex64, Complex64) {
    // substituting η⁺ = η + dt((1−θ)u + θu⁺) into the θ-implicit momentum
    // update leaves η sampled at θη⁺ + (1−θ)η = η + dtθ(1−θ)u + dtθ²u⁺
    let denom = rho + theta * dt * a * mu + theta * theta * dt * dt * a * kappa;
    let num = u0 * rho - u0 * ((1.0 - theta) * dt * a * mu)
        - (e0 + u0 * (theta * (1.0 - theta) * dt)) * (dt * a * kappa)
        + f0 * dt;
    let u1 = num / denom;
    let e1 = e0 + (u0 * (1.0 - theta) + u1 * theta) * dt;
    (e1, u1)
}

/// One implicit update of the constant-coefficient core
/// ρ u_t − μΔu − κΔη = F, η_t = u, solved exactly per Fourier mode.
/// `theta` selects backward Euler (1.0) or Crank–Nicolson (0.5).
fn implicit_mode_update(
    grid: Grid,
    params: &FlowParams,
    dt: f64,
    theta: f64,
    eta: &Field,
    u: &Field,
    f: &Field,
) -> (Field, Field) {
    let es = eta.to_spectral();
    let us = u.to_spectral();
    let fs = f.to_spectral();
    let n = grid.len();
    let (rho, mu, kappa) = (params.rho, params.mu, params.kappa);
    let mut eta_out = vec![vec![Complex64::default(); n]; 3];
    let mut u_out = vec![vec![Complex64::default(); n]; 3];
    for idx in 0..n {
        let k = grid.wavevector(idx);
        let a = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64;
        for c in 0..3 {
            let (e1, u1) = theta_mode_update(
                rho,
                mu,
                kappa,
                a,
                dt,
                theta,
                es.spec(c)[idx],
                us.spec(c)[idx],
                fs.spec(c)[idx],
            );
            eta_out[c][idx] = e1;
            u_out[c][idx] = u1;
        }
    }
    (
        Field::from_spectral(grid, Rank::Vector, eta_out),
        Field::from_spectral(grid, Rank::Vector, u_out),
    )
}

pub struct Integrator {
    pub state: FlowState,
    pub params: FlowParams,
    pub cfg: SchemeConfig,
    pub stats: StepStats,
    // previous (time, explicit force, pressure) for midpoint extrapolation
    prev: Option<(f64, Field, Field)>,
}

impl Integrator {
    pub fn new(eta0: Field, u0: Field, params: FlowParams, cfg: SchemeConfig) -> Self {
        let grid = eta0.grid;
        Integrator {
            state: FlowState {
                eta: eta0,
                u: u0,
                q: Field::zeros(grid, Rank::Scalar),
                t: 0.0,
            },
            params,
            cfg,
            stats: StepStats::default(),
            prev: None,
        }
    }

    fn pack(&self, eta: &Field) -> Result<DeformationPack> {
        let pack = build_pack_with(eta, self.cfg.j_floor, self.cfg.dealias)?;
        if pack.min_j <= self.cfg.j_floor {
            return Err(Error::SingularMap { min_j: pack.min_j });
        }
        Ok(pack)
    }

    fn pick_dt(&self) -> f64 {
        match self.cfg.dt {
            DtPolicy::Fixed { dt } => dt,
            DtPolicy::Cfl { dt_max, c_cfl } => {
                let gn = ops::gradient(&self.state.u).max_abs();
                if gn == 0.0 {
                    dt_max
                } else {
                    dt_max.min(c_cfl / gn)
                }
            }
        }
    }

    /// Single step of size dt with the explicit force (𝒩¹ − ∇q̂) frozen at
    /// `force`; the projection then solves only for the pressure increment on
    /// top of the reference `q_ref`, which keeps the splitting second order.
    fn substep(&mut self, dt: f64, theta: f64, force: &Field, q_ref: &Field) -> Result<()> {
        let (eta1, u_star) = implicit_mode_update(
            self.state.eta.grid,
            &self.params,
            dt,
            theta,
            &self.state.eta,
            &self.state.u,
            force,
        );
        let pack1 = self.pack(&eta1)?;
        let (u1, dq, iters) = project_velocity(&pack1, &u_star, dt, &self.params, &self.cfg)?;
        let q1 = q_ref.add(&dq);
        let jac_drift = (pack1.min_j - 1.0).abs().max((pack1.max_j - 1.0).abs());
        if jac_drift > self.cfg.vol_tol {
            return Err(Error::StepRejected {
                jac_drift,
                tol: self.cfg.vol_tol,
            });
        }
        self.stats = StepStats {
            dt,
            picard_iters: iters,
            min_j: pack1.min_j,
            max_j: pack1.max_j,
            div_residual: ops::l2_norm(&pack1.weighted_divergence(&u1, Weight::Full)),
        };
        self.state = FlowState {
            eta: eta1,
            u: u1,
            q: q1,
            t: self.state.t + dt,
        };
        Ok(())
    }

    /// 𝒩¹ − ∇q at the current state: everything the implicit core does not
    /// see, pressure gradient included.
    fn eval_force(&self) -> Result<Field> {
        let pack = self.pack(&self.state.eta)?;
        let n1 = n1_term(&pack, &self.state.u, &self.state.q, self.params.mu);
        Ok(n1.sub(&ops::gradient(&self.state.q)))
    }

    /// Advance one step; returns the size actually taken.
    pub fn step(&mut self) -> Result<f64> {
        let dt = self.pick_dt();
        match self.cfg.order {
            1 => {
                let f_now = self.eval_force()?;
                let q_ref = self.state.q.clone();
                self.substep(dt, 1.0, &f_now, &q_ref)?;
            }
            2 => {
                if self.prev.is_none() {
                    // bootstrap: two backward-Euler half steps carry their own
                    // O(dt²) local error, then the stored sample enables the
                    // midpoint extrapolation from the next step onward
                    let f_a = self.eval_force()?;
                    let q_a = self.state.q.clone();
                    self.substep(dt / 2.0, 1.0, &f_a, &q_a)?;
                    let t_mid = self.state.t;
                    let f_b = self.eval_force()?;
                    let q_b = self.state.q.clone();
                    self.substep(dt / 2.0, 1.0, &f_b, &q_b)?;
                    self.prev = Some((t_mid, f_b, q_b));
                } else {
                    let (t_prev, f_prev, q_prev) = self.prev.take().unwrap();
                    let t_now = self.state.t;
                    let f_now = self.eval_force()?;
                    let q_now = self.state.q.clone();
                    // extrapolate force and pressure to t_now + dt/2
                    let theta = (dt / 2.0) / (t_now - t_prev);
                    let f_half = f_now.axpy(1.0 + theta, &f_prev, -theta);
                    let q_half = q_now.axpy(1.0 + theta, &q_prev, -theta);
                    self.substep(dt, 0.5, &f_half, &q_half)?;
                    self.prev = Some((t_now, f_now, q_now));
                }
            }
            o => return Err(Error::Format(format!("unsupported scheme order {o}"))),
        }
        Ok(dt)
    }

    /// Advance until t ≥ t_final, shortening the last step to land exactly.
    pub fn run_to(&mut self, t_final: f64, mut on_step: impl FnMut(&Integrator)) -> Result<()> {
        while self.state.t < t_final - 1e-12 {
            let dt = self.pick_dt().min(t_final - self.state.t);
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

/// Makes u⁰ compatible with the constraint div_{A⁰} u⁰ = 0 by the A-weighted
/// projection u⁰ = u_raw − ∇_{A⁰} q with Δ_{A⁰} q = div_{A⁰} u_raw.
pub fn make_initial_data(
    eta0: &Field,
    u_raw: &Field,
    params: &FlowParams,
    cfg: &SchemeConfig,
) -> Result<(Field, Field)> {
    let pack = build_pack_with(eta0, cfg.j_floor, cfg.dealias)?;
    // dt = ρ makes the projection factor dt/ρ equal one
    let (u0, _, _) = project_velocity(&pack, u_raw, params.rho, params, cfg)?;
    Ok((eta0.to_spectral(), u0))
}

/// The smallness threshold on κ: (1/c₂) max{2√(c₁ I₀ʰ), (4 c₁ I₀ʰ)²}.
pub fn kappa_threshold(i0h: f64, c1: f64, c2: f64) -> f64 {
    let x = c1 * i0h;
    (2.0 * x.sqrt()).max((4.0 * x).powi(2)) / c2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::{build_pack, make_volume_preserving_eta, EtaKind};
    use crate::ops::{l2_norm, sobolev_norm};

    fn grid() -> Grid {
        Grid::cubic(16).unwrap()
    }

    fn shear_velocity(grid: Grid, amp: f64) -> Field {
        Field::from_fn(grid, Rank::Vector, move |_, y2, _, c| {
            if c == 0 {
                amp * y2.sin()
            } else {
                0.0
            }
        })
    }

    #[test]
    fn threshold_example() {
        assert!((kappa_threshold(0.25, 2.0, 0.5) - 8.0).abs() < 1e-14);
        // small data: the sqrt branch dominates
        assert!((kappa_threshold(1e-4, 1.0, 1.0) - 0.02).abs() < 1e-12);
    }

    #[test]
    fn rest_state_is_fixed() {
        let grid = grid();
        let params = FlowParams::new(1.0, 1.0, 1.0).unwrap();
        let cfg = SchemeConfig::default();
        let mut it = Integrator::new(
            Field::zeros(grid, Rank::Vector),
            Field::zeros(grid, Rank::Vector),
            params,
            cfg,
        );
        for _ in 0..3 {
            it.step().unwrap();
        }
        assert!(l2_norm(&it.state.u) < 1e-14);
        assert!(l2_norm(&it.state.eta) < 1e-14);
        assert_eq!(it.stats.picard_iters, 0);
    }

    #[test]
    fn n1_vanishes_at_identity_and_scales_quadratically() {
        let grid = grid();
        let u = shear_velocity(grid, 0.3);
        let q = Field::zeros(grid, Rank::Scalar);
        let pack0 = build_pack(&Field::zeros(grid, Rank::Vector)).unwrap();
        assert!(l2_norm(&n1_term(&pack0, &u, &q, 1.0)) < 1e-13);
        // 𝒩¹ is linear in u and (at fixed u) linear in Ã ~ ε, so with
        // u ~ ε as well the whole term scales like ε²; u₂(y₁) makes the
        // cross terms with the y₂-shear nontrivial
        let norm_at = |eps: f64| {
            let eta = make_volume_preserving_eta(grid, EtaKind::Shear, eps, 1).unwrap();
            let pack = build_pack(&eta).unwrap();
            let u = Field::from_fn(grid, Rank::Vector, move |y1, _, _, c| {
                if c == 1 {
                    eps * y1.sin()
                } else {
                    0.0
                }
            });
            l2_norm(&n1_term(&pack, &u, &q, 1.0))
        };
        let ratio = norm_at(0.02) / norm_at(0.01);
        assert!((3.8..=4.2).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn pressure_solver_manufactured_solution() {
        let grid = grid();
        let eta = make_volume_preserving_eta(grid, EtaKind::Shear, 0.1, 1).unwrap();
        let pack = build_pack(&eta).unwrap();
        let q_exact = Field::from_fn(grid, Rank::Scalar, |y1, y2, _, _| {
            (y1).cos() + 0.5 * (2.0 * y2).sin()
        });
        let rhs = pack.a_laplacian(&q_exact);
        let (q, iters) = pressure_solve(&pack, &rhs, 1e-12, 50).unwrap();
        assert!(l2_norm(&q.sub(&q_exact)) < 1e-9 * l2_norm(&q_exact));
        assert!(iters > 1 && iters < 30, "iters {iters}");
        // flat map: converges after the first inversion
        let pack0 = build_pack(&Field::zeros(grid, Rank::Vector)).unwrap();
        let rhs0 = ops::laplacian(&q_exact);
        let (q0, it0) = pressure_solve(&pack0, &rhs0, 1e-12, 50).unwrap();
        assert_eq!(it0, 1);
        assert!(l2_norm(&q0.sub(&q_exact)) < 1e-12);
    }

    #[test]
    fn projection_kills_weighted_divergence() {
        let grid = grid();
        let eta = make_volume_preserving_eta(grid, EtaKind::ComposedShears, 0.08, 1).unwrap();
        let pack = build_pack(&eta).unwrap();
        let params = FlowParams::new(1.0, 1.0, 1.0).unwrap();
        let cfg = SchemeConfig::default();
        let u_raw = Field::from_fn(grid, Rank::Vector, |y1, y2, y3, c| match c {
            0 => 0.2 * (y2.sin() + y3.cos()),
            1 => 0.1 * y1.sin(),
            _ => 0.15 * (y1 + y2).cos(),
        });
        let (u, q, _) = project_velocity(&pack, &u_raw, 0.01, &params, &cfg).unwrap();
        let div = pack.weighted_divergence(&u, Weight::Full);
        let bound = cfg.proj_tol * l2_norm(&ops::gradient(&u_raw));
        assert!(l2_norm(&div) <= 2.0 * bound, "residual {}", l2_norm(&div));
        assert!(l2_norm(&q) > 0.0);
    }

    #[test]
    fn small_data_step_matches_linear_solution() {
        let grid = grid();
        let params = FlowParams::new(1.0, 1.0, 1.0).unwrap();
        let eps = 1e-6;
        let u0 = shear_velocity(grid, eps);
        let z = Field::zeros(grid, Rank::Vector);
        let dt = 1e-3;
        let cfg = SchemeConfig {
            dt: DtPolicy::Fixed { dt },
            ..Default::default()
        };
        let mut it = Integrator::new(z.clone(), u0.clone(), params, cfg);
        for _ in 0..4 {
            it.step().unwrap();
        }
        let (e_lin, u_lin) =
            crate::linear::solve_linear_incompressible(&z, &u0, &params, it.state.t).unwrap();
        let du = sobolev_norm(&it.state.u.sub(&u_lin), 0);
        let de = sobolev_norm(&it.state.eta.sub(&e_lin), 0);
        let scale = sobolev_norm(&u0, 0);
        // deviation from the linear flow is O(dt²·ε) from the scheme plus
        // O(ε²) from the nonlinearity; both sit far below ε here
        assert!(du < 1e-5 * scale, "du/scale = {}", du / scale);
        assert!(de < 1e-5 * scale, "de/scale = {}", de / scale);
    }

    #[test]
    fn order_two_beats_order_one() {
        let grid = grid();
        let params = FlowParams::new(1.0, 1.0, 1.0).unwrap();
        let u0 = shear_velocity(grid, 0.05);
        let z = Field::zeros(grid, Rank::Vector);
        let run = |order: u32, dt: f64| {
            let cfg = SchemeConfig {
                dt: DtPolicy::Fixed { dt },
                order,
                ..Default::default()
            };
            let mut it = Integrator::new(z.clone(), u0.clone(), params, cfg);
            it.run_to(0.5, |_| {}).unwrap();
            it.state.u
        };
        let fine = run(2, 1.25e-3);
        let err = |u: &Field| l2_norm(&u.sub(&fine));
        let e2c = err(&run(2, 2e-2));
        let e2f = err(&run(2, 1e-2));
        let rate2 = (e2c / e2f).log2();
        assert!(rate2 > 1.6, "order-2 observed rate {rate2}");
        let e1c = err(&run(1, 2e-2));
        let e1f = err(&run(1, 1e-2));
        let rate1 = (e1c / e1f).log2();
        assert!((0.6..=1.5).contains(&rate1), "order-1 observed rate {rate1}");
        assert!(e2f < e1f, "order 2 should be more accurate at equal dt");
    }
}
