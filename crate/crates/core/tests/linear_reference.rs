//! The closed-form mode solutions are checked against the PDEs themselves by
//! finite time differences — a route entirely independent of the root algebra.

use visco_core::compressible::{CompressibleParams, PressureLaw};
use visco_core::field::{Field, Rank};
use visco_core::grid::Grid;
use visco_core::incompressible::FlowParams;
use visco_core::linear::{solve_linear_compressible, solve_linear_incompressible};
use visco_core::ops;
use visco_core::synth;

fn grid() -> Grid {
    Grid::cubic(16).unwrap()
}

#[test]
fn incompressible_solution_satisfies_the_pde() {
    let g = grid();
    let params = FlowParams::new(1.3, 0.8, 2.5).unwrap();
    let u0 = synth::random_divergence_free(g, 3, 3.0, 0.5, 42);
    let eta0 = synth::random_divergence_free(g, 3, 3.0, 0.3, 43);
    let h = 1e-4;
    for t in [0.3, 1.1] {
        let (eta, u) = solve_linear_incompressible(&eta0, &u0, &params, t).unwrap();
        let (_, u_p) = solve_linear_incompressible(&eta0, &u0, &params, t + h).unwrap();
        let (eta_p, u_m) = solve_linear_incompressible(&eta0, &u0, &params, t - h).unwrap();
        let (eta_m, _) = solve_linear_incompressible(&eta0, &u0, &params, t + h).unwrap();
        // ρ u_t = μΔu + κΔη (pressure vanishes for divergence-free data)
        let ut = u_p.sub(&u_m).scale(1.0 / (2.0 * h));
        let rhs = ops::laplacian(&u)
            .scale(params.mu)
            .add(&ops::laplacian(&eta).scale(params.kappa));
        let res = ops::l2_norm(&ut.scale(params.rho).sub(&rhs));
        let scale = ops::l2_norm(&rhs).max(1e-9);
        assert!(res < 1e-5 * scale.max(1.0), "momentum residual {res}");
        // η_t = u
        let etat = eta_m.sub(&eta_p).scale(1.0 / (2.0 * h));
        let res2 = ops::l2_norm(&etat.sub(&u));
        assert!(res2 < 1e-5, "kinematic residual {res2}");
    }
}

#[test]
fn compressible_solution_satisfies_the_pde() {
    let g = grid();
    let law = PressureLaw::new(0.5, 2.0, 1.0).unwrap();
    let params = CompressibleParams::new(1.0, 1.0, 1.0, 1.0, law).unwrap();
    let eta0 = synth::random_band_limited(g, Rank::Vector, 3, 3.0, 0.3, 5);
    let u0 = synth::random_band_limited(g, Rank::Vector, 3, 3.0, 0.4, 6);
    let dpr = law.dp(1.0) * 1.0;
    let h = 1e-4;
    let t = 0.7;
    let (eta, u) = solve_linear_compressible(&eta0, &u0, &params, t);
    let (_, u_p) = solve_linear_compressible(&eta0, &u0, &params, t + h);
    let (_, u_m) = solve_linear_compressible(&eta0, &u0, &params, t - h);
    // ρ̄ u_t = ∇(P′(ρ̄)ρ̄ div η + λ div u) + Δ(μu + κη)
    let ut = u_p.sub(&u_m).scale(1.0 / (2.0 * h));
    let rhs = ops::gradient(
        &ops::divergence(&eta)
            .scale(dpr)
            .add(&ops::divergence(&u).scale(params.lambda_)),
    )
    .add(&ops::laplacian(&u.scale(params.mu).add(&eta.scale(params.kappa))));
    let res = ops::l2_norm(&ut.scale(params.rho_bar).sub(&rhs));
    assert!(res < 1e-5 * ops::l2_norm(&rhs).max(1.0), "residual {res}");
}

#[test]
fn transverse_mode_strobe_decay() {
    // ρ=μ=κ=1, |k|=1 transverse: roots (−1 ± i√3)/2, so at multiples of the
    // oscillation period the amplitude is exactly e^{−t/2}
    let g = grid();
    let params = FlowParams::new(1.0, 1.0, 1.0).unwrap();
    let u0 = Field::from_fn(g, Rank::Vector, |_, y2, _, c| if c == 0 { y2.sin() } else { 0.0 });
    let z = Field::zeros(g, Rank::Vector);
    let omega = 0.75f64.sqrt();
    let period = std::f64::consts::TAU / omega;
    let n0 = ops::l2_norm(&u0);
    for m in 1..=3 {
        let t = m as f64 * period;
        let (_, u) = solve_linear_incompressible(&z, &u0, &params, t).unwrap();
        let expected = n0 * (-0.5 * t).exp();
        assert!(
            (ops::l2_norm(&u) - expected).abs() < 1e-10 * expected,
            "strobe sample {m}"
        );
    }
}

#[test]
fn compressible_longitudinal_strobe_decay() {
    // ρ̄=μ=λ=κ=1 and P′(ρ̄)ρ̄=1: longitudinal quadratic s² + 2s + 2 = 0,
    // roots −1 ± i, decay rate 1, period 2π
    let g = grid();
    let law = PressureLaw::new(0.5, 2.0, 1.0).unwrap();
    let params = CompressibleParams::new(1.0, 1.0, 1.0, 1.0, law).unwrap();
    assert!((params.kappa_long() - 2.0).abs() < 1e-14);
    let u0 = Field::from_fn(g, Rank::Vector, |y1, _, _, c| if c == 0 { y1.sin() } else { 0.0 });
    let z = Field::zeros(g, Rank::Vector);
    let n0 = ops::l2_norm(&u0);
    for m in 1..=3 {
        let t = m as f64 * std::f64::consts::TAU;
        let (_, u) = solve_linear_compressible(&z, &u0, &params, t);
        let expected = n0 * (-t).exp();
        assert!(
            (ops::l2_norm(&u) - expected).abs() < 1e-9 * expected.max(1e-12),
            "strobe sample {m}"
        );
    }
}

#[test]
fn compressible_reduces_to_transverse_for_shear_data() {
    // shear data has no longitudinal content: the compressible evolution must
    // coincide with the incompressible closed form
    let g = grid();
    let law = PressureLaw::new(0.5, 2.0, 1.0).unwrap();
    let cp = CompressibleParams::new(1.0, 1.0, 1.0, 3.0, law).unwrap();
    let ip = FlowParams::new(1.0, 1.0, 3.0).unwrap();
    let u0 = Field::from_fn(g, Rank::Vector, |_, y2, y3, c| {
        if c == 0 {
            0.4 * y2.sin() + 0.2 * (2.0 * y3).cos()
        } else {
            0.0
        }
    });
    let z = Field::zeros(g, Rank::Vector);
    let (ec, uc) = solve_linear_compressible(&z, &u0, &cp, 1.7);
    let (ei, ui) = solve_linear_incompressible(&z, &u0, &ip, 1.7).unwrap();
    assert!(ops::l2_norm(&uc.sub(&ui)) < 1e-12);
    assert!(ops::l2_norm(&ec.sub(&ei)) < 1e-12);
}
