//! Property tests over randomized band-limited fields.

use proptest::prelude::*;
use visco_core::field::{Field, Rank};
use visco_core::grid::Grid;
use visco_core::kinematics;
use visco_core::ops;
use visco_core::synth;

fn grid() -> Grid {
    Grid::cubic(16).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn transform_round_trip(seed in 0u64..1_000_000) {
        let f = synth::random_band_limited(grid(), Rank::Scalar, 5, 2.0, 1.0, seed);
        let back = f.to_spectral().to_physical();
        prop_assert!(back.sub(&f).max_abs() < 1e-12);
    }

    #[test]
    fn transforms_are_linear(seed in 0u64..1_000_000) {
        let f = synth::random_band_limited(grid(), Rank::Scalar, 4, 2.0, 1.0, seed);
        let g = synth::random_band_limited(grid(), Rank::Scalar, 4, 2.0, 1.0, seed.wrapping_add(1));
        let lhs = f.axpy(2.5, &g, -1.25).to_spectral();
        let rhs_f = f.to_spectral();
        let rhs_g = g.to_spectral();
        let rhs = rhs_f.axpy(2.5, &rhs_g, -1.25);
        prop_assert!(ops::l2_norm(&lhs.sub(&rhs)) < 1e-12);
    }

    #[test]
    fn plancherel_under_scaling(seed in 0u64..1_000_000, scale in 0.1f64..10.0) {
        let f = synth::random_band_limited(grid(), Rank::Vector, 4, 2.0, 1.0, seed);
        let n0 = ops::l2_norm_sq(&f);
        let n1 = ops::l2_norm_sq(&f.scale(scale));
        prop_assert!((n1 - scale * scale * n0).abs() < 1e-10 * n1.max(1e-30));
    }

    #[test]
    fn leray_is_an_idempotent_contraction(seed in 0u64..1_000_000) {
        let f = synth::random_band_limited(grid(), Rank::Vector, 4, 2.0, 1.0, seed);
        let p = ops::leray_project(&f);
        prop_assert!(ops::l2_norm(&ops::divergence(&p)) < 1e-12);
        let pp = ops::leray_project(&p);
        prop_assert!(ops::l2_norm(&pp.sub(&p)) < 1e-12);
        prop_assert!(ops::l2_norm_sq(&p) <= ops::l2_norm_sq(&f) * (1.0 + 1e-12));
    }

    #[test]
    fn piola_and_determinant_identities(seed in 0u64..1_000_000) {
        // small enough that J stays near 1 for any draw
        let eta = synth::random_band_limited(grid(), Rank::Vector, 3, 3.0, 0.05, seed);
        let piola = kinematics::piola_residual(&eta).unwrap();
        prop_assert!(piola < 1e-10, "piola residual {piola}");
        let det = kinematics::det_expansion_residual(&eta);
        prop_assert!(det < 1e-10, "determinant expansion residual {det}");
    }

    #[test]
    fn jacobian_inverse_expansion_is_quadratically_small(seed in 0u64..1_000_000) {
        let eta = synth::random_band_limited(grid(), Rank::Vector, 3, 3.0, 0.04, seed);
        let (residual, grad_sq) = kinematics::jinv_expansion_residual(&eta).unwrap();
        // ‖J⁻¹ − 1 + div η‖₀ ≲ ‖∇η‖₂² with a modest constant
        prop_assert!(residual <= 20.0 * grad_sq, "residual {residual} vs {grad_sq}");
    }

    #[test]
    fn projection_commutes_with_itself_under_scaling(seed in 0u64..1_000_000, s in 0.5f64..2.0) {
        let f = synth::random_band_limited(grid(), Rank::Vector, 4, 2.0, 1.0, seed);
        let a = ops::leray_project(&f.scale(s));
        let b = ops::leray_project(&f).scale(s);
        prop_assert!(ops::l2_norm(&a.sub(&b)) < 1e-11);
    }
}

#[test]
fn straightening_ignores_horizontal_functions() {
    use visco_core::diagnostics::straightening;
    let g = grid();
    let eta = synth::random_band_limited(g, Rank::Vector, 3, 2.0, 0.3, 11);
    let (_, l2_base, _) = straightening(&eta);
    // adding a function of (y₁, y₂) alone must not change η̄
    let horizontal = Field::from_fn(g, Rank::Vector, |y1, y2, _, c| match c {
        0 => 0.7 * (y1 + 2.0 * y2).cos(),
        1 => -0.2 * y2.sin(),
        _ => 0.4 * y1.sin() * y2.cos(),
    });
    let (_, l2_shifted, _) = straightening(&eta.add(&horizontal));
    assert!((l2_base - l2_shifted).abs() < 1e-10 * l2_base.max(1.0));
}
