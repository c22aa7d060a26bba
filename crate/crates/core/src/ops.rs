//! Constant-coefficient spectral operators and Sobolev norms.

use crate::error::{Error, Result};
use crate::field::{Field, Rank};
use crate::grid::{Grid, VOLUME};
use num_complex::Complex64;

const I: Complex64 = Complex64::new(0.0, 1.0);

fn is_nyquist(k: i64, n: usize) -> bool {
    k == -(n as i64) / 2
}

/// i k_axis * c per mode, with the Nyquist plane zeroed to keep derivatives
/// real and skew-adjoint.
fn derivative(grid: &Grid, spec: &[Complex64], axis: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::default(); grid.len()];
    for (idx, &v) in spec.iter().enumerate() {
        let k = grid.wavevector(idx);
        if is_nyquist(k[0], grid.n1) || is_nyquist(k[1], grid.n2) || is_nyquist(k[2], grid.n3) {
            continue;
        }
        out[idx] = I * k[axis] as f64 * v;
    }
    out
}

/// Exact spectral gradient. Scalar -> vector; vector -> tensor with
/// (∇v)_{ij} = ∂_j v_i stored at component 3i + j.
pub fn gradient(f: &Field) -> Field {
    let s = f.to_spectral();
    match f.rank {
        Rank::Scalar => {
            let comps = (0..3).map(|d| derivative(&f.grid, s.spec(0), d)).collect();
            Field::from_spectral(f.grid, Rank::Vector, comps)
        }
        Rank::Vector => {
            let mut comps = Vec::with_capacity(9);
            for i in 0..3 {
                for j in 0..3 {
                    comps.push(derivative(&f.grid, s.spec(i), j));
                }
            }
            Field::from_spectral(f.grid, Rank::Tensor, comps)
        }
        Rank::Tensor => panic!("gradient of a rank-2 field is not supported"),
    }
}

/// Vector -> scalar Σ ∂_i v_i; tensor -> vector of row divergences
/// (div T)_i = ∂_j T_{ij}.
pub fn divergence(f: &Field) -> Field {
    let s = f.to_spectral();
    match f.rank {
        Rank::Vector => {
            let mut out = vec![Complex64::default(); f.grid.len()];
            for d in 0..3 {
                for (o, v) in out.iter_mut().zip(derivative(&f.grid, s.spec(d), d)) {
                    *o += v;
                }
            }
            Field::from_spectral(f.grid, Rank::Scalar, vec![out])
        }
        Rank::Tensor => {
            let comps = (0..3)
                .map(|i| {
                    let mut out = vec![Complex64::default(); f.grid.len()];
                    for j in 0..3 {
                        for (o, v) in out.iter_mut().zip(derivative(&f.grid, s.spec(3 * i + j), j))
                        {
                            *o += v;
                        }
                    }
                    out
                })
                .collect();
            Field::from_spectral(f.grid, Rank::Vector, comps)
        }
        Rank::Scalar => panic!("divergence of a scalar field is not defined"),
    }
}

/// -|k|² per mode, any rank.
pub fn laplacian(f: &Field) -> Field {
    let s = f.to_spectral();
    let comps = (0..f.ncomp())
        .map(|c| {
            s.spec(c)
                .iter()
                .enumerate()
                .map(|(idx, &v)| {
                    let k = f.grid.wavevector(idx);
                    let k2 = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64;
                    -k2 * v
                })
                .collect()
        })
        .collect();
    Field::from_spectral(f.grid, f.rank, comps)
}

/// Solves Δg = f for zero-mean f, returning the zero-mean solution.
pub fn inverse_laplacian(f: &Field) -> Result<Field> {
    let s = f.to_spectral();
    let norm = l2_norm(f);
    let mean = s.mean().iter().map(|m| m.abs()).fold(0.0, f64::max);
    if mean > 1e-12 * norm.max(1e-300) {
        return Err(Error::NonZeroMean {
            mean,
            tol: 1e-12 * norm,
        });
    }
    let comps = (0..f.ncomp())
        .map(|c| {
            s.spec(c)
                .iter()
                .enumerate()
                .map(|(idx, &v)| {
                    let k = f.grid.wavevector(idx);
                    let k2 = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64;
                    if k2 == 0.0 {
                        Complex64::default()
                    } else {
                        -v / k2
                    }
                })
                .collect()
        })
        .collect();
    Ok(Field::from_spectral(f.grid, f.rank, comps))
}

/// Modewise Leray projection P_k = I - k kᵀ/|k|²; the k = 0 mode (the mean)
/// passes through unchanged.
pub fn leray_project(v: &Field) -> Field {
    assert_eq!(v.rank, Rank::Vector);
    let s = v.to_spectral();
    let n = v.grid.len();
    let mut out = vec![vec![Complex64::default(); n]; 3];
    for idx in 0..n {
        let k = v.grid.wavevector(idx);
        let k2 = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64;
        let vh = [s.spec(0)[idx], s.spec(1)[idx], s.spec(2)[idx]];
        if k2 == 0.0 {
            for d in 0..3 {
                out[d][idx] = vh[d];
            }
            continue;
        }
        let kdot = vh[0] * k[0] as f64 + vh[1] * k[1] as f64 + vh[2] * k[2] as f64;
        for d in 0..3 {
            out[d][idx] = vh[d] - kdot * k[d] as f64 / k2;
        }
    }
    Field::from_spectral(v.grid, Rank::Vector, out)
}

/// All multi-indices (α₁, α₂, α₃) with |α| equal to `order`.
pub fn multi_indices(order: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for a1 in 0..=order {
        for a2 in 0..=order - a1 {
            out.push([a1, a2, order - a1 - a2]);
        }
    }
    out
}

fn alpha_weight(k: [i64; 3], alpha: [usize; 3]) -> f64 {
    let mut w = 1.0;
    for d in 0..3 {
        w *= (k[d] as f64).powi(2 * alpha[d] as i32);
    }
    w
}

/// Σ over modes of weight(k) |c_k|², summed across components, times (2π)³.
fn weighted_sq(f: &Field, weight: impl Fn([i64; 3]) -> f64) -> f64 {
    let s = f.to_spectral();
    let mut total = 0.0;
    for idx in 0..f.grid.len() {
        let w = weight(f.grid.wavevector(idx));
        if w == 0.0 {
            continue;
        }
        let mut m = 0.0;
        for c in 0..f.ncomp() {
            m += s.spec(c)[idx].norm_sqr();
        }
        total += w * m;
    }
    total * VOLUME
}

/// Squared L² norm via Plancherel.
pub fn l2_norm_sq(f: &Field) -> f64 {
    weighted_sq(f, |_| 1.0)
}

pub fn l2_norm(f: &Field) -> f64 {
    l2_norm_sq(f).sqrt()
}

/// Squared seminorm Σ_{|α|=order} ‖∂^α f‖₀², each multi-index counted once.
pub fn seminorm_sq(f: &Field, order: usize) -> f64 {
    let alphas = multi_indices(order);
    weighted_sq(f, |k| alphas.iter().map(|&a| alpha_weight(k, a)).sum())
}

/// Full Sobolev norm (Σ_{|α|≤k} ‖∂^α f‖₀²)^{1/2}, k in 0..=3.
pub fn sobolev_norm(f: &Field, k: usize) -> f64 {
    assert!(k <= 3, "sobolev_norm supports k in 0..=3");
    let mut alphas = Vec::new();
    for o in 0..=k {
        alphas.extend(multi_indices(o));
    }
    weighted_sq(f, |kv| alphas.iter().map(|&a| alpha_weight(kv, a)).sum()).sqrt()
}

/// L² inner product ∫ f·g dy, summed across components.
pub fn l2_inner(f: &Field, g: &Field) -> f64 {
    inner_weighted(f, g, |_| 1.0)
}

/// Σ_{|α|=order} ∫ ∂^α f · ∂^α g dy, exact multi-index multiplicity.
pub fn seminorm_inner(f: &Field, g: &Field, order: usize) -> f64 {
    let alphas = multi_indices(order);
    inner_weighted(f, g, |k| alphas.iter().map(|&a| alpha_weight(k, a)).sum())
}

fn inner_weighted(f: &Field, g: &Field, weight: impl Fn([i64; 3]) -> f64) -> f64 {
    assert_eq!(f.grid, g.grid);
    assert_eq!(f.rank, g.rank);
    let fs = f.to_spectral();
    let gs = g.to_spectral();
    let mut total = 0.0;
    for idx in 0..f.grid.len() {
        let w = weight(f.grid.wavevector(idx));
        if w == 0.0 {
            continue;
        }
        let mut m = 0.0;
        for c in 0..f.ncomp() {
            m += (fs.spec(c)[idx].conj() * gs.spec(c)[idx]).re;
        }
        total += w * m;
    }
    total * VOLUME
}

/// Zero modes outside the safe band for a product of the declared degree:
/// two-thirds rule for degree 2, half band for degree 3.
pub fn dealias(f: &Field, degree: u32) -> Field {
    assert!(degree == 2 || degree == 3);
    let band = |n: usize| -> i64 {
        match degree {
            2 => (n / 3) as i64,
            _ => (n / 4) as i64,
        }
    };
    let s = f.to_spectral();
    let comps = (0..f.ncomp())
        .map(|c| {
            let mut v = s.spec(c).to_vec();
            crate::field::band_limit(
                &f.grid,
                &mut v,
                [band(f.grid.n1), band(f.grid.n2), band(f.grid.n3)],
            );
            v
        })
        .collect();
    Field::from_spectral(f.grid, f.rank, comps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::VOLUME;

    fn grid() -> Grid {
        Grid::cubic(16).unwrap()
    }

    #[test]
    fn gradient_of_zero_and_sine() {
        let f = Field::zeros(grid(), Rank::Scalar);
        assert_eq!(l2_norm(&gradient(&f)), 0.0);

        let f = Field::from_fn(grid(), Rank::Scalar, |y1, _, _, _| y1.sin());
        let g = gradient(&f).to_physical();
        let expect = Field::from_fn(grid(), Rank::Scalar, |y1, _, _, _| y1.cos());
        let err = g
            .phys(0)
            .iter()
            .zip(expect.phys(0))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-12);
        assert!(l2_norm(&g.component(1)) < 1e-12);
        assert!(l2_norm(&g.component(2)) < 1e-12);
    }

    #[test]
    fn divergence_of_shear_and_compression() {
        let shear = Field::from_fn(grid(), Rank::Vector, |_, y2, _, c| {
            if c == 0 {
                y2.sin()
            } else {
                0.0
            }
        });
        assert!(l2_norm(&divergence(&shear)) < 1e-12);

        let comp = Field::from_fn(grid(), Rank::Vector, |y1, _, _, c| {
            if c == 0 {
                y1.sin()
            } else {
                0.0
            }
        });
        let d = divergence(&comp);
        let expect = Field::from_fn(grid(), Rank::Scalar, |y1, _, _, _| y1.cos());
        assert!(l2_norm(&d.sub(&expect)) < 1e-12);
    }

    #[test]
    fn laplacian_eigenfunction() {
        let f = Field::from_fn(grid(), Rank::Scalar, |y1, _, _, _| y1.sin());
        let lf = laplacian(&f);
        assert!(l2_norm(&lf.add(&f)) < 1e-12);
    }

    #[test]
    fn inverse_laplacian_modewise() {
        // cos(y1) + cos(2 y2) -> -cos(y1) - cos(2 y2)/4
        let f = Field::from_fn(grid(), Rank::Scalar, |y1, y2, _, _| {
            y1.cos() + (2.0 * y2).cos()
        });
        let g = inverse_laplacian(&f).unwrap();
        let expect = Field::from_fn(grid(), Rank::Scalar, |y1, y2, _, _| {
            -y1.cos() - (2.0 * y2).cos() / 4.0
        });
        assert!(l2_norm(&g.sub(&expect)) < 1e-12);
        // eigenfunction case
        let f = Field::from_fn(grid(), Rank::Scalar, |y1, _, _, _| y1.cos());
        let g = inverse_laplacian(&f).unwrap();
        assert!(l2_norm(&g.add(&f)) < 1e-12);
        // zero in, zero out
        let z = Field::zeros(grid(), Rank::Scalar);
        assert_eq!(l2_norm(&inverse_laplacian(&z).unwrap()), 0.0);
    }

    #[test]
    fn inverse_laplacian_rejects_nonzero_mean() {
        let f = Field::from_fn(grid(), Rank::Scalar, |y1, _, _, _| 1.0 + y1.cos());
        assert!(matches!(
            inverse_laplacian(&f),
            Err(Error::NonZeroMean { .. })
        ));
    }

    #[test]
    fn leray_annihilates_gradients_and_keeps_solenoidal() {
        let phi = Field::from_fn(grid(), Rank::Scalar, |y1, _, _, _| y1.sin());
        let gp = gradient(&phi);
        assert!(l2_norm(&leray_project(&gp)) < 1e-12);

        let shear = Field::from_fn(grid(), Rank::Vector, |_, y2, _, c| {
            if c == 0 {
                y2.sin()
            } else {
                0.0
            }
        });
        assert!(l2_norm(&leray_project(&shear).sub(&shear)) < 1e-12);
    }

    #[test]
    fn leray_at_single_mode() {
        // v = (sin y1, sin y1, 0) -> (0, sin y1, 0): P at k = e1 kills comp 1.
        let v = Field::from_fn(grid(), Rank::Vector, |y1, _, _, c| {
            if c < 2 {
                y1.sin()
            } else {
                0.0
            }
        });
        let p = leray_project(&v);
        let expect = Field::from_fn(grid(), Rank::Vector, |y1, _, _, c| {
            if c == 1 {
                y1.sin()
            } else {
                0.0
            }
        });
        assert!(l2_norm(&p.sub(&expect)) < 1e-12);
    }

    #[test]
    fn sobolev_norm_of_sine() {
        let f = Field::from_fn(grid(), Rank::Scalar, |_, y2, _, _| y2.sin());
        // ∫ sin² = 4π³ per contributing multi-index; |α| ≤ 2 gives 3 of them.
        assert!((sobolev_norm(&f, 0) - (4.0 * VOLUME / 8.0).sqrt()).abs() < 1e-10);
        assert!((sobolev_norm(&f, 2) - (12.0 * VOLUME / 8.0).sqrt()).abs() < 1e-10);
        let z = Field::zeros(grid(), Rank::Scalar);
        for k in 0..=3 {
            assert_eq!(sobolev_norm(&z, k), 0.0);
        }
    }

    #[test]
    fn plancherel_matches_quadrature() {
        let f = Field::from_fn(grid(), Rank::Scalar, |y1, y2, y3, _| {
            (2.0 * y1).sin() * y2.cos() + (3.0 * y3).cos()
        });
        let spectral = l2_norm_sq(&f);
        let quad: f64 =
            f.phys(0).iter().map(|v| v * v).sum::<f64>() * f.grid.cell_volume();
        assert!((spectral - quad).abs() <= 1e-10 * quad.abs());
    }

    #[test]
    fn dealias_keeps_band_limited_fields() {
        let f = Field::from_fn(grid(), Rank::Scalar, |y1, _, _, _| (2.0 * y1).sin());
        for deg in [2, 3] {
            assert!(l2_norm(&dealias(&f, deg).sub(&f)) < 1e-13);
        }
    }
}
