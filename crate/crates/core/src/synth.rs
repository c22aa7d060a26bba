//! Seeded synthetic fields: band-limited random trigonometric polynomials and
//! k⁻ᵖ spectral noise, built in physical space so realness is automatic.

use crate::field::{Field, Rank};
use crate::grid::Grid;
use crate::ops;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn mode_list(kmax: i64) -> Vec<[i64; 3]> {
    let mut out = Vec::new();
    for k1 in -kmax..=kmax {
        for k2 in -kmax..=kmax {
            for k3 in -kmax..=kmax {
                if (k1, k2, k3) == (0, 0, 0) {
                    continue;
                }
                // one representative per ±k pair
                if (k1, k2, k3) < (-k1, -k2, -k3) {
                    continue;
                }
                out.push([k1, k2, k3]);
            }
        }
    }
    out
}

/// Sum of random cosines over all wavevectors with |k|_∞ ≤ kmax, coefficients
/// weighted by |k|^(−decay) and scaled so that max|f| = amplitude.
pub fn random_band_limited(
    grid: Grid,
    rank: Rank,
    kmax: i64,
    decay: f64,
    amplitude: f64,
    seed: u64,
) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let modes = mode_list(kmax);
    let mut terms: Vec<Vec<(f64, f64, [i64; 3])>> = Vec::with_capacity(rank.ncomp());
    for _ in 0..rank.ncomp() {
        let mut tl = Vec::with_capacity(modes.len());
        for &k in &modes {
            let k2 = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64;
            let w = k2.sqrt().powf(-decay);
            let a: f64 = rng.gen_range(-1.0..1.0);
            let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            tl.push((a * w, phi, k));
        }
        terms.push(tl);
    }
    let f = Field::from_fn(grid, rank, move |y1, y2, y3, c| {
        terms[c]
            .iter()
            .map(|&(a, phi, k)| {
                a * (k[0] as f64 * y1 + k[1] as f64 * y2 + k[2] as f64 * y3 + phi).cos()
            })
            .sum()
    });
    let m = f.max_abs();
    if m == 0.0 {
        f
    } else {
        f.scale(amplitude / m)
    }
}

/// Leray-projected k⁻ᵈ noise: divergence-free, zero-mean, H²-regular,
/// reproducible from the seed.
pub fn random_divergence_free(grid: Grid, kmax: i64, decay: f64, amplitude: f64, seed: u64) -> Field {
    let raw = random_band_limited(grid, Rank::Vector, kmax, decay, amplitude, seed);
    let projected = ops::leray_project(&raw);
    let m = projected.max_abs();
    if m == 0.0 {
        projected
    } else {
        projected.scale(amplitude / m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops::{divergence, l2_norm};

    #[test]
    fn deterministic_and_divergence_free() {
        let grid = Grid::cubic(16).unwrap();
        let a = random_divergence_free(grid, 3, 4.0, 0.1, 7);
        let b = random_divergence_free(grid, 3, 4.0, 0.1, 7);
        assert!(l2_norm(&a.sub(&b)) == 0.0);
        let c = random_divergence_free(grid, 3, 4.0, 0.1, 8);
        assert!(l2_norm(&a.sub(&c)) > 1e-6);
        assert!(l2_norm(&divergence(&a)) < 1e-12);
        assert!((a.max_abs() - 0.1).abs() < 1e-12);
        assert!(a.mean().iter().all(|&m| m.abs() < 1e-13));
    }

    #[test]
    fn band_limit_is_respected() {
        let grid = Grid::cubic(16).unwrap();
        let f = random_band_limited(grid, Rank::Scalar, 2, 4.0, 1.0, 3);
        let s = f.to_spectral();
        for idx in 0..grid.len() {
            let k = grid.wavevector(idx);
            if k.iter().any(|&ki| ki.abs() > 2) {
                assert!(s.spec(0)[idx].norm() < 1e-14);
            }
        }
    }
}
