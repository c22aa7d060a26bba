//! Flow-map geometry: deformation gradient, cofactor matrix, Jacobian and the
//! A-weighted differential operators of the Lagrangian formulation.

use crate::error::{Error, Result};
use crate::field::{Field, Rank};
use crate::grid::{DealiasMode, Grid};
use crate::ops;

/// Default validity floor for the Jacobian; below this the pack is flagged.
pub const J_FLOOR: f64 = 0.1;

/// Which matrix weights an A-differential operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Weight {
    /// The full matrix A with Aᵀ = (∇ζ)⁻¹.
    Full,
    /// Ã = A - I.
    Tilde,
}

/// Fine-grid physical values used for pointwise contractions. The entries of
/// A are exact on this grid up to the J division; reusing them across
/// products keeps the dealiasing pipeline consistent.
pub(crate) struct FineCache {
    pub grid: Grid,
    pub a: Vec<Vec<f64>>,      // 9, row-major
    pub atilde: Vec<Vec<f64>>, // 9
    pub j: Vec<f64>,
    pub jinv: Vec<f64>,
}

pub struct DeformationPack {
    pub eta: Field,
    pub grad_zeta: Field,
    pub jac: Field,
    pub amat: Field,
    pub atilde: Field,
    /// J·A, the cofactor matrix of ∇ζ, a degree-2 polynomial in ∇η.
    pub cof: Field,
    pub min_j: f64,
    pub max_j: f64,
    /// False when min J fell at or below the configured floor.
    pub valid: bool,
    pub mode: DealiasMode,
    pub(crate) fine: FineCache,
}

/// Physical values on the product grid, with two-thirds pre-truncation when
/// the mode calls for it.
fn to_fine(f: &Field, fine: &Grid, mode: DealiasMode) -> Vec<Vec<f64>> {
    match mode {
        DealiasMode::TwoThirds => ops::dealias(f, 2).fine_physical(fine),
        _ => f.fine_physical(fine),
    }
}

fn from_fine(coarse: Grid, rank: Rank, fine: &Grid, comps: Vec<Vec<f64>>, mode: DealiasMode) -> Field {
    let f = Field::from_fine_physical(coarse, rank, fine, comps);
    match mode {
        DealiasMode::TwoThirds => ops::dealias(&f, 2),
        _ => f,
    }
}

/// 3x3 determinant of row-major entries.
fn det3(m: &[f64; 9]) -> f64 {
    m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6])
        + m[2] * (m[3] * m[7] - m[4] * m[6])
}

/// Cofactor matrix (signed minors), row-major: cof[i][j] = (-1)^{i+j} M_{ij}.
fn cofactor3(m: &[f64; 9]) -> [f64; 9] {
    let e = |i: usize, j: usize| m[3 * i + j];
    let minor = |i: usize, j: usize| -> f64 {
        let rows: Vec<usize> = (0..3).filter(|&r| r != i).collect();
        let cols: Vec<usize> = (0..3).filter(|&c| c != j).collect();
        e(rows[0], cols[0]) * e(rows[1], cols[1]) - e(rows[0], cols[1]) * e(rows[1], cols[0])
    };
    let mut out = [0.0; 9];
    for i in 0..3 {
        for j in 0..3 {
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            out[3 * i + j] = sign * minor(i, j);
        }
    }
    out
}

pub fn build_pack(eta: &Field) -> Result<DeformationPack> {
    build_pack_with(eta, J_FLOOR, eta.grid.dealias)
}

/// A is read off as (cofactor matrix)/J from the nine explicit 2x2 minors,
/// never by pointwise numerical inversion, so the Piola identity is exact at
/// the algebra level.
pub fn build_pack_with(eta: &Field, j_floor: f64, mode: DealiasMode) -> Result<DeformationPack> {
    assert_eq!(eta.rank, Rank::Vector);
    let grid = eta.grid;
    let fine_grid = grid.fine_grid(mode);
    let eta_s = eta.to_spectral();
    let grad_eta = ops::gradient(&eta_s);
    let ge_fine = to_fine(&grad_eta, &fine_grid, mode);

    let n = fine_grid.len();
    let mut cof = vec![vec![0.0; n]; 9];
    let mut a = vec![vec![0.0; n]; 9];
    let mut atilde = vec![vec![0.0; n]; 9];
    let mut j = vec![0.0; n];
    let mut jinv = vec![0.0; n];
    let mut min_j = f64::INFINITY;
    let mut max_j = f64::NEG_INFINITY;

    for p in 0..n {
        let mut m = [0.0; 9];
        for c in 0..9 {
            m[c] = ge_fine[c][p];
        }
        // ∇ζ = ∇η + I
        m[0] += 1.0;
        m[4] += 1.0;
        m[8] += 1.0;
        let jp = det3(&m);
        min_j = min_j.min(jp);
        max_j = max_j.max(jp);
        let cf = cofactor3(&m);
        j[p] = jp;
        if jp > 0.0 {
            jinv[p] = 1.0 / jp;
        }
        for c in 0..9 {
            cof[c][p] = cf[c];
            if jp > 0.0 {
                a[c][p] = cf[c] / jp;
            }
        }
        atilde[0][p] = a[0][p] - 1.0;
        atilde[4][p] = a[4][p] - 1.0;
        atilde[8][p] = a[8][p] - 1.0;
        for c in [1, 2, 3, 5, 6, 7] {
            atilde[c][p] = a[c][p];
        }
    }

    if min_j <= 0.0 {
        return Err(Error::SingularMap { min_j });
    }

    let mut grad_zeta = grad_eta.to_spectral();
    {
        // add the identity to the mean mode of the diagonal entries
        let mut comps: Vec<Vec<num_complex::Complex64>> =
            (0..9).map(|c| grad_zeta.spec(c).to_vec()).collect();
        for c in [0, 4, 8] {
            comps[c][0] += 1.0;
        }
        grad_zeta = Field::from_spectral(grid, Rank::Tensor, comps);
    }

    let jac = from_fine(grid, Rank::Scalar, &fine_grid, vec![j.clone()], mode);
    let amat = from_fine(grid, Rank::Tensor, &fine_grid, a.clone(), mode);
    let cof_field = from_fine(grid, Rank::Tensor, &fine_grid, cof, mode);
    let atilde_field = from_fine(grid, Rank::Tensor, &fine_grid, atilde.clone(), mode);

    Ok(DeformationPack {
        eta: eta_s,
        grad_zeta,
        jac,
        amat,
        atilde: atilde_field,
        cof: cof_field,
        min_j,
        max_j,
        valid: min_j > j_floor,
        mode,
        fine: FineCache {
            grid: fine_grid,
            a,
            atilde,
            j,
            jinv,
        },
    })
}

impl DeformationPack {
    fn weight_fine(&self, w: Weight) -> &[Vec<f64>] {
        match w {
            Weight::Full => &self.fine.a,
            Weight::Tilde => &self.fine.atilde,
        }
    }

    /// ∇_W f = (W_{1k}∂_k f, W_{2k}∂_k f, W_{3k}∂_k f)ᵀ for scalar f.
    pub fn weighted_gradient(&self, f: &Field, w: Weight) -> Field {
        assert_eq!(f.rank, Rank::Scalar);
        let df = ops::gradient(f);
        let dfk = to_fine(&df, &self.fine.grid, self.mode);
        let wm = self.weight_fine(w);
        let n = self.fine.grid.len();
        let mut out = vec![vec![0.0; n]; 3];
        for i in 0..3 {
            for p in 0..n {
                let mut s = 0.0;
                for k in 0..3 {
                    s += wm[3 * i + k][p] * dfk[k][p];
                }
                out[i][p] = s;
            }
        }
        from_fine(f.grid, Rank::Vector, &self.fine.grid, out, self.mode)
    }

    /// div_W X = W_{lk} ∂_k X_l for vector X.
    pub fn weighted_divergence(&self, x: &Field, w: Weight) -> Field {
        assert_eq!(x.rank, Rank::Vector);
        let dx = ops::gradient(x); // (∇X)_{lk} = ∂_k X_l at comp 3l+k
        let dxf = to_fine(&dx, &self.fine.grid, self.mode);
        let wm = self.weight_fine(w);
        let n = self.fine.grid.len();
        let mut out = vec![0.0; n];
        for c in 0..9 {
            for p in 0..n {
                out[p] += wm[c][p] * dxf[c][p];
            }
        }
        from_fine(x.grid, Rank::Scalar, &self.fine.grid, vec![out], self.mode)
    }

    /// Componentwise ∇_W applied to a vector u: G_{il} = W_{lm} ∂_m u_i.
    pub fn weighted_gradient_vec(&self, u: &Field, w: Weight) -> Field {
        assert_eq!(u.rank, Rank::Vector);
        let du = ops::gradient(u); // ∂_m u_i at comp 3i+m
        let duf = to_fine(&du, &self.fine.grid, self.mode);
        let wm = self.weight_fine(w);
        let n = self.fine.grid.len();
        let mut out = vec![vec![0.0; n]; 9];
        for i in 0..3 {
            for l in 0..3 {
                for p in 0..n {
                    let mut s = 0.0;
                    for m in 0..3 {
                        s += wm[3 * l + m][p] * duf[3 * i + m][p];
                    }
                    out[3 * i + l][p] = s;
                }
            }
        }
        from_fine(u.grid, Rank::Tensor, &self.fine.grid, out, self.mode)
    }

    /// Row-wise div_W of a tensor: out_i = W_{lk} ∂_k G_{il}.
    pub fn weighted_divergence_tensor(&self, g: &Field, w: Weight) -> Field {
        assert_eq!(g.rank, Rank::Tensor);
        let gs = g.to_spectral();
        // ∂_k G_{il} assembled per row via scalar gradients.
        let wm = self.weight_fine(w);
        let n = self.fine.grid.len();
        let mut out = vec![vec![0.0; n]; 3];
        for i in 0..3 {
            for l in 0..3 {
                let comp = gs.component(3 * i + l);
                let dg = ops::gradient(&comp);
                let dgf = to_fine(&dg, &self.fine.grid, self.mode);
                for k in 0..3 {
                    for p in 0..n {
                        out[i][p] += wm[3 * l + k][p] * dgf[k][p];
                    }
                }
            }
        }
        from_fine(g.grid, Rank::Vector, &self.fine.grid, out, self.mode)
    }

    /// Δ_A f = div_A ∇_A f, exactly as composed.
    pub fn a_laplacian(&self, f: &Field) -> Field {
        self.weighted_divergence(&self.weighted_gradient(f, Weight::Full), Weight::Full)
    }

    /// Pointwise product J⁻¹ · f on the product grid, any rank.
    pub fn jinv_times(&self, f: &Field) -> Field {
        let ff = to_fine(f, &self.fine.grid, self.mode);
        let n = self.fine.grid.len();
        let comps = ff
            .into_iter()
            .map(|mut c| {
                for p in 0..n {
                    c[p] *= self.fine.jinv[p];
                }
                c
            })
            .collect();
        from_fine(f.grid, f.rank, &self.fine.grid, comps, self.mode)
    }

    /// Pointwise product w(J) · f on the product grid, any rank.
    pub fn scale_by_j(&self, f: &Field, w: impl Fn(f64) -> f64) -> Field {
        let ff = to_fine(f, &self.fine.grid, self.mode);
        let n = self.fine.grid.len();
        let comps = ff
            .into_iter()
            .map(|mut c| {
                for p in 0..n {
                    c[p] *= w(self.fine.j[p]);
                }
                c
            })
            .collect();
        from_fine(f.grid, f.rank, &self.fine.grid, comps, self.mode)
    }

    /// The scalar field w(J), sampled on the product grid.
    pub fn field_of_j(&self, w: impl Fn(f64) -> f64) -> Field {
        let vals: Vec<f64> = self.fine.j.iter().map(|&jp| w(jp)).collect();
        from_fine(
            self.eta.grid,
            Rank::Scalar,
            &self.fine.grid,
            vec![vals],
            self.mode,
        )
    }

    /// ∫ w(J(y)) dy via midpoint quadrature on the product grid (exact for
    /// band-limited integrands).
    pub fn integral_of_j(&self, w: impl Fn(f64) -> f64) -> f64 {
        let cv = self.fine.grid.cell_volume();
        self.fine.j.iter().map(|&jp| w(jp) * cv).sum()
    }
}

/// Convenience wrappers matching the operator names of the formulation.
pub fn a_gradient(pack: &DeformationPack, f: &Field) -> Field {
    pack.weighted_gradient(f, Weight::Full)
}

pub fn a_divergence(pack: &DeformationPack, x: &Field) -> Field {
    pack.weighted_divergence(x, Weight::Full)
}

pub fn a_laplacian(pack: &DeformationPack, f: &Field) -> Field {
    pack.a_laplacian(f)
}

/// max over rows i of ‖∂_k (J A_{ik})‖₀ / ‖J A‖₀, with the cofactor matrix
/// evaluated on a 2x-padded grid so the degree-2 algebra is exact.
pub fn piola_residual(eta: &Field) -> Result<f64> {
    let pack = build_pack_with(eta, 0.0, DealiasMode::Pad2x)?;
    let fine = pack.fine.grid;
    // keep the full fine-band cofactor: forward transform without truncation
    let mut cof_fine = Vec::with_capacity(9);
    for c in 0..9 {
        let mut vals = vec![0.0; fine.len()];
        for p in 0..fine.len() {
            vals[p] = pack.fine.a[c][p] * pack.fine.j[p];
        }
        cof_fine.push(crate::fft3::forward(&fine, &vals));
    }
    let cof = Field::from_spectral(fine, Rank::Tensor, cof_fine);
    let denom = ops::l2_norm(&cof);
    if denom == 0.0 {
        return Ok(0.0);
    }
    let div = ops::divergence(&cof);
    let mut worst: f64 = 0.0;
    for i in 0..3 {
        worst = worst.max(ops::l2_norm(&div.component(i)));
    }
    Ok(worst / denom)
}

/// ‖det(∇η+I) − 1 − div η − r_η‖₀ / ‖J‖₀ with
/// r_η = ((div η)² − tr(∇η)²)/2 + det ∇η, assembled pointwise on the padded
/// grid. The identity is algebraic, so this exercises the cubic product path.
pub fn det_expansion_residual(eta: &Field) -> f64 {
    let grid = eta.grid;
    let fine = grid.fine_grid(DealiasMode::Pad2x);
    let ge = ops::gradient(&eta.to_spectral()).fine_physical(&fine);
    let n = fine.len();
    let mut resid = vec![0.0; n];
    let mut jnorm = 0.0;
    for p in 0..n {
        let mut g = [0.0; 9];
        for c in 0..9 {
            g[c] = ge[c][p];
        }
        let mut m = g;
        m[0] += 1.0;
        m[4] += 1.0;
        m[8] += 1.0;
        let det_zeta = det3(&m);
        let div = g[0] + g[4] + g[8];
        // tr((∇η)²)
        let mut tr2 = 0.0;
        for i in 0..3 {
            for k in 0..3 {
                tr2 += g[3 * i + k] * g[3 * k + i];
            }
        }
        let r = (div * div - tr2) / 2.0 + det3(&g);
        resid[p] = det_zeta - 1.0 - div - r;
        jnorm += det_zeta * det_zeta;
    }
    let cell = fine.cell_volume();
    let num = (resid.iter().map(|v| v * v).sum::<f64>() * cell).sqrt();
    let den = (jnorm * cell).sqrt();
    num / den
}

/// (‖J⁻¹ − 1 + div η‖₀, ‖∇η‖₂²) for quadratic-smallness auditing.
pub fn jinv_expansion_residual(eta: &Field) -> Result<(f64, f64)> {
    let grid = eta.grid;
    let fine = grid.fine_grid(DealiasMode::Pad2x);
    let grad_eta = ops::gradient(&eta.to_spectral());
    let ge = grad_eta.fine_physical(&fine);
    let n = fine.len();
    let mut resid = vec![0.0; n];
    let mut min_j = f64::INFINITY;
    for p in 0..n {
        let mut m = [0.0; 9];
        for c in 0..9 {
            m[c] = ge[c][p];
        }
        let div = m[0] + m[4] + m[8];
        m[0] += 1.0;
        m[4] += 1.0;
        m[8] += 1.0;
        let j = det3(&m);
        min_j = min_j.min(j);
        if j <= 0.0 {
            continue;
        }
        resid[p] = 1.0 / j - 1.0 + div;
    }
    if min_j <= 0.0 {
        return Err(Error::SingularMap { min_j });
    }
    let num = (resid.iter().map(|v| v * v).sum::<f64>() * fine.cell_volume()).sqrt();
    let h2 = ops::sobolev_norm(&grad_eta, 2);
    Ok((num, h2 * h2))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EtaKind {
    Zero,
    Shear,
    ComposedShears,
}

/// Exactly volume-preserving initial displacement families. Shears and
/// compositions of axis-aligned shears have det(∇η + I) = 1 identically.
pub fn make_volume_preserving_eta(
    grid: Grid,
    kind: EtaKind,
    amplitude: f64,
    mode: i64,
) -> Result<Field> {
    let m = mode as f64;
    let eta = match kind {
        EtaKind::Zero => Field::zeros(grid, Rank::Vector),
        EtaKind::Shear => Field::from_fn(grid, Rank::Vector, |_, y2, _, c| {
            if c == 0 {
                amplitude * (m * y2).sin()
            } else {
                0.0
            }
        }),
        EtaKind::ComposedShears => {
            // ζ = S2 ∘ S1 with S1(y) = y + α sin(m y2) e1, S2(x) = x + α sin(m x1) e2
            Field::from_fn(grid, Rank::Vector, |y1, y2, _, c| match c {
                0 => amplitude * (m * y2).sin(),
                1 => amplitude * (m * (y1 + amplitude * (m * y2).sin())).sin(),
                _ => 0.0,
            })
        }
    }
    .to_spectral();
    // check the sampled map is still a diffeomorphism
    let pack = build_pack(&eta)?;
    if pack.min_j <= 0.0 {
        return Err(Error::SingularMap { min_j: pack.min_j });
    }
    Ok(eta)
}
