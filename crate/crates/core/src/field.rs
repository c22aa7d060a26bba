//! Periodic grid functions with dual physical/spectral representation.

use crate::fft3;
use crate::grid::{Grid, VOLUME};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rank {
    Scalar,
    Vector,
    Tensor,
}

impl Rank {
    pub fn ncomp(&self) -> usize {
        match self {
            Rank::Scalar => 1,
            Rank::Vector => 3,
            Rank::Tensor => 9,
        }
    }

    pub fn from_ncomp(n: usize) -> Option<Rank> {
        match n {
            1 => Some(Rank::Scalar),
            3 => Some(Rank::Vector),
            9 => Some(Rank::Tensor),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
enum Data {
    Physical(Vec<Vec<f64>>),
    Spectral(Vec<Vec<Complex64>>),
}

/// A scalar, vector or 3x3 tensor field on the torus. Tensor components are
/// stored row-major: T[i][j] = comps[3*i + j]. Values are immutable from the
/// caller's perspective; all operations return new fields.
#[derive(Clone, Debug)]
pub struct Field {
    pub grid: Grid,
    pub rank: Rank,
    data: Data,
}

impl Field {
    pub fn zeros(grid: Grid, rank: Rank) -> Field {
        let comps = (0..rank.ncomp())
            .map(|_| vec![Complex64::default(); grid.len()])
            .collect();
        Field {
            grid,
            rank,
            data: Data::Spectral(comps),
        }
    }

    pub fn from_physical(grid: Grid, rank: Rank, comps: Vec<Vec<f64>>) -> Field {
        assert_eq!(comps.len(), rank.ncomp());
        for c in &comps {
            assert_eq!(c.len(), grid.len());
        }
        Field {
            grid,
            rank,
            data: Data::Physical(comps),
        }
    }

    pub fn from_spectral(grid: Grid, rank: Rank, comps: Vec<Vec<Complex64>>) -> Field {
        assert_eq!(comps.len(), rank.ncomp());
        for c in &comps {
            assert_eq!(c.len(), grid.len());
        }
        Field {
            grid,
            rank,
            data: Data::Spectral(comps),
        }
    }

    /// Sample `f(y1, y2, y3, component)` at the grid points.
    pub fn from_fn(grid: Grid, rank: Rank, f: impl Fn(f64, f64, f64, usize) -> f64) -> Field {
        let comps = (0..rank.ncomp())
            .map(|c| {
                let mut v = vec![0.0; grid.len()];
                for i3 in 0..grid.n3 {
                    let y3 = Grid::coord(i3, grid.n3);
                    for i2 in 0..grid.n2 {
                        let y2 = Grid::coord(i2, grid.n2);
                        for i1 in 0..grid.n1 {
                            v[grid.idx(i1, i2, i3)] = f(Grid::coord(i1, grid.n1), y2, y3, c);
                        }
                    }
                }
                v
            })
            .collect();
        Field::from_physical(grid, rank, comps)
    }

    pub fn is_spectral(&self) -> bool {
        matches!(self.data, Data::Spectral(_))
    }

    pub fn to_spectral(&self) -> Field {
        match &self.data {
            Data::Spectral(_) => self.clone(),
            Data::Physical(comps) => {
                let spec = comps.iter().map(|c| fft3::forward(&self.grid, c)).collect();
                Field::from_spectral(self.grid, self.rank, spec)
            }
        }
    }

    pub fn to_physical(&self) -> Field {
        match &self.data {
            Data::Physical(_) => self.clone(),
            Data::Spectral(comps) => {
                let phys = comps.iter().map(|c| fft3::inverse(&self.grid, c)).collect();
                Field::from_physical(self.grid, self.rank, phys)
            }
        }
    }

    /// Spectral component accessor; field must be in spectral representation.
    pub fn spec(&self, c: usize) -> &[Complex64] {
        match &self.data {
            Data::Spectral(comps) => &comps[c],
            Data::Physical(_) => panic!("field is in physical representation"),
        }
    }

    /// Physical component accessor; field must be in physical representation.
    pub fn phys(&self, c: usize) -> &[f64] {
        match &self.data {
            Data::Physical(comps) => &comps[c],
            Data::Spectral(_) => panic!("field is in spectral representation"),
        }
    }

    pub fn ncomp(&self) -> usize {
        self.rank.ncomp()
    }

    /// Volume average of each component (the k = 0 coefficient).
    pub fn mean(&self) -> Vec<f64> {
        let s = self.to_spectral();
        (0..s.ncomp()).map(|c| s.spec(c)[0].re).collect()
    }

    /// Integral over the box: (2π)³ times the volume average.
    pub fn integral(&self) -> Vec<f64> {
        self.mean().into_iter().map(|m| m * VOLUME).collect()
    }

    /// Maximum of |value| over grid points and components.
    pub fn max_abs(&self) -> f64 {
        let p = self.to_physical();
        (0..p.ncomp())
            .flat_map(|c| p.phys(c).iter().map(|v| v.abs()).collect::<Vec<_>>())
            .fold(0.0, f64::max)
    }

    /// a*self + b*other, computed spectrally.
    pub fn axpy(&self, a: f64, other: &Field, b: f64) -> Field {
        assert_eq!(self.grid, other.grid);
        assert_eq!(self.rank, other.rank);
        let x = self.to_spectral();
        let y = other.to_spectral();
        let comps = (0..x.ncomp())
            .map(|c| {
                x.spec(c)
                    .iter()
                    .zip(y.spec(c))
                    .map(|(u, v)| u * a + v * b)
                    .collect()
            })
            .collect();
        Field::from_spectral(self.grid, self.rank, comps)
    }

    pub fn scale(&self, a: f64) -> Field {
        let x = self.to_spectral();
        let comps = (0..x.ncomp())
            .map(|c| x.spec(c).iter().map(|u| u * a).collect())
            .collect();
        Field::from_spectral(self.grid, self.rank, comps)
    }

    pub fn add(&self, other: &Field) -> Field {
        self.axpy(1.0, other, 1.0)
    }

    pub fn sub(&self, other: &Field) -> Field {
        self.axpy(1.0, other, -1.0)
    }

    /// Extract one component as a scalar field.
    pub fn component(&self, c: usize) -> Field {
        let s = self.to_spectral();
        Field::from_spectral(self.grid, Rank::Scalar, vec![s.spec(c).to_vec()])
    }

    /// Physical values of every component on a padded grid, evaluated
    /// exactly by zero-extending the spectrum.
    pub fn fine_physical(&self, fine: &Grid) -> Vec<Vec<f64>> {
        let s = self.to_spectral();
        (0..s.ncomp())
            .map(|c| {
                let padded = pad_spectral(&self.grid, s.spec(c), fine);
                fft3::inverse(fine, &padded)
            })
            .collect()
    }

    /// Build a field on `coarse` from physical data on a padded grid: forward
    /// transform on the fine grid, then truncate to the coarse band.
    pub fn from_fine_physical(
        coarse: Grid,
        rank: Rank,
        fine: &Grid,
        comps: Vec<Vec<f64>>,
    ) -> Field {
        let spec = comps
            .into_iter()
            .map(|c| {
                let f = fft3::forward(fine, &c);
                truncate_spectral(fine, &f, &coarse)
            })
            .collect();
        Field::from_spectral(coarse, rank, spec)
    }
}

/// Zero-extend spectral coefficients onto a finer grid. Nyquist planes of the
/// coarse grid are dropped (they are kept at zero by the derivative rules).
pub fn pad_spectral(coarse: &Grid, spec: &[Complex64], fine: &Grid) -> Vec<Complex64> {
    let mut out = vec![Complex64::default(); fine.len()];
    for i3 in 0..coarse.n3 {
        let k3 = Grid::wavenumber(i3, coarse.n3);
        if k3 == -(coarse.n3 as i64) / 2 {
            continue;
        }
        let j3 = Grid::spectral_index(k3, fine.n3);
        for i2 in 0..coarse.n2 {
            let k2 = Grid::wavenumber(i2, coarse.n2);
            if k2 == -(coarse.n2 as i64) / 2 {
                continue;
            }
            let j2 = Grid::spectral_index(k2, fine.n2);
            for i1 in 0..coarse.n1 {
                let k1 = Grid::wavenumber(i1, coarse.n1);
                if k1 == -(coarse.n1 as i64) / 2 {
                    continue;
                }
                let j1 = Grid::spectral_index(k1, fine.n1);
                out[fine.idx(j1, j2, j3)] = spec[coarse.idx(i1, i2, i3)];
            }
        }
    }
    out
}

/// Keep only modes representable on the coarse grid (Nyquist zeroed).
pub fn truncate_spectral(fine: &Grid, spec: &[Complex64], coarse: &Grid) -> Vec<Complex64> {
    let mut out = vec![Complex64::default(); coarse.len()];
    for i3 in 0..coarse.n3 {
        let k3 = Grid::wavenumber(i3, coarse.n3);
        if k3 == -(coarse.n3 as i64) / 2 {
            continue;
        }
        let j3 = Grid::spectral_index(k3, fine.n3);
        for i2 in 0..coarse.n2 {
            let k2 = Grid::wavenumber(i2, coarse.n2);
            if k2 == -(coarse.n2 as i64) / 2 {
                continue;
            }
            let j2 = Grid::spectral_index(k2, fine.n2);
            for i1 in 0..coarse.n1 {
                let k1 = Grid::wavenumber(i1, coarse.n1);
                if k1 == -(coarse.n1 as i64) / 2 {
                    continue;
                }
                let j1 = Grid::spectral_index(k1, fine.n1);
                out[coarse.idx(i1, i2, i3)] = spec[fine.idx(j1, j2, j3)];
            }
        }
    }
    out
}

/// Zero every mode with |k_i| > band_i along any axis, in place.
pub fn band_limit(grid: &Grid, spec: &mut [Complex64], band: [i64; 3]) {
    for (idx, v) in spec.iter_mut().enumerate() {
        let k = grid.wavevector(idx);
        if k[0].abs() > band[0] || k[1].abs() > band[1] || k[2].abs() > band[2] {
            *v = Complex64::default();
        }
    }
}
