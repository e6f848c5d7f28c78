//! Uniform cell-centred grid on `E = [0, 1]` with zero-flux walls.
//!
//! Points sit at `x_i = (i + ½)h`, `h = 1/G`. The gradient uses centred differences inside and
//! the rows `(f₁ − f₀)/2h`, `(f_{G−1} − f_{G−2})/2h` at the walls; the divergence is defined as
//! its exact negative transpose under plain sums, which makes `Σ_i (div q)_i = 0` and gives the
//! wall rows `(q₀ + q₁)/2h`, i.e. a zero flux through the boundary.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::herm::{c, ComplexMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    points: usize,
    h: f64,
}

impl Grid {
    pub fn new(points: usize) -> Result<Self> {
        if points < 3 {
            return Err(Error::InvalidArgument(format!(
                "grid needs at least 3 points, got {points}"
            )));
        }
        Ok(Self {
            points,
            h: 1.0 / points as f64,
        })
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn coordinates(&self) -> Vec<f64> {
        (0..self.points).map(|i| (i as f64 + 0.5) * self.h).collect()
    }

    /// Real `G×G` matrix of the gradient stencil.
    pub fn gradient_matrix(&self) -> DMatrix<f64> {
        let g = self.points;
        let s = 0.5 / self.h;
        let mut m = DMatrix::zeros(g, g);
        m[(0, 0)] = -s;
        m[(0, 1)] = s;
        for i in 1..g - 1 {
            m[(i, i - 1)] = -s;
            m[(i, i + 1)] = s;
        }
        m[(g - 1, g - 2)] = -s;
        m[(g - 1, g - 1)] = s;
        m
    }

    pub(crate) fn grad_raw(&self, f: &[ComplexMatrix]) -> Vec<ComplexMatrix> {
        let g = self.points;
        let s = c(0.5 / self.h, 0.0);
        (0..g)
            .map(|i| {
                let (lo, hi) = match i {
                    0 => (0, 1),
                    i if i == g - 1 => (g - 2, g - 1),
                    i => (i - 1, i + 1),
                };
                (&f[hi] - &f[lo]) * s
            })
            .collect()
    }

    pub(crate) fn div_raw(&self, q: &[ComplexMatrix]) -> Vec<ComplexMatrix> {
        let g = self.points;
        let s = c(0.5 / self.h, 0.0);
        (0..g)
            .map(|i| match i {
                0 => (&q[0] + &q[1]) * s,
                i if i == g - 1 => -(&q[g - 1] + &q[g - 2]) * s,
                i => (&q[i + 1] - &q[i - 1]) * s,
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::herm::real_inner;
    use crate::random;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn divergence_is_negative_transpose() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for g in [3, 4, 5, 16] {
            let grid = Grid::new(g).unwrap();
            let f: Vec<_> = (0..g).map(|_| random::complex(2, &mut rng)).collect();
            let q: Vec<_> = (0..g).map(|_| random::complex(2, &mut rng)).collect();
            let gf = grid.grad_raw(&f);
            let dq = grid.div_raw(&q);
            let lhs: f64 = gf.iter().zip(&q).map(|(a, b)| real_inner(a, b)).sum();
            let rhs: f64 = -f.iter().zip(&dq).map(|(a, b)| real_inner(a, b)).sum::<f64>();
            assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0), "g={g}");
            let gm = grid.gradient_matrix();
            let scalar: Vec<_> = (0..g).map(|i| ComplexMatrix::from_element(1, 1, c(i as f64 * 0.3, 0.0))).collect();
            let gs = grid.grad_raw(&scalar);
            for i in 0..g {
                let want: f64 = (0..g).map(|k| gm[(i, k)] * 0.3 * k as f64).sum();
                assert!((gs[i][(0, 0)].re - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gradient_exactness() {
        let grid = Grid::new(8).unwrap();
        let xs = grid.coordinates();
        let id = ComplexMatrix::identity(2, 2);
        let constant: Vec<_> = xs.iter().map(|_| &id * c(0.7, 0.0)).collect();
        assert!(grid.grad_raw(&constant).iter().all(|m| m.norm() == 0.0));
        let linear: Vec<_> = xs.iter().map(|&x| &id * c(3.0 * x, 0.0)).collect();
        let g = grid.grad_raw(&linear);
        for m in &g[1..7] {
            assert!((m - &id * c(3.0, 0.0)).norm() < 1e-12);
        }
        let q: Vec<_> = xs.iter().map(|&x| &id * c(x.sin(), 0.0)).collect();
        let total: ComplexMatrix = grid.div_raw(&q).iter().sum();
        assert!(total.norm() < 1e-12);
        assert!(Grid::new(2).is_err());
    }
}
