//! Seeded random generators for matrices, states and fields. Used by the property suites.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::grid::Grid;
use crate::spatial::MatrixField;
use crate::herm::{
    c, eigh, BlockField, BlockKind, ComplexMatrix, DensityMatrix, HermitianMatrix, TangentVector,
};

/// Ginibre matrix with standard complex normal entries.
pub fn complex<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ComplexMatrix {
    ComplexMatrix::from_fn(n, n, |_, _| {
        c(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

pub fn hermitian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> HermitianMatrix {
    HermitianMatrix::from_raw(complex(n, rng))
}

pub fn traceless_hermitian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> TangentVector {
    crate::herm::project_traceless_hermitian(&complex(n, rng))
}

/// `G G*/n + I/4`: well-conditioned positive definite.
pub fn positive_definite<R: Rng + ?Sized>(n: usize, rng: &mut R) -> HermitianMatrix {
    let g = complex(n, rng);
    let w = &g * g.adjoint() * c(1.0 / n as f64, 0.0) + ComplexMatrix::identity(n, n) * c(0.25, 0.0);
    HermitianMatrix::from_raw(w)
}

pub fn density<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DensityMatrix {
    DensityMatrix::normalized(positive_definite(n, rng)).expect("positive definite by construction")
}

/// Haar-like unitary `exp(iH)` for a random Hermitian `H`.
pub fn unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ComplexMatrix {
    let h = hermitian(n, rng);
    let e = eigh(&h).expect("hermitian eigen-decomposition");
    let mut scaled = e.eigenvectors.clone();
    for (j, &l) in e.eigenvalues.iter().enumerate() {
        let phase = c(l.cos(), l.sin());
        scaled.column_mut(j).iter_mut().for_each(|z| *z *= phase);
    }
    scaled * e.eigenvectors.adjoint()
}

pub fn block_field<R: Rng + ?Sized>(kind: BlockKind, count: usize, n: usize, rng: &mut R) -> BlockField {
    BlockField::from_raw(kind, (0..count).map(|_| complex(n, rng)).collect())
}

/// Smooth positive field of unit mass interpolating two random states with a bump profile.
pub fn density_field<R: Rng + ?Sized>(grid: &Grid, n: usize, rng: &mut R) -> Result<MatrixField> {
    let a = density(n, rng);
    let b = density(n, rng);
    let centre: f64 = rng.random_range(0.2..0.8);
    let xs = grid.coordinates();
    let vals: Vec<HermitianMatrix> = xs
        .iter()
        .map(|&x| {
            let w = 1.0 + 0.6 * (-(x - centre).powi(2) / 0.02).exp();
            (&a.hermitian().scale(1.0 - x) + &b.hermitian().scale(x)).scale(w)
        })
        .collect();
    let f = MatrixField::new(grid.clone(), vals)?;
    let m = f.mass();
    MatrixField::new(grid.clone(), f.values().iter().map(|v| v.scale(1.0 / m)).collect())
}

