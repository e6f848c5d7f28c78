//! Dense complex linear algebra for the matrix spaces the rest of the crate works in.
//!
//! Storage is an `nalgebra` column-major `DMatrix<Complex64>`. The newtypes below enforce
//! the structural invariants (Hermitian, skew-Hermitian, unit-trace positive definite,
//! traceless) at construction and keep the stored form exactly (anti-)symmetrized.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type ComplexMatrix = DMatrix<Complex64>;

/// Relative Hermiticity tolerance for constructors.
pub const TAU_HERM: f64 = 1e-10;
/// Absolute trace tolerance for densities and tangent vectors.
pub const TAU_TRACE: f64 = 1e-9;
/// Strict positive-definiteness floor.
pub const EPS_PD: f64 = 1e-12;
/// Reconstruction tolerance for eigen-decompositions.
pub const TAU_RECON: f64 = 1e-10;

const EIGEN_MAX_ITER: usize = 10_000;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn frobenius(m: &ComplexMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn complex_trace(m: &ComplexMatrix) -> Complex64 {
    (0..m.nrows()).map(|i| m[(i, i)]).sum()
}

/// Hilbert–Schmidt inner product `tr(X* Y)`.
pub fn hs_inner(x: &ComplexMatrix, y: &ComplexMatrix) -> Result<Complex64> {
    if x.shape() != y.shape() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            got: y.nrows(),
        });
    }
    Ok(x.iter().zip(y.iter()).map(|(a, b)| a.conj() * b).sum())
}

/// `Re tr(X* Y)` without shape checks; callers guarantee matching shapes.
pub(crate) fn real_inner(x: &ComplexMatrix, y: &ComplexMatrix) -> f64 {
    x.iter()
        .zip(y.iter())
        .map(|(a, b)| a.re * b.re + a.im * b.im)
        .sum()
}

pub(crate) fn hermitian_part(m: &ComplexMatrix) -> ComplexMatrix {
    (m + m.adjoint()) * c(0.5, 0.0)
}

pub(crate) fn skew_part(m: &ComplexMatrix) -> ComplexMatrix {
    (m - m.adjoint()) * c(0.5, 0.0)
}

pub(crate) fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a * b - b * a
}

fn check_square(m: &ComplexMatrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare(m.nrows(), m.ncols()));
    }
    if m.nrows() == 0 {
        return Err(Error::InvalidArgument("empty matrix".into()));
    }
    Ok(m.nrows())
}

/// A Hermitian matrix, stored exactly symmetrized.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix(ComplexMatrix);

impl HermitianMatrix {
    /// Accepts `m` if `‖m − m*‖_F ≤ τ_herm·max(1, ‖m‖_F)` and stores `(m + m*)/2`.
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        check_square(&m)?;
        let dev = frobenius(&(&m - m.adjoint())) / frobenius(&m).max(1.0);
        if dev > TAU_HERM {
            return Err(Error::NotHermitian(dev));
        }
        Ok(Self(hermitian_part(&m)))
    }

    /// Symmetrizes without checking. For results that are Hermitian by construction.
    pub(crate) fn from_raw(m: ComplexMatrix) -> Self {
        Self(hermitian_part(&m))
    }

    pub fn zeros(n: usize) -> Self {
        Self(ComplexMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        Self(ComplexMatrix::identity(n, n))
    }

    pub fn scaled_identity(n: usize, s: f64) -> Self {
        Self(ComplexMatrix::identity(n, n) * c(s, 0.0))
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let v = DVector::from_iterator(d.len(), d.iter().map(|&x| c(x, 0.0)));
        Self(ComplexMatrix::from_diagonal(&v))
    }

    /// Row-major real entries.
    pub fn from_real_rows(n: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: entries.len(),
            });
        }
        Self::new(ComplexMatrix::from_row_iterator(
            n,
            n,
            entries.iter().map(|&x| c(x, 0.0)),
        ))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    pub fn trace(&self) -> f64 {
        complex_trace(&self.0).re
    }

    pub fn norm(&self) -> f64 {
        frobenius(&self.0)
    }

    /// `tr(self · other)`, real for Hermitian pairs.
    pub fn inner(&self, other: &HermitianMatrix) -> f64 {
        real_inner(&self.0, &other.0)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(&self.0 * c(s, 0.0))
    }

    pub fn conjugate_by(&self, u: &ComplexMatrix) -> Self {
        Self::from_raw(u * &self.0 * u.adjoint())
    }

    /// Traceless part `A − tr(A)/n · I`.
    pub fn traceless(&self) -> Self {
        let n = self.dim();
        let t = self.trace() / n as f64;
        Self(&self.0 - ComplexMatrix::identity(n, n) * c(t, 0.0))
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(eigh(self)?.eigenvalues[0])
    }
}

impl Add for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn add(self, rhs: &HermitianMatrix) -> HermitianMatrix {
        HermitianMatrix(&self.0 + &rhs.0)
    }
}

impl Sub for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn sub(self, rhs: &HermitianMatrix) -> HermitianMatrix {
        HermitianMatrix(&self.0 - &rhs.0)
    }
}

impl Mul<f64> for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn mul(self, s: f64) -> HermitianMatrix {
        self.scale(s)
    }
}

impl Neg for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn neg(self) -> HermitianMatrix {
        HermitianMatrix(-&self.0)
    }
}

/// A skew-Hermitian matrix (`A* = −A`), stored exactly anti-symmetrized.
#[derive(Debug, Clone, PartialEq)]
pub struct SkewHermitianMatrix(ComplexMatrix);

impl SkewHermitianMatrix {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        check_square(&m)?;
        let dev = frobenius(&(&m + m.adjoint())) / frobenius(&m).max(1.0);
        if dev > TAU_HERM {
            return Err(Error::NotSkewHermitian(dev));
        }
        Ok(Self(skew_part(&m)))
    }

    /// `i·H` for Hermitian `H`.
    pub fn from_hermitian_times_i(h: &HermitianMatrix) -> Self {
        Self(h.as_matrix() * c(0.0, 1.0))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }
}

/// Strictly positive-definite Hermitian matrix with unit trace.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(HermitianMatrix);

impl DensityMatrix {
    pub fn new(h: HermitianMatrix) -> Result<Self> {
        let t = h.trace();
        if (t - 1.0).abs() > TAU_TRACE {
            return Err(Error::InvalidTrace {
                expected: 1.0,
                got: t,
            });
        }
        let min = h.min_eigenvalue()?;
        if min <= EPS_PD {
            return Err(Error::NotPositiveDefinite(min));
        }
        Ok(Self(h))
    }

    pub fn from_matrix(m: ComplexMatrix) -> Result<Self> {
        Self::new(HermitianMatrix::new(m)?)
    }

    /// Rescales a positive-definite Hermitian matrix to unit trace.
    pub fn normalized(h: HermitianMatrix) -> Result<Self> {
        let t = h.trace();
        if t <= 0.0 {
            return Err(Error::NotPositiveDefinite(t));
        }
        Self::new(h.scale(1.0 / t))
    }

    /// The maximally mixed state `I/n`.
    pub fn maximally_mixed(n: usize) -> Self {
        Self(HermitianMatrix::scaled_identity(n, 1.0 / n as f64))
    }

    pub fn from_diagonal(d: &[f64]) -> Result<Self> {
        Self::new(HermitianMatrix::from_diagonal(d))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn hermitian(&self) -> &HermitianMatrix {
        &self.0
    }

    pub fn as_matrix(&self) -> &ComplexMatrix {
        self.0.as_matrix()
    }

    pub fn into_hermitian(self) -> HermitianMatrix {
        self.0
    }

    pub fn conjugate_by(&self, u: &ComplexMatrix) -> Result<Self> {
        Self::new(self.0.conjugate_by(u))
    }
}

/// Traceless Hermitian matrix: a tangent vector to the density manifold.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector(HermitianMatrix);

impl TangentVector {
    pub fn new(h: HermitianMatrix) -> Result<Self> {
        let t = h.trace();
        if t.abs() > TAU_TRACE {
            return Err(Error::InvalidTrace {
                expected: 0.0,
                got: t,
            });
        }
        Ok(Self(h))
    }

    pub fn between(from: &DensityMatrix, to: &DensityMatrix) -> Result<Self> {
        Self::new(to.hermitian() - from.hermitian())
    }

    pub fn zeros(n: usize) -> Self {
        Self(HermitianMatrix::zeros(n))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn hermitian(&self) -> &HermitianMatrix {
        &self.0
    }

    pub fn as_matrix(&self) -> &ComplexMatrix {
        self.0.as_matrix()
    }
}

/// Projects an arbitrary square matrix onto traceless Hermitian matrices.
pub fn project_traceless_hermitian(a: &ComplexMatrix) -> TangentVector {
    TangentVector(HermitianMatrix::from_raw(a.clone()).traceless())
}

/// Whether the blocks of a [`BlockField`] are skew-Hermitian or Hermitian.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    SkewHermitian,
    Hermitian,
}

/// An `N`-vector of `n×n` blocks, all skew-Hermitian or all Hermitian.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockField {
    kind: BlockKind,
    blocks: Vec<ComplexMatrix>,
}

impl BlockField {
    pub fn new(kind: BlockKind, blocks: Vec<ComplexMatrix>) -> Result<Self> {
        if let Some(first) = blocks.first() {
            let n = check_square(first)?;
            for b in &blocks {
                if b.shape() != (n, n) {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        got: b.nrows(),
                    });
                }
            }
        }
        let blocks = blocks
            .into_iter()
            .map(|b| match kind {
                BlockKind::SkewHermitian => SkewHermitianMatrix::new(b).map(|s| s.0),
                BlockKind::Hermitian => HermitianMatrix::new(b).map(|h| h.0),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { kind, blocks })
    }

    pub(crate) fn from_raw(kind: BlockKind, blocks: Vec<ComplexMatrix>) -> Self {
        let blocks = blocks
            .into_iter()
            .map(|b| match kind {
                BlockKind::SkewHermitian => skew_part(&b),
                BlockKind::Hermitian => hermitian_part(&b),
            })
            .collect();
        Self { kind, blocks }
    }

    pub fn zeros(kind: BlockKind, count: usize, n: usize) -> Self {
        Self {
            kind,
            blocks: vec![ComplexMatrix::zeros(n, n); count],
        }
    }

    pub fn kind(&self) -> BlockKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn blocks(&self) -> &[ComplexMatrix] {
        &self.blocks
    }

    pub fn into_blocks(self) -> Vec<ComplexMatrix> {
        self.blocks
    }

    /// `Σ_k Re tr(X_k* Y_k)`.
    pub fn inner(&self, other: &BlockField) -> Result<f64> {
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: other.len(),
            });
        }
        self.blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| hs_inner(a, b).map(|z| z.re))
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| frobenius(b).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            kind: self.kind,
            blocks: self.blocks.iter().map(|b| b * c(s, 0.0)).collect(),
        }
    }

    pub fn add(&self, other: &BlockField) -> Result<Self> {
        if self.len() != other.len() || self.kind != other.kind {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: other.len(),
            });
        }
        Ok(Self {
            kind: self.kind,
            blocks: self
                .blocks
                .iter()
                .zip(&other.blocks)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn sub(&self, other: &BlockField) -> Result<Self> {
        self.add(&other.scale(-1.0))
    }

    pub fn conjugate_by(&self, u: &ComplexMatrix) -> Self {
        Self {
            kind: self.kind,
            blocks: self.blocks.iter().map(|b| u * b * u.adjoint()).collect(),
        }
    }
}

/// Spectral decomposition `A = U diag(λ) U*` with ascending eigenvalues.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: ComplexMatrix,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.with_spectrum(|x| x)
    }

    /// `U diag(f(λ)) U*` without domain checks.
    pub(crate) fn with_spectrum(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let u = &self.eigenvectors;
        let mut scaled = u.clone();
        for (j, &l) in self.eigenvalues.iter().enumerate() {
            let fl = f(l);
            scaled.column_mut(j).scale_mut(fl);
        }
        scaled * u.adjoint()
    }

    /// `U* X U`: `X` expressed in the eigenbasis.
    pub(crate) fn to_eigenbasis(&self, x: &ComplexMatrix) -> ComplexMatrix {
        self.eigenvectors.adjoint() * x * &self.eigenvectors
    }

    pub(crate) fn from_eigenbasis(&self, x: &ComplexMatrix) -> ComplexMatrix {
        &self.eigenvectors * x * self.eigenvectors.adjoint()
    }
}

/// Raw Hermitian eigen-decomposition: ascending order, phase-fixed eigenvectors.
pub(crate) fn eigh_matrix(m: &ComplexMatrix) -> Result<EigenDecomposition> {
    let n = m.nrows();
    let eig = m
        .clone()
        .try_symmetric_eigen(f64::EPSILON, EIGEN_MAX_ITER)
        .ok_or(Error::EigenNonConvergence)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut eigenvectors = ComplexMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(src);
        let max = col.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let pivot = col
            .iter()
            .position(|z| z.norm() >= max * (1.0 - 1e-10))
            .unwrap_or(0);
        let p = col[pivot];
        let phase = if p.norm() > 0.0 { p.conj() / p.norm() } else { c(1.0, 0.0) };
        for i in 0..n {
            eigenvectors[(i, dst)] = col[i] * phase;
        }
    }
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

pub fn eigh(a: &HermitianMatrix) -> Result<EigenDecomposition> {
    eigh_matrix(a.as_matrix())
}

/// `U diag(f(λ)) U*`; fails if `f` is not finite on some eigenvalue.
pub fn matrix_function(a: &HermitianMatrix, f: impl Fn(f64) -> f64) -> Result<HermitianMatrix> {
    let e = eigh(a)?;
    matrix_function_of(&e, f)
}

pub(crate) fn matrix_function_of(
    e: &EigenDecomposition,
    f: impl Fn(f64) -> f64,
) -> Result<HermitianMatrix> {
    for &l in e.eigenvalues.iter() {
        if !f(l).is_finite() {
            return Err(Error::OutsideDomain(l));
        }
    }
    Ok(HermitianMatrix::from_raw(e.with_spectrum(f)))
}

/// Matrix logarithm of a positive-definite matrix, with the `ε_pd` floor enforced.
pub fn log_pd(a: &HermitianMatrix) -> Result<HermitianMatrix> {
    let e = eigh(a)?;
    if e.eigenvalues[0] <= EPS_PD {
        return Err(Error::NotPositiveDefinite(e.eigenvalues[0]));
    }
    matrix_function_of(&e, f64::ln)
}

/// The Pauli matrices.
pub mod pauli {
    use super::{c, ComplexMatrix, HermitianMatrix};

    pub fn x() -> HermitianMatrix {
        HermitianMatrix::from_raw(ComplexMatrix::from_row_slice(
            2,
            2,
            &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)],
        ))
    }

    pub fn y() -> HermitianMatrix {
        HermitianMatrix::from_raw(ComplexMatrix::from_row_slice(
            2,
            2,
            &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)],
        ))
    }

    pub fn z() -> HermitianMatrix {
        HermitianMatrix::from_diagonal(&[1.0, -1.0])
    }
}
