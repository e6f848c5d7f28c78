//! Non-commutative differential calculus generated by a set of Hermitian matrices `L_k`.
//!
//! * gradient `∇_L X = (L_k X − X L_k)_k`, mapping Hermitian matrices to skew-Hermitian blocks;
//! * divergence `∇_L* Y = Σ_k L_k Y_k − Y_k L_k`, its Hilbert–Schmidt adjoint;
//! * Laplacian `Δ_L X = −∇_L*∇_L X = Σ_k 2 L_k X L_k − X L_k² − L_k² X`.
//!
//! `Δ_L/2` is the dissipator of the Lindblad equation with Hermitian jump operators, so
//! `exp(tΔ_L)` is the quantum heat semigroup. The two products `M_ρ(v)` used to couple a
//! density with a velocity field (anti-commutator and Kubo–Mori) also live here.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::frame::{gell_mann, HermitianFrame};
use crate::herm::{
    c, commutator, eigh, eigh_matrix, BlockField, BlockKind, ComplexMatrix, DensityMatrix,
    EigenDecomposition, HermitianMatrix, EPS_PD,
};

/// Singular-value gate for the "identity spans the kernel of ∇_L" requirement.
pub const NULL_SPACE_GAP: f64 = 1e-8;

/// Relative eigenvalue gap below which the logarithmic mean falls back to the arithmetic mean.
pub const DEGENERACY_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct LindbladBasis {
    n: usize,
    ops: Vec<HermitianMatrix>,
    frame: HermitianFrame,
    frame_gradients: Vec<Vec<ComplexMatrix>>,
    gap: f64,
}

impl LindbladBasis {
    /// Validates the operators: common dimension, `N ≤ n²`, and that the commutant of
    /// `{L_k}` within Hermitian matrices is exactly `span{I}` (second-smallest singular value
    /// of the stacked commutator map above [`NULL_SPACE_GAP`]).
    pub fn new(ops: Vec<HermitianMatrix>) -> Result<Self> {
        let n = match ops.first() {
            Some(l) => l.dim(),
            None => return Err(Error::InvalidBasis("empty operator list".into())),
        };
        Self::with_dim(n, ops)
    }

    /// Like [`LindbladBasis::new`] but allows an empty list (only valid for `n = 1`).
    pub fn with_dim(n: usize, ops: Vec<HermitianMatrix>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidBasis("dimension must be positive".into()));
        }
        for l in &ops {
            if l.dim() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: l.dim(),
                });
            }
        }
        if ops.len() > n * n {
            return Err(Error::InvalidBasis(format!(
                "{} operators exceed n² = {}",
                ops.len(),
                n * n
            )));
        }
        let gap = if n == 1 {
            f64::INFINITY
        } else {
            if ops.is_empty() {
                return Err(Error::InvalidBasis("no operators for n > 1".into()));
            }
            commutator_map_gap(n, &ops)?
        };
        if gap <= NULL_SPACE_GAP {
            return Err(Error::InvalidBasis(format!(
                "kernel of the gradient is larger than span{{I}} (second singular value {gap:.3e})"
            )));
        }
        let frame = HermitianFrame::new(n);
        let frame_gradients = frame
            .traceless()
            .iter()
            .map(|e| ops.iter().map(|l| commutator(l.as_matrix(), e)).collect())
            .collect();
        Ok(Self {
            n,
            ops,
            frame,
            frame_gradients,
            gap,
        })
    }

    /// `{σx, σy, σz}`.
    pub fn pauli() -> Self {
        Self::new(gell_mann(2)).expect("Pauli basis is valid")
    }

    /// Generalized Gell-Mann matrices: the Hermitian basis of size `n²` minus the identity.
    pub fn gell_mann(n: usize) -> Result<Self> {
        if n == 1 {
            return Self::with_dim(1, Vec::new());
        }
        Self::new(gell_mann(n))
    }

    /// The basis `{U L_k U*}`.
    pub fn conjugated(&self, u: &ComplexMatrix) -> Result<Self> {
        Self::with_dim(self.n, self.ops.iter().map(|l| l.conjugate_by(u)).collect())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn operators(&self) -> &[HermitianMatrix] {
        &self.ops
    }

    pub fn frame(&self) -> &HermitianFrame {
        &self.frame
    }

    /// Second-smallest singular value of the stacked commutator map.
    pub fn null_space_gap(&self) -> f64 {
        self.gap
    }

    /// `∇_L E_a` for each traceless frame element `E_a`.
    pub(crate) fn frame_gradients(&self) -> &[Vec<ComplexMatrix>] {
        &self.frame_gradients
    }

    fn check_dim(&self, m: usize) -> Result<()> {
        if m != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: m,
            });
        }
        Ok(())
    }

    fn check_field(&self, y: &BlockField) -> Result<()> {
        if y.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: y.len(),
            });
        }
        if let Some(b) = y.blocks().first() {
            self.check_dim(b.nrows())?;
        }
        Ok(())
    }

    pub(crate) fn grad_raw(&self, x: &ComplexMatrix) -> Vec<ComplexMatrix> {
        self.ops.iter().map(|l| commutator(l.as_matrix(), x)).collect()
    }

    pub(crate) fn div_raw(&self, y: &[ComplexMatrix]) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.n, self.n);
        for (l, yk) in self.ops.iter().zip(y) {
            out += commutator(l.as_matrix(), yk);
        }
        out
    }

    pub(crate) fn laplacian_raw(&self, x: &ComplexMatrix) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.n, self.n);
        for l in &self.ops {
            let l = l.as_matrix();
            let lx = l * x;
            let xl = x * l;
            out += (&lx * l) * c(2.0, 0.0) - &xl * l - l * &lx;
        }
        out
    }
}

fn commutator_map_gap(n: usize, ops: &[HermitianMatrix]) -> Result<f64> {
    let n2 = n * n;
    let id = ComplexMatrix::identity(n, n);
    let mut stacked = ComplexMatrix::zeros(ops.len() * n2, n2);
    for (k, l) in ops.iter().enumerate() {
        let l = l.as_matrix();
        // column-major vec: vec(LX − XL) = (I ⊗ L − Lᵀ ⊗ I) vec(X)
        let block = id.kronecker(l) - l.transpose().kronecker(&id);
        stacked.view_mut((k * n2, 0), (n2, n2)).copy_from(&block);
    }
    let svd = stacked
        .try_svd(false, false, f64::EPSILON, 10_000)
        .ok_or(Error::EigenNonConvergence)?;
    let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();
    s.sort_by(f64::total_cmp);
    Ok(s[1])
}

/// `∇_L X`.
pub fn grad_l(basis: &LindbladBasis, x: &HermitianMatrix) -> Result<BlockField> {
    basis.check_dim(x.dim())?;
    Ok(BlockField::from_raw(
        BlockKind::SkewHermitian,
        basis.grad_raw(x.as_matrix()),
    ))
}

/// `∇_L* Y` for a skew-Hermitian block field.
pub fn div_l(basis: &LindbladBasis, y: &BlockField) -> Result<HermitianMatrix> {
    if y.kind() != BlockKind::SkewHermitian {
        return Err(Error::InvalidArgument(
            "divergence expects skew-Hermitian blocks".into(),
        ));
    }
    basis.check_field(y)?;
    if y.is_empty() {
        return Ok(HermitianMatrix::zeros(basis.dim()));
    }
    Ok(HermitianMatrix::from_raw(basis.div_raw(y.blocks())))
}

/// `Δ_L X = −∇_L*∇_L X`.
pub fn laplacian_l(basis: &LindbladBasis, x: &HermitianMatrix) -> Result<HermitianMatrix> {
    basis.check_dim(x.dim())?;
    Ok(HermitianMatrix::from_raw(basis.laplacian_raw(x.as_matrix())))
}

fn check_product_dims(rho: &DensityMatrix, v: &BlockField) -> Result<()> {
    if let Some(b) = v.blocks().first() {
        if b.nrows() != rho.dim() {
            return Err(Error::DimensionMismatch {
                expected: rho.dim(),
                got: b.nrows(),
            });
        }
    }
    Ok(())
}

/// Anti-commutator product `M_ρ(v) = ½(ρv + vρ)`, block-wise.
pub fn mult_anticomm(rho: &DensityMatrix, v: &BlockField) -> Result<BlockField> {
    check_product_dims(rho, v)?;
    let r = rho.as_matrix();
    Ok(BlockField::from_raw(
        v.kind(),
        v.blocks().iter().map(|b| anticomm_block(r, b)).collect(),
    ))
}

pub(crate) fn anticomm_block(rho: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    (rho * b + b * rho) * c(0.5, 0.0)
}

/// Logarithmic mean `(a − b)/(ln a − ln b)`, `Λ(a, a) = a`.
///
/// Evaluated as `b·x/ln(1 + x)` with `x = (a − b)/b` so that near-equal arguments keep full
/// relative accuracy.
pub fn log_mean(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi - lo < DEGENERACY_THRESHOLD * hi {
        return 0.5 * (a + b);
    }
    let x = (hi - lo) / lo;
    lo * x / x.ln_1p()
}

/// The Kubo–Mori product at a fixed density, diagonalized once.
///
/// In the eigenbasis of `ρ` (eigenvalues `p_i`) the product `∫₀¹ ρ^s v ρ^{1−s} ds` multiplies
/// entry `(i, j)` by `Λ(p_i, p_j)`.
#[derive(Debug, Clone)]
pub struct KuboMoriKernel {
    eig: EigenDecomposition,
    weights: DMatrix<f64>,
}

impl KuboMoriKernel {
    pub fn new(rho: &HermitianMatrix) -> Result<Self> {
        let eig = eigh(rho)?;
        Self::from_eigen(eig)
    }

    pub(crate) fn from_eigen(eig: EigenDecomposition) -> Result<Self> {
        let p = &eig.eigenvalues;
        if p[0] <= EPS_PD {
            return Err(Error::NotPositiveDefinite(p[0]));
        }
        let n = p.len();
        let weights = DMatrix::from_fn(n, n, |i, j| log_mean(p[i], p[j]));
        Ok(Self { eig, weights })
    }

    pub fn eigen(&self) -> &EigenDecomposition {
        &self.eig
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn apply_block(&self, b: &ComplexMatrix) -> ComplexMatrix {
        let mut t = self.eig.to_eigenbasis(b);
        t.iter_mut()
            .zip(self.weights.iter())
            .for_each(|(z, w)| *z *= *w);
        self.eig.from_eigenbasis(&t)
    }

    pub fn apply_inverse_block(&self, b: &ComplexMatrix) -> ComplexMatrix {
        let mut t = self.eig.to_eigenbasis(b);
        t.iter_mut()
            .zip(self.weights.iter())
            .for_each(|(z, w)| *z /= *w);
        self.eig.from_eigenbasis(&t)
    }
}

/// Kubo–Mori product `M_ρ(v) = ∫₀¹ ρ^s v ρ^{1−s} ds`, block-wise.
pub fn mult_kubo_mori(rho: &DensityMatrix, v: &BlockField) -> Result<BlockField> {
    check_product_dims(rho, v)?;
    let k = KuboMoriKernel::new(rho.hermitian())?;
    Ok(BlockField::from_raw(
        v.kind(),
        v.blocks().iter().map(|b| k.apply_block(b)).collect(),
    ))
}

/// Inverse of [`mult_kubo_mori`]: entry-wise division by the logarithmic mean.
pub fn mult_kubo_mori_inverse(rho: &DensityMatrix, u: &BlockField) -> Result<BlockField> {
    check_product_dims(rho, u)?;
    let k = KuboMoriKernel::new(rho.hermitian())?;
    Ok(BlockField::from_raw(
        u.kind(),
        u.blocks().iter().map(|b| k.apply_inverse_block(b)).collect(),
    ))
}

/// A non-commutative multiplication `M_ρ(v)` mapping velocities to momenta.
pub trait NonCommutativeProduct {
    fn apply(&self, rho: &DensityMatrix, v: &BlockField) -> Result<BlockField>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct AntiCommutatorProduct;

#[derive(Debug, Clone, Copy, Default)]
pub struct KuboMoriProduct;

impl NonCommutativeProduct for AntiCommutatorProduct {
    fn apply(&self, rho: &DensityMatrix, v: &BlockField) -> Result<BlockField> {
        mult_anticomm(rho, v)
    }
}

impl NonCommutativeProduct for KuboMoriProduct {
    fn apply(&self, rho: &DensityMatrix, v: &BlockField) -> Result<BlockField> {
        mult_kubo_mori(rho, v)
    }
}

/// Linear map on `n×n` matrices as an `n²×n²` matrix acting on column-major `vec(X)`.
#[derive(Debug, Clone)]
pub struct Superoperator {
    n: usize,
    matrix: ComplexMatrix,
}

impl Superoperator {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn apply(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        if x.shape() != (self.n, self.n) {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: x.nrows(),
            });
        }
        let v = DVector::from_column_slice(x.as_slice());
        let out = &self.matrix * v;
        Ok(ComplexMatrix::from_column_slice(self.n, self.n, out.as_slice()))
    }
}

/// `Δ_L` as `Σ_k 2 (L_kᵀ ⊗ L_k) − (L_k²)ᵀ ⊗ I − I ⊗ L_k²`.
pub fn laplacian_superoperator(basis: &LindbladBasis) -> Superoperator {
    let n = basis.dim();
    let id = ComplexMatrix::identity(n, n);
    let mut m = ComplexMatrix::zeros(n * n, n * n);
    for l in basis.operators() {
        let l = l.as_matrix();
        let l2 = l * l;
        m += l.transpose().kronecker(l) * c(2.0, 0.0);
        m -= l2.transpose().kronecker(&id);
        m -= id.kronecker(&l2);
    }
    Superoperator { n, matrix: m }
}

/// Exact solution operator `exp(tΔ_L)` of the quantum heat equation `ρ̇ = Δ_L ρ`.
///
/// The superoperator is Hermitian, so the exponential is taken through its spectral
/// decomposition, computed once.
#[derive(Debug, Clone)]
pub struct HeatSemigroup {
    n: usize,
    eig: EigenDecomposition,
}

impl HeatSemigroup {
    pub fn new(basis: &LindbladBasis) -> Result<Self> {
        Self::from_superoperator(&laplacian_superoperator(basis))
    }

    pub fn from_superoperator(s: &Superoperator) -> Result<Self> {
        Ok(Self {
            n: s.dim(),
            eig: eigh_matrix(s.matrix())?,
        })
    }

    /// Spectrum of the generator, ascending.
    pub fn spectrum(&self) -> &DVector<f64> {
        &self.eig.eigenvalues
    }

    pub fn evolve_matrix(&self, x: &ComplexMatrix, t: f64) -> Result<ComplexMatrix> {
        if t < 0.0 {
            return Err(Error::InvalidArgument(format!("negative time {t}")));
        }
        if x.shape() != (self.n, self.n) {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: x.nrows(),
            });
        }
        let v = DVector::from_column_slice(x.as_slice());
        let u = &self.eig.eigenvectors;
        let mut coeffs = u.adjoint() * v;
        for (z, &k) in coeffs.iter_mut().zip(self.eig.eigenvalues.iter()) {
            *z *= (t * k).exp();
        }
        let out = u * coeffs;
        Ok(ComplexMatrix::from_column_slice(self.n, self.n, out.as_slice()))
    }

    pub fn evolve(&self, rho0: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
        let m = self.evolve_matrix(rho0.as_matrix(), t)?;
        DensityMatrix::new(HermitianMatrix::from_raw(m))
    }
}

/// `exp(tΔ_L) ρ0`.
pub fn heat_semigroup(basis: &LindbladBasis, rho0: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
    if t < 0.0 {
        return Err(Error::InvalidArgument(format!("negative time {t}")));
    }
    basis.check_dim(rho0.dim())?;
    HeatSemigroup::new(basis)?.evolve(rho0, t)
}

/// One RK4 step of the Lindblad equation `ρ̇ = −i[H, ρ] + ½Δ_L ρ` (Hermitian jump operators).
pub fn lindblad_step(
    basis: &LindbladBasis,
    h: &HermitianMatrix,
    rho: &DensityMatrix,
    dt: f64,
) -> Result<DensityMatrix> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    basis.check_dim(rho.dim())?;
    basis.check_dim(h.dim())?;
    let hm = h.as_matrix();
    let rhs = |x: &ComplexMatrix| -> ComplexMatrix {
        commutator(hm, x) * c(0.0, -1.0) + basis.laplacian_raw(x) * c(0.5, 0.0)
    };
    let next = rk4(rho.as_matrix(), dt, rhs);
    let next = HermitianMatrix::from_raw(next);
    let min = next.min_eigenvalue()?;
    if min < EPS_PD {
        return Err(Error::PositivityLost {
            step: 0,
            min_eigenvalue: min,
        });
    }
    DensityMatrix::new(next)
}

pub(crate) fn rk4(
    x: &ComplexMatrix,
    dt: f64,
    f: impl Fn(&ComplexMatrix) -> ComplexMatrix,
) -> ComplexMatrix {
    let k1 = f(x);
    let k2 = f(&(x + &k1 * c(0.5 * dt, 0.0)));
    let k3 = f(&(x + &k2 * c(0.5 * dt, 0.0)));
    let k4 = f(&(x + &k3 * c(dt, 0.0)));
    x + (k1 + k2 * c(2.0, 0.0) + k3 * c(2.0, 0.0) + k4) * c(dt / 6.0, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::herm::{frobenius, log_pd, pauli};
    use crate::random;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn basis_xz() -> LindbladBasis {
        LindbladBasis::new(vec![pauli::x(), pauli::z()]).unwrap()
    }

    fn basis_x() -> LindbladBasis {
        // {σx} alone has commutant span{I, σx}; the calculus still works, it just is not a
        // valid transport basis. Built unchecked for the worked examples.
        let ops = vec![pauli::x()];
        let frame = HermitianFrame::new(2);
        let frame_gradients = frame
            .traceless()
            .iter()
            .map(|e| ops.iter().map(|l: &HermitianMatrix| commutator(l.as_matrix(), e)).collect())
            .collect();
        LindbladBasis {
            n: 2,
            ops,
            frame,
            frame_gradients,
            gap: 0.0,
        }
    }

    fn iy() -> ComplexMatrix {
        pauli::y().as_matrix() * c(0.0, 1.0)
    }

    fn assert_close(a: &ComplexMatrix, b: &ComplexMatrix, tol: f64) {
        let d = frobenius(&(a - b));
        assert!(d <= tol, "distance {d} > {tol}\n{a}\n{b}");
    }

    #[test]
    fn basis_validation() {
        assert!(LindbladBasis::pauli().null_space_gap() > 1.0);
        for n in 1..=4 {
            let b = LindbladBasis::gell_mann(n).unwrap();
            assert_eq!(b.len(), n * n - 1);
        }
        assert!(matches!(
            LindbladBasis::new(vec![pauli::z()]),
            Err(Error::InvalidBasis(_))
        ));
        assert!(matches!(
            LindbladBasis::new(vec![pauli::x(), HermitianMatrix::identity(3)]),
            Err(Error::DimensionMismatch { .. })
        ));
        // Commuting diagonal operators leave all diagonal matrices in the kernel.
        let d3 = vec![
            HermitianMatrix::from_diagonal(&[1.0, 0.0, 0.0]),
            HermitianMatrix::from_diagonal(&[0.0, 1.0, 0.0]),
        ];
        assert!(LindbladBasis::new(d3).is_err());
        assert!(LindbladBasis::with_dim(2, vec![]).is_err());
    }

    #[test]
    fn gradient_examples() {
        let g = grad_l(&basis_x(), &HermitianMatrix::identity(2)).unwrap();
        assert!(g.norm() < 1e-15);

        let g = grad_l(&basis_x(), &pauli::z()).unwrap();
        let want = ComplexMatrix::from_row_slice(2, 2, &[c(0., 0.), c(-2., 0.), c(2., 0.), c(0., 0.)]);
        assert_close(&g.blocks()[0], &want, 1e-15);
        assert_close(&g.blocks()[0], &(iy() * c(-2.0, 0.0)), 1e-15);

        let g = grad_l(&basis_xz(), &pauli::y()).unwrap();
        let iz = pauli::z().as_matrix() * c(0.0, 1.0);
        let ix = pauli::x().as_matrix() * c(0.0, 1.0);
        assert_close(&g.blocks()[0], &(iz * c(2.0, 0.0)), 1e-15);
        assert_close(&g.blocks()[1], &(ix * c(-2.0, 0.0)), 1e-15);
    }

    #[test]
    fn divergence_examples() {
        let b = basis_x();
        let zero = BlockField::zeros(BlockKind::SkewHermitian, 1, 2);
        assert!(div_l(&b, &zero).unwrap().norm() < 1e-15);
        // σx(−2iσy) − (−2iσy)σx = −2i[σx, σy] = 4σz, i.e. −Δ_L σz.
        let y = BlockField::new(BlockKind::SkewHermitian, vec![iy() * c(-2.0, 0.0)]).unwrap();
        let d = div_l(&b, &y).unwrap();
        assert_close(d.as_matrix(), &(pauli::z().as_matrix() * c(4.0, 0.0)), 1e-14);
        let hermitian_blocks = BlockField::zeros(BlockKind::Hermitian, 1, 2);
        assert!(div_l(&b, &hermitian_blocks).is_err());
        let wrong_count = BlockField::zeros(BlockKind::SkewHermitian, 2, 2);
        assert!(div_l(&b, &wrong_count).is_err());
    }

    #[test]
    fn laplacian_examples() {
        let l = laplacian_l(&basis_x(), &pauli::z()).unwrap();
        assert_close(l.as_matrix(), &(pauli::z().as_matrix() * c(-4.0, 0.0)), 1e-14);
        for b in [LindbladBasis::pauli(), basis_xz(), LindbladBasis::gell_mann(3).unwrap()] {
            let n = b.dim();
            assert!(laplacian_l(&b, &HermitianMatrix::identity(n)).unwrap().norm() < 1e-14);
        }
        let l = laplacian_l(&basis_xz(), &pauli::y()).unwrap();
        assert_close(l.as_matrix(), &(pauli::y().as_matrix() * c(-8.0, 0.0)), 1e-14);
    }

    #[test]
    fn laplacian_is_minus_div_grad_and_traceless() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in [2, 3, 4] {
            let b = LindbladBasis::gell_mann(n).unwrap();
            for _ in 0..10 {
                let x = random::hermitian(n, &mut rng);
                let lap = laplacian_l(&b, &x).unwrap();
                let dg = div_l(&b, &grad_l(&b, &x).unwrap()).unwrap();
                assert_close(lap.as_matrix(), &(-dg.as_matrix()), 1e-11);
                assert!(lap.trace().abs() < 1e-11);
            }
        }
    }

    #[test]
    fn anticommutator_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let v = random::block_field(BlockKind::SkewHermitian, 3, 2, &mut rng);
        let half = mult_anticomm(&DensityMatrix::maximally_mixed(2), &v).unwrap();
        assert!(half.sub(&v.scale(0.5)).unwrap().norm() < 1e-15);

        let rho = DensityMatrix::from_diagonal(&[0.75, 0.25]).unwrap();
        let ix = pauli::x().as_matrix() * c(0.0, 1.0);
        let v = BlockField::new(BlockKind::SkewHermitian, vec![ix.clone()]).unwrap();
        let m = mult_anticomm(&rho, &v).unwrap();
        assert_close(&m.blocks()[0], &(ix * c(0.5, 0.0)), 1e-15);

        let zero = BlockField::zeros(BlockKind::SkewHermitian, 2, 2);
        assert!(mult_anticomm(&rho, &zero).unwrap().norm() == 0.0);
        let wrong = BlockField::zeros(BlockKind::SkewHermitian, 1, 3);
        assert!(mult_anticomm(&rho, &wrong).is_err());
    }

    #[test]
    fn log_mean_values() {
        assert_eq!(log_mean(0.3, 0.3), 0.3);
        let l = log_mean(0.75, 0.25);
        assert!((l - 0.5 / 3f64.ln()).abs() < 1e-15);
        assert!((l - 0.455_119_613).abs() < 1e-9);
        assert_eq!(log_mean(0.2, 0.7), log_mean(0.7, 0.2));
        // Continuity across the degeneracy threshold.
        let p = 0.4;
        for rel in [1e-13, 1e-11, 1e-9, 1e-7] {
            let q = p * (1.0 + rel);
            let exact_series = p * (1.0 + rel / 2.0 - rel * rel / 12.0);
            assert!((log_mean(q, p) - exact_series).abs() < 1e-15, "rel={rel}");
        }
    }

    #[test]
    fn kubo_mori_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for n in [2, 3] {
            let v = random::block_field(BlockKind::SkewHermitian, 2, n, &mut rng);
            let m = mult_kubo_mori(&DensityMatrix::maximally_mixed(n), &v).unwrap();
            assert!(m.sub(&v.scale(1.0 / n as f64)).unwrap().norm() < 1e-14);
            let inv = mult_kubo_mori_inverse(&DensityMatrix::maximally_mixed(n), &v).unwrap();
            assert!(inv.sub(&v.scale(n as f64)).unwrap().norm() < 1e-13);
        }
        let rho = DensityMatrix::from_diagonal(&[0.75, 0.25]).unwrap();
        let ix = pauli::x().as_matrix() * c(0.0, 1.0);
        let v = BlockField::new(BlockKind::SkewHermitian, vec![ix.clone()]).unwrap();
        let m = mult_kubo_mori(&rho, &v).unwrap();
        assert_close(&m.blocks()[0], &(&ix * c(0.5 / 3f64.ln(), 0.0)), 1e-15);
        assert!((m.blocks()[0][(0, 1)].im - 0.455_120).abs() < 1e-6);
        let inv = mult_kubo_mori_inverse(&rho, &v).unwrap();
        assert_close(&inv.blocks()[0], &(&ix * c(3f64.ln() / 0.5, 0.0)), 1e-14);
        assert!((inv.blocks()[0][(0, 1)].im - 2.197_225).abs() < 1e-6);
    }

    /// Midpoint rule for `∫₀¹ ρ^s B ρ^{1−s} ds`, independent of the closed-form kernel.
    fn kubo_mori_quadrature(rho: &HermitianMatrix, b: &ComplexMatrix, nodes: usize) -> ComplexMatrix {
        let e = eigh(rho).unwrap();
        let n = rho.dim();
        let mut acc = ComplexMatrix::zeros(n, n);
        for q in 0..nodes {
            let s = (q as f64 + 0.5) / nodes as f64;
            let left = e.with_spectrum(|x| x.powf(s));
            let right = e.with_spectrum(|x| x.powf(1.0 - s));
            acc += left * b * right;
        }
        acc * c(1.0 / nodes as f64, 0.0)
    }

    #[test]
    fn kubo_mori_matches_quadrature() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for n in [2, 3] {
            let rho = random::density(n, &mut rng);
            let b = random::block_field(BlockKind::SkewHermitian, 1, n, &mut rng);
            let closed = mult_kubo_mori(&rho, &b).unwrap();
            let quad = kubo_mori_quadrature(rho.hermitian(), &b.blocks()[0], 10_000);
            let err = frobenius(&(&closed.blocks()[0] - quad)) / b.norm();
            assert!(err < 1e-8, "err={err}");
        }
    }

    #[test]
    fn kubo_mori_inverse_round_trip_and_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let rho = random::density(3, &mut rng);
        let v = random::block_field(BlockKind::SkewHermitian, 4, 3, &mut rng);
        let back = mult_kubo_mori_inverse(&rho, &mult_kubo_mori(&rho, &v).unwrap()).unwrap();
        assert!(back.sub(&v).unwrap().norm() < 1e-10 * v.norm());
        let fwd = mult_kubo_mori(&rho, &mult_kubo_mori_inverse(&rho, &v).unwrap()).unwrap();
        assert!(fwd.sub(&v).unwrap().norm() < 1e-10 * v.norm());
        assert!(fwd.blocks().iter().all(|b| frobenius(&(b + b.adjoint())) < 1e-14));
        assert!(matches!(
            KuboMoriKernel::new(&HermitianMatrix::from_diagonal(&[1.0, 0.0])),
            Err(Error::NotPositiveDefinite(_))
        ));
    }

    #[test]
    fn log_identity_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(28);
        for b in [LindbladBasis::pauli(), LindbladBasis::gell_mann(3).unwrap()] {
            let rho = random::density(b.dim(), &mut rng);
            let lhs = mult_kubo_mori(&rho, &grad_l(&b, &log_pd(rho.hermitian()).unwrap()).unwrap()).unwrap();
            let rhs = grad_l(&b, rho.hermitian()).unwrap();
            assert!(lhs.sub(&rhs).unwrap().norm() <= 1e-10 * rhs.norm());
        }
    }

    #[test]
    fn superoperator_examples() {
        let s = laplacian_superoperator(&basis_x());
        assert!(frobenius(&s.apply(&ComplexMatrix::identity(2, 2)).unwrap()) < 1e-15);
        let z = s.apply(pauli::z().as_matrix()).unwrap();
        assert_close(&z, &(pauli::z().as_matrix() * c(-4.0, 0.0)), 1e-14);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for b in [LindbladBasis::pauli(), basis_xz(), LindbladBasis::gell_mann(3).unwrap()] {
            let s = laplacian_superoperator(&b);
            for _ in 0..10 {
                let x = random::complex(b.dim(), &mut rng);
                assert_close(&s.apply(&x).unwrap(), &b.laplacian_raw(&x), 1e-10);
            }
            let heat = HeatSemigroup::from_superoperator(&s).unwrap();
            let spec = heat.spectrum();
            let scale = spec.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            assert!(spec.iter().all(|&k| k <= 1e-12 * scale));
            let kernel = spec.iter().filter(|k| k.abs() < 1e-10 * scale).count();
            assert_eq!(kernel, 1);
        }
    }

    #[test]
    fn heat_semigroup_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let b = basis_xz();
        let rho0 = random::density(2, &mut rng);
        let same = heat_semigroup(&b, &rho0, 0.0).unwrap();
        assert_close(same.as_matrix(), rho0.as_matrix(), 1e-14);
        let late = heat_semigroup(&b, &rho0, 10.0).unwrap();
        assert_close(late.as_matrix(), DensityMatrix::maximally_mixed(2).as_matrix(), 1e-8);
        for t in [0.01, 0.3, 2.0] {
            let r = heat_semigroup(&b, &rho0, t).unwrap();
            assert!((r.hermitian().trace() - 1.0).abs() < 1e-10);
        }
        assert!(heat_semigroup(&b, &rho0, -1.0).is_err());
    }

    #[test]
    fn lindblad_step_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let b = basis_xz();
        let zero_h = HermitianMatrix::zeros(2);
        let mut rho = random::density(2, &mut rng);
        for _ in 0..4000 {
            rho = lindblad_step(&b, &zero_h, &rho, 0.01).unwrap();
        }
        assert_close(rho.as_matrix(), DensityMatrix::maximally_mixed(2).as_matrix(), 1e-8);

        // Unitary evolution only: purity is conserved.
        let empty = LindbladBasis {
            ops: Vec::new(),
            ..basis_xz()
        };
        let mut rho = random::density(2, &mut rng);
        let purity = |r: &DensityMatrix| crate::herm::real_inner(r.as_matrix(), r.as_matrix());
        let p0 = purity(&rho);
        for _ in 0..1000 {
            rho = lindblad_step(&empty, &pauli::z(), &rho, 0.01).unwrap();
        }
        assert!((purity(&rho) - p0).abs() < 1e-8);

        // Local error against the exact semigroup at half rate scales like dt⁵.
        let rho0 = random::density(2, &mut rng);
        let heat = HeatSemigroup::new(&b).unwrap();
        let err = |dt: f64| {
            let step = lindblad_step(&b, &zero_h, &rho0, dt).unwrap();
            let exact = heat.evolve(&rho0, dt / 2.0).unwrap();
            frobenius(&(step.as_matrix() - exact.as_matrix()))
        };
        let (e1, e2) = (err(0.04), err(0.02));
        let order = (e1 / e2).log2();
        assert!(order > 4.5, "observed order {order}");
        assert!(lindblad_step(&b, &zero_h, &rho0, 0.0).is_err());
    }

    #[test]
    fn lindblad_step_positivity_error() {
        let b = LindbladBasis::pauli();
        let rho = DensityMatrix::from_diagonal(&[1.0 - 1e-6, 1e-6]).unwrap();
        let err = lindblad_step(&b, &(&pauli::z() * 50.0), &rho, 1.0);
        assert!(matches!(err, Err(Error::PositivityLost { .. })));
    }

    #[test]
    fn product_rule_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let b = LindbladBasis::gell_mann(3).unwrap();
        let x = random::hermitian(3, &mut rng);
        let y = random::hermitian(3, &mut rng);
        let xy = HermitianMatrix::from_raw(x.as_matrix() * y.as_matrix() + y.as_matrix() * x.as_matrix());
        let lhs = grad_l(&b, &xy).unwrap();
        let gx = grad_l(&b, &x).unwrap();
        let gy = grad_l(&b, &y).unwrap();
        for k in 0..b.len() {
            let (xm, ym) = (x.as_matrix(), y.as_matrix());
            let rhs = &gx.blocks()[k] * ym + xm * &gy.blocks()[k] + &gy.blocks()[k] * xm + ym * &gx.blocks()[k];
            assert_close(&lhs.blocks()[k], &rhs, 1e-12);
        }
    }
}
