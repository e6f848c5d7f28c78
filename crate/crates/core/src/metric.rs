//! Weighted Poisson equation and the induced Riemannian inner products.
//!
//! A tangent vector `δ` at `ρ` is identified with a potential `λ` through
//! `δ = A_ρ(λ) = −∇_L* M_ρ(∇_L λ)`. In the orthonormal traceless frame `{E_a}` the operator is
//! `−K` with the stiffness matrix `K_ab = ⟨∇_L E_a, M_ρ ∇_L E_b⟩`, which is symmetric positive
//! definite for a valid basis. Hence `λ = −K⁻¹δ`, `⟨δ₁, δ₂⟩_ρ = δ₁ᵀK⁻¹δ₂ = −tr(λ₁δ₂)` and the
//! minimal-action velocity is `v = −∇_L λ`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::herm::{
    real_inner, BlockField, BlockKind, ComplexMatrix, DensityMatrix, HermitianMatrix,
    TangentVector, EPS_PD,
};
use crate::lindblad::{anticomm_block, KuboMoriKernel, LindbladBasis, NonCommutativeProduct};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    #[serde(rename = "anticomm")]
    AntiCommutator,
    #[serde(rename = "log")]
    Logarithmic,
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MetricKind::AntiCommutator => "anticomm",
            MetricKind::Logarithmic => "log",
        })
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "anticomm" | "anticommutator" => Ok(MetricKind::AntiCommutator),
            "log" | "logarithmic" => Ok(MetricKind::Logarithmic),
            other => Err(Error::InvalidArgument(format!("unknown metric kind '{other}'"))),
        }
    }
}

impl NonCommutativeProduct for MetricKind {
    fn apply(&self, rho: &DensityMatrix, v: &BlockField) -> Result<BlockField> {
        let m = Multiplier::new(rho.hermitian(), *self)?;
        Ok(BlockField::from_raw(
            v.kind(),
            v.blocks().iter().map(|b| m.apply(b)).collect(),
        ))
    }
}

/// `M_ρ` prepared for repeated application at a fixed `ρ`.
#[derive(Debug, Clone)]
pub(crate) enum Multiplier {
    AntiCommutator(ComplexMatrix),
    KuboMori(KuboMoriKernel),
}

impl Multiplier {
    pub(crate) fn new(rho: &HermitianMatrix, kind: MetricKind) -> Result<Self> {
        match kind {
            MetricKind::AntiCommutator => {
                let min = rho.min_eigenvalue()?;
                if min <= EPS_PD {
                    return Err(Error::NotPositiveDefinite(min));
                }
                Ok(Multiplier::AntiCommutator(rho.as_matrix().clone()))
            }
            MetricKind::Logarithmic => Ok(Multiplier::KuboMori(KuboMoriKernel::new(rho)?)),
        }
    }

    pub(crate) fn apply(&self, b: &ComplexMatrix) -> ComplexMatrix {
        match self {
            Multiplier::AntiCommutator(r) => anticomm_block(r, b),
            Multiplier::KuboMori(k) => k.apply_block(b),
        }
    }
}

/// Traceless representative of the potential `λ` (defined up to `αI`).
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    lambda: HermitianMatrix,
}

impl Potential {
    pub fn lambda(&self) -> &HermitianMatrix {
        &self.lambda
    }

    pub fn into_hermitian(self) -> HermitianMatrix {
        self.lambda
    }
}

/// The metric at a fixed `(basis, ρ, kind)`: stiffness matrix and its Cholesky factor.
#[derive(Debug, Clone)]
pub struct MetricOperator<'a> {
    basis: &'a LindbladBasis,
    kind: MetricKind,
    multiplier: Multiplier,
    stiffness: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl<'a> MetricOperator<'a> {
    pub fn new(basis: &'a LindbladBasis, rho: &DensityMatrix, kind: MetricKind) -> Result<Self> {
        Self::at(basis, rho.hermitian(), kind)
    }

    /// Same as [`MetricOperator::new`] for a positive-definite matrix of any trace.
    pub(crate) fn at(basis: &'a LindbladBasis, rho: &HermitianMatrix, kind: MetricKind) -> Result<Self> {
        if rho.dim() != basis.dim() {
            return Err(Error::DimensionMismatch {
                expected: basis.dim(),
                got: rho.dim(),
            });
        }
        let multiplier = Multiplier::new(rho, kind)?;
        let grads = basis.frame_gradients();
        let d = grads.len();
        let weighted: Vec<Vec<ComplexMatrix>> = grads
            .iter()
            .map(|g| g.iter().map(|b| multiplier.apply(b)).collect())
            .collect();
        let mut k = DMatrix::zeros(d, d);
        for a in 0..d {
            for b in a..d {
                let v: f64 = grads[a]
                    .iter()
                    .zip(&weighted[b])
                    .map(|(x, y)| real_inner(x, y))
                    .sum();
                k[(a, b)] = v;
                k[(b, a)] = v;
            }
        }
        let chol = Cholesky::new(k.clone()).ok_or_else(|| {
            Error::SingularSystem("stiffness matrix is not positive definite".into())
        })?;
        Ok(Self {
            basis,
            kind,
            multiplier,
            stiffness: k,
            chol,
        })
    }

    pub fn kind(&self) -> MetricKind {
        self.kind
    }

    /// `K_ab = ⟨∇E_a, M_ρ ∇E_b⟩`; symmetric positive definite.
    pub fn stiffness(&self) -> &DMatrix<f64> {
        &self.stiffness
    }

    /// Matrix of `A_ρ` in traceless frame coordinates, `−K`.
    pub fn operator_matrix(&self) -> DMatrix<f64> {
        -&self.stiffness
    }

    fn coords(&self, x: &ComplexMatrix) -> DVector<f64> {
        self.basis.frame().traceless_coords(x)
    }

    /// `A_ρ(λ) = −∇_L* M_ρ(∇_L λ)`.
    pub fn apply(&self, lambda: &HermitianMatrix) -> HermitianMatrix {
        let g = self.basis.grad_raw(lambda.as_matrix());
        let m: Vec<ComplexMatrix> = g.iter().map(|b| self.multiplier.apply(b)).collect();
        HermitianMatrix::from_raw(-self.basis.div_raw(&m))
    }

    /// `λ = −K⁻¹ δ`, in coordinates.
    pub(crate) fn solve_coords(&self, delta: &DVector<f64>) -> DVector<f64> {
        -self.chol.solve(delta)
    }

    pub fn solve(&self, delta: &TangentVector) -> Result<Potential> {
        self.check(delta)?;
        self.solve_matrix(delta.as_matrix())
    }

    /// Poisson solve for an arbitrary Hermitian right-hand side; its trace part is dropped.
    pub(crate) fn solve_matrix(&self, delta: &ComplexMatrix) -> Result<Potential> {
        let x = self.solve_coords(&self.coords(delta));
        Ok(Potential {
            lambda: HermitianMatrix::from_raw(self.basis.frame().from_traceless_coords(x.as_slice())),
        })
    }

    /// `δ₁ᵀ K⁻¹ δ₂`.
    pub fn inner(&self, d1: &TangentVector, d2: &TangentVector) -> Result<f64> {
        self.check(d1)?;
        self.check(d2)?;
        Ok(self.inner_matrix(d1.as_matrix(), d2.as_matrix()))
    }

    pub(crate) fn inner_matrix(&self, d1: &ComplexMatrix, d2: &ComplexMatrix) -> f64 {
        let x1 = self.coords(d1);
        let x2 = self.coords(d2);
        x1.dot(&self.chol.solve(&x2))
    }

    /// `v = −∇_L λ`.
    pub fn velocity(&self, delta: &TangentVector) -> Result<BlockField> {
        let p = self.solve(delta)?;
        let g = self.basis.grad_raw(p.lambda.as_matrix());
        Ok(BlockField::from_raw(
            BlockKind::SkewHermitian,
            g.into_iter().map(|b| -b).collect(),
        ))
    }

    /// `⟨v, M_ρ v⟩`.
    pub fn action(&self, v: &BlockField) -> f64 {
        v.blocks()
            .iter()
            .map(|b| real_inner(b, &self.multiplier.apply(b)))
            .sum()
    }

    /// `∇_L* M_ρ(v)`: the density rate produced by velocity `v`.
    pub fn continuity(&self, v: &BlockField) -> HermitianMatrix {
        let m: Vec<ComplexMatrix> = v.blocks().iter().map(|b| self.multiplier.apply(b)).collect();
        HermitianMatrix::from_raw(self.basis.div_raw(&m))
    }

    pub(crate) fn multiplier(&self) -> &Multiplier {
        &self.multiplier
    }

    fn check(&self, delta: &TangentVector) -> Result<()> {
        if delta.dim() != self.basis.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.basis.dim(),
                got: delta.dim(),
            });
        }
        Ok(())
    }
}

/// Solves `A_ρ(λ) = δ` for the traceless potential.
pub fn poisson_solve(
    basis: &LindbladBasis,
    rho: &DensityMatrix,
    delta: &TangentVector,
    kind: MetricKind,
) -> Result<Potential> {
    MetricOperator::new(basis, rho, kind)?.solve(delta)
}

/// `⟨δ₁, δ₂⟩_ρ = ⟨∇_L λ₁, M_ρ ∇_L λ₂⟩`.
pub fn inner_product(
    basis: &LindbladBasis,
    rho: &DensityMatrix,
    d1: &TangentVector,
    d2: &TangentVector,
    kind: MetricKind,
) -> Result<f64> {
    MetricOperator::new(basis, rho, kind)?.inner(d1, d2)
}

/// The minimal-action velocity `v = −∇_L λ` realizing `δ = ∇_L* M_ρ(v)`.
pub fn min_norm_velocity(
    basis: &LindbladBasis,
    rho: &DensityMatrix,
    delta: &TangentVector,
    kind: MetricKind,
) -> Result<BlockField> {
    MetricOperator::new(basis, rho, kind)?.velocity(delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::herm::{c, eigh, frobenius, pauli, project_traceless_hermitian};
    use crate::lindblad::{grad_l, laplacian_l};
    use crate::random;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const KINDS: [MetricKind; 2] = [MetricKind::AntiCommutator, MetricKind::Logarithmic];

    fn basis_xz() -> LindbladBasis {
        LindbladBasis::new(vec![pauli::x(), pauli::z()]).unwrap()
    }

    fn tangent(h: HermitianMatrix) -> TangentVector {
        TangentVector::new(h).unwrap()
    }

    #[test]
    fn poisson_example() {
        let b = basis_xz();
        let rho = DensityMatrix::maximally_mixed(2);
        let delta = tangent(pauli::y());
        for kind in KINDS {
            let p = poisson_solve(&b, &rho, &delta, kind).unwrap();
            let want = pauli::y().as_matrix() * c(-0.25, 0.0);
            assert!(frobenius(&(p.lambda().as_matrix() - want)) < 1e-14);
        }
        let zero = TangentVector::zeros(2);
        let p = poisson_solve(&b, &rho, &zero, MetricKind::AntiCommutator).unwrap();
        assert_eq!(p.lambda().norm(), 0.0);
    }

    #[test]
    fn poisson_residual_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        for n in [2, 3, 4] {
            let b = LindbladBasis::gell_mann(n).unwrap();
            for kind in KINDS {
                let rho = random::density(n, &mut rng);
                let delta = random::traceless_hermitian(n, &mut rng);
                let op = MetricOperator::new(&b, &rho, kind).unwrap();
                let p = op.solve(&delta).unwrap();
                assert!(p.lambda().trace().abs() < 1e-13);
                let back = op.apply(p.lambda());
                let res = frobenius(&(back.as_matrix() - delta.as_matrix()));
                assert!(res <= 1e-10 * delta.as_matrix().norm(), "res={res}");
            }
        }
    }

    #[test]
    fn inner_product_examples() {
        let b = basis_xz();
        let rho = DensityMatrix::maximally_mixed(2);
        let d = tangent(pauli::y());
        let v = inner_product(&b, &rho, &d, &d, MetricKind::AntiCommutator).unwrap();
        assert!((v - 0.5).abs() < 1e-14);
        let zero = TangentVector::zeros(2);
        assert_eq!(inner_product(&b, &rho, &zero, &d, MetricKind::AntiCommutator).unwrap(), 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for kind in KINDS {
            let b = LindbladBasis::gell_mann(3).unwrap();
            let rho = random::density(3, &mut rng);
            let d1 = random::traceless_hermitian(3, &mut rng);
            let d2 = random::traceless_hermitian(3, &mut rng);
            let op = MetricOperator::new(&b, &rho, kind).unwrap();
            let s = op.inner(&d1, &d1).unwrap();
            let lam = op.solve(&d1).unwrap();
            let ibp = -real_inner(lam.lambda().as_matrix(), d1.as_matrix());
            assert!((s - ibp).abs() < 1e-12 * s.abs());
            // Brute force from the definition.
            let g1 = grad_l(&b, op.solve(&d1).unwrap().lambda()).unwrap();
            let g2 = grad_l(&b, op.solve(&d2).unwrap().lambda()).unwrap();
            let m2 = kind.apply(&rho, &g2).unwrap();
            let brute = g1.inner(&m2).unwrap();
            assert!((op.inner(&d1, &d2).unwrap() - brute).abs() < 1e-11);
            assert!((op.inner(&d1, &d2).unwrap() - op.inner(&d2, &d1).unwrap()).abs() < 1e-12);
            if kind == MetricKind::AntiCommutator {
                let tr: f64 = g1
                    .blocks()
                    .iter()
                    .map(|g| (rho.as_matrix() * g.adjoint() * g).trace().re)
                    .sum();
                assert!((tr - s).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn velocity_example_and_continuity() {
        let b = basis_xz();
        let rho = DensityMatrix::maximally_mixed(2);
        let v = min_norm_velocity(&b, &rho, &tangent(pauli::y()), MetricKind::AntiCommutator).unwrap();
        let iz = pauli::z().as_matrix() * c(0.0, 0.5);
        let ix = pauli::x().as_matrix() * c(0.0, -0.5);
        assert!(frobenius(&(&v.blocks()[0] - iz)) < 1e-14);
        assert!(frobenius(&(&v.blocks()[1] - ix)) < 1e-14);
        let op = MetricOperator::new(&b, &rho, MetricKind::AntiCommutator).unwrap();
        assert!((op.action(&v) - 0.5).abs() < 1e-14);
        let z = op.velocity(&TangentVector::zeros(2)).unwrap();
        assert_eq!(z.norm(), 0.0);
    }

    #[test]
    fn velocity_minimizes_action() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        for kind in KINDS {
            let b = LindbladBasis::gell_mann(3).unwrap();
            let rho = random::density(3, &mut rng);
            let delta = random::traceless_hermitian(3, &mut rng);
            let op = MetricOperator::new(&b, &rho, kind).unwrap();
            let v = op.velocity(&delta).unwrap();
            let back = op.continuity(&v);
            assert!(frobenius(&(back.as_matrix() - delta.as_matrix())) < 1e-10 * delta.as_matrix().norm());
            let a = op.action(&v);
            assert!((a - op.inner(&delta, &delta).unwrap()).abs() < 1e-11 * a);
            for _ in 0..100 {
                let w = random::block_field(BlockKind::SkewHermitian, b.len(), 3, &mut rng);
                let w = BlockField::from_raw(
                    BlockKind::SkewHermitian,
                    w.blocks().iter().map(|x| (x - x.adjoint()) * c(0.5, 0.0)).collect(),
                );
                let cw = project_traceless_hermitian(op.continuity(&w).as_matrix());
                let correction = op.velocity(&cw).unwrap();
                let feasible = v.add(&w.sub(&correction).unwrap()).unwrap();
                let res = frobenius(&(op.continuity(&feasible).as_matrix() - delta.as_matrix()));
                assert!(res < 1e-9);
                assert!(op.action(&feasible) >= a - 1e-12);
            }
        }
    }

    #[test]
    fn stiffness_is_spd() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [2, 3, 4] {
            let b = LindbladBasis::gell_mann(n).unwrap();
            for kind in KINDS {
                let rho = random::density(n, &mut rng);
                let op = MetricOperator::new(&b, &rho, kind).unwrap();
                let k = op.stiffness();
                let asym = (k - k.transpose()).abs().max();
                assert!(asym <= 1e-12);
                let min = k.clone().symmetric_eigen().eigenvalues.min();
                assert!(min > 0.0);
                let a = op.operator_matrix();
                // The coordinate matrix represents A_ρ.
                let x = random::traceless_hermitian(n, &mut rng);
                let xc = b.frame().traceless_coords(x.as_matrix());
                let ax = b.frame().traceless_coords(op.apply(&HermitianMatrix::from_raw(x.as_matrix().clone())).as_matrix());
                assert!((a * xc - ax).norm() < 1e-11);
            }
        }
    }

    #[test]
    fn gauge_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(70);
        let b = LindbladBasis::gell_mann(3).unwrap();
        let lam = random::hermitian(3, &mut rng);
        let shifted = &lam + &HermitianMatrix::scaled_identity(3, 2.5);
        let g1 = grad_l(&b, &lam).unwrap();
        let g2 = grad_l(&b, &shifted).unwrap();
        assert!(g1.sub(&g2).unwrap().norm() < 1e-13);
    }

    #[test]
    fn kinds_agree_at_maximally_mixed() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for n in [2, 3, 4] {
            let b = LindbladBasis::gell_mann(n).unwrap();
            let rho = DensityMatrix::maximally_mixed(n);
            let d = random::traceless_hermitian(n, &mut rng);
            let a = inner_product(&b, &rho, &d, &d, MetricKind::AntiCommutator).unwrap();
            let l = inner_product(&b, &rho, &d, &d, MetricKind::Logarithmic).unwrap();
            assert!((a - l).abs() <= 1e-12 * a, "n={n} a={a} l={l}");
        }
    }

    /// Lyapunov route: `h = Δ_L⁻¹δ`, `ρG_k + G_kρ = 2(∇_L h)_k` solved entry-wise in the
    /// eigenbasis of `ρ`.
    fn lyapunov_route(b: &LindbladBasis, rho: &DensityMatrix, delta: &TangentVector) -> Vec<ComplexMatrix> {
        let n = b.dim();
        let frame = b.frame();
        let d = n * n - 1;
        let mut lap = DMatrix::zeros(d, d);
        for (j, e) in frame.traceless().iter().enumerate() {
            let col = frame.traceless_coords(laplacian_l(b, &HermitianMatrix::from_raw(e.clone())).unwrap().as_matrix());
            lap.set_column(j, &col);
        }
        let h = lap.lu().solve(&frame.traceless_coords(delta.as_matrix())).unwrap();
        let h = HermitianMatrix::from_raw(frame.from_traceless_coords(h.as_slice()));
        let e = eigh(rho.hermitian()).unwrap();
        let p = &e.eigenvalues;
        grad_l(b, &h)
            .unwrap()
            .blocks()
            .iter()
            .map(|g| {
                let mut t = e.to_eigenbasis(&(g * c(2.0, 0.0)));
                for i in 0..n {
                    for j in 0..n {
                        t[(i, j)] /= p[i] + p[j];
                    }
                }
                e.from_eigenbasis(&t)
            })
            .collect()
    }

    #[test]
    fn lyapunov_cross_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(100);
        let b = LindbladBasis::gell_mann(3).unwrap();
        let anti = MetricKind::AntiCommutator;

        let rho = random::density(3, &mut rng);
        let delta = random::traceless_hermitian(3, &mut rng);
        let g = lyapunov_route(&b, &rho, &delta);
        let m: Vec<ComplexMatrix> = g.iter().map(|x| anticomm_block(rho.as_matrix(), x)).collect();
        let rebuilt = b.div_raw(&m) * c(-1.0, 0.0);
        assert!(frobenius(&(rebuilt - delta.as_matrix())) < 1e-10 * delta.as_matrix().norm());

        // At ρ = I/n the Lyapunov solution is the gradient of the potential.
        let mixed = DensityMatrix::maximally_mixed(3);
        let g = lyapunov_route(&b, &mixed, &delta);
        let lam = poisson_solve(&b, &mixed, &delta, anti).unwrap();
        let grad = grad_l(&b, lam.lambda()).unwrap();
        let diff: f64 = g.iter().zip(grad.blocks()).map(|(x, y)| frobenius(&(x - y)).powi(2)).sum();
        assert!(diff.sqrt() < 1e-10);
    }

    #[test]
    fn errors() {
        let b = LindbladBasis::pauli();
        let rho = DensityMatrix::maximally_mixed(3);
        let d = TangentVector::zeros(3);
        assert!(matches!(
            poisson_solve(&b, &rho, &d, MetricKind::AntiCommutator),
            Err(Error::DimensionMismatch { .. })
        ));
        assert_eq!("log".parse::<MetricKind>().unwrap(), MetricKind::Logarithmic);
        assert!("foo".parse::<MetricKind>().is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn inner_product_symmetric_positive(seed in any::<u64>(), n in 2usize..4, log in any::<bool>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let kind = if log { MetricKind::Logarithmic } else { MetricKind::AntiCommutator };
            let b = LindbladBasis::gell_mann(n).unwrap();
            let rho = random::density(n, &mut rng);
            let d1 = random::traceless_hermitian(n, &mut rng);
            let d2 = random::traceless_hermitian(n, &mut rng);
            let op = MetricOperator::new(&b, &rho, kind).unwrap();
            let a = op.inner(&d1, &d2).unwrap();
            let bb = op.inner(&d2, &d1).unwrap();
            prop_assert!((a - bb).abs() <= 1e-12 * (1.0 + a.abs()));
            prop_assert!(op.inner(&d1, &d1).unwrap() > 0.0);
        }
    }
}
