//! Matrix-valued densities on a one-dimensional grid.
//!
//! A density field `ρ(x)` moves by a spatial velocity `w` and a Lindblad velocity `v`:
//!
//! `∂ρ/∂t + div_x M_ρ(w) − ∇_L* M_ρ(v) = 0`,
//!
//! with action `h Σ_x [⟨w, M_ρ w⟩ + γ ⟨v, M_ρ v⟩]`. The optimal velocities are
//! `w = −grad_x λ` and `v = −∇_L λ / γ`, with `λ` solving
//! `δ = div_x M_ρ(grad_x λ) − γ⁻¹ ∇_L* M_ρ(∇_L λ)`.

use std::time::Instant;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::entropy::{entropy_gradient_raw, integrate, log_checked, FlowOptions, RawTrace};
use crate::error::{Error, Result};
use crate::frame::HermitianFrame;
use crate::geodesic::{hamiltonian_gradient, Backend, ConicOptions, DirectOptions, OptimalityReport};
use crate::grid::Grid;
use crate::herm::{
    c, eigh_matrix, hermitian_part, real_inner, BlockField, BlockKind, ComplexMatrix,
    HermitianMatrix, EPS_PD, TAU_TRACE,
};
use crate::lindblad::{laplacian_superoperator, LindbladBasis};
use crate::metric::{MetricKind, Multiplier};
use crate::optim::{bfgs, BfgsOptions};
use crate::transport::{solve_conic, ConicSetup};

/// Hermitian matrices at the points of a grid, with quadrature weight `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixField {
    grid: Grid,
    values: Vec<HermitianMatrix>,
}

impl MatrixField {
    pub fn new(grid: Grid, values: Vec<HermitianMatrix>) -> Result<Self> {
        if values.len() != grid.points() {
            return Err(Error::DimensionMismatch {
                expected: grid.points(),
                got: values.len(),
            });
        }
        let n = values[0].dim();
        if let Some(bad) = values.iter().find(|v| v.dim() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: bad.dim(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Grid, value: HermitianMatrix) -> Self {
        let values = vec![value; grid.points()];
        Self { grid, values }
    }

    pub(crate) fn from_raw(grid: &Grid, values: Vec<ComplexMatrix>) -> Self {
        Self {
            grid: grid.clone(),
            values: values.into_iter().map(HermitianMatrix::from_raw).collect(),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[HermitianMatrix] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values[0].dim()
    }

    pub(crate) fn raw(&self) -> Vec<ComplexMatrix> {
        self.values.iter().map(|v| v.as_matrix().clone()).collect()
    }

    /// `h Σ_x tr ρ(x)`.
    pub fn mass(&self) -> f64 {
        self.grid.spacing() * self.values.iter().map(|v| v.trace()).sum::<f64>()
    }

    /// `sqrt(h Σ_x ‖ρ(x)‖_F²)`.
    pub fn norm(&self) -> f64 {
        (self.grid.spacing() * self.values.iter().map(|v| v.norm().powi(2)).sum::<f64>()).sqrt()
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        self.values
            .iter()
            .try_fold(f64::INFINITY, |m, v| Ok(m.min(v.min_eigenvalue()?)))
    }

    /// Checks the density-field invariants: positive definite everywhere, unit mass.
    pub fn validate_density(&self) -> Result<()> {
        let min = self.min_eigenvalue()?;
        if min <= EPS_PD {
            return Err(Error::NotPositiveDefinite(min));
        }
        let m = self.mass();
        if (m - 1.0).abs() > TAU_TRACE {
            return Err(Error::InvalidTrace { expected: 1.0, got: m });
        }
        Ok(())
    }

    /// `−h Σ_x tr(ρ log ρ)`.
    pub fn entropy(&self) -> Result<f64> {
        let mut s = 0.0;
        for v in &self.values {
            let e = eigh_matrix(v.as_matrix())?;
            if e.eigenvalues[0] <= EPS_PD {
                return Err(Error::NotPositiveDefinite(e.eigenvalues[0]));
            }
            s -= e.eigenvalues.iter().map(|p| p * p.ln()).sum::<f64>();
        }
        Ok(self.grid.spacing() * s)
    }

    pub fn sub(&self, other: &MatrixField) -> Result<MatrixField> {
        self.check_same(other)?;
        Ok(Self {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        })
    }

    fn check_same(&self, other: &MatrixField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::DimensionMismatch {
                expected: self.grid.points(),
                got: other.grid.points(),
            });
        }
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(())
    }
}

/// Spatial velocity `w(x)` (Hermitian) and Lindblad velocity `v(x)` (skew-Hermitian blocks).
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialVelocity {
    pub w: Vec<HermitianMatrix>,
    pub v: Vec<BlockField>,
}

impl SpatialVelocity {
    pub fn zeros(points: usize, channels: usize, n: usize) -> Self {
        Self {
            w: vec![HermitianMatrix::zeros(n); points],
            v: vec![BlockField::zeros(BlockKind::SkewHermitian, channels, n); points],
        }
    }
}

pub fn grad_x(field: &MatrixField) -> MatrixField {
    MatrixField::from_raw(&field.grid, field.grid.grad_raw(&field.raw()))
}

/// Grid divergence; the negative transpose of [`grad_x`].
pub fn div_x(field: &MatrixField) -> MatrixField {
    MatrixField::from_raw(&field.grid, field.grid.div_raw(&field.raw()))
}

fn check_velocity(basis: &LindbladBasis, field: &MatrixField, vel: &SpatialVelocity) -> Result<()> {
    let g = field.grid.points();
    if vel.w.len() != g || vel.v.len() != g {
        return Err(Error::DimensionMismatch {
            expected: g,
            got: vel.w.len().min(vel.v.len()),
        });
    }
    if field.dim() != basis.dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            got: field.dim(),
        });
    }
    for v in &vel.v {
        if v.len() != basis.len() {
            return Err(Error::DimensionMismatch {
                expected: basis.len(),
                got: v.len(),
            });
        }
    }
    Ok(())
}

/// `∇_L* M_ρ(v) − div_x M_ρ(w)`, the density rate produced by the velocities.
fn transport_rate(
    basis: &LindbladBasis,
    rho: &[ComplexMatrix],
    grid: &Grid,
    vel: &SpatialVelocity,
    kind: MetricKind,
) -> Result<Vec<ComplexMatrix>> {
    let mut spatial = Vec::with_capacity(rho.len());
    let mut rate = Vec::with_capacity(rho.len());
    for (x, r) in rho.iter().enumerate() {
        let m = Multiplier::new(&HermitianMatrix::from_raw(r.clone()), kind)?;
        spatial.push(m.apply(vel.w[x].as_matrix()));
        let blocks: Vec<ComplexMatrix> = vel.v[x].blocks().iter().map(|b| m.apply(b)).collect();
        rate.push(basis.div_raw(&blocks));
    }
    for (r, d) in rate.iter_mut().zip(grid.div_raw(&spatial)) {
        *r -= d;
    }
    Ok(rate)
}

/// Explicit continuity update `ρ + dt (∇_L* M_ρ(v) − div_x M_ρ(w))`.
///
/// Mass is conserved exactly for any velocities.
pub fn continuity_update(
    basis: &LindbladBasis,
    field: &MatrixField,
    vel: &SpatialVelocity,
    kind: MetricKind,
    dt: f64,
) -> Result<MatrixField> {
    check_velocity(basis, field, vel)?;
    let raw = field.raw();
    let rate = transport_rate(basis, &raw, &field.grid, vel, kind)?;
    Ok(MatrixField::from_raw(
        &field.grid,
        raw.iter().zip(rate).map(|(r, d)| hermitian_part(&(r + d * c(dt, 0.0)))).collect(),
    ))
}

/// Residual `(ρ_{j+1} − ρ_j)/dt + div_x M_ρ̄(w_j) − ∇_L* M_ρ̄(v_j)` of each step, with the
/// products taken at the midpoint `ρ̄_j`.
pub fn continuity_residual(
    basis: &LindbladBasis,
    path: &[MatrixField],
    velocities: &[SpatialVelocity],
    kind: MetricKind,
    dt: f64,
) -> Result<Vec<MatrixField>> {
    if path.len() != velocities.len() + 1 {
        return Err(Error::DimensionMismatch {
            expected: path.len().saturating_sub(1),
            got: velocities.len(),
        });
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    let mut out = Vec::with_capacity(velocities.len());
    for (j, vel) in velocities.iter().enumerate() {
        let (a, b) = (&path[j], &path[j + 1]);
        a.check_same(b)?;
        check_velocity(basis, a, vel)?;
        let mid: Vec<ComplexMatrix> = a
            .values
            .iter()
            .zip(&b.values)
            .map(|(p, q)| (p.as_matrix() + q.as_matrix()) * c(0.5, 0.0))
            .collect();
        let rate = transport_rate(basis, &mid, &a.grid, vel, kind)?;
        let res = a
            .values
            .iter()
            .zip(&b.values)
            .zip(rate)
            .map(|((p, q), r)| (q.as_matrix() - p.as_matrix()) * c(1.0 / dt, 0.0) - r)
            .collect();
        out.push(MatrixField::from_raw(&a.grid, res));
    }
    Ok(out)
}

/// The field metric at a density field: stiffness over all `G·n²` real coordinates.
///
/// `K = Σ_x ⟨grad_x E, M grad_x E⟩ + γ⁻¹ ⟨∇_L E, M ∇_L E⟩` (plain sums). Its kernel is the
/// spatially constant multiple of the identity, removed by a rank-one shift.
pub struct FieldMetric<'a> {
    basis: &'a LindbladBasis,
    grid: Grid,
    gamma: f64,
    frame: HermitianFrame,
    multipliers: Vec<Multiplier>,
    stiffness: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl<'a> FieldMetric<'a> {
    pub fn new(basis: &'a LindbladBasis, rho: &MatrixField, gamma: f64, kind: MetricKind) -> Result<Self> {
        if rho.dim() != basis.dim() {
            return Err(Error::DimensionMismatch {
                expected: basis.dim(),
                got: rho.dim(),
            });
        }
        Self::at(basis, &rho.grid, &rho.raw(), gamma, kind)
    }

    pub(crate) fn at(
        basis: &'a LindbladBasis,
        grid: &Grid,
        rho: &[ComplexMatrix],
        gamma: f64,
        kind: MetricKind,
    ) -> Result<Self> {
        if !(gamma > 0.0) {
            return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")));
        }
        let n = basis.dim();
        let g = grid.points();
        let d = n * n;
        let frame = HermitianFrame::new(n);
        let multipliers = rho
            .iter()
            .map(|r| Multiplier::new(&HermitianMatrix::from_raw(r.clone()), kind))
            .collect::<Result<Vec<_>>>()?;
        let grads: Vec<Vec<ComplexMatrix>> = frame.elements().iter().map(|e| basis.grad_raw(e)).collect();
        let gm = grid.gradient_matrix();
        let mut k = DMatrix::zeros(g * d, g * d);
        for (z, m) in multipliers.iter().enumerate() {
            // pointwise Gram matrices at z
            let weighted: Vec<ComplexMatrix> = frame.elements().iter().map(|e| m.apply(e)).collect();
            let weighted_l: Vec<Vec<ComplexMatrix>> =
                grads.iter().map(|gb| gb.iter().map(|b| m.apply(b)).collect()).collect();
            let mut p = DMatrix::zeros(d, d);
            let mut q = DMatrix::zeros(d, d);
            for a in 0..d {
                for b in 0..d {
                    p[(a, b)] = real_inner(&frame.elements()[a], &weighted[b]);
                    q[(a, b)] = grads[a].iter().zip(&weighted_l[b]).map(|(x, y)| real_inner(x, y)).sum();
                }
            }
            let mut block = k.view_mut((z * d, z * d), (d, d));
            block += q / gamma;
            let cols: Vec<usize> = (0..g).filter(|&x| gm[(z, x)] != 0.0).collect();
            for &x in &cols {
                for &y in &cols {
                    let s = gm[(z, x)] * gm[(z, y)];
                    let mut blk = k.view_mut((x * d, y * d), (d, d));
                    blk += &p * s;
                }
            }
        }
        let k = (&k + k.transpose()) * 0.5;
        let mut shifted = k.clone();
        let kappa = k.diagonal().amax().max(1e-300);
        let w = kappa / g as f64;
        for x in 0..g {
            for y in 0..g {
                shifted[(x * d, y * d)] += w;
            }
        }
        let chol = Cholesky::new(shifted).ok_or_else(|| {
            Error::SingularSystem("field stiffness has a kernel beyond the constant identity".into())
        })?;
        Ok(Self {
            basis,
            grid: grid.clone(),
            gamma,
            frame,
            multipliers,
            stiffness: k,
            chol,
        })
    }

    pub fn stiffness(&self) -> &DMatrix<f64> {
        &self.stiffness
    }

    fn coords(&self, f: &[ComplexMatrix]) -> DVector<f64> {
        let d = self.frame.elements().len();
        let mut v = DVector::zeros(f.len() * d);
        for (x, m) in f.iter().enumerate() {
            v.rows_mut(x * d, d).copy_from(&self.frame.coords(m));
        }
        v
    }

    fn from_coords(&self, v: &DVector<f64>) -> Vec<ComplexMatrix> {
        let d = self.frame.elements().len();
        (0..self.grid.points())
            .map(|x| self.frame.from_coords(v.rows(x * d, d).as_slice()))
            .collect()
    }

    fn mean_free(&self, v: &mut DVector<f64>) {
        let d = self.frame.elements().len();
        let g = self.grid.points();
        let mean = (0..g).map(|x| v[x * d]).sum::<f64>() / g as f64;
        for x in 0..g {
            v[x * d] -= mean;
        }
    }

    /// `λ = −K⁺ δ`, normalized so that its constant-identity component vanishes.
    pub(crate) fn solve_raw(&self, delta: &[ComplexMatrix]) -> Vec<ComplexMatrix> {
        let mut rhs = self.coords(delta);
        self.mean_free(&mut rhs);
        let mut lam = -self.chol.solve(&rhs);
        self.mean_free(&mut lam);
        self.from_coords(&lam)
    }

    /// Potential for a mass-free rate field.
    pub fn solve(&self, delta: &MatrixField) -> Result<MatrixField> {
        self.check(delta)?;
        Ok(MatrixField::from_raw(&self.grid, self.solve_raw(&delta.raw())))
    }

    /// `div_x M(grad_x λ) − γ⁻¹ ∇_L* M(∇_L λ)`.
    pub(crate) fn apply_raw(&self, lambda: &[ComplexMatrix]) -> Vec<ComplexMatrix> {
        let gx = self.grid.grad_raw(lambda);
        let weighted: Vec<ComplexMatrix> = gx.iter().zip(&self.multipliers).map(|(g, m)| m.apply(g)).collect();
        let mut out = self.grid.div_raw(&weighted);
        for ((o, l), m) in out.iter_mut().zip(lambda).zip(&self.multipliers) {
            let blocks: Vec<ComplexMatrix> = self.basis.grad_raw(l).iter().map(|b| m.apply(b)).collect();
            *o -= self.basis.div_raw(&blocks) * c(1.0 / self.gamma, 0.0);
        }
        out
    }

    pub fn apply(&self, lambda: &MatrixField) -> Result<MatrixField> {
        self.check(lambda)?;
        Ok(MatrixField::from_raw(&self.grid, self.apply_raw(&lambda.raw())))
    }

    /// `h δ₁ᵀ K⁺ δ₂`.
    pub(crate) fn inner_raw(&self, d1: &[ComplexMatrix], d2: &[ComplexMatrix]) -> f64 {
        let mut x1 = self.coords(d1);
        let mut x2 = self.coords(d2);
        self.mean_free(&mut x1);
        self.mean_free(&mut x2);
        self.grid.spacing() * x1.dot(&self.chol.solve(&x2))
    }

    pub fn inner(&self, d1: &MatrixField, d2: &MatrixField) -> Result<f64> {
        self.check(d1)?;
        self.check(d2)?;
        Ok(self.inner_raw(&d1.raw(), &d2.raw()))
    }

    /// Optimal velocities `w = −grad_x λ`, `v = −∇_L λ / γ` for the rate `δ`.
    pub fn velocity(&self, delta: &MatrixField) -> Result<SpatialVelocity> {
        let lam = self.solve(delta)?.raw();
        Ok(self.velocity_of(&lam))
    }

    fn velocity_of(&self, lam: &[ComplexMatrix]) -> SpatialVelocity {
        let w = self
            .grid
            .grad_raw(lam)
            .into_iter()
            .map(|g| HermitianMatrix::from_raw(-g))
            .collect();
        let v = lam
            .iter()
            .map(|l| {
                BlockField::from_raw(
                    BlockKind::SkewHermitian,
                    self.basis.grad_raw(l).into_iter().map(|b| b * c(-1.0 / self.gamma, 0.0)).collect(),
                )
            })
            .collect();
        SpatialVelocity { w, v }
    }

    /// `(h Σ⟨w, M w⟩, h Σ⟨v, M v⟩)`; the action is the first plus `γ` times the second.
    pub fn action_split(&self, vel: &SpatialVelocity) -> (f64, f64) {
        let h = self.grid.spacing();
        let mut sp = 0.0;
        let mut li = 0.0;
        for (x, m) in self.multipliers.iter().enumerate() {
            let w = vel.w[x].as_matrix();
            sp += real_inner(w, &m.apply(w));
            li += vel.v[x].blocks().iter().map(|b| real_inner(b, &m.apply(b))).sum::<f64>();
        }
        (h * sp, h * li)
    }

    fn check(&self, f: &MatrixField) -> Result<()> {
        if f.grid != self.grid || f.dim() != self.basis.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.grid.points(),
                got: f.grid.points(),
            });
        }
        Ok(())
    }
}

/// Node fields of a discrete spatial path on `t_j = j/T`.
#[derive(Debug, Clone)]
pub struct SpatialPath {
    densities: Vec<MatrixField>,
    kind: MetricKind,
    gamma: f64,
}

impl SpatialPath {
    pub fn densities(&self) -> &[MatrixField] {
        &self.densities
    }

    pub fn steps(&self) -> usize {
        self.densities.len() - 1
    }

    pub fn kind(&self) -> MetricKind {
        self.kind
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Poisson-optimal velocities of each step, at the midpoints.
    pub fn velocities(&self, basis: &LindbladBasis) -> Result<Vec<SpatialVelocity>> {
        let t = self.steps() as f64;
        self.densities
            .windows(2)
            .map(|w| {
                let (op, delta) = step_metric(basis, &w[0].raw(), &w[1].raw(), &w[0].grid, self.gamma, self.kind)?;
                let rate: Vec<ComplexMatrix> = delta.iter().map(|d| d * c(t, 0.0)).collect();
                Ok(op.velocity_of(&op.solve_raw(&rate)))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialReport {
    pub backend: Backend,
    pub kind: MetricKind,
    pub steps: usize,
    pub grid_points: usize,
    pub gamma: f64,
    pub distance: f64,
    /// Discrete energy of the returned path; `distance = sqrt(action)`.
    pub action: f64,
    /// `∫ h Σ⟨w, M w⟩ dt` of the Poisson-optimal velocities.
    pub spatial_action: f64,
    /// `∫ h Σ⟨v, M v⟩ dt` (without the factor `γ`).
    pub lindblad_action: f64,
    pub iterations: usize,
    pub converged: bool,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub conic_objective: Option<f64>,
    pub epigraph_gap: Option<f64>,
    pub step_energies: Vec<f64>,
    pub energy_spread: f64,
    /// Largest field-norm residuals of the Hamilton–Jacobi and continuity equations.
    pub optimality: OptimalityReport,
    pub max_mass_drift: f64,
    pub wall_time_s: f64,
}

fn step_metric<'a>(
    basis: &'a LindbladBasis,
    a: &[ComplexMatrix],
    b: &[ComplexMatrix],
    grid: &Grid,
    gamma: f64,
    kind: MetricKind,
) -> Result<(FieldMetric<'a>, Vec<ComplexMatrix>)> {
    let mid: Vec<ComplexMatrix> = a.iter().zip(b).map(|(p, q)| (p + q) * c(0.5, 0.0)).collect();
    let op = FieldMetric::at(basis, grid, &mid, gamma, kind)?;
    Ok((op, b.iter().zip(a).map(|(q, p)| q - p).collect()))
}

/// Discrete energy `T Σ_j h δ_jᵀ K(ρ̄_j)⁺ δ_j` and per-step squared speeds.
pub fn spatial_path_energy(
    basis: &LindbladBasis,
    densities: &[MatrixField],
    gamma: f64,
    kind: MetricKind,
) -> Result<(f64, Vec<f64>)> {
    if densities.len() < 2 {
        return Err(Error::InvalidArgument("a path needs at least two nodes".into()));
    }
    let t = (densities.len() - 1) as f64;
    let speeds = densities
        .windows(2)
        .map(|w| {
            let (op, d) = step_metric(basis, &w[0].raw(), &w[1].raw(), &w[0].grid, gamma, kind)?;
            Ok(op.inner_raw(&d, &d) * t * t)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((speeds.iter().sum::<f64>() / t, speeds))
}

/// Field version of the optimality residuals. Norms are `sqrt(h Σ_x ‖·‖²)`; the
/// Hamilton–Jacobi residual is taken modulo a spatially constant multiple of the identity.
pub fn verify_spatial_optimality(basis: &LindbladBasis, path: &SpatialPath) -> Result<OptimalityReport> {
    let t = path.steps();
    let tf = t as f64;
    let rho = &path.densities;
    let grid = rho[0].grid.clone();
    let h = grid.spacing();
    let n = basis.dim();
    let (gamma, kind) = (path.gamma, path.kind);
    let mut lambdas = Vec::with_capacity(t);
    for j in 0..t {
        let (op, d) = step_metric(basis, &rho[j].raw(), &rho[j + 1].raw(), &grid, gamma, kind)?;
        let rate: Vec<ComplexMatrix> = d.iter().map(|m| m * c(tf, 0.0)).collect();
        lambdas.push(op.solve_raw(&rate));
    }
    let fnorm = |f: &[ComplexMatrix]| (h * f.iter().map(|m| m.norm_squared()).sum::<f64>()).sqrt();
    let mut hj = Vec::new();
    let mut cont = Vec::new();
    for j in 1..t {
        let lam: Vec<ComplexMatrix> = lambdas[j - 1].iter().zip(&lambdas[j]).map(|(a, b)| (a + b) * c(0.5, 0.0)).collect();
        let gx = grid.grad_raw(&lam);
        let mut res = Vec::with_capacity(lam.len());
        for x in 0..lam.len() {
            let r = rho[j].values[x].clone();
            let dlam = (&lambdas[j][x] - &lambdas[j - 1][x]) * c(tf, 0.0);
            let hs = hamiltonian_gradient(&r, std::slice::from_ref(&gx[x]), kind)?;
            let hl = hamiltonian_gradient(&r, &basis.grad_raw(&lam[x]), kind)?;
            res.push(dlam - hs.as_matrix() - hl.as_matrix() * c(1.0 / gamma, 0.0));
        }
        let shift = res.iter().map(|m| m.trace().re).sum::<f64>() / (res.len() * n) as f64;
        for m in &mut res {
            *m -= ComplexMatrix::identity(n, n) * c(shift, 0.0);
        }
        hj.push(fnorm(&res));

        let op = FieldMetric::at(basis, &grid, &rho[j].raw(), gamma, kind)?;
        let model = op.apply_raw(&lam);
        let rate: Vec<ComplexMatrix> = rho[j + 1]
            .values
            .iter()
            .zip(&rho[j - 1].values)
            .zip(&model)
            .map(|((a, b), m)| (a.as_matrix() - b.as_matrix()) * c(tf / 2.0, 0.0) - m)
            .collect();
        cont.push(fnorm(&rate));
    }
    let max = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
    let rms = |v: &[f64]| {
        if v.is_empty() {
            0.0
        } else {
            (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
        }
    };
    Ok(OptimalityReport {
        hj_residual: max(&hj),
        hj_rms: rms(&hj),
        continuity_residual: max(&cont),
        continuity_rms: rms(&cont),
    })
}

fn check_marginal_fields(basis: &LindbladBasis, rho0: &MatrixField, rho1: &MatrixField, steps: usize, gamma: f64) -> Result<()> {
    rho0.check_same(rho1)?;
    if rho0.dim() != basis.dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            got: rho0.dim(),
        });
    }
    rho0.validate_density()?;
    rho1.validate_density()?;
    if steps < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 time steps, got {steps}")));
    }
    if !(gamma > 0.0) {
        return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")));
    }
    Ok(())
}

fn spread(values: &[f64]) -> f64 {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    if mean <= 0.0 {
        return 0.0;
    }
    let max = values.iter().copied().fold(f64::MIN, f64::max);
    let min = values.iter().copied().fold(f64::MAX, f64::min);
    (max - min) / mean
}

struct SolverStats {
    backend: Backend,
    iterations: usize,
    converged: bool,
    residuals: (f64, f64),
    conic: Option<(f64, f64)>,
}

fn finish(basis: &LindbladBasis, path: &SpatialPath, stats: SolverStats, start: Instant) -> Result<SpatialReport> {
    let (action, speeds) = spatial_path_energy(basis, &path.densities, path.gamma, path.kind)?;
    let dt = 1.0 / path.steps() as f64;
    let mut sp = 0.0;
    let mut li = 0.0;
    for (j, vel) in path.velocities(basis)?.iter().enumerate() {
        let (op, _) = step_metric(
            basis,
            &path.densities[j].raw(),
            &path.densities[j + 1].raw(),
            &path.densities[0].grid,
            path.gamma,
            path.kind,
        )?;
        let (a, b) = op.action_split(vel);
        sp += dt * a;
        li += dt * b;
    }
    let m0 = path.densities[0].mass();
    let drift = path.densities.iter().map(|f| (f.mass() - m0).abs()).fold(0.0, f64::max);
    Ok(SpatialReport {
        backend: stats.backend,
        kind: path.kind,
        steps: path.steps(),
        grid_points: path.densities[0].grid.points(),
        gamma: path.gamma,
        distance: action.max(0.0).sqrt(),
        action,
        spatial_action: sp,
        lindblad_action: li,
        iterations: stats.iterations,
        converged: stats.converged,
        primal_residual: stats.residuals.0,
        dual_residual: stats.residuals.1,
        conic_objective: stats.conic.map(|c| c.0),
        epigraph_gap: stats.conic.map(|c| c.1),
        energy_spread: spread(&speeds),
        step_energies: speeds,
        optimality: verify_spatial_optimality(basis, path)?,
        max_mass_drift: drift,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Anti-commutator transport between density fields by the conic backend.
pub fn solve_spatial_geodesic(
    basis: &LindbladBasis,
    rho0: &MatrixField,
    rho1: &MatrixField,
    gamma: f64,
    steps: usize,
    opts: &ConicOptions,
) -> Result<(SpatialPath, SpatialReport)> {
    let start = Instant::now();
    check_marginal_fields(basis, rho0, rho1, steps, gamma)?;
    let grid = rho0.grid.clone();
    let setup = ConicSetup {
        basis,
        grid: Some(&grid),
        gamma,
        steps,
    };
    let out = solve_conic(&setup, &rho0.raw(), &rho1.raw(), opts)?;
    if !out.converged {
        return Err(Error::NonConvergence {
            iterations: out.iterations,
            residual: out.primal_residual.max(out.dual_residual),
        });
    }
    let mut densities = Vec::with_capacity(steps + 1);
    densities.push(rho0.clone());
    for (j, node) in out.rho.iter().enumerate().take(steps).skip(1) {
        let f = MatrixField::from_raw(&grid, node.iter().map(hermitian_part).collect());
        let min = f.min_eigenvalue()?;
        if min <= EPS_PD {
            return Err(Error::PositivityLost {
                step: j,
                min_eigenvalue: min,
            });
        }
        densities.push(f);
    }
    densities.push(rho1.clone());
    let path = SpatialPath {
        densities,
        kind: MetricKind::AntiCommutator,
        gamma,
    };
    let stats = SolverStats {
        backend: Backend::Conic,
        iterations: out.iterations,
        converged: true,
        residuals: (out.primal_residual, out.dual_residual),
        conic: Some((out.objective, out.epigraph_gap)),
    };
    let report = finish(basis, &path, stats, start)?;
    log::info!(
        "spatial conic: distance {:.8} after {} iterations ({:.2}s)",
        report.distance,
        report.iterations,
        report.wall_time_s
    );
    Ok((path, report))
}

/// First divided difference of `exp` (shifted by `s`).
fn exp_dd1(a: f64, b: f64, s: f64) -> f64 {
    let d = a - b;
    if d.abs() < 1e-12 {
        ((a + b) / 2.0 - s).exp()
    } else {
        (b - s).exp() * d.exp_m1() / d
    }
}

/// Interior nodes of the direct optimizer: `ρ(x) = exp(A(x))/Z`, `Z = h Σ_x tr exp(A(x))`.
struct GibbsField {
    eigs: Vec<crate::herm::EigenDecomposition>,
    shift: f64,
    z: f64,
    rho: Vec<ComplexMatrix>,
}

fn gibbs_field(a: &[ComplexMatrix], h: f64) -> Result<GibbsField> {
    let eigs = a.iter().map(eigh_matrix).collect::<Result<Vec<_>>>()?;
    let shift = eigs
        .iter()
        .map(|e| e.eigenvalues[e.dim() - 1])
        .fold(f64::NEG_INFINITY, f64::max);
    let z = h * eigs.iter().map(|e| e.eigenvalues.iter().map(|l| (l - shift).exp()).sum::<f64>()).sum::<f64>();
    let rho = eigs.iter().map(|e| e.with_spectrum(|l| (l - shift).exp() / z)).collect();
    Ok(GibbsField { eigs, shift, z, rho })
}

impl GibbsField {
    /// Pulls a gradient with respect to `ρ(x)` back to `A(x)`.
    fn pullback(&self, grad: &[ComplexMatrix], h: f64) -> Vec<ComplexMatrix> {
        let cst: f64 = grad.iter().zip(&self.rho).map(|(g, r)| real_inner(g, r)).sum();
        self.eigs
            .iter()
            .zip(grad)
            .zip(&self.rho)
            .map(|((e, g), r)| {
                let mut gt = e.to_eigenbasis(g);
                let l = &e.eigenvalues;
                for i in 0..e.dim() {
                    for j in 0..e.dim() {
                        gt[(i, j)] *= exp_dd1(l[i], l[j], self.shift) / self.z;
                    }
                }
                hermitian_part(&e.from_eigenbasis(&gt)) - r * c(cst * h, 0.0)
            })
            .collect()
    }
}

/// Transport between density fields in either geometry by direct minimization of the path
/// energy over Gibbs-parametrized interior nodes (BFGS with exact gradients).
pub fn solve_spatial_direct(
    basis: &LindbladBasis,
    rho0: &MatrixField,
    rho1: &MatrixField,
    gamma: f64,
    steps: usize,
    kind: MetricKind,
    opts: &DirectOptions,
) -> Result<(SpatialPath, SpatialReport)> {
    let start = Instant::now();
    check_marginal_fields(basis, rho0, rho1, steps, gamma)?;
    if rho0 == rho1 {
        let path = SpatialPath {
            densities: vec![rho0.clone(); steps + 1],
            kind,
            gamma,
        };
        let stats = SolverStats {
            backend: Backend::Direct,
            iterations: 0,
            converged: true,
            residuals: (0.0, 0.0),
            conic: None,
        };
        let report = finish(basis, &path, stats, start)?;
        return Ok((path, report));
    }
    let grid = rho0.grid.clone();
    let h = grid.spacing();
    let g = grid.points();
    let n = basis.dim();
    let d = n * n;
    let frame = HermitianFrame::new(n);
    let t = steps;
    let block = g * d;

    let mut x0 = DVector::zeros((t - 1) * block);
    for j in 1..t {
        let s = j as f64 / t as f64;
        for x in 0..g {
            let lin = rho0.values[x].as_matrix() * c(1.0 - s, 0.0) + rho1.values[x].as_matrix() * c(s, 0.0);
            let log = log_checked(&lin)?;
            x0.rows_mut((j - 1) * block + x * d, d).copy_from(&frame.coords(&log));
        }
    }
    let a_of = |x: &DVector<f64>, j: usize| -> Vec<ComplexMatrix> {
        (0..g)
            .map(|p| frame.from_coords(x.rows((j - 1) * block + p * d, d).as_slice()))
            .collect()
    };
    let nodes = |x: &DVector<f64>| -> Result<(Vec<Vec<ComplexMatrix>>, Vec<Option<GibbsField>>)> {
        let mut rho = vec![rho0.raw()];
        let mut gf = vec![None];
        for j in 1..t {
            let f = gibbs_field(&a_of(x, j), h)?;
            rho.push(f.rho.clone());
            gf.push(Some(f));
        }
        rho.push(rho1.raw());
        gf.push(None);
        Ok((rho, gf))
    };
    let energy = |x: &DVector<f64>| -> Result<f64> {
        let (rho, _) = nodes(x)?;
        let mut e = 0.0;
        for j in 0..t {
            let (op, dl) = step_metric(basis, &rho[j], &rho[j + 1], &grid, gamma, kind)?;
            e += op.inner_raw(&dl, &dl);
        }
        Ok(e * t as f64)
    };
    let gradient = |x: &DVector<f64>| -> Result<DVector<f64>> {
        let (rho, gf) = nodes(x)?;
        let tf = t as f64;
        let zero = ComplexMatrix::zeros(n, n);
        let mut grads = vec![vec![zero; g]; t + 1];
        for j in 0..t {
            let (op, dl) = step_metric(basis, &rho[j], &rho[j + 1], &grid, gamma, kind)?;
            let lam = op.solve_raw(&dl);
            let gx = grid.grad_raw(&lam);
            let mid: Vec<HermitianMatrix> = rho[j]
                .iter()
                .zip(&rho[j + 1])
                .map(|(a, b)| HermitianMatrix::from_raw((a + b) * c(0.5, 0.0)))
                .collect();
            for p in 0..g {
                let hs = hamiltonian_gradient(&mid[p], std::slice::from_ref(&gx[p]), kind)?;
                let hl = hamiltonian_gradient(&mid[p], &basis.grad_raw(&lam[p]), kind)?;
                let hg = hs.as_matrix() + hl.as_matrix() * c(1.0 / gamma, 0.0);
                // e_j = T h δᵀK⁺δ, λ = −K⁺δ
                grads[j + 1][p] -= (&lam[p] * c(2.0, 0.0) + &hg) * c(tf * h, 0.0);
                grads[j][p] += (&lam[p] * c(2.0, 0.0) - &hg) * c(tf * h, 0.0);
            }
        }
        let mut out = DVector::zeros(x.len());
        for j in 1..t {
            let f = gf[j].as_ref().expect("interior node");
            for (p, ga) in f.pullback(&grads[j], h).iter().enumerate() {
                out.rows_mut((j - 1) * block + p * d, d).copy_from(&frame.coords(ga));
            }
        }
        Ok(out)
    };
    let bopts = BfgsOptions {
        max_iterations: opts.max_iterations,
        gradient_tolerance: opts.gradient_tolerance,
    };
    let res = bfgs(energy, gradient, x0, &bopts)?;
    if !res.converged {
        return Err(Error::NonConvergence {
            iterations: res.iterations,
            residual: res.gradient_norm,
        });
    }
    let (rho, _) = nodes(&res.x)?;
    let densities = rho.into_iter().map(|f| MatrixField::from_raw(&grid, f)).collect();
    let path = SpatialPath { densities, kind, gamma };
    let stats = SolverStats {
        backend: Backend::Direct,
        iterations: res.iterations,
        converged: true,
        residuals: (res.gradient_norm, 0.0),
        conic: None,
    };
    let report = finish(basis, &path, stats, start)?;
    log::info!(
        "spatial direct {kind}: distance {:.8} after {} iterations ({:.2}s)",
        report.distance,
        report.iterations,
        report.wall_time_s
    );
    Ok((path, report))
}

/// Recorded trajectory of a spatial flow.
#[derive(Debug, Clone)]
pub struct SpatialFlowTrace {
    grid: Grid,
    raw: RawTrace,
}

impl SpatialFlowTrace {
    pub fn times(&self) -> &[f64] {
        &self.raw.times
    }

    pub fn states(&self) -> Vec<MatrixField> {
        self.raw.states.iter().map(|s| MatrixField::from_raw(&self.grid, s.clone())).collect()
    }

    pub fn last(&self) -> MatrixField {
        MatrixField::from_raw(&self.grid, self.raw.states.last().expect("non-empty").clone())
    }

    /// `−h Σ_x tr(ρ log ρ)` at each recorded time.
    pub fn entropies(&self) -> &[f64] {
        &self.raw.entropies
    }

    pub fn min_eigenvalues(&self) -> &[f64] {
        &self.raw.min_eigenvalues
    }

    /// `|h Σ tr ρ(t) − h Σ tr ρ(0)|` at each recorded time.
    pub fn mass_drifts(&self) -> &[f64] {
        &self.raw.mass_drifts
    }

    pub fn min_entropy_increment(&self) -> f64 {
        self.raw.min_entropy_increment
    }

    pub fn steps(&self) -> usize {
        self.raw.steps
    }

    pub fn halvings(&self) -> usize {
        self.raw.halvings
    }

    /// `sqrt(h Σ ‖ρ(x) − I/n‖²)` at each recorded time.
    pub fn distances_to_uniform(&self) -> Vec<f64> {
        let h = self.grid.spacing();
        self.raw
            .states
            .iter()
            .map(|s| {
                let n = s[0].nrows();
                let id = ComplexMatrix::identity(n, n) * c(1.0 / n as f64, 0.0);
                (h * s.iter().map(|m| (m - &id).norm_squared()).sum::<f64>()).sqrt()
            })
            .collect()
    }
}

/// Entropy gradient flow of a density field.
///
/// Anti-commutator: `ρ̇ = div_x M_ρ(grad_x log ρ) − γ⁻¹ ∇_L* M_ρ(∇_L log ρ)`.
/// Logarithmic: the linear heat equation `ρ̇ = div_x grad_x ρ + γ⁻¹ Δ_L ρ`.
pub fn spatial_entropy_flow(
    basis: &LindbladBasis,
    rho0: &MatrixField,
    gamma: f64,
    kind: MetricKind,
    opts: &FlowOptions,
) -> Result<SpatialFlowTrace> {
    if rho0.dim() != basis.dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            got: rho0.dim(),
        });
    }
    if !(gamma > 0.0) {
        return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")));
    }
    let grid = rho0.grid.clone();
    let inv = 1.0 / gamma;
    let raw = match kind {
        MetricKind::AntiCommutator => integrate(rho0.raw(), grid.spacing(), opts, |f| {
            let logs = f.iter().map(log_checked).collect::<Result<Vec<_>>>()?;
            let gx = grid.grad_raw(&logs);
            let weighted: Vec<ComplexMatrix> = f
                .iter()
                .zip(&gx)
                .map(|(r, g)| (r * g + g * r) * c(0.5, 0.0))
                .collect();
            let mut out = grid.div_raw(&weighted);
            for (o, r) in out.iter_mut().zip(f) {
                *o += entropy_gradient_raw(basis, r, MetricKind::AntiCommutator)? * c(inv, 0.0);
            }
            Ok(out)
        })?,
        MetricKind::Logarithmic => integrate(rho0.raw(), grid.spacing(), opts, |f| {
            let mut out = grid.div_raw(&grid.grad_raw(f));
            for (o, r) in out.iter_mut().zip(f) {
                *o += basis.laplacian_raw(r) * c(inv, 0.0);
            }
            Ok(out)
        })?,
    };
    Ok(SpatialFlowTrace { grid, raw })
}

/// `exp(t(div_x grad_x + γ⁻¹Δ_L)) ρ₀` through the `(G n²)×(G n²)` superoperator.
pub fn spatial_heat_exact(basis: &LindbladBasis, rho0: &MatrixField, gamma: f64, t: f64) -> Result<MatrixField> {
    if rho0.dim() != basis.dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            got: rho0.dim(),
        });
    }
    let n = basis.dim();
    let n2 = n * n;
    let g = rho0.grid.points();
    let gm = rho0.grid.gradient_matrix();
    let dx = -(gm.transpose() * gm);
    let dx = dx.map(|v| c(v, 0.0));
    let lap = laplacian_superoperator(basis).matrix() * c(1.0 / gamma, 0.0);
    let s = ComplexMatrix::identity(g, g).kronecker(&lap) + dx.kronecker(&ComplexMatrix::identity(n2, n2));
    let e = eigh_matrix(&hermitian_part(&s))?;
    let mut v = nalgebra::DVector::zeros(g * n2);
    for (x, m) in rho0.values.iter().enumerate() {
        v.rows_mut(x * n2, n2).copy_from_slice(m.as_matrix().as_slice());
    }
    let u = &e.eigenvectors;
    let mut coeffs = u.adjoint() * v;
    for (z, &k) in coeffs.iter_mut().zip(e.eigenvalues.iter()) {
        *z *= (t * k).exp();
    }
    let out = u * coeffs;
    let values = (0..g)
        .map(|x| ComplexMatrix::from_column_slice(n, n, out.rows(x * n2, n2).as_slice()))
        .collect();
    Ok(MatrixField::from_raw(&rho0.grid, values))
}
