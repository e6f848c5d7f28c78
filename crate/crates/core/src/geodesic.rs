//! Discrete geodesics and transport distances between density matrices.
//!
//! Both backends minimize the same discrete energy on a uniform time grid with `T` steps,
//!
//! `E(ρ₀, …, ρ_T) = T Σ_j ⟨ρ_{j+1} − ρ_j, ρ_{j+1} − ρ_j⟩_{ρ̄_j}`,  `ρ̄_j = (ρ_j + ρ_{j+1})/2`,
//!
//! and report `sqrt(E)` as the distance. The conic backend solves the convex momentum form of the
//! anti-commutator problem (see [`crate::transport`]); the direct backend parametrizes interior
//! nodes as `exp(A_j)/tr exp(A_j)` and runs BFGS on `E` with finite-difference gradients, for
//! either geometry.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::herm::{
    c, eigh, eigh_matrix, frobenius, hermitian_part, skew_part, BlockField, BlockKind,
    ComplexMatrix, DensityMatrix, HermitianMatrix,
};
use crate::lindblad::{log_mean, LindbladBasis};
use crate::metric::{MetricKind, MetricOperator};
use crate::optim::{bfgs, BfgsOptions};
pub use crate::transport::ConicOptions;
use crate::transport::{solve_conic, ConicSetup};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Conic,
    Direct,
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::Conic => "conic",
            Backend::Direct => "direct",
        })
    }
}

impl FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "conic" => Ok(Backend::Conic),
            "direct" => Ok(Backend::Direct),
            other => Err(Error::InvalidArgument(format!("unknown backend '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DirectOptions {
    pub max_iterations: usize,
    /// BFGS stops when the sup-norm of the gradient drops below this (relative to `max(1, E)`).
    pub gradient_tolerance: f64,
    /// Central-difference step per real coordinate.
    pub fd_step: f64,
}

impl Default for DirectOptions {
    fn default() -> Self {
        Self {
            max_iterations: 5_000,
            gradient_tolerance: 1e-9,
            fd_step: 1e-5,
        }
    }
}

/// Densities at `t_j = j/T` and momenta `J_j` on the staggered midpoints, related by the
/// discrete continuity equation `ρ_{j+1} − ρ_j = Δt ∇_L* J_j`.
#[derive(Debug, Clone)]
pub struct DiscretePath {
    densities: Vec<DensityMatrix>,
    momenta: Vec<BlockField>,
    kind: MetricKind,
}

impl DiscretePath {
    pub fn new(densities: Vec<DensityMatrix>, momenta: Vec<BlockField>, kind: MetricKind) -> Result<Self> {
        if densities.len() < 2 || momenta.len() + 1 != densities.len() {
            return Err(Error::InvalidArgument(format!(
                "{} densities and {} momenta do not form a path",
                densities.len(),
                momenta.len()
            )));
        }
        Ok(Self {
            densities,
            momenta,
            kind,
        })
    }

    /// Recovers the minimal momenta of each step by Poisson solves at the midpoints.
    pub fn from_densities(basis: &LindbladBasis, densities: Vec<DensityMatrix>, kind: MetricKind) -> Result<Self> {
        let t = densities.len().saturating_sub(1);
        let mut momenta = Vec::with_capacity(t);
        for j in 0..t {
            let (op, delta) = step_operator(basis, &densities[j], &densities[j + 1], kind)?;
            let p = op.solve_matrix(&(delta * c(t as f64, 0.0)))?;
            let v: Vec<ComplexMatrix> = basis.grad_raw(p.lambda().as_matrix()).into_iter().map(|g| -g).collect();
            let m: Vec<ComplexMatrix> = v.iter().map(|b| op.multiplier().apply(b)).collect();
            momenta.push(BlockField::from_raw(BlockKind::SkewHermitian, m));
        }
        Self::new(densities, momenta, kind)
    }

    pub fn steps(&self) -> usize {
        self.momenta.len()
    }

    pub fn densities(&self) -> &[DensityMatrix] {
        &self.densities
    }

    pub fn momenta(&self) -> &[BlockField] {
        &self.momenta
    }

    pub fn kind(&self) -> MetricKind {
        self.kind
    }

    /// `max_j ‖ρ_{j+1} − ρ_j − Δt ∇_L* J_j‖_F`.
    pub fn continuity_residual(&self, basis: &LindbladBasis) -> f64 {
        let dt = 1.0 / self.steps() as f64;
        (0..self.steps())
            .map(|j| {
                let diff = self.densities[j + 1].as_matrix() - self.densities[j].as_matrix();
                let rate = basis.div_raw(self.momenta[j].blocks()) * c(dt, 0.0);
                frobenius(&(diff - rate))
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalityReport {
    /// Largest Frobenius norm over interior nodes of the traceless part of
    /// `λ̇ − ∂_ρ H(ρ, λ)`.
    pub hj_residual: f64,
    pub hj_rms: f64,
    /// Largest Frobenius norm over interior nodes of `ρ̇ + ∇_L* M_ρ(∇_L λ)`.
    pub continuity_residual: f64,
    pub continuity_rms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub backend: Backend,
    pub kind: MetricKind,
    pub steps: usize,
    pub distance: f64,
    /// Discrete energy `E` of the returned path; `distance = sqrt(action)`.
    pub action: f64,
    pub iterations: usize,
    pub converged: bool,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// Conic objective `Σ Δt tr(S)`; conic backend only.
    pub conic_objective: Option<f64>,
    /// Largest `tr(S) − tr(u*ρ̄⁻¹u)` over epigraph blocks; conic backend only.
    pub epigraph_gap: Option<f64>,
    /// Squared speed `T²⟨δ_j, δ_j⟩` of each step.
    pub step_energies: Vec<f64>,
    /// `(max − min)/mean` of the step energies; zero for a constant-speed path.
    pub energy_spread: f64,
    pub optimality: OptimalityReport,
    pub wall_time_s: f64,
}

fn step_operator<'a>(
    basis: &'a LindbladBasis,
    a: &DensityMatrix,
    b: &DensityMatrix,
    kind: MetricKind,
) -> Result<(MetricOperator<'a>, ComplexMatrix)> {
    let mid = HermitianMatrix::from_raw((a.as_matrix() + b.as_matrix()) * c(0.5, 0.0));
    let op = MetricOperator::at(basis, &mid, kind)?;
    Ok((op, b.as_matrix() - a.as_matrix()))
}

fn step_energy_raw(basis: &LindbladBasis, a: &ComplexMatrix, b: &ComplexMatrix, kind: MetricKind) -> Result<f64> {
    let mid = HermitianMatrix::from_raw((a + b) * c(0.5, 0.0));
    let op = MetricOperator::at(basis, &mid, kind)?;
    let d = b - a;
    Ok(op.inner_matrix(&d, &d))
}

/// Discrete energy `E` of a path and the per-step squared speeds `T²⟨δ_j, δ_j⟩`.
pub fn path_energy(basis: &LindbladBasis, densities: &[DensityMatrix], kind: MetricKind) -> Result<(f64, Vec<f64>)> {
    if densities.len() < 2 {
        return Err(Error::InvalidArgument("a path needs at least two nodes".into()));
    }
    let t = (densities.len() - 1) as f64;
    let speeds = densities
        .windows(2)
        .map(|w| step_energy_raw(basis, w[0].as_matrix(), w[1].as_matrix(), kind).map(|e| e * t * t))
        .collect::<Result<Vec<_>>>()?;
    let e = speeds.iter().sum::<f64>() / t;
    Ok((e, speeds))
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

fn check_marginals(basis: &LindbladBasis, rho0: &DensityMatrix, rho1: &DensityMatrix, steps: usize) -> Result<()> {
    for r in [rho0, rho1] {
        if r.dim() != basis.dim() {
            return Err(Error::DimensionMismatch {
                expected: basis.dim(),
                got: r.dim(),
            });
        }
    }
    if steps < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 time steps, got {steps}")));
    }
    Ok(())
}

fn finish_report(
    basis: &LindbladBasis,
    path: &DiscretePath,
    backend: Backend,
    iterations: usize,
    converged: bool,
    residuals: (f64, f64),
    conic: Option<(f64, f64)>,
    start: Instant,
) -> Result<SolveReport> {
    let (action, speeds) = path_energy(basis, path.densities(), path.kind())?;
    let optimality = verify_optimality(basis, path, path.kind())?;
    Ok(SolveReport {
        backend,
        kind: path.kind(),
        steps: path.steps(),
        distance: action.max(0.0).sqrt(),
        action,
        iterations,
        converged,
        primal_residual: residuals.0,
        dual_residual: residuals.1,
        conic_objective: conic.map(|c| c.0),
        epigraph_gap: conic.map(|c| c.1),
        energy_spread: spread(&speeds),
        step_energies: speeds,
        optimality,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Anti-commutator distance by the conic operator-splitting backend.
pub fn solve_w2a_conic(
    basis: &LindbladBasis,
    rho0: &DensityMatrix,
    rho1: &DensityMatrix,
    steps: usize,
    opts: &ConicOptions,
) -> Result<(DiscretePath, SolveReport)> {
    let start = Instant::now();
    check_marginals(basis, rho0, rho1, steps)?;
    let setup = ConicSetup {
        basis,
        grid: None,
        gamma: 1.0,
        steps,
    };
    let out = solve_conic(&setup, &[rho0.as_matrix().clone()], &[rho1.as_matrix().clone()], opts)?;
    if !out.converged {
        return Err(Error::NonConvergence {
            iterations: out.iterations,
            residual: out.primal_residual.max(out.dual_residual),
        });
    }
    let mut densities = Vec::with_capacity(steps + 1);
    densities.push(rho0.clone());
    for (j, node) in out.rho.iter().enumerate().take(steps).skip(1) {
        let h = HermitianMatrix::from_raw(hermitian_part(&node[0]));
        let d = DensityMatrix::new(h.clone()).map_err(|_| Error::PositivityLost {
            step: j,
            min_eigenvalue: h.min_eigenvalue().unwrap_or(f64::NAN),
        })?;
        densities.push(d);
    }
    densities.push(rho1.clone());
    let momenta = out
        .momenta
        .iter()
        .map(|m| BlockField::from_raw(BlockKind::SkewHermitian, m[0].iter().map(skew_part).collect()))
        .collect();
    let path = DiscretePath::new(densities, momenta, MetricKind::AntiCommutator)?;
    let report = finish_report(
        basis,
        &path,
        Backend::Conic,
        out.iterations,
        out.converged,
        (out.primal_residual, out.dual_residual),
        Some((out.objective, out.epigraph_gap)),
        start,
    )?;
    log::info!(
        "conic W2a: distance {:.8} after {} iterations ({:.2}s)",
        report.distance,
        report.iterations,
        report.wall_time_s
    );
    Ok((path, report))
}

/// `exp(A)/tr exp(A)` for Hermitian `A`, shifted for overflow safety.
pub(crate) fn gibbs(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    let e = eigh_matrix(a)?;
    let top = e.eigenvalues[e.dim() - 1];
    let z: f64 = e.eigenvalues.iter().map(|l| (l - top).exp()).sum();
    Ok(e.with_spectrum(|l| (l - top).exp() / z))
}

/// Distance in either geometry by direct minimization of the path energy.
pub fn solve_w2_direct(
    basis: &LindbladBasis,
    rho0: &DensityMatrix,
    rho1: &DensityMatrix,
    steps: usize,
    kind: MetricKind,
    opts: &DirectOptions,
) -> Result<(DiscretePath, SolveReport)> {
    let start = Instant::now();
    check_marginals(basis, rho0, rho1, steps)?;
    if rho0 == rho1 {
        let path = DiscretePath::from_densities(basis, vec![rho0.clone(); steps + 1], kind)?;
        let report = finish_report(basis, &path, Backend::Direct, 0, true, (0.0, 0.0), None, start)?;
        return Ok((path, report));
    }
    let frame = basis.frame();
    let n = basis.dim();
    let d = n * n - 1;
    let t = steps;
    let interior = t - 1;

    let mut x0 = DVector::zeros(interior * d);
    for j in 1..t {
        let s = j as f64 / t as f64;
        let lin = HermitianMatrix::from_raw(rho0.as_matrix() * c(1.0 - s, 0.0) + rho1.as_matrix() * c(s, 0.0));
        let e = eigh(&lin)?;
        let log = e.with_spectrum(f64::ln);
        x0.rows_mut((j - 1) * d, d).copy_from(&frame.traceless_coords(&log));
    }

    let node = |x: &DVector<f64>, j: usize| -> Result<ComplexMatrix> {
        if j == 0 {
            return Ok(rho0.as_matrix().clone());
        }
        if j == t {
            return Ok(rho1.as_matrix().clone());
        }
        let coords: Vec<f64> = x.rows((j - 1) * d, d).iter().copied().collect();
        gibbs(&frame.from_traceless_coords(&coords))
    };
    let nodes = |x: &DVector<f64>| -> Result<Vec<ComplexMatrix>> { (0..=t).map(|j| node(x, j)).collect() };
    let energy = |x: &DVector<f64>| -> Result<f64> {
        let p = nodes(x)?;
        let mut e = 0.0;
        for j in 0..t {
            e += step_energy_raw(basis, &p[j], &p[j + 1], kind)?;
        }
        Ok(e * t as f64)
    };
    let h = opts.fd_step;
    let gradient = |x: &DVector<f64>| -> Result<DVector<f64>> {
        let p = nodes(x)?;
        let mut g = DVector::zeros(x.len());
        let mut xp = x.clone();
        for j in 1..t {
            for a in 0..d {
                let idx = (j - 1) * d + a;
                let mut local = |delta: f64| -> Result<f64> {
                    xp[idx] = x[idx] + delta;
                    let r = node(&xp, j)?;
                    xp[idx] = x[idx];
                    Ok(step_energy_raw(basis, &p[j - 1], &r, kind)? + step_energy_raw(basis, &r, &p[j + 1], kind)?)
                };
                let plus = local(h)?;
                let minus = local(-h)?;
                g[idx] = t as f64 * (plus - minus) / (2.0 * h);
            }
        }
        Ok(g)
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
    let mut densities = Vec::with_capacity(t + 1);
    for (j, m) in nodes(&res.x)?.into_iter().enumerate() {
        let hm = HermitianMatrix::from_raw(m);
        let dm = DensityMatrix::new(hm.clone()).map_err(|_| Error::PositivityLost {
            step: j,
            min_eigenvalue: hm.min_eigenvalue().unwrap_or(f64::NAN),
        })?;
        densities.push(dm);
    }
    let path = DiscretePath::from_densities(basis, densities, kind)?;
    let report = finish_report(
        basis,
        &path,
        Backend::Direct,
        res.iterations,
        res.converged,
        (res.gradient_norm, 0.0),
        None,
        start,
    )?;
    log::info!(
        "direct {kind}: distance {:.8} after {} iterations ({:.2}s)",
        report.distance,
        report.iterations,
        report.wall_time_s
    );
    Ok((path, report))
}

/// Second divided difference `exp[x, y, z]`.
pub fn exp_divided_difference2(x: f64, y: f64, z: f64) -> f64 {
    let mut v = [x, y, z];
    v.sort_by(f64::total_cmp);
    let [a, b, cc] = v;
    if cc - a < 1e-5 {
        let m = (a + b + cc) / 3.0;
        let s2 = (a - m).powi(2) + (b - m).powi(2) + (cc - m).powi(2);
        return m.exp() * (0.5 + s2 / 48.0);
    }
    let first = |u: f64, w: f64| {
        let dd = u - w;
        if dd == 0.0 {
            w.exp()
        } else {
            w.exp() * dd.exp_m1() / dd
        }
    };
    (first(b, cc) - first(a, b)) / (cc - a)
}

/// `∂_ρ H` for `H(ρ, λ) = ½ Σ_k ⟨G_k, M_ρ G_k⟩`, `G = ∇_L λ`.
///
/// Anti-commutator: `½ Σ G_k* G_k`. Kubo–Mori: in the eigenbasis of `ρ`, entry `(i, j)` is
/// `Σ_k Σ_m (G_k*)_{im} (G_k)_{mj} exp[ℓ_i, ℓ_m, ℓ_j] / Λ(p_i, p_j)` with `ℓ = log p`.
pub fn hamiltonian_gradient(rho: &HermitianMatrix, grads: &[ComplexMatrix], kind: MetricKind) -> Result<HermitianMatrix> {
    let n = rho.dim();
    match kind {
        MetricKind::AntiCommutator => {
            let mut acc = ComplexMatrix::zeros(n, n);
            for g in grads {
                acc += g.adjoint() * g;
            }
            Ok(HermitianMatrix::from_raw(acc * c(0.5, 0.0)))
        }
        MetricKind::Logarithmic => {
            let e = eigh(rho)?;
            let p = &e.eigenvalues;
            if p[0] <= crate::herm::EPS_PD {
                return Err(Error::NotPositiveDefinite(p[0]));
            }
            let l: Vec<f64> = p.iter().map(|v| v.ln()).collect();
            let mut acc = ComplexMatrix::zeros(n, n);
            for g in grads {
                let gt = e.to_eigenbasis(g);
                for i in 0..n {
                    for j in 0..n {
                        let mut s = c(0.0, 0.0);
                        for m in 0..n {
                            s += gt[(m, i)].conj() * gt[(m, j)] * exp_divided_difference2(l[i], l[m], l[j]);
                        }
                        acc[(i, j)] += s;
                    }
                }
            }
            for i in 0..n {
                for j in 0..n {
                    acc[(i, j)] /= log_mean(p[i], p[j]);
                }
            }
            Ok(HermitianMatrix::from_raw(e.from_eigenbasis(&acc)))
        }
    }
}

/// Discrete residuals of the optimality system along a path.
///
/// Step potentials `λ_{j+½}` solve the Poisson equation at `ρ̄_j` for the rate
/// `T(ρ_{j+1} − ρ_j)`. At interior nodes, `λ_j` is their average and `λ̇_j` their difference
/// quotient; the Hamilton–Jacobi residual is taken modulo multiples of the identity, matching
/// the gauge freedom of `λ`.
pub fn verify_optimality(basis: &LindbladBasis, path: &DiscretePath, kind: MetricKind) -> Result<OptimalityReport> {
    let t = path.steps();
    let tf = t as f64;
    let rho = path.densities();
    let mut lambdas = Vec::with_capacity(t);
    for j in 0..t {
        let (op, delta) = step_operator(basis, &rho[j], &rho[j + 1], kind)?;
        lambdas.push(op.solve_matrix(&(delta * c(tf, 0.0)))?.into_hermitian());
    }
    let mut hj = Vec::new();
    let mut cont = Vec::new();
    for j in 1..t {
        let lam = HermitianMatrix::from_raw((lambdas[j - 1].as_matrix() + lambdas[j].as_matrix()) * c(0.5, 0.0));
        let dlam = (lambdas[j].as_matrix() - lambdas[j - 1].as_matrix()) * c(tf, 0.0);
        let grads = basis.grad_raw(lam.as_matrix());
        let hgrad = hamiltonian_gradient(rho[j].hermitian(), &grads, kind)?;
        let r = HermitianMatrix::from_raw(dlam - hgrad.as_matrix()).traceless();
        hj.push(r.norm());

        let op = MetricOperator::new(basis, &rho[j], kind)?;
        let rate = (rho[j + 1].as_matrix() - rho[j - 1].as_matrix()) * c(tf / 2.0, 0.0);
        let model = op.apply(&lam);
        cont.push(frobenius(&(rate - model.as_matrix())));
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::herm::pauli;
    use crate::random;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn diag(p: f64) -> DensityMatrix {
        DensityMatrix::from_diagonal(&[p, 1.0 - p]).unwrap()
    }

    #[test]
    fn divided_difference_matches_definition() {
        let cases = [(0.1, 0.5, -0.3), (1.0, 1.0 + 1e-7, 1.0 - 2e-7), (-2.0, -2.0, -2.0), (0.3, 0.3, 2.0), (-1.0, 0.0, 0.0)];
        for (x, y, z) in cases {
            // Hermite–Genocchi: integral of exp over the 2-simplex, by a fine midpoint rule.
            let nq = 400;
            let mut acc = 0.0;
            for a in 0..nq {
                for b in 0..nq {
                    let s = (a as f64 + 0.5) / nq as f64;
                    let r = (b as f64 + 0.5) / nq as f64;
                    // (s, r) ∈ unit square → simplex via t1 = s(1−r)... use Duffy map.
                    let t1 = s;
                    let t2 = (1.0 - s) * r;
                    let t0 = 1.0 - t1 - t2;
                    acc += (t0 * x + t1 * y + t2 * z).exp() * (1.0 - s);
                }
            }
            let quad = acc / (nq * nq) as f64;
            let v = exp_divided_difference2(x, y, z);
            assert!((v - quad).abs() < 1e-5 * v, "{x} {y} {z}: {v} vs {quad}");
        }
        // Branch continuity at the Taylor threshold.
        for spread in [0.99e-5, 1.01e-5] {
            let (x, y, z) = (0.2, 0.2 + spread, 0.2 + 0.3 * spread);
            let m = (x + y + z) / 3.0;
            let s2: f64 = [x, y, z].iter().map(|v| (v - m) * (v - m)).sum();
            let taylor = m.exp() * (0.5 + s2 / 48.0);
            assert!((exp_divided_difference2(x, y, z) - taylor).abs() < 1e-10);
        }
    }

    /// The triple integral `∫₀¹∫₀¹∫₀^α ρ^{α−β} R_s G* ρ^{1−α} G ρ^β R_s dβ dα ds`, `R_s =
    /// ((1−s)I + sρ)⁻¹`, by a 50³ midpoint rule.
    fn log_kernel_quadrature(rho: &HermitianMatrix, g: &ComplexMatrix) -> ComplexMatrix {
        let e = eigh(rho).unwrap();
        let n = rho.dim();
        let q = 50;
        let mut acc = ComplexMatrix::zeros(n, n);
        let pow = |x: f64| e.with_spectrum(|p| p.powf(x));
        for is in 0..q {
            let s = (is as f64 + 0.5) / q as f64;
            let r = e.with_spectrum(|p| 1.0 / ((1.0 - s) + s * p));
            for ia in 0..q {
                let alpha = (ia as f64 + 0.5) / q as f64;
                let mid = g.adjoint() * pow(1.0 - alpha) * g;
                for ib in 0..q {
                    let beta = alpha * (ib as f64 + 0.5) / q as f64;
                    acc += pow(alpha - beta) * &r * &mid * &r * pow(beta) * c(alpha, 0.0);
                }
            }
        }
        acc * c(1.0 / (q * q * q) as f64, 0.0)
    }

    #[test]
    fn log_kernel_matches_triple_integral() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let b = LindbladBasis::pauli();
        let rho = random::density(2, &mut rng);
        let lam = random::hermitian(2, &mut rng);
        let grads = b.grad_raw(lam.as_matrix());
        let closed = hamiltonian_gradient(rho.hermitian(), &grads, MetricKind::Logarithmic).unwrap();
        let mut quad = ComplexMatrix::zeros(2, 2);
        for g in &grads {
            quad += log_kernel_quadrature(rho.hermitian(), g);
        }
        let err = frobenius(&(closed.as_matrix() - &quad)) / frobenius(&quad);
        assert!(err < 1e-3, "relative error {err}");
        // At ρ ∝ I both Hamiltonians coincide.
        let mixed = DensityMatrix::maximally_mixed(2);
        let a = hamiltonian_gradient(mixed.hermitian(), &grads, MetricKind::AntiCommutator).unwrap();
        let l = hamiltonian_gradient(mixed.hermitian(), &grads, MetricKind::Logarithmic).unwrap();
        assert!(frobenius(&(a.as_matrix() - l.as_matrix())) < 1e-12);
    }

    #[test]
    fn constant_path_is_trivial() {
        let b = LindbladBasis::pauli();
        let r = diag(0.7);
        for kind in [MetricKind::AntiCommutator, MetricKind::Logarithmic] {
            let (path, rep) = solve_w2_direct(&b, &r, &r, 4, kind, &DirectOptions::default()).unwrap();
            assert!(rep.distance < 1e-8);
            assert!(rep.optimality.hj_residual < 1e-8);
            assert!(path.continuity_residual(&b) < 1e-12);
        }
        let (path, rep) = solve_w2a_conic(&b, &r, &r, 4, &ConicOptions::default()).unwrap();
        assert!(rep.distance < 1e-6, "{}", rep.distance);
        assert!(path.momenta().iter().all(|m| m.norm() < 1e-5));
    }

    #[test]
    fn backends_agree_on_qubit_flip() {
        let b = LindbladBasis::pauli();
        let (_, direct) = solve_w2_direct(&b, &diag(0.9), &diag(0.1), 8, MetricKind::AntiCommutator, &DirectOptions::default()).unwrap();
        let (path, conic) = solve_w2a_conic(&b, &diag(0.9), &diag(0.1), 8, &ConicOptions::default()).unwrap();
        assert!((direct.distance - conic.distance).abs() < 1e-3 * direct.distance);
        assert!(path.continuity_residual(&b) < 1e-10);
    }

    #[test]
    fn backends_agree_for_qutrit() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let b = LindbladBasis::gell_mann(3).unwrap();
        let r0 = random::density(3, &mut rng);
        let r1 = random::density(3, &mut rng);
        let opts = ConicOptions { tolerance: 1e-9, ..Default::default() };
        let (_, conic) = solve_w2a_conic(&b, &r0, &r1, 2, &opts).unwrap();
        let (_, direct) = solve_w2_direct(&b, &r0, &r1, 2, MetricKind::AntiCommutator, &DirectOptions::default()).unwrap();
        assert!((direct.distance - conic.distance).abs() < 1e-6 * direct.distance, "{} vs {}", conic.distance, direct.distance);
    }

    #[test]
    fn time_refinement() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let opts = ConicOptions { tolerance: 1e-10, ..Default::default() };
        // Full Pauli basis on qubits: the discrete distance does not depend on T.
        let b = LindbladBasis::pauli();
        let (r0, r1) = (random::density(2, &mut rng), random::density(2, &mut rng));
        let d8 = solve_w2a_conic(&b, &r0, &r1, 8, &opts).unwrap().1.distance;
        let d64 = solve_w2a_conic(&b, &r0, &r1, 64, &opts).unwrap().1.distance;
        assert!((d8 - d64).abs() < 1e-9, "{d8} {d64}");
        // Qutrits: second-order convergence, approached from below.
        let b = LindbladBasis::gell_mann(3).unwrap();
        let (r0, r1) = (random::density(3, &mut rng), random::density(3, &mut rng));
        let d: Vec<f64> = [8, 16, 32]
            .iter()
            .map(|&t| solve_w2a_conic(&b, &r0, &r1, t, &opts).unwrap().1.distance)
            .collect();
        let ratio = (d[1] - d[0]) / (d[2] - d[1]);
        assert!(d[0] < d[1] && d[1] < d[2], "{d:?}");
        assert!((ratio - 4.0).abs() < 0.2, "{ratio}");
    }

    #[test]
    fn errors() {
        let b = LindbladBasis::pauli();
        assert!(solve_w2_direct(&b, &diag(0.5), &diag(0.2), 1, MetricKind::AntiCommutator, &DirectOptions::default()).is_err());
        let r3 = DensityMatrix::maximally_mixed(3);
        assert!(matches!(
            solve_w2a_conic(&b, &r3, &r3, 4, &ConicOptions::default()),
            Err(Error::DimensionMismatch { .. })
        ));
        assert_eq!("direct".parse::<Backend>().unwrap(), Backend::Direct);
        let _ = pauli::x();
    }
}
