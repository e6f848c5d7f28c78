//! Operator-splitting solver for the time-discretized convex transport problem.
//!
//! Unknowns on a uniform time grid with `T` steps: node densities `ρ_j(x)`, and per step and grid
//! point one general complex momentum `u_{j,k}` per Lindblad operator plus, when a spatial grid is
//! present, one spatial momentum `q_j`. The discrete continuity equation is
//!
//! `ρ_{j+1} − ρ_j = Δt (∇_L* skew(u_j) − div_x herm(q_j))`
//!
//! and the objective `Σ_j Δt h Σ_x [γ Σ_k tr(u*ρ̄⁻¹u) + tr(q*ρ̄⁻¹q)]` is written through epigraph
//! blocks `[[ρ̄_j, m], [m*, S]] ⪰ 0` with `ρ̄_j = (ρ_j + ρ_{j+1})/2`.
//!
//! ADMM alternates
//! * an affine step: least-squares fit of `(ρ, m, S)` to the block targets subject to
//!   continuity and the boundary marginals. Its KKT system decouples over the eigenmodes of
//!   `Δ_L + div_x grad_x` into one `(2T−1)`-dimensional system per mode, factored once;
//! * a projection of every `2n×2n` block onto the PSD cone.
//!
//! with over-relaxation and residual balancing of the penalty.


use nalgebra::{DMatrix, DVector, Dyn, LU, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::HermitianFrame;
use crate::grid::Grid;
use crate::herm::{c, hermitian_part, real_inner, skew_part, ComplexMatrix, TAU_TRACE};
use crate::lindblad::LindbladBasis;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConicOptions {
    /// Relative primal/dual residual target.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub relaxation: f64,
    /// Initial penalty; `None` picks a scale from the problem weights.
    pub penalty: Option<f64>,
    /// Residual-balancing interval in iterations (0 disables).
    pub adapt_every: usize,
}

impl Default for ConicOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            max_iterations: 50_000,
            relaxation: 1.6,
            penalty: None,
            adapt_every: 20,
        }
    }
}

pub(crate) struct ConicSetup<'a> {
    pub basis: &'a LindbladBasis,
    pub grid: Option<&'a Grid>,
    pub gamma: f64,
    pub steps: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct ConicOutcome {
    /// `[T+1][G]` node densities (x-side, continuity holds exactly).
    pub rho: Vec<Vec<ComplexMatrix>>,
    /// `[T][G][C]` momenta, Lindblad channels first then the spatial one.
    pub momenta: Vec<Vec<Vec<ComplexMatrix>>>,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// `Σ_b w_b tr(S_b)` on the cone side.
    pub objective: f64,
    /// `max_b tr(S_b) − tr(m_b* P_b⁻¹ m_b)` on the cone side.
    pub epigraph_gap: f64,
    pub converged: bool,
}

enum ModeSolver {
    Zero,
    Factored(LU<f64, Dyn, Dyn>),
}

struct Modes {
    frame: HermitianFrame,
    vx: DMatrix<f64>,
    vl: DMatrix<f64>,
    solvers: Vec<ModeSolver>, // index i * n² + l
}

fn laplacian_coords(basis: &LindbladBasis, frame: &HermitianFrame) -> DMatrix<f64> {
    let d = frame.elements().len();
    let mut k = DMatrix::zeros(d, d);
    for (b, eb) in frame.elements().iter().enumerate() {
        let lap = basis.laplacian_raw(eb);
        for (a, ea) in frame.elements().iter().enumerate() {
            k[(a, b)] = real_inner(ea, &lap);
        }
    }
    (&k + k.transpose()) * 0.5
}

impl Modes {
    fn new(setup: &ConicSetup<'_>, channels: usize) -> Result<Self> {
        let n = setup.basis.dim();
        let frame = HermitianFrame::new(n);
        let kl = laplacian_coords(setup.basis, &frame);
        let kx = match setup.grid {
            Some(g) => {
                let gm = g.gradient_matrix();
                -(gm.transpose() * gm)
            }
            None => DMatrix::zeros(1, 1),
        };
        let el = SymmetricEigen::new(kl);
        let ex = SymmetricEigen::new(kx);
        let scale = el
            .eigenvalues
            .iter()
            .chain(ex.eigenvalues.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(1.0);
        let t = setup.steps;
        let dt = 1.0 / t as f64;
        let nb = channels as f64;
        let mut solvers = Vec::new();
        let mut zeros = 0;
        for &kxv in ex.eigenvalues.iter() {
            for &klv in el.eigenvalues.iter() {
                let kappa = kxv + klv;
                if kappa.abs() <= 1e-10 * scale {
                    zeros += 1;
                    solvers.push(ModeSolver::Zero);
                    continue;
                }
                let size = 2 * t - 1;
                let mut m = DMatrix::zeros(size, size);
                let r = |j: usize| j - 1;
                let l = |j: usize| t - 1 + j;
                for j in 0..t {
                    if j + 1 < t {
                        m[(j, r(j + 1))] += 1.0;
                    }
                    if j >= 1 {
                        m[(j, r(j))] -= 1.0;
                    }
                    m[(j, l(j))] += dt * dt * kappa;
                }
                for j in 1..t {
                    let row = t - 1 + j;
                    if j >= 2 {
                        m[(row, r(j - 1))] += nb / 2.0;
                    }
                    m[(row, r(j))] += nb;
                    if j + 1 < t {
                        m[(row, r(j + 1))] += nb / 2.0;
                    }
                    m[(row, l(j - 1))] += 4.0;
                    m[(row, l(j))] -= 4.0;
                }
                let lu = m.lu();
                if !lu.is_invertible() {
                    return Err(Error::SingularSystem("transport KKT system".into()));
                }
                solvers.push(ModeSolver::Factored(lu));
            }
        }
        if zeros != 1 {
            return Err(Error::SingularSystem(format!(
                "expected a one-dimensional kernel of the combined Laplacian, found {zeros}"
            )));
        }
        Ok(Self {
            frame,
            vx: ex.eigenvectors,
            vl: el.eigenvectors,
            solvers,
        })
    }

    /// Hermitian field `[G]` to modal coordinates `V_xᵀ C V_L`.
    fn forward(&self, field: &[ComplexMatrix]) -> DMatrix<f64> {
        let d = self.frame.elements().len();
        let cm = DMatrix::from_fn(field.len(), d, |x, a| {
            real_inner(&self.frame.elements()[a], &field[x])
        });
        self.vx.transpose() * cm * &self.vl
    }

    fn backward(&self, modal: &DMatrix<f64>) -> Vec<ComplexMatrix> {
        let cm = &self.vx * modal * self.vl.transpose();
        (0..cm.nrows())
            .map(|x| {
                let row: Vec<f64> = cm.row(x).iter().copied().collect();
                self.frame.from_coords(&row)
            })
            .collect()
    }
}

struct Layout {
    t: usize,
    g: usize,
    channels: usize,
}

impl Layout {
    fn index(&self, j: usize, x: usize, ch: usize) -> usize {
        (j * self.g + x) * self.channels + ch
    }

    fn blocks(&self) -> usize {
        self.t * self.g * self.channels
    }
}

fn assemble(p: &ComplexMatrix, m: &ComplexMatrix, s: &ComplexMatrix) -> ComplexMatrix {
    let n = p.nrows();
    let mut z = ComplexMatrix::zeros(2 * n, 2 * n);
    z.view_mut((0, 0), (n, n)).copy_from(p);
    z.view_mut((0, n), (n, n)).copy_from(m);
    z.view_mut((n, 0), (n, n)).copy_from(&m.adjoint());
    z.view_mut((n, n), (n, n)).copy_from(s);
    z
}

fn split(z: &ComplexMatrix, n: usize) -> (ComplexMatrix, ComplexMatrix, ComplexMatrix) {
    (
        z.view((0, 0), (n, n)).into_owned(),
        z.view((0, n), (n, n)).into_owned(),
        z.view((n, n), (n, n)).into_owned(),
    )
}

pub(crate) fn psd_projection(z: &ComplexMatrix) -> ComplexMatrix {
    let h = hermitian_part(z);
    let e = SymmetricEigen::new(h.clone());
    if e.eigenvalues.iter().all(|&v| v >= 0.0) {
        return h;
    }
    let mut scaled = e.eigenvectors.clone();
    for (j, &v) in e.eigenvalues.iter().enumerate() {
        scaled.column_mut(j).scale_mut(v.max(0.0));
    }
    let out = scaled * e.eigenvectors.adjoint();
    hermitian_part(&out)
}

fn sq_norm(blocks: &[ComplexMatrix]) -> f64 {
    blocks.iter().map(|b| b.norm_squared()).sum()
}

pub(crate) fn solve_conic(
    setup: &ConicSetup<'_>,
    rho0: &[ComplexMatrix],
    rho1: &[ComplexMatrix],
    opts: &ConicOptions,
) -> Result<ConicOutcome> {
    let t = setup.steps;
    if t < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 time steps, got {t}")));
    }
    if !(opts.tolerance > 0.0) || !(opts.relaxation > 0.0 && opts.relaxation < 2.0) {
        return Err(Error::InvalidArgument("invalid conic solver options".into()));
    }
    if !(setup.gamma > 0.0) {
        return Err(Error::InvalidArgument(format!("gamma must be positive, got {}", setup.gamma)));
    }
    let n = setup.basis.dim();
    let g = setup.grid.map_or(1, |gr| gr.points());
    if rho0.len() != g || rho1.len() != g {
        return Err(Error::DimensionMismatch {
            expected: g,
            got: rho0.len().min(rho1.len()),
        });
    }
    let nl = setup.basis.len();
    let spatial = setup.grid.is_some();
    if rho0 == rho1 {
        // the constant path is optimal with zero action
        let channels = nl + usize::from(spatial);
        return Ok(ConicOutcome {
            rho: vec![rho0.to_vec(); t + 1],
            momenta: vec![vec![vec![ComplexMatrix::zeros(n, n); channels]; g]; t],
            iterations: 0,
            primal_residual: 0.0,
            dual_residual: 0.0,
            objective: 0.0,
            epigraph_gap: 0.0,
            converged: true,
        });
    }
    let channels = nl + usize::from(spatial);
    let h = setup.grid.map_or(1.0, |gr| gr.spacing());
    let dt = 1.0 / t as f64;
    let lay = Layout { t, g, channels };
    let weight = |ch: usize| if ch < nl { dt * h * setup.gamma } else { dt * h };

    let mass = |f: &[ComplexMatrix]| f.iter().map(|m| m.trace().re).sum::<f64>() * h;
    if (mass(rho0) - mass(rho1)).abs() > TAU_TRACE {
        return Err(Error::InvalidArgument(format!(
            "marginals carry different mass ({} vs {})",
            mass(rho0),
            mass(rho1)
        )));
    }

    let modes = Modes::new(setup, channels)?;
    let r0 = modes.forward(rho0);
    let rt = modes.forward(rho1);

    // x-side state, linear interpolation start.
    let mut rho: Vec<Vec<ComplexMatrix>> = (0..=t)
        .map(|j| {
            let s = j as f64 / t as f64;
            (0..g)
                .map(|x| &rho0[x] * c(1.0 - s, 0.0) + &rho1[x] * c(s, 0.0))
                .collect()
        })
        .collect();
    let zero = ComplexMatrix::zeros(n, n);
    let mut mom: Vec<ComplexMatrix> = vec![zero.clone(); lay.blocks()];
    let mut sblk: Vec<ComplexMatrix> = vec![zero.clone(); lay.blocks()];

    let build_x = |rho: &[Vec<ComplexMatrix>], mom: &[ComplexMatrix], sblk: &[ComplexMatrix]| {
        let mut out = Vec::with_capacity(lay.blocks());
        for j in 0..t {
            for x in 0..g {
                let bar = (&rho[j][x] + &rho[j + 1][x]) * c(0.5, 0.0);
                for ch in 0..channels {
                    let b = lay.index(j, x, ch);
                    out.push(assemble(&bar, &mom[b], &sblk[b]));
                }
            }
        }
        out
    };

    let mut z: Vec<ComplexMatrix> = build_x(&rho, &mom, &sblk).iter().map(psd_projection).collect();
    let mut y: Vec<ComplexMatrix> = vec![ComplexMatrix::zeros(2 * n, 2 * n); lay.blocks()];
    let mut mu = opts.penalty.unwrap_or(dt * h * setup.gamma.min(1.0));

    let mut iterations = 0;
    let mut primal = f64::INFINITY;
    let mut dual = f64::INFINITY;
    let mut converged = false;

    while iterations < opts.max_iterations {
        iterations += 1;

        // Affine step.
        let mut pbar = vec![vec![zero.clone(); g]; t];
        let mut amat = vec![zero.clone(); lay.blocks()]; // constrained parts
        let mut free = vec![zero.clone(); lay.blocks()]; // unconstrained parts
        for j in 0..t {
            for x in 0..g {
                let mut acc = zero.clone();
                for ch in 0..channels {
                    let b = lay.index(j, x, ch);
                    let w = &z[b] - &y[b];
                    let (p, m, s) = split(&w, n);
                    acc += hermitian_part(&p);
                    sblk[b] = hermitian_part(&s) - ComplexMatrix::identity(n, n) * c(weight(ch) / mu, 0.0);
                    if ch < nl {
                        amat[b] = skew_part(&m);
                        free[b] = hermitian_part(&m);
                    } else {
                        amat[b] = hermitian_part(&m);
                        free[b] = skew_part(&m);
                    }
                }
                pbar[j][x] = acc * c(1.0 / channels as f64, 0.0);
            }
        }
        let mut chat = Vec::with_capacity(t);
        let mut phat = Vec::with_capacity(t);
        for j in 0..t {
            let mut cfield: Vec<ComplexMatrix> = (0..g)
                .map(|x| {
                    let blocks: Vec<ComplexMatrix> =
                        (0..nl).map(|k| amat[lay.index(j, x, k)].clone()).collect();
                    setup.basis.div_raw(&blocks)
                })
                .collect();
            if let Some(grid) = setup.grid {
                let q: Vec<ComplexMatrix> = (0..g).map(|x| amat[lay.index(j, x, nl)].clone()).collect();
                for (cf, d) in cfield.iter_mut().zip(grid.div_raw(&q)) {
                    *cf -= d;
                }
            }
            chat.push(modes.forward(&cfield));
            phat.push(modes.forward(&pbar[j]));
        }
        let d2 = n * n;
        let nb = channels as f64;
        let mut rhat = vec![DMatrix::<f64>::zeros(g, d2); t + 1];
        let mut lhat = vec![DMatrix::<f64>::zeros(g, d2); t];
        rhat[0] = r0.clone();
        rhat[t] = rt.clone();
        for i in 0..g {
            for l in 0..d2 {
                let idx = i * d2 + l;
                match &modes.solvers[idx] {
                    ModeSolver::Zero => {
                        for rj in rhat.iter_mut().take(t).skip(1) {
                            rj[(i, l)] = r0[(i, l)];
                        }
                    }
                    ModeSolver::Factored(lu) => {
                        let mut rhs = DVector::zeros(2 * t - 1);
                        for j in 0..t {
                            rhs[j] = dt * chat[j][(i, l)];
                        }
                        rhs[0] += r0[(i, l)];
                        rhs[t - 1] -= rt[(i, l)];
                        for j in 1..t {
                            rhs[t - 1 + j] = nb * (phat[j - 1][(i, l)] + phat[j][(i, l)]);
                        }
                        rhs[t] -= nb / 2.0 * r0[(i, l)];
                        rhs[2 * t - 2] -= nb / 2.0 * rt[(i, l)];
                        let sol = lu.solve(&rhs).ok_or_else(|| {
                            Error::SingularSystem("transport KKT solve".into())
                        })?;
                        for j in 1..t {
                            rhat[j][(i, l)] = sol[j - 1];
                        }
                        for j in 0..t {
                            lhat[j][(i, l)] = sol[t - 1 + j];
                        }
                    }
                }
            }
        }
        for (j, rj) in rhat.iter().enumerate().take(t).skip(1) {
            rho[j] = modes.backward(rj).iter().map(hermitian_part).collect();
        }
        for j in 0..t {
            let lam = modes.backward(&lhat[j]);
            let grads: Vec<Vec<ComplexMatrix>> = lam.iter().map(|lx| setup.basis.grad_raw(lx)).collect();
            let gx = setup.grid.map(|grid| grid.grad_raw(&lam));
            for x in 0..g {
                for k in 0..nl {
                    let b = lay.index(j, x, k);
                    mom[b] = &amat[b] + &grads[x][k] * c(dt, 0.0) + &free[b];
                }
                if let Some(gx) = &gx {
                    let b = lay.index(j, x, nl);
                    mom[b] = &amat[b] + &gx[x] * c(dt, 0.0) + &free[b];
                }
            }
        }

        // Cone step.
        let xb = build_x(&rho, &mom, &sblk);
        let alpha = opts.relaxation;
        let mut znew = Vec::with_capacity(lay.blocks());
        for b in 0..lay.blocks() {
            let xhat = &xb[b] * c(alpha, 0.0) + &z[b] * c(1.0 - alpha, 0.0);
            let zb = psd_projection(&(&xhat + &y[b]));
            y[b] += &xhat - &zb;
            znew.push(zb);
        }
        let r_abs: f64 = xb.iter().zip(&znew).map(|(a, b)| (a - b).norm_squared()).sum::<f64>().sqrt();
        let s_abs: f64 = mu * z.iter().zip(&znew).map(|(a, b)| (a - b).norm_squared()).sum::<f64>().sqrt();
        let xn = sq_norm(&xb).sqrt();
        let zn = sq_norm(&znew).sqrt();
        let yn = mu * sq_norm(&y).sqrt();
        primal = r_abs / xn.max(zn).max(1e-300);
        dual = s_abs / yn.max(1e-300);
        z = znew;

        if primal < opts.tolerance && dual < opts.tolerance {
            converged = true;
            break;
        }
        if opts.adapt_every > 0 && iterations % opts.adapt_every == 0 {
            let factor = if primal > 10.0 * dual {
                2.0
            } else if dual > 10.0 * primal {
                0.5
            } else {
                1.0
            };
            if factor != 1.0 {
                mu *= factor;
                for yb in &mut y {
                    *yb *= c(1.0 / factor, 0.0);
                }
            }
        }
        if iterations % 1000 == 0 {
            log::debug!("conic iteration {iterations}: primal {primal:.3e} dual {dual:.3e} penalty {mu:.3e}");
        }
    }

    let mut objective = 0.0;
    let mut gap: f64 = 0.0;
    for j in 0..t {
        for x in 0..g {
            for ch in 0..channels {
                let b = lay.index(j, x, ch);
                let (p, m, s) = split(&z[b], n);
                let trs = s.trace().re;
                objective += weight(ch) * trs;
                let kinetic = match p.clone().cholesky() {
                    Some(ch) => {
                        let sol = ch.solve(&m);
                        real_inner(&m, &sol)
                    }
                    None => f64::INFINITY,
                };
                gap = gap.max(trs - kinetic);
            }
        }
    }

    let momenta = (0..t)
        .map(|j| {
            (0..g)
                .map(|x| (0..channels).map(|ch| mom[lay.index(j, x, ch)].clone()).collect())
                .collect()
        })
        .collect();
    Ok(ConicOutcome {
        rho,
        momenta,
        iterations,
        primal_residual: primal,
        dual_residual: dual,
        objective,
        epigraph_gap: gap,
        converged,
    })
}
