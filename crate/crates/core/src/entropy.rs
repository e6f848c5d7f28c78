//! Von Neumann entropy and its Wasserstein gradient flows.
//!
//! Both flows have the form `ρ̇ = −∇_L* M_ρ(∇_L log ρ)`. With the anti-commutator product this is
//! a nonlinear second-order equation; with the Kubo–Mori product `M_ρ(∇_L log ρ) = ∇_L ρ` and the
//! flow is the linear heat equation `ρ̇ = Δ_L ρ`.
//!
//! Integration is explicit RK4. A trial step whose stages or endpoint leave the positive-definite
//! cone (within `10·ε_pd`), or whose endpoint has lower entropy, is retried with half the step,
//! at most 20 times.

use crate::error::{Error, Result};
use crate::herm::{
    c, eigh_matrix, frobenius, hermitian_part, BlockField, BlockKind, ComplexMatrix,
    DensityMatrix, EigenDecomposition, HermitianMatrix, EPS_PD,
};
use crate::lindblad::{rk4, LindbladBasis, NonCommutativeProduct};
use crate::metric::{MetricKind, Multiplier};

/// Maximum number of sub-step halvings before a step is reported as failed.
pub const MAX_HALVINGS: usize = 20;

/// States closer than this to singular are refused.
pub const SINGULAR_MARGIN: f64 = 10.0 * EPS_PD;

/// Largest entropy decrease tolerated on an accepted sub-step.
pub const ENTROPY_SLACK: f64 = 1e-12;

fn spectrum_checked(m: &ComplexMatrix) -> Result<EigenDecomposition> {
    let e = eigh_matrix(m)?;
    if e.eigenvalues[0] <= SINGULAR_MARGIN {
        return Err(Error::NotPositiveDefinite(e.eigenvalues[0]));
    }
    Ok(e)
}

fn entropy_of(e: &EigenDecomposition) -> f64 {
    -e.eigenvalues.iter().map(|&p| p * p.ln()).sum::<f64>()
}

/// `S(ρ) = −tr(ρ log ρ)`.
pub fn entropy(rho: &DensityMatrix) -> Result<f64> {
    Ok(entropy_of(&spectrum_checked(rho.as_matrix())?))
}

pub(crate) fn log_checked(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    Ok(spectrum_checked(m)?.with_spectrum(f64::ln))
}

/// `−∇_L* M_ρ(∇_L log ρ)` on raw matrices (no trace requirement).
pub(crate) fn entropy_gradient_raw(
    basis: &LindbladBasis,
    rho: &ComplexMatrix,
    kind: MetricKind,
) -> Result<ComplexMatrix> {
    let g = basis.grad_raw(&log_checked(rho)?);
    let m = Multiplier::new(&HermitianMatrix::from_raw(rho.clone()), kind)?;
    let blocks: Vec<ComplexMatrix> = g.iter().map(|b| m.apply(b)).collect();
    Ok(-basis.div_raw(&blocks))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowOptions {
    pub t_final: f64,
    pub dt: f64,
    /// Record every this many steps (the final state is always recorded).
    pub record_every: usize,
}

impl FlowOptions {
    /// Records about 1000 states over the run.
    pub fn new(t_final: f64, dt: f64) -> Self {
        let steps = if dt > 0.0 { (t_final / dt).ceil().max(1.0) as usize } else { 1 };
        Self {
            t_final,
            dt,
            record_every: (steps / 1000).max(1),
        }
    }

    pub fn with_record_every(mut self, k: usize) -> Self {
        self.record_every = k.max(1);
        self
    }

    fn validate(&self) -> Result<usize> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {}", self.dt)));
        }
        if !(self.t_final >= 0.0) || !self.t_final.is_finite() {
            return Err(Error::InvalidArgument(format!("final time must be non-negative, got {}", self.t_final)));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidArgument("record_every must be at least 1".into()));
        }
        Ok((self.t_final / self.dt - 1e-9).ceil().max(0.0) as usize)
    }
}

/// Trajectory of a field of matrices `ρ(x)` with quadrature weight `h`.
#[derive(Debug, Clone)]
pub(crate) struct RawTrace {
    pub times: Vec<f64>,
    pub states: Vec<Vec<ComplexMatrix>>,
    pub entropies: Vec<f64>,
    pub min_eigenvalues: Vec<f64>,
    pub mass_drifts: Vec<f64>,
    pub min_entropy_increment: f64,
    pub steps: usize,
    pub halvings: usize,
}

struct Snapshot {
    entropy: f64,
    min_eig: f64,
    mass: f64,
}

fn snapshot(field: &[ComplexMatrix], h: f64) -> Result<Snapshot> {
    let mut s = 0.0;
    let mut min = f64::INFINITY;
    let mut mass = 0.0;
    for m in field {
        let e = spectrum_checked(m)?;
        s += entropy_of(&e);
        min = min.min(e.eigenvalues[0]);
        mass += e.eigenvalues.sum();
    }
    Ok(Snapshot {
        entropy: h * s,
        min_eig: min,
        mass: h * mass,
    })
}

fn rk4_field(
    x: &[ComplexMatrix],
    dt: f64,
    rhs: &impl Fn(&[ComplexMatrix]) -> Result<Vec<ComplexMatrix>>,
) -> Result<Vec<ComplexMatrix>> {
    let axpy = |a: &[ComplexMatrix], k: &[ComplexMatrix], s: f64| -> Vec<ComplexMatrix> {
        a.iter().zip(k).map(|(a, k)| a + k * c(s, 0.0)).collect()
    };
    let k1 = rhs(x)?;
    let k2 = rhs(&axpy(x, &k1, 0.5 * dt))?;
    let k3 = rhs(&axpy(x, &k2, 0.5 * dt))?;
    let k4 = rhs(&axpy(x, &k3, dt))?;
    Ok((0..x.len())
        .map(|i| {
            let inc = (&k1[i] + &k2[i] * c(2.0, 0.0) + &k3[i] * c(2.0, 0.0) + &k4[i]) * c(dt / 6.0, 0.0);
            hermitian_part(&(&x[i] + inc))
        })
        .collect())
}

fn is_positivity_failure(e: &Error) -> bool {
    matches!(e, Error::NotPositiveDefinite(_) | Error::OutsideDomain(_))
}

/// Advances by `dt`, halving the sub-step whenever a trial sub-step leaves the positive cone
/// or lowers the entropy. Returns the new state, its snapshot and the number of halvings used.
fn guarded_step(
    x: &[ComplexMatrix],
    entropy0: f64,
    dt: f64,
    h: f64,
    step: usize,
    rhs: &impl Fn(&[ComplexMatrix]) -> Result<Vec<ComplexMatrix>>,
) -> Result<(Vec<ComplexMatrix>, Snapshot, usize)> {
    let mut state = x.to_vec();
    let mut entropy = entropy0;
    let mut snap = None;
    let mut remaining = dt;
    let mut sub = dt;
    let mut halvings = 0;
    while remaining > 1e-15 * dt {
        let hstep = sub.min(remaining);
        let trial = rk4_field(&state, hstep, rhs).and_then(|s| snapshot(&s, h).map(|sn| (s, sn)));
        let rejected = match trial {
            Ok((s, sn)) if sn.entropy >= entropy - ENTROPY_SLACK => {
                entropy = sn.entropy;
                state = s;
                snap = Some(sn);
                remaining -= hstep;
                None
            }
            Ok((_, sn)) => Some(Error::EntropyDecrease {
                step,
                decrease: entropy - sn.entropy,
            }),
            Err(e) if is_positivity_failure(&e) => Some(Error::PositivityLost {
                step,
                min_eigenvalue: match e {
                    Error::NotPositiveDefinite(v) => v,
                    _ => f64::NAN,
                },
            }),
            Err(e) => return Err(e),
        };
        if let Some(e) = rejected {
            halvings += 1;
            if halvings > MAX_HALVINGS {
                return Err(e);
            }
            sub *= 0.5;
        }
    }
    let snap = match snap {
        Some(s) => s,
        None => snapshot(&state, h)?,
    };
    Ok((state, snap, halvings))
}

pub(crate) fn integrate(
    field0: Vec<ComplexMatrix>,
    h: f64,
    opts: &FlowOptions,
    rhs: impl Fn(&[ComplexMatrix]) -> Result<Vec<ComplexMatrix>>,
) -> Result<RawTrace> {
    let steps = opts.validate()?;
    let snap0 = snapshot(&field0, h).map_err(|e| match e {
        Error::NotPositiveDefinite(v) => Error::PositivityLost {
            step: 0,
            min_eigenvalue: v,
        },
        e => e,
    })?;
    let mass0 = snap0.mass;
    let mut trace = RawTrace {
        times: vec![0.0],
        states: vec![field0.clone()],
        entropies: vec![snap0.entropy],
        min_eigenvalues: vec![snap0.min_eig],
        mass_drifts: vec![0.0],
        min_entropy_increment: f64::INFINITY,
        steps,
        halvings: 0,
    };
    let dt = if steps > 0 { opts.t_final / steps as f64 } else { 0.0 };
    let mut state = field0;
    let mut s_prev = snap0.entropy;
    for k in 1..=steps {
        let (next, snap, halvings) = guarded_step(&state, s_prev, dt, h, k, &rhs)?;
        trace.halvings += halvings;
        trace.min_entropy_increment = trace.min_entropy_increment.min(snap.entropy - s_prev);
        s_prev = snap.entropy;
        state = next;
        if k % opts.record_every == 0 || k == steps {
            trace.times.push(k as f64 * dt);
            trace.states.push(state.clone());
            trace.entropies.push(snap.entropy);
            trace.min_eigenvalues.push(snap.min_eig);
            trace.mass_drifts.push((snap.mass - mass0).abs());
        }
    }
    if trace.min_entropy_increment == f64::INFINITY {
        trace.min_entropy_increment = 0.0;
    }
    Ok(trace)
}

/// Recorded trajectory of a matrix flow.
#[derive(Debug, Clone)]
pub struct FlowTrace {
    times: Vec<f64>,
    states: Vec<DensityMatrix>,
    entropies: Vec<f64>,
    min_eigenvalues: Vec<f64>,
    trace_drifts: Vec<f64>,
    min_entropy_increment: f64,
    steps: usize,
    halvings: usize,
}

impl FlowTrace {
    fn from_raw(raw: RawTrace) -> Result<Self> {
        let states = raw
            .states
            .into_iter()
            .map(|mut f| DensityMatrix::new(HermitianMatrix::from_raw(f.remove(0))))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            times: raw.times,
            states,
            entropies: raw.entropies,
            min_eigenvalues: raw.min_eigenvalues,
            trace_drifts: raw.mass_drifts,
            min_entropy_increment: raw.min_entropy_increment,
            steps: raw.steps,
            halvings: raw.halvings,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[DensityMatrix] {
        &self.states
    }

    pub fn entropies(&self) -> &[f64] {
        &self.entropies
    }

    pub fn min_eigenvalues(&self) -> &[f64] {
        &self.min_eigenvalues
    }

    /// `|tr ρ(t) − tr ρ(0)|` at each recorded time.
    pub fn trace_drifts(&self) -> &[f64] {
        &self.trace_drifts
    }

    /// Smallest entropy change over all accepted steps, recorded or not.
    pub fn min_entropy_increment(&self) -> f64 {
        self.min_entropy_increment
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn halvings(&self) -> usize {
        self.halvings
    }

    pub fn last(&self) -> &DensityMatrix {
        self.states.last().expect("trace always holds the initial state")
    }

    /// `‖ρ(t) − I/n‖_F` at each recorded time.
    pub fn distances_to_uniform(&self) -> Vec<f64> {
        self.states
            .iter()
            .map(|s| {
                let n = s.dim();
                frobenius(&(s.as_matrix() - ComplexMatrix::identity(n, n) * c(1.0 / n as f64, 0.0)))
            })
            .collect()
    }
}

fn check_basis(basis: &LindbladBasis, rho: &DensityMatrix) -> Result<()> {
    if basis.dim() != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            got: rho.dim(),
        });
    }
    Ok(())
}

/// One RK4 step of `ρ̇ = −∇_L* M_ρ(∇_L log ρ)` with a caller-supplied product, positivity-guarded.
pub fn flow_step_generic(
    basis: &LindbladBasis,
    rho: &DensityMatrix,
    dt: f64,
    mult: &dyn NonCommutativeProduct,
) -> Result<DensityMatrix> {
    check_basis(basis, rho)?;
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    let rhs = |x: &[ComplexMatrix]| -> Result<Vec<ComplexMatrix>> {
        let m = &x[0];
        let r = DensityMatrix::new(HermitianMatrix::from_raw(m.clone()))?;
        let g = BlockField::from_raw(BlockKind::SkewHermitian, basis.grad_raw(&log_checked(m)?));
        let u = mult.apply(&r, &g)?;
        Ok(vec![-basis.div_raw(u.blocks())])
    };
    let s0 = entropy(rho)?;
    let (next, _, _) = guarded_step(&[rho.as_matrix().clone()], s0, dt, 1.0, 1, &rhs)?;
    DensityMatrix::new(HermitianMatrix::from_raw(next.into_iter().next().expect("one point")))
}

/// One RK4 step of the linear heat equation `ρ̇ = Δ_L ρ`.
pub fn heat_step(basis: &LindbladBasis, rho: &DensityMatrix, dt: f64) -> Result<DensityMatrix> {
    check_basis(basis, rho)?;
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    let next = rk4(rho.as_matrix(), dt, |x| basis.laplacian_raw(x));
    let next = HermitianMatrix::from_raw(hermitian_part(&next));
    let min = next.min_eigenvalue()?;
    if min <= SINGULAR_MARGIN {
        return Err(Error::PositivityLost {
            step: 1,
            min_eigenvalue: min,
        });
    }
    DensityMatrix::new(next)
}

/// Entropy gradient flow for the anti-commutator metric,
/// `ρ̇ = −½∇_L*(ρ∇_L log ρ + ∇_L log ρ ρ)`.
pub fn flow_anticomm(basis: &LindbladBasis, rho0: &DensityMatrix, opts: &FlowOptions) -> Result<FlowTrace> {
    check_basis(basis, rho0)?;
    let raw = integrate(vec![rho0.as_matrix().clone()], 1.0, opts, |x| {
        Ok(vec![entropy_gradient_raw(basis, &x[0], MetricKind::AntiCommutator)?])
    })?;
    FlowTrace::from_raw(raw)
}

/// Entropy gradient flow for the logarithmic metric, integrated as `ρ̇ = Δ_L ρ`.
pub fn flow_log(basis: &LindbladBasis, rho0: &DensityMatrix, opts: &FlowOptions) -> Result<FlowTrace> {
    check_basis(basis, rho0)?;
    let raw = integrate(vec![rho0.as_matrix().clone()], 1.0, opts, |x| {
        Ok(vec![basis.laplacian_raw(&x[0])])
    })?;
    FlowTrace::from_raw(raw)
}

/// Dispatches on the metric.
pub fn entropy_flow(
    basis: &LindbladBasis,
    rho0: &DensityMatrix,
    kind: MetricKind,
    opts: &FlowOptions,
) -> Result<FlowTrace> {
    match kind {
        MetricKind::AntiCommutator => flow_anticomm(basis, rho0, opts),
        MetricKind::Logarithmic => flow_log(basis, rho0, opts),
    }
}
