//! Quasi-Newton minimization with central finite-difference gradients.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub(crate) struct BfgsOptions {
    pub max_iterations: usize,
    /// Stop when `‖g‖_∞ ≤ gradient_tolerance · max(1, |f|)`.
    pub gradient_tolerance: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct BfgsResult {
    pub x: DVector<f64>,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub converged: bool,
}

const ARMIJO: f64 = 1e-4;
/// After a failed line search, the point is accepted if the gradient is this small.
const STALL_TOLERANCE: f64 = 1e-6;

/// BFGS on the inverse Hessian with a backtracking Armijo line search.
pub(crate) fn bfgs(
    mut f: impl FnMut(&DVector<f64>) -> Result<f64>,
    mut grad: impl FnMut(&DVector<f64>) -> Result<DVector<f64>>,
    x0: DVector<f64>,
    opts: &BfgsOptions,
) -> Result<BfgsResult> {
    let d = x0.len();
    let mut x = x0;
    let mut fx = f(&x)?;
    if d == 0 {
        return Ok(BfgsResult {
            x,
            iterations: 0,
            gradient_norm: 0.0,
            converged: true,
        });
    }
    let mut g = grad(&x)?;
    let mut hinv = DMatrix::<f64>::identity(d, d);
    let mut first = true;
    for it in 0..opts.max_iterations {
        let gnorm = g.amax();
        if gnorm <= opts.gradient_tolerance * fx.abs().max(1.0) {
            return Ok(BfgsResult {
                x,
                iterations: it,
                gradient_norm: gnorm,
                converged: true,
            });
        }
        let mut p = -(&hinv * &g);
        let mut slope = p.dot(&g);
        if slope >= 0.0 {
            hinv = DMatrix::identity(d, d);
            p = -g.clone();
            slope = p.dot(&g);
        }
        if first {
            // Unit first step in the steepest-descent direction can be far off scale.
            let s = (1.0 / gnorm).min(1.0);
            p *= s;
            slope *= s;
            first = false;
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let xn = &x + &p * step;
            match f(&xn) {
                Ok(fn_) if fn_.is_finite() && fn_ <= fx + ARMIJO * step * slope => {
                    accepted = Some((xn, fn_));
                    break;
                }
                _ => step *= 0.5,
            }
        }
        let Some((xn, fn_)) = accepted else {
            if gnorm <= STALL_TOLERANCE * fx.abs().max(1.0) {
                return Ok(BfgsResult {
                    x,
                    iterations: it,
                    gradient_norm: gnorm,
                    converged: true,
                });
            }
            return Err(Error::LineSearchFailure(it));
        };
        let gn = grad(&xn)?;
        let s = &xn - &x;
        let yv = &gn - &g;
        let sy = s.dot(&yv);
        if sy > 1e-12 * s.norm() * yv.norm() {
            if it == 0 {
                let yy = yv.dot(&yv);
                hinv = DMatrix::identity(d, d) * (sy / yy);
            }
            let rho = 1.0 / sy;
            let hy = &hinv * &yv;
            let yhy = yv.dot(&hy);
            // H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ
            hinv += (&s * s.transpose()) * (rho * rho * yhy + rho)
                - (&hy * s.transpose() + &s * hy.transpose()) * rho;
        }
        x = xn;
        fx = fn_;
        g = gn;
    }
    let gnorm = g.amax();
    Ok(BfgsResult {
        x,
        iterations: opts.max_iterations,
        gradient_norm: gnorm,
        converged: gnorm <= opts.gradient_tolerance * fx.abs().max(1.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_rosenbrock() {
        let f = |x: &DVector<f64>| Ok((1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2));
        let g = |x: &DVector<f64>| {
            Ok(DVector::from_vec(vec![
                -2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] * x[0]),
                200.0 * (x[1] - x[0] * x[0]),
            ]))
        };
        let opts = BfgsOptions {
            max_iterations: 500,
            gradient_tolerance: 1e-10,
        };
        let r = bfgs(f, g, DVector::from_vec(vec![-1.2, 1.0]), &opts).unwrap();
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-7 && (r.x[1] - 1.0).abs() < 1e-7);
    }
}
