//! Orthonormal real coordinates on Hermitian matrices.
//!
//! The frame is `E_0 = I/√n` followed by the generalized Gell-Mann matrices normalized to
//! `tr(E_a E_b) = δ_ab`. Coordinates `c_a = tr(E_a X)` are real for Hermitian `X`, and the
//! traceless subspace is spanned by `E_1, …, E_{n²−1}`.

use nalgebra::DVector;

use crate::herm::{c, real_inner, ComplexMatrix, HermitianMatrix};

/// Generalized Gell-Mann matrices, normalized to `tr(λ_a λ_b) = 2δ_ab`.
///
/// Order: symmetric pairs and antisymmetric pairs interleaved per `(j, k)`, `j < k`, then the
/// diagonal ones. For `n = 2` this is `σx, σy, σz`.
pub fn gell_mann(n: usize) -> Vec<HermitianMatrix> {
    scaled_gell_mann(n, 1.0)
        .into_iter()
        .map(HermitianMatrix::from_raw)
        .collect()
}

fn scaled_gell_mann(n: usize, s: f64) -> Vec<ComplexMatrix> {
    let mut out = Vec::with_capacity(n * n - 1);
    for j in 0..n {
        for k in (j + 1)..n {
            let mut sym = ComplexMatrix::zeros(n, n);
            sym[(j, k)] = c(s, 0.0);
            sym[(k, j)] = c(s, 0.0);
            out.push(sym);
            let mut anti = ComplexMatrix::zeros(n, n);
            anti[(j, k)] = c(0.0, -s);
            anti[(k, j)] = c(0.0, s);
            out.push(anti);
        }
    }
    for l in 1..n {
        let norm = s * (2.0 / (l * (l + 1)) as f64).sqrt();
        let mut d = ComplexMatrix::zeros(n, n);
        for m in 0..l {
            d[(m, m)] = c(norm, 0.0);
        }
        d[(l, l)] = c(-(l as f64) * norm, 0.0);
        out.push(d);
    }
    out
}

#[derive(Debug, Clone)]
pub struct HermitianFrame {
    n: usize,
    elements: Vec<ComplexMatrix>,
}

impl HermitianFrame {
    pub fn new(n: usize) -> Self {
        let mut elements = vec![ComplexMatrix::identity(n, n) * c(1.0 / (n as f64).sqrt(), 0.0)];
        elements.extend(scaled_gell_mann(n, std::f64::consts::FRAC_1_SQRT_2));
        Self { n, elements }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// All `n²` elements, identity direction first.
    pub fn elements(&self) -> &[ComplexMatrix] {
        &self.elements
    }

    /// The `n² − 1` traceless elements.
    pub fn traceless(&self) -> &[ComplexMatrix] {
        &self.elements[1..]
    }

    pub fn coords(&self, x: &ComplexMatrix) -> DVector<f64> {
        DVector::from_iterator(
            self.elements.len(),
            self.elements.iter().map(|e| real_inner(e, x)),
        )
    }

    pub fn traceless_coords(&self, x: &ComplexMatrix) -> DVector<f64> {
        DVector::from_iterator(
            self.elements.len() - 1,
            self.traceless().iter().map(|e| real_inner(e, x)),
        )
    }

    pub fn from_coords(&self, coords: &[f64]) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(self.n, self.n);
        for (e, &x) in self.elements.iter().zip(coords) {
            m += e * c(x, 0.0);
        }
        m
    }

    pub fn from_traceless_coords(&self, coords: &[f64]) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(self.n, self.n);
        for (e, &x) in self.traceless().iter().zip(coords) {
            m += e * c(x, 0.0);
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::herm::{frobenius, pauli};

    #[test]
    fn frame_is_orthonormal() {
        for n in 1..=5 {
            let f = HermitianFrame::new(n);
            assert_eq!(f.elements().len(), n * n);
            for (a, ea) in f.elements().iter().enumerate() {
                assert!(frobenius(&(ea - ea.adjoint())) < 1e-15);
                for (b, eb) in f.elements().iter().enumerate() {
                    let g = real_inner(ea, eb);
                    let want = if a == b { 1.0 } else { 0.0 };
                    assert!((g - want).abs() < 1e-14, "n={n} a={a} b={b} g={g}");
                }
            }
            for e in f.traceless() {
                assert!(crate::herm::complex_trace(e).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn gell_mann_two_is_pauli() {
        let g = gell_mann(2);
        assert_eq!(g[0], pauli::x());
        assert_eq!(g[1], pauli::y());
        assert_eq!(g[2], pauli::z());
    }

    #[test]
    fn coordinates_round_trip() {
        let f = HermitianFrame::new(3);
        let h = HermitianMatrix::from_diagonal(&[0.5, 0.3, 0.2]);
        let x = f.coords(h.as_matrix());
        let back = f.from_coords(x.as_slice());
        assert!(frobenius(&(back - h.as_matrix())) < 1e-15);
    }
}
