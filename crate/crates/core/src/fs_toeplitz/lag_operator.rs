//! Linear maps from a two-level lag sequence to a (two-level) Toeplitz matrix
//! whose entries are fixed combinations of shifted lags.
//!
//! A sequence `V` for an `n_t x n_r` array stores `v_j(k)` at
//! `[k + n_t - 1, j + n_r - 1]`. An operator with output size
//! `(out_t, out_r)` and taps `{(c, s_k, s_j)}` produces the matrix with
//! entries
//!
//! ```text
//! M[(m, p), (n, q)] = sum_taps c * v_{p-q-s_j}(m-n-s_k)
//! ```
//!
//! with row index `m * out_r + p` (transmit index varying slowest).

use ndarray::Array2;

use crate::{Complex64, Error, Result, C_ONE, C_ZERO};

use super::BetaCoeffs;

#[derive(Debug, Clone, PartialEq)]
pub struct LagOperator {
    n_t: usize,
    n_r: usize,
    out_t: usize,
    out_r: usize,
    taps: Vec<(Complex64, isize, isize)>,
}

impl LagOperator {
    /// Plain two-level Toeplitz assembly `T(V)`.
    pub fn toeplitz(n_t: usize, n_r: usize) -> Self {
        LagOperator {
            n_t,
            n_r,
            out_t: n_t,
            out_r: n_r,
            taps: vec![(C_ONE, 0, 0)],
        }
    }

    /// Band constraint along the transmit (inner lag) dimension.
    pub fn beta_tx(n_t: usize, n_r: usize, beta: &BetaCoeffs) -> Result<Self> {
        if n_t < 2 {
            return Err(Error::DimensionMismatch(format!(
                "transmit band constraint needs n_t >= 2, got {n_t}"
            )));
        }
        Ok(LagOperator {
            n_t,
            n_r,
            out_t: n_t - 1,
            out_r: n_r,
            taps: beta.taps().iter().map(|&(c, j)| (c, j, 0)).collect(),
        })
    }

    /// Band constraint along the receive (outer lag) dimension.
    pub fn beta_rx(n_t: usize, n_r: usize, beta: &BetaCoeffs) -> Result<Self> {
        if n_r < 2 {
            return Err(Error::DimensionMismatch(format!(
                "receive band constraint needs n_r >= 2, got {n_r}"
            )));
        }
        Ok(LagOperator {
            n_t,
            n_r,
            out_t: n_t,
            out_r: n_r - 1,
            taps: beta.taps().iter().map(|&(c, j)| (c, 0, j)).collect(),
        })
    }

    /// Side length of the produced square matrix.
    pub fn out_dim(&self) -> usize {
        self.out_t * self.out_r
    }

    /// Shape of the lag sequence this operator consumes.
    pub fn seq_shape(&self) -> (usize, usize) {
        (2 * self.n_t - 1, 2 * self.n_r - 1)
    }

    /// Number of complex lag parameters.
    pub fn seq_len(&self) -> usize {
        let (a, b) = self.seq_shape();
        a * b
    }

    fn check_seq(&self, v: &Array2<Complex64>) -> Result<()> {
        if v.dim() != self.seq_shape() {
            return Err(Error::DimensionMismatch(format!(
                "lag sequence has shape {:?}, expected {:?}",
                v.dim(),
                self.seq_shape()
            )));
        }
        Ok(())
    }

    fn seq_at(&self, v: &Array2<Complex64>, k: isize, j: isize) -> Complex64 {
        let kk = k + self.n_t as isize - 1;
        let jj = j + self.n_r as isize - 1;
        if kk < 0 || jj < 0 || kk >= (2 * self.n_t - 1) as isize || jj >= (2 * self.n_r - 1) as isize {
            C_ZERO
        } else {
            v[[kk as usize, jj as usize]]
        }
    }

    /// Output lag table `L[dk, dj]` for `|dk| < out_t`, `|dj| < out_r`.
    fn output_lags(&self, v: &Array2<Complex64>) -> Array2<Complex64> {
        let (ot, or) = (self.out_t as isize, self.out_r as isize);
        Array2::from_shape_fn(((2 * ot - 1) as usize, (2 * or - 1) as usize), |(a, b)| {
            let dk = a as isize - (ot - 1);
            let dj = b as isize - (or - 1);
            self.taps
                .iter()
                .map(|&(c, sk, sj)| c * self.seq_at(v, dk - sk, dj - sj))
                .sum()
        })
    }

    pub fn apply(&self, v: &Array2<Complex64>) -> Result<Array2<Complex64>> {
        self.check_seq(v)?;
        Ok(self.apply_unchecked(v))
    }

    pub(crate) fn apply_unchecked(&self, v: &Array2<Complex64>) -> Array2<Complex64> {
        let lags = self.output_lags(v);
        let (ot, or) = (self.out_t, self.out_r);
        let n = ot * or;
        let mut out = Array2::zeros((n, n));
        for m in 0..ot {
            for nn in 0..ot {
                let a = m + ot - 1 - nn;
                for p in 0..or {
                    let row = m * or + p;
                    for q in 0..or {
                        out[[row, nn * or + q]] = lags[[a, p + or - 1 - q]];
                    }
                }
            }
        }
        out
    }

    /// Sums of `w` along each two-level diagonal `(dk, dj)`.
    fn diagonal_sums(&self, w: &Array2<Complex64>) -> Array2<Complex64> {
        let (ot, or) = (self.out_t, self.out_r);
        let mut d = Array2::zeros((2 * ot - 1, 2 * or - 1));
        for m in 0..ot {
            for nn in 0..ot {
                let a = m + ot - 1 - nn;
                for p in 0..or {
                    let row = m * or + p;
                    for q in 0..or {
                        d[[a, p + or - 1 - q]] += w[[row, nn * or + q]];
                    }
                }
            }
        }
        d
    }

    /// Adjoint map under the real inner product `Re tr(A^H B)`.
    pub fn adjoint(&self, w: &Array2<Complex64>) -> Result<Array2<Complex64>> {
        if w.dim() != (self.out_dim(), self.out_dim()) {
            return Err(Error::DimensionMismatch(format!(
                "adjoint input is {:?}, expected {}x{}",
                w.dim(),
                self.out_dim(),
                self.out_dim()
            )));
        }
        Ok(self.adjoint_unchecked(w))
    }

    pub(crate) fn adjoint_unchecked(&self, w: &Array2<Complex64>) -> Array2<Complex64> {
        let d = self.diagonal_sums(w);
        let (ot, or) = (self.out_t as isize, self.out_r as isize);
        let mut u = Array2::zeros(self.seq_shape());
        for kk in 0..2 * self.n_t - 1 {
            let k = kk as isize - (self.n_t as isize - 1);
            for jj in 0..2 * self.n_r - 1 {
                let j = jj as isize - (self.n_r as isize - 1);
                let mut acc = C_ZERO;
                for &(c, sk, sj) in &self.taps {
                    let dk = k + sk;
                    let dj = j + sj;
                    if dk.abs() < ot && dj.abs() < or {
                        acc += c.conj() * d[[(dk + ot - 1) as usize, (dj + or - 1) as usize]];
                    }
                }
                u[[kk, jj]] = acc;
            }
        }
        u
    }

    /// Dense matrix of `A^* A` acting on the row-major flattened lag
    /// sequence.
    pub fn gram(&self) -> Array2<Complex64> {
        let (sa, sb) = self.seq_shape();
        let p = sa * sb;
        let (ot, or) = (self.out_t as isize, self.out_r as isize);
        let mut g = Array2::zeros((p, p));
        let count = |dk: isize, dj: isize| -> f64 {
            if dk.abs() < ot && dj.abs() < or {
                ((ot - dk.abs()) * (or - dj.abs())) as f64
            } else {
                0.0
            }
        };
        let n_t = self.n_t as isize;
        let n_r = self.n_r as isize;
        for kk in 0..sa {
            let k = kk as isize - (n_t - 1);
            for jj in 0..sb {
                let j = jj as isize - (n_r - 1);
                let row = kk * sb + jj;
                for &(c, sk, sj) in &self.taps {
                    let w = count(k + sk, j + sj);
                    if w == 0.0 {
                        continue;
                    }
                    for &(c2, sk2, sj2) in &self.taps {
                        let k2 = k + sk - sk2;
                        let j2 = j + sj - sj2;
                        let (a, b) = (k2 + n_t - 1, j2 + n_r - 1);
                        if a < 0 || b < 0 || a >= sa as isize || b >= sb as isize {
                            continue;
                        }
                        g[[row, a as usize * sb + b as usize]] += c.conj() * c2 * w;
                    }
                }
            }
        }
        g
    }
}
