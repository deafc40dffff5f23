//! Toeplitz structure behind the frequency-selective atomic norm.
//!
//! The band `(f_L, f_H)` is encoded by the degree-one trigonometric
//! polynomial `beta(f) = r_1 z^{-1} + r_0 + r_{-1} z` (`z = e^{i 2 pi f}`),
//! positive inside the band and negative outside. A PSD Toeplitz matrix has a
//! Vandermonde decomposition with every frequency in the band exactly when
//! the matrix `T_beta` built from the same sequence is PSD as well.

mod lag_operator;
mod retrieval;

use ndarray::{Array1, Array2};

pub use lag_operator::LagOperator;
pub use retrieval::{
    vandermonde_retrieve, RetrievalOptions, StructuredToeplitz, VandermondeAtom, VandermondeDecomposition,
};

use crate::signal_model::FrequencyInterval;
use crate::{Complex64, Error, Result, C_ZERO, TWO_PI};
use std::f64::consts::PI;

/// Coefficients of the band polynomial of an interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaCoeffs {
    pub r_plus1: Complex64,
    pub r_0: Complex64,
    pub r_minus1: Complex64,
    pub interval: FrequencyInterval,
}

impl BetaCoeffs {
    pub fn new(interval: FrequencyInterval) -> Self {
        let (lo, hi) = (interval.lo(), interval.hi());
        // hi > lo is guaranteed by FrequencyInterval, so sgn(hi - lo) = 1.
        let r_plus1 = Complex64::from_polar(1.0, PI * (lo + hi));
        let r_0 = Complex64::new(-2.0 * (PI * (hi - lo)).cos(), 0.0);
        BetaCoeffs {
            r_plus1,
            r_0,
            r_minus1: r_plus1.conj(),
            interval,
        }
    }

    pub fn from_bounds(lo: f64, hi: f64) -> Result<Self> {
        Ok(Self::new(FrequencyInterval::new(lo, hi)?))
    }

    /// `beta(f)`; the polynomial is real on the unit circle.
    pub fn eval(&self, f: f64) -> f64 {
        let z = Complex64::from_polar(1.0, TWO_PI * f);
        (self.r_plus1 * z.conj() + self.r_0 + self.r_minus1 * z).re
    }

    /// `(r_j, j)` for `j = 1, 0, -1`.
    pub fn taps(&self) -> [(Complex64, isize); 3] {
        [(self.r_plus1, 1), (self.r_0, 0), (self.r_minus1, -1)]
    }
}

/// Shorthand for [`BetaCoeffs::new`].
pub fn beta_coeffs(interval: FrequencyInterval) -> BetaCoeffs {
    BetaCoeffs::new(interval)
}

/// Generating sequence `t_{-(n-1)}, ..., t_{n-1}` of an `n x n` Toeplitz
/// matrix `[T]_{mn} = t_{m-n}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ToeplitzSeq {
    n: usize,
    t: Array1<Complex64>,
}

impl ToeplitzSeq {
    pub fn new(n: usize, t: Array1<Complex64>) -> Result<Self> {
        if n == 0 || t.len() != 2 * n - 1 {
            return Err(Error::DimensionMismatch(format!(
                "Toeplitz sequence for n={n} needs {} entries, got {}",
                (2 * n).saturating_sub(1),
                t.len()
            )));
        }
        Ok(ToeplitzSeq { n, t })
    }

    pub fn zeros(n: usize) -> Self {
        ToeplitzSeq {
            n,
            t: Array1::from_elem(2 * n - 1, C_ZERO),
        }
    }

    /// `t_k = sum_l c_l e^{i 2 pi k f_l}`.
    pub fn from_atoms(n: usize, atoms: &[(f64, f64)]) -> Self {
        let t = Array1::from_shape_fn(2 * n - 1, |i| {
            let k = i as f64 - (n as f64 - 1.0);
            atoms
                .iter()
                .map(|&(c, f)| Complex64::from_polar(c, TWO_PI * k * f))
                .sum()
        });
        ToeplitzSeq { n, t }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_array(&self) -> &Array1<Complex64> {
        &self.t
    }

    /// `t_k` for `|k| < n`.
    pub fn lag(&self, k: isize) -> Complex64 {
        self.t[(k + self.n as isize - 1) as usize]
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        (0..self.n as isize).all(|k| (self.lag(-k) - self.lag(k).conj()).norm() <= tol)
    }

    /// View as a two-level sequence with a single receive element.
    pub fn to_two_level(&self) -> TwoLevelToeplitzSeq {
        TwoLevelToeplitzSeq {
            n_t: self.n,
            n_r: 1,
            v: self.t.clone().insert_axis(ndarray::Axis(1)),
        }
    }
}

/// Generating array of a two-level Toeplitz matrix: `v_j(k)` stored at
/// `[k + n_t - 1, j + n_r - 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoLevelToeplitzSeq {
    n_t: usize,
    n_r: usize,
    v: Array2<Complex64>,
}

impl TwoLevelToeplitzSeq {
    pub fn new(n_t: usize, n_r: usize, v: Array2<Complex64>) -> Result<Self> {
        if n_t == 0 || n_r == 0 || v.dim() != (2 * n_t - 1, 2 * n_r - 1) {
            return Err(Error::DimensionMismatch(format!(
                "two-level sequence for {n_t}x{n_r} needs shape ({}, {}), got {:?}",
                (2 * n_t).saturating_sub(1),
                (2 * n_r).saturating_sub(1),
                v.dim()
            )));
        }
        Ok(TwoLevelToeplitzSeq { n_t, n_r, v })
    }

    pub fn zeros(n_t: usize, n_r: usize) -> Self {
        TwoLevelToeplitzSeq {
            n_t,
            n_r,
            v: Array2::zeros((2 * n_t - 1, 2 * n_r - 1)),
        }
    }

    /// `v_j(k) = sum_l c_l e^{i 2 pi (k theta_l + j phi_l)}`.
    pub fn from_atoms(n_t: usize, n_r: usize, atoms: &[(f64, f64, f64)]) -> Self {
        let v = Array2::from_shape_fn((2 * n_t - 1, 2 * n_r - 1), |(a, b)| {
            let k = a as f64 - (n_t as f64 - 1.0);
            let j = b as f64 - (n_r as f64 - 1.0);
            atoms
                .iter()
                .map(|&(c, th, ph)| Complex64::from_polar(c, TWO_PI * (k * th + j * ph)))
                .sum()
        });
        TwoLevelToeplitzSeq { n_t, n_r, v }
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }

    pub fn as_array(&self) -> &Array2<Complex64> {
        &self.v
    }

    /// `v_j(k)`.
    pub fn lag(&self, k: isize, j: isize) -> Complex64 {
        self.v[[
            (k + self.n_t as isize - 1) as usize,
            (j + self.n_r as isize - 1) as usize,
        ]]
    }

    /// `v_{-j}(-k) = conj(v_j(k))` within `tol`.
    pub fn is_hermitian(&self, tol: f64) -> bool {
        let (nt, nr) = (self.n_t as isize, self.n_r as isize);
        (-(nt - 1)..nt).all(|k| (-(nr - 1)..nr).all(|j| (self.lag(-k, -j) - self.lag(k, j).conj()).norm() <= tol))
    }

    /// Transmit-lag marginal `v_0(k)`.
    pub fn tx_marginal(&self) -> ToeplitzSeq {
        let t = self.v.column(self.n_r - 1).to_owned();
        ToeplitzSeq { n: self.n_t, t }
    }

    /// Receive-lag marginal `v_j(0)`.
    pub fn rx_marginal(&self) -> ToeplitzSeq {
        let t = self.v.row(self.n_t - 1).to_owned();
        ToeplitzSeq { n: self.n_r, t }
    }
}

/// `[T]_{mn} = t_{m-n}`.
pub fn toeplitz(seq: &ToeplitzSeq) -> Array2<Complex64> {
    let n = seq.n;
    Array2::from_shape_fn((n, n), |(m, k)| seq.lag(m as isize - k as isize))
}

/// `[T_beta]_{mn} = sum_{j=-1}^{1} r_j t_{m-n-j}`, size `(n-1) x (n-1)`.
pub fn t_beta_1d(seq: &ToeplitzSeq, coeffs: &BetaCoeffs) -> Result<Array2<Complex64>> {
    let op = LagOperator::beta_tx(seq.n, 1, coeffs)?;
    op.apply(&seq.to_two_level().v)
}

/// Two-level Toeplitz matrix with entry `v_{p-q}(m-n)` at row
/// `m * n_r + p`, column `n * n_r + q`. A single atom gives
/// `c b b^H` with `b = a(n_t, theta) ⊗ a(n_r, phi)`.
pub fn two_level_toeplitz(seq: &TwoLevelToeplitzSeq) -> Array2<Complex64> {
    LagOperator::toeplitz(seq.n_t, seq.n_r).apply_unchecked(&seq.v)
}

/// Transmit band constraint matrix, size `(n_t - 1) n_r`.
pub fn t_beta1_2d(seq: &TwoLevelToeplitzSeq, coeffs: &BetaCoeffs) -> Result<Array2<Complex64>> {
    Ok(LagOperator::beta_tx(seq.n_t, seq.n_r, coeffs)?.apply_unchecked(&seq.v))
}

/// Receive band constraint matrix, size `n_t (n_r - 1)`.
pub fn t_beta2_2d(seq: &TwoLevelToeplitzSeq, coeffs: &BetaCoeffs) -> Result<Array2<Complex64>> {
    Ok(LagOperator::beta_rx(seq.n_t, seq.n_r, coeffs)?.apply_unchecked(&seq.v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{frobenius_norm, kron_vec, outer_scaled, spectrum_bounds};
    use crate::signal_model::steering;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn full_band_coefficients() {
        let b = BetaCoeffs::new(FrequencyInterval::full());
        assert!((b.r_plus1 - c(1.0, 0.0)).norm() < 1e-15);
        assert!((b.r_0 - c(2.0, 0.0)).norm() < 1e-15);
        assert!((b.r_minus1 - c(1.0, 0.0)).norm() < 1e-15);
        for f in [-0.4, 0.0, 0.3] {
            assert_abs_diff_eq!(b.eval(f), 2.0 + 2.0 * (TWO_PI * f).cos(), epsilon = 1e-14);
        }
    }

    #[test]
    fn endpoint_roots_and_midpoint_value() {
        let b = BetaCoeffs::from_bounds(-0.1, 0.3).unwrap();
        assert_abs_diff_eq!(b.eval(-0.1), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(b.eval(0.3), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(b.eval(0.1), 2.0 * (1.0 - (0.4 * PI).cos()), epsilon = 1e-14);
        assert_abs_diff_eq!(b.eval(0.1), 1.3820, epsilon = 1e-4);
        assert_eq!(b.r_minus1, b.r_plus1.conj());
        assert!(BetaCoeffs::from_bounds(0.2, 0.2).is_err());
    }

    #[test]
    fn toeplitz_examples() {
        let seq = ToeplitzSeq::new(2, Array1::from(vec![c(0.0, -1.0), c(2.0, 0.0), c(0.0, 1.0)])).unwrap();
        let t = toeplitz(&seq);
        assert_eq!(t[[0, 0]], c(2.0, 0.0));
        assert_eq!(t[[0, 1]], c(0.0, -1.0));
        assert_eq!(t[[1, 0]], c(0.0, 1.0));
        assert_eq!(t[[1, 1]], c(2.0, 0.0));

        let mut e0 = ToeplitzSeq::zeros(4);
        e0.t[3] = c(1.0, 0.0);
        assert_eq!(toeplitz(&e0), Array2::<Complex64>::eye(4));
        assert!(ToeplitzSeq::new(3, Array1::zeros(4)).is_err());
    }

    #[test]
    fn toeplitz_of_atoms_is_outer_product_sum() {
        let atoms = [(1.5, 0.12), (0.7, -0.31)];
        let t = toeplitz(&ToeplitzSeq::from_atoms(6, &atoms));
        let mut expected = Array2::<Complex64>::zeros((6, 6));
        for &(cc, f) in &atoms {
            expected = expected + outer_scaled(&steering(6, f), cc);
        }
        assert!(frobenius_norm((&t - &expected).view()) < 1e-12);
    }

    #[test]
    fn t_beta_single_atom_factorization() {
        let b = BetaCoeffs::from_bounds(-0.1, 0.3).unwrap();
        let n = 8;
        for (f, inside) in [(0.05, true), (0.4, false)] {
            let seq = ToeplitzSeq::from_atoms(n, &[(2.0, f)]);
            let tb = t_beta_1d(&seq, &b).unwrap();
            let expected = outer_scaled(&steering(n - 1, f), 2.0 * b.eval(f));
            assert!(frobenius_norm((&tb - &expected).view()) < 1e-12);
            let s = spectrum_bounds(&tb).unwrap();
            if inside {
                assert!(s.is_psd(1e-8));
                assert_abs_diff_eq!(s.max, 2.0 * b.eval(f) * (n - 1) as f64, epsilon = 1e-10);
            } else {
                assert!(s.min < -1e-3);
            }
        }
        let zero = t_beta_1d(&ToeplitzSeq::zeros(5), &b).unwrap();
        assert!(zero.iter().all(|z| *z == C_ZERO));
        assert!(t_beta_1d(&ToeplitzSeq::zeros(1), &b).is_err());
    }

    #[test]
    fn t_beta_entries_follow_definition() {
        let b = BetaCoeffs::from_bounds(-0.3, 0.05).unwrap();
        let seq = ToeplitzSeq::from_atoms(5, &[(1.0, 0.2), (0.5, -0.1)]);
        let tb = t_beta_1d(&seq, &b).unwrap();
        for m in 0..4isize {
            for n in 0..4isize {
                let d = m - n;
                let expected = b.r_minus1 * seq.lag(d + 1) + b.r_0 * seq.lag(d) + b.r_plus1 * seq.lag(d - 1);
                assert!((tb[[m as usize, n as usize]] - expected).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn two_level_examples() {
        let mut v = Array2::zeros((5, 3));
        v[[2, 1]] = c(1.0, 0.0);
        let seq = TwoLevelToeplitzSeq::new(3, 2, v).unwrap();
        assert_eq!(two_level_toeplitz(&seq), Array2::<Complex64>::eye(6));

        let (th, ph) = (0.1, -0.3);
        let seq = TwoLevelToeplitzSeq::from_atoms(3, 4, &[(1.3, th, ph)]);
        let b = kron_vec(&steering(3, th), &steering(4, ph));
        let expected = outer_scaled(&b, 1.3);
        assert!(frobenius_norm((&two_level_toeplitz(&seq) - &expected).view()) < 1e-12);
        assert!(TwoLevelToeplitzSeq::new(3, 2, Array2::zeros((5, 4))).is_err());
    }

    #[test]
    fn two_level_entries_follow_definition() {
        let seq = TwoLevelToeplitzSeq::from_atoms(3, 2, &[(1.0, 0.21, -0.07), (0.4, -0.3, 0.33)]);
        let t = two_level_toeplitz(&seq);
        for m in 0..3 {
            for n in 0..3 {
                for p in 0..2 {
                    for q in 0..2 {
                        let expected = seq.lag(m as isize - n as isize, p as isize - q as isize);
                        assert_eq!(t[[m * 2 + p, n * 2 + q]], expected);
                    }
                }
            }
        }
    }

    #[test]
    fn band_matrices_single_atom_factorizations() {
        let b1 = BetaCoeffs::from_bounds(0.0, 0.25).unwrap();
        let b2 = BetaCoeffs::from_bounds(-0.2, 0.1).unwrap();
        let (nt, nr) = (4, 3);
        let (th, ph) = (0.1, 0.3); // theta inside I1, phi outside I2
        let seq = TwoLevelToeplitzSeq::from_atoms(nt, nr, &[(1.0, th, ph)]);

        let tb1 = t_beta1_2d(&seq, &b1).unwrap();
        let b1v = kron_vec(&steering(nt - 1, th), &steering(nr, ph));
        let expected1 = outer_scaled(&b1v, b1.eval(th));
        assert!(frobenius_norm((&tb1 - &expected1).view()) < 1e-12);
        assert!(spectrum_bounds(&tb1).unwrap().is_psd(1e-8));

        let tb2 = t_beta2_2d(&seq, &b2).unwrap();
        let b2v = kron_vec(&steering(nt, th), &steering(nr - 1, ph));
        let expected2 = outer_scaled(&b2v, b2.eval(ph));
        assert!(frobenius_norm((&tb2 - &expected2).view()) < 1e-12);
        assert!(spectrum_bounds(&tb2).unwrap().min < -1e-3);

        let zero = TwoLevelToeplitzSeq::zeros(nt, nr);
        assert!(t_beta1_2d(&zero, &b1).unwrap().iter().all(|z| *z == C_ZERO));
        assert!(t_beta2_2d(&zero, &b2).unwrap().iter().all(|z| *z == C_ZERO));
        assert!(t_beta2_2d(&TwoLevelToeplitzSeq::zeros(3, 1), &b2).is_err());
    }

    #[test]
    fn marginals_and_hermitian_symmetry() {
        let seq = TwoLevelToeplitzSeq::from_atoms(4, 3, &[(1.0, 0.1, 0.2), (2.0, -0.2, 0.05)]);
        assert!(seq.is_hermitian(1e-12));
        let tx = seq.tx_marginal();
        let expected = ToeplitzSeq::from_atoms(4, &[(1.0, 0.1), (2.0, -0.2)]);
        for k in -3..4 {
            assert!((tx.lag(k) - expected.lag(k)).norm() < 1e-12);
        }
        let rx = seq.rx_marginal();
        let expected = ToeplitzSeq::from_atoms(3, &[(1.0, 0.2), (2.0, 0.05)]);
        for j in -2..3 {
            assert!((rx.lag(j) - expected.lag(j)).norm() < 1e-12);
        }
        let h = two_level_toeplitz(&seq);
        let hh = h.t().mapv(|z| z.conj());
        assert!(frobenius_norm((&h - &hh).view()) < 1e-12);
    }
}
