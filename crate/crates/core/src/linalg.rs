//! Dense complex linear-algebra helpers: Hermitian eigenvalue checks, PSD
//! cone projection through LAPACK's partial-spectrum solver, Kronecker
//! products.

use std::os::raw::c_char;

use ndarray::{Array1, Array2, ArrayView2};
use ndarray_linalg::{EigValsh, Eigh, SVD, UPLO};

use crate::{Complex64, Error, Result, C_ZERO};

/// Relative tolerance used to accept a Hermitian matrix as PSD.
pub const EPS_PSD: f64 = 1e-8;

/// Extreme eigenvalues of a Hermitian matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumBounds {
    pub min: f64,
    pub max: f64,
}

impl SpectrumBounds {
    /// `min >= -eps * max(1, max)`.
    pub fn is_psd(&self, eps: f64) -> bool {
        self.min >= -eps * self.max.max(1.0)
    }
}

pub fn spectrum_bounds(m: &Array2<Complex64>) -> Result<SpectrumBounds> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "expected square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.is_empty() {
        return Ok(SpectrumBounds { min: 0.0, max: 0.0 });
    }
    let h = hermitian_part(m);
    let w = h.eigvalsh(UPLO::Lower)?;
    Ok(SpectrumBounds {
        min: w[0],
        max: w[w.len() - 1],
    })
}

/// Scale-invariant PSD test with [`EPS_PSD`].
pub fn is_psd(m: &Array2<Complex64>) -> Result<bool> {
    Ok(spectrum_bounds(m)?.is_psd(EPS_PSD))
}

/// Hermitian eigendecomposition with ascending eigenvalues.
///
/// `ndarray_linalg::Eigh` hands back conjugated eigenvectors for row-major
/// complex input; the orientation is checked on the dominant pair and fixed.
pub fn eigh(m: &Array2<Complex64>) -> Result<(Array1<f64>, Array2<Complex64>)> {
    let h = hermitian_part(m);
    let n = h.nrows();
    let (w, mut v) = h.eigh(UPLO::Lower)?;
    if n > 0 {
        let k = (0..n).max_by(|&a, &b| w[a].abs().total_cmp(&w[b].abs())).unwrap_or(0);
        let col = v.column(k).to_owned();
        let conj = col.mapv(|z| z.conj());
        let res = |x: &Array1<Complex64>| vector_norm(&(h.dot(x) - x.mapv(|z| z * w[k])));
        if res(&conj) < res(&col) {
            v.mapv_inplace(|z| z.conj());
        }
    }
    Ok((w, v))
}

pub fn hermitian_part(m: &Array2<Complex64>) -> Array2<Complex64> {
    let n = m.nrows();
    Array2::from_shape_fn((n, n), |(i, j)| 0.5 * (m[[i, j]] + m[[j, i]].conj()))
}

pub fn frobenius_norm(m: ArrayView2<Complex64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn vector_norm(v: &Array1<Complex64>) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Kronecker product of two column vectors, first factor varying slowest.
pub fn kron_vec(a: &Array1<Complex64>, b: &Array1<Complex64>) -> Array1<Complex64> {
    let nb = b.len();
    Array1::from_shape_fn(a.len() * nb, |i| a[i / nb] * b[i % nb])
}

/// Kronecker product of two matrices.
pub fn kron(a: &Array2<Complex64>, b: &Array2<Complex64>) -> Array2<Complex64> {
    let (ra, ca) = a.dim();
    let (rb, cb) = b.dim();
    Array2::from_shape_fn((ra * rb, ca * cb), |(i, j)| {
        a[[i / rb, j / cb]] * b[[i % rb, j % cb]]
    })
}

/// `v v^H` scaled by `c`.
pub fn outer_scaled(v: &Array1<Complex64>, c: f64) -> Array2<Complex64> {
    let n = v.len();
    Array2::from_shape_fn((n, n), |(i, j)| c * v[i] * v[j].conj())
}

/// Minimum-norm least-squares solution of `a x = b` through the SVD.
///
/// Singular values below `max(m, n) * eps * s_max` are dropped; the returned
/// rank counts the kept ones.
pub fn lstsq(a: &Array2<Complex64>, b: &Array1<Complex64>) -> Result<(Array1<Complex64>, usize)> {
    let (m, n) = a.dim();
    if b.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "least squares with {m} rows but rhs of length {}",
            b.len()
        )));
    }
    if n == 0 {
        return Ok((Array1::zeros(0), 0));
    }
    let (u, sv, vt) = a.svd(true, true)?;
    let (u, vt) = match (u, vt) {
        (Some(u), Some(vt)) => (u, vt),
        _ => return Err(Error::Linalg("SVD returned no singular vectors".into())),
    };
    let smax = sv.iter().cloned().fold(0.0f64, f64::max);
    let cutoff = m.max(n) as f64 * f64::EPSILON * smax;
    let mut x = Array1::zeros(n);
    let mut rank = 0;
    for (k, &sk) in sv.iter().enumerate() {
        if sk <= cutoff || sk == 0.0 {
            continue;
        }
        rank += 1;
        let coef: Complex64 = (0..m).map(|i| u[[i, k]].conj() * b[i]).sum::<Complex64>() / sk;
        for j in 0..n {
            x[j] += vt[[k, j]].conj() * coef;
        }
    }
    Ok((x, rank))
}

/// Projection onto the cone of Hermitian PSD matrices.
///
/// Only the part of the spectrum on one side of zero is computed (LAPACK
/// `zheevr` with a value range). The side is picked from the inertia seen on
/// the previous call, so iterates that stay low rank are cheap to project.
#[derive(Debug, Clone)]
pub struct PsdProjector {
    n: usize,
    positive_hint: usize,
    work: Vec<Complex64>,
    rwork: Vec<f64>,
    iwork: Vec<i32>,
    a: Vec<Complex64>,
    z: Vec<Complex64>,
    w: Vec<f64>,
    isuppz: Vec<i32>,
}

impl PsdProjector {
    pub fn new(n: usize) -> Self {
        PsdProjector {
            n,
            positive_hint: n,
            work: Vec::new(),
            rwork: Vec::new(),
            iwork: Vec::new(),
            a: vec![C_ZERO; n * n],
            z: vec![C_ZERO; n * n],
            w: vec![0.0; n],
            isuppz: vec![0; 2 * n.max(1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of positive eigenvalues seen by the last projection.
    pub fn last_positive_count(&self) -> usize {
        self.positive_hint
    }

    /// Returns the PSD projection of the Hermitian part of `x`.
    pub fn project(&mut self, x: &Array2<Complex64>) -> Result<Array2<Complex64>> {
        let n = self.n;
        if x.dim() != (n, n) {
            return Err(Error::DimensionMismatch(format!(
                "projector built for {n}x{n}, got {:?}",
                x.dim()
            )));
        }
        if n == 0 {
            return Ok(Array2::zeros((0, 0)));
        }
        // Row-major buffer read column-major by LAPACK is conj(x) for
        // Hermitian x; eigenvectors are conjugated back below.
        for i in 0..n {
            for j in 0..n {
                self.a[i * n + j] = 0.5 * (x[[i, j]] + x[[j, i]].conj());
            }
        }
        let take_positive = self.positive_hint <= n / 2;
        // Gershgorin bound on the spectral radius
        let radius = (0..n)
            .map(|i| (0..n).map(|j| self.a[i * n + j].norm()).sum::<f64>())
            .fold(0.0f64, f64::max);
        let bound = 2.0 * radius + 1.0;
        let (vl, vu) = if take_positive { (0.0, bound) } else { (-bound, 0.0) };
        let m = match self.zheevr(vl, vu) {
            Ok(m) => m,
            // MRRR occasionally fails on clustered spectra
            Err(_) => return self.project_full(x),
        };
        let mut out = if take_positive {
            Array2::zeros((n, n))
        } else {
            // x - (negative part)
            let mut sym = Array2::zeros((n, n));
            for i in 0..n {
                for j in 0..n {
                    sym[[i, j]] = 0.5 * (x[[i, j]] + x[[j, i]].conj());
                }
            }
            sym
        };
        let sign = if take_positive { 1.0 } else { -1.0 };
        for k in 0..m {
            let lambda = sign * self.w[k];
            let col = &self.z[k * n..(k + 1) * n];
            for a in 0..n {
                let za = col[a].conj() * lambda;
                if za == C_ZERO {
                    continue;
                }
                let row = out.row_mut(a);
                for (b, o) in row.into_iter().enumerate() {
                    *o += za * col[b];
                }
            }
        }
        self.positive_hint = if take_positive { m } else { n - m };
        Ok(out)
    }

    fn project_full(&mut self, x: &Array2<Complex64>) -> Result<Array2<Complex64>> {
        let n = self.n;
        let sym = hermitian_part(x);
        let (w, v) = eigh(&sym)?;
        let mut out = Array2::zeros((n, n));
        let mut count = 0;
        for k in 0..n {
            if w[k] > 0.0 {
                count += 1;
                let col = v.column(k);
                for a in 0..n {
                    let za = col[a] * w[k];
                    for b in 0..n {
                        out[[a, b]] += za * col[b].conj();
                    }
                }
            }
        }
        self.positive_hint = count;
        Ok(out)
    }

    fn zheevr(&mut self, vl: f64, vu: f64) -> Result<usize> {
        let n = self.n as i32;
        let jobz = b'V' as c_char;
        let range = b'V' as c_char;
        let uplo = b'L' as c_char;
        let (il, iu) = (0i32, 0i32);
        let abstol = 0.0f64;
        let mut m = 0i32;
        let mut info = 0i32;
        if self.work.is_empty() {
            let mut wq = [C_ZERO];
            let mut rq = [0.0f64];
            let mut iq = [0i32];
            // SAFETY: workspace query; all pointers reference buffers sized for n.
            unsafe {
                lapack_sys::zheevr_(
                    &jobz,
                    &range,
                    &uplo,
                    &n,
                    self.a.as_mut_ptr() as *mut _,
                    &n,
                    &vl,
                    &vu,
                    &il,
                    &iu,
                    &abstol,
                    &mut m,
                    self.w.as_mut_ptr(),
                    self.z.as_mut_ptr() as *mut _,
                    &n,
                    self.isuppz.as_mut_ptr(),
                    wq.as_mut_ptr() as *mut _,
                    &-1,
                    rq.as_mut_ptr(),
                    &-1,
                    iq.as_mut_ptr(),
                    &-1,
                    &mut info,
                );
            }
            if info != 0 {
                return Err(Error::Linalg(format!("zheevr workspace query info={info}")));
            }
            self.work = vec![C_ZERO; wq[0].re as usize];
            self.rwork = vec![0.0; rq[0] as usize];
            self.iwork = vec![0; iq[0] as usize];
        }
        let lwork = self.work.len() as i32;
        let lrwork = self.rwork.len() as i32;
        let liwork = self.iwork.len() as i32;
        // SAFETY: buffers sized per the workspace query above.
        unsafe {
            lapack_sys::zheevr_(
                &jobz,
                &range,
                &uplo,
                &n,
                self.a.as_mut_ptr() as *mut _,
                &n,
                &vl,
                &vu,
                &il,
                &iu,
                &abstol,
                &mut m,
                self.w.as_mut_ptr(),
                self.z.as_mut_ptr() as *mut _,
                &n,
                self.isuppz.as_mut_ptr(),
                self.work.as_mut_ptr() as *mut _,
                &lwork,
                self.rwork.as_mut_ptr(),
                &lrwork,
                self.iwork.as_mut_ptr(),
                &liwork,
                &mut info,
            );
        }
        if info != 0 {
            return Err(Error::Linalg(format!("zheevr failed with info={info}")));
        }
        Ok(m as usize)
    }
}
