//! On-grid orthogonal matching pursuit on `vec(H)`.

use ndarray::{Array1, Array2, Axis};

use super::{check_measurements, unvectorize, vec_sensing_operator, vectorize, Diagnostics, EstimateResult};
use crate::linalg::{kron_vec, lstsq, vector_norm};
use crate::signal_model::{steering, MeasurementSet};
use crate::{Complex64, Error, Result};

/// Uniform frequency grids over `[-1/2, 1/2)` and the matching channel atoms.
///
/// Column `g_t * G_r + g_r` holds `vec(a(n_r, phi) a(n_t, theta)^H)` for grid
/// frequencies `theta = tx_grid[g_t]`, `phi = rx_grid[g_r]`; in one dimension
/// (`n_r = 1`) that is `conj(a(n_t, theta))`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDictionary {
    pub n_t: usize,
    pub n_r: usize,
    pub tx_grid: Vec<f64>,
    pub rx_grid: Vec<f64>,
    pub atoms: Array2<Complex64>,
}

impl GridDictionary {
    /// `g_t` transmit and `g_r` receive grid points (`g_r` must be 1 when
    /// `n_r = 1`).
    pub fn new(n_t: usize, n_r: usize, g_t: usize, g_r: usize) -> Result<Self> {
        if n_t == 0 || n_r == 0 || g_t == 0 || g_r == 0 {
            return Err(Error::InvalidArgument("grid and array sizes must be positive".into()));
        }
        if n_r == 1 && g_r != 1 {
            return Err(Error::InvalidArgument("a single receive antenna takes a single receive grid point".into()));
        }
        let tx_grid = uniform_grid(g_t);
        let rx_grid = if n_r == 1 { vec![0.0] } else { uniform_grid(g_r) };
        let mut atoms = Array2::zeros((n_t * n_r, g_t * g_r));
        for (i, &th) in tx_grid.iter().enumerate() {
            let at = steering(n_t, th).mapv(|z| z.conj());
            for (j, &ph) in rx_grid.iter().enumerate() {
                let col = kron_vec(&at, &steering(n_r, ph));
                atoms.column_mut(i * rx_grid.len() + j).assign(&col);
            }
        }
        Ok(GridDictionary {
            n_t,
            n_r,
            tx_grid,
            rx_grid,
            atoms,
        })
    }

    /// Grid scaled from the array: `G_t = round(mult n_t)` and
    /// `G_r = round(G_t n_r / n_t)` (1 when `n_r = 1`).
    pub fn from_multiplier(n_t: usize, n_r: usize, mult: f64) -> Result<Self> {
        if !(mult > 0.0) || !mult.is_finite() {
            return Err(Error::InvalidArgument(format!("grid multiplier {mult} must be positive")));
        }
        let g_t = ((mult * n_t as f64).round() as usize).max(1);
        let g_r = if n_r == 1 {
            1
        } else {
            ((g_t as f64 * n_r as f64 / n_t as f64).round() as usize).max(1)
        };
        Self::new(n_t, n_r, g_t, g_r)
    }

    pub fn len(&self) -> usize {
        self.atoms.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.ncols() == 0
    }

    /// `(theta, phi)` of column `k`.
    pub fn frequencies(&self, k: usize) -> (f64, f64) {
        let g_r = self.rx_grid.len();
        (self.tx_grid[k / g_r], self.rx_grid[k % g_r])
    }
}

fn uniform_grid(g: usize) -> Vec<f64> {
    (0..g).map(|k| -0.5 + k as f64 / g as f64).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OmpTrace {
    /// Selected dictionary columns in order.
    pub selected: Vec<usize>,
    /// Normalized correlation of each selected column when it was picked.
    pub correlations: Vec<f64>,
    /// Residual norm after each least-squares refit.
    pub residual_norms: Vec<f64>,
    /// Set when a refit met a rank-deficient subdictionary and fell back to
    /// the minimum-norm solution.
    pub rank_deficient: bool,
    /// Debiased coefficients on the final support.
    pub coefficients: Vec<Complex64>,
}

/// OMP with `sparsity` greedy steps and a least-squares refit after each.
pub fn estimate_omp(m: &MeasurementSet, dict: &GridDictionary, sparsity: usize) -> Result<EstimateResult> {
    check_measurements(m)?;
    if dict.n_t != m.n_t() || dict.n_r != m.n_r() {
        return Err(Error::DimensionMismatch(format!(
            "dictionary for {}x{}, measurements for {}x{}",
            dict.n_r,
            dict.n_t,
            m.n_r(),
            m.n_t()
        )));
    }
    if sparsity == 0 || sparsity > dict.len() {
        return Err(Error::InvalidArgument(format!(
            "sparsity {sparsity} outside 1..={}",
            dict.len()
        )));
    }
    let y = vectorize(&m.y);
    let psi = vec_sensing_operator(m).dot(&dict.atoms);
    let norms: Vec<f64> = psi.columns().into_iter().map(|c| vector_norm(&c.to_owned())).collect();

    let mut trace = OmpTrace {
        selected: Vec::with_capacity(sparsity),
        correlations: Vec::with_capacity(sparsity),
        residual_norms: Vec::with_capacity(sparsity),
        rank_deficient: false,
        coefficients: Vec::new(),
    };
    let mut residual = y.clone();
    let mut coef = Array1::<Complex64>::zeros(0);
    for _ in 0..sparsity {
        let corr = psi.t().mapv(|z| z.conj()).dot(&residual);
        let mut best = None;
        for (k, c) in corr.iter().enumerate() {
            if norms[k] == 0.0 || trace.selected.contains(&k) {
                continue;
            }
            let score = c.norm() / norms[k];
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((k, score));
            }
        }
        let Some((k, score)) = best else { break };
        trace.selected.push(k);
        trace.correlations.push(score);
        let sub = psi.select(Axis(1), &trace.selected);
        let (c, rank) = lstsq(&sub, &y)?;
        if rank < trace.selected.len() {
            trace.rank_deficient = true;
        }
        residual = &y - &sub.dot(&c);
        trace.residual_norms.push(vector_norm(&residual));
        coef = c;
    }
    let h_vec = dict.atoms.select(Axis(1), &trace.selected).dot(&coef);
    trace.coefficients = coef.to_vec();
    let h_matrix = unvectorize(&h_vec, m.n_r())?;
    Ok(EstimateResult::new(h_matrix, Diagnostics::Omp(trace)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::nmse;
    use crate::signal_model::{identity_pilots, simulate_measurements, Path, PathSet};

    fn channel(n_t: usize, n_r: usize, paths: &[(Complex64, f64, f64)]) -> Array2<Complex64> {
        PathSet {
            paths: paths
                .iter()
                .map(|&(gain, tx_freq, rx_freq)| Path { gain, tx_freq, rx_freq })
                .collect(),
            min_sep_tx: 0.0,
            min_sep_rx: 0.0,
        }
        .channel_matrix(n_t, n_r)
    }

    fn full_obs(h: &Array2<Complex64>) -> MeasurementSet {
        let n = h.ncols();
        simulate_measurements(h, &Array2::eye(n), &identity_pilots(n), 0.0, 0).unwrap()
    }

    #[test]
    fn grid_layout() {
        let d = GridDictionary::new(4, 3, 4, 2).unwrap();
        assert_eq!(d.tx_grid, vec![-0.5, -0.25, 0.0, 0.25]);
        assert_eq!(d.rx_grid, vec![-0.5, 0.0]);
        assert_eq!(d.atoms.dim(), (12, 8));
        assert_eq!(d.frequencies(7), (0.25, 0.0));
        let h = channel(4, 3, &[(Complex64::new(1.0, 0.0), 0.25, 0.0)]);
        let diff = &d.atoms.column(7) - &vectorize(&h);
        assert!(diff.iter().all(|z| z.norm() < 1e-12));
        let d = GridDictionary::from_multiplier(16, 8, 0.75).unwrap();
        assert_eq!((d.tx_grid.len(), d.rx_grid.len()), (12, 6));
        assert_eq!(GridDictionary::from_multiplier(128, 1, 0.5).unwrap().len(), 64);
        assert!(GridDictionary::new(4, 1, 4, 2).is_err());
    }

    #[test]
    fn on_grid_noiseless_is_exact() {
        let h = channel(16, 1, &[(Complex64::new(0.3, 1.0), 0.125, 0.0), (Complex64::new(-1.0, 0.2), -0.375, 0.0)]);
        let d = GridDictionary::from_multiplier(16, 1, 1.0).unwrap();
        let est = estimate_omp(&full_obs(&h), &d, 2).unwrap();
        assert!(nmse(&est.h_matrix, &h).unwrap() < -200.0);

        let h = channel(8, 4, &[(Complex64::new(0.5, -0.5), 0.25, -0.25)]);
        let d = GridDictionary::from_multiplier(8, 4, 1.0).unwrap();
        let est = estimate_omp(&full_obs(&h), &d, 1).unwrap();
        assert!(nmse(&est.h_matrix, &h).unwrap() < -200.0);
    }

    #[test]
    fn off_grid_error_matches_best_single_atom_fit() {
        let n = 16;
        let h = channel(n, 1, &[(Complex64::new(1.0, 0.0), 1.5 / 16.0, 0.0)]);
        let d = GridDictionary::from_multiplier(n, 1, 1.0).unwrap();
        let est = estimate_omp(&full_obs(&h), &d, 1).unwrap();
        let target = vectorize(&h);
        // exhaustive best single-column projection
        let best = d
            .atoms
            .columns()
            .into_iter()
            .map(|c| {
                let c = c.to_owned();
                let a = c.mapv(|z| z.conj()).dot(&target) / c.mapv(|z| z.norm_sqr()).sum();
                vector_norm(&(&target - &c.mapv(|z| z * a)))
            })
            .fold(f64::INFINITY, f64::min);
        let got = vector_norm(&(&est.h_vec - &target));
        assert!((got - best).abs() < 1e-9);
        assert!(nmse(&est.h_matrix, &h).unwrap() > -10.0);
    }

    #[test]
    fn two_step_residual_is_no_better_than_exhaustive_pair() {
        let n = 12;
        let h = channel(n, 1, &[(Complex64::new(1.0, 0.0), 0.04, 0.0), (Complex64::new(0.0, 0.9), 0.09, 0.0)]);
        let d = GridDictionary::from_multiplier(n, 1, 1.0).unwrap();
        let est = estimate_omp(&full_obs(&h), &d, 2).unwrap();
        let Diagnostics::Omp(trace) = &est.diagnostics else { panic!() };
        assert_eq!(trace.selected.len(), 2);
        assert_eq!(trace.correlations.len(), 2);
        let y = vectorize(&h);
        let mut best = f64::INFINITY;
        for i in 0..d.len() {
            for j in i + 1..d.len() {
                let sub = d.atoms.select(Axis(1), &[i, j]);
                let (c, _) = lstsq(&sub, &y).unwrap();
                best = best.min(vector_norm(&(&y - &sub.dot(&c))));
            }
        }
        assert!(trace.residual_norms[1] >= best - 1e-9);
    }

    #[test]
    fn rejects_bad_sparsity_and_shapes() {
        let h = channel(4, 1, &[(Complex64::new(1.0, 0.0), 0.0, 0.0)]);
        let d = GridDictionary::from_multiplier(4, 1, 1.0).unwrap();
        assert!(estimate_omp(&full_obs(&h), &d, 0).is_err());
        assert!(estimate_omp(&full_obs(&h), &d, 5).is_err());
        let d2 = GridDictionary::from_multiplier(4, 2, 1.0).unwrap();
        assert!(estimate_omp(&full_obs(&h), &d2, 1).is_err());
    }
}
