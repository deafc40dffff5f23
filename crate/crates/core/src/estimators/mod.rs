//! Channel estimators built on the SDP solver, plus the OMP baseline.
//!
//! Every estimator reports `H_hat` as an `n_r x n_t` matrix (a single row in
//! one dimension) regardless of the internal parametrization. The 1D SDP
//! works on the conjugate-transposed channel `H^H = sum_l conj(alpha_l)
//! a(theta_l)`; the 2D SDP works on `vec(H) = sum_l alpha_l conj(a(theta_l))
//! (x) a(phi_l)`, whose transmit frequencies are `-theta_l`.

mod omp;

pub use omp::{estimate_omp, GridDictionary, OmpTrace};

use ndarray::{Array1, Array2};

use crate::fs_toeplitz::{
    vandermonde_retrieve, BetaCoeffs, RetrievalOptions, StructuredToeplitz, VandermondeDecomposition,
};
use crate::linalg::{frobenius_norm, kron};
use crate::signal_model::{FrequencyInterval, MeasurementSet};
use crate::solver::{default_mu, solve, ConstraintMode, SdpProblem, SdpSolution, SolverOptions};
use crate::{Complex64, Error, Result};

/// Value reported by [`nmse`] for an exact estimate.
pub const NMSE_FLOOR_DB: f64 = -300.0;

/// Retrieval settings for SDP output, whose accuracy is set by the solver
/// tolerances rather than by machine precision.
pub const SOLVER_RETRIEVAL: RetrievalOptions = RetrievalOptions {
    rank_threshold: 1e-3,
    residual_tolerance: 1e-2,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnmOptions {
    /// Regularization weight; `None` selects `sigma sqrt(N log N)` from the
    /// measurement noise level.
    pub mu: Option<f64>,
    pub solver: SolverOptions,
    /// Run frequency retrieval on the Toeplitz solution.
    pub retrieve: bool,
    pub retrieval: RetrievalOptions,
}

impl Default for AnmOptions {
    fn default() -> Self {
        AnmOptions {
            mu: None,
            solver: SolverOptions::default(),
            retrieve: false,
            retrieval: SOLVER_RETRIEVAL,
        }
    }
}

/// Compact record of an SDP solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdpSummary {
    pub mu: f64,
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub psd_violation: f64,
}

impl SdpSummary {
    fn from_solution(sol: &SdpSolution, mu: f64) -> Self {
        SdpSummary {
            mu,
            objective: sol.objective,
            primal_residual: sol.primal_residual,
            dual_residual: sol.dual_residual,
            iterations: sol.iterations,
            converged: sol.converged,
            psd_violation: sol.psd_violation,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Diagnostics {
    Sdp(SdpSummary),
    Omp(OmpTrace),
}

impl Diagnostics {
    /// Solver iterations, or OMP steps.
    pub fn iterations(&self) -> usize {
        match self {
            Diagnostics::Sdp(s) => s.iterations,
            Diagnostics::Omp(t) => t.selected.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateResult {
    /// `n_r x n_t` channel estimate.
    pub h_matrix: Array2<Complex64>,
    /// Column-major `vec(h_matrix)`.
    pub h_vec: Array1<Complex64>,
    pub nmse_db: Option<f64>,
    /// Retrieved paths, in channel frequencies `(theta, phi)`.
    pub retrieved: Option<VandermondeDecomposition>,
    pub diagnostics: Diagnostics,
}

impl EstimateResult {
    fn new(h_matrix: Array2<Complex64>, diagnostics: Diagnostics) -> Self {
        EstimateResult {
            h_vec: vectorize(&h_matrix),
            h_matrix,
            nmse_db: None,
            retrieved: None,
            diagnostics,
        }
    }

    /// Fills `nmse_db` against the true channel.
    pub fn with_truth(mut self, h_true: &Array2<Complex64>) -> Result<Self> {
        self.nmse_db = Some(nmse(&self.h_matrix, h_true)?);
        Ok(self)
    }
}

/// Column-major vectorization.
pub fn vectorize(h: &Array2<Complex64>) -> Array1<Complex64> {
    let (rows, cols) = h.dim();
    Array1::from_shape_fn(rows * cols, |i| h[[i % rows, i / rows]])
}

/// Inverse of [`vectorize`] for an `rows x (len / rows)` matrix.
pub fn unvectorize(v: &Array1<Complex64>, rows: usize) -> Result<Array2<Complex64>> {
    if rows == 0 || v.len() % rows != 0 {
        return Err(Error::DimensionMismatch(format!(
            "cannot reshape {} entries into {rows} rows",
            v.len()
        )));
    }
    let cols = v.len() / rows;
    Ok(Array2::from_shape_fn((rows, cols), |(r, c)| v[c * rows + r]))
}

/// `10 log10(||H_hat - H||_F^2 / ||H||_F^2)`, floored at [`NMSE_FLOOR_DB`].
pub fn nmse(h_hat: &Array2<Complex64>, h_true: &Array2<Complex64>) -> Result<f64> {
    if h_hat.dim() != h_true.dim() {
        return Err(Error::DimensionMismatch(format!(
            "estimate is {:?}, truth is {:?}",
            h_hat.dim(),
            h_true.dim()
        )));
    }
    let den = frobenius_norm(h_true.view()).powi(2);
    if den == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let num = frobenius_norm((h_hat - h_true).view()).powi(2);
    Ok((10.0 * (num / den).log10()).max(NMSE_FLOOR_DB))
}

/// Sensing operator acting on `vec(H)`: `vec(Y) = (X^T F^T (x) I) vec(H)`.
pub fn vec_sensing_operator(m: &MeasurementSet) -> Array2<Complex64> {
    kron(&xt_ft(m), &Array2::eye(m.n_r()))
}

/// `X^T F^T`, an `S x n_t` matrix.
fn xt_ft(m: &MeasurementSet) -> Array2<Complex64> {
    let mut out = m.f.t().to_owned();
    for (mut row, &x) in out.rows_mut().into_iter().zip(m.pilots.iter()) {
        row.mapv_inplace(|z| z * x);
    }
    out
}

fn check_measurements(m: &MeasurementSet) -> Result<()> {
    if m.f.ncols() != m.slots() || m.y.ncols() != m.slots() {
        return Err(Error::DimensionMismatch(format!(
            "Y is {:?}, F is {:?}, {} pilots",
            m.y.dim(),
            m.f.dim(),
            m.slots()
        )));
    }
    if m.n_t() == 0 || m.n_r() == 0 || m.slots() == 0 {
        return Err(Error::DimensionMismatch("empty measurement set".into()));
    }
    Ok(())
}

fn resolve_mu(m: &MeasurementSet, opts: &AnmOptions) -> Result<f64> {
    let mu = match opts.mu {
        Some(mu) => mu,
        None => default_mu(m.noise_std(), m.n_t() * m.n_r()),
    };
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "weight {mu} must be positive; give it explicitly for noiseless data"
        )));
    }
    Ok(mu)
}

fn run_sdp(problem: SdpProblem, opts: &AnmOptions) -> Result<SdpSolution> {
    let sol = solve(&problem, &opts.solver)?;
    if !sol.converged {
        return Err(Error::NotConverged {
            iterations: sol.iterations,
            primal: sol.primal_residual,
            dual: sol.dual_residual,
        });
    }
    Ok(sol)
}

/// 1D problem in the conjugated domain: `conj(y) = X^H F^H H^H`.
fn solve_1d(m: &MeasurementSet, mode: ConstraintMode, opts: &AnmOptions) -> Result<EstimateResult> {
    check_measurements(m)?;
    if m.n_r() != 1 {
        return Err(Error::DimensionMismatch(format!("1D estimation needs n_r = 1, got {}", m.n_r())));
    }
    let mu = resolve_mu(m, opts)?;
    let n_t = m.n_t();
    let phi = xt_ft(m).mapv(|z| z.conj());
    let y = m.y.row(0).mapv(|z| z.conj());
    let sol = run_sdp(SdpProblem::estimation(phi, y, mu, n_t, 1, mode)?, opts)?;
    let h_row = sol.h_hat.mapv(|z| z.conj()).insert_axis(ndarray::Axis(0));
    let mut out = EstimateResult::new(h_row, Diagnostics::Sdp(SdpSummary::from_solution(&sol, mu)));
    if opts.retrieve {
        out.retrieved = sol
            .one_level_seq()
            .and_then(|seq| vandermonde_retrieve(StructuredToeplitz::OneLevel(&seq), None, &opts.retrieval).ok());
    }
    Ok(out)
}

/// 2D problem on `vec(H)`; `tx` is given in channel frequencies and negated
/// internally.
fn solve_2d(m: &MeasurementSet, mode: ConstraintMode, opts: &AnmOptions) -> Result<EstimateResult> {
    check_measurements(m)?;
    let (n_t, n_r) = (m.n_t(), m.n_r());
    if n_t < 2 || n_r < 2 {
        return Err(Error::DimensionMismatch(format!("2D estimation needs n_t, n_r > 1, got {n_t} x {n_r}")));
    }
    let mu = resolve_mu(m, opts)?;
    let phi = vec_sensing_operator(m);
    let y = vectorize(&m.y);
    let sol = run_sdp(SdpProblem::estimation(phi, y, mu, n_t, n_r, mode)?, opts)?;
    let h_matrix = unvectorize(&sol.h_hat, n_r)?;
    let mut out = EstimateResult::new(h_matrix, Diagnostics::Sdp(SdpSummary::from_solution(&sol, mu)));
    if opts.retrieve {
        out.retrieved = vandermonde_retrieve(StructuredToeplitz::TwoLevel(&sol.toeplitz_seq), None, &opts.retrieval)
            .ok()
            .map(|mut d| {
                for a in &mut d.atoms {
                    a.tx_freq = negate_frequency(a.tx_freq);
                }
                d
            });
    }
    Ok(out)
}

fn negate_frequency(f: f64) -> f64 {
    if f == -0.5 {
        f
    } else {
        -f
    }
}

/// Frequency-selective ANM for `n_r = 1` with transmit prior `interval`.
pub fn estimate_fs_anm_1d(m: &MeasurementSet, interval: FrequencyInterval, opts: &AnmOptions) -> Result<EstimateResult> {
    let mode = ConstraintMode::FrequencySelective {
        tx: BetaCoeffs::new(interval),
        rx: None,
    };
    solve_1d(m, mode, opts)
}

/// Frequency-selective ANM with transmit prior `tx` and receive prior `rx`.
pub fn estimate_fs_anm_2d(
    m: &MeasurementSet,
    tx: FrequencyInterval,
    rx: FrequencyInterval,
    opts: &AnmOptions,
) -> Result<EstimateResult> {
    let mode = ConstraintMode::FrequencySelective {
        tx: BetaCoeffs::new(tx.negated()),
        rx: Some(BetaCoeffs::new(rx)),
    };
    solve_2d(m, mode, opts)
}

/// ANM without band constraints; 1D when `n_r = 1`.
pub fn estimate_anm_plain(m: &MeasurementSet, opts: &AnmOptions) -> Result<EstimateResult> {
    if m.n_r() == 1 {
        solve_1d(m, ConstraintMode::Plain, opts)
    } else {
        solve_2d(m, ConstraintMode::Plain, opts)
    }
}
