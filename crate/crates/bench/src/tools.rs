//! Single-shot diagnostics behind the `norm` and `retrieve` subcommands.

use std::io::Write;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use fsanm::fs_toeplitz::{
    vandermonde_retrieve, BetaCoeffs, RetrievalOptions, StructuredToeplitz, TwoLevelToeplitzSeq,
};
use fsanm::solver::{solve, ConstraintMode, SdpProblem, SolverOptions, TraceRow};
use fsanm::Complex64;

use crate::error::{BenchError, Result};

/// Vector whose atomic norm is wanted. Entries are `[re, im]` pairs; for
/// `n_r > 1` the vector is `vec(H)` (column-major).
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct NormRequest {
    pub n_t: usize,
    #[serde(default = "one")]
    pub n_r: usize,
    pub h: Vec<[f64; 2]>,
    /// Transmit band in the frequencies of the SDP atoms.
    #[serde(default)]
    pub tx_band: Option<[f64; 2]>,
    #[serde(default)]
    pub rx_band: Option<[f64; 2]>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Serialize)]
pub struct NormReport {
    pub norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub psd_violation: f64,
    #[serde(skip)]
    pub trace: Vec<TraceRow>,
}

fn complex_vec(v: &[[f64; 2]]) -> Array1<Complex64> {
    v.iter().map(|&[re, im]| Complex64::new(re, im)).collect()
}

impl NormRequest {
    fn mode(&self) -> Result<ConstraintMode> {
        let band = |b: Option<[f64; 2]>| b.map(|[lo, hi]| BetaCoeffs::from_bounds(lo, hi)).transpose();
        let tx = band(self.tx_band)?;
        let rx = band(self.rx_band)?;
        Ok(match (tx, rx) {
            (None, None) => ConstraintMode::Plain,
            (Some(tx), rx) => ConstraintMode::FrequencySelective { tx, rx },
            (None, Some(_)) => {
                return Err(BenchError::Config("a receive band needs a transmit band".into()));
            }
        })
    }
}

pub fn evaluate_norm(req: &NormRequest, opts: &SolverOptions) -> Result<NormReport> {
    let h = complex_vec(&req.h);
    let problem = SdpProblem::norm_evaluation(h, req.n_t, req.n_r, req.mode()?)?;
    let sol = solve(&problem, opts)?;
    Ok(NormReport {
        norm: sol.objective,
        iterations: sol.iterations,
        converged: sol.converged,
        primal_residual: sol.primal_residual,
        dual_residual: sol.dual_residual,
        psd_violation: sol.psd_violation,
        trace: sol.trace,
    })
}

pub fn write_trace<W: Write>(trace: &[TraceRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(["iteration", "primal_residual", "dual_residual", "rho", "objective"])?;
    for r in trace {
        w.write_record([
            r.iteration.to_string(),
            r.primal_residual.to_string(),
            r.dual_residual.to_string(),
            r.rho.to_string(),
            r.objective.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Two-level generating sequence, row-major over lags
/// `(k, j) = (-(n_t-1).., -(n_r-1)..)`; `n_r = 1` gives a one-level sequence.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RetrieveRequest {
    pub n_t: usize,
    #[serde(default = "one")]
    pub n_r: usize,
    pub seq: Vec<[f64; 2]>,
    #[serde(default)]
    pub order: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RetrievedAtom {
    pub coefficient: f64,
    pub tx_freq: f64,
    pub rx_freq: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RetrieveReport {
    pub order: usize,
    pub residual: f64,
    pub atoms: Vec<RetrievedAtom>,
}

pub fn retrieve(req: &RetrieveRequest, opts: &RetrievalOptions) -> Result<RetrieveReport> {
    if req.n_t == 0 || req.n_r == 0 {
        return Err(BenchError::Config("array sizes must be positive".into()));
    }
    let shape = (2 * req.n_t - 1, 2 * req.n_r - 1);
    let v = Array2::from_shape_vec(shape, complex_vec(&req.seq).to_vec())
        .map_err(|_| BenchError::Config(format!("sequence needs {} entries, got {}", shape.0 * shape.1, req.seq.len())))?;
    let seq = TwoLevelToeplitzSeq::new(req.n_t, req.n_r, v)?;
    let d = if req.n_r == 1 {
        vandermonde_retrieve(StructuredToeplitz::OneLevel(&seq.tx_marginal()), req.order, opts)?
    } else {
        vandermonde_retrieve(StructuredToeplitz::TwoLevel(&seq), req.order, opts)?
    };
    Ok(RetrieveReport {
        order: d.order(),
        residual: d.residual_norm,
        atoms: d
            .atoms
            .iter()
            .map(|a| RetrievedAtom {
                coefficient: a.coefficient,
                tx_freq: a.tx_freq,
                rx_freq: a.rx_freq,
            })
            .collect(),
    })
}
