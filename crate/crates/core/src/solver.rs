//! ADMM solver for the regularized Toeplitz SDPs behind (FS-)ANM.
//!
//! The problem solved is
//!
//! ```text
//! minimize   1/2 ||y - Phi h||^2 + mu ( Tr T(V) / (2N) + s / 2 )
//! subject to [[T(V), h], [h^H, s]] >= 0,  T_beta1(V) >= 0,  T_beta2(V) >= 0
//! ```
//!
//! over the lag array `V`, the vector `h` and the scalar `s`; the band
//! constraints are present only in frequency-selective mode. Each PSD block
//! gets its own consensus copy `Z_i`. The `(V, h, s)` update is an
//! unconstrained quadratic: `h` solves a fixed Hermitian system, `s` is
//! explicit, and `V` solves `sum_i A_i^* A_i V = rhs` with a Gram matrix that
//! depends only on the dimensions and band coefficients, so it is factored
//! once per problem.

use std::collections::VecDeque;

use ndarray::{s, Array1, Array2};
use ndarray_linalg::cholesky::{CholeskyFactorized, FactorizeC, SolveC};
use ndarray_linalg::UPLO;

use crate::fs_toeplitz::{BetaCoeffs, LagOperator, ToeplitzSeq, TwoLevelToeplitzSeq};
use crate::linalg::{frobenius_norm, spectrum_bounds, vector_norm, PsdProjector};
use crate::{Complex64, Error, Result, C_ZERO};

/// Which PSD constraints accompany the block-arrow constraint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConstraintMode {
    /// No band constraints: the ordinary atomic norm.
    Plain,
    /// Band constraints on the transmit lag dimension and, when given, on the
    /// receive lag dimension.
    FrequencySelective {
        tx: BetaCoeffs,
        rx: Option<BetaCoeffs>,
    },
}

/// Data-fidelity term of the problem.
#[derive(Debug, Clone, PartialEq)]
pub enum Fidelity {
    /// `1/2 ||y - Phi h||^2`.
    LeastSquares { phi: Array2<Complex64>, y: Array1<Complex64> },
    /// `h` is pinned to the given vector; the optimum is then its atomic norm
    /// (with unit weight).
    Pinned(Array1<Complex64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem {
    pub fidelity: Fidelity,
    /// Regularization weight; ignored for [`Fidelity::Pinned`].
    pub mu: f64,
    pub n_t: usize,
    /// `1` for one-dimensional problems.
    pub n_r: usize,
    pub mode: ConstraintMode,
}

impl SdpProblem {
    /// Regularized least-squares estimation problem.
    pub fn estimation(
        phi: Array2<Complex64>,
        y: Array1<Complex64>,
        mu: f64,
        n_t: usize,
        n_r: usize,
        mode: ConstraintMode,
    ) -> Result<Self> {
        let p = SdpProblem {
            fidelity: Fidelity::LeastSquares { phi, y },
            mu,
            n_t,
            n_r,
            mode,
        };
        p.validate()?;
        Ok(p)
    }

    /// Problem whose optimum is the atomic norm of `h`.
    pub fn norm_evaluation(h: Array1<Complex64>, n_t: usize, n_r: usize, mode: ConstraintMode) -> Result<Self> {
        let p = SdpProblem {
            fidelity: Fidelity::Pinned(h),
            mu: 1.0,
            n_t,
            n_r,
            mode,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.n_t * self.n_r
    }

    fn validate(&self) -> Result<()> {
        if self.n_t == 0 || self.n_r == 0 {
            return Err(Error::InvalidArgument("problem dimensions must be positive".into()));
        }
        let n = self.dim();
        match &self.fidelity {
            Fidelity::LeastSquares { phi, y } => {
                if phi.ncols() != n || phi.nrows() != y.len() {
                    return Err(Error::DimensionMismatch(format!(
                        "sensing operator is {:?}, measurements {}, unknowns {n}",
                        phi.dim(),
                        y.len()
                    )));
                }
                if !(self.mu > 0.0) || !self.mu.is_finite() {
                    return Err(Error::InvalidArgument(format!("mu must be positive, got {}", self.mu)));
                }
            }
            Fidelity::Pinned(h) => {
                if h.len() != n {
                    return Err(Error::DimensionMismatch(format!("vector of length {} for {n} unknowns", h.len())));
                }
            }
        }
        if let ConstraintMode::FrequencySelective { rx, .. } = &self.mode {
            if self.n_t < 2 {
                return Err(Error::DimensionMismatch("band constraint needs n_t >= 2".into()));
            }
            if rx.is_some() && self.n_r < 2 {
                return Err(Error::DimensionMismatch("receive band constraint needs n_r >= 2".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Initial ADMM penalty relative to `weight / ||Phi^H y||` (the pinned
    /// vector's norm for norm evaluation).
    pub rho: f64,
    pub max_iter: usize,
    pub eps_abs: f64,
    pub eps_rel: f64,
    /// Residual-balancing period (iterations).
    pub adapt_interval: usize,
    /// Multiplicative penalty change when rebalancing.
    pub adapt_factor: f64,
    /// Residual ratio that triggers rebalancing.
    pub adapt_ratio: f64,
    /// Over-relaxation parameter in `(0, 2)`; `1` is plain ADMM.
    pub relaxation: f64,
    /// Anderson acceleration memory; `0` runs plain ADMM.
    pub anderson_memory: usize,
    /// An accelerated point is kept only when its fixed-point residual is at
    /// most `safeguard` times that of the point it came from.
    pub safeguard: f64,
    pub record_trace: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            rho: 0.1,
            max_iter: 50_000,
            eps_abs: 1e-6,
            eps_rel: 1e-4,
            adapt_interval: 25,
            adapt_factor: 2.0,
            adapt_ratio: 10.0,
            relaxation: 1.0,
            anderson_memory: 5,
            safeguard: 1.0,
            record_trace: false,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0) || !(self.eps_abs >= 0.0) || !(self.eps_rel >= 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidArgument("invalid solver options".into()));
        }
        if !(self.relaxation > 0.0 && self.relaxation < 2.0) || !(self.adapt_factor >= 1.0) || !(self.safeguard > 0.0) {
            return Err(Error::InvalidArgument("relaxation must lie in (0, 2), adapt factor >= 1".into()));
        }
        Ok(())
    }
}

/// One iteration of the residual trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub rho: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpSolution {
    pub h_hat: Array1<Complex64>,
    /// Lag array of the Toeplitz variable (`n_r == 1` for one-dimensional
    /// problems).
    pub toeplitz_seq: TwoLevelToeplitzSeq,
    pub t_scalar: f64,
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Largest relative PSD violation `max(0, -lambda_min) / max(1, lambda_max)`
    /// over the block-arrow and band matrices at the returned point.
    pub psd_violation: f64,
    pub trace: Vec<TraceRow>,
}

impl SdpSolution {
    /// Regularizer value `Tr T(V) / (2N) + s / 2` at the returned point.
    pub fn atomic_norm_value(&self) -> f64 {
        0.5 * (self.toeplitz_seq.lag(0, 0).re + self.t_scalar)
    }

    /// One-level view of the Toeplitz variable for one-dimensional problems.
    pub fn one_level_seq(&self) -> Option<ToeplitzSeq> {
        if self.toeplitz_seq.n_r() != 1 {
            return None;
        }
        Some(self.toeplitz_seq.tx_marginal())
    }

    /// Whether the returned point passes the PSD check at tolerance `eps`.
    pub fn is_psd_within(&self, eps: f64) -> bool {
        self.psd_violation <= eps
    }
}

struct Cone {
    /// `None` for the block-arrow matrix.
    op: Option<LagOperator>,
    proj: PsdProjector,
    /// Projection argument.
    s: Array2<Complex64>,
    z: Array2<Complex64>,
}

/// Solves the problem with ADMM. Non-convergence is reported through
/// `converged = false`; only malformed input is an error.
pub fn solve(problem: &SdpProblem, opts: &SolverOptions) -> Result<SdpSolution> {
    problem.validate()?;
    opts.validate()?;
    Admm::new(problem, opts)?.run()
}

/// Atomic norm of `h` (frequency-selective when `mode` carries bands).
pub fn atomic_norm(h: &Array1<Complex64>, n_t: usize, n_r: usize, mode: ConstraintMode, opts: &SolverOptions) -> Result<f64> {
    if vector_norm(h) == 0.0 {
        return Ok(0.0);
    }
    let problem = SdpProblem::norm_evaluation(h.clone(), n_t, n_r, mode)?;
    let sol = solve(&problem, opts)?;
    if !sol.converged {
        return Err(Error::NotConverged {
            iterations: sol.iterations,
            primal: sol.primal_residual,
            dual: sol.dual_residual,
        });
    }
    Ok(sol.objective)
}

/// Default weight `sigma sqrt(N log N)` for `N` unknowns.
pub fn default_mu(noise_std: f64, n: usize) -> f64 {
    let n = n as f64;
    noise_std * (n * n.ln()).sqrt()
}

/// Primal variables `(V, h, s)`.
#[derive(Clone)]
struct Primal {
    v: Array2<Complex64>,
    h: Array1<Complex64>,
    s: f64,
}

/// Adjoint image of the constraint maps, split by variable.
struct AdjointImage {
    v: Array2<Complex64>,
    h: Array1<Complex64>,
    s: f64,
}

impl AdjointImage {
    fn norm_sq(&self) -> f64 {
        self.v.iter().map(|z| z.norm_sqr()).sum::<f64>() + self.h.iter().map(|z| z.norm_sqr()).sum::<f64>() + self.s * self.s
    }
}

// The iteration is run on the projection arguments `S_i`: with
// `Z_i = Pi(S_i)` and `U_i = S_i - Z_i`, the primal step targets
// `Z_i - U_i`, and the next argument is `S_i + alpha (A_i x - Z_i)`.
struct Admm<'a> {
    problem: &'a SdpProblem,
    opts: &'a SolverOptions,
    n: usize,
    rho: f64,
    toeplitz: LagOperator,
    gram: CholeskyFactorized<ndarray::OwnedRepr<Complex64>>,
    h_system: Option<CholeskyFactorized<ndarray::OwnedRepr<Complex64>>>,
    phi_h_y: Option<Array1<Complex64>>,
    cones: Vec<Cone>,
    x: Primal,
}

impl<'a> Admm<'a> {
    fn new(problem: &'a SdpProblem, opts: &'a SolverOptions) -> Result<Self> {
        let (nt, nr) = (problem.n_t, problem.n_r);
        let n = nt * nr;
        let toeplitz = LagOperator::toeplitz(nt, nr);
        let mut bands = Vec::new();
        if let ConstraintMode::FrequencySelective { tx, rx } = &problem.mode {
            bands.push(LagOperator::beta_tx(nt, nr, tx)?);
            if let Some(rx) = rx {
                bands.push(LagOperator::beta_rx(nt, nr, rx)?);
            }
        }
        let mut gram = toeplitz.gram();
        for op in &bands {
            gram = gram + op.gram();
        }
        let gram = gram.factorizec(UPLO::Lower)?;
        let phi_h_y = match &problem.fidelity {
            Fidelity::LeastSquares { phi, y } => Some(adjoint_apply(phi, y)),
            Fidelity::Pinned(_) => None,
        };
        let mut cones = vec![Cone {
            op: None,
            proj: PsdProjector::new(n + 1),
            s: Array2::zeros((n + 1, n + 1)),
            z: Array2::zeros((n + 1, n + 1)),
        }];
        for op in bands {
            let d = op.out_dim();
            cones.push(Cone {
                op: Some(op),
                proj: PsdProjector::new(d),
                s: Array2::zeros((d, d)),
                z: Array2::zeros((d, d)),
            });
        }
        let data_scale = match (&problem.fidelity, &phi_h_y) {
            (Fidelity::Pinned(h), _) => vector_norm(h),
            (_, Some(v)) => vector_norm(v),
            _ => 0.0,
        };
        let weight = match problem.fidelity {
            Fidelity::LeastSquares { .. } => problem.mu,
            Fidelity::Pinned(_) => 1.0,
        };
        let rho = if data_scale > 0.0 {
            opts.rho * weight / data_scale
        } else {
            opts.rho * weight
        };
        let h = match &problem.fidelity {
            Fidelity::Pinned(h) => h.clone(),
            Fidelity::LeastSquares { .. } => Array1::zeros(n),
        };
        let mut admm = Admm {
            problem,
            opts,
            n,
            rho,
            gram,
            h_system: None,
            phi_h_y,
            cones,
            x: Primal {
                v: Array2::zeros(toeplitz.seq_shape()),
                h,
                s: 0.0,
            },
            toeplitz,
        };
        admm.factor_h_system()?;
        Ok(admm)
    }

    fn weight(&self) -> f64 {
        match self.problem.fidelity {
            Fidelity::LeastSquares { .. } => self.problem.mu,
            Fidelity::Pinned(_) => 1.0,
        }
    }

    fn factor_h_system(&mut self) -> Result<()> {
        if let Fidelity::LeastSquares { phi, .. } = &self.problem.fidelity {
            let mut m = adjoint_product(phi);
            for i in 0..self.n {
                m[[i, i]] += Complex64::new(2.0 * self.rho, 0.0);
            }
            self.h_system = Some(m.factorizec(UPLO::Lower)?);
        }
        Ok(())
    }

    fn objective(&self, x: &Primal) -> f64 {
        let reg = 0.5 * (x.v[[self.problem.n_t - 1, self.problem.n_r - 1]].re + x.s);
        match &self.problem.fidelity {
            Fidelity::LeastSquares { phi, y } => {
                let r = y - &phi.dot(&x.h);
                0.5 * r.iter().map(|z| z.norm_sqr()).sum::<f64>() + self.problem.mu * reg
            }
            Fidelity::Pinned(_) => reg,
        }
    }

    /// `A_i x` for cone `i`.
    fn apply(&self, i: usize, x: &Primal) -> Array2<Complex64> {
        match &self.cones[i].op {
            Some(op) => op.apply_unchecked(&x.v),
            None => {
                let n = self.n;
                let mut m = Array2::zeros((n + 1, n + 1));
                m.slice_mut(s![..n, ..n]).assign(&self.toeplitz.apply_unchecked(&x.v));
                for i in 0..n {
                    m[[i, n]] = x.h[i];
                    m[[n, i]] = x.h[i].conj();
                }
                m[[n, n]] = Complex64::new(x.s, 0.0);
                m
            }
        }
    }

    /// `sum_i A_i^* W_i`.
    fn adjoint(&self, w: &[Array2<Complex64>]) -> AdjointImage {
        let n = self.n;
        let mut out = AdjointImage {
            v: Array2::zeros(self.x.v.dim()),
            h: Array1::zeros(n),
            s: 0.0,
        };
        for (cone, wi) in self.cones.iter().zip(w) {
            match &cone.op {
                Some(op) => out.v = &out.v + &op.adjoint_unchecked(wi),
                None => {
                    out.v = &out.v + &self.toeplitz.adjoint_unchecked(&wi.slice(s![..n, ..n]).to_owned());
                    for i in 0..n {
                        out.h[i] += wi[[i, n]] + wi[[n, i]].conj();
                    }
                    out.s += wi[[n, n]].re;
                }
            }
        }
        out
    }

    /// Minimizer of the augmented Lagrangian against targets `W_i`.
    fn primal_step(&self, w: &[Array2<Complex64>]) -> Result<Primal> {
        let n = self.n;
        let img = self.adjoint(w);
        let mut rhs = img.v;
        let (nt, nr) = (self.problem.n_t, self.problem.n_r);
        rhs[[nt - 1, nr - 1]] -= Complex64::new(0.5 * self.weight() / self.rho, 0.0);
        let flat = Array1::from_iter(rhs.iter().cloned());
        let sol = self.gram.solvec(&flat)?;
        let v = Array2::from_shape_vec(self.x.v.dim(), sol.to_vec()).map_err(|e| Error::Linalg(e.to_string()))?;
        let h = match (&self.h_system, &self.phi_h_y) {
            (Some(chol), Some(phy)) => chol.solvec(&(phy + &img.h.mapv(|z| z * self.rho)))?,
            _ => self.x.h.clone(),
        };
        let w0 = &w[0];
        Ok(Primal {
            v: hermitian_lags(&v),
            h,
            s: w0[[n, n]].re - 0.5 * self.weight() / self.rho,
        })
    }

    fn run(mut self) -> Result<SdpSolution> {
        let opts = *self.opts;
        let alpha = opts.relaxation;
        let mut trace = Vec::new();
        let mut primal = f64::INFINITY;
        let mut dual = f64::INFINITY;
        let mut converged = false;
        let mut iterations = 0;

        let n_x = (self.x.v.len() + self.n + 1) as f64;
        let n_c: f64 = self.cones.iter().map(|c| (c.s.nrows() * c.s.nrows()) as f64).sum();
        let dim: usize = self.cones.iter().map(|c| 2 * c.s.len()).sum();
        let mut accel = Anderson::new(opts.anderson_memory, dim);
        // plain step from the last accepted point, and its residual norm
        let mut fallback: Option<(Vec<Array2<Complex64>>, f64)> = None;
        let mut last_z: Option<Vec<Array2<Complex64>>> = None;
        let mut balance = (0.0, 0.0);

        let mut it = 0;
        while it < opts.max_iter {
            it += 1;
            iterations = it;
            let mut w = Vec::with_capacity(self.cones.len());
            let mut u = Vec::with_capacity(self.cones.len());
            for c in &mut self.cones {
                c.z = c.proj.project(&c.s)?;
                let ui = &c.s - &c.z;
                w.push(&c.z - &ui);
                u.push(ui);
            }
            let x = self.primal_step(&w)?;
            let ax: Vec<_> = (0..self.cones.len()).map(|i| self.apply(i, &x)).collect();
            let r: Vec<_> = ax.iter().zip(&self.cones).map(|(a, c)| a - &c.z).collect();
            let r_norm = r.iter().map(frobenius_sq).sum::<f64>().sqrt();

            if let Some((plain, prev_norm)) = &fallback {
                if r_norm > opts.safeguard * prev_norm {
                    for (c, p) in self.cones.iter_mut().zip(plain) {
                        c.s = p.clone();
                    }
                    fallback = None;
                    accel.reset();
                    continue;
                }
            }
            self.x = x;

            let ax_norm = ax.iter().map(frobenius_sq).sum::<f64>().sqrt();
            let z_norm = self.cones.iter().map(|c| frobenius_sq(&c.z)).sum::<f64>().sqrt();
            primal = r_norm;
            dual = self.rho * self.adjoint(&r).norm_sq().sqrt();
            let dual_scale = self.rho * self.adjoint(&u).norm_sq().sqrt();
            let eps_pri = n_c.sqrt() * opts.eps_abs + opts.eps_rel * ax_norm.max(z_norm);
            let eps_dual = n_x.sqrt() * opts.eps_abs + opts.eps_rel * dual_scale;

            if opts.record_trace {
                trace.push(TraceRow {
                    iteration: it,
                    primal_residual: primal,
                    dual_residual: dual,
                    rho: self.rho,
                    objective: self.objective(&self.x),
                });
            }
            if primal <= eps_pri && dual <= eps_dual {
                converged = true;
                break;
            }

            // residual balancing on the change of the cone variables
            if let Some(prev) = &last_z {
                let dz: Vec<_> = self.cones.iter().zip(prev).map(|(c, p)| &c.z - p).collect();
                balance.0 += r_norm / eps_pri.max(f64::MIN_POSITIVE);
                balance.1 += self.rho * self.adjoint(&dz).norm_sq().sqrt() / eps_dual.max(f64::MIN_POSITIVE);
            }
            last_z = Some(self.cones.iter().map(|c| c.z.clone()).collect());

            let plain: Vec<_> = self
                .cones
                .iter()
                .zip(&r)
                .map(|(c, ri)| &c.s + &ri.mapv(|z| z * alpha))
                .collect();

            if opts.adapt_interval > 0 && it % opts.adapt_interval == 0 && opts.adapt_factor > 1.0 {
                let (p, d) = std::mem::take(&mut balance);
                let scale = if p > opts.adapt_ratio * d {
                    opts.adapt_factor
                } else if d > opts.adapt_ratio * p {
                    1.0 / opts.adapt_factor
                } else {
                    1.0
                };
                if scale != 1.0 {
                    // keep the scaled duals fixed: U -> U / scale
                    self.rho *= scale;
                    for ((c, p), ui) in self.cones.iter_mut().zip(&plain).zip(&u) {
                        let z_next = p + &ui.mapv(|z| z * (1.0 / scale - 1.0));
                        c.s = z_next;
                    }
                    self.factor_h_system()?;
                    accel.reset();
                    fallback = None;
                    last_z = None;
                    continue;
                }
            }

            let g: Vec<f64> = flatten(r.iter().map(|ri| ri.mapv(|z| z * -alpha)));
            let s_flat = flatten(self.cones.iter().map(|c| c.s.clone()));
            match accel.step(&s_flat, &g) {
                Some(next) => {
                    unflatten(&next, self.cones.iter_mut().map(|c| &mut c.s));
                    fallback = Some((plain, r_norm));
                }
                None => {
                    for (c, p) in self.cones.iter_mut().zip(plain) {
                        c.s = p;
                    }
                    fallback = None;
                }
            }
        }

        let psd_violation = self.psd_violation()?;
        let objective = self.objective(&self.x);
        let toeplitz_seq = TwoLevelToeplitzSeq::new(self.problem.n_t, self.problem.n_r, self.x.v.clone())?;
        Ok(SdpSolution {
            h_hat: self.x.h,
            toeplitz_seq,
            t_scalar: self.x.s,
            objective,
            primal_residual: primal,
            dual_residual: dual,
            iterations,
            converged,
            psd_violation,
            trace,
        })
    }

    fn psd_violation(&self) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for i in 0..self.cones.len() {
            worst = worst.max(violation(&self.apply(i, &self.x))?);
        }
        Ok(worst)
    }
}

fn flatten(mats: impl Iterator<Item = Array2<Complex64>>) -> Vec<f64> {
    let mut out = Vec::new();
    for m in mats {
        for z in m.iter() {
            out.push(z.re);
            out.push(z.im);
        }
    }
    out
}

fn unflatten<'m>(flat: &[f64], mats: impl Iterator<Item = &'m mut Array2<Complex64>>) {
    let mut k = 0;
    for m in mats {
        for z in m.iter_mut() {
            *z = Complex64::new(flat[k], flat[k + 1]);
            k += 2;
        }
    }
}

/// Type-II Anderson acceleration of a fixed-point map `x -> x - g(x)`.
struct Anderson {
    memory: usize,
    prev: Option<(Vec<f64>, Vec<f64>)>,
    ds: VecDeque<Vec<f64>>,
    dg: VecDeque<Vec<f64>>,
    /// Gram matrix of the `dg` columns.
    gram: VecDeque<VecDeque<f64>>,
}

impl Anderson {
    fn new(memory: usize, _dim: usize) -> Self {
        Anderson {
            memory,
            prev: None,
            ds: VecDeque::new(),
            dg: VecDeque::new(),
            gram: VecDeque::new(),
        }
    }

    fn reset(&mut self) {
        self.prev = None;
        self.ds.clear();
        self.dg.clear();
        self.gram.clear();
    }

    /// Accelerated next point, or `None` when there is no history yet.
    fn step(&mut self, x: &[f64], g: &[f64]) -> Option<Vec<f64>> {
        if self.memory == 0 {
            return None;
        }
        if let Some((px, pg)) = self.prev.take() {
            let ds: Vec<f64> = x.iter().zip(&px).map(|(a, b)| a - b).collect();
            let dg: Vec<f64> = g.iter().zip(&pg).map(|(a, b)| a - b).collect();
            if self.dg.len() == self.memory {
                self.ds.pop_front();
                self.dg.pop_front();
                self.gram.pop_front();
                for row in &mut self.gram {
                    row.pop_front();
                }
            }
            let dots: Vec<f64> = self.dg.iter().map(|c| dot(c, &dg)).collect();
            for (row, &d) in self.gram.iter_mut().zip(&dots) {
                row.push_back(d);
            }
            let mut last: VecDeque<f64> = dots.into();
            last.push_back(dot(&dg, &dg));
            self.gram.push_back(last);
            self.ds.push_back(ds);
            self.dg.push_back(dg);
        }
        self.prev = Some((x.to_vec(), g.to_vec()));
        let m = self.dg.len();
        if m == 0 {
            return None;
        }
        let rhs: Vec<f64> = self.dg.iter().map(|c| dot(c, g)).collect();
        let trace: f64 = (0..m).map(|i| self.gram[i][i]).sum();
        let reg = 1e-10 * trace.max(f64::MIN_POSITIVE);
        let mut a: Vec<Vec<f64>> = (0..m)
            .map(|i| (0..m).map(|j| self.gram[i][j] + if i == j { reg } else { 0.0 }).collect())
            .collect();
        let gamma = solve_small(&mut a, rhs)?;
        let mut next: Vec<f64> = x.iter().zip(g).map(|(a, b)| a - b).collect();
        for (j, &gj) in gamma.iter().enumerate() {
            for ((n, s), d) in next.iter_mut().zip(&self.ds[j]).zip(&self.dg[j]) {
                *n -= gj * (s - d);
            }
        }
        next.iter().all(|v| v.is_finite()).then_some(next)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gaussian elimination with partial pivoting; `None` when singular.
fn solve_small(a: &mut [Vec<f64>], mut b: Vec<f64>) -> Option<Vec<f64>> {
    let m = b.len();
    for col in 0..m {
        let piv = (col..m).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < f64::MIN_POSITIVE {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..m {
            let f = a[row][col] / a[col][col];
            for k in col..m {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; m];
    for row in (0..m).rev() {
        let s: f64 = (row + 1..m).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

fn violation(m: &Array2<Complex64>) -> Result<f64> {
    let b = spectrum_bounds(m)?;
    Ok((-b.min).max(0.0) / b.max.max(1.0))
}

fn frobenius_sq(m: &Array2<Complex64>) -> f64 {
    let f = frobenius_norm(m.view());
    f * f
}

/// `v_{-j}(-k) := conj(v_j(k))` by averaging.
fn hermitian_lags(v: &Array2<Complex64>) -> Array2<Complex64> {
    let (a, b) = v.dim();
    Array2::from_shape_fn((a, b), |(i, j)| 0.5 * (v[[i, j]] + v[[a - 1 - i, b - 1 - j]].conj()))
}

/// `Phi^H y`.
fn adjoint_apply(phi: &Array2<Complex64>, y: &Array1<Complex64>) -> Array1<Complex64> {
    let mut out = Array1::from_elem(phi.ncols(), C_ZERO);
    for (row, &yi) in phi.rows().into_iter().zip(y.iter()) {
        for (o, p) in out.iter_mut().zip(row.iter()) {
            *o += p.conj() * yi;
        }
    }
    out
}

/// `Phi^H Phi`.
fn adjoint_product(phi: &Array2<Complex64>) -> Array2<Complex64> {
    phi.t().mapv(|z| z.conj()).dot(phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::kron_vec;
    use crate::signal_model::{steering, FrequencyInterval};

    fn fs_1d(lo: f64, hi: f64) -> ConstraintMode {
        ConstraintMode::FrequencySelective {
            tx: BetaCoeffs::from_bounds(lo, hi).unwrap(),
            rx: None,
        }
    }

    #[test]
    fn cholesky_solves_hermitian_system() {
        let a = Array2::from_shape_fn((4, 3), |(i, j)| Complex64::new((i * j) as f64 + 1.0, i as f64 - j as f64));
        let mut m = adjoint_product(&a);
        for i in 0..3 {
            m[[i, i]] += Complex64::new(1.0, 0.0);
        }
        let rhs = Array1::from(vec![Complex64::new(1.0, 2.0), Complex64::new(-1.0, 0.5), Complex64::new(0.0, 1.0)]);
        let x = m.factorizec(UPLO::Lower).unwrap().solvec(&rhs).unwrap();
        assert!(vector_norm(&(m.dot(&x) - &rhs)) < 1e-12);
    }

    #[test]
    fn zero_measurement_gives_zero() {
        let n = 8;
        let phi = Array2::<Complex64>::eye(n);
        let p = SdpProblem::estimation(phi, Array1::zeros(n), 0.5, n, 1, fs_1d(-0.2, 0.3)).unwrap();
        let sol = solve(&p, &SolverOptions::default()).unwrap();
        assert!(sol.converged);
        assert!(vector_norm(&sol.h_hat) < 1e-8);
        assert!(sol.objective.abs() < 1e-6);
        assert!(sol.toeplitz_seq.as_array().iter().all(|z| z.norm() < 1e-6));
    }

    #[test]
    fn single_atom_norm_one_level() {
        let h = steering(12, 0.1).mapv(|z| z * 3.0);
        for mode in [fs_1d(0.0, 0.25), ConstraintMode::Plain] {
            let v = atomic_norm(&h, 12, 1, mode, &SolverOptions::default()).unwrap();
            assert!((v - 3.0).abs() < 3e-3, "norm {v}");
        }
    }

    #[test]
    fn single_atom_norm_two_level() {
        let b = kron_vec(&steering(4, -0.15), &steering(3, 0.2)).mapv(|z| z * Complex64::new(0.0, 2.0));
        let mode = ConstraintMode::FrequencySelective {
            tx: BetaCoeffs::from_bounds(-0.3, 0.0).unwrap(),
            rx: Some(BetaCoeffs::from_bounds(0.1, 0.4).unwrap()),
        };
        let v = atomic_norm(&b, 4, 3, mode, &SolverOptions::default()).unwrap();
        assert!((v - 2.0).abs() < 2e-3, "norm {v}");
    }

    #[test]
    fn noiseless_identity_recovery() {
        let n = 16;
        let truth = steering(n, 0.12).mapv(|z| z * Complex64::new(0.8, -0.6));
        let p = SdpProblem::estimation(Array2::eye(n), truth.clone(), 1e-4, n, 1, fs_1d(0.0, 0.3)).unwrap();
        let sol = solve(&p, &SolverOptions::default()).unwrap();
        assert!(sol.converged);
        let err = vector_norm(&(&sol.h_hat - &truth)) / vector_norm(&truth);
        assert!(err < 1e-2, "relative error {err}");
    }

    #[test]
    fn rejects_malformed_problems() {
        let phi = Array2::<Complex64>::eye(4);
        assert!(SdpProblem::estimation(phi.clone(), Array1::zeros(3), 1.0, 4, 1, ConstraintMode::Plain).is_err());
        assert!(SdpProblem::estimation(phi.clone(), Array1::zeros(4), 0.0, 4, 1, ConstraintMode::Plain).is_err());
        let mode = ConstraintMode::FrequencySelective {
            tx: BetaCoeffs::new(FrequencyInterval::full()),
            rx: Some(BetaCoeffs::new(FrequencyInterval::full())),
        };
        assert!(SdpProblem::estimation(phi, Array1::zeros(4), 1.0, 4, 1, mode).is_err());
    }

    #[test]
    fn trace_is_recorded_and_non_convergence_reported() {
        let h = steering(6, 0.1);
        let p = SdpProblem::norm_evaluation(h, 6, 1, ConstraintMode::Plain).unwrap();
        let opts = SolverOptions {
            max_iter: 3,
            record_trace: true,
            ..Default::default()
        };
        let sol = solve(&p, &opts).unwrap();
        assert!(!sol.converged);
        assert_eq!(sol.trace.len(), 3);
        assert_eq!(sol.iterations, 3);
    }
}
