//! Frequency retrieval from a PSD (two-level) Toeplitz matrix.
//!
//! One-level: signal subspace from the Hermitian eigendecomposition, then
//! the shift-invariance pencil `U_1^+ U_2` whose eigenvalues are
//! `e^{i 2 pi f_k}`; weights come from a least-squares fit of the first
//! column. Two-level: each dimension is retrieved from its marginal sequence
//! and the candidate pairs are resolved by a least-squares fit of the whole
//! lag array.

use ndarray::{s, Array1, Array2};
use ndarray_linalg::Eig;

use super::{toeplitz, two_level_toeplitz, ToeplitzSeq, TwoLevelToeplitzSeq};
use crate::linalg::{eigh, frobenius_norm, hermitian_part, kron_vec, lstsq, outer_scaled};
use crate::signal_model::{steering, FrequencyInterval};
use crate::{Complex64, Error, Result, TWO_PI};

/// Input of [`vandermonde_retrieve`].
#[derive(Debug, Clone, Copy)]
pub enum StructuredToeplitz<'a> {
    OneLevel(&'a ToeplitzSeq),
    TwoLevel(&'a TwoLevelToeplitzSeq),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetrievalOptions {
    /// Eigenvalues at or above `rank_threshold * lambda_max` count toward the
    /// numerical rank.
    pub rank_threshold: f64,
    /// Maximum accepted relative Frobenius reassembly residual.
    pub residual_tolerance: f64,
}

impl Default for RetrievalOptions {
    fn default() -> Self {
        RetrievalOptions {
            rank_threshold: 1e-3,
            residual_tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VandermondeAtom {
    pub coefficient: f64,
    pub tx_freq: f64,
    /// `None` for one-level decompositions.
    pub rx_freq: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VandermondeDecomposition {
    pub atoms: Vec<VandermondeAtom>,
    /// Relative Frobenius error of the reassembled matrix.
    pub residual_norm: f64,
}

impl VandermondeDecomposition {
    pub fn order(&self) -> usize {
        self.atoms.len()
    }

    /// Whether every retrieved frequency lies in the given bands.
    pub fn within(&self, tx: &FrequencyInterval, rx: Option<&FrequencyInterval>) -> bool {
        self.atoms.iter().all(|a| {
            tx.contains(a.tx_freq)
                && match (rx, a.rx_freq) {
                    (Some(band), Some(f)) => band.contains(f),
                    _ => true,
                }
        })
    }
}

/// Retrieves `{c_k, f_k}` with `T = sum_k c_k b_k b_k^H`.
///
/// `order` defaults to the numerical rank. Orders must stay below `n` (one
/// level) or `min(n_t, n_r)` (two level).
pub fn vandermonde_retrieve(
    input: StructuredToeplitz<'_>,
    order: Option<usize>,
    opts: &RetrievalOptions,
) -> Result<VandermondeDecomposition> {
    match input {
        StructuredToeplitz::OneLevel(seq) => retrieve_one_level(seq, order, opts),
        StructuredToeplitz::TwoLevel(seq) => retrieve_two_level(seq, order, opts),
    }
}

fn numerical_rank(eigs: &Array1<f64>, threshold: f64) -> usize {
    let max = eigs.iter().cloned().fold(0.0f64, f64::max);
    if max <= 0.0 {
        return 0;
    }
    eigs.iter().filter(|&&l| l >= threshold * max).count()
}

fn check_order(order: Option<usize>, rank: usize, bound: usize) -> Result<usize> {
    let r = order.unwrap_or(rank);
    if r != rank || r >= bound {
        return Err(Error::ModelOrder { order: r, rank, bound });
    }
    Ok(r)
}

fn retrieve_one_level(
    seq: &ToeplitzSeq,
    order: Option<usize>,
    opts: &RetrievalOptions,
) -> Result<VandermondeDecomposition> {
    let n = seq.dim();
    let t = hermitian_part(&toeplitz(seq));
    let (eigs, vecs) = eigh(&t)?;
    let rank = numerical_rank(&eigs, opts.rank_threshold);
    let r = check_order(order, rank, n)?;
    if r == 0 {
        return Ok(VandermondeDecomposition {
            atoms: Vec::new(),
            residual_norm: relative_residual(&t, &Array2::zeros((n, n))),
        });
    }
    let freqs = pencil_frequencies(&vecs.slice(s![.., n - r..]).to_owned())?;
    let column = Array1::from_shape_fn(n, |k| seq.lag(k as isize));
    let basis = Array2::from_shape_fn((n, r), |(k, l)| Complex64::from_polar(1.0, TWO_PI * k as f64 * freqs[l]));
    let coefs = lstsq(&basis, &column)?.0;

    let mut atoms: Vec<VandermondeAtom> = freqs
        .iter()
        .zip(coefs.iter())
        .map(|(&f, c)| VandermondeAtom {
            coefficient: c.re,
            tx_freq: f,
            rx_freq: None,
        })
        .collect();
    atoms.sort_by(|a, b| a.tx_freq.total_cmp(&b.tx_freq));

    let mut rebuilt = Array2::zeros((n, n));
    for a in &atoms {
        rebuilt = rebuilt + outer_scaled(&steering(n, a.tx_freq), a.coefficient);
    }
    finish(atoms, relative_residual(&t, &rebuilt), opts)
}

fn retrieve_two_level(
    seq: &TwoLevelToeplitzSeq,
    order: Option<usize>,
    opts: &RetrievalOptions,
) -> Result<VandermondeDecomposition> {
    let (nt, nr) = (seq.n_t(), seq.n_r());
    let t = hermitian_part(&two_level_toeplitz(seq));
    let (eigs, _) = eigh(&t)?;
    let rank = numerical_rank(&eigs, opts.rank_threshold);
    let r = check_order(order, rank, nt.min(nr))?;
    let dim = nt * nr;
    if r == 0 {
        return Ok(VandermondeDecomposition {
            atoms: Vec::new(),
            residual_norm: relative_residual(&t, &Array2::zeros((dim, dim))),
        });
    }

    let thetas = marginal_frequencies(&seq.tx_marginal(), r)?;
    let phis = marginal_frequencies(&seq.rx_marginal(), r)?;

    // Fit every candidate pair to the full lag array.
    let lags: Vec<(f64, f64)> = (0..2 * nt - 1)
        .flat_map(|a| (0..2 * nr - 1).map(move |b| (a as f64 - (nt as f64 - 1.0), b as f64 - (nr as f64 - 1.0))))
        .collect();
    let target = Array1::from_iter(seq.as_array().iter().cloned());
    let pair_basis = |pairs: &[(f64, f64)]| {
        Array2::from_shape_fn((lags.len(), pairs.len()), |(i, l)| {
            let (k, j) = lags[i];
            Complex64::from_polar(1.0, TWO_PI * (k * pairs[l].0 + j * pairs[l].1))
        })
    };
    let candidates: Vec<(f64, f64)> = thetas.iter().flat_map(|&th| phis.iter().map(move |&ph| (th, ph))).collect();
    let weights = lstsq(&pair_basis(&candidates), &target)?.0;
    let assignment = best_assignment(r, |a, b| weights[a * r + b].re);

    let chosen: Vec<(f64, f64)> = assignment.iter().enumerate().map(|(a, &b)| (thetas[a], phis[b])).collect();
    let coefs = lstsq(&pair_basis(&chosen), &target)?.0;

    let mut atoms: Vec<VandermondeAtom> = chosen
        .iter()
        .zip(coefs.iter())
        .map(|(&(th, ph), c)| VandermondeAtom {
            coefficient: c.re,
            tx_freq: th,
            rx_freq: Some(ph),
        })
        .collect();
    atoms.sort_by(|a, b| a.tx_freq.total_cmp(&b.tx_freq));

    let mut rebuilt = Array2::zeros((dim, dim));
    for a in &atoms {
        let b = kron_vec(&steering(nt, a.tx_freq), &steering(nr, a.rx_freq.unwrap_or(0.0)));
        rebuilt = rebuilt + outer_scaled(&b, a.coefficient);
    }
    finish(atoms, relative_residual(&t, &rebuilt), opts)
}

fn finish(
    atoms: Vec<VandermondeAtom>,
    residual: f64,
    opts: &RetrievalOptions,
) -> Result<VandermondeDecomposition> {
    if residual > opts.residual_tolerance {
        return Err(Error::ResidualTooLarge {
            residual,
            tolerance: opts.residual_tolerance,
        });
    }
    if let Some(a) = atoms.iter().find(|a| !(a.coefficient > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "retrieved non-positive coefficient {:.3e}",
            a.coefficient
        )));
    }
    Ok(VandermondeDecomposition {
        atoms,
        residual_norm: residual,
    })
}

/// Frequencies of a one-level marginal with a forced order.
fn marginal_frequencies(seq: &ToeplitzSeq, r: usize) -> Result<Vec<f64>> {
    let n = seq.dim();
    let t = hermitian_part(&toeplitz(seq));
    let (_, vecs) = eigh(&t)?;
    pencil_frequencies(&vecs.slice(s![.., n - r..]).to_owned())
}

/// Shift-invariance pencil on an `n x r` signal subspace basis.
fn pencil_frequencies(u: &Array2<Complex64>) -> Result<Vec<f64>> {
    let n = u.nrows();
    let head = u.slice(s![..n - 1, ..]).to_owned();
    let tail = u.slice(s![1.., ..]).to_owned();
    let r = u.ncols();
    let mut psi = Array2::zeros((r, r));
    for c in 0..r {
        let col = lstsq(&head, &tail.column(c).to_owned())?.0;
        psi.column_mut(c).assign(&col);
    }
    let (roots, _) = psi.eig()?;
    Ok(roots.iter().map(|z| wrap_frequency(z.arg() / TWO_PI)).collect())
}

fn wrap_frequency(f: f64) -> f64 {
    let w = (f + 0.5).rem_euclid(1.0) - 0.5;
    if w < -0.5 {
        w + 1.0
    } else {
        w
    }
}

fn relative_residual(t: &Array2<Complex64>, rebuilt: &Array2<Complex64>) -> f64 {
    let scale = frobenius_norm(t.view());
    let diff = frobenius_norm((t - rebuilt).view());
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

/// Permutation `sigma` maximizing `sum_a score(a, sigma(a))`; exhaustive for
/// small orders, greedy beyond.
fn best_assignment(r: usize, score: impl Fn(usize, usize) -> f64) -> Vec<usize> {
    if r <= 7 {
        let mut perm: Vec<usize> = (0..r).collect();
        let mut best = perm.clone();
        let mut best_score = f64::NEG_INFINITY;
        permute(&mut perm, 0, &mut |p| {
            let s: f64 = p.iter().enumerate().map(|(a, &b)| score(a, b)).sum();
            if s > best_score {
                best_score = s;
                best = p.to_vec();
            }
        });
        best
    } else {
        let mut pairs: Vec<(usize, usize)> = (0..r).flat_map(|a| (0..r).map(move |b| (a, b))).collect();
        pairs.sort_by(|x, y| score(y.0, y.1).total_cmp(&score(x.0, x.1)));
        let mut out = vec![usize::MAX; r];
        let mut used = vec![false; r];
        for (a, b) in pairs {
            if out[a] == usize::MAX && !used[b] {
                out[a] = b;
                used[b] = true;
            }
        }
        out
    }
}

fn permute(p: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == p.len() {
        visit(p);
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permute(p, k + 1, visit);
        p.swap(k, i);
    }
}
