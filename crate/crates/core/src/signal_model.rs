//! ULA channel and pilot measurement model.
//!
//! A channel with `L` paths is `H = sum_l alpha_l a(n_r, phi_l) a(n_t, theta_l)^H`
//! where `a(n, f)[k] = exp(i 2 pi k f)`. During training the transmitter sweeps
//! `S` beams, giving `Y = H F X + N`.

use std::f64::consts::{FRAC_PI_2, PI};

use ndarray::{Array1, Array2};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::{Complex64, Error, Result, C_ONE, TWO_PI};

/// Open band `(lo, hi)` of normalized spatial frequencies inside `[-1/2, 1/2]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyInterval {
    lo: f64,
    hi: f64,
}

impl FrequencyInterval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo < -0.5 || hi > 0.5 || lo >= hi {
            return Err(Error::InvalidInterval { lo, hi });
        }
        Ok(FrequencyInterval { lo, hi })
    }

    /// The whole band `(-1/2, 1/2)`.
    pub fn full() -> Self {
        FrequencyInterval { lo: -0.5, hi: 0.5 }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, f: f64) -> bool {
        f > self.lo && f < self.hi
    }

    pub fn is_full(&self) -> bool {
        self.lo <= -0.5 && self.hi >= 0.5
    }

    /// `(-hi, -lo)`: the band seen by conjugated steering vectors.
    pub fn negated(&self) -> Self {
        FrequencyInterval {
            lo: -self.hi,
            hi: -self.lo,
        }
    }

    pub fn is_superset_of(&self, other: &FrequencyInterval) -> bool {
        self.lo <= other.lo && self.hi >= other.hi
    }
}

/// Uniform linear array steering vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayResponse {
    freq: f64,
    values: Array1<Complex64>,
}

impl ArrayResponse {
    pub fn n_antennas(&self) -> usize {
        self.values.len()
    }

    pub fn freq(&self) -> f64 {
        self.freq
    }

    pub fn values(&self) -> &Array1<Complex64> {
        &self.values
    }

    pub fn into_values(self) -> Array1<Complex64> {
        self.values
    }
}

pub fn check_frequency(f: f64) -> Result<()> {
    if !(-0.5..=0.5).contains(&f) {
        return Err(Error::FrequencyOutOfRange(f));
    }
    Ok(())
}

/// `a(n, f) = [1, e^{i 2 pi f}, ..., e^{i 2 pi (n-1) f}]^T`.
pub fn array_response(n: usize, f: f64) -> Result<ArrayResponse> {
    if n == 0 {
        return Err(Error::InvalidArgument("array needs at least one antenna".into()));
    }
    check_frequency(f)?;
    Ok(ArrayResponse {
        freq: f,
        values: steering(n, f),
    })
}

/// Unchecked steering vector; any real `f` is accepted.
pub fn steering(n: usize, f: f64) -> Array1<Complex64> {
    Array1::from_shape_fn(n, |k| Complex64::from_polar(1.0, TWO_PI * k as f64 * f))
}

/// Distance between two normalized frequencies on the unit circle.
pub fn wrapped_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(1.0);
    d.min(1.0 - d)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Path {
    pub gain: Complex64,
    pub tx_freq: f64,
    pub rx_freq: f64,
}

/// Paths of a sparse channel together with the separations they were drawn
/// under.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    pub paths: Vec<Path>,
    pub min_sep_tx: f64,
    pub min_sep_rx: f64,
}

impl PathSet {
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    /// True when every pair is separated by more than the declared minimum
    /// (wrap-around distance) in both dimensions.
    pub fn is_separated(&self) -> bool {
        separated(&self.paths, self.min_sep_tx, self.min_sep_rx)
    }

    /// Index of the path with the largest gain magnitude.
    pub fn strongest(&self) -> Option<usize> {
        self.paths
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.gain.norm().total_cmp(&b.1.gain.norm()))
            .map(|(i, _)| i)
    }

    /// `sum_l alpha_l a(n_r, phi_l) a(n_t, theta_l)^H`.
    pub fn channel_matrix(&self, n_t: usize, n_r: usize) -> Array2<Complex64> {
        let mut h = Array2::zeros((n_r, n_t));
        for p in &self.paths {
            let at = steering(n_t, p.tx_freq);
            let ar = steering(n_r, p.rx_freq);
            for r in 0..n_r {
                for t in 0..n_t {
                    h[[r, t]] += p.gain * ar[r] * at[t].conj();
                }
            }
        }
        h
    }
}

fn separated(paths: &[Path], sep_tx: f64, sep_rx: f64) -> bool {
    for (i, a) in paths.iter().enumerate() {
        for b in &paths[i + 1..] {
            // a zero separation leaves that dimension unconstrained
            if (sep_tx > 0.0 && wrapped_distance(a.tx_freq, b.tx_freq) <= sep_tx)
                || (sep_rx > 0.0 && wrapped_distance(a.rx_freq, b.rx_freq) <= sep_rx)
            {
                return false;
            }
        }
    }
    true
}

/// Per-path generation request.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSpec {
    /// Variance of the circular complex Gaussian gain.
    pub gain_variance: f64,
    /// Band the transmit frequency is drawn from; whole band when `None`.
    pub tx_band: Option<FrequencyInterval>,
    /// Band the receive frequency is drawn from; whole band when `None`.
    pub rx_band: Option<FrequencyInterval>,
}

impl PathSpec {
    pub fn with_variance(gain_variance: f64) -> Self {
        PathSpec {
            gain_variance,
            tx_band: None,
            rx_band: None,
        }
    }
}

pub const MAX_SEPARATION_ATTEMPTS: usize = 10_000;

/// Draws a random sparse channel.
///
/// Frequencies are uniform on their band (rejection-sampled until the whole
/// set is separated); with `n_r == 1` receive frequencies are fixed to zero
/// and the receive separation is not enforced.
pub fn generate_channel(
    n_t: usize,
    n_r: usize,
    specs: &[PathSpec],
    min_sep: (f64, f64),
    seed: u64,
) -> Result<(PathSet, Array2<Complex64>)> {
    if n_t == 0 || n_r == 0 {
        return Err(Error::InvalidArgument("array sizes must be positive".into()));
    }
    if min_sep.0 < 0.0 || min_sep.1 < 0.0 {
        return Err(Error::InvalidArgument("separations must be nonnegative".into()));
    }
    if let Some(s) = specs.iter().find(|s| !(s.gain_variance >= 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "gain variance {} must be nonnegative",
            s.gain_variance
        )));
    }
    let one_dim = n_r == 1;
    let sep_rx = if one_dim { 0.0 } else { min_sep.1 };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let gains: Vec<Complex64> = specs
        .iter()
        .map(|s| complex_gaussian(&mut rng, s.gain_variance))
        .collect();

    let mut paths = Vec::with_capacity(specs.len());
    'attempt: for _ in 0..MAX_SEPARATION_ATTEMPTS {
        paths.clear();
        for (spec, &gain) in specs.iter().zip(&gains) {
            let tx = uniform_in(&mut rng, spec.tx_band.unwrap_or_else(FrequencyInterval::full));
            let rx = if one_dim {
                0.0
            } else {
                uniform_in(&mut rng, spec.rx_band.unwrap_or_else(FrequencyInterval::full))
            };
            paths.push(Path {
                gain,
                tx_freq: tx,
                rx_freq: rx,
            });
            if !separated(&paths, min_sep.0, sep_rx) {
                continue 'attempt;
            }
        }
        let set = PathSet {
            paths,
            min_sep_tx: min_sep.0,
            min_sep_rx: sep_rx,
        };
        let h = set.channel_matrix(n_t, n_r);
        return Ok((set, h));
    }
    Err(Error::SeparationInfeasible {
        paths: specs.len(),
        attempts: MAX_SEPARATION_ATTEMPTS,
    })
}

fn uniform_in<R: Rng>(rng: &mut R, band: FrequencyInterval) -> f64 {
    let u: f64 = rng.random();
    band.lo() + u * band.width()
}

/// One draw of `CN(0, variance)`.
pub fn complex_gaussian<R: Rng>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (0.5 * variance).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// How beamforming vectors are chosen for the training slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SensingKind {
    /// Distinct columns of the unitary DFT matrix.
    #[default]
    Dft,
    /// i.i.d. complex Gaussian columns scaled to unit norm.
    Gaussian,
}

/// `n_t x s` beamforming matrix.
pub fn sensing_matrix(n_t: usize, s: usize, kind: SensingKind, seed: u64) -> Result<Array2<Complex64>> {
    if n_t == 0 || s == 0 {
        return Err(Error::InvalidArgument("sensing matrix needs positive dimensions".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match kind {
        SensingKind::Dft => {
            if s > n_t {
                return Err(Error::DimensionMismatch(format!(
                    "cannot pick {s} distinct DFT columns out of {n_t}"
                )));
            }
            let mut cols = sample(&mut rng, n_t, s).into_vec();
            cols.sort_unstable();
            let scale = 1.0 / (n_t as f64).sqrt();
            Ok(Array2::from_shape_fn((n_t, s), |(k, j)| {
                let phase = -TWO_PI * (k * cols[j]) as f64 / n_t as f64;
                Complex64::from_polar(scale, phase)
            }))
        }
        SensingKind::Gaussian => {
            let mut f = Array2::from_shape_fn((n_t, s), |_| complex_gaussian(&mut rng, 1.0));
            for mut col in f.columns_mut() {
                let norm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                if norm > 0.0 {
                    col.mapv_inplace(|z| z / norm);
                }
            }
            Ok(f)
        }
    }
}

/// Received training block together with what produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    /// `n_r x S` received matrix.
    pub y: Array2<Complex64>,
    /// `n_t x S` beamforming matrix.
    pub f: Array2<Complex64>,
    /// Diagonal of the `S x S` pilot matrix.
    pub pilots: Array1<Complex64>,
    pub noise_var: f64,
    pub seed: u64,
}

impl MeasurementSet {
    pub fn n_t(&self) -> usize {
        self.f.nrows()
    }

    pub fn n_r(&self) -> usize {
        self.y.nrows()
    }

    pub fn slots(&self) -> usize {
        self.pilots.len()
    }

    pub fn pilot_matrix(&self) -> Array2<Complex64> {
        Array2::from_diag(&self.pilots)
    }

    pub fn noise_std(&self) -> f64 {
        self.noise_var.sqrt()
    }
}

/// Identity pilot block of size `s`.
pub fn identity_pilots(s: usize) -> Array1<Complex64> {
    Array1::from_elem(s, C_ONE)
}

/// `H F X` without noise.
pub fn noiseless_received(
    h: &Array2<Complex64>,
    f: &Array2<Complex64>,
    pilots: &Array1<Complex64>,
) -> Result<Array2<Complex64>> {
    if h.ncols() != f.nrows() || f.ncols() != pilots.len() {
        return Err(Error::DimensionMismatch(format!(
            "H is {:?}, F is {:?}, X has {} pilots",
            h.dim(),
            f.dim(),
            pilots.len()
        )));
    }
    let mut hf = h.dot(f);
    for (mut col, &x) in hf.columns_mut().into_iter().zip(pilots.iter()) {
        col.mapv_inplace(|z| z * x);
    }
    Ok(hf)
}

/// `Y = H F X + N` with `N` i.i.d. `CN(0, noise_var)`.
pub fn simulate_measurements(
    h: &Array2<Complex64>,
    f: &Array2<Complex64>,
    pilots: &Array1<Complex64>,
    noise_var: f64,
    seed: u64,
) -> Result<MeasurementSet> {
    if !(noise_var >= 0.0) {
        return Err(Error::InvalidArgument(format!("noise variance {noise_var} must be >= 0")));
    }
    let mut y = noiseless_received(h, f, pilots)?;
    if noise_var > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        y.mapv_inplace(|z| z + complex_gaussian(&mut rng, noise_var));
    }
    Ok(MeasurementSet {
        y,
        f: f.clone(),
        pilots: pilots.clone(),
        noise_var,
        seed,
    })
}

/// Noise variance giving per-sample received SNR `snr_db`:
/// `||H F X||_F^2 / (n_r S sigma^2) = 10^{snr/10}`.
pub fn noise_var_for_snr(
    h: &Array2<Complex64>,
    f: &Array2<Complex64>,
    pilots: &Array1<Complex64>,
    snr_db: f64,
) -> Result<f64> {
    let clean = noiseless_received(h, f, pilots)?;
    let power = clean.iter().map(|z| z.norm_sqr()).sum::<f64>() / clean.len() as f64;
    Ok(power / 10f64.powf(snr_db / 10.0))
}

/// Band of normalized frequencies `(d/lambda) sin(angle)` reachable by angles
/// in the arc `[center - width/2, center + width/2]` (radians).
pub fn angle_prior_to_interval(center: f64, width: f64, d_over_lambda: f64) -> Result<FrequencyInterval> {
    if !(width > 0.0) || width > 2.0 * PI + 1e-12 {
        return Err(Error::InvalidArgument(format!("prior width {width} must lie in (0, 2pi]")));
    }
    if !(d_over_lambda > 0.0) || !center.is_finite() {
        return Err(Error::InvalidArgument("invalid prior center or spacing".into()));
    }
    let a = center - 0.5 * width;
    let b = center + 0.5 * width;
    let mut lo = a.sin().min(b.sin());
    let mut hi = a.sin().max(b.sin());
    if arc_contains(a, b, FRAC_PI_2) {
        hi = 1.0;
    }
    if arc_contains(a, b, -FRAC_PI_2) {
        lo = -1.0;
    }
    let lo = (d_over_lambda * lo).clamp(-0.5, 0.5);
    let hi = (d_over_lambda * hi).clamp(-0.5, 0.5);
    FrequencyInterval::new(lo, hi)
}

/// Whether `a <= target + 2 pi k <= b` for some integer `k`.
fn arc_contains(a: f64, b: f64, target: f64) -> bool {
    let k = ((a - target) / (2.0 * PI)).ceil();
    target + k * 2.0 * PI <= b
}

/// Arcsine of `f / (d/lambda)`: the broadside angle whose frequency is `f`.
pub fn frequency_to_angle(f: f64, d_over_lambda: f64) -> f64 {
    (f / d_over_lambda).clamp(-1.0, 1.0).asin()
}
