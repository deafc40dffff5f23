//! Monte Carlo driver: one realization per trial and SNR, every method on it.

use std::f64::consts::PI;
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use fsanm::estimators::{
    estimate_anm_plain, estimate_fs_anm_1d, estimate_fs_anm_2d, estimate_omp, nmse, AnmOptions, EstimateResult,
    GridDictionary,
};
use fsanm::signal_model::{
    angle_prior_to_interval, frequency_to_angle, generate_channel, identity_pilots, noise_var_for_snr,
    sensing_matrix, simulate_measurements, FrequencyInterval, MeasurementSet, PathSet, PathSpec,
};
use fsanm::solver::default_mu;

use crate::config::{ExperimentConfig, Mode};
use crate::error::{BenchError, Result};

/// Runs are aborted when more than this fraction of estimates fail.
pub const MAX_FAILURE_RATE: f64 = 0.2;

/// Attempts at drawing the in-prior paths separated from the anchor path.
const MAX_PLACEMENT_ATTEMPTS: u64 = 1_000;

#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    FsAnm { prior_deg: f64 },
    Anm,
    Omp { grid_mult: f64 },
}

impl Method {
    pub fn tag(&self) -> String {
        match self {
            Method::FsAnm { prior_deg } => format!("fs-anm-{prior_deg}"),
            Method::Anm => "anm".into(),
            Method::Omp { grid_mult } => format!("omp-{grid_mult}"),
        }
    }

    pub fn from_config(cfg: &ExperimentConfig) -> Vec<Method> {
        let mut out: Vec<Method> = cfg
            .prior_widths_deg
            .iter()
            .map(|&prior_deg| Method::FsAnm { prior_deg })
            .collect();
        if cfg.include_plain {
            out.push(Method::Anm);
        }
        out.extend(cfg.omp_grids.iter().map(|&grid_mult| Method::Omp { grid_mult }));
        out
    }
}

/// One estimate. `(method, snr_db, trial)` is unique within a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub method: String,
    pub mode: &'static str,
    pub n_t: usize,
    pub n_r: usize,
    #[serde(rename = "S")]
    pub s: usize,
    #[serde(rename = "L")]
    pub l: usize,
    pub prior_deg: Option<f64>,
    pub grid_mult: Option<f64>,
    pub snr_db: f64,
    pub trial: usize,
    pub seed: u64,
    pub nmse_db: f64,
    pub iters: usize,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub method: String,
    pub snr_db: f64,
    pub trial: usize,
    pub seed: u64,
    pub error: String,
}

/// Checksum of the data every method of a trial consumed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Realization {
    pub trial: usize,
    pub snr_db: f64,
    pub seed: u64,
    pub checksum: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub method: String,
    pub snr_db: f64,
    pub trials: usize,
    pub failures: usize,
    /// Mean of linear-scale NMSE, in dB.
    pub mean_nmse_db: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunOutput {
    pub config: ExperimentConfig,
    pub rows: Vec<ResultRow>,
    pub failures: Vec<Failure>,
    pub realizations: Vec<Realization>,
    pub summary: Vec<SummaryRow>,
}

impl RunOutput {
    /// Summary entry for a method tag and SNR.
    pub fn mean_nmse_db(&self, method: &str, snr_db: f64) -> Option<f64> {
        self.summary
            .iter()
            .find(|s| s.method == method && s.snr_db == snr_db)
            .map(|s| s.mean_nmse_db)
    }
}

/// Seed of stream `index` under `base`.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(index);
    rng.next_u64()
}

/// Runs every trial on a pool of `jobs` workers (`0` lets rayon decide).
pub fn run_experiment(cfg: &ExperimentConfig, jobs: usize) -> Result<RunOutput> {
    cfg.validate()?;
    let methods = Method::from_config(cfg);
    let dicts = methods
        .iter()
        .map(|m| match m {
            Method::Omp { grid_mult } => GridDictionary::from_multiplier(cfg.n_t, cfg.n_r, *grid_mult).map(Some),
            _ => Ok(None),
        })
        .collect::<fsanm::Result<Vec<_>>>()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| BenchError::Pool(e.to_string()))?;
    let outcomes: Vec<Result<TrialOutcome>> = pool.install(|| {
        (0..cfg.trials)
            .into_par_iter()
            .map(|t| run_trial(cfg, &methods, &dicts, t))
            .collect()
    });

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let mut realizations = Vec::new();
    for o in outcomes {
        let o = o?;
        rows.extend(o.rows);
        failures.extend(o.failures);
        realizations.extend(o.realizations);
    }
    let attempted = rows.len() + failures.len();
    if failures.len() as f64 > MAX_FAILURE_RATE * attempted as f64 {
        return Err(BenchError::TooManyFailures {
            failed: failures.len(),
            attempted,
            limit: 100.0 * MAX_FAILURE_RATE,
        });
    }
    sort_rows(&mut rows);
    failures.sort_by(|a, b| key(&a.method, a.snr_db, a.trial).cmp(&key(&b.method, b.snr_db, b.trial)));
    realizations.sort_by(|a, b| (a.trial, a.snr_db).partial_cmp(&(b.trial, b.snr_db)).unwrap());
    let summary = summarize(&rows, &failures);
    Ok(RunOutput {
        config: cfg.clone(),
        rows,
        failures,
        realizations,
        summary,
    })
}

fn key(method: &str, snr_db: f64, trial: usize) -> (String, ordered_key::F64, usize) {
    (method.to_string(), ordered_key::F64(snr_db), trial)
}

mod ordered_key {
    /// Total order on finite floats for sorting keys.
    #[derive(Debug, Clone, Copy, PartialEq)]
    pub struct F64(pub f64);

    impl Eq for F64 {}

    impl PartialOrd for F64 {
        fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(other))
        }
    }

    impl Ord for F64 {
        fn cmp(&self, other: &Self) -> std::cmp::Ordering {
            self.0.total_cmp(&other.0)
        }
    }
}

/// Orders rows by `(method, snr_db, trial)`.
pub fn sort_rows(rows: &mut [ResultRow]) {
    rows.sort_by(|a, b| key(&a.method, a.snr_db, a.trial).cmp(&key(&b.method, b.snr_db, b.trial)));
}

/// Per method and SNR: mean of `10^(nmse_db/10)` over successful trials,
/// back in dB, with the failure count alongside.
pub fn summarize(rows: &[ResultRow], failures: &[Failure]) -> Vec<SummaryRow> {
    let mut keys: Vec<(String, ordered_key::F64)> = rows
        .iter()
        .map(|r| (r.method.clone(), ordered_key::F64(r.snr_db)))
        .chain(failures.iter().map(|f| (f.method.clone(), ordered_key::F64(f.snr_db))))
        .collect();
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .map(|(method, snr)| {
            let vals: Vec<f64> = rows
                .iter()
                .filter(|r| r.method == method && r.snr_db == snr.0)
                .map(|r| 10f64.powf(r.nmse_db / 10.0))
                .collect();
            let failed = failures.iter().filter(|f| f.method == method && f.snr_db == snr.0).count();
            let mean = if vals.is_empty() {
                f64::NAN
            } else {
                10.0 * (vals.iter().sum::<f64>() / vals.len() as f64).log10()
            };
            SummaryRow {
                method,
                snr_db: snr.0,
                trials: vals.len(),
                failures: failed,
                mean_nmse_db: mean,
            }
        })
        .collect()
}

struct TrialOutcome {
    rows: Vec<ResultRow>,
    failures: Vec<Failure>,
    realizations: Vec<Realization>,
}

/// Prior bands of one width centered on the anchor path's angles.
#[derive(Debug, Clone, Copy)]
struct Prior {
    tx: FrequencyInterval,
    rx: Option<FrequencyInterval>,
}

fn prior_for(cfg: &ExperimentConfig, anchor: &PathSet, width_deg: f64) -> fsanm::Result<Prior> {
    let p = &anchor.paths[0];
    let d = cfg.d_over_lambda;
    let w = width_deg * PI / 180.0;
    let tx = angle_prior_to_interval(frequency_to_angle(p.tx_freq, d), w, d)?;
    let rx = match cfg.mode {
        Mode::OneD => None,
        Mode::TwoD => Some(angle_prior_to_interval(frequency_to_angle(p.rx_freq, d), w, d)?),
    };
    Ok(Prior { tx, rx })
}

/// Anchor path over the whole band, the rest inside the narrowest prior.
fn draw_channel(cfg: &ExperimentConfig, seed: u64) -> Result<PathSet> {
    let sep = (cfg.min_sep_tx / cfg.n_t as f64, cfg.min_sep_rx / cfg.n_r as f64);
    let anchor_spec = [PathSpec::with_variance(cfg.gain_variances[0])];
    let (anchor, _) = generate_channel(cfg.n_t, cfg.n_r, &anchor_spec, sep, derive_seed(seed, 0))?;
    if cfg.l == 1 {
        return Ok(anchor);
    }
    let narrow = cfg.prior_widths_deg.iter().cloned().fold(f64::INFINITY, f64::min);
    let band = if narrow.is_finite() {
        Some(prior_for(cfg, &anchor, narrow)?)
    } else {
        None
    };
    let specs: Vec<PathSpec> = cfg.gain_variances[1..]
        .iter()
        .map(|&v| PathSpec {
            gain_variance: v,
            tx_band: band.map(|b| b.tx),
            rx_band: band.and_then(|b| b.rx),
        })
        .collect();
    for attempt in 0..MAX_PLACEMENT_ATTEMPTS {
        let (rest, _) = generate_channel(cfg.n_t, cfg.n_r, &specs, sep, derive_seed(seed, 100 + attempt))?;
        let mut all = anchor.clone();
        all.paths.extend(rest.paths);
        all.min_sep_tx = rest.min_sep_tx;
        all.min_sep_rx = rest.min_sep_rx;
        if all.is_separated() {
            return Ok(all);
        }
    }
    Err(fsanm::Error::SeparationInfeasible {
        paths: cfg.l,
        attempts: MAX_PLACEMENT_ATTEMPTS as usize,
    }
    .into())
}

fn checksum(m: &MeasurementSet) -> String {
    let mut h = Sha256::new();
    for z in m.y.iter().chain(m.f.iter()).chain(m.pilots.iter()) {
        h.update(z.re.to_le_bytes());
        h.update(z.im.to_le_bytes());
    }
    h.update(m.noise_var.to_le_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn run_trial(
    cfg: &ExperimentConfig,
    methods: &[Method],
    dicts: &[Option<GridDictionary>],
    trial: usize,
) -> Result<TrialOutcome> {
    let seed = derive_seed(cfg.base_seed, trial as u64);
    let paths = draw_channel(cfg, seed)?;
    let priors = cfg
        .prior_widths_deg
        .iter()
        .map(|&w| prior_for(cfg, &paths, w))
        .collect::<fsanm::Result<Vec<_>>>()?;
    let h = paths.channel_matrix(cfg.n_t, cfg.n_r);
    let f = sensing_matrix(cfg.n_t, cfg.s, cfg.sensing.into(), derive_seed(seed, 1))?;
    let x = identity_pilots(cfg.s);
    let n = cfg.n_t * cfg.n_r;

    let mut out = TrialOutcome {
        rows: Vec::new(),
        failures: Vec::new(),
        realizations: Vec::new(),
    };
    for &snr_db in &cfg.snr_grid_db {
        let noise_var = noise_var_for_snr(&h, &f, &x, snr_db)?;
        // same unit noise at every SNR of the trial
        let m = simulate_measurements(&h, &f, &x, noise_var, derive_seed(seed, 2))?;
        let sum = checksum(&m);
        let opts = AnmOptions {
            mu: Some(cfg.mu.unwrap_or_else(|| cfg.mu_scale * default_mu(noise_var.sqrt(), n))),
            solver: cfg.solver_options(),
            ..AnmOptions::default()
        };
        let mut fs_index = 0;
        for (method, dict) in methods.iter().zip(dicts) {
            let start = Instant::now();
            let est: fsanm::Result<EstimateResult> = match method {
                Method::FsAnm { .. } => {
                    let p = priors[fs_index];
                    fs_index += 1;
                    match p.rx {
                        None => estimate_fs_anm_1d(&m, p.tx, &opts),
                        Some(rx) => estimate_fs_anm_2d(&m, p.tx, rx, &opts),
                    }
                }
                Method::Anm => estimate_anm_plain(&m, &opts),
                Method::Omp { .. } => estimate_omp(&m, dict.as_ref().expect("dictionary built"), cfg.l),
            };
            let wall_ms = start.elapsed().as_secs_f64() * 1e3;
            if checksum(&m) != sum {
                return Err(BenchError::RealizationMismatch {
                    method: method.tag(),
                    trial,
                    snr_db,
                });
            }
            match est.and_then(|e| Ok((nmse(&e.h_matrix, &h)?, e.diagnostics.iterations()))) {
                Ok((nmse_db, iters)) => out.rows.push(ResultRow {
                    method: method.tag(),
                    mode: cfg.mode.tag(),
                    n_t: cfg.n_t,
                    n_r: cfg.n_r,
                    s: cfg.s,
                    l: cfg.l,
                    prior_deg: match method {
                        Method::FsAnm { prior_deg } => Some(*prior_deg),
                        _ => None,
                    },
                    grid_mult: match method {
                        Method::Omp { grid_mult } => Some(*grid_mult),
                        _ => None,
                    },
                    snr_db,
                    trial,
                    seed,
                    nmse_db,
                    iters,
                    wall_ms,
                }),
                Err(e) => out.failures.push(Failure {
                    method: method.tag(),
                    snr_db,
                    trial,
                    seed,
                    error: e.to_string(),
                }),
            }
        }
        out.realizations.push(Realization {
            trial,
            snr_db,
            seed,
            checksum: sum,
        });
    }
    Ok(out)
}
