//! Experiment configuration, read from flat TOML.

use serde::{Deserialize, Serialize};

use fsanm::signal_model::SensingKind;
use fsanm::solver::SolverOptions;

use crate::error::{BenchError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "1D", alias = "1d")]
    OneD,
    #[serde(rename = "2D", alias = "2d")]
    TwoD,
}

impl Mode {
    pub fn tag(&self) -> &'static str {
        match self {
            Mode::OneD => "1D",
            Mode::TwoD => "2D",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sensing {
    Dft,
    Gaussian,
}

impl From<Sensing> for SensingKind {
    fn from(s: Sensing) -> Self {
        match s {
            Sensing::Dft => SensingKind::Dft,
            Sensing::Gaussian => SensingKind::Gaussian,
        }
    }
}

/// One Monte Carlo experiment.
///
/// Per trial, the first path is drawn over the whole band and every angular
/// prior is centered on its angles; the remaining paths are drawn inside the
/// narrowest prior so that the truth is in-band for every width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub n_t: usize,
    #[serde(default = "one")]
    pub n_r: usize,
    #[serde(rename = "S")]
    pub s: usize,
    #[serde(rename = "L")]
    pub l: usize,
    /// Gain variance of each path; the first is the prior anchor.
    pub gain_variances: Vec<f64>,
    pub snr_grid_db: Vec<f64>,
    /// FS-ANM prior widths in degrees.
    #[serde(default)]
    pub prior_widths_deg: Vec<f64>,
    /// OMP grid sizes as multiples of `n_t`.
    #[serde(default)]
    pub omp_grids: Vec<f64>,
    #[serde(default = "yes")]
    pub include_plain: bool,
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_sensing")]
    pub sensing: Sensing,
    /// Minimum path separations in units of `1/n_t` and `1/n_r`.
    #[serde(default)]
    pub min_sep_tx: f64,
    #[serde(default)]
    pub min_sep_rx: f64,
    #[serde(default = "half")]
    pub d_over_lambda: f64,
    /// Multiplies the default weight `sigma sqrt(N ln N)`.
    #[serde(default = "unit")]
    pub mu_scale: f64,
    /// Fixed weight, overriding the noise-based rule.
    #[serde(default)]
    pub mu: Option<f64>,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_eps_abs")]
    pub eps_abs: f64,
    #[serde(default = "default_eps_rel")]
    pub eps_rel: f64,
    #[serde(default = "default_memory")]
    pub anderson_memory: usize,
}

fn one() -> usize {
    1
}
fn yes() -> bool {
    true
}
fn half() -> f64 {
    0.5
}
fn unit() -> f64 {
    1.0
}
fn default_sensing() -> Sensing {
    Sensing::Dft
}
fn default_rho() -> f64 {
    SolverOptions::default().rho
}
fn default_max_iter() -> usize {
    5_000
}
fn default_eps_abs() -> f64 {
    1e-5
}
fn default_eps_rel() -> f64 {
    1e-3
}
fn default_memory() -> usize {
    SolverOptions::default().anderson_memory
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// 128x1 uplink sweep with a 60 degree prior and three OMP grids.
    pub fn fig1a() -> Self {
        ExperimentConfig {
            mode: Mode::OneD,
            n_t: 128,
            n_r: 1,
            s: 50,
            l: 2,
            gain_variances: vec![1.0, 0.1],
            snr_grid_db: vec![-10.0, -5.0, 0.0, 5.0, 10.0],
            prior_widths_deg: vec![60.0],
            omp_grids: vec![0.5, 0.75, 1.0],
            include_plain: true,
            trials: 100,
            base_seed: 1,
            sensing: Sensing::Gaussian,
            min_sep_tx: 1.0,
            min_sep_rx: 0.0,
            d_over_lambda: 0.5,
            mu_scale: 1.0,
            mu: None,
            rho: default_rho(),
            max_iter: default_max_iter(),
            eps_abs: default_eps_abs(),
            eps_rel: default_eps_rel(),
            anderson_memory: default_memory(),
        }
    }

    /// 16x8 sweep with a 30 degree prior.
    pub fn fig1b() -> Self {
        ExperimentConfig {
            mode: Mode::TwoD,
            n_t: 16,
            n_r: 8,
            s: 16,
            sensing: Sensing::Dft,
            prior_widths_deg: vec![30.0],
            trials: 200,
            base_seed: 2,
            min_sep_tx: 0.0,
            ..Self::fig1a()
        }
    }

    /// 16x8 at 0 dB over all prior widths, FS-ANM only.
    pub fn prior_sweep() -> Self {
        ExperimentConfig {
            snr_grid_db: vec![0.0],
            prior_widths_deg: vec![180.0, 120.0, 60.0, 30.0],
            omp_grids: vec![],
            include_plain: false,
            base_seed: 3,
            ..Self::fig1b()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(BenchError::Config(m));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.snr_grid_db.is_empty() || self.snr_grid_db.iter().any(|s| !s.is_finite()) {
            return bad("snr_grid_db must be a nonempty list of finite values".into());
        }
        if let Some(w) = self.prior_widths_deg.iter().find(|w| !(**w > 0.0 && **w <= 360.0)) {
            return bad(format!("prior width {w} outside (0, 360]"));
        }
        if let Some(g) = self.omp_grids.iter().find(|g| !(**g > 0.0) || !g.is_finite()) {
            return bad(format!("OMP grid multiplier {g} must be positive"));
        }
        if self.prior_widths_deg.is_empty() && self.omp_grids.is_empty() && !self.include_plain {
            return bad("no methods configured".into());
        }
        if self.n_t == 0 || self.n_r == 0 || self.s == 0 || self.l == 0 {
            return bad("n_t, n_r, S and L must be positive".into());
        }
        match self.mode {
            Mode::OneD if self.n_r != 1 => return bad("1D mode needs n_r = 1".into()),
            Mode::TwoD if self.n_t < 2 || self.n_r < 2 => return bad("2D mode needs n_t, n_r >= 2".into()),
            _ => {}
        }
        if self.sensing == Sensing::Dft && self.s > self.n_t {
            return bad(format!("DFT sensing cannot use {} slots with {} antennas", self.s, self.n_t));
        }
        if self.gain_variances.len() != self.l || self.gain_variances.iter().any(|v| !(*v >= 0.0)) {
            return bad(format!("need {} nonnegative gain variances", self.l));
        }
        if !(self.min_sep_tx >= 0.0 && self.min_sep_rx >= 0.0) {
            return bad("separations must be nonnegative".into());
        }
        if !(self.d_over_lambda > 0.0) {
            return bad("d_over_lambda must be positive".into());
        }
        if !(self.mu_scale > 0.0) || self.mu.is_some_and(|m| !(m > 0.0)) {
            return bad("weights must be positive".into());
        }
        self.solver_options().validate()?;
        Ok(())
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            rho: self.rho,
            max_iter: self.max_iter,
            eps_abs: self.eps_abs,
            eps_rel: self.eps_rel,
            anderson_memory: self.anderson_memory,
            ..SolverOptions::default()
        }
    }
}
