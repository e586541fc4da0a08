//! Experiment configuration and the dimension bookkeeping shared by the
//! other modules.
//!
//! Time is measured in samples of the original (non-oversampled) rate, so the
//! sampling period never appears explicitly. Transmit SNR is the total
//! transmit power over all transmit chains divided by the per-element noise
//! variance, with the noise variance fixed at one.

use std::fmt;
use std::str::FromStr;

use crate::error::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseModel {
    /// i.i.d. noise of variance σ² on every combined oversampled sample.
    WhiteOversampled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precoding {
    IsotropicEqualPower,
    SvdWaterfilling,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatternSource {
    DftFixed,
    RandomPhase,
    Optimized,
    QuantizedOptimized(u32),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n_subcarriers: usize,
    pub cp_len: usize,
    pub n_tx: usize,
    pub n_rx_chains: usize,
    pub n0: usize,
    pub n_paths: usize,
    pub snr_grid_db: Vec<f64>,
    pub n_realizations: usize,
    pub master_seed: u64,
    pub noise_model: NoiseModel,
    pub precoding: Precoding,
    pub pattern_source: PatternSource,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_subcarriers: 64,
            cp_len: 16,
            n_tx: 4,
            n_rx_chains: 1,
            n0: 2,
            n_paths: 15,
            snr_grid_db: vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
            n_realizations: 200,
            master_seed: 1,
            noise_model: NoiseModel::WhiteOversampled,
            precoding: Precoding::SvdWaterfilling,
            pattern_source: PatternSource::Optimized,
        }
    }
}

/// Config keys, in the order they are written to `.meta` files.
pub const CONFIG_KEYS: [&str; 12] = [
    "n_subcarriers",
    "cp_len",
    "n_tx",
    "n_rx_chains",
    "n0",
    "n_paths",
    "snr_grid_db",
    "n_realizations",
    "master_seed",
    "noise_model",
    "precoding",
    "pattern_source",
];

impl SimConfig {
    /// Parses a `key = value` file body on top of the defaults. Blank lines
    /// and `#` comments are ignored.
    pub fn from_kv_str(text: &str) -> Result<SimConfig, ConfigError> {
        let mut cfg = SimConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or(ConfigError::Syntax { line: idx + 1 })?;
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    /// Sets one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let bad = || ConfigError::BadValue {
            key: key.to_string(),
            value: value.to_string(),
        };
        fn num<T: FromStr>(v: &str, bad: impl Fn() -> ConfigError) -> Result<T, ConfigError> {
            v.parse().map_err(|_| bad())
        }
        match key {
            "n_subcarriers" => self.n_subcarriers = num(value, bad)?,
            "cp_len" => self.cp_len = num(value, bad)?,
            "n_tx" => self.n_tx = num(value, bad)?,
            "n_rx_chains" => self.n_rx_chains = num(value, bad)?,
            "n0" => self.n0 = num(value, bad)?,
            "n_paths" => self.n_paths = num(value, bad)?,
            "snr_grid_db" => {
                self.snr_grid_db = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse::<f64>().map_err(|_| bad()))
                    .collect::<Result<_, _>>()?
            }
            "n_realizations" => self.n_realizations = num(value, bad)?,
            "master_seed" => self.master_seed = num(value, bad)?,
            "noise_model" => self.noise_model = value.parse().map_err(|_| bad())?,
            "precoding" => self.precoding = value.parse().map_err(|_| bad())?,
            "pattern_source" => self.pattern_source = value.parse().map_err(|_| bad())?,
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    /// Textual form of one field, inverse of [`SimConfig::set`].
    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "n_subcarriers" => self.n_subcarriers.to_string(),
            "cp_len" => self.cp_len.to_string(),
            "n_tx" => self.n_tx.to_string(),
            "n_rx_chains" => self.n_rx_chains.to_string(),
            "n0" => self.n0.to_string(),
            "n_paths" => self.n_paths.to_string(),
            "snr_grid_db" => self
                .snr_grid_db
                .iter()
                .map(|v| format!("{v:?}"))
                .collect::<Vec<_>>()
                .join(","),
            "n_realizations" => self.n_realizations.to_string(),
            "master_seed" => self.master_seed.to_string(),
            "noise_model" => self.noise_model.to_string(),
            "precoding" => self.precoding.to_string(),
            "pattern_source" => self.pattern_source.to_string(),
            _ => return None,
        })
    }

    pub fn to_kv_string(&self) -> String {
        CONFIG_KEYS
            .iter()
            .map(|k| format!("{k} = {}\n", self.get(k).unwrap_or_default()))
            .collect()
    }
}

impl fmt::Display for NoiseModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("white_oversampled")
    }
}

impl FromStr for NoiseModel {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "white_oversampled" | "WhiteOversampled" => Ok(NoiseModel::WhiteOversampled),
            _ => Err(()),
        }
    }
}

impl fmt::Display for Precoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Precoding::IsotropicEqualPower => "isotropic",
            Precoding::SvdWaterfilling => "waterfilling",
        })
    }
}

impl FromStr for Precoding {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "isotropic" | "IsotropicEqualPower" => Ok(Precoding::IsotropicEqualPower),
            "waterfilling" | "SvdWaterfilling" => Ok(Precoding::SvdWaterfilling),
            _ => Err(()),
        }
    }
}

impl fmt::Display for PatternSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PatternSource::DftFixed => f.write_str("dft"),
            PatternSource::RandomPhase => f.write_str("random"),
            PatternSource::Optimized => f.write_str("opt"),
            PatternSource::QuantizedOptimized(b) => write!(f, "quant:{b}"),
        }
    }
}

impl FromStr for PatternSource {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "dft" | "DftFixed" => Ok(PatternSource::DftFixed),
            "random" | "RandomPhase" => Ok(PatternSource::RandomPhase),
            "opt" | "Optimized" => Ok(PatternSource::Optimized),
            _ => {
                let bits = s.strip_prefix("quant:").ok_or(())?;
                bits.parse().map(PatternSource::QuantizedOptimized).map_err(|_| ())
            }
        }
    }
}

/// Array and symbol dimensions, the subset of a config the signal chain
/// needs. Kept separate so DSP code can run on shapes a full experiment
/// config would reject.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub n_subcarriers: usize,
    pub cp_len: usize,
    pub n_tx: usize,
    pub n_rx_chains: usize,
    pub n0: usize,
}

impl Dims {
    pub fn n_rx_elements(&self) -> usize {
        self.n_rx_chains * self.n0
    }

    /// Number of virtual receive streams (one per chain and sub-sample phase).
    pub fn n_virtual(&self) -> usize {
        self.n_rx_chains * self.n0
    }

    pub fn oversampled_len(&self) -> usize {
        self.n_subcarriers * self.n0
    }

    /// Subcarriers that carry data and enter every metric.
    ///
    /// For even `n` the Nyquist bin is left empty: band-limited interpolation
    /// splits it into a cosine, so sub-sample phase `m` sees it scaled by
    /// `cos(pi m / n0)`, which vanishes for `m = n0/2`.
    pub fn active_subcarriers(&self) -> Vec<usize> {
        let n = self.n_subcarriers;
        (0..n).filter(|&q| n % 2 == 1 || q != n / 2).collect()
    }
}

/// A configuration whose invariants have been checked.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedConfig {
    cfg: SimConfig,
    n_rx_elements: usize,
    oversampled_len: usize,
}

pub fn validate(cfg: SimConfig) -> Result<ValidatedConfig, ConfigError> {
    for (field, v) in [
        ("n_subcarriers", cfg.n_subcarriers),
        ("n_tx", cfg.n_tx),
        ("n_rx_chains", cfg.n_rx_chains),
        ("n0", cfg.n0),
        ("n_paths", cfg.n_paths),
    ] {
        if v == 0 {
            return Err(ConfigError::NotPositive { field });
        }
    }
    if cfg.cp_len + 1 < cfg.n_paths {
        return Err(ConfigError::CpTooShort {
            cp_len: cfg.cp_len,
            required: cfg.n_paths - 1,
        });
    }
    if cfg.n_subcarriers < 2 * cfg.n_paths {
        return Err(ConfigError::TooFewSubcarriers {
            n: cfg.n_subcarriers,
            required: 2 * cfg.n_paths,
        });
    }
    if cfg.snr_grid_db.is_empty() {
        return Err(ConfigError::EmptySnrGrid);
    }
    if cfg.snr_grid_db.iter().any(|s| !s.is_finite()) {
        return Err(ConfigError::NonFiniteSnr);
    }
    if cfg.n_realizations == 0 {
        return Err(ConfigError::NoRealizations);
    }
    if cfg.pattern_source == PatternSource::QuantizedOptimized(0) {
        return Err(ConfigError::ZeroQuantBits);
    }
    Ok(ValidatedConfig {
        n_rx_elements: cfg.n_rx_chains * cfg.n0,
        oversampled_len: cfg.n_subcarriers * cfg.n0,
        cfg,
    })
}

impl ValidatedConfig {
    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn into_inner(self) -> SimConfig {
        self.cfg
    }

    /// Total receive antenna elements, `n_rx_chains * n0`.
    pub fn n_rx_elements(&self) -> usize {
        self.n_rx_elements
    }

    /// Samples per oversampled OFDM symbol (without cyclic prefix).
    pub fn oversampled_len(&self) -> usize {
        self.oversampled_len
    }

    pub fn dims(&self) -> Dims {
        Dims {
            n_subcarriers: self.cfg.n_subcarriers,
            cp_len: self.cfg.cp_len,
            n_tx: self.cfg.n_tx,
            n_rx_chains: self.cfg.n_rx_chains,
            n0: self.cfg.n0,
        }
    }
}

impl std::ops::Deref for ValidatedConfig {
    type Target = SimConfig;
    fn deref(&self) -> &SimConfig {
        &self.cfg
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SchemeKind {
    Pmimo,
    FdMimo,
    HybridMimo,
}

/// A scheme together with the `n_tx x n_rx_chains x n0` triple it runs with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SchemeId {
    pub kind: SchemeKind,
    pub n_tx: usize,
    pub n_rx_chains: usize,
    pub n0: usize,
}

impl SchemeId {
    pub fn pmimo(n_tx: usize, n_rx_chains: usize, n0: usize) -> Self {
        SchemeId {
            kind: SchemeKind::Pmimo,
            n_tx,
            n_rx_chains,
            n0,
        }
    }

    pub fn hybrid(n_tx: usize, n_rx_chains: usize, n0: usize) -> Self {
        SchemeId {
            kind: SchemeKind::HybridMimo,
            n_tx,
            n_rx_chains,
            n0,
        }
    }

    /// Fully digital: every receive element has its own chain, so `n0 = 1`.
    pub fn fd(n_tx: usize, n_rx: usize) -> Self {
        SchemeId {
            kind: SchemeKind::FdMimo,
            n_tx,
            n_rx_chains: n_rx,
            n0: 1,
        }
    }

    pub fn n_rx_elements(&self) -> usize {
        self.n_rx_chains * self.n0
    }

    /// Maximum number of parallel streams the receiver can separate.
    pub fn max_streams(&self) -> usize {
        match self.kind {
            SchemeKind::Pmimo | SchemeKind::FdMimo => self.n_tx.min(self.n_rx_elements()),
            SchemeKind::HybridMimo => self.n_tx.min(self.n_rx_chains),
        }
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            SchemeKind::Pmimo => write!(f, "pmimo_{}x{}x{}", self.n_tx, self.n_rx_chains, self.n0),
            SchemeKind::HybridMimo => {
                write!(f, "hybrid_{}x{}x{}", self.n_tx, self.n_rx_chains, self.n0)
            }
            SchemeKind::FdMimo => write!(f, "fd_{}x{}", self.n_tx, self.n_rx_chains),
        }
    }
}
