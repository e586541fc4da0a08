//! Monte Carlo experiment runner and CSV output.
//!
//! Every random draw comes from a stream derived from the master seed and a
//! key naming what is drawn, so results do not depend on the worker count or
//! on which other arms are in the plan. Channel draws are keyed by
//! realization index and array shape only; arms with the same array
//! therefore see the same channels and per-realization comparisons between
//! them are paired.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::beamforming::{
    make_dft_patterns, make_random_patterns, optimize_patterns, select_hybrid_combiner, Constraint, OptimizeOptions,
    PatternSchedule,
};
use crate::channel::{draw_channel, freq_response, ChannelRealization};
use crate::config::{Dims, PatternSource, SchemeId, SchemeKind, ValidatedConfig};
use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::metrics::{
    condition_number, energy_efficiency, simulate_bler, spectral_efficiency, BlerCounts, BlerSettings, CodeRate,
    PowerModel,
};
use crate::rng::{complex_gaussian, derive_rng, mix_seed, purpose};
use crate::transceiver::{
    build_effective_channel_fd, build_effective_channel_hybrid, build_effective_channel_pmimo, run_link_fd_model,
    run_link_time_oracle, Detector, EffectiveChannel, LinkPrecoder,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    CondNum,
    SeSweep,
    EeCurve,
    Bler,
    Validate,
}

impl Figure {
    pub fn file_stem(self) -> &'static str {
        match self {
            Figure::CondNum => "condnum",
            Figure::SeSweep => "se",
            Figure::EeCurve => "ee",
            Figure::Bler => "bler",
            Figure::Validate => "validate",
        }
    }

    pub fn header(self) -> &'static str {
        match self {
            Figure::CondNum => "scheme,realization,subcarrier,kappa",
            Figure::SeSweep => "scheme,snr_db,se_bps_hz,se_stderr",
            Figure::EeCurve => "scheme,ptx_w,se_bps_hz,ee_bits_per_joule",
            Figure::Bler => "scheme,snr_db,code_rate,blocks,block_errors,bler",
            Figure::Validate => "n,n_paths,n0,n_tx,schedules,max_rel_err",
        }
    }
}

/// One scheme under one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Arm {
    pub scheme: SchemeId,
    pub config: ValidatedConfig,
}

impl Arm {
    pub fn new(scheme: SchemeId, config: ValidatedConfig) -> Result<Arm> {
        if scheme.n_tx != config.n_tx || scheme.n_rx_elements() != config.n_rx_elements() {
            return Err(Error::Shape(format!(
                "scheme {scheme} does not fit a {}-antenna transmitter and {}-element receiver",
                config.n_tx,
                config.n_rx_elements()
            )));
        }
        if scheme.kind != SchemeKind::FdMimo && (scheme.n_rx_chains != config.n_rx_chains || scheme.n0 != config.n0) {
            return Err(Error::Shape(format!("scheme {scheme} does not match the configured chains")));
        }
        Ok(Arm { scheme, config })
    }

    /// pMIMO, fully digital and hybrid arms sharing one configuration.
    pub fn all(config: &ValidatedConfig) -> Vec<Arm> {
        let (nt, nrf, n0) = (config.n_tx, config.n_rx_chains, config.n0);
        [SchemeId::pmimo(nt, nrf, n0), SchemeId::fd(nt, nrf * n0), SchemeId::hybrid(nt, nrf, n0)]
            .into_iter()
            .map(|s| Arm {
                scheme: s,
                config: config.clone(),
            })
            .collect()
    }

    pub fn dims(&self) -> Dims {
        let mut d = self.config.dims();
        if self.scheme.kind == SchemeKind::FdMimo {
            d.n_rx_chains = d.n_rx_elements();
            d.n0 = 1;
        }
        d
    }
}

/// Transmit-power grid of the energy-efficiency sweep and the SNR it maps to.
#[derive(Debug, Clone, PartialEq)]
pub struct EeSweep {
    pub ptx_w: Vec<f64>,
    /// Transmit SNR reached with 1 W of transmit power.
    pub snr_at_1w_db: f64,
}

impl Default for EeSweep {
    fn default() -> Self {
        let (lo, hi, k) = (0.01f64.log10(), 40f64.log10(), 25);
        EeSweep {
            ptx_w: (0..k).map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / (k - 1) as f64)).collect(),
            snr_at_1w_db: 20.0,
        }
    }
}

impl EeSweep {
    pub fn rho(&self, ptx_w: f64) -> f64 {
        ptx_w * 10f64.powf(self.snr_at_1w_db / 10.0)
    }
}

/// Link settings for the BLER figure. The hybrid arm runs at twice
/// `code_rate`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlerPlan {
    pub code_rate: CodeRate,
    pub info_bits: usize,
    pub precoder: LinkPrecoder,
    pub detector: Detector,
}

impl Default for BlerPlan {
    fn default() -> Self {
        BlerPlan {
            code_rate: CodeRate::Half,
            info_bits: 120,
            precoder: LinkPrecoder::Eigen,
            detector: Detector::Mmse,
        }
    }
}

/// Parameter grid of the oracle check. Combinations whose channel is longer
/// than the symbol are skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidateGrid {
    pub n: Vec<usize>,
    pub n_paths: Vec<usize>,
    pub n0: Vec<usize>,
    pub n_tx: Vec<usize>,
    pub schedules: usize,
}

impl Default for ValidateGrid {
    fn default() -> Self {
        ValidateGrid {
            n: vec![8, 16, 64],
            n_paths: vec![1, 4, 15],
            n0: vec![1, 2, 4],
            n_tx: vec![1, 2, 4],
            schedules: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub figure: Figure,
    pub arms: Vec<Arm>,
    /// Output directory.
    pub out: PathBuf,
    pub workers: usize,
    pub power: PowerModel,
    pub ee: EeSweep,
    pub bler: BlerPlan,
    pub validate: ValidateGrid,
}

impl ExperimentPlan {
    pub fn new(figure: Figure, arms: Vec<Arm>, out: impl Into<PathBuf>) -> Result<Self> {
        if arms.is_empty() {
            return Err(Error::EmptyInput);
        }
        Ok(ExperimentPlan {
            figure,
            arms,
            out: out.into(),
            workers: 1,
            power: PowerModel::default(),
            ee: EeSweep::default(),
            bler: BlerPlan::default(),
            validate: ValidateGrid::default(),
        })
    }

    pub fn csv_path(&self) -> PathBuf {
        self.out.join(format!("{}.csv", self.figure.file_stem()))
    }

    pub fn meta_path(&self) -> PathBuf {
        self.out.join(format!("{}.meta", self.figure.file_stem()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Record {
    Kappa {
        realization: usize,
        subcarrier: usize,
        kappa: f64,
    },
    Se {
        snr_db: f64,
        se: f64,
        stderr: f64,
    },
    Ee {
        ptx_w: f64,
        se: f64,
        ee: f64,
    },
    Bler {
        snr_db: f64,
        code_rate: CodeRate,
        counts: BlerCounts,
    },
    Validate {
        n: usize,
        n_paths: usize,
        n0: usize,
        n_tx: usize,
        schedules: usize,
        max_rel_err: f64,
    },
}

/// Results of one arm.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSeries {
    pub scheme: SchemeId,
    pub figure: Figure,
    pub records: Vec<Record>,
    pub realizations: usize,
    pub seed: u64,
}

/// Channel realization `i` of `cfg` with its per-subcarrier response.
pub fn channel_for(cfg: &ValidatedConfig, realization: u64) -> Result<(ChannelRealization, Vec<CMat>)> {
    let key = [
        purpose::CHANNEL,
        realization,
        cfg.n_paths as u64,
        cfg.n_rx_elements() as u64,
        cfg.n_tx as u64,
    ];
    let ch = draw_channel(&mut derive_rng(cfg.master_seed, &key), cfg.n_paths, cfg.n_rx_elements(), cfg.n_tx);
    let freq = freq_response(&ch, cfg.n_subcarriers)?;
    Ok((ch, freq))
}

/// The pMIMO schedule used on realization `i` at linear SNR `rho`, also the
/// candidate set of the hybrid receiver.
pub fn pattern_schedule(cfg: &ValidatedConfig, freq: &[CMat], rho: f64, realization: u64) -> Result<PatternSchedule> {
    let dims = cfg.dims();
    let shape = [dims.n_tx as u64, dims.n_rx_chains as u64, dims.n0 as u64];
    let key = |extra: &[u64]| {
        let mut k = vec![purpose::PATTERNS, realization];
        k.extend_from_slice(&shape);
        k.extend_from_slice(extra);
        k
    };
    let dft = make_dft_patterns(dims.n_rx_chains, dims.n0);
    let constraint = match cfg.pattern_source {
        PatternSource::DftFixed => return Ok(dft),
        PatternSource::RandomPhase => {
            let mut rng = derive_rng(cfg.master_seed, &key(&[]));
            return Ok(make_random_patterns(&mut rng, dims.n_rx_chains, dims.n0, Constraint::UnitModulusPhase));
        }
        src => Constraint::for_source(src),
    };
    let opts = OptimizeOptions::new(rho, cfg.precoding, constraint);
    let mut rng = derive_rng(cfg.master_seed, &key(&[rho.to_bits()]));
    Ok(optimize_patterns(freq, &dims, &dft.projected(constraint), &opts, &mut rng)?.schedule)
}

/// Effective channel of `arm` on realization `i` at linear SNR `rho`.
pub fn effective_channel(arm: &Arm, freq: &[CMat], rho: f64, realization: u64) -> Result<EffectiveChannel> {
    let dims = arm.dims();
    match arm.scheme.kind {
        SchemeKind::FdMimo => build_effective_channel_fd(freq, &dims),
        SchemeKind::Pmimo => {
            let s = pattern_schedule(&arm.config, freq, rho, realization)?;
            build_effective_channel_pmimo(freq, &s, &dims)
        }
        SchemeKind::HybridMimo => {
            let cand = pattern_schedule(&arm.config, freq, rho, realization)?;
            let comb = select_hybrid_combiner(freq, &dims, &cand, rho, arm.config.precoding)?;
            build_effective_channel_hybrid(freq, &comb, &dims)
        }
    }
}

/// Spectral efficiency of `arm` on one realization.
pub fn realization_se(arm: &Arm, realization: u64, snr_db: f64) -> Result<f64> {
    let rho = 10f64.powf(snr_db / 10.0);
    let (_, freq) = channel_for(&arm.config, realization)?;
    let g = effective_channel(arm, &freq, rho, realization)?;
    Ok(spectral_efficiency(&g, rho, arm.config.precoding))
}

/// Condition numbers of `arm` on one realization, one per active subcarrier.
pub fn realization_kappa(arm: &Arm, realization: u64) -> Result<Vec<(usize, f64)>> {
    let snr_db = arm.config.snr_grid_db.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let rho = 10f64.powf(snr_db / 10.0);
    let (_, freq) = channel_for(&arm.config, realization)?;
    let g = effective_channel(arm, &freq, rho, realization)?;
    g.active
        .iter()
        .map(|&q| Ok((q, condition_number(&g.per_subcarrier[q])?)))
        .collect()
}

fn mean_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Mean SE at each `(snr_db)` point over the arm's realizations.
fn se_means(arm: &Arm, snrs: &[f64]) -> Result<Vec<(f64, f64)>> {
    let r = arm.config.n_realizations;
    let flat: Vec<f64> = (0..snrs.len() * r)
        .into_par_iter()
        .map(|k| realization_se(arm, (k % r) as u64, snrs[k / r]))
        .collect::<Result<_>>()?;
    Ok(flat.chunks(r).map(mean_stderr).collect())
}

/// Largest relative error between the time-domain link and the
/// effective-channel model over `schedules` random draws.
pub fn oracle_max_error(n: usize, n_paths: usize, n0: usize, n_tx: usize, n_rx_chains: usize, schedules: usize, seed: u64) -> Result<f64> {
    let dims = Dims {
        n_subcarriers: n,
        cp_len: n_paths.saturating_sub(1),
        n_tx,
        n_rx_chains,
        n0,
    };
    let shape = [n as u64, n_paths as u64, n0 as u64, n_tx as u64, n_rx_chains as u64];
    let errs: Vec<f64> = (0..schedules as u64)
        .into_par_iter()
        .map(|s| {
            let key = |p: u64| [&[p, s][..], &shape[..]].concat();
            let ch = draw_channel(&mut derive_rng(seed, &key(purpose::CHANNEL)), n_paths, dims.n_rx_elements(), n_tx);
            let freq = freq_response(&ch, n)?;
            let sched =
                make_random_patterns(&mut derive_rng(seed, &key(purpose::PATTERNS)), n_rx_chains, n0, Constraint::UnitNorm);
            let mut rng = derive_rng(seed, &key(purpose::BITS));
            let x: Vec<Vec<Complex64>> = (0..n_tx).map(|_| (0..n).map(|_| complex_gaussian(&mut rng, 1.0)).collect()).collect();
            let g = build_effective_channel_pmimo(&freq, &sched, &dims)?;
            let time = run_link_time_oracle(&x, &ch, &sched, &mut rng, 0.0, &dims)?;
            let sym: Vec<Vec<Complex64>> = (0..n).map(|q| x.iter().map(|xt| xt[q]).collect()).collect();
            let eye = vec![CMat::identity(n_tx, n_tx); n];
            let model = run_link_fd_model(&sym, &g, &eye, &mut rng, 0.0)?;
            let (mut num, mut den) = (0.0, 0.0);
            for (a, b) in time.received.iter().flatten().zip(model.received.iter().flatten()) {
                num += (a - b).norm_sqr();
                den += b.norm_sqr();
            }
            Ok((num / den).sqrt())
        })
        .collect::<Result<_>>()?;
    Ok(errs.into_iter().fold(0.0, f64::max))
}

fn run_arm(plan: &ExperimentPlan, arm: &Arm) -> Result<Vec<Record>> {
    let cfg = &arm.config;
    match plan.figure {
        Figure::CondNum => {
            let per: Vec<Vec<(usize, f64)>> = (0..cfg.n_realizations as u64)
                .into_par_iter()
                .map(|i| realization_kappa(arm, i))
                .collect::<Result<_>>()?;
            Ok(per
                .into_iter()
                .enumerate()
                .flat_map(|(i, v)| {
                    v.into_iter().map(move |(q, kappa)| Record::Kappa {
                        realization: i,
                        subcarrier: q,
                        kappa,
                    })
                })
                .collect())
        }
        Figure::SeSweep => {
            let stats = se_means(arm, &cfg.snr_grid_db)?;
            Ok(cfg
                .snr_grid_db
                .iter()
                .zip(stats)
                .map(|(&snr_db, (se, stderr))| Record::Se { snr_db, se, stderr })
                .collect())
        }
        Figure::EeCurve => {
            let snrs: Vec<f64> = plan.ee.ptx_w.iter().map(|&p| 10.0 * plan.ee.rho(p).log10()).collect();
            let stats = se_means(arm, &snrs)?;
            Ok(plan
                .ee
                .ptx_w
                .iter()
                .zip(stats)
                .map(|(&ptx_w, (se, _))| Record::Ee {
                    ptx_w,
                    se,
                    ee: energy_efficiency(se, ptx_w, &arm.scheme, &plan.power),
                })
                .collect())
        }
        Figure::Bler => {
            let code_rate = match arm.scheme.kind {
                SchemeKind::HybridMimo => plan.bler.code_rate.doubled()?,
                _ => plan.bler.code_rate,
            };
            let sched = match cfg.pattern_source {
                PatternSource::RandomPhase => make_random_patterns(
                    &mut derive_rng(cfg.master_seed, &[purpose::PATTERNS]),
                    cfg.n_rx_chains,
                    cfg.n0,
                    Constraint::UnitModulusPhase,
                ),
                _ => make_dft_patterns(cfg.n_rx_chains, cfg.n0),
            };
            cfg.snr_grid_db
                .iter()
                .map(|&snr_db| {
                    let mut st = BlerSettings::new(code_rate, snr_db, cfg.n_realizations);
                    st.info_bits = plan.bler.info_bits;
                    st.precoder = plan.bler.precoder;
                    st.detector = plan.bler.detector;
                    let seed = mix_seed(cfg.master_seed, &[purpose::NOISE, snr_db.to_bits()]);
                    let counts = simulate_bler(cfg, &arm.scheme, Some(&sched), &st, seed)?;
                    Ok(Record::Bler {
                        snr_db,
                        code_rate,
                        counts,
                    })
                })
                .collect()
        }
        Figure::Validate => {
            let g = &plan.validate;
            let mut out = Vec::new();
            for &n in &g.n {
                for &n_paths in &g.n_paths {
                    if n_paths > n {
                        continue;
                    }
                    for &n0 in &g.n0 {
                        for &n_tx in &g.n_tx {
                            let max_rel_err =
                                oracle_max_error(n, n_paths, n0, n_tx, cfg.n_rx_chains, g.schedules, cfg.master_seed)?;
                            out.push(Record::Validate {
                                n,
                                n_paths,
                                n0,
                                n_tx,
                                schedules: g.schedules,
                                max_rel_err,
                            });
                        }
                    }
                }
            }
            Ok(out)
        }
    }
}

/// Runs every arm of `plan` on a pool of `plan.workers` threads.
pub fn run(plan: &ExperimentPlan) -> Result<Vec<MetricSeries>> {
    if plan.arms.is_empty() {
        return Err(Error::EmptyInput);
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(plan.workers.max(1)).build()?;
    let arms: &[Arm] = if plan.figure == Figure::Validate { &plan.arms[..1] } else { &plan.arms };
    pool.install(|| {
        arms.iter()
            .map(|arm| {
                Ok(MetricSeries {
                    scheme: arm.scheme,
                    figure: plan.figure,
                    records: run_arm(plan, arm)?,
                    realizations: arm.config.n_realizations,
                    seed: arm.config.master_seed,
                })
            })
            .collect()
    })
}

fn f(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_row(scheme: &SchemeId, r: &Record) -> String {
    match r {
        Record::Kappa {
            realization,
            subcarrier,
            kappa,
        } => format!("{scheme},{realization},{subcarrier},{}", f(*kappa)),
        Record::Se { snr_db, se, stderr } => format!("{scheme},{},{},{}", f(*snr_db), f(*se), f(*stderr)),
        Record::Ee { ptx_w, se, ee } => format!("{scheme},{},{},{}", f(*ptx_w), f(*se), f(*ee)),
        Record::Bler {
            snr_db,
            code_rate,
            counts,
        } => format!(
            "{scheme},{},{},{},{},{}",
            f(*snr_db),
            f(code_rate.value()),
            counts.blocks,
            counts.block_errors,
            f(counts.bler())
        ),
        Record::Validate {
            n,
            n_paths,
            n0,
            n_tx,
            schedules,
            max_rel_err,
        } => format!("{n},{n_paths},{n0},{n_tx},{schedules},{}", f(*max_rel_err)),
    }
}

/// Writes `series` under the header of `figure`.
pub fn write_csv(figure: Figure, series: &[MetricSeries], path: &Path) -> Result<()> {
    let mut s = String::from(figure.header());
    s.push('\n');
    for m in series {
        for r in &m.records {
            s.push_str(&csv_row(&m.scheme, r));
            s.push('\n');
        }
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// Reads a CSV written by [`write_csv`]: the header fields and every row.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            msg: "missing header".into(),
        })?
        .split(',')
        .map(String::from)
        .collect::<Vec<_>>();
    let rows = lines
        .filter(|l| !l.is_empty())
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    Ok((header, rows))
}

/// Sidecar with everything needed to rerun the plan.
pub fn write_meta(plan: &ExperimentPlan, path: &Path) -> Result<()> {
    let mut s = String::new();
    let _ = writeln!(s, "figure = {}", plan.figure.file_stem());
    for (i, arm) in plan.arms.iter().enumerate() {
        let _ = writeln!(s, "\n[arm {i}]\nscheme = {}", arm.scheme);
        s.push_str(&arm.config.to_kv_string());
    }
    s.push_str("\n[power_model]\n");
    s.push_str(&plan.power.describe());
    let _ = writeln!(s, "\n[ee]\nsnr_at_1w_db = {:?}", plan.ee.snr_at_1w_db);
    let grid: Vec<String> = plan.ee.ptx_w.iter().map(|p| f(*p)).collect();
    let _ = writeln!(s, "ptx_w = {}", grid.join(","));
    let _ = writeln!(
        s,
        "\n[bler]\ncode_rate = {}\ninfo_bits = {}\nprecoder = {:?}\ndetector = {:?}",
        plan.bler.code_rate, plan.bler.info_bits, plan.bler.precoder, plan.bler.detector
    );
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// Runs `plan` and writes `<figure>.csv` and `<figure>.meta` into
/// `plan.out`. Returns the CSV path.
pub fn run_and_write(plan: &ExperimentPlan) -> Result<PathBuf> {
    let series = run(plan)?;
    fs::create_dir_all(&plan.out).map_err(|e| Error::io(&plan.out, e))?;
    let csv = plan.csv_path();
    write_csv(plan.figure, &series, &csv)?;
    write_meta(plan, &plan.meta_path())?;
    Ok(csv)
}
