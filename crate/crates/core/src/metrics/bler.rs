//! Coded QPSK block error rate over the simulated link.

use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use statrs::function::erf::erfc;

use crate::beamforming::{make_dft_patterns, select_hybrid_combiner, PatternSchedule};
use crate::channel::{draw_channel, freq_response};
use crate::coding::{conv_encode, qpsk_hard, qpsk_llr_mmse, qpsk_map, viterbi_decode};
use crate::config::{Dims, SchemeId, SchemeKind, ValidatedConfig};
use crate::error::{Error, Result};
use crate::linalg::czero;
use crate::rng::{complex_gaussian, derive_rng, purpose};
use crate::transceiver::{
    build_effective_channel_fd, build_effective_channel_hybrid, build_effective_channel_pmimo, equalize, precoders,
    run_link_fd_model, Detector, EffectiveChannel, LinkPrecoder,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CodeRate {
    Half,
    /// Uncoded.
    One,
}

impl CodeRate {
    pub fn value(self) -> f64 {
        match self {
            CodeRate::Half => 0.5,
            CodeRate::One => 1.0,
        }
    }

    /// The rate with twice the information bits per coded bit.
    pub fn doubled(self) -> Result<CodeRate> {
        match self {
            CodeRate::Half => Ok(CodeRate::One),
            CodeRate::One => Err(Error::CodeRate(2.0)),
        }
    }

    pub fn from_value(v: f64) -> Result<CodeRate> {
        if v == 0.5 {
            Ok(CodeRate::Half)
        } else if v == 1.0 {
            Ok(CodeRate::One)
        } else {
            Err(Error::CodeRate(v))
        }
    }
}

impl fmt::Display for CodeRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CodeRate::Half => "1/2",
            CodeRate::One => "1",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlerSettings {
    pub code_rate: CodeRate,
    /// Total transmit power over noise variance per virtual stream, in dB.
    /// `f64::INFINITY` runs the link without noise.
    pub snr_db: f64,
    pub n_blocks: usize,
    pub info_bits: usize,
    pub precoder: LinkPrecoder,
    pub detector: Detector,
}

impl BlerSettings {
    pub fn new(code_rate: CodeRate, snr_db: f64, n_blocks: usize) -> Self {
        BlerSettings {
            code_rate,
            snr_db,
            n_blocks,
            info_bits: 120,
            precoder: LinkPrecoder::Eigen,
            detector: Detector::Mmse,
        }
    }

    fn coded_bits(&self) -> usize {
        match self.code_rate {
            CodeRate::Half => conv_encode(&[]).len() + 2 * self.info_bits,
            CodeRate::One => self.info_bits,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BlerCounts {
    pub blocks: u64,
    pub block_errors: u64,
    pub bits: u64,
    pub bit_errors: u64,
}

impl BlerCounts {
    pub fn bler(&self) -> f64 {
        if self.blocks == 0 {
            0.0
        } else {
            self.block_errors as f64 / self.blocks as f64
        }
    }

    pub fn ber(&self) -> f64 {
        if self.bits == 0 {
            0.0
        } else {
            self.bit_errors as f64 / self.bits as f64
        }
    }

    pub fn merge(self, o: BlerCounts) -> BlerCounts {
        BlerCounts {
            blocks: self.blocks + o.blocks,
            block_errors: self.block_errors + o.block_errors,
            bits: self.bits + o.bits,
            bit_errors: self.bit_errors + o.bit_errors,
        }
    }
}

fn scheme_dims(cfg: &ValidatedConfig, scheme: &SchemeId) -> Result<Dims> {
    let mut d = cfg.dims();
    if scheme.n_tx != d.n_tx || scheme.n_rx_elements() != d.n_rx_elements() {
        return Err(Error::Shape(format!("scheme {scheme} does not fit the configured array")));
    }
    if scheme.kind == SchemeKind::FdMimo {
        d.n_rx_chains = d.n_rx_elements();
        d.n0 = 1;
    }
    Ok(d)
}

/// Monte Carlo BLER of `scheme` on fresh channel, bit and noise draws per
/// block. Channel draws depend only on `seed` and the block index, so runs of
/// different schemes with the same seed see the same channels.
///
/// pMIMO uses `sched` (DFT patterns when `None`); the hybrid receiver picks
/// its combiners per block among the phases of `sched`.
pub fn simulate_bler(
    cfg: &ValidatedConfig,
    scheme: &SchemeId,
    sched: Option<&PatternSchedule>,
    settings: &BlerSettings,
    seed: u64,
) -> Result<BlerCounts> {
    let dims = scheme_dims(cfg, scheme)?;
    let streams = scheme.max_streams();
    let coded = settings.coded_bits();
    if settings.info_bits == 0 || coded % (2 * streams) != 0 {
        return Err(Error::BlockGranularity {
            bits: coded,
            streams,
            subcarriers: dims.active_subcarriers().len(),
        });
    }
    let dft;
    let sched = match sched {
        Some(s) => s,
        None => {
            dft = make_dft_patterns(cfg.n_rx_chains, cfg.n0);
            &dft
        }
    };
    (0..settings.n_blocks as u64)
        .into_par_iter()
        .map(|b| run_block(cfg, scheme, &dims, sched, settings, streams, seed, b))
        .try_reduce(BlerCounts::default, |a, b| Ok(a.merge(b)))
}

#[allow(clippy::too_many_arguments)]
fn run_block(
    cfg: &ValidatedConfig,
    scheme: &SchemeId,
    dims: &Dims,
    sched: &PatternSchedule,
    settings: &BlerSettings,
    streams: usize,
    seed: u64,
    block: u64,
) -> Result<BlerCounts> {
    let (rho, noise_var) = if settings.snr_db == f64::INFINITY {
        (1.0, 0.0)
    } else {
        (10f64.powf(settings.snr_db / 10.0), 1.0)
    };
    let ch = draw_channel(
        &mut derive_rng(seed, &[purpose::CHANNEL, block]),
        cfg.n_paths,
        dims.n_rx_elements(),
        dims.n_tx,
    );
    let freq = freq_response(&ch, dims.n_subcarriers)?;
    let mut g: EffectiveChannel = match scheme.kind {
        SchemeKind::FdMimo => build_effective_channel_fd(&freq, dims)?,
        SchemeKind::Pmimo => build_effective_channel_pmimo(&freq, sched, dims)?,
        SchemeKind::HybridMimo => {
            let comb = select_hybrid_combiner(&freq, dims, sched, rho, cfg.precoding)?;
            build_effective_channel_hybrid(&freq, &comb, dims)?
        }
    };
    g.noise_var = noise_var;
    let f = precoders(&g, rho, settings.precoder, streams)?;

    let mut bit_rng = derive_rng(seed, &[purpose::BITS, block]);
    let info: Vec<u8> = (0..settings.info_bits).map(|_| bit_rng.gen_range(0..2)).collect();
    let coded = match settings.code_rate {
        CodeRate::Half => conv_encode(&info),
        CodeRate::One => info.clone(),
    };
    let symbols = qpsk_map(&coded);
    let uses = symbols.len() / streams;
    let active = g.active.clone();
    let n_ofdm = uses.div_ceil(active.len());

    let mut noise_rng = derive_rng(seed, &[purpose::NOISE, block]);
    let mut detected: Vec<(Complex64, f64)> = Vec::with_capacity(symbols.len());
    for o in 0..n_ofdm {
        let mut grid = vec![vec![czero(); streams]; dims.n_subcarriers];
        for (k, &q) in active.iter().enumerate() {
            let u = o * active.len() + k;
            if u < uses {
                grid[q].copy_from_slice(&symbols[u * streams..(u + 1) * streams]);
            }
        }
        let mut out = run_link_fd_model(&grid, &g, &f, &mut noise_rng, noise_var)?;
        equalize(&mut out, &g, &f, settings.detector)?;
        for (k, &q) in active.iter().enumerate() {
            if o * active.len() + k < uses {
                detected.extend(out.detected[q].iter().zip(&out.bias[q]).map(|(x, mu)| (*x, *mu)));
            }
        }
    }

    let decoded = match settings.code_rate {
        CodeRate::Half => {
            let llr: Vec<f64> = detected.iter().flat_map(|(x, mu)| qpsk_llr_mmse(*x, *mu)).collect();
            viterbi_decode(&llr)
        }
        CodeRate::One => {
            let x: Vec<Complex64> = detected.iter().map(|(x, _)| *x).collect();
            qpsk_hard(&x)
        }
    };
    let errors = decoded.iter().zip(&info).filter(|(a, b)| a != b).count() as u64;
    Ok(BlerCounts {
        blocks: 1,
        block_errors: (errors > 0) as u64,
        bits: info.len() as u64,
        bit_errors: errors,
    })
}

/// Analytic bit error probability of Gray QPSK on AWGN at symbol SNR
/// `snr_db`: `Q(sqrt(snr))`.
pub fn qpsk_ber_theory(snr_db: f64) -> f64 {
    let snr = 10f64.powf(snr_db / 10.0);
    0.5 * erfc((snr / 2.0).sqrt())
}

/// Uncoded QPSK over a single-antenna AWGN channel with hard decisions.
pub fn simulate_awgn_ber(snr_db: f64, n_symbols: usize, seed: u64) -> BlerCounts {
    let nu = 10f64.powf(-snr_db / 10.0);
    let mut rng = derive_rng(seed, &[purpose::BITS]);
    let bits: Vec<u8> = (0..2 * n_symbols).map(|_| rng.gen_range(0..2)).collect();
    let rx: Vec<Complex64> = qpsk_map(&bits)
        .into_iter()
        .map(|s| s + complex_gaussian(&mut rng, nu))
        .collect();
    let errors = qpsk_hard(&rx).iter().zip(&bits).filter(|(a, b)| a != b).count() as u64;
    BlerCounts {
        blocks: 1,
        block_errors: (errors > 0) as u64,
        bits: bits.len() as u64,
        bit_errors: errors,
    }
}
