//! Effective channels for pMIMO, fully digital and hybrid receivers, the
//! frequency-domain link model, the time-domain reference link, and linear
//! detection.
//!
//! For pMIMO, chain `r` applies combiner `w[r][m]` to every oversampled
//! sample `j` with `j mod n0 = m`. After cyclic-prefix removal, the polyphase
//! stream `m` of chain `r` sees subcarrier `q` through
//!
//! ```text
//! G_q[r n0 + m, :] = phi(q, m) * w[r][m]^H * H_q[r n0 .. r n0 + n0, :]
//! ```
//!
//! where `phi(q, m)` is the band-limited interpolation response at offset
//! `m / n0` (see [`ofdm::fractional_phase`]).

use num_complex::Complex64;
use rand::Rng;

use crate::beamforming::{HybridCombiners, PatternSchedule};
use crate::channel::{apply_time_domain, ChannelRealization};
use crate::config::{Dims, Precoding, SchemeId};
use crate::error::{Error, Result};
use crate::linalg::{czero, hermitian_eigen, singular_values, CMat};
use crate::metrics::mode_powers;
use crate::ofdm;
use crate::rng::complex_gaussian;

/// Per-subcarrier equivalent channel from transmit streams to virtual
/// receive streams.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveChannel {
    pub scheme: SchemeId,
    /// One matrix per subcarrier, `0..n`.
    pub per_subcarrier: Vec<CMat>,
    /// Noise variance on each virtual stream.
    pub noise_var: f64,
    /// Subcarriers that carry data.
    pub active: Vec<usize>,
}

impl EffectiveChannel {
    pub fn new(scheme: SchemeId, per_subcarrier: Vec<CMat>, noise_var: f64) -> Self {
        let n = per_subcarrier.len();
        let active = (0..n).filter(|&q| n % 2 == 1 || q != n / 2).collect();
        EffectiveChannel {
            scheme,
            per_subcarrier,
            noise_var,
            active,
        }
    }

    pub fn n_tx(&self) -> usize {
        self.per_subcarrier.first().map_or(0, |g| g.ncols())
    }

    pub fn n_virtual(&self) -> usize {
        self.per_subcarrier.first().map_or(0, |g| g.nrows())
    }
}

fn check_freq(freq: &[CMat], dims: &Dims) -> Result<()> {
    if freq.len() != dims.n_subcarriers {
        return Err(Error::Shape(format!(
            "{} subcarrier responses, config has {}",
            freq.len(),
            dims.n_subcarriers
        )));
    }
    if freq.iter().any(|h| h.nrows() != dims.n_rx_elements() || h.ncols() != dims.n_tx) {
        return Err(Error::Shape(format!(
            "channel must be {} x {} per subcarrier",
            dims.n_rx_elements(),
            dims.n_tx
        )));
    }
    Ok(())
}

/// Row `w^H H[block]` of a chain's combined channel.
fn combine_row(h: &CMat, block: usize, n0: usize, w: &[Complex64]) -> Vec<Complex64> {
    (0..h.ncols())
        .map(|t| (0..n0).map(|e| w[e].conj() * h[(block * n0 + e, t)]).sum())
        .collect()
}

pub fn build_effective_channel_pmimo(freq: &[CMat], sched: &PatternSchedule, dims: &Dims) -> Result<EffectiveChannel> {
    check_freq(freq, dims)?;
    if sched.n_rx_chains() != dims.n_rx_chains || sched.n0() != dims.n0 {
        return Err(Error::Shape(format!(
            "schedule is {}x{}, config needs {}x{}",
            sched.n_rx_chains(),
            sched.n0(),
            dims.n_rx_chains,
            dims.n0
        )));
    }
    let (n, n0) = (dims.n_subcarriers, dims.n0);
    let mats = freq
        .iter()
        .enumerate()
        .map(|(q, h)| {
            let mut g = CMat::zeros(dims.n_virtual(), dims.n_tx);
            for r in 0..dims.n_rx_chains {
                for m in 0..n0 {
                    let phi = ofdm::fractional_phase(q, m, n, n0);
                    for (t, v) in combine_row(h, r, n0, sched.w(r, m)).into_iter().enumerate() {
                        g[(r * n0 + m, t)] = phi * v;
                    }
                }
            }
            g
        })
        .collect();
    let scheme = SchemeId::pmimo(dims.n_tx, dims.n_rx_chains, n0);
    Ok(EffectiveChannel::new(scheme, mats, 1.0))
}

/// Every element has its own chain: `G_q = H_q`.
pub fn build_effective_channel_fd(freq: &[CMat], dims: &Dims) -> Result<EffectiveChannel> {
    check_freq(freq, dims)?;
    let scheme = SchemeId::fd(dims.n_tx, dims.n_rx_elements());
    Ok(EffectiveChannel::new(scheme, freq.to_vec(), 1.0))
}

/// One fixed combiner per chain, no sub-sample switching.
pub fn build_effective_channel_hybrid(freq: &[CMat], combiners: &HybridCombiners, dims: &Dims) -> Result<EffectiveChannel> {
    check_freq(freq, dims)?;
    if combiners.weights.len() != dims.n_rx_chains || combiners.weights.iter().any(|w| w.len() != dims.n0) {
        return Err(Error::Shape(format!(
            "need {} combiners of length {}",
            dims.n_rx_chains, dims.n0
        )));
    }
    let mats = freq
        .iter()
        .map(|h| {
            let mut g = CMat::zeros(dims.n_rx_chains, dims.n_tx);
            for (r, w) in combiners.weights.iter().enumerate() {
                for (t, v) in combine_row(h, r, dims.n0, w).into_iter().enumerate() {
                    g[(r, t)] = v;
                }
            }
            g
        })
        .collect();
    let scheme = SchemeId::hybrid(dims.n_tx, dims.n_rx_chains, dims.n0);
    Ok(EffectiveChannel::new(scheme, mats, 1.0))
}

/// How transmit streams are mapped onto antennas.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkPrecoder {
    /// Stream `k` on antenna `k`, equal power.
    Identity,
    /// Right singular vectors of `G_q`, equal power per stream.
    Eigen,
    /// Right singular vectors with water-filled powers across all
    /// subcarrier-mode pairs.
    EigenWaterfilling,
}

impl From<Precoding> for LinkPrecoder {
    fn from(p: Precoding) -> Self {
        match p {
            Precoding::IsotropicEqualPower => LinkPrecoder::Identity,
            Precoding::SvdWaterfilling => LinkPrecoder::EigenWaterfilling,
        }
    }
}

/// Right singular vectors of `g` ordered by decreasing gain, with the gains.
fn right_modes(g: &CMat) -> (Vec<f64>, CMat) {
    let (vals, vecs) = hermitian_eigen(&(g.adjoint() * g), true);
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]).then(a.cmp(&b)));
    let sorted = CMat::from_fn(vecs.nrows(), vecs.ncols(), |i, j| vecs[(i, order[j])]);
    (order.iter().map(|&i| vals[i]).collect(), sorted)
}

/// Per-subcarrier `N_t x streams` precoders with total power `rho` per
/// subcarrier (on average, for water-filling). Inactive subcarriers get a
/// zero precoder.
pub fn precoders(g: &EffectiveChannel, rho: f64, kind: LinkPrecoder, streams: usize) -> Result<Vec<CMat>> {
    let nt = g.n_tx();
    if streams == 0 || streams > nt {
        return Err(Error::Shape(format!("{streams} streams for {nt} transmit chains")));
    }
    let mut out = vec![CMat::zeros(nt, streams); g.per_subcarrier.len()];
    match kind {
        LinkPrecoder::Identity => {
            let a = Complex64::new((rho / streams as f64).sqrt(), 0.0);
            for &q in &g.active {
                out[q] = CMat::identity(nt, streams) * a;
            }
        }
        LinkPrecoder::Eigen => {
            let a = (rho / streams as f64).sqrt();
            for &q in &g.active {
                let (_, v) = right_modes(&g.per_subcarrier[q]);
                out[q] = v.columns(0, streams).into_owned() * Complex64::new(a, 0.0);
            }
        }
        LinkPrecoder::EigenWaterfilling => {
            let decomp: Vec<(Vec<f64>, CMat)> = g.active.iter().map(|&q| right_modes(&g.per_subcarrier[q])).collect();
            let gains: Vec<Vec<f64>> = decomp
                .iter()
                .map(|(l, _)| l.iter().take(streams).map(|v| v / g.noise_var).collect())
                .collect();
            let powers = mode_powers(&gains, rho, nt, Precoding::SvdWaterfilling);
            for ((&q, (_, v)), p) in g.active.iter().zip(&decomp).zip(&powers) {
                let mut f = v.columns(0, streams).into_owned();
                for (k, pk) in p.iter().enumerate() {
                    f.column_mut(k).scale_mut(pk.sqrt());
                }
                out[q] = f;
            }
        }
    }
    Ok(out)
}

/// Received and detected signals of one OFDM symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkOutput {
    /// Virtual-stream observations per subcarrier.
    pub received: Vec<Vec<Complex64>>,
    /// Detected stream symbols per subcarrier (empty until detection runs).
    pub detected: Vec<Vec<Complex64>>,
    /// Post-detection SINR per subcarrier and stream.
    pub sinr: Vec<Vec<f64>>,
    /// MMSE bias `E[x_hat | x] / x` per subcarrier and stream (1 for ZF).
    pub bias: Vec<Vec<f64>>,
}

impl LinkOutput {
    fn from_received(received: Vec<Vec<Complex64>>) -> Self {
        LinkOutput {
            received,
            detected: Vec::new(),
            sinr: Vec::new(),
            bias: Vec::new(),
        }
    }
}

/// Frequency-domain link: `y_q = G_q F_q s_q + n_q`, with i.i.d. complex
/// Gaussian noise of variance `noise_var` per virtual stream. Noise is drawn
/// in subcarrier-major order for every subcarrier, active or not.
pub fn run_link_fd_model<R: Rng + ?Sized>(
    symbols: &[Vec<Complex64>],
    g: &EffectiveChannel,
    precoders: &[CMat],
    noise_rng: &mut R,
    noise_var: f64,
) -> Result<LinkOutput> {
    let n = g.per_subcarrier.len();
    if symbols.len() != n || precoders.len() != n {
        return Err(Error::Shape("symbols / precoders do not cover every subcarrier".into()));
    }
    let mut received = Vec::with_capacity(n);
    for q in 0..n {
        let f = &precoders[q];
        if f.ncols() != symbols[q].len() || f.nrows() != g.n_tx() {
            return Err(Error::Shape(format!("subcarrier {q}: precoder / symbol mismatch")));
        }
        let s = nalgebra::DVector::from_column_slice(&symbols[q]);
        let clean = &g.per_subcarrier[q] * (f * s);
        let y = clean
            .iter()
            .map(|v| if noise_var > 0.0 { v + complex_gaussian(noise_rng, noise_var) } else { *v })
            .collect();
        received.push(y);
    }
    Ok(LinkOutput::from_received(received))
}

/// Time-domain reference link.
///
/// `tx_freq[t][q]` is the frequency-domain symbol of transmit chain `t` on
/// subcarrier `q`. Each chain is transformed, interpolated by `n0`, extended
/// by a cyclic prefix of `cp_len * n0` oversampled samples, and sent through
/// the channel. Every receive chain combines its elements with pattern
/// `j mod n0` at oversampled sample `j`, noise of variance `noise_var` is
/// added per combined sample, and each polyphase stream is stripped of its
/// prefix and transformed back. Returns `y[q][r n0 + m]`.
pub fn run_link_time_oracle<R: Rng + ?Sized>(
    tx_freq: &[Vec<Complex64>],
    ch: &ChannelRealization,
    sched: &PatternSchedule,
    noise_rng: &mut R,
    noise_var: f64,
    dims: &Dims,
) -> Result<LinkOutput> {
    let (n, n0, cp) = (dims.n_subcarriers, dims.n0, dims.cp_len);
    if cp + 1 < ch.n_paths() {
        return Err(Error::Shape(format!(
            "cyclic prefix {cp} shorter than channel memory {}",
            ch.n_paths() - 1
        )));
    }
    if tx_freq.len() != dims.n_tx || tx_freq.iter().any(|x| x.len() != n) {
        return Err(Error::Shape(format!("need {} transmit symbols of length {n}", dims.n_tx)));
    }
    if ch.n_rx() != dims.n_rx_elements() || ch.n_tx() != dims.n_tx {
        return Err(Error::Shape("channel does not match the array".into()));
    }
    if sched.n_rx_chains() != dims.n_rx_chains || sched.n0() != n0 {
        return Err(Error::Shape("schedule does not match the array".into()));
    }
    let tx_time = tx_freq
        .iter()
        .map(|x| {
            let up = ofdm::upsample_bandlimited(&ofdm::idft(x)?, n0)?;
            ofdm::add_cp(&up, cp * n0)
        })
        .collect::<Result<Vec<_>>>()?;
    let rx = apply_time_domain(ch, &tx_time, n0)?;
    let len = (n + cp) * n0;
    let mut received = vec![vec![czero(); dims.n_virtual()]; n];
    for r in 0..dims.n_rx_chains {
        let combined: Vec<Complex64> = (0..len)
            .map(|j| {
                let w = sched.w(r, j % n0);
                let mut acc: Complex64 = (0..n0).map(|e| w[e].conj() * rx[r * n0 + e][j]).sum();
                if noise_var > 0.0 {
                    acc += complex_gaussian(noise_rng, noise_var);
                }
                acc
            })
            .collect();
        let body = ofdm::remove_cp(&combined, cp * n0, n * n0)?;
        for (m, stream) in ofdm::polyphase_split(&body, n0)?.into_iter().enumerate() {
            for (q, v) in ofdm::dft(&stream)?.into_iter().enumerate() {
                received[q][r * n0 + m] = v;
            }
        }
    }
    Ok(LinkOutput::from_received(received))
}

/// Output of a linear detector.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub symbols: Vec<Complex64>,
    pub sinr: Vec<f64>,
    pub bias: Vec<f64>,
}

const RANK_TOL: f64 = 1e-10;

fn check_rank(g: &CMat) -> Result<()> {
    let s = singular_values(g);
    let max = s.first().copied().unwrap_or(0.0);
    let min = if g.nrows() >= g.ncols() { s.get(g.ncols() - 1).copied().unwrap_or(0.0) } else { 0.0 };
    if max == 0.0 || min < RANK_TOL * max {
        return Err(Error::RankDeficient {
            ratio: if max == 0.0 { 0.0 } else { min / max },
        });
    }
    Ok(())
}

fn invert(m: CMat) -> Result<CMat> {
    let ratio = 0.0;
    m.try_inverse().ok_or(Error::RankDeficient { ratio })
}

/// Zero forcing: `x = (G^H G)^{-1} G^H y`.
pub fn detect_zf(g: &CMat, y: &[Complex64], noise_var: f64, power: f64) -> Result<Detection> {
    if y.len() != g.nrows() {
        return Err(Error::Shape("observation length does not match channel rows".into()));
    }
    check_rank(g)?;
    let inv = invert(g.adjoint() * g)?;
    let x = &inv * g.adjoint() * nalgebra::DVector::from_column_slice(y);
    let sinr = (0..g.ncols())
        .map(|k| {
            let d = inv[(k, k)].re;
            if noise_var == 0.0 { f64::INFINITY } else { power / (noise_var * d) }
        })
        .collect();
    Ok(Detection {
        symbols: x.iter().copied().collect(),
        sinr,
        bias: vec![1.0; g.ncols()],
    })
}

/// Linear MMSE: `x = (G^H G + (noise_var / power) I)^{-1} G^H y`.
pub fn detect_mmse(g: &CMat, y: &[Complex64], noise_var: f64, power: f64) -> Result<Detection> {
    if y.len() != g.nrows() {
        return Err(Error::Shape("observation length does not match channel rows".into()));
    }
    let k = g.ncols();
    let reg = Complex64::new(noise_var / power, 0.0);
    let inv = invert(g.adjoint() * g + CMat::identity(k, k) * reg)?;
    let x = &inv * g.adjoint() * nalgebra::DVector::from_column_slice(y);
    let mut sinr = Vec::with_capacity(k);
    let mut bias = Vec::with_capacity(k);
    for i in 0..k {
        // MSE_k = noise_var * [(G^H G + noise_var / P I)^{-1}]_kk
        let mse = noise_var * inv[(i, i)].re;
        let mu = (1.0 - mse / power).clamp(0.0, 1.0);
        bias.push(mu);
        sinr.push(if mse <= 0.0 { f64::INFINITY } else { power / mse - 1.0 });
    }
    Ok(Detection {
        symbols: x.iter().copied().collect(),
        sinr,
        bias,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Detector {
    Zf,
    Mmse,
}

/// Runs a detector on every active subcarrier of `out`, treating `G_q F_q`
/// as the stream channel with unit-power symbols.
pub fn equalize(out: &mut LinkOutput, g: &EffectiveChannel, precoders: &[CMat], detector: Detector) -> Result<()> {
    let n = g.per_subcarrier.len();
    out.detected = vec![Vec::new(); n];
    out.sinr = vec![Vec::new(); n];
    out.bias = vec![Vec::new(); n];
    for &q in &g.active {
        let gs = &g.per_subcarrier[q] * &precoders[q];
        let d = match detector {
            Detector::Zf => detect_zf(&gs, &out.received[q], g.noise_var, 1.0)?,
            Detector::Mmse => detect_mmse(&gs, &out.received[q], g.noise_var, 1.0)?,
        };
        out.detected[q] = d.symbols;
        out.sinr[q] = d.sinr;
        out.bias[q] = d.bias;
    }
    Ok(())
}
