//! Rayleigh multipath MIMO channels.
//!
//! Taps sit at integer multiples of the original sample period and share a
//! uniform power-delay profile (variance `1/L` each), so every transmit /
//! receive element pair has unit average power. The channel is constant for
//! the duration of one OFDM symbol.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use rand::Rng;

use crate::config::ValidatedConfig;
use crate::error::{Error, Result};
use crate::linalg::{czero, CMat};
use crate::ofdm;
use crate::rng::complex_gaussian;

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// `taps[l]` is the `n_rx x n_tx` matrix of path `l`.
    pub taps: Vec<CMat>,
}

impl ChannelRealization {
    pub fn n_paths(&self) -> usize {
        self.taps.len()
    }

    pub fn n_rx(&self) -> usize {
        self.taps.first().map_or(0, |t| t.nrows())
    }

    pub fn n_tx(&self) -> usize {
        self.taps.first().map_or(0, |t| t.ncols())
    }
}

/// Draws an `n_paths`-tap channel between `n_tx` transmit chains and
/// `n_rx` receive elements.
pub fn draw_channel<R: Rng + ?Sized>(rng: &mut R, n_paths: usize, n_rx: usize, n_tx: usize) -> ChannelRealization {
    let var = 1.0 / n_paths as f64;
    // Column-major fill order; fixed so a seed always maps to the same taps.
    let taps = (0..n_paths)
        .map(|_| CMat::from_fn(n_rx, n_tx, |_, _| complex_gaussian(rng, var)))
        .collect();
    ChannelRealization { taps }
}

/// Draws a channel shaped by the config (`n_paths x N_r^A x n_tx`).
pub fn draw_realization<R: Rng + ?Sized>(rng: &mut R, cfg: &ValidatedConfig) -> ChannelRealization {
    draw_channel(rng, cfg.n_paths, cfg.n_rx_elements(), cfg.n_tx)
}

/// Per-subcarrier responses `H_q = sum_l taps[l] exp(-j 2 pi q l / n)`.
pub fn freq_response(ch: &ChannelRealization, n: usize) -> Result<Vec<CMat>> {
    let l = ch.n_paths();
    if l > n {
        return Err(Error::TooManyTaps { taps: l, n });
    }
    let (nr, nt) = (ch.n_rx(), ch.n_tx());
    let mut out = vec![CMat::zeros(nr, nt); n];
    let scale = (n as f64).sqrt();
    let mut padded = vec![czero(); n];
    for a in 0..nr {
        for t in 0..nt {
            padded.iter_mut().for_each(|v| *v = czero());
            for (p, tap) in ch.taps.iter().enumerate() {
                padded[p] = tap[(a, t)];
            }
            for (q, v) in ofdm::dft(&padded)?.into_iter().enumerate() {
                out[q][(a, t)] = v * scale;
            }
        }
    }
    Ok(out)
}

/// Applies the channel to oversampled transmit signals: path `l` acts at a
/// delay of `l * n0` oversampled samples. Output is truncated to the input
/// length.
pub fn apply_time_domain(ch: &ChannelRealization, tx: &[Vec<Complex64>], n0: usize) -> Result<Vec<Vec<Complex64>>> {
    if tx.len() != ch.n_tx() {
        return Err(Error::Shape(format!(
            "{} transmit signals for a channel with {} transmit chains",
            tx.len(),
            ch.n_tx()
        )));
    }
    let len = tx.first().map_or(0, Vec::len);
    if tx.iter().any(|s| s.len() != len) {
        return Err(Error::Shape("transmit signals differ in length".into()));
    }
    if n0 == 0 {
        return Err(Error::ZeroUpsampling);
    }
    if len % n0 != 0 {
        return Err(Error::NotDivisible { len, n0 });
    }
    let mut out = vec![vec![czero(); len]; ch.n_rx()];
    for (l, tap) in ch.taps.iter().enumerate() {
        let delay = l * n0;
        if delay >= len {
            break;
        }
        for (a, row) in out.iter_mut().enumerate() {
            for (t, sig) in tx.iter().enumerate() {
                let h = tap[(a, t)];
                for (o, s) in row[delay..].iter_mut().zip(sig) {
                    *o += h * s;
                }
            }
        }
    }
    Ok(out)
}

const DUMP_HEADER: &str = "realization,l,a,t,re,im";

/// Writes realizations as CSV records `realization,l,a,t,re,im`.
pub fn write_channel_dump(path: &Path, channels: &[ChannelRealization]) -> Result<()> {
    let mut s = String::from(DUMP_HEADER);
    s.push('\n');
    for (i, ch) in channels.iter().enumerate() {
        for (l, tap) in ch.taps.iter().enumerate() {
            for a in 0..tap.nrows() {
                for t in 0..tap.ncols() {
                    let v = tap[(a, t)];
                    let _ = writeln!(s, "{i},{l},{a},{t},{:.16e},{:.16e}", v.re, v.im);
                }
            }
        }
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub fn read_channel_dump(path: &Path) -> Result<Vec<ChannelRealization>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let perr = |line: usize, msg: &str| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.to_string(),
    };
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 6 {
            return Err(perr(i + 1, "expected 6 fields"));
        }
        let idx = |k: usize| f[k].parse::<usize>().map_err(|_| perr(i + 1, "bad index"));
        let val = |k: usize| f[k].parse::<f64>().map_err(|_| perr(i + 1, "bad number"));
        records.push((idx(0)?, idx(1)?, idx(2)?, idx(3)?, Complex64::new(val(4)?, val(5)?)));
    }
    let n_real = records.iter().map(|r| r.0 + 1).max().unwrap_or(0);
    let mut out = Vec::with_capacity(n_real);
    for r in 0..n_real {
        let mine: Vec<_> = records.iter().filter(|x| x.0 == r).collect();
        let l = mine.iter().map(|x| x.1 + 1).max().unwrap_or(0);
        let nr = mine.iter().map(|x| x.2 + 1).max().unwrap_or(0);
        let nt = mine.iter().map(|x| x.3 + 1).max().unwrap_or(0);
        if mine.len() != l * nr * nt {
            return Err(perr(0, &format!("realization {r} is incomplete")));
        }
        let mut taps = vec![CMat::zeros(nr, nt); l];
        for x in mine {
            taps[x.1][(x.2, x.3)] = x.4;
        }
        out.push(ChannelRealization { taps });
    }
    Ok(out)
}
