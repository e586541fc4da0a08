//! Rate-1/2 convolutional code (constraint length 7, generators 133 and 171
//! octal) with a soft-decision Viterbi decoder, and Gray-mapped QPSK.
//!
//! LLRs are positive for bit 0.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;

pub const CONSTRAINT_LEN: usize = 7;
pub const TAIL_BITS: usize = CONSTRAINT_LEN - 1;
const GENERATORS: [u32; 2] = [0o133, 0o171];
const N_STATES: usize = 1 << TAIL_BITS;

fn parity(x: u32) -> u8 {
    (x.count_ones() & 1) as u8
}

/// Output pair for input `bit` when the shift register holds `state`
/// (most recent bit in the high position).
fn branch(state: usize, bit: u8) -> [u8; 2] {
    let reg = ((bit as u32) << TAIL_BITS) | state as u32;
    [parity(reg & GENERATORS[0]), parity(reg & GENERATORS[1])]
}

fn next_state(state: usize, bit: u8) -> usize {
    ((bit as usize) << (TAIL_BITS - 1)) | (state >> 1)
}

/// Encodes `bits` followed by six zero tail bits. Output length is
/// `2 * (bits.len() + 6)`.
pub fn conv_encode(bits: &[u8]) -> Vec<u8> {
    let mut state = 0;
    let mut out = Vec::with_capacity(2 * (bits.len() + TAIL_BITS));
    for &b in bits.iter().chain(std::iter::repeat(&0).take(TAIL_BITS)) {
        out.extend_from_slice(&branch(state, b & 1));
        state = next_state(state, b & 1);
    }
    out
}

/// Maximum-likelihood decoding of a zero-tailed codeword from per-bit LLRs.
/// Returns the information bits (tail stripped).
pub fn viterbi_decode(llr: &[f64]) -> Vec<u8> {
    let steps = llr.len() / 2;
    if steps < TAIL_BITS {
        return Vec::new();
    }
    let mut metric = vec![f64::NEG_INFINITY; N_STATES];
    metric[0] = 0.0;
    let mut back: Vec<[u8; N_STATES]> = Vec::with_capacity(steps);
    let mut prev_state: Vec<[u8; N_STATES]> = Vec::with_capacity(steps);
    for t in 0..steps {
        let (l0, l1) = (llr[2 * t], llr[2 * t + 1]);
        let mut next = vec![f64::NEG_INFINITY; N_STATES];
        let mut bits = [0u8; N_STATES];
        let mut from = [0u8; N_STATES];
        let forced_zero = t >= steps - TAIL_BITS;
        for s in 0..N_STATES {
            if metric[s] == f64::NEG_INFINITY {
                continue;
            }
            for b in 0..=1u8 {
                if forced_zero && b == 1 {
                    continue;
                }
                let c = branch(s, b);
                let gain = 0.5 * ((1.0 - 2.0 * c[0] as f64) * l0 + (1.0 - 2.0 * c[1] as f64) * l1);
                let ns = next_state(s, b);
                let m = metric[s] + gain;
                if m > next[ns] {
                    next[ns] = m;
                    bits[ns] = b;
                    from[ns] = s as u8;
                }
            }
        }
        metric = next;
        back.push(bits);
        prev_state.push(from);
    }
    let mut state = 0usize;
    let mut out = vec![0u8; steps];
    for t in (0..steps).rev() {
        out[t] = back[t][state];
        state = prev_state[t][state] as usize;
    }
    out.truncate(steps - TAIL_BITS);
    out
}

/// Gray QPSK: bit pair `(b0, b1)` goes to `((1 - 2 b0) + j (1 - 2 b1)) / sqrt 2`.
pub fn qpsk_map(bits: &[u8]) -> Vec<Complex64> {
    bits.chunks(2)
        .map(|p| {
            let b1 = p.get(1).copied().unwrap_or(0);
            Complex64::new(
                (1.0 - 2.0 * (p[0] & 1) as f64) * FRAC_1_SQRT_2,
                (1.0 - 2.0 * (b1 & 1) as f64) * FRAC_1_SQRT_2,
            )
        })
        .collect()
}

pub fn qpsk_hard(symbols: &[Complex64]) -> Vec<u8> {
    symbols
        .iter()
        .flat_map(|s| [(s.re < 0.0) as u8, (s.im < 0.0) as u8])
        .collect()
}

/// Bit LLRs for an observation `z = x + e` with complex noise variance `nu`.
pub fn qpsk_llr(z: Complex64, nu: f64) -> [f64; 2] {
    let k = 2.0 * std::f64::consts::SQRT_2 / nu.max(1e-12);
    [(k * z.re).clamp(-1e6, 1e6), (k * z.im).clamp(-1e6, 1e6)]
}

/// LLRs for a biased MMSE estimate `x_hat = mu x + e` with unit-power
/// symbols, where `e` has variance `mu (1 - mu)`.
pub fn qpsk_llr_mmse(x_hat: Complex64, mu: f64) -> [f64; 2] {
    // Unbiased: z = x_hat / mu, nu = (1 - mu) / mu; the mu cancels.
    qpsk_llr(x_hat, 1.0 - mu)
}
