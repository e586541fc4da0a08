//! OFDM and multirate primitives.
//!
//! All transforms use the unitary normalization `1/sqrt(n)` in both
//! directions, so Parseval holds without bookkeeping and noise variances are
//! unchanged by the transform.

use std::cell::RefCell;
use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

use crate::error::{Error, Result};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn transform(x: &[Complex64], direction: FftDirection) -> Result<Vec<Complex64>> {
    if x.is_empty() {
        return Err(Error::EmptyInput);
    }
    if x.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    let n = x.len();
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft(n, direction));
    let mut buf = x.to_vec();
    fft.process(&mut buf);
    let scale = 1.0 / (n as f64).sqrt();
    buf.iter_mut().for_each(|v| *v *= scale);
    Ok(buf)
}

/// Unitary forward DFT, `X[q] = n^{-1/2} sum_k x[k] exp(-j 2 pi q k / n)`.
pub fn dft(x: &[Complex64]) -> Result<Vec<Complex64>> {
    transform(x, FftDirection::Forward)
}

/// Unitary inverse DFT (the adjoint of [`dft`]).
pub fn idft(x: &[Complex64]) -> Result<Vec<Complex64>> {
    transform(x, FftDirection::Inverse)
}

/// Prepends the last `cp_len` samples.
pub fn add_cp(x: &[Complex64], cp_len: usize) -> Result<Vec<Complex64>> {
    let n = x.len();
    if cp_len > n {
        return Err(Error::CpLongerThanSymbol { cp_len, n });
    }
    let mut out = Vec::with_capacity(n + cp_len);
    out.extend_from_slice(&x[n - cp_len..]);
    out.extend_from_slice(x);
    Ok(out)
}

/// Drops the first `cp_len` samples and returns the following `n`.
pub fn remove_cp(y: &[Complex64], cp_len: usize, n: usize) -> Result<Vec<Complex64>> {
    if cp_len > n {
        return Err(Error::CpLongerThanSymbol { cp_len, n });
    }
    if y.len() < cp_len + n {
        return Err(Error::Shape(format!(
            "need {} samples to strip a {cp_len}-sample prefix, got {}",
            cp_len + n,
            y.len()
        )));
    }
    Ok(y[cp_len..cp_len + n].to_vec())
}

/// Signed frequency of bin `q` in an `n`-point DFT, in `[-n/2, n/2)`.
///
/// The Nyquist bin of an even-length transform maps to `-n/2`; callers that
/// need the symmetric split treat it separately.
pub fn signed_frequency(q: usize, n: usize) -> i64 {
    let q = q as i64;
    let n = n as i64;
    if 2 * q < n {
        q
    } else {
        q - n
    }
}

/// Response of band-limited interpolation at sub-sample offset `m / n0` for
/// bin `q`: `exp(j 2 pi q' m / (n n0))` with `q'` the signed frequency, and
/// `cos(pi m / n0)` for the Nyquist bin, which is split evenly between
/// `+n/2` and `-n/2`.
pub fn fractional_phase(q: usize, m: usize, n: usize, n0: usize) -> Complex64 {
    if n % 2 == 0 && 2 * q == n {
        return Complex64::new((PI * m as f64 / n0 as f64).cos(), 0.0);
    }
    let f = signed_frequency(q, n) as f64;
    Complex64::from_polar(1.0, 2.0 * PI * f * m as f64 / (n * n0) as f64)
}

/// Ideal band-limited interpolation by an integer factor.
///
/// Returns `n * n0` samples of the periodic signal, band-limited to the
/// original Nyquist band, that passes through `x` at every `n0`-th sample.
pub fn upsample_bandlimited(x: &[Complex64], n0: usize) -> Result<Vec<Complex64>> {
    if n0 == 0 {
        return Err(Error::ZeroUpsampling);
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::Shape(format!("upsampling needs >= 2 samples, got {n}")));
    }
    if n0 == 1 {
        return Ok(x.to_vec());
    }
    let spec = dft(x)?;
    let big = n * n0;
    let mut wide = vec![Complex64::new(0.0, 0.0); big];
    for (q, &v) in spec.iter().enumerate() {
        if n % 2 == 0 && 2 * q == n {
            wide[n / 2] += v * 0.5;
            wide[big - n / 2] += v * 0.5;
        } else {
            let f = signed_frequency(q, n);
            let idx = if f >= 0 { f as usize } else { (big as i64 + f) as usize };
            wide[idx] += v;
        }
    }
    let mut y = idft(&wide)?;
    let gain = (n0 as f64).sqrt();
    y.iter_mut().for_each(|v| *v *= gain);
    Ok(y)
}

/// Splits `y` into `n0` streams; stream `m` holds samples with index
/// `m (mod n0)`.
pub fn polyphase_split(y: &[Complex64], n0: usize) -> Result<Vec<Vec<Complex64>>> {
    if n0 == 0 {
        return Err(Error::ZeroUpsampling);
    }
    if y.len() % n0 != 0 {
        return Err(Error::NotDivisible { len: y.len(), n0 });
    }
    Ok((0..n0)
        .map(|m| y.iter().skip(m).step_by(n0).copied().collect())
        .collect())
}

/// Inverse of [`polyphase_split`].
pub fn interleave(streams: &[Vec<Complex64>]) -> Result<Vec<Complex64>> {
    let Some(first) = streams.first() else {
        return Ok(Vec::new());
    };
    let len = first.len();
    if streams.iter().any(|s| s.len() != len) {
        return Err(Error::Shape("polyphase streams differ in length".into()));
    }
    Ok((0..len)
        .flat_map(|k| streams.iter().map(move |s| s[k]))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn reals(v: &[f64]) -> Vec<Complex64> {
        v.iter().map(|&r| c(r, 0.0)).collect()
    }

    fn max_err(a: &[Complex64], b: &[Complex64]) -> f64 {
        assert_eq!(a.len(), b.len());
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    fn norm(v: &[Complex64]) -> f64 {
        v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Direct O(n^2) evaluation of the unitary DFT.
    fn dft_direct(x: &[Complex64]) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|q| {
                x.iter()
                    .enumerate()
                    .map(|(k, v)| v * Complex64::from_polar(1.0, -2.0 * PI * (q * k) as f64 / n as f64))
                    .sum::<Complex64>()
                    / (n as f64).sqrt()
            })
            .collect()
    }

    fn signal() -> impl Strategy<Value = Vec<Complex64>> {
        prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 2..300)
            .prop_map(|v| v.into_iter().map(|(a, b)| c(a, b)).collect())
    }

    #[test]
    fn impulse_to_constant() {
        let out = dft(&reals(&[1.0, 0.0, 0.0, 0.0])).unwrap();
        assert!(max_err(&out, &reals(&[0.5; 4])) < 1e-15);
    }

    #[test]
    fn constant_to_impulse() {
        let out = idft(&reals(&[1.0; 4])).unwrap();
        assert!(max_err(&out, &reals(&[2.0, 0.0, 0.0, 0.0])) < 1e-15);
    }

    #[test]
    fn empty_and_non_finite_rejected() {
        assert!(matches!(dft(&[]), Err(Error::EmptyInput)));
        assert!(matches!(idft(&[c(f64::NAN, 0.0)]), Err(Error::NonFinite)));
    }

    #[test]
    fn matches_direct_sum_on_odd_and_prime_lengths() {
        for n in [1usize, 3, 7, 12, 61] {
            let x: Vec<_> = (0..n).map(|k| c((k as f64).sin(), (k as f64 * 0.3).cos())).collect();
            assert!(max_err(&dft(&x).unwrap(), &dft_direct(&x)) < 1e-12);
        }
    }

    #[test]
    fn long_transforms_are_unitary() {
        let n = 4096;
        let x: Vec<_> = (0..n).map(|k| c((k as f64 * 0.7).sin(), (k as f64 * 1.3).cos())).collect();
        let back = idft(&dft(&x).unwrap()).unwrap();
        assert!(max_err(&back, &x) / norm(&x) < 1e-12);
        assert!((norm(&dft(&x).unwrap()) - norm(&x)).abs() / norm(&x) < 1e-12);
    }

    #[test]
    fn cyclic_prefix() {
        let x = reals(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(add_cp(&x, 2).unwrap(), reals(&[3.0, 4.0, 1.0, 2.0, 3.0, 4.0]));
        assert_eq!(add_cp(&x, 0).unwrap(), x);
        assert_eq!(remove_cp(&add_cp(&x, 3).unwrap(), 3, 4).unwrap(), x);
        assert!(matches!(add_cp(&x, 5), Err(Error::CpLongerThanSymbol { .. })));
    }

    #[test]
    fn upsample_constant() {
        let y = upsample_bandlimited(&reals(&[1.0; 4]), 2).unwrap();
        assert!(max_err(&y, &reals(&[1.0; 8])) < 1e-14);
    }

    #[test]
    fn upsample_single_exponential() {
        // e^{j 2 pi k / 4} interpolates to e^{j pi j / 4} at half steps.
        let x: Vec<_> = (0..4).map(|k| Complex64::from_polar(1.0, 2.0 * PI * k as f64 / 4.0)).collect();
        let want: Vec<_> = (0..8).map(|j| Complex64::from_polar(1.0, PI * j as f64 / 4.0)).collect();
        assert!(max_err(&upsample_bandlimited(&x, 2).unwrap(), &want) < 1e-14);
    }

    #[test]
    fn upsample_nyquist_is_split() {
        // cos(pi t) sampled at half steps.
        let y = upsample_bandlimited(&reals(&[1.0, -1.0, 1.0, -1.0]), 2).unwrap();
        let want = reals(&[1.0, 0.0, -1.0, 0.0, 1.0, 0.0, -1.0, 0.0]);
        assert!(max_err(&y, &want) < 1e-14);
    }

    #[test]
    fn upsample_rejects_zero_ratio() {
        assert!(matches!(upsample_bandlimited(&reals(&[1.0, 2.0]), 0), Err(Error::ZeroUpsampling)));
    }

    #[test]
    fn fractional_phase_matches_upsampled_tone() {
        // A single tone on bin q, upsampled, sampled at offset m.
        for n in [7usize, 8] {
            for n0 in [1usize, 2, 3, 4] {
                for q in 0..n {
                    let mut spec = vec![c(0.0, 0.0); n];
                    spec[q] = c(1.0, 0.0);
                    let x = idft(&spec).unwrap();
                    let y = upsample_bandlimited(&x, n0).unwrap();
                    for m in 0..n0 {
                        let stream: Vec<_> = y.iter().skip(m).step_by(n0).copied().collect();
                        let got = dft(&stream).unwrap()[q];
                        assert!((got - fractional_phase(q, m, n, n0)).norm() < 1e-12, "n={n} n0={n0} q={q} m={m}");
                    }
                }
            }
        }
    }

    #[test]
    fn polyphase_examples() {
        let y = reals(&[1.0, 2.0, 3.0, 4.0]);
        let s = polyphase_split(&y, 2).unwrap();
        assert_eq!(s, vec![reals(&[1.0, 3.0]), reals(&[2.0, 4.0])]);
        assert_eq!(polyphase_split(&y, 1).unwrap(), vec![y.clone()]);
        assert_eq!(interleave(&s).unwrap(), y);
        assert!(matches!(polyphase_split(&y, 3), Err(Error::NotDivisible { .. })));
    }

    proptest! {
        #[test]
        fn dft_idft_inverse_and_norm_preserving(x in signal()) {
            let fx = dft(&x).unwrap();
            prop_assert!(max_err(&idft(&fx).unwrap(), &x) <= 1e-12 * norm(&x).max(1.0));
            prop_assert!(max_err(&dft(&idft(&x).unwrap()).unwrap(), &x) <= 1e-12 * norm(&x).max(1.0));
            prop_assert!((norm(&fx) - norm(&x)).abs() <= 1e-12 * norm(&x).max(1.0));
        }

        #[test]
        fn idft_is_linear(x in signal(), a in -2.0..2.0f64, b in -2.0..2.0f64) {
            let y: Vec<_> = x.iter().rev().copied().collect();
            let mix: Vec<_> = x.iter().zip(&y).map(|(u, v)| u * a + v * b).collect();
            let lhs = idft(&mix).unwrap();
            let ix = idft(&x).unwrap();
            let iy = idft(&y).unwrap();
            let rhs: Vec<_> = ix.iter().zip(&iy).map(|(u, v)| u * a + v * b).collect();
            prop_assert!(max_err(&lhs, &rhs) < 1e-12);
        }

        #[test]
        fn upsample_keeps_original_samples(x in signal(), n0 in 1usize..5) {
            let y = upsample_bandlimited(&x, n0).unwrap();
            prop_assert_eq!(y.len(), x.len() * n0);
            let kept: Vec<_> = y.iter().step_by(n0).copied().collect();
            prop_assert!(max_err(&kept, &x) <= 1e-12);
        }

        #[test]
        fn upsample_commutes_with_shift(x in signal(), n0 in 1usize..4, shift in 0usize..50) {
            let s = shift % x.len();
            let mut xs = x.clone();
            xs.rotate_right(s);
            let mut y = upsample_bandlimited(&x, n0).unwrap();
            y.rotate_right(s * n0);
            prop_assert!(max_err(&upsample_bandlimited(&xs, n0).unwrap(), &y) <= 1e-12);
        }

        #[test]
        fn upsample_is_linear(x in signal(), a in -2.0..2.0f64) {
            let y: Vec<_> = x.iter().map(|v| v.conj()).collect();
            let mix: Vec<_> = x.iter().zip(&y).map(|(u, v)| u * a + v).collect();
            let ux = upsample_bandlimited(&x, 3).unwrap();
            let uy = upsample_bandlimited(&y, 3).unwrap();
            let want: Vec<_> = ux.iter().zip(&uy).map(|(u, v)| u * a + v).collect();
            prop_assert!(max_err(&upsample_bandlimited(&mix, 3).unwrap(), &want) <= 1e-12);
        }

        #[test]
        fn split_then_interleave_is_identity(x in signal(), n0 in 1usize..6) {
            let len = x.len() - x.len() % n0;
            let y = &x[..len];
            prop_assert_eq!(interleave(&polyphase_split(y, n0).unwrap()).unwrap(), y.to_vec());
        }
    }
}
