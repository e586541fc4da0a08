//! Evaluation quantities: spectral efficiency, condition numbers and their
//! CDFs, the energy-efficiency model, and block error rates.

use crate::config::{Precoding, SchemeId, SchemeKind};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigenvalues, singular_values, CMat};
use crate::transceiver::EffectiveChannel;

pub mod bler;

pub use bler::{simulate_bler, BlerCounts, BlerSettings, CodeRate};

/// Water-filling over parallel channels with gains `gains` (power gain per
/// unit transmit power, noise variance one) under a total power budget.
/// Returns the per-channel powers.
pub fn waterfill(gains: &[f64], total: f64) -> Vec<f64> {
    let mut live: Vec<usize> = (0..gains.len()).filter(|&i| gains[i] > 0.0).collect();
    live.sort_by(|&a, &b| gains[b].total_cmp(&gains[a]).then(a.cmp(&b)));
    let mut powers = vec![0.0; gains.len()];
    if live.is_empty() || total <= 0.0 {
        return powers;
    }
    let mut inv_sum = 0.0;
    let mut level = 0.0;
    let mut used = 0;
    for (k, &i) in live.iter().enumerate() {
        let cand = (total + inv_sum + 1.0 / gains[i]) / (k + 1) as f64;
        if cand <= 1.0 / gains[i] {
            break;
        }
        inv_sum += 1.0 / gains[i];
        level = cand;
        used = k + 1;
    }
    for &i in &live[..used] {
        powers[i] = (level - 1.0 / gains[i]).max(0.0);
    }
    powers
}

/// Per-mode power allocation for the given mode gains (eigenvalues of
/// `G_q G_q^H`, one list per active subcarrier). Mirrors the shape of
/// `modes`.
pub fn mode_powers(modes: &[Vec<f64>], rho: f64, n_tx: usize, precoding: Precoding) -> Vec<Vec<f64>> {
    match precoding {
        Precoding::IsotropicEqualPower => {
            let c = rho / n_tx as f64;
            modes.iter().map(|m| vec![c; m.len()]).collect()
        }
        Precoding::SvdWaterfilling => {
            let flat: Vec<f64> = modes.iter().flatten().copied().collect();
            let p = waterfill(&flat, rho * modes.len() as f64);
            let mut it = p.into_iter();
            modes.iter().map(|m| it.by_ref().take(m.len()).collect()).collect()
        }
    }
}

/// Spectral efficiency (bps/Hz) from per-subcarrier mode gains.
///
/// With isotropic input the modes are all eigenvalues of `G_q G_q^H`, which
/// gives `log2 det(I + rho/N_t G G^H)`; with water-filling the budget
/// `rho * n_active` is spread over every (subcarrier, mode) pair.
pub fn se_from_modes(modes: &[Vec<f64>], rho: f64, n_tx: usize, precoding: Precoding) -> f64 {
    if modes.is_empty() {
        return 0.0;
    }
    let powers = mode_powers(modes, rho, n_tx, precoding);
    let bits: f64 = modes
        .iter()
        .zip(&powers)
        .flat_map(|(m, p)| m.iter().zip(p).map(|(l, p)| (1.0 + p * l).log2()))
        .sum();
    bits / modes.len() as f64
}

/// Eigenvalues of `G G^H` (or of `G^H G`, whichever is smaller; the nonzero
/// spectrum is the same).
pub fn mode_gains(g: &CMat) -> Vec<f64> {
    let m = if g.nrows() <= g.ncols() { g * g.adjoint() } else { g.adjoint() * g };
    hermitian_eigenvalues(&m, true)
}

/// Spectral efficiency of an effective channel at linear transmit SNR `rho`.
pub fn spectral_efficiency(g: &EffectiveChannel, rho: f64, precoding: Precoding) -> f64 {
    let modes: Vec<Vec<f64>> = g.active.iter().map(|&q| mode_gains(&g.per_subcarrier[q])).collect();
    se_from_modes(&modes, rho / g.noise_var, g.n_tx(), precoding)
}

/// `sigma_max / sigma_min` over the `min(rows, cols)` singular values;
/// `f64::INFINITY` when the smallest is numerically zero.
pub fn condition_number(g: &CMat) -> Result<f64> {
    let s = singular_values(g);
    let (Some(&max), Some(&min)) = (s.first(), s.last()) else {
        return Err(Error::ZeroMatrix);
    };
    if max == 0.0 {
        return Err(Error::ZeroMatrix);
    }
    if min < 1e-300 {
        return Ok(f64::INFINITY);
    }
    Ok(max / min)
}

/// Fraction of `values` at or below each grid point.
pub fn empirical_cdf(values: &[f64], grid: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(grid
        .iter()
        .map(|g| sorted.partition_point(|v| v.total_cmp(g).is_le()) as f64 / n)
        .collect())
}

/// Two-sample Kolmogorov distance `sup |F_a - F_b|`.
pub fn ks_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    pooled.sort_by(f64::total_cmp);
    pooled.dedup();
    let fa = empirical_cdf(a, &pooled)?;
    let fb = empirical_cdf(b, &pooled)?;
    Ok(fa.iter().zip(&fb).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
}

/// Static and transmit power model. All powers in watts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerModel {
    pub p_rf_chain: f64,
    pub p_phase_shifter: f64,
    pub p_reconfig_element: f64,
    pub p_fixed: f64,
    /// Power-amplifier efficiency, in (0, 1].
    pub pa_efficiency: f64,
    /// Bandwidth in hertz.
    pub bandwidth: f64,
}

impl Default for PowerModel {
    fn default() -> Self {
        PowerModel {
            p_rf_chain: 0.3,
            p_phase_shifter: 0.04,
            // Same cost as a phase shifter unless configured otherwise.
            p_reconfig_element: 0.04,
            p_fixed: 1.0,
            pa_efficiency: 0.38,
            bandwidth: 20e6,
        }
    }
}

impl PowerModel {
    pub fn is_valid(&self) -> bool {
        [self.p_rf_chain, self.p_phase_shifter, self.p_reconfig_element, self.p_fixed, self.bandwidth]
            .iter()
            .all(|v| v.is_finite() && *v >= 0.0)
            && self.pa_efficiency > 0.0
            && self.pa_efficiency <= 1.0
    }

    /// Hardware power that does not scale with transmit power.
    pub fn static_power(&self, scheme: &SchemeId) -> f64 {
        let elements = scheme.n_rx_elements() as f64;
        let tx = scheme.n_tx as f64;
        match scheme.kind {
            SchemeKind::FdMimo => (tx + elements) * self.p_rf_chain + self.p_fixed,
            SchemeKind::HybridMimo => {
                (tx + scheme.n_rx_chains as f64) * self.p_rf_chain + elements * self.p_phase_shifter + self.p_fixed
            }
            SchemeKind::Pmimo => {
                (tx + scheme.n_rx_chains as f64) * self.p_rf_chain + elements * self.p_reconfig_element + self.p_fixed
            }
        }
    }

    pub fn describe(&self) -> String {
        format!(
            "p_rf_chain = {:?}\np_phase_shifter = {:?}\np_reconfig_element = {:?}\np_fixed = {:?}\npa_efficiency = {:?}\nbandwidth = {:?}\n",
            self.p_rf_chain, self.p_phase_shifter, self.p_reconfig_element, self.p_fixed, self.pa_efficiency, self.bandwidth
        )
    }
}

/// Energy efficiency in bits per joule: `B se / (p_tx / eta + P_static)`.
pub fn energy_efficiency(se: f64, p_tx: f64, scheme: &SchemeId, pm: &PowerModel) -> f64 {
    pm.bandwidth * se / (p_tx / pm.pa_efficiency + pm.static_power(scheme))
}
