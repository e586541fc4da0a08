//! Link-level Monte Carlo simulation of pseudo-MIMO OFDM receivers.
//!
//! A pMIMO receiver has `n_rx_chains` RF chains, each behind `n0` antenna
//! elements. Every chain switches its combining pattern `n0` times per
//! sample period and samples `n0` times faster, so after polyphase
//! splitting it delivers `n0` virtual streams. The crate builds the
//! resulting per-subcarrier channels, designs the switching patterns, and
//! compares pMIMO with fully digital and hybrid receivers on condition
//! number, spectral efficiency, energy efficiency and block error rate.
//!
//! ```
//! use pmimo::beamforming::make_dft_patterns;
//! use pmimo::channel::{draw_realization, freq_response};
//! use pmimo::config::{validate, Precoding, SimConfig};
//! use pmimo::metrics::spectral_efficiency;
//! use pmimo::rng::derive_rng;
//! use pmimo::transceiver::{build_effective_channel_fd, build_effective_channel_pmimo};
//!
//! let cfg = validate(SimConfig::default()).unwrap();
//! let ch = draw_realization(&mut derive_rng(cfg.master_seed, &[1]), &cfg);
//! let freq = freq_response(&ch, cfg.n_subcarriers).unwrap();
//!
//! let sched = make_dft_patterns(cfg.n_rx_chains, cfg.n0);
//! let p = build_effective_channel_pmimo(&freq, &sched, &cfg.dims()).unwrap();
//! let fd = build_effective_channel_fd(&freq, &cfg.dims()).unwrap();
//!
//! let rho = 100.0;
//! let a = spectral_efficiency(&p, rho, Precoding::SvdWaterfilling);
//! let b = spectral_efficiency(&fd, rho, Precoding::SvdWaterfilling);
//! assert!((a - b).abs() < 1e-9);
//! ```

pub mod beamforming;
pub mod channel;
pub mod coding;
pub mod config;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod ofdm;
pub mod rng;
pub mod transceiver;

pub use config::{validate, SchemeId, SchemeKind, SimConfig, ValidatedConfig};
pub use error::{ConfigError, Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/ofdm.md")]
    mod ofdm {}
    #[doc = include_str!("../../../book/src/channel.md")]
    mod channel {}
    #[doc = include_str!("../../../book/src/effective-channel.md")]
    mod effective_channel {}
    #[doc = include_str!("../../../book/src/patterns.md")]
    mod patterns {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
