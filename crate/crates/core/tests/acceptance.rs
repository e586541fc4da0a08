//! Acceptance criteria. Each test prints one `criterion N: PASS|FAIL` line
//! and fails if the criterion does not hold.

use std::fs;
use std::io::Write;
use std::process::Command;
use std::time::{Duration, Instant};

use num_complex::Complex64;

use pmimo::beamforming::{make_dft_patterns, select_hybrid_combiner};
use pmimo::channel::{apply_time_domain, draw_channel, freq_response, ChannelRealization};
use pmimo::config::{validate, PatternSource, Precoding, SchemeId, SimConfig, ValidatedConfig};
use pmimo::harness::{
    channel_for, oracle_max_error, pattern_schedule, run, Arm, ExperimentPlan, Figure, MetricSeries, Record,
    ValidateGrid,
};
use pmimo::linalg::{singular_values, CMat};
use pmimo::metrics::bler::{qpsk_ber_theory, simulate_awgn_ber};
use pmimo::metrics::{condition_number, empirical_cdf, ks_distance, spectral_efficiency, waterfill};
use pmimo::ofdm::{add_cp, dft, idft, polyphase_split, remove_cp, upsample_bandlimited};
use pmimo::rng::{complex_gaussian, derive_rng};
use pmimo::transceiver::{
    build_effective_channel_fd, build_effective_channel_hybrid, build_effective_channel_pmimo, detect_mmse, detect_zf,
    precoders, LinkPrecoder,
};

fn report(id: u32, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    // Written past the test harness capture so passing criteria show up too.
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "criterion {id} ({name}): {verdict} {detail}");
    let _ = out.flush();
}

fn within(t0: Instant, budget_s: u64) -> bool {
    t0.elapsed() <= Duration::from_secs(budget_s)
}

fn cfg(f: impl FnOnce(&mut SimConfig)) -> ValidatedConfig {
    let mut c = SimConfig::default();
    f(&mut c);
    validate(c).unwrap()
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[test]
fn criterion_1_oracle_equivalence() {
    let t0 = Instant::now();
    let grid = ValidateGrid::default();
    let mut worst = 0.0f64;
    let mut cases = 0;
    let mut skipped = Vec::new();
    for &n in &grid.n {
        for &l in &grid.n_paths {
            if l > n {
                skipped.push(format!("n={n},L={l}"));
                continue;
            }
            for &n0 in &grid.n0 {
                for &nt in &grid.n_tx {
                    let e = oracle_max_error(n, l, n0, nt, 2, grid.schedules, 11).unwrap();
                    worst = worst.max(e);
                    cases += 1;
                }
            }
        }
    }
    let pass = worst < 1e-9 && within(t0, 120);
    report(
        1,
        "oracle equivalence",
        pass,
        &format!(
            "max rel err {worst:.2e} over {cases} grid points x {} schedules; skipped (channel longer than symbol): {}; {:.1}s",
            grid.schedules,
            skipped.join(" "),
            t0.elapsed().as_secs_f64()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_2_rank_law() {
    let t0 = Instant::now();
    let cfg = cfg(|_| {});
    let dims = cfg.dims();
    let dft = make_dft_patterns(1, 2);
    let dup = dft.repeated_first();
    let draws = 10_000u64;
    let (mut zf_ok, mut rank1_ok, mut hybrid_rejects) = (0u64, 0u64, 0u64);
    for i in 0..draws {
        let (_, freq) = channel_for(&cfg, i).unwrap();
        let g = build_effective_channel_pmimo(&freq, &dft, &dims).unwrap();
        let f = precoders(&g, 1.0, LinkPrecoder::Identity, 2).unwrap();
        let y = [c(1.0, 0.0), c(0.0, 1.0)];
        if g.active.iter().all(|&q| detect_zf(&(&g.per_subcarrier[q] * &f[q]), &y, 1.0, 1.0).is_ok()) {
            zf_ok += 1;
        }
        let gd = build_effective_channel_pmimo(&freq, &dup, &dims).unwrap();
        if gd.per_subcarrier.iter().all(|m| {
            let s = singular_values(m);
            s[1] / s[0] < 1e-12
        }) {
            rank1_ok += 1;
        }
        if i < 100 {
            let comb = select_hybrid_combiner(&freq, &dims, &dft, 100.0, Precoding::SvdWaterfilling).unwrap();
            let h = build_effective_channel_hybrid(&freq, &comb, &dims).unwrap();
            if detect_zf(&(&h.per_subcarrier[1] * &f[1]), &y[..1], 1.0, 1.0).is_err() {
                hybrid_rejects += 1;
            }
        }
    }
    let pass = zf_ok == draws && rank1_ok == draws && hybrid_rejects == 100 && within(t0, 60);
    report(
        2,
        "rank and stream-count law",
        pass,
        &format!(
            "2-stream ZF ok {zf_ok}/{draws}; duplicated patterns rank 1 {rank1_ok}/{draws}; hybrid refuses 2 streams {hybrid_rejects}/100; {:.1}s",
            t0.elapsed().as_secs_f64()
        ),
    );
    assert!(pass);
}

fn kappas(s: &MetricSeries) -> Vec<f64> {
    s.records
        .iter()
        .map(|r| match r {
            Record::Kappa { kappa, .. } => *kappa,
            _ => unreachable!(),
        })
        .collect()
}

#[test]
fn criterion_3_condition_number_cdf() {
    let t0 = Instant::now();
    let base = |src| {
        cfg(|c| {
            c.n_realizations = 10_000;
            c.pattern_source = src;
        })
    };
    let dft = base(PatternSource::DftFixed);
    let opt = base(PatternSource::Optimized);
    let arms = vec![
        Arm::new(SchemeId::fd(4, 2), dft.clone()).unwrap(),
        Arm::new(SchemeId::pmimo(4, 1, 2), dft).unwrap(),
        Arm::new(SchemeId::pmimo(4, 1, 2), opt).unwrap(),
    ];
    let series = run(&ExperimentPlan::new(Figure::CondNum, arms, "unused").unwrap()).unwrap();
    let (fd, pd, po) = (kappas(&series[0]), kappas(&series[1]), kappas(&series[2]));
    let ks_dft = ks_distance(&pd, &fd).unwrap();
    let ks_opt = ks_distance(&po, &fd).unwrap();
    let med = |v: &[f64]| {
        let mut s = v.to_vec();
        s.sort_by(f64::total_cmp);
        s[s.len() / 2]
    };
    let pass = ks_dft < 0.02 && ks_opt < 0.1 && within(t0, 300);
    report(
        3,
        "condition-number CDF",
        pass,
        &format!(
            "KS(dft pMIMO, FD) = {ks_dft:.4}, KS(opt pMIMO, FD) = {ks_opt:.4}; median kappa FD {:.3}, opt {:.3}; {:.1}s",
            med(&fd),
            med(&po),
            t0.elapsed().as_secs_f64()
        ),
    );
    assert!(pass);
}

fn se_at(s: &MetricSeries) -> (f64, f64) {
    match s.records[0] {
        Record::Se { se, stderr, .. } => (se, stderr),
        _ => unreachable!(),
    }
}

#[test]
fn criterion_4_spectral_efficiency_at_20db() {
    let t0 = Instant::now();
    let cfg = cfg(|c| {
        c.n_realizations = 2000;
        c.snr_grid_db = vec![20.0];
        c.n_paths = 15;
        c.precoding = Precoding::SvdWaterfilling;
        c.pattern_source = PatternSource::Optimized;
    });
    let series = run(&ExperimentPlan::new(Figure::SeSweep, Arm::all(&cfg), "unused").unwrap()).unwrap();
    let (p, p_se) = se_at(&series[0]);
    let (fd, _) = se_at(&series[1]);
    let (h, h_se) = se_at(&series[2]);
    let ratio = p / h;
    let gap = (p - fd).abs() / fd;
    let checks = [
        (11.5..=14.5).contains(&p),
        (7.5..=10.5).contains(&h),
        (1.30..=1.65).contains(&ratio),
        gap < 0.05,
        within(t0, 600),
    ];
    let pass = checks.iter().all(|&b| b);
    report(
        4,
        "spectral efficiency at 20 dB",
        pass,
        &format!(
            "pMIMO {p:.3} (+-{p_se:.3}) in [11.5,14.5]: {}; hybrid {h:.3} (+-{h_se:.3}) in [7.5,10.5]: {}; ratio {ratio:.3} in [1.30,1.65]: {}; |pMIMO-FD|/FD {gap:.2e} < 5%: {}; {:.1}s",
            checks[0],
            checks[1],
            checks[2],
            checks[3],
            t0.elapsed().as_secs_f64()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_5_ordering_8x4x2() {
    let t0 = Instant::now();
    let cfg = cfg(|c| {
        c.n_tx = 8;
        c.n_rx_chains = 4;
        c.n0 = 2;
        c.n_realizations = 100;
    });
    let dims = cfg.dims();
    let fd_dims = Arm::new(SchemeId::fd(8, 8), cfg.clone()).unwrap().dims();
    let snrs = [0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0];
    let mut lines = Vec::new();
    let mut pass = true;
    for &snr in &snrs {
        let rho = 10f64.powf(snr / 10.0);
        let (mut hy_bad, mut fd_bad, mut worst_excess) = (0, 0, 0.0f64);
        let (mut sh, mut sp, mut sf) = (0.0, 0.0, 0.0);
        for i in 0..cfg.n_realizations as u64 {
            let (_, freq) = channel_for(&cfg, i).unwrap();
            let sched = pattern_schedule(&cfg, &freq, rho, i).unwrap();
            let gp = build_effective_channel_pmimo(&freq, &sched, &dims).unwrap();
            let comb = select_hybrid_combiner(&freq, &dims, &sched, rho, cfg.precoding).unwrap();
            let gh = build_effective_channel_hybrid(&freq, &comb, &dims).unwrap();
            let gf = build_effective_channel_fd(&freq, &fd_dims).unwrap();
            let (p, h, f) = (
                spectral_efficiency(&gp, rho, cfg.precoding),
                spectral_efficiency(&gh, rho, cfg.precoding),
                spectral_efficiency(&gf, rho, cfg.precoding),
            );
            hy_bad += (h > p + 1e-9) as usize;
            fd_bad += (p > f + 1e-9) as usize;
            worst_excess = worst_excess.max(p - f);
            sh += h;
            sp += p;
            sf += f;
        }
        let r = cfg.n_realizations as f64;
        let (mh, mp, mf) = (sh / r, sp / r, sf / r);
        let ok = hy_bad == 0 && fd_bad == 0 && mh <= mp + 1e-9 && mp <= mf + 1e-9;
        pass &= ok;
        lines.push(format!(
            "{snr} dB: means hybrid {mh:.4} pMIMO {mp:.4} FD {mf:.4}, hybrid>pMIMO in {hy_bad}, pMIMO>FD+1e-9 in {fd_bad} (max excess {worst_excess:.2e})"
        ));
    }
    pass &= within(t0, 600);
    report(
        5,
        "SE ordering 8x4x2",
        pass,
        &format!("{}; {:.1}s", lines.join("; "), t0.elapsed().as_secs_f64()),
    );
    assert!(pass);
}

/// Linear interpolation of `ee` as a function of `se` (increasing).
fn ee_at(curve: &[(f64, f64)], se: f64) -> f64 {
    let k = curve.partition_point(|p| p.0 < se).clamp(1, curve.len() - 1);
    let (a, b) = (curve[k - 1], curve[k]);
    a.1 + (b.1 - a.1) * (se - a.0) / (b.0 - a.0)
}

#[test]
fn criterion_6_energy_efficiency() {
    let t0 = Instant::now();
    let cfg = cfg(|c| c.n_realizations = 100);
    let series = run(&ExperimentPlan::new(Figure::EeCurve, Arm::all(&cfg), "unused").unwrap()).unwrap();
    let curves: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|s| {
            s.records
                .iter()
                .map(|r| match r {
                    Record::Ee { se, ee, .. } => (*se, *ee),
                    _ => unreachable!(),
                })
                .collect()
        })
        .collect();
    let mut detail = Vec::new();
    let mut pass = true;
    for (s, c) in series.iter().zip(&curves) {
        let arg = (0..c.len()).max_by(|&a, &b| c[a].1.total_cmp(&c[b].1)).unwrap();
        let interior = arg > 0 && arg + 1 < c.len();
        let monotone_se = c.windows(2).all(|w| w[1].0 > w[0].0);
        pass &= interior && monotone_se;
        detail.push(format!("{} peak at point {arg}/{} (SE {:.2}, EE {:.3e})", s.scheme, c.len() - 1, c[arg].0, c[arg].1));
    }
    let lo = curves.iter().map(|c| c[0].0).fold(f64::NEG_INFINITY, f64::max);
    let hi = curves.iter().map(|c| c[c.len() - 1].0).fold(f64::INFINITY, f64::min);
    let mut probes: Vec<f64> = curves.iter().flatten().map(|p| p.0).filter(|&s| s >= lo && s <= hi).collect();
    probes.sort_by(f64::total_cmp);
    let mut bad = 0;
    for &s in &probes {
        let p = ee_at(&curves[0], s);
        if p < ee_at(&curves[1], s) || p < ee_at(&curves[2], s) {
            bad += 1;
        }
    }
    pass &= bad == 0 && !probes.is_empty() && within(t0, 300);
    report(
        6,
        "energy efficiency",
        pass,
        &format!(
            "{}; pMIMO below another scheme at {bad}/{} SE points in [{lo:.2}, {hi:.2}]; {:.1}s",
            detail.join("; "),
            probes.len(),
            t0.elapsed().as_secs_f64()
        ),
    );
    assert!(pass);
}

/// `a <= b` is not contradicted at 95% confidence.
fn not_worse(a: (u64, u64), b: (u64, u64)) -> bool {
    let (pa, pb) = (a.0 as f64 / a.1 as f64, b.0 as f64 / b.1 as f64);
    let se = (pa * (1.0 - pa) / a.1 as f64 + pb * (1.0 - pb) / b.1 as f64).sqrt();
    pa - pb <= 1.96 * se
}

#[test]
fn criterion_7_bler_ordering() {
    let t0 = Instant::now();
    let cfg = cfg(|c| {
        c.n_tx = 2;
        c.n_rx_chains = 1;
        c.n0 = 2;
        c.n_realizations = 2000;
        c.pattern_source = PatternSource::DftFixed;
        c.snr_grid_db = (0..=8).map(|s| s as f64).collect();
    });
    let series = run(&ExperimentPlan::new(Figure::Bler, Arm::all(&cfg), "unused").unwrap()).unwrap();
    let counts = |s: &MetricSeries| -> Vec<(f64, (u64, u64))> {
        s.records
            .iter()
            .map(|r| match r {
                Record::Bler { snr_db, counts, .. } => (*snr_db, (counts.block_errors, counts.blocks)),
                _ => unreachable!(),
            })
            .collect()
    };
    let (p, fd, h) = (counts(&series[0]), counts(&series[1]), counts(&series[2]));
    let mut pass = true;
    let mut checked = 0;
    let mut lines = Vec::new();
    for i in 0..p.len() {
        let mid = p[i].1 .0 as f64 / p[i].1 .1 as f64;
        let rate = |x: (u64, u64)| x.0 as f64 / x.1 as f64;
        lines.push(format!("{} dB: FD {:.4} pMIMO {:.4} hybrid {:.4}", p[i].0, rate(fd[i].1), mid, rate(h[i].1)));
        if (0.01..=0.9).contains(&mid) {
            checked += 1;
            pass &= not_worse(fd[i].1, p[i].1) && not_worse(p[i].1, h[i].1);
        }
    }
    pass &= checked > 0 && within(t0, 900);
    report(
        7,
        "BLER ordering",
        pass,
        &format!("{}; {checked} SNR points in range; {:.1}s", lines.join("; "), t0.elapsed().as_secs_f64()),
    );
    assert!(pass);
}

#[test]
fn criterion_8_dsp_unit_suite() {
    let t0 = Instant::now();
    let mut fails: Vec<&str> = Vec::new();
    let mut check = |ok: bool, what: &'static str| {
        if !ok {
            fails.push(what);
        }
    };
    let close = |a: &[Complex64], b: &[Complex64], tol: f64| a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).norm() < tol);
    let one = c(1.0, 0.0);
    let z = c(0.0, 0.0);
    let mut rng = derive_rng(8, &[]);
    let rand_vec = |rng: &mut _, n: usize| -> Vec<Complex64> { (0..n).map(|_| complex_gaussian(rng, 1.0)).collect() };

    // ofdm
    check(close(&dft(&[one, z, z, z]).unwrap(), &[c(0.5, 0.0); 4], 1e-15), "dft impulse");
    check(close(&idft(&[one; 4]).unwrap(), &[c(2.0, 0.0), z, z, z], 1e-15), "idft constant");
    let x = rand_vec(&mut rng, 64);
    let nx: f64 = x.iter().map(|v| v.norm_sqr()).sum();
    let nf: f64 = dft(&x).unwrap().iter().map(|v| v.norm_sqr()).sum();
    check((nx - nf).abs() < 1e-12 * nx, "parseval");
    check(close(&dft(&idft(&x).unwrap()).unwrap(), &x, 1e-12), "dft(idft)");
    check(close(&idft(&dft(&x).unwrap()).unwrap(), &x, 1e-12), "idft(dft)");
    let y = rand_vec(&mut rng, 64);
    let (a, b) = (c(0.3, -1.2), c(2.0, 0.5));
    let lin: Vec<Complex64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
    let sep: Vec<Complex64> = idft(&x).unwrap().iter().zip(idft(&y).unwrap()).map(|(p, q)| a * p + b * q).collect();
    check(close(&idft(&lin).unwrap(), &sep, 1e-12), "idft linearity");
    let abcd = [c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0), c(4.0, 0.0)];
    check(add_cp(&abcd, 2).unwrap() == vec![abcd[2], abcd[3], abcd[0], abcd[1], abcd[2], abcd[3]], "add_cp");
    check(remove_cp(&add_cp(&x, 16).unwrap(), 16, 64).unwrap() == x, "cp round trip");
    check(add_cp(&x, 0).unwrap() == x, "add_cp 0");
    check(close(&upsample_bandlimited(&[one; 4], 2).unwrap(), &[one; 8], 1e-14), "upsample constant");
    let tone: Vec<Complex64> = (0..4).map(|k| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / 4.0)).collect();
    let want: Vec<Complex64> = (0..8).map(|j| Complex64::from_polar(1.0, std::f64::consts::PI * j as f64 / 4.0)).collect();
    check(close(&upsample_bandlimited(&tone, 2).unwrap(), &want, 1e-12), "upsample tone");
    let alt = [one, -one, one, -one];
    let want = [one, z, -one, z, one, z, -one, z];
    check(close(&upsample_bandlimited(&alt, 2).unwrap(), &want, 1e-12), "upsample nyquist");
    let split = polyphase_split(&abcd, 2).unwrap();
    check(split == vec![vec![abcd[0], abcd[2]], vec![abcd[1], abcd[3]]], "polyphase split");
    check(polyphase_split(&x, 1).unwrap() == vec![x.clone()], "polyphase identity");

    // channel
    let mut crng = derive_rng(9, &[]);
    let draws = 100_000;
    let mut power = 0.0;
    for _ in 0..draws {
        let ch = draw_channel(&mut crng, 15, 1, 1);
        power += ch.taps.iter().map(|t| t[(0, 0)].norm_sqr()).sum::<f64>();
    }
    let mean = power / draws as f64;
    check((0.99..=1.01).contains(&mean), "unit mean power");
    let mut mags: Vec<f64> = (0..20_000).map(|_| draw_channel(&mut crng, 1, 1, 1).taps[0][(0, 0)].norm()).collect();
    mags.sort_by(f64::total_cmp);
    let m = mags.len() as f64;
    let ks = mags
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let f = 1.0 - (-r * r).exp();
            (f - i as f64 / m).abs().max(((i + 1) as f64 / m - f).abs())
        })
        .fold(0.0, f64::max);
    check(ks < 1.628 / m.sqrt(), "rayleigh ks");
    let c1 = draw_channel(&mut derive_rng(3, &[]), 4, 2, 2);
    check(c1 == draw_channel(&mut derive_rng(3, &[]), 4, 2, 2), "channel determinism");
    let h0 = CMat::from_element(1, 1, c(0.4, -0.3));
    let flat = ChannelRealization { taps: vec![h0.clone()] };
    check(freq_response(&flat, 8).unwrap().iter().all(|h| *h == h0), "flat channel");
    let two = ChannelRealization {
        taps: vec![CMat::from_element(1, 1, c(0.7, 0.1)), CMat::from_element(1, 1, c(-0.2, 0.5))],
    };
    check(
        (freq_response(&two, 4).unwrap()[2][(0, 0)] - (c(0.7, 0.1) - c(-0.2, 0.5))).norm() < 1e-12,
        "two-tap q=2",
    );
    let taps = draw_channel(&mut crng, 5, 2, 3);
    let fr = freq_response(&taps, 16).unwrap();
    let brute_ok = (0..16).all(|q| {
        (0..2).all(|r| {
            (0..3).all(|t| {
                let s: Complex64 = (0..5)
                    .map(|l| taps.taps[l][(r, t)] * Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * (q * l) as f64 / 16.0))
                    .sum();
                (s - fr[q][(r, t)]).norm() < 1e-12
            })
        })
    });
    check(brute_ok, "freq response direct sum");
    let ident = ChannelRealization { taps: vec![CMat::identity(1, 1)] };
    check(apply_time_domain(&ident, &[x.clone()], 2).unwrap()[0] == x, "identity channel");
    let delay = ChannelRealization { taps: vec![CMat::zeros(1, 1), CMat::identity(1, 1)] };
    let out = apply_time_domain(&delay, &[x.clone()], 2).unwrap();
    check(out[0][..2] == [z, z] && out[0][2..] == x[..62], "delay tap");

    // transceiver
    let eye = CMat::identity(2, 2);
    let yy = [c(1.0, 2.0), c(-1.0, 0.5)];
    check(detect_zf(&eye, &yy, 1.0, 1.0).unwrap().symbols == yy.to_vec(), "zf identity");
    check(close(&detect_mmse(&eye, &yy, 0.0, 1.0).unwrap().symbols, &yy, 1e-15), "mmse identity");
    let g = CMat::from_row_slice(2, 2, &[one, z, one, one]);
    check(close(&detect_zf(&g, &[one, c(2.0, 0.0)], 1.0, 1.0).unwrap().symbols, &[one, one], 1e-12), "zf hand solve");
    let gr = CMat::from_fn(3, 2, |_, _| complex_gaussian(&mut rng, 1.0));
    let yr = rand_vec(&mut rng, 3);
    check(
        close(&detect_zf(&gr, &yr, 1.0, 1.0).unwrap().symbols, &detect_mmse(&gr, &yr, 1e-12, 1.0).unwrap().symbols, 1e-6),
        "mmse to zf",
    );
    for (n, l, n0) in [(8, 1, 1), (16, 4, 2), (16, 4, 3), (12, 3, 2)] {
        check(oracle_max_error(n, l, n0, 2, 2, 5, 4).unwrap() < 1e-9, "time oracle");
    }
    let vcfg = cfg(|c| {
        c.n_tx = 4;
        c.n_rx_chains = 2;
    });
    let (_, freq) = channel_for(&vcfg, 0).unwrap();
    let gp = build_effective_channel_pmimo(&freq, &make_dft_patterns(2, 2), &vcfg.dims()).unwrap();
    let sv_ok = gp.active.iter().all(|&q| {
        let a = singular_values(&gp.per_subcarrier[q]);
        let b = singular_values(&freq[q]);
        a.iter().zip(&b).all(|(u, v)| (u - v).abs() < 1e-10)
    });
    check(sv_ok, "unitary patterns keep singular values");

    // metrics
    let gi = pmimo::transceiver::EffectiveChannel::new(SchemeId::fd(2, 2), vec![eye.clone()], 1.0);
    check((spectral_efficiency(&gi, 3.0, Precoding::IsotropicEqualPower) - 2.0 * 2.5f64.log2()).abs() < 1e-12, "se identity");
    check(
        (pmimo::metrics::se_from_modes(&[vec![1.0, 0.0]], 10.0, 2, Precoding::SvdWaterfilling) - 11f64.log2()).abs() < 1e-12,
        "se waterfilling live mode",
    );
    check((waterfill(&[1.0, 0.0], 10.0)[0] - 10.0).abs() < 1e-12, "waterfill");
    let d = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![c(2.0, 0.0), one]));
    check((condition_number(&d).unwrap() - 2.0).abs() < 1e-12, "kappa diag");
    check(condition_number(&CMat::from_element(2, 2, one)).unwrap() == f64::INFINITY, "kappa rank 1");
    check(empirical_cdf(&[1.0, 2.0, 3.0], &[2.0]).unwrap() == vec![2.0 / 3.0], "cdf");
    let mut ber_lines = Vec::new();
    for snr in [0.0, 4.0, 8.0] {
        let cnt = simulate_awgn_ber(snr, 200_000, 100 + snr as u64);
        let p = qpsk_ber_theory(snr);
        let se = (p * (1.0 - p) / cnt.bits as f64).sqrt();
        let ok = (cnt.ber() - p).abs() < 3.0 * se;
        check(ok, "qpsk awgn ber");
        ber_lines.push(format!("{snr} dB BER {:.5} vs {p:.5}", cnt.ber()));
    }
    let pass = fails.is_empty() && within(t0, 120);
    report(
        8,
        "DSP unit suite",
        pass,
        &format!("failed: {:?}; {}; {:.1}s", fails, ber_lines.join(", "), t0.elapsed().as_secs_f64()),
    );
    assert!(pass);
}

#[test]
fn criterion_9_determinism() {
    let t0 = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("small.cfg");
    fs::write(&conf, "n_subcarriers = 32\ncp_len = 7\nn_paths = 8\nsnr_grid_db = 0,10,20\n").unwrap();
    let exe = env!("CARGO_BIN_EXE_pmimo");
    let mut bad = Vec::new();
    for (cmd, reals) in [("condnum", "4"), ("se", "4"), ("ee", "2"), ("bler", "30"), ("validate", "1")] {
        let mut outputs = Vec::new();
        for (tag, workers) in [("a", "1"), ("b", "1"), ("c", "8")] {
            let out = dir.path().join(format!("{cmd}_{tag}"));
            let run = Command::new(exe)
                .args([cmd, "--config"])
                .arg(&conf)
                .arg("--out")
                .arg(&out)
                .args(["--seed", "42", "--realizations", reals, "--workers", workers])
                .output()
                .unwrap();
            assert!(run.status.success(), "{cmd} failed");
            outputs.push(fs::read(out.join(format!("{}.csv", if cmd == "se" { "se" } else { cmd }))).unwrap());
        }
        if outputs[0] != outputs[1] || outputs[0] != outputs[2] {
            bad.push(cmd);
        }
    }
    let pass = bad.is_empty() && within(t0, 120);
    report(
        9,
        "determinism",
        pass,
        &format!("differing outputs: {bad:?}; {:.1}s", t0.elapsed().as_secs_f64()),
    );
    assert!(pass);
}
