//! Receive pattern schedules: construction, constraint projection, and the
//! optimizer that tunes them to a channel realization.
//!
//! A schedule holds, for every receive chain `r` and sub-sample phase `m`, a
//! combiner `w[r][m]` over the chain's `n0` elements. Combiners are
//! frequency-flat and have unit norm, so each virtual stream sees noise of
//! variance σ².

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::config::{Dims, PatternSource, Precoding};
use crate::error::{Error, Result};
use crate::linalg::{czero, hermitian_eigen, hermitian_eigenvalues, CMat};
use crate::metrics::{mode_powers, se_from_modes};

const NORM_TOL: f64 = 1e-12;

/// Feasible set for combiner vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constraint {
    /// Any complex vector of unit norm.
    UnitNorm,
    /// Phase-only weights of magnitude `1/sqrt(n0)`.
    UnitModulusPhase,
    /// Phase-only weights with phases on the `2^bits` grid `2 pi k / 2^bits`.
    QuantizedPhase(u32),
}

impl Constraint {
    /// Constraint implied by a configured pattern source.
    pub fn for_source(source: PatternSource) -> Constraint {
        match source {
            PatternSource::QuantizedOptimized(b) => Constraint::QuantizedPhase(b),
            _ => Constraint::UnitModulusPhase,
        }
    }

    fn tag(&self) -> String {
        match self {
            Constraint::UnitNorm => "unit_norm".into(),
            Constraint::UnitModulusPhase => "unit_modulus".into(),
            Constraint::QuantizedPhase(b) => format!("quant:{b}"),
        }
    }

    fn from_tag(s: &str) -> Option<Constraint> {
        match s {
            "unit_norm" => Some(Constraint::UnitNorm),
            "unit_modulus" => Some(Constraint::UnitModulusPhase),
            _ => s.strip_prefix("quant:")?.parse().ok().map(Constraint::QuantizedPhase),
        }
    }
}

fn quantized_entry(k: u64, bits: u32, n0: usize) -> Complex64 {
    let levels = 1u64 << bits;
    Complex64::from_polar(1.0 / (n0 as f64).sqrt(), 2.0 * PI * (k % levels) as f64 / levels as f64)
}

fn nearest_level(z: Complex64, bits: u32) -> u64 {
    let levels = 1u64 << bits;
    let turns = z.arg().rem_euclid(2.0 * PI) / (2.0 * PI);
    ((turns * levels as f64).round() as u64) % levels
}

/// Projects one combiner onto the constraint set.
pub fn project_vector(w: &mut [Complex64], constraint: Constraint) {
    let n0 = w.len();
    match constraint {
        Constraint::UnitNorm => {
            let norm = w.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            if norm > 0.0 {
                w.iter_mut().for_each(|v| *v /= norm);
            } else {
                w.iter_mut().for_each(|v| *v = Complex64::new(1.0 / (n0 as f64).sqrt(), 0.0));
            }
        }
        Constraint::UnitModulusPhase => {
            let mag = 1.0 / (n0 as f64).sqrt();
            // A zero entry has no phase; it maps to phase 0.
            w.iter_mut().for_each(|v| *v = Complex64::from_polar(mag, if v.norm() > 0.0 { v.arg() } else { 0.0 }));
        }
        Constraint::QuantizedPhase(b) => {
            w.iter_mut().for_each(|v| *v = quantized_entry(nearest_level(*v, b), b, n0));
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatternSchedule {
    n_rx_chains: usize,
    n0: usize,
    /// Flattened `[r][m][element]`.
    weights: Vec<Complex64>,
    constraint: Constraint,
}

impl PatternSchedule {
    pub fn from_fn(
        n_rx_chains: usize,
        n0: usize,
        constraint: Constraint,
        mut f: impl FnMut(usize, usize, usize) -> Complex64,
    ) -> Self {
        let mut weights = Vec::with_capacity(n_rx_chains * n0 * n0);
        for r in 0..n_rx_chains {
            for m in 0..n0 {
                for e in 0..n0 {
                    weights.push(f(r, m, e));
                }
            }
        }
        PatternSchedule {
            n_rx_chains,
            n0,
            weights,
            constraint,
        }
    }

    pub fn n_rx_chains(&self) -> usize {
        self.n_rx_chains
    }

    pub fn n0(&self) -> usize {
        self.n0
    }

    pub fn constraint(&self) -> Constraint {
        self.constraint
    }

    /// Combiner of chain `r` at sub-sample phase `m`.
    pub fn w(&self, r: usize, m: usize) -> &[Complex64] {
        let start = (r * self.n0 + m) * self.n0;
        &self.weights[start..start + self.n0]
    }

    fn w_mut(&mut self, r: usize, m: usize) -> &mut [Complex64] {
        let start = (r * self.n0 + m) * self.n0;
        &mut self.weights[start..start + self.n0]
    }

    /// Schedule where every phase of a chain reuses that chain's phase-0
    /// combiner. Such a chain contributes a rank-one block.
    pub fn repeated_first(&self) -> Self {
        let mut out = self.clone();
        for r in 0..self.n_rx_chains {
            let first = self.w(r, 0).to_vec();
            for m in 1..self.n0 {
                out.w_mut(r, m).copy_from_slice(&first);
            }
        }
        out
    }

    /// Projects every combiner onto `constraint` and retags the schedule.
    pub fn projected(&self, constraint: Constraint) -> Self {
        let mut out = self.clone();
        out.constraint = constraint;
        for r in 0..self.n_rx_chains {
            for m in 0..self.n0 {
                project_vector(out.w_mut(r, m), constraint);
            }
        }
        out
    }

    /// Whether every combiner satisfies the tagged constraint.
    pub fn is_feasible(&self) -> bool {
        let mag = 1.0 / (self.n0 as f64).sqrt();
        self.weights.chunks(self.n0).all(|w| {
            let norm = w.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > NORM_TOL {
                return false;
            }
            match self.constraint {
                Constraint::UnitNorm => true,
                Constraint::UnitModulusPhase => w.iter().all(|v| (v.norm() - mag).abs() <= NORM_TOL),
                Constraint::QuantizedPhase(b) => {
                    w.iter().all(|v| *v == quantized_entry(nearest_level(*v, b), b, self.n0))
                }
            }
        })
    }

    /// `n0 x n0` matrix whose columns are chain `r`'s combiners.
    pub fn chain_matrix(&self, r: usize) -> CMat {
        CMat::from_fn(self.n0, self.n0, |e, m| self.w(r, m)[e])
    }

    fn columns(&self) -> Vec<(usize, &[Complex64])> {
        (0..self.n_rx_chains)
            .flat_map(|r| (0..self.n0).map(move |m| (r, m)))
            .map(|(r, m)| (r, self.w(r, m)))
            .collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut s = format!("# constraint = {}\nr,m,element,re,im\n", self.constraint.tag());
        for r in 0..self.n_rx_chains {
            for m in 0..self.n0 {
                for (e, v) in self.w(r, m).iter().enumerate() {
                    let _ = writeln!(s, "{r},{m},{e},{:.16e},{:.16e}", v.re, v.im);
                }
            }
        }
        std::fs::write(path, s).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let perr = |line: usize, msg: &str| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg: msg.into(),
        };
        let mut constraint = Constraint::UnitNorm;
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if let Some(c) = line.strip_prefix('#') {
                if let Some((k, v)) = c.split_once('=') {
                    if k.trim() == "constraint" {
                        constraint = Constraint::from_tag(v.trim()).ok_or_else(|| perr(i + 1, "unknown constraint"))?;
                    }
                }
                continue;
            }
            if line.is_empty() || line.starts_with("r,") {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(perr(i + 1, "expected 5 fields"));
            }
            let ix = |k: usize| f[k].parse::<usize>().map_err(|_| perr(i + 1, "bad index"));
            let val = |k: usize| f[k].parse::<f64>().map_err(|_| perr(i + 1, "bad number"));
            rows.push((ix(0)?, ix(1)?, ix(2)?, Complex64::new(val(3)?, val(4)?)));
        }
        let n_rx_chains = rows.iter().map(|r| r.0 + 1).max().unwrap_or(0);
        let n0 = rows.iter().map(|r| r.1 + 1).max().unwrap_or(0);
        if rows.len() != n_rx_chains * n0 * n0 || rows.iter().any(|r| r.2 >= n0) {
            return Err(perr(0, "schedule is incomplete"));
        }
        let mut out = PatternSchedule::from_fn(n_rx_chains, n0, constraint, |_, _, _| czero());
        for (r, m, e, v) in rows {
            out.w_mut(r, m)[e] = v;
        }
        Ok(out)
    }
}

/// Columns of the unitary `n0`-point DFT matrix, for every chain.
pub fn make_dft_patterns(n_rx_chains: usize, n0: usize) -> PatternSchedule {
    let scale = 1.0 / (n0 as f64).sqrt();
    PatternSchedule::from_fn(n_rx_chains, n0, Constraint::UnitModulusPhase, |_, m, e| {
        Complex64::from_polar(scale, -2.0 * PI * ((m * e) % n0) as f64 / n0 as f64)
    })
}

pub fn make_random_patterns<R: Rng + ?Sized>(
    rng: &mut R,
    n_rx_chains: usize,
    n0: usize,
    constraint: Constraint,
) -> PatternSchedule {
    let raw = PatternSchedule::from_fn(n_rx_chains, n0, constraint, |_, _, _| match constraint {
        Constraint::UnitNorm => Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)),
        Constraint::UnitModulusPhase => Complex64::from_polar(1.0, rng.gen_range(0.0..2.0 * PI)),
        Constraint::QuantizedPhase(b) => quantized_entry(rng.gen_range(0..1u64 << b), b, n0),
    });
    raw.projected(constraint)
}

/// Spectral efficiency of a set of frequency-flat combiners as a function of
/// the combiner weights, with its gradient.
///
/// Only `A_q = H_q H_q^H` enters: the effective channel of combiners `W`
/// (block-diagonal over chains) satisfies `G_q G_q^H = Phi_q W^H A_q W Phi_q^H`
/// with `Phi_q` diagonal-unitary on the data subcarriers.
pub struct PatternObjective {
    grams: Vec<CMat>,
    n0: usize,
    n_tx: usize,
    rho: f64,
    precoding: Precoding,
}

impl PatternObjective {
    /// `freq` holds the `N_r^A x N_t` responses of every subcarrier; only the
    /// active ones are used.
    pub fn new(freq: &[CMat], dims: &Dims, rho: f64, precoding: Precoding) -> Self {
        let grams = dims.active_subcarriers().iter().map(|&q| &freq[q] * freq[q].adjoint()).collect();
        PatternObjective {
            grams,
            n0: dims.n0,
            n_tx: dims.n_tx,
            rho,
            precoding,
        }
    }

    fn block_products(&self, a: &CMat, cols: &[(usize, &[Complex64])]) -> (CMat, CMat) {
        let n0 = self.n0;
        let nr = a.nrows();
        let k = cols.len();
        let mut aw = CMat::zeros(nr, k);
        for (j, (r, w)) in cols.iter().enumerate() {
            for row in 0..nr {
                let mut acc = czero();
                for (e, we) in w.iter().enumerate() {
                    acc += a[(row, r * n0 + e)] * we;
                }
                aw[(row, j)] = acc;
            }
        }
        let mut b = CMat::zeros(k, k);
        for (i, (r, w)) in cols.iter().enumerate() {
            for j in 0..k {
                let mut acc = czero();
                for (e, we) in w.iter().enumerate() {
                    acc += we.conj() * aw[(r * n0 + e, j)];
                }
                b[(i, j)] = acc;
            }
        }
        (aw, b)
    }

    fn modes(&self, cols: &[(usize, &[Complex64])]) -> Vec<(Vec<f64>, CMat, CMat)> {
        self.grams
            .iter()
            .map(|a| {
                let (aw, b) = self.block_products(a, cols);
                let (vals, vecs) = hermitian_eigen(&b, true);
                (vals, vecs, aw)
            })
            .collect()
    }

    fn value_of(&self, cols: &[(usize, &[Complex64])]) -> f64 {
        let modes: Vec<Vec<f64>> = self
            .grams
            .iter()
            .map(|a| hermitian_eigenvalues(&self.block_products(a, cols).1, true))
            .collect();
        se_from_modes(&modes, self.rho, self.n_tx, self.precoding)
    }

    /// Value and real gradient (packed as `d/d re + j d/d im`) for the
    /// given combiner columns.
    fn value_grad_of(&self, cols: &[(usize, &[Complex64])]) -> (f64, Vec<Vec<Complex64>>) {
        let per_q = self.modes(cols);
        let lams: Vec<Vec<f64>> = per_q.iter().map(|(l, _, _)| l.clone()).collect();
        let value = se_from_modes(&lams, self.rho, self.n_tx, self.precoding);
        let powers = mode_powers(&lams, self.rho, self.n_tx, self.precoding);
        let scale = 2.0 / (lams.len() as f64 * std::f64::consts::LN_2);
        let mut grad: Vec<Vec<Complex64>> = cols.iter().map(|(_, w)| vec![czero(); w.len()]).collect();
        for ((lam, vecs, aw), p) in per_q.iter().zip(&powers) {
            // d/dB sum_i log(1 + p_i lambda_i) = U diag(p / (1 + p lambda)) U^H
            let weights: Vec<Complex64> = lam
                .iter()
                .zip(p)
                .map(|(l, p)| Complex64::new(p / (1.0 + p * l), 0.0))
                .collect();
            let mut d = vecs.clone();
            for (c, wgt) in weights.iter().enumerate() {
                d.column_mut(c).scale_mut(wgt.re);
            }
            let d = d * vecs.adjoint();
            for (i, (r, w)) in cols.iter().enumerate() {
                for e in 0..w.len() {
                    let row = r * self.n0 + e;
                    let mut acc = czero();
                    for j in 0..cols.len() {
                        acc += aw[(row, j)] * d[(j, i)];
                    }
                    grad[i][e] += acc * scale;
                }
            }
        }
        (value, grad)
    }

    pub fn value(&self, sched: &PatternSchedule) -> f64 {
        self.value_of(&sched.columns())
    }

    pub fn value_and_grad(&self, sched: &PatternSchedule) -> (f64, PatternSchedule) {
        let (v, g) = self.value_grad_of(&sched.columns());
        let flat: Vec<Complex64> = g.into_iter().flatten().collect();
        let mut out = sched.clone();
        out.weights = flat;
        (v, out)
    }

    /// Spectral efficiency of a hybrid receiver using one fixed combiner per
    /// chain.
    pub fn hybrid_value(&self, combiners: &HybridCombiners) -> f64 {
        let cols: Vec<(usize, &[Complex64])> =
            combiners.weights.iter().enumerate().map(|(r, w)| (r, w.as_slice())).collect();
        self.value_of(&cols)
    }
}

#[derive(Debug, Clone)]
pub struct OptimizeOptions {
    /// Linear transmit SNR the objective is evaluated at.
    pub rho: f64,
    pub precoding: Precoding,
    pub constraint: Constraint,
    /// Random starting points in addition to the given init and the DFT
    /// schedule.
    pub restarts: usize,
    pub max_iters: usize,
    pub rel_tol: f64,
}

impl OptimizeOptions {
    pub fn new(rho: f64, precoding: Precoding, constraint: Constraint) -> Self {
        OptimizeOptions {
            rho,
            precoding,
            constraint,
            restarts: 2,
            max_iters: 500,
            rel_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimizeOutcome {
    pub schedule: PatternSchedule,
    pub objective: f64,
    /// Objective after each accepted step of the winning start.
    pub trace: Vec<f64>,
    /// Objective of the caller's init.
    pub init_objective: f64,
}

/// Per-chain combination count up to which quantized schedules are searched
/// exhaustively.
const EXHAUSTIVE_LIMIT: u64 = 4096;

fn exhaustive_count(n0: usize, bits: u32) -> Option<u64> {
    // A combiner's global phase does not change the objective, so the first
    // element's phase is pinned to zero.
    let per_vector = 1u64.checked_shl(bits * (n0 as u32 - 1))?;
    per_vector.checked_pow(n0 as u32).filter(|&c| c <= EXHAUSTIVE_LIMIT)
}

fn axpy_projected(w: &PatternSchedule, dir: &PatternSchedule, t: f64, c: Constraint) -> PatternSchedule {
    let mut out = w.clone();
    for (o, d) in out.weights.iter_mut().zip(&dir.weights) {
        *o += d * t;
    }
    out.projected(c)
}

fn ascend(obj: &PatternObjective, start: PatternSchedule, opts: &OptimizeOptions) -> (PatternSchedule, f64, Vec<f64>) {
    let c = opts.constraint;
    let mut w = start;
    let mut f = obj.value(&w);
    let mut trace = vec![f];
    let mut step = 0.25;
    for _ in 0..opts.max_iters {
        let (_, g) = obj.value_and_grad(&w);
        let gnorm = g.weights.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if gnorm == 0.0 || !gnorm.is_finite() {
            break;
        }
        let mut t = step;
        let mut accepted = None;
        while t > 1e-9 {
            let cand = axpy_projected(&w, &g, t / gnorm, c);
            let fc = obj.value(&cand);
            if fc > f {
                accepted = Some((cand, fc));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, fc)) = accepted else { break };
        let gain = fc - f;
        w = cand;
        f = fc;
        trace.push(f);
        step = (t * 2.0).min(1.0);
        if gain < opts.rel_tol * f.abs() {
            break;
        }
    }
    if let Constraint::QuantizedPhase(b) = c {
        polish_quantized(obj, &mut w, &mut f, &mut trace, b);
    }
    (w, f, trace)
}

/// Entry-wise exhaustive phase search; repeats until no single entry change
/// improves the objective.
fn polish_quantized(obj: &PatternObjective, w: &mut PatternSchedule, f: &mut f64, trace: &mut Vec<f64>, bits: u32) {
    let n0 = w.n0;
    for _ in 0..50 {
        let mut improved = false;
        for idx in 0..w.weights.len() {
            let original = w.weights[idx];
            let mut best = (*f, original);
            for k in 0..1u64 << bits {
                let v = quantized_entry(k, bits, n0);
                if v == original {
                    continue;
                }
                w.weights[idx] = v;
                let fv = obj.value(w);
                if fv > best.0 {
                    best = (fv, v);
                }
            }
            w.weights[idx] = best.1;
            if best.0 > *f {
                *f = best.0;
                trace.push(*f);
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }
}

/// Chain-by-chain exhaustive search over quantized combiners, repeated until
/// no chain changes. With one chain this is a global search.
fn exhaustive_quantized(obj: &PatternObjective, init: &PatternSchedule, bits: u32) -> (PatternSchedule, f64, Vec<f64>) {
    let n0 = init.n0;
    let per_vector = 1u64 << (bits * (n0 as u32 - 1));
    let combos = per_vector.pow(n0 as u32);
    let mut w = init.clone();
    let mut f = obj.value(&w);
    let mut trace = vec![f];
    for _ in 0..20 {
        let mut changed = false;
        for r in 0..w.n_rx_chains {
            let mut best: Option<(f64, PatternSchedule)> = None;
            let mut cand = w.clone();
            for code in 0..combos {
                let mut rest = code;
                for m in 0..n0 {
                    let mut v = rest % per_vector;
                    rest /= per_vector;
                    let wv = cand.w_mut(r, m);
                    wv[0] = quantized_entry(0, bits, n0);
                    for slot in wv.iter_mut().skip(1) {
                        *slot = quantized_entry(v % (1 << bits), bits, n0);
                        v >>= bits;
                    }
                }
                let fc = obj.value(&cand);
                if best.as_ref().map_or(true, |(bf, _)| fc > *bf) {
                    best = Some((fc, cand.clone()));
                }
            }
            if let Some((bf, bw)) = best {
                if bf > f {
                    f = bf;
                    w = bw;
                    trace.push(f);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    (w, f, trace)
}

/// Tunes a schedule to one channel realization.
///
/// Projected gradient ascent on spectral efficiency, started from `init`,
/// the DFT schedule, and `opts.restarts` random schedules; the best result
/// wins. Quantized schedules small enough are searched exhaustively instead.
pub fn optimize_patterns<R: Rng + ?Sized>(
    freq: &[CMat],
    dims: &Dims,
    init: &PatternSchedule,
    opts: &OptimizeOptions,
    rng: &mut R,
) -> Result<OptimizeOutcome> {
    if init.constraint != opts.constraint {
        return Err(Error::ConstraintMismatch {
            expected: opts.constraint,
            found: init.constraint,
        });
    }
    if init.n_rx_chains != dims.n_rx_chains || init.n0 != dims.n0 {
        return Err(Error::Shape(format!(
            "schedule is {}x{}, config needs {}x{}",
            init.n_rx_chains, init.n0, dims.n_rx_chains, dims.n0
        )));
    }
    let obj = PatternObjective::new(freq, dims, opts.rho, opts.precoding);
    let init_objective = obj.value(init);

    if let Constraint::QuantizedPhase(b) = opts.constraint {
        if exhaustive_count(dims.n0, b).is_some() {
            let (w, f, mut trace) = exhaustive_quantized(&obj, init, b);
            trace.insert(0, init_objective);
            trace.dedup();
            return Ok(OptimizeOutcome {
                schedule: w,
                objective: f,
                trace,
                init_objective,
            });
        }
    }

    let mut starts = vec![init.clone(), make_dft_patterns(dims.n_rx_chains, dims.n0).projected(opts.constraint)];
    for _ in 0..opts.restarts {
        starts.push(make_random_patterns(rng, dims.n_rx_chains, dims.n0, opts.constraint));
    }
    let mut best: Option<(PatternSchedule, f64, Vec<f64>)> = None;
    for s in starts {
        let run = ascend(&obj, s, opts);
        if best.as_ref().map_or(true, |b| run.1 > b.1) {
            best = Some(run);
        }
    }
    let (schedule, objective, trace) = best.expect("at least one start");
    Ok(OptimizeOutcome {
        schedule,
        objective,
        trace,
        init_objective,
    })
}

/// One fixed combiner per receive chain.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridCombiners {
    pub weights: Vec<Vec<Complex64>>,
    /// Which candidate phase each chain uses.
    pub chosen: Vec<usize>,
}

/// Picks, per chain, the candidate combiner that maximizes the hybrid link's
/// spectral efficiency. Ties go to the lowest index (lexicographically over
/// chains). Small problems are searched jointly; larger ones by repeated
/// chain-wise search.
pub fn select_hybrid_combiner(
    freq: &[CMat],
    dims: &Dims,
    candidates: &PatternSchedule,
    rho: f64,
    precoding: Precoding,
) -> Result<HybridCombiners> {
    if candidates.n_rx_chains != dims.n_rx_chains || candidates.n0 != dims.n0 || dims.n0 == 0 {
        return Err(Error::Shape("candidate schedule does not match the array".into()));
    }
    let obj = PatternObjective::new(freq, dims, rho, precoding);
    let nrf = dims.n_rx_chains;
    let k = dims.n0;
    let build = |idx: &[usize]| HybridCombiners {
        weights: idx.iter().enumerate().map(|(r, &m)| candidates.w(r, m).to_vec()).collect(),
        chosen: idx.to_vec(),
    };
    let joint = (k as u64).checked_pow(nrf as u32).filter(|&c| c <= EXHAUSTIVE_LIMIT);
    let mut idx = vec![0usize; nrf];
    if let Some(total) = joint {
        let mut best = (f64::NEG_INFINITY, idx.clone());
        for code in 0..total {
            let mut rest = code;
            // Most significant digit first, so enumeration is lexicographic.
            for slot in idx.iter_mut().rev() {
                *slot = (rest % k as u64) as usize;
                rest /= k as u64;
            }
            let v = obj.hybrid_value(&build(&idx));
            if v > best.0 {
                best = (v, idx.clone());
            }
        }
        return Ok(build(&best.1));
    }
    let mut f = obj.hybrid_value(&build(&idx));
    loop {
        let mut changed = false;
        for r in 0..nrf {
            for m in 0..k {
                let mut trial = idx.clone();
                trial[r] = m;
                let v = obj.hybrid_value(&build(&trial));
                if v > f {
                    f = v;
                    idx = trial;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    Ok(build(&idx))
}
