//! Monte-Carlo achievable rates for MLC and BICM, bit-level capacities, and
//! one-dimensional optimizers for the MB exponent and the SBS probability.
//!
//! Estimates are averages of pointwise information densities over a fixed
//! [`McSamples`] set. Reusing one set across candidates (common random
//! numbers) keeps optimizer comparisons smooth.

use crate::channel::{db_to_linear, noise_variance, Fading};
use crate::error::{invalid, Result};
use crate::modem::{pmf_from_levels, Demapper, Labeling, LabelingKind, SymbolPmf, MAX_BITS_PER_SYMBOL};
use crate::rng::Stream;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;
use std::fmt;
use std::str::FromStr;

pub const DEFAULT_SAMPLES: usize = 200_000;
pub const NU_MAX: f64 = 0.2;
pub const P_SEARCH: (f64, f64) = (0.5, 0.95);
const CHUNK: usize = 8192;
const SAMPLE_TAG: u64 = 0x5241_5445;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RateObjective {
    Mlc,
    Bicm,
}

impl fmt::Display for RateObjective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RateObjective::Mlc => "mlc",
            RateObjective::Bicm => "bicm",
        })
    }
}

impl FromStr for RateObjective {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mlc" => Ok(RateObjective::Mlc),
            "bicm" => Ok(RateObjective::Bicm),
            other => invalid(format!("unknown rate objective '{other}'")),
        }
    }
}

/// Uniform symbol selectors plus fading and unit-variance noise draws.
#[derive(Clone, Debug)]
pub struct McSamples {
    fading: Fading,
    u: Vec<f64>,
    h: Vec<f64>,
    z: Vec<f64>,
}

impl McSamples {
    pub fn new(count: usize, fading: Fading, seed: u64) -> Result<Self> {
        if count < 2 {
            return invalid("at least two Monte-Carlo samples are required");
        }
        let parts: Vec<[Vec<f64>; 3]> = (0..count.div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| {
                let len = CHUNK.min(count - c * CHUNK);
                let mut s = Stream::for_unit(seed, SAMPLE_TAG, c as u64);
                let (mut u, mut h, mut z) = (vec![0.0; len], vec![1.0; len], vec![0.0; len]);
                for t in 0..len {
                    u[t] = s.uniform();
                    if fading == Fading::Rayleigh {
                        h[t] = s.rayleigh();
                    }
                    z[t] = s.gaussian();
                }
                [u, h, z]
            })
            .collect();
        let mut out = Self { fading, u: vec![], h: vec![], z: vec![] };
        for [u, h, z] in parts {
            out.u.extend(u);
            out.h.extend(h);
            out.z.extend(z);
        }
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }
    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }
    pub fn fading(&self) -> Fading {
        self.fading
    }
}

/// Per-level rates, sum rate and their standard errors, in bits per use.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub objective: RateObjective,
    pub level_rates: Vec<f64>,
    pub level_stderr: Vec<f64>,
    pub sum_rate: f64,
    pub sum_stderr: f64,
    pub samples: usize,
    /// BICM estimate was negative and reported as zero.
    pub clamped: bool,
}

#[derive(Clone, Default)]
struct Acc {
    level: Vec<(f64, f64)>,
    total: (f64, f64),
}

impl Acc {
    fn new(m: usize) -> Self {
        Self { level: vec![(0.0, 0.0); m], total: (0.0, 0.0) }
    }
    fn merge(&mut self, o: &Acc) {
        for (a, b) in self.level.iter_mut().zip(&o.level) {
            a.0 += b.0;
            a.1 += b.1;
        }
        self.total.0 += o.total.0;
        self.total.1 += o.total.1;
    }
}

fn mean_se((s, s2): (f64, f64), n: usize) -> (f64, f64) {
    let nf = n as f64;
    let mean = s / nf;
    let var = ((s2 / nf - mean * mean) * nf / (nf - 1.0)).max(0.0);
    (mean, (var / nf).sqrt())
}

/// Log-probability of every label prefix of each symbol: `prefix[j][i]` is
/// `ln P(C_1..C_i = label_j's first i bits)`.
fn prefix_log_probs(pmf: &SymbolPmf, labeling: &Labeling) -> Vec<Vec<f64>> {
    let m = labeling.m();
    let n = 1usize << m;
    (0..n)
        .map(|j| {
            let lj = labeling.label(j);
            (0..=m)
                .map(|i| {
                    let mask = (1u32 << i) - 1;
                    (0..n)
                        .filter(|&k| labeling.label(k) & mask == lj & mask)
                        .map(|k| pmf.probs()[k])
                        .sum::<f64>()
                        .ln()
                })
                .collect()
        })
        .collect()
}

/// `ln P(C_i = b)` for every level and bit value.
fn level_log_probs(pmf: &SymbolPmf, labeling: &Labeling) -> Vec<[f64; 2]> {
    (1..=labeling.m())
        .map(|lv| {
            let p1: f64 = (0..pmf.probs().len())
                .filter(|&j| labeling.bit(j, lv) == 1)
                .map(|j| pmf.probs()[j])
                .sum();
            [(1.0 - p1).ln(), p1.ln()]
        })
        .collect()
}

fn bits_entropy(p: f64) -> f64 {
    crate::shaping::binary_entropy(p)
}

fn check_inputs(pmf: &SymbolPmf, labeling: &Labeling, snr: f64) -> Result<f64> {
    if pmf.m() != labeling.m() {
        return invalid("labeling and pmf disagree on bits per symbol");
    }
    noise_variance(pmf, snr)
}

fn run_chunks<F>(samples: &McSamples, m: usize, f: F) -> Acc
where
    F: Fn(f64, f64, f64, &mut Acc) + Sync,
{
    let parts: Vec<Acc> = (0..samples.len().div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = Acc::new(m);
            for t in c * CHUNK..((c + 1) * CHUNK).min(samples.len()) {
                f(samples.u[t], samples.h[t], samples.z[t], &mut acc);
            }
            acc
        })
        .collect();
    let mut total = Acc::new(m);
    for p in &parts {
        total.merge(p);
    }
    total
}

/// Posterior weights `exp(metric_j − max)`, the true index and `max`.
struct Posterior {
    e: [f64; 1 << MAX_BITS_PER_SYMBOL],
    met: [f64; 1 << MAX_BITS_PER_SYMBOL],
    max: f64,
    j: usize,
}

fn posterior(dem: &Demapper, pmf: &SymbolPmf, sigma2: f64, u: f64, h: f64, z: f64) -> Posterior {
    let n = pmf.probs().len();
    let j = pmf.sample_index(u);
    let x = pmf.alphabet().symbol(j) as f64;
    let y = h * x + sigma2.sqrt() * z;
    let mut met = [0.0; 1 << MAX_BITS_PER_SYMBOL];
    dem.metrics(y, h, sigma2, &mut met[..n]);
    let max = met[..n].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut e = [0.0; 1 << MAX_BITS_PER_SYMBOL];
    for k in 0..n {
        e[k] = (met[k] - max).exp();
    }
    Posterior { e, met, max, j }
}

/// `ln` of a partial posterior sum containing the true symbol, guarded
/// against underflow of that symbol's weight.
fn ln_sum(s: f64, post: &Posterior) -> f64 {
    if s > 0.0 {
        s.ln()
    } else {
        post.met[post.j] - post.max
    }
}

/// `Σ_i I(C_i; Y | C_1..C_{i−1}, H)` with genie-correct prefixes.
pub fn rate_mlc_with(
    pmf: &SymbolPmf,
    labeling: &Labeling,
    snr: f64,
    samples: &McSamples,
) -> Result<RateReport> {
    let sigma2 = check_inputs(pmf, labeling, snr)?;
    let m = labeling.m();
    let n = 1usize << m;
    let dem = Demapper::new(labeling, pmf)?;
    let prefix = prefix_log_probs(pmf, labeling);
    let acc = run_chunks(samples, m, |u, h, z, acc| {
        let post = posterior(&dem, pmf, sigma2, u, h, z);
        let lj = labeling.label(post.j);
        // count[k]: weight of symbols agreeing with the true label on exactly
        // the k lowest levels
        let mut count = [0.0f64; MAX_BITS_PER_SYMBOL + 1];
        for k in 0..n {
            let agree = ((labeling.label(k) ^ lj).trailing_zeros() as usize).min(m);
            count[agree] += post.e[k];
        }
        let mut tail = [0.0f64; MAX_BITS_PER_SYMBOL + 2];
        for i in (0..=m).rev() {
            tail[i] = tail[i + 1] + count[i];
        }
        let mut total = 0.0;
        let mut prev = ln_sum(tail[0], &post);
        for i in 1..=m {
            let cur = ln_sum(tail[i], &post);
            let v = ((cur - prev) - (prefix[post.j][i] - prefix[post.j][i - 1])) / LN_2;
            acc.level[i - 1].0 += v;
            acc.level[i - 1].1 += v * v;
            total += v;
            prev = cur;
        }
        acc.total.0 += total;
        acc.total.1 += total * total;
    });
    Ok(finish(RateObjective::Mlc, acc, samples.len(), 0.0))
}

/// `H(X) − Σ_i H(C_i | Y, H)` with independent per-level demapping.
pub fn rate_bicm_with(
    pmf: &SymbolPmf,
    labeling: &Labeling,
    snr: f64,
    samples: &McSamples,
) -> Result<RateReport> {
    let sigma2 = check_inputs(pmf, labeling, snr)?;
    let m = labeling.m();
    let n = 1usize << m;
    let dem = Demapper::new(labeling, pmf)?;
    let lvl = level_log_probs(pmf, labeling);
    // per-level densities are measured against H(C_i); the dependence between
    // label bits enters as a constant offset on the sum rate
    let offset = pmf.entropy_bits()
        - lvl.iter().map(|l| bits_entropy(l[1].exp())).sum::<f64>();
    let acc = run_chunks(samples, m, |u, h, z, acc| {
        let post = posterior(&dem, pmf, sigma2, u, h, z);
        let lj = labeling.label(post.j);
        let s0 = ln_sum(post.e[..n].iter().sum(), &post);
        let mut total = 0.0;
        for lv in 1..=m {
            let b = (lj >> (lv - 1)) & 1;
            let sb: f64 = (0..n)
                .filter(|&k| (labeling.label(k) >> (lv - 1)) & 1 == b)
                .map(|k| post.e[k])
                .sum();
            let v = ((ln_sum(sb, &post) - s0) - lvl[lv - 1][b as usize]) / LN_2;
            acc.level[lv - 1].0 += v;
            acc.level[lv - 1].1 += v * v;
            total += v;
        }
        acc.total.0 += total;
        acc.total.1 += total * total;
    });
    Ok(finish(RateObjective::Bicm, acc, samples.len(), offset))
}

fn finish(objective: RateObjective, acc: Acc, n: usize, offset: f64) -> RateReport {
    let (level_rates, level_stderr): (Vec<f64>, Vec<f64>) =
        acc.level.iter().map(|&s| mean_se(s, n)).map(|(r, e)| (r.clamp(0.0, 1.0), e)).unzip();
    let (sum, sum_stderr) = mean_se(acc.total, n);
    let sum = sum + offset;
    let clamped = sum < 0.0;
    RateReport {
        objective,
        level_rates,
        level_stderr,
        sum_rate: sum.max(0.0),
        sum_stderr,
        samples: n,
        clamped,
    }
}

pub fn rate_with(
    objective: RateObjective,
    pmf: &SymbolPmf,
    labeling: &Labeling,
    snr: f64,
    samples: &McSamples,
) -> Result<RateReport> {
    match objective {
        RateObjective::Mlc => rate_mlc_with(pmf, labeling, snr, samples),
        RateObjective::Bicm => rate_bicm_with(pmf, labeling, snr, samples),
    }
}

fn default_samples(count: usize) -> Result<McSamples> {
    if count < 10_000 {
        return invalid(format!("at least 10^4 samples are required, got {count}"));
    }
    McSamples::new(count, Fading::Rayleigh, 0)
}

/// MLC rate on the Rayleigh channel with a fresh sample set.
pub fn rate_mlc(pmf: &SymbolPmf, labeling: &Labeling, snr: f64, samples: usize) -> Result<RateReport> {
    rate_mlc_with(pmf, labeling, snr, &default_samples(samples)?)
}

/// BICM rate on the Rayleigh channel with a fresh sample set.
pub fn rate_bicm(pmf: &SymbolPmf, labeling: &Labeling, snr: f64, samples: usize) -> Result<RateReport> {
    rate_bicm_with(pmf, labeling, snr, &default_samples(samples)?)
}

/// Label-free estimate of `I(X; Y | H)` and its standard error.
pub fn mutual_information(pmf: &SymbolPmf, snr: f64, samples: &McSamples) -> Result<(f64, f64)> {
    let lab = Labeling::new(LabelingKind::Gray, pmf.m())?;
    let sigma2 = noise_variance(pmf, snr)?;
    let dem = Demapper::new(&lab, pmf)?;
    let n = pmf.probs().len();
    let acc = run_chunks(samples, 0, |u, h, z, acc| {
        let post = posterior(&dem, pmf, sigma2, u, h, z);
        let s0: f64 = post.e[..n].iter().sum();
        let v = (post.met[post.j] - post.max - s0.ln() - pmf.probs()[post.j].ln()) / LN_2;
        acc.total.0 += v;
        acc.total.1 += v * v;
    });
    Ok(mean_se(acc.total, samples.len()))
}

/// Fading-averaged Gaussian-input reference `E[½ log₂(1 + H²γ)]`.
pub fn capacity_reference(snr: f64, samples: &McSamples) -> f64 {
    samples.h.iter().map(|h| 0.5 * (1.0 + h * h * snr).log2()).sum::<f64>() / samples.len() as f64
}

/// Golden-section maximization on `[a, b]`; also evaluates `a` and keeps the
/// better of the two, so the result never loses to the left endpoint.
pub fn golden_section_max<F>(a: f64, b: f64, tol: f64, mut f: F) -> Result<(f64, RateReport)>
where
    F: FnMut(f64) -> Result<RateReport>,
{
    const R: f64 = 0.618_033_988_749_894_8;
    let (mut lo, mut hi) = (a, b);
    let mut x1 = hi - R * (hi - lo);
    let mut x2 = lo + R * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while hi - lo > tol {
        if f1.sum_rate >= f2.sum_rate {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - R * (hi - lo);
            f1 = f(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + R * (hi - lo);
            f2 = f(x2)?;
        }
    }
    let (mut best_x, mut best) = if f1.sum_rate >= f2.sum_rate { (x1, f1) } else { (x2, f2) };
    let fa = f(a)?;
    if fa.sum_rate >= best.sum_rate {
        best_x = a;
        best = fa;
    }
    Ok((best_x, best))
}

/// Best MB exponent `ν ∈ [0, NU_MAX]`.
pub fn optimize_mb(
    m: usize,
    snr: f64,
    objective: RateObjective,
    labeling: &Labeling,
    samples: &McSamples,
) -> Result<(f64, RateReport)> {
    if !(snr > 0.0) {
        return invalid("SNR must be positive");
    }
    golden_section_max(0.0, NU_MAX, 1e-4, |nu| {
        rate_with(objective, &SymbolPmf::maxwell_boltzmann(m, nu)?, labeling, snr, samples)
    })
}

/// Labeling used for single-bit-level shaping under each objective.
pub fn sbs_labeling(m: usize, objective: RateObjective) -> Result<Labeling> {
    match objective {
        RateObjective::Mlc => Labeling::new(LabelingKind::ShiftedNbc, m),
        RateObjective::Bicm => Labeling::new(LabelingKind::Gray, m),
    }
}

/// Pmf produced by shaping the inner/outer level of `labeling` with `p`.
pub fn sbs_pmf(labeling: &Labeling, p: f64) -> Result<SymbolPmf> {
    let Some(level) = labeling.inner_level() else {
        return invalid(format!("{} labeling has no inner/outer level", labeling.kind()));
    };
    let mut priors = vec![0.5; labeling.m()];
    priors[level - 1] = p;
    pmf_from_levels(&priors, labeling)
}

/// Best SBS probability `p ∈ [0.5, 0.95]`.
pub fn optimize_p_sbs(
    m: usize,
    snr: f64,
    objective: RateObjective,
    samples: &McSamples,
) -> Result<(f64, RateReport)> {
    if !(snr > 0.0) {
        return invalid("SNR must be positive");
    }
    let lab = sbs_labeling(m, objective)?;
    golden_section_max(P_SEARCH.0, P_SEARCH.1, 1e-3, |p| {
        rate_with(objective, &sbs_pmf(&lab, p)?, &lab, snr, samples)
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapacityRow {
    pub snr_db: f64,
    pub report: RateReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapacityTable {
    pub m: usize,
    pub rows: Vec<CapacityRow>,
}

impl CapacityTable {
    /// `snr_db,I_1..I_m,R,stderr`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("snr_db");
        for i in 1..=self.m {
            out.push_str(&format!(",I_{i}"));
        }
        out.push_str(",R,stderr\n");
        for row in &self.rows {
            out.push_str(&format!("{}", row.snr_db));
            for r in &row.report.level_rates {
                out.push_str(&format!(",{r:.6}"));
            }
            out.push_str(&format!(",{:.6},{:.6}\n", row.report.sum_rate, row.report.sum_stderr));
        }
        out
    }
}

pub fn bitlevel_capacity_table(
    pmf: &SymbolPmf,
    labeling: &Labeling,
    objective: RateObjective,
    snr_db_grid: &[f64],
    samples: &McSamples,
) -> Result<CapacityTable> {
    if snr_db_grid.is_empty() {
        return invalid("SNR grid is empty");
    }
    let rows = snr_db_grid
        .iter()
        .map(|&db| {
            Ok(CapacityRow {
                snr_db: db,
                report: rate_with(objective, pmf, labeling, db_to_linear(db), samples)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(CapacityTable { m: labeling.m(), rows })
}

/// SNR in dB where a rate curve that increases with SNR reaches `target`,
/// by bisection on `[lo_db, hi_db]`.
pub fn snr_at_rate<F>(target: f64, lo_db: f64, hi_db: f64, tol_db: f64, mut rate: F) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut lo, mut hi) = (lo_db, hi_db);
    if rate(lo)? > target || rate(hi)? < target {
        return invalid(format!("rate {target} is not bracketed by [{lo_db}, {hi_db}] dB"));
    }
    while hi - lo > tol_db {
        let mid = 0.5 * (lo + hi);
        if rate(mid)? >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
