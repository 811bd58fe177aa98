//! Shaping bits: a polar decoder used as a precoder.
//!
//! Writing `uG ⊕ c = 0` shows that the codeword `c` can be read as the noise
//! of a BSC(p) whose output is the all-zero word. Running a list decoder on
//! that observation (target LLR `ln((1-p)/p)`), with the information and
//! frozen bits treated as known, yields shaping bits that pull the codeword's
//! ones-fraction towards `p`. The receiver treats shaping bits as ordinary
//! unknowns and discards them.

use crate::error::{invalid, Result};
use crate::polar::{
    polar_transform_in_place, BitRole, PolarCodeSpec, ReliabilityOrder, SclDecoder,
};
use crate::rng::{FrozenBitStream, Stream};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Binary entropy in bits.
pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        0.0
    } else {
        -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShapingConfig {
    p: f64,
    s: usize,
    precoder_list_size: usize,
}

impl ShapingConfig {
    pub fn new(p: f64, s: usize, precoder_list_size: usize) -> Result<Self> {
        if !(0.5..1.0).contains(&p) {
            return invalid(format!("target ones probability {p} outside [0.5, 1)"));
        }
        if precoder_list_size == 0 {
            return invalid("precoder list size must be >= 1");
        }
        Ok(Self { p, s, precoder_list_size })
    }

    pub fn p(&self) -> f64 {
        self.p
    }
    pub fn s(&self) -> usize {
        self.s
    }
    pub fn precoder_list_size(&self) -> usize {
        self.precoder_list_size
    }
    /// `L_s = ln((1-p)/p)`; zero at p = 0.5, negative otherwise.
    pub fn prior_llr(&self) -> f64 {
        ((1.0 - self.p) / self.p).ln()
    }
}

/// Per-position flag: `true` where the codeword must follow `P(1) = p`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShapedPositionMask(Vec<bool>);

impl ShapedPositionMask {
    pub fn full(n: usize) -> Self {
        Self(vec![true; n])
    }

    /// Only positions in `range` are shaped.
    pub fn block(n: usize, range: std::ops::Range<usize>) -> Result<Self> {
        if range.end > n || range.start > range.end {
            return invalid("shaped block outside the codeword");
        }
        Ok(Self((0..n).map(|i| range.contains(&i)).collect()))
    }

    pub fn from_flags(flags: Vec<bool>) -> Self {
        Self(flags)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn flags(&self) -> &[bool] {
        &self.0
    }

    /// Fraction of ones over shaped positions.
    pub fn ones_fraction(&self, codeword: &[u8]) -> f64 {
        let (ones, total) = self
            .0
            .iter()
            .zip(codeword)
            .filter(|(&m, _)| m)
            .fold((0usize, 0usize), |(o, t), (_, &b)| (o + b as usize, t + 1));
        if total == 0 {
            0.0
        } else {
            ones as f64 / total as f64
        }
    }
}

/// The `s` most reliable indices of `order`.
pub fn select_shaping_set(order: &ReliabilityOrder, s: usize) -> Result<Vec<usize>> {
    if s > order.n() {
        return invalid(format!("s={s} exceeds n={}", order.n()));
    }
    Ok(order.order()[..s].to_vec())
}

/// `⌊n (1 - h₂(p))⌋`.
pub fn asymptotic_shaping_count(n: usize, p: f64) -> Result<usize> {
    if !(0.5..1.0).contains(&p) {
        return invalid(format!("target ones probability {p} outside [0.5, 1)"));
    }
    // guard against 1 - h2 rounding just below an integer boundary
    let v = n as f64 * (1.0 - binary_entropy(p));
    Ok((v + 1e-9).floor() as usize)
}

/// Precoder state reused across calls.
pub struct Precoder {
    decoder: SclDecoder,
    llrs: Vec<f64>,
    known: Vec<bool>,
    values: Vec<u8>,
}

impl Precoder {
    pub fn new(n: usize, cfg: &ShapingConfig) -> Result<Self> {
        Ok(Self {
            decoder: SclDecoder::new(n, cfg.precoder_list_size())?,
            llrs: vec![0.0; n],
            known: vec![false; n],
            values: vec![0; n],
        })
    }

    /// Shaping bits for `info` under `spec`, in ascending index order of `S`.
    pub fn shaping_bits(
        &mut self,
        info: &[u8],
        spec: &PolarCodeSpec,
        cfg: &ShapingConfig,
        mask: &ShapedPositionMask,
    ) -> Result<Vec<u8>> {
        let n = spec.n();
        if spec.shaping_set().len() != cfg.s() {
            return invalid(format!(
                "spec has {} shaping positions, config expects {}",
                spec.shaping_set().len(),
                cfg.s()
            ));
        }
        if mask.len() != n || self.decoder.block_len() != n {
            return invalid("mask or precoder length does not match the code");
        }
        if cfg.s() == 0 {
            return Ok(Vec::new());
        }
        if cfg.prior_llr() == 0.0 || !mask.flags().iter().any(|&f| f) {
            return Ok(unforced_shaping_bits(info, spec.frozen_seed(), cfg.s()));
        }
        let placeholder = vec![0u8; cfg.s()];
        let u = spec.assemble(info, &placeholder)?;
        let ls = cfg.prior_llr();
        for i in 0..n {
            self.llrs[i] = if mask.flags()[i] { ls } else { 0.0 };
            self.known[i] = spec.roles()[i] != BitRole::Shaping;
            self.values[i] = u[i];
        }
        let out = self.decoder.decode(&self.llrs, &self.known, &self.values, |_| true)?;
        Ok(spec.extract_shaping(&out.u))
    }

    /// Full shaped encode: precode, then transform.
    pub fn encode(
        &mut self,
        info: &[u8],
        spec: &PolarCodeSpec,
        cfg: &ShapingConfig,
        mask: &ShapedPositionMask,
    ) -> Result<Vec<u8>> {
        let sb = self.shaping_bits(info, spec, cfg, mask)?;
        let mut u = spec.assemble(info, &sb)?;
        polar_transform_in_place(&mut u)?;
        Ok(u)
    }
}

/// With no target LLR every precoder decision is a tie, so the bits are
/// drawn from a stream keyed on the seed and the information word instead.
fn unforced_shaping_bits(info: &[u8], seed: u64, s: usize) -> Vec<u8> {
    let mut key = FrozenBitStream::new(seed ^ 0x5348_4150_494E_4721);
    let mut acc = key.next_u64();
    for chunk in info.chunks(64) {
        let word = chunk.iter().fold(0u64, |w, &b| (w << 1) | b as u64);
        acc = FrozenBitStream::new(acc ^ word ^ chunk.len() as u64).next_u64();
    }
    let mut stream = FrozenBitStream::new(acc);
    (0..s).map(|_| stream.next_bit()).collect()
}

/// One-shot shaping-bit generation.
pub fn generate_shaping_bits(
    info: &[u8],
    spec: &PolarCodeSpec,
    cfg: &ShapingConfig,
    mask: &ShapedPositionMask,
) -> Result<Vec<u8>> {
    Precoder::new(spec.n(), cfg)?.shaping_bits(info, spec, cfg, mask)
}

/// One point of a calibration curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationPoint {
    pub s: usize,
    pub ones_fraction: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub s_star: usize,
    pub curve: Vec<CalibrationPoint>,
}

impl Calibration {
    pub fn point(&self, s: usize) -> Option<&CalibrationPoint> {
        self.curve.iter().find(|c| c.s == s)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,ones_fraction,stderr\n");
        for c in &self.curve {
            out.push_str(&format!("{},{:.6},{:.6}\n", c.s, c.ones_fraction, c.stderr));
        }
        out
    }
}

/// Monte-Carlo ones-fraction of precoded codewords with the `s` most reliable
/// indices used for shaping and all other `n - s` bits drawn at random.
///
/// Trials are split across the rayon pool; trial `t` always uses stream
/// `(seed, s, t)` so the result does not depend on the worker count.
pub fn measure_ones_fraction(
    order: &ReliabilityOrder,
    p: f64,
    s: usize,
    list_size: usize,
    trials: usize,
    seed: u64,
) -> Result<CalibrationPoint> {
    let n = order.n();
    let cfg = ShapingConfig::new(p, s, list_size)?;
    let spec = PolarCodeSpec::from_order(order, n - s, s, 0)?;
    let mask = ShapedPositionMask::full(n);
    const CHUNK: usize = 64;
    let chunks: Vec<usize> = (0..trials.div_ceil(CHUNK)).collect();
    let fractions: Vec<Vec<f64>> = chunks
        .par_iter()
        .map(|&c| -> Result<Vec<f64>> {
            let mut pre = Precoder::new(n, &cfg)?;
            let mut out = Vec::with_capacity(CHUNK);
            for t in c * CHUNK..((c + 1) * CHUNK).min(trials) {
                let mut rng = Stream::for_unit(seed, s as u64, t as u64);
                let info = rng.bits(n - s);
                let cw = pre.encode(&info, &spec, &cfg, &mask)?;
                out.push(mask.ones_fraction(&cw));
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let all: Vec<f64> = fractions.into_iter().flatten().collect();
    let nt = all.len() as f64;
    let mean = all.iter().sum::<f64>() / nt;
    let var = all.iter().map(|f| (f - mean) * (f - mean)).sum::<f64>() / (nt - 1.0).max(1.0);
    Ok(CalibrationPoint { s, ones_fraction: mean, stderr: (var / nt).sqrt() })
}

/// Search the shaping-bit count whose measured ones-fraction is closest to `p`.
///
/// Coarse grid `s_asym - 8 ..= s_asym + 32` in steps of 4, then every `s`
/// within 3 of the best coarse point. `p = 0.5` needs no shaping and returns 0.
pub fn calibrate_s(
    n: usize,
    p: f64,
    order: &ReliabilityOrder,
    list_size: usize,
    trials: usize,
    seed: u64,
) -> Result<Calibration> {
    if order.n() != n {
        return invalid("order length does not match n");
    }
    let s_asym = asymptotic_shaping_count(n, p)?;
    if trials == 0 {
        return invalid("calibration needs at least one trial");
    }
    if p == 0.5 {
        let pt = measure_ones_fraction(order, p, 0, list_size, trials, seed)?;
        return Ok(Calibration { s_star: 0, curve: vec![pt] });
    }
    let lo = s_asym.saturating_sub(8);
    let hi = (s_asym + 32).min(n - 1);
    let grid: Vec<usize> = (lo..=hi).step_by(4).collect();
    if grid.is_empty() {
        return invalid("empty calibration grid");
    }
    let mut curve = Vec::new();
    for &s in &grid {
        curve.push(measure_ones_fraction(order, p, s, list_size, trials, seed)?);
    }
    let best = |curve: &[CalibrationPoint]| {
        curve
            .iter()
            .min_by(|a, b| {
                (a.ones_fraction - p)
                    .abs()
                    .total_cmp(&(b.ones_fraction - p).abs())
                    .then(a.s.cmp(&b.s))
            })
            .map(|c| c.s)
            .unwrap()
    };
    let coarse = best(&curve);
    for s in coarse.saturating_sub(3)..=(coarse + 3).min(n - 1) {
        if !curve.iter().any(|c| c.s == s) {
            curve.push(measure_ones_fraction(order, p, s, list_size, trials, seed)?);
        }
    }
    curve.sort_by_key(|c| c.s);
    Ok(Calibration { s_star: best(&curve), curve })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polar::{build_reliability_order, OrderSource};

    #[test]
    fn asymptotic_counts() {
        assert_eq!(asymptotic_shaping_count(256, 0.5).unwrap(), 0);
        assert_eq!(asymptotic_shaping_count(256, 0.75).unwrap(), 48);
        assert!(asymptotic_shaping_count(256, 0.999_999).unwrap() >= 255);
        assert!(asymptotic_shaping_count(256, 0.4).is_err());
        assert!(asymptotic_shaping_count(256, 1.0).is_err());
        let mut last = 0;
        for i in 0..100 {
            let s = asymptotic_shaping_count(256, 0.5 + i as f64 * 0.005).unwrap();
            assert!(s >= last);
            last = s;
        }
    }

    #[test]
    fn shaping_set_is_prefix() {
        let order = ReliabilityOrder::from_permutation(
            vec![7, 6, 5, 3, 4, 2, 1, 0],
            OrderSource::PolarizationWeight,
        )
        .unwrap();
        assert!(select_shaping_set(&order, 0).unwrap().is_empty());
        assert_eq!(select_shaping_set(&order, 3).unwrap(), vec![7, 6, 5]);
        assert!(select_shaping_set(&order, 9).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(ShapingConfig::new(0.49, 0, 8).is_err());
        assert!(ShapingConfig::new(1.0, 0, 8).is_err());
        assert!(ShapingConfig::new(0.75, 0, 0).is_err());
        let c = ShapingConfig::new(0.5, 0, 8).unwrap();
        assert_eq!(c.prior_llr(), 0.0);
        assert!(ShapingConfig::new(0.75, 1, 8).unwrap().prior_llr() < 0.0);
    }

    #[test]
    fn size_mismatch_is_rejected() {
        let order = build_reliability_order(16, &OrderSource::PolarizationWeight).unwrap();
        let spec = PolarCodeSpec::from_order(&order, 8, 4, 0).unwrap();
        let cfg = ShapingConfig::new(0.75, 3, 4).unwrap();
        let r = generate_shaping_bits(&[0; 8], &spec, &cfg, &ShapedPositionMask::full(16));
        assert!(r.is_err());
    }

    #[test]
    fn unconstrained_precoder_saturates() {
        // s = n: every bit is a shaping bit, so the precoder can pick the
        // all-ones codeword outright
        let order = build_reliability_order(256, &OrderSource::PolarizationWeight).unwrap();
        let pt = measure_ones_fraction(&order, 0.9, 256, 8, 200, 1).unwrap();
        assert!(pt.ones_fraction >= 0.85, "{pt:?}");
    }
}
