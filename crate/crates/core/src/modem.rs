//! ASK constellations, labelings, symbol distributions and soft demappers.
//!
//! Bit-level `i` (1-based) of a label word is bit `i - 1` of its integer
//! value, so level 1 is the least significant bit and is decoded first.

use crate::error::{invalid, Result};
use crate::polar::clip_llr;
use std::fmt;
use std::str::FromStr;

pub const MAX_BITS_PER_SYMBOL: usize = 8;
const MAX_POINTS: usize = 1 << MAX_BITS_PER_SYMBOL;

/// `{±1, ±3, …, ±(2^m − 1)}`, indexed in ascending order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AskAlphabet {
    m: usize,
}

impl AskAlphabet {
    pub fn new(m: usize) -> Result<Self> {
        if m == 0 || m > MAX_BITS_PER_SYMBOL {
            return invalid(format!("bits per symbol must be in 1..={MAX_BITS_PER_SYMBOL}, got {m}"));
        }
        Ok(Self { m })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn size(&self) -> usize {
        1 << self.m
    }

    /// Amplitude of ascending index `j`.
    pub fn symbol(&self, j: usize) -> i32 {
        2 * j as i32 - (self.size() as i32 - 1)
    }

    pub fn symbols(&self) -> Vec<i32> {
        (0..self.size()).map(|j| self.symbol(j)).collect()
    }

    pub fn index_of(&self, x: i32) -> Result<usize> {
        let top = self.size() as i32 - 1;
        if x % 2 == 0 || x.abs() > top {
            return invalid(format!("{x} is not a {}-ASK symbol", self.size()));
        }
        Ok(((x + top) / 2) as usize)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LabelingKind {
    Nbc,
    ShiftedNbc,
    Gray,
}

impl fmt::Display for LabelingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LabelingKind::Nbc => "nbc",
            LabelingKind::ShiftedNbc => "shifted-nbc",
            LabelingKind::Gray => "gray",
        })
    }
}

impl FromStr for LabelingKind {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "nbc" => Ok(LabelingKind::Nbc),
            "shifted-nbc" | "shifted_nbc" | "snbc" => Ok(LabelingKind::ShiftedNbc),
            "gray" => Ok(LabelingKind::Gray),
            other => invalid(format!("unknown labeling '{other}'")),
        }
    }
}

/// `[(2^m − 1 − x)/2 + 2^{m−2}] mod 2^m`.
pub fn shifted_nbc_label(x: i32, m: usize) -> Result<u32> {
    if m < 2 {
        return invalid("shifted NBC needs at least 2 bits per symbol");
    }
    let alpha = AskAlphabet::new(m)?;
    alpha.index_of(x)?;
    let size = alpha.size() as i32;
    Ok((((size - 1 - x) / 2 + size / 4) % size) as u32)
}

fn nbc_label(x: i32, m: usize) -> u32 {
    (((1i32 << m) - 1 - x) / 2) as u32
}

/// Bijection between `m`-bit label words and ASK symbols.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Labeling {
    kind: LabelingKind,
    alphabet: AskAlphabet,
    label_of: Vec<u32>,
    index_of_label: Vec<usize>,
}

impl Labeling {
    pub fn new(kind: LabelingKind, m: usize) -> Result<Self> {
        let alphabet = AskAlphabet::new(m)?;
        let label_of: Vec<u32> = (0..alphabet.size())
            .map(|j| {
                let x = alphabet.symbol(j);
                Ok(match kind {
                    LabelingKind::Nbc => nbc_label(x, m),
                    LabelingKind::ShiftedNbc => shifted_nbc_label(x, m)?,
                    LabelingKind::Gray => (j ^ (j >> 1)) as u32,
                })
            })
            .collect::<Result<_>>()?;
        let mut index_of_label = vec![usize::MAX; alphabet.size()];
        for (j, &l) in label_of.iter().enumerate() {
            index_of_label[l as usize] = j;
        }
        Ok(Self { kind, alphabet, label_of, index_of_label })
    }

    pub fn kind(&self) -> LabelingKind {
        self.kind
    }
    pub fn m(&self) -> usize {
        self.alphabet.m()
    }
    pub fn alphabet(&self) -> AskAlphabet {
        self.alphabet
    }

    /// Label word of ascending symbol index `j`.
    pub fn label(&self, j: usize) -> u32 {
        self.label_of[j]
    }

    /// Ascending symbol index carrying `label`.
    pub fn index(&self, label: u32) -> usize {
        self.index_of_label[label as usize]
    }

    pub fn symbol_for_label(&self, label: u32) -> i32 {
        self.alphabet.symbol(self.index(label))
    }

    /// Bit of level `level` (1-based) in the label of symbol index `j`.
    pub fn bit(&self, j: usize, level: usize) -> u8 {
        ((self.label_of[j] >> (level - 1)) & 1) as u8
    }

    /// The level whose ones mark the low-energy half `|x| < 2^{m−1}`, if any.
    pub fn inner_level(&self) -> Option<usize> {
        let half = 1i32 << (self.m() - 1);
        (1..=self.m()).find(|&lv| {
            (0..self.alphabet.size())
                .all(|j| (self.bit(j, lv) == 1) == (self.alphabet.symbol(j).abs() < half))
        })
    }

    /// `symbol,label` rows, label written from level m down to level 1.
    pub fn to_csv(&self) -> String {
        let m = self.m();
        let mut out = String::from("symbol,label\n");
        for j in 0..self.alphabet.size() {
            out.push_str(&format!(
                "{},{:0width$b}\n",
                self.alphabet.symbol(j),
                self.label_of[j],
                width = m
            ));
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PmfKind {
    Uniform,
    MaxwellBoltzmann { nu: f64 },
    SbsPiecewise { p: f64 },
    LevelProduct,
}

/// Probability mass over an [`AskAlphabet`], indexed like the alphabet.
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolPmf {
    alphabet: AskAlphabet,
    probs: Vec<f64>,
    kind: PmfKind,
}

impl SymbolPmf {
    pub fn uniform(m: usize) -> Result<Self> {
        let alphabet = AskAlphabet::new(m)?;
        let p = 1.0 / alphabet.size() as f64;
        Ok(Self { alphabet, probs: vec![p; alphabet.size()], kind: PmfKind::Uniform })
    }

    /// `P(x) ∝ exp(−ν x²)`.
    pub fn maxwell_boltzmann(m: usize, nu: f64) -> Result<Self> {
        if !(nu >= 0.0 && nu.is_finite()) {
            return invalid(format!("MB exponent must be non-negative, got {nu}"));
        }
        let alphabet = AskAlphabet::new(m)?;
        let w: Vec<f64> = alphabet
            .symbols()
            .iter()
            .map(|&x| (-nu * (x as f64).powi(2)).exp())
            .collect();
        let z: f64 = w.iter().sum();
        Ok(Self {
            alphabet,
            probs: w.iter().map(|v| v / z).collect(),
            kind: PmfKind::MaxwellBoltzmann { nu },
        })
    }

    /// `p/2^{m−1}` on `|x| < 2^{m−1}`, `(1−p)/2^{m−1}` elsewhere.
    pub fn sbs(m: usize, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return invalid(format!("probability {p} outside [0, 1]"));
        }
        let alphabet = AskAlphabet::new(m)?;
        let half = 1i32 << (m - 1);
        let probs = alphabet
            .symbols()
            .iter()
            .map(|&x| if x.abs() < half { p } else { 1.0 - p } / half as f64)
            .collect();
        Ok(Self { alphabet, probs, kind: PmfKind::SbsPiecewise { p } })
    }

    pub fn from_probs(m: usize, probs: Vec<f64>) -> Result<Self> {
        let alphabet = AskAlphabet::new(m)?;
        if probs.len() != alphabet.size() {
            return invalid("pmf length does not match the alphabet");
        }
        if probs.iter().any(|p| !(*p >= 0.0)) || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return invalid("probabilities must be non-negative and sum to 1");
        }
        Ok(Self { alphabet, probs, kind: PmfKind::LevelProduct })
    }

    pub fn alphabet(&self) -> AskAlphabet {
        self.alphabet
    }
    pub fn m(&self) -> usize {
        self.alphabet.m()
    }
    pub fn kind(&self) -> PmfKind {
        self.kind
    }
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn second_moment(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(j, p)| p * (self.alphabet.symbol(j) as f64).powi(2))
            .sum()
    }

    /// `H(X)` in bits.
    pub fn entropy_bits(&self) -> f64 {
        self.probs.iter().filter(|&&p| p > 0.0).map(|p| -p * p.log2()).sum()
    }

    /// Inverse-CDF sample index for `u ∈ [0, 1)`.
    pub fn sample_index(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (j, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return j;
            }
        }
        // rounding left a sliver above the last cumulative value
        self.probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
    }
}

/// Product distribution over label bits pushed through `labeling`.
pub fn pmf_from_levels(level_priors: &[f64], labeling: &Labeling) -> Result<SymbolPmf> {
    let m = labeling.m();
    if level_priors.len() != m {
        return invalid(format!("expected {m} level priors, got {}", level_priors.len()));
    }
    if level_priors.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return invalid("level priors must lie in [0, 1]");
    }
    let probs = (0..labeling.alphabet().size())
        .map(|j| {
            (1..=m)
                .map(|lv| {
                    let p1 = level_priors[lv - 1];
                    if labeling.bit(j, lv) == 1 { p1 } else { 1.0 - p1 }
                })
                .product()
        })
        .collect();
    Ok(SymbolPmf { alphabet: labeling.alphabet(), probs, kind: PmfKind::LevelProduct })
}

/// Per-level bit frames `c_1 … c_m` of common length.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BitLevelFrames {
    levels: Vec<Vec<u8>>,
}

impl BitLevelFrames {
    pub fn new(levels: Vec<Vec<u8>>) -> Result<Self> {
        let Some(first) = levels.first() else {
            return invalid("at least one bit level is required");
        };
        let len = first.len();
        if len == 0 || levels.iter().any(|l| l.len() != len) {
            return invalid("bit-level frames must be non-empty and of equal length");
        }
        if levels.iter().flatten().any(|&b| b > 1) {
            return invalid("frames must be binary");
        }
        Ok(Self { levels })
    }

    pub fn m(&self) -> usize {
        self.levels.len()
    }
    pub fn len(&self) -> usize {
        self.levels[0].len()
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    pub fn level(&self, i: usize) -> &[u8] {
        &self.levels[i - 1]
    }
    pub fn into_levels(self) -> Vec<Vec<u8>> {
        self.levels
    }

    /// Label word at position `t`.
    pub fn label_at(&self, t: usize) -> u32 {
        self.levels.iter().enumerate().fold(0, |w, (i, l)| w | ((l[t] as u32) << i))
    }
}

pub fn map_symbols(frames: &BitLevelFrames, labeling: &Labeling) -> Result<Vec<f64>> {
    if frames.m() != labeling.m() {
        return invalid(format!(
            "{} frames given for a {}-bit labeling",
            frames.m(),
            labeling.m()
        ));
    }
    Ok((0..frames.len())
        .map(|t| labeling.symbol_for_label(frames.label_at(t)) as f64)
        .collect())
}

/// Hard label of the symbol nearest to `y / h`.
pub fn hard_label(y: f64, h: f64, labeling: &Labeling) -> u32 {
    let alpha = labeling.alphabet();
    let top = alpha.size() as f64 - 1.0;
    let z = if h != 0.0 { y / h } else { 0.0 };
    let j = ((z + top) / 2.0).round().clamp(0.0, top) as usize;
    labeling.label(j)
}

fn log_sum_exp(vals: impl Iterator<Item = f64>, max_log: bool) -> f64 {
    let mut buf = [0.0f64; MAX_POINTS];
    let mut k = 0;
    let mut mx = f64::NEG_INFINITY;
    for v in vals {
        buf[k] = v;
        k += 1;
        mx = mx.max(v);
    }
    if max_log || mx == f64::NEG_INFINITY {
        return mx;
    }
    mx + buf[..k].iter().map(|v| (v - mx).exp()).sum::<f64>().ln()
}

fn llr_from(l0: f64, l1: f64) -> f64 {
    match (l0 == f64::NEG_INFINITY, l1 == f64::NEG_INFINITY) {
        (true, true) => 0.0,
        _ => clip_llr(l0 - l1),
    }
}

/// Soft demapper with prior `P(x)` folded into the metric.
#[derive(Clone, Debug)]
pub struct Demapper {
    labeling: Labeling,
    symbols: Vec<f64>,
    log_prior: Vec<f64>,
    max_log: bool,
}

impl Demapper {
    pub fn new(labeling: &Labeling, pmf: &SymbolPmf) -> Result<Self> {
        if labeling.m() != pmf.m() {
            return invalid("labeling and pmf disagree on bits per symbol");
        }
        Ok(Self {
            labeling: labeling.clone(),
            symbols: pmf.alphabet().symbols().iter().map(|&x| x as f64).collect(),
            log_prior: pmf.probs().iter().map(|p| p.ln()).collect(),
            max_log: false,
        })
    }

    pub fn with_max_log(mut self, on: bool) -> Self {
        self.max_log = on;
        self
    }

    pub fn labeling(&self) -> &Labeling {
        &self.labeling
    }

    /// `ln P(x_j) − (y − h x_j)² / 2σ²` for every symbol index.
    pub fn metrics(&self, y: f64, h: f64, noise_var: f64, out: &mut [f64]) {
        let inv = 0.5 / noise_var;
        for ((o, &x), &lp) in out.iter_mut().zip(&self.symbols).zip(&self.log_prior) {
            let d = y - h * x;
            *o = lp - d * d * inv;
        }
    }

    /// All `m` independent-demapping LLRs, clipped.
    pub fn llrs_independent(&self, y: f64, h: f64, noise_var: f64, out: &mut [f64]) -> Result<()> {
        check_noise(noise_var)?;
        let m = self.labeling.m();
        if out.len() != m {
            return invalid("output slice must hold one LLR per level");
        }
        let mut met = [0.0f64; MAX_POINTS];
        let met = &mut met[..self.symbols.len()];
        self.metrics(y, h, noise_var, met);
        for (lv, o) in (1..=m).zip(out.iter_mut()) {
            let sel = |b: u8| {
                met.iter()
                    .enumerate()
                    .filter(move |(j, _)| self.labeling.bit(*j, lv) == b)
                    .map(|(_, &v)| v)
            };
            *o = llr_from(log_sum_exp(sel(0), self.max_log), log_sum_exp(sel(1), self.max_log));
        }
        Ok(())
    }

    /// LLR of `level` given the hard decisions of levels `1..level`
    /// (passed as the low bits of `decided`).
    pub fn llr_multistage(
        &self,
        y: f64,
        h: f64,
        noise_var: f64,
        decided: u32,
        level: usize,
    ) -> Result<f64> {
        check_noise(noise_var)?;
        if level == 0 || level > self.labeling.m() {
            return invalid(format!("level {level} out of range"));
        }
        let prefix_mask = (1u32 << (level - 1)) - 1;
        let prefix = decided & prefix_mask;
        let mut met = [0.0f64; MAX_POINTS];
        let met = &mut met[..self.symbols.len()];
        self.metrics(y, h, noise_var, met);
        let sel = |b: u32| {
            met.iter().enumerate().filter_map(move |(j, &v)| {
                let l = self.labeling.label(j);
                (l & prefix_mask == prefix && (l >> (level - 1)) & 1 == b).then_some(v)
            })
        };
        Ok(llr_from(log_sum_exp(sel(0), self.max_log), log_sum_exp(sel(1), self.max_log)))
    }
}

fn check_noise(noise_var: f64) -> Result<()> {
    if noise_var > 0.0 && noise_var.is_finite() {
        Ok(())
    } else {
        invalid(format!("noise variance must be positive, got {noise_var}"))
    }
}

pub fn bit_llrs_independent(
    y: f64,
    h: f64,
    noise_var: f64,
    labeling: &Labeling,
    pmf: &SymbolPmf,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; labeling.m()];
    Demapper::new(labeling, pmf)?.llrs_independent(y, h, noise_var, &mut out)?;
    Ok(out)
}

/// `decided[k]` is the hard bit of level `k + 1`; only the first
/// `level − 1` entries are used.
pub fn bit_llr_multistage(
    y: f64,
    h: f64,
    noise_var: f64,
    labeling: &Labeling,
    pmf: &SymbolPmf,
    decided: &[u8],
    level: usize,
) -> Result<f64> {
    if decided.len() + 1 < level {
        return invalid("not enough decided bits for this level");
    }
    let word = decided[..level.saturating_sub(1)]
        .iter()
        .enumerate()
        .fold(0u32, |w, (i, &b)| w | ((b as u32 & 1) << i));
    Demapper::new(labeling, pmf)?.llr_multistage(y, h, noise_var, word, level)
}

#[cfg(test)]
mod tests {
    use super::*;

    const KINDS: [LabelingKind; 3] = [LabelingKind::Nbc, LabelingKind::ShiftedNbc, LabelingKind::Gray];

    fn labelings(m: usize) -> Vec<Labeling> {
        KINDS
            .iter()
            .filter(|k| m >= 2 || **k != LabelingKind::ShiftedNbc)
            .map(|&k| Labeling::new(k, m).unwrap())
            .collect()
    }

    #[test]
    fn shifted_nbc_examples() {
        assert_eq!(shifted_nbc_label(7, 4).unwrap(), 0b1000);
        assert_eq!(shifted_nbc_label(9, 4).unwrap(), 0b0111);
        assert_eq!(shifted_nbc_label(-15, 4).unwrap(), 0b0011);
        assert!(shifted_nbc_label(8, 4).is_err());
        assert!(shifted_nbc_label(17, 4).is_err());
        assert!(shifted_nbc_label(1, 1).is_err());
    }

    #[test]
    fn labelings_are_bijections() {
        for m in 1..=6 {
            for lab in labelings(m) {
                let mut seen = vec![false; 1 << m];
                for j in 0..(1 << m) {
                    let l = lab.label(j) as usize;
                    assert!(l < 1 << m && !seen[l]);
                    seen[l] = true;
                    assert_eq!(lab.index(l as u32), j);
                }
            }
        }
    }

    #[test]
    fn shifted_nbc_msb_flags_inner_symbols() {
        for m in 2..=6 {
            let lab = Labeling::new(LabelingKind::ShiftedNbc, m).unwrap();
            assert_eq!(lab.inner_level(), Some(m));
            let half = 1 << (m - 1);
            for j in 0..(1 << m) {
                let x: i32 = lab.alphabet().symbol(j);
                assert_eq!(lab.bit(j, m) == 1, x.abs() < half, "m={m} x={x}");
            }
        }
    }

    #[test]
    fn gray_inner_flag_is_second_highest_level() {
        for m in 2..=6 {
            let lab = Labeling::new(LabelingKind::Gray, m).unwrap();
            assert_eq!(lab.inner_level(), Some(m - 1));
            for j in 1..(1 << m) {
                assert_eq!((lab.label(j) ^ lab.label(j - 1)).count_ones(), 1);
            }
        }
    }

    fn min_distance(lab: &Labeling, level: usize) -> i32 {
        // given levels below `level`, the subset of symbols sharing that
        // prefix splits by the bit at `level`
        let n = lab.alphabet().size();
        let mask = (1u32 << (level - 1)) - 1;
        let mut best = i32::MAX;
        for a in 0..n {
            for b in 0..n {
                let (la, lb) = (lab.label(a), lab.label(b));
                if la & mask == lb & mask && lab.bit(a, level) != lab.bit(b, level) {
                    let d = (lab.alphabet().symbol(a) - lab.alphabet().symbol(b)).abs();
                    best = best.min(d);
                }
            }
        }
        best
    }

    #[test]
    fn shift_keeps_level_distances() {
        for m in 2..=6 {
            let nbc = Labeling::new(LabelingKind::Nbc, m).unwrap();
            let snbc = Labeling::new(LabelingKind::ShiftedNbc, m).unwrap();
            let mut last = 0;
            for lv in 1..=m {
                let d = min_distance(&nbc, lv);
                assert_eq!(d, min_distance(&snbc, lv), "m={m} level={lv}");
                assert!(d >= last);
                last = d;
            }
        }
    }

    #[test]
    fn all_zero_frame_maps_to_label_zero_symbol() {
        let lab = Labeling::new(LabelingKind::ShiftedNbc, 4).unwrap();
        let frames = BitLevelFrames::new(vec![vec![0; 5]; 4]).unwrap();
        let x = map_symbols(&frames, &lab).unwrap();
        // (15 − x)/2 + 4 ≡ 0 (mod 16) gives x = −9
        assert_eq!(x, vec![-9.0; 5]);
        assert_eq!(shifted_nbc_label(-9, 4).unwrap(), 0);
        assert!(map_symbols(&BitLevelFrames::new(vec![vec![0; 5]; 3]).unwrap(), &lab).is_err());
    }

    #[test]
    fn two_ask_maps_by_sign() {
        let lab = Labeling::new(LabelingKind::Nbc, 1).unwrap();
        let f0 = BitLevelFrames::new(vec![vec![0, 1]]).unwrap();
        let x = map_symbols(&f0, &lab).unwrap();
        assert_eq!(x, vec![1.0, -1.0]);
    }

    #[test]
    fn map_then_hard_demap_is_identity() {
        let mut s = crate::rng::Stream::new(3, 0);
        for m in 1..=6 {
            for lab in labelings(m) {
                let levels: Vec<Vec<u8>> = (0..m).map(|_| s.bits(64)).collect();
                let frames = BitLevelFrames::new(levels).unwrap();
                let x = map_symbols(&frames, &lab).unwrap();
                for (t, &xt) in x.iter().enumerate() {
                    assert_eq!(hard_label(xt * 0.7, 0.7, &lab), frames.label_at(t));
                }
            }
        }
    }

    #[test]
    fn sbs_pmf_matches_level_product() {
        let lab = Labeling::new(LabelingKind::ShiftedNbc, 4).unwrap();
        let pmf = pmf_from_levels(&[0.5, 0.5, 0.5, 0.75], &lab).unwrap();
        for (j, &p) in pmf.probs().iter().enumerate() {
            let x = lab.alphabet().symbol(j);
            let want = if x.abs() < 8 { 0.75 / 8.0 } else { 0.25 / 8.0 };
            assert!((p - want).abs() < 1e-15);
            assert_eq!(p, pmf.probs()[15 - j]);
        }
        assert!((pmf.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((pmf.second_moment() - 53.0).abs() < 1e-9);
        assert!((SymbolPmf::uniform(4).unwrap().second_moment() - 85.0).abs() < 1e-9);
        let direct = SymbolPmf::sbs(4, 0.75).unwrap();
        for (a, b) in direct.probs().iter().zip(pmf.probs()) {
            assert!((a - b).abs() < 1e-15);
        }
        let gray = Labeling::new(LabelingKind::Gray, 4).unwrap();
        let g = pmf_from_levels(&[0.5, 0.5, 0.75, 0.5], &gray).unwrap();
        for (a, b) in direct.probs().iter().zip(g.probs()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn uniform_priors_give_uniform_pmf() {
        for m in 1..=6 {
            for lab in labelings(m) {
                let pmf = pmf_from_levels(&vec![0.5; m], &lab).unwrap();
                assert!(pmf.probs().iter().all(|&p| (p - 0.5f64.powi(m as i32)).abs() < 1e-15));
            }
        }
        let lab = Labeling::new(LabelingKind::Nbc, 2).unwrap();
        assert!(pmf_from_levels(&[0.5, 1.5], &lab).is_err());
        assert!(pmf_from_levels(&[0.5], &lab).is_err());
    }

    #[test]
    fn maxwell_boltzmann_at_zero_is_uniform() {
        let mb = SymbolPmf::maxwell_boltzmann(4, 0.0).unwrap();
        assert!(mb.probs().iter().all(|&p| (p - 1.0 / 16.0).abs() < 1e-15));
        let mb = SymbolPmf::maxwell_boltzmann(4, 0.05).unwrap();
        assert!(mb.second_moment() < 85.0);
        assert!(SymbolPmf::maxwell_boltzmann(4, -0.1).is_err());
    }

    #[test]
    fn two_ask_llr_closed_form() {
        let lab = Labeling::new(LabelingKind::Nbc, 1).unwrap();
        let pmf = SymbolPmf::uniform(1).unwrap();
        for &(y, h, s2) in &[(0.3, 1.2, 0.5), (-1.1, 0.4, 2.0), (2.0, 0.9, 0.8)] {
            let l = bit_llrs_independent(y, h, s2, &lab, &pmf).unwrap()[0];
            assert!((l - 2.0 * h * y / s2).abs() < 1e-12);
        }
        assert!(bit_llrs_independent(0.0, 1.0, 0.0, &lab, &pmf).is_err());
    }

    #[test]
    fn high_snr_llr_signs_match_labels() {
        for lab in labelings(4) {
            let pmf = SymbolPmf::uniform(4).unwrap();
            let dem = Demapper::new(&lab, &pmf).unwrap();
            let mut out = [0.0; 4];
            for j in 0..16 {
                let x = lab.alphabet().symbol(j) as f64;
                dem.llrs_independent(0.8 * x, 0.8, 1e-3, &mut out).unwrap();
                for lv in 1..=4 {
                    assert_eq!(out[lv - 1] < 0.0, lab.bit(j, lv) == 1);
                    let ms = dem.llr_multistage(0.8 * x, 0.8, 1e-3, lab.label(j), lv).unwrap();
                    assert_eq!(ms < 0.0, lab.bit(j, lv) == 1);
                }
            }
        }
    }

    #[test]
    fn brute_force_msb_llr_at_origin() {
        let lab = Labeling::new(LabelingKind::ShiftedNbc, 4).unwrap();
        let p = 0.75;
        let pmf = SymbolPmf::sbs(4, p).unwrap();
        let s2 = 7.0;
        let l = bit_llrs_independent(0.0, 1.0, s2, &lab, &pmf).unwrap()[3];
        let g = |x: i32| (-(x * x) as f64 / (2.0 * s2)).exp() / 8.0;
        let inner: f64 = (-7..=7).step_by(2).map(g).sum();
        let outer: f64 = (-15..=15).step_by(2).filter(|x: &i32| x.abs() > 7).map(g).sum();
        // MSB = 1 marks the inner symbols, so the LLR favours 1 by ln(p/(1−p))
        let want = (outer / inner).ln() - (p / (1.0 - p)).ln();
        assert!((l - want).abs() < 1e-12, "{l} vs {want}");
    }

    #[test]
    fn multistage_first_level_equals_independent() {
        let mut s = crate::rng::Stream::new(8, 1);
        for lab in labelings(4) {
            let pmf = SymbolPmf::maxwell_boltzmann(4, 0.03).unwrap();
            for _ in 0..50 {
                let (y, h) = (20.0 * s.gaussian(), s.rayleigh());
                let ind = bit_llrs_independent(y, h, 3.0, &lab, &pmf).unwrap();
                let ms = bit_llr_multistage(y, h, 3.0, &lab, &pmf, &[], 1).unwrap();
                assert!((ind[0] - ms).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn last_level_is_a_two_symbol_test() {
        let lab = Labeling::new(LabelingKind::ShiftedNbc, 4).unwrap();
        let pmf = SymbolPmf::sbs(4, 0.7).unwrap();
        let prefix = [1u8, 0, 1];
        let (y, h, s2) = (3.3, 0.9, 4.0);
        let l = bit_llr_multistage(y, h, s2, &lab, &pmf, &prefix, 4).unwrap();
        let word = 0b101u32;
        let j0 = lab.index(word);
        let j1 = lab.index(word | 0b1000);
        let (x0, x1) = (lab.alphabet().symbol(j0) as f64, lab.alphabet().symbol(j1) as f64);
        let want = (pmf.probs()[j0] / pmf.probs()[j1]).ln()
            + ((y - h * x1).powi(2) - (y - h * x0).powi(2)) / (2.0 * s2);
        assert!((l - want).abs() < 1e-12);
    }

    #[test]
    fn log_sum_exp_matches_direct_sum() {
        let lab = Labeling::new(LabelingKind::Gray, 4).unwrap();
        let pmf = SymbolPmf::sbs(4, 0.8).unwrap();
        let dem = Demapper::new(&lab, &pmf).unwrap();
        let mut met = [0.0; 16];
        let (y, h, s2) = (4.2, 1.3, 9.0);
        dem.metrics(y, h, s2, &mut met);
        let lse = log_sum_exp(met.iter().copied(), false);
        let direct: f64 = (0..16)
            .map(|j| {
                let x = lab.alphabet().symbol(j) as f64;
                pmf.probs()[j] * (-(y - h * x).powi(2) / (2.0 * s2)).exp()
            })
            .sum();
        assert!((lse.exp() - direct).abs() < 1e-9 * direct.max(1e-300));
        assert!(log_sum_exp(met.iter().copied(), true) <= lse);
    }

    #[test]
    fn csv_export() {
        let lab = Labeling::new(LabelingKind::ShiftedNbc, 4).unwrap();
        let csv = lab.to_csv();
        assert!(csv.starts_with("symbol,label\n-15,0011\n"));
        assert!(csv.contains("\n7,1000\n"));
        assert!(csv.contains("\n9,0111\n"));
        assert_eq!(csv.lines().count(), 17);
    }

    #[test]
    fn labeling_kind_round_trips() {
        for k in KINDS {
            assert_eq!(k.to_string().parse::<LabelingKind>().unwrap(), k);
        }
        assert!("qam".parse::<LabelingKind>().is_err());
    }
}
