//! Finite-length rate allocation for MLC.
//!
//! Each level is simulated on its own with the lower levels known to the
//! receiver (genie) and the upper levels drawn at random from their priors.
//! The largest `k_i` whose level BLER stays within the per-level budget is
//! found by a bracketing search seeded at `⌊I_i n_c⌋`.

use super::chain::Transceiver;
use super::config::SchemeDesign;
use crate::channel::{db_to_linear, ChannelBatch, Fading};
use crate::error::{invalid, Error, Result};
use crate::polar::build_reliability_order;
use crate::rates::{rate_mlc_with, McSamples};
use crate::rng::Stream;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

const LEVEL_TAG: u64 = 0x4445_5349_474E;
const GROUP: usize = 512;
const CHUNK: usize = 64;

/// `1 − (1 − P_e)^{1/m}`.
pub fn per_level_budget(target_bler: f64, m: usize) -> f64 {
    -((-target_bler).ln_1p() / m as f64).exp_m1()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignTargets {
    pub operating_snr_db: f64,
    pub target_bler: f64,
    pub m: usize,
}

impl DesignTargets {
    pub fn new(operating_snr_db: f64, target_bler: f64, m: usize) -> Result<Self> {
        if !(target_bler > 0.0 && target_bler < 1.0) {
            return invalid(format!("target BLER must lie in (0, 1), got {target_bler}"));
        }
        if !operating_snr_db.is_finite() || m == 0 {
            return invalid("operating SNR must be finite and m >= 1");
        }
        Ok(Self { operating_snr_db, target_bler, m })
    }

    pub fn per_level_budget(&self) -> f64 {
        per_level_budget(self.target_bler, self.m)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AllocationOptions {
    /// Blocks simulated for a candidate that keeps passing.
    pub blocks: usize,
    pub seed: u64,
    pub fading: Fading,
    /// Samples for the `I_i` estimates that seed the search.
    pub rate_samples: usize,
}

impl Default for AllocationOptions {
    fn default() -> Self {
        Self { blocks: 20_000, seed: 1, fading: Fading::Rayleigh, rate_samples: 50_000 }
    }
}

/// One Monte-Carlo evaluation of a candidate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateResult {
    pub k: usize,
    pub errors: usize,
    pub blocks: usize,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelSearch {
    pub level: usize,
    /// `⌊I_i n_c⌋` clamped to the feasible range.
    pub seed_k: usize,
    pub k: usize,
    pub feasible: bool,
    pub evaluations: Vec<CandidateResult>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub k: Vec<usize>,
    pub levels: Vec<LevelSearch>,
    pub budget: f64,
}

impl Allocation {
    pub fn total(&self) -> usize {
        self.k.iter().sum()
    }
    pub fn infeasible_levels(&self) -> Vec<usize> {
        self.levels.iter().filter(|l| !l.feasible).map(|l| l.level).collect()
    }
}

/// Largest `k_i` per level meeting `targets` with `template`'s code layout.
pub fn design_rate_allocation(
    targets: &DesignTargets,
    template: &SchemeDesign,
    opts: &AllocationOptions,
) -> Result<Allocation> {
    if !template.kind.is_mlc() {
        return invalid("rate allocation applies to MLC schemes");
    }
    if targets.m != template.m {
        return invalid("targets and template disagree on m");
    }
    let snr = db_to_linear(targets.operating_snr_db);
    let budget = targets.per_level_budget();
    let order = build_reliability_order(template.n_c, &template.order)?;
    let base = Transceiver::with_order(&zero_k(template), &order)?;
    let samples = McSamples::new(opts.rate_samples.max(2), opts.fading, opts.seed)?;
    let capacities = rate_mlc_with(base.pmf(), base.labeling(), snr, &samples)?.level_rates;

    let mut levels = Vec::with_capacity(template.m);
    for level in 1..=template.m {
        let s_i = if base.shaped_level() == Some(level) { template.s } else { 0 };
        let k_max = template.n_c - template.z[level - 1] - s_i;
        let seed_k = ((capacities[level - 1] * template.n_c as f64).floor() as usize).min(k_max);
        let mut memo: BTreeMap<usize, CandidateResult> = BTreeMap::new();
        let mut eval = |k: usize| -> Result<bool> {
            if let Some(r) = memo.get(&k) {
                return Ok(r.pass);
            }
            let mut d = zero_k(template);
            d.k[level - 1] = k;
            let tr = Transceiver::with_order(&d, &order)?;
            let r = level_bler(&tr, level, snr, budget, opts)?;
            memo.insert(k, r);
            Ok(r.pass)
        };
        let (k, feasible) = bracket_search(seed_k, k_max, &mut eval)?;
        levels.push(LevelSearch {
            level,
            seed_k,
            k,
            feasible,
            evaluations: memo.into_values().collect(),
        });
    }
    Ok(Allocation { k: levels.iter().map(|l| l.k).collect(), levels, budget })
}

fn zero_k(template: &SchemeDesign) -> SchemeDesign {
    let mut d = template.clone();
    d.k = vec![0; template.m];
    d
}

/// Largest `k ∈ [0, k_max]` with `pass(k)`, assuming `pass` is monotone
/// non-increasing in `k`. Returns `(0, false)` when even `k = 0` fails.
pub fn bracket_search<F>(seed: usize, k_max: usize, pass: &mut F) -> Result<(usize, bool)>
where
    F: FnMut(usize) -> Result<bool>,
{
    let seed = seed.min(k_max);
    let (mut lo, mut hi);
    let mut step = 4;
    if pass(seed)? {
        lo = seed;
        hi = None;
        while lo < k_max {
            let k = (lo + step).min(k_max);
            if pass(k)? {
                lo = k;
                step *= 2;
            } else {
                hi = Some(k);
                break;
            }
        }
    } else {
        hi = Some(seed);
        loop {
            let h = hi.unwrap();
            if h == 0 {
                return Ok((0, false));
            }
            let k = h.saturating_sub(step);
            if pass(k)? {
                lo = k;
                break;
            }
            hi = Some(k);
            step *= 2;
        }
    }
    let Some(mut hi) = hi else {
        return Ok((lo, true));
    };
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if pass(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo, true))
}

/// Genie-aided BLER of one MLC level. Stops early once the error count rules
/// out the budget; blocks are processed in fixed groups so the result does
/// not depend on the number of workers.
pub fn level_bler(
    tr: &Transceiver,
    level: usize,
    snr: f64,
    budget: f64,
    opts: &AllocationOptions,
) -> Result<CandidateResult> {
    let d = tr.design();
    let k = d.k[level - 1];
    let max_errors = (budget * opts.blocks as f64).floor() as usize;
    let sigma2 = tr.noise_variance(snr)?;
    let priors: Vec<f64> = (1..=d.m)
        .map(|lv| if tr.shaped_level() == Some(lv) { d.p } else { 0.5 })
        .collect();
    let mut errors = 0;
    let mut blocks = 0;
    while blocks < opts.blocks && errors <= max_errors {
        let end = (blocks + GROUP).min(opts.blocks);
        let starts: Vec<usize> = (blocks..end).step_by(CHUNK).collect();
        let counts: Vec<usize> = starts
            .par_iter()
            .map(|&start| -> Result<usize> {
                let mut ws = tr.workspace()?;
                let mut e = 0;
                for b in start..(start + CHUNK).min(end) {
                    let mut rng = Stream::for_unit(opts.seed, LEVEL_TAG + level as u64, b as u64);
                    let mut h = vec![1.0; d.n_c];
                    let mut w = vec![0.0; d.n_c];
                    for t in 0..d.n_c {
                        if opts.fading == Fading::Rayleigh {
                            h[t] = rng.rayleigh();
                        }
                        w[t] = rng.gaussian();
                    }
                    let mut labels = vec![0u32; d.n_c];
                    for (lv, &p1) in priors.iter().enumerate() {
                        if lv + 1 == level {
                            continue;
                        }
                        for l in labels.iter_mut() {
                            *l |= ((rng.uniform() < p1) as u32) << lv;
                        }
                    }
                    let payload = rng.bits(k);
                    let c = tr.encode_level(&mut ws, level, &payload)?;
                    for (l, &bit) in labels.iter_mut().zip(&c) {
                        *l |= (bit as u32) << (level - 1);
                    }
                    let y = (0..d.n_c)
                        .map(|t| h[t] * tr.labeling().symbol_for_label(labels[t]) as f64 + sigma2.sqrt() * w[t])
                        .collect();
                    let batch = ChannelBatch { y, h, noise_var: sigma2 };
                    let (got, ok) = tr.decode_level_genie(&mut ws, &batch, level, &labels)?;
                    e += (!ok || got != payload) as usize;
                }
                Ok(e)
            })
            .collect::<Result<_>>()?;
        errors += counts.iter().sum::<usize>();
        blocks = end;
    }
    Ok(CandidateResult { k, errors, blocks, pass: errors <= max_errors && blocks >= opts.blocks })
}

/// Trim a per-level allocation to exactly `target` bits. The surplus is
/// removed in proportion to each level's share, with largest-remainder
/// rounding (ties go to the lower level).
pub fn trim_to_total(k: &[usize], target: usize) -> Result<Vec<usize>> {
    let total: usize = k.iter().sum();
    if total < target {
        return Err(Error::Infeasible(format!("allocation carries {total} < {target} bits")));
    }
    let surplus = total - target;
    if surplus == 0 {
        return Ok(k.to_vec());
    }
    let mut cut: Vec<usize> = k.iter().map(|&ki| surplus * ki / total).collect();
    let mut order: Vec<usize> = (0..k.len()).collect();
    // exact integer remainders, largest first
    order.sort_by_key(|&i| (std::cmp::Reverse(surplus * k[i] % total), i));
    let left = surplus - cut.iter().sum::<usize>();
    for &i in &order[..left] {
        cut[i] += 1;
    }
    Ok(k.iter().zip(cut).map(|(&ki, c)| ki - c).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budget_matches_closed_form() {
        let p = per_level_budget(1e-3, 4);
        assert!((p - (1.0 - (1.0f64 - 1e-3).powf(0.25))).abs() < 1e-15);
        assert!((p - 2.50094e-4).abs() < 1e-9);
        assert!(DesignTargets::new(15.0, 0.0, 4).is_err());
        assert!(DesignTargets::new(15.0, 1.0, 4).is_err());
    }

    #[test]
    fn bracket_search_finds_threshold() {
        for threshold in [0usize, 1, 5, 37, 100, 199, 200] {
            for seed in [0usize, 10, 50, 150, 200] {
                let mut calls = 0;
                let (k, ok) = bracket_search(seed, 200, &mut |k| {
                    calls += 1;
                    Ok(k <= threshold)
                })
                .unwrap();
                assert!(ok);
                assert_eq!(k, threshold, "seed {seed}");
                assert!(calls < 30);
            }
        }
        let (k, ok) = bracket_search(20, 200, &mut |_| Ok(false)).unwrap();
        assert_eq!((k, ok), (0, false));
    }

    #[test]
    fn trimming_is_proportional() {
        assert_eq!(trim_to_total(&[20, 100, 200, 200], 512).unwrap(), vec![20, 98, 197, 197]);
        assert_eq!(trim_to_total(&[23, 118, 197, 185], 512).unwrap(), vec![22, 116, 193, 181]);
        assert_eq!(trim_to_total(&[0, 0, 3, 9], 0).unwrap(), vec![0; 4]);
        assert_eq!(trim_to_total(&[14, 92, 185, 221], 512).unwrap(), vec![14, 92, 185, 221]);
        assert!(trim_to_total(&[1, 2], 10).is_err());
    }
}
