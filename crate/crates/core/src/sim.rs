//! Experiment orchestration: BLER sweeps, rate curves, shaping calibration
//! and the design pipeline, with CSV output and a JSON metadata sidecar.
//!
//! Every Monte-Carlo unit (block, trial, sample chunk) draws from its own
//! counter-based stream, and stopping decisions are taken only at fixed group
//! boundaries, so results depend on the root seed but not on the number of
//! workers.

use crate::channel::{db_to_linear, transmit_with, Fading};
use crate::error::{invalid, Error, Result};
use crate::modem::{Labeling, LabelingKind, SymbolPmf};
use crate::polar::{build_reliability_order, OrderSource};
use crate::rates::{
    optimize_mb, optimize_p_sbs, rate_with, sbs_labeling, snr_at_rate, McSamples,
    RateObjective, RateReport,
};
use crate::rng::Stream;
use crate::shaping::{calibrate_s, Calibration};
use crate::transceiver::{
    design_rate_allocation, trim_to_total, Allocation, AllocationOptions, DesignTargets,
    SchemeDesign, SchemeKind, Transceiver, Workspace,
};
use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

/// Environment variable that replaces the reliability order of every scheme
/// with a sequence file.
pub const RELIABILITY_FILE_ENV: &str = "PSMLC_RELIABILITY_FILE";

/// Default block-error target per SNR point.
pub const DEFAULT_MAX_ERRORS: usize = 200;

const BLER_TAG: u64 = 0x424C_4552;
const GROUP: usize = 256;
const CHUNK: usize = 16;
// Noise variance used by the zero-noise override; LLRs saturate at the clip.
const ZERO_NOISE_VAR: f64 = 1e-12;

/// Strictly increasing, non-empty SNR grid in dB.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnrGrid(Vec<f64>);

impl SnrGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return invalid("SNR grid is empty");
        }
        if points.iter().any(|x| !x.is_finite()) {
            return invalid("SNR grid contains a non-finite value");
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return invalid("SNR grid must be strictly increasing");
        }
        Ok(Self(points))
    }

    /// `start:step:stop` with `stop` included when it lies on the grid, or a
    /// single value.
    pub fn parse(spec: &str) -> Result<Self> {
        let parts: Vec<&str> = spec.split(':').map(str::trim).collect();
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("bad number {s:?} in SNR grid {spec:?}")))
        };
        match parts.as_slice() {
            [x] => Self::new(vec![num(x)?]),
            [a, b, c] => {
                let (start, step, stop) = (num(a)?, num(b)?, num(c)?);
                if !(step > 0.0) {
                    return invalid(format!("SNR step must be positive in {spec:?}"));
                }
                if stop < start {
                    return invalid(format!("SNR grid {spec:?} is empty"));
                }
                let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
                let pts = (0..count).map(|i| round_db(start + i as f64 * step)).collect();
                Self::new(pts)
            }
            _ => invalid(format!("SNR grid {spec:?} is not start:step:stop")),
        }
    }

    pub fn points(&self) -> &[f64] {
        &self.0
    }
}

fn round_db(x: f64) -> f64 {
    (x * 1e9).round() / 1e9
}

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: usize, trials: usize, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// 97.5% standard normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlerOptions {
    pub max_blocks: usize,
    pub max_errors: usize,
    /// A point stops once its Wilson upper bound falls below this; 0 disables.
    pub bler_floor: f64,
    pub seed: u64,
    pub fading: Fading,
    /// Transmit without noise.
    pub zero_noise: bool,
}

impl Default for BlerOptions {
    fn default() -> Self {
        Self {
            max_blocks: 100_000,
            max_errors: DEFAULT_MAX_ERRORS,
            bler_floor: 0.0,
            seed: 1,
            fading: Fading::Rayleigh,
            zero_noise: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StopReason {
    Errors,
    Budget,
    Floor,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::Errors => "errors",
            StopReason::Budget => "budget",
            StopReason::Floor => "floor",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlerPoint {
    pub snr_db: f64,
    pub blocks: usize,
    pub errors: usize,
    pub bler: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Ones-fraction over the shaped positions of the sent codewords.
    pub ones_fraction: Option<f64>,
    pub stop: StopReason,
}

#[derive(Clone, Copy, Default)]
struct Tally {
    errors: usize,
    ones: usize,
    shaped: usize,
}

impl Tally {
    fn add(self, o: Tally) -> Tally {
        Tally { errors: self.errors + o.errors, ones: self.ones + o.ones, shaped: self.shaped + o.shaped }
    }
}

fn shaped_ones(tr: &Transceiver, codewords: &[Vec<u8>]) -> (usize, usize) {
    let d = tr.design();
    let bits: &[u8] = match tr.shaped_level() {
        None => return (0, 0),
        Some(sl) if d.kind.is_mlc() => &codewords[sl - 1],
        Some(_) => &codewords[0][d.code_len() - d.n_c..],
    };
    (bits.iter().filter(|&&b| b == 1).count(), bits.len())
}

fn simulate_block(tr: &Transceiver, ws: &mut Workspace, nv: f64, b: usize, opts: &BlerOptions) -> Result<Tally> {
    let mut rng = Stream::for_unit(opts.seed, BLER_TAG, b as u64);
    let block_seed = rng.inner().next_u64();
    let info = rng.bits(tr.design().total_info_bits());
    let enc = tr.encode(ws, &info, block_seed)?;
    let batch = if opts.zero_noise {
        let mut batch = transmit_with(&enc.symbols, 0.0, opts.fading, &mut rng);
        batch.noise_var = ZERO_NOISE_VAR;
        batch
    } else {
        transmit_with(&enc.symbols, nv, opts.fading, &mut rng)
    };
    let dec = tr.decode(ws, &batch, block_seed)?;
    let (ones, shaped) = shaped_ones(tr, &enc.codewords);
    Ok(Tally { errors: (!dec.success || dec.info != info) as usize, ones, shaped })
}

/// Simulate one SNR point until `max_errors` block errors, the block budget,
/// or the BLER floor is reached.
pub fn simulate_bler_point(tr: &Transceiver, snr_db: f64, opts: &BlerOptions) -> Result<BlerPoint> {
    if opts.max_blocks == 0 || opts.max_errors == 0 {
        return invalid("block budget and error target must be >= 1");
    }
    let nv = tr.noise_variance(db_to_linear(snr_db))?;
    tr.workspace()?;
    let mut total = Tally::default();
    let mut blocks = 0;
    let stop = loop {
        if total.errors >= opts.max_errors {
            break StopReason::Errors;
        }
        if blocks >= opts.max_blocks {
            break StopReason::Budget;
        }
        if opts.bler_floor > 0.0 && blocks > 0 && wilson_interval(total.errors, blocks, Z95).1 < opts.bler_floor {
            break StopReason::Floor;
        }
        let end = (blocks + GROUP).min(opts.max_blocks);
        let starts: Vec<usize> = (blocks..end).step_by(CHUNK).collect();
        let tallies: Vec<Tally> = starts
            .par_iter()
            .map_init(
                || tr.workspace().expect("workspace was built above"),
                |ws, &start| -> Result<Tally> {
                    let mut t = Tally::default();
                    for b in start..(start + CHUNK).min(end) {
                        t = t.add(simulate_block(tr, ws, nv, b, opts)?);
                    }
                    Ok(t)
                },
            )
            .collect::<Result<_>>()?;
        total = tallies.into_iter().fold(total, Tally::add);
        blocks = end;
    };
    let (ci_low, ci_high) = wilson_interval(total.errors, blocks, Z95);
    Ok(BlerPoint {
        snr_db,
        blocks,
        errors: total.errors,
        bler: total.errors as f64 / blocks as f64,
        ci_low,
        ci_high,
        ones_fraction: (total.shaped > 0).then(|| total.ones as f64 / total.shaped as f64),
        stop,
    })
}

/// BLER curve over `grid`. Every point reuses the same block streams.
pub fn run_bler(tr: &Transceiver, grid: &SnrGrid, opts: &BlerOptions) -> Result<Vec<BlerPoint>> {
    grid.points().iter().map(|&db| simulate_bler_point(tr, db, opts)).collect()
}

/// SNR where a BLER curve first reaches `target`, interpolating `log10(BLER)`
/// linearly in dB between the bracketing points. `None` if never bracketed.
pub fn snr_at_bler(points: &[BlerPoint], target: f64) -> Option<f64> {
    let i = points.iter().position(|p| p.bler <= target)?;
    if i == 0 {
        return None;
    }
    let (a, b) = (&points[i - 1], &points[i]);
    let la = a.bler.log10();
    // an error-free point is treated as half an error
    let lb = b.bler.max(0.5 / b.blocks as f64).log10();
    let lt = target.log10();
    if la == lb {
        return Some(b.snr_db);
    }
    Some(a.snr_db + (la - lt) / (la - lb) * (b.snr_db - a.snr_db))
}

/// Smallest grid SNR whose BLER is at most `target`.
pub fn operating_snr(points: &[BlerPoint], target: f64) -> Option<f64> {
    points.iter().find(|p| p.bler <= target).map(|p| p.snr_db)
}

pub const BLER_CSV_HEADER: &str =
    "scheme,snr_db,blocks,errors,bler,ci_low,ci_high,ones_fraction,stop,config_hash,seed";

pub fn bler_csv(scheme: &str, points: &[BlerPoint], config_hash: &str, seed: u64) -> String {
    let mut out = format!("{BLER_CSV_HEADER}\n");
    for p in points {
        let of = p.ones_fraction.map(|f| format!("{f:.6}")).unwrap_or_default();
        out.push_str(&format!(
            "{scheme},{},{},{},{:.6e},{:.6e},{:.6e},{of},{},{config_hash},{seed}\n",
            p.snr_db, p.blocks, p.errors, p.bler, p.ci_low, p.ci_high, p.stop
        ));
    }
    out
}

/// Channel-input distribution of a rate curve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputShape {
    Uniform,
    /// Maxwell-Boltzmann with optimized exponent.
    Mb,
    /// Single bit-level shaping with optimized `p`.
    Sbs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RateCurve {
    pub objective: RateObjective,
    pub input: InputShape,
}

impl RateCurve {
    pub const ALL: [RateCurve; 6] = [
        RateCurve { objective: RateObjective::Mlc, input: InputShape::Uniform },
        RateCurve { objective: RateObjective::Mlc, input: InputShape::Mb },
        RateCurve { objective: RateObjective::Mlc, input: InputShape::Sbs },
        RateCurve { objective: RateObjective::Bicm, input: InputShape::Uniform },
        RateCurve { objective: RateObjective::Bicm, input: InputShape::Mb },
        RateCurve { objective: RateObjective::Bicm, input: InputShape::Sbs },
    ];

    pub const fn new(objective: RateObjective, input: InputShape) -> Self {
        Self { objective, input }
    }

    fn labeling(&self, m: usize) -> Result<Labeling> {
        match (self.input, self.objective) {
            (InputShape::Sbs, obj) => sbs_labeling(m, obj),
            (_, RateObjective::Mlc) => Labeling::new(LabelingKind::Nbc, m),
            (_, RateObjective::Bicm) => Labeling::new(LabelingKind::Gray, m),
        }
    }

    /// Rate at linear SNR `snr` and the optimized parameter (`ν`, `p`, or 0).
    pub fn evaluate(&self, m: usize, snr: f64, samples: &McSamples) -> Result<(f64, RateReport)> {
        match self.input {
            InputShape::Uniform => {
                let r = rate_with(self.objective, &SymbolPmf::uniform(m)?, &self.labeling(m)?, snr, samples)?;
                Ok((0.0, r))
            }
            InputShape::Mb => optimize_mb(m, snr, self.objective, &self.labeling(m)?, samples),
            InputShape::Sbs => optimize_p_sbs(m, snr, self.objective, samples),
        }
    }
}

impl fmt::Display for RateCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let input = match self.input {
            InputShape::Uniform => "uniform",
            InputShape::Mb => "mb",
            InputShape::Sbs => "sbs",
        };
        write!(f, "{}-{input}", self.objective)
    }
}

impl FromStr for RateCurve {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        RateCurve::ALL
            .into_iter()
            .find(|c| c.to_string() == t)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown rate curve '{s}' (e.g. mlc-sbs, bicm-uniform)")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub curve: RateCurve,
    pub snr_db: f64,
    /// Optimized `ν` for MB, `p` for SBS, 0 for uniform.
    pub param: f64,
    pub report: RateReport,
}

/// Evaluate each curve at each grid SNR with one shared sample set.
pub fn run_rates(m: usize, grid: &SnrGrid, curves: &[RateCurve], samples: &McSamples) -> Result<Vec<RatePoint>> {
    if curves.is_empty() {
        return invalid("no rate curves requested");
    }
    let mut out = Vec::with_capacity(curves.len() * grid.points().len());
    for &curve in curves {
        for &db in grid.points() {
            let (param, report) = curve.evaluate(m, db_to_linear(db), samples)?;
            out.push(RatePoint { curve, snr_db: db, param, report });
        }
    }
    Ok(out)
}

/// SNR in dB where `curve` reaches `target` bits per use.
pub fn rate_crossing(
    curve: RateCurve,
    m: usize,
    target: f64,
    lo_db: f64,
    hi_db: f64,
    samples: &McSamples,
) -> Result<f64> {
    snr_at_rate(target, lo_db, hi_db, 1e-3, |db| Ok(curve.evaluate(m, db_to_linear(db), samples)?.1.sum_rate))
}

pub fn rates_csv_header(m: usize) -> String {
    let mut h = String::from("curve,snr_db,param");
    for i in 1..=m {
        h.push_str(&format!(",I_{i}"));
    }
    h.push_str(",R,stderr,config_hash,seed");
    h
}

pub fn rates_csv(m: usize, points: &[RatePoint], config_hash: &str, seed: u64) -> String {
    let mut out = rates_csv_header(m);
    out.push('\n');
    for p in points {
        out.push_str(&format!("{},{},{:.6}", p.curve, p.snr_db, p.param));
        for r in &p.report.level_rates {
            out.push_str(&format!(",{r:.6}"));
        }
        out.push_str(&format!(",{:.6},{:.6},{config_hash},{seed}\n", p.report.sum_rate, p.report.sum_stderr));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRun {
    pub p: f64,
    pub calibration: Calibration,
}

/// Calibrate the shaping-bit count for each `p` in `p_grid`.
pub fn run_calibrate(
    n: usize,
    p_grid: &[f64],
    order: &OrderSource,
    list_size: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<CalibrationRun>> {
    if p_grid.is_empty() {
        return invalid("p grid is empty");
    }
    if p_grid.windows(2).any(|w| w[1] <= w[0]) {
        return invalid("p grid must be strictly increasing");
    }
    let order = build_reliability_order(n, order)?;
    p_grid
        .iter()
        .map(|&p| Ok(CalibrationRun { p, calibration: calibrate_s(n, p, &order, list_size, trials, seed)? }))
        .collect()
}

pub const CALIBRATE_CSV_HEADER: &str = "p,s_star,s,ones_fraction,stderr,config_hash,seed";

pub fn calibrate_csv(runs: &[CalibrationRun], config_hash: &str, seed: u64) -> String {
    let mut out = format!("{CALIBRATE_CSV_HEADER}\n");
    for r in runs {
        for c in &r.calibration.curve {
            out.push_str(&format!(
                "{},{},{},{:.6},{:.6},{config_hash},{seed}\n",
                r.p, r.calibration.s_star, c.s, c.ones_fraction, c.stderr
            ));
        }
    }
    out
}

/// Inputs of the design pipeline.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignRequest {
    /// Supplies `m`, `n_c`, `z`, order, list sizes, frozen seed and check
    /// node; its `kind` selects shaped or uniform MLC.
    pub template: SchemeDesign,
    pub operating_snr_db: f64,
    pub target_bler: f64,
    /// Required `Σ k_i`.
    pub total_bits: usize,
    pub calibration_trials: usize,
    pub allocation: AllocationOptions,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DesignOutcome {
    pub design: SchemeDesign,
    pub p_opt: f64,
    pub calibration: Option<Calibration>,
    pub allocation: Allocation,
}

/// Serializable form of a [`DesignOutcome`] for the metadata sidecar.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignReport {
    pub config: String,
    pub p_opt: f64,
    pub calibration: Option<Calibration>,
    pub allocation: Allocation,
}

impl DesignOutcome {
    pub fn report(&self) -> DesignReport {
        DesignReport {
            config: self.design.to_config_string(),
            p_opt: self.p_opt,
            calibration: self.calibration.clone(),
            allocation: self.allocation.clone(),
        }
    }
}

/// `optimize_p_sbs → calibrate_s → design_rate_allocation`, trimmed to
/// `total_bits`. Fails with [`Error::Infeasible`] when a level cannot meet
/// its budget or the levels together carry fewer than `total_bits`.
pub fn run_design(req: &DesignRequest) -> Result<DesignOutcome> {
    let t = &req.template;
    if !t.kind.is_mlc() {
        return invalid("the design pipeline produces MLC schemes");
    }
    let targets = DesignTargets::new(req.operating_snr_db, req.target_bler, t.m)?;
    let snr = db_to_linear(req.operating_snr_db);
    let mut design = t.clone();
    design.k = vec![0; t.m];
    design.operating_snr_db = Some(req.operating_snr_db);
    let mut calibration = None;
    let p_opt = if t.kind.is_shaped() {
        let samples = McSamples::new(req.allocation.rate_samples, req.allocation.fading, req.allocation.seed)?;
        let (p, _) = optimize_p_sbs(t.m, snr, RateObjective::Mlc, &samples)?;
        let p = (p * 1000.0).round() / 1000.0;
        let order = build_reliability_order(t.n_c, &t.order)?;
        let cal = calibrate_s(t.n_c, p, &order, t.precoder_list_size, req.calibration_trials, req.allocation.seed)?;
        design.p = p;
        design.s = cal.s_star;
        calibration = Some(cal);
        p
    } else {
        design.p = 0.5;
        design.s = 0;
        0.5
    };
    let allocation = design_rate_allocation(&targets, &design, &req.allocation)?;
    let bad = allocation.infeasible_levels();
    if !bad.is_empty() {
        return Err(Error::Infeasible(format!(
            "levels {bad:?} miss the per-level budget {:.3e} even with k = 0",
            allocation.budget
        )));
    }
    design.k = trim_to_total(&allocation.k, req.total_bits).map_err(|_| {
        Error::Infeasible(format!(
            "levels carry {:?} = {} bits, fewer than the required {}",
            allocation.k,
            allocation.total(),
            req.total_bits
        ))
    })?;
    design.validate()?;
    Ok(DesignOutcome { design, p_opt, calibration, allocation })
}

/// Experiment kind.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Rates,
    Calibrate,
    Design,
    Bler,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Command::Rates => "rates",
            Command::Calibrate => "calibrate",
            Command::Design => "design",
            Command::Bler => "bler",
        })
    }
}

/// Everything that determines an experiment's results. Worker count and
/// output path are recorded but do not enter the hash.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub command: Command,
    /// Scheme config text, when the command uses one.
    pub scheme: Option<String>,
    pub snr_db: Vec<f64>,
    pub blocks: usize,
    pub seed: u64,
    /// Command-specific parameters.
    pub params: BTreeMap<String, String>,
    #[serde(skip)]
    pub workers: usize,
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.blocks == 0 {
            return invalid("block/trial count must be >= 1");
        }
        if self.workers == 0 {
            return invalid("worker count must be >= 1");
        }
        SnrGrid::new(self.snr_db.clone()).map(|_| ())
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// JSON sidecar written next to every CSV.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunRecord<T> {
    pub experiment: String,
    pub config_hash: String,
    pub seed: u64,
    pub workers: usize,
    pub wall_clock_s: f64,
    pub version: String,
    pub config: ExperimentConfig,
    pub results: T,
}

impl<T: Serialize> RunRecord<T> {
    pub fn new(config: &ExperimentConfig, started: Instant, results: T) -> Self {
        let config_hash = config.hash();
        Self {
            experiment: format!("{}-{config_hash}", config.command),
            config_hash,
            seed: config.seed,
            workers: config.workers,
            wall_clock_s: started.elapsed().as_secs_f64(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
            results,
        }
    }

    /// Write `csv` to `out` and the record to `out` with a `.json` extension.
    /// Returns the sidecar path.
    pub fn write(&self, out: &Path, csv: &str) -> Result<PathBuf> {
        if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(out, csv)?;
        let sidecar = sidecar_path(out);
        let json = serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))?;
        std::fs::write(&sidecar, json + "\n")?;
        Ok(sidecar)
    }
}

pub fn sidecar_path(out: &Path) -> PathBuf {
    if out.extension().is_some_and(|e| e == "json") {
        let mut s = out.as_os_str().to_owned();
        s.push(".meta.json");
        PathBuf::from(s)
    } else {
        out.with_extension("json")
    }
}

/// Replace the reliability order of `design` with the sequence file named by
/// [`RELIABILITY_FILE_ENV`], if set.
pub fn apply_reliability_override(design: &mut SchemeDesign) {
    if let Some(path) = std::env::var_os(RELIABILITY_FILE_ENV).filter(|p| !p.is_empty()) {
        design.order = OrderSource::LoadedSequence(PathBuf::from(path));
    }
}

/// Apply a preset name or config file path; exactly one must be given.
pub fn load_scheme(preset: Option<&str>, config: Option<&Path>) -> Result<SchemeDesign> {
    let mut design = match (preset, config) {
        (Some(name), None) => SchemeDesign::preset_by_name(name)?,
        (None, Some(path)) => std::fs::read_to_string(path)?.parse()?,
        (Some(_), Some(_)) => return invalid("give either a preset or a config file, not both"),
        (None, None) => return invalid("a preset or a config file is required"),
    };
    apply_reliability_override(&mut design);
    Ok(design)
}

/// Uniform-MLC counterpart of a shaped MLC template.
pub fn uniform_template(t: &SchemeDesign) -> SchemeDesign {
    let mut d = t.clone();
    if d.kind == SchemeKind::SMlc {
        d.kind = SchemeKind::UMlc;
        d.labeling = SchemeKind::UMlc.labeling();
    }
    d.p = 0.5;
    d.s = 0;
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        assert_eq!(SnrGrid::parse("17:0.25:18").unwrap().points(), &[17.0, 17.25, 17.5, 17.75, 18.0]);
        assert_eq!(SnrGrid::parse("0:0.1:0.3").unwrap().points(), &[0.0, 0.1, 0.2, 0.3]);
        assert_eq!(SnrGrid::parse("5").unwrap().points(), &[5.0]);
        assert!(SnrGrid::parse("3:0:5").is_err());
        assert!(SnrGrid::parse("5:1:3").is_err());
        assert!(SnrGrid::parse("a:1:3").is_err());
        assert!(SnrGrid::new(vec![1.0, 1.0]).is_err());
        assert!(SnrGrid::new(vec![]).is_err());
    }

    #[test]
    fn wilson_known_values() {
        // 10 of 100 at z = 1.96
        let (lo, hi) = wilson_interval(10, 100, Z95);
        assert!((lo - 0.055_229).abs() < 1e-5, "{lo}");
        assert!((hi - 0.174_366).abs() < 1e-5, "{hi}");
        let (lo, hi) = wilson_interval(0, 50, Z95);
        assert_eq!(lo, 0.0);
        assert!((hi - 0.071_348).abs() < 1e-5, "{hi}");
        assert_eq!(wilson_interval(0, 0, Z95), (0.0, 1.0));
    }

    #[test]
    fn interpolated_crossing() {
        let pt = |snr_db, errors, blocks| BlerPoint {
            snr_db,
            blocks,
            errors,
            bler: errors as f64 / blocks as f64,
            ci_low: 0.0,
            ci_high: 1.0,
            ones_fraction: None,
            stop: StopReason::Errors,
        };
        let pts = [pt(1.0, 100, 1000), pt(2.0, 10, 1000), pt(3.0, 1, 1000)];
        assert!((snr_at_bler(&pts, 1e-2).unwrap() - 2.0).abs() < 1e-12);
        assert!((snr_at_bler(&pts, 10f64.powf(-1.5)).unwrap() - 1.5).abs() < 1e-12);
        assert_eq!(snr_at_bler(&pts, 0.5), None);
        assert_eq!(snr_at_bler(&pts, 1e-4), None);
        assert_eq!(operating_snr(&pts, 1e-2), Some(2.0));
    }

    #[test]
    fn hash_ignores_workers_and_output() {
        let mut a = ExperimentConfig {
            command: Command::Bler,
            scheme: Some("x".into()),
            snr_db: vec![1.0],
            blocks: 10,
            seed: 3,
            params: BTreeMap::new(),
            workers: 1,
            out: None,
        };
        let h = a.hash();
        assert_eq!(h.len(), 16);
        a.workers = 8;
        a.out = Some("o.csv".into());
        assert_eq!(a.hash(), h);
        a.seed = 4;
        assert_ne!(a.hash(), h);
    }

    #[test]
    fn curve_names_round_trip() {
        for c in RateCurve::ALL {
            assert_eq!(c.to_string().parse::<RateCurve>().unwrap(), c);
        }
        assert!("mlc-foo".parse::<RateCurve>().is_err());
    }

    #[test]
    fn sidecar_names() {
        assert_eq!(sidecar_path(Path::new("a/b.csv")), PathBuf::from("a/b.json"));
        assert_eq!(sidecar_path(Path::new("b.json")), PathBuf::from("b.json.meta.json"));
    }
}
