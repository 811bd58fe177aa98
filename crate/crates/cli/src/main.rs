//! `psmlc`: rate curves, shaping calibration, rate-allocation design and BLER
//! sweeps for shaped and uniform MLC/BICM over Rayleigh fading.
//!
//! Exit codes: 0 success, 2 configuration error, 3 infeasible design.

use clap::{Args, Parser, Subcommand};
use psmlc::channel::Fading;
use psmlc::polar::OrderSource;
use psmlc::rates::McSamples;
use psmlc::sim::{
    self, bler_csv, calibrate_csv, load_scheme, rate_crossing, rates_csv, run_bler, run_calibrate,
    run_design, run_rates, snr_at_bler, BlerOptions, Command, DesignRequest, ExperimentConfig,
    RateCurve, RunRecord, SnrGrid,
};
use psmlc::transceiver::{AllocationOptions, Transceiver};
use psmlc::Error;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser, Debug)]
#[command(name = "psmlc", version, about = "Shaped multi-level polar coding simulator")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Root seed of every random stream.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long)]
    workers: Option<usize>,
    /// Output CSV (or config) path; metadata goes next to it as `.json`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct SchemeArgs {
    /// Scheme config file (key = value lines).
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in scheme.
    #[arg(long, value_parser = ["umlc", "smlc", "ubicm", "sbicm"])]
    preset: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Monte-Carlo achievable-rate curves.
    Rates {
        /// SNR grid in dB, `start:step:stop`.
        #[arg(long, allow_hyphen_values = true)]
        snr_db: String,
        /// Bits per symbol.
        #[arg(long, default_value_t = 4)]
        m: usize,
        /// Curves as `{mlc,bicm}-{uniform,mb,sbs}`; all six by default.
        #[arg(long, value_delimiter = ',')]
        curves: Vec<String>,
        /// Monte-Carlo samples per point.
        #[arg(long, default_value_t = psmlc::rates::DEFAULT_SAMPLES)]
        blocks: usize,
        /// Also report the SNR at which each curve reaches this rate.
        #[arg(long)]
        target_rate: Option<f64>,
        #[arg(long, default_value = "rayleigh")]
        fading: Fading,
        #[command(flatten)]
        common: Common,
    },
    /// Calibrate the number of shaping bits over a grid of target `p`.
    Calibrate {
        /// Target ones-fractions, `start:step:stop` or comma separated.
        #[arg(long, default_value = "0.75")]
        p: String,
        /// Block length.
        #[arg(long, default_value_t = 256)]
        n: usize,
        /// Precoder list size.
        #[arg(long, default_value_t = 8)]
        list: usize,
        /// Reliability order: pw, ga:<snr_db> or file:<path>.
        #[arg(long, default_value = "pw")]
        order: String,
        /// Codewords per candidate `s`.
        #[arg(long, default_value_t = 10_000)]
        blocks: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Optimize p, calibrate s and allocate k_i for an MLC scheme.
    Design {
        #[command(flatten)]
        scheme: SchemeArgs,
        /// Operating SNR in dB.
        #[arg(long, allow_hyphen_values = true)]
        snr_db: String,
        /// Target overall BLER.
        #[arg(long, default_value_t = 1e-3)]
        target_bler: f64,
        /// Required total information bits; defaults to the template's.
        #[arg(long)]
        total_bits: Option<usize>,
        /// Blocks per rate-allocation candidate.
        #[arg(long, default_value_t = 20_000)]
        blocks: usize,
        /// Codewords per calibration candidate.
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        /// Monte-Carlo samples for rate estimates.
        #[arg(long, default_value_t = psmlc::rates::DEFAULT_SAMPLES)]
        rate_samples: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Block error rate sweep of one scheme.
    Bler {
        #[command(flatten)]
        scheme: SchemeArgs,
        /// SNR grid in dB, `start:step:stop`.
        #[arg(long, allow_hyphen_values = true)]
        snr_db: String,
        /// Block budget per point.
        #[arg(long, default_value_t = 100_000)]
        blocks: usize,
        /// Block errors after which a point stops.
        #[arg(long, default_value_t = sim::DEFAULT_MAX_ERRORS)]
        max_errors: usize,
        /// Stop a point once its 95% upper bound is below this BLER.
        #[arg(long, default_value_t = 0.0)]
        bler_floor: f64,
        /// Transmit without noise.
        #[arg(long)]
        zero_noise: bool,
        #[arg(long, default_value = "rayleigh")]
        fading: Fading,
        #[command(flatten)]
        common: Common,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Infeasible(_) => 3,
        _ => 2,
    }
}

fn parse_list(spec: &str) -> Result<Vec<f64>, Error> {
    if spec.contains(':') {
        return Ok(SnrGrid::parse(spec)?.points().to_vec());
    }
    spec.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| Error::InvalidArgument(format!("bad number {s:?}"))))
        .collect()
}

fn experiment(command: Command, scheme: Option<String>, snr_db: Vec<f64>, blocks: usize, common: &Common) -> ExperimentConfig {
    ExperimentConfig {
        command,
        scheme,
        snr_db,
        blocks,
        seed: common.seed,
        params: BTreeMap::new(),
        workers: common.workers.unwrap_or_else(rayon::current_num_threads),
        out: common.out.clone(),
    }
}

fn with_pool<T>(workers: usize, f: impl FnOnce() -> Result<T, Error> + Send) -> Result<T, Error>
where
    T: Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start {workers} workers: {e}")))?;
    pool.install(f)
}

fn out_path(common: &Common, default: &str) -> PathBuf {
    common.out.clone().unwrap_or_else(|| PathBuf::from(default))
}

fn report(out: &Path, sidecar: &Path) {
    println!("wrote {} and {}", out.display(), sidecar.display());
}

fn run(cmd: Cmd) -> Result<(), Error> {
    let started = Instant::now();
    match cmd {
        Cmd::Rates { snr_db, m, curves, blocks, target_rate, fading, common } => {
            let grid = SnrGrid::parse(&snr_db)?;
            let curves: Vec<RateCurve> = if curves.is_empty() {
                RateCurve::ALL.to_vec()
            } else {
                curves.iter().map(|c| c.parse()).collect::<Result<_, _>>()?
            };
            let mut cfg = experiment(Command::Rates, None, grid.points().to_vec(), blocks, &common);
            cfg.params.insert("m".into(), m.to_string());
            cfg.params.insert("fading".into(), fading.to_string());
            cfg.params.insert("curves".into(), curves.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(","));
            if let Some(t) = target_rate {
                cfg.params.insert("target_rate".into(), t.to_string());
            }
            cfg.validate()?;
            let (points, crossings) = with_pool(cfg.workers, || {
                let samples = McSamples::new(blocks, fading, common.seed)?;
                let points = run_rates(m, &grid, &curves, &samples)?;
                let mut crossings = BTreeMap::new();
                if let Some(t) = target_rate {
                    let (lo, hi) = (grid.points()[0], *grid.points().last().unwrap());
                    for &c in &curves {
                        let x = rate_crossing(c, m, t, lo, hi, &samples).ok();
                        crossings.insert(c.to_string(), x);
                    }
                }
                Ok((points, crossings))
            })?;
            let hash = cfg.hash();
            let csv = rates_csv(m, &points, &hash, cfg.seed);
            print!("{csv}");
            for (c, x) in &crossings {
                match x {
                    Some(db) => println!("{c} reaches {} bits/use at {db:.3} dB", target_rate.unwrap()),
                    None => println!("{c} does not cross {} bits/use on the grid", target_rate.unwrap()),
                }
            }
            let out = out_path(&common, "rates.csv");
            let side = RunRecord::new(&cfg, started, (&points, &crossings)).write(&out, &csv)?;
            report(&out, &side);
        }
        Cmd::Calibrate { p, n, list, order, blocks, common } => {
            let p_grid = parse_list(&p)?;
            let mut order: OrderSource = order.parse()?;
            if let Some(path) = std::env::var_os(sim::RELIABILITY_FILE_ENV).filter(|p| !p.is_empty()) {
                order = OrderSource::LoadedSequence(path.into());
            }
            let mut cfg = experiment(Command::Calibrate, None, vec![0.0], blocks, &common);
            cfg.params.insert("p".into(), format!("{p_grid:?}"));
            cfg.params.insert("n".into(), n.to_string());
            cfg.params.insert("list".into(), list.to_string());
            cfg.params.insert("order".into(), order.to_string());
            cfg.validate()?;
            let runs = with_pool(cfg.workers, || run_calibrate(n, &p_grid, &order, list, blocks, common.seed))?;
            let csv = calibrate_csv(&runs, &cfg.hash(), cfg.seed);
            for r in &runs {
                println!("p = {}: s* = {}", r.p, r.calibration.s_star);
            }
            let out = out_path(&common, "calibrate.csv");
            let side = RunRecord::new(&cfg, started, &runs).write(&out, &csv)?;
            report(&out, &side);
        }
        Cmd::Design { scheme, snr_db, target_bler, total_bits, blocks, trials, rate_samples, common } => {
            let template = load_scheme(scheme.preset.as_deref(), scheme.config.as_deref())?;
            let grid = SnrGrid::parse(&snr_db)?;
            let [operating_snr_db] = grid.points() else {
                return Err(Error::InvalidArgument("design takes a single operating SNR".into()));
            };
            let mut cfg =
                experiment(Command::Design, Some(template.to_config_string()), grid.points().to_vec(), blocks, &common);
            cfg.params.insert("target_bler".into(), target_bler.to_string());
            cfg.params.insert("trials".into(), trials.to_string());
            cfg.params.insert("rate_samples".into(), rate_samples.to_string());
            cfg.validate()?;
            let req = DesignRequest {
                total_bits: total_bits.unwrap_or_else(|| template.total_info_bits()),
                template,
                operating_snr_db: *operating_snr_db,
                target_bler,
                calibration_trials: trials,
                allocation: AllocationOptions { blocks, seed: common.seed, fading: Fading::Rayleigh, rate_samples },
            };
            cfg.params.insert("total_bits".into(), req.total_bits.to_string());
            let outcome = with_pool(cfg.workers, || run_design(&req))?;
            let text = outcome.design.to_config_string();
            print!("{text}");
            for l in &outcome.allocation.levels {
                println!("# level {}: seed k = {}, k = {}, {} evaluations", l.level, l.seed_k, l.k, l.evaluations.len());
            }
            let out = out_path(&common, "design.cfg");
            let side = RunRecord::new(&cfg, started, outcome.report()).write(&out, &text)?;
            report(&out, &side);
        }
        Cmd::Bler { scheme, snr_db, blocks, max_errors, bler_floor, zero_noise, fading, common } => {
            let design = load_scheme(scheme.preset.as_deref(), scheme.config.as_deref())?;
            let grid = SnrGrid::parse(&snr_db)?;
            let mut cfg =
                experiment(Command::Bler, Some(design.to_config_string()), grid.points().to_vec(), blocks, &common);
            cfg.params.insert("max_errors".into(), max_errors.to_string());
            cfg.params.insert("bler_floor".into(), bler_floor.to_string());
            cfg.params.insert("zero_noise".into(), zero_noise.to_string());
            cfg.params.insert("fading".into(), fading.to_string());
            cfg.validate()?;
            let opts = BlerOptions { max_blocks: blocks, max_errors, bler_floor, seed: common.seed, fading, zero_noise };
            let tr = Transceiver::new(&design)?;
            let points = with_pool(cfg.workers, || run_bler(&tr, &grid, &opts))?;
            let csv = bler_csv(&design.kind.to_string(), &points, &cfg.hash(), cfg.seed);
            print!("{csv}");
            for target in [1e-2, 1e-3] {
                if let Some(db) = snr_at_bler(&points, target) {
                    println!("BLER {target:e} reached at {db:.3} dB");
                }
            }
            let out = out_path(&common, "bler.csv");
            let side = RunRecord::new(&cfg, started, &points).write(&out, &csv)?;
            report(&out, &side);
        }
    }
    Ok(())
}
