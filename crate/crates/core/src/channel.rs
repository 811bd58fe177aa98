//! Real-valued block fading channel `y = h ⊙ x + w` with receiver CSI.
//!
//! SNR is `γ = E[X²] / E[W²]`, so the noise variance follows the symbol pmf
//! rather than a normalized constellation.

use crate::error::{invalid, Result};
use crate::modem::SymbolPmf;
use crate::rng::Stream;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fading {
    /// i.i.d. Rayleigh amplitudes with `E[H²] = 1`.
    Rayleigh,
    Awgn,
}

impl fmt::Display for Fading {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Fading::Rayleigh => "rayleigh",
            Fading::Awgn => "awgn",
        })
    }
}

impl FromStr for Fading {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rayleigh" => Ok(Fading::Rayleigh),
            "awgn" => Ok(Fading::Awgn),
            other => invalid(format!("unknown fading model '{other}'")),
        }
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelConfig {
    snr: f64,
    fading: Fading,
    seed: u64,
}

impl ChannelConfig {
    pub fn new(snr_linear: f64, fading: Fading, seed: u64) -> Result<Self> {
        if !(snr_linear > 0.0) {
            return invalid(format!("SNR must be positive, got {snr_linear}"));
        }
        Ok(Self { snr: snr_linear, fading, seed })
    }

    pub fn from_db(snr_db: f64, fading: Fading, seed: u64) -> Result<Self> {
        Self::new(db_to_linear(snr_db), fading, seed)
    }

    pub fn snr(&self) -> f64 {
        self.snr
    }
    pub fn snr_db(&self) -> f64 {
        linear_to_db(self.snr)
    }
    pub fn fading(&self) -> Fading {
        self.fading
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Received block with the fading known to the receiver.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelBatch {
    pub y: Vec<f64>,
    pub h: Vec<f64>,
    pub noise_var: f64,
}

impl ChannelBatch {
    pub fn len(&self) -> usize {
        self.y.len()
    }
    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// `σ² = E[X²] / γ`.
pub fn noise_variance(pmf: &SymbolPmf, snr_linear: f64) -> Result<f64> {
    if !(snr_linear > 0.0) {
        return invalid(format!("SNR must be positive, got {snr_linear}"));
    }
    Ok(pmf.second_moment() / snr_linear)
}

/// Pass `x` through the channel using draws from `rng`.
pub fn transmit_with(x: &[f64], noise_var: f64, fading: Fading, rng: &mut Stream) -> ChannelBatch {
    let sigma = noise_var.sqrt();
    let mut y = Vec::with_capacity(x.len());
    let mut h = Vec::with_capacity(x.len());
    for &xi in x {
        let hi = match fading {
            Fading::Rayleigh => rng.rayleigh(),
            Fading::Awgn => 1.0,
        };
        h.push(hi);
        y.push(hi * xi + sigma * rng.gaussian());
    }
    ChannelBatch { y, h, noise_var }
}

/// Reproducible transmission on stream 0 of `cfg.seed`.
pub fn transmit(x: &[f64], cfg: &ChannelConfig, pmf: &SymbolPmf) -> Result<ChannelBatch> {
    if x.is_empty() {
        return invalid("cannot transmit an empty block");
    }
    let nv = noise_variance(pmf, cfg.snr())?;
    Ok(transmit_with(x, nv, cfg.fading(), &mut Stream::new(cfg.seed(), 0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noise_variance_examples() {
        let u = SymbolPmf::uniform(4).unwrap();
        assert!((noise_variance(&u, 1.0).unwrap() - 85.0).abs() < 1e-12);
        let s = SymbolPmf::sbs(4, 0.75).unwrap();
        assert!((noise_variance(&s, 1.0).unwrap() - 53.0).abs() < 1e-12);
        assert!(noise_variance(&u, 1e12).unwrap() < 1e-10);
        assert!(noise_variance(&u, 0.0).is_err());
        assert!(noise_variance(&u, -1.0).is_err());
    }

    #[test]
    fn noiseless_awgn_is_transparent() {
        let u = SymbolPmf::uniform(4).unwrap();
        let cfg = ChannelConfig::new(1e300, Fading::Awgn, 3).unwrap();
        let x: Vec<f64> = (-7..=7).step_by(2).map(|v| v as f64).collect();
        let b = transmit(&x, &cfg, &u).unwrap();
        assert!(b.h.iter().all(|&h| h == 1.0));
        for (a, b) in b.y.iter().zip(&x) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn fixed_seed_is_bit_identical() {
        let u = SymbolPmf::uniform(2).unwrap();
        let cfg = ChannelConfig::from_db(5.0, Fading::Rayleigh, 42).unwrap();
        let x = vec![1.0, -3.0, 3.0, -1.0, 1.0];
        assert_eq!(transmit(&x, &cfg, &u).unwrap(), transmit(&x, &cfg, &u).unwrap());
        let other = ChannelConfig::from_db(5.0, Fading::Rayleigh, 43).unwrap();
        assert_ne!(transmit(&x, &cfg, &u).unwrap(), transmit(&x, &other, &u).unwrap());
        assert!(transmit(&[], &cfg, &u).is_err());
    }

    #[test]
    fn fading_and_noise_moments() {
        let n = 1_000_000;
        let pmf = SymbolPmf::uniform(1).unwrap();
        let cfg = ChannelConfig::new(0.5, Fading::Rayleigh, 9).unwrap();
        let x = vec![0.0; n];
        let b = transmit(&x, &cfg, &pmf).unwrap();
        let h2: Vec<f64> = b.h.iter().map(|h| h * h).collect();
        let w2: Vec<f64> = b.y.iter().map(|y| y * y / b.noise_var).collect();
        for (v, var) in [(h2, 1.0), (w2, 2.0)] {
            // Var[H²] = 1 for an Exp(1) power, Var[Z²] = 2 for a standard normal
            let mean = v.iter().sum::<f64>() / n as f64;
            let se = (var / n as f64).sqrt();
            assert!((mean - 1.0).abs() < 3.0 * se, "{mean}");
        }
        assert!(b.h.iter().all(|&h| h >= 0.0));
    }

    #[test]
    fn parsing_and_db() {
        assert_eq!("Rayleigh".parse::<Fading>().unwrap(), Fading::Rayleigh);
        assert_eq!(Fading::Awgn.to_string().parse::<Fading>().unwrap(), Fading::Awgn);
        assert!("rician".parse::<Fading>().is_err());
        assert!((db_to_linear(10.0) - 10.0).abs() < 1e-12);
        assert!((linear_to_db(100.0) - 20.0).abs() < 1e-12);
        assert!(ChannelConfig::new(0.0, Fading::Awgn, 0).is_err());
    }
}
