//! Bit-channel reliability orders.
//!
//! Three sources are supported:
//!
//! * a sequence file (plain text, header `n=<length>`, then one index per
//!   line, most reliable first; `#` comments and blank lines are ignored).
//!   A file for length `N` serves every `n <= N` by keeping the indices below
//!   `n` in their original relative order.
//! * density evolution under the Gaussian approximation for a binary-input
//!   AWGN channel at a design SNR (`Es/σ²`, in dB).
//! * the polarization-weight order `w(i) = Σ_j b_j 2^{j/4}`, an SNR-free
//!   nested order of the kind used by 5G NR.
//!
//! All orders refer to the natural-order transform, where index `n-1` is the
//! most reliable bit-channel.

use crate::error::{invalid, Error, Result};
use std::fmt;
use std::io::{self, ErrorKind};
use std::path::{Path, PathBuf};

#[derive(Clone, Debug, PartialEq)]
pub enum OrderSource {
    LoadedSequence(PathBuf),
    GaussianApproximation { design_snr_db: f64 },
    PolarizationWeight,
}

impl fmt::Display for OrderSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OrderSource::LoadedSequence(p) => write!(f, "file:{}", p.display()),
            OrderSource::GaussianApproximation { design_snr_db } => write!(f, "ga:{design_snr_db}"),
            OrderSource::PolarizationWeight => write!(f, "pw"),
        }
    }
}

impl std::str::FromStr for OrderSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "pw" {
            Ok(OrderSource::PolarizationWeight)
        } else if let Some(rest) = s.strip_prefix("ga:") {
            let design_snr_db = rest
                .trim()
                .parse()
                .map_err(|_| Error::Format(format!("bad design snr in order source {s:?}")))?;
            Ok(OrderSource::GaussianApproximation { design_snr_db })
        } else if let Some(rest) = s.strip_prefix("file:") {
            Ok(OrderSource::LoadedSequence(PathBuf::from(rest.trim())))
        } else {
            Err(Error::Format(format!("unknown order source {s:?} (pw | ga:<snr_db> | file:<path>)")))
        }
    }
}

/// Bit-channel indices from most to least reliable.
#[derive(Clone, Debug, PartialEq)]
pub struct ReliabilityOrder {
    n: usize,
    order: Vec<usize>,
    source: OrderSource,
}

impl ReliabilityOrder {
    pub fn from_permutation(order: Vec<usize>, source: OrderSource) -> Result<Self> {
        let n = order.len();
        if n < 2 || !n.is_power_of_two() {
            return invalid(format!("order length {n} is not a power of two >= 2"));
        }
        let mut seen = vec![false; n];
        for &i in &order {
            if i >= n || seen[i] {
                return Err(Error::Format(format!("order is not a permutation (entry {i})")));
            }
            seen[i] = true;
        }
        Ok(Self { n, order, source })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn source(&self) -> &OrderSource {
        &self.source
    }

    /// Position of each index in the order (0 = most reliable).
    pub fn ranks(&self) -> Vec<usize> {
        let mut r = vec![0; self.n];
        for (rank, &i) in self.order.iter().enumerate() {
            r[i] = rank;
        }
        r
    }

    /// Serialize in the sequence-file format.
    pub fn to_file_string(&self) -> String {
        let mut s = format!("n={}\n", self.n);
        for i in &self.order {
            s.push_str(&i.to_string());
            s.push('\n');
        }
        s
    }
}

/// Build the reliability order of length `n` from `source`.
pub fn build_reliability_order(n: usize, source: &OrderSource) -> Result<ReliabilityOrder> {
    if n < 2 || !n.is_power_of_two() {
        return invalid(format!("block length {n} is not a power of two >= 2"));
    }
    match source {
        OrderSource::LoadedSequence(path) => {
            let full = load_sequence_file(path)?;
            if full.len() < n {
                return Err(Error::Io(io::Error::new(
                    ErrorKind::UnexpectedEof,
                    format!("sequence file {} has length {} < {n}", path.display(), full.len()),
                )));
            }
            let order: Vec<usize> = full.into_iter().filter(|&i| i < n).collect();
            ReliabilityOrder::from_permutation(order, source.clone())
        }
        OrderSource::GaussianApproximation { design_snr_db } => {
            let means = ga_mean_llrs(n, *design_snr_db);
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| means[b].total_cmp(&means[a]).then(b.cmp(&a)));
            ReliabilityOrder::from_permutation(order, source.clone())
        }
        OrderSource::PolarizationWeight => {
            let beta = 2f64.powf(0.25);
            let weight = |i: usize| -> f64 {
                (0..usize::BITS).filter(|j| (i >> j) & 1 == 1).map(|j| beta.powi(j as i32)).sum()
            };
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| weight(b).total_cmp(&weight(a)).then(b.cmp(&a)));
            ReliabilityOrder::from_permutation(order, source.clone())
        }
    }
}

/// Parse a sequence file and return its full order.
pub fn load_sequence_file(path: &Path) -> Result<Vec<usize>> {
    let text = std::fs::read_to_string(path)?;
    parse_sequence(&text)
}

pub fn parse_sequence(text: &str) -> Result<Vec<usize>> {
    let mut lines = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty());
    let header = lines.next().ok_or_else(|| Error::Format("empty sequence file".into()))?;
    let n: usize = header
        .strip_prefix("n=")
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| Error::Format(format!("expected header `n=<length>`, got {header:?}")))?;
    if n < 2 || !n.is_power_of_two() {
        return Err(Error::Format(format!("header length {n} is not a power of two >= 2")));
    }
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for l in lines {
        let i: usize = l
            .parse()
            .map_err(|_| Error::Format(format!("bad sequence entry {l:?}")))?;
        if i >= n {
            return Err(Error::Format(format!("entry {i} out of range for n={n}")));
        }
        if seen[i] {
            return Err(Error::Format(format!("duplicate entry {i}")));
        }
        seen[i] = true;
        order.push(i);
    }
    if order.len() != n {
        return Err(Error::Io(io::Error::new(
            ErrorKind::UnexpectedEof,
            format!("sequence has {} entries, header says {n}", order.len()),
        )));
    }
    Ok(order)
}

/// Chung's φ approximation used by Gaussian-approximation density evolution.
fn phi(x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else if x < 10.0 {
        (-0.4527 * x.powf(0.86) + 0.0218).exp()
    } else {
        (std::f64::consts::PI / x).sqrt() * (-x / 4.0).exp() * (1.0 - 10.0 / (7.0 * x))
    }
}

fn phi_inv(y: f64) -> f64 {
    if y >= 1.0 {
        return 0.0;
    }
    if y <= 0.0 {
        return f64::INFINITY;
    }
    if y >= phi(10.0) {
        return ((0.0218 - y.ln()) / 0.4527).powf(1.0 / 0.86);
    }
    // φ is decreasing; bracket and bisect on the asymptotic branch
    let (mut lo, mut hi) = (10.0, 20.0);
    while phi(hi) > y {
        lo = hi;
        hi *= 2.0;
        if hi > 1e12 {
            return hi;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if phi(mid) > y {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Mean LLR of each bit-channel under the Gaussian approximation.
pub fn ga_mean_llrs(n: usize, design_snr_db: f64) -> Vec<f64> {
    let m = n.trailing_zeros();
    let m0 = 2.0 * 10f64.powf(design_snr_db / 10.0);
    (0..n)
        .map(|i| {
            let mut z = m0;
            for stage in (0..m).rev() {
                if (i >> stage) & 1 == 1 {
                    z *= 2.0;
                } else {
                    let t = phi(z);
                    z = phi_inv(1.0 - (1.0 - t) * (1.0 - t));
                }
            }
            z
        })
        .collect()
}
