//! Scheme parameter sets and their `key = value` text form.
//!
//! ```text
//! # comments and blank lines are ignored
//! scheme = smlc            # umlc | smlc | ubicm | sbicm
//! m = 4                    # bits per symbol
//! n_c = 256                # channel uses per block
//! labeling = shifted-nbc   # nbc | shifted-nbc | gray
//! p = 0.75                 # target ones probability of the shaped level
//! s = 56                   # shaping bits
//! k = 24,112,197,179       # info bits per level (one value for BICM)
//! z = 4,4,4,4              # CRC width per level (one value for BICM)
//! order = pw               # pw | ga:<snr_db> | file:<path>
//! list_size = 8
//! precoder_list_size = 8
//! frozen_seed = 1
//! check_node = minsum      # minsum | exact
//! operating_snr_db = 16.5  # optional
//! ```

use crate::error::{Error, Result};
use crate::modem::{LabelingKind, MAX_BITS_PER_SYMBOL};
use crate::polar::{CheckNode, CrcSpec, OrderSource};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    UMlc,
    SMlc,
    UBicm,
    SBicm,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 4] =
        [SchemeKind::UMlc, SchemeKind::SMlc, SchemeKind::UBicm, SchemeKind::SBicm];

    pub fn is_mlc(self) -> bool {
        matches!(self, SchemeKind::UMlc | SchemeKind::SMlc)
    }

    pub fn is_shaped(self) -> bool {
        matches!(self, SchemeKind::SMlc | SchemeKind::SBicm)
    }

    pub fn labeling(self) -> LabelingKind {
        match self {
            SchemeKind::UMlc => LabelingKind::Nbc,
            SchemeKind::SMlc => LabelingKind::ShiftedNbc,
            SchemeKind::UBicm | SchemeKind::SBicm => LabelingKind::Gray,
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SchemeKind::UMlc => "umlc",
            SchemeKind::SMlc => "smlc",
            SchemeKind::UBicm => "ubicm",
            SchemeKind::SBicm => "sbicm",
        })
    }
}

impl FromStr for SchemeKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "umlc" => Ok(SchemeKind::UMlc),
            "smlc" => Ok(SchemeKind::SMlc),
            "ubicm" => Ok(SchemeKind::UBicm),
            "sbicm" => Ok(SchemeKind::SBicm),
            other => Err(Error::InvalidArgument(format!("unknown scheme '{other}'"))),
        }
    }
}

/// Full parameterization of one transmission scheme.
#[derive(Clone, Debug, PartialEq)]
pub struct SchemeDesign {
    pub kind: SchemeKind,
    pub m: usize,
    pub n_c: usize,
    pub labeling: LabelingKind,
    pub p: f64,
    pub s: usize,
    /// Info bits per level (MLC) or a single entry (BICM).
    pub k: Vec<usize>,
    /// CRC widths, same layout as `k`.
    pub z: Vec<usize>,
    pub order: OrderSource,
    pub list_size: usize,
    pub precoder_list_size: usize,
    pub frozen_seed: u64,
    pub check_node: CheckNode,
    pub operating_snr_db: Option<f64>,
}

const UMLC: &str = include_str!("../../../../presets/umlc.cfg");
const SMLC: &str = include_str!("../../../../presets/smlc.cfg");
const UBICM: &str = include_str!("../../../../presets/ubicm.cfg");
const SBICM: &str = include_str!("../../../../presets/sbicm.cfg");

impl SchemeDesign {
    /// One of the four shipped parameter sets.
    pub fn preset(kind: SchemeKind) -> SchemeDesign {
        let text = match kind {
            SchemeKind::UMlc => UMLC,
            SchemeKind::SMlc => SMLC,
            SchemeKind::UBicm => UBICM,
            SchemeKind::SBicm => SBICM,
        };
        text.parse().expect("shipped presets are valid")
    }

    pub fn preset_by_name(name: &str) -> Result<SchemeDesign> {
        Ok(Self::preset(name.parse()?))
    }

    pub fn total_info_bits(&self) -> usize {
        self.k.iter().sum()
    }

    /// Info bits per channel use.
    pub fn rate(&self) -> f64 {
        self.total_info_bits() as f64 / self.n_c as f64
    }

    /// Length of each polar code.
    pub fn code_len(&self) -> usize {
        if self.kind.is_mlc() {
            self.n_c
        } else {
            self.m * self.n_c
        }
    }

    /// CRC for each entry of `z`.
    pub fn crc_specs(&self) -> Result<Vec<Option<CrcSpec>>> {
        self.z.iter().map(|&w| CrcSpec::for_width(w)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.m == 0 || self.m > MAX_BITS_PER_SYMBOL {
            return bad(format!("m = {} outside 1..={MAX_BITS_PER_SYMBOL}", self.m));
        }
        if self.n_c < 2 || !self.n_c.is_power_of_two() {
            return bad(format!("n_c = {} is not a power of two >= 2", self.n_c));
        }
        if self.labeling != self.kind.labeling() {
            return bad(format!("{} uses {} labeling, got {}", self.kind, self.kind.labeling(), self.labeling));
        }
        if self.list_size == 0 || self.precoder_list_size == 0 {
            return bad("list sizes must be >= 1".into());
        }
        if self.kind.is_shaped() {
            if !(self.p > 0.5 && self.p < 1.0) {
                return bad(format!("shaped scheme needs 0.5 < p < 1, got {}", self.p));
            }
        } else if self.p != 0.5 || self.s != 0 {
            return bad(format!("{} requires p = 0.5 and s = 0", self.kind));
        }
        let entries = if self.kind.is_mlc() { self.m } else { 1 };
        if self.k.len() != entries || self.z.len() != entries {
            return bad(format!("{} needs {entries} entries in k and z", self.kind));
        }
        self.crc_specs()?;
        if self.kind.is_mlc() {
            for i in 0..self.m {
                let used = self.k[i] + self.z[i] + if i + 1 == self.m { self.s } else { 0 };
                if used > self.n_c {
                    return bad(format!("level {} needs {used} > n_c = {} positions", i + 1, self.n_c));
                }
            }
            if self.kind.is_shaped() && self.m < 2 {
                return bad("shaped MLC needs m >= 2".into());
            }
        } else {
            let n = self.m * self.n_c;
            if !n.is_power_of_two() {
                return bad(format!("BICM code length m*n_c = {n} is not a power of two"));
            }
            if self.k[0] + self.z[0] + self.s > n {
                return bad(format!("k + z + s exceeds the code length {n}"));
            }
            if self.kind.is_shaped() && self.m < 2 {
                return bad("shaped BICM needs m >= 2".into());
            }
        }
        Ok(())
    }

    pub fn to_config_string(&self) -> String {
        let join = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let mut out = format!(
            "scheme = {}\nm = {}\nn_c = {}\nlabeling = {}\np = {}\ns = {}\nk = {}\nz = {}\norder = {}\n\
             list_size = {}\nprecoder_list_size = {}\nfrozen_seed = {}\ncheck_node = {}\n",
            self.kind,
            self.m,
            self.n_c,
            self.labeling,
            self.p,
            self.s,
            join(&self.k),
            join(&self.z),
            self.order,
            self.list_size,
            self.precoder_list_size,
            self.frozen_seed,
            self.check_node,
        );
        if let Some(snr) = self.operating_snr_db {
            out.push_str(&format!("operating_snr_db = {snr}\n"));
        }
        out
    }
}

impl fmt::Display for SchemeDesign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_config_string())
    }
}

const KEYS: [&str; 14] = [
    "scheme",
    "m",
    "n_c",
    "labeling",
    "p",
    "s",
    "k",
    "z",
    "order",
    "list_size",
    "precoder_list_size",
    "frozen_seed",
    "check_node",
    "operating_snr_db",
];

impl FromStr for SchemeDesign {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut entries: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(Error::Config { line, msg: format!("expected key = value, got '{content}'") });
            };
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(Error::Config { line, msg: format!("unknown key '{key}'") });
            }
            if entries.insert(key, (line, value)).is_some() {
                return Err(Error::Config { line, msg: format!("duplicate key '{key}'") });
            }
        }
        let last_line = text.lines().count().max(1);

        fn field<T: FromStr>(
            entries: &BTreeMap<&str, (usize, &str)>,
            key: &str,
            last_line: usize,
        ) -> Result<T>
        where
            T::Err: fmt::Display,
        {
            let (line, value) = entries
                .get(key)
                .copied()
                .ok_or_else(|| Error::Config { line: last_line, msg: format!("missing key '{key}'") })?;
            value
                .parse()
                .map_err(|e| Error::Config { line, msg: format!("bad value for '{key}': {e}") })
        }
        fn list(entries: &BTreeMap<&str, (usize, &str)>, key: &str, last_line: usize) -> Result<Vec<usize>> {
            let (line, value) = entries
                .get(key)
                .copied()
                .ok_or_else(|| Error::Config { line: last_line, msg: format!("missing key '{key}'") })?;
            value
                .split(',')
                .map(|v| {
                    v.trim()
                        .parse()
                        .map_err(|e| Error::Config { line, msg: format!("bad entry '{}' in '{key}': {e}", v.trim()) })
                })
                .collect()
        }

        let design = SchemeDesign {
            kind: field(&entries, "scheme", last_line)?,
            m: field(&entries, "m", last_line)?,
            n_c: field(&entries, "n_c", last_line)?,
            labeling: field(&entries, "labeling", last_line)?,
            p: field(&entries, "p", last_line)?,
            s: field(&entries, "s", last_line)?,
            k: list(&entries, "k", last_line)?,
            z: list(&entries, "z", last_line)?,
            order: field(&entries, "order", last_line)?,
            list_size: field(&entries, "list_size", last_line)?,
            precoder_list_size: field(&entries, "precoder_list_size", last_line)?,
            frozen_seed: field(&entries, "frozen_seed", last_line)?,
            check_node: field(&entries, "check_node", last_line)?,
            operating_snr_db: match entries.get("operating_snr_db") {
                Some(_) => Some(field(&entries, "operating_snr_db", last_line)?),
                None => None,
            },
        };
        design.validate().map_err(|e| match e {
            Error::InvalidArgument(msg) => Error::Config { line: 0, msg },
            other => other,
        })?;
        Ok(design)
    }
}
