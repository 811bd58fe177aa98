//! Encode and decode chains for MLC and BICM.

use super::config::SchemeDesign;
use crate::channel::ChannelBatch;
use crate::error::{invalid, Result};
use crate::modem::{Demapper, Labeling, SymbolPmf};
use crate::polar::{
    build_reliability_order, crc_attach, encode, polar_transform_in_place, scl_decode_with,
    CrcSpec, PolarCodeSpec, ReliabilityOrder, SclDecoder,
};
use crate::rates::sbs_pmf;
use crate::rng::Stream;
use crate::shaping::{Precoder, ShapedPositionMask, ShapingConfig};
use rand::seq::SliceRandom;

const INTERLEAVER_TAG: u64 = 0x494C_5652;

/// Seeded permutation: `apply(x)[t] = x[perm[t]]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Interleaver {
    perm: Vec<usize>,
}

impl Interleaver {
    pub fn new(len: usize, seed: u64) -> Self {
        let mut perm: Vec<usize> = (0..len).collect();
        perm.shuffle(Stream::for_unit(seed, INTERLEAVER_TAG, 0).inner());
        Self { perm }
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }
    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }
    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    pub fn apply<T: Copy>(&self, x: &[T]) -> Vec<T> {
        self.perm.iter().map(|&i| x[i]).collect()
    }

    pub fn invert<T: Copy + Default>(&self, y: &[T]) -> Vec<T> {
        let mut x = vec![T::default(); y.len()];
        for (t, &i) in self.perm.iter().enumerate() {
            x[i] = y[t];
        }
        x
    }
}

/// Output of one encode.
#[derive(Clone, Debug, PartialEq)]
pub struct Encoded {
    pub symbols: Vec<f64>,
    /// Label word of each symbol.
    pub labels: Vec<u32>,
    /// Polar codewords: one per level for MLC, a single word for BICM.
    pub codewords: Vec<Vec<u8>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Decoded {
    pub info: Vec<u8>,
    /// Every CRC passed.
    pub success: bool,
    /// CRC outcome per code.
    pub crc_ok: Vec<bool>,
}

/// Per-worker mutable state.
pub struct Workspace {
    decoder: SclDecoder,
    precoder: Option<Precoder>,
    llrs: Vec<f64>,
}

/// Immutable chain for one [`SchemeDesign`]; share it across workers and
/// give each worker its own [`Workspace`].
#[derive(Clone, Debug)]
pub struct Transceiver {
    design: SchemeDesign,
    labeling: Labeling,
    pmf: SymbolPmf,
    demapper: Demapper,
    specs: Vec<PolarCodeSpec>,
    crcs: Vec<Option<CrcSpec>>,
    shaping: Option<(ShapingConfig, ShapedPositionMask)>,
    /// Level (1-based) carrying the shaped bits.
    shaped_level: Option<usize>,
}

pub(crate) fn attach(payload: &[u8], crc: Option<&CrcSpec>) -> Result<Vec<u8>> {
    match crc {
        None => Ok(payload.to_vec()),
        // a zero-init CRC of an empty payload is all zeros
        Some(c) if payload.is_empty() => Ok(vec![0; c.width as usize]),
        Some(c) => crc_attach(payload, c),
    }
}

impl Transceiver {
    pub fn new(design: &SchemeDesign) -> Result<Self> {
        design.validate()?;
        let order = build_reliability_order(design.code_len(), &design.order)?;
        Self::with_order(design, &order)
    }

    /// Build with an already constructed reliability order of length `code_len`.
    pub fn with_order(design: &SchemeDesign, order: &ReliabilityOrder) -> Result<Self> {
        design.validate()?;
        if order.n() != design.code_len() {
            return invalid(format!("order has length {}, code needs {}", order.n(), design.code_len()));
        }
        let labeling = Labeling::new(design.labeling, design.m)?;
        let shaped_level = if design.kind.is_shaped() { labeling.inner_level() } else { None };
        let pmf = match shaped_level {
            Some(_) => sbs_pmf(&labeling, design.p)?,
            None => SymbolPmf::uniform(design.m)?,
        };
        let crcs = design.crc_specs()?;
        let n = design.code_len();
        let mut specs = Vec::new();
        let mut shaping = None;
        if design.kind.is_mlc() {
            for i in 0..design.m {
                let s_i = if shaped_level == Some(i + 1) { design.s } else { 0 };
                specs.push(PolarCodeSpec::from_order(
                    order,
                    design.k[i] + design.z[i],
                    s_i,
                    design.frozen_seed.wrapping_add(i as u64),
                )?);
            }
            if shaped_level.is_some() {
                let cfg = ShapingConfig::new(design.p, design.s, design.precoder_list_size)?;
                shaping = Some((cfg, ShapedPositionMask::full(n)));
            }
        } else {
            specs.push(PolarCodeSpec::from_order(order, design.k[0] + design.z[0], design.s, design.frozen_seed)?);
            if shaped_level.is_some() {
                let cfg = ShapingConfig::new(design.p, design.s, design.precoder_list_size)?;
                shaping = Some((cfg, ShapedPositionMask::block(n, n - design.n_c..n)?));
            }
        }
        Ok(Self {
            design: design.clone(),
            demapper: Demapper::new(&labeling, &pmf)?,
            labeling,
            pmf,
            specs,
            crcs,
            shaping,
            shaped_level,
        })
    }

    pub fn design(&self) -> &SchemeDesign {
        &self.design
    }
    pub fn labeling(&self) -> &Labeling {
        &self.labeling
    }
    /// Symbol distribution assumed by transmitter power and demapper.
    pub fn pmf(&self) -> &SymbolPmf {
        &self.pmf
    }
    pub fn specs(&self) -> &[PolarCodeSpec] {
        &self.specs
    }
    pub fn shaped_level(&self) -> Option<usize> {
        self.shaped_level
    }
    pub fn demapper(&self) -> &Demapper {
        &self.demapper
    }

    /// `σ² = E[X²] / γ` under the design pmf.
    pub fn noise_variance(&self, snr_linear: f64) -> Result<f64> {
        crate::channel::noise_variance(&self.pmf, snr_linear)
    }

    pub fn workspace(&self) -> Result<Workspace> {
        let n = self.design.code_len();
        Ok(Workspace {
            decoder: SclDecoder::with_check_node(n, self.design.list_size, self.design.check_node)?,
            precoder: match &self.shaping {
                Some((cfg, _)) => Some(Precoder::new(n, cfg)?),
                None => None,
            },
            llrs: vec![0.0; n],
        })
    }

    /// Encode `info` (`Σ k` bits). `block_seed` selects the BICM interleaver.
    pub fn encode(&self, ws: &mut Workspace, info: &[u8], block_seed: u64) -> Result<Encoded> {
        if info.len() != self.design.total_info_bits() {
            return invalid(format!(
                "expected {} info bits, got {}",
                self.design.total_info_bits(),
                info.len()
            ));
        }
        let (m, n_c) = (self.design.m, self.design.n_c);
        let mut labels = vec![0u32; n_c];
        let mut codewords = Vec::with_capacity(self.specs.len());
        if self.design.kind.is_mlc() {
            let mut off = 0;
            for i in 0..m {
                let payload = &info[off..off + self.design.k[i]];
                off += self.design.k[i];
                let c = self.encode_level(ws, i + 1, payload)?;
                for (l, &b) in labels.iter_mut().zip(&c) {
                    *l |= (b as u32) << i;
                }
                codewords.push(c);
            }
        } else {
            let word = attach(info, self.crcs[0].as_ref())?;
            let c = match (&self.shaping, ws.precoder.as_mut()) {
                (Some((cfg, mask)), Some(pre)) => pre.encode(&word, &self.specs[0], cfg, mask)?,
                _ => encode(&word, &self.specs[0], &[])?,
            };
            let layout = self.bicm_layout(block_seed);
            for (slot, &pos) in layout.iter().enumerate() {
                let (lv, t) = (slot / n_c, slot % n_c);
                labels[t] |= (c[pos] as u32) << lv;
            }
            codewords.push(c);
        }
        let symbols = labels.iter().map(|&l| self.labeling.symbol_for_label(l) as f64).collect();
        Ok(Encoded { symbols, labels, codewords })
    }

    /// Codeword of MLC level `level` (1-based) carrying `payload`.
    pub fn encode_level(&self, ws: &mut Workspace, level: usize, payload: &[u8]) -> Result<Vec<u8>> {
        let i = level - 1;
        let word = attach(payload, self.crcs[i].as_ref())?;
        match (&self.shaping, self.shaped_level == Some(level), ws.precoder.as_mut()) {
            (Some((cfg, mask)), true, Some(pre)) => pre.encode(&word, &self.specs[i], cfg, mask),
            _ => encode(&word, &self.specs[i], &[]),
        }
    }

    /// Codeword index placed at `(level, t)`, flattened level-major.
    ///
    /// BICM interleaves the whole codeword. With shaping, the last `n_c`
    /// codeword positions go to the shaped level in order and only the rest
    /// is interleaved over the other levels.
    pub fn bicm_layout(&self, block_seed: u64) -> Vec<usize> {
        let (m, n_c) = (self.design.m, self.design.n_c);
        let n = m * n_c;
        match self.shaped_level {
            None => Interleaver::new(n, block_seed).permutation().to_vec(),
            Some(sl) => {
                let pi = Interleaver::new(n - n_c, block_seed);
                let mut rest = pi.permutation().iter().copied();
                let mut layout = Vec::with_capacity(n);
                for lv in 1..=m {
                    if lv == sl {
                        layout.extend(n - n_c..n);
                    } else {
                        layout.extend(rest.by_ref().take(n_c));
                    }
                }
                layout
            }
        }
    }

    pub fn decode(&self, ws: &mut Workspace, batch: &ChannelBatch, block_seed: u64) -> Result<Decoded> {
        let n_c = self.design.n_c;
        if batch.len() != n_c || batch.h.len() != n_c {
            return invalid(format!("expected {n_c} received symbols, got {}", batch.len()));
        }
        if self.design.kind.is_mlc() {
            self.decode_mlc(ws, batch)
        } else {
            self.decode_bicm(ws, batch, block_seed)
        }
    }

    /// MLC decode where levels below `level` use the genie labels and only
    /// `level` is decoded. Returns the decoded payload of that level and its
    /// CRC outcome.
    pub fn decode_level_genie(
        &self,
        ws: &mut Workspace,
        batch: &ChannelBatch,
        level: usize,
        true_labels: &[u32],
    ) -> Result<(Vec<u8>, bool)> {
        if !self.design.kind.is_mlc() || level == 0 || level > self.design.m {
            return invalid("genie decoding applies to MLC levels only");
        }
        let (payload, ok, _) = self.decode_one_level(ws, batch, level, true_labels)?;
        Ok((payload, ok))
    }

    fn decode_one_level(
        &self,
        ws: &mut Workspace,
        batch: &ChannelBatch,
        level: usize,
        decided: &[u32],
    ) -> Result<(Vec<u8>, bool, Vec<u8>)> {
        let i = level - 1;
        for t in 0..self.design.n_c {
            ws.llrs[t] =
                self.demapper
                    .llr_multistage(batch.y[t], batch.h[t], batch.noise_var, decided[t], level)?;
        }
        let (res, out) = scl_decode_with(&mut ws.decoder, &ws.llrs, &self.specs[i], self.crcs[i].as_ref())?;
        let mut c = out.u;
        polar_transform_in_place(&mut c)?;
        let mut payload = res.info;
        payload.truncate(self.design.k[i]);
        Ok((payload, res.success, c))
    }

    fn decode_mlc(&self, ws: &mut Workspace, batch: &ChannelBatch) -> Result<Decoded> {
        let mut decided = vec![0u32; self.design.n_c];
        let mut info = Vec::with_capacity(self.design.total_info_bits());
        let mut crc_ok = Vec::with_capacity(self.design.m);
        for level in 1..=self.design.m {
            let (payload, ok, c) = self.decode_one_level(ws, batch, level, &decided)?;
            for (d, &b) in decided.iter_mut().zip(&c) {
                *d |= (b as u32) << (level - 1);
            }
            info.extend(payload);
            crc_ok.push(ok);
        }
        Ok(Decoded { success: crc_ok.iter().all(|&b| b), info, crc_ok })
    }

    fn decode_bicm(&self, ws: &mut Workspace, batch: &ChannelBatch, block_seed: u64) -> Result<Decoded> {
        let (m, n_c) = (self.design.m, self.design.n_c);
        let layout = self.bicm_layout(block_seed);
        let mut sym = vec![0.0; m];
        for t in 0..n_c {
            self.demapper.llrs_independent(batch.y[t], batch.h[t], batch.noise_var, &mut sym)?;
            for lv in 0..m {
                ws.llrs[layout[lv * n_c + t]] = sym[lv];
            }
        }
        let (res, _) = scl_decode_with(&mut ws.decoder, &ws.llrs, &self.specs[0], self.crcs[0].as_ref())?;
        let mut info = res.info;
        info.truncate(self.design.k[0]);
        Ok(Decoded { info, success: res.success, crc_ok: vec![res.success] })
    }
}
