//! Polar codes: transform, code specification, encoder and list decoder.

mod crc;
mod decoder;
mod reliability;

pub use crc::{crc_attach, crc_check, crc_matches, CrcSpec};
pub use decoder::{clip_llr, penalty, CheckNode, SclDecoder, SclOutput, LLR_CLIP};
pub use reliability::{
    build_reliability_order, ga_mean_llrs, load_sequence_file, parse_sequence, OrderSource,
    ReliabilityOrder,
};

use crate::error::{invalid, Result};
use crate::rng::FrozenBitStream;

/// In-place `c = uG` over GF(2), `G` the natural-order Kronecker power of `[[1,0],[1,1]]`.
pub fn polar_transform_in_place(bits: &mut [u8]) -> Result<()> {
    let n = bits.len();
    if n == 0 || !n.is_power_of_two() {
        return invalid(format!("length {n} is not a power of two"));
    }
    let mut half = 1;
    while half < n {
        for block in bits.chunks_exact_mut(2 * half) {
            let (a, b) = block.split_at_mut(half);
            for (x, y) in a.iter_mut().zip(b.iter()) {
                *x ^= *y;
            }
        }
        half *= 2;
    }
    Ok(())
}

pub fn polar_transform(u: &[u8]) -> Result<Vec<u8>> {
    let mut c = u.to_vec();
    polar_transform_in_place(&mut c)?;
    Ok(c)
}

/// Role of a bit-channel index.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BitRole {
    Info,
    Frozen,
    Shaping,
}

/// A polar code of length `n` with information, frozen and shaping index sets.
///
/// Information bits occupy `info_set` in ascending index order; the same holds
/// for shaping bits. Frozen values come from a [`FrozenBitStream`] seeded with
/// `frozen_seed`, one bit per frozen index in ascending order.
#[derive(Clone, Debug, PartialEq)]
pub struct PolarCodeSpec {
    n: usize,
    info_set: Vec<usize>,
    frozen_set: Vec<usize>,
    shaping_set: Vec<usize>,
    frozen_seed: u64,
    roles: Vec<BitRole>,
    frozen_values: Vec<u8>,
}

impl PolarCodeSpec {
    /// Builds a spec from explicit sets; every index must appear in exactly one set.
    pub fn new(
        n: usize,
        info_set: Vec<usize>,
        frozen_set: Vec<usize>,
        shaping_set: Vec<usize>,
        frozen_seed: u64,
    ) -> Result<Self> {
        if n < 2 || !n.is_power_of_two() {
            return invalid(format!("block length {n} is not a power of two >= 2"));
        }
        let mut roles = vec![None; n];
        for (set, role) in [
            (&info_set, BitRole::Info),
            (&frozen_set, BitRole::Frozen),
            (&shaping_set, BitRole::Shaping),
        ] {
            for &i in set {
                if i >= n {
                    return invalid(format!("index {i} out of range for n={n}"));
                }
                if roles[i].is_some() {
                    return invalid(format!("index {i} appears in more than one set"));
                }
                roles[i] = Some(role);
            }
        }
        if roles.iter().any(Option::is_none) {
            return invalid("index sets do not cover 0..n");
        }
        let roles: Vec<BitRole> = roles.into_iter().map(Option::unwrap).collect();
        let sorted = |mut v: Vec<usize>| {
            v.sort_unstable();
            v
        };
        let info_set = sorted(info_set);
        let frozen_set = sorted(frozen_set);
        let shaping_set = sorted(shaping_set);
        let mut stream = FrozenBitStream::new(frozen_seed);
        let mut frozen_values = vec![0u8; n];
        for &i in &frozen_set {
            frozen_values[i] = stream.next_bit();
        }
        Ok(Self { n, info_set, frozen_set, shaping_set, frozen_seed, roles, frozen_values })
    }

    /// Shaping set = the `s` most reliable indices, information set = the next
    /// `k` most reliable, frozen = the rest.
    pub fn from_order(order: &ReliabilityOrder, k: usize, s: usize, frozen_seed: u64) -> Result<Self> {
        let n = order.n();
        if k + s > n {
            return invalid(format!("k={k} plus s={s} exceeds n={n}"));
        }
        let o = order.order();
        Self::new(n, o[s..s + k].to_vec(), o[s + k..].to_vec(), o[..s].to_vec(), frozen_seed)
    }

    /// Replaces the frozen values with an explicit pattern (used by tests and
    /// by precoder trials that draw frozen bits at random).
    pub fn with_frozen_values(mut self, values: &[u8]) -> Result<Self> {
        if values.len() != self.frozen_set.len() {
            return invalid("frozen value count does not match the frozen set");
        }
        for (&i, &v) in self.frozen_set.iter().zip(values) {
            self.frozen_values[i] = v & 1;
        }
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn info_set(&self) -> &[usize] {
        &self.info_set
    }
    pub fn frozen_set(&self) -> &[usize] {
        &self.frozen_set
    }
    pub fn shaping_set(&self) -> &[usize] {
        &self.shaping_set
    }
    pub fn frozen_seed(&self) -> u64 {
        self.frozen_seed
    }
    pub fn roles(&self) -> &[BitRole] {
        &self.roles
    }
    /// Length-`n` vector holding the frozen value at each frozen index, 0 elsewhere.
    pub fn frozen_values(&self) -> &[u8] {
        &self.frozen_values
    }

    /// Mask of positions known to the receiver (the frozen set).
    pub fn frozen_mask(&self) -> Vec<bool> {
        self.roles.iter().map(|&r| r == BitRole::Frozen).collect()
    }

    /// Assemble `u` from info and shaping bits.
    pub fn assemble(&self, info: &[u8], shaping_bits: &[u8]) -> Result<Vec<u8>> {
        if info.len() != self.info_set.len() {
            return invalid(format!(
                "expected {} info bits, got {}",
                self.info_set.len(),
                info.len()
            ));
        }
        if shaping_bits.len() != self.shaping_set.len() {
            return invalid(format!(
                "expected {} shaping bits, got {}",
                self.shaping_set.len(),
                shaping_bits.len()
            ));
        }
        let mut u = self.frozen_values.clone();
        for (&i, &b) in self.info_set.iter().zip(info) {
            u[i] = b & 1;
        }
        for (&i, &b) in self.shaping_set.iter().zip(shaping_bits) {
            u[i] = b & 1;
        }
        Ok(u)
    }

    pub fn extract_info(&self, u: &[u8]) -> Vec<u8> {
        self.info_set.iter().map(|&i| u[i]).collect()
    }

    pub fn extract_shaping(&self, u: &[u8]) -> Vec<u8> {
        self.shaping_set.iter().map(|&i| u[i]).collect()
    }
}

/// Encode: place info at I, shaping bits at S, frozen stream at F, then transform.
pub fn encode(info: &[u8], spec: &PolarCodeSpec, shaping_bits: &[u8]) -> Result<Vec<u8>> {
    let mut u = spec.assemble(info, shaping_bits)?;
    polar_transform_in_place(&mut u)?;
    Ok(u)
}

/// Output of [`scl_decode`].
#[derive(Clone, Debug, PartialEq)]
pub struct DecodeResult {
    pub info: Vec<u8>,
    pub shaping: Vec<u8>,
    pub success: bool,
}

/// Decode with a reusable decoder: shaping and information positions are both
/// unknowns; with a CRC the best CRC-passing path over the info bits is chosen.
pub fn scl_decode_with(
    decoder: &mut SclDecoder,
    channel_llrs: &[f64],
    spec: &PolarCodeSpec,
    crc: Option<&CrcSpec>,
) -> Result<(DecodeResult, SclOutput)> {
    if channel_llrs.len() != spec.n() {
        return invalid(format!(
            "expected {} channel LLRs, got {}",
            spec.n(),
            channel_llrs.len()
        ));
    }
    if decoder.block_len() != spec.n() {
        return invalid("decoder block length does not match the code");
    }
    let known = spec.frozen_mask();
    let mut scratch = Vec::with_capacity(spec.info_set().len());
    let out = decoder.decode(channel_llrs, &known, spec.frozen_values(), |u| match crc {
        None => true,
        Some(c) => {
            scratch.clear();
            scratch.extend(spec.info_set().iter().map(|&i| u[i]));
            crc_matches(&scratch, c)
        }
    })?;
    let res = DecodeResult {
        info: spec.extract_info(&out.u),
        shaping: spec.extract_shaping(&out.u),
        success: out.passed,
    };
    Ok((res, out))
}

pub fn scl_decode(
    channel_llrs: &[f64],
    spec: &PolarCodeSpec,
    list_size: usize,
    crc: Option<&CrcSpec>,
) -> Result<DecodeResult> {
    let mut dec = SclDecoder::new(spec.n(), list_size)?;
    scl_decode_with(&mut dec, channel_llrs, spec, crc).map(|(r, _)| r)
}
