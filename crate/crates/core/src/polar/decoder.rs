//! Successive-cancellation list decoding in the LLR domain.
//!
//! The tree is stored layer by layer: layer `s` holds one node of size `2^s`
//! per path (layer `log2 n` is the channel and is shared by every path).
//! Paths share layer arrays until one of them writes, at which point the
//! array is copied (the lazy-copy scheme of Tal and Vardy). Path metrics use
//! the exact penalty `ln(1 + e^{-|λ|})` added when a decision disagrees with
//! the sign of its LLR; ties in candidate selection go to the lower path index.
//!
//! The transform is taken in natural order: for `u = (a, b)` split in halves,
//! `uG = ((a ⊕ b)G', bG')`.

use crate::error::{invalid, Result};

/// Channel LLRs are clipped to this magnitude before decoding.
pub const LLR_CLIP: f64 = 40.0;

/// Check-node (f) update rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckNode {
    /// `sign(a) sign(b) min(|a|, |b|)`
    MinSum,
    /// `2 atanh(tanh(a/2) tanh(b/2))`, evaluated in a stable form.
    Exact,
}

impl std::fmt::Display for CheckNode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CheckNode::MinSum => "minsum",
            CheckNode::Exact => "exact",
        })
    }
}

impl std::str::FromStr for CheckNode {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "minsum" | "min-sum" => Ok(CheckNode::MinSum),
            "exact" => Ok(CheckNode::Exact),
            other => invalid(format!("unknown check node rule '{other}'")),
        }
    }
}

/// Result of one list decode.
#[derive(Clone, Debug)]
pub struct SclOutput {
    /// Decided input word `u` of the selected path.
    pub u: Vec<u8>,
    /// Path metric of the selected path.
    pub metric: f64,
    /// Whether the selected path satisfied the acceptance predicate.
    pub passed: bool,
}

#[inline]
pub fn clip_llr(x: f64) -> f64 {
    if x.is_nan() {
        0.0
    } else {
        x.clamp(-LLR_CLIP, LLR_CLIP)
    }
}

/// Metric penalty for deciding `bit` at a leaf with LLR `llr`.
#[inline]
pub fn penalty(llr: f64, bit: u8) -> f64 {
    let v = if bit == 0 { llr } else { -llr };
    if v >= 0.0 {
        (-v).exp().ln_1p()
    } else {
        -v + v.exp().ln_1p()
    }
}

/// Penalties for deciding 0 and 1 at a leaf with LLR `llr`.
#[inline]
fn penalty_pair(llr: f64) -> [f64; 2] {
    let a = llr.abs();
    let t = (-a).exp().ln_1p();
    if llr >= 0.0 {
        [t, a + t]
    } else {
        [a + t, t]
    }
}

#[inline]
fn f_minsum(a: f64, b: f64) -> f64 {
    let m = a.abs().min(b.abs());
    if (a < 0.0) != (b < 0.0) {
        -m
    } else {
        m
    }
}

#[inline]
fn f_exact(a: f64, b: f64) -> f64 {
    f_minsum(a, b) + (-(a + b).abs()).exp().ln_1p() - (-(a - b).abs()).exp().ln_1p()
}

/// Reusable SCL decoder for one block length and list size.
///
/// Holds mutable scratch; use one instance per worker thread.
pub struct SclDecoder {
    n: usize,
    m: usize,
    list: usize,
    check: CheckNode,
    chan: Vec<f64>,
    // p[s]: `list` arrays of 2^s LLRs; c[s]: `list` arrays of 2 * 2^s bits.
    p: Vec<Vec<f64>>,
    c: Vec<Vec<u8>>,
    path_array: Vec<Vec<usize>>,
    refcount: Vec<Vec<u32>>,
    free_arrays: Vec<Vec<usize>>,
    free_paths: Vec<usize>,
    active: Vec<bool>,
    metric: Vec<f64>,
    u: Vec<Vec<u64>>,
    cand: Vec<(f64, usize, u8)>,
    keep: Vec<[bool; 2]>,
    next_metric: Vec<[f64; 2]>,
    known_block: Vec<u8>,
    block_word: Vec<u8>,
}

impl SclDecoder {
    pub fn new(n: usize, list_size: usize) -> Result<Self> {
        Self::with_check_node(n, list_size, CheckNode::MinSum)
    }

    pub fn with_check_node(n: usize, list_size: usize, check: CheckNode) -> Result<Self> {
        if n < 2 || !n.is_power_of_two() {
            return invalid(format!("block length {n} is not a power of two >= 2"));
        }
        if list_size == 0 {
            return invalid("list size must be >= 1");
        }
        let m = n.trailing_zeros() as usize;
        let l = list_size;
        Ok(Self {
            n,
            m,
            list: l,
            check,
            chan: vec![0.0; n],
            p: (0..m).map(|s| vec![0.0; l << s]).collect(),
            c: (0..m).map(|s| vec![0u8; l << (s + 1)]).collect(),
            path_array: vec![vec![0; l]; m],
            refcount: vec![vec![0; l]; m],
            free_arrays: vec![Vec::with_capacity(l); m],
            free_paths: Vec::with_capacity(l),
            active: vec![false; l],
            metric: vec![0.0; l],
            u: vec![vec![0u64; n.div_ceil(64)]; l],
            cand: Vec::with_capacity(2 * l),
            keep: vec![[false; 2]; l],
            next_metric: vec![[0.0; 2]; l],
            known_block: vec![0; n],
            block_word: Vec::with_capacity(n),
        })
    }

    pub fn block_len(&self) -> usize {
        self.n
    }

    pub fn list_size(&self) -> usize {
        self.list
    }

    pub fn check_node(&self) -> CheckNode {
        self.check
    }

    fn reset(&mut self) {
        self.free_paths.clear();
        self.free_paths.extend((0..self.list).rev());
        for s in 0..self.m {
            self.free_arrays[s].clear();
            self.free_arrays[s].extend((0..self.list).rev());
            self.refcount[s].iter_mut().for_each(|r| *r = 0);
        }
        self.active.iter_mut().for_each(|a| *a = false);
    }

    fn assign_initial_path(&mut self) -> usize {
        let l = self.free_paths.pop().expect("path pool exhausted");
        self.active[l] = true;
        self.metric[l] = 0.0;
        self.u[l].iter_mut().for_each(|w| *w = 0);
        for s in 0..self.m {
            let a = self.free_arrays[s].pop().expect("array pool exhausted");
            self.path_array[s][l] = a;
            self.refcount[s][a] = 1;
        }
        l
    }

    fn clone_path(&mut self, l: usize) -> usize {
        let nl = self.free_paths.pop().expect("path pool exhausted");
        self.active[nl] = true;
        self.metric[nl] = self.metric[l];
        let (src, dst) = if l < nl {
            let (a, b) = self.u.split_at_mut(nl);
            (&a[l], &mut b[0])
        } else {
            let (a, b) = self.u.split_at_mut(l);
            (&b[0], &mut a[nl])
        };
        dst.copy_from_slice(src);
        for s in 0..self.m {
            let a = self.path_array[s][l];
            self.path_array[s][nl] = a;
            self.refcount[s][a] += 1;
        }
        nl
    }

    fn kill_path(&mut self, l: usize) {
        self.active[l] = false;
        self.free_paths.push(l);
        for s in 0..self.m {
            let a = self.path_array[s][l];
            self.refcount[s][a] -= 1;
            if self.refcount[s][a] == 0 {
                self.free_arrays[s].push(a);
            }
        }
    }

    /// Array index of layer `s` for path `l`, made private to `l` first.
    fn writable(&mut self, s: usize, l: usize) -> usize {
        let a = self.path_array[s][l];
        if self.refcount[s][a] == 1 {
            return a;
        }
        let b = self.free_arrays[s].pop().expect("array pool exhausted");
        let sz = 1usize << s;
        self.p[s].copy_within(a * sz..(a + 1) * sz, b * sz);
        self.c[s].copy_within(2 * a * sz..2 * (a + 1) * sz, 2 * b * sz);
        self.refcount[s][a] -= 1;
        self.refcount[s][b] = 1;
        self.path_array[s][l] = b;
        b
    }

    /// Compute LLRs of the nodes containing `phi` from the deepest still-valid
    /// layer down to layer `bottom`.
    fn calc_llrs(&mut self, l: usize, phi: usize, bottom: usize) {
        let top = if phi == 0 { self.m - 1 } else { phi.trailing_zeros() as usize };
        for s in (bottom..=top).rev() {
            let sz = 1usize << s;
            let dst_a = self.writable(s, l);
            let (lower, upper) = self.p.split_at_mut(s + 1);
            let dst = &mut lower[s][dst_a * sz..(dst_a + 1) * sz];
            let parent: &[f64] = if s + 1 == self.m {
                &self.chan
            } else {
                let pa = self.path_array[s + 1][l];
                &upper[0][pa * 2 * sz..(pa + 1) * 2 * sz]
            };
            let (pa, pb) = parent.split_at(sz);
            if s == top && phi != 0 {
                let left = &self.c[s][2 * dst_a * sz..2 * dst_a * sz + sz];
                for (((d, &a), &b), &u) in dst.iter_mut().zip(pa).zip(pb).zip(left) {
                    *d = if u == 0 { b + a } else { b - a };
                }
            } else {
                match self.check {
                    CheckNode::MinSum => {
                        for ((d, &a), &b) in dst.iter_mut().zip(pa).zip(pb) {
                            *d = f_minsum(a, b);
                        }
                    }
                    CheckNode::Exact => {
                        for ((d, &a), &b) in dst.iter_mut().zip(pa).zip(pb) {
                            *d = f_exact(a, b);
                        }
                    }
                }
            }
        }
    }

    fn set_leaf(&mut self, l: usize, phi: usize, bit: u8) {
        let a = self.writable(0, l);
        self.c[0][2 * a + (phi & 1)] = bit;
        if bit != 0 {
            self.u[l][phi / 64] |= 1u64 << (phi % 64);
        } else {
            self.u[l][phi / 64] &= !(1u64 << (phi % 64));
        }
    }

    /// Propagate partial sums after the node at layer `from` ending at phase
    /// `phi` completed as a right child.
    fn update_partial_sums(&mut self, l: usize, phi: usize, from: usize) {
        let mut s = from;
        while s + 1 < self.m {
            let sz = 1usize << s;
            let child = self.path_array[s][l];
            let node = phi >> (s + 1);
            let parity = node & 1;
            let pa = self.writable(s + 1, l);
            let (lower, upper) = self.c.split_at_mut(s + 1);
            let src = &lower[s][2 * child * sz..2 * (child + 1) * sz];
            let base = 2 * pa * 2 * sz + parity * 2 * sz;
            let (d0, d1) = upper[0][base..base + 2 * sz].split_at_mut(sz);
            let (s0, s1) = src.split_at(sz);
            for ((d, &a), &b) in d0.iter_mut().zip(s0).zip(s1) {
                *d = a ^ b;
            }
            d1.copy_from_slice(s1);
            if parity == 0 {
                break;
            }
            s += 1;
        }
    }

    #[inline]
    fn leaf_llr(&self, l: usize) -> f64 {
        self.p[0][self.path_array[0][l]]
    }

    fn continue_unknown(&mut self, phi: usize) {
        self.cand.clear();
        let mut n_active = 0;
        for l in 0..self.list {
            if self.active[l] {
                n_active += 1;
                let [p0, p1] = penalty_pair(self.leaf_llr(l));
                self.cand.push((self.metric[l] + p0, l, 0));
                self.cand.push((self.metric[l] + p1, l, 1));
            }
        }
        for k in self.keep.iter_mut() {
            *k = [false; 2];
        }
        if 2 * n_active > self.list {
            self.cand.select_nth_unstable_by(self.list - 1, |a, b| {
                a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2))
            });
            self.cand.truncate(self.list);
        }
        for &(pm, l, b) in &self.cand {
            self.keep[l][b as usize] = true;
            self.next_metric[l][b as usize] = pm;
        }
        for l in 0..self.list {
            if self.active[l] && !self.keep[l][0] && !self.keep[l][1] {
                self.kill_path(l);
            }
        }
        for l in 0..self.list {
            if !self.active[l] {
                continue;
            }
            match self.keep[l] {
                [true, true] => {
                    let nl = self.clone_path(l);
                    // the clone is marked so this loop does not revisit it
                    self.keep[nl] = [false, false];
                    self.metric[l] = self.next_metric[l][0];
                    self.set_leaf(l, phi, 0);
                    self.metric[nl] = self.next_metric[l][1];
                    self.set_leaf(nl, phi, 1);
                }
                [true, false] => {
                    self.metric[l] = self.next_metric[l][0];
                    self.set_leaf(l, phi, 0);
                }
                [false, true] => {
                    self.metric[l] = self.next_metric[l][1];
                    self.set_leaf(l, phi, 1);
                }
                [false, false] => {}
            }
        }
    }

    /// Decode `llrs` with bits at positions where `known[i]` is set forced to
    /// `values[i]`. Among the final list, ordered by metric, the first path for
    /// which `accept(u)` holds is returned; if none does, the best path is
    /// returned with `passed = false`.
    pub fn decode(
        &mut self,
        llrs: &[f64],
        known: &[bool],
        values: &[u8],
        mut accept: impl FnMut(&[u8]) -> bool,
    ) -> Result<SclOutput> {
        let n = self.n;
        if llrs.len() != n || known.len() != n || values.len() != n {
            return invalid(format!(
                "decoder expects length {n}, got llrs={}, known={}, values={}",
                llrs.len(),
                known.len(),
                values.len()
            ));
        }
        for (d, &x) in self.chan.iter_mut().zip(llrs) {
            *d = clip_llr(x);
        }
        self.reset();
        self.assign_initial_path();

        self.find_known_blocks(known);
        let mut phi = 0;
        while phi < n {
            let s = self.known_block[phi] as usize;
            if s > 0 {
                self.decode_known_block(phi, s, values);
                phi += 1 << s;
                continue;
            }
            for l in 0..self.list {
                if self.active[l] {
                    self.calc_llrs(l, phi, 0);
                }
            }
            if known[phi] {
                let v = values[phi] & 1;
                for l in 0..self.list {
                    if self.active[l] {
                        let llr = self.leaf_llr(l);
                        self.metric[l] += penalty(llr, v);
                        self.set_leaf(l, phi, v);
                    }
                }
            } else {
                self.continue_unknown(phi);
            }
            if phi & 1 == 1 {
                for l in 0..self.list {
                    if self.active[l] {
                        self.update_partial_sums(l, phi, 0);
                    }
                }
            }
            phi += 1;
        }

        let mut order: Vec<usize> = (0..self.list).filter(|&l| self.active[l]).collect();
        order.sort_by(|&a, &b| self.metric[a].total_cmp(&self.metric[b]).then(a.cmp(&b)));
        let mut word = vec![0u8; n];
        for &l in &order {
            self.unpack(l, known, values, &mut word);
            if accept(&word) {
                return Ok(SclOutput { u: word, metric: self.metric[l], passed: true });
            }
        }
        let best = order[0];
        self.unpack(best, known, values, &mut word);
        Ok(SclOutput { u: word, metric: self.metric[best], passed: false })
    }

    fn unpack(&self, l: usize, known: &[bool], values: &[u8], out: &mut [u8]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = if known[i] {
                values[i] & 1
            } else {
                ((self.u[l][i / 64] >> (i % 64)) & 1) as u8
            };
        }
    }

    /// For each phase, the layer of the largest all-known node starting there
    /// (0 when none is larger than a single leaf). Capped below the root.
    fn find_known_blocks(&mut self, known: &[bool]) {
        let n = self.n;
        self.known_block.iter_mut().for_each(|b| *b = 0);
        for s in 1..self.m {
            let sz = 1usize << s;
            for start in (0..n).step_by(sz) {
                if self.known_block[start] as usize == s - 1
                    && self.known_block[start + sz / 2] as usize == s - 1
                    && (s > 1 || (known[start] && known[start + 1]))
                {
                    self.known_block[start] = s as u8;
                }
            }
        }
    }

    /// Decode an all-known node of layer `s` starting at phase `phi`.
    ///
    /// The node's codeword `x` is the transform of the known bits, and the
    /// path metric grows by `Σ penalty(α_i, x_i)` over the node LLRs `α`.
    fn decode_known_block(&mut self, phi: usize, s: usize, values: &[u8]) {
        let sz = 1usize << s;
        self.block_word.clear();
        self.block_word.extend(values[phi..phi + sz].iter().map(|v| v & 1));
        let mut half = 1;
        while half < sz {
            for block in self.block_word.chunks_exact_mut(2 * half) {
                let (a, b) = block.split_at_mut(half);
                for (x, y) in a.iter_mut().zip(b.iter()) {
                    *x ^= *y;
                }
            }
            half *= 2;
        }
        let parity = (phi >> s) & 1;
        let end = phi + sz - 1;
        for l in 0..self.list {
            if !self.active[l] {
                continue;
            }
            self.calc_llrs(l, phi, s);
            let a = self.writable(s, l);
            let alpha = &self.p[s][a * sz..(a + 1) * sz];
            let mut pm = 0.0;
            for (&llr, &x) in alpha.iter().zip(&self.block_word) {
                pm += penalty(llr, x);
            }
            self.metric[l] += pm;
            let base = 2 * a * sz + parity * sz;
            self.c[s][base..base + sz].copy_from_slice(&self.block_word);
            if parity == 1 {
                self.update_partial_sums(l, end, s);
            }
        }
    }
}
