//! Adaptive-size CCM: the quantizer depth follows the number of pending bits.
//!
//! At channel use `n` the transmitter quantizes the chaotic sample of the
//! pending bits `b_ε … b_n` with `q_n = n − ε + 1` bits and sends
//! `s_n = Γ₀·2^{q_n}·(z_n^Q − 1/2)`. The receiver keeps one accumulated
//! squared-distance metric per leaf of the bit tree rooted at `b_ε` and
//! computes exact per-bit posteriors from them. Reliable leading bits are
//! released and fed back, which shortens the queue on both sides.
//!
//! Between feedback resets the code is a growing tree, so the exhaustive
//! leaf search is the exact ML/MAP receiver.

use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::maps::{BitPrefix, MapModel};
use crate::reliability::{hard_decision, reliable_prefix_len, DecisionLog, Release};

/// Default cap on the encoder queue.
pub const DEFAULT_Q_MAX: usize = 20;
/// Hard upper bound on `q_max`; the receiver holds `2^q_max` leaves.
pub const Q_MAX_LIMIT: usize = 24;

/// Transmitted symbol for a queue of bits when nothing has been released,
/// straight from the quantizer definition.
pub fn symbol_for_prefix(model: &MapModel, gamma0: f64, prefix: &BitPrefix) -> Result<f64> {
    let q = prefix.len();
    let idx = model.cell_index(prefix)?;
    let level = model.quantized_level(idx, q)?;
    Ok(gamma0 * (1u64 << q) as f64 * (level - 0.5))
}

/// Symbol tables `s(pattern, q)` for every depth up to `q_max`, built on
/// first use and shareable between threads.
#[derive(Debug)]
pub struct SizeCodebook {
    model: MapModel,
    gamma0: f64,
    q_max: usize,
    tables: Vec<OnceLock<Box<[f64]>>>,
}

impl SizeCodebook {
    pub fn new(model: MapModel, gamma0: f64, q_max: usize) -> Result<Self> {
        if !(gamma0 > 0.0 && gamma0.is_finite()) {
            return Err(Error::InvalidParameter(format!("gamma0 must be positive, got {gamma0}")));
        }
        if q_max == 0 || q_max > Q_MAX_LIMIT {
            return Err(Error::InvalidParameter(format!("q_max must be in 1..={Q_MAX_LIMIT}, got {q_max}")));
        }
        Ok(SizeCodebook { model, gamma0, q_max, tables: (0..=q_max).map(|_| OnceLock::new()).collect() })
    }

    pub fn model(&self) -> &MapModel {
        &self.model
    }

    pub fn gamma0(&self) -> f64 {
        self.gamma0
    }

    pub fn q_max(&self) -> usize {
        self.q_max
    }

    /// `Γ_q = Γ₀·2^q`.
    pub fn gamma(&self, q: usize) -> f64 {
        self.gamma0 * (1u64 << q) as f64
    }

    /// Symbols at depth `q`, indexed by bit pattern (oldest bit most significant).
    pub fn table(&self, q: usize) -> &[f64] {
        self.tables[q].get_or_init(|| {
            if q == 0 {
                return vec![0.0].into_boxed_slice();
            }
            let scale = self.gamma(q);
            (0..1u64 << q)
                .map(|p| {
                    let idx = self.model.cell_index_of_pattern(p);
                    scale * (self.model.level_unchecked(idx, q) - 0.5)
                })
                .collect()
        })
    }
}

impl SizeCodebook {
    /// Average symbol energy over all `2^q` patterns at depth `q`.
    pub fn mean_energy(&self, q: usize) -> f64 {
        let t = self.table(q);
        t.iter().map(|s| s * s).sum::<f64>() / t.len() as f64
    }
}

/// Transmitter state: the pending-bit queue and the feedback pointer `ε`.
#[derive(Debug, Clone)]
pub struct SizeEncoder {
    codebook: Arc<SizeCodebook>,
    pattern: u64,
    len: usize,
    epsilon: usize,
}

impl SizeEncoder {
    pub fn new(codebook: Arc<SizeCodebook>) -> Self {
        SizeEncoder { codebook, pattern: 0, len: 0, epsilon: 1 }
    }

    pub fn queue_len(&self) -> usize {
        self.len
    }

    pub fn epsilon(&self) -> usize {
        self.epsilon
    }

    pub fn queue(&self) -> BitPrefix {
        BitPrefix::from_pattern(self.pattern, self.len)
    }

    /// Pushes `b_n` and returns `s_n`.
    pub fn encode_step(&mut self, new_bit: u8) -> Result<f64> {
        if new_bit > 1 {
            return Err(Error::InvalidBit(new_bit));
        }
        if self.len + 1 > self.codebook.q_max {
            return Err(Error::QueueOverflow { len: self.len + 1, q_max: self.codebook.q_max });
        }
        self.pattern = (self.pattern << 1) | u64::from(new_bit);
        self.len += 1;
        Ok(self.current_symbol())
    }

    /// Retransmits the current queue without a new bit (block flush).
    pub fn hold_step(&self) -> Result<f64> {
        if self.len == 0 {
            return Err(Error::EmptyPrefix);
        }
        Ok(self.current_symbol())
    }

    fn current_symbol(&self) -> f64 {
        self.codebook.table(self.len)[self.pattern as usize]
    }

    /// Drops the `count` oldest bits after feedback.
    pub fn discard(&mut self, count: usize) {
        assert!(count <= self.len, "cannot discard {count} of {} bits", self.len);
        self.len -= count;
        self.pattern &= low_mask(self.len);
        self.epsilon += count;
    }
}

/// Receiver state: one metric per leaf of the pending-bit tree.
#[derive(Debug, Clone)]
pub struct SizeDecoder {
    codebook: Arc<SizeCodebook>,
    sigma2: f64,
    pe_res: f64,
    q: usize,
    metrics: Vec<f64>,
    llrs: Vec<f64>,
    log: DecisionLog,
}

impl SizeDecoder {
    pub fn new(codebook: Arc<SizeCodebook>, sigma2: f64, pe_res: f64) -> Result<Self> {
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::InvalidParameter(format!("noise variance must be positive, got {sigma2}")));
        }
        if !(pe_res > 0.0 && pe_res < 0.5) {
            return Err(Error::InvalidParameter(format!("pe_res must be in (0, 0.5), got {pe_res}")));
        }
        Ok(SizeDecoder { codebook, sigma2, pe_res, q: 0, metrics: vec![0.0], llrs: Vec::new(), log: DecisionLog::new() })
    }

    pub fn depth(&self) -> usize {
        self.q
    }

    /// Leaf metrics indexed by bit pattern.
    pub fn metrics(&self) -> &[f64] {
        &self.metrics
    }

    /// Per-pending-bit LLRs, oldest first.
    pub fn llrs(&self) -> &[f64] {
        &self.llrs
    }

    pub fn log(&self) -> &DecisionLog {
        &self.log
    }

    pub fn epsilon(&self) -> usize {
        self.log.epsilon()
    }

    /// Bit pattern of the minimum-metric leaf.
    pub fn best_leaf(&self) -> u64 {
        let mut best = 0;
        for (p, &m) in self.metrics.iter().enumerate() {
            if m < self.metrics[best] {
                best = p;
            }
        }
        best as u64
    }

    /// Doubles the leaf set for a newly encoded bit.
    pub fn extend(&mut self) -> Result<()> {
        if self.q + 1 > self.codebook.q_max {
            return Err(Error::QueueOverflow { len: self.q + 1, q_max: self.codebook.q_max });
        }
        let mut next = Vec::with_capacity(self.metrics.len() * 2);
        for &m in &self.metrics {
            next.push(m);
            next.push(m);
        }
        self.metrics = next;
        self.q += 1;
        Ok(())
    }

    /// Accumulates `(r − s(leaf))²` into every leaf and refreshes the LLRs.
    pub fn decoder_update(&mut self, r: f64) -> Result<&[f64]> {
        if !r.is_finite() {
            return Err(Error::NonFiniteSample);
        }
        if self.q == 0 {
            return Err(Error::EmptyPrefix);
        }
        let table = self.codebook.table(self.q);
        for (m, &s) in self.metrics.iter_mut().zip(table) {
            let e = r - s;
            *m += e * e;
        }
        self.log.tick();
        self.refresh_llrs();
        Ok(&self.llrs)
    }

    fn refresh_llrs(&mut self) {
        let q = self.q;
        let inv = 1.0 / (2.0 * self.sigma2);
        self.llrs.clear();
        for j in 0..q {
            let bit = 1usize << (q - 1 - j);
            let (mut min0, mut min1) = (f64::INFINITY, f64::INFINITY);
            for (p, &m) in self.metrics.iter().enumerate() {
                if p & bit == 0 {
                    min0 = min0.min(m);
                } else {
                    min1 = min1.min(m);
                }
            }
            let (mut sum0, mut sum1) = (0.0, 0.0);
            for (p, &m) in self.metrics.iter().enumerate() {
                if p & bit == 0 {
                    sum0 += (-(m - min0) * inv).exp();
                } else {
                    sum1 += (-(m - min1) * inv).exp();
                }
            }
            self.llrs.push((min0 - min1) * inv + sum1.ln() - sum0.ln());
        }
    }

    /// Keeps only the subtree consistent with the released decisions.
    fn reroot(&mut self, decisions: &[u8]) {
        let k = decisions.len();
        if k == 0 {
            return;
        }
        let rest = self.q - k;
        let head = decisions.iter().fold(0usize, |acc, &b| (acc << 1) | usize::from(b));
        let start = head << rest;
        let mut kept = self.metrics[start..start + (1 << rest)].to_vec();
        let min = kept.iter().copied().fold(f64::INFINITY, f64::min);
        for m in &mut kept {
            *m -= min;
        }
        self.metrics = kept;
        self.q = rest;
        self.llrs.drain(..k);
        self.log.release(decisions);
    }

    /// `b̂_n^{n+d−1}` for a pending bit at the current time, or the frozen
    /// released decision.
    pub fn estimate_at_delay(&self, bit_index: usize, delay: usize) -> Result<u8> {
        self.log.estimate_at_delay(&self.llrs, bit_index, delay)
    }
}

/// Releases the maximal reliable prefix of pending bits on both ends of the
/// link and returns the released decisions and the new `ε`.
pub fn reliability_prune(dec: &mut SizeDecoder, enc: &mut SizeEncoder) -> Release {
    let k = reliable_prefix_len(&dec.llrs, dec.pe_res);
    let bits: Vec<u8> = dec.llrs[..k].iter().map(|&l| hard_decision(l)).collect();
    dec.reroot(&bits);
    enc.discard(k);
    debug_assert_eq!(enc.epsilon(), dec.epsilon());
    Release { bits, new_epsilon: dec.epsilon() }
}

fn low_mask(bits: usize) -> u64 {
    if bits >= 64 {
        u64::MAX
    } else {
        (1u64 << bits) - 1
    }
}
