//! Adaptive-bandwidth CCM.
//!
//! Each pending bit occupies its own orthogonal real dimension. A bit `b` of
//! age `i` is carried by the `i`-th sample of one of two reference chaotic
//! trajectories, started from complementary itineraries `u0` and `u1 = ū0`.
//! The receiver accumulates, per pending bit, the squared distance of its
//! dimension to both trajectories; their difference is the bit LLR.

use std::collections::VecDeque;
use std::sync::Arc;

use crate::special::erfc;
use rand::Rng;

use crate::error::{Error, Result};
use crate::maps::{BitPrefix, MapKind, MapModel};
use crate::reliability::{hard_decision, reliable_prefix_len, DecisionLog, Release};

/// Default length of the reference itineraries.
pub const DEFAULT_TRAJ_LEN: usize = 1000;
/// Default maximum run length for the Bernoulli-shift reference sequence.
pub const DEFAULT_RUN_LIMIT: usize = 5;

/// The two precomputed reference trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct RefTrajectories {
    model: MapModel,
    u0: BitPrefix,
    u1: BitPrefix,
    traj0: Vec<f64>,
    traj1: Vec<f64>,
    tx0: Vec<f64>,
    tx1: Vec<f64>,
    normalized: bool,
    run_limit: Option<usize>,
}

/// Random reference itinerary of `len` bits. With a run limit, a drawn bit
/// that would extend a run past the limit is flipped.
pub fn random_itinerary<R: Rng + ?Sized>(len: usize, run_limit: Option<usize>, rng: &mut R) -> Result<BitPrefix> {
    if run_limit == Some(0) {
        return Err(Error::InvalidParameter("run limit must be at least 1".into()));
    }
    let mut bits = Vec::with_capacity(len);
    let mut run = 0usize;
    for _ in 0..len {
        let mut b: u8 = rng.random_range(0..2);
        let last = bits.last().copied();
        if let (Some(limit), Some(prev)) = (run_limit, last) {
            if b == prev && run >= limit {
                b = 1 - b;
            }
        }
        run = if Some(b) == last { run + 1 } else { 1 };
        bits.push(b);
    }
    BitPrefix::new(bits)
}

/// Draws `u0` and builds both reference trajectories symbolically.
pub fn gen_initial_conditions<R: Rng + ?Sized>(
    model: MapModel,
    len: usize,
    run_limit: Option<usize>,
    normalized: bool,
    rng: &mut R,
) -> Result<RefTrajectories> {
    if len <= model.eval_width {
        return Err(Error::InvalidParameter(format!("trajectory length {len} must exceed the eval width {}", model.eval_width)));
    }
    let u0 = random_itinerary(len, run_limit, rng)?;
    RefTrajectories::from_itinerary(model, u0, normalized, run_limit)
}

impl RefTrajectories {
    pub fn from_itinerary(model: MapModel, u0: BitPrefix, normalized: bool, run_limit: Option<usize>) -> Result<Self> {
        let len = u0.len();
        let w = model.eval_width;
        if len <= w {
            return Err(Error::InvalidParameter(format!("trajectory length {len} must exceed the eval width {w}")));
        }
        let u1 = u0.complement();
        let steps = len - w;
        let traj0 = (0..steps).map(|j| model.trajectory_sample(&u0, j)).collect::<Result<Vec<_>>>()?;
        let traj1 = (0..steps).map(|j| model.trajectory_sample(&u1, j)).collect::<Result<Vec<_>>>()?;
        let scale = |z: f64| if normalized { 2.0 * z - 1.0 } else { z };
        let tx0 = traj0.iter().map(|&z| scale(z)).collect();
        let tx1 = traj1.iter().map(|&z| scale(z)).collect();
        Ok(RefTrajectories { model, u0, u1, traj0, traj1, tx0, tx1, normalized, run_limit })
    }

    pub fn model(&self) -> &MapModel {
        &self.model
    }

    pub fn u0(&self) -> &BitPrefix {
        &self.u0
    }

    pub fn u1(&self) -> &BitPrefix {
        &self.u1
    }

    /// Raw chaotic samples `f^j(z^(b))`, `j = 0 … N−W−1`.
    pub fn trajectory(&self, bit: u8) -> &[f64] {
        if bit == 0 {
            &self.traj0
        } else {
            &self.traj1
        }
    }

    pub fn normalized(&self) -> bool {
        self.normalized
    }

    pub fn run_limit(&self) -> Option<usize> {
        self.run_limit
    }

    /// Largest bit age that still has a trajectory sample.
    pub fn max_age(&self) -> usize {
        self.traj0.len() - 1
    }

    /// Transmitted value for a bit of the given age.
    #[inline]
    pub fn symbol(&self, bit: u8, age: usize) -> f64 {
        if bit == 0 {
            self.tx0[age]
        } else {
            self.tx1[age]
        }
    }

    /// Squared distance between the two transmitted trajectories over ages `1..=d`.
    pub fn de2(&self, d: usize) -> Result<f64> {
        if d > self.max_age() {
            return Err(Error::TrajectoryExhausted { age: d, usable: self.max_age() });
        }
        Ok((1..=d).map(|j| (self.tx1[j] - self.tx0[j]).powi(2)).sum())
    }

    /// `d_E²(d)` for every `d` up to `d_max`, starting at `d = 0`.
    pub fn de2_curve(&self, d_max: usize) -> Result<Vec<f64>> {
        if d_max > self.max_age() {
            return Err(Error::TrajectoryExhausted { age: d_max, usable: self.max_age() });
        }
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(d_max + 1);
        out.push(0.0);
        for j in 1..=d_max {
            acc += (self.tx1[j] - self.tx0[j]).powi(2);
            out.push(acc);
        }
        Ok(out)
    }
}

/// Exact single-bit error probability `½·erfc(d_E / (2√(2σ²)))`.
pub fn error_prob_exact(de2: f64, sigma2: f64) -> Result<f64> {
    if !(de2 >= 0.0) || !(sigma2 > 0.0) {
        return Err(Error::InvalidParameter(format!("need dE2 >= 0 and sigma2 > 0, got {de2}, {sigma2}")));
    }
    Ok(0.5 * erfc(de2.sqrt() / (2.0 * (2.0 * sigma2).sqrt())))
}

/// Default run limit for a map: only the Bernoulli shift needs one.
pub fn default_run_limit(kind: MapKind, m_r: usize) -> Option<usize> {
    matches!(kind, MapKind::Bsm).then_some(m_r)
}

#[derive(Debug, Clone)]
pub struct BwEncoder {
    refs: Arc<RefTrajectories>,
    queue: VecDeque<u8>,
    epsilon: usize,
    time: usize,
}

impl BwEncoder {
    pub fn new(refs: Arc<RefTrajectories>) -> Self {
        BwEncoder { refs, queue: VecDeque::new(), epsilon: 1, time: 0 }
    }

    pub fn queue_len(&self) -> usize {
        self.queue.len()
    }

    pub fn epsilon(&self) -> usize {
        self.epsilon
    }

    /// Pushes `b_n` and returns `s_n`, components ordered by increasing bit age
    /// (component `i` carries the bit of age `i` while data is flowing).
    pub fn encode_step(&mut self, new_bit: u8) -> Result<Vec<f64>> {
        if new_bit > 1 {
            return Err(Error::InvalidBit(new_bit));
        }
        self.queue.push_back(new_bit);
        self.transmit()
    }

    /// One channel use without a new bit (block flush).
    pub fn hold_step(&mut self) -> Result<Vec<f64>> {
        if self.queue.is_empty() {
            return Err(Error::EmptyPrefix);
        }
        self.transmit()
    }

    fn transmit(&mut self) -> Result<Vec<f64>> {
        self.time += 1;
        let oldest_age = self.time + 1 - self.epsilon; // age of b_ε
        if oldest_age > self.refs.max_age() {
            return Err(Error::TrajectoryExhausted { age: oldest_age, usable: self.refs.max_age() });
        }
        let newest_age = oldest_age + 1 - self.queue.len();
        Ok(self.queue.iter().rev().enumerate().map(|(k, &b)| self.refs.symbol(b, newest_age + k)).collect())
    }

    pub fn discard(&mut self, count: usize) {
        assert!(count <= self.queue.len(), "cannot discard {count} of {} bits", self.queue.len());
        self.queue.drain(..count);
        self.epsilon += count;
    }
}

/// Per-pending-bit correlation receiver.
#[derive(Debug, Clone)]
pub struct BwDecoder {
    refs: Arc<RefTrajectories>,
    sigma2: f64,
    pe_res: f64,
    /// (D0, D1) per pending bit, oldest first.
    acc: VecDeque<(f64, f64)>,
    llrs: Vec<f64>,
    log: DecisionLog,
}

impl BwDecoder {
    pub fn new(refs: Arc<RefTrajectories>, sigma2: f64, pe_res: f64) -> Result<Self> {
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::InvalidParameter(format!("noise variance must be positive, got {sigma2}")));
        }
        if !(pe_res > 0.0 && pe_res < 0.5) {
            return Err(Error::InvalidParameter(format!("pe_res must be in (0, 0.5), got {pe_res}")));
        }
        Ok(BwDecoder { refs, sigma2, pe_res, acc: VecDeque::new(), llrs: Vec::new(), log: DecisionLog::new() })
    }

    pub fn pending(&self) -> usize {
        self.acc.len()
    }

    pub fn accumulators(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.acc.iter().copied()
    }

    pub fn llrs(&self) -> &[f64] {
        &self.llrs
    }

    pub fn log(&self) -> &DecisionLog {
        &self.log
    }

    pub fn epsilon(&self) -> usize {
        self.log.epsilon()
    }

    /// Opens an accumulator for a newly encoded bit.
    pub fn push_bit(&mut self) {
        self.acc.push_back((0.0, 0.0));
    }

    /// Consumes one received vector (components ordered by increasing age) and
    /// refreshes the LLRs.
    pub fn decoder_update(&mut self, r: &[f64]) -> Result<&[f64]> {
        if r.len() != self.acc.len() {
            return Err(Error::LengthMismatch { expected: self.acc.len(), got: r.len() });
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteSample);
        }
        let time = self.log.time() + 1;
        let oldest_age = time + 1 - self.log.epsilon();
        if oldest_age > self.refs.max_age() {
            return Err(Error::TrajectoryExhausted { age: oldest_age, usable: self.refs.max_age() });
        }
        self.log.tick();
        let inv = 1.0 / (2.0 * self.sigma2);
        self.llrs.clear();
        let last = self.acc.len() - 1;
        for (k, (d0, d1)) in self.acc.iter_mut().enumerate() {
            let age = oldest_age - k;
            // components are ordered newest first
            let rv = r[last - k];
            *d0 += (rv - self.refs.symbol(0, age)).powi(2);
            *d1 += (rv - self.refs.symbol(1, age)).powi(2);
            self.llrs.push((*d0 - *d1) * inv);
        }
        Ok(&self.llrs)
    }

    pub fn estimate_at_delay(&self, bit_index: usize, delay: usize) -> Result<u8> {
        self.log.estimate_at_delay(&self.llrs, bit_index, delay)
    }
}

/// Releases the maximal reliable prefix and drops its accumulators.
pub fn reliability_prune(dec: &mut BwDecoder, enc: &mut BwEncoder) -> Release {
    let k = reliable_prefix_len(&dec.llrs, dec.pe_res);
    let bits: Vec<u8> = dec.llrs[..k].iter().map(|&l| hard_decision(l)).collect();
    dec.acc.drain(..k);
    dec.llrs.drain(..k);
    dec.log.release(&bits);
    enc.discard(k);
    Release { bits, new_epsilon: dec.epsilon() }
}
