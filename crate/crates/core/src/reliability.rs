//! Reliability rule and decision bookkeeping shared by both schemes.
//!
//! LLRs follow the convention `LLR = ln P(b = 1 | r) / P(b = 0 | r)`, so a
//! positive value decides 1 and an exact zero decides 0.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default residual error target for declaring a bit reliable.
pub const DEFAULT_PE_RES: f64 = 1e-5;

/// Posterior error probability of a hard decision with the given LLR.
#[inline]
pub fn error_estimate(llr: f64) -> f64 {
    1.0 / (1.0 + llr.abs().exp())
}

#[inline]
pub fn is_reliable(llr: f64, pe_res: f64) -> bool {
    error_estimate(llr) <= pe_res
}

#[inline]
pub fn hard_decision(llr: f64) -> u8 {
    u8::from(llr > 0.0)
}

/// Length of the longest run of reliable bits at the front of `llrs`
/// (oldest pending bit first).
pub fn reliable_prefix_len(llrs: &[f64], pe_res: f64) -> usize {
    llrs.iter().take_while(|&&l| is_reliable(l, pe_res)).count()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReleasedBit {
    pub value: u8,
    /// Channel use after which the bit was released.
    pub time: usize,
}

/// Outcome of one pruning pass.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Release {
    pub bits: Vec<u8>,
    /// Index of the oldest bit still unreliable after the pass (1-based).
    pub new_epsilon: usize,
}

/// Receiver-side log of released decisions. Bit indices and times are
/// 1-based: bit `n` enters the encoder at channel use `n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecisionLog {
    time: usize,
    released: Vec<ReleasedBit>,
}

impl Default for DecisionLog {
    fn default() -> Self {
        Self::new()
    }
}

impl DecisionLog {
    pub fn new() -> Self {
        DecisionLog { time: 0, released: Vec::new() }
    }

    pub fn time(&self) -> usize {
        self.time
    }

    pub(crate) fn tick(&mut self) {
        self.time += 1;
    }

    /// `ε`: the oldest not-yet-released bit.
    pub fn epsilon(&self) -> usize {
        self.released.len() + 1
    }

    pub fn released(&self) -> &[ReleasedBit] {
        &self.released
    }

    pub(crate) fn release(&mut self, bits: &[u8]) {
        let time = self.time;
        self.released.extend(bits.iter().map(|&value| ReleasedBit { value, time }));
    }

    /// `b̂_n^{n+d−1}` given the current pending LLRs (oldest first).
    ///
    /// Released bits report their frozen decision for any delay reaching the
    /// release time or later; pending bits can only be queried at the
    /// current time.
    pub fn estimate_at_delay(&self, pending_llrs: &[f64], bit_index: usize, delay: usize) -> Result<u8> {
        if bit_index == 0 || delay == 0 {
            return Err(Error::InvalidParameter("bit index and delay are 1-based".into()));
        }
        let at = bit_index + delay - 1;
        if let Some(r) = self.released.get(bit_index - 1) {
            if at >= r.time {
                return Ok(r.value);
            }
        } else if at == self.time {
            let offset = bit_index - self.epsilon();
            if let Some(&llr) = pending_llrs.get(offset) {
                return Ok(hard_decision(llr));
            }
        }
        Err(Error::InvalidParameter(format!("estimate of bit {bit_index} at time {at} is not observable at time {}", self.time)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_estimate_matches_binary_posterior() {
        assert_eq!(error_estimate(0.0), 0.5);
        let llr = (1.0f64 / 1e-5 - 1.0).ln();
        assert!((error_estimate(llr) - 1e-5).abs() < 1e-18);
        assert_eq!(error_estimate(-3.0), error_estimate(3.0));
    }

    #[test]
    fn prefix_rule() {
        let big = 20.0;
        assert_eq!(reliable_prefix_len(&[1.0, 2.0, -3.0], DEFAULT_PE_RES), 0);
        assert_eq!(reliable_prefix_len(&[big, -big, big], DEFAULT_PE_RES), 3);
        assert_eq!(reliable_prefix_len(&[big, 0.1, -big], DEFAULT_PE_RES), 1);
    }

    #[test]
    fn decisions() {
        assert_eq!(hard_decision(0.3), 1);
        assert_eq!(hard_decision(-0.3), 0);
        assert_eq!(hard_decision(0.0), 0);
    }

    #[test]
    fn estimate_pending_and_released() {
        let mut log = DecisionLog::new();
        log.tick();
        log.tick();
        // bits 1 and 2 pending at time 2
        assert_eq!(log.estimate_at_delay(&[0.5, -0.5], 1, 2).unwrap(), 1);
        assert_eq!(log.estimate_at_delay(&[0.5, -0.5], 2, 1).unwrap(), 0);
        assert_eq!(log.estimate_at_delay(&[0.0, -0.5], 1, 2).unwrap(), 0);
        assert!(log.estimate_at_delay(&[0.5, -0.5], 1, 1).is_err());
        log.release(&[1]);
        assert_eq!(log.epsilon(), 2);
        // frozen from release time onwards
        for d in 2..50 {
            assert_eq!(log.estimate_at_delay(&[-0.5], 1, d).unwrap(), 1);
        }
        assert_eq!(log.estimate_at_delay(&[-0.5], 2, 1).unwrap(), 0);
    }
}
