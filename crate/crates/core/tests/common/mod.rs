//! Property checks shared by the `properties` and `acceptance` targets.

#![allow(dead_code, clippy::neg_cmp_op_on_partial_ord)]

use std::sync::Arc;

use chaoscomm::adaptive_bandwidth::{default_run_limit, gen_initial_conditions};
use chaoscomm::adaptive_size::{symbol_for_prefix, SizeCodebook, SizeDecoder, SizeEncoder};
use chaoscomm::analysis::{beta_bw_bsm, beta_bw_tent, DEFAULT_GRID_POINTS};
use chaoscomm::{BitPrefix, MapKind, MapModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const GAMMA0: f64 = 2.0;

fn random_prefix(rng: &mut ChaCha8Rng, q: usize) -> BitPrefix {
    BitPrefix::from_pattern(rng.random_range(0..1u64 << q), q)
}

/// Ordered pairs of equal-length prefixes whose order is broken by some
/// random extension at some later time.
pub fn forward_ordering_violations(kind: MapKind, pairs: usize, seed: u64) -> usize {
    let model = MapModel::new(kind);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    let mut tested = 0;
    while tested < pairs {
        let n = rng.random_range(1..=12);
        let (a, b) = (random_prefix(&mut rng, n), random_prefix(&mut rng, n));
        let sa = symbol_for_prefix(&model, GAMMA0, &a).unwrap();
        let sb = symbol_for_prefix(&model, GAMMA0, &b).unwrap();
        if sa == sb {
            continue;
        }
        let (lo, hi) = if sa < sb { (a, b) } else { (b, a) };
        tested += 1;
        let extra = rng.random_range(1..=8);
        let (mut lo, mut hi) = (lo, hi);
        for _ in 0..extra {
            lo.push(rng.random_range(0..2)).unwrap();
            hi.push(rng.random_range(0..2)).unwrap();
            let s_lo = symbol_for_prefix(&model, GAMMA0, &lo).unwrap();
            let s_hi = symbol_for_prefix(&model, GAMMA0, &hi).unwrap();
            if !(s_lo < s_hi) {
                violations += 1;
                break;
            }
        }
    }
    violations
}

/// Separation constant the reference trajectories are checked against,
/// scaled for the `2z−1` normalization.
pub fn beta_scaled(kind: MapKind, m_r: usize) -> f64 {
    let beta = match kind {
        MapKind::Bsm => beta_bw_bsm(m_r, kind).unwrap(),
        _ => beta_bw_tent(kind, DEFAULT_GRID_POINTS).unwrap(),
    };
    4.0 * beta
}

/// Trajectory pairs with `d_E²(d) < β_scaled·d` for some `d ≤ d_max`.
/// BSM pairs cycle through run limits `1..=6`.
pub fn separation_violations(kind: MapKind, pairs: usize, d_max: usize, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    for k in 0..pairs {
        let m_r = 1 + k % 6;
        let model = MapModel::new(kind);
        let len = d_max + 1 + model.eval_width;
        let refs = gen_initial_conditions(model, len, default_run_limit(kind, m_r), true, &mut rng).unwrap();
        let beta = beta_scaled(kind, m_r);
        let curve = refs.de2_curve(d_max).unwrap();
        if (1..=d_max).any(|d| curve[d] < beta * d as f64 * (1.0 - 1e-12)) {
            violations += 1;
        }
    }
    violations
}

/// Prefixes for which `demap_index_to_bits(cell_index(b)) != b`, over every
/// prefix of every length up to `q_max`.
pub fn round_trip_failures(kind: MapKind, q_max: usize) -> usize {
    let model = MapModel::new(kind);
    let mut failures = 0;
    for q in 1..=q_max {
        for p in 0..1u64 << q {
            let b = BitPrefix::from_pattern(p, q);
            let idx = model.cell_index(&b).unwrap();
            let level = model.quantized_level(idx, q).unwrap();
            let lo = model.invariant_cdf_inv((idx - 1) as f64 / (1u64 << q) as f64).unwrap();
            let hi = model.invariant_cdf_inv(idx as f64 / (1u64 << q) as f64).unwrap();
            let back = model.demap_index_to_bits(idx, q).unwrap();
            if back != b || !(lo < level && level < hi) {
                failures += 1;
            }
        }
    }
    failures
}

/// Squared distances from every length-`q` sequence to the received
/// samples, with symbols taken straight from the quantizer definition.
fn enumerate_metrics(model: &MapModel, received: &[f64]) -> Vec<f64> {
    let q = received.len();
    (0..1u64 << q)
        .map(|p| {
            let bits = BitPrefix::from_pattern(p, q);
            received
                .iter()
                .enumerate()
                .map(|(t, &r)| {
                    let head = BitPrefix::new(bits.bits()[..=t].to_vec()).unwrap();
                    let s = symbol_for_prefix(model, GAMMA0, &head).unwrap();
                    (r - s) * (r - s)
                })
                .sum()
        })
        .collect()
}

fn log_sum_exp(v: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = v.collect();
    let mx = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    mx + v.iter().map(|x| (x - mx).exp()).sum::<f64>().ln()
}

#[derive(Debug, Default)]
pub struct OracleReport {
    pub decision_mismatches: usize,
    pub leaf_mismatches: usize,
    pub max_llr_gap: f64,
}

/// Tree decoder against exhaustive ML over all `2^q` sequences, `q ≤ q_max`.
pub fn ml_oracle(kind: MapKind, trials: usize, q_max: usize, seed: u64) -> OracleReport {
    let model = MapModel::new(kind);
    let cb = Arc::new(SizeCodebook::new(model, GAMMA0, q_max).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = OracleReport::default();
    for _ in 0..trials {
        let q = rng.random_range(1..=q_max);
        let sigma2 = rng.random_range(0.2..2.0);
        let mut enc = SizeEncoder::new(cb.clone());
        let mut dec = SizeDecoder::new(cb.clone(), sigma2, 1e-5).unwrap();
        let mut received = Vec::with_capacity(q);
        for _ in 0..q {
            let s = enc.encode_step(rng.random_range(0..2)).unwrap();
            let r = s + sigma2.sqrt() * rng.sample::<f64, _>(rand_distr::StandardNormal);
            received.push(r);
            dec.extend().unwrap();
            dec.decoder_update(r).unwrap();
        }
        let metrics = enumerate_metrics(&model, &received);
        let best = (0..metrics.len()).min_by(|&a, &b| metrics[a].total_cmp(&metrics[b])).unwrap() as u64;
        if dec.best_leaf() != best {
            rep.leaf_mismatches += 1;
        }
        for (j, &llr) in dec.llrs().iter().enumerate() {
            let bit = 1u64 << (q - 1 - j);
            let side = |want: u64| log_sum_exp((0..1u64 << q).filter(|p| p & bit == want).map(|p| -metrics[p as usize] / (2.0 * sigma2)));
            let oracle = side(bit) - side(0);
            rep.max_llr_gap = rep.max_llr_gap.max((llr - oracle).abs());
            if (llr > 0.0) != (oracle > 0.0) {
                rep.decision_mismatches += 1;
            }
        }
    }
    rep
}
