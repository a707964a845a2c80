//! AWGN channel, reproducible block randomness and Monte-Carlo campaigns.
//!
//! A campaign splits its blocks into fixed-size chunks. Each chunk is folded
//! sequentially and the chunk results are merged in chunk order, so the
//! floating-point sums do not depend on how many workers ran them.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adaptive_bandwidth::{self as bw, default_run_limit, gen_initial_conditions, BwDecoder, BwEncoder, RefTrajectories};
use crate::adaptive_size::{self as size, SizeCodebook, SizeDecoder, SizeEncoder};
use crate::config::{ExperimentConfig, Scheme};
use crate::error::{Error, Result};
use crate::maps::{MapKind, MapModel};
use crate::reliability::{hard_decision, Release};

/// Blocks folded together before merging.
pub const CHUNK_BLOCKS: usize = 64;
/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "CHAOSCOMM_THREADS";

const REFERENCE_STREAM: u64 = u64::MAX;

/// Adds i.i.d. `N(0, σ²)` noise.
pub fn awgn<R: Rng + ?Sized>(samples: &[f64], sigma2: f64, rng: &mut R) -> Vec<f64> {
    let mut out = samples.to_vec();
    add_awgn(&mut out, sigma2, rng);
    out
}

pub fn add_awgn<R: Rng + ?Sized>(samples: &mut [f64], sigma2: f64, rng: &mut R) {
    if sigma2 == 0.0 {
        return;
    }
    let sd = sigma2.sqrt();
    for s in samples {
        let z: f64 = rng.sample(StandardNormal);
        *s += sd * z;
    }
}

/// Seed derivation: every block gets its own ChaCha stream under the
/// master seed, and the reference trajectories use a reserved stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngSpec {
    pub master_seed: u64,
}

impl RngSpec {
    pub fn new(master_seed: u64) -> Self {
        RngSpec { master_seed }
    }

    pub fn block_rng(&self, block_index: u64) -> ChaCha8Rng {
        assert_ne!(block_index, REFERENCE_STREAM, "stream reserved for reference trajectories");
        self.stream(block_index)
    }

    pub fn reference_rng(&self) -> ChaCha8Rng {
        self.stream(REFERENCE_STREAM)
    }

    fn stream(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(stream);
        rng
    }
}

/// Parameters of one campaign cell (one scheme, map and noise level).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub scheme: Scheme,
    pub map: MapKind,
    pub sigma2: f64,
    pub gamma0: f64,
    pub m_r: usize,
    pub traj_len: usize,
    pub eval_width: usize,
    pub block_len: usize,
    pub pe_res: f64,
    pub d_max: usize,
    pub q_max: usize,
    pub t_flush: usize,
    pub master_seed: u64,
}

impl SimConfig {
    pub fn from_experiment(cfg: &ExperimentConfig, map: MapKind, sigma2: f64) -> Self {
        SimConfig {
            scheme: cfg.scheme,
            map,
            sigma2,
            gamma0: cfg.gamma0,
            m_r: cfg.m_r,
            traj_len: cfg.traj_len,
            eval_width: cfg.eval_width,
            block_len: cfg.block_len,
            pe_res: cfg.pe_res,
            d_max: cfg.d_max,
            q_max: cfg.q_max,
            t_flush: cfg.t_flush,
            master_seed: cfg.master_seed,
        }
    }

    pub fn defaults(scheme: Scheme, map: MapKind, sigma2: f64) -> Self {
        let cfg = ExperimentConfig { scheme, ..ExperimentConfig::default() };
        SimConfig::from_experiment(&cfg, map, sigma2)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return bad(format!("sigma2 must be positive, got {}", self.sigma2));
        }
        if self.block_len == 0 {
            return bad("block length must be positive".into());
        }
        if self.d_max == 0 || self.d_max > 64 {
            return bad(format!("d_max {} not in 1..=64", self.d_max));
        }
        if self.scheme == Scheme::Bw && self.m_r == 0 {
            return bad("run limit must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
enum Link {
    Size(Arc<SizeCodebook>),
    Bw(Arc<RefTrajectories>),
}

/// Immutable state shared by every block of a campaign.
#[derive(Debug, Clone)]
pub struct Campaign {
    cfg: SimConfig,
    rng: RngSpec,
    link: Link,
}

impl Campaign {
    pub fn new(cfg: SimConfig) -> Result<Self> {
        cfg.validate()?;
        let model = MapModel::with_eval_width(cfg.map, cfg.eval_width)?;
        let rng = RngSpec::new(cfg.master_seed);
        let link = match cfg.scheme {
            Scheme::Size => Link::Size(Arc::new(SizeCodebook::new(model, cfg.gamma0, cfg.q_max)?)),
            Scheme::Bw => {
                let run_limit = default_run_limit(cfg.map, cfg.m_r);
                let refs = gen_initial_conditions(model, cfg.traj_len, run_limit, true, &mut rng.reference_rng())?;
                Link::Bw(Arc::new(refs))
            }
        };
        Ok(Campaign { cfg, rng, link })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    /// Reference trajectories of a bandwidth campaign.
    pub fn references(&self) -> Option<&Arc<RefTrajectories>> {
        match &self.link {
            Link::Bw(r) => Some(r),
            Link::Size(_) => None,
        }
    }

    pub fn simulate_block(&self, block_index: u64) -> BlockResult {
        let mut rng = self.rng.block_rng(block_index);
        match &self.link {
            Link::Size(cb) => {
                let enc = SizeEncoder::new(cb.clone());
                let dec = SizeDecoder::new(cb.clone(), self.cfg.sigma2, self.cfg.pe_res).expect("validated");
                run_block(&self.cfg, SizeLink { enc, dec }, &mut rng)
            }
            Link::Bw(refs) => {
                let enc = BwEncoder::new(refs.clone());
                let dec = BwDecoder::new(refs.clone(), self.cfg.sigma2, self.cfg.pe_res).expect("validated");
                run_block(&self.cfg, BwLink { enc, dec, buf: Vec::new() }, &mut rng)
            }
        }
    }
}

/// One encoder/decoder pair with ideal feedback.
trait BlockLink {
    /// Transmits one step (`Some(bit)` for a new bit, `None` to hold) and
    /// returns the energy and the number of bits jointly encoded.
    fn step<R: Rng + ?Sized>(&mut self, bit: Option<u8>, sigma2: f64, rng: &mut R) -> Result<(f64, usize)>;
    fn llrs(&self) -> &[f64];
    fn epsilon(&self) -> usize;
    fn pending(&self) -> usize;
    fn dimensions(&self) -> usize;
    fn prune(&mut self) -> Release;
}

struct SizeLink {
    enc: SizeEncoder,
    dec: SizeDecoder,
}

impl BlockLink for SizeLink {
    fn step<R: Rng + ?Sized>(&mut self, bit: Option<u8>, sigma2: f64, rng: &mut R) -> Result<(f64, usize)> {
        let s = match bit {
            Some(b) => {
                let s = self.enc.encode_step(b)?;
                self.dec.extend()?;
                s
            }
            None => self.enc.hold_step()?,
        };
        let mut r = [s];
        add_awgn(&mut r, sigma2, rng);
        self.dec.decoder_update(r[0])?;
        Ok((s * s, self.enc.queue_len()))
    }

    fn llrs(&self) -> &[f64] {
        self.dec.llrs()
    }

    fn epsilon(&self) -> usize {
        self.dec.epsilon()
    }

    fn pending(&self) -> usize {
        self.enc.queue_len()
    }

    fn dimensions(&self) -> usize {
        1
    }

    fn prune(&mut self) -> Release {
        size::reliability_prune(&mut self.dec, &mut self.enc)
    }
}

struct BwLink {
    enc: BwEncoder,
    dec: BwDecoder,
    buf: Vec<f64>,
}

impl BlockLink for BwLink {
    fn step<R: Rng + ?Sized>(&mut self, bit: Option<u8>, sigma2: f64, rng: &mut R) -> Result<(f64, usize)> {
        let s = match bit {
            Some(b) => {
                let s = self.enc.encode_step(b)?;
                self.dec.push_bit();
                s
            }
            None => self.enc.hold_step()?,
        };
        let energy = s.iter().map(|v| v * v).sum();
        self.buf.clear();
        self.buf.extend_from_slice(&s);
        add_awgn(&mut self.buf, sigma2, rng);
        self.dec.decoder_update(&self.buf)?;
        Ok((energy, s.len()))
    }

    fn llrs(&self) -> &[f64] {
        self.dec.llrs()
    }

    fn epsilon(&self) -> usize {
        self.dec.epsilon()
    }

    fn pending(&self) -> usize {
        self.enc.queue_len()
    }

    fn dimensions(&self) -> usize {
        self.enc.queue_len()
    }

    fn prune(&mut self) -> Release {
        bw::reliability_prune(&mut self.dec, &mut self.enc)
    }
}

/// Per-bit outcome within a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitOutcome {
    /// Delay at which the bit was released, `None` if it never was.
    pub delay_to_reliable: Option<u32>,
    /// Bit `d − 1` is set when `b̂_n^{n+d−1}` is correct.
    pub correct_mask: u64,
    /// Released and correct.
    pub final_correct: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockResult {
    pub bits: Vec<BitOutcome>,
    /// `Σ ‖s_n‖²` over data steps.
    pub energy: f64,
    /// `Σ ‖s_n‖²` over flush steps.
    pub flush_energy: f64,
    /// Channel dimensions used, flush included.
    pub dimensions: u64,
    /// `q_n` for each data step.
    pub efficiency: Vec<u16>,
    pub flush_steps: usize,
    pub failure: Option<Error>,
    pub released_total: u64,
    pub released_wrong: u64,
}

impl BlockResult {
    pub fn mask_bit(mask: u64, d: usize) -> bool {
        mask >> (d - 1) & 1 == 1
    }
}

fn full_mask(d_max: usize) -> u64 {
    if d_max >= 64 {
        u64::MAX
    } else {
        (1u64 << d_max) - 1
    }
}

fn run_block<L: BlockLink, R: Rng + ?Sized>(cfg: &SimConfig, mut link: L, rng: &mut R) -> BlockResult {
    let n = cfg.block_len;
    let d_max = cfg.d_max;
    let mut truth = Vec::with_capacity(n);
    let mut bits = vec![BitOutcome { delay_to_reliable: None, correct_mask: 0, final_correct: false }; n];
    let mut res = BlockResult {
        bits: Vec::new(),
        energy: 0.0,
        flush_energy: 0.0,
        dimensions: 0,
        efficiency: Vec::with_capacity(n),
        flush_steps: 0,
        failure: None,
        released_total: 0,
        released_wrong: 0,
    };
    let mut t = 0usize;
    loop {
        let data = t < n;
        if !data && (link.pending() == 0 || res.flush_steps >= cfg.t_flush) {
            break;
        }
        t += 1;
        let input = if data {
            let b = u8::from(rng.random::<bool>());
            truth.push(b);
            Some(b)
        } else {
            None
        };
        let (energy, q) = match link.step(input, cfg.sigma2, rng) {
            Ok(v) => v,
            Err(e) => {
                res.failure = Some(e);
                break;
            }
        };
        res.dimensions += link.dimensions() as u64;
        if data {
            res.energy += energy;
            res.efficiency.push(q as u16);
        } else {
            res.flush_energy += energy;
            res.flush_steps += 1;
        }
        let eps = link.epsilon();
        for (k, &llr) in link.llrs().iter().enumerate() {
            let i = eps + k;
            let d = t + 1 - i;
            if d <= d_max && hard_decision(llr) == truth[i - 1] {
                bits[i - 1].correct_mask |= 1 << (d - 1);
            }
        }
        let release = link.prune();
        for (k, &value) in release.bits.iter().enumerate() {
            let i = eps + k;
            let d = t + 1 - i;
            let ok = value == truth[i - 1];
            let out = &mut bits[i - 1];
            out.delay_to_reliable = Some(d as u32);
            out.final_correct = ok;
            if ok && d < d_max {
                out.correct_mask |= full_mask(d_max) & !full_mask(d);
            }
            res.released_total += 1;
            res.released_wrong += u64::from(!ok);
        }
    }
    res.bits = bits;
    res
}

/// Position/delay error counts, efficiency statistics and energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub block_len: usize,
    pub d_max: usize,
    pub sigma2: f64,
    pub n_blocks: u64,
    /// Row-major `[bit][d]` error counts.
    pub errors: Vec<u64>,
    pub trials: Vec<u64>,
    /// `efficiency_hist[q]` counts data steps with `q_n = q`.
    pub efficiency_hist: Vec<u64>,
    pub steps: u64,
    pub sum_q: u64,
    pub sum_q2: u64,
    pub energy: f64,
    pub flush_energy: f64,
    pub flush_steps: u64,
    pub dimensions: u64,
    pub released_total: u64,
    pub released_wrong: u64,
    pub unreleased_bits: u64,
    pub failed_blocks: u64,
    pub delay_sum: u64,
}

impl Metrics {
    pub fn new(block_len: usize, d_max: usize, sigma2: f64) -> Self {
        Metrics {
            block_len,
            d_max,
            sigma2,
            n_blocks: 0,
            errors: vec![0; block_len * d_max],
            trials: vec![0; block_len * d_max],
            efficiency_hist: Vec::new(),
            steps: 0,
            sum_q: 0,
            sum_q2: 0,
            energy: 0.0,
            flush_energy: 0.0,
            flush_steps: 0,
            dimensions: 0,
            released_total: 0,
            released_wrong: 0,
            unreleased_bits: 0,
            failed_blocks: 0,
            delay_sum: 0,
        }
    }

    pub fn absorb(&mut self, block: &BlockResult) {
        assert_eq!(block.bits.len(), self.block_len, "block length mismatch");
        self.n_blocks += 1;
        for (i, out) in block.bits.iter().enumerate() {
            let row = i * self.d_max;
            for d in 1..=self.d_max {
                self.trials[row + d - 1] += 1;
                if !BlockResult::mask_bit(out.correct_mask, d) {
                    self.errors[row + d - 1] += 1;
                }
            }
            match out.delay_to_reliable {
                Some(d) => self.delay_sum += u64::from(d),
                None => self.unreleased_bits += 1,
            }
        }
        for &q in &block.efficiency {
            let q = usize::from(q);
            if self.efficiency_hist.len() <= q {
                self.efficiency_hist.resize(q + 1, 0);
            }
            self.efficiency_hist[q] += 1;
            self.sum_q += q as u64;
            self.sum_q2 += (q * q) as u64;
        }
        self.steps += block.efficiency.len() as u64;
        self.energy += block.energy;
        self.flush_energy += block.flush_energy;
        self.flush_steps += block.flush_steps as u64;
        self.dimensions += block.dimensions;
        self.released_total += block.released_total;
        self.released_wrong += block.released_wrong;
        self.failed_blocks += u64::from(block.failure.is_some());
    }

    pub fn merge(&mut self, other: &Metrics) {
        assert_eq!((self.block_len, self.d_max), (other.block_len, other.d_max), "incompatible metrics");
        self.n_blocks += other.n_blocks;
        for (a, b) in self.errors.iter_mut().zip(&other.errors) {
            *a += b;
        }
        for (a, b) in self.trials.iter_mut().zip(&other.trials) {
            *a += b;
        }
        if self.efficiency_hist.len() < other.efficiency_hist.len() {
            self.efficiency_hist.resize(other.efficiency_hist.len(), 0);
        }
        for (a, b) in self.efficiency_hist.iter_mut().zip(&other.efficiency_hist) {
            *a += b;
        }
        self.steps += other.steps;
        self.sum_q += other.sum_q;
        self.sum_q2 += other.sum_q2;
        self.energy += other.energy;
        self.flush_energy += other.flush_energy;
        self.flush_steps += other.flush_steps;
        self.dimensions += other.dimensions;
        self.released_total += other.released_total;
        self.released_wrong += other.released_wrong;
        self.unreleased_bits += other.unreleased_bits;
        self.failed_blocks += other.failed_blocks;
        self.delay_sum += other.delay_sum;
    }

    /// `(errors, trials)` for 1-based bit index and delay.
    pub fn at(&self, bit_index: usize, d: usize) -> (u64, u64) {
        let k = (bit_index - 1) * self.d_max + d - 1;
        (self.errors[k], self.trials[k])
    }

    /// `P^d(e)` averaged over bit positions, indexed by `d − 1`.
    pub fn p_avg(&self) -> Vec<f64> {
        (1..=self.d_max)
            .map(|d| {
                let (e, n) = (1..=self.block_len).fold((0u64, 0u64), |(e, n), i| {
                    let (ei, ni) = self.at(i, d);
                    (e + ei, n + ni)
                });
                if n == 0 {
                    0.0
                } else {
                    e as f64 / n as f64
                }
            })
            .collect()
    }

    /// Trials per delay in the averaged curve.
    pub fn avg_trials(&self) -> u64 {
        (1..=self.block_len).map(|i| self.at(i, 1).1).sum()
    }

    pub fn mean_d(&self) -> f64 {
        self.sum_q as f64 / self.steps as f64
    }

    pub fn std_d(&self) -> f64 {
        let m = self.mean_d();
        (self.sum_q2 as f64 / self.steps as f64 - m * m).max(0.0).sqrt()
    }

    pub fn snr_db(&self) -> f64 {
        10.0 * (self.energy / self.steps as f64 / self.sigma2).log10()
    }

    /// Fraction of released bits that were wrong.
    pub fn residual_rate(&self) -> f64 {
        if self.released_total == 0 {
            0.0
        } else {
            self.released_wrong as f64 / self.released_total as f64
        }
    }

    /// Mean delay at release, over released bits.
    pub fn mean_release_delay(&self) -> f64 {
        self.delay_sum as f64 / self.released_total.max(1) as f64
    }
}

/// SNR with each data step charged the codebook-average energy at its depth
/// instead of the energy of the symbol actually sent. Adaptive-size only.
pub fn codebook_snr_db(m: &Metrics, cfg: &SimConfig) -> Result<Option<f64>> {
    if cfg.scheme != Scheme::Size {
        return Ok(None);
    }
    let cb = SizeCodebook::new(MapModel::with_eval_width(cfg.map, cfg.eval_width)?, cfg.gamma0, cfg.q_max)?;
    let energy: f64 = m.efficiency_hist.iter().enumerate().filter(|(_, &c)| c > 0).map(|(q, &c)| c as f64 * cb.mean_energy(q)).sum();
    Ok(Some(10.0 * (energy / m.steps as f64 / cfg.sigma2).log10()))
}

/// Worker cap from [`THREADS_ENV`]; `None` when unset.
pub fn worker_limit_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::InvalidParameter(format!("{THREADS_ENV} must be a positive integer, got `{v}`"))),
        },
    }
}

fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidParameter(format!("cannot start {n} workers: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Folds `n_items` indexed tasks in fixed chunks, in parallel, and merges
/// the chunk results in order.
fn chunked<T: Send>(
    n_items: usize,
    workers: Option<usize>,
    init: impl Fn() -> T + Sync + Send,
    fold: impl Fn(&mut T, u64) + Sync + Send,
    merge: impl Fn(&mut T, &T),
) -> Result<T> {
    let n_chunks = n_items.div_ceil(CHUNK_BLOCKS);
    let parts: Vec<T> = with_workers(workers, || {
        (0..n_chunks)
            .into_par_iter()
            .map(|c| {
                let mut acc = init();
                for i in c * CHUNK_BLOCKS..((c + 1) * CHUNK_BLOCKS).min(n_items) {
                    fold(&mut acc, i as u64);
                }
                acc
            })
            .collect()
    })?;
    let mut total = init();
    for p in &parts {
        merge(&mut total, p);
    }
    Ok(total)
}

/// Runs `n_blocks` blocks, using at most the [`THREADS_ENV`] worker count.
pub fn run_campaign(cfg: &SimConfig, n_blocks: usize) -> Result<Metrics> {
    run_campaign_with_workers(cfg, n_blocks, worker_limit_from_env()?)
}

pub fn run_campaign_with_workers(cfg: &SimConfig, n_blocks: usize, workers: Option<usize>) -> Result<Metrics> {
    if n_blocks == 0 {
        return Err(Error::InvalidParameter("a campaign needs at least one block".into()));
    }
    let campaign = Campaign::new(cfg.clone())?;
    chunked(
        n_blocks,
        workers,
        || Metrics::new(cfg.block_len, cfg.d_max, cfg.sigma2),
        |m, i| m.absorb(&campaign.simulate_block(i)),
        Metrics::merge,
    )
}

/// Error counts of the first bit after `d = 1..=d_max` observations, for the
/// adaptive-size scheme without feedback (every bit stays in the queue).
pub fn size_first_bit_errors(map: MapKind, gamma0: f64, sigma2: f64, d_max: usize, trials: usize, master_seed: u64) -> Result<Vec<u64>> {
    let cb = Arc::new(SizeCodebook::new(MapModel::new(map), gamma0, d_max)?);
    SizeDecoder::new(cb.clone(), sigma2, 0.25)?;
    let rng = RngSpec::new(master_seed);
    chunked(
        trials,
        worker_limit_from_env()?,
        || vec![0u64; d_max],
        |errs, i| {
            let mut r = rng.block_rng(i);
            let mut enc = SizeEncoder::new(cb.clone());
            let mut dec = SizeDecoder::new(cb.clone(), sigma2, 0.25).expect("validated");
            let mut first = 0;
            for (t, e) in errs.iter_mut().enumerate() {
                let b = u8::from(r.random::<bool>());
                if t == 0 {
                    first = b;
                }
                let s = enc.encode_step(b).expect("q_max = d_max");
                dec.extend().expect("q_max = d_max");
                let z: f64 = r.sample(StandardNormal);
                let llrs = dec.decoder_update(s + sigma2.sqrt() * z).expect("finite");
                *e += u64::from(hard_decision(llrs[0]) != first);
            }
        },
        |a, b| a.iter_mut().zip(b).for_each(|(x, y)| *x += y),
    )
}

/// Error count of a single bit sent alone over `d` steps of the
/// adaptive-bandwidth link.
pub fn bw_single_bit_errors(refs: &Arc<RefTrajectories>, sigma2: f64, d: usize, trials: usize, master_seed: u64) -> Result<u64> {
    if d == 0 || d > refs.max_age() {
        return Err(Error::TrajectoryExhausted { age: d, usable: refs.max_age() });
    }
    BwDecoder::new(refs.clone(), sigma2, 0.25)?;
    let rng = RngSpec::new(master_seed);
    chunked(
        trials,
        worker_limit_from_env()?,
        || 0u64,
        |errs, i| {
            let mut r = rng.block_rng(i);
            let mut enc = BwEncoder::new(refs.clone());
            let mut dec = BwDecoder::new(refs.clone(), sigma2, 0.25).expect("validated");
            let b = u8::from(r.random::<bool>());
            dec.push_bit();
            let mut llr = 0.0;
            for t in 0..d {
                let s = if t == 0 { enc.encode_step(b) } else { enc.hold_step() }.expect("within trajectory");
                let y = awgn(&s, sigma2, &mut r);
                llr = dec.decoder_update(&y).expect("finite")[0];
            }
            *errs += u64::from(hard_decision(llr) != b);
        },
        |a, b| *a += b,
    )
}

/// Least-squares line through `(d, ln P)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Inclusive delay range used.
    pub d_first: usize,
    pub d_last: usize,
}

/// Delays `1..=d_last` over which the averaged curve stays above the
/// floor `max(pe_res, 20/trials)`.
pub fn prefloor_range(p_avg: &[f64], trials: u64, pe_res: f64) -> Option<(usize, usize)> {
    let floor = pe_res.max(20.0 / trials as f64);
    let last = p_avg.iter().take_while(|&&p| p >= floor && p > 0.0).count();
    (last >= 3).then_some((1, last))
}

pub fn fit_log_linear(p_avg: &[f64], d_first: usize, d_last: usize) -> Option<LineFit> {
    if d_first == 0 || d_last < d_first + 1 || d_last > p_avg.len() {
        return None;
    }
    let pts: Vec<(f64, f64)> = (d_first..=d_last).map(|d| (d as f64, p_avg[d - 1].ln())).collect();
    if pts.iter().any(|p| !p.1.is_finite()) {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some(LineFit { slope, intercept: my - slope * mx, r2, d_first, d_last })
}

/// Fit over the pre-floor range of a campaign's averaged curve.
pub fn anytime_fit(m: &Metrics, pe_res: f64) -> Option<LineFit> {
    let p = m.p_avg();
    let (a, b) = prefloor_range(&p, m.avg_trials(), pe_res)?;
    fit_log_linear(&p, a, b)
}
