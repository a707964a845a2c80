//! Stable CSV and JSON renderings of campaign results.

use std::fmt::Write;

use serde::Serialize;

use crate::channel_sim::{codebook_snr_db, Metrics, SimConfig};

pub const BER_BY_POSITION_HEADER: &str = "bit_index,d,errors,trials";
pub const BER_AVG_HEADER: &str = "d,p_err";
pub const EFFICIENCY_HEADER: &str = "q,count";
pub const SWEEP_HEADER: &str = "scheme,map,sigma2,mean_d,std_d,snr_db,residual_rate,n_blocks";

pub fn ber_by_position_csv(m: &Metrics) -> String {
    let mut s = String::with_capacity(m.errors.len() * 16);
    s.push_str(BER_BY_POSITION_HEADER);
    s.push('\n');
    for i in 1..=m.block_len {
        for d in 1..=m.d_max {
            let (e, n) = m.at(i, d);
            writeln!(s, "{i},{d},{e},{n}").unwrap();
        }
    }
    s
}

pub fn ber_avg_csv(m: &Metrics) -> String {
    let mut s = format!("{BER_AVG_HEADER}\n");
    for (k, p) in m.p_avg().iter().enumerate() {
        writeln!(s, "{},{p:e}", k + 1).unwrap();
    }
    s
}

pub fn efficiency_hist_csv(m: &Metrics) -> String {
    let mut s = format!("{EFFICIENCY_HEADER}\n");
    for (q, c) in m.efficiency_hist.iter().enumerate().filter(|(_, &c)| c > 0) {
        writeln!(s, "{q},{c}").unwrap();
    }
    s
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary<'a> {
    pub mean_d: f64,
    pub std_d: f64,
    pub snr_db: f64,
    /// Adaptive-size only: SNR from codebook-average energy per depth.
    pub snr_codebook_db: Option<f64>,
    pub residual_rate: f64,
    pub released_total: u64,
    pub released_wrong: u64,
    pub unreleased_bits: u64,
    pub failed_blocks: u64,
    pub n_blocks: u64,
    pub mean_release_delay: f64,
    pub master_seed: u64,
    pub code_version: &'static str,
    pub config: &'a SimConfig,
}

pub fn summary<'a>(m: &Metrics, cfg: &'a SimConfig) -> Summary<'a> {
    Summary {
        mean_d: m.mean_d(),
        std_d: m.std_d(),
        snr_db: m.snr_db(),
        snr_codebook_db: codebook_snr_db(m, cfg).ok().flatten(),
        residual_rate: m.residual_rate(),
        released_total: m.released_total,
        released_wrong: m.released_wrong,
        unreleased_bits: m.unreleased_bits,
        failed_blocks: m.failed_blocks,
        n_blocks: m.n_blocks,
        mean_release_delay: m.mean_release_delay(),
        master_seed: cfg.master_seed,
        code_version: env!("CARGO_PKG_VERSION"),
        config: cfg,
    }
}

pub fn summary_json(m: &Metrics, cfg: &SimConfig) -> String {
    let mut s = serde_json::to_string_pretty(&summary(m, cfg)).expect("plain data");
    s.push('\n');
    s
}

pub fn sweep_row(cfg: &SimConfig, m: &Metrics) -> String {
    format!(
        "{},{},{},{:.6},{:.6},{:.6},{:e},{}\n",
        cfg.scheme,
        cfg.map,
        cfg.sigma2,
        m.mean_d(),
        m.std_d(),
        m.snr_db(),
        m.residual_rate(),
        m.n_blocks
    )
}
