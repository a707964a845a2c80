//! End-to-end acceptance checks. Prints one PASS/FAIL line per check and
//! exits nonzero if any fails.

mod common;

use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use chaoscomm::adaptive_bandwidth::{default_run_limit, error_prob_exact, gen_initial_conditions};
use chaoscomm::analysis::{beta_bw_bsm, beta_bw_tent, beta_size, sigma2_sup, tsb, DEFAULT_GRID_POINTS, DEFAULT_SEARCH_DEPTH};
use chaoscomm::channel_sim::{
    anytime_fit, bw_single_bit_errors, codebook_snr_db, run_campaign_with_workers, size_first_bit_errors, Metrics, RngSpec, SimConfig,
};
use chaoscomm::output::{ber_avg_csv, ber_by_position_csv, efficiency_hist_csv, summary_json};
use chaoscomm::{MapKind, MapModel, Scheme};

const N_BLOCKS: usize = 10_000;
const PE_RES: f64 = 1e-5;
const SIGMAS: [f64; 3] = [1.0, 0.5, 0.25];

#[derive(Default)]
struct Report {
    passed: usize,
    failed: usize,
}

impl Report {
    fn check(&mut self, id: &str, ok: bool, detail: impl AsRef<str>) {
        if ok {
            self.passed += 1;
        } else {
            self.failed += 1;
        }
        println!("{} [{id}] {}", if ok { "PASS" } else { "FAIL" }, detail.as_ref());
    }

    fn info(&self, id: &str, detail: impl AsRef<str>) {
        println!("INFO [{id}] {}", detail.as_ref());
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed())
}

struct Campaigns {
    runs: Vec<(SimConfig, Metrics)>,
}

impl Campaigns {
    fn run_all() -> Self {
        let mut runs = Vec::new();
        for scheme in [Scheme::Size, Scheme::Bw] {
            for map in MapKind::ALL {
                for sigma2 in SIGMAS {
                    let cfg = SimConfig { pe_res: PE_RES, ..SimConfig::defaults(scheme, map, sigma2) };
                    let (m, t) = timed(|| run_campaign_with_workers(&cfg, N_BLOCKS, None).expect("campaign"));
                    println!(
                        "INFO [campaign] {scheme} {map} sigma2={sigma2}: mean_d={:.4} std_d={:.4} snr_db={:.3} residual={:.2e} ({:.1}s)",
                        m.mean_d(),
                        m.std_d(),
                        m.snr_db(),
                        m.residual_rate(),
                        t.as_secs_f64()
                    );
                    runs.push((cfg, m));
                }
            }
        }
        Campaigns { runs }
    }

    fn get(&self, scheme: Scheme, map: MapKind, sigma2: f64) -> &(SimConfig, Metrics) {
        self.runs.iter().find(|(c, _)| c.scheme == scheme && c.map == map && c.sigma2 == sigma2).expect("campaign was run")
    }
}

fn analytic_constants(r: &mut Report) {
    let limit = Duration::from_secs(1);
    let (v, t) = timed(|| sigma2_sup(1.0, 3).unwrap());
    r.check("1.sigma2_sup", (v - 0.2361).abs() <= 5e-4 && t < limit, format!("sigma2_sup(1,3) = {v:.6} in {t:?}"));
    let (v, t) = timed(|| beta_size(MapKind::Bsm, 2.0, DEFAULT_SEARCH_DEPTH).unwrap());
    r.check("1.beta_size", v == Some(1.0) && t < limit, format!("beta_size(BSM, 2) = {v:?} in {t:?}"));
    let (v, t) = timed(|| beta_bw_tent(MapKind::Tent, DEFAULT_GRID_POINTS).unwrap());
    r.check("1.beta_bw_tent", (v - 1.0 / 9.0).abs() <= 1e-12 && t < limit, format!("beta_bw_tent(Tent) = {v:.15} in {t:?}"));
    let (v, t) = timed(|| beta_bw_tent(MapKind::Logistic, DEFAULT_GRID_POINTS).unwrap());
    r.check("1.beta_bw_logistic", (v - 0.1875).abs() <= 1e-4 && t < limit, format!("beta_bw_tent(Logistic) = {v:.6} in {t:?}"));
    let (v, t) = timed(|| beta_bw_bsm(5, MapKind::Bsm).unwrap());
    r.check("1.beta_bw_bsm", v == 2f64.powi(-12) && t < limit, format!("beta_bw_bsm(5, BSM) = {v:e} in {t:?}"));
}

fn mean_delay(r: &mut Report, c: &Campaigns) {
    let cells = [
        (Scheme::Size, MapKind::Bsm, 0.5, 2.56, 2.96),
        (Scheme::Size, MapKind::Logistic, 0.5, 2.37, 2.73),
        (Scheme::Bw, MapKind::Logistic, 0.5, 8.33, 10.18),
        (Scheme::Bw, MapKind::Tent, 1.0, 29.0, 35.4),
    ];
    for (scheme, map, sigma2, lo, hi) in cells {
        let v = c.get(scheme, map, sigma2).1.mean_d();
        r.check(&format!("2.{scheme}.{map}"), (lo..=hi).contains(&v), format!("mean d at sigma2={sigma2}: {v:.4}, want [{lo}, {hi}]"));
    }
}

fn snr(r: &mut Report, c: &Campaigns) {
    for (map, want) in [(MapKind::Bsm, 9.43), (MapKind::Tent, 10.20), (MapKind::Logistic, 9.65)] {
        let v = c.get(Scheme::Bw, map, 0.5).1.snr_db();
        r.check(&format!("3.bw.{map}"), (v - want).abs() <= 0.7, format!("SNR at sigma2=0.5: {v:.3} dB, want {want} +- 0.7"));
    }
    let v = c.get(Scheme::Size, MapKind::Logistic, 0.5).1.snr_db();
    let want = 16.14;
    r.check("3.size.logistic", (v - want).abs() <= 2.0, format!("SNR at sigma2=0.5: {v:.3} dB, want {want} +- 2"));
    for map in MapKind::ALL {
        let (cfg_m, m_m) = c.get(Scheme::Size, map, 0.5);
        let cb = codebook_snr_db(m_m, cfg_m).unwrap().unwrap();
        r.info("3.size", format!("{map}: measured {:.3} dB, codebook-average {cb:.3} dB", m_m.snr_db()));
    }
}

fn anytime_signature(r: &mut Report, c: &Campaigns) {
    for scheme in [Scheme::Size, Scheme::Bw] {
        for map in MapKind::ALL {
            let mut slopes = Vec::new();
            let mut all_fit = true;
            for sigma2 in SIGMAS {
                let m = &c.get(scheme, map, sigma2).1;
                match anytime_fit(m, PE_RES) {
                    Some(f) => {
                        r.info(
                            "4.fit",
                            format!("{scheme} {map} sigma2={sigma2}: slope {:.4}, R2 {:.4}, d {}..{}", f.slope, f.r2, f.d_first, f.d_last),
                        );
                        all_fit &= f.r2 >= 0.9;
                        slopes.push(f.slope.abs());
                    }
                    None => {
                        r.info("4.fit", format!("{scheme} {map} sigma2={sigma2}: no pre-floor range"));
                        all_fit = false;
                    }
                }
            }
            let increasing = slopes.len() == SIGMAS.len() && slopes.windows(2).all(|w| w[1] > w[0]);
            r.check(
                &format!("4.{scheme}.{map}"),
                all_fit && increasing,
                format!(
                    "R2 >= 0.9 for all, |slope| {:?} strictly increasing",
                    slopes.iter().map(|s| format!("{s:.4}")).collect::<Vec<_>>()
                ),
            );
        }
    }
}

fn oracle(r: &mut Report) {
    for map in MapKind::ALL {
        let rep = common::ml_oracle(map, 1000, 8, 21);
        r.check(
            &format!("5.{map}"),
            rep.leaf_mismatches == 0 && rep.decision_mismatches == 0 && rep.max_llr_gap <= 1e-9,
            format!(
                "1000 trials q<=8: {} leaf / {} decision mismatches, max LLR gap {:e}",
                rep.leaf_mismatches, rep.decision_mismatches, rep.max_llr_gap
            ),
        );
    }
}

fn properties(r: &mut Report) {
    let limit = Duration::from_secs(30);
    let (v, t) = timed(|| MapKind::ALL.iter().map(|&k| common::forward_ordering_violations(k, 10_000, 31)).sum::<usize>());
    r.check("6.forward_ordering", v == 0 && t < limit, format!("{v} violations over 3 x 10^4 pairs in {t:?}"));
    let (v, t) = timed(|| MapKind::ALL.iter().map(|&k| common::separation_violations(k, 100, 500, 32)).sum::<usize>());
    r.check("6.separation", v == 0 && t < limit, format!("{v} violating pairs over 3 x 100, d <= 500 in {t:?}"));
    let (v, t) = timed(|| MapKind::ALL.iter().map(|&k| common::round_trip_failures(k, 12)).sum::<usize>());
    r.check("6.round_trip", v == 0 && t < limit, format!("{v} failures over all prefixes q <= 12 in {t:?}"));
}

fn bound_consistency(r: &mut Report) {
    let (sigma2, d_max, trials) = (0.2, 10, 100_000);
    let errs = size_first_bit_errors(MapKind::Bsm, 2.0, sigma2, d_max, trials, 41).unwrap();
    let mut worst = f64::NEG_INFINITY;
    let mut ok = true;
    for (k, &e) in errs.iter().enumerate() {
        let d = k + 1;
        let p = e as f64 / trials as f64;
        let se = (p * (1.0 - p) / trials as f64).sqrt();
        let b = tsb(1, d, sigma2, MapKind::Bsm, 2.0, 41).unwrap().value;
        ok &= p <= b + 3.0 * se;
        worst = worst.max(p - b - 3.0 * se);
    }
    r.check("7.size_tsb", ok, format!("P_1^d(e) <= tsb + 3 SE for d=1..{d_max}; worst margin {worst:.3e}"));

    let trials = 100_000;
    for map in MapKind::ALL {
        let mut rng = RngSpec::new(42).reference_rng();
        let model = MapModel::new(map);
        let refs = Arc::new(gen_initial_conditions(model, 200, default_run_limit(map, 5), true, &mut rng).unwrap());
        let mut worst_z: f64 = 0.0;
        for d in [1, 3, 10] {
            let sigma2 = 1.0;
            let p = error_prob_exact(refs.de2(d).unwrap(), sigma2).unwrap();
            let e = bw_single_bit_errors(&refs, sigma2, d, trials, 43).unwrap();
            let se = (p * (1.0 - p) / trials as f64).sqrt();
            worst_z = worst_z.max((e as f64 / trials as f64 - p).abs() / se);
        }
        r.check(&format!("7.bw.{map}"), worst_z <= 3.0, format!("single-bit errors vs exact at d in {{1,3,10}}: max |z| {worst_z:.3}"));
    }
}

fn residual(r: &mut Report, c: &Campaigns) {
    let worst = c.runs.iter().map(|(_, m)| m.residual_rate()).fold(0.0, f64::max);
    let broken = c.runs.iter().filter(|(_, m)| m.failed_blocks > 0).count();
    r.check(
        "8.residual",
        worst <= 3.0 * PE_RES,
        format!("worst released-bit error rate {worst:.3e} over {} runs ({broken} with failed blocks)", c.runs.len()),
    );
}

fn outputs(cfg: &SimConfig, m: &Metrics) -> [String; 4] {
    [ber_by_position_csv(m), ber_avg_csv(m), efficiency_hist_csv(m), summary_json(m, cfg)]
}

fn determinism(r: &mut Report) {
    for (scheme, map, blocks) in [(Scheme::Size, MapKind::Bsm, 2000), (Scheme::Bw, MapKind::Logistic, 500)] {
        let cfg = SimConfig::defaults(scheme, map, 0.5);
        let base = outputs(&cfg, &run_campaign_with_workers(&cfg, blocks, Some(1)).unwrap());
        let same = [4, 16].iter().all(|&w| outputs(&cfg, &run_campaign_with_workers(&cfg, blocks, Some(w)).unwrap()) == base);
        r.check(&format!("9.{scheme}.{map}"), same, format!("{blocks} blocks: outputs identical for 1, 4 and 16 workers"));
    }
}

fn main() -> ExitCode {
    let mut r = Report::default();
    analytic_constants(&mut r);
    oracle(&mut r);
    properties(&mut r);
    bound_consistency(&mut r);
    determinism(&mut r);
    let c = Campaigns::run_all();
    mean_delay(&mut r, &c);
    snr(&mut r, &c);
    anytime_signature(&mut r, &c);
    residual(&mut r, &c);
    println!("acceptance: {} passed, {} failed", r.passed, r.failed);
    if r.failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
