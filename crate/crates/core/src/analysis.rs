//! Analytic bounds: distance radii, the tangential-sphere bound, scheme
//! constants, anytime exponents, efficiency tails and the control
//! stabilization threshold.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::Scheme;
use crate::error::{Error, Result};
use crate::maps::{BitPrefix, MapKind, MapModel};
use crate::special::gamma_q;

/// Largest `n` for which the TSB enumerates every prefix.
pub const TSB_EXACT_MAX_N: usize = 12;
/// Prefix draws used by the sampled TSB.
pub const TSB_SAMPLES: usize = 10_000;
/// Default grid size for [`beta_bw_tent`].
pub const DEFAULT_GRID_POINTS: usize = 100_000;
/// Depth searched by [`beta_size`] unless told otherwise.
pub const DEFAULT_SEARCH_DEPTH: usize = 12;

const MAX_TSB_N: usize = 60;
const POWER_ITERATIONS: usize = 1_000;
const POWER_TOL: f64 = 1e-12;

/// `F⁻¹(x + h) − F⁻¹(x − h)` without cancellation.
fn central_difference(kind: MapKind, x: f64, h: f64) -> f64 {
    match kind {
        MapKind::Bsm | MapKind::Tent => 2.0 * h,
        // sin²(a+δ) − sin²(a−δ) = sin 2a · sin 2δ
        MapKind::Logistic => (std::f64::consts::PI * x).sin() * (std::f64::consts::PI * h).sin(),
    }
}

fn check_gamma0(gamma0: f64) -> Result<()> {
    if gamma0 > 0.0 && gamma0.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("gamma0 must be positive, got {gamma0}")))
    }
}

/// Half the distance accumulated over `d` steps between the two sides of
/// the dyadic boundary `ι/2ⁿ`, with `Γ_j = Γ₀·2^j`.
pub fn rho_bar(n: usize, d: usize, iota: u64, map: MapKind, gamma0: f64) -> Result<f64> {
    check_gamma0(gamma0)?;
    if n == 0 || n > MAX_TSB_N || d == 0 {
        return Err(Error::InvalidParameter(format!("rho_bar needs 1 <= n <= {MAX_TSB_N}, d >= 1")));
    }
    let cells = 1u64 << n;
    if iota == 0 || iota >= cells {
        return Err(Error::CellIndexOutOfRange { index: iota, max: cells - 1 });
    }
    let x = iota as f64 / cells as f64;
    let mut sum = 0.0;
    for j in n..n + d {
        let gamma_j = gamma0 * 2f64.powi(j as i32);
        let diff = central_difference(map, x, 2f64.powi(-(j as i32) - 1));
        sum += (gamma_j * diff).powi(2);
    }
    Ok(0.5 * sum.sqrt())
}

/// Radius for the cell of `bits`: the nearest of its one or two
/// boundaries.
pub fn rho_min(n: usize, d: usize, bits: &BitPrefix, map: MapKind, gamma0: f64) -> Result<f64> {
    if bits.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: bits.len() });
    }
    let iota = MapModel::new(map).cell_index(bits)?;
    rho_min_at_cell(n, d, iota, map, gamma0)
}

fn rho_min_at_cell(n: usize, d: usize, iota: u64, map: MapKind, gamma0: f64) -> Result<f64> {
    let cells = 1u64 << n;
    if iota == 0 || iota > cells {
        return Err(Error::CellIndexOutOfRange { index: iota, max: cells });
    }
    if iota == 1 {
        rho_bar(n, d, 1, map, gamma0)
    } else if iota == cells {
        rho_bar(n, d, cells - 1, map, gamma0)
    } else {
        Ok(rho_bar(n, d, iota, map, gamma0)?.min(rho_bar(n, d, iota - 1, map, gamma0)?))
    }
}

/// TSB value, with a standard error when obtained by sampling prefixes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TsbEstimate {
    pub value: f64,
    pub std_error: Option<f64>,
}

/// Tangential-sphere bound on the probability that bit `n` is wrong after
/// `d` further observations.
///
/// Exact over all `2ⁿ` prefixes for `n ≤ 12`; above that the mean over
/// [`TSB_SAMPLES`] uniform prefixes drawn from `seed`.
pub fn tsb(n: usize, d: usize, sigma2: f64, map: MapKind, gamma0: f64, seed: u64) -> Result<TsbEstimate> {
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidParameter(format!("sigma2 must be positive, got {sigma2}")));
    }
    if n == 0 || n > MAX_TSB_N || d == 0 {
        return Err(Error::InvalidParameter(format!("tsb needs 1 <= n <= {MAX_TSB_N}, d >= 1")));
    }
    let a = d as f64 / 2.0;
    let term = |iota: u64| -> Result<f64> {
        let rho = rho_min_at_cell(n, d, iota, map, gamma0)?;
        gamma_q(a, rho * rho / (2.0 * sigma2))
    };
    if n <= TSB_EXACT_MAX_N {
        let cells = 1u64 << n;
        let mut sum = 0.0;
        for iota in 1..=cells {
            sum += term(iota)?;
        }
        return Ok(TsbEstimate { value: (sum / cells as f64).min(1.0), std_error: None });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cells = 1u64 << n;
    let draws = (0..TSB_SAMPLES).map(|_| term(rng.random_range(1..=cells))).collect::<Result<Vec<_>>>()?;
    let k = TSB_SAMPLES as f64;
    let mean = draws.iter().sum::<f64>() / k;
    let var = draws.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (k - 1.0);
    Ok(TsbEstimate { value: mean.min(1.0), std_error: Some((var / k).sqrt()) })
}

/// Distance constant of the adaptive-size scheme for `Γ_j = λ·2^j`.
///
/// `None` when the inverse CDF has a vanishing derivative, since the
/// linear distance growth then fails.
pub fn beta_size(map: MapKind, lambda: f64, search_depth: usize) -> Result<Option<f64>> {
    check_gamma0(lambda)?;
    if search_depth == 0 || search_depth > MAX_TSB_N {
        return Err(Error::InvalidParameter(format!("search depth must be in 1..={MAX_TSB_N}")));
    }
    if MapModel::new(map).cdf_inv_min_slope() <= 0.0 {
        return Ok(None);
    }
    let mut beta = f64::INFINITY;
    for n in 1..=search_depth.min(TSB_EXACT_MAX_N) {
        let cells = 1u64 << n;
        for iota in 1..cells {
            let x = iota as f64 / cells as f64;
            for j in n..=search_depth.max(n) {
                let diff = central_difference(map, x, 2f64.powi(-(j as i32) - 1));
                let v = lambda * lambda / 4.0 * diff * diff * 4f64.powi(j as i32);
                beta = beta.min(v);
            }
        }
    }
    Ok(Some(beta))
}

/// Anytime exponent of the adaptive-size scheme; positive iff
/// `σ² < σ²_sup(β, d₀)`.
pub fn gamma_bar_size(beta: f64, sigma2: f64, d0: usize) -> Result<f64> {
    if !(beta > 0.0) || !(sigma2 > 0.0) || d0 <= 2 {
        return Err(Error::InvalidParameter("gamma_bar_size needs beta > 0, sigma2 > 0, d0 > 2".into()));
    }
    let d0 = d0 as f64;
    let x = beta / sigma2;
    Ok(0.5 * (x - (2.0 * x * d0 * std::f64::consts::E / (d0 - 2.0)).ln()))
}

/// Largest noise variance for which [`gamma_bar_size`] stays positive.
///
/// Solves `x − ln x = ln(2d₀e/(d₀−2))` for `x = β/σ² > 1` by bisection.
pub fn sigma2_sup(beta: f64, d0: usize) -> Result<f64> {
    if !(beta > 0.0) || d0 <= 2 {
        return Err(Error::InvalidParameter("sigma2_sup needs beta > 0, d0 > 2".into()));
    }
    let d0f = d0 as f64;
    let c = (2.0 * d0f * std::f64::consts::E / (d0f - 2.0)).ln();
    let h = |x: f64| x - x.ln() - c;
    let (mut lo, mut hi) = (1.0f64, 1e6f64);
    if h(hi) < 0.0 {
        return Err(Error::InvalidParameter(format!("no root of the threshold equation in (1, 1e6] for d0={d0}")));
    }
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if h(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(beta / (0.5 * (lo + hi)))
}

/// Per-step distance constant of the adaptive-bandwidth scheme on a
/// shift-conjugate map with run length limited to `m_r`.
pub fn beta_bw_bsm(m_r: usize, map: MapKind) -> Result<f64> {
    if m_r > 60 {
        return Err(Error::InvalidParameter(format!("run limit {m_r} too large")));
    }
    let h = 2f64.powi(-(m_r as i32) - 2);
    Ok(central_difference(map, 0.5, h).powi(2))
}

fn tent_objective(model: &MapModel, x: f64) -> f64 {
    (model.cdf_inv_unchecked(x) - model.cdf_inv_unchecked(x + 1.0 / 3.0)).powi(2)
}

/// Per-step distance constant of the adaptive-bandwidth scheme on a
/// tent-conjugate map: `inf (g(x) − g(x + 1/3))²` over `x ∈ [1/6, 1/2)`.
pub fn beta_bw_tent(map: MapKind, grid_points: usize) -> Result<f64> {
    if grid_points < 2 {
        return Err(Error::InvalidParameter("grid needs at least two points".into()));
    }
    let model = MapModel::new(map);
    let (lo, hi) = (1.0 / 6.0, 0.5 - 1e-12);
    let step = (hi - lo) / (grid_points - 1) as f64;
    let at = |k: usize| if k + 1 == grid_points { hi } else { lo + k as f64 * step };
    let (mut best_k, mut best) = (0, f64::INFINITY);
    for k in 0..grid_points {
        let v = tent_objective(&model, at(k));
        if v < best {
            best = v;
            best_k = k;
        }
    }
    let mut a = at(best_k.saturating_sub(1));
    let mut b = at((best_k + 1).min(grid_points - 1));
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    for _ in 0..200 {
        if (b - a).abs() < 1e-15 {
            break;
        }
        if tent_objective(&model, c) < tent_objective(&model, d) {
            b = d;
        } else {
            a = c;
        }
        c = b - inv_phi * (b - a);
        d = a + inv_phi * (b - a);
    }
    Ok(best.min(tent_objective(&model, 0.5 * (a + b))))
}

/// Anytime exponent lower bound `β/(8σ²)` of the adaptive-bandwidth scheme.
pub fn gamma_bar_bw(beta: f64, sigma2: f64) -> Result<f64> {
    if !(beta >= 0.0) || !(sigma2 > 0.0) {
        return Err(Error::InvalidParameter("gamma_bar_bw needs beta >= 0, sigma2 > 0".into()));
    }
    Ok(beta / (8.0 * sigma2))
}

fn tail_factor(gamma: f64) -> f64 {
    1.0 + (-2.0 * gamma).exp() / (1.0 - (-gamma).exp())
}

fn check_rate(k: f64, gamma: f64) -> Result<()> {
    if !(k > 0.0) || !(gamma > 0.0) {
        return Err(Error::InvalidParameter(format!("need K > 0 and gamma > 0, got K={k}, gamma={gamma}")));
    }
    Ok(())
}

/// Bound on the probability that the modulation efficiency reaches `d`.
pub fn efficiency_tail(k: f64, gamma: f64, d: usize) -> Result<f64> {
    check_rate(k, gamma)?;
    if gamma.is_infinite() {
        return Ok(0.0);
    }
    Ok(k * tail_factor(gamma) * (-gamma * d as f64).exp())
}

/// Bound on the `m`-th moment of the adaptive-size symbol energy
/// (`m = 1` is the mean energy) when `Γ_d = Γ₀·2^d`.
///
/// `None` when the series diverges, i.e. `γ ≤ m·ln 4`.
pub fn energy_bound_size(k: f64, gamma: f64, gamma0: f64, d0: usize, e0: f64, m: u32) -> Result<Option<f64>> {
    check_rate(k, gamma)?;
    check_gamma0(gamma0)?;
    if m == 0 {
        return Err(Error::InvalidParameter("moment order must be >= 1".into()));
    }
    let ratio = 4f64.powi(m as i32) * (-gamma).exp();
    if gamma <= m as f64 * 4f64.ln() || ratio >= 1.0 {
        return Ok(None);
    }
    let tail = k * gamma0.powi(2 * m as i32) * tail_factor(gamma) * ratio.powi(d0 as i32) / (1.0 - ratio);
    Ok(Some(e0 + tail))
}

/// `Σ_{d ≥ d₀} d·e^{−γd}`.
fn weighted_geometric(gamma: f64, d0: usize) -> f64 {
    let x = (-gamma).exp();
    let d0 = d0 as f64;
    (-gamma * d0).exp() * (d0 - (d0 - 1.0) * x) / (1.0 - x).powi(2)
}

/// Bound on the mean bandwidth of the adaptive-bandwidth scheme, with
/// `Δf` the bandwidth per dimension.
pub fn bandwidth_bound_bw(k: f64, gamma: f64, delta_f: f64, d0: usize, b0: f64) -> Result<f64> {
    check_rate(k, gamma)?;
    if gamma.is_infinite() {
        return Ok(b0);
    }
    Ok(b0 + delta_f * k * tail_factor(gamma) * weighted_geometric(gamma, d0))
}

/// Bound on the mean energy of the adaptive-bandwidth scheme.
pub fn energy_bound_bw(k: f64, gamma: f64, d0: usize, e0: f64) -> Result<f64> {
    check_rate(k, gamma)?;
    if gamma.is_infinite() {
        return Ok(e0);
    }
    Ok(e0 + k * tail_factor(gamma) * weighted_geometric(gamma, d0))
}

/// Anytime exponent needed to stabilize a plant with state matrix `A`:
/// `2·ln ρ(|A|)`, `−∞` for a nilpotent magnitude matrix.
pub fn required_exponent(a: &[Vec<f64>]) -> Result<f64> {
    let n = a.len();
    if n == 0 || a.iter().any(|row| row.len() != n) {
        return Err(Error::InvalidParameter("state matrix must be square and non-empty".into()));
    }
    if a.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("state matrix has non-finite entries".into()));
    }
    // Shifting by I makes ρ + 1 the only eigenvalue of maximal modulus.
    let b: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| a[i][j].abs() + if i == j { 1.0 } else { 0.0 }).collect()).collect();
    let mut v = vec![1.0; n];
    let mut growth = f64::NAN;
    for _ in 0..POWER_ITERATIONS {
        let w: Vec<f64> = b.iter().map(|row| row.iter().zip(&v).map(|(x, y)| x * y).sum()).collect();
        // Collatz-Wielandt bracket; it only closes for irreducible matrices.
        let ratios = w.iter().zip(&v).filter(|(_, &y)| y > 0.0).map(|(x, y)| x / y);
        let (lo, hi) = ratios.fold((f64::INFINITY, 0.0f64), |(l, h), r| (l.min(r), h.max(r)));
        let norm = w.iter().cloned().fold(0.0, f64::max);
        v = w.iter().map(|x| x / norm).collect();
        if hi - lo <= POWER_TOL * hi {
            growth = 0.5 * (lo + hi);
            break;
        }
        let settled = (norm - growth).abs() <= POWER_TOL * norm;
        growth = norm;
        if settled {
            break;
        }
    }
    let rho = (growth - 1.0).max(0.0);
    if rho <= POWER_TOL {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(2.0 * rho.ln())
}

/// Constants of one scheme/map pairing, with optional auxiliary curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub scheme: Scheme,
    pub map: MapKind,
    /// Zero when the distance condition does not hold.
    pub beta: f64,
    pub beta_satisfied: bool,
    /// Anytime exponent at the requested `σ²`, if one was given.
    pub gamma_bar: Option<f64>,
    pub sigma2_sup: Option<f64>,
    pub d0: usize,
    /// Named `(abscissa, value)` curves.
    pub curves: Vec<(String, Vec<(f64, f64)>)>,
}

/// Inputs of [`bounds_report`].
#[derive(Debug, Clone, PartialEq)]
pub struct BoundsQuery {
    pub scheme: Scheme,
    pub map: MapKind,
    pub gamma0: f64,
    pub m_r: usize,
    pub d0: usize,
    pub sigma2: Option<f64>,
    /// Largest `d` for the TSB and tail curves; zero disables them.
    pub curve_len: usize,
}

pub fn bounds_report(query: &BoundsQuery) -> Result<BoundsReport> {
    let BoundsQuery { scheme, map, gamma0, m_r, d0, sigma2, curve_len } = *query;
    let mut curves = Vec::new();
    let (beta, satisfied, sup, gamma_bar) = match scheme {
        Scheme::Size => {
            let beta = beta_size(map, gamma0, DEFAULT_SEARCH_DEPTH)?;
            let sup = match beta {
                Some(b) if d0 > 2 => Some(sigma2_sup(b, d0)?),
                _ => None,
            };
            let gamma_bar = match (beta, sigma2) {
                (Some(b), Some(s)) if d0 > 2 => Some(gamma_bar_size(b, s, d0)?),
                _ => None,
            };
            if let Some(s) = sigma2 {
                let tsb_curve = (1..=curve_len).map(|d| Ok((d as f64, tsb(1, d, s, map, gamma0, 0)?.value))).collect::<Result<Vec<_>>>()?;
                if !tsb_curve.is_empty() {
                    curves.push(("tsb_n1".to_string(), tsb_curve));
                }
            }
            (beta.unwrap_or(0.0), beta.is_some(), sup, gamma_bar)
        }
        Scheme::Bw => {
            let beta = match map {
                MapKind::Bsm => beta_bw_bsm(m_r, map)?,
                MapKind::Tent | MapKind::Logistic => beta_bw_tent(map, DEFAULT_GRID_POINTS)?,
            };
            let gamma_bar = sigma2.map(|s| gamma_bar_bw(beta, s)).transpose()?;
            (beta, true, None, gamma_bar)
        }
    };
    if let Some(g) = gamma_bar.filter(|&g| g > 0.0) {
        let tail = (d0..d0 + curve_len).map(|d| Ok((d as f64, efficiency_tail(1.0, g, d)?))).collect::<Result<Vec<_>>>()?;
        if !tail.is_empty() {
            curves.push(("efficiency_tail_k1".to_string(), tail));
        }
    }
    Ok(BoundsReport { scheme, map, beta, beta_satisfied: satisfied, gamma_bar, sigma2_sup: sup, d0, curves })
}
