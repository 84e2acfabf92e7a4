//! Brute-force certificates and explicit constructions around the moment
//! constrained bounds: a grid search for pairs undercutting the bound, the
//! three-point pair that beats it for `α < -1`, and the quaternary sequence
//! whose divergence vanishes when the means agree.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::cmp::Ordering;
use thiserror::Error;

use crate::bounds::{alpha_lower_bound, binary_pair_from_moments, BoundError, EQUAL_MEANS_TOL};
use crate::divergences::{alpha_divergence, binary_alpha_divergence, ExtendedValue};
use crate::measures::{MeasureError, MeasurePair, MomentSpec};

/// Weights below this are an infeasible support; above it they are clamped.
pub const WEIGHT_FEASIBILITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("support points are not distinct")]
    SingularSystem,
    #[error("moments are not attainable on this support (weight {0:e})")]
    Infeasible(f64),
    #[error("no support on the search grid satisfies both moment constraints")]
    NoFeasiblePoint,
    #[error("invalid search configuration: {0}")]
    InvalidConfig(String),
    #[error("means coincide; the bound is zero and no search is needed")]
    EqualMeans,
    #[error("need 2 + αδ > 0, got α = {alpha}, δ = {delta}")]
    DeltaInvalid { alpha: f64, delta: f64 },
    #[error("no σ_Q in the scan produced a positive gap")]
    ScanFailed,
    #[error("j = {j} is below ξ = {xi}; the sequence weights leave [0, 1]")]
    JTooSmall { j: u64, xi: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Bound(#[from] BoundError),
}

/// Weights on three distinct points with the given mean and variance.
///
/// Solves `Σ w_i u_i^k = A_k` for `k = 0, 1, 2` in Lagrange form:
/// `w_i = (V + (m - u_j)(m - u_k)) / ((u_i - u_j)(u_i - u_k))`.
pub fn weights_for_support(
    support: [f64; 3],
    mean: f64,
    variance: f64,
) -> Result<[f64; 3], OracleError> {
    let u = support;
    if u.iter().any(|x| !x.is_finite()) {
        return Err(OracleError::InvalidInput("non-finite support point".into()));
    }
    if u[0] == u[1] || u[0] == u[2] || u[1] == u[2] {
        return Err(OracleError::SingularSystem);
    }
    let mut w = [0.0; 3];
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        w[i] = (variance + (mean - u[j]) * (mean - u[k])) / ((u[i] - u[j]) * (u[i] - u[k]));
    }
    let most_negative = w.iter().copied().fold(f64::INFINITY, f64::min);
    if most_negative < -WEIGHT_FEASIBILITY_TOL || w.iter().any(|x| !x.is_finite()) {
        return Err(OracleError::Infeasible(most_negative));
    }
    for x in &mut w {
        *x = x.max(0.0);
    }
    Ok(w)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchConfig {
    pub support_radius: f64,
    pub grid_points_per_axis: usize,
    /// 3: both measures on one triple; 4: each on a triple of a 4-point set.
    pub support_size: usize,
    pub random_restarts: usize,
    pub seed: u64,
    /// Points added to the regular grid.
    pub extra_points: Vec<f64>,
}

impl SearchConfig {
    pub fn new(support_radius: f64, grid_points_per_axis: usize, seed: u64) -> Self {
        Self {
            support_radius,
            grid_points_per_axis,
            support_size: 3,
            random_restarts: 0,
            seed,
            extra_points: Vec::new(),
        }
    }

    fn validate(&self, spec: &MomentSpec) -> Result<(), OracleError> {
        let reach = (spec.mean_p.abs() + 3.0 * spec.sigma_p)
            .max(spec.mean_q.abs() + 3.0 * spec.sigma_q);
        if !(self.support_radius > reach) || !self.support_radius.is_finite() {
            return Err(OracleError::InvalidConfig(format!(
                "support radius {} must exceed {reach}",
                self.support_radius
            )));
        }
        if self.grid_points_per_axis < 5 {
            return Err(OracleError::InvalidConfig(
                "at least 5 grid points per axis are required".into(),
            ));
        }
        if !matches!(self.support_size, 3 | 4) {
            return Err(OracleError::InvalidConfig(format!(
                "support size must be 3 or 4, got {}",
                self.support_size
            )));
        }
        if self.extra_points.iter().any(|x| !x.is_finite()) {
            return Err(OracleError::InvalidConfig("non-finite extra point".into()));
        }
        Ok(())
    }

    fn grid(&self) -> Vec<f64> {
        let n = self.grid_points_per_axis;
        let r = self.support_radius;
        let mut g: Vec<f64> = (0..n)
            .map(|i| -r + 2.0 * r * i as f64 / (n - 1) as f64)
            .chain(self.extra_points.iter().copied())
            .collect();
        g.sort_by(f64::total_cmp);
        g.dedup();
        g
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchResult {
    pub alpha: f64,
    pub best_value: ExtendedValue,
    pub best_pair: MeasurePair,
    pub bound_value: f64,
    /// `best_value - bound_value`; negative values undercut the bound.
    pub gap: f64,
    pub evaluations: usize,
    pub feasible: usize,
    pub feasibility_ratio: f64,
}

#[derive(Clone)]
struct Candidate {
    value: f64,
    support: Vec<f64>,
    p: Vec<f64>,
    q: Vec<f64>,
}

fn better(a: Candidate, b: Candidate) -> Candidate {
    let ord = a.value.total_cmp(&b.value).then_with(|| {
        a.support
            .iter()
            .zip(&b.support)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| *o != Ordering::Equal)
            .unwrap_or_else(|| a.support.len().cmp(&b.support.len()))
    });
    if ord == Ordering::Greater {
        b
    } else {
        a
    }
}

/// A support to try: the sorted points plus which triple carries `P` and
/// which carries `Q` (indices into the points).
struct Trial {
    points: Vec<f64>,
    p_idx: [usize; 3],
    q_idx: [usize; 3],
}

fn evaluate(trial: &Trial, spec: &MomentSpec, alpha: f64) -> Option<Candidate> {
    let pick = |idx: [usize; 3]| idx.map(|i| trial.points[i]);
    let wp = weights_for_support(pick(trial.p_idx), spec.mean_p, spec.var_p()).ok()?;
    let wq = weights_for_support(pick(trial.q_idx), spec.mean_q, spec.var_q()).ok()?;
    let mut p = vec![0.0; trial.points.len()];
    let mut q = vec![0.0; trial.points.len()];
    for k in 0..3 {
        p[trial.p_idx[k]] = wp[k];
        q[trial.q_idx[k]] = wq[k];
    }
    let pair = MeasurePair::from_weights(&trial.points, &p, &q).ok()?;
    Some(Candidate {
        value: alpha_divergence(&pair, alpha).value(),
        support: trial.points.clone(),
        p,
        q,
    })
}

fn trials(cfg: &SearchConfig) -> Vec<Trial> {
    let grid = cfg.grid();
    let n = grid.len();
    let mut out = Vec::new();
    let mut push_support = |points: Vec<f64>| {
        if points.windows(2).any(|w| w[0] >= w[1]) {
            return;
        }
        if points.len() == 3 {
            out.push(Trial {
                points,
                p_idx: [0, 1, 2],
                q_idx: [0, 1, 2],
            });
        } else {
            let triples = [[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]];
            for p_idx in triples {
                for q_idx in triples {
                    out.push(Trial {
                        points: points.clone(),
                        p_idx,
                        q_idx,
                    });
                }
            }
        }
    };
    if cfg.support_size == 3 {
        for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    push_support(vec![grid[i], grid[j], grid[k]]);
                }
            }
        }
    } else {
        for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    for l in k + 1..n {
                        push_support(vec![grid[i], grid[j], grid[k], grid[l]]);
                    }
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let r = cfg.support_radius;
    for _ in 0..cfg.random_restarts {
        let mut pts: Vec<f64> = (0..cfg.support_size)
            .map(|_| rng.random_range(-r..=r))
            .collect();
        pts.sort_by(f64::total_cmp);
        push_support(pts);
    }
    out
}

/// Minimizes `D_A^(α)(P‖Q)` over pairs on small supports drawn from a grid
/// on `[-R, R]` and from seeded random supports, and compares the minimum
/// with the two-point bound.
///
/// Weights are not searched: on three points the mean and variance fix
/// them. Work items run in parallel; the reduction orders candidates by
/// value and then lexicographically by support, so the result does not
/// depend on the thread count.
pub fn min_search(
    spec: &MomentSpec,
    alpha: f64,
    cfg: &SearchConfig,
) -> Result<SearchResult, OracleError> {
    let spec = spec.validated()?;
    if !alpha.is_finite() {
        return Err(OracleError::InvalidInput(format!("order {alpha} is not finite")));
    }
    if spec.gap().abs() <= EQUAL_MEANS_TOL {
        return Err(OracleError::EqualMeans);
    }
    cfg.validate(&spec)?;
    let bound = alpha_lower_bound(&spec, alpha)?.bound.value();

    let work = trials(cfg);
    let evaluations = work.len();
    let (best, feasible) = work
        .par_iter()
        .map(|t| match evaluate(t, &spec, alpha) {
            Some(c) => (Some(c), 1usize),
            None => (None, 0),
        })
        .reduce(
            || (None, 0),
            |(a, na), (b, nb)| {
                let best = match (a, b) {
                    (Some(a), Some(b)) => Some(better(a, b)),
                    (a, b) => a.or(b),
                };
                (best, na + nb)
            },
        );
    let best = best.ok_or(OracleError::NoFeasiblePoint)?;
    let best_pair = MeasurePair::from_weights(&best.support, &best.p, &best.q)?;
    let best_value = ExtendedValue::new(best.value).unwrap_or(ExtendedValue::INFINITY);
    Ok(SearchResult {
        alpha,
        best_value,
        best_pair,
        bound_value: bound,
        gap: best.value - bound,
        evaluations,
        feasible,
        feasibility_ratio: feasible as f64 / evaluations.max(1) as f64,
    })
}

/// One point of the `σ_Q` scan for the `α < -1` construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanPoint {
    pub sigma_q: f64,
    pub bound: f64,
    /// Bound minus the divergence of the three-point pair.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CounterexampleReport {
    pub alpha: f64,
    pub delta: f64,
    pub u3: f64,
    pub sigma_q: f64,
    pub pair: MeasurePair,
    /// `D_A^(α)(P‖Q)` of the three-point pair.
    pub divergence: f64,
    /// Two-point bound for `(m_P, σ_P, m_Q, σ_Q)`.
    pub bound: f64,
    /// `bound - divergence`; positive means the bound fails.
    pub gap: f64,
    /// `d_A^(α)(r'‖s')`, the limit of `divergence` as `u3 → ∞`.
    pub limit_divergence: f64,
    /// `P(u3)^α Q(u3)^(1-α)`.
    pub tail_term: f64,
    /// Largest `σ_Q²` on the scan grid with `x(σ_Q²) > 1/|α|`.
    pub sigma_star: f64,
    pub scan: Vec<ScanPoint>,
}

/// Number of values `min(σ*, 1) · 2^-k` tried in the `σ_Q` scan.
pub const SIGMA_SCAN_STEPS: usize = 24;

/// `x(z) = 2v|a| / (V_P + z + a²)` with `v` the half-width of the extremal
/// pair for `σ_Q² = z`.
fn x_of(vp: f64, z: f64, a: f64) -> f64 {
    let a2 = a * a;
    let d = ((z - vp) * (z - vp) + 2.0 * a2 * (vp + z) + a2 * a2).sqrt();
    d / (vp + z + a2)
}

/// Three-point pair showing that for `α < -1` the two-point value is not a
/// lower bound.
///
/// `(R', S')` is the extremal pair for `σ_Q = 0`; `S'` is a point mass at
/// `m_Q`. With `ε = u3^-(2+δ)` the pair is
/// `P = (r'_Q - ε, 1 - r'_Q, ε)` and `Q = (1 - σ_Q²/u3², 0, σ_Q²/u3²)` on
/// `(m_Q, u_other, u3)`, where `r'_Q = R'({m_Q})`. Its divergence tends to
/// `d_A^(α)(r'‖s')` while its moments tend to `(m_P, σ_P, m_Q, σ_Q)`, whose
/// two-point value is larger for suitable `σ_Q`.
pub fn counterexample_alpha_lt_minus1(
    mean_p: f64,
    sigma_p: f64,
    mean_q: f64,
    alpha: f64,
    delta: f64,
    u3: f64,
) -> Result<CounterexampleReport, OracleError> {
    if !(alpha < -1.0) {
        return Err(OracleError::InvalidInput(format!("need α < -1, got {alpha}")));
    }
    if !(delta > 0.0) || !(2.0 + alpha * delta > 0.0) {
        return Err(OracleError::DeltaInvalid { alpha, delta });
    }
    let base = MomentSpec::new(mean_p, sigma_p, mean_q, 0.0)?;
    let limit = binary_pair_from_moments(&base)?;
    // S' is a point mass; find its atom and R's mass there
    let (u_q, u_other, r_q) = if limit.s >= 0.5 {
        (limit.u1, limit.u2, limit.r)
    } else {
        (limit.u2, limit.u1, limit.r_complement())
    };
    if !(u3.is_finite() && u3 > u_q.abs().max(u_other.abs()) && u3 > 1.0) {
        return Err(OracleError::InvalidInput(format!(
            "u3 = {u3} must exceed 1 and the two-point support"
        )));
    }
    let limit_divergence = binary_alpha_divergence(limit.r, limit.s, alpha)
        .map_err(|e| OracleError::InvalidInput(e.to_string()))?
        .value();

    let eps = u3.powf(-(2.0 + delta));
    if eps >= r_q {
        return Err(OracleError::InvalidInput(format!(
            "u3 = {u3} too small: tail mass {eps} exceeds {r_q}"
        )));
    }
    let build = |sigma_q: f64| -> Result<(MeasurePair, f64), OracleError> {
        let tail_q = sigma_q * sigma_q / (u3 * u3);
        let pair = MeasurePair::from_weights(
            &[u_q, u_other, u3],
            &[r_q - eps, 1.0 - r_q, eps],
            &[1.0 - tail_q, 0.0, tail_q],
        )?;
        let d = alpha_divergence(&pair, alpha).value();
        Ok((pair, d))
    };

    let vp = sigma_p * sigma_p;
    let a = mean_p - mean_q;
    let threshold = 1.0 / alpha.abs();
    let top = 4.0 * (vp + a * a).max(1.0);
    let z_star = (0..200)
        .map(|k| top * 0.5f64.powi(k))
        .find(|&z| x_of(vp, z, a) > threshold)
        .ok_or(OracleError::ScanFailed)?;
    let sigma_star = z_star.sqrt();

    // σ_Q ≤ 1 keeps the tail coefficient σ_Q^(2-2α) at most 1
    let start = sigma_star.min(1.0);
    let mut scan = Vec::with_capacity(SIGMA_SCAN_STEPS);
    let mut best: Option<(f64, f64)> = None;
    for k in 0..SIGMA_SCAN_STEPS {
        let sigma_q = start * 0.5f64.powi(k as i32);
        let spec = MomentSpec::new(mean_p, sigma_p, mean_q, sigma_q)?;
        let bound = alpha_lower_bound(&spec, alpha)?.bound.value();
        let (_, d) = build(sigma_q)?;
        let gap = bound - d;
        scan.push(ScanPoint {
            sigma_q,
            bound,
            gap,
        });
        // rank by the u3-independent limiting gap so the choice is stable
        let limit_gap = bound - limit_divergence;
        if gap > 0.0 && best.is_none_or(|(_, g)| limit_gap > g) {
            best = Some((sigma_q, limit_gap));
        }
    }
    let (sigma_q, _) = best.ok_or(OracleError::ScanFailed)?;
    let (pair, divergence) = build(sigma_q)?;
    let spec = MomentSpec::new(mean_p, sigma_p, mean_q, sigma_q)?;
    let bound = alpha_lower_bound(&spec, alpha)?.bound.value();
    let tail_q = sigma_q * sigma_q / (u3 * u3);
    let tail_term = (alpha * eps.ln() + (1.0 - alpha) * tail_q.ln()).exp();
    Ok(CounterexampleReport {
        alpha,
        delta,
        u3,
        sigma_q,
        pair,
        divergence,
        bound,
        gap: bound - divergence,
        limit_divergence,
        tail_term,
        sigma_star,
        scan,
    })
}

/// `j`-th member of a pair sequence with means 0, standard deviations
/// `σ_P` and `σ_Q`, and divergence `d_A^(α)(ξ/j ‖ 1/j) → 0`.
///
/// `Q_j` puts `1/2 - 1/(2j)` on `±1` and `1/(2j)` on `±μ_j` with
/// `μ_j = √(1 + j(σ_Q² - 1))`; `P_j` uses `ξ = (σ_P² - 1)/(σ_Q² - 1)` in
/// place of 1 in the small masses. When a variance is at most 1 the
/// construction runs at scaled deviations `√2 σ / σ_min` and the support is
/// scaled back by `σ_min / √2`.
pub fn equal_means_sequence(sigma_p: f64, sigma_q: f64, j: u64) -> Result<MeasurePair, OracleError> {
    if !(sigma_p > 0.0 && sigma_q > 0.0 && sigma_p.is_finite() && sigma_q.is_finite()) {
        return Err(OracleError::InvalidInput(
            "standard deviations must be positive and finite".into(),
        ));
    }
    if j == 0 {
        return Err(OracleError::JTooSmall { j, xi: f64::NAN });
    }
    let (vp, vq) = (sigma_p * sigma_p, sigma_q * sigma_q);
    let sigma_min = sigma_p.min(sigma_q);
    let (scale, vp, vq) = if vp.min(vq) < 1.0 || vq == 1.0 {
        let s = 2.0 / (sigma_min * sigma_min);
        (sigma_min / 2f64.sqrt(), vp * s, vq * s)
    } else {
        (1.0, vp, vq)
    };
    let xi = (vp - 1.0) / (vq - 1.0);
    let jf = j as f64;
    if xi > jf {
        return Err(OracleError::JTooSmall { j, xi });
    }
    let mu = (1.0 + jf * (vq - 1.0)).sqrt();
    let points = [-mu * scale, -scale, scale, mu * scale];
    let masses = |c: f64| {
        let small = c / (2.0 * jf);
        let large = 0.5 - small;
        [small, large, large, small]
    };
    Ok(MeasurePair::from_weights(&points, &masses(xi), &masses(1.0))?)
}

/// Outcome of the sign check of
/// `F(x) = ln[(1 - αx)(1 + x)^α / ((1 + αx)(1 - x)^α)]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignCheckReport {
    pub evaluated: usize,
    pub violations: usize,
    /// Smallest `sign(x) · F(x)` on the grid.
    pub min_signed_value: f64,
    /// `(α, x, F)` where `min_signed_value` is attained.
    pub worst: Option<(f64, f64, f64)>,
}

/// `F(x) = 2α artanh(x) - 2 artanh(αx)`; `±∞` at `x = ±1`.
pub fn artanh_difference(alpha: f64, x: f64) -> f64 {
    2.0 * alpha * x.atanh() - 2.0 * (alpha * x).atanh()
}

/// Checks `F > 0` on `(0, 1]` and `F < 0` on `[-1, 0)` for `0 < α < 1`.
pub fn lemma5_scan(alpha_grid: &[f64], x_grid: &[f64]) -> SignCheckReport {
    let mut report = SignCheckReport {
        evaluated: 0,
        violations: 0,
        min_signed_value: f64::INFINITY,
        worst: None,
    };
    for &alpha in alpha_grid {
        for &x in x_grid {
            if x == 0.0 {
                continue;
            }
            let f = artanh_difference(alpha, x);
            let signed = x.signum() * f;
            report.evaluated += 1;
            if !(signed > 0.0) {
                report.violations += 1;
            }
            if report.worst.is_none() || signed < report.min_signed_value {
                report.min_signed_value = signed;
                report.worst = Some((alpha, x, f));
            }
        }
    }
    report
}
