//! Divergence evaluators on finite measure pairs.
//!
//! The α-divergence is evaluated term by term with the generator
//!
//! ```text
//! f(t) = (t^α - 1 - α (t - 1)) / (α (α - 1))
//! ```
//!
//! which differs from the textbook `(t^α - t) / (α (α - 1))` by a multiple
//! of `t - 1` and therefore yields the same divergence for normalized
//! measures. Because `f(1) = f'(1) = 0` every term is non-negative, so the
//! sum never suffers the `(Σ - 1) / (α (α - 1))` cancellation, and each term
//! is a function of `δ = p/q - 1` that stays accurate when `p ≈ q` and when
//! `α` approaches the logarithmic orders 0 and 1.

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use thiserror::Error;

use crate::measures::MeasurePair;

/// Orders this close to 0 or 1 are evaluated with the exact logarithmic
/// branch.
pub const BRANCH_TOL: f64 = 1e-12;

/// Negative results of magnitude up to this are treated as rounding noise.
pub const NEGATIVE_CLAMP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DivergenceError {
    #[error("invalid Rényi order {0}: orders must be non-negative or infinite")]
    InvalidOrder(f64),
    #[error("probability {0} outside [0, 1]")]
    ProbabilityOutOfRange(f64),
    #[error("evaluator produced {0}, a negative divergence beyond rounding noise")]
    InternalConsistency(f64),
}

/// A non-negative divergence value that may be `+∞`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct ExtendedValue(f64);

impl ExtendedValue {
    pub const ZERO: Self = Self(0.0);
    pub const INFINITY: Self = Self(f64::INFINITY);

    /// Accepts `x ≥ -1e-12` (clamping to zero) and `+∞`; anything else is an
    /// evaluator bug.
    pub fn new(x: f64) -> Result<Self, DivergenceError> {
        if x.is_nan() || x < -NEGATIVE_CLAMP_TOL {
            return Err(DivergenceError::InternalConsistency(x));
        }
        Ok(Self(x.max(0.0)))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }

    pub fn finite(self) -> Option<f64> {
        self.is_finite().then_some(self.0)
    }
}

impl fmt::Display for ExtendedValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            f.write_str("inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl Serialize for ExtendedValue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for ExtendedValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(x) => ExtendedValue::new(x).map_err(serde::de::Error::custom),
            Repr::Str(s) if s == "inf" => Ok(ExtendedValue::INFINITY),
            Repr::Str(s) => Err(serde::de::Error::custom(format!(
                "expected a number or \"inf\", got {s:?}"
            ))),
        }
    }
}

/// Order of a Rényi divergence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaOrder {
    Finite(f64),
    Infinity,
}

impl AlphaOrder {
    fn validated(self) -> Result<Self, DivergenceError> {
        match self {
            AlphaOrder::Finite(a) if a.is_nan() || a < 0.0 => Err(DivergenceError::InvalidOrder(a)),
            AlphaOrder::Finite(a) if a == f64::INFINITY => Ok(AlphaOrder::Infinity),
            other => Ok(other),
        }
    }
}

impl From<f64> for AlphaOrder {
    fn from(a: f64) -> Self {
        if a == f64::INFINITY {
            AlphaOrder::Infinity
        } else {
            AlphaOrder::Finite(a)
        }
    }
}

impl fmt::Display for AlphaOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlphaOrder::Finite(a) => write!(f, "{a}"),
            AlphaOrder::Infinity => f.write_str("inf"),
        }
    }
}

impl std::str::FromStr for AlphaOrder {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "inf" | "infinity" | "Infinity" | "+inf" => Ok(AlphaOrder::Infinity),
            other => other
                .parse::<f64>()
                .map(AlphaOrder::from)
                .map_err(|e| format!("invalid order {other:?}: {e}")),
        }
    }
}

/// One support point of a measure pair: the two masses and, when both are
/// positive, `δ = p/q - 1` computed by the caller as accurately as it can.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Cell {
    pub p: f64,
    pub q: f64,
    pub delta: f64,
}

impl Cell {
    pub fn from_masses(p: f64, q: f64) -> Self {
        let delta = if p > 0.0 && q > 0.0 { (p - q) / q } else { 0.0 };
        Self { p, q, delta }
    }

    /// `(p/q, ln(p/q))`. Far below 1 the ratio is taken from the masses,
    /// since `1 + δ` there keeps only the absolute accuracy of `δ`.
    fn ratio_and_log(self) -> (f64, f64) {
        if self.delta < -0.5 {
            let u = self.p / self.q;
            (u, u.ln())
        } else {
            (1.0 + self.delta, self.delta.ln_1p())
        }
    }
}

fn snap_order(alpha: f64) -> f64 {
    if (alpha - 1.0).abs() <= BRANCH_TOL {
        1.0
    } else if alpha.abs() <= BRANCH_TOL {
        0.0
    } else {
        alpha
    }
}

/// `expm1(x) / x`, continuous at zero.
fn expm1_ratio(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x.exp_m1() / x
    }
}

/// The normalized generator `f(p/q)` of a cell with both masses positive.
fn generator(cell: Cell, alpha: f64) -> f64 {
    let delta = cell.delta;
    if delta.abs() * (alpha.abs() + 2.0) <= 0.25 {
        generator_series(delta, alpha)
    } else {
        let (u, l) = cell.ratio_and_log();
        generator_log_form(delta, u, l, alpha)
    }
}

/// `f(u)` from `δ = u - 1`, `u` and `L = ln u`.
fn generator_log_form(delta: f64, u: f64, l: f64, alpha: f64) -> f64 {
    if alpha >= 0.5 {
        // (u L φ((α-1) L) - δ) / α, exact KL generator at α = 1
        (u * l * expm1_ratio((alpha - 1.0) * l) - delta) / alpha
    } else {
        // (L φ(α L) - δ) / (α - 1), exact reverse-KL generator at α = 0
        (l * expm1_ratio(alpha * l) - delta) / (alpha - 1.0)
    }
}

/// Σ_{k≥2} [(α-2)(α-3)…(α-k+1) / k!] δ^k, the binomial series of `f(1 + δ)`
/// with the `α (α - 1)` factor already divided out.
fn generator_series(delta: f64, alpha: f64) -> f64 {
    let mut term = 0.5 * delta * delta;
    let mut sum = term;
    for k in 2..200 {
        let kf = k as f64;
        term *= (alpha - kf) * delta / (kf + 1.0);
        sum += term;
        if term.abs() <= 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

/// Contribution of one cell to `D_A^(α)`, with the zero-mass conventions of
/// the normalized generator: `f(0) = 1/α` for `α > 0` and
/// `lim f(u)/u = 1/(1-α)` for `α < 1`, both infinite otherwise.
pub(crate) fn alpha_cell(cell: Cell, alpha: f64) -> f64 {
    let Cell { p, q, .. } = cell;
    if p == 0.0 && q == 0.0 {
        0.0
    } else if q == 0.0 {
        if alpha >= 1.0 {
            f64::INFINITY
        } else {
            p / (1.0 - alpha)
        }
    } else if p == 0.0 {
        if alpha <= 0.0 {
            f64::INFINITY
        } else {
            q / alpha
        }
    } else {
        let v = q * generator(cell, alpha);
        // each term is non-negative; stray negatives are last-bit noise
        if v < 0.0 {
            0.0
        } else {
            v
        }
    }
}

pub(crate) fn alpha_from_cells<I>(cells: I, alpha: f64) -> ExtendedValue
where
    I: IntoIterator<Item = Cell>,
{
    let alpha = snap_order(alpha);
    let mut total = 0.0;
    for cell in cells {
        let v = alpha_cell(cell, alpha);
        if v.is_infinite() {
            return ExtendedValue::INFINITY;
        }
        total += v;
    }
    debug_assert!(!total.is_nan(), "NaN α-divergence at α = {alpha}");
    ExtendedValue(total.max(0.0))
}

/// `Σ p^α q^(1-α)` with the limiting conventions for zero masses.
fn power_sum<I>(cells: I, alpha: f64) -> f64
where
    I: IntoIterator<Item = Cell>,
{
    let mut s = 0.0;
    for cell in cells {
        let Cell { p, q, .. } = cell;
        if p == 0.0 {
            continue;
        }
        if q == 0.0 {
            if alpha > 1.0 {
                return f64::INFINITY;
            }
            continue;
        }
        s += q * (alpha * cell.ratio_and_log().1).exp();
    }
    s
}

pub(crate) fn renyi_from_cells(
    cells: &[Cell],
    order: AlphaOrder,
) -> Result<ExtendedValue, DivergenceError> {
    let raw = match order.validated()? {
        AlphaOrder::Infinity => {
            let mut best = f64::NEG_INFINITY;
            for c in cells.iter().filter(|c| c.p > 0.0) {
                if c.q == 0.0 {
                    return Ok(ExtendedValue::INFINITY);
                }
                best = best.max(c.ratio_and_log().1);
            }
            best
        }
        AlphaOrder::Finite(a) => {
            let a = snap_order(a);
            if a == 0.0 {
                let mass: f64 = cells.iter().filter(|c| c.p > 0.0).map(|c| c.q).sum();
                -mass.min(1.0).ln()
            } else if a == 1.0 {
                return Ok(alpha_from_cells(cells.iter().copied(), 1.0));
            } else {
                let s = power_sum(cells.iter().copied(), a);
                if s.is_infinite() {
                    return Ok(ExtendedValue::INFINITY);
                }
                let log_s = if (s - 1.0).abs() < 0.5 {
                    // Σ - 1 = α(α-1) D_A, known to full relative precision
                    let d = alpha_from_cells(cells.iter().copied(), a).value();
                    (a * (a - 1.0) * d).ln_1p()
                } else {
                    s.ln()
                };
                log_s / (a - 1.0)
            }
        }
    };
    if raw == f64::INFINITY {
        return Ok(ExtendedValue::INFINITY);
    }
    ExtendedValue::new(raw)
}

fn pair_cells(pair: &MeasurePair) -> Vec<Cell> {
    pair.p_weights()
        .iter()
        .zip(pair.q_weights())
        .map(|(&p, &q)| Cell::from_masses(p, q))
        .collect()
}

/// Generic f-divergence `Σ q f(p/q)`.
///
/// `f_at_zero` is `lim_{t→0+} f(t)` and `slope_at_infinity` is
/// `lim_{u→∞} f(u)/u`; either may be `+∞`.
pub fn f_divergence<F>(
    pair: &MeasurePair,
    f: F,
    f_at_zero: f64,
    slope_at_infinity: f64,
) -> Result<ExtendedValue, DivergenceError>
where
    F: Fn(f64) -> f64,
{
    let mut total = 0.0;
    for (&p, &q) in pair.p_weights().iter().zip(pair.q_weights()) {
        let term = if p == 0.0 && q == 0.0 {
            0.0
        } else if q == 0.0 {
            p * slope_at_infinity
        } else if p == 0.0 {
            q * f_at_zero
        } else {
            q * f(p / q)
        };
        if term == f64::INFINITY {
            return Ok(ExtendedValue::INFINITY);
        }
        total += term;
    }
    ExtendedValue::new(total)
}

/// Basic asymmetric α-divergence `D_A^(α)(P‖Q)` for any finite `α`.
///
/// `α = 1` is the Kullback–Leibler divergence `D(P‖Q)` and `α = 0` the
/// reverse one `D(Q‖P)`; `α = 2, 1/2, -1` give half the Pearson χ², four
/// times the squared Hellinger distance and half the Neyman χ².
pub fn alpha_divergence(pair: &MeasurePair, alpha: f64) -> ExtendedValue {
    assert!(alpha.is_finite(), "α-divergence needs a finite order");
    alpha_from_cells(pair_cells(pair), alpha)
}

/// Rényi divergence of order `α ∈ [0, ∞]`.
pub fn renyi_divergence(
    pair: &MeasurePair,
    order: AlphaOrder,
) -> Result<ExtendedValue, DivergenceError> {
    renyi_from_cells(&pair_cells(pair), order)
}

fn check_probability(x: f64) -> Result<f64, DivergenceError> {
    if (0.0..=1.0).contains(&x) {
        Ok(x)
    } else {
        Err(DivergenceError::ProbabilityOutOfRange(x))
    }
}

fn binary_cells(r: f64, s: f64) -> Result<[Cell; 2], DivergenceError> {
    let r = check_probability(r)?;
    let s = check_probability(s)?;
    Ok([
        Cell::from_masses(r, s),
        Cell::from_masses(1.0 - r, 1.0 - s),
    ])
}

/// `d_A^(α)(r‖s)`: the α-divergence between two-point measures putting
/// mass `r` and `s` on the first point.
pub fn binary_alpha_divergence(
    r: f64,
    s: f64,
    alpha: f64,
) -> Result<ExtendedValue, DivergenceError> {
    assert!(alpha.is_finite(), "α-divergence needs a finite order");
    Ok(alpha_from_cells(binary_cells(r, s)?, alpha))
}

/// `d_R^(α)(r‖s)` for `α ∈ [0, ∞]`.
pub fn binary_renyi_divergence(
    r: f64,
    s: f64,
    order: AlphaOrder,
) -> Result<ExtendedValue, DivergenceError> {
    renyi_from_cells(&binary_cells(r, s)?, order)
}
