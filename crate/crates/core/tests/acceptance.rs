//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::time::{Duration, Instant};

use alphadiv::relations::{
    check_diff_relation_bwd, check_diff_relation_fwd, check_integral_relation,
    check_integral_relation_bwd, small_t_order, DEFAULT_STEP,
};
use alphadiv::{
    alpha_divergence, alpha_lower_bound, counterexample_alpha_lt_minus1, equal_means_sequence,
    lemma5_scan, min_search, renyi_divergence, renyi_lower_bound, weights_for_support,
    AlphaOrder, MeasurePair, MomentSpec, SearchConfig,
};
use astro_float::{BigFloat, RoundingMode};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PREC: usize = 192;
const RM: RoundingMode = RoundingMode::ToEven;

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self {
            passed,
            detail: detail.into(),
        }
    }
}

fn big(x: f64) -> BigFloat {
    BigFloat::from_f64(x, PREC)
}

fn to_f64(x: &BigFloat) -> f64 {
    format!("{x}").parse().unwrap()
}

fn random_spec(rng: &mut ChaCha8Rng) -> MomentSpec {
    loop {
        let mp: f64 = rng.random_range(-5.0..=5.0);
        let mq = rng.random_range(-5.0..=5.0);
        if (mp - mq).abs() <= 1e-3 {
            continue;
        }
        let sp = rng.random_range(0.01..=5.0);
        let sq = rng.random_range(0.01..=5.0);
        return MomentSpec::new(mp, sp, mq, sq).unwrap();
    }
}

fn random_weights(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n)
        .map(|_| -(1.0 - rng.random::<f64>()).ln() + 1e-3)
        .collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|x| x / total).collect()
}

fn random_pair(rng: &mut ChaCha8Rng, n: usize) -> MeasurePair {
    let points: Vec<f64> = (0..n).map(|i| i as f64 + rng.random::<f64>() * 0.5).collect();
    let p = random_weights(rng, n);
    let q = random_weights(rng, n);
    MeasurePair::from_weights(&points, &p, &q).unwrap()
}

fn rel_err(got: f64, want: f64) -> f64 {
    if got == want {
        0.0
    } else {
        (got - want).abs() / want.abs()
    }
}

fn closed_forms() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_chi2: f64 = 0.0;
    let mut worst_hel: f64 = 0.0;
    for _ in 0..1000 {
        let spec = random_spec(&mut rng);
        // extended-precision evaluation of the closed forms
        let a = big(spec.mean_p).sub(&big(spec.mean_q), PREC, RM);
        let a2 = a.mul(&a, PREC, RM);
        let vq = big(spec.sigma_q).mul(&big(spec.sigma_q), PREC, RM);
        let chi2 = to_f64(&a2.div(&vq.mul(&big(2.0), PREC, RM), PREC, RM));
        let sum = big(spec.sigma_p).add(&big(spec.sigma_q), PREC, RM);
        let c = sum.mul(&sum, PREC, RM);
        let root = c.div(&a2.add(&c, PREC, RM), PREC, RM).sqrt(PREC, RM);
        let hel = to_f64(&big(4.0).mul(&big(1.0).sub(&root, PREC, RM), PREC, RM));

        let got_chi2 = alpha_lower_bound(&spec, 2.0).unwrap().bound.value();
        let got_hel = alpha_lower_bound(&spec, 0.5).unwrap().bound.value();
        worst_chi2 = worst_chi2.max(rel_err(got_chi2, chi2));
        worst_hel = worst_hel.max(rel_err(got_hel, hel));
    }
    Outcome::new(
        worst_chi2 <= 1e-12 && worst_hel <= 1e-12,
        format!("max rel err α=2 {worst_chi2:.2e}, α=1/2 {worst_hel:.2e} over 1000 specs"),
    )
}

fn attainment() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let alphas = [-1.0, -0.5, 0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0];
    let mut worst: f64 = 0.0;
    let mut moment_failures = 0;
    for _ in 0..1000 {
        let spec = random_spec(&mut rng);
        for &alpha in &alphas {
            let report = alpha_lower_bound(&spec, alpha).unwrap();
            let bound = report.bound.value();
            let pair = report.witness.unwrap().to_measure_pair().unwrap();
            let d = alpha_divergence(&pair, alpha).value();
            let e = (d - bound).abs() / bound.max(1.0);
            worst = worst.max(e);
            if !spec.is_satisfied_by(&pair, 1e-8) {
                moment_failures += 1;
            }
        }
    }
    Outcome::new(
        worst <= 1e-12 && moment_failures == 0,
        format!("max |D - bound| / max(1, bound) {worst:.2e}, moment mismatches {moment_failures}"),
    )
}

fn duality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let alphas: Vec<f64> = (0..=28).map(|i| -3.0 + 0.25 * i as f64).collect();
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    let mut mismatched_infinities = 0;
    for k in 0..1000 {
        let mut pair = random_pair(&mut rng, 4);
        if k % 5 == 0 {
            // some pairs with an empty cell, where some orders are infinite
            let mut p = pair.p_weights().to_vec();
            let mut q = pair.q_weights().to_vec();
            let i = rng.random_range(0..4usize);
            if k % 10 == 0 {
                p[i] = 0.0;
            } else {
                q[i] = 0.0;
            }
            for w in [&mut p, &mut q] {
                let total: f64 = w.iter().sum();
                w.iter_mut().for_each(|x| *x /= total);
            }
            pair = MeasurePair::from_weights(pair.points(), &p, &q).unwrap();
        }
        let swapped = pair.swapped();
        for &alpha in &alphas {
            let fwd = alpha_divergence(&pair, alpha);
            let bwd = alpha_divergence(&swapped, 1.0 - alpha);
            if fwd.is_infinite() || bwd.is_infinite() {
                if fwd.is_infinite() != bwd.is_infinite() {
                    mismatched_infinities += 1;
                }
                continue;
            }
            checked += 1;
            worst = worst.max((fwd.value() - bwd.value()).abs() / fwd.value().abs().max(1.0));
        }
    }
    Outcome::new(
        worst <= 1e-12 && mismatched_infinities == 0,
        format!("{checked} finite cases, max diff {worst:.2e}, infinity mismatches {mismatched_infinities}"),
    )
}

const FWD_ALPHAS: [f64; 5] = [-0.5, 0.0, 0.5, 1.0, 1.5];
/// The forward orders mirrored by `α ↦ -α`.
const BWD_ALPHAS: [f64; 5] = [0.5, 0.0, -0.5, -1.0, -1.5];

fn relation_pairs() -> Vec<MeasurePair> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    (0..100).map(|_| random_pair(&mut rng, 3)).collect()
}

fn differential(pairs: &[MeasurePair]) -> Outcome {
    let h = DEFAULT_STEP;
    let mut worst_rel: f64 = 0.0;
    let (mut min_ratio, mut max_ratio) = (f64::INFINITY, 0.0f64);
    let mut worst_library: f64 = 0.0;
    let mut errors = 0;
    let mut checked = 0;
    for pair in pairs {
        for &t in &[0.2, 0.5, 0.9] {
            for k in 0..5 {
                let cases = [
                    (FWD_ALPHAS[k], true),
                    (BWD_ALPHAS[k], false),
                ];
                for (alpha, forward) in cases {
                    let check = |h| {
                        if forward {
                            check_diff_relation_fwd(pair, alpha, t, h)
                        } else {
                            check_diff_relation_bwd(pair, alpha, t, h)
                        }
                    };
                    let (Ok(full), Ok(half)) = (check(h), check(h / 2.0)) else {
                        errors += 1;
                        continue;
                    };
                    checked += 1;
                    worst_rel = worst_rel.max(full.rel_residual);
                    let ratio = full.abs_residual / half.abs_residual;
                    min_ratio = min_ratio.min(ratio);
                    max_ratio = max_ratio.max(ratio);
                    // the left side against the double-precision library
                    let path = if forward {
                        pair.toward_q(t).unwrap()
                    } else {
                        pair.swapped().toward_q(t).unwrap().swapped()
                    };
                    let order = if forward { alpha + 1.0 } else { alpha };
                    let lib = alpha_divergence(&path, order).value();
                    worst_library = worst_library.max(rel_err(lib, full.lhs));
                }
            }
        }
    }
    Outcome::new(
        errors == 0 && worst_rel <= 1e-6 && min_ratio >= 3.0 && max_ratio <= 5.0,
        format!(
            "{checked} checks, max rel residual {worst_rel:.2e}, halving ratio in [{min_ratio:.4}, {max_ratio:.4}], \
             library vs extended precision {worst_library:.1e}, errors {errors}"
        ),
    )
}

fn integral(pairs: &[MeasurePair]) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut errors = 0;
    let mut checked = 0;
    for pair in pairs {
        for &t in &[0.2, 0.5, 0.9, 1.0] {
            for k in 0..5 {
                for result in [
                    check_integral_relation(pair, FWD_ALPHAS[k], t),
                    check_integral_relation_bwd(pair, BWD_ALPHAS[k], t),
                ] {
                    match result {
                        Ok(r) => {
                            checked += 1;
                            worst = worst.max(r.rel_residual);
                        }
                        Err(_) => errors += 1,
                    }
                }
            }
        }
    }
    Outcome::new(
        errors == 0 && worst <= 1e-8,
        format!("{checked} checks, max rel residual {worst:.2e}, errors {errors}"),
    )
}

#[derive(Default)]
struct SmallTStats {
    total: usize,
    errors: usize,
    worst_slope: f64,
    worst_ratio: f64,
    worst_pearson: f64,
    pearson_within: usize,
}

fn small_t_stats(pairs: &[MeasurePair]) -> SmallTStats {
    let mut st = SmallTStats::default();
    for pair in pairs {
        for &alpha in &FWD_ALPHAS {
            let Ok(o) = small_t_order(pair, alpha) else {
                st.errors += 1;
                continue;
            };
            st.total += 1;
            st.worst_slope = st.worst_slope.max((o.slope - (alpha + 1.0)).abs());
            st.worst_ratio = st.worst_ratio.max(rel_err(o.ratio_at_min_t, o.limit_constant));
            let pe = rel_err(o.ratio_at_min_t, o.pearson_half);
            st.worst_pearson = st.worst_pearson.max(pe);
            if pe <= 0.01 {
                st.pearson_within += 1;
            }
        }
    }
    st
}

fn small_t() -> (Outcome, Vec<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    // weights within a factor 5 of each other; the fit window [1e-4, 1e-2]
    // is only asymptotic while t · max q/p stays small
    let bounded: Vec<MeasurePair> = (0..20)
        .map(|_| {
            let mut w = || {
                let raw: Vec<f64> = (0..3).map(|_| rng.random_range(0.2..=1.0)).collect();
                let total: f64 = raw.iter().sum();
                raw.iter().map(|x| x / total).collect::<Vec<f64>>()
            };
            let (p, q) = (w(), w());
            MeasurePair::from_weights(&[0.0, 1.0, 2.0], &p, &q).unwrap()
        })
        .collect();
    let st = small_t_stats(&bounded);
    let outcome = Outcome::new(
        st.errors == 0 && st.worst_slope <= 0.05 && st.worst_ratio <= 0.01,
        format!(
            "{} cases, max |slope - (α+1)| {:.2e}, max rel dev of D/t² from ½Σ(p-q)²/p {:.2e}",
            st.total, st.worst_slope, st.worst_ratio
        ),
    );
    let uniform: Vec<MeasurePair> = (0..20).map(|_| random_pair(&mut rng, 3)).collect();
    let su = small_t_stats(&uniform);
    let notes = vec![
        format!(
            "D/t² against ½Σ(p-q)²/q: {}/{} within 1%, max rel dev {:.2e}",
            st.pearson_within, st.total, st.worst_pearson
        ),
        format!(
            "pairs uniform on the simplex: max |slope - (α+1)| {:.2e}, max rel dev from ½Σ(p-q)²/p {:.2e}",
            su.worst_slope, su.worst_ratio
        ),
    ];
    (outcome, notes)
}

fn tightness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let alphas = [-1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0];
    let cfg = SearchConfig {
        random_restarts: 200,
        ..SearchConfig::new(6.0, 25, 2024)
    };
    let mut worst_gap = f64::INFINITY;
    let mut errors = 0;
    let mut runs = 0;
    for _ in 0..10 {
        let spec = loop {
            let mp: f64 = rng.random_range(-1.5..=1.5);
            let mq = rng.random_range(-1.5..=1.5);
            if (mp - mq).abs() < 0.1 {
                continue;
            }
            // deviations of at least one grid spacing keep the grid feasible
            let sp = rng.random_range(0.5..=1.4);
            let sq = rng.random_range(0.5..=1.4);
            break MomentSpec::new(mp, sp, mq, sq).unwrap();
        };
        for &alpha in &alphas {
            match min_search(&spec, alpha, &cfg) {
                Ok(r) => {
                    runs += 1;
                    worst_gap = worst_gap.min(r.gap);
                }
                Err(_) => errors += 1,
            }
        }
    }
    Outcome::new(
        errors == 0 && worst_gap >= -1e-9,
        format!("{runs} searches, smallest (search - bound) {worst_gap:.3e}, errors {errors}"),
    )
}

fn counterexample() -> Outcome {
    let run = |u3| counterexample_alpha_lt_minus1(1.0, 1.0, 0.0, -2.0, 0.4, u3);
    match (run(1e3), run(1e4)) {
        (Ok(a), Ok(b)) => {
            let stable = (a.gap - b.gap).abs() <= 0.1 * b.gap.abs();
            Outcome::new(
                a.gap > 0.0 && b.gap > 0.0 && stable,
                format!(
                    "σ_Q {:.4}, bound - divergence {:.6} (u3=1e3), {:.6} (u3=1e4)",
                    b.sigma_q, a.gap, b.gap
                ),
            )
        }
        (a, b) => Outcome::new(false, format!("construction failed: {:?} / {:?}", a.err(), b.err())),
    }
}

fn equal_means() -> Outcome {
    let mut failures = Vec::new();
    let mut finals = Vec::new();
    for (sp, sq) in [(2f64.sqrt(), 3f64.sqrt()), (0.5, 0.7)] {
        let spec = MomentSpec::new(0.0, sp, 0.0, sq).unwrap();
        for alpha in [-1.0, 0.5, 2.0] {
            let mut prev = f64::INFINITY;
            for j in 2..=10_000u64 {
                let pair = match equal_means_sequence(sp, sq, j) {
                    Ok(p) => p,
                    Err(e) => {
                        failures.push(format!("({sp:.3},{sq}) j={j}: {e}"));
                        break;
                    }
                };
                if !spec.is_satisfied_by(&pair, 1e-10) {
                    failures.push(format!("({sp:.3},{sq}) j={j}: moments"));
                    break;
                }
                let d = alpha_divergence(&pair, alpha).value();
                if !(d < prev) {
                    failures.push(format!("({sp:.3},{sq}) α={alpha} j={j}: not decreasing"));
                    break;
                }
                prev = d;
            }
            if !(prev < 1e-3) {
                failures.push(format!("({sp:.3},{sq}) α={alpha}: {prev:e} at j=1e4"));
            }
            finals.push(prev);
        }
    }
    let largest = finals.iter().copied().fold(0.0, f64::max);
    Outcome::new(
        failures.is_empty(),
        if failures.is_empty() {
            format!("largest divergence at j=1e4 {largest:.2e}, strictly decreasing from j=2")
        } else {
            failures.join("; ")
        },
    )
}

fn monotonicity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let grid: Vec<f64> = (0..20).map(|i| 0.1 + 2.9 * i as f64 / 19.0).collect();
    let mut violations = 0;
    let mut checked = 0;
    for _ in 0..5 {
        let gap = rng.random_range(0.1..=3.0);
        for alpha in [0.1, 0.3, 0.5, 0.7, 0.9] {
            for along_p in [true, false] {
                let values: Vec<f64> = grid
                    .iter()
                    .map(|&s| {
                        let spec = if along_p {
                            MomentSpec::new(gap, s, 0.0, 1.0)
                        } else {
                            MomentSpec::new(gap, 1.0, 0.0, s)
                        };
                        alpha_lower_bound(&spec.unwrap(), alpha).unwrap().bound.value()
                    })
                    .collect();
                for w in values.windows(2) {
                    checked += 1;
                    if !(w[1] < w[0]) {
                        violations += 1;
                    }
                }
            }
        }
    }
    Outcome::new(
        violations == 0,
        format!("{checked} consecutive grid steps, {violations} not strictly decreasing"),
    )
}

fn sign_pattern() -> Outcome {
    let alphas: Vec<f64> = (1..=19).map(|i| 0.05 * i as f64).collect();
    let xs: Vec<f64> = (1..=100)
        .flat_map(|i| [0.01 * i as f64, -0.01 * i as f64])
        .collect();
    let r = lemma5_scan(&alphas, &xs);
    Outcome::new(
        r.violations == 0 && r.evaluated == alphas.len() * xs.len(),
        format!(
            "{} points, {} violations, smallest sign(x)·F {:.3e}",
            r.evaluated, r.violations, r.min_signed_value
        ),
    )
}

fn renyi_zero() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst_closed: f64 = 0.0;
    let mut worst_under = f64::INFINITY;
    let mut feasible = 0;
    for _ in 0..50 {
        let mp: f64 = rng.random_range(-3.0..=3.0);
        let mq = rng.random_range(-3.0..=3.0);
        if (mp - mq).abs() <= 1e-3 {
            continue;
        }
        let sq = rng.random_range(0.05..=3.0);
        let spec = MomentSpec::new(mp, 0.0, mq, sq).unwrap();
        let a = mp - mq;
        let want = (a * a / (sq * sq)).ln_1p();
        let bound = renyi_lower_bound(&spec, AlphaOrder::Finite(0.0))
            .unwrap()
            .bound
            .value();
        worst_closed = worst_closed.max(rel_err(bound, want));

        let reach = a.abs() + 4.0 * sq;
        for _ in 0..2000 {
            let u2 = mq + rng.random_range(-reach..=reach);
            let u3 = mq + rng.random_range(-reach..=reach);
            let Ok(w) = weights_for_support([mp, u2, u3], mq, sq * sq) else {
                continue;
            };
            let Ok(pair) = MeasurePair::from_weights(&[mp, u2, u3], &[1.0, 0.0, 0.0], &w) else {
                continue;
            };
            feasible += 1;
            let d = renyi_divergence(&pair, AlphaOrder::Finite(0.0)).unwrap().value();
            worst_under = worst_under.min(d - bound);
        }
    }
    Outcome::new(
        worst_closed <= 1e-12 && worst_under >= -1e-9 && feasible > 0,
        format!(
            "closed form max rel err {worst_closed:.2e}; {feasible} feasible three-point Q, \
             smallest (divergence - bound) {worst_under:.3e}"
        ),
    )
}

fn report(n: usize, name: &str, limit: Option<Duration>, run: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = run();
    let elapsed = start.elapsed();
    let in_time = limit.is_none_or(|l| elapsed <= l);
    let passed = outcome.passed && in_time;
    let limit_text = limit.map(|l| format!(" / limit {:.0} s", l.as_secs_f64())).unwrap_or_default();
    println!(
        "[{}] {n:>2} {name}: {} ({:.2} s{limit_text})",
        if passed { "PASS" } else { "FAIL" },
        outcome.detail,
        elapsed.as_secs_f64(),
    );
    passed
}

fn main() {
    let secs = |s| Some(Duration::from_secs(s));
    let pairs = relation_pairs();
    let mut small_t_notes = Vec::new();
    let results = [
        report(1, "closed forms at α=2 and α=1/2", secs(1), closed_forms),
        report(2, "two-point pair attains the bound", secs(5), attainment),
        report(3, "duality α ↔ 1-α", None, duality),
        report(4, "differential relations along the path", secs(10), || differential(&pairs)),
        report(5, "integral relations along the path", secs(60), || integral(&pairs)),
        report(6, "small-t order", None, || {
            let (o, notes) = small_t();
            small_t_notes = notes;
            o
        }),
        report(7, "brute-force search never beats the bound", secs(300), tightness),
        report(8, "bound fails below α=-1", None, counterexample),
        report(9, "equal means give a zero bound", None, equal_means),
        report(10, "bound decreases in both deviations", None, monotonicity),
        report(11, "sign pattern of F", None, sign_pattern),
        report(12, "Rényi order-0 bound with a point mass P", None, renyi_zero),
    ];
    for note in &small_t_notes {
        println!("       note (criterion 6): {note}");
    }
    let passed = results.iter().filter(|&&p| p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
