use std::fs;
use std::path::Path;

use alphadiv::oracle::OracleError;
use alphadiv::relations::{self, RelationError, RelationResidual};
use alphadiv::{
    alpha_divergence, alpha_lower_bound, counterexample_alpha_lt_minus1, min_search,
    renyi_divergence, renyi_lower_bound, AlphaOrder, BoundError, BoundReport, DiscreteMeasure,
    DivergenceError, ExtendedValue, MeasurePair, MomentSpec, SearchConfig,
};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::output::{fmt_num, print_csv, print_json, Format, RunManifest};
use crate::{BoundArgs, CliError, DivArgs, Kind, PairArgs, Relation, SpecArgs, TightnessArgs, VerifyArgs};

/// Gaps below this on certified orders fail the tightness sweep.
const DOMINANCE_TOL: f64 = 1e-9;

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("reading {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("parsing {}: {e}", path.display())))
}

fn inline(points: &[f64], weights: &[f64]) -> Result<DiscreteMeasure, CliError> {
    DiscreteMeasure::new(points, weights).map_err(|e| CliError::Input(e.to_string()))
}

fn load_pair(a: &PairArgs) -> Result<MeasurePair, CliError> {
    let from_file: Option<MeasurePair> = a.pair.as_deref().map(read_json).transpose()?;
    let pick = |points: &[f64],
                weights: &[f64],
                file: &Option<std::path::PathBuf>,
                from_pair: Option<&DiscreteMeasure>,
                name: &str|
     -> Result<DiscreteMeasure, CliError> {
        if !points.is_empty() || !weights.is_empty() {
            inline(points, weights)
        } else if let Some(path) = file {
            read_json(path)
        } else if let Some(m) = from_pair {
            Ok(m.clone())
        } else {
            Err(CliError::Input(format!(
                "missing measure {name}: give --{name}-points/--{name}-weights, --{name} or --pair"
            )))
        }
    };
    let p = pick(&a.p_points, &a.p_weights, &a.p, from_file.as_ref().map(|x| x.p()), "p")?;
    let q = pick(&a.q_points, &a.q_weights, &a.q, from_file.as_ref().map(|x| x.q()), "q")?;
    Ok(MeasurePair::new(&p, &q))
}

fn spec_of(a: &SpecArgs) -> Result<MomentSpec, CliError> {
    MomentSpec::new(a.mean_p, a.sigma_p, a.mean_q, a.sigma_q).map_err(|e| CliError::Input(e.to_string()))
}

fn divergence_error(e: DivergenceError) -> CliError {
    match e {
        DivergenceError::InvalidOrder(_) => CliError::Domain(e.to_string()),
        DivergenceError::ProbabilityOutOfRange(_) => CliError::Input(e.to_string()),
        DivergenceError::InternalConsistency(_) => CliError::Certification(e.to_string()),
    }
}

fn bound_error(e: BoundError) -> CliError {
    match e {
        BoundError::InvalidSpec(_) => CliError::Input(e.to_string()),
        BoundError::InvalidOrder(_) | BoundError::EqualMeans(_) => CliError::Domain(e.to_string()),
        BoundError::Internal(_) => CliError::Certification(e.to_string()),
    }
}

fn relation_error(e: RelationError) -> CliError {
    match e {
        RelationError::TOutOfRange(_) | RelationError::StepTooLarge { .. } => CliError::Input(e.to_string()),
        RelationError::AlphaExcluded(_)
        | RelationError::InfiniteDivergence
        | RelationError::DegeneratePath => CliError::Domain(e.to_string()),
        RelationError::QuadratureNonConvergence(_) => CliError::Certification(e.to_string()),
    }
}

fn oracle_error(e: OracleError) -> CliError {
    match e {
        OracleError::NoFeasiblePoint | OracleError::ScanFailed | OracleError::Infeasible(_) => {
            CliError::Infeasible(e.to_string())
        }
        OracleError::InvalidConfig(_)
        | OracleError::InvalidInput(_)
        | OracleError::Measure(_)
        | OracleError::SingularSystem => CliError::Input(e.to_string()),
        OracleError::EqualMeans | OracleError::DeltaInvalid { .. } | OracleError::JTooSmall { .. } => {
            CliError::Domain(e.to_string())
        }
        OracleError::Bound(b) => bound_error(b),
    }
}

#[derive(Serialize)]
struct DivResult {
    kind: Kind,
    alpha: String,
    value: ExtendedValue,
}

pub fn div(a: &DivArgs, format: Format) -> Result<(), CliError> {
    let pair = load_pair(&a.measures)?;
    let order: AlphaOrder = a.alpha.parse().map_err(CliError::Input)?;
    let value = match (a.kind, order) {
        (Kind::Alpha, AlphaOrder::Finite(x)) if x.is_finite() => alpha_divergence(&pair, x),
        (Kind::Alpha, _) => {
            return Err(CliError::Domain(format!(
                "the α-divergence needs a finite order, got {}",
                a.alpha
            )))
        }
        (Kind::Renyi, o) => renyi_divergence(&pair, o).map_err(divergence_error)?,
    };
    let result = DivResult {
        kind: a.kind,
        alpha: order.to_string(),
        value,
    };
    match format {
        Format::Text => {
            println!("{}", fmt_num(value.value()));
            Ok(())
        }
        Format::Json => print_json(&RunManifest::new("div", a, 0), &result),
        Format::Csv => print_csv(
            &["kind", "alpha", "value"],
            &[vec![
                format!("{:?}", a.kind).to_lowercase(),
                result.alpha,
                fmt_num(value.value()),
            ]],
        ),
    }
}

fn witness_fields(r: &BoundReport) -> Vec<String> {
    match &r.witness {
        Some(w) => [w.r, w.s, w.u1, w.u2, w.a, w.v].iter().map(|&x| fmt_num(x)).collect(),
        None => vec![String::new(); 6],
    }
}

pub fn bound(a: &BoundArgs, format: Format) -> Result<(), CliError> {
    let spec = spec_of(&a.spec)?;
    let report = match a.kind {
        Kind::Alpha => alpha_lower_bound(&spec, a.alpha),
        Kind::Renyi => renyi_lower_bound(&spec, AlphaOrder::from(a.alpha)),
    }
    .map_err(bound_error)?;
    match format {
        Format::Text => {
            println!("bound {}", fmt_num(report.bound.value()));
            println!("tight_guaranteed {}", report.tight_guaranteed);
            println!("equal_means {}", report.equal_means);
            if let Some(w) = &report.witness {
                for (k, v) in [("r", w.r), ("s", w.s), ("u1", w.u1), ("u2", w.u2), ("a", w.a), ("v", w.v)] {
                    println!("{k} {}", fmt_num(v));
                }
            }
            Ok(())
        }
        Format::Json => print_json(&RunManifest::new("bound", a, 0), &report),
        Format::Csv => {
            let mut row = vec![
                fmt_num(report.bound.value()),
                report.tight_guaranteed.to_string(),
                report.equal_means.to_string(),
            ];
            row.extend(witness_fields(&report));
            print_csv(
                &["bound", "tight_guaranteed", "equal_means", "r", "s", "u1", "u2", "a", "v"],
                &[row],
            )
        }
    }
}

#[derive(Serialize)]
struct ResidualRow {
    relation: Relation,
    #[serde(flatten)]
    residual: RelationResidual,
    abs_residual_half_step: Option<f64>,
    halving_ratio: Option<f64>,
    passed: bool,
}

#[derive(Serialize)]
struct OrderRow {
    #[serde(flatten)]
    order: relations::SmallTOrder,
    passed: bool,
}

#[derive(Serialize)]
struct VerifyResult<T> {
    relation: Relation,
    tolerance: f64,
    rows: Vec<T>,
    all_passed: bool,
}

fn finish<T: Serialize>(
    a: &VerifyArgs,
    format: Format,
    tolerance: f64,
    header: &[&str],
    rows: Vec<(T, Vec<String>, bool)>,
) -> Result<(), CliError> {
    let all_passed = rows.iter().all(|r| r.2);
    let failures = rows.iter().filter(|r| !r.2).count();
    if format == Format::Json {
        let result = VerifyResult {
            relation: a.relation,
            tolerance,
            rows: rows.into_iter().map(|r| r.0).collect(),
            all_passed,
        };
        print_json(&RunManifest::new("verify", a, 0), &result)?;
    } else {
        let csv_rows: Vec<Vec<String>> = rows.into_iter().map(|r| r.1).collect();
        print_csv(header, &csv_rows)?;
    }
    if all_passed {
        Ok(())
    } else {
        Err(CliError::Certification(format!(
            "{failures} row(s) exceed the tolerance {tolerance:e}"
        )))
    }
}

pub fn verify(a: &VerifyArgs, format: Format) -> Result<(), CliError> {
    let pair = load_pair(&a.measures)?;
    if a.alphas.is_empty() {
        return Err(CliError::Input("no orders given".into()));
    }
    let relation_name = |r: Relation| match r {
        Relation::DiffFwd => "diff-fwd",
        Relation::DiffBwd => "diff-bwd",
        Relation::IntFwd => "int-fwd",
        Relation::IntBwd => "int-bwd",
        Relation::Order => "order",
    };

    if a.relation == Relation::Order {
        let tol = a.tol.unwrap_or(0.05);
        let mut rows = Vec::new();
        for &alpha in &a.alphas {
            let o = relations::small_t_order(&pair, alpha).map_err(relation_error)?;
            let passed = (o.slope - o.expected_slope).abs() <= tol
                && (o.ratio_at_min_t / o.limit_constant - 1.0).abs() <= 0.01;
            let csv = vec![
                fmt_num(alpha),
                fmt_num(o.slope),
                fmt_num(o.expected_slope),
                fmt_num(o.ratio_at_min_t),
                fmt_num(o.limit_constant),
                fmt_num(o.pearson_half),
                passed.to_string(),
            ];
            rows.push((OrderRow { order: o, passed }, csv, passed));
        }
        return finish(
            a,
            format,
            tol,
            &["alpha", "slope", "expected_slope", "ratio_at_min_t", "limit_constant", "pearson_half", "passed"],
            rows,
        );
    }

    let is_diff = matches!(a.relation, Relation::DiffFwd | Relation::DiffBwd);
    let tol = a.tol.unwrap_or(if is_diff { 1e-6 } else { 1e-8 });
    let eval = |alpha: f64, t: f64, h: f64| match a.relation {
        Relation::DiffFwd => relations::check_diff_relation_fwd(&pair, alpha, t, h),
        Relation::DiffBwd => relations::check_diff_relation_bwd(&pair, alpha, t, h),
        Relation::IntFwd => relations::check_integral_relation(&pair, alpha, t),
        Relation::IntBwd => relations::check_integral_relation_bwd(&pair, alpha, t),
        Relation::Order => unreachable!("handled above"),
    };
    let mut rows = Vec::new();
    for &alpha in &a.alphas {
        for &t in &a.ts {
            let r = eval(alpha, t, a.h).map_err(relation_error)?;
            let (half, ratio) = if is_diff && a.halving {
                let r2 = eval(alpha, t, a.h / 2.0).map_err(relation_error)?;
                (Some(r2.abs_residual), Some(r.abs_residual / r2.abs_residual))
            } else {
                (None, None)
            };
            let passed = r.rel_residual <= tol;
            let opt = |x: Option<f64>| x.map(fmt_num).unwrap_or_default();
            let csv = vec![
                relation_name(a.relation).to_string(),
                fmt_num(r.alpha),
                fmt_num(r.t),
                fmt_num(r.lhs),
                fmt_num(r.rhs),
                fmt_num(r.abs_residual),
                fmt_num(r.rel_residual),
                opt(half),
                opt(ratio),
                r.method_detail.clone(),
                passed.to_string(),
            ];
            let row = ResidualRow {
                relation: a.relation,
                residual: r,
                abs_residual_half_step: half,
                halving_ratio: ratio,
                passed,
            };
            rows.push((row, csv, passed));
        }
    }
    finish(
        a,
        format,
        tol,
        &[
            "relation",
            "alpha",
            "t",
            "lhs",
            "rhs",
            "abs_residual",
            "rel_residual",
            "abs_residual_half_step",
            "halving_ratio",
            "method_detail",
            "passed",
        ],
        rows,
    )
}

#[derive(Serialize)]
struct SweepRow {
    #[serde(flatten)]
    spec: MomentSpec,
    #[serde(flatten)]
    result: alphadiv::SearchResult,
    tight_guaranteed: bool,
}

pub fn tightness(a: &TightnessArgs, format: Format) -> Result<(), CliError> {
    if a.alphas.is_empty() {
        return Err(CliError::Input("no orders given".into()));
    }
    let spec = spec_of(&a.spec)?;
    if a.counterexample {
        return counterexample(a, format);
    }
    let cfg = SearchConfig {
        support_radius: a.radius,
        grid_points_per_axis: a.grid,
        support_size: a.support_size,
        random_restarts: a.restarts,
        seed: a.seed,
        extra_points: Vec::new(),
    };
    let mut rows = Vec::new();
    let mut violations = Vec::new();
    for &alpha in &a.alphas {
        let result = min_search(&spec, alpha, &cfg).map_err(oracle_error)?;
        let certified = (-1.0..=2.0).contains(&alpha);
        if certified && result.gap < -DOMINANCE_TOL {
            violations.push(alpha);
        }
        rows.push(SweepRow {
            spec,
            result,
            tight_guaranteed: certified,
        });
    }
    if format == Format::Json {
        print_json(&RunManifest::new("tightness", a, a.seed), &rows)?;
    } else {
        let csv: Vec<Vec<String>> = rows
            .iter()
            .map(|r| {
                vec![
                    fmt_num(r.result.alpha),
                    fmt_num(spec.mean_p),
                    fmt_num(spec.sigma_p),
                    fmt_num(spec.mean_q),
                    fmt_num(spec.sigma_q),
                    fmt_num(r.result.best_value.value()),
                    fmt_num(r.result.bound_value),
                    fmt_num(r.result.gap),
                    r.result.evaluations.to_string(),
                    fmt_num(r.result.feasibility_ratio),
                ]
            })
            .collect();
        print_csv(
            &[
                "alpha",
                "mean_p",
                "sigma_p",
                "mean_q",
                "sigma_q",
                "best_value",
                "bound",
                "gap",
                "evaluations",
                "feasibility_ratio",
            ],
            &csv,
        )?;
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(CliError::Certification(format!(
            "search undercut the bound by more than {DOMINANCE_TOL:e} at α = {violations:?}"
        )))
    }
}

fn counterexample(a: &TightnessArgs, format: Format) -> Result<(), CliError> {
    let mut reports = Vec::new();
    for &alpha in &a.alphas {
        if !(alpha < -1.0) {
            return Err(CliError::Domain(format!(
                "the three-point construction needs α < -1, got {alpha}"
            )));
        }
        let rep = counterexample_alpha_lt_minus1(a.spec.mean_p, a.spec.sigma_p, a.spec.mean_q, alpha, a.delta, a.u3)
            .map_err(oracle_error)?;
        reports.push(rep);
    }
    if format == Format::Json {
        return print_json(&RunManifest::new("tightness", a, a.seed), &reports);
    }
    let csv: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            vec![
                fmt_num(r.alpha),
                fmt_num(r.delta),
                fmt_num(r.u3),
                fmt_num(r.sigma_q),
                fmt_num(r.divergence),
                fmt_num(r.bound),
                // sweep convention: negative means the pair undercuts the bound
                fmt_num(r.divergence - r.bound),
                fmt_num(r.limit_divergence),
                fmt_num(r.tail_term),
            ]
        })
        .collect();
    print_csv(
        &["alpha", "delta", "u3", "sigma_q", "divergence", "bound", "gap", "limit_divergence", "tail_term"],
        &csv,
    )
}
