//! Tight lower bounds on α- and Rényi divergences between distributions
//! with prescribed means and variances.

pub mod bounds;
pub mod divergences;
pub mod measures;
pub mod oracle;
pub mod relations;

pub use divergences::{
    alpha_divergence, binary_alpha_divergence, binary_renyi_divergence, f_divergence,
    renyi_divergence, AlphaOrder, DivergenceError, ExtendedValue,
};
pub use measures::{
    make_measure, mixture, moments, DiscreteMeasure, MeasureError, MeasurePair, MomentSpec,
};
pub use bounds::{
    alpha_lower_bound, binary_pair_from_moments, chi2_bound_closed_form,
    hellinger_bound_closed_form, renyi_lower_bound, BinaryPair, BoundError, BoundReport,
};
pub use relations::{
    check_diff_relation_bwd, check_diff_relation_fwd, check_integral_relation,
    check_integral_relation_bwd, small_t_order, RelationError, RelationResidual, SmallTOrder,
};
pub use oracle::{
    counterexample_alpha_lt_minus1, equal_means_sequence, lemma5_scan, min_search,
    weights_for_support, CounterexampleReport, SignCheckReport, OracleError, SearchConfig,
    SearchResult,
};
