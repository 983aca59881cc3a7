//! Metrics: the class-dependency metric, Fréchet distance on raw features,
//! density-ratio error against oracles and χ² independence tests.

mod chi2;
mod classes;
mod evaluator;
mod frechet;
mod metrics;
mod ratio;

pub use chi2::{chi2_independence, contingency_table, Chi2Outcome};
pub use classes::{classify_parts, dependency_metric, nearest_class, ClassTable, DependencyMetric};
pub use evaluator::{EvalMetrics, TaskEvaluator};
pub use frechet::{fit_gaussian, frechet_distance, frechet_gaussians};
pub use metrics::{metrics_header, MetricsRecord};
pub use ratio::{head_ratio_mae, ratio_mae, RatioMae};
