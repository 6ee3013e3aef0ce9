//! Per-head linear probes, top-K head selection, center-of-mass steering
//! directions and intervention plans.

mod direction;
mod plan;
mod probe;

pub use direction::{class_means, compute_direction, compute_sigma, steering_direction, ClassMeans, SteeringDirection};
pub use plan::{build_plan, InterventionPlan, PlanEntry, Sign};
pub use probe::{select_top_heads, stratified_split, train_probes, ProbeConfig, ProbeReport, ProbeResult};
