//! Harvest planning: crop-to-field assignment coupled with harvester routing.

// `!(x >= 0.0)` deliberately rejects NaN alongside negatives.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Index loops mirror the subscripted model notation.
#![allow(clippy::needless_range_loop)]

pub mod capr;
pub mod clustering;
pub mod error;
pub mod expgen;
pub mod formulations;
pub mod harness;
pub mod instance;
pub mod leasing;
pub mod milp;
pub mod routing;

#[cfg(test)]
mod test_support;

pub use capr::{evaluate_profit, plan, CropTour, HarvestPlan, PlanJson, PlanOptions};
pub use clustering::{aggregate, kmeans, ClusteredInstance, Clustering, ClusteringJson};
pub use error::{Error, Result};
pub use expgen::{generate_instance, GenParams};
pub use formulations::{
    build_ip, count_variables, AgronomicConstraints, BuildOptions, ModelArtifacts,
};
pub use harness::{render_plan, run_benchmark, BenchConfig, BenchRow, RunMetrics};
pub use instance::{
    build_cost_model, validate_instance, CostModel, CostSpec, CropCatalog, Depot, Diagnostic,
    ExplicitMatrices, Field, Instance,
};
pub use leasing::{decide_leasing, depot_rent_bound, LeasingDecision, RentBounds};
pub use milp::{solve, IntegerProgram, Solution, SolveLimits, Status};
pub use routing::{solve_open_tsp, OpenTour};
