//! The regression pipeline: encodings, the direct and oracle evolutions,
//! post-selection, readout and parameter selection.

pub mod encoding;
pub mod oracle;
pub mod pipeline;
pub mod trotter;

pub use encoding::{build_joint_input, encode_vector, AmplitudeEncoding};
pub use oracle::{exp_swap_step, fractional_query, permutation_walk, QueryMode, QueryOutcome, TrotterSchedule};
pub use pipeline::{
    apply_direct_unitary, readout_expectation, run_mean_estimation, run_variance_estimation, select_parameters,
    ExecutionPath, MeasurementMode, ParameterChoice, PipelineConfig, RunReport,
};
pub use trotter::{p_resolved_trace_distance, TrotterDistance};
