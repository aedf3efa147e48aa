//! Discrete-time Markov chain modelling of a per-cycle gap series.
//!
//! The crate turns a chronological series of gaps into a sequence of states,
//! estimates the transition matrix, studies its powers and stationary
//! distribution, and runs the accompanying chi-square and pooled t-tests.
//! [`pipeline::replicate`] chains all of it together and reports where the
//! results depart from the published figures for the bundled data.
//!
//! ```
//! use gapchain::{default_state_space, discretize, count_transitions, estimate, CycleSeries};
//! use gapchain::{Denominator, ZeroRowPolicy};
//!
//! let space = default_state_space();
//! let seq = discretize(&space, &CycleSeries::table1())?;
//! let counts = count_transitions(&seq, &space)?;
//! let p = estimate(&counts, Denominator::OutTransitions, ZeroRowPolicy::SelfLoop)?;
//! assert_eq!(p.row(1), &[0.5, 0.0, 0.0, 0.5, 0.0]);
//! # Ok::<(), gapchain::Error>(())
//! ```

pub mod cli;
pub mod error;
pub mod estimation;
pub mod inference;
pub mod pipeline;
pub mod simulation;
pub mod special;
pub mod state_space;
pub mod stochastic;

pub use error::{Error, Result};
pub use estimation::{
    count_transitions, estimate, paper_matrix, Denominator, TransitionCounts, ZeroRowPolicy,
};
pub use inference::{
    chi_square_critical, chi_square_gof, chi_square_gof_vs_mean, pooled_t_test, t_critical,
    GofResult, TTestResult, TestReport,
};
pub use pipeline::{
    gaps_from_students, predict_closure, replicate, replicate_from_students, ClosurePrediction,
    PipelineConfig, ReplicationReport, StudentRecord,
};
pub use simulation::{occupancy, simulate, SplitMix64, Trajectory};
pub use special::{chi_square_upper_p, student_t_two_tailed_p};
pub use state_space::{
    default_state_space, discretize, CycleRecord, CycleSeries, Gender, State, StateSequence,
    StateSpace,
};
pub use stochastic::{
    evolve, find_equilibrium, multiply, power, stationary_direct, ConvergenceReport, Distribution,
    StochasticMatrix,
};
