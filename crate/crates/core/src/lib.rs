//! Spatial CSMA networks as a product-form (ideal CSMA) model: state-space
//! enumeration, exact throughput, feasibility of throughput vectors, a
//! discrete-event simulator, the followers' transmission-aggressiveness
//! game and the leader's price search.

// NaN must fail validation, hence `!(x > 0.0)` rather than `x <= 0.0`.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fixtures;
pub mod graph;
pub mod icn;
pub mod region;
pub mod runner;
pub mod sim;
pub mod stackelberg;
pub mod subgame;

mod simplex;

pub use error::{Error, Result};
pub use graph::{ContentionGraph, LinkId, StateMask, StateSpace};
pub use icn::{
    entropy, log_likelihood, log_likelihood_gradient, log_partition, stationary_distribution,
    throughput, throughput_of, AccessProfile, StationaryDistribution,
};
pub use region::{membership, membership_with, project_zero_link, MembershipVerdict, Verdict};
pub use sim::{simulate, simulate_with, SimTrace, Simulator, TimerLaws};
pub use stackelberg::{
    bottleneck, optimal_price_bisection, rmax_sweep, run_stackelberg, DemandCurve, PricingConfig,
    StackelbergResult, Termination,
};
pub use subgame::{run_subgame, Backend, SubgameConfig, SubgameOutcome, SubgameResult};
