//! Decentralized proximal stochastic gradient Langevin dynamics.
//!
//! Agents on a gossip network each hold one shard of a potential `f = Σ f_i`
//! and jointly sample `π ∝ e^{-f}` restricted to a convex set `K`. The hard
//! constraint is replaced by its Moreau–Yosida envelope with parameter `γ`.
//!
//! ```
//! use depsgld::{build_graph, mixing_matrix, GraphKind};
//!
//! let w = mixing_matrix(&build_graph(GraphKind::Ring, 4).unwrap(), None).unwrap();
//! assert!((w.rho() - 0.5).abs() < 1e-12);
//! ```
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constraints;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod models;
pub mod samplers;
pub mod topology;

pub use constraints::{ConvexSet, ProxParams};
pub use error::{Error, Result};
pub use linalg::Matrix;
pub use metrics::{
    consensus_distance, true_quantile_1d, wasserstein2_1d, AgentTag, Quantile1D, ReplicaTag,
    RunTrace,
};
pub use models::{DataSet, Potential};
pub use samplers::{
    depsgld_step, run_depsgld, CentralSampler, GuardMode, InitMode, NetworkState, NoiseMode,
    SamplerConfig,
};
pub use topology::{build_graph, mixing_matrix, validate_mixing, Graph, GraphKind, MixingMatrix};
