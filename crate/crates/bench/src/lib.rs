//! Fixtures shared by the kernel benchmarks.

use std::sync::Arc;

use depsgld::models::{generate_blr_data, linreg_potential};
use depsgld::samplers::{InitMode, StreamLane};
use depsgld::{
    build_graph, mixing_matrix, ConvexSet, GraphKind, MixingMatrix, NetworkState, Potential,
    SamplerConfig,
};

pub struct RegressionNetwork {
    pub mixing: MixingMatrix,
    pub potential: Potential,
    pub set: ConvexSet,
    pub state: NetworkState,
    pub config: SamplerConfig,
}

/// Twenty-agent regression network on `kind` with 10 000 observations.
pub fn regression_network(kind: GraphKind) -> RegressionNetwork {
    let n_agents = 20;
    let data = Arc::new(generate_blr_data(10_000, 7).expect("data"));
    let potential = linreg_potential(data, n_agents, 0.25).expect("potential");
    let set = ConvexSet::l2_ball(2, 1.1).expect("set");
    let mixing = mixing_matrix(&build_graph(kind, n_agents).expect("graph"), None).expect("mixing");
    let state = NetworkState::initial(
        n_agents,
        &set,
        7,
        StreamLane::Decentralized,
        0,
        InitMode::UniformInK,
    )
    .expect("state");
    let config = SamplerConfig {
        eta: 1e-4,
        gamma: 5e-5,
        batch: 100,
        ..SamplerConfig::default()
    };
    RegressionNetwork {
        mixing,
        potential,
        set,
        state,
        config,
    }
}
