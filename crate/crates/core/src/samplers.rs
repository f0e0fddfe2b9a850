//! DE-PSGLD and its centralized baselines.
//!
//! One DE-PSGLD iteration is a synchronous round. Every agent reads the
//! frozen previous state, gossips with its neighbours, and takes a Langevin
//! step on its own component plus the scaled Moreau–Yosida penalty:
//!
//! ```text
//! x_i⁺ = Σ_j W_ij x_j − η [∇̃f_i(x_i) + (x_i − P_K(x_i)) / (Nγ)] + √(2η) w_i
//! ```
//!
//! Gradient and penalty are evaluated at the agent's own previous iterate,
//! not at the mixed value.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::constraints::ConvexSet;
use crate::error::{Error, Result};
use crate::models::Potential;
use crate::topology::MixingMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseMode {
    Gaussian,
    /// Replaces every Gaussian draw by zero (exactness tests only).
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMode {
    Zero,
    UniformInK,
}

impl FromStr for InitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(InitMode::Zero),
            "uniform-in-K" | "uniform-in-k" | "uniform" => Ok(InitMode::UniformInK),
            other => Err(Error::invalid(format!(
                "unknown init '{other}' (expected zero|uniform-in-K)"
            ))),
        }
    }
}

impl fmt::Display for InitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InitMode::Zero => "zero",
            InitMode::UniformInK => "uniform-in-K",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub eta: f64,
    pub gamma: f64,
    pub iterations: usize,
    pub batch: usize,
    pub n_chains: usize,
    pub seed: u64,
    pub record_every: usize,
    pub noise: NoiseMode,
    pub init: InitMode,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            eta: 5e-4,
            gamma: 3.3e-4,
            iterations: 300,
            batch: 1,
            n_chains: 100,
            seed: 0,
            record_every: 1,
            noise: NoiseMode::Gaussian,
            init: InitMode::Zero,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::invalid(format!(
                "eta must be nonnegative and finite, got {}",
                self.eta
            )));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::invalid(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        if self.batch == 0 || self.n_chains == 0 || self.record_every == 0 {
            return Err(Error::invalid(
                "batch, chains and record_every must be positive",
            ));
        }
        Ok(())
    }

    fn noise_scale(&self) -> f64 {
        match self.noise {
            NoiseMode::Gaussian => (2.0 * self.eta).sqrt(),
            NoiseMode::Zero => 0.0,
        }
    }
}

/// Independent RNG families; each (lane, replica, agent) gets its own
/// ChaCha stream so results do not depend on scheduling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamLane {
    Decentralized = 0,
    Centralized = 1,
    Auxiliary = 2,
}

pub fn stream_rng(seed: u64, lane: StreamLane, replica: usize, agent: usize) -> ChaCha8Rng {
    let key = seed ^ (lane as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(((replica as u64) << 32) | agent as u64);
    rng
}

/// Stacked agent iterates of one replica together with their noise streams.
#[derive(Debug, Clone)]
pub struct NetworkState {
    dim: usize,
    agents: Vec<f64>,
    iteration: usize,
    rngs: Vec<ChaCha8Rng>,
    scratch: Vec<f64>,
}

impl NetworkState {
    pub fn new(agents: Vec<Vec<f64>>, rngs: Vec<ChaCha8Rng>) -> Result<Self> {
        let dim = agents.first().map_or(0, Vec::len);
        if agents.is_empty() || dim == 0 || agents.iter().any(|a| a.len() != dim) {
            return Err(Error::invalid(
                "agents must be non-empty vectors of equal dimension",
            ));
        }
        if rngs.len() != agents.len() {
            return Err(Error::invalid("one RNG stream per agent is required"));
        }
        let flat: Vec<f64> = agents.into_iter().flatten().collect();
        Ok(Self {
            dim,
            scratch: vec![0.0; flat.len()],
            agents: flat,
            iteration: 0,
            rngs,
        })
    }

    /// Initial state of `replica` under `init`, with its streams derived from
    /// the master seed.
    pub fn initial(
        n_agents: usize,
        set: &ConvexSet,
        seed: u64,
        lane: StreamLane,
        replica: usize,
        init: InitMode,
    ) -> Result<Self> {
        let dim = set.dim();
        let mut rngs: Vec<ChaCha8Rng> = (0..n_agents)
            .map(|a| stream_rng(seed, lane, replica, a))
            .collect();
        let agents = rngs
            .iter_mut()
            .map(|rng| match init {
                InitMode::Zero => vec![0.0; dim],
                InitMode::UniformInK => set.sample_uniform(rng),
            })
            .collect();
        Self::new(agents, rngs)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_agents(&self) -> usize {
        self.rngs.len()
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn agent(&self, i: usize) -> &[f64] {
        &self.agents[i * self.dim..(i + 1) * self.dim]
    }

    /// Stacked vector `[x_1ᵀ, …, x_Nᵀ]ᵀ`.
    pub fn stacked(&self) -> &[f64] {
        &self.agents
    }

    pub fn mean(&self) -> Vec<f64> {
        let n = self.n_agents() as f64;
        let mut m = vec![0.0; self.dim];
        for i in 0..self.n_agents() {
            for (acc, v) in m.iter_mut().zip(self.agent(i)) {
                *acc += v;
            }
        }
        m.iter_mut().for_each(|v| *v /= n);
        m
    }

    pub fn rngs(&self) -> &[ChaCha8Rng] {
        &self.rngs
    }
}

/// `L_γ = L + 2/(Nγ)`.
pub fn effective_smoothness(l_smooth: f64, n_agents: usize, gamma: f64) -> f64 {
    l_smooth + 2.0 / (n_agents as f64 * gamma)
}

/// `η_max = min{2N/L_γ, (1 + λ_N^W)/L_γ, 1/(L_γ + μ)}`.
pub fn max_stepsize(
    mu: f64,
    l_smooth: f64,
    n_agents: usize,
    gamma: f64,
    lambda_min_w: f64,
) -> Result<f64> {
    if !(mu > 0.0) || !(l_smooth > mu) || !(gamma > 0.0) || n_agents == 0 {
        return Err(Error::invalid(format!(
            "step-size bound needs 0 < mu < L, gamma > 0, N >= 1 (mu={mu}, L={l_smooth}, gamma={gamma}, N={n_agents})"
        )));
    }
    if !(lambda_min_w > -1.0 && lambda_min_w <= 1.0 + 1e-12) {
        return Err(Error::invalid(format!(
            "lambda_min(W) must lie in (-1, 1], got {lambda_min_w}"
        )));
    }
    let lg = effective_smoothness(l_smooth, n_agents, gamma);
    let n = n_agents as f64;
    Ok((2.0 * n / lg)
        .min((1.0 + lambda_min_w) / lg)
        .min(1.0 / (lg + mu)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GuardMode {
    /// Error when `(μ, L)` are known and `η ≥ η_max`; warn otherwise.
    Strict,
    /// Only warn.
    Warn,
}

impl FromStr for GuardMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strict" => Ok(GuardMode::Strict),
            "warn" => Ok(GuardMode::Warn),
            other => Err(Error::invalid(format!(
                "unknown stepsize guard '{other}' (strict|warn)"
            ))),
        }
    }
}

impl fmt::Display for GuardMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GuardMode::Strict => "strict",
            GuardMode::Warn => "warn",
        })
    }
}

/// Applies the step-size guard; returns `η_max` when it is computable.
pub fn check_stepsize(
    p: &Potential,
    w: &MixingMatrix,
    cfg: &SamplerConfig,
    mode: GuardMode,
) -> Result<Option<f64>> {
    let (Some(mu), Some(l)) = (p.mu(), p.l_smooth()) else {
        log::warn!(
            "strong convexity constant unknown; step size eta = {} is not checked against eta_max",
            cfg.eta
        );
        return Ok(None);
    };
    let eta_max = max_stepsize(mu, l, w.n_agents(), cfg.gamma, w.lambda_min())?;
    if cfg.eta >= eta_max {
        let msg = format!(
            "eta = {} is not below eta_max = {eta_max:.6e} (mu = {mu:.4e}, L = {l:.4e}, N = {}, gamma = {}, lambda_min(W) = {:.4})",
            cfg.eta,
            w.n_agents(),
            cfg.gamma,
            w.lambda_min()
        );
        match mode {
            GuardMode::Strict => return Err(Error::InvalidConfig(msg)),
            GuardMode::Warn => log::warn!("{msg}"),
        }
    }
    Ok(Some(eta_max))
}

fn check_shapes(state: &NetworkState, p: &Potential, set: &ConvexSet) -> Result<()> {
    if state.dim != p.dim() || set.dim() != p.dim() {
        return Err(Error::invalid(format!(
            "dimension mismatch: state {}, potential {}, set {}",
            state.dim,
            p.dim(),
            set.dim()
        )));
    }
    Ok(())
}

/// One synchronous DE-PSGLD round, in place.
pub fn depsgld_step(
    state: &mut NetworkState,
    w: &MixingMatrix,
    p: &Potential,
    set: &ConvexSet,
    cfg: &SamplerConfig,
) -> Result<()> {
    let n = state.n_agents();
    if w.n_agents() != n {
        return Err(Error::invalid(format!(
            "mixing matrix is {0}x{0} but the network has {n} agents",
            w.n_agents()
        )));
    }
    if p.n_agents() != n {
        return Err(Error::invalid(format!(
            "potential is sharded over {} agents but the network has {n}",
            p.n_agents()
        )));
    }
    check_shapes(state, p, set)?;
    let d = state.dim;
    let scale = cfg.noise_scale();
    let penalty = n as f64 * cfg.gamma;
    let mut grad = vec![0.0; d];
    let mut proj = vec![0.0; d];

    w.mix_into(&state.agents, d, &mut state.scratch);
    for i in 0..n {
        let xi = &state.agents[i * d..(i + 1) * d];
        let rng = &mut state.rngs[i];
        p.stochastic_gradient_into(i, xi, cfg.batch, rng, &mut grad);
        set.project_into(xi, &mut proj);
        let out = &mut state.scratch[i * d..(i + 1) * d];
        for k in 0..d {
            out[k] -= cfg.eta * (grad[k] + (xi[k] - proj[k]) / penalty);
        }
        add_noise(out, scale, cfg.noise, rng);
    }
    std::mem::swap(&mut state.agents, &mut state.scratch);
    state.iteration += 1;
    Ok(())
}

fn add_noise(out: &mut [f64], scale: f64, mode: NoiseMode, rng: &mut ChaCha8Rng) {
    if mode == NoiseMode::Zero {
        return;
    }
    for o in out.iter_mut() {
        let z: f64 = StandardNormal.sample(rng);
        *o += scale * z;
    }
}

/// Centralized comparators run on a single chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CentralSampler {
    /// Moreau–Yosida SGLD: `x − η[∇̃f + (x − P_K x)/γ] + √(2η) w`.
    Psgld,
    /// Mean-chain proximal Langevin: drift `(1/N)[∇f + (x − P_K x)/γ]`, noise `√(2η/N) z`.
    Pla { n_agents: usize },
    /// `P_K(x − η∇̃f + √(2η) w)`.
    ProjectedLmc,
    /// `x − η∇̃f + √(2η) w`, no constraint handling.
    Sgld,
}

impl CentralSampler {
    pub fn name(&self) -> &'static str {
        match self {
            CentralSampler::Psgld => "psgld",
            CentralSampler::Pla { .. } => "pla",
            CentralSampler::ProjectedLmc => "plmc",
            CentralSampler::Sgld => "sgld",
        }
    }
}

fn central_step_into(
    x: &[f64],
    p: &Potential,
    set: &ConvexSet,
    cfg: &SamplerConfig,
    sampler: CentralSampler,
    rng: &mut ChaCha8Rng,
    out: &mut [f64],
) {
    let d = x.len();
    let mut grad = vec![0.0; d];
    match sampler {
        CentralSampler::Psgld => {
            p.stochastic_total_gradient_into(x, cfg.batch, rng, &mut grad);
            let mut proj = vec![0.0; d];
            set.project_into(x, &mut proj);
            for k in 0..d {
                out[k] = x[k] - cfg.eta * (grad[k] + (x[k] - proj[k]) / cfg.gamma);
            }
            add_noise(out, cfg.noise_scale(), cfg.noise, rng);
        }
        CentralSampler::Pla { n_agents } => {
            let n = n_agents as f64;
            p.total_gradient_into(x, &mut grad);
            let mut proj = vec![0.0; d];
            set.project_into(x, &mut proj);
            for k in 0..d {
                out[k] = x[k] - cfg.eta * (grad[k] / n + (x[k] - proj[k]) / (n * cfg.gamma));
            }
            let scale = match cfg.noise {
                NoiseMode::Gaussian => (2.0 * cfg.eta / n).sqrt(),
                NoiseMode::Zero => 0.0,
            };
            add_noise(out, scale, cfg.noise, rng);
        }
        CentralSampler::ProjectedLmc => {
            p.stochastic_total_gradient_into(x, cfg.batch, rng, &mut grad);
            let mut free = vec![0.0; d];
            for k in 0..d {
                free[k] = x[k] - cfg.eta * grad[k];
            }
            add_noise(&mut free, cfg.noise_scale(), cfg.noise, rng);
            set.project_into(&free, out);
        }
        CentralSampler::Sgld => {
            p.stochastic_total_gradient_into(x, cfg.batch, rng, &mut grad);
            for k in 0..d {
                out[k] = x[k] - cfg.eta * grad[k];
            }
            add_noise(out, cfg.noise_scale(), cfg.noise, rng);
        }
    }
}

fn central_checked(
    x: &[f64],
    p: &Potential,
    set: &ConvexSet,
    cfg: &SamplerConfig,
    sampler: CentralSampler,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    if x.len() != p.dim() || set.dim() != p.dim() {
        return Err(Error::invalid(
            "dimension mismatch between iterate, potential and set",
        ));
    }
    if cfg.batch == 0 {
        return Err(Error::invalid("batch size must be positive"));
    }
    let mut out = vec![0.0; x.len()];
    central_step_into(x, p, set, cfg, sampler, rng, &mut out);
    Ok(out)
}

pub fn psgld_step(
    x: &[f64],
    p: &Potential,
    set: &ConvexSet,
    cfg: &SamplerConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    central_checked(x, p, set, cfg, CentralSampler::Psgld, rng)
}

pub fn pla_mean_chain_step(
    x: &[f64],
    p: &Potential,
    set: &ConvexSet,
    cfg: &SamplerConfig,
    n_agents: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    if n_agents == 0 {
        return Err(Error::invalid("n_agents must be positive"));
    }
    central_checked(x, p, set, cfg, CentralSampler::Pla { n_agents }, rng)
}

pub fn projected_lmc_step(
    x: &[f64],
    p: &Potential,
    set: &ConvexSet,
    cfg: &SamplerConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    central_checked(x, p, set, cfg, CentralSampler::ProjectedLmc, rng)
}

pub fn sgld_step(
    x: &[f64],
    p: &Potential,
    set: &ConvexSet,
    cfg: &SamplerConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    central_checked(x, p, set, cfg, CentralSampler::Sgld, rng)
}

/// Advances a single-agent state by one centralized step.
pub fn central_step(
    state: &mut NetworkState,
    p: &Potential,
    set: &ConvexSet,
    cfg: &SamplerConfig,
    sampler: CentralSampler,
) -> Result<()> {
    if state.n_agents() != 1 {
        return Err(Error::invalid("centralized chains carry exactly one agent"));
    }
    check_shapes(state, p, set)?;
    central_step_into(
        &state.agents,
        p,
        set,
        cfg,
        sampler,
        &mut state.rngs[0],
        &mut state.scratch,
    );
    std::mem::swap(&mut state.agents, &mut state.scratch);
    state.iteration += 1;
    Ok(())
}

/// Which chain family a bank run advances.
#[derive(Debug, Clone, Copy)]
pub enum Dynamics<'a> {
    Decentralized(&'a MixingMatrix),
    Centralized(CentralSampler),
}

/// Runs `cfg.n_chains` independent replicas for `cfg.iterations` steps.
/// Replicas advance in parallel on the current rayon pool; `observe` sees the
/// whole bank after every `record_every`-th iteration, in iteration order.
/// The output does not depend on the number of worker threads.
pub fn run_bank<F>(
    dynamics: Dynamics<'_>,
    p: &Potential,
    set: &ConvexSet,
    cfg: &SamplerConfig,
    mut observe: F,
) -> Result<Vec<NetworkState>>
where
    F: FnMut(usize, &[NetworkState]) -> Result<()>,
{
    cfg.validate()?;
    let (n_agents, lane) = match dynamics {
        Dynamics::Decentralized(w) => (w.n_agents(), StreamLane::Decentralized),
        Dynamics::Centralized(_) => (1, StreamLane::Centralized),
    };
    let mut bank = (0..cfg.n_chains)
        .map(|r| NetworkState::initial(n_agents, set, cfg.seed, lane, r, cfg.init))
        .collect::<Result<Vec<_>>>()?;
    for k in 1..=cfg.iterations {
        bank.par_iter_mut().enumerate().try_for_each(|(r, s)| {
            match dynamics {
                Dynamics::Decentralized(w) => depsgld_step(s, w, p, set, cfg)?,
                Dynamics::Centralized(c) => central_step(s, p, set, cfg, c)?,
            }
            if s.agents.iter().any(|v| !v.is_finite()) {
                return Err(Error::NumericFailure(format!(
                    "iterates diverged at iteration {k} (replica {r}); reduce eta"
                )));
            }
            Ok(())
        })?;
        if k % cfg.record_every == 0 {
            observe(k, &bank)?;
        }
    }
    Ok(bank)
}

/// DE-PSGLD over a bank of replicas; see [`run_bank`].
pub fn run_depsgld<F>(
    w: &MixingMatrix,
    p: &Potential,
    set: &ConvexSet,
    cfg: &SamplerConfig,
    observe: F,
) -> Result<Vec<NetworkState>>
where
    F: FnMut(usize, &[NetworkState]) -> Result<()>,
{
    if p.n_agents() != w.n_agents() {
        return Err(Error::invalid(format!(
            "potential has {} shards but the network has {} agents",
            p.n_agents(),
            w.n_agents()
        )));
    }
    run_bank(Dynamics::Decentralized(w), p, set, cfg, observe)
}

/// `‖∇U^γ(x)‖²` for the stacked state, with
/// `∇U^γ = (∇f_i(x_i) + (x_i − P_K x_i)/(Nγ))_i`.
pub fn stacked_gradient_sq(
    state: &NetworkState,
    p: &Potential,
    set: &ConvexSet,
    gamma: f64,
) -> f64 {
    let d = state.dim;
    let n = state.n_agents();
    let mut g = vec![0.0; d];
    let mut proj = vec![0.0; d];
    let mut total = 0.0;
    for i in 0..n {
        let xi = state.agent(i);
        p.gradient_into(i, xi, &mut g);
        set.project_into(xi, &mut proj);
        for k in 0..d {
            let v = g[k] + (xi[k] - proj[k]) / (n as f64 * gamma);
            total += v * v;
        }
    }
    total
}

/// Inputs to the consensus-distance envelope.
#[derive(Debug, Clone, Copy)]
pub struct ConsensusEnvelope {
    pub rho: f64,
    pub eta: f64,
    pub dim: usize,
    pub n_agents: usize,
    /// `E‖x⁽⁰⁾‖²` of the stacked initial state.
    pub init_sq_norm: f64,
    /// Bound on `E‖∇U^γ(x⁽ᵏ⁾)‖²`.
    pub grad_sq: f64,
    /// Per-agent gradient-noise second moment.
    pub noise_sigma2: f64,
}

impl ConsensusEnvelope {
    /// `4ρ^{2k}E‖x⁰‖²/N + 4η²G²/(N(1−ρ)²) + 4η²σ²/(1−ρ²) + 8ηd/(1−ρ²)`.
    /// Infinite when `ρ ≥ 1`.
    pub fn bound(&self, k: usize) -> f64 {
        if self.rho >= 1.0 {
            return f64::INFINITY;
        }
        let n = self.n_agents as f64;
        let one_minus = 1.0 - self.rho;
        let one_minus_sq = 1.0 - self.rho * self.rho;
        let rho_2k = if self.rho == 0.0 && k > 0 {
            0.0
        } else {
            self.rho.powi(2 * k as i32)
        };
        4.0 * rho_2k * self.init_sq_norm / n
            + 4.0 * self.eta * self.eta * self.grad_sq / (n * one_minus * one_minus)
            + 4.0 * self.eta * self.eta * self.noise_sigma2 / one_minus_sq
            + 8.0 * self.eta * self.dim as f64 / one_minus_sq
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::quartic_1d;
    use crate::topology::{build_graph, mixing_matrix, GraphKind};

    #[test]
    fn max_stepsize_hand_value() {
        let eta = max_stepsize(1.0, 2.0, 4, 0.1, 0.0).unwrap();
        assert!((eta - 0.125).abs() < 1e-15);
        assert!((effective_smoothness(2.0, 4, 0.1) - 7.0).abs() < 1e-12);
    }

    #[test]
    fn max_stepsize_limits() {
        // λ_N → 1: the middle term 2/L_γ never undercuts 2N/L_γ.
        let lg = effective_smoothness(2.0, 3, 0.5);
        let eta = max_stepsize(0.1, 2.0, 3, 0.5, 1.0).unwrap();
        assert!(eta <= 2.0 / lg && eta <= 6.0 / lg);
        // γ → ∞ recovers min{2N/L, (1+λ)/L, 1/(L+μ)}.
        let eta = max_stepsize(1.0, 2.0, 4, 1e300, 0.0).unwrap();
        assert!((eta - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn max_stepsize_rejects_bad_inputs() {
        assert!(max_stepsize(0.0, 2.0, 4, 0.1, 0.0).is_err());
        assert!(max_stepsize(2.0, 2.0, 4, 0.1, 0.0).is_err());
        assert!(max_stepsize(1.0, 2.0, 4, -0.1, 0.0).is_err());
        assert!(max_stepsize(1.0, 2.0, 4, 0.1, -1.0).is_err());
    }

    #[test]
    fn one_zero_noise_step_on_quartic() {
        let n = 5;
        let p = quartic_1d(n).unwrap();
        let set = ConvexSet::interval_box(vec![-1.0], vec![1.0]).unwrap();
        let w = mixing_matrix(&build_graph(GraphKind::Complete, n).unwrap(), None).unwrap();
        let cfg = SamplerConfig {
            eta: 5e-4,
            noise: NoiseMode::Zero,
            ..SamplerConfig::default()
        };
        let mut s = NetworkState::initial(n, &set, 1, StreamLane::Decentralized, 0, InitMode::Zero)
            .unwrap();
        depsgld_step(&mut s, &w, &p, &set, &cfg).unwrap();
        for i in 0..n {
            assert!((s.agent(i)[0] - 5e-4 / n as f64).abs() < 1e-18);
        }
        assert_eq!(s.iteration(), 1);
    }

    #[test]
    fn psgld_and_pla_hand_values() {
        let set = ConvexSet::interval_box(vec![-1.0], vec![1.0]).unwrap();
        let cfg = SamplerConfig {
            eta: 0.1,
            gamma: 0.5,
            noise: NoiseMode::Zero,
            ..SamplerConfig::default()
        };
        let mut rng = stream_rng(0, StreamLane::Auxiliary, 0, 0);
        let x = psgld_step(&[2.0], &quartic_1d(1).unwrap(), &set, &cfg, &mut rng).unwrap();
        assert!((x[0] - 1.3).abs() < 1e-12);
        let x =
            pla_mean_chain_step(&[2.0], &quartic_1d(4).unwrap(), &set, &cfg, 4, &mut rng).unwrap();
        assert!((x[0] - 1.825).abs() < 1e-12);
    }

    #[test]
    fn mismatched_mixing_matrix_is_rejected() {
        let p = quartic_1d(3).unwrap();
        let set = ConvexSet::interval_box(vec![-1.0], vec![1.0]).unwrap();
        let w = mixing_matrix(&build_graph(GraphKind::Complete, 4).unwrap(), None).unwrap();
        let mut s = NetworkState::initial(3, &set, 1, StreamLane::Decentralized, 0, InitMode::Zero)
            .unwrap();
        let err = depsgld_step(&mut s, &w, &p, &set, &SamplerConfig::default()).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    #[test]
    fn projected_lmc_lands_on_boundary() {
        let set = ConvexSet::interval_box(vec![-1.0], vec![1.0]).unwrap();
        let p = quartic_1d(1).unwrap();
        let cfg = SamplerConfig {
            eta: 0.5,
            ..SamplerConfig::default()
        };
        // Start on the upper face; find a noise draw that pushes outward.
        let mut pushed_out = false;
        for r in 0..64 {
            let mut rng = stream_rng(11, StreamLane::Auxiliary, r, 0);
            let mut probe = rng.clone();
            let z: f64 = StandardNormal.sample(&mut probe);
            let free = 1.0 - 0.5 * 0.5 + z;
            let x = projected_lmc_step(&[1.0], &p, &set, &cfg, &mut rng).unwrap();
            assert!(set.contains(&x));
            if free > 1.0 {
                assert_eq!(x[0], 1.0);
                pushed_out = true;
            }
        }
        assert!(pushed_out);
    }

    #[test]
    fn envelope_is_infinite_without_contraction() {
        let env = ConsensusEnvelope {
            rho: 1.0,
            eta: 0.1,
            dim: 1,
            n_agents: 4,
            init_sq_norm: 0.0,
            grad_sq: 1.0,
            noise_sigma2: 0.0,
        };
        assert!(env.bound(10).is_infinite());
        let env = ConsensusEnvelope { rho: 0.0, ..env };
        assert!((env.bound(3) - (4.0 * 0.01 / 4.0 + 8.0 * 0.1)).abs() < 1e-15);
    }

    #[test]
    fn streams_are_distinct_and_reproducible() {
        use rand::Rng;
        let a: u64 = stream_rng(3, StreamLane::Decentralized, 0, 1).random();
        let b: u64 = stream_rng(3, StreamLane::Decentralized, 0, 1).random();
        let c: u64 = stream_rng(3, StreamLane::Decentralized, 1, 0).random();
        let d: u64 = stream_rng(3, StreamLane::Centralized, 0, 1).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }
}
