use std::fmt;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;

use super::config::{Experiment, ExperimentConfig};
use super::output::{write_run, RunFiles, SampleDump};
use crate::constraints::ConvexSet;
use crate::error::{Error, Result};
use crate::linalg::{distance, norm2};
use crate::metrics::{
    classification_accuracy, consensus_distance_bank, feasibility_stats, posterior_summary,
    predictive_accuracy, true_quantile_1d, wasserstein2_1d, AgentTag, Feasibility,
    PosteriorSummary, ReplicaTag, RunTrace,
};
use crate::models::{
    fit_logreg_mle, fit_ols, generate_blr_data, linreg_potential, load_wdbc, logreg_potential,
    quartic_1d, DataSet, MleFit, Potential,
};
use crate::samplers::{
    check_stepsize, max_stepsize, run_bank, run_depsgld, stacked_gradient_sq, stream_rng,
    ConsensusEnvelope, Dynamics, NetworkState, StreamLane,
};
use crate::topology::{
    build_graph, mixing_matrix, validate_mixing, GraphKind, MixingMatrix, ValidationReport,
};

/// Grid points for the reference quantile of the 1-D target.
pub const QUANTILE_GRID: usize = 20_001;
/// Likelihood noise variance of the synthetic regression model.
pub const BLR_NOISE_VAR: f64 = 0.25;
pub const BLR_TRUE_BETA: [f64; 2] = [1.0, 1.0];
/// Constraint radius as a fraction of the unconstrained estimate's norm.
pub const RADIUS_FRACTION: f64 = 0.8;

/// One DE-PSGLD run on one topology.
#[derive(Debug, Clone)]
pub struct TopologyRun {
    pub topology: GraphKind,
    pub rho: f64,
    pub lambda_min: f64,
    pub eta_max: Option<f64>,
    pub trace: RunTrace,
    pub final_bank: Vec<NetworkState>,
    pub wall_time: Duration,
}

#[derive(Debug, Clone)]
pub struct Sample1dOutcome {
    pub runs: Vec<TopologyRun>,
    pub tracked_agents: Vec<usize>,
    pub comparator: Option<&'static str>,
}

#[derive(Debug, Clone)]
pub struct BlrRun {
    pub run: TopologyRun,
    /// Mean-chain iterates after burn-in, all replicas, flattened (dim 2).
    pub retained: Vec<f64>,
    pub summary: PosteriorSummary,
    pub feasibility: Feasibility,
    /// `‖β̄ − P_K(β*)‖`.
    pub posterior_mean_error: f64,
}

#[derive(Debug, Clone)]
pub struct ComparatorSummary {
    pub name: &'static str,
    pub summary: PosteriorSummary,
    pub feasibility: Feasibility,
    pub posterior_mean_error: f64,
}

#[derive(Debug, Clone)]
pub struct BlrOutcome {
    pub beta_ols: Vec<f64>,
    pub radius: f64,
    pub set: ConvexSet,
    /// `P_K(β*)`.
    pub target: Vec<f64>,
    pub runs: Vec<BlrRun>,
    pub comparator: Option<ComparatorSummary>,
}

#[derive(Debug, Clone)]
pub struct LogregRun {
    pub run: TopologyRun,
    /// Plug-in accuracy of the replica-averaged mean chain at the last iteration.
    pub final_accuracy: f64,
    pub final_comparator_accuracy: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct LogregOutcome {
    pub mle: MleFit,
    pub mle_accuracy: f64,
    pub radius: f64,
    pub n_train: usize,
    pub n_eval: usize,
    pub runs: Vec<LogregRun>,
}

fn expect(cfg: &ExperimentConfig, experiment: Experiment) -> Result<()> {
    if cfg.experiment != experiment {
        return Err(Error::InvalidConfig(format!(
            "configuration is for {} but {experiment} was requested",
            cfg.experiment
        )));
    }
    Ok(())
}

fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match threads {
        None => f(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("cannot start {n} worker threads: {e}")))?
            .install(f),
    }
}

fn network(cfg: &ExperimentConfig, kind: GraphKind) -> Result<MixingMatrix> {
    let w = mixing_matrix(&build_graph(kind, cfg.n_agents)?, cfg.delta)?;
    let report = validate_mixing(&w);
    if !report.all_passed() {
        return Err(Error::NumericFailure(format!(
            "{kind} mixing matrix failed validation:\n{report}"
        )));
    }
    if !w.is_contracting() {
        log::warn!("{kind} topology: rho = 1, agents never reach consensus");
    }
    Ok(w)
}

/// Builds every requested network and applies the step-size guard to all of
/// them before anything runs.
fn networks(
    cfg: &ExperimentConfig,
    p: &Potential,
) -> Result<Vec<(GraphKind, MixingMatrix, Option<f64>)>> {
    cfg.topologies()
        .into_iter()
        .map(|kind| {
            let w = network(cfg, kind)?;
            let eta_max = check_stepsize(p, &w, &cfg.sampler, cfg.guard)?;
            Ok((kind, w, eta_max))
        })
        .collect()
}

fn agent_average(bank: &[NetworkState], i: usize) -> Vec<f64> {
    let mut acc = vec![0.0; bank[0].dim()];
    for s in bank {
        for (a, v) in acc.iter_mut().zip(s.agent(i)) {
            *a += v;
        }
    }
    acc.iter_mut().for_each(|a| *a /= bank.len() as f64);
    acc
}

fn mean_chain_average(bank: &[NetworkState]) -> Vec<f64> {
    let mut acc = vec![0.0; bank[0].dim()];
    for s in bank {
        for (a, v) in acc.iter_mut().zip(s.mean()) {
            *a += v;
        }
    }
    acc.iter_mut().for_each(|a| *a /= bank.len() as f64);
    acc
}

/// Rows a comparator contributes at each recorded iteration.
struct ComparatorRun {
    name: &'static str,
    rows: Vec<Vec<(&'static str, f64)>>,
    final_bank: Vec<NetworkState>,
}

impl ComparatorRun {
    fn push_rows(&self, trace: &mut RunTrace, slot: usize, k: usize) -> Result<()> {
        for (metric, value) in &self.rows[slot] {
            trace.push(
                ReplicaTag::Pooled,
                k,
                AgentTag::Central(self.name),
                metric,
                *value,
            )?;
        }
        Ok(())
    }
}

/// Runs the configured comparator. Divergence is reported and the arm dropped.
fn run_comparator<F>(
    cfg: &ExperimentConfig,
    p: &Potential,
    set: &ConvexSet,
    mut metrics: F,
) -> Result<Option<ComparatorRun>>
where
    F: FnMut(usize, &[NetworkState]) -> Result<Vec<(&'static str, f64)>>,
{
    let Some(sampler) = cfg.comparator.sampler(cfg.n_agents) else {
        return Ok(None);
    };
    let mut rows = Vec::new();
    let result = run_bank(
        Dynamics::Centralized(sampler),
        p,
        set,
        &cfg.sampler,
        |k, bank| {
            rows.push(metrics(k, bank)?);
            Ok(())
        },
    );
    match result {
        Ok(final_bank) => Ok(Some(ComparatorRun {
            name: sampler.name(),
            rows,
            final_bank,
        })),
        Err(Error::NumericFailure(msg)) => {
            log::warn!("{} comparator dropped: {msg}", sampler.name());
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

fn save(
    cfg: &ExperimentConfig,
    kind: GraphKind,
    trace: &RunTrace,
    samples: &SampleDump,
    wall_time: Duration,
) -> Result<()> {
    let Some(out) = &cfg.out else {
        return Ok(());
    };
    let mut echo = cfg.echo();
    echo.push_str(&format!("# run topology = {kind}\n"));
    write_run(
        &out.join(kind.name()),
        &RunFiles {
            config_echo: &echo,
            trace,
            samples,
            seed: cfg.sampler.seed,
            topology: kind.name(),
            threads: cfg.threads,
            wall_time,
        },
    )
}

fn interval_of(set: &ConvexSet) -> Result<(f64, f64)> {
    if set.dim() != 1 {
        return Err(Error::InvalidConfig(
            "the 1-D experiment needs a 1-D set".into(),
        ));
    }
    Ok(match set {
        ConvexSet::IntervalBox { lower, upper } => (lower[0], upper[0]),
        ConvexSet::L2Ball { center, radius } => (center[0] - radius, center[0] + radius),
        ConvexSet::L1Ball { radius, .. } => (-radius, *radius),
    })
}

/// Three agent ids drawn once from the seed (all of them when N ≤ 3).
pub fn tracked_agents(n_agents: usize, seed: u64) -> Vec<usize> {
    if n_agents <= 3 {
        return (0..n_agents).collect();
    }
    let mut rng = stream_rng(seed, StreamLane::Auxiliary, 0, 0);
    let mut ids = rand::seq::index::sample(&mut rng, n_agents, 3).into_vec();
    ids.sort_unstable();
    ids
}

pub fn run_sample1d(cfg: &ExperimentConfig) -> Result<Sample1dOutcome> {
    expect(cfg, Experiment::Sample1d)?;
    with_pool(cfg.threads, || sample1d(cfg))
}

fn sample1d(cfg: &ExperimentConfig) -> Result<Sample1dOutcome> {
    let n = cfg.n_agents;
    let sc = &cfg.sampler;
    let p = quartic_1d(n)?;
    let set = cfg.constraint_set(1, None)?;
    let (lo, hi) = interval_of(&set)?;
    let q = true_quantile_1d(
        |x| p.total_value(&[x]).unwrap_or(f64::NAN),
        lo,
        hi,
        QUANTILE_GRID,
    )?;
    let nets = networks(cfg, &p)?;
    let tracked = tracked_agents(n, sc.seed);

    let w2_of = |values: Vec<f64>| wasserstein2_1d(&values, &q);
    let comparator = run_comparator(cfg, &p, &set, |_, bank| {
        Ok(vec![(
            "w2",
            w2_of(bank.iter().map(|s| s.agent(0)[0]).collect())?,
        )])
    })?;

    let init_sq_norm = (0..sc.n_chains)
        .map(|r| {
            NetworkState::initial(n, &set, sc.seed, StreamLane::Decentralized, r, sc.init)
                .map(|s| s.stacked().iter().map(|v| v * v).sum::<f64>())
        })
        .sum::<Result<f64>>()?
        / sc.n_chains as f64;

    let mut runs = Vec::new();
    for (kind, w, eta_max) in nets {
        log::info!("sample-1d: {kind} topology, N = {n}, rho = {:.4}", w.rho());
        let start = Instant::now();
        let mut trace = RunTrace::new();
        let mut grad_sq_max = 0.0f64;
        let mut slot = 0;
        let final_bank = run_depsgld(&w, &p, &set, sc, |k, bank| {
            for &i in &tracked {
                let v = w2_of(bank.iter().map(|s| s.agent(i)[0]).collect())?;
                trace.push(ReplicaTag::Pooled, k, AgentTag::Agent(i), "w2", v)?;
            }
            let v = w2_of(bank.iter().map(|s| s.mean()[0]).collect())?;
            trace.push(ReplicaTag::Pooled, k, AgentTag::Mean, "w2", v)?;
            if let Some(c) = &comparator {
                c.push_rows(&mut trace, slot, k)?;
            }
            slot += 1;
            let grad_sq = bank
                .iter()
                .map(|s| stacked_gradient_sq(s, &p, &set, sc.gamma))
                .sum::<f64>()
                / bank.len() as f64;
            grad_sq_max = grad_sq_max.max(grad_sq);
            trace.push(
                ReplicaTag::Pooled,
                k,
                AgentTag::Mean,
                "consensus",
                consensus_distance_bank(bank),
            )?;
            trace.push(ReplicaTag::Pooled, k, AgentTag::Mean, "grad_u_sq", grad_sq)?;
            if w.is_contracting() {
                let env = ConsensusEnvelope {
                    rho: w.rho(),
                    eta: sc.eta,
                    dim: 1,
                    n_agents: n,
                    init_sq_norm,
                    grad_sq: grad_sq_max,
                    noise_sigma2: p.noise_sigma2().unwrap_or(0.0),
                };
                trace.push(
                    ReplicaTag::Pooled,
                    k,
                    AgentTag::Mean,
                    "consensus_bound",
                    env.bound(k),
                )?;
            }
            Ok(())
        })?;
        let wall_time = start.elapsed();

        let mut dump = SampleDump::new(1);
        for (r, s) in final_bank.iter().enumerate() {
            for i in 0..n {
                dump.push(r, sc.iterations, &AgentTag::Agent(i), s.agent(i));
            }
            dump.push(r, sc.iterations, &AgentTag::Mean, &s.mean());
        }
        if let Some(c) = &comparator {
            for (r, s) in c.final_bank.iter().enumerate() {
                dump.push(r, sc.iterations, &AgentTag::Central(c.name), s.agent(0));
            }
        }
        save(cfg, kind, &trace, &dump, wall_time)?;
        runs.push(TopologyRun {
            topology: kind,
            rho: w.rho(),
            lambda_min: w.lambda_min(),
            eta_max,
            trace,
            final_bank,
            wall_time,
        });
    }
    Ok(Sample1dOutcome {
        runs,
        tracked_agents: tracked,
        comparator: comparator.map(|c| c.name),
    })
}

fn summarize_flat(flat: &[f64], dim: usize) -> Result<PosteriorSummary> {
    posterior_summary(flat.chunks(dim))
}

pub fn run_blr2d(cfg: &ExperimentConfig) -> Result<BlrOutcome> {
    expect(cfg, Experiment::Blr2d)?;
    with_pool(cfg.threads, || blr2d(cfg))
}

fn blr2d(cfg: &ExperimentConfig) -> Result<BlrOutcome> {
    let n = cfg.n_agents;
    let sc = &cfg.sampler;
    let burnin = cfg.burnin();
    let data = Arc::new(generate_blr_data(cfg.n_samples, sc.seed)?);
    let beta_ols = fit_ols(&data)?;
    let radius = cfg.radius.unwrap_or(RADIUS_FRACTION * norm2(&beta_ols));
    let set = cfg.constraint_set(2, Some(radius))?;
    let target = set.project(&BLR_TRUE_BETA)?;
    log::info!("blr: beta_ols = {beta_ols:?}, radius = {radius}, P_K(beta*) = {target:?}");
    let p = linreg_potential(data, n, BLR_NOISE_VAR)?;
    let nets = networks(cfg, &p)?;

    let mut comparator_retained = Vec::new();
    let comparator = run_comparator(cfg, &p, &set, |k, bank| {
        let avg = agent_average(bank, 0);
        let sq = bank
            .iter()
            .map(|s| set.distance(s.agent(0)).map(|d| d * d))
            .sum::<Result<f64>>()?
            / bank.len() as f64;
        if k >= burnin {
            for s in bank {
                comparator_retained.extend_from_slice(s.agent(0));
            }
        }
        Ok(vec![("error", distance(&avg, &target)), ("sq_dist_K", sq)])
    })?;
    let comparator_summary = match &comparator {
        Some(c) if comparator_retained.len() >= 4 => Some(ComparatorSummary {
            name: c.name,
            summary: summarize_flat(&comparator_retained, 2)?,
            feasibility: feasibility_stats(comparator_retained.chunks(2), &set)?,
            posterior_mean_error: distance(&summarize_flat(&comparator_retained, 2)?.mean, &target),
        }),
        _ => None,
    };

    let mut runs = Vec::new();
    for (kind, w, eta_max) in nets {
        log::info!("blr: {kind} topology, N = {n}, rho = {:.4}", w.rho());
        let start = Instant::now();
        let mut trace = RunTrace::new();
        let mut retained = Vec::new();
        let mut dump = SampleDump::new(2);
        let mut slot = 0;
        let final_bank = run_depsgld(&w, &p, &set, sc, |k, bank| {
            for i in 0..n {
                let avg = agent_average(bank, i);
                trace.push(
                    ReplicaTag::Pooled,
                    k,
                    AgentTag::Agent(i),
                    "error",
                    distance(&avg, &target),
                )?;
            }
            let avg = mean_chain_average(bank);
            let means: Vec<Vec<f64>> = bank.iter().map(NetworkState::mean).collect();
            let sq = means
                .iter()
                .map(|m| set.distance(m).map(|d| d * d))
                .sum::<Result<f64>>()?
                / bank.len() as f64;
            trace.push(
                ReplicaTag::Pooled,
                k,
                AgentTag::Mean,
                "error",
                distance(&avg, &target),
            )?;
            trace.push(ReplicaTag::Pooled, k, AgentTag::Mean, "norm", norm2(&avg))?;
            trace.push(ReplicaTag::Pooled, k, AgentTag::Mean, "sq_dist_K", sq)?;
            trace.push(
                ReplicaTag::Pooled,
                k,
                AgentTag::Mean,
                "consensus",
                consensus_distance_bank(bank),
            )?;
            if let Some(c) = &comparator {
                c.push_rows(&mut trace, slot, k)?;
            }
            slot += 1;
            if k >= burnin {
                for (r, m) in means.iter().enumerate() {
                    retained.extend_from_slice(m);
                    if (k - burnin).is_multiple_of(cfg.thin) {
                        dump.push(r, k, &AgentTag::Mean, m);
                    }
                }
            }
            Ok(())
        })?;
        let wall_time = start.elapsed();
        if retained.len() < 4 {
            return Err(Error::InvalidConfig(
                "fewer than two samples retained after burn-in".into(),
            ));
        }
        let summary = summarize_flat(&retained, 2)?;
        let feasibility = feasibility_stats(retained.chunks(2), &set)?;
        let error = distance(&summary.mean, &target);
        let k = sc.iterations;
        let finals = [
            ("posterior_mean_0", summary.mean[0]),
            ("posterior_mean_1", summary.mean[1]),
            ("posterior_cov_00", summary.covariance[(0, 0)]),
            ("posterior_cov_01", summary.covariance[(0, 1)]),
            ("posterior_cov_11", summary.covariance[(1, 1)]),
            ("posterior_mean_error", error),
            ("frac_inside_K", feasibility.fraction_inside),
            ("retained_sq_dist_K", feasibility.mean_sq_distance),
        ];
        for (metric, value) in finals {
            trace.push(ReplicaTag::Pooled, k, AgentTag::Mean, metric, value)?;
        }
        if let Some(c) = &comparator_summary {
            for (metric, value) in [
                ("posterior_mean_0", c.summary.mean[0]),
                ("posterior_mean_1", c.summary.mean[1]),
                ("posterior_mean_error", c.posterior_mean_error),
                ("frac_inside_K", c.feasibility.fraction_inside),
            ] {
                trace.push(
                    ReplicaTag::Pooled,
                    k,
                    AgentTag::Central(c.name),
                    metric,
                    value,
                )?;
            }
        }
        for (r, s) in final_bank.iter().enumerate() {
            for i in 0..n {
                dump.push(r, k, &AgentTag::Agent(i), s.agent(i));
            }
        }
        if let Some(c) = &comparator {
            for (r, s) in c.final_bank.iter().enumerate() {
                dump.push(r, k, &AgentTag::Central(c.name), s.agent(0));
            }
        }
        save(cfg, kind, &trace, &dump, wall_time)?;
        runs.push(BlrRun {
            run: TopologyRun {
                topology: kind,
                rho: w.rho(),
                lambda_min: w.lambda_min(),
                eta_max,
                trace,
                final_bank,
                wall_time,
            },
            retained,
            summary,
            feasibility,
            posterior_mean_error: error,
        });
    }
    Ok(BlrOutcome {
        beta_ols,
        radius,
        set,
        target,
        runs,
        comparator: comparator_summary,
    })
}

pub fn run_logreg(cfg: &ExperimentConfig) -> Result<LogregOutcome> {
    expect(cfg, Experiment::Logreg)?;
    let wdbc = load_wdbc(&cfg.data, cfg.standardize)?;
    log::info!("{}", wdbc.report());
    run_logreg_on(cfg, wdbc.data)
}

/// Logistic experiment on an already loaded data set.
pub fn run_logreg_on(cfg: &ExperimentConfig, data: DataSet) -> Result<LogregOutcome> {
    expect(cfg, Experiment::Logreg)?;
    let (train, eval) = match cfg.test_frac {
        None => (data.clone(), data),
        Some(frac) => {
            let mut idx: Vec<usize> = (0..data.n()).collect();
            idx.shuffle(&mut stream_rng(
                cfg.sampler.seed,
                StreamLane::Auxiliary,
                1,
                0,
            ));
            let n_test = ((data.n() as f64) * frac).round() as usize;
            if n_test == 0 || n_test >= data.n() {
                return Err(Error::InvalidConfig(format!(
                    "test-frac {frac} leaves an empty train or test split"
                )));
            }
            let (test, train) = idx.split_at(n_test);
            let mut train = train.to_vec();
            let mut test = test.to_vec();
            train.sort_unstable();
            test.sort_unstable();
            (data.select(&train)?, data.select(&test)?)
        }
    };
    with_pool(cfg.threads, || logreg(cfg, train, eval))
}

fn logreg(cfg: &ExperimentConfig, train: DataSet, eval: DataSet) -> Result<LogregOutcome> {
    let n = cfg.n_agents;
    let sc = &cfg.sampler;
    let mle = fit_logreg_mle(&train)?;
    let mle_accuracy = classification_accuracy(&mle.beta, &eval)?;
    let radius = cfg.radius.unwrap_or(RADIUS_FRACTION * norm2(&mle.beta));
    log::info!(
        "logreg: MLE accuracy {mle_accuracy:.4}, |beta_mle| = {:.4}, radius = {radius:.4}",
        norm2(&mle.beta)
    );
    let dim = train.p();
    let set = cfg.constraint_set(dim, Some(radius))?;
    let n_train = train.n();
    let p = logreg_potential(Arc::new(train), n)?;
    let nets = networks(cfg, &p)?;

    let comparator = run_comparator(cfg, &p, &set, |_, bank| {
        Ok(vec![(
            "accuracy",
            classification_accuracy(&agent_average(bank, 0), &eval)?,
        )])
    })?;
    let comparator_final = comparator
        .as_ref()
        .map(|c| classification_accuracy(&agent_average(&c.final_bank, 0), &eval))
        .transpose()?;

    let mut runs = Vec::new();
    for (kind, w, eta_max) in nets {
        log::info!("logreg: {kind} topology, N = {n}, rho = {:.4}", w.rho());
        let start = Instant::now();
        let mut trace = RunTrace::new();
        let mut slot = 0;
        let final_bank = run_depsgld(&w, &p, &set, sc, |k, bank| {
            for i in 0..n {
                let acc = classification_accuracy(&agent_average(bank, i), &eval)?;
                trace.push(ReplicaTag::Pooled, k, AgentTag::Agent(i), "accuracy", acc)?;
            }
            let acc = classification_accuracy(&mean_chain_average(bank), &eval)?;
            trace.push(ReplicaTag::Pooled, k, AgentTag::Mean, "accuracy", acc)?;
            if cfg.predictive {
                let means: Vec<Vec<f64>> = bank.iter().map(NetworkState::mean).collect();
                let acc = predictive_accuracy(means.iter().map(Vec::as_slice), &eval)?;
                trace.push(
                    ReplicaTag::Pooled,
                    k,
                    AgentTag::Mean,
                    "predictive_accuracy",
                    acc,
                )?;
            }
            if let Some(c) = &comparator {
                c.push_rows(&mut trace, slot, k)?;
            }
            slot += 1;
            trace.push(
                ReplicaTag::Pooled,
                k,
                AgentTag::Mean,
                "consensus",
                consensus_distance_bank(bank),
            )?;
            Ok(())
        })?;
        let wall_time = start.elapsed();
        let final_accuracy = classification_accuracy(&mean_chain_average(&final_bank), &eval)?;

        let mut dump = SampleDump::new(dim);
        let k = sc.iterations;
        for (r, s) in final_bank.iter().enumerate() {
            for i in 0..n {
                dump.push(r, k, &AgentTag::Agent(i), s.agent(i));
            }
            dump.push(r, k, &AgentTag::Mean, &s.mean());
        }
        if let Some(c) = &comparator {
            for (r, s) in c.final_bank.iter().enumerate() {
                dump.push(r, k, &AgentTag::Central(c.name), s.agent(0));
            }
        }
        save(cfg, kind, &trace, &dump, wall_time)?;
        runs.push(LogregRun {
            run: TopologyRun {
                topology: kind,
                rho: w.rho(),
                lambda_min: w.lambda_min(),
                eta_max,
                trace,
                final_bank,
                wall_time,
            },
            final_accuracy,
            final_comparator_accuracy: comparator_final,
        });
    }
    Ok(LogregOutcome {
        mle,
        mle_accuracy,
        radius,
        n_train,
        n_eval: eval.n(),
        runs,
    })
}

#[derive(Debug, Clone)]
pub struct NetworkEntry {
    pub topology: GraphKind,
    pub mixing: MixingMatrix,
    pub report: ValidationReport,
    pub eta_max: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct NetworkSummary {
    pub entries: Vec<NetworkEntry>,
}

impl fmt::Display for NetworkSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.entries {
            writeln!(
                f,
                "== {} (N = {}, delta = {:.6}) ==",
                e.topology,
                e.mixing.n_agents(),
                e.mixing.delta()
            )?;
            write!(f, "{}", e.report)?;
            if let Some(eta) = e.eta_max {
                writeln!(f, "eta_max = {eta:e}")?;
            }
        }
        Ok(())
    }
}

/// Builds and validates the configured networks; `η_max` is included when
/// `mu` and `lsmooth` are configured.
pub fn validate_network(cfg: &ExperimentConfig) -> Result<NetworkSummary> {
    let entries = cfg
        .topologies()
        .into_iter()
        .map(|kind| {
            let mixing = mixing_matrix(&build_graph(kind, cfg.n_agents)?, cfg.delta)?;
            let report = validate_mixing(&mixing);
            let eta_max = match (cfg.mu, cfg.l_smooth) {
                (Some(mu), Some(l)) => Some(
                    max_stepsize(mu, l, cfg.n_agents, cfg.sampler.gamma, mixing.lambda_min())
                        .map_err(|e| Error::InvalidConfig(e.to_string()))?,
                ),
                _ => None,
            };
            Ok(NetworkEntry {
                topology: kind,
                mixing,
                report,
                eta_max,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(NetworkSummary { entries })
}
