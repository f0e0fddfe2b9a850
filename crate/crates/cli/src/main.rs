use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use depsgld::harness::{
    run_blr2d, run_logreg, run_sample1d, validate_network, Experiment, ExperimentConfig,
};
use depsgld::metrics::AgentTag;
use depsgld::Result;

#[derive(Parser)]
#[command(
    name = "depsgld",
    version,
    about = "Decentralized proximal Langevin sampling experiments"
)]
struct Cli {
    /// Output directory (default runs/<command>).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// key = value file merged under command-line flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for replica parallelism.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// More logging (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// 1-D quartic target on a box.
    #[command(name = "sample-1d")]
    Sample1d(RunArgs),
    /// 2-D Bayesian linear regression with an l2-ball constraint.
    Blr(RunArgs),
    /// Bayesian logistic regression on the breast-cancer data.
    Logreg(RunArgs),
    /// Build and check mixing matrices.
    #[command(name = "validate-network")]
    ValidateNetwork(RunArgs),
}

#[derive(Args, Default)]
struct RunArgs {
    /// complete|ring|star|disconnected|all
    #[arg(long)]
    topology: Option<String>,
    #[arg(long)]
    agents: Option<usize>,
    #[arg(long)]
    delta: Option<f64>,
    /// box|l2|l1
    #[arg(long)]
    set: Option<String>,
    #[arg(long)]
    radius: Option<f64>,
    /// lower,upper of the box
    #[arg(long, allow_hyphen_values = true)]
    bounds: Option<String>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    chains: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    record_every: Option<usize>,
    /// Comparator arm: psgld|pla|plmc|sgld, or depsgld for none.
    #[arg(long)]
    sampler: Option<String>,
    /// zero|uniform-in-K
    #[arg(long)]
    init: Option<String>,
    /// strict|warn
    #[arg(long)]
    stepsize_guard: Option<String>,
    #[arg(long)]
    n_samples: Option<usize>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    no_standardize: bool,
    #[arg(long)]
    burnin: Option<usize>,
    /// Keep every n-th retained iteration in the sample dump.
    #[arg(long)]
    thin: Option<usize>,
    #[arg(long)]
    predictive: bool,
    #[arg(long)]
    test_frac: Option<f64>,
    /// Strong convexity constant for the reported step-size bound.
    #[arg(long)]
    mu: Option<f64>,
    /// Smoothness constant for the reported step-size bound.
    #[arg(long)]
    lsmooth: Option<f64>,
}

impl RunArgs {
    fn overrides(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                out.push((k.to_string(), v));
            }
        };
        let s = |v: &Option<f64>| v.map(|x| x.to_string());
        let u = |v: &Option<usize>| v.map(|x| x.to_string());
        put("topology", self.topology.clone());
        put("agents", u(&self.agents));
        put("delta", s(&self.delta));
        put("set", self.set.clone());
        put("radius", s(&self.radius));
        put("bounds", self.bounds.clone());
        put("gamma", s(&self.gamma));
        put("eta", s(&self.eta));
        put("iters", u(&self.iters));
        put("chains", u(&self.chains));
        put("batch", u(&self.batch));
        put("seed", self.seed.map(|x| x.to_string()));
        put("record-every", u(&self.record_every));
        put("sampler", self.sampler.clone());
        put("init", self.init.clone());
        put("stepsize-guard", self.stepsize_guard.clone());
        put("n-samples", u(&self.n_samples));
        put("data", self.data.as_ref().map(|p| p.display().to_string()));
        put("standardize", self.no_standardize.then(|| "false".into()));
        put("burnin", u(&self.burnin));
        put("thin", u(&self.thin));
        put("predictive", self.predictive.then(|| "true".into()));
        put("test-frac", s(&self.test_frac));
        put("mu", s(&self.mu));
        put("lsmooth", s(&self.lsmooth));
        out
    }
}

fn resolve(cli: &Cli, experiment: Experiment, args: &RunArgs) -> Result<ExperimentConfig> {
    let mut over = args.overrides();
    if let Some(out) = &cli.out {
        over.push(("out".into(), out.display().to_string()));
    }
    if let Some(t) = cli.threads {
        over.push(("threads".into(), t.to_string()));
    }
    let mut cfg = ExperimentConfig::resolve(experiment, cli.config.as_deref(), &over)?;
    if cfg.out.is_none() && experiment != Experiment::ValidateNetwork {
        cfg.out = Some(PathBuf::from("runs").join(experiment.name()));
    }
    Ok(cfg)
}

fn last(trace: &depsgld::RunTrace, agent: &AgentTag, metric: &str) -> String {
    trace
        .series(agent, metric)
        .last()
        .map_or_else(|| "-".into(), |(_, v)| format!("{v:.6}"))
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Sample1d(a) => {
            let cfg = resolve(cli, Experiment::Sample1d, a)?;
            let out = run_sample1d(&cfg)?;
            for r in &out.runs {
                let psgld = out.comparator.map_or_else(
                    || "-".into(),
                    |c| last(&r.trace, &AgentTag::Central(c), "w2"),
                );
                println!(
                    "{:<13} rho={:.4}  w2(mean)={}  w2(comparator)={}  consensus={}",
                    r.topology.name(),
                    r.rho,
                    last(&r.trace, &AgentTag::Mean, "w2"),
                    psgld,
                    last(&r.trace, &AgentTag::Mean, "consensus"),
                );
            }
            report_out(&cfg);
        }
        Command::Blr(a) => {
            let cfg = resolve(cli, Experiment::Blr2d, a)?;
            let out = run_blr2d(&cfg)?;
            println!(
                "beta_ols = [{:.4}, {:.4}]  radius = {:.4}  P_K(beta*) = [{:.4}, {:.4}]",
                out.beta_ols[0], out.beta_ols[1], out.radius, out.target[0], out.target[1]
            );
            for r in &out.runs {
                let m = &r.summary.mean;
                println!(
                    "{:<13} posterior mean = [{:.4}, {:.4}]  error = {:.4}  inside K = {:.3}",
                    r.run.topology.name(),
                    m[0],
                    m[1],
                    r.posterior_mean_error,
                    r.feasibility.fraction_inside
                );
            }
            if let Some(c) = &out.comparator {
                let m = &c.summary.mean;
                println!(
                    "{:<13} posterior mean = [{:.4}, {:.4}]  error = {:.4}  inside K = {:.3}",
                    c.name, m[0], m[1], c.posterior_mean_error, c.feasibility.fraction_inside
                );
            }
            report_out(&cfg);
        }
        Command::Logreg(a) => {
            let cfg = resolve(cli, Experiment::Logreg, a)?;
            let out = run_logreg(&cfg)?;
            println!(
                "MLE accuracy = {:.4} (iterations {}, converged {})  radius = {:.4}  train/eval = {}/{}",
                out.mle_accuracy,
                out.mle.iterations,
                out.mle.converged,
                out.radius,
                out.n_train,
                out.n_eval
            );
            for r in &out.runs {
                println!(
                    "{:<13} mean-chain accuracy = {:.4}  comparator = {}",
                    r.run.topology.name(),
                    r.final_accuracy,
                    r.final_comparator_accuracy
                        .map_or_else(|| "-".into(), |v| format!("{v:.4}"))
                );
            }
            report_out(&cfg);
        }
        Command::ValidateNetwork(a) => {
            let cfg = resolve(cli, Experiment::ValidateNetwork, a)?;
            print!("{}", validate_network(&cfg)?);
        }
    }
    Ok(())
}

fn report_out(cfg: &ExperimentConfig) {
    if let Some(out) = &cfg.out {
        println!("outputs written to {}", out.display());
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
