//! Diagnostics: 1-D Wasserstein distance to a reference quantile function,
//! consensus distance, feasibility, posterior summaries and classification
//! accuracy, plus the long-format trace they are written to.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;

use crate::constraints::ConvexSet;
use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::models::{sigmoid, DataSet};
use crate::samplers::NetworkState;

/// Piecewise-linear CDF on a sorted grid, inverted by linear interpolation.
#[derive(Debug, Clone)]
pub struct Quantile1D {
    grid: Vec<f64>,
    cdf: Vec<f64>,
}

impl Quantile1D {
    pub fn new(grid: Vec<f64>, cdf: Vec<f64>) -> Result<Self> {
        if grid.len() < 2 || grid.len() != cdf.len() {
            return Err(Error::invalid(
                "quantile table needs at least two matching points",
            ));
        }
        if grid.windows(2).any(|w| w[1] < w[0]) || cdf.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::invalid(
                "quantile grid and cdf must be nondecreasing",
            ));
        }
        if cdf[0] != 0.0 || cdf[cdf.len() - 1] != 1.0 {
            return Err(Error::invalid("cdf must run from 0 to 1"));
        }
        Ok(Self { grid, cdf })
    }

    /// Dirac mass at `b`.
    pub fn point_mass(b: f64) -> Self {
        Self {
            grid: vec![b, b],
            cdf: vec![0.0, 1.0],
        }
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn cdf(&self) -> &[f64] {
        &self.cdf
    }

    /// `Q(u)` for `u ∈ [0, 1]` (clamped).
    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let hi = self
            .cdf
            .partition_point(|&c| c < u)
            .clamp(1, self.cdf.len() - 1);
        let lo = hi - 1;
        let span = self.cdf[hi] - self.cdf[lo];
        if span <= 0.0 {
            return self.grid[hi];
        }
        let t = (u - self.cdf[lo]) / span;
        self.grid[lo] + t * (self.grid[hi] - self.grid[lo])
    }
}

/// Quantile function of the density `∝ e^{-f}` on `[lower, upper]` from a
/// trapezoid-rule CDF on `grid_size` uniform points.
pub fn true_quantile_1d<F: Fn(f64) -> f64>(
    f: F,
    lower: f64,
    upper: f64,
    grid_size: usize,
) -> Result<Quantile1D> {
    if !(upper > lower) {
        return Err(Error::invalid(format!(
            "need upper > lower, got [{lower}, {upper}]"
        )));
    }
    if grid_size < 1000 {
        return Err(Error::invalid(format!(
            "grid_size must be at least 1000, got {grid_size}"
        )));
    }
    let h = (upper - lower) / (grid_size - 1) as f64;
    let grid: Vec<f64> = (0..grid_size)
        .map(|i| {
            if i + 1 == grid_size {
                upper
            } else {
                lower + h * i as f64
            }
        })
        .collect();
    let potential: Vec<f64> = grid.iter().map(|&x| f(x)).collect();
    if let Some(i) = potential.iter().position(|v| !v.is_finite()) {
        return Err(Error::NumericFailure(format!(
            "potential is not finite at x = {}",
            grid[i]
        )));
    }
    let shift = potential.iter().copied().fold(f64::INFINITY, f64::min);
    let density: Vec<f64> = potential.iter().map(|v| (shift - v).exp()).collect();
    let mut cdf = Vec::with_capacity(grid_size);
    cdf.push(0.0);
    let mut acc = 0.0;
    for i in 1..grid_size {
        acc += 0.5 * (density[i] + density[i - 1]) * (grid[i] - grid[i - 1]);
        cdf.push(acc);
    }
    if !(acc > 0.0 && acc.is_finite()) {
        return Err(Error::NumericFailure("density integrates to zero".into()));
    }
    for c in cdf.iter_mut() {
        *c /= acc;
    }
    let last = cdf.len() - 1;
    cdf[last] = 1.0;
    Quantile1D::new(grid, cdf)
}

/// `sqrt((1/n) Σ_k (Q(u_k) − x_(k))²)` with `u_k = (k − 1/2)/n` and `x_(k)`
/// the sorted samples.
pub fn wasserstein2_1d(samples: &[f64], q: &Quantile1D) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::invalid("W2 needs at least one sample"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let sum: f64 = sorted
        .iter()
        .enumerate()
        .map(|(k, x)| {
            let u = (k as f64 + 0.5) / n;
            (q.quantile(u) - x).powi(2)
        })
        .sum();
    Ok((sum / n).sqrt())
}

/// W2 between two empirical measures with the same number of atoms.
pub fn wasserstein2_empirical(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || a.len() != b.len() {
        return Err(Error::invalid(
            "empirical W2 needs two non-empty samples of equal size",
        ));
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(f64::total_cmp);
    sb.sort_by(f64::total_cmp);
    let sum: f64 = sa.iter().zip(&sb).map(|(x, y)| (x - y).powi(2)).sum();
    Ok((sum / a.len() as f64).sqrt())
}

/// `(1/N) Σ_i ‖x_i − x̄‖²`.
pub fn consensus_distance(state: &NetworkState) -> f64 {
    let mean = state.mean();
    let n = state.n_agents();
    (0..n)
        .map(|i| {
            state
                .agent(i)
                .iter()
                .zip(&mean)
                .map(|(a, m)| (a - m) * (a - m))
                .sum::<f64>()
        })
        .sum::<f64>()
        / n as f64
}

/// Consensus distance averaged over replicas.
pub fn consensus_distance_bank(bank: &[NetworkState]) -> f64 {
    if bank.is_empty() {
        return 0.0;
    }
    bank.iter().map(consensus_distance).sum::<f64>() / bank.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feasibility {
    /// Fraction of samples within `1e-9` of `K`.
    pub fraction_inside: f64,
    pub mean_sq_distance: f64,
}

pub fn feasibility_stats<'a, I>(samples: I, set: &ConvexSet) -> Result<Feasibility>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut count = 0usize;
    let mut inside = 0usize;
    let mut sq = 0.0;
    for x in samples {
        let d = set.distance(x)?;
        if d <= 1e-9 {
            inside += 1;
        }
        sq += d * d;
        count += 1;
    }
    if count == 0 {
        return Err(Error::invalid("feasibility needs at least one sample"));
    }
    Ok(Feasibility {
        fraction_inside: inside as f64 / count as f64,
        mean_sq_distance: sq / count as f64,
    })
}

/// Fraction of rows where `1{σ(xᵀβ) ≥ 1/2}` equals the label.
pub fn classification_accuracy(beta: &[f64], data: &DataSet) -> Result<f64> {
    if beta.len() != data.p() {
        return Err(Error::invalid(format!(
            "dimension mismatch: beta has {} entries, data has {} features",
            beta.len(),
            data.p()
        )));
    }
    let correct = (0..data.n())
        .filter(|&i| {
            let predicted = if dot(data.row(i), beta) >= 0.0 {
                1.0
            } else {
                0.0
            };
            predicted == data.labels()[i]
        })
        .count();
    Ok(correct as f64 / data.n() as f64)
}

/// Accuracy of the sample-averaged predictive probability.
pub fn predictive_accuracy<'a, I>(betas: I, data: &DataSet) -> Result<f64>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut prob = vec![0.0; data.n()];
    let mut count = 0usize;
    for beta in betas {
        if beta.len() != data.p() {
            return Err(Error::invalid("dimension mismatch in predictive accuracy"));
        }
        for (i, p) in prob.iter_mut().enumerate() {
            *p += sigmoid(dot(data.row(i), beta));
        }
        count += 1;
    }
    if count == 0 {
        return Err(Error::invalid(
            "predictive accuracy needs at least one sample",
        ));
    }
    let correct = prob
        .iter()
        .zip(data.labels())
        .filter(|(p, y)| {
            let predicted = if **p / count as f64 >= 0.5 { 1.0 } else { 0.0 };
            predicted == **y
        })
        .count();
    Ok(correct as f64 / data.n() as f64)
}

#[derive(Debug, Clone)]
pub struct PosteriorSummary {
    pub mean: Vec<f64>,
    /// Unbiased sample covariance.
    pub covariance: Matrix,
    pub count: usize,
}

pub fn posterior_summary<'a, I>(samples: I) -> Result<PosteriorSummary>
where
    I: IntoIterator<Item = &'a [f64]>,
    I::IntoIter: Clone,
{
    let iter = samples.into_iter();
    let mut count = 0usize;
    let mut mean: Vec<f64> = Vec::new();
    for x in iter.clone() {
        if mean.is_empty() {
            mean = vec![0.0; x.len()];
        } else if x.len() != mean.len() {
            return Err(Error::invalid("samples have inconsistent dimensions"));
        }
        for (m, v) in mean.iter_mut().zip(x) {
            *m += v;
        }
        count += 1;
    }
    if count < 2 {
        return Err(Error::invalid(
            "posterior summary needs at least two samples",
        ));
    }
    mean.iter_mut().for_each(|m| *m /= count as f64);
    let d = mean.len();
    let mut cov = Matrix::zeros(d, d);
    for x in iter {
        for a in 0..d {
            let da = x[a] - mean[a];
            for b in a..d {
                cov[(a, b)] += da * (x[b] - mean[b]);
            }
        }
    }
    for a in 0..d {
        for b in a..d {
            let v = cov[(a, b)] / (count - 1) as f64;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    Ok(PosteriorSummary {
        mean,
        covariance: cov,
        count,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReplicaTag {
    Pooled,
    Index(usize),
}

impl fmt::Display for ReplicaTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReplicaTag::Pooled => f.write_str("pooled"),
            ReplicaTag::Index(i) => write!(f, "{i}"),
        }
    }
}

/// Which chain a trace row or sample describes.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum AgentTag {
    Agent(usize),
    Mean,
    /// A centralized comparator chain, labelled by sampler name.
    Central(&'static str),
}

impl fmt::Display for AgentTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AgentTag::Agent(i) => write!(f, "{i}"),
            AgentTag::Mean => f.write_str("mean"),
            AgentTag::Central(name) => f.write_str(name),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub replica: ReplicaTag,
    pub iter: usize,
    pub agent: AgentTag,
    pub metric: String,
    pub value: f64,
}

/// Long-format metric log written as `replica,iter,agent,metric,value`.
#[derive(Debug, Clone, Default)]
pub struct RunTrace {
    rows: Vec<TraceRow>,
    last_iter: HashMap<(ReplicaTag, AgentTag, String), usize>,
}

impl RunTrace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a row. Iterations must strictly increase within each
    /// (replica, agent, metric) series, which also rules out duplicate keys.
    pub fn push(
        &mut self,
        replica: ReplicaTag,
        iter: usize,
        agent: AgentTag,
        metric: &str,
        value: f64,
    ) -> Result<()> {
        let key = (replica, agent.clone(), metric.to_string());
        if let Some(&prev) = self.last_iter.get(&key) {
            if iter <= prev {
                return Err(Error::invalid(format!(
                    "trace series ({replica}, {agent}, {metric}) went from iteration {prev} to {iter}"
                )));
            }
        }
        self.last_iter.insert(key, iter);
        self.rows.push(TraceRow {
            replica,
            iter,
            agent,
            metric: metric.to_string(),
            value,
        });
        Ok(())
    }

    pub fn extend_from(&mut self, other: &RunTrace) -> Result<()> {
        for r in &other.rows {
            self.push(r.replica, r.iter, r.agent.clone(), &r.metric, r.value)?;
        }
        Ok(())
    }

    pub fn rows(&self) -> &[TraceRow] {
        &self.rows
    }

    /// `(iter, value)` pairs of one series in insertion order.
    pub fn series(&self, agent: &AgentTag, metric: &str) -> Vec<(usize, f64)> {
        self.rows
            .iter()
            .filter(|r| &r.agent == agent && r.metric == metric)
            .map(|r| (r.iter, r.value))
            .collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        out.write_all(b"replica,iter,agent,metric,value\n")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{}",
                r.replica, r.iter, r.agent, r.metric, r.value
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samplers::{stream_rng, StreamLane};

    fn state(agents: Vec<Vec<f64>>) -> NetworkState {
        let rngs = (0..agents.len())
            .map(|a| stream_rng(0, StreamLane::Auxiliary, 0, a))
            .collect();
        NetworkState::new(agents, rngs).unwrap()
    }

    #[test]
    fn uniform_quantile_is_linear() {
        let q = true_quantile_1d(|_| 0.0, -1.0, 1.0, 1001).unwrap();
        for u in [0.0, 0.1, 0.37, 0.5, 0.99, 1.0] {
            assert!((q.quantile(u) - (2.0 * u - 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetric_target_median_is_zero() {
        let q = true_quantile_1d(|x| x * x, -1.0, 1.0, 2001).unwrap();
        assert!(q.quantile(0.5).abs() < 1e-12);
    }

    #[test]
    fn quantile_inputs_are_validated() {
        assert!(true_quantile_1d(|_| 0.0, 1.0, 1.0, 1000).is_err());
        assert!(true_quantile_1d(|_| 0.0, 0.0, 1.0, 999).is_err());
        assert!(matches!(
            true_quantile_1d(|x| if x > 0.5 { f64::NAN } else { 0.0 }, 0.0, 1.0, 1000),
            Err(Error::NumericFailure(_))
        ));
    }

    #[test]
    fn w2_of_exact_quantiles_is_zero() {
        let q = true_quantile_1d(|x| x * x / 2.0, -1.0, 1.0, 5001).unwrap();
        let n = 257;
        let samples: Vec<f64> = (0..n)
            .map(|k| q.quantile((k as f64 + 0.5) / n as f64))
            .rev()
            .collect();
        assert!(wasserstein2_1d(&samples, &q).unwrap() < 1e-15);
    }

    #[test]
    fn w2_point_masses() {
        let q = Quantile1D::point_mass(0.75);
        assert!((wasserstein2_1d(&[-0.5; 10], &q).unwrap() - 1.25).abs() < 1e-15);
        assert!(wasserstein2_1d(&[], &q).is_err());
    }

    #[test]
    fn consensus_examples() {
        assert_eq!(consensus_distance(&state(vec![vec![1.5, -2.0]; 4])), 0.0);
        assert_eq!(consensus_distance(&state(vec![vec![0.0], vec![2.0]])), 1.0);
    }

    #[test]
    fn feasibility_examples() {
        let set = ConvexSet::interval_box(vec![-1.0], vec![1.0]).unwrap();
        let inside = [[0.1], [-0.9], [1.0]];
        let f = feasibility_stats(inside.iter().map(|x| &x[..]), &set).unwrap();
        assert_eq!(
            f,
            Feasibility {
                fraction_inside: 1.0,
                mean_sq_distance: 0.0
            }
        );
        let f = feasibility_stats([&[3.0][..]], &set).unwrap();
        assert_eq!(
            f,
            Feasibility {
                fraction_inside: 0.0,
                mean_sq_distance: 4.0
            }
        );
    }

    #[test]
    fn accuracy_examples() {
        let data = DataSet::new(
            Matrix::from_rows(&[
                vec![1.0, 0.0],
                vec![2.0, 1.0],
                vec![-1.0, 0.5],
                vec![-3.0, -1.0],
            ])
            .unwrap(),
            vec![1.0, 1.0, 0.0, 0.0],
        )
        .unwrap();
        assert_eq!(classification_accuracy(&[1.0, 0.0], &data).unwrap(), 1.0);
        assert_eq!(classification_accuracy(&[-1.0, 0.0], &data).unwrap(), 0.0);
        // β = 0 ties go to class 1.
        assert_eq!(classification_accuracy(&[0.0, 0.0], &data).unwrap(), 0.5);
        assert!(classification_accuracy(&[1.0], &data).is_err());
        let pa = predictive_accuracy([&[1.0, 0.0][..], &[2.0, 0.0][..]], &data).unwrap();
        assert_eq!(pa, 1.0);
    }

    #[test]
    fn summary_examples() {
        let s = posterior_summary([&[1.0, 2.0][..], &[3.0, -2.0][..]]).unwrap();
        assert_eq!(s.mean, vec![2.0, 0.0]);
        assert_eq!(s.covariance[(0, 1)], -4.0);
        let c = posterior_summary([&[0.5][..]; 5]).unwrap();
        assert_eq!(c.covariance[(0, 0)], 0.0);
        assert!(posterior_summary([&[0.5][..]]).is_err());
    }

    #[test]
    fn trace_rejects_out_of_order_series() {
        let mut t = RunTrace::new();
        t.push(ReplicaTag::Pooled, 1, AgentTag::Mean, "w2", 0.5)
            .unwrap();
        t.push(ReplicaTag::Pooled, 1, AgentTag::Agent(0), "w2", 0.5)
            .unwrap();
        t.push(ReplicaTag::Pooled, 2, AgentTag::Mean, "w2", 0.4)
            .unwrap();
        assert!(t
            .push(ReplicaTag::Pooled, 2, AgentTag::Mean, "w2", 0.4)
            .is_err());
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "replica,iter,agent,metric,value\npooled,1,mean,w2,0.5\npooled,1,0,w2,0.5\npooled,2,mean,w2,0.4\n"
        );
    }
}
