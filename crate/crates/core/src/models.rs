//! Target potentials `f = Σ_i f_i` sharded over agents, together with the
//! data pipelines that feed them.
//!
//! Every potential exposes the per-agent value and gradient, unbiased
//! minibatch gradients, and (when known) the strong-convexity and
//! smoothness constants `(μ, L)` of the components.

use std::ops::Range;
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{cholesky_solve, dot, norm2, symmetric_eigen, Matrix};

/// Rows and columns of the Breast Cancer Wisconsin (Diagnostic) table.
pub const WDBC_ROWS: usize = 569;
pub const WDBC_FEATURES: usize = 30;

/// Feature matrix with one real label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSet {
    features: Matrix,
    labels: Vec<f64>,
}

impl DataSet {
    pub fn new(features: Matrix, labels: Vec<f64>) -> Result<Self> {
        if features.rows() == 0 {
            return Err(Error::DataValidation("dataset has no rows".into()));
        }
        if features.rows() != labels.len() {
            return Err(Error::DataValidation(format!(
                "{} feature rows but {} labels",
                features.rows(),
                labels.len()
            )));
        }
        if features
            .as_slice()
            .iter()
            .chain(&labels)
            .any(|v| !v.is_finite())
        {
            return Err(Error::DataValidation(
                "dataset contains non-finite values".into(),
            ));
        }
        Ok(Self { features, labels })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn p(&self) -> usize {
        self.features.cols()
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.features.row(i)
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn is_binary(&self) -> bool {
        self.labels.iter().all(|&y| y == 0.0 || y == 1.0)
    }

    /// Rescales every column to zero mean and unit (population) variance.
    /// Constant columns are only centred.
    pub fn standardize(&mut self) {
        let (n, p) = (self.n(), self.p());
        for j in 0..p {
            let mean = (0..n).map(|i| self.features[(i, j)]).sum::<f64>() / n as f64;
            let var = (0..n)
                .map(|i| (self.features[(i, j)] - mean).powi(2))
                .sum::<f64>()
                / n as f64;
            let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
            for i in 0..n {
                self.features[(i, j)] = (self.features[(i, j)] - mean) / sd;
            }
        }
    }

    /// New dataset made of the given rows, in the given order.
    pub fn select(&self, rows: &[usize]) -> Result<Self> {
        let p = self.p();
        let mut data = Vec::with_capacity(rows.len() * p);
        let mut labels = Vec::with_capacity(rows.len());
        for &i in rows {
            data.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Self::new(Matrix::from_vec(rows.len(), p, data)?, labels)
    }

    pub fn gram(&self, rows: Range<usize>) -> Matrix {
        let p = self.p();
        let mut g = Matrix::zeros(p, p);
        for i in rows {
            let x = self.row(i);
            for a in 0..p {
                for b in a..p {
                    g[(a, b)] += x[a] * x[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                g[(a, b)] = g[(b, a)];
            }
        }
        g
    }
}

/// Contiguous near-equal blocks, agent 0 first. Shard sizes differ by at most
/// one; a warning is logged when `n` is not a multiple of `n_agents`.
pub fn contiguous_shards(n: usize, n_agents: usize) -> Result<Vec<Range<usize>>> {
    if n_agents == 0 {
        return Err(Error::invalid("need at least one agent"));
    }
    if n < n_agents {
        return Err(Error::invalid(format!(
            "{n} data points cannot fill {n_agents} shards (empty shard)"
        )));
    }
    let base = n / n_agents;
    let extra = n % n_agents;
    if extra != 0 {
        log::warn!(
            "{n} data points are not divisible by {n_agents} agents; the first {extra} shards get one extra point"
        );
    }
    let mut shards = Vec::with_capacity(n_agents);
    let mut start = 0;
    for i in 0..n_agents {
        let len = base + usize::from(i < extra);
        shards.push(start..start + len);
        start += len;
    }
    Ok(shards)
}

#[derive(Debug, Clone)]
enum Kind {
    /// `f(x) = x²/2 + x⁴/8 - x`, split evenly as `f_i = f/N`.
    Quartic1d,
    /// `f_i(x) = (1/2N) Σ_k prec_k (x_k - c_{i,k})²`.
    Quadratic {
        centers: Vec<Vec<f64>>,
        precision: Vec<f64>,
    },
    /// Gaussian likelihood `(1/2σ²) Σ (y_j - βᵀx_j)²`.
    LeastSquares { data: Arc<DataSet>, noise_var: f64 },
    /// Bernoulli likelihood `Σ log(1 + e^{x_jᵀβ}) - y_j x_jᵀβ`.
    Logistic { data: Arc<DataSet> },
}

/// A sharded objective `f = Σ_i f_i`.
#[derive(Debug, Clone)]
pub struct Potential {
    dim: usize,
    n_agents: usize,
    kind: Kind,
    shards: Vec<Range<usize>>,
    mu: Option<f64>,
    l_smooth: Option<f64>,
    noise_sigma2: Option<f64>,
}

pub fn quartic_1d(n_agents: usize) -> Result<Potential> {
    if n_agents == 0 {
        return Err(Error::invalid("need at least one agent"));
    }
    Ok(Potential {
        dim: 1,
        n_agents,
        kind: Kind::Quartic1d,
        shards: Vec::new(),
        mu: None,
        l_smooth: None,
        noise_sigma2: Some(0.0),
    })
}

/// Heterogeneous Gaussian shards whose sum is a Gaussian with mean equal to
/// the average of `centers` and precision `precision` (diagonal).
pub fn quadratic(centers: Vec<Vec<f64>>, precision: Vec<f64>) -> Result<Potential> {
    let n_agents = centers.len();
    let dim = precision.len();
    if n_agents == 0 || dim == 0 {
        return Err(Error::invalid(
            "quadratic potential needs agents and a dimension",
        ));
    }
    if centers.iter().any(|c| c.len() != dim) {
        return Err(Error::invalid(
            "every center must match the precision dimension",
        ));
    }
    if precision.iter().any(|p| !(*p > 0.0)) {
        return Err(Error::invalid("precisions must be positive"));
    }
    let n = n_agents as f64;
    let lo = precision.iter().copied().fold(f64::INFINITY, f64::min) / n;
    let hi = precision.iter().copied().fold(0.0, f64::max) / n;
    Ok(Potential {
        dim,
        n_agents,
        kind: Kind::Quadratic { centers, precision },
        shards: Vec::new(),
        mu: Some(lo),
        l_smooth: Some(hi),
        noise_sigma2: Some(0.0),
    })
}

/// Least-squares potential with shard constants from the shard Gram matrices.
pub fn linreg_potential(data: Arc<DataSet>, n_agents: usize, noise_var: f64) -> Result<Potential> {
    if !(noise_var > 0.0) {
        return Err(Error::invalid(format!(
            "noise variance must be positive, got {noise_var}"
        )));
    }
    let shards = contiguous_shards(data.n(), n_agents)?;
    let mut mu = f64::INFINITY;
    let mut l = 0.0f64;
    for s in &shards {
        let eig = symmetric_eigen(&data.gram(s.clone()))?;
        l = l.max(eig.values[0] / noise_var);
        mu = mu.min(eig.values[eig.values.len() - 1] / noise_var);
    }
    Ok(Potential {
        dim: data.p(),
        n_agents,
        kind: Kind::LeastSquares { data, noise_var },
        shards,
        mu: (mu > 0.0).then_some(mu),
        l_smooth: Some(l),
        noise_sigma2: None,
    })
}

/// Logistic-regression potential; not strongly convex, so `mu` stays unset.
pub fn logreg_potential(data: Arc<DataSet>, n_agents: usize) -> Result<Potential> {
    if !data.is_binary() {
        return Err(Error::invalid("logistic regression labels must be 0 or 1"));
    }
    let shards = contiguous_shards(data.n(), n_agents)?;
    let eig = symmetric_eigen(&data.gram(0..data.n()))?;
    Ok(Potential {
        dim: data.p(),
        n_agents,
        kind: Kind::Logistic { data },
        shards,
        mu: None,
        l_smooth: Some(eig.values[0] / 4.0),
        noise_sigma2: None,
    })
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

impl Potential {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn mu(&self) -> Option<f64> {
        self.mu
    }

    pub fn l_smooth(&self) -> Option<f64> {
        self.l_smooth
    }

    pub fn noise_sigma2(&self) -> Option<f64> {
        self.noise_sigma2
    }

    pub fn with_noise_sigma2(mut self, sigma2: f64) -> Self {
        self.noise_sigma2 = Some(sigma2);
        self
    }

    pub fn data(&self) -> Option<&Arc<DataSet>> {
        match &self.kind {
            Kind::LeastSquares { data, .. } | Kind::Logistic { data } => Some(data),
            _ => None,
        }
    }

    /// Rows owned by `agent`; `None` for data-free potentials.
    pub fn shard(&self, agent: usize) -> Option<Range<usize>> {
        self.data().map(|_| self.shards[agent].clone())
    }

    pub fn shard_len(&self, agent: usize) -> Option<usize> {
        self.shard(agent).map(|r| r.len())
    }

    fn check(&self, agent: usize, x: &[f64]) -> Result<()> {
        if agent >= self.n_agents {
            return Err(Error::invalid(format!(
                "agent {agent} out of range (N = {})",
                self.n_agents
            )));
        }
        if x.len() != self.dim {
            return Err(Error::invalid(format!(
                "dimension mismatch: point has {} coordinates, potential has {}",
                x.len(),
                self.dim
            )));
        }
        Ok(())
    }

    /// `f_i(x)`.
    pub fn value(&self, agent: usize, x: &[f64]) -> Result<f64> {
        self.check(agent, x)?;
        Ok(match &self.kind {
            Kind::Quartic1d => quartic_value(x[0]) / self.n_agents as f64,
            Kind::Quadratic { centers, precision } => {
                quadratic_value(&centers[agent], precision, x) / self.n_agents as f64
            }
            _ => self.range_value(self.shards[agent].clone(), x),
        })
    }

    /// `f(x) = Σ_i f_i(x)`, evaluated directly on the whole data.
    pub fn total_value(&self, x: &[f64]) -> Result<f64> {
        self.check(0, x)?;
        Ok(match &self.kind {
            Kind::Quartic1d => quartic_value(x[0]),
            Kind::Quadratic { centers, precision } => {
                centers
                    .iter()
                    .map(|c| quadratic_value(c, precision, x))
                    .sum::<f64>()
                    / self.n_agents as f64
            }
            Kind::LeastSquares { data, .. } | Kind::Logistic { data } => {
                self.range_value(0..data.n(), x)
            }
        })
    }

    pub fn gradient(&self, agent: usize, x: &[f64]) -> Result<Vec<f64>> {
        self.check(agent, x)?;
        let mut out = vec![0.0; self.dim];
        self.gradient_into(agent, x, &mut out);
        Ok(out)
    }

    pub fn total_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(0, x)?;
        let mut out = vec![0.0; self.dim];
        self.total_gradient_into(x, &mut out);
        Ok(out)
    }

    /// Unchecked `∇f_i(x)` into `out`.
    pub fn gradient_into(&self, agent: usize, x: &[f64], out: &mut [f64]) {
        match &self.kind {
            Kind::Quartic1d => out[0] = quartic_grad(x[0]) / self.n_agents as f64,
            Kind::Quadratic { centers, precision } => {
                let n = self.n_agents as f64;
                for k in 0..self.dim {
                    out[k] = precision[k] * (x[k] - centers[agent][k]) / n;
                }
            }
            _ => {
                out.fill(0.0);
                for j in self.shards[agent].clone() {
                    self.add_point_gradient(j, x, 1.0, out);
                }
            }
        }
    }

    /// Unchecked `∇f(x)` into `out`.
    pub fn total_gradient_into(&self, x: &[f64], out: &mut [f64]) {
        match &self.kind {
            Kind::Quartic1d => out[0] = quartic_grad(x[0]),
            Kind::Quadratic { centers, precision } => {
                let n = self.n_agents as f64;
                for k in 0..self.dim {
                    let cbar = centers.iter().map(|c| c[k]).sum::<f64>() / n;
                    out[k] = precision[k] * (x[k] - cbar);
                }
            }
            Kind::LeastSquares { data, .. } | Kind::Logistic { data } => {
                out.fill(0.0);
                for j in 0..data.n() {
                    self.add_point_gradient(j, x, 1.0, out);
                }
            }
        }
    }

    /// Unbiased minibatch estimate of `∇f_i(x)`: a uniform sample of `batch`
    /// shard rows without replacement, rescaled by `n_i / batch`. A full batch
    /// returns the exact gradient without touching the RNG.
    pub fn stochastic_gradient<R: Rng + ?Sized>(
        &self,
        agent: usize,
        x: &[f64],
        batch: usize,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        self.check(agent, x)?;
        self.check_batch(self.shard_len(agent), batch)?;
        let mut out = vec![0.0; self.dim];
        self.stochastic_gradient_into(agent, x, batch, rng, &mut out);
        Ok(out)
    }

    pub fn stochastic_gradient_into<R: Rng + ?Sized>(
        &self,
        agent: usize,
        x: &[f64],
        batch: usize,
        rng: &mut R,
        out: &mut [f64],
    ) {
        match self.shard(agent) {
            Some(range) if batch < range.len() => self.minibatch_into(range, x, batch, rng, out),
            _ => self.gradient_into(agent, x, out),
        }
    }

    /// Minibatch estimate of the full-data gradient `∇f(x)`, drawing `batch`
    /// rows from the whole dataset.
    pub fn stochastic_total_gradient<R: Rng + ?Sized>(
        &self,
        x: &[f64],
        batch: usize,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        self.check(0, x)?;
        self.check_batch(self.data().map(|d| d.n()), batch)?;
        let mut out = vec![0.0; self.dim];
        self.stochastic_total_gradient_into(x, batch, rng, &mut out);
        Ok(out)
    }

    pub fn stochastic_total_gradient_into<R: Rng + ?Sized>(
        &self,
        x: &[f64],
        batch: usize,
        rng: &mut R,
        out: &mut [f64],
    ) {
        match self.data().map(|d| d.n()) {
            Some(n) if batch < n => self.minibatch_into(0..n, x, batch, rng, out),
            _ => self.total_gradient_into(x, out),
        }
    }

    fn check_batch(&self, len: Option<usize>, batch: usize) -> Result<()> {
        if batch == 0 {
            return Err(Error::invalid("batch size must be positive"));
        }
        if let Some(n) = len {
            if batch > n {
                return Err(Error::invalid(format!(
                    "batch size {batch} exceeds the {n} available rows"
                )));
            }
        }
        Ok(())
    }

    fn minibatch_into<R: Rng + ?Sized>(
        &self,
        range: Range<usize>,
        x: &[f64],
        batch: usize,
        rng: &mut R,
        out: &mut [f64],
    ) {
        let len = range.len();
        let scale = len as f64 / batch as f64;
        out.fill(0.0);
        for idx in rand::seq::index::sample(rng, len, batch) {
            self.add_point_gradient(range.start + idx, x, 1.0, out);
        }
        for o in out.iter_mut() {
            *o *= scale;
        }
    }

    /// Adds `scale · ∇ℓ_j(x)` for data row `j`.
    fn add_point_gradient(&self, j: usize, x: &[f64], scale: f64, out: &mut [f64]) {
        match &self.kind {
            Kind::LeastSquares { data, noise_var } => {
                let row = data.row(j);
                let r = scale * (dot(row, x) - data.labels()[j]) / noise_var;
                for (o, a) in out.iter_mut().zip(row) {
                    *o += r * a;
                }
            }
            Kind::Logistic { data } => {
                let row = data.row(j);
                let r = scale * (sigmoid(dot(row, x)) - data.labels()[j]);
                for (o, a) in out.iter_mut().zip(row) {
                    *o += r * a;
                }
            }
            _ => unreachable!("data-free potentials have no per-point terms"),
        }
    }

    fn range_value(&self, range: Range<usize>, x: &[f64]) -> f64 {
        match &self.kind {
            Kind::LeastSquares { data, noise_var } => {
                range
                    .map(|j| (data.labels()[j] - dot(data.row(j), x)).powi(2))
                    .sum::<f64>()
                    / (2.0 * noise_var)
            }
            Kind::Logistic { data } => range
                .map(|j| {
                    let z = dot(data.row(j), x);
                    softplus(z) - data.labels()[j] * z
                })
                .sum(),
            _ => unreachable!("data-free potentials have no per-point terms"),
        }
    }

    /// Monte-Carlo estimate of `max_i E‖∇̃f_i(x) - ∇f_i(x)‖²` at `x`.
    pub fn estimate_noise_sigma2<R: Rng + ?Sized>(
        &self,
        x: &[f64],
        batch: usize,
        draws: usize,
        rng: &mut R,
    ) -> Result<f64> {
        self.check(0, x)?;
        if self.data().is_none() {
            return Ok(0.0);
        }
        let mut worst = 0.0f64;
        let mut g = vec![0.0; self.dim];
        for agent in 0..self.n_agents {
            self.check_batch(self.shard_len(agent), batch)?;
            let exact = self.gradient(agent, x)?;
            let mut acc = 0.0;
            for _ in 0..draws {
                self.stochastic_gradient_into(agent, x, batch, rng, &mut g);
                acc += g
                    .iter()
                    .zip(&exact)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>();
            }
            worst = worst.max(acc / draws.max(1) as f64);
        }
        Ok(worst)
    }
}

fn quartic_value(x: f64) -> f64 {
    x * x / 2.0 + x.powi(4) / 8.0 - x
}

fn quartic_grad(x: f64) -> f64 {
    x + x.powi(3) / 2.0 - 1.0
}

fn quadratic_value(center: &[f64], precision: &[f64], x: &[f64]) -> f64 {
    0.5 * precision
        .iter()
        .zip(center.iter().zip(x))
        .map(|(p, (c, v))| p * (v - c) * (v - c))
        .sum::<f64>()
}

/// Synthetic regression data `y = x₁ + x₂ + ε`, `x ~ N(0, I₂)`, `ε ~ N(0, 0.25)`.
pub fn generate_blr_data(n: usize, seed: u64) -> Result<DataSet> {
    if n == 0 {
        return Err(Error::invalid("need at least one observation"));
    }
    const TRUE_BETA: [f64; 2] = [1.0, 1.0];
    const NOISE_SD: f64 = 0.5;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let x1: f64 = StandardNormal.sample(&mut rng);
        let x2: f64 = StandardNormal.sample(&mut rng);
        let eps: f64 = StandardNormal.sample(&mut rng);
        features.extend_from_slice(&[x1, x2]);
        labels.push(TRUE_BETA[0] * x1 + TRUE_BETA[1] * x2 + NOISE_SD * eps);
    }
    DataSet::new(Matrix::from_vec(n, 2, features)?, labels)
}

/// Ordinary least squares via the normal equations.
pub fn fit_ols(data: &DataSet) -> Result<Vec<f64>> {
    let gram = data.gram(0..data.n());
    let eig = symmetric_eigen(&gram)?;
    let (hi, lo) = (eig.values[0], eig.values[eig.values.len() - 1]);
    let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(cond < 1e12) {
        return Err(Error::NumericFailure(format!(
            "Gram matrix is singular (condition estimate {cond:e})"
        )));
    }
    let p = data.p();
    let mut xty = vec![0.0; p];
    for i in 0..data.n() {
        let y = data.labels()[i];
        for (acc, a) in xty.iter_mut().zip(data.row(i)) {
            *acc += a * y;
        }
    }
    cholesky_solve(&gram, &xty).map_err(|e| match e {
        Error::NumericFailure(m) => {
            Error::NumericFailure(format!("{m} (condition estimate {cond:e})"))
        }
        other => other,
    })
}

#[derive(Debug, Clone)]
pub struct MleFit {
    pub beta: Vec<f64>,
    pub iterations: usize,
    pub grad_norm: f64,
    pub converged: bool,
}

pub const MLE_GRAD_TOL: f64 = 1e-6;
pub const MLE_MAX_ITERS: usize = 100_000;

/// Unconstrained logistic maximum likelihood by gradient descent with
/// Armijo backtracking. Stops at `‖∇‖ ≤ 1e-6` or after `1e5` iterations.
pub fn fit_logreg_mle(data: &DataSet) -> Result<MleFit> {
    if !data.is_binary() {
        return Err(Error::invalid("logistic regression labels must be 0 or 1"));
    }
    let nll = logreg_potential(Arc::new(data.clone()), 1)?;
    let p = data.p();
    let mut beta = vec![0.0; p];
    let mut grad = vec![0.0; p];
    let mut trial = vec![0.0; p];
    let mut step = 1.0;
    let mut value = nll.range_value(0..data.n(), &beta);
    nll.total_gradient_into(&beta, &mut grad);
    let mut gnorm = norm2(&grad);
    let mut iterations = 0;
    while gnorm > MLE_GRAD_TOL && iterations < MLE_MAX_ITERS {
        let mut t = step;
        loop {
            for k in 0..p {
                trial[k] = beta[k] - t * grad[k];
            }
            let v = nll.range_value(0..data.n(), &trial);
            if v <= value - 0.5 * t * gnorm * gnorm {
                value = v;
                break;
            }
            t *= 0.5;
            if t < 1e-300 {
                return Err(Error::NumericFailure(
                    "logistic MLE line search collapsed".into(),
                ));
            }
        }
        std::mem::swap(&mut beta, &mut trial);
        step = t * 2.0;
        nll.total_gradient_into(&beta, &mut grad);
        gnorm = norm2(&grad);
        iterations += 1;
    }
    let converged = gnorm <= MLE_GRAD_TOL;
    if !converged {
        log::warn!(
            "logistic MLE stopped at the {MLE_MAX_ITERS}-iteration cap with gradient norm {gnorm:e} (nearly separable data)"
        );
    }
    Ok(MleFit {
        beta,
        iterations,
        grad_norm: gnorm,
        converged,
    })
}

#[derive(Debug, Clone)]
pub struct WdbcData {
    pub data: DataSet,
    pub malignant: usize,
    pub benign: usize,
    pub standardized: bool,
}

impl WdbcData {
    pub fn report(&self) -> String {
        format!(
            "wdbc: n={} p={} malignant(1)={} benign(0)={} standardized={}",
            self.data.n(),
            self.data.p(),
            self.malignant,
            self.benign,
            self.standardized
        )
    }
}

/// Reads the comma-separated diagnostic file: `id, M|B, 30 features`.
/// Malignant rows are labelled 1.
pub fn load_wdbc(path: &Path, standardize: bool) -> Result<WdbcData> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_wdbc(&text, path, standardize)
}

pub fn parse_wdbc(text: &str, path: &Path, standardize: bool) -> Result<WdbcData> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut features = Vec::with_capacity(WDBC_ROWS * WDBC_FEATURES);
    let mut labels = Vec::with_capacity(WDBC_ROWS);
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != WDBC_FEATURES + 2 {
            return Err(Error::DataValidation(format!(
                "line {lineno}: expected id, diagnosis and {WDBC_FEATURES} features, found {} features",
                fields.len().saturating_sub(2)
            )));
        }
        let label = match fields[1] {
            "M" => 1.0,
            "B" => 0.0,
            other => {
                return Err(parse_err(
                    lineno,
                    format!("diagnosis must be M or B, got '{other}'"),
                ))
            }
        };
        for (k, f) in fields[2..].iter().enumerate() {
            let v: f64 = f
                .parse()
                .map_err(|_| parse_err(lineno, format!("feature {k}: cannot parse '{f}'")))?;
            if !v.is_finite() {
                return Err(parse_err(lineno, format!("feature {k}: non-finite value")));
            }
            features.push(v);
        }
        labels.push(label);
    }
    if labels.len() != WDBC_ROWS {
        return Err(Error::DataValidation(format!(
            "expected {WDBC_ROWS} rows x {WDBC_FEATURES} features, found {} rows",
            labels.len()
        )));
    }
    let malignant = labels.iter().filter(|&&y| y == 1.0).count();
    let mut data = DataSet::new(
        Matrix::from_vec(labels.len(), WDBC_FEATURES, features)?,
        labels,
    )?;
    if standardize {
        data.standardize();
    }
    Ok(WdbcData {
        malignant,
        benign: WDBC_ROWS - malignant,
        data,
        standardized: standardize,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dataset(rows: &[Vec<f64>], labels: Vec<f64>) -> Arc<DataSet> {
        Arc::new(DataSet::new(Matrix::from_rows(rows).unwrap(), labels).unwrap())
    }

    #[test]
    fn quartic_values() {
        let p = quartic_1d(1).unwrap();
        assert_eq!(p.total_value(&[0.0]).unwrap(), 0.0);
        assert_eq!(p.total_value(&[1.0]).unwrap(), -0.375);
        assert_eq!(p.total_gradient(&[1.0]).unwrap(), vec![0.5]);
        let p4 = quartic_1d(4).unwrap();
        assert_eq!(p4.gradient(2, &[1.0]).unwrap(), vec![0.125]);
    }

    #[test]
    fn linreg_single_point_gradient() {
        let data = dataset(&[vec![1.0, 0.0]], vec![1.0]);
        let p = linreg_potential(data, 1, 0.25).unwrap();
        assert_eq!(p.gradient(0, &[0.0, 0.0]).unwrap(), vec![-4.0, 0.0]);
    }

    #[test]
    fn ols_recovers_noiseless_coefficients() {
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|i| vec![(i as f64 * 0.3).sin(), (i as f64 * 0.7).cos(), 1.0])
            .collect();
        let beta = [0.5, -2.0, 3.0];
        let y = rows.iter().map(|r| dot(r, &beta)).collect();
        let fit = fit_ols(&DataSet::new(Matrix::from_rows(&rows).unwrap(), y).unwrap()).unwrap();
        for k in 0..3 {
            assert!((fit[k] - beta[k]).abs() < 1e-8);
        }
    }

    #[test]
    fn ols_gradient_vanishes_at_solution() {
        let data = Arc::new(generate_blr_data(500, 9).unwrap());
        let beta = fit_ols(&data).unwrap();
        let p = linreg_potential(data, 5, 0.25).unwrap();
        let g = p.total_gradient(&beta).unwrap();
        assert!(norm2(&g) < 1e-8, "{g:?}");
    }

    #[test]
    fn ols_reports_singular_design() {
        let data = DataSet::new(
            Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0], vec![3.0, 6.0]]).unwrap(),
            vec![1.0, 2.0, 3.0],
        )
        .unwrap();
        let err = fit_ols(&data).unwrap_err();
        assert!(
            matches!(err, Error::NumericFailure(ref m) if m.contains("condition")),
            "{err}"
        );
    }

    #[test]
    fn logistic_value_and_gradient_at_origin() {
        let data = dataset(
            &[
                vec![1.0, 2.0],
                vec![-1.0, -2.0],
                vec![0.5, -1.0],
                vec![-0.5, 1.0],
            ],
            vec![1.0, 0.0, 1.0, 0.0],
        );
        let p = logreg_potential(data.clone(), 1).unwrap();
        let v = p.total_value(&[0.0, 0.0]).unwrap();
        assert!((v - 4.0 * 2f64.ln()).abs() < 1e-14);
        // ΣX = 0, so ∇ = ΣX/2 - ΣX·y = -(x₀ + x₂)
        let g = p.total_gradient(&[0.0, 0.0]).unwrap();
        assert!((g[0] + 1.5).abs() < 1e-15 && (g[1] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn logistic_rejects_non_binary_labels() {
        let data = dataset(&[vec![1.0], vec![2.0]], vec![0.0, 2.0]);
        assert!(matches!(
            logreg_potential(data, 1),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn mle_converges_on_overlapping_classes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for _ in 0..200 {
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            let label = if rng.random::<f64>() < sigmoid(0.8 * a - 0.5 * b) {
                1.0
            } else {
                0.0
            };
            rows.push(vec![a, b]);
            y.push(label);
        }
        let data = DataSet::new(Matrix::from_rows(&rows).unwrap(), y).unwrap();
        let fit = fit_logreg_mle(&data).unwrap();
        assert!(fit.converged);
        assert!(fit.grad_norm <= MLE_GRAD_TOL);
    }

    #[test]
    fn batch_bounds_are_checked() {
        let data = Arc::new(generate_blr_data(40, 1).unwrap());
        let p = linreg_potential(data, 4, 0.25).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(p.stochastic_gradient(0, &[0.0, 0.0], 0, &mut rng).is_err());
        assert!(p.stochastic_gradient(0, &[0.0, 0.0], 11, &mut rng).is_err());
        let full = p
            .stochastic_gradient(1, &[0.3, -0.2], 10, &mut rng)
            .unwrap();
        assert_eq!(full, p.gradient(1, &[0.3, -0.2]).unwrap());
    }

    #[test]
    fn shards_are_contiguous_and_cover_everything() {
        let s = contiguous_shards(569, 5).unwrap();
        assert_eq!(
            s.iter().map(|r| r.len()).collect::<Vec<_>>(),
            vec![114, 114, 114, 114, 113]
        );
        assert_eq!(s[0].start, 0);
        assert_eq!(s[4].end, 569);
        assert!(s.windows(2).all(|w| w[0].end == w[1].start));
        assert!(contiguous_shards(3, 4).is_err());
    }

    #[test]
    fn blr_generation_is_deterministic() {
        assert_eq!(
            generate_blr_data(100, 7).unwrap(),
            generate_blr_data(100, 7).unwrap()
        );
        assert_ne!(
            generate_blr_data(100, 7).unwrap(),
            generate_blr_data(100, 8).unwrap()
        );
    }

    #[test]
    fn wdbc_parse_errors() {
        let path = Path::new("inline.csv");
        let row = |id: usize, diag: &str| {
            let feats: Vec<String> = (0..30)
                .map(|k| format!("{}", k as f64 + id as f64))
                .collect();
            format!("{id},{diag},{}", feats.join(","))
        };
        let short: String = (0..10).map(|i| row(i, "B") + "\n").collect();
        assert!(matches!(
            parse_wdbc(&short, path, true),
            Err(Error::DataValidation(_))
        ));

        let bad_diag = format!("{}\n{}\n", row(1, "B"), row(2, "X"));
        match parse_wdbc(&bad_diag, path, true) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }

        let bad_value = format!("{}\n3,M,abc{}\n", row(1, "B"), ",1.0".repeat(29));
        match parse_wdbc(&bad_value, path, true) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 2);
                assert!(message.contains("abc"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }

        let narrow = "1,M,1.0,2.0\n";
        assert!(matches!(
            parse_wdbc(narrow, path, true),
            Err(Error::DataValidation(_))
        ));
    }
}
