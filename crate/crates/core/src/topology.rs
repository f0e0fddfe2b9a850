//! Communication graphs and the gossip mixing matrices built from them.
//!
//! A mixing matrix is `W = I - δL` with `L` the graph Laplacian. For
//! `0 < δ < 2/λ_max(L)` and a connected graph, `W` is symmetric, doubly
//! stochastic, and contracts the disagreement subspace by the factor
//! `ρ = max(|λ₂|, |λ_N|) < 1`.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigen, Matrix};

/// Tolerance used by every structural check on `W`.
pub const STRUCTURE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GraphKind {
    Complete,
    Ring,
    Star,
    Disconnected,
}

impl GraphKind {
    pub const ALL: [GraphKind; 4] = [
        GraphKind::Complete,
        GraphKind::Ring,
        GraphKind::Star,
        GraphKind::Disconnected,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GraphKind::Complete => "complete",
            GraphKind::Ring => "ring",
            GraphKind::Star => "star",
            GraphKind::Disconnected => "disconnected",
        }
    }

    /// Smallest agent count the kind is defined for.
    pub fn min_agents(self) -> usize {
        match self {
            GraphKind::Ring => 3,
            _ => 2,
        }
    }

    pub fn is_connected(self) -> bool {
        self != GraphKind::Disconnected
    }
}

impl fmt::Display for GraphKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GraphKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "complete" => Ok(GraphKind::Complete),
            "ring" | "circular" => Ok(GraphKind::Ring),
            "star" => Ok(GraphKind::Star),
            "disconnected" => Ok(GraphKind::Disconnected),
            other => Err(Error::invalid(format!(
                "unknown topology '{other}' (expected complete|ring|star|disconnected)"
            ))),
        }
    }
}

/// Undirected simple graph over agents `0..n_agents`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n_agents: usize,
    /// Pairs `(i, j)` with `i < j`, sorted.
    edges: Vec<(usize, usize)>,
    kind: GraphKind,
}

impl Graph {
    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn kind(&self) -> GraphKind {
        self.kind
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n_agents];
        for &(i, j) in &self.edges {
            deg[i] += 1;
            deg[j] += 1;
        }
        deg
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        let key = if i < j { (i, j) } else { (j, i) };
        self.edges.binary_search(&key).is_ok()
    }
}

/// Builds one of the four reference topologies. The star hub is agent 0.
pub fn build_graph(kind: GraphKind, n: usize) -> Result<Graph> {
    if n < kind.min_agents() {
        return Err(Error::invalid(format!(
            "{kind} topology needs at least {} agents, got {n}",
            kind.min_agents()
        )));
    }
    let mut edges = BTreeSet::new();
    match kind {
        GraphKind::Complete => {
            for i in 0..n {
                for j in (i + 1)..n {
                    edges.insert((i, j));
                }
            }
        }
        GraphKind::Ring => {
            for i in 0..n {
                let j = (i + 1) % n;
                edges.insert((i.min(j), i.max(j)));
            }
        }
        GraphKind::Star => {
            for j in 1..n {
                edges.insert((0, j));
            }
        }
        GraphKind::Disconnected => {}
    }
    Ok(Graph {
        n_agents: n,
        edges: edges.into_iter().collect(),
        kind,
    })
}

/// Combinatorial Laplacian `L = D - A`.
pub fn laplacian(g: &Graph) -> Matrix {
    let n = g.n_agents;
    let mut l = Matrix::zeros(n, n);
    for &(i, j) in &g.edges {
        l[(i, j)] -= 1.0;
        l[(j, i)] -= 1.0;
        l[(i, i)] += 1.0;
        l[(j, j)] += 1.0;
    }
    l
}

/// Largest Laplacian eigenvalue; zero for an edgeless graph.
pub fn laplacian_max_eigenvalue(g: &Graph) -> Result<f64> {
    if g.edges.is_empty() {
        return Ok(0.0);
    }
    let eig = symmetric_eigen(&laplacian(g))?;
    Ok(eig.values[0])
}

/// Symmetric doubly-stochastic gossip matrix with its spectrum.
#[derive(Debug, Clone)]
pub struct MixingMatrix {
    w: Matrix,
    /// Eigenvalues of `w` in descending order.
    eigenvalues: Vec<f64>,
    rho: f64,
    lambda_min: f64,
    delta: f64,
    graph: Option<Graph>,
    /// Nonzero entries of each row, `(column, weight)` in column order.
    sparse_rows: Vec<Vec<(usize, f64)>>,
}

impl MixingMatrix {
    /// Wraps an arbitrary square weight matrix (no graph attached). The
    /// spectrum is that of the symmetric part, so validation of a
    /// non-symmetric input still reports something meaningful.
    pub fn from_weights(w: Matrix) -> Result<Self> {
        if !w.is_square() || w.rows() == 0 {
            return Err(Error::invalid("mixing matrix must be square and non-empty"));
        }
        Self::assemble(w, f64::NAN, None)
    }

    fn assemble(w: Matrix, delta: f64, graph: Option<Graph>) -> Result<Self> {
        let eig = symmetric_eigen(&w)?;
        let n = w.rows();
        let lambda_min = eig.values[n - 1];
        let rho = if n == 1 {
            0.0
        } else {
            eig.values[1].abs().max(lambda_min.abs())
        };
        let sparse_rows = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| w[(i, j)] != 0.0)
                    .map(|j| (j, w[(i, j)]))
                    .collect()
            })
            .collect();
        Ok(Self {
            w,
            eigenvalues: eig.values,
            rho,
            lambda_min,
            delta,
            graph,
            sparse_rows,
        })
    }

    pub fn weights(&self) -> &Matrix {
        &self.w
    }

    pub fn n_agents(&self) -> usize {
        self.w.rows()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Second-largest eigenvalue magnitude.
    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn spectral_gap(&self) -> f64 {
        1.0 - self.rho
    }

    pub fn lambda_min(&self) -> f64 {
        self.lambda_min
    }

    /// Laplacian step; NaN for matrices built by [`MixingMatrix::from_weights`].
    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn graph(&self) -> Option<&Graph> {
        self.graph.as_ref()
    }

    pub fn is_contracting(&self) -> bool {
        self.rho < 1.0 - STRUCTURE_TOL
    }

    pub fn sparse_row(&self, i: usize) -> &[(usize, f64)] {
        &self.sparse_rows[i]
    }

    /// Applies `W ⊗ I_d` to the stacked vector `x` (agent-major).
    pub fn mix_into(&self, x: &[f64], dim: usize, out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_agents() * dim);
        debug_assert_eq!(out.len(), x.len());
        for (i, row) in self.sparse_rows.iter().enumerate() {
            let dst = &mut out[i * dim..(i + 1) * dim];
            dst.fill(0.0);
            for &(j, wij) in row {
                let src = &x[j * dim..(j + 1) * dim];
                for (o, s) in dst.iter_mut().zip(src) {
                    *o += wij * s;
                }
            }
        }
    }
}

/// Builds `W = I - δL`. With `delta = None` the midpoint `1/λ_max(L)` of the
/// admissible interval `(0, 2/λ_max(L))` is used.
fn short(v: f64) -> String {
    let s = format!("{v:.10}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

pub fn mixing_matrix(g: &Graph, delta: Option<f64>) -> Result<MixingMatrix> {
    let lmax = laplacian_max_eigenvalue(g)?;
    let delta = match delta {
        Some(d) => d,
        None if lmax > 0.0 => 1.0 / lmax,
        None => 1.0,
    };
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::invalid(format!(
            "delta must be a positive finite real, got {delta}"
        )));
    }
    if lmax > 0.0 && delta >= 2.0 / lmax {
        return Err(Error::invalid(format!(
            "delta = {delta} outside the admissible interval (0, {}) = (0, 2/lambda_max(L))",
            short(2.0 / lmax)
        )));
    }
    let n = g.n_agents();
    let l = laplacian(g);
    let mut w = Matrix::identity(n);
    for i in 0..n {
        for j in 0..n {
            w[(i, j)] -= delta * l[(i, j)];
        }
    }
    MixingMatrix::assemble(w, delta, Some(g.clone()))
}

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub worst_residual: f64,
    pub note: Option<String>,
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
    pub rho: f64,
    pub lambda_min: f64,
    pub non_contracting: bool,
    /// Whether some eigenvalues repeat, so only the non-strict ordering holds.
    pub repeated_eigenvalues: bool,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            write!(
                f,
                "{:<22} {}  worst residual {:.3e}",
                c.name,
                if c.passed { "pass" } else { "FAIL" },
                c.worst_residual.abs()
            )?;
            if let Some(note) = &c.note {
                write!(f, "  ({note})")?;
            }
            writeln!(f)?;
        }
        writeln!(
            f,
            "rho = {:.6}  spectral gap = {:.6}  lambda_N(W) = {:.6}",
            self.rho,
            1.0 - self.rho,
            self.lambda_min
        )?;
        if self.repeated_eigenvalues {
            writeln!(
                f,
                "note: repeated eigenvalues, only the non-strict ordering 1 = l1 > l2 >= ... >= lN > -1 holds"
            )?;
        }
        if self.non_contracting {
            writeln!(
                f,
                "warning: rho = 1, non-contracting (agents never reach consensus)"
            )?;
        }
        Ok(())
    }
}

/// Checks symmetry, double stochasticity, the sign/support pattern and the
/// eigenvalue ordering of a mixing matrix.
pub fn validate_mixing(m: &MixingMatrix) -> ValidationReport {
    let w = &m.w;
    let n = w.rows();
    let mut checks = Vec::new();

    let sym = w.max_abs_diff(&w.transpose());
    checks.push(Check {
        name: "symmetry",
        passed: sym <= STRUCTURE_TOL,
        worst_residual: sym,
        note: None,
    });

    let mut stoch: f64 = 0.0;
    for i in 0..n {
        let row: f64 = w.row(i).iter().sum();
        let col: f64 = (0..n).map(|k| w[(k, i)]).sum();
        stoch = stoch.max((row - 1.0).abs()).max((col - 1.0).abs());
    }
    checks.push(Check {
        name: "doubly stochastic",
        passed: stoch <= STRUCTURE_TOL,
        worst_residual: stoch,
        note: None,
    });

    let most_negative = w.as_slice().iter().copied().fold(0.0, f64::min);
    checks.push(Check {
        name: "nonnegative entries",
        passed: most_negative >= -STRUCTURE_TOL,
        worst_residual: -most_negative,
        note: None,
    });

    let pattern = match &m.graph {
        Some(g) => {
            let mut worst: f64 = 0.0;
            let mut ok = true;
            for i in 0..n {
                for j in 0..n {
                    let expected = i == j || g.has_edge(i, j);
                    let positive = w[(i, j)] > STRUCTURE_TOL;
                    if expected != positive {
                        ok = false;
                        worst = worst.max(w[(i, j)].abs());
                    }
                }
            }
            Check {
                name: "support pattern",
                passed: ok,
                worst_residual: worst,
                note: None,
            }
        }
        None => Check {
            name: "support pattern",
            passed: true,
            worst_residual: 0.0,
            note: Some("no graph attached, skipped".into()),
        },
    };
    checks.push(pattern);

    let ev = &m.eigenvalues;
    let top_residual = (ev[0] - 1.0).abs();
    let ones = vec![1.0; n];
    let w1 = w.matvec(&ones);
    let ones_residual = w1.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
    let bottom_ok = ev[n - 1] > -1.0 + STRUCTURE_TOL;
    let ordering_ok = top_residual <= 1e-10 && ones_residual <= STRUCTURE_TOL && bottom_ok;
    let repeated = ev.windows(2).any(|p| (p[0] - p[1]).abs() <= 1e-10);
    checks.push(Check {
        name: "eigenvalue ordering",
        passed: ordering_ok,
        worst_residual: top_residual.max(ones_residual),
        note: if bottom_ok {
            None
        } else {
            Some(format!("lambda_min = {} <= -1", ev[n - 1]))
        },
    });

    ValidationReport {
        checks,
        rho: m.rho,
        lambda_min: m.lambda_min,
        non_contracting: !m.is_contracting(),
        repeated_eigenvalues: repeated,
    }
}
