//! Convex constraint sets with exact Euclidean projections and the
//! Moreau–Yosida envelope `q(x) = dist(x, K)² / (2γ)`.

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{distance, norm2};

/// Membership slack used when deciding whether a point lies in `K`.
pub const MEMBERSHIP_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum ConvexSet {
    /// Axis-aligned box `lower ≤ x ≤ upper`.
    IntervalBox { lower: Vec<f64>, upper: Vec<f64> },
    /// Euclidean ball `‖x - center‖₂ ≤ radius`.
    L2Ball { center: Vec<f64>, radius: f64 },
    /// Origin-centred cross-polytope `‖x‖₁ ≤ radius`.
    L1Ball { dim: usize, radius: f64 },
}

impl ConvexSet {
    pub fn interval_box(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::invalid(format!(
                "box bounds must be non-empty and of equal length (got {} and {})",
                lower.len(),
                upper.len()
            )));
        }
        if let Some(i) = (0..lower.len()).find(|&i| !(lower[i] < upper[i])) {
            return Err(Error::invalid(format!(
                "box needs lower < upper in every coordinate (coordinate {i}: {} vs {})",
                lower[i], upper[i]
            )));
        }
        Ok(ConvexSet::IntervalBox { lower, upper })
    }

    pub fn l2_ball(dim: usize, radius: f64) -> Result<Self> {
        Self::l2_ball_at(vec![0.0; dim], radius)
    }

    pub fn l2_ball_at(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() {
            return Err(Error::invalid("ball dimension must be positive"));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::invalid(format!(
                "ball radius must be positive, got {radius}"
            )));
        }
        Ok(ConvexSet::L2Ball { center, radius })
    }

    pub fn l1_ball(dim: usize, radius: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("ball dimension must be positive"));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::invalid(format!(
                "ball radius must be positive, got {radius}"
            )));
        }
        Ok(ConvexSet::L1Ball { dim, radius })
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvexSet::IntervalBox { lower, .. } => lower.len(),
            ConvexSet::L2Ball { center, .. } => center.len(),
            ConvexSet::L1Ball { dim, .. } => *dim,
        }
    }

    /// Largest `r` with `B(0, r) ⊂ K`; zero when the origin is not interior.
    pub fn inner_radius(&self) -> f64 {
        match self {
            ConvexSet::IntervalBox { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(l, u)| {
                    if *l < 0.0 && *u > 0.0 {
                        l.abs().min(*u)
                    } else {
                        0.0
                    }
                })
                .fold(f64::INFINITY, f64::min),
            ConvexSet::L2Ball { center, radius } => (radius - norm2(center)).max(0.0),
            ConvexSet::L1Ball { dim, radius } => radius / (*dim as f64).sqrt(),
        }
    }

    /// Smallest `R` with `K ⊂ B(0, R)`.
    pub fn outer_radius(&self) -> f64 {
        match self {
            ConvexSet::IntervalBox { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(l, u)| {
                    let m = l.abs().max(u.abs());
                    m * m
                })
                .sum::<f64>()
                .sqrt(),
            ConvexSet::L2Ball { center, radius } => norm2(center) + radius,
            ConvexSet::L1Ball { radius, .. } => *radius,
        }
    }

    /// True when `B(0, r) ⊂ K ⊂ B(0, R)` holds with `r > 0` and, for the
    /// Euclidean ball, the centre is the origin.
    pub fn satisfies_ball_sandwich(&self) -> bool {
        match self {
            ConvexSet::L2Ball { center, .. } => center.iter().all(|c| *c == 0.0),
            _ => self.inner_radius() > 0.0,
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::invalid(format!(
                "dimension mismatch: point has {} coordinates, set has {}",
                x.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            ConvexSet::IntervalBox { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(v, (l, u))| *v >= l - MEMBERSHIP_TOL && *v <= u + MEMBERSHIP_TOL),
            ConvexSet::L2Ball { center, radius } => distance(x, center) <= radius + MEMBERSHIP_TOL,
            ConvexSet::L1Ball { radius, .. } => {
                x.iter().map(|v| v.abs()).sum::<f64>() <= radius + MEMBERSHIP_TOL
            }
        }
    }

    /// Euclidean projection `argmin_{y ∈ K} ‖x - y‖`.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let mut out = vec![0.0; x.len()];
        self.project_into(x, &mut out);
        Ok(out)
    }

    /// Unchecked projection into a caller-provided buffer.
    pub fn project_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim());
        debug_assert_eq!(out.len(), x.len());
        match self {
            ConvexSet::IntervalBox { lower, upper } => {
                for i in 0..x.len() {
                    out[i] = x[i].clamp(lower[i], upper[i]);
                }
            }
            ConvexSet::L2Ball { center, radius } => {
                let r = distance(x, center);
                if r <= *radius {
                    out.copy_from_slice(x);
                } else {
                    let scale = radius / r;
                    for i in 0..x.len() {
                        out[i] = center[i] + (x[i] - center[i]) * scale;
                    }
                }
            }
            ConvexSet::L1Ball { radius, .. } => project_l1(x, *radius, out),
        }
    }

    pub fn distance(&self, x: &[f64]) -> Result<f64> {
        let p = self.project(x)?;
        Ok(distance(x, &p))
    }

    /// Envelope value `dist(x, K)² / (2γ)`; zero exactly on `K`.
    pub fn moreau_envelope(&self, prox: ProxParams, x: &[f64]) -> Result<f64> {
        let d = self.distance(x)?;
        Ok(d * d / (2.0 * prox.gamma))
    }

    /// Envelope gradient `(x - P_K(x)) / γ`.
    pub fn moreau_gradient(&self, prox: ProxParams, x: &[f64]) -> Result<Vec<f64>> {
        let p = self.project(x)?;
        Ok(x.iter()
            .zip(&p)
            .map(|(a, b)| (a - b) / prox.gamma)
            .collect())
    }

    /// Draws a point uniformly from `K`.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            ConvexSet::IntervalBox { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(l, u)| l + (u - l) * rng.random::<f64>())
                .collect(),
            ConvexSet::L2Ball { center, radius } => {
                let d = center.len();
                let dir: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
                let n = norm2(&dir).max(f64::MIN_POSITIVE);
                let r = radius * rng.random::<f64>().powf(1.0 / d as f64);
                dir.iter().zip(center).map(|(v, c)| c + v / n * r).collect()
            }
            ConvexSet::L1Ball { dim, radius } => {
                // Normalised exponentials with one slack coordinate are uniform
                // on the simplex; random signs fill the cross-polytope.
                let e: Vec<f64> = (0..=*dim).map(|_| Exp1.sample(rng)).collect();
                let total: f64 = e.iter().sum();
                (0..*dim)
                    .map(|i| {
                        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                        sign * radius * e[i] / total
                    })
                    .collect()
            }
        }
    }
}

impl fmt::Display for ConvexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConvexSet::IntervalBox { lower, upper } => write!(f, "box({lower:?}, {upper:?})"),
            ConvexSet::L2Ball { center, radius } => {
                write!(f, "l2_ball(center={center:?}, radius={radius})")
            }
            ConvexSet::L1Ball { dim, radius } => write!(f, "l1_ball(dim={dim}, radius={radius})"),
        }
    }
}

/// Sort-and-threshold projection onto `{‖y‖₁ ≤ radius}`.
fn project_l1(x: &[f64], radius: f64, out: &mut [f64]) {
    let l1: f64 = x.iter().map(|v| v.abs()).sum();
    if l1 <= radius {
        out.copy_from_slice(x);
        return;
    }
    let mut mags: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    mags.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &m) in mags.iter().enumerate() {
        cumsum += m;
        let t = (cumsum - radius) / (j + 1) as f64;
        if m - t > 0.0 {
            theta = t;
        } else {
            break;
        }
    }
    for (o, v) in out.iter_mut().zip(x) {
        *o = v.signum() * (v.abs() - theta).max(0.0);
    }
}

/// Moreau–Yosida regularization strength.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProxParams {
    pub gamma: f64,
}

impl ProxParams {
    /// Upper end `1/e` of the range the regularization bias bound covers.
    pub const GAMMA_CEILING: f64 = 1.0 / std::f64::consts::E;

    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::invalid(format!(
                "gamma must be positive, got {gamma}"
            )));
        }
        if gamma >= Self::GAMMA_CEILING {
            log::warn!("gamma = {gamma} >= 1/e; the W2 bias bound for the regularized target does not apply");
        }
        Ok(Self { gamma })
    }

    pub fn beyond_bias_bound(&self) -> bool {
        self.gamma >= Self::GAMMA_CEILING
    }
}
