use std::sync::Arc;

use depsgld::constraints::{ConvexSet, ProxParams};
use depsgld::linalg::{distance, dot, norm2, Matrix};
use depsgld::metrics::{
    consensus_distance, wasserstein2_1d, wasserstein2_empirical, AgentTag, Quantile1D, ReplicaTag,
    RunTrace,
};
use depsgld::models::{
    generate_blr_data, linreg_potential, logreg_potential, quadratic, quartic_1d, DataSet,
    Potential,
};
use depsgld::samplers::{depsgld_step, stream_rng, NetworkState, SamplerConfig, StreamLane};
use depsgld::topology::{build_graph, laplacian_max_eigenvalue, mixing_matrix, GraphKind};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn set_strategy(dim: usize) -> impl Strategy<Value = ConvexSet> {
    prop_oneof![
        prop::collection::vec((-2.0..0.0f64, 0.1..2.0f64), dim).prop_map(|b| {
            let (lo, hi): (Vec<f64>, Vec<f64>) = b.into_iter().unzip();
            ConvexSet::interval_box(lo, hi).unwrap()
        }),
        (prop::collection::vec(-1.0..1.0f64, dim), 0.2..2.0f64)
            .prop_map(|(c, r)| ConvexSet::l2_ball_at(c, r).unwrap()),
        (0.2..2.0f64).prop_map(move |r| ConvexSet::l1_ball(dim, r).unwrap()),
    ]
}

fn set_and_points() -> impl Strategy<Value = (ConvexSet, Vec<f64>, Vec<f64>)> {
    (1usize..6).prop_flat_map(|d| {
        (
            set_strategy(d),
            prop::collection::vec(-5.0..5.0f64, d),
            prop::collection::vec(-5.0..5.0f64, d),
        )
    })
}

fn boundary_distance(set: &ConvexSet, x: &[f64]) -> f64 {
    if !set.contains(x) {
        return set.distance(x).unwrap();
    }
    match set {
        ConvexSet::IntervalBox { lower, upper } => x
            .iter()
            .zip(lower.iter().zip(upper))
            .map(|(v, (l, u))| (v - l).min(u - v))
            .fold(f64::INFINITY, f64::min),
        ConvexSet::L2Ball { center, radius } => radius - distance(x, center),
        ConvexSet::L1Ball { radius, dim } => {
            (radius - x.iter().map(|v| v.abs()).sum::<f64>()) / (*dim as f64).sqrt()
        }
    }
}

proptest! {
    #[test]
    fn projection_is_nonexpansive((set, x, y) in set_and_points()) {
        let px = set.project(&x).unwrap();
        let py = set.project(&y).unwrap();
        prop_assert!(distance(&px, &py) <= distance(&x, &y) + 1e-12);
    }

    #[test]
    fn projection_lands_in_set_and_is_idempotent((set, x, _y) in set_and_points()) {
        let px = set.project(&x).unwrap();
        prop_assert!(set.contains(&px));
        let ppx = set.project(&px).unwrap();
        prop_assert!(distance(&px, &ppx) <= 1e-12);
        if set.contains(&x) {
            prop_assert!(distance(&x, &px) <= 1e-9);
        }
    }

    #[test]
    fn envelope_gradient_is_lipschitz((set, x, y) in set_and_points(), gamma in 0.01..2.0f64) {
        let prox = ProxParams::new(gamma).unwrap();
        let gx = set.moreau_gradient(prox, &x).unwrap();
        let gy = set.moreau_gradient(prox, &y).unwrap();
        prop_assert!(distance(&gx, &gy) <= distance(&x, &y) / gamma + 1e-10);
    }

    #[test]
    fn envelope_gradient_matches_finite_differences((set, x, _y) in set_and_points(), gamma in 0.05..2.0f64) {
        let h = 1e-5;
        prop_assume!(boundary_distance(&set, &x) >= 10.0 * h);
        let prox = ProxParams::new(gamma).unwrap();
        let g = set.moreau_gradient(prox, &x).unwrap();
        let mut fd = vec![0.0; x.len()];
        for k in 0..x.len() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += h;
            xm[k] -= h;
            fd[k] = (set.moreau_envelope(prox, &xp).unwrap() - set.moreau_envelope(prox, &xm).unwrap()) / (2.0 * h);
        }
        let err = distance(&fd, &g);
        if norm2(&g) > 0.0 {
            prop_assert!(err / norm2(&g) <= 1e-5, "rel err {}", err / norm2(&g));
        } else {
            prop_assert!(err == 0.0);
        }
    }

    #[test]
    fn boundary_points_respect_ball_sandwich((set, x, _y) in set_and_points()) {
        prop_assume!(set.satisfies_ball_sandwich());
        prop_assume!(norm2(&x) > 1e-3);
        let far: Vec<f64> = x.iter().map(|v| v * 100.0 / norm2(&x)).collect();
        let b = set.project(&far).unwrap();
        let r = norm2(&b);
        prop_assert!(r >= set.inner_radius() - 1e-9 && r <= set.outer_radius() + 1e-9);
    }
}

fn kind_strategy() -> impl Strategy<Value = GraphKind> {
    prop::sample::select(GraphKind::ALL.to_vec())
}

proptest! {
    #[test]
    fn mixing_is_symmetric_and_stochastic(kind in kind_strategy(), n in 3usize..25, frac in 0.05..0.95f64) {
        let g = build_graph(kind, n).unwrap();
        let lmax = laplacian_max_eigenvalue(&g).unwrap();
        let delta = if lmax > 0.0 { frac * 2.0 / lmax } else { frac };
        let m = mixing_matrix(&g, Some(delta)).unwrap();
        let w = m.weights();
        for i in 0..n {
            let row: f64 = (0..n).map(|j| w[(i, j)]).sum();
            prop_assert!((row - 1.0).abs() <= 1e-12);
            for j in 0..n {
                prop_assert!((w[(i, j)] - w[(j, i)]).abs() <= 1e-12);
            }
        }
        if kind.is_connected() {
            prop_assert!(m.rho() < 1.0 && m.spectral_gap() > 0.0);
        }
    }

    #[test]
    fn powers_contract_mean_zero_vectors(kind in kind_strategy(), n in 3usize..20, seed in any::<u64>()) {
        let m = mixing_matrix(&build_graph(kind, n).unwrap(), None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let mean = v.iter().sum::<f64>() / n as f64;
        v.iter_mut().for_each(|x| *x -= mean);
        let v0 = norm2(&v);
        for k in 1..=50 {
            v = m.weights().matvec(&v);
            prop_assert!(norm2(&v) <= m.rho().powi(k) * v0 + 1e-10);
        }
    }

    #[test]
    fn gossip_preserves_the_average(kind in kind_strategy(), n in 3usize..25, dim in 1usize..4, seed in any::<u64>()) {
        let m = mixing_matrix(&build_graph(kind, n).unwrap(), None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..n * dim).map(|_| rng.random_range(-10.0..10.0)).collect();
        let mut y = vec![0.0; n * dim];
        m.mix_into(&x, dim, &mut y);
        for k in 0..dim {
            let before: f64 = (0..n).map(|i| x[i * dim + k]).sum::<f64>() / n as f64;
            let after: f64 = (0..n).map(|i| y[i * dim + k]).sum::<f64>() / n as f64;
            prop_assert!((before - after).abs() <= 1e-12);
        }
    }
}

fn logistic_data(n: usize, p: usize, seed: u64) -> DataSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let beta: Vec<f64> = (0..p).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut features = Vec::with_capacity(n * p);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = (0..p).map(|_| StandardNormal.sample(&mut rng)).collect();
        let prob = 1.0 / (1.0 + (-dot(&row, &beta)).exp());
        labels.push(if rng.random::<f64>() < prob { 1.0 } else { 0.0 });
        features.extend(row);
    }
    DataSet::new(Matrix::from_vec(n, p, features).unwrap(), labels).unwrap()
}

fn potentials(n_agents: usize) -> Vec<Potential> {
    let centers = (0..n_agents)
        .map(|i| vec![i as f64 * 0.3 - 0.5, 1.0 - i as f64 * 0.1])
        .collect();
    vec![
        quartic_1d(n_agents).unwrap(),
        quadratic(centers, vec![1.0, 3.0]).unwrap(),
        linreg_potential(Arc::new(generate_blr_data(203, 9).unwrap()), n_agents, 0.25).unwrap(),
        logreg_potential(Arc::new(logistic_data(157, 4, 10)), n_agents).unwrap(),
    ]
}

fn point(p: &Potential, raw: &[f64]) -> Vec<f64> {
    (0..p.dim()).map(|k| raw[k % raw.len()]).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shards_add_up(n_agents in 1usize..7, raw in prop::collection::vec(-2.0..2.0f64, 4)) {
        for p in potentials(n_agents) {
            let x = point(&p, &raw);
            let total = p.total_value(&x).unwrap();
            let sum: f64 = (0..n_agents).map(|i| p.value(i, &x).unwrap()).sum();
            prop_assert!((total - sum).abs() <= 1e-9 * total.abs().max(1.0));
            let g = p.total_gradient(&x).unwrap();
            let mut gs = vec![0.0; p.dim()];
            for i in 0..n_agents {
                for (a, v) in gs.iter_mut().zip(p.gradient(i, &x).unwrap()) {
                    *a += v;
                }
            }
            prop_assert!(distance(&g, &gs) <= 1e-9 * norm2(&g).max(1.0));
        }
    }

    #[test]
    fn gradients_match_finite_differences(agent in 0usize..3, raw in prop::collection::vec(-1.5..1.5f64, 4)) {
        let h = 1e-5;
        for p in potentials(3) {
            let x = point(&p, &raw);
            let g = p.gradient(agent, &x).unwrap();
            let mut fd = vec![0.0; p.dim()];
            for k in 0..p.dim() {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[k] += h;
                xm[k] -= h;
                fd[k] = (p.value(agent, &xp).unwrap() - p.value(agent, &xm).unwrap()) / (2.0 * h);
            }
            prop_assert!(distance(&fd, &g) <= 1e-5 * norm2(&g).max(1e-3));
        }
    }

    #[test]
    fn strong_convexity_and_smoothness_sandwich(
        agent in 0usize..4,
        a in prop::collection::vec(-3.0..3.0f64, 2),
        b in prop::collection::vec(-3.0..3.0f64, 2),
    ) {
        for p in potentials(4) {
            let (Some(mu), Some(l)) = (p.mu(), p.l_smooth()) else { continue };
            let gap = p.value(agent, &a).unwrap()
                - p.value(agent, &b).unwrap()
                - dot(&p.gradient(agent, &b).unwrap(), &a.iter().zip(&b).map(|(x, y)| x - y).collect::<Vec<_>>());
            let d2 = distance(&a, &b).powi(2);
            let scale = p.value(agent, &a).unwrap().abs().max(1.0);
            prop_assert!(mu / 2.0 * d2 <= gap + 1e-12 * scale, "mu side: {} > {}", mu / 2.0 * d2, gap);
            prop_assert!(gap <= l / 2.0 * d2 + 1e-8 * scale, "L side: {} > {}", gap, l / 2.0 * d2);
        }
    }

    #[test]
    fn step_mean_follows_mean_chain_formula(
        kind in kind_strategy(),
        seed in any::<u64>(),
        eta in 1e-5..1e-2f64,
        gamma in 0.01..1.0f64,
        batch in 1usize..30,
    ) {
        let n = 5;
        let p = linreg_potential(Arc::new(generate_blr_data(300, 1).unwrap()), n, 0.25).unwrap();
        let set = ConvexSet::l2_ball(2, 0.7).unwrap();
        let w = mixing_matrix(&build_graph(kind, n).unwrap(), None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let agents: Vec<Vec<f64>> = (0..n).map(|_| (0..2).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let rngs = (0..n).map(|a| stream_rng(seed, StreamLane::Auxiliary, 3, a)).collect();
        let mut s = NetworkState::new(agents, rngs).unwrap();
        let cfg = SamplerConfig { eta, gamma, batch, ..SamplerConfig::default() };
        let xbar = s.mean();
        let mut expected = xbar.clone();
        for i in 0..n {
            let mut r = s.rngs()[i].clone();
            let xi = s.agent(i);
            let g = p.stochastic_gradient(i, xi, batch, &mut r).unwrap();
            let proj = set.project(xi).unwrap();
            for k in 0..2 {
                let z: f64 = StandardNormal.sample(&mut r);
                expected[k] += (-eta * (g[k] + (xi[k] - proj[k]) / (n as f64 * gamma)) + (2.0 * eta).sqrt() * z) / n as f64;
            }
        }
        depsgld_step(&mut s, &w, &p, &set, &cfg).unwrap();
        prop_assert!(distance(&s.mean(), &expected) <= 1e-10);
    }
}

proptest! {
    #[test]
    fn consensus_ignores_common_shifts(n in 1usize..8, dim in 1usize..4, seed in any::<u64>(), shift in -10.0..10.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let agents: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect()).collect();
        let shifted: Vec<Vec<f64>> = agents.iter().map(|a| a.iter().map(|v| v + shift).collect()).collect();
        let rngs = |k| (0..n).map(|a| stream_rng(0, StreamLane::Auxiliary, k, a)).collect();
        let a = consensus_distance(&NetworkState::new(agents, rngs(0)).unwrap());
        let b = consensus_distance(&NetworkState::new(shifted, rngs(1)).unwrap());
        prop_assert!((a - b).abs() <= 1e-10 * a.max(1.0));
    }

    #[test]
    fn empirical_w2_is_a_symmetric_nonnegative_distance(
        a in prop::collection::vec(-5.0..5.0f64, 1..60),
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b: Vec<f64> = a.iter().map(|_| rng.random_range(-5.0..5.0)).collect();
        let ab = wasserstein2_empirical(&a, &b).unwrap();
        let ba = wasserstein2_empirical(&b, &a).unwrap();
        prop_assert!(ab >= 0.0 && ab == ba);
        prop_assert_eq!(wasserstein2_empirical(&a, &a).unwrap(), 0.0);
        let mut shuffled = a.clone();
        shuffled.reverse();
        prop_assert_eq!(wasserstein2_empirical(&a, &shuffled).unwrap(), 0.0);
    }

    #[test]
    fn w2_against_quantile_is_zero_only_on_grid_images(n in 1usize..200, bump in 1e-3..1.0f64, idx in any::<prop::sample::Index>()) {
        let q = Quantile1D::new(vec![-1.0, 0.0, 2.0], vec![0.0, 0.25, 1.0]).unwrap();
        let mut xs: Vec<f64> = (0..n).map(|k| q.quantile((k as f64 + 0.5) / n as f64)).collect();
        prop_assert!(wasserstein2_1d(&xs, &q).unwrap() <= 1e-15);
        let i = idx.index(n);
        xs[i] += bump;
        let w = wasserstein2_1d(&xs, &q).unwrap();
        prop_assert!(w > 0.0);
    }

    #[test]
    fn trace_series_stay_ordered(iters in prop::collection::vec(0usize..50, 1..40)) {
        let mut t = RunTrace::new();
        let mut sorted = iters.clone();
        sorted.sort_unstable();
        sorted.dedup();
        for &k in &sorted {
            t.push(ReplicaTag::Pooled, k, AgentTag::Mean, "m", k as f64).unwrap();
        }
        let last = *sorted.last().unwrap();
        prop_assert!(t.push(ReplicaTag::Pooled, last, AgentTag::Mean, "m", 0.0).is_err());
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        prop_assert_eq!(String::from_utf8(buf).unwrap().lines().count(), sorted.len() + 1);
    }
}
