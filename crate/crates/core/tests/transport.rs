mod oracles;

use ntci_core::girsanov::{coupled_simulate, GirsanovTilt};
use ntci_core::model;
use ntci_core::ot::{self, assignment, cost_matrix, exact_w2, sinkhorn_w2, CostMatrix, SinkhornConfig};
use ntci_core::paths::{Grid, PathMetric, Segment};
use ntci_core::rng::{self, Purpose};
use ntci_core::simulate::{simulate_ensemble, InitialLaw, SimConfig};
use ntci_core::{PathEnsemble, Sequential};
use rand::Rng;

fn random_costs(n: usize, seed: u64) -> (CostMatrix, Vec<Vec<f64>>) {
    let mut r = rng::stream(seed, Purpose::Sampler, n as u64);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| r.random_range(0.0..10.0)).collect()).collect();
    let flat = rows.iter().flatten().copied().collect();
    (CostMatrix::from_values(n, flat, "random").unwrap(), rows)
}

#[test]
fn assignment_matches_enumeration() {
    for i in 0..100 {
        let n = 1 + i % 6;
        let (c, rows) = random_costs(n, 40 + i as u64);
        let got = assignment(&c, ot::EXACT_CAP).unwrap().mean_cost;
        let want = oracles::brute_force_assignment(&rows);
        assert!((got - want).abs() <= 1e-9, "n={n}: {got} vs {want}");
        assert!((exact_w2(&c).unwrap() - want.sqrt()).abs() <= 1e-9);
    }
}

#[test]
fn assignment_handles_ties() {
    let c = CostMatrix::from_values(3, vec![1.0; 9], "flat").unwrap();
    let a = assignment(&c, 8).unwrap();
    let mut p = a.perm.clone();
    p.sort();
    assert_eq!(p, vec![0, 1, 2]);
    assert_eq!(a.mean_cost, 1.0);
}

fn gaussian_clouds(n: usize, shift: f64, seed: u64) -> (Vec<[f64; 2]>, Vec<[f64; 2]>) {
    let mut r = rng::stream(seed, Purpose::Sampler, 0);
    let mut draw = |s: f64| -> Vec<[f64; 2]> { (0..n).map(|_| [rng::normal(&mut r) + s, rng::normal(&mut r)]).collect() };
    let a = draw(0.0);
    let b = draw(shift);
    (a, b)
}

fn sq_costs(a: &[[f64; 2]], b: &[[f64; 2]]) -> CostMatrix {
    let n = a.len();
    let data = (0..n * n)
        .map(|k| {
            let (x, y) = (a[k / n], b[k % n]);
            (x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)
        })
        .collect();
    CostMatrix::from_values(n, data, "euclidean").unwrap()
}

#[test]
fn debiased_sinkhorn_tracks_exact_at_n128() {
    for (seed, shift) in [(1, 1.0), (2, 2.5), (3, 0.7)] {
        let (a, b) = gaussian_clouds(128, shift, seed);
        let (ab, aa, bb) = (sq_costs(&a, &b), sq_costs(&a, &a), sq_costs(&b, &b));
        let exact = exact_w2(&ab).unwrap();
        let s = sinkhorn_w2(&ab, &aa, &bb, SinkhornConfig::default()).unwrap();
        assert!(s.converged);
        let rel = (s.debiased - exact).abs() / exact;
        assert!(rel < 0.05, "shift {shift}: sinkhorn {} exact {exact} rel {rel}", s.debiased);
    }
}

#[test]
fn entropic_cost_decreases_toward_exact_as_epsilon_shrinks() {
    let (a, b) = gaussian_clouds(64, 1.0, 9);
    let ab = sq_costs(&a, &b);
    let exact = exact_w2(&ab).unwrap();
    let med = ab.median();
    let mut prev = f64::INFINITY;
    for rel in [1.0, 0.3, 0.1, 0.03, 0.01] {
        let r = ot::sinkhorn(&ab, rel * med, 100_000, 1e-6).unwrap();
        assert!(r.converged);
        assert!(r.estimate <= prev + 1e-4, "{rel}: {} after {prev}", r.estimate);
        assert!(r.estimate >= exact - 1e-4);
        prev = r.estimate;
    }
    assert!((prev - exact) / exact < 0.02);
}

#[test]
fn cost_matrix_transposes_under_swap() {
    let g = Grid::new(0.1, 0.2, 1).unwrap();
    let law = InitialLaw::Dirac(Segment::zeros(g));
    let set = model::brownian(1).unwrap();
    let cfg = SimConfig::new(0.5, 0.1, 0.2, 1, 1).with_paths(8);
    let a = simulate_ensemble(&set, &law, &cfg.clone().with_seed(1), None, &Sequential).unwrap();
    let b = simulate_ensemble(&set, &law, &cfg.with_seed(2), None, &Sequential).unwrap();
    let ab = cost_matrix(&a, &b, PathMetric::Uniform, &Sequential).unwrap();
    let ba = cost_matrix(&b, &a, PathMetric::Uniform, &Sequential).unwrap();
    assert_eq!(ab.transpose(), ba);
}

fn brownian_ensemble(seed: u64, n: usize) -> PathEnsemble {
    let g = Grid::new(0.1, 0.2, 1).unwrap();
    let law = InitialLaw::Dirac(Segment::zeros(g));
    let cfg = SimConfig::new(0.5, 0.1, 0.2, 1, 1).with_paths(n).with_seed(seed);
    simulate_ensemble(&model::brownian(1).unwrap(), &law, &cfg, None, &Sequential).unwrap()
}

#[test]
fn exact_w2_is_a_metric_on_ensembles() {
    for i in 0..30u64 {
        let e = [0, 1, 2].map(|k| brownian_ensemble(100 * i + k, 12));
        let w = |x: usize, y: usize| exact_w2(&cost_matrix(&e[x], &e[y], PathMetric::Uniform, &Sequential).unwrap()).unwrap();
        assert!(w(0, 2) <= w(0, 1) + w(1, 2) + 1e-9);
        assert!(w(0, 0).abs() <= 1e-12);
        assert!((w(0, 1) - w(1, 0)).abs() <= 1e-12);
    }
}

#[test]
fn synchronous_pairing_dominates_exact_transport() {
    let g = Grid::new(0.05, 0.25, 1).unwrap();
    let law = InitialLaw::Dirac(Segment::zeros(g));
    for (i, h) in [0.0, 0.3, 1.0].into_iter().enumerate() {
        let cfg = SimConfig::new(1.0, 0.05, 0.25, 1, 1).with_paths(64).with_seed(i as u64);
        let set = model::linear_delay(1, 1.0, 0.5, 0.3).unwrap();
        let tilt = GirsanovTilt::constant(vec![h]).unwrap();
        let r = coupled_simulate(&set, &law, &cfg, &tilt, &Sequential).unwrap();
        for metric in [PathMetric::Uniform, PathMetric::L2Weighted { lambda: 0.5 }] {
            let c = cost_matrix(&r.x_paths, &r.y_paths, metric, &Sequential).unwrap();
            let w = exact_w2(&c).unwrap();
            let bound = ot::coupling_upper_bound(&r, metric).unwrap();
            assert!(w <= bound + 1e-9, "{metric:?}: {w} > {bound}");
        }
    }
}
