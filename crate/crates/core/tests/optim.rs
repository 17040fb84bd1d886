use num_complex::Complex64;
use pixiso_core::optim::*;
use pixiso_core::sparam::{linspace, Matrix2, SParamSet};
use pixiso_core::{Cell, PixelGrid, Result};
use proptest::prelude::*;

/// Flat-spectrum stand-in for the field solver: figures depend on pixel
/// count, height and left-column occupancy of element A.
fn stub(a: &PixelGrid, _b: &PixelGrid) -> Result<SParamSet> {
    let k = a.active_count() as f64;
    let high = (0..a.len()).filter(|&n| n / a.nx() >= 2 && a.bits()[n]).count() as f64;
    let left = (0..a.ny()).filter(|&iy| a.get(Cell::new(0, iy))).count() as f64;
    let s11 = -3.0 - 1.7 * high + 0.9 * (k - 7.0).abs();
    let s21 = -22.0 - 2.3 * k + 4.1 * left;
    let m = |db: f64| Complex64::new(10f64.powf(db / 20.0), 0.0);
    let s: Matrix2 = [[m(s11), m(s21)], [m(s21), m(s11)]];
    SParamSet::new(linspace(3e9, 8e9, 3), vec![s; 3], 50.0)
}

type Stub = fn(&PixelGrid, &PixelGrid) -> Result<SParamSet>;

fn objective(spec: CostSpec) -> AntennaObjective<Stub> {
    AntennaObjective::new(PixelGrid::new(3, 4, false).unwrap(), spec, stub as Stub, false).unwrap()
}

/// Minimum cost over every raw 12-bit grid after repair.
fn brute_force(obj: &AntennaObjective<Stub>) -> f64 {
    (0u32..1 << 12)
        .map(|word| {
            let bits: Vec<bool> = (0..12).map(|b| word >> b & 1 == 1).collect();
            let g = PixelGrid::from_bits(3, 4, bits).unwrap();
            evaluate_cost(&g, &obj.spec, &obj.evaluator).unwrap().cost
        })
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn exhaustive_equivalence_on_3x4() {
    let obj = objective(CostSpec::default());
    let best = brute_force(&obj);
    assert!(best > 0.0);
    for seed in 1..=5 {
        let r = run(SwarmConfig { seed, ..SwarmConfig::default() }, &obj).unwrap();
        assert_eq!(r.best.cost, best, "seed {seed}");
        let (a, _) = obj.decode_canonical(&r.best_bits).unwrap();
        assert!(a.is_repaired());
    }
}

#[test]
fn single_objective_reductions() {
    for spec in [
        CostSpec { beta: 0.0, ..CostSpec::default() },
        CostSpec { alpha: 0.0, ..CostSpec::default() },
    ] {
        let obj = objective(spec);
        let best = brute_force(&obj);
        let r = run(SwarmConfig { n_iters: 60, seed: 4, ..SwarmConfig::default() }, &obj).unwrap();
        assert_eq!(r.best.cost, best);
        let e = &r.best;
        let expect = spec.alpha * (e.s11_db + 10.0).max(0.0) + spec.beta * (e.s21_db + 40.0).max(0.0);
        assert_eq!(e.cost, expect);
    }
}

fn history_text(r: &OptResult) -> String {
    serde_json::to_string(&r.history).unwrap()
}

#[test]
fn thread_count_does_not_change_results() {
    let obj = objective(CostSpec::default());
    let cfg = SwarmConfig { n_particles: 12, n_iters: 25, seed: 9, ..SwarmConfig::default() };
    let results: Vec<String> = [1, 3]
        .iter()
        .map(|&threads| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| history_text(&run(cfg, &obj).unwrap()))
        })
        .collect();
    assert_eq!(results[0], results[1]);
}

#[test]
fn cached_values_match_fresh_evaluation() {
    let obj = objective(CostSpec::default());
    let mut swarm = Swarm::new(SwarmConfig { n_particles: 10, n_iters: 15, seed: 2, ..SwarmConfig::default() }, &obj).unwrap();
    while !swarm.is_done() {
        swarm.step(&obj).unwrap();
    }
    let mut checked = 0;
    for word in 0u32..1 << 11 {
        let bits: Vec<bool> = (0..11).map(|b| word >> b & 1 == 1).collect();
        let canon = obj.canonicalize(&bits);
        if let Some(stored) = swarm.cache().peek(&cache_key(&canon)) {
            let fresh = obj.evaluate(&canon).unwrap();
            assert_eq!(stored.cost.to_bits(), fresh.cost.to_bits());
            assert_eq!(stored.s11_db.to_bits(), fresh.s11_db.to_bits());
            assert_eq!(stored.s21_db.to_bits(), fresh.s21_db.to_bits());
            checked += 1;
        }
    }
    assert!(checked >= swarm.cache().len());
    assert!(swarm.cache().hits() > 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn gbest_never_increases(seed in any::<u64>(), n in 4usize..40, v in any::<bool>()) {
        let transfer = if v { Transfer::VShaped } else { Transfer::SShaped };
        let cfg = SwarmConfig { n_particles: 8, n_iters: 30, seed, transfer, ..SwarmConfig::default() };
        let r = run(cfg, &OneMax { n }).unwrap();
        for w in r.history.windows(2) {
            prop_assert!(w[1].gbest_cost <= w[0].gbest_cost);
        }
        prop_assert!(r.history.iter().all(|h| h.cache_hit_rate >= 0.0 && h.cache_hit_rate <= 1.0));
    }

    #[test]
    fn velocity_clamp_holds(v in proptest::collection::vec(-50.0f64..50.0, 1..32), w in 0.01f64..2.0, seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = v.len();
        let mut bits = || (0..n).map(|_| rng.gen::<bool>()).collect::<Vec<_>>();
        let (x, p, g) = (bits(), bits(), bits());
        let r1: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
        let r2: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
        let mut v = v;
        velocity_update(&mut v, &x, &p, &g, w, (2.0, 2.0), 6.0, &r1, &r2);
        prop_assert!(v.iter().all(|x| x.abs() <= 6.0));
    }
}
