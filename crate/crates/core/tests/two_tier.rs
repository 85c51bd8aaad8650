use narx_core::benchmarks::{brute_force_order_search, gen_mimo_linear, Excitation};
use narx_core::data::{normalize, Channel, Dataset};
use narx_core::narx::{weight_count, OneStepProblem};
use narx_core::optim::{Objective, OptimizerParams, PsoParams, Termination};
use narx_core::two_tier::*;
use narx_core::{AbcParams, LagSpec};

fn lags(ord: &[usize], deg: &[usize]) -> LagSpec {
    LagSpec::new(ord.to_vec(), deg.to_vec()).unwrap()
}

/// Noise-free `y(k) = 0.5 y(k-1) + 0.5 u(k)` driven by a +-1 PRBS.
fn linear_siso(n: usize, seed: u64) -> Dataset {
    let u = Excitation::Prbs { amplitude: 1.0, hold: 3 }.signal(n, 0, seed);
    let mut y = vec![0.0; n];
    for k in 0..n {
        let prev = if k > 0 { y[k - 1] } else { 0.0 };
        y[k] = 0.5 * prev + 0.5 * u[k];
    }
    Dataset::new("linear", 1.0, vec![Channel::new("u", u)], vec![Channel::new("y", y)]).unwrap()
}

fn quick_pso(iterations: usize) -> OptimizerParams {
    OptimizerParams::Pso(PsoParams {
        termination: Termination::iterations(iterations),
        ..PsoParams::table3_tier2()
    })
}

fn quick_config(variant: Variant, inner_iterations: usize) -> TierConfig {
    let mut c = TierConfig::preset(variant);
    c.inner = match c.inner {
        OptimizerParams::Pso(p) => OptimizerParams::Pso(PsoParams {
            termination: Termination::iterations(inner_iterations),
            ..p
        }),
        OptimizerParams::Abc(p) => OptimizerParams::Abc(AbcParams {
            colony_size: 8,
            termination: Termination::iterations(inner_iterations),
            ..p
        }),
        other => other,
    };
    c.max_lag = 2;
    c.hidden_size = 4;
    c
}

#[test]
fn lag_decode_examples() {
    assert_eq!(lag_decode(&[0.4, 1.6, 0.9, 2.2, 0.1], 2, 4).unwrap(), lags(&[1, 2], &[1, 2, 0]));
    assert_eq!(lag_decode(&[-10.0; 5], 2, 4).unwrap(), lags(&[1, 1], &[0, 0, 0]));
    assert_eq!(lag_decode(&[10.0; 5], 2, 4).unwrap(), lags(&[4, 4], &[4, 4, 4]));
    // Half rounds up.
    assert_eq!(lag_decode(&[1.5, 0.5], 1, 4).unwrap(), lags(&[2], &[1]));
    assert!(lag_decode(&[f64::NAN, 0.0], 1, 4).is_err());
}

#[test]
fn hand_built_network_shows_linear_system_is_representable() {
    let raw = linear_siso(400, 1);
    let (d, norm) = normalize(&raw);
    let (ru, ry) = (norm.range("u").unwrap(), norm.range("y").unwrap());
    // y_n(k) = c1 y_n(k-1) + c2 u_n(k) + c0 in normalised coordinates.
    let (mu, qu) = ((ru.max - ru.min) / 2.0, (ru.max + ru.min) / 2.0);
    let (my, qy) = ((ry.max - ry.min) / 2.0, (ry.max + ry.min) / 2.0);
    let (c1, c2, c0) = (0.5, 0.5 * mu / my, (0.5 * qu - 0.5 * qy) / my);
    // One small-signal tanh unit: h = tanh(eps * (c2 u + c1 y + c0)), y = h / eps.
    let eps = 1e-3;
    let h = 6;
    let mut w = vec![0.0; weight_count(&lags(&[1], &[1]), h)];
    w[..3].copy_from_slice(&[eps * c2, eps * c1, eps * c0]);
    let out = h * 3;
    w[out] = 1.0 / eps;
    let p = OneStepProblem::new(&d, lags(&[1], &[1]), h, 0, d.len()).unwrap();
    assert!(p.rmse(&w).unwrap() < 0.02);
}

#[test]
fn linear_system_trains_below_tolerance() {
    let raw = linear_siso(400, 1);
    let (d, _) = normalize(&raw);
    let s = Structure { lags: lags(&[1], &[1]), hidden_size: 6 };
    let inner = OptimizerParams::Pso(PsoParams::table3_tier2());
    let t = train_weights(&d, 0..d.len(), &s, &inner, 0.5, 11).unwrap();
    assert!(t.rmse < 0.05, "rmse {}", t.rmse);
    assert_eq!(t.weights.len(), s.weight_count());
    let again = train_weights(&d, 0..d.len(), &s, &inner, 0.5, 11).unwrap();
    assert_eq!(t, again);
}

#[test]
fn zero_inner_iterations_returns_best_initial_member() {
    let (d, _) = normalize(&linear_siso(200, 2));
    let s = Structure { lags: lags(&[1], &[1]), hidden_size: 3 };
    let t = train_weights(&d, 0..d.len(), &s, &quick_pso(0), 0.5, 5).unwrap();
    assert_eq!(t.history, vec![t.rmse]);
    assert_eq!(t.evaluations, 8);
}

#[test]
fn true_structure_beats_underspecified_one() {
    let mut wins = 0;
    for seed in 0..5 {
        let raw = linear_siso(400, 100 + seed);
        let mut c = quick_config(Variant::PsoPso, 300);
        c.seed = seed;
        c.hidden_size = 6;
        let p = Prepared::from_config(&raw, &c).unwrap();
        let ctx = FitnessContext::new(&p, &c).unwrap();
        let truth = ctx.fit(&Structure { lags: lags(&[1], &[1]), hidden_size: 6 }).unwrap();
        let under = ctx.fit(&Structure { lags: lags(&[1], &[0]), hidden_size: 6 }).unwrap();
        wins += usize::from(truth.fitness < under.fitness);
    }
    assert!(wins >= 3, "true structure won {wins} of 5");
}

#[test]
fn identical_structures_train_once() {
    let raw = linear_siso(200, 3);
    let c = quick_config(Variant::PsoPso, 5);
    let p = Prepared::from_config(&raw, &c).unwrap();
    let ctx = FitnessContext::new(&p, &c).unwrap();
    let cache = FitnessCache::new();
    let space = StructureSpace::from_config(&c, 1, 1);
    let obj = StructureObjective { space: &space, ctx: &ctx, cache: &cache };
    let values = obj.evaluate_batch(&[vec![1.2, 0.7], vec![1.4, 1.3], vec![1.0, 1.0]]);
    let values: Vec<f64> = values.into_iter().map(Result::unwrap).collect();
    assert_eq!(values[0].to_bits(), values[1].to_bits());
    assert_eq!(values[0].to_bits(), values[2].to_bits());
    assert_eq!(cache.trainings().len(), 1);
    // A hit returns the stored value bit for bit, and matches a fresh training.
    assert_eq!(obj.evaluate(&[1.0, 1.0]).unwrap().to_bits(), values[0].to_bits());
    let fresh = ctx.fit(&space.decode(&[1.0, 1.0]).unwrap()).unwrap();
    assert_eq!(fresh.fitness.to_bits(), values[0].to_bits());
}

#[test]
fn mismatched_variant_is_rejected_before_compute() {
    let mut c = TierConfig::preset(Variant::AbcAbc);
    c.inner = OptimizerParams::Pso(PsoParams::table3_tier2());
    let err = evolve_order(&linear_siso(50, 0), &c).unwrap_err();
    assert_eq!(err.kind(), "config_mismatch");
}

#[test]
fn evolve_invariants_on_mimo() {
    let raw = gen_mimo_linear(300, &Excitation::default(), 0.01, 4).unwrap();
    for variant in Variant::ALL {
        let mut c = quick_config(variant, 10);
        c.seed = 9;
        let p = Prepared::from_config(&raw, &c).unwrap();
        let ctx = FitnessContext::new(&p, &c).unwrap();
        let cache = FitnessCache::new();
        let m = evolve_with_cache(&raw, &c, &p, &ctx, &cache).unwrap();

        assert!(m.traces.outer.windows(2).all(|w| w[1] <= w[0]), "{variant}");
        let trainings = cache.trainings();
        assert!(trainings.len() <= 108);
        assert!(trainings.windows(2).all(|w| w[0].0 != w[1].0), "a structure trained twice");
        for (s, dim) in &trainings {
            assert_eq!(*dim, weight_count(&s.lags, s.hidden_size));
        }
        assert_eq!(m.stats.structures_trained, trainings.len());
        assert_eq!(m.order, m.lags.order());
        assert_eq!(m.relative_degree, m.lags.output_degrees());
        assert!(m.fitness <= m.search_fitness);
        assert!((m.recompute_fitness(&raw).unwrap() - m.fitness).abs() <= 1e-9);
    }
}

#[test]
fn evolve_is_deterministic() {
    let raw = gen_mimo_linear(300, &Excitation::default(), 0.01, 5).unwrap();
    let mut c = quick_config(Variant::AisPso, 10);
    c.seed = 3;
    let a = evolve_order(&raw, &c).unwrap();
    let b = evolve_order(&raw, &c).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn tiny_lag_bound_matches_exhaustive_search() {
    let raw = gen_mimo_linear(300, &Excitation::default(), 0.01, 6).unwrap();
    let mut c = quick_config(Variant::AbcAbc, 10);
    c.max_lag = 1;
    c.seed = 2;
    let oracle = brute_force_order_search(&raw, &c).unwrap();
    assert_eq!(oracle.table.len(), 8);
    let m = evolve_order(&raw, &c).unwrap();
    assert_eq!(m.lags, oracle.best);
    assert_eq!(m.search_fitness, oracle.best_fitness);
}

#[test]
fn hidden_size_can_be_searched() {
    let raw = linear_siso(200, 7);
    let mut c = quick_config(Variant::PsoPso, 5);
    c.search_hidden = true;
    let m = evolve_order(&raw, &c).unwrap();
    let (lo, hi) = HIDDEN_SEARCH_RANGE;
    assert!((lo..=hi).contains(&m.hidden_size));
    assert_eq!(m.weights.len(), weight_count(&m.lags, m.hidden_size));
}

#[test]
fn persisted_model_reproduces_fitness() {
    let raw = linear_siso(300, 8);
    let mut c = quick_config(Variant::PsoPso, 20);
    c.fitness_split = FitnessSplit::Train;
    let m = evolve_order(&raw, &c).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    m.save(&path).unwrap();
    let back = IdentifiedModel::load(&path).unwrap();
    assert_eq!(back, m);
    assert!((back.recompute_fitness(&raw).unwrap() - m.fitness).abs() <= 1e-9);
}

#[test]
fn incompatible_data_is_rejected() {
    let raw = linear_siso(200, 9);
    let m = evolve_order(&raw, &quick_config(Variant::PsoPso, 3)).unwrap();
    let other = Dataset::new(
        "other",
        1.0,
        vec![Channel::new("v", vec![0.0; 10])],
        vec![Channel::new("y", vec![0.0; 10])],
    )
    .unwrap();
    assert_eq!(m.recompute_fitness(&other).unwrap_err().kind(), "compatibility");
}
