use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use soc_market::analysis::HitLog;
use soc_market::lattice::{
    compute_signals, draw_zero_sum_triple, LatticeConfig, Simulation, TieBreak,
};

#[test]
fn initial_field_has_unit_variance_across_seeds() {
    let first: Vec<f64> = (0..1000u64)
        .map(|seed| {
            let cfg = LatticeConfig::new(780, 1.0, seed).unwrap();
            Simulation::new(&cfg).unwrap().state().returns()[0]
        })
        .collect();
    let mean = first.iter().sum::<f64>() / 1000.0;
    let var = first.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 999.0;
    assert!((0.9..=1.1).contains(&var), "variance {var}");
}

#[test]
fn projected_triples_have_two_thirds_marginal_variance() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut sumsq = [0.0f64; 3];
    let draws = 1_000_000;
    for _ in 0..draws {
        let t = draw_zero_sum_triple(&mut rng, 1.0);
        assert!((t[0] + t[1] + t[2]).abs() < 1e-12);
        for k in 0..3 {
            sumsq[k] += t[k] * t[k];
        }
    }
    for s in sumsq {
        let var = s / draws as f64;
        assert!((0.65..=0.69).contains(&var), "variance {var}");
    }
}

#[test]
fn scaled_variance_scales_the_trajectory() {
    let lambda: f64 = 2e-5;
    let base = LatticeConfig::new(780, 1.0, 31).unwrap();
    let scaled = LatticeConfig::new(780, lambda, 31).unwrap();
    let mut a = Simulation::new(&base).unwrap();
    let mut b = Simulation::new(&scaled).unwrap();
    for s in 0..50_000 {
        assert_eq!(a.step().site, b.step().site, "step {s}");
    }
    let k = lambda.sqrt();
    for (x, y) in a.state().returns().iter().zip(b.state().returns()) {
        assert!(
            (k * x - y).abs() <= 1e-9 * (k * x).abs().max(1e-300),
            "{x} {y}"
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn cache_matches_recomputation(seed in any::<u64>(), n in 4usize..60, steps in 0u64..400, random_ties in any::<bool>()) {
        let tie = if random_ties { TieBreak::RandomAmongTies } else { TieBreak::LowestIndex };
        let cfg = LatticeConfig::new(n, 1.0, seed).unwrap().with_tie_break(tie);
        let mut sim = Simulation::new(&cfg).unwrap();
        for _ in 0..steps {
            sim.step();
            let st = sim.state();
            prop_assert_eq!(st.signals(), &compute_signals(st.returns())[..]);
            let max = st.signals().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert_eq!(st.global_signal().0, max);
        }
    }

    #[test]
    fn hits_are_conserved(seed in any::<u64>(), steps in 0u64..2000) {
        let cfg = LatticeConfig::new(50, 1.0, seed).unwrap();
        let mut sim = Simulation::new(&cfg).unwrap();
        let mut log = HitLog::new();
        sim.run(steps, &mut [&mut log]);
        let total: u64 = sim.state().hits().iter().sum();
        prop_assert_eq!(total, 3 * steps);
        prop_assert_eq!(log.len() as u64, 3 * steps);
        prop_assert_eq!(sim.state().step(), steps);
    }

    #[test]
    fn updates_preserve_triple_sum_to_zero(seed in any::<u64>()) {
        let cfg = LatticeConfig::new(30, 2.0, seed).unwrap();
        let mut sim = Simulation::new(&cfg).unwrap();
        for _ in 0..100 {
            let e = sim.step();
            prop_assert!(e.drawn.iter().sum::<f64>().abs() < 1e-12);
            for (k, j) in e.sites(31).into_iter().enumerate() {
                prop_assert_eq!(sim.state().returns()[j], e.drawn[k]);
            }
        }
    }
}
