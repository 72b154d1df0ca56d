mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spbe_core::belief::{condition_on_type, update, Belief, Prescription};
use spbe_core::game_model::{numeric_labels, RewardSchedule};
use spbe_core::GameSpec;

use common::oracle_update;

fn spec_with(types: &[usize], actions: &[usize]) -> GameSpec {
    let nx: usize = types.iter().product();
    let na: usize = actions.iter().product();
    GameSpec::new(
        1,
        types.iter().map(|&n| numeric_labels(n)).collect(),
        actions.iter().map(|&n| numeric_labels(n)).collect(),
        vec![1.0 / nx as f64; nx],
        RewardSchedule::Stationary(vec![vec![0.0; nx * na]; types.len()]),
        1.0,
    )
    .unwrap()
}

fn random_rows(spec: &GameSpec, rng: &mut ChaCha8Rng, zero_prob: f64) -> Vec<Vec<Vec<f64>>> {
    (0..spec.num_players())
        .map(|i| {
            (0..spec.types().size(i))
                .map(|_| {
                    let na = spec.actions().size(i);
                    let mut row: Vec<f64> = (0..na)
                        .map(|_| {
                            if rng.gen_bool(zero_prob) {
                                0.0
                            } else {
                                rng.gen_range(0.01..1.0)
                            }
                        })
                        .collect();
                    if row.iter().all(|&p| p == 0.0) {
                        row[rng.gen_range(0..na)] = 1.0;
                    }
                    let total: f64 = row.iter().sum();
                    row.iter().map(|p| p / total).collect()
                })
                .collect()
        })
        .collect()
}

fn random_belief(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let w: Vec<f64> = (0..n)
        .map(|_| {
            if rng.gen_bool(0.2) {
                0.0
            } else {
                rng.gen_range(0.0..1.0)
            }
        })
        .collect();
    let total: f64 = w.iter().sum();
    if total == 0.0 {
        return vec![1.0 / n as f64; n];
    }
    w.iter().map(|v| v / total).collect()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, ..ProptestConfig::default() })]

    #[test]
    fn three_player_updates_match_the_oracle(seed in any::<u64>()) {
        let spec = spec_with(&[2, 3, 2], &[2, 2, 3]);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pi = random_belief(spec.types().len(), &mut rng);
        let rows = random_rows(&spec, &mut rng, 0.3);
        let gamma = Prescription::from_rows(rows.clone());
        let a = rng.gen_range(0..spec.actions().len());
        let got = update(&spec, &Belief::new(pi.clone()).unwrap(), &gamma, a);
        let want = oracle_update(&spec, &pi, &rows, a);
        for (g, w) in got.weights().iter().zip(&want) {
            prop_assert!((g - w).abs() <= 1e-12);
        }
        // the support never grows
        for (g, p) in got.weights().iter().zip(&pi) {
            prop_assert!(*p > 0.0 || *g == 0.0);
        }
        let total: f64 = got.weights().iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn conditionals_match_explicit_division(seed in any::<u64>(), player in 0usize..3) {
        let spec = spec_with(&[2, 3, 2], &[1, 1, 1]);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pi = random_belief(spec.types().len(), &mut rng);
        let types = spec.types();
        for xi in 0..types.size(player) {
            let mu = condition_on_type(&spec, &Belief::new(pi.clone()).unwrap(), player, xi);
            let own: Vec<usize> = (0..types.len()).filter(|&x| types.component(x, player) == xi).collect();
            let mass: f64 = own.iter().map(|&x| pi[x]).sum();
            prop_assert_eq!(mu.degenerate, mass <= 1e-12);
            for &x in &own {
                let rest = types.drop_component(x, player);
                let want = if mass <= 1e-12 { 1.0 / own.len() as f64 } else { pi[x] / mass };
                prop_assert!((mu.weights[rest] - want).abs() <= 1e-12);
            }
        }
    }
}

/// Equal arguments give bit-identical outputs no matter how they were produced.
#[test]
fn update_is_a_pure_function_of_its_arguments() {
    let spec = spec_with(&[2, 2], &[2, 2]);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let rows = random_rows(&spec, &mut rng, 0.0);
    let pi = Belief::new(vec![0.4, 0.1, 0.1, 0.4]).unwrap();
    let a = update(&spec, &pi, &Prescription::from_rows(rows.clone()), 2);
    let rebuilt: Vec<Vec<Vec<f64>>> =
        serde_json::from_str(&serde_json::to_string(&rows).unwrap()).unwrap();
    let b = update(&spec, &pi.clone(), &Prescription::from_rows(rebuilt), 2);
    assert_eq!(
        a.weights().iter().map(|w| w.to_bits()).collect::<Vec<_>>(),
        b.weights().iter().map(|w| w.to_bits()).collect::<Vec<_>>()
    );
}

#[test]
fn independent_prior_conditions_to_the_marginal() {
    let spec = spec_with(&[2, 3], &[1, 1]);
    let p0 = [0.3, 0.7];
    let p1 = [0.2, 0.5, 0.3];
    let joint: Vec<f64> = p0
        .iter()
        .flat_map(|a| p1.iter().map(move |b| a * b))
        .collect();
    let pi = Belief::new(joint).unwrap();
    for xi in 0..2 {
        let mu = condition_on_type(&spec, &pi, 0, xi);
        for (m, p) in mu.weights.iter().zip(&p1) {
            assert!((m - p).abs() < 1e-15);
        }
    }
    for xi in 0..3 {
        let mu = condition_on_type(&spec, &pi, 1, xi);
        for (m, p) in mu.weights.iter().zip(&p0) {
            assert!((m - p).abs() < 1e-15);
        }
    }
}
