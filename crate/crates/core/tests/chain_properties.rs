mod common;

use common::{any_model, chain};
use entropy_decay::chain::check_reversibility;
use entropy_decay::models::{preset_ultra_log_concave, ModelSpec};
use proptest::prelude::*;

proptest! {
    #[test]
    fn generator_rows_and_rates(spec in any_model()) {
        let ch = chain(&spec);
        let gen = &ch.generator;
        let scale = gen.max_rate().max(1.0);
        for i in 0..ch.n_states() {
            let mut sum = 0.0;
            for (j, v) in gen.matrix().row(i) {
                if j != i {
                    prop_assert!(v >= 0.0);
                }
                sum += v;
            }
            prop_assert!(sum.abs() <= 1e-12 * scale, "row {} sums to {}", i, sum);
        }
    }

    #[test]
    fn measure_is_reversible_and_stationary(spec in any_model()) {
        let ch = chain(&spec);
        let rev = check_reversibility(&ch.generator, &ch.measure, 1e-12);
        prop_assert!(rev.passed, "relative violation {:e}", rev.max_rel_violation);
        let n = ch.n_states();
        let w = ch.measure.weights();
        let mut left = vec![0.0; n];
        for (i, wi) in w.iter().enumerate() {
            for (j, v) in ch.generator.matrix().row(i) {
                left[j] += wi * v;
            }
        }
        let worst = left.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        prop_assert!(worst < 1e-10 * ch.generator.max_rate().max(1.0));
    }

    #[test]
    fn inverse_moves_return(spec in any_model()) {
        let ch = chain(&spec);
        let gen = &ch.generator;
        for i in 0..ch.n_states() {
            for (mv, target, rate) in gen.transitions(i) {
                if rate > 0.0 {
                    prop_assert_eq!(gen.target(target, gen.moves().inverse(mv)), i);
                }
            }
        }
    }

    #[test]
    fn ultra_log_concave_increments(slopes in prop::collection::vec(-2.0f64..1.0, 3..20)) {
        let mut slopes = slopes;
        slopes.sort_by(|a, b| b.total_cmp(a));
        let mut gamma = vec![1.0];
        let mut lg = 0.0;
        for s in &slopes {
            lg += s;
            gamma.push(lg.exp());
        }
        let preset = preset_ultra_log_concave(&gamma).unwrap();
        let ModelSpec::BirthDeath { death, .. } = &preset.spec else { unreachable!() };
        let b1 = death[1];
        for n in 0..death.len() - 1 {
            prop_assert!(death[n + 1] - death[n] >= b1 * (1.0 - 1e-12));
        }
        prop_assert_eq!(preset.certified, Some(b1));
        let ch = chain(&preset.spec);
        prop_assert!(check_reversibility(&ch.generator, &ch.measure, 1e-12).passed);
    }
}
