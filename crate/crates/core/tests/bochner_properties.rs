mod common;

use common::{any_model, bernoulli_laplace, chain, monotone_birth_death, positive_function, signed_function, zero_range_condition_b};
use entropy_decay::bochner::{bochner_sides, canonical_r, certified_kappa, gamma_form};
use entropy_decay::functionals::{mlsi_form, second_derivative_form};
use entropy_decay::ModelSpec;
use proptest::prelude::*;

fn certifiable() -> impl Strategy<Value = ModelSpec> {
    prop_oneof![monotone_birth_death(12), zero_range_condition_b(), bernoulli_laplace(1.0, 1.8)]
}

proptest! {
    #[test]
    fn bochner_identity(spec in any_model(), seed in any::<u64>()) {
        let ch = chain(&spec);
        let r = canonical_r(&spec, &ch.generator).unwrap();
        let n = ch.n_states();
        let f = signed_function(seed, n);
        let g = signed_function(seed ^ 0x9e37, n);
        let s = bochner_sides(&r, &ch.generator, &ch.measure, &f, &g).unwrap();
        prop_assert!(s.relative_residual() <= 1e-12, "residual {:e}", s.relative_residual());
    }

    #[test]
    fn second_derivative_dominates_gamma_form(spec in any_model(), seed in any::<u64>()) {
        let ch = chain(&spec);
        let r = canonical_r(&spec, &ch.generator).unwrap();
        let f = positive_function(seed, ch.n_states(), 2.0);
        let s = second_derivative_form(&ch.generator, &ch.measure, &f).unwrap();
        let g = gamma_form(&ch.generator, &ch.measure, &r, &f).unwrap();
        prop_assert!(s - g >= -1e-11 * s.abs().max(g.abs()).max(1e-300), "{} < {}", s, g);
    }

    #[test]
    fn certificate_bounds_gamma_form(spec in certifiable(), seed in any::<u64>()) {
        let cert = certified_kappa(&spec).unwrap();
        prop_assume!(cert.is_certified() && cert.kappa > 0.0);
        prop_assert_eq!(cert.kappa_from_witness(), cert.kappa);
        let ch = chain(&spec);
        let r = canonical_r(&spec, &ch.generator).unwrap();
        let f = positive_function(seed, ch.n_states(), 1.5);
        let g = gamma_form(&ch.generator, &ch.measure, &r, &f).unwrap();
        let s = second_derivative_form(&ch.generator, &ch.measure, &f).unwrap();
        let e = mlsi_form(&ch.generator, &ch.measure, &f).unwrap();
        let tol = 1e-11 * s.abs().max(1e-300);
        prop_assert!(g >= cert.kappa * e - tol, "{} < {} * {}", g, cert.kappa, e);
        prop_assert!(s >= cert.kappa * e - tol);
    }
}
