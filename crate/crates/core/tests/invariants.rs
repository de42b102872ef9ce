use std::f64::consts::PI;

use proptest::prelude::*;

use mechcat_core::analytic::heralded_moments;
use mechcat_core::criteria::{build_d5, build_s3};
use mechcat_core::detector::{true_positive_fraction, DetectorParams};
use mechcat_core::fock::{thermal_state, FockConfig};
use mechcat_core::herald::{heralded_thermal, heralding_probability, heralding_probability_numeric, ClickOutcome, ProtocolParams};
use mechcat_core::linalg::{c, I};
use mechcat_core::moments::{canonicalize, moments_from_state, MomentTable, Monomial, Polynomial, Quad, QuadWord};
use mechcat_core::sideband::{mu_deficit, mu_effective, mu_nominal, CavityParams};
use mechcat_core::verify::{dataset_models, default_pathways, recover_moments, sample_all, Port, DEFAULT_CHI};

fn quad() -> impl Strategy<Value = Quad> {
    prop_oneof![Just(Quad::X1), Just(Quad::P1), Just(Quad::X2), Just(Quad::P2)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn heralding_probability_matches_trace(mu in 0.01f64..1.2, nbar in 0.0f64..0.3, phi in 0.0f64..2.0 * PI) {
        let params = ProtocolParams::parallel(mu, phi, nbar).unwrap();
        let input = thermal_state(nbar, nbar, params.default_fock_config()).unwrap();
        let numeric = heralding_probability_numeric(&input, &params, ClickOutcome::ONE_ZERO).unwrap();
        prop_assert!((numeric - heralding_probability(&params)).abs() < 1e-8);
    }

    #[test]
    fn heralded_states_are_physical(mu in 0.05f64..1.5, nbar in 0.0f64..0.2, phi in 0.1f64..2.0 * PI) {
        let params = ProtocolParams::parallel(mu, phi, nbar).unwrap();
        let (state, p) = heralded_thermal(&params, ClickOutcome::ONE_ZERO, params.default_fock_config()).unwrap();
        prop_assert!(p > 0.0 && p <= 1.0);
        state.validate().unwrap();
        prop_assert!((state.trace() - c(1.0)).norm() < 1e-10);
    }

    #[test]
    fn analytic_moments_match_fock_moments(mu in 0.05f64..1.0, nbar in 0.0f64..0.2, phi in 0.1f64..2.0 * PI) {
        let params = ProtocolParams::parallel(mu, phi, nbar).unwrap();
        let analytic = heralded_moments(&params, ClickOutcome::ONE_ZERO, 4).unwrap();
        let (state, _) = heralded_thermal(&params, ClickOutcome::ONE_ZERO, params.default_fock_config()).unwrap();
        let fock = moments_from_state(&state, 4).unwrap();
        for m in Monomial::up_to_order(4) {
            prop_assert!((analytic.get(m).unwrap() - fock.get(m).unwrap()).norm() < 1e-7, "{}", m);
        }
    }

    #[test]
    fn product_thermal_states_pass_both_criteria(n1 in 0.0f64..2.0, n2 in 0.0f64..2.0) {
        let table = moments_from_state(&thermal_state(n1, n2, FockConfig::heuristic(n1, n2, 0.0)).unwrap(), 4).unwrap();
        prop_assert!(build_d5(&table).unwrap().value >= -1e-10);
        prop_assert!(build_s3(&table).unwrap().value >= -1e-10);
    }

    #[test]
    fn canonical_form_respects_commutators(mut word in prop::collection::vec(quad(), 2..7), k in 0usize..5) {
        let k = k % (word.len() - 1);
        let original = canonicalize(&QuadWord(word.clone())).unwrap();
        let (a, b) = (word[k], word[k + 1]);
        word.swap(k, k + 1);
        let swapped = canonicalize(&QuadWord(word.clone())).unwrap();
        // Replace the adjacent pair by its commutator [a, b] = i for (X, P) of one mode.
        let comm = match (a, b) {
            (Quad::X1, Quad::P1) | (Quad::X2, Quad::P2) => I,
            (Quad::P1, Quad::X1) | (Quad::P2, Quad::X2) => -I,
            _ => c(0.0),
        };
        let mut rest = word.clone();
        rest.drain(k..k + 2);
        let correction = if rest.is_empty() { Polynomial::one() } else { canonicalize(&QuadWord(rest)).unwrap() };
        let diff = original.plus(&swapped.scale(c(-1.0))).plus(&correction.scale(-comm));
        prop_assert!(diff.terms().all(|(_, v)| v.norm() < 1e-9));
    }

    #[test]
    fn moment_table_json_round_trips(mu in 0.05f64..1.0, phi in 0.0f64..2.0 * PI) {
        let table = heralded_moments(&ProtocolParams::parallel(mu, phi, 0.1).unwrap(), ClickOutcome::ONE_ZERO, 4).unwrap();
        let back = MomentTable::from_json(&table.to_json()).unwrap();
        prop_assert_eq!(back.entries(), table.entries());
    }

    #[test]
    fn fractions_are_probabilities(mu in 1e-4f64..1.0, alpha in 0.01f64..3.0, eta in 0.1f64..1.0, resolving: bool) {
        let protocol = ProtocolParams::parallel(mu, PI, 0.1).unwrap();
        let det = DetectorParams::new(eta, 1e-8, resolving, c(alpha)).unwrap();
        let f = true_positive_fraction(&det, &protocol).unwrap();
        prop_assert!((0.0..=1.0).contains(&f));
    }

    #[test]
    fn sideband_coupling_never_exceeds_nominal(g0 in 1.0f64..1e6, kappa in 1e3f64..1e10, ratio in 0.0f64..0.5) {
        let cav = CavityParams::new(g0, kappa, ratio * kappa).unwrap();
        let (mu, _) = mu_effective(&cav, cav.pulse_time());
        prop_assert!(mu <= mu_nominal(&cav) * (1.0 + 1e-12));
        let deficit = mu_deficit(&cav, cav.pulse_time());
        prop_assert!((0.0..1.0).contains(&deficit));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn noiseless_recovery_is_exact(mu in 0.1f64..1.5, phi in 0.0f64..2.0 * PI, nbar in 0.0f64..0.3) {
        let table = heralded_moments(&ProtocolParams::parallel(mu, phi, nbar).unwrap(), ClickOutcome::ONE_ZERO, 6).unwrap();
        let models = dataset_models(&default_pathways(3, phi, DEFAULT_CHI).unwrap(), &Port::ALL, &table, 3).unwrap();
        let rec = recover_moments(&sample_all(&models, None, 0), 3).unwrap();
        for m in Monomial::up_to_order(3) {
            prop_assert!((rec.get(m).unwrap() - table.get(m).unwrap()).norm() < 1e-8, "{}", m);
        }
    }
}
