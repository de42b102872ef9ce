//! Measurement operators for photon-counting heralding, heralded states and their probabilities.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{self, FockConfig, KronTerm, Mode, ModeOperator, TwoModeState};
use crate::linalg::{c, factorial, I};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Configuration {
    Parallel,
    Series,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum InputLight {
    Coherent { alpha: C64 },
    SinglePhoton,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    pub mu: f64,
    pub phi: f64,
    pub input: InputLight,
    pub configuration: Configuration,
    pub nbar_1: f64,
    pub nbar_2: f64,
}

impl ProtocolParams {
    pub fn new(
        mu: f64,
        phi: f64,
        input: InputLight,
        configuration: Configuration,
        nbar_1: f64,
        nbar_2: f64,
    ) -> Result<Self> {
        if !(mu >= 0.0) {
            return Err(Error::InvalidParameter(format!("mu = {mu} must be non-negative")));
        }
        if !(nbar_1 >= 0.0 && nbar_2 >= 0.0) {
            return Err(Error::InvalidParameter(format!("occupations ({nbar_1}, {nbar_2}) must be non-negative")));
        }
        Ok(Self { mu, phi, input, configuration, nbar_1, nbar_2 })
    }

    /// Parallel set-up, coherent input with alpha = 1, equal occupations.
    pub fn parallel(mu: f64, phi: f64, nbar: f64) -> Result<Self> {
        Self::new(mu, phi, InputLight::Coherent { alpha: c(1.0) }, Configuration::Parallel, nbar, nbar)
    }

    pub fn with_alpha(mut self, alpha: C64) -> Self {
        self.input = InputLight::Coherent { alpha };
        self
    }

    pub fn with_configuration(mut self, configuration: Configuration) -> Self {
        self.configuration = configuration;
        self
    }

    /// Interference visibility exp(-mu^2 (1 + nbar_1 + nbar_2) / 2).
    pub fn lambda(&self) -> f64 {
        (-self.mu * self.mu * (1.0 + self.nbar_1 + self.nbar_2) / 2.0).exp()
    }

    /// Displacement amplitude i mu / sqrt 2 of each momentum kick.
    pub fn beta(&self) -> C64 {
        I * (self.mu / 2f64.sqrt())
    }

    pub fn default_fock_config(&self) -> FockConfig {
        FockConfig::heuristic(self.nbar_1, self.nbar_2, self.mu)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ClickOutcome {
    pub m: u32,
    pub n: u32,
}

impl ClickOutcome {
    pub const ONE_ZERO: ClickOutcome = ClickOutcome { m: 1, n: 0 };
    pub const ZERO_ONE: ClickOutcome = ClickOutcome { m: 0, n: 1 };

    pub fn new(m: u32, n: u32) -> Self {
        Self { m, n }
    }
}

/// Amplitude prefactor of the (m, n) measurement operator.
pub fn amplitude_prefactor(input: InputLight, outcome: ClickOutcome) -> Result<C64> {
    let (m, n) = (outcome.m, outcome.n);
    match input {
        InputLight::Coherent { alpha } => {
            let k = m + n;
            Ok(c((-alpha.norm_sqr() / 2.0).exp()) * (alpha / 2.0).powu(k)
                / (factorial(m as u64) * factorial(n as u64)).sqrt())
        }
        InputLight::SinglePhoton => {
            if m + n != 1 {
                return Err(Error::ZeroOperator { m, n });
            }
            Ok(c(0.5))
        }
    }
}

/// Coefficients c[a] of u^a v^(m+n-a) in (u + v)^m (u - v)^n.
fn binomial_product(m: u32, n: u32) -> Vec<f64> {
    let mut poly = vec![1.0];
    let mut mul = |sign: f64| {
        let mut next = vec![0.0; poly.len() + 1];
        for (a, &k) in poly.iter().enumerate() {
            next[a + 1] += k;
            next[a] += sign * k;
        }
        poly = next;
    };
    for _ in 0..m {
        mul(1.0);
    }
    for _ in 0..n {
        mul(-1.0);
    }
    poly
}

fn matrix_power(m: &Array2<C64>, k: u32) -> Option<Array2<C64>> {
    if k == 0 {
        return None;
    }
    let mut out = m.clone();
    for _ in 1..k {
        out = out.dot(m);
    }
    Some(out)
}

/// Measurement operator for the (m, n) click outcome.
pub fn measurement_operator(params: &ProtocolParams, outcome: ClickOutcome, config: FockConfig) -> Result<ModeOperator> {
    let pref = amplitude_prefactor(params.input, outcome)?;
    let beta = params.beta();
    let d1 = fock::displacement_matrix(beta, config.cutoff_1)?;
    let d2 = fock::displacement_matrix(beta, config.cutoff_2)?;
    let total = outcome.m + outcome.n;
    let coeffs = binomial_product(outcome.m, outcome.n);
    let mut terms = Vec::new();
    for (a, &k) in coeffs.iter().enumerate() {
        if k == 0.0 {
            continue;
        }
        let a = a as u32;
        let b = total - a;
        let phase = (I * (b as f64 * params.phi)).exp();
        let term = match params.configuration {
            Configuration::Parallel => KronTerm {
                coeff: pref * phase * k,
                mode_1: matrix_power(&d1, a),
                mode_2: matrix_power(&d2, b),
            },
            Configuration::Series => KronTerm {
                coeff: pref * phase * k,
                mode_1: matrix_power(&d1, a),
                mode_2: matrix_power(&d2, a),
            },
        };
        terms.push(term);
    }
    Ok(ModeOperator::from_terms(
        config,
        terms,
        format!("Upsilon_{}{}", outcome.m, outcome.n),
    ))
}

/// Heralded state and its probability.
pub fn herald(state_in: &TwoModeState, params: &ProtocolParams, outcome: ClickOutcome) -> Result<(TwoModeState, f64)> {
    let ups = measurement_operator(params, outcome, state_in.config())?;
    let (state, p) = state_in.apply_and_normalize(&ups)?;
    if !(p > 1e-15) {
        return Err(Error::HeraldImpossible(p));
    }
    Ok((state, p))
}

/// Thermal input with the protocol's occupations, heralded on `outcome`.
pub fn heralded_thermal(params: &ProtocolParams, outcome: ClickOutcome, config: FockConfig) -> Result<(TwoModeState, f64)> {
    let input = fock::thermal_state(params.nbar_1, params.nbar_2, config)?;
    herald(&input, params, outcome)
}

/// Tr(Upsilon rho Upsilon^dag) evaluated in the Fock basis.
pub fn heralding_probability_numeric(state_in: &TwoModeState, params: &ProtocolParams, outcome: ClickOutcome) -> Result<f64> {
    let ups = measurement_operator(params, outcome, state_in.config())?;
    Ok(fock::expectation(state_in, &ups.adjoint().times(&ups))?.re)
}

/// Closed-form probability of the (1, 0) outcome for thermal inputs.
pub fn heralding_probability(params: &ProtocolParams) -> f64 {
    let n2 = match params.input {
        InputLight::Coherent { alpha } => (-alpha.norm_sqr()).exp() * alpha.norm_sqr() / 4.0,
        InputLight::SinglePhoton => 0.25,
    };
    2.0 * n2 * (1.0 + params.lambda() * params.phi.cos())
}

/// Unnormalized Fock vector of the ideal cat state.
pub fn cat_vector(mu: f64, phi: f64, configuration: Configuration, config: FockConfig) -> Result<Array1<C64>> {
    let beta = I * (mu / 2f64.sqrt());
    for cut in [config.cutoff_1, config.cutoff_2] {
        let tail = fock::coherent_tail(beta, cut);
        if tail > fock::DISPLACEMENT_TAIL_MAX {
            return Err(Error::CutoffTooSmall(format!("coherent tail {tail:.2e} at cutoff {cut}")));
        }
    }
    let a1 = fock::coherent_amplitudes(beta, config.cutoff_1);
    let a2 = fock::coherent_amplitudes(beta, config.cutoff_2);
    let mut v = Array1::zeros(config.dim());
    let phase = (I * phi).exp();
    match configuration {
        Configuration::Parallel => {
            for n1 in 0..config.cutoff_1 {
                v[config.index(n1, 0)] += a1[n1];
            }
            for n2 in 0..config.cutoff_2 {
                v[config.index(0, n2)] += phase * a2[n2];
            }
        }
        Configuration::Series => {
            for n1 in 0..config.cutoff_1 {
                for n2 in 0..config.cutoff_2 {
                    v[config.index(n1, n2)] += a1[n1] * a2[n2];
                }
            }
            v[config.index(0, 0)] += phase;
        }
    }
    Ok(v)
}

/// Normalized ideal two-mode cat state.
pub fn pure_cat_state(mu: f64, phi: f64, configuration: Configuration, config: FockConfig) -> Result<TwoModeState> {
    let v = cat_vector(mu, phi, configuration, config)?;
    let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    if norm < 1e-24 {
        return Err(Error::DegenerateHerald(format!("cat state vanishes at mu={mu}, phi={phi}")));
    }
    TwoModeState::pure(config, v)
}

/// Local unitary D_2(i mu / sqrt 2) R_2(pi) mapping parallel outputs onto series outputs.
pub fn parallel_to_series_map(mu: f64, config: FockConfig) -> Result<ModeOperator> {
    let d = fock::displacement(Mode::Two, I * (mu / 2f64.sqrt()), config)?;
    Ok(d.times(&ModeOperator::rotation(config, Mode::Two, std::f64::consts::PI)))
}

/// Probability that a coherent pulse of mean photon number `nbar` carries more than `k` photons.
pub fn poisson_tail(nbar: f64, k: u32) -> f64 {
    let mut term = (-nbar).exp();
    let mut cdf = 0.0;
    for j in 0..=k {
        cdf += term;
        term *= nbar / (j + 1) as f64;
    }
    (1.0 - cdf).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{entanglement_entropy, expectation, fidelity_with_pure, thermal_state};
    use crate::linalg::max_abs_diff;
    use std::f64::consts::PI;

    fn cfg(n: usize) -> FockConfig {
        FockConfig::symmetric(n).unwrap()
    }

    #[test]
    fn dark_port_at_zero_coupling() {
        let params = ProtocolParams::parallel(0.0, 0.0, 0.0).unwrap();
        let ups = measurement_operator(&params, ClickOutcome::ZERO_ONE, cfg(6)).unwrap();
        assert!(ups.matrix().iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn bright_port_at_zero_coupling_is_scaled_identity() {
        let params = ProtocolParams::parallel(0.0, 0.0, 0.0).unwrap();
        let ups = measurement_operator(&params, ClickOutcome::ONE_ZERO, cfg(6)).unwrap();
        let want = Array2::<C64>::eye(36) * c((-0.5f64).exp());
        assert!(max_abs_diff(&ups.matrix().view(), &want.view()) < 1e-15);
    }

    #[test]
    fn single_photon_rejects_multi_click() {
        let mut params = ProtocolParams::parallel(0.3, 0.0, 0.0).unwrap();
        params.input = InputLight::SinglePhoton;
        assert!(matches!(
            measurement_operator(&params, ClickOutcome::new(1, 1), cfg(6)),
            Err(Error::ZeroOperator { m: 1, n: 1 })
        ));
    }

    #[test]
    fn closed_form_probability_matches_trace() {
        let params = ProtocolParams::parallel(0.5, 0.0, 0.0).unwrap();
        let expect = (-1f64).exp() * 0.5 * (1.0 + (-0.125f64).exp());
        assert!((heralding_probability(&params) - expect).abs() < 1e-15);
        let input = thermal_state(0.0, 0.0, cfg(20)).unwrap();
        let num = heralding_probability_numeric(&input, &params, ClickOutcome::ONE_ZERO).unwrap();
        assert!((num - expect).abs() < 1e-8);
    }

    #[test]
    fn probability_vanishes_on_dark_fringe() {
        let params = ProtocolParams::parallel(0.0, PI, 0.0).unwrap();
        assert!(heralding_probability(&params).abs() < 1e-16);
        let input = thermal_state(0.0, 0.0, cfg(8)).unwrap();
        assert!(matches!(herald(&input, &params, ClickOutcome::ONE_ZERO), Err(Error::HeraldImpossible(_))));
    }

    #[test]
    fn ground_state_herald_is_the_cat_state() {
        let mu = 0.8;
        let params = ProtocolParams::parallel(mu, PI, 0.0).unwrap();
        let config = params.default_fock_config();
        let (out, _) = heralded_thermal(&params, ClickOutcome::ONE_ZERO, config).unwrap();
        let cat = cat_vector(mu, PI, Configuration::Parallel, config).unwrap();
        assert!(fidelity_with_pure(&out, &cat) > 1.0 - 1e-9);
        let ideal = pure_cat_state(mu, PI, Configuration::Parallel, config).unwrap();
        assert!(fidelity_with_pure(&ideal, &cat) > 1.0 - 1e-12);
    }

    #[test]
    fn weak_coupling_gives_a_bell_state() {
        let params = ProtocolParams::parallel(0.01, PI, 0.0).unwrap();
        let config = cfg(20);
        let (out, _) = heralded_thermal(&params, ClickOutcome::ONE_ZERO, config).unwrap();
        let mut bell = Array1::<C64>::zeros(config.dim());
        bell[config.index(0, 1)] = c(1.0);
        bell[config.index(1, 0)] = c(-1.0);
        assert!(fidelity_with_pure(&out, &bell) > 0.9999);
    }

    #[test]
    fn series_output_is_a_local_rotation_of_parallel_output() {
        for &(mu, phi, nbar) in &[(0.7, PI, 0.0), (0.5, 1.0, 0.2)] {
            let params = ProtocolParams::parallel(mu, phi, nbar).unwrap();
            let config = cfg(24);
            let input = thermal_state(nbar, nbar, config).unwrap();
            let (par, _) = herald(&input, &params, ClickOutcome::ONE_ZERO).unwrap();
            let (ser, _) = herald(&input, &params.with_configuration(Configuration::Series), ClickOutcome::ONE_ZERO).unwrap();
            let u = parallel_to_series_map(mu, config).unwrap();
            let (mapped, norm) = par.apply_and_normalize(&u).unwrap();
            assert!((norm - 1.0).abs() < 1e-8);
            let diff = max_abs_diff(&mapped.rho().view(), &ser.rho().view());
            assert!(diff < 1e-8, "difference {diff}");
        }
    }

    #[test]
    fn outcome_probabilities_sum_to_one() {
        let params = ProtocolParams::parallel(0.6, 0.4, 0.1).unwrap();
        let config = cfg(24);
        let input = thermal_state(0.1, 0.1, config).unwrap();
        let mut total = 0.0;
        for m in 0..=8 {
            for n in 0..=(8 - m) {
                total += heralding_probability_numeric(&input, &params, ClickOutcome::new(m, n)).unwrap();
            }
        }
        assert!((total - 1.0).abs() < 1e-10 + poisson_tail(1.0, 8));
    }

    #[test]
    fn zero_one_outcome_is_phase_shifted_one_zero() {
        let params = ProtocolParams::parallel(0.9, 0.3, 0.1).unwrap();
        let shifted = ProtocolParams { phi: 0.3 + PI, ..params };
        let config = cfg(24);
        let (a, pa) = heralded_thermal(&params, ClickOutcome::ZERO_ONE, config).unwrap();
        let (b, pb) = heralded_thermal(&shifted, ClickOutcome::ONE_ZERO, config).unwrap();
        assert!((pa - pb).abs() < 1e-12);
        assert!(max_abs_diff(&a.rho().view(), &b.rho().view()) < 1e-10);
    }

    #[test]
    fn single_photon_probability() {
        let mut params = ProtocolParams::parallel(0.9, 0.3, 0.1).unwrap();
        params.input = InputLight::SinglePhoton;
        let input = thermal_state(0.1, 0.1, cfg(24)).unwrap();
        let num = heralding_probability_numeric(&input, &params, ClickOutcome::ONE_ZERO).unwrap();
        assert!((num - heralding_probability(&params)).abs() < 1e-10);
    }

    #[test]
    fn momentum_of_heralded_state() {
        // For (|b>|0> + e^{i phi}|0>|b>)/N with b = i mu/sqrt2 the cross terms carry the
        // same overlap factor as N^2, so <P1> = mu/2 for every phi.
        let (mu, phi) = (0.5f64, PI);
        let config = cfg(20);
        let params = ProtocolParams::parallel(mu, phi, 0.0).unwrap();
        let (out, _) = heralded_thermal(&params, ClickOutcome::ONE_ZERO, config).unwrap();
        let p1 = expectation(&out, &ModeOperator::momentum(config, Mode::One)).unwrap();
        assert!((p1 - c(mu / 2.0)).norm() < 1e-9);
    }

    #[test]
    fn entanglement_peaks_at_pi() {
        let mu = 0.9;
        let config = cfg(20);
        let phis: Vec<f64> = (0..101).map(|k| 2.0 * PI * k as f64 / 100.0).collect();
        let ent: Vec<f64> = phis
            .iter()
            .map(|&phi| entanglement_entropy(&pure_cat_state(mu, phi, Configuration::Parallel, config).unwrap()).unwrap())
            .collect();
        let best = (0..ent.len()).max_by(|&a, &b| ent[a].total_cmp(&ent[b])).unwrap();
        assert!((phis[best] - PI).abs() < 1e-12);
    }

    #[test]
    fn large_coupling_approaches_one_ebit() {
        let config = cfg(60);
        let s = pure_cat_state(4.0, PI, Configuration::Parallel, config).unwrap();
        assert!((entanglement_entropy(&s).unwrap() - 2f64.ln()).abs() < 1e-3);
    }

    #[test]
    fn probability_is_maximal_at_unit_amplitude() {
        let base = ProtocolParams::parallel(0.5, PI / 3.0, 0.1).unwrap();
        let alphas: Vec<f64> = (1..=300).map(|k| k as f64 * 0.01).collect();
        let best = alphas
            .iter()
            .copied()
            .max_by(|&a, &b| {
                heralding_probability(&base.with_alpha(c(a))).total_cmp(&heralding_probability(&base.with_alpha(c(b))))
            })
            .unwrap();
        assert!((best - 1.0).abs() < 1e-12);
    }

    #[test]
    fn binomial_product_coefficients() {
        assert_eq!(binomial_product(1, 0), vec![1.0, 1.0]);
        assert_eq!(binomial_product(0, 1), vec![-1.0, 1.0]);
        assert_eq!(binomial_product(1, 1), vec![-1.0, 0.0, 1.0]);
    }
}
