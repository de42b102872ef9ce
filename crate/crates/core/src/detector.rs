//! False-positive heralds from optical loss and dark counts.
//!
//! Closed-form true-positive fractions for number-resolving and threshold detectors,
//! an optimizer over the pulse amplitude, and a Fock-space oracle that sums the
//! explicit lossy outcome probabilities P_mnkl.

use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{displacement_matrix, thermal_populations, FockConfig};
use crate::herald::{heralding_probability, poisson_tail, InputLight, ProtocolParams};
use crate::linalg::{self, binomial, c, factorial, I};

/// Default dark-count rate (1/s) and detection window (s).
pub const DEFAULT_DARK_RATE: f64 = 1.0;
pub const DEFAULT_WINDOW: f64 = 10e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorParams {
    /// Intensity transmission, including detector efficiency.
    pub eta: f64,
    /// Probability of one dark count per detection window.
    pub dark_prob: f64,
    pub resolving: bool,
    pub alpha: C64,
}

impl DetectorParams {
    pub fn new(eta: f64, dark_prob: f64, resolving: bool, alpha: C64) -> Result<Self> {
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::InvalidParameter(format!("eta must lie in (0, 1], got {eta}")));
        }
        if !(0.0..1.0).contains(&dark_prob) {
            return Err(Error::InvalidParameter(format!("dark-count probability must lie in [0, 1), got {dark_prob}")));
        }
        Ok(Self { eta, dark_prob, resolving, alpha })
    }

    /// Dark-count probability from a rate and a detection window.
    pub fn from_rate(eta: f64, rate: f64, window: f64, resolving: bool, alpha: C64) -> Result<Self> {
        Self::new(eta, rate * window, resolving, alpha)
    }

    pub fn with_alpha(mut self, alpha: C64) -> Self {
        self.alpha = alpha;
        self
    }
}

fn check_coherent(protocol: &ProtocolParams) -> Result<()> {
    match protocol.input {
        InputLight::Coherent { .. } => Ok(()),
        InputLight::SinglePhoton => Err(Error::InvalidParameter(
            "true-positive fractions are defined for coherent input".into(),
        )),
    }
}

/// P10 of the lossless interferometer at the detector's pulse amplitude.
fn p10(det: &DetectorParams, protocol: &ProtocolParams) -> Result<f64> {
    check_coherent(protocol)?;
    let p = heralding_probability(&protocol.with_alpha(det.alpha));
    if !(p >= 1e-300) {
        return Err(Error::DegenerateHerald(format!("P10 = {p:.3e}")));
    }
    Ok(p)
}

/// F = [e^{(1-eta)|a|^2} + e^{-eta|a|^2} D / (eta P10 (1 - D))]^{-1}.
pub fn true_positive_fraction_resolving(det: &DetectorParams, protocol: &ProtocolParams) -> Result<f64> {
    let p = p10(det, protocol)?;
    let a2 = det.alpha.norm_sqr();
    let inv = ((1.0 - det.eta) * a2).exp() + (-det.eta * a2).exp() * det.dark_prob / (det.eta * p * (1.0 - det.dark_prob));
    Ok(1.0 / inv)
}

/// Multi-photon sum L = sum_{m>=1} (eta|a|^2/4)^m / m! sum_k C(2m,k) cos((m-k) phi) lambda^{(m-k)^2}.
///
/// Stops once m exceeds eta|a|^2 and (eta|a|^2)^m / m! < 1e-12, which bounds every later
/// term; hard cap m <= 60.
pub fn multiphoton_sum(det: &DetectorParams, protocol: &ProtocolParams) -> f64 {
    let x = det.eta * det.alpha.norm_sqr();
    let lambda = protocol.lambda();
    let mut total = 0.0;
    let mut bound = 1.0;
    for m in 1..=60u32 {
        bound *= x / m as f64;
        let mut inner = 0.0;
        for k in 0..=2 * m {
            let d = m as i64 - k as i64;
            inner += binomial(2 * m as u64, k as u64) / 4f64.powi(m as i32)
                * (d as f64 * protocol.phi).cos()
                * lambda.powi((d * d) as i32);
        }
        total += bound * inner;
        if m as f64 > x && bound < 1e-12 {
            break;
        }
    }
    total
}

/// F = [e^{-eta|a|^2} (L + D) / (eta P10)]^{-1}.
pub fn true_positive_fraction_nonresolving(det: &DetectorParams, protocol: &ProtocolParams) -> Result<f64> {
    let p = p10(det, protocol)?;
    let a2 = det.alpha.norm_sqr();
    let l = multiphoton_sum(det, protocol);
    Ok(det.eta * p / ((-det.eta * a2).exp() * (l + det.dark_prob)))
}

pub fn true_positive_fraction(det: &DetectorParams, protocol: &ProtocolParams) -> Result<f64> {
    if det.resolving {
        true_positive_fraction_resolving(det, protocol)
    } else {
        true_positive_fraction_nonresolving(det, protocol)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaOptimum {
    pub alpha: f64,
    pub fraction: f64,
    /// The objective varied by less than 1e-12 over the scan.
    pub flat: bool,
}

/// Maximizes F over real alpha in (0, 4]: a coarse scan, then golden-section refinement to 1e-6.
pub fn optimize_alpha(det: &DetectorParams, protocol: &ProtocolParams) -> Result<AlphaOptimum> {
    const N: usize = 400;
    const HI: f64 = 4.0;
    let f = |a: f64| true_positive_fraction(&det.with_alpha(c(a)), protocol);
    let grid: Vec<f64> = (1..=N).map(|k| HI * k as f64 / N as f64).collect();
    let values: Vec<f64> = grid.iter().map(|&a| f(a)).collect::<Result<_>>()?;
    let (best, &fbest) = values.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
    let fmin = values.iter().copied().fold(f64::INFINITY, f64::min);
    if fbest - fmin < 1e-12 {
        return Ok(AlphaOptimum { alpha: grid[best], fraction: fbest, flat: true });
    }
    let step = HI / N as f64;
    let mut lo = (grid[best] - step).max(1e-9);
    let mut hi = (grid[best] + step).min(HI);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1)?, f(x2)?);
    while hi - lo > 1e-6 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2)?;
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1)?;
        }
    }
    let a = 0.5 * (lo + hi);
    let fa = f(a)?;
    if fa >= fbest {
        Ok(AlphaOptimum { alpha: a, fraction: fa, flat: false })
    } else {
        Ok(AlphaOptimum { alpha: grid[best], fraction: fbest, flat: false })
    }
}

/// Outcome of the lossy interferometer: m, n photons detected, k, l lost from the two arms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LossOutcome {
    pub m: u32,
    pub n: u32,
    pub k: u32,
    pub l: u32,
}

/// Default photon-number truncation of the loss oracle.
pub const ORACLE_TRUNCATION: u32 = 8;

/// Fock-space evaluation of P_mnkl for the parallel configuration with thermal mechanics.
pub struct LossOracle {
    eta: f64,
    alpha: C64,
    phi: f64,
    truncation: u32,
    /// d1[j] = D(beta)^j on mode 1, likewise for mode 2.
    d1: Vec<Array2<C64>>,
    d2: Vec<Array2<C64>>,
    rho1: Array2<C64>,
    rho2: Array2<C64>,
}

impl LossOracle {
    pub fn new(det: &DetectorParams, protocol: &ProtocolParams, truncation: u32, config: FockConfig) -> Result<Self> {
        check_coherent(protocol)?;
        let beta = protocol.beta();
        let powers = |cut: usize| -> Result<Vec<Array2<C64>>> {
            let d = displacement_matrix(beta, cut)?;
            let mut out = vec![Array2::<C64>::eye(cut)];
            for j in 1..=truncation as usize {
                let next = out[j - 1].dot(&d);
                out.push(next);
            }
            Ok(out)
        };
        // D^j must stay inside the retained levels for every j used.
        displacement_matrix(beta * truncation as f64, config.cutoff_1)?;
        displacement_matrix(beta * truncation as f64, config.cutoff_2)?;
        let diag = |n: f64, cut: usize| -> Result<Array2<C64>> {
            Ok(Array2::from_diag(&thermal_populations(n, cut)?.mapv(c)))
        };
        Ok(Self {
            eta: det.eta,
            alpha: det.alpha,
            phi: protocol.phi,
            truncation,
            d1: powers(config.cutoff_1)?,
            d2: powers(config.cutoff_2)?,
            rho1: diag(protocol.nbar_1, config.cutoff_1)?,
            rho2: diag(protocol.nbar_2, config.cutoff_2)?,
        })
    }

    pub fn truncation(&self) -> u32 {
        self.truncation
    }

    /// P_mnkl = Tr[Y rho Y^dag] with
    /// Y = pref (D1 + e^{i phi} D2)^m (D1 - e^{i phi} D2)^n D1^k (e^{i phi} D2)^l.
    pub fn probability(&self, o: LossOutcome) -> Result<f64> {
        let total = o.m + o.n + o.k + o.l;
        if total > self.truncation {
            return Err(Error::TruncationTooSmall { truncation: self.truncation, total });
        }
        let a = self.alpha;
        let (se, sl) = (self.eta.sqrt(), (1.0 - self.eta).sqrt());
        let pref = (-a.norm_sqr() / 2.0).exp()
            * (se * a.norm() / 2.0).powi((o.m + o.n) as i32)
            * (sl * a.norm() / 2f64.sqrt()).powi((o.k + o.l) as i32)
            / (factorial(o.m as u64) * factorial(o.n as u64) * factorial(o.k as u64) * factorial(o.l as u64)).sqrt();
        if pref == 0.0 {
            return Ok(0.0);
        }
        // Expand into sum_{a,b} coef D1^a D2^b; the global phase of each term is irrelevant.
        let e = (I * self.phi).exp();
        let mut terms: std::collections::BTreeMap<(u32, u32), C64> = Default::default();
        for i in 0..=o.m {
            for j in 0..=o.n {
                let sign = if (o.n - j) % 2 == 0 { 1.0 } else { -1.0 };
                let coef = binomial(o.m as u64, i as u64) * binomial(o.n as u64, j as u64) * sign
                    * e.powu(o.m - i + o.n - j + o.l);
                *terms.entry((i + j + o.k, o.m - i + o.n - j + o.l)).or_insert(c(0.0)) += coef;
            }
        }
        let terms: Vec<((u32, u32), C64)> = terms.into_iter().collect();
        let mut p = c(0.0);
        for &((a1, b1), c1) in &terms {
            for &((a2, b2), c2) in &terms {
                let t1 = linalg::trace(&linalg::adjoint(&self.d1[a1 as usize].view()).dot(&self.d1[a2 as usize]).dot(&self.rho1).view());
                let t2 = linalg::trace(&linalg::adjoint(&self.d2[b1 as usize].view()).dot(&self.d2[b2 as usize]).dot(&self.rho2).view());
                p += c1.conj() * c2 * t1 * t2;
            }
        }
        Ok(pref * pref * p.re)
    }

    /// Sum of P_mnkl over all outcomes inside the truncation.
    pub fn total_probability(&self) -> Result<f64> {
        let mut s = 0.0;
        let t = self.truncation;
        for m in 0..=t {
            for n in 0..=t - m {
                for k in 0..=t - m - n {
                    for l in 0..=t - m - n - k {
                        s += self.probability(LossOutcome { m, n, k, l })?;
                    }
                }
            }
        }
        Ok(s)
    }

    /// Mass of the coherent pulse beyond the truncation, which bounds what the sums miss.
    pub fn tail_bound(&self) -> f64 {
        poisson_tail(self.alpha.norm_sqr(), self.truncation)
    }

    /// sum_kl P_{m n k l} over k + l within the truncation.
    fn lost_sum(&self, m: u32, n: u32) -> Result<f64> {
        let mut s = 0.0;
        let left = self.truncation - m - n;
        for k in 0..=left {
            for l in 0..=left - k {
                s += self.probability(LossOutcome { m, n, k, l })?;
            }
        }
        Ok(s)
    }

    /// True-positive fraction assembled from the outcome probabilities by Bayes' rule.
    pub fn true_positive_fraction(&self, dark_prob: f64, resolving: bool) -> Result<f64> {
        let true_p = self.probability(LossOutcome { m: 1, n: 0, k: 0, l: 0 })?;
        let dark = dark_prob * self.lost_sum(0, 0)?;
        if resolving {
            let clicks = (1.0 - dark_prob) * self.lost_sum(1, 0)? + dark;
            Ok((1.0 - dark_prob) * true_p / clicks)
        } else {
            let mut clicks = dark;
            for m in 1..=self.truncation {
                clicks += self.lost_sum(m, 0)?;
            }
            Ok(true_p / clicks)
        }
    }
}

/// Fock-oracle P_mnkl with default cutoffs and truncation.
pub fn loss_oracle_fock(det: &DetectorParams, protocol: &ProtocolParams, outcome: LossOutcome) -> Result<f64> {
    let config = FockConfig::heuristic(protocol.nbar_1, protocol.nbar_2, protocol.mu * ORACLE_TRUNCATION as f64);
    LossOracle::new(det, protocol, ORACLE_TRUNCATION, config)?.probability(outcome)
}
