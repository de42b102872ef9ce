//! Damped, rethermalizing mechanical evolution applied at the level of moments.
//!
//! Each quadrature letter is replaced by its Heisenberg-Langevin solution
//! e^{-gt/2}[a X(0) + b P(0) + dQ(t)], where the bath term dQ is a classical Gaussian
//! process independent of the initial state. Words are expanded multinomially and the
//! bath moments factorized with Isserlis' theorem.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{binomial, c, factorial};
use crate::moments::{symmetrized_polynomial, ModePoly, Monomial, MomentTable, Polynomial, D_MAX};

/// Strength C in <xi(t) xi(t')> = C delta(t - t').
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum BathCorrelator {
    /// C = 2 nbar_B + 1.
    #[default]
    TwoNbarPlusOne,
    /// C = nbar_B + 1/2, for which the stationary position variance is nbar_B + 1/2.
    NbarPlusHalf,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvParams {
    /// Mechanical angular frequency (rad/s).
    pub omega_m: f64,
    /// Q = omega_m / gamma; `f64::INFINITY` for a closed system.
    pub q_factor: f64,
    pub nbar_bath: f64,
    #[serde(default)]
    pub correlator: BathCorrelator,
}

impl EnvParams {
    pub fn new(omega_m: f64, q_factor: f64, nbar_bath: f64) -> Result<Self> {
        if !(omega_m > 0.0 && omega_m.is_finite()) {
            return Err(Error::InvalidParameter(format!("omega_m must be positive, got {omega_m}")));
        }
        if !(q_factor > 0.0) {
            return Err(Error::InvalidParameter(format!("Q must be positive, got {q_factor}")));
        }
        if !(nbar_bath >= 0.0 && nbar_bath.is_finite()) {
            return Err(Error::InvalidParameter(format!("bath occupation must be >= 0, got {nbar_bath}")));
        }
        let env = Self { omega_m, q_factor, nbar_bath, correlator: BathCorrelator::default() };
        if env.epsilon() >= 1.0 {
            return Err(Error::InvalidParameter(format!("overdamped: epsilon = {} >= 1", env.epsilon())));
        }
        Ok(env)
    }

    pub fn closed(omega_m: f64) -> Result<Self> {
        Self::new(omega_m, f64::INFINITY, 0.0)
    }

    pub fn with_correlator(mut self, correlator: BathCorrelator) -> Self {
        self.correlator = correlator;
        self
    }

    pub fn gamma(&self) -> f64 {
        self.omega_m / self.q_factor
    }

    pub fn epsilon(&self) -> f64 {
        self.gamma() / (2.0 * self.omega_m)
    }

    pub fn bath_strength(&self) -> f64 {
        match self.correlator {
            BathCorrelator::TwoNbarPlusOne => 2.0 * self.nbar_bath + 1.0,
            BathCorrelator::NbarPlusHalf => self.nbar_bath + 0.5,
        }
    }

    /// Below Q = 10 the weak-damping solution used here is a poor approximation.
    pub fn is_low_q(&self) -> bool {
        self.q_factor < 10.0
    }
}

/// Delay after which the position quadrature has rotated into the momentum one:
/// (pi + arctan(-1/eps)) / omega_m, which is pi/(2 omega_m) without damping.
pub fn quarter_period(env: &EnvParams) -> f64 {
    let eps = env.epsilon();
    if eps == 0.0 {
        return PI / (2.0 * env.omega_m);
    }
    (PI + (-1.0 / eps).atan()) / env.omega_m
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Quadrature {
    Position,
    Momentum,
}

/// Second moments of the bath terms dX(t), dP(t), without the e^{-gt} prefactor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseCovariances {
    pub var_dx: f64,
    pub var_dp: f64,
    pub cov_dxdp: f64,
}

/// Kernel of dQ(t) = sqrt(2g) int_0^t e^{gs/2} k(t - s) xi(s) ds, as coefficients of e^{+iwu}, e^{-iwu}.
fn kernel(q: Quadrature, eps: f64) -> [C64; 2] {
    let half_i = C64::new(0.0, 0.5);
    match q {
        // sin(wu)
        Quadrature::Position => [-half_i, half_i],
        // cos(wu) - eps sin(wu)
        Quadrature::Momentum => [c(0.5) + eps * half_i, c(0.5) - eps * half_i],
    }
}

/// <dA(t1) dB(t2)> for bath terms of the two quadratures, without prefactors.
pub fn noise_correlation(env: &EnvParams, a: (Quadrature, f64), b: (Quadrature, f64)) -> f64 {
    let (qa, t1) = a;
    let (qb, t2) = b;
    let tm = t1.min(t2);
    let g = env.gamma();
    if tm <= 0.0 || g == 0.0 {
        return 0.0;
    }
    let w = env.omega_m;
    let ka = kernel(qa, env.epsilon());
    let kb = kernel(qb, env.epsilon());
    let signs = [1.0, -1.0];
    let mut acc = C64::new(0.0, 0.0);
    for (i, &sa) in signs.iter().enumerate() {
        for (j, &sb) in signs.iter().enumerate() {
            // int_0^tm e^{gs} e^{iw(sa (t1 - s) + sb (t2 - s))} ds
            let phase = C64::new(0.0, w * (sa * t1 + sb * t2)).exp();
            let k = sa + sb;
            let integral = if k == 0.0 {
                c((g * tm).exp_m1() / g)
            } else {
                let z = C64::new(g, -w * k);
                ((z * tm).exp() - 1.0) / z
            };
            acc += ka[i] * kb[j] * phase * integral;
        }
    }
    2.0 * g * env.bath_strength() * acc.re
}

pub fn noise_covariances(env: &EnvParams, t: f64) -> NoiseCovariances {
    NoiseCovariances {
        var_dx: noise_correlation(env, (Quadrature::Position, t), (Quadrature::Position, t)),
        var_dp: noise_correlation(env, (Quadrature::Momentum, t), (Quadrature::Momentum, t)),
        cov_dxdp: noise_correlation(env, (Quadrature::Position, t), (Quadrature::Momentum, t)),
    }
}

/// When and through which quadrature a letter is read out.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Readout {
    pub time: f64,
    pub quadrature: Quadrature,
}

impl Readout {
    /// (a, b, noise prefactor) in Q(t) = a X(0) + b P(0) + prefactor * dQ(t).
    fn propagator(&self, env: &EnvParams) -> (f64, f64, f64) {
        let (wt, eps) = (env.omega_m * self.time, env.epsilon());
        let decay = (-env.gamma() * self.time / 2.0).exp();
        let (s, co) = wt.sin_cos();
        match self.quadrature {
            Quadrature::Position => (decay * (co + eps * s), decay * s, decay),
            Quadrature::Momentum => (-decay * s, decay * (co - eps * s), decay),
        }
    }
}

/// Readout assignment for the X and P letters of every word.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSchedule {
    pub x_letters: Readout,
    pub p_letters: Readout,
}

impl MeasurementSchedule {
    /// Both quadratures read directly at t = 0.
    pub fn instantaneous() -> Self {
        Self {
            x_letters: Readout { time: 0.0, quadrature: Quadrature::Position },
            p_letters: Readout { time: 0.0, quadrature: Quadrature::Momentum },
        }
    }

    /// X letters at t = 0; P letters as the position quadrature after the damped quarter period.
    pub fn verification(env: &EnvParams) -> Self {
        Self::delayed(quarter_period(env))
    }

    /// As `verification`, with the undamped delay pi/(2 omega_m).
    pub fn undamped_delay(env: &EnvParams) -> Self {
        Self::delayed(PI / (2.0 * env.omega_m))
    }

    pub fn delayed(tau: f64) -> Self {
        Self {
            x_letters: Readout { time: 0.0, quadrature: Quadrature::Position },
            p_letters: Readout { time: tau, quadrature: Quadrature::Position },
        }
    }
}

/// E[U^i V^j] for zero-mean jointly Gaussian U, V.
fn bivariate_moment(i: usize, j: usize, var_u: f64, var_v: f64, cov: f64) -> f64 {
    let dfact = |n: usize| -> f64 { (1..n).rev().step_by(2).map(|k| k as f64).product() };
    let mut sum = 0.0;
    for k in 0..=i.min(j) {
        let (a, b) = (i - k, j - k);
        if a % 2 == 1 || b % 2 == 1 {
            continue;
        }
        sum += binomial(i as u64, k as u64) * binomial(j as u64, k as u64) * factorial(k as u64)
            * cov.powi(k as i32)
            * dfact(a) * var_u.powi((a / 2) as i32)
            * dfact(b) * var_v.powi((b / 2) as i32);
    }
    sum
}

/// Per-mode substitution X^p P^q -> sum over noise placements, as a polynomial in X(0), P(0).
struct Substitution {
    lx: ModePoly,
    lp: ModePoly,
    var_x: f64,
    var_p: f64,
    cov: f64,
}

impl Substitution {
    fn new(env: &EnvParams, schedule: &MeasurementSchedule) -> Self {
        let (ax, bx, nx) = schedule.x_letters.propagator(env);
        let (ap, bp, np) = schedule.p_letters.propagator(env);
        let lin = |a: f64, b: f64| ModePoly::x().scale(c(a)).plus(&ModePoly::p().scale(c(b)));
        let x = (schedule.x_letters.quadrature, schedule.x_letters.time);
        let p = (schedule.p_letters.quadrature, schedule.p_letters.time);
        Self {
            lx: lin(ax, bx),
            lp: lin(ap, bp),
            var_x: nx * nx * noise_correlation(env, x, x),
            var_p: np * np * noise_correlation(env, p, p),
            cov: nx * np * noise_correlation(env, x, p),
        }
    }

    /// Sum over the distinct orderings of lx^i lp^j.
    fn ordered_sum(&self, i: usize, j: usize, memo: &mut BTreeMap<(usize, usize), ModePoly>) -> ModePoly {
        if i == 0 && j == 0 {
            return ModePoly::one();
        }
        if let Some(v) = memo.get(&(i, j)) {
            return v.clone();
        }
        let mut out = ModePoly::default();
        if i > 0 {
            out = out.plus(&self.lx.mul(&self.ordered_sum(i - 1, j, memo)));
        }
        if j > 0 {
            out = out.plus(&self.lp.mul(&self.ordered_sum(i, j - 1, memo)));
        }
        memo.insert((i, j), out.clone());
        out
    }

    /// Evolved symmetrized sum of X^p P^q. Placing bath terms on i X-letters and j P-letters
    /// of every ordering leaves each ordering of the remaining letters equally often.
    fn expand_symmetrized(&self, p: usize, q: usize, memo: &mut BTreeMap<(usize, usize), ModePoly>) -> ModePoly {
        let mut out = ModePoly::default();
        let total = binomial((p + q) as u64, p as u64);
        for i in 0..=p {
            for j in 0..=q {
                let g = bivariate_moment(i, j, self.var_x, self.var_p, self.cov);
                if g == 0.0 {
                    continue;
                }
                let rest = binomial((p + q - i - j) as u64, (p - i) as u64);
                let k = total * binomial(p as u64, i as u64) * binomial(q as u64, j as u64) / rest * g;
                out = out.plus(&self.ordered_sum(p - i, q - j, memo).scale(c(k)));
            }
        }
        out
    }

    fn expand(&self, p: usize, q: usize) -> ModePoly {
        let mut out = ModePoly::default();
        for i in 0..=p {
            for j in 0..=q {
                let g = bivariate_moment(i, j, self.var_x, self.var_p, self.cov);
                if g == 0.0 {
                    continue;
                }
                let k = binomial(p as u64, i as u64) * binomial(q as u64, j as u64) * g;
                let mut term = ModePoly::one().scale(c(k));
                for _ in 0..p - i {
                    term = term.mul(&self.lx);
                }
                for _ in 0..q - j {
                    term = term.mul(&self.lp);
                }
                out = out.plus(&term);
            }
        }
        out
    }
}

/// Moments of the evolved state as seen through `schedule`.
///
/// Letters keep their original operator order; the bath terms commute with everything.
pub fn evolve_moments(table: &MomentTable, env: &EnvParams, schedule: &MeasurementSchedule) -> Result<MomentTable> {
    let order = table.order_max();
    if order > D_MAX {
        return Err(Error::OrderOverflow { order, max: D_MAX });
    }
    let sub = Substitution::new(env, schedule);
    let mut cache: BTreeMap<(usize, usize), ModePoly> = BTreeMap::new();
    for p in 0..=order {
        for q in 0..=order - p {
            cache.insert((p, q), sub.expand(p, q));
        }
    }
    let mut entries = BTreeMap::new();
    for m in Monomial::up_to_order(order) {
        let [p, q, r, s] = m.exponents();
        let poly = Polynomial::from_modes(&cache[&(p, q)], &cache[&(r, s)]);
        entries.insert(m, table.eval(&poly)?);
    }
    MomentTable::new(entries, order, table.provenance().clone())
}

/// Evolution of the symmetrized sums, which are what quadrature readout measures, with the
/// canonical words then reconstructed using [X, P] = i.
///
/// Unlike `evolve_moments`, the result is a consistent table (symmetrized sums exactly real)
/// even though the evolved letters no longer satisfy the canonical commutator. The two agree
/// up to terms of order gamma t.
pub fn evolve_moments_symmetrized(table: &MomentTable, env: &EnvParams, schedule: &MeasurementSchedule) -> Result<MomentTable> {
    let order = table.order_max();
    if order > D_MAX {
        return Err(Error::OrderOverflow { order, max: D_MAX });
    }
    let sub = Substitution::new(env, schedule);
    let mut memo = BTreeMap::new();
    let mut cache: BTreeMap<(usize, usize), ModePoly> = BTreeMap::new();
    for p in 0..=order {
        for q in 0..=order - p {
            cache.insert((p, q), sub.expand_symmetrized(p, q, &mut memo));
        }
    }
    let mut entries: BTreeMap<Monomial, C64> = BTreeMap::new();
    for d in 0..=order {
        for m in Monomial::of_order(d) {
            let [p, q, r, s] = m.exponents();
            let measured = table.eval(&Polynomial::from_modes(&cache[&(p, q)], &cache[&(r, s)]))?;
            let mut lead = c(0.0);
            let mut rest = c(0.0);
            for (&k, &coef) in symmetrized_polynomial(m)?.terms() {
                if k == m {
                    lead = coef;
                } else {
                    rest += coef * entries[&k];
                }
            }
            entries.insert(m, (measured - rest) / lead);
        }
    }
    MomentTable::new(entries, order, table.provenance().clone())
}
