//! Closed-form moments of heralded thermal states.
//!
//! The heralded state is a four-term sum of displaced and "half-displaced" thermal
//! operators, so every moment reduces to single-mode thermal traces of normal-ordered
//! words with a displacement inserted. This path has no Fock truncation and handles
//! occupations far beyond what a density matrix could hold.

use std::collections::BTreeMap;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::herald::{ClickOutcome, Configuration, ProtocolParams};
use crate::linalg::{binomial, c, factorial, I};
use crate::moments::{Monomial, MomentTable, Provenance, D_MAX};

/// Single-mode polynomial sum c_kl (b^dag)^k b^l.
#[derive(Clone, Debug, Default)]
struct NormalPoly(BTreeMap<(u32, u32), C64>);

impl NormalPoly {
    fn one() -> Self {
        Self(BTreeMap::from([((0, 0), c(1.0))]))
    }

    /// (b^dag)^a b^b (b^dag)^c b^d = sum_k C(b,k) C(c,k) k! (b^dag)^(a+c-k) b^(b+d-k).
    fn mul(&self, other: &Self) -> Self {
        let mut out = BTreeMap::new();
        for (&(a, b), &u) in &self.0 {
            for (&(cc, d), &v) in &other.0 {
                for k in 0..=b.min(cc) {
                    let coef = binomial(b as u64, k as u64) * binomial(cc as u64, k as u64) * factorial(k as u64);
                    *out.entry((a + cc - k, b + d - k)).or_insert(c(0.0)) += u * v * coef;
                }
            }
        }
        Self(out)
    }
}

/// X^p P^q in normal order, with X = (b + b^dag)/sqrt2 and P = -i (b - b^dag)/sqrt2.
fn quad_to_normal(p: u32, q: u32) -> NormalPoly {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let x = NormalPoly(BTreeMap::from([((0, 1), c(h)), ((1, 0), c(h))]));
    let pm = NormalPoly(BTreeMap::from([((0, 1), -I * h), ((1, 0), I * h)]));
    let mut out = NormalPoly::one();
    for _ in 0..p {
        out = out.mul(&x);
    }
    for _ in 0..q {
        out = out.mul(&pm);
    }
    out
}

/// Single-mode thermal traces with occupation `n`.
struct Thermal {
    n: f64,
}

impl Thermal {
    /// <(b^dag)^k b^l>.
    fn plain(&self, k: u32, l: u32) -> C64 {
        if k == l {
            c(factorial(k as u64) * self.n.powi(k as i32))
        } else {
            c(0.0)
        }
    }

    /// Tr(D(x) rho D(x)^dag (b^dag)^k b^l) = <(b^dag + x^*)^k (b + x)^l>.
    fn shifted(&self, k: u32, l: u32, x: C64) -> C64 {
        let mut s = c(0.0);
        for i in 0..=k {
            for j in 0..=l {
                let t = self.plain(i, j);
                if t == c(0.0) {
                    continue;
                }
                s += binomial(k as u64, i as u64) * binomial(l as u64, j as u64)
                    * x.conj().powu(k - i) * x.powu(l - j) * t;
            }
        }
        s
    }

    /// Tr(rho (b^dag)^k b^l D(x)).
    fn with_displacement_right(&self, k: u32, l: u32, x: C64) -> C64 {
        let n = self.n;
        let mut s = c(0.0);
        for j in 0..=l {
            let bj = binomial(l as u64, j as u64) * x.powu(l - j);
            for p in 0..=k.min(j) {
                let coef = binomial(k as u64, p as u64) * binomial(j as u64, p as u64) * factorial(p as u64) * n.powi(p as i32);
                s += bj * coef * (-x.conj() * n).powu(k - p) * (x * n).powu(j - p);
            }
        }
        s * (-x.norm_sqr() * (n + 0.5)).exp()
    }

    /// Tr(rho D(x)^dag (b^dag)^k b^l).
    fn with_displacement_left(&self, k: u32, l: u32, x: C64) -> C64 {
        self.with_displacement_right(l, k, x).conj()
    }
}

/// Per-mode quantities for every normal-ordered word up to `order`.
struct ModeTables {
    plain: BTreeMap<(u32, u32), C64>,
    shifted: BTreeMap<(u32, u32), C64>,
    right: BTreeMap<(u32, u32), C64>,
    left: BTreeMap<(u32, u32), C64>,
}

impl ModeTables {
    fn new(n: f64, x: C64, order: u32) -> Self {
        let th = Thermal { n };
        let mut t = ModeTables {
            plain: BTreeMap::new(),
            shifted: BTreeMap::new(),
            right: BTreeMap::new(),
            left: BTreeMap::new(),
        };
        for k in 0..=order {
            for l in 0..=order - k {
                t.plain.insert((k, l), th.plain(k, l));
                t.shifted.insert((k, l), th.shifted(k, l, x));
                t.right.insert((k, l), th.with_displacement_right(k, l, x));
                t.left.insert((k, l), th.with_displacement_left(k, l, x));
            }
        }
        t
    }
}

/// Unnormalized Tr(Upsilon rho Upsilon^dag W1 W2) for normal-ordered words on each mode.
fn sandwich(config: Configuration, phi: f64, m1: &ModeTables, m2: &ModeTables, w1: (u32, u32), w2: (u32, u32)) -> C64 {
    let e = (I * phi).exp();
    match config {
        Configuration::Parallel => {
            m1.shifted[&w1] * m2.plain[&w2]
                + m1.plain[&w1] * m2.shifted[&w2]
                + e * m1.left[&w1] * m2.right[&w2]
                + e.conj() * m1.right[&w1] * m2.left[&w2]
        }
        Configuration::Series => {
            m1.shifted[&w1] * m2.shifted[&w2]
                + m1.plain[&w1] * m2.plain[&w2]
                + e * m1.left[&w1] * m2.left[&w2]
                + e.conj() * m1.right[&w1] * m2.right[&w2]
        }
    }
}

/// Exact canonical moments up to `order_max` of the heralded thermal state.
///
/// Supports the single-click outcomes; (0, 1) is the (1, 0) result with phi shifted by pi.
pub fn heralded_moments(params: &ProtocolParams, outcome: ClickOutcome, order_max: usize) -> Result<MomentTable> {
    if order_max > D_MAX {
        return Err(Error::OrderOverflow { order: order_max, max: D_MAX });
    }
    let phi = match (outcome.m, outcome.n) {
        (1, 0) => params.phi,
        (0, 1) => params.phi + std::f64::consts::PI,
        _ => {
            return Err(Error::InvalidParameter(format!(
                "closed-form moments cover single clicks only, got ({}, {})",
                outcome.m, outcome.n
            )))
        }
    };
    let x = params.beta();
    let order = order_max as u32;
    let m1 = ModeTables::new(params.nbar_1, x, order);
    let m2 = ModeTables::new(params.nbar_2, x, order);
    let norm = sandwich(params.configuration, phi, &m1, &m2, (0, 0), (0, 0)).re;
    if !(norm > 1e-300) {
        return Err(Error::HeraldImpossible(norm));
    }
    let normal: BTreeMap<(u32, u32), NormalPoly> = (0..=order)
        .flat_map(|a| (0..=order - a).map(move |b| (a, b)))
        .map(|(a, b)| ((a, b), quad_to_normal(a, b)))
        .collect();
    let table = MomentTable::from_fn(order_max, Provenance::Exact, |m: Monomial| {
        let n1 = &normal[&(m.p as u32, m.q as u32)];
        let n2 = &normal[&(m.r as u32, m.s as u32)];
        let mut acc = c(0.0);
        for (&w1, &u) in &n1.0 {
            for (&w2, &v) in &n2.0 {
                acc += u * v * sandwich(params.configuration, phi, &m1, &m2, w1, w2);
            }
        }
        acc / norm
    });
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::FockConfig;
    use crate::herald::heralded_thermal;
    use crate::moments::moments_from_state;
    use std::f64::consts::PI;

    fn compare(params: ProtocolParams, outcome: ClickOutcome, config: FockConfig, order: usize, tol: f64) {
        let exact = heralded_moments(&params, outcome, order).unwrap();
        let (state, _) = heralded_thermal(&params, outcome, config).unwrap();
        let fock = moments_from_state(&state, order).unwrap();
        for (m, v) in exact.entries() {
            let f = fock.get(*m).unwrap();
            assert!((f - v).norm() < tol * (1.0 + v.norm()), "{m}: analytic {v}, fock {f}");
        }
    }

    #[test]
    fn matches_fock_numerics_parallel() {
        let params = ProtocolParams::parallel(0.5, PI, 0.0).unwrap();
        compare(params, ClickOutcome::ONE_ZERO, FockConfig::symmetric(24).unwrap(), 4, 1e-9);
        let params = ProtocolParams::parallel(0.9, 1.1, 0.3).unwrap();
        compare(params, ClickOutcome::ONE_ZERO, FockConfig::symmetric(40).unwrap(), 4, 1e-9);
    }

    #[test]
    fn matches_fock_numerics_series_and_other_port() {
        let params = ProtocolParams::parallel(0.7, 0.4, 0.2)
            .unwrap()
            .with_configuration(Configuration::Series);
        compare(params, ClickOutcome::ONE_ZERO, FockConfig::symmetric(36).unwrap(), 4, 1e-9);
        compare(params, ClickOutcome::ZERO_ONE, FockConfig::symmetric(36).unwrap(), 3, 1e-9);
    }

    #[test]
    fn unequal_occupations() {
        let mut params = ProtocolParams::parallel(0.6, 2.0, 0.1).unwrap();
        params.nbar_2 = 0.5;
        compare(params, ClickOutcome::ONE_ZERO, FockConfig::new(30, 50).unwrap(), 4, 1e-9);
    }

    #[test]
    fn zero_coupling_is_thermal() {
        let t = heralded_moments(&ProtocolParams::parallel(0.0, 0.0, 0.4).unwrap(), ClickOutcome::ONE_ZERO, 2).unwrap();
        assert!((t.get(Monomial::new(2, 0, 0, 0)).unwrap() - c(0.9)).norm() < 1e-14);
        assert!(t.get(Monomial::new(1, 0, 1, 0)).unwrap().norm() < 1e-14);
    }

    #[test]
    fn rejects_multi_click_outcomes() {
        let p = ProtocolParams::parallel(0.5, PI, 0.0).unwrap();
        assert!(heralded_moments(&p, ClickOutcome::new(1, 1), 2).is_err());
    }
}
