//! Operator words over {X1, P1, X2, P2} and {b1, b1^dag, b2, b2^dag}, their canonical
//! forms, symmetrized sums, and tables of expectation values.
//!
//! Canonical order is X1^p P1^q X2^r P2^s with [X_j, P_k] = i δ_jk.

use std::collections::BTreeMap;
use std::fmt;

use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{self, StateRepr, TwoModeState};
use crate::linalg::{binomial, c, factorial, I};

/// Longest word handled by the public word operations.
pub const D_MAX: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Quad {
    X1,
    P1,
    X2,
    P2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Ladder {
    B1,
    B1Dag,
    B2,
    B2Dag,
}

impl Ladder {
    pub fn dagger(self) -> Self {
        match self {
            Ladder::B1 => Ladder::B1Dag,
            Ladder::B1Dag => Ladder::B1,
            Ladder::B2 => Ladder::B2Dag,
            Ladder::B2Dag => Ladder::B2,
        }
    }
}

/// Word of quadrature letters in operator order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QuadWord(pub Vec<Quad>);

/// Word of ladder letters in operator order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LadderWord(pub Vec<Ladder>);

impl LadderWord {
    pub fn new(letters: &[Ladder]) -> Self {
        Self(letters.to_vec())
    }

    pub fn dagger(&self) -> Self {
        Self(self.0.iter().rev().map(|l| l.dagger()).collect())
    }
}

impl fmt::Display for LadderWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        let names: Vec<&str> = self
            .0
            .iter()
            .map(|l| match l {
                Ladder::B1 => "b1",
                Ladder::B1Dag => "b1^dag",
                Ladder::B2 => "b2",
                Ladder::B2Dag => "b2^dag",
            })
            .collect();
        write!(f, "{}", names.join(" "))
    }
}

/// Canonical monomial X1^p P1^q X2^r P2^s.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Monomial {
    pub p: u8,
    pub q: u8,
    pub r: u8,
    pub s: u8,
}

impl Monomial {
    pub const ONE: Monomial = Monomial { p: 0, q: 0, r: 0, s: 0 };

    pub fn new(p: usize, q: usize, r: usize, s: usize) -> Self {
        Self { p: p as u8, q: q as u8, r: r as u8, s: s as u8 }
    }

    pub fn order(&self) -> usize {
        (self.p + self.q + self.r + self.s) as usize
    }

    pub fn exponents(&self) -> [usize; 4] {
        [self.p as usize, self.q as usize, self.r as usize, self.s as usize]
    }

    /// All monomials of exactly order `d`, in a fixed order.
    pub fn of_order(d: usize) -> Vec<Monomial> {
        let mut out = Vec::new();
        for p in (0..=d).rev() {
            for q in (0..=d - p).rev() {
                for r in (0..=d - p - q).rev() {
                    out.push(Monomial::new(p, q, r, d - p - q - r));
                }
            }
        }
        out
    }

    /// All monomials up to order `d` inclusive, by increasing order.
    pub fn up_to_order(d: usize) -> Vec<Monomial> {
        (0..=d).flat_map(Monomial::of_order).collect()
    }

    pub fn key(&self) -> String {
        let mut parts = Vec::new();
        for (name, e) in [("X1", self.p), ("P1", self.q), ("X2", self.r), ("P2", self.s)] {
            match e {
                0 => {}
                1 => parts.push(name.to_string()),
                _ => parts.push(format!("{name}^{e}")),
            }
        }
        if parts.is_empty() {
            "1".into()
        } else {
            parts.join(" ")
        }
    }

    pub fn parse(key: &str) -> Result<Self> {
        let mut m = Monomial::ONE;
        if key.trim() == "1" {
            return Ok(m);
        }
        let mut last = 0;
        for tok in key.split_whitespace() {
            let (name, exp) = match tok.split_once('^') {
                Some((n, e)) => (n, e.parse::<u8>().map_err(|_| Error::InvalidParameter(format!("bad exponent in {key}")))?),
                None => (tok, 1),
            };
            let slot = match name {
                "X1" => 1,
                "P1" => 2,
                "X2" => 3,
                "P2" => 4,
                _ => return Err(Error::InvalidParameter(format!("unknown letter {name} in {key}"))),
            };
            if slot <= last {
                return Err(Error::InvalidParameter(format!("{key} is not in canonical order")));
            }
            last = slot;
            match slot {
                1 => m.p = exp,
                2 => m.q = exp,
                3 => m.r = exp,
                _ => m.s = exp,
            }
        }
        Ok(m)
    }

    /// The canonical word as a letter sequence.
    pub fn word(&self) -> QuadWord {
        let mut w = Vec::with_capacity(self.order());
        w.extend(std::iter::repeat(Quad::X1).take(self.p as usize));
        w.extend(std::iter::repeat(Quad::P1).take(self.q as usize));
        w.extend(std::iter::repeat(Quad::X2).take(self.r as usize));
        w.extend(std::iter::repeat(Quad::P2).take(self.s as usize));
        QuadWord(w)
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.key())
    }
}

// ---------------------------------------------------------------------------
// single-mode normal forms

/// Single-mode polynomial sum c_ab X^a P^b.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ModePoly(pub BTreeMap<(u8, u8), C64>);

impl ModePoly {
    pub fn one() -> Self {
        let mut m = BTreeMap::new();
        m.insert((0, 0), c(1.0));
        Self(m)
    }

    pub fn x() -> Self {
        Self(BTreeMap::from([((1, 0), c(1.0))]))
    }

    pub fn p() -> Self {
        Self(BTreeMap::from([((0, 1), c(1.0))]))
    }

    fn add_term(&mut self, key: (u8, u8), v: C64) {
        if v == c(0.0) {
            return;
        }
        let e = self.0.entry(key).or_insert(c(0.0));
        *e += v;
    }

    pub fn plus(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (&k, &v) in &other.0 {
            out.add_term(k, v);
        }
        out.prune();
        out
    }

    pub fn scale(&self, k: C64) -> Self {
        Self(self.0.iter().map(|(&key, &v)| (key, v * k)).collect())
    }

    fn prune(&mut self) {
        self.0.retain(|_, v| v.norm() != 0.0);
    }

    /// Product in normal form using X^a P^b X^c P^d = sum_k C(b,k) C(c,k) k! (-i)^k X^{a+c-k} P^{b+d-k}.
    pub fn mul(&self, other: &Self) -> Self {
        let mut out = ModePoly::default();
        for (&(a, b), &u) in &self.0 {
            for (&(cc, d), &v) in &other.0 {
                let kmax = b.min(cc);
                let mut ik = c(1.0);
                for k in 0..=kmax {
                    let coef = binomial(b as u64, k as u64) * binomial(cc as u64, k as u64) * factorial(k as u64);
                    out.add_term((a + cc - k, b + d - k), u * v * ik * coef);
                    ik *= -I;
                }
            }
        }
        out.prune();
        out
    }
}

/// Two-mode polynomial over canonical monomials.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Polynomial(pub BTreeMap<Monomial, C64>);

impl Polynomial {
    pub fn one() -> Self {
        Self::monomial(Monomial::ONE)
    }

    pub fn monomial(m: Monomial) -> Self {
        Self(BTreeMap::from([(m, c(1.0))]))
    }

    pub fn letter(l: Quad) -> Self {
        let m = match l {
            Quad::X1 => Monomial::new(1, 0, 0, 0),
            Quad::P1 => Monomial::new(0, 1, 0, 0),
            Quad::X2 => Monomial::new(0, 0, 1, 0),
            Quad::P2 => Monomial::new(0, 0, 0, 1),
        };
        Self::monomial(m)
    }

    /// Linear form sum_i coeffs[i] L_i over (X1, P1, X2, P2).
    pub fn linear(coeffs: [C64; 4]) -> Self {
        let mut out = Polynomial::default();
        for (l, k) in [Quad::X1, Quad::P1, Quad::X2, Quad::P2].into_iter().zip(coeffs) {
            out = out.plus(&Polynomial::letter(l).scale(k));
        }
        out
    }

    pub fn from_modes(m1: &ModePoly, m2: &ModePoly) -> Self {
        let mut out = Polynomial::default();
        for (&(p, q), &u) in &m1.0 {
            for (&(r, s), &v) in &m2.0 {
                out.add_term(Monomial { p, q, r, s }, u * v);
            }
        }
        out.prune();
        out
    }

    fn add_term(&mut self, key: Monomial, v: C64) {
        if v == c(0.0) {
            return;
        }
        *self.0.entry(key).or_insert(c(0.0)) += v;
    }

    fn prune(&mut self) {
        self.0.retain(|_, v| v.norm() != 0.0);
    }

    pub fn plus(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (&k, &v) in &other.0 {
            out.add_term(k, v);
        }
        out.prune();
        out
    }

    pub fn scale(&self, k: C64) -> Self {
        Self(self.0.iter().map(|(&m, &v)| (m, v * k)).filter(|(_, v)| v.norm() != 0.0).collect())
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Polynomial::default();
        for (&a, &u) in &self.0 {
            let a1 = ModePoly(BTreeMap::from([((a.p, a.q), c(1.0))]));
            let a2 = ModePoly(BTreeMap::from([((a.r, a.s), c(1.0))]));
            for (&b, &v) in &other.0 {
                let b1 = ModePoly(BTreeMap::from([((b.p, b.q), c(1.0))]));
                let b2 = ModePoly(BTreeMap::from([((b.r, b.s), c(1.0))]));
                let prod = Polynomial::from_modes(&a1.mul(&b1), &a2.mul(&b2));
                for (m, w) in prod.0 {
                    out.add_term(m, u * v * w);
                }
            }
        }
        out.prune();
        out
    }

    pub fn pow(&self, n: usize) -> Self {
        let mut out = Polynomial::one();
        for _ in 0..n {
            out = out.mul(self);
        }
        out
    }

    /// Formal adjoint: Hermitian letters, reversed order, conjugated coefficients.
    pub fn adjoint(&self) -> Self {
        let mut out = Polynomial::default();
        for (&m, &v) in &self.0 {
            let mut w = m.word().0;
            w.reverse();
            let canon = canonical_form(&w);
            out = out.plus(&canon.scale(v.conj()));
        }
        out
    }

    pub fn max_order(&self) -> usize {
        self.0.keys().map(|m| m.order()).max().unwrap_or(0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &C64)> {
        self.0.iter()
    }
}

fn canonical_form(letters: &[Quad]) -> Polynomial {
    let mut m1 = ModePoly::one();
    let mut m2 = ModePoly::one();
    for &l in letters {
        match l {
            Quad::X1 => m1 = m1.mul(&ModePoly::x()),
            Quad::P1 => m1 = m1.mul(&ModePoly::p()),
            Quad::X2 => m2 = m2.mul(&ModePoly::x()),
            Quad::P2 => m2 = m2.mul(&ModePoly::p()),
        }
    }
    Polynomial::from_modes(&m1, &m2)
}

fn check_order(order: usize) -> Result<()> {
    if order > D_MAX {
        return Err(Error::OrderOverflow { order, max: D_MAX });
    }
    Ok(())
}

/// Rewrites a word as a combination of canonical monomials.
pub fn canonicalize(word: &QuadWord) -> Result<Polynomial> {
    check_order(word.0.len())?;
    Ok(canonical_form(&word.0))
}

/// Expands a ladder word with b_j = (X_j + i P_j)/sqrt 2 into canonical monomials.
pub fn ladder_to_quadrature(word: &LadderWord) -> Result<Polynomial> {
    check_order(word.0.len())?;
    let h = c(std::f64::consts::FRAC_1_SQRT_2);
    let lower = ModePoly::x().scale(h).plus(&ModePoly::p().scale(I * h));
    let raise = ModePoly::x().scale(h).plus(&ModePoly::p().scale(-I * h));
    let mut m1 = ModePoly::one();
    let mut m2 = ModePoly::one();
    for &l in &word.0 {
        match l {
            Ladder::B1 => m1 = m1.mul(&lower),
            Ladder::B1Dag => m1 = m1.mul(&raise),
            Ladder::B2 => m2 = m2.mul(&lower),
            Ladder::B2Dag => m2 = m2.mul(&raise),
        }
    }
    Ok(Polynomial::from_modes(&m1, &m2))
}

/// Distinct orderings of a multiset of two letter kinds (`nx` of kind a, `np` of kind b).
fn interleavings(nx: usize, np: usize, a: Quad, b: Quad) -> Vec<Vec<Quad>> {
    if nx == 0 && np == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    if nx > 0 {
        for mut rest in interleavings(nx - 1, np, a, b) {
            rest.insert(0, a);
            out.push(rest);
        }
    }
    if np > 0 {
        for mut rest in interleavings(nx, np - 1, a, b) {
            rest.insert(0, b);
            out.push(rest);
        }
    }
    out
}

/// Distinct orderings entering the symmetrized sum of X1^p P1^q X2^r P2^s.
///
/// Letters of different modes commute, so a word is a mode-1 ordering followed by a
/// mode-2 ordering. The multiplicity is the number of raw four-letter sequences that
/// collapse onto the word, C(p+q+r+s, p+q).
pub fn symmetrized_expand(p: usize, q: usize, r: usize, s: usize) -> Result<Vec<(QuadWord, usize)>> {
    let d = p + q + r + s;
    check_order(d)?;
    let mult = binomial(d as u64, (p + q) as u64) as usize;
    let mut out = Vec::new();
    for w1 in interleavings(p, q, Quad::X1, Quad::P1) {
        for w2 in interleavings(r, s, Quad::X2, Quad::P2) {
            let mut w = w1.clone();
            w.extend(w2);
            out.push((QuadWord(w), mult));
        }
    }
    Ok(out)
}

/// Number of distinct orderings in the symmetrized sum.
pub fn symmetrized_count(m: Monomial) -> usize {
    (binomial((m.p + m.q) as u64, m.p as u64) * binomial((m.r + m.s) as u64, m.r as u64)) as usize
}

/// Symmetrized sum of `m` as a canonical polynomial.
pub fn symmetrized_polynomial(m: Monomial) -> Result<Polynomial> {
    let mut out = Polynomial::default();
    for (w, _) in symmetrized_expand(m.p as usize, m.q as usize, m.r as usize, m.s as usize)? {
        out = out.plus(&canonicalize(&w)?);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// tables

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Provenance {
    Exact,
    Recovered { n_samples: Option<u64> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct MomentTable {
    entries: BTreeMap<Monomial, C64>,
    order_max: usize,
    provenance: Provenance,
    /// Standard errors of (re, im) per entry, for recovered tables.
    std_errors: Option<BTreeMap<Monomial, (f64, f64)>>,
}

#[derive(Serialize, Deserialize)]
struct TableJson {
    order_max: usize,
    provenance: Provenance,
    entries: BTreeMap<String, [f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    std_errors: Option<BTreeMap<String, [f64; 2]>>,
}

impl MomentTable {
    /// Builds a table; every monomial up to `order_max` must be present.
    pub fn new(entries: BTreeMap<Monomial, C64>, order_max: usize, provenance: Provenance) -> Result<Self> {
        for m in Monomial::up_to_order(order_max) {
            if !entries.contains_key(&m) {
                return Err(Error::MissingMoment(m.key()));
            }
        }
        let entries = entries.into_iter().filter(|(m, _)| m.order() <= order_max).collect();
        Ok(Self { entries, order_max, provenance, std_errors: None })
    }

    pub fn with_std_errors(mut self, errs: BTreeMap<Monomial, (f64, f64)>) -> Self {
        self.std_errors = Some(errs);
        self
    }

    /// Table filled by evaluating `f` on every monomial up to `order_max`.
    pub fn from_fn(order_max: usize, provenance: Provenance, mut f: impl FnMut(Monomial) -> C64) -> Self {
        let entries = Monomial::up_to_order(order_max).into_iter().map(|m| (m, f(m))).collect();
        Self { entries, order_max, provenance, std_errors: None }
    }

    pub fn order_max(&self) -> usize {
        self.order_max
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn std_errors(&self) -> Option<&BTreeMap<Monomial, (f64, f64)>> {
        self.std_errors.as_ref()
    }

    pub fn entries(&self) -> &BTreeMap<Monomial, C64> {
        &self.entries
    }

    pub fn get(&self, m: Monomial) -> Result<C64> {
        self.entries.get(&m).copied().ok_or_else(|| Error::MissingMoment(m.key()))
    }

    pub fn eval(&self, poly: &Polynomial) -> Result<C64> {
        poly.terms().map(|(&m, &k)| self.get(m).map(|v| v * k)).sum()
    }

    /// sum |coefficient * moment| over the terms of `poly`: the scale of rounding error in `eval`.
    pub fn eval_magnitude(&self, poly: &Polynomial) -> Result<f64> {
        poly.terms().map(|(&m, &k)| self.get(m).map(|v| (v * k).norm())).sum()
    }

    pub fn word(&self, word: &QuadWord) -> Result<C64> {
        self.eval(&canonicalize(word)?)
    }

    pub fn ladder(&self, word: &LadderWord) -> Result<C64> {
        self.eval(&ladder_to_quadrature(word)?)
    }

    /// Value of the symmetrized sum S(p, q, r, s).
    pub fn symmetrized(&self, m: Monomial) -> Result<C64> {
        self.eval(&symmetrized_polynomial(m)?)
    }

    /// Largest |Im| over symmetrized sums, which are Hermitian and hence real.
    pub fn hermitian_defect(&self) -> f64 {
        Monomial::up_to_order(self.order_max)
            .into_iter()
            .map(|m| self.symmetrized(m).map(|v| v.im.abs()).unwrap_or(0.0))
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> String {
        let j = TableJson {
            order_max: self.order_max,
            provenance: self.provenance.clone(),
            entries: self.entries.iter().map(|(m, v)| (m.key(), [v.re, v.im])).collect(),
            std_errors: self
                .std_errors
                .as_ref()
                .map(|e| e.iter().map(|(m, &(a, b))| (m.key(), [a, b])).collect()),
        };
        serde_json::to_string_pretty(&j).expect("moment table serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let j: TableJson = serde_json::from_str(s).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let mut entries = BTreeMap::new();
        for (k, [re, im]) in j.entries {
            entries.insert(Monomial::parse(&k)?, C64::new(re, im));
        }
        let mut t = Self::new(entries, j.order_max, j.provenance)?;
        if let Some(errs) = j.std_errors {
            let mut e = BTreeMap::new();
            for (k, [a, b]) in errs {
                e.insert(Monomial::parse(&k)?, (a, b));
            }
            t.std_errors = Some(e);
        }
        Ok(t)
    }
}

/// Every canonical moment up to `order_max` from a Fock-space state.
pub fn moments_from_state(state: &TwoModeState, order_max: usize) -> Result<MomentTable> {
    check_order(order_max)?;
    let config = state.config();
    let (c1, c2) = (config.cutoff_1, config.cutoff_2);
    let mode1: BTreeMap<(usize, usize), Array2<C64>> = pairs(order_max)
        .map(|(p, q)| ((p, q), fock::quadrature_monomial(p, q, c1)))
        .collect();
    let mode2: BTreeMap<(usize, usize), Array2<C64>> = pairs(order_max)
        .map(|(r, s)| ((r, s), fock::quadrature_monomial(r, s, c2)))
        .collect();

    // Reduced objects T_B with Tr(rho (A ⊗ B)) = Tr(T_B A).
    let reduce = |b: &Array2<C64>| -> Array2<C64> {
        match state.repr() {
            StateRepr::Pure(v) => {
                let psi = v.view().into_shape_with_order((c1, c2)).unwrap();
                psi.dot(&b.t()).dot(&psi.t().mapv(|z| z.conj()))
            }
            StateRepr::Product(r1, r2) => r1 * tr_prod(r2, b),
            StateRepr::Dense(rho) => fock::partial_trace_with(rho, c1, c2, Some(b)),
        }
    };

    let mut entries = BTreeMap::new();
    for (&(r, s), b) in &mode2 {
        let t = reduce(b);
        for (&(p, q), a) in &mode1 {
            if p + q + r + s > order_max {
                continue;
            }
            entries.insert(Monomial::new(p, q, r, s), tr_prod(&t, a));
        }
    }

    // Truncation check: the top-order moments must not depend on whether operator
    // products are formed inside the retained space or on a padded space.
    let naive = |p: usize, q: usize, cut: usize| {
        let x = fock::position(cut);
        let pm = fock::momentum(cut);
        let mut m = Array2::<C64>::eye(cut);
        for _ in 0..p {
            m = m.dot(&x);
        }
        for _ in 0..q {
            m = m.dot(&pm);
        }
        m
    };
    let mut worst: f64 = 0.0;
    for (r, s) in pairs(order_max) {
        let t = reduce(&naive(r, s, c2));
        let rest = order_max - r - s;
        for p in 0..=rest {
            let v = tr_prod(&t, &naive(p, rest - p, c1));
            let exact = entries[&Monomial::new(p, rest - p, r, s)];
            worst = worst.max((v - exact).norm());
        }
    }
    if worst > 1e-8 {
        return Err(Error::CutoffTooSmall(format!(
            "order-{order_max} moments depend on the truncation ({worst:.2e})"
        )));
    }
    Ok(MomentTable { entries, order_max, provenance: Provenance::Exact, std_errors: None })
}

fn pairs(order: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..=order).flat_map(move |a| (0..=order - a).map(move |b| (a, b)))
}

fn tr_prod(a: &Array2<C64>, b: &Array2<C64>) -> C64 {
    let n = a.nrows();
    let mut s = c(0.0);
    for i in 0..n {
        for j in 0..n {
            s += a[[i, j]] * b[[j, i]];
        }
    }
    s
}
