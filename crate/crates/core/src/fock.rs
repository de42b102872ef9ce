//! Truncated two-mode Fock space: states, operators and the elementary constructors.
//!
//! Basis index of |n1, n2> is `n1 * cutoff_2 + n2`.

use std::borrow::Cow;

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c, I};

/// Thermal tail mass above which `thermal_state` refuses to truncate.
pub const THERMAL_TAIL_MAX: f64 = 1e-10;
/// Coherent-state mass allowed outside the retained levels for a displacement.
pub const DISPLACEMENT_TAIL_MAX: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    One,
    Two,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FockConfig {
    pub cutoff_1: usize,
    pub cutoff_2: usize,
}

impl FockConfig {
    pub fn new(cutoff_1: usize, cutoff_2: usize) -> Result<Self> {
        if cutoff_1 < 2 || cutoff_2 < 2 {
            return Err(Error::InvalidParameter(format!(
                "cutoffs must be at least 2, got ({cutoff_1}, {cutoff_2})"
            )));
        }
        Ok(Self { cutoff_1, cutoff_2 })
    }

    pub fn symmetric(cutoff: usize) -> Result<Self> {
        Self::new(cutoff, cutoff)
    }

    /// Default cutoffs for a heralded state with occupations `nbar_1`, `nbar_2` and coupling `mu`.
    ///
    /// Each mode keeps max(20, ceil(8 (nbar + mu^2 + 1))) levels, raised further if the
    /// thermal tail would exceed 1e-12.
    pub fn heuristic(nbar_1: f64, nbar_2: f64, mu: f64) -> Self {
        let per_mode = |nbar: f64| {
            let h = (8.0 * (nbar + mu * mu + 1.0)).ceil() as usize;
            h.max(20).max(thermal_cutoff_for_tail(nbar, 1e-12))
        };
        Self { cutoff_1: per_mode(nbar_1), cutoff_2: per_mode(nbar_2) }
    }

    pub fn dim(&self) -> usize {
        self.cutoff_1 * self.cutoff_2
    }

    pub fn cutoff(&self, mode: Mode) -> usize {
        match mode {
            Mode::One => self.cutoff_1,
            Mode::Two => self.cutoff_2,
        }
    }

    pub fn doubled(&self) -> Self {
        Self { cutoff_1: 2 * self.cutoff_1, cutoff_2: 2 * self.cutoff_2 }
    }

    pub fn index(&self, n1: usize, n2: usize) -> usize {
        n1 * self.cutoff_2 + n2
    }
}

/// Smallest cutoff whose discarded thermal tail (nbar/(nbar+1))^c is below `tail`.
pub fn thermal_cutoff_for_tail(nbar: f64, tail: f64) -> usize {
    if nbar <= 0.0 {
        return 2;
    }
    let r = nbar / (nbar + 1.0);
    ((tail.ln() / r.ln()).floor() as usize + 1).max(2)
}

// ---------------------------------------------------------------------------
// single-mode matrices

pub fn annihilation(cutoff: usize) -> Array2<C64> {
    let mut a = Array2::zeros((cutoff, cutoff));
    for n in 1..cutoff {
        a[[n - 1, n]] = c((n as f64).sqrt());
    }
    a
}

pub fn creation(cutoff: usize) -> Array2<C64> {
    annihilation(cutoff).t().to_owned()
}

pub fn number(cutoff: usize) -> Array2<C64> {
    Array2::from_diag(&Array1::from_iter((0..cutoff).map(|n| c(n as f64))))
}

pub fn position(cutoff: usize) -> Array2<C64> {
    let a = annihilation(cutoff);
    (&a + &a.t()) / c(2f64.sqrt())
}

pub fn momentum(cutoff: usize) -> Array2<C64> {
    let a = annihilation(cutoff);
    (&a - &a.t()) / (I * 2f64.sqrt())
}

/// X^p P^q with matrix elements exact on the retained levels (built on a padded space).
pub fn quadrature_monomial(p: usize, q: usize, cutoff: usize) -> Array2<C64> {
    let padded = cutoff + p + q;
    let x = position(padded);
    let pm = momentum(padded);
    let mut m = Array2::<C64>::eye(padded);
    for _ in 0..p {
        m = m.dot(&x);
    }
    for _ in 0..q {
        m = m.dot(&pm);
    }
    m.slice(s![..cutoff, ..cutoff]).to_owned()
}

/// Fock amplitudes e^{-|b|^2/2} b^n / sqrt(n!) of a coherent state, n < cutoff.
pub fn coherent_amplitudes(beta: C64, cutoff: usize) -> Array1<C64> {
    let mut v = Array1::zeros(cutoff);
    let mut amp = c((-beta.norm_sqr() / 2.0).exp());
    for n in 0..cutoff {
        v[n] = amp;
        amp = amp * beta / ((n + 1) as f64).sqrt();
    }
    v
}

/// Probability mass of a coherent state outside levels 0..cutoff.
pub fn coherent_tail(beta: C64, cutoff: usize) -> f64 {
    let kept: f64 = coherent_amplitudes(beta, cutoff).iter().map(|z| z.norm_sqr()).sum();
    (1.0 - kept).max(0.0)
}

/// exp(beta b^dag - beta^* b) on one mode, via eigendecomposition of the Hermitian generator.
pub fn displacement_matrix(beta: C64, cutoff: usize) -> Result<Array2<C64>> {
    if beta.norm() == 0.0 {
        return Ok(Array2::eye(cutoff));
    }
    let tail = coherent_tail(beta, cutoff);
    if tail > DISPLACEMENT_TAIL_MAX {
        return Err(Error::CutoffTooSmall(format!(
            "displacement |beta|^2={:.3} leaks {tail:.2e} beyond cutoff {cutoff}",
            beta.norm_sqr()
        )));
    }
    let a = annihilation(cutoff);
    let ad = creation(cutoff);
    // H = i (beta b^dag - beta^* b) is Hermitian and D = exp(-i H).
    let h = (&ad * beta - &a * beta.conj()) * I;
    let (w, v) = linalg::eigh(&h)?;
    let phases = Array1::from_iter(w.iter().map(|&x| (-I * x).exp()));
    let vd = &v * &phases.view().insert_axis(Axis(0));
    let d = vd.dot(&linalg::adjoint(&v.view()));
    let defect = linalg::max_abs_diff(
        &linalg::adjoint(&d.view()).dot(&d).view(),
        &Array2::<C64>::eye(cutoff).view(),
    );
    if defect > 1e-9 {
        return Err(Error::CutoffTooSmall(format!("displacement unitarity defect {defect:.2e}")));
    }
    Ok(d)
}

/// exp(-i theta b^dag b).
pub fn rotation_matrix(theta: f64, cutoff: usize) -> Array2<C64> {
    Array2::from_diag(&Array1::from_iter((0..cutoff).map(|n| (-I * theta * n as f64).exp())))
}

/// Thermal populations, renormalized after truncation.
pub fn thermal_populations(nbar: f64, cutoff: usize) -> Result<Array1<f64>> {
    if !(nbar >= 0.0) {
        return Err(Error::InvalidParameter(format!("thermal occupation {nbar} < 0")));
    }
    let r = nbar / (nbar + 1.0);
    let tail = r.powi(cutoff as i32);
    if tail > THERMAL_TAIL_MAX {
        return Err(Error::CutoffTooSmall(format!(
            "thermal tail {tail:.2e} for nbar={nbar} at cutoff {cutoff}"
        )));
    }
    let mut p = Array1::from_iter((0..cutoff).map(|n| r.powi(n as i32) / (nbar + 1.0)));
    let total = p.sum();
    p /= total;
    Ok(p)
}

// ---------------------------------------------------------------------------
// operators

/// One Kronecker product `coeff * (mode_1 ⊗ mode_2)`; `None` stands for the identity.
#[derive(Clone, Debug)]
pub struct KronTerm {
    pub coeff: C64,
    pub mode_1: Option<Array2<C64>>,
    pub mode_2: Option<Array2<C64>>,
}

/// Two-mode operator stored as a short sum of Kronecker products.
#[derive(Clone, Debug)]
pub struct ModeOperator {
    config: FockConfig,
    terms: Vec<KronTerm>,
    label: String,
}

fn mul_opt(a: &Option<Array2<C64>>, b: &Option<Array2<C64>>) -> Option<Array2<C64>> {
    match (a, b) {
        (None, None) => None,
        (Some(x), None) | (None, Some(x)) => Some(x.clone()),
        (Some(x), Some(y)) => Some(x.dot(y)),
    }
}

impl ModeOperator {
    pub fn identity(config: FockConfig) -> Self {
        Self::from_terms(config, vec![KronTerm { coeff: c(1.0), mode_1: None, mode_2: None }], "1")
    }

    pub fn zero(config: FockConfig) -> Self {
        Self::from_terms(config, Vec::new(), "0")
    }

    pub fn from_terms(config: FockConfig, terms: Vec<KronTerm>, label: impl Into<String>) -> Self {
        Self { config, terms, label: label.into() }
    }

    /// `m` acting on `mode`, identity on the other.
    pub fn local(config: FockConfig, mode: Mode, m: Array2<C64>, label: impl Into<String>) -> Result<Self> {
        let cut = config.cutoff(mode);
        if m.dim() != (cut, cut) {
            return Err(Error::DimensionMismatch { expected: cut, found: m.nrows() });
        }
        let term = match mode {
            Mode::One => KronTerm { coeff: c(1.0), mode_1: Some(m), mode_2: None },
            Mode::Two => KronTerm { coeff: c(1.0), mode_1: None, mode_2: Some(m) },
        };
        Ok(Self::from_terms(config, vec![term], label))
    }

    pub fn kron(config: FockConfig, a: Array2<C64>, b: Array2<C64>, label: impl Into<String>) -> Result<Self> {
        if a.dim() != (config.cutoff_1, config.cutoff_1) {
            return Err(Error::DimensionMismatch { expected: config.cutoff_1, found: a.nrows() });
        }
        if b.dim() != (config.cutoff_2, config.cutoff_2) {
            return Err(Error::DimensionMismatch { expected: config.cutoff_2, found: b.nrows() });
        }
        let term = KronTerm { coeff: c(1.0), mode_1: Some(a), mode_2: Some(b) };
        Ok(Self::from_terms(config, vec![term], label))
    }

    pub fn annihilation(config: FockConfig, mode: Mode) -> Self {
        let tag = if mode == Mode::One { "b1" } else { "b2" };
        Self::local(config, mode, annihilation(config.cutoff(mode)), tag).unwrap()
    }

    pub fn creation(config: FockConfig, mode: Mode) -> Self {
        let tag = if mode == Mode::One { "b1^dag" } else { "b2^dag" };
        Self::local(config, mode, creation(config.cutoff(mode)), tag).unwrap()
    }

    pub fn number(config: FockConfig, mode: Mode) -> Self {
        let tag = if mode == Mode::One { "n1" } else { "n2" };
        Self::local(config, mode, number(config.cutoff(mode)), tag).unwrap()
    }

    pub fn position(config: FockConfig, mode: Mode) -> Self {
        let tag = if mode == Mode::One { "X1" } else { "X2" };
        Self::local(config, mode, position(config.cutoff(mode)), tag).unwrap()
    }

    pub fn momentum(config: FockConfig, mode: Mode) -> Self {
        let tag = if mode == Mode::One { "P1" } else { "P2" };
        Self::local(config, mode, momentum(config.cutoff(mode)), tag).unwrap()
    }

    pub fn rotation(config: FockConfig, mode: Mode, theta: f64) -> Self {
        let m = rotation_matrix(theta, config.cutoff(mode));
        Self::local(config, mode, m, format!("R{}({theta})", mode_digit(mode))).unwrap()
    }

    pub fn config(&self) -> FockConfig {
        self.config
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn terms(&self) -> &[KronTerm] {
        &self.terms
    }

    pub fn scale(mut self, k: C64) -> Self {
        for t in &mut self.terms {
            t.coeff *= k;
        }
        self
    }

    pub fn plus(&self, other: &Self) -> Self {
        assert_eq!(self.config, other.config);
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Self::from_terms(self.config, terms, format!("({} + {})", self.label, other.label))
    }

    pub fn times(&self, other: &Self) -> Self {
        assert_eq!(self.config, other.config);
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for a in &self.terms {
            for b in &other.terms {
                terms.push(KronTerm {
                    coeff: a.coeff * b.coeff,
                    mode_1: mul_opt(&a.mode_1, &b.mode_1),
                    mode_2: mul_opt(&a.mode_2, &b.mode_2),
                });
            }
        }
        Self::from_terms(self.config, terms, format!("{} {}", self.label, other.label))
    }

    pub fn adjoint(&self) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| KronTerm {
                coeff: t.coeff.conj(),
                mode_1: t.mode_1.as_ref().map(|m| linalg::adjoint(&m.view())),
                mode_2: t.mode_2.as_ref().map(|m| linalg::adjoint(&m.view())),
            })
            .collect();
        Self::from_terms(self.config, terms, format!("({})^dag", self.label))
    }

    /// Dense (cutoff_1 cutoff_2)-square matrix.
    pub fn matrix(&self) -> Array2<C64> {
        let (c1, c2) = (self.config.cutoff_1, self.config.cutoff_2);
        let mut out = Array2::zeros((c1 * c2, c1 * c2));
        for t in &self.terms {
            let a = t.mode_1.clone().unwrap_or_else(|| Array2::eye(c1));
            let b = t.mode_2.clone().unwrap_or_else(|| Array2::eye(c2));
            for i1 in 0..c1 {
                for j1 in 0..c1 {
                    let aij = a[[i1, j1]] * t.coeff;
                    if aij.norm() == 0.0 {
                        continue;
                    }
                    let mut blk = out.slice_mut(s![i1 * c2..(i1 + 1) * c2, j1 * c2..(j1 + 1) * c2]);
                    blk.scaled_add(aij, &b);
                }
            }
        }
        out
    }

    /// `self · m` for any matrix with `dim` rows.
    pub fn apply_left(&self, m: &ArrayView2<C64>) -> Array2<C64> {
        let (c1, c2) = (self.config.cutoff_1, self.config.cutoff_2);
        let k = m.ncols();
        assert_eq!(m.nrows(), c1 * c2, "operator/state dimension mismatch");
        let mut out = Array2::<C64>::zeros((c1 * c2, k));
        let m_std = m.as_standard_layout();
        for t in &self.terms {
            let mut owned: Option<Array2<C64>> = None;
            if let Some(b) = &t.mode_2 {
                let mut z = Array2::<C64>::zeros((c1 * c2, k));
                for i1 in 0..c1 {
                    let blk = m_std.slice(s![i1 * c2..(i1 + 1) * c2, ..]);
                    z.slice_mut(s![i1 * c2..(i1 + 1) * c2, ..]).assign(&b.dot(&blk));
                }
                owned = Some(z);
            }
            if let Some(a) = &t.mode_1 {
                let y = match &owned {
                    Some(z) => z.view(),
                    None => m_std.view(),
                };
                let y2 = y.into_shape_with_order((c1, c2 * k)).unwrap();
                let z2 = a.dot(&y2);
                owned = Some(z2.into_shape_with_order((c1 * c2, k)).unwrap());
            }
            match &owned {
                Some(z) => out.scaled_add(t.coeff, z),
                None => out.scaled_add(t.coeff, &m_std),
            }
        }
        out
    }

    pub fn apply_vec(&self, v: &Array1<C64>) -> Array1<C64> {
        let n = v.len();
        let col = v.view().into_shape_with_order((n, 1)).unwrap();
        self.apply_left(&col).into_shape_with_order(n).unwrap()
    }
}

fn mode_digit(mode: Mode) -> u8 {
    match mode {
        Mode::One => 1,
        Mode::Two => 2,
    }
}

/// exp(beta b_j^dag - beta^* b_j) on `mode`, identity on the other.
pub fn displacement(mode: Mode, beta: C64, config: FockConfig) -> Result<ModeOperator> {
    let d = displacement_matrix(beta, config.cutoff(mode))?;
    ModeOperator::local(config, mode, d, format!("D{}({beta})", mode_digit(mode)))
}

// ---------------------------------------------------------------------------
// states

#[derive(Clone, Debug)]
pub enum StateRepr {
    /// Normalized state vector.
    Pure(Array1<C64>),
    /// rho_1 ⊗ rho_2.
    Product(Array2<C64>, Array2<C64>),
    Dense(Array2<C64>),
}

#[derive(Clone, Debug)]
pub struct TwoModeState {
    config: FockConfig,
    repr: StateRepr,
}

impl TwoModeState {
    /// Pure state from a (not necessarily normalized) vector.
    pub fn pure(config: FockConfig, psi: Array1<C64>) -> Result<Self> {
        if psi.len() != config.dim() {
            return Err(Error::DimensionMismatch { expected: config.dim(), found: psi.len() });
        }
        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(Error::InvalidState("zero state vector".into()));
        }
        Ok(Self { config, repr: StateRepr::Pure(psi / c(norm)) })
    }

    pub fn product(config: FockConfig, rho_1: Array2<C64>, rho_2: Array2<C64>) -> Result<Self> {
        if rho_1.dim() != (config.cutoff_1, config.cutoff_1) {
            return Err(Error::DimensionMismatch { expected: config.cutoff_1, found: rho_1.nrows() });
        }
        if rho_2.dim() != (config.cutoff_2, config.cutoff_2) {
            return Err(Error::DimensionMismatch { expected: config.cutoff_2, found: rho_2.nrows() });
        }
        let s = Self { config, repr: StateRepr::Product(rho_1, rho_2) };
        s.check_trace_and_hermiticity()?;
        Ok(s)
    }

    pub fn dense(config: FockConfig, rho: Array2<C64>) -> Result<Self> {
        if rho.dim() != (config.dim(), config.dim()) {
            return Err(Error::DimensionMismatch { expected: config.dim(), found: rho.nrows() });
        }
        let s = Self { config, repr: StateRepr::Dense(rho) };
        s.check_trace_and_hermiticity()?;
        Ok(s)
    }

    /// Fock state |n1, n2>.
    pub fn fock(config: FockConfig, n1: usize, n2: usize) -> Result<Self> {
        if n1 >= config.cutoff_1 || n2 >= config.cutoff_2 {
            return Err(Error::CutoffTooSmall(format!("|{n1},{n2}> outside the retained space")));
        }
        let mut psi = Array1::zeros(config.dim());
        psi[config.index(n1, n2)] = c(1.0);
        Self::pure(config, psi)
    }

    pub fn config(&self) -> FockConfig {
        self.config
    }

    pub fn repr(&self) -> &StateRepr {
        &self.repr
    }

    pub fn purity_hint(&self) -> bool {
        matches!(self.repr, StateRepr::Pure(_))
    }

    pub fn state_vector(&self) -> Option<&Array1<C64>> {
        match &self.repr {
            StateRepr::Pure(v) => Some(v),
            _ => None,
        }
    }

    /// Dense density matrix.
    pub fn rho(&self) -> Cow<'_, Array2<C64>> {
        match &self.repr {
            StateRepr::Dense(r) => Cow::Borrowed(r),
            StateRepr::Pure(v) => {
                let n = v.len();
                let col = v.view().into_shape_with_order((n, 1)).unwrap();
                let row = v.mapv(|z| z.conj());
                let row = row.view().into_shape_with_order((1, n)).unwrap();
                Cow::Owned(col.dot(&row))
            }
            StateRepr::Product(a, b) => {
                let op = ModeOperator::kron(self.config, a.clone(), b.clone(), "rho").unwrap();
                Cow::Owned(op.matrix())
            }
        }
    }

    pub fn trace(&self) -> C64 {
        match &self.repr {
            StateRepr::Pure(v) => c(v.iter().map(|z| z.norm_sqr()).sum()),
            StateRepr::Product(a, b) => linalg::trace(&a.view()) * linalg::trace(&b.view()),
            StateRepr::Dense(r) => linalg::trace(&r.view()),
        }
    }

    fn check_trace_and_hermiticity(&self) -> Result<()> {
        let tr = self.trace();
        if (tr - c(1.0)).norm() > 1e-10 {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let herm = |m: &Array2<C64>| linalg::max_abs_diff(&m.view(), &linalg::adjoint(&m.view()).view());
        let defect = match &self.repr {
            StateRepr::Pure(_) => 0.0,
            StateRepr::Product(a, b) => herm(a).max(herm(b)),
            StateRepr::Dense(r) => herm(r),
        };
        if defect > 1e-10 {
            return Err(Error::InvalidState(format!("density matrix not Hermitian ({defect:.2e})")));
        }
        Ok(())
    }

    /// Full invariant check: unit trace, Hermiticity, and eigenvalues >= -1e-8.
    pub fn validate(&self) -> Result<()> {
        self.check_trace_and_hermiticity()?;
        let min_eig = match &self.repr {
            StateRepr::Pure(_) => 0.0,
            StateRepr::Product(a, b) => {
                let ea = linalg::eigvalsh(a)?;
                let eb = linalg::eigvalsh(b)?;
                (ea[0] * eb[eb.len() - 1]).min(ea[ea.len() - 1] * eb[0]).min(ea[0] * eb[0])
            }
            StateRepr::Dense(r) => linalg::eigvalsh(r)?[0],
        };
        if min_eig < -1e-8 {
            return Err(Error::InvalidState(format!("negative eigenvalue {min_eig:.2e}")));
        }
        Ok(())
    }

    /// Reduced density matrix of `mode`.
    pub fn reduced(&self, mode: Mode) -> Array2<C64> {
        let (c1, c2) = (self.config.cutoff_1, self.config.cutoff_2);
        match &self.repr {
            StateRepr::Product(a, b) => match mode {
                Mode::One => a * linalg::trace(&b.view()),
                Mode::Two => b * linalg::trace(&a.view()),
            },
            StateRepr::Pure(v) => {
                let psi = v.view().into_shape_with_order((c1, c2)).unwrap();
                match mode {
                    Mode::One => psi.dot(&linalg::adjoint(&psi)),
                    Mode::Two => psi.t().dot(&psi.mapv(|z| z.conj())),
                }
            }
            StateRepr::Dense(r) => {
                let cut = self.config.cutoff(mode);
                let mut out = Array2::zeros((cut, cut));
                for i in 0..cut {
                    for j in 0..cut {
                        out[[i, j]] = match mode {
                            Mode::One => (0..c2).map(|k| r[[i * c2 + k, j * c2 + k]]).sum(),
                            Mode::Two => (0..c1).map(|k| r[[k * c2 + i, k * c2 + j]]).sum(),
                        };
                    }
                }
                out
            }
        }
    }

    /// U rho U^dag (U need not be unitary; the result is not renormalized).
    fn transform_unnormalized(&self, op: &ModeOperator) -> StateRepr {
        match &self.repr {
            StateRepr::Pure(v) => StateRepr::Pure(op.apply_vec(v)),
            _ => {
                let rho = self.rho();
                let y = op.apply_left(&rho.view());
                StateRepr::Dense(op.apply_left(&linalg::adjoint(&y.view()).view()))
            }
        }
    }

    /// Applies `op` and renormalizes, returning the new state and the norm that was removed.
    pub fn apply_and_normalize(&self, op: &ModeOperator) -> Result<(Self, f64)> {
        if op.config() != self.config {
            return Err(Error::DimensionMismatch { expected: self.config.dim(), found: op.config().dim() });
        }
        let repr = self.transform_unnormalized(op);
        let p = match &repr {
            StateRepr::Pure(v) => v.iter().map(|z| z.norm_sqr()).sum::<f64>(),
            StateRepr::Dense(r) => linalg::trace(&r.view()).re,
            StateRepr::Product(..) => unreachable!(),
        };
        if !(p > 0.0) {
            return Ok((self.clone(), 0.0));
        }
        let repr = match repr {
            StateRepr::Pure(v) => StateRepr::Pure(v / c(p.sqrt())),
            StateRepr::Dense(mut r) => {
                r /= c(p);
                // Remove rounding asymmetry.
                let h = (&r + &linalg::adjoint(&r.view())) / c(2.0);
                StateRepr::Dense(h)
            }
            StateRepr::Product(..) => unreachable!(),
        };
        Ok((Self { config: self.config, repr }, p))
    }

    /// Mean occupation of `mode`.
    pub fn mean_occupation(&self, mode: Mode) -> f64 {
        let r = self.reduced(mode);
        (0..r.nrows()).map(|n| n as f64 * r[[n, n]].re).sum()
    }
}

/// Product thermal state with the given occupations.
pub fn thermal_state(nbar_1: f64, nbar_2: f64, config: FockConfig) -> Result<TwoModeState> {
    let p1 = thermal_populations(nbar_1, config.cutoff_1)?;
    let p2 = thermal_populations(nbar_2, config.cutoff_2)?;
    TwoModeState::product(
        config,
        Array2::from_diag(&p1.mapv(c)),
        Array2::from_diag(&p2.mapv(c)),
    )
}

/// Tr(A B) for same-shape square matrices.
fn trace_product(a: &ArrayView2<C64>, b: &ArrayView2<C64>) -> C64 {
    let n = a.nrows();
    let mut s = c(0.0);
    for i in 0..n {
        for j in 0..n {
            s += a[[i, j]] * b[[j, i]];
        }
    }
    s
}

/// Tr(rho A) for a single-mode operator, with `None` meaning identity.
fn single_trace(rho: &Array2<C64>, a: &Option<Array2<C64>>) -> C64 {
    match a {
        None => linalg::trace(&rho.view()),
        Some(m) => trace_product(&rho.view(), &m.view()),
    }
}

/// Tr(rho · op).
pub fn expectation(state: &TwoModeState, op: &ModeOperator) -> Result<C64> {
    let config = state.config();
    if op.config() != config {
        return Err(Error::DimensionMismatch { expected: config.dim(), found: op.config().dim() });
    }
    let (c1, c2) = (config.cutoff_1, config.cutoff_2);
    let mut total = c(0.0);
    match state.repr() {
        StateRepr::Pure(v) => {
            let w = op.apply_vec(v);
            total = v.iter().zip(w.iter()).map(|(a, b)| a.conj() * b).sum();
        }
        StateRepr::Product(r1, r2) => {
            for t in op.terms() {
                total += t.coeff * single_trace(r1, &t.mode_1) * single_trace(r2, &t.mode_2);
            }
        }
        StateRepr::Dense(rho) => {
            for t in op.terms() {
                let red = partial_trace_with(rho, c1, c2, t.mode_2.as_ref());
                total += t.coeff * single_trace(&red, &t.mode_1);
            }
        }
    }
    Ok(total)
}

/// T[i1, j1] = sum_{i2, j2} rho[(i1,i2),(j1,j2)] B[j2, i2], i.e. Tr_2(rho (1 ⊗ B)).
pub(crate) fn partial_trace_with(rho: &Array2<C64>, c1: usize, c2: usize, b: Option<&Array2<C64>>) -> Array2<C64> {
    let mut t = Array2::zeros((c1, c1));
    for i1 in 0..c1 {
        for j1 in 0..c1 {
            let blk = rho.slice(s![i1 * c2..(i1 + 1) * c2, j1 * c2..(j1 + 1) * c2]);
            t[[i1, j1]] = match b {
                None => linalg::trace(&blk),
                Some(bm) => trace_product(&blk, &bm.view()),
            };
        }
    }
    t
}

/// -sum lambda ln lambda over eigenvalues above 1e-14.
pub fn entropy_of(rho: &Array2<C64>) -> Result<f64> {
    let ev = linalg::eigvalsh(rho)?;
    Ok(ev.iter().filter(|&&l| l > 1e-14).map(|&l| -l * l.ln()).sum())
}

pub fn von_neumann_entropy(state: &TwoModeState) -> Result<f64> {
    match state.repr() {
        StateRepr::Pure(_) => Ok(0.0),
        StateRepr::Product(a, b) => Ok(entropy_of(a)? + entropy_of(b)?),
        StateRepr::Dense(r) => entropy_of(r),
    }
}

/// Entropy of the mode-1 reduced state; the entanglement entropy when the state is pure.
pub fn entanglement_entropy(state: &TwoModeState) -> Result<f64> {
    entropy_of(&state.reduced(Mode::One))
}

/// |<psi|phi>|^2 for pure states, <psi|rho|psi> when one side is mixed.
pub fn fidelity_with_pure(state: &TwoModeState, psi: &Array1<C64>) -> f64 {
    let norm2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
    match state.repr() {
        StateRepr::Pure(v) => v.iter().zip(psi.iter()).map(|(a, b)| b.conj() * a).sum::<C64>().norm_sqr() / norm2,
        _ => {
            let rho = state.rho();
            let rp = rho.dot(psi);
            psi.iter().zip(rp.iter()).map(|(a, b)| a.conj() * b).sum::<C64>().re / norm2
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: usize) -> FockConfig {
        FockConfig::symmetric(n).unwrap()
    }

    #[test]
    fn rejects_tiny_cutoff() {
        assert!(FockConfig::new(1, 5).is_err());
    }

    #[test]
    fn ground_state_from_zero_occupation() {
        let s = thermal_state(0.0, 0.0, cfg(6)).unwrap();
        let rho = s.rho();
        assert!((rho[[0, 0]] - c(1.0)).norm() < 1e-15);
        assert!((rho.iter().map(|z| z.norm()).sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn thermal_populations_follow_geometric_law() {
        let p = thermal_populations(0.1, 20).unwrap();
        assert!((p[0] - 1.0 / 1.1).abs() < 1e-12);
        for n in 0..20 {
            let exact = (1.0 / 1.1) * (0.1f64 / 1.1).powi(n as i32);
            assert!((p[n] - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn thermal_tail_guard() {
        assert!(matches!(thermal_populations(5.0, 20), Err(Error::CutoffTooSmall(_))));
    }

    #[test]
    fn thermal_mean_occupation() {
        let s = thermal_state(0.29, 0.0, cfg(30)).unwrap();
        assert!((s.mean_occupation(Mode::One) - 0.29).abs() < 1e-6);
    }

    #[test]
    fn displacement_of_vacuum_is_momentum_kick() {
        let mu: f64 = 1.0;
        let config = cfg(30);
        let d = displacement(Mode::One, I * (mu / 2f64.sqrt()), config).unwrap();
        let vac = TwoModeState::fock(config, 0, 0).unwrap();
        let (s, norm) = vac.apply_and_normalize(&d).unwrap();
        assert!((norm - 1.0).abs() < 1e-12);
        let x = expectation(&s, &ModeOperator::position(config, Mode::One)).unwrap();
        let p = expectation(&s, &ModeOperator::momentum(config, Mode::One)).unwrap();
        assert!(x.norm() < 1e-12);
        assert!((p - c(mu)).norm() < 1e-10);
        let d_mat = displacement_matrix(I * (mu / 2f64.sqrt()), 30).unwrap();
        assert!((d_mat[[0, 0]] - c((-0.25f64).exp())).norm() < 1e-10);
        assert!((d_mat[[0, 0]].re - 0.77880).abs() < 1e-5);
    }

    #[test]
    fn displacement_zero_is_identity() {
        let d = displacement_matrix(c(0.0), 8).unwrap();
        assert_eq!(d, Array2::eye(8));
    }

    #[test]
    fn displacement_inverse_is_negative_amplitude() {
        for &cut in &[24usize, 40, 60] {
            let beta = C64::new(0.3, 0.4) * ((cut as f64 / 4.0).sqrt() / 0.5);
            let dp = displacement_matrix(beta, cut).unwrap();
            let dm = displacement_matrix(-beta, cut).unwrap();
            let prod = dp.dot(&dm);
            assert!(linalg::max_abs_diff(&prod.view(), &Array2::eye(cut).view()) < 1e-9);
        }
    }

    #[test]
    fn displacement_refuses_undersized_cutoff() {
        assert!(matches!(displacement_matrix(c(3.0), 10), Err(Error::CutoffTooSmall(_))));
    }

    #[test]
    fn thermal_quadrature_variance() {
        let config = cfg(40);
        let s = thermal_state(0.7, 0.2, config).unwrap();
        let x = ModeOperator::position(config, Mode::One);
        let x2 = x.times(&x);
        assert!((expectation(&s, &x2).unwrap() - c(1.2)).norm() < 1e-9);
        assert!(expectation(&s, &x).unwrap().norm() < 1e-14);
    }

    #[test]
    fn entropy_of_thermal_and_pure_states() {
        let config = FockConfig::new(40, 3).unwrap();
        let s = thermal_state(1.0, 0.0, config).unwrap();
        let expect = 2.0 * 2f64.ln();
        assert!((von_neumann_entropy(&s).unwrap() - expect).abs() < 1e-8);
        let dense = TwoModeState::dense(config, s.rho().into_owned()).unwrap();
        assert!((von_neumann_entropy(&dense).unwrap() - expect).abs() < 1e-8);
        let dense_pure = TwoModeState::dense(cfg(4), TwoModeState::fock(cfg(4), 1, 2).unwrap().rho().into_owned()).unwrap();
        assert!(von_neumann_entropy(&dense_pure).unwrap().abs() < 1e-9);
    }

    #[test]
    fn partial_trace_of_product_returns_factors() {
        let config = FockConfig::new(25, 30).unwrap();
        let s = thermal_state(0.3, 0.6, config).unwrap();
        let dense = TwoModeState::dense(config, s.rho().into_owned()).unwrap();
        let r1 = s.reduced(Mode::One);
        let r2 = s.reduced(Mode::Two);
        assert!(linalg::max_abs_diff(&dense.reduced(Mode::One).view(), &r1.view()) < 1e-12);
        assert!(linalg::max_abs_diff(&dense.reduced(Mode::Two).view(), &r2.view()) < 1e-12);
    }

    #[test]
    fn operator_application_matches_dense_matrix() {
        let config = FockConfig::new(4, 5).unwrap();
        let a = ModeOperator::annihilation(config, Mode::One);
        let b = ModeOperator::creation(config, Mode::Two);
        let op = a.times(&b).plus(&ModeOperator::position(config, Mode::Two).scale(I));
        let dense = op.matrix();
        let m = Array2::from_shape_fn((20, 3), |(i, j)| C64::new(i as f64 * 0.1, j as f64 - 1.0));
        let fast = op.apply_left(&m.view());
        assert!(linalg::max_abs_diff(&fast.view(), &dense.dot(&m).view()) < 1e-12);
    }

    #[test]
    fn expectation_agrees_across_representations() {
        let config = FockConfig::new(30, 20).unwrap();
        let s = thermal_state(0.4, 0.2, config).unwrap();
        let dense = TwoModeState::dense(config, s.rho().into_owned()).unwrap();
        let op = ModeOperator::number(config, Mode::One)
            .times(&ModeOperator::position(config, Mode::Two))
            .plus(&ModeOperator::number(config, Mode::Two));
        let e1 = expectation(&s, &op).unwrap();
        let e2 = expectation(&dense, &op).unwrap();
        let e3 = linalg::trace(&dense.rho().dot(&op.matrix()).view());
        assert!((e1 - e2).norm() < 1e-12 && (e1 - e3).norm() < 1e-12);
    }

    #[test]
    fn exact_quadrature_monomials() {
        // On the retained levels X^2 must equal (2n+1)/2 on the diagonal even at the edge.
        let x2 = quadrature_monomial(2, 0, 5);
        for n in 0..5 {
            assert!((x2[[n, n]] - c(n as f64 + 0.5)).norm() < 1e-12);
        }
        let xp = quadrature_monomial(1, 1, 6);
        let px = quadrature_monomial(0, 1, 7).dot(&quadrature_monomial(1, 0, 7));
        // [X, P] = i on the retained block when built on padded space.
        let comm = &xp - &px.slice(s![..6, ..6]);
        for n in 0..5 {
            assert!((comm[[n, n]] - I).norm() < 1e-12);
        }
    }
}
