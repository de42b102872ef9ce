//! Moment-determinant inseparability criteria and the non-Gaussianity measure.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::analytic::heralded_moments;
use crate::error::{Error, Result};
use crate::fock::{von_neumann_entropy, TwoModeState};
use crate::herald::{ClickOutcome, ProtocolParams};
use crate::linalg::{self, c, I};
use crate::moments::{ladder_to_quadrature, moments_from_state, Ladder, LadderWord, MomentTable, Quad, QuadWord};
use crate::open_system::{evolve_moments, EnvParams, MeasurementSchedule};

/// Threshold below which a determinant counts as negative.
pub const DEFAULT_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CriterionName {
    D5,
    S3,
    Custom(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub name: CriterionName,
    /// Determinant of the Hermitized matrix.
    pub value: f64,
    /// Matrix as assembled from the table, row-major.
    pub matrix: Vec<Vec<C64>>,
    pub entangled: bool,
    pub tolerance: f64,
    /// |Im det| of the raw matrix.
    pub imag_residual: f64,
    /// Largest |M - M^dag| entry of the raw matrix.
    pub hermitian_defect: f64,
    /// Rounding scale of the determinant, from per-entry error estimates propagated through
    /// the cofactors.
    pub noise_floor: f64,
}

impl CriterionResult {
    pub fn matrix(&self) -> Array2<C64> {
        let n = self.matrix.len();
        Array2::from_shape_fn((n, n), |(i, j)| self.matrix[i][j])
    }

    /// Whether the value is distinguishable from zero at double precision.
    pub fn is_resolved(&self) -> bool {
        self.value.abs() > self.noise_floor
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("criterion result serializes")
    }
}

fn is_mode_1(l: Ladder) -> bool {
    matches!(l, Ladder::B1 | Ladder::B1Dag)
}

fn split(word: &LadderWord) -> (Vec<Ladder>, Vec<Ladder>) {
    word.0.iter().partition(|&&l| is_mode_1(l))
}

/// Moment matrix with entries <(r_i c_j) restricted to mode 1, (c_j r_i) restricted to mode 2>,
/// where r_i = c_i^dag: the partial transpose of <c_i^dag c_j>.
pub fn moment_matrix(table: &MomentTable, columns: &[LadderWord]) -> Result<Array2<C64>> {
    Ok(moment_matrix_with_scale(table, columns)?.0)
}

/// The moment matrix together with the magnitude scale of each entry's evaluation.
fn moment_matrix_with_scale(table: &MomentTable, columns: &[LadderWord]) -> Result<(Array2<C64>, Array2<f64>)> {
    let n = columns.len();
    let mut m = Array2::zeros((n, n));
    let mut scale = Array2::zeros((n, n));
    for (i, ci) in columns.iter().enumerate() {
        let (r1, r2) = split(&ci.dagger());
        for (j, cj) in columns.iter().enumerate() {
            let (c1, c2) = split(cj);
            let mut letters = r1.clone();
            letters.extend(&c1);
            letters.extend(&c2);
            letters.extend(&r2);
            let poly = ladder_to_quadrature(&LadderWord(letters))?;
            m[[i, j]] = table.eval(&poly)?;
            scale[[i, j]] = table.eval_magnitude(&poly)?;
        }
    }
    Ok((m, scale))
}

/// First-order bound sum_ij |cofactor_ij| * err_ij on the determinant error.
fn determinant_error(m: &Array2<C64>, err: &Array2<f64>) -> f64 {
    let n = m.nrows();
    if n == 1 {
        return err[[0, 0]];
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            let minor = Array2::from_shape_fn((n - 1, n - 1), |(a, b)| {
                m[[if a < i { a } else { a + 1 }, if b < j { b } else { b + 1 }]]
            });
            total += linalg::det(&minor.view()).norm() * err[[i, j]];
        }
    }
    total
}

pub fn d5_columns() -> Vec<LadderWord> {
    use Ladder::*;
    vec![
        LadderWord::new(&[]),
        LadderWord::new(&[B1]),
        LadderWord::new(&[B1Dag]),
        LadderWord::new(&[B2Dag]),
        LadderWord::new(&[B2]),
    ]
}

pub fn s3_columns() -> Vec<LadderWord> {
    use Ladder::*;
    vec![LadderWord::new(&[]), LadderWord::new(&[B2Dag]), LadderWord::new(&[B1, B2Dag])]
}

pub fn evaluate(name: CriterionName, table: &MomentTable, columns: &[LadderWord]) -> Result<CriterionResult> {
    let (raw, scale) = moment_matrix_with_scale(table, columns)?;
    let adj = linalg::adjoint(&raw.view());
    let hermitian_defect = linalg::max_abs_diff(&raw.view(), &adj.view());
    let herm = (&raw + &adj) / c(2.0);
    let value = linalg::det(&herm.view()).re;
    let imag_residual = linalg::det(&raw.view()).im.abs();
    let row_norms: f64 = herm.outer_iter().map(|row| row.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()).product();
    let noise_floor = 64.0 * f64::EPSILON * (determinant_error(&herm, &scale) + row_norms);
    let matrix = raw.outer_iter().map(|row| row.to_vec()).collect();
    Ok(CriterionResult {
        name,
        value,
        matrix,
        entangled: value < -DEFAULT_TOLERANCE,
        tolerance: DEFAULT_TOLERANCE,
        imag_residual,
        hermitian_defect,
        noise_floor,
    })
}

pub fn build_d5(table: &MomentTable) -> Result<CriterionResult> {
    evaluate(CriterionName::D5, table, &d5_columns())
}

pub fn build_s3(table: &MomentTable) -> Result<CriterionResult> {
    evaluate(CriterionName::S3, table, &s3_columns())
}

/// S3 of the pure heralded cat in a closed system:
/// -mu^6 e^{-mu^2} / [64 (1 + e^{-mu^2/2} cos phi)^3].
pub fn s3_ground_closed_form(mu: f64, phi: f64) -> Result<f64> {
    let base = 1.0 + (-mu * mu / 2.0).exp() * phi.cos();
    if base < 1e-12 {
        return Err(Error::DegenerateHerald(format!("1 + e^(-mu^2/2) cos(phi) = {base:.3e}")));
    }
    // (mu^2/base)^3 avoids 0/0 for small mu at phi = pi.
    let r = mu * mu / base;
    Ok(-r * r * r * (-mu * mu).exp() / 64.0)
}

/// S(rho_G) - S(rho) for the Gaussian state with the same first and second moments.
pub fn non_gaussianity(state: &TwoModeState) -> Result<f64> {
    let table = moments_from_state(state, 2)?;
    let sg = gaussian_entropy(&table)?;
    Ok(sg - von_neumann_entropy(state)?)
}

/// Symmetrized covariance matrix over (X1, P1, X2, P2).
pub fn covariance_matrix(table: &MomentTable) -> Result<Array2<f64>> {
    let letters = [Quad::X1, Quad::P1, Quad::X2, Quad::P2];
    let mean: Vec<f64> = letters
        .iter()
        .map(|&l| table.word(&QuadWord(vec![l])).map(|v| v.re))
        .collect::<Result<_>>()?;
    let mut sigma = Array2::zeros((4, 4));
    for i in 0..4 {
        for j in 0..4 {
            let ab = table.word(&QuadWord(vec![letters[i], letters[j]]))?;
            let ba = table.word(&QuadWord(vec![letters[j], letters[i]]))?;
            sigma[[i, j]] = ((ab + ba) / 2.0).re - mean[i] * mean[j];
        }
    }
    Ok(sigma)
}

/// Symplectic eigenvalues (each once), vacuum = 1/2.
pub fn symplectic_eigenvalues(sigma: &Array2<f64>) -> Result<Vec<f64>> {
    let n = sigma.nrows();
    let (w, v) = linalg::eigh(&sigma.mapv(c))?;
    if let Some(&min) = w.iter().min_by(|a, b| a.total_cmp(b)) {
        if min < -1e-12 {
            return Err(Error::NonPhysicalCovariance(min));
        }
    }
    let sqrt_w = Array1::from_iter(w.iter().map(|&x| c(x.max(0.0).sqrt())));
    let root = (&v * &sqrt_w.view().insert_axis(ndarray::Axis(0))).dot(&linalg::adjoint(&v.view()));
    let mut omega = Array2::<C64>::zeros((n, n));
    for k in 0..n / 2 {
        omega[[2 * k, 2 * k + 1]] = I;
        omega[[2 * k + 1, 2 * k]] = -I;
    }
    let h = root.dot(&omega).dot(&root);
    let ev = linalg::eigvalsh(&h)?;
    let mut nu: Vec<f64> = ev.iter().filter(|&&x| x > 0.0).copied().collect();
    nu.sort_by(|a, b| a.total_cmp(b));
    // A degenerate (zero-determinant) covariance can hide eigenvalue pairs at zero.
    while nu.len() < n / 2 {
        nu.insert(0, 0.0);
    }
    for &x in &nu {
        if x < 0.5 - 1e-9 {
            return Err(Error::NonPhysicalCovariance(x));
        }
    }
    Ok(nu)
}

fn bosonic_entropy(nu: f64) -> f64 {
    let (a, b) = (nu + 0.5, nu - 0.5);
    let tb = if b > 0.0 { b * b.ln() } else { 0.0 };
    a * a.ln() - tb
}

/// Entropy of the Gaussian state with the table's first and second moments.
pub fn gaussian_entropy(table: &MomentTable) -> Result<f64> {
    let sigma = covariance_matrix(table)?;
    Ok(symplectic_eigenvalues(&sigma)?.into_iter().map(bosonic_entropy).sum())
}

/// S3 of the single-click heralded state as measured after the verification delays.
pub fn s3_measured(mu: f64, phi: f64, nbar: f64, env: &EnvParams) -> Result<f64> {
    Ok(s3_measured_result(mu, phi, nbar, env)?.value)
}

pub fn s3_measured_result(mu: f64, phi: f64, nbar: f64, env: &EnvParams) -> Result<CriterionResult> {
    let params = ProtocolParams::parallel(mu, phi, nbar)?;
    let table = heralded_moments(&params, ClickOutcome::ONE_ZERO, 4)?;
    let evolved = evolve_moments(&table, env, &MeasurementSchedule::verification(env))?;
    build_s3(&evolved)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoolingResult {
    pub nbar_max: f64,
    /// False when S3 is non-negative already at nbar = 0.
    pub verifiable: bool,
}

/// Largest initial occupation for which the measured S3 stays negative.
pub fn max_cooled_occupation(mu: f64, env: &EnvParams, phi: f64) -> Result<CoolingResult> {
    if !(mu > 0.0) {
        return Err(Error::InvalidParameter(format!("mu must be positive, got {mu}")));
    }
    let f = |n: f64| s3_measured(mu, phi, n, env);
    if f(0.0)? >= 0.0 {
        return Ok(CoolingResult { nbar_max: 0.0, verifiable: false });
    }
    let (mut lo, mut hi) = (0.0, 0.01);
    while f(hi)? < 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e9 {
            return Ok(CoolingResult { nbar_max: f64::INFINITY, verifiable: true });
        }
    }
    while hi - lo > 1e-9 * hi.max(1e-6) {
        let mid = 0.5 * (lo + hi);
        if f(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(CoolingResult { nbar_max: 0.5 * (lo + hi), verifiable: true })
}

/// Smallest mu in [0.5, 8] above which the measured S3 at `nbar` is no longer negative.
///
/// Scans in steps of 0.1 and refines the first sign change by bisection; `None` if S3
/// stays negative over the whole range. Only resolvably positive values count as a sign
/// change: for large mu the closed-system S3 ~ -mu^6 e^{-mu^2} drops below rounding noise.
pub fn mu_critical(env: &EnvParams, nbar: f64, phi: f64) -> Result<Option<f64>> {
    let positive = |mu: f64| -> Result<bool> {
        let r = s3_measured_result(mu, phi, nbar, env)?;
        Ok(r.value > r.noise_floor)
    };
    let mut prev = 0.5;
    if positive(prev)? {
        return Ok(Some(prev));
    }
    for k in 6..=80 {
        let mu = k as f64 / 10.0;
        if positive(mu)? {
            let (mut lo, mut hi) = (prev, mu);
            while hi - lo > 1e-9 {
                let mid = 0.5 * (lo + hi);
                if !positive(mid)? {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Ok(Some(0.5 * (lo + hi)));
        }
        prev = mu;
    }
    Ok(None)
}
