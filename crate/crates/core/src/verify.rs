//! Simulated verification: homodyne port observables, synthetic moment datasets and
//! order-by-order recovery of mechanical moments from them.
//!
//! Letters of the recovered table are the ones the pulses see: X_j from the pulse at
//! t = 0 and P_j from the pulse at tau'. Tables evolved with a verification schedule
//! therefore match what an experiment would reconstruct.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use ndarray::{Array1, Array2};
use ndarray_linalg::SVD;
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{binomial, c, eigh, I};
use crate::moments::{symmetrized_polynomial, ModePoly, MomentTable, Monomial, Provenance};

/// Verification coupling used when none is given.
pub const DEFAULT_CHI: f64 = 4.0;
/// Relative singular value below which a recovery direction counts as missing.
pub const RANK_TOL: f64 = 1e-10;
/// Largest accepted condition number of a recovery system.
pub const MAX_CONDITION: f64 = 1e8;
/// Variance of a vacuum input quadrature.
const VACUUM_VARIANCE: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseSet {
    /// zeta_1 .. zeta_4, reduced to [0, 2 pi).
    pub zeta: [f64; 4],
}

impl PhaseSet {
    pub fn new(z1: f64, z2: f64, z3: f64, z4: f64) -> Self {
        Self { zeta: [z1, z2, z3, z4].map(|z| z.rem_euclid(TAU)) }
    }

    pub fn zero() -> Self {
        Self { zeta: [0.0; 4] }
    }
}

/// Verification pulse slots. Early pulses read X, late pulses (at tau') read P.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pulse {
    Mode1Early,
    Mode1Late,
    Mode2Early,
    Mode2Late,
}

impl Pulse {
    pub const ALL: [Pulse; 4] = [Pulse::Mode1Early, Pulse::Mode1Late, Pulse::Mode2Early, Pulse::Mode2Late];

    fn slot(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Port {
    A,
    B,
    C,
    D,
}

impl Port {
    pub const ALL: [Port; 4] = [Port::A, Port::B, Port::C, Port::D];
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pathway {
    /// Occupied slots in `Pulse::ALL` order.
    pub pulses: [bool; 4],
    pub phases: PhaseSet,
    /// Interferometer phase of the heralding stage, fixed during verification.
    pub phi: f64,
    pub chi: f64,
}

impl Pathway {
    pub fn new(pulses: &[Pulse], phases: PhaseSet, phi: f64, chi: f64) -> Result<Self> {
        if pulses.is_empty() {
            return Err(Error::InvalidParameter("a pathway needs at least one pulse".into()));
        }
        if !(chi > 0.0) {
            return Err(Error::InvalidParameter(format!("chi must be positive, got {chi}")));
        }
        let mut slots = [false; 4];
        for p in pulses {
            slots[p.slot()] = true;
        }
        Ok(Self { pulses: slots, phases, phi, chi })
    }

    /// All four pulses.
    pub fn full(phases: PhaseSet, phi: f64, chi: f64) -> Result<Self> {
        Self::new(&Pulse::ALL, phases, phi, chi)
    }

    pub fn single(pulse: Pulse, phi: f64, chi: f64) -> Result<Self> {
        Self::new(&[pulse], PhaseSet::zero(), phi, chi)
    }
}

/// Linear form chi-weighted over (X1, P1, X2, P2) plus input noise over the four
/// beam-splitter input slots, each an independent vacuum quadrature.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PortObservable {
    pub mech: [C64; 4],
    pub noise: [C64; 4],
}

impl PortObservable {
    /// Formal adjoint (conjugated coefficients; the letters are Hermitian).
    pub fn conj(&self) -> Self {
        Self { mech: self.mech.map(|z| z.conj()), noise: self.noise.map(|z| z.conj()) }
    }

    /// Coefficients of S(p, q, r, s) in the order-d part of <M^d>.
    fn sym_coefficient(&self, m: Monomial) -> C64 {
        let [p, q, r, s] = m.exponents();
        let d = m.order();
        self.mech[0].powu(p as u32)
            * self.mech[1].powu(q as u32)
            * self.mech[2].powu(r as u32)
            * self.mech[3].powu(s as u32)
            * binomial(d as u64, (p + q) as u64)
    }
}

fn cis(x: f64) -> C64 {
    C64::from_polar(1.0, x)
}

pub fn port_observable(pathway: &Pathway, port: Port) -> PortObservable {
    let [z1, z2, z3, z4] = pathway.phases.zeta;
    let phi = pathway.phi;
    let slots = match port {
        Port::A => [cis(z3), cis(z3 + z1), cis(phi), cis(phi + z2)],
        Port::B => [cis(z3), cis(z3 + z1), -cis(phi), -cis(phi + z2)],
        Port::C => [c(1.0), -cis(z1), -cis(phi + z4), -cis(phi + z4 + z2)],
        Port::D => [c(1.0), -cis(z1), cis(phi + z4), -cis(phi + z4 + z2)],
    }
    .map(|z| z * 0.5);
    let mut mech = [c(0.0); 4];
    for k in 0..4 {
        if pathway.pulses[k] {
            mech[k] = slots[k] * pathway.chi;
        }
    }
    PortObservable { mech, noise: slots }
}

fn double_factorial_odd(n: i64) -> f64 {
    // (n)!! for odd n, with (-1)!! = 1
    let mut out = 1.0;
    let mut k = n;
    while k > 1 {
        out *= k as f64;
        k -= 2;
    }
    out
}

/// <N_u^a N_v^b> for Gaussian linear forms over independent vacuum quadratures.
fn noise_moment(u: &[C64; 4], a: usize, v: &[C64; 4], b: usize) -> C64 {
    let dot = |x: &[C64; 4], y: &[C64; 4]| x.iter().zip(y).map(|(p, q)| p * q).sum::<C64>() * VACUUM_VARIANCE;
    let (suu, svv, suv) = (dot(u, u), dot(v, v), dot(u, v));
    let mut acc = c(0.0);
    for k in 0..=a.min(b) {
        if (a - k) % 2 != 0 || (b - k) % 2 != 0 {
            continue;
        }
        let ways = binomial(a as u64, k as u64)
            * binomial(b as u64, k as u64)
            * crate::linalg::factorial(k as u64)
            * double_factorial_odd(a as i64 - k as i64 - 1)
            * double_factorial_odd(b as i64 - k as i64 - 1);
        acc += suv.powu(k as u32) * suu.powu(((a - k) / 2) as u32) * svv.powu(((b - k) / 2) as u32) * ways;
    }
    acc
}

fn mode_parts(mech: &[C64; 4]) -> (ModePoly, ModePoly) {
    let m1 = ModePoly::x().scale(mech[0]).plus(&ModePoly::p().scale(mech[1]));
    let m2 = ModePoly::x().scale(mech[2]).plus(&ModePoly::p().scale(mech[3]));
    (m1, m2)
}

fn powers(poly: &ModePoly, n: usize) -> Vec<ModePoly> {
    let mut out = vec![ModePoly::one()];
    for k in 1..=n {
        out.push(out[k - 1].mul(poly));
    }
    out
}

/// <U^i V^k> for all i <= imax, k <= kmax, with U, V port observables (or adjoints).
struct ProductMoments {
    values: Vec<Vec<C64>>,
}

impl ProductMoments {
    fn new(table: &MomentTable, u: &PortObservable, imax: usize, v: &PortObservable, kmax: usize) -> Result<Self> {
        let (au, bu) = mode_parts(&u.mech);
        let (av, bv) = mode_parts(&v.mech);
        let (au, bu, av, bv) = (powers(&au, imax), powers(&bu, imax), powers(&av, kmax), powers(&bv, kmax));
        let m1: Vec<Vec<ModePoly>> = au.iter().map(|x| av.iter().map(|y| x.mul(y)).collect()).collect();
        let m2: Vec<Vec<ModePoly>> = bu.iter().map(|x| bv.iter().map(|y| x.mul(y)).collect()).collect();
        let pair = |x: &ModePoly, y: &ModePoly| -> Result<C64> {
            let mut acc = c(0.0);
            for (&(p, q), &a) in &x.0 {
                for (&(r, s), &b) in &y.0 {
                    acc += a * b * table.get(Monomial { p, q, r, s })?;
                }
            }
            Ok(acc)
        };
        // mechanical <M_U^i M_V^k>, the two modes commuting with each other
        let mut mech = vec![vec![c(0.0); kmax + 1]; imax + 1];
        for i in 0..=imax {
            for k in 0..=kmax {
                let mut acc = c(0.0);
                for i1 in 0..=i {
                    for k1 in 0..=k {
                        let w = binomial(i as u64, i1 as u64) * binomial(k as u64, k1 as u64);
                        acc += pair(&m1[i1][k1], &m2[i - i1][k - k1])? * w;
                    }
                }
                mech[i][k] = acc;
            }
        }
        let mut values = vec![vec![c(0.0); kmax + 1]; imax + 1];
        for i in 0..=imax {
            for k in 0..=kmax {
                let mut acc = c(0.0);
                for i1 in 0..=i {
                    for k1 in 0..=k {
                        let w = binomial(i as u64, i1 as u64) * binomial(k as u64, k1 as u64);
                        acc += mech[i1][k1] * noise_moment(&u.noise, i - i1, &v.noise, k - k1) * w;
                    }
                }
                values[i][k] = acc;
            }
        }
        Ok(Self { values })
    }
}

/// <P^d> for d = 0..=d_max (index d).
pub fn exact_port_moments(pathway: &Pathway, port: Port, table: &MomentTable, d_max: usize) -> Result<Vec<C64>> {
    let obs = port_observable(pathway, port);
    let pm = ProductMoments::new(table, &obs, d_max, &obs, 0)?;
    Ok(pm.values.iter().map(|row| row[0]).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomodyneDataset {
    pub pathway: Pathway,
    pub port: Port,
    /// None for the noiseless limit.
    pub n_samples: Option<u64>,
    /// Estimates of <P^d> for d = 1..=d_max.
    pub sample_moments: Vec<C64>,
    /// Standard errors (Re, Im) of the estimates.
    pub std_errors: Vec<(f64, f64)>,
    /// Covariance of the real components (Re m_1..Re m_d, Im m_1..Im m_d).
    pub covariance: Vec<Vec<f64>>,
}

impl HomodyneDataset {
    pub fn d_max(&self) -> usize {
        self.sample_moments.len()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("dataset serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::InvalidParameter(format!("dataset JSON: {e}")))
    }
}

/// Exact port moments with their single-shot sampling covariance, ready to draw
/// finite-N estimates from.
#[derive(Clone, Debug)]
pub struct DatasetModel {
    pub pathway: Pathway,
    pub port: Port,
    exact: Vec<C64>,
    per_shot: Array2<f64>,
    factor: Array2<f64>,
}

impl DatasetModel {
    /// Needs `table` up to order 2 d_max.
    pub fn new(pathway: &Pathway, port: Port, table: &MomentTable, d_max: usize) -> Result<Self> {
        let obs = port_observable(pathway, port);
        let adj = obs.conj();
        let oo = ProductMoments::new(table, &obs, d_max, &obs, d_max)?;
        let oa = ProductMoments::new(table, &obs, d_max, &adj, d_max)?;
        let ao = ProductMoments::new(table, &adj, d_max, &obs, d_max)?;
        let aa = ProductMoments::new(table, &adj, d_max, &adj, d_max)?;
        let exact: Vec<C64> = (1..=d_max).map(|d| oo.values[d][0]).collect();
        let exact_adj: Vec<C64> = (1..=d_max).map(|d| aa.values[d][0]).collect();
        // real components H_d = (O_d + O_d^dag)/2 and K_d = (O_d - O_d^dag)/2i
        let mean = |d: usize, imag: bool| -> f64 {
            let (o, a) = (exact[d - 1], exact_adj[d - 1]);
            if imag { ((o - a) / (2.0 * I)).re } else { ((o + a) / 2.0).re }
        };
        let second = |d: usize, di: bool, e: usize, ei: bool| -> f64 {
            // sign of the O^dag part in each factor, and the overall prefactor
            let sd = if di { -1.0 } else { 1.0 };
            let se = if ei { -1.0 } else { 1.0 };
            let mut pre = c(0.25);
            if di {
                pre /= I;
            }
            if ei {
                pre /= I;
            }
            let v = oo.values[d][e] + oa.values[d][e] * se + ao.values[d][e] * sd + aa.values[d][e] * (sd * se);
            (pre * v).re
        };
        let n = 2 * d_max;
        let comp = |k: usize| if k < d_max { (k + 1, false) } else { (k - d_max + 1, true) };
        let mut per_shot = Array2::<f64>::zeros((n, n));
        for a in 0..n {
            for b in 0..n {
                let (d, di) = comp(a);
                let (e, ei) = comp(b);
                per_shot[[a, b]] = second(d, di, e, ei) - mean(d, di) * mean(e, ei);
            }
        }
        let sym = (&per_shot + &per_shot.t()) / 2.0;
        let (vals, vecs) = eigh(&sym.mapv(c))?;
        let mut factor = Array2::<f64>::zeros((n, n));
        for j in 0..n {
            let s = vals[j].max(0.0).sqrt();
            for i in 0..n {
                factor[[i, j]] = vecs[[i, j]].re * s;
            }
        }
        Ok(Self { pathway: *pathway, port, exact, per_shot: sym, factor })
    }

    pub fn exact(&self) -> &[C64] {
        &self.exact
    }

    /// Draws an N-shot estimate; `None` returns the exact moments.
    pub fn sample(&self, n_samples: Option<u64>, rng: &mut ChaCha8Rng) -> HomodyneDataset {
        let d_max = self.exact.len();
        let n = 2 * d_max;
        let mut moments = self.exact.clone();
        let mut covariance = vec![vec![0.0; n]; n];
        if let Some(count) = n_samples {
            let scale = 1.0 / (count as f64).sqrt();
            let xi: Array1<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
            let z = self.factor.dot(&xi) * scale;
            for d in 0..d_max {
                moments[d] += C64::new(z[d], z[d + d_max]);
            }
            for a in 0..n {
                for b in 0..n {
                    covariance[a][b] = self.per_shot[[a, b]] / count as f64;
                }
            }
        }
        let std_errors = (0..d_max).map(|d| (covariance[d][d].sqrt(), covariance[d + d_max][d + d_max].sqrt())).collect();
        HomodyneDataset { pathway: self.pathway, port: self.port, n_samples, sample_moments: moments, std_errors, covariance }
    }
}

/// Independent random stream for dataset `index` under `seed`.
pub fn dataset_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn synthesize_dataset(
    pathway: &Pathway,
    port: Port,
    table: &MomentTable,
    d_max: usize,
    n_samples: Option<u64>,
    seed: u64,
) -> Result<HomodyneDataset> {
    let model = DatasetModel::new(pathway, port, table, d_max)?;
    Ok(model.sample(n_samples, &mut dataset_rng(seed, 0)))
}

/// Models for every (pathway, port) pair, in pathway-major order.
pub fn dataset_models(pathways: &[Pathway], ports: &[Port], table: &MomentTable, d_max: usize) -> Result<Vec<DatasetModel>> {
    let pairs: Vec<(Pathway, Port)> = pathways.iter().flat_map(|p| ports.iter().map(move |&k| (*p, k))).collect();
    pairs.par_iter().map(|(p, k)| DatasetModel::new(p, *k, table, d_max)).collect()
}

/// One draw from each model, dataset i using stream i of `seed`.
pub fn sample_all(models: &[DatasetModel], n_samples: Option<u64>, seed: u64) -> Vec<HomodyneDataset> {
    models.iter().enumerate().map(|(i, m)| m.sample(n_samples, &mut dataset_rng(seed, i as u64))).collect()
}

// ---------------------------------------------------------------------------
// recovery

/// Value that is affine in the real noise components of all datasets.
#[derive(Clone, Debug)]
struct Affine {
    value: C64,
    grad: Array1<C64>,
}

impl Affine {
    fn constant(value: C64, dim: usize) -> Self {
        Self { value, grad: Array1::zeros(dim) }
    }

    fn add_scaled(&mut self, other: &Affine, k: C64) {
        self.value += other.value * k;
        self.grad.scaled_add(k, &other.grad);
    }
}

fn rank_rows(a: &Array2<C64>) -> Result<(Array1<f64>, Array2<C64>, Array2<C64>)> {
    let (u, s, vt) = a.svd(true, true)?;
    Ok((s, u.expect("u requested"), vt.expect("vt requested")))
}

/// Reconstructs canonical moments up to `target_order` from port-moment datasets.
///
/// At each order the lower-order contributions (known noise moments times already
/// recovered symmetrized sums) are subtracted and the symmetrized sums of that order
/// are solved by least squares; canonical moments then follow from the commutation
/// relations. Standard errors are propagated to first order from the dataset covariances.
pub fn recover_moments(datasets: &[HomodyneDataset], target_order: usize) -> Result<MomentTable> {
    let dims: Vec<usize> = datasets.iter().map(|ds| 2 * ds.d_max()).collect();
    let offsets: Vec<usize> = dims.iter().scan(0, |acc, &d| { let o = *acc; *acc += d; Some(o) }).collect();
    let dim: usize = dims.iter().sum();
    let observables: Vec<PortObservable> = datasets.iter().map(|ds| port_observable(&ds.pathway, ds.port)).collect();
    let noise: Vec<Vec<C64>> = observables
        .iter()
        .zip(datasets)
        .map(|(o, ds)| (0..=ds.d_max()).map(|j| noise_moment(&o.noise, j, &o.noise, 0)).collect())
        .collect();

    let mut sym: BTreeMap<Monomial, Affine> = BTreeMap::new();
    let mut canon: BTreeMap<Monomial, Affine> = BTreeMap::new();
    sym.insert(Monomial::ONE, Affine::constant(c(1.0), dim));
    canon.insert(Monomial::ONE, Affine::constant(c(1.0), dim));

    for d in 1..=target_order {
        let cols = Monomial::of_order(d);
        let rows: Vec<usize> = (0..datasets.len()).filter(|&i| datasets[i].d_max() >= d).collect();
        if rows.is_empty() {
            return Err(Error::RankDeficient { order: d, missing: cols.iter().map(|m| m.key()).collect() });
        }
        let mut a = Array2::<C64>::zeros((rows.len(), cols.len()));
        let mut y = Vec::with_capacity(rows.len());
        for (ri, &i) in rows.iter().enumerate() {
            let obs = &observables[i];
            for (ci, &m) in cols.iter().enumerate() {
                a[[ri, ci]] = obs.sym_coefficient(m);
            }
            let ds = &datasets[i];
            let mut target = Affine::constant(ds.sample_moments[d - 1], dim);
            target.grad[offsets[i] + d - 1] = c(1.0);
            target.grad[offsets[i] + ds.d_max() + d - 1] = I;
            for j in 0..d {
                let w = -noise[i][d - j] * binomial(d as u64, j as u64);
                if w == c(0.0) {
                    continue;
                }
                for m in Monomial::of_order(j) {
                    target.add_scaled(&sym[&m], w * obs.sym_coefficient(m));
                }
            }
            y.push(target);
        }

        let (s, u, vt) = rank_rows(&a)?;
        let smax = s.iter().cloned().fold(0.0, f64::max);
        let rank = s.iter().filter(|&&x| x > RANK_TOL * smax).count();
        if rank < cols.len() {
            let mut missing = Vec::new();
            for k in rank..cols.len() {
                let v = vt.row(k);
                let peak = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
                for (ci, z) in v.iter().enumerate() {
                    let key = cols[ci].key();
                    if z.norm() > 0.3 * peak && !missing.contains(&key) {
                        missing.push(key);
                    }
                }
            }
            return Err(Error::RankDeficient { order: d, missing });
        }
        let condition = smax / s[cols.len() - 1];
        if condition > MAX_CONDITION {
            return Err(Error::IllConditioned { order: d, condition });
        }
        // pseudo-inverse V diag(1/s) U^H
        for (ci, &m) in cols.iter().enumerate() {
            let mut x = Affine::constant(c(0.0), dim);
            for k in 0..cols.len() {
                let vk = vt[[k, ci]].conj() / s[k];
                for (ri, yr) in y.iter().enumerate() {
                    x.add_scaled(yr, vk * u[[ri, k]].conj());
                }
            }
            sym.insert(m, x);
        }
        for &m in &cols {
            let poly = symmetrized_polynomial(m)?;
            let mut val = sym[&m].clone();
            let mut lead = c(0.0);
            for (&mm, &k) in poly.terms() {
                if mm == m {
                    lead = k;
                } else {
                    val.add_scaled(&canon[&mm], -k);
                }
            }
            val.value /= lead;
            val.grad.mapv_inplace(|z| z / lead);
            canon.insert(m, val);
        }
    }

    let n_samples = datasets.iter().filter_map(|ds| ds.n_samples).min();
    let mut errors = BTreeMap::new();
    for (&m, v) in &canon {
        let mut var = (0.0, 0.0);
        for (i, ds) in datasets.iter().enumerate() {
            let g = v.grad.slice(ndarray::s![offsets[i]..offsets[i] + dims[i]]);
            for a in 0..dims[i] {
                for b in 0..dims[i] {
                    let cab = ds.covariance[a][b];
                    if cab == 0.0 {
                        continue;
                    }
                    var.0 += g[a].re * g[b].re * cab;
                    var.1 += g[a].im * g[b].im * cab;
                }
            }
        }
        errors.insert(m, (var.0.max(0.0).sqrt(), var.1.max(0.0).sqrt()));
    }
    let entries = canon.into_iter().map(|(m, v)| (m, v.value)).collect();
    Ok(MomentTable::new(entries, target_order, Provenance::Recovered { n_samples })?.with_std_errors(errors))
}

// ---------------------------------------------------------------------------
// phase sets

/// Greedy choice of full-pathway phase sets spanning every order up to `target_order`
/// using the given ports. Candidates are grids of zeta multiples of 2 pi / n with n = 4,
/// or n = target_order + 1 from order 4 on (quarter turns alias frequencies 0 and 4).
pub fn select_phase_sets(target_order: usize, ports: &[Port]) -> Vec<PhaseSet> {
    let n = if target_order <= 3 { 4 } else { target_order + 1 };
    let step = TAU / n as f64;
    let mut candidates = Vec::new();
    for a in 0..n {
        for b in 0..n {
            for cc in 0..n {
                for d in 0..n {
                    candidates.push(PhaseSet::new(a as f64 * step, b as f64 * step, cc as f64 * step, d as f64 * step));
                }
            }
        }
    }
    let cols: Vec<Vec<Monomial>> = (1..=target_order).map(Monomial::of_order).collect();
    let rows_of = |ps: &PhaseSet| -> Vec<Vec<Array1<C64>>> {
        let pathway = Pathway::full(*ps, 0.0, 1.0).expect("valid pathway");
        let obs: Vec<PortObservable> = ports.iter().map(|&k| port_observable(&pathway, k)).collect();
        cols.iter()
            .map(|cs| obs.iter().map(|o| cs.iter().map(|&m| o.sym_coefficient(m)).collect()).collect())
            .collect()
    };
    // Gram-Schmidt residual of `row` against `basis`, relative to |row|.
    fn residual(basis: &[Array1<C64>], row: &Array1<C64>) -> (Array1<C64>, f64) {
        let norm = row.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let mut r = row.clone();
        for _ in 0..2 {
            for q in basis {
                let proj: C64 = q.iter().zip(r.iter()).map(|(a, b)| a.conj() * b).sum();
                r.scaled_add(-proj, q);
            }
        }
        let rn = r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        (r, if norm > 0.0 { rn / norm } else { 0.0 })
    }
    let extend = |basis: &mut Vec<Array1<C64>>, rows: &[Array1<C64>], full: usize| -> f64 {
        let mut gain = 0.0;
        for row in rows {
            if basis.len() == full {
                break;
            }
            let (r, rel) = residual(basis, row);
            if rel > 1e-8 {
                let rn = r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                basis.push(r / c(rn));
                gain += rel * rel;
            }
        }
        gain
    };
    let mut bases: Vec<Vec<Array1<C64>>> = cols.iter().map(|_| Vec::new()).collect();
    let mut chosen = Vec::new();
    while bases.iter().zip(&cols).any(|(b, cs)| b.len() < cs.len()) {
        let mut best: Option<(f64, usize)> = None;
        for (ci, ps) in candidates.iter().enumerate() {
            let rows = rows_of(ps);
            let mut score = 0.0;
            for (k, order_rows) in rows.iter().enumerate() {
                if bases[k].len() == cols[k].len() {
                    continue;
                }
                let mut trial = bases[k].clone();
                score += extend(&mut trial, order_rows, cols[k].len());
            }
            if best.map_or(true, |(s, _)| score > s + 1e-12) {
                best = Some((score, ci));
            }
        }
        let (score, ci) = best.expect("candidates nonempty");
        if score < 1e-12 {
            break;
        }
        let rows = rows_of(&candidates[ci]);
        for (k, order_rows) in rows.iter().enumerate() {
            let full = cols[k].len();
            extend(&mut bases[k], order_rows, full);
        }
        chosen.push(candidates[ci]);
    }
    chosen
}

pub fn default_phase_sets(target_order: usize) -> Vec<PhaseSet> {
    select_phase_sets(target_order, &Port::ALL)
}

/// Full-pathway family for `target_order` at the given heralding phase and coupling.
pub fn default_pathways(target_order: usize, phi: f64, chi: f64) -> Result<Vec<Pathway>> {
    default_phase_sets(target_order).into_iter().map(|ps| Pathway::full(ps, phi, chi)).collect()
}
