//! Subcommand implementations. Each builds a `Table`; grid points run on the rayon pool
//! and are collected in grid order.

use std::f64::consts::PI;

use rayon::prelude::*;

use mechcat_core::analytic::heralded_moments;
use mechcat_core::criteria::{build_d5, build_s3, max_cooled_occupation};
use mechcat_core::detector::{true_positive_fraction, DetectorParams, DEFAULT_DARK_RATE, DEFAULT_WINDOW};
use mechcat_core::herald::{heralding_probability, ClickOutcome, Configuration, ProtocolParams};
use mechcat_core::linalg::c;
use mechcat_core::moments::{MomentTable, Monomial};
use mechcat_core::open_system::{evolve_moments, BathCorrelator, EnvParams, MeasurementSchedule};
use mechcat_core::scenario::{
    check_table1, check_table2, compute_table1, compute_table2, map_point, table1_rows, GoldenCheck, MapQuantity,
    Table1Settings,
};
use mechcat_core::sideband::{mu_deficit, mu_effective, mu_nominal, percent_reduction, CavityParams};
use mechcat_core::verify::{dataset_models, default_pathways, recover_moments, sample_all, Port, DEFAULT_CHI};
use mechcat_core::Error;

use crate::config::Config;
use crate::golden;
use crate::table::{col, Cell, Table};
use crate::{CliError, Command, Outcome};

pub fn dispatch(command: Command, cfg: &Config, seed: u64, check: bool) -> Result<Outcome, CliError> {
    if check && !matches!(command, Command::Table1 | Command::Table2 | Command::Verify) {
        return Err(CliError::Config("--check is available for table1, table2 and verify only".into()));
    }
    match command {
        Command::Table1 => table1(cfg, check),
        Command::Table2 => table2(cfg, check),
        Command::Map => map(cfg).map(unchecked),
        Command::CoolingMap => cooling_map(cfg).map(unchecked),
        Command::Detector => detector(cfg).map(unchecked),
        Command::Verify => verify(cfg, seed, check),
        Command::Sideband => sideband(cfg).map(unchecked),
    }
}

fn unchecked(table: Table) -> Outcome {
    Outcome { table, check_failures: None }
}

fn correlator(cfg: &Config) -> Result<BathCorrelator, CliError> {
    match cfg.string("environment.correlator", "2nbar+1")?.as_str() {
        "2nbar+1" => Ok(BathCorrelator::TwoNbarPlusOne),
        "nbar+1/2" => Ok(BathCorrelator::NbarPlusHalf),
        other => Err(CliError::Config(format!("environment.correlator must be \"2nbar+1\" or \"nbar+1/2\", got {other:?}"))),
    }
}

fn configuration(cfg: &Config) -> Result<Configuration, CliError> {
    match cfg.string("protocol.configuration", "parallel")?.as_str() {
        "parallel" => Ok(Configuration::Parallel),
        "series" => Ok(Configuration::Series),
        other => Err(CliError::Config(format!("protocol.configuration must be \"parallel\" or \"series\", got {other:?}"))),
    }
}

fn env(cfg: &Config, q: f64, nbar_bath: f64) -> Result<EnvParams, CliError> {
    let omega_m = cfg.number("environment.omega_m", 1.0)?;
    Ok(EnvParams::new(omega_m, q, nbar_bath)?.with_correlator(correlator(cfg)?))
}

/// Dark-count probability per window: `detector.dark_prob`, else rate times window.
fn dark_prob(cfg: &Config) -> Result<f64, CliError> {
    if cfg.contains("detector.dark_prob") {
        if cfg.contains("detector.dark_rate") || cfg.contains("detector.window") {
            return Err(CliError::Config("set either detector.dark_prob or detector.dark_rate/window, not both".into()));
        }
        return cfg.number("detector.dark_prob", 0.0);
    }
    Ok(cfg.number("detector.dark_rate", DEFAULT_DARK_RATE)? * cfg.number("detector.window", DEFAULT_WINDOW)?)
}

fn checks_to_failures(checks: &[GoldenCheck], gated: impl Fn(&GoldenCheck) -> bool) -> Vec<String> {
    checks
        .iter()
        .filter(|c| gated(c) && !c.pass)
        .map(|c| format!("{} {}: computed {}, printed {} (tolerance {})", c.row, c.column, c.computed, c.expected, c.tolerance))
        .collect()
}

fn row_check_cell(checks: &[GoldenCheck], row: &str) -> Cell {
    let failed: Vec<&str> = checks.iter().filter(|c| c.row == row && !c.pass).map(|c| c.column.as_str()).collect();
    if failed.is_empty() {
        "pass".into()
    } else {
        format!("outside:{}", failed.join(";")).into()
    }
}

pub fn table1(cfg: &Config, check: bool) -> Result<Outcome, CliError> {
    cfg.reject_axes_except(&[])?;
    let settings = Table1Settings {
        eta: cfg.number("detector.eta", 0.8)?,
        dark_prob: dark_prob(cfg)?,
        phi: cfg.number("protocol.phi", PI)?,
        omega_m: cfg.number("environment.omega_m", 1.0)?,
        correlator: correlator(cfg)?,
    };
    let results = compute_table1(&table1_rows(), &settings)?;
    let checks = check_table1(&results);
    let mut t = Table::new(
        "table1",
        vec![
            col("label", "-", "parameter set"),
            col("mu", "1", "optomechanical coupling mu"),
            col("q", "1", "mechanical quality factor"),
            col("nbar", "quanta", "initial thermal occupation of each oscillator"),
            col("nbar_bath", "quanta", "bath occupation"),
            col("D5", "quadrature^8", "five-column moment determinant after the verification delays"),
            col("S3", "quadrature^12", "three-column moment determinant after the verification delays"),
            col("F_res", "percent", "true-positive fraction, number-resolving detector, alpha = 1"),
            col("F_res_opt", "percent", "true-positive fraction, number-resolving detector, optimal alpha"),
            col("alpha_res_opt", "sqrt(photons)", "optimal coherent amplitude, number-resolving detector"),
            col("F_nonres", "percent", "true-positive fraction, threshold detector, alpha = 1"),
            col("F_nonres_opt", "percent", "true-positive fraction, threshold detector, optimal alpha"),
            col("alpha_nonres_opt", "sqrt(photons)", "optimal coherent amplitude, threshold detector"),
            col("printed_check", "-", "pass, or the columns outside tolerance of the published values"),
        ],
    );
    t.num_param("eta", settings.eta);
    t.num_param("dark_prob", settings.dark_prob);
    t.num_param("phi", settings.phi);
    t.num_param("omega_m", settings.omega_m);
    for r in &results {
        t.push(vec![
            r.label.as_str().into(),
            r.mu.into(),
            r.q_factor.into(),
            r.nbar.into(),
            r.nbar_bath.into(),
            r.d5.into(),
            r.s3.into(),
            r.f_res.into(),
            r.f_res_opt.into(),
            r.alpha_res_opt.into(),
            r.f_nonres.into(),
            r.f_nonres_opt.into(),
            r.alpha_nonres_opt.into(),
            row_check_cell(&checks, &r.label),
        ]);
    }
    let check_failures = check.then(|| {
        let proposed = ["i", "ii", "iii", "iv"];
        let mut failures = checks_to_failures(&checks, |c| {
            let value = (c.column == "D5" || c.column == "S3") && proposed.contains(&c.row.as_str());
            value || c.column.ends_with("_sign") || c.column.starts_with('F')
        });
        failures.extend(golden::compare(&t, golden::TABLE1_CSV));
        failures
    });
    Ok(Outcome { table: t, check_failures })
}

pub fn table2(cfg: &Config, check: bool) -> Result<Outcome, CliError> {
    cfg.reject_axes_except(&[])?;
    let results = compute_table2()?;
    let checks = check_table2(&results);
    let mut t = Table::new(
        "table2",
        vec![
            col("label", "-", "device"),
            col("g0_hz", "Hz", "single-photon coupling g0/2pi"),
            col("kappa_hz", "Hz", "cavity decay rate kappa/2pi"),
            col("omega_m_hz", "Hz", "mechanical frequency omega_m/2pi"),
            col("sideband_ratio", "1", "omega_m/kappa"),
            col("mu", "1", "nominal coupling 2 sqrt2 g0/kappa"),
            col("percent_reduction", "percent", "second-order reduction of mu, 100 (omega_m/kappa)^2/6"),
            col("percent_reduction_exact", "percent", "exact reduction 100 (1 - mu'/mu) at t = 2/kappa"),
            col("printed_check", "-", "pass, or the columns differing from the published values"),
        ],
    );
    for r in &results {
        t.push(vec![
            r.label.as_str().into(),
            r.g0_hz.into(),
            r.kappa_hz.into(),
            r.omega_m_hz.into(),
            r.sideband_ratio.into(),
            r.mu.into(),
            r.percent_reduction.into(),
            r.percent_reduction_exact.into(),
            row_check_cell(&checks, &r.label),
        ]);
    }
    let check_failures = check.then(|| {
        let mut failures = checks_to_failures(&checks, |_| true);
        failures.extend(golden::compare(&t, golden::TABLE2_CSV));
        failures
    });
    Ok(Outcome { table: t, check_failures })
}

/// Row-major product of two axes, outer axis first.
fn product(outer: &[f64], inner: &[f64]) -> Vec<(f64, f64)> {
    outer.iter().flat_map(|&a| inner.iter().map(move |&b| (a, b))).collect()
}

pub fn map(cfg: &Config) -> Result<Table, CliError> {
    cfg.reject_axes_except(&["mu", "phi"])?;
    let quantity = match cfg.string("map.quantity", "S3")?.as_str() {
        "D5" => MapQuantity::D5,
        "S3" => MapQuantity::S3,
        "delta" => MapQuantity::Delta,
        other => return Err(CliError::Config(format!("map.quantity must be D5, S3 or delta, got {other:?}"))),
    };
    let mus = cfg.axis("mu", "protocol", "lin(0.25, 2, 8)")?;
    let phis = cfg.axis("phi", "protocol", "lin(0, 2pi, 17)")?;
    let nbar = cfg.number("protocol.nbar", 0.1)?;
    let q = cfg.number("environment.q", 1e5)?;
    let nbar_bath = cfg.number("environment.nbar_bath", 500.0)?;
    let environment = env(cfg, q, nbar_bath)?;
    let points = product(&mus, &phis);
    let values: Vec<Option<f64>> = points
        .par_iter()
        .map(|&(mu, phi)| match map_point(quantity, mu, phi, nbar, &environment) {
            Ok(v) => Ok(Some(v)),
            Err(Error::HeraldImpossible(_)) => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<Result<_, _>>()?;
    let (unit, what) = match quantity {
        MapQuantity::D5 => ("quadrature^8", "D5 after the verification delays"),
        MapQuantity::S3 => ("quadrature^12", "S3 after the verification delays"),
        MapQuantity::Delta => ("nats", "non-Gaussianity of the heralded state (relative entropy to its Gaussian reference)"),
    };
    let mut t = Table::new(
        "map",
        vec![
            col("index", "-", "grid index, mu outer and phi inner"),
            col("mu", "1", "optomechanical coupling mu"),
            col("phi", "rad", "interferometer phase"),
            col("value", unit, what),
            col("negative", "-", "value < 0; empty where heralding is impossible"),
            col("phi_crossing", "rad", "linearly interpolated sign change between this phi and the next"),
        ],
    );
    t.param("quantity", format!("{quantity:?}"));
    t.num_param("nbar", nbar);
    t.num_param("q", q);
    t.num_param("nbar_bath", nbar_bath);
    t.num_param("omega_m", environment.omega_m);
    for (k, (&(mu, phi), value)) in points.iter().zip(&values).enumerate() {
        let next = (k % phis.len() + 1 < phis.len()).then(|| (phis[k % phis.len() + 1], values[k + 1]));
        let crossing = match (value, next) {
            (Some(a), Some((phi_b, Some(b)))) if (*a < 0.0) != (b < 0.0) => Some(phi + (phi_b - phi) * a / (a - b)),
            _ => None,
        };
        t.push(vec![
            k.into(),
            mu.into(),
            phi.into(),
            (*value).into(),
            value.map_or(Cell::Empty, |v| (v < 0.0).into()),
            crossing.into(),
        ]);
    }
    Ok(t)
}

pub fn cooling_map(cfg: &Config) -> Result<Table, CliError> {
    cfg.reject_axes_except(&["mu", "nbar_bath"])?;
    let mus = cfg.axis("mu", "protocol", "lin(0.5, 4, 8)")?;
    let baths = cfg.axis("nbar_bath", "environment", "0, 10, 100, 1000")?;
    let q = cfg.number("environment.q", 1e5)?;
    let phi = cfg.number("protocol.phi", PI)?;
    let points = product(&mus, &baths);
    let results = points
        .par_iter()
        .map(|&(mu, nb)| max_cooled_occupation(mu, &env(cfg, q, nb)?, phi).map_err(CliError::from))
        .collect::<Result<Vec<_>, _>>()?;
    let mut t = Table::new(
        "cooling-map",
        vec![
            col("index", "-", "grid index, mu outer and nbar_bath inner"),
            col("mu", "1", "optomechanical coupling mu"),
            col("nbar_bath", "quanta", "bath occupation"),
            col("nbar_max", "quanta", "largest initial occupation with measured S3 < 0"),
            col("verifiable", "-", "false where S3 >= 0 already for a ground-state start"),
        ],
    );
    t.num_param("q", q);
    t.num_param("phi", phi);
    for (k, (&(mu, nb), r)) in points.iter().zip(&results).enumerate() {
        t.push(vec![k.into(), mu.into(), nb.into(), r.nbar_max.into(), r.verifiable.into()]);
    }
    Ok(t)
}

pub fn detector(cfg: &Config) -> Result<Table, CliError> {
    cfg.reject_axes_except(&["mu", "eta", "alpha"])?;
    let mus = cfg.axis("mu", "protocol", "0.001, 0.01, 0.1, 1")?;
    let etas = cfg.axis("eta", "detector", "0.8")?;
    let alphas = cfg.axis("alpha", "detector", "lin(0.1, 3, 30)")?;
    let nbar = cfg.number("protocol.nbar", 0.1)?;
    let phi = cfg.number("protocol.phi", PI)?;
    let dark = dark_prob(cfg)?;
    let mut points = Vec::with_capacity(mus.len() * etas.len() * alphas.len());
    for &m in &mus {
        for &e in &etas {
            points.extend(alphas.iter().map(|&a| (m, e, a)));
        }
    }
    let rows = points
        .par_iter()
        .map(|&(mu, eta, alpha)| -> Result<[f64; 3], CliError> {
            let protocol = ProtocolParams::parallel(mu, phi, nbar)?.with_alpha(c(alpha));
            let f = |resolving| -> Result<f64, CliError> {
                Ok(100.0 * true_positive_fraction(&DetectorParams::new(eta, dark, resolving, c(alpha))?, &protocol)?)
            };
            Ok([heralding_probability(&protocol), f(true)?, f(false)?])
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut t = Table::new(
        "detector",
        vec![
            col("index", "-", "grid index, mu outermost and alpha innermost"),
            col("mu", "1", "optomechanical coupling mu"),
            col("eta", "1", "detection efficiency including loss"),
            col("alpha", "sqrt(photons)", "coherent input amplitude"),
            col("p10", "1", "heralding probability of the (1,0) outcome, lossless"),
            col("F_res", "percent", "true-positive fraction, number-resolving detector"),
            col("F_nonres", "percent", "true-positive fraction, threshold detector"),
        ],
    );
    t.num_param("nbar", nbar);
    t.num_param("phi", phi);
    t.num_param("dark_prob", dark);
    for (k, (&(mu, eta, alpha), r)) in points.iter().zip(&rows).enumerate() {
        t.push(vec![k.into(), mu.into(), eta.into(), alpha.into(), r[0].into(), r[1].into(), r[2].into()]);
    }
    Ok(t)
}

pub fn sideband(cfg: &Config) -> Result<Table, CliError> {
    cfg.reject_axes_except(&["t_kappa"])?;
    let mut cav = CavityParams::from_hz(
        cfg.number("sideband.g0_hz", 127.0)?,
        cfg.number("sideband.kappa_hz", 15.9e6)?,
        cfg.number("sideband.omega_m_hz", 1.139e6)?,
    )?;
    cav.c_pulse = cfg.number("sideband.c_pulse", 2.0)?;
    let ts = cfg.axis("t_kappa", "sideband", "lin(0.25, 4, 16)")?;
    let mut t = Table::new(
        "sideband",
        vec![
            col("index", "-", "grid index"),
            col("t_kappa", "1", "pulse length in units of 1/kappa"),
            col("t", "s", "pulse length"),
            col("omega_m_t", "rad", "mechanical rotation during the pulse"),
            col("mu_linear", "1", "coupling without mechanical motion, sqrt2 g0 t"),
            col("mu_effective", "1", "coupling including mechanical motion"),
            col("deficit_percent", "percent", "100 (1 - mu_effective/mu_linear)"),
        ],
    );
    t.num_param("g0_rad_s", cav.g0);
    t.num_param("kappa_rad_s", cav.kappa);
    t.num_param("omega_m_rad_s", cav.omega_m);
    t.num_param("mu_nominal", mu_nominal(&cav));
    t.num_param("percent_reduction_second_order", percent_reduction(&cav));
    for (k, &tk) in ts.iter().enumerate() {
        let time = tk / cav.kappa;
        let (mu, angle) = mu_effective(&cav, time);
        t.push(vec![
            k.into(),
            tk.into(),
            time.into(),
            angle.into(),
            (2f64.sqrt() * cav.g0 * time).into(),
            mu.into(),
            (100.0 * mu_deficit(&cav, time)).into(),
        ]);
    }
    Ok(t)
}

/// Largest |recovered - exact| over the moments of the recovered table.
fn max_moment_error(recovered: &MomentTable, exact: &MomentTable, order: usize) -> Result<f64, CliError> {
    let mut worst: f64 = 0.0;
    for m in Monomial::up_to_order(order) {
        worst = worst.max((recovered.get(m)? - exact.get(m)?).norm());
    }
    Ok(worst)
}

pub fn verify(cfg: &Config, seed: u64, check: bool) -> Result<Outcome, CliError> {
    cfg.reject_axes_except(&[])?;
    let mu = cfg.number("protocol.mu", 1.0)?;
    let phi = cfg.number("protocol.phi", PI)?;
    let nbar = cfg.number("protocol.nbar", 0.1)?;
    let q = cfg.number("environment.q", 1e5)?;
    let nbar_bath = cfg.number("environment.nbar_bath", 500.0)?;
    let order = cfg.integer("verify.order", 4)? as usize;
    let samples = cfg.integer("verify.samples", 1_000_000)?;
    let seeds = cfg.integer("verify.seeds", 20)?.max(1);
    let chi = cfg.number("verify.chi", DEFAULT_CHI)?;
    let environment = env(cfg, q, nbar_bath)?;
    let protocol = ProtocolParams::parallel(mu, phi, nbar)?.with_configuration(configuration(cfg)?);

    let heralded = heralded_moments(&protocol, ClickOutcome::ONE_ZERO, 2 * order.max(4))?;
    let exact = evolve_moments(&heralded, &environment, &MeasurementSchedule::verification(&environment))?;
    let models = dataset_models(&default_pathways(order, phi, chi)?, &Port::ALL, &exact, order)?;
    let n = (samples > 0).then_some(samples);
    let runs: Vec<MomentTable> =
        (0..seeds).into_par_iter().map(|k| recover_moments(&sample_all(&models, n, seed + k), order)).collect::<Result<_, _>>()?;
    let first = &runs[0];

    let mut t = Table::new(
        "verify",
        vec![
            col("quantity", "-", "moment <X1^p P1^q X2^r P2^s> (canonical order) or criterion"),
            col("order", "-", "moment order; empty for criteria"),
            col("exact_re", "quadrature^order", "exact value, real part"),
            col("exact_im", "quadrature^order", "exact value, imaginary part"),
            col("recovered_re", "quadrature^order", "recovered from the first seed, real part"),
            col("recovered_im", "quadrature^order", "recovered from the first seed, imaginary part"),
            col("stderr_re", "quadrature^order", "propagated standard error (criteria: spread over seeds), real part"),
            col("stderr_im", "quadrature^order", "propagated standard error, imaginary part"),
            col("abs_error", "quadrature^order", "|recovered - exact|"),
            col("sign_agreement", "1", "fraction of seeds whose recovered criterion has the exact sign"),
        ],
    );
    t.num_param("mu", mu);
    t.num_param("phi", phi);
    t.num_param("nbar", nbar);
    t.num_param("q", q);
    t.num_param("nbar_bath", nbar_bath);
    t.param("order", order);
    t.param("samples_per_dataset", if samples == 0 { "noiseless".to_string() } else { samples.to_string() });
    t.param("seeds", format!("{seed}..{}", seed + seeds));
    t.num_param("chi", chi);
    t.param("datasets", models.len());
    for m in Monomial::up_to_order(order).into_iter().skip(1) {
        let e = exact.get(m)?;
        let r = first.get(m)?;
        let se = first.std_errors().and_then(|s| s.get(&m).copied());
        t.push(vec![
            m.key().into(),
            m.order().into(),
            e.re.into(),
            e.im.into(),
            r.re.into(),
            r.im.into(),
            se.map(|s| s.0).into(),
            se.map(|s| s.1).into(),
            (r - e).norm().into(),
            Cell::Empty,
        ]);
    }
    let mut s3_agreement = None;
    if order >= 4 {
        for (name, build) in [("D5", build_d5 as fn(&MomentTable) -> _), ("S3", build_s3)] {
            let e = build(&exact)?.value;
            let vals: Vec<f64> = runs.iter().map(|r| build(r).map(|c| c.value)).collect::<Result<_, _>>()?;
            let agree = vals.iter().filter(|&&v| (v < 0.0) == (e < 0.0)).count() as f64 / vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let spread = if vals.len() > 1 {
                Some((vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vals.len() - 1) as f64).sqrt())
            } else {
                None
            };
            if name == "S3" {
                s3_agreement = Some(agree);
            }
            t.push(vec![
                name.into(),
                Cell::Empty,
                e.into(),
                0.0.into(),
                vals[0].into(),
                0.0.into(),
                spread.into(),
                Cell::Empty,
                (vals[0] - e).abs().into(),
                agree.into(),
            ]);
        }
    }
    let check_failures = if check {
        let mut failures = Vec::new();
        if samples == 0 {
            let worst = max_moment_error(first, &exact, order)?;
            if worst > 1e-8 {
                failures.push(format!("noiseless recovery error {worst:e} exceeds 1e-8"));
            }
        } else if let Some(a) = s3_agreement {
            if a < 0.95 {
                failures.push(format!("S3 sign reproduced in {:.0}% of seeds, below 95%", 100.0 * a));
            }
        } else {
            failures.push("sign check needs verify.order >= 4".into());
        }
        Some(failures)
    } else {
        None
    };
    Ok(Outcome { table: t, check_failures })
}
