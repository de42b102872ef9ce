//! Acceptance suite: one line per criterion, non-zero exit if any fails.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use mechcat_core::analytic::heralded_moments;
use mechcat_core::criteria::{build_d5, build_s3, mu_critical, s3_ground_closed_form};
use mechcat_core::detector::{true_positive_fraction, DetectorParams, LossOracle};
use mechcat_core::fock::{thermal_state, FockConfig, TwoModeState};
use mechcat_core::herald::{
    heralded_thermal, heralding_probability, heralding_probability_numeric, ClickOutcome, Configuration, ProtocolParams,
};
use mechcat_core::linalg::{c, I};
use mechcat_core::moments::{
    canonicalize, moments_from_state, symmetrized_expand, MomentTable, Monomial, Polynomial, Quad, QuadWord,
};
use mechcat_core::open_system::{evolve_moments, EnvParams, MeasurementSchedule};
use mechcat_core::scenario::{
    check_table1, check_table2, compute_table1, compute_table2, map_point, measured_determinants, table1_rows,
    MapQuantity, Table1Settings,
};
use mechcat_core::verify::{dataset_models, default_pathways, recover_moments, sample_all, DatasetModel, Pathway, PhaseSet, Port, DEFAULT_CHI};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn err<E: std::fmt::Debug>(e: E) -> String {
    format!("{e:?}")
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for mu in [0.1, 0.5, 1.0, 1.5, 2.0] {
        for phi in [0.0, PI / 2.0, PI] {
            let params = ProtocolParams::parallel(mu, phi, 0.0).map_err(err)?;
            let (state, _) = heralded_thermal(&params, ClickOutcome::ONE_ZERO, params.default_fock_config()).map_err(err)?;
            let numeric = build_s3(&moments_from_state(&state, 4).map_err(err)?).map_err(err)?.value;
            let closed = s3_ground_closed_form(mu, phi).map_err(err)?;
            worst = worst.max((numeric - closed).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(worst <= 1e-6, format!("max |Fock - closed form| = {worst:.2e}"))?;
    ensure(secs < 10.0, format!("runtime {secs:.1} s"))?;
    Ok(format!("max deviation {worst:.1e} over 15 points, {secs:.1} s"))
}

fn criterion_2() -> Outcome {
    let mut worst: f64 = 0.0;
    for mu in [0.1, 0.3, 0.5, 0.8, 1.0] {
        for nbar in [0.0, 0.05, 0.1, 0.2, 0.3] {
            for phi in [0.0, PI / 2.0, PI] {
                let params = ProtocolParams::parallel(mu, phi, nbar).map_err(err)?;
                let config = params.default_fock_config();
                let input = thermal_state(nbar, nbar, config).map_err(err)?;
                let numeric = heralding_probability_numeric(&input, &params, ClickOutcome::ONE_ZERO).map_err(err)?;
                worst = worst.max((numeric - heralding_probability(&params)).abs());
            }
        }
    }
    ensure(worst <= 1e-8, format!("max |closed - trace| = {worst:.2e}"))?;
    let params = ProtocolParams::parallel(0.5, 0.0, 0.1).map_err(err)?;
    let grid: Vec<f64> = (1..=300).map(|k| k as f64 / 100.0).collect();
    let best = grid
        .iter()
        .copied()
        .max_by(|&a, &b| heralding_probability(&params.with_alpha(c(a))).total_cmp(&heralding_probability(&params.with_alpha(c(b)))))
        .unwrap();
    ensure((best - 1.0).abs() < 1e-12, format!("P10 argmax at |alpha| = {best}"))?;
    Ok(format!("max deviation {worst:.1e} over 75 points; argmax |alpha| = {best}"))
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let results = compute_table1(&table1_rows(), &Table1Settings::default()).map_err(err)?;
    let checks = check_table1(&results);
    let proposed = ["i", "ii", "iii", "iv"];
    let mut failures = Vec::new();
    for ch in &checks {
        let det_value = (ch.column == "D5" || ch.column == "S3") && proposed.contains(&ch.row.as_str());
        let sign = ch.column.ends_with("_sign");
        if (det_value || sign) && !ch.pass {
            failures.push(format!("{} {} = {:.4} (printed {})", ch.row, ch.column, ch.computed, ch.expected));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(failures.is_empty(), failures.join("; "))?;
    ensure(secs < 120.0, format!("runtime {secs:.1} s"))?;
    let signs = checks.iter().filter(|c| c.column.ends_with("_sign")).count();
    Ok(format!("rows (i)-(iv) within tolerance, {signs} sign classifications match, {secs:.1} s"))
}

fn criterion_4() -> Outcome {
    let settings = Table1Settings::default();
    let results = compute_table1(&table1_rows(), &settings).map_err(err)?;
    let failures: Vec<String> = check_table1(&results)
        .into_iter()
        .filter(|c| c.column.starts_with('F') && !c.pass)
        .map(|c| format!("{} {} = {:.2} (printed {})", c.row, c.column, c.computed, c.expected))
        .collect();
    ensure(failures.is_empty(), failures.join("; "))?;
    // The two closed forms treat dark clicks at different orders in D; where dark clicks
    // dominate they agree to ~1e-9, so the ordering is checked at the oracle tolerance
    // (1e-6 as a fraction, 1e-4 in percent).
    let slack = 1e-4;
    for r in &results {
        ensure(r.f_res >= r.f_nonres - slack, format!("{}: resolving {} < non-resolving {}", r.label, r.f_res, r.f_nonres))?;
        ensure(r.f_res_opt >= r.f_nonres_opt - slack, format!("{}: optimized resolving below non-resolving", r.label))?;
    }
    let protocol = ProtocolParams::parallel(1e-2, PI, 0.1).map_err(err)?;
    let mut worst: f64 = 0.0;
    for resolving in [true, false] {
        let det = DetectorParams::new(settings.eta, settings.dark_prob, resolving, c(1.0)).map_err(err)?;
        let oracle = LossOracle::new(&det, &protocol, 8, FockConfig::symmetric(20).map_err(err)?).map_err(err)?;
        let from_oracle = oracle.true_positive_fraction(det.dark_prob, resolving).map_err(err)?;
        worst = worst.max((from_oracle - true_positive_fraction(&det, &protocol).map_err(err)?).abs());
    }
    ensure(worst <= 1e-6, format!("oracle vs closed form {worst:.2e}"))?;
    Ok(format!("40 fraction cells within 5 p.p.; resolving >= non-resolving; oracle deviation {worst:.1e}"))
}

fn criterion_5() -> Outcome {
    let checks = check_table2(&compute_table2().map_err(err)?);
    let bad: Vec<String> = checks.iter().filter(|c| !c.pass).map(|c| format!("{} {} = {:e}", c.row, c.column, c.computed)).collect();
    ensure(bad.is_empty(), bad.join("; "))?;
    Ok(format!("{} cells reproduced to the printed significant figures", checks.len()))
}

fn criterion_6() -> Outcome {
    let env = EnvParams::new(1.0, 1e5, 0.0).map_err(err)?;
    let mu_c = mu_critical(&env, 0.0, PI).map_err(err)?.ok_or("no sign change of S3")?;
    ensure((mu_c - 3.6).abs() <= 0.3, format!("mu_c = {mu_c:.4}"))?;
    Ok(format!("mu_c = {mu_c:.4}"))
}

fn criterion_7() -> Outcome {
    let env = EnvParams::new(1.0, 1e5, 500.0).map_err(err)?;
    let phis: Vec<f64> = (0..16).map(|k| k as f64 * PI / 8.0).collect();
    for mu in [0.5, 1.0] {
        let s3: Vec<f64> = phis.iter().map(|&p| measured_determinants(mu, p, 0.1, &env).map(|v| v.1)).collect::<Result<_, _>>().map_err(err)?;
        let arg = (0..phis.len()).min_by(|&a, &b| s3[a].total_cmp(&s3[b])).unwrap();
        ensure(arg == 8 && s3[arg] < 0.0, format!("S3 argmin at phi = {:.3} for mu = {mu}", phis[arg]))?;
    }
    let mu = 1.5;
    let d5: Vec<f64> = phis.iter().map(|&p| measured_determinants(mu, p, 0.1, &env).map(|v| v.0)).collect::<Result<_, _>>().map_err(err)?;
    let negative: Vec<usize> = (0..phis.len()).filter(|&k| d5[k] < 0.0).collect();
    ensure(negative.contains(&0), "D5 not negative at phi = 0")?;
    ensure(!negative.contains(&8), "D5 negative at phi = pi")?;
    let symmetric = negative.iter().all(|&k| negative.contains(&((16 - k) % 16)));
    ensure(symmetric, "D5 negative region not symmetric about phi = 0")?;
    let delta0 = map_point(MapQuantity::Delta, 0.0, 0.0, 0.1, &env).map_err(err)?;
    ensure(delta0.abs() < 1e-9, format!("delta(mu = 0) = {delta0:e}"))?;
    let deltas: Vec<f64> =
        [0.25, 0.5, 0.75, 1.0].iter().map(|&m| map_point(MapQuantity::Delta, m, PI, 0.1, &env)).collect::<Result<_, _>>().map_err(err)?;
    ensure(deltas.windows(2).all(|w| w[1] > w[0]), format!("delta not increasing: {deltas:?}"))?;
    Ok(format!("S3 argmin at pi; D5 negative over {} of 16 phases centred on 0; delta(0) = {delta0:.1e}, increasing", negative.len()))
}

fn max_deviation(a: &MomentTable, b: &MomentTable, order: usize) -> f64 {
    Monomial::up_to_order(order).into_iter().map(|m| (a.get(m).unwrap() - b.get(m).unwrap()).norm()).fold(0.0, f64::max)
}

fn criterion_8() -> Outcome {
    let mut worst: f64 = 0.0;
    for configuration in [Configuration::Parallel, Configuration::Series] {
        let params = ProtocolParams::parallel(0.5, PI, 0.1).map_err(err)?.with_configuration(configuration);
        let table = heralded_moments(&params, ClickOutcome::ONE_ZERO, 8).map_err(err)?;
        let models = dataset_models(&default_pathways(4, PI, DEFAULT_CHI).map_err(err)?, &Port::ALL, &table, 4).map_err(err)?;
        let rec = recover_moments(&sample_all(&models, None, 0), 4).map_err(err)?;
        worst = worst.max(max_deviation(&rec, &table, 4));
    }
    ensure(worst <= 1e-8, format!("noiseless recovery deviation {worst:.2e}"))?;

    let params = ProtocolParams::parallel(0.5, PI, 0.1).map_err(err)?;
    let table = heralded_moments(&params, ClickOutcome::ONE_ZERO, 8).map_err(err)?;
    let model = DatasetModel::new(&Pathway::full(PhaseSet::zero(), PI, DEFAULT_CHI).map_err(err)?, Port::A, &table, 1).map_err(err)?;
    let exact = model.exact()[0];
    let pts: Vec<(f64, f64)> = [1e4f64, 1e5, 1e6]
        .iter()
        .map(|&n| {
            let ms = (0..100u64)
                .map(|s| (model.sample(Some(n as u64), &mut mechcat_core::verify::dataset_rng(s, 0)).sample_moments[0] - exact).norm_sqr())
                .sum::<f64>()
                / 100.0;
            (n.ln(), 0.5 * ms.ln())
        })
        .collect();
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / 3.0;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / 3.0;
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    ensure((slope + 0.5).abs() <= 0.1, format!("error slope {slope:.3}"))?;

    let row = &table1_rows()[0];
    let env = EnvParams::new(1.0, row.q_factor, row.nbar_bath).map_err(err)?;
    let heralded = heralded_moments(&ProtocolParams::parallel(row.mu, PI, row.nbar).map_err(err)?, ClickOutcome::ONE_ZERO, 8).map_err(err)?;
    let measured = evolve_moments(&heralded, &env, &MeasurementSchedule::verification(&env)).map_err(err)?;
    let exact_s3 = build_s3(&measured).map_err(err)?.value;
    let models = dataset_models(&default_pathways(4, PI, DEFAULT_CHI).map_err(err)?, &Port::ALL, &measured, 4).map_err(err)?;
    let mut agree = 0;
    for seed in 0..100 {
        let rec = recover_moments(&sample_all(&models, Some(1_000_000), seed), 4).map_err(err)?;
        if (build_s3(&rec).map_err(err)?.value < 0.0) == (exact_s3 < 0.0) {
            agree += 1;
        }
    }
    ensure(agree >= 95, format!("S3 sign reproduced in {agree}/100 seeds"))?;
    Ok(format!("noiseless deviation {worst:.1e}; error slope {slope:.3}; S3 sign {agree}/100 at N = 1e6"))
}

fn criterion_9() -> Outcome {
    let grid = [0.0, 0.1, 0.5, 1.0];
    let mut lowest = f64::INFINITY;
    for &n1 in &grid {
        for &n2 in &grid {
            let config = FockConfig::heuristic(n1, n2, 0.0);
            let table = moments_from_state(&thermal_state(n1, n2, config).map_err(err)?, 4).map_err(err)?;
            let d5 = build_d5(&table).map_err(err)?.value;
            let s3 = build_s3(&table).map_err(err)?.value;
            ensure(d5 >= -1e-10 && s3 >= -1e-10, format!("({n1}, {n2}): D5 = {d5:e}, S3 = {s3:e}"))?;
            lowest = lowest.min(d5.min(s3));
        }
    }
    Ok(format!("16 product states, smallest determinant {lowest:.2e}"))
}

fn multiset_permutations(letters: &mut Vec<Quad>, k: usize, out: &mut Vec<Vec<Quad>>) {
    if k == letters.len() {
        out.push(letters.clone());
        return;
    }
    let mut seen = Vec::new();
    for i in k..letters.len() {
        if seen.contains(&letters[i]) {
            continue;
        }
        seen.push(letters[i]);
        letters.swap(k, i);
        multiset_permutations(letters, k + 1, out);
        letters.swap(k, i);
    }
}

fn criterion_10() -> Outcome {
    let start = Instant::now();
    // trace, Hermiticity and positivity of heralded states
    for (mu, phi, nbar) in [(0.5, PI, 0.1), (1.0, 0.3, 0.2), (1.5, 2.0, 0.0)] {
        let params = ProtocolParams::parallel(mu, phi, nbar).map_err(err)?;
        let (state, _) = heralded_thermal(&params, ClickOutcome::ONE_ZERO, params.default_fock_config()).map_err(err)?;
        state.validate().map_err(err)?;
        ensure((state.trace() - c(1.0)).norm() < 1e-12, "trace")?;
    }
    // cutoff doubling
    let params = ProtocolParams::parallel(0.8, PI, 0.1).map_err(err)?;
    let config = params.default_fock_config();
    let moments = |cfg: FockConfig| -> Result<MomentTable, String> {
        let (s, _) = heralded_thermal(&params, ClickOutcome::ONE_ZERO, cfg).map_err(err)?;
        moments_from_state(&s, 4).map_err(err)
    };
    let doubling = max_deviation(&moments(config)?, &moments(config.doubled())?, 4);
    ensure(doubling < 1e-8, format!("cutoff doubling changes moments by {doubling:e}"))?;
    // commutator identities
    let xp = canonicalize(&QuadWord(vec![Quad::X1, Quad::P1])).map_err(err)?;
    let px = canonicalize(&QuadWord(vec![Quad::P1, Quad::X1])).map_err(err)?;
    ensure(xp.plus(&px.scale(c(-1.0))) == Polynomial::one().scale(I), "[X1, P1] != i")?;
    let cross = canonicalize(&QuadWord(vec![Quad::P2, Quad::X1])).map_err(err)?;
    ensure(cross == Polynomial::monomial(Monomial::new(1, 0, 0, 1)), "[X1, P2] != 0")?;
    let state = TwoModeState::fock(FockConfig::symmetric(10).map_err(err)?, 2, 1).map_err(err)?;
    let table = moments_from_state(&state, 2).map_err(err)?;
    for (x, p) in [(Quad::X1, Quad::P1), (Quad::X2, Quad::P2)] {
        let comm = table.word(&QuadWord(vec![x, p])).map_err(err)? - table.word(&QuadWord(vec![p, x])).map_err(err)?;
        ensure((comm - I).norm() < 1e-12, format!("<[{x:?}, {p:?}]> = {comm}"))?;
    }
    // symmetrized-sum enumeration against brute-force permutations
    let mut checked = 0;
    for m in Monomial::up_to_order(6) {
        let [p, q, r, s] = m.exponents();
        let mut fast = Polynomial::default();
        for (w, mult) in symmetrized_expand(p, q, r, s).map_err(err)? {
            fast = fast.plus(&canonicalize(&w).map_err(err)?.scale(c(mult as f64)));
        }
        let mut letters: Vec<Quad> = std::iter::repeat(Quad::X1)
            .take(p)
            .chain(std::iter::repeat(Quad::P1).take(q))
            .chain(std::iter::repeat(Quad::X2).take(r))
            .chain(std::iter::repeat(Quad::P2).take(s))
            .collect();
        let mut perms = Vec::new();
        multiset_permutations(&mut letters, 0, &mut perms);
        let mut brute = Polynomial::default();
        for w in perms {
            brute = brute.plus(&canonicalize(&QuadWord(w)).map_err(err)?);
        }
        let diff = fast.plus(&brute.scale(c(-1.0)));
        ensure(diff.terms().all(|(_, v)| v.norm() < 1e-9), format!("symmetrized sum mismatch at {m}"))?;
        checked += 1;
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 60.0, format!("runtime {secs:.1} s"))?;
    Ok(format!("states valid; doubling deviation {doubling:.1e}; commutators exact; {checked} symmetrized sums; {secs:.1} s"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("closed-form oracle equivalence", criterion_1),
        ("heralding probability", criterion_2),
        ("Table 1 determinants (open system)", criterion_3),
        ("detector true-positive fractions", criterion_4),
        ("Table 2 sideband reduction", criterion_5),
        ("mu_c root", criterion_6),
        ("figure-structure properties", criterion_7),
        ("verification pipeline", criterion_8),
        ("separability guard", criterion_9),
        ("structural invariants", criterion_10),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", k + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail}", k + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
    println!("all {} criteria passed", criteria.len());
}
