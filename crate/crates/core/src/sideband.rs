//! Corrections from mechanical motion during the entangling pulse (finite sideband ratio).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CavityParams {
    /// Single-photon optomechanical coupling rate (rad/s).
    pub g0: f64,
    /// Cavity amplitude decay rate (rad/s).
    pub kappa: f64,
    /// Mechanical angular frequency (rad/s).
    pub omega_m: f64,
    /// Pulse constant C in t = C / kappa; 2 for omega_m << 1/tau << kappa.
    pub c_pulse: f64,
}

impl CavityParams {
    pub fn new(g0: f64, kappa: f64, omega_m: f64) -> Result<Self> {
        if !(kappa > 0.0) {
            return Err(Error::InvalidParameter(format!("kappa must be positive, got {kappa}")));
        }
        if !(omega_m >= 0.0) {
            return Err(Error::InvalidParameter(format!("omega_m must be non-negative, got {omega_m}")));
        }
        Ok(Self { g0, kappa, omega_m, c_pulse: 2.0 })
    }

    /// Parameters given as ordinary frequencies (Hz), converted with 2 pi.
    pub fn from_hz(g0: f64, kappa: f64, omega_m: f64) -> Result<Self> {
        Self::new(2.0 * PI * g0, 2.0 * PI * kappa, 2.0 * PI * omega_m)
    }

    pub fn sideband_ratio(&self) -> f64 {
        self.omega_m / self.kappa
    }

    pub fn pulse_time(&self) -> f64 {
        self.c_pulse / self.kappa
    }
}

/// mu = 2 sqrt2 g0 / kappa.
pub fn mu_nominal(cav: &CavityParams) -> f64 {
    2.0 * 2f64.sqrt() * cav.g0 / cav.kappa
}

/// Effective coupling mu' = (2 g0/omega_m) sqrt(1 - cos(omega_m t)) and the displacement
/// direction angle omega_m t.
pub fn mu_effective(cav: &CavityParams, t: f64) -> (f64, f64) {
    let angle = cav.omega_m * t;
    if cav.omega_m == 0.0 {
        return (2f64.sqrt() * cav.g0 * t, 0.0);
    }
    // 1 - cos x = 2 sin^2(x/2), without the cancellation at small x.
    let mu = 2.0 * 2f64.sqrt() * cav.g0 / cav.omega_m * (angle / 2.0).sin().abs();
    (mu, angle)
}

/// 1 - sin(y)/y, accurate for small y.
fn one_minus_sinc(y: f64) -> f64 {
    if y.abs() < 1e-2 {
        let y2 = y * y;
        y2 / 6.0 * (1.0 - y2 / 20.0 * (1.0 - y2 / 42.0))
    } else {
        1.0 - y.sin() / y
    }
}

/// Relative loss 1 - mu'(t) / (sqrt2 g0 t) of the coupling from motion during the pulse.
pub fn mu_deficit(cav: &CavityParams, t: f64) -> f64 {
    one_minus_sinc(cav.omega_m * t / 2.0)
}

/// Second-order reduction of mu in percent: 100 (C^2/24)(omega_m/kappa)^2, i.e.
/// 100 (omega_m/kappa)^2 / 6 for C = 2.
pub fn percent_reduction(cav: &CavityParams) -> f64 {
    100.0 * cav.c_pulse * cav.c_pulse / 24.0 * cav.sideband_ratio().powi(2)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table2Row {
    pub label: String,
    pub g0_hz: f64,
    pub kappa_hz: f64,
    pub omega_m_hz: f64,
}

/// Published mechanical parameters of three experiments (frequencies over 2 pi, in Hz).
pub fn table2_rows() -> Vec<Table2Row> {
    let row = |label: &str, g0_hz, kappa_hz, omega_m_hz| Table2Row { label: label.into(), g0_hz, kappa_hz, omega_m_hz };
    vec![
        row("Rossi2018", 127.0, 15.9e6, 1.139e6),
        row("Wilson2015", 20e3, 0.44e9, 4.3e6),
        row("Leijssen2017", 35e6, 8.8e9, 3.74e6),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cav(row: &Table2Row) -> CavityParams {
        CavityParams::from_hz(row.g0_hz, row.kappa_hz, row.omega_m_hz).unwrap()
    }

    #[test]
    fn nominal_coupling_of_published_devices() {
        let rows = table2_rows();
        assert!((mu_nominal(&cav(&rows[0])) / 2.26e-5 - 1.0).abs() < 5e-3);
        assert!((mu_nominal(&cav(&rows[2])) / 1.12e-2 - 1.0).abs() < 5e-3);
        assert_eq!(mu_nominal(&CavityParams::new(0.0, 1.0, 1.0).unwrap()), 0.0);
    }

    #[test]
    fn percent_reduction_reproduces_the_table() {
        let rows = table2_rows();
        let expect = [(7.16e-2, 8.6e-2), (9.77e-3, 1.6e-3), (4.25e-4, 3.0e-6)];
        for (row, (ratio, pct)) in rows.iter().zip(expect) {
            let c = cav(row);
            assert!((c.sideband_ratio() / ratio - 1.0).abs() < 5e-3, "{}", row.label);
            assert!((percent_reduction(&c) / pct - 1.0).abs() < 0.03, "{}: {}", row.label, percent_reduction(&c));
        }
        assert_eq!(percent_reduction(&CavityParams::new(1.0, 1.0, 0.0).unwrap()), 0.0);
    }

    #[test]
    fn short_pulses_recover_the_nominal_coupling() {
        let c = CavityParams::new(3.0, 1e4, 5.0).unwrap();
        let t = c.pulse_time();
        let (mu, angle) = mu_effective(&c, t);
        assert!((mu / mu_nominal(&c) - 1.0).abs() < 1e-6);
        assert!((angle - 1e-3).abs() < 1e-15);
        let (mu_small, _) = mu_effective(&c, 1e-9);
        assert!((mu_small / (2f64.sqrt() * 3.0 * 1e-9) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn maximal_at_half_period() {
        let c = CavityParams::new(2.0, 10.0, 3.0).unwrap();
        let (mu, _) = mu_effective(&c, PI / 3.0);
        assert!((mu - 2.0 * 2f64.sqrt() * 2.0 / 3.0).abs() < 1e-14);
        for k in 1..50 {
            assert!(mu_effective(&c, k as f64 * 0.05).0 <= mu + 1e-14);
        }
    }

    #[test]
    fn periodic_in_time() {
        let c = CavityParams::new(2.0, 10.0, 3.0).unwrap();
        let period = 2.0 * PI / 3.0;
        for t in [0.1, 0.7, 1.3] {
            assert!((mu_effective(&c, t).0 - mu_effective(&c, t + period).0).abs() < 1e-12);
        }
    }

    #[test]
    fn second_order_formula_matches_exact_deficit() {
        for row in table2_rows() {
            let c = cav(&row);
            let exact = 100.0 * mu_deficit(&c, c.pulse_time());
            let exact_direct = 100.0 * (1.0 - mu_effective(&c, c.pulse_time()).0 / mu_nominal(&c));
            let approx = percent_reduction(&c);
            assert!((exact / approx - 1.0).abs() < 0.1, "{}", row.label);
            if row.label == "Rossi2018" {
                assert!((exact_direct / exact - 1.0).abs() < 1e-6);
            }
        }
        let leijssen = cav(&table2_rows()[2]);
        assert!((100.0 * mu_deficit(&leijssen, leijssen.pulse_time()) / 3.0e-6 - 1.0).abs() < 0.03);
    }
}
