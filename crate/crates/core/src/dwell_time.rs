//! Average dwell-time floor `N̄ₐ` and ultimate-bound level `ω̄`.
//!
//! ```text
//! discrete:   N̄ₐ = ln μ / ln(δ/λ)    ω̄ = μ^N₀·ω + μ^N₀/(1−δ)·α̂(‖d‖∞)
//! continuous: N̄ₐ = ln μ / (λ − δ)    ω̄ = μ^(1+N₀)·ω + μ^(1+N₀)/δ·α̂(‖d‖∞)
//! ```
//!
//! with `α̂(s) = ĝ·s²` and `c = ω̄(0)`.

use rayon::prelude::*;
use serde::Serialize;

use crate::certificates::CertificateSet;
use crate::error::{Error, Result};
use crate::set_constructions::{closed_form_bounds, SetConstants};
use crate::system_model::TimeDomain;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalysisConfig {
    pub kappa: f64,
    pub delta: f64,
    pub n0: f64,
}

impl AnalysisConfig {
    pub fn new(kappa: f64, delta: f64, n0: f64) -> Self {
        Self { kappa, delta, n0 }
    }

    /// Example-1 design values.
    pub fn discrete_default() -> Self {
        Self::new(10.0, 0.84, 2.0)
    }

    /// Example-2 design values.
    pub fn continuous_default() -> Self {
        Self::new(1.0, 0.1, 1.0)
    }

    pub fn default_for(domain: TimeDomain) -> Self {
        match domain {
            TimeDomain::Discrete => Self::discrete_default(),
            TimeDomain::Continuous => Self::continuous_default(),
        }
    }

    /// Checks κ > 0, N₀ ≥ 1 and the δ interval for the given aggregate rate.
    pub fn validate(&self, domain: TimeDomain, lambda: f64) -> Result<()> {
        if !(self.kappa > 0.0) {
            return Err(Error::BadConfig(format!("kappa must be positive, got {}", self.kappa)));
        }
        if !(self.n0 >= 1.0) || !self.n0.is_finite() {
            return Err(Error::BadConfig(format!("N0 must be at least 1, got {}", self.n0)));
        }
        let (lo, hi) = match domain {
            TimeDomain::Discrete => (lambda, 1.0),
            TimeDomain::Continuous => (0.0, lambda),
        };
        if !(self.delta > lo && self.delta < hi) {
            return Err(Error::BadDelta {
                delta: self.delta,
                lo,
                hi,
            });
        }
        Ok(())
    }
}

/// Aggregate decay rate and gain coefficient of a certificate set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rates {
    pub lambda: f64,
    pub gain: f64,
}

impl Rates {
    pub fn of(certs: &CertificateSet) -> Self {
        Self {
            lambda: certs.aggregate_rate(),
            gain: certs.aggregate_gain(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RobustnessReport {
    pub domain: TimeDomain,
    pub config: AnalysisConfig,
    pub set_constants: SetConstants,
    pub lambda: f64,
    pub gain: f64,
    pub d_norm: f64,
    pub n_a_bar: f64,
    pub c: f64,
    /// Coefficient of `‖d‖∞²` in `α̃`.
    pub gain_coeff: f64,
    pub omega_bar: f64,
}

impl RobustnessReport {
    /// `c + α̃(s)`.
    pub fn omega_bar_at(&self, d_norm: f64) -> f64 {
        self.c + self.gain_coeff * d_norm * d_norm
    }

    /// `μ^N₀` (discrete) or `μ^(1+N₀)` (continuous).
    pub fn mu_power(&self) -> f64 {
        mu_power(self.domain, self.set_constants.mu, self.config.n0)
    }
}

pub(crate) fn mu_power(domain: TimeDomain, mu: f64, n0: f64) -> f64 {
    match domain {
        TimeDomain::Discrete => mu.powf(n0),
        TimeDomain::Continuous => mu.powf(1.0 + n0),
    }
}

/// Discrete dwell-time floor.
pub fn dwell_bound_discrete(mu: f64, lambda: f64, delta: f64) -> f64 {
    mu.ln() / (delta / lambda).ln()
}

/// Continuous dwell-time floor.
pub fn dwell_bound_continuous(mu: f64, lambda: f64, delta: f64) -> f64 {
    mu.ln() / (lambda - delta)
}

/// Report for explicitly supplied rates (e.g. a reference λ).
pub fn dwell_report_with_rates(
    domain: TimeDomain,
    rates: Rates,
    constants: SetConstants,
    config: AnalysisConfig,
    d_norm: f64,
) -> Result<RobustnessReport> {
    config.validate(domain, rates.lambda)?;
    if !(d_norm >= 0.0) || !d_norm.is_finite() {
        return Err(Error::BadConfig(format!(
            "d_norm must be finite and nonnegative, got {d_norm}"
        )));
    }
    if !(constants.mu >= 1.0) {
        return Err(Error::BadConfig(format!("mu must be at least 1, got {}", constants.mu)));
    }
    let mu = constants.mu;
    let power = mu_power(domain, mu, config.n0);
    let (n_a_bar, gain_coeff) = match domain {
        TimeDomain::Discrete => (
            dwell_bound_discrete(mu, rates.lambda, config.delta),
            power * rates.gain / (1.0 - config.delta),
        ),
        TimeDomain::Continuous => (
            dwell_bound_continuous(mu, rates.lambda, config.delta),
            power * rates.gain / config.delta,
        ),
    };
    let c = power * constants.omega;
    Ok(RobustnessReport {
        domain,
        config,
        set_constants: constants,
        lambda: rates.lambda,
        gain: rates.gain,
        d_norm,
        n_a_bar,
        c,
        gain_coeff,
        omega_bar: c + gain_coeff * d_norm * d_norm,
    })
}

pub fn dwell_report_discrete(
    certs: &CertificateSet,
    constants: SetConstants,
    config: AnalysisConfig,
    d_norm: f64,
) -> Result<RobustnessReport> {
    if certs.domain != TimeDomain::Discrete {
        return Err(Error::Contract(
            "discrete report requested for a continuous family".into(),
        ));
    }
    dwell_report_with_rates(TimeDomain::Discrete, Rates::of(certs), constants, config, d_norm)
}

pub fn dwell_report_continuous(
    certs: &CertificateSet,
    constants: SetConstants,
    config: AnalysisConfig,
    d_norm: f64,
) -> Result<RobustnessReport> {
    if certs.domain != TimeDomain::Continuous {
        return Err(Error::Contract(
            "continuous report requested for a discrete family".into(),
        ));
    }
    dwell_report_with_rates(TimeDomain::Continuous, Rates::of(certs), constants, config, d_norm)
}

pub fn dwell_report(
    certs: &CertificateSet,
    constants: SetConstants,
    config: AnalysisConfig,
    d_norm: f64,
) -> Result<RobustnessReport> {
    match certs.domain {
        TimeDomain::Discrete => dwell_report_discrete(certs, constants, config, d_norm),
        TimeDomain::Continuous => dwell_report_continuous(certs, constants, config, d_norm),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SweepCell {
    Ok { report: RobustnessReport },
    Skipped { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub kappa: f64,
    pub delta: f64,
    pub mu: f64,
    pub omega: f64,
    pub cell: SweepCell,
}

impl SweepRow {
    pub fn report(&self) -> Option<&RobustnessReport> {
        match &self.cell {
            SweepCell::Ok { report } => Some(report),
            SweepCell::Skipped { .. } => None,
        }
    }
}

/// One row per `(κ, δ)`, κ outer. Invalid cells are skipped, not errors.
pub fn design_sweep(
    certs: &CertificateSet,
    kappa_grid: &[f64],
    delta_grid: &[f64],
    n0: f64,
    d_norm: f64,
) -> Result<Vec<SweepRow>> {
    if kappa_grid.is_empty() || delta_grid.is_empty() {
        return Err(Error::BadConfig("sweep grids must be nonempty".into()));
    }
    let cells: Vec<(f64, f64)> = kappa_grid
        .iter()
        .flat_map(|&k| delta_grid.iter().map(move |&d| (k, d)))
        .collect();
    let rows = cells
        .par_iter()
        .map(|&(kappa, delta)| {
            let skipped = |reason: String| SweepRow {
                kappa,
                delta,
                mu: f64::NAN,
                omega: f64::NAN,
                cell: SweepCell::Skipped { reason },
            };
            let constants = match closed_form_bounds(certs, kappa) {
                Ok(c) => c,
                Err(e) => return skipped(e.to_string()),
            };
            let config = AnalysisConfig::new(kappa, delta, n0);
            let cell = match dwell_report(certs, constants, config, d_norm) {
                Ok(report) => SweepCell::Ok { report },
                Err(e) => SweepCell::Skipped { reason: e.to_string() },
            };
            SweepRow {
                kappa,
                delta,
                mu: constants.mu,
                omega: constants.omega,
                cell,
            }
        })
        .collect();
    Ok(rows)
}
