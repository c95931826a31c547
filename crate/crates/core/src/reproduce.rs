//! End-to-end runs of the two bundled examples.

use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::analysis::{analyze_trace, entry_time, BoundednessVerdict, TraceAnalysis};
use crate::certificates::{CertificateSet, RateConvention};
use crate::dwell_time::{dwell_report, dwell_report_with_rates, AnalysisConfig, Rates, RobustnessReport};
use crate::error::{Error, Result};
use crate::fixtures;
use crate::io::{fmt_f64, write_trace_csv};
use crate::set_constructions::{closed_form_bounds, EllipsoidSampler, SetConstants};
use crate::simulate::{lyapunov_trace, simulate_continuous, simulate_discrete, SimulationTrace};
use crate::switching::{
    generate_signal, validate_signal, SignalValidation, Strategy, SwitchingBudget, SwitchingSignal,
};
use crate::system_model::{DisturbanceSpec, SystemFamily, TimeDomain};

/// Deterministic per-consumer seed.
pub fn sub_seed(seed: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.next_u64()
}

pub const SIGNAL_STREAM: u64 = 1;
pub const DISTURBANCE_STREAM: u64 = 2;

/// Reference values for side-by-side reporting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Reference {
    pub lambda: f64,
    pub mu: f64,
    pub omega: f64,
    pub n_a_bar: f64,
    pub c: Option<f64>,
}

pub const EXAMPLE1_REFERENCE: Reference = Reference {
    lambda: 0.68,
    mu: 2.57,
    omega: 25.2,
    n_a_bar: 4.47,
    c: None,
};

pub const EXAMPLE2_REFERENCE: Reference = Reference {
    lambda: 0.5,
    mu: 31.88,
    omega: 29.89,
    n_a_bar: 8.65,
    c: Some(3.064e4),
};

#[derive(Debug, Clone, Serialize)]
pub struct RateSummary {
    pub convention: &'static str,
    pub value: f64,
}

fn rate_summary(certs: &CertificateSet) -> Vec<RateSummary> {
    RateConvention::ALL
        .iter()
        .map(|&c| RateSummary {
            convention: c.name(),
            value: certs.aggregate(c),
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct Example1Report {
    pub seed: u64,
    pub rates: Vec<RateSummary>,
    pub constants: SetConstants,
    pub robustness: RobustnessReport,
    pub budget: SwitchingBudget,
    pub switches: usize,
    pub validation: SignalValidation,
    pub analysis: TraceAnalysis,
    pub max_v_after_entry: Option<f64>,
    pub reference: Reference,
}

#[derive(Debug, Clone)]
pub struct Example1Run {
    pub report: Example1Report,
    pub family: SystemFamily,
    pub certs: CertificateSet,
    pub signal: SwitchingSignal,
    pub trace: SimulationTrace,
}

pub const EXAMPLE1_X0: [f64; 4] = [5.0, 10.0, -7.5, 5.0];
pub const EXAMPLE1_STEPS: u64 = 200;
pub const EXAMPLE1_NA: f64 = 4.47;
pub const EXAMPLE1_D_BOUND: f64 = 10.0;

pub fn example1(seed: u64) -> Result<Example1Run> {
    let family = fixtures::example1();
    let certs = CertificateSet::build_default(&family).map_err(|e| e.at_stage("certify"))?;
    let config = AnalysisConfig::discrete_default();
    let constants = closed_form_bounds(&certs, config.kappa).map_err(|e| e.at_stage("bounds"))?;
    let dist = DisturbanceSpec::uniform(family.m, EXAMPLE1_D_BOUND, sub_seed(seed, DISTURBANCE_STREAM))
        .map_err(|e| e.at_stage("disturbance"))?;
    let robustness = dwell_report(&certs, constants, config, dist.sup_norm()).map_err(|e| e.at_stage("dwell"))?;
    let budget = SwitchingBudget::new(config.n0, EXAMPLE1_NA).map_err(|e| e.at_stage("signal"))?;
    let horizon = EXAMPLE1_STEPS as f64;
    let indices: Vec<usize> = (0..family.len()).collect();
    let signal = generate_signal(
        TimeDomain::Discrete,
        budget,
        horizon,
        &indices,
        sub_seed(seed, SIGNAL_STREAM),
        Strategy::RandomAdmissible,
    );
    let validation = validate_signal(&signal, budget, horizon).map_err(|e| e.at_stage("signal"))?;
    let trace = simulate_discrete(&family, &signal, &dist, &EXAMPLE1_X0, EXAMPLE1_STEPS)
        .and_then(|t| lyapunov_trace(&t, &certs))
        .map_err(|e| e.at_stage("simulate"))?;
    let analysis = analyze_trace(&trace, &certs, &signal, &robustness).map_err(|e| e.at_stage("analyze"))?;
    let max_v_after_entry = analysis.entry.active_entry_time.map(|t0| {
        trace
            .times
            .iter()
            .zip(&trace.v_sigma)
            .filter(|(&t, _)| t >= t0)
            .map(|(_, &v)| v)
            .fold(f64::NEG_INFINITY, f64::max)
    });
    let report = Example1Report {
        seed,
        rates: rate_summary(&certs),
        constants,
        robustness,
        budget,
        switches: signal.len(),
        validation,
        analysis,
        max_v_after_entry,
        reference: EXAMPLE1_REFERENCE,
    };
    Ok(Example1Run {
        report,
        family,
        certs,
        signal,
        trace,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Example2Report {
    pub rates: Vec<RateSummary>,
    pub constants: SetConstants,
    /// With the aggregate rate of the computed certificates.
    pub robustness: RobustnessReport,
    /// With the reference rate.
    pub robustness_reference_rate: RobustnessReport,
    pub initial_min_v: f64,
    pub max_min_v: f64,
    pub escape_time: Option<f64>,
    pub verdict: BoundednessVerdict,
    pub reference: Reference,
}

#[derive(Debug, Clone)]
pub struct Example2Run {
    pub report: Example2Report,
    pub family: SystemFamily,
    pub certs: CertificateSet,
    pub trace: SimulationTrace,
}

pub const EXAMPLE2_X0: [f64; 2] = [224.0, 21.0];
pub const EXAMPLE2_T: f64 = 20.0;
pub const EXAMPLE2_H: f64 = 1e-3;
pub const EXAMPLE2_ACTIVE: usize = 1;

pub fn example2() -> Result<Example2Run> {
    let family = fixtures::example2();
    let certs = CertificateSet::build_default(&family).map_err(|e| e.at_stage("certify"))?;
    let config = AnalysisConfig::continuous_default();
    let constants = closed_form_bounds(&certs, config.kappa).map_err(|e| e.at_stage("bounds"))?;
    let robustness = dwell_report(&certs, constants, config, 0.0).map_err(|e| e.at_stage("dwell"))?;
    let reference_rates = Rates {
        lambda: EXAMPLE2_REFERENCE.lambda,
        gain: certs.aggregate_gain(),
    };
    let robustness_reference_rate =
        dwell_report_with_rates(TimeDomain::Continuous, reference_rates, constants, config, 0.0)
            .map_err(|e| e.at_stage("dwell"))?;
    let signal = SwitchingSignal::constant(TimeDomain::Continuous, EXAMPLE2_ACTIVE);
    let dist = DisturbanceSpec::zero(family.m);
    let trace = simulate_continuous(&family, &signal, &dist, &EXAMPLE2_X0, EXAMPLE2_T, EXAMPLE2_H)
        .and_then(|t| lyapunov_trace(&t, &certs))
        .map_err(|e| e.at_stage("simulate"))?;
    let verdict = entry_time(&trace, &certs, robustness.c).map_err(|e| e.at_stage("analyze"))?;
    let min_v: Vec<f64> = trace.states.iter().map(|x| certs.min_value(x)).collect();
    let escape_time = min_v.iter().position(|&v| v > robustness.c).map(|i| trace.times[i]);
    let report = Example2Report {
        rates: rate_summary(&certs),
        constants,
        robustness,
        robustness_reference_rate,
        initial_min_v: min_v.first().copied().unwrap_or(f64::NAN),
        max_min_v: min_v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        escape_time,
        verdict,
        reference: EXAMPLE2_REFERENCE,
    };
    Ok(Example2Run {
        report,
        family,
        certs,
        trace,
    })
}

fn write_rows(path: &Path, header: &str, rows: impl Iterator<Item = Vec<f64>>) -> Result<()> {
    let mut out = String::from(header);
    out.push('\n');
    for row in rows {
        let line: Vec<String> = row.into_iter().map(fmt_f64).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

impl Example1Run {
    /// `example1_trace.csv` plus `example1_levels.csv` (`time,V_sigma,omega_bar,c`).
    pub fn write_outputs(&self, dir: &Path) -> Result<()> {
        write_trace_csv(
            &self.trace,
            self.family.n,
            self.family.m,
            dir.join("example1_trace.csv"),
        )?;
        let r = &self.report.robustness;
        write_rows(
            &dir.join("example1_levels.csv"),
            "time,V_sigma,omega_bar,c",
            self.trace
                .times
                .iter()
                .zip(&self.trace.v_sigma)
                .map(|(&t, &v)| vec![t, v, r.omega_bar, r.c]),
        )
    }
}

impl Example2Run {
    /// `example2_trace.csv`, `example2_levels.csv` (`time,V1,V2,min_V,c`) and
    /// `example2_sets.csv` (`p,x1,x2` on the boundary of each `M_p(c)`).
    pub fn write_outputs(&self, dir: &Path) -> Result<()> {
        write_trace_csv(
            &self.trace,
            self.family.n,
            self.family.m,
            dir.join("example2_trace.csv"),
        )?;
        let c = self.report.robustness.c;
        write_rows(
            &dir.join("example2_levels.csv"),
            "time,V1,V2,min_V,c",
            self.trace.times.iter().zip(&self.trace.states).map(|(&t, x)| {
                let v = self.certs.values(x);
                let min = v.iter().copied().fold(f64::INFINITY, f64::min);
                let mut row = vec![t];
                row.extend(v);
                row.push(min);
                row.push(c);
                row
            }),
        )?;
        let mut boundary = Vec::new();
        for (p, cert) in self.certs.certs.iter().enumerate() {
            let sampler = EllipsoidSampler::new(cert)?;
            for k in 0..=360 {
                let a = (k as f64).to_radians();
                let x = sampler.map(c, &[a.cos(), a.sin()]);
                boundary.push(vec![(p + 1) as f64, x[0], x[1]]);
            }
        }
        write_rows(&dir.join("example2_sets.csv"), "p,x1,x2", boundary.into_iter())
    }
}
