//! Replaying the boundedness guarantees along a trace.
//!
//! Three checks are offered: the switched decay estimate up to the first
//! fallback switch, the `β`/`α` transient envelope, and entry into the
//! trapping set `M(ω̄)`.

use serde::Serialize;

use crate::certificates::CertificateSet;
use crate::dwell_time::{mu_power, AnalysisConfig, RobustnessReport};
use crate::error::{Error, Result};
use crate::linalg;
use crate::set_constructions::SetConstants;
use crate::simulate::SimulationTrace;
use crate::switching::SwitchingSignal;
use crate::system_model::TimeDomain;

/// Relative slack used by the envelope and decay checks.
pub const REL_SLACK: f64 = 1e-6;

fn exceeds(lhs: f64, rhs: f64) -> bool {
    lhs - rhs > REL_SLACK * rhs.abs().max(1.0)
}

/// The quadratic instantiation of the `β ∈ KL`, `α ∈ K∞` bounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransientEnvelope {
    pub domain: TimeDomain,
    pub mu: f64,
    pub n0: f64,
    pub decay: f64,
    /// `ĝ`, so that `α̂(s) = ĝ s²`.
    pub gain: f64,
    pub lambda_min: Vec<f64>,
    pub lambda_max: Vec<f64>,
}

impl TransientEnvelope {
    pub fn new(certs: &CertificateSet, mu: f64, n0: f64, decay: f64) -> Self {
        Self {
            domain: certs.domain,
            mu,
            n0,
            decay,
            gain: certs.aggregate_gain(),
            lambda_min: certs.certs.iter().map(|c| c.lambda_min_s).collect(),
            lambda_max: certs.certs.iter().map(|c| c.lambda_max_s).collect(),
        }
    }

    pub fn from_report(certs: &CertificateSet, report: &RobustnessReport) -> Self {
        let mut env = Self::new(certs, report.set_constants.mu, report.config.n0, report.config.delta);
        env.gain = report.gain;
        env
    }

    fn power(&self) -> f64 {
        mu_power(self.domain, self.mu, self.n0)
    }

    fn decay_factor(&self, t: f64) -> f64 {
        match self.domain {
            TimeDomain::Discrete => self.decay.powf(t),
            TimeDomain::Continuous => (-self.decay * t).exp(),
        }
    }

    fn gain_factor(&self) -> f64 {
        match self.domain {
            TimeDomain::Discrete => self.power() / (1.0 - self.decay),
            TimeDomain::Continuous => self.power() / self.decay,
        }
    }

    fn min_lambda_min(&self) -> f64 {
        self.lambda_min.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn max_lambda_max(&self) -> f64 {
        self.lambda_max.iter().copied().fold(0.0, f64::max)
    }

    /// `β(s, t) = max_{p,q} √(2μ^N δ^t λmax(S_q) s² / λmin(S_p))`.
    pub fn beta(&self, s: f64, t: f64) -> f64 {
        (2.0 * self.power() * self.decay_factor(t) * self.max_lambda_max() * s * s / self.min_lambda_min()).sqrt()
    }

    /// `α(s) = max_p √(2 G ĝ s² / λmin(S_p))`.
    pub fn alpha(&self, s: f64) -> f64 {
        (2.0 * self.gain_factor() * self.gain * s * s / self.min_lambda_min()).sqrt()
    }
}

pub fn transient_envelope_eval(env: &TransientEnvelope, s: f64, t: f64) -> (f64, f64) {
    (env.beta(s, t), env.alpha(s))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnvelopeCheck {
    pub ok: bool,
    pub checked: usize,
    pub max_violation: f64,
    pub first_violation: Option<f64>,
}

/// `‖x(t) − x*_{σ(t)}‖ ≤ β(‖x(0) − x*_{σ(0)}‖, t) + α(d_norm)` on trace rows
/// with time below `until`.
pub fn check_envelope(
    trace: &SimulationTrace,
    certs: &CertificateSet,
    env: &TransientEnvelope,
    d_norm: f64,
    until: f64,
) -> Result<EnvelopeCheck> {
    let mut out = EnvelopeCheck {
        ok: true,
        checked: 0,
        max_violation: f64::NEG_INFINITY,
        first_violation: None,
    };
    let Some(x0) = trace.states.first() else {
        return Ok(out);
    };
    let s0 = linalg::distance(x0, &certs.get(trace.active_index[0])?.equilibrium);
    let alpha = env.alpha(d_norm);
    for (i, &t) in trace.times.iter().enumerate() {
        if t >= until {
            break;
        }
        let eq = &certs.get(trace.active_index[i])?.equilibrium;
        let lhs = linalg::distance(&trace.states[i], eq);
        let rhs = env.beta(s0, t) + alpha;
        out.checked += 1;
        out.max_violation = out.max_violation.max(lhs - rhs);
        if exceeds(lhs, rhs) {
            out.ok = false;
            out.first_violation.get_or_insert(t);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FallbackSwitch {
    /// One-based switch ordinal `N`.
    pub ordinal: usize,
    pub time: f64,
}

/// First switch whose state lies strictly inside the outgoing certificate's
/// `κ`-sublevel set.
pub fn first_fallback(
    trace: &SimulationTrace,
    certs: &CertificateSet,
    sig: &SwitchingSignal,
    kappa: f64,
) -> Result<Option<FallbackSwitch>> {
    for (n, s) in sig.switches.iter().enumerate() {
        let Some(row) = trace.position_of(s.t) else {
            if trace.times.last().is_some_and(|&end| s.t > end) {
                break;
            }
            return Err(Error::InvalidInput(format!(
                "switch {} at t = {} has no trace sample",
                n + 1,
                s.t
            )));
        };
        let outgoing = sig.index_before(n);
        if certs.get(outgoing)?.value(&trace.states[row]) < kappa {
            return Ok(Some(FallbackSwitch {
                ordinal: n + 1,
                time: s.t,
            }));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayCheck {
    pub ok: bool,
    pub first_fallback: Option<FallbackSwitch>,
    pub checked: usize,
    pub max_violation: f64,
}

/// `V_{σ(t)}(x(t)) ≤ P·ρ(t)·V_{σ(0)}(x(0)) + G·ĝ·d_norm²` for every trace time
/// before the first fallback switch, where `P = μ^N₀, ρ = δ^t, G = P/(1−δ)`
/// (discrete) or `P = μ^(1+N₀), ρ = e^(−δt), G = P/δ` (continuous).
pub fn check_decay_bound(
    trace: &SimulationTrace,
    certs: &CertificateSet,
    sig: &SwitchingSignal,
    config: AnalysisConfig,
    constants: SetConstants,
    d_norm: f64,
) -> Result<DecayCheck> {
    check_consistency(trace, sig)?;
    let env = TransientEnvelope::new(certs, constants.mu, config.n0, config.delta);
    let fallback = first_fallback(trace, certs, sig, config.kappa)?;
    let until = fallback.map_or(f64::INFINITY, |f| f.time);
    let mut out = DecayCheck {
        ok: true,
        first_fallback: fallback,
        checked: 0,
        max_violation: f64::NEG_INFINITY,
    };
    let Some(x0) = trace.states.first() else {
        return Ok(out);
    };
    let v0 = certs.get(trace.active_index[0])?.value(x0);
    let offset = env.gain_factor() * env.gain * d_norm * d_norm;
    for (i, &t) in trace.times.iter().enumerate() {
        if t >= until {
            break;
        }
        let lhs = certs.get(trace.active_index[i])?.value(&trace.states[i]);
        let rhs = env.power() * env.decay_factor(t) * v0 + offset;
        out.checked += 1;
        out.max_violation = out.max_violation.max(lhs - rhs);
        if exceeds(lhs, rhs) {
            out.ok = false;
        }
    }
    Ok(out)
}

fn check_consistency(trace: &SimulationTrace, sig: &SwitchingSignal) -> Result<()> {
    if trace.domain != sig.domain {
        return Err(Error::InvalidInput("trace and signal domains differ".into()));
    }
    for (i, (&t, &p)) in trace.times.iter().zip(&trace.active_index).enumerate() {
        if sig.index_at(t) != p {
            return Err(Error::InvalidInput(format!(
                "trace row {i} at t = {t} has index {} but the signal gives {}",
                p + 1,
                sig.index_at(t) + 1
            )));
        }
    }
    Ok(())
}

/// Entry into `M(ω̄)` over a finite horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundednessVerdict {
    /// Earliest time after which every sample satisfies `min_p V_p ≤ ω̄`.
    pub entry_time: Option<f64>,
    pub trapped_after_entry: bool,
    /// Earliest time after which every sample satisfies `V_σ ≤ ω̄`.
    pub active_entry_time: Option<f64>,
    /// Some sample lies outside `M(ω̄)` after an earlier sample inside it.
    pub escaped: bool,
    pub omega_bar: f64,
}

/// Suffix scan of `M(ω̄)` membership. `None` means the horizon was too short
/// to witness entry, not a violation.
pub fn entry_time(trace: &SimulationTrace, certs: &CertificateSet, omega_bar: f64) -> Result<BoundednessVerdict> {
    if !(omega_bar > 0.0) {
        return Err(Error::BadConfig(format!("omega_bar must be positive, got {omega_bar}")));
    }
    let member: Vec<bool> = trace.states.iter().map(|x| certs.min_value(x) <= omega_bar).collect();
    let active: Vec<bool> = trace
        .states
        .iter()
        .zip(&trace.active_index)
        .map(|(x, &p)| certs.get(p).map(|c| c.value(x) <= omega_bar))
        .collect::<Result<_>>()?;
    let suffix_start = |flags: &[bool]| -> Option<usize> {
        let tail = flags.iter().rev().take_while(|&&b| b).count();
        (tail > 0).then(|| flags.len() - tail)
    };
    let entry = suffix_start(&member);
    let first_in = member.iter().position(|&b| b);
    let escaped = first_in.is_some_and(|i| member[i..].iter().any(|&b| !b));
    Ok(BoundednessVerdict {
        entry_time: entry.map(|i| trace.times[i]),
        trapped_after_entry: entry.is_some(),
        active_entry_time: suffix_start(&active).map(|i| trace.times[i]),
        escaped,
        omega_bar,
    })
}

/// The entry time constructed in the proof: zero when `V_{σ(0)}(x₀) ≤ ω`,
/// the fallback instant when one exists, else `⌈ln(V₀/ω)/ln(1/δ)⌉` steps
/// (discrete) or `ln(V₀/ω)/δ` (continuous).
pub fn proof_entry_bound(domain: TimeDomain, v0: f64, omega: f64, delta: f64, fallback: Option<f64>) -> f64 {
    if v0 <= omega {
        return 0.0;
    }
    if let Some(t) = fallback {
        return t;
    }
    let ratio = (v0 / omega).ln();
    match domain {
        TimeDomain::Discrete => (ratio / (1.0 / delta).ln()).ceil(),
        TimeDomain::Continuous => ratio / delta,
    }
}

/// The decay replay and the entry scan together.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceAnalysis {
    pub entry: BoundednessVerdict,
    pub decay: DecayCheck,
    pub proof_entry_bound: f64,
    pub c: f64,
}

pub fn analyze_trace(
    trace: &SimulationTrace,
    certs: &CertificateSet,
    sig: &SwitchingSignal,
    report: &RobustnessReport,
) -> Result<TraceAnalysis> {
    let decay = check_decay_bound(trace, certs, sig, report.config, report.set_constants, report.d_norm)?;
    let entry = entry_time(trace, certs, report.omega_bar)?;
    let v0 = match trace.states.first() {
        Some(x0) => certs.get(trace.active_index[0])?.value(x0),
        None => 0.0,
    };
    let proof = proof_entry_bound(
        report.domain,
        v0,
        report.set_constants.omega,
        report.config.delta,
        decay.first_fallback.map(|f| f.time),
    );
    Ok(TraceAnalysis {
        entry,
        decay,
        proof_entry_bound: proof,
        c: report.c,
    })
}
