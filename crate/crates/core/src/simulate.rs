//! Trajectories of switched affine systems.

use serde::Serialize;

use crate::certificates::CertificateSet;
use crate::error::{Error, Result};
use crate::switching::SwitchingSignal;
use crate::system_model::{DisturbanceSpec, LinearAffineSubsystem, SystemFamily, TimeDomain};

/// Any state component above this magnitude counts as divergence.
pub const BLOWUP: f64 = 1e12;

/// Default RK4 step.
pub const DEFAULT_STEP: f64 = 1e-3;

/// Sampled trajectory. Row `i` holds the state at `times[i]`, the active
/// index there and the disturbance applied on the step leaving it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationTrace {
    pub domain: TimeDomain,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub active_index: Vec<usize>,
    pub disturbance: Vec<Vec<f64>>,
    /// `V_{σ(t)}(x(t))`; NaN until [`lyapunov_trace`] fills it.
    pub v_sigma: Vec<f64>,
}

impl SimulationTrace {
    pub fn empty(domain: TimeDomain) -> Self {
        Self {
            domain,
            times: Vec::new(),
            states: Vec::new(),
            active_index: Vec::new(),
            disturbance: Vec::new(),
            v_sigma: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state_dim(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    pub fn input_dim(&self) -> usize {
        self.disturbance.first().map_or(0, Vec::len)
    }

    pub fn has_lyapunov(&self) -> bool {
        !self.v_sigma.iter().any(|v| v.is_nan())
    }

    /// Row whose time equals `t` exactly.
    pub fn position_of(&self, t: f64) -> Option<usize> {
        let i = self.times.partition_point(|&s| s < t);
        (i < self.times.len() && self.times[i] == t).then_some(i)
    }

    fn push(&mut self, t: f64, x: Vec<f64>, p: usize, d: Vec<f64>) {
        self.times.push(t);
        self.states.push(x);
        self.active_index.push(p);
        self.disturbance.push(d);
        self.v_sigma.push(f64::NAN);
    }
}

fn check_inputs(
    family: &SystemFamily,
    sig: &SwitchingSignal,
    dist: &DisturbanceSpec,
    x0: &[f64],
    domain: TimeDomain,
) -> Result<()> {
    if family.domain != domain || sig.domain != domain {
        return Err(Error::Contract(format!(
            "{} simulation needs a {} family and signal",
            domain.as_str(),
            domain.as_str()
        )));
    }
    if x0.len() != family.n {
        return Err(Error::Contract(format!(
            "initial state has length {}, expected {}",
            x0.len(),
            family.n
        )));
    }
    if dist.m != family.m {
        return Err(Error::Contract(format!(
            "disturbance has dimension {}, expected {}",
            dist.m, family.m
        )));
    }
    if sig.max_index() >= family.len() {
        return Err(Error::Contract(format!(
            "signal uses subsystem {} but the family has {}",
            sig.max_index() + 1,
            family.len()
        )));
    }
    Ok(())
}

fn finite_guard(x: &[f64], t: f64) -> Result<()> {
    if x.iter().all(|v| v.is_finite() && v.abs() <= BLOWUP) {
        Ok(())
    } else {
        Err(Error::Diverged { time: t })
    }
}

/// `x_{k+1} = A_{σ(k)} x_k + B_{σ(k)} d_k + C_{σ(k)}` for `k < steps`.
///
/// The last row records `d_steps` when the disturbance has one, else zero.
pub fn simulate_discrete(
    family: &SystemFamily,
    sig: &SwitchingSignal,
    dist: &DisturbanceSpec,
    x0: &[f64],
    steps: u64,
) -> Result<SimulationTrace> {
    check_inputs(family, sig, dist, x0, TimeDomain::Discrete)?;
    finite_guard(x0, 0.0)?;
    let mut trace = SimulationTrace::empty(TimeDomain::Discrete);
    let mut x = x0.to_vec();
    for k in 0..steps {
        let t = k as f64;
        let p = sig.index_at(t);
        let d = dist.sample(k)?;
        let next = family.subsystems[p].eval(&x, &d);
        trace.push(t, x, p, d);
        finite_guard(&next, t + 1.0)?;
        x = next;
    }
    let t = steps as f64;
    let d = dist.sample(steps).unwrap_or_else(|_| vec![0.0; family.m]);
    trace.push(t, x, sig.index_at(t), d);
    Ok(trace)
}

fn rk4_step(sub: &LinearAffineSubsystem, x: &[f64], d: &[f64], h: f64) -> Vec<f64> {
    let shifted =
        |base: &[f64], k: &[f64], s: f64| -> Vec<f64> { base.iter().zip(k).map(|(b, k)| b + s * k).collect() };
    let k1 = sub.eval(x, d);
    let k2 = sub.eval(&shifted(x, &k1, h / 2.0), d);
    let k3 = sub.eval(&shifted(x, &k2, h / 2.0), d);
    let k4 = sub.eval(&shifted(x, &k3, h), d);
    (0..x.len())
        .map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

/// Sample instants: the grid `k·h` up to `t_end`, plus `t_end` and every
/// switch instant in `(0, t_end)`. Grid points within `1e-9·h` of a switch
/// are replaced by the switch instant.
pub fn time_grid(t_end: f64, h: f64, sig: &SwitchingSignal) -> Vec<f64> {
    let steps = ((t_end / h) - 1e-9).ceil().max(0.0) as u64;
    let mut grid: Vec<f64> = (0..=steps).map(|k| (k as f64 * h).min(t_end)).collect();
    grid.dedup();
    let tol = 1e-9 * h;
    let (first, last) = (grid[0], *grid.last().unwrap_or(&0.0));
    let switches: Vec<f64> = sig
        .switches
        .iter()
        .map(|s| s.t)
        .filter(|&t| t - first > tol && last - t > tol)
        .collect();
    let near_switch = |g: f64| switches.iter().any(|&t| (g - t).abs() <= tol);
    let mut merged: Vec<f64> = grid
        .iter()
        .copied()
        .filter(|&g| g == first || g == last || !near_switch(g))
        .chain(switches.iter().copied())
        .collect();
    merged.sort_by(f64::total_cmp);
    merged.dedup();
    merged
}

/// Classic RK4 with fixed step `h`; steps never straddle a switch and the
/// disturbance is held at its value at each step's start.
pub fn simulate_continuous(
    family: &SystemFamily,
    sig: &SwitchingSignal,
    dist: &DisturbanceSpec,
    x0: &[f64],
    t_end: f64,
    h: f64,
) -> Result<SimulationTrace> {
    check_inputs(family, sig, dist, x0, TimeDomain::Continuous)?;
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::Contract(format!("step must be positive, got {h}")));
    }
    if !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(Error::Contract(format!("end time must be nonnegative, got {t_end}")));
    }
    finite_guard(x0, 0.0)?;
    let grid = time_grid(t_end, h, sig);
    let mut trace = SimulationTrace::empty(TimeDomain::Continuous);
    let mut x = x0.to_vec();
    for w in grid.windows(2) {
        let (a, b) = (w[0], w[1]);
        let p = sig.index_at(a);
        let d = dist.sample_at_time(a, h)?;
        let next = rk4_step(&family.subsystems[p], &x, &d, b - a);
        trace.push(a, x, p, d);
        finite_guard(&next, b)?;
        x = next;
    }
    let t = *grid.last().unwrap_or(&0.0);
    let d = dist.sample_at_time(t, h).unwrap_or_else(|_| vec![0.0; family.m]);
    trace.push(t, x, sig.index_at(t), d);
    Ok(trace)
}

/// Fills `v_sigma` with `V_{σ(t)}(x(t))`.
pub fn lyapunov_trace(trace: &SimulationTrace, certs: &CertificateSet) -> Result<SimulationTrace> {
    let mut out = trace.clone();
    for (i, (x, &p)) in trace.states.iter().zip(&trace.active_index).enumerate() {
        out.v_sigma[i] = certs.get(p)?.value(x);
    }
    Ok(out)
}
