//! Switching signals under an average dwell-time budget.
//!
//! `N_σ(t, t̲)` counts the switches in `[t̲, t)` and the budget requires
//! `N_σ(t, t̲) ≤ N₀ + (t − t̲)/Nₐ` for every window. The count only changes at
//! switch instants, so it suffices to test the tightest window around every
//! run of consecutive switches `i..=j`: `[t_i, t_j + 1)` on the integer grid
//! and `[t_i, t_j]⁺` (length `t_j − t_i`, approached from above) on the real
//! line.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::system_model::TimeDomain;

/// Grid used to place generated continuous-time switches.
pub const CONTINUOUS_GRID: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Switch {
    pub t: f64,
    pub p: usize,
}

/// A piecewise-constant, right-continuous index signal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SwitchingSignal {
    pub domain: TimeDomain,
    pub initial_index: usize,
    pub switches: Vec<Switch>,
}

impl SwitchingSignal {
    pub fn new(domain: TimeDomain, initial_index: usize, switches: Vec<Switch>) -> Result<Self> {
        let mut prev_t = 0.0;
        let mut prev_p = initial_index;
        for (i, s) in switches.iter().enumerate() {
            if !s.t.is_finite() || s.t <= prev_t {
                return Err(Error::InvalidSignal(format!(
                    "switch {} at t = {} is not after the previous instant {prev_t}",
                    i + 1,
                    s.t
                )));
            }
            if domain == TimeDomain::Discrete && s.t.fract() != 0.0 {
                return Err(Error::InvalidSignal(format!(
                    "switch {} at t = {} is not an integer step",
                    i + 1,
                    s.t
                )));
            }
            if s.p == prev_p {
                return Err(Error::InvalidSignal(format!(
                    "switch {} keeps index {}",
                    i + 1,
                    s.p + 1
                )));
            }
            prev_t = s.t;
            prev_p = s.p;
        }
        Ok(Self {
            domain,
            initial_index,
            switches,
        })
    }

    pub fn constant(domain: TimeDomain, index: usize) -> Self {
        Self {
            domain,
            initial_index: index,
            switches: Vec::new(),
        }
    }

    /// `σ(t)`.
    pub fn index_at(&self, t: f64) -> usize {
        let k = self.switches.partition_point(|s| s.t <= t);
        if k == 0 {
            self.initial_index
        } else {
            self.switches[k - 1].p
        }
    }

    /// `σ` just before the `n`-th switch (zero-based ordinal).
    pub fn index_before(&self, n: usize) -> usize {
        if n == 0 {
            self.initial_index
        } else {
            self.switches[n - 1].p
        }
    }

    /// `N_σ(end, start)`: switches with `start ≤ t_i < end`.
    pub fn count_in(&self, start: f64, end: f64) -> usize {
        self.switches.iter().filter(|s| s.t >= start && s.t < end).count()
    }

    pub fn len(&self) -> usize {
        self.switches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.switches.is_empty()
    }

    pub fn max_index(&self) -> usize {
        self.switches.iter().map(|s| s.p).fold(self.initial_index, usize::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SwitchingBudget {
    pub n0: f64,
    pub na: f64,
}

impl SwitchingBudget {
    pub fn new(n0: f64, na: f64) -> Result<Self> {
        if !(n0 >= 1.0) || !n0.is_finite() {
            return Err(Error::BadConfig(format!("N0 must be at least 1, got {n0}")));
        }
        if !(na > 0.0) || !na.is_finite() {
            return Err(Error::BadConfig(format!("Na must be positive, got {na}")));
        }
        Ok(Self { n0, na })
    }

    /// The window predicate shared by validation and generation.
    pub fn admits(&self, count: usize, length: f64) -> bool {
        count as f64 <= self.n0 + length / self.na
    }

    pub fn margin(&self, count: usize, length: f64) -> f64 {
        count as f64 - self.n0 - length / self.na
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Window {
    pub start: f64,
    pub end: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SignalValidation {
    pub valid: bool,
    pub worst_window: Window,
    pub worst_margin: f64,
}

/// Length of the tightest window holding switches `i..=j`.
fn run_length(domain: TimeDomain, ti: f64, tj: f64) -> f64 {
    match domain {
        TimeDomain::Discrete => tj + 1.0 - ti,
        TimeDomain::Continuous => tj - ti,
    }
}

fn run_end(domain: TimeDomain, tj: f64) -> f64 {
    match domain {
        TimeDomain::Discrete => tj + 1.0,
        TimeDomain::Continuous => tj,
    }
}

pub fn validate_signal(sig: &SwitchingSignal, budget: SwitchingBudget, horizon: f64) -> Result<SignalValidation> {
    let mut prev = 0.0;
    for s in &sig.switches {
        if !(s.t > prev) {
            return Err(Error::InvalidSignal(format!(
                "instants must be strictly increasing and positive, found {} after {prev}",
                s.t
            )));
        }
        prev = s.t;
    }
    if prev > horizon {
        return Err(Error::InvalidSignal(format!(
            "horizon {horizon} precedes the last switch at {prev}"
        )));
    }

    let total = sig.switches.len();
    let mut valid = budget.admits(total, horizon);
    let mut worst = Window {
        start: 0.0,
        end: horizon,
        count: total,
    };
    let mut worst_margin = budget.margin(total, horizon);

    for (i, si) in sig.switches.iter().enumerate() {
        for (j, sj) in sig.switches.iter().enumerate().skip(i) {
            let count = j - i + 1;
            let length = run_length(sig.domain, si.t, sj.t);
            if !budget.admits(count, length) {
                valid = false;
            }
            let margin = budget.margin(count, length);
            if margin > worst_margin {
                worst_margin = margin;
                worst = Window {
                    start: si.t,
                    end: run_end(sig.domain, sj.t),
                    count,
                };
            }
        }
    }
    Ok(SignalValidation {
        valid,
        worst_window: worst,
        worst_margin,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Strategy {
    GreedyEarliest,
    RandomAdmissible,
}

/// Whether a new switch at `t` keeps every window ending there admissible.
fn admits_next(domain: TimeDomain, budget: SwitchingBudget, placed: &[f64], t: f64) -> bool {
    let total = placed.len() + 1;
    placed
        .iter()
        .enumerate()
        .all(|(i, &ti)| budget.admits(total - i, run_length(domain, ti, t)))
        && budget.admits(1, run_length(domain, t, t))
}

/// Grid step of candidate instants.
fn grid_step(domain: TimeDomain) -> f64 {
    match domain {
        TimeDomain::Discrete => 1.0,
        TimeDomain::Continuous => CONTINUOUS_GRID,
    }
}

/// First grid ordinal `i ≥ from` whose instant admits a new switch.
fn earliest_slot(domain: TimeDomain, budget: SwitchingBudget, placed: &[f64], from: u64, horizon: f64) -> Option<u64> {
    let step = grid_step(domain);
    let total = placed.len() + 1;
    // Every constraint is a lower bound on t; jump straight to the largest.
    let bound = placed
        .iter()
        .enumerate()
        .map(|(i, &ti)| {
            let extra = (total - i) as f64 - budget.n0;
            let shift = if domain == TimeDomain::Discrete { 1.0 } else { 0.0 };
            ti + extra * budget.na - shift
        })
        .fold(f64::NEG_INFINITY, f64::max);
    let mut i = from.max(((bound / step).floor().max(0.0)) as u64);
    loop {
        let t = i as f64 * step;
        if t >= horizon {
            return None;
        }
        if i >= from && admits_next(domain, budget, placed, t) {
            return Some(i);
        }
        i += 1;
    }
}

/// Builds a signal that switches as often as the budget allows (greedy) or
/// at seeded random admissible instants. The signal starts at `indices[0]`;
/// targets are drawn uniformly from the other indices. All instants lie in
/// `(0, horizon)`.
pub fn generate_signal(
    domain: TimeDomain,
    budget: SwitchingBudget,
    horizon: f64,
    indices: &[usize],
    seed: u64,
    strategy: Strategy,
) -> SwitchingSignal {
    let Some(&initial) = indices.first() else {
        return SwitchingSignal::constant(domain, 0);
    };
    if indices.len() < 2 {
        return SwitchingSignal::constant(domain, initial);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step = grid_step(domain);
    let jitter_slots = (budget.na / step).ceil() as u64;

    let mut placed: Vec<f64> = Vec::new();
    let mut switches = Vec::new();
    let mut current = initial;
    let mut next_from = 1u64;
    while let Some(slot) = earliest_slot(domain, budget, &placed, next_from, horizon) {
        let slot = match strategy {
            Strategy::GreedyEarliest => slot,
            // Later instants only loosen the constraints, so any delay is admissible.
            Strategy::RandomAdmissible => slot + rng.random_range(0..=jitter_slots),
        };
        let t = slot as f64 * step;
        if t >= horizon {
            break;
        }
        let pick = rng.random_range(0..indices.len() - 1);
        let others: Vec<usize> = indices.iter().copied().filter(|&p| p != current).collect();
        let target = others[pick.min(others.len() - 1)];
        placed.push(t);
        switches.push(Switch { t, p: target });
        current = target;
        next_from = slot + 1;
    }
    SwitchingSignal {
        domain,
        initial_index: initial,
        switches,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn discrete(initial: usize, times: &[u32]) -> SwitchingSignal {
        let switches = times
            .iter()
            .enumerate()
            .map(|(i, &t)| Switch {
                t: t as f64,
                p: if (i + initial).is_multiple_of(2) { 1 } else { 0 },
            })
            .collect();
        SwitchingSignal::new(TimeDomain::Discrete, initial, switches).unwrap()
    }

    /// Every integer window `[lo, hi)` with `0 ≤ lo ≤ hi ≤ horizon`.
    fn brute_force_valid(sig: &SwitchingSignal, budget: SwitchingBudget, horizon: u32) -> bool {
        (0..=horizon).all(|lo| {
            (lo..=horizon).all(|hi| {
                let count = sig.count_in(lo as f64, hi as f64);
                budget.admits(count, (hi - lo) as f64)
            })
        })
    }

    /// Maximal switch count over `(0, horizon)` for integer `N₀`, `Nₐ`, via
    /// exact integer DP. With `G_j = Nₐ·j − t_j`, windows ending at switch `j`
    /// are admissible iff `G_j − min_{i≤j} G_i ≤ N₀Nₐ + 1 − Nₐ`; the state
    /// `(last instant, count)` keeps the largest reachable running minimum.
    #[allow(clippy::needless_range_loop)]
    fn dp_max_switches(n0: i64, na: i64, horizon: i64) -> usize {
        let cap = n0 * na + 1 - na;
        let h = horizon as usize;
        // best[t][c]: max over signals of min_i G_i, c switches, last at t.
        let mut best = vec![vec![None::<i64>; h + 1]; h];
        let mut most = 0;
        // A lone switch is its own running minimum.
        if cap >= 0 {
            for (t, row) in best.iter_mut().enumerate().skip(1) {
                row[1] = Some(na - t as i64);
                most = most.max(1);
            }
        }
        for t in 1..h {
            for c in 1..h {
                let Some(m) = best[t][c] else { continue };
                for t2 in (t + 1)..h {
                    let g = na * (c as i64 + 1) - t2 as i64;
                    let m2 = m.min(g);
                    if g - m2 <= cap {
                        let slot = &mut best[t2][c + 1];
                        if slot.is_none_or(|old| m2 > old) {
                            *slot = Some(m2);
                        }
                        most = most.max(c + 1);
                    }
                }
            }
        }
        most
    }

    #[test]
    fn rejects_malformed() {
        let bad = SwitchingSignal::new(
            TimeDomain::Discrete,
            0,
            vec![Switch { t: 3.0, p: 1 }, Switch { t: 3.0, p: 0 }],
        );
        assert!(matches!(bad, Err(Error::InvalidSignal(_))));
        let self_switch = SwitchingSignal::new(TimeDomain::Discrete, 0, vec![Switch { t: 2.0, p: 0 }]);
        assert!(self_switch.is_err());
        let fractional = SwitchingSignal::new(TimeDomain::Discrete, 0, vec![Switch { t: 2.5, p: 1 }]);
        assert!(fractional.is_err());
        let zero = SwitchingSignal::new(TimeDomain::Continuous, 0, vec![Switch { t: 0.0, p: 1 }]);
        assert!(zero.is_err());
    }

    #[test]
    fn index_is_right_continuous() {
        let sig = discrete(0, &[3, 7]);
        assert_eq!(sig.index_at(0.0), 0);
        assert_eq!(sig.index_at(2.0), 0);
        assert_eq!(sig.index_at(3.0), 1);
        assert_eq!(sig.index_at(6.9), 1);
        assert_eq!(sig.index_at(7.0), 0);
        assert_eq!(sig.index_before(1), 1);
    }

    #[test]
    fn no_switches_always_valid() {
        let sig = SwitchingSignal::constant(TimeDomain::Discrete, 0);
        let v = validate_signal(&sig, SwitchingBudget::new(1.0, 1e6).unwrap(), 1000.0).unwrap();
        assert!(v.valid);
        assert_eq!(v.worst_window.count, 0);
    }

    #[test]
    fn consecutive_switches_match_brute_force() {
        let budget = SwitchingBudget::new(1.0, 5.0).unwrap();
        let sig = discrete(0, &[4, 5]);
        let v = validate_signal(&sig, budget, 20.0).unwrap();
        assert_eq!(v.valid, brute_force_valid(&sig, budget, 20));
        assert!(!v.valid);
        assert_eq!(v.worst_window.count, 2);
        assert_eq!((v.worst_window.start, v.worst_window.end), (4.0, 6.0));
    }

    #[test]
    fn horizon_before_last_switch_rejected() {
        let sig = discrete(0, &[4, 9]);
        let budget = SwitchingBudget::new(2.0, 1.0).unwrap();
        assert!(matches!(
            validate_signal(&sig, budget, 5.0),
            Err(Error::InvalidSignal(_))
        ));
    }

    #[test]
    fn greedy_matches_dp_maximum() {
        let budget = SwitchingBudget::new(2.0, 5.0).unwrap();
        let sig = generate_signal(
            TimeDomain::Discrete,
            budget,
            50.0,
            &[0, 1, 2],
            7,
            Strategy::GreedyEarliest,
        );
        assert!(validate_signal(&sig, budget, 50.0).unwrap().valid);
        assert_eq!(sig.len(), dp_max_switches(2, 5, 50));
        for (n0, na, h) in [(1, 1, 10), (1, 3, 30), (3, 2, 25), (2, 7, 40)] {
            let b = SwitchingBudget::new(n0 as f64, na as f64).unwrap();
            let s = generate_signal(TimeDomain::Discrete, b, h as f64, &[0, 1], 0, Strategy::GreedyEarliest);
            assert_eq!(s.len(), dp_max_switches(n0, na, h), "N0={n0} Na={na} horizon={h}");
        }
    }

    #[test]
    fn short_horizon_yields_no_switches() {
        let budget = SwitchingBudget::new(1.000001, 1e9).unwrap();
        let sig = generate_signal(TimeDomain::Discrete, budget, 1.0, &[0, 1], 0, Strategy::GreedyEarliest);
        assert!(sig.is_empty());
        let single = generate_signal(TimeDomain::Discrete, budget, 100.0, &[0], 0, Strategy::GreedyEarliest);
        assert!(single.is_empty());
    }

    #[test]
    fn continuous_generation_self_validates() {
        let budget = SwitchingBudget::new(1.0, 0.75).unwrap();
        for strategy in [Strategy::GreedyEarliest, Strategy::RandomAdmissible] {
            let sig = generate_signal(TimeDomain::Continuous, budget, 10.0, &[0, 1, 2], 3, strategy);
            assert!(!sig.is_empty());
            assert!(validate_signal(&sig, budget, 10.0).unwrap().valid);
            for w in sig.switches.windows(2) {
                assert_ne!(w[0].p, w[1].p);
            }
        }
    }

    #[test]
    fn generation_is_seeded() {
        let budget = SwitchingBudget::new(2.0, 3.0).unwrap();
        let a = generate_signal(
            TimeDomain::Discrete,
            budget,
            80.0,
            &[0, 1, 2],
            11,
            Strategy::RandomAdmissible,
        );
        let b = generate_signal(
            TimeDomain::Discrete,
            budget,
            80.0,
            &[0, 1, 2],
            11,
            Strategy::RandomAdmissible,
        );
        assert_eq!(a, b);
    }
}
