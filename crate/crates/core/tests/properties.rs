mod common;

use proptest::prelude::*;
use switchbound::analysis::entry_time;
use switchbound::certificates::verify_iss_pointwise;
use switchbound::dwell_time::{design_sweep, dwell_report, dwell_report_with_rates, Rates};
use switchbound::io::{read_trace_csv, write_trace_csv};
use switchbound::linalg::{self, Matrix};
use switchbound::set_constructions::{SetConstants, SetMethod};
use switchbound::simulate::{lyapunov_trace, simulate_discrete};
use switchbound::switching::{generate_signal, validate_signal, Strategy, Switch};
use switchbound::{
    closed_form_bounds, AnalysisConfig, CertificateSet, DisturbanceSpec, SwitchingBudget, SwitchingSignal, TimeDomain,
};

fn domain_of(flag: bool) -> TimeDomain {
    if flag {
        TimeDomain::Discrete
    } else {
        TimeDomain::Continuous
    }
}

fn constants(mu: f64, omega: f64) -> SetConstants {
    SetConstants {
        kappa: 1.0,
        omega,
        mu,
        method: SetMethod::ClosedForm,
    }
}

/// Random discrete signal on `(0, horizon)` from a bit mask.
fn signal_from_mask(mask: &[bool]) -> SwitchingSignal {
    let switches = mask
        .iter()
        .enumerate()
        .filter(|(_, &on)| on)
        .enumerate()
        .map(|(i, (t, _))| Switch {
            t: (t + 1) as f64,
            p: (i + 1) % 2,
        })
        .collect();
    SwitchingSignal::new(TimeDomain::Discrete, 0, switches).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lyapunov_solutions_are_spd_with_small_residual(seed in any::<u64>(), n in 1usize..6, discrete in any::<bool>()) {
        let domain = domain_of(discrete);
        let mut rng = common::rng(seed);
        let a = common::random_stable(domain, n, &mut rng);
        let q = Matrix::identity(n);
        let (s, res) = match domain {
            TimeDomain::Discrete => {
                let s = linalg::solve_discrete_lyapunov(&a, &q).unwrap();
                let r = linalg::discrete_lyapunov_residual(&a, &s, &q);
                (s, r)
            }
            TimeDomain::Continuous => {
                let s = linalg::solve_continuous_lyapunov(&a, &q).unwrap();
                let r = linalg::continuous_lyapunov_residual(&a, &s, &q);
                (s, r)
            }
        };
        prop_assert!(res < 1e-10, "residual {res}");
        prop_assert_eq!(s.asymmetry(), 0.0);
        prop_assert!(linalg::cholesky(&s).is_ok());
    }

    #[test]
    fn eigendecomposition_reconstructs(seed in any::<u64>(), n in 1usize..7) {
        let mut rng = common::rng(seed);
        let m = common::random_matrix(n, n, &mut rng).symmetrized();
        let eig = linalg::sym_eig(&m).unwrap();
        let mut rebuilt = Matrix::zeros(n, n);
        for k in 0..n {
            let v = eig.eigenvectors.col(k);
            for i in 0..n {
                for j in 0..n {
                    rebuilt[(i, j)] += eig.eigenvalues[k] * v[i] * v[j];
                }
            }
        }
        prop_assert!(rebuilt.add_scaled(-1.0, &m).max_abs() < 1e-12);
        prop_assert!(eig.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn omega_bar_increasing_in_disturbance(gain in 1e-3f64..10.0, mu in 1.0f64..50.0, s1 in 0.0f64..10.0, ds in 1e-3f64..10.0, discrete in any::<bool>()) {
        let domain = domain_of(discrete);
        let (lambda, delta) = match domain {
            TimeDomain::Discrete => (0.5, 0.7),
            TimeDomain::Continuous => (0.5, 0.2),
        };
        let rates = Rates { lambda, gain };
        let config = AnalysisConfig::new(1.0, delta, 1.5);
        let at = |d: f64| dwell_report_with_rates(domain, rates, constants(mu, 3.0), config, d).unwrap();
        prop_assert_eq!(at(0.0).omega_bar, at(0.0).c);
        prop_assert!(at(s1 + ds).omega_bar > at(s1).omega_bar);
    }

    #[test]
    fn dwell_floor_relaxes_with_slower_required_decay(mu in 1.01f64..100.0, lambda in 0.05f64..0.9, u in 0.01f64..0.98, du in 0.001f64..0.01, discrete in any::<bool>()) {
        let domain = domain_of(discrete);
        let (lo, hi) = match domain {
            TimeDomain::Discrete => (lambda, 1.0),
            TimeDomain::Continuous => (0.0, lambda),
        };
        let d1 = lo + u * (hi - lo);
        let d2 = (lo + (u + du) * (hi - lo)).min(hi - 1e-9);
        prop_assume!(d2 > d1);
        let na = |d: f64| {
            dwell_report_with_rates(domain, Rates { lambda, gain: 1.0 }, constants(mu, 1.0), AnalysisConfig::new(1.0, d, 1.0), 0.0)
                .unwrap()
                .n_a_bar
        };
        // Slower decay is a larger factor in discrete time and a smaller rate in continuous time.
        match domain {
            TimeDomain::Discrete => prop_assert!(na(d2) < na(d1)),
            TimeDomain::Continuous => prop_assert!(na(d2) > na(d1)),
        }
    }

    #[test]
    fn set_constants_monotone_in_kappa(seed in any::<u64>(), k1 in 0.1f64..20.0, dk in 0.01f64..20.0, discrete in any::<bool>()) {
        let mut rng = common::rng(seed);
        let family = common::random_family(domain_of(discrete), 2, 1, 3, None, &mut rng);
        let certs = CertificateSet::build_default(&family).unwrap();
        let a = closed_form_bounds(&certs, k1).unwrap();
        let b = closed_form_bounds(&certs, k1 + dk).unwrap();
        prop_assert!(b.mu <= a.mu);
        prop_assert!(b.omega >= a.omega);
        prop_assert!(a.mu >= 1.0);
    }

    #[test]
    fn iss_inequality_holds_pointwise(seed in any::<u64>(), discrete in any::<bool>()) {
        let mut rng = common::rng(seed);
        let family = common::random_family(domain_of(discrete), 3, 2, 2, None, &mut rng);
        let certs = CertificateSet::build_default(&family).unwrap();
        for (cert, sub) in certs.certs.iter().zip(&family.subsystems) {
            for _ in 0..20 {
                let x = common::random_vector(3, 10.0, &mut rng);
                let d = common::random_vector(2, 5.0, &mut rng);
                let check = verify_iss_pointwise(cert, sub, &x, &d);
                prop_assert!(check.holds, "lhs {} rhs {}", check.lhs, check.rhs);
            }
        }
    }

    #[test]
    fn quiet_tail_never_flips_validity(mask in prop::collection::vec(prop::bool::weighted(0.2), 1..80), n0 in 1.0f64..3.0, na in 0.5f64..8.0, extra in 1u32..50) {
        let sig = signal_from_mask(&mask);
        let budget = SwitchingBudget::new(n0, na).unwrap();
        let horizon = (mask.len() + 1) as f64;
        if validate_signal(&sig, budget, horizon).unwrap().valid {
            prop_assert!(validate_signal(&sig, budget, horizon + extra as f64).unwrap().valid);
        }
    }

    #[test]
    fn suffix_of_valid_signal_is_valid(mask in prop::collection::vec(prop::bool::weighted(0.25), 1..80), n0 in 1.0f64..3.0, na in 0.5f64..8.0, cut in 0usize..80) {
        let sig = signal_from_mask(&mask);
        let budget = SwitchingBudget::new(n0, na).unwrap();
        let horizon = (mask.len() + 1) as f64;
        prop_assume!(validate_signal(&sig, budget, horizon).unwrap().valid);
        let s = (cut.min(mask.len())) as f64;
        let rebased: Vec<Switch> = sig.switches.iter().filter(|w| w.t > s).map(|w| Switch { t: w.t - s, p: w.p }).collect();
        let suffix = SwitchingSignal::new(TimeDomain::Discrete, sig.index_at(s), rebased).unwrap();
        prop_assert!(validate_signal(&suffix, budget, horizon - s).unwrap().valid);
    }

    #[test]
    fn generated_signals_validate(seed in any::<u64>(), n0 in 1.0f64..4.0, na in 0.2f64..10.0, discrete in any::<bool>(), random in any::<bool>()) {
        let domain = domain_of(discrete);
        let budget = SwitchingBudget::new(n0, na).unwrap();
        let horizon = if discrete { 120.0 } else { 15.0 };
        let strategy = if random { Strategy::RandomAdmissible } else { Strategy::GreedyEarliest };
        let sig = generate_signal(domain, budget, horizon, &[2, 0, 1], seed, strategy);
        prop_assert_eq!(sig.initial_index, 2);
        prop_assert!(sig.switches.iter().all(|s| s.t > 0.0 && s.t < horizon));
        prop_assert!(validate_signal(&sig, budget, horizon).unwrap().valid);
    }

    #[test]
    fn lyapunov_trace_matches_direct_evaluation(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let family = common::random_family(TimeDomain::Discrete, 3, 1, 2, None, &mut rng);
        let certs = CertificateSet::build_default(&family).unwrap();
        let budget = SwitchingBudget::new(1.5, 3.0).unwrap();
        let sig = generate_signal(TimeDomain::Discrete, budget, 40.0, &[0, 1], seed, Strategy::RandomAdmissible);
        let dist = DisturbanceSpec::uniform(1, 1.0, seed).unwrap();
        let x0 = common::random_vector(3, 5.0, &mut rng);
        let trace = simulate_discrete(&family, &sig, &dist, &x0, 40).unwrap();
        let again = simulate_discrete(&family, &sig, &dist, &x0, 40).unwrap();
        prop_assert_eq!(&trace.states, &again.states);
        prop_assert_eq!(&trace.disturbance, &again.disturbance);
        let filled = lyapunov_trace(&trace, &certs).unwrap();
        for i in 0..filled.len() {
            let cert = &certs.certs[filled.active_index[i]];
            let e: Vec<f64> = filled.states[i].iter().zip(&cert.equilibrium).map(|(x, c)| x - c).collect();
            let se = cert.s.mul_vec(&e);
            let direct: f64 = e.iter().zip(&se).map(|(a, b)| a * b).sum();
            prop_assert!((filled.v_sigma[i] - direct).abs() <= 1e-12 * direct.abs().max(1.0));
        }
    }

    #[test]
    fn larger_bound_never_delays_entry(seed in any::<u64>(), d1 in 0.0f64..5.0, dd in 0.0f64..5.0) {
        let mut rng = common::rng(seed);
        let family = common::random_family(TimeDomain::Discrete, 2, 1, 2, None, &mut rng);
        let certs = CertificateSet::build_default(&family).unwrap();
        let lambda = certs.aggregate_rate();
        let config = AnalysisConfig::new(1.0, 0.5 * (1.0 + lambda), 1.0);
        let constants = closed_form_bounds(&certs, 1.0).unwrap();
        let budget = SwitchingBudget::new(1.0, 4.0).unwrap();
        let sig = generate_signal(TimeDomain::Discrete, budget, 60.0, &[0, 1], seed, Strategy::RandomAdmissible);
        let dist = DisturbanceSpec::uniform(1, 0.3, seed).unwrap();
        let x0 = common::random_vector(2, 40.0, &mut rng);
        let trace = simulate_discrete(&family, &sig, &dist, &x0, 60).unwrap();
        let small = dwell_report(&certs, constants, config, d1).unwrap();
        let large = dwell_report(&certs, constants, config, d1 + dd).unwrap();
        let e_small = entry_time(&trace, &certs, small.omega_bar).unwrap().entry_time;
        let e_large = entry_time(&trace, &certs, large.omega_bar).unwrap().entry_time;
        if let Some(ts) = e_small {
            prop_assert!(e_large.is_some_and(|tl| tl <= ts));
        }
    }

    #[test]
    fn trace_csv_round_trip_is_exact(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let family = common::random_family(TimeDomain::Discrete, 3, 2, 2, None, &mut rng);
        let certs = CertificateSet::build_default(&family).unwrap();
        let sig = generate_signal(TimeDomain::Discrete, SwitchingBudget::new(2.0, 2.0).unwrap(), 25.0, &[0, 1], seed, Strategy::GreedyEarliest);
        let dist = DisturbanceSpec::uniform(2, 3.0, seed).unwrap();
        let x0 = common::random_vector(3, 1e3, &mut rng);
        let trace = lyapunov_trace(&simulate_discrete(&family, &sig, &dist, &x0, 25).unwrap(), &certs).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        write_trace_csv(&trace, 3, 2, &path).unwrap();
        let back = read_trace_csv(&path, TimeDomain::Discrete).unwrap();
        prop_assert_eq!(back, trace);
    }

    #[test]
    fn single_cell_sweep_matches_report(seed in any::<u64>(), kappa in 0.2f64..20.0, u in 0.05f64..0.95, dnorm in 0.0f64..5.0) {
        let mut rng = common::rng(seed);
        let family = common::random_family(TimeDomain::Discrete, 2, 1, 2, None, &mut rng);
        let certs = CertificateSet::build_default(&family).unwrap();
        let lambda = certs.aggregate_rate();
        let delta = lambda + u * (1.0 - lambda);
        let rows = design_sweep(&certs, &[kappa], &[delta], 2.0, dnorm).unwrap();
        let direct = dwell_report(&certs, closed_form_bounds(&certs, kappa).unwrap(), AnalysisConfig::new(kappa, delta, 2.0), dnorm).unwrap();
        prop_assert_eq!(rows.len(), 1);
        prop_assert_eq!(rows[0].report(), Some(&direct));
    }
}
