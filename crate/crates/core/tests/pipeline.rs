mod common;

use rand::Rng;
use switchbound::analysis::{analyze_trace, check_envelope, first_fallback, TransientEnvelope};
use switchbound::dwell_time::{design_sweep, dwell_report};
use switchbound::io::{load_family_file, parse_family, read_trace_csv, write_sweep_csv, write_trace_csv};
use switchbound::reproduce::{example1, example2, EXAMPLE1_REFERENCE};
use switchbound::simulate::{lyapunov_trace, simulate_continuous, simulate_discrete};
use switchbound::switching::{generate_signal, Strategy};
use switchbound::{
    closed_form_bounds, fixtures, AnalysisConfig, CertificateSet, DisturbanceSpec, SimulationTrace, SwitchingBudget,
    SwitchingSignal, TimeDomain,
};

#[test]
fn bundled_fixtures_have_expected_shapes() {
    let f1 = fixtures::example1();
    assert_eq!((f1.domain, f1.len(), f1.n, f1.m), (TimeDomain::Discrete, 3, 4, 1));
    let f2 = fixtures::example2();
    assert_eq!((f2.domain, f2.len(), f2.n, f2.m), (TimeDomain::Continuous, 2, 2, 1));
    for family in [&f1, &f2] {
        let eq = family.equilibria().unwrap();
        assert_eq!(eq.len(), family.len());
    }
}

#[test]
fn marginal_subsystem_is_rejected_by_index() {
    let text = r#"{
        "domain": "discrete", "n": 2, "m": 1,
        "subsystems": [
            {"A": [0.5, 0.0, 0.0, 0.5], "B": [1.0, 0.0], "C": [0.0, 0.0]},
            {"A": [1.0, 0.0, 0.0, 1.0], "B": [1.0, 0.0], "C": [0.0, 0.0]}
        ]
    }"#;
    let err = parse_family(text, "inline").unwrap_err().to_string();
    assert!(err.contains("subsystem 2"), "{err}");

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, text).unwrap();
    assert!(load_family_file(&path).is_err());
    assert!(load_family_file(dir.path().join("missing.json")).is_err());
}

#[test]
fn unknown_fields_and_bad_shapes_are_rejected() {
    let extra = r#"{"domain":"discrete","n":1,"m":1,"extra":0,
        "subsystems":[{"A":[0.5],"B":[1.0],"C":[0.0]}]}"#;
    assert!(parse_family(extra, "inline").is_err());
    let short = r#"{"domain":"discrete","n":2,"m":1,
        "subsystems":[{"A":[0.5,0.0,0.0],"B":[1.0,0.0],"C":[0.0,0.0]}]}"#;
    let err = parse_family(short, "inline").unwrap_err().to_string();
    assert!(err.contains("subsystems[0].A"), "{err}");
}

#[test]
fn empty_trace_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.csv");
    write_trace_csv(&SimulationTrace::empty(TimeDomain::Discrete), 2, 1, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.trim_end(), "time,p,x1,x2,d1,V_sigma");
    assert!(read_trace_csv(&path, TimeDomain::Discrete).unwrap().is_empty());
}

#[test]
fn sweep_csv_has_one_row_per_cell() {
    let certs = CertificateSet::build_default(&fixtures::example1()).unwrap();
    let rows = design_sweep(&certs, &[1.0, 10.0], &[0.5, 0.84, 0.95], 2.0, 10.0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.csv");
    write_sweep_csv(&rows, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "kappa,delta,mu,omega,Na_bar,c,omega_bar");
    assert_eq!(lines.len(), 7);
    // delta = 0.5 is below the aggregate rate 0.68, so those cells are skipped.
    assert!(lines[1].ends_with(",,,"));
    assert!(!lines[2].ends_with(','));
}

#[test]
fn sweep_monotone_on_example1() {
    let certs = CertificateSet::build_default(&fixtures::example1()).unwrap();
    let kappas = [1.0, 5.0, 10.0, 20.0];
    let deltas = [0.7, 0.8, 0.84, 0.9, 0.95];
    let rows = design_sweep(&certs, &kappas, &deltas, 2.0, 10.0).unwrap();
    for (i, _) in kappas.iter().enumerate() {
        let line = &rows[i * deltas.len()..(i + 1) * deltas.len()];
        for w in line.windows(2) {
            let (a, b) = (w[0].report().unwrap(), w[1].report().unwrap());
            assert!(b.n_a_bar < a.n_a_bar);
            assert!(b.gain_coeff > a.gain_coeff);
        }
    }
    for j in 0..deltas.len() {
        for i in 1..kappas.len() {
            assert!(rows[i * deltas.len() + j].mu <= rows[(i - 1) * deltas.len() + j].mu);
        }
    }
}

#[test]
fn equilibrium_initial_state_stays_put() {
    for family in [fixtures::example1(), fixtures::example2()] {
        for eq in family.equilibria().unwrap() {
            let sig = SwitchingSignal::constant(family.domain, eq.index);
            let dist = DisturbanceSpec::zero(family.m);
            let trace = match family.domain {
                TimeDomain::Discrete => simulate_discrete(&family, &sig, &dist, &eq.point, 50).unwrap(),
                TimeDomain::Continuous => simulate_continuous(&family, &sig, &dist, &eq.point, 2.0, 1e-2).unwrap(),
            };
            for x in &trace.states {
                let drift = x.iter().zip(&eq.point).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                assert!(drift < 1e-10, "subsystem {} drift {drift}", eq.index);
            }
        }
    }
}

#[test]
fn example1_switches_respect_mu_outside_interior() {
    for seed in [0, 1, 7, 42] {
        let run = example1(seed).unwrap();
        let kappa = run.report.constants.kappa;
        let mu = run.report.constants.mu;
        for (n, sw) in run.signal.switches.iter().enumerate() {
            let x = &run.trace.states[run.trace.position_of(sw.t).unwrap()];
            let from = &run.certs.certs[run.signal.index_before(n)];
            let to = &run.certs.certs[sw.p];
            let v_from = from.value(x);
            if v_from >= kappa {
                assert!(to.value(x) <= mu * v_from * (1.0 + 1e-9), "seed {seed} switch {n}");
            }
        }
    }
}

#[test]
fn example1_envelope_holds_until_first_fallback() {
    for seed in 0..10 {
        let run = example1(seed).unwrap();
        let r = &run.report.robustness;
        let env = TransientEnvelope::from_report(&run.certs, r);
        let until = first_fallback(&run.trace, &run.certs, &run.signal, r.config.kappa)
            .unwrap()
            .map_or(*run.trace.times.last().unwrap(), |f| f.time);
        let check = check_envelope(&run.trace, &run.certs, &env, r.d_norm, until).unwrap();
        assert!(check.ok, "seed {seed}: {check:?}");
    }
}

#[test]
fn example1_enters_and_stays_trapped() {
    for seed in 0..10 {
        let run = example1(seed).unwrap();
        let a = &run.report.analysis;
        assert!(run.report.validation.valid);
        assert!(a.decay.ok, "seed {seed}");
        assert!(a.entry.entry_time.is_some() && a.entry.trapped_after_entry);
        assert!(!a.entry.escaped);
    }
    let run = example1(3).unwrap();
    assert!((run.report.robustness.lambda - EXAMPLE1_REFERENCE.lambda).abs() < 5e-3);
}

#[test]
fn example2_decays_inside_bound_and_escapes_union() {
    let run = example2().unwrap();
    let r = &run.report;
    assert!(r.initial_min_v <= r.robustness.c);
    assert!(r.max_min_v > r.robustness.c);
    assert!(r.escape_time.is_some());
    assert!(r.verdict.escaped);
    let sig = SwitchingSignal::constant(TimeDomain::Continuous, 1);
    let analysis = analyze_trace(&run.trace, &run.certs, &sig, &r.robustness).unwrap();
    assert!(analysis.decay.ok);
    assert!(analysis.decay.first_fallback.is_none());
}

/// Random families, admissible signals at the computed floor, and bounded
/// noise: every run must reach `M(ω̄)` and stay there.
#[test]
fn randomized_battery_enters_trap_set() {
    let mut rng = common::rng(2024);
    for case in 0..50 {
        let domain = if case % 5 == 4 {
            TimeDomain::Continuous
        } else {
            TimeDomain::Discrete
        };
        let n = rng.random_range(2..=4);
        let count = rng.random_range(2..=3);
        let family = common::random_family(domain, n, 1, count, None, &mut rng);
        let certs = CertificateSet::build_default(&family).unwrap();
        let lambda = certs.aggregate_rate();
        let delta = match domain {
            TimeDomain::Discrete => 0.5 * (1.0 + lambda),
            TimeDomain::Continuous => 0.5 * lambda,
        };
        let config = AnalysisConfig::new(5.0, delta, 1.0);
        let constants = closed_form_bounds(&certs, config.kappa).unwrap();
        let d_bound = 0.5;
        let dist = DisturbanceSpec::uniform(1, d_bound, case).unwrap();
        let report = dwell_report(&certs, constants, config, dist.sup_norm()).unwrap();
        let budget = SwitchingBudget::new(config.n0, report.n_a_bar * (1.0 + 1e-9)).unwrap();
        let horizon = (10.0 * report.n_a_bar * count as f64).ceil().max(10.0);
        let indices: Vec<usize> = (0..count).collect();
        let sig = generate_signal(domain, budget, horizon, &indices, case, Strategy::RandomAdmissible);
        let x0 = common::random_vector(n, 10.0, &mut rng);
        let trace = match domain {
            TimeDomain::Discrete => simulate_discrete(&family, &sig, &dist, &x0, horizon as u64).unwrap(),
            TimeDomain::Continuous => simulate_continuous(&family, &sig, &dist, &x0, horizon, 1e-2).unwrap(),
        };
        let trace = lyapunov_trace(&trace, &certs).unwrap();
        let analysis = analyze_trace(&trace, &certs, &sig, &report).unwrap();
        assert!(analysis.decay.ok, "case {case}: {:?}", analysis.decay);
        assert!(
            analysis.entry.entry_time.is_some() && analysis.entry.trapped_after_entry,
            "case {case}: {:?}",
            analysis.entry
        );
    }
}
