use nlp_core::analytic::{make_gaussian_curl, make_parasitic, TimeProfile};
use nlp_core::config::ScenarioConfig;
use nlp_core::field::{GridField, GridSpec, Rank, TestFunction, TimeAxis, VectorTestFunction};
use nlp_core::harness::{local_energy_check, mild_residual, nse_residual, PressureProvider, Region, Velocity};
use nlp_core::pressure::LpeOptions;
use nlp_core::report::to_csv;
use nlp_core::semigroup::{HeatInput, SemigroupPlan};
use nlp_core::suites::run_equivalence_suite;
use nlp_core::Error;

fn probe() -> VectorTestFunction {
    VectorTestFunction::directional([1.0, 0.0, 0.0], TestFunction::bump([0.2, 0.0, -0.1], 1.0).with_window(0.05, 0.2))
}

/// The parasitic pair solves the equations with its own pressure but not with the
/// expansion pressure, which sees a constant flux and so no gradient.
#[test]
fn parasitic_pair_separates_the_pressures() {
    let spec = GridSpec::cube(4.0, 16).unwrap();
    let pair = make_parasitic(TimeProfile::linear([1.0, 0.0, 0.0]), -1.0).unwrap();
    let z = probe();
    let exact = nse_residual(Velocity::Analytic(&pair.velocity), &spec, PressureProvider::Parasitic(&pair), &z).unwrap();
    assert!(exact.residual.abs() <= exact.quad_tol(), "{exact:?}");
    let wide = GridSpec::cube(8.0, 16).unwrap();
    let dlpe = PressureProvider::Dlpe { opts: LpeOptions::default(), radius_factor: 1.0 };
    let other = nse_residual(Velocity::Analytic(&pair.velocity), &wide, dlpe, &z).unwrap();
    // small but not zero: the box truncates the constant flux
    assert!(other.pressure.abs() <= 0.05 * exact.pressure.abs(), "{other:?}");
    assert!((other.residual - exact.residual).abs() > 0.5 * exact.pressure.abs());
    // flipping the sign flips which pressure closes the equation
    let flipped = make_parasitic(TimeProfile::linear([1.0, 0.0, 0.0]), 1.0).unwrap();
    let f = nse_residual(Velocity::Analytic(&flipped.velocity), &spec, PressureProvider::Parasitic(&flipped), &z).unwrap();
    assert!(f.residual.abs() > 0.5 * f.scale());
}

/// `u = t e₁` with zero data misses the mild equation by exactly `t|K|`.
#[test]
fn parasitic_mild_residual_is_t_times_volume() {
    let spec = GridSpec::cube(4.0, 16).unwrap();
    let pair = make_parasitic(TimeProfile::linear([1.0, 0.0, 0.0]), -1.0).unwrap();
    let axis = TimeAxis::uniform(0.25, 8).unwrap();
    let u = GridField::from_fn(spec.clone().with_time(axis), Rank::Vector, |x, t, o| o.copy_from_slice(&pair.velocity.value(x, t)));
    let zero = GridField::zeros(spec.clone(), Rank::Vector);
    let k = Region { center: [0.0; 3], radius: 1.0 };
    let plan = SemigroupPlan::new(&spec, 2.0, 16).unwrap();
    let res = mild_residual(HeatInput::Grid(&zero), &u, &[0.2], k, &plan).unwrap()[0].1;
    assert!((res - 0.2 * k.volume()).abs() <= 0.05 * 0.2 * k.volume(), "{res}");
}

#[test]
fn zero_velocity_has_zero_residuals() {
    let spec = GridSpec::cube(4.0, 16).unwrap();
    let axis = TimeAxis::uniform(0.25, 4).unwrap();
    let u = GridField::zeros(spec.clone().with_time(axis), Rank::Vector);
    let dlpe = PressureProvider::Dlpe { opts: LpeOptions::default(), radius_factor: 1.0 };
    let r = nse_residual(Velocity::Grid(&u), &spec, dlpe, &probe()).unwrap();
    assert_eq!(r.residual, 0.0);
    let plan = SemigroupPlan::new(&spec, 2.0, 8).unwrap();
    let k = Region { center: [0.0; 3], radius: 1.0 };
    let m = mild_residual(HeatInput::Grid(&u.time_slice(0)), &u, &[0.1, 0.25], k, &plan).unwrap();
    assert!(m.iter().all(|p| p.1 == 0.0));
    let phi = TestFunction::bump([0.0; 3], 1.0).with_window(0.02, 0.2);
    let e = local_energy_check(&u, &phi, &LpeOptions::default()).unwrap();
    assert_eq!((e.lhs, e.rhs), (0.0, 0.0));
}

#[test]
fn energy_check_needs_a_nonnegative_bump() {
    let spec = GridSpec::cube(4.0, 16).unwrap();
    let axis = TimeAxis::uniform(0.25, 4).unwrap();
    let u0 = make_gaussian_curl(0.05, 0.8, [0.0; 3]).unwrap();
    let u = GridField::from_fn(spec.clone().with_time(axis), Rank::Vector, |x, t, o| o.copy_from_slice(&u0.value(x, t)));
    let signed = TestFunction::mean_zero([0.0; 3], 1.0).with_window(0.02, 0.2);
    assert!(matches!(local_energy_check(&u, &signed, &LpeOptions::default()), Err(Error::NegativeTestFunction)));
    let flipped = TestFunction::bump([0.0; 3], 1.0).with_window(0.02, 0.2).with_amplitude(-1.0);
    assert!(local_energy_check(&u, &flipped, &LpeOptions::default()).is_err());
}

#[test]
fn suite_reruns_are_identical() {
    let mut cfg = ScenarioConfig::default_scenario();
    cfg.grid.n = 16;
    let a = run_equivalence_suite(&cfg).unwrap();
    let b = run_equivalence_suite(&cfg).unwrap();
    assert_eq!(to_csv(&a.reports), to_csv(&b.reports));
    assert_eq!(a.velocity.data, b.velocity.data);
    let names: Vec<&str> = a.reports.iter().map(|r| r.name.as_str()).collect();
    for n in ["equivalence.a_mild", "equivalence.b_nse_dlpe", "equivalence.c_parasitic_mild", "energy.local_balance"] {
        assert!(names.contains(&n), "{names:?}");
    }
    let c = a.reports.iter().find(|r| r.name == "equivalence.c_parasitic_mild").unwrap();
    assert!(c.acceptable() && !c.passed());
}
