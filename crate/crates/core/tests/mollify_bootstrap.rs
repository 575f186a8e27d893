use nlp_core::analytic::make_gaussian_curl;
use nlp_core::field::{GridField, GridSpec, Rank, TimeAxis};
use nlp_core::mollify::{mollify, mollify_spatial, MollifierSpec};
use nlp_core::picard::{initial_trace, picard_solve, stop_radius, PicardOptions};
use nlp_core::semigroup::{HeatInput, SemigroupPlan};
use nlp_core::Error;
use proptest::prelude::*;

proptest! {
    #[test]
    fn weights_have_unit_mass_and_look_back(eps in 0.2f64..1.0, cells in 2.0f64..6.0, lag in 2.0f64..8.0) {
        let m = MollifierSpec::new(eps).unwrap();
        let h = eps / cells;
        let s = m.spatial_weights(h);
        prop_assert!((s.iter().map(|p| p.1).sum::<f64>() - 1.0).abs() < 1e-13);
        prop_assert!(s.iter().all(|p| p.1 > 0.0));
        let first: [f64; 3] = [0, 1, 2].map(|a| s.iter().map(|p| p.0[a] as f64 * p.1).sum::<f64>());
        prop_assert!(first.iter().all(|v| v.abs() < 1e-13));
        let t = m.temporal_weights(eps / lag);
        prop_assert!((t.iter().sum::<f64>() - 1.0).abs() < 1e-13);
        prop_assert!(t.iter().all(|&v| v >= 0.0));
        prop_assert!((t.len() - 1) as f64 * eps / lag <= eps + 1e-9);
    }
}

/// The one-sided lag means `F^ε(t)` only sees `F` at times `≤ t`.
#[test]
fn mollified_field_does_not_see_the_future() {
    let spec = GridSpec::cube(2.0, 17).unwrap().with_time(TimeAxis::uniform(1.0, 20).unwrap());
    let step = GridField::from_fn(spec.clone(), Rank::Scalar, |_, t, o| o[0] = if t > 0.6 { 1.0 } else { 0.0 });
    let g = mollify(&step, 0.5).unwrap().field;
    for n in 0..=12 {
        assert_eq!(g.slice(n, 0).iter().fold(0.0f64, |a, v| a.max(v.abs())), 0.0, "slice {n}");
    }
    assert!(g.max_abs() > 0.5);
}

/// Smooth fields: `‖F^ε − F‖` shrinks like `ε²` (the bump is even).
#[test]
fn spatial_mollification_converges() {
    let spec = GridSpec::cube(4.0, 64).unwrap();
    let f = GridField::from_fn(spec.clone(), Rank::Scalar, |x, _, o| {
        o[0] = (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / 0.8).exp()
    });
    let errs: Vec<f64> = [0.8, 0.4]
        .iter()
        .map(|&eps| {
            let g = mollify_spatial(&f, eps).unwrap();
            g.data.iter().zip(&f.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        })
        .collect();
    assert!(errs[0] / errs[1] > 3.0, "{errs:?}");
}

#[test]
fn under_resolved_width_is_rejected() {
    let spec = GridSpec::cube(2.0, 17).unwrap();
    let f = GridField::zeros(spec, Rank::Scalar);
    assert!(matches!(mollify_spatial(&f, 0.3), Err(Error::MollifierUnderResolved { .. })));
    assert!(MollifierSpec::new(0.0).is_err());
}

fn solve(amplitude: f64) -> nlp_core::picard::PicardState {
    let spec = GridSpec::cube(4.0, 24).unwrap();
    let u0 = make_gaussian_curl(amplitude, 0.8, [0.0; 3]).unwrap();
    let plan = SemigroupPlan::new(&spec, 2.0, 16).unwrap();
    let opts = PicardOptions { t_final: 0.25, n_steps: 8, max_iter: 30, tol: 1e-10 };
    picard_solve(HeatInput::Analytic(&u0), &plan, &opts).unwrap()
}

#[test]
fn picard_contracts_and_contraction_grows_with_data() {
    let small = solve(0.05);
    let large = solve(0.1);
    assert!(small.contraction() <= 0.5, "{:?}", small.history);
    assert!(large.contraction() > small.contraction(), "{} {}", small.contraction(), large.contraction());
    assert!(large.iterations >= small.iterations);
    assert!(*small.history.last().unwrap() <= 1e-10);
}

#[test]
fn solution_returns_to_its_initial_data() {
    let s = solve(0.05);
    let trace = initial_trace(&s.velocity, [0.0; 3], stop_radius(&s.velocity.spec)).unwrap();
    assert_eq!(trace[0].1, 0.0);
    for w in trace.windows(2) {
        assert!(w[0].1 < w[1].1, "{trace:?}");
    }
    // heat-dominated: the gap grows roughly linearly in t
    let (t1, d1) = trace[1];
    let (t2, d2) = trace[2];
    let slope = (d2 / d1).ln() / (t2 / t1).ln();
    assert!(slope > 0.7 && slope < 1.3, "{slope}");
}
