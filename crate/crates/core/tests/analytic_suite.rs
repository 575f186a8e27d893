use nlp_core::analytic::{make_gaussian_curl, make_gaussian_curl_axis, make_oscillatory, make_parasitic, TimeProfile};
use nlp_core::field::GridSpec;
use nlp_core::semigroup::{heat_apply, HeatInput};
use nlp_core::Error;
use proptest::prelude::*;

fn coord() -> impl Strategy<Value = [f64; 3]> {
    (-2.0f64..2.0, -2.0f64..2.0, -2.0f64..2.0).prop_map(|p| [p.0, p.1, p.2])
}

fn shifted(x: [f64; 3], a: usize, s: f64) -> [f64; 3] {
    let mut y = x;
    y[a] += s;
    y
}

proptest! {
    #[test]
    fn gaussian_curl_derivatives_match_differences(x in coord(), w in 0.5f64..1.5, ax in coord()) {
        prop_assume!(ax.iter().map(|v| v * v).sum::<f64>() > 0.1);
        let u = make_gaussian_curl_axis(1.3, w, [0.1, -0.2, 0.3], ax).unwrap();
        let d = u.derivs(x, 0.0);
        let h = 1e-4;
        for a in 0..3 {
            let (p, m) = (u.value(shifted(x, a, h), 0.0), u.value(shifted(x, a, -h), 0.0));
            for j in 0..3 {
                let fd = (p[j] - m[j]) / (2.0 * h);
                prop_assert!((fd - d.jac[a][j]).abs() < 1e-6, "jac[{a}][{j}] {fd} vs {}", d.jac[a][j]);
            }
        }
        let h = 1e-3;
        let c = u.value(x, 0.0);
        for j in 0..3 {
            let lap: f64 = (0..3)
                .map(|a| (u.value(shifted(x, a, h), 0.0)[j] - 2.0 * c[j] + u.value(shifted(x, a, -h), 0.0)[j]) / (h * h))
                .sum();
            prop_assert!((lap - d.lap[j]).abs() < 1e-4 * (1.0 + d.lap[j].abs()), "lap {lap} vs {}", d.lap[j]);
        }
        prop_assert!(d.divergence().abs() < 1e-12);
    }

    #[test]
    fn oscillatory_field_is_divergence_free_and_bounded(x in coord(), k in 0.5f64..3.0) {
        let u = make_oscillatory(0.7, k);
        let d = u.derivs(x, 0.0);
        prop_assert!(d.divergence().abs() < 1e-14);
        prop_assert!(u.value(x, 0.0).iter().all(|v| v.abs() <= 0.7));
    }
}

#[test]
fn gaussian_curl_has_zero_mean() {
    let spec = GridSpec::cube(5.0, 48).unwrap();
    let u = make_gaussian_curl(1.0, 0.8, [0.2, 0.1, -0.3]).unwrap().sample(&spec);
    let h3 = spec.cell_volume();
    for c in 0..3 {
        let s: f64 = u.slice(0, c).iter().sum::<f64>() * h3;
        assert!(s.abs() < 1e-10, "component {c}: {s}");
    }
}

/// `e^{tΔ}` of the Gaussian-curl field stays in closed form; compare with the grid heat flow.
#[test]
fn heat_evolution_matches_grid_flow() {
    let u = make_gaussian_curl(1.0, 0.8, [0.0; 3]).unwrap();
    let spec = GridSpec::cube(5.0, 48).unwrap();
    let t = 0.2;
    let grid = heat_apply(HeatInput::Grid(&u.sample(&spec)), t, &spec, 2.0).unwrap();
    let exact = u.heat_evolved(t).unwrap().sample(&spec);
    let mut d = grid.clone();
    d.axpy(-1.0, &exact).unwrap();
    assert!(d.max_abs() < 1e-6 * exact.max_abs(), "{}", d.max_abs());
}

#[test]
fn parasitic_sign_convention() {
    let g = TimeProfile::linear([1.0, 0.0, 0.0]);
    let minus = make_parasitic(g.clone(), -1.0).unwrap();
    assert_eq!(minus.strong_residual(0.3), [0.0; 3]);
    // the other sign leaves 2g′
    let plus = make_parasitic(g, 1.0).unwrap();
    assert_eq!(plus.strong_residual(0.3), [2.0, 0.0, 0.0]);
    assert_eq!(minus.pressure([2.0, 5.0, -1.0], 0.7), -2.0);
    assert_eq!(minus.velocity.value([9.0, 9.0, 9.0], 0.25), [0.25, 0.0, 0.0]);
}

#[test]
fn parasitic_must_start_at_rest() {
    let g = TimeProfile { direction: [0.0, 1.0, 0.0], coeffs: vec![1.0, 1.0] };
    assert!(matches!(make_parasitic(g, -1.0), Err(Error::ParasiticNonzeroStart)));
    assert!(make_parasitic(TimeProfile::linear([1.0, 0.0, 0.0]), 0.5).is_err());
}

#[test]
fn invalid_width_is_rejected() {
    assert!(make_gaussian_curl(1.0, 0.0, [0.0; 3]).is_err());
    assert!(make_gaussian_curl(f64::NAN, 1.0, [0.0; 3]).is_err());
}
