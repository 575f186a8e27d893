use nlp_core::field::{sym_index, Cutoff};
use nlp_core::kernel::{corrected_decay_fit, cz_all, cz_eval, heat_kernel, oseen_decay_fit, truncated, OseenTable};
use proptest::prelude::*;

fn point() -> impl Strategy<Value = [f64; 3]> {
    (-5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0).prop_filter("away from origin", |p| p.0 * p.0 + p.1 * p.1 + p.2 * p.2 > 1e-4)
        .prop_map(|p| [p.0, p.1, p.2])
}

fn scale_of(k: &[f64; 6]) -> f64 {
    k.iter().fold(0.0, |m: f64, v| m.max(v.abs()))
}

proptest! {
    #[test]
    fn trace_vanishes(y in point()) {
        let k = cz_all(y);
        let tr = k[sym_index(0, 0)] + k[sym_index(1, 1)] + k[sym_index(2, 2)];
        prop_assert!(tr.abs() <= 1e-12 * scale_of(&k));
    }

    #[test]
    fn homogeneous_of_degree_minus_three(y in point(), l in -1.0f64..1.0) {
        let lambda = 10f64.powf(l);
        let a = cz_all(y);
        let b = cz_all([lambda * y[0], lambda * y[1], lambda * y[2]]);
        for c in 0..6 {
            prop_assert!((b[c] * lambda.powi(3) - a[c]).abs() <= 1e-12 * scale_of(&a));
        }
    }

    #[test]
    fn even_and_symmetric(y in point()) {
        let a = cz_all(y);
        let b = cz_all([-y[0], -y[1], -y[2]]);
        for c in 0..6 {
            prop_assert_eq!(a[c], b[c]);
        }
        for i in 0..3 {
            for j in 0..3 {
                let (a, b) = (cz_eval(i, j, y).unwrap(), cz_eval(j, i, y).unwrap());
                prop_assert!((a - b).abs() <= 1e-15 * a.abs().max(b.abs()));
            }
        }
    }

    #[test]
    fn truncation_regions_are_exact(y in point(), r in 0.2f64..2.0) {
        let cut = Cutoff::new(r);
        let n = (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt();
        let v = truncated(0, 1, y, &cut).unwrap();
        if n <= 2.0 * r {
            prop_assert_eq!(v, 0.0);
        }
        if n >= 4.0 * r {
            prop_assert_eq!(v, cz_eval(0, 1, y).unwrap());
        }
    }
}

/// Closed form `K_ij(y) = (3y_iy_j − δ_ij|y|²)/(4π|y|⁵)` at a hand-picked point.
#[test]
fn matches_closed_form() {
    let y = [1.0, 2.0, -2.0];
    let den = 4.0 * std::f64::consts::PI * 3f64.powi(5);
    assert!((cz_eval(0, 0, y).unwrap() - (3.0 - 9.0) / den).abs() < 1e-15);
    assert!((cz_eval(1, 2, y).unwrap() - (-12.0) / den).abs() < 1e-15);
    assert!(cz_eval(0, 0, [0.0; 3]).is_err());
    assert!(cz_eval(3, 0, y).is_err());
}

#[test]
fn heat_kernel_closed_form_and_mass() {
    let t: f64 = 0.3;
    let x = [0.2, -0.4, 0.1];
    let r2: f64 = x.iter().map(|v| v * v).sum();
    let want = (4.0 * std::f64::consts::PI * t).powf(-1.5) * (-r2 / (4.0 * t)).exp();
    assert!((heat_kernel(x, t).unwrap() - want).abs() < 1e-15);
    assert!(heat_kernel(x, 0.0).is_err());
}

#[test]
fn corrected_decay_constant_is_stable() {
    let a = corrected_decay_fit(1.0, 10_000, 7).constant;
    let b = corrected_decay_fit(1.0, 20_000, 7).constant;
    assert!(a.is_finite() && a > 0.0);
    assert!((a - b).abs() / b < 0.1, "{a} {b}");
    // the bound is scale invariant in R
    let c = corrected_decay_fit(0.5, 10_000, 7).constant;
    assert!((a - c).abs() / a < 0.1, "{a} {c}");
}

#[test]
fn oseen_constant_covers_two_decades() {
    let spec = OseenTable::scaled(0.01, 48).unwrap().field.spec.clone();
    let fit = oseen_decay_fit(&spec, &[0.01, 0.1, 1.0]).unwrap();
    assert!(fit.constant.is_finite() && fit.constant > 0.0);
    let (lo, hi) = fit.per_time.iter().fold((f64::INFINITY, 0.0f64), |(a, b), p| (a.min(p.1), b.max(p.1)));
    assert!(hi / lo < 1.5, "{:?}", fit.per_time);
}
