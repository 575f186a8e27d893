use nlp_core::field::io::{read_field, read_header, write_field};
use nlp_core::field::uloc::ball_integral_at;
use nlp_core::field::{pair, uloc_norm, GridField, GridSpec, Rank, Selector, TestFunction, TimeAxis};
use proptest::prelude::*;

fn smooth(spec: &GridSpec, a: f64, b: f64) -> GridField {
    GridField::from_fn(spec.clone(), Rank::Scalar, |x, _, o| {
        o[0] = (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp() * (1.0 + a * x[0] + b * x[1] * x[2])
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn uloc_dominates_every_admissible_ball(seed in 0u64..1000, q in prop::sample::select(vec![1.0, 2.0, 3.0]), rf in 0.0f64..1.0) {
        let spec = GridSpec::cube(2.0, 12).unwrap();
        let h = spec.spacing;
        let r = 2.0 * h + rf * (1.0 - 2.0 * h).max(0.0);
        let f = GridField::from_fn(spec.clone(), Rank::Scalar, |x, _, o| {
            let s = seed as f64;
            o[0] = (s * 0.37 + 3.1 * x[0]).sin() * (s * 0.11 + 1.7 * x[1]).cos() + 0.2 * x[2]
        });
        let sup = uloc_norm(&f, q, r).unwrap();
        for c in 0..spec.len() {
            if spec.contains_ball(spec.point(c), r + h) {
                let local = ball_integral_at(&f, 0, c, r, q).powf(1.0 / q);
                prop_assert!(sup >= local * (1.0 - 1e-12), "center {c}: {local} > {sup}");
            }
        }
    }

    #[test]
    fn pairing_is_bilinear(a in -3.0f64..3.0, b in -3.0f64..3.0, s in 0.5f64..1.2) {
        let spec = GridSpec::cube(2.0, 20).unwrap();
        let f = smooth(&spec, 0.3, -0.2);
        let g = smooth(&spec, -0.5, 0.7);
        let psi = TestFunction::bump([0.1, -0.1, 0.0], s);
        let phi = TestFunction::mean_zero([0.0, 0.2, -0.1], 0.8);
        let mut comb = f.scaled(a);
        comb.axpy(b, &g).unwrap();
        let lhs = pair(&comb, &psi, Selector::Value).unwrap();
        let rhs = a * pair(&f, &psi, Selector::Value).unwrap() + b * pair(&g, &psi, Selector::Value).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-13 * (1.0 + lhs.abs()));
        let sum = pair(&f, &psi.with_amplitude(a), Selector::Laplacian).unwrap()
            + pair(&f, &phi.with_amplitude(b), Selector::Laplacian).unwrap();
        let each = a * pair(&f, &psi, Selector::Laplacian).unwrap() + b * pair(&f, &phi, Selector::Laplacian).unwrap();
        prop_assert!((sum - each).abs() <= 1e-12 * (1.0 + sum.abs()));
    }

    #[test]
    fn field_files_round_trip(n in 3usize..7, nt in 1usize..4, rank in prop::sample::select(vec![Rank::Scalar, Rank::Vector, Rank::SymTensor])) {
        let mut spec = GridSpec::new([-1.0, 0.5, 2.0], 0.25, [n, n + 1, n + 2]).unwrap();
        if nt > 1 {
            spec = spec.with_time(TimeAxis::uniform(0.5, nt - 1).unwrap());
        }
        let f = GridField::from_fn(spec, rank, |x, t, o| {
            for (c, v) in o.iter_mut().enumerate() {
                *v = x[0] - 2.0 * x[1] + x[2] * c as f64 + t;
            }
        });
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.nlpf");
        write_field(&path, &f).unwrap();
        let g = read_field(&path).unwrap();
        prop_assert_eq!(&g.data, &f.data);
        prop_assert_eq!(g.rank, f.rank);
        let bytes = std::fs::read(&path).unwrap();
        let nl = bytes.iter().position(|&b| b == b'\n').unwrap();
        prop_assert_eq!(bytes.len() - nl - 1, 8 * f.data.len());
        prop_assert_eq!(read_header(&path).unwrap().sample_count(), f.data.len());
    }
}

/// `pair(f, ψ, ∂_i) + pair(∂^h_i f, ψ, id)` vanishes at second order.
#[test]
fn integration_by_parts_is_second_order() {
    let psi = TestFunction::bump([0.1, -0.05, 0.0], 1.2);
    let mut errs = Vec::new();
    for n in [24usize, 48] {
        let spec = GridSpec::cube(2.0, n).unwrap();
        let f = smooth(&spec, 0.4, 0.3);
        let df = f.partial(0);
        let e = pair(&f, &psi, Selector::Partial(0)).unwrap() + pair(&df, &psi, Selector::Value).unwrap();
        errs.push(e.abs());
    }
    let rate = (errs[0] / errs[1]).log2() / (47.0f64 / 23.0).log2();
    assert!(rate > 1.8, "errors {errs:?} rate {rate}");
}

#[test]
fn truncated_payload_is_rejected() {
    let spec = GridSpec::cube(1.0, 4).unwrap();
    let f = GridField::zeros(spec, Rank::Vector);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.nlpf");
    write_field(&path, &f).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 8]).unwrap();
    assert!(read_field(&path).is_err());
}

#[test]
fn test_function_outside_grid_is_rejected() {
    let spec = GridSpec::cube(1.0, 10).unwrap();
    let f = GridField::zeros(spec, Rank::Scalar);
    assert!(pair(&f, &TestFunction::bump([0.8, 0.0, 0.0], 0.5), Selector::Value).is_err());
}
