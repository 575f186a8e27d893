use nlp_core::field::{GridField, GridSpec, Rank, TimeAxis};
use nlp_core::semigroup::{duhamel, gaussian_tensor_source, heat_apply, oseen_apply, HeatInput, SemigroupPlan};

fn gaussian(spec: &GridSpec, w: f64) -> GridField {
    GridField::from_fn(spec.clone(), Rank::Scalar, |x, _, o| {
        o[0] = (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / (w * w)).exp()
    })
}

fn rel_max(a: &GridField, b: &GridField) -> f64 {
    let d = a.data.iter().zip(&b.data).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    d / b.max_abs()
}

/// `e^{tΔ}e^{−r²/w²} = (w²/(w²+4t))^{3/2} e^{−r²/(w²+4t)}`.
#[test]
fn heat_of_gaussian_matches_closed_form() {
    let spec = GridSpec::cube(5.0, 48).unwrap();
    let w = 0.7;
    let g = gaussian(&spec, w);
    for t in [0.01, 0.1, 0.3] {
        let out = heat_apply(HeatInput::Grid(&g), t, &spec, 2.0).unwrap();
        let s = w * w + 4.0 * t;
        let exact = GridField::from_fn(spec.clone(), Rank::Scalar, |x, _, o| {
            o[0] = (w * w / s).powf(1.5) * (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / s).exp()
        });
        assert!(rel_max(&out, &exact) < 1e-6, "t = {t}: {}", rel_max(&out, &exact));
    }
}

#[test]
fn heat_is_a_semigroup() {
    let spec = GridSpec::cube(5.0, 32).unwrap();
    let g = gaussian(&spec, 0.9);
    let once = heat_apply(HeatInput::Grid(&g), 0.2, &spec, 2.0).unwrap();
    let half = heat_apply(HeatInput::Grid(&g), 0.08, &spec, 2.0).unwrap();
    let twice = heat_apply(HeatInput::Grid(&half), 0.12, &spec, 2.0).unwrap();
    assert!(rel_max(&twice, &once) < 1e-10);
}

/// The Leray projection leaves a field whose discrete divergence is a difference-stencil error.
#[test]
fn oseen_output_is_solenoidal() {
    let mut ratios = Vec::new();
    for n in [32usize, 64] {
        let spec = GridSpec::cube(4.0, n).unwrap();
        let f = gaussian_tensor_source(&spec, 1.0, 0.8);
        let u = oseen_apply(&f, 0.05, 2.0).unwrap();
        let div = u.divergence().unwrap().max_abs();
        let grad = u.partial(0).max_abs();
        ratios.push(div / grad);
    }
    assert!(ratios[1] < 0.01 && ratios[1] < 0.35 * ratios[0], "{ratios:?}");
}

/// Midpoint rule in `τ = √(t−s)` is second order for a smooth static source.
#[test]
fn duhamel_is_second_order_in_tau() {
    let spec = GridSpec::cube(4.0, 24).unwrap();
    let f = gaussian_tensor_source(&spec, 1.0, 0.8);
    let t = [0.2];
    let run = |m: usize| duhamel(&f, &t, &SemigroupPlan::new(&spec, 2.0, m).unwrap()).unwrap().velocity[0].clone();
    let reference = run(256);
    let errs: Vec<f64> = [8usize, 16, 32].iter().map(|&m| rel_max(&run(m), &reference)).collect();
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order >= 1.8, "{errs:?}");
    }
}

/// A time-dependent source whose slices are all constant in space has no divergence.
#[test]
fn spatially_constant_source_contributes_nothing() {
    let spec = GridSpec::cube(3.0, 16).unwrap();
    let axis = TimeAxis::uniform(0.2, 4).unwrap();
    let f = GridField::from_fn(spec.clone().with_time(axis), Rank::SymTensor, |_, t, o| {
        o.copy_from_slice(&[1.0 + t, 0.3, -0.2 * t, 2.0, 0.0, 0.5])
    });
    let d = duhamel(&f, &[0.1, 0.2], &SemigroupPlan::new(&spec, 2.0, 8).unwrap()).unwrap();
    for v in &d.velocity {
        assert!(v.max_abs() < 1e-12);
    }
}
