//! Composed Riesz transforms: trace identity, FFT against principal value,
//! skew-adjoint transfer onto atoms, zero-mode insensitivity and BMO growth.

use std::time::Instant;

use rand::Rng;

use super::{params, rel_l2_mod_const, suite_rng};
use crate::config::ScenarioConfig;
use crate::error::Result;
use crate::exec;
use crate::field::grid::dot;
use crate::field::{Cutoff, GridField, GridSpec, Rank, TestFunction};
use crate::report::{Status, VerificationReport};
use crate::riesz::{
    bmo_seminorm, duality_pair, pv_grid_all, riesz_fft, sample_spatial, Atom, InnerRadius, RieszOptions,
};

pub const TRACE_TOL: f64 = 1e-3;
pub const PV_TOL: f64 = 0.01;
pub const DUALITY_TOL: f64 = 0.01;
pub const ZERO_MODE_TOL: f64 = 1e-10;
/// Relative deviation of the sampled mean oscillation of `x₁` from `3r/8`; the
/// smallest ball is only two cells across.
pub const BMO_LINEAR_TOL: f64 = 0.05;

fn gaussian(spec: &GridSpec, center: [f64; 3], width: f64) -> GridField {
    GridField::from_fn(spec.clone(), Rank::Scalar, |x, _, o| {
        let d = [x[0] - center[0], x[1] - center[1], x[2] - center[2]];
        o[0] = (-dot(d, d) / (width * width)).exp()
    })
}

pub fn run(cfg: &ScenarioConfig) -> Result<Vec<VerificationReport>> {
    let grid = cfg.grid.refined(2.0);
    let spec = grid.spec()?;
    let p = params(cfg, Some(grid.n));
    let opts = RieszOptions { padding: cfg.operator.padding, ..RieszOptions::default() };
    let mut rng = suite_rng(cfg.seed, 2);
    let mut out = Vec::new();

    let start = Instant::now();
    let f = gaussian(&spec, [0.0; 3], 0.9);
    let mut sum = GridField::zeros(spec.clone(), Rank::Scalar);
    for i in 0..3 {
        sum.axpy(1.0, &riesz_fft(&f, i, i, &opts)?)?;
    }
    let neg: Vec<f64> = f.data.iter().map(|v| -v).collect();
    let trace = rel_l2_mod_const(&sum.data, &neg);
    out.push(
        VerificationReport::new("riesz.trace_identity", "riesz_fft", trace, TRACE_TOL, trace <= TRACE_TOL)
            .with_params(p.clone())
            .timed(start),
    );

    let start = Instant::now();
    let r11 = riesz_fft(&f, 0, 0, &opts)?;
    let reach = spec.boundary_distance(spec.center()) / 2.0;
    let probes: Vec<usize> = spec
        .ball_indices(spec.center(), reach)
        .into_iter()
        .step_by(97)
        .take(24)
        .collect();
    let pv: Vec<f64> = probes
        .iter()
        .map(|&n| pv_grid_all(&f, n, InnerRadius::default()).map(|v| v[0]))
        .collect::<Result<_>>()?;
    let fft: Vec<f64> = probes.iter().map(|&n| r11.data[n]).collect();
    let pv_err = rel_l2_mod_const(&pv, &fft);
    out.push(
        VerificationReport::new("riesz.fft_vs_pv", "riesz_pv", pv_err, PV_TOL, pv_err <= PV_TOL)
            .with("probes", probes.len() as f64)
            .with_params(p.clone())
            .timed(start),
    );

    // ∫(fθ)·R_iR_jψ against ∫R_iR_j(fθ)·ψ
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut rep = VerificationReport::new("riesz.skew_adjoint", "duality_pair", 0.0, DUALITY_TOL, true);
    let half = spec.boundary_distance(spec.center());
    for k in 0..5 {
        let mut pick = |s: f64| [0, 1, 2].map(|_| rng.gen_range(-s..s));
        let fc = pick(0.2 * half);
        let tc = pick(0.1 * half);
        let pc = pick(0.1 * half);
        let width = rng.gen_range(0.6..1.4);
        let cut = Cutoff::new(rng.gen_range(0.15..0.25) * half);
        let radius = rng.gen_range(0.6..1.0);
        let (i, j) = (rng.gen_range(0..3), rng.gen_range(0..3));
        let ftheta = GridField::from_fn(spec.clone(), Rank::Scalar, |x, _, o| {
            let d = [x[0] - fc[0], x[1] - fc[1], x[2] - fc[2]];
            let s = [x[0] - tc[0], x[1] - tc[1], x[2] - tc[2]];
            o[0] = (-dot(d, d) / (width * width)).exp() * cut.eval(s)
        });
        let atom = Atom::on_grid(pc, radius, &spec)?;
        let lhs = duality_pair(&ftheta, &atom, i, j, &opts)?;
        let rt = riesz_fft(&ftheta, i, j, &opts)?;
        let psi = sample_spatial(&atom.psi, &spec);
        let rhs = exec::sum(psi.len(), |m| rt.data[m] * psi[m]) * spec.cell_volume();
        let rel = (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE);
        rep = rep.with(&format!("triple{k}"), rel);
        worst = worst.max(rel);
    }
    rep.value = worst;
    rep.status = Status::from_pass(worst <= DUALITY_TOL);
    out.push(rep.with_params(p.clone()).timed(start));

    let start = Instant::now();
    let bounded = GridField::from_fn(spec.clone(), Rank::Scalar, |x, _, o| o[0] = 1.0 + 0.5 * (x[0] - x[1]).sin());
    let atom = Atom::from_test_function(TestFunction::mean_zero_on([0.3, -0.2, 0.1], 1.0, &spec), &spec)?;
    let a = duality_pair(&bounded, &atom, 0, 1, &opts)?;
    let b = duality_pair(&bounded, &atom, 0, 1, &RieszOptions { zero_mode: -1.0, ..opts })?;
    let shift = (a - b).abs();
    out.push(
        VerificationReport::new("riesz.zero_mode", "duality_pair", shift, ZERO_MODE_TOL, shift <= ZERO_MODE_TOL)
            .with("pairing", a)
            .with_params(p.clone())
            .timed(start),
    );

    let start = Instant::now();
    let linear = GridField::from_fn(spec.clone(), Rank::Scalar, |x, _, o| o[0] = x[0]);
    let h = spec.spacing;
    let radii = [(2.0 * h).max(0.25), (20.0 * h).max(2.5)];
    let est = bmo_seminorm(&linear, &radii)?;
    let dev = est
        .per_radius
        .iter()
        .map(|(r, v)| (v - 0.375 * r).abs() / (0.375 * r))
        .fold(0.0, f64::max);
    let mut rep = VerificationReport::new("riesz.bmo_linear_growth", "bmo_seminorm", dev, BMO_LINEAR_TOL, dev <= BMO_LINEAR_TOL);
    for (r, v) in &est.per_radius {
        rep = rep.with(&format!("r={r:.3}"), *v);
    }
    out.push(rep.with_params(p).timed(start));
    Ok(out)
}
