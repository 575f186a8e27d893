//! Local pressure expansion: agreement with the global FFT pressure, shell
//! telescoping, logarithmic growth of the shell constants, the distributional
//! form and the change of ball.

use std::time::Instant;

use rand::Rng;

use super::{decreasing, params, rel_l2_mod_const, suite_rng};
use crate::analytic::{make_gaussian_curl, TensorSource};
use crate::config::{GridConfig, ScenarioConfig};
use crate::error::Result;
use crate::field::TestFunction;
use crate::pressure::{
    dlpe_pair, lpe_apply, patched_pressure_eval, shell_constants, LpeOptions, Pairing, ShellPolicy, Source,
};
use crate::report::VerificationReport;
use crate::riesz::{riesz_contract, RieszOptions};

pub const FFT_TOL: f64 = 0.02;
pub const TELESCOPE_TOL: f64 = 1e-3;
pub const TELESCOPE_POINTS: usize = 100;
pub const LOG_FIT_TOL: f64 = 0.1;
pub const SHELLS: usize = 12;
pub const DLPE_TOL: f64 = 0.02;
pub const COVARIANCE_TOL: f64 = 0.02;

/// Wide enough that the product decays well inside the doubled box.
fn wide_source() -> Result<TensorSource> {
    Ok(TensorSource::Outer(make_gaussian_curl(1.0, 1.2, [0.2, -0.1, 0.0])?))
}

pub fn run(cfg: &ScenarioConfig) -> Result<Vec<VerificationReport>> {
    let op = &cfg.operator;
    let opts = op.lpe_options();
    let rho = opts.validate(op.radius)?;
    let (x0, radius) = (op.center, op.radius);
    let src = wide_source()?;
    let mut out = Vec::new();

    let start = Instant::now();
    let mut errs = Vec::new();
    let mut rep = VerificationReport::new("pressure.lpe_vs_fft", "lpe_apply", 0.0, FFT_TOL, true);
    let grids = [2.0, 3.0].map(|f| GridConfig { half_width: 2.0 * cfg.grid.half_width, n: (cfg.grid.n as f64 * f) as usize });
    for g in &grids {
        let spec = g.spec()?;
        let d = lpe_apply(Source::Analytic(&src), &spec, x0, radius, 0.0, &opts)?;
        let global = riesz_contract(&src.sample(&spec), &RieszOptions { padding: op.padding, ..Default::default() })?;
        let reference: Vec<f64> = d.nodes.iter().map(|&i| global.data[i]).collect();
        let e = rel_l2_mod_const(&d.ball_values(), &reference);
        rep = rep.with(&format!("n={}", g.n), e);
        errs.push(e);
    }
    rep.value = *errs.last().unwrap_or(&0.0);
    rep.status = crate::report::Status::from_pass(rep.value <= FFT_TOL && decreasing(&errs));
    let mut p = params(cfg, Some(grids[1].n));
    p.rho_max = Some(rho);
    out.push(rep.with_params(p.clone()).timed(start));

    let start = Instant::now();
    let aniso = TensorSource::Anisotropic { amplitude: 1.0 };
    let mut rng = suite_rng(cfg.seed, 3);
    let mut worst: f64 = 0.0;
    for _ in 0..TELESCOPE_POINTS {
        let x = loop {
            let x = [0, 1, 2].map(|_| rng.gen_range(-0.95..0.95));
            if x.iter().map(|v| v * v).sum::<f64>() < 0.95 * 0.95 {
                break x;
            }
        };
        let a = patched_pressure_eval(&aniso, x, ShellPolicy::Fixed(1), 0.0, &opts)?;
        let b = patched_pressure_eval(&aniso, x, ShellPolicy::Fixed(3), 0.0, &opts)?;
        worst = worst.max((a - b).abs() / a.abs().max(b.abs()).max(1e-300));
    }
    let compact = TensorSource::Bump { center: [0.3, 0.0, 0.0], radius: 1.2, tensor: [1.0, 0.2, 0.0, 0.5, 0.0, 0.3] };
    let ck = shell_constants(Source::Analytic(&compact), 6, 0.0, &opts)?;
    let ck_max = ck.constants.iter().map(|c| c.1.abs()).fold(0.0, f64::max);
    out.push(
        VerificationReport::new(
            "pressure.telescoping",
            "patched_pressure_eval",
            worst,
            TELESCOPE_TOL,
            worst <= TELESCOPE_TOL && ck_max == 0.0,
        )
        .with("points", TELESCOPE_POINTS as f64)
        .with("compact_shell_max", ck_max)
        .with_params(p.clone())
        .timed(start),
    );

    // c̃_n ≈ A + B ln n for a bounded source of degree zero at infinity
    let start = Instant::now();
    let far = LpeOptions { rho_max: Some(opts.rho_max(radius).max(10.0 * SHELLS as f64)), ..opts };
    let s = shell_constants(Source::Analytic(&aniso), SHELLS, 0.0, &far)?;
    let (a, b) = log_fit(&s.cumulative);
    let tail: Vec<&(usize, f64)> = s.cumulative.iter().filter(|c| c.0 >= 4).collect();
    let dev = tail
        .iter()
        .map(|&&(n, c)| (c - a - b * (n as f64).ln()).abs() / c.abs().max(1e-300))
        .fold(0.0, f64::max);
    let one = TensorSource::Constant([1.0, 0.0, 0.0, 1.0, 0.0, 1.0]);
    let iso = shell_constants(Source::Analytic(&one), SHELLS, 0.0, &far)?;
    let iso_max = iso.cumulative.iter().map(|c| c.1.abs()).fold(0.0, f64::max);
    out.push(
        VerificationReport::new("pressure.log_growth", "shell_constants", dev, LOG_FIT_TOL, dev <= LOG_FIT_TOL && b.abs() > 0.0)
            .with("intercept", a)
            .with("log_slope", b)
            .with("identity_source_max", iso_max)
            .with_params(p.clone())
            .timed(start),
    );

    let start = Instant::now();
    let spec = grids[0].spec()?;
    let d = lpe_apply(Source::Analytic(&src), &spec, x0, radius, 0.0, &opts)?;
    let total = d.total();
    let psi = TestFunction::bump([x0[0] + 0.1, x0[1] + 0.1, x0[2] - 0.1], 0.8 * radius);
    let pointwise: f64 =
        d.nodes.iter().map(|&i| total.data[i] * psi.value(spec.point(i), 0.0)).sum::<f64>() * spec.cell_volume();
    let dist = dlpe_pair(Source::Analytic(&src), &spec, &Pairing::Scalar(psi), x0, radius, &opts)?;
    let rel = (dist - pointwise).abs() / pointwise.abs().max(dist.abs()).max(1e-300);
    out.push(
        VerificationReport::new("pressure.dlpe_vs_pointwise", "dlpe_pair", rel, DLPE_TOL, rel <= DLPE_TOL)
            .with("pointwise", pointwise)
            .with("distributional", dist)
            .with_params(params(cfg, Some(grids[0].n)))
            .timed(start),
    );

    // two overlapping balls give pressures differing by a constant on the overlap
    let start = Instant::now();
    let x1 = [x0[0] + 0.5 * radius, x0[1], x0[2]];
    let e = lpe_apply(Source::Analytic(&src), &spec, x1, radius, 0.0, &opts)?;
    let other = e.total();
    let shared: Vec<usize> = d.nodes.iter().copied().filter(|i| e.nodes.binary_search(i).is_ok()).collect();
    let a: Vec<f64> = shared.iter().map(|&i| total.data[i]).collect();
    let b: Vec<f64> = shared.iter().map(|&i| other.data[i]).collect();
    let cov = rel_l2_mod_const(&a, &b);
    let shift = a.iter().zip(&b).map(|(x, y)| x - y).sum::<f64>() / a.len().max(1) as f64;
    out.push(
        VerificationReport::new("pressure.ball_change", "lpe_apply", cov, COVARIANCE_TOL, cov <= COVARIANCE_TOL)
            .with("overlap_nodes", shared.len() as f64)
            .with("constant_shift", shift)
            .with_params(params(cfg, Some(grids[0].n)))
            .timed(start),
    );
    Ok(out)
}

/// Least squares `c ≈ a + b ln n`.
fn log_fit(pts: &[(usize, f64)]) -> (f64, f64) {
    let m = pts.len() as f64;
    let xs: Vec<f64> = pts.iter().map(|p| (p.0 as f64).ln()).collect();
    let mx = xs.iter().sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(pts).map(|(x, p)| (x - mx) * (p.1 - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (my - b * mx, b)
}
