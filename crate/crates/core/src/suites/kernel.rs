//! Kernel identities, corrected-kernel decay, heat normalization and the
//! Oseen decay bound.

use std::time::Instant;

use rand::Rng;

use super::{params, suite_rng};
use crate::config::ScenarioConfig;
use crate::error::Result;
use crate::field::grid::scale;
use crate::field::quadrature::{composite, fibonacci_sphere, uniform_breaks};
use crate::field::sym_index;
use crate::kernel::{corrected_decay_fit, cz_all, cz_grad_all, heat_kernel, oseen_decay_fit, random_unit, OseenTable};
use crate::report::VerificationReport;

pub const IDENTITY_TOL: f64 = 1e-12;
pub const SPHERE_MEAN_TOL: f64 = 1e-3;
pub const DECAY_STABILITY: f64 = 0.1;
pub const HEAT_MASS_TOL: f64 = 1e-6;
/// Spread of the fitted Oseen constant across two decades of `t`.
pub const OSEEN_SPREAD: f64 = 1.1;

fn max_abs(k: &[f64; 6]) -> f64 {
    k.iter().fold(0.0, |m: f64, v| m.max(v.abs()))
}

pub fn run(cfg: &ScenarioConfig) -> Result<Vec<VerificationReport>> {
    let p = params(cfg, None);
    let mut rng = suite_rng(cfg.seed, 1);
    let mut out = Vec::new();

    let start = Instant::now();
    let points: Vec<[f64; 3]> = (0..1000)
        .map(|_| {
            let r = 10f64.powf(rng.gen_range(-2.0..2.0));
            scale(random_unit(&mut rng), r)
        })
        .collect();
    let trace = points
        .iter()
        .map(|&y| {
            let k = cz_all(y);
            (k[sym_index(0, 0)] + k[sym_index(1, 1)] + k[sym_index(2, 2)]).abs() / max_abs(&k)
        })
        .fold(0.0, f64::max);
    out.push(
        VerificationReport::new("kernel.trace_zero", "cz_eval", trace, IDENTITY_TOL, trace <= IDENTITY_TOL)
            .with("points", points.len() as f64)
            .with_params(p.clone())
            .timed(start),
    );

    let start = Instant::now();
    let homog = points
        .iter()
        .map(|&y| {
            let lambda = 10f64.powf(rng.gen_range(-1.0..1.0));
            let a = cz_all(y);
            let b = cz_all(scale(y, lambda));
            let m = max_abs(&a);
            (0..6).map(|c| (b[c] * lambda.powi(3) - a[c]).abs() / m).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    // K is even under y → −y and its gradient odd
    let parity = points
        .iter()
        .map(|&y| {
            let (a, b) = (cz_all(y), cz_all(scale(y, -1.0)));
            let (ga, gb) = (cz_grad_all(y), cz_grad_all(scale(y, -1.0)));
            let m = max_abs(&a);
            let gm = ga.iter().map(max_abs).fold(0.0, f64::max);
            let even = (0..6).map(|c| (a[c] - b[c]).abs() / m).fold(0.0, f64::max);
            let odd = (0..3)
                .flat_map(|l| (0..6).map(move |c| (l, c)))
                .map(|(l, c)| (ga[l][c] + gb[l][c]).abs() / gm)
                .fold(0.0, f64::max);
            even.max(odd)
        })
        .fold(0.0, f64::max);
    let worst = homog.max(parity);
    out.push(
        VerificationReport::new("kernel.homogeneity", "cz_eval", worst, IDENTITY_TOL, worst <= IDENTITY_TOL)
            .with("scaling", homog)
            .with("parity", parity)
            .with_params(p.clone())
            .timed(start),
    );

    let start = Instant::now();
    let dirs = fibonacci_sphere(10_000);
    let mut worst: f64 = 0.0;
    let mut rep = VerificationReport::new("kernel.sphere_mean_zero", "cz_eval", 0.0, SPHERE_MEAN_TOL, true);
    for r in [0.5, 1.0, 5.0] {
        let mut mean = [0.0; 6];
        let mut peak: f64 = 0.0;
        for d in &dirs {
            let k = cz_all(scale(*d, r));
            for c in 0..6 {
                mean[c] += k[c] / dirs.len() as f64;
            }
            peak = peak.max(max_abs(&k));
        }
        let v = max_abs(&mean) / peak;
        rep = rep.with(&format!("r={r}"), v);
        worst = worst.max(v);
    }
    rep.value = worst;
    rep.status = crate::report::Status::from_pass(worst <= SPHERE_MEAN_TOL);
    out.push(rep.with_params(p.clone()).timed(start));

    let start = Instant::now();
    let radius = cfg.operator.radius;
    let a = corrected_decay_fit(radius, 10_000, cfg.seed);
    let b = corrected_decay_fit(radius, 20_000, cfg.seed.wrapping_add(1));
    let twice = corrected_decay_fit(2.0 * radius, 10_000, cfg.seed);
    let drift = (b.constant - a.constant).abs() / a.constant;
    out.push(
        VerificationReport::new("kernel.corrected_decay", "corrected_difference", drift, DECAY_STABILITY, drift <= DECAY_STABILITY)
            .with("constant", a.constant)
            .with("constant_doubled_samples", b.constant)
            .with("constant_at_2R", twice.constant)
            .with_params(p.clone())
            .timed(start),
    );

    let start = Instant::now();
    let t: f64 = 0.1;
    let half = 8.0 * t.sqrt();
    let nodes = composite(&uniform_breaks(-half, half, 6), 10);
    let mut mass = 0.0;
    for &(x, wx) in &nodes {
        for &(y, wy) in &nodes {
            for &(z, wz) in &nodes {
                mass += wx * wy * wz * heat_kernel([x, y, z], t)?;
            }
        }
    }
    let err = (mass - 1.0).abs();
    out.push(
        VerificationReport::new("kernel.heat_mass", "heat_kernel", err, HEAT_MASS_TOL, err <= HEAT_MASS_TOL)
            .with("t", t)
            .with_params(p.clone())
            .timed(start),
    );

    let start = Instant::now();
    let mut rep = VerificationReport::new("kernel.oseen_decay", "oseen_eval", 0.0, OSEEN_SPREAD, true);
    let mut consts = Vec::new();
    for t in [0.01, 0.1, 1.0] {
        let table = OseenTable::scaled(t, 64)?;
        let fit = oseen_decay_fit(&table.field.spec, &[t])?;
        rep = rep.with(&format!("t={t}"), fit.constant);
        consts.push(fit.constant);
    }
    let hi = consts.iter().copied().fold(0.0, f64::max);
    let lo = consts.iter().copied().fold(f64::INFINITY, f64::min);
    let spread = hi / lo;
    rep.value = spread;
    rep.status = crate::report::Status::from_pass(spread.is_finite() && spread <= OSEEN_SPREAD);
    out.push(rep.with("constant", hi).with_params(p).timed(start));
    Ok(out)
}
