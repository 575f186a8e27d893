//! Mollified flux: convergence of the approximating pressure and velocity as
//! the width shrinks, plus the Young and sup bounds of the mollifier.

use std::time::Instant;

use super::{decreasing, params};
use crate::analytic::make_gaussian_curl;
use crate::config::ScenarioConfig;
use crate::error::Result;
use crate::field::{GridField, TestFunction, TimeAxis};
use crate::mollify::{approx_pressure, approx_velocity, mollify};
use crate::pressure::{lpe_apply, LpeOptions, Source};
use crate::report::{Status, VerificationReport};
use crate::semigroup::{local_l1, mild_rhs, HeatInput, SemigroupPlan};

/// Widths in grid spacings, coarse to fine.
pub const WIDTHS: [f64; 3] = [16.0, 8.0, 4.0];
pub const HORIZON: f64 = 2.5;
pub const BALL_CENTER: [f64; 3] = [0.3, -0.2, 0.1];
pub const BALL_RADIUS: f64 = 0.75;

/// A time-independent trajectory on a long axis: the one-sided time mollifier
/// then sees no zero extension at the evaluation time.
fn static_trajectory(cfg: &ScenarioConfig) -> Result<(GridField, GridField)> {
    let spec = cfg.grid.refined(2.0).spec()?;
    let u0 = make_gaussian_curl(1.0, 0.8, [0.2, -0.1, 0.0])?.sample(&spec);
    let steps = (HORIZON / (0.5 * WIDTHS[2] * spec.spacing)).ceil().max(2.0) as usize;
    let axis = TimeAxis::uniform(HORIZON, steps)?;
    let u = GridField::stack(&vec![u0.clone(); axis.nt], axis)?;
    Ok((u0, u))
}

pub fn run(cfg: &ScenarioConfig) -> Result<Vec<VerificationReport>> {
    let (u0, u) = static_trajectory(cfg)?;
    let spec = u.spec.spatial();
    let h = spec.spacing;
    let mut p = params(cfg, Some(spec.counts[0]));
    let opts = LpeOptions { padding: cfg.operator.padding, ..LpeOptions::default() };
    let flux = u.outer_square()?;
    let start = Instant::now();
    let reference = lpe_apply(Source::Grid(&flux), &spec, BALL_CENTER, BALL_RADIUS, HORIZON, &opts)?.total();
    let psis: Vec<TestFunction> = (0..3)
        .map(|k| {
            let s = 0.1 * k as f64;
            TestFunction::mean_zero_on([BALL_CENTER[0] + s, BALL_CENTER[1], BALL_CENTER[2] - s], 0.6, &spec)
        })
        .collect();
    let pair = |f: &GridField, psi: &TestFunction| -> f64 {
        spec.ball_indices(psi.center, psi.radius)
            .iter()
            .map(|&i| f.data[i] * psi.spatial(spec.point(i)).value)
            .sum::<f64>()
            * spec.cell_volume()
    };
    let plan = SemigroupPlan::new(&spec, cfg.operator.padding, cfg.operator.time_nodes)?;
    let mild = mild_rhs(HeatInput::Grid(&u0), &u, &[HORIZON], &plan)?.remove(0);

    let (mut perr, mut uerr) = (Vec::new(), Vec::new());
    let (mut young, mut linf, mut linf_bound) = (0.0f64, 0.0f64, f64::INFINITY);
    for k in WIDTHS {
        let eps = k * h;
        let pe = approx_pressure(&u, eps, BALL_CENTER, BALL_RADIUS, HORIZON, &opts)?.total();
        perr.push(
            psis.iter()
                .map(|psi| {
                    let r = pair(&reference, psi);
                    (pair(&pe, psi) - r).abs() / r.abs().max(1e-300)
                })
                .collect::<Vec<f64>>(),
        );
        let mut d = approx_velocity(&u0, &u, eps, &[HORIZON], &plan)?.remove(0);
        d.axpy(-1.0, &mild)?;
        uerr.push(local_l1(&d, BALL_CENTER, 1.0));
        let m = mollify(&flux, eps)?;
        young = young.max(m.young_ratio);
        linf = linf.max(m.linf_constant / m.linf_bound);
        linf_bound = linf_bound.min(m.linf_bound);
    }
    p.eps = Some(WIDTHS[2] * h);

    let worst = |row: &Vec<f64>| row.iter().copied().fold(0.0, f64::max);
    let monotone = (0..psis.len()).all(|j| decreasing(&perr.iter().map(|row| row[j]).collect::<Vec<_>>()));
    let mut rep = VerificationReport::new(
        "mollify.pressure_convergence",
        "approx_pressure",
        worst(&perr[2]),
        worst(&perr[0]),
        monotone,
    );
    for (k, row) in WIDTHS.iter().zip(&perr) {
        for (j, e) in row.iter().enumerate() {
            rep = rep.with(&format!("psi{j}_eps={:.4}", k * h), *e);
        }
    }
    let mut out = vec![rep.with_params(p.clone()).timed(start)];
    let start = Instant::now();
    let mut rep = VerificationReport::new("mollify.velocity_convergence", "approx_velocity", uerr[2], uerr[0], decreasing(&uerr));
    for (k, e) in WIDTHS.iter().zip(&uerr) {
        rep = rep.with(&format!("eps={:.4}", k * h), *e);
    }
    out.push(rep.with_params(p.clone()).timed(start));
    out.push(
        VerificationReport::new("mollify.young", "mollify", young, 1.0, young <= 1.0 + 1e-9).with_params(p.clone()),
    );
    let mut rep = VerificationReport::new("mollify.sup_bound", "mollify", linf, 1.0, linf <= 1.0);
    rep.status = Status::from_pass(linf <= 1.0 && linf_bound.is_finite());
    out.push(rep.with("smallest_bound", linf_bound).with_params(p));
    Ok(out)
}
