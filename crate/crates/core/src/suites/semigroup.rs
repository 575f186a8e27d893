//! Oseen semigroup: the `L^q_uloc → L^p_uloc` smoothing rate and convergence of
//! the Duhamel quadrature.

use std::time::Instant;

use super::params;
use crate::config::ScenarioConfig;
use crate::error::Result;
use crate::report::{Status, VerificationReport};
use crate::semigroup::{duhamel, gaussian_tensor_source, mate_estimate_check, SemigroupPlan, MATE_SLOPE_TOL};

pub const MATE_TIMES: [f64; 7] = [0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0];
pub const EXPONENTS: [(f64, f64); 3] = [(1.0, 1.0), (2.0, 1.0), (2.0, 2.0)];
/// Smallest accepted observed order of the Duhamel time quadrature.
pub const DUHAMEL_ORDER: f64 = 1.5;
pub const TAU_NODES: [usize; 4] = [8, 16, 32, 64];

pub fn run(cfg: &ScenarioConfig) -> Result<Vec<VerificationReport>> {
    let mut out = Vec::new();
    let fine = cfg.grid.refined(1.5);
    let spec = fine.spec()?;
    let f = gaussian_tensor_source(&spec, 1.0, 0.5);
    for (p, q) in EXPONENTS {
        let start = Instant::now();
        let m = mate_estimate_check(&f, &MATE_TIMES, p, q)?;
        let mut rep = VerificationReport::new(
            &format!("semigroup.smoothing_p{p}_q{q}"),
            "mate_estimate_check",
            m.small_t_slope,
            -MATE_SLOPE_TOL,
            m.pass,
        )
        .with("sup_ratio", m.sup);
        for (t, r) in &m.ratios {
            rep = rep.with(&format!("t={t}"), *r);
        }
        out.push(rep.with_params(params(cfg, Some(fine.n))).timed(start));
    }

    // successive differences under doubling of the quadrature nodes
    let start = Instant::now();
    let spec = cfg.grid.spec()?;
    let f = gaussian_tensor_source(&spec, 1.0, 0.8);
    let mut fields = Vec::new();
    for m in TAU_NODES {
        let plan = SemigroupPlan::new(&spec, cfg.operator.padding, m)?;
        fields.push(duhamel(&f, &[0.2], &plan)?.velocity.remove(0));
    }
    let diffs: Vec<f64> = fields
        .windows(2)
        .map(|w| {
            let mut d = w[0].clone();
            d.axpy(-1.0, &w[1]).map(|_| d.max_abs())
        })
        .collect::<Result<_>>()?;
    let rates: Vec<f64> = diffs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let order = rates.iter().copied().fold(f64::INFINITY, f64::min);
    let mut rep = VerificationReport::new("semigroup.duhamel_convergence", "duhamel", order, DUHAMEL_ORDER, true);
    for (m, d) in TAU_NODES.iter().zip(&diffs) {
        rep = rep.with(&format!("diff_{m}"), *d);
    }
    rep.status = Status::from_pass(order >= DUHAMEL_ORDER || diffs.last().is_some_and(|d| *d < 1e-12));
    out.push(rep.with_params(params(cfg, Some(cfg.grid.n))).timed(start));
    Ok(out)
}
