//! Small-data Picard iteration for the mild formulation.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{uloc_norm, GridField, GridSpec, Rank, TimeAxis};
use crate::semigroup::{duhamel, heat_apply, HeatInput, SemigroupPlan};

/// Largest admitted `sup|e^{tΔ}u₀|·√T`.
pub const SMALLNESS_GATE: f64 = 0.1;

#[derive(Clone, Copy, Debug)]
pub struct PicardOptions {
    pub t_final: f64,
    pub n_steps: usize,
    pub max_iter: usize,
    pub tol: f64,
}

#[derive(Clone, Debug)]
pub struct PicardState {
    pub iterations: usize,
    pub velocity: GridField,
    /// `sup_t ‖u^{(k+1)}(t) − u^{(k)}(t)‖_{L²_uloc}` per iteration, on balls of [`stop_radius`].
    pub history: Vec<f64>,
    pub heat: GridField,
    pub gate_value: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PicardSummary {
    pub iterations: usize,
    pub history: Vec<f64>,
    pub contraction: f64,
    pub gate_value: f64,
}

impl PicardState {
    /// Largest ratio of successive differences.
    pub fn contraction(&self) -> f64 {
        self.history
            .windows(2)
            .filter(|w| w[0] > 0.0)
            .map(|w| w[1] / w[0])
            .fold(0.0, f64::max)
    }

    pub fn summary(&self) -> PicardSummary {
        PicardSummary {
            iterations: self.iterations,
            history: self.history.clone(),
            contraction: self.contraction(),
            gate_value: self.gate_value,
        }
    }
}

/// `e^{t_nΔ}u₀` at every node of `axis`.
pub fn heat_trajectory(u0: HeatInput, spec: &GridSpec, axis: TimeAxis, padding: f64) -> Result<GridField> {
    let slices = axis
        .times()
        .iter()
        .map(|&t| heat_apply(u0, t - axis.t0, spec, padding))
        .collect::<Result<Vec<_>>>()?;
    GridField::stack(&slices, axis)
}

/// Iterates `u^{(k+1)} = e^{tΔ}u₀ − ∫₀ᵗ e^{(t−s)Δ}ℙ∇·(u^{(k)}⊗u^{(k)}) ds` on the
/// nodes of `[0, T]` until successive iterates differ by at most `tol`.
pub fn picard_solve(u0: HeatInput, plan: &SemigroupPlan, opts: &PicardOptions) -> Result<PicardState> {
    let axis = TimeAxis::uniform(opts.t_final, opts.n_steps)?;
    let heat = heat_trajectory(u0, &plan.spec, axis, plan.padding)?;
    let gate_value = heat.max_magnitude() * opts.t_final.sqrt();
    if gate_value > SMALLNESS_GATE {
        return Err(Error::DataTooLarge { value: gate_value, limit: SMALLNESS_GATE });
    }
    let times = axis.times();
    let mut u = heat.clone();
    let mut history = Vec::new();
    // unit balls, or the smallest ball the grid resolves
    let ball = stop_radius(&plan.spec);
    for k in 1..=opts.max_iter {
        let d = duhamel(&u.outer_square()?, &times, plan)?;
        let mut next = heat.clone();
        for (n, dv) in d.velocity.iter().enumerate() {
            for c in 0..3 {
                let dst = next.slice_mut(n, c);
                for (o, v) in dst.iter_mut().zip(dv.slice(0, c)) {
                    *o -= v;
                }
            }
        }
        let mut diff = next.clone();
        diff.axpy(-1.0, &u)?;
        let dn = uloc_norm(&diff, 2.0, ball)?;
        history.push(dn);
        u = next;
        if dn <= opts.tol {
            return Ok(PicardState { iterations: k, velocity: u, history, heat, gate_value });
        }
    }
    Err(Error::NoConvergence { iterations: opts.max_iter, history })
}

/// Radius of the `L²_uloc` balls in the stopping rule.
pub fn stop_radius(spec: &GridSpec) -> f64 {
    (2.0 * spec.spacing).max(1.0)
}

/// `‖u(t_n) − u₀‖_{L²(B_r(c))}` per time node.
pub fn initial_trace(u: &GridField, c: [f64; 3], r: f64) -> Result<Vec<(f64, f64)>> {
    u.expect_rank(Rank::Vector)?;
    let axis = u.spec.time.ok_or(Error::MissingTimeAxis)?;
    let idx = u.spec.ball_indices(c, r);
    let h3 = u.spec.cell_volume();
    Ok((0..u.nt())
        .map(|n| {
            let s: f64 = idx
                .iter()
                .map(|&i| {
                    let a = u.at(n, i);
                    let b = u.at(0, i);
                    (0..3).map(|k| (a[k] - b[k]).powi(2)).sum::<f64>()
                })
                .sum();
            (axis.time(n), (s * h3).sqrt())
        })
        .collect())
}
