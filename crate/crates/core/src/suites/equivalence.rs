//! Mild against distributional formulations on the Picard solution: (a) the
//! mild residual, (b) the weak residual with the expansion pressure, (c) the
//! parasitic pair that is distributional but not mild, and the local energy
//! balance with the a priori bound.

use std::time::Instant;

use rand::Rng;

use super::{params, suite_rng};
use crate::analytic::{make_parasitic, TimeProfile};
use crate::config::ScenarioConfig;
use crate::error::Result;
use crate::field::{GridField, GridSpec, Rank, TestFunction, VectorTestFunction};
use crate::harness::{
    apriori_bound_check, local_energy_check, mild_residual, nse_residual, PressureProvider, Region, Velocity,
    APRIORI_C0,
};
use crate::kernel::random_unit;
use crate::picard::{picard_solve, stop_radius, PicardOptions, PicardState, PicardSummary};
use crate::pressure::{lpe_apply, PressureDecomposition, Source};
use crate::report::{Status, VerificationReport};
use crate::semigroup::{HeatInput, SemigroupPlan};

/// Number of seeded test fields for the weak residual.
pub const TEST_FIELDS: usize = 5;
/// Time windows below are given for a horizon of this length and scaled.
const REFERENCE_HORIZON: f64 = 0.25;
/// Relative closeness of the parasitic mild residual to `t|K|`.
pub const PARASITIC_MATCH: f64 = 0.05;
/// Smallest gap, in quadrature tolerances, that counts as a genuine failure.
pub const PARASITIC_GAP: f64 = 10.0;
pub const APRIORI_RADII: [f64; 3] = [0.5, 1.0, 2.0];

pub struct EquivalenceRun {
    pub reports: Vec<VerificationReport>,
    /// Picard trajectory on the base grid.
    pub velocity: GridField,
    /// Expansion pressure on the configured ball at the final time.
    pub pressure: PressureDecomposition,
    pub picard: PicardSummary,
}

fn solve(cfg: &ScenarioConfig, spec: &GridSpec, steps: usize) -> Result<PicardState> {
    let u0 = cfg.field.build()?;
    let plan = SemigroupPlan::new(spec, cfg.operator.padding, cfg.operator.time_nodes)?;
    let opts = PicardOptions {
        t_final: cfg.operator.t_final,
        n_steps: steps,
        max_iter: cfg.tolerance.max_iter,
        tol: cfg.tolerance.picard,
    };
    picard_solve(HeatInput::Analytic(&u0), &plan, &opts)
}

fn test_fields(cfg: &ScenarioConfig) -> Vec<VectorTestFunction> {
    let s = cfg.operator.t_final / REFERENCE_HORIZON;
    let radius = 2.0f64.min(cfg.grid.half_width - 1.0);
    let mut rng = suite_rng(cfg.seed, 9);
    (0..TEST_FIELDS)
        .map(|_| {
            let center = loop {
                let c = [0, 1, 2].map(|_| rng.gen_range(-0.5..0.5));
                if c.iter().map(|v| v * v).sum::<f64>() <= 0.25 {
                    break c;
                }
            };
            let axis = random_unit(&mut rng);
            let (a, b) = (rng.gen_range(0.01..0.05) * s, rng.gen_range(0.18..0.24) * s);
            VectorTestFunction::directional(axis, TestFunction::bump(center, radius).with_window(a, b))
        })
        .collect()
}

pub fn run_equivalence_suite(cfg: &ScenarioConfig) -> Result<EquivalenceRun> {
    let op = &cfg.operator;
    let tol = &cfg.tolerance;
    let lpe = op.lpe_options();
    lpe.validate(op.radius)?;
    let u0 = cfg.field.build()?;
    let coarse_grid = cfg.grid;
    let fine_grid = cfg.grid.refined(1.5);
    let coarse_spec = coarse_grid.spec()?;
    let fine_spec = fine_grid.spec()?;
    let fine_steps = (op.time_steps as f64 * 1.5).round() as usize;
    let scale = op.t_final / REFERENCE_HORIZON;
    let mut reports = Vec::new();

    let start = Instant::now();
    let coarse = solve(cfg, &coarse_spec, op.time_steps)?;
    let plan = SemigroupPlan::new(&coarse_spec, op.padding, op.time_nodes)?;
    let axis = coarse.velocity.spec.time.expect("picard trajectory has a time axis");
    let probe_times: Vec<f64> = axis.times().into_iter().skip(1).step_by(4).collect();
    let region = Region { center: [0.0; 3], radius: stop_radius(&coarse_spec) };
    let mild = mild_residual(HeatInput::Analytic(&u0), &coarse.velocity, &probe_times, region, &plan)?;
    let worst = mild.iter().map(|p| p.1).fold(0.0, f64::max);
    let bound = 2.0 * tol.picard;
    let mut rep = VerificationReport::new("equivalence.a_mild", "mild_residual", worst, bound, worst <= bound)
        .with("iterations", coarse.iterations as f64)
        .with("contraction", coarse.contraction())
        .with("gate", coarse.gate_value);
    for (t, r) in &mild {
        rep = rep.with(&format!("t={t:.4}"), *r);
    }
    reports.push(rep.with_params(params(cfg, Some(coarse_grid.n))).timed(start));

    // weak residual with the expansion pressure, coarse then refined
    let start = Instant::now();
    let fine = solve(cfg, &fine_spec, fine_steps)?;
    let zetas = test_fields(cfg);
    let provider = PressureProvider::Dlpe { opts: lpe, radius_factor: 1.0 };
    let mut worst = [0.0f64; 2];
    let mut rep = VerificationReport::new("equivalence.b_nse_dlpe", "nse_residual", 0.0, tol.nse, true);
    for (k, z) in zetas.iter().enumerate() {
        let a = nse_residual(Velocity::Grid(&coarse.velocity), &coarse_spec, provider, z)?;
        let b = nse_residual(Velocity::Grid(&fine.velocity), &fine_spec, provider, z)?;
        worst[0] = worst[0].max(a.residual.abs());
        worst[1] = worst[1].max(b.residual.abs());
        rep = rep.with(&format!("field{k}_n{}", coarse_grid.n), a.residual).with(&format!("field{k}_n{}", fine_grid.n), b.residual);
    }
    rep.value = worst[0];
    rep.status = Status::from_pass(worst[0] <= tol.nse && worst[1] <= worst[0]);
    let ratio = if worst[0] > 0.0 { worst[1] / worst[0] } else { 0.0 };
    reports.push(rep.with("coarse_max", worst[0]).with("refined_max", worst[1]).with("refined_ratio", ratio).with_params(params(cfg, Some(coarse_grid.n))).timed(start));

    // parasitic pair: u = g(t)e₁, p = sign·x₁g′(t)
    let start = Instant::now();
    let pair = make_parasitic(TimeProfile::linear([1.0, 0.0, 0.0]), op.parasitic_sign)?;
    let z = VectorTestFunction::directional(
        [1.0, 0.0, 0.0],
        TestFunction::bump([0.2, 0.0, -0.1], 1.0).with_window(0.05 * scale, 0.2 * scale),
    );
    let exact = nse_residual(Velocity::Analytic(&pair.velocity), &coarse_spec, PressureProvider::Parasitic(&pair), &z)?;
    let qt = exact.quad_tol();
    reports.push(
        VerificationReport::new("equivalence.c_parasitic_nse", "nse_residual", exact.residual.abs(), qt, exact.residual.abs() <= qt)
            .with("linear", exact.linear)
            .with("pressure", exact.pressure)
            .with_params(params(cfg, Some(coarse_grid.n)))
            .timed(start),
    );

    let start = Instant::now();
    let sampled = GridField::from_fn(coarse_spec.clone().with_time(axis), Rank::Vector, |x, t, o| {
        o.copy_from_slice(&pair.velocity.value(x, t))
    });
    let zero = GridField::zeros(coarse_spec.clone(), Rank::Vector);
    let k = region;
    let t = 0.2 * scale;
    let res = mild_residual(HeatInput::Grid(&zero), &sampled, &[t], k, &plan)?[0].1;
    let predicted = t * k.volume();
    let rel = (res - predicted).abs() / predicted;
    let mut rep = VerificationReport::new("equivalence.c_parasitic_mild", "mild_residual", res, 0.0, false).with("t_volume", predicted);
    if rel <= PARASITIC_MATCH {
        rep = rep.expected_failure("parasitic");
    }
    reports.push(rep.with_params(params(cfg, Some(coarse_grid.n))).timed(start));

    // the expansion pressure of a spatially constant flux has no gradient; the
    // flux never decays, so the cutoff needs the doubled box
    let start = Instant::now();
    let wide = GridSpec::cube(2.0 * coarse_grid.half_width, coarse_grid.n)?;
    let dlpe = nse_residual(Velocity::Analytic(&pair.velocity), &wide, provider, &z)?;
    let gap = (dlpe.residual - exact.residual).abs();
    let mut rep = VerificationReport::new("equivalence.c_parasitic_dlpe_gap", "grad_pressure_pair", gap, PARASITIC_GAP * qt, false)
        .with("dlpe_pressure", dlpe.pressure)
        .with("exact_pressure", exact.pressure);
    if gap >= PARASITIC_GAP * qt {
        rep = rep.expected_failure("parasitic");
    }
    reports.push(rep.with_params(params(cfg, Some(coarse_grid.n))).timed(start));

    let start = Instant::now();
    let h = fine_spec.spacing;
    let dt = op.t_final / fine_steps as f64;
    let phi = TestFunction::bump([0.1, 0.0, -0.1], 1.5f64.min(fine_grid.half_width - 1.0))
        .with_window(0.02 * scale, 0.23 * scale);
    let e = local_energy_check(&fine.velocity, &phi, &lpe)?;
    let bound = tol.energy_constant * (h * h + dt);
    reports.push(
        VerificationReport::new("energy.local_balance", "local_energy_check", e.gap(), bound, e.gap() <= bound && e.holds(bound))
            .with("lhs", e.lhs)
            .with("rhs", e.rhs)
            .with_params(params(cfg, Some(fine_grid.n)))
            .timed(start),
    );

    let start = Instant::now();
    let radii: Vec<f64> = APRIORI_RADII
        .iter()
        .copied()
        .filter(|&r| r >= 2.0 * h && APRIORI_C0 * r * r <= op.t_final)
        .collect();
    let ap = apriori_bound_check(&fine.velocity.time_slice(0), &fine.velocity, &radii, APRIORI_C0)?;
    let mut rep = VerificationReport::new(
        "energy.apriori_spread",
        "apriori_bound_check",
        ap.spread,
        tol.apriori_spread,
        ap.spread <= tol.apriori_spread && !ap.rows.is_empty(),
    );
    for row in &ap.rows {
        rep = rep.with(&format!("constant_r{}", row.radius), row.constant);
    }
    reports.push(rep.with_params(params(cfg, Some(fine_grid.n))).timed(start));

    let flux = coarse.velocity.outer_square()?;
    let pressure = lpe_apply(Source::Grid(&flux), &coarse_spec, op.center, op.radius, op.t_final, &lpe)?;
    Ok(EquivalenceRun { reports, picard: coarse.summary(), velocity: coarse.velocity, pressure })
}
