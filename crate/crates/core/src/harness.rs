//! Residual checks tying the mild and distributional formulations together:
//! weak Navier–Stokes residual, mild residual, local energy balance, the
//! a priori local-energy bound and the scaled Morrey functional.

use serde::Serialize;

use crate::analytic::{AnalyticField, ParasiticPair, TensorSource};
use crate::error::{Error, Result};
use crate::exec;
use crate::field::grid::{add, dot, scale};
use crate::field::quadrature::{composite, uniform_breaks, SphereRule};
use crate::field::uloc::{ball_integral_at, ball_sums};
use crate::field::{uloc_norm, GridField, GridSpec, Profile, Rank, TestFunction, VectorKind, VectorTestFunction};
use crate::pressure::{grad_pressure_pair, lpe_apply, LpeOptions, Source};
use crate::semigroup::{mild_rhs, HeatInput, SemigroupPlan};

/// Relative quadrature tolerance applied to the sum of term magnitudes.
pub const QUAD_REL_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug)]
pub enum Velocity<'a> {
    /// Trajectory with a time axis.
    Grid(&'a GridField),
    Analytic(&'a AnalyticField),
}

#[derive(Clone, Copy, Debug)]
pub enum PressureProvider<'a> {
    Zero,
    /// Expansion on the ball `B_{factor·r}(c)` around each test function's support.
    Dlpe { opts: LpeOptions, radius_factor: f64 },
    /// Closed-form `∇p` of the parasitic pair.
    Parasitic(&'a ParasiticPair),
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct NseTerms {
    /// `∫∫ u·(∂_t + Δ)ζ`.
    pub linear: f64,
    /// `∫∫ u_i u_j ∂_i ζ_j`.
    pub nonlinear: f64,
    /// `⟨∇p, ζ⟩`.
    pub pressure: f64,
    pub residual: f64,
}

impl NseTerms {
    pub fn scale(&self) -> f64 {
        self.linear.abs() + self.nonlinear.abs() + self.pressure.abs()
    }

    pub fn quad_tol(&self) -> f64 {
        QUAD_REL_TOL * self.scale()
    }
}

/// Time nodes and weights covering the window of `psi`.
fn window_nodes(psi: &TestFunction, u: &Velocity) -> Result<Vec<(f64, f64)>> {
    let (a, b) = psi.window.ok_or(Error::SupportEscapes)?;
    match u {
        Velocity::Grid(f) => {
            let ax = f.spec.time.ok_or(Error::MissingTimeAxis)?;
            if a < ax.t0 - 1e-12 || b > ax.t_end() + 1e-12 {
                return Err(Error::SupportEscapes);
            }
            // panels break at samples so the interpolated velocity is smooth on each
            let mut breaks = vec![a];
            breaks.extend(ax.times().into_iter().filter(|&t| t > a + 1e-12 && t < b - 1e-12));
            breaks.push(b);
            Ok(composite(&breaks, 6))
        }
        Velocity::Analytic(_) => Ok(composite(&uniform_breaks(a, b, 4), 16)),
    }
}

/// Spatial quadrature over the support ball: grid nodes for grid velocities,
/// a spherical product rule for closed-form ones.
struct SpaceNodes {
    points: Vec<[f64; 3]>,
    weights: Vec<f64>,
    /// Grid index of each point when the velocity is sampled.
    grid: Option<Vec<usize>>,
}

impl SpaceNodes {
    fn new(u: &Velocity, spec: &GridSpec, psi: &TestFunction) -> Self {
        match u {
            Velocity::Grid(_) => {
                let idx = spec.ball_indices(psi.center, psi.radius);
                let h3 = spec.cell_volume();
                Self { points: idx.iter().map(|&i| spec.point(i)).collect(), weights: vec![h3; idx.len()], grid: Some(idx) }
            }
            Velocity::Analytic(_) => {
                let radial = composite(&uniform_breaks(0.0, psi.radius, 8), 12);
                let sphere = SphereRule::for_degree(16);
                let mut points = Vec::new();
                let mut weights = Vec::new();
                for &(r, wr) in &radial {
                    for (d, ws) in sphere.directions.iter().zip(&sphere.weights) {
                        points.push(add(psi.center, scale(*d, r)));
                        weights.push(wr * ws * r * r);
                    }
                }
                Self { points, weights, grid: None }
            }
        }
    }

    /// Velocity at point `m`, linear in time between samples `n` and `n+1`.
    fn velocity(&self, u: &Velocity, m: usize, t: f64, slot: (usize, f64)) -> [f64; 3] {
        match u {
            Velocity::Grid(f) => {
                let i = self.grid.as_ref().expect("grid nodes")[m];
                let (n, w) = slot;
                let lo = f.at(n, i);
                if w == 0.0 {
                    return [lo[0], lo[1], lo[2]];
                }
                let hi = f.at(n + 1, i);
                [0, 1, 2].map(|c| (1.0 - w) * lo[c] + w * hi[c])
            }
            Velocity::Analytic(a) => a.value(self.points[m], t),
        }
    }
}

/// `∫∫ u·(∂_t+Δ)ζ + u_iu_j∂_iζ_j − ⟨∇p, ζ⟩`.
pub fn nse_residual(u: Velocity, spec: &GridSpec, pressure: PressureProvider, zeta: &VectorTestFunction) -> Result<NseTerms> {
    let spec = spec.spatial();
    if let Velocity::Grid(f) = u {
        f.expect_rank(Rank::Vector)?;
        if f.spec.spatial() != spec {
            return Err(Error::Invalid("velocity must live on the quadrature grid".into()));
        }
    }
    zeta.scalar.check_inside(&spec)?;
    let nodes = window_nodes(&zeta.scalar, &u)?;
    let space = SpaceNodes::new(&u, &spec, &zeta.scalar);
    let axis = match u {
        Velocity::Grid(f) => f.spec.time,
        Velocity::Analytic(_) => None,
    };
    let mut linear = 0.0;
    let mut nonlinear = 0.0;
    for &(t, w) in &nodes {
        let slot = match axis {
            Some(a) => a.locate(t)?,
            None => (0, 0.0),
        };
        let (l, q) = exec::map(space.points.len(), |m| {
            let d = zeta.eval(space.points[m], t);
            let v = space.velocity(&u, m, t, slot);
            let lin = (0..3).map(|c| v[c] * (d.dt[c] + d.lap[c])).sum::<f64>();
            let mut nl = 0.0;
            for a in 0..3 {
                for b in 0..3 {
                    nl += v[a] * v[b] * d.jac[a][b];
                }
            }
            (lin * space.weights[m], nl * space.weights[m])
        })
        .into_iter()
        .fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
        linear += w * l;
        nonlinear += w * q;
    }
    let pressure = match pressure {
        PressureProvider::Zero => 0.0,
        PressureProvider::Parasitic(pair) => {
            // ∇p is spatially constant, so only ∫ζ dx is needed
            let z = if zeta.kind == VectorKind::Curl {
                [0.0; 3]
            } else {
                let s: f64 = space.points.iter().zip(&space.weights).map(|(x, w)| w * zeta.scalar.spatial(*x).value).sum();
                zeta.axis.map(|a| a * s)
            };
            nodes.iter().map(|&(t, w)| w * zeta.scalar.temporal(t).0 * dot(pair.pressure_gradient(t), z)).sum()
        }
        PressureProvider::Dlpe { opts, radius_factor } => {
            let radius = zeta.scalar.radius * radius_factor.max(1.0);
            match u {
                Velocity::Grid(f) => {
                    let flux = f.outer_square()?;
                    grad_pressure_pair(Source::Grid(&flux), &spec, zeta, zeta.scalar.center, radius, &opts)?
                }
                Velocity::Analytic(a) => {
                    let src = TensorSource::Outer(a.clone());
                    grad_pressure_pair(Source::Analytic(&src), &spec, zeta, zeta.scalar.center, radius, &opts)?
                }
            }
        }
    };
    Ok(NseTerms { linear, nonlinear, pressure, residual: linear + nonlinear - pressure })
}

/// Ball `K = B_r(c)` snapped to the nearest grid node, with sub-cell weights.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Region {
    pub center: [f64; 3],
    pub radius: f64,
}

impl Region {
    pub fn volume(&self) -> f64 {
        4.0 / 3.0 * std::f64::consts::PI * self.radius.powi(3)
    }

    fn node(&self, spec: &GridSpec) -> Result<usize> {
        if !spec.contains_ball(self.center, self.radius) {
            return Err(Error::SupportEscapes);
        }
        let h = spec.spacing;
        let ijk: Vec<usize> = (0..3)
            .map(|a| (((self.center[a] - spec.origin[a]) / h).round().max(0.0) as usize).min(spec.counts[a] - 1))
            .collect();
        Ok(spec.index(ijk[0], ijk[1], ijk[2]))
    }

    /// `∫_K |f(·, t_n)|`.
    pub fn l1(&self, f: &GridField, n: usize) -> Result<f64> {
        let node = self.node(&f.spec)?;
        Ok(ball_integral_at(f, n, node, self.radius, 1.0))
    }
}

/// `(t, ‖u(t) − mild_rhs(u₀,u,t)‖_{L¹(K)})` per requested time.
pub fn mild_residual(
    u0: HeatInput,
    u: &GridField,
    t_list: &[f64],
    k: Region,
    plan: &SemigroupPlan,
) -> Result<Vec<(f64, f64)>> {
    let rhs = mild_rhs(u0, u, t_list, plan)?;
    t_list
        .iter()
        .zip(rhs)
        .map(|(&t, r)| {
            let mut d = u.slice_at_time(t)?;
            d.axpy(-1.0, &r)?;
            Ok((t, k.l1(&d, 0)?))
        })
        .collect()
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct LocalEnergy {
    /// `2∫∫|∇^h u|²φ`.
    pub lhs: f64,
    /// `∫∫|u|²(∂_tφ+Δφ) + ∫∫(|u|²+2p)(u·∇φ)`.
    pub rhs: f64,
}

impl LocalEnergy {
    pub fn gap(&self) -> f64 {
        (self.lhs - self.rhs).abs()
    }

    /// Inequality `LHS ≤ RHS + tol`.
    pub fn holds(&self, tol: f64) -> bool {
        self.lhs <= self.rhs + tol
    }
}

/// Both sides of the local energy balance with the expansion pressure on the
/// support ball of `phi`.
pub fn local_energy_check(u: &GridField, phi: &TestFunction, opts: &LpeOptions) -> Result<LocalEnergy> {
    u.expect_rank(Rank::Vector)?;
    if phi.amplitude < 0.0 || !matches!(phi.profile, Profile::Bump) {
        return Err(Error::NegativeTestFunction);
    }
    let spec = u.spec.spatial();
    phi.check_inside(&spec)?;
    let nodes = window_nodes(phi, &Velocity::Grid(u))?;
    let axis = u.spec.time.ok_or(Error::MissingTimeAxis)?;
    let flux = u.outer_square()?;
    let h3 = spec.cell_volume();
    let mut pressures: Vec<Option<GridField>> = vec![None; axis.nt];
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for &(t, w) in &nodes {
        let (n, frac) = axis.locate(t)?;
        let upper = if frac > 0.0 { n + 1 } else { n };
        for k in [n, upper] {
            if pressures[k].is_none() {
                let p = lpe_apply(Source::Grid(&flux), &spec, phi.center, phi.radius, axis.time(k), opts)?;
                pressures[k] = Some(p.total());
            }
        }
        // linear in time between samples, for velocity and pressure alike
        let mut vel = u.time_slice(n).scaled(1.0 - frac);
        vel.axpy(frac, &u.time_slice(upper))?;
        let mut pres = pressures[n].clone().expect("cached").scaled(1.0 - frac);
        pres.axpy(frac, pressures[upper].as_ref().expect("cached"))?;
        let grad = vel.gradient_energy();
        let idx = spec.ball_indices(phi.center, phi.radius);
        let (l, r) = exec::map(idx.len(), |m| {
            let i = idx[m];
            let x = spec.point(i);
            let v = vel.at(0, i);
            let v = [v[0], v[1], v[2]];
            let u2 = dot(v, v);
            let l = 2.0 * grad.get(0, 0, i) * phi.value(x, t);
            let r = u2 * (phi.dt(x, t) + phi.laplacian(x, t)) + (u2 + 2.0 * pres.get(0, 0, i)) * dot(v, phi.grad(x, t));
            (l, r)
        })
        .into_iter()
        .fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
        lhs += w * l * h3;
        rhs += w * r * h3;
    }
    Ok(LocalEnergy { lhs, rhs })
}

#[derive(Clone, Debug, Serialize)]
pub struct AprioriRow {
    pub radius: f64,
    /// `c₀·min{(N_r⁰)⁻², 1}`.
    pub sigma: f64,
    /// `A₀(r) = r·N_r⁰`.
    pub a0: f64,
    pub lhs: f64,
    /// Smallest admissible constant `lhs / a0`.
    pub constant: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct AprioriBound {
    pub rows: Vec<AprioriRow>,
    /// `max C / min C` over the radii.
    pub spread: f64,
}

/// Default `c₀` in `σ = c₀·min{(N_r⁰)⁻², 1}`.
pub const APRIORI_C0: f64 = 1.0 / 16.0;

/// Measured `esssup_t sup_x ½∫_{B_r}|u|² + sup_x ∫₀^{σr²}∫_{B_r}|∇^h u|²` against `A₀(r)`.
pub fn apriori_bound_check(u0: &GridField, u: &GridField, radii: &[f64], c0: f64) -> Result<AprioriBound> {
    u.expect_rank(Rank::Vector)?;
    let axis = u.spec.time.ok_or(Error::MissingTimeAxis)?;
    let u0 = u0.time_slice(0);
    let grad = u.gradient_energy();
    let mut rows = Vec::new();
    for &r in radii {
        let n0 = smallness_at(&u0, r)?;
        let sigma = c0 * if n0 > 0.0 { (1.0 / (n0 * n0)).min(1.0) } else { 1.0 };
        let horizon = axis.t0 + sigma * r * r;
        if horizon > axis.t_end() + 1e-12 {
            return Err(Error::TrajectoryTooShort { needed: horizon, have: axis.t_end() });
        }
        let last = (0..axis.nt).rev().find(|&n| axis.time(n) <= horizon + 1e-12).unwrap_or(0);
        let mut energy: f64 = 0.0;
        for n in 0..=last {
            let s = u.time_slice(n);
            energy = energy.max(0.5 * uloc_norm(&s, 2.0, r)?.powi(2));
        }
        // trapezoid on [t₀, t_last] of the dissipation density
        let mut dens = vec![0.0; u.spec.len()];
        for n in 0..=last {
            let w = if last == 0 {
                0.0
            } else if n == 0 || n == last {
                0.5 * axis.dt
            } else {
                axis.dt
            };
            if w == 0.0 {
                continue;
            }
            for (d, g) in dens.iter_mut().zip(grad.slice(n, 0)) {
                *d += w * g;
            }
        }
        let li = ball_sums(&grad.time_slice(0), r, &dens)?;
        let dissipation = li.values.iter().copied().fold(0.0, f64::max);
        let lhs = energy + dissipation;
        let a0 = r * n0;
        let constant = if a0 > 0.0 { lhs / a0 } else { 0.0 };
        rows.push(AprioriRow { radius: r, sigma, a0, lhs, constant });
    }
    let cs: Vec<f64> = rows.iter().map(|r| r.constant).filter(|c| *c > 0.0).collect();
    let spread = if cs.is_empty() {
        1.0
    } else {
        cs.iter().copied().fold(0.0, f64::max) / cs.iter().copied().fold(f64::INFINITY, f64::min)
    };
    Ok(AprioriBound { rows, spread })
}

/// `sup_x (1/r)∫_{B_r(x)}|u|²` for a static field.
fn smallness_at(u: &GridField, r: f64) -> Result<f64> {
    Ok(uloc_norm(u, 2.0, r)?.powi(2) / r)
}

/// The scaled Morrey functional `sup_x (1/r)∫_{B_r(x)}|u(·,t)|²`.
pub fn smallness_functional(u: &GridField, t: f64, r: f64) -> Result<f64> {
    let slice = if u.spec.time.is_some() { u.slice_at_time(t)? } else { u.time_slice(0) };
    smallness_at(&slice, r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{make_parasitic, TimeProfile};
    use crate::field::TimeAxis;

    #[test]
    fn zero_flow_has_zero_residuals() {
        let spec = GridSpec::cube(3.0, 16).unwrap().with_time(TimeAxis::uniform(0.2, 8).unwrap());
        let u = GridField::zeros(spec.clone(), Rank::Vector);
        let z = VectorTestFunction::directional([1.0, 0.0, 0.0], TestFunction::bump([0.0; 3], 1.0).with_window(0.05, 0.15));
        let r = nse_residual(Velocity::Grid(&u), &spec, PressureProvider::Zero, &z).unwrap();
        assert_eq!(r.residual, 0.0);
        let phi = TestFunction::bump([0.0; 3], 1.0).with_window(0.05, 0.15);
        let e = local_energy_check(&u, &phi, &LpeOptions::default()).unwrap();
        assert_eq!((e.lhs, e.rhs), (0.0, 0.0));
    }

    #[test]
    fn parasitic_weak_residual_cancels() {
        let pair = make_parasitic(TimeProfile::linear([1.0, 0.0, 0.0]), -1.0).unwrap();
        let spec = GridSpec::cube(3.0, 24).unwrap();
        let z = VectorTestFunction::directional([1.0, 0.0, 0.0], TestFunction::bump([0.2, 0.0, -0.1], 1.0).with_window(0.05, 0.2));
        let r = nse_residual(Velocity::Analytic(&pair.velocity), &spec, PressureProvider::Parasitic(&pair), &z).unwrap();
        assert!(r.residual.abs() <= r.quad_tol(), "{r:?}");
    }

    #[test]
    fn negative_weight_is_rejected() {
        let spec = GridSpec::cube(3.0, 16).unwrap().with_time(TimeAxis::uniform(0.2, 8).unwrap());
        let u = GridField::zeros(spec, Rank::Vector);
        let phi = TestFunction::mean_zero([0.0; 3], 1.0).with_window(0.05, 0.15);
        assert!(matches!(local_energy_check(&u, &phi, &LpeOptions::default()), Err(Error::NegativeTestFunction)));
    }

    #[test]
    fn constant_field_smallness() {
        let spec = GridSpec::cube(3.0, 41).unwrap();
        let u = GridField::from_fn(spec, Rank::Vector, |_, _, o| o.copy_from_slice(&[1.0, 2.0, 2.0]));
        let r = 1.0;
        let v = smallness_functional(&u, 0.0, r).unwrap();
        let exact = 9.0 * 4.0 / 3.0 * std::f64::consts::PI * r * r;
        assert!((v - exact).abs() < 1e-2 * exact, "{v} {exact}");
    }
}
