//! Composed Riesz transforms `R_iR_j` by Fourier multiplier, principal-value
//! quadrature and atom pairings, plus a sampled BMO seminorm.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec;
use crate::field::grid::dot;
use crate::field::quadrature::{composite, geometric_breaks, BallStencil, SphereRule};
use crate::field::{sym_index, GridField, GridSpec, Rank, TestFunction, SYM_MULT, SYM_PAIRS};
use crate::kernel::cz_all;
use crate::spectral::{Padded, C64};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RieszOptions {
    pub padding: f64,
    /// Value of the multiplier at `ξ = 0`.
    pub zero_mode: f64,
    /// Accept inputs that do not decay at the box boundary.
    pub allow_nondecaying: bool,
}

impl Default for RieszOptions {
    fn default() -> Self {
        Self { padding: 2.0, zero_mode: 0.0, allow_nondecaying: false }
    }
}

/// Decay threshold relative to the field maximum.
pub const DECAY_TOL: f64 = 1e-8;

/// `−ξ_iξ_j/|ξ|²`.
#[inline]
pub fn riesz_symbol(i: usize, j: usize, xi: [f64; 3], zero_mode: f64) -> f64 {
    let k2 = dot(xi, xi);
    if k2 == 0.0 {
        zero_mode
    } else {
        -xi[i] * xi[j] / k2
    }
}

fn check_decay(f: &GridField, opts: &RieszOptions) -> Result<()> {
    if !opts.allow_nondecaying && !f.decays(DECAY_TOL) {
        return Err(Error::PeriodicWrap);
    }
    Ok(())
}

/// `R_iR_j f` for a scalar field, slice by slice.
pub fn riesz_fft(f: &GridField, i: usize, j: usize, opts: &RieszOptions) -> Result<GridField> {
    f.expect_rank(Rank::Scalar)?;
    if i > 2 || j > 2 {
        return Err(Error::Invalid(format!("riesz index ({i},{j}) out of range")));
    }
    check_decay(f, opts)?;
    let padded = Padded::new(&f.spec, opts.padding)?;
    let plan = padded.plan();
    let mut out = GridField::zeros(f.spec.clone(), Rank::Scalar);
    for n in 0..f.nt() {
        let mut s = plan.forward(&padded.embed(f.slice(n, 0)));
        plan.for_each_mode(&mut s, false, |xi, v| *v *= riesz_symbol(i, j, xi, opts.zero_mode));
        out.slice_mut(n, 0).copy_from_slice(&padded.crop(&plan.inverse(s)));
    }
    Ok(out)
}

/// `Σ_ij R_iR_j f_ij` for a symmetric-tensor field: one inverse transform per slice.
pub fn riesz_contract(f: &GridField, opts: &RieszOptions) -> Result<GridField> {
    f.expect_rank(Rank::SymTensor)?;
    check_decay(f, opts)?;
    let padded = Padded::new(&f.spec, opts.padding)?;
    let mut out = GridField::zeros(f.spec.clone(), Rank::Scalar);
    for n in 0..f.nt() {
        let slices: Vec<&[f64]> = (0..6).map(|c| f.slice(n, c)).collect();
        let r = contract_slices(&padded, &slices, opts.zero_mode);
        out.slice_mut(n, 0).copy_from_slice(&r);
    }
    Ok(out)
}

/// `Σ_ij R_iR_j f_ij` on raw component slices embedded in `padded`.
pub fn contract_slices(padded: &Padded, comps: &[&[f64]], zero_mode: f64) -> Vec<f64> {
    let plan = padded.plan();
    let mut acc = vec![C64::new(0.0, 0.0); plan.spectral_len()];
    for (c, &(i, j)) in SYM_PAIRS.iter().enumerate() {
        if comps[c].iter().all(|v| *v == 0.0) {
            continue;
        }
        let mut s = plan.forward(&padded.embed(comps[c]));
        let m = SYM_MULT[c];
        plan.for_each_mode(&mut s, false, |xi, v| *v *= m * riesz_symbol(i, j, xi, zero_mode));
        for (a, b) in acc.iter_mut().zip(&s) {
            *a += b;
        }
    }
    padded.crop(&plan.inverse(acc))
}

/// Inner radius policy for principal-value evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum InnerRadius {
    /// Multiple of the grid spacing (default `4h`).
    Spacings(f64),
    Absolute(f64),
}

impl Default for InnerRadius {
    fn default() -> Self {
        InnerRadius::Spacings(4.0)
    }
}

impl InnerRadius {
    pub fn resolve(&self, h: f64) -> f64 {
        match *self {
            InnerRadius::Spacings(k) => k * h,
            InnerRadius::Absolute(r) => r,
        }
    }
}

/// Principal value `R_iR_j f(x)` at grid node `node` from a lattice sum:
/// `−δ_ij f(x)/3 + Σ_{|d|<r₀} K(d)(f(x−d) − f(x)) h³ + Σ_{|d|≥r₀} K(d) f(x−d) h³`.
pub fn riesz_pv_grid(f: &GridField, i: usize, j: usize, node: usize, policy: InnerRadius) -> Result<f64> {
    Ok(pv_grid_all(f, node, policy)?[sym_index(i, j)])
}

/// All six principal values at one node (static scalar field).
pub fn pv_grid_all(f: &GridField, node: usize, policy: InnerRadius) -> Result<[f64; 6]> {
    f.expect_rank(Rank::Scalar)?;
    let spec = &f.spec;
    let h = spec.spacing;
    let r0 = policy.resolve(h);
    let x = spec.point(node);
    if spec.boundary_distance(x) < r0 {
        return Err(Error::NearBoundary);
    }
    let data = f.slice(0, 0);
    let fx = data[node];
    let [nx, ny, nz] = spec.counts;
    let [ci, cj, ck] = spec.ijk(node);
    let r02 = r0 * r0;
    let planes = exec::map(nx, |a| {
        let mut acc = [0.0; 6];
        let dx = (ci as f64 - a as f64) * h;
        for b in 0..ny {
            let dy = (cj as f64 - b as f64) * h;
            let row = (a * ny + b) * nz;
            for c in 0..nz {
                if a == ci && b == cj && c == ck {
                    continue;
                }
                let d = [dx, dy, (ck as f64 - c as f64) * h];
                let r2 = dot(d, d);
                let v = if r2 < r02 { data[row + c] - fx } else { data[row + c] };
                if v == 0.0 {
                    continue;
                }
                let k = cz_all(d);
                for m in 0..6 {
                    acc[m] += k[m] * v;
                }
            }
        }
        acc
    });
    let h3 = spec.cell_volume();
    let mut out = [0.0; 6];
    for m in 0..6 {
        let s = crate::exec::sum(planes.len(), |p| planes[p][m]);
        let (i, j) = SYM_PAIRS[m];
        out[m] = s * h3 - if i == j { fx / 3.0 } else { 0.0 };
    }
    Ok(out)
}

/// Angular degree for a radial panel ending at `r` when the source varies on `scale`.
pub fn sphere_degree(r: f64, scale: f64) -> usize {
    if !scale.is_finite() {
        return 8;
    }
    ((6.0 * r / scale).ceil() as usize + 10).clamp(10, 160)
}

/// `Σ_panels Σ_r w_r r² Σ_dir w_d g(dir, r)` over spherical shells between `breaks`.
pub fn spherical_integral<G>(breaks: &[f64], nodes: usize, scale: f64, g: G) -> f64
where
    G: Fn([f64; 3], f64) -> f64 + Sync + Send,
{
    let panels: Vec<(f64, f64)> = breaks.windows(2).map(|w| (w[0], w[1])).collect();
    let parts = exec::map(panels.len(), |p| {
        let (a, b) = panels[p];
        let rule = SphereRule::for_degree(sphere_degree(b, scale));
        let radial = composite(&[a, b], nodes);
        let mut acc = 0.0;
        for &(r, wr) in &radial {
            let mut s = 0.0;
            for (d, wd) in rule.directions.iter().zip(&rule.weights) {
                s += wd * g(*d, r);
            }
            acc += wr * r * r * s;
        }
        acc
    });
    parts.iter().sum()
}

/// Radial breakpoints: uniform panels of width `first` up to `2·first`, then geometric.
pub fn radial_breaks(r0: f64, r_max: f64, first: f64) -> Vec<f64> {
    geometric_breaks(r0, r_max, first, 1.5)
}

/// Principal value of `R_iR_j f(x)` for a closed-form `f`, by spherical
/// quadrature around `x` with Hölder subtraction inside `r₀` and the far part
/// out to `r_far`.
pub fn riesz_pv_analytic<F>(f: F, i: usize, j: usize, x: [f64; 3], r0: f64, r_far: f64, scale: f64) -> f64
where
    F: Fn([f64; 3]) -> f64 + Sync + Send,
{
    let fx = f(x);
    let c = sym_index(i, j);
    let shift = |d: [f64; 3], r: f64| [x[0] + r * d[0], x[1] + r * d[1], x[2] + r * d[2]];
    let inner = spherical_integral(&[0.0, r0], 24, scale, |d, r| {
        cz_all(d)[c] / (r * r * r) * (f(shift(d, r)) - fx)
    });
    let breaks = radial_breaks(r0, r_far.max(r0), 0.5 * r0.min(scale));
    let outer = spherical_integral(&breaks, 12, scale, |d, r| cz_all(d)[c] / (r * r * r) * f(shift(d, r)));
    let diag = if i == j { fx / 3.0 } else { 0.0 };
    inner + outer - diag
}

/// A bounded, compactly supported, mean-zero test function.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Atom {
    pub psi: TestFunction,
    /// `sup |ψ|`, recorded for normalization.
    pub sup: f64,
    /// Grid sum `Σ ψ h³` (zero up to rounding for atoms built on a grid).
    pub mass: f64,
}

impl Atom {
    /// Mean-zero profile tuned so its grid sum vanishes on `grid`.
    pub fn on_grid(center: [f64; 3], radius: f64, grid: &GridSpec) -> Result<Self> {
        Self::from_test_function(TestFunction::mean_zero_on(center, radius, grid), grid)
    }

    pub fn from_test_function(psi: TestFunction, grid: &GridSpec) -> Result<Self> {
        if !psi.is_mean_zero() {
            return Err(Error::Invalid("atom needs a mean-zero profile".into()));
        }
        psi.check_inside(grid)?;
        let vals = sample_spatial(&psi, grid);
        let sup = vals.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
        let mass = exec::sum(vals.len(), |i| vals[i]) * grid.cell_volume();
        Ok(Self { psi, sup, mass })
    }
}

/// Spatial factor of `ψ` (amplitude included) at every node of `grid`.
pub fn sample_spatial(psi: &TestFunction, grid: &GridSpec) -> Vec<f64> {
    let mut out = vec![0.0; grid.len()];
    for idx in grid.ball_indices(psi.center, psi.radius) {
        out[idx] = psi.spatial(grid.point(idx)).value;
    }
    out
}

/// `∫ f · R_iR_jψ` with `R_iR_jψ` from the multiplier (`ψ` is compact).
pub fn duality_pair(f: &GridField, atom: &Atom, i: usize, j: usize, opts: &RieszOptions) -> Result<f64> {
    f.expect_rank(Rank::Scalar)?;
    atom.psi.check_inside(&f.spec)?;
    let spec = f.spec.spatial();
    let psi = GridField::from_data(spec.clone(), Rank::Scalar, sample_spatial(&atom.psi, &spec))?;
    let o = RieszOptions { allow_nondecaying: true, ..*opts };
    let r = riesz_fft(&psi, i, j, &o)?;
    let rd = r.slice(0, 0);
    let fd = f.slice(0, 0);
    Ok(exec::sum(rd.len(), |k| fd[k] * rd[k]) * spec.cell_volume())
}

#[derive(Clone, Debug, Serialize)]
pub struct BmoEstimate {
    /// `(radius, sup over sampled balls of the mean oscillation)`.
    pub per_radius: Vec<(f64, f64)>,
    pub seminorm: f64,
}

/// `sup_B |B|⁻¹∫_B |f − f_B|` over balls of the given radii centered at grid nodes.
pub fn bmo_seminorm(f: &GridField, radii: &[f64]) -> Result<BmoEstimate> {
    f.expect_rank(Rank::Scalar)?;
    if radii.len() < 2 {
        return Err(Error::Invalid("bmo seminorm needs at least two radii".into()));
    }
    let (lo, hi) = radii.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
    if hi < 10.0 * lo * (1.0 - 1e-9) {
        return Err(Error::Invalid("bmo radii must span a decade".into()));
    }
    let data = f.slice(0, 0);
    let mut per_radius = Vec::with_capacity(radii.len());
    for &r in radii {
        if r < 2.0 * f.spec.spacing {
            return Err(Error::Invalid(format!("ball radius {r} below 2h")));
        }
        let st = BallStencil::new(r, f.spec.spacing);
        let centers = st.admissible_centers(&f.spec);
        if centers.is_empty() {
            return Err(Error::DomainTooSmall);
        }
        let stride = (centers.len() / 2048).max(1);
        let sampled: Vec<usize> = centers.iter().copied().step_by(stride).collect();
        let offs = st.linear_offsets(&f.spec);
        let vol = st.volume();
        let osc = exec::max(sampled.len(), |c| {
            let base = sampled[c] as isize;
            let mut mean = 0.0;
            for (o, w) in offs.iter().zip(&st.weights) {
                mean += w * data[(base + o) as usize];
            }
            mean /= vol;
            let mut dev = 0.0;
            for (o, w) in offs.iter().zip(&st.weights) {
                dev += w * (data[(base + o) as usize] - mean).abs();
            }
            dev / vol
        });
        per_radius.push((r, osc));
    }
    let seminorm = per_radius.iter().fold(0.0, |m: f64, p| m.max(p.1));
    Ok(BmoEstimate { per_radius, seminorm })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(spec: &GridSpec, s2: f64) -> GridField {
        GridField::from_fn(spec.clone(), Rank::Scalar, |x, _, o| o[0] = (-dot(x, x) / (2.0 * s2)).exp())
    }

    #[test]
    fn trace_identity_on_gaussian() {
        let spec = GridSpec::cube(4.0, 33).unwrap();
        let f = gaussian(&spec, 0.4);
        let o = RieszOptions::default();
        let mut sum = GridField::zeros(spec.clone(), Rank::Scalar);
        for i in 0..3 {
            sum.axpy(1.0, &riesz_fft(&f, i, i, &o).unwrap()).unwrap();
        }
        // the zero mode removes the padded-box mean: compare modulo a constant
        let n = spec.len() as f64;
        let shift = exec::sum(spec.len(), |k| sum.data[k] + f.data[k]) / n;
        assert!(shift.abs() < 2e-3);
        let err = exec::sum(spec.len(), |k| (sum.data[k] + f.data[k] - shift).powi(2)).sqrt();
        let nrm = exec::sum(spec.len(), |k| f.data[k].powi(2)).sqrt();
        assert!(err / nrm < 1e-10, "{}", err / nrm);
    }

    #[test]
    fn wrap_guard() {
        let spec = GridSpec::cube(1.0, 9).unwrap();
        let f = GridField::from_fn(spec, Rank::Scalar, |_, _, o| o[0] = 1.0);
        assert!(matches!(riesz_fft(&f, 0, 0, &RieszOptions::default()), Err(Error::PeriodicWrap)));
    }

    #[test]
    fn pv_constant_and_analytic_agree() {
        let spec = GridSpec::cube(2.0, 21).unwrap();
        let f = GridField::from_fn(spec.clone(), Rank::Scalar, |_, _, o| o[0] = 2.0);
        let node = spec.node_of([0.0; 3]).unwrap();
        let v = pv_grid_all(&f, node, InnerRadius::default()).unwrap();
        // truncated far sum of a constant is small but not exactly zero
        assert!((v[0] + 2.0 / 3.0).abs() < 0.05, "{v:?}");
        assert!(v[1].abs() < 1e-12);
        let a = riesz_pv_analytic(|_| 2.0, 0, 0, [0.0; 3], 0.2, 5.0, f64::INFINITY);
        assert!((a + 2.0 / 3.0).abs() < 1e-10, "{a}");
    }

    #[test]
    fn bmo_of_linear_grows() {
        let spec = GridSpec::cube(6.0, 49).unwrap();
        let f = GridField::from_fn(spec, Rank::Scalar, |x, _, o| o[0] = x[0]);
        let b = bmo_seminorm(&f, &[0.5, 5.0]).unwrap();
        // mean |x₁| over a ball of radius r is 3r/8
        for (r, v) in &b.per_radius {
            assert!((v - 0.375 * r).abs() < 0.03 * r, "{r} {v}");
        }
    }
}
