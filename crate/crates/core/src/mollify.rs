//! Space-time mollification with a one-sided time profile, and the mollified
//! pressure and velocity built from it.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec;
use crate::field::grid::dist2;
use crate::field::testfn::bump;
use crate::field::{spacetime_uloc_norm, GridField, Rank};
use crate::pressure::{lpe_apply, LpeOptions, PressureDecomposition, Source};
use crate::semigroup::{duhamel, heat_apply, HeatInput, SemigroupPlan};
use crate::spectral::Padded;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MollifierSpec {
    pub eps: f64,
}

impl MollifierSpec {
    pub fn new(eps: f64) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(Error::Invalid(format!("mollifier width must be positive, got {eps}")));
        }
        Ok(Self { eps })
    }

    fn check_space(&self, h: f64) -> Result<()> {
        if self.eps < 2.0 * h - 1e-12 {
            return Err(Error::MollifierUnderResolved { eps: self.eps });
        }
        Ok(())
    }

    /// Spatial weights `bump(|d|/ε)` normalized to unit discrete sum.
    pub fn spatial_weights(&self, h: f64) -> Vec<([isize; 3], f64)> {
        let m = (self.eps / h).ceil() as isize;
        let mut out = Vec::new();
        for i in -m..=m {
            for j in -m..=m {
                for k in -m..=m {
                    let d = [i as f64 * h, j as f64 * h, k as f64 * h];
                    let s = dist2(d, [0.0; 3]).sqrt() / self.eps;
                    let w = bump(s);
                    if w > 0.0 {
                        out.push(([i, j, k], w));
                    }
                }
            }
        }
        let total: f64 = out.iter().map(|p| p.1).sum();
        out.iter_mut().for_each(|p| p.1 /= total);
        out
    }

    /// Weights on lags `k·dt ∈ [0, ε]` from `bump(2τ/ε − 1)`, unit sum.
    pub fn temporal_weights(&self, dt: f64) -> Vec<f64> {
        let kmax = (self.eps / dt + 1e-9).floor() as usize;
        let mut w: Vec<f64> = (0..=kmax).map(|k| bump(2.0 * k as f64 * dt / self.eps - 1.0)).collect();
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= total);
        w
    }
}

#[derive(Clone, Debug)]
pub struct Mollified {
    pub field: GridField,
    /// `‖F^ε‖_{L²(Q)} / ‖F‖_{L²(Q*)}` on an interior cylinder and its ε-enlargement.
    pub young_ratio: f64,
    /// `‖F^ε‖_∞ / ‖F‖_{L¹_uloc}` and the a-priori bound on it from the largest weight.
    pub linf_constant: f64,
    pub linf_bound: f64,
}

/// Spatial convolution with the normalized bump via a padded FFT; values
/// beyond the grid count as zero.
pub fn mollify_spatial(f: &GridField, eps: f64) -> Result<GridField> {
    let m = MollifierSpec::new(eps)?;
    let spec = f.spec.spatial();
    m.check_space(spec.spacing)?;
    let reach = (eps / spec.spacing).ceil() as usize;
    let factor = 1.0 + (reach as f64 + 1.0) / spec.counts.iter().copied().min().unwrap_or(1) as f64;
    let padded = Padded::new(&spec, factor.max(1.5))?;
    let plan = padded.plan();
    let dims = plan.dims;
    let mut kernel = vec![0.0; plan.real_len()];
    for (off, w) in m.spatial_weights(spec.spacing) {
        let idx: Vec<usize> = (0..3).map(|a| off[a].rem_euclid(dims[a] as isize) as usize).collect();
        kernel[(idx[0] * dims[1] + idx[1]) * dims[2] + idx[2]] += w;
    }
    let khat = plan.forward(&kernel);
    let mut out = f.clone();
    for t in 0..f.nt() {
        for c in 0..f.components() {
            let mut s = plan.forward(&padded.embed(f.slice(t, c)));
            for (v, k) in s.iter_mut().zip(&khat) {
                *v *= *k;
            }
            let r = padded.crop(&plan.inverse(s));
            out.slice_mut(t, c).copy_from_slice(&r);
        }
    }
    Ok(out)
}

/// `F^ε = η_ε ∗_{x,t} F` with `η` supported in `B(0,1)×[0,1]` and `F` extended by
/// zero before the first time node.
pub fn mollify(f: &GridField, eps: f64) -> Result<Mollified> {
    let axis = f.spec.time.ok_or(Error::MissingTimeAxis)?;
    let m = MollifierSpec::new(eps)?;
    m.check_space(f.spec.spacing)?;
    if eps < 2.0 * axis.dt - 1e-12 {
        return Err(Error::MollifierUnderResolved { eps });
    }
    let lagged = mollify_time(f, &m, axis.dt);
    let field = mollify_spatial(&lagged, eps)?;
    let young_ratio = young_ratio(f, &field, eps);
    let wt = m.temporal_weights(axis.dt);
    let sw = m.spatial_weights(f.spec.spacing);
    let wmax = sw.iter().map(|p| p.1).fold(0.0, f64::max) * wt.iter().copied().fold(0.0, f64::max);
    let fl1 = spacetime_uloc_norm(&magnitude_field(f), 1.0).unwrap_or(0.0);
    let linf = field.max_magnitude();
    let linf_constant = if fl1 > 0.0 { linf / fl1 } else { 0.0 };
    // Σ|F| over one support ≤ (unit balls covering B_ε)·‖F‖_{L¹_uloc}/(h³·dt/2)
    let cover = if eps <= 0.5 { 1.0 } else { (1.0 + 2.0 * eps).powi(3) };
    let linf_bound = wmax * 2.0 * cover / (f.spec.cell_volume() * axis.dt);
    Ok(Mollified { field, young_ratio, linf_constant, linf_bound })
}

/// One-sided lag average in time; samples before the axis count as zero.
fn mollify_time(f: &GridField, m: &MollifierSpec, dt: f64) -> GridField {
    let wt = m.temporal_weights(dt);
    let n = f.spec.len();
    let mut lagged = GridField::zeros(f.spec.clone(), f.rank);
    for t in 0..f.nt() {
        for c in 0..f.components() {
            let dst = lagged.slice_mut(t, c);
            for (k, &w) in wt.iter().enumerate() {
                if w == 0.0 || k > t {
                    continue;
                }
                let src = f.slice(t - k, c);
                for i in 0..n {
                    dst[i] += w * src[i];
                }
            }
        }
    }
    lagged
}

fn magnitude_field(f: &GridField) -> GridField {
    let mut out = GridField::zeros(f.spec.clone(), Rank::Scalar);
    for t in 0..f.nt() {
        let s: Vec<f64> = (0..f.spec.len()).map(|i| f.magnitude(t, i)).collect();
        out.slice_mut(t, 0).copy_from_slice(&s);
    }
    out
}

/// Plain-sum `ℓ²` norms on `B_r(c)×[t₀+ε, T]` against `B_{r+ε}(c)×[t₀, T]`.
fn young_ratio(f: &GridField, g: &GridField, eps: f64) -> f64 {
    let spec = f.spec.spatial();
    let axis = f.spec.time.expect("time axis checked");
    let c = spec.center();
    let r = spec.boundary_distance(c) - eps - spec.spacing;
    if r <= spec.spacing {
        return 0.0;
    }
    let inner = spec.ball_indices(c, r);
    let outer = spec.ball_indices(c, r + eps);
    let first = (0..f.nt()).find(|&t| axis.time(t) >= axis.t0 + eps - 1e-12);
    let Some(first) = first else { return 0.0 };
    let sq = |field: &GridField, idx: &[usize], from: usize| -> f64 {
        let mut s = 0.0;
        for t in from..field.nt() {
            for c in 0..field.components() {
                let sl = field.slice(t, c);
                s += exec::sum(idx.len(), |m| sl[idx[m]] * sl[idx[m]]);
            }
        }
        s.sqrt()
    };
    let den = sq(f, &outer, 0);
    if den == 0.0 {
        0.0
    } else {
        sq(g, &inner, first) / den
    }
}

/// `lpe_apply(mollify(u⊗u, ε), …)` at time `t`.
pub fn approx_pressure(
    u: &GridField,
    eps: f64,
    x0: [f64; 3],
    radius: f64,
    t: f64,
    opts: &LpeOptions,
) -> Result<PressureDecomposition> {
    let flux = mollify(&u.outer_square()?, eps)?.field;
    lpe_apply(Source::Grid(&flux), &flux.spec, x0, radius, t, opts)
}

/// `e^{tΔ}u₀^ε − ∫₀ᵗ e^{(t−s)Δ}ℙ∇·F^ε ds` at each output time.
///
/// Spatial mollification commutes with the heat and Oseen multipliers, so it is
/// applied last; this keeps the evolved inputs decaying at the box edge.
pub fn approx_velocity(
    u0: &GridField,
    u: &GridField,
    eps: f64,
    t_out: &[f64],
    plan: &SemigroupPlan,
) -> Result<Vec<GridField>> {
    u.expect_rank(Rank::Vector)?;
    let axis = u.spec.time.ok_or(Error::MissingTimeAxis)?;
    let m = MollifierSpec::new(eps)?;
    m.check_space(u.spec.spacing)?;
    if eps < 2.0 * axis.dt - 1e-12 {
        return Err(Error::MollifierUnderResolved { eps });
    }
    let flux = mollify_time(&u.outer_square()?, &m, axis.dt);
    let d = duhamel(&flux, t_out, plan)?;
    let u0 = u0.time_slice(0);
    t_out
        .iter()
        .zip(d.velocity)
        .map(|(&t, dv)| {
            let mut h = heat_apply(HeatInput::Grid(&u0), t - axis.t0, &plan.spec, plan.padding)?;
            h.axpy(-1.0, &dv)?;
            mollify_spatial(&h, eps)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{GridSpec, TimeAxis};

    #[test]
    fn under_resolved_errors() {
        let spec = GridSpec::cube(2.0, 17).unwrap().with_time(TimeAxis::uniform(1.0, 10).unwrap());
        let f = GridField::zeros(spec, Rank::Scalar);
        assert!(matches!(mollify(&f, 0.2), Err(Error::MollifierUnderResolved { .. })));
        assert!(matches!(mollify(&f, 0.3), Err(Error::MollifierUnderResolved { .. })));
    }

    #[test]
    fn weights_have_unit_mass() {
        let m = MollifierSpec::new(0.5).unwrap();
        let s: f64 = m.spatial_weights(0.1).iter().map(|p| p.1).sum();
        let t: f64 = m.temporal_weights(0.05).iter().sum();
        assert!((s - 1.0).abs() < 1e-14 && (t - 1.0).abs() < 1e-14);
        assert_eq!(m.temporal_weights(0.05)[0], 0.0);
    }

    #[test]
    fn constants_survive_away_from_layers() {
        let spec = GridSpec::cube(2.0, 21).unwrap().with_time(TimeAxis::uniform(1.0, 20).unwrap());
        let f = GridField::from_fn(spec.clone(), Rank::Scalar, |_, _, o| o[0] = 3.0);
        let g = mollify(&f, 0.4).unwrap();
        let c = spec.spatial().node_of([0.0; 3]).unwrap();
        assert!((g.field.get(20, 0, c) - 3.0).abs() < 1e-12);
        assert!(g.young_ratio <= 1.0 + 1e-6);
    }
}
