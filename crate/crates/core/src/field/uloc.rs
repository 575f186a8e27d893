//! Uniformly-local Lebesgue norms: sup over ball centers of local `L^q` norms.

use super::data::GridField;
use super::quadrature::BallStencil;
use crate::error::{Error, Result};
use crate::exec;

/// Per-center local integrals `∫_{B(x,r)} |f(·,t)|^q` for every admissible center.
pub struct LocalIntegrals {
    pub centers: Vec<usize>,
    pub values: Vec<f64>,
}

fn stencil_for(f: &GridField, radius: f64) -> Result<BallStencil> {
    let h = f.spec.spacing;
    if !(radius >= 2.0 * h - 1e-12) {
        return Err(Error::Invalid(format!("ball radius {radius} below 2h = {}", 2.0 * h)));
    }
    let e = f.spec.extents();
    if e.iter().any(|&x| x < 2.0 * radius) {
        return Err(Error::DomainTooSmall);
    }
    let s = BallStencil::new(radius, h);
    if s.admissible_centers(&f.spec).is_empty() {
        return Err(Error::DomainTooSmall);
    }
    Ok(s)
}

/// `∫_{B(x,r)} g` at every admissible center for a per-node density `g`.
pub fn ball_sums(f: &GridField, radius: f64, density: &[f64]) -> Result<LocalIntegrals> {
    let s = stencil_for(f, radius)?;
    let centers = s.admissible_centers(&f.spec);
    let offs = s.linear_offsets(&f.spec);
    let values = exec::map(centers.len(), |c| {
        let base = centers[c] as isize;
        let mut acc = 0.0;
        for (o, w) in offs.iter().zip(&s.weights) {
            acc += w * density[(base + o) as usize];
        }
        acc
    });
    Ok(LocalIntegrals { centers, values })
}

fn magnitude_pow(f: &GridField, t: usize, q: f64) -> Vec<f64> {
    let n = f.spec.len();
    exec::map(n, |i| {
        let m = f.magnitude(t, i);
        if q == 2.0 {
            m * m
        } else if q == 1.0 {
            m
        } else {
            m.powf(q)
        }
    })
}

/// `sup_x ‖f‖_{L^q(B(x, r))}` over grid-node centers whose ball fits in the
/// grid; for fields with a time axis the sup also runs over time slices.
pub fn uloc_norm(f: &GridField, q: f64, radius: f64) -> Result<f64> {
    if !(q >= 1.0) {
        return Err(Error::Invalid("exponent must be >= 1".into()));
    }
    let mut best: f64 = 0.0;
    for t in 0..f.nt() {
        let dens = magnitude_pow(f, t, q);
        let li = ball_sums(f, radius, &dens)?;
        best = best.max(li.values.iter().fold(0.0, |m: f64, v| m.max(*v)));
    }
    Ok(best.max(0.0).powf(1.0 / q))
}

/// `sup_x (∫_T ∫_{B_1(x)} |f|^p)^{1/p}`, trapezoid in time.
pub fn spacetime_uloc_norm(f: &GridField, p: f64) -> Result<f64> {
    spacetime_uloc_norm_radius(f, p, 1.0)
}

pub fn spacetime_uloc_norm_radius(f: &GridField, p: f64, radius: f64) -> Result<f64> {
    let axis = f.spec.time.ok_or(Error::MissingTimeAxis)?;
    if !(p >= 1.0) {
        return Err(Error::Invalid("exponent must be >= 1".into()));
    }
    let w = axis.trapezoid_weights();
    let n = f.spec.len();
    let mut dens = vec![0.0; n];
    for t in 0..f.nt() {
        let m = magnitude_pow(f, t, p);
        for i in 0..n {
            dens[i] += w[t] * m[i];
        }
    }
    let li = ball_sums(f, radius, &dens)?;
    Ok(li.values.iter().fold(0.0, |m: f64, v| m.max(*v)).powf(1.0 / p))
}

/// `∫_{B(c, r)} |f(·,t)|^q` with the ball stencil centered at node `center`.
pub fn ball_integral_at(f: &GridField, t: usize, center: usize, radius: f64, q: f64) -> f64 {
    let s = BallStencil::new(radius, f.spec.spacing);
    let offs = s.linear_offsets(&f.spec);
    let base = center as isize;
    let mut acc = 0.0;
    for (o, w) in offs.iter().zip(&s.weights) {
        let m = f.magnitude(t, (base + o) as usize);
        acc += w * m.powf(q);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{GridSpec, Rank};

    #[test]
    fn constant_field_unit_ball() {
        let spec = GridSpec::cube(2.0, 41).unwrap();
        let f = GridField::from_fn(spec, Rank::Scalar, |_, _, o| o[0] = -3.0);
        let v = uloc_norm(&f, 2.0, 1.0).unwrap();
        let exact = 3.0 * (4.0 * std::f64::consts::PI / 3.0f64).sqrt();
        assert!((v - exact).abs() / exact < 1e-3, "{v} vs {exact}");
    }

    #[test]
    fn too_small_domain_errors() {
        let spec = GridSpec::cube(0.5, 11).unwrap();
        let f = GridField::zeros(spec, Rank::Scalar);
        assert!(matches!(uloc_norm(&f, 2.0, 1.0), Err(Error::DomainTooSmall)));
    }
}
