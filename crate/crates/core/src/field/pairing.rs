//! Space-time pairings `∫∫ f · D(ψ)` with closed-form test-function derivatives.

use super::data::{GridField, Rank};
use super::testfn::{TestFunction, VectorTestFunction};
use crate::error::{Error, Result};
use crate::exec;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Selector {
    Value,
    TimeDerivative,
    Partial(usize),
    Laplacian,
    /// `Σ_i f_i ∂_i ψ` for a vector field `f`.
    Gradient,
}

/// Time nodes and weights for pairing `f` against a test function with the
/// given window. Fields with a time axis use trapezoid weights on the axis.
fn time_weights(f: &GridField, window: Option<(f64, f64)>) -> Vec<(usize, f64, f64)> {
    match f.spec.time {
        Some(axis) => {
            let w = axis.trapezoid_weights();
            (0..axis.nt)
                .filter(|&n| match window {
                    Some((a, b)) => {
                        let t = axis.time(n);
                        t > a && t < b
                    }
                    None => true,
                })
                .map(|n| (n, axis.time(n), w[n]))
                .collect()
        }
        None => vec![(0, 0.0, 1.0)],
    }
}

/// `∫∫ f D(ψ)`; static fields are paired with the time integral of `ψ`'s window.
pub fn pair(f: &GridField, psi: &TestFunction, sel: Selector) -> Result<f64> {
    psi.check_inside(&f.spec)?;
    match sel {
        Selector::Gradient => f.expect_rank(Rank::Vector)?,
        _ => f.expect_rank(Rank::Scalar)?,
    }
    if let Selector::Partial(a) = sel {
        if a > 2 {
            return Err(Error::Invalid("partial derivative axis must be 0, 1 or 2".into()));
        }
    }
    let idx = f.spec.ball_indices(psi.center, psi.radius);
    let spatial: Vec<_> = idx.iter().map(|&i| psi.spatial(f.spec.point(i))).collect();
    let h3 = f.spec.cell_volume();
    let static_field = f.spec.time.is_none();
    let mut total = 0.0;
    for (n, t, wt) in time_weights(f, psi.window) {
        let (b, bt) = if static_field {
            (psi.temporal_integral(), 0.0)
        } else {
            psi.temporal(t)
        };
        let tf = if sel == Selector::TimeDerivative { bt } else { b };
        if tf == 0.0 {
            continue;
        }
        let s = exec::sum(idx.len(), |m| {
            let d = &spatial[m];
            let i = idx[m];
            match sel {
                Selector::Value | Selector::TimeDerivative => f.get(n, 0, i) * d.value,
                Selector::Partial(a) => f.get(n, 0, i) * d.grad[a],
                Selector::Laplacian => f.get(n, 0, i) * d.lap,
                Selector::Gradient => (0..3).map(|a| f.get(n, a, i) * d.grad[a]).sum(),
            }
        });
        total += wt * tf * s * h3;
    }
    Ok(total)
}

/// `∫∫ f · Ψ` for a vector field `f`.
pub fn pair_vector(f: &GridField, psi: &VectorTestFunction) -> Result<f64> {
    psi.scalar.check_inside(&f.spec)?;
    f.expect_rank(Rank::Vector)?;
    let idx = f.spec.ball_indices(psi.scalar.center, psi.scalar.radius);
    let h3 = f.spec.cell_volume();
    let mut total = 0.0;
    for (n, t, wt) in time_weights(f, psi.scalar.window) {
        let s = exec::sum(idx.len(), |m| {
            let i = idx[m];
            let v = psi.eval(f.spec.point(i), t).value;
            (0..3).map(|a| f.get(n, a, i) * v[a]).sum()
        });
        total += wt * s * h3;
    }
    Ok(total)
}

/// `∫∫ f ∇·Ψ` for a scalar field `f`.
pub fn pair_divergence(f: &GridField, psi: &VectorTestFunction) -> Result<f64> {
    psi.scalar.check_inside(&f.spec)?;
    f.expect_rank(Rank::Scalar)?;
    let idx = f.spec.ball_indices(psi.scalar.center, psi.scalar.radius);
    let h3 = f.spec.cell_volume();
    let mut total = 0.0;
    for (n, t, wt) in time_weights(f, psi.scalar.window) {
        let s = exec::sum(idx.len(), |m| {
            let i = idx[m];
            f.get(n, 0, i) * psi.eval(f.spec.point(i), t).div
        });
        total += wt * s * h3;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{testfn::bump_volume_integral, GridSpec};

    #[test]
    fn linear_against_partial_gives_minus_integral() {
        let spec = GridSpec::cube(1.5, 61).unwrap();
        let f = GridField::from_fn(spec, Rank::Scalar, |x, _, o| o[0] = x[0]);
        let psi = TestFunction::bump([0.1, -0.05, 0.0], 1.0);
        let v = pair(&f, &psi, Selector::Partial(0)).unwrap();
        assert!((v + bump_volume_integral()).abs() < 1e-4, "{v}");
    }

    #[test]
    fn escaping_support_errors() {
        let spec = GridSpec::cube(1.0, 21).unwrap();
        let f = GridField::zeros(spec, Rank::Scalar);
        let psi = TestFunction::bump([0.5, 0.0, 0.0], 0.8);
        assert!(matches!(pair(&f, &psi, Selector::Value), Err(Error::SupportEscapes)));
    }
}
