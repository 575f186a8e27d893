//! Smooth compactly supported test functions and the radial cutoff family.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::grid::{cross, dot, GridSpec};
use super::quadrature::legendre_on;
use crate::error::{Error, Result};

/// `exp(1 - 1/(1 - s^2))` for `|s| < 1`, zero otherwise, with its first three derivatives.
#[inline]
pub fn bump_derivs(s: f64) -> [f64; 4] {
    if s.abs() >= 1.0 {
        return [0.0; 4];
    }
    let w = 1.0 - s * s;
    let f = (1.0 - 1.0 / w).exp();
    if f == 0.0 {
        return [0.0; 4];
    }
    let w2 = w * w;
    let w3 = w2 * w;
    let g1 = -2.0 * s / w2;
    let g2 = -2.0 / w2 - 8.0 * s * s / w3;
    let g3 = -24.0 * s / w3 - 48.0 * s * s * s / (w3 * w);
    [f, g1 * f, (g2 + g1 * g1) * f, (g3 + 3.0 * g1 * g2 + g1 * g1 * g1) * f]
}

#[inline]
pub fn bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}

/// `∫_{R^3} bump(|x|) dx`.
pub fn bump_volume_integral() -> f64 {
    static V: OnceLock<f64> = OnceLock::new();
    *V.get_or_init(|| {
        let q = legendre_on(0.0, 1.0, 200);
        4.0 * std::f64::consts::PI * q.iter().map(|&(s, w)| w * bump(s) * s * s).sum::<f64>()
    })
}

/// `∫_R bump(s) ds`.
pub fn bump_line_integral() -> f64 {
    static V: OnceLock<f64> = OnceLock::new();
    *V.get_or_init(|| legendre_on(-1.0, 1.0, 200).iter().map(|&(s, w)| w * bump(s)).sum())
}

/// Value and spatial derivatives of a radial function at one point.
#[derive(Clone, Copy, Debug, Default)]
pub struct RadialDerivs {
    pub value: f64,
    pub grad: [f64; 3],
    pub hess: [[f64; 3]; 3],
    pub lap: f64,
    pub grad_lap: [f64; 3],
}

impl RadialDerivs {
    fn add_scaled(&mut self, o: &RadialDerivs, c: f64) {
        self.value += c * o.value;
        self.lap += c * o.lap;
        for a in 0..3 {
            self.grad[a] += c * o.grad[a];
            self.grad_lap[a] += c * o.grad_lap[a];
            for b in 0..3 {
                self.hess[a][b] += c * o.hess[a][b];
            }
        }
    }

    fn scale(&mut self, c: f64) {
        let z = *self;
        *self = RadialDerivs::default();
        self.add_scaled(&z, c);
    }
}

/// Derivatives of `x ↦ bump(|d|/rho)` where `d = x - center`.
pub fn radial_bump(d: [f64; 3], rho: f64) -> RadialDerivs {
    let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    let s = r / rho;
    let mut out = RadialDerivs::default();
    if s >= 1.0 {
        return out;
    }
    let [f, f1, f2, f3] = bump_derivs(s);
    out.value = f;
    if s < 1e-6 {
        // limits: F'/s -> F''(0), the gradient of the Laplacian vanishes
        let c = f2 / (rho * rho);
        for a in 0..3 {
            out.hess[a][a] = c;
        }
        out.lap = 3.0 * c;
        return out;
    }
    let n = [d[0] / r, d[1] / r, d[2] / r];
    let rho2 = rho * rho;
    for a in 0..3 {
        out.grad[a] = f1 / rho * n[a];
        for b in 0..3 {
            let delta = if a == b { 1.0 } else { 0.0 };
            out.hess[a][b] = (f2 * n[a] * n[b] + f1 / s * (delta - n[a] * n[b])) / rho2;
        }
    }
    out.lap = (f2 + 2.0 * f1 / s) / rho2;
    let gl = (f3 + 2.0 * f2 / s - 2.0 * f1 / (s * s)) / (rho2 * rho);
    out.grad_lap = [gl * n[0], gl * n[1], gl * n[2]];
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Profile {
    /// `bump(|x - c| / r)`.
    Bump,
    /// `bump(|x - c| / r) - inner_weight * bump(2|x - c| / r)`; `inner_weight = 8` has zero integral.
    MeanZero { inner_weight: f64 },
}

/// `amplitude * spatial(x) * temporal(t)`, supported in `B_r(c) × (t1, t2)`.
/// Without a window the function is static (temporal factor 1).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub center: [f64; 3],
    pub radius: f64,
    pub window: Option<(f64, f64)>,
    pub amplitude: f64,
    pub profile: Profile,
}

impl TestFunction {
    pub fn bump(center: [f64; 3], radius: f64) -> Self {
        Self { center, radius, window: None, amplitude: 1.0, profile: Profile::Bump }
    }

    pub fn mean_zero(center: [f64; 3], radius: f64) -> Self {
        Self {
            profile: Profile::MeanZero { inner_weight: 8.0 },
            ..Self::bump(center, radius)
        }
    }

    /// Mean-zero profile whose inner weight is tuned so the grid sum vanishes.
    pub fn mean_zero_on(center: [f64; 3], radius: f64, grid: &GridSpec) -> Self {
        let mut outer = 0.0;
        let mut inner = 0.0;
        for idx in grid.ball_indices(center, radius) {
            let x = grid.point(idx);
            let s = super::grid::dist2(x, center).sqrt() / radius;
            outer += bump(s);
            inner += bump(2.0 * s);
        }
        let w = if inner > 0.0 { outer / inner } else { 8.0 };
        Self { profile: Profile::MeanZero { inner_weight: w }, ..Self::bump(center, radius) }
    }

    pub fn with_window(mut self, t1: f64, t2: f64) -> Self {
        self.window = Some((t1, t2));
        self
    }

    pub fn with_amplitude(mut self, a: f64) -> Self {
        self.amplitude = a;
        self
    }

    pub fn is_mean_zero(&self) -> bool {
        matches!(self.profile, Profile::MeanZero { .. })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0) {
            return Err(Error::Invalid("test function radius must be positive".into()));
        }
        if let Some((a, b)) = self.window {
            if !(b > a) {
                return Err(Error::Invalid("empty time window".into()));
            }
        }
        Ok(())
    }

    /// Spatial factor with derivatives, amplitude included.
    pub fn spatial(&self, x: [f64; 3]) -> RadialDerivs {
        let d = [x[0] - self.center[0], x[1] - self.center[1], x[2] - self.center[2]];
        let mut out = radial_bump(d, self.radius);
        if let Profile::MeanZero { inner_weight } = self.profile {
            let inner = radial_bump(d, 0.5 * self.radius);
            out.add_scaled(&inner, -inner_weight);
        }
        out.scale(self.amplitude);
        out
    }

    /// Temporal factor and its derivative.
    pub fn temporal(&self, t: f64) -> (f64, f64) {
        match self.window {
            None => (1.0, 0.0),
            Some((t1, t2)) => {
                let tau = (2.0 * t - t1 - t2) / (t2 - t1);
                let d = bump_derivs(tau);
                (d[0], d[1] * 2.0 / (t2 - t1))
            }
        }
    }

    pub fn value(&self, x: [f64; 3], t: f64) -> f64 {
        self.spatial(x).value * self.temporal(t).0
    }

    pub fn dt(&self, x: [f64; 3], t: f64) -> f64 {
        self.spatial(x).value * self.temporal(t).1
    }

    pub fn grad(&self, x: [f64; 3], t: f64) -> [f64; 3] {
        let b = self.temporal(t).0;
        self.spatial(x).grad.map(|g| g * b)
    }

    pub fn laplacian(&self, x: [f64; 3], t: f64) -> f64 {
        self.spatial(x).lap * self.temporal(t).0
    }

    /// Exact `∫ spatial(x) dx`.
    pub fn spatial_integral(&self) -> f64 {
        let base = self.amplitude * self.radius.powi(3) * bump_volume_integral();
        match self.profile {
            Profile::Bump => base,
            Profile::MeanZero { inner_weight } => base * (1.0 - inner_weight / 8.0),
        }
    }

    /// Exact `∫ temporal(t) dt` (1 for static functions is not meaningful; returns 1).
    pub fn temporal_integral(&self) -> f64 {
        match self.window {
            None => 1.0,
            Some((t1, t2)) => 0.5 * (t2 - t1) * bump_line_integral(),
        }
    }

    /// Gauss–Legendre nodes over the time window (a single unit node if static).
    pub fn time_nodes(&self, n: usize) -> Vec<(f64, f64)> {
        match self.window {
            None => vec![(0.0, 1.0)],
            Some((t1, t2)) => legendre_on(t1, t2, n),
        }
    }

    /// Support must sit inside the grid box.
    pub fn check_inside(&self, grid: &GridSpec) -> Result<()> {
        self.validate()?;
        if !grid.contains_ball(self.center, self.radius) {
            return Err(Error::SupportEscapes);
        }
        if let (Some((t1, t2)), Some(axis)) = (self.window, grid.time) {
            if t1 < axis.t0 - 1e-12 || t2 > axis.t_end() + 1e-12 {
                return Err(Error::SupportEscapes);
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VectorKind {
    /// `axis * ψ`.
    Directional,
    /// `∇ψ × axis`, divergence-free.
    Curl,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VectorTestFunction {
    pub kind: VectorKind,
    pub axis: [f64; 3],
    pub scalar: TestFunction,
}

/// Value and derivatives of a vector test function at one space-time point.
#[derive(Clone, Copy, Debug, Default)]
pub struct VectorDerivs {
    pub value: [f64; 3],
    pub dt: [f64; 3],
    pub lap: [f64; 3],
    /// `jac[i][j] = ∂_i φ_j`.
    pub jac: [[f64; 3]; 3],
    pub div: f64,
}

impl VectorTestFunction {
    pub fn directional(axis: [f64; 3], scalar: TestFunction) -> Self {
        Self { kind: VectorKind::Directional, axis, scalar }
    }

    pub fn curl(axis: [f64; 3], scalar: TestFunction) -> Self {
        Self { kind: VectorKind::Curl, axis, scalar }
    }

    pub fn eval(&self, x: [f64; 3], t: f64) -> VectorDerivs {
        let s = self.scalar.spatial(x);
        let (b, bt) = self.scalar.temporal(t);
        let a = self.axis;
        let mut o = VectorDerivs::default();
        match self.kind {
            VectorKind::Directional => {
                for j in 0..3 {
                    o.value[j] = b * a[j] * s.value;
                    o.dt[j] = bt * a[j] * s.value;
                    o.lap[j] = b * a[j] * s.lap;
                    for i in 0..3 {
                        o.jac[i][j] = b * a[j] * s.grad[i];
                    }
                }
                o.div = b * dot(a, s.grad);
            }
            VectorKind::Curl => {
                let v = cross(s.grad, a);
                let l = cross(s.grad_lap, a);
                for j in 0..3 {
                    o.value[j] = b * v[j];
                    o.dt[j] = bt * v[j];
                    o.lap[j] = b * l[j];
                }
                for i in 0..3 {
                    let row = cross(s.hess[i], a);
                    for j in 0..3 {
                        o.jac[i][j] = b * row[j];
                    }
                }
                o.div = 0.0;
            }
        }
        o
    }

    /// Spatial part of the divergence (no temporal factor).
    pub fn spatial_divergence(&self, x: [f64; 3]) -> f64 {
        match self.kind {
            VectorKind::Directional => dot(self.axis, self.scalar.spatial(x).grad),
            VectorKind::Curl => 0.0,
        }
    }
}

/// `Θ(|x| / scale)` with `Θ = 1` on `[0, 2]`, `Θ = 0` on `[4, ∞)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cutoff {
    pub scale: f64,
}

#[inline]
fn smooth_step_parts(tau: f64) -> (f64, f64) {
    // S(τ) = φ(τ)/(φ(τ)+φ(1-τ)), φ(τ) = e^{-1/τ}
    if tau <= 0.0 {
        return (0.0, 0.0);
    }
    if tau >= 1.0 {
        return (1.0, 0.0);
    }
    let a = (-1.0 / tau).exp();
    let b = (-1.0 / (1.0 - tau)).exp();
    let da = a / (tau * tau);
    let db = -b / ((1.0 - tau) * (1.0 - tau));
    let den = a + b;
    (a / den, (da * den - a * (da + db)) / (den * den))
}

/// Base profile `Θ(ρ)` and `dΘ/dρ`.
#[inline]
pub fn cutoff_profile(rho: f64) -> (f64, f64) {
    let (s, ds) = smooth_step_parts((4.0 - rho) / 2.0);
    (s, -0.5 * ds)
}

impl Cutoff {
    pub fn new(scale: f64) -> Self {
        Self { scale }
    }

    /// Cutoff attached to a ball of radius `r`; `rebased` uses scale `r + 1`.
    pub fn for_ball(r: f64, rebased: bool) -> Self {
        Self { scale: if rebased { r + 1.0 } else { r } }
    }

    #[inline]
    pub fn radial(&self, rho: f64) -> f64 {
        cutoff_profile(rho / self.scale).0
    }

    #[inline]
    pub fn eval(&self, x: [f64; 3]) -> f64 {
        self.radial((x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt())
    }

    pub fn grad(&self, x: [f64; 3]) -> [f64; 3] {
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        if r == 0.0 {
            return [0.0; 3];
        }
        let d = cutoff_profile(r / self.scale).1 / self.scale;
        [d * x[0] / r, d * x[1] / r, d * x[2] / r]
    }

    /// Radius inside which the cutoff is identically one.
    pub fn inner(&self) -> f64 {
        2.0 * self.scale
    }

    /// Radius outside which the cutoff vanishes.
    pub fn outer(&self) -> f64 {
        4.0 * self.scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd(f: impl Fn(f64) -> f64, s: f64) -> f64 {
        let e = 1e-5;
        (f(s + e) - f(s - e)) / (2.0 * e)
    }

    #[test]
    fn bump_derivatives_match_differences() {
        for &s in &[-0.7, -0.2, 0.1, 0.45, 0.8] {
            let d = bump_derivs(s);
            assert!((d[1] - fd(|x| bump_derivs(x)[0], s)).abs() < 1e-7);
            assert!((d[2] - fd(|x| bump_derivs(x)[1], s)).abs() < 1e-6);
            assert!((d[3] - fd(|x| bump_derivs(x)[2], s)).abs() < 1e-5);
        }
    }

    #[test]
    fn radial_laplacian_matches_hessian_trace() {
        let psi = TestFunction::mean_zero([0.1, 0.0, -0.2], 0.9);
        for x in [[0.3, 0.1, 0.0], [0.0, -0.4, 0.2], [0.1, 0.0, -0.2]] {
            let d = psi.spatial(x);
            let tr = d.hess[0][0] + d.hess[1][1] + d.hess[2][2];
            assert!((tr - d.lap).abs() < 1e-10 * (1.0 + d.lap.abs()));
        }
    }

    #[test]
    fn cutoff_regions() {
        let c = Cutoff::new(1.5);
        assert_eq!(c.radial(2.9), 1.0);
        assert_eq!(c.radial(6.0), 0.0);
        let v = c.radial(4.5);
        assert!(v > 0.0 && v < 1.0);
        let (_, d) = cutoff_profile(3.0);
        let num = (cutoff_profile(3.0 + 1e-6).0 - cutoff_profile(3.0 - 1e-6).0) / 2e-6;
        assert!((d - num).abs() < 1e-6);
    }

    #[test]
    fn mean_zero_integral_vanishes() {
        let psi = TestFunction::mean_zero([0.0; 3], 1.0);
        assert!(psi.spatial_integral().abs() < 1e-15);
    }
}
