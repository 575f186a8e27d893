//! Closed-form manufactured fields with exact derivatives.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::grid::{cross, dot, norm, sub};
use crate::field::{outer, GridField, GridSpec, Rank};

/// How a field behaves at spatial infinity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayClass {
    Gaussian,
    Bounded,
    Constant,
}

/// `g(t) = direction · Σ_k coeffs[k] t^k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeProfile {
    pub direction: [f64; 3],
    pub coeffs: Vec<f64>,
}

impl TimeProfile {
    /// `g(t) = t · direction`.
    pub fn linear(direction: [f64; 3]) -> Self {
        Self { direction, coeffs: vec![0.0, 1.0] }
    }

    pub fn zero() -> Self {
        Self { direction: [0.0; 3], coeffs: vec![] }
    }

    fn poly(&self, t: f64) -> (f64, f64) {
        let mut v = 0.0;
        let mut d = 0.0;
        for c in self.coeffs.iter().rev() {
            d = d * t + v;
            v = v * t + c;
        }
        (v, d)
    }

    pub fn value(&self, t: f64) -> [f64; 3] {
        let (v, _) = self.poly(t);
        self.direction.map(|a| a * v)
    }

    pub fn derivative(&self, t: f64) -> [f64; 3] {
        let (_, d) = self.poly(t);
        self.direction.map(|a| a * d)
    }
}

type VectorFn = Arc<dyn Fn([f64; 3], f64) -> [f64; 3] + Send + Sync>;

#[derive(Clone)]
pub enum FieldKind {
    /// `∇ × (amplitude e^{-|x-c|²/width²} axis)`.
    GaussianCurl { amplitude: f64, width: f64, center: [f64; 3], axis: [f64; 3] },
    /// `(0, 0, amplitude sin(k x₁))` decayed by `e^{-k² t}` when `heat` is set.
    OscillatoryBounded { amplitude: f64, wavenumber: f64, heat: bool },
    /// Spatially constant `g(t)`.
    Parasitic(TimeProfile),
    /// User supplied values; derivatives by fourth-order central differences.
    Custom { name: String, value: VectorFn, decay: DecayClass },
}

impl fmt::Debug for FieldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldKind::GaussianCurl { amplitude, width, center, axis } => f
                .debug_struct("GaussianCurl")
                .field("amplitude", amplitude)
                .field("width", width)
                .field("center", center)
                .field("axis", axis)
                .finish(),
            FieldKind::OscillatoryBounded { amplitude, wavenumber, heat } => f
                .debug_struct("OscillatoryBounded")
                .field("amplitude", amplitude)
                .field("wavenumber", wavenumber)
                .field("heat", heat)
                .finish(),
            FieldKind::Parasitic(g) => f.debug_tuple("Parasitic").field(g).finish(),
            FieldKind::Custom { name, decay, .. } => {
                f.debug_struct("Custom").field("name", name).field("decay", decay).finish()
            }
        }
    }
}

/// A velocity-like vector field `u(x, t)` with exact derivatives.
#[derive(Clone, Debug)]
pub struct AnalyticField {
    pub kind: FieldKind,
}

/// Value and derivatives at one point. `jac[i][j] = ∂_i u_j`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FieldDerivs {
    pub value: [f64; 3],
    pub jac: [[f64; 3]; 3],
    pub dt: [f64; 3],
    pub lap: [f64; 3],
}

impl FieldDerivs {
    pub fn divergence(&self) -> f64 {
        self.jac[0][0] + self.jac[1][1] + self.jac[2][2]
    }
}

pub fn make_gaussian_curl(amplitude: f64, width: f64, center: [f64; 3]) -> Result<AnalyticField> {
    make_gaussian_curl_axis(amplitude, width, center, [0.0, 0.0, 1.0])
}

pub fn make_gaussian_curl_axis(
    amplitude: f64,
    width: f64,
    center: [f64; 3],
    axis: [f64; 3],
) -> Result<AnalyticField> {
    if !(width > 0.0) || !amplitude.is_finite() {
        return Err(Error::Invalid(format!("gaussian width must be positive, got {width}")));
    }
    Ok(AnalyticField { kind: FieldKind::GaussianCurl { amplitude, width, center, axis } })
}

pub fn make_oscillatory(amplitude: f64, wavenumber: f64) -> AnalyticField {
    AnalyticField { kind: FieldKind::OscillatoryBounded { amplitude, wavenumber, heat: false } }
}

pub fn make_custom(
    name: &str,
    decay: DecayClass,
    value: impl Fn([f64; 3], f64) -> [f64; 3] + Send + Sync + 'static,
) -> AnalyticField {
    AnalyticField { kind: FieldKind::Custom { name: name.into(), value: Arc::new(value), decay } }
}

/// Spatially constant velocity with a linear pressure `p = sign · x·g′(t)`.
#[derive(Clone, Debug)]
pub struct ParasiticPair {
    pub velocity: AnalyticField,
    pub profile: TimeProfile,
    pub sign: f64,
}

/// Builds the parasitic pair; `sign = -1` makes `∂_t u + ∇p = 0`.
pub fn make_parasitic(g: TimeProfile, sign: f64) -> Result<ParasiticPair> {
    if g.value(0.0).iter().any(|v| v.abs() > 0.0) {
        return Err(Error::ParasiticNonzeroStart);
    }
    if sign != 1.0 && sign != -1.0 {
        return Err(Error::Invalid("pressure sign must be +1 or -1".into()));
    }
    Ok(ParasiticPair {
        velocity: AnalyticField { kind: FieldKind::Parasitic(g.clone()) },
        profile: g,
        sign,
    })
}

impl ParasiticPair {
    pub fn pressure(&self, x: [f64; 3], t: f64) -> f64 {
        self.sign * dot(x, self.profile.derivative(t))
    }

    pub fn pressure_gradient(&self, t: f64) -> [f64; 3] {
        self.profile.derivative(t).map(|v| self.sign * v)
    }

    /// Pointwise `∂_t u − Δu + u·∇u + ∇p`.
    pub fn strong_residual(&self, t: f64) -> [f64; 3] {
        let gp = self.profile.derivative(t);
        let dp = self.pressure_gradient(t);
        [gp[0] + dp[0], gp[1] + dp[1], gp[2] + dp[2]]
    }
}

fn gaussian_curl_derivs(a: f64, w: f64, c: [f64; 3], axis: [f64; 3], x: [f64; 3]) -> FieldDerivs {
    let d = sub(x, c);
    let r2 = dot(d, d);
    let w2 = w * w;
    let phi = a * (-r2 / w2).exp();
    let grad = d.map(|v| -2.0 * v / w2 * phi);
    let mut hess = [[0.0; 3]; 3];
    for l in 0..3 {
        for j in 0..3 {
            let delta = if l == j { 1.0 } else { 0.0 };
            hess[l][j] = phi * (4.0 * d[l] * d[j] / (w2 * w2) - 2.0 * delta / w2);
        }
    }
    let lap_phi_factor = 4.0 * r2 / (w2 * w2) - 6.0 / w2;
    let grad_lap: [f64; 3] =
        std::array::from_fn(|l| grad[l] * lap_phi_factor + phi * 8.0 * d[l] / (w2 * w2));
    let mut out = FieldDerivs { value: cross(grad, axis), lap: cross(grad_lap, axis), ..Default::default() };
    for l in 0..3 {
        out.jac[l] = cross(hess[l], axis);
    }
    out
}

impl AnalyticField {
    pub fn decay_class(&self) -> DecayClass {
        match &self.kind {
            FieldKind::GaussianCurl { .. } => DecayClass::Gaussian,
            FieldKind::OscillatoryBounded { .. } => DecayClass::Bounded,
            FieldKind::Parasitic(_) => DecayClass::Constant,
            FieldKind::Custom { decay, .. } => *decay,
        }
    }

    pub fn name(&self) -> &str {
        match &self.kind {
            FieldKind::GaussianCurl { .. } => "gaussian_curl",
            FieldKind::OscillatoryBounded { .. } => "oscillatory_bounded",
            FieldKind::Parasitic(_) => "parasitic",
            FieldKind::Custom { name, .. } => name,
        }
    }

    pub fn value(&self, x: [f64; 3], t: f64) -> [f64; 3] {
        match &self.kind {
            FieldKind::GaussianCurl { amplitude, width, center, axis } => {
                let d = sub(x, *center);
                let w2 = width * width;
                let phi = amplitude * (-dot(d, d) / w2).exp();
                cross(d.map(|v| -2.0 * v / w2 * phi), *axis)
            }
            FieldKind::Custom { value, .. } => value(x, t),
            _ => self.derivs(x, t).value,
        }
    }

    pub fn derivs(&self, x: [f64; 3], t: f64) -> FieldDerivs {
        match &self.kind {
            FieldKind::GaussianCurl { amplitude, width, center, axis } => {
                gaussian_curl_derivs(*amplitude, *width, *center, *axis, x)
            }
            FieldKind::OscillatoryBounded { amplitude, wavenumber, heat } => {
                let k = *wavenumber;
                let decay = if *heat { (-k * k * t).exp() } else { 1.0 };
                let (s, c) = (k * x[0]).sin_cos();
                let a = amplitude * decay;
                let mut o = FieldDerivs::default();
                o.value[2] = a * s;
                o.jac[0][2] = a * k * c;
                o.lap[2] = -a * k * k * s;
                if *heat {
                    o.dt[2] = -k * k * a * s;
                }
                o
            }
            FieldKind::Parasitic(g) => FieldDerivs {
                value: g.value(t),
                dt: g.derivative(t),
                ..Default::default()
            },
            FieldKind::Custom { value, .. } => custom_derivs(value.as_ref(), x, t),
        }
    }

    /// Exact heat evolution `e^{tΔ}u` when it stays in closed form.
    pub fn heat_evolved(&self, t: f64) -> Option<AnalyticField> {
        match &self.kind {
            FieldKind::GaussianCurl { amplitude, width, center, axis } => {
                let w2 = width * width;
                let w2t = w2 + 4.0 * t;
                Some(AnalyticField {
                    kind: FieldKind::GaussianCurl {
                        amplitude: amplitude * (w2 / w2t).powf(1.5),
                        width: w2t.sqrt(),
                        center: *center,
                        axis: *axis,
                    },
                })
            }
            FieldKind::OscillatoryBounded { amplitude, wavenumber, heat: false } => Some(AnalyticField {
                kind: FieldKind::OscillatoryBounded {
                    amplitude: amplitude * (-wavenumber * wavenumber * t).exp(),
                    wavenumber: *wavenumber,
                    heat: false,
                },
            }),
            FieldKind::Parasitic(g) => {
                Some(AnalyticField { kind: FieldKind::Parasitic(g.clone()) })
            }
            _ => None,
        }
    }

    /// Bound on `sup_x |u(x, t)|`.
    pub fn sup_bound(&self, t: f64) -> f64 {
        match &self.kind {
            FieldKind::GaussianCurl { amplitude, width, axis, .. } => {
                // max |∇φ| = amplitude · √2 / (width · √e)
                amplitude.abs() * (2.0f64).sqrt() / (width * 1f64.exp().sqrt()) * norm(*axis)
            }
            FieldKind::OscillatoryBounded { amplitude, wavenumber, heat } => {
                let d = if *heat { (-wavenumber * wavenumber * t).exp() } else { 1.0 };
                amplitude.abs() * d
            }
            FieldKind::Parasitic(g) => norm(g.value(t)),
            FieldKind::Custom { .. } => f64::INFINITY,
        }
    }

    /// Samples onto a grid; uses the grid's time axis when present.
    pub fn sample(&self, spec: &GridSpec) -> GridField {
        GridField::from_fn(spec.clone(), Rank::Vector, |x, t, o| {
            o.copy_from_slice(&self.value(x, t));
        })
    }

    /// Samples `u ⊗ u`.
    pub fn sample_outer(&self, spec: &GridSpec) -> GridField {
        GridField::from_fn(spec.clone(), Rank::SymTensor, |x, t, o| {
            o.copy_from_slice(&outer(self.value(x, t)));
        })
    }
}

fn custom_derivs(f: &(dyn Fn([f64; 3], f64) -> [f64; 3] + Send + Sync), x: [f64; 3], t: f64) -> FieldDerivs {
    let h = 1e-3;
    let at = |d: usize, s: f64| {
        let mut y = x;
        y[d] += s;
        f(y, t)
    };
    let v = f(x, t);
    let mut o = FieldDerivs { value: v, ..Default::default() };
    for d in 0..3 {
        let (m2, m1, p1, p2) = (at(d, -2.0 * h), at(d, -h), at(d, h), at(d, 2.0 * h));
        for j in 0..3 {
            o.jac[d][j] = (m2[j] - 8.0 * m1[j] + 8.0 * p1[j] - p2[j]) / (12.0 * h);
            o.lap[j] += (-m2[j] + 16.0 * m1[j] - 30.0 * v[j] + 16.0 * p1[j] - p2[j]) / (12.0 * h * h);
        }
    }
    let ht = 1e-4;
    let (a, b) = (f(x, t + ht), f(x, (t - ht).max(0.0)));
    let span = t + ht - (t - ht).max(0.0);
    for j in 0..3 {
        o.dt[j] = (a[j] - b[j]) / span;
    }
    o
}

/// Symmetric-tensor sources `f_ij(x, t)` for the pressure operators.
#[derive(Clone, Debug)]
pub enum TensorSource {
    /// `u ⊗ u` of an analytic velocity.
    Outer(AnalyticField),
    /// Constant tensor, stored `xx, xy, xz, yy, yz, zz`.
    Constant([f64; 6]),
    /// `amplitude · y_i y_j / (1 + |y|²)`: bounded, degree zero at infinity.
    Anisotropic { amplitude: f64 },
    /// `tensor · bump(|y - center| / radius)`: compactly supported.
    Bump { center: [f64; 3], radius: f64, tensor: [f64; 6] },
}

impl TensorSource {
    pub fn eval(&self, y: [f64; 3], t: f64) -> [f64; 6] {
        match self {
            TensorSource::Outer(u) => outer(u.value(y, t)),
            TensorSource::Constant(c) => *c,
            TensorSource::Anisotropic { amplitude } => {
                let s = amplitude / (1.0 + dot(y, y));
                outer(y).map(|v| v * s)
            }
            TensorSource::Bump { center, radius, tensor } => {
                let s = norm(sub(y, *center)) / radius;
                let b = crate::field::testfn::bump(s);
                tensor.map(|v| v * b)
            }
        }
    }

    /// Bound on the Frobenius norm of `f(·, t)`.
    pub fn sup_bound(&self, t: f64) -> f64 {
        let frob = |c: &[f64; 6]| crate::field::sym_contract(c, c).sqrt();
        match self {
            TensorSource::Outer(u) => u.sup_bound(t).powi(2),
            TensorSource::Constant(c) => frob(c),
            TensorSource::Anisotropic { amplitude } => amplitude.abs(),
            TensorSource::Bump { tensor, .. } => frob(tensor),
        }
    }

    /// Smallest length scale of the source; sets quadrature density.
    pub fn feature_scale(&self) -> f64 {
        match self {
            TensorSource::Outer(u) => match &u.kind {
                FieldKind::GaussianCurl { width, .. } => *width,
                FieldKind::OscillatoryBounded { wavenumber, .. } => {
                    std::f64::consts::PI / wavenumber.abs().max(1e-12)
                }
                FieldKind::Parasitic(_) => f64::INFINITY,
                FieldKind::Custom { .. } => 0.5,
            },
            TensorSource::Constant(_) => f64::INFINITY,
            TensorSource::Anisotropic { .. } => 1.0,
            TensorSource::Bump { radius, .. } => 0.5 * radius,
        }
    }

    /// Center and radius outside which the source is zero (to f64 precision).
    pub fn support(&self) -> Option<([f64; 3], f64)> {
        match self {
            TensorSource::Outer(u) => match &u.kind {
                FieldKind::GaussianCurl { width, center, .. } => Some((*center, 6.5 * width)),
                _ => None,
            },
            TensorSource::Bump { center, radius, .. } => Some((*center, *radius)),
            _ => None,
        }
    }

    pub fn sample(&self, spec: &GridSpec) -> GridField {
        GridField::from_fn(spec.clone(), Rank::SymTensor, |x, t, o| {
            o.copy_from_slice(&self.eval(x, t));
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fd_check(u: &AnalyticField, x: [f64; 3], t: f64) {
        let d = u.derivs(x, t);
        let h = 1e-4;
        for i in 0..3 {
            let mut p = x;
            let mut m = x;
            p[i] += h;
            m[i] -= h;
            let (up, um) = (u.value(p, t), u.value(m, t));
            for j in 0..3 {
                let fd = (up[j] - um[j]) / (2.0 * h);
                assert!((fd - d.jac[i][j]).abs() < 1e-6, "jac {i}{j}: {fd} vs {}", d.jac[i][j]);
            }
        }
        let v = u.value(x, t);
        let h = 1e-3;
        for j in 0..3 {
            let mut lap = 0.0;
            for i in 0..3 {
                let mut p = x;
                let mut m = x;
                p[i] += h;
                m[i] -= h;
                lap += (u.value(p, t)[j] - 2.0 * v[j] + u.value(m, t)[j]) / (h * h);
            }
            assert!((lap - d.lap[j]).abs() < 1e-4, "lap {j}: {lap} vs {}", d.lap[j]);
        }
    }

    #[test]
    fn gaussian_curl_is_divergence_free_and_consistent() {
        let u = make_gaussian_curl_axis(0.7, 0.9, [0.1, -0.2, 0.3], [0.3, 0.5, 0.8]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let x = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            let d = u.derivs(x, 0.0);
            assert!(d.divergence().abs() < 1e-14);
            assert_eq!(d.value, u.value(x, 0.0));
        }
        fd_check(&u, [0.4, 0.1, -0.3], 0.0);
    }

    #[test]
    fn gaussian_tail_is_negligible() {
        let u = make_gaussian_curl(1.0, 1.0, [0.0; 3]).unwrap();
        assert!(norm(u.value([6.0, 0.0, 0.0], 0.0)) < 1e-14);
    }

    #[test]
    fn oscillatory_and_custom_derivatives() {
        let u = make_oscillatory(1.3, 2.0);
        fd_check(&u, [0.3, 0.2, 0.1], 0.0);
        assert_eq!(u.derivs([0.3, 0.0, 0.0], 0.0).divergence(), 0.0);
        let c = make_custom("rot", DecayClass::Bounded, |x, _| [-x[1], x[0], x[0] * x[0]]);
        let d = c.derivs([0.5, 0.2, 0.0], 0.0);
        assert!((d.lap[2] - 2.0).abs() < 1e-6);
        assert!((d.jac[1][0] + 1.0).abs() < 1e-9);
    }

    #[test]
    fn parasitic_sign_kills_residual() {
        assert!(matches!(
            make_parasitic(TimeProfile { direction: [1.0, 0.0, 0.0], coeffs: vec![1.0] }, -1.0),
            Err(Error::ParasiticNonzeroStart)
        ));
        let p = make_parasitic(TimeProfile::linear([1.0, 0.0, 0.0]), -1.0).unwrap();
        assert_eq!(p.strong_residual(0.3), [0.0; 3]);
        let q = make_parasitic(TimeProfile::linear([1.0, 0.0, 0.0]), 1.0).unwrap();
        assert_eq!(q.strong_residual(0.3), [2.0, 0.0, 0.0]);
    }

    #[test]
    fn heat_evolved_gaussian_curl_solves_heat_equation() {
        let u = make_gaussian_curl(0.5, 0.8, [0.0; 3]).unwrap();
        let t = 0.1;
        let dt = 1e-5;
        let x = [0.3, -0.2, 0.1];
        let a = u.heat_evolved(t + dt).unwrap().value(x, 0.0);
        let b = u.heat_evolved(t - dt).unwrap().value(x, 0.0);
        let lap = u.heat_evolved(t).unwrap().derivs(x, 0.0).lap;
        for j in 0..3 {
            assert!(((a[j] - b[j]) / (2.0 * dt) - lap[j]).abs() < 1e-6);
        }
    }

    #[test]
    fn time_profile_polynomial() {
        let g = TimeProfile { direction: [0.0, 2.0, 0.0], coeffs: vec![0.0, 1.0, 3.0] };
        assert_eq!(g.value(2.0), [0.0, 28.0, 0.0]);
        assert_eq!(g.derivative(2.0), [0.0, 26.0, 0.0]);
    }
}
