//! Heat semigroup, the Leray-projected Duhamel integral `∫₀ᵗ e^{(t−s)Δ}ℙ∇·F ds`
//! and the uniformly-local semigroup estimate.

use serde::Serialize;

use crate::analytic::AnalyticField;
use crate::error::{Error, Result};
use crate::exec;
use crate::field::grid::{norm, sub};
use crate::field::quadrature::gauss_hermite;
use crate::field::{uloc_norm, Cutoff, GridField, GridSpec, Rank, TimeAxis, SYM_PAIRS};
use crate::pressure::decay_constant;
use crate::spectral::{heat_spectral, Padded, C64};

/// Relative boundary level below which a grid field counts as decaying.
pub const DECAY_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct SemigroupPlan {
    pub spec: GridSpec,
    pub padding: f64,
    /// Midpoint nodes in `τ = √(t−s)`.
    pub tau_nodes: usize,
}

impl SemigroupPlan {
    pub fn new(spec: &GridSpec, padding: f64, tau_nodes: usize) -> Result<Self> {
        if !(padding >= 2.0) {
            return Err(Error::Invalid(format!("semigroup padding must be >= 2, got {padding}")));
        }
        if tau_nodes == 0 {
            return Err(Error::Invalid("need at least one time node".into()));
        }
        Ok(Self { spec: spec.spatial(), padding, tau_nodes })
    }

    pub fn standard(spec: &GridSpec) -> Self {
        Self { spec: spec.spatial(), padding: 2.0, tau_nodes: 64 }
    }
}

#[derive(Clone, Copy, Debug)]
pub enum HeatInput<'a> {
    Grid(&'a GridField),
    Analytic(&'a AnalyticField),
}

/// `e^{tΔ}u₀` sampled on `spec`.
pub fn heat_apply(input: HeatInput, t: f64, spec: &GridSpec, padding: f64) -> Result<GridField> {
    if !(t >= 0.0) {
        return Err(Error::Invalid(format!("heat time must be >= 0, got {t}")));
    }
    let spec = spec.spatial();
    match input {
        HeatInput::Grid(u) => {
            if u.spec.spatial() != spec {
                return Err(Error::Invalid("heat input must live on the output grid".into()));
            }
            let u = u.time_slice(0);
            if t == 0.0 {
                return Ok(u);
            }
            if !u.decays(DECAY_TOL) {
                return Err(Error::NonDecayingInput);
            }
            heat_spectral(&u, t, padding)
        }
        HeatInput::Analytic(f) => {
            if t == 0.0 {
                return Ok(f.sample(&spec));
            }
            if let Some(g) = f.heat_evolved(t) {
                return Ok(g.sample(&spec));
            }
            Ok(heat_quadrature(f, t, &spec))
        }
    }
}

/// Gauss–Hermite convolution `π^{-3/2} Σ w u(x − 2√t z)`.
fn heat_quadrature(f: &AnalyticField, t: f64, spec: &GridSpec) -> GridField {
    let gh = gauss_hermite(16);
    let s = 2.0 * t.sqrt();
    let norm = std::f64::consts::PI.powf(-1.5);
    GridField::from_fn(spec.clone(), Rank::Vector, |x, _, o| {
        let mut acc = [0.0; 3];
        for &(za, wa) in &gh {
            for &(zb, wb) in &gh {
                for &(zc, wc) in &gh {
                    let v = f.value([x[0] - s * za, x[1] - s * zb, x[2] - s * zc], 0.0);
                    let w = wa * wb * wc;
                    for c in 0..3 {
                        acc[c] += w * v[c];
                    }
                }
            }
        }
        for c in 0..3 {
            o[c] = norm * acc[c];
        }
    })
}

#[derive(Clone, Debug)]
pub struct DuhamelResult {
    pub times: Vec<f64>,
    /// Velocity increment per output time.
    pub velocity: Vec<GridField>,
    /// `‖·‖_{L¹(B₁(x₀))}` of the contributions from `F·1_{B₂(x₀)}` and the rest.
    pub near_norm: Vec<f64>,
    pub far_norm: Vec<f64>,
    /// Error bar for the part of a non-decaying source outside the window.
    pub tail_bound: Vec<f64>,
    /// True when the source was windowed (non-decaying input).
    pub localized: bool,
}

/// Per-slice source preparation: decaying slices pass through, constant slices
/// vanish, anything else is re-based by a constant (which `∇·` ignores) and windowed.
struct Localizer {
    window: Option<(Cutoff, [f64; 3])>,
}

impl Localizer {
    fn new(f: &GridField) -> Self {
        if f.decays(DECAY_TOL) {
            return Self { window: None };
        }
        let spec = &f.spec;
        let c = spec.center();
        let half = spec.boundary_distance(c);
        Self { window: Some((Cutoff::new(0.9 * half / 4.0), c)) }
    }

    fn radius(&self) -> Option<f64> {
        self.window.as_ref().map(|(cut, _)| cut.inner())
    }

    fn prepare(&self, slice: &mut GridField) {
        let Some((cut, c)) = &self.window else { return };
        let spec = slice.spec.clone();
        for comp in 0..6 {
            let s = slice.slice_mut(0, comp);
            let base = s[0];
            for (i, v) in s.iter_mut().enumerate() {
                *v -= base;
                if *v != 0.0 {
                    *v *= cut.eval(sub(spec.point(i), *c));
                }
            }
        }
    }
}

/// `ℙ∇·F` in Fourier space, interleaved per mode.
fn leray_divergence_hat(padded: &Padded, slice: &GridField) -> Vec<[C64; 3]> {
    let plan = padded.plan();
    let comps: Vec<Vec<C64>> = (0..6).map(|c| plan.forward(&padded.embed(slice.slice(0, c)))).collect();
    let kx = plan.wavenumbers(0, true);
    let ky = plan.wavenumbers(1, true);
    let kz = plan.wavenumbers(2, true);
    let (ny, nzc) = (plan.dims[1], plan.nzc());
    let mut out = vec![[C64::new(0.0, 0.0); 3]; plan.spectral_len()];
    exec::chunks_mut(&mut out, ny * nzc, |i, plane| {
        for j in 0..ny {
            for k in 0..nzc {
                let xi = [kx[i], ky[j], kz[k]];
                let q = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
                let m = (i * ny + j) * nzc + k;
                if q == 0.0 {
                    continue;
                }
                // v_l = Σ_j iξ_j F̂_lj
                let mut v = [C64::new(0.0, 0.0); 3];
                for (c, &(a, b)) in SYM_PAIRS.iter().enumerate() {
                    let f = comps[c][m];
                    v[a] += C64::new(0.0, xi[b]) * f;
                    if a != b {
                        v[b] += C64::new(0.0, xi[a]) * f;
                    }
                }
                let proj = (v[0] * xi[0] + v[1] * xi[1] + v[2] * xi[2]) / q;
                for l in 0..3 {
                    plane[j * nzc + k][l] = v[l] - proj * xi[l];
                }
            }
        }
    });
    out
}

fn inverse_vector(padded: &Padded, acc: &[[C64; 3]]) -> GridField {
    let plan = padded.plan();
    let mut out = GridField::zeros(padded.spec.clone(), Rank::Vector);
    for l in 0..3 {
        let s: Vec<C64> = acc.iter().map(|v| v[l]).collect();
        let r = padded.crop(&plan.inverse(s));
        out.slice_mut(0, l).copy_from_slice(&r);
    }
    out
}

/// `e^{tΔ}ℙ∇·F` for a static source.
pub fn oseen_apply(f: &GridField, t: f64, padding: f64) -> Result<GridField> {
    f.expect_rank(Rank::SymTensor)?;
    if !(t >= 0.0) {
        return Err(Error::Invalid(format!("time must be >= 0, got {t}")));
    }
    let mut slice = f.time_slice(0);
    Localizer::new(&slice).prepare(&mut slice);
    let padded = Padded::new(&slice.spec, padding)?;
    let mut g = leray_divergence_hat(&padded, &slice);
    let plan = padded.plan();
    let ex = heat_factors(&plan, t);
    let (ny, nzc) = (plan.dims[1], plan.nzc());
    exec::chunks_mut(&mut g, ny * nzc, |i, plane| {
        for j in 0..ny {
            for k in 0..nzc {
                let e = ex[0][i] * ex[1][j] * ex[2][k];
                for v in plane[j * nzc + k].iter_mut() {
                    *v *= e;
                }
            }
        }
    });
    Ok(inverse_vector(&padded, &g))
}

/// Separable `e^{−τ²ξ_a²}` tables along each axis.
fn heat_factors(plan: &crate::spectral::Plan3, tau2: f64) -> [Vec<f64>; 3] {
    std::array::from_fn(|a| plan.wavenumbers(a, true).iter().map(|k| (-tau2 * k * k).exp()).collect())
}

/// Time layout of a source: its axis, or a single static slice.
fn source_axis(f: &GridField) -> (f64, Option<TimeAxis>) {
    match f.spec.time {
        Some(ax) => (ax.t0, Some(ax)),
        None => (0.0, None),
    }
}

/// One contribution `coef · e^{−τ²|ξ|²}` attached to a source time node.
#[derive(Clone, Copy)]
struct Term {
    output: usize,
    tau2: f64,
    coef: f64,
}

fn duhamel_core(f: &GridField, t_out: &[f64], plan: &SemigroupPlan) -> Result<(Vec<GridField>, Option<f64>)> {
    f.expect_rank(Rank::SymTensor)?;
    if f.spec.spatial() != plan.spec {
        return Err(Error::Invalid("duhamel source must live on the plan grid".into()));
    }
    let (t0, axis) = source_axis(f);
    for &t in t_out {
        let ok = match axis {
            Some(ax) => t >= ax.t0 - 1e-12 && t <= ax.t_end() + 1e-12,
            None => t >= 0.0,
        };
        if !ok {
            return Err(Error::TimeOutsideAxis(t));
        }
    }
    let nt = f.nt();
    let m = plan.tau_nodes;
    // terms[n] lists every (output, τ) pair that reads source node n.
    let mut terms: Vec<Vec<Term>> = vec![Vec::new(); nt];
    for (o, &t) in t_out.iter().enumerate() {
        let span = (t - t0).max(0.0);
        if span == 0.0 {
            continue;
        }
        let root = span.sqrt();
        let d = root / m as f64;
        for k in 0..m {
            let tau = (k as f64 + 0.5) * d;
            let w = 2.0 * tau * d;
            let s = t - tau * tau;
            match axis {
                None => terms[0].push(Term { output: o, tau2: tau * tau, coef: w }),
                Some(ax) => {
                    let (n, a) = ax.locate(s.clamp(ax.t0, ax.t_end()))?;
                    terms[n].push(Term { output: o, tau2: tau * tau, coef: w * (1.0 - a) });
                    if a > 0.0 {
                        terms[n + 1].push(Term { output: o, tau2: tau * tau, coef: w * a });
                    }
                }
            }
        }
    }
    let padded = Padded::new(&plan.spec, plan.padding)?;
    let fft = padded.plan();
    let (ny, nzc) = (fft.dims[1], fft.nzc());
    let mut acc = vec![vec![[C64::new(0.0, 0.0); 3]; fft.spectral_len()]; t_out.len()];
    let localizer = Localizer::new(f);
    for (n, list) in terms.iter().enumerate() {
        if list.is_empty() {
            continue;
        }
        let mut slice = f.time_slice(n);
        localizer.prepare(&mut slice);
        if slice.max_abs() == 0.0 {
            continue;
        }
        let g = leray_divergence_hat(&padded, &slice);
        for (o, out) in acc.iter_mut().enumerate() {
            let mine: Vec<(f64, [Vec<f64>; 3])> = list
                .iter()
                .filter(|term| term.output == o)
                .map(|term| (term.coef, heat_factors(&fft, term.tau2)))
                .collect();
            if mine.is_empty() {
                continue;
            }
            exec::chunks_mut(out, ny * nzc, |i, plane| {
                for j in 0..ny {
                    for k in 0..nzc {
                        let mut e = 0.0;
                        for (c, ex) in &mine {
                            e += c * ex[0][i] * ex[1][j] * ex[2][k];
                        }
                        let src = g[(i * ny + j) * nzc + k];
                        let dst = &mut plane[j * nzc + k];
                        for l in 0..3 {
                            dst[l] += src[l] * e;
                        }
                    }
                }
            });
        }
    }
    let fields = exec::map(t_out.len(), |o| inverse_vector(&padded, &acc[o]));
    Ok((fields, localizer.radius()))
}

/// `∫₀ᵗ e^{(t−s)Δ}ℙ∇·F(s) ds` at each output time, with `s = t − τ²` and
/// the composite midpoint rule in `τ`.
pub fn duhamel(f: &GridField, t_out: &[f64], plan: &SemigroupPlan) -> Result<DuhamelResult> {
    let (velocity, window) = duhamel_core(f, t_out, plan)?;
    let tail_bound = match window {
        None => vec![0.0; t_out.len()],
        Some(rho) => {
            // balls of radius at least 2h; larger balls only raise the norm
            let fl1 = uloc_norm(f, 1.0, (2.0 * f.spec.spacing).max(1.0))?;
            let (t0, _) = source_axis(f);
            t_out.iter().map(|&t| decay_constant() * (t - t0).max(0.0) * fl1 / rho).collect()
        }
    };
    Ok(DuhamelResult {
        times: t_out.to_vec(),
        velocity,
        near_norm: vec![],
        far_norm: vec![],
        tail_bound,
        localized: window.is_some(),
    })
}

/// `duhamel` plus the near/far split of the source at `B₂(x₀)`, measured on `B₁(x₀)`.
pub fn duhamel_split(f: &GridField, t_out: &[f64], plan: &SemigroupPlan, x0: [f64; 3]) -> Result<DuhamelResult> {
    let mut res = duhamel(f, t_out, plan)?;
    let mut near = f.clone();
    let spec = f.spec.spatial();
    let inside: Vec<bool> = (0..spec.len()).map(|i| norm(sub(spec.point(i), x0)) < 2.0).collect();
    for t in 0..near.nt() {
        for c in 0..6 {
            for (i, v) in near.slice_mut(t, c).iter_mut().enumerate() {
                if !inside[i] {
                    *v = 0.0;
                }
            }
        }
    }
    let mut far = f.clone();
    far.axpy(-1.0, &near)?;
    let (dn, _) = duhamel_core(&near, t_out, plan)?;
    let (df, _) = duhamel_core(&far, t_out, plan)?;
    res.near_norm = dn.iter().map(|g| local_l1(g, x0, 1.0)).collect();
    res.far_norm = df.iter().map(|g| local_l1(g, x0, 1.0)).collect();
    Ok(res)
}

/// `‖g‖_{L¹(B_r(c))}` by node sums.
pub fn local_l1(g: &GridField, c: [f64; 3], r: f64) -> f64 {
    let idx = g.spec.ball_indices(c, r);
    idx.iter().map(|&i| g.magnitude(0, i)).sum::<f64>() * g.spec.cell_volume()
}

/// `e^{tΔ}u₀ − ∫₀ᵗ e^{(t−s)Δ}ℙ∇·(u⊗u) ds` at each output time.
pub fn mild_rhs(u0: HeatInput, u: &GridField, t_out: &[f64], plan: &SemigroupPlan) -> Result<Vec<GridField>> {
    u.expect_rank(Rank::Vector)?;
    let flux = u.outer_square()?;
    let d = duhamel(&flux, t_out, plan)?;
    let (t0, _) = source_axis(u);
    t_out
        .iter()
        .zip(d.velocity)
        .map(|(&t, dv)| {
            let mut h = heat_apply(u0, t - t0, &plan.spec, plan.padding)?;
            h.axpy(-1.0, &dv)?;
            Ok(h)
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct MateEstimate {
    pub p: f64,
    pub q: f64,
    /// `(t, ratio)`.
    pub ratios: Vec<(f64, f64)>,
    pub sup: f64,
    /// Least-squares slope of `ln ratio` against `ln t` over the smaller half of `t`;
    /// a negative value means the ratio grows as `t → 0`.
    pub small_t_slope: f64,
    pub pass: bool,
}

/// Fixed tensor direction of the Gaussian test sources (not a multiple of `δ`,
/// so `ℙ∇·F ≠ 0`).
pub const MATE_TENSOR: [f64; 6] = [1.0, 0.5, 0.0, 0.2, 0.3, -0.4];

pub fn gaussian_tensor_source(spec: &GridSpec, amplitude: f64, width: f64) -> GridField {
    GridField::from_fn(spec.spatial(), Rank::SymTensor, |x, _, o| {
        let g = amplitude * (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / (width * width)).exp();
        for c in 0..6 {
            o[c] = g * MATE_TENSOR[c];
        }
    })
}

/// Largest tolerated growth slope of the ratio as `t → 0`.
pub const MATE_SLOPE_TOL: f64 = 0.15;

fn mate_time_factor(t: f64, p: f64, q: f64) -> f64 {
    t.powf(-0.5) + t.powf(-(3.0 / q - 3.0 / p) / 2.0 - 0.5)
}

/// Measured `‖e^{tΔ}ℙ∇·F‖_{L^p_uloc} / [(t^{−1/2} + t^{−(3/q−3/p)/2−1/2}) ‖F‖_{L^q_uloc}]`.
pub fn mate_estimate_check(f: &GridField, t_list: &[f64], p: f64, q: f64) -> Result<MateEstimate> {
    if !(q >= 1.0) || p < q {
        return Err(Error::Invalid(format!("need 1 <= q <= p, got p = {p}, q = {q}")));
    }
    let (tmin, tmax) = t_list
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), &t| (a.min(t), b.max(t)));
    if !(tmin > 0.0) || (tmax / tmin).log10() < 1.5 - 1e-9 {
        return Err(Error::Invalid("time list must be positive and span at least 1.5 decades".into()));
    }
    let mut ratios = Vec::new();
    for &t in t_list {
        let fq = uloc_norm(f, q, 1.0)?;
        let r = if fq == 0.0 {
            0.0
        } else {
            let g = oseen_apply(f, t, 2.0)?;
            uloc_norm(&g, p, 1.0)? / (mate_time_factor(t, p, q) * fq)
        };
        ratios.push((t, r));
    }
    let mut sorted = ratios.clone();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let half = &sorted[..sorted.len().div_ceil(2).max(2)];
    let small_t_slope = log_slope(half);
    let sup = ratios.iter().map(|r| r.1).fold(0.0, f64::max);
    let finite = ratios.iter().all(|r| r.1.is_finite());
    let pass = finite && (small_t_slope >= -MATE_SLOPE_TOL || sup == 0.0);
    Ok(MateEstimate { p, q, ratios, sup, small_t_slope, pass })
}

fn log_slope(pts: &[(f64, f64)]) -> f64 {
    let v: Vec<(f64, f64)> = pts.iter().filter(|p| p.1 > 0.0).map(|p| (p.0.ln(), p.1.ln())).collect();
    if v.len() < 2 {
        return 0.0;
    }
    let n = v.len() as f64;
    let mx = v.iter().map(|p| p.0).sum::<f64>() / n;
    let my = v.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = v.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = v.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{make_gaussian_curl, make_oscillatory};

    #[test]
    fn heat_of_zero_time_is_identity() {
        let spec = GridSpec::cube(3.0, 16).unwrap();
        let u = make_gaussian_curl(1.0, 0.8, [0.0; 3]).unwrap().sample(&spec);
        let h = heat_apply(HeatInput::Grid(&u), 0.0, &spec, 2.0).unwrap();
        assert_eq!(h.data, u.data);
    }

    #[test]
    fn non_decaying_grid_input_errors() {
        let spec = GridSpec::cube(3.0, 16).unwrap();
        let u = make_oscillatory(1.0, 1.0).sample(&spec);
        assert!(matches!(heat_apply(HeatInput::Grid(&u), 0.1, &spec, 2.0), Err(Error::NonDecayingInput)));
    }

    #[test]
    fn time_outside_axis_errors() {
        let spec = GridSpec::cube(3.0, 16).unwrap().with_time(TimeAxis::uniform(0.1, 2).unwrap());
        let f = GridField::zeros(spec.clone(), Rank::SymTensor);
        let plan = SemigroupPlan::standard(&spec);
        assert!(matches!(duhamel(&f, &[0.2], &plan), Err(Error::TimeOutsideAxis(_))));
    }

    #[test]
    fn constant_source_gives_zero() {
        let spec = GridSpec::cube(3.0, 16).unwrap().with_time(TimeAxis::uniform(0.1, 2).unwrap());
        let f = GridField::from_fn(spec.clone(), Rank::SymTensor, |_, t, o| {
            o.copy_from_slice(&[1.0 + t, 0.3, 0.0, 2.0, -0.1, 0.5]);
        });
        let plan = SemigroupPlan::standard(&spec);
        let d = duhamel(&f, &[0.1], &plan).unwrap();
        assert_eq!(d.velocity[0].max_abs(), 0.0);
    }

    #[test]
    fn gaussian_mate_ratio_rejects_bad_exponents() {
        let spec = GridSpec::cube(3.0, 16).unwrap();
        let f = gaussian_tensor_source(&spec, 1.0, 0.5);
        assert!(mate_estimate_check(&f, &[0.01, 1.0], 1.0, 2.0).is_err());
    }
}
