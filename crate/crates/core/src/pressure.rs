//! Local pressure expansion on a ball: near part `Σ R_iR_j(θ_R f_ij)`, far part
//! with the re-centered kernel, shell constants, the patched global pressure
//! and the distributional pairings.

use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::analytic::TensorSource;
use crate::error::{Error, Result};
use crate::exec;
use crate::field::grid::{dist2, dot, norm, sub};
use crate::field::quadrature::{composite, fibonacci_sphere, geometric_breaks, SphereRule};
use crate::field::{
    io, sym_contract, Cutoff, GridField, GridSpec, Rank, TestFunction, VectorKind, VectorTestFunction,
    SYM_MULT,
};
use crate::kernel::{cz_all, cz_grad_all};
use crate::riesz::{contract_slices, sample_spatial, sphere_degree, spherical_integral};
use crate::spectral::Padded;

/// A symmetric-tensor source: closed form, or samples (optionally with a time axis).
#[derive(Clone, Copy, Debug)]
pub enum Source<'a> {
    Analytic(&'a TensorSource),
    Grid(&'a GridField),
}

impl Source<'_> {
    fn check(&self) -> Result<()> {
        if let Source::Grid(f) = self {
            f.expect_rank(Rank::SymTensor)?;
        }
        Ok(())
    }

    /// Static slice at time `t` sampled on `spec` (analytic) or taken from the grid.
    pub fn slice(&self, spec: &GridSpec, t: f64) -> Result<GridField> {
        match self {
            Source::Analytic(s) => {
                Ok(GridField::from_fn(spec.spatial(), Rank::SymTensor, |x, _, o| o.copy_from_slice(&s.eval(x, t))))
            }
            Source::Grid(f) => {
                if f.spec.spatial() != spec.spatial() {
                    return Err(Error::Invalid("grid source must live on the evaluation grid".into()));
                }
                static_slice(f, t)
            }
        }
    }

    fn sup_bound(&self, t: f64) -> f64 {
        match self {
            Source::Analytic(s) => s.sup_bound(t),
            Source::Grid(f) => f.max_magnitude(),
        }
    }
}

/// Slice at `t`, or the field itself when it has no time axis.
fn static_slice(f: &GridField, t: f64) -> Result<GridField> {
    if f.spec.time.is_some() {
        f.slice_at_time(t)
    } else {
        Ok(f.time_slice(0))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LpeOptions {
    /// Far-field truncation radius; `None` means `16R`.
    pub rho_max: Option<f64>,
    pub padding: f64,
    /// Cutoff at scale `R + 1` instead of `R`.
    pub rebased: bool,
    /// Gauss–Legendre nodes per radial panel.
    pub radial_nodes: usize,
}

impl Default for LpeOptions {
    fn default() -> Self {
        Self { rho_max: None, padding: 2.0, rebased: false, radial_nodes: 12 }
    }
}

impl LpeOptions {
    pub fn rho_max(&self, radius: f64) -> f64 {
        self.rho_max.unwrap_or(16.0 * radius)
    }

    /// Checks the ball radius and that the truncation reaches `8R`; returns the truncation.
    pub fn validate(&self, radius: f64) -> Result<f64> {
        if !(radius > 0.0) {
            return Err(Error::Invalid("ball radius must be positive".into()));
        }
        let cut = Cutoff::for_ball(radius, self.rebased);
        let rho = self.rho_max(radius);
        let min = 2.0 * cut.outer();
        if rho < min {
            return Err(Error::FarFieldUnderResolved { rho_max: rho, min });
        }
        Ok(rho)
    }
}

/// Bound on `|K(x−y) − K(x₀−y)|·|y−x₀|⁴ / R` for `|x−x₀| ≤ R ≤ |y−x₀|/2`.
pub fn decay_constant() -> f64 {
    static C: OnceLock<f64> = OnceLock::new();
    *C.get_or_init(|| {
        let g = fibonacci_sphere(4000)
            .into_iter()
            .map(|d| {
                let gr = cz_grad_all(d);
                (0..3)
                    .map(|l| sym_contract(&gr[l], &gr[l]))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max);
        // |ζ| ≥ |y−x₀|/2 along the segment; 5% margin for the sampled max
        16.0 * g * 1.05
    })
}

/// Tail of the far integral beyond `rho`: `4π C R ‖f‖ / rho`.
pub fn tail_bound(radius: f64, sup_f: f64, rho: f64) -> f64 {
    4.0 * std::f64::consts::PI * decay_constant() * radius * sup_f / rho
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PressureSidecar {
    pub format: String,
    pub center: [f64; 3],
    pub radius: f64,
    pub rho_max: f64,
    pub rebased: bool,
    /// `(t, c_{x₀,R}(t))`.
    pub constant: Vec<(f64, f64)>,
    pub tail_bound: Vec<f64>,
    pub near_file: String,
    pub far_file: String,
}

/// Near and far parts of the expansion on the grid nodes of `B_R(x₀)`.
/// Values outside the ball are zero; `nodes` lists the ball.
#[derive(Clone, Debug)]
pub struct PressureDecomposition {
    pub center: [f64; 3],
    pub radius: f64,
    pub rho_max: f64,
    pub rebased: bool,
    pub nodes: Vec<usize>,
    pub near: GridField,
    pub far: GridField,
    /// `(t, c(t))`; the expansion itself carries no constant.
    pub constant: Vec<(f64, f64)>,
    pub tail_bound: Vec<f64>,
}

impl PressureDecomposition {
    pub fn total(&self) -> GridField {
        let mut t = self.near.clone();
        t.axpy(1.0, &self.far).expect("same grid");
        for (n, &(_, c)) in self.constant.iter().enumerate() {
            if c != 0.0 {
                let s = t.slice_mut(n.min(t.nt() - 1), 0);
                for &i in &self.nodes {
                    s[i] += c;
                }
            }
        }
        t
    }

    /// Total values on the ball nodes, in `nodes` order.
    pub fn ball_values(&self) -> Vec<f64> {
        let t = self.total();
        self.nodes.iter().map(|&i| t.get(0, 0, i)).collect()
    }

    pub fn write(&self, dir: &Path, stem: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let near_file = format!("{stem}_near.nlpf");
        let far_file = format!("{stem}_far.nlpf");
        io::write_field(&dir.join(&near_file), &self.near)?;
        io::write_field(&dir.join(&far_file), &self.far)?;
        let side = PressureSidecar {
            format: "nlp-pressure".into(),
            center: self.center,
            radius: self.radius,
            rho_max: self.rho_max,
            rebased: self.rebased,
            constant: self.constant.clone(),
            tail_bound: self.tail_bound.clone(),
            near_file,
            far_file,
        };
        let path = dir.join(format!("{stem}.pressure.json"));
        std::fs::write(&path, serde_json::to_string_pretty(&side)?)?;
        Ok(path)
    }

    pub fn read(sidecar: &Path) -> Result<Self> {
        let side: PressureSidecar = serde_json::from_str(&std::fs::read_to_string(sidecar)?)?;
        let dir = sidecar.parent().unwrap_or(Path::new("."));
        let near = io::read_field(&dir.join(&side.near_file))?;
        let far = io::read_field(&dir.join(&side.far_file))?;
        let nodes = near.spec.ball_indices(side.center, side.radius);
        Ok(Self {
            center: side.center,
            radius: side.radius,
            rho_max: side.rho_max,
            rebased: side.rebased,
            nodes,
            near,
            far,
            constant: side.constant,
            tail_bound: side.tail_bound,
        })
    }
}

/// Ensures `θ_R(·−x₀) f` is captured by `spec`.
fn check_extension(source: &Source, spec: &GridSpec, x0: [f64; 3], cut: &Cutoff) -> Result<()> {
    let need = cut.outer();
    let have = spec.boundary_distance(x0);
    if have >= need {
        return Ok(());
    }
    let ok = match source {
        Source::Grid(f) => f.decays(1e-8),
        Source::Analytic(s) => match s.support() {
            Some((c, r)) => spec.contains_ball(c, r),
            None => false,
        },
    };
    if ok {
        Ok(())
    } else {
        Err(Error::ExtensionRadius { needed: need, have })
    }
}

/// `Σ R_iR_j(θ f_ij)` on the whole grid for one static slice.
fn near_full(slice: &GridField, x0: [f64; 3], cut: &Cutoff, padding: f64) -> Result<Vec<f64>> {
    let spec = &slice.spec;
    let idx = spec.ball_indices(x0, cut.outer());
    let mut comps = vec![vec![0.0; spec.len()]; 6];
    for &i in &idx {
        let th = cut.eval(sub(spec.point(i), x0));
        if th == 0.0 {
            continue;
        }
        for c in 0..6 {
            comps[c][i] = th * slice.get(0, c, i);
        }
    }
    let padded = Padded::new(spec, padding)?;
    let refs: Vec<&[f64]> = comps.iter().map(|v| v.as_slice()).collect();
    Ok(contract_slices(&padded, &refs, 0.0))
}

/// Compressed far-field source nodes `(y_q, w_q (1−θ) f(y_q))`.
struct FarNodes {
    points: Vec<[f64; 3]>,
    weights: Vec<[f64; 6]>,
}

/// Spherical quadrature around `x₀` on `2R ≤ |y−x₀| ≤ rho` with `(1−θ)` folded
/// into the weights; panels that miss the source support are skipped.
fn far_quadrature(src: &TensorSource, x0: [f64; 3], cut: &Cutoff, rho: f64, nodes: usize) -> (Vec<[f64; 3]>, Vec<f64>) {
    let scale = src.feature_scale().min(cut.scale);
    let a = cut.inner();
    let b = cut.outer();
    let mut breaks: Vec<f64> = (0..=4).map(|k| a + (b - a) * k as f64 / 4.0).collect();
    let tail = geometric_breaks(b, rho, 0.5 * (b - a), 1.4);
    breaks.extend_from_slice(&tail[1..]);
    let support = src.support();
    let panels: Vec<(f64, f64)> = breaks
        .windows(2)
        .map(|w| (w[0], w[1]))
        .filter(|&(lo, hi)| match support {
            Some((c, r)) => {
                let d = norm(sub(c, x0));
                d + r >= lo && d - r <= hi
            }
            None => true,
        })
        .collect();
    let per_panel = exec::map(panels.len(), |p| {
        let (lo, hi) = panels[p];
        let rule = SphereRule::for_degree(sphere_degree(hi, scale));
        let mut pts = Vec::new();
        let mut wts = Vec::new();
        for &(r, wr) in &composite(&[lo, hi], nodes) {
            let damp = 1.0 - cut.radial(r);
            for (d, wd) in rule.directions.iter().zip(&rule.weights) {
                pts.push([x0[0] + r * d[0], x0[1] + r * d[1], x0[2] + r * d[2]]);
                wts.push(wr * wd * r * r * damp);
            }
        }
        (pts, wts)
    });
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for (p, w) in per_panel {
        points.extend(p);
        weights.extend(w);
    }
    (points, weights)
}

impl FarNodes {
    fn from_grid(slice: &GridField, x0: [f64; 3], cut: &Cutoff, rho: f64) -> Self {
        let spec = &slice.spec;
        let h3 = spec.cell_volume();
        let inner2 = cut.inner().powi(2);
        let rho2 = rho * rho;
        let fmax = slice.max_abs();
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for i in 0..spec.len() {
            let y = spec.point(i);
            let r2 = dist2(y, x0);
            if r2 < inner2 || r2 > rho2 {
                continue;
            }
            let w = (1.0 - cut.eval(sub(y, x0))) * h3;
            let f = slice.at(0, i);
            if f.iter().all(|v| v.abs() <= 1e-300 + 1e-18 * fmax) {
                continue;
            }
            points.push(y);
            weights.push(f.map(|v| v * w));
        }
        Self { points, weights }
    }

    fn from_analytic(src: &TensorSource, t: f64, x0: [f64; 3], cut: &Cutoff, rho: f64, nodes: usize) -> Self {
        let (pts, wts) = far_quadrature(src, x0, cut, rho, nodes);
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for (y, w) in pts.into_iter().zip(wts) {
            let f = src.eval(y, t);
            if f.iter().all(|v| *v == 0.0) {
                continue;
            }
            points.push(y);
            weights.push(f.map(|v| v * w));
        }
        Self { points, weights }
    }

    /// `Σ_q K(z − y_q) ⊙ w_q`.
    fn kernel_sum(&self, z: [f64; 3]) -> f64 {
        let n = self.points.len();
        exec::sum(n, |q| {
            let k = cz_all(sub(z, self.points[q]));
            sym_contract(&k, &self.weights[q])
        })
    }

    /// `far(x) = Σ_q (K(x − y_q) − K(x₀ − y_q)) ⊙ w_q` at every point.
    fn evaluate(&self, xs: &[[f64; 3]], x0: [f64; 3]) -> Vec<f64> {
        let base = self.kernel_sum(x0);
        let n = self.points.len();
        exec::map(xs.len(), |m| {
            let x = xs[m];
            let mut s = 0.0;
            for q in 0..n {
                let k = cz_all(sub(x, self.points[q]));
                s += sym_contract(&k, &self.weights[q]);
            }
            s - base
        })
    }
}

/// Near and far parts of the expansion at the nodes of `B_R(x₀)` on `spec`.
pub fn lpe_apply(
    source: Source,
    spec: &GridSpec,
    x0: [f64; 3],
    radius: f64,
    t: f64,
    opts: &LpeOptions,
) -> Result<PressureDecomposition> {
    source.check()?;
    let rho = opts.validate(radius)?;
    let spec = spec.spatial();
    let cut = Cutoff::for_ball(radius, opts.rebased);
    if !spec.contains_ball(x0, radius) {
        return Err(Error::SupportOutsideBall);
    }
    check_extension(&source, &spec, x0, &cut)?;
    let slice = source.slice(&spec, t)?;
    let near_all = near_full(&slice, x0, &cut, opts.padding)?;
    let nodes = spec.ball_indices(x0, radius);
    let far_nodes = match source {
        Source::Grid(_) => FarNodes::from_grid(&slice, x0, &cut, rho),
        Source::Analytic(s) => FarNodes::from_analytic(s, t, x0, &cut, rho, opts.radial_nodes),
    };
    let xs: Vec<[f64; 3]> = nodes.iter().map(|&i| spec.point(i)).collect();
    let far_vals = far_nodes.evaluate(&xs, x0);
    let mut near = GridField::zeros(spec.clone(), Rank::Scalar);
    let mut far = GridField::zeros(spec.clone(), Rank::Scalar);
    for (m, &i) in nodes.iter().enumerate() {
        near.data[i] = near_all[i];
        far.data[i] = far_vals[m];
    }
    let tail = match (source, source_support_within(&source, x0, rho)) {
        (_, true) => 0.0,
        (Source::Grid(f), false) => {
            let reach = spec.boundary_distance(x0).min(rho).max(cut.outer());
            tail_bound(radius, f.boundary_max(), reach)
        }
        (Source::Analytic(_), false) => tail_bound(radius, source.sup_bound(t), rho),
    };
    Ok(PressureDecomposition {
        center: x0,
        radius,
        rho_max: rho,
        rebased: opts.rebased,
        nodes,
        near,
        far,
        constant: vec![(t, 0.0)],
        tail_bound: vec![tail],
    })
}

fn source_support_within(source: &Source, x0: [f64; 3], rho: f64) -> bool {
    match source {
        Source::Analytic(s) => match s.support() {
            Some((c, r)) => norm(sub(c, x0)) + r <= rho,
            None => false,
        },
        Source::Grid(f) => {
            let e = f.spec.extents();
            let diag = (e[0] * e[0] + e[1] * e[1] + e[2] * e[2]).sqrt();
            f.spec.boundary_distance(x0) >= 0.0 && diag <= rho
        }
    }
}

/// `∫ K(d) ⊙ g(x + d)` as a principal value with the `−tr g(x)/3` term,
/// for `g` supported within distance `reach` of `x`.
fn pv_contract<G>(g: G, x: [f64; 3], reach: f64, r0: f64, scale: f64, nodes: usize) -> f64
where
    G: Fn([f64; 3]) -> [f64; 6] + Sync + Send,
{
    let gx = g(x);
    let shift = |d: [f64; 3], r: f64| [x[0] + r * d[0], x[1] + r * d[1], x[2] + r * d[2]];
    let inner = spherical_integral(&[0.0, 0.5 * r0, r0], nodes, scale, |d, r| {
        let mut v = g(shift(d, r));
        for c in 0..6 {
            v[c] -= gx[c];
        }
        sym_contract(&cz_all(d), &v) / (r * r * r)
    });
    let breaks = geometric_breaks(r0, reach.max(2.0 * r0), r0, 1.4);
    let outer = spherical_integral(&breaks, nodes, scale, |d, r| sym_contract(&cz_all(d), &g(shift(d, r))) / (r * r * r));
    inner + outer - (gx[0] + gx[3] + gx[5]) / 3.0
}

/// Pointwise near and far parts at an arbitrary `x ∈ B_R(x₀)` for a closed-form source.
pub fn lpe_point(
    src: &TensorSource,
    x0: [f64; 3],
    radius: f64,
    x: [f64; 3],
    t: f64,
    opts: &LpeOptions,
) -> Result<(f64, f64)> {
    let rho = opts.validate(radius)?;
    if norm(sub(x, x0)) > radius * (1.0 + 1e-12) {
        return Err(Error::SupportOutsideBall);
    }
    let cut = Cutoff::for_ball(radius, opts.rebased);
    let scale = src.feature_scale().min(cut.scale);
    let r0 = 0.25 * scale.min(radius);
    let reach = norm(sub(x, x0)) + cut.outer();
    let near = pv_contract(
        |y| {
            let th = cut.eval(sub(y, x0));
            if th == 0.0 {
                [0.0; 6]
            } else {
                src.eval(y, t).map(|v| v * th)
            }
        },
        x,
        reach,
        r0,
        scale,
        opts.radial_nodes,
    );
    let far_nodes = FarNodes::from_analytic(src, t, x0, &cut, rho, opts.radial_nodes);
    let far = far_nodes.evaluate(&[x], x0)[0];
    Ok((near, far))
}

#[derive(Clone, Debug, Serialize)]
pub struct ShellConstants {
    /// `(k, c_k)` for `k = 2..=n_max`.
    pub constants: Vec<(usize, f64)>,
    /// `(n, c̃_n = Σ_{k=2}^n c_k)`.
    pub cumulative: Vec<(usize, f64)>,
}

/// `c_k = −∫ K(y)(θ_{k+1}(y) − θ_k(y)) f(y) dy`, `k = 2..=n_max`.
pub fn shell_constants(source: Source, n_max: usize, t: f64, opts: &LpeOptions) -> Result<ShellConstants> {
    source.check()?;
    let mut constants = Vec::new();
    for k in 2..=n_max {
        constants.push((k, shell_constant(&source, k, t, opts)?));
    }
    let mut acc = 0.0;
    let cumulative = constants
        .iter()
        .map(|&(k, c)| {
            acc += c;
            (k, acc)
        })
        .collect();
    Ok(ShellConstants { constants, cumulative })
}

fn shell_constant(source: &Source, k: usize, t: f64, opts: &LpeOptions) -> Result<f64> {
    let lo_cut = Cutoff::for_ball(k as f64, opts.rebased);
    let hi_cut = Cutoff::for_ball(k as f64 + 1.0, opts.rebased);
    let (a, b) = (lo_cut.inner(), hi_cut.outer());
    let weight = |y: [f64; 3]| hi_cut.eval(y) - lo_cut.eval(y);
    match source {
        Source::Analytic(src) => {
            if let Some((c, r)) = src.support() {
                if norm(c) + r <= a {
                    return Ok(0.0);
                }
            }
            let scale = src.feature_scale().min(1.0);
            let breaks: Vec<f64> = (0..=8).map(|m| a + (b - a) * m as f64 / 8.0).collect();
            let v = spherical_integral(&breaks, opts.radial_nodes, scale, |d, r| {
                let y = [r * d[0], r * d[1], r * d[2]];
                let w = weight(y);
                if w == 0.0 {
                    return 0.0;
                }
                sym_contract(&cz_all(d), &src.eval(y, t)) * w / (r * r * r)
            });
            Ok(-v)
        }
        Source::Grid(f) => {
            let have = f.spec.boundary_distance([0.0; 3]);
            if have < b {
                return Err(Error::ExtensionRadius { needed: b, have });
            }
            let slice = static_slice(f, t)?;
            let idx = f.spec.ball_indices([0.0; 3], b);
            let h3 = f.spec.cell_volume();
            let v = exec::sum(idx.len(), |m| {
                let i = idx[m];
                let y = f.spec.point(i);
                let w = weight(y);
                if w == 0.0 {
                    return 0.0;
                }
                sym_contract(&cz_all(y), &slice.at(0, i)) * w
            });
            Ok(-v * h3)
        }
    }
}

/// Which shell evaluates the patched pressure at `x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ShellPolicy {
    /// Smallest `n ≥ 1` with `|x| < n`.
    Minimal,
    Fixed(usize),
}

/// `p̄(x) = G^{B_{n+1}} f(x) + Σ_{k=2}^n c_k` for `x ∈ B_n(0)`.
pub fn patched_pressure_eval(
    src: &TensorSource,
    x: [f64; 3],
    policy: ShellPolicy,
    t: f64,
    opts: &LpeOptions,
) -> Result<f64> {
    let r = norm(x);
    let n = match policy {
        ShellPolicy::Minimal => (r.floor() as usize + 1).max(1),
        ShellPolicy::Fixed(n) => n,
    };
    if n == 0 || r >= n as f64 {
        return Err(Error::Invalid(format!("point |x| = {r} is not inside shell B_{n}")));
    }
    let ball = n as f64 + 1.0;
    let (near, far) = lpe_point(src, [0.0; 3], ball, x, t, opts)?;
    let consts = if n >= 2 {
        shell_constants(Source::Analytic(src), n, t, opts)?.cumulative.last().map_or(0.0, |c| c.1)
    } else {
        0.0
    };
    Ok(near + far + consts)
}

/// What the spatial factor of the pairing is.
#[derive(Clone, Copy, Debug)]
pub enum Pairing {
    /// `⟨p, ψ⟩`.
    Scalar(TestFunction),
    /// `⟨∇p, Ψ⟩ = −⟨p, ∇·Ψ⟩`.
    Gradient(VectorTestFunction),
}

impl Pairing {
    fn scalar(&self) -> &TestFunction {
        match self {
            Pairing::Scalar(p) => p,
            Pairing::Gradient(v) => &v.scalar,
        }
    }
}

/// Linear functional `f ↦ ⟨p[f], φ⟩` assembled once per test function.
struct DlpeFunctional {
    /// Grid nodes in `B_{4R}(x₀)` with weights `θ R_iR_jφ h³` (multiplicity folded in).
    near_nodes: Vec<usize>,
    near_weights: Vec<[f64; 6]>,
    /// Far weight tensor per node or quadrature point (multiplicity folded in).
    far_nodes: Vec<usize>,
    far_points: Vec<[f64; 3]>,
    far_weights: Vec<[f64; 6]>,
    zero: bool,
}

impl DlpeFunctional {
    fn new(
        spec: &GridSpec,
        pairing: &Pairing,
        x0: [f64; 3],
        radius: f64,
        opts: &LpeOptions,
        analytic_far: Option<&TensorSource>,
    ) -> Result<Self> {
        let psi = pairing.scalar();
        psi.validate()?;
        psi.check_inside(spec)?;
        if norm(sub(psi.center, x0)) + psi.radius > radius * (1.0 + 1e-12) {
            return Err(Error::SupportOutsideBall);
        }
        let rho = opts.validate(radius)?;
        let cut = Cutoff::for_ball(radius, opts.rebased);
        let h3 = spec.cell_volume();
        // Spatial factor φ of the pairing, and its far-field weight.
        let (phi, sign, curl) = match pairing {
            Pairing::Scalar(p) => (sample_spatial(p, spec), 1.0, false),
            Pairing::Gradient(v) => {
                if v.kind == VectorKind::Curl {
                    (vec![0.0; spec.len()], -1.0, true)
                } else {
                    let mut out = vec![0.0; spec.len()];
                    for i in spec.ball_indices(psi.center, psi.radius) {
                        out[i] = v.spatial_divergence(spec.point(i));
                    }
                    (out, -1.0, false)
                }
            }
        };
        if curl {
            return Ok(Self {
                near_nodes: vec![],
                near_weights: vec![],
                far_nodes: vec![],
                far_points: vec![],
                far_weights: vec![],
                zero: true,
            });
        }
        let psi_mass = {
            let s = sample_spatial(psi, spec);
            exec::sum(s.len(), |i| s[i]) * h3
        };
        // near weights: θ R_iR_jφ
        let padded = Padded::new(spec, opts.padding)?;
        let plan = padded.plan();
        let base = plan.forward(&padded.embed(&phi));
        let near_nodes = spec.ball_indices(x0, cut.outer());
        let mut near_weights = vec![[0.0; 6]; near_nodes.len()];
        for (c, &(i, j)) in crate::field::SYM_PAIRS.iter().enumerate() {
            let mut s = base.clone();
            plan.for_each_mode(&mut s, false, |xi, v| *v *= crate::riesz::riesz_symbol(i, j, xi, 0.0));
            let r = padded.crop(&plan.inverse(s));
            for (m, &node) in near_nodes.iter().enumerate() {
                let th = cut.eval(sub(spec.point(node), x0));
                near_weights[m][c] = sign * SYM_MULT[c] * th * r[node] * h3;
            }
        }
        // far kernel: K(c−y) − K(x₀−y) for ψ, (a·∇K)(c−y) for ∇·Ψ
        let far_kernel = |y: [f64; 3]| -> [f64; 6] {
            match pairing {
                Pairing::Scalar(_) => {
                    let a = cz_all(sub(psi.center, y));
                    let b = cz_all(sub(x0, y));
                    std::array::from_fn(|c| (a[c] - b[c]) * psi_mass)
                }
                Pairing::Gradient(v) => {
                    let g = cz_grad_all(sub(psi.center, y));
                    std::array::from_fn(|c| -sign * dot(v.axis, [g[0][c], g[1][c], g[2][c]]) * psi_mass)
                }
            }
        };
        let mut far_nodes = Vec::new();
        let mut far_points = Vec::new();
        let mut far_weights = Vec::new();
        match analytic_far {
            None => {
                let inner2 = cut.inner().powi(2);
                let rho2 = rho * rho;
                for i in 0..spec.len() {
                    let y = spec.point(i);
                    let r2 = dist2(y, x0);
                    if r2 < inner2 || r2 > rho2 {
                        continue;
                    }
                    let w = (1.0 - cut.eval(sub(y, x0))) * h3;
                    let k = far_kernel(y);
                    far_nodes.push(i);
                    far_weights.push(std::array::from_fn(|c| SYM_MULT[c] * k[c] * w));
                }
            }
            Some(src) => {
                let (pts, wts) = far_quadrature(src, x0, &cut, rho, opts.radial_nodes);
                for (y, w) in pts.into_iter().zip(wts) {
                    let k = far_kernel(y);
                    far_points.push(y);
                    far_weights.push(std::array::from_fn(|c| SYM_MULT[c] * k[c] * w));
                }
            }
        }
        Ok(Self { near_nodes, near_weights, far_nodes, far_points, far_weights, zero: false })
    }

    /// Grid part and far part for one static source slice on the grid.
    fn apply_grid(&self, slice: &GridField) -> f64 {
        if self.zero {
            return 0.0;
        }
        let near = exec::sum(self.near_nodes.len(), |m| {
            let f = slice.at(0, self.near_nodes[m]);
            (0..6).map(|c| self.near_weights[m][c] * f[c]).sum::<f64>()
        });
        let far = exec::sum(self.far_nodes.len(), |m| {
            let f = slice.at(0, self.far_nodes[m]);
            (0..6).map(|c| self.far_weights[m][c] * f[c]).sum::<f64>()
        });
        near + far
    }

    fn apply_analytic(&self, slice: &GridField, src: &TensorSource, t: f64) -> f64 {
        if self.zero {
            return 0.0;
        }
        let near = exec::sum(self.near_nodes.len(), |m| {
            let f = slice.at(0, self.near_nodes[m]);
            (0..6).map(|c| self.near_weights[m][c] * f[c]).sum::<f64>()
        });
        let far = exec::sum(self.far_points.len(), |q| {
            let f = src.eval(self.far_points[q], t);
            (0..6).map(|c| self.far_weights[q][c] * f[c]).sum::<f64>()
        });
        near + far
    }
}

/// Time nodes `(t, w·β(t))` of a pairing on a trajectory's axis or on Gauss nodes.
fn time_nodes(psi: &TestFunction, axis: Option<crate::field::TimeAxis>, n_gauss: usize) -> Vec<(f64, f64)> {
    match (psi.window, axis) {
        (None, _) => vec![(0.0, 1.0)],
        (Some((a, b)), Some(ax)) => {
            let w = ax.trapezoid_weights();
            (0..ax.nt)
                .filter_map(|n| {
                    let t = ax.time(n);
                    if t > a && t < b {
                        Some((t, w[n] * psi.temporal(t).0))
                    } else {
                        None
                    }
                })
                .collect()
        }
        (Some(_), None) => psi.time_nodes(n_gauss).into_iter().map(|(t, w)| (t, w * psi.temporal(t).0)).collect(),
    }
}

/// `⟨p_near + p_far, ψ⟩` (or `⟨∇p, Ψ⟩`) for the expansion on `B_R(x₀)`.
///
/// Near part: `∫∫ f_ij θ R_iR_jφ`. Far part by Fubini: for radial `φ` supported
/// in `B_R(x₀)` the mean-value property gives `∫K(x−y)φ(x)dx = K(c−y)∫φ`.
pub fn dlpe_pair(
    source: Source,
    spec: &GridSpec,
    pairing: &Pairing,
    x0: [f64; 3],
    radius: f64,
    opts: &LpeOptions,
) -> Result<f64> {
    source.check()?;
    let spec = spec.spatial();
    let psi = *pairing.scalar();
    let cut = Cutoff::for_ball(radius, opts.rebased);
    check_extension(&source, &spec, x0, &cut)?;
    match source {
        Source::Grid(f) => {
            if f.spec.spatial() != spec {
                return Err(Error::Invalid("grid source must live on the evaluation grid".into()));
            }
            if psi.window.is_some() && f.spec.time.is_none() {
                return Err(Error::MissingTimeAxis);
            }
            let func = DlpeFunctional::new(&spec, pairing, x0, radius, opts, None)?;
            let nodes = time_nodes(&psi, f.spec.time, 0);
            let mut total = 0.0;
            for (t, w) in nodes {
                if w == 0.0 {
                    continue;
                }
                let slice = static_slice(f, t)?;
                total += w * func.apply_grid(&slice);
            }
            Ok(total)
        }
        Source::Analytic(src) => {
            let nodes = time_nodes(&psi, None, 16);
            let func = DlpeFunctional::new(&spec, pairing, x0, radius, opts, Some(src))?;
            let mut total = 0.0;
            for (t, w) in nodes {
                if w == 0.0 {
                    continue;
                }
                let slice = source.slice(&spec, t)?;
                total += w * func.apply_analytic(&slice, src, t);
            }
            Ok(total)
        }
    }
}

/// `⟨∇p, Ψ⟩ = −⟨p, ∇·Ψ⟩` with `p` the expansion on `B_R(x₀)`.
pub fn grad_pressure_pair(
    source: Source,
    spec: &GridSpec,
    psi: &VectorTestFunction,
    x0: [f64; 3],
    radius: f64,
    opts: &LpeOptions,
) -> Result<f64> {
    dlpe_pair(source, spec, &Pairing::Gradient(*psi), x0, radius, opts)
}

/// `u ⊗ u` of a vector trajectory, as a pressure source.
pub fn momentum_flux(u: &GridField) -> Result<GridField> {
    u.outer_square()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::make_gaussian_curl;

    #[test]
    fn under_resolved_far_field_errors() {
        let src = TensorSource::Constant([1.0, 0.0, 0.0, 1.0, 0.0, 1.0]);
        let spec = GridSpec::cube(4.0, 17).unwrap();
        let o = LpeOptions { rho_max: Some(7.0), ..Default::default() };
        let e = lpe_apply(Source::Analytic(&src), &spec, [0.0; 3], 1.0, 0.0, &o).unwrap_err();
        assert!(e.to_string().contains("far field under-resolved"));
    }

    #[test]
    fn compact_source_has_no_far_part() {
        let src = TensorSource::Bump { center: [0.0; 3], radius: 1.5, tensor: [1.0, 0.2, 0.0, 0.5, 0.0, 0.3] };
        let spec = GridSpec::cube(4.0, 33).unwrap();
        let d = lpe_apply(Source::Analytic(&src), &spec, [0.0; 3], 1.0, 0.0, &LpeOptions::default()).unwrap();
        assert!(d.far.max_abs() == 0.0);
        assert_eq!(d.tail_bound[0], 0.0);
    }

    #[test]
    fn shell_constant_vanishes_for_inner_support() {
        let src = TensorSource::Bump { center: [0.0; 3], radius: 3.5, tensor: [1.0; 6] };
        let s = shell_constants(Source::Analytic(&src), 4, 0.0, &LpeOptions::default()).unwrap();
        assert_eq!(s.constants[0].1, 0.0 * s.constants[0].1);
        assert_eq!(s.constants[1].1, 0.0);
        assert_eq!(s.constants[2].1, 0.0);
    }

    #[test]
    fn curl_test_function_gives_zero() {
        let u = make_gaussian_curl(0.1, 0.6, [0.0; 3]).unwrap();
        let src = TensorSource::Outer(u);
        let spec = GridSpec::cube(4.0, 25).unwrap();
        let psi = VectorTestFunction::curl([0.0, 0.0, 1.0], TestFunction::bump([0.0; 3], 0.8));
        let v = grad_pressure_pair(Source::Analytic(&src), &spec, &psi, [0.0; 3], 1.0, &LpeOptions::default())
            .unwrap();
        assert_eq!(v, 0.0);
    }
}
