//! Calderón–Zygmund kernel, its far-field truncation, heat kernel and Oseen tensor.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec;
use crate::field::grid::{dot, norm, sub};
use crate::field::{sym_index, Cutoff, GridField, GridSpec, Rank, SYM_PAIRS};
use crate::spectral::Padded;

const FOUR_PI: f64 = 4.0 * PI;

fn check_index(i: usize, j: usize) -> Result<()> {
    if i > 2 || j > 2 {
        return Err(Error::Invalid(format!("kernel index ({i},{j}) out of range")));
    }
    Ok(())
}

/// `K_ij(y) = (−δ_ij|y|² + 3 y_i y_j) / (4π|y|⁵)`, indices zero-based.
pub fn cz_eval(i: usize, j: usize, y: [f64; 3]) -> Result<f64> {
    check_index(i, j)?;
    let r2 = dot(y, y);
    if r2 == 0.0 {
        return Err(Error::KernelSingularity);
    }
    Ok(cz_component(i, j, y, r2))
}

#[inline]
fn cz_component(i: usize, j: usize, y: [f64; 3], r2: f64) -> f64 {
    let delta = if i == j { r2 } else { 0.0 };
    (3.0 * y[i] * y[j] - delta) / (FOUR_PI * r2 * r2 * r2.sqrt())
}

/// All six stored components at `y ≠ 0` (unchecked).
#[inline]
pub fn cz_all(y: [f64; 3]) -> [f64; 6] {
    let r2 = dot(y, y);
    let inv = 1.0 / (FOUR_PI * r2 * r2 * r2.sqrt());
    let mut out = [0.0; 6];
    for (c, &(i, j)) in SYM_PAIRS.iter().enumerate() {
        let delta = if i == j { r2 } else { 0.0 };
        out[c] = (3.0 * y[i] * y[j] - delta) * inv;
    }
    out
}

/// `∂_l K_c(y)` for every stored component `c`: `out[l][c]`.
#[inline]
pub fn cz_grad_all(y: [f64; 3]) -> [[f64; 6]; 3] {
    let r2 = dot(y, y);
    let r5 = r2 * r2 * r2.sqrt();
    let r7 = r5 * r2;
    let mut out = [[0.0; 6]; 3];
    for l in 0..3 {
        for (c, &(i, j)) in SYM_PAIRS.iter().enumerate() {
            let dij = if i == j { 1.0 } else { 0.0 };
            let dil = if i == l { 1.0 } else { 0.0 };
            let djl = if j == l { 1.0 } else { 0.0 };
            let num = -2.0 * dij * y[l] + 3.0 * dil * y[j] + 3.0 * djl * y[i];
            let k = -dij * r2 + 3.0 * y[i] * y[j];
            out[l][c] = num / (FOUR_PI * r5) - 5.0 * y[l] * k / (FOUR_PI * r7);
        }
    }
    out
}

/// `K^{2R}_ij(x) = K_ij(x)(1 − θ_R(x))`; zero on `B_{2R}` without touching the singularity.
pub fn truncated(i: usize, j: usize, x: [f64; 3], cutoff: &Cutoff) -> Result<f64> {
    check_index(i, j)?;
    let w = 1.0 - cutoff.eval(x);
    if w == 0.0 {
        return Ok(0.0);
    }
    Ok(cz_component(i, j, x, dot(x, x)) * w)
}

/// `K_ij(x−y) − K^{2R}_ij(x−x₀)`.
pub fn corrected_difference(
    i: usize,
    j: usize,
    x: [f64; 3],
    y: [f64; 3],
    x0: [f64; 3],
    radius: f64,
) -> Result<f64> {
    let near = cz_eval(i, j, sub(x, y))?;
    Ok(near - truncated(i, j, sub(x, x0), &Cutoff::new(radius))?)
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayFit {
    /// `sup |ΔK|·|x−x₀|⁴ / R` over all sampled configurations and components.
    pub constant: f64,
    pub samples: usize,
    pub radius: f64,
}

/// Monte-Carlo sup of `|K_ij(x−y) − K^{2R}_ij(x−x₀)|·|x−x₀|⁴/R` over
/// `y ∈ B_R(x₀)`, `|x−x₀| ≥ 2R`.
pub fn corrected_decay_fit(radius: f64, samples: usize, seed: u64) -> DecayFit {
    let x0 = [0.3, -0.1, 0.2];
    let configs: Vec<([f64; 3], [f64; 3])> = {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..samples)
            .map(|_| {
                let dir = random_unit(&mut rng);
                // radii concentrate near the cutoff band where the sup lives
                let u: f64 = rng.gen();
                let rho = radius * (2.0 + 10.0 * u * u * u);
                let x = [x0[0] + rho * dir[0], x0[1] + rho * dir[1], x0[2] + rho * dir[2]];
                let ydir = random_unit(&mut rng);
                let s = radius * rng.gen::<f64>().cbrt();
                let y = [x0[0] + s * ydir[0], x0[1] + s * ydir[1], x0[2] + s * ydir[2]];
                (x, y)
            })
            .collect()
    };
    let cut = Cutoff::new(radius);
    let constant = exec::max(configs.len(), |n| {
        let (x, y) = configs[n];
        let near = cz_all(sub(x, y));
        let xr = sub(x, x0);
        let far = cz_all(xr);
        let w = 1.0 - cut.eval(xr);
        let r4 = dot(xr, xr).powi(2);
        (0..6).map(|c| (near[c] - far[c] * w).abs()).fold(0.0, f64::max) * r4 / radius
    });
    DecayFit { constant, samples, radius }
}

pub fn random_unit(rng: &mut impl Rng) -> [f64; 3] {
    loop {
        let v = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let n = norm(v);
        if n > 1e-3 && n <= 1.0 {
            return v.map(|c| c / n);
        }
    }
}

/// `(4πt)^{−3/2} e^{−|x|²/4t}`.
pub fn heat_kernel(x: [f64; 3], t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Invalid(format!("heat kernel needs t > 0, got {t}")));
    }
    Ok((FOUR_PI * t).powf(-1.5) * (-dot(x, x) / (4.0 * t)).exp())
}

/// `e^{−t|ξ|²}`.
pub fn heat_multiplier(xi: [f64; 3], t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Invalid(format!("heat multiplier needs t > 0, got {t}")));
    }
    Ok((-t * dot(xi, xi)).exp())
}

/// Oseen tensor `S(·, t)` sampled on a grid, obtained by inverting the symbol
/// `e^{−t|ξ|²}(δ_ij − ξ_iξ_j/|ξ|²)` on a periodic box.
#[derive(Clone, Debug)]
pub struct OseenTable {
    pub t: f64,
    pub field: GridField,
}

impl OseenTable {
    /// The origin must be a node of `spec`. The zero mode takes the
    /// spherical average `(2/3)δ_ij`.
    pub fn new(spec: &GridSpec, t: f64) -> Result<Self> {
        if !(t > 0.0) {
            return Err(Error::Invalid(format!("oseen tensor needs t > 0, got {t}")));
        }
        let spec = spec.spatial();
        // The box itself is the period; shift so the origin sits at index 0.
        let padded = Padded::new(&spec, 1.0)?;
        if padded.dims != spec.counts {
            return Err(Error::Invalid("oseen table counts must be 2,3,5-smooth".into()));
        }
        let plan = padded.plan();
        let [nx, ny, nz] = spec.counts;
        let origin_idx = spec
            .node_of([0.0; 3])
            .ok_or_else(|| Error::Invalid("origin must be a grid node".into()))?;
        let [oi, oj, ok] = spec.ijk(origin_idx);
        let mut field = GridField::zeros(spec.clone(), Rank::SymTensor);
        let vol = (nx * ny * nz) as f64 * spec.cell_volume();
        for (c, &(i, j)) in SYM_PAIRS.iter().enumerate() {
            let mut s = vec![crate::spectral::C64::new(0.0, 0.0); plan.spectral_len()];
            plan.for_each_mode(&mut s, false, |xi, v| {
                let k2 = dot(xi, xi);
                let delta = if i == j { 1.0 } else { 0.0 };
                let proj = if k2 == 0.0 { 2.0 / 3.0 * delta } else { delta - xi[i] * xi[j] / k2 };
                *v = crate::spectral::C64::new((-t * k2).exp() * proj, 0.0);
            });
            // inverse gives Σ_k m(k) e^{ikx} / N; continuum needs Σ m / V.
            let raw = plan.inverse(s);
            let scale = (nx * ny * nz) as f64 / vol;
            let out = field.slice_mut(0, c);
            for a in 0..nx {
                for b in 0..ny {
                    for d in 0..nz {
                        let src = (((a + nx - oi) % nx) * ny + (b + ny - oj) % ny) * nz + (d + nz - ok) % nz;
                        out[(a * ny + b) * nz + d] = raw[src] * scale;
                    }
                }
            }
        }
        Ok(Self { t, field })
    }

    /// Scale-adapted table: box side `48√t`, `n` nodes per axis rounded up to a smooth size.
    pub fn scaled(t: f64, n: usize) -> Result<Self> {
        let n = crate::spectral::good_size(n);
        let h = 48.0 * t.sqrt() / n as f64;
        let half = n / 2;
        let spec = GridSpec::new([-(half as f64) * h; 3], h, [n; 3])?;
        Self::new(&spec, t)
    }

    pub fn eval(&self, i: usize, j: usize, x: [f64; 3]) -> f64 {
        self.field.interpolate(0, x)[sym_index(i, j)]
    }
}

/// `S_ij(x, t)` by trilinear interpolation in a scale-adapted 96³ table.
pub fn oseen_eval(i: usize, j: usize, x: [f64; 3], t: f64) -> Result<f64> {
    check_index(i, j)?;
    if norm(x) > 20.0 * t.max(0.0).sqrt() {
        return Err(Error::Invalid("oseen_eval supports |x| <= 20 sqrt(t)".into()));
    }
    Ok(OseenTable::scaled(t, 96)?.eval(i, j, x))
}

#[derive(Clone, Debug, Serialize)]
pub struct OseenFit {
    pub constant: f64,
    pub per_time: Vec<(f64, f64)>,
}

/// `sup |S_ij(x,t)|·(|x|+√t)³` over nodes with `√t ≤ |x| ≤ 20√t`, for each `t`,
/// on one fixed physical grid.
pub fn oseen_decay_fit(spec: &GridSpec, times: &[f64]) -> Result<OseenFit> {
    let mut per_time = Vec::new();
    for &t in times {
        let table = OseenTable::new(spec, t)?;
        let st = t.sqrt();
        let n = spec.len();
        let v = exec::max(n, |idx| {
            let x = spec.point(idx);
            let r = norm(x);
            if r < st || r > 20.0 * st || !spec.contains_ball(x, 0.25 * r) {
                return 0.0;
            }
            let m = table.field.at(0, idx).iter().fold(0.0, |m: f64, v| m.max(v.abs()));
            m * (r + st).powi(3)
        });
        per_time.push((t, v));
    }
    let constant = per_time.iter().fold(0.0, |m: f64, p| m.max(p.1));
    Ok(OseenFit { constant, per_time })
}

/// Self-similar value `S_ii(0, t)·t^{3/2} = (2/3)(4π)^{−3/2}`.
pub fn oseen_origin_constant() -> f64 {
    2.0 / 3.0 * FOUR_PI.powf(-1.5)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_values() {
        assert!((cz_eval(0, 0, [1.0, 0.0, 0.0]).unwrap() - 1.0 / (2.0 * PI)).abs() < 1e-15);
        assert_eq!(cz_eval(0, 1, [0.0, 0.0, 1.0]).unwrap(), 0.0);
        assert!(matches!(cz_eval(0, 0, [0.0; 3]), Err(Error::KernelSingularity)));
    }

    #[test]
    fn gradient_matches_differences() {
        let y = [0.4, -0.7, 0.3];
        let g = cz_grad_all(y);
        let h = 1e-6;
        for l in 0..3 {
            let mut p = y;
            let mut m = y;
            p[l] += h;
            m[l] -= h;
            let (a, b) = (cz_all(p), cz_all(m));
            for c in 0..6 {
                let fd = (a[c] - b[c]) / (2.0 * h);
                assert!((fd - g[l][c]).abs() < 1e-6 * (1.0 + fd.abs()), "{l} {c}");
            }
        }
    }

    #[test]
    fn truncation_regions_are_exact() {
        let cut = Cutoff::new(1.5);
        assert_eq!(truncated(0, 1, [1.0, 1.0, 1.0], &cut).unwrap(), 0.0);
        let far = [7.0, 3.0, 1.0];
        assert_eq!(truncated(0, 1, far, &cut).unwrap(), cz_eval(0, 1, far).unwrap());
        let v = corrected_difference(0, 0, [0.5, 0.0, 0.0], [0.1, 0.2, 0.0], [0.0; 3], 1.0).unwrap();
        assert_eq!(v, cz_eval(0, 0, [0.4, -0.2, 0.0]).unwrap());
    }

    #[test]
    fn heat_kernel_values() {
        let t = 0.3;
        assert!((heat_kernel([0.0; 3], t).unwrap() - (4.0 * PI * t).powf(-1.5)).abs() < 1e-14);
        assert!(heat_kernel([0.0; 3], 0.0).is_err());
        assert_eq!(heat_multiplier([0.0; 3], 1.0).unwrap(), 1.0);
    }

    #[test]
    fn oseen_origin_self_similar() {
        for t in [0.25, 1.0] {
            let table = OseenTable::scaled(t, 64).unwrap();
            let v = table.eval(0, 0, [0.0; 3]) * t.powf(1.5);
            assert!((v - oseen_origin_constant()).abs() < 1e-3 * oseen_origin_constant(), "{v}");
        }
    }
}
