use std::collections::HashMap;
use std::f64::consts::PI;
use std::num::NonZeroUsize;
use std::sync::{Arc, Mutex, OnceLock};

use gauss_quad::{GaussHermite, GaussLegendre};

use super::grid::GridSpec;

fn legendre_cache() -> &'static Mutex<HashMap<usize, Arc<Vec<(f64, f64)>>>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Vec<(f64, f64)>>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Arc<Vec<(f64, f64)>> {
    let n = n.max(1);
    let mut cache = legendre_cache().lock().expect("quadrature cache");
    cache
        .entry(n)
        .or_insert_with(|| {
            let rule = GaussLegendre::new(NonZeroUsize::new(n).expect("n >= 1"));
            Arc::new(rule.as_node_weight_pairs().to_vec())
        })
        .clone()
}

/// Gauss–Hermite nodes and weights for the weight `e^{-x^2}`.
pub fn gauss_hermite(n: usize) -> Vec<(f64, f64)> {
    let rule = GaussHermite::new(NonZeroUsize::new(n.max(1)).expect("n >= 1"));
    rule.as_node_weight_pairs().to_vec()
}

/// Gauss–Legendre rule mapped to `[a, b]`.
pub fn legendre_on(a: f64, b: f64, n: usize) -> Vec<(f64, f64)> {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    gauss_legendre(n).iter().map(|&(x, w)| (mid + half * x, half * w)).collect()
}

/// Composite Gauss–Legendre over consecutive panel `breaks`.
pub fn composite(breaks: &[f64], n: usize) -> Vec<(f64, f64)> {
    breaks
        .windows(2)
        .filter(|w| w[1] > w[0])
        .flat_map(|w| legendre_on(w[0], w[1], n))
        .collect()
}

/// Panel breaks covering `[a, b]` with geometric growth `ratio` (> 1) and
/// first panel no wider than `first`.
pub fn geometric_breaks(a: f64, b: f64, first: f64, ratio: f64) -> Vec<f64> {
    let mut out = vec![a];
    let mut w = first;
    let mut x = a;
    while x + w < b * (1.0 - 1e-12) {
        x += w;
        out.push(x);
        w *= ratio;
    }
    out.push(b);
    out
}

pub fn uniform_breaks(a: f64, b: f64, panels: usize) -> Vec<f64> {
    let p = panels.max(1);
    (0..=p).map(|i| a + (b - a) * i as f64 / p as f64).collect()
}

/// Product rule on the unit sphere: Gauss–Legendre in `cos θ`, uniform in `φ`.
/// Exact for spherical harmonics of degree below `min(2 n_theta, n_phi)`.
#[derive(Clone, Debug)]
pub struct SphereRule {
    pub directions: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl SphereRule {
    pub fn product(n_theta: usize, n_phi: usize) -> Self {
        let n_phi = n_phi.max(1);
        let mut directions = Vec::with_capacity(n_theta * n_phi);
        let mut weights = Vec::with_capacity(n_theta * n_phi);
        let dphi = 2.0 * PI / n_phi as f64;
        for &(c, w) in gauss_legendre(n_theta).iter() {
            let s = (1.0 - c * c).max(0.0).sqrt();
            for k in 0..n_phi {
                let phi = (k as f64 + 0.5) * dphi;
                directions.push([s * phi.cos(), s * phi.sin(), c]);
                weights.push(w * dphi);
            }
        }
        Self { directions, weights }
    }

    /// Product rule resolving harmonics up to roughly `degree`.
    pub fn for_degree(degree: usize) -> Self {
        let nt = degree / 2 + 2;
        Self::product(nt, 2 * nt)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// `n` quasi-uniform points on the unit sphere (Fibonacci lattice).
pub fn fibonacci_sphere(n: usize) -> Vec<[f64; 3]> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            [r * phi.cos(), r * phi.sin(), z]
        })
        .collect()
}

/// Quadrature weights of a ball of radius `r` on a lattice of spacing `h`.
///
/// Interior cells get `h^3`; cells cut by the sphere get `h^3` times the
/// fraction of sub-samples inside. Offsets are in lattice units.
#[derive(Clone, Debug)]
pub struct BallStencil {
    pub radius: f64,
    pub spacing: f64,
    pub reach: usize,
    pub offsets: Vec<[isize; 3]>,
    pub weights: Vec<f64>,
}

const SUBCELL: usize = 8;

impl BallStencil {
    pub fn new(radius: f64, spacing: f64) -> Self {
        let h = spacing;
        let reach = (radius / h + 0.5).ceil() as isize;
        let mut offsets = Vec::new();
        let mut weights = Vec::new();
        let half_diag = 0.5 * 3f64.sqrt() * h;
        for i in -reach..=reach {
            for j in -reach..=reach {
                for k in -reach..=reach {
                    let c = [i as f64 * h, j as f64 * h, k as f64 * h];
                    let d = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
                    let frac = if d + half_diag <= radius {
                        1.0
                    } else if d - half_diag >= radius {
                        0.0
                    } else {
                        cell_fraction(c, h, radius)
                    };
                    if frac > 0.0 {
                        offsets.push([i, j, k]);
                        weights.push(frac * h * h * h);
                    }
                }
            }
        }
        Self { radius, spacing, reach: reach as usize, offsets, weights }
    }

    pub fn volume(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Flattened index offsets for a grid with the given counts.
    pub fn linear_offsets(&self, spec: &GridSpec) -> Vec<isize> {
        let sy = spec.counts[2] as isize;
        let sx = (spec.counts[1] * spec.counts[2]) as isize;
        self.offsets.iter().map(|o| o[0] * sx + o[1] * sy + o[2]).collect()
    }

    /// Grid nodes whose full stencil lies inside the grid.
    pub fn admissible_centers(&self, spec: &GridSpec) -> Vec<usize> {
        let r = self.reach;
        let [nx, ny, nz] = spec.counts;
        if nx <= 2 * r || ny <= 2 * r || nz <= 2 * r {
            return Vec::new();
        }
        let mut out = Vec::with_capacity((nx - 2 * r) * (ny - 2 * r) * (nz - 2 * r));
        for i in r..nx - r {
            for j in r..ny - r {
                for k in r..nz - r {
                    out.push(spec.index(i, j, k));
                }
            }
        }
        out
    }
}

fn cell_fraction(c: [f64; 3], h: f64, radius: f64) -> f64 {
    let r2 = radius * radius;
    let mut inside = 0usize;
    for a in 0..SUBCELL {
        let x = c[0] + h * ((a as f64 + 0.5) / SUBCELL as f64 - 0.5);
        for b in 0..SUBCELL {
            let y = c[1] + h * ((b as f64 + 0.5) / SUBCELL as f64 - 0.5);
            for d in 0..SUBCELL {
                let z = c[2] + h * ((d as f64 + 0.5) / SUBCELL as f64 - 0.5);
                if x * x + y * y + z * z <= r2 {
                    inside += 1;
                }
            }
        }
    }
    inside as f64 / (SUBCELL * SUBCELL * SUBCELL) as f64
}
