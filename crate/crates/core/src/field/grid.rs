use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform time samples `t0 + n*dt`, `n = 0..nt`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeAxis {
    pub t0: f64,
    pub dt: f64,
    pub nt: usize,
}

impl TimeAxis {
    pub fn new(t0: f64, dt: f64, nt: usize) -> Result<Self> {
        if !(dt > 0.0) || nt < 1 || !t0.is_finite() {
            return Err(Error::Grid(format!("bad time axis t0={t0} dt={dt} nt={nt}")));
        }
        Ok(Self { t0, dt, nt })
    }

    /// `n_steps` intervals on `[0, t_final]`.
    pub fn uniform(t_final: f64, n_steps: usize) -> Result<Self> {
        if n_steps == 0 {
            return Err(Error::Grid("n_steps must be positive".into()));
        }
        Self::new(0.0, t_final / n_steps as f64, n_steps + 1)
    }

    pub fn time(&self, n: usize) -> f64 {
        self.t0 + self.dt * n as f64
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.nt - 1)
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.nt).map(|n| self.time(n)).collect()
    }

    /// Index of the sample at time `t`, if `t` lies on the axis.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let x = (t - self.t0) / self.dt;
        let n = x.round();
        if n >= 0.0 && (n as usize) < self.nt && (x - n).abs() < 1e-9 {
            Some(n as usize)
        } else {
            None
        }
    }

    /// Lower sample index and linear weight of the upper sample for `t`.
    pub fn locate(&self, t: f64) -> Result<(usize, f64)> {
        let x = (t - self.t0) / self.dt;
        let last = (self.nt - 1) as f64;
        if x < -1e-9 || x > last + 1e-9 {
            return Err(Error::TimeOutsideAxis(t));
        }
        let x = x.clamp(0.0, last);
        if self.nt == 1 {
            return Ok((0, 0.0));
        }
        let n = (x.floor() as usize).min(self.nt - 2);
        Ok((n, x - n as f64))
    }

    /// Trapezoid weights over the full axis.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let mut w = vec![self.dt; self.nt];
        if self.nt == 1 {
            w[0] = 0.0;
        } else {
            w[0] *= 0.5;
            w[self.nt - 1] *= 0.5;
        }
        w
    }
}

/// Uniform spatial grid; point `(i,j,k)` sits at `origin + h*(i,j,k)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub origin: [f64; 3],
    pub spacing: f64,
    pub counts: [usize; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<TimeAxis>,
}

impl GridSpec {
    pub fn new(origin: [f64; 3], spacing: f64, counts: [usize; 3]) -> Result<Self> {
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::Grid(format!("spacing must be positive, got {spacing}")));
        }
        if counts.iter().any(|&c| c < 2) {
            return Err(Error::Grid(format!("all counts must be >= 2, got {counts:?}")));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::Grid("origin must be finite".into()));
        }
        Ok(Self { origin, spacing, counts, time: None })
    }

    /// `n^3` points spanning `[-half_width, half_width]^3`.
    pub fn cube(half_width: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Grid("n must be >= 2".into()));
        }
        let h = 2.0 * half_width / (n - 1) as f64;
        Self::new([-half_width; 3], h, [n; 3])
    }

    pub fn with_time(mut self, axis: TimeAxis) -> Self {
        self.time = Some(axis);
        self
    }

    pub fn spatial(&self) -> Self {
        Self { time: None, ..self.clone() }
    }

    pub fn h(&self) -> f64 {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.counts[0] * self.counts[1] * self.counts[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn nt(&self) -> usize {
        self.time.map_or(1, |t| t.nt)
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(3)
    }

    pub fn extents(&self) -> [f64; 3] {
        [0, 1, 2].map(|a| self.spacing * (self.counts[a] - 1) as f64)
    }

    pub fn upper(&self) -> [f64; 3] {
        let e = self.extents();
        [0, 1, 2].map(|a| self.origin[a] + e[a])
    }

    pub fn center(&self) -> [f64; 3] {
        let e = self.extents();
        [0, 1, 2].map(|a| self.origin[a] + 0.5 * e[a])
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.counts[1] + j) * self.counts[2] + k
    }

    #[inline]
    pub fn ijk(&self, idx: usize) -> [usize; 3] {
        let k = idx % self.counts[2];
        let r = idx / self.counts[2];
        [r / self.counts[1], r % self.counts[1], k]
    }

    #[inline]
    pub fn coord(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        [
            self.origin[0] + self.spacing * i as f64,
            self.origin[1] + self.spacing * j as f64,
            self.origin[2] + self.spacing * k as f64,
        ]
    }

    #[inline]
    pub fn point(&self, idx: usize) -> [f64; 3] {
        let [i, j, k] = self.ijk(idx);
        self.coord(i, j, k)
    }

    /// Distance from `x` to the nearest face of the box (negative outside).
    pub fn boundary_distance(&self, x: [f64; 3]) -> f64 {
        let up = self.upper();
        (0..3)
            .map(|a| (x[a] - self.origin[a]).min(up[a] - x[a]))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn contains_ball(&self, c: [f64; 3], r: f64) -> bool {
        self.boundary_distance(c) >= r
    }

    /// Grid index of `x` when it coincides with a node.
    pub fn node_of(&self, x: [f64; 3]) -> Option<usize> {
        let mut ijk = [0usize; 3];
        for a in 0..3 {
            let f = (x[a] - self.origin[a]) / self.spacing;
            let n = f.round();
            if (f - n).abs() > 1e-7 || n < 0.0 || n as usize >= self.counts[a] {
                return None;
            }
            ijk[a] = n as usize;
        }
        Some(self.index(ijk[0], ijk[1], ijk[2]))
    }

    /// Indices of nodes with `|x - c| <= r`.
    pub fn ball_indices(&self, c: [f64; 3], r: f64) -> Vec<usize> {
        let h = self.spacing;
        let mut lo = [0usize; 3];
        let mut hi = [0usize; 3];
        for a in 0..3 {
            let l = ((c[a] - r - self.origin[a]) / h).ceil().max(0.0);
            let u = ((c[a] + r - self.origin[a]) / h).floor();
            let u = u.min((self.counts[a] - 1) as f64);
            if u < l {
                return Vec::new();
            }
            lo[a] = l as usize;
            hi[a] = u as usize;
        }
        let r2 = r * r * (1.0 + 1e-12);
        let mut out = Vec::new();
        for i in lo[0]..=hi[0] {
            for j in lo[1]..=hi[1] {
                for k in lo[2]..=hi[2] {
                    let x = self.coord(i, j, k);
                    if dist2(x, c) <= r2 {
                        out.push(self.index(i, j, k));
                    }
                }
            }
        }
        out
    }
}

#[inline]
pub fn dist2(a: [f64; 3], b: [f64; 3]) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
}

#[inline]
pub fn norm(a: [f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

#[inline]
pub fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn add(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn scale(a: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}
