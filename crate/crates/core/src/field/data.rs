use serde::{Deserialize, Serialize};

use super::grid::{GridSpec, TimeAxis};
use crate::error::{Error, Result};
use crate::exec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rank {
    Scalar,
    Vector,
    SymTensor,
}

impl Rank {
    pub fn components(self) -> usize {
        match self {
            Rank::Scalar => 1,
            Rank::Vector => 3,
            Rank::SymTensor => 6,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Rank::Scalar => "scalar",
            Rank::Vector => "vector",
            Rank::SymTensor => "sym-tensor",
        }
    }

    /// Multiplicity of each stored component in a full contraction.
    pub fn multiplicity(self) -> &'static [f64] {
        match self {
            Rank::Scalar => &[1.0],
            Rank::Vector => &[1.0, 1.0, 1.0],
            Rank::SymTensor => &SYM_MULT,
        }
    }
}

/// Stored order of symmetric-tensor components: xx, xy, xz, yy, yz, zz.
pub const SYM_PAIRS: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];
/// Off-diagonal entries appear twice in `Σ_ij a_ij b_ij`.
pub const SYM_MULT: [f64; 6] = [1.0, 2.0, 2.0, 1.0, 2.0, 1.0];

#[inline]
pub fn sym_index(i: usize, j: usize) -> usize {
    let (a, b) = if i <= j { (i, j) } else { (j, i) };
    match (a, b) {
        (0, 0) => 0,
        (0, 1) => 1,
        (0, 2) => 2,
        (1, 1) => 3,
        (1, 2) => 4,
        _ => 5,
    }
}

#[inline]
pub fn outer(u: [f64; 3]) -> [f64; 6] {
    [u[0] * u[0], u[0] * u[1], u[0] * u[2], u[1] * u[1], u[1] * u[2], u[2] * u[2]]
}

/// `Σ_ij a_ij b_ij` for stored symmetric tensors.
#[inline]
pub fn sym_contract(a: &[f64; 6], b: &[f64; 6]) -> f64 {
    let mut s = 0.0;
    for c in 0..6 {
        s += SYM_MULT[c] * a[c] * b[c];
    }
    s
}

/// Samples of a field on a grid, laid out `[time][component][i][j][k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    pub spec: GridSpec,
    pub rank: Rank,
    pub data: Vec<f64>,
}

impl GridField {
    pub fn zeros(spec: GridSpec, rank: Rank) -> Self {
        let n = spec.len() * spec.nt() * rank.components();
        Self { spec, rank, data: vec![0.0; n] }
    }

    pub fn from_data(spec: GridSpec, rank: Rank, data: Vec<f64>) -> Result<Self> {
        let want = spec.len() * spec.nt() * rank.components();
        if data.len() != want {
            return Err(Error::Format(format!(
                "sample count {} does not match grid ({want})",
                data.len()
            )));
        }
        Ok(Self { spec, rank, data })
    }

    /// Samples `f(x, t, out)` at every node and time; `t = 0` without a time axis.
    pub fn from_fn<F>(spec: GridSpec, rank: Rank, f: F) -> Self
    where
        F: Fn([f64; 3], f64, &mut [f64]) + Sync + Send,
    {
        let nc = rank.components();
        let n = spec.len();
        let times = spec.time.map_or(vec![0.0], |a| a.times());
        let mut field = Self::zeros(spec, rank);
        for (ti, &t) in times.iter().enumerate() {
            let vals = exec::map(n, |idx| {
                let mut out = [0.0; 6];
                f(field.spec.point(idx), t, &mut out[..nc]);
                out
            });
            for c in 0..nc {
                let s = field.slice_mut(ti, c);
                for (idx, v) in vals.iter().enumerate() {
                    s[idx] = v[c];
                }
            }
        }
        field
    }

    pub fn components(&self) -> usize {
        self.rank.components()
    }

    pub fn nt(&self) -> usize {
        self.spec.nt()
    }

    pub fn times(&self) -> Vec<f64> {
        self.spec.time.map_or(vec![0.0], |a| a.times())
    }

    #[inline]
    pub fn slice(&self, t: usize, c: usize) -> &[f64] {
        let n = self.spec.len();
        let off = (t * self.components() + c) * n;
        &self.data[off..off + n]
    }

    #[inline]
    pub fn slice_mut(&mut self, t: usize, c: usize) -> &mut [f64] {
        let n = self.spec.len();
        let off = (t * self.components() + c) * n;
        &mut self.data[off..off + n]
    }

    #[inline]
    pub fn get(&self, t: usize, c: usize, idx: usize) -> f64 {
        self.data[(t * self.components() + c) * self.spec.len() + idx]
    }

    /// Components at one node, padded with zeros to six entries.
    #[inline]
    pub fn at(&self, t: usize, idx: usize) -> [f64; 6] {
        let mut out = [0.0; 6];
        for c in 0..self.components() {
            out[c] = self.get(t, c, idx);
        }
        out
    }

    /// Euclidean (Frobenius for tensors) magnitude at one node.
    #[inline]
    pub fn magnitude(&self, t: usize, idx: usize) -> f64 {
        let m = self.rank.multiplicity();
        let mut s = 0.0;
        for c in 0..self.components() {
            let v = self.get(t, c, idx);
            s += m[c] * v * v;
        }
        s.sqrt()
    }

    /// One time slice as a static field.
    pub fn time_slice(&self, t: usize) -> GridField {
        let n = self.spec.len() * self.components();
        let off = t * n;
        GridField {
            spec: self.spec.spatial(),
            rank: self.rank,
            data: self.data[off..off + n].to_vec(),
        }
    }

    /// Stacks static slices onto a time axis.
    pub fn stack(slices: &[GridField], axis: TimeAxis) -> Result<GridField> {
        if slices.len() != axis.nt || slices.is_empty() {
            return Err(Error::Invalid("slice count does not match time axis".into()));
        }
        let spec = slices[0].spec.spatial();
        let rank = slices[0].rank;
        let mut data = Vec::with_capacity(spec.len() * rank.components() * axis.nt);
        for s in slices {
            if s.spec.spatial() != spec || s.rank != rank || s.spec.time.is_some() {
                return Err(Error::Invalid("inconsistent slices".into()));
            }
            data.extend_from_slice(&s.data);
        }
        Ok(GridField { spec: spec.with_time(axis), rank, data })
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest pointwise magnitude over all nodes and times.
    pub fn max_magnitude(&self) -> f64 {
        let n = self.spec.len();
        (0..self.nt())
            .map(|t| exec::max(n, |i| self.magnitude(t, i)))
            .fold(0.0, f64::max)
    }

    /// Largest pointwise magnitude on the outer faces of the box.
    pub fn boundary_max(&self) -> f64 {
        let [nx, ny, nz] = self.spec.counts;
        let mut m: f64 = 0.0;
        for t in 0..self.nt() {
            for i in 0..nx {
                for j in 0..ny {
                    let edge_ij = i == 0 || i == nx - 1 || j == 0 || j == ny - 1;
                    if edge_ij {
                        for k in 0..nz {
                            m = m.max(self.magnitude(t, self.spec.index(i, j, k)));
                        }
                    } else {
                        m = m.max(self.magnitude(t, self.spec.index(i, j, 0)));
                        m = m.max(self.magnitude(t, self.spec.index(i, j, nz - 1)));
                    }
                }
            }
        }
        m
    }

    /// True when boundary values are at most `rel_tol` times the maximum.
    pub fn decays(&self, rel_tol: f64) -> bool {
        let max = self.max_magnitude();
        max == 0.0 || self.boundary_max() <= rel_tol * max
    }

    pub fn scaled(&self, s: f64) -> GridField {
        GridField { data: self.data.iter().map(|v| v * s).collect(), ..self.clone() }
    }

    pub fn axpy(&mut self, a: f64, other: &GridField) -> Result<()> {
        self.check_same(other)?;
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += a * y;
        }
        Ok(())
    }

    pub fn check_same(&self, other: &GridField) -> Result<()> {
        if self.spec != other.spec || self.rank != other.rank {
            return Err(Error::Invalid("fields live on different grids or ranks".into()));
        }
        Ok(())
    }

    pub fn expect_rank(&self, rank: Rank) -> Result<()> {
        if self.rank != rank {
            return Err(Error::Rank { expected: rank.name(), found: self.rank.name() });
        }
        Ok(())
    }

    /// `u ⊗ u` of a vector field, stored as a symmetric tensor.
    pub fn outer_square(&self) -> Result<GridField> {
        self.expect_rank(Rank::Vector)?;
        let n = self.spec.len();
        let mut out = GridField::zeros(self.spec.clone(), Rank::SymTensor);
        for t in 0..self.nt() {
            let u = [self.slice(t, 0), self.slice(t, 1), self.slice(t, 2)];
            for (c, &(a, b)) in SYM_PAIRS.iter().enumerate() {
                let s = out.slice_mut(t, c);
                for idx in 0..n {
                    s[idx] = u[a][idx] * u[b][idx];
                }
            }
        }
        Ok(out)
    }

    /// Second-order centered difference along `axis`, one-sided at the faces.
    pub fn partial(&self, axis: usize) -> GridField {
        let mut out = GridField::zeros(self.spec.clone(), self.rank);
        let h = self.spec.spacing;
        let cnt = self.spec.counts[axis];
        let stride = match axis {
            0 => self.spec.counts[1] * self.spec.counts[2],
            1 => self.spec.counts[2],
            _ => 1,
        };
        for t in 0..self.nt() {
            for c in 0..self.components() {
                let src = self.slice(t, c).to_vec();
                let dst = out.slice_mut(t, c);
                exec::fill(dst, |idx| {
                    let p = self.spec.ijk(idx)[axis];
                    if p == 0 {
                        (-3.0 * src[idx] + 4.0 * src[idx + stride] - src[idx + 2 * stride]) / (2.0 * h)
                    } else if p == cnt - 1 {
                        (3.0 * src[idx] - 4.0 * src[idx - stride] + src[idx - 2 * stride]) / (2.0 * h)
                    } else {
                        (src[idx + stride] - src[idx - stride]) / (2.0 * h)
                    }
                });
            }
        }
        out
    }

    /// Centered-difference divergence of a vector field.
    pub fn divergence(&self) -> Result<GridField> {
        self.expect_rank(Rank::Vector)?;
        let mut out = GridField::zeros(self.spec.clone(), Rank::Scalar);
        for a in 0..3 {
            let d = self.partial(a);
            for t in 0..self.nt() {
                let s = d.slice(t, a);
                for (o, v) in out.slice_mut(t, 0).iter_mut().zip(s) {
                    *o += v;
                }
            }
        }
        Ok(out)
    }

    /// `|∇^h u|^2 = Σ_{a,c} (∂_a u_c)^2` as a scalar field.
    pub fn gradient_energy(&self) -> GridField {
        let mut out = GridField::zeros(self.spec.clone(), Rank::Scalar);
        for a in 0..3 {
            let d = self.partial(a);
            for t in 0..self.nt() {
                for c in 0..self.components() {
                    let m = self.rank.multiplicity()[c];
                    let s = d.slice(t, c).to_vec();
                    for (o, v) in out.slice_mut(t, 0).iter_mut().zip(&s) {
                        *o += m * v * v;
                    }
                }
            }
        }
        out
    }

    /// Trilinear interpolation at `x`; zero outside the box.
    pub fn interpolate(&self, t: usize, x: [f64; 3]) -> [f64; 6] {
        let mut out = [0.0; 6];
        let mut base = [0usize; 3];
        let mut frac = [0.0; 3];
        for a in 0..3 {
            let f = (x[a] - self.spec.origin[a]) / self.spec.spacing;
            let last = (self.spec.counts[a] - 1) as f64;
            if !(f >= 0.0 && f <= last) {
                return out;
            }
            let b = (f.floor() as usize).min(self.spec.counts[a] - 2);
            base[a] = b;
            frac[a] = f - b as f64;
        }
        for di in 0..2 {
            let wi = if di == 0 { 1.0 - frac[0] } else { frac[0] };
            for dj in 0..2 {
                let wj = if dj == 0 { 1.0 - frac[1] } else { frac[1] };
                for dk in 0..2 {
                    let wk = if dk == 0 { 1.0 - frac[2] } else { frac[2] };
                    let w = wi * wj * wk;
                    if w == 0.0 {
                        continue;
                    }
                    let idx = self.spec.index(base[0] + di, base[1] + dj, base[2] + dk);
                    for c in 0..self.components() {
                        out[c] += w * self.get(t, c, idx);
                    }
                }
            }
        }
        out
    }

    /// Linear interpolation in time between axis samples.
    pub fn slice_at_time(&self, t: f64) -> Result<GridField> {
        let axis = self.spec.time.ok_or(Error::MissingTimeAxis)?;
        let (n, a) = axis.locate(t)?;
        let mut out = self.time_slice(n);
        if a > 0.0 {
            let next = self.time_slice(n + 1);
            for (o, v) in out.data.iter_mut().zip(&next.data) {
                *o = (1.0 - a) * *o + a * v;
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_and_slices() {
        let spec = GridSpec::cube(1.0, 5).unwrap().with_time(TimeAxis::uniform(1.0, 2).unwrap());
        let f = GridField::from_fn(spec, Rank::Vector, |x, t, o| {
            o[0] = x[0];
            o[1] = t;
            o[2] = 1.0;
        });
        assert_eq!(f.data.len(), 125 * 3 * 3);
        let idx = f.spec.index(4, 0, 0);
        assert_eq!(f.get(0, 0, idx), 1.0);
        assert_eq!(f.get(2, 1, idx), 1.0);
        let s = f.slice_at_time(0.25).unwrap();
        assert!((s.get(0, 1, idx) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn centered_difference_is_exact_on_quadratics() {
        let spec = GridSpec::cube(1.0, 9).unwrap();
        let f = GridField::from_fn(spec, Rank::Scalar, |x, _, o| o[0] = x[0] * x[0] + 2.0 * x[1]);
        let d = f.partial(0);
        for idx in 0..f.spec.len() {
            let x = f.spec.point(idx);
            assert!((d.get(0, 0, idx) - 2.0 * x[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn interpolation_reproduces_linear() {
        let spec = GridSpec::cube(1.0, 6).unwrap();
        let f = GridField::from_fn(spec, Rank::Scalar, |x, _, o| o[0] = 1.0 + x[0] - 2.0 * x[2]);
        let v = f.interpolate(0, [0.13, -0.41, 0.77]);
        assert!((v[0] - (1.0 + 0.13 - 1.54)).abs() < 1e-12);
        assert_eq!(f.interpolate(0, [2.0, 0.0, 0.0])[0], 0.0);
    }
}
