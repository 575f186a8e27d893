//! Real 3-D FFTs on zero-padded boxes and Fourier multipliers.
//!
//! Transforms run a real-to-complex pass along the fastest axis, then complex
//! passes along the other two on the half spectrum. Half-spectrum layout is
//! `[ix][iy][kz]` with `kz < nz/2 + 1`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use realfft::num_complex::Complex;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::exec;
use crate::field::{GridField, GridSpec};

pub type C64 = Complex<f64>;

/// Smallest 2,3,5-smooth integer `≥ n`.
pub fn good_size(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

pub struct Plan3 {
    pub dims: [usize; 3],
    pub spacing: f64,
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
    fwd: [Arc<dyn Fft<f64>>; 2],
    inv: [Arc<dyn Fft<f64>>; 2],
}

fn plan_cache() -> &'static Mutex<HashMap<([usize; 3], u64), Arc<Plan3>>> {
    static CACHE: OnceLock<Mutex<HashMap<([usize; 3], u64), Arc<Plan3>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

impl Plan3 {
    /// Cached plan for a real box of `dims` samples at `spacing`.
    pub fn get(dims: [usize; 3], spacing: f64) -> Arc<Plan3> {
        let key = (dims, spacing.to_bits());
        let mut cache = plan_cache().lock().expect("plan cache poisoned");
        cache
            .entry(key)
            .or_insert_with(|| {
                let mut rp = RealFftPlanner::<f64>::new();
                let mut cp = FftPlanner::<f64>::new();
                Arc::new(Plan3 {
                    dims,
                    spacing,
                    r2c: rp.plan_fft_forward(dims[2]),
                    c2r: rp.plan_fft_inverse(dims[2]),
                    fwd: [cp.plan_fft_forward(dims[0]), cp.plan_fft_forward(dims[1])],
                    inv: [cp.plan_fft_inverse(dims[0]), cp.plan_fft_inverse(dims[1])],
                })
            })
            .clone()
    }

    pub fn real_len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn nzc(&self) -> usize {
        self.dims[2] / 2 + 1
    }

    pub fn spectral_len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.nzc()
    }

    /// Angular wavenumbers along `axis`; `odd` zeroes the Nyquist entry so
    /// odd multipliers keep real output real.
    pub fn wavenumbers(&self, axis: usize, odd: bool) -> Vec<f64> {
        let n = self.dims[axis];
        let base = 2.0 * std::f64::consts::PI / (n as f64 * self.spacing);
        let len = if axis == 2 { self.nzc() } else { n };
        (0..len)
            .map(|k| {
                if odd && n % 2 == 0 && k == n / 2 {
                    return 0.0;
                }
                let s = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
                s * base
            })
            .collect()
    }

    /// Forward transform of a real box (unnormalized).
    pub fn forward(&self, real: &[f64]) -> Vec<C64> {
        let [_, ny, nz] = self.dims;
        let nzc = self.nzc();
        assert_eq!(real.len(), self.real_len());
        let mut spec = vec![C64::new(0.0, 0.0); self.spectral_len()];
        exec::chunks_mut(&mut spec, ny * nzc, |plane, out| {
            let mut input = vec![0.0; nz];
            let mut scratch = self.r2c.make_scratch_vec();
            for j in 0..ny {
                let row = plane * ny + j;
                input.copy_from_slice(&real[row * nz..(row + 1) * nz]);
                self.r2c
                    .process_with_scratch(&mut input, &mut out[j * nzc..(j + 1) * nzc], &mut scratch)
                    .expect("r2c length");
            }
            // y pass on this x-plane via a transpose to [kz][y].
            let mut t = vec![C64::new(0.0, 0.0); ny * nzc];
            for j in 0..ny {
                for k in 0..nzc {
                    t[k * ny + j] = out[j * nzc + k];
                }
            }
            self.fwd[1].process(&mut t);
            for j in 0..ny {
                for k in 0..nzc {
                    out[j * nzc + k] = t[k * ny + j];
                }
            }
        });
        self.x_pass(&mut spec, &self.fwd[0]);
        spec
    }

    fn x_pass(&self, spec: &mut [C64], fft: &Arc<dyn Fft<f64>>) {
        let nx = self.dims[0];
        let cols = self.dims[1] * self.nzc();
        let mut t = vec![C64::new(0.0, 0.0); spec.len()];
        for i in 0..nx {
            for c in 0..cols {
                t[c * nx + i] = spec[i * cols + c];
            }
        }
        let per = (cols / exec::threads().max(1) / 4).max(1) * nx;
        exec::chunks_mut(&mut t, per, |_, block| fft.process(block));
        for i in 0..nx {
            for c in 0..cols {
                spec[i * cols + c] = t[c * nx + i];
            }
        }
    }

    /// Inverse transform, normalized so `inverse(forward(f)) = f`.
    pub fn inverse(&self, mut spec: Vec<C64>) -> Vec<f64> {
        let [_, ny, nz] = self.dims;
        let nzc = self.nzc();
        self.x_pass(&mut spec, &self.inv[0]);
        let norm = 1.0 / self.real_len() as f64;
        let mut real = vec![0.0; self.real_len()];
        exec::chunks_mut(&mut real, ny * nz, |plane, out| {
            let sp = &spec[plane * ny * nzc..(plane + 1) * ny * nzc];
            let mut t = vec![C64::new(0.0, 0.0); ny * nzc];
            for j in 0..ny {
                for k in 0..nzc {
                    t[k * ny + j] = sp[j * nzc + k];
                }
            }
            self.inv[1].process(&mut t);
            let mut row = vec![C64::new(0.0, 0.0); nzc];
            let mut scratch = self.c2r.make_scratch_vec();
            for j in 0..ny {
                for k in 0..nzc {
                    row[k] = t[k * ny + j];
                }
                row[0].im = 0.0;
                if nz % 2 == 0 {
                    row[nzc - 1].im = 0.0;
                }
                let dst = &mut out[j * nz..(j + 1) * nz];
                self.c2r.process_with_scratch(&mut row, dst, &mut scratch).expect("c2r length");
                for v in dst.iter_mut() {
                    *v *= norm;
                }
            }
        });
        real
    }

    /// Calls `f(ξ, mode)` for every half-spectrum mode.
    pub fn for_each_mode(&self, spec: &mut [C64], odd: bool, f: impl Fn([f64; 3], &mut C64) + Sync + Send) {
        let kx = self.wavenumbers(0, odd);
        let ky = self.wavenumbers(1, odd);
        let kz = self.wavenumbers(2, odd);
        let (ny, nzc) = (self.dims[1], self.nzc());
        exec::chunks_mut(spec, ny * nzc, |i, plane| {
            for j in 0..ny {
                for k in 0..nzc {
                    f([kx[i], ky[j], kz[k]], &mut plane[j * nzc + k]);
                }
            }
        });
    }
}

/// A grid embedded at the low corner of a zero-padded FFT box.
#[derive(Clone, Debug)]
pub struct Padded {
    pub spec: GridSpec,
    pub dims: [usize; 3],
}

impl Padded {
    /// Box with every axis at least `factor × count`.
    pub fn new(spec: &GridSpec, factor: f64) -> Result<Self> {
        if !(factor >= 1.0) {
            return Err(Error::Invalid(format!("padding factor must be >= 1, got {factor}")));
        }
        let dims = spec.counts.map(|n| good_size((n as f64 * factor).ceil() as usize));
        Ok(Self { spec: spec.spatial(), dims })
    }

    pub fn plan(&self) -> Arc<Plan3> {
        Plan3::get(self.dims, self.spec.spacing)
    }

    pub fn embed(&self, data: &[f64]) -> Vec<f64> {
        let [nx, ny, nz] = self.spec.counts;
        let [_, py, pz] = self.dims;
        let mut out = vec![0.0; self.dims.iter().product()];
        for i in 0..nx {
            for j in 0..ny {
                let src = (i * ny + j) * nz;
                let dst = (i * py + j) * pz;
                out[dst..dst + nz].copy_from_slice(&data[src..src + nz]);
            }
        }
        out
    }

    pub fn crop(&self, data: &[f64]) -> Vec<f64> {
        let [nx, ny, nz] = self.spec.counts;
        let [_, py, pz] = self.dims;
        let mut out = vec![0.0; nx * ny * nz];
        for i in 0..nx {
            for j in 0..ny {
                let src = (i * py + j) * pz;
                let dst = (i * ny + j) * nz;
                out[dst..dst + nz].copy_from_slice(&data[src..src + nz]);
            }
        }
        out
    }

    pub fn forward(&self, data: &[f64]) -> Vec<C64> {
        self.plan().forward(&self.embed(data))
    }

    pub fn inverse(&self, spec: Vec<C64>) -> Vec<f64> {
        self.crop(&self.plan().inverse(spec))
    }
}

/// Applies a real even multiplier `m(ξ)` to one static scalar slice.
pub fn apply_multiplier(
    padded: &Padded,
    data: &[f64],
    m: impl Fn([f64; 3]) -> f64 + Sync + Send,
) -> Vec<f64> {
    let plan = padded.plan();
    let mut s = plan.forward(&padded.embed(data));
    plan.for_each_mode(&mut s, false, |xi, v| *v *= m(xi));
    padded.crop(&plan.inverse(s))
}

/// `e^{tΔ}` applied spectrally to every component and time slice.
pub fn heat_spectral(f: &GridField, t: f64, padding: f64) -> Result<GridField> {
    let padded = Padded::new(&f.spec, padding)?;
    let mut out = f.clone();
    for n in 0..f.nt() {
        for c in 0..f.components() {
            let r = apply_multiplier(&padded, f.slice(n, c), |xi| {
                (-t * (xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2])).exp()
            });
            out.slice_mut(n, c).copy_from_slice(&r);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smooth_sizes() {
        assert_eq!(good_size(7), 8);
        assert_eq!(good_size(97), 100);
        assert_eq!(good_size(128), 128);
    }

    #[test]
    fn round_trip_and_derivative() {
        let dims = [12, 10, 9];
        let h = 0.3;
        let plan = Plan3::get(dims, h);
        let n = plan.real_len();
        let data: Vec<f64> = (0..n).map(|i| ((i * 7919) % 101) as f64 / 50.0 - 1.0).collect();
        let back = plan.inverse(plan.forward(&data));
        for (a, b) in data.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
        // derivative of a periodic sine along y
        let ly = dims[1] as f64 * h;
        let k = 2.0 * std::f64::consts::PI / ly;
        let f: Vec<f64> = (0..n)
            .map(|idx| {
                let j = (idx / dims[2]) % dims[1];
                (k * j as f64 * h).sin()
            })
            .collect();
        let mut s = plan.forward(&f);
        plan.for_each_mode(&mut s, true, |xi, v| *v *= C64::new(0.0, xi[1]));
        let d = plan.inverse(s);
        for idx in 0..n {
            let j = (idx / dims[2]) % dims[1];
            assert!((d[idx] - k * (k * j as f64 * h).cos()).abs() < 1e-10);
        }
    }

    #[test]
    fn heat_of_gaussian() {
        let spec = GridSpec::cube(6.0, 49).unwrap();
        let s2 = 0.5;
        let t = 0.2;
        let f = GridField::from_fn(spec.clone(), crate::field::Rank::Scalar, |x, _, o| {
            o[0] = (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / (2.0 * s2)).exp()
        });
        let g = heat_spectral(&f, t, 2.0).unwrap();
        let s2t = s2 + 2.0 * t;
        let amp = (s2 / s2t).powf(1.5);
        let mut err: f64 = 0.0;
        for idx in 0..spec.len() {
            let x = spec.point(idx);
            let exact = amp * (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / (2.0 * s2t)).exp();
            err = err.max((g.get(0, 0, idx) - exact).abs());
        }
        assert!(err < 1e-4 * amp, "{err}");
    }
}
