//! Uniform spatial grids, position and spectral fields, and the Fourier
//! propagator for the homogeneous wave equation.
//!
//! Transforms use the continuum convention
//!
//! ```text
//! û(k) = ∫ d³r u(r) e^{-ik·r},      u(r) = (2π)^{-3} ∫ d³k û(k) e^{ik·r}
//! ```
//!
//! approximated on the lattice by scaling the discrete transform with the
//! cell volume (forward) and `1 / (N · cell volume)` (inverse). A non-zero
//! grid origin contributes the phase `e^{∓ik·origin}`. With this scaling
//! `⟨u, v⟩ = (2π)^{-3} ⟨û, v̂⟩` holds exactly on the lattice.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::wavelets::Sign;

/// Regular 3-D sampling lattice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid3 {
    n: [usize; 3],
    h: [f64; 3],
    origin: [f64; 3],
}

impl Grid3 {
    pub fn new(n: [usize; 3], h: [f64; 3], origin: [f64; 3]) -> Result<Self> {
        for axis in 0..3 {
            if n[axis] < 8 || n[axis] % 2 != 0 {
                return Err(Error::InvalidGrid(format!(
                    "axis {axis}: {} samples (need an even count >= 8)",
                    n[axis]
                )));
            }
            if !(h[axis] > 0.0 && h[axis].is_finite()) {
                return Err(Error::InvalidGrid(format!(
                    "axis {axis}: spacing {} must be positive",
                    h[axis]
                )));
            }
            if !origin[axis].is_finite() {
                return Err(Error::InvalidGrid(format!("axis {axis}: origin not finite")));
            }
        }
        Ok(Self { n, h, origin })
    }

    /// Cube of `n³` samples covering `[-length/2, length/2)` on every axis.
    pub fn centered_cube(n: usize, length: f64) -> Result<Self> {
        let h = length / n as f64;
        Self::new([n; 3], [h; 3], [-length / 2.0; 3])
    }

    pub fn n(&self) -> [usize; 3] {
        self.n
    }

    pub fn h(&self) -> [f64; 3] {
        self.h
    }

    pub fn origin(&self) -> [f64; 3] {
        self.origin
    }

    pub fn len(&self) -> usize {
        self.n[0] * self.n[1] * self.n[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.h[0] * self.h[1] * self.h[2]
    }

    /// Volume element of the dual (wave-vector) lattice.
    pub fn dual_cell_volume(&self) -> f64 {
        (0..3)
            .map(|a| 2.0 * PI / (self.n[a] as f64 * self.h[a]))
            .product()
    }

    pub fn extent(&self) -> [f64; 3] {
        [
            self.n[0] as f64 * self.h[0],
            self.n[1] as f64 * self.h[1],
            self.n[2] as f64 * self.h[2],
        ]
    }

    /// Linear index with x fastest.
    #[inline]
    pub fn index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        (iz * self.n[1] + iy) * self.n[0] + ix
    }

    #[inline]
    pub fn unravel(&self, idx: usize) -> [usize; 3] {
        let ix = idx % self.n[0];
        let iy = (idx / self.n[0]) % self.n[1];
        let iz = idx / (self.n[0] * self.n[1]);
        [ix, iy, iz]
    }

    #[inline]
    pub fn position(&self, idx: usize) -> [f64; 3] {
        let i = self.unravel(idx);
        [
            self.origin[0] + i[0] as f64 * self.h[0],
            self.origin[1] + i[1] as f64 * self.h[1],
            self.origin[2] + i[2] as f64 * self.h[2],
        ]
    }

    /// Wavenumber of sample `i` along `axis` in FFT ordering.
    #[inline]
    pub fn wavenumber(&self, axis: usize, i: usize) -> f64 {
        let n = self.n[axis] as isize;
        let m = if (i as isize) < n / 2 { i as isize } else { i as isize - n };
        2.0 * PI * m as f64 / (n as f64 * self.h[axis])
    }

    #[inline]
    pub fn wavevector(&self, idx: usize) -> [f64; 3] {
        let i = self.unravel(idx);
        [
            self.wavenumber(0, i[0]),
            self.wavenumber(1, i[1]),
            self.wavenumber(2, i[2]),
        ]
    }

    /// All lattice wave vectors in linear-index order.
    pub fn wavevectors(&self) -> Vec<[f64; 3]> {
        (0..self.len()).map(|i| self.wavevector(i)).collect()
    }

    /// Lattice index of the wave vector `2π m / (n h)` for integer `m`.
    pub fn wave_index(&self, m: [i64; 3]) -> Result<usize> {
        let mut i = [0usize; 3];
        for axis in 0..3 {
            let n = self.n[axis] as i64;
            if m[axis] < -n / 2 || m[axis] >= n / 2 {
                return Err(Error::InvalidParameter(format!(
                    "lattice wavenumber {} out of range on axis {axis}",
                    m[axis]
                )));
            }
            i[axis] = m[axis].rem_euclid(n) as usize;
        }
        Ok(self.index(i[0], i[1], i[2]))
    }

    /// Largest representable |k| component per axis.
    pub fn nyquist(&self) -> [f64; 3] {
        [PI / self.h[0], PI / self.h[1], PI / self.h[2]]
    }

    /// `e^{s·i k·origin}` for every lattice wave vector.
    fn origin_phase(&self, s: f64) -> Vec<Complex64> {
        let per_axis: Vec<Vec<Complex64>> = (0..3)
            .map(|a| {
                (0..self.n[a])
                    .map(|i| Complex64::from_polar(1.0, s * self.wavenumber(a, i) * self.origin[a]))
                    .collect()
            })
            .collect();
        let mut out = Vec::with_capacity(self.len());
        for iz in 0..self.n[2] {
            for iy in 0..self.n[1] {
                let yz = per_axis[1][iy] * per_axis[2][iz];
                for ix in 0..self.n[0] {
                    out.push(per_axis[0][ix] * yz);
                }
            }
        }
        out
    }

    fn check_same(&self, other: &Grid3) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

fn first_non_finite(values: &[Complex64]) -> Option<usize> {
    values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite()))
}

/// Samples `u(r)` on the nodes of a [`Grid3`].
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField3 {
    grid: Grid3,
    values: Vec<Complex64>,
}

impl ComplexField3 {
    pub fn new(grid: Grid3, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(index) = first_non_finite(&values) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid3) -> Self {
        Self { grid, values: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    /// Samples `f` at every node position.
    pub fn from_fn(grid: Grid3, f: impl Fn([f64; 3]) -> Complex64) -> Result<Self> {
        let values = (0..grid.len()).map(|i| f(grid.position(i))).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Grid3 {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Mutable access; transforms re-validate finiteness.
    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    /// L² norm with the cell-volume weight.
    pub fn norm(&self) -> f64 {
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.cell_volume()).sqrt()
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|v| v * s).collect() }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        Ok(Self {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        Ok(Self {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        })
    }
}

/// Samples `û(k)` on the dual lattice of a [`Grid3`], FFT ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField3 {
    grid: Grid3,
    values: Vec<Complex64>,
}

impl SpectralField3 {
    pub fn new(grid: Grid3, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(index) = first_non_finite(&values) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid3) -> Self {
        Self { grid, values: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    /// Evaluates `f(k)` at every lattice wave vector.
    pub fn from_fn(grid: Grid3, f: impl Fn([f64; 3]) -> Complex64) -> Result<Self> {
        let values = (0..grid.len()).map(|i| f(grid.wavevector(i))).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Grid3 {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    /// `(2π)^{-3} Σ f̂ conj(ĝ) Δk³`, the spectral side of Parseval.
    pub fn inner_product(&self, other: &Self) -> Result<Complex64> {
        self.grid.check_same(&other.grid)?;
        let sum: Complex64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b.conj()).sum();
        Ok(sum * self.grid.dual_cell_volume() / (2.0 * PI).powi(3))
    }

    pub fn norm(&self) -> f64 {
        let s: f64 = self.values.iter().map(|v| v.norm_sqr()).sum();
        (s * self.grid.dual_cell_volume() / (2.0 * PI).powi(3)).sqrt()
    }

    /// Multiplies by the free-evolution carrier `e^{∓i|k|ct}` of the given sign.
    pub fn evolve(&self, sign: Sign, c: f64, t: f64) -> Self {
        let s = sign.carrier_exponent();
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let k = norm3(self.grid.wavevector(i));
                v * Complex64::from_polar(1.0, s * k * c * t)
            })
            .collect();
        Self { grid: self.grid, values }
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|v| v * s).collect() }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        Ok(Self {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
        })
    }

    /// Smallest and largest |k| over bins with `|û| > rel_threshold · max|û|`,
    /// ignoring the k = 0 bin. `None` for an empty spectrum.
    pub fn occupied_band(&self, rel_threshold: f64) -> Option<(f64, f64)> {
        let peak = self.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if peak == 0.0 {
            return None;
        }
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for (i, v) in self.values.iter().enumerate() {
            if v.norm() > rel_threshold * peak {
                let k = norm3(self.grid.wavevector(i));
                if k > 0.0 {
                    lo = lo.min(k);
                    hi = hi.max(k);
                }
            }
        }
        (hi > 0.0).then_some((lo, hi))
    }
}

/// A solution of the wave equation stored as its two frequency-sign parts
/// `û₊(k, 0)` and `û₋(k, 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionSpectrum {
    pub plus: SpectralField3,
    pub minus: SpectralField3,
    c: f64,
    /// Diagnostics recorded by the operation that built this value.
    pub notes: Vec<String>,
}

impl SolutionSpectrum {
    pub fn new(plus: SpectralField3, minus: SpectralField3, c: f64) -> Result<Self> {
        plus.grid.check_same(&minus.grid)?;
        check_speed(c)?;
        Ok(Self { plus, minus, c, notes: Vec::new() })
    }

    /// A solution living entirely in one frequency-sign subspace.
    pub fn single(sign: Sign, part: SpectralField3, c: f64) -> Result<Self> {
        let zero = SpectralField3::zeros(part.grid);
        match sign {
            Sign::Plus => Self::new(part, zero, c),
            Sign::Minus => Self::new(zero, part, c),
        }
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn grid(&self) -> &Grid3 {
        &self.plus.grid
    }

    pub fn part(&self, sign: Sign) -> &SpectralField3 {
        match sign {
            Sign::Plus => &self.plus,
            Sign::Minus => &self.minus,
        }
    }

    /// `û(k, t) = û₊ e^{-i|k|ct} + û₋ e^{i|k|ct}`.
    pub fn spectrum_at(&self, t: f64) -> SpectralField3 {
        let grid = self.plus.grid;
        let values = (0..grid.len())
            .map(|i| {
                let k = norm3(grid.wavevector(i));
                let ph = Complex64::from_polar(1.0, -k * self.c * t);
                self.plus.values[i] * ph + self.minus.values[i] * ph.conj()
            })
            .collect();
        SpectralField3 { grid, values }
    }
}

fn check_speed(c: f64) -> Result<()> {
    if c > 0.0 && c.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("wave speed must be positive, got {c}")))
    }
}

#[inline]
pub(crate) fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Unnormalised 3-D DFT built from 1-D rustfft plans along each axis.
pub struct Fft3 {
    n: [usize; 3],
    forward: [Arc<dyn Fft<f64>>; 3],
    inverse: [Arc<dyn Fft<f64>>; 3],
}

impl Fft3 {
    pub fn new(n: [usize; 3]) -> Self {
        let mut planner = FftPlanner::new();
        let forward = [
            planner.plan_fft_forward(n[0]),
            planner.plan_fft_forward(n[1]),
            planner.plan_fft_forward(n[2]),
        ];
        let inverse = [
            planner.plan_fft_inverse(n[0]),
            planner.plan_fft_inverse(n[1]),
            planner.plan_fft_inverse(n[2]),
        ];
        Self { n, forward, inverse }
    }

    /// Shared plan for a lattice shape.
    pub fn cached(n: [usize; 3]) -> Arc<Fft3> {
        static CACHE: OnceLock<Mutex<HashMap<[usize; 3], Arc<Fft3>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("fft plan cache poisoned");
        guard.entry(n).or_insert_with(|| Arc::new(Fft3::new(n))).clone()
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(data, &self.forward);
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, &self.inverse);
    }

    fn run(&self, data: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>; 3]) {
        let [nx, ny, nz] = self.n;
        assert_eq!(data.len(), nx * ny * nz);
        let scratch_len = plans.iter().map(|p| p.get_inplace_scratch_len()).max().unwrap_or(0);
        let mut scratch = vec![Complex64::new(0.0, 0.0); scratch_len];

        // x lines are contiguous
        plans[0].process_with_scratch(data, &mut scratch);

        let mut line = vec![Complex64::new(0.0, 0.0); ny.max(nz)];
        for iz in 0..nz {
            for ix in 0..nx {
                for iy in 0..ny {
                    line[iy] = data[(iz * ny + iy) * nx + ix];
                }
                plans[1].process_with_scratch(&mut line[..ny], &mut scratch);
                for iy in 0..ny {
                    data[(iz * ny + iy) * nx + ix] = line[iy];
                }
            }
        }
        let plane = nx * ny;
        for j in 0..plane {
            for iz in 0..nz {
                line[iz] = data[iz * plane + j];
            }
            plans[2].process_with_scratch(&mut line[..nz], &mut scratch);
            for iz in 0..nz {
                data[iz * plane + j] = line[iz];
            }
        }
    }
}

/// Forward transform with continuum scaling: `û(k) ≈ ∫ d³r u(r) e^{-ik·r}`.
pub fn fft3(f: &ComplexField3) -> Result<SpectralField3> {
    if let Some(index) = first_non_finite(&f.values) {
        return Err(Error::NonFinite { index });
    }
    let grid = f.grid;
    let mut data = f.values.clone();
    Fft3::cached(grid.n).forward(&mut data);
    let vol = grid.cell_volume();
    for (v, ph) in data.iter_mut().zip(grid.origin_phase(-1.0)) {
        *v *= ph * vol;
    }
    Ok(SpectralField3 { grid, values: data })
}

/// Inverse of [`fft3`]: `u(r) ≈ (2π)^{-3} ∫ d³k û(k) e^{ik·r}`.
pub fn ifft3(spec: &SpectralField3) -> Result<ComplexField3> {
    if let Some(index) = first_non_finite(&spec.values) {
        return Err(Error::NonFinite { index });
    }
    Ok(ComplexField3 { grid: spec.grid, values: ifft3_raw(&spec.grid, spec.values.clone()) })
}

/// [`ifft3`] on a bare buffer already laid out for `grid`.
pub(crate) fn ifft3_raw(grid: &Grid3, mut data: Vec<Complex64>) -> Vec<Complex64> {
    let scale = 1.0 / (grid.len() as f64 * grid.cell_volume());
    for (v, ph) in data.iter_mut().zip(grid.origin_phase(1.0)) {
        *v *= ph * scale;
    }
    Fft3::cached(grid.n).inverse(&mut data);
    data
}

/// [`fft3`] on a bare buffer already laid out for `grid`.
pub(crate) fn fft3_raw(grid: &Grid3, mut data: Vec<Complex64>) -> Vec<Complex64> {
    Fft3::cached(grid.n).forward(&mut data);
    let vol = grid.cell_volume();
    for (v, ph) in data.iter_mut().zip(grid.origin_phase(-1.0)) {
        *v *= ph * vol;
    }
    data
}

/// `⟨f, g⟩ = Σ f conj(g) · cell volume`.
pub fn inner_product(f: &ComplexField3, g: &ComplexField3) -> Result<Complex64> {
    f.grid.check_same(&g.grid)?;
    let sum: Complex64 = f.values.iter().zip(&g.values).map(|(a, b)| a * b.conj()).sum();
    Ok(sum * f.grid.cell_volume())
}

/// Position-space snapshot of a solution at time `t`.
pub fn propagate(s: &SolutionSpectrum, t: f64) -> Result<ComplexField3> {
    ifft3(&s.spectrum_at(t))
}

/// Splits Cauchy data `(u, ∂ₜu)|₀ = (w, v)` into frequency-sign parts
/// `û± = ½[ŵ ∓ v̂ / (ic|k|)]`.
///
/// The k = 0 bin of the `v̂ / |k|` term is set to zero; a non-negligible
/// `v̂(0)` is recorded in [`SolutionSpectrum::notes`].
pub fn split_ivp(w: &ComplexField3, v: &ComplexField3, c: f64) -> Result<SolutionSpectrum> {
    check_speed(c)?;
    w.grid.check_same(&v.grid)?;
    let wh = fft3(w)?;
    let vh = fft3(v)?;
    let grid = w.grid;
    let mut plus = Vec::with_capacity(grid.len());
    let mut minus = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let k = norm3(grid.wavevector(i));
        let vterm = if k > 0.0 {
            vh.values[i] / Complex64::new(0.0, c * k)
        } else {
            Complex64::new(0.0, 0.0)
        };
        plus.push(0.5 * (wh.values[i] - vterm));
        minus.push(0.5 * (wh.values[i] + vterm));
    }
    let mut out = SolutionSpectrum::new(
        SpectralField3 { grid, values: plus },
        SpectralField3 { grid, values: minus },
        c,
    )?;
    let dc = vh.values[0];
    let scale = vh.values.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if dc.norm() > 1e-12 * scale {
        out.notes.push(format!(
            "velocity has a non-zero mean (v̂(0) = {:e}{:+e}i); its k = 0 contribution was dropped",
            dc.re, dc.im
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid8() -> Grid3 {
        Grid3::new([8, 10, 12], [0.5, 0.4, 0.3], [-1.7, 0.3, -2.0]).unwrap()
    }

    fn random_field(grid: Grid3, seed: u64) -> ComplexField3 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..grid.len())
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        ComplexField3::new(grid, values).unwrap()
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid3::new([6, 8, 8], [1.0; 3], [0.0; 3]).is_err());
        assert!(Grid3::new([9, 8, 8], [1.0; 3], [0.0; 3]).is_err());
        assert!(Grid3::new([8, 8, 8], [1.0, 0.0, 1.0], [0.0; 3]).is_err());
    }

    #[test]
    fn zero_wavenumber_appears_once() {
        let g = grid8();
        let zeros = g.wavevectors().iter().filter(|k| norm3(**k) == 0.0).count();
        assert_eq!(zeros, 1);
    }

    #[test]
    fn constant_field_is_pure_dc() {
        let g = grid8();
        let f = ComplexField3::from_fn(g, |_| Complex64::new(1.0, 0.0)).unwrap();
        let s = fft3(&f).unwrap();
        let expected = g.cell_volume() * g.len() as f64;
        assert!((s.values()[0] - expected).norm() < 1e-12 * expected);
        for v in &s.values()[1..] {
            assert!(v.norm() < 1e-12 * expected);
        }
    }

    #[test]
    fn lattice_tone_occupies_one_bin() {
        let g = grid8();
        let m = [2i64, -3, 1];
        let idx = g.wave_index(m).unwrap();
        let k0 = g.wavevector(idx);
        let f = ComplexField3::from_fn(g, |r| {
            Complex64::from_polar(1.0, k0[0] * r[0] + k0[1] * r[1] + k0[2] * r[2])
        })
        .unwrap();
        let s = fft3(&f).unwrap();
        let peak = g.cell_volume() * g.len() as f64;
        for (i, v) in s.values().iter().enumerate() {
            if i == idx {
                assert!((v - peak).norm() < 1e-10 * peak);
            } else {
                assert!(v.norm() < 1e-10 * peak, "leak at {i}: {v}");
            }
        }
        let back = ifft3(&s).unwrap();
        assert!(back.sub(&f).unwrap().norm() < 1e-12 * f.norm());
    }

    #[test]
    fn non_finite_input_reports_index() {
        let g = grid8();
        let mut f = ComplexField3::zeros(g);
        f.values_mut()[17] = Complex64::new(f64::NAN, 0.0);
        match fft3(&f) {
            Err(Error::NonFinite { index }) => assert_eq!(index, 17),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            ComplexField3::new(g, vec![Complex64::new(f64::INFINITY, 0.0); g.len()]),
            Err(Error::NonFinite { index: 0 })
        ));
    }

    #[test]
    fn unit_field_inner_product() {
        let g = grid8();
        let f = ComplexField3::from_fn(g, |_| Complex64::new(0.0, 1.0)).unwrap();
        let ip = inner_product(&f, &f).unwrap();
        assert!((ip.re - g.len() as f64 * g.cell_volume()).abs() < 1e-12);
        assert!(ip.im.abs() < 1e-12);
    }

    #[test]
    fn distinct_tones_are_orthogonal() {
        let g = grid8();
        let tone = |m: [i64; 3]| {
            let k = g.wavevector(g.wave_index(m).unwrap());
            ComplexField3::from_fn(g, move |r| {
                Complex64::from_polar(1.0, k[0] * r[0] + k[1] * r[1] + k[2] * r[2])
            })
            .unwrap()
        };
        let a = tone([1, 0, 2]);
        let b = tone([1, 1, 2]);
        let ip = inner_product(&a, &b).unwrap();
        assert!(ip.norm() < 1e-12 * a.norm() * b.norm());
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let a = ComplexField3::zeros(grid8());
        let b = ComplexField3::zeros(Grid3::centered_cube(8, 1.0).unwrap());
        assert!(matches!(inner_product(&a, &b), Err(Error::GridMismatch)));
        assert!(matches!(split_ivp(&a, &b, 1.0), Err(Error::GridMismatch)));
    }

    #[test]
    fn propagate_at_zero_is_inverse_transform() {
        let g = grid8();
        let f = random_field(g, 3);
        let s = SolutionSpectrum::single(Sign::Plus, fft3(&f).unwrap(), 1.3).unwrap();
        let u = propagate(&s, 0.0).unwrap();
        assert!(u.sub(&f).unwrap().norm() < 1e-12 * f.norm());
    }

    #[test]
    fn tone_propagates_with_dispersion_relation() {
        let g = grid8();
        let c = 2.0;
        let t = 0.37;
        let idx = g.wave_index([1, 2, -1]).unwrap();
        let k0 = g.wavevector(idx);
        let kn = norm3(k0);
        let mut spec = SpectralField3::zeros(g);
        spec.values_mut()[idx] = Complex64::new(1.0, 0.0);
        let s = SolutionSpectrum::single(Sign::Plus, spec.clone(), c).unwrap();
        let u = propagate(&s, t).unwrap();
        let amp = 1.0 / (g.len() as f64 * g.cell_volume());
        for i in 0..g.len() {
            let r = g.position(i);
            let phase = k0[0] * r[0] + k0[1] * r[1] + k0[2] * r[2] - kn * c * t;
            let expected = Complex64::from_polar(amp, phase);
            assert!((u.values()[i] - expected).norm() < 1e-12 * amp);
        }
    }

    #[test]
    fn pulse_norm_is_conserved() {
        let g = Grid3::centered_cube(16, 8.0).unwrap();
        let pulse = ComplexField3::from_fn(g, |r| {
            Complex64::new((-(r[0] * r[0] + r[1] * r[1] + r[2] * r[2])).exp(), 0.0)
        })
        .unwrap();
        let s = SolutionSpectrum::single(Sign::Plus, fft3(&pulse).unwrap(), 1.0).unwrap();
        let n0 = pulse.norm();
        for t in [0.01, 0.1, 0.5] {
            let nt = propagate(&s, t).unwrap().norm();
            assert!((nt - n0).abs() < 1e-12 * n0);
        }
    }

    #[test]
    fn split_with_zero_velocity_halves_displacement() {
        let g = grid8();
        let w = random_field(g, 5);
        let s = split_ivp(&w, &ComplexField3::zeros(g), 1.0).unwrap();
        let wh = fft3(&w).unwrap();
        for i in 0..g.len() {
            assert!((s.plus.values()[i] - 0.5 * wh.values()[i]).norm() < 1e-14);
            assert_eq!(s.plus.values()[i], s.minus.values()[i]);
        }
        assert!(s.notes.is_empty());
    }

    #[test]
    fn split_of_velocity_tone() {
        let g = grid8();
        let c = 1.5;
        let idx = g.wave_index([0, 1, 3]).unwrap();
        let k0 = g.wavevector(idx);
        let v = ComplexField3::from_fn(g, |r| {
            Complex64::from_polar(1.0, k0[0] * r[0] + k0[1] * r[1] + k0[2] * r[2])
        })
        .unwrap();
        let s = split_ivp(&ComplexField3::zeros(g), &v, c).unwrap();
        let vh = fft3(&v).unwrap().values()[idx];
        let denom = Complex64::new(0.0, 2.0 * c * norm3(k0));
        assert!((s.plus.values()[idx] - (-vh / denom)).norm() < 1e-12 * vh.norm());
        assert!((s.minus.values()[idx] - (vh / denom)).norm() < 1e-12 * vh.norm());
    }

    #[test]
    fn split_records_dropped_velocity_mean() {
        let g = grid8();
        let v = ComplexField3::from_fn(g, |_| Complex64::new(1.0, 0.0)).unwrap();
        let s = split_ivp(&ComplexField3::zeros(g), &v, 1.0).unwrap();
        assert_eq!(s.notes.len(), 1);
        assert!(split_ivp(&v, &v, 0.0).is_err());
    }

    #[test]
    fn split_reproduces_velocity_by_central_difference() {
        let g = Grid3::centered_cube(16, 6.0).unwrap();
        let mut w = random_field(g, 11);
        let mut v = random_field(g, 12);
        // remove the mean of v so the k = 0 bin carries nothing
        let mean: Complex64 = v.values().iter().sum::<Complex64>() / g.len() as f64;
        for z in v.values_mut() {
            *z -= mean;
        }
        w.values_mut()[0] += Complex64::new(0.5, 0.0);
        let c = 0.8;
        let s = split_ivp(&w, &v, c).unwrap();
        let u0 = propagate(&s, 0.0).unwrap();
        assert!(u0.sub(&w).unwrap().norm() < 1e-12 * w.norm());

        let kmax = norm3(g.nyquist());
        let mut prev = f64::INFINITY;
        for dt in [2e-3, 1e-3] {
            let up = propagate(&s, dt).unwrap();
            let um = propagate(&s, -dt).unwrap();
            let deriv = up.sub(&um).unwrap().scale(Complex64::new(0.5 / dt, 0.0));
            let err = deriv.sub(&v).unwrap().norm() / v.norm();
            assert!(err <= (c * kmax * dt).powi(2), "dt={dt}: {err}");
            assert!(err < prev);
            prev = err;
        }
    }
}
