//! Reconstruction of solutions from wavelet coefficients.
//!
//! Each coefficient slice goes back to k-space with one FFT, is multiplied by
//! `a^{3/2} φ̂(a M⁻¹ k)` and the weights, and accumulated. The carrier
//! `e^{∓i|k|ct}` and one inverse FFT then give the field at any time `t`.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::admissibility::c_phi;
use crate::cwt::{CoefficientSource, IvpCoefficients, BranchWavelets, NuGrid, SliceSpectra, DEFAULT_CONSTANT_TOL, SLICE_BLOCK};
use crate::error::{Error, Result};
use crate::fields::{fft3_raw, fft3, ifft3, ComplexField3, SolutionSpectrum, SpectralField3};
use crate::wavelets::{derive_psi, PhysicalWavelet, Sign};

/// `û(k, 0) = (1/(C·orbit)) Σ w · fft3(U)(k) · a^{3/2} φ̂(a M⁻¹ k)` with `C` given.
pub fn reconstruct_spectrum_with(
    coeffs: &dyn CoefficientSource,
    phi: &PhysicalWavelet,
    c_const: Complex64,
) -> Result<SpectralField3> {
    let g = coeffs.nu_grid();
    if phi.symmetry() != g.symmetry() {
        return Err(Error::InvalidParameter(format!(
            "wavelet symmetry `{}` does not match the nu-grid (`{}`)",
            phi.symmetry().as_str(),
            g.symmetry().as_str()
        )));
    }
    if !(c_const.is_finite() && c_const.norm() > 0.0) {
        return Err(Error::ZeroConstant);
    }
    let grid = *g.grid();
    let spectra = SliceSpectra::new(phi, &grid)?;
    let mut acc = vec![Complex64::new(0.0, 0.0); grid.len()];
    let count = g.slice_count();
    for start in (0..count).step_by(SLICE_BLOCK) {
        let end = (start + SLICE_BLOCK).min(count);
        let parts: Vec<Vec<Complex64>> = (start..end)
            .into_par_iter()
            .map(|i| slice_contribution(coeffs, g, &spectra, i))
            .collect();
        for part in parts {
            for (a, v) in acc.iter_mut().zip(part) {
                *a += v;
            }
        }
    }
    let norm = c_const * g.orbit_factor();
    for v in acc.iter_mut() {
        *v /= norm;
    }
    SpectralField3::new(grid, acc)
}

fn slice_contribution(coeffs: &dyn CoefficientSource, g: &NuGrid, spectra: &SliceSpectra<'_>, i: usize) -> Vec<Complex64> {
    let node = g.slice(i);
    let u_hat = fft3_raw(g.grid(), coeffs.slice(i));
    let w = spectra.eval(&node, None);
    u_hat.iter().zip(&w).map(|(u, w)| u * w * node.weight).collect()
}

fn check_sign(coeffs: &dyn CoefficientSource, phi: &PhysicalWavelet) -> Result<()> {
    if coeffs.sign() != phi.sign() {
        return Err(Error::SignMismatch { expected: coeffs.sign().as_str(), found: phi.sign().as_str() });
    }
    Ok(())
}

/// Spectrum at `t = 0` of the solution synthesized from `coeffs` with `phi`,
/// normalized by the source's constant.
pub fn reconstruct_spectrum(coeffs: &dyn CoefficientSource, phi: &PhysicalWavelet) -> Result<SpectralField3> {
    check_sign(coeffs, phi)?;
    reconstruct_spectrum_with(coeffs, phi, coeffs.c_const())
}

/// `u(r, t) = (1/C) ∫ dμ U(ν) φ^ν(r, t)` on the grid of `coeffs`.
pub fn reconstruct(coeffs: &dyn CoefficientSource, phi: &PhysicalWavelet, t: f64) -> Result<ComplexField3> {
    let s = reconstruct_spectrum(coeffs, phi)?;
    ifft3(&s.evolve(phi.sign(), phi.c(), t))
}

/// Synthesis with a second wavelet: coefficients taken against `ψ` and
/// synthesized with `χ`, normalized by `C_ψχ`. For the swapped roles pass
/// `conj(C_ψχ)`.
pub fn reconstruct_cross(
    coeffs: &dyn CoefficientSource,
    chi: &PhysicalWavelet,
    c_psi_chi: Complex64,
    t: f64,
) -> Result<ComplexField3> {
    check_sign(coeffs, chi)?;
    let s = reconstruct_spectrum_with(coeffs, chi, c_psi_chi)?;
    ifft3(&s.evolve(chi.sign(), chi.c(), t))
}

/// Wavelets for both subspaces of an initial-value problem.
pub struct IvpWavelets<'a> {
    pub plus: &'a PhysicalWavelet,
    pub minus: &'a PhysicalWavelet,
}

/// A set of coefficient sources, each synthesized with its own wavelet and
/// constant, summed at one time.
pub struct SynthesisPlan<'a> {
    terms: Vec<(&'a dyn CoefficientSource, &'a PhysicalWavelet, Complex64)>,
}

impl<'a> Default for SynthesisPlan<'a> {
    fn default() -> Self {
        Self { terms: Vec::new() }
    }
}

impl<'a> SynthesisPlan<'a> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a term normalized by the source's own constant.
    pub fn push(&mut self, coeffs: &'a dyn CoefficientSource, phi: &'a PhysicalWavelet) -> Result<&mut Self> {
        check_sign(coeffs, phi)?;
        self.terms.push((coeffs, phi, coeffs.c_const()));
        Ok(self)
    }

    pub fn push_with_constant(
        &mut self,
        coeffs: &'a dyn CoefficientSource,
        phi: &'a PhysicalWavelet,
        c_const: Complex64,
    ) -> Result<&mut Self> {
        check_sign(coeffs, phi)?;
        self.terms.push((coeffs, phi, c_const));
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Spectra of all terms grouped by subspace, at `t = 0`.
    pub fn solution(&self) -> Result<SolutionSpectrum> {
        let (first, _, _) = self.terms.first().ok_or_else(|| Error::InvalidParameter("empty synthesis plan".into()))?;
        let grid = *first.nu_grid().grid();
        let c = self.terms[0].1.c();
        let mut parts = [SpectralField3::zeros(grid), SpectralField3::zeros(grid)];
        for (coeffs, phi, constant) in &self.terms {
            if phi.c() != c {
                return Err(Error::InvalidParameter("all wavelets in a plan must share the wave speed".into()));
            }
            let s = reconstruct_spectrum_with(*coeffs, phi, *constant)?;
            let slot = match phi.sign() {
                Sign::Plus => 0,
                Sign::Minus => 1,
            };
            parts[slot] = parts[slot].add(&s)?;
        }
        let [plus, minus] = parts;
        SolutionSpectrum::new(plus, minus, c)
    }

    pub fn execute(&self, t: f64) -> Result<ComplexField3> {
        crate::fields::propagate(&self.solution()?, t)
    }
}

/// Solves `u_tt = c²Δu` with `u(·,0) = w`, `u_t(·,0) = v` by wavelet
/// analysis and synthesis in both subspaces. Coefficients are streamed.
pub fn solve_ivp(
    w: &ComplexField3,
    v: &ComplexField3,
    wavelets: IvpWavelets<'_>,
    g: &NuGrid,
    t: f64,
) -> Result<ComplexField3> {
    propagate_ivp_spectrum(w, v, wavelets, g).and_then(|s| crate::fields::propagate(&s, t))
}

/// The reconstructed `û±(k, 0)` of [`solve_ivp`].
pub fn propagate_ivp_spectrum(
    w: &ComplexField3,
    v: &ComplexField3,
    wavelets: IvpWavelets<'_>,
    g: &NuGrid,
) -> Result<SolutionSpectrum> {
    let IvpWavelets { plus, minus } = wavelets;
    if plus.sign() != Sign::Plus {
        return Err(Error::SignMismatch { expected: "+", found: plus.sign().as_str() });
    }
    if minus.sign() != Sign::Minus {
        return Err(Error::SignMismatch { expected: "-", found: minus.sign().as_str() });
    }
    if plus.c() != minus.c() {
        return Err(Error::InvalidParameter("both wavelets must share the wave speed".into()));
    }
    if w.grid() != g.grid() {
        return Err(Error::GridMismatch);
    }
    let w_hat = fft3(w)?;
    let v_hat = fft3(v)?;
    let psi_plus = derive_psi(plus);
    let psi_minus = derive_psi(minus);
    let c_plus = c_phi(plus, DEFAULT_CONSTANT_TOL)?.require()?;
    let c_minus = c_phi(minus, DEFAULT_CONSTANT_TOL)?.require()?;
    let u_plus = IvpCoefficients::new(&w_hat, &v_hat, Sign::Plus, BranchWavelets { phi: plus, psi: &psi_plus }, g, c_plus)?;
    let u_minus = IvpCoefficients::new(&w_hat, &v_hat, Sign::Minus, BranchWavelets { phi: minus, psi: &psi_minus }, g, c_minus)?;
    let mut plan = SynthesisPlan::new();
    plan.push(&u_plus, plus)?;
    plan.push(&u_minus, minus)?;
    plan.solution()
}
