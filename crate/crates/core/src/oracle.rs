//! Reference solutions and error metrics used to check the wavelet pipeline.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{propagate, split_ivp, ComplexField3};

/// Relative and pointwise discrepancy with a short description.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorReport {
    pub rel_l2: f64,
    pub max_abs: f64,
    pub context: String,
}

impl ErrorReport {
    fn new(rel_l2: f64, max_abs: f64, context: String) -> Result<Self> {
        if !rel_l2.is_finite() || !max_abs.is_finite() {
            return Err(Error::NonFinite { index: 0 });
        }
        Ok(Self { rel_l2, max_abs, context })
    }
}

/// Fourier solution of the initial-value problem `u(·,0) = w`, `u_t(·,0) = v`.
pub fn fourier_ivp(w: &ComplexField3, v: &ComplexField3, c: f64, t: f64) -> Result<ComplexField3> {
    propagate(&split_ivp(w, v, c)?, t)
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)` and `max |a − b|`.
pub fn compare(a: &ComplexField3, b: &ComplexField3) -> Result<ErrorReport> {
    if a.grid() != b.grid() {
        return Err(Error::GridMismatch);
    }
    let (mut diff2, mut a2, mut b2, mut max_abs) = (0.0, 0.0, 0.0, 0.0f64);
    for (x, y) in a.values().iter().zip(b.values()) {
        let d = (x - y).norm();
        diff2 += d * d;
        a2 += x.norm_sqr();
        b2 += y.norm_sqr();
        max_abs = max_abs.max(d);
    }
    let denom = a2.max(b2).sqrt().max(f64::MIN_POSITIVE);
    ErrorReport::new(diff2.sqrt() / denom, max_abs, format!("compare on {:?} grid", a.grid().n()))
}

/// Interior residual `‖u_tt − c²Δu‖ / ‖u_tt‖` from three snapshots at
/// `t − Δt`, `t`, `t + Δt`, using second-order central differences and
/// excluding two boundary cells on every side.
///
/// `max_abs` is the largest pointwise `|□u|`. A vanishing field reports 0.
pub fn dalembert_residual(snapshots: [&ComplexField3; 3], c: f64, dt: f64) -> Result<ErrorReport> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidParameter(format!("wave speed must be positive, got {c}")));
    }
    let [prev, cur, next] = snapshots;
    let grid = *cur.grid();
    if prev.grid() != &grid || next.grid() != &grid {
        return Err(Error::GridMismatch);
    }
    const MARGIN: usize = 2;
    let n = grid.n();
    if n.iter().any(|&m| m <= 2 * MARGIN) {
        return Err(Error::InvalidParameter("grid too small for the interior margin".into()));
    }
    let h = grid.h();
    let inv_h2 = [1.0 / (h[0] * h[0]), 1.0 / (h[1] * h[1]), 1.0 / (h[2] * h[2])];
    let (p, u, q) = (prev.values(), cur.values(), next.values());
    let (mut box2, mut tt2, mut max_abs) = (0.0, 0.0, 0.0f64);
    for iz in MARGIN..n[2] - MARGIN {
        for iy in MARGIN..n[1] - MARGIN {
            for ix in MARGIN..n[0] - MARGIN {
                let i = grid.index(ix, iy, iz);
                let centre = u[i];
                let lap = (u[grid.index(ix + 1, iy, iz)] + u[grid.index(ix - 1, iy, iz)] - 2.0 * centre) * inv_h2[0]
                    + (u[grid.index(ix, iy + 1, iz)] + u[grid.index(ix, iy - 1, iz)] - 2.0 * centre) * inv_h2[1]
                    + (u[grid.index(ix, iy, iz + 1)] + u[grid.index(ix, iy, iz - 1)] - 2.0 * centre) * inv_h2[2];
                let u_tt = (q[i] + p[i] - 2.0 * centre) / (dt * dt);
                let r = u_tt - c * c * lap;
                box2 += r.norm_sqr();
                tt2 += u_tt.norm_sqr();
                max_abs = max_abs.max(r.norm());
            }
        }
    }
    let rel = if tt2 > 0.0 { (box2 / tt2).sqrt() } else { 0.0 };
    ErrorReport::new(rel, max_abs, format!("d'Alembertian residual, dt = {dt:e}, margin {MARGIN}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{fft3, Grid3};
    use crate::wavelets::gaussian_packet;
    use num_complex::Complex64;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_field(grid: Grid3, seed: u64) -> ComplexField3 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..grid.len()).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        ComplexField3::new(grid, values).unwrap()
    }

    fn zero_mean_v(grid: Grid3, seed: u64) -> ComplexField3 {
        let mut v = random_field(grid, seed);
        let mean = v.values().iter().sum::<Complex64>() / grid.len() as f64;
        v.values_mut().iter_mut().for_each(|x| *x -= mean);
        v
    }

    #[test]
    fn compare_basics() {
        let grid = Grid3::centered_cube(8, 4.0).unwrap();
        let a = random_field(grid, 1);
        assert_eq!(compare(&a, &a).unwrap().rel_l2, 0.0);
        let b = a.scale(Complex64::new(2.0, 0.0));
        assert!((compare(&a, &b).unwrap().rel_l2 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn compare_matches_independent_sum() {
        let grid = Grid3::centered_cube(8, 4.0).unwrap();
        let (a, b) = (random_field(grid, 2), random_field(grid, 3));
        let diff: f64 = a.values().iter().zip(b.values()).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
        let na = a.values().iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        let nb = b.values().iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        let r = compare(&a, &b).unwrap();
        assert!((r.rel_l2 - diff / na.max(nb)).abs() <= 1e-14 * r.rel_l2);
    }

    #[test]
    fn compare_rejects_other_grids() {
        let a = random_field(Grid3::centered_cube(8, 4.0).unwrap(), 1);
        let b = random_field(Grid3::centered_cube(8, 5.0).unwrap(), 1);
        assert!(compare(&a, &b).is_err());
    }

    #[test]
    fn fourier_ivp_at_zero_returns_w() {
        let grid = Grid3::centered_cube(12, 6.0).unwrap();
        let (w, v) = (random_field(grid, 4), zero_mean_v(grid, 5));
        let u = fourier_ivp(&w, &v, 1.3, 0.0).unwrap();
        assert!(compare(&u, &w).unwrap().rel_l2 < 1e-13);
    }

    #[test]
    fn fourier_ivp_conserves_spectral_energy() {
        let grid = Grid3::centered_cube(12, 6.0).unwrap();
        let s = split_ivp(&random_field(grid, 6), &zero_mean_v(grid, 7), 1.0).unwrap();
        let energy = |t: f64| {
            s.plus.evolve(crate::wavelets::Sign::Plus, 1.0, t).norm().powi(2)
                + s.minus.evolve(crate::wavelets::Sign::Minus, 1.0, t).norm().powi(2)
        };
        let e0 = energy(0.0);
        for t in [0.3, 2.0, 17.0] {
            assert!((energy(t) - e0).abs() <= 1e-12 * e0);
        }
    }

    #[test]
    fn fourier_ivp_reproduces_packet_evolution() {
        let phi = gaussian_packet(40.0, 1.0, 0.5, 0.5, 1.0).unwrap();
        let grid = Grid3::new([64, 64, 64], [0.07, 0.05, 0.05], [-2.24, -1.6, -1.6]).unwrap();
        let w = phi.sample(grid, 0.0).unwrap();
        // ∂ₜφ by an eighth-order central difference
        let step = 1e-2;
        let coeffs = [(1.0, 4.0 / 5.0), (2.0, -1.0 / 5.0), (3.0, 4.0 / 105.0), (4.0, -1.0 / 280.0)];
        let v = ComplexField3::from_fn(grid, |r| {
            coeffs
                .iter()
                .map(|(m, c)| c * (phi.position(r, m * step).unwrap() - phi.position(r, -m * step).unwrap()))
                .sum::<Complex64>()
                / step
        })
        .unwrap();
        let t = 0.4;
        let u = fourier_ivp(&w, &v, 1.0, t).unwrap();
        let exact = phi.sample(grid, t).unwrap();
        let r = compare(&u, &exact).unwrap();
        assert!(r.rel_l2 <= 1e-3, "{r:?}");
    }

    fn tone_snapshots(n: usize, dt: f64) -> [ComplexField3; 3] {
        let length = 2.0 * PI;
        let grid = Grid3::centered_cube(n, length).unwrap();
        // wavevector of lattice index (2, 1, 3) is exactly representable on every refinement
        let k: [f64; 3] = [2.0, 1.0, 3.0];
        let omega = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt();
        let at = |t: f64| {
            ComplexField3::from_fn(grid, |r| Complex64::from_polar(1.0, k[0] * r[0] + k[1] * r[1] + k[2] * r[2] - omega * t))
                .unwrap()
        };
        [at(0.4 - dt), at(0.4), at(0.4 + dt)]
    }

    #[test]
    fn tone_residual_is_second_order() {
        let mut last = f64::NAN;
        for (n, dt) in [(16, 0.1), (32, 0.05), (64, 0.025)] {
            let s = tone_snapshots(n, dt);
            let r = dalembert_residual([&s[0], &s[1], &s[2]], 1.0, dt).unwrap().rel_l2;
            if last.is_finite() {
                assert!(last / r >= 3.5, "ratio {}", last / r);
            }
            last = r;
        }
    }

    #[test]
    fn zero_field_has_zero_residual() {
        let z = ComplexField3::zeros(Grid3::centered_cube(8, 1.0).unwrap());
        let r = dalembert_residual([&z, &z, &z], 1.0, 0.1).unwrap();
        assert_eq!((r.rel_l2, r.max_abs), (0.0, 0.0));
    }

    #[test]
    fn residual_rejects_bad_input() {
        let z = ComplexField3::zeros(Grid3::centered_cube(8, 1.0).unwrap());
        let y = ComplexField3::zeros(Grid3::centered_cube(8, 2.0).unwrap());
        assert!(dalembert_residual([&z, &z, &z], 1.0, 0.0).is_err());
        assert!(dalembert_residual([&z, &y, &z], 1.0, 0.1).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn fourier_ivp_is_linear(seed in 0u64..1000, alpha in -2.0f64..2.0, beta in -2.0f64..2.0, t in -3.0f64..3.0) {
            let grid = Grid3::centered_cube(8, 5.0).unwrap();
            let (w1, v1) = (random_field(grid, seed), zero_mean_v(grid, seed + 1));
            let (w2, v2) = (random_field(grid, seed + 2), zero_mean_v(grid, seed + 3));
            let (a, b) = (Complex64::new(alpha, 0.3), Complex64::new(beta, -0.7));
            let w = w1.scale(a).add(&w2.scale(b)).unwrap();
            let v = v1.scale(a).add(&v2.scale(b)).unwrap();
            let lhs = fourier_ivp(&w, &v, 1.0, t).unwrap();
            let rhs = fourier_ivp(&w1, &v1, 1.0, t).unwrap().scale(a)
                .add(&fourier_ivp(&w2, &v2, 1.0, t).unwrap().scale(b)).unwrap();
            prop_assert!(compare(&lhs, &rhs).unwrap().rel_l2 <= 1e-13);
        }
    }

    #[test]
    fn fft_of_solution_has_both_parts_only_when_v_mixed() {
        // pure plus-subspace data: v = −ic|k|ŵ gives a vanishing minus part
        let grid = Grid3::centered_cube(12, 6.0).unwrap();
        let w = zero_mean_v(grid, 9);
        let w_hat = fft3(&w).unwrap();
        let v_hat = crate::fields::SpectralField3::new(
            grid,
            w_hat
                .values()
                .iter()
                .zip(grid.wavevectors())
                .map(|(x, k)| x * Complex64::new(0.0, -crate::fields::norm3(k)))
                .collect(),
        )
        .unwrap();
        let v = crate::fields::ifft3(&v_hat).unwrap();
        let s = split_ivp(&w, &v, 1.0).unwrap();
        assert!(s.minus.norm() <= 1e-12 * s.plus.norm());
    }
}
