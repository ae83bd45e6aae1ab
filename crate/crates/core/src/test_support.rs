//! Fixtures shared by unit tests.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fields::{norm3, ComplexField3, Grid3, SpectralField3};

/// Random spectrum supported on the shell `k_lo ≤ |k| ≤ k_hi`.
pub fn shell_spectrum(grid: Grid3, band: (f64, f64), seed: u64) -> SpectralField3 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = grid
        .wavevectors()
        .into_iter()
        .map(|k| {
            let z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let kk = norm3(k);
            if kk >= band.0 && kk <= band.1 {
                z
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    SpectralField3::new(grid, values).unwrap()
}

pub fn shell_field(grid: Grid3, band: (f64, f64), seed: u64) -> ComplexField3 {
    crate::fields::ifft3(&shell_spectrum(grid, band, seed)).unwrap()
}

/// 16³ periodic box of side 2π, so the lattice spacing in k is 1.
pub fn small_grid() -> Grid3 {
    Grid3::centered_cube(16, 2.0 * std::f64::consts::PI).unwrap()
}

pub const SMALL_BAND: (f64, f64) = (2.0, 6.0);

pub fn rel(a: &[Complex64], b: &[Complex64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let n: f64 = a.iter().map(|x| x.norm_sqr()).sum::<f64>().max(b.iter().map(|x| x.norm_sqr()).sum());
    if n == 0.0 {
        d.sqrt()
    } else {
        (d / n).sqrt()
    }
}
