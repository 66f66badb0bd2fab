//! Matérn covariance and log-normal permeability sampling by circulant
//! embedding.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaternParams {
    pub nu: f64,
    pub range: f64,
    pub variance: f64,
}

impl MaternParams {
    pub fn new(nu: f64, range: f64, variance: f64) -> Result<Self> {
        if !(nu > 0.0 && range > 0.0 && variance > 0.0) {
            return Err(Error::Parameter(format!(
                "Matérn parameters must be positive, got nu={nu}, range={range}, variance={variance}"
            )));
        }
        if (nu - 0.5).abs() > 1e-12 && (nu - 1.5).abs() > 1e-12 {
            return Err(Error::Parameter(format!(
                "Matérn smoothness {nu} is not supported (use 0.5 or 1.5)"
            )));
        }
        Ok(MaternParams { nu, range, variance })
    }
}

/// `C(h) = σ² / (2^(ν-1) Γ(ν)) s^ν K_ν(s)` with `s = 2 √ν h / r`, in the
/// closed forms available for `ν = 1/2` and `ν = 3/2`.
pub fn matern_cov(params: &MaternParams, h: f64) -> Result<f64> {
    if !(h >= 0.0) {
        return Err(Error::Parameter(format!("lag must be non-negative, got {h}")));
    }
    let s = 2.0 * params.nu.sqrt() * h / params.range;
    if (params.nu - 0.5).abs() <= 1e-12 {
        Ok(params.variance * (-s).exp())
    } else if (params.nu - 1.5).abs() <= 1e-12 {
        Ok(params.variance * (1.0 + s) * (-s).exp())
    } else {
        Err(Error::Parameter(format!(
            "Matérn smoothness {} is not supported (use 0.5 or 1.5)",
            params.nu
        )))
    }
}

/// A draw of `log k̂` at the cell centers of an `n x n` grid on the unit
/// square, stored row by row in `y` (cell `(i, j)` at `j n + i`).
#[derive(Clone, Debug, PartialEq)]
pub struct FieldSample {
    pub n: usize,
    pub values: Vec<f64>,
    pub seed: u64,
    pub params: MaternParams,
}

impl FieldSample {
    /// `k̂ = exp(log k̂)`.
    pub fn permeability(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.exp()).collect()
    }
}

/// Largest embedding tried, as a multiple of the grid size.
const MAX_PADDING: usize = 8;
/// Largest grid for which the dense fallback is attempted.
const DENSE_LIMIT: usize = 64;

fn fft2(data: &mut [Complex<f64>], m: usize, planner: &mut FftPlanner<f64>) {
    let fft = planner.plan_fft_forward(m);
    for row in data.chunks_mut(m) {
        fft.process(row);
    }
    let mut col = vec![Complex::new(0.0, 0.0); m];
    for i in 0..m {
        for j in 0..m {
            col[j] = data[j * m + i];
        }
        fft.process(&mut col);
        for j in 0..m {
            data[j * m + i] = col[j];
        }
    }
}

/// Eigenvalues of the block-circulant embedding of size `m x m`, or `None`
/// if the embedding is not positive semi-definite.
fn embedding_spectrum(
    n: usize,
    m: usize,
    params: &MaternParams,
    planner: &mut FftPlanner<f64>,
) -> Result<Option<Vec<f64>>> {
    let h = 1.0 / n as f64;
    let mut c = vec![Complex::new(0.0, 0.0); m * m];
    for j in 0..m {
        let dy = j.min(m - j) as f64 * h;
        for i in 0..m {
            let dx = i.min(m - i) as f64 * h;
            c[j * m + i] = Complex::new(matern_cov(params, dx.hypot(dy))?, 0.0);
        }
    }
    fft2(&mut c, m, planner);
    let lam: Vec<f64> = c.iter().map(|z| z.re).collect();
    let max = lam.iter().cloned().fold(0.0, f64::max);
    let min = lam.iter().cloned().fold(f64::INFINITY, f64::min);
    if min < -1e-10 * max {
        return Ok(None);
    }
    Ok(Some(lam.into_iter().map(|l| l.max(0.0)).collect()))
}

/// Sample a stationary Gaussian field with Matérn covariance on the cell
/// centers of an `n x n` grid.
pub fn sample_log_normal_field(n: usize, params: &MaternParams, seed: u64) -> Result<FieldSample> {
    if n == 0 {
        return Err(Error::Parameter("grid size must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut planner = FftPlanner::new();
    let mut m = 2 * n;
    while m <= MAX_PADDING * n {
        if let Some(lam) = embedding_spectrum(n, m, params, &mut planner)? {
            let scale = 1.0 / (m * m) as f64;
            let mut xi: Vec<Complex<f64>> = lam
                .iter()
                .map(|&l| {
                    let a: f64 = StandardNormal.sample(&mut rng);
                    let b: f64 = StandardNormal.sample(&mut rng);
                    Complex::new(a, b) * (l * scale).sqrt()
                })
                .collect();
            fft2(&mut xi, m, &mut planner);
            let values = (0..n * n).map(|k| xi[(k / n) * m + k % n].re).collect();
            return Ok(FieldSample {
                n,
                values,
                seed,
                params: *params,
            });
        }
        m *= 2;
    }
    if n <= DENSE_LIMIT {
        return dense_sample(n, params, seed, &mut rng);
    }
    Err(Error::Sampling(format!(
        "circulant embedding of the {n}x{n} grid is not positive definite up to {MAX_PADDING}x padding; \
         increase the padding or reduce the correlation range"
    )))
}

fn dense_sample(n: usize, params: &MaternParams, seed: u64, rng: &mut ChaCha8Rng) -> Result<FieldSample> {
    let h = 1.0 / n as f64;
    let nn = n * n;
    let mut cov = DMatrix::zeros(nn, nn);
    for a in 0..nn {
        for b in a..nn {
            let dx = ((a % n) as f64 - (b % n) as f64) * h;
            let dy = ((a / n) as f64 - (b / n) as f64) * h;
            let c = matern_cov(params, dx.hypot(dy))?;
            cov[(a, b)] = c;
            cov[(b, a)] = c;
        }
    }
    let chol = cov
        .cholesky()
        .ok_or_else(|| Error::Sampling("dense covariance matrix is not positive definite".into()))?;
    let z = DVector::from_fn(nn, |_, _| StandardNormal.sample(&mut *rng));
    let values = (chol.l() * z).as_slice().to_vec();
    Ok(FieldSample {
        n,
        values,
        seed,
        params: *params,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn covariance_values() {
        let p = MaternParams::new(0.5, 0.3, 1.0).unwrap();
        assert_eq!(matern_cov(&p, 0.0).unwrap(), 1.0);
        let c = matern_cov(&p, 0.3).unwrap();
        assert!((c - (-(2f64).sqrt()).exp()).abs() < 1e-15);
        assert!((c - 0.2431).abs() < 1e-4);
        let q = MaternParams::new(1.5, 0.3, 2.0).unwrap();
        assert_eq!(matern_cov(&q, 0.0).unwrap(), 2.0);
        assert!(matern_cov(&p, -1.0).is_err());
        assert!(MaternParams::new(1.0, 0.3, 1.0).is_err());
        assert!(MaternParams::new(0.5, 0.0, 1.0).is_err());
    }

    #[test]
    fn covariance_decreases() {
        for nu in [0.5, 1.5] {
            let p = MaternParams::new(nu, 0.1, 3.0).unwrap();
            let c: Vec<f64> = (0..100).map(|k| matern_cov(&p, k as f64 * 0.01).unwrap()).collect();
            assert!(c.windows(2).all(|w| w[0] > w[1]));
        }
    }

    #[test]
    fn reproducible() {
        let p = MaternParams::new(1.5, 0.3, 1.0).unwrap();
        let a = sample_log_normal_field(16, &p, 9).unwrap();
        let b = sample_log_normal_field(16, &p, 9).unwrap();
        let c = sample_log_normal_field(16, &p, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.values, c.values);
        assert!(a.permeability().iter().all(|&k| k > 0.0));
    }

    #[test]
    fn tiny_variance_gives_unit_permeability() {
        let p = MaternParams::new(0.5, 0.3, 1e-20).unwrap();
        let s = sample_log_normal_field(16, &p, 1).unwrap();
        assert!(s.values.iter().all(|v| v.abs() < 1e-8));
        assert!(s.permeability().iter().all(|k| (k - 1.0).abs() < 1e-8));
    }

    #[test]
    fn dense_fallback_matches_statistics_shape() {
        let p = MaternParams::new(0.5, 0.3, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = dense_sample(4, &p, 4, &mut rng).unwrap();
        assert_eq!(s.values.len(), 16);
    }
}
