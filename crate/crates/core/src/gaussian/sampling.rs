//! Exact samplers for Brownian motion and fractional Brownian motion on a grid.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use super::{check_hurst, increment_covariance, RngSpec};
use crate::error::{usage, Error, Result};
use crate::path::PiecewiseLinearPath;

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 2 {
        return usage("a sampling grid needs at least two points");
    }
    if grid[0] != 0.0 {
        return usage("sampling grids must start at 0");
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) || grid[grid.len() - 1] > 1.0 {
        return usage("sampling grid must be strictly increasing inside [0, 1]");
    }
    Ok(())
}

/// Builds a path from per-component increment columns (`incs[c][k]`).
fn assemble(grid: &[f64], incs: &[Vec<f64>]) -> Result<PiecewiseLinearPath> {
    let d = incs.len();
    let mut values = vec![0.0; grid.len() * d];
    for k in 1..grid.len() {
        for c in 0..d {
            values[k * d + c] = values[(k - 1) * d + c] + incs[c][k - 1];
        }
    }
    PiecewiseLinearPath::new(grid.to_vec(), values, d)
}

/// `d` independent Brownian components on `grid`, started at 0.
pub fn sample_bm(grid: &[f64], d: usize, spec: &RngSpec) -> Result<PiecewiseLinearPath> {
    check_grid(grid)?;
    if d == 0 {
        return usage("dimension must be positive");
    }
    let mut rng = spec.rng();
    let mut incs = vec![Vec::with_capacity(grid.len() - 1); d];
    for w in grid.windows(2) {
        let sd = (w[1] - w[0]).sqrt();
        for col in incs.iter_mut() {
            col.push(sd * rng.sample::<f64, _>(StandardNormal));
        }
    }
    assemble(grid, &incs)
}

/// How fractional Gaussian noise is generated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FbmMethod {
    /// Cholesky factor of the increment covariance; any grid.
    Cholesky,
    /// Circulant embedding; uniform grids only.
    DaviesHarte,
}

impl std::str::FromStr for FbmMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<FbmMethod> {
        match s {
            "cholesky" => Ok(FbmMethod::Cholesky),
            "davies_harte" | "davies-harte" => Ok(FbmMethod::DaviesHarte),
            other => usage(format!("unknown fBm method {other:?} (expected cholesky or davies_harte)")),
        }
    }
}

enum Factor {
    Cholesky(DMatrix<f64>),
    Circulant { scale: Vec<f64>, fft: Arc<dyn Fft<f64>> },
}

/// Precomputed sampler for fBm on a fixed grid; reuse it across replicas.
pub struct FbmSampler {
    grid: Vec<f64>,
    h: f64,
    factor: Factor,
}

impl std::fmt::Debug for FbmSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FbmSampler").field("points", &self.grid.len()).field("h", &self.h).field("method", &self.method()).finish()
    }
}

/// Increment covariance matrix of fBm on `grid`.
pub fn increment_covariance_matrix(grid: &[f64], h: f64) -> DMatrix<f64> {
    let n = grid.len() - 1;
    DMatrix::from_fn(n, n, |k, l| increment_covariance(grid[k], grid[k + 1], grid[l], grid[l + 1], h))
}

fn cholesky_factor(grid: &[f64], h: f64) -> Result<DMatrix<f64>> {
    let cov = increment_covariance_matrix(grid, h);
    cov.cholesky()
        .map(|c| c.l())
        .ok_or_else(|| Error::Numeric(format!("fBm increment covariance is not positive definite (H = {h}, N = {})", grid.len() - 1)))
}

/// Eigenvalues of the minimal circulant embedding of the fGn autocovariance
/// at lag spacing `step`; `None` if one is negative.
fn circulant_eigenvalues(n: usize, step: f64, h: f64, fft: &Arc<dyn Fft<f64>>) -> Option<Vec<f64>> {
    let e = 2.0 * h;
    let gamma = |k: usize| {
        let k = k as f64;
        0.5 * step.powf(e) * ((k + 1.0).powf(e) - 2.0 * k.powf(e) + (k - 1.0).abs().powf(e))
    };
    let m = 2 * n;
    let mut row: Vec<Complex64> = (0..m)
        .map(|j| {
            let lag = if j <= n { j } else { m - j };
            Complex64::new(gamma(lag), 0.0)
        })
        .collect();
    fft.process(&mut row);
    let max = row.iter().map(|c| c.re).fold(0.0, f64::max);
    if row.iter().any(|c| c.re < -1e-12 * max) {
        return None;
    }
    Some(row.iter().map(|c| c.re.max(0.0)).collect())
}

impl FbmSampler {
    pub fn new(grid: &[f64], h: f64, method: FbmMethod) -> Result<FbmSampler> {
        check_grid(grid)?;
        check_hurst(h)?;
        let n = grid.len() - 1;
        let factor = match method {
            FbmMethod::Cholesky => Factor::Cholesky(cholesky_factor(grid, h)?),
            FbmMethod::DaviesHarte => {
                let step = grid[1] - grid[0];
                let uniform = grid.windows(2).all(|w| ((w[1] - w[0]) - step).abs() <= 1e-12);
                if !uniform {
                    return usage("davies_harte needs a uniform grid");
                }
                let fft = FftPlanner::new().plan_fft_forward(2 * n);
                match circulant_eigenvalues(n, step, h, &fft) {
                    Some(lambda) => {
                        let m = (2 * n) as f64;
                        Factor::Circulant { scale: lambda.iter().map(|l| (l / m).sqrt()).collect(), fft }
                    }
                    None => {
                        log::warn!("circulant embedding not nonnegative for H = {h}, N = {n}; using Cholesky");
                        Factor::Cholesky(cholesky_factor(grid, h)?)
                    }
                }
            }
        };
        Ok(FbmSampler { grid: grid.to_vec(), h, factor })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn hurst(&self) -> f64 {
        self.h
    }

    /// Method actually in use, after any fallback.
    pub fn method(&self) -> FbmMethod {
        match self.factor {
            Factor::Cholesky(_) => FbmMethod::Cholesky,
            Factor::Circulant { .. } => FbmMethod::DaviesHarte,
        }
    }

    fn noise(&self, rng: &mut impl Rng) -> Vec<f64> {
        let n = self.grid.len() - 1;
        match &self.factor {
            Factor::Cholesky(l) => {
                let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
                (l * z).iter().copied().collect()
            }
            Factor::Circulant { scale, fft } => {
                let mut buf: Vec<Complex64> = scale
                    .iter()
                    .map(|s| {
                        let re: f64 = rng.sample(StandardNormal);
                        let im: f64 = rng.sample(StandardNormal);
                        Complex64::new(s * re, s * im)
                    })
                    .collect();
                fft.process(&mut buf);
                buf[..n].iter().map(|c| c.re).collect()
            }
        }
    }

    /// `d` independent fBm components on the grid.
    pub fn sample(&self, d: usize, spec: &RngSpec) -> Result<PiecewiseLinearPath> {
        if d == 0 {
            return usage("dimension must be positive");
        }
        let mut rng = spec.rng();
        let incs: Vec<Vec<f64>> = (0..d).map(|_| self.noise(&mut rng)).collect();
        assemble(&self.grid, &incs)
    }
}

/// One-off fBm sample; build an [`FbmSampler`] to draw many.
pub fn sample_fbm(grid: &[f64], d: usize, h: f64, method: FbmMethod, spec: &RngSpec) -> Result<PiecewiseLinearPath> {
    FbmSampler::new(grid, h, method)?.sample(d, spec)
}
