//! Validated distribution parameters, seedable samplers, and log-densities.
//!
//! Likelihood ratios everywhere in this crate are formed as `exp` of log-pdf
//! differences, so densities are only ever evaluated in log space.

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg;
use crate::real::Real;
use crate::special::ln_normal_pdf;

/// Mean and covariance of a multivariate normal, with a cached Cholesky
/// factor. Construction rejects non-positive-definite covariances.
#[derive(Debug, Clone)]
pub struct MvnParams<R: Real> {
    mean: Vec<R>,
    covariance: Vec<R>,
    chol: Vec<R>,
    ln_det: R,
    dim: usize,
}

impl<R: Real> MvnParams<R> {
    pub fn new(mean: Vec<R>, covariance: Vec<R>) -> Result<Self> {
        let dim = mean.len();
        if covariance.len() != dim * dim {
            return Err(Error::invalid(format!(
                "covariance must be {dim}x{dim}, got {} entries",
                covariance.len()
            )));
        }
        for i in 0..dim {
            for j in 0..i {
                let a = covariance[i * dim + j];
                let b = covariance[j * dim + i];
                if (a - b).abs() > R::lit(1e-12) * (R::one() + a.abs()) {
                    return Err(Error::invalid(format!(
                        "covariance is not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        if mean.iter().chain(covariance.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("mvn parameters must be finite"));
        }
        let chol = linalg::cholesky(&covariance, dim)?;
        let ln_det = linalg::chol_ln_det(&chol, dim);
        Ok(Self {
            mean,
            covariance,
            chol,
            ln_det,
            dim,
        })
    }

    pub fn standard(dim: usize) -> Self {
        let mut cov = vec![R::zero(); dim * dim];
        for i in 0..dim {
            cov[i * dim + i] = R::one();
        }
        Self::new(vec![R::zero(); dim], cov).expect("identity is positive definite")
    }

    /// Same covariance (and cached factor), different mean.
    pub fn with_mean(&self, mean: Vec<R>) -> Result<Self> {
        if mean.len() != self.dim {
            return Err(Error::invalid("mean dimension mismatch"));
        }
        let mut out = self.clone();
        out.mean = mean;
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mean(&self) -> &[R] {
        &self.mean
    }

    pub fn covariance(&self) -> &[R] {
        &self.covariance
    }

    pub fn chol_factor(&self) -> &[R] {
        &self.chol
    }

    /// Solve `Sigma x = b` using the cached factor.
    pub fn solve(&self, b: &[R]) -> Vec<R> {
        linalg::chol_solve(&self.chol, b, self.dim)
    }
}

/// Shape/rate parameterization: density proportional to
/// `x^(shape-1) exp(-rate x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaParams<R: Real> {
    shape: R,
    rate: R,
}

impl<R: Real> GammaParams<R> {
    pub fn new(shape: R, rate: R) -> Result<Self> {
        if !(shape > R::zero()) || !(rate > R::zero()) || !shape.is_finite() || !rate.is_finite() {
            return Err(Error::invalid(format!(
                "gamma requires shape > 0 and rate > 0, got shape={shape}, rate={rate}"
            )));
        }
        Ok(Self { shape, rate })
    }

    pub fn shape(&self) -> R {
        self.shape
    }

    pub fn rate(&self) -> R {
        self.rate
    }

    pub fn mean(&self) -> R {
        self.shape / self.rate
    }

    pub fn variance(&self) -> R {
        self.shape / (self.rate * self.rate)
    }
}

/// One standard normal draw from the given generator.
pub fn sample_std_normal<R: Real, G: Rng + ?Sized>(rng: &mut G) -> R {
    R::std_normal_draw(rng)
}

/// Draw `mean + L z` with iid standard normal `z`.
pub fn sample_mvn<R: Real, G: Rng + ?Sized>(params: &MvnParams<R>, rng: &mut G) -> Vec<R> {
    let d = params.dim();
    let z: Vec<R> = (0..d).map(|_| R::std_normal_draw(rng)).collect();
    let mut out = params.mean().to_vec();
    let l = params.chol_factor();
    for i in 0..d {
        let mut acc = R::zero();
        for j in 0..=i {
            acc += l[i * d + j] * z[j];
        }
        out[i] += acc;
    }
    out
}

/// One `Gamma(shape, rate)` draw.
pub fn sample_gamma<R: Real, G: Rng + ?Sized>(params: &GammaParams<R>, rng: &mut G) -> R {
    R::gamma_draw(rng, params.shape, params.rate)
}

/// ln N(x; mean, std^2). Callers guarantee `std > 0`.
pub fn log_pdf_normal<R: Real>(x: R, mean: R, std: R) -> R {
    debug_assert!(std > R::zero());
    ln_normal_pdf((x - mean) / std) - std.ln()
}

/// ln of the multivariate normal density.
pub fn log_pdf_mvn<R: Real>(x: &[R], params: &MvnParams<R>) -> R {
    let d = params.dim();
    debug_assert_eq!(x.len(), d);
    let centered: Vec<R> = x
        .iter()
        .zip(params.mean())
        .map(|(xi, mi)| *xi - *mi)
        .collect();
    // quadratic form via y = L^-1 (x - m)
    let y = linalg::forward_sub(params.chol_factor(), &centered, d);
    let quad = linalg::dot(&y, &y);
    let half = R::lit(0.5);
    -half * quad - half * params.ln_det - half * R::lit(d as f64) * R::TAU().ln()
}

/// ln of the gamma density; errors for `x <= 0`.
pub fn log_pdf_gamma<R: Real>(x: R, params: &GammaParams<R>) -> Result<R> {
    if !(x > R::zero()) {
        return Err(Error::domain(format!(
            "gamma density evaluated outside its support: x={x}"
        )));
    }
    Ok(ln_gamma_pdf_unchecked(x, params.shape, params.rate))
}

/// ln gamma density without the support check, for hot likelihood-ratio loops
/// where `x > 0` holds by construction.
#[inline]
pub fn ln_gamma_pdf_unchecked<R: Real>(x: R, shape: R, rate: R) -> R {
    shape * rate.ln() - shape.ln_gamma_fn() + (shape - R::one()) * x.ln() - rate * x
}
