//! Sufficient tilting of the standard normal with statistic `(x, x^2)`.
//!
//! The tilted law is `N(theta/(1-2 eta), 1/(1-2 eta))` for `eta < 1/2`; in
//! the standard `(mu, sigma^2)` parameterization the conjugate measure for a
//! threshold payoff `1{X > a}` is the normal
//! `N(-mu/(2 sigma^2 - 1), sigma^2/(2 sigma^2 - 1))` truncated at `a`, which
//! keeps the fixed-point equations free of Monte Carlo noise.
//!
//! For threshold payoffs the second moment of the estimator has a closed
//! form, so the solver minimizes it directly: where the first-order
//! conditions have an interior root the minimizer coincides with it, and
//! where they do not (the conjugate-variance constraint `sigma^2 > 1/2`
//! binds, which happens for far-tail events under the joint tilt) the
//! solver returns the boundary-constrained optimum instead of failing.

use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::real::Real;
use crate::special::{ln_normal_tail, normal_hazard};
use crate::tilting::SufficientFamily;

/// The `N(0,1)` base family.
#[derive(Debug, Clone, Copy, Default)]
pub struct StdNormalFamily;

/// Tilted-law parameters in standard form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalTilt<R: Real> {
    pub mu: R,
    pub sigma2: R,
}

/// Which of the two normal parameters a fixed-point solve moves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormalTiltSubset {
    Mean,
    Variance,
    Both,
}

/// The conjugate-variance constraint `sigma^2 > 1/2` is enforced with this
/// slack; the optimum of far-tail joint tilts sits on the clamp.
const SIGMA2_FLOOR_GAP: f64 = 0.01;
const SIGMA2_CEIL: f64 = 1.0e4;

impl<R: Real> NormalTilt<R> {
    pub fn identity() -> Self {
        Self {
            mu: R::zero(),
            sigma2: R::one(),
        }
    }

    /// Natural parameters `(theta, eta)` of this tilted law.
    pub fn to_natural(&self) -> (R, R) {
        let theta = self.mu / self.sigma2;
        let eta = (R::one() - self.sigma2.recip()) * R::lit(0.5);
        (theta, eta)
    }

    pub fn from_natural(theta: R, eta: R) -> Result<Self> {
        let denom = R::one() - (eta + eta);
        if !(denom > R::zero()) {
            return Err(Error::domain(format!(
                "normal tilt requires eta < 1/2, got {eta}"
            )));
        }
        Ok(Self {
            mu: theta / denom,
            sigma2: denom.recip(),
        })
    }
}

impl<R: Real> SufficientFamily<R> for StdNormalFamily {
    type Sample = R;

    fn dim_theta(&self) -> usize {
        1
    }

    fn dim_eta(&self) -> usize {
        1
    }

    fn h1(&self, x: &R) -> Vec<R> {
        vec![*x]
    }

    fn h2(&self, x: &R) -> Vec<R> {
        vec![*x * *x]
    }

    fn psi(&self, theta: &[R], eta: &[R]) -> Result<R> {
        let (t, e) = (theta[0], eta[0]);
        let denom = R::one() - (e + e);
        if !(denom > R::zero()) {
            return Err(Error::domain(format!(
                "psi undefined at eta = {e} (requires eta < 1/2)"
            )));
        }
        Ok(-R::lit(0.5) * denom.ln() + t * t / (denom + denom))
    }

    fn grad_psi(&self, theta: &[R], eta: &[R]) -> Result<(Vec<R>, Vec<R>)> {
        let tilt = NormalTilt::from_natural(theta[0], eta[0])?;
        let mu = tilt.mu;
        Ok((vec![mu], vec![tilt.sigma2 + mu * mu]))
    }

    fn in_domain(&self, _theta: &[R], eta: &[R], margin: R) -> bool {
        eta[0].is_finite() && eta[0] < R::lit(0.5) - margin
    }

    fn sample_base(&self, rng: &mut ChaCha12Rng) -> R {
        R::std_normal_draw(rng)
    }

    fn sample_tilted(&self, theta: &[R], eta: &[R], rng: &mut ChaCha12Rng) -> Result<R> {
        let tilt = NormalTilt::from_natural(theta[0], eta[0])?;
        Ok(tilt.mu + tilt.sigma2.sqrt() * R::std_normal_draw(rng))
    }
}

/// Mean of `N(m, s^2)` truncated to `(a, infinity)`.
pub fn truncated_normal_mean<R: Real>(m: R, s: R, a: R) -> R {
    let alpha = (a - m) / s;
    m + s * normal_hazard(alpha)
}

/// Second moment of `N(m, s^2)` truncated to `(a, infinity)`.
pub fn truncated_normal_second_moment<R: Real>(m: R, s: R, a: R) -> R {
    let alpha = (a - m) / s;
    let lambda = normal_hazard(alpha);
    m * m + (m + m) * s * lambda + s * s * (R::one() + alpha * lambda)
}

/// Conjugate law of the `(mu, sigma^2)`-tilted standard normal for threshold
/// payoffs: mean and variance of `N(-mu/(2s2-1), s2/(2s2-1))`. Valid only
/// for `sigma^2 > 1/2`.
pub fn conjugate_normal<R: Real>(mu: R, sigma2: R) -> Result<(R, R)> {
    let denom = sigma2 + sigma2 - R::one();
    if !(denom > R::zero()) {
        return Err(Error::domain(format!(
            "conjugate normal requires sigma^2 > 1/2, got {sigma2}"
        )));
    }
    Ok((-mu / denom, sigma2 / denom))
}

/// Exact `ln` of the estimator's second moment
/// `G = E_P[1{X>a} exp(-theta x - eta x^2 + psi)]` under the
/// `(mu, sigma^2)` tilt, from completing the square.
pub fn ln_second_moment_threshold<R: Real>(a: R, mu: R, sigma2: R) -> Result<R> {
    if !(sigma2 > R::lit(0.5)) {
        return Err(Error::domain(format!(
            "second moment is infinite for sigma^2 <= 1/2 (got {sigma2})"
        )));
    }
    let theta = mu / sigma2;
    let pbar = R::lit(2.0) - sigma2.recip(); // conjugate precision 1 + 2 eta
    let mbar = -theta / pbar;
    let ln_psibar = R::lit(0.5) * pbar * mbar * mbar - R::lit(0.5) * pbar.ln()
        + ln_normal_tail((a - mbar) * pbar.sqrt());
    let psi = R::lit(0.5) * sigma2.ln() + mu * mu / (sigma2 + sigma2);
    Ok(ln_psibar + psi)
}

/// Root of `mu = E[X | X > a]` under the conjugate law at fixed `sigma^2`,
/// by bisection on the closed-form truncated mean.
fn mu_foc_root<R: Real>(a: R, sigma2: R) -> Result<R> {
    let f = |mu: R| -> Result<R> {
        let (cm, cv) = conjugate_normal(mu, sigma2)?;
        Ok(mu - truncated_normal_mean(cm, cv.sqrt(), a))
    };
    let mut lo = -a.abs() - R::lit(60.0);
    let mut hi = a.abs() + R::lit(60.0);
    if !(f(lo)? < R::zero() && f(hi)? > R::zero()) {
        return Err(Error::numerical(format!(
            "mean fixed point not bracketed at sigma^2 = {sigma2}"
        )));
    }
    for _ in 0..200 {
        let mid = (lo + hi) * R::lit(0.5);
        if f(mid)? < R::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < R::lit(1e-13) * (R::one() + hi.abs()) {
            break;
        }
    }
    Ok((lo + hi) * R::lit(0.5))
}

/// Golden-section minimizer of a unimodal function on `[lo, hi]`.
fn golden_min<R: Real>(f: &mut dyn FnMut(R) -> Result<R>, lo: R, hi: R) -> Result<R> {
    let phi = R::lit(0.618_033_988_749_894_9);
    let mut a = lo;
    let mut b = hi;
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    for _ in 0..160 {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = f(x2)?;
        }
        if (b - a).abs() < R::lit(1e-12) * (R::one() + a.abs()) {
            break;
        }
    }
    Ok((a + b) * R::lit(0.5))
}

/// Optimal threshold-event tilt over the requested subset.
///
/// `Mean` solves the classical scalar fixed point at `sigma^2 = 1`;
/// `Variance` and `Both` minimize the exact second moment over
/// `sigma^2 in (1/2, inf)` (interior first-order roots are recovered where
/// they exist; otherwise the `sigma^2` clamp is the reported optimum), with
/// the mean equation re-solved in closed form at every candidate variance.
pub fn normal_tilt_fixed_point<R: Real>(a: R, subset: NormalTiltSubset) -> Result<NormalTilt<R>> {
    if !a.is_finite() {
        return Err(Error::invalid("threshold must be finite"));
    }
    match subset {
        NormalTiltSubset::Mean => {
            let mu = mu_foc_root(a, R::one())?;
            Ok(NormalTilt {
                mu,
                sigma2: R::one(),
            })
        }
        NormalTiltSubset::Variance => {
            let mut obj = |u: R| -> Result<R> {
                let sigma2 = R::lit(0.5) + u.exp();
                ln_second_moment_threshold(a, R::zero(), sigma2)
            };
            let u = golden_min(
                &mut obj,
                R::lit(SIGMA2_FLOOR_GAP.ln()),
                R::lit((SIGMA2_CEIL - 0.5).ln()),
            )?;
            Ok(NormalTilt {
                mu: R::zero(),
                sigma2: R::lit(0.5) + u.exp(),
            })
        }
        NormalTiltSubset::Both => {
            let mut obj = |u: R| -> Result<R> {
                let sigma2 = R::lit(0.5) + u.exp();
                let mu = mu_foc_root(a, sigma2)?;
                ln_second_moment_threshold(a, mu, sigma2)
            };
            let u = golden_min(
                &mut obj,
                R::lit(SIGMA2_FLOOR_GAP.ln()),
                R::lit((SIGMA2_CEIL - 0.5).ln()),
            )?;
            let sigma2 = R::lit(0.5) + u.exp();
            let mu = mu_foc_root(a, sigma2)?;
            Ok(NormalTilt { mu, sigma2 })
        }
    }
}

/// Scalar fixed point of the one-parameter (mean-only) embedding:
/// `theta = hazard(a + theta) - theta`, solved by bisection plus a Newton
/// polish to 1e-10.
pub fn one_param_normal_tilt<R: Real>(a: R) -> Result<R> {
    if !a.is_finite() {
        return Err(Error::invalid("threshold must be finite"));
    }
    let f = |t: R| normal_hazard(a + t) - (t + t);
    // f(0) = hazard(a) > 0 and f is strictly decreasing, so double until the
    // sign flips.
    let mut lo = R::zero();
    let mut hi = (normal_hazard(a).abs() + R::one()).max(R::one());
    let mut guard = 0;
    while f(hi) > R::zero() {
        hi = hi + hi;
        guard += 1;
        if guard > 200 {
            return Err(Error::numerical("root bracketing failed"));
        }
    }
    for _ in 0..200 {
        let mid = (lo + hi) * R::lit(0.5);
        if f(mid) > R::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < R::lit(1e-12) {
            break;
        }
    }
    let mut t = (lo + hi) * R::lit(0.5);
    let h = R::lit(1e-7);
    for _ in 0..8 {
        let ft = f(t);
        let deriv = (f(t + h) - f(t - h)) / (h + h);
        if deriv.abs() < R::lit(1e-300) {
            break;
        }
        let next = t - ft / deriv;
        if next > lo && next < hi {
            t = next;
        }
        if ft.abs() < R::lit(1e-10) {
            break;
        }
    }
    Ok(t)
}
