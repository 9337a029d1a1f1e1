//! One-factor normal mixture `X = xi sqrt(W) Z` as a product family over the
//! independent pair `(Z, W)`: the normal block carries `(z, z^2)`, the shock
//! block `(ln w, w)`, and the joint likelihood ratio is the product of the
//! component ratios.

use rand_chacha::ChaCha12Rng;

use crate::dist::GammaParams;
use crate::error::{Error, Result};
use crate::families::normal::NormalTilt;
use crate::real::Real;
use crate::tilting::{
    solve_family_tilt, ActiveSet, NewtonOptions, PilotSet, SufficientFamily, TiltSolution,
};

/// Law of the mixing variable.
#[derive(Debug, Clone, Copy)]
pub enum MixtureShock<R: Real> {
    Gamma(GammaParams<R>),
    /// `W = 1`: the mixture collapses to the plain normal.
    Unit,
}

/// `X = xi sqrt(W) Z` with `Z ~ N(0,1)` independent of `W`.
#[derive(Debug, Clone, Copy)]
pub struct NormalMixtureFamily<R: Real> {
    pub xi: R,
    pub shock: MixtureShock<R>,
}

/// Tilt subsets of the mixture demos: the normal block's mean/variance and
/// the shock block's shape/rate directions, in the combinations the
/// benchmark reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixtureSubset {
    Mu,
    Sigma,
    MuSigma,
    Theta,
    Eta,
    MuTheta,
    MuEta,
}

impl MixtureSubset {
    pub fn active_set(&self) -> ActiveSet {
        // Packed layout: theta = [theta_z, theta_w], eta = [eta_z, eta_w].
        let (theta, eta): (Vec<usize>, Vec<usize>) = match self {
            MixtureSubset::Mu => (vec![0], vec![]),
            MixtureSubset::Sigma => (vec![], vec![0]),
            MixtureSubset::MuSigma => (vec![0], vec![0]),
            MixtureSubset::Theta => (vec![1], vec![]),
            MixtureSubset::Eta => (vec![], vec![1]),
            MixtureSubset::MuTheta => (vec![0, 1], vec![]),
            MixtureSubset::MuEta => (vec![0], vec![1]),
        };
        ActiveSet { theta, eta }
    }

    pub fn all() -> [MixtureSubset; 7] {
        [
            MixtureSubset::Mu,
            MixtureSubset::Sigma,
            MixtureSubset::MuSigma,
            MixtureSubset::Theta,
            MixtureSubset::Eta,
            MixtureSubset::MuTheta,
            MixtureSubset::MuEta,
        ]
    }
}

/// A solved mixture tilt in reporting form: the normal block in standard
/// `(mu, sigma^2)` parameters, the shock block in natural `(theta, eta)`.
#[derive(Debug, Clone, Copy)]
pub struct MixtureTilt<R: Real> {
    pub normal: NormalTilt<R>,
    pub theta_w: R,
    pub eta_w: R,
}

impl<R: Real> NormalMixtureFamily<R> {
    pub fn new(xi: R, shock: MixtureShock<R>) -> Result<Self> {
        if !xi.is_finite() || xi.is_zero() {
            return Err(Error::invalid("xi must be finite and nonzero"));
        }
        Ok(Self { xi, shock })
    }

    /// Indicator payoff of `{xi sqrt(W) Z > a}`.
    pub fn threshold_payoff(&self, a: R) -> impl Fn(&(R, R)) -> R + Copy {
        let xi = self.xi;
        move |&(z, w): &(R, R)| {
            if xi * w.sqrt() * z > a {
                R::one()
            } else {
                R::zero()
            }
        }
    }

    fn shock_psi(&self, theta_w: R, eta_w: R) -> Result<R> {
        match self.shock {
            MixtureShock::Gamma(g) => {
                let shape = g.shape() + theta_w;
                let rate = g.rate() - eta_w;
                if !(shape > R::zero() && rate > R::zero()) {
                    return Err(Error::domain("shock tilt outside the gamma domain"));
                }
                Ok(
                    shape.ln_gamma_fn() - g.shape().ln_gamma_fn() + g.shape() * g.rate().ln()
                        - shape * rate.ln(),
                )
            }
            // h = (ln 1, 1) is constant, so the cumulant is linear in eta.
            MixtureShock::Unit => Ok(eta_w),
        }
    }
}

impl<R: Real> SufficientFamily<R> for NormalMixtureFamily<R> {
    type Sample = (R, R);

    fn dim_theta(&self) -> usize {
        2
    }

    fn dim_eta(&self) -> usize {
        2
    }

    fn h1(&self, x: &(R, R)) -> Vec<R> {
        vec![x.0, x.1.ln()]
    }

    fn h2(&self, x: &(R, R)) -> Vec<R> {
        vec![x.0 * x.0, x.1]
    }

    fn psi(&self, theta: &[R], eta: &[R]) -> Result<R> {
        let denom = R::one() - (eta[0] + eta[0]);
        if !(denom > R::zero()) {
            return Err(Error::domain("normal block requires eta_z < 1/2"));
        }
        let psi_z = -R::lit(0.5) * denom.ln() + theta[0] * theta[0] / (denom + denom);
        Ok(psi_z + self.shock_psi(theta[1], eta[1])?)
    }

    fn grad_psi(&self, theta: &[R], eta: &[R]) -> Result<(Vec<R>, Vec<R>)> {
        let tilt = NormalTilt::from_natural(theta[0], eta[0])?;
        let (gw1, gw2) = match self.shock {
            MixtureShock::Gamma(g) => {
                let shape = g.shape() + theta[1];
                let rate = g.rate() - eta[1];
                if !(shape > R::zero() && rate > R::zero()) {
                    return Err(Error::domain("shock tilt outside the gamma domain"));
                }
                (crate::special::digamma(shape)? - rate.ln(), shape / rate)
            }
            MixtureShock::Unit => (R::zero(), R::one()),
        };
        Ok((
            vec![tilt.mu, gw1],
            vec![tilt.sigma2 + tilt.mu * tilt.mu, gw2],
        ))
    }

    fn in_domain(&self, theta: &[R], eta: &[R], margin: R) -> bool {
        if theta.iter().chain(eta.iter()).any(|v| !v.is_finite()) {
            return false;
        }
        let z_ok = eta[0] < R::lit(0.5) - margin;
        let w_ok = match self.shock {
            MixtureShock::Gamma(g) => g.shape() + theta[1] > margin && g.rate() - eta[1] > margin,
            MixtureShock::Unit => true,
        };
        z_ok && w_ok
    }

    fn sample_base(&self, rng: &mut ChaCha12Rng) -> (R, R) {
        let z = R::std_normal_draw(rng);
        let w = match self.shock {
            MixtureShock::Gamma(g) => R::gamma_draw(rng, g.shape(), g.rate()),
            MixtureShock::Unit => R::one(),
        };
        (z, w)
    }

    fn sample_tilted(&self, theta: &[R], eta: &[R], rng: &mut ChaCha12Rng) -> Result<(R, R)> {
        let tilt = NormalTilt::from_natural(theta[0], eta[0])?;
        let z = tilt.mu + tilt.sigma2.sqrt() * R::std_normal_draw(rng);
        let w = match self.shock {
            MixtureShock::Gamma(g) => {
                let shape = g.shape() + theta[1];
                let rate = g.rate() - eta[1];
                if !(shape > R::zero() && rate > R::zero()) {
                    return Err(Error::domain("shock tilt outside the gamma domain"));
                }
                R::gamma_draw(rng, shape, rate)
            }
            MixtureShock::Unit => R::one(),
        };
        Ok((z, w))
    }
}

/// Solve the product-family fixed point for `{xi sqrt(W) Z > a}` over the
/// requested subset; conjugate expectations come from the pilot.
pub fn mixture_tilt<R: Real>(
    family: &NormalMixtureFamily<R>,
    a: R,
    subset: MixtureSubset,
    pilot: &PilotSet<R>,
    opts: &NewtonOptions<R>,
) -> Result<(MixtureTilt<R>, TiltSolution<R>)> {
    let _ = a; // the event is baked into the pilot payoffs
    let sol = solve_family_tilt(family, pilot, &subset.active_set(), opts)?;
    let normal = NormalTilt::from_natural(sol.theta[0], sol.eta[0])?;
    Ok((
        MixtureTilt {
            normal,
            theta_w: sol.theta[1],
            eta_w: sol.eta[1],
        },
        sol,
    ))
}
