//! Sufficient tilting of the standard d-dimensional normal.
//!
//! The quadratic statistic enters through the matrix `M` with diagonal
//! entries `eta_1..eta_d` and a single shared off-diagonal entry
//! `eta_{d+1}`; the tilted law is `N((I-2M)^-1 theta, (I-2M)^-1)` on the set
//! where `I - 2M` stays positive definite. Conjugate expectations over
//! general events are estimated from a pilot sample, so the fixed points are
//! solved with the generic machinery in [`crate::tilting`].

use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::linalg;
use crate::real::Real;
use crate::tilting::{
    solve_family_tilt, ActiveSet, NewtonOptions, PilotSet, SufficientFamily, TiltSolution,
};

/// Standard multivariate normal base family, `p = d`, `q = d + 1`.
#[derive(Debug, Clone, Copy)]
pub struct MvnFamily {
    dim: usize,
}

/// Tilted law in standard form.
#[derive(Debug, Clone)]
pub struct MvnTilt<R: Real> {
    pub mean: Vec<R>,
    pub covariance: Vec<R>,
}

/// Parameter blocks of the bivariate demos: mean only, diagonal scales only,
/// the shared correlation entry only, or everything.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MvnTiltSubset {
    Mean,
    Scale,
    Correlation,
    All,
}

impl MvnFamily {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        Ok(Self { dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `M = diag(eta_1..eta_d) + eta_{d+1} (J - I)`.
    pub fn m_matrix<R: Real>(&self, eta: &[R]) -> Vec<R> {
        let d = self.dim;
        let mut m = vec![eta[d]; d * d];
        for i in 0..d {
            m[i * d + i] = eta[i];
        }
        m
    }

    /// Stencil `dM/d eta_i`: a single one at `(i,i)` for `i < d`, ones at
    /// every off-diagonal position for the shared entry.
    pub fn m_stencil<R: Real>(&self, i: usize) -> Vec<R> {
        let d = self.dim;
        let mut s = vec![R::zero(); d * d];
        if i < d {
            s[i * d + i] = R::one();
        } else {
            for j in 0..d {
                for k in 0..d {
                    if j != k {
                        s[j * d + k] = R::one();
                    }
                }
            }
        }
        s
    }

    fn i_minus_2m<R: Real>(&self, eta: &[R]) -> Vec<R> {
        let d = self.dim;
        let mut a = self.m_matrix(eta);
        for v in a.iter_mut() {
            *v = -(*v + *v);
        }
        for i in 0..d {
            a[i * d + i] += R::one();
        }
        a
    }

    /// Tilted mean and covariance `((I-2M)^-1 theta, (I-2M)^-1)`.
    pub fn tilted_law<R: Real>(&self, theta: &[R], eta: &[R]) -> Result<MvnTilt<R>> {
        let d = self.dim;
        let a = self.i_minus_2m(eta);
        let l = linalg::cholesky(&a, d)
            .map_err(|_| Error::domain("I - 2M is not positive definite"))?;
        let covariance = linalg::chol_inverse(&l, d);
        let mean = linalg::chol_solve(&l, theta, d);
        Ok(MvnTilt { mean, covariance })
    }

    /// Natural parameters of a standard-form tilt; the covariance must carry
    /// the shared-off-diagonal structure of `M`.
    pub fn natural_from_standard<R: Real>(&self, tilt: &MvnTilt<R>) -> Result<(Vec<R>, Vec<R>)> {
        let d = self.dim;
        let l = linalg::cholesky(&tilt.covariance, d)?;
        let prec = linalg::chol_inverse(&l, d);
        let theta = linalg::mat_vec(&prec, &tilt.mean, d);
        let mut eta = vec![R::zero(); d + 1];
        for i in 0..d {
            eta[i] = (R::one() - prec[i * d + i]) * R::lit(0.5);
        }
        let mut shared: Option<R> = None;
        for j in 0..d {
            for k in 0..d {
                if j != k {
                    let v = -prec[j * d + k] * R::lit(0.5);
                    match shared {
                        None => shared = Some(v),
                        Some(s) => {
                            if (s - v).abs() > R::lit(1e-9) * (R::one() + s.abs()) {
                                return Err(Error::invalid(
                                    "covariance lacks the shared off-diagonal structure",
                                ));
                            }
                        }
                    }
                }
            }
        }
        eta[d] = shared.unwrap_or(R::zero());
        Ok((theta, eta))
    }
}

impl<R: Real> SufficientFamily<R> for MvnFamily {
    type Sample = Vec<R>;

    fn dim_theta(&self) -> usize {
        self.dim
    }

    fn dim_eta(&self) -> usize {
        self.dim + 1
    }

    fn h1(&self, x: &Vec<R>) -> Vec<R> {
        x.clone()
    }

    fn h2(&self, x: &Vec<R>) -> Vec<R> {
        let d = self.dim;
        let mut out = Vec::with_capacity(d + 1);
        let mut sum = R::zero();
        let mut sumsq = R::zero();
        for xi in x {
            out.push(*xi * *xi);
            sum += *xi;
            sumsq += *xi * *xi;
        }
        out.push(sum * sum - sumsq);
        out
    }

    fn psi(&self, theta: &[R], eta: &[R]) -> Result<R> {
        let d = self.dim;
        let a = self.i_minus_2m(eta);
        let l = linalg::cholesky(&a, d)
            .map_err(|_| Error::domain("psi undefined: I - 2M not positive definite"))?;
        let mu = linalg::chol_solve(&l, theta, d);
        Ok(-R::lit(0.5) * linalg::chol_ln_det(&l, d) + R::lit(0.5) * linalg::dot(theta, &mu))
    }

    fn grad_psi(&self, theta: &[R], eta: &[R]) -> Result<(Vec<R>, Vec<R>)> {
        let d = self.dim;
        let law = self.tilted_law(theta, eta)?;
        let sigma = &law.covariance;
        let mu = &law.mean;
        let mut geta = Vec::with_capacity(d + 1);
        for i in 0..d {
            geta.push(sigma[i * d + i] + mu[i] * mu[i]);
        }
        let mut tr_off = R::zero();
        let mut mu_off = R::zero();
        for j in 0..d {
            for k in 0..d {
                if j != k {
                    tr_off += sigma[j * d + k];
                    mu_off += mu[j] * mu[k];
                }
            }
        }
        geta.push(tr_off + mu_off);
        Ok((law.mean, geta))
    }

    fn in_domain(&self, _theta: &[R], eta: &[R], margin: R) -> bool {
        if eta.iter().any(|v| !v.is_finite()) {
            return false;
        }
        let d = self.dim;
        let mut a = self.i_minus_2m(eta);
        for i in 0..d {
            a[i * d + i] -= margin;
        }
        linalg::cholesky(&a, d).is_ok()
    }

    fn sample_base(&self, rng: &mut ChaCha12Rng) -> Vec<R> {
        (0..self.dim).map(|_| R::std_normal_draw(rng)).collect()
    }

    fn sample_tilted(&self, theta: &[R], eta: &[R], rng: &mut ChaCha12Rng) -> Result<Vec<R>> {
        let d = self.dim;
        let law = self.tilted_law(theta, eta)?;
        let l = linalg::cholesky(&law.covariance, d)?;
        let z: Vec<R> = (0..d).map(|_| R::std_normal_draw(rng)).collect();
        let mut out = law.mean;
        for i in 0..d {
            let mut acc = R::zero();
            for j in 0..=i {
                acc += l[i * d + j] * z[j];
            }
            out[i] += acc;
        }
        Ok(out)
    }
}

impl MvnTiltSubset {
    pub fn active_set(&self, d: usize) -> ActiveSet {
        match self {
            MvnTiltSubset::Mean => ActiveSet {
                theta: (0..d).collect(),
                eta: vec![],
            },
            MvnTiltSubset::Scale => ActiveSet {
                theta: vec![],
                eta: (0..d).collect(),
            },
            MvnTiltSubset::Correlation => ActiveSet {
                theta: vec![],
                eta: vec![d],
            },
            MvnTiltSubset::All => ActiveSet::full(d, d + 1),
        }
    }
}

/// Solve the mean/quadratic fixed points for a general event from a pilot of
/// base samples. The payoff is an indicator (or any non-negative function);
/// conjugate expectations are sampled because the event is arbitrary.
pub fn mvn_tilt_equations<R: Real>(
    family: &MvnFamily,
    pilot: &PilotSet<R>,
    subset: MvnTiltSubset,
    opts: &NewtonOptions<R>,
) -> Result<TiltSolution<R>> {
    solve_family_tilt(family, pilot, &subset.active_set(family.dim()), opts)
}

/// The three bivariate demo events.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BivariateEvent<R: Real> {
    /// `{X1 + X2 > k}`
    Sum(R),
    /// `{X1 > k, X2 > k}`
    BothAbove(R),
    /// `{X1 X2 > k, X1 > 0, X2 > 0}`
    Product(R),
}

impl<R: Real> BivariateEvent<R> {
    pub fn payoff(&self, x: &[R]) -> R {
        let hit = match self {
            BivariateEvent::Sum(k) => x[0] + x[1] > *k,
            BivariateEvent::BothAbove(k) => x[0] > *k && x[1] > *k,
            BivariateEvent::Product(k) => x[0] > R::zero() && x[1] > R::zero() && x[0] * x[1] > *k,
        };
        if hit {
            R::one()
        } else {
            R::zero()
        }
    }
}
