//! Generic sufficient exponential tilting.
//!
//! A [`SufficientFamily`] describes an exponential embedding
//! `f_{theta,eta}(x) = exp(theta'h1(x) + eta'h2(x) - psi(theta,eta)) f(x)`
//! built on a two-part sufficient statistic `(h1, h2)`. The second moment of
//! the importance-sampling estimator,
//! `G(theta,eta) = E_P[rho^2(X) exp(-theta'h1 - eta'h2 + psi)]`,
//! is convex, and its first-order conditions equate the gradient of the
//! cumulant with expectations of `h` under a payoff-weighted conjugate
//! measure. This module estimates those conjugate expectations from a pilot
//! sample with self-normalized weights and finds the root with a damped
//! Newton iteration.

use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::linalg;
use crate::real::Real;
use crate::stream::RandomStream;

/// An exponential family with a two-block sufficient statistic.
pub trait SufficientFamily<R: Real> {
    type Sample;

    /// Dimension p of the theta block.
    fn dim_theta(&self) -> usize;

    /// Dimension q of the eta block.
    fn dim_eta(&self) -> usize;

    fn h1(&self, x: &Self::Sample) -> Vec<R>;

    fn h2(&self, x: &Self::Sample) -> Vec<R>;

    /// Cumulant `psi(theta, eta) = ln E_P[exp(theta'h1 + eta'h2)]`.
    /// Errors at or beyond the steepness boundary.
    fn psi(&self, theta: &[R], eta: &[R]) -> Result<R>;

    /// Analytic gradient of `psi`, split by block.
    fn grad_psi(&self, theta: &[R], eta: &[R]) -> Result<(Vec<R>, Vec<R>)>;

    /// Strict interior test with the given boundary margin.
    fn in_domain(&self, theta: &[R], eta: &[R], margin: R) -> bool;

    fn sample_base(&self, rng: &mut ChaCha12Rng) -> Self::Sample;

    fn sample_tilted(&self, theta: &[R], eta: &[R], rng: &mut ChaCha12Rng) -> Result<Self::Sample>;

    /// `ln (f / f_{theta,eta})(x) = psi(theta,eta) - theta'h1(x) - eta'h2(x)`.
    /// Exactly zero at the zero tilt.
    fn log_likelihood_ratio(&self, x: &Self::Sample, theta: &[R], eta: &[R]) -> Result<R> {
        if theta.iter().all(|t| t.is_zero()) && eta.iter().all(|e| e.is_zero()) {
            return Ok(R::zero());
        }
        let h1 = self.h1(x);
        let h2 = self.h2(x);
        Ok(self.psi(theta, eta)? - linalg::dot(theta, &h1) - linalg::dot(eta, &h2))
    }
}

/// Self-normalized conjugate-measure weights over a pilot:
/// `ln w_i = 2 ln rho(x_i) - theta'h1(x_i) - eta'h2(x_i)`, shifted so the
/// exponentiated weights sum to one.
#[derive(Debug, Clone)]
pub struct ConjugateWeights<R: Real> {
    /// Normalized log-weights of the retained (positive-payoff) rows.
    pub log_weights: Vec<R>,
    /// `ln` of the mean unnormalized weight over the whole pilot; this is the
    /// Monte Carlo estimate of the conjugate-measure cumulant.
    pub log_normalizer: R,
}

/// A pilot sample reduced to its sufficient statistics.
///
/// Rows with zero payoff carry zero conjugate weight for every parameter
/// value, so only positive-payoff rows are stored; `total` keeps the original
/// pilot size for the divisor of mean-type estimates.
#[derive(Debug, Clone)]
pub struct PilotSet<R: Real> {
    total: usize,
    p: usize,
    q: usize,
    h1: Vec<R>,
    h2: Vec<R>,
    log_payoff: Vec<R>,
}

impl<R: Real> PilotSet<R> {
    /// Build from samples, keeping rows with `payoff > 0`.
    /// Errors with [`Error::DegeneratePilot`] when no such row exists.
    pub fn from_samples<F: SufficientFamily<R>>(
        family: &F,
        samples: &[F::Sample],
        payoff: impl Fn(&F::Sample) -> R,
    ) -> Result<Self> {
        let p = family.dim_theta();
        let q = family.dim_eta();
        let mut h1 = Vec::new();
        let mut h2 = Vec::new();
        let mut log_payoff = Vec::new();
        for x in samples {
            let rho = payoff(x);
            if !(rho >= R::zero()) {
                return Err(Error::invalid(format!("payoff must be >= 0, got {rho}")));
            }
            if rho > R::zero() {
                h1.extend(family.h1(x));
                h2.extend(family.h2(x));
                log_payoff.push(rho.ln());
            }
        }
        if log_payoff.is_empty() {
            return Err(Error::DegeneratePilot);
        }
        Ok(Self {
            total: samples.len(),
            p,
            q,
            h1,
            h2,
            log_payoff,
        })
    }

    /// Assemble from explicit statistic rows (tests, hand examples).
    pub fn from_parts(
        total: usize,
        p: usize,
        q: usize,
        h1: Vec<R>,
        h2: Vec<R>,
        log_payoff: Vec<R>,
    ) -> Result<Self> {
        if log_payoff.is_empty() {
            return Err(Error::DegeneratePilot);
        }
        if h1.len() != log_payoff.len() * p || h2.len() != log_payoff.len() * q {
            return Err(Error::invalid("statistic row lengths are inconsistent"));
        }
        Ok(Self {
            total,
            p,
            q,
            h1,
            h2,
            log_payoff,
        })
    }

    pub fn rows(&self) -> usize {
        self.log_payoff.len()
    }

    pub fn total(&self) -> usize {
        self.total
    }

    fn tilt_exponent(&self, row: usize, theta: &[R], eta: &[R]) -> R {
        let mut acc = R::zero();
        for (j, t) in theta.iter().enumerate() {
            acc += *t * self.h1[row * self.p + j];
        }
        for (j, e) in eta.iter().enumerate() {
            acc += *e * self.h2[row * self.q + j];
        }
        acc
    }

    /// Conjugate weights at `(theta, eta)`, guarded by log-sum-exp.
    pub fn conjugate_weights(&self, theta: &[R], eta: &[R]) -> ConjugateWeights<R> {
        let mut logw: Vec<R> = (0..self.rows())
            .map(|i| {
                let two = R::lit(2.0);
                two * self.log_payoff[i] - self.tilt_exponent(i, theta, eta)
            })
            .collect();
        let max = logw
            .iter()
            .copied()
            .fold(R::neg_infinity(), |a, b| a.max(b));
        let mut sum = R::zero();
        for lw in &logw {
            sum += (*lw - max).exp();
        }
        let lse = max + sum.ln();
        for lw in logw.iter_mut() {
            *lw = *lw - lse;
        }
        ConjugateWeights {
            log_weights: logw,
            log_normalizer: lse - R::lit(self.total as f64).ln(),
        }
    }

    /// Self-normalized conjugate expectations of `(h1, h2)`.
    pub fn conjugate_expectation(&self, theta: &[R], eta: &[R]) -> (Vec<R>, Vec<R>) {
        let w = self.conjugate_weights(theta, eta);
        let mut e1 = vec![R::zero(); self.p];
        let mut e2 = vec![R::zero(); self.q];
        for (i, lw) in w.log_weights.iter().enumerate() {
            let wi = lw.exp();
            for j in 0..self.p {
                e1[j] += wi * self.h1[i * self.p + j];
            }
            for j in 0..self.q {
                e2[j] += wi * self.h2[i * self.q + j];
            }
        }
        (e1, e2)
    }

    /// Monte Carlo estimate of the convex objective
    /// `G(theta,eta) = E_P[rho^2 exp(-theta'h1 - eta'h2 + psi)]`
    /// on this pilot (common random numbers across parameter values).
    pub fn objective_g<F: SufficientFamily<R>>(
        &self,
        family: &F,
        theta: &[R],
        eta: &[R],
    ) -> Result<R> {
        let psi = family.psi(theta, eta)?;
        let w = self.conjugate_weights(theta, eta);
        Ok((psi + w.log_normalizer).exp())
    }

    /// First-order-condition residual
    /// `[grad_theta psi - E_Qbar h1, grad_eta psi - E_Qbar h2]`.
    pub fn foc_residual<F: SufficientFamily<R>>(
        &self,
        family: &F,
        theta: &[R],
        eta: &[R],
    ) -> Result<Vec<R>> {
        let (g1, g2) = family.grad_psi(theta, eta)?;
        let (e1, e2) = self.conjugate_expectation(theta, eta);
        let mut out = Vec::with_capacity(self.p + self.q);
        for (a, b) in g1.iter().zip(&e1) {
            out.push(*a - *b);
        }
        for (a, b) in g2.iter().zip(&e2) {
            out.push(*a - *b);
        }
        Ok(out)
    }
}

/// Optimal tilting parameters plus solver diagnostics. `final_residual` is
/// the sum of squared residuals `g'g`; `converged` implies it is below the
/// configured precision.
#[derive(Debug, Clone)]
pub struct TiltSolution<R: Real> {
    pub theta: Vec<R>,
    pub eta: Vec<R>,
    pub iterations: usize,
    pub final_residual: R,
    pub converged: bool,
}

/// Knobs for the damped Newton iteration.
#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions<R: Real> {
    /// Convergence threshold on `g'g`.
    pub eps: R,
    pub max_iter: usize,
    /// Margin kept between iterates and the domain boundary.
    pub domain_margin: R,
}

impl<R: Real> Default for NewtonOptions<R> {
    fn default() -> Self {
        Self {
            eps: R::lit(1e-4),
            max_iter: 20,
            domain_margin: R::lit(1e-6),
        }
    }
}

/// Central finite-difference Jacobian with per-coordinate steps
/// `h_i = max(1e-4, 1e-3 |delta_i|)`, shrinking a step when the probe would
/// leave the feasible set. Residual evaluations reuse whatever fixed pilot
/// the closure holds, so the quotients see common random numbers.
pub fn fd_jacobian<R: Real>(
    g: &mut dyn FnMut(&[R]) -> Result<Vec<R>>,
    delta: &[R],
    dim_out: usize,
    in_domain: &dyn Fn(&[R]) -> bool,
) -> Result<Vec<R>> {
    let n = delta.len();
    let mut jac = vec![R::zero(); dim_out * n];
    let mut probe = delta.to_vec();
    for j in 0..n {
        let mut h = R::lit(1e-4).max(R::lit(1e-3) * delta[j].abs());
        let mut shrink = 0;
        loop {
            probe[j] = delta[j] + h;
            let up_ok = in_domain(&probe);
            probe[j] = delta[j] - h;
            let dn_ok = in_domain(&probe);
            if up_ok && dn_ok {
                break;
            }
            h = h * R::lit(0.5);
            shrink += 1;
            if shrink > 60 {
                probe[j] = delta[j];
                return Err(Error::domain(format!(
                    "cannot form a difference quotient inside the domain (coordinate {j})"
                )));
            }
        }
        probe[j] = delta[j] + h;
        let up = g(&probe)?;
        probe[j] = delta[j] - h;
        let dn = g(&probe)?;
        probe[j] = delta[j];
        let scale = (h + h).recip();
        for i in 0..dim_out {
            jac[i * n + j] = (up[i] - dn[i]) * scale;
        }
    }
    Ok(jac)
}

/// One damped step from `delta` along `dir`, halving until the iterate stays
/// strictly inside the domain and `g'g` decreases. Returns the accepted point
/// and residual, or `None` if no step length was acceptable.
pub(crate) fn damped_step<R: Real>(
    g: &mut dyn FnMut(&[R]) -> Result<Vec<R>>,
    delta: &[R],
    dir: &[R],
    r0: R,
    in_domain: &dyn Fn(&[R]) -> bool,
) -> Result<Option<(Vec<R>, Vec<R>, R)>> {
    let mut alpha = R::one();
    for _ in 0..40 {
        let cand: Vec<R> = delta
            .iter()
            .zip(dir)
            .map(|(d, s)| *d - alpha * *s)
            .collect();
        if in_domain(&cand) {
            let gc = g(&cand)?;
            let rc = linalg::dot(&gc, &gc);
            if rc.is_finite() && rc < r0 {
                return Ok(Some((cand, gc, rc)));
            }
        }
        alpha = alpha * R::lit(0.5);
    }
    Ok(None)
}

/// Damped Newton on the residual `g`, with a gradient-descent fallback on
/// `g'g` when the Jacobian is singular. Never returns parameters outside the
/// domain: on a stall or an exhausted iteration budget the last in-domain
/// iterate comes back flagged `converged = false`.
pub fn newton_solve<R: Real>(
    g: &mut dyn FnMut(&[R]) -> Result<Vec<R>>,
    delta0: &[R],
    split_p: usize,
    in_domain: &dyn Fn(&[R]) -> bool,
    opts: &NewtonOptions<R>,
) -> Result<TiltSolution<R>> {
    if !in_domain(delta0) {
        return Err(Error::domain(
            "initial parameters are outside the tilting domain",
        ));
    }
    let n = delta0.len();
    let mut delta = delta0.to_vec();
    let mut gv = g(&delta)?;
    let mut resid = linalg::dot(&gv, &gv);
    let mut iterations = 0usize;
    while resid >= opts.eps && iterations < opts.max_iter {
        let jac = fd_jacobian(g, &delta, n, in_domain)?;
        let newton_dir = linalg::lu_solve(&jac, &gv, n).ok();
        let step = match &newton_dir {
            Some(dir) => damped_step(g, &delta, dir, resid, in_domain)?,
            None => None,
        };
        let step = match step {
            Some(s) => Some(s),
            None => {
                // Gradient of 0.5 g'g is J' g.
                let mut grad = vec![R::zero(); n];
                for j in 0..n {
                    let mut acc = R::zero();
                    for i in 0..n {
                        acc += jac[i * n + j] * gv[i];
                    }
                    grad[j] = acc;
                }
                damped_step(g, &delta, &grad, resid, in_domain)?
            }
        };
        match step {
            Some((d, gnew, rnew)) => {
                delta = d;
                gv = gnew;
                resid = rnew;
                iterations += 1;
            }
            None => break,
        }
    }
    let converged = resid < opts.eps;
    let (theta, eta) = delta.split_at(split_p);
    Ok(TiltSolution {
        theta: theta.to_vec(),
        eta: eta.to_vec(),
        iterations,
        final_residual: resid,
        converged,
    })
}

/// Which tilting coordinates a solve touches; the rest stay at zero.
#[derive(Debug, Clone, Default)]
pub struct ActiveSet {
    pub theta: Vec<usize>,
    pub eta: Vec<usize>,
}

impl ActiveSet {
    pub fn full(p: usize, q: usize) -> Self {
        Self {
            theta: (0..p).collect(),
            eta: (0..q).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.theta.len() + self.eta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn expand<R: Real>(&self, packed: &[R], p: usize, q: usize) -> (Vec<R>, Vec<R>) {
        let mut theta = vec![R::zero(); p];
        let mut eta = vec![R::zero(); q];
        for (slot, idx) in self.theta.iter().enumerate() {
            theta[*idx] = packed[slot];
        }
        for (slot, idx) in self.eta.iter().enumerate() {
            eta[*idx] = packed[self.theta.len() + slot];
        }
        (theta, eta)
    }

    pub fn select<R: Real>(&self, full: &[R], p: usize) -> Vec<R> {
        let mut out = Vec::with_capacity(self.len());
        for idx in &self.theta {
            out.push(full[*idx]);
        }
        for idx in &self.eta {
            out.push(full[p + *idx]);
        }
        out
    }
}

/// Solve the first-order conditions of `G` over the active coordinates,
/// starting from the zero tilt.
pub fn solve_family_tilt<R: Real, F: SufficientFamily<R>>(
    family: &F,
    pilot: &PilotSet<R>,
    active: &ActiveSet,
    opts: &NewtonOptions<R>,
) -> Result<TiltSolution<R>> {
    if active.is_empty() {
        return Err(Error::invalid("no tilting coordinates selected"));
    }
    let p = family.dim_theta();
    let q = family.dim_eta();
    let margin = opts.domain_margin;
    let mut g = |packed: &[R]| -> Result<Vec<R>> {
        let (theta, eta) = active.expand(packed, p, q);
        let full = pilot.foc_residual(family, &theta, &eta)?;
        Ok(active.select(&full, p))
    };
    let domain = |packed: &[R]| -> bool {
        let (theta, eta) = active.expand(packed, p, q);
        family.in_domain(&theta, &eta, margin)
    };
    let packed0 = vec![R::zero(); active.len()];
    let sol = newton_solve(&mut g, &packed0, active.theta.len(), &domain, opts)?;
    // Re-expand so the returned theta/eta have family dimensions.
    let mut packed = sol.theta.clone();
    packed.extend_from_slice(&sol.eta);
    let (theta, eta) = active.expand(&packed, p, q);
    Ok(TiltSolution {
        theta,
        eta,
        iterations: sol.iterations,
        final_residual: sol.final_residual,
        converged: sol.converged,
    })
}

/// Draw a pilot of base samples, one substream per index, offset from the
/// given stream's own id (so pilots and estimation runs can share a seed
/// without sharing streams).
pub fn draw_pilot<R: Real, F: SufficientFamily<R>>(
    family: &F,
    size: usize,
    stream: RandomStream,
) -> Vec<F::Sample> {
    let base = stream.stream_id();
    (0..size)
        .map(|i| {
            let mut rng = stream.substream(base + i as u64).rng();
            family.sample_base(&mut rng)
        })
        .collect()
}

/// Importance-sampling estimate of `E_P[payoff(X)]` drawn under the tilted
/// law; returns the sample mean and the per-sample variance of the summand
/// `payoff(x) * exp(psi - theta'h1 - eta'h2)`. A zero tilt reproduces the
/// crude estimator with a likelihood ratio of exactly one.
pub fn is_estimate<R: Real, F: SufficientFamily<R>>(
    family: &F,
    theta: &[R],
    eta: &[R],
    payoff: impl Fn(&F::Sample) -> R,
    samples: usize,
    stream: RandomStream,
) -> Result<(R, R)> {
    let mut sum = R::zero();
    let mut sumsq = R::zero();
    let base = stream.stream_id();
    for i in 0..samples {
        let mut rng = stream.substream(base + i as u64).rng();
        let x = family.sample_tilted(theta, eta, &mut rng)?;
        let lr = family.log_likelihood_ratio(&x, theta, eta)?;
        let rho = payoff(&x);
        let y = if rho.is_zero() {
            R::zero()
        } else {
            rho * lr.exp()
        };
        if !y.is_finite() {
            return Err(Error::numerical(format!(
                "non-finite importance-sampling summand at sample {i}"
            )));
        }
        sum += y;
        sumsq += y * y;
    }
    let nf = R::lit(samples as f64);
    let mean = sum / nf;
    let var = (sumsq - sum * sum / nf) / (nf - R::one());
    Ok((mean, var.max(R::zero())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::normal::StdNormalFamily;

    #[test]
    fn conjugate_expectation_hand_example() {
        // Pilot {1,2,3} with payoffs {1,2,3}: weighted mean of x under
        // rho^2-weights is (1*1 + 2*4 + 3*9) / 14 = 36/14.
        let pilot = PilotSet::from_parts(
            3,
            1,
            1,
            vec![1.0f64, 2.0, 3.0],
            vec![1.0, 4.0, 9.0],
            vec![1.0f64.ln(), 2.0f64.ln(), 3.0f64.ln()],
        )
        .unwrap();
        let (e1, _) = pilot.conjugate_expectation(&[0.0], &[0.0]);
        assert!((e1[0] - 36.0 / 14.0).abs() < 1e-14);
    }

    #[test]
    fn single_positive_atom_carries_all_weight() {
        let pilot = PilotSet::from_parts(
            2,
            1,
            1,
            vec![0.0f64],
            vec![0.0],
            vec![0.0f64], // one retained row: x = 0, payoff 1
        )
        .unwrap();
        for &(t, e) in &[(0.0f64, 0.0f64), (0.7, -0.3), (-2.0, 0.1)] {
            let (e1, _) = pilot.conjugate_expectation(&[t], &[e]);
            assert_eq!(e1[0], 0.0);
        }
    }

    #[test]
    fn all_zero_payoffs_is_degenerate() {
        let fam = StdNormalFamily;
        let samples = vec![0.5f64, -1.0, 2.0];
        let err = PilotSet::from_samples(&fam, &samples, |_| 0.0f64).unwrap_err();
        assert!(matches!(err, Error::DegeneratePilot));
    }

    #[test]
    fn weights_normalize_to_one() {
        let fam = StdNormalFamily;
        let samples: Vec<f64> = draw_pilot(&fam, 500, RandomStream::with_stream(2, 0));
        let pilot = PilotSet::from_samples(&fam, &samples, |x| x.abs()).unwrap();
        let w = pilot.conjugate_weights(&[0.4], &[-0.2]);
        let total: f64 = w.log_weights.iter().map(|lw| lw.exp()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn objective_g_at_zero_tilt_is_mean_square_payoff() {
        let fam = StdNormalFamily;
        let samples: Vec<f64> = draw_pilot(&fam, 2000, RandomStream::with_stream(3, 0));
        let pilot =
            PilotSet::from_samples(&fam, &samples, |x| if *x > 1.0 { 1.0 } else { 0.0 }).unwrap();
        let g0 = pilot.objective_g(&fam, &[0.0], &[0.0]).unwrap();
        let direct = samples.iter().filter(|x| **x > 1.0).count() as f64 / samples.len() as f64;
        assert!((g0 - direct).abs() < 1e-12);
    }

    #[test]
    fn foc_residual_vanishes_for_constant_payoff_at_zero() {
        let fam = StdNormalFamily;
        let b = 100_000usize;
        let samples: Vec<f64> = draw_pilot(&fam, b, RandomStream::with_stream(4, 0));
        let pilot = PilotSet::from_samples(&fam, &samples, |_| 1.0f64).unwrap();
        let r = pilot.foc_residual(&fam, &[0.0], &[0.0]).unwrap();
        // P-means of (x, x^2) match grad psi(0,0) = (0, 1); 4 sigma bands
        // with Var(x) = 1 and Var(x^2) = 2.
        let band1 = 4.0 / (b as f64).sqrt();
        let band2 = 4.0 * 2.0f64.sqrt() / (b as f64).sqrt();
        assert!(r[0].abs() < band1, "r0={}", r[0]);
        assert!(r[1].abs() < band2, "r1={}", r[1]);
    }

    #[test]
    fn newton_linear_system_one_iteration() {
        let target = [1.5f64, -0.25];
        let mut g =
            |d: &[f64]| -> Result<Vec<f64>> { Ok(vec![d[0] - target[0], d[1] - target[1]]) };
        let sol = newton_solve(
            &mut g,
            &[0.0, 0.0],
            1,
            &|_: &[f64]| true,
            &NewtonOptions {
                eps: 1e-20,
                max_iter: 10,
                domain_margin: 0.0,
            },
        )
        .unwrap();
        assert!(sol.converged);
        assert_eq!(sol.iterations, 1);
        assert!((sol.theta[0] - target[0]).abs() < 1e-10);
        assert!((sol.eta[0] - target[1]).abs() < 1e-10);
    }

    #[test]
    fn newton_cubic_scalar() {
        let mut evals = 0usize;
        let mut g = |d: &[f64]| -> Result<Vec<f64>> {
            evals += 1;
            Ok(vec![d[0] * d[0] * d[0] - 8.0])
        };
        let sol = newton_solve(
            &mut g,
            &[3.0],
            1,
            &|_: &[f64]| true,
            &NewtonOptions {
                eps: 1e-20,
                max_iter: 12,
                domain_margin: 0.0,
            },
        )
        .unwrap();
        assert!(sol.converged);
        assert!(sol.iterations <= 8, "iterations={}", sol.iterations);
        assert!((sol.theta[0] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn newton_reports_failure_instead_of_bad_parameters() {
        // g has no root; the iteration must stop and flag non-convergence.
        let mut g = |d: &[f64]| -> Result<Vec<f64>> { Ok(vec![d[0] * d[0] + 1.0]) };
        let sol = newton_solve(
            &mut g,
            &[0.5],
            1,
            &|_: &[f64]| true,
            &NewtonOptions {
                eps: 1e-12,
                max_iter: 6,
                domain_margin: 0.0,
            },
        )
        .unwrap();
        assert!(!sol.converged);
        assert!(sol.final_residual >= 1.0);
    }

    #[test]
    fn zero_tilt_likelihood_ratio_is_exactly_one() {
        let fam = StdNormalFamily;
        let x = 1.234567f64;
        let lr = fam.log_likelihood_ratio(&x, &[0.0], &[0.0]).unwrap();
        assert_eq!(lr, 0.0);
        assert_eq!(lr.exp(), 1.0);
    }
}
