//! Sufficient tilting of the gamma distribution with statistic `(ln x, x)`.
//!
//! The tilted law of `Gamma(alpha, beta)` is `Gamma(alpha + theta,
//! beta - eta)` on `theta > -alpha`, `eta < beta`. For threshold payoffs the
//! conjugate measure has density proportional to
//! `x^(alpha - theta - 1) exp(-(beta + eta) x)` restricted to the event, and
//! its conditional mean and log-moment are evaluated by deterministic
//! quadrature, so the fixed points carry no Monte Carlo noise.

use rand_chacha::ChaCha12Rng;

use crate::dist::GammaParams;
use crate::error::{Error, Result};
use crate::real::Real;
use crate::special::{digamma, integrate};
use crate::tilting::{newton_solve, NewtonOptions, SufficientFamily};

/// A gamma base law exposed as a sufficient family.
#[derive(Debug, Clone, Copy)]
pub struct GammaFamily<R: Real> {
    params: GammaParams<R>,
}

/// Tilting parameters of the gamma family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaTilt<R: Real> {
    pub theta: R,
    pub eta: R,
}

/// Threshold events with closed (quadrature) conditional moments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaEvent<R: Real> {
    /// `{X > a}`.
    UpperTail(R),
    /// `{X < c}` (the `1/X > a` events with `c = 1/a`).
    LowerTail(R),
}

/// Which gamma parameters a solve moves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GammaTiltSubset {
    Theta,
    Eta,
    Both,
}

impl<R: Real> GammaFamily<R> {
    pub fn new(params: GammaParams<R>) -> Self {
        Self { params }
    }

    pub fn params(&self) -> &GammaParams<R> {
        &self.params
    }

    pub fn alpha(&self) -> R {
        self.params.shape()
    }

    pub fn beta(&self) -> R {
        self.params.rate()
    }

    /// The tilted sampling law `Gamma(alpha + theta, beta - eta)`.
    pub fn tilted_params(&self, tilt: &GammaTilt<R>) -> Result<GammaParams<R>> {
        GammaParams::new(self.alpha() + tilt.theta, self.beta() - tilt.eta)
            .map_err(|_| Error::domain("tilt outside gamma domain"))
    }

    /// The conjugate law `Gamma(alpha - theta, beta + eta)` where it exists
    /// as an untruncated distribution.
    pub fn conjugate_params(&self, tilt: &GammaTilt<R>) -> Result<GammaParams<R>> {
        GammaParams::new(self.alpha() - tilt.theta, self.beta() + tilt.eta)
            .map_err(|_| Error::domain("conjugate parameters are not a gamma law"))
    }
}

impl<R: Real> SufficientFamily<R> for GammaFamily<R> {
    type Sample = R;

    fn dim_theta(&self) -> usize {
        1
    }

    fn dim_eta(&self) -> usize {
        1
    }

    fn h1(&self, x: &R) -> Vec<R> {
        vec![x.ln()]
    }

    fn h2(&self, x: &R) -> Vec<R> {
        vec![*x]
    }

    fn psi(&self, theta: &[R], eta: &[R]) -> Result<R> {
        let (t, e) = (theta[0], eta[0]);
        let a = self.alpha();
        let b = self.beta();
        let shape = a + t;
        let rate = b - e;
        if !(shape > R::zero() && rate > R::zero()) {
            return Err(Error::domain(format!(
                "psi undefined at theta={t}, eta={e} (requires theta > -alpha, eta < beta)"
            )));
        }
        Ok(shape.ln_gamma_fn() - a.ln_gamma_fn() + a * b.ln() - shape * rate.ln())
    }

    fn grad_psi(&self, theta: &[R], eta: &[R]) -> Result<(Vec<R>, Vec<R>)> {
        let (t, e) = (theta[0], eta[0]);
        let shape = self.alpha() + t;
        let rate = self.beta() - e;
        if !(shape > R::zero() && rate > R::zero()) {
            return Err(Error::domain("grad psi outside gamma tilting domain"));
        }
        Ok((vec![digamma(shape)? - rate.ln()], vec![shape / rate]))
    }

    fn in_domain(&self, theta: &[R], eta: &[R], margin: R) -> bool {
        let shape = self.alpha() + theta[0];
        let rate = self.beta() - eta[0];
        shape.is_finite() && rate.is_finite() && shape > margin && rate > margin
    }

    fn sample_base(&self, rng: &mut ChaCha12Rng) -> R {
        R::gamma_draw(rng, self.alpha(), self.beta())
    }

    fn sample_tilted(&self, theta: &[R], eta: &[R], rng: &mut ChaCha12Rng) -> Result<R> {
        let shape = self.alpha() + theta[0];
        let rate = self.beta() - eta[0];
        if !(shape > R::zero() && rate > R::zero()) {
            return Err(Error::domain("tilted gamma parameters invalid"));
        }
        Ok(R::gamma_draw(rng, shape, rate))
    }
}

/// `(E[X | event], E[ln X | event], ln integral)` for the possibly-improper
/// gamma kernel `x^(shape-1) exp(-rate x)` restricted to the event. `shape`
/// may be non-positive for upper tails (the truncation keeps the kernel
/// integrable); `rate` must be positive for upper tails.
fn conditional_kernel_moments<R: Real>(
    shape: R,
    rate: R,
    event: GammaEvent<R>,
) -> Result<(R, R, R)> {
    // Work on a bounded interval: for upper tails substitute t = rate * x so
    // the decay length is O(1) regardless of how small the rate gets during
    // a Newton probe; lower tails are bounded by construction.
    let (lo, hi, scale) = match event {
        GammaEvent::UpperTail(a) => {
            if !(a > R::zero()) {
                return Err(Error::invalid("upper-tail threshold must be positive"));
            }
            if !(rate > R::zero()) {
                return Err(Error::domain("upper-tail kernel needs positive rate"));
            }
            let ta = rate * a;
            let mode = if shape > R::one() {
                (shape - R::one()).max(ta)
            } else {
                ta
            };
            let spread = R::lit(80.0) + R::lit(20.0) * (shape.abs() + R::one()).sqrt();
            (ta, mode + spread, rate)
        }
        GammaEvent::LowerTail(c) => {
            if !(c > R::zero()) {
                return Err(Error::invalid("lower-tail threshold must be positive"));
            }
            if !(shape > R::zero()) {
                return Err(Error::domain("lower-tail kernel needs positive shape"));
            }
            // Unit-rate substitution only makes sense for positive rates;
            // on a bounded interval the raw kernel is already tame.
            (c * R::lit(1e-14), c, R::one())
        }
    };
    // In the scaled variable t the kernel is t^(shape-1) e^(-t) for upper
    // tails; the lower-tail branch keeps the raw (shape, rate) kernel.
    let eff_rate = match event {
        GammaEvent::UpperTail(_) => R::one(),
        GammaEvent::LowerTail(_) => rate,
    };
    let ln_kernel = move |t: R| (shape - R::one()) * t.ln() - eff_rate * t;
    let mut k_ref = ln_kernel(lo).max(ln_kernel(hi));
    if shape > R::one() && eff_rate > R::zero() {
        let mode = (shape - R::one()) / eff_rate;
        if mode > lo && mode < hi {
            k_ref = k_ref.max(ln_kernel(mode));
        }
    }
    let dens = move |t: R| (ln_kernel(t) - k_ref).exp();
    let tol = R::lit(1e-13);
    let z = integrate(&dens, lo, hi, tol);
    if !(z > R::zero()) || !z.is_finite() {
        return Err(Error::numerical(
            "conditional gamma kernel has vanishing mass on the event",
        ));
    }
    let m1 = integrate(&|t: R| t * dens(t), lo, hi, tol) / z / scale;
    let mlog = integrate(&|t: R| t.ln() * dens(t), lo, hi, tol) / z - scale.ln();
    // ln of the unnormalized kernel mass in the original variable:
    // the t = rate x substitution contributes a -shape ln(rate) Jacobian.
    let ln_mass = z.ln() + k_ref - shape * scale.ln();
    Ok((m1, mlog, ln_mass))
}

/// Exact `ln` of the estimator's second moment
/// `G = E_P[1{event} exp(-theta ln x - eta x + psi)]` for a threshold event,
/// by deterministic quadrature of the conjugate kernel.
pub fn ln_second_moment_threshold<R: Real>(
    family: &GammaFamily<R>,
    event: GammaEvent<R>,
    theta: R,
    eta: R,
) -> Result<R> {
    let alpha = family.alpha();
    let beta = family.beta();
    let psi = family.psi(&[theta], &[eta])?;
    let (_, _, ln_mass) = conditional_kernel_moments(alpha - theta, beta + eta, event)?;
    Ok(alpha * beta.ln() - alpha.ln_gamma_fn() + ln_mass + psi)
}

/// Root of the digamma/mean system for a threshold event, using conjugate
/// conditional moments (no sampling). Inactive coordinates stay at zero.
pub fn gamma_tilt_equations<R: Real>(
    family: &GammaFamily<R>,
    event: GammaEvent<R>,
    subset: GammaTiltSubset,
) -> Result<GammaTilt<R>> {
    let alpha = family.alpha();
    let beta = family.beta();
    let margin = R::lit(1e-6);
    let unpack = |packed: &[R]| -> GammaTilt<R> {
        match subset {
            GammaTiltSubset::Theta => GammaTilt {
                theta: packed[0],
                eta: R::zero(),
            },
            GammaTiltSubset::Eta => GammaTilt {
                theta: R::zero(),
                eta: packed[0],
            },
            GammaTiltSubset::Both => GammaTilt {
                theta: packed[0],
                eta: packed[1],
            },
        }
    };
    let mut g = |packed: &[R]| -> Result<Vec<R>> {
        let tilt = unpack(packed);
        let shape_c = alpha - tilt.theta;
        let rate_c = beta + tilt.eta;
        let (m1, mlog, _) = conditional_kernel_moments(shape_c, rate_c, event)?;
        let r_theta = digamma(alpha + tilt.theta)? - (beta - tilt.eta).ln() - mlog;
        let r_eta = (alpha + tilt.theta) / (beta - tilt.eta) - m1;
        Ok(match subset {
            GammaTiltSubset::Theta => vec![r_theta],
            GammaTiltSubset::Eta => vec![r_eta],
            GammaTiltSubset::Both => vec![r_theta, r_eta],
        })
    };
    // Domain of the second moment: the tilted law must exist, and the
    // conjugate kernel must stay integrable on the event.
    let theta_bounds: (R, R) = match event {
        GammaEvent::UpperTail(_) => (-alpha + margin, R::lit(300.0)),
        GammaEvent::LowerTail(_) => (-alpha + margin, alpha - margin),
    };
    let eta_bounds: (R, R) = match event {
        GammaEvent::UpperTail(_) => (-beta + margin, beta - margin),
        GammaEvent::LowerTail(_) => (-R::lit(300.0), beta - margin),
    };
    let domain = move |packed: &[R]| -> bool {
        let tilt = unpack(packed);
        tilt.theta > theta_bounds.0
            && tilt.theta < theta_bounds.1
            && tilt.eta > eta_bounds.0
            && tilt.eta < eta_bounds.1
    };
    let dim = match subset {
        GammaTiltSubset::Both => 2,
        _ => 1,
    };
    let start = vec![R::zero(); dim];
    let opts = NewtonOptions {
        eps: R::lit(1e-12),
        max_iter: 100,
        domain_margin: margin,
    };
    let split = match subset {
        GammaTiltSubset::Eta => 0,
        GammaTiltSubset::Theta => 1,
        GammaTiltSubset::Both => 1,
    };
    let sol = newton_solve(&mut g, &start, split, &domain, &opts)?;
    if sol.converged {
        let mut packed = sol.theta.clone();
        packed.extend_from_slice(&sol.eta);
        return Ok(unpack(&packed));
    }
    // No interior first-order root (the conjugate-integrability constraint
    // binds for extreme events): minimize the exact second moment directly.
    // It is convex in the natural parameters, so alternating golden-section
    // line searches converge; seed them with the Newton iterate.
    let mut theta = sol.theta.first().copied().unwrap_or(R::zero());
    let mut eta = sol.eta.first().copied().unwrap_or(R::zero());
    if matches!(subset, GammaTiltSubset::Eta) {
        eta = theta;
        theta = R::zero();
    }
    let search = |fixed: R, other_is_theta: bool| -> Result<R> {
        let mut obj = |v: R| -> Result<R> {
            let (t, e) = if other_is_theta {
                (v, fixed)
            } else {
                (fixed, v)
            };
            ln_second_moment_threshold(family, event, t, e)
        };
        let (lo, hi) = if other_is_theta {
            theta_bounds
        } else {
            eta_bounds
        };
        golden_min(&mut obj, lo, hi)
    };
    let rounds = match subset {
        GammaTiltSubset::Both => 60,
        _ => 1,
    };
    for _ in 0..rounds {
        let (t_prev, e_prev) = (theta, eta);
        if !matches!(subset, GammaTiltSubset::Eta) {
            theta = search(eta, true)?;
        }
        if !matches!(subset, GammaTiltSubset::Theta) {
            eta = search(theta, false)?;
        }
        if (theta - t_prev).abs() + (eta - e_prev).abs() < R::lit(1e-11) {
            break;
        }
    }
    Ok(GammaTilt { theta, eta })
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
    for _ in 0..140 {
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
        if (b - a).abs() < R::lit(1e-11) * (R::one() + a.abs()) {
            break;
        }
    }
    Ok((a + b) * R::lit(0.5))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::regularized_upper_gamma;
    use crate::stream::RandomStream;
    use crate::tilting::{is_estimate, ActiveSet, PilotSet};

    fn table_family() -> GammaFamily<f64> {
        GammaFamily::new(GammaParams::new(4.0, 0.5).unwrap())
    }

    #[test]
    fn psi_grad_matches_finite_differences() {
        let fam = table_family();
        let h = 1e-6;
        for &(t, e) in &[(0.0f64, 0.0f64), (1.5, 0.2), (-2.0, -0.7), (8.0, 0.4)] {
            let (g1, g2) = fam.grad_psi(&[t], &[e]).unwrap();
            let dt =
                (fam.psi(&[t + h], &[e]).unwrap() - fam.psi(&[t - h], &[e]).unwrap()) / (2.0 * h);
            let de =
                (fam.psi(&[t], &[e + h]).unwrap() - fam.psi(&[t], &[e - h]).unwrap()) / (2.0 * h);
            assert!((g1[0] - dt).abs() <= 1e-6 * (1.0 + dt.abs()), "t={t} e={e}");
            assert!((g2[0] - de).abs() <= 1e-6 * (1.0 + de.abs()), "t={t} e={e}");
        }
    }

    #[test]
    fn conjugate_law_mean_identity() {
        let fam = table_family();
        let tilt = GammaTilt {
            theta: 1.0,
            eta: 0.1,
        };
        let conj = fam.conjugate_params(&tilt).unwrap();
        let analytic = (4.0 - 1.0) / (0.5 + 0.1);
        assert!((conj.mean() - analytic).abs() < 1e-14);
        let mut rng = RandomStream::with_stream(21, 0).rng();
        let n = 200_000usize;
        let mut sum = 0.0f64;
        for _ in 0..n {
            sum += crate::dist::sample_gamma(&conj, &mut rng);
        }
        let mean = sum / n as f64;
        let se = conj.variance().sqrt() / (n as f64).sqrt();
        assert!((mean - analytic).abs() < 4.0 * se);
    }

    #[test]
    fn conditional_moments_against_closed_mean() {
        // For positive shape the conditional mean has the incomplete-gamma
        // ratio form; the quadrature must agree.
        let (shape, rate, a) = (3.2f64, 0.7, 6.0);
        let (m1, _, _) = conditional_kernel_moments(shape, rate, GammaEvent::UpperTail(a)).unwrap();
        let q1 = regularized_upper_gamma(shape + 1.0, rate, a).unwrap();
        let q0 = regularized_upper_gamma(shape, rate, a).unwrap();
        let closed = shape / rate * q1 / q0;
        assert!(
            (m1 - closed).abs() < 1e-9 * closed,
            "m1={m1} closed={closed}"
        );
    }

    #[test]
    fn upper_tail_solutions_solve_their_equations() {
        let fam = table_family();
        for &a in &[10.0f64, 20.0, 30.0] {
            for subset in [
                GammaTiltSubset::Theta,
                GammaTiltSubset::Eta,
                GammaTiltSubset::Both,
            ] {
                let tilt = gamma_tilt_equations(&fam, GammaEvent::UpperTail(a), subset).unwrap();
                // The tilted mean should sit near or beyond the threshold.
                let tp = fam.tilted_params(&tilt).unwrap();
                assert!(
                    tp.mean() > 0.6 * a,
                    "a={a} subset={subset:?} mean={}",
                    tp.mean()
                );
                match subset {
                    GammaTiltSubset::Theta => assert!(tilt.theta > 0.0 && tilt.eta == 0.0),
                    GammaTiltSubset::Eta => {
                        assert!(tilt.eta > 0.0 && tilt.eta < 0.5 && tilt.theta == 0.0)
                    }
                    GammaTiltSubset::Both => {}
                }
            }
        }
    }

    #[test]
    fn upper_tail_is_estimates_match_gamma_tail() {
        let fam = table_family();
        let b = 20_000usize;
        for &a in &[10.0f64, 20.0] {
            let truth = regularized_upper_gamma(4.0, 0.5, a).unwrap();
            for subset in [GammaTiltSubset::Theta, GammaTiltSubset::Both] {
                let tilt = gamma_tilt_equations(&fam, GammaEvent::UpperTail(a), subset).unwrap();
                let payoff = move |x: &f64| if *x > a { 1.0 } else { 0.0 };
                let (est, var) = is_estimate(
                    &fam,
                    &[tilt.theta],
                    &[tilt.eta],
                    payoff,
                    b,
                    RandomStream::with_stream(22, 0),
                )
                .unwrap();
                let se = (var / b as f64).sqrt();
                assert!(
                    (est - truth).abs() < 3.0 * se,
                    "a={a} subset={subset:?} est={est:e} truth={truth:e}"
                );
                assert!(var < truth * (1.0 - truth), "no variance reduction");
            }
        }
    }

    #[test]
    fn lower_tail_prefers_eta() {
        // For {1/X > a} the eta direction has the open search space.
        let fam = table_family();
        let c = 2.0f64; // a = 0.5 in the reciprocal event
        let t_eta =
            gamma_tilt_equations(&fam, GammaEvent::LowerTail(c), GammaTiltSubset::Eta).unwrap();
        assert!(t_eta.eta < 0.0, "eta should push the mean down");
        let t_theta =
            gamma_tilt_equations(&fam, GammaEvent::LowerTail(c), GammaTiltSubset::Theta).unwrap();
        assert!(t_theta.theta < 0.0 && t_theta.theta > -4.0);
    }

    #[test]
    fn constant_payoff_keeps_zero_tilt() {
        let fam = table_family();
        let samples: Vec<f64> =
            crate::tilting::draw_pilot(&fam, 20_000, RandomStream::with_stream(23, 0));
        let pilot = PilotSet::from_samples(&fam, &samples, |_| 1.0f64).unwrap();
        let sol = crate::tilting::solve_family_tilt(
            &fam,
            &pilot,
            &ActiveSet::full(1, 1),
            &NewtonOptions::default(),
        )
        .unwrap();
        assert!(sol.converged);
        // MC noise at B = 2e4 keeps the root within a few percent of zero.
        assert!(sol.theta[0].abs() < 0.1, "theta={}", sol.theta[0]);
        assert!(sol.eta[0].abs() < 0.05, "eta={}", sol.eta[0]);
    }
}
