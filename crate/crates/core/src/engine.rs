//! Two-phase importance-sampling estimator of `P(L_n > tau)`.
//!
//! Phase one draws a pilot under the base measure, evaluates the conditional
//! tail `rho(z, w)` by Fourier inversion for every draw, and locates the
//! tilting parameters with a componentwise (Gauss-Seidel) damped Newton
//! iteration on the conjugate-measure first-order conditions. Phase two
//! redraws under the tilted laws printed by the search -- `N(mu, Sigma)` for
//! the factors and `Gamma(shape_j - theta_j, rate_j + eta_j)` for the
//! gamma-space shocks -- and averages `rho * r1 * r2` with the matching
//! likelihood ratios.
//!
//! Every sample owns the substream named by its index, and reductions run in
//! fixed-size ordered chunks, so results are bitwise identical for any
//! worker count.

use std::time::Instant;

use num_complex::Complex;
use rayon::prelude::*;

use crate::dist::{ln_gamma_pdf_unchecked, log_pdf_mvn, GammaParams, MvnParams};
use crate::error::{Error, Result};
use crate::linalg;
use crate::lossdist::{char_function_grouped, invert_with_lattice, LossLattice};
use crate::portfolio::{
    sample_factors, tau_from_fraction, FactorSample, PortfolioModel, ShockSpec,
};
use crate::real::Real;
use crate::special::digamma;
use crate::stream::RandomStream;
use crate::tilting::{damped_step, fd_jacobian, TiltSolution};

/// Substream index spaces; phases never share a stream.
const PILOT_BASE: u64 = 1 << 40;
const ESTIMATE_BASE: u64 = 2 << 40;
const CRUDE_BASE: u64 = 3 << 40;

/// Ordered reduction chunk; fixed so the summation order never depends on
/// the thread count.
const CHUNK: usize = 1024;

/// Which tilt blocks the search moves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TiltMask {
    pub mu: bool,
    pub sigma: bool,
    pub theta: bool,
    pub eta: bool,
}

impl TiltMask {
    pub const NONE: TiltMask = TiltMask {
        mu: false,
        sigma: false,
        theta: false,
        eta: false,
    };
    pub const MU_ETA: TiltMask = TiltMask {
        mu: true,
        sigma: false,
        theta: false,
        eta: true,
    };
    pub const MU_THETA: TiltMask = TiltMask {
        mu: true,
        sigma: false,
        theta: true,
        eta: false,
    };
    pub const MU_THETA_ETA: TiltMask = TiltMask {
        mu: true,
        sigma: false,
        theta: true,
        eta: true,
    };

    pub fn any(&self) -> bool {
        self.mu || self.sigma || self.theta || self.eta
    }
}

/// Tilted sampling laws for phase two. The gamma-space component `j` is
/// drawn from `Gamma(shape_j - theta_j, rate_j + eta_j)`; the factors from
/// `N(mu, Sigma)` (with `Sigma` the model covariance unless a covariance
/// tilt is supplied explicitly).
#[derive(Debug, Clone)]
pub struct EngineTilt<R: Real> {
    pub mu: Vec<R>,
    pub sigma_tilt: Option<MvnParams<R>>,
    pub theta: Vec<R>,
    pub eta: Vec<R>,
    pub mask: TiltMask,
}

impl<R: Real> EngineTilt<R> {
    pub fn zero(model: &PortfolioModel<R>, shock: &ShockSpec<R>) -> Self {
        let m = shock.gamma_components().len();
        Self {
            mu: vec![R::zero(); model.n_factors()],
            sigma_tilt: None,
            theta: vec![R::zero(); m],
            eta: vec![R::zero(); m],
            mask: TiltMask::NONE,
        }
    }

    /// Strict-domain check against the base gamma components.
    pub fn validate(&self, d: usize, gammas: &[GammaParams<R>]) -> Result<()> {
        if self.mu.len() != d {
            return Err(Error::invalid("tilt mean dimension mismatch"));
        }
        if self.theta.len() != gammas.len() || self.eta.len() != gammas.len() {
            return Err(Error::invalid("tilt shock dimension mismatch"));
        }
        if let Some(s) = &self.sigma_tilt {
            if s.dim() != d {
                return Err(Error::invalid("covariance tilt dimension mismatch"));
            }
        }
        for v in self.mu.iter().chain(&self.theta).chain(&self.eta) {
            if !v.is_finite() {
                return Err(Error::invalid("tilt parameters must be finite"));
            }
        }
        for (j, g) in gammas.iter().enumerate() {
            if !(g.shape() - self.theta[j] > R::zero()) {
                return Err(Error::domain(format!(
                    "tilted shape of component {j} is not positive"
                )));
            }
            if !(g.rate() + self.eta[j] > R::zero()) {
                return Err(Error::domain(format!(
                    "tilted rate of component {j} is not positive"
                )));
            }
        }
        Ok(())
    }
}

/// Loss threshold, either directly on the lattice or as a fraction of `n`.
/// Negative `tau` makes the conditional tail identically one (no rare
/// event), which is the zero-payoff-free surrogate used by sanity checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossLevel {
    Tau(i64),
    Fraction(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    Crude,
    Is,
    Both,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig<R: Real> {
    /// Pilot size for the parameter search.
    pub b1: usize,
    /// Estimation sample size.
    pub b2: usize,
    /// Newton precision on the per-block sum of squared residuals.
    pub eps: R,
    pub max_iter: usize,
    pub seed: u64,
    pub mask: TiltMask,
    pub loss: LossLevel,
    /// Crude arm uses the conditional tail instead of resampling the
    /// idiosyncratic terms.
    pub conditional_crude: bool,
}

impl<R: Real> ExperimentConfig<R> {
    pub fn new(seed: u64, loss: LossLevel) -> Self {
        Self {
            b1: 5_000,
            b2: 10_000,
            eps: R::lit(1e-4),
            max_iter: 20,
            seed,
            mask: TiltMask::MU_ETA,
            loss,
            conditional_crude: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.b1 == 0 || self.b2 == 0 {
            return Err(Error::invalid("sample sizes must be at least 1"));
        }
        if !(self.eps > R::zero()) {
            return Err(Error::invalid("newton precision must be positive"));
        }
        Ok(())
    }
}

/// How an estimate was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateMode {
    Crude,
    CrudeConditional,
    ImportanceSampling,
}

/// One estimator arm's results.
#[derive(Debug, Clone)]
pub struct EstimateReport<R: Real> {
    pub mode: EstimateMode,
    pub estimate: R,
    pub per_sample_variance: R,
    pub std_error: R,
    /// Crude variance `p(1-p)` over the per-sample variance, with `p` taken
    /// from this arm's own estimate.
    pub vr_factor: Option<R>,
    pub newton_iterations: Option<usize>,
    pub converged: Option<bool>,
    pub search_time_s: f64,
    pub estimate_time_s: f64,
    pub b1: usize,
    pub b2: usize,
    pub seed: u64,
}

/// Both arms of one experiment.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome<R: Real> {
    pub crude: Option<EstimateReport<R>>,
    pub is: Option<EstimateReport<R>>,
    pub tilt: Option<EngineTilt<R>>,
    pub search: Option<TiltSolution<R>>,
}

/// Model state shared by both phases.
struct Prepared<R: Real> {
    lattice: LossLattice<R>,
    tau: i64,
    gammas: Vec<GammaParams<R>>,
}

impl<R: Real> Prepared<R> {
    fn new(model: &PortfolioModel<R>, shock: &ShockSpec<R>, loss: LossLevel) -> Result<Self> {
        shock.validate(model.n_factors())?;
        let tau = match loss {
            LossLevel::Tau(t) => t,
            LossLevel::Fraction(b) => tau_from_fraction(model.n_obligors(), b),
        };
        Ok(Self {
            lattice: LossLattice::new(model.exposures().to_vec())?,
            tau,
            gammas: shock.gamma_components(),
        })
    }

    /// Conditional tail `rho(z, w)` via the grouped characteristic function.
    fn conditional_tail(&self, model: &PortfolioModel<R>, sample: &FactorSample<R>) -> Result<R> {
        if self.tau < 0 {
            return Ok(R::one());
        }
        let tau = self.tau as u64;
        if tau >= self.lattice.total() {
            return Ok(R::zero());
        }
        let probs = model.group_default_probs(sample)?;
        let groups: Vec<(R, u64, u32)> = model
            .groups()
            .iter()
            .zip(&probs)
            .map(|(g, p)| (*p, g.exposure, g.count))
            .collect();
        let mut b: Vec<Complex<R>> = char_function_grouped(&groups, &self.lattice);
        let dist = invert_with_lattice(&self.lattice, &mut b)?;
        dist.tail_prob(tau)
    }
}

/// One pilot draw reduced to what the search needs.
struct PilotRow<R: Real> {
    /// `Sigma^-1 z`, so the mean-tilt weight exponent is one dot product.
    siginv_z: Vec<R>,
    z: Vec<R>,
    q: Vec<R>,
    ln_q: Vec<R>,
    ln_rho: R,
}

struct EnginePilot<R: Real> {
    rows: Vec<PilotRow<R>>,
    d: usize,
    m: usize,
}

impl<R: Real> EnginePilot<R> {
    /// Self-normalized conjugate means of `(z, ln q, q)` with per-row
    /// log-weight `2 ln rho - mu' Sigma^-1 z + sum_j theta_j ln q_j +
    /// eta_j q_j` (the tilt exponent matching the phase-two laws).
    fn conjugate_means(&self, mu: &[R], theta: &[R], eta: &[R]) -> (Vec<R>, Vec<R>, Vec<R>) {
        let mut logw = Vec::with_capacity(self.rows.len());
        let mut max = R::neg_infinity();
        for row in &self.rows {
            let mut lw = row.ln_rho + row.ln_rho;
            for i in 0..self.d {
                lw -= mu[i] * row.siginv_z[i];
            }
            for j in 0..self.m {
                lw += theta[j] * row.ln_q[j] + eta[j] * row.q[j];
            }
            if lw > max {
                max = lw;
            }
            logw.push(lw);
        }
        let mut total = R::zero();
        for lw in logw.iter_mut() {
            *lw = (*lw - max).exp();
            total += *lw;
        }
        let mut ez = vec![R::zero(); self.d];
        let mut elnq = vec![R::zero(); self.m];
        let mut eq = vec![R::zero(); self.m];
        for (row, w) in self.rows.iter().zip(&logw) {
            let wn = *w / total;
            for i in 0..self.d {
                ez[i] += wn * row.z[i];
            }
            for j in 0..self.m {
                elnq[j] += wn * row.ln_q[j];
                eq[j] += wn * row.q[j];
            }
        }
        (ez, elnq, eq)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Block {
    Mu,
    Theta,
    Eta,
}

struct SearchState<R: Real> {
    mu: Vec<R>,
    theta: Vec<R>,
    eta: Vec<R>,
}

/// Phase one: locate the tilting parameters on a fresh pilot.
/// Returns the tilt and the solver diagnostics; a failed search comes back
/// with `converged = false`, never with silently accepted parameters.
pub fn search_tilt_parameters<R: Real>(
    model: &PortfolioModel<R>,
    shock: &ShockSpec<R>,
    cfg: &ExperimentConfig<R>,
) -> Result<(EngineTilt<R>, TiltSolution<R>)> {
    cfg.validate()?;
    if cfg.mask.sigma {
        return Err(Error::invalid(
            "covariance tilting of the factors is not searched by the engine; \
             supply sigma_tilt explicitly to estimate_tail instead",
        ));
    }
    let prepared = Prepared::new(model, shock, cfg.loss)?;
    let d = model.n_factors();
    let m = prepared.gammas.len();
    if (cfg.mask.theta || cfg.mask.eta) && m == 0 {
        return Err(Error::invalid(
            "shock tilting requested but the shock law has no gamma components",
        ));
    }
    let stream = RandomStream::new(cfg.seed);

    // Draw the pilot under the base measure, one substream per index.
    let draws: Vec<Result<Option<PilotRow<R>>>> = (0..cfg.b1)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream.substream(PILOT_BASE + i as u64).rng();
            let sample = sample_factors(model, shock, &mut rng, None)?;
            let rho = prepared.conditional_tail(model, &sample)?;
            if rho > R::zero() {
                Ok(Some(PilotRow {
                    siginv_z: model.factor_cov().solve(&sample.z),
                    ln_q: sample.q.iter().map(|v| v.ln()).collect(),
                    z: sample.z,
                    q: sample.q,
                    ln_rho: rho.ln(),
                }))
            } else {
                Ok(None)
            }
        })
        .collect();
    let mut rows = Vec::with_capacity(cfg.b1);
    for r in draws {
        if let Some(row) = r? {
            rows.push(row);
        }
    }
    if rows.is_empty() {
        return Err(Error::DegeneratePilot);
    }
    let pilot = EnginePilot { rows, d, m };

    let mut blocks = Vec::new();
    if cfg.mask.mu {
        blocks.push(Block::Mu);
    }
    if cfg.mask.theta {
        blocks.push(Block::Theta);
    }
    if cfg.mask.eta {
        blocks.push(Block::Eta);
    }
    if blocks.is_empty() {
        let tilt = EngineTilt {
            mask: cfg.mask,
            ..EngineTilt::zero(model, shock)
        };
        return Ok((
            tilt,
            TiltSolution {
                theta: vec![],
                eta: vec![],
                iterations: 0,
                final_residual: R::zero(),
                converged: true,
            },
        ));
    }

    let margin = R::lit(1e-6);
    let gammas = prepared.gammas.clone();
    let mut state = SearchState {
        mu: vec![R::zero(); d],
        theta: vec![R::zero(); m],
        eta: vec![R::zero(); m],
    };

    let block_residual = |state: &SearchState<R>, block: Block| -> Result<Vec<R>> {
        let (ez, elnq, eq) = pilot.conjugate_means(&state.mu, &state.theta, &state.eta);
        Ok(match block {
            Block::Mu => state.mu.iter().zip(&ez).map(|(m, e)| *m - *e).collect(),
            Block::Theta => (0..m)
                .map(|j| {
                    let shape = gammas[j].shape() - state.theta[j];
                    let rate = gammas[j].rate() + state.eta[j];
                    Ok(digamma(shape)? - rate.ln() - elnq[j])
                })
                .collect::<Result<Vec<R>>>()?,
            Block::Eta => (0..m)
                .map(|j| {
                    let shape = gammas[j].shape() - state.theta[j];
                    let rate = gammas[j].rate() + state.eta[j];
                    (shape / rate) - eq[j]
                })
                .collect(),
        })
    };

    let block_domain = |vals: &[R], block: Block| -> bool {
        match block {
            Block::Mu => vals.iter().all(|v| v.is_finite()),
            Block::Theta => vals
                .iter()
                .zip(&gammas)
                .all(|(t, g)| t.is_finite() && g.shape() - *t > margin),
            Block::Eta => vals
                .iter()
                .zip(&gammas)
                .all(|(e, g)| e.is_finite() && g.rate() + *e > margin),
        }
    };

    // Componentwise Newton: a Gauss-Seidel sweep takes damped steps block by
    // block (at most two per block, so marginal blocks settle within the
    // sweep); convergence is declared only when every block satisfies
    // g'g < eps simultaneously.
    let mut iterations = 0usize;
    let mut converged = false;
    let mut total_residual = R::zero();
    while iterations < cfg.max_iter {
        for &block in &blocks {
            for _inner in 0..2 {
                let current = match block {
                    Block::Mu => state.mu.clone(),
                    Block::Theta => state.theta.clone(),
                    Block::Eta => state.eta.clone(),
                };
                let mut g = |vals: &[R]| -> Result<Vec<R>> {
                    let mut trial = SearchState {
                        mu: state.mu.clone(),
                        theta: state.theta.clone(),
                        eta: state.eta.clone(),
                    };
                    match block {
                        Block::Mu => trial.mu = vals.to_vec(),
                        Block::Theta => trial.theta = vals.to_vec(),
                        Block::Eta => trial.eta = vals.to_vec(),
                    }
                    block_residual(&trial, block)
                };
                let domain = |vals: &[R]| block_domain(vals, block);
                let g0 = g(&current)?;
                let r0 = linalg::dot(&g0, &g0);
                if r0 < cfg.eps {
                    break;
                }
                let n = current.len();
                let jac = fd_jacobian(&mut g, &current, n, &domain)?;
                let step = match linalg::lu_solve(&jac, &g0, n) {
                    Ok(dir) => damped_step(&mut g, &current, &dir, r0, &domain)?,
                    Err(_) => None,
                };
                let step = match step {
                    Some(s) => Some(s),
                    None => {
                        let mut grad = vec![R::zero(); n];
                        for j in 0..n {
                            let mut acc = R::zero();
                            for i in 0..n {
                                acc += jac[i * n + j] * g0[i];
                            }
                            grad[j] = acc;
                        }
                        damped_step(&mut g, &current, &grad, r0, &domain)?
                    }
                };
                match step {
                    Some((vals, _, _)) => match block {
                        Block::Mu => state.mu = vals,
                        Block::Theta => state.theta = vals,
                        Block::Eta => state.eta = vals,
                    },
                    None => break,
                }
            }
        }
        iterations += 1;
        total_residual = R::zero();
        let mut all_ok = true;
        for &block in &blocks {
            let gb = block_residual(&state, block)?;
            let rb = linalg::dot(&gb, &gb);
            total_residual += rb;
            if !(rb < cfg.eps) {
                all_ok = false;
            }
        }
        if all_ok {
            converged = true;
            break;
        }
    }

    let tilt = EngineTilt {
        mu: state.mu.clone(),
        sigma_tilt: None,
        theta: state.theta.clone(),
        eta: state.eta.clone(),
        mask: cfg.mask,
    };
    tilt.validate(d, &gammas)?;
    let mut packed_theta = state.mu;
    packed_theta.extend_from_slice(&state.theta);
    Ok((
        tilt,
        TiltSolution {
            theta: packed_theta,
            eta: state.eta,
            iterations,
            final_residual: total_residual,
            converged,
        },
    ))
}

/// Phase two: estimate the tail under the recorded tilt. Depends on phase
/// one only through `tilt`, so replaying it with the same seed reproduces
/// the estimate bitwise.
pub fn estimate_tail<R: Real>(
    model: &PortfolioModel<R>,
    shock: &ShockSpec<R>,
    tilt: &EngineTilt<R>,
    cfg: &ExperimentConfig<R>,
) -> Result<EstimateReport<R>> {
    cfg.validate()?;
    let prepared = Prepared::new(model, shock, cfg.loss)?;
    tilt.validate(model.n_factors(), &prepared.gammas)?;
    let started = Instant::now();
    let base_mvn = model.factor_cov();
    let tilted_mvn = match &tilt.sigma_tilt {
        Some(s) => s.with_mean(tilt.mu.clone())?,
        None => base_mvn.with_mean(tilt.mu.clone())?,
    };
    let stream = RandomStream::new(cfg.seed);
    let gammas = &prepared.gammas;

    let chunks: Vec<Result<(R, R)>> = (0..cfg.b2)
        .into_par_iter()
        .fold_chunks(
            CHUNK,
            || Ok((R::zero(), R::zero())),
            |acc, i| {
                let (mut s, mut s2) = acc?;
                let mut rng = stream.substream(ESTIMATE_BASE + i as u64).rng();
                let sample = sample_factors(model, shock, &mut rng, Some(tilt))?;
                let rho = prepared.conditional_tail(model, &sample)?;
                let lr1 = log_pdf_mvn(&sample.z, base_mvn) - log_pdf_mvn(&sample.z, &tilted_mvn);
                let mut lr2 = R::zero();
                for (j, g) in gammas.iter().enumerate() {
                    lr2 += ln_gamma_pdf_unchecked(sample.q[j], g.shape(), g.rate())
                        - ln_gamma_pdf_unchecked(
                            sample.q[j],
                            g.shape() - tilt.theta[j],
                            g.rate() + tilt.eta[j],
                        );
                }
                let y = rho * (lr1 + lr2).exp();
                if !y.is_finite() {
                    return Err(Error::numerical(format!(
                        "non-finite likelihood ratio at sample {i}"
                    )));
                }
                s += y;
                s2 += y * y;
                Ok((s, s2))
            },
        )
        .collect();

    let mut sum = R::zero();
    let mut sumsq = R::zero();
    for c in chunks {
        let (s, s2) = c?;
        sum += s;
        sumsq += s2;
    }
    let nf = R::lit(cfg.b2 as f64);
    let estimate = sum / nf;
    let variance = if cfg.b2 > 1 {
        ((sumsq - sum * sum / nf) / (nf - R::one())).max(R::zero())
    } else {
        R::zero()
    };
    Ok(EstimateReport {
        mode: EstimateMode::ImportanceSampling,
        estimate,
        per_sample_variance: variance,
        std_error: (variance / nf).sqrt(),
        vr_factor: vr_factor(estimate, variance),
        newton_iterations: None,
        converged: None,
        search_time_s: 0.0,
        estimate_time_s: started.elapsed().as_secs_f64(),
        b1: cfg.b1,
        b2: cfg.b2,
        seed: cfg.seed,
    })
}

fn vr_factor<R: Real>(estimate: R, variance: R) -> Option<R> {
    if variance > R::zero() && estimate > R::zero() && estimate < R::one() {
        Some(estimate * (R::one() - estimate) / variance)
    } else {
        None
    }
}

/// Crude Monte Carlo arm. The plain variant resamples every idiosyncratic
/// term and counts threshold crossings, with the Bernoulli `p(1-p)` variance
/// convention; the conditional variant averages the Fourier tail instead.
pub fn crude_estimate<R: Real>(
    model: &PortfolioModel<R>,
    shock: &ShockSpec<R>,
    cfg: &ExperimentConfig<R>,
) -> Result<EstimateReport<R>> {
    cfg.validate()?;
    let prepared = Prepared::new(model, shock, cfg.loss)?;
    let started = Instant::now();
    let stream = RandomStream::new(cfg.seed);
    let d = model.n_factors();
    let n = model.n_obligors();

    let chunks: Vec<Result<(R, R)>> = (0..cfg.b2)
        .into_par_iter()
        .fold_chunks(
            CHUNK,
            || Ok((R::zero(), R::zero())),
            |acc, i| {
                let (mut s, mut s2) = acc?;
                let mut rng = stream.substream(CRUDE_BASE + i as u64).rng();
                let sample = sample_factors(model, shock, &mut rng, None)?;
                let y = if cfg.conditional_crude {
                    prepared.conditional_tail(model, &sample)?
                } else {
                    let sqrt_w_idio = sample.w[d].sqrt();
                    let mut loss: i64 = 0;
                    for k in 0..n {
                        let mut x = R::zero();
                        for i in 0..d {
                            x += model.loadings()[k * d + i] * sample.w[i].sqrt() * sample.z[i];
                        }
                        let eps: R = R::std_normal_draw(&mut rng) * model.idio_std();
                        x += model.idio_loadings()[k] * sqrt_w_idio * eps;
                        let defaulted = match model.direction() {
                            crate::portfolio::DefaultDirection::Above => x > model.thresholds()[k],
                            crate::portfolio::DefaultDirection::Below => x < model.thresholds()[k],
                        };
                        if defaulted {
                            loss += model.exposures()[k] as i64;
                        }
                    }
                    if loss > prepared.tau {
                        R::one()
                    } else {
                        R::zero()
                    }
                };
                s += y;
                s2 += y * y;
                Ok((s, s2))
            },
        )
        .collect();

    let mut sum = R::zero();
    let mut sumsq = R::zero();
    for c in chunks {
        let (s, s2) = c?;
        sum += s;
        sumsq += s2;
    }
    let nf = R::lit(cfg.b2 as f64);
    let estimate = sum / nf;
    let (mode, variance) = if cfg.conditional_crude {
        let v = if cfg.b2 > 1 {
            ((sumsq - sum * sum / nf) / (nf - R::one())).max(R::zero())
        } else {
            R::zero()
        };
        (EstimateMode::CrudeConditional, v)
    } else {
        // Bernoulli convention: the per-sample variance equals p(1-p).
        (EstimateMode::Crude, estimate * (R::one() - estimate))
    };
    Ok(EstimateReport {
        mode,
        estimate,
        per_sample_variance: variance,
        std_error: (variance / nf).sqrt(),
        vr_factor: vr_factor(estimate, variance),
        newton_iterations: None,
        converged: None,
        search_time_s: 0.0,
        estimate_time_s: started.elapsed().as_secs_f64(),
        b1: 0,
        b2: cfg.b2,
        seed: cfg.seed,
    })
}

/// Run the requested arms: crude, importance sampling (search + estimate),
/// or both on the same configuration.
pub fn run_experiment<R: Real>(
    model: &PortfolioModel<R>,
    shock: &ShockSpec<R>,
    cfg: &ExperimentConfig<R>,
    mode: RunMode,
) -> Result<ExperimentOutcome<R>> {
    let mut outcome = ExperimentOutcome {
        crude: None,
        is: None,
        tilt: None,
        search: None,
    };
    if matches!(mode, RunMode::Crude | RunMode::Both) {
        outcome.crude = Some(crude_estimate(model, shock, cfg)?);
    }
    if matches!(mode, RunMode::Is | RunMode::Both) {
        let search_started = Instant::now();
        let (tilt, solution) = search_tilt_parameters(model, shock, cfg)?;
        let search_time = search_started.elapsed().as_secs_f64();
        let mut report = estimate_tail(model, shock, &tilt, cfg)?;
        report.search_time_s = search_time;
        report.newton_iterations = Some(solution.iterations);
        report.converged = Some(solution.converged);
        outcome.is = Some(report);
        outcome.tilt = Some(tilt);
        outcome.search = Some(solution);
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::portfolio::{preset, ExposureKind};

    fn fast_cfg(seed: u64, loss: LossLevel) -> ExperimentConfig<f64> {
        ExperimentConfig {
            b1: 2_000,
            b2: 4_000,
            ..ExperimentConfig::new(seed, loss)
        }
    }

    #[test]
    fn zero_tilt_estimator_equals_conditional_mean_bitwise() {
        let p = preset::<f64>("one_factor_t").unwrap();
        let cfg = ExperimentConfig {
            conditional_crude: true,
            ..fast_cfg(11, LossLevel::Fraction(p.b))
        };
        let zero = EngineTilt::zero(&p.model, &p.shock);
        let is = estimate_tail(&p.model, &p.shock, &zero, &cfg).unwrap();
        // With the identity tilt every likelihood ratio is exactly one, so
        // the estimator must reduce to the mean of the conditional tails --
        // bitwise, replaying the engine's fixed chunked summation order.
        let prepared = Prepared::new(&p.model, &p.shock, cfg.loss).unwrap();
        let stream = RandomStream::new(cfg.seed);
        let mut sum = 0.0f64;
        for chunk in (0..cfg.b2).collect::<Vec<_>>().chunks(CHUNK) {
            let mut part = 0.0f64;
            for &i in chunk {
                let mut rng = stream.substream(ESTIMATE_BASE + i as u64).rng();
                let s = sample_factors(&p.model, &p.shock, &mut rng, Some(&zero)).unwrap();
                part += prepared.conditional_tail(&p.model, &s).unwrap();
            }
            sum += part;
        }
        let expected = sum / cfg.b2 as f64;
        assert_eq!(is.estimate.to_bits(), expected.to_bits());
    }

    #[test]
    fn no_rare_event_surrogate_keeps_zero_tilt() {
        let p = preset::<f64>("one_factor_t").unwrap();
        let cfg = fast_cfg(13, LossLevel::Tau(-1));
        let (tilt, sol) = search_tilt_parameters(&p.model, &p.shock, &cfg).unwrap();
        assert!(sol.converged, "residual={}", sol.final_residual);
        assert!(tilt.mu[0].abs() < 0.15, "mu={}", tilt.mu[0]);
        assert!(tilt.eta[0].abs() < 0.15, "eta={}", tilt.eta[0]);
    }

    #[test]
    fn impossible_loss_level_is_degenerate() {
        let p = preset::<f64>("one_factor_t").unwrap();
        let cfg = fast_cfg(14, LossLevel::Tau(10_000));
        let err = search_tilt_parameters(&p.model, &p.shock, &cfg).unwrap_err();
        assert!(matches!(err, Error::DegeneratePilot));
    }

    #[test]
    fn one_factor_t_search_and_estimate() {
        let p = preset::<f64>("one_factor_t").unwrap();
        let cfg = ExperimentConfig {
            b1: p.b1,
            b2: p.b2,
            mask: p.mask,
            ..ExperimentConfig::new(2024, LossLevel::Fraction(p.b))
        };
        let out = run_experiment(&p.model, &p.shock, &cfg, RunMode::Is).unwrap();
        let is = out.is.unwrap();
        assert_eq!(out.search.as_ref().unwrap().converged, true);
        // nu = 4 tail near 8.13e-3 with a strong variance reduction.
        let se = is.std_error;
        assert!(
            (is.estimate - 8.13e-3).abs() < 4.0 * se.max(1e-4),
            "estimate={:e}",
            is.estimate
        );
        assert!(is.vr_factor.unwrap() > 50.0, "vr={:?}", is.vr_factor);
    }

    #[test]
    fn crude_binomial_sanity() {
        // Degenerate shock and zero loadings: losses are Binomial(n, p).
        let p = preset::<f64>("fft_check").unwrap();
        let tau = 30i64;
        let cfg = ExperimentConfig {
            b2: 20_000,
            ..fast_cfg(15, LossLevel::Tau(tau))
        };
        let crude = crude_estimate(&p.model, &p.shock, &cfg).unwrap();
        let truth = crate::lossdist::binomial_tail_oracle(250, 0.1f64, tau as u64).unwrap();
        let se = (truth * (1.0 - truth) / cfg.b2 as f64).sqrt();
        assert!(
            (crude.estimate - truth).abs() < 3.5 * se,
            "crude={:e} truth={truth:e}",
            crude.estimate
        );
    }

    #[test]
    fn phase_two_replay_is_bitwise() {
        let p = preset::<f64>("three_factor_base").unwrap();
        let cfg = fast_cfg(77, LossLevel::Fraction(0.3));
        let (tilt, _) = search_tilt_parameters(&p.model, &p.shock, &cfg).unwrap();
        let a = estimate_tail(&p.model, &p.shock, &tilt, &cfg).unwrap();
        let b = estimate_tail(&p.model, &p.shock, &tilt, &cfg).unwrap();
        assert_eq!(a.estimate.to_bits(), b.estimate.to_bits());
        assert_eq!(
            a.per_sample_variance.to_bits(),
            b.per_sample_variance.to_bits()
        );
    }

    #[test]
    fn sigma_mask_is_rejected_in_search() {
        let p = preset::<f64>("one_factor_t").unwrap();
        let cfg = ExperimentConfig {
            mask: TiltMask {
                sigma: true,
                ..TiltMask::MU_ETA
            },
            ..fast_cfg(5, LossLevel::Fraction(0.25))
        };
        assert!(search_tilt_parameters(&p.model, &p.shock, &cfg).is_err());
    }

    #[test]
    fn tilt_validation_rejects_domain_violations() {
        let p = preset::<f64>("one_factor_t").unwrap();
        let gammas = p.shock.gamma_components();
        let mut tilt = EngineTilt::zero(&p.model, &p.shock);
        tilt.theta[0] = 10.0; // shape 2 - 10 < 0
        assert!(tilt.validate(1, &gammas).is_err());
        tilt.theta[0] = 0.0;
        tilt.eta[0] = -1.0; // rate 0.5 - 1 < 0
        assert!(tilt.validate(1, &gammas).is_err());
    }

    #[test]
    fn five_level_exposures_run_end_to_end() {
        let spec = crate::portfolio::ThreeFactorSpec::base_for(ExposureKind::FiveLevel);
        let p = crate::portfolio::three_factor_base::<f64>(&spec).unwrap();
        let cfg = ExperimentConfig {
            b1: 500,
            b2: 500,
            mask: p.mask,
            ..ExperimentConfig::new(19, LossLevel::Fraction(2.0))
        };
        let out = run_experiment(&p.model, &p.shock, &cfg, RunMode::Is).unwrap();
        let is = out.is.unwrap();
        assert!(is.estimate > 0.0 && is.estimate < 1.0);
    }
}
