//! The credit-portfolio data model: factor loadings, shock-variable laws,
//! thresholds and integer exposures, conditional default probabilities, and
//! the named presets behind the benchmark tables.
//!
//! An obligor's latent variable is
//! `X_k = sum_i rho_ki sqrt(W_i) Z_i + rho_k sqrt(W_{d+1}) eps_k`,
//! with `Z ~ N(0, Sigma)`, non-negative mixing variables `W`, and
//! `eps_k ~ N(0, sigma_eps^2)`. Default means `X_k > chi_k` (or `< chi_k`
//! for creditworthiness-style indices), and the loss adds the integer
//! exposure `c_k` per defaulted obligor.

use std::collections::HashMap;

use rand_chacha::ChaCha12Rng;

use crate::dist::{GammaParams, MvnParams};
use crate::engine::{EngineTilt, TiltMask};
use crate::error::{Error, Result};
use crate::real::Real;
use crate::special::{normal_cdf, normal_tail};

/// Whether an obligor defaults above or below its threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DefaultDirection {
    Above,
    Below,
}

/// Whether the t-copula mixing variables share one gamma draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sharing {
    Shared,
    Independent,
}

/// Law of the non-negative mixing vector `W = (W_1 .. W_{d+1})`.
#[derive(Debug, Clone)]
pub enum ShockSpec<R: Real> {
    /// `W_j = nu_j / Q_j` with `Q_j ~ Gamma(nu_j/2, 1/2)`; `Shared` draws a
    /// single `Q` and uses it for every slot (the multivariate-t case).
    TCopula { nu: Vec<R>, sharing: Sharing },
    /// `W_j ~ Gamma(alpha_j, beta_j)` directly (the GIG special case runs
    /// `alpha_j = nu_j / 2`, `beta_j = 1/2`).
    GammaDirect { components: Vec<GammaParams<R>> },
    /// `W = 1`: the plain normal copula.
    Degenerate,
}

impl<R: Real> ShockSpec<R> {
    pub fn validate(&self, d: usize) -> Result<()> {
        match self {
            ShockSpec::TCopula { nu, sharing } => {
                if nu.len() != d + 1 {
                    return Err(Error::invalid(format!(
                        "t-copula needs {} degrees of freedom, got {}",
                        d + 1,
                        nu.len()
                    )));
                }
                if nu.iter().any(|v| !(*v > R::zero())) {
                    return Err(Error::invalid("degrees of freedom must be positive"));
                }
                if *sharing == Sharing::Shared {
                    let first = nu[0];
                    if nu.iter().any(|v| *v != first) {
                        return Err(Error::invalid(
                            "shared t-copula requires one common degree of freedom",
                        ));
                    }
                }
                Ok(())
            }
            ShockSpec::GammaDirect { components } => {
                if components.len() != d + 1 {
                    return Err(Error::invalid(format!(
                        "direct gamma shocks need {} components, got {}",
                        d + 1,
                        components.len()
                    )));
                }
                Ok(())
            }
            ShockSpec::Degenerate => Ok(()),
        }
    }

    /// Base laws of the gamma-space variables actually drawn (and tilted):
    /// the `Q_j` for a t-copula, the `W_j` themselves for direct gamma.
    pub fn gamma_components(&self) -> Vec<GammaParams<R>> {
        match self {
            ShockSpec::TCopula { nu, sharing } => {
                let half = R::lit(0.5);
                match sharing {
                    Sharing::Shared => vec![GammaParams::new(nu[0] * half, half).unwrap()],
                    Sharing::Independent => nu
                        .iter()
                        .map(|v| GammaParams::new(*v * half, half).unwrap())
                        .collect(),
                }
            }
            ShockSpec::GammaDirect { components } => components.clone(),
            ShockSpec::Degenerate => vec![],
        }
    }

    /// Map the drawn gamma-space values to the mixing vector `W` (length
    /// `d + 1`).
    pub fn w_from_gamma(&self, q: &[R], d: usize) -> Vec<R> {
        match self {
            ShockSpec::TCopula { nu, sharing } => match sharing {
                Sharing::Shared => {
                    let w = nu[0] / q[0];
                    vec![w; d + 1]
                }
                Sharing::Independent => nu.iter().zip(q).map(|(v, qi)| *v / *qi).collect(),
            },
            ShockSpec::GammaDirect { .. } => q.to_vec(),
            ShockSpec::Degenerate => vec![R::one(); d + 1],
        }
    }
}

/// One draw of the systematic state.
#[derive(Debug, Clone)]
pub struct FactorSample<R: Real> {
    /// Systematic normal factors, length d.
    pub z: Vec<R>,
    /// Mixing variables, length d + 1.
    pub w: Vec<R>,
    /// Underlying gamma-space values the tilting acts on (empty for the
    /// degenerate shock). For a t-copula, `w_j q_j = nu_j` exactly.
    pub q: Vec<R>,
}

/// Obligors sharing one `(exposure, threshold, loadings, idiosyncratic
/// loading)` tuple; their conditional default probabilities coincide, which
/// collapses the characteristic-function product.
#[derive(Debug, Clone)]
pub struct ObligorGroup<R: Real> {
    pub count: u32,
    pub exposure: u64,
    pub threshold: R,
    pub loadings: Vec<R>,
    pub idio_loading: R,
}

#[derive(Debug, Clone)]
pub struct PortfolioModel<R: Real> {
    n: usize,
    d: usize,
    loadings: Vec<R>,
    idio_loadings: Vec<R>,
    thresholds: Vec<R>,
    exposures: Vec<u64>,
    idio_std: R,
    factor_cov: MvnParams<R>,
    direction: DefaultDirection,
    groups: Vec<ObligorGroup<R>>,
}

impl<R: Real> PortfolioModel<R> {
    /// Build and validate a model. `loadings` is `n x d` row-major; the
    /// idiosyncratic loading of each obligor is recomputed as
    /// `sqrt(1 - sum_i rho_ki^2)`.
    pub fn new(
        loadings: Vec<R>,
        thresholds: Vec<R>,
        exposures: Vec<u64>,
        idio_std: R,
        factor_cov: MvnParams<R>,
        direction: DefaultDirection,
    ) -> Result<Self> {
        let d = factor_cov.dim();
        if d == 0 || loadings.len() % d != 0 {
            return Err(Error::invalid("loadings shape does not match factor count"));
        }
        let n = loadings.len() / d;
        if n == 0 {
            return Err(Error::invalid("at least one obligor is required"));
        }
        if thresholds.len() != n || exposures.len() != n {
            return Err(Error::invalid(
                "thresholds/exposures must have one entry per obligor",
            ));
        }
        if !(idio_std > R::zero()) {
            return Err(Error::invalid(
                "idiosyncratic standard deviation must be positive",
            ));
        }
        if loadings
            .iter()
            .chain(thresholds.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::invalid("model parameters must be finite"));
        }
        let mut idio_loadings = Vec::with_capacity(n);
        for k in 0..n {
            let row = &loadings[k * d..(k + 1) * d];
            let norm2: R = row.iter().map(|r| *r * *r).sum();
            if norm2 > R::one() + R::lit(1e-12) {
                return Err(Error::invalid(format!(
                    "systematic loadings of obligor {k} exceed unit norm"
                )));
            }
            idio_loadings.push((R::one() - norm2.min(R::one())).sqrt());
        }
        let groups = group_obligors(&loadings, &idio_loadings, &thresholds, &exposures, d);
        Ok(Self {
            n,
            d,
            loadings,
            idio_loadings,
            thresholds,
            exposures,
            idio_std,
            factor_cov,
            direction,
            groups,
        })
    }

    pub fn n_obligors(&self) -> usize {
        self.n
    }

    pub fn n_factors(&self) -> usize {
        self.d
    }

    pub fn exposures(&self) -> &[u64] {
        &self.exposures
    }

    pub fn thresholds(&self) -> &[R] {
        &self.thresholds
    }

    pub fn loadings(&self) -> &[R] {
        &self.loadings
    }

    pub fn idio_loadings(&self) -> &[R] {
        &self.idio_loadings
    }

    pub fn idio_std(&self) -> R {
        self.idio_std
    }

    pub fn factor_cov(&self) -> &MvnParams<R> {
        &self.factor_cov
    }

    pub fn direction(&self) -> DefaultDirection {
        self.direction
    }

    pub fn groups(&self) -> &[ObligorGroup<R>] {
        &self.groups
    }

    /// Maximum possible loss.
    pub fn total_exposure(&self) -> u64 {
        self.exposures.iter().sum()
    }

    fn default_prob_for(
        &self,
        threshold: R,
        loadings: &[R],
        idio_loading: R,
        sample: &FactorSample<R>,
        sqrt_w: &[R],
    ) -> Result<R> {
        let mut systematic = R::zero();
        for i in 0..self.d {
            systematic += loadings[i] * sqrt_w[i] * sample.z[i];
        }
        let num = threshold - systematic;
        let den = idio_loading * sqrt_w[self.d] * self.idio_std;
        if !num.is_finite() || !den.is_finite() {
            return Err(Error::numerical("non-finite conditional default input"));
        }
        let p = if den > R::zero() {
            match self.direction {
                DefaultDirection::Above => normal_tail(num / den),
                DefaultDirection::Below => normal_cdf(num / den),
            }
        } else {
            // Degenerate obligor: the latent variable is purely systematic.
            let defaulted = match self.direction {
                DefaultDirection::Above => num < R::zero(),
                DefaultDirection::Below => num > R::zero(),
            };
            if defaulted {
                R::one()
            } else {
                R::zero()
            }
        };
        Ok(p)
    }

    fn sqrt_w(&self, sample: &FactorSample<R>) -> Result<Vec<R>> {
        if sample.z.len() != self.d || sample.w.len() != self.d + 1 {
            return Err(Error::invalid(
                "factor sample dimensions do not match the model",
            ));
        }
        sample
            .w
            .iter()
            .map(|w| {
                if *w >= R::zero() && w.is_finite() {
                    Ok(w.sqrt())
                } else {
                    Err(Error::numerical(format!("invalid mixing value {w}")))
                }
            })
            .collect()
    }

    /// Conditional default probabilities per obligor.
    pub fn conditional_default_probs(&self, sample: &FactorSample<R>) -> Result<Vec<R>> {
        let sqrt_w = self.sqrt_w(sample)?;
        (0..self.n)
            .map(|k| {
                self.default_prob_for(
                    self.thresholds[k],
                    &self.loadings[k * self.d..(k + 1) * self.d],
                    self.idio_loadings[k],
                    sample,
                    &sqrt_w,
                )
            })
            .collect()
    }

    /// Conditional default probabilities per obligor group (the fast path:
    /// one evaluation per distinct parameter tuple).
    pub fn group_default_probs(&self, sample: &FactorSample<R>) -> Result<Vec<R>> {
        let sqrt_w = self.sqrt_w(sample)?;
        self.groups
            .iter()
            .map(|g| {
                self.default_prob_for(g.threshold, &g.loadings, g.idio_loading, sample, &sqrt_w)
            })
            .collect()
    }
}

fn group_obligors<R: Real>(
    loadings: &[R],
    idio_loadings: &[R],
    thresholds: &[R],
    exposures: &[u64],
    d: usize,
) -> Vec<ObligorGroup<R>> {
    let n = idio_loadings.len();
    let mut order: Vec<usize> = Vec::new();
    let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut groups: Vec<ObligorGroup<R>> = Vec::new();
    for k in 0..n {
        let mut key: Vec<u64> = Vec::with_capacity(d + 3);
        key.push(exposures[k]);
        key.push(thresholds[k].as_f64().to_bits());
        key.push(idio_loadings[k].as_f64().to_bits());
        for v in &loadings[k * d..(k + 1) * d] {
            key.push(v.as_f64().to_bits());
        }
        match index.get(&key) {
            Some(&g) => groups[g].count += 1,
            None => {
                index.insert(key, groups.len());
                order.push(k);
                groups.push(ObligorGroup {
                    count: 1,
                    exposure: exposures[k],
                    threshold: thresholds[k],
                    loadings: loadings[k * d..(k + 1) * d].to_vec(),
                    idio_loading: idio_loadings[k],
                });
            }
        }
    }
    groups
}

/// Draw `(Z, W)` under the base measure or under an engine tilt. The tilted
/// laws are `N(mu, Sigma)` for the factors (covariance untouched unless the
/// tilt carries one) and `Gamma(shape_j - theta_j, rate_j + eta_j)` for each
/// gamma-space component.
pub fn sample_factors<R: Real>(
    model: &PortfolioModel<R>,
    shock: &ShockSpec<R>,
    rng: &mut ChaCha12Rng,
    tilt: Option<&EngineTilt<R>>,
) -> Result<FactorSample<R>> {
    let d = model.n_factors();
    let base_gammas = shock.gamma_components();
    // Validate the tilt before any draw.
    if let Some(t) = tilt {
        t.validate(d, &base_gammas)?;
    }
    let cov = match tilt.and_then(|t| t.sigma_tilt.as_ref()) {
        Some(s) => s,
        None => model.factor_cov(),
    };
    let mu = tilt.map(|t| t.mu.as_slice());
    let l = cov.chol_factor();
    let mut z: Vec<R> = (0..d).map(|_| R::std_normal_draw(rng)).collect();
    let mut out_z = vec![R::zero(); d];
    for i in 0..d {
        let mut acc = R::zero();
        for j in 0..=i {
            acc += l[i * d + j] * z[j];
        }
        out_z[i] = acc + mu.map_or(R::zero(), |m| m[i]);
    }
    z = out_z;
    let mut q = Vec::with_capacity(base_gammas.len());
    for (j, g) in base_gammas.iter().enumerate() {
        let (shape, rate) = match tilt {
            Some(t) => (g.shape() - t.theta[j], g.rate() + t.eta[j]),
            None => (g.shape(), g.rate()),
        };
        q.push(R::gamma_draw(rng, shape, rate));
    }
    let w = shock.w_from_gamma(&q, d);
    Ok(FactorSample { z, w, q })
}

/// Named exposure profiles. With `j` levels the `i`-th obligor carries
/// `ceil(j i / n)^2`, giving the small sets of distinct integer losses the
/// transform lattice needs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExposureKind {
    Equal,
    TwoLevel,
    FiveLevel,
}

pub fn exposure_profile(kind: ExposureKind, n: usize) -> Vec<u64> {
    assert!(n > 0);
    let levels: u64 = match kind {
        ExposureKind::Equal => return vec![1; n],
        ExposureKind::TwoLevel => 2,
        ExposureKind::FiveLevel => 5,
    };
    (1..=n as u64)
        .map(|i| {
            let c = (levels * i).div_ceil(n as u64);
            c * c
        })
        .collect()
}

/// A named experiment: model, shock law, and the defaults the benchmark
/// tables run with.
#[derive(Debug, Clone)]
pub struct Preset<R: Real> {
    pub name: String,
    pub model: PortfolioModel<R>,
    pub shock: ShockSpec<R>,
    pub b: f64,
    pub mask: TiltMask,
    pub b1: usize,
    pub b2: usize,
}

/// Loss threshold from the loss fraction: `tau = round(n b)` with ties to
/// even, so fractional levels like `n b = 62.5` keep the complement-CDF
/// event `{L > 62}` on the integer lattice.
pub fn tau_from_fraction(n: usize, b: f64) -> i64 {
    (n as f64 * b).round_ties_even() as i64
}

const DEFAULT_B1: usize = 5_000;
const DEFAULT_B2: usize = 10_000;

/// `Phi^-1(0.9)`: threshold-over-sigma giving a 10% marginal default rate.
const Z_90: f64 = 1.281551565544600466;

/// One-factor homogeneous t-copula portfolio: n = 250, loading 0.25,
/// `chi = 0.5 sqrt(n)`, unit exposures, `sigma_eps = 3`, shared shock
/// `W = nu / Q`, loss fraction 0.25.
pub fn one_factor_t<R: Real>(nu: f64) -> Result<Preset<R>> {
    let n = 250usize;
    let chi = R::lit(0.5) * R::lit(n as f64).sqrt();
    let model = PortfolioModel::new(
        vec![R::lit(0.25); n],
        vec![chi; n],
        vec![1; n],
        R::lit(3.0),
        MvnParams::standard(1),
        DefaultDirection::Above,
    )?;
    let shock = ShockSpec::TCopula {
        nu: vec![R::lit(nu); 2],
        sharing: Sharing::Shared,
    };
    shock.validate(1)?;
    Ok(Preset {
        name: format!("one_factor_t(nu={nu})"),
        model,
        shock,
        b: 0.25,
        mask: TiltMask::MU_THETA_ETA,
        b1: DEFAULT_B1,
        b2: DEFAULT_B2,
    })
}

/// Free parameters of the three-factor family used by the sweep tables.
#[derive(Debug, Clone)]
pub struct ThreeFactorSpec {
    pub n: usize,
    pub loading: f64,
    pub nu: [f64; 4],
    pub rho_hat: f64,
    pub sigmas: [f64; 3],
    pub kind: ExposureKind,
    pub b: f64,
}

impl Default for ThreeFactorSpec {
    fn default() -> Self {
        Self {
            n: 250,
            loading: 0.1,
            nu: [8.0, 6.0, 4.0, 4.0],
            rho_hat: 0.5,
            sigmas: [1.0, 0.8, 0.5],
            kind: ExposureKind::Equal,
            b: 0.3,
        }
    }
}

impl ThreeFactorSpec {
    pub fn base_for(kind: ExposureKind) -> Self {
        let b = match kind {
            ExposureKind::Equal => 0.3,
            ExposureKind::TwoLevel => 0.7,
            ExposureKind::FiveLevel => 2.0,
        };
        Self {
            kind,
            b,
            ..Self::default()
        }
    }

    fn factor_cov<R: Real>(&self) -> Result<MvnParams<R>> {
        let s = self.sigmas;
        let r = self.rho_hat;
        let mut cov = vec![R::zero(); 9];
        for i in 0..3 {
            for j in 0..3 {
                let v = if i == j { s[i] * s[i] } else { r * s[i] * s[j] };
                cov[i * 3 + j] = R::lit(v);
            }
        }
        MvnParams::new(vec![R::zero(); 3], cov)
    }

    fn model<R: Real>(&self) -> Result<PortfolioModel<R>> {
        let n = self.n;
        let chi = R::lit(0.5) * R::lit(n as f64).sqrt();
        PortfolioModel::new(
            vec![R::lit(self.loading); n * 3],
            vec![chi; n],
            exposure_profile(self.kind, n),
            R::lit(3.0),
            self.factor_cov()?,
            DefaultDirection::Above,
        )
    }
}

/// Three-factor t-copula portfolio with independent shocks.
pub fn three_factor_base<R: Real>(spec: &ThreeFactorSpec) -> Result<Preset<R>> {
    let model = spec.model()?;
    let shock = ShockSpec::TCopula {
        nu: spec.nu.iter().map(|v| R::lit(*v)).collect(),
        sharing: Sharing::Independent,
    };
    shock.validate(3)?;
    Ok(Preset {
        name: format!("three_factor_base(kind={:?}, b={})", spec.kind, spec.b),
        model,
        shock,
        b: spec.b,
        mask: TiltMask::MU_ETA,
        b1: DEFAULT_B1,
        b2: DEFAULT_B2,
    })
}

/// Same portfolio with `W_j ~ Gamma(nu_j/2, 1/2)` drawn directly (the GIG
/// special case).
pub fn three_factor_gig<R: Real>(b: f64) -> Result<Preset<R>> {
    let spec = ThreeFactorSpec {
        b,
        ..ThreeFactorSpec::default()
    };
    let model = spec.model()?;
    let components = spec
        .nu
        .iter()
        .map(|v| GammaParams::new(R::lit(*v / 2.0), R::lit(0.5)))
        .collect::<Result<Vec<_>>>()?;
    let shock = ShockSpec::GammaDirect { components };
    shock.validate(3)?;
    Ok(Preset {
        name: format!("three_factor_gig(b={b})"),
        model,
        shock,
        b,
        mask: TiltMask::MU_THETA,
        b1: DEFAULT_B1,
        b2: DEFAULT_B2,
    })
}

/// Eight-factor (global + 7 sectors) index portfolio: n = 125, loadings
/// `sqrt(0.17)` on the global factor and `sqrt(0.23 - 0.17)` on the
/// obligor's sector, `chi = -0.55 sqrt(n)` with default below threshold,
/// unit idiosyncratic scale, and one nu = 4 inverse-gamma shock per slot
/// (drawn independently). Obligors are assigned to sectors round-robin.
pub fn cdx_ig_8factor<R: Real>(b: f64) -> Result<Preset<R>> {
    let n = 125usize;
    let d = 8usize;
    let g = 0.17f64.sqrt();
    let s = (0.23f64 - 0.17).sqrt();
    let mut loadings = vec![R::zero(); n * d];
    for k in 0..n {
        loadings[k * d] = R::lit(g);
        loadings[k * d + 1 + (k % 7)] = R::lit(s);
    }
    let chi = R::lit(-0.55) * R::lit(n as f64).sqrt();
    let model = PortfolioModel::new(
        loadings,
        vec![chi; n],
        vec![1; n],
        R::one(),
        MvnParams::standard(d),
        DefaultDirection::Below,
    )?;
    let shock = ShockSpec::TCopula {
        nu: vec![R::lit(4.0); d + 1],
        sharing: Sharing::Independent,
    };
    shock.validate(d)?;
    Ok(Preset {
        name: format!("cdx_ig_8factor(b={b})"),
        model,
        shock,
        b,
        mask: TiltMask::MU_THETA_ETA,
        b1: DEFAULT_B1,
        b2: DEFAULT_B2,
    })
}

/// Deterministic 10%-default-rate portfolio for the transform checks: no
/// systematic loadings, degenerate shock, threshold at `sigma_eps Phi^-1(0.9)`.
pub fn fft_check<R: Real>(kind: ExposureKind) -> Result<Preset<R>> {
    let n = 250usize;
    let sigma_eps = R::lit(3.0);
    let chi = sigma_eps * R::lit(Z_90);
    let model = PortfolioModel::new(
        vec![R::zero(); n],
        vec![chi; n],
        exposure_profile(kind, n),
        sigma_eps,
        MvnParams::standard(1),
        DefaultDirection::Above,
    )?;
    Ok(Preset {
        name: format!("fft_check({kind:?})"),
        model,
        shock: ShockSpec::Degenerate,
        b: 0.08,
        mask: TiltMask::NONE,
        b1: DEFAULT_B1,
        b2: DEFAULT_B2,
    })
}

/// Canonical instance of each named preset.
pub fn preset<R: Real>(name: &str) -> Result<Preset<R>> {
    match name {
        "one_factor_t" => one_factor_t(4.0),
        "three_factor_base" => three_factor_base(&ThreeFactorSpec::default()),
        "three_factor_gig" => three_factor_gig(0.32),
        "cdx_ig_8factor" => cdx_ig_8factor(0.2),
        "fft_check" => fft_check(ExposureKind::Equal),
        other => Err(Error::UnknownPreset(other.into())),
    }
}

pub const PRESET_NAMES: [&str; 5] = [
    "one_factor_t",
    "three_factor_base",
    "three_factor_gig",
    "cdx_ig_8factor",
    "fft_check",
];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::RandomStream;

    fn unit_sample(d: usize) -> FactorSample<f64> {
        FactorSample {
            z: vec![0.0; d],
            w: vec![1.0; d + 1],
            q: vec![],
        }
    }

    #[test]
    fn zero_threshold_gives_half() {
        let model = PortfolioModel::new(
            vec![0.3f64; 4],
            vec![0.0; 4],
            vec![1; 4],
            1.0,
            MvnParams::standard(1),
            DefaultDirection::Above,
        )
        .unwrap();
        let p = model.conditional_default_probs(&unit_sample(1)).unwrap();
        for v in p {
            assert_eq!(v, 0.5);
        }
    }

    #[test]
    fn base_threshold_conditional_probability() {
        // No systematic exposure, sigma_eps = 3, chi = 0.5 sqrt(250).
        let chi = 0.5 * 250f64.sqrt();
        let model = PortfolioModel::new(
            vec![0.0f64; 3],
            vec![chi; 3],
            vec![1; 3],
            3.0,
            MvnParams::standard(1),
            DefaultDirection::Above,
        )
        .unwrap();
        // Frozen from the erfc oracle: tail(2.635231383473649).
        let p = model.conditional_default_probs(&unit_sample(1)).unwrap();
        assert!((p[0] - 4.203997288624652e-3).abs() < 1e-12, "p={:e}", p[0]);

        let below = PortfolioModel::new(
            vec![0.0f64; 3],
            vec![chi; 3],
            vec![1; 3],
            3.0,
            MvnParams::standard(1),
            DefaultDirection::Below,
        )
        .unwrap();
        let pb = below.conditional_default_probs(&unit_sample(1)).unwrap();
        assert!((pb[0] + p[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_obligor_probability_is_zero_one() {
        let model = PortfolioModel::new(
            vec![1.0f64, 1.0],
            vec![0.5, -0.5],
            vec![1, 1],
            1.0,
            MvnParams::standard(1),
            DefaultDirection::Above,
        )
        .unwrap();
        let sample = FactorSample {
            z: vec![0.0],
            w: vec![1.0, 1.0],
            q: vec![],
        };
        let p = model.conditional_default_probs(&sample).unwrap();
        assert_eq!(p[0], 0.0); // threshold above the deterministic value
        assert_eq!(p[1], 1.0);
    }

    #[test]
    fn nan_inputs_rejected() {
        let model = PortfolioModel::new(
            vec![0.3f64],
            vec![0.0],
            vec![1],
            1.0,
            MvnParams::standard(1),
            DefaultDirection::Above,
        )
        .unwrap();
        let bad = FactorSample {
            z: vec![f64::NAN],
            w: vec![1.0, 1.0],
            q: vec![],
        };
        assert!(model.conditional_default_probs(&bad).is_err());
        let negw = FactorSample {
            z: vec![0.0],
            w: vec![-1.0, 1.0],
            q: vec![],
        };
        assert!(model.conditional_default_probs(&negw).is_err());
    }

    #[test]
    fn rejects_super_unit_loadings() {
        assert!(PortfolioModel::new(
            vec![0.9f64, 0.9],
            vec![0.0],
            vec![1],
            1.0,
            MvnParams::standard(2),
            DefaultDirection::Above,
        )
        .is_err());
    }

    #[test]
    fn exposure_profiles_match_the_ceiling_formula() {
        let five = exposure_profile(ExposureKind::FiveLevel, 250);
        assert_eq!(five[0], 1);
        assert_eq!(five[49], 1);
        assert_eq!(five[50], 4);
        assert_eq!(five[249], 25);
        let two = exposure_profile(ExposureKind::TwoLevel, 250);
        assert_eq!(two[124], 1);
        assert_eq!(two[125], 4);
        let equal = exposure_profile(ExposureKind::Equal, 7);
        assert_eq!(equal, vec![1; 7]);
    }

    #[test]
    fn tau_rounding_keeps_lattice_events() {
        assert_eq!(tau_from_fraction(250, 0.25), 62); // 62.5 -> complement of P(L <= 62)
        assert_eq!(tau_from_fraction(250, 0.3), 75);
        assert_eq!(tau_from_fraction(125, 0.01), 1);
        assert_eq!(tau_from_fraction(125, 0.05), 6);
        assert_eq!(tau_from_fraction(125, 0.2), 25);
    }

    #[test]
    fn preset_one_factor_thresholds() {
        let p = preset::<f64>("one_factor_t").unwrap();
        let chi = 0.5 * 250f64.sqrt();
        assert!(p
            .model
            .thresholds()
            .iter()
            .all(|t| (*t - chi).abs() < 1e-12));
        assert_eq!(p.model.groups().len(), 1);
        assert_eq!(p.model.groups()[0].count, 250);
        assert!(matches!(
            p.shock,
            ShockSpec::TCopula {
                sharing: Sharing::Shared,
                ..
            }
        ));
    }

    #[test]
    fn preset_cdx_loadings() {
        let p = preset::<f64>("cdx_ig_8factor").unwrap();
        let model = &p.model;
        for k in 0..model.n_obligors() {
            let row = &model.loadings()[k * 8..(k + 1) * 8];
            let nonzero: Vec<(usize, f64)> = row
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(i, v)| (i, *v))
                .collect();
            assert_eq!(nonzero.len(), 2);
            assert!((nonzero[0].1 - 0.41231056256176607).abs() < 1e-12);
            assert!((nonzero[1].1 - 0.2449489742783178).abs() < 1e-12);
            assert_eq!(nonzero[0].0, 0);
            assert_eq!(nonzero[1].0, 1 + (k % 7));
        }
        // Seven sector groups.
        assert_eq!(model.groups().len(), 7);
        assert!((model.idio_loadings()[0] - (1.0f64 - 0.23).sqrt()).abs() < 1e-12);
        assert_eq!(model.direction(), DefaultDirection::Below);
    }

    #[test]
    fn preset_three_factor_covariance_entry() {
        let p = preset::<f64>("three_factor_base").unwrap();
        let cov = p.model.factor_cov().covariance();
        assert!((cov[1] - 0.5 * 1.0 * 0.8).abs() < 1e-12);
        assert!((cov[5] - 0.5 * 0.8 * 0.5).abs() < 1e-12);
        assert!((cov[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unknown_preset_errors() {
        assert!(matches!(
            preset::<f64>("nope"),
            Err(Error::UnknownPreset(_))
        ));
    }

    #[test]
    fn shared_shock_w_q_identity() {
        let p = preset::<f64>("one_factor_t").unwrap();
        let mut rng = RandomStream::with_stream(51, 0).rng();
        for _ in 0..100 {
            let s = sample_factors(&p.model, &p.shock, &mut rng, None).unwrap();
            assert_eq!(s.q.len(), 1);
            assert_eq!(s.w.len(), 2);
            assert_eq!(s.w[0], s.w[1]);
            // w q = nu exactly up to float round-off of the division
            assert!((s.w[0] * s.q[0] - 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn shared_t_copula_harmonic_moment() {
        // E[1/W] = E[Q]/nu = 1 for Q ~ Gamma(nu/2, 1/2).
        let p = preset::<f64>("one_factor_t").unwrap();
        let n = 1_000_000usize;
        let mut sum = 0.0f64;
        for i in 0..n {
            let mut rng = RandomStream::with_stream(52, i as u64).rng();
            let s = sample_factors(&p.model, &p.shock, &mut rng, None).unwrap();
            sum += 1.0 / s.w[0];
        }
        let mean = sum / n as f64;
        // Var(Q/nu) = (nu/2)/(1/4)/nu^2 = 2/nu.
        let se = (2.0 / 4.0f64 / n as f64).sqrt();
        assert!((mean - 1.0).abs() < 4.0 * se, "mean={mean}");
    }

    #[test]
    fn degenerate_shock_w_is_one() {
        let p = preset::<f64>("fft_check").unwrap();
        let mut rng = RandomStream::with_stream(53, 0).rng();
        let s = sample_factors(&p.model, &p.shock, &mut rng, None).unwrap();
        assert_eq!(s.w, vec![1.0, 1.0]);
        assert!(s.q.is_empty());
    }

    #[test]
    fn gamma_direct_mean() {
        let components = vec![
            GammaParams::new(2.0f64, 0.5).unwrap(),
            GammaParams::new(2.0, 0.5).unwrap(),
        ];
        let shock = ShockSpec::GammaDirect { components };
        let model = PortfolioModel::new(
            vec![0.5f64; 4],
            vec![1.0; 4],
            vec![1; 4],
            1.0,
            MvnParams::standard(1),
            DefaultDirection::Above,
        )
        .unwrap();
        let n = 1_000_000usize;
        let mut sum = 0.0f64;
        for i in 0..n {
            let mut rng = RandomStream::with_stream(54, i as u64).rng();
            let s = sample_factors(&model, &shock, &mut rng, None).unwrap();
            sum += s.w[0];
        }
        let mean = sum / n as f64;
        let se = (8.0f64 / n as f64).sqrt();
        assert!((mean - 4.0).abs() < 4.0 * se, "mean={mean}");
    }

    #[test]
    fn thresholding_regenerated_latents_matches_conditional_probability() {
        let p = preset::<f64>("three_factor_base").unwrap();
        let mut rng = RandomStream::with_stream(55, 0).rng();
        let sample = sample_factors(&p.model, &p.shock, &mut rng, None).unwrap();
        let probs = p.model.conditional_default_probs(&sample).unwrap();
        let model = &p.model;
        let d = model.n_factors();
        let reps = 100_000usize;
        // Obligors are exchangeable here, so pool obligor 0 only.
        let k = 0usize;
        let mut hits = 0usize;
        let sys: f64 = (0..d)
            .map(|i| model.loadings()[k * d + i] * sample.w[i].sqrt() * sample.z[i])
            .sum();
        let mut erng = RandomStream::with_stream(55, 777).rng();
        for _ in 0..reps {
            let eps: f64 = crate::dist::sample_std_normal::<f64, _>(&mut erng) * model.idio_std();
            let x = sys + model.idio_loadings()[k] * sample.w[d].sqrt() * eps;
            if x > model.thresholds()[k] {
                hits += 1;
            }
        }
        let freq = hits as f64 / reps as f64;
        let se = (probs[k] * (1.0 - probs[k]) / reps as f64).sqrt();
        assert!(
            (freq - probs[k]).abs() < 4.0 * se.max(1e-6),
            "freq={freq} p={}",
            probs[k]
        );
    }

    #[test]
    fn exchangeable_preset_has_identical_group() {
        let p = preset::<f64>("one_factor_t").unwrap();
        let mut rng = RandomStream::with_stream(56, 0).rng();
        let sample = sample_factors(&p.model, &p.shock, &mut rng, None).unwrap();
        let probs = p.model.conditional_default_probs(&sample).unwrap();
        for v in &probs[1..] {
            assert_eq!(*v, probs[0]);
        }
    }
}
