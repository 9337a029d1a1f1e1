//! Strict TOML run configuration.
//!
//! Unknown keys are rejected outright; numeric fields are validated against
//! the model invariants before any sampling starts.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use tiltmc::dist::{GammaParams, MvnParams};
use tiltmc::engine::{ExperimentConfig, LossLevel, RunMode, TiltMask};
use tiltmc::portfolio::{
    exposure_profile, preset, DefaultDirection, ExposureKind, PortfolioModel, Sharing, ShockSpec,
};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shock: Option<ShockSection>,
    pub experiment: ExperimentSection,
    #[serde(default, skip_serializing_if = "is_default_output")]
    pub output: OutputSection,
}

fn is_default_output(o: &OutputSection) -> bool {
    *o == OutputSection::default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    /// Uniform loading applied to every obligor/factor pair.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loading: Option<f64>,
    /// Full n x d loading matrix.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loadings: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<Vec<f64>>,
    /// "equal" | "two_level" | "five_level"
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exposures: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_eps: Option<f64>,
    /// "above" | "below"
    #[serde(skip_serializing_if = "Option::is_none")]
    pub direction: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub factor_cov: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShockSection {
    /// "t_copula" | "gamma" | "degenerate"
    pub variant: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu: Option<Vec<f64>>,
    /// "shared" | "independent"
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sharing: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b1: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b2: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Tilt blocks to search, e.g. ["mu", "eta"].
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tilt: Option<Vec<String>>,
    /// "crude" | "is" | "both"
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conditional_crude: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    /// "csv" | "tsv"
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<String>,
}

/// Everything a `run` invocation needs, resolved and validated.
#[derive(Debug)]
pub struct ResolvedRun {
    pub label: String,
    pub model: PortfolioModel<f64>,
    pub shock: ShockSpec<f64>,
    pub config: ExperimentConfig<f64>,
    pub mode: RunMode,
    pub out_path: PathBuf,
    pub delimiter: char,
    pub config_hash: u64,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("config parse error: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn resolve(&self) -> Result<ResolvedRun, CliError> {
        let cfg_err = |m: String| CliError::Config(m);
        let (label, model, shock, preset_mask, preset_b, preset_b1, preset_b2) = match &self
            .model
            .preset
        {
            Some(name) => {
                let explicit = [
                    self.model.n.is_some(),
                    self.model.d.is_some(),
                    self.model.loading.is_some(),
                    self.model.loadings.is_some(),
                    self.model.threshold.is_some(),
                    self.model.thresholds.is_some(),
                    self.model.sigma_eps.is_some(),
                    self.model.direction.is_some(),
                    self.model.factor_cov.is_some(),
                ];
                if explicit.iter().any(|b| *b) {
                    return Err(cfg_err(format!(
                        "model.preset = \"{name}\" conflicts with explicit model fields"
                    )));
                }
                let mut p =
                    preset::<f64>(name).map_err(|e| cfg_err(format!("model.preset: {e}")))?;
                if let Some(kind) = &self.model.exposures {
                    // Exposure kind may override a preset's profile.
                    let kind = parse_exposures(kind)?;
                    let exposures = exposure_profile(kind, p.model.n_obligors());
                    p.model = PortfolioModel::new(
                        p.model.loadings().to_vec(),
                        p.model.thresholds().to_vec(),
                        exposures,
                        p.model.idio_std(),
                        p.model.factor_cov().clone(),
                        p.model.direction(),
                    )
                    .map_err(|e| cfg_err(format!("model: {e}")))?;
                }
                if self.shock.is_some() {
                    let d = p.model.n_factors();
                    let shock = self.shock.as_ref().unwrap().resolve(d)?;
                    (p.name, p.model, shock, p.mask, p.b, p.b1, p.b2)
                } else {
                    (p.name, p.model, p.shock, p.mask, p.b, p.b1, p.b2)
                }
            }
            None => {
                let n = self
                    .model
                    .n
                    .ok_or_else(|| cfg_err("model.n is required".into()))?;
                let d = self
                    .model
                    .d
                    .ok_or_else(|| cfg_err("model.d is required".into()))?;
                if n == 0 || d == 0 {
                    return Err(cfg_err("model.n and model.d must be positive".into()));
                }
                let loadings = match (&self.model.loading, &self.model.loadings) {
                    (Some(_), Some(_)) => {
                        return Err(cfg_err(
                            "set model.loading or model.loadings, not both".into(),
                        ))
                    }
                    (Some(l), None) => vec![*l; n * d],
                    (None, Some(rows)) => {
                        if rows.len() != n || rows.iter().any(|r| r.len() != d) {
                            return Err(cfg_err(format!(
                                "model.loadings must be {n} rows of {d} entries"
                            )));
                        }
                        rows.iter().flatten().copied().collect()
                    }
                    (None, None) => {
                        return Err(cfg_err(
                            "one of model.loading / model.loadings is required".into(),
                        ))
                    }
                };
                let thresholds = match (&self.model.threshold, &self.model.thresholds) {
                    (Some(_), Some(_)) => {
                        return Err(cfg_err(
                            "set model.threshold or model.thresholds, not both".into(),
                        ))
                    }
                    (Some(t), None) => vec![*t; n],
                    (None, Some(ts)) => {
                        if ts.len() != n {
                            return Err(cfg_err(format!("model.thresholds must have {n} entries")));
                        }
                        ts.clone()
                    }
                    (None, None) => {
                        return Err(cfg_err(
                            "one of model.threshold / model.thresholds is required".into(),
                        ))
                    }
                };
                let kind = match &self.model.exposures {
                    Some(k) => parse_exposures(k)?,
                    None => ExposureKind::Equal,
                };
                let sigma_eps = self
                    .model
                    .sigma_eps
                    .ok_or_else(|| cfg_err("model.sigma_eps is required".into()))?;
                let direction = match self.model.direction.as_deref() {
                    None | Some("above") => DefaultDirection::Above,
                    Some("below") => DefaultDirection::Below,
                    Some(other) => {
                        return Err(cfg_err(format!(
                            "model.direction must be \"above\" or \"below\", got \"{other}\""
                        )))
                    }
                };
                let factor_cov = match &self.model.factor_cov {
                    Some(rows) => {
                        if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                            return Err(cfg_err(format!("model.factor_cov must be {d}x{d}")));
                        }
                        MvnParams::new(vec![0.0; d], rows.iter().flatten().copied().collect())
                            .map_err(|e| cfg_err(format!("model.factor_cov: {e}")))?
                    }
                    None => MvnParams::standard(d),
                };
                let model = PortfolioModel::new(
                    loadings,
                    thresholds,
                    exposure_profile(kind, n),
                    sigma_eps,
                    factor_cov,
                    direction,
                )
                .map_err(|e| cfg_err(format!("model: {e}")))?;
                let shock = self
                    .shock
                    .as_ref()
                    .ok_or_else(|| cfg_err("[shock] section is required".into()))?
                    .resolve(d)?;
                (
                    "custom".to_string(),
                    model,
                    shock,
                    TiltMask::MU_ETA,
                    0.0,
                    5_000,
                    10_000,
                )
            }
        };

        let exp = &self.experiment;
        let loss = match (exp.b, exp.tau) {
            (Some(_), Some(_)) => {
                return Err(cfg_err(
                    "set experiment.b or experiment.tau, not both".into(),
                ))
            }
            (Some(b), None) => LossLevel::Fraction(b),
            (None, Some(t)) => LossLevel::Tau(t),
            (None, None) => {
                if self.model.preset.is_some() {
                    LossLevel::Fraction(preset_b)
                } else {
                    return Err(cfg_err(
                        "one of experiment.b / experiment.tau is required".into(),
                    ));
                }
            }
        };
        let mask = match &exp.tilt {
            Some(names) => parse_tilt_mask(names)?,
            None => preset_mask,
        };
        let mode = match exp.mode.as_deref() {
            None | Some("is") => RunMode::Is,
            Some("crude") => RunMode::Crude,
            Some("both") => RunMode::Both,
            Some(other) => {
                return Err(cfg_err(format!(
                    "experiment.mode must be crude|is|both, got \"{other}\""
                )))
            }
        };
        let config = ExperimentConfig {
            b1: exp.b1.unwrap_or(preset_b1),
            b2: exp.b2.unwrap_or(preset_b2),
            eps: exp.eps.unwrap_or(1e-4),
            max_iter: exp.max_iter.unwrap_or(20),
            seed: exp.seed.unwrap_or(0),
            mask,
            loss,
            conditional_crude: exp.conditional_crude.unwrap_or(false),
        };
        config
            .validate()
            .map_err(|e| cfg_err(format!("experiment: {e}")))?;
        let delimiter = match self.output.format.as_deref() {
            None | Some("csv") => ',',
            Some("tsv") => '\t',
            Some(other) => {
                return Err(cfg_err(format!(
                    "output.format must be csv|tsv, got \"{other}\""
                )))
            }
        };
        let out_path = self
            .output
            .path
            .clone()
            .unwrap_or_else(|| PathBuf::from("report.csv"));
        // The hash identifies the experiment, not where its report lands.
        let mut hashed = self.clone();
        hashed.output = OutputSection::default();
        let config_hash = fnv64(hashed.to_toml().as_bytes());
        Ok(ResolvedRun {
            label,
            model,
            shock,
            config,
            mode,
            out_path,
            delimiter,
            config_hash,
        })
    }
}

impl ShockSection {
    fn resolve(&self, d: usize) -> Result<ShockSpec<f64>, CliError> {
        let cfg_err = |m: String| CliError::Config(m);
        let spec = match self.variant.as_str() {
            "t_copula" => {
                let nu_raw = self
                    .nu
                    .clone()
                    .ok_or_else(|| cfg_err("shock.nu is required for t_copula".into()))?;
                let sharing = match self.sharing.as_deref() {
                    None | Some("independent") => Sharing::Independent,
                    Some("shared") => Sharing::Shared,
                    Some(other) => {
                        return Err(cfg_err(format!(
                            "shock.sharing must be shared|independent, got \"{other}\""
                        )))
                    }
                };
                let nu = if nu_raw.len() == 1 {
                    vec![nu_raw[0]; d + 1]
                } else {
                    nu_raw
                };
                ShockSpec::TCopula { nu, sharing }
            }
            "gamma" => {
                let alpha = self
                    .alpha
                    .clone()
                    .ok_or_else(|| cfg_err("shock.alpha is required for gamma".into()))?;
                let beta = self
                    .beta
                    .clone()
                    .ok_or_else(|| cfg_err("shock.beta is required for gamma".into()))?;
                if alpha.len() != beta.len() {
                    return Err(cfg_err("shock.alpha and shock.beta lengths differ".into()));
                }
                let expand = |v: Vec<f64>| {
                    if v.len() == 1 {
                        vec![v[0]; d + 1]
                    } else {
                        v
                    }
                };
                let components = expand(alpha)
                    .into_iter()
                    .zip(expand(beta))
                    .map(|(a, b)| GammaParams::new(a, b))
                    .collect::<tiltmc::Result<Vec<_>>>()
                    .map_err(|e| cfg_err(format!("shock: {e}")))?;
                ShockSpec::GammaDirect { components }
            }
            "degenerate" => ShockSpec::Degenerate,
            other => {
                return Err(cfg_err(format!(
                    "shock.variant must be t_copula|gamma|degenerate, got \"{other}\""
                )))
            }
        };
        spec.validate(d)
            .map_err(|e| cfg_err(format!("shock: {e}")))?;
        Ok(spec)
    }
}

fn parse_exposures(kind: &str) -> Result<ExposureKind, CliError> {
    match kind {
        "equal" => Ok(ExposureKind::Equal),
        "two_level" => Ok(ExposureKind::TwoLevel),
        "five_level" => Ok(ExposureKind::FiveLevel),
        other => Err(CliError::Config(format!(
            "model.exposures must be equal|two_level|five_level, got \"{other}\""
        ))),
    }
}

fn parse_tilt_mask(names: &[String]) -> Result<TiltMask, CliError> {
    let mut mask = TiltMask::NONE;
    for name in names {
        match name.as_str() {
            "mu" => mask.mu = true,
            "sigma" => mask.sigma = true,
            "theta" => mask.theta = true,
            "eta" => mask.eta = true,
            other => {
                return Err(CliError::Config(format!(
                    "experiment.tilt entries must be mu|sigma|theta|eta, got \"{other}\""
                )))
            }
        }
    }
    Ok(mask)
}

/// Deterministic 64-bit FNV-1a, used to stamp reports with a config hash.
pub fn fnv64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}
