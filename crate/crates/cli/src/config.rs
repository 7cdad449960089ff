//! TOML run configuration.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use nlrd_core::attractor::{ProbeOptions, ShootOptions};
use nlrd_core::equilibria::{NewtonOptions, SearchPlan};
use nlrd_core::problem::{DiffusionClaims, DiffusionModulator, Forcing, ProblemSpec, ReactionTerm};
use nlrd_core::{ErrorNorm, FlowConfig, NonlocalCoefficient, SpectralBasis};
use serde::Deserialize;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid value for `{key}`: {message}")]
    Invalid { key: &'static str, message: String },
    #[error("referenced file `{key}` = {path} does not exist")]
    MissingFile { key: &'static str, path: PathBuf },
}

fn invalid(key: &'static str, message: impl ToString) -> ConfigError {
    ConfigError::Invalid { key, message: message.to_string() }
}

/// A length written as a number, `"pi"` or `"<k>pi"`.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Length {
    Value(f64),
    Symbolic(SymbolicLength),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymbolicLength(pub f64);

impl<'de> Deserialize<'de> for SymbolicLength {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let t = s.trim();
        let factor = t
            .strip_suffix("pi")
            .map(|k| k.trim().trim_end_matches('*').trim())
            .ok_or_else(|| serde::de::Error::custom(format!("expected a number, \"pi\" or \"<k>pi\", got {s:?}")))?;
        let k = if factor.is_empty() {
            1.0
        } else {
            factor.parse::<f64>().map_err(|_| serde::de::Error::custom(format!("bad multiple of pi: {s:?}")))?
        };
        Ok(SymbolicLength(k * PI))
    }
}

impl Length {
    pub fn value(self) -> f64 {
        match self {
            Length::Value(v) => v,
            Length::Symbolic(s) => s.0,
        }
    }
}

impl Default for Length {
    fn default() -> Self {
        Length::Value(PI)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReactionSection {
    Cubic {
        lambda: f64,
        #[serde(default = "default_split")]
        split: f64,
    },
    Linear {
        slope: f64,
    },
}

fn default_split() -> f64 {
    0.5
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClaimOverrides {
    pub linear_growth: Option<bool>,
    pub monotone_as: Option<bool>,
    pub aprime_nonneg: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffusionKindName {
    Constant,
    Affine,
    Saturating,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffusionSection {
    pub kind: DiffusionKindName,
    pub m: f64,
    #[serde(default)]
    pub c: f64,
    #[serde(default)]
    pub claims: ClaimOverrides,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ForcingSection {
    Zero,
    Constant {
        value: f64,
    },
    /// Two columns `x value` per line; `#` starts a comment.
    Grid {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    #[serde(default)]
    pub length: Length,
    pub reaction: ReactionSection,
    pub diffusion: DiffusionSection,
    #[serde(default = "zero_forcing")]
    pub forcing: ForcingSection,
}

fn zero_forcing() -> ForcingSection {
    ForcingSection::Zero
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscretizationSection {
    pub n_modes: usize,
    pub quad_size: Option<usize>,
}

impl Default for DiscretizationSection {
    fn default() -> Self {
        Self { n_modes: 16, quad_size: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientName {
    Frozen,
    FixedPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorNormName {
    PerStep,
    PerUnitStep,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSection {
    pub dt_init: Option<f64>,
    pub dt_min: Option<f64>,
    pub dt_max: Option<f64>,
    pub rel_tol: Option<f64>,
    pub abs_tol: Option<f64>,
    pub t_end: Option<f64>,
    pub coefficient: Option<CoefficientName>,
    pub error_norm: Option<ErrorNormName>,
    pub record_every: Option<usize>,
    pub sample_interval: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    /// Leading sine coefficients; missing ones are zero.
    pub coefficients: Option<Vec<f64>>,
    /// Random direction (from the analysis seed) scaled to this L² norm.
    pub random_l2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    #[serde(default = "d_newton_tol")]
    pub newton_tol: f64,
    #[serde(default = "d_omega_tol")]
    pub omega_tol: f64,
    #[serde(default = "d_t_max")]
    pub t_max: f64,
    #[serde(default = "d_probes")]
    pub probes: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "d_tail_start")]
    pub tail_start: f64,
    #[serde(default = "d_probe_time")]
    pub probe_time: f64,
    pub equilibria_file: Option<PathBuf>,
}

fn d_newton_tol() -> f64 {
    1e-10
}
fn d_omega_tol() -> f64 {
    1e-6
}
fn d_t_max() -> f64 {
    200.0
}
fn d_probes() -> usize {
    20
}
fn d_tail_start() -> f64 {
    20.0
}
fn d_probe_time() -> f64 {
    30.0
}

impl Default for AnalysisSection {
    fn default() -> Self {
        toml::from_str("").expect("all analysis fields have defaults")
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSection,
    #[serde(default)]
    pub discretization: DiscretizationSection,
    #[serde(default)]
    pub flow: FlowSection,
    #[serde(default)]
    pub initial: InitialSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub output: OutputSection,
    /// Directory relative paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let mut cfg: RunConfig = toml::from_str(text)
            .map_err(|e| ConfigError::Parse { path: path.to_path_buf(), message: e.to_string() })?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.check_files()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::from_toml(&text, path)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn check_files(&self) -> Result<(), ConfigError> {
        if let ForcingSection::Grid { path } = &self.problem.forcing {
            let p = self.resolve(path);
            if !p.is_file() {
                return Err(ConfigError::MissingFile { key: "problem.forcing.path", path: p });
            }
        }
        if let Some(path) = &self.analysis.equilibria_file {
            let p = self.resolve(path);
            if !p.is_file() {
                return Err(ConfigError::MissingFile { key: "analysis.equilibria_file", path: p });
            }
        }
        Ok(())
    }

    pub fn spec(&self) -> Result<ProblemSpec, ConfigError> {
        let p = &self.problem;
        let reaction = match p.reaction {
            ReactionSection::Cubic { lambda, split } => ReactionTerm::cubic(lambda, split),
            ReactionSection::Linear { slope } => ReactionTerm::linear(slope),
        }
        .map_err(|e| invalid("problem.reaction", e))?;
        let d = &p.diffusion;
        let diffusion = match d.kind {
            DiffusionKindName::Constant => DiffusionModulator::constant(d.m),
            DiffusionKindName::Affine => DiffusionModulator::affine(d.m, d.c),
            DiffusionKindName::Saturating => DiffusionModulator::saturating(d.m, d.c),
        }
        .map_err(|e| invalid("problem.diffusion", e))?;
        let claims = DiffusionClaims {
            linear_growth: d.claims.linear_growth.unwrap_or(diffusion.claims.linear_growth),
            monotone_as: d.claims.monotone_as.unwrap_or(diffusion.claims.monotone_as),
            aprime_nonneg: d.claims.aprime_nonneg.unwrap_or(diffusion.claims.aprime_nonneg),
        };
        let diffusion = diffusion.with_claims(claims);
        let forcing = match &p.forcing {
            ForcingSection::Zero => Forcing::Zero,
            ForcingSection::Constant { value } => Forcing::Constant(*value),
            ForcingSection::Grid { path } => {
                let (x, v) = read_grid(&self.resolve(path))?;
                Forcing::samples(x, v).map_err(|e| invalid("problem.forcing", e))?
            }
        };
        ProblemSpec::new(reaction, diffusion, forcing, p.length.value()).map_err(|e| invalid("problem", e))
    }

    pub fn basis(&self) -> Result<SpectralBasis, ConfigError> {
        let d = self.discretization;
        let q = d.quad_size.unwrap_or(4 * d.n_modes);
        SpectralBasis::new(d.n_modes, self.problem.length.value(), q).map_err(|e| invalid("discretization", e))
    }

    pub fn flow(&self) -> Result<FlowConfig, ConfigError> {
        let f = self.flow;
        let base = FlowConfig::default();
        let cfg = FlowConfig {
            dt_init: f.dt_init.unwrap_or(base.dt_init),
            dt_min: f.dt_min.unwrap_or(base.dt_min),
            dt_max: f.dt_max.unwrap_or(base.dt_max),
            rel_tol: f.rel_tol.unwrap_or(base.rel_tol),
            abs_tol: f.abs_tol.unwrap_or(base.abs_tol),
            t_end: f.t_end.unwrap_or(base.t_end),
            coefficient: match f.coefficient {
                Some(CoefficientName::Frozen) => NonlocalCoefficient::Frozen,
                Some(CoefficientName::FixedPoint) => NonlocalCoefficient::FixedPoint,
                None => base.coefficient,
            },
            error_norm: match f.error_norm {
                Some(ErrorNormName::PerStep) => ErrorNorm::PerStep,
                Some(ErrorNormName::PerUnitStep) => ErrorNorm::PerUnitStep,
                None => base.error_norm,
            },
            record_every: f.record_every.unwrap_or(base.record_every),
            sample_interval: f.sample_interval.or(base.sample_interval),
        };
        cfg.validate().map_err(|e| invalid("flow", e))?;
        Ok(cfg)
    }

    pub fn search_plan(&self) -> Result<SearchPlan, ConfigError> {
        let tol = self.analysis.newton_tol;
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(invalid("analysis.newton_tol", "must be positive"));
        }
        Ok(SearchPlan { newton: NewtonOptions { tol, ..NewtonOptions::default() }, ..SearchPlan::default() })
    }

    pub fn shoot_options(&self) -> Result<ShootOptions, ConfigError> {
        let a = &self.analysis;
        if !(a.omega_tol > 0.0) {
            return Err(invalid("analysis.omega_tol", "must be positive"));
        }
        if !(a.t_max > 0.0 && a.t_max.is_finite()) {
            return Err(invalid("analysis.t_max", "must be positive and finite"));
        }
        Ok(ShootOptions { t_max: a.t_max, omega_tol: a.omega_tol, min_time: 0.0, flow: self.flow()? })
    }

    pub fn probe_options(&self) -> Result<ProbeOptions, ConfigError> {
        let a = &self.analysis;
        if a.probe_time > a.t_max {
            return Err(invalid("analysis.probe_time", "exceeds analysis.t_max"));
        }
        let shoot = ShootOptions { min_time: a.probe_time, ..self.shoot_options()? };
        Ok(ProbeOptions { count: a.probes, seed: a.seed, tail_start: a.tail_start, shoot })
    }

    /// Initial coefficients for `simulate` and `verify`.
    pub fn initial_state(&self, n: usize) -> Result<Vec<f64>, ConfigError> {
        let init = &self.initial;
        match (&init.coefficients, init.random_l2) {
            (Some(_), Some(_)) => Err(invalid("initial", "give either coefficients or random_l2, not both")),
            (Some(c), None) => {
                if c.len() > n {
                    return Err(invalid("initial.coefficients", format!("{} values for {n} modes", c.len())));
                }
                let mut g = c.clone();
                g.resize(n, 0.0);
                Ok(g)
            }
            (None, r) => {
                let r = r.unwrap_or(5.0);
                if !(r >= 0.0 && r.is_finite()) {
                    return Err(invalid("initial.random_l2", "must be finite and nonnegative"));
                }
                let dir = nlrd_core::attractor::probe_states(n, 1.0, 1, self.analysis.seed).remove(0);
                let norm = nlrd_core::spectral::l2_norm(&dir);
                Ok(dir.into_iter().map(|v| v * r / norm).collect())
            }
        }
    }
}

fn read_grid(path: &Path) -> Result<(Vec<f64>, Vec<f64>), ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    let mut x = Vec::new();
    let mut v = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).collect();
        let parse = |s: &str| s.parse::<f64>().ok();
        match cols.as_slice() {
            [a, b] if parse(a).is_some() && parse(b).is_some() => {
                x.push(parse(a).unwrap());
                v.push(parse(b).unwrap());
            }
            _ => {
                return Err(ConfigError::Parse {
                    path: path.to_path_buf(),
                    message: format!("line {}: expected two numbers", i + 1),
                })
            }
        }
    }
    Ok((x, v))
}
