//! Run configuration: a TOML file with the sections `[geometry]`,
//! `[constitutive]`, `[regime]`, `[data]`, `[discretization]` and `[sweep]`.
//!
//! Unknown keys are rejected. Omitted keys of `[data]`, `[discretization]`
//! and `[sweep]` take documented defaults; [`RunConfig::resolve`] fills
//! every optional value so the resolved configuration can be echoed into
//! output headers.

use serde::{Deserialize, Serialize};
use thinflow::constitutive::{Capillary, PhaseClosures, RelPerm};
use thinflow::problem::{
    Coefficients, Geometry, LateralFlow, ProblemSpec, SaturationData, SineProfile, TimePoly,
};
use thinflow::verify::{SweepConfig, DEFAULT_FIT_POINTS, DEFAULT_LADDER, DEFAULT_SLACK};

/// Error raised while reading a configuration file.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    /// The text is not valid TOML or does not match the schema.
    #[error("config error at line {line}{}: {message}", key.as_ref().map(|k| format!(" (key `{k}`)")).unwrap_or_default())]
    Parse {
        /// 1-based line of the offending entry.
        line: usize,
        /// Key named on that line, if any.
        key: Option<String>,
        /// Description from the parser.
        message: String,
    },
    /// A value is missing or inconsistent after parsing.
    #[error("config error: {0}")]
    Invalid(String),
}

/// Complete run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Cylinder geometry.
    pub geometry: GeometrySection,
    /// Phase closures.
    pub constitutive: ConstitutiveSection,
    /// Regime exponents.
    pub regime: RegimeSection,
    /// Coefficients, boundary and initial data.
    #[serde(default)]
    pub data: DataSection,
    /// Grid resolutions and output selection.
    #[serde(default)]
    pub discretization: DiscretizationSection,
    /// ε-sweep settings.
    #[serde(default)]
    pub sweep: SweepSection,
}

/// `[geometry]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    /// Length ℓ.
    pub length: f64,
    /// Thickness ε of single runs.
    pub epsilon: f64,
    /// Final time T.
    pub horizon: f64,
}

/// Relative-permeability family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RelPermFamily {
    /// Corey power laws.
    #[default]
    Corey,
}

/// Capillary-pressure family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CapillaryFamily {
    /// `p_e (1 − S)`.
    #[default]
    Linear,
    /// `p_e (exp(−γS) − exp(−γ))`.
    Exponential,
}

/// `[constitutive]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstitutiveSection {
    /// Relative-permeability family.
    #[serde(default)]
    pub relperm: RelPermFamily,
    /// Water exponent.
    #[serde(default = "two")]
    pub n_w: f64,
    /// Oil exponent.
    #[serde(default = "two")]
    pub n_o: f64,
    /// Water viscosity.
    #[serde(default = "one")]
    pub visc_w: f64,
    /// Oil viscosity.
    #[serde(default = "one")]
    pub visc_o: f64,
    /// Capillary-pressure family.
    #[serde(default)]
    pub capillary: CapillaryFamily,
    /// Entry pressure `p_e`.
    pub entry_pressure: f64,
    /// Decay rate γ of the exponential family.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capillary_decay: Option<f64>,
}

/// `[regime]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeSection {
    /// Lateral-flux exponent α.
    pub alpha: f64,
    /// Transverse-permeability exponent β.
    pub beta: f64,
}

/// `[data]`. Time functions are lists of coefficients of `t, t², …`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    /// Longitudinal permeability at the ends.
    pub k1: f64,
    /// Relative mid-length variation of `k1`.
    pub k1_amplitude: f64,
    /// Transverse permeability at the ends.
    pub k_perp: f64,
    /// Relative mid-length variation of `k_perp`.
    pub k_perp_amplitude: f64,
    /// Radial factor of the transverse permeability.
    pub k_perp_radial: f64,
    /// Tangential anisotropy of the cell tensor.
    pub swirl: f64,
    /// Porosity at the ends.
    pub porosity: f64,
    /// Relative mid-length variation of the porosity.
    pub porosity_amplitude: f64,
    /// Reduced pressure at `x = 0`.
    pub q0: Vec<f64>,
    /// Reduced pressure at `x = ℓ`.
    pub q_ell: Vec<f64>,
    /// Base saturation.
    pub s_base: f64,
    /// Interior bump of the initial saturation.
    pub s_bump: f64,
    /// Boundary rise at `x = 0`.
    pub s_rise_left: f64,
    /// Boundary rise at `x = ℓ`.
    pub s_rise_right: f64,
    /// Time profile of the boundary rise.
    pub s_rise_time: Vec<f64>,
    /// Amplitude of the lateral flow.
    pub lateral_amplitude: f64,
    /// Support `[a, b]` of the lateral flow; defaults to `[δ, ℓ − δ]`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lateral_support: Option<[f64; 2]>,
    /// Time profile of the lateral flow.
    pub lateral_time: Vec<f64>,
    /// Angular mode coefficient of the lateral flow.
    pub lateral_cos_mode: f64,
    /// Support margin δ; defaults to `0.1 ℓ`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub support_delta: Option<f64>,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            k1: 1.0,
            k1_amplitude: 0.0,
            k_perp: 1.0,
            k_perp_amplitude: 0.0,
            k_perp_radial: 0.0,
            swirl: 0.0,
            porosity: 0.3,
            porosity_amplitude: 0.0,
            q0: vec![1.0],
            q_ell: vec![0.0],
            s_base: 0.4,
            s_bump: 0.0,
            s_rise_left: 0.0,
            s_rise_right: 0.0,
            s_rise_time: vec![0.0, 1.0],
            lateral_amplitude: 0.0,
            lateral_support: None,
            lateral_time: vec![1.0],
            lateral_cos_mode: 0.0,
            support_delta: None,
        }
    }
}

/// `[discretization]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiscretizationSection {
    /// Longitudinal cells.
    pub n_x: usize,
    /// Time steps.
    pub n_t: usize,
    /// Rings of the reference mesh.
    pub n_r: usize,
    /// Rings of the cell mesh (`solve-cell`).
    pub cell_n_r: usize,
    /// Sectors of the cell mesh (`solve-cell`).
    pub cell_n_theta: usize,
    /// Position of the `solve-cell` cross-section; defaults to `ℓ/2`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cell_x: Option<f64>,
    /// Time of the `solve-cell` problem; defaults to `T`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cell_t: Option<f64>,
    /// Time levels written by `solve-reference` and `reconstruct` are the
    /// multiples of this stride plus the final level; defaults to `n_t/4`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_stride: Option<usize>,
}

impl Default for DiscretizationSection {
    fn default() -> Self {
        Self {
            n_x: 200,
            n_t: 200,
            n_r: 32,
            cell_n_r: 64,
            cell_n_theta: 64,
            cell_x: None,
            cell_t: None,
            output_stride: None,
        }
    }
}

/// `[sweep]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    /// Strictly decreasing ε values.
    pub ladder: Vec<f64>,
    /// Number of finest ε values used by the fit.
    pub fit_points: usize,
    /// Verdict slack.
    pub slack: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            ladder: DEFAULT_LADDER.to_vec(),
            fit_points: DEFAULT_FIT_POINTS,
            slack: DEFAULT_SLACK,
        }
    }
}

fn one() -> f64 {
    1.0
}

fn two() -> f64 {
    2.0
}

/// 1-based line containing byte `offset`, and the key assigned on it.
fn locate(text: &str, offset: usize) -> (usize, Option<String>) {
    let offset = offset.min(text.len());
    let line = text[..offset].matches('\n').count() + 1;
    let content = text.lines().nth(line - 1).unwrap_or("");
    let key = content
        .split_once('=')
        .map(|(k, _)| k.trim().trim_matches('"').to_string())
        .filter(|k| !k.is_empty() && !k.starts_with('['));
    (line, key)
}

/// Parses and resolves a configuration.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut cfg: RunConfig = toml::from_str(text).map_err(|e| {
        let (line, key) = e.span().map(|s| locate(text, s.start)).unwrap_or((1, None));
        ConfigError::Parse {
            line,
            key,
            message: e.message().trim().to_string(),
        }
    })?;
    cfg.resolve()?;
    Ok(cfg)
}

impl RunConfig {
    /// Fills every optional value with its default.
    pub fn resolve(&mut self) -> Result<(), ConfigError> {
        let l = self.geometry.length;
        let delta = *self.data.support_delta.get_or_insert(0.1 * l);
        self.data.lateral_support.get_or_insert([delta, l - delta]);
        self.discretization.cell_x.get_or_insert(0.5 * l);
        self.discretization
            .cell_t
            .get_or_insert(self.geometry.horizon);
        let stride = (self.discretization.n_t / 4).max(1);
        let stride = *self.discretization.output_stride.get_or_insert(stride);
        if stride == 0 {
            return Err(ConfigError::Invalid(
                "`output_stride` must be positive".into(),
            ));
        }
        match (
            self.constitutive.capillary,
            self.constitutive.capillary_decay,
        ) {
            (CapillaryFamily::Exponential, None) => Err(ConfigError::Invalid(
                "`capillary_decay` is required by the exponential capillary family".into(),
            )),
            (CapillaryFamily::Linear, Some(_)) => Err(ConfigError::Invalid(
                "`capillary_decay` only applies to the exponential capillary family".into(),
            )),
            _ => Ok(()),
        }
    }

    /// Resolved configuration as TOML text.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).unwrap_or_default()
    }

    /// Problem specification described by the configuration.
    pub fn problem_spec(&self) -> ProblemSpec {
        let c = &self.constitutive;
        let d = &self.data;
        let l = self.geometry.length;
        let delta = d.support_delta.unwrap_or(0.1 * l);
        let support = d.lateral_support.unwrap_or([delta, l - delta]);
        let relperm = |n: f64| match c.relperm {
            RelPermFamily::Corey => RelPerm::Corey { exponent: n },
        };
        let capillary = match c.capillary {
            CapillaryFamily::Linear => Capillary::Linear {
                entry_pressure: c.entry_pressure,
            },
            CapillaryFamily::Exponential => Capillary::Exponential {
                entry_pressure: c.entry_pressure,
                decay: c.capillary_decay.unwrap_or(f64::NAN),
            },
        };
        ProblemSpec {
            geometry: Geometry {
                length: l,
                epsilon: self.geometry.epsilon,
                horizon: self.geometry.horizon,
            },
            closures: PhaseClosures {
                relperm_w: relperm(c.n_w),
                relperm_o: relperm(c.n_o),
                visc_w: c.visc_w,
                visc_o: c.visc_o,
                capillary,
            },
            coefficients: Coefficients {
                k1: SineProfile {
                    base: d.k1,
                    amplitude: d.k1_amplitude,
                },
                k_perp: SineProfile {
                    base: d.k_perp,
                    amplitude: d.k_perp_amplitude,
                },
                k_perp_radial: d.k_perp_radial,
                swirl: d.swirl,
                porosity: SineProfile {
                    base: d.porosity,
                    amplitude: d.porosity_amplitude,
                },
            },
            q0: TimePoly::new(d.q0.clone()),
            q_ell: TimePoly::new(d.q_ell.clone()),
            saturation: SaturationData {
                base: d.s_base,
                bump: d.s_bump,
                rise_left: d.s_rise_left,
                rise_right: d.s_rise_right,
                rise_time: TimePoly::new(d.s_rise_time.clone()),
            },
            lateral: LateralFlow {
                amplitude: d.lateral_amplitude,
                support: (support[0], support[1]),
                time: TimePoly::new(d.lateral_time.clone()),
                cos_mode: d.lateral_cos_mode,
            },
            support_delta: delta,
            alpha: self.regime.alpha,
            beta: self.regime.beta,
        }
    }

    /// Sweep settings with the configured grid.
    pub fn sweep_config(&self) -> SweepConfig {
        SweepConfig {
            ladder: self.sweep.ladder.clone(),
            n_x: self.discretization.n_x,
            n_t: self.discretization.n_t,
            n_r: self.discretization.n_r,
            fit_points: self.sweep.fit_points,
            slack: self.sweep.slack,
        }
    }
}
