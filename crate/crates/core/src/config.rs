//! Scenario configuration, read from TOML. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analytic::{make_gaussian_curl, make_oscillatory, AnalyticField};
use crate::error::{Error, Result};
use crate::field::GridSpec;
use crate::pressure::LpeOptions;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Where reports go when `--out` is not given.
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub field: FieldConfig,
    #[serde(default)]
    pub operator: OperatorConfig,
    #[serde(default)]
    pub tolerance: TolerancePolicy,
}

fn default_seed() -> u64 {
    20240611
}

fn default_output() -> PathBuf {
    PathBuf::from("nlp-out")
}

/// Base cube `[-half_width, half_width]³` with `n` nodes per axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub half_width: f64,
    pub n: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { half_width: 4.0, n: 32 }
    }
}

impl GridConfig {
    pub fn spec(&self) -> Result<GridSpec> {
        GridSpec::cube(self.half_width, self.n)
    }

    /// Same box with `n` scaled by `factor`.
    pub fn refined(&self, factor: f64) -> GridConfig {
        GridConfig { half_width: self.half_width, n: (self.n as f64 * factor).round() as usize }
    }
}

/// Initial velocity for the scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "factory", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldConfig {
    GaussianCurl { amplitude: f64, width: f64, center: [f64; 3] },
    Oscillatory { amplitude: f64, wavenumber: f64 },
    Zero {},
}

impl Default for FieldConfig {
    fn default() -> Self {
        FieldConfig::GaussianCurl { amplitude: 0.05, width: 0.8, center: [0.0; 3] }
    }
}

impl FieldConfig {
    pub fn build(&self) -> Result<AnalyticField> {
        match *self {
            FieldConfig::GaussianCurl { amplitude, width, center } => make_gaussian_curl(amplitude, width, center),
            FieldConfig::Oscillatory { amplitude, wavenumber } => Ok(make_oscillatory(amplitude, wavenumber)),
            FieldConfig::Zero {} => make_gaussian_curl(0.0, 1.0, [0.0; 3]),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OperatorConfig {
    /// Ball radius `R` of the pressure expansion.
    pub radius: f64,
    /// Ball center `x₀`.
    pub center: [f64; 3],
    /// Mollifier width; `None` means four grid spacings.
    pub eps: Option<f64>,
    /// Far-field truncation; `None` means `16R`.
    pub rho_max: Option<f64>,
    pub padding: f64,
    /// Duhamel quadrature nodes.
    pub time_nodes: usize,
    pub t_final: f64,
    pub time_steps: usize,
    /// Sign of the parasitic pressure `p = sign·x·g′(t)`.
    pub parasitic_sign: f64,
    pub rebased_cutoff: bool,
}

impl Default for OperatorConfig {
    fn default() -> Self {
        Self {
            radius: 1.0,
            center: [0.5, -0.3, 0.2],
            eps: None,
            rho_max: None,
            padding: 2.0,
            time_nodes: 64,
            t_final: 0.25,
            time_steps: 16,
            parasitic_sign: -1.0,
            rebased_cutoff: false,
        }
    }
}

impl OperatorConfig {
    pub fn lpe_options(&self) -> LpeOptions {
        LpeOptions { rho_max: self.rho_max, padding: self.padding, rebased: self.rebased_cutoff, ..LpeOptions::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TolerancePolicy {
    /// Picard stopping tolerance; the mild residual bound is twice this.
    pub picard: f64,
    pub max_iter: usize,
    /// Bound on the weak residual with the expansion pressure.
    pub nse: f64,
    /// Constant in the local energy bound `C(h² + dt)`.
    pub energy_constant: f64,
    /// Largest admitted spread of the a priori constants across radii.
    pub apriori_spread: f64,
}

impl Default for TolerancePolicy {
    fn default() -> Self {
        Self { picard: 1e-6, max_iter: 30, nse: 1e-2, energy_constant: 4e-3, apriori_spread: 4.0 }
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Checks that do not depend on which suite runs.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.grid.n < 8 || !(self.grid.half_width > 0.0) {
            return bad(format!("grid needs n >= 8 and half_width > 0, got {:?}", self.grid));
        }
        let op = &self.operator;
        if !(op.radius > 0.0) || !(op.t_final > 0.0) || op.time_steps == 0 || op.time_nodes == 0 {
            return bad("radius, t_final, time_steps and time_nodes must be positive".into());
        }
        if op.padding < 1.0 {
            return bad(format!("padding must be at least 1, got {}", op.padding));
        }
        if op.parasitic_sign != 1.0 && op.parasitic_sign != -1.0 {
            return bad(format!("parasitic_sign must be 1 or -1, got {}", op.parasitic_sign));
        }
        if let Some(e) = op.eps {
            if !(e > 0.0) {
                return bad(format!("eps must be positive, got {e}"));
            }
        }
        let t = &self.tolerance;
        if !(t.picard > 0.0) || !(t.nse > 0.0) || t.max_iter == 0 {
            return bad("tolerances must be positive".into());
        }
        Ok(())
    }

    /// The bundled default scenario.
    pub fn default_scenario() -> Self {
        Self {
            name: "default".into(),
            seed: default_seed(),
            output_dir: default_output(),
            grid: GridConfig::default(),
            field: FieldConfig::default(),
            operator: OperatorConfig::default(),
            tolerance: TolerancePolicy::default(),
        }
    }
}
