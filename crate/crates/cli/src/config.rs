//! Run configuration: defaults, JSON file, command-line overrides.

use std::path::{Path, PathBuf};

use revhom::bvp::BvpSettings;
use revhom::continuation::ContinuationSettings;
use revhom::duffing::{resonance_beta1, ExampleParams, REGISTRY_NAME};
use revhom::melnikov::Mode;
use revhom::monodromy::{Chart, ChartLoop};
use revhom::quadrature::Window;
use revhom::Coupling;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Resonance,
    Melnikov,
    Solve,
    Continue,
    Monodromy,
    Figures,
}

impl Kind {
    pub fn name(&self) -> &'static str {
        match self {
            Kind::Resonance => "resonance",
            Kind::Melnikov => "melnikov",
            Kind::Solve => "solve",
            Kind::Continue => "continue",
            Kind::Monodromy => "monodromy",
            Kind::Figures => "figures",
        }
    }
}

/// Parameters of the example system. `beta1` defaults to the resonance
/// value for (s, ℓ); `ell` may list several indices for `resonance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamConfig {
    pub s: f64,
    pub beta1: Option<f64>,
    pub beta2: f64,
    pub beta3: f64,
    pub ell: Vec<u32>,
}

impl Default for ParamConfig {
    fn default() -> Self {
        ParamConfig { s: 2.0, beta1: None, beta2: 0.0, beta3: 0.0, ell: vec![0] }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Directory for artifact files; `None` prints the main artifact only.
    /// Not recorded in file headers, so outputs do not depend on where
    /// they are written.
    #[serde(skip_serializing)]
    pub dir: Option<PathBuf>,
    pub svg: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub kind: Option<Kind>,
    pub system: String,
    pub params: ParamConfig,
    pub coupling: Coupling,
    pub mode: Option<Mode>,
    /// Fixed quadrature half-width; `None` grows the window automatically.
    pub window: Option<f64>,
    pub bvp: BvpSettings,
    pub continuation: ContinuationSettings,
    /// Continuation parameter and range.
    pub param: String,
    pub range: Option<[f64; 2]>,
    /// Switch onto the bifurcating branches at a β₁ branch point.
    pub switch: bool,
    /// Monodromy blocks (1, 2).
    pub blocks: Vec<u8>,
    pub epsilons: Vec<f64>,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            kind: None,
            system: REGISTRY_NAME.to_string(),
            params: ParamConfig::default(),
            coupling: Coupling::Beta1,
            mode: None,
            window: None,
            bvp: BvpSettings::default(),
            continuation: ContinuationSettings::default(),
            param: "beta2".to_string(),
            range: None,
            switch: true,
            blocks: vec![1, 2],
            epsilons: vec![1e-3, 1e-4, 1e-5],
            output: OutputConfig::default(),
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| usage(format!("invalid config {}: {e}", path.display())))
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let kind = self.kind.ok_or_else(|| usage("no experiment kind given"))?;
        if self.system != REGISTRY_NAME {
            return Err(usage(format!(
                "experiments are available for the `{REGISTRY_NAME}` system, got `{}`",
                self.system
            )));
        }
        if !(self.params.s > 0.0) {
            return Err(usage(format!("s must be positive, got {}", self.params.s)));
        }
        if self.params.ell.is_empty() {
            return Err(usage("at least one ℓ is required"));
        }
        if kind != Kind::Resonance && kind != Kind::Figures && self.params.ell.len() != 1 {
            return Err(usage(format!("`{}` takes a single ℓ", kind.name())));
        }
        if let Some(w) = self.window {
            if !(w > 0.0) {
                return Err(usage("window half-width must be positive"));
            }
        }
        self.bvp.validate()?;
        self.continuation.validate()?;
        if let Some([a, b]) = self.range {
            if !(a < b) {
                return Err(usage(format!("range [{a}, {b}] is empty")));
            }
        }
        if self.epsilons.is_empty() {
            return Err(usage("at least one chart radius is required"));
        }
        for &e in &self.epsilons {
            ChartLoop::new(Chart::Plus, e)?;
        }
        if self.blocks.is_empty() || self.blocks.iter().any(|b| *b != 1 && *b != 2) {
            return Err(usage("blocks must be drawn from {1, 2}"));
        }
        if kind == Kind::Melnikov && self.mode.is_none() {
            return Err(usage("`melnikov` needs --mode saddle-node|transcritical|pitchfork"));
        }
        Ok(())
    }

    pub fn ell(&self) -> u32 {
        self.params.ell[0]
    }

    pub fn window(&self) -> Window {
        self.window.map(Window::Fixed).unwrap_or(Window::Auto)
    }

    pub fn beta1(&self) -> Result<f64, CliError> {
        match self.params.beta1 {
            Some(b) => Ok(b),
            None => Ok(resonance_beta1(self.params.s, self.ell())?),
        }
    }

    pub fn example_params(&self) -> Result<ExampleParams, CliError> {
        Ok(ExampleParams {
            s: self.params.s,
            beta1: self.beta1()?,
            beta2: self.params.beta2,
            beta3: self.params.beta3,
            ell: self.ell(),
        })
    }
}
