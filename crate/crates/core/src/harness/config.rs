use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which inverse source problem: trace data (Neumann top) or flux data
/// (Dirichlet top).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Isp {
    #[serde(rename = "ISPn", alias = "ispn")]
    Ispn,
    #[serde(rename = "ISPd", alias = "ispd")]
    Ispd,
}

impl FromStr for Isp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ispn" | "n" => Ok(Isp::Ispn),
            "ispd" | "d" => Ok(Isp::Ispd),
            _ => Err(Error::Config(format!(
                "unknown problem `{s}` (expected ISPn or ISPd)"
            ))),
        }
    }
}

impl fmt::Display for Isp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Isp::Ispn => "ISPn",
            Isp::Ispd => "ISPd",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExampleId {
    #[serde(rename = "5.1")]
    Ex51,
    #[serde(rename = "5.2i")]
    Ex52i,
    #[serde(rename = "5.2ii")]
    Ex52ii,
    #[serde(rename = "5.3i")]
    Ex53i,
    #[serde(rename = "5.3ii")]
    Ex53ii,
    #[serde(rename = "custom")]
    Custom,
}

impl ExampleId {
    pub const ALL: [ExampleId; 5] = [
        Self::Ex51,
        Self::Ex52i,
        Self::Ex52ii,
        Self::Ex53i,
        Self::Ex53ii,
    ];

    /// The problem each example was designed for.
    pub fn default_isp(self) -> Isp {
        match self {
            Self::Ex53i | Self::Ex53ii => Isp::Ispd,
            _ => Isp::Ispn,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Ex51 => "5.1",
            Self::Ex52i => "5.2i",
            Self::Ex52ii => "5.2ii",
            Self::Ex53i => "5.3i",
            Self::Ex53ii => "5.3ii",
            Self::Custom => "custom",
        }
    }
}

impl FromStr for ExampleId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let id = match s.trim_start_matches("ex").trim_start_matches("Ex") {
            "5.1" => Self::Ex51,
            "5.2i" => Self::Ex52i,
            "5.2ii" => Self::Ex52ii,
            "5.3i" => Self::Ex53i,
            "5.3ii" => Self::Ex53ii,
            "custom" => Self::Custom,
            _ => return Err(Error::UnknownExample(s.to_string())),
        };
        Ok(id)
    }
}

impl fmt::Display for ExampleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One reconstruction experiment. Read from TOML; unset keys take the
/// defaults of the reported experiments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Defaults to the example's own problem.
    pub isp: Option<Isp>,
    pub example: ExampleId,
    pub alpha: f64,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "T")]
    pub t_final: f64,
    pub epsilon: f64,
    pub c_dp: f64,
    pub k_max: usize,
    pub seed: u64,
    /// Noise substream; sweeps assign one per cell.
    pub stream: u64,
    /// Exact data are computed on a mesh refined by this factor in space and time.
    pub refinement: usize,
    pub allow_inverse_crime: bool,
    /// Smoothing width (grid cells) for the fixed-point path.
    pub mollify: f64,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            isp: None,
            example: ExampleId::Ex51,
            alpha: 0.5,
            m: 100,
            n: 1000,
            t_final: 1.0,
            epsilon: 0.0,
            c_dp: crate::inversion::DEFAULT_C_DP,
            k_max: 50,
            seed: 20_200_901,
            stream: 0,
            refinement: 2,
            allow_inverse_crime: false,
            mollify: 2.0,
            out_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn isp(&self) -> Isp {
        self.isp.unwrap_or_else(|| self.example.default_isp())
    }

    /// Fills in defaults that depend on other fields.
    pub fn resolved(mut self) -> Self {
        self.isp = Some(self.isp());
        self
    }

    /// JSON echo embedded in every output.
    pub fn echo(&self) -> serde_json::Value {
        serde_json::to_value(self.clone().resolved()).unwrap_or(serde_json::Value::Null)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if self.m < 3 {
            return bad(format!("M must be ≥ 3, got {}", self.m));
        }
        if self.n < 1 {
            return bad("N must be ≥ 1".into());
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return bad(format!("T must be positive, got {}", self.t_final));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return bad(format!("noise level must be ≥ 0, got {}", self.epsilon));
        }
        if !(self.c_dp > 1.0) {
            return bad(format!(
                "discrepancy constant must exceed 1, got {}",
                self.c_dp
            ));
        }
        if self.k_max < 1 {
            return bad("K_max must be ≥ 1".into());
        }
        if self.mollify < 0.0 {
            return bad(format!(
                "mollification width must be ≥ 0, got {}",
                self.mollify
            ));
        }
        match self.refinement {
            0 => bad("refinement factor must be ≥ 1".into()),
            1 if !self.allow_inverse_crime => Err(Error::InverseCrime),
            _ => Ok(()),
        }
    }
}
