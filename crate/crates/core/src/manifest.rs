//! Verification dataset manifests.
//!
//! ```toml
//! [parameters]
//! taper_width = 25
//! family = "haar"
//! retained_scales = [3, 4, 5, 6]
//! n_b = 50
//! seed = 1
//!
//! [[classes]]
//! label = "0527"
//! date = "2011-05-27"
//! kind = "C"
//! members = ["members/0527_01.grid", "members/0527_02.grid"]
//! observation = "obs/0527.grid"
//! ```
//!
//! Relative paths resolve against the manifest's directory.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lws::Smoother;
use crate::ndwt::DEFAULT_TAPER_WIDTH;
use crate::pipeline::TransformParams;
use crate::verify::DEFAULT_SAMPLES;

/// Precipitation regime tag of a class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClassKind {
    /// convective
    C,
    /// frontal
    F,
    /// mixed
    FC,
}

impl fmt::Display for ClassKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClassKind::C => "C",
            ClassKind::F => "F",
            ClassKind::FC => "FC",
        })
    }
}

fn default_taper() -> usize {
    DEFAULT_TAPER_WIDTH
}

fn default_family() -> String {
    "haar".into()
}

fn default_smoother() -> String {
    "box".into()
}

fn default_samples() -> usize {
    DEFAULT_SAMPLES
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Parameters {
    #[serde(default = "default_taper")]
    pub taper_width: usize,
    #[serde(default)]
    pub edge_factor: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_dims: Option<[usize; 2]>,
    #[serde(default = "default_family")]
    pub family: String,
    /// Number of decomposition scales `J`; derived from the padded grid if
    /// absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scales: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retained_scales: Option<Vec<u32>>,
    #[serde(default = "default_smoother")]
    pub smoother: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_vec: Option<Vec<usize>>,
    #[serde(default = "default_samples")]
    pub n_b: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_true")]
    pub leave_class_out: bool,
}

impl Default for Parameters {
    fn default() -> Self {
        Self {
            taper_width: DEFAULT_TAPER_WIDTH,
            edge_factor: 0.0,
            target_dims: None,
            family: default_family(),
            scales: None,
            retained_scales: None,
            smoother: default_smoother(),
            n_vec: None,
            n_b: DEFAULT_SAMPLES,
            seed: 0,
            leave_class_out: true,
        }
    }
}

/// Command-line values that replace manifest parameters.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub taper_width: Option<usize>,
    pub target_dims: Option<[usize; 2]>,
    pub family: Option<String>,
    pub scales: Option<u32>,
    pub retained_scales: Option<Vec<u32>>,
    pub smoother: Option<String>,
    pub n_vec: Option<Vec<usize>>,
    pub n_b: Option<usize>,
    pub seed: Option<u64>,
}

impl Parameters {
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.taper_width {
            self.taper_width = v;
        }
        if let Some(v) = o.target_dims {
            self.target_dims = Some(v);
        }
        if let Some(v) = &o.family {
            self.family = v.clone();
        }
        if let Some(v) = o.scales {
            self.scales = Some(v);
        }
        if let Some(v) = &o.retained_scales {
            self.retained_scales = Some(v.clone());
        }
        if let Some(v) = &o.smoother {
            self.smoother = v.clone();
        }
        if let Some(v) = &o.n_vec {
            self.n_vec = Some(v.clone());
        }
        if let Some(v) = o.n_b {
            self.n_b = v;
        }
        if let Some(v) = o.seed {
            self.seed = v;
        }
    }

    pub fn transform_params(&self) -> Result<TransformParams> {
        Ok(TransformParams {
            taper_width: self.taper_width,
            edge_factor: self.edge_factor,
            target_dims: self.target_dims.map(|[r, c]| (r, c)),
            family: self.family.parse()?,
            scales: self.scales,
            retained: self.retained_scales.clone(),
            smoother: self.smoother.parse::<Smoother>()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassEntry {
    pub label: String,
    #[serde(default)]
    pub date: String,
    pub kind: ClassKind,
    pub members: Vec<PathBuf>,
    pub observation: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    #[serde(default)]
    pub parameters: Parameters,
    pub classes: Vec<ClassEntry>,
    /// Directory relative paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Manifest {
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self> {
        let mut m: Manifest = toml::from_str(text).map_err(|e| Error::Config(format!("manifest: {e}")))?;
        m.base_dir = base_dir.to_path_buf();
        m.validate()?;
        Ok(m)
    }

    /// Parses and validates a manifest, including that every referenced file
    /// exists.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let m = Self::from_toml_str(&text, base).map_err(|e| e.context(path.display().to_string()))?;
        m.check_files()?;
        Ok(m)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn n_members(&self) -> usize {
        self.classes.first().map_or(0, |c| c.members.len())
    }

    fn validate(&self) -> Result<()> {
        if self.classes.len() < 2 {
            return Err(Error::Validation(format!(
                "manifest lists {} classes, need at least 2",
                self.classes.len()
            )));
        }
        let n_e = self.n_members();
        for (i, c) in self.classes.iter().enumerate() {
            if c.members.len() != n_e {
                return Err(Error::Validation(format!(
                    "class '{}' has {} members but class '{}' has {n_e}",
                    c.label,
                    c.members.len(),
                    self.classes[0].label
                )));
            }
            if self.classes[..i].iter().any(|o| o.label == c.label) {
                return Err(Error::Validation(format!("duplicate class label '{}'", c.label)));
            }
        }
        if n_e < 3 {
            return Err(Error::Validation(format!(
                "cross-validation needs at least 3 members per class, got {n_e}"
            )));
        }
        Ok(())
    }

    fn check_files(&self) -> Result<()> {
        for c in &self.classes {
            for p in c.members.iter().chain(std::iter::once(&c.observation)) {
                let full = self.resolve(p);
                if !full.is_file() {
                    return Err(Error::Validation(format!(
                        "class '{}': file {} does not exist",
                        c.label,
                        full.display()
                    )));
                }
            }
        }
        Ok(())
    }
}
