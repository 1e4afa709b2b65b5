//! Synthetic verification dataset with known class structure.
//!
//! Every class shares a smooth background spectrum and adds an energy peak
//! at one or two `(scale, direction)` pairs inside scales 3 to 6. Members and
//! the observation of a class are independent draws from the same process.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io::write_grid;
use crate::manifest::{ClassEntry, ClassKind, Manifest, Parameters};
use crate::sim::{simulate, SpectrumSpec};
use crate::wavelet::{stack_entry, Direction, Family, FilterPair};

#[derive(Debug, Clone, PartialEq)]
pub struct DemoConfig {
    pub n_classes: usize,
    pub n_members: usize,
    /// Side length of the square fields (power of two).
    pub size: usize,
    pub seed: u64,
    /// Peak energy as a multiple of the background at that scale.
    pub peak: f64,
}

impl Default for DemoConfig {
    fn default() -> Self {
        Self {
            n_classes: 14,
            n_members: 20,
            size: 128,
            seed: 2011,
            peak: 8.0,
        }
    }
}

/// Scales carrying class peaks.
pub const PEAK_SCALES: [u32; 4] = [3, 4, 5, 6];

/// Scales of the spectrum vector used by the demo manifest.
pub const DEMO_RETAINED: [u32; 6] = [2, 3, 4, 5, 6, 7];

fn background(j: u32) -> f64 {
    0.25 * 2f64.powf(j as f64 / 2.0)
}

/// `(scale, direction)` peaks of class `c`. The first twelve classes get one
/// peak each, later classes combine two.
pub fn class_peaks(c: usize) -> Vec<(u32, Direction)> {
    let n = 3 * PEAK_SCALES.len();
    let pick = |k: usize| {
        let (j, l) = stack_entry(k % n);
        (j + PEAK_SCALES[0] - 1, l)
    };
    if c < n {
        vec![pick(c)]
    } else {
        let k = c - n;
        vec![pick(2 * k), pick(2 * k + 7)]
    }
}

pub fn class_spec(c: usize, size: usize, peak: f64) -> Result<SpectrumSpec> {
    let scales = size.ilog2();
    let mut energies: Vec<f64> = (0..3 * scales as usize).map(|k| background(stack_entry(k).0)).collect();
    for (j, l) in class_peaks(c) {
        energies[crate::wavelet::stack_index(j, l)] *= 1.0 + peak;
    }
    SpectrumSpec::from_vector(scales, &energies)
}

fn class_kind(peaks: &[(u32, Direction)]) -> ClassKind {
    match peaks {
        [_, _, ..] => ClassKind::FC,
        [(j, _)] if *j <= 4 => ClassKind::C,
        _ => ClassKind::F,
    }
}

/// Seed of member `m` (or the observation when `m == None`) of class `c`.
fn field_seed(base: u64, c: usize, m: Option<usize>) -> u64 {
    let slot = m.map_or(0, |m| m as u64 + 1);
    base.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ ((c as u64) << 32 | slot)
}

/// Writes member and observation grids, per-class spectrum specs and
/// `manifest.toml` into `dir`; returns the manifest path.
pub fn generate(dir: &Path, cfg: &DemoConfig) -> Result<PathBuf> {
    if cfg.n_classes < 2 || cfg.n_members < 3 {
        return Err(Error::Argument("demo needs at least 2 classes and 3 members".into()));
    }
    if !cfg.size.is_power_of_two() || cfg.size < 64 {
        return Err(Error::Argument(format!("demo field size {} must be a power of two >= 64", cfg.size)));
    }
    for sub in ["members", "observations", "specs"] {
        let d = dir.join(sub);
        fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }
    let filter = FilterPair::new(Family::Haar);
    let labels: Vec<String> = (0..cfg.n_classes).map(|c| format!("class{:02}", c + 1)).collect();
    let specs = (0..cfg.n_classes)
        .map(|c| class_spec(c, cfg.size, cfg.peak))
        .collect::<Result<Vec<_>>>()?;
    for (label, spec) in labels.iter().zip(&specs) {
        let p = dir.join("specs").join(format!("{label}.toml"));
        fs::write(&p, spec.to_toml_string()).map_err(|e| Error::io(&p, e))?;
    }

    let jobs: Vec<(usize, Option<usize>)> = (0..cfg.n_classes)
        .flat_map(|c| (0..cfg.n_members).map(move |m| (c, Some(m))).chain(std::iter::once((c, None))))
        .collect();
    let rel_paths = jobs
        .par_iter()
        .map(|&(c, m)| {
            let rel = match m {
                Some(m) => PathBuf::from("members").join(format!("{}_m{:02}.grid", labels[c], m + 1)),
                None => PathBuf::from("observations").join(format!("{}.grid", labels[c])),
            };
            let field = simulate(&specs[c], (cfg.size, cfg.size), field_seed(cfg.seed, c, m), &filter)?;
            write_grid(&field, &dir.join(&rel))?;
            Ok(rel)
        })
        .collect::<Result<Vec<_>>>()?;

    let classes = (0..cfg.n_classes)
        .map(|c| {
            let chunk = &rel_paths[c * (cfg.n_members + 1)..(c + 1) * (cfg.n_members + 1)];
            ClassEntry {
                label: labels[c].clone(),
                date: format!("2011-06-{:02}", c + 1),
                kind: class_kind(&class_peaks(c)),
                members: chunk[..cfg.n_members].to_vec(),
                observation: chunk[cfg.n_members].clone(),
            }
        })
        .collect();
    let manifest = Manifest {
        parameters: Parameters {
            taper_width: 8,
            retained_scales: Some(DEMO_RETAINED.to_vec()),
            seed: cfg.seed,
            ..Parameters::default()
        },
        classes,
        base_dir: dir.to_path_buf(),
    };
    let path = dir.join("manifest.toml");
    fs::write(&path, manifest.to_toml_string()?).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
