//! End-to-end transforms and the command implementations behind the CLI.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::SystemTime;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result, ResultExt};
use crate::field::Field2D;
use crate::io::{encode_grid, read_field, write_csv_grid, write_grid, write_spectrum_csv};
use crate::lda::ClassedDataset;
use crate::lws::{
    average_spectrum, bias_correct, default_retained, select_scales, smooth_periodogram, standardize, AvgSpectrum,
    LocalWaveletSpectrum, Smoother,
};
use crate::manifest::{Manifest, Overrides};
use crate::ndwt::{default_target, max_scales, ndwt_padded, periodogram, taper_and_pad, DEFAULT_TAPER_WIDTH};
use crate::report::{render_csvs, write_report, ClassSummary, ReportFile};
use crate::sim::{simulate, SpectrumSpec};
use crate::verify::{cross_validate, max_vectors, CvConfig};
use crate::wavelet::{operator_matrix, Family, FilterPair, OperatorMatrix};

/// Largest number of scales chosen when none is given.
pub const DEFAULT_MAX_SCALES: u32 = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct TransformParams {
    pub taper_width: usize,
    pub edge_factor: f64,
    /// Padded grid size; the smallest power of two holding field and taper
    /// margin if absent.
    pub target_dims: Option<(usize, usize)>,
    pub family: Family,
    /// Decomposition depth `J`; `min(log2 of the padded size, 10)` if absent.
    pub scales: Option<u32>,
    /// Scales kept in the spectrum vector; `3..=J-2` if absent.
    pub retained: Option<Vec<u32>>,
    pub smoother: Smoother,
}

impl Default for TransformParams {
    fn default() -> Self {
        Self {
            taper_width: DEFAULT_TAPER_WIDTH,
            edge_factor: 0.0,
            target_dims: None,
            family: Family::Haar,
            scales: None,
            retained: None,
            smoother: Smoother::AdaptiveBox,
        }
    }
}

impl TransformParams {
    /// Stable text form, part of the spectrum cache key.
    pub fn fingerprint(&self) -> String {
        format!(
            "taper={};edge={:e};target={:?};family={};scales={:?};retained={:?};smoother={}",
            self.taper_width, self.edge_factor, self.target_dims, self.family, self.scales, self.retained, self.smoother
        )
    }

    pub fn padded_dims(&self, dims: (usize, usize)) -> (usize, usize) {
        self.target_dims
            .unwrap_or_else(|| default_target(dims, self.taper_width))
    }

    pub fn scales_for(&self, padded: (usize, usize)) -> Result<u32> {
        let max = max_scales(padded);
        match self.scales {
            Some(j) if j == 0 || j > max => Err(Error::Argument(format!(
                "{j} scales requested but a {}x{} grid supports 1..={max}",
                padded.0, padded.1
            ))),
            Some(j) => Ok(j),
            None => Ok(max.min(DEFAULT_MAX_SCALES)),
        }
    }

    pub fn retained_for(&self, scales: u32) -> Vec<u32> {
        self.retained.clone().unwrap_or_else(|| default_retained(scales))
    }
}

#[derive(Debug, Clone)]
pub struct TransformOutput {
    pub local: LocalWaveletSpectrum,
    /// Region average at every scale, not standardized.
    pub average: AvgSpectrum,
}

/// Runs the transform chain with operator matrices shared across fields.
#[derive(Debug)]
pub struct Transformer {
    pub params: TransformParams,
    pub filter: FilterPair,
    ops: Mutex<BTreeMap<u32, Arc<OperatorMatrix>>>,
}

impl Transformer {
    pub fn new(params: TransformParams) -> Self {
        Self {
            filter: FilterPair::new(params.family),
            params,
            ops: Mutex::new(BTreeMap::new()),
        }
    }

    pub fn operator(&self, scales: u32) -> Result<Arc<OperatorMatrix>> {
        if let Some(op) = self.ops.lock().expect("operator cache").get(&scales) {
            return Ok(op.clone());
        }
        let op = Arc::new(operator_matrix(scales, &self.filter)?);
        self.ops
            .lock()
            .expect("operator cache")
            .entry(scales)
            .or_insert_with(|| op.clone());
        Ok(op)
    }

    /// Taper/pad, transform, periodogram, smoothing, bias correction and
    /// averaging over the original field region.
    pub fn run(&self, field: &Field2D) -> Result<TransformOutput> {
        let p = &self.params;
        let target = p.padded_dims(field.dims());
        let padded = taper_and_pad(field, p.taper_width, target, p.edge_factor).context("taper")?;
        let scales = p.scales_for(target).context("transform")?;
        let coeffs = ndwt_padded(&padded, scales, &self.filter).context("transform")?;
        let smoothed = smooth_periodogram(periodogram(coeffs), &p.smoother).context("smoothing")?;
        let op = self.operator(scales).context("operator matrix")?;
        let local = bias_correct(smoothed, &op).context("bias correction")?;
        let mut average = average_spectrum(&local, padded.region).context("averaging")?;
        average.source = field.name.clone();
        Ok(TransformOutput { local, average })
    }

    /// Retained, standardized spectrum vector.
    pub fn vector(&self, field: &Field2D) -> Result<AvgSpectrum> {
        let out = self.run(field)?;
        self.finish(&out.average)
    }

    pub fn finish(&self, average: &AvgSpectrum) -> Result<AvgSpectrum> {
        let scales = *average.scales.last().expect("at least one scale");
        let retained = self.params.retained_for(scales);
        let selected = select_scales(average, &retained).context("scale selection")?;
        standardize(&selected).context("standardization")
    }

    /// Like [`Transformer::vector`], reusing a cached result for identical
    /// field contents and parameters.
    pub fn cached_vector(&self, field: &Field2D, cache: &SpectrumCache) -> Result<AvgSpectrum> {
        let key = cache.key(field, &self.params);
        if let Some(hit) = cache.get(&key) {
            return Ok(hit);
        }
        let v = self.vector(field)?;
        cache.put(&key, &v)?;
        Ok(v)
    }
}

/// Spectrum vectors stored as JSON under the SHA-256 of the grid encoding
/// and the transform parameters.
#[derive(Debug, Clone)]
pub struct SpectrumCache {
    pub dir: PathBuf,
}

impl SpectrumCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Self { dir })
    }

    pub fn key(&self, field: &Field2D, params: &TransformParams) -> String {
        let mut h = Sha256::new();
        h.update(encode_grid(field));
        h.update(params.fingerprint().as_bytes());
        hex::encode(h.finalize())
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    pub fn get(&self, key: &str) -> Option<AvgSpectrum> {
        let text = fs::read_to_string(self.path(key)).ok()?;
        match serde_json::from_str(&text) {
            Ok(v) => Some(v),
            Err(e) => {
                log::warn!("ignoring unreadable cache entry {key}: {e}");
                None
            }
        }
    }

    /// Writes through a temporary file so concurrent readers never see a
    /// partial entry.
    pub fn put(&self, key: &str, value: &AvgSpectrum) -> Result<()> {
        let tmp = self.dir.join(format!("{key}.{}.tmp", std::process::id()));
        let text = serde_json::to_string(value).map_err(|e| Error::Serialization(e.to_string()))?;
        fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
        let dst = self.path(key);
        fs::rename(&tmp, &dst).map_err(|e| Error::io(&dst, e))
    }
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| "field".into(), |s| s.to_string_lossy().into_owned())
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Files written by [`cmd_transform`].
#[derive(Debug, Clone)]
pub struct TransformFiles {
    pub average: PathBuf,
    pub spectrum: PathBuf,
    pub local: Vec<PathBuf>,
}

/// Writes `<stem>.average.csv` (all scales), `<stem>.spectrum.csv`
/// (retained scales, standardized) and, with `export_local`, one
/// direction-averaged local spectrum grid per scale.
pub fn cmd_transform(
    input: &Path,
    params: &TransformParams,
    out_dir: &Path,
    export_local: bool,
) -> Result<TransformFiles> {
    let field = read_field(input)?;
    create_dir(out_dir)?;
    let t = Transformer::new(params.clone());
    let out = t.run(&field).map_err(|e| e.context(input.display().to_string()))?;
    let name = stem(input);
    let average = out_dir.join(format!("{name}.average.csv"));
    write_spectrum_csv(&out.average, &average)?;

    let mut local = Vec::new();
    if export_local {
        let r = out.local.region;
        for j in 1..=out.local.scales {
            let grid = out.local.direction_average(j);
            let crop = grid
                .slice(ndarray::s![r.row0..r.row0 + r.rows, r.col0..r.col0 + r.cols])
                .to_owned();
            let p = out_dir.join(format!("{name}.lws_j{j}.csv"));
            write_csv_grid(&crop, &p)?;
            local.push(p);
        }
    }

    let selected = t
        .finish(&out.average)
        .map_err(|e| e.context(input.display().to_string()))?;
    let spectrum = out_dir.join(format!("{name}.spectrum.csv"));
    write_spectrum_csv(&selected, &spectrum)?;
    Ok(TransformFiles {
        average,
        spectrum,
        local,
    })
}

pub fn cmd_simulate(spec: &Path, dims: (usize, usize), seed: u64, family: Family, out: &Path) -> Result<Field2D> {
    let spec = SpectrumSpec::load(spec)?;
    let field = simulate(&spec, dims, seed, &FilterPair::new(family))?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write_grid(&field, out)?;
    Ok(field)
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub overrides: Overrides,
    pub out_dir: PathBuf,
    /// Directory of the spectrum cache; `None` disables caching.
    pub cache_dir: Option<PathBuf>,
}

fn mean_vector(vs: &[Vec<f64>]) -> Vec<f64> {
    let mut m = vec![0.0; vs[0].len()];
    for v in vs {
        for (a, b) in m.iter_mut().zip(v) {
            *a += b / vs.len() as f64;
        }
    }
    m
}

/// Spectra for every field of a manifest, cross-validation, scores and
/// attribution. Writes `report.json` and the CSV views to `out_dir`.
pub fn cmd_verify(manifest_path: &Path, opts: &VerifyOptions) -> Result<ReportFile> {
    let mut manifest = Manifest::load(manifest_path)?;
    manifest.parameters.apply(&opts.overrides);
    let params = manifest.parameters.transform_params()?;
    let t = Transformer::new(params);
    let cache = opts.cache_dir.as_ref().map(SpectrumCache::new).transpose()?;

    let mut jobs: Vec<(usize, Option<usize>, PathBuf)> = Vec::new();
    for (i, c) in manifest.classes.iter().enumerate() {
        for (j, m) in c.members.iter().enumerate() {
            jobs.push((i, Some(j), manifest.resolve(m)));
        }
        jobs.push((i, None, manifest.resolve(&c.observation)));
    }
    log::info!("computing {} spectra", jobs.len());
    let vectors = jobs
        .par_iter()
        .map(|(i, j, path)| {
            let label = &manifest.classes[*i].label;
            let what = match j {
                Some(j) => format!("class '{label}' member {} ({})", j + 1, path.display()),
                None => format!("class '{label}' observation ({})", path.display()),
            };
            let run = || -> Result<AvgSpectrum> {
                let field = read_field(path)?;
                match &cache {
                    Some(c) => t.cached_vector(&field, c),
                    None => t.vector(&field),
                }
            };
            run().map_err(|e| e.context(what))
        })
        .collect::<Result<Vec<_>>>()?;

    let first = read_field(&manifest.resolve(&manifest.classes[0].members[0]))?;
    let scales = t.params.scales_for(t.params.padded_dims(first.dims()))?;
    let retained = vectors[0].scales.clone();

    let n_e = manifest.n_members();
    let mut members = Vec::with_capacity(manifest.classes.len());
    let mut observations = Vec::with_capacity(manifest.classes.len());
    for chunk in vectors.chunks(n_e + 1) {
        members.push(chunk[..n_e].iter().map(|v| v.energies.clone()).collect::<Vec<_>>());
        observations.push(chunk[n_e].energies.clone());
    }
    let labels: Vec<String> = manifest.classes.iter().map(|c| c.label.clone()).collect();
    let data = ClassedDataset::new(labels, members, observations)?;

    let p = &manifest.parameters;
    let n_vec = p.n_vec.clone().unwrap_or_else(|| (1..=max_vectors(&data)).collect());
    let cfg = CvConfig {
        samples: p.n_b,
        n_vec,
        seed: p.seed,
        leave_class_out: p.leave_class_out,
    };
    log::info!(
        "cross-validating {} classes x {} members, p = {}, {} samples",
        data.n_classes(),
        data.n_members(),
        data.dim(),
        cfg.samples
    );
    let report = cross_validate(&data, &cfg)?;

    let classes = manifest
        .classes
        .iter()
        .enumerate()
        .map(|(i, c)| ClassSummary {
            label: c.label.clone(),
            date: c.date.clone(),
            kind: c.kind,
            mean_spectrum: mean_vector(&data.members[i]),
            observation_spectrum: data.observations[i].clone(),
        })
        .collect();
    let file = ReportFile {
        timestamp: humantime::format_rfc3339_seconds(SystemTime::now()).to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        parameters: manifest.parameters.clone(),
        scales,
        retained_scales: retained,
        classes,
        report,
    };
    create_dir(&opts.out_dir)?;
    write_report(&file, &opts.out_dir.join("report.json"))?;
    render_csvs(&file, &opts.out_dir)?;
    Ok(file)
}
