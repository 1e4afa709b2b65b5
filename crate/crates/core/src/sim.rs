//! Synthetic locally stationary wavelet fields and the spectrum /
//! autocovariance maps.
//!
//! A field is synthesised as `X(r) = sum_{j,l,u} w^l_j(u) xi^l_{j,u} psi^l_{j,u}(r)`
//! with independent standard Gaussian `xi` and `w = sqrt(S)`, truncated at
//! the spec's scale count and wrapped periodically on the grid. The sum is the
//! adjoint of the non-decimated transform, so it is evaluated with the same
//! filter cascade.
//!
//! Innovations come from ChaCha8 seeded with the user seed; layer
//! `(j, l)` draws from stream `3(j-1) + dir` in row-major order, so every
//! layer is reproducible on its own and layers can be generated in parallel.

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::{Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{is_power_of_two, Field2D};
use crate::ndwt::{adjoint_ndwt, max_scales, CoefficientPyramid};
use crate::wavelet::{stack_entry, stack_index, AutocorrBank, Direction, FilterPair, OperatorMatrix};

/// Spectral energy of one `(scale, direction)` layer.
#[derive(Debug, Clone, PartialEq)]
pub enum Amplitude {
    Constant(f64),
    /// Node values over rescaled coordinates `z in [0, 1]^2`, bilinearly
    /// interpolated. Node `(i, k)` sits at `(i / (n-1), k / (m-1))`.
    Grid(Array2<f64>),
}

impl Amplitude {
    pub fn at(&self, z: (f64, f64)) -> f64 {
        match self {
            Amplitude::Constant(v) => *v,
            Amplitude::Grid(g) => bilinear(g, z),
        }
    }

    fn values(&self) -> Box<dyn Iterator<Item = f64> + '_> {
        match self {
            Amplitude::Constant(v) => Box::new(std::iter::once(*v)),
            Amplitude::Grid(g) => Box::new(g.iter().copied()),
        }
    }

    fn is_zero(&self) -> bool {
        self.values().all(|v| v == 0.0)
    }
}

fn axis_weights(n: usize, z: f64) -> (usize, usize, f64) {
    if n == 1 {
        return (0, 0, 0.0);
    }
    let x = z.clamp(0.0, 1.0) * (n - 1) as f64;
    let i = (x.floor() as usize).min(n - 2);
    (i, i + 1, x - i as f64)
}

fn bilinear(g: &Array2<f64>, z: (f64, f64)) -> f64 {
    let (i0, i1, a) = axis_weights(g.nrows(), z.0);
    let (k0, k1, b) = axis_weights(g.ncols(), z.1);
    (1.0 - a) * ((1.0 - b) * g[[i0, k0]] + b * g[[i0, k1]]) + a * ((1.0 - b) * g[[i1, k0]] + b * g[[i1, k1]])
}

/// Prescribed local wavelet spectrum over scales `1..=scales`. Layers not
/// listed have zero energy.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSpec {
    pub scales: u32,
    components: BTreeMap<(u32, Direction), Amplitude>,
}

impl SpectrumSpec {
    pub fn new(scales: u32) -> Self {
        Self {
            scales,
            components: BTreeMap::new(),
        }
    }

    /// Spatially constant spectrum from `(scale, direction, energy)` triples.
    pub fn constant(scales: u32, entries: &[(u32, Direction, f64)]) -> Result<Self> {
        let mut spec = Self::new(scales);
        for &(j, l, e) in entries {
            spec.set(j, l, Amplitude::Constant(e))?;
        }
        Ok(spec)
    }

    /// Spatially constant spectrum from a stacked `3J` vector.
    pub fn from_vector(scales: u32, energies: &[f64]) -> Result<Self> {
        if energies.len() != 3 * scales as usize {
            return Err(Error::Argument(format!(
                "expected {} energies for {scales} scales, got {}",
                3 * scales,
                energies.len()
            )));
        }
        let mut spec = Self::new(scales);
        for (k, &e) in energies.iter().enumerate() {
            let (j, l) = stack_entry(k);
            spec.set(j, l, Amplitude::Constant(e))?;
        }
        Ok(spec)
    }

    pub fn set(&mut self, scale: u32, direction: Direction, amplitude: Amplitude) -> Result<()> {
        if scale == 0 || scale > self.scales {
            return Err(Error::Config(format!(
                "component scale {scale} outside 1..={}",
                self.scales
            )));
        }
        if let Amplitude::Grid(g) = &amplitude {
            if g.is_empty() {
                return Err(Error::Config("empty amplitude grid".into()));
            }
        }
        if let Some(v) = amplitude.values().find(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Config(format!(
                "spectral energy must be finite and nonnegative, got {v} at ({scale}, {direction})"
            )));
        }
        self.components.insert((scale, direction), amplitude);
        Ok(())
    }

    pub fn energy(&self, scale: u32, direction: Direction, z: (f64, f64)) -> f64 {
        self.components
            .get(&(scale, direction))
            .map_or(0.0, |a| a.at(z))
    }

    /// Stacked `3J` spectrum vector at `z`.
    pub fn vector_at(&self, z: (f64, f64)) -> Vec<f64> {
        (0..3 * self.scales as usize)
            .map(|k| {
                let (j, l) = stack_entry(k);
                self.energy(j, l, z)
            })
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        self.components.values().all(Amplitude::is_zero)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: SpecFile = toml::from_str(text).map_err(|e| Error::Config(format!("spectrum spec: {e}")))?;
        let mut spec = Self::new(file.scales);
        if file.scales == 0 {
            return Err(Error::Config("spectrum spec needs at least one scale".into()));
        }
        for c in file.components {
            let amp = match (c.energy, c.grid) {
                (Some(e), None) => Amplitude::Constant(e),
                (None, Some(rows)) => {
                    let n = rows.len();
                    let m = rows.first().map_or(0, Vec::len);
                    if n == 0 || m == 0 || rows.iter().any(|r| r.len() != m) {
                        return Err(Error::Config(format!(
                            "component ({}, {}): grid must be a non-empty rectangle",
                            c.scale, c.direction
                        )));
                    }
                    let flat: Vec<f64> = rows.into_iter().flatten().collect();
                    Amplitude::Grid(Array2::from_shape_vec((n, m), flat).expect("rectangular"))
                }
                _ => {
                    return Err(Error::Config(format!(
                        "component ({}, {}) needs exactly one of 'energy' or 'grid'",
                        c.scale, c.direction
                    )))
                }
            };
            spec.set(c.scale, c.direction, amp)?;
        }
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| e.context(path.display().to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        let file = SpecFile {
            scales: self.scales,
            components: self
                .components
                .iter()
                .map(|(&(scale, direction), a)| match a {
                    Amplitude::Constant(e) => SpecComponent {
                        scale,
                        direction,
                        energy: Some(*e),
                        grid: None,
                    },
                    Amplitude::Grid(g) => SpecComponent {
                        scale,
                        direction,
                        energy: None,
                        grid: Some(g.rows().into_iter().map(|r| r.to_vec()).collect()),
                    },
                })
                .collect(),
        };
        toml::to_string(&file).expect("spectrum spec serializes")
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SpecFile {
    scales: u32,
    #[serde(default, rename = "component")]
    components: Vec<SpecComponent>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SpecComponent {
    scale: u32,
    direction: Direction,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    energy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    grid: Option<Vec<Vec<f64>>>,
}

/// Draws one realisation of the process on a power-of-two grid.
pub fn simulate(spec: &SpectrumSpec, dims: (usize, usize), seed: u64, filter: &FilterPair) -> Result<Field2D> {
    if !is_power_of_two(dims.0) || !is_power_of_two(dims.1) || dims.0 < 2 || dims.1 < 2 {
        return Err(Error::Argument(format!(
            "simulation grid must have power-of-two dims, got {}x{}",
            dims.0, dims.1
        )));
    }
    let max = max_scales(dims);
    if spec.scales > max {
        return Err(Error::Argument(format!(
            "spec has {} scales but a {}x{} grid supports at most {max}",
            spec.scales, dims.0, dims.1
        )));
    }
    let mut amps = CoefficientPyramid::zeros(spec.scales, filter.family, dims);
    let (rows, cols) = dims;
    amps.data
        .axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(k, mut layer)| {
            let (j, l) = stack_entry(k);
            let Some(amp) = spec.components.get(&(j, l)) else {
                return;
            };
            if amp.is_zero() {
                return;
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            for ((r, c), v) in layer.indexed_iter_mut() {
                let xi: f64 = StandardNormal.sample(&mut rng);
                let z = (r as f64 / rows as f64, c as f64 / cols as f64);
                *v = amp.at(z).sqrt() * xi;
            }
        });
    Field2D::new(adjoint_ndwt(&amps, filter)?)
}

/// Autocovariance over the square lag window `[-max_lag, max_lag]^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct LagField {
    pub max_lag: i64,
    /// `values[[t1 + max_lag, t2 + max_lag]]`
    pub values: Array2<f64>,
}

impl LagField {
    pub fn zeros(max_lag: i64) -> Self {
        let n = (2 * max_lag + 1) as usize;
        Self {
            max_lag,
            values: Array2::zeros((n, n)),
        }
    }

    pub fn at(&self, t1: i64, t2: i64) -> f64 {
        let m = self.max_lag;
        if t1.abs() > m || t2.abs() > m {
            0.0
        } else {
            self.values[[(t1 + m) as usize, (t2 + m) as usize]]
        }
    }

    pub fn set(&mut self, t1: i64, t2: i64, v: f64) {
        let m = self.max_lag;
        self.values[[(t1 + m) as usize, (t2 + m) as usize]] = v;
    }
}

fn check_bank(spec_scales: u32, bank: &AutocorrBank) -> Result<()> {
    if spec_scales > bank.scales {
        return Err(Error::Argument(format!(
            "spec has {spec_scales} scales but the autocorrelation bank only {}",
            bank.scales
        )));
    }
    Ok(())
}

/// `c(z, tau) = sum_{j,l} S^l_j(z) Psi^l_j(tau)` at the requested lags.
pub fn autocov_from_spectrum(
    spec: &SpectrumSpec,
    bank: &AutocorrBank,
    z: (f64, f64),
    lags: &[(i64, i64)],
) -> Result<Vec<f64>> {
    check_bank(spec.scales, bank)?;
    let s = spec.vector_at(z);
    Ok(lags
        .iter()
        .map(|&(t1, t2)| {
            s.iter()
                .enumerate()
                .filter(|(_, e)| **e != 0.0)
                .map(|(k, e)| {
                    let (j, l) = stack_entry(k);
                    let (a, b) = l.axis_kinds();
                    e * bank.get(j, a).at(t1) * bank.get(j, b).at(t2)
                })
                .sum()
        })
        .collect())
}

/// Dense autocovariance over every lag where it can be nonzero.
pub fn autocov_field(spec: &SpectrumSpec, bank: &AutocorrBank, z: (f64, f64)) -> Result<LagField> {
    check_bank(spec.scales, bank)?;
    let max_lag = bank.get(spec.scales, crate::wavelet::Kind::Mother).max_lag();
    let mut out = LagField::zeros(max_lag);
    let s = spec.vector_at(z);
    for (k, &e) in s.iter().enumerate() {
        if e == 0.0 {
            continue;
        }
        let (j, l) = stack_entry(k);
        let (a, b) = l.axis_kinds();
        let (pa, pb) = (bank.get(j, a), bank.get(j, b));
        let m = pa.max_lag();
        for t1 in -m..=m {
            let va = e * pa.at(t1);
            for t2 in -m..=m {
                let idx = [(t1 + max_lag) as usize, (t2 + max_lag) as usize];
                out.values[idx] += va * pb.at(t2);
            }
        }
    }
    Ok(out)
}

/// `S = A^{-1} q` with `q^m_i = sum_tau c(tau) Psi^m_i(tau)`, the stacked
/// spectrum vector at one location.
pub fn spectrum_from_autocov(c: &LagField, op: &OperatorMatrix, bank: &AutocorrBank) -> Result<Vec<f64>> {
    check_bank(op.scales, bank)?;
    if op.family != bank.family {
        return Err(Error::Argument(format!(
            "operator matrix family {} differs from autocorrelation family {}",
            op.family, bank.family
        )));
    }
    let needed = bank.get(op.scales, crate::wavelet::Kind::Mother).max_lag();
    if c.max_lag < needed {
        return Err(Error::Argument(format!(
            "autocovariance covers lags up to {} but scale {} needs {needed}",
            c.max_lag, op.scales
        )));
    }
    let mut q = vec![0.0; op.dim()];
    for j in 1..=op.scales {
        for l in Direction::ALL {
            let (a, b) = l.axis_kinds();
            let (pa, pb) = (bank.get(j, a), bank.get(j, b));
            let m = pa.max_lag();
            let mut acc = 0.0;
            for t1 in -m..=m {
                let inner: f64 = (-m..=m).map(|t2| c.at(t1, t2) * pb.at(t2)).sum();
                acc += pa.at(t1) * inner;
            }
            q[stack_index(j, l)] = acc;
        }
    }
    Ok(op.apply_inverse(&q))
}
