//! Local wavelet spectrum estimation and spectrum vectors.
//!
//! The raw periodogram is smoothed per `(scale, direction)` grid, then the
//! stacked vector of smoothed values at every location is multiplied by the
//! inverse operator matrix. Corrected energies can be negative and are kept
//! as they are.

use std::fmt;
use std::str::FromStr;

use ndarray::{s, Array1, Array2, Array3, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis, Zip};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Region;
use crate::ndwt::{CoefficientPyramid, PyramidContent};
use crate::wavelet::{stack_entry, stack_index, Direction, Family, FilterPair, OperatorMatrix};

/// Periodogram smoother applied independently to every `(scale, direction)`
/// grid.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Smoother {
    /// Periodic moving average with half-width `2^(j+1)`, capped at 1/8 of
    /// the smaller grid dimension.
    #[default]
    AdaptiveBox,
    /// Periodic moving average with a fixed half-width at every scale.
    Box { half_width: usize },
    /// Soft thresholding of the grid's own decimated wavelet coefficients at
    /// the universal threshold.
    Shrinkage { levels: Option<u32> },
}

impl fmt::Display for Smoother {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Smoother::AdaptiveBox => write!(f, "box"),
            Smoother::Box { half_width } => write!(f, "box:{half_width}"),
            Smoother::Shrinkage { levels: None } => write!(f, "shrinkage"),
            Smoother::Shrinkage { levels: Some(n) } => write!(f, "shrinkage:{n}"),
        }
    }
}

impl FromStr for Smoother {
    type Err = Error;

    /// Accepts `box`, `box:<half-width>`, `none`, `shrinkage` and
    /// `shrinkage:<levels>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s.as_str(), None),
        };
        let parse_arg = |a: &str| {
            a.parse::<usize>()
                .map_err(|_| Error::Config(format!("invalid smoother parameter '{a}'")))
        };
        match (name, arg) {
            ("box" | "adaptive", None) => Ok(Smoother::AdaptiveBox),
            ("box", Some(a)) => Ok(Smoother::Box {
                half_width: parse_arg(a)?,
            }),
            ("none", None) => Ok(Smoother::Box { half_width: 0 }),
            ("shrinkage", None) => Ok(Smoother::Shrinkage { levels: None }),
            ("shrinkage", Some(a)) => {
                let levels = parse_arg(a)? as u32;
                if levels == 0 {
                    return Err(Error::Config("shrinkage needs at least one level".into()));
                }
                Ok(Smoother::Shrinkage { levels: Some(levels) })
            }
            _ => Err(Error::Config(format!(
                "unknown smoother '{s}' (expected box, box:<n>, none, shrinkage, shrinkage:<n>)"
            ))),
        }
    }
}

/// Box half-width used at `scale` on a grid of `dims`.
pub fn box_half_width(smoother: &Smoother, scale: u32, dims: (usize, usize)) -> Option<usize> {
    match smoother {
        Smoother::AdaptiveBox => {
            let cap = dims.0.min(dims.1) / 8;
            Some((1usize << (scale + 1)).min(cap))
        }
        Smoother::Box { half_width } => Some(*half_width),
        Smoother::Shrinkage { .. } => None,
    }
}

/// Smooths every grid of a periodogram pyramid.
pub fn smooth_periodogram(mut per: CoefficientPyramid, smoother: &Smoother) -> Result<CoefficientPyramid> {
    let dims = per.dims();
    if let Smoother::Box { half_width } = smoother {
        if 2 * half_width + 1 > dims.0.min(dims.1) {
            return Err(Error::Config(format!(
                "box half-width {half_width} too large for a {}x{} grid",
                dims.0, dims.1
            )));
        }
    }
    let filter = FilterPair::new(per.family);
    per.data
        .axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .try_for_each(|(k, mut grid)| -> Result<()> {
            let (scale, _) = stack_entry(k);
            match box_half_width(smoother, scale, dims) {
                Some(hw) => box_smooth(grid.view_mut(), hw),
                None => {
                    let Smoother::Shrinkage { levels } = smoother else {
                        unreachable!()
                    };
                    let out = shrink(grid.view(), &filter, *levels)?;
                    grid.assign(&out);
                }
            }
            Ok(())
        })?;
    per.content = PyramidContent::SmoothedPeriodogram;
    Ok(per)
}

/// Periodic running mean of width `2 hw + 1` along a line.
fn box_line(mut line: ArrayViewMut1<f64>, hw: usize) {
    let n = line.len();
    let src = line.to_vec();
    let w = (2 * hw + 1) as f64;
    let at = |i: isize| src[i.rem_euclid(n as isize) as usize];
    let mut sum: f64 = (-(hw as isize)..=hw as isize).map(at).sum();
    for i in 0..n {
        line[i] = sum / w;
        let ii = i as isize;
        sum += at(ii + hw as isize + 1) - at(ii - hw as isize);
    }
}

fn box_smooth(mut grid: ArrayViewMut2<f64>, hw: usize) {
    if hw == 0 {
        return;
    }
    for mut row in grid.rows_mut() {
        box_line(row.view_mut(), hw);
    }
    for mut col in grid.columns_mut() {
        box_line(col.view_mut(), hw);
    }
}

/// One level of the periodic orthogonal DWT along a line of even length.
fn dwt_line(x: &[f64], h: &[f64], g: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let half = n / 2;
    let mut a = vec![0.0; half];
    let mut d = vec![0.0; half];
    for i in 0..half {
        for k in 0..h.len() {
            let v = x[(2 * i + k) % n];
            a[i] += h[k] * v;
            d[i] += g[k] * v;
        }
    }
    (a, d)
}

fn idwt_line(a: &[f64], d: &[f64], h: &[f64], g: &[f64]) -> Vec<f64> {
    let n = 2 * a.len();
    let mut x = vec![0.0; n];
    for i in 0..a.len() {
        for k in 0..h.len() {
            x[(2 * i + k) % n] += h[k] * a[i] + g[k] * d[i];
        }
    }
    x
}

fn apply_lines(block: &mut Array2<f64>, axis: Axis, f: impl Fn(&[f64]) -> Vec<f64>) {
    for mut lane in block.lanes_mut(axis) {
        let out = f(&lane.to_vec());
        lane.assign(&Array1::from(out));
    }
}

/// Decimated periodic 2D DWT in the usual quadrant layout.
pub(crate) fn dwt2(x: ArrayView2<f64>, filter: &FilterPair, levels: u32) -> Array2<f64> {
    let (h, g) = (&filter.low_pass, &filter.high_pass);
    let mut out = x.to_owned();
    let (mut r, mut c) = out.dim();
    for _ in 0..levels {
        let mut block = out.slice(s![..r, ..c]).to_owned();
        let split = |v: &[f64]| {
            let (a, d) = dwt_line(v, h, g);
            a.into_iter().chain(d).collect()
        };
        apply_lines(&mut block, Axis(1), split);
        apply_lines(&mut block, Axis(0), split);
        out.slice_mut(s![..r, ..c]).assign(&block);
        r /= 2;
        c /= 2;
    }
    out
}

pub(crate) fn idwt2(coef: ArrayView2<f64>, filter: &FilterPair, levels: u32) -> Array2<f64> {
    let (h, g) = (&filter.low_pass, &filter.high_pass);
    let mut out = coef.to_owned();
    let (rows, cols) = out.dim();
    for level in (0..levels).rev() {
        let (r, c) = (rows >> level, cols >> level);
        let mut block = out.slice(s![..r, ..c]).to_owned();
        let merge = |v: &[f64]| {
            let half = v.len() / 2;
            idwt_line(&v[..half], &v[half..], h, g)
        };
        apply_lines(&mut block, Axis(0), merge);
        apply_lines(&mut block, Axis(1), merge);
        out.slice_mut(s![..r, ..c]).assign(&block);
    }
    out
}

fn shrinkage_levels(dims: (usize, usize), n_taps: usize, requested: Option<u32>) -> u32 {
    let min = dims.0.min(dims.1);
    let max = if min >= n_taps {
        (min / n_taps).ilog2() + 1
    } else {
        1
    };
    requested.unwrap_or(max.saturating_sub(1).max(1)).min(max)
}

fn shrink(grid: ArrayView2<f64>, filter: &FilterPair, levels: Option<u32>) -> Result<Array2<f64>> {
    let dims = grid.dim();
    if !dims.0.is_power_of_two() || !dims.1.is_power_of_two() || dims.0 < 2 || dims.1 < 2 {
        return Err(Error::Config(format!(
            "shrinkage smoother needs power-of-two grids, got {}x{}",
            dims.0, dims.1
        )));
    }
    let levels = shrinkage_levels(dims, filter.n_taps(), levels);
    let mut coef = dwt2(grid, filter, levels);
    let (r, c) = (dims.0 / 2, dims.1 / 2);
    // noise scale from the finest diagonal band
    let mut finest: Vec<f64> = coef.slice(s![r.., c..]).iter().map(|v| v.abs()).collect();
    finest.sort_by(f64::total_cmp);
    let sigma = finest[finest.len() / 2] / 0.6745;
    let lambda = sigma * (2.0 * ((dims.0 * dims.1) as f64).ln()).sqrt();
    let (ar, ac) = (dims.0 >> levels, dims.1 >> levels);
    for ((i, j), v) in coef.indexed_iter_mut() {
        if i >= ar || j >= ac {
            *v = v.signum() * (v.abs() - lambda).max(0.0);
        }
    }
    Ok(idwt2(coef.view(), filter, levels))
}

/// Per-location spectral energies for every `(scale, direction)`.
#[derive(Debug, Clone)]
pub struct LocalWaveletSpectrum {
    pub scales: u32,
    pub family: Family,
    pub data: Array3<f64>,
    pub region: Region,
    pub bias_corrected: bool,
}

impl LocalWaveletSpectrum {
    pub fn dims(&self) -> (usize, usize) {
        let (_, r, c) = self.data.dim();
        (r, c)
    }

    pub fn get(&self, scale: u32, direction: Direction) -> ArrayView2<'_, f64> {
        self.data.index_axis(Axis(0), stack_index(scale, direction))
    }

    /// Mean over the three directions at `scale`.
    pub fn direction_average(&self, scale: u32) -> Array2<f64> {
        let mut out = Array2::zeros(self.dims());
        for dir in Direction::ALL {
            out += &self.get(scale, dir);
        }
        out / 3.0
    }
}

/// Applies the inverse operator matrix at every location.
pub fn bias_correct(smoothed: CoefficientPyramid, op: &OperatorMatrix) -> Result<LocalWaveletSpectrum> {
    if smoothed.scales != op.scales {
        return Err(Error::Argument(format!(
            "pyramid has {} scales but the operator matrix has {}",
            smoothed.scales, op.scales
        )));
    }
    let n = op.dim();
    let inv: Vec<f64> = (0..n * n).map(|i| op.inverse[(i / n, i % n)]).collect();
    let mut data = smoothed.data;
    Zip::from(data.lanes_mut(Axis(0))).par_for_each(|mut lane| {
        let p = lane.to_vec();
        for (r, out) in lane.iter_mut().enumerate() {
            let row = &inv[r * n..(r + 1) * n];
            *out = row.iter().zip(&p).map(|(a, b)| a * b).sum();
        }
    });
    Ok(LocalWaveletSpectrum {
        scales: smoothed.scales,
        family: smoothed.family,
        data,
        region: smoothed.region,
        bias_corrected: true,
    })
}

/// Spectrum vector indexed by `(scale, direction)` over a set of scales,
/// directions ordered h, v, d within each scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvgSpectrum {
    pub source: String,
    pub scales: Vec<u32>,
    pub energies: Vec<f64>,
    pub standardized: bool,
}

impl AvgSpectrum {
    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn get(&self, scale: u32, direction: Direction) -> Option<f64> {
        let pos = self.scales.iter().position(|&s| s == scale)?;
        Some(self.energies[3 * pos + direction.index()])
    }

    /// `(scale, direction, energy)` in storage order.
    pub fn entries(&self) -> impl Iterator<Item = (u32, Direction, f64)> + '_ {
        self.energies
            .iter()
            .enumerate()
            .map(|(i, &e)| (self.scales[i / 3], Direction::ALL[i % 3], e))
    }

    /// Entry with the largest energy; the first one wins ties.
    pub fn argmax(&self) -> (u32, Direction) {
        let (mut best, mut best_e) = ((self.scales[0], Direction::H), f64::NEG_INFINITY);
        for (s, d, e) in self.entries() {
            if e > best_e {
                best = (s, d);
                best_e = e;
            }
        }
        best
    }
}

/// Mean of the local spectrum over `region`, per `(scale, direction)`.
pub fn average_spectrum(spec: &LocalWaveletSpectrum, region: Region) -> Result<AvgSpectrum> {
    if region.is_empty() {
        return Err(Error::Argument("averaging region is empty".into()));
    }
    if !region.fits_in(spec.dims()) {
        return Err(Error::Argument(format!(
            "region {region:?} outside the {}x{} grid",
            spec.dims().0,
            spec.dims().1
        )));
    }
    let count = (region.rows * region.cols) as f64;
    let energies = spec
        .data
        .axis_iter(Axis(0))
        .map(|g| {
            g.slice(s![
                region.row0..region.row0 + region.rows,
                region.col0..region.col0 + region.cols
            ])
            .sum()
                / count
        })
        .collect();
    Ok(AvgSpectrum {
        source: String::new(),
        scales: (1..=spec.scales).collect(),
        energies,
        standardized: false,
    })
}

/// Restricts the vector to `retained` scales (kept in ascending order).
pub fn select_scales(avg: &AvgSpectrum, retained: &[u32]) -> Result<AvgSpectrum> {
    if retained.is_empty() {
        return Err(Error::Argument("retained scale set is empty".into()));
    }
    let mut keep = retained.to_vec();
    keep.sort_unstable();
    keep.dedup();
    let mut energies = Vec::with_capacity(3 * keep.len());
    for &s in &keep {
        let pos = avg.scales.iter().position(|&x| x == s).ok_or_else(|| {
            Error::Argument(format!("scale {s} not available (have {:?})", avg.scales))
        })?;
        energies.extend_from_slice(&avg.energies[3 * pos..3 * pos + 3]);
    }
    Ok(AvgSpectrum {
        source: avg.source.clone(),
        scales: keep,
        energies,
        standardized: false,
    })
}

/// Default retained scales for a `J`-scale decomposition: drop the two
/// finest and two coarsest scales, `3..=J-2`. Short decompositions keep all
/// scales.
pub fn default_retained(scales: u32) -> Vec<u32> {
    if scales >= 5 {
        (3..=scales - 2).collect()
    } else {
        (1..=scales).collect()
    }
}

/// Subtracts the mean over all entries and divides by their population
/// standard deviation.
pub fn standardize(avg: &AvgSpectrum) -> Result<AvgSpectrum> {
    let n = avg.len();
    if n < 2 {
        return Err(Error::Degenerate(format!(
            "standardization needs at least 2 entries, got {n}"
        )));
    }
    let mean = avg.energies.iter().sum::<f64>() / n as f64;
    let var = avg.energies.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n as f64;
    let sd = var.sqrt();
    if !(sd > 1e-12 * mean.abs()) || !sd.is_finite() {
        return Err(Error::Degenerate(format!(
            "spectrum '{}' has zero variance across scales and directions",
            avg.source
        )));
    }
    Ok(AvgSpectrum {
        source: avg.source.clone(),
        scales: avg.scales.clone(),
        energies: avg.energies.iter().map(|e| (e - mean) / sd).collect(),
        standardized: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavelet::operator_matrix;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_pyramid(scales: u32, dims: (usize, usize), seed: u64) -> CoefficientPyramid {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = CoefficientPyramid::zeros(scales, Family::Haar, dims);
        p.data.mapv_inplace(|_| rng.random_range(0.0..2.0));
        p.content = PyramidContent::Periodogram;
        p
    }

    fn variance(a: ArrayView2<f64>) -> f64 {
        let m = a.mean().unwrap();
        a.iter().map(|v| (v - m).powi(2)).sum::<f64>() / a.len() as f64
    }

    #[test]
    fn smoother_parsing() {
        assert_eq!("box".parse::<Smoother>().unwrap(), Smoother::AdaptiveBox);
        assert_eq!("box:4".parse::<Smoother>().unwrap(), Smoother::Box { half_width: 4 });
        assert_eq!("none".parse::<Smoother>().unwrap(), Smoother::Box { half_width: 0 });
        assert_eq!(
            "shrinkage:3".parse::<Smoother>().unwrap(),
            Smoother::Shrinkage { levels: Some(3) }
        );
        assert!(matches!("median".parse::<Smoother>(), Err(Error::Config(_))));
        assert!(matches!("box:x".parse::<Smoother>(), Err(Error::Config(_))));
        for s in ["box", "box:7", "shrinkage", "shrinkage:2"] {
            assert_eq!(s.parse::<Smoother>().unwrap().to_string(), s);
        }
    }

    #[test]
    fn adaptive_half_width() {
        assert_eq!(box_half_width(&Smoother::AdaptiveBox, 1, (1024, 1024)), Some(4));
        assert_eq!(box_half_width(&Smoother::AdaptiveBox, 6, (1024, 1024)), Some(128));
        assert_eq!(box_half_width(&Smoother::AdaptiveBox, 9, (1024, 512)), Some(64));
    }

    #[test]
    fn smoothers_preserve_constants() {
        for sm in [
            Smoother::AdaptiveBox,
            Smoother::Box { half_width: 3 },
            Smoother::Shrinkage { levels: None },
        ] {
            let mut p = CoefficientPyramid::zeros(3, Family::D4, (32, 32));
            p.data.fill(2.5);
            let out = smooth_periodogram(p, &sm).unwrap();
            assert!(out.data.iter().all(|v| (v - 2.5).abs() < 1e-12), "{sm}");
            assert_eq!(out.content, PyramidContent::SmoothedPeriodogram);
        }
    }

    #[test]
    fn zero_half_width_is_identity() {
        let p = random_pyramid(2, (16, 16), 1);
        let out = smooth_periodogram(p.clone(), &Smoother::Box { half_width: 0 }).unwrap();
        assert_eq!(out.data, p.data);
    }

    #[test]
    fn box_reduces_variance() {
        let p = random_pyramid(1, (64, 64), 2);
        let before = variance(p.get(1, Direction::H));
        let out = smooth_periodogram(p, &Smoother::Box { half_width: 4 }).unwrap();
        assert!(variance(out.get(1, Direction::H)) < before);
    }

    #[test]
    fn box_matches_direct_window_mean() {
        let p = random_pyramid(1, (16, 16), 3);
        let raw = p.get(1, Direction::V).to_owned();
        let out = smooth_periodogram(p, &Smoother::Box { half_width: 2 }).unwrap();
        let (i, j) = (1usize, 14usize);
        let mut s = 0.0;
        for a in -2i64..=2 {
            for b in -2i64..=2 {
                s += raw[[(i as i64 + a).rem_euclid(16) as usize, (j as i64 + b).rem_euclid(16) as usize]];
            }
        }
        assert!((out.get(1, Direction::V)[[i, j]] - s / 25.0).abs() < 1e-12);
    }

    #[test]
    fn oversized_box_rejected() {
        let p = random_pyramid(1, (8, 8), 4);
        assert!(matches!(
            smooth_periodogram(p, &Smoother::Box { half_width: 4 }),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn dwt2_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = Array2::from_shape_fn((32, 16), |_| rng.random_range(-1.0..1.0));
        for fam in Family::ALL {
            let f = FilterPair::new(fam);
            let c = dwt2(x.view(), &f, 2);
            // orthogonal: energy preserved
            let ex: f64 = x.iter().map(|v| v * v).sum();
            let ec: f64 = c.iter().map(|v| v * v).sum();
            assert!((ex - ec).abs() < 1e-10);
            let y = idwt2(c.view(), &f, 2);
            assert!(x.iter().zip(y.iter()).all(|(a, b)| (a - b).abs() < 1e-12), "{fam}");
        }
    }

    #[test]
    fn bias_correct_pointwise() {
        let op = operator_matrix(3, &FilterPair::new(Family::Haar)).unwrap();
        let p0: Vec<f64> = (0..9).map(|i| 0.5 + i as f64).collect();
        let mut p = CoefficientPyramid::zeros(3, Family::Haar, (8, 8));
        for (k, mut g) in p.data.axis_iter_mut(Axis(0)).enumerate() {
            g.fill(p0[k]);
        }
        let expect = op.apply_inverse(&p0);
        let s = bias_correct(p, &op).unwrap();
        assert!(s.bias_corrected);
        for (k, g) in s.data.axis_iter(Axis(0)).enumerate() {
            assert!(g.iter().all(|v| (v - expect[k]).abs() < 1e-12));
        }

        let zero = bias_correct(CoefficientPyramid::zeros(3, Family::Haar, (8, 8)), &op).unwrap();
        assert!(zero.data.iter().all(|&v| v == 0.0));
        assert!(matches!(
            bias_correct(CoefficientPyramid::zeros(2, Family::Haar, (8, 8)), &op),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn smoothing_and_correction_are_linear() {
        let op = operator_matrix(3, &FilterPair::new(Family::D4)).unwrap();
        let run = |p: CoefficientPyramid| {
            bias_correct(smooth_periodogram(p, &Smoother::AdaptiveBox).unwrap(), &op)
                .unwrap()
                .data
        };
        let mut a = random_pyramid(3, (32, 32), 5);
        a.family = Family::D4;
        let mut b = random_pyramid(3, (32, 32), 6);
        b.family = Family::D4;
        let (alpha, beta) = (0.7, -1.3);
        let mut mix = a.clone();
        mix.data = &a.data * alpha + &b.data * beta;
        let lhs = run(mix);
        let rhs = run(a) * alpha + run(b) * beta;
        assert!(lhs.iter().zip(rhs.iter()).all(|(x, y)| (x - y).abs() < 1e-10));
    }

    fn lws_from(data: Array3<f64>, scales: u32) -> LocalWaveletSpectrum {
        let (_, r, c) = data.dim();
        LocalWaveletSpectrum {
            scales,
            family: Family::Haar,
            data,
            region: Region::full((r, c)),
            bias_corrected: true,
        }
    }

    #[test]
    fn averaging() {
        let data = Array3::from_shape_fn((6, 4, 4), |(k, _, _)| k as f64 - 1.5);
        let spec = lws_from(data, 2);
        let avg = average_spectrum(&spec, Region::full((4, 4))).unwrap();
        assert_eq!(avg.energies, vec![-1.5, -0.5, 0.5, 1.5, 2.5, 3.5]);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let data = Array3::from_shape_fn((6, 4, 4), |_| rng.random::<f64>());
        let spec = lws_from(data.clone(), 2);
        let one = Region { row0: 2, col0: 1, rows: 1, cols: 1 };
        let avg = average_spectrum(&spec, one).unwrap();
        for k in 0..6 {
            assert_eq!(avg.energies[k], data[[k, 2, 1]]);
        }
        let empty = Region { row0: 0, col0: 0, rows: 0, cols: 3 };
        assert!(matches!(average_spectrum(&spec, empty), Err(Error::Argument(_))));
        let outside = Region { row0: 3, col0: 0, rows: 2, cols: 2 };
        assert!(average_spectrum(&spec, outside).is_err());
    }

    fn spectrum(scales: u32) -> AvgSpectrum {
        AvgSpectrum {
            source: "t".into(),
            scales: (1..=scales).collect(),
            energies: (0..3 * scales).map(|i| (i as f64).sin() + 2.0).collect(),
            standardized: false,
        }
    }

    #[test]
    fn scale_selection() {
        let avg = spectrum(10);
        let all = select_scales(&avg, &(1..=10).collect::<Vec<_>>()).unwrap();
        assert_eq!(all.energies, avg.energies);
        let sel = select_scales(&avg, &default_retained(10)).unwrap();
        assert_eq!(sel.len(), 18);
        assert_eq!(sel.scales, vec![3, 4, 5, 6, 7, 8]);
        let four = select_scales(&avg, &[4]).unwrap();
        assert_eq!(four.energies, avg.energies[9..12].to_vec());
        assert_eq!(four.get(4, Direction::D), avg.get(4, Direction::D));
        assert!(matches!(select_scales(&avg, &[]), Err(Error::Argument(_))));
        assert!(matches!(select_scales(&avg, &[11]), Err(Error::Argument(_))));
    }

    fn moments(v: &[f64]) -> (f64, f64) {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        (m, (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt())
    }

    #[test]
    fn standardization() {
        let avg = AvgSpectrum {
            source: "x".into(),
            scales: vec![1],
            energies: vec![1.0, 2.0, 3.0],
            standardized: false,
        };
        let st = standardize(&avg).unwrap();
        let (m, sd) = moments(&st.energies);
        assert!(m.abs() < 1e-12 && (sd - 1.0).abs() < 1e-12);
        assert!(st.standardized);
        let again = standardize(&st).unwrap();
        assert!(again.energies.iter().zip(&st.energies).all(|(a, b)| (a - b).abs() < 1e-12));

        let flat = AvgSpectrum { energies: vec![4.0; 3], ..avg.clone() };
        assert!(matches!(standardize(&flat), Err(Error::Degenerate(_))));
        let zero = AvgSpectrum { energies: vec![0.0; 3], ..avg.clone() };
        assert!(matches!(standardize(&zero), Err(Error::Degenerate(_))));
        let short = AvgSpectrum { energies: vec![1.0], ..avg };
        assert!(standardize(&short).is_err());
    }

    proptest! {
        #[test]
        fn standardize_is_affine_invariant(
            v in proptest::collection::vec(-10.0f64..10.0, 3..24),
            c in 0.01f64..100.0,
            b in -50.0f64..50.0,
        ) {
            let (_, sd) = moments(&v);
            prop_assume!(sd > 1e-3);
            let avg = AvgSpectrum { source: String::new(), scales: vec![], energies: v.clone(), standardized: false };
            let moved = AvgSpectrum { energies: v.iter().map(|x| c * x + b).collect(), ..avg.clone() };
            let s1 = standardize(&avg).unwrap();
            let s2 = standardize(&moved).unwrap();
            for (a, b) in s1.energies.iter().zip(&s2.energies) {
                prop_assert!((a - b).abs() < 1e-10);
            }
            let (m, sd) = moments(&s1.energies);
            prop_assert!(m.abs() < 1e-10 && (sd - 1.0).abs() < 1e-10);
        }
    }
}
