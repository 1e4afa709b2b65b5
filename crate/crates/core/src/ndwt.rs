//! Field preparation and the non-decimated 2D wavelet transform.
//!
//! Coefficients follow `d^l_{j,u} = sum_r X(r) psi^l_{j,u-r}` with periodic
//! wrap-around, i.e. a circular convolution of the field with the 2D wavelet:
//! the coefficient at `u` collects the field over the support ending at `u`.
//! An impulse at `u0` therefore reproduces the wavelet taps starting at `u0`.
//!
//! The fast transform runs the filter cascade of [`crate::wavelet`] directly
//! on the grid, inserting `2^(j-1) - 1` zeros between filter taps at level `j`
//! instead of decimating.

use ndarray::{s, Array2, Array3, ArrayView2, ArrayViewMut2, Axis, Zip};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{is_power_of_two, Field2D, Region};
use crate::wavelet::{stack_index, Direction, Family, FilterPair};

/// Default taper width in grid points.
pub const DEFAULT_TAPER_WIDTH: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PyramidContent {
    Coefficients,
    Periodogram,
    SmoothedPeriodogram,
}

/// One full-resolution grid per `(scale, direction)`, stacked along axis 0 in
/// [`stack_index`] order.
#[derive(Debug, Clone)]
pub struct CoefficientPyramid {
    pub scales: u32,
    pub family: Family,
    pub data: Array3<f64>,
    /// Location of the original (unpadded) field.
    pub region: Region,
    pub content: PyramidContent,
}

impl CoefficientPyramid {
    pub fn zeros(scales: u32, family: Family, dims: (usize, usize)) -> Self {
        Self {
            scales,
            family,
            data: Array3::zeros((3 * scales as usize, dims.0, dims.1)),
            region: Region::full(dims),
            content: PyramidContent::Coefficients,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        let (_, r, c) = self.data.dim();
        (r, c)
    }

    pub fn get(&self, scale: u32, direction: Direction) -> ArrayView2<'_, f64> {
        self.data.index_axis(Axis(0), stack_index(scale, direction))
    }

    pub fn get_mut(&mut self, scale: u32, direction: Direction) -> ArrayViewMut2<'_, f64> {
        self.data.index_axis_mut(Axis(0), stack_index(scale, direction))
    }

    pub fn with_region(mut self, region: Region) -> Self {
        self.region = region;
        self
    }
}

/// A tapered, zero-padded field and where the original sits inside it.
#[derive(Debug, Clone)]
pub struct PaddedField {
    pub field: Field2D,
    pub region: Region,
}

/// Smallest power of two per axis that holds the field plus a taper-width
/// margin on both sides.
pub fn default_target(dims: (usize, usize), taper_width: usize) -> (usize, usize) {
    (
        (dims.0 + 2 * taper_width).next_power_of_two(),
        (dims.1 + 2 * taper_width).next_power_of_two(),
    )
}

/// Number of scales supported by a grid, `log2(min(R, S))`.
pub fn max_scales(dims: (usize, usize)) -> u32 {
    dims.0.min(dims.1).max(1).ilog2()
}

fn ramp(len: usize, width: usize, edge_factor: f64) -> Vec<f64> {
    (0..len)
        .map(|i| {
            let k = i.min(len - 1 - i);
            if k < width {
                edge_factor + (1.0 - edge_factor) * k as f64 / width as f64
            } else {
                1.0
            }
        })
        .collect()
}

/// Multiplies the field by a separable linear edge ramp and centres it in a
/// zero grid of `target` dims.
///
/// The ramp rises from `edge_factor` at the outermost row/column to 1 at
/// `taper_width` points inside the field.
pub fn taper_and_pad(
    field: &Field2D,
    taper_width: usize,
    target: (usize, usize),
    edge_factor: f64,
) -> Result<PaddedField> {
    let (rows, cols) = field.dims();
    if taper_width > rows.min(cols) / 2 {
        return Err(Error::Argument(format!(
            "taper width {taper_width} exceeds half the smaller field dimension ({rows}x{cols})"
        )));
    }
    if target.0 < rows || target.1 < cols {
        return Err(Error::Argument(format!(
            "target {}x{} is smaller than the field {rows}x{cols}",
            target.0, target.1
        )));
    }
    if !is_power_of_two(target.0) || !is_power_of_two(target.1) {
        return Err(Error::Argument(format!(
            "target dims {}x{} are not powers of two",
            target.0, target.1
        )));
    }
    if !(0.0..=1.0).contains(&edge_factor) {
        return Err(Error::Argument(format!("edge factor {edge_factor} outside [0, 1]")));
    }

    let wr = ramp(rows, taper_width, edge_factor);
    let wc = ramp(cols, taper_width, edge_factor);
    let region = Region {
        row0: (target.0 - rows) / 2,
        col0: (target.1 - cols) / 2,
        rows,
        cols,
    };
    let mut padded = Array2::zeros(target);
    padded
        .slice_mut(s![region.row0..region.row0 + rows, region.col0..region.col0 + cols])
        .indexed_iter_mut()
        .for_each(|((i, j), v)| *v = field.values[[i, j]] * wr[i] * wc[j]);

    let mut out = Field2D::with_spacing(padded, field.grid_spacing)?;
    out.name = field.name.clone();
    out.time = field.time.clone();
    Ok(PaddedField { field: out, region })
}

/// `dst[n] (+)= sum_k f[k] src[(n - dir * step * k) mod N]`, dir = +1 for
/// convolution and -1 for its adjoint (correlation).
fn filter_line(src: &[f64], dst: &mut [f64], f: &[f64], step: usize, adjoint: bool) {
    let n = src.len();
    for (k, &fk) in f.iter().enumerate() {
        let shift = (step * k) % n;
        // index into src for dst[0]
        let start = if adjoint { shift } else { (n - shift) % n };
        let (head, tail) = (&src[start..], &src[..start]);
        for (d, s) in dst.iter_mut().zip(head.iter().chain(tail)) {
            *d += fk * s;
        }
    }
}

/// Periodic filtering along axis 1 (rows index), accumulated into `dst`.
fn filter_axis1(src: ArrayView2<f64>, mut dst: ArrayViewMut2<f64>, f: &[f64], step: usize, adjoint: bool) {
    let n = src.nrows();
    dst.axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(row, mut out)| {
            for (k, &fk) in f.iter().enumerate() {
                let shift = (step * k) % n;
                let from = if adjoint { (row + shift) % n } else { (row + n - shift) % n };
                Zip::from(&mut out).and(src.row(from)).for_each(|o, &x| *o += fk * x);
            }
        });
}

/// Periodic filtering along axis 2 (columns index), accumulated into `dst`.
fn filter_axis2(src: ArrayView2<f64>, mut dst: ArrayViewMut2<f64>, f: &[f64], step: usize, adjoint: bool) {
    Zip::from(dst.rows_mut())
        .and(src.rows())
        .par_for_each(|mut out, row| {
            let row = row.to_vec();
            match out.as_slice_mut() {
                Some(o) => filter_line(&row, o, f, step, adjoint),
                None => {
                    let mut tmp = out.to_vec();
                    filter_line(&row, &mut tmp, f, step, adjoint);
                    out.assign(&ndarray::ArrayView1::from(&tmp));
                }
            }
        });
}

fn check_scales(dims: (usize, usize), scales: u32) -> Result<()> {
    if !is_power_of_two(dims.0) || !is_power_of_two(dims.1) {
        return Err(Error::Argument(format!(
            "transform needs power-of-two dims, got {}x{}",
            dims.0, dims.1
        )));
    }
    let max = max_scales(dims);
    if scales == 0 || scales > max {
        return Err(Error::Argument(format!(
            "{scales} scales requested but a {}x{} grid supports 1..={max}",
            dims.0, dims.1
        )));
    }
    Ok(())
}

/// Fast non-decimated transform of a power-of-two field.
pub fn ndwt(field: &Field2D, scales: u32, filter: &FilterPair) -> Result<CoefficientPyramid> {
    ndwt_values(field.values.view(), scales, filter)
}

/// [`ndwt`] of a padded field, recording where the original field sits.
pub fn ndwt_padded(padded: &PaddedField, scales: u32, filter: &FilterPair) -> Result<CoefficientPyramid> {
    Ok(ndwt(&padded.field, scales, filter)?.with_region(padded.region))
}

pub(crate) fn ndwt_values(values: ArrayView2<f64>, scales: u32, filter: &FilterPair) -> Result<CoefficientPyramid> {
    let dims = values.dim();
    check_scales(dims, scales)?;
    let (h, g) = (&filter.low_pass, &filter.high_pass);
    let mut pyr = CoefficientPyramid::zeros(scales, filter.family, dims);
    let mut coarse = values.to_owned();
    let mut low = Array2::zeros(dims);
    let mut high = Array2::zeros(dims);

    for j in 1..=scales {
        let step = 1usize << (j - 1);
        low.fill(0.0);
        high.fill(0.0);
        filter_axis1(coarse.view(), low.view_mut(), h, step, false);
        filter_axis1(coarse.view(), high.view_mut(), g, step, false);
        filter_axis2(low.view(), pyr.get_mut(j, Direction::H), g, step, false);
        filter_axis2(high.view(), pyr.get_mut(j, Direction::V), h, step, false);
        filter_axis2(high.view(), pyr.get_mut(j, Direction::D), g, step, false);
        if j < scales {
            coarse.fill(0.0);
            filter_axis2(low.view(), coarse.view_mut(), h, step, false);
        }
    }
    Ok(pyr)
}

/// Adjoint of [`ndwt`]: `X(r) = sum_{j,l,u} a^l_{j,u} psi^l_{j,u-r}`.
///
/// This is the synthesis operator of a locally stationary wavelet process
/// when `a` holds amplitude-weighted innovations.
pub fn adjoint_ndwt(pyr: &CoefficientPyramid, filter: &FilterPair) -> Result<Array2<f64>> {
    let dims = pyr.dims();
    check_scales(dims, pyr.scales)?;
    let (h, g) = (&filter.low_pass, &filter.high_pass);
    let mut acc: Array2<f64> = Array2::zeros(dims);
    let mut low = Array2::zeros(dims);
    let mut high = Array2::zeros(dims);

    for j in (1..=pyr.scales).rev() {
        let step = 1usize << (j - 1);
        low.fill(0.0);
        high.fill(0.0);
        filter_axis2(pyr.get(j, Direction::H), low.view_mut(), g, step, true);
        if j < pyr.scales {
            filter_axis2(acc.view(), low.view_mut(), h, step, true);
        }
        filter_axis2(pyr.get(j, Direction::V), high.view_mut(), h, step, true);
        filter_axis2(pyr.get(j, Direction::D), high.view_mut(), g, step, true);
        acc.fill(0.0);
        filter_axis1(low.view(), acc.view_mut(), h, step, true);
        filter_axis1(high.view(), acc.view_mut(), g, step, true);
    }
    Ok(acc)
}

/// Raw local wavelet periodogram: elementwise squares of the coefficients.
pub fn periodogram(mut pyr: CoefficientPyramid) -> CoefficientPyramid {
    pyr.data.par_mapv_inplace(|v| v * v);
    pyr.content = PyramidContent::Periodogram;
    pyr
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavelet::{build_filter, wavelet_2d};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(dims: (usize, usize), seed: u64) -> Field2D {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Field2D::new(Array2::from_shape_fn(dims, |_| rng.random_range(-1.0..1.0))).unwrap()
    }

    #[test]
    fn padding_to_1024() {
        let f = Field2D::new(Array2::from_elem((461, 421), 1.0)).unwrap();
        let p = taper_and_pad(&f, 25, (1024, 1024), 0.0).unwrap();
        assert_eq!(p.field.dims(), (1024, 1024));
        assert_eq!((p.region.row0, p.region.col0), (281, 301));
        assert_eq!((p.region.rows, p.region.cols), (461, 421));
        assert_eq!(p.field.values[[0, 0]], 0.0);
        assert_eq!(p.field.values[[281 + 230, 301 + 210]], 1.0);
    }

    #[test]
    fn identity_when_no_taper_and_pow2() {
        let f = random_field((32, 64), 3);
        let target = default_target(f.dims(), 0);
        assert_eq!(target, (32, 64));
        let p = taper_and_pad(&f, 0, target, 0.0).unwrap();
        assert_eq!(p.field.values, f.values);
        assert_eq!((p.region.row0, p.region.col0), (0, 0));
    }

    #[test]
    fn linear_ramp_on_constant_field() {
        let f = Field2D::new(Array2::from_elem((100, 120), 1.0)).unwrap();
        let p = taper_and_pad(&f, 25, (128, 128), 0.0).unwrap();
        let r = p.region;
        let mid_c = r.col0 + 60;
        for k in 0..=25 {
            let top = p.field.values[[r.row0 + k, mid_c]];
            let bottom = p.field.values[[r.row0 + r.rows - 1 - k, mid_c]];
            assert!((top - k as f64 / 25.0).abs() < 1e-15, "k={k}");
            assert!((bottom - k as f64 / 25.0).abs() < 1e-15);
        }
    }

    #[test]
    fn taper_rejects_bad_arguments() {
        let f = random_field((20, 20), 1);
        assert!(matches!(taper_and_pad(&f, 2, (16, 32), 0.0), Err(Error::Argument(_))));
        assert!(matches!(taper_and_pad(&f, 11, (32, 32), 0.0), Err(Error::Argument(_))));
        assert!(matches!(taper_and_pad(&f, 2, (24, 32), 0.0), Err(Error::Argument(_))));
    }

    #[test]
    fn constant_field_has_zero_coefficients() {
        for fam in Family::ALL {
            let f = Field2D::new(Array2::from_elem((32, 32), 3.5)).unwrap();
            let pyr = ndwt(&f, 5, &FilterPair::new(fam)).unwrap();
            assert!(pyr.data.iter().all(|v| v.abs() < 1e-10), "{fam}");
        }
    }

    #[test]
    fn impulse_reproduces_diagonal_taps() {
        let filter = build_filter("haar").unwrap();
        let mut x = Array2::zeros((8, 8));
        x[[3, 5]] = 1.0;
        let pyr = ndwt(&Field2D::new(x).unwrap(), 1, &filter).unwrap();
        let d = pyr.get(1, Direction::D);
        let expect = [[0.5, -0.5], [-0.5, 0.5]];
        for ((i, j), v) in d.indexed_iter() {
            let e = if (3..5).contains(&i) && (5..7).contains(&j) {
                expect[i - 3][j - 5]
            } else {
                0.0
            };
            assert!((v - e).abs() < 1e-15, "({i},{j})");
        }
        let per = periodogram(pyr);
        let d = per.get(1, Direction::D);
        assert!((d[[3, 5]] - 0.25).abs() < 1e-15);
        assert!((d[[4, 6]] - 0.25).abs() < 1e-15);
        assert!((d.sum() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn embedded_wavelet_has_unit_coefficient() {
        let filter = build_filter("d4").unwrap();
        let w = wavelet_2d(&filter, 2, Direction::D).unwrap().taps;
        let l = w.nrows();
        let u0 = (20usize, 17usize);
        // psi_{j,u0}(r) = psi_{j,u0-r}
        let mut x = Array2::zeros((32, 32));
        for k1 in 0..l {
            for k2 in 0..l {
                x[[(u0.0 + 32 - k1) % 32, (u0.1 + 32 - k2) % 32]] = w[[k1, k2]];
            }
        }
        let pyr = ndwt(&Field2D::new(x).unwrap(), 2, &filter).unwrap();
        assert!((pyr.get(2, Direction::D)[[u0.0, u0.1]] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn too_many_scales_rejected() {
        let f = random_field((16, 32), 2);
        assert!(matches!(ndwt(&f, 5, &FilterPair::new(Family::Haar)), Err(Error::Argument(_))));
        let f = random_field((12, 16), 2);
        assert!(ndwt(&f, 1, &FilterPair::new(Family::Haar)).is_err());
    }

    #[test]
    fn translation_covariance() {
        let filter = FilterPair::new(Family::D4);
        let f = random_field((32, 16), 7);
        let (a, b) = (5usize, 11usize);
        let shifted = Array2::from_shape_fn((32, 16), |(i, j)| f.values[[(i + 32 - a) % 32, (j + 16 - b) % 16]]);
        let p = ndwt(&f, 4, &filter).unwrap();
        let q = ndwt(&Field2D::new(shifted).unwrap(), 4, &filter).unwrap();
        for k in 0..12 {
            let pk = p.data.index_axis(Axis(0), k);
            let qk = q.data.index_axis(Axis(0), k);
            for ((i, j), v) in qk.indexed_iter() {
                assert!((v - pk[[(i + 32 - a) % 32, (j + 16 - b) % 16]]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn adjoint_identity() {
        let filter = FilterPair::new(Family::D6);
        let x = random_field((32, 32), 11);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut a = CoefficientPyramid::zeros(4, Family::D6, (32, 32));
        a.data.mapv_inplace(|_| rng.random_range(-1.0..1.0));
        let lhs: f64 = (&ndwt(&x, 4, &filter).unwrap().data * &a.data).sum();
        let rhs: f64 = (&x.values * &adjoint_ndwt(&a, &filter).unwrap()).sum();
        assert!((lhs - rhs).abs() < 1e-9, "{lhs} vs {rhs}");
    }

    #[test]
    fn periodogram_is_nonnegative() {
        let f = random_field((16, 16), 5);
        let per = periodogram(ndwt(&f, 3, &FilterPair::new(Family::Haar)).unwrap());
        assert!(per.data.iter().all(|&v| v >= 0.0));
        assert_eq!(per.content, PyramidContent::Periodogram);
        let zero = periodogram(CoefficientPyramid::zeros(2, Family::Haar, (8, 8)));
        assert!(zero.data.iter().all(|&v| v == 0.0));
    }
}
