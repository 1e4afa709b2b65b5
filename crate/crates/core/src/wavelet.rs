//! Discrete wavelets, autocorrelation wavelets and the operator matrix.
//!
//! Discrete wavelets at scale `j` are built from the filter pair with the
//! dilation recursion
//!
//! ```text
//! phi_1 = h,  psi_1 = g
//! phi_{j+1}[n] = sum_k h[k] phi_j[n - 2^j k]
//! psi_{j+1}[n] = sum_k g[k] phi_j[n - 2^j k]
//! ```
//!
//! which yields `L_j = (2^j - 1)(N_h - 1) + 1` taps at scale `j`. The same
//! cascade, applied to a field with periodic convolutions, is the fast
//! non-decimated transform in [`crate::ndwt`].
//!
//! 2D wavelets are separable. Axis 1 is the row axis (North-South), axis 2 the
//! column axis (East-West):
//!
//! | direction | axis 1 | axis 2 |
//! |-----------|--------|--------|
//! | `h`       | father | mother |
//! | `v`       | mother | father |
//! | `d`       | mother | mother |

use std::fmt;
use std::str::FromStr;

use log::debug;
use nalgebra::{Cholesky, DMatrix, SymmetricEigen};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest number of scales accepted by [`operator_matrix`].
pub const MAX_SCALES: u32 = 12;

/// Operator matrices with a larger condition number are rejected.
pub const MAX_CONDITION: f64 = 1e12;

const INVERSE_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Haar,
    /// Extremal-phase Daubechies, 4 taps.
    D4,
    D6,
    D8,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Haar, Family::D4, Family::D6, Family::D8];

    pub fn name(&self) -> &'static str {
        match self {
            Family::Haar => "haar",
            Family::D4 => "d4",
            Family::D6 => "d6",
            Family::D8 => "d8",
        }
    }

    /// Father (low-pass) filter taps.
    fn scaling_taps(&self) -> Vec<f64> {
        match self {
            Family::Haar => vec![std::f64::consts::FRAC_1_SQRT_2; 2],
            Family::D4 => {
                let s3 = 3f64.sqrt();
                let norm = 4.0 * std::f64::consts::SQRT_2;
                vec![
                    (1.0 + s3) / norm,
                    (3.0 + s3) / norm,
                    (3.0 - s3) / norm,
                    (1.0 - s3) / norm,
                ]
            }
            Family::D6 => {
                let a = 10f64.sqrt();
                let b = (5.0 + 2.0 * a).sqrt();
                let norm = 16.0 * std::f64::consts::SQRT_2;
                vec![
                    (1.0 + a + b) / norm,
                    (5.0 + a + 3.0 * b) / norm,
                    (10.0 - 2.0 * a + 2.0 * b) / norm,
                    (10.0 - 2.0 * a - 2.0 * b) / norm,
                    (5.0 + a - 3.0 * b) / norm,
                    (1.0 + a - b) / norm,
                ]
            }
            // Spectral factorization evaluated in 40-digit arithmetic.
            Family::D8 => vec![
                0.230_377_813_308_896_5,
                0.714_846_570_552_915_6,
                0.630_880_767_929_858_9,
                -0.027_983_769_416_859_854,
                -0.187_034_811_719_093_08,
                0.030_841_381_835_560_764,
                0.032_883_011_666_885_2,
                -0.010_597_401_785_069_032,
            ],
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "haar" | "d2" | "db1" => Ok(Family::Haar),
            "d4" | "db2" => Ok(Family::D4),
            "d6" | "db3" => Ok(Family::D6),
            "d8" | "db4" => Ok(Family::D8),
            other => Err(Error::Config(format!(
                "unknown wavelet family '{other}' (supported: haar, d4, d6, d8)"
            ))),
        }
    }
}

/// Quadrature mirror filter pair of an orthonormal wavelet family.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterPair {
    pub family: Family,
    pub low_pass: Vec<f64>,
    pub high_pass: Vec<f64>,
}

impl FilterPair {
    pub fn new(family: Family) -> Self {
        let low_pass = family.scaling_taps();
        let n = low_pass.len();
        // g[k] = (-1)^k h[N-1-k]
        let high_pass = (0..n)
            .map(|k| {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                sign * low_pass[n - 1 - k]
            })
            .collect();
        Self {
            family,
            low_pass,
            high_pass,
        }
    }

    pub fn family_name(&self) -> &'static str {
        self.family.name()
    }

    pub fn n_taps(&self) -> usize {
        self.low_pass.len()
    }

    pub fn taps(&self, kind: Kind) -> &[f64] {
        match kind {
            Kind::Father => &self.low_pass,
            Kind::Mother => &self.high_pass,
        }
    }
}

/// Looks up a filter pair by family name.
pub fn build_filter(family_name: &str) -> Result<FilterPair> {
    Ok(FilterPair::new(family_name.parse()?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Kind {
    Mother,
    Father,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    H,
    V,
    D,
}

impl Direction {
    pub const ALL: [Direction; 3] = [Direction::H, Direction::V, Direction::D];

    pub fn index(self) -> usize {
        match self {
            Direction::H => 0,
            Direction::V => 1,
            Direction::D => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Kinds applied along (axis 1, axis 2).
    pub fn axis_kinds(self) -> (Kind, Kind) {
        match self {
            Direction::H => (Kind::Father, Kind::Mother),
            Direction::V => (Kind::Mother, Kind::Father),
            Direction::D => (Kind::Mother, Kind::Mother),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::H => "h",
            Direction::V => "v",
            Direction::D => "d",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "h" | "horizontal" => Ok(Direction::H),
            "v" | "vertical" => Ok(Direction::V),
            "d" | "diagonal" => Ok(Direction::D),
            other => Err(Error::Config(format!("unknown direction '{other}'"))),
        }
    }
}

/// Row/column of `(scale, direction)` in the operator matrix and in every
/// scale-direction stack of the crate.
pub fn stack_index(scale: u32, direction: Direction) -> usize {
    3 * (scale as usize - 1) + direction.index()
}

/// Inverse of [`stack_index`].
pub fn stack_entry(index: usize) -> (u32, Direction) {
    ((index / 3 + 1) as u32, Direction::ALL[index % 3])
}

/// Number of taps of a discrete wavelet at scale `j`.
pub fn support_length(n_taps: usize, scale: u32) -> usize {
    ((1usize << scale) - 1) * (n_taps - 1) + 1
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteWavelet1D {
    pub scale: u32,
    pub kind: Kind,
    pub taps: Vec<f64>,
}

fn check_scale(scale: u32) -> Result<()> {
    if scale == 0 || scale > 30 {
        return Err(Error::Argument(format!("scale must be in 1..=30, got {scale}")));
    }
    Ok(())
}

/// Discrete mother or father wavelet at scale `j` from the dilation recursion.
pub fn discrete_wavelet(filter: &FilterPair, scale: u32, kind: Kind) -> Result<DiscreteWavelet1D> {
    check_scale(scale)?;
    let h = &filter.low_pass;
    let mut father = h.clone();
    for level in 1..scale {
        let last = level + 1 == scale;
        let taps = if last { filter.taps(kind) } else { h.as_slice() };
        father = dilate_step(&father, taps, 1usize << level);
    }
    let taps = if scale == 1 {
        filter.taps(kind).to_vec()
    } else {
        father
    };
    Ok(DiscreteWavelet1D { scale, kind, taps })
}

// out[n] = sum_k f[k] prev[n - step k]
fn dilate_step(prev: &[f64], f: &[f64], step: usize) -> Vec<f64> {
    let len = prev.len() + step * (f.len() - 1);
    let mut out = vec![0.0; len];
    for (k, &fk) in f.iter().enumerate() {
        let off = step * k;
        for (o, &p) in out[off..off + prev.len()].iter_mut().zip(prev) {
            *o += fk * p;
        }
    }
    out
}

/// Closed-form Haar wavelet taps at scale `j`.
pub fn haar_closed_form(scale: u32, kind: Kind) -> Vec<f64> {
    let len = 1usize << scale;
    let amp = 2f64.powf(-(scale as f64) / 2.0);
    (0..len)
        .map(|n| match kind {
            Kind::Father => amp,
            Kind::Mother if n < len / 2 => amp,
            Kind::Mother => -amp,
        })
        .collect()
}

/// Separable 2D wavelet; `taps[[k1, k2]]` with `k1` along axis 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Wavelet2D {
    pub scale: u32,
    pub direction: Direction,
    pub taps: Array2<f64>,
}

pub fn wavelet_2d(filter: &FilterPair, scale: u32, direction: Direction) -> Result<Wavelet2D> {
    let (k1, k2) = direction.axis_kinds();
    let a = discrete_wavelet(filter, scale, k1)?.taps;
    let b = discrete_wavelet(filter, scale, k2)?.taps;
    let taps = Array2::from_shape_fn((a.len(), b.len()), |(i, j)| a[i] * b[j]);
    Ok(Wavelet2D {
        scale,
        direction,
        taps,
    })
}

/// 1D autocorrelation wavelet over lags `-(L-1)..=(L-1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Autocorr1D {
    pub scale: u32,
    pub kind: Kind,
    /// `values[tau + max_lag]`
    pub values: Vec<f64>,
}

impl Autocorr1D {
    pub fn max_lag(&self) -> i64 {
        (self.values.len() as i64 - 1) / 2
    }

    /// Value at `lag`, zero outside the support.
    pub fn at(&self, lag: i64) -> f64 {
        let m = self.max_lag();
        if lag.abs() > m {
            0.0
        } else {
            self.values[(lag + m) as usize]
        }
    }

    /// Sum over lags of the product with another autocorrelation wavelet.
    pub fn inner(&self, other: &Autocorr1D) -> f64 {
        let m = self.max_lag().min(other.max_lag());
        (-m..=m).map(|t| self.at(t) * other.at(t)).sum()
    }
}

pub fn autocorr_wavelet_1d(wavelet: &DiscreteWavelet1D) -> Autocorr1D {
    let taps = &wavelet.taps;
    let len = taps.len();
    let mut values = vec![0.0; 2 * len - 1];
    for lag in 0..len {
        let s: f64 = taps[..len - lag]
            .iter()
            .zip(&taps[lag..])
            .map(|(a, b)| a * b)
            .sum();
        values[len - 1 + lag] = s;
        values[len - 1 - lag] = s;
    }
    Autocorr1D {
        scale: wavelet.scale,
        kind: wavelet.kind,
        values,
    }
}

/// 2D autocorrelation wavelet stored as its two 1D factors.
#[derive(Debug, Clone, PartialEq)]
pub struct Autocorr2D {
    pub scale: u32,
    pub direction: Direction,
    pub axis1: Autocorr1D,
    pub axis2: Autocorr1D,
}

impl Autocorr2D {
    pub fn max_lag(&self) -> i64 {
        self.axis1.max_lag()
    }

    pub fn at(&self, lag1: i64, lag2: i64) -> f64 {
        self.axis1.at(lag1) * self.axis2.at(lag2)
    }

    /// Dense `(2L-1) x (2L-1)` array; entry `[[t1 + L-1, t2 + L-1]]`.
    pub fn to_array(&self) -> Array2<f64> {
        let a = &self.axis1.values;
        let b = &self.axis2.values;
        Array2::from_shape_fn((a.len(), b.len()), |(i, j)| a[i] * b[j])
    }
}

pub fn autocorr_wavelet_2d(scale: u32, direction: Direction, filter: &FilterPair) -> Result<Autocorr2D> {
    let (k1, k2) = direction.axis_kinds();
    Ok(Autocorr2D {
        scale,
        direction,
        axis1: autocorr_wavelet_1d(&discrete_wavelet(filter, scale, k1)?),
        axis2: autocorr_wavelet_1d(&discrete_wavelet(filter, scale, k2)?),
    })
}

/// 1D father and mother autocorrelation wavelets for scales `1..=J`.
#[derive(Debug, Clone)]
pub struct AutocorrBank {
    pub family: Family,
    pub scales: u32,
    father: Vec<Autocorr1D>,
    mother: Vec<Autocorr1D>,
}

impl AutocorrBank {
    pub fn new(filter: &FilterPair, scales: u32) -> Result<Self> {
        if scales == 0 || scales > MAX_SCALES {
            return Err(Error::Argument(format!(
                "number of scales must be in 1..={MAX_SCALES}, got {scales}"
            )));
        }
        let build = |kind| -> Result<Vec<Autocorr1D>> {
            (1..=scales)
                .map(|j| Ok(autocorr_wavelet_1d(&discrete_wavelet(filter, j, kind)?)))
                .collect()
        };
        Ok(Self {
            family: filter.family,
            scales,
            father: build(Kind::Father)?,
            mother: build(Kind::Mother)?,
        })
    }

    pub fn get(&self, scale: u32, kind: Kind) -> &Autocorr1D {
        let i = scale as usize - 1;
        match kind {
            Kind::Father => &self.father[i],
            Kind::Mother => &self.mother[i],
        }
    }

    pub fn get_2d(&self, scale: u32, direction: Direction) -> Autocorr2D {
        let (k1, k2) = direction.axis_kinds();
        Autocorr2D {
            scale,
            direction,
            axis1: self.get(scale, k1).clone(),
            axis2: self.get(scale, k2).clone(),
        }
    }

    /// Largest lag with a nonzero value at any scale.
    pub fn max_lag(&self) -> i64 {
        self.mother[self.scales as usize - 1].max_lag()
    }

    /// `sum_tau Psi_i^l(tau) Psi_j^m(tau)`, evaluated per axis.
    pub fn inner_2d(&self, i: u32, l: Direction, j: u32, m: Direction) -> f64 {
        let (a1, a2) = l.axis_kinds();
        let (b1, b2) = m.axis_kinds();
        self.get(i, a1).inner(self.get(j, b1)) * self.get(i, a2).inner(self.get(j, b2))
    }
}

/// Gram matrix of the 2D autocorrelation wavelets and its inverse.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    pub scales: u32,
    pub family: Family,
    pub entries: DMatrix<f64>,
    pub inverse: DMatrix<f64>,
    /// Ratio of extreme eigenvalues of `entries`.
    pub condition: f64,
}

impl OperatorMatrix {
    pub fn from_bank(bank: &AutocorrBank) -> Result<Self> {
        let n = 3 * bank.scales as usize;
        let mut entries = DMatrix::zeros(n, n);
        for r in 0..n {
            let (i, l) = stack_entry(r);
            for c in r..n {
                let (j, m) = stack_entry(c);
                let v = bank.inner_2d(i, l, j, m);
                entries[(r, c)] = v;
                entries[(c, r)] = v;
            }
        }

        let eig = SymmetricEigen::new(entries.clone());
        let max = eig.eigenvalues.max();
        let min = eig.eigenvalues.min();
        let condition = if min > 0.0 { max / min } else { f64::INFINITY };
        debug!(
            "operator matrix {} J={}: eigenvalues [{min:.3e}, {max:.3e}], condition {condition:.3e}",
            bank.family, bank.scales
        );
        if !(condition <= MAX_CONDITION) {
            return Err(Error::Estimation(format!(
                "operator matrix is numerically singular (condition estimate {condition:.3e})"
            )));
        }
        let inverse = Cholesky::new(entries.clone())
            .ok_or_else(|| {
                Error::Estimation(format!(
                    "operator matrix is not positive definite (condition estimate {condition:.3e})"
                ))
            })?
            .inverse();

        let residual = (&entries * &inverse - DMatrix::identity(n, n)).amax();
        if residual >= INVERSE_TOLERANCE {
            return Err(Error::Estimation(format!(
                "operator matrix inverse residual {residual:.3e} (condition estimate {condition:.3e})"
            )));
        }

        Ok(Self {
            scales: bank.scales,
            family: bank.family,
            entries,
            inverse,
            condition,
        })
    }

    pub fn dim(&self) -> usize {
        3 * self.scales as usize
    }

    pub fn entry(&self, i: u32, l: Direction, j: u32, m: Direction) -> f64 {
        self.entries[(stack_index(i, l), stack_index(j, m))]
    }

    /// `A^{-1} p` for a stacked vector `p`.
    pub fn apply_inverse(&self, p: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|r| (0..n).map(|c| self.inverse[(r, c)] * p[c]).sum())
            .collect()
    }
}

/// Builds the operator matrix for scales `1..=J`.
pub fn operator_matrix(scales: u32, filter: &FilterPair) -> Result<OperatorMatrix> {
    OperatorMatrix::from_bank(&AutocorrBank::new(filter, scales)?)
}
