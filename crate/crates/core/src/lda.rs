//! Fisher linear discriminant analysis with a pooled Gaussian class model.
//!
//! Discriminant vectors solve `S_B v = lambda S_W v`. `S_W` is factorised as
//! `L L^T`, the symmetric problem `L^{-1} S_B L^{-T} u = lambda u` is solved and
//! `v = L^{-T} u`, so the vectors are `S_W`-orthonormal. For every subspace
//! size the class means and the pooled within-class covariance are
//! re-estimated from the projected training data.

use std::sync::atomic::{AtomicBool, Ordering};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative ridge added to a scatter matrix whose factorisation fails.
pub const RIDGE_EPS: f64 = 1e-8;

/// Per-class member vectors plus one observation per class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassedDataset {
    pub labels: Vec<String>,
    /// `members[i][j]` is member `j` of class `i`.
    pub members: Vec<Vec<Vec<f64>>>,
    pub observations: Vec<Vec<f64>>,
}

impl ClassedDataset {
    pub fn new(labels: Vec<String>, members: Vec<Vec<Vec<f64>>>, observations: Vec<Vec<f64>>) -> Result<Self> {
        let n_c = members.len();
        if n_c < 2 {
            return Err(Error::Validation(format!("need at least 2 classes, got {n_c}")));
        }
        if labels.len() != n_c || observations.len() != n_c {
            return Err(Error::Validation(format!(
                "{n_c} member classes but {} labels and {} observations",
                labels.len(),
                observations.len()
            )));
        }
        let n_e = members[0].len();
        if n_e < 2 {
            return Err(Error::Validation(format!(
                "class '{}' needs at least 2 members, got {n_e}",
                labels[0]
            )));
        }
        let p = observations[0].len();
        if p == 0 {
            return Err(Error::Validation("vectors are empty".into()));
        }
        for (i, class) in members.iter().enumerate() {
            if class.len() != n_e {
                return Err(Error::Validation(format!(
                    "class '{}' has {} members, expected {n_e}",
                    labels[i],
                    class.len()
                )));
            }
            for v in class.iter().chain(std::iter::once(&observations[i])) {
                if v.len() != p {
                    return Err(Error::Validation(format!(
                        "class '{}' has a vector of length {}, expected {p}",
                        labels[i],
                        v.len()
                    )));
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::Validation(format!("class '{}' has non-finite values", labels[i])));
                }
            }
        }
        Ok(Self {
            labels,
            members,
            observations,
        })
    }

    pub fn n_classes(&self) -> usize {
        self.members.len()
    }

    pub fn n_members(&self) -> usize {
        self.members[0].len()
    }

    pub fn dim(&self) -> usize {
        self.observations[0].len()
    }
}

#[derive(Debug, Clone)]
struct Subspace {
    /// `means[i]` is the projected mean of class `i`.
    means: Vec<DVector<f64>>,
    chol: Cholesky<f64, Dyn>,
    log_det: f64,
}

#[derive(Debug, Clone)]
pub struct LdaModel {
    pub dim: usize,
    /// Columns are discriminant vectors, by decreasing ratio.
    pub vectors: DMatrix<f64>,
    /// Discriminant ratios, descending.
    pub ratios: Vec<f64>,
    pub priors: Vec<f64>,
    subspaces: Vec<Subspace>,
}

fn to_vector(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

static RIDGE_WARNED: AtomicBool = AtomicBool::new(false);

/// Cholesky factor, retrying once with a ridge of `RIDGE_EPS * trace / p`.
fn factorize(m: &DMatrix<f64>, what: &str) -> Result<Cholesky<f64, Dyn>> {
    if let Some(c) = Cholesky::new(m.clone()) {
        return Ok(c);
    }
    let p = m.nrows();
    let ridge = RIDGE_EPS * m.trace().abs().max(f64::MIN_POSITIVE) / p as f64;
    // Standardized spectra sum to zero, so this fires on every fit of such
    // data; warn once per process.
    if RIDGE_WARNED.swap(true, Ordering::Relaxed) {
        log::debug!("{what} is not positive definite, adding ridge {ridge:.3e}");
    } else {
        log::warn!("{what} is not positive definite, adding ridge {ridge:.3e} (further occurrences logged at debug level)");
    }
    let reg = m + DMatrix::identity(p, p) * ridge;
    Cholesky::new(reg).ok_or_else(|| Error::Estimation(format!("{what} is singular after regularisation")))
}

fn class_means(classes: &[Vec<Vec<f64>>]) -> Vec<DVector<f64>> {
    classes
        .iter()
        .map(|c| {
            let mut m = DVector::zeros(c[0].len());
            for x in c {
                m += to_vector(x);
            }
            m / c.len() as f64
        })
        .collect()
}

fn pooled_within(classes: &[Vec<Vec<f64>>], means: &[DVector<f64>]) -> Result<DMatrix<f64>> {
    let p = means[0].len();
    let n: usize = classes.iter().map(Vec::len).sum();
    let dof = n.checked_sub(classes.len()).filter(|&d| d > 0).ok_or_else(|| {
        Error::Estimation("pooled covariance needs more samples than classes".into())
    })?;
    let mut s = DMatrix::zeros(p, p);
    for (c, m) in classes.iter().zip(means) {
        for x in c {
            let d = to_vector(x) - m;
            s += &d * d.transpose();
        }
    }
    Ok(s / dof as f64)
}

impl LdaModel {
    /// Fits discriminant vectors and class statistics on `classes`
    /// (`classes[i]` holds the training vectors of class `i`).
    pub fn fit(classes: &[Vec<Vec<f64>>]) -> Result<Self> {
        Self::fit_impl(classes, None)
    }

    /// Fits discriminant vectors without class `excluded`; class statistics
    /// in the resulting subspaces still cover every class.
    pub fn fit_excluding(classes: &[Vec<Vec<f64>>], excluded: usize) -> Result<Self> {
        if excluded >= classes.len() {
            return Err(Error::Argument(format!(
                "excluded class {excluded} out of range for {} classes",
                classes.len()
            )));
        }
        Self::fit_impl(classes, Some(excluded))
    }

    fn fit_impl(classes: &[Vec<Vec<f64>>], excluded: Option<usize>) -> Result<Self> {
        let n_c = classes.len();
        let fit_classes: Vec<Vec<Vec<f64>>> = classes
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != excluded)
            .map(|(_, c)| c.clone())
            .collect();
        if fit_classes.len() < 2 {
            return Err(Error::Estimation(format!(
                "discriminant analysis needs at least 2 classes, got {}",
                fit_classes.len()
            )));
        }
        if classes.iter().any(Vec::is_empty) {
            return Err(Error::Estimation("a class has no training vectors".into()));
        }
        let p = classes[0][0].len();
        if classes.iter().flatten().any(|x| x.len() != p) {
            return Err(Error::Argument("training vectors differ in length".into()));
        }

        let means = class_means(&fit_classes);
        let n: usize = fit_classes.iter().map(Vec::len).sum();
        let mut grand = DVector::zeros(p);
        for (c, m) in fit_classes.iter().zip(&means) {
            grand += m * c.len() as f64;
        }
        grand /= n as f64;
        let mut s_b = DMatrix::zeros(p, p);
        for (c, m) in fit_classes.iter().zip(&means) {
            let d = m - &grand;
            s_b += (&d * d.transpose()) * c.len() as f64;
        }
        s_b /= (fit_classes.len() - 1) as f64;
        let s_w = pooled_within(&fit_classes, &means)?;

        let l = factorize(&s_w, "within-class scatter")?.l();
        let l_inv = l
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Estimation("within-class factor is singular".into()))?;
        let mut m = &l_inv * s_b * l_inv.transpose();
        m = (&m + m.transpose()) * 0.5;
        let eig = SymmetricEigen::new(m);
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let k = (fit_classes.len() - 1).min(p);
        let mut vectors = DMatrix::zeros(p, k);
        let mut ratios = Vec::with_capacity(k);
        for (col, &idx) in order.iter().take(k).enumerate() {
            let mut v = l_inv.transpose() * eig.eigenvectors.column(idx);
            let lead = v.iter().copied().fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
            if lead < 0.0 {
                v = -v;
            }
            vectors.set_column(col, &v);
            ratios.push(eig.eigenvalues[idx]);
        }

        let subspaces = (1..=k)
            .map(|n_vec| Self::subspace(classes, &vectors.columns(0, n_vec).into_owned(), n_vec))
            .collect::<Result<Vec<_>>>()?;

        Ok(Self {
            dim: p,
            vectors,
            ratios,
            priors: vec![1.0 / n_c as f64; n_c],
            subspaces,
        })
    }

    fn subspace(classes: &[Vec<Vec<f64>>], v: &DMatrix<f64>, n_vec: usize) -> Result<Subspace> {
        let projected: Vec<Vec<Vec<f64>>> = classes
            .iter()
            .map(|c| c.iter().map(|x| (v.transpose() * to_vector(x)).as_slice().to_vec()).collect())
            .collect();
        let means = class_means(&projected);
        let cov = pooled_within(&projected, &means)?;
        let chol = factorize(&cov, &format!("projected covariance ({n_vec} vectors)"))?;
        let log_det = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        if !log_det.is_finite() {
            return Err(Error::Estimation(format!(
                "projected covariance ({n_vec} vectors) is singular"
            )));
        }
        Ok(Subspace { means, chol, log_det })
    }

    pub fn n_classes(&self) -> usize {
        self.priors.len()
    }

    /// Number of discriminant vectors available.
    pub fn n_vectors(&self) -> usize {
        self.vectors.ncols()
    }

    fn space(&self, n_vec: usize) -> Result<&Subspace> {
        if n_vec == 0 || n_vec > self.n_vectors() {
            return Err(Error::Argument(format!(
                "subspace size {n_vec} outside 1..={}",
                self.n_vectors()
            )));
        }
        Ok(&self.subspaces[n_vec - 1])
    }

    pub fn project(&self, x: &[f64], n_vec: usize) -> DVector<f64> {
        self.vectors.columns(0, n_vec).transpose() * to_vector(x)
    }

    /// Projected mean of `class` in the first `n_vec` vectors.
    pub fn projected_mean(&self, class: usize, n_vec: usize) -> Result<&DVector<f64>> {
        Ok(&self.space(n_vec)?.means[class])
    }

    /// Pooled projected within-class covariance.
    pub fn projected_covariance(&self, n_vec: usize) -> Result<DMatrix<f64>> {
        let l = self.space(n_vec)?.chol.l();
        Ok(&l * l.transpose())
    }

    /// Gaussian log-density of the projection of `x` under `class`.
    pub fn log_likelihood(&self, x: &[f64], class: usize, n_vec: usize) -> Result<f64> {
        let space = self.space(n_vec)?;
        if x.len() != self.dim {
            return Err(Error::Argument(format!("vector length {} != {}", x.len(), self.dim)));
        }
        let mean = space
            .means
            .get(class)
            .ok_or_else(|| Error::Argument(format!("class {class} out of range")))?;
        let d = self.project(x, n_vec) - mean;
        let y = space
            .chol
            .l()
            .solve_lower_triangular(&d)
            .ok_or_else(|| Error::Estimation("singular projected covariance".into()))?;
        let ll = -0.5 * (n_vec as f64 * (2.0 * std::f64::consts::PI).ln() + space.log_det + y.norm_squared());
        if !ll.is_finite() {
            return Err(Error::Estimation(format!("non-finite log-likelihood for class {class}")));
        }
        Ok(ll)
    }

    /// `p(C_i | x)` for every class.
    pub fn posterior(&self, x: &[f64], n_vec: usize) -> Result<Vec<f64>> {
        let logs = (0..self.n_classes())
            .map(|i| Ok(self.log_likelihood(x, i, n_vec)? + self.priors[i].ln()))
            .collect::<Result<Vec<f64>>>()?;
        Ok(softmax(&logs))
    }
}

pub fn softmax(logs: &[f64]) -> Vec<f64> {
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}
