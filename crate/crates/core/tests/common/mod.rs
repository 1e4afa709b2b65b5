//! Reference implementations that share no code with the library beyond
//! plain data types. Each one takes the slow, direct route.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use ndarray::Array2;

/// Scaling filter taps written out independently of the library.
pub fn scaling_filter(name: &str) -> Vec<f64> {
    match name {
        "haar" => vec![0.5f64.sqrt(), 0.5f64.sqrt()],
        "d4" => {
            let s3 = 3f64.sqrt();
            let d = 4.0 * 2f64.sqrt();
            vec![(1.0 + s3) / d, (3.0 + s3) / d, (3.0 - s3) / d, (1.0 - s3) / d]
        }
        other => panic!("no oracle filter for {other}"),
    }
}

pub fn wavelet_filter(h: &[f64]) -> Vec<f64> {
    let n = h.len();
    (0..n)
        .map(|k| if k % 2 == 0 { h[n - 1 - k] } else { -h[n - 1 - k] })
        .collect()
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn upsample(f: &[f64], step: usize) -> Vec<f64> {
    let mut out = vec![0.0; (f.len() - 1) * step + 1];
    for (k, v) in f.iter().enumerate() {
        out[k * step] = *v;
    }
    out
}

/// Scale-`j` discrete wavelet as the polynomial product
/// `F(z^{2^{j-1}}) prod_{i<j-1} H(z^{2^i})`, with `F` = H (father) or G (mother).
pub fn discrete_wavelet(h: &[f64], j: u32, mother: bool) -> Vec<f64> {
    let g = wavelet_filter(h);
    let mut acc = vec![1.0];
    for i in 0..j - 1 {
        acc = poly_mul(&acc, &upsample(h, 1 << i));
    }
    let last = if mother { &g } else { h };
    poly_mul(&acc, &upsample(last, 1 << (j - 1)))
}

/// Direction index 0 = h (father, mother), 1 = v (mother, father),
/// 2 = d (mother, mother); first entry along axis 1.
pub fn wavelet_2d(h: &[f64], j: u32, dir: usize) -> Array2<f64> {
    let (m1, m2) = [(false, true), (true, false), (true, true)][dir];
    let a = discrete_wavelet(h, j, m1);
    let b = discrete_wavelet(h, j, m2);
    Array2::from_shape_fn((a.len(), b.len()), |(i, k)| a[i] * b[k])
}

/// `d[u] = sum_r X[r] w[u - r]`, indices wrapped on the grid.
pub fn periodic_convolve(x: &Array2<f64>, w: &Array2<f64>) -> Array2<f64> {
    let (r, c) = x.dim();
    let mut out = Array2::zeros((r, c));
    for u1 in 0..r {
        for u2 in 0..c {
            let mut s = 0.0;
            for ((k1, k2), wv) in w.indexed_iter() {
                s += wv * x[[(u1 + r * k1 - k1) % r, (u2 + c * k2 - k2) % c]];
            }
            out[[u1, u2]] = s;
        }
    }
    out
}

/// Full 2D autocorrelation `sum_k w[k] w[k + tau]` over
/// `tau in [-(L1-1), L1-1] x [-(L2-1), L2-1]`.
pub fn autocorr_2d(w: &Array2<f64>) -> Array2<f64> {
    let (l1, l2) = w.dim();
    let mut out = Array2::zeros((2 * l1 - 1, 2 * l2 - 1));
    for t1 in 0..2 * l1 - 1 {
        for t2 in 0..2 * l2 - 1 {
            let (d1, d2) = (t1 as isize - (l1 as isize - 1), t2 as isize - (l2 as isize - 1));
            let mut s = 0.0;
            for ((a, b), v) in w.indexed_iter() {
                let (p, q) = (a as isize + d1, b as isize + d2);
                if p >= 0 && q >= 0 && (p as usize) < l1 && (q as usize) < l2 {
                    s += v * w[[p as usize, q as usize]];
                }
            }
            out[[t1, t2]] = s;
        }
    }
    out
}

/// `sum_tau a(tau) b(tau)` for centred lag arrays of possibly different size.
pub fn lag_inner(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let (ca, cb) = ((a.nrows() / 2) as isize, (b.nrows() / 2) as isize);
    let (da, db) = ((a.ncols() / 2) as isize, (b.ncols() / 2) as isize);
    let mut s = 0.0;
    for ((i, j), v) in a.indexed_iter() {
        let (t1, t2) = (i as isize - ca, j as isize - da);
        let (p, q) = (t1 + cb, t2 + db);
        if p >= 0 && q >= 0 && (p as usize) < b.nrows() && (q as usize) < b.ncols() {
            s += v * b[[p as usize, q as usize]];
        }
    }
    s
}

/// Operator matrix by explicit 2D lag summation; index `3(j-1) + dir`.
pub fn operator_matrix(h: &[f64], scales: u32) -> DMatrix<f64> {
    let acs: Vec<Array2<f64>> = (1..=scales)
        .flat_map(|j| (0..3).map(move |d| (j, d)))
        .map(|(j, d)| autocorr_2d(&wavelet_2d(h, j, d)))
        .collect();
    let n = acs.len();
    DMatrix::from_fn(n, n, |a, b| lag_inner(&acs[a], &acs[b]))
}

/// Brute-force discriminant analysis with a pooled Gaussian class model.
pub struct LdaOracle {
    /// Columns are discriminant vectors, decreasing ratio.
    pub vectors: DMatrix<f64>,
    classes: Vec<Vec<DVector<f64>>>,
}

fn mean(xs: &[DVector<f64>]) -> DVector<f64> {
    xs.iter().fold(DVector::zeros(xs[0].len()), |a, x| a + x) / xs.len() as f64
}

fn pooled(classes: &[Vec<DVector<f64>>]) -> DMatrix<f64> {
    let p = classes[0][0].len();
    let n: usize = classes.iter().map(Vec::len).sum();
    let mut s = DMatrix::zeros(p, p);
    for c in classes {
        let m = mean(c);
        for x in c {
            s += (x - &m) * (x - &m).transpose();
        }
    }
    s / (n - classes.len()) as f64
}

impl LdaOracle {
    /// Vectors from `S_W^{-1/2} S_B S_W^{-1/2}` using the symmetric inverse
    /// square root; `exclude` drops one class from the vector fit only.
    pub fn fit(data: &[Vec<Vec<f64>>], exclude: Option<usize>) -> Self {
        let classes: Vec<Vec<DVector<f64>>> = data
            .iter()
            .map(|c| c.iter().map(|x| DVector::from_column_slice(x)).collect())
            .collect();
        let fit: Vec<Vec<DVector<f64>>> = classes
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != exclude)
            .map(|(_, c)| c.clone())
            .collect();
        let p = classes[0][0].len();
        let all: Vec<DVector<f64>> = fit.iter().flatten().cloned().collect();
        let grand = mean(&all);
        let mut s_b = DMatrix::zeros(p, p);
        for c in &fit {
            let d = mean(c) - &grand;
            s_b += &d * d.transpose() * c.len() as f64;
        }
        s_b /= (fit.len() - 1) as f64;
        let s_w = pooled(&fit);
        let e = SymmetricEigen::new(s_w);
        let inv_sqrt = &e.eigenvectors
            * DMatrix::from_diagonal(&e.eigenvalues.map(|v| 1.0 / v.sqrt()))
            * e.eigenvectors.transpose();
        let m = &inv_sqrt * s_b * &inv_sqrt;
        let e2 = SymmetricEigen::new((&m + m.transpose()) * 0.5);
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&a, &b| e2.eigenvalues[b].partial_cmp(&e2.eigenvalues[a]).unwrap());
        let k = (fit.len() - 1).min(p);
        let mut vectors = DMatrix::zeros(p, k);
        for (col, &i) in order.iter().take(k).enumerate() {
            vectors.set_column(col, &(&inv_sqrt * e2.eigenvectors.column(i)));
        }
        Self { vectors, classes }
    }

    fn projected(&self, n: usize) -> (Vec<DVector<f64>>, DMatrix<f64>) {
        let v = self.vectors.columns(0, n).into_owned();
        let proj: Vec<Vec<DVector<f64>>> = self
            .classes
            .iter()
            .map(|c| c.iter().map(|x| v.transpose() * x).collect())
            .collect();
        (proj.iter().map(|c| mean(c)).collect(), pooled(&proj))
    }

    /// Gaussian log-density of the projection of `x` under `class`.
    pub fn log_density(&self, x: &[f64], class: usize, n: usize) -> f64 {
        let (means, cov) = self.projected(n);
        let v = self.vectors.columns(0, n).into_owned();
        let d = v.transpose() * DVector::from_column_slice(x) - &means[class];
        let inv = cov.clone().try_inverse().unwrap();
        let q = (d.transpose() * inv * &d)[(0, 0)];
        -0.5 * (n as f64) * (2.0 * std::f64::consts::PI).ln() - 0.5 * cov.determinant().ln() - 0.5 * q
    }

    pub fn density(&self, x: &[f64], class: usize, n: usize) -> f64 {
        self.log_density(x, class, n).exp()
    }

    /// Bayes rule with equal priors, densities scaled by the largest.
    pub fn posterior(&self, x: &[f64], n: usize) -> Vec<f64> {
        let logs: Vec<f64> = (0..self.classes.len()).map(|i| self.log_density(x, i, n)).collect();
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let f: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
        let total: f64 = f.iter().sum();
        f.iter().map(|v| v / total).collect()
    }
}

/// Scores written out from their definitions: `member[i][k]` is the
/// log-likelihood of the held-out class-`k` member under class `i`,
/// `obs[i]` that of observation `i` under class `i`. Returns
/// `(S_ref, S_perf per sample, S_obs)`.
pub fn scores(member: &[Vec<Vec<f64>>], obs: &[Vec<f64>]) -> (f64, Vec<f64>, f64) {
    let n_b = member.len() as f64;
    let n_c = member[0].len();
    let mut s_ref = 0.0;
    for t in member {
        for i in 0..n_c {
            for k in 0..n_c {
                if i != k {
                    s_ref += t[i][k];
                }
            }
        }
    }
    s_ref /= n_c as f64 * (n_c - 1) as f64 * n_b;
    let s_perf = member
        .iter()
        .map(|t| (0..n_c).map(|i| t[i][i]).sum::<f64>() / n_c as f64)
        .collect();
    let s_obs = obs.iter().flatten().sum::<f64>() / (n_c as f64 * n_b);
    (s_ref, s_perf, s_obs)
}
