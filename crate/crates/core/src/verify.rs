//! Log-likelihood scores, skill and posterior attribution under repeated
//! hold-out cross-validation.
//!
//! For every sample `b` one member per class is held out, discriminant
//! vectors are fitted on the remaining members, and the held-out members and
//! the observations are scored against every class.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lda::{argmax, ClassedDataset, LdaModel};

pub const DEFAULT_SAMPLES: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub samples: usize,
    /// Subspace sizes to evaluate, ascending.
    pub n_vec: Vec<usize>,
    pub seed: u64,
    pub leave_class_out: bool,
}

impl CvConfig {
    /// Every subspace size a dataset of this shape supports.
    pub fn all_sizes(data: &ClassedDataset, samples: usize, seed: u64) -> Self {
        Self {
            samples,
            n_vec: (1..=max_vectors(data)).collect(),
            seed,
            leave_class_out: true,
        }
    }
}

/// Largest subspace size for a dataset: `min(N_c - 1, p)`.
pub fn max_vectors(data: &ClassedDataset) -> usize {
    (data.n_classes() - 1).min(data.dim())
}

/// Log-likelihood tables for one sample and subspace size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodTable {
    /// `member[i][k] = log p(m_k | C_i)` for the held-out member `m_k` of class `k`.
    pub member: Vec<Vec<f64>>,
    /// `observation[i] = log p(o_i | C_i)`.
    pub observation: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub s_ref: f64,
    /// Per sample.
    pub s_perf: Vec<f64>,
    pub s_obs: f64,
    /// `1 - S_perf,b / S_ref` per sample.
    pub skill_perf: Vec<f64>,
    pub skill_perf_mean: f64,
    pub skill_obs: f64,
}

/// Reference, perfect-forecast and observation scores over the samples.
pub fn scores(tables: &[LikelihoodTable]) -> Result<Scores> {
    let first = tables
        .first()
        .ok_or_else(|| Error::Argument("no likelihood tables".into()))?;
    let n_c = first.member.len();
    if n_c < 2 {
        return Err(Error::Argument(format!("need at least 2 classes, got {n_c}")));
    }
    for t in tables {
        if t.member.len() != n_c || t.member.iter().any(|r| r.len() != n_c) || t.observation.len() != n_c {
            return Err(Error::Argument("likelihood tables differ in shape".into()));
        }
    }
    let n_b = tables.len() as f64;
    let mut s_ref = 0.0;
    let mut s_obs = 0.0;
    let mut s_perf = Vec::with_capacity(tables.len());
    for t in tables {
        let mut perf = 0.0;
        for i in 0..n_c {
            for k in 0..n_c {
                if i == k {
                    perf += t.member[i][k];
                } else {
                    s_ref += t.member[i][k];
                }
            }
            s_obs += t.observation[i];
        }
        s_perf.push(perf / n_c as f64);
    }
    s_ref /= (n_c * (n_c - 1)) as f64 * n_b;
    s_obs /= n_c as f64 * n_b;
    if !s_ref.is_finite() || !s_obs.is_finite() || s_perf.iter().any(|s| !s.is_finite()) {
        return Err(Error::Estimation("non-finite score".into()));
    }
    if s_ref == 0.0 {
        return Err(Error::Degenerate("reference score is zero, skill undefined".into()));
    }
    let skill_perf: Vec<f64> = s_perf.iter().map(|s| 1.0 - s / s_ref).collect();
    let skill_perf_mean = skill_perf.iter().sum::<f64>() / n_b;
    Ok(Scores {
        s_ref,
        s_perf,
        s_obs,
        skill_perf,
        skill_perf_mean,
        skill_obs: 1.0 - s_obs / s_ref,
    })
}

/// Posteriors for one sample and subspace size. Column `k` is the posterior
/// over classes for the class-`k` input, so `[i][k] = p(C_i | x_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorTable {
    pub member: Vec<Vec<f64>>,
    pub observation: Vec<f64>,
    pub observation_matrix: Vec<Vec<f64>>,
}

/// Cross-validation averaged posterior matrices for one subspace size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub n_vec: usize,
    /// `member[i][k]`: mean of `p_b(C_i | m_k)`; columns sum to 1.
    pub member: Vec<Vec<f64>>,
    /// `observation[i][k]`: mean of `p_b(C_i | o_k)`; columns sum to 1.
    pub observation: Vec<Vec<f64>>,
    /// Mean correct-class posterior of held-out members.
    pub mean_correct_member: f64,
    pub mean_correct_observation: f64,
    /// Fraction of inputs whose posterior argmax is the correct class.
    pub hit_rate_member: f64,
    pub hit_rate_observation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeResult {
    pub n_vec: usize,
    pub scores: Scores,
    pub attribution: Attribution,
    /// Absent when the size exceeds the vectors available without a class.
    pub leave_class_out: Option<Attribution>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleTables {
    pub b: usize,
    /// Index of the held-out member, per class.
    pub holdout: Vec<usize>,
    /// One table per entry of `n_vec`.
    pub likelihoods: Vec<LikelihoodTable>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub labels: Vec<String>,
    pub n_classes: usize,
    pub n_members: usize,
    pub dim: usize,
    pub config: CvConfig,
    pub samples: Vec<SampleTables>,
    pub sizes: Vec<SizeResult>,
}

/// Held-out member indices for sample `b`, one uniform draw per class in
/// class order from stream `b` of the seeded generator.
pub fn holdout_indices(seed: u64, b: usize, n_classes: usize, n_members: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(b as u64);
    (0..n_classes).map(|_| rng.random_range(0..n_members)).collect()
}

struct SampleOutput {
    tables: SampleTables,
    standard: Vec<PosteriorTable>,
    leave_out: Vec<Option<PosteriorTable>>,
}

fn check_config(data: &ClassedDataset, cfg: &CvConfig) -> Result<()> {
    if data.n_members() < 3 {
        return Err(Error::Validation(format!(
            "cross-validation needs at least 3 members per class, got {}",
            data.n_members()
        )));
    }
    if cfg.samples == 0 {
        return Err(Error::Argument("number of cross-validation samples must be positive".into()));
    }
    if cfg.n_vec.is_empty() {
        return Err(Error::Argument("no subspace sizes requested".into()));
    }
    let max = max_vectors(data);
    if let Some(&bad) = cfg.n_vec.iter().find(|&&n| n == 0 || n > max) {
        return Err(Error::Argument(format!("subspace size {bad} outside 1..={max}")));
    }
    if cfg.n_vec.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Argument("subspace sizes must be strictly increasing".into()));
    }
    Ok(())
}

fn run_sample(data: &ClassedDataset, cfg: &CvConfig, b: usize) -> Result<SampleOutput> {
    let n_c = data.n_classes();
    let holdout = holdout_indices(cfg.seed, b, n_c, data.n_members());
    let train: Vec<Vec<Vec<f64>>> = data
        .members
        .iter()
        .zip(&holdout)
        .map(|(c, &h)| {
            c.iter()
                .enumerate()
                .filter(|(j, _)| *j != h)
                .map(|(_, x)| x.clone())
                .collect()
        })
        .collect();
    let held: Vec<&[f64]> = data.members.iter().zip(&holdout).map(|(c, &h)| c[h].as_slice()).collect();
    let model = LdaModel::fit(&train).map_err(|e| e.context(format!("sample {b}")))?;

    let mut likelihoods = Vec::with_capacity(cfg.n_vec.len());
    let mut standard = Vec::with_capacity(cfg.n_vec.len());
    for &n in &cfg.n_vec {
        let ctx = |e: Error| e.context(format!("sample {b}, {n} vectors"));
        let mut member = vec![vec![0.0; n_c]; n_c];
        let mut observation = vec![0.0; n_c];
        let mut post_member = vec![vec![0.0; n_c]; n_c];
        let mut post_obs = vec![vec![0.0; n_c]; n_c];
        for k in 0..n_c {
            for (i, row) in member.iter_mut().enumerate() {
                row[k] = model.log_likelihood(held[k], i, n).map_err(ctx)?;
            }
            observation[k] = model.log_likelihood(&data.observations[k], k, n).map_err(ctx)?;
            let pm = model.posterior(held[k], n).map_err(ctx)?;
            let po = model.posterior(&data.observations[k], n).map_err(ctx)?;
            for i in 0..n_c {
                post_member[i][k] = pm[i];
                post_obs[i][k] = po[i];
            }
        }
        likelihoods.push(LikelihoodTable { member, observation });
        standard.push(PosteriorTable {
            member: post_member,
            observation: post_obs.iter().enumerate().map(|(i, r)| r[i]).collect(),
            observation_matrix: post_obs,
        });
    }

    let mut leave_out: Vec<Option<PosteriorTable>> = vec![None; cfg.n_vec.len()];
    if cfg.leave_class_out {
        let avail = (n_c - 2).min(data.dim());
        if avail > 0 {
            let mut member = vec![vec![vec![0.0; n_c]; n_c]; cfg.n_vec.len()];
            let mut obs = vec![vec![vec![0.0; n_c]; n_c]; cfg.n_vec.len()];
            for k in 0..n_c {
                let m_k = LdaModel::fit_excluding(&train, k)
                    .map_err(|e| e.context(format!("sample {b}, without class {k}")))?;
                for (s, &n) in cfg.n_vec.iter().enumerate().filter(|(_, &n)| n <= avail) {
                    let ctx = |e: Error| e.context(format!("sample {b}, without class {k}, {n} vectors"));
                    let pm = m_k.posterior(held[k], n).map_err(ctx)?;
                    let po = m_k.posterior(&data.observations[k], n).map_err(ctx)?;
                    for i in 0..n_c {
                        member[s][i][k] = pm[i];
                        obs[s][i][k] = po[i];
                    }
                }
            }
            for (s, &n) in cfg.n_vec.iter().enumerate() {
                if n <= avail {
                    leave_out[s] = Some(PosteriorTable {
                        member: member[s].clone(),
                        observation: (0..n_c).map(|i| obs[s][i][i]).collect(),
                        observation_matrix: obs[s].clone(),
                    });
                }
            }
        }
    }

    Ok(SampleOutput {
        tables: SampleTables {
            b,
            holdout,
            likelihoods,
        },
        standard,
        leave_out,
    })
}

fn attribute(n_vec: usize, tables: &[&PosteriorTable]) -> Attribution {
    let n_c = tables[0].member.len();
    let n_b = tables.len() as f64;
    let mut member = vec![vec![0.0; n_c]; n_c];
    let mut observation = vec![vec![0.0; n_c]; n_c];
    let mut hits_m = 0usize;
    let mut hits_o = 0usize;
    for t in tables {
        for k in 0..n_c {
            let col_m: Vec<f64> = (0..n_c).map(|i| t.member[i][k]).collect();
            let col_o: Vec<f64> = (0..n_c).map(|i| t.observation_matrix[i][k]).collect();
            hits_m += usize::from(argmax(&col_m) == k);
            hits_o += usize::from(argmax(&col_o) == k);
            for i in 0..n_c {
                member[i][k] += col_m[i] / n_b;
                observation[i][k] += col_o[i] / n_b;
            }
        }
    }
    let diag_mean = |m: &Vec<Vec<f64>>| (0..n_c).map(|i| m[i][i]).sum::<f64>() / n_c as f64;
    let total = n_b * n_c as f64;
    Attribution {
        n_vec,
        mean_correct_member: diag_mean(&member),
        mean_correct_observation: diag_mean(&observation),
        member,
        observation,
        hit_rate_member: hits_m as f64 / total,
        hit_rate_observation: hits_o as f64 / total,
    }
}

/// Runs every cross-validation sample, then assembles scores and
/// attribution per subspace size. Samples run in parallel and are merged in
/// sample order.
pub fn cross_validate(data: &ClassedDataset, cfg: &CvConfig) -> Result<VerificationReport> {
    check_config(data, cfg)?;
    let outputs = (0..cfg.samples)
        .into_par_iter()
        .map(|b| run_sample(data, cfg, b))
        .collect::<Result<Vec<_>>>()?;

    let mut sizes = Vec::with_capacity(cfg.n_vec.len());
    for (s, &n) in cfg.n_vec.iter().enumerate() {
        let tables: Vec<LikelihoodTable> = outputs.iter().map(|o| o.tables.likelihoods[s].clone()).collect();
        let sc = scores(&tables).map_err(|e| e.context(format!("{n} vectors")))?;
        let std_tables: Vec<&PosteriorTable> = outputs.iter().map(|o| &o.standard[s]).collect();
        let lco_tables: Option<Vec<&PosteriorTable>> = outputs.iter().map(|o| o.leave_out[s].as_ref()).collect();
        sizes.push(SizeResult {
            n_vec: n,
            scores: sc,
            attribution: attribute(n, &std_tables),
            leave_class_out: lco_tables.map(|t| attribute(n, &t)),
        });
    }

    Ok(VerificationReport {
        labels: data.labels.clone(),
        n_classes: data.n_classes(),
        n_members: data.n_members(),
        dim: data.dim(),
        config: cfg.clone(),
        samples: outputs.into_iter().map(|o| o.tables).collect(),
        sizes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::StandardNormal;

    fn hand_table() -> LikelihoodTable {
        LikelihoodTable {
            member: vec![vec![-1.0, -5.0], vec![-5.0, -1.0]],
            observation: vec![-2.0, -2.0],
        }
    }

    #[test]
    fn hand_scores() {
        let s = scores(&[hand_table()]).unwrap();
        assert_eq!(s.s_ref, -5.0);
        assert_eq!(s.s_perf, vec![-1.0]);
        assert_eq!(s.s_obs, -2.0);
        assert_eq!(s.skill_perf, vec![0.8]);
        assert_eq!(s.skill_obs, 0.6);
    }

    #[test]
    fn equal_tables_have_zero_skill() {
        let t = LikelihoodTable {
            member: vec![vec![-3.0; 3]; 3],
            observation: vec![-3.0; 3],
        };
        let s = scores(&[t.clone(), t]).unwrap();
        assert_eq!(s.skill_perf, vec![0.0, 0.0]);
        assert_eq!(s.skill_obs, 0.0);
    }

    #[test]
    fn zero_reference_is_degenerate() {
        let t = LikelihoodTable {
            member: vec![vec![-1.0, 0.0], vec![0.0, -1.0]],
            observation: vec![-1.0, -1.0],
        };
        assert!(matches!(scores(&[t]), Err(Error::Degenerate(_))));
    }

    fn synthetic(n_c: usize, n_e: usize, p: usize, gap: f64, seed: u64) -> ClassedDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |c: usize| -> Vec<f64> {
            (0..p)
                .map(|d| {
                    let mean = if d == c % p { gap * (1 + c / p) as f64 } else { 0.0 };
                    mean + rng.sample::<f64, _>(StandardNormal)
                })
                .collect()
        };
        let members = (0..n_c).map(|c| (0..n_e).map(|_| draw(c)).collect()).collect();
        let obs = (0..n_c).map(&mut draw).collect();
        ClassedDataset::new((0..n_c).map(|c| format!("c{c}")).collect(), members, obs).unwrap()
    }

    #[test]
    fn holdouts_are_deterministic_and_vary() {
        let a = holdout_indices(7, 3, 14, 20);
        assert_eq!(a, holdout_indices(7, 3, 14, 20));
        assert_ne!(a, holdout_indices(7, 4, 14, 20));
        assert!(a.iter().all(|&h| h < 20));
    }

    #[test]
    fn report_is_deterministic_and_normalised() {
        let data = synthetic(4, 6, 3, 3.0, 11);
        let cfg = CvConfig::all_sizes(&data, 8, 5);
        let r1 = cross_validate(&data, &cfg).unwrap();
        let r2 = cross_validate(&data, &cfg).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(r1.sizes.len(), 3);
        for size in &r1.sizes {
            for m in [&size.attribution.member, &size.attribution.observation] {
                for k in 0..4 {
                    let col: f64 = (0..4).map(|i| m[i][k]).sum();
                    assert!((col - 1.0).abs() < 1e-10);
                }
            }
        }
        assert!(r1.sizes[1].leave_class_out.is_some());
        assert!(r1.sizes[2].leave_class_out.is_none());
    }

    #[test]
    fn separated_classes_are_attributed() {
        let data = synthetic(5, 8, 4, 12.0, 3);
        let cfg = CvConfig::all_sizes(&data, 10, 1);
        let r = cross_validate(&data, &cfg).unwrap();
        let full = r.sizes.last().unwrap();
        assert_eq!(full.n_vec, 4);
        assert!(full.attribution.mean_correct_member > 0.99, "{}", full.attribution.mean_correct_member);
    }

    #[test]
    fn exchangeable_classes_give_chance_posteriors() {
        let data = synthetic(4, 10, 3, 0.0, 9);
        let cfg = CvConfig {
            samples: 40,
            n_vec: vec![1],
            seed: 2,
            leave_class_out: false,
        };
        let r = cross_validate(&data, &cfg).unwrap();
        let m = r.sizes[0].attribution.mean_correct_member;
        assert!((m - 0.25).abs() < 0.1, "{m}");
    }

    #[test]
    fn config_is_checked() {
        let data = synthetic(3, 4, 2, 1.0, 0);
        let mut cfg = CvConfig::all_sizes(&data, 2, 0);
        cfg.n_vec = vec![3];
        assert!(matches!(cross_validate(&data, &cfg), Err(Error::Argument(_))));
        let small = synthetic(3, 2, 2, 1.0, 0);
        let cfg = CvConfig::all_sizes(&small, 2, 0);
        assert!(matches!(cross_validate(&small, &cfg), Err(Error::Validation(_))));
    }
}
