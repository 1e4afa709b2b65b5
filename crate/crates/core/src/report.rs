//! Verification report serialization and CSV rendering.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::manifest::{ClassKind, Parameters};
use crate::verify::{Attribution, VerificationReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSummary {
    pub label: String,
    pub date: String,
    pub kind: ClassKind,
    /// Mean standardized member spectrum.
    pub mean_spectrum: Vec<f64>,
    pub observation_spectrum: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    /// RFC 3339 creation time; the only field that differs between reruns.
    pub timestamp: String,
    pub version: String,
    pub parameters: Parameters,
    pub scales: u32,
    pub retained_scales: Vec<u32>,
    pub classes: Vec<ClassSummary>,
    pub report: VerificationReport,
}

/// Pretty JSON with every float written to 17 significant digits.
struct Digits17<'a>(PrettyFormatter<'a>);

impl Formatter for Digits17<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(fmt_f64(value).as_bytes())
    }
    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Digits17(PrettyFormatter::new()));
    value
        .serialize(&mut ser)
        .map_err(|e| Error::Serialization(e.to_string()))?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

pub fn write_report(report: &ReportFile, path: &Path) -> Result<()> {
    fs::write(path, to_json(report)?).map_err(|e| Error::io(path, e))
}

pub fn read_report(path: &Path) -> Result<ReportFile> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        offset: line_col_offset(&text, e.line(), e.column()),
        message: e.to_string(),
    })
}

fn line_col_offset(text: &str, line: usize, column: usize) -> u64 {
    let before: usize = text.split_inclusive('\n').take(line.saturating_sub(1)).map(str::len).sum();
    (before + column.saturating_sub(1)) as u64
}

fn join(values: impl IntoIterator<Item = f64>) -> String {
    values.into_iter().map(fmt_f64).collect::<Vec<_>>().join(",")
}

pub fn skill_csv(r: &ReportFile) -> String {
    let mut out = String::from("n_vec,s_ref,s_perf_mean,s_obs,skill_perf_mean,skill_perf_min,skill_perf_max,skill_obs\n");
    for s in &r.report.sizes {
        let sc = &s.scores;
        let perf_mean = sc.s_perf.iter().sum::<f64>() / sc.s_perf.len() as f64;
        let min = sc.skill_perf.iter().copied().fold(f64::INFINITY, f64::min);
        let max = sc.skill_perf.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        out.push_str(&format!(
            "{},{}\n",
            s.n_vec,
            join([sc.s_ref, perf_mean, sc.s_obs, sc.skill_perf_mean, min, max, sc.skill_obs])
        ));
    }
    out
}

pub fn skill_samples_csv(r: &ReportFile) -> String {
    let mut out = String::from("n_vec,b,s_perf,skill_perf\n");
    for s in &r.report.sizes {
        for (b, (p, k)) in s.scores.s_perf.iter().zip(&s.scores.skill_perf).enumerate() {
            out.push_str(&format!("{},{b},{}\n", s.n_vec, join([*p, *k])));
        }
    }
    out
}

/// Long-format log-likelihoods: `kind` is `perfect` (held-out member of the
/// evaluated class), `reference` (member of another class) or `observation`.
pub fn likelihood_csv(r: &ReportFile) -> String {
    let labels = &r.report.labels;
    let mut out = String::from("n_vec,b,class,input_class,kind,loglik\n");
    for (s, &n) in r.report.config.n_vec.iter().enumerate() {
        for sample in &r.report.samples {
            let t = &sample.likelihoods[s];
            for (i, row) in t.member.iter().enumerate() {
                for (k, &v) in row.iter().enumerate() {
                    let kind = if i == k { "perfect" } else { "reference" };
                    out.push_str(&format!("{n},{},{},{},{kind},{}\n", sample.b, labels[i], labels[k], fmt_f64(v)));
                }
                out.push_str(&format!(
                    "{n},{},{},{},observation,{}\n",
                    sample.b,
                    labels[i],
                    labels[i],
                    fmt_f64(t.observation[i])
                ));
            }
        }
    }
    out
}

/// Row `i`, column `k`: mean posterior of class `i` for inputs of class `k`.
pub fn posterior_matrix_csv(labels: &[String], m: &[Vec<f64>]) -> String {
    let mut out = format!("class,{}\n", labels.join(","));
    for (label, row) in labels.iter().zip(m) {
        out.push_str(&format!("{label},{}\n", join(row.iter().copied())));
    }
    out
}

pub fn mean_posterior_csv(r: &ReportFile) -> String {
    let mut out = String::from(
        "n_vec,mean_correct_member,mean_correct_observation,hit_rate_member,hit_rate_observation,\
         lco_mean_correct_member,lco_mean_correct_observation\n",
    );
    for s in &r.report.sizes {
        let a = &s.attribution;
        let lco = s.leave_class_out.as_ref().map_or_else(
            || ",".to_string(),
            |l| join([l.mean_correct_member, l.mean_correct_observation]),
        );
        out.push_str(&format!(
            "{},{},{lco}\n",
            s.n_vec,
            join([a.mean_correct_member, a.mean_correct_observation, a.hit_rate_member, a.hit_rate_observation])
        ));
    }
    out
}

/// Writes every CSV view of a report into `dir` and returns the paths.
pub fn render_csvs(r: &ReportFile, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files: Vec<(String, String)> = vec![
        ("skill_vs_nvec.csv".into(), skill_csv(r)),
        ("skill_perf_samples.csv".into(), skill_samples_csv(r)),
        ("likelihoods.csv".into(), likelihood_csv(r)),
        ("mean_posterior.csv".into(), mean_posterior_csv(r)),
    ];
    let labels = &r.report.labels;
    let mut push = |prefix: &str, a: &Attribution| {
        files.push((
            format!("posterior_members_{prefix}n{}.csv", a.n_vec),
            posterior_matrix_csv(labels, &a.member),
        ));
        files.push((
            format!("posterior_observations_{prefix}n{}.csv", a.n_vec),
            posterior_matrix_csv(labels, &a.observation),
        ));
    };
    for s in &r.report.sizes {
        push("", &s.attribution);
        if let Some(l) = &s.leave_class_out {
            push("lco_", l);
        }
    }
    let mut paths = Vec::with_capacity(files.len());
    for (name, body) in files {
        let p = dir.join(name);
        fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
        paths.push(p);
    }
    Ok(paths)
}
