use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wavespec::demo::{generate, DemoConfig};
use wavespec::lws::Smoother;
use wavespec::manifest::Overrides;
use wavespec::pipeline::{cmd_simulate, cmd_transform, cmd_verify, TransformParams, VerifyOptions};
use wavespec::report::{read_report, render_csvs};
use wavespec::{Family, Result};

#[derive(Debug, Parser)]
#[command(name = "wavespec", version, about = "Local wavelet spectra and spectrum-based ensemble verification")]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Averaged bias-corrected wavelet spectrum of one field.
    Transform(TransformArgs),
    /// Simulate a field from a spectrum spec.
    Simulate(SimulateArgs),
    /// Cross-validated verification of a dataset manifest.
    Verify(VerifyArgs),
    /// Re-render the CSV views of a saved report.
    Report(ReportArgs),
    /// Write the synthetic 14-class demo dataset and its manifest.
    Demo(DemoArgs),
}

#[derive(Debug, Args)]
struct TransformOpts {
    /// Taper width in grid points.
    #[arg(long)]
    taper: Option<usize>,
    /// Padded grid size, `RxC` or a single side length.
    #[arg(long, value_parser = parse_dims)]
    dims: Option<(usize, usize)>,
    /// Wavelet family: haar, d4, d6, d8.
    #[arg(long)]
    family: Option<String>,
    /// Number of decomposition scales J.
    #[arg(long)]
    levels: Option<u32>,
    /// Retained scales, e.g. `3,4,5,6` or `3-6`.
    #[arg(long, value_parser = parse_scale_list)]
    scales: Option<List<u32>>,
    /// Periodogram smoother: box, box:<n>, none, shrinkage, shrinkage:<n>.
    #[arg(long)]
    smoother: Option<String>,
}

#[derive(Debug, Args)]
struct TransformArgs {
    /// Grid file (binary or .csv).
    input: PathBuf,
    #[command(flatten)]
    opts: TransformOpts,
    /// Edge value of the taper ramp, in [0, 1].
    #[arg(long, default_value_t = 0.0)]
    edge_factor: f64,
    /// Also write direction-averaged local spectra per scale.
    #[arg(long)]
    local: bool,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Spectrum spec (TOML).
    spec: PathBuf,
    /// Grid size, `RxC` or a single side length (powers of two).
    #[arg(long, value_parser = parse_dims)]
    dims: (usize, usize),
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "haar")]
    family: String,
    /// Output grid file.
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    manifest: PathBuf,
    #[command(flatten)]
    opts: TransformOpts,
    /// Subspace sizes, e.g. `1,2,3` or `1-13`.
    #[arg(long, value_parser = parse_list)]
    nvec: Option<List<usize>>,
    /// Number of cross-validation samples.
    #[arg(long)]
    nb: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "verify-out")]
    out_dir: PathBuf,
    /// Recompute every spectrum instead of using `<out-dir>/cache`.
    #[arg(long)]
    no_cache: bool,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// report.json written by `verify`.
    report: PathBuf,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct DemoArgs {
    /// Output directory.
    dir: PathBuf,
    #[arg(long, default_value_t = 14)]
    classes: usize,
    #[arg(long, default_value_t = 20)]
    members: usize,
    #[arg(long, default_value_t = 128)]
    size: usize,
    #[arg(long, default_value_t = DemoConfig::default().seed)]
    seed: u64,
    /// Peak energy relative to the background.
    #[arg(long, default_value_t = DemoConfig::default().peak)]
    peak: f64,
}

fn parse_dims(s: &str) -> std::result::Result<(usize, usize), String> {
    let parse = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("'{t}': {e}"));
    match s.split_once(['x', 'X']) {
        Some((r, c)) => Ok((parse(r)?, parse(c)?)),
        None => {
            let n = parse(s)?;
            Ok((n, n))
        }
    }
}

/// Comma list with `a-b` ranges, kept as one clap value.
#[derive(Debug, Clone, PartialEq)]
struct List<T>(Vec<T>);

fn parse_list(s: &str) -> std::result::Result<List<usize>, String> {
    let num = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("'{t}': {e}"));
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b) = (num(a)?, num(b)?);
                if a > b {
                    return Err(format!("empty range '{part}'"));
                }
                out.extend(a..=b);
            }
            None => out.push(num(part)?),
        }
    }
    if out.is_empty() {
        return Err("empty list".into());
    }
    Ok(List(out))
}

fn parse_scale_list(s: &str) -> std::result::Result<List<u32>, String> {
    parse_list(s)?
        .0
        .into_iter()
        .map(|v| u32::try_from(v).map_err(|_| format!("scale {v} out of range")))
        .collect::<std::result::Result<_, _>>()
        .map(List)
}

fn overrides(o: &TransformOpts) -> Overrides {
    Overrides {
        taper_width: o.taper,
        target_dims: o.dims.map(|(r, c)| [r, c]),
        family: o.family.clone(),
        scales: o.levels,
        retained_scales: o.scales.clone().map(|l| l.0),
        smoother: o.smoother.clone(),
        ..Default::default()
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Transform(a) => {
            let o = &a.opts;
            let params = TransformParams {
                taper_width: o.taper.unwrap_or(TransformParams::default().taper_width),
                edge_factor: a.edge_factor,
                target_dims: o.dims,
                family: o.family.as_deref().unwrap_or("haar").parse::<Family>()?,
                scales: o.levels,
                retained: o.scales.clone().map(|l| l.0),
                smoother: o.smoother.as_deref().unwrap_or("box").parse::<Smoother>()?,
            };
            let files = cmd_transform(&a.input, &params, &a.out_dir, a.local)?;
            println!("{}", files.spectrum.display());
            println!("{}", files.average.display());
            for p in files.local {
                println!("{}", p.display());
            }
        }
        Command::Simulate(a) => {
            cmd_simulate(&a.spec, a.dims, a.seed, a.family.parse()?, &a.output)?;
            println!("{}", a.output.display());
        }
        Command::Verify(a) => {
            let mut ov = overrides(&a.opts);
            ov.n_vec = a.nvec.clone().map(|l| l.0);
            ov.n_b = a.nb;
            ov.seed = a.seed;
            let opts = VerifyOptions {
                overrides: ov,
                cache_dir: (!a.no_cache).then(|| a.out_dir.join("cache")),
                out_dir: a.out_dir.clone(),
            };
            let report = cmd_verify(&a.manifest, &opts)?;
            println!("n_vec  skill_perf  skill_obs  p_correct(member)  p_correct(obs)");
            for s in &report.report.sizes {
                println!(
                    "{:>5}  {:>10.4}  {:>9.4}  {:>17.4}  {:>14.4}",
                    s.n_vec,
                    s.scores.skill_perf_mean,
                    s.scores.skill_obs,
                    s.attribution.mean_correct_member,
                    s.attribution.mean_correct_observation
                );
            }
            println!("{}", a.out_dir.join("report.json").display());
        }
        Command::Report(a) => {
            let report = read_report(&a.report)?;
            for p in render_csvs(&report, &a.out_dir)? {
                println!("{}", p.display());
            }
        }
        Command::Demo(a) => {
            let cfg = DemoConfig {
                n_classes: a.classes,
                n_members: a.members,
                size: a.size,
                seed: a.seed,
                peak: a.peak,
            };
            println!("{}", generate(&a.dir, &cfg)?.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
