//! Subcommands. Every command reads the experiment config (or the built-in scalar
//! example) and writes its products under `--out`.

use std::path::{Path, PathBuf};

use anyhow::{ensure, Context, Result};
use clap::{Parser, Subcommand};
use log::info;
use serde::Serialize;
use srcstab::bounds::{run_bound_suite, BoundSuiteConfig, BoundSuiteReport};
use srcstab::checks::{duality_check, harmonic_check, huygens_check, HarmonicCheck};
use srcstab::experiment::{
    add_noise_with, prepare_source, reconstruct_from_sweep, reconstruction_errors, run_sweep, ExperimentConfig,
};
use srcstab::functionals::Physics;

use crate::container::{read_sweep, read_volume, write_sweep, write_volume};
use crate::report::{emit_report, read_json};

#[derive(Debug, Parser)]
#[command(name = "srcstab", version, about = "Multi-frequency inverse source experiments")]
pub struct Cli {
    /// Experiment config (JSON); the scalar unit-ball example when absent.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads (all cores when absent).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Forward boundary sweep of the configured source: sweep.bin, truth.bin, synth.json.
    Synth,
    /// Add noise at the configured level to a stored sweep: noisy.bin.
    Noise {
        /// Input sweep; <out>/sweep.bin when absent.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Noise ε; the config level when absent.
        #[arg(long)]
        eps: Option<f64>,
    },
    /// Band-limit a stored sweep at K, synthesize and solve backward: reconstruction.bin.
    Reconstruct {
        /// Input sweep; <out>/noisy.bin if present, else <out>/sweep.bin.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Band limit; the top of the K ladder when absent.
        #[arg(long)]
        k: Option<f64>,
    },
    /// Full K-ladder experiment: report.csv, report.json, report.svg.
    SweepK {
        #[arg(long)]
        no_svg: bool,
    },
    /// Sector bound suite and harmonic-measure walks: bounds.json.
    VerifyBounds {
        /// Real points in (K, 4K) for the harmonic measure.
        #[arg(long, default_value_t = 20)]
        hm_points: usize,
        #[arg(long, default_value_t = 100_000)]
        walks: u64,
    },
    /// FDTD trace transform against the integral sweep: duality.json.
    CheckDuality {
        /// Band for the comparison; the config omega_max when absent.
        #[arg(long)]
        omega_max: Option<f64>,
        /// Tolerance; 0.02 scalar, 0.03 elastic when absent.
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Huygens residual and cone checks: huygens.json.
    CheckHuygens,
    /// Re-emit CSV and SVG from a stored report.json.
    Report {
        /// <out>/report.json when absent.
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

/// Result of a command that ran to completion.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Ok,
    /// A verification suite ran and found a failure.
    Failed,
}

pub fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut cfg = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => ExperimentConfig::example(Physics::Scalar),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let path = dir.join(name);
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    std::fs::write(&path, s).with_context(|| format!("writing {}", path.display()))
}

#[derive(Serialize, serde::Deserialize)]
struct SynthMeta {
    config_hash: String,
    scale: f64,
    reference_norm: f64,
    m_rel: f64,
}

#[derive(Serialize)]
struct BoundsOutput {
    bounds: BoundSuiteReport,
    harmonic: HarmonicCheck,
    pass: bool,
}

#[derive(Serialize)]
struct CheckOutput<T: Serialize> {
    #[serde(flatten)]
    result: T,
    tolerance: f64,
    pass: bool,
}

pub fn run(cli: &Cli) -> Result<Status> {
    let cfg = load_config(cli.config.as_deref(), cli.seed)?;
    let out = &cli.out;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    match &cli.command {
        Command::Synth => {
            let p = prepare_source(&cfg)?;
            write_sweep(&out.join("sweep.bin"), &p.sweep)?;
            write_volume(&out.join("truth.bin"), &p.src)?;
            write_json(out, "synth.json", &SynthMeta { config_hash: cfg.hash(), scale: p.scale, reference_norm: p.reference, m_rel: p.m_rel })?;
            info!("{} nodes × {} frequencies", p.sweep.nodes(), p.sweep.columns());
            Ok(Status::Ok)
        }
        Command::Noise { input, eps } => {
            let input = input.clone().unwrap_or_else(|| out.join("sweep.bin"));
            let sw = read_sweep(&input)?;
            let noisy = add_noise_with(&sw, eps.unwrap_or(cfg.noise), cfg.seed, cfg.noise_correlation)?;
            write_sweep(&out.join("noisy.bin"), &noisy)?;
            Ok(Status::Ok)
        }
        Command::Reconstruct { input, k } => {
            let input = input.clone().unwrap_or_else(|| {
                let noisy = out.join("noisy.bin");
                if noisy.exists() {
                    noisy
                } else {
                    out.join("sweep.bin")
                }
            });
            let sw = read_sweep(&input)?;
            let domain = cfg.domain()?;
            ensure!(sw.mesh == domain.mesh, "{} was not produced with this config's boundary mesh", input.display());
            let k = k.unwrap_or(*cfg.k_ladder.last().unwrap());
            let band = sw.truncated(k)?;
            let rec = reconstruct_from_sweep(&band, k, &domain, &cfg.physics, cfg.coupling, cfg.t_margin)?;
            write_volume(&out.join("reconstruction.bin"), &rec)?;
            let truth = out.join("truth.bin");
            let meta = out.join("synth.json");
            if truth.exists() && meta.exists() {
                let truth = read_volume(&truth)?;
                let meta: SynthMeta = serde_json::from_str(&std::fs::read_to_string(&meta)?)?;
                let e = reconstruction_errors(&rec, &truth, meta.reference_norm)?;
                #[derive(Serialize)]
                struct Errors {
                    k: f64,
                    err_l2_f0: f64,
                    err_hm1_f1: f64,
                    err_h1_f0: f64,
                    err_l2_f1: f64,
                }
                write_json(out, "reconstruction.json", &Errors { k, err_l2_f0: e[0], err_hm1_f1: e[1], err_h1_f0: e[2], err_l2_f1: e[3] })?;
            }
            Ok(Status::Ok)
        }
        Command::SweepK { no_svg } => {
            let report = run_sweep(&cfg)?;
            emit_report(&report, out, !no_svg)?;
            Ok(Status::Ok)
        }
        Command::VerifyBounds { hm_points, walks } => {
            let bounds = run_bound_suite(&BoundSuiteConfig::from_experiment(&cfg))?;
            let harmonic = harmonic_check(*cfg.k_ladder.last().unwrap(), *hm_points, *walks, cfg.seed)?;
            let pass = bounds.pass() && harmonic.pass();
            info!("bound violations {}, max ratios {:?}", bounds.violations, bounds.max_ratio);
            write_json(out, "bounds.json", &BoundsOutput { bounds, harmonic, pass })?;
            Ok(if pass { Status::Ok } else { Status::Failed })
        }
        Command::CheckDuality { omega_max, tol } => {
            let tolerance = tol.unwrap_or(match cfg.physics {
                Physics::Scalar => 0.02,
                Physics::Elastic(_) => 0.03,
            });
            let grid = cfg.frequency_grid()?;
            let result = duality_check(&cfg.source, &cfg.domain()?, &cfg.physics, omega_max.unwrap_or(cfg.omega_max), grid.d_omega)?;
            let pass = result.rel_error < tolerance;
            info!("duality error {:.4}", result.rel_error);
            write_json(out, "duality.json", &CheckOutput { result, tolerance, pass })?;
            Ok(if pass { Status::Ok } else { Status::Failed })
        }
        Command::CheckHuygens => {
            let result = huygens_check(&cfg.source, &cfg.domain()?, &cfg.physics)?;
            let tolerance = match cfg.physics {
                Physics::Scalar => 1e-3,
                Physics::Elastic(_) => 1e-2,
            };
            let pass = result.residual < tolerance && result.outside_cone.map_or(true, |c| c < 1e-6);
            write_json(out, "huygens.json", &CheckOutput { result, tolerance, pass })?;
            Ok(if pass { Status::Ok } else { Status::Failed })
        }
        Command::Report { input } => {
            let input = input.clone().unwrap_or_else(|| out.join("report.json"));
            let report = read_json(&input)?;
            emit_report(&report, out, true)?;
            Ok(Status::Ok)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn global_flags_after_the_subcommand() {
        let cli = Cli::try_parse_from(["srcstab", "sweep-k", "--seed", "9", "--threads", "2", "--out", "x"]).unwrap();
        assert_eq!((cli.seed, cli.threads, cli.out.to_str()), (Some(9), Some(2), Some("x")));
        assert!(matches!(cli.command, Command::SweepK { no_svg: false }));
    }

    #[test]
    fn seed_override() {
        assert_eq!(load_config(None, Some(99)).unwrap().seed, 99);
    }
}
