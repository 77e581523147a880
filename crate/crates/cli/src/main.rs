//! Command-line front end: simulate data, fit models, run and resume
//! simulation studies, and produce diagnostics and reports.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use maxstab::experiments::{self, presets, DiagnoseConfig, ExperimentManifest};
use maxstab::inference::{self, FitConfig, McmcConfig, ModelTemplate};
use maxstab::simulate::{self, SimJob};

#[derive(Parser)]
#[command(name = "maxstab", version, about = "Full-likelihood inference for max-stable distributions")]
struct Cli {
    /// Master seed, overriding the one in the input file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for parallel jobs.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output file or directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw replicates of a simulation job (JSON) into a CSV file.
    Simulate {
        job: PathBuf,
        #[arg(long, default_value_t = 1)]
        reps: u64,
    },
    /// Fit a model template (JSON) to one replicate of a data CSV.
    Fit {
        data: PathBuf,
        #[arg(long)]
        template: PathBuf,
        #[arg(long, value_enum, default_value_t = FitMethod::Bayes)]
        estimator: FitMethod,
        /// MCMC configuration (JSON); defaults apply otherwise.
        #[arg(long)]
        mcmc: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        rep: usize,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
    },
    /// Run or resume simulation studies.
    Experiment {
        #[command(subcommand)]
        action: ExperimentAction,
    },
    /// Plot data and a seed-replication check for chain traces.
    Diagnose {
        #[arg(required = true)]
        traces: Vec<PathBuf>,
    },
    /// Print the result tables of an experiment directory.
    Report { dir: PathBuf },
}

#[derive(Subcommand)]
enum ExperimentAction {
    Run { manifest: PathBuf },
    Resume { dir: PathBuf },
    /// Write one of the standard study manifests.
    Preset {
        name: String,
        /// Full-scale grid instead of the desk-scale one.
        #[arg(long)]
        full: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FitMethod {
    Bayes,
    Pairwise,
    Independence,
    StephensonTawn,
}

type AnyResult<T> = Result<T, Box<dyn std::error::Error>>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> AnyResult<T> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?)?)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> AnyResult<()> {
    if let Some(d) = path.parent() {
        std::fs::create_dir_all(d)?;
    }
    std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

/// `Ok(false)` means the command ran but some job or check failed.
fn run(cli: Cli) -> AnyResult<bool> {
    if let Some(w) = cli.workers {
        rayon::ThreadPoolBuilder::new().num_threads(w.max(1)).build_global()?;
    }
    match cli.command {
        Command::Simulate { job, reps } => {
            let mut job: SimJob = read_json(&job)?;
            if let Some(s) = cli.seed {
                job.seed = s;
            }
            let out = cli.out.unwrap_or_else(|| PathBuf::from("data.csv"));
            let data = job.run_replicates(reps)?;
            simulate::write_csv(&out, &data)?;
            println!("wrote {reps} replicate(s) of {} observations to {}", job.n_samples, out.display());
            Ok(true)
        }
        Command::Fit { data, template, estimator, mcmc, rep, level } => {
            let reps = simulate::read_csv(&data)?;
            let d = reps.get(rep).ok_or_else(|| format!("{} has {} replicate(s), asked for {rep}", data.display(), reps.len()))?;
            let t: ModelTemplate = read_json(&template)?;
            let out = cli.out.unwrap_or_else(|| PathBuf::from("fit"));
            std::fs::create_dir_all(&out)?;
            let fit = FitConfig::default();
            let start = experiments::runner::data_driven_start(&t, d, &fit)?;
            match estimator {
                FitMethod::Bayes => {
                    let mut cfg: McmcConfig = match mcmc {
                        Some(p) => read_json(&p)?,
                        None => McmcConfig::default(),
                    };
                    cfg.init.get_or_insert(start);
                    let trace = inference::run_chain(d, &t, &cfg, cli.seed.unwrap_or(0))?;
                    trace.write(&out.join("trace.csv"))?;
                    let s = inference::posterior_summary(&trace, level)?;
                    write_json(&out.join("summary.json"), &s)?;
                    for p in &s.params {
                        println!("{:<10} median {:.5}  [{:.5}, {:.5}]  acf30 {:.3}", p.name, p.median, p.lower, p.upper, p.acf.get(&30).copied().unwrap_or(f64::NAN));
                    }
                }
                m => {
                    let e = match m {
                        FitMethod::Pairwise => inference::pairwise_mle(d, &t, Some(&start), &fit)?,
                        FitMethod::Independence => inference::independence_mle(d, &t, &fit)?,
                        _ => inference::stephenson_tawn_mle(d, &t, Some(&start), &fit)?,
                    };
                    write_json(&out.join("estimate.json"), &e)?;
                    for (n, v) in e.names.iter().zip(&e.x) {
                        println!("{n:<10} {v:.5}");
                    }
                    if e.boundary {
                        println!("estimate is at the boundary of the parameter space");
                    }
                }
            }
            Ok(true)
        }
        Command::Experiment { action } => match action {
            ExperimentAction::Run { manifest } => {
                let mut m = ExperimentManifest::read(&manifest)?;
                if let Some(s) = cli.seed {
                    m.seed = s;
                }
                let out = cli.out.or_else(|| m.out.clone()).unwrap_or_else(|| PathBuf::from("results").join(&m.name));
                let t = experiments::run_experiment(&m, &out, None)?;
                print!("{}", experiments::report(&out)?);
                Ok(t.all_passed())
            }
            ExperimentAction::Resume { dir } => {
                let t = experiments::resume_experiment(&dir, None)?;
                print!("{}", experiments::report(&dir)?);
                Ok(t.all_passed())
            }
            ExperimentAction::Preset { name, full } => {
                let seed = cli.seed.unwrap_or(20_240_101);
                let m = if full { presets::full(&name, seed)? } else { presets::desk(&name, seed)? };
                let m = m.ok_or_else(|| format!("unknown study {name:?}; known: {}", presets::STUDIES.join(", ")))?;
                let out = cli.out.unwrap_or_else(|| PathBuf::from(format!("{name}.json")));
                write_json(&out, &m)?;
                println!("wrote {}", out.display());
                Ok(true)
            }
        },
        Command::Diagnose { traces } => {
            let out = cli.out.unwrap_or_else(|| PathBuf::from("diagnostics"));
            let r = experiments::diagnose(&traces, &out, &DiagnoseConfig::default())?;
            for t in &r.traces {
                for p in &t.params {
                    println!("{} {:<10} median {:.5} (se {:.5})  acf30 {:.3}", t.path.display(), p.name, p.median, p.median_se, p.acf_lag30);
                }
            }
            for c in &r.replication {
                println!("{} replication {} traces {:?}: |diff| {:.5} vs 2 x {:.5}", if c.passed { "PASS" } else { "FAIL" }, c.param, c.traces, c.difference, c.combined_se);
            }
            Ok(r.all_passed())
        }
        Command::Report { dir } => {
            print!("{}", experiments::report(&dir)?);
            let t: experiments::ResultTables = read_json(&dir.join(experiments::runner::RESULTS_FILE))?;
            Ok(t.all_passed())
        }
    }
}
