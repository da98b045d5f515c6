//! Command-line front end: parse and type-check programs, validate guarded
//! model definitions, verify, synthesize, tune, evaluate and fuzz agents.
//!
//! Exit codes: 0 success, 1 synthesis or verification failure, 2 input
//! error, 3 environment error.

pub mod artifact;
pub mod commands;
pub mod error;
pub mod spec;

use clap::{Parser, Subcommand};
use error::{CliError, CliResult, EXIT_FAILURE, EXIT_INPUT, EXIT_OK};
use serde::Serialize;
use spec::{read_spec, DatasetRef, LoadedSpec, Overrides};
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(name = "gsynth", version, about = "Synthesis of verified programs over guarded generative models")]
pub struct Cli {
    /// Task specification file (JSON).
    #[arg(long, global = true, env = "GSYNTH_SPEC")]
    pub spec: Option<PathBuf>,
    /// Output directory for run artifacts.
    #[arg(long, global = true, env = "GSYNTH_OUT")]
    pub out: Option<PathBuf>,
    /// Worker threads (default: logical cores).
    #[arg(long, global = true, env = "GSYNTH_JOBS")]
    pub jobs: Option<usize>,
    /// Overrides the seed of the task file.
    #[arg(long, global = true, env = "GSYNTH_SEED")]
    pub seed: Option<u64>,
    /// SMT solver executable.
    #[arg(long, global = true, env = "GSYNTH_SOLVER")]
    pub solver: Option<PathBuf>,
    /// Per-obligation solver timeout in seconds.
    #[arg(long, global = true, env = "GSYNTH_TIMEOUT")]
    pub timeout: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and type-check a program; prints it back normalised.
    Parse {
        file: PathBuf,
        /// Additional guarded-model definitions.
        #[arg(long = "fggm")]
        fggms: Vec<PathBuf>,
    },
    /// Validate guarded-model definitions.
    CheckFggm { file: PathBuf },
    /// Verify a program, against the task contract when --spec is given.
    Verify {
        program: PathBuf,
        #[arg(long = "fggm")]
        fggms: Vec<PathBuf>,
    },
    /// Run the synthesis loop and write a run artifact to --out.
    Synthesize,
    /// Verify a program against the task and tune its guarded models.
    Tune {
        program: PathBuf,
        #[arg(long = "fggm")]
        fggms: Vec<PathBuf>,
    },
    /// Evaluate a stored agent on the task's test split.
    Eval { artifact: PathBuf },
    /// Run a stored agent on random inputs and parameters, counting
    /// specification violations.
    Fuzz {
        artifact: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        inputs: usize,
        #[arg(long, default_value_t = 100)]
        batches: usize,
    },
    /// Write the train/test CSV files of a dataset manifest (or of the
    /// task's dataset) to --out.
    MakeInstance { manifest: Option<PathBuf> },
}

impl Cli {
    pub fn overrides(&self) -> Overrides {
        Overrides { seed: self.seed, solver: self.solver.clone(), timeout_sec: self.timeout }
    }

    fn spec_opt(&self) -> CliResult<Option<LoadedSpec>> {
        self.spec.as_deref().map(|p| read_spec(p, &self.overrides())).transpose()
    }

    fn spec_req(&self) -> CliResult<LoadedSpec> {
        self.spec_opt()?.ok_or_else(|| CliError::msg(EXIT_INPUT, "this command needs --spec"))
    }

    fn out_req(&self) -> CliResult<&Path> {
        self.out.as_deref().ok_or_else(|| CliError::msg(EXIT_INPUT, "this command needs --out"))
    }
}

/// Size the global worker pool; later calls keep the first size.
pub fn configure_jobs(jobs: Option<usize>) {
    let n = jobs.unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)).max(1);
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
}

/// What a command produced: an exit code, a document for stdout and an
/// optional diagnostic for stderr.
pub struct Output {
    pub code: i32,
    pub stdout: String,
    pub diagnostic: Option<String>,
}

fn json<T: Serialize>(code: i32, v: &T) -> Output {
    Output { code, stdout: serde_json::to_string_pretty(v).expect("reports serialise") + "\n", diagnostic: None }
}

pub fn execute(cli: &Cli) -> CliResult<Output> {
    let ov = cli.overrides();
    match &cli.command {
        Command::Parse { file, fggms } => {
            Ok(Output { code: EXIT_OK, stdout: commands::cmd_parse(file, fggms, &ov)?, diagnostic: None })
        }
        Command::CheckFggm { file } => {
            let checks = commands::cmd_check_fggm(file, cli.spec_opt()?.as_ref(), &ov)?;
            let ok = checks.iter().all(|c| c.valid);
            Ok(json(if ok { EXIT_OK } else { EXIT_FAILURE }, &checks))
        }
        Command::Verify { program, fggms } => {
            let report = commands::cmd_verify(program, fggms, cli.spec_opt()?.as_ref(), &ov)?;
            let mut out = json(if report.verified { EXIT_OK } else { EXIT_FAILURE }, &report);
            if !report.verified {
                out.diagnostic = Some(report.messages().join("\n"));
            }
            Ok(out)
        }
        Command::Synthesize => {
            let spec = cli.spec_req()?;
            let outcome = commands::cmd_synthesize(&spec, cli.out_req()?)?;
            let s = &outcome.summary;
            let mut out = json(if s.returned { EXIT_OK } else { EXIT_FAILURE }, s);
            if !s.returned {
                out.diagnostic = Some(format!(
                    "no verified agent within the budget ({} proposals); see {}",
                    s.proposals,
                    s.out.join(artifact::ITERATIONS).display()
                ));
            }
            Ok(out)
        }
        Command::Tune { program, fggms } => {
            let spec = cli.spec_req()?;
            Ok(json(EXIT_OK, &commands::cmd_tune(program, fggms, &spec, cli.out.as_deref())?))
        }
        Command::Eval { artifact } => Ok(json(EXIT_OK, &commands::cmd_eval(artifact, &cli.spec_req()?)?)),
        Command::Fuzz { artifact, inputs, batches } => {
            let report = commands::cmd_fuzz(artifact, &cli.spec_req()?, *inputs, *batches)?;
            Ok(json(if report.clean() { EXIT_OK } else { EXIT_FAILURE }, &report))
        }
        Command::MakeInstance { manifest } => {
            let out = cli.out_req()?;
            let summary = match manifest {
                Some(m) => commands::cmd_make_instance(m, out)?,
                None => {
                    let spec = cli.spec_req()?;
                    match &spec.file.dataset {
                        DatasetRef::Path(p) => commands::cmd_make_instance(&spec.dir.join(p), out)?,
                        DatasetRef::Manifest(m) => {
                            let tmp = out.join("manifest.json");
                            artifact::create_dir(out)?;
                            artifact::write_json(out, "manifest.json", m)?;
                            commands::cmd_make_instance(&tmp, out)?
                        }
                        DatasetRef::Csv { .. } => return Err(CliError::msg(EXIT_INPUT, "the task's dataset is already a pair of CSV files")),
                    }
                }
            };
            Ok(json(EXIT_OK, &summary))
        }
    }
}

/// Run a parsed command line, printing to the given streams; returns the
/// exit code.
pub fn run(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    configure_jobs(cli.jobs);
    match execute(cli) {
        Ok(out) => {
            let _ = stdout.write_all(out.stdout.as_bytes());
            if let Some(d) = out.diagnostic {
                let _ = writeln!(stderr, "{d}");
            }
            out.code
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.code
        }
    }
}
