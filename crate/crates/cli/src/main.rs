use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dlp_cli::*;
use dlp_core::autoprover::SearchConfig;
use dlp_core::cert::{from_json, CertError};
use dlp_core::cyclic::check_proof;
use dlp_core::document::{parse_document, parse_variant_hint, Document};
use dlp_core::oracle::{Oracle, OracleConfig, Verdict};
use dlp_core::parse::{parse_sequent, Env};
use dlp_core::program::{InstKind, Instantiation};

#[derive(Parser)]
#[command(name = "dlp", version, about = "Cyclic proofs for labeled dynamic logic")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Prove every goal of a document, by its script or by search.
    Prove {
        file: PathBuf,
        /// Only replay proof scripts (the default).
        #[arg(long, conflicts_with = "auto")]
        script: bool,
        /// Search for proofs of goals that have no script.
        #[arg(long)]
        auto: bool,
        /// Node budget for search.
        #[arg(long, default_value_t = 500)]
        budget: usize,
        /// Depth budget for search.
        #[arg(long, default_value_t = 200)]
        depth: usize,
        /// Termination hint: `[site:] <expr> [invariant <formula>]` or `[site:] unroll <k>`.
        #[arg(long = "variant")]
        variants: Vec<String>,
        /// bounded[:B] or smt[:command].
        #[arg(long)]
        oracle: Option<String>,
        /// Print each proof as a node table.
        #[arg(long)]
        render_text: bool,
        /// Directory receiving one certificate per proved goal.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-check a proof certificate.
    Check {
        certificate: PathBuf,
        #[arg(long)]
        oracle: Option<String>,
    },
    /// Run the document's `run` program from a ground world.
    Exec {
        file: PathBuf,
        /// Initial values, e.g. "n=5,s=0".
        #[arg(long)]
        world: String,
        #[arg(long, default_value_t = 100_000)]
        budget: usize,
        #[arg(long)]
        alloc_base: Option<i128>,
    },
    /// Decide validity of a non-dynamic sequent.
    Oracle {
        sequent: String,
        /// Instantiation used to parse the sequent.
        #[arg(long, default_value = "wp")]
        inst: String,
        #[arg(long)]
        oracle: Option<String>,
    },
}

fn input_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(EXIT_INPUT as u8)
}

fn oracle_from(flag: &Option<String>) -> Result<Oracle, String> {
    let config = match flag {
        Some(text) => parse_oracle(text)?,
        None => OracleConfig::from_env(),
    };
    Ok(Oracle::new(config))
}

fn load(file: &PathBuf) -> Result<Document, String> {
    let src = std::fs::read_to_string(file).map_err(|e| format!("{}: {e}", file.display()))?;
    parse_document(&src).map_err(|e| format!("{}: {e}", file.display()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_INPUT as u8) } else { ExitCode::SUCCESS };
        }
    };
    match cli.command {
        Command::Prove {
            file,
            script: _,
            auto,
            budget,
            depth,
            variants,
            oracle,
            render_text,
            out,
        } => {
            let oracle = match oracle_from(&oracle) {
                Ok(o) => o,
                Err(e) => return input_error(e),
            };
            let doc = match load(&file) {
                Ok(d) => d,
                Err(e) => return input_error(e),
            };
            let mut hints = Vec::new();
            for v in &variants {
                match parse_variant_hint(v, &doc.env) {
                    Ok(h) => hints.push(h),
                    Err(e) => return input_error(format!("--variant `{v}`: {e}")),
                }
            }
            if budget == 0 || depth == 0 {
                return input_error("budgets must be positive");
            }
            if let Some(dir) = &out {
                if let Err(e) = std::fs::create_dir_all(dir) {
                    return input_error(format!("{}: {e}", dir.display()));
                }
            }
            let opts = ProveOptions {
                auto,
                search: SearchConfig {
                    max_nodes: budget,
                    max_depth: depth,
                    variants: hints,
                    ..SearchConfig::default()
                },
                render: render_text,
                out,
            };
            println!("oracle: {}", describe_oracle(oracle.config()));
            let reports = prove_document(&doc, &file, &oracle, &opts);
            for r in &reports {
                println!("{r}");
                if opts.render {
                    if let Some(table) = render_report(r) {
                        print!("{table}");
                    }
                }
            }
            ExitCode::from(exit_code(&reports) as u8)
        }
        Command::Check { certificate, oracle } => {
            let oracle = match oracle_from(&oracle) {
                Ok(o) => o,
                Err(e) => return input_error(e),
            };
            let text = match std::fs::read_to_string(&certificate) {
                Ok(t) => t,
                Err(e) => return input_error(format!("{}: {e}", certificate.display())),
            };
            let graph = match from_json(&text) {
                Ok(g) => g,
                Err(e @ (CertError::Json(_) | CertError::Version(_))) => return input_error(e),
                Err(e) => {
                    println!("rejected: {e}");
                    return ExitCode::from(EXIT_DISPROVED as u8);
                }
            };
            match check_proof(&graph, &oracle) {
                Ok(report) => {
                    println!("{report}");
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    println!("rejected: {e}");
                    ExitCode::from(EXIT_DISPROVED as u8)
                }
            }
        }
        Command::Exec {
            file,
            world,
            budget,
            alloc_base,
        } => {
            let doc = match load(&file) {
                Ok(d) => d,
                Err(e) => return input_error(e),
            };
            let world = match parse_world(&world) {
                Ok(w) => w,
                Err(e) => return input_error(format!("--world: {e}")),
            };
            match exec_document(&doc, &world, budget, alloc_base) {
                Ok(text) => {
                    print!("{text}");
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(e.exit_code() as u8)
                }
            }
        }
        Command::Oracle { sequent, inst, oracle } => {
            let oracle = match oracle_from(&oracle) {
                Ok(o) => o,
                Err(e) => return input_error(e),
            };
            let kind: InstKind = match inst.parse() {
                Ok(k) => k,
                Err(e) => return input_error(e),
            };
            let env = Env::new(Instantiation::new(kind));
            let s = match parse_sequent(&sequent, &env) {
                Ok(s) => s,
                Err(e) => return input_error(e),
            };
            match oracle.check_sequent(&s) {
                Ok(v) => {
                    println!("{v}");
                    ExitCode::from(match v {
                        Verdict::Valid(_) => EXIT_OK,
                        Verdict::Counterexample(_) => EXIT_DISPROVED,
                        Verdict::Unknown(_) => EXIT_UNKNOWN,
                    } as u8)
                }
                Err(e) => input_error(e),
            }
        }
    }
}
