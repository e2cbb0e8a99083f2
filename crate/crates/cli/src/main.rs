//! `scholar`: drives the scholarship workflow against a file-backed ledger
//! and content store. Every failure prints one `error: code=... detail=...`
//! line on stderr and exits with the status assigned to that code.

mod authority_dir;
mod commands;
mod env;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use scholar_core::identity::{ClaimValue, Did};
use scholar_core::ledger::ScholarshipId;
use scholar_core::Timestamp;

use commands::{AuthorizeArgs, IdentityArgs, Role, ScoreArgs};
use env::{parse_time, Env};
use error::{CliError, CliResult};

/// Four years of days, the default credential validity.
const DEFAULT_VALID_DAYS: u64 = 1461;

#[derive(Parser)]
#[command(name = "scholar", version, about = "Privacy-preserving scholarship evaluation")]
struct Cli {
    /// Ledger directory (state.json, events.json).
    #[arg(long, global = true, default_value = "ledger")]
    ledger: PathBuf,
    /// Content-addressed store for published awardee lists.
    #[arg(long, global = true, default_value = "store")]
    store: PathBuf,
    /// Proof-oracle registry. Holds private witnesses, so it lives apart
    /// from the public ledger.
    #[arg(long, global = true, default_value = "oracle.json")]
    oracle: PathBuf,
    /// Determinism seed for every random draw.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Logical time: integer seconds or RFC 3339. Defaults to the clock.
    #[arg(long, global = true, value_parser = parse_time)]
    time: Option<Timestamp>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a fresh key file (hex seed) and print its DID.
    Keygen {
        #[arg(long)]
        out: PathBuf,
    },
    /// Register the key's DID on the ledger; CAs also enter the CA registry.
    Register {
        #[arg(long, value_enum)]
        role: Role,
        #[arg(long)]
        key: PathBuf,
        /// Register with KYC not yet complete (refused by the registry).
        #[arg(long)]
        kyc_pending: bool,
    },
    /// Deploy a scholarship from a JSON config file.
    Deploy {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        admin_key: PathBuf,
    },
    /// Issue a verifiable credential.
    IssueVc {
        #[command(subcommand)]
        kind: IssueKind,
    },
    /// Ask a CA for the proof tuple of its dimension.
    Authorize {
        #[arg(long)]
        student_key: PathBuf,
        #[arg(long)]
        identity_vc: PathBuf,
        /// Identity claims to reveal to the CA.
        #[arg(long = "reveal", default_values_t = [String::from("studentDID")])]
        reveal: Vec<String>,
        #[arg(long)]
        ca_dir: PathBuf,
        #[arg(long)]
        ca_key: PathBuf,
        #[arg(long)]
        vc_id: String,
        #[arg(long)]
        scholarship: ScholarshipId,
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregate tuples and submit the application.
    Apply {
        #[arg(long)]
        student_key: PathBuf,
        #[arg(long)]
        scholarship: ScholarshipId,
        #[arg(long = "tuple", required = true)]
        tuples: Vec<PathBuf>,
        /// Also write the submitted application.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rank, publish awardee lists, and record their Merkle roots.
    Finalize {
        #[arg(long)]
        admin_key: PathBuf,
        #[arg(long)]
        scholarship: ScholarshipId,
    },
    /// Prove membership and receive the scholarship credential.
    Claim {
        #[arg(long)]
        student_key: PathBuf,
        #[arg(long)]
        admin_key: PathBuf,
        #[arg(long)]
        scholarship: ScholarshipId,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rebuild every tier root from public data and compare.
    Audit {
        #[arg(long)]
        scholarship: ScholarshipId,
    },
    /// Print ledger events as canonical JSON lines.
    Events {
        /// Only events above this height.
        #[arg(long, default_value_t = 0)]
        since: u64,
    },
}

#[derive(Subcommand)]
enum IssueKind {
    /// Identity credential from the administrator.
    Identity {
        #[arg(long)]
        issuer_key: PathBuf,
        #[arg(long)]
        subject: Did,
        /// Repeated `key=value`; `studentDID` is added when absent.
        #[arg(long = "claim", value_parser = commands::parse_claim)]
        claims: Vec<(String, ClaimValue)>,
        #[arg(long, default_value_t = DEFAULT_VALID_DAYS)]
        valid_days: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score credential from a CA, kept in its state directory.
    Score {
        #[arg(long)]
        ca_dir: PathBuf,
        #[arg(long)]
        ca_key: PathBuf,
        /// Required when the CA directory is created.
        #[arg(long)]
        dimension: Option<String>,
        #[arg(long)]
        subject: Did,
        #[arg(long)]
        score: u32,
        #[arg(long, default_value_t = DEFAULT_VALID_DAYS)]
        valid_days: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> CliResult<String> {
    let env = Env {
        ledger_dir: cli.ledger,
        store_dir: cli.store,
        oracle_path: cli.oracle,
        seed: cli.seed,
        time: cli.time,
    };
    match cli.command {
        Command::Keygen { out } => commands::keygen(&env, &out),
        Command::Register { role, key, kyc_pending } => commands::register(&env, role, &key, kyc_pending),
        Command::Deploy { config, admin_key } => commands::deploy(&env, &config, &admin_key),
        Command::IssueVc {
            kind:
                IssueKind::Identity {
                    issuer_key,
                    subject,
                    claims,
                    valid_days,
                    out,
                },
        } => commands::issue_identity(
            &env,
            IdentityArgs {
                issuer_key: &issuer_key,
                subject: &subject,
                claims: &claims,
                valid_days,
                out: &out,
            },
        ),
        Command::IssueVc {
            kind:
                IssueKind::Score {
                    ca_dir,
                    ca_key,
                    dimension,
                    subject,
                    score,
                    valid_days,
                    out,
                },
        } => commands::issue_score(
            &env,
            ScoreArgs {
                ca_dir: &ca_dir,
                ca_key: &ca_key,
                dimension: dimension.as_deref(),
                subject: &subject,
                score,
                valid_days,
                out: out.as_deref(),
            },
        ),
        Command::Authorize {
            student_key,
            identity_vc,
            reveal,
            ca_dir,
            ca_key,
            vc_id,
            scholarship,
            out,
        } => commands::authorize(
            &env,
            AuthorizeArgs {
                student_key: &student_key,
                identity_vc: &identity_vc,
                reveal: &reveal,
                ca_dir: &ca_dir,
                ca_key: &ca_key,
                vc_id: &vc_id,
                scholarship,
                out: &out,
            },
        ),
        Command::Apply {
            student_key,
            scholarship,
            tuples,
            out,
        } => commands::apply(&env, &student_key, scholarship, &tuples, out.as_deref()),
        Command::Finalize { admin_key, scholarship } => commands::finalize(&env, &admin_key, scholarship),
        Command::Claim {
            student_key,
            admin_key,
            scholarship,
            out,
        } => commands::claim(&env, &student_key, &admin_key, scholarship, &out),
        Command::Audit { scholarship } => {
            let (report, failure) = commands::audit(&env, scholarship)?;
            println!("{report}");
            failure.map_or(Ok(String::new()), Err)
        }
        Command::Events { since } => commands::events(&env, since),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version.
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let detail = e.to_string();
            let first = detail.lines().next().unwrap_or_default().trim_start_matches("error: ");
            let err = CliError::new("usage", first);
            eprintln!("{err}");
            return ExitCode::from(err.exit_code());
        }
    };
    match run(cli) {
        Ok(out) => {
            if !out.is_empty() {
                println!("{out}");
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("{err}");
            ExitCode::from(err.exit_code())
        }
    }
}
