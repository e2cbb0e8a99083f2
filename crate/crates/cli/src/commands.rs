//! Subcommand bodies. Each returns the text to print on success.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::RngCore;
use serde::{Deserialize, Serialize};

use scholar_core::authority::{AuthorizationRequest, ProofTuple, IDENTITY_CPTID};
use scholar_core::circuits::ProofSystem;
use scholar_core::crypto::Digest;
use scholar_core::identity::{disclose, issue_credential, ClaimValue, Did, VerifiableCredential};
use scholar_core::ledger::{
    audit_scholarship, AuditOutcome, DimensionConfig, LedgerError, PrizeTier, ScholarshipConfig, ScholarshipId,
};
use scholar_core::selection::{prepare_award_roots, ContentId};
use scholar_core::student::{build_application, find_claim};
use scholar_core::Timestamp;

use crate::authority_dir::AuthorityDir;
use crate::env::{read_json, read_key, write_json, write_key, Access, Env};
use crate::error::{CliError, CliResult};

const DAY: Timestamp = 86_400;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Role {
    Student,
    Ca,
    Admin,
}

pub fn keygen(env: &Env, out: &Path) -> CliResult<String> {
    let mut seed = [0u8; 32];
    env.rng(&format!("keygen:{}", file_label(out))).fill_bytes(&mut seed);
    write_key(out, &seed)?;
    let key = read_key(out)?;
    Ok(Did::for_key(&key.public).to_string())
}

fn file_label(path: &Path) -> String {
    path.file_name()
        .map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned())
}

/// Prints the DID; registering an existing key prints the existing DID.
pub fn register(env: &Env, role: Role, key: &Path, kyc_pending: bool) -> CliResult<String> {
    let key = read_key(key)?;
    let _lock = env.lock(Access::Write)?;
    let backend = env.backend()?;
    let mut ledger = env.ledger(&backend)?;
    let now = env.now();
    let did = match role {
        Role::Ca => ledger.register_ca(key.public, now)?,
        Role::Student | Role::Admin => ledger.register_did(key.public, !kyc_pending, now)?.did,
    };
    env.save_ledger(&ledger)?;
    Ok(did.to_string())
}

/// Either integer seconds or an RFC 3339 string.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum TimeField {
    Seconds(Timestamp),
    Text(String),
}

impl TimeField {
    fn resolve(&self, field: &str) -> CliResult<Timestamp> {
        match self {
            TimeField::Seconds(t) => Ok(*t),
            TimeField::Text(s) => scholar_core::identity::parse_rfc3339(s)
                .ok_or_else(|| CliError::new("config", format!("{field}: {s:?} is not RFC 3339"))),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct DimensionEntry {
    dimension: String,
    weight: u32,
    ca: Did,
}

/// Deployment file. CA keys are resolved from the ledger's CA registry and
/// verifying keys come from the backend, so neither appears here.
#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct DeployFile {
    id: ScholarshipId,
    name: String,
    start_time: TimeField,
    end_time: TimeField,
    prize_counts: Vec<PrizeTier>,
    dimensions: Vec<DimensionEntry>,
    #[serde(default)]
    bind_student: bool,
}

pub fn deploy(env: &Env, config_path: &Path, admin_key: &Path) -> CliResult<String> {
    let text = std::fs::read(config_path).map_err(|e| CliError::io(config_path, e))?;
    let file: DeployFile = serde_json::from_slice(&text)
        .map_err(|e| CliError::new("config", format!("{}: {e}", config_path.display())))?;
    let admin = read_key(admin_key)?;
    let _lock = env.lock(Access::Write)?;
    let backend = env.backend()?;
    let mut ledger = env.ledger(&backend)?;

    let mut dimensions = Vec::with_capacity(file.dimensions.len());
    for d in file.dimensions {
        let ca_public_key = *ledger.state().ca_key(&d.ca).ok_or_else(|| {
            CliError::new(
                "config",
                format!("dimension {:?}: CA {} is not registered", d.dimension, d.ca),
            )
        })?;
        dimensions.push(DimensionConfig {
            dimension: d.dimension,
            weight: d.weight,
            ca: d.ca,
            ca_public_key,
        });
    }
    let (_, weighted_vk) = backend.setup_weighted();
    let (_, aggregate_vk) = backend
        .setup_aggregate(dimensions.len())
        .map_err(|e| CliError::new("config", e.to_string()))?;
    let config = ScholarshipConfig {
        id: file.id,
        name: file.name,
        prize_counts: file.prize_counts,
        dimensions,
        start_time: file.start_time.resolve("startTime")?,
        end_time: file.end_time.resolve("endTime")?,
        weighted_vk,
        aggregate_vk,
        bind_student: file.bind_student,
    };
    config.validate()?;
    let id = ledger.deploy(config, &Did::for_key(&admin.public), env.now())?;
    env.save_ledger(&ledger)?;
    Ok(id.to_string())
}

/// `key=value`; integers and decimals keep their numeric type.
pub fn parse_claim(s: &str) -> Result<(String, ClaimValue), String> {
    let (key, value) = s.split_once('=').ok_or_else(|| format!("{s:?} is not key=value"))?;
    let value = if let Ok(i) = value.parse::<i64>() {
        ClaimValue::Integer(i)
    } else if let Some(f) = value.parse::<f64>().ok().filter(|f| f.is_finite() && value.contains('.')) {
        ClaimValue::Decimal(f)
    } else {
        ClaimValue::Text(value.to_string())
    };
    Ok((key.to_string(), value))
}

pub struct IdentityArgs<'a> {
    pub issuer_key: &'a Path,
    pub subject: &'a Did,
    pub claims: &'a [(String, ClaimValue)],
    pub valid_days: u64,
    pub out: &'a Path,
}

pub fn issue_identity(env: &Env, args: IdentityArgs<'_>) -> CliResult<String> {
    let issuer = read_key(args.issuer_key)?;
    let mut claims: BTreeMap<String, ClaimValue> = args.claims.iter().cloned().collect();
    claims
        .entry("studentDID".into())
        .or_insert_with(|| ClaimValue::Text(args.subject.to_string()));
    let now = env.now();
    let mut rng = env.rng(&format!("identity-vc:{}", args.subject));
    let vc = issue_credential(
        &issuer,
        args.subject,
        claims,
        IDENTITY_CPTID,
        now,
        now + args.valid_days * DAY,
        &mut rng,
    )?;
    write_json(args.out, &vc)?;
    Ok(vc.id)
}

pub struct ScoreArgs<'a> {
    pub ca_dir: &'a Path,
    pub ca_key: &'a Path,
    pub dimension: Option<&'a str>,
    pub subject: &'a Did,
    pub score: u32,
    pub valid_days: u64,
    pub out: Option<&'a Path>,
}

/// Prints the credential id; the student quotes it when requesting
/// authorization.
pub fn issue_score(env: &Env, args: ScoreArgs<'_>) -> CliResult<String> {
    let dir = AuthorityDir::new(args.ca_dir);
    let ca = dir.open(read_key(args.ca_key)?, args.dimension)?;
    let now = env.now();
    let mut rng = env.rng(&format!("score-vc:{}:{}", ca.dimension(), args.subject));
    let vc = ca.issue_score_vc(args.subject, args.score, now, now + args.valid_days * DAY, &mut rng)?;
    dir.store(&vc)?;
    if let Some(out) = args.out {
        write_json(out, &vc)?;
    }
    Ok(vc.id)
}

pub struct AuthorizeArgs<'a> {
    pub student_key: &'a Path,
    pub identity_vc: &'a Path,
    pub reveal: &'a [String],
    pub ca_dir: &'a Path,
    pub ca_key: &'a Path,
    pub vc_id: &'a str,
    pub scholarship: ScholarshipId,
    pub out: &'a Path,
}

/// Student-side request, served in process by the CA directory. The CA
/// trusts identity credentials issued by the scholarship's administrator.
pub fn authorize(env: &Env, args: AuthorizeArgs<'_>) -> CliResult<String> {
    let student = read_key(args.student_key)?;
    let identity: VerifiableCredential = read_json(args.identity_vc)?;
    let ca_key = read_key(args.ca_key)?;
    let _lock = env.lock(Access::Write)?;
    let backend = env.backend()?;
    let ledger = env.ledger(&backend)?;

    let mut ca = AuthorityDir::new(args.ca_dir).open(ca_key, None)?;
    if let Ok(s) = ledger.state().scholarship(args.scholarship) {
        ca.trust_issuer(s.admin.clone());
    }
    let disclosed = disclose(&identity, args.reveal.iter().map(String::as_str))?;
    let request = AuthorizationRequest::new(&student, disclosed, args.vc_id, args.scholarship, ca.dimension());
    let (weighted_pk, _) = backend.setup_weighted();
    let tuple = ca.handle_authorization(&request, ledger.state(), backend.as_ref(), &weighted_pk, env.now())?;
    env.save_backend(&backend)?;
    write_json(args.out, &tuple)?;
    Ok(format!("{} tuple written to {}", ca.dimension(), args.out.display()))
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Receipt {
    height: u64,
    scholarship_id: ScholarshipId,
    student: Did,
    total: u32,
    accepted_at: Timestamp,
}

pub fn apply(
    env: &Env,
    student_key: &Path,
    scholarship: ScholarshipId,
    tuple_paths: &[PathBuf],
    out: Option<&Path>,
) -> CliResult<String> {
    let student = Did::for_key(&read_key(student_key)?.public);
    let tuples = tuple_paths
        .iter()
        .map(|p| read_json::<ProofTuple>(p))
        .collect::<CliResult<Vec<_>>>()?;
    let _lock = env.lock(Access::Write)?;
    let backend = env.backend()?;
    let mut ledger = env.ledger(&backend)?;

    let n = ledger.state().scholarship(scholarship)?.config.dimension_count();
    let (aggregate_pk, _) = backend.setup_aggregate(n)?;
    let app = build_application(backend.as_ref(), &student, scholarship, &tuples, ledger.state(), &aggregate_pk)?;
    if let Some(out) = out {
        write_json(out, &app)?;
    }
    let outcome = ledger.submit_application(&app, env.now());
    // Rejections are ledger events too, so persist before reporting.
    env.save_ledger(&ledger)?;
    env.save_backend(&backend)?;
    let record = outcome?;
    let receipt = Receipt {
        height: ledger.height(),
        scholarship_id: scholarship,
        student: record.student,
        total: record.total,
        accepted_at: record.accepted_at,
    };
    to_pretty(&receipt)
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct RootOutput {
    tier: String,
    root: Digest,
    list_cid: ContentId,
}

/// Rank, publish the lists, and record their roots. The deadline and
/// admin checks run before anything is published.
pub fn finalize(env: &Env, admin_key: &Path, scholarship: ScholarshipId) -> CliResult<String> {
    let admin = Did::for_key(&read_key(admin_key)?.public);
    let _lock = env.lock(Access::Write)?;
    let backend = env.backend()?;
    let mut ledger = env.ledger(&backend)?;
    let now = env.now();
    let s = ledger.state().scholarship(scholarship)?;
    if now <= s.config.end_time {
        return Err(LedgerError::TooEarly.into());
    }
    if s.admin != admin {
        return Err(LedgerError::NotAdmin.into());
    }
    if let Some(tier) = s.award_roots.keys().next() {
        return Err(LedgerError::AlreadySet(tier.clone()).into());
    }
    let store = env.store()?;
    let (_, entries) = prepare_award_roots(&store, &s.applications, &s.config.prize_counts)?;
    ledger.set_award_roots(scholarship, entries.clone(), &admin, now)?;
    env.save_ledger(&ledger)?;
    let out: Vec<RootOutput> = entries
        .into_iter()
        .map(|e| RootOutput {
            tier: e.tier,
            root: e.root,
            list_cid: e.list_cid,
        })
        .collect();
    to_pretty(&out)
}

/// The admin key is the contract's issuing key for the scholarship VC.
pub fn claim(
    env: &Env,
    student_key: &Path,
    admin_key: &Path,
    scholarship: ScholarshipId,
    out: &Path,
) -> CliResult<String> {
    let student = Did::for_key(&read_key(student_key)?.public);
    let admin = read_key(admin_key)?;
    let _lock = env.lock(Access::Write)?;
    let backend = env.backend()?;
    let mut ledger = env.ledger(&backend)?;
    let store = env.store()?;
    let s = ledger.state().scholarship(scholarship)?;
    if s.award_roots.is_empty() {
        let tier = s.config.prize_counts.first().map(|t| t.tier.clone()).unwrap_or_default();
        return Err(LedgerError::RootsNotSet(tier).into());
    }
    let request = find_claim(s, &store, &student)?;
    let mut rng = env.rng(&format!("scholarship-vc:{scholarship}:{student}"));
    let vc = ledger.claim_scholarship(scholarship, &request, &admin, env.now(), &mut rng)?;
    env.save_ledger(&ledger)?;
    write_json(out, &vc)?;
    Ok(format!("{} {} {}", vc.id, request.tier, out.display()))
}

/// First line is the overall verdict; one line per tier follows. Any
/// verdict other than CONSISTENT is also a failure exit.
pub fn audit(env: &Env, scholarship: ScholarshipId) -> CliResult<(String, Option<CliError>)> {
    let _lock = env.lock(Access::Read)?;
    let backend = env.backend()?;
    let ledger = env.ledger(&backend)?;
    let store = env.store()?;
    let report = audit_scholarship(ledger.state().scholarship(scholarship)?, &store);
    let mut lines = vec![report.outcome.label().to_string()];
    for t in &report.tiers {
        lines.push(format!("tier={} outcome={} detail={}", t.tier, t.outcome.label(), t.detail));
    }
    let failure = match report.outcome {
        AuditOutcome::Consistent => None,
        AuditOutcome::RootMismatch => Some(CliError::new("root-mismatch", failing_tiers(&report.tiers))),
        AuditOutcome::Incomplete => Some(CliError::new("incomplete", failing_tiers(&report.tiers))),
    };
    Ok((lines.join("\n"), failure))
}

fn failing_tiers(tiers: &[scholar_core::ledger::TierAudit]) -> String {
    tiers
        .iter()
        .filter(|t| t.outcome != AuditOutcome::Consistent)
        .map(|t| t.tier.as_str())
        .collect::<Vec<_>>()
        .join(",")
}

/// One canonical JSON event per line.
pub fn events(env: &Env, since: u64) -> CliResult<String> {
    let _lock = env.lock(Access::Read)?;
    let backend = env.backend()?;
    let ledger = env.ledger(&backend)?;
    let lines = ledger
        .get_events(since)
        .iter()
        .map(|e| scholar_core::canonical::to_canonical_string(e).map_err(|e| CliError::new("io", e.to_string())))
        .collect::<CliResult<Vec<_>>>()?;
    Ok(lines.join("\n"))
}

fn to_pretty<T: Serialize>(value: &T) -> CliResult<String> {
    serde_json::to_string_pretty(value).map_err(|e| CliError::new("io", e.to_string()))
}
