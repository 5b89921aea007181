//! `registrar`: the developer-side command-line tool.
//!
//! Exit codes are a stable contract:
//!
//! | code | meaning                                   |
//! |------|-------------------------------------------|
//! | 0    | success, qualifies, or valid stamp        |
//! | 1    | negative result (invalid, rejected, ...)  |
//! | 2    | input error (unreadable or unparseable)   |
//! | 3    | model does not qualify                    |
//!
//! `validate`, `qualify` and `verify-stamp` never touch the network.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDate};
use clap::{Args, Parser, Subcommand};
use registry_core::policy::load_thresholds;
use registry_core::stamp::verifying_key_from_pem;
use registry_core::validate::{ValidationProblem, ValidationReport};
use registry_core::{
    default_thresholds, evaluate_qualification, validate_submission, verify_stamp, CapabilityMetrics,
    HighRiskProfile, QualificationDecision, RegistrationSubmission, StampVerdict, VerifyingKey,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NEGATIVE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NOT_QUALIFIED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "registrar", version, about = "Frontier model registry client")]
pub struct Cli {
    /// Print machine-readable JSON on stdout.
    #[arg(long, global = true)]
    pub json: bool,
    /// Registry base URL, for `submit` and `attest`.
    #[arg(long, global = true, env = "MR_SERVICE_URL")]
    pub service_url: Option<String>,
    /// Bearer credential, for `submit` and `attest`.
    #[arg(long, global = true, env = "MR_CREDENTIAL", hide_env_values = true)]
    pub credential: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a submission file against every disclosure rule.
    Validate { file: PathBuf },
    /// Decide whether the model must register.
    Qualify {
        /// A submission, `{metrics, risk}`, or bare metrics.
        file: PathBuf,
        /// Threshold config or full policy file; built-in defaults otherwise.
        #[arg(long, env = "MR_THRESHOLDS")]
        thresholds: Option<PathBuf>,
    },
    /// File a submission with the registry.
    Submit { file: PathBuf },
    /// Complete the current semiannual attestation for a family.
    Attest(AttestArgs),
    /// Verify a registration stamp offline.
    VerifyStamp {
        /// The token, or `-` to read it from stdin.
        token: String,
        /// Verification key: PEM, or the JSON served at /v1/public/key.
        #[arg(long, env = "MR_VERIFICATION_KEY")]
        key: Option<PathBuf>,
        /// Evaluate expiry at this instant (RFC 3339, YYYY-MM-DD or unix seconds).
        #[arg(long)]
        at: Option<String>,
    },
}

#[derive(Debug, Args)]
pub struct AttestArgs {
    pub family_id: String,
    /// Confirm the entry is accurate as filed.
    #[arg(long, conflicts_with = "update", required_unless_present = "update")]
    pub confirm: bool,
    /// Replace a version's disclosure with this submission file.
    #[arg(long, requires = "version")]
    pub update: Option<PathBuf>,
    /// Identifier of the version an update applies to.
    #[arg(long)]
    pub version: Option<String>,
    /// Name of the attesting officer.
    #[arg(long = "by")]
    pub attested_by: String,
    #[arg(long)]
    pub expected_sequence: Option<u64>,
}

struct Output<'a> {
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
    json: bool,
}

impl Output<'_> {
    fn json(&mut self, value: &Value) {
        let _ = writeln!(self.out, "{}", serde_json::to_string_pretty(value).expect("JSON values serialize"));
    }

    fn line(&mut self, text: impl std::fmt::Display) {
        let _ = writeln!(self.out, "{text}");
    }

    fn input_error(&mut self, message: impl std::fmt::Display) -> i32 {
        let message = message.to_string();
        let _ = writeln!(self.err, "error: {message}");
        if self.json {
            self.json(&json!({ "error": message }));
        }
        EXIT_INPUT
    }
}

/// Parses and runs one invocation, returning its exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    let mut io = Output {
        out,
        err,
        json: cli.json,
    };
    match &cli.command {
        Command::Validate { file } => cmd_validate(&mut io, file),
        Command::Qualify { file, thresholds } => cmd_qualify(&mut io, file, thresholds.as_deref()),
        Command::VerifyStamp { token, key, at } => cmd_verify_stamp(&mut io, token, key.as_deref(), at.as_deref()),
        Command::Submit { file } => cmd_submit(&mut io, &cli, file),
        Command::Attest(args) => cmd_attest(&mut io, &cli, args),
    }
}

#[derive(Debug)]
pub enum SubmissionInput {
    Parsed(Box<RegistrationSubmission>),
    /// Well-formed JSON that does not match the submission schema.
    Structural(ValidationProblem),
}

fn read_file(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))
}

fn read_json(path: &Path) -> Result<Value, String> {
    let text = read_file(path)?;
    serde_json::from_str(&text).map_err(|e| format!("{} is not JSON: {e}", path.display()))
}

/// Deserializes a submission, turning schema mismatches into a field-path problem.
pub fn parse_submission(value: Value) -> SubmissionInput {
    match serde_path_to_error::deserialize::<_, RegistrationSubmission>(value) {
        Ok(s) => SubmissionInput::Parsed(Box::new(s)),
        Err(e) => {
            let path = e.path().to_string();
            let message = e.inner().to_string();
            let parent = if path == "." { String::new() } else { format!("{path}.") };
            let problem = match message.strip_prefix("missing field `").and_then(|m| m.strip_suffix('`')) {
                Some(field) => ValidationProblem {
                    field_path: format!("{parent}{field}"),
                    problem: "is required".into(),
                },
                None => ValidationProblem {
                    field_path: if path == "." { "$".into() } else { path },
                    problem: message,
                },
            };
            SubmissionInput::Structural(problem)
        }
    }
}

fn load_submission(path: &Path) -> Result<Result<RegistrationSubmission, ValidationReport>, String> {
    Ok(match parse_submission(read_json(path)?) {
        SubmissionInput::Parsed(s) => {
            let report = validate_submission(&s);
            if report.is_valid() {
                Ok(*s)
            } else {
                Err(report)
            }
        }
        SubmissionInput::Structural(p) => Err(ValidationReport { problems: vec![p] }),
    })
}

fn print_report(io: &mut Output, report: &ValidationReport) {
    if io.json {
        io.json(&json!({ "valid": report.is_valid(), "problems": report }));
    } else if report.is_valid() {
        io.line("valid");
    } else {
        for p in report.iter() {
            io.line(format!("{}: {}", p.field_path, p.problem));
        }
    }
}

fn cmd_validate(io: &mut Output, file: &Path) -> i32 {
    match load_submission(file) {
        Err(e) => io.input_error(e),
        Ok(Ok(_)) => {
            print_report(io, &ValidationReport::default());
            EXIT_OK
        }
        Ok(Err(report)) => {
            print_report(io, &report);
            EXIT_NEGATIVE
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualificationInput {
    pub metrics: CapabilityMetrics,
    #[serde(default)]
    pub risk: HighRiskProfile,
}

/// Accepts a full submission, `{metrics, risk}`, or bare metrics.
pub fn parse_qualification_input(value: Value) -> Result<QualificationInput, String> {
    let is_object_with = |k: &str| value.as_object().is_some_and(|o| o.contains_key(k));
    if is_object_with("developer") {
        let s: RegistrationSubmission = serde_json::from_value(value).map_err(|e| format!("submission: {e}"))?;
        Ok(QualificationInput {
            metrics: s.metrics,
            risk: s.risk,
        })
    } else if is_object_with("metrics") {
        serde_json::from_value(value).map_err(|e| format!("qualification input: {e}"))
    } else {
        let metrics = serde_json::from_value(value).map_err(|e| format!("metrics: {e}"))?;
        Ok(QualificationInput {
            metrics,
            risk: HighRiskProfile::default(),
        })
    }
}

fn print_decision(io: &mut Output, decision: &QualificationDecision) {
    if io.json {
        io.json(&serde_json::to_value(decision).expect("decisions serialize"));
        return;
    }
    io.line(format!("qualifies: {}", if decision.qualifies { "yes" } else { "no" }));
    if !decision.triggered_rules.is_empty() {
        let rules: Vec<String> = decision.triggered_rules.iter().map(|r| format!("{r:?}")).collect();
        io.line(format!("triggered: {}", rules.join(", ")));
    }
    io.line(format!("config_version: {}", decision.config_version));
}

fn cmd_qualify(io: &mut Output, file: &Path, thresholds: Option<&Path>) -> i32 {
    let config = match thresholds {
        None => default_thresholds(),
        Some(path) => match read_file(path).and_then(|t| load_thresholds(&t).map_err(|e| e.to_string())) {
            Ok(c) => c,
            Err(e) => return io.input_error(format!("thresholds {}: {e}", path.display())),
        },
    };
    let input = match read_json(file).and_then(parse_qualification_input) {
        Ok(i) => i,
        Err(e) => return io.input_error(e),
    };
    let problems = registry_core::validate::validate_metrics(&input.metrics);
    if !problems.is_valid() {
        return io.input_error(format!("invalid metrics: {}", problems.to_string().trim_end()));
    }
    let decision = evaluate_qualification(&input.metrics, &input.risk, &config);
    print_decision(io, &decision);
    if decision.qualifies {
        EXIT_OK
    } else {
        EXIT_NOT_QUALIFIED
    }
}

/// Reads a verification key from PEM or from the `/v1/public/key` JSON body.
pub fn read_verification_key(path: &Path) -> Result<VerifyingKey, String> {
    let text = read_file(path)?;
    let pem = match serde_json::from_str::<Value>(&text) {
        Ok(v) => v
            .get("pem")
            .and_then(Value::as_str)
            .map(str::to_owned)
            .ok_or_else(|| format!("{}: JSON key file without a pem field", path.display()))?,
        Err(_) => text,
    };
    verifying_key_from_pem(&pem).map_err(|e| format!("{}: {e}", path.display()))
}

/// Unix seconds from RFC 3339, a bare date (midnight UTC) or an integer.
pub fn parse_instant(text: &str) -> Result<i64, String> {
    let t = text.trim();
    if let Ok(secs) = t.parse::<i64>() {
        return Ok(secs);
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(t) {
        return Ok(dt.timestamp());
    }
    if let Ok(d) = t.parse::<NaiveDate>() {
        return Ok(d.and_hms_opt(0, 0, 0).expect("midnight").and_utc().timestamp());
    }
    Err(format!("unrecognized instant {t:?}"))
}

fn cmd_verify_stamp(io: &mut Output, token: &str, key: Option<&Path>, at: Option<&str>) -> i32 {
    let Some(key_path) = key else {
        return io.input_error("a verification key is required (--key or MR_VERIFICATION_KEY)");
    };
    let key = match read_verification_key(key_path) {
        Ok(k) => k,
        Err(e) => return io.input_error(e),
    };
    let now = match at.map(parse_instant) {
        None => chrono::Utc::now().timestamp(),
        Some(Ok(t)) => t,
        Some(Err(e)) => return io.input_error(e),
    };
    let token = if token == "-" {
        let mut buf = String::new();
        if let Err(e) = std::io::stdin().read_line(&mut buf) {
            return io.input_error(format!("cannot read token from stdin: {e}"));
        }
        buf.trim().to_owned()
    } else {
        token.trim().to_owned()
    };
    let verdict = verify_stamp(&token, &key, now);
    if io.json {
        io.json(&serde_json::to_value(&verdict).expect("verdicts serialize"));
    } else {
        match &verdict {
            StampVerdict::Invalid(reason) => io.line(format!("Invalid: {}", reason.as_str())),
            StampVerdict::Valid(p) | StampVerdict::Expired(p) => {
                io.line(verdict.label());
                io.line(format!("id: {}", p.id));
                io.line(format!("developer: {}", p.dev));
                io.line(format!("family: {}", p.fam));
                io.line(format!("version: {}", p.ver));
                io.line(format!("status: {}", p.status));
                io.line(format!("issued: {}", format_instant(p.iat)));
                io.line(format!("expires: {}", format_instant(p.exp)));
            }
        }
    }
    if verdict.is_valid() {
        EXIT_OK
    } else {
        EXIT_NEGATIVE
    }
}

fn format_instant(secs: i64) -> String {
    DateTime::from_timestamp(secs, 0).map_or_else(|| secs.to_string(), |t| t.to_rfc3339())
}

struct Remote {
    base: String,
    credential: String,
}

fn remote(io: &mut Output, cli: &Cli) -> Result<Remote, i32> {
    let Some(base) = cli.service_url.as_deref().filter(|s| !s.trim().is_empty()) else {
        return Err(io.input_error("a service URL is required (--service-url or MR_SERVICE_URL)"));
    };
    let Some(credential) = cli.credential.as_deref().filter(|s| !s.trim().is_empty()) else {
        return Err(io.input_error("a credential is required (--credential or MR_CREDENTIAL)"));
    };
    Ok(Remote {
        base: base.trim_end_matches('/').to_owned(),
        credential: credential.to_owned(),
    })
}

/// POSTs JSON and returns the status with the parsed body.
fn post_json(remote: &Remote, path: &str, body: &Value) -> Result<(u16, Value), String> {
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .http_status_as_error(false)
        .build()
        .into();
    let url = format!("{}{path}", remote.base);
    let bytes = serde_json::to_vec(body).expect("JSON values serialize");
    let mut response = agent
        .post(&url)
        .header("authorization", &format!("Bearer {}", remote.credential))
        .header("content-type", "application/json")
        .send(&bytes[..])
        .map_err(|e| format!("cannot reach {url}: {e}"))?;
    let status = response.status().as_u16();
    let text = response
        .body_mut()
        .read_to_string()
        .map_err(|e| format!("reading response from {url}: {e}"))?;
    let value = serde_json::from_str(&text).unwrap_or(Value::String(text));
    Ok((status, value))
}

fn report_response(io: &mut Output, status: u16, body: &Value, describe: impl Fn(&Value) -> Vec<String>) -> i32 {
    let ok = (200..300).contains(&status);
    if io.json {
        io.json(&json!({ "status": status, "body": body }));
    } else if ok {
        for line in describe(body) {
            io.line(line);
        }
    } else {
        let code = body.get("code").and_then(Value::as_str).unwrap_or("Error");
        let message = body.get("message").and_then(Value::as_str).unwrap_or("");
        let _ = writeln!(io.err, "rejected ({status} {code}): {message}");
        if let Some(problems) = body.pointer("/details/problems").and_then(Value::as_array) {
            for p in problems {
                let _ = writeln!(
                    io.err,
                    "  {}: {}",
                    p["field_path"].as_str().unwrap_or("?"),
                    p["problem"].as_str().unwrap_or("?")
                );
            }
        }
    }
    if ok {
        EXIT_OK
    } else {
        EXIT_NEGATIVE
    }
}

fn cmd_submit(io: &mut Output, cli: &Cli, file: &Path) -> i32 {
    let submission = match load_submission(file) {
        Err(e) => return io.input_error(e),
        Ok(Err(report)) => {
            print_report(io, &report);
            return EXIT_NEGATIVE;
        }
        Ok(Ok(s)) => s,
    };
    let remote = match remote(io, cli) {
        Ok(r) => r,
        Err(code) => return code,
    };
    let body = serde_json::to_value(&submission).expect("submissions serialize");
    match post_json(&remote, "/v1/submissions", &body) {
        Err(e) => {
            let _ = writeln!(io.err, "error: {e}");
            if io.json {
                io.json(&json!({ "error": e }));
            }
            EXIT_NEGATIVE
        }
        Ok((status, body)) => report_response(io, status, &body, |b| {
            vec![
                format!("identifier: {}", b["identifier"].as_str().unwrap_or("?")),
                format!("family: {}", b["family_id"].as_str().unwrap_or("?")),
                format!("qualifies: {}", b["qualification"]["qualifies"]),
                format!("stamp: {}", b["stamp"].as_str().unwrap_or("-")),
            ]
        }),
    }
}

fn cmd_attest(io: &mut Output, cli: &Cli, args: &AttestArgs) -> i32 {
    let update = match &args.update {
        None => Value::Null,
        Some(path) => match load_submission(path) {
            Err(e) => return io.input_error(e),
            Ok(Err(report)) => {
                print_report(io, &report);
                return EXIT_NEGATIVE;
            }
            Ok(Ok(s)) => json!({ "identifier": args.version, "submission": s }),
        },
    };
    let remote = match remote(io, cli) {
        Ok(r) => r,
        Err(code) => return code,
    };
    let body = json!({
        "attested_by": args.attested_by,
        "expected_sequence": args.expected_sequence,
        "update": update,
    });
    let path = format!("/v1/families/{}/attestations", args.family_id.trim());
    match post_json(&remote, &path, &body) {
        Err(e) => {
            let _ = writeln!(io.err, "error: {e}");
            if io.json {
                io.json(&json!({ "error": e }));
            }
            EXIT_NEGATIVE
        }
        Ok((status, body)) => report_response(io, status, &body, |b| {
            vec![
                format!("attested due date: {}", b["attestation"]["due_date"].as_str().unwrap_or("?")),
                format!("outcome: {}", b["attestation"]["outcome"].as_str().unwrap_or("?")),
                format!("stamps reissued: {}", b["reissued_stamps"].as_array().map_or(0, Vec::len)),
            ]
        }),
    }
}
