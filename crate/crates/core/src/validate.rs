//! Submission validation.
//!
//! Problems are data: the validator walks every nested disclosure, collects
//! each invariant violation with its dotted field path and returns them sorted
//! by path. An empty report means the submission is valid.

use serde::{Deserialize, Serialize};

use crate::schema::{
    AccessDisclosure, ArchitectureDisclosure, CapabilityMetrics, DataCategory, DeploymentMode,
    DeveloperEntity, EvaluationDisclosure, FunctionDisclosure, HardwareDisclosure,
    HighRiskProfile, MonitoringDisclosure, RegistrationSubmission, SecurityDisclosure,
    TrainingDataDisclosure,
};

/// Upper bound on the plain-language function description.
pub const MAX_DESCRIPTION_CHARS: usize = 2000;

pub const NON_EMPTY: &str = "must be non-empty";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ValidationProblem {
    pub field_path: String,
    pub problem: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ValidationReport {
    pub problems: Vec<ValidationProblem>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.problems.is_empty()
    }

    pub fn len(&self) -> usize {
        self.problems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.problems.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ValidationProblem> {
        self.problems.iter()
    }

    pub fn mentions(&self, field_path: &str) -> bool {
        self.problems.iter().any(|p| p.field_path == field_path)
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for p in &self.problems {
            writeln!(f, "{}: {}", p.field_path, p.problem)?;
        }
        Ok(())
    }
}

#[derive(Default)]
struct Collector {
    problems: Vec<ValidationProblem>,
}

impl Collector {
    fn push(&mut self, path: impl Into<String>, problem: impl Into<String>) {
        self.problems.push(ValidationProblem {
            field_path: path.into(),
            problem: problem.into(),
        });
    }

    fn non_empty(&mut self, path: &str, value: &str) {
        if value.trim().is_empty() {
            self.push(path, NON_EMPTY);
        }
    }

    fn finite_non_negative(&mut self, path: &str, value: f64) {
        if !value.is_finite() {
            self.push(path, "must be finite");
        } else if value < 0.0 {
            self.push(path, "must be non-negative");
        }
    }

    fn finish(mut self) -> ValidationReport {
        self.problems.sort();
        ValidationReport {
            problems: self.problems,
        }
    }
}

/// Checks every invariant of a parsed submission.
pub fn validate_submission(payload: &RegistrationSubmission) -> ValidationReport {
    let mut c = Collector::default();
    developer(&mut c, &payload.developer);
    c.non_empty("family_trade_name", &payload.family_trade_name);
    c.non_empty("version_name", &payload.version_name);
    if payload.status.requires_deployment_date() && payload.deployment_date.is_none() {
        c.push(
            "deployment_date",
            format!("required when status is {}", payload.status),
        );
    }
    metrics(&mut c, &payload.metrics);
    risk(&mut c, &payload.risk);
    access(&mut c, &payload.access);
    training_data(&mut c, &payload.training_data);
    architecture(&mut c, &payload.architecture);
    hardware(&mut c, &payload.hardware);
    security(&mut c, &payload.security);
    evaluations(&mut c, &payload.evaluations);
    functions(&mut c, &payload.functions);
    monitoring(&mut c, &payload.monitoring);
    c.finish()
}

/// Validates capability metrics on their own, with paths rooted at `metrics`.
pub fn validate_metrics(m: &CapabilityMetrics) -> ValidationReport {
    let mut c = Collector::default();
    metrics(&mut c, m);
    c.finish()
}

fn developer(c: &mut Collector, d: &DeveloperEntity) {
    c.non_empty("developer.legal_name", &d.legal_name);
    c.non_empty(
        "developer.business_registration_number",
        &d.business_registration_number,
    );
    c.non_empty("developer.emergency_contact", &d.emergency_contact);
    if d.contact_email.trim().is_empty() {
        c.push("developer.contact_email", NON_EMPTY);
    } else if !is_plausible_email(&d.contact_email) {
        c.push(
            "developer.contact_email",
            "must contain exactly one '@' with non-empty local and domain parts",
        );
    }
}

fn is_plausible_email(email: &str) -> bool {
    let mut parts = email.split('@');
    match (parts.next(), parts.next(), parts.next()) {
        (Some(local), Some(domain), None) => !local.is_empty() && !domain.is_empty(),
        _ => false,
    }
}

fn metrics(c: &mut Collector, m: &CapabilityMetrics) {
    if m.active_parameters_avg > m.total_parameters {
        c.push(
            "metrics.active_parameters_avg",
            "must not exceed total_parameters",
        );
    }
    c.finite_non_negative("metrics.training_flop", m.training_flop);
    c.finite_non_negative("metrics.post_training_flop", m.post_training_flop);
}

fn risk(c: &mut Collector, r: &HighRiskProfile) {
    for domain in &r.domains {
        if !r.basis.contains_key(domain) {
            c.push(format!("risk.basis.{domain:?}"), "missing basis for declared domain");
        }
    }
    for domain in r.basis.keys() {
        if !r.domains.contains(domain) {
            c.push(format!("risk.basis.{domain:?}"), "basis given for undeclared domain");
        }
    }
}

fn access(c: &mut Collector, a: &AccessDisclosure) {
    c.non_empty("access.license_summary", &a.license_summary);
}

fn training_data(c: &mut Collector, t: &TrainingDataDisclosure) {
    let has = |cat| t.categories.contains(&cat);
    if has(DataCategory::ImagesLabeledPeople) && !has(DataCategory::Images) {
        c.push(
            "training_data.categories",
            "ImagesLabeledPeople requires Images",
        );
    }
    if has(DataCategory::AudioIsolatedVoices) && !has(DataCategory::Audio) {
        c.push(
            "training_data.categories",
            "AudioIsolatedVoices requires Audio",
        );
    }
}

fn architecture(c: &mut Collector, a: &ArchitectureDisclosure) {
    c.non_empty("architecture.architecture_type", &a.architecture_type);
    if a.layer_count < 1 {
        c.push("architecture.layer_count", "must be at least 1");
    }
}

fn hardware(c: &mut Collector, h: &HardwareDisclosure) {
    c.finite_non_negative("hardware.cluster_capacity_flops", h.cluster_capacity_flops);
    if matches!(h.deployment_mode, DeploymentMode::Cloud | DeploymentMode::Hybrid)
        && h.cloud_providers.iter().all(|p| p.trim().is_empty())
    {
        c.push(
            "hardware.cloud_providers",
            "required for cloud or hybrid deployment",
        );
    }
}

fn security(c: &mut Collector, s: &SecurityDisclosure) {
    c.non_empty("security.weights_protection", &s.weights_protection);
    c.non_empty("security.training_data_protection", &s.training_data_protection);
    c.non_empty("security.source_code_protection", &s.source_code_protection);
    c.non_empty("security.pii_protection", &s.pii_protection);
    c.non_empty("security.declared_security_tier", &s.declared_security_tier);
}

fn evaluations(c: &mut Collector, e: &EvaluationDisclosure) {
    for (i, entry) in e.entries.iter().enumerate() {
        c.non_empty(
            &format!("evaluations.entries[{i}].methodology"),
            &entry.methodology,
        );
        for (name, value) in &entry.metrics {
            if !value.is_finite() {
                c.push(
                    format!("evaluations.entries[{i}].metrics.{name}"),
                    "must be finite",
                );
            }
        }
    }
}

fn functions(c: &mut Collector, f: &FunctionDisclosure) {
    let path = "functions.plain_language_description";
    if f.plain_language_description.trim().is_empty() {
        c.push(path, NON_EMPTY);
    } else if f.plain_language_description.chars().count() > MAX_DESCRIPTION_CHARS {
        c.push(
            path,
            format!("must be at most {MAX_DESCRIPTION_CHARS} characters"),
        );
    }
}

fn monitoring(c: &mut Collector, m: &MonitoringDisclosure) {
    if m.safety_kpis.iter().all(|k| k.trim().is_empty()) {
        c.push("monitoring.safety_kpis", NON_EMPTY);
    }
    for (i, t) in m.kpi_thresholds.iter().enumerate() {
        if !m.safety_kpis.contains(&t.kpi) {
            c.push(
                format!("monitoring.kpi_thresholds[{i}].kpi"),
                "must name a listed safety KPI",
            );
        }
    }
}
