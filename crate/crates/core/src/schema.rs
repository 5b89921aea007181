//! Disclosure categories that make up a registration submission.
//!
//! Every type here serializes to the canonical interchange form: snake_case
//! field names, integer counts, FLOP quantities as JSON numbers and dates as
//! `YYYY-MM-DD`. Enumerations use their variant names verbatim.

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum LegalStructure {
    Corporation,
    #[serde(rename = "LLC")]
    Llc,
    Partnership,
    Nonprofit,
    Other(String),
}

/// The legal entity that develops or owns the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeveloperEntity {
    pub legal_name: String,
    #[serde(default)]
    pub trade_names: Vec<String>,
    pub business_registration_number: String,
    pub legal_structure: LegalStructure,
    pub registered_address: String,
    pub principal_place_of_business: String,
    pub contact_phone: String,
    pub contact_email: String,
    pub emergency_contact: String,
    /// Non-vital disclosures (key individuals, revenue, insurance, ...). Not validated.
    #[serde(default)]
    pub optional_disclosures: BTreeMap<String, String>,
}

/// Measurable capability proxies.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CapabilityMetrics {
    pub total_parameters: u64,
    /// Average parameters active per token across a wide input range.
    pub active_parameters_avg: u64,
    /// Initial training compute, FLOP.
    pub training_flop: f64,
    /// Retraining, fine-tuning and post-training compute combined, FLOP.
    pub post_training_flop: f64,
    pub training_tokens: u64,
}

impl CapabilityMetrics {
    /// Training plus post-training compute, rounded to the nearest `f64`.
    pub fn total_compute(&self) -> f64 {
        self.training_flop + self.post_training_flop
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum HighRiskDomain {
    NuclearRadiological,
    ChemicalWeapons,
    BiologicalWeaponsOrDesignTools,
    Cybersecurity,
    AutonomousReplicationAdaptation,
}

impl HighRiskDomain {
    pub const ALL: [HighRiskDomain; 5] = [
        HighRiskDomain::NuclearRadiological,
        HighRiskDomain::ChemicalWeapons,
        HighRiskDomain::BiologicalWeaponsOrDesignTools,
        HighRiskDomain::Cybersecurity,
        HighRiskDomain::AutonomousReplicationAdaptation,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HighRiskBasis {
    PrimaryTrainingData,
    DemonstratedCapability,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct HighRiskProfile {
    #[serde(default)]
    pub domains: BTreeSet<HighRiskDomain>,
    #[serde(default)]
    pub basis: BTreeMap<HighRiskDomain, HighRiskBasis>,
}

impl HighRiskProfile {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn with(domain: HighRiskDomain, basis: HighRiskBasis) -> Self {
        let mut profile = Self::default();
        profile.domains.insert(domain);
        profile.basis.insert(domain, basis);
        profile
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpenSubcomponent {
    pub name: String,
    pub description: String,
    /// Per-component access flags; absent flags read as `false`.
    #[serde(default)]
    pub weights_public: bool,
    #[serde(default)]
    pub training_data_public: bool,
    #[serde(default)]
    pub source_code_public: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessDisclosure {
    /// Rights granted: copying, modifying, distributing, sublicensing.
    pub license_summary: String,
    pub weights_public: bool,
    pub training_data_public: bool,
    pub source_code_public: bool,
    #[serde(default)]
    pub open_subcomponents: Vec<OpenSubcomponent>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum OpennessClass {
    ClosedSource,
    OpenWeights,
    OpenSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DataCategory {
    Text,
    Images,
    ImagesLabeledPeople,
    Audio,
    AudioIsolatedVoices,
    Video,
    GeneticBiologicalBioinformatics,
    ChemicalBiologicalProperties,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingDataDisclosure {
    pub token_count: u64,
    #[serde(default)]
    pub categories: BTreeSet<DataCategory>,
    #[serde(default)]
    pub category_notes: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchitectureDisclosure {
    pub architecture_type: String,
    #[serde(default)]
    pub innovations_summary: String,
    pub layer_count: u32,
    #[serde(default)]
    pub layer_types: Vec<String>,
    pub external_memory_or_retrieval: bool,
    #[serde(default)]
    pub modalities_in: BTreeSet<String>,
    #[serde(default)]
    pub modalities_out: BTreeSet<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DeploymentMode {
    OnPremises,
    Cloud,
    Hybrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardwareDisclosure {
    /// Cluster capacity in FLOP/s.
    pub cluster_capacity_flops: f64,
    pub deployment_mode: DeploymentMode,
    #[serde(default)]
    pub cloud_providers: Vec<String>,
    pub chip_count: u64,
    #[serde(default)]
    pub chip_models: Vec<String>,
    #[serde(default)]
    pub significant_changes_note: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SecurityDisclosure {
    pub weights_protection: String,
    pub training_data_protection: String,
    pub source_code_protection: String,
    pub pii_protection: String,
    #[serde(default)]
    pub framework_reference: String,
    /// Label compared across versions for family consistency.
    pub declared_security_tier: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EvalType {
    Capability,
    Safety,
    Security,
    Alignment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationEntry {
    pub eval_type: EvalType,
    pub methodology: String,
    #[serde(default)]
    pub metrics: BTreeMap<String, f64>,
    #[serde(default)]
    pub instance_results_uri: Option<String>,
    #[serde(default)]
    pub red_team_summary: Option<String>,
    #[serde(default)]
    pub identified_risks: Option<String>,
    #[serde(default)]
    pub alignment_insights: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvaluationDisclosure {
    #[serde(default)]
    pub entries: Vec<EvaluationEntry>,
}

impl EvaluationDisclosure {
    /// Capability-domain scores used for family exceedance tracking.
    ///
    /// Only metrics of `Capability` entries whose value lies in `[0, 1]` count;
    /// when several entries report the same metric the highest value wins.
    pub fn capability_scores(&self) -> BTreeMap<String, f64> {
        let mut scores = BTreeMap::new();
        for entry in self.entries.iter().filter(|e| e.eval_type == EvalType::Capability) {
            for (name, &value) in &entry.metrics {
                if !(0.0..=1.0).contains(&value) {
                    continue;
                }
                scores
                    .entry(name.clone())
                    .and_modify(|best: &mut f64| *best = best.max(value))
                    .or_insert(value);
            }
        }
        scores
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionDisclosure {
    pub plain_language_description: String,
    #[serde(default)]
    pub primary_purposes: Vec<String>,
    #[serde(default)]
    pub alternative_uses: Vec<String>,
    #[serde(default)]
    pub documentation_links: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KpiThreshold {
    pub kpi: String,
    pub threshold_description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonitoringDisclosure {
    pub safety_kpis: Vec<String>,
    #[serde(default)]
    pub kpi_thresholds: Vec<KpiThreshold>,
    pub response_protocols: String,
    pub review_policy: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DeploymentStatus {
    PreDeployment,
    OnMarket,
    Recalled,
    Withdrawn,
}

impl DeploymentStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            DeploymentStatus::PreDeployment => "PreDeployment",
            DeploymentStatus::OnMarket => "OnMarket",
            DeploymentStatus::Recalled => "Recalled",
            DeploymentStatus::Withdrawn => "Withdrawn",
        }
    }

    /// Recalled and withdrawn registrations no longer carry a live stamp.
    pub fn is_active(self) -> bool {
        matches!(self, DeploymentStatus::PreDeployment | DeploymentStatus::OnMarket)
    }

    pub fn requires_deployment_date(self) -> bool {
        !matches!(self, DeploymentStatus::PreDeployment)
    }
}

impl std::fmt::Display for DeploymentStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The full structured disclosure filed for one model version.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistrationSubmission {
    pub developer: DeveloperEntity,
    pub family_trade_name: String,
    pub version_name: String,
    pub status: DeploymentStatus,
    #[serde(default)]
    pub deployment_date: Option<NaiveDate>,
    pub metrics: CapabilityMetrics,
    #[serde(default)]
    pub risk: HighRiskProfile,
    pub access: AccessDisclosure,
    pub training_data: TrainingDataDisclosure,
    pub architecture: ArchitectureDisclosure,
    pub hardware: HardwareDisclosure,
    pub security: SecurityDisclosure,
    #[serde(default)]
    pub evaluations: EvaluationDisclosure,
    pub functions: FunctionDisclosure,
    pub monitoring: MonitoringDisclosure,
}

impl RegistrationSubmission {
    /// Canonical UTF-8 JSON encoding.
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string(self).expect("submission serialization is infallible")
    }
}
