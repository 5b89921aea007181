//! A complete, valid reference submission for tests, examples and demos.

use std::collections::BTreeMap;

use chrono::NaiveDate;

use crate::schema::*;

pub fn sample_submission() -> RegistrationSubmission {
    RegistrationSubmission {
        developer: DeveloperEntity {
            legal_name: "Northwind Intelligence Ltd".into(),
            trade_names: vec!["Northwind AI".into()],
            business_registration_number: "BRN-0042-7781".into(),
            legal_structure: LegalStructure::Corporation,
            registered_address: "1 Harbour Street, Port Town".into(),
            principal_place_of_business: "1 Harbour Street, Port Town".into(),
            contact_phone: "+44 20 7946 0000".into(),
            contact_email: "registry@northwind.example".into(),
            emergency_contact: "+44 20 7946 0999 (security on-call)".into(),
            optional_disclosures: BTreeMap::from([("key_individuals".into(), "A. Chen (CEO)".into())]),
        },
        family_trade_name: "Kestrel".into(),
        version_name: "kestrel-1".into(),
        status: DeploymentStatus::PreDeployment,
        deployment_date: None,
        metrics: CapabilityMetrics {
            total_parameters: 400_000_000_000,
            active_parameters_avg: 120_000_000_000,
            training_flop: 3.0e25,
            post_training_flop: 2.0e24,
            training_tokens: 15_000_000_000_000,
        },
        risk: HighRiskProfile::none(),
        access: AccessDisclosure {
            license_summary: "Proprietary; no copying, modification, distribution or sublicensing".into(),
            weights_public: false,
            training_data_public: false,
            source_code_public: false,
            open_subcomponents: vec![],
        },
        training_data: TrainingDataDisclosure {
            token_count: 15_000_000_000_000,
            categories: [DataCategory::Text, DataCategory::Images].into(),
            category_notes: "Licensed web text and captioned images".into(),
        },
        architecture: ArchitectureDisclosure {
            architecture_type: "mixture-of-experts transformer".into(),
            innovations_summary: "Top-2 expert routing".into(),
            layer_count: 96,
            layer_types: vec!["attention".into(), "moe-feedforward".into()],
            external_memory_or_retrieval: false,
            modalities_in: ["text".to_string(), "image".to_string()].into(),
            modalities_out: ["text".to_string()].into(),
        },
        hardware: HardwareDisclosure {
            cluster_capacity_flops: 4.0e19,
            deployment_mode: DeploymentMode::Cloud,
            cloud_providers: vec!["Example Cloud".into()],
            chip_count: 16_384,
            chip_models: vec!["Accelerator X2".into()],
            significant_changes_note: String::new(),
        },
        security: SecurityDisclosure {
            weights_protection: "Weights encrypted at rest; two-person access".into(),
            training_data_protection: "Access-controlled storage with audit logs".into(),
            source_code_protection: "Private repositories, hardware keys".into(),
            pii_protection: "PII filtered before training".into(),
            framework_reference: "Security Level 3 (weights protection framework)".into(),
            declared_security_tier: "SL3".into(),
        },
        evaluations: EvaluationDisclosure {
            entries: vec![
                EvaluationEntry {
                    eval_type: EvalType::Capability,
                    methodology: "Autonomous replication task suite, 50 tasks".into(),
                    metrics: BTreeMap::from([("autonomous_replication".into(), 0.42)]),
                    instance_results_uri: Some("https://northwind.example/evals/ar".into()),
                    red_team_summary: None,
                    identified_risks: None,
                    alignment_insights: None,
                },
                EvaluationEntry {
                    eval_type: EvalType::Safety,
                    methodology: "External red team, 6 weeks".into(),
                    metrics: BTreeMap::new(),
                    instance_results_uri: None,
                    red_team_summary: Some("No critical findings".into()),
                    identified_risks: Some("Persuasion uplift moderate".into()),
                    alignment_insights: None,
                },
            ],
        },
        functions: FunctionDisclosure {
            plain_language_description: "A general-purpose assistant that answers questions and drafts text.".into(),
            primary_purposes: vec!["assistant".into()],
            alternative_uses: vec!["code generation".into()],
            documentation_links: vec!["https://northwind.example/docs".into()],
        },
        monitoring: MonitoringDisclosure {
            safety_kpis: vec!["jailbreak_rate".into()],
            kpi_thresholds: vec![KpiThreshold {
                kpi: "jailbreak_rate".into(),
                threshold_description: "above 1% of sampled sessions".into(),
            }],
            response_protocols: "Roll back to previous checkpoint within 24h".into(),
            review_policy: "Quarterly".into(),
        },
    }
}

/// The sample submission moved onto the market on `date`.
pub fn deployed_submission(date: NaiveDate) -> RegistrationSubmission {
    let mut s = sample_submission();
    s.status = DeploymentStatus::OnMarket;
    s.deployment_date = Some(date);
    s
}
