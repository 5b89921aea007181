use std::path::{Path, PathBuf};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use registry_core::{default_thresholds, evaluate_qualification, CapabilityMetrics, HighRiskProfile};
use serde_json::Value;

use crate::stamps::{vectors, vectors_path};
use crate::{ensure, Outcome};

const RANDOM_METRIC_FILES: usize = 200;

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../cli/fixtures")
        .join(name)
        .display()
        .to_string()
}

fn run(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("registrar").chain(args.iter().copied());
    let code = registrar_cli::run(argv, &mut out, &mut err);
    (code, String::from_utf8_lossy(&out).into_owned())
}

fn expect(args: &[&str], code: i32) -> Result<String, String> {
    let (got, out) = run(args);
    ensure!(got == code, "registrar {} exited {got}, expected {code}: {out}", args.join(" "));
    Ok(out)
}

/// The exit-code table over the fixture corpus.
fn exit_codes(dir: &Path) -> Result<usize, String> {
    let valid = fixture("valid_submission.json");
    let missing = fixture("missing_legal_name.json");
    let not_json = fixture("not_json.txt");
    let flop = fixture("metrics_flop_1e26.json");
    let below = fixture("metrics_below_thresholds.json");
    let table: Vec<(Vec<&str>, i32)> = vec![
        (vec!["validate", &valid], 0),
        (vec!["validate", &missing], 1),
        (vec!["validate", &not_json], 2),
        (vec!["validate", "/nonexistent.json"], 2),
        (vec!["qualify", &flop], 0),
        (vec!["qualify", &below], 3),
        (vec!["qualify", &valid], 3),
        (vec!["qualify", &not_json], 2),
        (vec!["submit", &valid], 2),
        (vec!["submit", &missing], 1),
        (vec!["submit", &valid, "--service-url", "http://127.0.0.1:1", "--credential", "t"], 1),
        (vec!["attest", "MR-2025-2222222222-2", "--confirm"], 2),
        (vec!["verify-stamp", "mrs1.x.y"], 2),
        (vec!["no-such-command"], 2),
    ];
    let rows = table.len();
    for (args, code) in table {
        expect(&args, code)?;
    }
    let (_, out) = run(&["validate", &missing]);
    ensure!(out.lines().count() == 1, "missing legal_name printed {out:?}");

    // Stamp verification against the shared vectors.
    let file = vectors_path();
    let generated = serde_json::to_string_pretty(&vectors()).unwrap() + "\n";
    match std::fs::read_to_string(&file) {
        Ok(on_disk) if on_disk == generated => {}
        Ok(_) if std::env::var_os("MR_UPDATE_VECTORS").is_none() => {
            return Err(format!("{} is stale; rerun with MR_UPDATE_VECTORS=1", file.display()))
        }
        _ => std::fs::write(&file, &generated).map_err(|e| e.to_string())?,
    }
    let doc: Value = serde_json::from_str(&generated).unwrap();
    let key = dir.join("key.pem");
    std::fs::write(&key, doc["verification_key_pem"].as_str().unwrap()).unwrap();
    let key = key.display().to_string();
    for v in doc["vectors"].as_array().unwrap() {
        let expected = v["expected_verdict"].as_str().unwrap();
        let now = v["now"].to_string();
        let out = expect(
            &["--json", "verify-stamp", v["token"].as_str().unwrap(), "--key", &key, "--at", &now],
            if expected == "Valid" { 0 } else { 1 },
        )?;
        let verdict: Value = serde_json::from_str(&out).map_err(|e| e.to_string())?;
        ensure!(verdict["verdict"] == expected, "vector {}: got {}", v["name"], verdict["verdict"]);
    }
    expect(&["verify-stamp", "anything", "--key", "/nonexistent.pem"], 2)?;
    Ok(rows + doc["vectors"].as_array().unwrap().len())
}

fn random_metrics(rng: &mut StdRng) -> CapabilityMetrics {
    // Half the draws sit within a factor of ten of some threshold.
    let near = |rng: &mut StdRng, anchor: f64| if rng.gen() { anchor * 10f64.powf(rng.gen_range(-1.0..1.0)) } else { 10f64.powf(rng.gen_range(0.0..16.0)) };
    let total = near(rng, 1e12) as u64;
    CapabilityMetrics {
        total_parameters: total,
        active_parameters_avg: (total as f64 * rng.gen_range(0.0..=1.0)) as u64,
        training_flop: if rng.gen() { 1e26 * 10f64.powf(rng.gen_range(-1.0..1.0)) } else { 10f64.powf(rng.gen_range(18.0..24.0)) },
        post_training_flop: if rng.gen() { 0.0 } else { 10f64.powf(rng.gen_range(18.0..25.0)) },
        training_tokens: near(rng, 1e14) as u64,
    }
}

pub fn contract() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let rows = exit_codes(dir.path())?;
    let mut rng = StdRng::seed_from_u64(0xc11);
    let config = default_thresholds();
    let mut qualifying = 0;
    for n in 0..RANDOM_METRIC_FILES {
        let metrics = random_metrics(&mut rng);
        let path: PathBuf = dir.path().join(format!("metrics-{n}.json"));
        std::fs::write(&path, serde_json::to_string(&metrics).unwrap()).unwrap();
        let (code, out) = run(&["--json", "qualify", &path.display().to_string()]);
        let engine = evaluate_qualification(&metrics, &HighRiskProfile::none(), &config);
        let printed: Value = serde_json::from_str(&out).map_err(|e| format!("file {n}: {e}: {out}"))?;
        ensure!(
            code == if engine.qualifies { 0 } else { 3 } && printed == serde_json::to_value(&engine).unwrap(),
            "file {n}: cli exit {code} / {printed}, engine {engine:?}"
        );
        qualifying += usize::from(engine.qualifies);
    }
    ensure!(qualifying > 0 && qualifying < RANDOM_METRIC_FILES, "random files never split: {qualifying} qualify");
    Ok(format!(
        "{rows} exit-code and stamp-vector rows, {RANDOM_METRIC_FILES} random metric files agree with the engine ({qualifying} qualify)"
    ))
}
