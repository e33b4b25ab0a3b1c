//! The subcommands: each parses its inputs, drives the library, and renders
//! deterministic text or JSON. Every function returns the rendered output
//! with a flag marking runs whose checks did not pass.

use std::fmt::Write as _;

use fatpoint::cremona::{
    classify, log_to_json, reduce_to_standard, render_reduction_table, shgh_dim,
    ClassificationKind, CremonaError, DimStatus, DEFAULT_NEG_CLASS_BOUND,
};
use fatpoint::degeneration::{
    build_stage, fiber_to_json, render_fiber, scan_range, validate, DegenerationError, Regime,
    ScanOutcome, ScanRow,
};
use fatpoint::lattice::{
    class_to_json, enumerate_negative_classes, Configuration, DivisorClass, LatticeError,
    SelfIntTarget,
};
use fatpoint::oracle::{
    cached_generic_dim, CertStatus, OracleError, OracleOptions, DEFAULT_PRIME, SECOND_PRIME,
};
use fatpoint::Int;
use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde_json::json;

use crate::grammar::{self, ParsedSystem};
use crate::verify::{self, VerifyLevel};
use crate::{CliError, CmdOutput, OutputFormat, RunConfig};

/// Largest oracle matrix width accepted without `--long`.
pub const INTERACTIVE_COLUMN_BUDGET: i64 = 5000;

fn cremona_failed(e: CremonaError) -> CliError {
    CliError::Failed(e.to_string())
}

fn degen_failed(e: DegenerationError) -> CliError {
    CliError::Failed(e.to_string())
}

fn lattice_failed(e: LatticeError) -> CliError {
    CliError::Failed(e.to_string())
}

fn oracle_error(e: OracleError) -> CliError {
    match e {
        OracleError::NotPrime { .. } | OracleError::FieldTooSmall { .. } => {
            CliError::Usage(e.to_string())
        }
        OracleError::ScaleOverflow { .. } => CliError::Refusal(e.to_string()),
        other => CliError::Failed(other.to_string()),
    }
}

fn render_json(value: &serde_json::Value) -> String {
    serde_json::to_string_pretty(value).expect("composed values serialize")
}

fn int_json(value: &Int) -> serde_json::Value {
    value
        .to_i64()
        .map(|v| json!(v))
        .unwrap_or_else(|| json!(value.to_string()))
}

fn kind_name(kind: ClassificationKind) -> &'static str {
    match kind {
        ClassificationKind::Empty => "EMPTY",
        ClassificationKind::Standard => "STANDARD",
        ClassificationKind::CremonaReducible => "CREMONA-REDUCIBLE",
        ClassificationKind::MinusOneSpecial => "MINUS-ONE-SPECIAL",
        ClassificationKind::Excellent => "EXCELLENT",
        ClassificationKind::AlmostExcellent => "ALMOST-EXCELLENT",
    }
}

fn regime_name(regime: Regime) -> &'static str {
    match regime {
        Regime::KnownEmpty => "known-empty",
        Regime::OpenWindow => "open-window",
        Regime::FourthKind => "fourth-kind",
        Regime::ThirdKind => "third-kind",
        Regime::SecondKind => "second-kind",
        Regime::FirstKind => "first-kind",
    }
}

/// Classification kind under the run's negative-class search bound; at the
/// default bound this is exactly `classify`.
fn classify_kind(
    class: &DivisorClass<Int>,
    cfg: &Configuration,
    bound: i64,
) -> Result<&'static str, CliError> {
    if bound == DEFAULT_NEG_CLASS_BOUND {
        return Ok(kind_name(classify(class, cfg).map_err(cremona_failed)?.kind));
    }
    let reduction = reduce_to_standard(class, cfg).map_err(cremona_failed)?;
    let report = enumerate_negative_classes(cfg, class, bound, SelfIntTarget::MinusOne)
        .map_err(lattice_failed)?;
    let special = report
        .classes
        .iter()
        .any(|e| e.pairing_with_input <= Int::from(-2));
    let kind = match reduction.standard_form() {
        None => ClassificationKind::Empty,
        Some(form) => {
            let excess = Int::from(3) * form.degree() - form.mult_sum();
            if special {
                ClassificationKind::MinusOneSpecial
            } else if excess > Int::from(0) {
                ClassificationKind::Excellent
            } else if excess == Int::from(0) {
                ClassificationKind::AlmostExcellent
            } else if reduction.log.transform_count() == 0 {
                ClassificationKind::Standard
            } else {
                ClassificationKind::CremonaReducible
            }
        }
    };
    Ok(kind_name(kind))
}

/// Dimension, status, classification, and reduction table of a system.
pub fn cmd_dim(spec: &str, config: &RunConfig) -> Result<CmdOutput, CliError> {
    let ParsedSystem { class, cfg } = grammar::parse_system(spec)?;
    let result = shgh_dim(&class, &cfg).map_err(cremona_failed)?;
    let kind = classify_kind(&class, &cfg, config.degree_bound)?;
    let status = match result.status {
        DimStatus::Proven => "PROVEN",
        DimStatus::Conjectural => "CONJECTURAL",
    };
    let table = render_reduction_table(&result.log, &cfg);
    let text = match config.format {
        OutputFormat::Text => {
            let mut text = String::new();
            let _ = writeln!(text, "system: {}", grammar::render_system(&class, &cfg));
            let _ = writeln!(text, "dim: {}", result.dim);
            let _ = writeln!(text, "status: {status}");
            let _ = writeln!(text, "kind: {kind}");
            let _ = writeln!(text, "reduction:");
            text.push_str(&table);
            text
        }
        OutputFormat::Json => render_json(&json!({
            "system": class_to_json(&class, &cfg).map_err(lattice_failed)?,
            "dim": int_json(&result.dim),
            "status": status,
            "kind": kind,
            "reduction": log_to_json(&result.log, &cfg).map_err(cremona_failed)?,
        })),
    };
    Ok(CmdOutput::ok(text))
}

/// Reduction table of a system, exactly as the canonical renderer emits it.
pub fn cmd_reduce(spec: &str, config: &RunConfig) -> Result<CmdOutput, CliError> {
    let ParsedSystem { class, cfg } = grammar::parse_system(spec)?;
    let reduction = reduce_to_standard(&class, &cfg).map_err(cremona_failed)?;
    let table = render_reduction_table(&reduction.log, &cfg);
    let text = match config.format {
        OutputFormat::Text => table,
        OutputFormat::Json => render_json(&json!({
            "system": class_to_json(&class, &cfg).map_err(lattice_failed)?,
            "rows": table.lines().collect::<Vec<_>>(),
            "empty": reduction.is_empty(),
            "log": log_to_json(&reduction.log, &cfg).map_err(cremona_failed)?,
        })),
    };
    Ok(CmdOutput::ok(text))
}

/// Fallback prime for the certification retry, distinct from the primary.
pub fn companion_prime(primary: u32) -> u32 {
    if primary == SECOND_PRIME {
        DEFAULT_PRIME
    } else {
        SECOND_PRIME
    }
}

/// Certified dimension of a system by prime-field rank, with its witness.
pub fn cmd_oracle(spec: &str, config: &RunConfig) -> Result<CmdOutput, CliError> {
    let ParsedSystem { class, cfg } = grammar::parse_system(spec)?;
    let columns = class
        .degree()
        .to_i64()
        .filter(|d| *d < 3_037_000_000)
        .map(|d| if d < 0 { 0 } else { (d + 1) * (d + 2) / 2 })
        .ok_or_else(|| CliError::Refusal("the degree exceeds every feasible matrix size".into()))?;
    if columns > INTERACTIVE_COLUMN_BUDGET && !config.long {
        return Err(CliError::Refusal(format!(
            "{columns} columns exceed the interactive budget of {INTERACTIVE_COLUMN_BUDGET}; rerun with --long"
        )));
    }
    let options = OracleOptions {
        p: config.prime,
        trials: config.trials,
        seed: config.seed,
    };
    let cert = cached_generic_dim(&class, &cfg, &options, config.cache_dir.as_deref())
        .map_err(oracle_error)?;
    let result = &cert.result;
    let text = match config.format {
        OutputFormat::Text => {
            let mut text = String::new();
            let _ = writeln!(text, "system: {}", grammar::render_system(&class, &cfg));
            let _ = writeln!(text, "dim: {}", result.dim);
            let _ = writeln!(text, "status: {}", result.status.as_str());
            let _ = writeln!(text, "prime: {}", result.witness.p);
            let _ = writeln!(text, "seed: {}", result.witness.seed);
            let _ = writeln!(text, "rank: {}", result.witness.rank);
            let _ = writeln!(text, "trials: {}", result.trials_used);
            let _ = write!(
                text,
                "witness: {}",
                cert.witness_path
                    .as_ref()
                    .map(|p| p.display().to_string())
                    .unwrap_or_else(|| "(not cached)".into())
            );
            text
        }
        OutputFormat::Json => render_json(&json!({
            "system": class_to_json(&class, &cfg).map_err(lattice_failed)?,
            "dim": result.dim,
            "status": result.status.as_str(),
            "prime": result.witness.p,
            "seed": result.witness.seed,
            "rank": result.witness.rank,
            "trials": result.trials_used,
            "witness_path": cert.witness_path.as_ref().map(|p| p.display().to_string()),
        })),
    };
    Ok(CmdOutput {
        text,
        failed: result.status == CertStatus::Inconclusive,
    })
}

/// Builds one stage of the scripted degeneration, validates it, and prints
/// the fiber.
pub fn cmd_degen(
    d: i64,
    m: i64,
    a: i64,
    stage: u8,
    config: &RunConfig,
) -> Result<CmdOutput, CliError> {
    let fiber =
        build_stage::<Int>(stage, Int::from(d), Int::from(m), Int::from(a)).map_err(degen_failed)?;
    let report = validate(&fiber).map_err(degen_failed)?;
    let passed = report.passed();
    let text = match config.format {
        OutputFormat::Text => {
            let mut text = render_fiber(&fiber).map_err(degen_failed)?;
            let _ = writeln!(text);
            let _ = write!(text, "{report}");
            let _ = write!(text, "validation: {}", if passed { "PASS" } else { "FAIL" });
            text
        }
        OutputFormat::Json => render_json(&json!({
            "fiber": fiber_to_json(&fiber).map_err(degen_failed)?,
            "validation": {
                "passed": passed,
                "checks": report
                    .checks
                    .iter()
                    .map(|c| json!({"name": c.name, "passed": c.passed, "detail": c.detail}))
                    .collect::<Vec<_>>(),
            },
        })),
    };
    Ok(CmdOutput {
        text,
        failed: !passed,
    })
}

/// Runs the window sweep, chunking the multiplicity range over worker
/// threads when more than one job is allowed; the row order is independent
/// of the parallelism.
pub(crate) fn scan_rows(
    m_max: i64,
    lo: (i64, i64),
    hi: (i64, i64),
    jobs: usize,
) -> Result<Vec<ScanRow>, CliError> {
    if jobs <= 1 || m_max < 4 {
        return scan_range(lo, hi, 1, m_max).map_err(degen_failed);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Failed(e.to_string()))?;
    let chunk = (m_max / (4 * jobs as i64)).max(1);
    let starts: Vec<i64> = (1..=m_max).step_by(chunk as usize).collect();
    let chunks = pool.install(|| {
        starts
            .par_iter()
            .map(|&m_lo| scan_range(lo, hi, m_lo, (m_lo + chunk - 1).min(m_max)))
            .collect::<Result<Vec<_>, _>>()
    });
    Ok(chunks.map_err(degen_failed)?.into_iter().flatten().collect())
}

fn outcome_text(outcome: &ScanOutcome) -> String {
    match outcome {
        ScanOutcome::Pass { detail } => format!("pass ({detail})"),
        ScanOutcome::SettledPreviously { note } => format!("settled ({note})"),
        ScanOutcome::Exceptional { note } => format!("exceptional ({note})"),
        ScanOutcome::Open => "open".into(),
    }
}

fn outcome_json(outcome: &ScanOutcome) -> serde_json::Value {
    match outcome {
        ScanOutcome::Pass { detail } => json!({"kind": "pass", "detail": detail}),
        ScanOutcome::SettledPreviously { note } => json!({"kind": "settled", "note": note}),
        ScanOutcome::Exceptional { note } => json!({"kind": "exceptional", "note": note}),
        ScanOutcome::Open => json!({"kind": "open"}),
    }
}

/// Sweeps every `(d, m)` with `m <= m_max` and `lo <= d/m <= hi` through
/// the regime pipeline and summarizes the outcomes.
pub fn cmd_scan(
    m_max: i64,
    lo: (i64, i64),
    hi: (i64, i64),
    config: &RunConfig,
) -> Result<CmdOutput, CliError> {
    if m_max < 1 {
        return Err(CliError::Usage("m-max must be at least 1".into()));
    }
    if lo.0 * hi.1 > hi.0 * lo.1 {
        return Err(CliError::Usage("the lower ratio exceeds the upper ratio".into()));
    }
    let rows = scan_rows(m_max, lo, hi, config.jobs)?;
    let count = |want: fn(&ScanOutcome) -> bool| rows.iter().filter(|r| want(&r.outcome)).count();
    let passes = count(|o| matches!(o, ScanOutcome::Pass { .. }));
    let settled = count(|o| matches!(o, ScanOutcome::SettledPreviously { .. }));
    let open = count(|o| matches!(o, ScanOutcome::Open));
    let exceptions: Vec<&ScanRow> = rows
        .iter()
        .filter(|r| matches!(r.outcome, ScanOutcome::Exceptional { .. }))
        .collect();
    let text = match config.format {
        OutputFormat::Text => {
            let mut text = String::new();
            for row in &rows {
                let _ = writeln!(
                    text,
                    "d={} m={} {}: {}",
                    row.d,
                    row.m,
                    regime_name(row.regime),
                    outcome_text(&row.outcome)
                );
            }
            let _ = write!(
                text,
                "rows: {}  pass: {passes}  settled: {settled}  exceptional: {}  open: {open}",
                rows.len(),
                exceptions.len()
            );
            if !exceptions.is_empty() {
                let listed: Vec<String> = exceptions
                    .iter()
                    .map(|r| format!("d={} m={}", r.d, r.m))
                    .collect();
                let _ = write!(text, "\nexceptions: {}", listed.join("; "));
            }
            text
        }
        OutputFormat::Json => render_json(&json!({
            "rows": rows
                .iter()
                .map(|r| json!({
                    "d": r.d,
                    "m": r.m,
                    "regime": regime_name(r.regime),
                    "outcome": outcome_json(&r.outcome),
                }))
                .collect::<Vec<_>>(),
            "counts": {
                "rows": rows.len(),
                "pass": passes,
                "settled": settled,
                "exceptional": exceptions.len(),
                "open": open,
            },
            "exceptions": exceptions.iter().map(|r| json!([r.d, r.m])).collect::<Vec<_>>(),
        })),
    };
    Ok(CmdOutput::ok(text))
}

/// Runs the pinned verification suite and reports one line per criterion.
pub fn cmd_verify_paper(level: VerifyLevel, config: &RunConfig) -> Result<CmdOutput, CliError> {
    let results = verify::run_suite(level, config);
    let passed = results.iter().all(|r| r.passed);
    let text = match config.format {
        OutputFormat::Text => {
            let mut text = String::new();
            for r in &results {
                let _ = writeln!(
                    text,
                    "criterion {} ({}): {} ({})",
                    r.index,
                    r.name,
                    if r.passed { "PASS" } else { "FAIL" },
                    r.detail
                );
            }
            let _ = write!(
                text,
                "verify-paper [{level}]: {}",
                if passed { "PASS" } else { "FAIL" }
            );
            text
        }
        OutputFormat::Json => render_json(&json!({
            "level": level.to_string(),
            "criteria": results
                .iter()
                .map(|r| json!({
                    "index": r.index,
                    "name": r.name,
                    "passed": r.passed,
                    "detail": r.detail,
                }))
                .collect::<Vec<_>>(),
            "passed": passed,
        })),
    };
    Ok(CmdOutput {
        text,
        failed: !passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::parse_system;
    use fatpoint::lattice::class_from_json;

    fn test_config(dir: &std::path::Path) -> RunConfig {
        RunConfig {
            cache_dir: Some(dir.to_path_buf()),
            ..RunConfig::default()
        }
    }

    #[test]
    fn dim_reports_the_three_reference_systems() {
        let dir = tempfile::tempdir().unwrap();
        let config = test_config(dir.path());
        let out = cmd_dim("174; 55^10", &config).unwrap();
        assert!(out.text.contains("dim: -1"));
        assert!(out.text.contains("status: CONJECTURAL"));
        let out = cmd_dim("2; 2^2", &config).unwrap();
        assert!(out.text.contains("dim: 0"));
        assert!(out.text.contains("status: PROVEN"));
        let out = cmd_dim("3; 1^9", &config).unwrap();
        assert!(out.text.contains("dim: 0"));
        assert!(out.text.contains("status: PROVEN"));
    }

    #[test]
    fn reduce_prints_a_single_row_for_standard_input() {
        let dir = tempfile::tempdir().unwrap();
        let config = test_config(dir.path());
        let out = cmd_reduce("174; 55^10", &config).unwrap();
        assert_eq!(out.text, "174; 55^10");
    }

    #[test]
    fn reduce_handles_the_clustered_example() {
        let dir = tempfile::tempdir().unwrap();
        let config = test_config(dir.path());
        let out = cmd_reduce("24; 11^4,[4,4]^2", &config).unwrap();
        assert!(out.text.ends_with("7; 2^3, 3"));
        assert_eq!(out.text.lines().count(), 4);
    }

    #[test]
    fn oracle_refuses_wide_systems_without_long() {
        let dir = tempfile::tempdir().unwrap();
        let config = test_config(dir.path());
        let err = cmd_oracle("99; 1", &config).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(err.to_string().contains("--long"));
        let long = RunConfig {
            long: true,
            ..test_config(dir.path())
        };
        let out = cmd_oracle("99; 1", &long).unwrap();
        assert!(out.text.contains("dim: 5048"));
    }

    #[test]
    fn oracle_reports_the_upper_bound_example_and_caches() {
        let dir = tempfile::tempdir().unwrap();
        let config = test_config(dir.path());
        let first = cmd_oracle("4; 2^5", &config).unwrap();
        assert!(first.text.contains("dim: 0"));
        assert!(first.text.contains("status: UPPER-BOUND-ONLY"));
        assert!(!first.failed);
        let second = cmd_oracle("4; 2^5", &config).unwrap();
        assert_eq!(first.text, second.text);
    }

    #[test]
    fn degen_reports_component_counts() {
        let dir = tempfile::tempdir().unwrap();
        let config = RunConfig {
            format: OutputFormat::Json,
            ..test_config(dir.path())
        };
        let out = cmd_degen(100, 30, 0, 1, &config).unwrap();
        let value: serde_json::Value = serde_json::from_str(&out.text).unwrap();
        assert_eq!(value["fiber"]["components"].as_array().unwrap().len(), 2);
        assert_eq!(value["validation"]["passed"], serde_json::json!(true));
        let out = cmd_degen(174, 55, 6, 3, &config).unwrap();
        let value: serde_json::Value = serde_json::from_str(&out.text).unwrap();
        assert_eq!(value["fiber"]["components"].as_array().unwrap().len(), 5);
    }

    #[test]
    fn degen_names_the_violated_hypothesis() {
        let dir = tempfile::tempdir().unwrap();
        let config = test_config(dir.path());
        let err = cmd_degen(100, 30, 0, 4, &config).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().contains("hypothesis"));
        assert!(err.to_string().contains("3d < 10m"));
    }

    #[test]
    fn custom_bound_classification_agrees_with_the_default() {
        let dir = tempfile::tempdir().unwrap();
        let config = test_config(dir.path());
        for d in 1i64..=5 {
            for k in 2usize..=4 {
                for m in 1i64..=3 {
                    let spec = format!("{d}; {m}^{k}");
                    let parsed = parse_system(&spec).unwrap();
                    let default_kind =
                        classify_kind(&parsed.class, &parsed.cfg, config.degree_bound).unwrap();
                    let replica_kind = classify_kind(&parsed.class, &parsed.cfg, 6).unwrap();
                    assert_eq!(default_kind, replica_kind, "kinds diverged on {spec}");
                }
            }
        }
    }

    #[test]
    fn dim_json_round_trips_through_the_library_parser() {
        let dir = tempfile::tempdir().unwrap();
        let config = RunConfig {
            format: OutputFormat::Json,
            ..test_config(dir.path())
        };
        let out = cmd_dim("24; 11^4,[4,4]^2", &config).unwrap();
        let value: serde_json::Value = serde_json::from_str(&out.text).unwrap();
        let (cfg, class) = class_from_json::<Int>(&value["system"]).unwrap();
        let parsed = parse_system("24; 11^4,[4,4]^2").unwrap();
        assert_eq!(cfg, parsed.cfg);
        assert_eq!(class, parsed.class);
    }

    #[test]
    fn scan_rows_are_independent_of_the_job_count() {
        let serial = scan_rows(40, (174, 55), (19, 6), 1).unwrap();
        let parallel = scan_rows(40, (174, 55), (19, 6), 3).unwrap();
        assert_eq!(serial, parallel);
        assert!(!serial.is_empty());
    }

    #[test]
    fn run_config_validation_rejects_degenerate_settings() {
        let zero_trials = RunConfig {
            trials: 0,
            ..RunConfig::default()
        };
        assert_eq!(zero_trials.validated().unwrap_err().exit_code(), 2);
        let zero_jobs = RunConfig {
            jobs: 0,
            ..RunConfig::default()
        };
        assert_eq!(zero_jobs.validated().unwrap_err().exit_code(), 2);
    }
}
