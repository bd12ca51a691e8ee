//! `porss simulate`: run a seeded Monte Carlo efficiency study.
//!
//! The config file holds one plan, a `{"plans": [...]}` wrapper, or a bare
//! JSON array of plans. A previously written run artifact also works as a
//! config (it carries `plans`), which makes any run replayable. Table files
//! are byte-deterministic for a given config; `--threads` changes wall time
//! only.

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use porss::sim::{
    emit_paper_layout, emit_table, run_plan, EfficiencyTable, SimulationPlan, TableFormat,
};

use crate::common::CliError;

#[derive(Args)]
pub struct SimulateArgs {
    /// JSON plan, plan list, or a previous run artifact
    config: PathBuf,
    /// Output directory for tables and the run artifact
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Worker threads (default: all cores); never changes output bytes
    #[arg(long)]
    threads: Option<usize>,
    /// Override the iteration count of every plan (smoke runs)
    #[arg(long)]
    iterations: Option<u64>,
    /// Which table formats to write
    #[arg(long, value_enum, default_value_t = FormatArg::Both)]
    format: FormatArg,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Md,
    Both,
}

/// Everything needed to rerun and audit a simulate invocation. Timing is
/// metadata; the table files are the deterministic outputs.
#[derive(Serialize)]
struct RunArtifact<'a> {
    version: String,
    command: String,
    plans: &'a [SimulationPlan],
    threads: Option<usize>,
    tables: &'a [EfficiencyTable],
    outputs: Vec<String>,
    notes: Vec<String>,
    timing_ms: u128,
}

/// Internally-tagged enums buffer their content, which makes path tracking
/// stop at the `model` field. When that happens, re-deserialize the model
/// subtree against the concrete shape for its `kind` to recover the inner
/// field path.
fn refine_model_path(value: &serde_json::Value, path: &str) -> Option<String> {
    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    #[allow(dead_code)]
    struct BivariateShadow {
        kind: String,
        mean: [f64; 2],
        sd: [f64; 2],
        rho: f64,
    }
    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    #[allow(dead_code)]
    struct LinkedShadow {
        kind: String,
        base_mean: f64,
        base_sd: f64,
        linked: Vec<porss::sim::LinkedVariable>,
    }
    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    #[allow(dead_code)]
    struct EmpiricalShadow {
        kind: String,
        path: String,
        ranking_columns: Vec<String>,
        target_columns: Vec<String>,
    }
    let model = path
        .split('.')
        .try_fold(value, |v, seg| match seg.split_once('[') {
            Some((name, idx)) => v
                .get(name)
                .and_then(|v| v.get(idx.trim_end_matches(']').parse::<usize>().ok()?)),
            None => v.get(seg),
        })?;
    let kind = model.get("kind")?.as_str()?;
    let inner = match kind {
        "bivariate_normal" => {
            serde_path_to_error::deserialize::<_, BivariateShadow>(model.clone()).err()
        }
        "regression_linked" => {
            serde_path_to_error::deserialize::<_, LinkedShadow>(model.clone()).err()
        }
        "empirical_csv" => {
            serde_path_to_error::deserialize::<_, EmpiricalShadow>(model.clone()).err()
        }
        _ => None,
    }?;
    Some(format!("{path}.{}: {}", inner.path(), inner.inner()))
}

fn parse_config(text: &str, origin: &str) -> Result<Vec<SimulationPlan>, CliError> {
    // Accepted shapes: a bare plan list, a {"plans": [...]} wrapper (run
    // artifacts have this shape), or a single plan object. Classify first,
    // then deserialize with field-path errors.
    let value: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| CliError::usage(format!("{origin}: invalid JSON: {e}")))?;
    let report = |err: serde_path_to_error::Error<serde_json::Error>| {
        let path = err.path().to_string();
        if path == "model" || path.ends_with(".model") {
            if let Some(refined) = refine_model_path(&value, &path) {
                return CliError::usage(format!("{origin}: at {refined}"));
            }
        }
        CliError::usage(format!("{origin}: at {path}: {}", err.inner()))
    };
    let plans = if value.is_array() {
        let de = value.clone();
        serde_path_to_error::deserialize::<_, Vec<SimulationPlan>>(de).map_err(report)?
    } else if value.get("plans").is_some() {
        #[derive(Deserialize)]
        struct Wrapper {
            plans: Vec<SimulationPlan>,
        }
        serde_path_to_error::deserialize::<_, Wrapper>(value.clone())
            .map_err(report)?
            .plans
    } else {
        vec![serde_path_to_error::deserialize::<_, SimulationPlan>(value.clone()).map_err(report)?]
    };
    if plans.is_empty() {
        return Err(CliError::usage(format!("{origin}: no plans to run")));
    }
    Ok(plans)
}

fn label_slug(plan: &SimulationPlan, index: usize) -> String {
    let base = plan
        .label
        .clone()
        .unwrap_or_else(|| format!("plan{:02}", index + 1));
    let slug: String = base
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("{:02}_{slug}", index + 1)
}

pub fn run(args: SimulateArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::data(format!("{}: {e}", args.config.display())))?;
    let mut plans = parse_config(&text, &args.config.display().to_string())?;
    if let Some(iterations) = args.iterations {
        for plan in &mut plans {
            plan.iterations = iterations;
        }
    }
    for plan in &plans {
        plan.validate().map_err(CliError::from)?;
    }

    std::fs::create_dir_all(&args.out)
        .map_err(|e| CliError::data(format!("{}: {e}", args.out.display())))?;

    let started = Instant::now();
    let run_all =
        || -> Result<Vec<EfficiencyTable>, porss::Error> { plans.iter().map(run_plan).collect() };
    let tables = match args.threads {
        Some(threads) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| CliError::usage(format!("cannot build thread pool: {e}")))?;
            pool.install(run_all)
        }
        None => run_all(),
    }
    .map_err(CliError::from)?;
    let timing_ms = started.elapsed().as_millis();

    let mut outputs = Vec::new();
    let mut write = |name: String, content: &str| -> Result<(), CliError> {
        let path = args.out.join(&name);
        std::fs::write(&path, content.as_bytes())
            .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        outputs.push(name);
        Ok(())
    };
    for (i, (plan, table)) in plans.iter().zip(&tables).enumerate() {
        let stem = label_slug(plan, i);
        if args.format != FormatArg::Md {
            write(
                format!("table_{stem}.csv"),
                &emit_table(table, TableFormat::Csv),
            )?;
        }
        if args.format != FormatArg::Csv {
            write(
                format!("table_{stem}.md"),
                &emit_table(table, TableFormat::Markdown),
            )?;
        }
    }
    write("summary.md".into(), &emit_paper_layout(&tables))?;

    let mut notes: Vec<String> = Vec::new();
    for (i, table) in tables.iter().enumerate() {
        for note in &table.notes {
            notes.push(format!("plan {}: {note}", i + 1));
        }
        if table.iterations == 1 {
            notes.push(format!(
                "plan {}: single-iteration run; efficiencies are low precision",
                i + 1
            ));
        }
    }
    let artifact = RunArtifact {
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: "simulate".into(),
        plans: &plans,
        threads: args.threads,
        tables: &tables,
        outputs: outputs.clone(),
        notes,
        timing_ms,
    };
    let artifact_text = serde_json::to_string_pretty(&artifact).expect("artifact serializes");
    let artifact_path = args.out.join("run_artifact.json");
    std::fs::write(&artifact_path, artifact_text.as_bytes())
        .map_err(|e| CliError::data(format!("{}: {e}", artifact_path.display())))?;

    for (plan, table) in plans.iter().zip(&tables) {
        println!(
            "{}: {} rows, {} skipped cells, {} iterations",
            plan.label.as_deref().unwrap_or(&table.model_label),
            table.rows.len(),
            table.skipped.len(),
            table.iterations
        );
    }
    println!(
        "wrote {} file(s) + run_artifact.json to {}",
        outputs.len(),
        args.out.display()
    );
    Ok(())
}
