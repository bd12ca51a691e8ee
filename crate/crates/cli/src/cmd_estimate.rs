//! `porss estimate`: one full design pass over an empirical CSV population.
//!
//! Draws m*K rows without replacement from the dataset (seeded), groups them
//! into K sets of size m, builds the requested stratified design, samples it,
//! and prints the estimate report as JSON. The same seed reproduces the same
//! bytes.

use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use porss::dataset::{validate_csv_file, SchemaSpec};
use porss::designs::{
    allocate_proportional, build_cpor, build_mvsr, build_rpor, compute_set_heights,
    draw_stratified_sample, Allocation, DesignConfig, DesignKind, HeightPolicy,
};
use porss::estimators::{estimate_cpor, estimate_mvsr, estimate_rpor, EstimateReport};
use porss::poset::SetOfElements;
use porss::rng::{tag, StreamRng};

use crate::common::{resolve_flips, CliError};

#[derive(Args)]
pub struct EstimateArgs {
    /// CSV dataset with a header row
    data: PathBuf,
    /// Design to run: mvsr, cpor or rpor
    #[arg(long)]
    design: String,
    /// Set size
    #[arg(long)]
    m: usize,
    /// Number of sets
    #[arg(long)]
    k: usize,
    /// Per-stratum sample size (CPOR spreads the total n*m proportionally)
    #[arg(long)]
    n: usize,
    /// Ranking column names (comma separated)
    #[arg(long, value_delimiter = ',', required = true)]
    ranking: Vec<String>,
    /// Target column names (comma separated)
    #[arg(long, value_delimiter = ',', required = true)]
    target: Vec<String>,
    /// Seed; required, there is no default
    #[arg(long)]
    seed: u64,
    /// Sign flips: "none", "auto", or comma-separated variable indices
    #[arg(long)]
    flips: Option<String>,
    /// Write the JSON report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct EstimateArtifact {
    version: String,
    command: String,
    data: String,
    design: DesignKind,
    m: usize,
    k: usize,
    n: usize,
    seed: u64,
    ranking_columns: Vec<String>,
    target_columns: Vec<String>,
    sign_flips: Vec<bool>,
    variables: Vec<VariableOut>,
    sample_sizes: Vec<usize>,
    stratum_sizes: Vec<usize>,
    conservative_variance: bool,
    warnings: Vec<String>,
    notes: Vec<String>,
}

#[derive(Serialize)]
struct VariableOut {
    column: String,
    mu_hat: f64,
    var_hat: Option<f64>,
}

pub fn run(args: EstimateArgs) -> Result<(), CliError> {
    let design = match args.design.to_ascii_lowercase().as_str() {
        "mvsr" => DesignKind::Mvsr,
        "cpor" => DesignKind::Cpor,
        "rpor" => DesignKind::Rpor,
        other => {
            return Err(CliError::usage(format!(
                "unknown design {other:?}; expected mvsr, cpor or rpor"
            )))
        }
    };
    let spec = SchemaSpec {
        ranking: args.ranking.clone(),
        target: args.target.clone(),
    };
    let (dataset, _schema) =
        validate_csv_file(&args.data, &spec).map_err(|e| CliError::data(e.to_string()))?;

    let needed = args.m * args.k;
    if dataset.rows.len() < needed {
        return Err(CliError::data(format!(
            "{} has {} rows; one build with m={} K={} needs at least {needed}",
            args.data.display(),
            dataset.rows.len(),
            args.m,
            args.k
        )));
    }

    // Variables: ranking columns first, then unseen target columns.
    let mut variables: Vec<String> = Vec::new();
    for name in args.ranking.iter().chain(&args.target) {
        if !variables.contains(name) {
            variables.push(name.clone());
        }
    }
    let source_idx: Vec<usize> = variables
        .iter()
        .map(|v| dataset.column_index(v).expect("validated"))
        .collect();
    let projected: Vec<Vec<f64>> = dataset
        .rows
        .iter()
        .map(|row| source_idx.iter().map(|&i| row[i]).collect())
        .collect();
    let ranking_columns: Vec<usize> = args
        .ranking
        .iter()
        .map(|c| variables.iter().position(|v| v == c).expect("validated"))
        .collect();
    let target_columns: Vec<usize> = args
        .target
        .iter()
        .map(|c| variables.iter().position(|v| v == c).expect("validated"))
        .collect();
    if design == DesignKind::Mvsr && ranking_columns.len() != 1 {
        return Err(CliError::usage(format!(
            "MVSR ranks on exactly one column; got {}",
            ranking_columns.len()
        )));
    }
    let mask = resolve_flips(args.flips.as_deref(), &projected, variables.len())?;

    // Seeded draw of m*K rows without replacement, grouped into K sets.
    let mut indices: Vec<usize> = (0..projected.len()).collect();
    let mut rng = StreamRng::substream(args.seed, &[tag::PARTITION]);
    rng.partial_shuffle(&mut indices, needed);
    let sets: Vec<SetOfElements> = indices[..needed]
        .chunks(args.m)
        .map(|chunk| {
            SetOfElements::from_rows(chunk.iter().map(|&i| projected[i].clone()).collect())
        })
        .collect::<Result<_, _>>()
        .map_err(CliError::from)?;

    let cfg = DesignConfig {
        m: args.m,
        replications: args.k,
        per_stratum_n: args.n,
        design,
        ranking_columns,
        target_columns,
        sign_flips: mask.clone(),
        seed: StreamRng::derive_seed(args.seed, &[tag::BUILD]),
    };
    let sample_seed = StreamRng::derive_seed(args.seed, &[tag::SAMPLE]);
    let mut notes = vec![format!(
        "rows drawn without replacement from {} of {} dataset rows",
        needed,
        projected.len()
    )];
    let (report, alloc, sizes): (EstimateReport, Allocation, Vec<usize>) = match design {
        DesignKind::Mvsr => {
            let pop = build_mvsr(&sets, &cfg)?;
            let alloc = Allocation::uniform(args.m, args.n);
            let samples = draw_stratified_sample(&pop, &alloc, sample_seed)?;
            let sizes = pop.stratum_sizes();
            (estimate_mvsr(&pop, &samples)?, alloc, sizes)
        }
        DesignKind::Cpor => {
            let policy = HeightPolicy::default();
            let heights = compute_set_heights(&sets, &cfg, &policy)?;
            notes.push(format!(
                "mean heights computed exactly for {} of {} sets",
                heights.iter().filter(|h| h.exact).count(),
                heights.len()
            ));
            let pop = build_cpor(&sets, &cfg, &heights)?;
            let alloc = allocate_proportional(&pop.stratum_sizes(), args.n * args.m)?;
            let samples = draw_stratified_sample(&pop, &alloc, sample_seed)?;
            let sizes = pop.stratum_sizes();
            (estimate_cpor(&pop, &samples, &alloc)?, alloc, sizes)
        }
        DesignKind::Rpor => {
            let pop = build_rpor(&sets, &cfg)?;
            let alloc = Allocation::uniform(args.m, args.n);
            let samples = draw_stratified_sample(&pop, &alloc, sample_seed)?;
            let sizes = pop.stratum_sizes();
            (estimate_rpor(&pop, &samples)?, alloc, sizes)
        }
    };

    let artifact = EstimateArtifact {
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: "estimate".into(),
        data: args.data.display().to_string(),
        design,
        m: args.m,
        k: args.k,
        n: args.n,
        seed: args.seed,
        ranking_columns: args.ranking,
        target_columns: args.target.clone(),
        sign_flips: mask.flips().to_vec(),
        variables: report
            .estimates
            .iter()
            .map(|e| VariableOut {
                column: variables[e.column].clone(),
                mu_hat: e.mu_hat,
                var_hat: e.var_hat,
            })
            .collect(),
        sample_sizes: alloc.per_stratum.clone(),
        stratum_sizes: sizes,
        conservative_variance: report.conservative_variance,
        warnings: report.warnings.iter().map(|w| w.to_string()).collect(),
        notes,
    };
    let text = serde_json::to_string_pretty(&artifact).expect("artifact serializes");
    match &args.out {
        Some(path) => std::fs::write(path, text.as_bytes())
            .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?,
        None => println!("{text}"),
    }
    Ok(())
}
