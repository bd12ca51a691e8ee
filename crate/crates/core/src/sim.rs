//! Population models, the Monte Carlo efficiency engine, and table emission.
//!
//! A [`SimulationPlan`] fixes a population model, a grid of (m, K, n) cells,
//! the designs to run, and a seed. [`run_plan`] replicates the full pipeline
//! (generate sets, build the stratified population, allocate, draw, estimate)
//! `iterations` times per cell and design, computes an SRS baseline with the
//! same iteration count, and reports per-variable efficiency
//! `V(srs mean) / MSE(estimator)`.
//!
//! Reproducibility: every iteration derives its own substream from
//! `(seed, cell, design, iteration)`, results are reduced in iteration order,
//! and the output is byte-identical no matter how many worker threads rayon
//! uses.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{self, SchemaSpec};
use crate::designs::{
    allocate_proportional, build_cpor, build_mvsr, build_rpor, compute_set_heights,
    draw_stratified_sample, Allocation, DesignConfig, DesignKind, HeightPolicy,
};
use crate::estimators::{estimate_cpor, estimate_mvsr, estimate_rpor, EstimateReport};
use crate::poset::{pairwise_correlations, suggest_sign_flips, SetOfElements, SignFlipMask};
use crate::rng::{tag, StreamRng};
use crate::{Error, Result};

/// A variable linked to the base variable by linear regression:
/// `X_j = mean + rho * (sd / base_sd) * (X_1 - base_mean) + noise`, with the
/// noise variance `sd^2 (1 - rho^2)` keeping `sd` the marginal scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkedVariable {
    pub mean: f64,
    pub sd: f64,
    pub rho: f64,
}

/// Where the data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PopulationModel {
    BivariateNormal {
        mean: [f64; 2],
        sd: [f64; 2],
        rho: f64,
    },
    RegressionLinked {
        base_mean: f64,
        base_sd: f64,
        linked: Vec<LinkedVariable>,
    },
    /// Empirical population: iid draws are uniform rows with replacement.
    EmpiricalCsv {
        path: String,
        ranking_columns: Vec<String>,
        target_columns: Vec<String>,
    },
}

/// How sign flips are chosen for the poset designs.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignFlipPolicy {
    #[default]
    None,
    Auto,
    Manual(Vec<bool>),
}

/// One (m, K, n) grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridCell {
    pub m: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub n: usize,
}

fn all_designs() -> Vec<DesignKind> {
    vec![DesignKind::Mvsr, DesignKind::Cpor, DesignKind::Rpor]
}

fn default_iterations() -> u64 {
    20_000
}

/// Full specification of one Monte Carlo study. A plan plus its seed
/// determines the output bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationPlan {
    pub seed: u64,
    #[serde(default = "default_iterations")]
    pub iterations: u64,
    pub model: PopulationModel,
    pub grid: Vec<GridCell>,
    #[serde(default = "all_designs")]
    pub designs: Vec<DesignKind>,
    #[serde(default)]
    pub sign_flip_policy: SignFlipPolicy,
    /// Label used in emitted tables; defaults to a model description.
    #[serde(default)]
    pub label: Option<String>,
    /// Variable index MVSR ranks on (always the original, unflipped values).
    #[serde(default)]
    pub mvsr_ranking_column: Option<usize>,
    /// Exact linear-extension machinery cutoff for CPOR heights and RPOR
    /// draws.
    #[serde(default)]
    pub exact_cutoff: Option<u64>,
    /// Monte Carlo draw count for CPOR heights above the cutoff.
    #[serde(default)]
    pub mc_height_draws: Option<u64>,
}

impl SimulationPlan {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidPlan("iterations must be at least 1".into()));
        }
        if self.grid.is_empty() {
            return Err(Error::InvalidPlan("grid is empty".into()));
        }
        if self.designs.is_empty() {
            return Err(Error::InvalidPlan("no designs selected".into()));
        }
        match &self.model {
            PopulationModel::BivariateNormal { sd, rho, .. } => {
                if sd.iter().any(|&s| !(s > 0.0)) {
                    return Err(Error::InvalidModel("sd must be positive".into()));
                }
                if rho.abs() > 1.0 {
                    return Err(Error::InvalidModel(format!("|rho| = {} > 1", rho.abs())));
                }
            }
            PopulationModel::RegressionLinked {
                base_sd, linked, ..
            } => {
                if !(*base_sd > 0.0) {
                    return Err(Error::InvalidModel("base_sd must be positive".into()));
                }
                if linked.is_empty() {
                    return Err(Error::InvalidModel("no linked variables".into()));
                }
                for lv in linked {
                    if !(lv.sd > 0.0) || lv.rho.abs() > 1.0 {
                        return Err(Error::InvalidModel(format!(
                            "linked variable sd={} rho={}",
                            lv.sd, lv.rho
                        )));
                    }
                }
            }
            PopulationModel::EmpiricalCsv {
                ranking_columns,
                target_columns,
                ..
            } => {
                if ranking_columns.is_empty() || target_columns.is_empty() {
                    return Err(Error::InvalidModel(
                        "empirical model needs ranking and target columns".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    fn model_label(&self) -> String {
        if let Some(label) = &self.label {
            return label.clone();
        }
        match &self.model {
            PopulationModel::BivariateNormal { rho, .. } => format!("bivariate_normal(rho={rho})"),
            PopulationModel::RegressionLinked { linked, .. } => {
                format!("regression_linked(R={})", linked.len() + 1)
            }
            PopulationModel::EmpiricalCsv { path, .. } => format!("empirical_csv({path})"),
        }
    }
}

struct LinkedSpec {
    mean: f64,
    slope: f64,
    noise_sd: f64,
}

enum Generator {
    Normal {
        base_mean: f64,
        base_sd: f64,
        linked: Vec<LinkedSpec>,
    },
    Empirical {
        rows: Vec<Vec<f64>>,
    },
}

/// A population model with files loaded and column roles resolved.
pub struct ResolvedModel {
    columns: Vec<String>,
    generator: Generator,
    ranking: Vec<usize>,
    target: Vec<usize>,
    true_means: Vec<f64>,
    true_variances: Vec<f64>,
    /// Absent when the population cannot support Pearson correlations
    /// (fewer than 3 rows, or a constant column).
    correlations: Option<Vec<Vec<f64>>>,
}

impl ResolvedModel {
    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn n_variables(&self) -> usize {
        self.columns.len()
    }

    pub fn ranking_columns(&self) -> &[usize] {
        &self.ranking
    }

    pub fn target_columns(&self) -> &[usize] {
        &self.target
    }

    pub fn true_means(&self) -> &[f64] {
        &self.true_means
    }

    pub fn true_variances(&self) -> &[f64] {
        &self.true_variances
    }

    pub fn correlations(&self) -> Option<&[Vec<f64>]> {
        self.correlations.as_deref()
    }

    fn draw_row(&self, rng: &mut StreamRng, out: &mut Vec<f64>) {
        match &self.generator {
            Generator::Normal {
                base_mean,
                base_sd,
                linked,
            } => {
                // One normal per variable; Box-Muller pairs, spare discarded
                // at the end of the row.
                let needed = 1 + linked.len();
                let mut normals = Vec::with_capacity(needed + 1);
                while normals.len() < needed {
                    let (a, b) = rng.normal_pair();
                    normals.push(a);
                    normals.push(b);
                }
                let base = base_mean + base_sd * normals[0];
                out.push(base);
                for (j, spec) in linked.iter().enumerate() {
                    out.push(
                        spec.mean
                            + spec.slope * (base - base_mean)
                            + spec.noise_sd * normals[j + 1],
                    );
                }
            }
            Generator::Empirical { rows } => {
                let row = &rows[rng.below_usize(rows.len())];
                out.extend_from_slice(row);
            }
        }
    }
}

/// Load files and resolve column roles for a model.
pub fn resolve_model(model: &PopulationModel) -> Result<ResolvedModel> {
    match model {
        PopulationModel::BivariateNormal { mean, sd, rho } => Ok(ResolvedModel {
            columns: vec!["X1".into(), "X2".into()],
            generator: Generator::Normal {
                base_mean: mean[0],
                base_sd: sd[0],
                linked: vec![LinkedSpec {
                    mean: mean[1],
                    slope: rho * sd[1] / sd[0],
                    noise_sd: sd[1] * (1.0 - rho * rho).max(0.0).sqrt(),
                }],
            },
            ranking: vec![0, 1],
            target: vec![0, 1],
            true_means: vec![mean[0], mean[1]],
            true_variances: vec![sd[0] * sd[0], sd[1] * sd[1]],
            correlations: Some(vec![vec![1.0, *rho], vec![*rho, 1.0]]),
        }),
        PopulationModel::RegressionLinked {
            base_mean,
            base_sd,
            linked,
        } => {
            let r = linked.len() + 1;
            let columns = (1..=r).map(|i| format!("X{i}")).collect();
            let specs: Vec<LinkedSpec> = linked
                .iter()
                .map(|lv| LinkedSpec {
                    mean: lv.mean,
                    slope: lv.rho * lv.sd / base_sd,
                    noise_sd: lv.sd * (1.0 - lv.rho * lv.rho).max(0.0).sqrt(),
                })
                .collect();
            let mut correlations = vec![vec![0.0; r]; r];
            for i in 0..r {
                correlations[i][i] = 1.0;
            }
            for (j, lv) in linked.iter().enumerate() {
                correlations[0][j + 1] = lv.rho;
                correlations[j + 1][0] = lv.rho;
            }
            // Linked variables share only the base component.
            for a in 0..linked.len() {
                for b in 0..linked.len() {
                    if a != b {
                        let rho = linked[a].rho * linked[b].rho;
                        correlations[a + 1][b + 1] = rho;
                    }
                }
            }
            let mut true_means = vec![*base_mean];
            let mut true_variances = vec![base_sd * base_sd];
            for lv in linked {
                true_means.push(lv.mean);
                true_variances.push(lv.sd * lv.sd);
            }
            Ok(ResolvedModel {
                columns,
                generator: Generator::Normal {
                    base_mean: *base_mean,
                    base_sd: *base_sd,
                    linked: specs,
                },
                ranking: (0..r).collect(),
                target: (0..r).collect(),
                true_means,
                true_variances,
                correlations: Some(correlations),
            })
        }
        PopulationModel::EmpiricalCsv {
            path,
            ranking_columns,
            target_columns,
        } => {
            let spec = SchemaSpec {
                ranking: ranking_columns.clone(),
                target: target_columns.clone(),
            };
            let (dataset, _schema) = dataset::validate_csv_file(std::path::Path::new(path), &spec)
                .map_err(|e| Error::Dataset(e.to_string()))?;
            if dataset.rows.len() < 2 {
                return Err(Error::InvalidModel(format!(
                    "empirical population needs at least 2 rows, got {}",
                    dataset.rows.len()
                )));
            }
            // Variables: ranking columns first, then unseen target columns.
            let mut columns: Vec<String> = Vec::new();
            for name in ranking_columns.iter().chain(target_columns) {
                if !columns.contains(name) {
                    columns.push(name.clone());
                }
            }
            let source_idx: Vec<usize> = columns
                .iter()
                .map(|c| dataset.column_index(c).unwrap())
                .collect();
            let rows: Vec<Vec<f64>> = dataset
                .rows
                .iter()
                .map(|row| source_idx.iter().map(|&i| row[i]).collect())
                .collect();
            let ranking: Vec<usize> = ranking_columns
                .iter()
                .map(|c| columns.iter().position(|x| x == c).unwrap())
                .collect();
            let target: Vec<usize> = target_columns
                .iter()
                .map(|c| columns.iter().position(|x| x == c).unwrap())
                .collect();
            let n = rows.len() as f64;
            let true_means: Vec<f64> = (0..columns.len())
                .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n)
                .collect();
            let true_variances: Vec<f64> = (0..columns.len())
                .map(|j| {
                    rows.iter()
                        .map(|r| (r[j] - true_means[j]).powi(2))
                        .sum::<f64>()
                        / n
                })
                .collect();
            let correlations = pairwise_correlations(&rows).ok();
            Ok(ResolvedModel {
                columns,
                generator: Generator::Empirical { rows },
                ranking,
                target,
                true_means,
                true_variances,
                correlations,
            })
        }
    }
}

/// K iid sets of m elements drawn from a resolved model.
pub fn generate_sets(
    model: &ResolvedModel,
    m: usize,
    k: usize,
    rng: &mut StreamRng,
) -> Result<Vec<SetOfElements>> {
    (0..k)
        .map(|_| {
            let rows = (0..m)
                .map(|_| {
                    let mut row = Vec::with_capacity(model.n_variables());
                    model.draw_row(rng, &mut row);
                    row
                })
                .collect();
            SetOfElements::from_rows(rows)
        })
        .collect()
}

/// Resolve a model spec and draw sets in one call.
pub fn generate_sets_from_spec(
    model: &PopulationModel,
    m: usize,
    k: usize,
    rng: &mut StreamRng,
) -> Result<Vec<SetOfElements>> {
    generate_sets(&resolve_model(model)?, m, k, rng)
}

/// One table row keyed by (m, K, n, design, variable).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyRow {
    pub m: usize,
    pub k: usize,
    pub n: usize,
    pub design: DesignKind,
    pub variable: String,
    /// `V(srs mean) / MSE(estimator)`; absent when indeterminate.
    pub efficiency: Option<f64>,
    pub mc_mean: f64,
    pub mc_mse: f64,
    pub mc_var: f64,
    /// Monte Carlo variance of the SRS baseline mean.
    pub srs_var: f64,
    /// Analytic `sigma^2 / (n m)` cross-check.
    pub srs_var_analytic: f64,
    pub true_mean: f64,
    pub note: Option<String>,
}

/// A cell the run refused to execute, with the reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedCell {
    pub m: usize,
    pub k: usize,
    pub n: usize,
    pub reason: String,
}

/// Results of one plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyTable {
    pub model_label: String,
    pub iterations: u64,
    pub rows: Vec<EfficiencyRow>,
    pub skipped: Vec<SkippedCell>,
    pub notes: Vec<String>,
}

fn design_tag(design: DesignKind) -> u64 {
    match design {
        DesignKind::Mvsr => 1,
        DesignKind::Cpor => 2,
        DesignKind::Rpor => 3,
    }
}

struct IterationOutcome {
    /// `[design][target variable] -> point estimate`
    estimates: Vec<Vec<f64>>,
    /// `[target variable] -> SRS sample mean`
    srs_means: Vec<f64>,
}

fn resolve_flips(plan: &SimulationPlan, model: &ResolvedModel) -> Result<SignFlipMask> {
    match &plan.sign_flip_policy {
        SignFlipPolicy::None => Ok(SignFlipMask::none(model.n_variables())),
        SignFlipPolicy::Manual(flips) => {
            if flips.len() != model.n_variables() {
                return Err(Error::MaskLength {
                    mask: flips.len(),
                    expected: model.n_variables(),
                });
            }
            Ok(SignFlipMask::new(flips.clone()))
        }
        SignFlipPolicy::Auto => {
            let corr = model.correlations().ok_or_else(|| {
                Error::InvalidPlan(
                    "auto sign flips need computable correlations (at least 3 rows, no constant column)"
                        .into(),
                )
            })?;
            suggest_sign_flips(corr)
        }
    }
}

fn run_iteration(
    plan: &SimulationPlan,
    model: &ResolvedModel,
    flips: &SignFlipMask,
    cell_index: usize,
    cell: &GridCell,
    iteration: u64,
    policy: &HeightPolicy,
    mvsr_col: usize,
) -> Result<IterationOutcome> {
    let ci = cell_index as u64;
    let mut estimates = Vec::with_capacity(plan.designs.len());
    for &design in &plan.designs {
        let dt = design_tag(design);
        let mut gen_rng = StreamRng::substream(plan.seed, &[tag::GENERATE, ci, dt, iteration]);
        let sets = generate_sets(model, cell.m, cell.k, &mut gen_rng)?;
        let ranking_columns = match design {
            DesignKind::Mvsr => vec![mvsr_col],
            _ => model.ranking_columns().to_vec(),
        };
        let cfg = DesignConfig {
            m: cell.m,
            replications: cell.k,
            per_stratum_n: cell.n,
            design,
            ranking_columns,
            target_columns: model.target_columns().to_vec(),
            sign_flips: flips.clone(),
            seed: StreamRng::derive_seed(plan.seed, &[tag::BUILD, ci, dt, iteration]),
        };
        let sample_seed = StreamRng::derive_seed(plan.seed, &[tag::SAMPLE, ci, dt, iteration]);
        let report: EstimateReport = match design {
            DesignKind::Mvsr => {
                let pop = build_mvsr(&sets, &cfg)?;
                let alloc = Allocation::uniform(cell.m, cell.n);
                let samples = draw_stratified_sample(&pop, &alloc, sample_seed)?;
                estimate_mvsr(&pop, &samples)?
            }
            DesignKind::Cpor => {
                let heights = compute_set_heights(&sets, &cfg, policy)?;
                let pop = build_cpor(&sets, &cfg, &heights)?;
                let alloc = allocate_proportional(&pop.stratum_sizes(), cell.n * cell.m)?;
                let samples = draw_stratified_sample(&pop, &alloc, sample_seed)?;
                estimate_cpor(&pop, &samples, &alloc)?
            }
            DesignKind::Rpor => {
                let pop = build_rpor(&sets, &cfg)?;
                let alloc = Allocation::uniform(cell.m, cell.n);
                let samples = draw_stratified_sample(&pop, &alloc, sample_seed)?;
                estimate_rpor(&pop, &samples)?
            }
        };
        estimates.push(report.estimates.iter().map(|e| e.mu_hat).collect());
    }
    // Independent SRS baseline with the same total sample size.
    let mut srs_rng = StreamRng::substream(plan.seed, &[tag::SRS_BASELINE, ci, iteration]);
    let total = cell.n * cell.m;
    let mut sums = vec![0.0; model.target_columns().len()];
    let mut row = Vec::with_capacity(model.n_variables());
    for _ in 0..total {
        row.clear();
        model.draw_row(&mut srs_rng, &mut row);
        for (s, &col) in sums.iter_mut().zip(model.target_columns()) {
            *s += row[col];
        }
    }
    let srs_means = sums.into_iter().map(|s| s / total as f64).collect();
    Ok(IterationOutcome {
        estimates,
        srs_means,
    })
}

/// Run the full Monte Carlo study. Deterministic for a given plan, regardless
/// of the rayon thread pool in effect.
pub fn run_plan(plan: &SimulationPlan) -> Result<EfficiencyTable> {
    plan.validate()?;
    let model = resolve_model(&plan.model)?;
    let flips = resolve_flips(plan, &model)?;
    let policy = HeightPolicy {
        exact_cutoff: plan
            .exact_cutoff
            .unwrap_or(HeightPolicy::default().exact_cutoff),
        mc_draws: plan
            .mc_height_draws
            .unwrap_or(HeightPolicy::default().mc_draws),
    };
    let mvsr_col = plan
        .mvsr_ranking_column
        .unwrap_or(model.ranking_columns()[0]);
    if mvsr_col >= model.n_variables() {
        return Err(Error::InvalidPlan(format!(
            "mvsr_ranking_column {mvsr_col} out of range"
        )));
    }
    let mut notes = vec![
        format!("sign flips resolved to {:?}", flips.flips()),
        format!(
            "MVSR ranks on original (unflipped) column {}",
            model.columns()[mvsr_col]
        ),
    ];
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for (cell_index, cell) in plan.grid.iter().enumerate() {
        if cell.m < 2 {
            skipped.push(SkippedCell {
                m: cell.m,
                k: cell.k,
                n: cell.n,
                reason: "m < 2".into(),
            });
            continue;
        }
        if cell.n < 1 {
            skipped.push(SkippedCell {
                m: cell.m,
                k: cell.k,
                n: cell.n,
                reason: "n < 1".into(),
            });
            continue;
        }
        if cell.n >= cell.k {
            skipped.push(SkippedCell {
                m: cell.m,
                k: cell.k,
                n: cell.n,
                reason: "n >= K (within-stratum SRSWOR needs n < K)".into(),
            });
            continue;
        }
        let outcomes: Vec<IterationOutcome> = (0..plan.iterations)
            .into_par_iter()
            .map(|it| {
                run_iteration(
                    plan, &model, &flips, cell_index, cell, it, &policy, mvsr_col,
                )
            })
            .collect::<Result<_>>()?;
        let iters = plan.iterations as f64;
        let n_targets = model.target_columns().len();
        // SRS baseline moments per variable.
        let mut srs_var = vec![0.0; n_targets];
        for j in 0..n_targets {
            let mean: f64 = outcomes.iter().map(|o| o.srs_means[j]).sum::<f64>() / iters;
            srs_var[j] = outcomes
                .iter()
                .map(|o| (o.srs_means[j] - mean).powi(2))
                .sum::<f64>()
                / iters;
        }
        for (di, &design) in plan.designs.iter().enumerate() {
            for (j, &col) in model.target_columns().iter().enumerate() {
                let true_mean = model.true_means()[col];
                let mc_mean: f64 = outcomes.iter().map(|o| o.estimates[di][j]).sum::<f64>() / iters;
                let mc_var: f64 = outcomes
                    .iter()
                    .map(|o| (o.estimates[di][j] - mc_mean).powi(2))
                    .sum::<f64>()
                    / iters;
                let mc_mse: f64 = outcomes
                    .iter()
                    .map(|o| (o.estimates[di][j] - true_mean).powi(2))
                    .sum::<f64>()
                    / iters;
                let (efficiency, note) = if mc_mse > 0.0 && srs_var[j] > 0.0 {
                    (Some(srs_var[j] / mc_mse), None)
                } else {
                    (
                        None,
                        Some("indeterminate: degenerate Monte Carlo variance".into()),
                    )
                };
                rows.push(EfficiencyRow {
                    m: cell.m,
                    k: cell.k,
                    n: cell.n,
                    design,
                    variable: model.columns()[col].clone(),
                    efficiency,
                    mc_mean,
                    mc_mse,
                    mc_var,
                    srs_var: srs_var[j],
                    srs_var_analytic: model.true_variances()[col] / (cell.n as f64 * cell.m as f64),
                    true_mean,
                    note,
                });
            }
        }
    }
    for cell in &skipped {
        notes.push(format!(
            "skipped m={} K={} n={}: {}",
            cell.m, cell.k, cell.n, cell.reason
        ));
    }
    Ok(EfficiencyTable {
        model_label: plan.model_label(),
        iterations: plan.iterations,
        rows,
        skipped,
        notes,
    })
}

/// Output format for [`emit_table`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableFormat {
    Csv,
    Markdown,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Render a table. CSV carries full (shortest round-trip) precision; markdown
/// displays two decimals.
pub fn emit_table(table: &EfficiencyTable, format: TableFormat) -> String {
    let mut out = String::new();
    match format {
        TableFormat::Csv => {
            out.push_str(
                "m,K,n,design,variable,efficiency,mc_mean,mc_mse,mc_var,srs_var,srs_var_analytic,true_mean,model,note\n",
            );
            for r in &table.rows {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                    r.m,
                    r.k,
                    r.n,
                    r.design,
                    r.variable,
                    fmt_opt(r.efficiency),
                    r.mc_mean,
                    r.mc_mse,
                    r.mc_var,
                    r.srs_var,
                    r.srs_var_analytic,
                    r.true_mean,
                    table.model_label,
                    r.note.clone().unwrap_or_default(),
                ));
            }
            for s in &table.skipped {
                out.push_str(&format!(
                    "# skipped m={} K={} n={}: {}\n",
                    s.m, s.k, s.n, s.reason
                ));
            }
        }
        TableFormat::Markdown => {
            out.push_str(&format!(
                "### {} ({} iterations)\n\n",
                table.model_label, table.iterations
            ));
            out.push_str("| m | K | n | design | variable | efficiency | mc_mean | mc_mse |\n");
            out.push_str("|---|---|---|--------|----------|-----------:|--------:|-------:|\n");
            for r in &table.rows {
                out.push_str(&format!(
                    "| {} | {} | {} | {} | {} | {} | {:.2} | {:.2} |\n",
                    r.m,
                    r.k,
                    r.n,
                    r.design,
                    r.variable,
                    r.efficiency
                        .map(|e| format!("{e:.2}"))
                        .unwrap_or_else(|| "-".into()),
                    r.mc_mean,
                    r.mc_mse,
                ));
            }
            if !table.skipped.is_empty() {
                out.push('\n');
                for s in &table.skipped {
                    out.push_str(&format!(
                        "skipped m={} K={} n={}: {}\n",
                        s.m, s.k, s.n, s.reason
                    ));
                }
            }
        }
    }
    out
}

/// Combined paper-layout markdown over several tables: one row per
/// (model, cell, variable) with the designs pivoted to columns.
pub fn emit_paper_layout(tables: &[EfficiencyTable]) -> String {
    let mut designs: Vec<DesignKind> = Vec::new();
    for t in tables {
        for r in &t.rows {
            if !designs.contains(&r.design) {
                designs.push(r.design);
            }
        }
    }
    let mut out = String::new();
    out.push_str("| m | K | n | model | variable |");
    for d in &designs {
        out.push_str(&format!(" {d} |"));
    }
    out.push('\n');
    out.push_str("|---|---|---|-------|----------|");
    for _ in &designs {
        out.push_str("----------:|");
    }
    out.push('\n');
    for t in tables {
        let mut keys: Vec<(usize, usize, usize, String)> = Vec::new();
        for r in &t.rows {
            let key = (r.m, r.k, r.n, r.variable.clone());
            if !keys.contains(&key) {
                keys.push(key);
            }
        }
        for (m, k, n, variable) in keys {
            out.push_str(&format!(
                "| {m} | {k} | {n} | {} | {variable} |",
                t.model_label
            ));
            for d in &designs {
                let cell = t
                    .rows
                    .iter()
                    .find(|r| {
                        r.m == m && r.k == k && r.n == n && r.variable == variable && r.design == *d
                    })
                    .and_then(|r| r.efficiency)
                    .map(|e| format!("{e:.2}"))
                    .unwrap_or_else(|| "-".into());
                out.push_str(&format!(" {cell} |"));
            }
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bivariate(rho: f64) -> PopulationModel {
        PopulationModel::BivariateNormal {
            mean: [0.0, 0.0],
            sd: [1.0, 1.0],
            rho,
        }
    }

    #[test]
    fn generated_sets_have_requested_shape() {
        let model = resolve_model(&bivariate(0.5)).unwrap();
        let mut rng = StreamRng::from_seed(1);
        let sets = generate_sets(&model, 3, 8, &mut rng).unwrap();
        assert_eq!(sets.len(), 8);
        assert!(sets.iter().all(|s| s.len() == 3 && s.n_variables() == 2));
    }

    #[test]
    fn independent_coordinates_have_near_zero_correlation() {
        let model = resolve_model(&bivariate(0.0)).unwrap();
        let mut rng = StreamRng::from_seed(2);
        let mut rows = Vec::with_capacity(100_000);
        for _ in 0..100_000 {
            let mut row = Vec::new();
            model.draw_row(&mut rng, &mut row);
            rows.push(row);
        }
        let corr = pairwise_correlations(&rows).unwrap();
        assert!(corr[0][1].abs() < 0.01, "r = {}", corr[0][1]);
    }

    #[test]
    fn perfect_correlation_is_affine() {
        let model = resolve_model(&PopulationModel::BivariateNormal {
            mean: [1.0, -2.0],
            sd: [2.0, 0.5],
            rho: 1.0,
        })
        .unwrap();
        let mut rng = StreamRng::from_seed(3);
        for _ in 0..100 {
            let mut row = Vec::new();
            model.draw_row(&mut rng, &mut row);
            let expected = -2.0 + 1.0 * 0.5 / 2.0 * (row[0] - 1.0);
            assert!((row[1] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn empirical_two_row_file_only_reproduces_rows() {
        let dir = std::env::temp_dir().join(format!("porss_sim_test_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("two_rows.csv");
        std::fs::write(&path, "a,b\n1,10\n2,20\n").unwrap();
        let model = resolve_model(&PopulationModel::EmpiricalCsv {
            path: path.to_string_lossy().into_owned(),
            ranking_columns: vec!["a".into()],
            target_columns: vec!["b".into()],
        })
        .unwrap();
        let mut rng = StreamRng::from_seed(4);
        for _ in 0..100 {
            let mut row = Vec::new();
            model.draw_row(&mut rng, &mut row);
            assert!(row == vec![1.0, 10.0] || row == vec![2.0, 20.0]);
        }
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn infeasible_cells_are_skipped_not_fatal() {
        let plan = SimulationPlan {
            seed: 5,
            iterations: 10,
            model: bivariate(0.5),
            grid: vec![GridCell { m: 3, k: 4, n: 6 }, GridCell { m: 3, k: 8, n: 2 }],
            designs: vec![DesignKind::Rpor],
            sign_flip_policy: SignFlipPolicy::None,
            label: None,
            mvsr_ranking_column: None,
            exact_cutoff: None,
            mc_height_draws: None,
        };
        let table = run_plan(&plan).unwrap();
        assert_eq!(table.skipped.len(), 1);
        assert!(table.skipped[0].reason.contains("n >= K"));
        assert_eq!(table.rows.len(), 2); // one feasible cell x one design x two variables
    }

    #[test]
    fn emitted_csv_has_stable_header_and_one_line_per_row() {
        let plan = SimulationPlan {
            seed: 6,
            iterations: 5,
            model: bivariate(0.3),
            grid: vec![GridCell { m: 2, k: 3, n: 2 }],
            designs: vec![DesignKind::Mvsr],
            sign_flip_policy: SignFlipPolicy::None,
            label: Some("demo".into()),
            mvsr_ranking_column: None,
            exact_cutoff: None,
            mc_height_draws: None,
        };
        let table = run_plan(&plan).unwrap();
        let csv = emit_table(&table, TableFormat::Csv);
        let mut lines = csv.lines();
        assert!(lines
            .next()
            .unwrap()
            .starts_with("m,K,n,design,variable,efficiency"));
        assert_eq!(csv.lines().count(), 1 + table.rows.len());
        let md = emit_table(&table, TableFormat::Markdown);
        assert!(md.contains("| MVSR |"));
    }

    fn synthetic_row(m: usize, n: usize, design: DesignKind, variable: &str) -> EfficiencyRow {
        EfficiencyRow {
            m,
            k: 12,
            n,
            design,
            variable: variable.into(),
            efficiency: Some(1.25),
            mc_mean: 0.0,
            mc_mse: 0.05,
            mc_var: 0.05,
            srs_var: 0.0625,
            srs_var_analytic: 0.0625,
            true_mean: 0.0,
            note: None,
        }
    }

    #[test]
    fn paper_layout_has_one_row_per_model_cell_and_variable() {
        // Four models x two cells x two variables pivots to 16 data rows.
        let tables: Vec<EfficiencyTable> = [0.3, 0.5, 0.7, 0.9]
            .iter()
            .map(|rho| EfficiencyTable {
                model_label: format!("rho={rho}"),
                iterations: 20_000,
                rows: [4, 6]
                    .iter()
                    .flat_map(|&n| {
                        ["X1", "X2"].iter().flat_map(move |v| {
                            [DesignKind::Mvsr, DesignKind::Cpor, DesignKind::Rpor]
                                .into_iter()
                                .map(move |d| synthetic_row(3, n, d, v))
                        })
                    })
                    .collect(),
                skipped: Vec::new(),
                notes: Vec::new(),
            })
            .collect();
        let md = emit_paper_layout(&tables);
        let data_rows = md.lines().filter(|l| l.starts_with("| 3 |")).count();
        assert_eq!(data_rows, 16, "{md}");
        assert!(md.lines().next().unwrap().contains("| MVSR | CPOR | RPOR |"));
    }

    #[test]
    fn empty_table_emits_header_and_skip_report() {
        let table = EfficiencyTable {
            model_label: "empty".into(),
            iterations: 10,
            rows: Vec::new(),
            skipped: vec![SkippedCell { m: 3, k: 4, n: 6, reason: "n >= K".into() }],
            notes: Vec::new(),
        };
        let csv = emit_table(&table, TableFormat::Csv);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with("m,K,n,design,variable,efficiency"));
        assert!(lines[1].starts_with("# skipped m=3 K=4 n=6"));
        let md = emit_table(&table, TableFormat::Markdown);
        assert!(md.contains("skipped m=3 K=4 n=6"));
    }
}
