//! Small end-to-end efficiency study: bivariate normal populations at a few
//! correlations, all three designs, printed as a combined markdown table.
//!
//! Usage: `cargo run --release --example efficiency_study [iterations]`

use porss::designs::DesignKind;
use porss::sim::{
    emit_paper_layout, run_plan, EfficiencyTable, GridCell, PopulationModel, SignFlipPolicy,
    SimulationPlan,
};

fn main() {
    let iterations: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(20_000);
    let mut tables: Vec<EfficiencyTable> = Vec::new();
    for rho in [-0.9, 0.3, 0.9] {
        let plan = SimulationPlan {
            seed: 20_240_101,
            iterations,
            model: PopulationModel::BivariateNormal {
                mean: [0.0, 0.0],
                sd: [1.0, 1.0],
                rho,
            },
            grid: vec![
                GridCell { m: 3, k: 8, n: 4 },
                GridCell { m: 3, k: 12, n: 4 },
            ],
            designs: vec![DesignKind::Mvsr, DesignKind::Cpor, DesignKind::Rpor],
            sign_flip_policy: if rho < 0.0 {
                SignFlipPolicy::Auto
            } else {
                SignFlipPolicy::None
            },
            label: Some(format!("rho={rho}")),
            mvsr_ranking_column: None,
            exact_cutoff: None,
            mc_height_draws: None,
        };
        let start = std::time::Instant::now();
        let table = run_plan(&plan).expect("plan is valid");
        eprintln!(
            "rho={rho}: {} iterations in {:?}",
            iterations,
            start.elapsed()
        );
        tables.push(table);
    }
    println!("{}", emit_paper_layout(&tables));
}
