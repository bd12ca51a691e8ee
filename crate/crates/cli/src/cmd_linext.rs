//! `porss linext`: count, enumerate, sample and height-summarize the linear
//! extensions of a dominance poset read from a CSV of element vectors.

use std::path::PathBuf;

use clap::{Args, Subcommand};
use serde_json::json;

use porss::linext::{
    count_extensions, enumerate_extensions, mean_heights, Enumeration, ExtensionSampler,
    HeightMode, SampleConfig,
};
use porss::poset::build_poset;
use porss::rng::StreamRng;

use crate::common::{load_poset_csv, resolve_flips, CliError};

#[derive(Args)]
pub struct LinextArgs {
    /// CSV of element vectors; a `label` column names the elements
    data: PathBuf,
    /// Sign flips: "none", "auto", or comma-separated variable indices
    #[arg(long)]
    flips: Option<String>,
    /// Emit JSON instead of plain text
    #[arg(long)]
    json: bool,
    #[command(subcommand)]
    action: Action,
}

#[derive(Subcommand)]
enum Action {
    /// Exact number of linear extensions
    Count,
    /// List all linear extensions, bottom to top
    Enum {
        /// Refuse to enumerate more than this many extensions
        #[arg(long, default_value_t = 100_000)]
        cap: u64,
    },
    /// Mean and rounded heights of every element
    Heights {
        /// Exact computation over all extensions (default)
        #[arg(long, conflicts_with = "mc")]
        exact: bool,
        /// Monte Carlo over this many uniform draws
        #[arg(long)]
        mc: Option<u64>,
        /// Seed for the Monte Carlo path
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Draw uniform random linear extensions
    Sample {
        #[arg(long, default_value_t = 1)]
        draws: u64,
        #[arg(long)]
        seed: u64,
    },
}

pub fn run(args: LinextArgs) -> Result<(), CliError> {
    let data = load_poset_csv(&args.data)?;
    let mask = resolve_flips(args.flips.as_deref(), &data.rows, data.columns.len())?;
    let set = data.to_set()?;
    let poset = build_poset(&set, &mask)?;
    let labels = set.labels();
    match args.action {
        Action::Count => {
            let count = count_extensions(&poset)?;
            if args.json {
                println!("{}", json!({ "count": count }));
            } else {
                println!("{count}");
            }
        }
        Action::Enum { cap } => match enumerate_extensions(&poset, cap)? {
            Enumeration::Complete(extensions) => {
                if args.json {
                    let lists: Vec<Vec<&str>> = extensions
                        .iter()
                        .map(|le| le.order().iter().map(|&i| labels[i].as_str()).collect())
                        .collect();
                    println!("{}", json!({ "count": lists.len(), "extensions": lists }));
                } else {
                    for le in &extensions {
                        let words: Vec<&str> =
                            le.order().iter().map(|&i| labels[i].as_str()).collect();
                        println!("{}", words.join(" "));
                    }
                }
            }
            Enumeration::CapExceeded { cap } => {
                return Err(CliError::usage(format!(
                    "more than {cap} linear extensions; raise --cap to enumerate"
                )))
            }
        },
        Action::Heights { exact: _, mc, seed } => {
            let mode = match mc {
                None => HeightMode::Exact,
                Some(draws) => {
                    let seed = seed.ok_or_else(|| {
                        CliError::usage("--mc requires --seed for a reproducible run")
                    })?;
                    HeightMode::MonteCarlo { draws, seed }
                }
            };
            let summary = mean_heights(&poset, mode)?;
            if args.json {
                let per_element: Vec<_> = labels
                    .iter()
                    .zip(summary.mean_height.iter().zip(&summary.rounded_height))
                    .map(|(label, (mean, rounded))| {
                        json!({ "label": label, "mean_height": mean, "rounded_height": rounded })
                    })
                    .collect();
                println!(
                    "{}",
                    json!({
                        "exact": summary.exact,
                        "n_extensions_or_draws": summary.n_extensions_or_draws,
                        "heights": per_element,
                    })
                );
            } else {
                println!("label\tmean_height\trounded_height");
                for (label, (mean, rounded)) in labels
                    .iter()
                    .zip(summary.mean_height.iter().zip(&summary.rounded_height))
                {
                    println!("{label}\t{mean}\t{rounded}");
                }
            }
        }
        Action::Sample { draws, seed } => {
            let sampler = ExtensionSampler::new(&poset, &SampleConfig::default())?;
            let mut rng = StreamRng::substream(seed, &[porss::rng::tag::RPOR_LE]);
            let mut lists = Vec::new();
            for _ in 0..draws {
                let le = sampler.draw(&mut rng);
                let words: Vec<&str> = le.order().iter().map(|&i| labels[i].as_str()).collect();
                if args.json {
                    lists.push(words.iter().map(|w| w.to_string()).collect::<Vec<_>>());
                } else {
                    println!("{}", words.join(" "));
                }
            }
            if args.json {
                println!(
                    "{}",
                    json!({ "exact_path": sampler.is_exact(), "draws": lists })
                );
            }
        }
    }
    Ok(())
}
