//! `porss validate`: schema-check a CSV dataset, reporting every problem.

use std::path::PathBuf;

use clap::Args;

use porss::dataset::{validate_csv, SchemaSpec};

use crate::common::CliError;

#[derive(Args)]
pub struct ValidateArgs {
    /// CSV dataset with a header row
    data: PathBuf,
    /// Ranking column names (comma separated)
    #[arg(long, value_delimiter = ',', required = true)]
    ranking: Vec<String>,
    /// Target column names (comma separated)
    #[arg(long, value_delimiter = ',', required = true)]
    target: Vec<String>,
    /// Emit the schema as JSON
    #[arg(long)]
    json: bool,
}

pub fn run(args: ValidateArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.data)
        .map_err(|e| CliError::data(format!("{}: {e}", args.data.display())))?;
    let spec = SchemaSpec {
        ranking: args.ranking,
        target: args.target,
    };
    match validate_csv(&text, &spec) {
        Ok((_dataset, schema)) => {
            if args.json {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&schema).expect("schema serializes")
                );
            } else {
                println!("rows: {}", schema.n_rows);
                for (name, role) in &schema.columns {
                    println!("{name}: {role:?}");
                }
            }
            Ok(())
        }
        Err(errors) => {
            for issue in &errors.0 {
                eprintln!("{issue}");
            }
            Err(CliError::data(format!(
                "{} failed validation with {} error(s)",
                args.data.display(),
                errors.0.len()
            )))
        }
    }
}
