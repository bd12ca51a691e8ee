//! CSV ingestion and schema validation for empirical populations.
//!
//! Format: UTF-8, comma-separated, one header row, decimal points, no
//! thousands separators. Every typed cell must parse as a finite real.
//! Validation reports *all* problems, not just the first.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Role of a column in a sampling run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnRole {
    Ranking,
    Target,
    Both,
    Ignored,
}

/// Validated shape of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSchema {
    pub columns: Vec<(String, ColumnRole)>,
    pub n_rows: usize,
}

/// Parsed numeric dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column_values(&self, index: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[index]).collect()
    }
}

/// One validation problem, located by 1-based line and column name/index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvIssue {
    pub line: usize,
    pub column: Option<String>,
    pub message: String,
}

impl fmt::Display for CsvIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.column {
            Some(col) => write!(f, "line {}, column {:?}: {}", self.line, col, self.message),
            None => write!(f, "line {}: {}", self.line, self.message),
        }
    }
}

/// All problems found in one validation pass.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvErrors(pub Vec<CsvIssue>);

impl fmt::Display for CsvErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, issue) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{issue}")?;
        }
        Ok(())
    }
}

impl std::error::Error for CsvErrors {}

/// Declared column roles for validation.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaSpec {
    pub ranking: Vec<String>,
    pub target: Vec<String>,
}

/// Parse CSV text into a numeric dataset, collecting every issue.
pub fn parse_csv(text: &str) -> std::result::Result<Dataset, CsvErrors> {
    let mut issues = Vec::new();
    let mut lines = text.lines().enumerate();
    let header = loop {
        match lines.next() {
            Some((idx, raw)) => {
                let line = raw.trim_end_matches('\r');
                if line.trim().is_empty() {
                    continue;
                }
                break (idx + 1, line);
            }
            None => {
                return Err(CsvErrors(vec![CsvIssue {
                    line: 1,
                    column: None,
                    message: "empty file".into(),
                }]))
            }
        }
    };
    let columns: Vec<String> = header.1.split(',').map(|c| c.trim().to_string()).collect();
    for (i, c) in columns.iter().enumerate() {
        if c.is_empty() {
            issues.push(CsvIssue {
                line: header.0,
                column: None,
                message: format!("header column {} is empty", i + 1),
            });
        }
        if columns[..i].contains(c) {
            issues.push(CsvIssue {
                line: header.0,
                column: Some(c.clone()),
                message: "duplicate column name".into(),
            });
        }
    }
    let mut rows = Vec::new();
    for (idx, raw) in lines {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != columns.len() {
            issues.push(CsvIssue {
                line: line_no,
                column: None,
                message: format!("expected {} cells, found {}", columns.len(), cells.len()),
            });
            continue;
        }
        let mut row = Vec::with_capacity(cells.len());
        let mut row_ok = true;
        for (j, cell) in cells.iter().enumerate() {
            let cell = cell.trim();
            let col = || {
                Some(
                    columns
                        .get(j)
                        .cloned()
                        .unwrap_or_else(|| format!("#{}", j + 1)),
                )
            };
            if cell.is_empty() {
                issues.push(CsvIssue {
                    line: line_no,
                    column: col(),
                    message: "empty cell".into(),
                });
                row_ok = false;
                continue;
            }
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => row.push(v),
                Ok(v) => {
                    issues.push(CsvIssue {
                        line: line_no,
                        column: col(),
                        message: format!("non-finite value {v}"),
                    });
                    row_ok = false;
                }
                Err(_) => {
                    issues.push(CsvIssue {
                        line: line_no,
                        column: col(),
                        message: format!("cannot parse {cell:?} as a number"),
                    });
                    row_ok = false;
                }
            }
        }
        if row_ok {
            rows.push(row);
        }
    }
    if rows.is_empty() && issues.is_empty() {
        issues.push(CsvIssue {
            line: header.0,
            column: None,
            message: "no data rows".into(),
        });
    }
    if issues.is_empty() {
        Ok(Dataset { columns, rows })
    } else {
        Err(CsvErrors(issues))
    }
}

/// Parse and validate a dataset against declared column roles.
pub fn validate_csv(
    text: &str,
    spec: &SchemaSpec,
) -> std::result::Result<(Dataset, DatasetSchema), CsvErrors> {
    let dataset = parse_csv(text)?;
    let mut issues = Vec::new();
    if spec.ranking.is_empty() {
        issues.push(CsvIssue {
            line: 1,
            column: None,
            message: "schema declares no ranking column".into(),
        });
    }
    if spec.target.is_empty() {
        issues.push(CsvIssue {
            line: 1,
            column: None,
            message: "schema declares no target column".into(),
        });
    }
    for name in spec.ranking.iter().chain(&spec.target) {
        if dataset.column_index(name).is_none() {
            issues.push(CsvIssue {
                line: 1,
                column: Some(name.clone()),
                message: "column not found in header".into(),
            });
        }
    }
    if !issues.is_empty() {
        return Err(CsvErrors(issues));
    }
    let columns = dataset
        .columns
        .iter()
        .map(|name| {
            let ranking = spec.ranking.contains(name);
            let target = spec.target.contains(name);
            let role = match (ranking, target) {
                (true, true) => ColumnRole::Both,
                (true, false) => ColumnRole::Ranking,
                (false, true) => ColumnRole::Target,
                (false, false) => ColumnRole::Ignored,
            };
            (name.clone(), role)
        })
        .collect();
    let schema = DatasetSchema {
        columns,
        n_rows: dataset.rows.len(),
    };
    Ok((dataset, schema))
}

/// File-reading convenience over [`validate_csv`].
pub fn validate_csv_file(
    path: &Path,
    spec: &SchemaSpec,
) -> Result<(Dataset, DatasetSchema), FileErrors> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| FileErrors::Io(format!("{}: {e}", path.display())))?;
    validate_csv(&text, spec).map_err(FileErrors::Csv)
}

/// Errors from file-level CSV validation.
#[derive(Debug)]
pub enum FileErrors {
    Io(String),
    Csv(CsvErrors),
}

impl fmt::Display for FileErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FileErrors::Io(m) => write!(f, "{m}"),
            FileErrors::Csv(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for FileErrors {}

impl From<FileErrors> for Error {
    fn from(e: FileErrors) -> Self {
        Error::Dataset(e.to_string())
    }
}
