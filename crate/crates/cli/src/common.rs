//! Shared CLI plumbing: error classification and poset-CSV loading.

use std::path::Path;

use porss::poset::{pairwise_correlations, suggest_sign_flips, SetOfElements, SignFlipMask};
use porss::Error;

/// CLI failure classified by exit code: usage/config errors exit 1, data
/// errors exit 2.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        CliError::Data(msg.into())
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match &e {
            Error::Dataset(_) => CliError::Data(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

/// An element-vector table: numeric columns plus optional `label` column.
pub struct PosetData {
    pub labels: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl PosetData {
    pub fn to_set(&self) -> Result<SetOfElements, CliError> {
        let elements = self
            .rows
            .iter()
            .map(|r| porss::poset::ElementVector::new(r.clone()))
            .collect::<Result<_, _>>()
            .map_err(|e: Error| CliError::data(e.to_string()))?;
        SetOfElements::new(elements, self.labels.clone()).map_err(|e| CliError::data(e.to_string()))
    }
}

/// Read a CSV of element vectors. A column named `label` (case-insensitive)
/// names the elements; all other columns must be finite reals. Errors carry
/// 1-based line numbers.
pub fn load_poset_csv(path: &Path) -> Result<PosetData, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| CliError::data(format!("{}: empty file", path.display())))?;
    let names: Vec<String> = header
        .trim_end_matches('\r')
        .split(',')
        .map(|c| c.trim().to_string())
        .collect();
    let label_idx = names.iter().position(|n| n.eq_ignore_ascii_case("label"));
    let columns: Vec<String> = names
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != label_idx)
        .map(|(_, n)| n.clone())
        .collect();
    let mut labels = Vec::new();
    let mut rows = Vec::new();
    for (idx, raw) in lines {
        let line_no = idx + 1;
        let cells: Vec<&str> = raw.trim_end_matches('\r').split(',').collect();
        if cells.len() != names.len() {
            return Err(CliError::data(format!(
                "line {line_no}: expected {} cells, found {}",
                names.len(),
                cells.len()
            )));
        }
        let mut row = Vec::with_capacity(columns.len());
        for (j, cell) in cells.iter().enumerate() {
            let cell = cell.trim();
            if Some(j) == label_idx {
                labels.push(cell.to_string());
                continue;
            }
            let value: f64 = cell.parse().map_err(|_| {
                CliError::data(format!(
                    "line {line_no}, column {:?}: cannot parse {cell:?} as a number",
                    names[j]
                ))
            })?;
            if !value.is_finite() {
                return Err(CliError::data(format!(
                    "line {line_no}, column {:?}: non-finite value {value}",
                    names[j]
                )));
            }
            row.push(value);
        }
        if label_idx.is_none() {
            labels.push(format!("e{}", rows.len() + 1));
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::data(format!("{}: no data rows", path.display())));
    }
    Ok(PosetData {
        labels,
        columns,
        rows,
    })
}

/// Resolve a `--flips` argument: "none", "auto", or a comma list of variable
/// indices to negate.
pub fn resolve_flips(
    spec: Option<&str>,
    rows: &[Vec<f64>],
    n_variables: usize,
) -> Result<SignFlipMask, CliError> {
    match spec.unwrap_or("none") {
        "none" => Ok(SignFlipMask::none(n_variables)),
        "auto" => {
            let corr = pairwise_correlations(rows).map_err(|e| {
                CliError::data(format!("auto flips need Pearson correlations: {e}"))
            })?;
            Ok(suggest_sign_flips(&corr)?)
        }
        list => {
            let mut flips = vec![false; n_variables];
            for part in list.split(',') {
                let idx: usize = part.trim().parse().map_err(|_| {
                    CliError::usage(format!(
                        "--flips expects \"none\", \"auto\" or a comma list of indices, got {part:?}"
                    ))
                })?;
                if idx >= n_variables {
                    return Err(CliError::usage(format!(
                        "flip index {idx} out of range (R={n_variables})"
                    )));
                }
                flips[idx] = true;
            }
            Ok(SignFlipMask::new(flips))
        }
    }
}
