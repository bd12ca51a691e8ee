//! Dominance posets over multivariate element sets.
//!
//! Two elements are comparable when every variable of one is less than or
//! equal to the corresponding variable of the other; otherwise they are
//! incomparable and only a partial order remains. Negatively correlated
//! variables tear the order apart, so a sign-flip mask can negate selected
//! variables before comparison (the original values are never modified; flips
//! exist purely to shape the poset).

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One element's variable values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementVector(Vec<f64>);

impl ElementVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidVector("no variables".into()));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidVector(format!("non-finite value {bad}")));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Sub-vector at the given column indices.
    pub fn project(&self, columns: &[usize]) -> Result<Self> {
        let mut out = Vec::with_capacity(columns.len());
        for &c in columns {
            let v = self.0.get(c).ok_or_else(|| {
                Error::InvalidVector(format!("column {c} out of range (R={})", self.0.len()))
            })?;
            out.push(*v);
        }
        Self::new(out)
    }
}

impl std::ops::Index<usize> for ElementVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// A set of `m` elements sharing the same variable count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetOfElements {
    elements: Vec<ElementVector>,
    labels: Vec<String>,
}

impl SetOfElements {
    pub fn new(elements: Vec<ElementVector>, labels: Vec<String>) -> Result<Self> {
        if elements.len() < 2 {
            return Err(Error::InvalidSet(format!(
                "need at least 2 elements, got {}",
                elements.len()
            )));
        }
        if labels.len() != elements.len() {
            return Err(Error::InvalidSet(format!(
                "{} labels for {} elements",
                labels.len(),
                elements.len()
            )));
        }
        let r = elements[0].len();
        if elements.iter().any(|e| e.len() != r) {
            return Err(Error::InvalidSet(
                "elements have mixed variable counts".into(),
            ));
        }
        let mut seen = std::collections::HashSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::InvalidSet(format!("duplicate label {l:?}")));
            }
        }
        Ok(Self { elements, labels })
    }

    /// Build from raw rows with generated labels `e1..em`.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let labels = (1..=rows.len()).map(|i| format!("e{i}")).collect();
        let elements = rows
            .into_iter()
            .map(ElementVector::new)
            .collect::<Result<_>>()?;
        Self::new(elements, labels)
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn n_variables(&self) -> usize {
        self.elements[0].len()
    }

    pub fn elements(&self) -> &[ElementVector] {
        &self.elements
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Project every element onto the given columns (labels are kept).
    pub fn project(&self, columns: &[usize]) -> Result<Self> {
        let elements = self
            .elements
            .iter()
            .map(|e| e.project(columns))
            .collect::<Result<_>>()?;
        Ok(Self {
            elements,
            labels: self.labels.clone(),
        })
    }
}

/// Which variables to negate before comparing elements.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignFlipMask(Vec<bool>);

impl SignFlipMask {
    pub fn new(flips: Vec<bool>) -> Self {
        Self(flips)
    }

    /// Identity mask: nothing flipped.
    pub fn none(r: usize) -> Self {
        Self(vec![false; r])
    }

    pub fn flips(&self) -> &[bool] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn any(&self) -> bool {
        self.0.iter().any(|&f| f)
    }

    /// Indices of flipped variables.
    pub fn flipped_columns(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter_map(|(i, &f)| f.then_some(i))
            .collect()
    }

    pub fn project(&self, columns: &[usize]) -> Result<Self> {
        let mut out = Vec::with_capacity(columns.len());
        for &c in columns {
            let f = self.0.get(c).ok_or(Error::MaskLength {
                mask: self.0.len(),
                expected: c + 1,
            })?;
            out.push(*f);
        }
        Ok(Self(out))
    }

    fn apply(&self, v: &ElementVector) -> Vec<f64> {
        v.values()
            .iter()
            .zip(&self.0)
            .map(|(&x, &f)| if f { -x } else { x })
            .collect()
    }
}

/// Outcome of a componentwise comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VectorOrdering {
    Below,
    Above,
    Equal,
    Incomparable,
}

/// Componentwise comparison: `Below` iff `a <= b` in every coordinate and
/// `a != b`; `Equal` iff identical; `Incomparable` otherwise.
pub fn compare(a: &ElementVector, b: &ElementVector) -> Result<VectorOrdering> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let (mut le, mut ge) = (true, true);
    for (x, y) in a.values().iter().zip(b.values()) {
        if x < y {
            ge = false;
        } else if x > y {
            le = false;
        }
    }
    Ok(match (le, ge) {
        (true, true) => VectorOrdering::Equal,
        (true, false) => VectorOrdering::Below,
        (false, true) => VectorOrdering::Above,
        (false, false) => VectorOrdering::Incomparable,
    })
}

/// A strict partial order over `n` elements, stored as a dense dominance
/// matrix plus the transitive reduction (cover edges).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Poset {
    n: usize,
    below: Vec<bool>, // below[i*n + j] == true iff i is strictly below j
    covers: Vec<(usize, usize)>,
}

impl Poset {
    /// Validate an arbitrary strict relation matrix (row-major, `n*n`) and
    /// wrap it. Checks irreflexivity, antisymmetry and transitivity.
    pub fn from_relation(n: usize, below: Vec<bool>) -> Result<Self> {
        if below.len() != n * n {
            return Err(Error::InvalidRelation(format!(
                "matrix has {} entries for n={n}",
                below.len()
            )));
        }
        for i in 0..n {
            if below[i * n + i] {
                return Err(Error::InvalidRelation(format!("reflexive pair at {i}")));
            }
            for j in 0..n {
                if below[i * n + j] && below[j * n + i] {
                    return Err(Error::InvalidRelation(format!("cycle between {i} and {j}")));
                }
            }
        }
        for i in 0..n {
            for k in 0..n {
                if !below[i * n + k] {
                    continue;
                }
                for j in 0..n {
                    if below[k * n + j] && !below[i * n + j] {
                        return Err(Error::InvalidRelation(format!(
                            "transitivity fails: {i}<{k}<{j} but not {i}<{j}"
                        )));
                    }
                }
            }
        }
        let covers = transitive_reduction(n, &below);
        Ok(Self { n, below, covers })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// True iff element `i` is strictly below element `j`.
    pub fn is_below(&self, i: usize, j: usize) -> bool {
        self.below[i * self.n + j]
    }

    pub fn comparable(&self, i: usize, j: usize) -> bool {
        self.is_below(i, j) || self.is_below(j, i)
    }

    /// Minimal edge list: relation pairs with no intermediate element.
    pub fn cover_edges(&self) -> &[(usize, usize)] {
        &self.covers
    }

    /// All strict relation pairs `(i, j)` with `i` below `j`.
    pub fn relation_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in 0..self.n {
                if self.is_below(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Number of elements strictly below `i`.
    pub fn indegree(&self, i: usize) -> usize {
        (0..self.n).filter(|&j| self.is_below(j, i)).count()
    }
}

fn transitive_reduction(n: usize, below: &[bool]) -> Vec<(usize, usize)> {
    let mut covers = Vec::new();
    for i in 0..n {
        'pair: for j in 0..n {
            if !below[i * n + j] {
                continue;
            }
            for k in 0..n {
                if below[i * n + k] && below[k * n + j] {
                    continue 'pair;
                }
            }
            covers.push((i, j));
        }
    }
    covers
}

/// Build the dominance poset of a set under a sign-flip mask. Exactly equal
/// vectors get no edge in either direction, so linear extensions order them
/// freely.
pub fn build_poset(set: &SetOfElements, mask: &SignFlipMask) -> Result<Poset> {
    let r = set.n_variables();
    if mask.len() != r {
        return Err(Error::MaskLength {
            mask: mask.len(),
            expected: r,
        });
    }
    let flipped: Vec<ElementVector> = set
        .elements()
        .iter()
        .map(|e| ElementVector::new(mask.apply(e)))
        .collect::<Result<_>>()?;
    let n = set.len();
    let mut below = vec![false; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j && compare(&flipped[i], &flipped[j])? == VectorOrdering::Below {
                below[i * n + j] = true;
            }
        }
    }
    Poset::from_relation(n, below)
}

/// Pearson correlation matrix of an `N x R` data matrix.
pub fn pairwise_correlations(rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = rows.len();
    if n < 3 {
        return Err(Error::TooFewRows(n));
    }
    let r = rows[0].len();
    if rows.iter().any(|row| row.len() != r) {
        return Err(Error::InvalidSet("ragged data matrix".into()));
    }
    let mut means = vec![0.0; r];
    for row in rows {
        for (m, &v) in means.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut means {
        *m /= n as f64;
    }
    let mut centered_ss = vec![0.0; r];
    for row in rows {
        for (j, &v) in row.iter().enumerate() {
            let d = v - means[j];
            centered_ss[j] += d * d;
        }
    }
    for (j, &ss) in centered_ss.iter().enumerate() {
        if ss == 0.0 {
            return Err(Error::ConstantColumn { index: j });
        }
    }
    let mut corr = vec![vec![0.0; r]; r];
    for j in 0..r {
        corr[j][j] = 1.0;
        for k in (j + 1)..r {
            let mut cross = 0.0;
            for row in rows {
                cross += (row[j] - means[j]) * (row[k] - means[k]);
            }
            let rho = cross / (centered_ss[j] * centered_ss[k]).sqrt();
            let rho = rho.clamp(-1.0, 1.0);
            corr[j][k] = rho;
            corr[k][j] = rho;
        }
    }
    Ok(corr)
}

fn count_nonnegative_pairs(corr: &[Vec<f64>], flips: &[bool]) -> usize {
    let r = corr.len();
    let mut count = 0;
    for j in 0..r {
        for k in (j + 1)..r {
            let sign = if flips[j] != flips[k] { -1.0 } else { 1.0 };
            if sign * corr[j][k] >= 0.0 {
                count += 1;
            }
        }
    }
    count
}

/// Greedy search for a sign-flip mask that makes as many off-diagonal
/// correlation pairs non-negative as possible.
///
/// Starting from the identity mask, repeatedly flip the single variable whose
/// flip most increases the non-negative pair count (ties to the lowest index)
/// until no flip strictly improves. The result is canonicalized so variable 0
/// is never flipped: a mask and its complement induce identical pair signs,
/// and the complement's poset is the dual, which the designs treat
/// equivalently.
pub fn suggest_sign_flips(corr: &[Vec<f64>]) -> Result<SignFlipMask> {
    let r = corr.len();
    for (j, row) in corr.iter().enumerate() {
        if row.len() != r {
            return Err(Error::InvalidCorrelation("matrix is not square".into()));
        }
        for (k, &v) in row.iter().enumerate() {
            if !v.is_finite() || v.abs() > 1.0 + 1e-12 {
                return Err(Error::InvalidCorrelation(format!("entry ({j},{k}) = {v}")));
            }
            if (corr[k][j] - v).abs() > 1e-12 {
                return Err(Error::InvalidCorrelation("matrix is not symmetric".into()));
            }
        }
        if (row[j] - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidCorrelation(format!(
                "diagonal entry {j} != 1"
            )));
        }
    }
    let mut flips = vec![false; r];
    let mut best = count_nonnegative_pairs(corr, &flips);
    loop {
        let mut improved: Option<(usize, usize)> = None;
        for v in 0..r {
            flips[v] = !flips[v];
            let score = count_nonnegative_pairs(corr, &flips);
            flips[v] = !flips[v];
            if score > best && improved.map_or(true, |(_, s)| score > s) {
                improved = Some((v, score));
            }
        }
        match improved {
            Some((v, score)) => {
                flips[v] = !flips[v];
                best = score;
            }
            None => break,
        }
    }
    if r > 0 && flips[0] {
        for f in &mut flips {
            *f = !*f;
        }
    }
    Ok(SignFlipMask::new(flips))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(values: &[f64]) -> ElementVector {
        ElementVector::new(values.to_vec()).unwrap()
    }

    /// The worked five-element, two-variable example set.
    pub(crate) fn example_set() -> SetOfElements {
        SetOfElements::new(
            vec![
                ev(&[0.0, 1.0]),
                ev(&[2.0, 1.0]),
                ev(&[1.0, 2.0]),
                ev(&[3.0, 3.0]),
                ev(&[0.0, 4.0]),
            ],
            vec!["a".into(), "b".into(), "c".into(), "d".into(), "e".into()],
        )
        .unwrap()
    }

    #[test]
    fn compare_matches_worked_example() {
        // a=(0,1) below d=(3,3); e=(0,4) incomparable with d
        assert_eq!(
            compare(&ev(&[0.0, 1.0]), &ev(&[3.0, 3.0])).unwrap(),
            VectorOrdering::Below
        );
        assert_eq!(
            compare(&ev(&[3.0, 3.0]), &ev(&[0.0, 1.0])).unwrap(),
            VectorOrdering::Above
        );
        assert_eq!(
            compare(&ev(&[0.0, 4.0]), &ev(&[3.0, 3.0])).unwrap(),
            VectorOrdering::Incomparable
        );
        assert_eq!(
            compare(&ev(&[1.0, 2.0]), &ev(&[1.0, 2.0])).unwrap(),
            VectorOrdering::Equal
        );
    }

    #[test]
    fn compare_rejects_dimension_mismatch() {
        let err = compare(&ev(&[1.0]), &ev(&[1.0, 2.0])).unwrap_err();
        assert!(matches!(
            err,
            Error::DimensionMismatch { left: 1, right: 2 }
        ));
    }

    #[test]
    fn example_poset_relation_pairs() {
        // Oracle: brute-force pairwise componentwise comparison of the rows.
        let set = example_set();
        let poset = build_poset(&set, &SignFlipMask::none(2)).unwrap();
        let mut pairs = poset.relation_pairs();
        pairs.sort_unstable();
        // a<b, a<c, a<d, a<e, b<d, c<d with a..e = 0..4
        assert_eq!(pairs, vec![(0, 1), (0, 2), (0, 3), (0, 4), (1, 3), (2, 3)]);
        let mut covers = poset.cover_edges().to_vec();
        covers.sort_unstable();
        // a<d is implied through b (and c); a<b, a<c, a<e, b<d, c<d remain
        assert_eq!(covers, vec![(0, 1), (0, 2), (0, 4), (1, 3), (2, 3)]);
    }

    #[test]
    fn chain_is_total_order() {
        let set = SetOfElements::from_rows(vec![
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            vec![2.0, 2.0],
            vec![3.0, 3.0],
        ])
        .unwrap();
        let poset = build_poset(&set, &SignFlipMask::none(2)).unwrap();
        assert_eq!(poset.relation_pairs().len(), 6); // C(4,2)
        assert_eq!(poset.cover_edges().len(), 3);
    }

    #[test]
    fn crossed_pair_is_antichain() {
        let set = SetOfElements::from_rows(vec![vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        let poset = build_poset(&set, &SignFlipMask::none(2)).unwrap();
        assert!(poset.relation_pairs().is_empty());
    }

    #[test]
    fn equal_vectors_get_no_edge() {
        let set =
            SetOfElements::from_rows(vec![vec![1.0, 1.0], vec![1.0, 1.0], vec![2.0, 2.0]]).unwrap();
        let poset = build_poset(&set, &SignFlipMask::none(2)).unwrap();
        assert!(!poset.comparable(0, 1));
        assert!(poset.is_below(0, 2));
        assert!(poset.is_below(1, 2));
    }

    #[test]
    fn from_relation_rejects_broken_transitivity() {
        // 0<1, 1<2 without 0<2
        let mut below = vec![false; 9];
        below[0 * 3 + 1] = true;
        below[1 * 3 + 2] = true;
        assert!(matches!(
            Poset::from_relation(3, below),
            Err(Error::InvalidRelation(_))
        ));
    }

    #[test]
    fn correlations_trivial_cases() {
        // duplicated column -> off-diagonal 1; negated column -> -1
        let rows = vec![
            vec![1.0, 1.0, -1.0],
            vec![2.0, 2.0, -2.0],
            vec![5.0, 5.0, -5.0],
        ];
        let corr = pairwise_correlations(&rows).unwrap();
        assert!((corr[0][1] - 1.0).abs() < 1e-12);
        assert!((corr[0][2] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn correlation_hand_value() {
        // Pearson of (0,0),(1,1),(2,4): r = 2*sqrt(3/13)
        let rows = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 4.0]];
        let corr = pairwise_correlations(&rows).unwrap();
        let expected = 2.0 * (3.0f64 / 13.0).sqrt();
        assert!((corr[0][1] - expected).abs() < 1e-12, "got {}", corr[0][1]);
    }

    #[test]
    fn correlations_name_constant_column() {
        let rows = vec![vec![1.0, 7.0], vec![2.0, 7.0], vec![3.0, 7.0]];
        assert!(matches!(
            pairwise_correlations(&rows),
            Err(Error::ConstantColumn { index: 1 })
        ));
    }

    #[test]
    fn flips_all_positive_is_identity() {
        let corr = vec![vec![1.0, 0.4], vec![0.4, 1.0]];
        assert_eq!(suggest_sign_flips(&corr).unwrap().flips(), &[false, false]);
    }

    #[test]
    fn flips_negative_pair_flips_second_variable() {
        let corr = vec![vec![1.0, -0.9], vec![-0.9, 1.0]];
        assert_eq!(suggest_sign_flips(&corr).unwrap().flips(), &[false, true]);
    }

    #[test]
    fn flips_pollution_sign_pattern() {
        // Variables ordered Pb, Cd, Zn, S: Cd and Zn anti-correlated with the
        // rest, positively correlated with each other.
        let corr = vec![
            vec![1.0, -0.5, -0.6, 0.27],
            vec![-0.5, 1.0, 0.48, -0.06],
            vec![-0.6, 0.48, 1.0, -0.3],
            vec![0.27, -0.06, -0.3, 1.0],
        ];
        let mask = suggest_sign_flips(&corr).unwrap();
        assert_eq!(mask.flips(), &[false, true, true, false], "flip Cd and Zn");
        // All pairs non-negative after the flips.
        assert_eq!(count_nonnegative_pairs(&corr, mask.flips()), 6);
    }
}
