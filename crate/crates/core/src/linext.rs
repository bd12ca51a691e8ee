//! Enumeration, counting, uniform sampling and mean heights of linear
//! extensions.
//!
//! A linear extension is a total order of a poset's elements that preserves
//! every strict relation. Heights are 1-based positions counted from the
//! bottom (minimal end), so an element below everything has height 1.
//!
//! Exact machinery works on downset bitmasks: `f(D)` counts the extensions of
//! the elements outside the downset `D`, memoized over reachable downsets.
//! The same recursion counts, samples uniformly (by indexing a uniform integer
//! into the recursion tree) and accumulates exact rank distributions for mean
//! heights without ever materializing the extension list. Posets too large for
//! that (or over the configured cutoff) fall back to a lazy adjacent
//! transposition Markov chain for sampling.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::poset::Poset;
use crate::rng::{self, StreamRng};
use crate::{Error, Result};

/// Largest element count the exact bitmask machinery accepts. Counts fit u64
/// up to 20! and the reachable-downset table stays addressable.
pub const MAX_EXACT_ELEMENTS: usize = 20;

/// Default extension-count cutoff between the exact sampling path and the
/// Markov chain path.
pub const DEFAULT_EXACT_CUTOFF: u64 = 100_000;

/// A total order of element indices; `order[0]` is the bottom element.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinearExtension {
    order: Vec<usize>,
}

impl LinearExtension {
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// 1-based height of each element (inverse permutation).
    pub fn heights(&self) -> Vec<usize> {
        let mut h = vec![0; self.order.len()];
        for (pos, &elem) in self.order.iter().enumerate() {
            h[elem] = pos + 1;
        }
        h
    }
}

/// True iff `order` is a permutation respecting every relation of `poset`.
pub fn is_linear_extension(poset: &Poset, extension: &LinearExtension) -> bool {
    let n = poset.len();
    if extension.order.len() != n {
        return false;
    }
    let mut seen = vec![false; n];
    for &e in &extension.order {
        if e >= n || seen[e] {
            return false;
        }
        seen[e] = true;
    }
    let heights = extension.heights();
    for (i, j) in poset.relation_pairs() {
        if heights[i] >= heights[j] {
            return false;
        }
    }
    true
}

/// Result of a capped enumeration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Enumeration {
    /// The complete extension list, in lexicographic order of element choices.
    Complete(Vec<LinearExtension>),
    /// The count would exceed `cap`; no partial list is returned.
    CapExceeded { cap: u64 },
}

/// Enumerate all linear extensions by backtracking over currently-minimal
/// elements. Returns [`Enumeration::CapExceeded`] as soon as the output would
/// grow past `cap`.
pub fn enumerate_extensions(poset: &Poset, cap: u64) -> Result<Enumeration> {
    if cap == 0 {
        return Err(Error::InvalidConfig(
            "enumeration cap must be at least 1".into(),
        ));
    }
    let n = poset.len();
    let mut indegree: Vec<usize> = (0..n).map(|i| poset.indegree(i)).collect();
    let mut available: Vec<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
    let mut prefix = Vec::with_capacity(n);
    let mut out = Vec::new();
    let exceeded = backtrack(
        poset,
        &mut indegree,
        &mut available,
        &mut prefix,
        &mut out,
        cap,
    );
    if exceeded {
        Ok(Enumeration::CapExceeded { cap })
    } else {
        Ok(Enumeration::Complete(out))
    }
}

fn backtrack(
    poset: &Poset,
    indegree: &mut [usize],
    available: &mut Vec<usize>,
    prefix: &mut Vec<usize>,
    out: &mut Vec<LinearExtension>,
    cap: u64,
) -> bool {
    let n = poset.len();
    if prefix.len() == n {
        if out.len() as u64 >= cap {
            return true;
        }
        out.push(LinearExtension {
            order: prefix.clone(),
        });
        return false;
    }
    // Snapshot: choices at this depth, ascending for a deterministic order.
    let mut choices = available.clone();
    choices.sort_unstable();
    for &pick in &choices {
        available.retain(|&x| x != pick);
        prefix.push(pick);
        let mut released = Vec::new();
        for j in 0..n {
            if poset.is_below(pick, j) {
                indegree[j] -= 1;
                if indegree[j] == 0 {
                    released.push(j);
                    available.push(j);
                }
            }
        }
        if backtrack(poset, indegree, available, prefix, out, cap) {
            return true;
        }
        for j in 0..n {
            if poset.is_below(pick, j) {
                indegree[j] += 1;
            }
        }
        available.retain(|&x| !released.contains(&x));
        prefix.pop();
        available.push(pick);
    }
    false
}

/// Per-element predecessor bitmasks; element `i` may be placed once every bit
/// of `pred[i]` is already in the downset.
fn predecessor_masks(poset: &Poset) -> Result<Vec<u32>> {
    let n = poset.len();
    if n > MAX_EXACT_ELEMENTS {
        return Err(Error::PosetTooLarge {
            n,
            max: MAX_EXACT_ELEMENTS,
        });
    }
    let mut pred = vec![0u32; n];
    for j in 0..n {
        for i in 0..n {
            if poset.is_below(i, j) {
                pred[j] |= 1 << i;
            }
        }
    }
    Ok(pred)
}

fn count_from(pred: &[u32], full: u32, memo: &mut HashMap<u32, u64>, downset: u32) -> u64 {
    if downset == full {
        return 1;
    }
    if let Some(&c) = memo.get(&downset) {
        return c;
    }
    let mut total = 0u64;
    for (i, &p) in pred.iter().enumerate() {
        let bit = 1u32 << i;
        if downset & bit == 0 && p & !downset == 0 {
            total += count_from(pred, full, memo, downset | bit);
        }
    }
    memo.insert(downset, total);
    total
}

/// Exact number of linear extensions, via memoized recursion over downsets.
pub fn count_extensions(poset: &Poset) -> Result<u64> {
    let pred = predecessor_masks(poset)?;
    let full = if poset.len() == 32 {
        u32::MAX
    } else {
        (1u32 << poset.len()) - 1
    };
    let mut memo = HashMap::new();
    Ok(count_from(&pred, full, &mut memo, 0))
}

/// How mean heights are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeightMode {
    /// Average over all extensions via the downset recursion.
    Exact,
    /// Average over uniform draws.
    MonteCarlo { draws: u64, seed: u64 },
}

/// Mean and rounded heights of every element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeightSummary {
    /// Per-element mean height in [1, m].
    pub mean_height: Vec<f64>,
    /// Round-half-up of the mean height, in 1..=m.
    pub rounded_height: Vec<usize>,
    /// True when computed by exact enumeration rather than Monte Carlo.
    pub exact: bool,
    /// Extension count (exact) or draw count (Monte Carlo).
    pub n_extensions_or_draws: u64,
}

/// Mean 1-based heights over all linear extensions (exact) or over uniform
/// draws (Monte Carlo). The exact path never materializes the extension list:
/// it combines prefix counts `g(D)` with completion counts `f(D)`.
pub fn mean_heights(poset: &Poset, mode: HeightMode) -> Result<HeightSummary> {
    match mode {
        HeightMode::Exact => exact_mean_heights(poset),
        HeightMode::MonteCarlo { draws, seed } => {
            if draws == 0 {
                return Err(Error::InvalidConfig(
                    "Monte Carlo heights need draws >= 1".into(),
                ));
            }
            let sampler = ExtensionSampler::new(poset, &SampleConfig::default())?;
            let mut rng = StreamRng::substream(seed, &[rng::tag::MC_HEIGHTS]);
            let n = poset.len();
            let mut sums = vec![0u64; n];
            for _ in 0..draws {
                let le = sampler.draw(&mut rng);
                for (pos, &elem) in le.order().iter().enumerate() {
                    sums[elem] += (pos + 1) as u64;
                }
            }
            let mean: Vec<f64> = sums.iter().map(|&s| s as f64 / draws as f64).collect();
            Ok(summary_from_means(mean, false, draws))
        }
    }
}

fn exact_mean_heights(poset: &Poset) -> Result<HeightSummary> {
    let pred = predecessor_masks(poset)?;
    let n = poset.len();
    let full = (1u32 << n) - 1;
    let mut f = HashMap::new();
    let total = count_from(&pred, full, &mut f, 0);
    f.insert(full, 1);

    // Prefix counts g(D) over reachable downsets, in popcount order.
    let mut masks: Vec<u32> = f.keys().copied().collect();
    masks.sort_unstable_by_key(|m| (m.count_ones(), *m));
    let mut g: HashMap<u32, u64> = HashMap::with_capacity(masks.len());
    g.insert(0, 1);
    let mut position_sum = vec![0u128; n];
    for &downset in &masks {
        let g_d = match g.get(&downset) {
            Some(&v) => v,
            None => continue, // not reachable forward (should not happen)
        };
        let position = downset.count_ones() as u128 + 1;
        for (i, &p) in pred.iter().enumerate() {
            let bit = 1u32 << i;
            if downset & bit == 0 && p & !downset == 0 {
                let child = downset | bit;
                let completions = f.get(&child).copied().unwrap_or(1);
                position_sum[i] += position * g_d as u128 * completions as u128;
                *g.entry(child).or_insert(0) += g_d;
            }
        }
    }
    let mean: Vec<f64> = position_sum
        .iter()
        .map(|&s| s as f64 / total as f64)
        .collect();
    Ok(summary_from_means(mean, true, total))
}

fn summary_from_means(mean: Vec<f64>, exact: bool, count: u64) -> HeightSummary {
    // f64::round is round-half-away-from-zero, which is round-half-up for the
    // positive heights here.
    let rounded = mean.iter().map(|&m| m.round() as usize).collect();
    HeightSummary {
        mean_height: mean,
        rounded_height: rounded,
        exact,
        n_extensions_or_draws: count,
    }
}

/// Knobs for [`ExtensionSampler`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleConfig {
    /// Use the exact counted-recursion path when the extension count is at
    /// most this. Zero forces the Markov chain path.
    pub exact_cutoff: u64,
    /// Chain steps per draw; `None` picks `ceil(m^3 ln m) + 100`.
    pub burn_in: Option<usize>,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self {
            exact_cutoff: DEFAULT_EXACT_CUTOFF,
            burn_in: None,
        }
    }
}

enum SamplerMode {
    Exact {
        completions: HashMap<u32, u64>,
        pred: Vec<u32>,
        total: u64,
    },
    Chain {
        burn_in: usize,
        initial: LinearExtension,
    },
}

/// Uniform sampler over a poset's linear extensions. Construction does the
/// counting work once; draws are then cheap and reusable across a stream.
pub struct ExtensionSampler {
    poset: Poset,
    mode: SamplerMode,
}

impl ExtensionSampler {
    pub fn new(poset: &Poset, config: &SampleConfig) -> Result<Self> {
        let n = poset.len();
        let mode = if config.exact_cutoff > 0 && n <= MAX_EXACT_ELEMENTS {
            let pred = predecessor_masks(poset)?;
            let full = (1u32 << n) - 1;
            let mut completions = HashMap::new();
            let total = count_from(&pred, full, &mut completions, 0);
            completions.insert(full, 1);
            if total <= config.exact_cutoff {
                SamplerMode::Exact {
                    completions,
                    pred,
                    total,
                }
            } else {
                Self::chain_mode(poset, config)
            }
        } else {
            Self::chain_mode(poset, config)
        };
        Ok(Self {
            poset: poset.clone(),
            mode,
        })
    }

    fn chain_mode(poset: &Poset, config: &SampleConfig) -> SamplerMode {
        let m = poset.len();
        let burn_in = config.burn_in.unwrap_or_else(|| {
            let m = m as f64;
            (m.powi(3) * m.ln()).ceil() as usize + 100
        });
        SamplerMode::Chain {
            burn_in,
            initial: greedy_topological_order(poset),
        }
    }

    /// True when draws use the exact counted-recursion path.
    pub fn is_exact(&self) -> bool {
        matches!(self.mode, SamplerMode::Exact { .. })
    }

    /// One uniform draw over all linear extensions.
    pub fn draw(&self, rng: &mut StreamRng) -> LinearExtension {
        match &self.mode {
            SamplerMode::Exact {
                completions,
                pred,
                total,
            } => {
                let n = self.poset.len();
                let full = (1u32 << n) - 1;
                let mut order = Vec::with_capacity(n);
                let mut downset = 0u32;
                let mut index = rng.below(*total);
                while downset != full {
                    for (i, &p) in pred.iter().enumerate() {
                        let bit = 1u32 << i;
                        if downset & bit != 0 || p & !downset != 0 {
                            continue;
                        }
                        let child = downset | bit;
                        let weight = completions.get(&child).copied().unwrap_or(1);
                        if index < weight {
                            order.push(i);
                            downset = child;
                            break;
                        }
                        index -= weight;
                    }
                }
                LinearExtension { order }
            }
            SamplerMode::Chain { burn_in, initial } => {
                let mut order = initial.order.clone();
                let m = order.len();
                for _ in 0..*burn_in {
                    // Lazy chain: hold with probability 1/2, else try one
                    // adjacent transposition.
                    if rng.next_f64() < 0.5 {
                        continue;
                    }
                    let k = rng.below_usize(m - 1);
                    if !self.poset.comparable(order[k], order[k + 1]) {
                        order.swap(k, k + 1);
                    }
                }
                LinearExtension { order }
            }
        }
    }
}

/// One uniform draw with default configuration. Callers drawing repeatedly
/// should build an [`ExtensionSampler`] once instead.
pub fn sample_extension(poset: &Poset, rng: &mut StreamRng) -> Result<LinearExtension> {
    Ok(ExtensionSampler::new(poset, &SampleConfig::default())?.draw(rng))
}

/// Deterministic valid starting extension: repeatedly take the available
/// element with the smallest (indegree, index).
fn greedy_topological_order(poset: &Poset) -> LinearExtension {
    let n = poset.len();
    let static_indegree: Vec<usize> = (0..n).map(|i| poset.indegree(i)).collect();
    let mut remaining: Vec<usize> = static_indegree.clone();
    let mut placed = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for _ in 0..n {
        let pick = (0..n)
            .filter(|&i| !placed[i] && remaining[i] == 0)
            .min_by_key(|&i| (static_indegree[i], i))
            .expect("poset is acyclic");
        placed[pick] = true;
        order.push(pick);
        for j in 0..n {
            if poset.is_below(pick, j) {
                remaining[j] -= 1;
            }
        }
    }
    LinearExtension { order }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poset::{build_poset, SetOfElements, SignFlipMask};

    fn example_poset() -> Poset {
        let set = SetOfElements::new(
            vec![
                crate::poset::ElementVector::new(vec![0.0, 1.0]).unwrap(),
                crate::poset::ElementVector::new(vec![2.0, 1.0]).unwrap(),
                crate::poset::ElementVector::new(vec![1.0, 2.0]).unwrap(),
                crate::poset::ElementVector::new(vec![3.0, 3.0]).unwrap(),
                crate::poset::ElementVector::new(vec![0.0, 4.0]).unwrap(),
            ],
            vec!["a".into(), "b".into(), "c".into(), "d".into(), "e".into()],
        )
        .unwrap();
        build_poset(&set, &SignFlipMask::none(2)).unwrap()
    }

    fn antichain(n: usize) -> Poset {
        Poset::from_relation(n, vec![false; n * n]).unwrap()
    }

    fn chain(n: usize) -> Poset {
        let mut below = vec![false; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                below[i * n + j] = true;
            }
        }
        Poset::from_relation(n, below).unwrap()
    }

    /// The eight extensions of the worked example, bottom-up, as index orders
    /// over a..e = 0..4.
    fn expected_example_extensions() -> Vec<Vec<usize>> {
        vec![
            vec![0, 4, 1, 2, 3], // a e b c d
            vec![0, 1, 4, 2, 3], // a b e c d
            vec![0, 1, 2, 4, 3], // a b c e d
            vec![0, 1, 2, 3, 4], // a b c d e
            vec![0, 4, 2, 1, 3], // a e c b d
            vec![0, 2, 4, 1, 3], // a c e b d
            vec![0, 2, 1, 4, 3], // a c b e d
            vec![0, 2, 1, 3, 4], // a c b d e
        ]
    }

    #[test]
    fn example_has_exactly_eight_extensions() {
        let poset = example_poset();
        let Enumeration::Complete(les) = enumerate_extensions(&poset, 1_000).unwrap() else {
            panic!("cap hit");
        };
        assert_eq!(les.len(), 8);
        let mut got: Vec<Vec<usize>> = les.iter().map(|le| le.order().to_vec()).collect();
        got.sort();
        let mut want = expected_example_extensions();
        want.sort();
        assert_eq!(got, want);
        for le in &les {
            assert!(is_linear_extension(&poset, le));
        }
    }

    #[test]
    fn chain_has_one_extension_and_antichain_has_factorial() {
        let Enumeration::Complete(les) = enumerate_extensions(&chain(6), 10).unwrap() else {
            panic!()
        };
        assert_eq!(les.len(), 1);
        assert_eq!(les[0].order(), &[0, 1, 2, 3, 4, 5]);
        let Enumeration::Complete(les) = enumerate_extensions(&antichain(4), 1_000).unwrap() else {
            panic!()
        };
        assert_eq!(les.len(), 24);
    }

    #[test]
    fn cap_exceeded_returns_signal_not_partial_list() {
        match enumerate_extensions(&antichain(4), 23).unwrap() {
            Enumeration::CapExceeded { cap } => assert_eq!(cap, 23),
            Enumeration::Complete(_) => panic!("expected cap signal"),
        }
    }

    #[test]
    fn count_matches_known_values() {
        assert_eq!(count_extensions(&example_poset()).unwrap(), 8);
        assert_eq!(count_extensions(&antichain(5)).unwrap(), 120);
        assert_eq!(count_extensions(&chain(9)).unwrap(), 1);
    }

    #[test]
    fn count_rejects_oversized_posets() {
        assert!(matches!(
            count_extensions(&antichain(MAX_EXACT_ELEMENTS + 1)),
            Err(Error::PosetTooLarge { .. })
        ));
    }

    #[test]
    fn exact_mean_heights_match_worked_example() {
        let summary = mean_heights(&example_poset(), HeightMode::Exact).unwrap();
        let want = [1.0, 2.875, 2.875, 4.75, 3.5];
        for (got, want) in summary.mean_height.iter().zip(want) {
            assert!((got - want).abs() < 1e-12, "{:?}", summary.mean_height);
        }
        assert_eq!(summary.rounded_height, vec![1, 3, 3, 5, 4]);
        assert!(summary.exact);
        assert_eq!(summary.n_extensions_or_draws, 8);
    }

    #[test]
    fn chain_heights_are_positions() {
        let summary = mean_heights(&chain(7), HeightMode::Exact).unwrap();
        for (i, h) in summary.mean_height.iter().enumerate() {
            assert!((h - (i as f64 + 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_heights_equal_average_over_materialized_list() {
        let poset = example_poset();
        let Enumeration::Complete(les) = enumerate_extensions(&poset, 10_000).unwrap() else {
            panic!()
        };
        let n = poset.len();
        let mut sums = vec![0.0; n];
        for le in &les {
            for (elem, h) in le.heights().into_iter().enumerate() {
                sums[elem] += h as f64;
            }
        }
        let summary = mean_heights(&poset, HeightMode::Exact).unwrap();
        for (s, m) in sums.iter().zip(&summary.mean_height) {
            assert!((s / les.len() as f64 - m).abs() < 1e-12);
        }
    }

    #[test]
    fn sampling_chain_poset_always_returns_unique_extension() {
        let poset = chain(5);
        let mut rng = StreamRng::from_seed(1);
        for _ in 0..20 {
            let le = sample_extension(&poset, &mut rng).unwrap();
            assert_eq!(le.order(), &[0, 1, 2, 3, 4]);
        }
    }

    #[test]
    fn mcmc_draws_are_valid_extensions() {
        let poset = example_poset();
        let sampler = ExtensionSampler::new(
            &poset,
            &SampleConfig {
                exact_cutoff: 0,
                burn_in: None,
            },
        )
        .unwrap();
        assert!(!sampler.is_exact());
        let mut rng = StreamRng::from_seed(9);
        for _ in 0..200 {
            assert!(is_linear_extension(&poset, &sampler.draw(&mut rng)));
        }
    }

    #[test]
    fn monte_carlo_heights_need_draws() {
        let err = mean_heights(&chain(3), HeightMode::MonteCarlo { draws: 0, seed: 1 });
        assert!(err.is_err());
    }
}
