//! The three stratified designs built from a stream of ranked sets.
//!
//! * MVSR sorts each set by one leading variable; the h-th order statistic of
//!   every set lands in stratum h, carrying its full variable vector along
//!   (concomitant semantics). Strata have equal size K.
//! * CPOR puts each element into the stratum equal to the round-half-up of its
//!   mean height over all linear extensions of its set's poset. Stratum sizes
//!   K_h are random and may be zero.
//! * RPOR draws one uniform linear extension per set and uses its positions as
//!   strata. Strata have equal size K.
//!
//! All randomness comes from substreams derived from the config seed, so a
//! build is bit-reproducible and sets may be processed in parallel without
//! changing the result.

use serde::{Deserialize, Serialize};

use crate::linext::{
    count_extensions, mean_heights, ExtensionSampler, HeightMode, HeightSummary, SampleConfig,
    DEFAULT_EXACT_CUTOFF, MAX_EXACT_ELEMENTS,
};
use crate::poset::{build_poset, ElementVector, SetOfElements, SignFlipMask};
use crate::rng::{tag, StreamRng};
use crate::{Error, Result};

/// Which stratified design produced a population.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum DesignKind {
    Mvsr,
    Cpor,
    Rpor,
}

impl std::fmt::Display for DesignKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            DesignKind::Mvsr => "MVSR",
            DesignKind::Cpor => "CPOR",
            DesignKind::Rpor => "RPOR",
        };
        f.write_str(s)
    }
}

/// One stratified element: the values used for ranking, the values being
/// estimated, and provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedRecord {
    pub ranking_values: ElementVector,
    pub target_values: ElementVector,
    /// 1-based index of the originating set.
    pub set_index: usize,
    /// 1-based stratum.
    pub stratum: usize,
    /// Mean height over all linear extensions; present iff built by CPOR.
    pub mean_height: Option<f64>,
}

/// A stratified population of ranked records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratifiedPopulation {
    pub design: DesignKind,
    /// `strata[h]` holds stratum h+1.
    pub strata: Vec<Vec<RankedRecord>>,
    /// Number of sets (K).
    pub replications: usize,
    /// Original column indices of the ranking variables.
    pub ranking_columns: Vec<usize>,
    /// Original column indices of the estimated variables.
    pub target_columns: Vec<usize>,
}

impl StratifiedPopulation {
    pub fn m(&self) -> usize {
        self.strata.len()
    }

    pub fn stratum_sizes(&self) -> Vec<usize> {
        self.strata.iter().map(|s| s.len()).collect()
    }

    pub fn total_size(&self) -> usize {
        self.strata.iter().map(|s| s.len()).sum()
    }
}

/// Configuration of one design build.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignConfig {
    /// Set size.
    pub m: usize,
    /// Sets per design (K).
    pub replications: usize,
    /// Per-stratum sample size for MVSR/RPOR; CPOR spreads the total `n * m`
    /// proportionally.
    pub per_stratum_n: usize,
    pub design: DesignKind,
    /// Variable columns used for ordering (the poset, or the MVSR sort key).
    pub ranking_columns: Vec<usize>,
    /// Variable columns being estimated.
    pub target_columns: Vec<usize>,
    /// Full-width sign-flip mask; affects comparisons only, never the stored
    /// values.
    pub sign_flips: SignFlipMask,
    pub seed: u64,
}

impl DesignConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return Err(Error::InvalidConfig(format!(
                "m must be at least 2, got {}",
                self.m
            )));
        }
        if self.per_stratum_n < 1 || self.per_stratum_n >= self.replications {
            return Err(Error::InvalidConfig(format!(
                "need 1 <= n < K, got n={} K={}",
                self.per_stratum_n, self.replications
            )));
        }
        if self.ranking_columns.is_empty() {
            return Err(Error::InvalidConfig("no ranking columns".into()));
        }
        if self.target_columns.is_empty() {
            return Err(Error::InvalidConfig("no target columns".into()));
        }
        Ok(())
    }

    fn check_sets(&self, sets: &[SetOfElements]) -> Result<()> {
        self.validate()?;
        if sets.len() != self.replications {
            return Err(Error::InvalidConfig(format!(
                "expected K={} sets, got {}",
                self.replications,
                sets.len()
            )));
        }
        for set in sets {
            if set.len() != self.m {
                return Err(Error::InvalidConfig(format!(
                    "set size {} does not match m={}",
                    set.len(),
                    self.m
                )));
            }
            let r = set.n_variables();
            if self.sign_flips.len() != r {
                return Err(Error::MaskLength {
                    mask: self.sign_flips.len(),
                    expected: r,
                });
            }
            for &c in self.ranking_columns.iter().chain(&self.target_columns) {
                if c >= r {
                    return Err(Error::InvalidConfig(format!(
                        "column {c} out of range (R={r})"
                    )));
                }
            }
        }
        Ok(())
    }

    fn record(
        &self,
        element: &ElementVector,
        set_index: usize,
        stratum: usize,
    ) -> Result<RankedRecord> {
        Ok(RankedRecord {
            ranking_values: element.project(&self.ranking_columns)?,
            target_values: element.project(&self.target_columns)?,
            set_index,
            stratum,
            mean_height: None,
        })
    }
}

/// Per-stratum sample sizes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Allocation {
    pub per_stratum: Vec<usize>,
}

impl Allocation {
    pub fn total(&self) -> usize {
        self.per_stratum.iter().sum()
    }

    pub fn uniform(m: usize, n: usize) -> Self {
        Self {
            per_stratum: vec![n; m],
        }
    }
}

/// MVSR: sort each set ascending by the single ranking column; ties are broken
/// uniformly at random from the seeded stream.
pub fn build_mvsr(sets: &[SetOfElements], cfg: &DesignConfig) -> Result<StratifiedPopulation> {
    cfg.check_sets(sets)?;
    if cfg.ranking_columns.len() != 1 {
        return Err(Error::InvalidConfig(format!(
            "MVSR ranks on exactly one column, got {}",
            cfg.ranking_columns.len()
        )));
    }
    let rank_col = cfg.ranking_columns[0];
    let mut strata = vec![Vec::with_capacity(sets.len()); cfg.m];
    for (k, set) in sets.iter().enumerate() {
        let set_index = k + 1;
        let mut rng = StreamRng::substream(cfg.seed, &[tag::MVSR_TIES, set_index as u64]);
        let mut keyed: Vec<(f64, u64, usize)> = set
            .elements()
            .iter()
            .enumerate()
            .map(|(i, e)| (e[rank_col], rng.next_u64(), i))
            .collect();
        keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for (pos, &(_, _, i)) in keyed.iter().enumerate() {
            let stratum = pos + 1;
            strata[pos].push(cfg.record(&set.elements()[i], set_index, stratum)?);
        }
    }
    Ok(StratifiedPopulation {
        design: DesignKind::Mvsr,
        strata,
        replications: sets.len(),
        ranking_columns: cfg.ranking_columns.clone(),
        target_columns: cfg.target_columns.clone(),
    })
}

/// How CPOR mean heights are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeightPolicy {
    /// Exact heights when the per-set extension count is at most this.
    pub exact_cutoff: u64,
    /// Monte Carlo draws above the cutoff.
    pub mc_draws: u64,
}

impl Default for HeightPolicy {
    fn default() -> Self {
        Self {
            exact_cutoff: DEFAULT_EXACT_CUTOFF,
            mc_draws: 2_000,
        }
    }
}

/// Mean heights of every set's ranking poset, exact under the policy cutoff
/// and Monte Carlo above it. The Monte Carlo seed is a per-set substream of
/// the config seed.
pub fn compute_set_heights(
    sets: &[SetOfElements],
    cfg: &DesignConfig,
    policy: &HeightPolicy,
) -> Result<Vec<HeightSummary>> {
    cfg.check_sets(sets)?;
    let mask = cfg.sign_flips.project(&cfg.ranking_columns)?;
    sets.iter()
        .enumerate()
        .map(|(k, set)| {
            let projected = set.project(&cfg.ranking_columns)?;
            let poset = build_poset(&projected, &mask)?;
            let exact_ok = poset.len() <= MAX_EXACT_ELEMENTS
                && count_extensions(&poset)? <= policy.exact_cutoff;
            let mode = if exact_ok {
                HeightMode::Exact
            } else {
                HeightMode::MonteCarlo {
                    draws: policy.mc_draws,
                    seed: StreamRng::derive_seed(cfg.seed, &[tag::MC_HEIGHTS, (k + 1) as u64]),
                }
            };
            mean_heights(&poset, mode)
        })
        .collect()
}

/// CPOR: element goes to the stratum equal to its rounded mean height.
pub fn build_cpor(
    sets: &[SetOfElements],
    cfg: &DesignConfig,
    heights: &[HeightSummary],
) -> Result<StratifiedPopulation> {
    cfg.check_sets(sets)?;
    if heights.len() != sets.len() {
        return Err(Error::HeightMismatch(format!(
            "{} summaries for {} sets",
            heights.len(),
            sets.len()
        )));
    }
    let mut strata = vec![Vec::new(); cfg.m];
    for (k, (set, summary)) in sets.iter().zip(heights).enumerate() {
        let set_index = k + 1;
        if summary.rounded_height.len() != set.len() {
            return Err(Error::HeightMismatch(format!(
                "set {set_index} has {} elements but {} heights",
                set.len(),
                summary.rounded_height.len()
            )));
        }
        for (i, element) in set.elements().iter().enumerate() {
            let stratum = summary.rounded_height[i];
            if stratum < 1 || stratum > cfg.m {
                return Err(Error::HeightMismatch(format!(
                    "rounded height {stratum} outside 1..={}",
                    cfg.m
                )));
            }
            let mut record = cfg.record(element, set_index, stratum)?;
            record.mean_height = Some(summary.mean_height[i]);
            strata[stratum - 1].push(record);
        }
    }
    Ok(StratifiedPopulation {
        design: DesignKind::Cpor,
        strata,
        replications: sets.len(),
        ranking_columns: cfg.ranking_columns.clone(),
        target_columns: cfg.target_columns.clone(),
    })
}

/// RPOR: one uniform linear extension per set; position h becomes stratum h.
pub fn build_rpor(sets: &[SetOfElements], cfg: &DesignConfig) -> Result<StratifiedPopulation> {
    build_rpor_with(sets, cfg, &SampleConfig::default())
}

/// [`build_rpor`] with explicit sampler knobs.
pub fn build_rpor_with(
    sets: &[SetOfElements],
    cfg: &DesignConfig,
    sample_cfg: &SampleConfig,
) -> Result<StratifiedPopulation> {
    cfg.check_sets(sets)?;
    let mask = cfg.sign_flips.project(&cfg.ranking_columns)?;
    let mut strata = vec![Vec::with_capacity(sets.len()); cfg.m];
    for (k, set) in sets.iter().enumerate() {
        let set_index = k + 1;
        let projected = set.project(&cfg.ranking_columns)?;
        let poset = build_poset(&projected, &mask)?;
        let sampler = ExtensionSampler::new(&poset, sample_cfg)?;
        let mut rng = StreamRng::substream(cfg.seed, &[tag::RPOR_LE, set_index as u64]);
        let extension = sampler.draw(&mut rng);
        for (pos, &element_idx) in extension.order().iter().enumerate() {
            let stratum = pos + 1;
            strata[pos].push(cfg.record(&set.elements()[element_idx], set_index, stratum)?);
        }
    }
    Ok(StratifiedPopulation {
        design: DesignKind::Rpor,
        strata,
        replications: sets.len(),
        ranking_columns: cfg.ranking_columns.clone(),
        target_columns: cfg.target_columns.clone(),
    })
}

/// Largest-remainder apportionment of `total` proportional to `stratum_sizes`,
/// then a deterministic repair pass enforcing `n_h >= 1` on non-empty strata
/// and `n_h <= K_h` everywhere.
pub fn allocate_proportional(stratum_sizes: &[usize], total: usize) -> Result<Allocation> {
    let available: usize = stratum_sizes.iter().sum();
    if total > available {
        return Err(Error::AllocationInfeasible { total, available });
    }
    let m = stratum_sizes.len();
    let mut alloc = vec![0usize; m];
    if total == 0 {
        return Ok(Allocation { per_stratum: alloc });
    }
    // Hamilton step: floors plus largest remainders.
    let mut remainders: Vec<(f64, usize)> = Vec::with_capacity(m);
    let mut assigned = 0usize;
    for (h, &size) in stratum_sizes.iter().enumerate() {
        let quota = total as f64 * size as f64 / available as f64;
        let floor = quota.floor() as usize;
        alloc[h] = floor;
        assigned += floor;
        remainders.push((quota - floor as f64, h));
    }
    // Ties by lowest stratum index.
    remainders.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut leftover = total - assigned;
    for &(_, h) in remainders.iter().cycle() {
        if leftover == 0 {
            break;
        }
        if stratum_sizes[h] > 0 && alloc[h] < stratum_sizes[h] {
            alloc[h] += 1;
            leftover -= 1;
        }
    }

    // Repair loop: cap at K_h, then lift zero allocations on non-empty strata,
    // taking from the currently largest allocations with slack.
    let nonempty: usize = stratum_sizes.iter().filter(|&&s| s > 0).count();
    if total < nonempty {
        return Err(Error::InvalidConfig(format!(
            "total {total} cannot give {nonempty} non-empty strata one sample each"
        )));
    }
    loop {
        let mut changed = false;
        for h in 0..m {
            if alloc[h] > stratum_sizes[h] {
                let excess = alloc[h] - stratum_sizes[h];
                alloc[h] = stratum_sizes[h];
                let mut to_place = excess;
                // Give to strata with headroom, largest remainder first.
                for &(_, g) in &remainders {
                    if to_place == 0 {
                        break;
                    }
                    let headroom = stratum_sizes[g].saturating_sub(alloc[g]);
                    let add = headroom.min(to_place);
                    alloc[g] += add;
                    to_place -= add;
                }
                changed = true;
            }
        }
        for h in 0..m {
            if stratum_sizes[h] > 0 && alloc[h] == 0 {
                // Take one from the largest allocation that can spare it.
                let donor = (0..m)
                    .filter(|&g| alloc[g] >= 2)
                    .max_by_key(|&g| (alloc[g], std::cmp::Reverse(g)));
                match donor {
                    Some(g) => {
                        alloc[g] -= 1;
                        alloc[h] = 1;
                        changed = true;
                    }
                    None => {
                        return Err(Error::InvalidConfig(
                            "no feasible allocation satisfies the minimum-one rule".into(),
                        ))
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    debug_assert_eq!(alloc.iter().sum::<usize>(), total);
    Ok(Allocation { per_stratum: alloc })
}

/// SRSWOR of size `n_h` from one stratum: every subset equiprobable.
pub fn draw_srswor(
    stratum: &[RankedRecord],
    n_h: usize,
    rng: &mut StreamRng,
) -> Result<Vec<RankedRecord>> {
    if n_h > stratum.len() {
        return Err(Error::SampleTooLarge {
            requested: n_h,
            available: stratum.len(),
        });
    }
    let mut indices: Vec<usize> = (0..stratum.len()).collect();
    rng.partial_shuffle(&mut indices, n_h);
    Ok(indices[..n_h].iter().map(|&i| stratum[i].clone()).collect())
}

/// Draw the whole stratified sample, one SRSWOR per stratum, each from its own
/// substream of `seed`.
pub fn draw_stratified_sample(
    population: &StratifiedPopulation,
    allocation: &Allocation,
    seed: u64,
) -> Result<Vec<Vec<RankedRecord>>> {
    if allocation.per_stratum.len() != population.m() {
        return Err(Error::DesignMismatch(format!(
            "allocation covers {} strata, population has {}",
            allocation.per_stratum.len(),
            population.m()
        )));
    }
    population
        .strata
        .iter()
        .zip(&allocation.per_stratum)
        .enumerate()
        .map(|(h, (stratum, &n_h))| {
            let mut rng = StreamRng::substream(seed, &[tag::SRSWOR, (h + 1) as u64]);
            draw_srswor(stratum, n_h, &mut rng)
        })
        .collect()
}
