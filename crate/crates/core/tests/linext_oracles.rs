//! Independent oracles for the linear-extension machinery: a brute-force
//! permutation filter for counting, and goodness-of-fit checks for the
//! uniform sampler.

use std::collections::HashMap;

use porss::linext::{
    count_extensions, enumerate_extensions, is_linear_extension, mean_heights, Enumeration,
    ExtensionSampler, HeightMode, LinearExtension, SampleConfig,
};
use porss::poset::Poset;
use porss::rng::StreamRng;

/// Random strict partial order on n elements: a random DAG ordered by a random
/// permutation, then transitive closure.
fn random_poset(n: usize, edge_prob: f64, rng: &mut StreamRng) -> Poset {
    let mut perm: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut perm);
    let mut below = vec![false; n * n];
    for a in 0..n {
        for b in (a + 1)..n {
            if rng.next_f64() < edge_prob {
                below[perm[a] * n + perm[b]] = true;
            }
        }
    }
    // Transitive closure (Floyd-Warshall style).
    for k in 0..n {
        for i in 0..n {
            if below[i * n + k] {
                for j in 0..n {
                    if below[k * n + j] {
                        below[i * n + j] = true;
                    }
                }
            }
        }
    }
    Poset::from_relation(n, below).expect("closure of a DAG is a strict partial order")
}

/// Oracle: count linear extensions by filtering all n! permutations.
fn brute_force_count(poset: &Poset) -> u64 {
    let n = poset.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut count = 0u64;
    permute(&mut perm, 0, &mut |p| {
        let mut position = vec![0usize; n];
        for (pos, &e) in p.iter().enumerate() {
            position[e] = pos;
        }
        let ok = (0..n).all(|i| (0..n).all(|j| !poset.is_below(i, j) || position[i] < position[j]));
        if ok {
            count += 1;
        }
    });
    count
}

fn permute(xs: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == xs.len() {
        visit(xs);
        return;
    }
    for i in k..xs.len() {
        xs.swap(k, i);
        permute(xs, k + 1, visit);
        xs.swap(k, i);
    }
}

#[test]
fn count_matches_brute_force_on_random_posets() {
    let mut rng = StreamRng::from_seed(0xC0FFEE);
    for trial in 0..200 {
        let n = 2 + rng.below_usize(5); // 2..=6
        let edge_prob = rng.next_f64();
        let poset = random_poset(n, edge_prob, &mut rng);
        let fast = count_extensions(&poset).unwrap();
        let slow = brute_force_count(&poset);
        assert_eq!(fast, slow, "trial {trial}, n={n}");
        // Enumeration agrees with the count and every output passes the audit.
        match enumerate_extensions(&poset, 10_000).unwrap() {
            Enumeration::Complete(les) => {
                assert_eq!(les.len() as u64, fast);
                for le in &les {
                    assert!(is_linear_extension(&poset, le));
                }
            }
            Enumeration::CapExceeded { .. } => panic!("6! fits the cap"),
        }
    }
}

#[test]
fn exact_mean_heights_match_materialized_average_on_random_posets() {
    let mut rng = StreamRng::from_seed(0xBEEF);
    for _ in 0..50 {
        let n = 2 + rng.below_usize(6); // 2..=7
        let poset = random_poset(n, rng.next_f64(), &mut rng);
        let Enumeration::Complete(les) = enumerate_extensions(&poset, 100_000).unwrap() else {
            panic!()
        };
        let mut sums = vec![0.0; n];
        for le in &les {
            for (e, h) in le.heights().into_iter().enumerate() {
                sums[e] += h as f64;
            }
        }
        let summary = mean_heights(&poset, HeightMode::Exact).unwrap();
        for (s, m) in sums.iter().zip(&summary.mean_height) {
            assert!((s / les.len() as f64 - m).abs() < 1e-12);
        }
        // Heights over one extension are a permutation of 1..=n, so the means
        // must sum to n(n+1)/2 exactly.
        let total: f64 = summary.mean_height.iter().sum();
        assert!((total - (n * (n + 1)) as f64 / 2.0).abs() < 1e-9);
    }
}

fn chi_square_statistic(counts: &HashMap<Vec<usize>, u64>, draws: u64, categories: u64) -> f64 {
    let expected = draws as f64 / categories as f64;
    let mut stat = (categories as f64 - counts.len() as f64) * expected; // unseen categories
    for &c in counts.values() {
        stat += (c as f64 - expected).powi(2) / expected;
    }
    stat
}

fn table4_poset() -> Poset {
    let set = porss::poset::SetOfElements::from_rows(vec![
        vec![0.0, 1.0],
        vec![2.0, 1.0],
        vec![1.0, 2.0],
        vec![3.0, 3.0],
        vec![0.0, 4.0],
    ])
    .unwrap();
    porss::poset::build_poset(&set, &porss::poset::SignFlipMask::none(2)).unwrap()
}

#[test]
fn exact_sampler_is_uniform_over_the_eight_extensions() {
    let poset = table4_poset();
    let sampler = ExtensionSampler::new(&poset, &SampleConfig::default()).unwrap();
    assert!(sampler.is_exact());
    let mut rng = StreamRng::from_seed(17);
    let draws = 80_000u64;
    let mut counts: HashMap<Vec<usize>, u64> = HashMap::new();
    for _ in 0..draws {
        let le = sampler.draw(&mut rng);
        assert!(is_linear_extension(&poset, &le));
        *counts.entry(le.order().to_vec()).or_insert(0) += 1;
    }
    assert_eq!(counts.len(), 8);
    let stat = chi_square_statistic(&counts, draws, 8);
    // 0.999 quantile of chi-square with 7 degrees of freedom.
    assert!(stat < 24.3219, "chi-square {stat}");
}

#[test]
fn mcmc_sampler_is_uniform_on_the_three_antichain() {
    let poset = Poset::from_relation(3, vec![false; 9]).unwrap();
    let sampler = ExtensionSampler::new(
        &poset,
        &SampleConfig {
            exact_cutoff: 0,
            burn_in: None,
        },
    )
    .unwrap();
    assert!(!sampler.is_exact());
    let mut rng = StreamRng::from_seed(23);
    let draws = 60_000u64;
    let mut counts: HashMap<Vec<usize>, u64> = HashMap::new();
    for _ in 0..draws {
        let le = sampler.draw(&mut rng);
        *counts.entry(le.order().to_vec()).or_insert(0) += 1;
    }
    assert_eq!(counts.len(), 6);
    let stat = chi_square_statistic(&counts, draws, 6);
    // 0.999 quantile of chi-square with 5 degrees of freedom.
    assert!(stat < 20.5150, "chi-square {stat}");
}

#[test]
fn monte_carlo_heights_converge_to_exact() {
    let poset = table4_poset();
    let exact = mean_heights(&poset, HeightMode::Exact).unwrap();
    let draws = 100_000;
    let mc = mean_heights(&poset, HeightMode::MonteCarlo { draws, seed: 99 }).unwrap();
    assert!(!mc.exact);
    assert_eq!(mc.n_extensions_or_draws, draws);
    let bound = 3.0 * poset.len() as f64 / (draws as f64).sqrt();
    for (e, x) in exact.mean_height.iter().zip(&mc.mean_height) {
        assert!((e - x).abs() <= bound, "exact {e}, mc {x}, bound {bound}");
    }
}

#[test]
fn mcmc_respects_poset_order_on_the_worked_example() {
    // Force the chain path on the worked example and check the empirical
    // distribution against the known 8 extensions.
    let poset = table4_poset();
    let sampler = ExtensionSampler::new(
        &poset,
        &SampleConfig {
            exact_cutoff: 0,
            burn_in: None,
        },
    )
    .unwrap();
    let mut rng = StreamRng::from_seed(31);
    let draws = 16_000u64;
    let mut counts: HashMap<Vec<usize>, u64> = HashMap::new();
    for _ in 0..draws {
        let le: LinearExtension = sampler.draw(&mut rng);
        assert!(is_linear_extension(&poset, &le));
        *counts.entry(le.order().to_vec()).or_insert(0) += 1;
    }
    assert_eq!(counts.len(), 8);
    let stat = chi_square_statistic(&counts, draws, 8);
    assert!(stat < 24.3219, "chi-square {stat}");
}
