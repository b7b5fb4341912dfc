use forkdyn::chain_model::{
    attacker_success_probability, binomial, build_generator, closed_form_pi, count_lattice_paths,
    grand_dyck_count, normalized_closed_form, orphan_rate, selfish_threshold, solve_stationary,
    welsh_count, AttackParams, ChainModelError, ChainRates, ForkState, PathTable, Variant,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn table_rates() -> ChainRates {
    ChainRates::new(0.6, 5.4, 285.0).unwrap()
}

/// Counts by walking every step sequence of length `k + l` ending at `(k, l)`.
fn brute_force(k: u32, l: u32) -> Vec<u128> {
    let len = k + l;
    let mut counts = vec![0u128; k.min(l) as usize + 1];
    for bits in 0u32..(1 << len) {
        if bits.count_ones() != k {
            continue;
        }
        let (mut x, mut y, mut touches) = (0, 0, 0usize);
        for step in 0..len {
            if bits >> step & 1 == 1 {
                x += 1;
            } else {
                y += 1;
            }
            if x == y {
                touches += 1;
            }
        }
        counts[touches] += 1;
    }
    counts
}

#[test]
fn paths_match_enumeration() {
    for n in 1..=12u32 {
        for k in 0..=n {
            let l = n - k;
            let brute = brute_force(k, l);
            for (i, &want) in brute.iter().enumerate() {
                assert_eq!(
                    count_lattice_paths(k, l, i as u32).unwrap(),
                    want,
                    "n({k},{l};{i})"
                );
            }
        }
    }
}

#[test]
fn paths_partition_all_paths() {
    let table = PathTable::new(10, 10).unwrap();
    for k in 0..=10 {
        for l in 0..=10 - k {
            let total: u128 = (0..=k.min(l)).map(|i| table.count(k, l, i)).sum();
            assert_eq!(total, binomial(k + l, k), "({k},{l})");
        }
    }
}

#[test]
fn closed_forms_agree_with_recursion() {
    let table = PathTable::new(12, 12).unwrap();
    for k in 0..=12u32 {
        for l in 0..=12 - k {
            for i in 0..=k.min(l) {
                let rec = table.count(k, l, i);
                if k == l {
                    if i > 0 {
                        assert_eq!(grand_dyck_count(k, i).unwrap(), rec, "T({k},{i})");
                    }
                } else {
                    assert_eq!(welsh_count(k, l, i).unwrap(), rec, "n({k},{l};{i})");
                }
            }
        }
    }
}

#[test]
fn diagonal_counts_sum_to_central_binomial() {
    for k in 1..=30 {
        let total: u128 = (1..=k).map(|i| grand_dyck_count(k, i).unwrap()).sum();
        assert_eq!(total, binomial(2 * k, k));
    }
}

#[test]
fn large_counts_stay_exact() {
    assert_eq!(binomial(64, 32), 1_832_624_140_942_590_534);
    assert!(count_lattice_paths(30, 30, 31).unwrap() == 0);
    assert!(count_lattice_paths(32, 32, 0).unwrap() == 0);
    assert!(count_lattice_paths(33, 32, 0).is_err());
}

#[test]
fn closed_form_matches_large_truncation() {
    let rates = table_rates();
    let numeric = solve_stationary(&build_generator(rates, Variant::Honest, 40).unwrap()).unwrap();
    let closed = normalized_closed_form(&rates, 40);
    for (s, p) in &numeric.probabilities {
        assert!((p - closed.get(s.k, s.l)).abs() < 1e-8, "{s}");
    }
}

#[test]
fn honest_ratio_of_tied_to_single_fork() {
    // pi(1,1) / pi(0,1) = 2 lambda1 / (lambda1 + lambda2) in the closed form.
    let r = table_rates();
    let ratio = closed_form_pi(&r, 1, 1) / closed_form_pi(&r, 0, 1);
    assert!((ratio - 0.2).abs() < 1e-14);
}

#[test]
fn stationary_tables_at_truncation_six() {
    let rates = table_rates();
    let honest = solve_stationary(&build_generator(rates, Variant::Honest, 6).unwrap()).unwrap();
    let selfish = solve_stationary(&build_generator(rates, Variant::Selfish, 6).unwrap()).unwrap();
    assert!((honest.total() - 1.0).abs() < 1e-12);
    assert!((selfish.total() - 1.0).abs() < 1e-12);
    assert!((orphan_rate(&honest, &rates) - 0.022).abs() < 5e-4);
    assert!((orphan_rate(&selfish, &rates) - 0.4494).abs() < 5e-4);
    // The selfish pool holds its lead, so (1,0) gets far more mass.
    assert!(selfish.get(1, 0) > 10.0 * honest.get(1, 0));
}

#[test]
fn reducible_chain_is_rejected() {
    let gen = build_generator(table_rates(), Variant::Honest, 4).unwrap();
    let cut = gen.without_transition(ForkState::AGREED, ForkState::new(1, 0));
    assert_eq!(
        solve_stationary(&cut),
        Err(ChainModelError::Reducible(ForkState::new(1, 0)))
    );
}

#[test]
fn invalid_rates_and_truncation() {
    assert!(matches!(
        ChainRates::new(6.0, 5.4, 1.0),
        Err(ChainModelError::InvalidRates(_))
    ));
    assert!(matches!(
        ChainRates::new(0.6, 5.4, 0.0),
        Err(ChainModelError::InvalidRates(_))
    ));
    assert!(matches!(
        build_generator(table_rates(), Variant::Honest, 1),
        Err(ChainModelError::Truncation(1))
    ));
}

#[test]
fn threshold_values() {
    assert!((selfish_threshold(0.0).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    assert!((selfish_threshold(0.5).unwrap() - 0.25).abs() < 1e-15);
    assert_eq!(selfish_threshold(1.0).unwrap(), 0.0);
    assert!(selfish_threshold(1.5).is_err());
}

#[test]
fn attacker_success_reference_values() {
    // One confirmation: the attacker wins outright with 1 - p, or after
    // falling behind by one, with p (1 - p) / p.
    let p = |z, p| attacker_success_probability(&AttackParams::new(z, p).unwrap());
    assert!((p(1, 0.9) - 0.2).abs() < 1e-14);
    assert!((p(1, 0.75) - 0.5).abs() < 1e-14);
    assert_eq!(p(0, 0.9), 1.0);
}

fn simulate_attack(z: u32, p: f64, rng: &mut ChaCha8Rng) -> bool {
    let (mut honest, mut attacker) = (0, 0i64);
    while honest < z {
        if rng.random_bool(p) {
            honest += 1;
        } else {
            attacker += 1;
        }
    }
    let mut deficit = i64::from(z) - attacker;
    while deficit > 0 && deficit < 200 {
        deficit += if rng.random_bool(p) { 1 } else { -1 };
    }
    deficit <= 0
}

#[test]
fn attacker_success_matches_simulation() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let n = 100_000;
    for (z, p) in [(2, 0.6), (4, 0.75), (6, 0.9)] {
        let exact = attacker_success_probability(&AttackParams::new(z, p).unwrap());
        let est = (0..n).filter(|_| simulate_attack(z, p, &mut rng)).count() as f64 / n as f64;
        let se = (exact * (1.0 - exact) / n as f64)
            .sqrt()
            .max(1.0 / n as f64);
        assert!(
            (est - exact).abs() < 4.0 * se,
            "z={z} p={p}: {est} vs {exact}"
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn attacker_success_is_monotone(z in 1u32..30, p in 0.51f64..0.99) {
        let at = |z, p| attacker_success_probability(&AttackParams::new(z, p).unwrap());
        let here = at(z, p);
        prop_assert!((0.0..=1.0).contains(&here));
        prop_assert!(at(z + 1, p) <= here + 1e-12);
        prop_assert!(at(z, (p + 0.005).min(0.995)) <= here + 1e-12);
    }

    #[test]
    fn threshold_decreases_in_gamma(g in 0.0f64..0.99) {
        let a = selfish_threshold(g).unwrap();
        let b = selfish_threshold(g + 0.01).unwrap();
        prop_assert!(b < a);
        prop_assert!((0.0..=1.0 / 3.0 + 1e-15).contains(&a));
    }

    #[test]
    fn closed_form_balances(l1 in 0.1f64..3.0, extra in 0.1f64..10.0, mu in 50.0f64..500.0) {
        let rates = ChainRates::new(l1, l1 + extra, mu).unwrap();
        let numeric = solve_stationary(&build_generator(rates, Variant::Honest, 40).unwrap()).unwrap();
        let closed = normalized_closed_form(&rates, 40);
        prop_assume!(numeric.tail_mass(30) < 1e-12);
        for (s, p) in &numeric.probabilities {
            prop_assert!((p - closed.get(s.k, s.l)).abs() < 1e-9, "{}", s);
        }
    }

    #[test]
    fn stationary_is_a_distribution(
        l1 in 0.1f64..3.0,
        extra in 0.1f64..10.0,
        mu in 1.0f64..500.0,
        n in 2u32..12,
        selfish in any::<bool>(),
    ) {
        let rates = ChainRates::new(l1, l1 + extra, mu).unwrap();
        let variant = if selfish { Variant::Selfish } else { Variant::Honest };
        let gen = build_generator(rates, variant, n).unwrap();
        let pi = solve_stationary(&gen).unwrap();
        prop_assert!((pi.total() - 1.0).abs() < 1e-10);
        prop_assert!(pi.probabilities.values().all(|&p| p >= 0.0));
        prop_assert!(pi.residual(&gen) < 1e-9);
    }
}
