use forkdyn::sim::{
    chain_to, run, run_replication, run_with, sample_delay, write_event_log, BlockId, LogKind,
    RawTrace, RunOptions, SimConfig, MIN_DELAY,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small(pool_fraction: f64, cv: f64) -> SimConfig {
    SimConfig {
        n_nodes: 60,
        n_blocks: 400,
        pool_fraction,
        cv,
        ..SimConfig::default()
    }
}

const CHECKED: RunOptions = RunOptions {
    record_events: false,
    check_invariants: true,
};

#[test]
fn identical_seeds_give_identical_traces() {
    let c = small(0.3, 0.01);
    let opts = RunOptions {
        record_events: true,
        check_invariants: false,
    };
    assert_eq!(
        run_with(&c, 2, opts).unwrap(),
        run_with(&c, 2, opts).unwrap()
    );
    assert_ne!(
        run_replication(&c, 0).unwrap().blocks,
        run_replication(&c, 1).unwrap().blocks
    );
}

#[test]
fn zero_delay_honest_chain_has_every_block() {
    let c = SimConfig {
        n_nodes: 50,
        n_blocks: 500,
        mean_delay_target: 0.0,
        ..SimConfig::default()
    };
    let t = run_with(&c, 0, CHECKED).unwrap();
    assert_eq!(t.final_main.len(), 501);
    assert!(t.splits_per_node.iter().all(|&s| s == 0));
    assert!(t.dwell_intervals.iter().all(|(a, b)| a == b));
}

#[test]
fn two_nodes_without_delay() {
    let c = SimConfig {
        n_nodes: 2,
        n_blocks: 50,
        mean_delay_target: 0.0,
        ..SimConfig::default()
    };
    let t = run(&c).unwrap();
    assert_eq!(t.final_main.len(), 51);
    assert_eq!(t.end_time, t.mining_end);
}

/// After the drain every honest node holds the same tip height, and their
/// main branches differ at most in an unresolved tie at the very top.
fn assert_drained_consensus(t: &RawTrace) {
    let honest: Vec<_> = (0..t.config.n_nodes as u32)
        .filter(|&j| !t.is_pool(j))
        .collect();
    assert_eq!(t.main_branch_of(honest[0]), t.final_main);
    let height = t.final_main.len();
    let mut tips = std::collections::BTreeSet::new();
    for &j in &honest {
        let chain = t.main_branch_of(j);
        assert_eq!(chain.len(), height, "node {j}");
        tips.insert(*chain.last().unwrap());
    }
    if tips.len() > 1 {
        // Competing tips share a parent chain once the tie is cut off.
        let prefixes: std::collections::BTreeSet<Vec<BlockId>> = honest
            .iter()
            .map(|&j| {
                let chain = t.main_branch_of(j);
                let fork = chain
                    .iter()
                    .zip(&t.final_main)
                    .take_while(|(a, b)| a == b)
                    .count();
                chain[..fork].to_vec()
            })
            .collect();
        let shortest = prefixes.iter().map(Vec::len).min().unwrap();
        assert!(prefixes
            .iter()
            .all(|p| p[..shortest] == t.final_main[..shortest]));
    }
}

#[test]
fn honest_nodes_agree_after_the_drain() {
    let mut ties = 0;
    for (alpha, cv) in [(0.0, 0.0), (0.0, 0.1), (0.3, 0.01), (0.5, 0.001)] {
        for rep in 0..4 {
            let c = SimConfig {
                mean_delay_target: 60.0,
                ..small(alpha, cv)
            };
            let t = run_with(&c, rep, CHECKED).unwrap();
            assert_drained_consensus(&t);
            let honest_tips: std::collections::BTreeSet<_> = (0..c.n_nodes as u32)
                .filter(|&j| !t.is_pool(j))
                .map(|j| t.final_tips[j as usize])
                .collect();
            ties += usize::from(honest_tips.len() > 1);
        }
    }
    // A tie at the very end is possible but should be rare.
    assert!(ties <= 4, "{ties} unresolved ties");
}

#[test]
fn every_block_is_main_orphaned_or_withheld() {
    let c = small(0.4, 0.01);
    let t = run(&c).unwrap();
    assert_eq!(t.blocks.len(), c.n_blocks as usize + 1);
    let on_main: std::collections::HashSet<_> = t.final_main.iter().copied().collect();
    let mut orphans = 0;
    for b in &t.blocks[1..] {
        if t.unpublished.contains(&b.id) {
            assert!(b.pool_origin && b.published_at.is_none() && !on_main.contains(&b.id));
        } else if !on_main.contains(&b.id) {
            orphans += 1;
        }
    }
    assert_eq!(
        t.final_main.len() - 1 + orphans + t.unpublished.len(),
        c.n_blocks as usize
    );
    assert_eq!(
        chain_to(&t.blocks, *t.final_main.last().unwrap()),
        t.final_main
    );
}

#[test]
fn pool_wins_its_share_of_mining_events() {
    let c = SimConfig {
        n_nodes: 100,
        n_blocks: 10_000,
        pool_fraction: 0.3,
        mean_delay_target: 1.0,
        cv: 0.01,
        ..SimConfig::default()
    };
    let t = run(&c).unwrap();
    let n = f64::from(c.n_blocks);
    let pool = t.blocks[1..].iter().filter(|b| b.pool_origin).count() as f64;
    let sd = (0.3 * 0.7 / n).sqrt();
    assert!((pool / n - 0.3).abs() < 3.0 * sd, "{}", pool / n);
    assert_eq!(t.pool_members.len(), 30);
}

#[test]
fn mining_events_average_ten_minutes() {
    let c = SimConfig {
        n_nodes: 10,
        n_blocks: 10_000,
        mean_delay_target: 0.0,
        ..SimConfig::default()
    };
    let t = run(&c).unwrap();
    let mean = t.mining_end / f64::from(c.n_blocks);
    // Exponential gaps: standard error 600 / sqrt(n) = 6 s.
    assert!((mean - 600.0).abs() < 18.0, "{mean}");
}

#[test]
fn delay_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    assert_eq!(sample_delay(7.25, 0.0, &mut rng), 7.25);
    assert_eq!(sample_delay(0.0, 0.0, &mut rng), MIN_DELAY);
    assert_eq!(sample_delay(0.0, 0.5, &mut rng), MIN_DELAY);
    let n = 100_000;
    // sd is 0.01 s, so +-0.01 is one sigma and +-0.03 three.
    for (half, p) in [(0.01, 0.682_689), (0.03, 0.997_300)] {
        let inside = (0..n)
            .filter(|_| (10.0 - half..=10.0 + half).contains(&sample_delay(10.0, 0.001, &mut rng)))
            .count() as f64
            / n as f64;
        let sd = (p * (1.0 - p) / n as f64).sqrt();
        assert!((inside - p).abs() < 4.0 * sd, "+-{half}: {inside}");
    }
}

#[test]
fn no_pool_block_wins_a_race_without_jitter() {
    for alpha in [0.1, 0.3, 0.5] {
        let c = SimConfig {
            n_nodes: 100,
            n_blocks: 2000,
            ..small(alpha, 0.0)
        };
        let t = run(&c).unwrap();
        assert!(!t.races.is_empty());
        assert!(t.races.iter().all(|r| r.chose_pool == 0), "alpha {alpha}");
    }
}

#[test]
fn event_log_format() {
    let c = SimConfig {
        n_nodes: 5,
        n_blocks: 3,
        ..SimConfig::default()
    };
    let t = run_with(
        &c,
        0,
        RunOptions {
            record_events: true,
            check_invariants: false,
        },
    )
    .unwrap();
    let events = t.events.unwrap();
    assert_eq!(events.iter().filter(|e| e.kind == LogKind::Mine).count(), 3);
    let mut buf = Vec::new();
    write_event_log(&events, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("time\tkind\tnode\tblock\tparent"));
    let first: Vec<&str> = lines.next().unwrap().split('\t').collect();
    assert_eq!(first.len(), 5);
    assert_eq!(first[1], "mine");
    assert_eq!(first[4], "0");
    assert_eq!(first[0].split('.').nth(1).map(str::len), Some(6));
    assert!(text.lines().count() == events.len() + 1);
}

#[test]
fn invalid_configs_are_rejected() {
    assert!(run(&SimConfig {
        n_nodes: 1,
        ..SimConfig::default()
    })
    .is_err());
    assert!(run(&SimConfig {
        pool_fraction: 0.7,
        ..SimConfig::default()
    })
    .is_err());
    assert!(run(&SimConfig {
        n_blocks: 0,
        ..SimConfig::default()
    })
    .is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn trees_stay_well_formed(
        seed in 0u64..1000,
        alpha in 0.0f64..0.5,
        cv in prop::sample::select(vec![0.0, 0.001, 0.05, 0.3]),
        delay in prop::sample::select(vec![0.0, 5.0, 60.0, 600.0]),
        cap in 1usize..6,
    ) {
        let c = SimConfig {
            n_nodes: 16,
            n_blocks: 120,
            pool_fraction: alpha,
            cv,
            mean_delay_target: delay,
            seed,
            runaway_cap: cap,
            ..SimConfig::default()
        };
        let t = run_with(&c, 0, CHECKED).unwrap();
        assert_drained_consensus(&t);
        for r in &t.races {
            prop_assert!(r.chose_pool <= r.eligible);
        }
        for w in t.dwell_intervals.windows(2) {
            prop_assert!(w[0].1 <= w[1].0);
        }
    }
}
