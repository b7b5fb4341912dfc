use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use smallvec::SmallVec;

use super::block::{chain_to, Block, BlockId, NodeId, GENESIS};
use super::pool::{PoolState, PublicResponse, Release};
use super::trace::{LogKind, LogRecord, RaceEpisode, RawTrace};
use super::tree::{AttachOutcome, BlockTree};
use super::{SimConfig, SimError, MIN_DELAY};

/// Normal samples beyond this many standard deviations are treated as
/// impossible when pruning multi-source releases.
const PRUNE_SIGMAS: f64 = 8.0;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Keep the full event log in the trace.
    pub record_events: bool,
    /// Check every tree after every event. Quadratic; for tests.
    pub check_invariants: bool,
}

/// Replication 0 of `config`.
/// One transmission delay: normal with the given mean and coefficient of
/// variation, floored at [`MIN_DELAY`].
pub fn sample_delay<R: Rng + ?Sized>(mean: f64, cv: f64, rng: &mut R) -> f64 {
    let d = if cv > 0.0 {
        let z: f64 = rng.sample(StandardNormal);
        mean * (1.0 + cv * z)
    } else {
        mean
    };
    d.max(MIN_DELAY)
}

pub fn run(config: &SimConfig) -> Result<RawTrace, SimError> {
    run_replication(config, 0)
}

/// Replication `replication` draws from its own stream of the config's seed.
pub fn run_replication(config: &SimConfig, replication: u64) -> Result<RawTrace, SimError> {
    run_with(config, replication, RunOptions::default())
}

pub fn run_with(
    config: &SimConfig,
    replication: u64,
    options: RunOptions,
) -> Result<RawTrace, SimError> {
    config.validate()?;
    let mut engine = Engine::new(config, replication, options);
    engine.run()?;
    Ok(engine.finish())
}

#[derive(Debug, Clone, Copy)]
enum EventKind {
    Mine,
    Deliver(u32),
}

/// Ordered by time, then by the time the payload was sent (so of two copies
/// arriving at the same instant the older transmission wins), then by
/// creation order.
#[derive(Debug)]
struct Event {
    time: f64,
    sent: f64,
    order: u64,
    kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Event {}
impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Event {
    // Reversed: BinaryHeap is a max-heap.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.sent.total_cmp(&self.sent))
            .then_with(|| other.order.cmp(&self.order))
    }
}

/// Blocks travelling together to a list of destinations, consumed in
/// arrival order by a single cursor event.
struct Broadcast {
    sent: f64,
    blocks: Release,
    arrivals: Vec<(f64, NodeId)>,
    next: usize,
}

struct SyncInspector {
    tip_count: Vec<u32>,
    distinct: u32,
    rivals: u32,
    lost_at: Option<f64>,
    intervals: Vec<(f64, f64)>,
}

impl SyncInspector {
    fn new(n_nodes: usize) -> Self {
        Self {
            tip_count: vec![n_nodes as u32],
            distinct: 1,
            rivals: 0,
            lost_at: None,
            intervals: Vec::new(),
        }
    }

    fn move_tip(&mut self, old: BlockId, new: BlockId) {
        if old == new {
            return;
        }
        self.tip_count[old as usize] -= 1;
        if self.tip_count[old as usize] == 0 {
            self.distinct -= 1;
        }
        let i = new as usize;
        if i >= self.tip_count.len() {
            self.tip_count.resize(i + 1, 0);
        }
        if self.tip_count[i] == 0 {
            self.distinct += 1;
        }
        self.tip_count[i] += 1;
    }

    fn set_rival(&mut self, old: bool, new: bool) {
        match (old, new) {
            (false, true) => self.rivals += 1,
            (true, false) => self.rivals -= 1,
            _ => {}
        }
    }

    fn evaluate(&mut self, now: f64) -> Option<LogKind> {
        let synced = self.distinct == 1 && self.rivals == 0;
        match (self.lost_at, synced) {
            (None, false) => {
                self.lost_at = Some(now);
                Some(LogKind::SyncLost)
            }
            (Some(t), true) => {
                self.intervals.push((t, now));
                self.lost_at = None;
                Some(LogKind::SyncRestored)
            }
            _ => None,
        }
    }
}

const UNDECIDED: u8 = 0;
const CHOSE_POOL: u8 = 1;
const CHOSE_HONEST: u8 = 2;
const EXCLUDED: u8 = 3;

#[derive(Default)]
struct RaceTracker {
    episodes: Vec<RaceEpisode>,
    choices: Vec<Vec<u8>>,
    undecided: Vec<u32>,
    watch: HashMap<BlockId, SmallVec<[u32; 2]>>,
    awaiting_next: Vec<u32>,
}

impl RaceTracker {
    fn open(
        &mut self,
        pool_block: BlockId,
        honest_block: BlockId,
        now: f64,
        trees: &[BlockTree],
        is_pool: &[bool],
        honest_miner: Option<NodeId>,
    ) {
        let e = self.episodes.len() as u32;
        let mut choices = vec![UNDECIDED; trees.len()];
        let (mut eligible, mut chose_pool, mut undecided) = (0, 0, 0);
        for (j, tree) in trees.iter().enumerate() {
            choices[j] = if is_pool[j] || honest_miner == Some(j as NodeId) {
                EXCLUDED
            } else if tree.is_attached(honest_block) {
                CHOSE_HONEST
            } else if tree.is_attached(pool_block) {
                CHOSE_POOL
            } else {
                UNDECIDED
            };
            match choices[j] {
                EXCLUDED => continue,
                CHOSE_POOL => chose_pool += 1,
                UNDECIDED => undecided += 1,
                _ => {}
            }
            eligible += 1;
        }
        self.episodes.push(RaceEpisode {
            pool_block,
            honest_block,
            opened_at: now,
            chose_pool,
            eligible,
            next_extends_pool: None,
        });
        self.undecided.push(undecided);
        self.awaiting_next.push(e);
        if undecided > 0 {
            self.choices.push(choices);
            self.watch.entry(pool_block).or_default().push(e);
            self.watch.entry(honest_block).or_default().push(e);
        } else {
            self.choices.push(Vec::new());
        }
    }

    fn on_attach(&mut self, node: NodeId, block: BlockId) {
        if self.watch.is_empty() {
            return;
        }
        let Some(eps) = self.watch.get(&block).cloned() else {
            return;
        };
        for e in eps {
            let ei = e as usize;
            let slot = &mut self.choices[ei][node as usize];
            if *slot != UNDECIDED {
                continue;
            }
            let episode = &mut self.episodes[ei];
            if block == episode.pool_block {
                *slot = CHOSE_POOL;
                episode.chose_pool += 1;
            } else {
                *slot = CHOSE_HONEST;
            }
            self.undecided[ei] -= 1;
            if self.undecided[ei] == 0 {
                self.choices[ei] = Vec::new();
                for b in [episode.pool_block, episode.honest_block] {
                    if let Some(list) = self.watch.get_mut(&b) {
                        list.retain(|x| *x != e);
                        if list.is_empty() {
                            self.watch.remove(&b);
                        }
                    }
                }
            }
        }
    }

    fn on_mine(&mut self, parent: BlockId) {
        let episodes = &mut self.episodes;
        self.awaiting_next.retain(|&e| {
            let ep = &mut episodes[e as usize];
            if parent == ep.pool_block {
                ep.next_extends_pool = Some(true);
                false
            } else if parent == ep.honest_block {
                ep.next_extends_pool = Some(false);
                false
            } else {
                true
            }
        });
    }
}

struct Engine<'a> {
    config: &'a SimConfig,
    replication: u64,
    options: RunOptions,
    rng: ChaCha8Rng,
    inter_block: Exp<f64>,
    now: f64,
    mined: u32,
    mining_end: f64,
    n: usize,
    /// Mean delay `c * distance`, row-major by sender.
    mean_delay: Vec<f64>,
    positive_delays: bool,
    /// Bounds on the delay from pool slot `s` to honest node `k`, stored at
    /// `s * n_honest + k`.
    release_lower: Vec<f64>,
    release_upper: Vec<f64>,
    is_pool: Vec<bool>,
    pool_members: Vec<NodeId>,
    pool_slot: Vec<u32>,
    honest_nodes: Vec<NodeId>,
    blocks: Vec<Block>,
    trees: Vec<BlockTree>,
    pool: PoolState,
    heap: BinaryHeap<Event>,
    broadcasts: Vec<Broadcast>,
    /// Transit times to each pool member of honest blocks the pool has not
    /// reacted to yet.
    pending: HashMap<BlockId, Vec<f64>>,
    inspector: SyncInspector,
    splits: Vec<u32>,
    races: RaceTracker,
    log: Option<Vec<LogRecord>>,
}

impl<'a> Engine<'a> {
    fn new(config: &'a SimConfig, replication: u64, options: RunOptions) -> Self {
        let n = config.n_nodes;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(replication);
        let positions: Vec<(f64, f64)> = (0..n)
            .map(|_| {
                let x = rng.random::<f64>() * config.area_side;
                let y = rng.random::<f64>() * config.area_side;
                (x, y)
            })
            .collect();
        let mut order: Vec<NodeId> = (0..n as NodeId).collect();
        order.shuffle(&mut rng);
        let mut pool_members = order[..config.pool_size()].to_vec();
        pool_members.sort_unstable();
        let mut is_pool = vec![false; n];
        let mut pool_slot = vec![u32::MAX; n];
        for (slot, &m) in pool_members.iter().enumerate() {
            is_pool[m as usize] = true;
            pool_slot[m as usize] = slot as u32;
        }
        let honest_nodes: Vec<NodeId> =
            (0..n as NodeId).filter(|&j| !is_pool[j as usize]).collect();
        let slope = config.delay_slope();
        let mut mean_delay = vec![0.0; n * n];
        for (i, &(xi, yi)) in positions.iter().enumerate() {
            for (j, &(xj, yj)) in positions.iter().enumerate() {
                mean_delay[i * n + j] = slope * (xi - xj).hypot(yi - yj);
            }
        }
        let floor = if slope > 0.0 { MIN_DELAY } else { 0.0 };
        let lo = (1.0 - PRUNE_SIGMAS * config.cv).max(0.0);
        let hi = 1.0 + PRUNE_SIGMAS * config.cv;
        let (mut release_lower, mut release_upper) = (Vec::new(), Vec::new());
        for &m in &pool_members {
            for &j in &honest_nodes {
                let mean: f64 = mean_delay[m as usize * n + j as usize];
                release_lower.push((lo * mean).max(floor));
                release_upper.push((hi * mean).max(floor));
            }
        }
        let log = options.record_events.then(Vec::new);
        Self {
            config,
            replication,
            options,
            rng,
            inter_block: Exp::new(config.block_rate / 3600.0).expect("validated positive rate"),
            now: 0.0,
            mined: 0,
            mining_end: 0.0,
            n,
            mean_delay,
            positive_delays: slope > 0.0,
            release_lower,
            release_upper,
            is_pool,
            pool_members,
            pool_slot,
            honest_nodes,
            blocks: vec![Block::genesis()],
            trees: vec![BlockTree::new(); n],
            pool: PoolState::new(config.runaway_cap),
            heap: BinaryHeap::new(),
            broadcasts: Vec::new(),
            pending: HashMap::new(),
            inspector: SyncInspector::new(n),
            splits: vec![0; n],
            races: RaceTracker::default(),
            log,
        }
    }

    fn schedule_mine(&mut self, time: f64) {
        self.heap.push(Event {
            time,
            sent: time,
            order: u64::MAX,
            kind: EventKind::Mine,
        });
    }

    fn schedule_delivery(&mut self, idx: u32) {
        let b = &self.broadcasts[idx as usize];
        self.heap.push(Event {
            time: b.arrivals[b.next].0,
            sent: b.sent,
            order: u64::from(idx),
            kind: EventKind::Deliver(idx),
        });
    }

    fn record(&mut self, kind: LogKind, node: Option<NodeId>, block: Option<BlockId>) {
        if let Some(log) = &mut self.log {
            let parent = block.and_then(|b| self.blocks[b as usize].parent);
            log.push(LogRecord {
                time: self.now,
                kind,
                node,
                block,
                parent,
            });
        }
    }

    fn sample_delay(&mut self, from: NodeId, to: NodeId) -> f64 {
        let mean = self.mean_delay[from as usize * self.n + to as usize];
        if !self.positive_delays {
            return 0.0;
        }
        sample_delay(mean, self.config.cv, &mut self.rng)
    }

    fn run(&mut self) -> Result<(), SimError> {
        let first = self.inter_block.sample(&mut self.rng);
        self.schedule_mine(first);
        while let Some(event) = self.heap.pop() {
            self.now = event.time;
            match event.kind {
                EventKind::Mine => self.mine()?,
                EventKind::Deliver(b) => self.deliver(b)?,
            }
            if self.options.check_invariants {
                self.check_trees()?;
            }
        }
        Ok(())
    }

    fn check_trees(&self) -> Result<(), SimError> {
        for (j, tree) in self.trees.iter().enumerate() {
            tree.check(&self.blocks)
                .map_err(|e| SimError::Invariant(format!("node {j} at t={}: {e}", self.now)))?;
        }
        Ok(())
    }

    fn mine(&mut self) -> Result<(), SimError> {
        self.mined += 1;
        self.mining_end = self.now;
        let node = self.rng.random_range(0..self.n) as NodeId;
        let pool_origin = self.is_pool[node as usize];
        let parent = if pool_origin {
            self.pool.tip
        } else {
            self.trees[node as usize].main_tip()
        };
        let id = self.blocks.len() as BlockId;
        let height = self.blocks[parent as usize].height + 1;
        self.blocks.push(Block {
            id,
            parent: Some(parent),
            height,
            miner: Some(node),
            mined_at: self.now,
            pool_origin,
            published_at: (!pool_origin).then_some(self.now),
        });
        self.record(LogKind::Mine, Some(node), Some(id));
        self.races.on_mine(parent);

        if pool_origin {
            for k in 0..self.pool_members.len() {
                let member = self.pool_members[k];
                self.attach(member, id)?;
            }
            let release = self.pool.on_secret_mine(id, height);
            if !release.is_empty() {
                self.publish_from(node, release);
            }
        } else {
            self.attach(node, id)?;
            self.broadcast_honest(node, id);
        }

        if self.mined < self.config.n_blocks {
            let next = self.now + self.inter_block.sample(&mut self.rng);
            self.schedule_mine(next);
        }
        Ok(())
    }

    fn push_broadcast(&mut self, blocks: Release, mut arrivals: Vec<(f64, NodeId)>) {
        if arrivals.is_empty() {
            return;
        }
        arrivals.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let idx = self.broadcasts.len() as u32;
        self.broadcasts.push(Broadcast {
            sent: self.now,
            blocks,
            arrivals,
            next: 0,
        });
        self.schedule_delivery(idx);
    }

    fn broadcast_honest(&mut self, src: NodeId, id: BlockId) {
        let mut arrivals = Vec::with_capacity(self.n - 1);
        let mut pool_times = vec![f64::INFINITY; self.pool_members.len()];
        for j in 0..self.n as NodeId {
            if j == src {
                continue;
            }
            let delay = self.sample_delay(src, j);
            arrivals.push((self.now + delay, j));
            let slot = self.pool_slot[j as usize];
            if slot != u32::MAX {
                pool_times[slot as usize] = delay;
            }
        }
        if !pool_times.is_empty() {
            self.pending.insert(id, pool_times);
        }
        self.push_broadcast(SmallVec::from_slice(&[id]), arrivals);
    }

    fn mark_published(&mut self, release: &[BlockId], src: Option<NodeId>) {
        for &b in release {
            self.blocks[b as usize].published_at = Some(self.now);
            self.record(LogKind::Publish, src, Some(b));
        }
    }

    /// Pool blocks sent by one member; the batch shares one delay per
    /// destination.
    fn publish_from(&mut self, src: NodeId, release: Release) {
        self.mark_published(&release, Some(src));
        let mut arrivals = Vec::with_capacity(self.honest_nodes.len());
        for k in 0..self.honest_nodes.len() {
            let j = self.honest_nodes[k];
            let t = self.now + self.sample_delay(src, j);
            arrivals.push((t, j));
        }
        self.push_broadcast(release, arrivals);
    }

    /// Every pool member forwards the batch once it has itself seen the
    /// public block `x` that prompted it; an honest node keeps the earliest
    /// copy. `transit` holds the delays of `x` to each member. Arrival times
    /// are summed relative to the mining time of `x`, the same base as the
    /// direct copies of `x`, so that rounding cannot reverse the order the
    /// triangle inequality imposes.
    fn publish_from_all(&mut self, release: Release, x: BlockId, transit: &[f64]) {
        self.mark_published(&release, None);
        let base = self.blocks[x as usize].mined_at;
        let waited = self.now - base;
        let nh = self.honest_nodes.len();
        let mut best = vec![f64::INFINITY; nh];
        for (slot, &t) in transit.iter().enumerate() {
            let rel = t.max(waited);
            let row = &self.release_upper[slot * nh..(slot + 1) * nh];
            for (b, &u) in best.iter_mut().zip(row) {
                *b = b.min(rel + u);
            }
        }
        if self.config.cv > 0.0 && self.positive_delays {
            // `best` now holds an upper bound; sample only the members whose
            // lower bound can beat it.
            let upper = std::mem::replace(&mut best, vec![f64::INFINITY; nh]);
            for (slot, &t) in transit.iter().enumerate() {
                let rel = t.max(waited);
                let m = self.pool_members[slot];
                for k in 0..nh {
                    if rel + self.release_lower[slot * nh + k] <= upper[k] {
                        let d = rel + self.sample_delay(m, self.honest_nodes[k]);
                        best[k] = best[k].min(d);
                    }
                }
            }
        }
        let arrivals = best
            .iter()
            .zip(&self.honest_nodes)
            .map(|(&b, &j)| (base + b, j))
            .collect();
        self.push_broadcast(release, arrivals);
    }

    fn deliver(&mut self, idx: u32) -> Result<(), SimError> {
        let b = &mut self.broadcasts[idx as usize];
        let (_, node) = b.arrivals[b.next];
        b.next += 1;
        let blocks = b.blocks.clone();
        if b.next < b.arrivals.len() {
            self.schedule_delivery(idx);
        } else {
            b.arrivals = Vec::new();
        }
        for id in blocks {
            self.attach(node, id)?;
        }
        Ok(())
    }

    fn attach(&mut self, node: NodeId, id: BlockId) -> Result<(), SimError> {
        let j = node as usize;
        let old_tip = self.trees[j].main_tip();
        let old_rival = self.trees[j].has_rival();
        let batch = self.trees[j].attach(&self.blocks, id)?;
        for a in &batch {
            let kind = match a.outcome {
                AttachOutcome::Duplicate => LogKind::Duplicate,
                AttachOutcome::ExtendedMain => LogKind::Extend,
                AttachOutcome::SideBranch => LogKind::Side,
                AttachOutcome::Reorg { .. } => LogKind::Reorg,
                AttachOutcome::Detached => LogKind::Detached,
            };
            self.record(kind, Some(node), Some(a.block));
            if a.split {
                self.splits[j] += 1;
            }
            if a.outcome.is_attached() {
                self.races.on_attach(node, a.block);
                if self.is_pool[j] && !self.blocks[a.block as usize].pool_origin {
                    self.pool_hears(a.block);
                }
            }
        }
        let new_tip = self.trees[j].main_tip();
        let new_rival = self.trees[j].has_rival();
        self.inspector.move_tip(old_tip, new_tip);
        self.inspector.set_rival(old_rival, new_rival);
        if let Some(kind) = self.inspector.evaluate(self.now) {
            self.record(kind, None, None);
        }
        Ok(())
    }

    /// First attachment of a public block anywhere in the pool.
    fn pool_hears(&mut self, x: BlockId) {
        let Some(transit) = self.pending.remove(&x) else {
            return;
        };
        let height = self.blocks[x as usize].height;
        let Some(response) = self.pool.on_public_block(x, height) else {
            return;
        };
        match response {
            PublicResponse::Adopt { .. } => {}
            PublicResponse::Race {
                release,
                pool_block,
            } => {
                self.publish_from_all(release, x, &transit);
                self.record(LogKind::Race, None, Some(pool_block));
                let honest_miner = self.blocks[x as usize].miner;
                self.races.open(
                    pool_block,
                    x,
                    self.now,
                    &self.trees,
                    &self.is_pool,
                    honest_miner,
                );
            }
            PublicResponse::CashIn { release } | PublicResponse::Match { release } => {
                if !release.is_empty() {
                    self.publish_from_all(release, x, &transit);
                }
            }
        }
    }

    fn finish(self) -> RawTrace {
        let final_tips: Vec<BlockId> = self.trees.iter().map(BlockTree::main_tip).collect();
        let reference = self
            .honest_nodes
            .first()
            .map_or(GENESIS, |&j| final_tips[j as usize]);
        let final_main = chain_to(&self.blocks, reference);
        let unpublished = self
            .blocks
            .iter()
            .filter(|b| b.published_at.is_none())
            .map(|b| b.id)
            .collect();
        RawTrace {
            config: *self.config,
            replication: self.replication,
            pool_members: self.pool_members,
            splits_per_node: self.splits,
            dwell_intervals: self.inspector.intervals,
            races: self.races.episodes,
            final_tips,
            final_main,
            unpublished,
            mining_end: self.mining_end,
            end_time: self.now,
            events: self.log,
            blocks: self.blocks,
        }
    }
}
