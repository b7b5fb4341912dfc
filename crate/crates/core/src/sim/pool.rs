use smallvec::SmallVec;

use super::block::{BlockId, GENESIS};

pub type Release = SmallVec<[BlockId; 2]>;

/// Shared selfish-mine state of the pool. `secret` holds the pool's
/// unpublished blocks in chain order; `n_p` counts published pool blocks as
/// part of the public chain.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolState {
    pub tip: BlockId,
    pub n_s: u32,
    pub n_p: u32,
    pub race: bool,
    pub secret: Vec<BlockId>,
    pub runaway_cap: usize,
}

/// Reaction to a public block that raised the public height.
#[derive(Debug, Clone, PartialEq)]
pub enum PublicResponse {
    /// The community is ahead; the pool abandons its secret blocks.
    Adopt { abandoned: Vec<BlockId> },
    /// Equal lengths: the pool publishes and races.
    Race {
        release: Release,
        pool_block: BlockId,
    },
    /// Lead of one: everything is published and the pool wins.
    CashIn { release: Release },
    /// Lead of two or more: one block is released to match the community.
    Match { release: Release },
}

impl PublicResponse {
    pub fn release(&self) -> &[BlockId] {
        match self {
            PublicResponse::Adopt { .. } => &[],
            PublicResponse::Race { release, .. }
            | PublicResponse::CashIn { release }
            | PublicResponse::Match { release } => release,
        }
    }
}

impl PoolState {
    pub fn new(runaway_cap: usize) -> Self {
        Self {
            tip: GENESIS,
            n_s: 0,
            n_p: 0,
            race: false,
            secret: Vec::new(),
            runaway_cap,
        }
    }

    pub fn lead(&self) -> i64 {
        i64::from(self.n_s) - i64::from(self.n_p)
    }

    /// The pool mined `block` on top of `tip`. Returns the blocks to publish.
    pub fn on_secret_mine(&mut self, block: BlockId, height: u32) -> Release {
        debug_assert_eq!(height, self.n_s + 1);
        self.tip = block;
        self.n_s = height;
        let mut out = Release::new();
        if self.race {
            out.extend(self.secret.drain(..));
            out.push(block);
            self.race = false;
            self.n_p = self.n_p.max(height);
        } else {
            self.secret.push(block);
            if self.secret.len() > self.runaway_cap {
                out.push(self.secret.remove(0));
                self.n_p = self.n_p.max(height - self.secret.len() as u32);
            }
        }
        out
    }

    /// A public block of height `height` reached the pool. Returns `None`
    /// when it does not lengthen the public chain.
    pub fn on_public_block(&mut self, block: BlockId, height: u32) -> Option<PublicResponse> {
        if height <= self.n_p {
            return None;
        }
        self.n_p = height;
        let response = match self.lead() {
            d if d < 0 => {
                self.tip = block;
                self.n_s = height;
                self.race = false;
                PublicResponse::Adopt {
                    abandoned: std::mem::take(&mut self.secret),
                }
            }
            0 => {
                let release: Release = self.secret.drain(..).collect();
                match release.last() {
                    Some(&pool_block) => {
                        self.race = true;
                        PublicResponse::Race {
                            release,
                            pool_block,
                        }
                    }
                    // Nothing withheld at equal height: plain adoption of
                    // the community block would change nothing either.
                    None => PublicResponse::CashIn { release },
                }
            }
            1 => {
                self.race = false;
                self.n_p = self.n_s;
                PublicResponse::CashIn {
                    release: self.secret.drain(..).collect(),
                }
            }
            _ => {
                let mut release = Release::new();
                if !self.secret.is_empty() {
                    let first = self.secret.remove(0);
                    release.push(first);
                }
                PublicResponse::Match { release }
            }
        };
        Some(response)
    }
}
