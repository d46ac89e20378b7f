//! Encounter rates `k_ij`, stored as blocks so that complete and bipartite
//! contact patterns sample in O(1) without enumerating edges.

use rand::Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use super::population::Population;
use crate::error::{Error, Result};

/// What a pair encounter re-splits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Channel {
    /// Goods and money (exchange within an economy).
    Full,
    /// Money only (financial contact).
    Money,
    /// Goods only.
    Goods,
}

impl Channel {
    pub fn moves_money(self) -> bool {
        matches!(self, Channel::Full | Channel::Money)
    }

    pub fn moves_goods(self) -> bool {
        matches!(self, Channel::Full | Channel::Goods)
    }
}

#[derive(Debug, Clone)]
pub enum Pattern {
    /// Every unordered pair within `start..start+len`.
    Complete { start: usize, len: usize },
    /// Every pair with one agent in each range.
    Bipartite { a: (usize, usize), b: (usize, usize) },
    /// Explicit edges with individual rates.
    Edges { edges: Vec<(usize, usize)>, alias: WeightedAliasIndex<f64> },
}

#[derive(Debug, Clone)]
pub struct Block {
    pub pattern: Pattern,
    pub channel: Channel,
    /// Sum of `k_ij` over the block's pairs.
    pub total_rate: f64,
    /// Economies joined by a contact block, for later removal.
    pub contact: Option<(usize, usize)>,
}

impl Block {
    fn pairs(&self) -> f64 {
        match &self.pattern {
            Pattern::Complete { len, .. } => (*len * len.saturating_sub(1) / 2) as f64,
            Pattern::Bipartite { a, b } => (a.1 * b.1) as f64,
            Pattern::Edges { edges, .. } => edges.len() as f64,
        }
    }

    #[inline]
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, usize) {
        match &self.pattern {
            Pattern::Complete { start, len } => {
                let i = rng.random_range(0..*len);
                let mut j = rng.random_range(0..*len - 1);
                if j >= i {
                    j += 1;
                }
                (start + i, start + j)
            }
            Pattern::Bipartite { a, b } => (a.0 + rng.random_range(0..a.1), b.0 + rng.random_range(0..b.1)),
            Pattern::Edges { edges, alias } => edges[alias.sample(rng)],
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct EncounterGraph {
    blocks: Vec<Block>,
    cumulative: Vec<f64>,
}

impl EncounterGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Complete graph inside each economy with per-pair rate `rate`.
    pub fn complete_within_each(pop: &Population, rate: f64) -> Result<Self> {
        let mut g = Self::new();
        for e in 0..pop.n_economies() {
            g.add_complete(pop, e, rate)?;
        }
        Ok(g)
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    fn push(&mut self, block: Block) -> Result<()> {
        if !(block.total_rate > 0.0) || !block.total_rate.is_finite() {
            return Err(Error::InvalidParameter("encounter rates must be positive".into()));
        }
        self.blocks.push(block);
        self.rebuild();
        Ok(())
    }

    fn rebuild(&mut self) {
        let mut acc = 0.0;
        self.cumulative = self
            .blocks
            .iter()
            .map(|b| {
                acc += b.total_rate;
                acc
            })
            .collect();
    }

    pub fn add_complete(&mut self, pop: &Population, economy: usize, rate: f64) -> Result<()> {
        let s = pop.economies[economy];
        if s.len < 2 {
            return Err(Error::InvalidParameter("an economy needs at least two agents".into()));
        }
        let mut b = Block {
            pattern: Pattern::Complete { start: s.start, len: s.len },
            channel: Channel::Full,
            total_rate: 0.0,
            contact: None,
        };
        b.total_rate = rate * b.pairs();
        self.push(b)
    }

    /// Explicit edges inside one economy (exchange channel).
    pub fn add_edges(&mut self, edges: Vec<(usize, usize)>, rates: Vec<f64>, channel: Channel) -> Result<()> {
        if edges.len() != rates.len() || edges.is_empty() {
            return Err(Error::InvalidParameter("edges and rates must be non-empty and aligned".into()));
        }
        if edges.iter().any(|(i, j)| i == j) {
            return Err(Error::InvalidParameter("self-edges are not allowed".into()));
        }
        let total_rate = rates.iter().sum();
        let alias = WeightedAliasIndex::new(rates).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        self.push(Block { pattern: Pattern::Edges { edges, alias }, channel, total_rate, contact: None })
    }

    /// Contact between economies `a` and `b`: every cross pair at rate `rate`.
    pub fn connect(&mut self, pop: &Population, a: usize, b: usize, rate: f64, channel: Channel) -> Result<()> {
        if a == b {
            return Err(Error::InvalidParameter("contact needs two distinct economies".into()));
        }
        let (sa, sb) = (pop.economies[a], pop.economies[b]);
        let mut blk = Block {
            pattern: Pattern::Bipartite { a: (sa.start, sa.len), b: (sb.start, sb.len) },
            channel,
            total_rate: 0.0,
            contact: Some((a.min(b), a.max(b))),
        };
        blk.total_rate = rate * blk.pairs();
        self.push(blk)
    }

    /// Removes every contact block between `a` and `b`; returns how many.
    pub fn disconnect(&mut self, a: usize, b: usize) -> usize {
        let key = Some((a.min(b), a.max(b)));
        let before = self.blocks.len();
        self.blocks.retain(|blk| blk.contact != key);
        self.rebuild();
        before - self.blocks.len()
    }

    pub fn is_connected_pair(&self, a: usize, b: usize) -> bool {
        let key = Some((a.min(b), a.max(b)));
        self.blocks.iter().any(|blk| blk.contact == key)
    }

    pub fn total_rate(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, usize, Channel) {
        let b = if self.blocks.len() == 1 {
            0
        } else {
            let u = rng.random::<f64>() * self.total_rate();
            self.cumulative.partition_point(|c| *c <= u).min(self.blocks.len() - 1)
        };
        let blk = &self.blocks[b];
        let (i, j) = blk.sample(rng);
        (i, j, blk.channel)
    }

    /// Component labels of the agents under the channels selected by `keep`.
    pub fn components<F: Fn(Channel) -> bool>(&self, n_agents: usize, keep: F) -> Vec<usize> {
        let mut uf = UnionFind::new(n_agents);
        for blk in self.blocks.iter().filter(|b| keep(b.channel)) {
            match &blk.pattern {
                Pattern::Complete { start, len } => {
                    for i in 1..*len {
                        uf.union(*start, start + i);
                    }
                }
                Pattern::Bipartite { a, b } => {
                    for i in 0..a.1 {
                        uf.union(a.0, a.0 + i);
                    }
                    for j in 0..b.1 {
                        uf.union(a.0, b.0 + j);
                    }
                }
                Pattern::Edges { edges, .. } => {
                    for (i, j) in edges {
                        uf.union(*i, *j);
                    }
                }
            }
        }
        (0..n_agents).map(|i| uf.find(i)).collect()
    }

    /// Each economy's exchange graph must connect all of its agents.
    pub fn validate(&self, pop: &Population) -> Result<()> {
        if self.blocks.is_empty() {
            return Err(Error::Disconnected);
        }
        for blk in &self.blocks {
            let max = match &blk.pattern {
                Pattern::Complete { start, len } => start + len,
                Pattern::Bipartite { a, b } => (a.0 + a.1).max(b.0 + b.1),
                Pattern::Edges { edges, .. } => edges.iter().map(|(i, j)| i.max(j) + 1).max().unwrap_or(0),
            };
            if max > pop.n_agents() {
                return Err(Error::InvalidParameter("edge refers to an unknown agent".into()));
            }
            if let Pattern::Edges { edges, .. } = &blk.pattern {
                if blk.channel == Channel::Full && edges.iter().any(|(i, j)| pop.owner(*i) != pop.owner(*j)) {
                    return Err(Error::InvalidParameter("exchange edges must stay inside one economy".into()));
                }
            }
        }
        let comp = self.components(pop.n_agents(), |c| c == Channel::Full);
        for e in 0..pop.n_economies() {
            let r = pop.agents(e);
            let root = comp[r.start];
            if r.clone().any(|i| comp[i] != root) {
                return Err(Error::Disconnected);
            }
        }
        Ok(())
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}
