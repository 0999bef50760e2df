//! Explicit block DAGs and the chain, acceptability, contest and destruction
//! rules evaluated over them.
//!
//! A chain is any root-to-leaf path that follows references. Heights are the
//! longest distance from the root. The canonical chain is a maximum-height
//! chain; which one is decided by a caller-supplied selector, since the
//! tie-break depends on who heard what first.

mod fixture;

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};

pub type BlockId = usize;
pub type BlockSet = BTreeSet<BlockId>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Creator {
    Genesis,
    Selfish,
    Honest,
}

impl Creator {
    fn as_str(self) -> &'static str {
        match self {
            Creator::Genesis => "genesis",
            Creator::Selfish => "selfish",
            Creator::Honest => "honest",
        }
    }
}

impl fmt::Display for Creator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub name: String,
    pub creator: Creator,
    pub whale: bool,
    /// Referenced blocks, first reference first.
    pub parents: Vec<BlockId>,
}

/// Block DAG with a single root at index 0. Blocks only reference earlier
/// blocks, so index order is a topological order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockDag {
    blocks: Vec<Block>,
    heights: Vec<u32>,
    children: Vec<Vec<BlockId>>,
}

impl BlockDag {
    pub fn new(root_name: impl Into<String>) -> Self {
        Self {
            blocks: vec![Block {
                name: root_name.into(),
                creator: Creator::Genesis,
                whale: false,
                parents: Vec::new(),
            }],
            heights: vec![0],
            children: vec![Vec::new()],
        }
    }

    pub fn root(&self) -> BlockId {
        0
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn block(&self, id: BlockId) -> &Block {
        &self.blocks[id]
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn height(&self, id: BlockId) -> u32 {
        self.heights[id]
    }

    pub fn children(&self, id: BlockId) -> &[BlockId] {
        &self.children[id]
    }

    pub fn find(&self, name: &str) -> Option<BlockId> {
        self.blocks.iter().position(|b| b.name == name)
    }

    pub fn names(&self, set: &BlockSet) -> BTreeSet<String> {
        set.iter().map(|&b| self.blocks[b].name.clone()).collect()
    }

    /// Blocks nobody references.
    pub fn leaves(&self) -> Vec<BlockId> {
        (0..self.len())
            .filter(|&b| self.children[b].is_empty())
            .collect()
    }

    /// True when `ancestor` is reachable from `block` by following references.
    pub fn is_ancestor(&self, ancestor: BlockId, block: BlockId) -> bool {
        if ancestor >= block {
            return false;
        }
        let mut seen = vec![false; block + 1];
        let mut stack = vec![block];
        while let Some(b) = stack.pop() {
            for &p in &self.blocks[b].parents {
                if p == ancestor {
                    return true;
                }
                if p > ancestor && !seen[p] {
                    seen[p] = true;
                    stack.push(p);
                }
            }
        }
        false
    }

    /// Appends a block. References must exist and must be valid per
    /// [`validate_references`].
    pub fn add_block(
        &mut self,
        name: impl Into<String>,
        creator: Creator,
        whale: bool,
        parents: Vec<BlockId>,
    ) -> Result<BlockId> {
        let name = name.into();
        if parents.is_empty() {
            return Err(Error::InvalidParams(format!(
                "block {name} has no references"
            )));
        }
        if !validate_references(self, &parents)? {
            return Err(Error::InvalidParams(format!(
                "block {name} references a block together with its ancestor"
            )));
        }
        let id = self.blocks.len();
        let height = parents
            .iter()
            .map(|&p| self.heights[p])
            .max()
            .expect("non-empty")
            + 1;
        for &p in &parents {
            self.children[p].push(id);
        }
        self.blocks.push(Block {
            name,
            creator,
            whale,
            parents,
        });
        self.heights.push(height);
        self.children.push(Vec::new());
        Ok(id)
    }

    pub fn max_height(&self) -> u32 {
        self.heights.iter().copied().max().unwrap_or(0)
    }
}

/// A root-to-leaf chain through the DAG.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainView {
    /// Blocks from the root to the tip.
    pub blocks: Vec<BlockId>,
    /// Height of each block, aligned with `blocks`.
    pub heights: Vec<u32>,
    on_chain: Vec<bool>,
}

impl ChainView {
    fn new(dag: &BlockDag, blocks: Vec<BlockId>) -> Self {
        let mut on_chain = vec![false; dag.len()];
        for &b in &blocks {
            on_chain[b] = true;
        }
        let heights = blocks.iter().map(|&b| dag.height(b)).collect();
        Self {
            blocks,
            heights,
            on_chain,
        }
    }

    pub fn contains(&self, block: BlockId) -> bool {
        self.on_chain.get(block).copied().unwrap_or(false)
    }

    pub fn tip(&self) -> BlockId {
        *self.blocks.last().expect("chain includes the root")
    }

    /// Number of blocks including the root.
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }
}

/// Whether a new block may carry `refs`: every reference exists and none is
/// an ancestor of another (or repeated).
pub fn validate_references(dag: &BlockDag, refs: &[BlockId]) -> Result<bool> {
    if let Some(&bad) = refs.iter().find(|&&r| r >= dag.len()) {
        return Err(Error::UnknownBlock(bad.to_string()));
    }
    for (i, &a) in refs.iter().enumerate() {
        for &b in &refs[i + 1..] {
            if a == b || dag.is_ancestor(a, b) || dag.is_ancestor(b, a) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Maximum-height chain. `select` picks among candidates whenever more than
/// one exists: first among the maximum-height tips, then, walking back, among
/// the references exactly one height lower. Candidates are listed in block
/// order for tips and in reference order for parents.
pub fn canonical_chain<F>(dag: &BlockDag, mut select: F) -> ChainView
where
    F: FnMut(&BlockDag, &[BlockId]) -> BlockId,
{
    let top = dag.max_height();
    let tips: Vec<BlockId> = (0..dag.len()).filter(|&b| dag.height(b) == top).collect();
    let mut current = if tips.len() == 1 {
        tips[0]
    } else {
        select(dag, &tips)
    };
    let mut chain = vec![current];
    while current != dag.root() {
        let h = dag.height(current);
        let candidates: Vec<BlockId> = dag
            .block(current)
            .parents
            .iter()
            .copied()
            .filter(|&p| dag.height(p) + 1 == h)
            .collect();
        current = if candidates.len() == 1 {
            candidates[0]
        } else {
            select(dag, &candidates)
        };
        chain.push(current);
    }
    chain.reverse();
    ChainView::new(dag, chain)
}

/// Canonical chain preferring the earliest tip and the first reference.
pub fn canonical_chain_first(dag: &BlockDag) -> ChainView {
    canonical_chain(dag, |_, candidates| candidates[0])
}

/// Blocks on some root-to-leaf chain whose symmetric difference with
/// `canonical` has at most `fork_sensitivity` blocks.
pub fn acceptable_blocks(dag: &BlockDag, canonical: &ChainView, fork_sensitivity: u32) -> BlockSet {
    // Weight +1 off the canonical chain and -1 on it: the symmetric
    // difference of path P is |C| + sum of weights over P.
    let weight = |b: BlockId| if canonical.contains(b) { -1i64 } else { 1 };
    let n = dag.len();
    let mut from_root = vec![i64::MAX; n];
    from_root[dag.root()] = weight(dag.root());
    for b in 1..n {
        let best = dag
            .block(b)
            .parents
            .iter()
            .map(|&p| from_root[p])
            .min()
            .expect("has parents");
        from_root[b] = best + weight(b);
    }
    let mut to_leaf = vec![i64::MAX; n];
    for b in (0..n).rev() {
        let best = dag
            .children(b)
            .iter()
            .map(|&c| to_leaf[c])
            .min()
            .unwrap_or(0);
        to_leaf[b] = best + weight(b);
    }
    let base = canonical.len() as i64;
    (0..n)
        .filter(|&b| base + from_root[b] + to_leaf[b] - weight(b) <= i64::from(fork_sensitivity))
        .collect()
}

/// Acceptable blocks that are the only acceptable block at their height.
pub fn uncontested_blocks(dag: &BlockDag, acceptable: &BlockSet) -> BlockSet {
    let mut count = vec![0u32; dag.max_height() as usize + 1];
    for &b in acceptable {
        count[dag.height(b) as usize] += 1;
    }
    acceptable
        .iter()
        .copied()
        .filter(|&b| count[dag.height(b) as usize] == 1)
        .collect()
}

/// Canonical blocks left out by some other chain as long as the canonical one.
pub fn destructed_blocks(dag: &BlockDag, canonical: &ChainView) -> BlockSet {
    let target = dag.max_height();
    let mut destructed = BlockSet::new();
    let mut longest = vec![0u32; dag.len()];
    for &x in canonical.blocks.iter().skip(1) {
        // Longest root path avoiding x; blocks reachable only through x are cut.
        let mut reach = vec![false; dag.len()];
        reach[dag.root()] = true;
        let mut best = 0;
        for b in 1..dag.len() {
            if b == x {
                continue;
            }
            let parents = dag.block(b).parents.iter().filter(|&&p| reach[p]);
            if let Some(h) = parents.map(|&p| longest[p]).max() {
                reach[b] = true;
                longest[b] = h + 1;
                best = best.max(longest[b]);
            }
        }
        if best == target {
            destructed.insert(x);
        }
    }
    destructed
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_chain(n: usize) -> BlockDag {
        let mut dag = BlockDag::new("G");
        for i in 1..=n {
            dag.add_block(format!("B{i}"), Creator::Honest, false, vec![i - 1])
                .unwrap();
        }
        dag
    }

    #[test]
    fn single_chain_is_canonical_and_uncontested() {
        let dag = single_chain(4);
        let chain = canonical_chain_first(&dag);
        assert_eq!(chain.blocks, vec![0, 1, 2, 3, 4]);
        assert_eq!(chain.heights, vec![0, 1, 2, 3, 4]);
        let acc = acceptable_blocks(&dag, &chain, 0);
        assert_eq!(acc.len(), 5);
        assert_eq!(uncontested_blocks(&dag, &acc), acc);
        assert!(destructed_blocks(&dag, &chain).is_empty());
    }

    #[test]
    fn references_to_a_block_and_its_ancestor_are_invalid() {
        let dag = single_chain(3);
        assert!(!validate_references(&dag, &[2, 3]).unwrap());
        assert!(validate_references(&dag, &[0]).unwrap());
        assert!(matches!(
            validate_references(&dag, &[9]),
            Err(Error::UnknownBlock(_))
        ));
    }

    #[test]
    fn disjoint_branch_tips_are_valid_references() {
        let mut dag = single_chain(2);
        dag.add_block("X1", Creator::Selfish, false, vec![0])
            .unwrap();
        assert!(validate_references(&dag, &[2, 3]).unwrap());
        assert!(dag
            .add_block("bad", Creator::Honest, false, vec![1, 2])
            .is_err());
    }
}
