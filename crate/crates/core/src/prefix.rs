//! Prefix overlap and a compressed-trie index over pending queries.
//!
//! The index answers "which pending prompt shares the longest prefix with
//! the cached prompt", sampling uniformly among ties. A naive scan over the
//! pending set ([`naive_best`]) gives the same answer and serves as the
//! reference implementation in tests.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::Rng;

use crate::error::{Error, Result};
use crate::types::{QueryId, Token, TokenSeq};

/// Length of the longest common prefix of `x` and `y`.
pub fn overlap(x: &[Token], y: &[Token]) -> usize {
    x.iter().zip(y).take_while(|(a, b)| a == b).count()
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
struct Node {
    /// Edge label leading into this node; empty only at the root.
    label: Vec<Token>,
    children: BTreeMap<Token, Node>,
    /// Queries whose prompt ends exactly at this node.
    ids: BTreeSet<QueryId>,
    /// Number of ids stored in this subtree.
    count: usize,
}

impl Node {
    fn leaf(label: Vec<Token>, id: QueryId) -> Self {
        Node {
            label,
            children: BTreeMap::new(),
            ids: BTreeSet::from([id]),
            count: 1,
        }
    }

    fn insert(&mut self, rest: &[Token], id: QueryId) {
        self.count += 1;
        let Some(&first) = rest.first() else {
            self.ids.insert(id);
            return;
        };
        let Some(child) = self.children.get_mut(&first) else {
            self.children.insert(first, Node::leaf(rest.to_vec(), id));
            return;
        };
        let common = overlap(&child.label, rest);
        if common < child.label.len() {
            // split the edge at the divergence point
            let tail = child.label.split_off(common);
            let mut lower = std::mem::take(child);
            let head = std::mem::replace(&mut lower.label, tail);
            *child = Node {
                label: head,
                children: BTreeMap::new(),
                ids: BTreeSet::new(),
                count: lower.count,
            };
            child.children.insert(lower.label[0], lower);
        }
        child.insert(&rest[common..], id);
    }

    fn remove(&mut self, rest: &[Token], id: QueryId) -> bool {
        let Some(&first) = rest.first() else {
            let found = self.ids.remove(&id);
            if found {
                self.count -= 1;
            }
            return found;
        };
        let Some(child) = self.children.get_mut(&first) else {
            return false;
        };
        if !rest.starts_with(&child.label) {
            return false;
        }
        let skip = child.label.len();
        if !child.remove(&rest[skip..], id) {
            return false;
        }
        self.count -= 1;
        if child.count == 0 {
            self.children.remove(&first);
        } else if child.ids.is_empty() && child.children.len() == 1 {
            let (_, mut only) = child.children.pop_first().unwrap();
            let mut label = std::mem::take(&mut child.label);
            label.append(&mut only.label);
            only.label = label;
            *child = only;
        }
        true
    }

    fn nth(&self, mut r: usize) -> QueryId {
        if r < self.ids.len() {
            return *self.ids.iter().nth(r).unwrap();
        }
        r -= self.ids.len();
        for child in self.children.values() {
            if r < child.count {
                return child.nth(r);
            }
            r -= child.count;
        }
        unreachable!("rank exceeds subtree size")
    }

    fn collect(&self, out: &mut Vec<QueryId>) {
        out.extend(self.ids.iter().copied());
        for child in self.children.values() {
            child.collect(out);
        }
    }
}

/// Compressed trie over the prompts of pending queries.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RadixIndex {
    root: Node,
    prompts: HashMap<QueryId, TokenSeq>,
}

impl RadixIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.root.count
    }

    pub fn is_empty(&self) -> bool {
        self.root.count == 0
    }

    pub fn contains(&self, id: QueryId) -> bool {
        self.prompts.contains_key(&id)
    }

    pub fn insert(&mut self, id: QueryId, prompt: &TokenSeq) -> Result<()> {
        if self.prompts.contains_key(&id) {
            return Err(Error::AlreadyIndexed(id));
        }
        self.root.insert(prompt, id);
        self.prompts.insert(id, prompt.clone());
        Ok(())
    }

    pub fn remove(&mut self, id: QueryId) -> Result<()> {
        let prompt = self.prompts.remove(&id).ok_or(Error::NotIndexed(id))?;
        let removed = self.root.remove(&prompt, id);
        debug_assert!(removed, "prompt map and trie disagree on {id}");
        Ok(())
    }

    /// Number of edges leaving the root.
    pub fn root_degree(&self) -> usize {
        self.root.children.len()
    }

    /// Labels of the edges leaving the root, in token order.
    pub fn root_edges(&self) -> Vec<&[Token]> {
        self.root
            .children
            .values()
            .map(|c| c.label.as_slice())
            .collect()
    }

    /// Locates the deepest subtree whose members all attain the maximal
    /// overlap with `probe`, returning it with that overlap.
    fn locate(&self, probe: &[Token]) -> Result<(&Node, usize)> {
        if self.is_empty() {
            return Err(Error::EmptyIndex);
        }
        let mut node = &self.root;
        let mut depth = 0;
        while let Some(child) = probe.get(depth).and_then(|t| node.children.get(t)) {
            let common = overlap(&child.label, &probe[depth..]);
            if common < child.label.len() {
                return Ok((child, depth + common));
            }
            node = child;
            depth += common;
        }
        Ok((node, depth))
    }

    /// Ids attaining the maximal overlap with `probe`, and that overlap.
    pub fn best_candidates(&self, probe: &[Token]) -> Result<(Vec<QueryId>, usize)> {
        let (node, depth) = self.locate(probe)?;
        let mut ids = Vec::with_capacity(node.count);
        node.collect(&mut ids);
        Ok((ids, depth))
    }

    /// A pending id with maximal prefix overlap against `probe`, chosen
    /// uniformly among ties using `rng`.
    pub fn best_match<R: Rng + ?Sized>(
        &self,
        probe: &[Token],
        rng: &mut R,
    ) -> Result<(QueryId, usize)> {
        let (node, depth) = self.locate(probe)?;
        let pick = if node.count == 1 {
            0
        } else {
            rng.random_range(0..node.count)
        };
        Ok((node.nth(pick), depth))
    }
}

/// Linear-scan reference for [`RadixIndex::best_candidates`]: the maximal
/// overlap and every id attaining it, in ascending id order.
pub fn naive_best(
    pending: &[(QueryId, &[Token])],
    probe: &[Token],
) -> Option<(Vec<QueryId>, usize)> {
    let best = pending.iter().map(|(_, p)| overlap(p, probe)).max()?;
    let mut ids: Vec<QueryId> = pending
        .iter()
        .filter(|(_, p)| overlap(p, probe) == best)
        .map(|(id, _)| *id)
        .collect();
    ids.sort_unstable();
    Some((ids, best))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn seq(v: &[Token]) -> TokenSeq {
        TokenSeq::new(v.to_vec())
    }

    /// (user)(doc) prompt with five-token blocks, as in the toy stream.
    fn toy_prompt(user: u32, doc: u32) -> TokenSeq {
        (0..5)
            .map(|i| 1000 * user + i)
            .chain((0..5).map(|i| 1_000_000 + 1000 * doc + i))
            .collect()
    }

    #[test]
    fn overlap_examples() {
        let x = seq(&[1, 2, 3, 4, 5, 6, 7]);
        assert_eq!(overlap(&x, &x), 7);
        assert_eq!(overlap(&[1, 2], &[2, 2]), 0);
        assert_eq!(overlap(&toy_prompt(1, 1), &toy_prompt(1, 3)), 5);
        assert_eq!(overlap(&toy_prompt(1, 1), &toy_prompt(2, 2)), 0);
        assert_eq!(overlap(&[1, 2, 3], &[1, 2]), 2);
        assert_eq!(overlap(&[], &[1]), 0);
    }

    #[test]
    fn insert_then_remove_restores_empty_tree() {
        let mut idx = RadixIndex::new();
        idx.insert(3, &seq(&[1, 2, 3])).unwrap();
        idx.remove(3).unwrap();
        assert_eq!(idx, RadixIndex::new());
    }

    #[test]
    fn shared_prefix_is_compressed() {
        let mut idx = RadixIndex::new();
        idx.insert(1, &toy_prompt(1, 1)).unwrap();
        idx.insert(2, &toy_prompt(1, 3)).unwrap();
        assert_eq!(idx.root_degree(), 1);
        assert!(idx.root_edges()[0].len() >= 5);
    }

    #[test]
    fn distinct_first_tokens_branch_at_root() {
        let mut idx = RadixIndex::new();
        for (id, first) in [(0, 10), (1, 20), (2, 30)] {
            idx.insert(id, &seq(&[first, 1, 2])).unwrap();
        }
        assert_eq!(idx.root_degree(), 3);
    }

    #[test]
    fn duplicate_insert_and_missing_remove_fail() {
        let mut idx = RadixIndex::new();
        idx.insert(1, &seq(&[1])).unwrap();
        assert!(matches!(
            idx.insert(1, &seq(&[2])),
            Err(Error::AlreadyIndexed(1))
        ));
        assert!(matches!(idx.remove(9), Err(Error::NotIndexed(9))));
    }

    #[test]
    fn best_match_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut idx = RadixIndex::new();
        assert!(matches!(
            idx.best_match(&[1], &mut rng),
            Err(Error::EmptyIndex)
        ));

        idx.insert(3, &toy_prompt(1, 3)).unwrap();
        idx.insert(2, &toy_prompt(2, 2)).unwrap();
        assert_eq!(idx.best_match(&toy_prompt(1, 1), &mut rng).unwrap(), (3, 5));

        let exact = toy_prompt(2, 2);
        assert_eq!(idx.best_match(&exact, &mut rng).unwrap(), (2, 10));

        let (id, ov) = idx.best_match(&[77, 78], &mut rng).unwrap();
        assert_eq!(ov, 0);
        assert!(id == 2 || id == 3);
    }

    #[test]
    fn identical_and_nested_prompts_coexist() {
        let mut idx = RadixIndex::new();
        idx.insert(1, &seq(&[5, 5, 5])).unwrap();
        idx.insert(2, &seq(&[5, 5, 5])).unwrap();
        idx.insert(3, &seq(&[5, 5])).unwrap();
        let (ids, ov) = idx.best_candidates(&[5, 5, 5, 9]).unwrap();
        assert_eq!((ids, ov), (vec![1, 2], 3));
        idx.remove(1).unwrap();
        idx.remove(2).unwrap();
        assert_eq!(idx.best_candidates(&[5, 5, 5]).unwrap(), (vec![3], 2));
        let mut only = RadixIndex::new();
        only.insert(3, &seq(&[5, 5])).unwrap();
        assert_eq!(idx, only);
    }

    #[test]
    fn tie_breaking_is_uniform() {
        let mut idx = RadixIndex::new();
        for id in 0..3 {
            idx.insert(id, &seq(&[7, 7, 100 + id as u32])).unwrap();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let draws = 30_000;
        let mut counts = [0usize; 3];
        for _ in 0..draws {
            let (id, ov) = idx.best_match(&[7, 7, 1], &mut rng).unwrap();
            assert_eq!(ov, 2);
            counts[id as usize] += 1;
        }
        for c in counts {
            let freq = c as f64 / draws as f64;
            assert!((freq - 1.0 / 3.0).abs() <= 0.02, "frequency {freq}");
        }
    }
}
