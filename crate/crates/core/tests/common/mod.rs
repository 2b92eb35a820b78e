//! Brute-force reference implementations shared by the integration tests.

#![allow(dead_code)]

use dqg_core::Causet;

/// Strict order relation as a dense boolean matrix, `rel[i][j]` meaning `i < j`.
pub type Relation = Vec<Vec<bool>>;

pub fn relation_of(c: &Causet) -> Relation {
    let n = c.size();
    (0..n).map(|i| (0..n).map(|j| c.precedes(i, j)).collect()).collect()
}

pub fn causet_of(rel: &Relation) -> Causet {
    let n = rel.len();
    let edges: Vec<(usize, usize)> =
        (0..n).flat_map(|i| (0..n).filter(move |&j| rel[i][j]).map(move |j| (i, j))).collect();
    Causet::from_covers(n, &edges).expect("relation is a strict order")
}

/// Every transitively closed relation on `0..n` that only relates `i < j`.
/// Each finite poset has such a (natural) labeling, so these cover all posets.
pub fn naturally_labeled_posets(n: usize) -> Vec<Relation> {
    let slots: Vec<(usize, usize)> = (0..n).flat_map(|j| (0..j).map(move |i| (i, j))).collect();
    let mut out = Vec::new();
    for mask in 0u64..(1u64 << slots.len()) {
        let mut rel = vec![vec![false; n]; n];
        for (b, &(i, j)) in slots.iter().enumerate() {
            rel[i][j] = mask >> b & 1 == 1;
        }
        let transitive = (0..n).all(|i| {
            (0..n).all(|j| !rel[i][j] || (0..n).all(|k| !rel[j][k] || rel[i][k]))
        });
        if transitive {
            out.push(rel);
        }
    }
    out
}

pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..n {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

pub fn relabel(rel: &Relation, perm: &[usize]) -> Relation {
    let n = rel.len();
    let mut out = vec![vec![false; n]; n];
    for i in 0..n {
        for j in 0..n {
            out[perm[i]][perm[j]] = rel[i][j];
        }
    }
    out
}

/// Lexicographically smallest relabeled matrix over all permutations.
pub fn brute_canonical(rel: &Relation, perms: &[Vec<usize>]) -> Vec<bool> {
    perms
        .iter()
        .map(|p| relabel(rel, p).concat())
        .min()
        .expect("at least one permutation")
}

/// Number of isomorphism classes of posets on `n` elements.
pub fn brute_force_class_count(n: usize) -> usize {
    let perms = permutations(n);
    let mut classes: Vec<Vec<bool>> = naturally_labeled_posets(n).iter().map(|r| brute_canonical(r, &perms)).collect();
    classes.sort();
    classes.dedup();
    classes.len()
}

/// Number of antichains (including the empty one) by subset enumeration.
pub fn brute_antichain_count(c: &Causet) -> usize {
    let n = c.size();
    (0u64..(1 << n))
        .filter(|&m| (0..n).all(|i| (0..n).all(|j| m >> i & 1 == 0 || m >> j & 1 == 0 || !c.precedes(i, j))))
        .count()
}
