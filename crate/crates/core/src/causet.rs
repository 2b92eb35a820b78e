//! Finite posets considered up to isomorphism.
//!
//! A [`Causet`] stores its strict order as one `u64` bitmask per element, so
//! at most [`MAX_ELEMENTS`] elements are representable. Every value carries a
//! [`CanonicalCode`] computed at construction; equality, hashing and ordering
//! all go through that code, so two isomorphic causets compare equal no matter
//! how their elements were labeled.
//!
//! The code is derived from natural labelings (linear extensions). For a
//! natural labeling the strict order matrix is upper triangular, and reading
//! its columns `j = 1..n`, rows `i = 0..j`, gives a bit string that fully
//! determines the poset. The canonical labeling is the one maximizing that
//! string; the stored code is its bitwise complement, so ascending code order
//! lists denser orders first (the 3-chain precedes the 3-antichain).

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

/// Hard representation limit (one `u64` row per element).
pub const MAX_ELEMENTS: usize = 64;

/// Default cap on causet cardinality for parsing and level building.
pub const DEFAULT_SIZE_CAP: usize = 9;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CausetError {
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("cover {i}<{j} at byte {pos} closes a cycle")]
    Cycle { pos: usize, i: usize, j: usize },
    #[error("element index {index} at byte {pos} is out of range for size {size}")]
    IndexOutOfRange { pos: usize, index: usize, size: usize },
    #[error("size {size} at byte {pos} exceeds the cap of {cap}")]
    SizeCap { pos: usize, size: usize, cap: usize },
    #[error("causet must have at least one element")]
    Empty,
    #[error("{0:?} is not an antichain of the causet")]
    NotAntichain(ElementSet),
    #[error("a single-element causet has no producers")]
    NoProducers,
    #[error("offspring invariant violated: {0}")]
    Invariant(String),
}

/// A set of element indices of a single causet.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ElementSet(pub u64);

impl ElementSet {
    pub const EMPTY: ElementSet = ElementSet(0);

    pub fn singleton(i: usize) -> Self {
        ElementSet(1 << i)
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(it: I) -> Self {
        ElementSet(it.into_iter().fold(0u64, |acc, i| acc | (1 << i)))
    }

    pub fn contains(self, i: usize) -> bool {
        i < 64 && self.0 >> i & 1 == 1
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        BitIter(self.0)
    }
}

impl fmt::Debug for ElementSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

struct BitIter(u64);

impl Iterator for BitIter {
    type Item = usize;
    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            return None;
        }
        let i = self.0.trailing_zeros() as usize;
        self.0 &= self.0 - 1;
        Some(i)
    }
}

fn bits(x: u64) -> BitIter {
    BitIter(x)
}

/// Isomorphism-class identifier: one size byte followed by the packed
/// complemented relation bits of the canonical natural labeling.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CanonicalCode(Vec<u8>);

impl CanonicalCode {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn hex(&self) -> String {
        self.0.iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl fmt::Debug for CanonicalCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CanonicalCode({})", self.hex())
    }
}

/// Height, width or mild offspring, by which of `h` and `w` grows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum OffspringKind {
    Height,
    Width,
    Mild,
}

/// One isomorphism class of one-element extensions of a parent causet.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OffspringRecord {
    pub child: Causet,
    pub multiplicity: u32,
    pub kind: OffspringKind,
}

/// Finite strict partial order, compared up to isomorphism.
#[derive(Clone)]
pub struct Causet {
    size: usize,
    /// `below[j]` has bit `i` set iff `i < j`.
    below: Vec<u64>,
    /// `above[i]` has bit `j` set iff `i < j`.
    above: Vec<u64>,
    /// Transitive reduction of `below`.
    cover_below: Vec<u64>,
    /// `labeling[p]` is the element placed at canonical position `p`.
    labeling: Vec<u8>,
    code: CanonicalCode,
}

impl Causet {
    /// Builds a causet from a transitively closed `below` table.
    fn from_closed_below(below: Vec<u64>) -> Causet {
        let size = below.len();
        debug_assert!((1..=MAX_ELEMENTS).contains(&size));
        let mut above = vec![0u64; size];
        for (j, &b) in below.iter().enumerate() {
            for i in bits(b) {
                above[i] |= 1 << j;
            }
        }
        let cover_below = below
            .iter()
            .map(|&b| {
                let implied = bits(b).fold(0u64, |acc, i| acc | below[i]);
                b & !implied
            })
            .collect();
        let (labeling, code) = canonical_labeling(&below, &above);
        Causet { size, below, above, cover_below, labeling, code }
    }

    /// Builds a causet from cover (or any generating) relations `i < j`.
    pub fn from_covers(size: usize, edges: &[(usize, usize)]) -> Result<Causet, CausetError> {
        if size == 0 {
            return Err(CausetError::Empty);
        }
        if size > MAX_ELEMENTS {
            return Err(CausetError::SizeCap { pos: 0, size, cap: MAX_ELEMENTS });
        }
        let mut below = vec![0u64; size];
        for &(i, j) in edges {
            for index in [i, j] {
                if index >= size {
                    return Err(CausetError::IndexOutOfRange { pos: 0, index, size });
                }
            }
            add_relation(&mut below, i, j).map_err(|_| CausetError::Cycle { pos: 0, i, j })?;
        }
        Ok(Causet::from_closed_below(below))
    }

    pub fn point() -> Causet {
        Causet::from_closed_below(vec![0])
    }

    /// Totally ordered causet `0 < 1 < ... < n-1`.
    pub fn chain(n: usize) -> Causet {
        assert!((1..=MAX_ELEMENTS).contains(&n));
        Causet::from_closed_below((0..n).map(|j| (1u64 << j) - 1).collect())
    }

    /// `n` mutually incomparable elements.
    pub fn antichain(n: usize) -> Causet {
        assert!((1..=MAX_ELEMENTS).contains(&n));
        Causet::from_closed_below(vec![0; n])
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Strict order test `i < j`.
    pub fn precedes(&self, i: usize, j: usize) -> bool {
        self.below[j] >> i & 1 == 1
    }

    pub fn comparable(&self, i: usize, j: usize) -> bool {
        i == j || self.precedes(i, j) || self.precedes(j, i)
    }

    pub fn below(&self, j: usize) -> ElementSet {
        ElementSet(self.below[j])
    }

    pub fn above(&self, i: usize) -> ElementSet {
        ElementSet(self.above[i])
    }

    /// Covering pairs `(i, j)` sorted by `i`, then `j`.
    pub fn covers(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = (0..self.size)
            .flat_map(|j| bits(self.cover_below[j]).map(move |i| (i, j)))
            .collect();
        out.sort_unstable();
        out
    }

    pub fn canonical_code(&self) -> &CanonicalCode {
        &self.code
    }

    /// The same causet relabeled into its canonical natural labeling.
    pub fn canonical_form(&self) -> Causet {
        if self.is_canonically_labeled() {
            return self.clone();
        }
        let mut pos_of = vec![0usize; self.size];
        for (p, &e) in self.labeling.iter().enumerate() {
            pos_of[e as usize] = p;
        }
        let below = self
            .labeling
            .iter()
            .map(|&e| bits(self.below[e as usize]).fold(0u64, |acc, d| acc | (1 << pos_of[d])))
            .collect();
        Causet::from_closed_below(below)
    }

    pub fn is_canonically_labeled(&self) -> bool {
        self.labeling.iter().enumerate().all(|(p, &e)| p == e as usize)
    }

    pub fn maximal_elements(&self) -> ElementSet {
        ElementSet::from_indices((0..self.size).filter(|&i| self.above[i] == 0))
    }

    pub fn minimal_elements(&self) -> ElementSet {
        ElementSet::from_indices((0..self.size).filter(|&i| self.below[i] == 0))
    }

    pub fn is_antichain(&self, set: ElementSet) -> bool {
        if self.size < 64 && set.0 >> self.size != 0 {
            return false;
        }
        set.iter().all(|i| (self.below[i] | self.above[i]) & set.0 == 0)
    }

    /// Every antichain, including the empty one, in ascending bitmask order.
    pub fn antichains(&self) -> Vec<ElementSet> {
        let mut out = Vec::new();
        let conflict: Vec<u64> = (0..self.size).map(|i| self.below[i] | self.above[i]).collect();
        fn rec(i: usize, n: usize, cur: u64, blocked: u64, conflict: &[u64], out: &mut Vec<ElementSet>) {
            if i == n {
                out.push(ElementSet(cur));
                return;
            }
            rec(i + 1, n, cur, blocked, conflict, out);
            if blocked >> i & 1 == 0 {
                rec(i + 1, n, cur | (1 << i), blocked | conflict[i], conflict, out);
            }
        }
        rec(0, self.size, 0, 0, &conflict, &mut out);
        out.sort_unstable();
        out
    }

    /// Cardinality of a longest chain.
    pub fn height(&self) -> usize {
        let mut order: Vec<usize> = (0..self.size).collect();
        order.sort_by_key(|&i| self.below[i].count_ones());
        let mut level = vec![0usize; self.size];
        for &j in &order {
            level[j] = 1 + bits(self.below[j]).map(|i| level[i]).max().unwrap_or(0);
        }
        level.into_iter().max().unwrap_or(0)
    }

    /// Cardinality of a largest antichain, as `n` minus a maximum matching
    /// of the comparability bipartite graph.
    pub fn width(&self) -> usize {
        let n = self.size;
        let mut match_right: Vec<Option<usize>> = vec![None; n];
        fn augment(u: usize, above: &[u64], seen: &mut u64, match_right: &mut [Option<usize>]) -> bool {
            for v in bits(above[u]) {
                if *seen >> v & 1 == 1 {
                    continue;
                }
                *seen |= 1 << v;
                if match_right[v].is_none_or(|w| augment(w, above, seen, match_right)) {
                    match_right[v] = Some(u);
                    return true;
                }
            }
            false
        }
        let matched = (0..n)
            .filter(|&u| {
                let mut seen = 0u64;
                augment(u, &self.above, &mut seen, &mut match_right)
            })
            .count();
        n - matched
    }

    pub fn area(&self) -> usize {
        self.height() * self.width()
    }

    /// Adjoins a new maximal element whose past is the down-closure of `a`.
    /// The new element gets index `size()`; existing labels are kept.
    pub fn extend(&self, a: ElementSet) -> Result<Causet, CausetError> {
        if !self.is_antichain(a) {
            return Err(CausetError::NotAntichain(a));
        }
        if self.size + 1 > MAX_ELEMENTS {
            return Err(CausetError::SizeCap { pos: 0, size: self.size + 1, cap: MAX_ELEMENTS });
        }
        let past = a.iter().fold(a.0, |acc, i| acc | self.below[i]);
        let mut below = self.below.clone();
        below.push(past);
        Ok(Causet::from_closed_below(below))
    }

    /// Offspring classes with multiplicities, in canonical order.
    pub fn offspring(&self) -> Result<Vec<OffspringRecord>, CausetError> {
        let (h, w) = (self.height(), self.width());
        let mut classes: BTreeMap<CanonicalCode, OffspringRecord> = BTreeMap::new();
        for a in self.antichains() {
            let child = self.extend(a)?;
            if let Some(rec) = classes.get_mut(child.canonical_code()) {
                rec.multiplicity += 1;
                continue;
            }
            let kind = match (child.height() - h, child.width() - w) {
                (1, 0) => OffspringKind::Height,
                (0, 1) => OffspringKind::Width,
                (0, 0) => OffspringKind::Mild,
                (dh, dw) => {
                    return Err(CausetError::Invariant(format!(
                        "extension of {self} by {a:?} changes (h, w) by ({dh}, {dw})"
                    )))
                }
            };
            let child = child.canonical_form();
            classes.insert(child.code.clone(), OffspringRecord { child, multiplicity: 1, kind });
        }
        Ok(classes.into_values().collect())
    }

    /// Offspring count including multiplicity.
    pub fn offspring_count(&self) -> usize {
        self.antichains().len()
    }

    /// Deletes element `a`, shifting higher labels down by one.
    pub fn remove(&self, a: usize) -> Causet {
        assert!(a < self.size && self.size > 1);
        let low = (1u64 << a) - 1;
        let squeeze = |x: u64| (x & low) | ((x >> 1) & !low);
        let below = (0..self.size).filter(|&j| j != a).map(|j| squeeze(self.below[j])).collect();
        Causet::from_closed_below(below)
    }

    /// Distinct causets `y \ {a}` over maximal elements `a`, in canonical order.
    pub fn producers(&self) -> Result<Vec<Causet>, CausetError> {
        if self.size < 2 {
            return Err(CausetError::NoProducers);
        }
        let mut out: BTreeMap<CanonicalCode, Causet> = BTreeMap::new();
        for a in self.maximal_elements().iter() {
            let p = self.remove(a).canonical_form();
            out.entry(p.code.clone()).or_insert(p);
        }
        Ok(out.into_values().collect())
    }

    /// Every maximal chain, listed bottom to top.
    pub fn maximal_chains(&self) -> Vec<Vec<usize>> {
        let mut cover_above = vec![0u64; self.size];
        for j in 0..self.size {
            for i in bits(self.cover_below[j]) {
                cover_above[i] |= 1 << j;
            }
        }
        let mut out = Vec::new();
        let mut stack = Vec::new();
        fn walk(e: usize, cover_above: &[u64], stack: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            stack.push(e);
            if cover_above[e] == 0 {
                out.push(stack.clone());
            }
            for next in bits(cover_above[e]) {
                walk(next, cover_above, stack, out);
            }
            stack.pop();
        }
        for m in self.minimal_elements().iter() {
            walk(m, &cover_above, &mut stack, &mut out);
        }
        out
    }

    /// Two maximal chains are equivalent when deleting their top elements
    /// from the causet leaves isomorphic causets.
    pub fn chains_equivalent(&self, c1: &[usize], c2: &[usize]) -> bool {
        let top = |c: &[usize]| *c.last().expect("maximal chains are nonempty");
        let (a1, a2) = (top(c1), top(c2));
        a1 == a2 || self.remove(a1).code == self.remove(a2).code
    }

    /// Partition of `maximal_chains()` indices into equivalence classes,
    /// ordered by first member.
    pub fn chain_equivalence_classes(&self) -> Vec<Vec<usize>> {
        let chains = self.maximal_chains();
        if self.size < 2 {
            return vec![(0..chains.len()).collect()];
        }
        let mut classes: Vec<(CanonicalCode, Vec<usize>)> = Vec::new();
        for (k, c) in chains.iter().enumerate() {
            let key = self.remove(*c.last().unwrap()).code;
            match classes.iter_mut().find(|(code, _)| *code == key) {
                Some((_, members)) => members.push(k),
                None => classes.push((key, vec![k])),
            }
        }
        classes.into_iter().map(|(_, m)| m).collect()
    }

    /// Literal form `<n>;<i><j>,...` listing covers.
    pub fn to_literal(&self) -> String {
        let covers: Vec<String> = self.covers().iter().map(|(i, j)| format!("{i}<{j}")).collect();
        format!("{};{}", self.size, covers.join(","))
    }

    pub fn summary(&self) -> CausetSummary {
        let (h, w) = (self.height(), self.width());
        CausetSummary {
            size: self.size,
            covers: self.covers().into_iter().map(|(i, j)| [i, j]).collect(),
            canonical: self.code.hex(),
            h,
            w,
            area: h * w,
        }
    }
}

/// JSON shape of a causet.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CausetSummary {
    pub size: usize,
    pub covers: Vec<[usize; 2]>,
    pub canonical: String,
    pub h: usize,
    pub w: usize,
    pub area: usize,
}

impl PartialEq for Causet {
    fn eq(&self, other: &Self) -> bool {
        self.code == other.code
    }
}

impl Eq for Causet {}

impl Hash for Causet {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.code.hash(state)
    }
}

impl PartialOrd for Causet {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Ascending `(size, canonical code)`; the size is the code's first byte.
impl Ord for Causet {
    fn cmp(&self, other: &Self) -> Ordering {
        self.code.cmp(&other.code)
    }
}

impl fmt::Display for Causet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_literal())
    }
}

impl fmt::Debug for Causet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Causet({})", self.to_literal())
    }
}

impl FromStr for Causet {
    type Err = CausetError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_causet(s)
    }
}

/// Adds `i < j` and everything it implies to a closed `below` table.
fn add_relation(below: &mut [u64], i: usize, j: usize) -> Result<(), ()> {
    if i == j || below[i] >> j & 1 == 1 {
        return Err(());
    }
    let past = below[i] | (1 << i);
    for (k, row) in below.iter_mut().enumerate() {
        if k == j || *row >> j & 1 == 1 {
            *row |= past;
        }
    }
    Ok(())
}

/// Parses `<n>;<i><j>[,<i><j>]*` with the default size cap.
pub fn parse_causet(text: &str) -> Result<Causet, CausetError> {
    parse_causet_with_cap(text, DEFAULT_SIZE_CAP)
}

pub fn parse_causet_with_cap(text: &str, cap: usize) -> Result<Causet, CausetError> {
    let bytes = text.as_bytes();
    let mut pos = 0;
    let (size, next) = parse_uint(bytes, pos)?;
    if size == 0 {
        return Err(CausetError::Empty);
    }
    if size > cap.min(MAX_ELEMENTS) {
        return Err(CausetError::SizeCap { pos, size, cap: cap.min(MAX_ELEMENTS) });
    }
    pos = next;
    expect(bytes, pos, b';')?;
    pos += 1;
    let mut below = vec![0u64; size];
    let mut first = true;
    while pos < bytes.len() {
        if !first {
            expect(bytes, pos, b',')?;
            pos += 1;
        }
        first = false;
        let start = pos;
        let (i, next) = parse_uint(bytes, pos)?;
        if i >= size {
            return Err(CausetError::IndexOutOfRange { pos, index: i, size });
        }
        pos = next;
        expect(bytes, pos, b'<')?;
        pos += 1;
        let (j, next) = parse_uint(bytes, pos)?;
        if j >= size {
            return Err(CausetError::IndexOutOfRange { pos, index: j, size });
        }
        pos = next;
        add_relation(&mut below, i, j).map_err(|_| CausetError::Cycle { pos: start, i, j })?;
    }
    Ok(Causet::from_closed_below(below))
}

fn expect(bytes: &[u8], pos: usize, want: u8) -> Result<(), CausetError> {
    match bytes.get(pos) {
        Some(&b) if b == want => Ok(()),
        Some(&b) => Err(CausetError::Parse {
            pos,
            msg: format!("expected '{}', found '{}'", want as char, b as char),
        }),
        None => Err(CausetError::Parse { pos, msg: format!("expected '{}', found end of input", want as char) }),
    }
}

fn parse_uint(bytes: &[u8], pos: usize) -> Result<(usize, usize), CausetError> {
    let end = pos + bytes[pos.min(bytes.len())..].iter().take_while(|b| b.is_ascii_digit()).count();
    if end == pos {
        return Err(CausetError::Parse { pos, msg: "expected a decimal integer".into() });
    }
    std::str::from_utf8(&bytes[pos..end])
        .ok()
        .and_then(|s| s.parse().ok())
        .map(|v| (v, end))
        .ok_or(CausetError::Parse { pos, msg: "integer out of range".into() })
}

/// Finds the natural labeling maximizing the column-major upper-triangle
/// relation string. Interchangeable elements (same past and same future) are
/// only tried once per branch point.
fn canonical_labeling(below: &[u64], above: &[u64]) -> (Vec<u8>, CanonicalCode) {
    let n = below.len();
    let mut search = LabelSearch {
        below,
        above,
        label_bit: vec![0; n],
        cur_cols: Vec::with_capacity(n),
        cur_labels: Vec::with_capacity(n),
        best_cols: Vec::new(),
        best_labels: Vec::new(),
    };
    search.dfs(0);
    let LabelSearch { best_cols, best_labels, .. } = search;

    let nbits = n * (n - 1) / 2;
    let mut code = Vec::with_capacity(1 + nbits.div_ceil(8));
    code.push(n as u8);
    let mut acc = 0u8;
    let mut filled = 0;
    for (p, &col) in best_cols.iter().enumerate().skip(1) {
        for i in 0..p {
            let related = col >> (63 - i) & 1 == 1;
            acc = (acc << 1) | u8::from(!related);
            filled += 1;
            if filled == 8 {
                code.push(acc);
                acc = 0;
                filled = 0;
            }
        }
    }
    if filled > 0 {
        code.push(acc << (8 - filled));
    }
    (best_labels, CanonicalCode(code))
}

struct LabelSearch<'a> {
    below: &'a [u64],
    above: &'a [u64],
    /// For placed elements, `1 << (63 - label)`.
    label_bit: Vec<u64>,
    cur_cols: Vec<u64>,
    cur_labels: Vec<u8>,
    best_cols: Vec<u64>,
    best_labels: Vec<u8>,
}

impl LabelSearch<'_> {
    fn dfs(&mut self, placed: u64) {
        let n = self.below.len();
        let p = self.cur_labels.len();
        if !self.best_labels.is_empty() && self.cur_cols[..] < self.best_cols[..p] {
            return;
        }
        if p == n {
            if self.best_labels.is_empty() || self.cur_cols > self.best_cols {
                self.best_cols.clone_from(&self.cur_cols);
                self.best_labels.clone_from(&self.cur_labels);
            }
            return;
        }
        let mut best_col = 0u64;
        let mut ties: Vec<usize> = Vec::new();
        for e in 0..n {
            if placed >> e & 1 == 1 || self.below[e] & !placed != 0 {
                continue;
            }
            let col = bits(self.below[e]).fold(0u64, |acc, d| acc | self.label_bit[d]);
            match col.cmp(&best_col) {
                Ordering::Greater => {
                    best_col = col;
                    ties.clear();
                    ties.push(e);
                }
                Ordering::Equal => ties.push(e),
                Ordering::Less => {}
            }
        }
        let mut tried_futures: Vec<u64> = Vec::with_capacity(ties.len());
        for e in ties {
            if tried_futures.contains(&self.above[e]) {
                continue;
            }
            tried_futures.push(self.above[e]);
            self.label_bit[e] = 1 << (63 - p);
            self.cur_cols.push(best_col);
            self.cur_labels.push(e as u8);
            self.dfs(placed | (1 << e));
            self.cur_cols.pop();
            self.cur_labels.pop();
            self.label_bit[e] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(s: &str) -> Causet {
        s.parse().unwrap()
    }

    #[test]
    fn parses_point_and_chain() {
        let p = c("1;");
        assert_eq!(p.size(), 1);
        assert_eq!(p, Causet::point());
        let x4 = c("3;0<1,1<2");
        assert_eq!(x4, Causet::chain(3));
        assert!(x4.precedes(0, 2));
        assert_eq!(x4.covers(), vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn parses_lambda_shape() {
        let x7 = c("3;0<2,1<2");
        let relabeled = c("3;1<0,2<0");
        assert_eq!(x7, relabeled);
        assert_ne!(x7, c("3;0<1,0<2"));
        assert_eq!(x7.to_literal(), "3;0<2,1<2");
    }

    #[test]
    fn parse_errors_carry_positions() {
        assert_eq!(
            "3;0<1,1<0".parse::<Causet>().unwrap_err(),
            CausetError::Cycle { pos: 6, i: 1, j: 0 }
        );
        assert_eq!(
            "3;0<3".parse::<Causet>().unwrap_err(),
            CausetError::IndexOutOfRange { pos: 4, index: 3, size: 3 }
        );
        assert!(matches!("10;".parse::<Causet>(), Err(CausetError::SizeCap { pos: 0, size: 10, cap: 9 })));
        assert!(parse_causet_with_cap("10;", 12).is_ok());
        assert!(matches!("3;0<1,".parse::<Causet>(), Err(CausetError::Parse { pos: 6, .. })));
        assert!(matches!("3:0<1".parse::<Causet>(), Err(CausetError::Parse { pos: 1, .. })));
        assert!(matches!("2;0<0".parse::<Causet>(), Err(CausetError::Cycle { .. })));
        assert_eq!("0;".parse::<Causet>().unwrap_err(), CausetError::Empty);
    }

    #[test]
    fn relabeling_gives_identical_codes() {
        assert_eq!(c("2;0<1").canonical_code(), c("2;1<0").canonical_code());
        assert_eq!(c("3;0<1").canonical_code(), c("3;1<2").canonical_code());
    }

    #[test]
    fn canonical_order_lists_small_causets() {
        // 2-chain before 2-antichain; then 3-chain, V, chain+point, Lambda, antichain.
        assert!(Causet::chain(2) < Causet::antichain(2));
        let level3 = [c("3;0<1,1<2"), c("3;0<1,0<2"), c("3;0<1"), c("3;0<2,1<2"), c("3;")];
        assert!(level3.windows(2).all(|w| w[0] < w[1]));
        assert!(Causet::antichain(2) < Causet::chain(3));
    }

    #[test]
    fn canonical_form_is_idempotent() {
        let y = c("4;2<0,3<0,1<3");
        let f = y.canonical_form();
        assert!(f.is_canonically_labeled());
        assert_eq!(f, y);
        assert_eq!(f.canonical_form().to_literal(), f.to_literal());
    }

    #[test]
    fn antichain_counts() {
        assert_eq!(Causet::point().antichains(), vec![ElementSet(0), ElementSet(1)]);
        assert_eq!(Causet::chain(3).antichains().len(), 4);
        assert_eq!(c("3;0<1").antichains().len(), 6);
        assert_eq!(Causet::antichain(3).antichains().len(), 8);
    }

    #[test]
    fn height_width_area() {
        let x4 = Causet::chain(3);
        assert_eq!((x4.height(), x4.width(), x4.area()), (3, 1, 3));
        let x3 = Causet::antichain(2);
        assert_eq!((x3.height(), x3.width(), x3.area()), (1, 2, 2));
        let x2 = Causet::chain(2);
        assert_eq!((x2.height(), x2.width()), (2, 1));
        // two disjoint 2-chains under a common top: h = 3, w = 2
        let y = c("5;0<1,2<3,1<4,3<4");
        assert_eq!((y.height(), y.width()), (3, 2));
    }

    #[test]
    fn extend_examples() {
        let p = Causet::point();
        assert_eq!(p.extend(ElementSet::EMPTY).unwrap(), Causet::antichain(2));
        let x3 = Causet::antichain(2);
        assert_eq!(x3.extend(ElementSet::singleton(0)).unwrap(), c("3;0<1"));
        let x2 = Causet::chain(2);
        assert_eq!(x2.extend(ElementSet::singleton(1)).unwrap(), Causet::chain(3));
        assert_eq!(
            x2.extend(ElementSet::from_indices([0, 1])).unwrap_err(),
            CausetError::NotAntichain(ElementSet(3))
        );
        let ext = x3.extend(ElementSet::singleton(1)).unwrap();
        assert!(ext.precedes(1, 2) && !ext.precedes(0, 2));
        assert_eq!(ext.maximal_elements(), ElementSet::from_indices([0, 2]));
    }

    #[test]
    fn offspring_of_small_causets() {
        let recs = Causet::point().offspring().unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!((recs[0].child.clone(), recs[0].multiplicity, recs[0].kind), (Causet::chain(2), 1, OffspringKind::Height));
        assert_eq!((recs[1].child.clone(), recs[1].multiplicity, recs[1].kind), (Causet::antichain(2), 1, OffspringKind::Width));

        let recs = Causet::antichain(2).offspring().unwrap();
        assert_eq!(recs.len(), 3);
        let x6 = recs.iter().find(|r| r.child == c("3;0<1")).unwrap();
        assert_eq!(x6.multiplicity, 2);
        assert_eq!(x6.kind, OffspringKind::Height);
        let total: u32 = Causet::antichain(3).offspring().unwrap().iter().map(|r| r.multiplicity).sum();
        assert_eq!(total, 8);
    }

    #[test]
    fn offspring_totals_for_level_three() {
        let totals: Vec<u32> = ["3;0<1,1<2", "3;0<1,0<2", "3;0<1", "3;0<2,1<2", "3;"]
            .iter()
            .map(|s| c(s).offspring().unwrap().iter().map(|r| r.multiplicity).sum())
            .collect();
        assert_eq!(totals, vec![4, 5, 6, 5, 8]);
    }

    #[test]
    fn producer_counts() {
        assert_eq!(c("3;0<1").producers().unwrap().len(), 2);
        for s in ["3;0<1,1<2", "3;0<1,0<2", "3;0<2,1<2", "3;"] {
            assert_eq!(c(s).producers().unwrap().len(), 1, "{s}");
        }
        assert_eq!(Causet::point().producers().unwrap_err(), CausetError::NoProducers);
    }

    #[test]
    fn maximal_chain_classes() {
        let chain = Causet::chain(3);
        assert_eq!(chain.maximal_chains(), vec![vec![0, 1, 2]]);
        assert_eq!(chain.chain_equivalence_classes().len(), 1);

        let x6 = c("3;0<1");
        assert_eq!(x6.maximal_chains().len(), 2);
        assert_eq!(x6.chain_equivalence_classes().len(), 2);

        // shared top element: all chains equivalent
        let fan_in = c("4;0<3,1<3,2<3");
        assert_eq!(fan_in.maximal_chains().len(), 3);
        assert_eq!(fan_in.chain_equivalence_classes(), vec![vec![0, 1, 2]]);
    }

    #[test]
    fn summary_json_fields() {
        let s = c("3;0<2,1<2").summary();
        assert_eq!(s.covers, vec![[0, 2], [1, 2]]);
        assert_eq!((s.h, s.w, s.area), (2, 2, 4));
        assert_eq!(s.canonical, c("3;1<0,2<0").canonical_code().hex());
    }

    #[test]
    fn remove_shifts_labels() {
        let y = c("4;0<1,1<2,0<3");
        let r = y.remove(1);
        assert_eq!(r.to_literal(), "3;0<1,0<2");
    }
}
