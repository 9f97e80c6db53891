//! Standard and semi-standard parabolics of GL_m as ordered block partitions,
//! permutations, and Weyl double-coset representatives.
//!
//! Indices are 0-based internally; `Display` and JSON use 1-based images.

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WeylError {
    #[error("dimension mismatch: {0} vs {1}")]
    Dimension(usize, usize),
    #[error("parabolic is not standard")]
    NotStandard,
    #[error("not a double coset representative")]
    NotRepresentative,
    #[error("invalid input: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Composition {
    pub parts: Vec<usize>,
}

impl Composition {
    pub fn new(parts: Vec<usize>) -> Result<Self, WeylError> {
        if parts.iter().any(|&p| p == 0) {
            return Err(WeylError::Invalid(format!("zero part in {parts:?}")));
        }
        Ok(Composition { parts })
    }

    /// Drops zero parts instead of rejecting them.
    pub fn from_sizes(sizes: &[usize]) -> Self {
        Composition { parts: sizes.iter().copied().filter(|&p| p > 0).collect() }
    }

    pub fn ambient(&self) -> usize {
        self.parts.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    /// Start offsets of the blocks.
    pub fn offsets(&self) -> Vec<usize> {
        let mut o = Vec::with_capacity(self.parts.len());
        let mut s = 0;
        for &p in &self.parts {
            o.push(s);
            s += p;
        }
        o
    }

    /// All compositions of m.
    pub fn all(m: usize) -> Vec<Composition> {
        if m == 0 {
            return vec![Composition { parts: vec![] }];
        }
        let mut out = Vec::new();
        for mask in 0..(1u64 << (m - 1)) {
            let mut parts = Vec::new();
            let mut cur = 1;
            for b in 0..m - 1 {
                if mask >> b & 1 == 1 {
                    parts.push(cur);
                    cur = 1;
                } else {
                    cur += 1;
                }
            }
            parts.push(cur);
            out.push(Composition { parts });
        }
        out.sort();
        out
    }

    /// True if `self` refines `coarse` (both compositions of the same m).
    pub fn refines(&self, coarse: &Composition) -> bool {
        if self.ambient() != coarse.ambient() {
            return false;
        }
        let cuts = |c: &Composition| -> BTreeSet<usize> {
            let mut s = BTreeSet::new();
            let mut t = 0;
            for &p in &c.parts {
                t += p;
                s.insert(t);
            }
            s
        };
        cuts(coarse).is_subset(&cuts(self))
    }
}

impl fmt::Display for Composition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<String> = self.parts.iter().map(|p| p.to_string()).collect();
        write!(f, "({})", s.join(","))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Perm(pub Vec<usize>);

impl Perm {
    pub fn identity(m: usize) -> Self {
        Perm((0..m).collect())
    }

    pub fn from_images(images: Vec<usize>) -> Result<Self, WeylError> {
        let m = images.len();
        let mut seen = vec![false; m];
        for &i in &images {
            if i >= m || seen[i] {
                return Err(WeylError::Invalid(format!("not a permutation: {images:?}")));
            }
            seen[i] = true;
        }
        Ok(Perm(images))
    }

    pub fn from_images_1based(images: &[usize]) -> Result<Self, WeylError> {
        if images.iter().any(|&x| x == 0) {
            return Err(WeylError::Invalid("1-based images expected".into()));
        }
        Self::from_images(images.iter().map(|x| x - 1).collect())
    }

    /// Cycle (x1 x2 ... xk), 1-based, meaning x_t -> x_{t+1} and x_k -> x_1.
    pub fn from_cycle(m: usize, cycle: &[usize]) -> Self {
        let mut img: Vec<usize> = (0..m).collect();
        let k = cycle.len();
        for t in 0..k {
            img[cycle[t] - 1] = cycle[(t + 1) % k] - 1;
        }
        Perm(img)
    }

    pub fn degree(&self) -> usize {
        self.0.len()
    }

    pub fn apply(&self, i: usize) -> usize {
        self.0[i]
    }

    /// (self * other)(i) = self(other(i)).
    pub fn compose(&self, other: &Perm) -> Perm {
        assert_eq!(self.degree(), other.degree(), "degree mismatch");
        Perm(other.0.iter().map(|&i| self.0[i]).collect())
    }

    pub fn inverse(&self) -> Perm {
        let mut inv = vec![0; self.degree()];
        for (i, &j) in self.0.iter().enumerate() {
            inv[j] = i;
        }
        Perm(inv)
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().enumerate().all(|(i, &j)| i == j)
    }

    pub fn images_1based(&self) -> Vec<usize> {
        self.0.iter().map(|x| x + 1).collect()
    }

    pub fn increasing_on(&self, set: &[usize]) -> bool {
        set.windows(2).all(|w| self.0[w[0]] < self.0[w[1]])
    }

    /// Embeds a permutation of `positions.len()` letters acting on `positions`
    /// (listed in order) into S_m.
    pub fn embed(&self, m: usize, positions: &[usize]) -> Perm {
        let mut img: Vec<usize> = (0..m).collect();
        for (a, &p) in positions.iter().enumerate() {
            img[p] = positions[self.0[a]];
        }
        Perm(img)
    }

    /// Expands a permutation `sigma` of blocks with sizes `sizes` (block p moves
    /// to position sigma(p)) to a permutation of the underlying letters, each
    /// block mapped order-preservingly. Returns the permutation and the new sizes.
    pub fn from_block_permutation(sizes: &[usize], sigma: &Perm) -> (Perm, Vec<usize>) {
        let k = sizes.len();
        assert_eq!(sigma.degree(), k);
        let mut new_sizes = vec![0; k];
        for p in 0..k {
            new_sizes[sigma.0[p]] = sizes[p];
        }
        let mut new_off = vec![0; k];
        for p in 1..k {
            new_off[p] = new_off[p - 1] + new_sizes[p - 1];
        }
        let mut img = Vec::new();
        for p in 0..k {
            let o = new_off[sigma.0[p]];
            img.extend(o..o + sizes[p]);
        }
        (Perm(img), new_sizes)
    }

    pub fn all(m: usize) -> Vec<Perm> {
        let mut out = Vec::new();
        let mut cur = Vec::new();
        let mut used = vec![false; m];
        fn rec(m: usize, cur: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Perm>) {
            if cur.len() == m {
                out.push(Perm(cur.clone()));
                return;
            }
            for i in 0..m {
                if !used[i] {
                    used[i] = true;
                    cur.push(i);
                    rec(m, cur, used, out);
                    cur.pop();
                    used[i] = false;
                }
            }
        }
        rec(m, &mut cur, &mut used, &mut out);
        out
    }
}

impl fmt::Display for Perm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<String> = self.images_1based().iter().map(|p| p.to_string()).collect();
        write!(f, "[{}]", s.join(","))
    }
}

impl Serialize for Perm {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.images_1based().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Perm {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Vec::<usize>::deserialize(d)?;
        Perm::from_images_1based(&v).map_err(serde::de::Error::custom)
    }
}

pub type WeylElement = Perm;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BlockParabolic {
    m: usize,
    blocks: Vec<Vec<usize>>,
}

impl BlockParabolic {
    pub fn new(m: usize, blocks: Vec<Vec<usize>>) -> Result<Self, WeylError> {
        let mut seen = vec![false; m];
        let mut out = Vec::with_capacity(blocks.len());
        for mut b in blocks {
            if b.is_empty() {
                return Err(WeylError::Invalid("empty block".into()));
            }
            b.sort_unstable();
            for &i in &b {
                if i >= m || seen[i] {
                    return Err(WeylError::Invalid(format!("blocks do not partition 1..{m}")));
                }
                seen[i] = true;
            }
            out.push(b);
        }
        if seen.iter().any(|s| !s) {
            return Err(WeylError::Invalid(format!("blocks do not cover 1..{m}")));
        }
        Ok(BlockParabolic { m, blocks: out })
    }

    pub fn standard(c: &Composition) -> Self {
        let mut blocks = Vec::new();
        let mut s = 0;
        for &p in &c.parts {
            blocks.push((s..s + p).collect());
            s += p;
        }
        BlockParabolic { m: s, blocks }
    }

    pub fn borel(m: usize) -> Self {
        Self::standard(&Composition { parts: vec![1; m] })
    }

    pub fn full(m: usize) -> Self {
        if m == 0 {
            return BlockParabolic { m, blocks: vec![] };
        }
        Self::standard(&Composition { parts: vec![m] })
    }

    pub fn ambient(&self) -> usize {
        self.m
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.len()).collect()
    }

    pub fn is_standard(&self) -> bool {
        let mut s = 0;
        for b in &self.blocks {
            if b.iter().enumerate().any(|(t, &i)| i != s + t) {
                return false;
            }
            s += b.len();
        }
        true
    }

    pub fn composition(&self) -> Result<Composition, WeylError> {
        if !self.is_standard() {
            return Err(WeylError::NotStandard);
        }
        Ok(Composition { parts: self.sizes() })
    }

    pub fn block_index(&self, i: usize) -> usize {
        self.blocks.iter().position(|b| b.contains(&i)).expect("index in range")
    }

    fn block_of(&self) -> Vec<usize> {
        let mut v = vec![0; self.m];
        for (k, b) in self.blocks.iter().enumerate() {
            for &i in b {
                v[i] = k;
            }
        }
        v
    }

    pub fn contains_root(&self, i: usize, j: usize) -> bool {
        self.block_index(i) <= self.block_index(j)
    }

    /// Root spaces (i,j), i ≠ j, of the parabolic.
    pub fn root_set(&self) -> BTreeSet<(usize, usize)> {
        let bo = self.block_of();
        let mut s = BTreeSet::new();
        for i in 0..self.m {
            for j in 0..self.m {
                if i != j && bo[i] <= bo[j] {
                    s.insert((i, j));
                }
            }
        }
        s
    }

    /// True if `other ⊂ self` as subgroups.
    pub fn contains(&self, other: &BlockParabolic) -> bool {
        self.m == other.m && other.root_set().is_subset(&self.root_set())
    }

    /// Intersection with GL_k embedded in the upper-left corner.
    pub fn intersect_corner(&self, k: usize) -> BlockParabolic {
        let blocks = self
            .blocks
            .iter()
            .map(|b| b.iter().copied().filter(|&i| i < k).collect::<Vec<_>>())
            .filter(|b: &Vec<usize>| !b.is_empty())
            .collect();
        BlockParabolic { m: k, blocks }
    }

    /// Levi blocks as an unordered set.
    pub fn levi(&self) -> BTreeSet<Vec<usize>> {
        self.blocks.iter().cloned().collect()
    }

    /// All ordered set partitions of {0..m-1}.
    pub fn all_semistandard(m: usize) -> Vec<BlockParabolic> {
        let mut out = Vec::new();
        let mut assign = vec![0usize; m];
        // assign[i] = block label; enumerate surjections onto 0..k in all orders
        fn rec(i: usize, m: usize, k: usize, assign: &mut Vec<usize>, out: &mut Vec<BlockParabolic>) {
            if i == m {
                let mut blocks = vec![Vec::new(); k];
                for (x, &b) in assign.iter().enumerate() {
                    blocks[b].push(x);
                }
                if blocks.iter().all(|b| !b.is_empty()) {
                    out.push(BlockParabolic { m, blocks });
                }
                return;
            }
            for b in 0..k {
                assign[i] = b;
                rec(i + 1, m, k, assign, out);
            }
        }
        for k in 1..=m {
            rec(0, m, k, &mut assign, &mut out);
        }
        out.sort();
        out.dedup();
        out
    }
}

impl fmt::Display for BlockParabolic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let bs: Vec<String> = self
            .blocks
            .iter()
            .map(|b| format!("{{{}}}", b.iter().map(|i| (i + 1).to_string()).collect::<Vec<_>>().join(",")))
            .collect();
        write!(f, "({})", bs.join(","))
    }
}

impl Serialize for BlockParabolic {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let b: Vec<Vec<usize>> = self.blocks.iter().map(|b| b.iter().map(|i| i + 1).collect()).collect();
        b.serialize(s)
    }
}

pub fn conjugate(w: &Perm, p: &BlockParabolic) -> Result<BlockParabolic, WeylError> {
    if w.degree() != p.m {
        return Err(WeylError::Dimension(w.degree(), p.m));
    }
    let blocks = p
        .blocks
        .iter()
        .map(|b| {
            let mut v: Vec<usize> = b.iter().map(|&i| w.apply(i)).collect();
            v.sort_unstable();
            v
        })
        .collect();
    Ok(BlockParabolic { m: p.m, blocks })
}

/// Permutations increasing on every block of `sizes` (as a standard composition),
/// in lexicographic order of image arrays.
fn shuffles(sizes: &[usize]) -> Vec<Perm> {
    let m: usize = sizes.iter().sum();
    let mut label = Vec::with_capacity(m);
    for (k, &s) in sizes.iter().enumerate() {
        label.extend(std::iter::repeat(k).take(s));
    }
    let offsets = Composition { parts: sizes.to_vec() }.offsets();
    // A shuffle is determined by the word: which block each target position draws from.
    let mut out = Vec::new();
    let mut remaining = sizes.to_vec();
    let mut word = Vec::with_capacity(m);
    fn rec(m: usize, remaining: &mut Vec<usize>, word: &mut Vec<usize>, sizes: &[usize], offsets: &[usize], out: &mut Vec<Perm>) {
        if word.len() == m {
            let mut img = vec![0; m];
            let mut used = vec![0; sizes.len()];
            for (pos, &k) in word.iter().enumerate() {
                img[offsets[k] + used[k]] = pos;
                used[k] += 1;
            }
            out.push(Perm(img));
            return;
        }
        for k in 0..remaining.len() {
            if remaining[k] > 0 {
                remaining[k] -= 1;
                word.push(k);
                rec(m, remaining, word, sizes, offsets, out);
                word.pop();
                remaining[k] += 1;
            }
        }
    }
    rec(m, &mut remaining, &mut word, sizes, &offsets, &mut out);
    let _ = label;
    out.sort();
    out
}

pub fn is_coset_rep(w: &Perm, p: &BlockParabolic, q: &BlockParabolic) -> bool {
    let wi = w.inverse();
    p.blocks.iter().all(|b| w.increasing_on(b)) && q.blocks.iter().all(|b| wi.increasing_on(b))
}

/// {}_Q W_P: w increasing on each block of P, w⁻¹ increasing on each block of Q.
pub fn double_coset_reps(p: &BlockParabolic, q: &BlockParabolic) -> Result<Vec<Perm>, WeylError> {
    if !p.is_standard() || !q.is_standard() {
        return Err(WeylError::NotStandard);
    }
    if p.m != q.m {
        return Err(WeylError::Dimension(p.m, q.m));
    }
    Ok(shuffles(&p.sizes()).into_iter().filter(|w| is_coset_rep(w, p, q)).collect())
}

/// (P_w, Q_w) for w ∈ {}_Q W_P.
pub fn relative_parabolics(w: &Perm, p: &BlockParabolic, q: &BlockParabolic) -> Result<(BlockParabolic, BlockParabolic), WeylError> {
    if !is_coset_rep(w, p, q) {
        return Err(WeylError::NotRepresentative);
    }
    let wi = w.inverse();
    let mut pw = Vec::new();
    for b in &p.blocks {
        for b2 in &q.blocks {
            let s: Vec<usize> = b.iter().copied().filter(|&i| b2.contains(&w.apply(i))).collect();
            if !s.is_empty() {
                pw.push(s);
            }
        }
    }
    let mut qw = Vec::new();
    for b2 in &q.blocks {
        for b in &p.blocks {
            let s: Vec<usize> = b2.iter().copied().filter(|&j| b.contains(&wi.apply(j))).collect();
            if !s.is_empty() {
                qw.push(s);
            }
        }
    }
    Ok((BlockParabolic::new(p.m, pw)?, BlockParabolic::new(q.m, qw)?))
}

/// W(P;Q): representatives with P_w = P, i.e. every block of P lands in one block of Q.
pub fn w_into(p: &BlockParabolic, q: &BlockParabolic) -> Result<Vec<Perm>, WeylError> {
    let reps = double_coset_reps(p, q)?;
    Ok(reps
        .into_iter()
        .filter(|w| relative_parabolics(w, p, q).map(|(pw, _)| pw == *p).unwrap_or(false))
        .collect())
}

/// W(P,Q): elements of W(P;Q) whose image Levi is the Levi of Q.
pub fn w_between(p: &BlockParabolic, q: &BlockParabolic) -> Result<Vec<Perm>, WeylError> {
    Ok(w_into(p, q)?
        .into_iter()
        .filter(|w| conjugate(w, p).map(|c| c.levi() == q.levi()).unwrap_or(false))
        .collect())
}

/// Unique w2 = w1·w with w ∈ {}_R W_P and w1 ∈ {}_Q W^R_{R_w} (inside the Levi of R).
pub fn decompose_coset(w2: &Perm, p: &BlockParabolic, q: &BlockParabolic, r: &BlockParabolic) -> Result<(Perm, Perm), WeylError> {
    if !r.contains(q) || !q.is_standard() || !r.is_standard() {
        return Err(WeylError::Invalid("need Q ⊂ R standard".into()));
    }
    if !is_coset_rep(w2, p, q) {
        return Err(WeylError::NotRepresentative);
    }
    let m = p.m;
    let mut w = vec![0; m];
    for b in &r.blocks {
        let src: Vec<usize> = (0..m).filter(|&i| b.contains(&w2.apply(i))).collect();
        for (s, &t) in src.iter().zip(b.iter()) {
            w[*s] = t;
        }
    }
    let w = Perm(w);
    let w1 = w2.compose(&w.inverse());
    debug_assert!(is_in_levi_coset(&w1, &w, p, q, r));
    Ok((w1, w))
}

/// Checks w ∈ {}_R W_P and w1 ∈ {}_Q W^R_{R_w}.
pub fn is_in_levi_coset(w1: &Perm, w: &Perm, p: &BlockParabolic, q: &BlockParabolic, r: &BlockParabolic) -> bool {
    if !is_coset_rep(w, p, r) {
        return false;
    }
    let Ok((_, rw)) = relative_parabolics(w, p, r) else { return false };
    let preserves_r = r.blocks.iter().all(|b| b.iter().all(|&i| b.contains(&w1.apply(i))));
    preserves_r && is_coset_rep(w1, &rw, q)
}

/// Reverses the order of the cells inside each block of `p`; `cells` refines the
/// composition of `p`.
pub fn longest_in_w(p: &BlockParabolic, cells: &Composition) -> Result<Perm, WeylError> {
    let pc = p.composition()?;
    if !cells.refines(&pc) {
        return Err(WeylError::Invalid(format!("{cells} does not refine {pc}")));
    }
    let mut sigma = vec![0; cells.len()];
    let mut c = 0;
    for &bsize in &pc.parts {
        let start = c;
        let mut acc = 0;
        while acc < bsize {
            acc += cells.parts[c];
            c += 1;
        }
        let k = c - start;
        for j in 0..k {
            sigma[start + j] = start + (k - 1 - j);
        }
    }
    Ok(Perm::from_block_permutation(&cells.parts, &Perm(sigma)).0)
}

/// w_Q: longest element of W(Q), reversing the blocks of Q and keeping their insides.
pub fn longest_of_levi_quotient(q: &BlockParabolic) -> Result<Perm, WeylError> {
    let c = q.composition()?;
    let k = c.len();
    let sigma = Perm((0..k).map(|p| k - 1 - p).collect());
    Ok(Perm::from_block_permutation(&c.parts, &sigma).0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn comp(v: &[usize]) -> Composition {
        Composition::new(v.to_vec()).unwrap()
    }

    #[test]
    fn conjugate_example() {
        let p = BlockParabolic::standard(&comp(&[1, 2]));
        let w = Perm::from_images_1based(&[3, 1, 2]).unwrap();
        let c = conjugate(&w, &p).unwrap();
        assert_eq!(c.blocks(), &[vec![2], vec![0, 1]]);
        let rs = c.root_set();
        assert!(rs.contains(&(2, 0)) && rs.contains(&(2, 1)));
    }

    #[test]
    fn coset_reps_small() {
        let b = BlockParabolic::borel(2);
        assert_eq!(double_coset_reps(&b, &b).unwrap().len(), 2);
        let p = BlockParabolic::standard(&comp(&[2, 1]));
        let q = BlockParabolic::standard(&comp(&[1, 2]));
        let reps = double_coset_reps(&p, &q).unwrap();
        let brute: Vec<Perm> = Perm::all(3).into_iter().filter(|w| is_coset_rep(w, &p, &q)).collect();
        assert_eq!(reps, brute);
        let imgs: Vec<Vec<usize>> = reps.iter().map(|w| w.images_1based()).collect();
        assert_eq!(imgs, vec![vec![1, 2, 3], vec![2, 3, 1]]);
        let g = BlockParabolic::full(4);
        assert_eq!(double_coset_reps(&g, &g).unwrap().len(), 1);
    }

    #[test]
    fn relative_parabolic_example() {
        let p = BlockParabolic::standard(&comp(&[2, 1]));
        let q = BlockParabolic::standard(&comp(&[1, 2]));
        let (pw, qw) = relative_parabolics(&Perm::identity(3), &p, &q).unwrap();
        assert_eq!(pw, BlockParabolic::borel(3));
        assert_eq!(qw, BlockParabolic::borel(3));
    }

    #[test]
    fn longest_block_reversal() {
        let p = BlockParabolic::full(4);
        let w = longest_in_w(&p, &comp(&[2, 2])).unwrap();
        assert_eq!(w.images_1based(), vec![3, 4, 1, 2]);
        assert!(w.compose(&w).is_identity());
        let w = longest_in_w(&BlockParabolic::standard(&comp(&[2, 1])), &comp(&[2, 1])).unwrap();
        assert!(w.is_identity());
    }

    #[test]
    fn w_q_reverses_blocks() {
        let q = BlockParabolic::standard(&comp(&[1, 2]));
        assert_eq!(longest_of_levi_quotient(&q).unwrap().images_1based(), vec![3, 1, 2]);
        assert!(longest_of_levi_quotient(&BlockParabolic::full(3)).unwrap().is_identity());
    }

    #[test]
    fn decompose_full_r() {
        let p = BlockParabolic::borel(3);
        let q = BlockParabolic::standard(&comp(&[1, 2]));
        let r = BlockParabolic::full(3);
        for w2 in double_coset_reps(&p, &q).unwrap() {
            let (w1, w) = decompose_coset(&w2, &p, &q, &r).unwrap();
            assert!(w.is_identity());
            assert_eq!(w1, w2);
        }
    }

    #[test]
    fn cycle_notation() {
        let c = Perm::from_cycle(3, &[1, 3, 2]);
        assert_eq!(c.images_1based(), vec![3, 1, 2]);
    }
}
