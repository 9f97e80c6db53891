//! Rankin-Selberg parabolics of GL_n x GL_{n+1} and the geometry of their z_P spaces.

use crate::parabolic::{conjugate, BlockParabolic, Composition, Perm, WeylError};
use crate::rat::{self, q, Q};
use num::{One, Signed, Zero};
use serde::Serialize;
use std::fmt;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct RSParabolic {
    pub n: usize,
    pub p_h: Composition,
    pub p_std_np1: Composition,
    /// 1-based distinguished block index i_P.
    pub i_0: usize,
    pub type_tag: u8,
    pub w_std: Perm,
    #[serde(skip)]
    pub p_np1: BlockParabolic,
}

impl fmt::Display for RSParabolic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, i0={})", self.p_std_np1, self.i_0)
    }
}

/// The two candidate orientations of the cycle moving n+1 to N+1.
fn cycle_candidates(n: usize, big_n: usize) -> Vec<Perm> {
    // literal reading (N+2 ... n+1 N+1) and its inverse
    let m = n + 1;
    if big_n + 2 > m {
        return vec![Perm::identity(m)];
    }
    let mut cyc: Vec<usize> = (big_n + 2..=m).collect();
    cyc.push(big_n + 1);
    let lit = Perm::from_cycle(m, &cyc);
    let inv = lit.inverse();
    vec![lit, inv]
}

impl RSParabolic {
    /// Builds the RS parabolic attached to (P^std_{n+1}, i_0); validates the defining
    /// property P_{n+1} ∩ GL_n = P_H.
    pub fn from_pair(p_std: &Composition, i_0: usize) -> Result<Self, WeylError> {
        let m = p_std.len();
        if i_0 == 0 || i_0 > m {
            return Err(WeylError::Invalid(format!("i_0 = {i_0} out of range 1..{m}")));
        }
        let n = p_std.ambient() - 1;
        let part = p_std.parts[i_0 - 1];
        let before: usize = p_std.parts[..i_0 - 1].iter().sum();
        let (type_tag, p_h, big_n) = if part >= 2 {
            let mut h = p_std.parts.clone();
            h[i_0 - 1] -= 1;
            (1u8, Composition { parts: h }, before + part - 1)
        } else {
            let mut h = p_std.parts.clone();
            h.remove(i_0 - 1);
            (2u8, Composition { parts: h }, before)
        };
        let pstd = BlockParabolic::standard(p_std);
        let ph = BlockParabolic::standard(&p_h);
        let mut chosen = None;
        for w in cycle_candidates(n, big_n) {
            let c = conjugate(&w, &pstd)?;
            if c.intersect_corner(n) == ph && c.block_index(n) == i_0 - 1 {
                chosen = Some((w, c));
                break;
            }
        }
        let (w_std, p_np1) = chosen.ok_or_else(|| WeylError::Invalid("cycle orientation validation failed".into()))?;
        Ok(RSParabolic { n, p_h, p_std_np1: p_std.clone(), i_0, type_tag, w_std, p_np1 })
    }

    /// from_pair with an explicit P_H that must agree with the derived one.
    pub fn from_pair_checked(p_std: &Composition, i_0: usize, p_h: &Composition) -> Result<Self, WeylError> {
        let r = Self::from_pair(p_std, i_0)?;
        if &r.p_h != p_h {
            return Err(WeylError::Invalid(format!("({p_std}, {i_0}) is not attached to P_H = {p_h}")));
        }
        Ok(r)
    }

    /// Inverse of the classification map: a semi-standard P_{n+1} whose corner is standard.
    pub fn from_semistandard(p_np1: &BlockParabolic) -> Result<Self, WeylError> {
        let n = p_np1.ambient() - 1;
        if !p_np1.intersect_corner(n).is_standard() {
            return Err(WeylError::Invalid("P_{n+1} ∩ GL_n is not standard".into()));
        }
        let i_0 = p_np1.block_index(n) + 1;
        let r = Self::from_pair(&Composition { parts: p_np1.sizes() }, i_0)?;
        if &r.p_np1 != p_np1 {
            return Err(WeylError::Invalid("round trip failed".into()));
        }
        Ok(r)
    }

    pub fn full(n: usize) -> Self {
        Self::from_pair(&Composition { parts: vec![n + 1] }, 1).expect("G is an RS parabolic")
    }

    pub fn m(&self) -> usize {
        self.p_std_np1.len()
    }

    /// Block sizes n_i on the GL_{n+1} side.
    pub fn sizes(&self) -> &[usize] {
        &self.p_std_np1.parts
    }

    /// Block sizes on the GL_n side, indexed by the m blocks (the i_P slot shrinks by one).
    pub fn h_sizes(&self) -> Vec<usize> {
        let mut v = self.sizes().to_vec();
        v[self.i_0 - 1] -= 1;
        v
    }

    /// GL_n coordinates (0-based) of block i (0-based).
    pub fn h_block_coords(&self, i: usize) -> std::ops::Range<usize> {
        let hs = self.h_sizes();
        let s: usize = hs[..i].iter().sum();
        s..s + hs[i]
    }

    pub fn p_n(&self) -> BlockParabolic {
        BlockParabolic::standard(&self.p_h)
    }

    pub fn is_standard(&self) -> bool {
        self.w_std.is_identity()
    }

    /// P ⊂ Q as parabolics of G.
    pub fn is_contained_in(&self, q: &RSParabolic) -> bool {
        self.n == q.n && q.p_np1.contains(&self.p_np1) && q.p_n().contains(&self.p_n())
    }

    pub fn levi_decomposition(&self) -> LeviDecomposition {
        let ip = self.i_0 - 1;
        LeviDecomposition {
            m_plus: Composition { parts: self.sizes()[..ip].to_vec() },
            cm_n: self.sizes()[ip] - 1,
            cm_np1: self.sizes()[ip],
            m_minus: Composition { parts: self.sizes()[ip + 1..].to_vec() },
        }
    }

    pub fn z_space(&self) -> ZSpace {
        ZSpace::new(self)
    }

    /// Standard RS parabolics: (Q_{n+1}, i_0 = m).
    pub fn standard_all(n: usize) -> Vec<RSParabolic> {
        Composition::all(n + 1)
            .into_iter()
            .map(|c| {
                let m = c.len();
                Self::from_pair(&c, m).expect("standard pair")
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LeviDecomposition {
    pub m_plus: Composition,
    pub cm_n: usize,
    pub cm_np1: usize,
    pub m_minus: Composition,
}

/// One RS parabolic per (composition of n+1, i_0), sorted by composition then i_0.
pub fn enumerate_rs(n: usize) -> Vec<RSParabolic> {
    let mut out = Vec::new();
    for c in Composition::all(n + 1) {
        for i0 in 1..=c.len() {
            out.push(RSParabolic::from_pair(&c, i0).expect("every pair is valid"));
        }
    }
    out
}

pub fn rs_count_formula(n: usize) -> usize {
    (1..=n + 1).map(|m| m * binom(n, m - 1)).sum()
}

fn binom(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// Brute force: semi-standard P_{n+1} with P_{n+1} ∩ GL_n standard.
pub fn brute_force_rs(n: usize) -> Vec<BlockParabolic> {
    BlockParabolic::all_semistandard(n + 1)
        .into_iter()
        .filter(|p| p.intersect_corner(n).is_standard())
        .collect()
}

/// The pair (P ∩ M_Q, P ∩ cM_Q) of the relative bijection.
#[derive(Clone, Debug, Serialize)]
pub struct RelativeRestriction {
    /// For each block i ≠ i_Q of Q, the composition of n_i induced by P.
    pub bold_p: Vec<Composition>,
    pub cal_p: RSParabolic,
    /// GL_{n+1} positions of cM_Q in order.
    pub cm_positions: Vec<usize>,
}

pub fn relative_restrict(p: &RSParabolic, qq: &RSParabolic) -> Result<RelativeRestriction, WeylError> {
    if !p.is_contained_in(qq) {
        return Err(WeylError::Invalid(format!("{p} is not contained in {qq}")));
    }
    let mut bold_p = Vec::new();
    let mut cal = None;
    let mut cm_positions = Vec::new();
    for (iq, qb) in qq.p_np1.blocks().iter().enumerate() {
        let inner: Vec<&Vec<usize>> = p.p_np1.blocks().iter().filter(|b| qb.contains(&b[0])).collect();
        if iq + 1 == qq.i_0 {
            cm_positions = qb.clone();
            let relabel = |x: usize| qb.iter().position(|&y| y == x).unwrap();
            let blocks = inner.iter().map(|b| b.iter().map(|&x| relabel(x)).collect()).collect();
            let bp = BlockParabolic::new(qb.len(), blocks)?;
            cal = Some(RSParabolic::from_semistandard(&bp)?);
        } else {
            bold_p.push(Composition { parts: inner.iter().map(|b| b.len()).collect() });
        }
    }
    Ok(RelativeRestriction { bold_p, cal_p: cal.expect("Q has a distinguished block"), cm_positions })
}

/// Checks w_P^std = ι(w_calP^std) · w_Q^std.
pub fn check_relative_factorization(p: &RSParabolic, qq: &RSParabolic) -> Result<bool, WeylError> {
    let rr = relative_restrict(p, qq)?;
    let emb = rr.cal_p.w_std.embed(p.n + 1, &rr.cm_positions);
    Ok(emb.compose(&qq.w_std) == p.w_std)
}

/// z_P in e-coordinates (length m, slot i_P pinned to zero), plus its embedding in a_{0,H} = Q^n.
#[derive(Clone, Debug, Serialize)]
pub struct ZSpace {
    pub parent: RSParabolic,
    pub dim: usize,
    /// n_i on the GL_{n+1} side.
    pub sizes: Vec<usize>,
    /// Simple roots as e*-covectors.
    #[serde(serialize_with = "ser_mat")]
    pub roots: Vec<Vec<Q>>,
    /// Coweights as e-vectors.
    #[serde(serialize_with = "ser_mat")]
    pub coweights: Vec<Vec<Q>>,
    /// Coroots as e-vectors.
    #[serde(serialize_with = "ser_mat")]
    pub coroots: Vec<Vec<Q>>,
    #[serde(serialize_with = "rat::ser_qvec")]
    pub rho_bar: Vec<Q>,
    #[serde(serialize_with = "rat::ser_qvec")]
    pub rho_std: Vec<Q>,
    #[serde(serialize_with = "rat::ser_q")]
    pub vol_coweights: Q,
}

fn ser_mat<S: serde::Serializer>(m: &[Vec<Q>], s: S) -> Result<S::Ok, S::Error> {
    let v: Vec<Vec<String>> = m.iter().map(|r| r.iter().map(rat::fmt_q).collect()).collect();
    v.serialize(s)
}

impl ZSpace {
    pub fn new(p: &RSParabolic) -> Self {
        let m = p.m();
        let ip = p.i_0 - 1;
        let sizes = p.sizes().to_vec();
        let ni = |i: usize| q(sizes[i] as i64);
        let mut roots = Vec::new();
        for i in 0..m.saturating_sub(1) {
            let mut a = rat::zeros(m);
            if i != ip {
                a[i] = ni(i).recip();
            }
            if i + 1 != ip {
                a[i + 1] = -ni(i + 1).recip();
            }
            roots.push(a);
        }
        let mut coweights = Vec::new();
        for i in 0..m {
            if i == ip {
                continue;
            }
            let mut v = rat::zeros(m);
            if i < ip {
                for j in 0..=i {
                    v[j] = ni(j);
                }
            } else {
                for j in i..m {
                    v[j] = -ni(j);
                }
            }
            coweights.push(v);
        }
        let mut coroots = Vec::new();
        for i in 0..m.saturating_sub(1) {
            let mut v = rat::zeros(m);
            if i != ip {
                v[i] = Q::one();
            }
            if i + 1 != ip {
                v[i + 1] = -Q::one();
            }
            coroots.push(v);
        }
        let rho_bar = (0..m)
            .map(|i| if i < ip { rat::half() } else if i > ip { -rat::half() } else { Q::zero() })
            .collect();
        let rho_std = (0..m)
            .map(|i| if i < ip { rat::qf(1, 4) } else if i > ip { rat::qf(-1, 4) } else { Q::zero() })
            .collect();
        let vol = (0..m).filter(|&i| i != ip).fold(Q::one(), |acc, i| acc * ni(i));
        let z = ZSpace { parent: p.clone(), dim: m - 1, sizes, roots, coweights, coroots, rho_bar, rho_std, vol_coweights: vol };
        debug_assert!(z.check_dualities());
        z
    }

    /// Inner product on e-coordinates: (e_i, e_j) = δ_ij / n_i, slot i_P ignored.
    pub fn inner(&self, x: &[Q], y: &[Q]) -> Q {
        let ip = self.parent.i_0 - 1;
        (0..self.sizes.len())
            .filter(|&i| i != ip)
            .fold(Q::zero(), |acc, i| acc + &x[i] * &y[i] / q(self.sizes[i] as i64))
    }

    pub fn pair(&self, covector: &[Q], v: &[Q]) -> Q {
        rat::dot(covector, v)
    }

    pub fn check_dualities(&self) -> bool {
        let d = self.dim;
        for a in 0..d {
            for b in 0..d {
                let kd = if a == b { Q::one() } else { Q::zero() };
                if self.pair(&self.roots[a], &self.coweights[b]) != kd {
                    return false;
                }
                if self.inner(&self.coweights[a], &self.coroots[b]) != kd {
                    return false;
                }
            }
        }
        let ip = self.parent.i_0 - 1;
        self.coweights.iter().chain(&self.coroots).all(|v| v[ip].is_zero())
    }

    /// e_i (i ≠ i_P) as a vector of a_{0,H} = Q^n: 1/n_i on the coordinates of block i.
    pub fn e_to_h(&self, e: &[Q]) -> Vec<Q> {
        let p = &self.parent;
        let mut x = rat::zeros(p.n);
        for i in 0..self.sizes.len() {
            if i == p.i_0 - 1 {
                continue;
            }
            let c = &e[i] / q(self.sizes[i] as i64);
            for k in p.h_block_coords(i) {
                x[k] = c.clone();
            }
        }
        x
    }

    /// e*-covector as a vector of Q^n under the standard dot product (indicator of each block).
    pub fn covector_to_h(&self, f: &[Q]) -> Vec<Q> {
        let p = &self.parent;
        let mut x = rat::zeros(p.n);
        for i in 0..self.sizes.len() {
            if i == p.i_0 - 1 {
                continue;
            }
            for k in p.h_block_coords(i) {
                x[k] = f[i].clone();
            }
        }
        x
    }

    /// The defining chain H_1/n_1 > ... > 0 > ... > H_m/n_m.
    pub fn in_positive_chamber_chain(&self, h: &[Q]) -> bool {
        let ip = self.parent.i_0 - 1;
        let vals: Vec<Q> = (0..self.sizes.len())
            .map(|i| if i == ip { Q::zero() } else { &h[i] / q(self.sizes[i] as i64) })
            .collect();
        vals.windows(2).all(|w| w[0] > w[1])
    }

    /// Positivity of all coefficients in the coweight basis.
    pub fn in_positive_chamber_coweights(&self, h: &[Q]) -> bool {
        self.roots.iter().all(|a| self.pair(a, h).is_positive())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn comp(v: &[usize]) -> Composition {
        Composition::new(v.to_vec()).unwrap()
    }

    #[test]
    fn n1_census() {
        let all = enumerate_rs(1);
        assert_eq!(all.len(), 3);
        let g = RSParabolic::full(1);
        let p0 = RSParabolic::from_pair(&comp(&[1, 1]), 2).unwrap();
        let p0bar = RSParabolic::from_pair(&comp(&[1, 1]), 1).unwrap();
        assert!(p0.is_standard());
        assert_eq!(p0bar.p_np1.blocks(), &[vec![1], vec![0]]);
        assert!(all.contains(&g) && all.contains(&p0) && all.contains(&p0bar));
    }

    #[test]
    fn counts_match_formula() {
        assert_eq!(rs_count_formula(1), 3);
        assert_eq!(rs_count_formula(2), 8);
        for n in 1..=4 {
            assert_eq!(enumerate_rs(n).len(), rs_count_formula(n));
        }
    }

    #[test]
    fn from_pair_examples() {
        let p = RSParabolic::from_pair_checked(&comp(&[1, 2]), 2, &comp(&[1, 1])).unwrap();
        assert!(p.w_std.is_identity());
        let p = RSParabolic::from_pair_checked(&comp(&[1, 2]), 1, &comp(&[2])).unwrap();
        assert_eq!(p.w_std.images_1based(), vec![3, 1, 2]);
        assert_eq!(p.p_np1.blocks(), &[vec![2], vec![0, 1]]);
    }

    #[test]
    fn levi_example() {
        let p = RSParabolic::from_pair(&comp(&[1, 2]), 2).unwrap();
        let l = p.levi_decomposition();
        assert_eq!(l.m_plus.parts, vec![1]);
        assert_eq!((l.cm_n, l.cm_np1), (1, 2));
        assert!(l.m_minus.is_empty());
    }

    #[test]
    fn zspace_example() {
        let p = RSParabolic::from_pair(&comp(&[1, 1, 1]), 2).unwrap();
        let z = p.z_space();
        assert_eq!(z.coweights, vec![vec![q(1), q(0), q(0)], vec![q(0), q(0), q(-1)]]);
        assert_eq!(z.vol_coweights, q(1));
        let g = RSParabolic::full(3).z_space();
        assert_eq!(g.dim, 0);
        assert_eq!(g.vol_coweights, q(1));
    }

    #[test]
    fn relative_against_full() {
        for p in enumerate_rs(3) {
            let g = RSParabolic::full(3);
            let rr = relative_restrict(&p, &g).unwrap();
            assert!(rr.bold_p.is_empty());
            assert_eq!(rr.cal_p, p);
        }
    }
}

#[cfg(test)]
mod factorization_probe {
    use super::*;

    #[test]
    fn relative_factorization_all_n4() {
        for n in 1..=4 {
            let all = enumerate_rs(n);
            for qq in &all {
                for p in all.iter().filter(|p| p.is_contained_in(qq)) {
                    assert!(check_relative_factorization(p, qq).unwrap(), "{p} in {qq}");
                }
            }
        }
    }
}
