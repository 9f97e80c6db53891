//! Local zeta-factor arithmetic: lattice partitions Λ[≥M], exact ζ_q(s) = (1 − q^{−s})^{−1},
//! the unramified GL_1 × GL_2 identities and the support of the F^Q kernel.
//!
//! Points of Λ_{P,H} are handled in root coordinates y_α = ⟨α, a⟩; since the simple roots
//! form a basis of the dual lattice this is a bijection with Z^rank, and Λ_{Q,H} for Q ⊃ P
//! is the coordinate sublattice where the roots inside Q vanish.

use crate::formal_mero::{AffineForm, AtomKind, FormalMero, MeroError};
use crate::lfactors::{supercuspidal_l_local, AtomRegistry, LError, Scope};
use crate::parabolic::{w_into, BlockParabolic, Composition, Perm, WeylError};
use crate::rat::{self, fmt_q, q, Q};
use crate::relevance::{
    first_order, residue_weyl_data, second_order, singular_forms, FamilyEntry, GPar, GPerm, InducingPair, Layout, RelError, ResidueWeylData,
    Side,
};
use crate::rs::RSParabolic;
use num::{BigInt, One, Signed, ToPrimitive, Zero};
use rand::Rng;
use serde::Serialize;
use serde_json::json;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LocalError {
    #[error("threshold function undefined at {0:?}")]
    NonTotal(Vec<i64>),
    #[error("lattice spec: {0}")]
    Spec(String),
    #[error("pole of {0}")]
    Pole(String),
    #[error("degenerate point: {0}")]
    Degenerate(String),
    #[error("value is not rational: {0}")]
    NotRational(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("factorization witness: {0}")]
    Witness(String),
    #[error(transparent)]
    Rel(#[from] RelError),
    #[error(transparent)]
    Mero(#[from] MeroError),
    #[error(transparent)]
    L(#[from] LError),
    #[error(transparent)]
    Weyl(#[from] WeylError),
}

// ---------------------------------------------------------------------------------------
// lattice partitions

/// Λ_{P,H} with the integer pairings ⟨α_i, g_j⟩ of the simple roots on lattice generators.
#[derive(Clone, Debug, Serialize)]
pub struct LatticeSpec {
    pub rank: usize,
    pub pairings: Vec<Vec<i64>>,
    /// When built from an RS parabolic, the parabolic itself; Q ⊃ P are obtained by
    /// merging the blocks on either side of each killed root.
    #[serde(skip)]
    pub parabolic: Option<RSParabolic>,
    #[serde(skip)]
    inverse: Vec<Vec<i64>>,
}

impl LatticeSpec {
    pub fn new(pairings: Vec<Vec<i64>>) -> Result<Self, LocalError> {
        let rank = pairings.len();
        if rank > 4 {
            return Err(LocalError::Spec(format!("rank {rank} exceeds 4")));
        }
        if pairings.iter().any(|r| r.len() != rank) {
            return Err(LocalError::Spec("pairing matrix must be square".into()));
        }
        let m: Vec<Vec<Q>> = pairings.iter().map(|r| r.iter().map(|&v| q(v)).collect()).collect();
        if rank > 0 && rat::det(&m).abs() != Q::one() {
            return Err(LocalError::Spec("the roots are not a basis of the dual lattice (determinant is not ±1)".into()));
        }
        let inv = if rank == 0 { vec![] } else { rat::inverse(&m).expect("unimodular") };
        let inverse = inv.iter().map(|r| r.iter().map(|v| v.to_integer().to_i64().expect("small")).collect()).collect();
        Ok(LatticeSpec { rank, pairings, parabolic: None, inverse })
    }

    pub fn standard(rank: usize) -> Result<Self, LocalError> {
        Self::new((0..rank).map(|i| (0..rank).map(|j| i64::from(i == j)).collect()).collect())
    }

    /// Λ_{P,H} with the coweights of P as generators; the pairings come from [`crate::rs::ZSpace`].
    pub fn from_rs(p: &RSParabolic) -> Result<Self, LocalError> {
        let z = p.z_space();
        let mut m = Vec::new();
        for a in &z.roots {
            let mut row = Vec::new();
            for v in &z.coweights {
                let x = rat::dot(a, v);
                if !x.is_integer() {
                    return Err(LocalError::Spec(format!("pairing {} is not integral", fmt_q(&x))));
                }
                row.push(x.to_integer().to_i64().expect("small"));
            }
            m.push(row);
        }
        let mut s = Self::new(m)?;
        s.parabolic = Some(p.clone());
        Ok(s)
    }

    /// Lattice point with the given root coordinates.
    pub fn point(&self, y: &[i64]) -> Vec<i64> {
        self.inverse.iter().map(|r| r.iter().zip(y).map(|(a, b)| a * b).sum()).collect()
    }

    pub fn root_coords(&self, a: &[i64]) -> Vec<i64> {
        self.pairings.iter().map(|r| r.iter().zip(a).map(|(x, y)| x * y).sum()).collect()
    }

    /// The parabolic Q ⊃ P whose roots in Δ_P are `killed`.
    pub fn tower_member(&self, killed: &[usize]) -> Option<RSParabolic> {
        let p = self.parabolic.as_ref()?;
        let mut parts: Vec<usize> = Vec::new();
        let mut i0 = 0;
        for (i, &s) in p.sizes().iter().enumerate() {
            if i > 0 && killed.contains(&(i - 1)) {
                *parts.last_mut().unwrap() += s;
            } else {
                parts.push(s);
            }
            if i + 1 == p.i_0 {
                i0 = parts.len();
            }
        }
        RSParabolic::from_pair(&Composition { parts }, i0).ok()
    }
}

/// a + Λ_{Q,H}[≥ M'] in root coordinates: y_α = base_α on the killed roots of Q,
/// y_α − base_α ≥ M' on the others.
#[derive(Clone, Debug, Serialize)]
pub struct Coset {
    pub base: Vec<i64>,
    /// The same base point as an element of the lattice.
    pub base_point: Vec<i64>,
    pub killed: Vec<usize>,
    pub m_prime: i64,
    /// M_a at the base point.
    pub threshold: i64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parabolic: Option<String>,
}

impl Coset {
    pub fn contains(&self, y: &[i64]) -> bool {
        y.iter().enumerate().all(|(i, &v)| {
            let d = v - self.base[i];
            if self.killed.contains(&i) {
                d == 0
            } else {
                d >= self.m_prime
            }
        })
    }

    /// The smallest point of the coset.
    pub fn corner(&self) -> Vec<i64> {
        self.base.iter().enumerate().map(|(i, &b)| if self.killed.contains(&i) { b } else { b + self.m_prime }).collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Partition {
    pub rank: usize,
    pub m: i64,
    pub cosets: Vec<Coset>,
}

/// Decomposes Λ_{P,H}[≥M] into finitely many cosets a + Λ_{Q,H}[≥M'_a] with M'_a ≥ M_a.
///
/// If M_0 = M_{0} ≤ M there is nothing to do. Otherwise Λ[≥M] is the disjoint union over
/// subsets I of the roots of the boxes where the I-coordinates lie in [M, M_0) and the
/// others are ≥ M_0; the box for I is a union of cosets of the sublattice killing I, on
/// which we recurse with the thresholds seen from the new base point.
pub fn lattice_partition(spec: &LatticeSpec, m: i64, thresholds: &dyn Fn(&[i64]) -> Option<i64>) -> Result<Partition, LocalError> {
    let mut out = Vec::new();
    let mut killed = vec![false; spec.rank];
    partition_rec(spec, &mut killed, vec![0; spec.rank], m, thresholds, &mut out)?;
    Ok(Partition { rank: spec.rank, m, cosets: out })
}

fn partition_rec(
    spec: &LatticeSpec,
    killed: &mut Vec<bool>,
    base: Vec<i64>,
    m: i64,
    thr: &dyn Fn(&[i64]) -> Option<i64>,
    out: &mut Vec<Coset>,
) -> Result<(), LocalError> {
    let point = spec.point(&base);
    let m0 = thr(&point).ok_or_else(|| LocalError::NonTotal(point.clone()))?;
    let free: Vec<usize> = (0..spec.rank).filter(|&i| !killed[i]).collect();
    let emit = |killed: &[bool], base: Vec<i64>, m_prime: i64, out: &mut Vec<Coset>| {
        let k: Vec<usize> = (0..spec.rank).filter(|&i| killed[i]).collect();
        out.push(Coset {
            parabolic: spec.tower_member(&k).map(|p| p.to_string()),
            base_point: spec.point(&base),
            base,
            killed: k,
            m_prime,
            threshold: m0,
        });
    };
    if free.is_empty() {
        // Λ_{G,H} = {0}: a singleton
        emit(killed, base, m.max(m0), out);
        return Ok(());
    }
    if m0 <= m {
        emit(killed, base, m, out);
        return Ok(());
    }
    for mask in 0u32..(1 << free.len()) {
        let sub: Vec<usize> = free.iter().enumerate().filter(|(b, _)| mask >> b & 1 == 1).map(|(_, &i)| i).collect();
        if sub.is_empty() {
            emit(killed, base.clone(), m0, out);
            continue;
        }
        for &i in &sub {
            killed[i] = true;
        }
        let width = (m0 - m) as usize;
        let total = width.pow(sub.len() as u32);
        for idx in 0..total {
            let mut b = base.clone();
            let mut r = idx;
            for &i in &sub {
                b[i] += m + (r % width) as i64;
                r /= width;
            }
            partition_rec(spec, killed, b, m0, thr, out)?;
        }
        for &i in &sub {
            killed[i] = false;
        }
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct PartitionCheck {
    pub cosets: usize,
    pub box_side: i64,
    pub points: usize,
    pub uncovered: usize,
    pub overlapping: usize,
    pub outside: usize,
    pub threshold_violations: usize,
}

impl PartitionCheck {
    pub fn ok(&self) -> bool {
        self.uncovered == 0 && self.overlapping == 0 && self.outside == 0 && self.threshold_violations == 0
    }
}

/// Brute-force membership on the box [M, M+side]^rank of root coordinates, plus
/// containment of every coset in Λ[≥M] and M'_a ≥ M_a.
pub fn check_partition(part: &Partition, side: i64) -> PartitionCheck {
    let r = part.rank;
    let mut index: HashMap<(Vec<usize>, Vec<i64>), Vec<usize>> = HashMap::new();
    for (c, cs) in part.cosets.iter().enumerate() {
        let key: Vec<i64> = cs.killed.iter().map(|&i| cs.base[i]).collect();
        index.entry((cs.killed.clone(), key)).or_default().push(c);
    }
    let masks: BTreeSet<Vec<usize>> = part.cosets.iter().map(|c| c.killed.clone()).collect();
    let mut chk = PartitionCheck {
        cosets: part.cosets.len(),
        box_side: side,
        points: 0,
        uncovered: 0,
        overlapping: 0,
        outside: 0,
        threshold_violations: 0,
    };
    for c in &part.cosets {
        if c.corner().iter().any(|&v| v < part.m) {
            chk.outside += 1;
        }
        if c.m_prime < c.threshold {
            chk.threshold_violations += 1;
        }
    }
    let width = (side + 1) as usize;
    let total = width.pow(r as u32);
    let mut y = vec![0i64; r];
    for idx in 0..total {
        let mut t = idx;
        for v in y.iter_mut() {
            *v = part.m + (t % width) as i64;
            t /= width;
        }
        let mut hits = 0;
        for mask in &masks {
            let key: Vec<i64> = mask.iter().map(|&i| y[i]).collect();
            if let Some(list) = index.get(&(mask.clone(), key)) {
                hits += list.iter().filter(|&&c| part.cosets[c].contains(&y)).count();
            }
        }
        chk.points += 1;
        match hits {
            0 => chk.uncovered += 1,
            1 => {}
            _ => chk.overlapping += 1,
        }
    }
    chk
}

/// Deterministic pseudo-random thresholds in [lo, hi], a function of the lattice point.
pub fn hashed_thresholds(seed: u64, lo: i64, hi: i64) -> impl Fn(&[i64]) -> Option<i64> {
    move |a: &[i64]| {
        let mut h = seed ^ 0x9e37_79b9_7f4a_7c15;
        for &v in a {
            h = splitmix(h ^ (v as u64));
        }
        Some(lo + (h % (hi - lo + 1) as u64) as i64)
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

// ---------------------------------------------------------------------------------------
// exact ζ_q

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PointMode {
    /// Coordinates are the values q^{−λ_i}.
    QPower,
    /// Coordinates are the λ_i themselves (must be integers for exact evaluation).
    Exponent,
}

#[derive(Clone, Debug, Serialize)]
pub struct RationalFunctionPoint {
    #[serde(serialize_with = "rat::ser_q")]
    pub q: Q,
    pub mode: PointMode,
    #[serde(serialize_with = "rat::ser_qvec")]
    pub values: Vec<Q>,
}

fn qpow(base: &Q, e: &BigInt) -> Q {
    let k = e.to_i64().expect("small exponent");
    if k >= 0 {
        num::pow(base.clone(), k as usize)
    } else {
        num::pow(base.recip(), (-k) as usize)
    }
}

impl RationalFunctionPoint {
    pub fn new(q: Q, mode: PointMode, values: Vec<Q>) -> Result<Self, LocalError> {
        if q <= Q::one() {
            return Err(LocalError::Precondition(format!("q = {} must exceed 1", fmt_q(&q))));
        }
        if mode == PointMode::QPower && values.iter().any(|v| !v.is_positive()) {
            return Err(LocalError::Precondition("q^{-s} values must be positive".into()));
        }
        Ok(RationalFunctionPoint { q, mode, values })
    }

    /// q^{−λ_i}.
    pub fn q_power(&self, i: usize) -> Result<Q, LocalError> {
        let v = &self.values[i];
        match self.mode {
            PointMode::QPower => Ok(v.clone()),
            PointMode::Exponent => {
                if !v.is_integer() {
                    return Err(LocalError::NotRational(format!("q^(-{})", fmt_q(v))));
                }
                Ok(qpow(&self.q, &-v.to_integer()))
            }
        }
    }

    /// q^{−arg(λ)}; needs integer coefficients and constant.
    pub fn q_power_of(&self, arg: &AffineForm) -> Result<Q, LocalError> {
        if arg.nvars() != self.values.len() {
            return Err(LocalError::Precondition(format!("form in {} variables at a point with {}", arg.nvars(), self.values.len())));
        }
        if !arg.constant.is_integer() || arg.coeffs.iter().any(|c| !c.is_integer()) {
            return Err(LocalError::NotRational("q-power of a form with non-integral coefficients".into()));
        }
        let mut out = qpow(&self.q, &-arg.constant.to_integer());
        for (i, c) in arg.coeffs.iter().enumerate() {
            if !c.is_zero() {
                out *= qpow(&self.q_power(i)?, &c.to_integer());
            }
        }
        Ok(out)
    }
}

/// ζ_q(arg) as a formal atom.
pub fn zeta_q(names: &[String], arg: &AffineForm) -> FormalMero {
    FormalMero::atom(names, AtomKind::LocalZeta, arg.clone(), 1)
}

/// (1 − q^{−s})^{−1} from q^{−s}.
pub fn zeta_from_power(x: &Q) -> Result<Q, LocalError> {
    if x.is_one() {
        return Err(LocalError::Pole("ζ_q at s = 0".into()));
    }
    Ok((Q::one() - x).recip())
}

/// ζ_q(s) for integer s.
pub fn zeta_q_at(qq: &Q, s: &Q) -> Result<Q, LocalError> {
    let pt = RationalFunctionPoint::new(qq.clone(), PointMode::Exponent, vec![s.clone()])?;
    zeta_from_power(&pt.q_power(0)?)
}

pub fn zeta_q_value(arg: &AffineForm, pt: &RationalFunctionPoint) -> Result<Q, LocalError> {
    zeta_from_power(&pt.q_power_of(arg)?).map_err(|_| LocalError::Pole(format!("ζ_q({})", arg.render(&crate::formal_mero::default_names(arg.nvars())))))
}

/// Exact value of a product of ζ_q atoms.
pub fn eval_exact(f: &FormalMero, pt: &RationalFunctionPoint) -> Result<Q, LocalError> {
    let mut v = f.prefactor.clone();
    for (a, e) in &f.atoms {
        let x = match &a.kind {
            AtomKind::LocalZeta => zeta_from_power(&pt.q_power_of(&a.arg)?).map_err(|_| LocalError::Pole(a.render(&f.names)))?,
            _ => return Err(LocalError::NotRational(a.render(&f.names))),
        };
        v *= if *e >= 0 { num::pow(x, *e as usize) } else { num::pow(x.recip(), (-e) as usize) };
    }
    Ok(v)
}

// ---------------------------------------------------------------------------------------
// the unramified GL_1 × GL_2 computation

/// Coordinates (s, b, c) with s = a + 1/2, so that x = q^{−b}, y = q^{−c}, u = q^{−s}.
pub fn gl1gl2_names() -> Vec<String> {
    vec!["s".into(), "b".into(), "c".into()]
}

fn v3(s: i64, b: i64, c: i64) -> AffineForm {
    AffineForm::new(vec![q(s), q(b), q(c)], Q::zero())
}

/// h_k(x, y) = (x^{k+1} − y^{k+1})/(x − y), through its polynomial form.
pub fn h_k(k: usize, x: &Q, y: &Q) -> Q {
    (0..=k).map(|j| num::pow(x.clone(), j) * num::pow(y.clone(), k - j)).sum()
}

/// Σ_{k>N} u^k h_k in closed form.
pub fn series_tail(n: usize, u: &Q, x: &Q, y: &Q) -> Q {
    let (ux, uy) = (u * x, u * y);
    if x == y {
        // Σ_{k>N} (k+1) z^k
        let nn = q(n as i64);
        return num::pow(ux.clone(), n + 1) * ((&nn + q(2)) - (&nn + q(1)) * &ux) / num::pow(Q::one() - &ux, 2);
    }
    let a = x * num::pow(ux.clone(), n + 1) / (Q::one() - &ux);
    let b = y * num::pow(uy.clone(), n + 1) / (Q::one() - &uy);
    (a - b) / (x - y)
}

pub fn series_partial(n: usize, u: &Q, x: &Q, y: &Q) -> Q {
    // h_k = x h_{k−1} + y^k
    let (mut h, mut yk, mut uk) = (Q::one(), Q::one(), Q::one());
    let mut sum = Q::one();
    for _ in 1..=n {
        yk *= y;
        uk *= u;
        h = &h * x + &yk;
        sum += &uk * &h;
    }
    sum
}

#[derive(Clone, Debug, Serialize)]
pub struct Gl1Gl2Report {
    pub point: RationalFunctionPoint,
    /// Σ_{k≤N} u^k h_k + tail = 1/((1−ux)(1−uy)).
    pub series_identity: bool,
    pub series_n: usize,
    /// Smallest N with tail < 10^{-12}.
    pub tail_n: usize,
    pub tail_at_n: f64,
    pub partial_fraction_identity: bool,
    pub numerator_identity: bool,
    pub lhs: String,
    pub rhs: String,
    pub closed_form: String,
    pub lhs_decimal: f64,
}

impl Gl1Gl2Report {
    pub fn ok(&self) -> bool {
        self.series_identity && self.partial_fraction_identity && self.numerator_identity && self.tail_at_n < 1e-12
    }
}

/// The series and partial-fraction identities at a q-power point (u, x, y).
pub fn unramified_gl1gl2_identity(pt: &RationalFunctionPoint, series_n: usize) -> Result<Gl1Gl2Report, LocalError> {
    if pt.values.len() != 3 {
        return Err(LocalError::Precondition("expected coordinates (s, b, c)".into()));
    }
    let (u, x, y) = (pt.q_power(0)?, pt.q_power(1)?, pt.q_power(2)?);
    if x == y {
        return Err(LocalError::Degenerate("x = y".into()));
    }
    if &u * &x >= Q::one() || &u * &y >= Q::one() {
        return Err(LocalError::Precondition("the series needs ux, uy < 1".into()));
    }
    let names = gl1gl2_names();
    let z = |f: AffineForm| zeta_q(&names, &f);
    let t1 = z(v3(0, -1, 1)).mul(&z(v3(1, 1, 0)))?;
    let t2 = z(v3(0, 1, -1)).mul(&z(v3(1, 0, 1)))?;
    let rhs_f = z(v3(1, 1, 0)).mul(&z(v3(1, 0, 1)))?;
    let lhs = eval_exact(&t1, pt)? + eval_exact(&t2, pt)?;
    let rhs = eval_exact(&rhs_f, pt)?;
    let one = Q::one();
    let closed = ((&one - &u * &x) * (&one - &u * &y)).recip();
    let series = series_partial(series_n, &u, &x, &y) + series_tail(series_n, &u, &x, &y);
    // numerators over (x − y)(1 − ux)(1 − uy)
    let num_l = &x * (&one - &u * &y) - &y * (&one - &u * &x);
    let num_r = &x - &y;
    let eps = rat::qf(1, 1_000_000_000_000);
    // the terms are positive, so the tail decreases in N: double, then bisect
    let small = |n: usize| series_tail(n, &u, &x, &y).abs() < eps;
    let mut hi = 1;
    while !small(hi) {
        hi *= 2;
        if hi > 1 << 17 {
            return Err(LocalError::Precondition("series converges too slowly".into()));
        }
    }
    let mut lo = 0;
    if !small(0) {
        // small(lo) is false, small(hi) is true
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if small(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    } else {
        hi = 0;
    }
    let tail_n = hi;
    Ok(Gl1Gl2Report {
        point: pt.clone(),
        series_identity: series == closed,
        series_n,
        tail_n,
        tail_at_n: rat::to_f64(&series_tail(tail_n, &u, &x, &y).abs()),
        partial_fraction_identity: lhs == rhs && rhs == closed,
        numerator_identity: num_l == num_r,
        lhs: fmt_q(&lhs),
        rhs: fmt_q(&rhs),
        closed_form: fmt_q(&closed),
        lhs_decimal: rat::to_f64(&lhs),
    })
}

/// The x = y limit of the series identity: Σ (k+1)(ux)^k + tail = 1/(1−ux)², with h_k(x, x) = (k+1)x^k.
pub fn gl1gl2_diagonal_identity(u: &Q, x: &Q, series_n: usize) -> Result<bool, LocalError> {
    if u * x >= Q::one() {
        return Err(LocalError::Precondition("the series needs ux < 1".into()));
    }
    let hk_ok = (0..=series_n).all(|k| h_k(k, x, x) == q(k as i64 + 1) * num::pow(x.clone(), k));
    let lhs = series_partial(series_n, u, x, x) + series_tail(series_n, u, x, x);
    Ok(hk_ok && lhs == num::pow((Q::one() - u * x).recip(), 2))
}

#[derive(Clone, Debug, Serialize)]
pub struct LineCheck {
    #[serde(serialize_with = "rat::ser_q")]
    pub t: Q,
    #[serde(serialize_with = "rat::ser_q")]
    pub q: Q,
    /// The numerator identity of the partial-fraction identity at the point.
    pub numerators_agree: bool,
    /// (1 − uy)·LHS and (1 − uy)·RHS have the same value on the line.
    pub limits_agree: bool,
    pub limit: String,
    /// The first term ζ_q(c−b)ζ_q(a+b+1/2) stays finite on the line.
    pub first_term_finite: bool,
}

/// The identity on the line (a, b, c) = (−t, t+1/2, t−1/2), t ∈ 1/2 + Z, where
/// ζ_q(a+c+1/2) has its pole: both sides, cleared of the vanishing factor 1 − uy,
/// agree and equal ζ_q(1).
pub fn gl1gl2_line_check(qq: &Q, t: &Q) -> Result<LineCheck, LocalError> {
    let s = -t + rat::half();
    let b = t + rat::half();
    let c = t - rat::half();
    let pt = RationalFunctionPoint::new(qq.clone(), PointMode::Exponent, vec![s, b, c])?;
    let (u, x, y) = (pt.q_power(0)?, pt.q_power(1)?, pt.q_power(2)?);
    let one = Q::one();
    if &u * &y != one {
        return Err(LocalError::Precondition("point is not on a + c + 1/2 = 0".into()));
    }
    let num_l = &x * (&one - &u * &y) - &y * (&one - &u * &x);
    let names = gl1gl2_names();
    let first = zeta_q(&names, &v3(0, -1, 1)).mul(&zeta_q(&names, &v3(1, 1, 0)))?;
    let first_term_finite = eval_exact(&first, &pt).is_ok();
    // (1 − uy)ζ_q(s + c) = 1, so the cleared left side is ζ_q(b − c) and the right ζ_q(s + b)
    let lhs_lim = zeta_q_value(&v3(0, 1, -1), &pt)?;
    let rhs_lim = zeta_q_value(&v3(1, 1, 0), &pt)?;
    let zeta1 = zeta_q_at(qq, &Q::one())?;
    Ok(LineCheck {
        t: t.clone(),
        q: qq.clone(),
        numerators_agree: num_l == &x - &y,
        limits_agree: lhs_lim == rhs_lim && rhs_lim == zeta1,
        limit: fmt_q(&lhs_lim),
        first_term_finite,
    })
}

/// A random q-power point (u, x, y) with distinct small values and ux, uy < 1.
pub fn random_gl1gl2_point<R: Rng>(rng: &mut R) -> RationalFunctionPoint {
    loop {
        let qq = q(rng.gen_range(2..=9));
        let mut v = || rat::qf(rng.gen_range(1..=12), rng.gen_range(2..=13));
        let (u, x, y) = (v(), v(), v());
        if x == y || &u * &x >= Q::one() || &u * &y >= Q::one() || u.is_one() || x.is_one() || y.is_one() {
            continue;
        }
        return RationalFunctionPoint::new(qq, PointMode::QPower, vec![u, x, y]).expect("valid point");
    }
}

// ---------------------------------------------------------------------------------------
// the F^Q kernel and its support

/// Local atoms used by the exhaustive checks: the trivial character, a unitary character
/// x with x ≇ x∨, and a self-dual supercuspidal p of GL_2.
pub fn local_registry() -> AtomRegistry {
    AtomRegistry::from_json(
        r#"{"atoms":[{"id":"1","rank":1},{"id":"x","rank":1,"scope":"local"},{"id":"p","rank":2,"scope":"local"}],
            "dual_pairs":[["1","1"],["p","p"]]}"#,
    )
    .expect("builtin registry")
}

/// Every valid pair with n ≤ max_n whose atoms (and their contragredients) come from `reg`.
pub fn all_pairs(reg: &AtomRegistry, max_n: usize, scope: Scope) -> Vec<InducingPair> {
    let mut entries: Vec<FamilyEntry> = Vec::new();
    for r in 1..=max_n + 1 {
        let mut atoms = Vec::new();
        for id in reg.ids_of_rank(r, scope) {
            let a = reg.resolve(&crate::formal_mero::AtomRef::new(&id));
            let d = reg.dual_of(&a);
            for x in [a, d] {
                if !atoms.contains(&x) {
                    atoms.push(x);
                }
            }
        }
        for d in 1..=max_n + 1 {
            for a in &atoms {
                entries.push(FamilyEntry { r, d, atom: a.clone() });
            }
        }
    }
    let cost1 = |e: &FamilyEntry| e.r * e.d;
    let cost2 = |e: &FamilyEntry| e.r * (e.d - 1);
    let mut f1s: Vec<Vec<FamilyEntry>> = vec![vec![]];
    let mut frontier = vec![vec![]];
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for f in &frontier {
            let used: usize = f.iter().map(cost1).sum();
            for e in &entries {
                if used + cost1(e) <= max_n {
                    let mut g: Vec<FamilyEntry> = f.clone();
                    g.push(e.clone());
                    next.push(g);
                }
            }
        }
        f1s.extend(next.iter().cloned());
        frontier = next;
    }
    let mut out = Vec::new();
    for f1 in &f1s {
        let k: usize = f1.iter().map(|e| e.r).sum();
        let n1: usize = f1.iter().map(cost1).sum();
        // family 2: ranks summing to k+1, total cost ≤ max_n − n1
        let mut stack: Vec<Vec<FamilyEntry>> = vec![vec![]];
        while let Some(f2) = stack.pop() {
            let rsum: usize = f2.iter().map(|e| e.r).sum();
            let c: usize = f2.iter().map(cost2).sum();
            if rsum == k + 1 {
                if let Ok(p) = InducingPair::new(f1.clone(), f2.clone(), reg) {
                    out.push(p);
                }
                continue;
            }
            for e in &entries {
                if rsum + e.r <= k + 1 && n1 + c + cost2(e) <= max_n {
                    let mut g = f2.clone();
                    g.push(e.clone());
                    stack.push(g);
                }
            }
        }
    }
    out.sort_by_key(|p| serde_json::to_string(&p.to_json()).unwrap());
    out
}

/// The order of L_+ used for a given m: the first order for m = n+1, the second for m = n.
pub fn schedule(forms: &crate::relevance::SingularForms, m: Side) -> Vec<usize> {
    match m {
        Side::Np1 => first_order(forms),
        Side::N => second_order(forms),
    }
}

pub fn side_name(m: Side) -> &'static str {
    match m {
        Side::N => "n",
        Side::Np1 => "n+1",
    }
}

/// F^Q_σ(w, λ) = ∏_{ϖ} ζ_q(⟨wλ + ρ̲_Q, ϖ⟩) / L(λ + 1/2, δ_n × δ_{n+1}) for the supercuspidal
/// datum δ = π's cells (ν_δ = 0, χ_σ = 0). Variables are the cell exponents of `layout`.
pub fn f_q(layout: &Layout, reg: &AtomRegistry, qp: &RSParabolic, w: &GPerm) -> Result<FormalMero, LocalError> {
    let names = &layout.names;
    let nv = layout.nvars();
    let mut wl: BTreeMap<Side, Vec<AffineForm>> = BTreeMap::new();
    for s in [Side::N, Side::Np1] {
        let cf = layout.coordinate_forms(s);
        let perm = w.side(s);
        let mut v = vec![AffineForm::zero(nv); cf.len()];
        for (c, f) in cf.into_iter().enumerate() {
            v[perm.apply(c)] = f;
        }
        wl.insert(s, v);
    }
    let z = qp.z_space();
    let mut out = FormalMero::one(names);
    for cw in &z.coweights {
        let h = z.e_to_h(cw);
        let mut arg = AffineForm::constant(nv, rat::dot(&z.rho_bar, cw));
        for (c, hc) in h.iter().enumerate() {
            if !hc.is_zero() {
                arg = arg.add(&wl[&Side::N][c].add(&wl[&Side::Np1][c]).scale(hc));
            }
        }
        out.push(AtomKind::LocalZeta, arg, 1);
    }
    for a in layout.side_cells(Side::N) {
        for b in layout.side_cells(Side::Np1) {
            let s = AffineForm::var(nv, a.var).add(&AffineForm::var(nv, b.var)).plus_const(&rat::half());
            out = out.div(&supercuspidal_l_local(reg, names, &a.atom, &b.atom, &s)?)?;
        }
    }
    Ok(out)
}

/// W(P_π; Q) on both sides.
pub fn weyl_set(layout: &Layout, qp: &RSParabolic) -> Result<Vec<GPerm>, LocalError> {
    let g = GPar::of_rs(qp);
    let wn = w_into(&layout.p_pi(Side::N), &g.n)?;
    let wnp1 = w_into(&layout.p_pi(Side::Np1), &g.np1)?;
    Ok(wn.iter().flat_map(|a| wnp1.iter().map(move |b| GPerm { n: a.clone(), np1: b.clone() })).collect())
}

/// The lower right corner GL_c of a parabolic whose blocks do not straddle it.
fn corner(p: &BlockParabolic, c: usize) -> Result<Option<BlockParabolic>, LocalError> {
    let m = p.ambient();
    let off = m - c;
    if c == 0 {
        return Ok(None);
    }
    let mut blocks = Vec::new();
    for b in p.blocks() {
        let inside = b.iter().filter(|&&i| i >= off).count();
        if inside == 0 {
            continue;
        }
        if inside != b.len() {
            return Err(LocalError::Precondition("parabolic straddles the corner".into()));
        }
        blocks.push(b.iter().map(|i| i - off).collect());
    }
    Ok(Some(BlockParabolic::new(c, blocks)?))
}

/// W(𝒬_π; 𝒬) inside the Levi GL_k × GL_{k+1} of P_res, embedded in W.
pub fn corner_weyl_set(data: &ResidueWeylData, k: usize, qp: &RSParabolic) -> Result<Vec<GPerm>, LocalError> {
    let g = GPar::of_rs(qp);
    let mut per_side = Vec::new();
    for (s, c) in [(Side::N, k), (Side::Np1, k + 1)] {
        let m = g.side(s).ambient();
        let list = match (corner(data.q_pi.side(s), c)?, corner(g.side(s), c)?) {
            (Some(a), Some(b)) => {
                let pos: Vec<usize> = (m - c..m).collect();
                w_into(&a, &b)?.into_iter().map(|w| w.embed(m, &pos)).collect()
            }
            _ => vec![Perm::identity(m)],
        };
        per_side.push(list);
    }
    Ok(per_side[0].iter().flat_map(|a| per_side[1].iter().map(move |b| GPerm { n: a.clone(), np1: b.clone() })).collect())
}

/// W_{π,m}(Q) = {w'·w*_m : w' ∈ W(𝒬_π; 𝒬)} when Q ⊂ P_res, empty otherwise.
pub fn predicted_set(pair: &InducingPair, data: &ResidueWeylData, qp: &RSParabolic, m: Side) -> Result<Vec<GPerm>, LocalError> {
    if !qp.is_contained_in(&data.p_res) {
        return Ok(vec![]);
    }
    Ok(corner_weyl_set(data, pair.k(), qp)?.into_iter().map(|w| w.compose(data.w_star(m))).collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct SupportCase {
    pub q: String,
    pub w: GPerm,
    pub survives: bool,
    pub predicted: bool,
    pub kernel: String,
    pub rest: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct SupportReport {
    pub pair: serde_json::Value,
    pub m: String,
    pub order: Vec<String>,
    pub parabolics: usize,
    pub cases: Vec<SupportCase>,
    /// Predicted elements missing from the enumeration (must be empty).
    pub unmatched_predictions: Vec<String>,
    pub agree: bool,
}

fn render_kernel(f: &FormalMero) -> String {
    let (num, den) = f.render_parts();
    let p = fmt_q(&f.prefactor);
    let top = if num.is_empty() { p } else if f.prefactor.is_one() { num.join("·") } else { format!("{p}·{}", num.join("·")) };
    if den.is_empty() {
        top
    } else {
        format!("{top} / {}", den.join("·"))
    }
}

/// Restriction of F^Q(w) along L_+ in the order attached to m.
pub fn f_q_support(pair: &InducingPair, reg: &AtomRegistry, qp: &RSParabolic, w: &GPerm, m: Side) -> Result<(bool, FormalMero, FormalMero), LocalError> {
    if !qp.is_standard() || qp.n != pair.n() {
        return Err(LocalError::Precondition(format!("{qp} is not a standard RS parabolic for n = {}", pair.n())));
    }
    let layout = Layout::new(pair, reg);
    if !weyl_set(&layout, qp)?.contains(w) {
        return Err(LocalError::Precondition("w is not in W(P_π; Q)".into()));
    }
    let forms = singular_forms(pair, &layout);
    let all = forms.all();
    let f = f_q(&layout, reg, qp, w)?;
    let mut r = f.clone();
    for i in schedule(&forms, m) {
        r = r.restrict(&all[i])?;
    }
    Ok((!r.is_zero(), f, r))
}

/// Every (Q, w) with Q standard and w ∈ W(P_π; Q): the verdict against the prediction.
pub fn support_classification(pair: &InducingPair, reg: &AtomRegistry, m: Side) -> Result<SupportReport, LocalError> {
    let layout = Layout::new(pair, reg);
    let forms = singular_forms(pair, &layout);
    let all = forms.all();
    let order = schedule(&forms, m);
    let data = residue_weyl_data(pair, reg)?;
    let qs = RSParabolic::standard_all(pair.n());
    let mut cases = Vec::new();
    let mut unmatched = Vec::new();
    for qp in &qs {
        let ws = weyl_set(&layout, qp)?;
        let pred = predicted_set(pair, &data, qp, m)?;
        for p in &pred {
            if !ws.contains(p) {
                unmatched.push(format!("{qp}: {:?} / {:?}", p.n.images_1based(), p.np1.images_1based()));
            }
        }
        for w in ws {
            let f = f_q(&layout, reg, qp, &w)?;
            let mut r = f.clone();
            for &i in &order {
                r = r.restrict(&all[i])?;
            }
            cases.push(SupportCase {
                q: qp.to_string(),
                predicted: pred.contains(&w),
                survives: !r.is_zero(),
                kernel: render_kernel(&f),
                rest: render_kernel(&r),
                w,
            });
        }
    }
    let agree = unmatched.is_empty() && cases.iter().all(|c| c.survives == c.predicted);
    Ok(SupportReport {
        pair: pair.to_json(),
        m: side_name(m).into(),
        order: order.iter().map(|&i| all[i].render(&layout.names)).collect(),
        parabolics: qs.len(),
        cases,
        unmatched_predictions: unmatched,
        agree,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct WitnessTerm {
    pub q: String,
    pub w: GPerm,
    pub w_prime: GPerm,
    /// Operator word, read right to left.
    pub word: Vec<String>,
    pub rest_f: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct WitnessSchedule {
    pub m: String,
    pub w_star: GPerm,
    pub terms: Vec<WitnessTerm>,
}

#[derive(Clone, Debug, Serialize)]
pub struct WitnessReport {
    pub pair: serde_json::Value,
    pub schedules: Vec<WitnessSchedule>,
    /// Both schedules sum over the same Q with the same w' sets.
    pub schedules_agree: bool,
    pub vacuous: bool,
}

/// The formal sum over surviving (Q, w) of Rest F^Q · G^Q(w) · W(b_{i,Q}) ∘ N(w', w*_m λ) ∘ N(w*_m, λ);
/// every surviving w must factor as w'·w*_m with w' supported in the Levi of P_res.
pub fn local_factorization_witness(pair: &InducingPair, reg: &AtomRegistry) -> Result<WitnessReport, LocalError> {
    let data = residue_weyl_data(pair, reg)?;
    let k = pair.k();
    let mut schedules = Vec::new();
    for m in [Side::Np1, Side::N] {
        let rep = support_classification(pair, reg, m)?;
        let ws = data.w_star(m).clone();
        let mut terms = Vec::new();
        for c in rep.cases.iter().filter(|c| c.survives) {
            let wp = c.w.compose(&ws.inverse());
            for (s, size) in [(Side::N, k), (Side::Np1, k + 1)] {
                let p = wp.side(s);
                let off = p.degree() - size;
                if (0..off).any(|i| p.apply(i) != i) {
                    return Err(LocalError::Witness(format!("{}: surviving w has no w*_{} prefix", c.q, side_name(m))));
                }
            }
            let qp = RSParabolic::standard_all(pair.n()).into_iter().find(|x| x.to_string() == c.q).expect("listed parabolic");
            if !corner_weyl_set(&data, k, &qp)?.contains(&wp) {
                return Err(LocalError::Witness(format!("{}: w' is not in W(Q_π; Q) of the corner", c.q)));
            }
            terms.push(WitnessTerm {
                q: c.q.clone(),
                w: c.w.clone(),
                word: vec![
                    format!("N(w*_{}, λ)", side_name(m)),
                    format!("N(w', w*_{} λ)", side_name(m)),
                    "W(b_{i,Q})".into(),
                    "G^Q(w, λ)".into(),
                    "Rest F^Q".into(),
                ],
                rest_f: c.rest.clone(),
                w_prime: wp,
            });
        }
        schedules.push(WitnessSchedule { m: side_name(m).into(), w_star: ws, terms });
    }
    let key = |s: &WitnessSchedule| -> BTreeSet<(String, String)> { s.terms.iter().map(|t| (t.q.clone(), format!("{:?}", t.w_prime))).collect() };
    let schedules_agree = key(&schedules[0]) == key(&schedules[1]);
    let vacuous = pair.is_tempered();
    Ok(WitnessReport { pair: pair.to_json(), schedules, schedules_agree, vacuous })
}

/// A JSON summary of a support report for the CLI.
pub fn support_summary(r: &SupportReport) -> serde_json::Value {
    json!({
        "m": r.m,
        "cases": r.cases.len(),
        "survivors": r.cases.iter().filter(|c| c.survives).count(),
        "agree": r.agree,
    })
}
