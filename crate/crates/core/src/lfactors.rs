//! L-factor calculus on formal products: the atom registry, Speh and Steinberg
//! Rankin-Selberg factorizations, the b and L(λ+1/2) normalizers, and the local
//! n, γ and c coefficients of intertwining operators.

use crate::formal_mero::{AffineForm, AtomKind, AtomRef, FormalMero, MeroError};
use crate::parabolic::{longest_of_levi_quotient, BlockParabolic, Composition, Perm, WeylError};
use crate::rat::{self, Q};
use num::{One, Zero};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LError {
    #[error("unknown atom {0}")]
    UnknownAtom(String),
    #[error("atom {0} is not available in {1:?} scope")]
    Scope(String, Scope),
    #[error("mismatched data: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Mero(#[from] MeroError),
    #[error(transparent)]
    Weyl(#[from] WeylError),
    #[error("registry: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    Global,
    Local,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CuspidalAtom {
    pub id: String,
    pub rank: usize,
    /// None: usable in both scopes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scope: Option<Scope>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MatchEntry {
    pub x: AtomRef,
    pub y: AtomRef,
    /// Exponents t with x|·|^t ≅ y∨, as "p/q" strings.
    pub t: Vec<String>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
struct RegistryFile {
    atoms: Vec<CuspidalAtom>,
    #[serde(default)]
    dual_pairs: Vec<(String, String)>,
    #[serde(default)]
    match_sets: Vec<MatchEntry>,
}

/// Cuspidal (or supercuspidal) atoms with their duality and local matching data.
#[derive(Clone, Debug)]
pub struct AtomRegistry {
    atoms: BTreeMap<String, CuspidalAtom>,
    partner: BTreeMap<String, String>,
    matches: BTreeMap<((String, bool), (String, bool)), BTreeSet<Q>>,
}

impl AtomRegistry {
    /// Only the trivial character "1" of GL_1, self-dual.
    pub fn trivial() -> Self {
        let json = r#"{"atoms":[{"id":"1","rank":1}],"dual_pairs":[["1","1"]]}"#;
        Self::from_json(json).expect("builtin registry")
    }

    pub fn from_json(s: &str) -> Result<Self, LError> {
        let f: RegistryFile = serde_json::from_str(s)?;
        Self::from_file(f)
    }

    fn from_file(f: RegistryFile) -> Result<Self, LError> {
        let mut atoms = BTreeMap::new();
        for a in f.atoms {
            if a.rank == 0 {
                return Err(LError::Mismatch(format!("atom {} has rank 0", a.id)));
            }
            atoms.insert(a.id.clone(), a);
        }
        let mut partner = BTreeMap::new();
        for (a, b) in &f.dual_pairs {
            for id in [a, b] {
                if !atoms.contains_key(id) {
                    return Err(LError::UnknownAtom(id.clone()));
                }
            }
            if atoms[a].rank != atoms[b].rank {
                return Err(LError::Mismatch(format!("dual pair {a}, {b} with different ranks")));
            }
            for (x, y) in [(a, b), (b, a)] {
                if let Some(old) = partner.insert(x.clone(), y.clone()) {
                    if &old != y {
                        return Err(LError::Mismatch(format!("{x} has two contragredients")));
                    }
                }
            }
        }
        let mut reg = AtomRegistry { atoms, partner, matches: BTreeMap::new() };
        for m in f.match_sets {
            reg.check(&m.x)?;
            reg.check(&m.y)?;
            let mut ts = BTreeSet::new();
            for t in &m.t {
                ts.insert(rat::parse_q(t).ok_or_else(|| LError::Mismatch(format!("bad rational {t}")))?);
            }
            let key = (reg.canon(&m.x), reg.canon(&m.y));
            reg.matches.entry(key).or_default().extend(ts);
        }
        Ok(reg)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut pairs: Vec<(String, String)> = self.partner.iter().filter(|(a, b)| a <= b).map(|(a, b)| (a.clone(), b.clone())).collect();
        pairs.sort();
        let ms: Vec<serde_json::Value> = self
            .matches
            .iter()
            .map(|((x, y), t)| {
                serde_json::json!({
                    "x": {"id": x.0, "dual": x.1},
                    "y": {"id": y.0, "dual": y.1},
                    "t": t.iter().map(rat::fmt_q).collect::<Vec<_>>(),
                })
            })
            .collect();
        serde_json::json!({
            "atoms": self.atoms.values().collect::<Vec<_>>(),
            "dual_pairs": pairs,
            "match_sets": ms,
        })
    }

    pub fn contains(&self, id: &str) -> bool {
        self.atoms.contains_key(id)
    }

    pub fn rank(&self, id: &str) -> Result<usize, LError> {
        self.atoms.get(id).map(|a| a.rank).ok_or_else(|| LError::UnknownAtom(id.to_string()))
    }

    /// Ids of registered atoms of the given rank usable in `scope`.
    pub fn ids_of_rank(&self, rank: usize, scope: Scope) -> Vec<String> {
        self.atoms
            .values()
            .filter(|a| a.rank == rank && a.scope.map_or(true, |s| s == scope))
            .map(|a| a.id.clone())
            .collect()
    }

    pub fn check_scope_of(&self, r: &AtomRef, scope: Scope) -> Result<(), LError> {
        self.check_scope(r, scope)
    }

    fn check(&self, r: &AtomRef) -> Result<(), LError> {
        if self.contains(&r.id) {
            Ok(())
        } else {
            Err(LError::UnknownAtom(r.id.clone()))
        }
    }

    fn check_scope(&self, r: &AtomRef, scope: Scope) -> Result<(), LError> {
        let a = self.atoms.get(&r.id).ok_or_else(|| LError::UnknownAtom(r.id.clone()))?;
        match a.scope {
            Some(s) if s != scope => Err(LError::Scope(r.id.clone(), scope)),
            _ => Ok(()),
        }
    }

    /// (id, dual flag) with registered contragredients substituted.
    fn canon(&self, r: &AtomRef) -> (String, bool) {
        if r.dual {
            if let Some(p) = self.partner.get(&r.id) {
                return (p.clone(), false);
            }
        }
        (r.id.clone(), r.dual)
    }

    /// The atom in canonical form, carrying its registered contragredient.
    pub fn resolve(&self, r: &AtomRef) -> AtomRef {
        let (id, dual) = self.canon(r);
        match (dual, self.partner.get(&id)) {
            (false, Some(p)) => AtomRef::with_partner(&id, p),
            _ => AtomRef { id, dual, partner: None },
        }
    }

    pub fn atom(&self, id: &str) -> Result<AtomRef, LError> {
        self.check(&AtomRef::new(id))?;
        Ok(self.resolve(&AtomRef::new(id)))
    }

    pub fn dual_of(&self, r: &AtomRef) -> AtomRef {
        let (id, dual) = self.canon(r);
        self.resolve(&AtomRef { id, dual: !dual, partner: None })
    }

    /// y ≅ x∨.
    pub fn is_dual(&self, x: &AtomRef, y: &AtomRef) -> bool {
        self.canon(&self.dual_of(x)) == self.canon(y)
    }

    /// {t : x|·|^t ≅ y∨}; contains 0 when y ≅ x∨.
    pub fn match_set(&self, x: &AtomRef, y: &AtomRef) -> BTreeSet<Q> {
        let (cx, cy) = (self.canon(x), self.canon(y));
        let (dx, dy) = (self.canon(&self.dual_of(x)), self.canon(&self.dual_of(y)));
        let mut out = BTreeSet::new();
        // x∨|·|^t ≅ y iff x|·|^{−t} ≅ y∨
        for (key, sign) in [((cx.clone(), cy.clone()), 1), ((cy, cx), 1), ((dx.clone(), dy.clone()), -1), ((dy, dx), -1)] {
            if let Some(t) = self.matches.get(&key) {
                out.extend(t.iter().map(|t| if sign > 0 { t.clone() } else { -t }));
            }
        }
        if self.is_dual(x, y) {
            out.insert(Q::zero());
        }
        out
    }
}

/// Speh(σ, d) in the global setting, St(σ, d) in the local one.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpehDatum {
    pub atom: AtomRef,
    pub d: usize,
}

impl SpehDatum {
    pub fn new(atom: AtomRef, d: usize) -> Self {
        SpehDatum { atom, d }
    }
}

/// Shifts (d−2i+1)/2 + (d'−2j+1)/2 over the (i, j) double loop.
pub fn speh_shifts(d: usize, dp: usize) -> Vec<Q> {
    let mut out = Vec::new();
    for i in 1..=d as i64 {
        for j in 1..=dp as i64 {
            out.push(rat::qf(d as i64 - 2 * i + 1, 2) + rat::qf(dp as i64 - 2 * j + 1, 2));
        }
    }
    out
}

/// Completed L(s, x × y) for global cuspidal atoms.
pub fn global_rs(reg: &AtomRegistry, names: &[String], x: &AtomRef, y: &AtomRef, s: &AffineForm) -> Result<FormalMero, LError> {
    reg.check_scope(x, Scope::Global)?;
    reg.check_scope(y, Scope::Global)?;
    let kind = AtomKind::global(&reg.resolve(x), &reg.resolve(y), reg.is_dual(x, y));
    Ok(FormalMero::atom(names, kind, s.clone(), 1))
}

pub fn speh_rs_l(reg: &AtomRegistry, names: &[String], t1: &SpehDatum, t2: &SpehDatum, s: &AffineForm) -> Result<FormalMero, LError> {
    reg.check_scope(&t1.atom, Scope::Global)?;
    reg.check_scope(&t2.atom, Scope::Global)?;
    let mut out = FormalMero::one(names);
    for sh in speh_shifts(t1.d, t2.d) {
        out = out.mul(&global_rs(reg, names, &t1.atom, &t2.atom, &s.plus_const(&sh))?)?;
    }
    Ok(out)
}

/// L(s, x × y) for supercuspidal atoms: ∏_{t} ζ_q(s − t) over the match set.
pub fn supercuspidal_l_local(reg: &AtomRegistry, names: &[String], x: &AtomRef, y: &AtomRef, s: &AffineForm) -> Result<FormalMero, LError> {
    reg.check_scope(x, Scope::Local)?;
    reg.check_scope(y, Scope::Local)?;
    let mut out = FormalMero::one(names);
    for t in reg.match_set(x, y) {
        out.push(AtomKind::LocalZeta, s.plus_const(&-t), 1);
    }
    Ok(out)
}

/// L(s, St(x, d1) × St(y, d2)).
pub fn steinberg_rs_l_local(reg: &AtomRegistry, names: &[String], d1: usize, d2: usize, x: &AtomRef, y: &AtomRef, s: &AffineForm) -> Result<FormalMero, LError> {
    let (d1, d2, x, y) = if d2 <= d1 { (d1, d2, x, y) } else { (d2, d1, y, x) };
    let mut out = FormalMero::one(names);
    for i in 1..=d2 as i64 {
        let sh = rat::qf(d1 as i64 - 1, 2) + rat::qf(d2 as i64 - 2 * i + 1, 2);
        out = out.mul(&supercuspidal_l_local(reg, names, x, y, &s.plus_const(&sh))?)?;
    }
    Ok(out)
}

/// L(s, τ1 × τ2) in the given scope; d = 0 is the trivial representation.
pub fn block_rs_l(reg: &AtomRegistry, names: &[String], scope: Scope, t1: &SpehDatum, t2: &SpehDatum, s: &AffineForm) -> Result<FormalMero, LError> {
    if t1.d == 0 || t2.d == 0 {
        return Ok(FormalMero::one(names));
    }
    match scope {
        Scope::Global => speh_rs_l(reg, names, t1, t2, s),
        Scope::Local => steinberg_rs_l_local(reg, names, t1.d, t2.d, &t1.atom, &t2.atom, s),
    }
}

/// L of two induced representations ×_i τ_i|·|^{ν_i}: the product of the constituent
/// factors at s + ν_{1,i} + ν_{2,j}.
pub fn induced_rs_l(reg: &AtomRegistry, names: &[String], scope: Scope, a: &[(SpehDatum, Q)], b: &[(SpehDatum, Q)], s: &AffineForm) -> Result<FormalMero, LError> {
    let mut out = FormalMero::one(names);
    for (t1, n1) in a {
        for (t2, n2) in b {
            out = out.mul(&block_rs_l(reg, names, scope, t1, t2, &s.plus_const(&(n1 + n2)))?)?;
        }
    }
    Ok(out)
}

/// One Levi block with its symbolic exponent.
#[derive(Clone, Debug)]
pub struct Block {
    pub datum: SpehDatum,
    pub lambda: AffineForm,
}

impl Block {
    pub fn new(atom: AtomRef, d: usize, lambda: AffineForm) -> Self {
        Block { datum: SpehDatum::new(atom, d), lambda }
    }

    fn dual(&self, reg: &AtomRegistry) -> SpehDatum {
        SpehDatum::new(reg.dual_of(&self.datum.atom), self.datum.d)
    }
}

/// b = ∏_{i<j} L(1 + λ_i − λ_j, π_i × π_j∨) on each side, and
/// L(λ + 1/2) = ∏_{i,j} L(1/2 + λ_{n,i} + λ_{n+1,j}, π_{n,i} × π_{n+1,j}).
pub fn b_and_rs_normalizers(reg: &AtomRegistry, names: &[String], scope: Scope, n_side: &[Block], np1_side: &[Block]) -> Result<(FormalMero, FormalMero), LError> {
    let mut b = FormalMero::one(names);
    for side in [n_side, np1_side] {
        for i in 0..side.len() {
            for j in i + 1..side.len() {
                let s = side[i].lambda.sub(&side[j].lambda).plus_const(&Q::one());
                b = b.mul(&block_rs_l(reg, names, scope, &side[i].datum, &side[j].dual(reg), &s)?)?;
            }
        }
    }
    let mut lh = FormalMero::one(names);
    for x in n_side {
        for y in np1_side {
            let s = x.lambda.add(&y.lambda).plus_const(&rat::half());
            lh = lh.mul(&block_rs_l(reg, names, scope, &x.datum, &y.datum, &s)?)?;
        }
    }
    Ok((b, lh))
}

/// Local data σ = ⊠ St(σ_i, d_i) on a standard Levi of GL_k with exponents λ_i.
#[derive(Clone, Debug)]
pub struct LocalData {
    pub blocks: Vec<Block>,
}

impl LocalData {
    pub fn new(blocks: Vec<Block>) -> Self {
        LocalData { blocks }
    }

    pub fn sizes(&self, reg: &AtomRegistry) -> Result<Vec<usize>, LError> {
        self.blocks.iter().map(|b| Ok(reg.rank(&b.datum.atom.id)? * b.datum.d)).collect()
    }

    pub fn parabolic(&self, reg: &AtomRegistry) -> Result<BlockParabolic, LError> {
        let c = Composition::new(self.sizes(reg)?)?;
        Ok(BlockParabolic::standard(&c))
    }

    fn firsts(&self, reg: &AtomRegistry) -> Result<Vec<usize>, LError> {
        let mut acc = 0;
        let mut out = Vec::new();
        for s in self.sizes(reg)? {
            out.push(acc);
            acc += s;
        }
        Ok(out)
    }

    fn check_weyl(&self, reg: &AtomRegistry, w: &Perm) -> Result<BlockParabolic, LError> {
        let p = self.parabolic(reg)?;
        if w.degree() != p.ambient() {
            return Err(LError::Mismatch(format!("Weyl element of degree {} on GL_{}", w.degree(), p.ambient())));
        }
        if !p.blocks().iter().all(|b| w.increasing_on(b)) {
            return Err(LError::Mismatch(format!("{w} does not act by blocks")));
        }
        Ok(p)
    }

    /// (wσ, wλ) on the standard parabolic w.P.
    pub fn act(&self, reg: &AtomRegistry, w: &Perm) -> Result<LocalData, LError> {
        self.check_weyl(reg, w)?;
        let f = self.firsts(reg)?;
        let mut idx: Vec<usize> = (0..self.blocks.len()).collect();
        idx.sort_by_key(|&i| w.apply(f[i]));
        Ok(LocalData { blocks: idx.into_iter().map(|i| self.blocks[i].clone()).collect() })
    }

    /// (σ∨, −λ).
    pub fn dual_negated(&self, reg: &AtomRegistry) -> LocalData {
        LocalData {
            blocks: self.blocks.iter().map(|b| Block { datum: b.dual(reg), lambda: b.lambda.neg() }).collect(),
        }
    }

    /// Positive roots of P (block pairs i < j) inverted by w.
    fn inverted(&self, reg: &AtomRegistry, w: &Perm) -> Result<Vec<(usize, usize)>, LError> {
        self.check_weyl(reg, w)?;
        let f = self.firsts(reg)?;
        let mut out = Vec::new();
        for i in 0..f.len() {
            for j in i + 1..f.len() {
                if w.apply(f[i]) > w.apply(f[j]) {
                    out.push((i, j));
                }
            }
        }
        Ok(out)
    }

    fn coroot(&self, i: usize, j: usize) -> AffineForm {
        self.blocks[i].lambda.sub(&self.blocks[j].lambda)
    }
}

/// L(s, τ_α) with τ_α = τ_i × τ_j∨.
fn l_alpha(reg: &AtomRegistry, names: &[String], data: &LocalData, i: usize, j: usize, s: &AffineForm) -> Result<FormalMero, LError> {
    block_rs_l(reg, names, Scope::Local, &data.blocks[i].datum, &data.blocks[j].dual(reg), s)
}

/// L(s, τ_α∨) = L(s, τ_i∨ × τ_j).
fn l_alpha_dual(reg: &AtomRegistry, names: &[String], data: &LocalData, i: usize, j: usize, s: &AffineForm) -> Result<FormalMero, LError> {
    block_rs_l(reg, names, Scope::Local, &data.blocks[i].dual(reg), &data.blocks[j].datum, s)
}

fn epsilon(names: &[String], data: &LocalData, i: usize, j: usize, s: &AffineForm) -> FormalMero {
    let (a, b) = (&data.blocks[i].datum, &data.blocks[j].datum);
    let label = format!("St({},{})×St({},{})∨", a.atom, a.d, b.atom, b.d);
    FormalMero::atom(names, AtomKind::Epsilon(label), s.clone(), 1)
}

/// n(α, s) = L(s, τ_α) / (L(1+s, τ_α) ε(s, τ_α)) and γ(α, s) = ε(s, τ_α) L(1−s, τ_α∨) / L(s, τ_α)
/// for the block pair α = (i, j).
pub fn n_gamma_factors(reg: &AtomRegistry, names: &[String], data: &LocalData, i: usize, j: usize, s: &AffineForm) -> Result<(FormalMero, FormalMero), LError> {
    let l = l_alpha(reg, names, data, i, j, s)?;
    let l1 = l_alpha(reg, names, data, i, j, &s.plus_const(&Q::one()))?;
    let eps = epsilon(names, data, i, j, s);
    let ld = l_alpha_dual(reg, names, data, i, j, &s.neg().plus_const(&Q::one()))?;
    let n = l.div(&l1)?.div(&eps)?;
    let g = eps.mul(&ld)?.div(&l)?;
    Ok((n, g))
}

/// n_σ(w, λ) = ∏_{α>0, wα<0} n(α, ⟨λ, α∨⟩).
pub fn n_product(reg: &AtomRegistry, names: &[String], data: &LocalData, w: &Perm) -> Result<FormalMero, LError> {
    let mut out = FormalMero::one(names);
    for (i, j) in data.inverted(reg, w)? {
        out = out.mul(&n_gamma_factors(reg, names, data, i, j, &data.coroot(i, j))?.0)?;
    }
    Ok(out)
}

/// γ_σ(w, λ) = ∏_{α>0, wα<0} γ(α, ⟨λ, α∨⟩).
pub fn gamma_product(reg: &AtomRegistry, names: &[String], data: &LocalData, w: &Perm) -> Result<FormalMero, LError> {
    let mut out = FormalMero::one(names);
    for (i, j) in data.inverted(reg, w)? {
        out = out.mul(&n_gamma_factors(reg, names, data, i, j, &data.coroot(i, j))?.1)?;
    }
    Ok(out)
}

fn check_into(reg: &AtomRegistry, data: &LocalData, q: &BlockParabolic, w: &Perm) -> Result<LocalData, LError> {
    let wd = data.act(reg, w)?;
    let wp = Composition::new(wd.sizes(reg)?)?;
    if !q.is_standard() || !wp.refines(&q.composition()?) {
        return Err(LError::Mismatch(format!("{w}.P is not contained in Q")));
    }
    if !q.blocks().iter().all(|b| w.inverse().increasing_on(b)) {
        return Err(LError::Mismatch(format!("{w} is not a minimal representative for Q")));
    }
    Ok(wd)
}

/// c_σ^Q(w, λ) = n_σ(w, λ) γ_σ(w, λ) γ_{wσ∨}(w_Q, −wλ)^{-1}.
pub fn c_coefficient(reg: &AtomRegistry, names: &[String], data: &LocalData, q: &BlockParabolic, w: &Perm) -> Result<FormalMero, LError> {
    let wd = check_into(reg, data, q, w)?;
    let wq = longest_of_levi_quotient(q)?;
    let n = n_product(reg, names, data, w)?;
    let g = gamma_product(reg, names, data, w)?;
    let g2 = gamma_product(reg, names, &wd.dual_negated(reg), &wq)?;
    Ok(n.mul(&g)?.div(&g2)?)
}

/// The explicit form b(λ,σ)^{-1} n^Q_{wσ}(w^Q_{Q_w}, wλ)^{-1} ∏_α L(⟨w_Q wλ, α∨⟩, (w_Q wσ)_α)/ε,
/// the last product running over all positive roots of (w_Q w).P.
pub fn explicit_c(reg: &AtomRegistry, names: &[String], data: &LocalData, q: &BlockParabolic, w: &Perm) -> Result<FormalMero, LError> {
    let wd = check_into(reg, data, q, w)?;
    let wq = longest_of_levi_quotient(q)?;
    let k = data.blocks.len();
    let mut b = FormalMero::one(names);
    for i in 0..k {
        for j in i + 1..k {
            b = b.mul(&l_alpha(reg, names, data, i, j, &data.coroot(i, j).plus_const(&Q::one()))?)?;
        }
    }
    let f = wd.firsts(reg)?;
    let mut nq = FormalMero::one(names);
    for i in 0..k {
        for j in i + 1..k {
            if q.block_index(f[i]) == q.block_index(f[j]) {
                nq = nq.mul(&n_gamma_factors(reg, names, &wd, i, j, &wd.coroot(i, j))?.0)?;
            }
        }
    }
    let wwd = wd.act(reg, &wq)?;
    let mut prod = FormalMero::one(names);
    for i in 0..k {
        for j in i + 1..k {
            let s = wwd.coroot(i, j);
            prod = prod.mul(&l_alpha(reg, names, &wwd, i, j, &s)?.div(&epsilon(names, &wwd, i, j, &s))?)?;
        }
    }
    Ok(b.inv().mul(&nq.inv())?.mul(&prod)?)
}

/// Outcome of comparing the two c assemblers on one (Q, w).
#[derive(Clone, Debug, Serialize)]
pub struct CComparison {
    pub q: Vec<usize>,
    pub w: Perm,
    pub formula: String,
    pub explicit: String,
    pub agree: bool,
}

/// Runs both c assemblers over every standard Q and w ∈ W(P;Q).
pub fn compare_c_formulas(reg: &AtomRegistry, names: &[String], data: &LocalData) -> Result<Vec<CComparison>, LError> {
    let p = data.parabolic(reg)?;
    let mut out = Vec::new();
    for qc in Composition::all(p.ambient()) {
        let q = BlockParabolic::standard(&qc);
        for w in crate::parabolic::w_into(&p, &q)? {
            let c1 = c_coefficient(reg, names, data, &q, &w)?.modulo_units();
            let c2 = explicit_c(reg, names, data, &q, &w)?.modulo_units();
            out.push(CComparison { q: qc.parts.clone(), w, formula: c1.to_string(), explicit: c2.to_string(), agree: c1 == c2 });
        }
    }
    Ok(out)
}

/// Refines Steinberg blocks St(σ, d) at λ into d supercuspidal blocks at λ − ν_δ,
/// with exponents λ + (d+1)/2 − i.
pub fn refine_steinberg(data: &LocalData) -> LocalData {
    let mut blocks = Vec::new();
    for b in &data.blocks {
        let d = b.datum.d as i64;
        for i in 1..=d {
            blocks.push(Block::new(b.datum.atom.clone(), 1, b.lambda.plus_const(&rat::qf(d + 1 - 2 * i, 2))));
        }
    }
    LocalData { blocks }
}

/// γ_δ(w, λ) against γ_{σ_δ}(w, λ − ν_δ), modulo units.
pub fn inductive_gamma_check(reg: &AtomRegistry, names: &[String], data: &LocalData, w: &Perm) -> Result<bool, LError> {
    let g = gamma_product(reg, names, data, w)?;
    let g2 = gamma_product(reg, names, &refine_steinberg(data), w)?;
    Ok(g.eq_mod_units(&g2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formal_mero::default_names;

    fn names(n: usize) -> Vec<String> {
        default_names(n)
    }

    fn borel(reg: &AtomRegistry, atoms: &[&str]) -> LocalData {
        let k = atoms.len();
        LocalData::new(atoms.iter().enumerate().map(|(i, a)| Block::new(reg.atom(a).unwrap(), 1, AffineForm::var(k, i))).collect())
    }

    fn chars() -> AtomRegistry {
        AtomRegistry::from_json(
            r#"{"atoms":[{"id":"1","rank":1},{"id":"chi","rank":1},{"id":"chiv","rank":1},{"id":"eta","rank":1}],
                "dual_pairs":[["1","1"],["chi","chiv"]],
                "match_sets":[{"x":{"id":"eta"},"y":{"id":"1"},"t":["1/3"]}]}"#,
        )
        .unwrap()
    }

    #[test]
    fn registry_duality() {
        let r = chars();
        let chi = r.atom("chi").unwrap();
        let chiv = r.atom("chiv").unwrap();
        assert!(r.is_dual(&chi, &chiv));
        assert!(!r.is_dual(&chi, &chi));
        assert_eq!(r.dual_of(&chi), chiv);
        let one = r.atom("1").unwrap();
        assert!(r.is_dual(&one, &one));
        assert_eq!(r.match_set(&one, &one).into_iter().collect::<Vec<_>>(), vec![Q::zero()]);
        let eta = r.atom("eta").unwrap();
        assert_eq!(r.match_set(&one, &eta).into_iter().collect::<Vec<_>>(), vec![rat::qf(1, 3)]);
        assert_eq!(r.match_set(&one, &r.dual_of(&eta)).into_iter().collect::<Vec<_>>(), vec![rat::qf(-1, 3)]);
        assert!(r.match_set(&eta, &eta).is_empty());
        assert!(AtomRegistry::from_json(r#"{"atoms":[{"id":"a","rank":1}],"dual_pairs":[["a","b"]]}"#).is_err());
    }

    #[test]
    fn speh_examples() {
        let mut s = speh_shifts(2, 3);
        s.sort();
        let want: Vec<Q> = [-3, -1, -1, 1, 1, 3].iter().map(|&x| rat::qf(x, 2)).collect();
        assert_eq!(s, want);
        let r = AtomRegistry::trivial();
        let nm = names(1);
        let one = SpehDatum::new(r.atom("1").unwrap(), 2);
        let f = speh_rs_l(&r, &nm, &one, &SpehDatum::new(r.atom("1").unwrap(), 1), &AffineForm::var(1, 0)).unwrap();
        assert_eq!(f.atoms.len(), 2);
        let z = speh_rs_l(&r, &nm, &one, &SpehDatum::new(r.atom("1").unwrap(), 0), &AffineForm::var(1, 0)).unwrap();
        assert_eq!(z, FormalMero::one(&nm));
    }

    #[test]
    fn steinberg_examples() {
        let r = AtomRegistry::trivial();
        let nm = names(1);
        let one = r.atom("1").unwrap();
        let s = AffineForm::var(1, 0);
        let f = steinberg_rs_l_local(&r, &nm, 2, 1, &one, &one, &s).unwrap();
        assert_eq!(f, FormalMero::atom(&nm, AtomKind::LocalZeta, s.plus_const(&rat::half()), 1));
        let c = chars();
        let chi = c.atom("chi").unwrap();
        assert_eq!(steinberg_rs_l_local(&c, &nm, 3, 2, &chi, &chi, &s).unwrap(), FormalMero::one(&nm));
    }

    #[test]
    fn normalizers_gl1_gl2() {
        let r = AtomRegistry::trivial();
        let nm: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let one = r.atom("1").unwrap();
        let n = vec![Block::new(one.clone(), 1, AffineForm::var(3, 0))];
        let np1 = vec![Block::new(one.clone(), 1, AffineForm::var(3, 1)), Block::new(one, 1, AffineForm::var(3, 2))];
        let (b, lh) = b_and_rs_normalizers(&r, &nm, Scope::Local, &n, &np1).unwrap();
        assert_eq!(b.to_string(), "ζ_q(b-c+1)");
        assert_eq!(lh.atoms.len(), 2);
        let (b, lh) = b_and_rs_normalizers(&r, &nm, Scope::Global, &n, &np1).unwrap();
        assert_eq!(b.to_string(), "ξ(b-c+1)");
        assert!(lh.to_string().contains("ξ(a+b+1/2)") && lh.to_string().contains("ξ(a+c+1/2)"));
    }

    #[test]
    fn n_gamma_basic() {
        let r = AtomRegistry::trivial();
        let d = borel(&r, &["1", "1"]);
        let nm = names(2);
        assert_eq!(n_product(&r, &nm, &d, &Perm::identity(2)).unwrap(), FormalMero::one(&nm));
        let s = AffineForm::var(2, 0);
        let (n, g) = n_gamma_factors(&r, &nm, &d, 0, 1, &s).unwrap();
        let mut want = FormalMero::atom(&nm, AtomKind::LocalZeta, s.neg().plus_const(&Q::one()), 1);
        want.push(AtomKind::LocalZeta, s.clone(), -1);
        assert!(g.eq_mod_units(&want));
        let mut ng = FormalMero::atom(&nm, AtomKind::LocalZeta, s.neg().plus_const(&Q::one()), 1);
        ng.push(AtomKind::LocalZeta, s.plus_const(&Q::one()), -1);
        assert!(n.mul(&g).unwrap().eq_mod_units(&ng));
    }

    #[test]
    fn c_full_group_identity() {
        let r = chars();
        let d = borel(&r, &["chi", "1"]);
        let nm = names(2);
        let g = BlockParabolic::full(2);
        let c = c_coefficient(&r, &nm, &d, &g, &Perm::identity(2)).unwrap();
        assert!(c.eq_mod_units(&FormalMero::one(&nm)));
    }

    #[test]
    fn c_formulas_agree_gl2_gl3() {
        let r = chars();
        for atoms in [vec!["1", "1"], vec!["chi", "chiv"], vec!["1", "eta"], vec!["1", "1", "1"], vec!["chi", "1", "chiv"], vec!["eta", "1", "chi"]] {
            let d = borel(&r, &atoms);
            let nm = names(atoms.len());
            for c in compare_c_formulas(&r, &nm, &d).unwrap() {
                assert!(c.agree, "{atoms:?} {c:?}");
            }
        }
    }

    #[test]
    fn c_isolation_identity_gl3() {
        let r = chars();
        let d = borel(&r, &["chi", "1", "eta"]);
        let nm = names(3);
        let p = BlockParabolic::borel(3);
        for qc in Composition::all(3) {
            let q = BlockParabolic::standard(&qc);
            for w in crate::parabolic::w_into(&p, &q).unwrap() {
                let wd = d.act(&r, &w).unwrap();
                let lhs = explicit_c(&r, &nm, &wd, &q, &Perm::identity(3)).unwrap();
                let n = n_product(&r, &nm, &d, &w).unwrap();
                let g = gamma_product(&r, &nm, &d, &w).unwrap();
                let rhs = explicit_c(&r, &nm, &d, &q, &w).unwrap().div(&n).unwrap().div(&g).unwrap();
                assert!(lhs.eq_mod_units(&rhs), "{qc} {w}");
            }
        }
    }

    #[test]
    fn inductive_gamma_steinberg() {
        let r = chars();
        let nm = names(2);
        for (a, da, b, db) in [("1", 2, "1", 1), ("1", 1, "1", 2), ("chi", 2, "chiv", 1), ("1", 2, "eta", 1), ("1", 2, "1", 2)] {
            let d = LocalData::new(vec![
                Block::new(r.atom(a).unwrap(), da, AffineForm::var(2, 0)),
                Block::new(r.atom(b).unwrap(), db, AffineForm::var(2, 1)),
            ]);
            let k = da + db;
            let (w, _) = Perm::from_block_permutation(&[da, db], &Perm(vec![1, 0]));
            assert_eq!(w.degree(), k);
            assert!(inductive_gamma_check(&r, &nm, &d, &w).unwrap(), "{a}{da} {b}{db}");
        }
    }

    #[test]
    fn induced_matches_speh() {
        let r = AtomRegistry::trivial();
        let nm = names(1);
        let one = r.atom("1").unwrap();
        let s = AffineForm::var(1, 0);
        for d in 1..=3usize {
            for dp in 1..=3usize {
                let tw = |d: usize| -> Vec<(SpehDatum, Q)> {
                    (1..=d as i64).map(|i| (SpehDatum::new(one.clone(), 1), rat::qf(d as i64 - 2 * i + 1, 2))).collect()
                };
                let a = induced_rs_l(&r, &nm, Scope::Global, &tw(d), &tw(dp), &s).unwrap();
                let b = speh_rs_l(&r, &nm, &SpehDatum::new(one.clone(), d), &SpehDatum::new(one.clone(), dp), &s).unwrap();
                assert_eq!(a, b);
            }
        }
    }
}
