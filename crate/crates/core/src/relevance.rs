//! Relevant inducing pairs of GL_n × GL_{n+1}: the cell layout of the cuspidal datum,
//! the singular hyperplanes L_±, the global iterated residue, the quotient cL and the
//! Weyl and parabolic data attached to the residue.
//!
//! Cells are the GL_r blocks of M_{P_π}. On the n side the family-1 blocks come first
//! (d(1,i) cells carrying σ_{1,i}), then the family-2 blocks (d(2,i)−1 cells carrying
//! σ_{2,i}∨). On the n+1 side: family 1 with d(1,i)−1 cells carrying σ_{1,i}∨, then
//! family 2 with d(2,i) cells carrying σ_{2,i}. Every coordinate lookup goes through
//! [`Layout`].

use crate::formal_mero::{AffineForm, AffineSubspace, AtomRef, FormalMero, MeroError};
use crate::lfactors::{b_and_rs_normalizers, global_rs, AtomRegistry, Block, LError, Scope};
use crate::parabolic::{conjugate, is_coset_rep, relative_parabolics, BlockParabolic, Composition, Perm, WeylError};
use crate::rat::{self, q, Q};
use crate::rs::RSParabolic;
use num::{One, Signed, Zero};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RelError {
    #[error("invalid pair: {0}")]
    Invalid(String),
    #[error("dimension identity fails: {0}")]
    Dimension(String),
    #[error("k-identity fails: sum r(1,i) = {0} but sum r(2,j) - 1 = {1}")]
    KIdentity(i64, i64),
    #[error("pair file: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    L(#[from] LError),
    #[error(transparent)]
    Mero(#[from] MeroError),
    #[error(transparent)]
    Weyl(#[from] WeylError),
    #[error("residue step along {form} failed: {err}")]
    Step { form: String, err: MeroError },
    #[error("assertion failed: {0}")]
    Assertion(String),
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), RelError> {
    if cond {
        Ok(())
    } else {
        Err(RelError::Assertion(msg()))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FamilyEntry {
    pub r: usize,
    pub d: usize,
    pub atom: AtomRef,
}

#[derive(Deserialize)]
struct RawEntry {
    r: i64,
    d: i64,
    #[serde(default = "default_atom")]
    atom: String,
    #[serde(default)]
    dual: bool,
}

fn default_atom() -> String {
    "1".to_string()
}

#[derive(Deserialize)]
struct RawPair {
    #[serde(default)]
    family1: Vec<RawEntry>,
    #[serde(default)]
    family2: Vec<RawEntry>,
    #[serde(default)]
    n: Option<usize>,
}

/// ((r(1,i), d(1,i), σ_{1,i}))_i and ((r(2,j), d(2,j), σ_{2,j}))_j.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct InducingPair {
    pub family1: Vec<FamilyEntry>,
    pub family2: Vec<FamilyEntry>,
}

impl InducingPair {
    /// Validates the dimension and k identities; atoms are resolved through `reg`
    /// and must have rank r.
    pub fn new(family1: Vec<FamilyEntry>, family2: Vec<FamilyEntry>, reg: &AtomRegistry) -> Result<Self, RelError> {
        let mut out = InducingPair { family1: vec![], family2: vec![] };
        for (fam, src) in [(&mut out.family1, family1), (&mut out.family2, family2)] {
            for e in src {
                if e.r == 0 || e.d == 0 {
                    return Err(RelError::Invalid(format!("r and d must be positive, got r={}, d={}", e.r, e.d)));
                }
                let rank = reg.rank(&e.atom.id)?;
                if rank != e.r {
                    return Err(RelError::Invalid(format!("atom {} has rank {rank}, expected {}", e.atom, e.r)));
                }
                fam.push(FamilyEntry { r: e.r, d: e.d, atom: reg.resolve(&e.atom) });
            }
        }
        let s1: i64 = out.family1.iter().map(|e| e.r as i64).sum();
        let s2: i64 = out.family2.iter().map(|e| e.r as i64).sum();
        if s1 != s2 - 1 {
            return Err(RelError::KIdentity(s1, s2 - 1));
        }
        if out.n() == 0 {
            return Err(RelError::Dimension("n = sum r(1,i) d(1,i) + sum r(2,j) (d(2,j)-1) must be positive".into()));
        }
        Ok(out)
    }

    pub fn from_json(s: &str, reg: &AtomRegistry) -> Result<Self, RelError> {
        let raw: RawPair = serde_json::from_str(s)?;
        let conv = |v: Vec<RawEntry>| -> Result<Vec<FamilyEntry>, RelError> {
            v.into_iter()
                .map(|e| {
                    if e.r <= 0 || e.d <= 0 {
                        return Err(RelError::Invalid(format!("r and d must be positive, got r={}, d={}", e.r, e.d)));
                    }
                    Ok(FamilyEntry { r: e.r as usize, d: e.d as usize, atom: AtomRef { id: e.atom, dual: e.dual, partner: None } })
                })
                .collect()
        };
        let p = Self::new(conv(raw.family1)?, conv(raw.family2)?, reg)?;
        if let Some(n) = raw.n {
            if n != p.n() {
                return Err(RelError::Dimension(format!("declared n = {n} but the families give n = {}", p.n())));
            }
        }
        Ok(p)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let fam = |v: &[FamilyEntry]| -> Vec<serde_json::Value> {
            v.iter().map(|e| serde_json::json!({"r": e.r, "d": e.d, "atom": e.atom.to_string()})).collect()
        };
        serde_json::json!({
            "family1": fam(&self.family1),
            "family2": fam(&self.family2),
            "n": self.n(),
            "n+1": self.n() + 1,
            "k": self.k(),
        })
    }

    pub fn n(&self) -> usize {
        self.family1.iter().map(|e| e.r * e.d).sum::<usize>() + self.family2.iter().map(|e| e.r * (e.d - 1)).sum::<usize>()
    }

    pub fn k(&self) -> usize {
        self.family1.iter().map(|e| e.r).sum()
    }

    pub fn m1(&self) -> usize {
        self.family1.len()
    }

    pub fn m2(&self) -> usize {
        self.family2.len()
    }

    /// d(1,≤i) = Σ_{j≤i} (d(1,j)−1).
    pub fn d1_le(&self, i: usize) -> usize {
        self.family1[..i].iter().map(|e| e.d - 1).sum()
    }

    pub fn d2_le(&self, i: usize) -> usize {
        self.family2[..i].iter().map(|e| e.d - 1).sum()
    }

    pub fn big_d(&self) -> usize {
        self.d1_le(self.m1()) + self.d2_le(self.m2())
    }

    pub fn is_tempered(&self) -> bool {
        self.big_d() == 0
    }

    fn family(&self, f: u8) -> &[FamilyEntry] {
        if f == 1 {
            &self.family1
        } else {
            &self.family2
        }
    }

    /// The pair with family blocks permuted: block i moves to position s(i).
    pub fn permuted(&self, s1: &Perm, s2: &Perm) -> InducingPair {
        let perm = |v: &[FamilyEntry], s: &Perm| {
            let mut out = v.to_vec();
            for (i, e) in v.iter().enumerate() {
                out[s.apply(i)] = e.clone();
            }
            out
        };
        InducingPair { family1: perm(&self.family1, s1), family2: perm(&self.family2, s2) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Side {
    N,
    Np1,
}

#[derive(Clone, Debug, Serialize)]
pub struct Cell {
    pub side: Side,
    pub family: u8,
    /// 1-based block index within the family.
    pub block: usize,
    /// 1-based position inside the Speh block.
    pub j: usize,
    pub r: usize,
    pub atom: AtomRef,
    pub var: usize,
    pub name: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Layout {
    pub cells: Vec<Cell>,
    pub names: Vec<String>,
    pub n_cells: usize,
    #[serde(skip)]
    index: BTreeMap<(Side, u8, usize, usize), usize>,
}

impl Layout {
    pub fn new(pair: &InducingPair, reg: &AtomRegistry) -> Self {
        let mut specs: Vec<(Side, u8, usize, usize, usize, AtomRef)> = Vec::new();
        for (i, e) in pair.family1.iter().enumerate() {
            for j in 1..=e.d {
                specs.push((Side::N, 1, i + 1, j, e.r, reg.resolve(&e.atom)));
            }
        }
        for (i, e) in pair.family2.iter().enumerate() {
            for j in 1..e.d {
                specs.push((Side::N, 2, i + 1, j, e.r, reg.dual_of(&e.atom)));
            }
        }
        let n_cells = specs.len();
        for (i, e) in pair.family1.iter().enumerate() {
            for j in 1..e.d {
                specs.push((Side::Np1, 1, i + 1, j, e.r, reg.dual_of(&e.atom)));
            }
        }
        for (i, e) in pair.family2.iter().enumerate() {
            for j in 1..=e.d {
                specs.push((Side::Np1, 2, i + 1, j, e.r, reg.resolve(&e.atom)));
            }
        }
        let total = specs.len();
        let names: Vec<String> = (0..total)
            .map(|v| if total <= 26 { ((b'a' + v as u8) as char).to_string() } else { format!("z{}", v + 1) })
            .collect();
        let mut index = BTreeMap::new();
        let cells = specs
            .into_iter()
            .enumerate()
            .map(|(var, (side, family, block, j, r, atom))| {
                index.insert((side, family, block, j), var);
                Cell { side, family, block, j, r, atom, var, name: names[var].clone() }
            })
            .collect();
        Layout { cells, names, n_cells, index }
    }

    pub fn nvars(&self) -> usize {
        self.names.len()
    }

    /// Variable of λ(family, block)_{side, j}; panics outside the layout.
    pub fn var(&self, side: Side, family: u8, block: usize, j: usize) -> usize {
        *self
            .index
            .get(&(side, family, block, j))
            .unwrap_or_else(|| panic!("no cell {side:?} family {family} block {block} position {j}"))
    }

    pub fn form(&self, side: Side, family: u8, block: usize, j: usize) -> AffineForm {
        AffineForm::var(self.nvars(), self.var(side, family, block, j))
    }

    pub fn side_cells(&self, side: Side) -> &[Cell] {
        match side {
            Side::N => &self.cells[..self.n_cells],
            Side::Np1 => &self.cells[self.n_cells..],
        }
    }

    pub fn cell_sizes(&self, side: Side) -> Vec<usize> {
        self.side_cells(side).iter().map(|c| c.r).collect()
    }

    /// M_{P_π} on one side as a standard parabolic of GL_n or GL_{n+1}.
    pub fn p_pi(&self, side: Side) -> BlockParabolic {
        BlockParabolic::standard(&Composition { parts: self.cell_sizes(side) })
    }

    /// Ranges (positions within the side) of the Speh blocks.
    pub fn speh_blocks(&self, side: Side) -> Vec<std::ops::Range<usize>> {
        let cells = self.side_cells(side);
        let mut out: Vec<std::ops::Range<usize>> = Vec::new();
        for (p, c) in cells.iter().enumerate() {
            match out.last_mut() {
                Some(r) if c.j > 1 => r.end = p + 1,
                _ => out.push(p..p + 1),
            }
        }
        out
    }

    /// Expands a permutation of the cells of one side to the GL coordinates.
    pub fn to_coords(&self, side: Side, cell_perm: &Perm) -> Perm {
        Perm::from_block_permutation(&self.cell_sizes(side), cell_perm).0
    }

    /// Affine forms giving each GL coordinate of one side, from the cell variables.
    pub fn coordinate_forms(&self, side: Side) -> Vec<AffineForm> {
        let nv = self.nvars();
        self.side_cells(side).iter().flat_map(|c| std::iter::repeat(AffineForm::var(nv, c.var)).take(c.r)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct FormLabel {
    pub plus: bool,
    pub family: u8,
    pub i: usize,
    pub j: usize,
}

impl fmt::Display for FormLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Λ{}({},{},{})", if self.plus { "+" } else { "-" }, self.family, self.i, self.j)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SingularForm {
    pub label: FormLabel,
    pub form: AffineForm,
}

#[derive(Clone, Debug, Serialize)]
pub struct SingularForms {
    pub plus: Vec<SingularForm>,
    pub minus: Vec<SingularForm>,
}

impl SingularForms {
    /// L_+ followed by L_−.
    pub fn all(&self) -> Vec<AffineForm> {
        self.plus.iter().chain(&self.minus).map(|f| f.form.clone()).collect()
    }

    pub fn labels(&self) -> Vec<FormLabel> {
        self.plus.iter().chain(&self.minus).map(|f| f.label).collect()
    }

    pub fn len(&self) -> usize {
        self.plus.len() + self.minus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index_of(&self, label: FormLabel) -> usize {
        self.labels().iter().position(|l| *l == label).expect("label present")
    }

    pub fn get(&self, label: FormLabel) -> &AffineForm {
        &self.plus.iter().chain(&self.minus).find(|f| f.label == label).expect("label present").form
    }

    pub fn render(&self, names: &[String]) -> (Vec<String>, Vec<String>) {
        (
            self.plus.iter().map(|f| f.form.render(names)).collect(),
            self.minus.iter().map(|f| f.form.render(names)).collect(),
        )
    }
}

pub fn singular_forms(pair: &InducingPair, layout: &Layout) -> SingularForms {
    let h = rat::half();
    let mut plus = Vec::new();
    let mut minus = Vec::new();
    for (i, e) in pair.family1.iter().enumerate() {
        let (i, d) = (i + 1, e.d);
        for j in 1..d {
            let a = layout.form(Side::N, 1, i, d - j + 1).add(&layout.form(Side::Np1, 1, i, j)).plus_const(&h).neg();
            plus.push(SingularForm { label: FormLabel { plus: true, family: 1, i, j }, form: a });
            let b = layout.form(Side::N, 1, i, d - j).add(&layout.form(Side::Np1, 1, i, j)).plus_const(&-&h);
            minus.push(SingularForm { label: FormLabel { plus: false, family: 1, i, j }, form: b });
        }
    }
    for (i, e) in pair.family2.iter().enumerate() {
        let (i, d) = (i + 1, e.d);
        for j in 1..d {
            let a = layout.form(Side::N, 2, i, j).add(&layout.form(Side::Np1, 2, i, d - j + 1)).plus_const(&h).neg();
            plus.push(SingularForm { label: FormLabel { plus: true, family: 2, i, j }, form: a });
            let b = layout.form(Side::N, 2, i, j).add(&layout.form(Side::Np1, 2, i, d - j)).plus_const(&-&h);
            minus.push(SingularForm { label: FormLabel { plus: false, family: 2, i, j }, form: b });
        }
    }
    SingularForms { plus, minus }
}

/// The L_+ schedule used with m = n+1: family 1 (i ascending, j descending), then
/// family 2 (i ascending, j ascending). Indices into `forms.all()`.
pub fn first_order(forms: &SingularForms) -> Vec<usize> {
    schedule(forms, false, true)
}

/// The L_+ schedule used with m = n: family 1 (j ascending), then family 2 (j descending).
pub fn second_order(forms: &SingularForms) -> Vec<usize> {
    schedule(forms, true, false)
}

fn schedule(forms: &SingularForms, fam1_asc: bool, fam2_asc: bool) -> Vec<usize> {
    let mut out = Vec::new();
    for (fam, asc) in [(1u8, fam1_asc), (2u8, fam2_asc)] {
        let mut blocks: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
        for (idx, f) in forms.plus.iter().enumerate() {
            if f.label.family == fam {
                blocks.entry(f.label.i).or_default().push((f.label.j, idx));
            }
        }
        for (_, mut v) in blocks {
            v.sort();
            if !asc {
                v.reverse();
            }
            out.extend(v.into_iter().map(|(_, idx)| idx));
        }
    }
    out
}

/// An L_+ schedule followed by L_− in label order.
pub fn full_order(forms: &SingularForms, plus_order: &[usize]) -> Vec<usize> {
    let mut o = plus_order.to_vec();
    o.extend(forms.plus.len()..forms.len());
    o
}

pub fn random_order<R: Rng>(forms: &SingularForms, rng: &mut R) -> Vec<usize> {
    let mut o: Vec<usize> = (0..forms.len()).collect();
    o.shuffle(rng);
    o
}

/// Names of the 𝔞_π^* coordinates λ(1)_i, λ(2)_j.
pub fn a_pi_names(pair: &InducingPair) -> Vec<String> {
    (1..=pair.m1()).map(|i| format!("x{i}")).chain((1..=pair.m2()).map(|j| format!("y{j}"))).collect()
}

/// ν_π on the cell coordinates: on a Speh block of d cells, cell j gets j − (d+1)/2.
pub fn nu_pi(layout: &Layout) -> Vec<Q> {
    let mut nu = rat::zeros(layout.nvars());
    for side in [Side::N, Side::Np1] {
        let off = if side == Side::N { 0 } else { layout.n_cells };
        for r in layout.speh_blocks(side) {
            let d = (r.end - r.start) as i64;
            for (t, p) in r.enumerate() {
                nu[off + p] = q(t as i64 + 1) - rat::qf(d + 1, 2);
            }
        }
    }
    nu
}

/// The affine map μ ↦ ι(μ) − ν_π from 𝔞_π^* to the cell coordinates.
pub fn embedding(pair: &InducingPair, layout: &Layout) -> Vec<AffineForm> {
    let m = pair.m1() + pair.m2();
    let nu = nu_pi(layout);
    layout
        .cells
        .iter()
        .map(|c| {
            let (idx, sign) = match (c.family, c.side) {
                (1, Side::N) => (c.block - 1, 1),
                (1, Side::Np1) => (c.block - 1, -1),
                (_, Side::N) => (pair.m1() + c.block - 1, -1),
                (_, Side::Np1) => (pair.m1() + c.block - 1, 1),
            };
            AffineForm::var(m, idx).scale(&q(sign)).plus_const(&-&nu[c.var])
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct IntersectionReport {
    pub dim: usize,
    pub expected_dim: usize,
    pub constraints: Vec<String>,
    pub parametrization: Vec<String>,
    pub alternatives_checked: usize,
}

/// Computes H_+ ∩ H_− and checks that it is the image of 𝔞_π^* − ν_π, together with
/// the alternative expressions of Λ_− on H_+.
pub fn intersection_check(pair: &InducingPair, layout: &Layout, forms: &SingularForms) -> Result<(AffineSubspace, IntersectionReport), RelError> {
    let nv = layout.nvars();
    let space = AffineSubspace::from_forms(nv, &forms.all())?;
    let expected = nv - forms.plus.len() - forms.minus.len();
    ensure(space.dim() == expected, || format!("dim H+ ∩ H- = {} but expected {expected}", space.dim()))?;
    let emb = embedding(pair, layout);
    for row in &space.rows {
        ensure(row.pullback(&emb).is_zero(), || format!("{} does not vanish on the image of a_pi", row.render(&layout.names)))?;
    }
    // ι is injective, so equal dimensions give equality
    let m = pair.m1() + pair.m2();
    let lin: Vec<Vec<Q>> = (0..m).map(|k| emb.iter().map(|f| f.coeffs[k].clone()).collect()).collect();
    ensure(rat::rank(&lin, nv) == m && m == space.dim(), || "image of a_pi has the wrong dimension".into())?;

    let h_plus = AffineSubspace::from_forms(nv, &forms.plus.iter().map(|f| f.form.clone()).collect::<Vec<_>>())?;
    let one = Q::one();
    let mut checked = 0;
    for f in &forms.minus {
        let FormLabel { family, i, j, .. } = f.label;
        let d = pair.family(family)[i - 1].d;
        let mut alts = Vec::new();
        if family == 1 {
            alts.push(layout.form(Side::N, 1, i, d - j).sub(&layout.form(Side::N, 1, i, d - j + 1)).plus_const(&-&one));
            if j + 1 <= d - 1 {
                alts.push(layout.form(Side::Np1, 1, i, j).sub(&layout.form(Side::Np1, 1, i, j + 1)).plus_const(&-&one));
            }
        } else {
            if j + 1 <= d - 1 {
                alts.push(layout.form(Side::N, 2, i, j).sub(&layout.form(Side::N, 2, i, j + 1)).plus_const(&-&one));
            }
            alts.push(layout.form(Side::Np1, 2, i, d - j).sub(&layout.form(Side::Np1, 2, i, d - j + 1)).plus_const(&-&one));
        }
        for a in alts {
            ensure(h_plus.contains_zero_set_of(&f.form.sub(&a)), || {
                format!("{} differs from {} on H+", f.label, a.render(&layout.names))
            })?;
            checked += 1;
        }
    }
    let mu_names = a_pi_names(pair);
    let report = IntersectionReport {
        dim: space.dim(),
        expected_dim: expected,
        constraints: space.rows.iter().map(|r| format!("{} = 0", r.render(&layout.names))).collect(),
        parametrization: layout.names.iter().zip(&emb).map(|(n, f)| format!("{n} = {}", f.render(&mu_names))).collect(),
        alternatives_checked: checked,
    };
    Ok((space, report))
}

/// cL(λ, π) on 𝔞_π^* with coordinates [`a_pi_names`].
pub fn cl_quotient(pair: &InducingPair, reg: &AtomRegistry) -> Result<FormalMero, RelError> {
    let names = a_pi_names(pair);
    let m = names.len();
    let (m1, m2) = (pair.m1(), pair.m2());
    let x = |i: usize| AffineForm::var(m, i);
    let y = |j: usize| AffineForm::var(m, m1 + j);
    let mut out = FormalMero::one(&names);
    for (i, a) in pair.family1.iter().enumerate() {
        for (j, b) in pair.family2.iter().enumerate() {
            let s = x(i).add(&y(j)).plus_const(&rat::qf(a.d as i64 - b.d as i64 + 1, 2));
            out = out.mul(&global_rs(reg, &names, &a.atom, &b.atom, &s)?)?;
        }
    }
    for (fam, mk, var) in [(&pair.family1, m1, 0usize), (&pair.family2, m2, m1)] {
        for i in 0..mk {
            for j in i + 1..mk {
                let s = x(var + i).sub(&x(var + j)).plus_const(&rat::qf((fam[i].d + fam[j].d) as i64, 2));
                out = out.div(&global_rs(reg, &names, &fam[i].atom, &reg.dual_of(&fam[j].atom), &s)?)?;
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum FactorStatus {
    /// Pole at λ = 0, replaced by the residue symbol.
    Residue,
    /// Value at λ = 0 known to be finite and nonzero.
    Nonzero,
    /// Value in the critical strip: its nonvanishing is part of the criterion.
    Central,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct ClFactor {
    pub x: String,
    pub y: String,
    #[serde(serialize_with = "rat::ser_q")]
    pub point: Q,
    pub status: FactorStatus,
}

impl ClFactor {
    /// Class of the factor up to exchanging the two atoms and passing to contragredients.
    fn class(&self, reg: &AtomRegistry) -> (String, String, Q, FactorStatus) {
        let parse = |s: &str| match s.strip_suffix('∨') {
            Some(id) => reg.resolve(&AtomRef { id: id.to_string(), dual: true, partner: None }),
            None => reg.resolve(&AtomRef::new(s)),
        };
        let (x, y) = (parse(&self.x), parse(&self.y));
        let mut cands = Vec::new();
        for (a, b) in [(x.clone(), y.clone()), (reg.dual_of(&x), reg.dual_of(&y))] {
            let (a, b) = (a.to_string(), b.to_string());
            cands.push(if a <= b { (a, b) } else { (b, a) });
        }
        cands.sort();
        let (a, b) = cands.swap_remove(0);
        (a, b, self.point.clone(), self.status.clone())
    }
}

/// cL at λ = 0 with pole-hitting factors replaced by residue symbols.
#[derive(Clone, Debug, Serialize)]
pub struct ClStar {
    pub numerator: Vec<ClFactor>,
    pub denominator: Vec<ClFactor>,
    /// Central values whose nonvanishing is equivalent to cL* ≠ 0.
    pub criterion: Vec<String>,
    /// (residues in the numerator) − (residues in the denominator).
    pub pole_order: i64,
}

pub fn cl_star(pair: &InducingPair, reg: &AtomRegistry) -> Result<ClStar, RelError> {
    let status = |dual: bool, p: &Q| {
        let edge = p.is_zero() || p.is_one();
        if edge && dual {
            FactorStatus::Residue
        } else if edge || *p > Q::one() || p.is_negative() {
            FactorStatus::Nonzero
        } else {
            FactorStatus::Central
        }
    };
    let mut numerator = Vec::new();
    for a in &pair.family1 {
        for b in &pair.family2 {
            let p = rat::qf(a.d as i64 - b.d as i64 + 1, 2);
            let st = status(reg.is_dual(&a.atom, &b.atom), &p);
            numerator.push(ClFactor { x: a.atom.to_string(), y: b.atom.to_string(), point: p, status: st });
        }
    }
    let mut denominator = Vec::new();
    for fam in [&pair.family1, &pair.family2] {
        for i in 0..fam.len() {
            for j in i + 1..fam.len() {
                let yv = reg.dual_of(&fam[j].atom);
                let p = rat::qf((fam[i].d + fam[j].d) as i64, 2);
                let st = status(reg.is_dual(&fam[i].atom, &yv), &p);
                denominator.push(ClFactor { x: fam[i].atom.to_string(), y: yv.to_string(), point: p, status: st });
            }
        }
    }
    let count = |v: &[ClFactor]| v.iter().filter(|f| f.status == FactorStatus::Residue).count() as i64;
    let criterion = numerator
        .iter()
        .filter(|f| f.status == FactorStatus::Central)
        .map(|f| format!("L({}, {}×{}) ≠ 0", rat::fmt_q(&f.point), f.x, f.y))
        .collect();
    Ok(ClStar { pole_order: count(&numerator) - count(&denominator), numerator, denominator, criterion })
}

/// True when two cL* reports have the same numerator and denominator multisets, up to
/// the symmetries of the Rankin-Selberg factors.
pub fn same_criterion(a: &ClStar, b: &ClStar, reg: &AtomRegistry) -> bool {
    let ms = |v: &[ClFactor]| {
        let mut c: Vec<_> = v.iter().map(|f| f.class(reg)).collect();
        c.sort();
        c
    };
    ms(&a.numerator) == ms(&b.numerator) && ms(&a.denominator) == ms(&b.denominator) && a.pole_order == b.pole_order
}

/// L(λ + 1/2, σ_{π,n} × σ_{π,n+1}) / b(λ, σ_π) on the cell coordinates.
pub fn global_kernel(layout: &Layout, reg: &AtomRegistry) -> Result<FormalMero, RelError> {
    let nv = layout.nvars();
    let blocks = |side| -> Vec<Block> {
        layout.side_cells(side).iter().map(|c| Block::new(c.atom.clone(), 1, AffineForm::var(nv, c.var))).collect()
    };
    let (b, lh) = b_and_rs_normalizers(reg, &layout.names, Scope::Global, &blocks(Side::N), &blocks(Side::Np1))?;
    Ok(lh.div(&b)?)
}

#[derive(Clone, Debug, Serialize)]
pub struct PipelineStep {
    pub label: String,
    pub form: String,
    pub order: i64,
    pub undecided: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct PipelineReport {
    pub pair: serde_json::Value,
    pub coordinates: Vec<String>,
    pub l_plus: Vec<String>,
    pub l_minus: Vec<String>,
    pub orders: Vec<Vec<String>>,
    pub steps: Vec<PipelineStep>,
    pub kernel: String,
    pub result: serde_json::Value,
    pub on_a_pi: serde_json::Value,
    pub cl: String,
    pub order_independent: bool,
    pub matches_cl: bool,
    #[serde(skip)]
    pub result_mero: FormalMero,
    #[serde(skip)]
    pub on_a_pi_mero: FormalMero,
}

/// Iterated residue of the global kernel along L_+ ∪ L_− in the two documented
/// schedules and in every order of `extra`, pulled back to 𝔞_π^* and compared with cL.
pub fn global_residue_pipeline(pair: &InducingPair, reg: &AtomRegistry, extra: &[Vec<usize>]) -> Result<PipelineReport, RelError> {
    let layout = Layout::new(pair, reg);
    let forms = singular_forms(pair, &layout);
    let all = forms.all();
    let labels = forms.labels();
    let kernel = global_kernel(&layout, reg)?;
    let mut orders = vec![full_order(&forms, &first_order(&forms)), full_order(&forms, &second_order(&forms))];
    orders.extend(extra.iter().cloned());
    let mut results: Vec<FormalMero> = Vec::new();
    let mut steps = Vec::new();
    for (k, o) in orders.iter().enumerate() {
        let mut f = kernel.clone();
        for &i in o {
            if k == 0 {
                let d = f.divisor_along(&all[i]).map_err(|err| RelError::Step { form: labels[i].to_string(), err })?;
                steps.push(PipelineStep { label: labels[i].to_string(), form: all[i].render(&layout.names), order: d.order, undecided: d.undecided });
            }
            f = f.residue(&all[i]).map_err(|err| RelError::Step { form: labels[i].to_string(), err })?;
        }
        results.push(f);
    }
    let result = results[0].clone();
    let order_independent = results.iter().all(|r| *r == result);
    let mu_names = a_pi_names(pair);
    let on_a_pi = result.pullback(&mu_names, &embedding(pair, &layout))?;
    let cl = cl_quotient(pair, reg)?;
    let matches_cl = on_a_pi.eq_mod_units(&cl);
    let (l_plus, l_minus) = forms.render(&layout.names);
    Ok(PipelineReport {
        pair: pair.to_json(),
        coordinates: layout.names.clone(),
        l_plus,
        l_minus,
        orders: orders.iter().map(|o| o.iter().map(|&i| labels[i].to_string()).collect()).collect(),
        steps,
        kernel: kernel.to_string(),
        result: result.to_json(),
        on_a_pi: on_a_pi.to_json(),
        cl: cl.to_string(),
        order_independent,
        matches_cl,
        result_mero: result,
        on_a_pi_mero: on_a_pi,
    })
}

/// A Weyl element (w_n, w_{n+1}).
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GPerm {
    pub n: Perm,
    pub np1: Perm,
}

impl GPerm {
    pub fn side(&self, s: Side) -> &Perm {
        match s {
            Side::N => &self.n,
            Side::Np1 => &self.np1,
        }
    }

    pub fn compose(&self, o: &GPerm) -> GPerm {
        GPerm { n: self.n.compose(&o.n), np1: self.np1.compose(&o.np1) }
    }

    pub fn inverse(&self) -> GPerm {
        GPerm { n: self.n.inverse(), np1: self.np1.inverse() }
    }
}

/// A parabolic (P_n, P_{n+1}) of G given by its two sides.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GPar {
    pub n: BlockParabolic,
    pub np1: BlockParabolic,
}

impl GPar {
    pub fn side(&self, s: Side) -> &BlockParabolic {
        match s {
            Side::N => &self.n,
            Side::Np1 => &self.np1,
        }
    }

    pub fn of_rs(p: &RSParabolic) -> GPar {
        GPar { n: p.p_n(), np1: p.p_np1.clone() }
    }

    pub fn conjugate(&self, w: &GPerm) -> Result<GPar, WeylError> {
        Ok(GPar { n: conjugate(&w.n, &self.n)?, np1: conjugate(&w.np1, &self.np1)? })
    }

    /// Equality of Levi factors, i.e. of the standard parabolics w.P.
    pub fn same_levi(&self, o: &GPar) -> bool {
        self.n.levi() == o.n.levi() && self.np1.levi() == o.np1.levi()
    }

    pub fn contains(&self, o: &GPar) -> bool {
        self.n.contains(&o.n) && self.np1.contains(&o.np1)
    }

    fn from_sizes(n: &[usize], np1: &[usize]) -> GPar {
        GPar { n: BlockParabolic::standard(&Composition::from_sizes(n)), np1: BlockParabolic::standard(&Composition::from_sizes(np1)) }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ResidueWeylData {
    /// Cell-level permutations.
    pub w1_cells: GPerm,
    pub w2_cells: GPerm,
    pub w_star_pi_n_cells: GPerm,
    pub w_star_pi_np1_cells: GPerm,
    /// Coordinate-level permutations.
    pub w1: GPerm,
    pub w2: GPerm,
    pub w_plus: GPerm,
    pub w_star_n: GPerm,
    pub w_star_np1: GPerm,
    pub p_pi: GPar,
    pub q_pi: GPar,
    pub p: GPar,
    pub p_res: RSParabolic,
    pub p_plus: RSParabolic,
    pub p_plus_pi: GPar,
    pub q_plus_pi: GPar,
}

impl ResidueWeylData {
    /// w*_m for m = n (`Side::N`) or m = n+1.
    pub fn w_star(&self, m: Side) -> &GPerm {
        match m {
            Side::N => &self.w_star_n,
            Side::Np1 => &self.w_star_np1,
        }
    }
}

/// The cycle (s, e, e−1, ..., s+1), 1-based, in S(m).
fn corner_cycle(m: usize, s: usize, e: usize) -> Perm {
    let mut c = vec![s];
    c.extend((s + 1..=e).rev());
    Perm::from_cycle(m, &c)
}

/// Product c_k ⋯ c_1 of cycles with c_1 applied first.
fn cycle_product(m: usize, starts: impl Iterator<Item = usize>, e: usize) -> Perm {
    starts.fold(Perm::identity(m), |acc, s| corner_cycle(m, s, e).compose(&acc))
}

fn reversal(layout: &Layout, side: Side) -> Perm {
    let m = layout.side_cells(side).len();
    let mut img: Vec<usize> = (0..m).collect();
    for r in layout.speh_blocks(side) {
        for p in r.clone() {
            img[p] = r.start + r.end - 1 - p;
        }
    }
    Perm(img)
}

pub fn residue_weyl_data(pair: &InducingPair, reg: &AtomRegistry) -> Result<ResidueWeylData, RelError> {
    let layout = Layout::new(pair, reg);
    let (m1, m2, big_d, k) = (pair.m1(), pair.m2(), pair.big_d(), pair.k());
    let (mn, mnp1) = (big_d + m1, big_d + m2);
    ensure(layout.n_cells == mn && layout.nvars() - layout.n_cells == mnp1, || "cell counts".into())?;
    let d1m = pair.d1_le(m1);

    let w1_cells = GPerm {
        n: cycle_product(mn, (1..=m1).map(|i| pair.d1_le(i - 1) + 1), mn),
        np1: cycle_product(mnp1, (1..=m2).map(|i| d1m + pair.d2_le(i) + 1), mnp1),
    };
    let w2_cells = GPerm {
        n: cycle_product(mn, (1..=m1).map(|i| pair.d1_le(i) + 1), mn),
        np1: cycle_product(mnp1, (1..=m2).map(|i| d1m + pair.d2_le(i - 1) + 1), mnp1),
    };
    let w_star_pi_n_cells = GPerm { n: reversal(&layout, Side::N), np1: Perm::identity(mnp1) };
    let w_star_pi_np1_cells = GPerm { n: Perm::identity(mn), np1: reversal(&layout, Side::Np1) };
    let coords = |g: &GPerm| GPerm { n: layout.to_coords(Side::N, &g.n), np1: layout.to_coords(Side::Np1, &g.np1) };
    let w1 = coords(&w1_cells);
    let w2 = coords(&w2_cells);
    let w_star_n = coords(&w2_cells.compose(&w_star_pi_n_cells));
    let w_star_np1 = coords(&w1_cells.compose(&w_star_pi_np1_cells));
    let w_plus = GPerm { n: w2.n.clone(), np1: w1.np1.clone() };

    let p_pi = GPar { n: layout.p_pi(Side::N), np1: layout.p_pi(Side::Np1) };
    let r1: Vec<usize> = pair.family1.iter().map(|e| e.r).collect();
    let r2: Vec<usize> = pair.family2.iter().map(|e| e.r).collect();
    let rests = |f: &[FamilyEntry]| -> Vec<usize> { f.iter().flat_map(|e| std::iter::repeat(e.r).take(e.d - 1)).collect() };
    let rest_blocks = |f: &[FamilyEntry]| -> Vec<usize> { f.iter().map(|e| (e.d - 1) * e.r).collect() };

    // the Levi of w_1.P_π, cell by cell
    let levi_n: Vec<usize> = [rests(&pair.family1), rests(&pair.family2), r1.clone()].concat();
    let levi_np1: Vec<usize> = [rests(&pair.family1), rests(&pair.family2), r2.clone()].concat();
    let q_pi = GPar::from_sizes(&levi_n, &levi_np1);
    ensure(p_pi.conjugate(&w1)?.same_levi(&q_pi), || "w1.P_pi differs from the expected Levi".into())?;
    ensure(p_pi.conjugate(&w2)?.same_levi(&q_pi), || "w2.P_pi differs from the expected Levi".into())?;
    ensure(p_pi.conjugate(&w_star_n)?.same_levi(&p_pi.conjugate(&w_star_np1)?), || "w1 w*_{pi,n+1}.P_pi != w2 w*_{pi,n}.P_pi".into())?;

    let res_np1: Vec<usize> = [rests(&pair.family1), rests(&pair.family2), vec![k + 1]].concat();
    let p_res = RSParabolic::from_pair(&Composition { parts: res_np1 }, big_d + 1)?;
    ensure(p_res.is_standard(), || "P_res is not standard".into())?;
    let plus_np1 = Composition::from_sizes(&[rest_blocks(&pair.family1), rest_blocks(&pair.family2), vec![k + 1]].concat());
    let last = plus_np1.len();
    let p_plus = RSParabolic::from_pair(&plus_np1, last)?;
    ensure(p_res.is_contained_in(&p_plus), || "P_res is not contained in P_+".into())?;
    let res_g = GPar::of_rs(&p_res);
    ensure(res_g.contains(&q_pi), || "Q_pi is not contained in P_res".into())?;

    let p = GPar::from_sizes(
        &[pair.family1.iter().map(|e| e.d * e.r).collect::<Vec<_>>(), rest_blocks(&pair.family2)].concat(),
        &[rest_blocks(&pair.family1), pair.family2.iter().map(|e| e.d * e.r).collect::<Vec<_>>()].concat(),
    );
    let p_plus_pi = GPar::from_sizes(
        &[pair.family1.iter().flat_map(|e| [(e.d - 1) * e.r, e.r]).collect::<Vec<_>>(), rest_blocks(&pair.family2)].concat(),
        &[rest_blocks(&pair.family1), pair.family2.iter().flat_map(|e| [(e.d - 1) * e.r, e.r]).collect::<Vec<_>>()].concat(),
    );
    let q_plus_pi = GPar::from_sizes(
        &[rest_blocks(&pair.family1), rest_blocks(&pair.family2), r1].concat(),
        &[rest_blocks(&pair.family1), rest_blocks(&pair.family2), r2].concat(),
    );
    ensure(p.contains(&p_plus_pi) && p_plus_pi.contains(&p_pi), || "P_pi ⊂ P_{+,pi} ⊂ P fails".into())?;
    ensure(p_plus_pi.conjugate(&w_plus)?.same_levi(&q_plus_pi), || "w_+.P_{+,pi} differs from Q_{+,pi}".into())?;
    let plus_g = GPar::of_rs(&p_plus);
    for s in [Side::N, Side::Np1] {
        let w = w_plus.side(s);
        ensure(is_coset_rep(w, p.side(s), plus_g.side(s)), || format!("w_+ is not in _(P_+)W_P on the {s:?} side"))?;
        let (pw, _) = relative_parabolics(w, p.side(s), plus_g.side(s))?;
        ensure(pw == *p_plus_pi.side(s), || format!("P_(+,w_+) != P_(+,pi) on the {s:?} side"))?;
        for ws in [&w_star_n, &w_star_np1] {
            let w = ws.side(s);
            ensure(is_coset_rep(w, p_pi.side(s), res_g.side(s)), || format!("w* is not in _(P_res)W_(P_pi) on the {s:?} side"))?;
            let (pw, _) = relative_parabolics(w, p_pi.side(s), res_g.side(s))?;
            ensure(pw == *p_pi.side(s), || format!("w* is not in W(P_pi; P_res) on the {s:?} side"))?;
        }
    }
    Ok(ResidueWeylData {
        w1_cells,
        w2_cells,
        w_star_pi_n_cells,
        w_star_pi_np1_cells,
        w1,
        w2,
        w_plus,
        w_star_n,
        w_star_np1,
        p_pi,
        q_pi,
        p,
        p_res,
        p_plus,
        p_plus_pi,
        q_plus_pi,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct RootClass {
    pub root: (String, String),
    pub on_h_plus: String,
    pub on_intersection: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Sigma1Report {
    pub first: Vec<RootClass>,
    pub sigma1: Vec<(String, String)>,
    pub second: Vec<RootClass>,
    pub sigma1_prime: Vec<(String, String)>,
    pub samples: usize,
    pub first_identity: bool,
    pub second_identity: bool,
}

fn rand_q<R: Rng>(rng: &mut R) -> Q {
    Q::new(rng.gen_range(-60i64..=60).into(), rng.gen_range(1i64..=17).into())
}

/// Classifies the roots of one bullet, returning the forms ⟨·,α∨⟩ − 1 over Σ_1.
fn classify(
    layout: &Layout,
    roots: &[(usize, usize)],
    form_of: &dyn Fn(usize, usize) -> AffineForm,
    h_plus: &AffineSubspace,
    both: &AffineSubspace,
) -> Result<(Vec<RootClass>, Vec<(String, String)>, Vec<AffineForm>), RelError> {
    let mut classes = Vec::new();
    let mut sigma = Vec::new();
    let mut factors = Vec::new();
    for &(a, b) in roots {
        let f = form_of(a, b);
        let name = (layout.names[a].clone(), layout.names[b].clone());
        let on_plus = h_plus.reduce(&f);
        ensure(!on_plus.linear_is_zero(), || format!("<λ, α∨> constant on H+ for α = {name:?}"))?;
        let on_both = both.reduce(&f);
        let desc = if on_both.linear_is_zero() {
            let c = &on_both.constant;
            ensure(c.is_integer() && c.is_positive(), || format!("<λ, α∨> = {} on H+ ∩ H- for α = {name:?}", rat::fmt_q(c)))?;
            if c.is_one() {
                sigma.push(name.clone());
                factors.push(f.plus_const(&-Q::one()));
            }
            rat::fmt_q(c)
        } else {
            "nonconstant".to_string()
        };
        classes.push(RootClass { root: name, on_h_plus: "nonconstant".into(), on_intersection: desc });
    }
    Ok((classes, sigma, factors))
}

/// Checks both product identities of the Σ_1 lemma at random rational points of H_+.
pub fn sigma1_products_check<R: Rng>(pair: &InducingPair, reg: &AtomRegistry, samples: usize, rng: &mut R) -> Result<Sigma1Report, RelError> {
    let layout = Layout::new(pair, reg);
    let forms = singular_forms(pair, &layout);
    let wd = residue_weyl_data(pair, reg)?;
    let nv = layout.nvars();
    let h_plus = AffineSubspace::from_forms(nv, &forms.plus.iter().map(|f| f.form.clone()).collect::<Vec<_>>())?;
    let both = AffineSubspace::from_forms(nv, &forms.all())?;
    let off = |s: Side| if s == Side::N { 0 } else { layout.n_cells };

    // roots of Σ_{P_π} as pairs of variables (a, b), a before b on the same side
    let side_roots = |s: Side, w: &Perm| -> Vec<(usize, usize)> {
        let m = layout.side_cells(s).len();
        let mut v = Vec::new();
        for a in 0..m {
            for b in a + 1..m {
                if w.apply(a) > w.apply(b) {
                    v.push((off(s) + a, off(s) + b));
                }
            }
        }
        v
    };
    let roots1 = [side_roots(Side::N, &wd.w_star_pi_np1_cells.n), side_roots(Side::Np1, &wd.w_star_pi_np1_cells.np1)].concat();
    let plain = |a: usize, b: usize| AffineForm::var(nv, a).sub(&AffineForm::var(nv, b));
    let (first, sigma1, f1) = classify(&layout, &roots1, &plain, &h_plus, &both)?;

    // (w λ)_{w(c)} = λ_c, so (w λ)_a = λ_{w⁻¹(a)}
    let winv = wd.w_star_pi_np1_cells.inverse();
    let moved = |a: usize| -> usize {
        if a < layout.n_cells {
            winv.n.apply(a)
        } else {
            layout.n_cells + winv.np1.apply(a - layout.n_cells)
        }
    };
    let roots2 = [side_roots(Side::N, &wd.w1_cells.n), side_roots(Side::Np1, &wd.w1_cells.np1)].concat();
    let twisted = |a: usize, b: usize| AffineForm::var(nv, moved(a)).sub(&AffineForm::var(nv, moved(b)));
    let (second, sigma1_prime, f2) = classify(&layout, &roots2, &twisted, &h_plus, &both)?;

    let last_minus: Vec<AffineForm> = pair
        .family1
        .iter()
        .enumerate()
        .filter(|(_, e)| e.d >= 2)
        .map(|(i, e)| forms.get(FormLabel { plus: false, family: 1, i: i + 1, j: e.d - 1 }).clone())
        .collect();
    let all_minus: Vec<AffineForm> = forms.minus.iter().map(|f| f.form.clone()).collect();
    let prod = |fs: &[AffineForm], x: &[Q]| fs.iter().fold(Q::one(), |acc, f| acc * f.eval(x));
    let mut first_identity = true;
    let mut second_identity = true;
    let free = h_plus.dim();
    for _ in 0..samples {
        let pt: Vec<Q> = (0..free).map(|_| rand_q(rng)).collect();
        let x = h_plus.point(&pt);
        let lm = prod(&last_minus, &x);
        first_identity &= prod(&f1, &x) * &lm == prod(&all_minus, &x);
        second_identity &= prod(&f2, &x) == lm;
    }
    Ok(Sigma1Report { first, sigma1, second, sigma1_prime, samples, first_identity, second_identity })
}

/// −ν_π pairs positively with every simple root inside each Speh block.
pub fn minus_nu_dominant(layout: &Layout) -> bool {
    let nu = nu_pi(layout);
    [Side::N, Side::Np1].iter().all(|&s| {
        let off = if s == Side::N { 0 } else { layout.n_cells };
        layout.speh_blocks(s).into_iter().all(|r| r.clone().skip(1).all(|p| -&nu[off + p - 1] + &nu[off + p] > Q::zero()))
    })
}

/// A random valid pair with n ≤ max_n, atoms drawn from the global atoms of `reg`.
pub fn random_pair<R: Rng>(reg: &AtomRegistry, max_n: usize, rng: &mut R) -> InducingPair {
    let ranks: Vec<usize> = (1..=2).filter(|&r| !reg.ids_of_rank(r, Scope::Global).is_empty()).collect();
    assert!(ranks.contains(&1), "registry needs a global rank-1 atom");
    let pick = |rng: &mut R, r: usize, d_max: usize| {
        let ids = reg.ids_of_rank(r, Scope::Global);
        let id = ids.choose(rng).expect("nonempty").clone();
        FamilyEntry { r, d: rng.gen_range(1..=d_max), atom: reg.resolve(&AtomRef::new(&id)) }
    };
    loop {
        let m1 = rng.gen_range(0..=2);
        let f1: Vec<FamilyEntry> = (0..m1).map(|_| {
            let r = *ranks.choose(rng).unwrap();
            pick(rng, r, 3)
        }).collect();
        let k: usize = f1.iter().map(|e| e.r).sum();
        // split k+1 into family-2 ranks
        let mut left = k + 1;
        let mut f2 = Vec::new();
        while left > 0 {
            let r = if left >= 2 && ranks.contains(&2) && rng.gen_bool(0.3) { 2 } else { 1 };
            f2.push(pick(rng, r, 3));
            left -= r;
        }
        if let Ok(p) = InducingPair::new(f1, f2, reg) {
            if p.n() <= max_n {
                return p;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::qf;
    use num::complex::Complex64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gl1gl2(reg: &AtomRegistry) -> InducingPair {
        InducingPair::from_json(r#"{"family1": [], "family2": [{"r":1,"d":2,"atom":"1"}]}"#, reg).unwrap()
    }

    fn reg3() -> AtomRegistry {
        AtomRegistry::from_json(
            r#"{"atoms":[{"id":"1","rank":1},{"id":"s","rank":1},{"id":"c1","rank":1},{"id":"c2","rank":1},{"id":"p","rank":2}],
                "dual_pairs":[["1","1"],["p","p"]]}"#,
        )
        .unwrap()
    }

    fn gl2gl3(reg: &AtomRegistry) -> InducingPair {
        InducingPair::from_json(
            r#"{"family1":[{"r":1,"d":2,"atom":"s"}],"family2":[{"r":1,"d":1,"atom":"c1"},{"r":1,"d":1,"atom":"c2"}]}"#,
            reg,
        )
        .unwrap()
    }

    #[test]
    fn validation() {
        let reg = reg3();
        let p = gl1gl2(&reg);
        assert_eq!((p.n(), p.k()), (1, 0));
        let p = gl2gl3(&reg);
        assert_eq!((p.n(), p.k()), (2, 1));
        let bad = InducingPair::from_json(r#"{"family1":[{"r":1,"d":2,"atom":"s"}],"family2":[{"r":1,"d":2,"atom":"c1"}]}"#, &reg);
        assert!(matches!(bad, Err(RelError::KIdentity(1, 0))));
        let bad = InducingPair::from_json(r#"{"family1":[],"family2":[{"r":1,"d":2,"atom":"p"}]}"#, &reg);
        assert!(matches!(bad, Err(RelError::Invalid(_))));
        let bad = InducingPair::from_json(r#"{"family2":[{"r":1,"d":2}], "n": 3}"#, &reg);
        assert!(matches!(bad, Err(RelError::Dimension(_))));
    }

    #[test]
    fn gl1gl2_forms_and_line() {
        let reg = AtomRegistry::trivial();
        let p = gl1gl2(&reg);
        let l = Layout::new(&p, &reg);
        assert_eq!(l.names, ["a", "b", "c"]);
        let f = singular_forms(&p, &l);
        assert_eq!(f.render(&l.names), (vec!["-(a+c+1/2)".to_string()], vec!["a+b-1/2".to_string()]));
        let (space, rep) = intersection_check(&p, &l, &f).unwrap();
        assert_eq!(space.dim(), 1);
        assert_eq!(rep.parametrization, ["a = -(y1)", "b = y1+1/2", "c = y1-1/2"]);
        assert!(space.contains_point(&[qf(-1, 3), qf(5, 6), qf(-1, 6)]));
        assert!(minus_nu_dominant(&l));
    }

    #[test]
    fn gl1gl2_pipeline() {
        let reg = AtomRegistry::trivial();
        let p = gl1gl2(&reg);
        let r = global_residue_pipeline(&p, &reg, &[vec![1, 0]]).unwrap();
        assert!(r.order_independent && r.matches_cl);
        assert!(r.result_mero.to_string().starts_with("-1·Res*(1×1, 0)·Res*(1×1, 1) / ξ(2)"));
        let v = r.on_a_pi_mero.evaluate(&[Complex64::new(0.2, 0.0)], &Default::default()).unwrap();
        assert!((v.re - 6.0 / std::f64::consts::PI).abs() < 1e-10);
        assert_eq!(r.cl, "1");
    }

    #[test]
    fn gl2gl3_pipeline_and_cl() {
        let reg = reg3();
        let p = gl2gl3(&reg);
        let cl = cl_quotient(&p, &reg).unwrap();
        assert_eq!(cl.to_string(), "L(x1+y1+1, c1×s)·L(x1+y2+1, c2×s) / L(y1-y2+1, c1×c2∨)");
        let l = Layout::new(&p, &reg);
        let f = singular_forms(&p, &l);
        assert_eq!((f.plus.len(), f.minus.len()), (1, 1));
        let (space, _) = intersection_check(&p, &l, &f).unwrap();
        assert_eq!(space.dim(), l.nvars() - 2);
        let r = global_residue_pipeline(&p, &reg, &[vec![1, 0]]).unwrap();
        assert!(r.order_independent, "{}", r.result_mero);
        assert!(r.matches_cl, "{} vs {}", r.on_a_pi_mero, r.cl);
    }

    #[test]
    fn tempered_is_identity() {
        let reg = reg3();
        let p = InducingPair::from_json(r#"{"family1":[{"r":1,"d":1,"atom":"s"}],"family2":[{"r":1,"d":1,"atom":"c1"},{"r":1,"d":1,"atom":"c2"}]}"#, &reg).unwrap();
        let l = Layout::new(&p, &reg);
        let f = singular_forms(&p, &l);
        assert!(f.is_empty());
        let r = global_residue_pipeline(&p, &reg, &[]).unwrap();
        assert_eq!(r.result_mero, global_kernel(&l, &reg).unwrap());
        assert!(r.matches_cl);
        let s = sigma1_products_check(&p, &reg, 3, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!(s.sigma1.is_empty() && s.first_identity && s.second_identity);
    }

    #[test]
    fn cl_star_classification() {
        let reg = reg3();
        let p = gl1gl2(&reg);
        let c = cl_star(&p, &reg).unwrap();
        assert!(c.numerator.is_empty() && c.denominator.is_empty());
        // σ_{1,1} = σ_{2,1}∨: shift 1 is the edge pole, shift 3/2 is zero-free
        let p = InducingPair::from_json(r#"{"family1":[{"r":1,"d":2,"atom":"1"}],"family2":[{"r":1,"d":1,"atom":"1"},{"r":1,"d":1,"atom":"s"}]}"#, &reg).unwrap();
        let c = cl_star(&p, &reg).unwrap();
        assert_eq!((c.numerator[0].status.clone(), c.numerator[0].point.clone()), (FactorStatus::Residue, q(1)));
        assert!(c.criterion.is_empty() && c.pole_order == 1);
        let p = InducingPair::from_json(r#"{"family1":[{"r":1,"d":3,"atom":"1"}],"family2":[{"r":1,"d":1,"atom":"1"},{"r":1,"d":1,"atom":"s"}]}"#, &reg).unwrap();
        let c = cl_star(&p, &reg).unwrap();
        assert_eq!((c.numerator[0].status.clone(), c.numerator[0].point.clone()), (FactorStatus::Nonzero, qf(3, 2)));
        let p = InducingPair::from_json(r#"{"family1":[{"r":1,"d":1,"atom":"1"}],"family2":[{"r":1,"d":1,"atom":"1"},{"r":1,"d":1,"atom":"s"}]}"#, &reg).unwrap();
        let c = cl_star(&p, &reg).unwrap();
        assert_eq!(c.criterion, ["L(1/2, 1×1) ≠ 0", "L(1/2, 1×s) ≠ 0"]);
    }

    #[test]
    fn weyl_data_gl1gl2() {
        let reg = AtomRegistry::trivial();
        let p = gl1gl2(&reg);
        let w = residue_weyl_data(&p, &reg).unwrap();
        assert!(w.w1.n.is_identity() && w.w1.np1.is_identity());
        assert_eq!(w.w2.np1, Perm(vec![1, 0]));
        assert_eq!(w.w_star_np1.np1, Perm(vec![1, 0]));
        assert_eq!(w.w_star_n.np1, Perm(vec![1, 0]));
        assert_eq!(w.p_res.p_std_np1.parts, vec![1, 1]);
        assert_eq!(w.p_plus.p_std_np1.parts, vec![1, 1]);
    }

    #[test]
    fn cycle_shape() {
        // m1 = 1 with d(1,1) = 3 and m2 = 1 with d(2,1) = 1: n = 3, n+1 = 3
        let reg = AtomRegistry::trivial();
        let p = InducingPair::from_json(r#"{"family1":[{"r":1,"d":3}],"family2":[{"r":1,"d":1},{"r":1,"d":1}]}"#, &reg).unwrap();
        assert_eq!(p.n(), 3);
        let w = residue_weyl_data(&p, &reg).unwrap();
        // first cell goes to the end
        assert_eq!(w.w1_cells.n, Perm::from_cycle(3, &[1, 3, 2]));
        assert_eq!(w.w1_cells.n.images_1based(), [3, 1, 2]);
        assert_eq!(w.q_pi.n.sizes(), vec![1, 1, 1]);
    }

    #[test]
    fn sigma1_gl2gl3() {
        let reg = reg3();
        let p = gl2gl3(&reg);
        let s = sigma1_products_check(&p, &reg, 10, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert!(s.first.is_empty());
        assert_eq!(s.sigma1_prime, [("a".to_string(), "b".to_string())]);
        assert!(s.first_identity && s.second_identity);
        let p = gl1gl2(&AtomRegistry::trivial());
        let s = sigma1_products_check(&p, &AtomRegistry::trivial(), 10, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(s.sigma1.len(), 1);
        assert!(s.second.is_empty() && s.first_identity && s.second_identity);
    }

    #[test]
    fn random_pairs_everything() {
        let reg = reg3();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..12 {
            let p = random_pair(&reg, 6, &mut rng);
            let l = Layout::new(&p, &reg);
            let f = singular_forms(&p, &l);
            intersection_check(&p, &l, &f).unwrap();
            assert!(minus_nu_dominant(&l));
            let extra: Vec<Vec<usize>> = (0..3).map(|_| random_order(&f, &mut rng)).collect();
            let r = global_residue_pipeline(&p, &reg, &extra).unwrap();
            assert!(r.order_independent, "{}", serde_json::to_string(&p.to_json()).unwrap());
            assert!(r.matches_cl, "{:?}: {} vs {}", p.to_json(), r.on_a_pi_mero.modulo_units(), r.cl);
            let s = sigma1_products_check(&p, &reg, 5, &mut rng).unwrap();
            assert!(s.first_identity && s.second_identity, "{:?}", p.to_json());
        }
    }

    #[test]
    fn w_delta_symmetry() {
        let reg = reg3();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut checked = 0;
        while checked < 8 {
            let p = random_pair(&reg, 6, &mut rng);
            if p.m1() < 2 && p.m2() < 2 {
                continue;
            }
            let rev = |m: usize| Perm((0..m).rev().collect());
            let q = p.permuted(&rev(p.m1()), &rev(p.m2()));
            let (a, b) = (cl_star(&p, &reg).unwrap(), cl_star(&q, &reg).unwrap());
            assert!(same_criterion(&a, &b, &reg));
            assert!(global_residue_pipeline(&q, &reg, &[]).unwrap().matches_cl);
            checked += 1;
        }
    }

    #[test]
    fn many_random_pairs() {
        let reg = reg3();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..100 {
            let p = random_pair(&reg, 6, &mut rng);
            let l = Layout::new(&p, &reg);
            let f = singular_forms(&p, &l);
            intersection_check(&p, &l, &f).unwrap();
            let extra: Vec<Vec<usize>> = (0..3).map(|_| random_order(&f, &mut rng)).collect();
            let r = global_residue_pipeline(&p, &reg, &extra).unwrap();
            assert!(r.order_independent && r.matches_cl, "{:?}", p.to_json());
            let s = sigma1_products_check(&p, &reg, 5, &mut rng).unwrap();
            assert!(s.first_identity && s.second_identity, "{:?}", p.to_json());
        }
    }
}
