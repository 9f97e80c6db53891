//! Formal meromorphic functions: products of L-type atoms with affine arguments on an
//! affine subspace of a named coordinate space, with exact residues along hyperplanes.

use crate::rat::{self, fmt_q, to_f64, Q};
use crate::special;
use num::complex::Complex64;
use num::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeroError {
    #[error("dimension mismatch: {0} vs {1}")]
    Dimension(usize, usize),
    #[error("the zero form does not define a hyperplane")]
    ZeroForm,
    #[error("hyperplane {0} is empty or already contains the space")]
    Degenerate(String),
    #[error("order {order} along {form} is not a simple pole")]
    Order { form: String, order: i64 },
    #[error("{form} has order {order}; restriction undefined")]
    RestrictPole { form: String, order: i64 },
    #[error("no evaluator for {0}")]
    MissingEvaluator(String),
    #[error("evaluation hits a pole of {0}")]
    Pole(String),
    #[error("residues in different orders disagree: {0} vs {1}")]
    NotCommuting(String, String),
}

/// Σ coeffs_i x_i + constant.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AffineForm {
    #[serde(serialize_with = "rat::ser_qvec", deserialize_with = "de_qvec")]
    pub coeffs: Vec<Q>,
    #[serde(serialize_with = "rat::ser_q", deserialize_with = "rat::de_q")]
    pub constant: Q,
}

fn de_qvec<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Vec<Q>, D::Error> {
    let v: Vec<serde_json::Value> = Vec::deserialize(d)?;
    v.into_iter()
        .map(|x| {
            let s = match &x {
                serde_json::Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            rat::parse_q(&s).ok_or_else(|| serde::de::Error::custom(format!("bad rational {s}")))
        })
        .collect()
}

impl AffineForm {
    pub fn new(coeffs: Vec<Q>, constant: Q) -> Self {
        AffineForm { coeffs, constant }
    }

    pub fn zero(n: usize) -> Self {
        AffineForm { coeffs: rat::zeros(n), constant: Q::zero() }
    }

    pub fn constant(n: usize, c: Q) -> Self {
        AffineForm { coeffs: rat::zeros(n), constant: c }
    }

    pub fn var(n: usize, i: usize) -> Self {
        let mut f = Self::zero(n);
        f.coeffs[i] = Q::one();
        f
    }

    pub fn nvars(&self) -> usize {
        self.coeffs.len()
    }

    pub fn add(&self, o: &AffineForm) -> Self {
        AffineForm { coeffs: rat::add(&self.coeffs, &o.coeffs), constant: &self.constant + &o.constant }
    }

    pub fn sub(&self, o: &AffineForm) -> Self {
        AffineForm { coeffs: rat::sub(&self.coeffs, &o.coeffs), constant: &self.constant - &o.constant }
    }

    pub fn scale(&self, c: &Q) -> Self {
        AffineForm { coeffs: rat::scale(&self.coeffs, c), constant: &self.constant * c }
    }

    pub fn neg(&self) -> Self {
        self.scale(&-Q::one())
    }

    pub fn plus_const(&self, c: &Q) -> Self {
        AffineForm { coeffs: self.coeffs.clone(), constant: &self.constant + c }
    }

    pub fn linear_is_zero(&self) -> bool {
        rat::is_zero_vec(&self.coeffs)
    }

    pub fn is_zero(&self) -> bool {
        self.linear_is_zero() && self.constant.is_zero()
    }

    pub fn eval(&self, x: &[Q]) -> Q {
        rat::dot(&self.coeffs, x) + &self.constant
    }

    pub fn eval_c(&self, x: &[Complex64]) -> Complex64 {
        self.coeffs.iter().zip(x).map(|(a, v)| v * to_f64(a)).sum::<Complex64>() + to_f64(&self.constant)
    }

    /// Pulls back along x = map(y), where map[i] gives x_i as an affine form in y.
    pub fn pullback(&self, map: &[AffineForm]) -> AffineForm {
        let m = map.first().map_or(0, |f| f.nvars());
        self.coeffs
            .iter()
            .zip(map)
            .fold(AffineForm::constant(m, self.constant.clone()), |acc, (c, f)| acc.add(&f.scale(c)))
    }

    pub fn first_nonzero(&self) -> Option<&Q> {
        self.coeffs.iter().find(|c| !c.is_zero())
    }

    /// Renders with coordinate names; a negative leading coefficient is factored out.
    pub fn render(&self, names: &[String]) -> String {
        if let Some(c) = self.first_nonzero() {
            if c.is_negative() {
                return format!("-({})", self.neg().render_plain(names));
            }
        }
        self.render_plain(names)
    }

    fn render_plain(&self, names: &[String]) -> String {
        let mut s = String::new();
        for (c, name) in self.coeffs.iter().zip(names) {
            if c.is_zero() {
                continue;
            }
            let neg = c.is_negative();
            let a = c.abs();
            if s.is_empty() {
                if neg {
                    s.push('-');
                }
            } else {
                s.push_str(if neg { "-" } else { "+" });
            }
            if !a.is_one() {
                s.push_str(&fmt_q(&a));
                s.push('*');
            }
            s.push_str(name);
        }
        if s.is_empty() {
            return fmt_q(&self.constant);
        }
        if !self.constant.is_zero() {
            s.push_str(if self.constant.is_negative() { "-" } else { "+" });
            s.push_str(&fmt_q(&self.constant.abs()));
        }
        s
    }

    /// Parses `"a+c+1/2"`, `"-(a+c+1/2)"`, `"2*b - c"` over the given names.
    pub fn parse(s: &str, names: &[String]) -> Option<AffineForm> {
        let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let n = names.len();
        if let Some(inner) = s.strip_prefix("-(").and_then(|r| r.strip_suffix(')')) {
            return Self::parse(inner, names).map(|f| f.neg());
        }
        let mut f = AffineForm::zero(n);
        let mut terms = Vec::new();
        let mut cur = String::new();
        for ch in s.chars() {
            if (ch == '+' || ch == '-') && !cur.is_empty() && !cur.ends_with('*') && !cur.ends_with('/') {
                terms.push(std::mem::take(&mut cur));
            }
            cur.push(ch);
        }
        if !cur.is_empty() {
            terms.push(cur);
        }
        for t in terms {
            let (sign, body) = match t.strip_prefix('-') {
                Some(b) => (-Q::one(), b.to_string()),
                None => (Q::one(), t.trim_start_matches('+').to_string()),
            };
            let (coef, var) = match body.split_once('*') {
                Some((c, v)) => (rat::parse_q(c)?, Some(v.to_string())),
                None => match names.iter().position(|x| *x == body) {
                    Some(_) => (Q::one(), Some(body.clone())),
                    None => (rat::parse_q(&body)?, None),
                },
            };
            match var {
                Some(v) => {
                    let i = names.iter().position(|x| *x == v)?;
                    f.coeffs[i] += sign * coef;
                }
                None => f.constant += sign * coef,
            }
        }
        Some(f)
    }
}

/// An affine subspace {x : f(x) = 0 for all rows}, rows kept in reduced echelon form.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AffineSubspace {
    pub nvars: usize,
    pub rows: Vec<AffineForm>,
    pub pivots: Vec<usize>,
}

impl AffineSubspace {
    pub fn whole(nvars: usize) -> Self {
        AffineSubspace { nvars, rows: vec![], pivots: vec![] }
    }

    pub fn from_forms(nvars: usize, forms: &[AffineForm]) -> Result<Self, MeroError> {
        let mut s = Self::whole(nvars);
        for f in forms {
            s = s.cut(f)?;
        }
        Ok(s)
    }

    pub fn dim(&self) -> usize {
        self.nvars - self.rows.len()
    }

    pub fn codim(&self) -> usize {
        self.rows.len()
    }

    /// Eliminates the pivot coordinates from f.
    pub fn reduce(&self, f: &AffineForm) -> AffineForm {
        let mut g = f.clone();
        for (r, &p) in self.rows.iter().zip(&self.pivots) {
            if !g.coeffs[p].is_zero() {
                let c = g.coeffs[p].clone();
                g = g.sub(&r.scale(&c));
            }
        }
        g
    }

    /// True when f vanishes identically on the subspace.
    pub fn contains_zero_set_of(&self, f: &AffineForm) -> bool {
        self.reduce(f).is_zero()
    }

    /// Intersection with {f = 0}; errors if empty or if f already vanishes here.
    pub fn cut(&self, f: &AffineForm) -> Result<Self, MeroError> {
        if f.nvars() != self.nvars {
            return Err(MeroError::Dimension(f.nvars(), self.nvars));
        }
        let g = self.reduce(f);
        if g.linear_is_zero() {
            return Err(MeroError::Degenerate(g.render(&default_names(self.nvars))));
        }
        let mut rows: Vec<Vec<Q>> = self
            .rows
            .iter()
            .chain(std::iter::once(&g))
            .map(|r| {
                let mut v = r.coeffs.clone();
                v.push(r.constant.clone());
                v
            })
            .collect();
        rows.sort();
        let (red, piv) = rat::rref(rows, self.nvars);
        Ok(AffineSubspace {
            nvars: self.nvars,
            rows: red
                .into_iter()
                .map(|v| AffineForm { coeffs: v[..self.nvars].to_vec(), constant: v[self.nvars].clone() })
                .collect(),
            pivots: piv,
        })
    }

    pub fn free_coords(&self) -> Vec<usize> {
        (0..self.nvars).filter(|c| !self.pivots.contains(c)).collect()
    }

    /// The point with the given values on the free coordinates.
    pub fn point(&self, free: &[Q]) -> Vec<Q> {
        let fc = self.free_coords();
        let mut x = rat::zeros(self.nvars);
        for (i, v) in fc.iter().zip(free) {
            x[*i] = v.clone();
        }
        for (r, &p) in self.rows.iter().zip(&self.pivots) {
            let mut val = r.constant.clone();
            for &i in &fc {
                val += &r.coeffs[i] * &x[i];
            }
            x[p] = -val;
        }
        x
    }

    pub fn point_c(&self, free: &[Complex64]) -> Vec<Complex64> {
        let fc = self.free_coords();
        let mut x = vec![Complex64::new(0.0, 0.0); self.nvars];
        for (i, v) in fc.iter().zip(free) {
            x[*i] = *v;
        }
        for (r, &p) in self.rows.iter().zip(&self.pivots) {
            let mut val = Complex64::new(to_f64(&r.constant), 0.0);
            for &i in &fc {
                val += x[i] * to_f64(&r.coeffs[i]);
            }
            x[p] = -val;
        }
        x
    }

    pub fn contains_point(&self, x: &[Q]) -> bool {
        self.rows.iter().all(|r| r.eval(x).is_zero())
    }
}

pub fn default_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("x{}", i + 1)).collect()
}

/// A cuspidal atom, possibly replaced by its contragredient.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AtomRef {
    pub id: String,
    #[serde(default)]
    pub dual: bool,
    /// Id of a registered atom isomorphic to the contragredient, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partner: Option<String>,
}

impl AtomRef {
    pub fn new(id: &str) -> Self {
        AtomRef { id: id.to_string(), dual: false, partner: None }
    }

    pub fn self_dual(id: &str) -> Self {
        AtomRef { id: id.to_string(), dual: false, partner: Some(id.to_string()) }
    }

    pub fn with_partner(id: &str, partner: &str) -> Self {
        AtomRef { id: id.to_string(), dual: false, partner: Some(partner.to_string()) }
    }

    pub fn contragredient(&self) -> Self {
        match &self.partner {
            Some(p) => AtomRef { id: p.clone(), dual: false, partner: Some(self.id.clone()) },
            None => AtomRef { id: self.id.clone(), dual: !self.dual, partner: None },
        }
    }
}

impl fmt::Display for AtomRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.dual {
            write!(f, "{}∨", self.id)
        } else {
            write!(f, "{}", self.id)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum AtomKind {
    /// Completed L(s, x × y); `dual` marks y ≅ x∨, which gives simple poles at s = 0, 1.
    GlobalRS { x: AtomRef, y: AtomRef, dual: bool },
    /// ζ_q(s) = (1 − q^{−s})^{−1}.
    LocalZeta,
    /// Opaque regular nowhere-vanishing factor.
    Epsilon(String),
    /// Residue of the completed L(s, x × y) at s = point.
    Residue { x: AtomRef, y: AtomRef, point: u8 },
    /// Res_{s=0} ζ_q(s) = 1/log q.
    LocalResidue,
}

impl AtomKind {
    pub fn global(x: &AtomRef, y: &AtomRef, dual: bool) -> Self {
        let (x, y) = if x <= y { (x.clone(), y.clone()) } else { (y.clone(), x.clone()) };
        AtomKind::GlobalRS { x, y, dual }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Atom {
    pub kind: AtomKind,
    pub arg: AffineForm,
}

/// How an atom behaves along a hyperplane H.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Behaviour {
    /// Not constant on H: regular and not identically zero there.
    Generic,
    /// Simple pole on H with argument − point = c·Λ.
    Pole { c: Q, point: Q },
    /// Constant on H with a value known to be finite and nonzero.
    Unit,
    /// Constant on H, finite, but possibly zero (central strip of a global L).
    Undecided,
}

impl Atom {
    /// Behaviour along {Λ = 0}; `arg` and `lam` already reduced by the ambient space.
    pub fn behaviour(&self, arg: &AffineForm, lam: &AffineForm) -> Behaviour {
        match &self.kind {
            AtomKind::Epsilon(_) | AtomKind::Residue { .. } | AtomKind::LocalResidue => return Behaviour::Unit,
            _ => {}
        }
        let Some((c, point)) = proportional(arg, lam) else { return Behaviour::Generic };
        match &self.kind {
            AtomKind::LocalZeta => {
                if point.is_zero() {
                    Behaviour::Pole { c, point }
                } else {
                    Behaviour::Unit
                }
            }
            AtomKind::GlobalRS { dual, .. } => {
                let is_edge = point.is_zero() || point.is_one();
                if is_edge && *dual {
                    Behaviour::Pole { c, point }
                } else if is_edge || point > Q::one() || point.is_negative() {
                    Behaviour::Unit
                } else {
                    Behaviour::Undecided
                }
            }
            _ => unreachable!(),
        }
    }

    pub fn render(&self, names: &[String]) -> String {
        let a = self.arg.render(names);
        match &self.kind {
            AtomKind::GlobalRS { x, y, .. } => {
                if x.id == "1" && y.id == "1" {
                    format!("ξ({a})")
                } else {
                    format!("L({a}, {x}×{y})")
                }
            }
            AtomKind::LocalZeta => format!("ζ_q({a})"),
            AtomKind::Epsilon(l) => format!("ε[{l}]({a})"),
            AtomKind::Residue { x, y, point } => format!("Res*({x}×{y}, {point})"),
            AtomKind::LocalResidue => "(1/log q)".to_string(),
        }
    }
}

/// If arg − p = c·lam with c ≠ 0, returns (c, p).
fn proportional(arg: &AffineForm, lam: &AffineForm) -> Option<(Q, Q)> {
    let piv = lam.coeffs.iter().position(|x| !x.is_zero())?;
    let c = &arg.coeffs[piv] / &lam.coeffs[piv];
    if c.is_zero() {
        return None;
    }
    let rest = arg.sub(&lam.scale(&c));
    if !rest.linear_is_zero() {
        return None;
    }
    Some((c, rest.constant))
}

/// Divisor data of F along a hyperplane.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Divisor {
    /// Pole order (negative for a zero).
    pub order: i64,
    /// Atoms whose value on H is an undecided constant.
    pub undecided: usize,
}

/// Evaluators for the numeric backend.
#[derive(Clone, Debug)]
pub struct EvalTable {
    /// Residue field size for local zeta factors.
    pub q: Option<f64>,
    /// Value assigned to ε-units; None leaves them unevaluable.
    pub epsilon: Option<Complex64>,
}

impl Default for EvalTable {
    fn default() -> Self {
        EvalTable { q: None, epsilon: None }
    }
}

/// prefactor · ∏ atom^{exponent} on an affine subspace of a named coordinate space.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FormalMero {
    pub names: Vec<String>,
    pub space: AffineSubspace,
    pub prefactor: Q,
    pub atoms: BTreeMap<Atom, i64>,
}

impl FormalMero {
    pub fn one(names: &[String]) -> Self {
        FormalMero {
            names: names.to_vec(),
            space: AffineSubspace::whole(names.len()),
            prefactor: Q::one(),
            atoms: BTreeMap::new(),
        }
    }

    pub fn constant(names: &[String], c: Q) -> Self {
        let mut f = Self::one(names);
        f.prefactor = c;
        f.normalize();
        f
    }

    pub fn atom(names: &[String], kind: AtomKind, arg: AffineForm, exponent: i64) -> Self {
        let mut f = Self::one(names);
        f.push(kind, arg, exponent);
        f
    }

    pub fn nvars(&self) -> usize {
        self.names.len()
    }

    pub fn is_zero(&self) -> bool {
        self.prefactor.is_zero()
    }

    /// Multiplies in atom^exponent.
    pub fn push(&mut self, kind: AtomKind, arg: AffineForm, exponent: i64) {
        let arg = match kind {
            AtomKind::Residue { .. } | AtomKind::LocalResidue => AffineForm::zero(self.nvars()),
            _ => self.space.reduce(&arg),
        };
        let key = Atom { kind, arg };
        *self.atoms.entry(key).or_insert(0) += exponent;
        self.normalize();
    }

    fn normalize(&mut self) {
        self.atoms.retain(|_, e| *e != 0);
        if self.prefactor.is_zero() {
            self.atoms.clear();
        }
    }

    fn same_space(&self, o: &FormalMero) -> Result<(), MeroError> {
        if self.nvars() != o.nvars() {
            return Err(MeroError::Dimension(self.nvars(), o.nvars()));
        }
        Ok(())
    }

    /// Product; the result lives on the intersection only if both spaces agree, otherwise
    /// on `self`'s space (the caller restricts `o` first).
    pub fn mul(&self, o: &FormalMero) -> Result<FormalMero, MeroError> {
        self.same_space(o)?;
        let mut out = self.clone();
        out.prefactor = &self.prefactor * &o.prefactor;
        for (a, e) in &o.atoms {
            out.push(a.kind.clone(), a.arg.clone(), *e);
        }
        out.normalize();
        Ok(out)
    }

    pub fn pow(&self, k: i64) -> FormalMero {
        let mut out = self.clone();
        if k == 0 {
            return FormalMero { atoms: BTreeMap::new(), prefactor: Q::one(), ..self.clone() };
        }
        out.prefactor = if k > 0 {
            num::pow(self.prefactor.clone(), k as usize)
        } else {
            num::pow(self.prefactor.recip(), (-k) as usize)
        };
        for e in out.atoms.values_mut() {
            *e *= k;
        }
        out
    }

    pub fn inv(&self) -> FormalMero {
        self.pow(-1)
    }

    pub fn div(&self, o: &FormalMero) -> Result<FormalMero, MeroError> {
        self.mul(&o.inv())
    }

    pub fn scale(&self, c: &Q) -> FormalMero {
        let mut out = self.clone();
        out.prefactor *= c;
        out.normalize();
        out
    }

    /// Divisor along {Λ = 0} inside the current space.
    pub fn divisor_along(&self, lam: &AffineForm) -> Result<Divisor, MeroError> {
        let l = self.reduce_hyperplane(lam)?;
        let mut d = Divisor { order: 0, undecided: 0 };
        for (a, e) in &self.atoms {
            match a.behaviour(&a.arg, &l) {
                Behaviour::Pole { .. } => d.order += e,
                Behaviour::Undecided => d.undecided += 1,
                _ => {}
            }
        }
        Ok(d)
    }

    fn reduce_hyperplane(&self, lam: &AffineForm) -> Result<AffineForm, MeroError> {
        if lam.nvars() != self.nvars() {
            return Err(MeroError::Dimension(lam.nvars(), self.nvars()));
        }
        if lam.linear_is_zero() {
            return Err(MeroError::ZeroForm);
        }
        let l = self.space.reduce(lam);
        if l.linear_is_zero() {
            return Err(MeroError::Degenerate(lam.render(&self.names)));
        }
        Ok(l)
    }

    /// The leading coefficient of F along {Λ = 0}: returns (order, (Λ^order F)|_H).
    pub fn lead_along(&self, lam: &AffineForm) -> Result<(i64, FormalMero), MeroError> {
        let l = self.reduce_hyperplane(lam)?;
        let space = self.space.cut(&l)?;
        let mut out = FormalMero { names: self.names.clone(), space, prefactor: self.prefactor.clone(), atoms: BTreeMap::new() };
        let mut order = 0;
        let mut local_res = 0;
        for (a, e) in &self.atoms {
            match a.behaviour(&a.arg, &l) {
                Behaviour::Pole { c, point } => {
                    order += e;
                    out.prefactor *= if *e > 0 { num::pow(c.recip(), *e as usize) } else { num::pow(c, (-e) as usize) };
                    match &a.kind {
                        AtomKind::GlobalRS { x, y, .. } => {
                            let pt = if point.is_zero() { 0 } else { 1 };
                            out.push(AtomKind::Residue { x: x.clone(), y: y.clone(), point: pt }, AffineForm::zero(self.nvars()), *e);
                        }
                        AtomKind::LocalZeta => local_res += e,
                        _ => unreachable!(),
                    }
                }
                _ => out.push(a.kind.clone(), a.arg.clone(), *e),
            }
        }
        if local_res != 0 {
            out.push(AtomKind::LocalResidue, AffineForm::zero(self.nvars()), local_res);
        }
        out.normalize();
        Ok((order, out))
    }

    /// Res_Λ F = (Λ F)|_{Λ=0}.
    pub fn residue(&self, lam: &AffineForm) -> Result<FormalMero, MeroError> {
        let (order, lead) = self.lead_along(lam)?;
        match order {
            1 => Ok(lead),
            o if o <= 0 => Ok(lead.zeroed()),
            o => Err(MeroError::Order { form: lam.render(&self.names), order: o }),
        }
    }

    /// F|_{Λ=0}, defined when F has no pole there.
    pub fn restrict(&self, lam: &AffineForm) -> Result<FormalMero, MeroError> {
        let (order, lead) = self.lead_along(lam)?;
        match order {
            0 => Ok(lead),
            o if o < 0 => Ok(lead.zeroed()),
            o => Err(MeroError::RestrictPole { form: lam.render(&self.names), order: o }),
        }
    }

    fn zeroed(mut self) -> FormalMero {
        self.prefactor = Q::zero();
        self.atoms.clear();
        self
    }

    /// Iterated residue along forms[order[0]], forms[order[1]], ...
    pub fn iterated_residue(&self, forms: &[AffineForm], order: &[usize]) -> Result<FormalMero, MeroError> {
        let mut f = self.clone();
        for &i in order {
            f = f.residue(&forms[i])?;
        }
        Ok(f)
    }

    /// Computes the iterated residue in every given order and checks they coincide.
    pub fn iterated_residue_checked(&self, forms: &[AffineForm], orders: &[Vec<usize>]) -> Result<FormalMero, MeroError> {
        let mut first: Option<FormalMero> = None;
        for o in orders {
            let r = self.iterated_residue(forms, o)?;
            if let Some(f) = &first {
                if *f != r {
                    return Err(MeroError::NotCommuting(f.to_string(), r.to_string()));
                }
            } else {
                first = Some(r);
            }
        }
        Ok(first.unwrap_or_else(|| self.clone()))
    }

    /// Pulls back along a change of variables x = map(y) into the space named `names`.
    pub fn pullback(&self, names: &[String], map: &[AffineForm]) -> Result<FormalMero, MeroError> {
        if map.len() != self.nvars() {
            return Err(MeroError::Dimension(map.len(), self.nvars()));
        }
        let mut out = FormalMero::one(names);
        for r in &self.space.rows {
            let g = r.pullback(map);
            if g.linear_is_zero() {
                if !g.constant.is_zero() {
                    return Err(MeroError::Degenerate(r.render(&self.names)));
                }
                continue;
            }
            if !out.space.contains_zero_set_of(&g) {
                out.space = out.space.cut(&g)?;
            }
        }
        out.prefactor = self.prefactor.clone();
        for (a, e) in &self.atoms {
            out.push(a.kind.clone(), a.arg.pullback(map), *e);
        }
        out.normalize();
        Ok(out)
    }

    /// Representative modulo regular nowhere-vanishing factors: drops ε-units, residue
    /// symbols, the prefactor and atoms with known nonzero constant values, and orients
    /// arguments through ζ_q(−s) ~ ζ_q(s) and L(s, x×y) ~ L(1−s, x∨×y∨).
    pub fn modulo_units(&self) -> FormalMero {
        let mut out = FormalMero { prefactor: if self.is_zero() { Q::zero() } else { Q::one() }, atoms: BTreeMap::new(), ..self.clone() };
        if self.is_zero() {
            return out;
        }
        for (a, e) in &self.atoms {
            match &a.kind {
                AtomKind::Epsilon(_) | AtomKind::Residue { .. } | AtomKind::LocalResidue => {}
                AtomKind::LocalZeta => {
                    if a.arg.linear_is_zero() {
                        if a.arg.constant.is_zero() {
                            out.push(a.kind.clone(), a.arg.clone(), *e);
                        }
                        continue;
                    }
                    let arg = if a.arg.first_nonzero().unwrap().is_negative() { a.arg.neg() } else { a.arg.clone() };
                    out.push(AtomKind::LocalZeta, arg, *e);
                }
                AtomKind::GlobalRS { x, y, dual } => {
                    if a.arg.linear_is_zero() {
                        let p = &a.arg.constant;
                        let edge = p.is_zero() || p.is_one();
                        let unit = (edge && !dual) || *p > Q::one() || p.is_negative();
                        if unit {
                            continue;
                        }
                    }
                    let flip = match a.arg.first_nonzero() {
                        Some(c) => c.is_negative(),
                        None => a.arg.constant < rat::half(),
                    };
                    if flip {
                        let arg = a.arg.neg().plus_const(&Q::one());
                        out.push(AtomKind::global(&x.contragredient(), &y.contragredient(), *dual), arg, *e);
                    } else {
                        out.push(a.kind.clone(), a.arg.clone(), *e);
                    }
                }
            }
        }
        out.normalize();
        out
    }

    pub fn eq_mod_units(&self, o: &FormalMero) -> bool {
        self.modulo_units() == o.modulo_units()
    }

    /// Numeric value at a point of the ambient space (coordinates off the space are
    /// ignored after reduction of the arguments).
    pub fn evaluate(&self, point: &[Complex64], table: &EvalTable) -> Result<Complex64, MeroError> {
        if point.len() != self.nvars() {
            return Err(MeroError::Dimension(point.len(), self.nvars()));
        }
        let mut v = Complex64::new(to_f64(&self.prefactor), 0.0);
        if self.is_zero() {
            return Ok(v);
        }
        for (a, e) in &self.atoms {
            let s = a.arg.eval_c(point);
            let x = match &a.kind {
                AtomKind::GlobalRS { x, y, .. } if x.id == "1" && y.id == "1" => {
                    if s.norm() < 1e-300 || (s - 1.0).norm() < 1e-300 {
                        return Err(MeroError::Pole(a.render(&self.names)));
                    }
                    special::xi(s)
                }
                AtomKind::Residue { x, y, point } if x.id == "1" && y.id == "1" => {
                    Complex64::new(if *point == 0 { -1.0 } else { 1.0 }, 0.0)
                }
                AtomKind::LocalZeta => {
                    let q = table.q.ok_or_else(|| MeroError::MissingEvaluator("ζ_q without q".into()))?;
                    if s.norm() < 1e-300 {
                        return Err(MeroError::Pole(a.render(&self.names)));
                    }
                    special::zeta_q(q, s)
                }
                AtomKind::LocalResidue => {
                    let q = table.q.ok_or_else(|| MeroError::MissingEvaluator("1/log q without q".into()))?;
                    Complex64::new(1.0 / q.ln(), 0.0)
                }
                AtomKind::Epsilon(_) => table.epsilon.ok_or_else(|| MeroError::MissingEvaluator(a.render(&self.names)))?,
                _ => return Err(MeroError::MissingEvaluator(a.render(&self.names))),
            };
            v *= x.powi(*e as i32);
        }
        Ok(v)
    }

    /// Atoms with positive exponent (numerator) and negative (denominator) as rendered strings.
    pub fn render_parts(&self) -> (Vec<String>, Vec<String>) {
        let mut num = Vec::new();
        let mut den = Vec::new();
        for (a, e) in &self.atoms {
            let r = a.render(&self.names);
            let r = if e.abs() == 1 { r } else { format!("{r}^{}", e.abs()) };
            if *e > 0 {
                num.push(r);
            } else {
                den.push(r);
            }
        }
        (num, den)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let (num, den) = self.render_parts();
        serde_json::json!({
            "coordinates": self.names,
            "constraints": self.space.rows.iter().map(|r| format!("{} = 0", r.render(&self.names))).collect::<Vec<_>>(),
            "prefactor": fmt_q(&self.prefactor),
            "numerator": num,
            "denominator": den,
            "atoms": self.atoms.iter().map(|(a, e)| serde_json::json!({
                "kind": a.kind,
                "argument": a.arg.render(&self.names),
                "exponent": e,
            })).collect::<Vec<_>>(),
            "canonical": self.to_string(),
        })
    }
}

impl fmt::Display for FormalMero {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let (num, den) = self.render_parts();
        let mut s = String::new();
        if !self.prefactor.is_one() || num.is_empty() {
            s.push_str(&fmt_q(&self.prefactor));
        }
        for x in &num {
            if !s.is_empty() {
                s.push('·');
            }
            s.push_str(x);
        }
        if !den.is_empty() {
            s.push_str(" / ");
            s.push_str(&den.join("·"));
        }
        if !self.space.rows.is_empty() {
            let cs: Vec<String> = self.space.rows.iter().map(|r| format!("{} = 0", r.render(&self.names))).collect();
            s.push_str(&format!(" on {{{}}}", cs.join(", ")));
        }
        write!(f, "{s}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::{half, q, qf};

    fn names() -> Vec<String> {
        ["a", "b", "c"].iter().map(|s| s.to_string()).collect()
    }

    fn af(s: &str) -> AffineForm {
        AffineForm::parse(s, &names()).unwrap()
    }

    fn one() -> AtomRef {
        AtomRef::self_dual("1")
    }

    fn xi_atom(s: &str, e: i64) -> FormalMero {
        FormalMero::atom(&names(), AtomKind::global(&one(), &one(), true), af(s), e)
    }

    fn kernel() -> FormalMero {
        xi_atom("a+b+1/2", 1).mul(&xi_atom("a+c+1/2", 1)).unwrap().mul(&xi_atom("b-c+1", -1)).unwrap()
    }

    #[test]
    fn parse_and_render() {
        let f = af("-(a+c+1/2)");
        assert_eq!(f.coeffs, vec![q(-1), q(0), q(-1)]);
        assert_eq!(f.constant, qf(-1, 2));
        assert_eq!(f.render(&names()), "-(a+c+1/2)");
        assert_eq!(af("2*b - c - 3/4").render(&names()), "2*b-c-3/4");
        assert_eq!(af("7").constant, q(7));
    }

    #[test]
    fn divisor_examples() {
        let k = kernel();
        assert_eq!(k.divisor_along(&af("a+c+1/2")).unwrap().order, 1);
        let eps = FormalMero::atom(&names(), AtomKind::Epsilon("e".into()), af("a"), 1);
        assert_eq!(eps.divisor_along(&af("a")).unwrap().order, 0);
        // L with argument constant 2 on H
        let l = xi_atom("a+2", 1);
        assert_eq!(l.divisor_along(&af("a")).unwrap(), Divisor { order: 0, undecided: 0 });
        let mid = xi_atom("a+1/2", 1);
        assert_eq!(mid.divisor_along(&af("a")).unwrap(), Divisor { order: 0, undecided: 1 });
    }

    #[test]
    fn two_order_residue() {
        let k = kernel();
        let forms = [af("-(a+c+1/2)"), af("a+b-1/2")];
        let r1 = k.residue(&forms[0]).unwrap();
        assert_eq!(r1.prefactor, q(-1));
        let r = k.iterated_residue_checked(&forms, &[vec![0, 1], vec![1, 0]]).unwrap();
        assert_eq!(r.prefactor, q(-1));
        assert_eq!(r.to_string(), "-1·Res*(1×1, 0)·Res*(1×1, 1) / ξ(2) on {a+c+1/2 = 0, b-c-1 = 0}");
        let v = r.evaluate(&[Complex64::new(0.3, 0.0); 3], &EvalTable::default()).unwrap();
        assert!((v.re - 6.0 / std::f64::consts::PI).abs() < 1e-10);
    }

    #[test]
    fn order_zero_and_restriction() {
        let k = kernel();
        assert!(k.residue(&af("a-b")).unwrap().is_zero());
        let r = k.restrict(&af("a-b")).unwrap();
        assert_eq!(r.space.codim(), 1);
        assert!(k.restrict(&af("a+c+1/2")).is_err());
        let sq = xi_atom("a", 2);
        assert!(matches!(sq.residue(&af("a")), Err(MeroError::Order { order: 2, .. })));
    }

    #[test]
    fn local_residue() {
        let z = FormalMero::atom(&names(), AtomKind::LocalZeta, af("a+b"), 1);
        let r = z.residue(&af("-(a+b)")).unwrap();
        assert_eq!(r.prefactor, q(-1));
        let t = EvalTable { q: Some(2.0), epsilon: None };
        let v = r.evaluate(&[Complex64::new(0.0, 0.0); 3], &t).unwrap();
        assert!((v.re + 1.0 / 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn units() {
        let a = xi_atom("a+b", 1);
        let b = xi_atom("1-a-b", 1).scale(&q(5));
        assert!(a.eq_mod_units(&b));
        let z1 = FormalMero::atom(&names(), AtomKind::LocalZeta, af("b-c"), 1);
        let z2 = FormalMero::atom(&names(), AtomKind::LocalZeta, af("c-b"), 1);
        assert!(z1.eq_mod_units(&z2));
        assert!(!z1.eq_mod_units(&a));
        let c = xi_atom("2", -1).mul(&a).unwrap();
        assert!(c.eq_mod_units(&a));
        let _ = half();
    }

    #[test]
    fn numeric_product_rule() {
        let f = xi_atom("a+b+1/2", 1);
        let g = xi_atom("b-c+3", -1);
        let p = [Complex64::new(0.7, 0.2), Complex64::new(1.3, -0.1), Complex64::new(0.4, 0.3)];
        let t = EvalTable::default();
        let fg = f.mul(&g).unwrap().evaluate(&p, &t).unwrap();
        let prod = f.evaluate(&p, &t).unwrap() * g.evaluate(&p, &t).unwrap();
        assert!((fg - prod).norm() / prod.norm() < 1e-12);
    }
}
