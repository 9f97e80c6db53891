//! Exponential polynomials, the cone functions τ, τ̂, Γ, the polynomials θ, θ̂ and
//! their Fourier transforms on relative spaces z_P^Q.
//!
//! All vectors live in a_{0,H} = Q^n with the standard inner product; linear
//! functionals on z_P are represented by vectors of z_P via that inner product.

use crate::quad::{self, QuadConfig};
use crate::rat::{self, to_f64, Q};
use crate::rs::{enumerate_rs, RSParabolic};
use num::complex::Complex64;
use num::{One, Signed, Zero};
use rand::Rng;
use serde::Serialize;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConeError {
    #[error("{0} is not contained in {1}")]
    NotContained(String, String),
    #[error("λ lies on a singular pairing")]
    Singular,
    #[error("quadrature oracle supports rank ≤ 2, got {0}")]
    RankTooLarge(usize),
}

/// Polynomial with rational coefficients in `nvars` variables.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Poly {
    pub nvars: usize,
    pub terms: BTreeMap<Vec<u32>, Q>,
}

impl Poly {
    pub fn zero(nvars: usize) -> Self {
        Poly { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, c: Q) -> Self {
        let mut p = Self::zero(nvars);
        if !c.is_zero() {
            p.terms.insert(vec![0; nvars], c);
        }
        p
    }

    pub fn one(nvars: usize) -> Self {
        Self::constant(nvars, Q::one())
    }

    pub fn var(nvars: usize, k: usize) -> Self {
        let mut e = vec![0; nvars];
        e[k] = 1;
        let mut p = Self::zero(nvars);
        p.terms.insert(e, Q::one());
        p
    }

    pub fn add_term(&mut self, e: Vec<u32>, c: Q) {
        let v = self.terms.entry(e.clone()).or_insert_with(Q::zero);
        *v += c;
        if v.is_zero() {
            self.terms.remove(&e);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn eval(&self, x: &[Q]) -> Q {
        self.terms.iter().fold(Q::zero(), |acc, (e, c)| {
            let m = e.iter().zip(x).fold(Q::one(), |a, (&k, v)| a * num::pow(v.clone(), k as usize));
            acc + c * m
        })
    }

    pub fn eval_f64(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| to_f64(c) * e.iter().zip(x).map(|(&k, v)| v.powi(k as i32)).product::<f64>())
            .sum()
    }
}

/// f(T) = Σ_λ P_λ(T) e^{⟨λ,T⟩}, canonical: no zero polynomials stored.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExpPoly {
    pub nvars: usize,
    pub terms: BTreeMap<Vec<Q>, Poly>,
}

impl ExpPoly {
    pub fn zero(nvars: usize) -> Self {
        ExpPoly { nvars, terms: BTreeMap::new() }
    }

    pub fn add_term(&mut self, exponent: Vec<Q>, p: Poly) {
        let nv = self.nvars;
        let slot = self.terms.entry(exponent.clone()).or_insert_with(|| Poly::zero(nv));
        for (e, c) in p.terms {
            slot.add_term(e, c);
        }
        if slot.is_zero() {
            self.terms.remove(&exponent);
        }
    }

    /// The purely polynomial part P_0.
    pub fn polynomial_part(&self) -> Poly {
        self.terms.get(&rat::zeros(self.nvars)).cloned().unwrap_or_else(|| Poly::zero(self.nvars))
    }

    pub fn eval_f64(&self, t: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(lam, p)| {
                let s: f64 = lam.iter().zip(t).map(|(a, b)| to_f64(a) * b).sum();
                p.eval_f64(t) * s.exp()
            })
            .sum()
    }
}

impl Serialize for ExpPoly {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Term {
            exponent: Vec<String>,
            poly: Vec<(Vec<u32>, String)>,
        }
        let v: Vec<Term> = self
            .terms
            .iter()
            .map(|(e, p)| Term {
                exponent: e.iter().map(rat::fmt_q).collect(),
                poly: p.terms.iter().map(|(k, c)| (k.clone(), rat::fmt_q(c))).collect(),
            })
            .collect();
        v.serialize(s)
    }
}

/// Σ c · ∏_j ℓ_j(λ)^{-a_j} with ℓ_j(λ) = λ·forms[j].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InverseFormSum {
    pub forms: Vec<Vec<Q>>,
    pub terms: BTreeMap<Vec<u32>, Q>,
}

impl InverseFormSum {
    fn add(&mut self, e: Vec<u32>, c: Q) {
        let v = self.terms.entry(e.clone()).or_insert_with(Q::zero);
        *v += c;
        if v.is_zero() {
            self.terms.remove(&e);
        }
    }

    /// ∂/∂λ_k.
    pub fn differentiate(&self, k: usize) -> InverseFormSum {
        let mut out = InverseFormSum { forms: self.forms.clone(), terms: BTreeMap::new() };
        for (e, c) in &self.terms {
            for (j, f) in self.forms.iter().enumerate() {
                if e[j] == 0 || f[k].is_zero() {
                    continue;
                }
                let mut e2 = e.clone();
                e2[j] += 1;
                out.add(e2, -c * rat::q(e[j] as i64) * &f[k]);
            }
        }
        out
    }

    pub fn eval(&self, lam: &[Q]) -> Result<Q, ConeError> {
        let ls: Vec<Q> = self.forms.iter().map(|f| rat::dot(f, lam)).collect();
        if ls.iter().any(|l| l.is_zero()) {
            return Err(ConeError::Singular);
        }
        Ok(self.terms.iter().fold(Q::zero(), |acc, (e, c)| {
            acc + c * e.iter().zip(&ls).fold(Q::one(), |a, (&k, l)| a * num::pow(l.recip(), k as usize))
        }))
    }

    pub fn eval_c(&self, lam: &[Complex64]) -> Complex64 {
        let ls: Vec<Complex64> = self
            .forms
            .iter()
            .map(|f| f.iter().zip(lam).map(|(a, b)| b * to_f64(a)).sum())
            .collect();
        self.terms
            .iter()
            .map(|(e, c)| e.iter().zip(&ls).fold(Complex64::new(to_f64(c), 0.0), |a, (&k, l)| a / l.powi(k as i32)))
            .sum()
    }
}

/// The relative geometry of P ⊂ Q.
#[derive(Clone, Debug, Serialize)]
pub struct ConePair {
    pub p: RSParabolic,
    pub q: RSParabolic,
    pub dim: usize,
    pub eps: i32,
    #[serde(serialize_with = "ser_mat")]
    pub roots: Vec<Vec<Q>>,
    #[serde(serialize_with = "ser_mat")]
    pub coweights: Vec<Vec<Q>>,
    #[serde(serialize_with = "ser_mat")]
    pub coroots: Vec<Vec<Q>>,
    #[serde(serialize_with = "rat::ser_q")]
    pub vol_coweights: Q,
    #[serde(serialize_with = "rat::ser_q")]
    pub vol_coroots: Q,
    #[serde(skip)]
    pub z_p: Vec<Vec<Q>>,
    #[serde(skip)]
    pub z_q: Vec<Vec<Q>>,
}

fn ser_mat<S: serde::Serializer>(m: &[Vec<Q>], s: S) -> Result<S::Ok, S::Error> {
    let v: Vec<Vec<String>> = m.iter().map(|r| r.iter().map(rat::fmt_q).collect()).collect();
    v.serialize(s)
}

/// Basis e_i (i ≠ i_P) of z_P inside Q^n.
pub fn z_basis(p: &RSParabolic) -> Vec<Vec<Q>> {
    let z = p.z_space();
    let m = p.m();
    (0..m)
        .filter(|&i| i != p.i_0 - 1)
        .map(|i| {
            let mut e = rat::zeros(m);
            e[i] = Q::one();
            z.e_to_h(&e)
        })
        .collect()
}

/// e-coordinates (slots ≠ i_P) of X ∈ z_P.
fn e_coords(p: &RSParabolic, x: &[Q]) -> Vec<Q> {
    (0..p.m())
        .filter(|&i| i != p.i_0 - 1)
        .map(|i| {
            let k = p.h_block_coords(i).start;
            &x[k] * rat::q(p.sizes()[i] as i64)
        })
        .collect()
}

impl ConePair {
    pub fn new(p: &RSParabolic, q: &RSParabolic) -> Result<Self, ConeError> {
        if !p.is_contained_in(q) {
            return Err(ConeError::NotContained(p.to_string(), q.to_string()));
        }
        let zs = p.z_space();
        let z_p = z_basis(p);
        let z_q = z_basis(q);
        let roots: Vec<Vec<Q>> = zs
            .roots
            .iter()
            .map(|a| zs.covector_to_h(a))
            .filter(|a| z_q.iter().all(|z| rat::dot(a, z).is_zero()))
            .collect();
        let dim = roots.len();
        assert_eq!(dim, z_p.len() - z_q.len(), "relative roots must span z_P^Q");
        let (coweights, coroots) = if dim == 0 {
            (vec![], vec![])
        } else {
            let gi = rat::inverse(&rat::gram(&roots)).expect("roots independent");
            let cw: Vec<Vec<Q>> = (0..dim).map(|j| lin_comb(&gi[j], &roots)).collect();
            let wi = rat::inverse(&rat::gram(&cw)).expect("coweights independent");
            let cr: Vec<Vec<Q>> = (0..dim).map(|j| lin_comb(&wi[j], &cw)).collect();
            (cw, cr)
        };
        let mut cp = ConePair {
            p: p.clone(),
            q: q.clone(),
            dim,
            eps: if dim % 2 == 0 { 1 } else { -1 },
            roots,
            coweights,
            coroots,
            vol_coweights: Q::one(),
            vol_coroots: Q::one(),
            z_p,
            z_q,
        };
        cp.vol_coweights = cp.quotient_volume(&cp.coweights);
        cp.vol_coroots = cp.quotient_volume(&cp.coroots);
        Ok(cp)
    }

    /// Covolume of Z(basis) in z_P^Q for the quotient measure of z_P / z_Q.
    pub fn quotient_volume(&self, basis: &[Vec<Q>]) -> Q {
        let mut rows: Vec<Vec<Q>> = basis.iter().map(|b| e_coords(&self.p, b)).collect();
        rows.extend(self.z_q.iter().map(|z| e_coords(&self.p, z)));
        if rows.is_empty() {
            return Q::one();
        }
        rat::det(&rows).abs()
    }

    pub fn theta_hat(&self, lam: &[Q]) -> Q {
        self.coweights.iter().fold(self.vol_coweights.recip(), |a, w| a * rat::dot(lam, w))
    }

    pub fn theta(&self, lam: &[Q]) -> Q {
        self.coroots.iter().fold(self.vol_coroots.recip(), |a, w| a * rat::dot(lam, w))
    }

    pub fn theta_hat_c(&self, lam: &[Complex64]) -> Complex64 {
        self.coweights.iter().fold(Complex64::new(1.0 / to_f64(&self.vol_coweights), 0.0), |a, w| a * cdot(lam, w))
    }

    pub fn theta_c(&self, lam: &[Complex64]) -> Complex64 {
        self.coroots.iter().fold(Complex64::new(1.0 / to_f64(&self.vol_coroots), 0.0), |a, w| a * cdot(lam, w))
    }

    /// τ_P^Q(H): all relative roots nonnegative.
    pub fn tau(&self, h: &[Q]) -> bool {
        self.roots.iter().all(|a| !rat::dot(a, h).is_negative())
    }

    /// τ̂_P^Q(X): the projection of X to z_P^Q is a nonnegative combination of coroots.
    pub fn tau_hat(&self, x: &[Q]) -> bool {
        self.coweights.iter().all(|w| !rat::dot(w, x).is_negative())
    }

    fn tau_f64(&self, h: &[f64]) -> bool {
        self.roots.iter().all(|a| fdot(a, h) >= 0.0)
    }

    fn tau_hat_f64(&self, x: &[f64]) -> bool {
        self.coweights.iter().all(|w| fdot(w, x) >= 0.0)
    }

    /// ε_P^Q / θ̂_P^Q as an inverse-form sum; polynomial q is applied as q(∂_λ).
    pub fn ft_cone(&self, qpoly: &Poly) -> InverseFormSum {
        let mut base = InverseFormSum { forms: self.coweights.clone(), terms: BTreeMap::new() };
        base.add(vec![1; self.dim], rat::q(self.eps as i64) * &self.vol_coweights);
        let mut out = InverseFormSum { forms: self.coweights.clone(), terms: BTreeMap::new() };
        for (e, c) in &qpoly.terms {
            let mut d = base.clone();
            for (k, &mult) in e.iter().enumerate() {
                for _ in 0..mult {
                    d = d.differentiate(k);
                }
            }
            for (e2, c2) in d.terms {
                out.add(e2, c * c2);
            }
        }
        out
    }

    /// A vector pairing to the given values against the coweights, plus `extra`
    /// projected away from z_P^Q.
    pub fn lambda_with_pairings(&self, pairings: &[Q]) -> Vec<Q> {
        let n = self.p.n;
        self.roots.iter().zip(pairings).fold(rat::zeros(n), |acc, (a, p)| rat::add(&acc, &rat::scale(a, p)))
    }
}

fn lin_comb(c: &[Q], vs: &[Vec<Q>]) -> Vec<Q> {
    vs.iter().zip(c).fold(rat::zeros(vs[0].len()), |acc, (v, x)| rat::add(&acc, &rat::scale(v, x)))
}

fn cdot(lam: &[Complex64], w: &[Q]) -> Complex64 {
    lam.iter().zip(w).map(|(l, x)| l * to_f64(x)).sum()
}

fn fdot(a: &[Q], h: &[f64]) -> f64 {
    a.iter().zip(h).map(|(x, y)| to_f64(x) * y).sum()
}

/// Data for Γ_P^Q: the intermediate R with their pairs (P,R) and (R,Q).
#[derive(Clone, Debug)]
pub struct GammaFamily {
    pub pq: ConePair,
    pub terms: Vec<(RSParabolic, ConePair, ConePair)>,
}

impl GammaFamily {
    pub fn new(p: &RSParabolic, q: &RSParabolic) -> Result<Self, ConeError> {
        let pq = ConePair::new(p, q)?;
        let mut terms = Vec::new();
        for r in enumerate_rs(p.n) {
            if p.is_contained_in(&r) && r.is_contained_in(q) {
                terms.push((r.clone(), ConePair::new(p, &r)?, ConePair::new(&r, q)?));
            }
        }
        Ok(GammaFamily { pq, terms })
    }

    /// Γ_P^Q(H,T) = Σ_R ε_R^Q τ_P^R(H) τ̂_R^Q(H−T).
    pub fn gamma(&self, h: &[Q], t: &[Q]) -> i64 {
        let d = rat::sub(h, t);
        self.terms
            .iter()
            .filter(|(_, pr, rq)| pr.tau(h) && rq.tau_hat(&d))
            .map(|(_, _, rq)| rq.eps as i64)
            .sum()
    }

    pub fn gamma_f64(&self, h: &[f64], t: &[f64]) -> i64 {
        let d: Vec<f64> = h.iter().zip(t).map(|(a, b)| a - b).collect();
        self.terms
            .iter()
            .filter(|(_, pr, rq)| pr.tau_f64(h) && rq.tau_hat_f64(&d))
            .map(|(_, _, rq)| rq.eps as i64)
            .sum()
    }

    /// Σ_R ε_P^R θ̂_P^R(λ)⁻¹ θ_R^Q(λ)⁻¹ exp⟨λ, T_R^Q⟩ as an exponential polynomial in T.
    pub fn ft_gamma(&self, lam: &[Q]) -> Result<ExpPoly, ConeError> {
        let n = self.pq.p.n;
        let mut out = ExpPoly::zero(n);
        for (_, pr, rq) in &self.terms {
            let th = pr.theta_hat(lam);
            let t = rq.theta(lam);
            if th.is_zero() || t.is_zero() {
                return Err(ConeError::Singular);
            }
            let coef = rat::q(pr.eps as i64) / (th * t);
            let pr_r = rat::project(lam, &rq.z_p);
            let pr_q = rat::project(lam, &rq.z_q);
            out.add_term(rat::sub(&pr_r, &pr_q), Poly::constant(n, coef));
        }
        Ok(out)
    }

    pub fn ft_gamma_c(&self, lam: &[Complex64], t: &[Q]) -> Complex64 {
        self.terms
            .iter()
            .map(|(_, pr, rq)| {
                let tr = rat::sub(&rat::project(t, &rq.z_p), &rat::project(t, &rq.z_q));
                let e: Complex64 = lam.iter().zip(&tr).map(|(l, x)| l * to_f64(x)).sum();
                e.exp() * (pr.eps as f64) / (pr.theta_hat_c(lam) * rq.theta_c(lam))
            })
            .sum()
    }
}

/// Half-space c·x ≥ r in the coordinates of a chosen basis.
#[derive(Clone, Debug)]
struct Line {
    c: Vec<f64>,
    r: f64,
}

fn to_fvec(v: &[Q]) -> Vec<f64> {
    v.iter().map(to_f64).collect()
}

/// ∫_a^b exp(c + κx) dx; a short Taylor series when κ(b−a) is small.
fn exp_segment(c: Complex64, kappa: Complex64, a: f64, b: f64) -> Complex64 {
    let z = kappa * (b - a);
    if z.norm() < 1e-3 {
        let series = Complex64::new(1.0, 0.0) + z / 2.0 + z * z / 6.0 + z * z * z / 24.0 + z * z * z * z / 120.0;
        return (c + kappa * a).exp() * (b - a) * series;
    }
    ((c + kappa * b).exp() - (c + kappa * a).exp()) / kappa
}

/// ∫ weight(x) exp(κ·x) dx over the box [-xmax, xmax] (rank ≤ 2), splitting at the
/// given lines; weight is constant between breakpoints. In rank 2 the inner integral
/// over each window is exact and the outer one is adaptive.
fn box_integral<W: Fn(&[f64]) -> f64>(kappa: &[Complex64], lines: &[Line], xmax: &[f64], weight: &W, cfg: &QuadConfig) -> Complex64 {
    let d = kappa.len();
    let h = 1.0 / kappa.iter().map(|k| k.norm()).fold(1e-3, f64::max);
    if d == 1 {
        let mut pts = vec![-xmax[0], xmax[0]];
        for l in lines {
            if l.c[0] != 0.0 {
                pts.push(l.r / l.c[0]);
            }
        }
        let pts = clean(pts, -xmax[0], xmax[0]);
        let mut total = Complex64::new(0.0, 0.0);
        for w in pts.windows(2) {
            let wt = weight(&[0.5 * (w[0] + w[1])]);
            if wt != 0.0 {
                total += quad::integrate_split(&mut |x: f64| (kappa[0] * x).exp(), w[0], w[1], h, cfg) * wt;
            }
        }
        return total;
    }
    let inner = |x1: f64| -> Complex64 {
        let mut pts = vec![-xmax[1], xmax[1]];
        for l in lines {
            if l.c[1] != 0.0 {
                pts.push((l.r - l.c[0] * x1) / l.c[1]);
            }
        }
        let pts = clean(pts, -xmax[1], xmax[1]);
        let mut total = Complex64::new(0.0, 0.0);
        for w in pts.windows(2) {
            let wt = weight(&[x1, 0.5 * (w[0] + w[1])]);
            if wt != 0.0 {
                total += exp_segment(kappa[0] * x1, kappa[1], w[0], w[1]) * wt;
            }
        }
        total
    };
    let mut pts = vec![-xmax[0], xmax[0]];
    for (i, l) in lines.iter().enumerate() {
        if l.c[1] == 0.0 {
            if l.c[0] != 0.0 {
                pts.push(l.r / l.c[0]);
            }
        } else if l.c[0] != 0.0 {
            for s in [-xmax[1], xmax[1]] {
                pts.push((l.r - l.c[1] * s) / l.c[0]);
            }
        }
        for l2 in &lines[i + 1..] {
            let det = l.c[0] * l2.c[1] - l.c[1] * l2.c[0];
            if det.abs() > 1e-14 {
                pts.push((l.r * l2.c[1] - l.c[1] * l2.r) / det);
            }
        }
    }
    let pts = clean(pts, -xmax[0], xmax[0]);
    let mut f = inner;
    pts.windows(2).map(|w| quad::integrate_split(&mut f, w[0], w[1], h, cfg)).sum()
}

fn clean(mut pts: Vec<f64>, lo: f64, hi: f64) -> Vec<f64> {
    pts.retain(|x| x.is_finite() && *x >= lo && *x <= hi);
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup_by(|a, b| (*a - *b).abs() < 1e-13 * (1.0 + a.abs()));
    pts
}

/// Numeric oracle for ∫_{z_P^Q} τ_P^Q(H) e^{⟨λ,H⟩} dH, parametrized by the coroot basis.
/// Returns the value and the tail bound relative to it.
pub fn quad_ft_cone(cp: &ConePair, lam: &[Complex64], cfg: &QuadConfig) -> Result<(Complex64, f64), ConeError> {
    let d = cp.dim;
    if d > 2 {
        return Err(ConeError::RankTooLarge(d));
    }
    if d == 0 {
        return Ok((Complex64::new(1.0, 0.0), 0.0));
    }
    let basis: Vec<Vec<f64>> = cp.coroots.iter().map(|v| to_fvec(v)).collect();
    let vol = to_f64(&cp.vol_coroots);
    let kappa: Vec<Complex64> = basis.iter().map(|b| lam.iter().zip(b).map(|(l, x)| l * x).sum()).collect();
    // constraints ⟨α_i, Σ x_j α∨_j⟩ ≥ 0
    let lines: Vec<Line> = cp
        .roots
        .iter()
        .map(|a| Line { c: cp.coroots.iter().map(|b| to_f64(&rat::dot(a, b))).collect(), r: 0.0 })
        .collect();
    // decay rate along the rays (coweights in coroot coordinates)
    let wi = rat::inverse(&rat::gram(&cp.coroots)).unwrap();
    let mut decay = f64::INFINITY;
    for w in &cp.coweights {
        let rhs: Vec<Q> = cp.coroots.iter().map(|b| rat::dot(b, w)).collect();
        let x: Vec<f64> = (0..d).map(|j| to_f64(&rat::dot(&wi[j], &rhs))).collect();
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let re: f64 = lam.iter().zip(w).map(|(l, v)| l.re * to_f64(v)).sum();
        if re >= 0.0 {
            return Err(ConeError::Singular);
        }
        decay = decay.min(-re / norm);
    }
    let lines_ref = &lines;
    let weight = move |x: &[f64]| -> f64 {
        if lines_ref.iter().all(|l| l.c.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() >= l.r) {
            1.0
        } else {
            0.0
        }
    };
    let mut radius = 40.0 / decay;
    loop {
        let v = box_integral(&kappa, &lines, &vec![radius; d], &weight, cfg) * vol;
        let tail = if d == 1 {
            2.0 * (-decay * radius).exp() / decay
        } else {
            2.0 * std::f64::consts::PI * (-decay * radius).exp() * (radius / decay + 1.0 / (decay * decay))
        } * vol;
        let rel = tail / v.norm();
        if rel < 1e-12 || radius > 1e4 / decay {
            return Ok((v, rel));
        }
        radius *= 1.5;
    }
}

/// Numeric oracle for ∫_{z_P^Q} Γ_P^Q(H,T) e^{⟨λ,H⟩} dH (compact support).
pub fn quad_ft_gamma(fam: &GammaFamily, lam: &[Complex64], t: &[Q], cfg: &QuadConfig) -> Result<Complex64, ConeError> {
    let cp = &fam.pq;
    let d = cp.dim;
    if d > 2 {
        return Err(ConeError::RankTooLarge(d));
    }
    if d == 0 {
        return Ok(Complex64::new(fam.gamma(&rat::zeros(cp.p.n), t) as f64, 0.0));
    }
    let basis: Vec<Vec<f64>> = cp.coroots.iter().map(|v| to_fvec(v)).collect();
    let vol = to_f64(&cp.vol_coroots);
    let kappa: Vec<Complex64> = basis.iter().map(|b| lam.iter().zip(b).map(|(l, x)| l * x).sum()).collect();
    let tf = to_fvec(t);
    let mut lines = Vec::new();
    for (_, pr, rq) in &fam.terms {
        for a in &pr.roots {
            lines.push(Line { c: cp.coroots.iter().map(|b| to_f64(&rat::dot(a, b))).collect(), r: 0.0 });
        }
        for w in &rq.coweights {
            lines.push(Line { c: cp.coroots.iter().map(|b| to_f64(&rat::dot(w, b))).collect(), r: to_f64(&rat::dot(w, t)) });
        }
    }
    // support lies in ‖H‖ ≤ ‖T‖; bound each coroot coordinate accordingly
    let gi = rat::inverse(&rat::gram(&cp.coroots)).unwrap();
    let tnorm = tf.iter().map(|x| x * x).sum::<f64>().sqrt();
    let xmax: Vec<f64> = (0..d)
        .map(|j| {
            let row = lin_comb(&gi[j], &cp.coroots);
            1.01 * tnorm * to_fvec(&row).iter().map(|x| x * x).sum::<f64>().sqrt() + 1e-9
        })
        .collect();
    let n = cp.p.n;
    let weight = |x: &[f64]| -> f64 {
        let mut h = vec![0.0; n];
        for (xj, b) in x.iter().zip(&basis) {
            for k in 0..n {
                h[k] += xj * b[k];
            }
        }
        fam.gamma_f64(&h, &tf) as f64
    };
    Ok(box_integral(&kappa, &lines, &xmax, &weight, cfg) * vol)
}

/// A λ with Re⟨λ, ϖ_j⟩ ∈ [−3, −0.2] for every relative coweight, a random imaginary
/// part, and random noise orthogonal to z_P^Q.
pub fn sample_lambda<R: Rng>(cp: &ConePair, rng: &mut R) -> Vec<Complex64> {
    let n = cp.p.n;
    let mut re = rat::zeros(n);
    let mut im = rat::zeros(n);
    for a in &cp.roots {
        let p = rat::qf(-rng.gen_range(200..3000), 1000);
        let s = rat::qf(rng.gen_range(-2000..2000), 1000);
        re = rat::add(&re, &rat::scale(a, &p));
        im = rat::add(&im, &rat::scale(a, &s));
    }
    let noise: Vec<Q> = (0..n).map(|_| rat::qf(rng.gen_range(-1000..1000), 1000)).collect();
    let noise = rat::sub(&noise, &rat::project(&noise, &cp.roots));
    re.iter().zip(&im).zip(&noise).map(|((a, b), c)| Complex64::new(to_f64(&(a + c)), to_f64(b))).collect()
}

/// Rational λ in general position for ft_gamma: pairings with coweights in [−3, −0.2],
/// plus a generic component orthogonal to z_P^Q.
pub fn sample_lambda_q<R: Rng>(cp: &ConePair, rng: &mut R) -> Vec<Q> {
    let n = cp.p.n;
    let mut re = rat::zeros(n);
    for a in &cp.roots {
        let p = rat::qf(-rng.gen_range(200..3000), 997);
        re = rat::add(&re, &rat::scale(a, &p));
    }
    let noise: Vec<Q> = (0..n).map(|_| rat::qf(rng.gen_range(-1000..1000), 991)).collect();
    rat::add(&re, &rat::sub(&noise, &rat::project(&noise, &cp.roots)))
}

/// T = Σ c_j ϖ_j with c_j ∈ (0.5, 3].
pub fn sample_t<R: Rng>(cp: &ConePair, rng: &mut R) -> Vec<Q> {
    cp.coweights.iter().fold(rat::zeros(cp.p.n), |acc, w| {
        rat::add(&acc, &rat::scale(w, &rat::qf(rng.gen_range(500..3000), 1000)))
    })
}

/// Rejection test of the support of Γ: samples H ∈ z_P^Q strictly outside the closed
/// ball B(T/2, ‖T‖/2) and counts the H with Γ(H,T) ≠ 0.
pub fn support_violations<R: Rng>(fam: &GammaFamily, samples: usize, rng: &mut R) -> usize {
    let cp = &fam.pq;
    if cp.dim == 0 {
        return 0;
    }
    let t = sample_t(cp, rng);
    let half_t = rat::scale(&t, &rat::half());
    let r2 = rat::dot(&half_t, &half_t);
    let scale = to_f64(&r2).sqrt() * 3.0;
    let mut bad = 0;
    let mut drawn = 0;
    while drawn < samples {
        let h = cp.coroots.iter().fold(rat::zeros(cp.p.n), |acc, b| {
            let c = rat::qf(((rng.gen::<f64>() * 2.0 - 1.0) * scale * 1e4) as i64, 10_000);
            rat::add(&acc, &rat::scale(b, &c))
        });
        let d = rat::sub(&h, &half_t);
        if rat::dot(&d, &d) <= r2 {
            continue;
        }
        drawn += 1;
        if fam.gamma(&h, &t) != 0 {
            bad += 1;
        }
    }
    bad
}

/// All pairs P ⊂ Q among RS parabolics of GL_n × GL_{n+1} with rank in the given range.
pub fn cone_pairs(n: usize, min_rank: usize, max_rank: usize) -> Vec<ConePair> {
    let all = enumerate_rs(n);
    let mut out = Vec::new();
    for p in &all {
        for q in &all {
            if p.is_contained_in(q) {
                let cp = ConePair::new(p, q).expect("contained");
                if cp.dim >= min_rank && cp.dim <= max_rank {
                    out.push(cp);
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parabolic::Composition;
    use crate::rat::{q, qf};

    fn rsp(parts: &[usize], i0: usize) -> RSParabolic {
        RSParabolic::from_pair(&Composition::new(parts.to_vec()).unwrap(), i0).unwrap()
    }

    #[test]
    fn rank_one_theta_hat() {
        let g = RSParabolic::full(1);
        let p0 = ConePair::new(&rsp(&[1, 1], 2), &g).unwrap();
        assert_eq!(p0.theta_hat(&[q(3)]), q(3));
        assert_eq!(p0.eps, -1);
        let p0bar = ConePair::new(&rsp(&[1, 1], 1), &g).unwrap();
        assert_eq!(p0bar.theta_hat(&[q(3)]), q(-3));
        let triv = ConePair::new(&g, &g).unwrap();
        assert_eq!(triv.theta_hat(&[q(5)]), q(1));
    }

    #[test]
    fn ft_cone_rank_one() {
        let cp = ConePair::new(&rsp(&[1, 1], 2), &RSParabolic::full(1)).unwrap();
        let f = cp.ft_cone(&Poly::one(1));
        assert_eq!(f.eval(&[q(-1)]).unwrap(), q(1));
        let f1 = cp.ft_cone(&Poly::var(1, 0));
        assert_eq!(f1.eval(&[q(-2)]).unwrap(), qf(1, 4));
    }

    #[test]
    fn gamma_rank_one_is_interval() {
        let fam = GammaFamily::new(&rsp(&[1, 1], 2), &RSParabolic::full(1)).unwrap();
        let t = [q(3)];
        for (h, v) in [(-1, 0), (0, 1), (2, 1), (3, 0), (5, 0)] {
            assert_eq!(fam.gamma(&[q(h)], &t), v, "H = {h}");
        }
        let ep = fam.ft_gamma(&[q(-2)]).unwrap();
        // (e^{λT} − 1)/λ at λ = −2
        let want = ((-2.0f64 * 3.0).exp() - 1.0) / -2.0;
        assert!((ep.eval_f64(&[3.0]) - want).abs() < 1e-14);
    }

    #[test]
    fn full_group_geometry_matches_zspace() {
        for p in enumerate_rs(3) {
            let cp = ConePair::new(&p, &RSParabolic::full(3)).unwrap();
            let z = p.z_space();
            assert_eq!(cp.vol_coweights, z.vol_coweights);
            let cw: Vec<Vec<Q>> = z.coweights.iter().map(|e| z.e_to_h(e)).collect();
            assert_eq!(cp.coweights, cw);
            let cr: Vec<Vec<Q>> = z.coroots.iter().map(|e| z.e_to_h(e)).collect();
            assert_eq!(cp.coroots, cr);
        }
    }
}
