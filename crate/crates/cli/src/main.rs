//! rsres: batch front end. Every command prints (or writes with --out) one JSON report
//! carrying the seed, a hash of the inputs and the module versions.
//!
//! Exit codes: 0 success, 2 validation failure, 3 assertion or property failure.

use clap::{Args, Parser, Subcommand};
use num::complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rsres::cones::{cone_pairs, quad_ft_cone, sample_lambda, support_violations, GammaFamily, InverseFormSum, Poly};
use rsres::formal_mero::MeroError;
use rsres::lfactors::{AtomRegistry, LError};
use rsres::local_zeta::{self as lz, LocalError, PointMode, RationalFunctionPoint};
use rsres::quad::QuadConfig;
use rsres::rat::{self, fmt_q, parse_q, Q};
use rsres::relevance::{self as rel, InducingPair, Layout, RelError, Side};
use rsres::rs::{brute_force_rs, enumerate_rs, rs_count_formula, RSParabolic};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "rsres", version, about = "Residues of Rankin-Selberg periods: combinatorics and formal L-factor calculus")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Clone)]
struct Common {
    /// n for GL_n x GL_{n+1}.
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Inducing pair file (JSON).
    #[arg(long, global = true)]
    pair: Option<PathBuf>,
    /// Atom registry file (JSON).
    #[arg(long, global = true)]
    registry: Option<PathBuf>,
    /// Extra residue order: comma separated indices into L_+ followed by L_-.
    #[arg(long, global = true)]
    order: Option<String>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Significant digits of numeric fields (at most 15).
    #[arg(long, global = true, default_value_t = 12)]
    digits: usize,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// List the RS parabolics of GL_n x GL_{n+1}.
    EnumerateRs,
    /// Validate an inducing pair and show its cell layout.
    PairValidate,
    /// The singular hyperplanes L_+ and L_- and their intersection.
    PairForms,
    /// Iterated residues of the global kernel in several orders.
    PairResidues,
    /// cL at the center and its non-vanishing criterion.
    PairCriterion,
    /// Weyl and parabolic data of the residue.
    PairWeyl,
    /// Cone Fourier transforms against quadrature, and the Gamma support test.
    ConesFt {
        #[arg(long, default_value_t = 200)]
        samples: usize,
    },
    /// Partition of a lattice cone into cosets with prescribed thresholds.
    LocalPartition {
        #[arg(long, default_value_t = 2)]
        rank: usize,
        /// The bound M of Λ[≥M].
        #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
        lower: i64,
        /// Thresholds are drawn in [M + lo, M + hi].
        #[arg(long, default_value_t = -2, allow_hyphen_values = true)]
        lo: i64,
        #[arg(long, default_value_t = 5, allow_hyphen_values = true)]
        hi: i64,
        /// Side of the brute-force check box.
        #[arg(long, default_value_t = 50)]
        side: i64,
    },
    /// The unramified GL_1 x GL_2 identities at x = q^-b, y = q^-c, u = q^-(a+1/2).
    LocalZetaGl1gl2 {
        #[arg(long, default_value = "2")]
        q: String,
        #[arg(long, default_value = "1/3")]
        x: String,
        #[arg(long, default_value = "1/5")]
        y: String,
        #[arg(long, default_value = "1/7")]
        u: String,
    },
    /// Support of the local kernel F^Q against the predicted set.
    LocalSupport {
        /// n, n+1 or both.
        #[arg(long, default_value = "both")]
        m: String,
    },
    /// The GL_1 x GL_2 example end to end.
    ExampleGl1gl2,
}

enum Failure {
    Validation(String),
    Assertion(String),
}

impl From<RelError> for Failure {
    fn from(e: RelError) -> Self {
        match e {
            RelError::Assertion(_) => Failure::Assertion(e.to_string()),
            _ => Failure::Validation(e.to_string()),
        }
    }
}

impl From<LocalError> for Failure {
    fn from(e: LocalError) -> Self {
        match e {
            LocalError::Witness(_) => Failure::Assertion(e.to_string()),
            LocalError::Rel(r) => r.into(),
            _ => Failure::Validation(e.to_string()),
        }
    }
}

impl From<LError> for Failure {
    fn from(e: LError) -> Self {
        Failure::Validation(e.to_string())
    }
}

impl From<MeroError> for Failure {
    fn from(e: MeroError) -> Self {
        Failure::Validation(e.to_string())
    }
}

/// The result of a command plus the properties that failed.
struct Outcome {
    result: Value,
    failures: Vec<String>,
}

impl Outcome {
    fn new(result: Value) -> Self {
        Outcome { result, failures: vec![] }
    }

    fn require(&mut self, ok: bool, what: &str) {
        if !ok {
            self.failures.push(what.to_string());
        }
    }
}

struct Inputs {
    hasher: Sha256,
}

impl Inputs {
    fn read(&mut self, path: &PathBuf) -> Result<String, Failure> {
        let s = std::fs::read_to_string(path).map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))?;
        self.hasher.update(path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default().as_bytes());
        self.hasher.update([0]);
        self.hasher.update(s.as_bytes());
        self.hasher.update([0]);
        Ok(s)
    }

    fn registry(&mut self, c: &Common, default: AtomRegistry) -> Result<AtomRegistry, Failure> {
        match &c.registry {
            None => Ok(default),
            Some(p) => {
                let s = self.read(p)?;
                AtomRegistry::from_json(&s).map_err(|e| Failure::Validation(format!("{}: {e}", p.display())))
            }
        }
    }

    fn pair(&mut self, c: &Common, reg: &AtomRegistry) -> Result<InducingPair, Failure> {
        let p = c.pair.as_ref().ok_or_else(|| Failure::Validation("--pair is required".into()))?;
        let s = self.read(p)?;
        InducingPair::from_json(&s, reg).map_err(|e| match e {
            RelError::Assertion(_) => Failure::Assertion(e.to_string()),
            _ => Failure::Validation(format!("{}: {e}", p.display())),
        })
    }
}

fn numeric(x: f64, digits: usize) -> Value {
    let d = digits.clamp(1, 15);
    let s = format!("{:.*e}", d - 1, x);
    json!(s.parse::<f64>().unwrap_or(x))
}

fn rsp_json(p: &RSParabolic) -> Value {
    json!({
        "p_np1": p.p_std_np1.parts,
        "i0": p.i_0,
        "type": p.type_tag,
        "p_h": p.p_h.parts,
        "w_std": p.w_std,
        "standard": p.is_standard(),
        "label": p.to_string(),
    })
}

fn ifs_json(f: &InverseFormSum) -> Value {
    json!({
        "forms": f.forms.iter().map(|r| r.iter().map(fmt_q).collect::<Vec<_>>()).collect::<Vec<_>>(),
        "terms": f.terms.iter().map(|(e, c)| json!({"coeff": fmt_q(c), "exponents": e})).collect::<Vec<_>>(),
    })
}

fn need_n(c: &Common) -> Result<usize, Failure> {
    c.n.ok_or_else(|| Failure::Validation("--n is required".into()))
}

fn parse_order(s: &str, len: usize) -> Result<Vec<usize>, Failure> {
    let v: Result<Vec<usize>, _> = s.split(',').map(|t| t.trim().parse::<usize>()).collect();
    let v = v.map_err(|_| Failure::Validation(format!("bad --order {s}")))?;
    let mut sorted = v.clone();
    sorted.sort_unstable();
    if sorted != (0..len).collect::<Vec<_>>() {
        return Err(Failure::Validation(format!("--order must be a permutation of 0..{len}")));
    }
    Ok(v)
}

fn parse_rat(s: &str, what: &str) -> Result<Q, Failure> {
    parse_q(s).ok_or_else(|| Failure::Validation(format!("--{what}: not a rational: {s}")))
}

fn run(cmd: &Cmd, c: &Common, inp: &mut Inputs) -> Result<Outcome, Failure> {
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    match cmd {
        Cmd::EnumerateRs => {
            let n = need_n(c)?;
            if n > 6 {
                return Err(Failure::Validation("--n must be at most 6".into()));
            }
            let all = enumerate_rs(n);
            let brute = brute_force_rs(n).len();
            let formula = rs_count_formula(n);
            let mut o = Outcome::new(json!({
                "n": n,
                "count": all.len(),
                "brute_force_count": brute,
                "formula_count": formula,
                "parabolics": all.iter().map(rsp_json).collect::<Vec<_>>(),
            }));
            o.require(all.len() == brute && brute == formula, "census counts disagree");
            Ok(o)
        }
        Cmd::PairValidate => {
            let reg = inp.registry(c, AtomRegistry::trivial())?;
            let p = inp.pair(c, &reg)?;
            let l = Layout::new(&p, &reg);
            Ok(Outcome::new(json!({
                "pair": p.to_json(),
                "tempered": p.is_tempered(),
                "m1": p.m1(),
                "m2": p.m2(),
                "D": p.big_d(),
                "coordinates": l.names,
                "cells": l.cells.iter().map(|x| json!({
                    "name": x.name, "side": if x.side == Side::N { "n" } else { "n+1" },
                    "family": x.family, "block": x.block, "j": x.j, "r": x.r, "atom": x.atom.to_string(),
                })).collect::<Vec<_>>(),
                "p_pi_n": l.cell_sizes(Side::N),
                "p_pi_np1": l.cell_sizes(Side::Np1),
            })))
        }
        Cmd::PairForms => {
            let reg = inp.registry(c, AtomRegistry::trivial())?;
            let p = inp.pair(c, &reg)?;
            let l = Layout::new(&p, &reg);
            let f = rel::singular_forms(&p, &l);
            let (plus, minus) = f.render(&l.names);
            let (_, rep) = rel::intersection_check(&p, &l, &f)?;
            let mut o = Outcome::new(json!({
                "coordinates": l.names,
                "L_plus": plus,
                "L_minus": minus,
                "labels": f.labels().iter().map(|x| x.to_string()).collect::<Vec<_>>(),
                "intersection": rep,
            }));
            o.require(rep.dim == rep.expected_dim, "intersection has the wrong dimension");
            Ok(o)
        }
        Cmd::PairResidues => {
            let reg = inp.registry(c, AtomRegistry::trivial())?;
            let p = inp.pair(c, &reg)?;
            let l = Layout::new(&p, &reg);
            let f = rel::singular_forms(&p, &l);
            let mut extra = Vec::new();
            if let Some(s) = &c.order {
                extra.push(parse_order(s, f.len())?);
            }
            for _ in 0..2 {
                extra.push(rel::random_order(&f, &mut rng));
            }
            let r = rel::global_residue_pipeline(&p, &reg, &extra)?;
            let nv = r.on_a_pi_mero.nvars();
            let point: Vec<Complex64> = (0..nv).map(|i| Complex64::new(0.1 + 0.05 * i as f64, 0.0)).collect();
            let value = r.on_a_pi_mero.evaluate(&point, &Default::default()).ok();
            let mut o = Outcome::new(json!({
                "report": r,
                "numeric_point": point.iter().map(|z| z.re).collect::<Vec<_>>(),
                "numeric_value": value.map(|v| json!({"re": numeric(v.re, c.digits), "im": numeric(v.im, c.digits)})),
            }));
            o.require(r.order_independent, "residues depend on the order");
            o.require(r.matches_cl, "the residue differs from cL modulo units");
            Ok(o)
        }
        Cmd::PairCriterion => {
            let reg = inp.registry(c, AtomRegistry::trivial())?;
            let p = inp.pair(c, &reg)?;
            let cl = rel::cl_quotient(&p, &reg)?;
            let star = rel::cl_star(&p, &reg)?;
            Ok(Outcome::new(json!({"pair": p.to_json(), "cl": cl.to_string(), "cl_star": star})))
        }
        Cmd::PairWeyl => {
            let reg = inp.registry(c, AtomRegistry::trivial())?;
            let p = inp.pair(c, &reg)?;
            let d = rel::residue_weyl_data(&p, &reg)?;
            let s = rel::sigma1_products_check(&p, &reg, 5, &mut rng)?;
            let mut o = Outcome::new(json!({
                "pair": p.to_json(),
                "weyl": d,
                "p_res": rsp_json(&d.p_res),
                "p_plus": rsp_json(&d.p_plus),
                "sigma1": s,
            }));
            o.require(s.first_identity && s.second_identity, "the w_1 action product identities fail");
            Ok(o)
        }
        Cmd::ConesFt { samples } => {
            let n = need_n(c)?;
            if n > 3 {
                return Err(Failure::Validation("--n must be at most 3".into()));
            }
            let cfg = QuadConfig::default();
            let mut o = Outcome::new(Value::Null);
            let mut rows = Vec::new();
            for cp in cone_pairs(n, 1, 2) {
                let ft = cp.ft_cone(&Poly::one(n));
                let lam = sample_lambda(&cp, &mut rng);
                let exact = ft.eval_c(&lam);
                let (num, _) = quad_ft_cone(&cp, &lam, &cfg).map_err(|e| Failure::Validation(e.to_string()))?;
                let relerr = (exact - num).norm() / exact.norm();
                let fam = GammaFamily::new(&cp.p, &cp.q).map_err(|e| Failure::Validation(e.to_string()))?;
                let bad = support_violations(&fam, *samples, &mut rng);
                o.require(relerr <= 1e-8, &format!("{} ⊂ {}: quadrature disagrees", cp.p, cp.q));
                o.require(bad == 0, &format!("{} ⊂ {}: Gamma support violated", cp.p, cp.q));
                rows.push(json!({
                    "p": cp.p.to_string(),
                    "q": cp.q.to_string(),
                    "rank": cp.dim,
                    "eps": cp.eps,
                    "ft": ifs_json(&ft),
                    "numeric_lambda": lam.iter().map(|z| json!([numeric(z.re, c.digits), numeric(z.im, c.digits)])).collect::<Vec<_>>(),
                    "numeric_relative_error": numeric(relerr, 3),
                    "gamma_support_violations": bad,
                }));
            }
            o.result = json!({"n": n, "pairs": rows});
            Ok(o)
        }
        Cmd::LocalPartition { rank, lower, lo, hi, side } => {
            if lo > hi {
                return Err(Failure::Validation("--lo exceeds --hi".into()));
            }
            let spec = match c.n {
                Some(n) => {
                    let p0 = RSParabolic::standard_all(n).into_iter().find(|p| p.m() == n + 1).expect("Borel");
                    lz::LatticeSpec::from_rs(&p0)?
                }
                None => lz::LatticeSpec::standard(*rank)?,
            };
            if spec.rank > 3 && *side > 10 {
                return Err(Failure::Validation("rank 4 checks need --side ≤ 10".into()));
            }
            let thr = lz::hashed_thresholds(c.seed, lower + lo, lower + hi);
            let part = lz::lattice_partition(&spec, *lower, &thr)?;
            let chk = lz::check_partition(&part, *side);
            let mut o = Outcome::new(json!({"spec": spec, "partition": part, "check": chk}));
            o.require(chk.ok(), "partition is not a disjoint cover with M' ≥ M_a");
            Ok(o)
        }
        Cmd::LocalZetaGl1gl2 { q, x, y, u } => {
            let qq = parse_rat(q, "q")?;
            let vals = vec![parse_rat(u, "u")?, parse_rat(x, "x")?, parse_rat(y, "y")?];
            let pt = RationalFunctionPoint::new(qq.clone(), PointMode::QPower, vals.clone())?;
            let main = lz::unramified_gl1gl2_identity(&pt, 10)?;
            let diag = lz::gl1gl2_diagonal_identity(&vals[0], &vals[1], 10)?;
            let mut lines = Vec::new();
            for k in -2..=2 {
                lines.push(lz::gl1gl2_line_check(&qq, &(rat::q(k) + rat::half()))?);
            }
            let mut random = Vec::new();
            for _ in 0..20 {
                random.push(lz::unramified_gl1gl2_identity(&lz::random_gl1gl2_point(&mut rng), 10)?);
            }
            let mut o = Outcome::new(json!({
                "point": main,
                "diagonal_limit": diag,
                "line": lines,
                "random_points": random.iter().map(|r| json!({"point": r.point, "lhs": r.lhs, "ok": r.ok()})).collect::<Vec<_>>(),
            }));
            o.require(main.ok(), "identity fails at the given point");
            o.require(diag, "the x = y limit fails");
            o.require(lines.iter().all(|l| l.numerators_agree && l.limits_agree && l.first_term_finite), "the line check fails");
            o.require(random.iter().all(|r| r.ok()), "identity fails at a random point");
            Ok(o)
        }
        Cmd::LocalSupport { m } => {
            let reg = inp.registry(c, lz::local_registry())?;
            let p = inp.pair(c, &reg)?;
            let ms: Vec<Side> = match m.as_str() {
                "n" => vec![Side::N],
                "n+1" => vec![Side::Np1],
                "both" => vec![Side::Np1, Side::N],
                _ => return Err(Failure::Validation(format!("--m must be n, n+1 or both, got {m}"))),
            };
            let mut o = Outcome::new(Value::Null);
            let mut reports = Vec::new();
            for s in ms {
                let r = lz::support_classification(&p, &reg, s)?;
                o.require(r.agree, &format!("m = {}: support differs from the prediction", r.m));
                reports.push(r);
            }
            let w = lz::local_factorization_witness(&p, &reg)?;
            o.require(w.schedules_agree, "the two schedules give different terms");
            o.result = json!({"pair": p.to_json(), "support": reports, "witness": w});
            Ok(o)
        }
        Cmd::ExampleGl1gl2 => example_gl1gl2(c),
    }
}

fn example_gl1gl2(c: &Common) -> Result<Outcome, Failure> {
    let reg = AtomRegistry::trivial();
    let p = InducingPair::from_json(r#"{"family1": [], "family2": [{"r": 1, "d": 2, "atom": "1"}]}"#, &reg)?;
    let l = Layout::new(&p, &reg);
    let f = rel::singular_forms(&p, &l);
    let (plus, minus) = f.render(&l.names);
    let (_, inter) = rel::intersection_check(&p, &l, &f)?;
    let r = rel::global_residue_pipeline(&p, &reg, &[])?;
    let v = r.on_a_pi_mero.evaluate(&[Complex64::new(0.2, 0.0)], &Default::default())?;
    let xi2 = rsres::special::xi(Complex64::new(2.0, 0.0)).re;
    let xi_err = (xi2 - std::f64::consts::PI / 6.0).abs();
    let spot = RationalFunctionPoint::new(rat::q(2), PointMode::QPower, vec![rat::qf(1, 7), rat::qf(1, 3), rat::qf(1, 5)])?;
    let local = lz::unramified_gl1gl2_identity(&spot, 10)?;
    let lreg = lz::local_registry();
    let support_np1 = lz::support_classification(&p, &lreg, Side::Np1)?;
    let support_n = lz::support_classification(&p, &lreg, Side::N)?;
    let mut o = Outcome::new(json!({
        "global": {
            "coordinates": l.names,
            "L_plus": plus,
            "L_minus": minus,
            "intersection": inter,
            "kernel": r.kernel,
            "kernel_residue": r.result,
            "on_a_pi": r.on_a_pi,
            "order_independence": r.order_independent,
            "cl": r.cl,
            "numeric_value_at_0.2": numeric(v.re, c.digits),
            "numeric_xi_2": numeric(xi2, c.digits),
            "numeric_xi_2_error": numeric(xi_err, 3),
        },
        "local": {
            "partial_fraction_identity": local.partial_fraction_identity,
            "identity_i": local.series_identity,
            "value": local.lhs,
            "support_n+1": lz::support_summary(&support_np1),
            "support_n": lz::support_summary(&support_n),
        },
    }));
    o.require(r.order_independent, "order dependence");
    o.require(xi_err < 1e-10, "ξ(2) differs from π/6");
    o.require(v.re.is_finite() && v.re != 0.0, "the residue is not finite and nonzero");
    o.require(local.ok(), "local identity fails");
    o.require(support_np1.agree && support_n.agree, "local support differs from the prediction");
    Ok(o)
}

fn command_name(cmd: &Cmd) -> &'static str {
    match cmd {
        Cmd::EnumerateRs => "enumerate-rs",
        Cmd::PairValidate => "pair-validate",
        Cmd::PairForms => "pair-forms",
        Cmd::PairResidues => "pair-residues",
        Cmd::PairCriterion => "pair-criterion",
        Cmd::PairWeyl => "pair-weyl",
        Cmd::ConesFt { .. } => "cones-ft",
        Cmd::LocalPartition { .. } => "local-partition",
        Cmd::LocalZetaGl1gl2 { .. } => "local-zeta-gl1gl2",
        Cmd::LocalSupport { .. } => "local-support",
        Cmd::ExampleGl1gl2 => "example-gl1gl2",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut inp = Inputs { hasher: Sha256::new() };
    // the arguments themselves are part of the input, minus the output location
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut skip = false;
    for a in &args {
        if skip {
            skip = false;
            continue;
        }
        if a == "--out" {
            skip = true;
            continue;
        }
        if a.starts_with("--out=") {
            continue;
        }
        inp.hasher.update(a.as_bytes());
        inp.hasher.update([0]);
    }
    let name = command_name(&cli.cmd);
    let (result, failures, code) = match run(&cli.cmd, &cli.common, &mut inp) {
        Ok(o) => {
            let code = if o.failures.is_empty() { 0 } else { 3 };
            for f in &o.failures {
                eprintln!("rsres {name}: {f}");
            }
            (o.result, o.failures, code)
        }
        Err(Failure::Validation(m)) => {
            eprintln!("rsres {name}: {m}");
            (json!({"error": m}), vec![], 2)
        }
        Err(Failure::Assertion(m)) => {
            eprintln!("rsres {name}: {m}");
            (json!({"error": m}), vec![m], 3)
        }
    };
    let versions: serde_json::Map<String, Value> = std::iter::once(("rsres".to_string(), json!(rsres::VERSION)))
        .chain(rsres::MODULE_VERSIONS.iter().map(|(k, v)| (k.to_string(), json!(v))))
        .collect();
    let report = json!({
        "command": name,
        "seed": cli.common.seed,
        "digits": cli.common.digits.clamp(1, 15),
        "input_sha256": format!("{:x}", inp.hasher.finalize()),
        "versions": versions,
        "status": match code { 0 => "ok", 2 => "validation-failure", _ => "assertion-failure" },
        "failures": failures,
        "result": result,
    });
    let text = serde_json::to_string_pretty(&report).expect("serializable") + "\n";
    match &cli.common.out {
        Some(p) => {
            if let Err(e) = std::fs::write(p, &text) {
                eprintln!("rsres: cannot write {}: {e}", p.display());
                return ExitCode::from(2);
            }
        }
        None => print!("{text}"),
    }
    ExitCode::from(code)
}
