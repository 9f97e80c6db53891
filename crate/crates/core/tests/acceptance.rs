//! End-to-end acceptance run. Each criterion prints one PASS/FAIL line; the test fails
//! if any of them fails.

use num::complex::Complex64;
use num::{One, Signed};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rsres::cones::{cone_pairs, quad_ft_cone, sample_lambda, support_violations, GammaFamily, Poly};
use rsres::formal_mero::{default_names, AffineForm, AtomKind, FormalMero};
use rsres::lfactors::{compare_c_formulas, speh_rs_l, steinberg_rs_l_local, supercuspidal_l_local, AtomRegistry, Block, LocalData, Scope, SpehDatum};
use rsres::local_zeta::{
    all_pairs, check_partition, hashed_thresholds, lattice_partition, local_registry, random_gl1gl2_point, series_partial, series_tail,
    support_classification, unramified_gl1gl2_identity, LatticeSpec, PointMode, RationalFunctionPoint,
};
use rsres::parabolic::BlockParabolic;
use rsres::quad::QuadConfig;
use rsres::rat::{self, q, qf, Q};
use rsres::relevance::{
    global_residue_pipeline, intersection_check, random_order, random_pair, residue_weyl_data, sigma1_products_check, singular_forms, GPerm,
    InducingPair, Layout, Side,
};
use rsres::rs::{brute_force_rs, enumerate_rs, RSParabolic};
use rsres::special::xi;
use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::time::Instant;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn small_registry() -> AtomRegistry {
    AtomRegistry::from_json(
        r#"{"atoms":[{"id":"1","rank":1},{"id":"s","rank":1},{"id":"c1","rank":1},{"id":"c2","rank":1},{"id":"p","rank":2}],
            "dual_pairs":[["1","1"],["p","p"]]}"#,
    )
    .unwrap()
}

fn char_registry() -> AtomRegistry {
    AtomRegistry::from_json(
        r#"{"atoms":[{"id":"1","rank":1},{"id":"chi","rank":1},{"id":"chiv","rank":1},{"id":"eta","rank":1}],
            "dual_pairs":[["1","1"],["chi","chiv"]],
            "match_sets":[{"x":{"id":"eta"},"y":{"id":"1"},"t":["1/3"]}]}"#,
    )
    .unwrap()
}

fn rs_census() -> Outcome {
    let start = Instant::now();
    let one = enumerate_rs(1);
    let labels: BTreeSet<String> = one.iter().map(|p| p.to_string()).collect();
    let want: BTreeSet<String> = ["((2), i0=1)", "((1,1), i0=2)", "((1,1), i0=1)"].iter().map(|s| s.to_string()).collect();
    ensure(one.len() == 3 && labels == want, || format!("n = 1 gives {labels:?}"))?;
    // G, the Borel P_0 and its opposite in the H-sense
    let roots = |p: &RSParabolic| p.p_np1.root_set();
    ensure(one.iter().any(|p| roots(p) == BlockParabolic::full(2).root_set()), || "G missing".into())?;
    ensure(one.iter().any(|p| roots(p) == BTreeSet::from([(0, 1)])), || "P_0 missing".into())?;
    ensure(one.iter().any(|p| roots(p) == BTreeSet::from([(1, 0)])), || "opposite P_0 missing".into())?;
    let mut counts = Vec::new();
    for n in 1..=4 {
        let ours: BTreeSet<_> = enumerate_rs(n).iter().map(|p| p.p_np1.root_set()).collect();
        let brute: BTreeSet<_> = brute_force_rs(n).iter().map(|p| p.root_set()).collect();
        ensure(ours == brute && enumerate_rs(n).len() == ours.len(), || format!("n = {n}: {} vs {}", ours.len(), brute.len()))?;
        counts.push(ours.len());
    }
    let t = start.elapsed().as_secs_f64();
    ensure(t < 10.0, || format!("took {t:.1} s"))?;
    Ok(format!("counts {counts:?} in {t:.2} s"))
}

fn defining_property() -> Outcome {
    let mut total = 0;
    for n in 1..=4 {
        for p in enumerate_rs(n) {
            let cut: BTreeSet<(usize, usize)> = p.p_np1.root_set().into_iter().filter(|&(i, j)| i < n && j < n).collect();
            let p_h = BlockParabolic::standard(&p.p_h).root_set();
            ensure(cut == p_h, || format!("{p}: P_(n+1) ∩ GL_n differs from P_H"))?;
            total += 1;
        }
    }
    Ok(format!("{total} parabolics"))
}

fn cone_ft() -> Outcome {
    let cfg = QuadConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    let mut per_rank = BTreeMap::new();
    let mut by_rank: BTreeMap<usize, Vec<_>> = BTreeMap::new();
    for n in 1..=2 {
        for cp in cone_pairs(n, 1, 2) {
            let f = cp.ft_cone(&Poly::one(n));
            by_rank.entry(cp.coweights.len()).or_default().push((cp, f));
        }
    }
    // 50 general-position λ for every cone pair of rank 1 and 2
    for (rank, pairs) in &by_rank {
        for (cp, f) in pairs.iter().flat_map(|p| std::iter::repeat(p).take(50)) {
            let lam = sample_lambda(cp, &mut rng);
            let exact = f.eval_c(&lam);
            let (num, tail) = quad_ft_cone(cp, &lam, &cfg).map_err(err)?;
            let rel = (exact - num).norm() / exact.norm();
            ensure(rel <= 1e-8 && tail < 1e-12, || format!("{} ⊂ {} at {lam:?}: {exact} vs {num}", cp.p, cp.q))?;
            worst = worst.max(rel);
            *per_rank.entry(*rank).or_insert(0) += 1;
        }
    }
    ensure(per_rank.len() == 2 && per_rank.values().all(|&c| c >= 50), || format!("samples per rank {per_rank:?}"))?;
    let mut pairs = 0;
    for n in 1..=2 {
        for cp in cone_pairs(n, 1, 2) {
            let fam = GammaFamily::new(&cp.p, &cp.q).map_err(err)?;
            let v = support_violations(&fam, 10_000, &mut rng);
            ensure(v == 0, || format!("{} ⊂ {}: {v} points outside the ball", cp.p, cp.q))?;
            pairs += 1;
        }
    }
    Ok(format!("worst relative error {worst:.1e}, samples {per_rank:?}, Γ-support on {pairs} pairs"))
}

fn gl1gl2_global() -> Outcome {
    let reg = AtomRegistry::trivial();
    let pair = InducingPair::from_json(r#"{"family1": [], "family2": [{"r":1,"d":2,"atom":"1"}]}"#, &reg).map_err(err)?;
    let layout = Layout::new(&pair, &reg);
    let forms = singular_forms(&pair, &layout);
    let (plus, minus) = forms.render(&layout.names);
    ensure(plus == ["-(a+c+1/2)"] && minus == ["a+b-1/2"], || format!("forms {plus:?} {minus:?}"))?;
    let (line, _) = intersection_check(&pair, &layout, &forms).map_err(err)?;
    ensure(line.dim() == 1, || format!("intersection has dimension {}", line.dim()))?;
    // a + c = −1/2 and a + b = 1/2, checked on an independent parametrization
    for t in [q(0), qf(1, 3), q(-2), qf(7, 5)] {
        let pt = [t.clone(), rat::half() - &t, -rat::half() - &t];
        ensure(line.contains_point(&pt), || format!("line misses a = {t}"))?;
    }
    ensure(!line.contains_point(&[q(0), q(0), q(0)]), || "line contains the origin".into())?;
    let r = global_residue_pipeline(&pair, &reg, &[vec![1, 0]]).map_err(err)?;
    ensure(r.order_independent, || "orders disagree".into())?;
    let v = r.on_a_pi_mero.evaluate(&[Complex64::new(0.2, 0.0)], &Default::default()).map_err(err)?;
    ensure(v.is_finite() && v.norm() > 1e-12, || format!("value {v}"))?;
    let x2 = xi(Complex64::new(2.0, 0.0));
    let e = (x2 - Complex64::new(std::f64::consts::PI / 6.0, 0.0)).norm();
    ensure(e < 1e-10, || format!("ξ(2) = {x2}"))?;
    Ok(format!("value at 0.2 = {:.10}, |ξ(2) − π/6| = {e:.1e}", v.re))
}

fn order_independence() -> Outcome {
    let reg = small_registry();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut nonempty = 0;
    let pairs = 12;
    for _ in 0..pairs {
        let p = random_pair(&reg, 6, &mut rng);
        let l = Layout::new(&p, &reg);
        let f = singular_forms(&p, &l);
        let extra: Vec<Vec<usize>> = (0..3).map(|_| random_order(&f, &mut rng)).collect();
        let r = global_residue_pipeline(&p, &reg, &extra).map_err(err)?;
        ensure(r.order_independent, || format!("{}", p.to_json()))?;
        if !f.is_empty() {
            nonempty += 1;
        }
    }
    Ok(format!("{pairs} pairs, {nonempty} with singular forms"))
}

/// Multiplicity of the shift (d+d')/2 − k in the double loop, k = 1..d+d'−1.
fn speh_oracle(d: usize, dp: usize) -> BTreeMap<Q, i64> {
    let mut m = BTreeMap::new();
    for k in 1..d + dp {
        let mult = k.min(d).min(dp).min(d + dp - k);
        m.insert(qf((d + dp) as i64, 2) - q(k as i64), mult as i64);
    }
    m
}

fn speh_factorization() -> Outcome {
    let reg = char_registry();
    let names = default_names(1);
    let s = AffineForm::var(1, 0);
    let atoms = ["1", "chi", "eta"];
    let mut cases = 0;
    for d in 1..=4 {
        for dp in 1..=4 {
            let x = reg.atom("chi").map_err(err)?;
            let y = reg.atom("chiv").map_err(err)?;
            let f = speh_rs_l(&reg, &names, &SpehDatum::new(x, d), &SpehDatum::new(y, dp), &s).map_err(err)?;
            let got: BTreeMap<Q, i64> = f.atoms.iter().map(|(a, &e)| (a.arg.constant.clone(), e)).collect();
            ensure(f.atoms.keys().all(|a| a.arg.coeffs == s.coeffs), || "argument is not s + shift".into())?;
            ensure(got == speh_oracle(d, dp), || format!("d = {d}, d' = {dp}: {got:?}"))?;
            for a in atoms {
                for b in atoms {
                    let (x, y) = (reg.atom(a).map_err(err)?, reg.atom(b).map_err(err)?);
                    let l12 = steinberg_rs_l_local(&reg, &names, d, dp, &x, &y, &s).map_err(err)?;
                    let l21 = steinberg_rs_l_local(&reg, &names, dp, d, &y, &x, &s).map_err(err)?;
                    ensure(l12 == l21, || format!("St({a},{d}) × St({b},{dp}) not symmetric"))?;
                    // ∏_{i ≤ min} L(s + (d+d')/2 − i, x × y)
                    let mut want = FormalMero::one(&names);
                    for i in 1..=d.min(dp) {
                        let sh = qf((d + dp) as i64, 2) - q(i as i64);
                        want = want.mul(&supercuspidal_l_local(&reg, &names, &x, &y, &s.plus_const(&sh)).map_err(err)?).map_err(err)?;
                    }
                    ensure(l12 == want, || format!("St({a},{d}) × St({b},{dp}): {l12} vs {want}"))?;
                    ensure(l12.atoms.keys().all(|a| a.kind == AtomKind::LocalZeta), || "non-local atom".into())?;
                    cases += 1;
                }
            }
        }
    }
    Ok(format!("16 Speh pairs, {cases} Steinberg cases"))
}

fn c_coefficients() -> Outcome {
    let reg = char_registry();
    let ids = ["1", "chi", "chiv", "eta"];
    let mut tuples: Vec<Vec<&str>> = Vec::new();
    for a in ids {
        for b in ids {
            tuples.push(vec![a, b]);
            for c in ids {
                tuples.push(vec![a, b, c]);
            }
        }
    }
    let mut compared = 0;
    for t in &tuples {
        let k = t.len();
        let data = LocalData::new(t.iter().enumerate().map(|(i, a)| Block::new(reg.atom(a).unwrap(), 1, AffineForm::var(k, i))).collect());
        for c in compare_c_formulas(&reg, &default_names(k), &data).map_err(err)? {
            ensure(c.agree, || format!("{t:?}: {c:?}"))?;
            compared += 1;
        }
    }
    Ok(format!("{} Borel data, {compared} (Q, w) comparisons", tuples.len()))
}

fn lattice_partitions() -> Outcome {
    let start = Instant::now();
    let mut specs = vec![];
    for r in 1..=3 {
        specs.push(LatticeSpec::standard(r).map_err(err)?);
    }
    specs.push(LatticeSpec::new(vec![vec![1, 1], vec![0, 1]]).map_err(err)?);
    specs.push(LatticeSpec::new(vec![vec![1, 2, 0], vec![0, 1, 1], vec![0, 0, 1]]).map_err(err)?);
    for n in 1..=3 {
        let p0 = RSParabolic::standard_all(n).into_iter().find(|p| p.m() == n + 1).unwrap();
        specs.push(LatticeSpec::from_rs(&p0).map_err(err)?);
    }
    let mut cosets = 0;
    for (k, spec) in specs.iter().enumerate() {
        for seed in 0..3u64 {
            let m = seed as i64 - 1;
            let part = lattice_partition(spec, m, &hashed_thresholds(seed * 31 + k as u64, m - 1, m + 5)).map_err(err)?;
            let c = check_partition(&part, 50);
            ensure(c.ok(), || format!("spec {k}, seed {seed}: {c:?}"))?;
            ensure(part.cosets.iter().all(|c| c.m_prime >= c.threshold), || format!("spec {k}: M' < M"))?;
            cosets += part.cosets.len();
        }
    }
    let t = start.elapsed().as_secs_f64();
    ensure(t < 30.0, || format!("took {t:.1} s"))?;
    Ok(format!("{} lattices, {cosets} cosets in {t:.2} s", specs.len()))
}

/// ζ_q(c−b)ζ_q(a+b+1/2) + ζ_q(b−c)ζ_q(a+c+1/2) and ζ_q(a+b+1/2)ζ_q(a+c+1/2) from
/// u = q^{−(a+1/2)}, x = q^{−b}, y = q^{−c}.
fn unramified_oracle(u: &Q, x: &Q, y: &Q) -> (Q, Q) {
    let z = |t: Q| (Q::one() - t).recip();
    let lhs = z(y / x) * z(u * x) + z(x / y) * z(u * y);
    let rhs = z(u * x) * z(u * y);
    (lhs, rhs)
}

fn unramified_identity() -> Outcome {
    let mut pts = vec![RationalFunctionPoint::new(q(2), PointMode::QPower, vec![qf(1, 7), qf(1, 3), qf(1, 5)]).map_err(err)?];
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    pts.extend((0..20).map(|_| random_gl1gl2_point(&mut rng)));
    let mut worst_tail = 0.0f64;
    for (i, pt) in pts.iter().enumerate() {
        let (u, x, y) = (pt.values[0].clone(), pt.values[1].clone(), pt.values[2].clone());
        let (lhs, rhs) = unramified_oracle(&u, &x, &y);
        ensure(lhs == rhs, || format!("oracle fails at {pt:?}"))?;
        let r = unramified_gl1gl2_identity(pt, 10).map_err(err)?;
        ensure(r.ok() && r.lhs == rat::fmt_q(&lhs), || format!("point {i}: {} vs {}", r.lhs, rat::fmt_q(&lhs)))?;
        if i == 0 {
            ensure(lhs == qf(147, 136) && r.lhs == "147/136", || format!("spot value {}", r.lhs))?;
        }
        // truncated series against the closed form
        let n = r.tail_n;
        let gap = rat::to_f64(&(&rhs - series_partial(n, &u, &x, &y)).abs());
        let tail = rat::to_f64(&series_tail(n, &u, &x, &y).abs());
        ensure(gap < 1e-12 && (gap - tail).abs() <= 1e-15, || format!("point {i}: gap {gap:e} at N = {n}"))?;
        worst_tail = worst_tail.max(gap);
    }
    Ok(format!("{} points, spot 147/136, worst tail {worst_tail:.1e}", pts.len()))
}

fn local_support() -> Outcome {
    let reg = local_registry();
    let pairs = all_pairs(&reg, 2, Scope::Local);
    let mut cases = 0;
    let mut nonvacuous = 0;
    for p in &pairs {
        for m in [Side::Np1, Side::N] {
            let r = support_classification(p, &reg, m).map_err(err)?;
            ensure(r.agree, || format!("{} m = {m:?}", p.to_json()))?;
            cases += r.cases.len();
            if !r.order.is_empty() {
                nonvacuous += r.cases.len();
            }
        }
    }
    ensure(pairs.iter().all(|p| p.n() <= 2), || "pair with n > 2".into())?;
    Ok(format!("{} pairs, {cases} (Q, w) cases, {nonvacuous} with restrictions", pairs.len()))
}

fn weyl_consistency() -> Outcome {
    let reg = small_registry();
    let mut pairs: Vec<InducingPair> = all_pairs(&reg, 2, Scope::Global);
    let mut rng = ChaCha8Rng::seed_from_u64(123);
    pairs.extend((0..40).map(|_| random_pair(&reg, 6, &mut rng)));
    for p in &pairs {
        let w = residue_weyl_data(p, &reg).map_err(err)?;
        let layout = Layout::new(p, &reg);
        let coords = |g: &GPerm| GPerm { n: layout.to_coords(Side::N, &g.n), np1: layout.to_coords(Side::Np1, &g.np1) };
        let a = coords(&w.w1_cells.compose(&w.w_star_pi_np1_cells));
        let b = coords(&w.w2_cells.compose(&w.w_star_pi_n_cells));
        let pa = w.p_pi.conjugate(&a).map_err(err)?;
        let pb = w.p_pi.conjugate(&b).map_err(err)?;
        ensure(pa.same_levi(&pb), || format!("{}: w1 w*_(n+1).P_pi != w2 w*_n.P_pi", p.to_json()))?;
        ensure(w.p_res.is_contained_in(&w.p_plus), || format!("{}: P_res ⊄ P_+", p.to_json()))?;
        let s = sigma1_products_check(p, &reg, 6, &mut rng).map_err(err)?;
        ensure(s.first_identity && s.second_identity, || format!("{}: product identities", p.to_json()))?;
    }
    Ok(format!("{} pairs", pairs.len()))
}

/// Writes to the process stdout directly so the lines show up without --nocapture.
fn report(line: &str) {
    let mut out = std::io::stdout().lock();
    writeln!(out, "{line}").unwrap();
    out.flush().unwrap();
}

#[test]
fn acceptance() {
    let criteria: Vec<(&str, fn() -> Outcome)> = vec![
        ("1 RS-parabolic census", rs_census),
        ("2 defining property", defining_property),
        ("3 cone Fourier transforms", cone_ft),
        ("4 GL1xGL2 global example", gl1gl2_global),
        ("5 residue order independence", order_independence),
        ("6 Speh and Steinberg L-factors", speh_factorization),
        ("7 c-coefficient formulas", c_coefficients),
        ("8 lattice partitions", lattice_partitions),
        ("9 unramified local identity", unramified_identity),
        ("10 local support classification", local_support),
        ("11 Weyl data consistency", weyl_consistency),
    ];
    let mut failed = Vec::new();
    for (name, f) in criteria {
        let start = Instant::now();
        let out = std::panic::catch_unwind(f).unwrap_or_else(|e| {
            Err(e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let t = start.elapsed().as_secs_f64();
        match out {
            Ok(detail) => report(&format!("PASS {name}: {detail} [{t:.2} s]")),
            Err(e) => {
                report(&format!("FAIL {name}: {e} [{t:.2} s]"));
                failed.push(name);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
