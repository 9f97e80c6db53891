use num::{One, Signed};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rsres::lfactors::AtomRegistry;
use rsres::local_zeta::{
    check_partition, hashed_thresholds, lattice_partition, series_partial, series_tail, unramified_gl1gl2_identity, zeta_q_at, LatticeSpec,
    PointMode, RationalFunctionPoint,
};
use rsres::parabolic::{conjugate, double_coset_reps, is_coset_rep, BlockParabolic, Composition, Perm};
use rsres::rat::{q, qf, Q};
use rsres::relevance::{global_residue_pipeline, random_order, random_pair, singular_forms, Layout};

fn composition(m: usize) -> impl Strategy<Value = Composition> {
    (0..(1u64 << (m - 1))).prop_map(move |mask| {
        let mut parts = vec![1usize];
        for i in 0..m - 1 {
            if mask >> i & 1 == 1 {
                parts.push(1);
            } else {
                *parts.last_mut().unwrap() += 1;
            }
        }
        Composition { parts }
    })
}

fn perm(m: usize) -> impl Strategy<Value = Perm> {
    Just((0..m).collect::<Vec<usize>>()).prop_shuffle().prop_map(Perm)
}

fn unit_q() -> impl Strategy<Value = Q> {
    (1i64..40, 2i64..41).prop_filter_map("proper fraction", |(a, b)| (a < b).then(|| qf(a, b)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn zeta_times_euler_factor_is_one(qq in 2i64..14, s in -6i64..=6) {
        prop_assume!(s != 0);
        let z = zeta_q_at(&q(qq), &q(s)).unwrap();
        let q_minus_s = Q::from_integer(qq.into()).pow(-s as i32);
        let factor = Q::one() - q_minus_s;
        prop_assert_eq!(z * factor, Q::one());
    }

    #[test]
    fn unramified_identity_holds(u in unit_q(), x in unit_q(), y in unit_q(), qq in 2i64..10) {
        prop_assume!(x != y);
        let pt = RationalFunctionPoint::new(q(qq), PointMode::QPower, vec![u.clone(), x.clone(), y.clone()]).unwrap();
        let r = unramified_gl1gl2_identity(&pt, 6).unwrap();
        prop_assert!(r.ok());
        let closed = ((Q::one() - &u * &x) * (Q::one() - &u * &y)).recip();
        prop_assert_eq!(series_partial(6, &u, &x, &y) + series_tail(6, &u, &x, &y), closed);
        prop_assert!(series_tail(r.tail_n, &u, &x, &y).abs() < qf(1, 1_000_000_000_000));
    }

    #[test]
    fn partitions_cover_disjointly(rank in 1usize..=3, m in -3i64..3, seed in 0u64..1000, span in 0i64..5, skew in -2i64..=2) {
        let spec = if rank >= 2 {
            let mut p: Vec<Vec<i64>> = (0..rank).map(|i| (0..rank).map(|j| i64::from(i == j)).collect()).collect();
            p[0][1] = skew;
            LatticeSpec::new(p).unwrap()
        } else {
            LatticeSpec::standard(rank).unwrap()
        };
        let part = lattice_partition(&spec, m, &hashed_thresholds(seed, m - 1, m + span)).unwrap();
        let c = check_partition(&part, if rank == 3 { 8 } else { 14 });
        prop_assert!(c.ok(), "{:?}", c);
    }

    #[test]
    fn conjugation_round_trip(c in composition(5), w in perm(5)) {
        let p = BlockParabolic::standard(&c);
        let wp = conjugate(&w, &p).unwrap();
        prop_assert_eq!(conjugate(&w.inverse(), &wp).unwrap(), p);
        prop_assert_eq!(w.compose(&w.inverse()), Perm::identity(5));
    }

    #[test]
    fn coset_reps_match_brute_force(c1 in composition(4), c2 in composition(4)) {
        let (p, q) = (BlockParabolic::standard(&c1), BlockParabolic::standard(&c2));
        let brute: Vec<Perm> = Perm::all(4).into_iter().filter(|w| is_coset_rep(w, &p, &q)).collect();
        prop_assert_eq!(double_coset_reps(&p, &q).unwrap(), brute);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn residues_are_order_independent(seed in any::<u64>()) {
        let reg = AtomRegistry::from_json(
            r#"{"atoms":[{"id":"1","rank":1},{"id":"s","rank":1},{"id":"p","rank":2}],"dual_pairs":[["1","1"],["p","p"]]}"#,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pair = random_pair(&reg, 5, &mut rng);
        let forms = singular_forms(&pair, &Layout::new(&pair, &reg));
        let extra: Vec<Vec<usize>> = (0..2).map(|_| random_order(&forms, &mut rng)).collect();
        let r = global_residue_pipeline(&pair, &reg, &extra).unwrap();
        prop_assert!(r.order_independent && r.matches_cl, "{}", pair.to_json());
    }
}
