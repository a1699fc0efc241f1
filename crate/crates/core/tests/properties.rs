//! Property tests for the scalar field and the matrix layer: exact ring
//! axioms, agreement between exact and floating-point evaluation, inverse
//! laws, zero-set soundness, and trace invariance under bounded similarity.

use num_rational::BigRational;
use ovjordan::opmatrix::OpMatrix;
use ovjordan::partition::Partition;
use ovjordan::piecewise::{CellZeroSet, PiecewiseRational};
use ovjordan::poly::Poly;
use ovjordan::ratfunc::RatFunc;
use ovjordan::rational::{ratio, rational_to_f64, Gq};
use ovjordan::realroots::RootLoc;
use proptest::prelude::*;

fn small_rational() -> impl Strategy<Value = BigRational> {
    (-6i64..=6, 1i64..=4).prop_map(|(p, q)| ratio(p, q))
}

fn gq() -> impl Strategy<Value = Gq> {
    (
        small_rational(),
        prop_oneof![Just(BigRational::from_integer(0.into())), small_rational()],
    )
        .prop_map(|(re, im)| Gq::new(re, im))
}

fn poly(max_deg: usize) -> impl Strategy<Value = Poly> {
    prop::collection::vec(gq(), 0..=max_deg + 1).prop_map(Poly::new)
}

fn partition(max_cells: usize) -> impl Strategy<Value = Partition> {
    prop::collection::btree_set(2i64..=11, 0..max_cells).prop_map(|cuts| {
        let mut points = vec![ratio(0, 1), ratio(1, 1)];
        for q in cuts {
            points.push(ratio(1, q));
        }
        points.sort();
        points.dedup();
        Partition::new(points).unwrap()
    })
}

/// Piecewise-rational value with polynomial cells (degree <= 4, <= 4 cells).
fn scalar() -> impl Strategy<Value = PiecewiseRational> {
    (partition(3), prop::collection::vec(poly(4), 4)).prop_map(|(part, polys)| {
        let cells: Vec<RatFunc> = (0..part.cell_count())
            .map(|i| RatFunc::from_poly(polys[i % polys.len()].clone()))
            .collect();
        PiecewiseRational::new(part, cells).unwrap()
    })
}

/// Sample points of [0, 1] avoiding breakpoints.
fn sample_points(n: usize) -> Vec<BigRational> {
    (0..n)
        .map(|k| ratio(2 * k as i64 + 1, 2 * n as i64 + 1))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn ring_axioms_exact(f in scalar(), g in scalar(), h in scalar()) {
        let fg_h = f.add(&g).unwrap().add(&h).unwrap();
        let f_gh = f.add(&g.add(&h).unwrap()).unwrap();
        prop_assert!(fg_h.eq_fn(&f_gh));
        let dist_l = f.mul(&g.add(&h).unwrap()).unwrap();
        let dist_r = f.mul(&g).unwrap().add(&f.mul(&h).unwrap()).unwrap();
        prop_assert!(dist_l.eq_fn(&dist_r));
        let comm_l = f.mul(&g).unwrap();
        let comm_r = g.mul(&f).unwrap();
        prop_assert!(comm_l.eq_fn(&comm_r));
    }

    #[test]
    fn exact_matches_float(f in scalar(), g in scalar()) {
        let prod = f.mul(&g).unwrap();
        for x in sample_points(25) {
            let exact = prod.eval(&x).unwrap();
            let approx = f.eval_c64(&x) * g.eval_c64(&x);
            let exact_f = exact.to_c64();
            let denom = 1.0 + exact_f.norm();
            prop_assert!((exact_f - approx).norm() / denom <= 1e-9);
        }
    }

    #[test]
    fn inverse_law(f in scalar()) {
        match f.invert() {
            Ok(inv) => {
                prop_assert!(f.mul(&inv).unwrap().is_one());
            }
            Err(_) => {
                // some cell is identically zero
                prop_assert!(f.cells().iter().any(RatFunc::is_zero));
            }
        }
    }

    #[test]
    fn refine_idempotent(f in scalar(), extra in 2i64..=13) {
        let finer = f.partition().refine_with(&[ratio(1, extra)]);
        let once = f.refine(&finer);
        let twice = once.refine(&finer);
        prop_assert!(once.eq_fn(&twice));
        prop_assert!(f.eq_fn(&once));
    }

    #[test]
    fn zero_set_sound(p in poly(4)) {
        let part = Partition::whole(ratio(0, 1), ratio(1, 1));
        let f = PiecewiseRational::from_polys(part, vec![p]).unwrap();
        for zs in f.zero_set() {
            match zs {
                CellZeroSet::WholeCell => prop_assert!(f.cell(0).is_zero()),
                CellZeroSet::Points(roots) => {
                    for r in roots {
                        match r {
                            RootLoc::Rational(x) => {
                                prop_assert!(f.eval(&x).unwrap().is_zero());
                            }
                            RootLoc::Interval(a, b) => {
                                // a sign change of the real locus across the interval
                                let fa = f.eval(&a).unwrap();
                                let fb = f.eval(&b).unwrap();
                                prop_assert!(!fa.is_zero() && !fb.is_zero());
                            }
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn boundedness_sampling_property() {
    // bounded: samples stay finite and stable under refinement;
    // unbounded: geometric approach to the pole exceeds any fixed bound
    let part = Partition::whole(ratio(0, 1), ratio(1, 1));
    let bounded = PiecewiseRational::new(
        part.clone(),
        vec![RatFunc::new(
            Poly::one(),
            Poly::new(vec![Gq::from_int(1), Gq::from_int(1)]),
        )],
    )
    .unwrap();
    assert!(bounded.is_bounded_everywhere());
    let mut max_seen = 0.0f64;
    for x in sample_points(1000) {
        max_seen = max_seen.max(bounded.eval_c64(&x).norm());
    }
    assert!(max_seen.is_finite() && max_seen <= 1.0);

    let unbounded = PiecewiseRational::new(
        part,
        vec![RatFunc::new(
            Poly::one(),
            Poly::new(vec![Gq::zero(), Gq::from_int(3)]),
        )],
    )
    .unwrap();
    assert_eq!(unbounded.is_bounded(), vec![false]);
    let mut last = 0.0f64;
    for k in 1..=10 {
        let x = ratio(1, 1 << k);
        let v = unbounded.eval_c64(&x).norm();
        assert!(v > last, "approach to the pole must blow up");
        last = v;
    }
    assert!(last > 100.0);
}

#[test]
fn trace_invariance_random_similarities() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
    let part = Partition::whole(ratio(0, 1), ratio(1, 1));
    for _ in 0..20 {
        let n = rng.gen_range(2..=4usize);
        // random diagonal 0/1 idempotent conjugated by a unipotent shear
        let d = OpMatrix::diagonal(
            &(0..n)
                .map(|_| {
                    PiecewiseRational::constant_on(
                        part.clone(),
                        Gq::from_int(if rng.gen_bool(0.5) { 1 } else { 0 }),
                    )
                })
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let mut s = OpMatrix::identity(n, &part);
        let i = rng.gen_range(0..n);
        let j = (i + 1) % n;
        s.set_entry(
            i,
            j,
            PiecewiseRational::from_polys(
                part.clone(),
                vec![Poly::new(vec![
                    Gq::from_int(rng.gen_range(-2..=2)),
                    Gq::from_int(1),
                ])],
            )
            .unwrap(),
        );
        let s_inv = s.inverse().unwrap();
        let p = s.matmul(&d).unwrap().matmul(&s_inv).unwrap();
        let t1 = d.trace_function().unwrap();
        let t2 = p.trace_function().unwrap();
        assert!(t1.eq_fn(&t2));
    }
}

#[test]
fn frame_trace_additivity() {
    // trace functions of a frame sum to n per cell
    let part = Partition::new(vec![ratio(0, 1), ratio(1, 2), ratio(1, 1)]).unwrap();
    let chi = PiecewiseRational::indicator(part.clone(), &[true, false]).unwrap();
    let co_chi = PiecewiseRational::indicator(part.clone(), &[false, true]).unwrap();
    let one = PiecewiseRational::constant_on(part.clone(), Gq::one());
    let zero = PiecewiseRational::constant_on(part.clone(), Gq::zero());
    let p1 = OpMatrix::diagonal(&[chi.clone(), one.clone()]).unwrap();
    let p2 = OpMatrix::diagonal(&[co_chi, zero]).unwrap();
    let t1 = p1.trace_function().unwrap();
    let t2 = p2.trace_function().unwrap();
    let sums: Vec<u32> = t1
        .values
        .iter()
        .zip(t2.values.iter())
        .map(|(a, b)| a + b)
        .collect();
    assert!(sums.iter().all(|&s| s == 2));
    assert!(p1.add(&p2).unwrap().is_identity());
}

#[test]
fn matmul_matches_float_at_samples() {
    let part = Partition::whole(ratio(0, 1), ratio(1, 1));
    let lam = PiecewiseRational::var(ratio(0, 1), ratio(1, 1));
    let one = PiecewiseRational::constant_on(part.clone(), Gq::one());
    let zero = PiecewiseRational::constant_on(part.clone(), Gq::zero());
    let a = OpMatrix::new(
        2,
        vec![
            lam.clone(),
            one.clone(),
            zero.clone(),
            lam.mul(&lam).unwrap(),
        ],
    )
    .unwrap();
    let b = OpMatrix::new(2, vec![one.clone(), lam.clone(), lam.clone(), zero.clone()]).unwrap();
    let prod = a.matmul(&b).unwrap();
    for x in sample_points(1000) {
        let exact = prod.eval_c64(&x);
        let fa = a.eval_c64(&x);
        let fb = b.eval_c64(&x);
        // 2x2 multiply in floats
        let approx = [
            fa[0] * fb[0] + fa[1] * fb[2],
            fa[0] * fb[1] + fa[1] * fb[3],
            fa[2] * fb[0] + fa[3] * fb[2],
            fa[2] * fb[1] + fa[3] * fb[3],
        ];
        for (e, ap) in exact.iter().zip(approx.iter()) {
            let denom = 1.0 + e.norm();
            assert!((e - ap).norm() / denom <= 1e-9, "mismatch at {}", x);
        }
    }
    let _ = rational_to_f64(&ratio(1, 2));
}

#[test]
fn obstruction_quotient_stable_under_refinement() {
    use ovjordan::structure::{self, CanonicalOutcome};
    let lam = PiecewiseRational::var(ratio(0, 1), ratio(1, 1));
    let part = Partition::whole(ratio(0, 1), ratio(1, 1));
    let one = PiecewiseRational::constant_on(part.clone(), Gq::one());
    let zero = PiecewiseRational::constant_on(part.clone(), Gq::zero());
    let m2 = PiecewiseRational::constant_on(part, Gq::from_int(-2));
    let a = OpMatrix::new(2, vec![lam.clone(), one, zero, lam.mul(&m2).unwrap()]).unwrap();
    let quotient = match structure::canonical_form(&a).unwrap() {
        CanonicalOutcome::Obstruction(ob) => ob.quotient,
        _ => panic!(),
    };
    // the quotient is a genuine pole: unbounded on every cell containing 0
    assert!(!quotient.is_bounded_on(&ratio(0, 1), &ratio(1, 8)));
    assert!(!quotient.is_bounded_on(&ratio(0, 1), &ratio(1, 100)));
}
