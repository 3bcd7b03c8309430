use bcscg_ds::problems::{psi, random_start, ProblemKind, BOX_LOWER, BOX_UPPER};
use bcscg_ds::{make_problem, Error, NoisyVariant, Objective, Variant};
use proptest::prelude::*;

fn valid_dimension(kind: ProblemKind) -> impl Strategy<Value = usize> {
    (2usize..30).prop_map(move |n| match kind {
        ProblemKind::ChainedWood => 4 + 2 * (n / 2),
        _ => n,
    })
}

fn any_kind() -> impl Strategy<Value = ProblemKind> {
    prop::sample::select(ProblemKind::ALL.to_vec())
}

proptest! {
    #[test]
    fn psi_is_bounded(x in prop::collection::vec(-50.0f64..50.0, 1..40)) {
        prop_assert!(psi(&x).abs() <= 1.0);
    }

    #[test]
    fn noiseless_variant_is_the_aggregate(
        (kind, n) in any_kind().prop_flat_map(|k| (Just(k), valid_dimension(k))),
        seed in any::<u64>(),
        piecewise in any::<bool>(),
    ) {
        let p = make_problem(kind.name(), n).unwrap();
        let variant = if piecewise { Variant::Piecewise } else { Variant::Smooth };
        let x = random_start(p.domain(), seed);
        let terms = p.terms(x.as_slice());
        let expected: f64 = if piecewise {
            terms.iter().map(|t| t.abs()).sum()
        } else {
            terms.iter().map(|t| t * t).sum()
        };
        let clean = NoisyVariant::new(p.clone(), variant, 0.0).unwrap();
        prop_assert!((clean.value(x.as_slice()) - expected).abs() <= 1e-15 * expected.abs());
        let noisy = NoisyVariant::new(p, variant, 1e-3).unwrap();
        let v = noisy.value(x.as_slice());
        prop_assert!((v - expected).abs() <= 1e-3 * expected.abs() * (1.0 + 1e-12));
    }

    /// Term i only moves when one of its declared variables moves.
    #[test]
    fn declared_sparsity_holds(
        (kind, n) in any_kind().prop_flat_map(|k| (Just(k), valid_dimension(k))),
        seed in any::<u64>(),
        j_frac in 0.0f64..1.0,
    ) {
        let p = make_problem(kind.name(), n).unwrap();
        let x = random_start(p.domain(), seed);
        let j = ((j_frac * n as f64) as usize).min(n - 1);
        let mut y = x.clone();
        y[j] += 0.37;
        let before = p.terms(x.as_slice());
        let after = p.terms(y.as_slice());
        prop_assert_eq!(before.len(), p.term_count());
        for i in 0..p.term_count() {
            if !p.term_variables(i).contains(&j) {
                prop_assert_eq!(before[i], after[i], "term {} moved with x[{}]", i, j);
            }
        }
    }

    #[test]
    fn random_start_is_seeded_and_feasible(n in 1usize..50, seed in any::<u64>()) {
        let p = make_problem("broyden_tridiagonal", n.max(1)).unwrap();
        let a = random_start(p.domain(), seed);
        prop_assert!(p.domain().contains(&a));
        prop_assert_eq!(a, random_start(p.domain(), seed));
    }
}

#[test]
fn random_start_is_centred() {
    let p = make_problem("chained_rosenbrock", 200).unwrap();
    let mut sum = 0.0;
    let mut count = 0.0;
    for seed in 0..50 {
        let x = random_start(p.domain(), seed);
        assert!(x.iter().all(|v| (BOX_LOWER..=BOX_UPPER).contains(v)));
        sum += x.sum();
        count += x.len() as f64;
    }
    // uniform on [−50, 50]: standard error of the mean ≈ 28.9/√10⁴
    assert!((sum / count).abs() < 1.5);
}

#[test]
fn known_zeros() {
    let ones = vec![1.0; 10];
    assert_eq!(
        make_problem("chained_rosenbrock", 10).unwrap().sum_of_squares(&ones),
        0.0
    );
    assert_eq!(make_problem("chained_wood", 10).unwrap().sum_of_squares(&ones), 0.0);
    let fr = make_problem("chained_freudenstein_roth", 2).unwrap();
    assert_eq!(fr.terms(&[5.0, 4.0]), vec![0.0, 0.0]);
}

#[test]
fn catalog_names_round_trip() {
    for kind in ProblemKind::ALL {
        assert_eq!(kind.name().parse::<ProblemKind>().unwrap(), kind);
        assert_eq!(make_problem(kind.name(), 8).unwrap().kind(), kind);
    }
    assert!(matches!(
        make_problem("rosenbrock_typo", 4),
        Err(Error::UnknownProblem(_))
    ));
}
