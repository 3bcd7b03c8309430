use bcscg_ds::geometry::{first_primes, halton_value, REFLECTOR_TOL};
use bcscg_ds::{equiangular_basis, householder_matrix, rotate_basis, HaltonCursor};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn unit_vector(n: usize) -> impl Strategy<Value = DVector<f64>> {
    prop::collection::vec(-1.0f64..1.0, n)
        .prop_filter("away from the origin", |v| v.iter().map(|x| x * x).sum::<f64>() > 1e-4)
        .prop_map(|v| {
            let d = DVector::from_vec(v);
            let norm = d.norm();
            d / norm
        })
}

fn unit_pair() -> impl Strategy<Value = (DVector<f64>, DVector<f64>)> {
    (1usize..12).prop_flat_map(|n| (unit_vector(n), unit_vector(n)))
}

/// Radical inverse as an exact fraction `num / base^k`.
fn radical_inverse_fraction(mut index: u64, base: u64) -> f64 {
    let mut num: u128 = 0;
    let mut den: u128 = 1;
    while index > 0 {
        num = num * base as u128 + (index % base) as u128;
        den *= base as u128;
        index /= base;
    }
    num as f64 / den as f64
}

proptest! {
    #[test]
    fn equiangular_invariants(n in 1usize..80) {
        let b = equiangular_basis(n);
        prop_assert_eq!(b.len(), n + 1);
        let (norm_err, dot_err, sum) = b.invariant_residuals();
        prop_assert!(norm_err <= 1e-12);
        prop_assert!(dot_err <= 1e-10);
        prop_assert!(sum <= 1e-10);
    }

    #[test]
    fn householder_reflects_d_onto_u((d, u) in unit_pair()) {
        prop_assume!((&d - &u).norm() > 1e-6);
        let h = householder_matrix(&d, &u).unwrap();
        let n = d.len();
        prop_assert!((&h - h.transpose()).amax() <= 1e-10);
        prop_assert!((h.transpose() * &h - DMatrix::identity(n, n)).amax() <= 1e-10);
        prop_assert!((&h * &d - &u).amax() <= 1e-10);
    }

    #[test]
    fn rotation_preserves_basis_and_hits_target(n in 1usize..25, seed in 0u64..500) {
        let base = equiangular_basis(n);
        let mut cursor = HaltonCursor::starting_at(n, 1 + seed);
        let u = cursor.next_direction();
        let rotated = rotate_basis(&base, &u);
        let (norm_err, dot_err, sum) = rotated.invariant_residuals();
        prop_assert!(norm_err <= 1e-10 && dot_err <= 1e-10 && sum <= 1e-10);
        prop_assert!((rotated.first() - &u).amax() <= 1e-10);
    }

    /// Every nonzero vector makes an angle with cosine at most `−1/n` with
    /// some direction of the regular simplex, so the set positively spans.
    #[test]
    fn positive_spanning(g in (1usize..20).prop_flat_map(unit_vector), seed in 0u64..100) {
        let n = g.len();
        let base = rotate_basis(&equiangular_basis(n), &HaltonCursor::starting_at(n, 1 + seed).next_direction());
        let best = base.directions().iter().map(|d| d.dot(&g)).fold(f64::INFINITY, f64::min);
        prop_assert!(best <= -1.0 / n as f64 + 1e-10);
    }

    #[test]
    fn halton_matches_exact_fraction(index in 0u64..1_000_000, k in 0usize..10) {
        let base = first_primes(10)[k];
        let h = halton_value(index, base);
        prop_assert!((0.0..1.0).contains(&h));
        prop_assert!((h - radical_inverse_fraction(index, base)).abs() <= 1e-14);
    }

    #[test]
    fn halton_directions_are_unit(n in 1usize..50, start in 1u64..10_000) {
        let mut c = HaltonCursor::starting_at(n, start);
        for _ in 0..5 {
            let before = c.index();
            let d = c.next_direction();
            prop_assert!(c.index() > before);
            prop_assert!((d.norm() - 1.0).abs() <= 1e-12);
        }
    }
}

#[test]
fn first_primes_match_sieve() {
    let limit = 600;
    let mut composite = vec![false; limit];
    let mut sieve = Vec::new();
    for i in 2..limit {
        if !composite[i] {
            sieve.push(i as u64);
            for j in (i * i..limit).step_by(i) {
                composite[j] = true;
            }
        }
    }
    assert_eq!(first_primes(sieve.len()), sieve);
}

#[test]
fn coincident_reflection_is_degenerate() {
    let d = equiangular_basis(4).first().clone();
    assert!(householder_matrix(&d, &d).is_err());
    let nudged = &d + DVector::from_element(4, REFLECTOR_TOL / 10.0);
    assert!(householder_matrix(&d, &nudged).is_err());
    assert_eq!(rotate_basis(&equiangular_basis(4), &d), equiangular_basis(4));
}
