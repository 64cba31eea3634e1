use fbse::linalg::{reshape, sym_eigen, vectorize};
use fbse::sets::ConvexSet;
use nalgebra::DVector;
use proptest::prelude::*;

fn sets() -> Vec<ConvexSet> {
    vec![
        ConvexSet::nonneg_orthant(4),
        ConvexSet::ball(4, 1.5).unwrap(),
        ConvexSet::simplex(4),
        ConvexSet::psd_cap(3, 2.0).unwrap(),
    ]
}

fn point(set: &ConvexSet, raw: &[f64]) -> DVector<f64> {
    let v = DVector::from_column_slice(&raw[..set.ambient_len()]);
    if set.ambient_len() == set.dim {
        v
    } else {
        let m = reshape(&v, set.dim);
        vectorize(&((&m + m.transpose()) * 0.5))
    }
}

fn raw() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0f64..5.0, 9)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn projection_is_idempotent(r in raw()) {
        for set in sets() {
            let v = point(&set, &r);
            let p = set.project(&v).unwrap();
            let pp = set.project(&p).unwrap();
            prop_assert!((&pp - &p).norm() <= 1e-12 * p.norm().max(1.0));
        }
    }

    #[test]
    fn projection_is_nonexpansive(a in raw(), b in raw()) {
        for set in sets() {
            let (a, b) = (point(&set, &a), point(&set, &b));
            let d = (set.project(&a).unwrap() - set.project(&b).unwrap()).norm();
            prop_assert!(d <= (&a - &b).norm() * (1.0 + 1e-12) + 1e-14);
        }
    }

    #[test]
    fn distance_vanishes_exactly_on_the_set(r in raw()) {
        for set in sets() {
            let v = point(&set, &r);
            let p = set.project(&v).unwrap();
            prop_assert!(set.distance(&p).unwrap() <= 1e-12);
            let d = set.distance(&v).unwrap();
            prop_assert!((d - (&v - &p).norm()).abs() <= 1e-14);
        }
    }

    #[test]
    fn simplex_output_is_a_distribution(r in raw()) {
        let set = ConvexSet::simplex(4);
        let p = set.project(&point(&set, &r)).unwrap();
        prop_assert!((p.sum() - 1.0).abs() <= 1e-12);
        prop_assert!(p.iter().all(|&t| t >= -1e-14));
    }

    #[test]
    fn psd_output_respects_the_cap(r in raw(), scale in 0.1f64..10.0) {
        let set = ConvexSet::psd_cap(3, 2.0).unwrap();
        let v = point(&set, &r) * scale;
        let p = set.project(&v).unwrap();
        let eig = sym_eigen(&reshape(&p, 3)).unwrap().eigenvalues;
        prop_assert!(eig.iter().all(|&l| (-1e-10..=2.0 + 2e-6).contains(&l)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn variational_inequality(r in raw(), zs in prop::collection::vec(raw(), 100)) {
        for set in sets() {
            let v = point(&set, &r);
            let p = set.project(&v).unwrap();
            for z in &zs {
                let z = set.project(&point(&set, z)).unwrap();
                prop_assert!((&v - &p).dot(&(z - &p)) <= 1e-10);
            }
        }
    }
}

#[test]
fn normal_directions_are_unit_and_empty_inside() {
    let set = ConvexSet::nonneg_orthant(3);
    let x = DVector::from_vec(vec![0.0, 1.0, 0.0]);
    let dirs = set.sample_normal_directions(&x, 5, 1).unwrap();
    assert!(dirs.len() >= 2);
    for d in &dirs {
        assert!((d.norm() - 1.0).abs() < 1e-12);
        assert_eq!(d[1], 0.0);
        assert!(d.iter().all(|&t| t <= 0.0));
    }
    let inside = DVector::from_vec(vec![1.0, 1.0, 1.0]);
    assert!(set
        .sample_normal_directions(&inside, 5, 1)
        .unwrap()
        .is_empty());
    assert!(set.sample_normal_directions(&(-inside), 5, 1).is_err());
}
