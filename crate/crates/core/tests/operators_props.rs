use fbse::linalg::{reshape, vectorize};
use fbse::manifold::ConstraintMap;
use fbse::projective::make_projective;
use fbse::random;
use fbse::sets::ConvexSet;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn sym(v: &DVector<f64>, side: usize) -> DVector<f64> {
    let m = reshape(v, side);
    vectorize(&((&m + m.transpose()) * 0.5))
}

fn sets() -> Vec<ConvexSet> {
    vec![
        ConvexSet::nonneg_orthant(4),
        ConvexSet::ball(4, 1.5).unwrap(),
        ConvexSet::simplex(4),
        ConvexSet::psd_cap(2, 2.0).unwrap(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn projective_is_linear_selfadjoint_psd(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let mut rng = random::stream(seed, "projective-props");
        for set in sets() {
            let len = set.ambient_len();
            let mut x = random::normal_vector(&mut rng, len) * 1.5;
            if len != set.dim {
                x = sym(&x, set.dim);
            }
            let q = make_projective(&set, &x).unwrap();
            let d1 = random::normal_vector(&mut rng, len);
            let d2 = random::normal_vector(&mut rng, len);
            let lhs = q.apply(&(&d1 * a + &d2 * b)).unwrap();
            let rhs = q.apply(&d1).unwrap() * a + q.apply(&d2).unwrap() * b;
            prop_assert!((&lhs - &rhs).norm() <= 1e-10 * rhs.norm().max(1.0));
            let s1 = d1.dot(&q.apply(&d2).unwrap());
            let s2 = q.apply(&d1).unwrap().dot(&d2);
            prop_assert!((s1 - s2).abs() <= 1e-10 * s1.abs().max(1.0));
            prop_assert!(d1.dot(&q.apply(&d1).unwrap()) >= -1e-12 * d1.norm_squared());
        }
    }

    #[test]
    fn tangent_projection_is_an_orthogonal_projector(seed in any::<u64>()) {
        let mut rng = random::stream(seed, "tangent-props");
        let maps = vec![
            ConstraintMap::sphere(5),
            ConstraintMap::affine(random::normal_matrix(&mut rng, 5, 2), random::normal_vector(&mut rng, 2)).unwrap(),
        ];
        for map in maps {
            let x = map.project_to_manifold(&random::normal_vector(&mut rng, 5)).unwrap();
            let v = random::normal_vector(&mut rng, 5);
            let w = random::normal_vector(&mut rng, 5);
            let pv = map.tangent_project(&x, &v).unwrap();
            let pw = map.tangent_project(&x, &w).unwrap();
            prop_assert!((map.tangent_project(&x, &pv).unwrap() - &pv).norm() <= 1e-10 * v.norm());
            prop_assert!((pv.dot(&w) - v.dot(&pw)).abs() <= 1e-10 * v.norm() * w.norm());
            let jac = map.evaluate_jacobian(&x).unwrap();
            prop_assert!(jac.tr_mul(&pv).norm() <= 1e-10 * v.norm());
        }
    }

    #[test]
    fn manifold_projection_lands_on_the_manifold(seed in any::<u64>()) {
        let mut rng = random::stream(seed, "restoration-props");
        let b = random::normal_matrix(&mut rng, 6, 3);
        let affine = ConstraintMap::affine(b, random::normal_vector(&mut rng, 3)).unwrap();
        let x = random::normal_vector(&mut rng, 6) * 3.0;
        let y = affine.project_to_manifold(&x).unwrap();
        prop_assert!(affine.evaluate_c(&y).unwrap().norm() <= 1e-12);
        let again = affine.project_to_manifold(&y).unwrap();
        prop_assert!((again - &y).norm() <= 1e-13);

        let sphere = ConstraintMap::sphere(6);
        let y = sphere.project_to_manifold(&x).unwrap();
        prop_assert!((sphere.project_to_manifold(&y).unwrap() - &y).norm() <= 1e-13);
    }
}

fn ellipse() -> ConstraintMap {
    ConstraintMap::user_smooth(
        2,
        1,
        |x: &DVector<f64>| {
            Ok(DVector::from_vec(vec![
                x[0] * x[0] + 2.0 * x[1] * x[1] - 1.0,
            ]))
        },
        |x: &DVector<f64>| Ok(DMatrix::from_column_slice(2, 1, &[2.0 * x[0], 4.0 * x[1]])),
    )
}

#[test]
fn gauss_newton_restoration_reaches_the_ellipse() {
    let map = ellipse();
    let mut rng = random::stream(5, "ellipse");
    for _ in 0..50 {
        let x = random::normal_vector(&mut rng, 2) + DVector::from_vec(vec![0.5, 0.5]);
        let y = map.project_to_manifold(&x).unwrap();
        assert!(map.evaluate_c(&y).unwrap().norm() <= 1e-12);
    }
}

#[test]
fn feasibility_drift_is_quadratic_on_the_sphere() {
    let map = ConstraintMap::sphere(4);
    let mut rng = random::stream(11, "drift");
    let mut pts = Vec::new();
    for i in 0..200 {
        let x = random::normal_vector(&mut rng, 4).normalize();
        let d = map
            .tangent_project(&x, &random::normal_vector(&mut rng, 4))
            .unwrap();
        // lengths spread log-uniformly over [1e-4, 1e-1]
        let len = 10f64.powf(-4.0 + 3.0 * (i as f64 + 0.5) / 200.0);
        let d = d.normalize() * len;
        let moved = &x + &d;
        let dist = (map.project_to_manifold(&moved).unwrap() - &moved).norm();
        pts.push((len.ln(), dist.ln()));
    }
    let n = pts.len() as f64;
    let (mx, my) = pts
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + x / n, b + y / n));
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    assert!((slope - 2.0).abs() <= 0.1, "slope {slope}");
    let c = pts
        .iter()
        .map(|(x, y)| (y - 2.0 * x).exp())
        .fold(0.0, f64::max);
    assert!(c.is_finite() && c < 1.0);
}
