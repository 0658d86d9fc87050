//! Randomized structural invariants: the boundary-walk union agrees with
//! an independent inclusion-exclusion oracle, measurements respect the
//! symmetries they must have, and the tensor algebra is self-consistent.

use std::f64::consts::{PI, TAU};

use proptest::prelude::*;

use btl_core::analytic::Orientation;
use btl_core::geom2d::euler_by_inclusion_exclusion;
use btl_core::minkowski::{measure, surface_tensor_polygon, volume_moment_tensor};
use btl_core::sampler::{replicate_rng, sample_orientation};
use btl_core::{ConvexPolygon, SymTensor2, TorusWindow, Vec2};

/// Rotated anisotropic scalings of regular polygons: strictly convex with
/// varied vertex counts, edge directions, and aspect ratios.
fn convex_polygon(max_radius: f64) -> impl Strategy<Value = ConvexPolygon> {
    (
        3usize..=8,
        0.3f64..1.0,
        0.3f64..1.0,
        0.0f64..TAU,
        0.0f64..TAU,
    )
        .prop_map(move |(k, s1, s2, t1, t2)| {
            let vs = (0..k)
                .map(|i| {
                    let ang = TAU * i as f64 / k as f64;
                    let v = Vec2::new(ang.cos(), ang.sin()).rotated(t1);
                    (Vec2::new(s1 * v.x, s2 * v.y) * max_radius).rotated(t2)
                })
                .collect();
            ConvexPolygon::new(vs).expect("affine image of a regular polygon is convex")
        })
}

/// A handful of small grains placed away from the window edge, so the
/// planar inclusion-exclusion oracle sees the same picture as the torus.
fn interior_configuration() -> impl Strategy<Value = Vec<ConvexPolygon>> {
    prop::collection::vec(
        (convex_polygon(0.09), 0.25f64..0.75, 0.25f64..0.75)
            .prop_map(|(p, cx, cy)| p.translated(Vec2::new(cx, cy))),
        1..7,
    )
}

fn max_component_diff(a: &SymTensor2, b: &SymTensor2) -> f64 {
    (0..=a.rank())
        .map(|l| (a.get(l) - b.get(l)).abs())
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn union_euler_matches_inclusion_exclusion(grains in interior_configuration()) {
        let window = TorusWindow::new(1.0).unwrap();
        let region = btl_core::geom2d::union_on_torus(grains.clone(), window).unwrap();
        let oracle = euler_by_inclusion_exclusion(&grains);
        prop_assert_eq!(region.euler_characteristic(), oracle);
    }

    #[test]
    fn torus_union_is_translation_invariant(
        grains in interior_configuration(),
        dx in 0.0f64..1.0,
        dy in 0.0f64..1.0,
    ) {
        let window = TorusWindow::new(1.0).unwrap();
        let shift = Vec2::new(dx, dy);
        let moved: Vec<ConvexPolygon> = grains
            .iter()
            .map(|g| g.translated(shift))
            .collect();

        let base = measure(&btl_core::geom2d::union_on_torus(grains, window).unwrap(), 2);
        let shifted = measure(&btl_core::geom2d::union_on_torus(moved, window).unwrap(), 2);

        // Shifting grains across the periodic boundary reroutes the
        // boundary walk completely, yet every density must survive.
        prop_assert_eq!(base.euler, shifted.euler);
        prop_assert!((base.area - shifted.area).abs() < 1e-9);
        let ta = base.surface_tensor_density(2);
        let tb = shifted.surface_tensor_density(2);
        prop_assert!(max_component_diff(&ta, &tb) < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn surface_tensors_scale_with_homogeneity_one(
        poly in convex_polygon(1.0),
        lambda in 0.5f64..2.0,
        s in 0usize..=4,
    ) {
        let scaled = ConvexPolygon::new(
            poly.vertices().iter().map(|v| *v * lambda).collect(),
        ).unwrap();
        let a = surface_tensor_polygon(&poly, 0, s);
        let b = surface_tensor_polygon(&scaled, 0, s);
        let expect = &a * lambda;
        prop_assert!(
            max_component_diff(&expect, &b) < 1e-12 * (1.0 + b.max_abs()),
            "s={} lambda={}", s, lambda
        );

        let va = volume_moment_tensor(&poly, 0);
        let vb = volume_moment_tensor(&scaled, 0);
        prop_assert!((va.get(0) * lambda * lambda - vb.get(0)).abs() < 1e-12 * (1.0 + vb.get(0)));
    }

    #[test]
    fn surface_tensors_rotate_covariantly(
        poly in convex_polygon(1.0),
        theta in 0.0f64..TAU,
        s in 0usize..=4,
    ) {
        let a = surface_tensor_polygon(&poly.rotated(theta), 0, s);
        let b = surface_tensor_polygon(&poly, 0, s).rotate(theta);
        prop_assert!(
            max_component_diff(&a, &b) < 1e-10 * (1.0 + a.max_abs()),
            "s={} theta={}", s, theta
        );
    }

    #[test]
    fn rank_two_trace_ties_to_half_perimeter(poly in convex_polygon(1.0)) {
        let t = surface_tensor_polygon(&poly, 0, 2);
        let v1 = surface_tensor_polygon(&poly, 0, 0).get(0);
        prop_assert!((t.trace() - v1 / (4.0 * PI)).abs() < 1e-12 * (1.0 + v1));
    }

    #[test]
    fn tensor_algebra_invariants(
        x in -2.0f64..2.0,
        y in -2.0f64..2.0,
        theta in 0.0f64..TAU,
        s in 1usize..=5,
    ) {
        // Rotating forward then back is the identity.
        let t = SymTensor2::vec_power(x, y, s);
        let round = t.rotate(theta).rotate(-theta);
        prop_assert!(max_component_diff(&t, &round) < 1e-12 * (1.0 + t.max_abs()));

        // Powers of a vector rotate like the vector.
        let v = Vec2::new(x, y).rotated(theta);
        let direct = SymTensor2::vec_power(v.x, v.y, s);
        let conj = t.rotate(theta);
        prop_assert!(max_component_diff(&direct, &conj) < 1e-11 * (1.0 + direct.max_abs()));

        // The symmetric product concatenates powers.
        let prod = SymTensor2::vec_power(x, y, 2).sym_mul(&SymTensor2::vec_power(x, y, s));
        let full = SymTensor2::vec_power(x, y, s + 2);
        prop_assert!(max_component_diff(&prod, &full) < 1e-11 * (1.0 + full.max_abs()));

        // The metric tensor is rotation invariant with trace two.
        let q = SymTensor2::q_power(2);
        prop_assert!((q.trace() - 2.0).abs() < 1e-15);
        prop_assert!(max_component_diff(&q, &q.rotate(theta)) < 1e-14);
    }

    #[test]
    fn orientation_samples_stay_in_range(
        alpha in 0.0f64..60.0,
        seed in 0u64..1000,
    ) {
        let mut rng = replicate_rng(seed, 17);
        let t = sample_orientation(Orientation::Finite(alpha), &mut rng).unwrap();
        prop_assert!((0.0..TAU).contains(&t), "theta={}", t);
        let a = sample_orientation(Orientation::Aligned, &mut rng).unwrap();
        prop_assert_eq!(a, 0.0);
    }
}
