mod common;

use common::v;
use fcpmp::cones::{normal_cone, project, tangent_contains, tangent_of_intersection, AdmissibleSet};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Distance to the box `[lo, hi]`, computed directly.
fn box_distance(lo: &DVector<f64>, hi: &DVector<f64>, p: &DVector<f64>) -> f64 {
    (0..p.len())
        .map(|i| {
            let e = (lo[i] - p[i]).max(p[i] - hi[i]).max(0.0);
            e * e
        })
        .sum::<f64>()
        .sqrt()
}

/// Numeric estimate of the generalized directional derivative `d°(x; y)`
/// of a distance function: the largest difference quotient over base
/// points near `x` and a grid of step sizes.
fn clarke_estimate(d: impl Fn(&DVector<f64>) -> f64, x: &DVector<f64>, y: &DVector<f64>, rng: &mut ChaCha8Rng) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for k in 2..=6 {
        let theta = 10f64.powi(-k);
        for _ in 0..20 {
            let jitter = DVector::from_fn(x.len(), |_, _| rng.gen_range(-1.0..1.0)) * (theta * 1e-2);
            let base = x + jitter;
            best = best.max((d(&(&base + y * theta)) - d(&base)) / theta);
        }
    }
    best
}

fn random_direction(rng: &mut ChaCha8Rng, d: usize) -> DVector<f64> {
    // mix exact zeros and signs so faces are probed along and across
    DVector::from_fn(d, |_, _| match rng.gen_range(0..3) {
        0 => 0.0,
        1 => rng.gen_range(0.1..1.0),
        _ => -rng.gen_range(0.1..1.0),
    })
}

#[test]
fn intersection_of_random_boxes_matches_numeric_clarke_estimate() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut disagreements = Vec::new();
    for case in 0..200 {
        let d = 3;
        let x = DVector::from_fn(d, |_, _| rng.gen_range(-1.0..1.0));
        let make_box = |rng: &mut ChaCha8Rng| {
            let lo = DVector::from_fn(d, |i, _| {
                if rng.gen_bool(0.4) {
                    x[i]
                } else {
                    x[i] - rng.gen_range(0.1..1.0)
                }
            });
            let hi = DVector::from_fn(d, |i, _| {
                if rng.gen_bool(0.4) {
                    x[i]
                } else {
                    x[i] + rng.gen_range(0.1..1.0)
                }
            });
            (lo, hi)
        };
        let (lo_a, hi_a) = make_box(&mut rng);
        let (lo_b, hi_b) = make_box(&mut rng);
        let lo = lo_a.sup(&lo_b);
        let hi = hi_a.inf(&hi_b);
        let sets = [
            AdmissibleSet::Box { lo: lo_a, hi: hi_a },
            AdmissibleSet::Box { lo: lo_b, hi: hi_b },
        ];
        let pred = tangent_of_intersection(&sets, &x).unwrap();
        for _ in 0..10 {
            let y = random_direction(&mut rng, d);
            let est = clarke_estimate(|p| box_distance(&lo, &hi, p), &x, &y, &mut rng);
            let numeric = est <= 1e-6 * (1.0 + y.norm());
            if pred.contains(&y).unwrap() != numeric {
                disagreements.push((case, y.clone(), est));
            }
        }
    }
    assert!(disagreements.is_empty(), "{disagreements:?}");
}

#[test]
fn whole_space_in_an_intersection_changes_nothing() {
    let b = AdmissibleSet::Box {
        lo: v(&[0.0, 0.0]),
        hi: v(&[1.0, 1.0]),
    };
    let sets = [b.clone(), AdmissibleSet::Whole { dim: 2 }];
    let x = v(&[0.0, 0.5]);
    let pred = tangent_of_intersection(&sets, &x).unwrap();
    for y in [v(&[1.0, -1.0]), v(&[-1.0, 0.0]), v(&[0.0, 1.0])] {
        assert_eq!(pred.contains(&y).unwrap(), tangent_contains(&b, &x, &y).unwrap());
    }
}

#[test]
fn epigraph_cone_tangent_matches_numeric_estimate() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let set = AdmissibleSet::EpigraphCone { alpha: 1.0 };
    // distance to {x2 >= |x1|}: nearest of the two boundary rays or the vertex
    let dist = |p: &DVector<f64>| -> f64 {
        if p[1] >= p[0].abs() {
            return 0.0;
        }
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut best = p.norm();
        for dir in [v(&[s, s]), v(&[-s, s])] {
            let t = p.dot(&dir).max(0.0);
            best = best.min((p - &dir * t).norm());
        }
        best
    };
    for x in [v(&[0.0, 0.0]), v(&[0.5, 0.5]), v(&[0.0, 1.0])] {
        for _ in 0..50 {
            let y = DVector::from_fn(2, |_, _| rng.gen_range(-1.0..1.0));
            let est = clarke_estimate(dist, &x, &y, &mut rng);
            if est.abs() < 1e-4 {
                continue; // boundary direction; too close to call numerically
            }
            assert_eq!(
                tangent_contains(&set, &x, &y).unwrap(),
                est <= 0.0,
                "x={x} y={y} est={est}"
            );
        }
    }
}

#[test]
fn tangent_cones_are_cones() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let cases = [
        (
            AdmissibleSet::Box {
                lo: v(&[0.0, -1.0]),
                hi: v(&[1.0, 1.0]),
            },
            v(&[0.0, 1.0]),
        ),
        (
            AdmissibleSet::Ball {
                center: v(&[0.0, 0.0]),
                radius: 2.0,
            },
            v(&[2.0, 0.0]),
        ),
        (AdmissibleSet::EpigraphCone { alpha: 0.5 }, v(&[0.0, 0.0])),
        (AdmissibleSet::HypographCone { alpha: 0.5 }, v(&[0.0, 0.0])),
    ];
    for (set, x) in &cases {
        for _ in 0..200 {
            let y = DVector::from_fn(2, |_, _| rng.gen_range(-1.0..1.0));
            if tangent_contains(set, x, &y).unwrap() {
                for a in [0.5, 2.0, 10.0] {
                    assert!(tangent_contains(set, x, &(&y * a)).unwrap(), "{set:?} {y}");
                }
            }
        }
    }
}

#[test]
fn ball_boundary_tangent_is_a_halfspace() {
    let set = AdmissibleSet::Ball {
        center: v(&[1.0, 1.0]),
        radius: 1.0,
    };
    let x = v(&[1.0, 2.0]);
    assert!(tangent_contains(&set, &x, &v(&[1.0, 0.0])).unwrap());
    assert!(tangent_contains(&set, &x, &v(&[0.3, -1.0])).unwrap());
    assert!(!tangent_contains(&set, &x, &v(&[0.0, 1e-3])).unwrap());
    let n = normal_cone(&set, &x).unwrap();
    assert_eq!(n.generators.len(), 1);
    assert!((&n.generators[0] / n.generators[0].norm() - v(&[0.0, 1.0])).norm() < 1e-12);
}

#[test]
fn box_normal_cones_interior_and_vertex() {
    let set = AdmissibleSet::Box {
        lo: v(&[-1.0, -1.0, -1.0]),
        hi: v(&[1.0, 1.0, 1.0]),
    };
    assert!(normal_cone(&set, &v(&[0.2, 0.0, -0.3])).unwrap().is_trivial());
    let n = normal_cone(&set, &v(&[1.0, -1.0, 0.5])).unwrap();
    let mut gens: Vec<Vec<f64>> = n.generators.iter().map(|g| g.iter().copied().collect()).collect();
    gens.sort_by(|a, b| a.partial_cmp(b).unwrap());
    assert_eq!(gens, vec![vec![0.0, -1.0, 0.0], vec![1.0, 0.0, 0.0]]);
}

#[test]
fn normal_cone_vertex_generates_admissible_rays() {
    let set = AdmissibleSet::Box {
        lo: v(&[0.0, 0.0]),
        hi: v(&[1.0, 1.0]),
    };
    let x = v(&[1.0, 0.0]);
    let n = normal_cone(&set, &x).unwrap();
    assert_eq!(n.vertex, x);
    // every point of the cone, translated to the vertex, projects back onto the vertex
    for g in &n.generators {
        for a in [0.0, 0.5, 3.0] {
            let p = &n.vertex + g * a;
            assert!((project(&set, &p).unwrap() - &x).norm() < 1e-12);
        }
    }
}

#[test]
fn projection_is_optimal_against_sampled_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let sets = [
        AdmissibleSet::Box {
            lo: v(&[-1.0, 0.0, 2.0]),
            hi: v(&[1.0, 0.5, 3.0]),
        },
        AdmissibleSet::Ball {
            center: v(&[1.0, -2.0, 0.5]),
            radius: 1.5,
        },
    ];
    for set in &sets {
        let sample = |rng: &mut ChaCha8Rng| -> DVector<f64> {
            match set {
                AdmissibleSet::Box { lo, hi } => DVector::from_fn(3, |i, _| rng.gen_range(lo[i]..=hi[i])),
                AdmissibleSet::Ball { center, radius } => {
                    let d = fcpmp::linalg::random_unit(rng, 3);
                    center + d * (radius * rng.gen_range(0.0..1.0f64).cbrt())
                }
                _ => unreachable!(),
            }
        };
        for _ in 0..20 {
            let p = DVector::from_fn(3, |_, _| rng.gen_range(-4.0..4.0));
            let q = project(set, &p).unwrap();
            assert!(set.contains(&q).unwrap());
            assert!(((&p - &q).norm() - set.distance(&p).unwrap()).abs() < 1e-12);
            for _ in 0..1000 {
                let s = sample(&mut rng);
                assert!((&p - &q).norm() <= (&p - &s).norm() + 1e-10);
            }
        }
    }
    let epi = AdmissibleSet::EpigraphCone { alpha: 2.0 };
    for _ in 0..20 {
        let p = DVector::from_fn(2, |_, _| rng.gen_range(-3.0..3.0));
        let q = project(&epi, &p).unwrap();
        for _ in 0..1000 {
            let x1: f64 = rng.gen_range(-3.0..3.0);
            let s = v(&[x1, 2.0 * x1.abs() + rng.gen_range(0.0..3.0)]);
            assert!((&p - &q).norm() <= (&p - &s).norm() + 1e-10);
        }
    }
}

#[test]
fn polarity_on_random_box_faces() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..200 {
        let lo = DVector::from_fn(4, |_, _| rng.gen_range(-2.0..0.0));
        let hi = DVector::from_fn(4, |_, _| rng.gen_range(0.0..2.0));
        let x = DVector::from_fn(4, |i, _| match rng.gen_range(0..3) {
            0 => lo[i],
            1 => hi[i],
            _ => 0.0,
        });
        let set = AdmissibleSet::Box { lo, hi };
        let n = normal_cone(&set, &x).unwrap();
        for _ in 0..20 {
            let y = random_direction(&mut rng, 4);
            if !tangent_contains(&set, &x, &y).unwrap() {
                continue;
            }
            for g in &n.generators {
                assert!(g.dot(&y) <= 1e-10);
            }
        }
    }
}
