//! Clarke tangent and normal cones for a catalog of closed sets, plus the
//! generalized gradients of a few elementary nonsmooth functions.
//!
//! Every set in the catalog has closed-form cones, so membership tests are
//! exact up to the fixed activity threshold [`ACTIVITY_TOL`].

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::project_onto_cone;

/// A point is in a set when its distance is at most this; a constraint is
/// active when the point lies within this of its face.
pub const ACTIVITY_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub enum AdmissibleSet {
    /// `lo <= x <= hi`, entries may be infinite.
    Box {
        lo: DVector<f64>,
        hi: DVector<f64>,
    },
    Ball {
        center: DVector<f64>,
        radius: f64,
    },
    Singleton {
        point: DVector<f64>,
    },
    Whole {
        dim: usize,
    },
    /// `{x : rows * x <= offsets}`; each row is one halfspace normal.
    HalfspaceIntersection {
        rows: DMatrix<f64>,
        offsets: DVector<f64>,
    },
    /// `{x in R^2 : x_2 >= alpha |x_1|}` (convex).
    EpigraphCone {
        alpha: f64,
    },
    /// `{x in R^2 : x_2 <= alpha |x_1|}` (nonconvex).
    HypographCone {
        alpha: f64,
    },
}

impl AdmissibleSet {
    /// Symmetric box `|x_i| <= bound_i`.
    pub fn symmetric_box(bounds: &[f64]) -> Self {
        let hi = DVector::from_column_slice(bounds);
        Self::Box { lo: -&hi, hi }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Box { lo, .. } => lo.len(),
            Self::Ball { center, .. } => center.len(),
            Self::Singleton { point } => point.len(),
            Self::Whole { dim } => *dim,
            Self::HalfspaceIntersection { rows, .. } => rows.ncols(),
            Self::EpigraphCone { .. } | Self::HypographCone { .. } => 2,
        }
    }

    /// Verify the set is well formed (closed and nonempty where checkable).
    pub fn check(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidProblem(msg));
        match self {
            Self::Box { lo, hi } => {
                if lo.len() != hi.len() {
                    return Err(Error::dim("box upper bound", lo.len(), hi.len()));
                }
                for i in 0..lo.len() {
                    if lo[i].is_nan()
                        || hi[i].is_nan()
                        || lo[i] > hi[i]
                        || lo[i] == f64::INFINITY
                        || hi[i] == f64::NEG_INFINITY
                    {
                        return bad(format!("box coordinate {i} has empty range [{}, {}]", lo[i], hi[i]));
                    }
                }
                Ok(())
            }
            Self::Ball { center, radius } => {
                if !(*radius > 0.0 && radius.is_finite()) || center.iter().any(|c| !c.is_finite()) {
                    return bad(format!("ball radius {radius} must be positive and finite"));
                }
                Ok(())
            }
            Self::Singleton { point } => {
                if point.iter().any(|c| !c.is_finite()) {
                    return bad("singleton point is not finite".into());
                }
                Ok(())
            }
            Self::Whole { .. } => Ok(()),
            Self::HalfspaceIntersection { rows, offsets } => {
                if rows.nrows() != offsets.len() {
                    return Err(Error::dim("halfspace offsets", rows.nrows(), offsets.len()));
                }
                for i in 0..rows.nrows() {
                    if rows.row(i).norm() == 0.0 {
                        return bad(format!("halfspace row {i} is zero"));
                    }
                }
                Ok(())
            }
            Self::EpigraphCone { alpha } | Self::HypographCone { alpha } => {
                if !(*alpha >= 0.0 && alpha.is_finite()) {
                    return bad(format!("cone slope {alpha} must be nonnegative"));
                }
                Ok(())
            }
        }
    }

    fn check_point(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::dim("point for set", self.dim(), x.len()));
        }
        Ok(())
    }

    /// Distance to the set. For a multi-row halfspace intersection this is the
    /// largest single-halfspace distance, a lower bound that is zero exactly on the set.
    pub fn distance(&self, x: &DVector<f64>) -> Result<f64> {
        self.check_point(x)?;
        match self {
            Self::HalfspaceIntersection { rows, offsets } if rows.nrows() > 1 => {
                let mut worst = 0.0_f64;
                for i in 0..rows.nrows() {
                    let a = rows.row(i);
                    worst = worst.max(((a * x)[0] - offsets[i]) / a.norm());
                }
                Ok(worst)
            }
            _ => Ok((x - project(self, x)?).norm()),
        }
    }

    pub fn contains(&self, x: &DVector<f64>) -> Result<bool> {
        Ok(self.distance(x)? <= ACTIVITY_TOL)
    }

    fn require_member(&self, x: &DVector<f64>) -> Result<()> {
        let d = self.distance(x)?;
        if d > ACTIVITY_TOL {
            return Err(Error::NotInSet {
                context: format!("{self:?}"),
                distance: d,
            });
        }
        Ok(())
    }
}

/// Finitely generated cone `vertex + cone(generators)`.
///
/// An empty generator list is the trivial cone `{0}`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConeDescription {
    pub vertex: DVector<f64>,
    pub generators: Vec<DVector<f64>>,
}

impl ConeDescription {
    fn new(vertex: &DVector<f64>, generators: Vec<DVector<f64>>) -> Self {
        Self {
            vertex: vertex.clone(),
            generators,
        }
    }

    fn generator_matrix(&self) -> DMatrix<f64> {
        if self.generators.is_empty() {
            return DMatrix::zeros(self.vertex.len(), 0);
        }
        DMatrix::from_columns(&self.generators)
    }

    pub fn is_trivial(&self) -> bool {
        self.generators.is_empty()
    }

    /// True when the generators contain `+-e_i` for every axis (the cone is the whole space).
    pub fn is_whole_space(&self) -> bool {
        let d = self.vertex.len();
        (0..d).all(|i| {
            [1.0, -1.0]
                .iter()
                .all(|&s| self.generators.iter().any(|g| *g == axis(d, i, s)))
        })
    }

    /// Euclidean projection of a direction onto the cone (vertex at the origin).
    pub fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        if self.is_whole_space() {
            return v.clone();
        }
        project_onto_cone(&self.generator_matrix(), v)
    }

    /// Distance from `v` to the cone.
    pub fn distance(&self, v: &DVector<f64>) -> f64 {
        (v - self.project(v)).norm()
    }
}

/// True when `y` is in the Clarke tangent cone of `set` at `x`.
pub fn tangent_contains(set: &AdmissibleSet, x: &DVector<f64>, y: &DVector<f64>) -> Result<bool> {
    set.require_member(x)?;
    if y.len() != set.dim() {
        return Err(Error::dim("tangent direction", set.dim(), y.len()));
    }
    Ok(match set {
        AdmissibleSet::Whole { .. } => true,
        AdmissibleSet::Singleton { .. } => y.iter().all(|&v| v == 0.0),
        AdmissibleSet::Box { lo, hi } => (0..x.len()).all(|i| {
            let at_lo = (x[i] - lo[i]).abs() <= ACTIVITY_TOL;
            let at_hi = (hi[i] - x[i]).abs() <= ACTIVITY_TOL;
            (!at_lo || y[i] >= 0.0) && (!at_hi || y[i] <= 0.0)
        }),
        AdmissibleSet::Ball { center, radius } => {
            let r = x - center;
            (r.norm() - radius).abs() > ACTIVITY_TOL || r.dot(y) <= 0.0
        }
        AdmissibleSet::HalfspaceIntersection { rows, offsets } => (0..rows.nrows()).all(|i| {
            let a = rows.row(i);
            offsets[i] - (a * x)[0] > ACTIVITY_TOL * a.norm() || (a * y)[0] <= 0.0
        }),
        AdmissibleSet::EpigraphCone { alpha } => match planar_cone_position(*alpha, x, false) {
            PlanarPosition::Interior => true,
            PlanarPosition::Vertex => y[1] >= alpha * y[0].abs(),
            PlanarPosition::Face(n) => n.dot(y) <= 0.0,
        },
        AdmissibleSet::HypographCone { alpha } => match planar_cone_position(*alpha, x, true) {
            PlanarPosition::Interior => true,
            PlanarPosition::Vertex => y[1] <= -alpha * y[0].abs(),
            PlanarPosition::Face(n) => n.dot(y) <= 0.0,
        },
    })
}

enum PlanarPosition {
    Interior,
    Vertex,
    /// Boundary off the vertex, carrying the outward unit normal.
    Face(DVector<f64>),
}

fn planar_cone_position(alpha: f64, x: &DVector<f64>, hypograph: bool) -> PlanarPosition {
    if x.norm() <= ACTIVITY_TOL {
        return PlanarPosition::Vertex;
    }
    let gap = x[1] - alpha * x[0].abs();
    let scale = (1.0 + alpha * alpha).sqrt();
    if gap.abs() / scale > ACTIVITY_TOL {
        return PlanarPosition::Interior;
    }
    let s = x[0].signum();
    let n = if hypograph {
        DVector::from_vec(vec![-alpha * s, 1.0])
    } else {
        DVector::from_vec(vec![alpha * s, -1.0])
    };
    PlanarPosition::Face(n / scale)
}

fn axis(d: usize, i: usize, s: f64) -> DVector<f64> {
    let mut e = DVector::zeros(d);
    e[i] = s;
    e
}

/// Generators of the Clarke normal cone of `set` at `x`.
pub fn normal_cone(set: &AdmissibleSet, x: &DVector<f64>) -> Result<ConeDescription> {
    set.require_member(x)?;
    let d = set.dim();
    let gens = match set {
        AdmissibleSet::Whole { .. } => Vec::new(),
        AdmissibleSet::Singleton { .. } => (0..d).flat_map(|i| [axis(d, i, 1.0), axis(d, i, -1.0)]).collect(),
        AdmissibleSet::Box { lo, hi } => {
            let mut g = Vec::new();
            for i in 0..d {
                if (x[i] - lo[i]).abs() <= ACTIVITY_TOL {
                    g.push(axis(d, i, -1.0));
                }
                if (hi[i] - x[i]).abs() <= ACTIVITY_TOL {
                    g.push(axis(d, i, 1.0));
                }
            }
            g
        }
        AdmissibleSet::Ball { center, radius } => {
            let r = x - center;
            if (r.norm() - radius).abs() <= ACTIVITY_TOL {
                vec![r.normalize()]
            } else {
                Vec::new()
            }
        }
        AdmissibleSet::HalfspaceIntersection { rows, offsets } => (0..rows.nrows())
            .filter(|&i| offsets[i] - (rows.row(i) * x)[0] <= ACTIVITY_TOL * rows.row(i).norm())
            .map(|i| rows.row(i).transpose())
            .collect(),
        AdmissibleSet::EpigraphCone { alpha } => match planar_cone_position(*alpha, x, false) {
            PlanarPosition::Interior => Vec::new(),
            PlanarPosition::Vertex => vec![
                DVector::from_vec(vec![*alpha, -1.0]),
                DVector::from_vec(vec![-*alpha, -1.0]),
            ],
            PlanarPosition::Face(n) => vec![n],
        },
        AdmissibleSet::HypographCone { alpha } => match planar_cone_position(*alpha, x, true) {
            PlanarPosition::Interior => Vec::new(),
            PlanarPosition::Vertex => vec![
                DVector::from_vec(vec![*alpha, 1.0]),
                DVector::from_vec(vec![-*alpha, 1.0]),
            ],
            PlanarPosition::Face(n) => vec![n],
        },
    };
    Ok(ConeDescription::new(x, gens))
}

/// Nearest point of `set` to `p`.
pub fn project(set: &AdmissibleSet, p: &DVector<f64>) -> Result<DVector<f64>> {
    if p.len() != set.dim() {
        return Err(Error::dim("point to project", set.dim(), p.len()));
    }
    Ok(match set {
        AdmissibleSet::Whole { .. } => p.clone(),
        AdmissibleSet::Singleton { point } => point.clone(),
        AdmissibleSet::Box { lo, hi } => DVector::from_fn(p.len(), |i, _| p[i].clamp(lo[i], hi[i])),
        AdmissibleSet::Ball { center, radius } => {
            let r = p - center;
            let n = r.norm();
            if n <= *radius {
                p.clone()
            } else {
                center + r * (radius / n)
            }
        }
        AdmissibleSet::HalfspaceIntersection { rows, offsets } => {
            if rows.nrows() != 1 {
                return Err(Error::Unsupported {
                    op: "project",
                    variant: format!("HalfspaceIntersection with {} rows", rows.nrows()),
                });
            }
            let a = rows.row(0).transpose();
            let excess = a.dot(p) - offsets[0];
            if excess <= 0.0 {
                p.clone()
            } else {
                p - a.clone() * (excess / a.norm_squared())
            }
        }
        AdmissibleSet::EpigraphCone { alpha } => {
            if p[1] >= alpha * p[0].abs() {
                p.clone()
            } else {
                nearest_on_planar_boundary(*alpha, p)
            }
        }
        AdmissibleSet::HypographCone { alpha } => {
            if p[1] <= alpha * p[0].abs() {
                p.clone()
            } else {
                nearest_on_planar_boundary(*alpha, p)
            }
        }
    })
}

/// Closest point to `p` on the two rays `s (+-1, alpha)`, `s >= 0`.
fn nearest_on_planar_boundary(alpha: f64, p: &DVector<f64>) -> DVector<f64> {
    let mut best = DVector::zeros(2);
    let mut best_d = p.norm();
    for sign in [1.0, -1.0] {
        let dir = DVector::from_vec(vec![sign, alpha]).normalize();
        let s = dir.dot(p).max(0.0);
        let q = dir * s;
        let d = (p - &q).norm();
        if d < best_d {
            best = q;
            best_d = d;
        }
    }
    best
}

/// Tangent cone of an intersection, represented by its member sets.
#[derive(Clone, Debug)]
pub struct IntersectionTangent<'a> {
    sets: &'a [AdmissibleSet],
    point: DVector<f64>,
}

impl IntersectionTangent<'_> {
    pub fn contains(&self, y: &DVector<f64>) -> Result<bool> {
        for s in self.sets {
            if !tangent_contains(s, &self.point, y)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Tangent cone of `sets[0] ∩ sets[1] ∩ ...` at `x`, as the intersection of the tangent cones.
pub fn tangent_of_intersection<'a>(sets: &'a [AdmissibleSet], x: &DVector<f64>) -> Result<IntersectionTangent<'a>> {
    for s in sets {
        s.require_member(x)?;
    }
    Ok(IntersectionTangent { sets, point: x.clone() })
}

/// Elementary nonsmooth functions with known generalized gradients.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CatalogFn {
    /// `max(0, x)` on the real line.
    PositivePart,
    /// `|x|` on the real line.
    Abs,
    /// Euclidean norm on `R^d`.
    Norm,
}

impl CatalogFn {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "max0" | "positive_part" => Ok(Self::PositivePart),
            "abs" => Ok(Self::Abs),
            "norm" => Ok(Self::Norm),
            other => Err(Error::Unsupported {
                op: "generalized_gradient",
                variant: other.to_string(),
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum GeneralizedGradient {
    /// Closed interval `[lo, hi]` of the real line.
    Interval { lo: f64, hi: f64 },
    /// A single gradient.
    Point(DVector<f64>),
    /// Closed ball.
    Ball { center: DVector<f64>, radius: f64 },
}

impl GeneralizedGradient {
    pub fn contains(&self, g: &DVector<f64>, tol: f64) -> bool {
        match self {
            Self::Interval { lo, hi } => g.len() == 1 && g[0] >= lo - tol && g[0] <= hi + tol,
            Self::Point(p) => g.len() == p.len() && (g - p).norm() <= tol,
            Self::Ball { center, radius } => g.len() == center.len() && (g - center).norm() <= radius + tol,
        }
    }
}

/// Exact generalized gradient of a catalog function at `x`.
pub fn generalized_gradient_1d(f: CatalogFn, x: &DVector<f64>) -> Result<GeneralizedGradient> {
    let scalar = |x: &DVector<f64>| {
        if x.len() == 1 {
            Ok(x[0])
        } else {
            Err(Error::dim("scalar catalog argument", 1, x.len()))
        }
    };
    let point = |v: f64| GeneralizedGradient::Point(DVector::from_element(1, v));
    Ok(match f {
        CatalogFn::PositivePart => {
            let v = scalar(x)?;
            if v > 0.0 {
                point(1.0)
            } else if v < 0.0 {
                point(0.0)
            } else {
                GeneralizedGradient::Interval { lo: 0.0, hi: 1.0 }
            }
        }
        CatalogFn::Abs => {
            let v = scalar(x)?;
            if v == 0.0 {
                GeneralizedGradient::Interval { lo: -1.0, hi: 1.0 }
            } else {
                point(v.signum())
            }
        }
        CatalogFn::Norm => {
            let n = x.norm();
            if n == 0.0 {
                GeneralizedGradient::Ball {
                    center: DVector::zeros(x.len()),
                    radius: 1.0,
                }
            } else {
                GeneralizedGradient::Point(x / n)
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    fn unit_box(d: usize) -> AdmissibleSet {
        AdmissibleSet::Box {
            lo: DVector::zeros(d),
            hi: DVector::from_element(d, 1.0),
        }
    }

    #[test]
    fn interval_endpoint_tangent() {
        let b = unit_box(1);
        assert!(tangent_contains(&b, &v(&[0.0]), &v(&[1.0])).unwrap());
        assert!(!tangent_contains(&b, &v(&[0.0]), &v(&[-1.0])).unwrap());
    }

    #[test]
    fn box_interior_accepts_any_direction() {
        let b = unit_box(3);
        let x = v(&[0.5, 0.2, 0.9]);
        for y in [v(&[1.0, -1.0, 3.0]), v(&[-7.0, 0.0, 0.1])] {
            assert!(tangent_contains(&b, &x, &y).unwrap());
        }
        assert!(normal_cone(&b, &x).unwrap().is_trivial());
    }

    #[test]
    fn epigraph_cone_vertex_tangent() {
        let s1 = AdmissibleSet::EpigraphCone { alpha: 1.0 };
        assert!(tangent_contains(&s1, &v(&[0.0, 0.0]), &v(&[0.0, 1.0])).unwrap());
        assert!(!tangent_contains(&s1, &v(&[0.0, 0.0]), &v(&[1.0, 0.5])).unwrap());
    }

    #[test]
    fn hypograph_cone_vertex_tangent_is_the_clarke_cone() {
        // The Bouligand cone at the vertex is the whole set; the Clarke cone is smaller.
        let s2 = AdmissibleSet::HypographCone { alpha: 1.0 };
        let o = v(&[0.0, 0.0]);
        assert!(tangent_contains(&s2, &o, &v(&[0.0, -1.0])).unwrap());
        assert!(!tangent_contains(&s2, &o, &v(&[1.0, 0.5])).unwrap());
        assert!(!tangent_contains(&s2, &o, &v(&[1.0, -0.5])).unwrap());
    }

    #[test]
    fn box_corner_normal_generators() {
        let n = normal_cone(&unit_box(2), &v(&[0.0, 0.0])).unwrap();
        assert_eq!(n.generators, vec![v(&[-1.0, 0.0]), v(&[0.0, -1.0])]);
    }

    #[test]
    fn singleton_normal_is_whole_space() {
        let s = AdmissibleSet::Singleton { point: v(&[1.0, 2.0]) };
        let n = normal_cone(&s, &v(&[1.0, 2.0])).unwrap();
        assert_eq!(n.generators.len(), 4);
        assert!(n.is_whole_space());
        assert_eq!(n.distance(&v(&[-3.0, 5.0])), 0.0);
    }

    #[test]
    fn projections() {
        assert_eq!(project(&unit_box(1), &v(&[1.7])).unwrap(), v(&[1.0]));
        let ball = AdmissibleSet::Ball {
            center: v(&[0.0, 0.0]),
            radius: 1.0,
        };
        let q = project(&ball, &v(&[3.0, 4.0])).unwrap();
        assert!((q - v(&[0.6, 0.8])).norm() < 1e-15);
        let s = AdmissibleSet::Singleton { point: v(&[2.0]) };
        assert_eq!(project(&s, &v(&[-9.0])).unwrap(), v(&[2.0]));
    }

    #[test]
    fn planar_cone_projection() {
        let s1 = AdmissibleSet::EpigraphCone { alpha: 1.0 };
        assert!(project(&s1, &v(&[0.0, -1.0])).unwrap().norm() < 1e-15);
        let q = project(&s1, &v(&[2.0, 0.0])).unwrap();
        assert!((q - v(&[1.0, 1.0])).norm() < 1e-14);
        let s2 = AdmissibleSet::HypographCone { alpha: 1.0 };
        let q = project(&s2, &v(&[0.5, 2.0])).unwrap();
        assert!((q - v(&[1.25, 1.25])).norm() < 1e-14);
    }

    #[test]
    fn multi_row_halfspace_projection_is_unsupported() {
        let h = AdmissibleSet::HalfspaceIntersection {
            rows: DMatrix::identity(2, 2),
            offsets: v(&[1.0, 1.0]),
        };
        assert!(matches!(project(&h, &v(&[3.0, 3.0])), Err(Error::Unsupported { .. })));
        assert!(h.contains(&v(&[0.5, 1.0])).unwrap());
        assert!(!h.contains(&v(&[0.5, 1.1])).unwrap());
    }

    #[test]
    fn point_outside_set_is_rejected() {
        let err = tangent_contains(&unit_box(1), &v(&[2.0]), &v(&[1.0])).unwrap_err();
        assert!(matches!(err, Error::NotInSet { .. }));
    }

    #[test]
    fn catalog_values() {
        assert_eq!(
            generalized_gradient_1d(CatalogFn::PositivePart, &v(&[0.0])).unwrap(),
            GeneralizedGradient::Interval { lo: 0.0, hi: 1.0 }
        );
        assert_eq!(
            generalized_gradient_1d(CatalogFn::PositivePart, &v(&[1.0])).unwrap(),
            GeneralizedGradient::Point(v(&[1.0]))
        );
        assert_eq!(
            generalized_gradient_1d(CatalogFn::Norm, &v(&[0.0, 0.0])).unwrap(),
            GeneralizedGradient::Ball {
                center: v(&[0.0, 0.0]),
                radius: 1.0
            }
        );
        assert!(CatalogFn::from_name("sin").is_err());
    }

    #[test]
    fn intersection_with_whole_space_is_the_other_cone() {
        let sets = [unit_box(2), AdmissibleSet::Whole { dim: 2 }];
        let x = v(&[0.0, 0.5]);
        let t = tangent_of_intersection(&sets, &x).unwrap();
        assert!(t.contains(&v(&[1.0, -1.0])).unwrap());
        assert!(!t.contains(&v(&[-1.0, 0.0])).unwrap());
    }
}
