//! Surface integration over NURBS patch parameter rectangles.
//!
//! Regular integration picks the Gauss order from the size-to-distance
//! ratio of the rectangle and recursively subdivides when the source comes
//! too close. Singular integration (collocation point on the patch) fans
//! the rectangle into triangles about the singular parameter point and maps
//! each with a collapsed quadrilateral whose Jacobian vanishes at the
//! singularity, cancelling the O(1/r) of U and leaving the regularised
//! T integrand integrable.

use super::{GaussRule, QuadError, QuadOptions};
use crate::nurbs::NurbsSurface;
use crate::Vec3;

/// Parameter rectangle [u0, u1] x [v0, v1].
#[derive(Debug, Clone, Copy)]
pub struct Rect {
    pub u: (f64, f64),
    pub v: (f64, f64),
}

impl Rect {
    pub fn full(surf: &NurbsSurface) -> Self {
        let (u0, u1) = surf.knot_vector(crate::nurbs::SurfDir::U).domain();
        let (v0, v1) = surf.knot_vector(crate::nurbs::SurfDir::V).domain();
        Rect {
            u: (u0, u1),
            v: (v0, v1),
        }
    }

    pub fn contains(&self, u: f64, v: f64, tol: f64) -> bool {
        u >= self.u.0 - tol && u <= self.u.1 + tol && v >= self.v.0 - tol && v <= self.v.1 + tol
    }

    fn split(&self) -> [Rect; 4] {
        let um = 0.5 * (self.u.0 + self.u.1);
        let vm = 0.5 * (self.v.0 + self.v.1);
        [
            Rect {
                u: (self.u.0, um),
                v: (self.v.0, vm),
            },
            Rect {
                u: (um, self.u.1),
                v: (self.v.0, vm),
            },
            Rect {
                u: (self.u.0, um),
                v: (vm, self.v.1),
            },
            Rect {
                u: (um, self.u.1),
                v: (vm, self.v.1),
            },
        ]
    }
}

/// One surface quadrature point: parameters, position, outward unit normal
/// and total weight (rule weight times area Jacobian).
#[derive(Debug, Clone, Copy)]
pub struct SurfacePoint {
    pub u: f64,
    pub v: f64,
    pub x: Vec3,
    pub normal: Vec3,
    pub weight: f64,
}

fn geometry_at(surf: &NurbsSurface, u: f64, v: f64) -> Result<(Vec3, Vec3, f64), QuadError> {
    let (x, tu, tv) = surf.point_and_tangents(u, v)?;
    let cross = tu.cross(&tv);
    let jac = cross.norm();
    Ok((x, cross / jac, jac))
}

/// Size and distance of a rectangle relative to a source point, from a
/// 3x3 parameter sample.
fn rect_metrics(surf: &NurbsSurface, rect: &Rect, source: &Vec3) -> Result<(f64, f64), QuadError> {
    let mut pts = [Vec3::zeros(); 9];
    let mut n = 0;
    for i in 0..3 {
        for j in 0..3 {
            let u = rect.u.0 + (rect.u.1 - rect.u.0) * i as f64 / 2.0;
            let v = rect.v.0 + (rect.v.1 - rect.v.0) * j as f64 / 2.0;
            pts[n] = surf.point(u, v)?;
            n += 1;
        }
    }
    let mut diameter: f64 = 0.0;
    let mut distance = f64::INFINITY;
    for i in 0..9 {
        distance = distance.min((pts[i] - source).norm());
        for j in i + 1..9 {
            diameter = diameter.max((pts[i] - pts[j]).norm());
        }
    }
    Ok((diameter, distance))
}

/// Tensor-product Gauss points over one rectangle at a fixed order.
fn tensor_points<F>(
    surf: &NurbsSurface,
    rect: &Rect,
    order: usize,
    f: &mut F,
) -> Result<(), QuadError>
where
    F: FnMut(&SurfacePoint),
{
    let rule = GaussRule::new(order)?;
    let hu = 0.5 * (rect.u.1 - rect.u.0);
    let hv = 0.5 * (rect.v.1 - rect.v.0);
    let mu = 0.5 * (rect.u.0 + rect.u.1);
    let mv = 0.5 * (rect.v.0 + rect.v.1);
    for (gu, wu) in rule.nodes.iter().zip(&rule.weights) {
        for (gv, wv) in rule.nodes.iter().zip(&rule.weights) {
            let u = mu + hu * gu;
            let v = mv + hv * gv;
            let (x, normal, jac) = geometry_at(surf, u, v)?;
            f(&SurfacePoint {
                u,
                v,
                x,
                normal,
                weight: wu * wv * hu * hv * jac,
            });
        }
    }
    Ok(())
}

/// Regular surface integration of a kernel seen from `source`. The
/// traversal order is deterministic for given inputs, so accumulated sums
/// are reproducible bit for bit.
pub fn for_each_surface_regular<F>(
    surf: &NurbsSurface,
    rect: &Rect,
    source: &Vec3,
    opts: &QuadOptions,
    f: &mut F,
) -> Result<(), QuadError>
where
    F: FnMut(&SurfacePoint),
{
    recurse_regular(surf, rect, source, opts, 0, f)
}

fn recurse_regular<F>(
    surf: &NurbsSurface,
    rect: &Rect,
    source: &Vec3,
    opts: &QuadOptions,
    depth: usize,
    f: &mut F,
) -> Result<(), QuadError>
where
    F: FnMut(&SurfacePoint),
{
    let (diameter, distance) = rect_metrics(surf, rect, source)?;
    if opts.needs_subdivision(diameter, distance, depth) {
        for sub in rect.split() {
            recurse_regular(surf, &sub, source, opts, depth + 1, f)?;
        }
        return Ok(());
    }
    let order = opts.escalated_order(opts.surface_order, diameter, distance);
    tensor_points(surf, rect, order, f)
}

/// Singular surface integration with the collocation point at parameter
/// (u0, v0) inside or on the rectangle. The rectangle is fanned into
/// triangles about the singular point; each triangle is a collapsed
/// quadrilateral in (alpha, beta) whose Jacobian vanishes at the apex.
pub fn for_each_surface_singular<F>(
    surf: &NurbsSurface,
    rect: &Rect,
    sing: (f64, f64),
    order: usize,
    f: &mut F,
) -> Result<(), QuadError>
where
    F: FnMut(&SurfacePoint),
{
    let tol = 1e-9 * ((rect.u.1 - rect.u.0) + (rect.v.1 - rect.v.0));
    if !rect.contains(sing.0, sing.1, tol) {
        return Err(QuadError::SingularPointOutside(sing.0, sing.1));
    }
    // a point within tolerance of the rectangle boundary is treated as on it
    let sing = (sing.0.clamp(rect.u.0, rect.u.1), sing.1.clamp(rect.v.0, rect.v.1));
    let corners = [
        (rect.u.0, rect.v.0),
        (rect.u.1, rect.v.0),
        (rect.u.1, rect.v.1),
        (rect.u.0, rect.v.1),
    ];
    let rule = GaussRule::new(order)?;
    for e in 0..4 {
        let a = corners[e];
        let b = corners[(e + 1) % 4];
        // skip triangles degenerate because the apex lies on this edge
        let area2 = (a.0 - sing.0) * (b.1 - sing.1) - (b.0 - sing.0) * (a.1 - sing.1);
        if area2.abs() < 1e-14 {
            continue;
        }
        for (ga, wa) in rule.nodes.iter().zip(&rule.weights) {
            let m = 0.5 * (1.0 + ga); // radial coordinate, 0 at the apex
            for (gb, wb) in rule.nodes.iter().zip(&rule.weights) {
                let n = 0.5 * (1.0 + gb);
                let eu = a.0 + n * (b.0 - a.0);
                let ev = a.1 + n * (b.1 - a.1);
                let u = sing.0 + m * (eu - sing.0);
                let v = sing.1 + m * (ev - sing.1);
                // d(u,v)/d(alpha,beta)
                let du_da = 0.5 * (eu - sing.0);
                let dv_da = 0.5 * (ev - sing.1);
                let du_db = m * 0.5 * (b.0 - a.0);
                let dv_db = m * 0.5 * (b.1 - a.1);
                let jac2 = (du_da * dv_db - dv_da * du_db).abs();
                if jac2 == 0.0 {
                    continue;
                }
                let (x, normal, jac) = geometry_at(surf, u, v)?;
                f(&SurfacePoint {
                    u,
                    v,
                    x,
                    normal,
                    weight: wa * wb * jac2 * jac,
                });
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_face_z0() -> NurbsSurface {
        NurbsSurface::bilinear([
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(1.0, 1.0, 0.0),
        ])
    }

    #[test]
    fn constant_over_unit_face_gives_area() {
        let s = unit_face_z0();
        let mut area = 0.0;
        for_each_surface_regular(
            &s,
            &Rect::full(&s),
            &Vec3::new(10.0, 10.0, 10.0),
            &QuadOptions::default(),
            &mut |p| area += p.weight,
        )
        .unwrap();
        assert_relative_eq!(area, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn singular_fan_covers_area() {
        let s = unit_face_z0();
        for sing in [(0.5, 0.5), (0.0, 0.0), (1.0, 0.3), (0.25, 1.0)] {
            let mut area = 0.0;
            for_each_surface_singular(&s, &Rect::full(&s), sing, 10, &mut |p| area += p.weight)
                .unwrap();
            assert_relative_eq!(area, 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn singular_point_outside_rejected() {
        let s = unit_face_z0();
        let err = for_each_surface_singular(&s, &Rect::full(&s), (1.5, 0.5), 8, &mut |_| {});
        assert!(err.is_err());
    }

    #[test]
    fn weakly_singular_integral_two_layouts_agree() {
        // 1/r over the unit face, source at an interior point: compare the
        // direct fan with a 4-subrectangle fan layout
        let s = unit_face_z0();
        let src = Vec3::new(0.4, 0.6, 0.0);
        let mut a = 0.0;
        for_each_surface_singular(&s, &Rect::full(&s), (0.4, 0.6), 16, &mut |p| {
            a += p.weight / (p.x - src).norm();
        })
        .unwrap();
        let mut b = 0.0;
        for rect in [
            Rect {
                u: (0.0, 0.4),
                v: (0.0, 0.6),
            },
            Rect {
                u: (0.4, 1.0),
                v: (0.0, 0.6),
            },
            Rect {
                u: (0.0, 0.4),
                v: (0.6, 1.0),
            },
            Rect {
                u: (0.4, 1.0),
                v: (0.6, 1.0),
            },
        ] {
            for_each_surface_singular(&s, &rect, (0.4, 0.6), 16, &mut |p| {
                b += p.weight / (p.x - src).norm();
            })
            .unwrap();
        }
        assert_relative_eq!(a, b, epsilon = 1e-7, max_relative = 1e-7);
    }

    #[test]
    fn singular_refinement_converges() {
        let s = unit_face_z0();
        let src = Vec3::new(0.5, 0.5, 0.0);
        let run = |order: usize| {
            let mut acc = 0.0;
            for_each_surface_singular(&s, &Rect::full(&s), (0.5, 0.5), order, &mut |p| {
                acc += p.weight / (p.x - src).norm();
            })
            .unwrap();
            acc
        };
        let coarse = run(8);
        let fine = run(16);
        assert!((coarse - fine).abs() < 1e-6, "{coarse} vs {fine}");
        // analytic value for 1/r over a unit square about its centre:
        // 4 * ln(1 + sqrt(2))
        let exact = 4.0 * (1.0 + 2.0_f64.sqrt()).ln();
        assert_relative_eq!(fine, exact, epsilon = 1e-8, max_relative = 1e-8);
    }

    #[test]
    fn far_integral_self_convergence() {
        // smooth kernel: escalated default order against a high fixed order
        let s = unit_face_z0();
        let src = Vec3::new(0.2, 0.3, 0.8);
        let kernel = |p: &SurfacePoint| p.weight / (p.x - src).norm_squared();
        let mut val = 0.0;
        for_each_surface_regular(
            &s,
            &Rect::full(&s),
            &src,
            &QuadOptions::default(),
            &mut |p| val += kernel(p),
        )
        .unwrap();
        let mut reference = 0.0;
        tensor_points(&s, &Rect::full(&s), 32, &mut |p| reference += kernel(p)).unwrap();
        assert_relative_eq!(val, reference, max_relative = 1e-8);
    }
}
