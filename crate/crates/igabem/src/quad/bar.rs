//! Closed-form integrals of the E kernel over cylindrical bar subregions.
//!
//! The integrand is taken constant over the cross-section, reducing the
//! volume integral to a line integral along the axis that has an exact
//! antiderivative. A source on the axis at a subregion end is handled by
//! the polar closed form, where the 1/r^2 of the kernel cancels against the
//! volume element; a source on the axis between the ends splits the
//! subregion in two at the source's foot.
//!
//! Every closed form below is pinned against the independent quadrature
//! references in [`crate::oracles`], which integrate the defining volume
//! integral directly.

use crate::inclusion::{bar_frame_from_axis, BarSubregion, LinearInclusion};
use crate::kernels::{rotate_e_block, ElasticConstants, Frame};
use crate::{KernelBlock, Vec3};

/// Regular bar integral in the subregion's local axes: source at
/// (0, y_off, z_off), axis piece from z' = 0 to z' = h, radius `radius`.
/// Rows are local vector components, columns local stress Voigt entries.
/// Only rows 1..3 x columns {4,6 | 1,2,3,5 | 1,2,3,5} are nonzero.
pub fn bar_regular_local(
    mat: &ElasticConstants,
    radius: f64,
    h: f64,
    y_off: f64,
    z_off: f64,
) -> KernelBlock {
    let c = mat.c;
    let c3 = mat.c3;
    let a = std::f64::consts::PI * radius * radius * c;
    let yt = y_off;
    let zt = z_off;
    let dz = h - zt;
    let rc0 = (yt * yt + zt * zt).sqrt();
    let rc1 = (yt * yt + dz * dz).sqrt();
    let rc0_3 = rc0 * rc0 * rc0;
    let rc1_3 = rc1 * rc1 * rc1;

    let mut out = KernelBlock::zeros();
    out[(0, 5)] = 2.0 * a * c3 * (1.0 / rc1 - 1.0 / rc0);
    out[(1, 2)] = -a * yt * (dz / rc1_3 + zt / rc0_3);
    out[(1, 4)] =
        2.0 * a * ((yt * yt + c3 * rc1 * rc1) / rc1_3 - (yt * yt + c3 * rc0 * rc0) / rc0_3);
    out[(2, 0)] = a * (1.0 / rc0 - 1.0 / rc1);
    out[(2, 1)] = a * (zt * zt / rc0_3 - dz * dz / rc1_3);
    out[(2, 2)] = a
        * ((2.0 * (1.0 + c3) * dz * dz + (1.0 + 2.0 * c3) * yt * yt) / rc1_3
            - (2.0 * (1.0 + c3) * zt * zt + (1.0 + 2.0 * c3) * yt * yt) / rc0_3);
    if yt != 0.0 {
        out[(0, 3)] = 2.0 * a * c3 / yt * (dz / rc1 + zt / rc0);
        out[(1, 0)] = -a / yt * (dz / rc1 + zt / rc0);
        out[(1, 1)] = a / yt
            * (dz * ((1.0 + 2.0 * c3) * dz * dz + 2.0 * (1.0 + c3) * yt * yt) / rc1_3
                + zt * ((1.0 + 2.0 * c3) * zt * zt + 2.0 * (1.0 + c3) * yt * yt) / rc0_3);
        out[(2, 4)] = 2.0 * a / yt
            * ((c3 * rc1 * rc1 + dz * dz) * dz / rc1_3 + (c3 * rc0 * rc0 + zt * zt) * zt / rc0_3);
    }
    out
}

/// Singular bar integral for a source on the axis at an end of the
/// subregion, in apex axes whose z points from the source into the bar.
/// The only nonzero entries are (1,6) = (2,5), (3,1) = (3,2) and (3,3).
pub fn bar_singular_local(mat: &ElasticConstants, radius: f64, h: f64) -> KernelBlock {
    let c = mat.c;
    let c3 = mat.c3;
    let pi = std::f64::consts::PI;
    let theta = (radius / h).atan();
    let (st, ct) = theta.sin_cos();

    let e16 = 2.0
        * pi
        * c
        * (h * (2.0 * c3 * (ct - 1.0) + st * st * ct + 2.0 * ct - 2.0)
            + radius * (2.0 * c3 * (st - 1.0) + st * st * st - 1.0));
    let e31 = pi * c * (h * st * st * ct + radius * (st * st * st - 2.0 * st + 1.0));
    let e33 = 2.0
        * pi
        * c
        * (h * (2.0 * c3 * (ct - 1.0) - st * st * ct)
            + radius * (2.0 * c3 * (st - 1.0) + 2.0 * st - st * st * st - 1.0));

    let mut out = KernelBlock::zeros();
    out[(0, 5)] = e16;
    out[(1, 4)] = e16;
    out[(2, 0)] = e31;
    out[(2, 1)] = e31;
    out[(2, 2)] = e33;
    out
}

/// Where a source point sits relative to a bar subregion's cylinder.
#[derive(Debug, Clone, Copy, PartialEq)]
enum SourcePosition {
    Outside {
        y_off: f64,
        z_off: f64,
    },
    AtStart,
    AtEnd,
    /// On the axis (or inside the cylinder, projected onto it) at z'.
    Within {
        z_off: f64,
    },
}

fn classify(sub: &BarSubregion, v_z: &Vec3, source: &Vec3) -> SourcePosition {
    let rel = source - sub.start;
    let z_off = rel.dot(v_z);
    let lateral = rel - v_z * z_off;
    let y_off = lateral.norm();
    let tol = 1e-9 * (sub.h + sub.radius);
    let on_axis_band = y_off <= sub.radius + tol;
    if on_axis_band && z_off >= -tol && z_off <= sub.h + tol {
        if z_off.abs() <= tol {
            SourcePosition::AtStart
        } else if (z_off - sub.h).abs() <= tol {
            SourcePosition::AtEnd
        } else {
            SourcePosition::Within { z_off }
        }
    } else {
        SourcePosition::Outside { y_off, z_off }
    }
}

/// Apex-frame singular block rotated so rows are global components and
/// columns live in the `canonical` bar frame.
fn apex_block_in_canonical(
    mat: &ElasticConstants,
    radius: f64,
    h: f64,
    into_bar: Vec3,
    canonical: &Frame,
) -> KernelBlock {
    let apex_frame = bar_frame_from_axis(into_bar, Vec3::zeros());
    let block = bar_singular_local(mat, radius, h);
    // components: apex frame -> canonical frame
    let m = canonical.to_matrix().transpose() * apex_frame.to_matrix();
    let in_canonical = rotate_e_block(&block, &m);
    canonical.to_matrix() * in_canonical
}

/// Integral of E over one bar subregion for an arbitrary source point,
/// using the fundamental solution of the surrounding `domain` material.
/// Rows are global components; columns are stress Voigt entries in the
/// bar frame for this source (z' along the bar; the frame's x'/y' span
/// depends on the source, but the axial column 3, the only one a bar's
/// initial stress ever multiplies, is frame-independent).
pub fn bar_subregion_block(
    bar: &LinearInclusion,
    sub: &BarSubregion,
    source: &Vec3,
    domain: &ElasticConstants,
) -> KernelBlock {
    let v_z = bar.direction();
    let frame = bar.frame_for_source(source);
    let t = frame.to_matrix();
    let mat = domain;
    match classify(sub, &v_z, source) {
        SourcePosition::Outside { y_off, z_off } => {
            t * bar_regular_local(mat, sub.radius, sub.h, y_off, z_off)
        }
        SourcePosition::AtStart => apex_block_in_canonical(mat, sub.radius, sub.h, v_z, &frame),
        SourcePosition::AtEnd => apex_block_in_canonical(mat, sub.radius, sub.h, -v_z, &frame),
        SourcePosition::Within { z_off } => {
            // split at the source's axial foot and integrate both pieces
            // away from it
            let below = apex_block_in_canonical(mat, sub.radius, z_off, -v_z, &frame);
            let above = apex_block_in_canonical(mat, sub.radius, sub.h - z_off, v_z, &frame);
            below + above
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::{bar_regular_reference, bar_singular_reference};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mat(e: f64, nu: f64) -> ElasticConstants {
        ElasticConstants::new(e, nu).unwrap()
    }

    #[test]
    fn regular_nonzero_pattern() {
        let m = mat(1.0, 0.3);
        let b = bar_regular_local(&m, 0.05, 1.0, 0.4, -0.3);
        let nonzero = [
            (0, 3),
            (0, 5),
            (1, 0),
            (1, 1),
            (1, 2),
            (1, 4),
            (2, 0),
            (2, 1),
            (2, 2),
            (2, 4),
        ];
        for i in 0..3 {
            for j in 0..6 {
                if nonzero.contains(&(i, j)) {
                    assert!(b[(i, j)] != 0.0, "expected nonzero at ({i},{j})");
                } else {
                    assert_eq!(b[(i, j)], 0.0, "expected zero at ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn regular_on_axis_zero_entries() {
        let m = mat(2.0, 0.25);
        let b = bar_regular_local(&m, 0.1, 1.0, 0.0, -0.5);
        for (i, j) in [(0, 3), (1, 0), (1, 1), (2, 4)] {
            assert_eq!(b[(i, j)], 0.0);
        }
        // the surviving entries still match the quadrature reference
        let (reference, _res) = bar_regular_reference(&m, 0.1, 1.0, 0.0, -0.5, 1e-11);
        assert_relative_eq!(b, reference, epsilon = 1e-10, max_relative = 1e-9);
    }

    #[test]
    fn regular_matches_reference_randomised() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..200 {
            let m = mat(0.5 + 4.0 * rng.gen::<f64>(), -0.4 + 0.89 * rng.gen::<f64>());
            let radius = 0.01 + 0.2 * rng.gen::<f64>();
            let h = 0.2 + 2.0 * rng.gen::<f64>();
            // keep the source clearly outside the cylinder
            let (y_off, z_off) = loop {
                let y: f64 = 3.0 * rng.gen::<f64>();
                let z = -2.0 + 5.0 * rng.gen::<f64>();
                let outside_axially = z < -0.05 || z > h + 0.05;
                if y > radius + 0.05 || (outside_axially && y > 1e-3) {
                    break (y, z);
                }
            };
            let analytic = bar_regular_local(&m, radius, h, y_off, z_off);
            let (reference, residual) = bar_regular_reference(&m, radius, h, y_off, z_off, 1e-12);
            assert!(residual < 1e-10);
            let scale = reference.norm().max(1e-300);
            assert!(
                (analytic - reference).norm() / scale < 1e-8,
                "mismatch {} at R={radius} h={h} y={y_off} z={z_off}",
                (analytic - reference).norm() / scale
            );
        }
    }

    #[test]
    fn singular_nonzero_pattern_and_equalities() {
        let m = mat(1.0, 0.3);
        let b = bar_singular_local(&m, 0.05, 1.0);
        assert_eq!(b[(0, 5)], b[(1, 4)]);
        assert_eq!(b[(2, 0)], b[(2, 1)]);
        let nonzero = [(0, 5), (1, 4), (2, 0), (2, 1), (2, 2)];
        for i in 0..3 {
            for j in 0..6 {
                if nonzero.contains(&(i, j)) {
                    assert!(b[(i, j)] != 0.0);
                } else {
                    assert_eq!(b[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn singular_vanishes_with_radius() {
        let m = mat(1.0, 0.2);
        let b = bar_singular_local(&m, 1e-9, 1.0);
        assert!(b.norm() < 1e-7);
    }

    #[test]
    fn singular_matches_polar_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..40 {
            let m = mat(0.5 + 4.0 * rng.gen::<f64>(), -0.4 + 0.89 * rng.gen::<f64>());
            let radius = 0.01 + 0.3 * rng.gen::<f64>();
            let h = 0.1 + 2.0 * rng.gen::<f64>();
            let analytic = bar_singular_local(&m, radius, h);
            let (reference, residual) = bar_singular_reference(&m, radius, h, 1e-10);
            assert!(residual < 1e-8);
            let scale = reference.norm().max(1e-300);
            assert!(
                (analytic - reference).norm() / scale < 1e-6,
                "mismatch {} at R={radius} h={h}",
                (analytic - reference).norm() / scale
            );
        }
    }

    #[test]
    fn regular_form_consistent_down_to_cylinder_surface() {
        let m = mat(1.0, 0.25);
        let (radius, h, z_off) = (0.05, 1.0, 0.4);
        for factor in [20.0, 8.0, 3.0, 1.5, 1.05] {
            let y: f64 = radius * factor;
            let analytic = bar_regular_local(&m, radius, h, y, z_off);
            assert!(analytic.iter().all(|v| v.is_finite()));
            let (reference, res) = bar_regular_reference(&m, radius, h, y, z_off, 1e-13);
            assert!(res < 1e-11);
            let rel = (analytic - reference).norm() / reference.norm();
            assert!(rel < 1e-8, "rel {rel} at y = {factor} R");
        }
    }

    #[test]
    fn blocks_scale_inversely_with_shear_modulus() {
        // all integrals are linear in the kernel constant C ~ 1/G
        let m1 = mat(1.0, 0.3);
        let m2 = mat(2.0, 0.3);
        let a1 = bar_regular_local(&m1, 0.1, 1.0, 0.5, -0.2);
        let a2 = bar_regular_local(&m2, 0.1, 1.0, 0.5, -0.2);
        assert_relative_eq!(a1, a2 * 2.0, epsilon = 1e-14);
        let s1 = bar_singular_local(&m1, 0.1, 1.0);
        let s2 = bar_singular_local(&m2, 0.1, 1.0);
        assert_relative_eq!(s1, s2 * 2.0, epsilon = 1e-14);
    }

    #[test]
    fn subregion_block_routing_and_split_consistency() {
        let m = mat(1.0, 0.0);
        let bar = LinearInclusion::from_endpoints(
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(0.0, 0.0, 1.0),
            0.05,
            2,
            m,
        )
        .unwrap();
        let sub = bar.subregions()[0];
        // at the start: equals the apex closed form with z into +z
        let at_start = bar_subregion_block(&bar, &sub, &Vec3::new(0.0, 0.0, 0.0), &m);
        let direct = bar_singular_local(&m, 0.05, 1.0);
        assert_relative_eq!(at_start[(2, 2)], direct[(2, 2)], epsilon = 1e-12);
        // splitting within: the two pieces must sum to the two direct apex
        // integrals of lengths z and h - z in the axial column
        let within = bar_subregion_block(&bar, &sub, &Vec3::new(0.0, 0.0, 0.3), &m);
        let lower = bar_singular_local(&m, 0.05, 0.3);
        let upper = bar_singular_local(&m, 0.05, 0.7);
        // the lower piece's apex z points down, so its axial row enters
        // with flipped sign while the axial column is frame-invariant
        assert_relative_eq!(
            within[(2, 2)],
            -lower[(2, 2)] + upper[(2, 2)],
            epsilon = 1e-12
        );
        // far away: regular path, rows already global for a +z bar
        let far = bar_subregion_block(&bar, &sub, &Vec3::new(2.0, 0.0, 0.5), &m);
        let local = bar_regular_local(&m, 0.05, 1.0, 2.0, 0.5);
        assert_relative_eq!(
            far.norm(),
            (bar.frame_for_source(&Vec3::new(2.0, 0.0, 0.5)).to_matrix() * local).norm(),
            epsilon = 1e-13
        );
    }
}
