//! Volume integration of the E kernel over general-inclusion cells.
//!
//! Regular cells use tensor Gauss rules with near-field order escalation
//! and subdivision. Cells containing the source point are integrated in a
//! collapsed coordinate system: the cell is split into three pyramids with
//! apex at the source corner, and the pyramid map's Jacobian carries a
//! (1 - rho)^2 factor that cancels the O(1/r^2) kernel singularity.

use super::{GaussRule, QuadError, QuadOptions};
use crate::inclusion::{CellBounds, GeneralInclusion};
use crate::Vec3;
use nalgebra::Matrix3;

/// One volume quadrature point: local inclusion coordinates, global
/// position and total weight (rule weight times all Jacobians).
#[derive(Debug, Clone, Copy)]
pub struct VolumePoint {
    pub local: Vec3,
    pub x: Vec3,
    pub weight: f64,
}

fn cell_metrics(
    incl: &GeneralInclusion,
    cell: &CellBounds,
    source: &Vec3,
) -> Result<(f64, f64), QuadError> {
    let mut pts = [Vec3::zeros(); 9];
    let mut n = 0;
    for k in 0..2 {
        for j in 0..2 {
            for i in 0..2 {
                pts[n] = incl.point(&cell.corner(i, j, k))?;
                n += 1;
            }
        }
    }
    pts[8] = incl.point(&cell.center())?;
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

fn split_cell(cell: &CellBounds) -> Vec<CellBounds> {
    let sm = 0.5 * (cell.s.0 + cell.s.1);
    let tm = 0.5 * (cell.t.0 + cell.t.1);
    let rm = 0.5 * (cell.r.0 + cell.r.1);
    let ss = [(cell.s.0, sm), (sm, cell.s.1)];
    let ts = [(cell.t.0, tm), (tm, cell.t.1)];
    let rs = [(cell.r.0, rm), (rm, cell.r.1)];
    let mut out = Vec::with_capacity(8);
    for r in rs {
        for t in ts {
            for s in ss {
                out.push(CellBounds { s, t, r });
            }
        }
    }
    out
}

fn tensor_points<F>(
    incl: &GeneralInclusion,
    cell: &CellBounds,
    order: usize,
    f: &mut F,
) -> Result<(), QuadError>
where
    F: FnMut(&VolumePoint),
{
    let rule = GaussRule::new(order)?;
    let e = cell.extent();
    let jac_cell = e.x * e.y * e.z / 8.0;
    for (gr, wr) in rule.nodes.iter().zip(&rule.weights) {
        let r = cell.r.0 + 0.5 * (1.0 + gr) * e.z;
        for (gt, wt) in rule.nodes.iter().zip(&rule.weights) {
            let t = cell.t.0 + 0.5 * (1.0 + gt) * e.y;
            for (gs, ws) in rule.nodes.iter().zip(&rule.weights) {
                let s = cell.s.0 + 0.5 * (1.0 + gs) * e.x;
                let local = Vec3::new(s, t, r);
                let (x, _jac, det) = incl.point_and_jacobian(&local)?;
                f(&VolumePoint {
                    local,
                    x,
                    weight: ws * wt * wr * jac_cell * det,
                });
            }
        }
    }
    Ok(())
}

/// Regular volume integration over one cell seen from `source`. The source
/// must be outside the cell; closeness is handled by orderedescalation and
/// subdivision.
pub fn for_each_volume_regular<F>(
    incl: &GeneralInclusion,
    cell: &CellBounds,
    source: &Vec3,
    opts: &QuadOptions,
    f: &mut F,
) -> Result<(), QuadError>
where
    F: FnMut(&VolumePoint),
{
    recurse_regular(incl, cell, source, opts, 0, f)
}

fn recurse_regular<F>(
    incl: &GeneralInclusion,
    cell: &CellBounds,
    source: &Vec3,
    opts: &QuadOptions,
    depth: usize,
    f: &mut F,
) -> Result<(), QuadError>
where
    F: FnMut(&VolumePoint),
{
    let (diameter, distance) = cell_metrics(incl, cell, source)?;
    if opts.needs_subdivision(diameter, distance, depth) {
        for sub in split_cell(cell) {
            recurse_regular(incl, &sub, source, opts, depth + 1, f)?;
        }
        return Ok(());
    }
    let order = opts.escalated_order(opts.volume_order, diameter, distance);
    tensor_points(incl, cell, order, f)
}

/// Singular volume integration over a cell with the source at the local
/// cell corner `corner` (each component 0 or 1). The cell is decomposed
/// into three pyramids with apex at the corner, each integrated in the
/// collapsed (sigma, tau, rho) system whose Jacobian vanishes at the apex.
pub fn for_each_volume_singular<F>(
    incl: &GeneralInclusion,
    cell: &CellBounds,
    corner: (usize, usize, usize),
    order: usize,
    f: &mut F,
) -> Result<(), QuadError>
where
    F: FnMut(&VolumePoint),
{
    if corner.0 > 1 || corner.1 > 1 || corner.2 > 1 {
        return Err(QuadError::SourceNotAtCorner);
    }
    let apex = cell.corner(corner.0, corner.1, corner.2);
    // the three cell faces that do not contain the apex, each with its
    // corners in cyclic order
    let op = (1 - corner.0, 1 - corner.1, 1 - corner.2);
    let faces: [[Vec3; 4]; 3] = [
        [
            cell.corner(op.0, 0, 0),
            cell.corner(op.0, 1, 0),
            cell.corner(op.0, 1, 1),
            cell.corner(op.0, 0, 1),
        ],
        [
            cell.corner(0, op.1, 0),
            cell.corner(1, op.1, 0),
            cell.corner(1, op.1, 1),
            cell.corner(0, op.1, 1),
        ],
        [
            cell.corner(0, 0, op.2),
            cell.corner(1, 0, op.2),
            cell.corner(1, 1, op.2),
            cell.corner(0, 1, op.2),
        ],
    ];
    let rule = GaussRule::new(order)?;
    for base in &faces {
        for (gr, wr) in rule.nodes.iter().zip(&rule.weights) {
            let rho = 0.5 * (1.0 + gr);
            for (gt, wt) in rule.nodes.iter().zip(&rule.weights) {
                let tau = 0.5 * (1.0 + gt);
                for (gs, ws) in rule.nodes.iter().zip(&rule.weights) {
                    let sigma = 0.5 * (1.0 + gs);
                    // bilinear base point and its derivatives
                    let n = [
                        (1.0 - sigma) * (1.0 - tau),
                        sigma * (1.0 - tau),
                        sigma * tau,
                        (1.0 - sigma) * tau,
                    ];
                    let dn_ds = [-(1.0 - tau), 1.0 - tau, tau, -tau];
                    let dn_dt = [-(1.0 - sigma), -sigma, sigma, 1.0 - sigma];
                    let mut s0 = Vec3::zeros();
                    let mut ds_dsigma = Vec3::zeros();
                    let mut ds_dtau = Vec3::zeros();
                    for i in 0..4 {
                        s0 += base[i] * n[i];
                        ds_dsigma += base[i] * dn_ds[i];
                        ds_dtau += base[i] * dn_dt[i];
                    }
                    let local = s0 * (1.0 - rho) + apex * rho;
                    let jac_pyr = Matrix3::from_rows(&[
                        (ds_dsigma * (1.0 - rho)).transpose(),
                        (ds_dtau * (1.0 - rho)).transpose(),
                        (apex - s0).transpose(),
                    ])
                    .determinant()
                    .abs();
                    if jac_pyr == 0.0 {
                        continue;
                    }
                    let (x, _jac, det) = incl.point_and_jacobian(&local)?;
                    // 1/8 maps [-1,1]^3 onto the unit (sigma,tau,rho) cube
                    let weight = ws * wt * wr * 0.125 * jac_pyr * det;
                    f(&VolumePoint { local, x, weight });
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inclusion::SigmaInterpolation;
    use crate::kernels::{kernel_e, ElasticConstants};
    use crate::nurbs::NurbsSurface;
    use approx::assert_relative_eq;

    fn unit_cube() -> GeneralInclusion {
        let bottom = NurbsSurface::bilinear([
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(1.0, 1.0, 0.0),
        ]);
        let top = NurbsSurface::bilinear([
            Vec3::new(0.0, 0.0, 1.0),
            Vec3::new(1.0, 0.0, 1.0),
            Vec3::new(0.0, 1.0, 1.0),
            Vec3::new(1.0, 1.0, 1.0),
        ]);
        GeneralInclusion::new(
            bottom,
            top,
            [3, 3, 2],
            ElasticConstants::new(1.0, 0.0).unwrap(),
            SigmaInterpolation::Linear,
        )
        .unwrap()
    }

    #[test]
    fn regular_constant_integrand_gives_volume() {
        let incl = unit_cube();
        let src = Vec3::new(5.0, 5.0, 5.0);
        let mut vol = 0.0;
        for cell in incl.cells() {
            for_each_volume_regular(&incl, &cell, &src, &QuadOptions::default(), &mut |p| {
                vol += p.weight
            })
            .unwrap();
        }
        assert_relative_eq!(vol, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn cell_jacobian_matches_region_size() {
        // one cell of extent 0.5 x 0.5 x 1.0 has J_xi = 1/32
        let incl = unit_cube();
        let cell = incl.cells()[0];
        let e = cell.extent();
        assert_relative_eq!(e.x * e.y * e.z / 8.0, 1.0 / 32.0, epsilon = 1e-15);
    }

    #[test]
    fn singular_constant_integrand_gives_cell_volume() {
        let incl = unit_cube();
        for cell in incl.cells() {
            for corner in [(0, 0, 0), (1, 0, 0), (0, 1, 1), (1, 1, 1)] {
                let mut vol = 0.0;
                for_each_volume_singular(&incl, &cell, corner, 6, &mut |p| vol += p.weight)
                    .unwrap();
                let e = cell.extent();
                assert_relative_eq!(vol, e.x * e.y * e.z, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn pyramid_jacobian_vanishes_at_apex() {
        // integrate a delta-like probe: the weight at rho -> 1 must go to
        // zero; verified by checking no quadrature point has weight above
        // a bound times its distance to the apex
        let incl = unit_cube();
        let cell = incl.cells()[0];
        let apex_local = cell.corner(0, 0, 0);
        let apex = incl.point(&apex_local).unwrap();
        for_each_volume_singular(&incl, &cell, (0, 0, 0), 8, &mut |p| {
            let r = (p.x - apex).norm();
            assert!(
                p.weight < 10.0 * r * r + 1e-30,
                "weight {} at r {}",
                p.weight,
                r
            );
        })
        .unwrap();
    }

    #[test]
    fn singular_kernel_self_convergence() {
        // E over a unit cell with the source at a corner: orders 8 and 16
        // must agree well below the acceptance threshold
        let bottom = NurbsSurface::bilinear([
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(1.0, 1.0, 0.0),
        ]);
        let top = NurbsSurface::bilinear([
            Vec3::new(0.0, 0.0, 1.0),
            Vec3::new(1.0, 0.0, 1.0),
            Vec3::new(0.0, 1.0, 1.0),
            Vec3::new(1.0, 1.0, 1.0),
        ]);
        let incl = GeneralInclusion::new(
            bottom,
            top,
            [2, 2, 2],
            ElasticConstants::new(1.0, 0.3).unwrap(),
            SigmaInterpolation::Linear,
        )
        .unwrap();
        let cell = incl.cells()[0];
        let mat = ElasticConstants::new(1.0, 0.3).unwrap();
        let src = Vec3::new(0.0, 0.0, 0.0);
        let run = |order: usize| {
            let mut acc = crate::KernelBlock::zeros();
            for_each_volume_singular(&incl, &cell, (0, 0, 0), order, &mut |p| {
                acc += kernel_e(&src, &p.x, &mat).unwrap() * p.weight;
            })
            .unwrap();
            acc
        };
        let a = run(8);
        let b = run(16);
        for i in 0..3 {
            for j in 0..6 {
                let denom = b[(i, j)].abs().max(1e-3);
                assert!(
                    (a[(i, j)] - b[(i, j)]).abs() / denom < 1e-3,
                    "entry ({i},{j}): {} vs {}",
                    a[(i, j)],
                    b[(i, j)]
                );
            }
        }
    }

    #[test]
    fn gauss_order_convergence_is_monotone() {
        let incl = unit_cube();
        let src = Vec3::new(2.0, 1.5, -0.8);
        let mat = ElasticConstants::new(1.0, 0.3).unwrap();
        let total = |order: usize| {
            let mut acc = crate::KernelBlock::zeros();
            for cell in incl.cells() {
                tensor_points(&incl, &cell, order, &mut |p| {
                    acc += kernel_e(&src, &p.x, &mat).unwrap() * p.weight;
                })
                .unwrap();
            }
            acc
        };
        let reference = total(24);
        let mut last = f64::INFINITY;
        for order in [2usize, 4, 6, 8, 10] {
            let err = (total(order) - reference).norm();
            assert!(
                err <= last * 1.0001,
                "error grew at order {order}: {err} > {last}"
            );
            last = err;
        }
    }

    #[test]
    fn far_source_self_convergence() {
        let incl = unit_cube();
        let src = Vec3::new(3.0, -1.0, 2.0);
        let mat = ElasticConstants::new(1.0, 0.25).unwrap();
        let integrate = |opts: &QuadOptions| {
            let mut acc = crate::KernelBlock::zeros();
            for cell in incl.cells() {
                for_each_volume_regular(&incl, &cell, &src, opts, &mut |p| {
                    acc += kernel_e(&src, &p.x, &mat).unwrap() * p.weight;
                })
                .unwrap();
            }
            acc
        };
        let coarse = integrate(&QuadOptions {
            volume_order: 6,
            ..Default::default()
        });
        let fine = integrate(&QuadOptions {
            volume_order: 20,
            max_order: 24,
            ..Default::default()
        });
        let scale = fine.norm();
        assert!(
            (coarse - fine).norm() / scale < 1e-8,
            "{}",
            (coarse - fine).norm() / scale
        );
    }
}
