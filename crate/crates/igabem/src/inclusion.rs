//! Inclusion geometry: local-to-global mappings, Jacobians, interior grids
//! and bar-local frames.
//!
//! A general inclusion is the volume swept linearly between two bounding
//! NURBS surfaces; a linear inclusion is a straight bar of circular
//! cross-section used for reinforcement bars and rock bolts.

use crate::kernels::{ElasticConstants, Frame};
use crate::nurbs::{NurbsCurve, NurbsSurface};
use crate::{Mat3, Vec3};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InclusionError {
    #[error("grid dimensions must all be at least 2, got {0:?}")]
    GridTooCoarse([usize; 3]),
    #[error("degenerate mapping: Jacobian {jac} at local ({s}, {t}, {r})")]
    DegenerateMapping { s: f64, t: f64, r: f64, jac: f64 },
    #[error("bar axis must be a degree-1 curve")]
    BarNotLinear,
    #[error("bar radius must be positive, got {0}")]
    BadRadius(f64),
    #[error("bar needs at least 2 internal points, got {0}")]
    TooFewInternalPoints(usize),
    #[error(transparent)]
    Nurbs(#[from] crate::nurbs::NurbsError),
}

/// How the initial stress is interpolated over an inclusion grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SigmaInterpolation {
    /// Multilinear between grid points.
    #[default]
    Linear,
    /// One constant value per integration cell, the cell-midpoint value.
    Constant,
}

/// A grid point of an inclusion, in local and global coordinates.
#[derive(Debug, Clone, Copy)]
pub struct GridPoint {
    pub local: Vec3,
    pub global: Vec3,
}

/// Local cell of the integration grid, a box in (s, t, r) space.
#[derive(Debug, Clone, Copy)]
pub struct CellBounds {
    pub s: (f64, f64),
    pub t: (f64, f64),
    pub r: (f64, f64),
}

impl CellBounds {
    pub fn extent(&self) -> Vec3 {
        Vec3::new(
            self.s.1 - self.s.0,
            self.t.1 - self.t.0,
            self.r.1 - self.r.0,
        )
    }

    pub fn center(&self) -> Vec3 {
        Vec3::new(
            0.5 * (self.s.0 + self.s.1),
            0.5 * (self.t.0 + self.t.1),
            0.5 * (self.r.0 + self.r.1),
        )
    }

    pub fn corner(&self, i: usize, j: usize, k: usize) -> Vec3 {
        Vec3::new(
            if i == 0 { self.s.0 } else { self.s.1 },
            if j == 0 { self.t.0 } else { self.t.1 },
            if k == 0 { self.r.0 } else { self.r.1 },
        )
    }

    pub fn contains(&self, p: &Vec3, tol: f64) -> bool {
        p.x >= self.s.0 - tol
            && p.x <= self.s.1 + tol
            && p.y >= self.t.0 - tol
            && p.y <= self.t.1 + tol
            && p.z >= self.r.0 - tol
            && p.z <= self.r.1 + tol
    }
}

/// Volume inclusion bounded by a bottom (r = 0) and top (r = 1) NURBS
/// surface, with an equally spaced interior grid.
#[derive(Debug, Clone)]
pub struct GeneralInclusion {
    pub bottom: NurbsSurface,
    pub top: NurbsSurface,
    /// Grid point counts along (s, t, r).
    pub dims: [usize; 3],
    pub material: ElasticConstants,
    pub sigma: SigmaInterpolation,
}

impl GeneralInclusion {
    pub fn new(
        bottom: NurbsSurface,
        top: NurbsSurface,
        dims: [usize; 3],
        material: ElasticConstants,
        sigma: SigmaInterpolation,
    ) -> Result<Self, InclusionError> {
        if dims.iter().any(|&n| n < 2) {
            return Err(InclusionError::GridTooCoarse(dims));
        }
        Ok(Self {
            bottom,
            top,
            dims,
            material,
            sigma,
        })
    }

    /// Map local (s, t, r) in [0,1]^3 to a global point:
    /// x = (1 - r) x_bottom(s, t) + r x_top(s, t).
    pub fn point(&self, local: &Vec3) -> Result<Vec3, InclusionError> {
        let b = self.bottom.point(local.x, local.y)?;
        let t = self.top.point(local.x, local.y)?;
        Ok(b * (1.0 - local.z) + t * local.z)
    }

    /// Point, Jacobi matrix (rows dx/ds, dx/dt, dx/dr) and Jacobian.
    pub fn point_and_jacobian(&self, local: &Vec3) -> Result<(Vec3, Mat3, f64), InclusionError> {
        let (xb, xb_s, xb_t) = self.bottom.point_and_tangents(local.x, local.y)?;
        let (xt, xt_s, xt_t) = self.top.point_and_tangents(local.x, local.y)?;
        let r = local.z;
        let x = xb * (1.0 - r) + xt * r;
        let dx_ds = xb_s * (1.0 - r) + xt_s * r;
        let dx_dt = xb_t * (1.0 - r) + xt_t * r;
        let dx_dr = xt - xb;
        let jac = Mat3::from_rows(&[dx_ds.transpose(), dx_dt.transpose(), dx_dr.transpose()]);
        let det = jac.determinant();
        if det <= 0.0 || !det.is_finite() {
            return Err(InclusionError::DegenerateMapping {
                s: local.x,
                t: local.y,
                r: local.z,
                jac: det,
            });
        }
        Ok((x, jac, det))
    }

    /// Lexicographically ordered grid points, s running fastest. This
    /// ordering is the DOF contract for all assembled matrices.
    pub fn grid_points(&self) -> Result<Vec<GridPoint>, InclusionError> {
        let [ns, nt, nr] = self.dims;
        let mut out = Vec::with_capacity(ns * nt * nr);
        for k in 0..nr {
            for j in 0..nt {
                for i in 0..ns {
                    let local = Vec3::new(
                        i as f64 / (ns - 1) as f64,
                        j as f64 / (nt - 1) as f64,
                        k as f64 / (nr - 1) as f64,
                    );
                    let global = self.point(&local)?;
                    out.push(GridPoint { local, global });
                }
            }
        }
        Ok(out)
    }

    pub fn grid_index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.dims[1] + j) * self.dims[0] + i
    }

    pub fn grid_coords(&self, flat: usize) -> (usize, usize, usize) {
        let ns = self.dims[0];
        let nt = self.dims[1];
        (flat % ns, (flat / ns) % nt, flat / (ns * nt))
    }

    /// Integration regions: the cells of the grid itself.
    pub fn cells(&self) -> Vec<CellBounds> {
        let [ns, nt, nr] = self.dims;
        let step = |n: usize, i: usize| {
            let d = 1.0 / (n - 1) as f64;
            (i as f64 * d, (i + 1) as f64 * d)
        };
        let mut out = Vec::with_capacity((ns - 1) * (nt - 1) * (nr - 1));
        for k in 0..nr - 1 {
            for j in 0..nt - 1 {
                for i in 0..ns - 1 {
                    out.push(CellBounds {
                        s: step(ns, i),
                        t: step(nt, j),
                        r: step(nr, k),
                    });
                }
            }
        }
        out
    }

    /// Invert the mapping with Newton iteration. Returns local coordinates
    /// if the point lies inside (within `tol` of) the inclusion.
    pub fn invert(&self, x: &Vec3, tol: f64) -> Option<Vec3> {
        let mut local = Vec3::new(0.5, 0.5, 0.5);
        for _ in 0..50 {
            let (xc, jac, _det) = match self.point_and_jacobian(&local) {
                Ok(v) => v,
                Err(_) => return None,
            };
            let res = x - xc;
            if res.norm() < 1e-14 {
                break;
            }
            // rows of jac are dx/dlocal, so solve jac^T * delta = res
            let delta = jac.transpose().lu().solve(&res)?;
            local += delta;
            local.x = local.x.clamp(-0.5, 1.5);
            local.y = local.y.clamp(-0.5, 1.5);
            local.z = local.z.clamp(-0.5, 1.5);
        }
        let inside = |v: f64| v >= -tol && v <= 1.0 + tol;
        if !(inside(local.x) && inside(local.y) && inside(local.z)) {
            return None;
        }
        let xc = self
            .point(&Vec3::new(
                local.x.clamp(0.0, 1.0),
                local.y.clamp(0.0, 1.0),
                local.z.clamp(0.0, 1.0),
            ))
            .ok()?;
        if (x - xc).norm() <= tol * 10.0 + 1e-12 {
            Some(local)
        } else {
            None
        }
    }
}

/// Cylindrical integration subregion of a bar.
#[derive(Debug, Clone, Copy)]
pub struct BarSubregion {
    /// Local parameter interval along the axis.
    pub s: (f64, f64),
    /// Global start/end points of the axis piece.
    pub start: Vec3,
    pub end: Vec3,
    /// Length of the piece.
    pub h: f64,
    pub radius: f64,
    pub midpoint: Vec3,
}

/// Straight reinforcement bar / rock bolt with circular cross-section over
/// which stress and strain are taken constant.
#[derive(Debug, Clone)]
pub struct LinearInclusion {
    pub axis: NurbsCurve,
    pub radius: f64,
    /// Number of internal grid points J along the bar (>= 2); the bar is
    /// divided into J - 1 integration subregions.
    pub internal_points: usize,
    pub material: ElasticConstants,
}

impl LinearInclusion {
    pub fn new(
        axis: NurbsCurve,
        radius: f64,
        internal_points: usize,
        material: ElasticConstants,
    ) -> Result<Self, InclusionError> {
        if axis.knot_vector().degree() != 1 {
            return Err(InclusionError::BarNotLinear);
        }
        if !(radius > 0.0) {
            return Err(InclusionError::BadRadius(radius));
        }
        if internal_points < 2 {
            return Err(InclusionError::TooFewInternalPoints(internal_points));
        }
        Ok(Self {
            axis,
            radius,
            internal_points,
            material,
        })
    }

    pub fn from_endpoints(
        start: Vec3,
        end: Vec3,
        radius: f64,
        internal_points: usize,
        material: ElasticConstants,
    ) -> Result<Self, InclusionError> {
        Self::new(
            NurbsCurve::line(start, end),
            radius,
            internal_points,
            material,
        )
    }

    /// Axis tangent dx/ds (constant for a single-span linear curve at any
    /// interior parameter) and its norm, the axis Jacobian.
    pub fn axis_vector(&self) -> (Vec3, f64) {
        let (_, d) = self.axis.point_and_derivative(0.5).unwrap();
        (d, d.norm())
    }

    /// Unit vector along the bar.
    pub fn direction(&self) -> Vec3 {
        let (v, j) = self.axis_vector();
        v / j
    }

    pub fn length(&self) -> f64 {
        // single linear span over [0,1]: length equals the axis Jacobian
        self.axis_vector().1
    }

    pub fn point(&self, s: f64) -> Vec3 {
        self.axis.point(s).unwrap()
    }

    /// Grid points along the axis, equally spaced in s.
    pub fn grid_points(&self) -> Vec<GridPoint> {
        let j = self.internal_points;
        (0..j)
            .map(|i| {
                let s = i as f64 / (j - 1) as f64;
                GridPoint {
                    local: Vec3::new(s, 0.0, 0.0),
                    global: self.point(s),
                }
            })
            .collect()
    }

    /// The J - 1 cylindrical integration subregions of equal length.
    pub fn subregions(&self) -> Vec<BarSubregion> {
        let j = self.internal_points;
        let n = j - 1;
        let h = self.length() / n as f64;
        (0..n)
            .map(|i| {
                let s0 = i as f64 / n as f64;
                let s1 = (i + 1) as f64 / n as f64;
                let start = self.point(s0);
                let end = self.point(s1);
                BarSubregion {
                    s: (s0, s1),
                    start,
                    end,
                    h,
                    radius: self.radius,
                    midpoint: (start + end) * 0.5,
                }
            })
            .collect()
    }

    /// Local frame for integrating with respect to a source point: z' runs
    /// along the bar and the source lies in the y'-z' plane (x' = 0). A
    /// source on the axis takes the documented global-y fallback.
    pub fn frame_for_source(&self, source: &Vec3) -> Frame {
        let v_z = self.direction();
        let origin = self.point(0.0);
        let d = source - origin;
        let lateral = d - v_z * d.dot(&v_z);
        bar_frame_from_axis(v_z, lateral)
    }
}

/// Build the bar frame from the axis direction and the lateral offset of
/// the source (the component perpendicular to the axis).
pub fn bar_frame_from_axis(v_z: Vec3, lateral: Vec3) -> Frame {
    let v_x = if lateral.norm() < 1e-12 {
        // source on the axis: x' = v_y x v_z' with v_y the global y axis,
        // or the global x axis if the bar runs along y
        let vy = Vec3::y();
        let c = vy.cross(&v_z);
        if c.norm() < 1e-8 {
            Vec3::x().cross(&v_z).normalize()
        } else {
            c.normalize()
        }
    } else {
        // V_x' = (source - field) x v_z' with field on the axis reduces to
        // lateral x v_z'
        lateral.cross(&v_z).normalize()
    };
    let v_y = v_z.cross(&v_x);
    Frame {
        x: v_x,
        y: v_y,
        z: v_z,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_mat() -> ElasticConstants {
        ElasticConstants::new(1.0, 0.0).unwrap()
    }

    fn unit_cube_inclusion(dims: [usize; 3]) -> GeneralInclusion {
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
        GeneralInclusion::new(bottom, top, dims, unit_mat(), SigmaInterpolation::Linear).unwrap()
    }

    #[test]
    fn unit_cube_map_is_identity() {
        let incl = unit_cube_inclusion([2, 2, 2]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let local = Vec3::new(rng.gen(), rng.gen(), rng.gen());
            let (x, _jac, det) = incl.point_and_jacobian(&local).unwrap();
            assert_relative_eq!(x, local, epsilon = 1e-14);
            assert_relative_eq!(det, 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn map_interpolates_bounding_surfaces() {
        let incl = unit_cube_inclusion([2, 2, 2]);
        let p = incl.point(&Vec3::new(0.3, 0.7, 0.0)).unwrap();
        assert_relative_eq!(p, incl.bottom.point(0.3, 0.7).unwrap(), epsilon = 1e-15);
        let p = incl.point(&Vec3::new(0.3, 0.7, 1.0)).unwrap();
        assert_relative_eq!(p, incl.top.point(0.3, 0.7).unwrap(), epsilon = 1e-15);
    }

    #[test]
    fn wedge_jacobian_matches_finite_differences() {
        // top face shrunk by 0.5 about its centre
        let bottom = NurbsSurface::bilinear([
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(1.0, 1.0, 0.0),
        ]);
        let shrink = |x: f64, y: f64| Vec3::new(0.5 + (x - 0.5) * 0.5, 0.5 + (y - 0.5) * 0.5, 1.0);
        let top = NurbsSurface::bilinear([
            shrink(0.0, 0.0),
            shrink(1.0, 0.0),
            shrink(0.0, 1.0),
            shrink(1.0, 1.0),
        ]);
        let incl = GeneralInclusion::new(
            bottom,
            top,
            [2, 2, 2],
            unit_mat(),
            SigmaInterpolation::Linear,
        )
        .unwrap();
        let local = Vec3::new(0.5, 0.5, 0.5);
        let (_, jac, det) = incl.point_and_jacobian(&local).unwrap();
        let h = 1e-6;
        let mut fd = Mat3::zeros();
        for d in 0..3 {
            let mut lp = local;
            lp[d] += h;
            let mut lm = local;
            lm[d] -= h;
            let xp = incl.point(&lp).unwrap();
            let xm = incl.point(&lm).unwrap();
            let g = (xp - xm) / (2.0 * h);
            for c in 0..3 {
                fd[(d, c)] = g[c];
            }
        }
        assert_relative_eq!(jac, fd, epsilon = 1e-6, max_relative = 1e-5);
        assert_relative_eq!(det, fd.determinant(), epsilon = 1e-6, max_relative = 1e-5);
    }

    #[test]
    fn grid_points_are_lexicographic_corners() {
        let incl = unit_cube_inclusion([2, 2, 2]);
        let pts = incl.grid_points().unwrap();
        assert_eq!(pts.len(), 8);
        assert_relative_eq!(pts[0].global, Vec3::new(0.0, 0.0, 0.0));
        assert_relative_eq!(pts[1].global, Vec3::new(1.0, 0.0, 0.0)); // s fastest
        assert_relative_eq!(pts[2].global, Vec3::new(0.0, 1.0, 0.0));
        assert_relative_eq!(pts[7].global, Vec3::new(1.0, 1.0, 1.0));
    }

    #[test]
    fn cells_tile_the_volume() {
        let incl = unit_cube_inclusion([3, 2, 4]);
        let cells = incl.cells();
        assert_eq!(cells.len(), 6);
        let vol: f64 = cells
            .iter()
            .map(|c| {
                let e = c.extent();
                e.x * e.y * e.z
            })
            .sum();
        assert_relative_eq!(vol, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn invert_recovers_local_coordinates() {
        let incl = unit_cube_inclusion([2, 2, 2]);
        let local = incl.invert(&Vec3::new(0.25, 0.5, 0.75), 1e-9).unwrap();
        assert_relative_eq!(local, Vec3::new(0.25, 0.5, 0.75), epsilon = 1e-9);
        assert!(incl.invert(&Vec3::new(2.0, 0.5, 0.5), 1e-9).is_none());
    }

    #[test]
    fn bar_grid_and_subregions() {
        let m = unit_mat();
        let bar = LinearInclusion::from_endpoints(
            Vec3::new(0.5, 0.5, 0.0),
            Vec3::new(0.5, 0.5, 1.0),
            0.05,
            2,
            m,
        )
        .unwrap();
        let pts = bar.grid_points();
        assert_eq!(pts.len(), 2);
        assert_relative_eq!(pts[0].local.x, 0.0);
        assert_relative_eq!(pts[1].local.x, 1.0);
        let subs = bar.subregions();
        assert_eq!(subs.len(), 1);
        assert_relative_eq!(subs[0].h, 1.0, epsilon = 1e-15);

        let bar21 = LinearInclusion::from_endpoints(
            Vec3::new(0.5, 0.5, 0.0),
            Vec3::new(0.5, 0.5, 1.0),
            0.05,
            21,
            m,
        )
        .unwrap();
        assert_eq!(bar21.grid_points().len(), 21);
        let subs = bar21.subregions();
        assert_eq!(subs.len(), 20);
        for s in &subs {
            assert_relative_eq!(s.h, 0.05, epsilon = 1e-15);
        }
        let vol: f64 = subs
            .iter()
            .map(|s| s.h * std::f64::consts::PI * s.radius * s.radius)
            .sum();
        assert_relative_eq!(vol, std::f64::consts::PI * 0.05 * 0.05, epsilon = 1e-14);
    }

    #[test]
    fn vertical_bar_frame() {
        let bar = LinearInclusion::from_endpoints(
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(0.0, 0.0, 1.0),
            0.1,
            2,
            unit_mat(),
        )
        .unwrap();
        assert_relative_eq!(bar.direction(), Vec3::z(), epsilon = 1e-15);
        assert_relative_eq!(bar.axis_vector().1, 1.0, epsilon = 1e-15);
        // on-axis source triggers the global-y fallback
        let f = bar.frame_for_source(&Vec3::new(0.0, 0.0, 2.0));
        assert_relative_eq!(f.x, Vec3::y().cross(&Vec3::z()), epsilon = 1e-14);
    }

    #[test]
    fn frame_orthonormal_and_source_in_yz_plane() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..1000 {
            let a = Vec3::new(
                rng.gen::<f64>() - 0.5,
                rng.gen::<f64>() - 0.5,
                rng.gen::<f64>() - 0.5,
            );
            let mut b = Vec3::new(
                rng.gen::<f64>() - 0.5,
                rng.gen::<f64>() - 0.5,
                rng.gen::<f64>() - 0.5,
            );
            if (b - a).norm() < 1e-3 {
                b += Vec3::new(1.0, 0.0, 0.0);
            }
            let bar = LinearInclusion::from_endpoints(a, b, 0.01, 3, unit_mat()).unwrap();
            // exercise both the generic and the on-axis branch
            let source = if rng.gen::<f64>() < 0.2 {
                a + (b - a) * 1.7
            } else {
                Vec3::new(
                    rng.gen::<f64>() - 0.5,
                    rng.gen::<f64>() - 0.5,
                    rng.gen::<f64>() - 0.5,
                )
            };
            let f = bar.frame_for_source(&source);
            assert_relative_eq!(f.x.norm(), 1.0, epsilon = 1e-12);
            assert_relative_eq!(f.y.norm(), 1.0, epsilon = 1e-12);
            assert_relative_eq!(f.z.norm(), 1.0, epsilon = 1e-12);
            assert_relative_eq!(f.x.dot(&f.y), 0.0, epsilon = 1e-12);
            assert_relative_eq!(f.y.dot(&f.z), 0.0, epsilon = 1e-12);
            assert_relative_eq!(f.x.cross(&f.y).dot(&f.z), 1.0, epsilon = 1e-12);
            // source has zero x' coordinate relative to any axis point
            let rel = source - bar.point(0.0);
            assert_relative_eq!(f.x.dot(&rel), 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn transformation_matrix_orthogonal() {
        let f = Frame {
            x: Vec3::x(),
            y: Vec3::y(),
            z: Vec3::z(),
        };
        assert_relative_eq!(f.to_matrix(), Mat3::identity());
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let a = Vec3::new(
                rng.gen::<f64>() - 0.5,
                rng.gen::<f64>() - 0.5,
                rng.gen::<f64>() - 0.5,
            );
            let b = a + Vec3::new(rng.gen::<f64>() + 0.1, rng.gen(), rng.gen());
            let bar = LinearInclusion::from_endpoints(a, b, 0.01, 2, unit_mat()).unwrap();
            let src = Vec3::new(rng.gen(), rng.gen(), rng.gen());
            let t = bar.frame_for_source(&src).to_matrix();
            assert_relative_eq!(t.transpose() * t, Mat3::identity(), epsilon = 1e-12);
            assert_relative_eq!(t.determinant(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn validation_errors() {
        let m = unit_mat();
        assert!(LinearInclusion::from_endpoints(Vec3::zeros(), Vec3::x(), -0.1, 2, m).is_err());
        assert!(LinearInclusion::from_endpoints(Vec3::zeros(), Vec3::x(), 0.1, 1, m).is_err());
        let b = NurbsSurface::bilinear([
            Vec3::zeros(),
            Vec3::x(),
            Vec3::y(),
            Vec3::new(1.0, 1.0, 0.0),
        ]);
        let t = NurbsSurface::bilinear([
            Vec3::z(),
            Vec3::new(1.0, 0.0, 1.0),
            Vec3::new(0.0, 1.0, 1.0),
            Vec3::new(1.0, 1.0, 1.0),
        ]);
        assert!(GeneralInclusion::new(b, t, [1, 2, 2], m, SigmaInterpolation::Linear).is_err());
    }
}
