//! Boundary discretisation bookkeeping and dense system assembly.
//!
//! Every displacement basis function of every patch is anchored at its
//! Greville point on the surface; anchors that coincide across patch edges
//! merge into one global degree of freedom, which enforces C0 continuity
//! and yields one collocation point per anchor. Each anchor component
//! carries exactly one unknown: the displacement where it is free, or the
//! traction where the displacement is prescribed, so the collocation system
//! is square by construction.

mod system;

pub use system::{
    assemble, boundary_displacement_row, dof_value, interior_displacement_row,
    patch_displacement_coefficients, patch_traction_coefficients, t_closed_box_sum,
    DisplacementRow, GridEntry, GridKind, GridLayout, SystemMatrices,
};

use crate::inclusion::{GeneralInclusion, LinearInclusion};
use crate::model::Model;
use crate::nurbs::{NurbsSurface, SurfDir};
use crate::quad::{for_each_surface_regular, QuadOptions, Rect};
use crate::{Mat3, Vec3};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AssemblyError {
    #[error(
        "open boundary: edge of patch '{patch}' near {position:?} is not shared with another patch"
    )]
    OpenBoundary { patch: String, position: [f64; 3] },
    #[error(
        "conflicting prescribed displacements at {position:?}, component {component}: {a} vs {b}"
    )]
    ConflictingDirichlet {
        position: [f64; 3],
        component: usize,
        a: f64,
        b: f64,
    },
    #[error(
        "boundary orientation invalid: enclosed volume {volume} is not positive; \
             patches must have outward normals"
    )]
    BadOrientation { volume: f64 },
    #[error("grid point {index} of inclusion {inclusion} lies outside the domain")]
    GridPointOutside { inclusion: usize, index: usize },
    #[error(transparent)]
    Quad(#[from] crate::quad::QuadError),
    #[error(transparent)]
    Kernel(#[from] crate::kernels::KernelError),
    #[error(transparent)]
    Nurbs(#[from] crate::nurbs::NurbsError),
    #[error(transparent)]
    Inclusion(#[from] crate::inclusion::InclusionError),
}

/// Boundary condition of one displacement component on a patch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bc {
    /// Prescribed displacement value (the traction is unknown).
    Fixed(f64),
    /// Prescribed traction value (the displacement is unknown).
    Traction(f64),
}

impl Bc {
    pub fn is_dirichlet(&self) -> bool {
        matches!(self, Bc::Fixed(_))
    }
}

/// One NURBS boundary patch with its refined field basis and per-component
/// boundary conditions. The surface here is already refined; geometry and
/// field approximation share it.
#[derive(Debug, Clone)]
pub struct Patch {
    pub name: String,
    pub surface: NurbsSurface,
    pub bc: [Bc; 3],
}

/// Inclusion of either kind.
#[derive(Debug, Clone)]
pub enum Inclusion {
    General(GeneralInclusion),
    Bar(LinearInclusion),
}

/// Value or column of one scalar degree of freedom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Dof {
    Known(f64),
    Col(usize),
}

/// A merged displacement anchor: one basis function per owning patch, all
/// sharing the same Greville surface point.
#[derive(Debug, Clone)]
pub struct Anchor {
    pub position: Vec3,
    /// (patch index, flat basis index, greville parameters)
    pub owners: Vec<(usize, usize, (f64, f64))>,
}

/// Global degree-of-freedom map.
#[derive(Debug, Clone)]
pub struct DofMap {
    pub anchors: Vec<Anchor>,
    /// anchor id per (patch, flat basis index)
    pub anchor_of: Vec<Vec<usize>>,
    /// displacement dof per (anchor, component)
    pub u_dof: Vec<[Dof; 3]>,
    /// traction column per (anchor, component) where the displacement is
    /// prescribed; shared across patches at Dirichlet-Dirichlet edges
    pub t_col: Vec<[Option<usize>; 3]>,
    pub n_unknowns: usize,
}

impl DofMap {
    /// Traction dof of one patch coefficient: the merged unknown column on
    /// Dirichlet components, the prescribed value otherwise.
    pub fn t_dof(&self, patches: &[Patch], patch: usize, flat: usize, comp: usize) -> Dof {
        match patches[patch].bc[comp] {
            Bc::Traction(v) => Dof::Known(v),
            Bc::Fixed(_) => Dof::Col(
                self.t_col[self.anchor_of[patch][flat]][comp]
                    .expect("Dirichlet component always has a traction column"),
            ),
        }
    }
}

/// Collocation point: one per anchor, at the anchor position.
#[derive(Debug, Clone)]
pub struct CollocationPoint {
    pub anchor: usize,
    pub position: Vec3,
}

/// Everything needed to assemble rows: the model, its DOF map, collocation
/// points and per-patch element rectangles.
#[derive(Debug)]
pub struct AssemblyContext<'a> {
    pub model: &'a Model,
    pub dof: DofMap,
    pub colloc: Vec<CollocationPoint>,
    pub elements: Vec<Vec<Rect>>,
    pub opts: QuadOptions,
    /// Absolute tolerance for boundary coincidence (1e-9 relative).
    pub tol_boundary: f64,
}

impl<'a> AssemblyContext<'a> {
    pub fn build(model: &'a Model) -> Result<Self, AssemblyError> {
        let opts = model.file.quadrature;
        let diameter = model.diameter();
        let tol_boundary = 1e-9 * diameter;
        let merge_tol = 1e-9 * diameter;

        // anchors: greville points merged across patches
        let mut anchors: Vec<Anchor> = Vec::new();
        let mut anchor_of: Vec<Vec<usize>> = Vec::new();
        for (pi, patch) in model.patches.iter().enumerate() {
            let (gu, gv) = patch.surface.greville();
            let nu = patch.surface.num_basis().0;
            let mut ids = vec![0usize; gu.len() * gv.len()];
            for (j, &v) in gv.iter().enumerate() {
                for (i, &u) in gu.iter().enumerate() {
                    let pos = patch.surface.point(u, v)?;
                    let flat = j * nu + i;
                    let found = anchors
                        .iter()
                        .position(|a| (a.position - pos).norm() <= merge_tol);
                    let id = match found {
                        Some(id) => {
                            anchors[id].owners.push((pi, flat, (u, v)));
                            id
                        }
                        None => {
                            anchors.push(Anchor {
                                position: pos,
                                owners: vec![(pi, flat, (u, v))],
                            });
                            anchors.len() - 1
                        }
                    };
                    ids[flat] = id;
                }
            }
            anchor_of.push(ids);
        }

        // watertightness: every basis function on a patch edge must share
        // its anchor with at least one other patch
        for (pi, patch) in model.patches.iter().enumerate() {
            let (nu, nv) = patch.surface.num_basis();
            for j in 0..nv {
                for i in 0..nu {
                    let on_edge = i == 0 || i == nu - 1 || j == 0 || j == nv - 1;
                    if !on_edge {
                        continue;
                    }
                    let a = &anchors[anchor_of[pi][j * nu + i]];
                    if a.owners.iter().all(|&(p, _, _)| p == pi) {
                        return Err(AssemblyError::OpenBoundary {
                            patch: patch.name.clone(),
                            position: a.position.into(),
                        });
                    }
                }
            }
        }

        // prescribed displacements, with conflict detection
        let mut u_dof = vec![[Dof::Known(0.0); 3]; anchors.len()];
        for (ai, anchor) in anchors.iter().enumerate() {
            for c in 0..3 {
                let mut known: Option<f64> = None;
                for &(p, _, _) in &anchor.owners {
                    if let Bc::Fixed(v) = model.patches[p].bc[c] {
                        if let Some(prev) = known {
                            if (prev - v).abs() > 0.0 {
                                return Err(AssemblyError::ConflictingDirichlet {
                                    position: anchor.position.into(),
                                    component: c,
                                    a: prev,
                                    b: v,
                                });
                            }
                        }
                        known = Some(v);
                    }
                }
                u_dof[ai][c] = match known {
                    Some(v) => Dof::Known(v),
                    None => Dof::Col(usize::MAX), // assigned below
                };
            }
        }

        // column assignment: exactly one unknown per (anchor, component)
        let mut t_col = vec![[None; 3]; anchors.len()];
        let mut col = 0usize;
        for ai in 0..anchors.len() {
            for c in 0..3 {
                match u_dof[ai][c] {
                    Dof::Col(_) => {
                        u_dof[ai][c] = Dof::Col(col);
                        col += 1;
                    }
                    Dof::Known(_) => {
                        t_col[ai][c] = Some(col);
                        col += 1;
                    }
                }
            }
        }
        let n_unknowns = col;

        let colloc: Vec<CollocationPoint> = anchors
            .iter()
            .enumerate()
            .map(|(i, a)| CollocationPoint {
                anchor: i,
                position: a.position,
            })
            .collect();

        let elements: Vec<Vec<Rect>> = model
            .patches
            .iter()
            .map(|p| {
                let su = p.surface.knot_vector(SurfDir::U).spans();
                let sv = p.surface.knot_vector(SurfDir::V).spans();
                let mut out = Vec::with_capacity(su.len() * sv.len());
                for &v in &sv {
                    for &u in &su {
                        out.push(Rect { u, v });
                    }
                }
                out
            })
            .collect();

        let ctx = Self {
            model,
            dof: DofMap {
                anchors,
                anchor_of,
                u_dof,
                t_col,
                n_unknowns,
            },
            colloc,
            elements,
            opts,
            tol_boundary,
        };
        ctx.check_orientation()?;
        Ok(ctx)
    }

    /// Enclosed volume by the divergence theorem; negative or tiny values
    /// mean inward normals or a non-closed surface.
    fn check_orientation(&self) -> Result<(), AssemblyError> {
        let mut volume = 0.0;
        let far = Vec3::repeat(f64::INFINITY);
        for (pi, patch) in self.model.patches.iter().enumerate() {
            for rect in &self.elements[pi] {
                for_each_surface_regular(&patch.surface, rect, &far, &self.opts, &mut |p| {
                    volume += p.x.dot(&p.normal) * p.weight / 3.0;
                })?;
            }
        }
        if volume <= 1e-12 {
            return Err(AssemblyError::BadOrientation { volume });
        }
        Ok(())
    }

    pub fn n_collocation(&self) -> usize {
        self.colloc.len()
    }

    /// Closest point on a patch to `x`, by seeded Gauss-Newton.
    pub fn project_to_patch(&self, patch: usize, x: &Vec3) -> (f64, f64, f64) {
        project_to_surface(&self.model.patches[patch].surface, x)
    }

    /// Nearest patch within the boundary tolerance, if any.
    pub fn boundary_location(&self, x: &Vec3) -> Option<(usize, f64, f64)> {
        let mut best: Option<(usize, f64, f64, f64)> = None;
        for pi in 0..self.model.patches.len() {
            let (u, v, d) = self.project_to_patch(pi, x);
            if best.as_ref().is_none_or(|b| d < b.3) {
                best = Some((pi, u, v, d));
            }
        }
        best.filter(|b| b.3 <= self.tol_boundary)
            .map(|(p, u, v, _)| (p, u, v))
    }
}

/// Closest-point projection onto a NURBS surface: coarse parameter seeding
/// followed by damped Gauss-Newton, clamped to the parameter domain.
pub fn project_to_surface(surface: &NurbsSurface, x: &Vec3) -> (f64, f64, f64) {
    let (u0, u1) = surface.knot_vector(SurfDir::U).domain();
    let (v0, v1) = surface.knot_vector(SurfDir::V).domain();
    let mut best = (u0, v0, f64::INFINITY);
    let n_seed = 5;
    for i in 0..=n_seed {
        for j in 0..=n_seed {
            let u = u0 + (u1 - u0) * i as f64 / n_seed as f64;
            let v = v0 + (v1 - v0) * j as f64 / n_seed as f64;
            let d = (surface.point(u, v).unwrap() - x).norm();
            if d < best.2 {
                best = (u, v, d);
            }
        }
    }
    let (mut u, mut v, _) = best;
    for _ in 0..40 {
        let (s, su, sv) = surface.point_and_tangents(u, v).unwrap();
        let r = x - s;
        let a = Mat3::new(
            su.dot(&su),
            su.dot(&sv),
            0.0,
            su.dot(&sv),
            sv.dot(&sv),
            0.0,
            0.0,
            0.0,
            1.0,
        );
        let b = Vec3::new(su.dot(&r), sv.dot(&r), 0.0);
        let Some(step) = a.lu().solve(&b) else { break };
        let du = step.x.clamp(-(u1 - u0) / 4.0, (u1 - u0) / 4.0);
        let dv = step.y.clamp(-(v1 - v0) / 4.0, (v1 - v0) / 4.0);
        u = (u + du).clamp(u0, u1);
        v = (v + dv).clamp(v0, v1);
        if du.abs() < 1e-15 * (u1 - u0) && dv.abs() < 1e-15 * (v1 - v0) {
            break;
        }
    }
    let d = (surface.point(u, v).unwrap() - x).norm();
    (u, v, d)
}

/// Built-in reference models used by the verification suite and tests.
pub mod fixtures {
    use crate::model::Model;
    use std::str::FromStr;

    /// Unit cube model built programmatically: bottom fixed, top under
    /// tension tz, sides traction-free. Faces are elevated to quadratic;
    /// `refine_c0` additionally inserts a double knot at 0.5 in both
    /// directions of the top/bottom faces and the matching directions of
    /// the side faces.
    pub fn unit_cube_model(e: f64, nu: f64, tz: f64, refine_c0: bool, inclusion: &str) -> Model {
        let mut patches = Vec::new();
        let face = |name: &str, corners: [[f64; 3]; 4], bc: [&str; 3], iu: bool, iv: bool| {
            let ins = |on: bool| if on && refine_c0 { "[0.5,0.5]" } else { "[]" };
            format!(
                r#"{{"name":"{name}","surface":{{"degree_u":1,"degree_v":1,
                   "knots_u":[0,0,1,1],"knots_v":[0,0,1,1],
                   "control_points":{}}},
                   "refine":{{"elevate_u":1,"elevate_v":1,"insert_u":{},"insert_v":{}}},
                   "bc":[{},{},{}]}}"#,
                serde_json::to_string(&corners).unwrap(),
                ins(iu),
                ins(iv),
                bc[0],
                bc[1],
                bc[2],
            )
        };
        let fix = r#"{"fixed":0.0}"#;
        let free = r#"{"traction":0.0}"#;
        let load = format!(r#"{{"traction":{tz}}}"#);
        // outward normals: bottom -z, top +z, sides outward
        patches.push(face(
            "bottom",
            [[0., 0., 0.], [0., 1., 0.], [1., 0., 0.], [1., 1., 0.]],
            [fix, fix, fix],
            true,
            true,
        ));
        patches.push(face(
            "top",
            [[0., 0., 1.], [1., 0., 1.], [0., 1., 1.], [1., 1., 1.]],
            [free, free, &load],
            true,
            true,
        ));
        patches.push(face(
            "front", // y = 0: u along +x, v along +z, normal x cross z = -y
            [[0., 0., 0.], [1., 0., 0.], [0., 0., 1.], [1., 0., 1.]],
            [free, free, free],
            true,
            false,
        ));
        patches.push(face(
            "back", // y = 1: u along +z, v along +x, normal +y
            [[0., 1., 0.], [0., 1., 1.], [1., 1., 0.], [1., 1., 1.]],
            [free, free, free],
            false,
            true,
        ));
        patches.push(face(
            "left", // x = 0: u along +z, v along +y, normal -x
            [[0., 0., 0.], [0., 0., 1.], [0., 1., 0.], [0., 1., 1.]],
            [free, free, free],
            false,
            true,
        ));
        patches.push(face(
            "right", // x = 1: u along +y, v along +z, normal +x
            [[1., 0., 0.], [1., 1., 0.], [1., 0., 1.], [1., 1., 1.]],
            [free, free, free],
            true,
            false,
        ));
        let incl = if inclusion.is_empty() {
            String::new()
        } else {
            inclusion.to_string()
        };
        let text = format!(
            r#"{{"schema_version":1,"name":"unit-cube","material":{{"e":{e},"nu":{nu}}},
               "patches":[{}],"inclusions":[{incl}]}}"#,
            patches.join(",")
        );
        Model::from_str(&text).unwrap()
    }
}
