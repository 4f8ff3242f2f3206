//! Dense assembly of the coupled system blocks: the boundary collocation
//! system L x = r + B0 sigma0, the grid displacement relation
//! u = A x + c + B0bar sigma0, and the strain recovery stack B.
//!
//! Collocation rows combine the traction kernel with the regularised free
//! term: on elements containing the collocation point the integrand is the
//! difference T(y)(R(y) - R(x)) under the collapsed fan map, elsewhere the
//! plain kernel plus a free-term accumulator that is applied through the
//! owner patch basis. Applied to a constant displacement field the row
//! therefore annihilates, which is the discrete counterpart of the vanishing
//! azimuthal term on finite domains.

use super::{AssemblyContext, AssemblyError, Dof, Inclusion};
use crate::grid::{bhat_bar, bhat_general, sigma_weights_general};
use crate::inclusion::CellBounds;
use crate::kernels::{bar_d_difference, elasticity_matrix, kelvin_t, kelvin_u, kernel_e};
use crate::par;
use crate::quad::{
    bar_subregion_block, for_each_surface_regular, for_each_surface_singular,
    for_each_volume_regular, for_each_volume_singular,
};
use crate::{Mat3, Vec3};
use nalgebra::{DMatrix, DVector, Vector3};

/// Kind of grid point carrier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridKind {
    General,
    Bar,
}

/// One inclusion grid point in the global grid numbering.
#[derive(Debug, Clone)]
pub struct GridEntry {
    pub inclusion: usize,
    pub index: usize,
    pub kind: GridKind,
    pub local: Vec3,
    pub position: Vec3,
    /// Patch location when the grid point lies on the domain boundary.
    pub boundary: Option<(usize, f64, f64)>,
}

/// Global grid numbering across inclusions, in inclusion order with each
/// inclusion's own lexicographic point order.
#[derive(Debug, Clone, Default)]
pub struct GridLayout {
    pub entries: Vec<GridEntry>,
    pub offsets: Vec<usize>,
}

impl GridLayout {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// All dense blocks of the coupled problem under one DOF map.
#[derive(Debug, Clone)]
pub struct SystemMatrices {
    pub n_unknowns: usize,
    /// Collocation operator, (3N x 3N).
    pub l: DMatrix<f64>,
    /// Right hand side from prescribed values, (3N).
    pub r: DVector<f64>,
    /// Initial-stress influence on the collocation rows, (3N x 6M).
    pub b0: DMatrix<f64>,
    /// Grid displacement operator, (3M x 3N).
    pub a_hat: DMatrix<f64>,
    /// Grid displacement contribution of prescribed values, (3M).
    pub c_bar: DVector<f64>,
    /// Initial-stress influence on grid displacements, (3M x 6M).
    pub b0_bar: DMatrix<f64>,
    /// Strain recovery, (6M x 3M).
    pub b_hat: DMatrix<f64>,
    /// Block-diagonal constitutive difference D - D_incl, (6M x 6M);
    /// bar blocks live in bar-local axes.
    pub d_diff: DMatrix<f64>,
    pub grid: GridLayout,
}

/// One displacement evaluation row: u(x) = mat * x + known + b0 * sigma0.
#[derive(Debug, Clone)]
pub struct DisplacementRow {
    pub mat: DMatrix<f64>,
    pub known: Vector3<f64>,
    pub b0: DMatrix<f64>,
    /// Accumulated sum of T integrals; approximately -I for interior
    /// points, which doubles as an inside-the-domain check.
    pub freeterm: Mat3,
}

struct RowAcc {
    mat: DMatrix<f64>,
    known: Vector3<f64>,
}

impl RowAcc {
    fn new(n: usize) -> Self {
        Self {
            mat: DMatrix::zeros(3, n),
            known: Vector3::zeros(),
        }
    }

    fn scatter(&mut self, dofs: [Dof; 3], block: &Mat3, sign: f64) {
        for c in 0..3 {
            match dofs[c] {
                Dof::Col(col) => {
                    for i in 0..3 {
                        self.mat[(i, col)] += sign * block[(i, c)];
                    }
                }
                Dof::Known(v) => {
                    if v != 0.0 {
                        for i in 0..3 {
                            self.known[i] += sign * block[(i, c)] * v;
                        }
                    }
                }
            }
        }
    }
}

fn u_dofs(ctx: &AssemblyContext, patch: usize, flat: usize) -> [Dof; 3] {
    ctx.dof.u_dof[ctx.dof.anchor_of[patch][flat]]
}

fn t_dofs(ctx: &AssemblyContext, patch: usize, flat: usize) -> [Dof; 3] {
    [
        ctx.dof.t_dof(&ctx.model.patches, patch, flat, 0),
        ctx.dof.t_dof(&ctx.model.patches, patch, flat, 1),
        ctx.dof.t_dof(&ctx.model.patches, patch, flat, 2),
    ]
}

/// Surface part of one boundary-integral evaluation at `source`.
///
/// `collocation` selects the regularised collocation form (T against
/// displacement differences plus the free-term treatment, with
/// `singular_on` giving the source's parameter preimages on its owner
/// patches); otherwise the plain interior representation is assembled.
fn surface_row(
    ctx: &AssemblyContext,
    source: &Vec3,
    singular_on: &[Option<(f64, f64)>],
    collocation: bool,
) -> Result<(RowAcc, Mat3), AssemblyError> {
    let domain = &ctx.model.domain;
    let mut acc = RowAcc::new(ctx.dof.n_unknowns);
    let mut freeterm = Mat3::zeros();
    // +1 for the collocation equation (T terms on the left), -1 for the
    // Somigliana evaluation u = integral(U t - T u)
    let t_sign = if collocation { 1.0 } else { -1.0 };
    let u_sign = -t_sign;

    for (pi, patch) in ctx.model.patches.iter().enumerate() {
        let surface = &patch.surface;
        let sing = singular_on.get(pi).copied().flatten();
        for rect in &ctx.elements[pi] {
            let param_tol = 1e-9 * ((rect.u.1 - rect.u.0) + (rect.v.1 - rect.v.0));
            let singular_here = sing.is_some_and(|(u, v)| rect.contains(u, v, param_tol));
            if singular_here {
                let (su, sv) = sing.unwrap();
                let base_sing = surface.nonzero_rational_basis(su, sv)?;
                for_each_surface_singular(
                    surface,
                    rect,
                    (su, sv),
                    ctx.opts.surface_singular_order,
                    &mut |p| {
                        let t = kelvin_t(source, &p.x, &p.normal, domain)
                            .expect("fan quadrature points are distinct from the apex");
                        let u_kernel = kelvin_u(source, &p.x, domain)
                            .expect("fan quadrature points are distinct from the apex");
                        let basis = surface
                            .nonzero_rational_basis(p.u, p.v)
                            .expect("quadrature points stay inside the parameter domain");
                        // difference form: R(y) - R(x_n) over the union of
                        // supports
                        for &(flat, val) in &basis {
                            let at_sing =
                                base_sing.iter().find(|b| b.0 == flat).map_or(0.0, |b| b.1);
                            let diff = val - at_sing;
                            acc.scatter(u_dofs(ctx, pi, flat), &(t * (p.weight * diff)), t_sign);
                            acc.scatter(
                                t_dofs(ctx, pi, flat),
                                &(u_kernel * (p.weight * val)),
                                u_sign,
                            );
                        }
                        for &(flat, at_sing) in &base_sing {
                            if basis.iter().all(|b| b.0 != flat) {
                                acc.scatter(
                                    u_dofs(ctx, pi, flat),
                                    &(t * (-p.weight * at_sing)),
                                    t_sign,
                                );
                            }
                        }
                    },
                )?;
            } else {
                for_each_surface_regular(surface, rect, source, &ctx.opts, &mut |p| {
                    let t = kelvin_t(source, &p.x, &p.normal, domain)
                        .expect("source does not lie on a regular element");
                    let u_kernel = kelvin_u(source, &p.x, domain)
                        .expect("source does not lie on a regular element");
                    let basis = surface
                        .nonzero_rational_basis(p.u, p.v)
                        .expect("quadrature points stay inside the parameter domain");
                    for &(flat, val) in &basis {
                        acc.scatter(u_dofs(ctx, pi, flat), &(t * (p.weight * val)), t_sign);
                        acc.scatter(
                            t_dofs(ctx, pi, flat),
                            &(u_kernel * (p.weight * val)),
                            u_sign,
                        );
                    }
                    freeterm += t * p.weight;
                })?;
            }
        }
    }
    Ok((acc, freeterm))
}

/// Sum of the T kernel over the whole boundary seen from `source`; equals
/// -I for points inside the domain.
pub fn t_closed_box_sum(ctx: &AssemblyContext, source: &Vec3) -> Result<Mat3, AssemblyError> {
    let domain = &ctx.model.domain;
    let mut sum = Mat3::zeros();
    for (pi, patch) in ctx.model.patches.iter().enumerate() {
        for rect in &ctx.elements[pi] {
            for_each_surface_regular(&patch.surface, rect, source, &ctx.opts, &mut |p| {
                sum += kelvin_t(source, &p.x, &p.normal, domain)
                    .expect("closed-box source must be off the boundary")
                    * p.weight;
            })?;
        }
    }
    Ok(sum)
}

/// Split a cell at an interior point so the point becomes a corner of each
/// piece; returns the pieces with the corner index the point takes in each.
fn split_cell_at(
    cell: &CellBounds,
    local: &Vec3,
    tol: f64,
) -> Vec<(CellBounds, (usize, usize, usize))> {
    let axis = |lo: f64, hi: f64, x: f64| -> Vec<((f64, f64), usize)> {
        if (x - lo).abs() <= tol {
            vec![((lo, hi), 0)]
        } else if (x - hi).abs() <= tol {
            vec![((lo, hi), 1)]
        } else {
            vec![((lo, x), 1), ((x, hi), 0)]
        }
    };
    let mut out = Vec::new();
    for (s, cs) in axis(cell.s.0, cell.s.1, local.x) {
        for (t, ct) in axis(cell.t.0, cell.t.1, local.y) {
            for (r, cr) in axis(cell.r.0, cell.r.1, local.z) {
                out.push((CellBounds { s, t, r }, (cs, ct, cr)));
            }
        }
    }
    out
}

/// Volume row: integral of E against the initial-stress interpolation of
/// every inclusion, seen from `source`. `own` carries the known local
/// coordinates when the source is a grid point of one of the inclusions.
fn volume_row(
    ctx: &AssemblyContext,
    grid: &GridLayout,
    source: &Vec3,
    own: Option<(usize, Vec3)>,
) -> Result<DMatrix<f64>, AssemblyError> {
    let domain = &ctx.model.domain;
    let m = grid.len();
    let mut row = DMatrix::zeros(3, 6 * m);
    for (ii, incl) in ctx.model.inclusions.iter().enumerate() {
        let offset = grid.offsets[ii];
        match incl {
            Inclusion::General(g) => {
                let local_opt = match own {
                    Some((oi, local)) if oi == ii => Some(local),
                    _ => g.invert(source, ctx.tol_boundary),
                };
                let tol = 1e-9;
                for cell in g.cells() {
                    let mut sink = |p: &crate::quad::VolumePoint| {
                        let e = kernel_e(source, &p.x, domain)
                            .expect("volume quadrature points are distinct from the source");
                        for (j, wj) in sigma_weights_general(g, &p.local) {
                            let col = 6 * (offset + j);
                            let scaled = e * (p.weight * wj);
                            for a in 0..3 {
                                for b in 0..6 {
                                    row[(a, col + b)] += scaled[(a, b)];
                                }
                            }
                        }
                    };
                    match local_opt {
                        Some(local) if cell.contains(&local, tol) => {
                            for (piece, corner) in split_cell_at(&cell, &local, tol) {
                                for_each_volume_singular(
                                    g,
                                    &piece,
                                    corner,
                                    ctx.opts.volume_singular_order,
                                    &mut sink,
                                )?;
                            }
                        }
                        _ => for_each_volume_regular(g, &cell, source, &ctx.opts, &mut sink)?,
                    }
                }
            }
            Inclusion::Bar(b) => {
                for (k, sub) in b.subregions().iter().enumerate() {
                    let block = bar_subregion_block(b, sub, source, domain);
                    // constant stress per subregion: the midpoint value,
                    // half from each end grid point
                    for j in [k, k + 1] {
                        let col = 6 * (offset + j);
                        for a in 0..3 {
                            for c in 0..6 {
                                row[(a, col + c)] += 0.5 * block[(a, c)];
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(row)
}

/// Displacement row of an interior point (Somigliana identity plus the
/// inclusion term).
pub fn interior_displacement_row(
    ctx: &AssemblyContext,
    grid: &GridLayout,
    source: &Vec3,
    own: Option<(usize, Vec3)>,
) -> Result<DisplacementRow, AssemblyError> {
    let none = vec![None; ctx.model.patches.len()];
    let (acc, freeterm) = surface_row(ctx, source, &none, false)?;
    let b0 = volume_row(ctx, grid, source, own)?;
    Ok(DisplacementRow {
        mat: acc.mat,
        known: acc.known,
        b0,
        freeterm,
    })
}

/// Displacement row of a boundary point: plain basis evaluation on the
/// owning patch; the initial-stress block is zero.
pub fn boundary_displacement_row(
    ctx: &AssemblyContext,
    grid_len: usize,
    patch: usize,
    u: f64,
    v: f64,
) -> Result<DisplacementRow, AssemblyError> {
    let mut acc = RowAcc::new(ctx.dof.n_unknowns);
    let basis = ctx.model.patches[patch]
        .surface
        .nonzero_rational_basis(u, v)?;
    for (flat, val) in basis {
        acc.scatter(u_dofs(ctx, patch, flat), &(Mat3::identity() * val), 1.0);
    }
    Ok(DisplacementRow {
        mat: acc.mat,
        known: acc.known,
        b0: DMatrix::zeros(3, 6 * grid_len),
        freeterm: Mat3::zeros(),
    })
}

fn build_grid_layout(ctx: &AssemblyContext) -> Result<GridLayout, AssemblyError> {
    let mut entries = Vec::new();
    let mut offsets = Vec::new();
    for (ii, incl) in ctx.model.inclusions.iter().enumerate() {
        offsets.push(entries.len());
        let (kind, points) = match incl {
            Inclusion::General(g) => (GridKind::General, g.grid_points()?),
            Inclusion::Bar(b) => (GridKind::Bar, b.grid_points()),
        };
        for (index, gp) in points.into_iter().enumerate() {
            let boundary = ctx.boundary_location(&gp.global);
            entries.push(GridEntry {
                inclusion: ii,
                index,
                kind,
                local: gp.local,
                position: gp.global,
                boundary,
            });
        }
    }
    Ok(GridLayout { entries, offsets })
}

/// Assemble every system block for a model.
pub fn assemble(ctx: &AssemblyContext) -> Result<SystemMatrices, AssemblyError> {
    let n = ctx.dof.n_unknowns;
    let grid = build_grid_layout(ctx)?;
    let m = grid.len();

    // collocation rows
    let n_colloc = ctx.colloc.len();
    let rows: Vec<Result<(RowAcc, DMatrix<f64>), AssemblyError>> =
        par::map_indexed(n_colloc, |ci| {
            let point = &ctx.colloc[ci];
            let anchor = &ctx.dof.anchors[point.anchor];
            let mut singular_on = vec![None; ctx.model.patches.len()];
            for &(pi, _, uv) in &anchor.owners {
                singular_on[pi].get_or_insert(uv);
            }
            let (mut acc, freeterm) = surface_row(ctx, &point.position, &singular_on, true)?;
            // free term applies to u(x_n) through the first owner's basis
            let (opi, _, (ou, ov)) = anchor.owners[0];
            let base = ctx.model.patches[opi]
                .surface
                .nonzero_rational_basis(ou, ov)?;
            for (flat, val) in base {
                acc.scatter(u_dofs(ctx, opi, flat), &(freeterm * val), -1.0);
            }
            let b0row = volume_row(ctx, &grid, &point.position, None)?;
            Ok((acc, b0row))
        });

    let mut l = DMatrix::zeros(3 * n_colloc, n);
    let mut r = DVector::zeros(3 * n_colloc);
    let mut b0 = DMatrix::zeros(3 * n_colloc, 6 * m);
    for (ci, row) in rows.into_iter().enumerate() {
        let (acc, b0row) = row?;
        l.rows_mut(3 * ci, 3).copy_from(&acc.mat);
        // knowns move to the right hand side
        for i in 0..3 {
            r[3 * ci + i] = -acc.known[i];
        }
        b0.rows_mut(3 * ci, 3).copy_from(&b0row);
    }

    // grid displacement rows
    let grid_rows: Vec<Result<DisplacementRow, AssemblyError>> = par::map_indexed(m, |gi| {
        let entry = &grid.entries[gi];
        match entry.boundary {
            Some((patch, u, v)) => boundary_displacement_row(ctx, m, patch, u, v),
            None => {
                let row = interior_displacement_row(
                    ctx,
                    &grid,
                    &entry.position,
                    Some((entry.inclusion, entry.local)),
                )?;
                if (row.freeterm + Mat3::identity()).norm() > 0.3 {
                    return Err(AssemblyError::GridPointOutside {
                        inclusion: entry.inclusion,
                        index: entry.index,
                    });
                }
                Ok(row)
            }
        }
    });
    let mut a_hat = DMatrix::zeros(3 * m, n);
    let mut c_bar = DVector::zeros(3 * m);
    let mut b0_bar = DMatrix::zeros(3 * m, 6 * m);
    for (gi, row) in grid_rows.into_iter().enumerate() {
        let row = row?;
        a_hat.rows_mut(3 * gi, 3).copy_from(&row.mat);
        for i in 0..3 {
            c_bar[3 * gi + i] = row.known[i];
        }
        b0_bar.rows_mut(3 * gi, 3).copy_from(&row.b0);
    }

    // strain recovery and constitutive difference, block per grid point
    let mut b_hat = DMatrix::zeros(6 * m, 3 * m);
    let mut d_diff = DMatrix::zeros(6 * m, 6 * m);
    let d_domain = elasticity_matrix(&ctx.model.domain)?;
    for (ii, incl) in ctx.model.inclusions.iter().enumerate() {
        let offset = grid.offsets[ii];
        match incl {
            Inclusion::General(g) => {
                let count = g.dims.iter().product::<usize>();
                let d_incl = elasticity_matrix(&g.material)?;
                let dd = d_domain - d_incl;
                for k in 0..count {
                    let local_bhat = bhat_general(g, k)?;
                    b_hat
                        .view_mut((6 * (offset + k), 3 * offset), (6, 3 * count))
                        .copy_from(&local_bhat);
                    d_diff
                        .view_mut((6 * (offset + k), 6 * (offset + k)), (6, 6))
                        .copy_from(&dd);
                }
            }
            Inclusion::Bar(b) => {
                let count = b.internal_points;
                let dd = bar_d_difference(&ctx.model.domain, &b.material);
                for k in 0..count {
                    let local_bhat = bhat_bar(b, k);
                    b_hat
                        .view_mut((6 * (offset + k), 3 * offset), (6, 3 * count))
                        .copy_from(&local_bhat);
                    d_diff
                        .view_mut((6 * (offset + k), 6 * (offset + k)), (6, 6))
                        .copy_from(&dd);
                }
            }
        }
    }

    Ok(SystemMatrices {
        n_unknowns: n,
        l,
        r,
        b0,
        a_hat,
        c_bar,
        b0_bar,
        b_hat,
        d_diff,
        grid,
    })
}

/// Value of one solved degree of freedom, combining knowns and solution.
pub fn dof_value(dof: Dof, x: &DVector<f64>) -> f64 {
    match dof {
        Dof::Known(v) => v,
        Dof::Col(c) => x[c],
    }
}

/// Boundary displacement coefficients of a patch after solving.
pub fn patch_displacement_coefficients(
    ctx: &AssemblyContext,
    patch: usize,
    x: &DVector<f64>,
) -> Vec<Vector3<f64>> {
    let n = ctx.model.patches[patch].surface.num_basis();
    (0..n.0 * n.1)
        .map(|flat| {
            let dofs = u_dofs(ctx, patch, flat);
            Vector3::new(
                dof_value(dofs[0], x),
                dof_value(dofs[1], x),
                dof_value(dofs[2], x),
            )
        })
        .collect()
}

/// Traction coefficients of a patch after solving.
pub fn patch_traction_coefficients(
    ctx: &AssemblyContext,
    patch: usize,
    x: &DVector<f64>,
) -> Vec<Vector3<f64>> {
    let n = ctx.model.patches[patch].surface.num_basis();
    (0..n.0 * n.1)
        .map(|flat| {
            let dofs = t_dofs(ctx, patch, flat);
            Vector3::new(
                dof_value(dofs[0], x),
                dof_value(dofs[1], x),
                dof_value(dofs[2], x),
            )
        })
        .collect()
}
