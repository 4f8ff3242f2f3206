//! Grid shape functions, derivative stencils at grid points, initial-stress
//! interpolation weights and strain-recovery matrices.
//!
//! Strains at grid points are recovered by differentiating the interpolated
//! displacement field, so only shape-function derivatives *at grid points*
//! are ever needed. Those collapse to short per-direction stencils: the
//! familiar two-point slope for a direction with 2 grid points, and the
//! centred / one-sided quadratic stencils otherwise.

use crate::inclusion::{GeneralInclusion, LinearInclusion, SigmaInterpolation};
use crate::{Mat3, Vec3};
use nalgebra::DMatrix;

/// Linear shape functions on xi in [-1, 1]: values and derivatives.
pub fn shape_linear(xi: f64) -> ([f64; 2], [f64; 2]) {
    ([0.5 * (1.0 - xi), 0.5 * (1.0 + xi)], [-0.5, 0.5])
}

/// Quadratic shape functions on xi in [-1, 1]: values and derivatives.
/// M2 is the bubble 1 - xi^2; M1 and M3 are the linear functions minus half
/// the bubble, which makes the set interpolatory at xi = -1, 0, 1.
pub fn shape_quadratic(xi: f64) -> ([f64; 3], [f64; 3]) {
    let m2 = 1.0 - xi * xi;
    let dm2 = -2.0 * xi;
    let m1 = 0.5 * (1.0 - xi) - 0.5 * m2;
    let dm1 = -0.5 * (1.0 + dm2);
    let m3 = 0.5 * (1.0 + xi) - 0.5 * m2;
    let dm3 = 0.5 * (1.0 - dm2);
    ([m1, m2, m3], [dm1, dm2, dm3])
}

/// Derivative stencil d/ds at grid point `index` of an equally spaced
/// 1-D grid with `n` points and spacing `delta`. Returns (grid index,
/// weight) pairs; weights sum to zero; exact for linear fields, and for
/// quadratics when n >= 3.
pub fn derivative_stencil(n: usize, delta: f64, index: usize) -> Vec<(usize, f64)> {
    assert!(n >= 2 && index < n, "stencil needs n >= 2 and index < n");
    if n == 2 {
        // one linear element over [0, delta]: dxi/ds = 2/delta
        let (_, d) = shape_linear(if index == 0 { -1.0 } else { 1.0 });
        return vec![(0, d[0] * 2.0 / delta), (1, d[1] * 2.0 / delta)];
    }
    let inv = 1.0 / delta;
    if index == 0 {
        let (_, d) = shape_quadratic(-1.0);
        vec![(0, d[0] * inv), (1, d[1] * inv), (2, d[2] * inv)]
    } else if index == n - 1 {
        let (_, d) = shape_quadratic(1.0);
        vec![
            (n - 3, d[0] * inv),
            (n - 2, d[1] * inv),
            (n - 1, d[2] * inv),
        ]
    } else {
        let (_, d) = shape_quadratic(0.0);
        vec![
            (index - 1, d[0] * inv),
            (index, d[1] * inv),
            (index + 1, d[2] * inv),
        ]
    }
}

/// Per-direction initial-stress interpolation weights at local coordinate
/// `s` in [0, 1].
fn sigma_weights_1d(n: usize, mode: SigmaInterpolation, s: f64) -> Vec<(usize, f64)> {
    let cells = n - 1;
    let scaled = s * cells as f64;
    let cell = (scaled.floor() as usize).min(cells - 1);
    match mode {
        SigmaInterpolation::Linear => {
            let frac = scaled - cell as f64;
            vec![(cell, 1.0 - frac), (cell + 1, frac)]
        }
        // constant per cell: the cell-midpoint value, shared equally by the
        // cell's end grid points
        SigmaInterpolation::Constant => vec![(cell, 0.5), (cell + 1, 0.5)],
    }
}

/// Initial-stress interpolation weights of a general inclusion at a local
/// point: tensor product of the per-direction weights. Nonzero entries
/// only, as (flat grid index, weight); weights sum to 1.
pub fn sigma_weights_general(incl: &GeneralInclusion, local: &Vec3) -> Vec<(usize, f64)> {
    let ws = sigma_weights_1d(incl.dims[0], incl.sigma, local.x);
    let wt = sigma_weights_1d(incl.dims[1], incl.sigma, local.y);
    let wr = sigma_weights_1d(incl.dims[2], incl.sigma, local.z);
    let mut out = Vec::with_capacity(ws.len() * wt.len() * wr.len());
    for &(k, vr) in &wr {
        for &(j, vt) in &wt {
            for &(i, vs) in &ws {
                out.push((incl.grid_index(i, j, k), vs * vt * vr));
            }
        }
    }
    out
}

/// Initial-stress weights along a bar: constant per subregion, the
/// subregion-midpoint value.
pub fn sigma_weights_bar(bar: &LinearInclusion, s: f64) -> Vec<(usize, f64)> {
    sigma_weights_1d(bar.internal_points, SigmaInterpolation::Constant, s)
}

/// Strain-recovery matrix of one grid point of a general inclusion:
/// the 6 x 3J matrix mapping stacked grid displacements to the Voigt strain
/// (engineering shear) at grid point `flat`.
pub fn bhat_general(
    incl: &GeneralInclusion,
    flat: usize,
) -> Result<DMatrix<f64>, crate::inclusion::InclusionError> {
    let [ns, nt, nr] = incl.dims;
    let (gi, gj, gk) = incl.grid_coords(flat);
    let local = Vec3::new(
        gi as f64 / (ns - 1) as f64,
        gj as f64 / (nt - 1) as f64,
        gk as f64 / (nr - 1) as f64,
    );
    let (_, jac, _det) = incl.point_and_jacobian(&local)?;
    let jac_inv = jac
        .try_inverse()
        .ok_or(crate::inclusion::InclusionError::DegenerateMapping {
            s: local.x,
            t: local.y,
            r: local.z,
            jac: 0.0,
        })?;

    let npts = ns * nt * nr;
    let mut out = DMatrix::zeros(6, 3 * npts);
    // local gradient of M_j at this grid point is a tensor product of one
    // 1-D stencil with Kronecker deltas in the other two directions
    let mut add = |j_flat: usize, grad_local: Vec3| {
        let g = jac_inv * grad_local;
        let (dx, dy, dz) = (g.x, g.y, g.z);
        let c = 3 * j_flat;
        out[(0, c)] += dx;
        out[(1, c + 1)] += dy;
        out[(2, c + 2)] += dz;
        out[(3, c)] += dy;
        out[(3, c + 1)] += dx;
        out[(4, c + 1)] += dz;
        out[(4, c + 2)] += dy;
        out[(5, c)] += dz;
        out[(5, c + 2)] += dx;
    };
    let ds = 1.0 / (ns - 1) as f64;
    let dt = 1.0 / (nt - 1) as f64;
    let dr = 1.0 / (nr - 1) as f64;
    for (i, w) in derivative_stencil(ns, ds, gi) {
        add(incl.grid_index(i, gj, gk), Vec3::new(w, 0.0, 0.0));
    }
    for (j, w) in derivative_stencil(nt, dt, gj) {
        add(incl.grid_index(gi, j, gk), Vec3::new(0.0, w, 0.0));
    }
    for (k, w) in derivative_stencil(nr, dr, gk) {
        add(incl.grid_index(gi, gj, k), Vec3::new(0.0, 0.0, w));
    }
    Ok(out)
}

/// Strain-recovery matrix of one grid point of a bar: only the local axial
/// strain row (row 3) is nonzero,
/// eps_z' = sum_j dM_j/ds (1/J) (v_z' . u_j).
pub fn bhat_bar(bar: &LinearInclusion, index: usize) -> DMatrix<f64> {
    let j = bar.internal_points;
    let (v, jac) = bar.axis_vector();
    let v_z = v / jac;
    let ds = 1.0 / (j - 1) as f64;
    let mut out = DMatrix::zeros(6, 3 * j);
    for (i, w) in derivative_stencil(j, ds, index) {
        let c = 3 * i;
        for d in 0..3 {
            out[(2, c + d)] += w / jac * v_z[d];
        }
    }
    out
}

/// Rotation mapped onto Voigt strain vectors is not needed anywhere in the
/// solver; bars keep their strain in local axes throughout. The Jacobi
/// matrix convention used by [`bhat_general`] is rows = dx/d(s,t,r).
pub fn jacobi_rows(dx_ds: Vec3, dx_dt: Vec3, dx_dr: Vec3) -> Mat3 {
    Mat3::from_rows(&[dx_ds.transpose(), dx_dt.transpose(), dx_dr.transpose()])
}
