//! Solution procedures for the initial-stress coupled system: the one-step
//! condensed solve, the full block solve in boundary unknowns and grid
//! strains, and the modified Newton-Raphson iteration that reuses one
//! factorisation of the homogeneous operator.

use crate::assembly::{GridKind, SystemMatrices};
use crate::Voigt;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("boundary operator is singular")]
    SingularBoundary,
    #[error("strain coupling operator (I - C0 (D - D_incl)) is singular")]
    SingularCoupling,
    #[error("coupled block system is singular")]
    SingularBlock,
    #[error(
        "modified Newton-Raphson did not converge in {iterations} iterations \
             (last relative increment {last:e})"
    )]
    NoConvergence {
        iterations: usize,
        last: f64,
        /// Relative increment norm of every iteration taken.
        history: Vec<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveMethod {
    OneStep,
    Coupled,
    Newton,
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub method: SolveMethod,
    /// Relative Euclidean norm of the boundary increment that stops the
    /// Newton iteration.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            method: SolveMethod::OneStep,
            tol: 1e-8,
            max_iter: 50,
        }
    }
}

/// Solved fields. Bar grid points carry strain and initial stress in their
/// local axes (axial component third); general inclusions in global Voigt.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub method: SolveMethod,
    pub x: DVector<f64>,
    pub grid_u: DVector<f64>,
    pub grid_eps: DVector<f64>,
    pub grid_sigma0: DVector<f64>,
    /// Relative boundary-increment norms per Newton iteration.
    pub increments: Vec<f64>,
    /// Relative residual of the collocation equation at the solution.
    pub residual: f64,
}

fn collocation_residual(sys: &SystemMatrices, x: &DVector<f64>, sigma0: &DVector<f64>) -> f64 {
    let lhs = &sys.l * x;
    let rhs = &sys.r + &sys.b0 * sigma0;
    let scale = lhs.norm().max(rhs.norm()).max(1e-300);
    (lhs - rhs).norm() / scale
}

/// One-step solve: eliminate the strain unknowns into a modified left and
/// right hand side and solve a single boundary system.
pub fn solve_onestep(sys: &SystemMatrices) -> Result<SolveResult, SolveError> {
    let m = sys.grid.len();
    if m == 0 {
        let lu = sys.l.clone().lu();
        let x = lu.solve(&sys.r).ok_or(SolveError::SingularBoundary)?;
        let residual = collocation_residual(sys, &x, &DVector::zeros(0));
        return Ok(SolveResult {
            method: SolveMethod::OneStep,
            x,
            grid_u: DVector::zeros(0),
            grid_eps: DVector::zeros(0),
            grid_sigma0: DVector::zeros(0),
            increments: Vec::new(),
            residual,
        });
    }
    let c_hat = &sys.b_hat * &sys.a_hat;
    let c0_hat = &sys.b_hat * &sys.b0_bar;
    let cbb = &sys.b_hat * &sys.c_bar;
    let w = DMatrix::identity(6 * m, 6 * m) - &c0_hat * &sys.d_diff;
    let w_lu = w.lu();
    let a = w_lu.solve(&c_hat).ok_or(SolveError::SingularCoupling)?;
    let b = w_lu.solve(&cbb).ok_or(SolveError::SingularCoupling)?;
    let b0_dd = &sys.b0 * &sys.d_diff;
    let l_mod = &sys.l - &b0_dd * &a;
    let r_mod = &sys.r + &b0_dd * &b;
    let x = l_mod
        .lu()
        .solve(&r_mod)
        .ok_or(SolveError::SingularBoundary)?;
    let eps = &a * &x + &b;
    let sigma0 = &sys.d_diff * &eps;
    let u = &sys.a_hat * &x + &sys.c_bar + &sys.b0_bar * &sigma0;
    let residual = collocation_residual(sys, &x, &sigma0);
    Ok(SolveResult {
        method: SolveMethod::OneStep,
        x,
        grid_u: u,
        grid_eps: eps,
        grid_sigma0: sigma0,
        increments: Vec::new(),
        residual,
    })
}

/// Full block solve in boundary unknowns and grid strains.
pub fn solve_coupled(sys: &SystemMatrices) -> Result<SolveResult, SolveError> {
    let m = sys.grid.len();
    if m == 0 {
        let mut out = solve_onestep(sys)?;
        out.method = SolveMethod::Coupled;
        return Ok(out);
    }
    let n = sys.n_unknowns;
    let size = n + 6 * m;
    let c_hat = &sys.b_hat * &sys.a_hat;
    let c0_hat = &sys.b_hat * &sys.b0_bar;
    let cbb = &sys.b_hat * &sys.c_bar;
    let mut big = DMatrix::zeros(size, size);
    big.view_mut((0, 0), (n, n)).copy_from(&sys.l);
    big.view_mut((0, n), (n, 6 * m))
        .copy_from(&(-(&sys.b0 * &sys.d_diff)));
    big.view_mut((n, 0), (6 * m, n)).copy_from(&(-&c_hat));
    big.view_mut((n, n), (6 * m, 6 * m))
        .copy_from(&(DMatrix::identity(6 * m, 6 * m) - &c0_hat * &sys.d_diff));
    let mut rhs = DVector::zeros(size);
    rhs.rows_mut(0, n).copy_from(&sys.r);
    rhs.rows_mut(n, 6 * m).copy_from(&cbb);
    let sol = big.lu().solve(&rhs).ok_or(SolveError::SingularBlock)?;
    let x = sol.rows(0, n).into_owned();
    let eps = sol.rows(n, 6 * m).into_owned();
    let sigma0 = &sys.d_diff * &eps;
    let u = &sys.a_hat * &x + &sys.c_bar + &sys.b0_bar * &sigma0;
    let residual = collocation_residual(sys, &x, &sigma0);
    Ok(SolveResult {
        method: SolveMethod::Coupled,
        x,
        grid_u: u,
        grid_eps: eps,
        grid_sigma0: sigma0,
        increments: Vec::new(),
        residual,
    })
}

/// Modified Newton-Raphson: factorise the homogeneous operator once, then
/// iterate boundary increments driven by the current initial stresses and
/// sum them until the relative increment norm drops below tolerance.
pub fn solve_newton_modified(
    sys: &SystemMatrices,
    opts: &SolveOptions,
) -> Result<SolveResult, SolveError> {
    let m = sys.grid.len();
    let l_lu = sys.l.clone().lu();
    let mut x = l_lu.solve(&sys.r).ok_or(SolveError::SingularBoundary)?;
    let mut sigma0 = DVector::zeros(6 * m);
    let mut increments = Vec::new();
    let mut converged = m == 0;
    for _ in 0..opts.max_iter {
        if converged {
            break;
        }
        // lagged field update, then one boundary re-solve
        let u = &sys.a_hat * &x + &sys.c_bar + &sys.b0_bar * &sigma0;
        let eps = &sys.b_hat * &u;
        sigma0 = &sys.d_diff * &eps;
        let x_new = l_lu
            .solve(&(&sys.r + &sys.b0 * &sigma0))
            .ok_or(SolveError::SingularBoundary)?;
        let rel = (&x_new - &x).norm() / x_new.norm().max(1e-300);
        increments.push(rel);
        x = x_new;
        if rel < opts.tol {
            converged = true;
        }
    }
    if !converged {
        return Err(SolveError::NoConvergence {
            iterations: increments.len(),
            last: increments.last().copied().unwrap_or(f64::NAN),
            history: increments,
        });
    }
    // final self-consistent field update
    let u = &sys.a_hat * &x + &sys.c_bar + &sys.b0_bar * &sigma0;
    let eps = &sys.b_hat * &u;
    let sigma0 = &sys.d_diff * &eps;
    let u = &sys.a_hat * &x + &sys.c_bar + &sys.b0_bar * &sigma0;
    let residual = collocation_residual(sys, &x, &sigma0);
    Ok(SolveResult {
        method: SolveMethod::Newton,
        x,
        grid_u: u,
        grid_eps: eps,
        grid_sigma0: sigma0,
        increments,
        residual,
    })
}

pub fn solve(sys: &SystemMatrices, opts: &SolveOptions) -> Result<SolveResult, SolveError> {
    match opts.method {
        SolveMethod::OneStep => solve_onestep(sys),
        SolveMethod::Coupled => solve_coupled(sys),
        SolveMethod::Newton => solve_newton_modified(sys, opts),
    }
}

/// Post-processed fields at one grid point.
#[derive(Debug, Clone, Serialize)]
pub struct GridField {
    /// Inclusion stress D_incl eps (total stress D eps minus the initial
    /// stress), in the same axes as the strain.
    pub stress: [f64; 6],
    /// Axial force E_incl * eps_axial * pi R^2 for bar points.
    pub axial_force: Option<f64>,
}

/// Recover inclusion stresses and bar axial forces from a solved result.
pub fn recover_fields(
    result: &SolveResult,
    sys: &SystemMatrices,
    inclusions: &[crate::assembly::Inclusion],
) -> Vec<GridField> {
    let mut out = Vec::with_capacity(sys.grid.len());
    for (gi, entry) in sys.grid.entries.iter().enumerate() {
        let eps = Voigt::from_iterator((0..6).map(|c| result.grid_eps[6 * gi + c]));
        match (&inclusions[entry.inclusion], entry.kind) {
            (crate::assembly::Inclusion::General(g), GridKind::General) => {
                let d_incl = crate::kernels::elasticity_matrix(&g.material)
                    .expect("validated inclusion material");
                let stress = d_incl * eps;
                out.push(GridField {
                    stress: stress.into(),
                    axial_force: None,
                });
            }
            (crate::assembly::Inclusion::Bar(b), _) => {
                let axial_stress = b.material.e * eps[2];
                let force = axial_stress * std::f64::consts::PI * b.radius * b.radius;
                let mut stress = [0.0; 6];
                stress[2] = axial_stress;
                out.push(GridField {
                    stress,
                    axial_force: Some(force),
                });
            }
            _ => unreachable!("grid entry kind matches its inclusion"),
        }
    }
    out
}
