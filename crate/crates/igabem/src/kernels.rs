//! Fundamental solutions of 3-D elastostatics (Kelvin displacement U,
//! traction T and the strain kernel E), constitutive matrices and Voigt
//! conversions.
//!
//! Conventions, pinned by the cross-checks in the test suite:
//! the distance vector runs from the source to the field point,
//! E is the strain of the columns of U taken at the field point, and
//! strain Voigt vectors carry engineering shear (gamma = 2 eps).

use crate::{KernelBlock, Mat3, Mat6, Vec3, Voigt};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("source and field point coincide")]
    CoincidentPoints,
    #[error("invalid elastic constants: {0}")]
    InvalidConstants(String),
    #[error("Poisson ratio {0} too close to 0.5 for a finite elasticity matrix")]
    Incompressible(f64),
}

/// Elastic constants of an isotropic material together with the derived
/// kernel constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElasticConstants {
    /// Young's modulus.
    pub e: f64,
    /// Poisson's ratio.
    pub nu: f64,
    /// Shear modulus G = E / (2 (1 + nu)).
    pub g: f64,
    /// Kernel constant C = 1 / (16 pi G (1 - nu)).
    pub c: f64,
    /// C3 = 1 - 2 nu.
    pub c3: f64,
    /// C4 = 3.
    pub c4: f64,
}

impl ElasticConstants {
    pub fn new(e: f64, nu: f64) -> Result<Self, KernelError> {
        if !(e > 0.0) || !e.is_finite() {
            return Err(KernelError::InvalidConstants(format!(
                "Young's modulus must be positive, got {e}"
            )));
        }
        if !(-1.0 < nu && nu < 0.5) {
            return Err(KernelError::InvalidConstants(format!(
                "Poisson's ratio must lie in (-1, 0.5), got {nu}"
            )));
        }
        let g = e / (2.0 * (1.0 + nu));
        let c = 1.0 / (16.0 * std::f64::consts::PI * g * (1.0 - nu));
        Ok(Self {
            e,
            nu,
            g,
            c,
            c3: 1.0 - 2.0 * nu,
            c4: 3.0,
        })
    }
}

fn distance(source: &Vec3, field: &Vec3) -> Result<(f64, Vec3), KernelError> {
    let d = field - source;
    let r = d.norm();
    if r == 0.0 || !r.is_finite() {
        return Err(KernelError::CoincidentPoints);
    }
    Ok((r, d / r))
}

/// Kelvin displacement fundamental solution,
/// U_ij = C / r * ((3 - 4 nu) delta_ij + r,i r,j).
pub fn kelvin_u(source: &Vec3, field: &Vec3, mat: &ElasticConstants) -> Result<Mat3, KernelError> {
    let (r, rh) = distance(source, field)?;
    let c5 = 3.0 - 4.0 * mat.nu;
    let mut out = Mat3::zeros();
    for i in 0..3 {
        for j in 0..3 {
            let delta = if i == j { 1.0 } else { 0.0 };
            out[(i, j)] = mat.c / r * (c5 * delta + rh[i] * rh[j]);
        }
    }
    Ok(out)
}

/// Kelvin traction fundamental solution for outward unit normal `n` at the
/// field point,
/// T_ij = -1/(8 pi (1-nu) r^2) [ dr/dn ((1-2nu) delta_ij + 3 r,i r,j)
///                               - (1-2nu)(r,i n_j - r,j n_i) ].
pub fn kelvin_t(
    source: &Vec3,
    field: &Vec3,
    n: &Vec3,
    mat: &ElasticConstants,
) -> Result<Mat3, KernelError> {
    let (r, rh) = distance(source, field)?;
    let drdn = rh.dot(n);
    let k = -1.0 / (8.0 * std::f64::consts::PI * (1.0 - mat.nu) * r * r);
    let c3 = mat.c3;
    let mut out = Mat3::zeros();
    for i in 0..3 {
        for j in 0..3 {
            let delta = if i == j { 1.0 } else { 0.0 };
            out[(i, j)] = k
                * (drdn * (c3 * delta + 3.0 * rh[i] * rh[j]) - c3 * (rh[i] * n[j] - rh[j] * n[i]));
        }
    }
    Ok(out)
}

/// Negative-control hook for the field verification suite: when the
/// IGABEM_TEST_PERTURB_KERNEL environment variable is set, the strain
/// kernel picks up a relative 1e-3 perturbation so that every oracle
/// comparison against it must fail.
fn perturbation() -> f64 {
    static PERTURB: std::sync::OnceLock<f64> = std::sync::OnceLock::new();
    *PERTURB.get_or_init(|| {
        if std::env::var_os("IGABEM_TEST_PERTURB_KERNEL").is_some() {
            1.0 + 1e-3
        } else {
            1.0
        }
    })
}

fn e_tensor_from_rhat(rh: &Vec3, scale: f64, mat: &ElasticConstants) -> KernelBlock {
    // E_ijk = scale * [C3 (r,k d_ij + r,j d_ik) - r,i d_jk + C4 r,i r,j r,k],
    // packed into Voigt columns (11, 22, 33, 12+21, 23+32, 13+31)
    let scale = scale * perturbation();
    let c3 = mat.c3;
    let c4 = mat.c4;
    let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    let e = |i: usize, j: usize, k: usize| {
        scale
            * (c3 * (rh[k] * d(i, j) + rh[j] * d(i, k)) - rh[i] * d(j, k)
                + c4 * rh[i] * rh[j] * rh[k])
    };
    let mut out = KernelBlock::zeros();
    for i in 0..3 {
        out[(i, 0)] = e(i, 0, 0);
        out[(i, 1)] = e(i, 1, 1);
        out[(i, 2)] = e(i, 2, 2);
        out[(i, 3)] = e(i, 0, 1) + e(i, 1, 0);
        out[(i, 4)] = e(i, 1, 2) + e(i, 2, 1);
        out[(i, 5)] = e(i, 0, 2) + e(i, 2, 0);
    }
    out
}

/// Strain kernel E as a 3x6 matrix over stress Voigt columns.
pub fn kernel_e(
    source: &Vec3,
    field: &Vec3,
    mat: &ElasticConstants,
) -> Result<KernelBlock, KernelError> {
    let (r, rh) = distance(source, field)?;
    Ok(e_tensor_from_rhat(&rh, -mat.c / (r * r), mat))
}

/// Orthonormal right-handed frame (columns are the local axes in global
/// components).
#[derive(Debug, Clone, Copy)]
pub struct Frame {
    pub x: Vec3,
    pub y: Vec3,
    pub z: Vec3,
}

impl Frame {
    pub fn to_matrix(&self) -> Mat3 {
        Mat3::from_columns(&[self.x, self.y, self.z])
    }

    /// Global vector components expressed in this frame.
    pub fn to_local(&self, v: &Vec3) -> Vec3 {
        Vec3::new(self.x.dot(v), self.y.dot(v), self.z.dot(v))
    }
}

/// E without its 1/r^2 factor, with the distance direction expressed in the
/// local axes of `frame`. Equals r^2 times the rotated [`kernel_e`].
pub fn kernel_e_tilde_local(
    source: &Vec3,
    field: &Vec3,
    frame: &Frame,
    mat: &ElasticConstants,
) -> Result<KernelBlock, KernelError> {
    let (_r, rh) = distance(source, field)?;
    let rh_local = frame.to_local(&rh);
    Ok(e_tensor_from_rhat(&rh_local, -mat.c, mat))
}

/// Isotropic elasticity matrix in Voigt notation with engineering shear
/// strains: sigma = D eps.
pub fn elasticity_matrix(mat: &ElasticConstants) -> Result<Mat6, KernelError> {
    let nu = mat.nu;
    let denom = (1.0 + nu) * (1.0 - 2.0 * nu);
    if denom.abs() < 1e-12 {
        return Err(KernelError::Incompressible(nu));
    }
    let a = mat.e * (1.0 - nu) / denom;
    let b = mat.e * nu / denom;
    let mut d = Mat6::zeros();
    for i in 0..3 {
        for j in 0..3 {
            d[(i, j)] = if i == j { a } else { b };
        }
        d[(i + 3, i + 3)] = mat.g;
    }
    Ok(d)
}

/// Difference matrix (D' - D'_incl) of a fully grouted bar in its local
/// axes: only the axial entry (3,3) survives.
pub fn bar_d_difference(mat_domain: &ElasticConstants, mat_incl: &ElasticConstants) -> Mat6 {
    let mut d = Mat6::zeros();
    d[(2, 2)] = mat_domain.e - mat_incl.e;
    d
}

/// Stress Voigt vector (11, 22, 33, 12, 23, 13) from a symmetric tensor.
pub fn stress_to_voigt(t: &Mat3) -> Voigt {
    Voigt::new(
        t[(0, 0)],
        t[(1, 1)],
        t[(2, 2)],
        t[(0, 1)],
        t[(1, 2)],
        t[(0, 2)],
    )
}

/// Symmetric stress tensor from a Voigt vector.
pub fn stress_from_voigt(v: &Voigt) -> Mat3 {
    Mat3::new(v[0], v[3], v[5], v[3], v[1], v[4], v[5], v[4], v[2])
}

/// Rotate a 3x6 E-block: rows are vector components, columns index the
/// symmetric (j,k) pairs of the underlying tensor. `rot` maps components
/// from the block's current frame to the target frame.
pub fn rotate_e_block(block: &KernelBlock, rot: &Mat3) -> KernelBlock {
    // unpack to the full symmetric tensor (mixed columns hold sums of the
    // two symmetric entries)
    let mut t = [[[0.0f64; 3]; 3]; 3];
    let pairs = [(0usize, 0usize), (1, 1), (2, 2), (0, 1), (1, 2), (0, 2)];
    for i in 0..3 {
        for (c, &(j, k)) in pairs.iter().enumerate() {
            if j == k {
                t[i][j][k] = block[(i, c)];
            } else {
                t[i][j][k] = 0.5 * block[(i, c)];
                t[i][k][j] = 0.5 * block[(i, c)];
            }
        }
    }
    let mut r = [[[0.0f64; 3]; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            for c in 0..3 {
                let mut acc = 0.0;
                for i in 0..3 {
                    for j in 0..3 {
                        for k in 0..3 {
                            acc += rot[(a, i)] * rot[(b, j)] * rot[(c, k)] * t[i][j][k];
                        }
                    }
                }
                r[a][b][c] = acc;
            }
        }
    }
    let mut out = KernelBlock::zeros();
    for i in 0..3 {
        for (c, &(j, k)) in pairs.iter().enumerate() {
            out[(i, c)] = if j == k {
                r[i][j][k]
            } else {
                r[i][j][k] + r[i][k][j]
            };
        }
    }
    out
}
