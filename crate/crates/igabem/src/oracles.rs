//! Independent brute-force references used by the test suite and the
//! `verify` command: adaptive quadrature of the defining bar integrals,
//! polar quadrature of the end-point case, finite-difference checks and a
//! rule-of-mixtures displacement estimate.
//!
//! Each reference certifies its own convergence (the returned residual is
//! the worst accepted refinement difference) before being used against an
//! analytic result, and none of them share code with the closed forms they
//! check.

use crate::kernels::{kernel_e_tilde_local, ElasticConstants, Frame};
use crate::quad::GaussRule;
use crate::{KernelBlock, Vec3};

/// Outcome of one verification check.
#[derive(Debug, Clone)]
pub struct OracleReport {
    pub id: String,
    pub measured: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub detail: String,
}

impl OracleReport {
    pub fn new(id: &str, measured: f64, tolerance: f64, detail: String) -> Self {
        Self {
            id: id.to_string(),
            measured,
            tolerance,
            pass: measured <= tolerance,
            detail,
        }
    }
}

fn identity_frame() -> Frame {
    Frame {
        x: Vec3::x(),
        y: Vec3::y(),
        z: Vec3::z(),
    }
}

/// The bar integrand at axial position z': the kernel without its 1/r^2,
/// divided by r_c^2, times the cross-section area.
fn bar_line_integrand(
    mat: &ElasticConstants,
    radius: f64,
    y_off: f64,
    z_off: f64,
    z: f64,
) -> KernelBlock {
    let source = Vec3::new(0.0, y_off, z_off);
    let field = Vec3::new(0.0, 0.0, z);
    let rc2 = (field - source).norm_squared();
    let e = kernel_e_tilde_local(&source, &field, &identity_frame(), mat).unwrap();
    e * (std::f64::consts::PI * radius * radius / rc2)
}

struct Adaptive<'a, F> {
    f: &'a F,
    coarse: &'static GaussRule,
    fine: &'static GaussRule,
    tol: f64,
    max_depth: usize,
    worst: f64,
}

impl<F: Fn(f64) -> KernelBlock> Adaptive<'_, F> {
    fn interval(&mut self, a: f64, b: f64, depth: usize) -> KernelBlock {
        let eval = |rule: &GaussRule| {
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            let mut acc = KernelBlock::zeros();
            for (x, w) in rule.nodes.iter().zip(&rule.weights) {
                acc += (self.f)(mid + half * x) * (w * half);
            }
            acc
        };
        let coarse = eval(self.coarse);
        let fine = eval(self.fine);
        let err = (coarse - fine).norm();
        if err <= self.tol || depth >= self.max_depth {
            self.worst = self.worst.max(err);
            return fine;
        }
        let mid = 0.5 * (a + b);
        self.interval(a, mid, depth + 1) + self.interval(mid, b, depth + 1)
    }
}

/// Adaptive line quadrature of the defining regular bar integral. Returns
/// the block and the achieved refinement residual.
pub fn bar_regular_reference(
    mat: &ElasticConstants,
    radius: f64,
    h: f64,
    y_off: f64,
    z_off: f64,
    tol: f64,
) -> (KernelBlock, f64) {
    let f = |z: f64| bar_line_integrand(mat, radius, y_off, z_off, z);
    let mut adaptive = Adaptive {
        f: &f,
        coarse: GaussRule::new(8).unwrap(),
        fine: GaussRule::new(16).unwrap(),
        tol,
        max_depth: 40,
        worst: 0.0,
    };
    let value = adaptive.interval(0.0, h, 0);
    (value, adaptive.worst)
}

/// Polar quadrature of the end-point bar integral: the 1/r^2 of the kernel
/// cancels the volume element, leaving a bounded integrand over the two
/// angular regions split at theta = arctan(R/h).
pub fn bar_singular_reference(
    mat: &ElasticConstants,
    radius: f64,
    h: f64,
    tol: f64,
) -> (KernelBlock, f64) {
    let theta_split = (radius / h).atan();
    let integrand = |theta: f64, phi: f64| -> KernelBlock {
        let rhat = Vec3::new(
            theta.sin() * phi.cos(),
            theta.sin() * phi.sin(),
            theta.cos(),
        );
        let e = kernel_e_tilde_local(&Vec3::zeros(), &rhat, &identity_frame(), mat).unwrap();
        let r_max = if theta <= theta_split {
            h / theta.cos()
        } else {
            radius / theta.sin()
        };
        e * (r_max * theta.sin())
    };
    // iterated fixed-order rule with order doubling until converged
    let eval = |n: usize| -> KernelBlock {
        let rule = GaussRule::new(n).unwrap();
        let phi_rule = GaussRule::new(n).unwrap();
        let mut acc = KernelBlock::zeros();
        for (range_a, range_b) in [
            (0.0, theta_split),
            (theta_split, std::f64::consts::FRAC_PI_2),
        ] {
            let half = 0.5 * (range_b - range_a);
            let mid = 0.5 * (range_a + range_b);
            for (xt, wt) in rule.nodes.iter().zip(&rule.weights) {
                let theta = mid + half * xt;
                for (xp, wp) in phi_rule.nodes.iter().zip(&phi_rule.weights) {
                    let phi = std::f64::consts::PI * (1.0 + xp);
                    acc += integrand(theta, phi) * (wt * half * wp * std::f64::consts::PI);
                }
            }
        }
        acc
    };
    let mut n = 8;
    let mut prev = eval(n);
    loop {
        n *= 2;
        let next = eval(n);
        let err = (next - prev).norm();
        if err <= tol || n >= 64 {
            return (next, err);
        }
        prev = next;
    }
}

/// Rule-of-mixtures estimate of the top displacement of a column of unit
/// cross-section under unit tension, stiffened by one through-bar:
/// u = t L / (E + (E_incl - E) pi R^2).
pub fn mixtures_estimate(e: f64, e_incl: f64, radius: f64, length: f64, traction: f64) -> f64 {
    traction * length / (e + (e_incl - e) * std::f64::consts::PI * radius * radius)
}

/// Self-contained verification suite: every check recomputes its reference
/// from scratch, so a perturbed build fails loudly in the field.
pub fn verification_suite() -> Vec<OracleReport> {
    use crate::assembly::{
        assemble, fixtures::unit_cube_model, t_closed_box_sum, AssemblyContext, Dof,
    };
    use crate::quad::{bar_regular_local, bar_singular_local};
    use crate::solver::solve_onestep;
    use rand::{Rng, SeedableRng};

    let mut out = Vec::new();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);

    // closed-box identity of the traction kernel
    {
        let model = unit_cube_model(1.0, 0.25, 1.0, false, "");
        let ctx = AssemblyContext::build(&model).expect("built-in cube is valid");
        let mut worst: f64 = 0.0;
        for _ in 0..5 {
            let src = Vec3::new(
                0.05 + 0.9 * rng.gen::<f64>(),
                0.05 + 0.9 * rng.gen::<f64>(),
                0.05 + 0.9 * rng.gen::<f64>(),
            );
            let sum = t_closed_box_sum(&ctx, &src).expect("interior source");
            worst = worst.max((sum + crate::Mat3::identity()).abs().max());
        }
        out.push(OracleReport::new(
            "traction-kernel closed-box identity",
            worst,
            1e-4,
            "max |sum(T dGamma) + I| over interior sources of the unit cube".into(),
        ));
    }

    // analytic regular bar integrals against adaptive line quadrature
    {
        let mut worst: f64 = 0.0;
        for _ in 0..50 {
            let mat =
                ElasticConstants::new(0.5 + 4.0 * rng.gen::<f64>(), -0.4 + 0.89 * rng.gen::<f64>())
                    .expect("range-sampled constants are valid");
            let radius = 0.01 + 0.2 * rng.gen::<f64>();
            let h = 0.2 + 2.0 * rng.gen::<f64>();
            let y_off = radius + 0.05 + 2.0 * rng.gen::<f64>();
            let z_off = -1.0 + 3.0 * rng.gen::<f64>();
            let analytic = bar_regular_local(&mat, radius, h, y_off, z_off);
            let (reference, _res) = bar_regular_reference(&mat, radius, h, y_off, z_off, 1e-12);
            worst = worst.max((analytic - reference).norm() / reference.norm().max(1e-300));
        }
        out.push(OracleReport::new(
            "analytic bar integral (regular)",
            worst,
            1e-8,
            "relative mismatch against adaptive line quadrature, 50 random configurations".into(),
        ));
    }

    // analytic end-point bar integrals against polar quadrature
    {
        let mut worst: f64 = 0.0;
        for _ in 0..10 {
            let mat =
                ElasticConstants::new(0.5 + 4.0 * rng.gen::<f64>(), -0.4 + 0.89 * rng.gen::<f64>())
                    .expect("range-sampled constants are valid");
            let radius = 0.01 + 0.3 * rng.gen::<f64>();
            let h = 0.1 + 2.0 * rng.gen::<f64>();
            let analytic = bar_singular_local(&mat, radius, h);
            let (reference, _res) = bar_singular_reference(&mat, radius, h, 1e-10);
            worst = worst.max((analytic - reference).norm() / reference.norm().max(1e-300));
        }
        out.push(OracleReport::new(
            "analytic bar integral (end-point)",
            worst,
            1e-6,
            "relative mismatch against polar quadrature, 10 random configurations".into(),
        ));
    }

    // strain kernel is the field-point strain of the displacement kernel
    {
        let mat = ElasticConstants::new(5.0, 0.3).expect("valid constants");
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let s = Vec3::new(rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>());
            let d = Vec3::new(
                rng.gen::<f64>() - 0.5,
                rng.gen::<f64>() - 0.5,
                rng.gen::<f64>() - 0.5,
            );
            if d.norm() < 0.1 {
                continue;
            }
            let f = s + d;
            let h = 1e-6 * d.norm();
            let e = crate::kernels::kernel_e(&s, &f, &mat).expect("distinct points");
            let pairs = [(0usize, 0usize), (1, 1), (2, 2), (0, 1), (1, 2), (0, 2)];
            for i in 0..3 {
                for (c, &(j, k)) in pairs.iter().enumerate() {
                    let grad = |jj: usize, kk: usize| {
                        let mut fp = f;
                        fp[kk] += h;
                        let mut fm = f;
                        fm[kk] -= h;
                        let up = crate::kernels::kelvin_u(&s, &fp, &mat).expect("distinct");
                        let um = crate::kernels::kelvin_u(&s, &fm, &mat).expect("distinct");
                        (up[(jj, i)] - um[(jj, i)]) / (2.0 * h)
                    };
                    let fd = if j == k {
                        grad(j, k)
                    } else {
                        grad(j, k) + grad(k, j)
                    };
                    worst = worst.max((e[(i, c)] - fd).abs() / fd.abs().max(1e-6));
                }
            }
        }
        out.push(OracleReport::new(
            "strain kernel vs finite differences of U",
            worst,
            1e-4,
            "componentwise relative mismatch over 100 random point pairs".into(),
        ));
    }

    // uniaxial patch test on the built-in cube
    {
        let model = unit_cube_model(1.0, 0.0, 1.0, false, "");
        let ctx = AssemblyContext::build(&model).expect("built-in cube is valid");
        let sys = assemble(&ctx).expect("assembly of the built-in cube");
        let sol = solve_onestep(&sys).expect("well-posed mixed problem");
        let target = Vec3::new(0.5, 0.5, 1.0);
        let ai = ctx
            .dof
            .anchors
            .iter()
            .position(|a| (a.position - target).norm() < 1e-9)
            .expect("top centre anchor");
        let uz = match ctx.dof.u_dof[ai][2] {
            Dof::Col(c) => sol.x[c],
            Dof::Known(v) => v,
        };
        out.push(OracleReport::new(
            "uniaxial patch test",
            (uz - 1.0).abs(),
            1e-3,
            format!("|u_z(top) - 1| for the unit cube under unit tension, u_z = {uz:.6}"),
        ));
    }

    out
}
