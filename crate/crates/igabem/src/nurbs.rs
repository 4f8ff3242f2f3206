//! NURBS basis evaluation, curves and surfaces, refinement and Greville
//! collocation abscissae.
//!
//! Geometry and field approximation share these types: a patch of the
//! boundary is a [`NurbsSurface`], the axis of a reinforcement bar is a
//! [`NurbsCurve`]. Knot insertion and order elevation leave the geometry
//! unchanged and are used to refine the field approximation.

use crate::Vec3;
use nalgebra::Vector4;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NurbsError {
    #[error("parameter {value} outside knot range [{min}, {max}]")]
    ParameterOutOfRange { value: f64, min: f64, max: f64 },
    #[error("invalid knot vector: {0}")]
    InvalidKnots(String),
    #[error("inserting {u} would raise interior multiplicity above degree {degree}")]
    MultiplicityOverflow { u: f64, degree: usize },
    #[error("control point/weight counts inconsistent with knot vector: {0}")]
    InconsistentCounts(String),
    #[error("weights must be positive, got {0}")]
    NonPositiveWeight(f64),
}

/// Open (clamped) knot vector with its polynomial degree.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotVector {
    knots: Vec<f64>,
    degree: usize,
}

impl KnotVector {
    pub fn new(knots: Vec<f64>, degree: usize) -> Result<Self, NurbsError> {
        let p = degree;
        if knots.len() < 2 * (p + 1) {
            return Err(NurbsError::InvalidKnots(format!(
                "need at least {} knots for degree {}, got {}",
                2 * (p + 1),
                p,
                knots.len()
            )));
        }
        if knots.windows(2).any(|w| w[1] < w[0]) {
            return Err(NurbsError::InvalidKnots(
                "knots must be nondecreasing".into(),
            ));
        }
        let first = knots[0];
        let last = *knots.last().unwrap();
        if !(last > first) {
            return Err(NurbsError::InvalidKnots("zero-length knot range".into()));
        }
        if knots[..=p].iter().any(|&k| k != first)
            || knots[knots.len() - 1 - p..].iter().any(|&k| k != last)
        {
            return Err(NurbsError::InvalidKnots(
                "knot vector must be clamped (end knots repeated degree+1 times)".into(),
            ));
        }
        let kv = Self { knots, degree };
        for u in kv.interior_breaks() {
            if kv.multiplicity(u) > p {
                return Err(NurbsError::InvalidKnots(format!(
                    "interior knot {u} has multiplicity above degree {p}"
                )));
            }
        }
        Ok(kv)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Number of basis functions (= control point count).
    pub fn num_basis(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.knots[0], *self.knots.last().unwrap())
    }

    fn check_param(&self, u: f64) -> Result<(), NurbsError> {
        let (min, max) = self.domain();
        if u < min || u > max || !u.is_finite() {
            return Err(NurbsError::ParameterOutOfRange { value: u, min, max });
        }
        Ok(())
    }

    pub fn multiplicity(&self, u: f64) -> usize {
        self.knots.iter().filter(|&&k| k == u).count()
    }

    /// Distinct interior knot values.
    pub fn interior_breaks(&self) -> Vec<f64> {
        let (min, max) = self.domain();
        let mut out: Vec<f64> = Vec::new();
        for &k in &self.knots {
            if k > min && k < max && out.last() != Some(&k) {
                out.push(k);
            }
        }
        out
    }

    /// Nonzero knot spans as parameter intervals.
    pub fn spans(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for w in self.knots.windows(2) {
            if w[1] > w[0] {
                out.push((w[0], w[1]));
            }
        }
        out
    }

    /// Index of the span containing `u` such that knots[i] <= u < knots[i+1]
    /// (the last span is closed on the right).
    pub fn find_span(&self, u: f64) -> usize {
        let n = self.num_basis() - 1;
        let p = self.degree;
        if u >= self.knots[n + 1] {
            return n;
        }
        if u <= self.knots[p] {
            return p;
        }
        let mut low = p;
        let mut high = n + 1;
        let mut mid = (low + high) / 2;
        while u < self.knots[mid] || u >= self.knots[mid + 1] {
            if u < self.knots[mid] {
                high = mid;
            } else {
                low = mid;
            }
            mid = (low + high) / 2;
        }
        mid
    }

    /// The degree+1 basis functions that are nonzero on the span of `u`.
    /// Returns the index of the first one and their values.
    pub fn nonzero_basis(&self, u: f64) -> Result<(usize, Vec<f64>), NurbsError> {
        self.check_param(u)?;
        let p = self.degree;
        let span = self.find_span(u);
        let mut values = vec![0.0; p + 1];
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        values[0] = 1.0;
        for j in 1..=p {
            left[j] = u - self.knots[span + 1 - j];
            right[j] = self.knots[span + j] - u;
            let mut saved = 0.0;
            for r in 0..j {
                let temp = values[r] / (right[r + 1] + left[j - r]);
                values[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            values[j] = saved;
        }
        Ok((span - p, values))
    }

    /// Derivatives up to `order` of the nonzero basis functions at `u`.
    /// `result[k][j]` is the k-th derivative of function `first + j`.
    pub fn nonzero_basis_derivatives(
        &self,
        u: f64,
        order: usize,
    ) -> Result<(usize, Vec<Vec<f64>>), NurbsError> {
        self.check_param(u)?;
        let p = self.degree;
        let n = order.min(p);
        let span = self.find_span(u);
        let mut ndu = vec![vec![0.0; p + 1]; p + 1];
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        ndu[0][0] = 1.0;
        for j in 1..=p {
            left[j] = u - self.knots[span + 1 - j];
            right[j] = self.knots[span + j] - u;
            let mut saved = 0.0;
            for r in 0..j {
                ndu[j][r] = right[r + 1] + left[j - r];
                let temp = ndu[r][j - 1] / ndu[j][r];
                ndu[r][j] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            ndu[j][j] = saved;
        }
        let mut ders = vec![vec![0.0; p + 1]; order + 1];
        for j in 0..=p {
            ders[0][j] = ndu[j][p];
        }
        let mut a = vec![vec![0.0; p + 1]; 2];
        for r in 0..=p {
            let mut s1 = 0;
            let mut s2 = 1;
            a[0][0] = 1.0;
            for k in 1..=n {
                let mut d = 0.0;
                let rk = r as isize - k as isize;
                let pk = p - k;
                if r >= k {
                    a[s2][0] = a[s1][0] / ndu[pk + 1][rk as usize];
                    d = a[s2][0] * ndu[rk as usize][pk];
                }
                let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
                let j2 = if r <= pk + 1 { k - 1 } else { p - r };
                for j in j1..=j2 {
                    let col = (rk + j as isize) as usize;
                    a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][col];
                    d += a[s2][j] * ndu[col][pk];
                }
                if r <= pk {
                    a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                    d += a[s2][k] * ndu[r][pk];
                }
                ders[k][r] = d;
                std::mem::swap(&mut s1, &mut s2);
            }
        }
        let mut factor = p as f64;
        for k in 1..=n {
            for j in 0..=p {
                ders[k][j] *= factor;
            }
            factor *= (p - k) as f64;
        }
        Ok((span - p, ders))
    }

    /// Values of all basis functions at `u` (zeros off the active span).
    pub fn basis_values(&self, u: f64) -> Result<Vec<f64>, NurbsError> {
        let (first, vals) = self.nonzero_basis(u)?;
        let mut out = vec![0.0; self.num_basis()];
        out[first..first + vals.len()].copy_from_slice(&vals);
        Ok(out)
    }

    /// Derivatives of given order of all basis functions at `u`.
    pub fn basis_derivatives(&self, u: f64, order: usize) -> Result<Vec<f64>, NurbsError> {
        let (first, ders) = self.nonzero_basis_derivatives(u, order)?;
        let mut out = vec![0.0; self.num_basis()];
        if order < ders.len() {
            out[first..first + ders[order].len()].copy_from_slice(&ders[order]);
        }
        Ok(out)
    }

    /// Greville abscissa of each basis function: the mean of `degree`
    /// consecutive interior knot entries.
    pub fn greville(&self) -> Vec<f64> {
        let p = self.degree;
        (0..self.num_basis())
            .map(|i| {
                if p == 0 {
                    0.5 * (self.knots[i] + self.knots[i + 1])
                } else {
                    self.knots[i + 1..i + 1 + p].iter().sum::<f64>() / p as f64
                }
            })
            .collect()
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

type Hpoint = Vector4<f64>;

fn to_homogeneous(p: &Vec3, w: f64) -> Hpoint {
    Vector4::new(p.x * w, p.y * w, p.z * w, w)
}

fn from_homogeneous(h: &Hpoint) -> (Vec3, f64) {
    (Vec3::new(h.x / h.w, h.y / h.w, h.z / h.w), h.w)
}

/// Knot insertion on a homogeneous control polygon (single insertion).
fn insert_knot_hom(
    kv: &KnotVector,
    ctrl: &[Hpoint],
    u: f64,
) -> Result<(KnotVector, Vec<Hpoint>), NurbsError> {
    let (min, max) = kv.domain();
    if !(u > min && u < max) {
        return Err(NurbsError::ParameterOutOfRange { value: u, min, max });
    }
    let p = kv.degree();
    let s = kv.multiplicity(u);
    if s >= p {
        return Err(NurbsError::MultiplicityOverflow { u, degree: p });
    }
    let k = kv.find_span(u);
    let knots = kv.knots();
    let mut new_knots = Vec::with_capacity(knots.len() + 1);
    new_knots.extend_from_slice(&knots[..=k]);
    new_knots.push(u);
    new_knots.extend_from_slice(&knots[k + 1..]);

    let n = ctrl.len();
    let mut q = Vec::with_capacity(n + 1);
    for i in 0..=n {
        if i <= k - p {
            q.push(ctrl[i]);
        } else if i > k - s {
            q.push(ctrl[i - 1]);
        } else {
            let alpha = (u - knots[i]) / (knots[i + p] - knots[i]);
            q.push(ctrl[i - 1] * (1.0 - alpha) + ctrl[i] * alpha);
        }
    }
    Ok((KnotVector::new(new_knots, p)?, q))
}

/// Degree elevation by one on a homogeneous control polygon
/// (Piegl & Tiller A5.9 with t = 1).
fn elevate_hom(kv: &KnotVector, ctrl: &[Hpoint]) -> Result<(KnotVector, Vec<Hpoint>), NurbsError> {
    let t = 1usize;
    let p = kv.degree();
    let knots = kv.knots();
    let n = ctrl.len() - 1;
    let m = n + p + 1;
    let ph = p + t;
    let ph2 = ph / 2;

    // bezalfs[i][j]: coefficients for elevating one Bezier segment
    let mut bezalfs = vec![vec![0.0; p + 1]; ph + 1];
    bezalfs[0][0] = 1.0;
    bezalfs[ph][p] = 1.0;
    for i in 1..=ph2 {
        let inv = 1.0 / binomial(ph, i);
        let mpi = p.min(i);
        for j in i.saturating_sub(t)..=mpi {
            bezalfs[i][j] = inv * binomial(p, j) * binomial(t, i - j);
        }
    }
    for i in ph2 + 1..ph {
        let mpi = p.min(i);
        for j in i.saturating_sub(t)..=mpi {
            bezalfs[i][j] = bezalfs[ph - i][p - j];
        }
    }

    let breaks = kv.interior_breaks().len();
    let max_pts = ctrl.len() + t * (breaks + 1) + p + 2;
    let mut qw = vec![Hpoint::zeros(); max_pts];
    let mut uh = vec![0.0; max_pts + ph + 1];
    let mut bpts = vec![Hpoint::zeros(); p + 1];
    let mut ebpts = vec![Hpoint::zeros(); ph + 1];
    let mut next_bpts = vec![Hpoint::zeros(); p.max(1) - 1 + 1];
    let mut alfs = vec![0.0; p.max(1)];

    let mut mh = ph;
    let mut kind = ph + 1;
    let mut r: isize = -1;
    let mut a = p;
    let mut b = p + 1;
    let mut cind = 1usize;
    let mut ua = knots[0];
    qw[0] = ctrl[0];
    for item in uh.iter_mut().take(ph + 1) {
        *item = ua;
    }
    bpts[..=p].copy_from_slice(&ctrl[..=p]);

    while b < m {
        let i0 = b;
        while b < m && knots[b] == knots[b + 1] {
            b += 1;
        }
        let mul = b - i0 + 1;
        mh += mul + t;
        let ub = knots[b];
        let oldr = r;
        r = p as isize - mul as isize;
        let lbz = if oldr > 0 {
            ((oldr + 2) / 2) as usize
        } else {
            1
        };
        let rbz = if r > 0 {
            ph - ((r + 1) / 2) as usize
        } else {
            ph
        };
        if r > 0 {
            // insert knot ub r times to extract the Bezier segment
            let numer = ub - ua;
            for k in ((mul + 1)..=p).rev() {
                alfs[k - mul - 1] = numer / (knots[a + k] - ua);
            }
            for j in 1..=r as usize {
                let save = r as usize - j;
                let s = mul + j;
                for k in (s..=p).rev() {
                    bpts[k] = bpts[k] * alfs[k - s] + bpts[k - 1] * (1.0 - alfs[k - s]);
                }
                next_bpts[save] = bpts[p];
            }
        }
        for i in lbz..=ph {
            ebpts[i] = Hpoint::zeros();
            let mpi = p.min(i);
            for j in i.saturating_sub(t)..=mpi {
                ebpts[i] += bpts[j] * bezalfs[i][j];
            }
        }
        if oldr > 1 {
            // remove knot ua oldr-1 times
            let mut first = kind - 2;
            let mut last = kind;
            let den = ub - ua;
            let bet = (ub - uh[kind - 1]) / den;
            for tr in 1..oldr as usize {
                let mut i = first as isize;
                let mut j = last as isize;
                let mut kj = j - kind as isize + 1;
                while j - i > tr as isize {
                    if (i as usize) < cind {
                        let alf = (ub - uh[i as usize]) / (ua - uh[i as usize]);
                        qw[i as usize] = qw[i as usize] * alf + qw[i as usize - 1] * (1.0 - alf);
                    }
                    if j >= lbz as isize {
                        if j - tr as isize <= kind as isize - ph as isize + oldr {
                            let gam = (ub - uh[(j - tr as isize) as usize]) / den;
                            ebpts[kj as usize] =
                                ebpts[kj as usize] * gam + ebpts[kj as usize + 1] * (1.0 - gam);
                        } else {
                            ebpts[kj as usize] =
                                ebpts[kj as usize] * bet + ebpts[kj as usize + 1] * (1.0 - bet);
                        }
                    }
                    i += 1;
                    j -= 1;
                    kj -= 1;
                }
                first -= 1;
                last += 1;
            }
        }
        if a != p {
            for _ in 0..(ph as isize - oldr) as usize {
                uh[kind] = ua;
                kind += 1;
            }
        }
        for item in ebpts.iter().take(rbz + 1).skip(lbz) {
            qw[cind] = *item;
            cind += 1;
        }
        if b < m {
            bpts[..r as usize].copy_from_slice(&next_bpts[..r as usize]);
            for j in r.max(0) as usize..=p {
                bpts[j] = ctrl[b - p + j];
            }
            a = b;
            b += 1;
            ua = ub;
        } else {
            for i in 0..=ph {
                uh[kind + i] = ub;
            }
        }
    }
    let nh = mh - ph - 1;
    let new_knots = uh[..=mh].to_vec();
    let new_ctrl = qw[..=nh].to_vec();
    Ok((KnotVector::new(new_knots, ph)?, new_ctrl))
}

/// NURBS curve with weighted 3-D control points.
#[derive(Debug, Clone)]
pub struct NurbsCurve {
    kv: KnotVector,
    points: Vec<Vec3>,
    weights: Vec<f64>,
}

impl NurbsCurve {
    pub fn new(kv: KnotVector, points: Vec<Vec3>, weights: Vec<f64>) -> Result<Self, NurbsError> {
        if points.len() != kv.num_basis() || weights.len() != points.len() {
            return Err(NurbsError::InconsistentCounts(format!(
                "knot vector implies {} control points, got {} points / {} weights",
                kv.num_basis(),
                points.len(),
                weights.len()
            )));
        }
        if let Some(&w) = weights.iter().find(|&&w| !(w > 0.0)) {
            return Err(NurbsError::NonPositiveWeight(w));
        }
        Ok(Self {
            kv,
            points,
            weights,
        })
    }

    /// Straight segment between two points as a degree-1 curve.
    pub fn line(start: Vec3, end: Vec3) -> Self {
        let kv = KnotVector::new(vec![0.0, 0.0, 1.0, 1.0], 1).unwrap();
        Self::new(kv, vec![start, end], vec![1.0, 1.0]).unwrap()
    }

    pub fn knot_vector(&self) -> &KnotVector {
        &self.kv
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn homogeneous(&self) -> Vec<Hpoint> {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, &w)| to_homogeneous(p, w))
            .collect()
    }

    pub fn point(&self, u: f64) -> Result<Vec3, NurbsError> {
        let (first, vals) = self.kv.nonzero_basis(u)?;
        let mut acc = Hpoint::zeros();
        for (j, &v) in vals.iter().enumerate() {
            acc += to_homogeneous(&self.points[first + j], self.weights[first + j]) * v;
        }
        Ok(from_homogeneous(&acc).0)
    }

    /// Point and first derivative with respect to the parameter.
    pub fn point_and_derivative(&self, u: f64) -> Result<(Vec3, Vec3), NurbsError> {
        let (first, ders) = self.kv.nonzero_basis_derivatives(u, 1)?;
        let mut a = Hpoint::zeros();
        let mut da = Hpoint::zeros();
        for j in 0..ders[0].len() {
            let h = to_homogeneous(&self.points[first + j], self.weights[first + j]);
            a += h * ders[0][j];
            da += h * ders[1][j];
        }
        let w = a.w;
        let point = Vec3::new(a.x / w, a.y / w, a.z / w);
        let dw = da.w;
        let d = Vec3::new(
            (da.x - dw * point.x) / w,
            (da.y - dw * point.y) / w,
            (da.z - dw * point.z) / w,
        );
        Ok((point, d))
    }

    pub fn insert_knot(&self, u: f64) -> Result<Self, NurbsError> {
        let (kv, hom) = insert_knot_hom(&self.kv, &self.homogeneous(), u)?;
        Ok(Self::from_homogeneous(kv, hom))
    }

    pub fn elevate_order(&self) -> Result<Self, NurbsError> {
        let (kv, hom) = elevate_hom(&self.kv, &self.homogeneous())?;
        Ok(Self::from_homogeneous(kv, hom))
    }

    fn from_homogeneous(kv: KnotVector, hom: Vec<Hpoint>) -> Self {
        let mut points = Vec::with_capacity(hom.len());
        let mut weights = Vec::with_capacity(hom.len());
        for h in &hom {
            let (p, w) = from_homogeneous(h);
            points.push(p);
            weights.push(w);
        }
        Self {
            kv,
            points,
            weights,
        }
    }
}

/// Parametric direction of a surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurfDir {
    U,
    V,
}

/// Tensor-product NURBS surface. Control net is stored with the u index
/// running fastest: `net[j * nu + i]` holds control point (i, j).
#[derive(Debug, Clone)]
pub struct NurbsSurface {
    kv_u: KnotVector,
    kv_v: KnotVector,
    points: Vec<Vec3>,
    weights: Vec<f64>,
}

impl NurbsSurface {
    pub fn new(
        kv_u: KnotVector,
        kv_v: KnotVector,
        points: Vec<Vec3>,
        weights: Vec<f64>,
    ) -> Result<Self, NurbsError> {
        let expect = kv_u.num_basis() * kv_v.num_basis();
        if points.len() != expect || weights.len() != expect {
            return Err(NurbsError::InconsistentCounts(format!(
                "knot vectors imply a {}x{} net, got {} points / {} weights",
                kv_u.num_basis(),
                kv_v.num_basis(),
                points.len(),
                weights.len()
            )));
        }
        if let Some(&w) = weights.iter().find(|&&w| !(w > 0.0)) {
            return Err(NurbsError::NonPositiveWeight(w));
        }
        Ok(Self {
            kv_u,
            kv_v,
            points,
            weights,
        })
    }

    /// Bilinear quad from four corners, ordered (u0v0, u1v0, u0v1, u1v1).
    pub fn bilinear(corners: [Vec3; 4]) -> Self {
        let kv = KnotVector::new(vec![0.0, 0.0, 1.0, 1.0], 1).unwrap();
        Self::new(kv.clone(), kv, corners.to_vec(), vec![1.0; 4]).unwrap()
    }

    pub fn knot_vector(&self, dir: SurfDir) -> &KnotVector {
        match dir {
            SurfDir::U => &self.kv_u,
            SurfDir::V => &self.kv_v,
        }
    }

    pub fn num_basis(&self) -> (usize, usize) {
        (self.kv_u.num_basis(), self.kv_v.num_basis())
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn control_point(&self, i: usize, j: usize) -> Vec3 {
        self.points[j * self.kv_u.num_basis() + i]
    }

    /// Values of the nonzero bivariate basis functions at (u, v), with the
    /// flat net index of each. Rational (weighted) values.
    pub fn nonzero_rational_basis(&self, u: f64, v: f64) -> Result<Vec<(usize, f64)>, NurbsError> {
        let (fu, bu) = self.kv_u.nonzero_basis(u)?;
        let (fv, bv) = self.kv_v.nonzero_basis(v)?;
        let nu = self.kv_u.num_basis();
        let mut out = Vec::with_capacity(bu.len() * bv.len());
        let mut wsum = 0.0;
        for (j, &nv) in bv.iter().enumerate() {
            for (i, &nuv) in bu.iter().enumerate() {
                let idx = (fv + j) * nu + (fu + i);
                let val = nuv * nv * self.weights[idx];
                wsum += val;
                out.push((idx, val));
            }
        }
        for item in &mut out {
            item.1 /= wsum;
        }
        Ok(out)
    }

    pub fn point(&self, u: f64, v: f64) -> Result<Vec3, NurbsError> {
        let basis = self.nonzero_rational_basis(u, v)?;
        let mut acc = Vec3::zeros();
        for (idx, val) in basis {
            acc += self.points[idx] * val;
        }
        Ok(acc)
    }

    /// Point and the two parametric tangents.
    pub fn point_and_tangents(&self, u: f64, v: f64) -> Result<(Vec3, Vec3, Vec3), NurbsError> {
        let (fu, du) = self.kv_u.nonzero_basis_derivatives(u, 1)?;
        let (fv, dv) = self.kv_v.nonzero_basis_derivatives(v, 1)?;
        let nu = self.kv_u.num_basis();
        let mut a = Hpoint::zeros();
        let mut a_u = Hpoint::zeros();
        let mut a_v = Hpoint::zeros();
        for j in 0..dv[0].len() {
            for i in 0..du[0].len() {
                let idx = (fv + j) * nu + (fu + i);
                let h = to_homogeneous(&self.points[idx], self.weights[idx]);
                a += h * (du[0][i] * dv[0][j]);
                a_u += h * (du[1][i] * dv[0][j]);
                a_v += h * (du[0][i] * dv[1][j]);
            }
        }
        let w = a.w;
        let s = Vec3::new(a.x / w, a.y / w, a.z / w);
        let t_u = Vec3::new(
            (a_u.x - a_u.w * s.x) / w,
            (a_u.y - a_u.w * s.y) / w,
            (a_u.z - a_u.w * s.z) / w,
        );
        let t_v = Vec3::new(
            (a_v.x - a_v.w * s.x) / w,
            (a_v.y - a_v.w * s.y) / w,
            (a_v.z - a_v.w * s.z) / w,
        );
        Ok((s, t_u, t_v))
    }

    fn map_rows<F>(&self, dir: SurfDir, f: F) -> Result<Self, NurbsError>
    where
        F: Fn(&KnotVector, &[Hpoint]) -> Result<(KnotVector, Vec<Hpoint>), NurbsError>,
    {
        let nu = self.kv_u.num_basis();
        let nv = self.kv_v.num_basis();
        match dir {
            SurfDir::U => {
                let mut new_rows: Vec<Vec<Hpoint>> = Vec::with_capacity(nv);
                let mut new_kv = None;
                for j in 0..nv {
                    let row: Vec<Hpoint> = (0..nu)
                        .map(|i| to_homogeneous(&self.points[j * nu + i], self.weights[j * nu + i]))
                        .collect();
                    let (kv, out) = f(&self.kv_u, &row)?;
                    new_kv = Some(kv);
                    new_rows.push(out);
                }
                let kv_u = new_kv.unwrap();
                let mut points = Vec::new();
                let mut weights = Vec::new();
                for row in &new_rows {
                    for h in row {
                        let (p, w) = from_homogeneous(h);
                        points.push(p);
                        weights.push(w);
                    }
                }
                Self::new(kv_u, self.kv_v.clone(), points, weights)
            }
            SurfDir::V => {
                let mut new_cols: Vec<Vec<Hpoint>> = Vec::with_capacity(nu);
                let mut new_kv = None;
                for i in 0..nu {
                    let col: Vec<Hpoint> = (0..nv)
                        .map(|j| to_homogeneous(&self.points[j * nu + i], self.weights[j * nu + i]))
                        .collect();
                    let (kv, out) = f(&self.kv_v, &col)?;
                    new_kv = Some(kv);
                    new_cols.push(out);
                }
                let kv_v = new_kv.unwrap();
                let n_new = new_cols[0].len();
                let mut points = Vec::with_capacity(nu * n_new);
                let mut weights = Vec::with_capacity(nu * n_new);
                for j in 0..n_new {
                    for col in new_cols.iter().take(nu) {
                        let (p, w) = from_homogeneous(&col[j]);
                        points.push(p);
                        weights.push(w);
                    }
                }
                Self::new(self.kv_u.clone(), kv_v, points, weights)
            }
        }
    }

    pub fn insert_knot(&self, dir: SurfDir, u: f64) -> Result<Self, NurbsError> {
        self.map_rows(dir, |kv, ctrl| insert_knot_hom(kv, ctrl, u))
    }

    pub fn elevate_order(&self, dir: SurfDir) -> Result<Self, NurbsError> {
        self.map_rows(dir, elevate_hom)
    }

    /// Greville abscissae in both directions.
    pub fn greville(&self) -> (Vec<f64>, Vec<f64>) {
        (self.kv_u.greville(), self.kv_v.greville())
    }
}
