//! Gauss-Legendre rules on [-1, 1], computed once by Newton iteration on
//! the Legendre recurrence and cached.

use super::QuadError;
use std::sync::OnceLock;

const MAX_ORDER: usize = 64;

/// Nodes and weights of an n-point Gauss-Legendre rule on [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    /// The n-point rule, exact for polynomials of degree 2n - 1.
    pub fn new(n: usize) -> Result<&'static GaussRule, QuadError> {
        if n == 0 || n > MAX_ORDER {
            return Err(QuadError::OrderOutOfRange(n));
        }
        static CACHE: OnceLock<Vec<OnceLock<GaussRule>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| (0..=MAX_ORDER).map(|_| OnceLock::new()).collect());
        Ok(cache[n].get_or_init(|| compute_rule(n)))
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Integrate a callable over [a, b].
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }
}

/// Legendre P_n and P_n' at x via the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let pk = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = pk;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

fn compute_rule(n: usize) -> GaussRule {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Chebyshev-based initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x.abs();
        nodes[n - 1 - i] = x.abs();
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
        let (_, dp) = legendre(n, 0.0);
        weights[n / 2] = 2.0 / (dp * dp);
    }
    GaussRule { nodes, weights }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn one_point_rule() {
        let r = GaussRule::new(1).unwrap();
        assert_eq!(r.nodes, vec![0.0]);
        assert_eq!(r.weights, vec![2.0]);
    }

    #[test]
    fn two_point_rule() {
        let r = GaussRule::new(2).unwrap();
        let s = 1.0 / 3.0_f64.sqrt();
        assert_relative_eq!(r.nodes[0], -s, epsilon = 1e-15);
        assert_relative_eq!(r.nodes[1], s, epsilon = 1e-15);
        assert_relative_eq!(r.weights[0], 1.0, epsilon = 1e-15);
        assert_relative_eq!(r.weights[1], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn order_bounds() {
        assert!(GaussRule::new(0).is_err());
        assert!(GaussRule::new(65).is_err());
        assert!(GaussRule::new(64).is_ok());
    }

    #[test]
    fn polynomial_exactness() {
        // x^6 over [-1, 1] with 4 points
        let r = GaussRule::new(4).unwrap();
        let v = r.integrate(-1.0, 1.0, |x| x.powi(6));
        assert_relative_eq!(v, 2.0 / 7.0, epsilon = 1e-14);
        // degree 2n-1 exactness across a range of orders: x^(2n-1) is odd
        // and integrates to zero, x^(2n-2) integrates to 2/(2n-1)
        for n in 1..=20usize {
            let r = GaussRule::new(n).unwrap();
            let deg = (2 * n - 1) as i32;
            let v = r.integrate(-1.0, 1.0, |x| x.powi(deg) + x.powi(deg - 1));
            assert_relative_eq!(v, 2.0 / deg as f64, epsilon = 1e-13, max_relative = 1e-13);
        }
    }

    #[test]
    fn weights_sum_to_two() {
        for n in [1, 2, 3, 8, 16, 32, 64] {
            let r = GaussRule::new(n).unwrap();
            assert_relative_eq!(r.weights.iter().sum::<f64>(), 2.0, epsilon = 1e-13);
        }
    }
}
