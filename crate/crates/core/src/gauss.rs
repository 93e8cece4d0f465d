//! One-dimensional Gauss rules on the unit interval.

use std::f64::consts::PI;

/// Legendre polynomials `P_0..=P_n` and their derivatives at `x ∈ [-1, 1]`.
pub fn legendre_with_derivatives(n: usize, x: f64, values: &mut [f64], derivs: &mut [f64]) {
    debug_assert!(values.len() > n && derivs.len() > n);
    values[0] = 1.0;
    derivs[0] = 0.0;
    if n == 0 {
        return;
    }
    values[1] = x;
    derivs[1] = 1.0;
    for k in 1..n {
        let kf = k as f64;
        values[k + 1] = ((2.0 * kf + 1.0) * x * values[k] - kf * values[k - 1]) / (kf + 1.0);
        // P'_{k+1} = P'_{k-1} + (2k+1) P_k
        derivs[k + 1] = derivs[k - 1] + (2.0 * kf + 1.0) * values[k];
    }
}

fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    // (P_n(x), P_n'(x)) without allocation
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 1..n {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// A quadrature rule on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule1d {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule1d {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.points.iter().copied().zip(self.weights.iter().copied())
    }

    /// The rule mapped affinely onto `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> Rule1d {
        let len = b - a;
        Rule1d {
            points: self.points.iter().map(|t| a + len * t).collect(),
            weights: self.weights.iter().map(|w| w * len).collect(),
        }
    }
}

/// `n`-point Gauss–Legendre rule on `[0, 1]`, exact for degree `2n - 1`.
pub fn gauss_legendre(n: usize) -> Rule1d {
    assert!(n >= 1, "Gauss rule needs at least one point");
    let mut points = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_pair(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_pair(n, x);
        if d.is_finite() {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // map [-1,1] -> [0,1]; node i is the i-th largest
        points[n - 1 - i] = 0.5 * (1.0 + x);
        points[i] = 0.5 * (1.0 - x);
        weights[n - 1 - i] = 0.5 * w;
        weights[i] = 0.5 * w;
    }
    Rule1d { points, weights }
}

/// `n + 1` Gauss–Lobatto–Legendre points on `[0, 1]` (endpoints included), ascending.
pub fn gauss_lobatto_points(n: usize) -> Vec<f64> {
    assert!(n >= 1);
    let mut pts = vec![0.0; n + 1];
    pts[n] = 1.0;
    // interior: roots of P_n'
    let mut vals = vec![0.0; n + 1];
    let mut ders = vec![0.0; n + 1];
    for (i, pt) in pts.iter_mut().enumerate().take(n).skip(1) {
        let mut x = -(PI * i as f64 / n as f64).cos();
        for _ in 0..100 {
            legendre_with_derivatives(n, x, &mut vals, &mut ders);
            // (1 - x^2) P_n'' = 2x P_n' - n(n+1) P_n
            let d1 = ders[n];
            let d2 = (2.0 * x * d1 - (n * (n + 1)) as f64 * vals[n]) / (1.0 - x * x);
            let dx = d1 / d2;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        *pt = 0.5 * (1.0 + x);
    }
    pts
}
