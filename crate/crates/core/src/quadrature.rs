//! Gauss rules on intervals and triangles.
//!
//! Triangle rules are collapsed (Duffy) tensor products of Gauss-Legendre rules,
//! which gives rules of any requested polynomial degree from one code path.

use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)]
use num_traits::Float;

/// Gauss-Legendre rule with `n` points on `[0, 1]`.
#[derive(Debug, Clone)]
pub struct LineRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl LineRule {
    pub fn gauss(n: usize) -> Self {
        assert!(n > 0, "a Gauss rule needs at least one point");
        let mut points = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for i in 0..n {
            // Newton iteration on P_n from the Chebyshev-like initial guess.
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            points.push(0.5 * (1.0 - x));
            weights.push(0.5 * w);
        }
        // ascending order on [0, 1]
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| points[a].partial_cmp(&points[b]).unwrap());
        LineRule {
            points: idx.iter().map(|&i| points[i]).collect(),
            weights: idx.iter().map(|&i| weights[i]).collect(),
        }
    }

    /// Rule integrating polynomials of degree `degree` exactly.
    pub fn of_degree(degree: usize) -> Self {
        Self::gauss(degree / 2 + 1)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Integrate `f` over `[a, b]`.
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let len = b - a;
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&s, &w)| w * f(a + s * len))
            .sum::<f64>()
            * len
    }

    /// Integrate over `[a, b]` after splitting at the given interior break points,
    /// so piecewise-polynomial integrands (e.g. absolute values of linear
    /// weights) are integrated exactly.
    pub fn integrate_split(&self, a: f64, b: f64, breaks: &[f64], mut f: impl FnMut(f64) -> f64) -> f64 {
        let mut cuts: Vec<f64> = breaks.iter().copied().filter(|&c| c > a && c < b).collect();
        cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let mut total = 0.0;
        let mut lo = a;
        for &c in cuts.iter().chain(core::iter::once(&b)) {
            total += self.integrate(lo, c, &mut f);
            lo = c;
        }
        total
    }
}

/// P_n(x) and P_n'(x) by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Quadrature rule on the reference triangle `{(0,0), (1,0), (0,1)}`;
/// weights sum to the reference area 1/2.
#[derive(Debug, Clone)]
pub struct TriangleRule {
    pub degree: usize,
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl TriangleRule {
    pub fn of_degree(degree: usize) -> Self {
        // The collapsed map x = u, y = (1 - u) v carries a Jacobian (1 - u),
        // raising the degree in u by one.
        let m = (degree + 1) / 2 + 1;
        let line = LineRule::gauss(m);
        let mut points = Vec::with_capacity(m * m);
        let mut weights = Vec::with_capacity(m * m);
        for (&u, &wu) in line.points.iter().zip(&line.weights) {
            for (&v, &wv) in line.points.iter().zip(&line.weights) {
                points.push([u, (1.0 - u) * v]);
                weights.push(wu * wv * (1.0 - u));
            }
        }
        TriangleRule {
            degree,
            points,
            weights,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// The 5-point Gauss rule used for all time integrals over a step.
pub fn time_rule() -> LineRule {
    LineRule::gauss(5)
}
