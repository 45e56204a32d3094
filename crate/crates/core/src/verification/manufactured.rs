//! Closed-form manufactured solutions on the unit square.

use core::f64::consts::{PI, SQRT_2};

use super::ad::{HyperDual, Real};
use crate::geometry::{Mat2, Point};
use crate::problem::{Coefficient, ExactSolution, Problem};
use crate::{Error, Result};

/// Which closed-form solution and coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ManufacturedKind {
    /// `u = sin πx sin πy cos(√2 π t)`, `A = I`, `f = 0`.
    StandingWave,
    /// Same `u`, `A = diag(1 + x/2, 1 + y/2)`.
    DiagonalVariable,
    /// Same `u`, `A = [[1, b], [b, 1]]` with `b = (x + y)/8`.
    FullVariable,
    /// `u = sin πx sin πy cos(20 t)`, `A = I`.
    Forced,
    /// `u = 0`.
    Zero,
}

impl ManufacturedKind {
    pub fn all() -> [ManufacturedKind; 5] {
        use ManufacturedKind::*;
        [StandingWave, DiagonalVariable, FullVariable, Forced, Zero]
    }

    pub fn name(self) -> &'static str {
        match self {
            ManufacturedKind::StandingWave => "standing-wave",
            ManufacturedKind::DiagonalVariable => "variable-coefficient",
            ManufacturedKind::FullVariable => "full-coefficient",
            ManufacturedKind::Forced => "forced",
            ManufacturedKind::Zero => "zero",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::all().into_iter().find(|k| k.name() == name)
    }

    fn omega(self) -> f64 {
        match self {
            ManufacturedKind::Forced => 20.0,
            _ => SQRT_2 * PI,
        }
    }
}

/// Diffusion coefficient of a manufactured problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManufacturedCoefficient(ManufacturedKind);

impl ManufacturedCoefficient {
    fn generic<R: Real>(&self, x: R, y: R) -> [[R; 2]; 2] {
        let one = R::cst(1.0);
        let zero = R::cst(0.0);
        match self.0 {
            ManufacturedKind::DiagonalVariable => [[one + x * R::cst(0.5), zero], [zero, one + y * R::cst(0.5)]],
            ManufacturedKind::FullVariable => {
                let b = (x + y) * R::cst(0.125);
                [[one, b], [b, one]]
            }
            _ => [[one, zero], [zero, one]],
        }
    }
}

impl Coefficient for ManufacturedCoefficient {
    fn a(&self, x: Point) -> Mat2 {
        self.generic(x[0], x[1])
    }

    fn is_constant(&self) -> bool {
        matches!(self.0, ManufacturedKind::StandingWave | ManufacturedKind::Forced | ManufacturedKind::Zero)
    }
}

/// A manufactured problem, optionally scaled by `amplitude`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManufacturedProblem {
    pub kind: ManufacturedKind,
    pub amplitude: f64,
    coef: ManufacturedCoefficient,
}

impl ManufacturedProblem {
    /// Builds the problem and checks the hand-written forcing and stress
    /// against automatic differentiation of `u` and `A`.
    pub fn new(kind: ManufacturedKind) -> Result<Self> {
        Self::scaled(kind, 1.0)
    }

    pub fn scaled(kind: ManufacturedKind, amplitude: f64) -> Result<Self> {
        let p = ManufacturedProblem {
            kind,
            amplitude,
            coef: ManufacturedCoefficient(kind),
        };
        let defect = p.self_check(100, 0x5eed);
        if !(defect <= 1e-10 * (1.0 + amplitude.abs())) {
            return Err(Error::InvalidStudy(alloc::format!(
                "manufactured problem {} is inconsistent: residual {defect:e}",
                kind.name()
            )));
        }
        Ok(p)
    }

    pub fn standing_wave() -> Self {
        Self::new(ManufacturedKind::StandingWave).expect("standing wave is consistent")
    }

    /// `u` as a generic expression.
    pub fn u_generic<R: Real>(&self, x: R, y: R, t: R) -> R {
        if self.kind == ManufacturedKind::Zero {
            return R::cst(0.0);
        }
        let pi = R::cst(PI);
        R::cst(self.amplitude) * (pi * x).sin() * (pi * y).sin() * (R::cst(self.kind.omega()) * t).cos()
    }

    /// Largest strong-form defect over pseudo-random space-time samples.
    pub fn self_check(&self, samples: usize, seed: u64) -> f64 {
        strong_form_defect(
            |x, y, t| self.u_generic(x, y, t),
            |x, y| self.coef.generic(x, y),
            |x, t| self.f(x, t),
            |x, t| self.sigma(x, t),
            samples,
            seed,
        )
    }
}

/// Largest `|u_tt - div(A∇u) - f|` and `|σ + A∇u|` over pseudo-random samples
/// of `[0,1]² × [0,2]`, with derivatives of `u` and `A` taken by hyper-dual
/// arithmetic.
pub fn strong_form_defect(
    u: impl Fn(HyperDual, HyperDual, HyperDual) -> HyperDual,
    a: impl Fn(HyperDual, HyperDual) -> [[HyperDual; 2]; 2],
    f: impl Fn(Point, f64) -> f64,
    sigma: impl Fn(Point, f64) -> [f64; 2],
    samples: usize,
    seed: u64,
) -> f64 {
    let mut state = seed;
    let mut next = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    let c = HyperDual::cst;
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let (x, y, t) = (next(), next(), 2.0 * next());
        let tt = u(c(x), c(y), HyperDual::new(t, 1.0, 1.0, 0.0)).e12;
        let mut div = 0.0;
        let mut grad = [0.0; 2];
        let mut a_val = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let mut p = [c(x), c(y)];
                p[i].e1 = 1.0;
                p[j].e2 = 1.0;
                let uv = u(p[0], p[1], c(t));
                let aij = a(p[0], p[1])[i][j];
                // ∂_i (A_ij ∂_j u) = ∂_i A_ij ∂_j u + A_ij ∂_i ∂_j u
                div += aij.e1 * uv.e2 + aij.re * uv.e12;
                grad[j] = uv.e2;
                a_val[i][j] = aij.re;
            }
        }
        worst = worst.max((tt - div - f([x, y], t)).abs());
        let s = sigma([x, y], t);
        for r in 0..2 {
            worst = worst.max((s[r] + a_val[r][0] * grad[0] + a_val[r][1] * grad[1]).abs());
        }
    }
    worst
}

impl ExactSolution for ManufacturedProblem {
    fn u(&self, x: Point, t: f64) -> f64 {
        self.u_generic(x[0], x[1], t)
    }

    fn u_t(&self, x: Point, t: f64) -> f64 {
        if self.kind == ManufacturedKind::Zero {
            return 0.0;
        }
        let w = self.kind.omega();
        -self.amplitude * w * (PI * x[0]).sin() * (PI * x[1]).sin() * (w * t).sin()
    }

    fn sigma(&self, x: Point, t: f64) -> [f64; 2] {
        if self.kind == ManufacturedKind::Zero {
            return [0.0, 0.0];
        }
        let c = self.amplitude * (self.kind.omega() * t).cos();
        let p = PI * (PI * x[0]).cos() * (PI * x[1]).sin();
        let q = PI * (PI * x[0]).sin() * (PI * x[1]).cos();
        let a = self.coef.a(x);
        [-c * (a[0][0] * p + a[0][1] * q), -c * (a[1][0] * p + a[1][1] * q)]
    }
}

impl Problem for ManufacturedProblem {
    fn coefficient(&self) -> &dyn Coefficient {
        &self.coef
    }

    fn f(&self, x: Point, t: f64) -> f64 {
        let (sx, cx) = ((PI * x[0]).sin(), (PI * x[0]).cos());
        let (sy, cy) = ((PI * x[1]).sin(), (PI * x[1]).cos());
        let pi2 = PI * PI;
        let c = self.amplitude * (self.kind.omega() * t).cos();
        match self.kind {
            ManufacturedKind::StandingWave | ManufacturedKind::Zero => 0.0,
            ManufacturedKind::Forced => c * (2.0 * pi2 - 400.0) * sx * sy,
            ManufacturedKind::DiagonalVariable => {
                c * (0.5 * (x[0] + x[1]) * pi2 * sx * sy - 0.5 * PI * (cx * sy + sx * cy))
            }
            ManufacturedKind::FullVariable => {
                let b = (x[0] + x[1]) / 8.0;
                -c * (PI * (cx * sy + sx * cy) / 8.0 + 2.0 * b * pi2 * cx * cy)
            }
        }
    }

    fn u0(&self, x: Point) -> f64 {
        self.u(x, 0.0)
    }

    fn u1(&self, x: Point) -> f64 {
        self.u_t(x, 0.0)
    }

    fn sigma0(&self, x: Point) -> [f64; 2] {
        self.sigma(x, 0.0)
    }

    fn exact(&self) -> Option<&dyn ExactSolution> {
        Some(self)
    }

    fn forcing_is_time_independent(&self) -> bool {
        matches!(self.kind, ManufacturedKind::StandingWave | ManufacturedKind::Zero)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_problems_pass_registration() {
        for kind in ManufacturedKind::all() {
            let p = ManufacturedProblem::new(kind).unwrap();
            assert!(p.self_check(100, 3) <= 1e-10, "{}", kind.name());
        }
    }

    #[test]
    fn wrong_forcing_is_detected() {
        let p = ManufacturedProblem::new(ManufacturedKind::DiagonalVariable).unwrap();
        let defect = strong_form_defect(
            |x, y, t| p.u_generic(x, y, t),
            |x, y| p.coef.generic(x, y),
            // drop the first-order term coming from the variable coefficient
            |x, t| p.f(x, t) + 0.5 * PI * (PI * t * SQRT_2).cos() * (PI * x[0]).cos() * (PI * x[1]).sin(),
            |x, t| p.sigma(x, t),
            20,
            1,
        );
        assert!(defect > 1e-3);
    }
}
