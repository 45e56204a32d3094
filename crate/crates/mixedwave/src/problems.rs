//! Problems selectable from a run configuration.

use mixedwave_core::problem::{Coefficient, ExactSolution};
use mixedwave_core::verification::ManufacturedProblem;
use mixedwave_core::{Mat2, Point, Problem};

use crate::expr::Expr;

/// `A = [[a11, a12], [a12, a22]]` given by expressions in `x` and `y`.
#[derive(Debug, Clone)]
pub struct ExprCoefficient {
    pub a11: Expr,
    pub a12: Expr,
    pub a22: Expr,
    constant: bool,
}

impl ExprCoefficient {
    pub fn new(a11: Expr, a12: Expr, a22: Expr) -> Self {
        let constant = [&a11, &a12, &a22].iter().all(|e| !e.depends_on_space());
        ExprCoefficient { a11, a12, a22, constant }
    }
}

impl Coefficient for ExprCoefficient {
    fn a(&self, x: Point) -> Mat2 {
        let b = self.a12.eval(x[0], x[1], 0.0);
        [[self.a11.eval(x[0], x[1], 0.0), b], [b, self.a22.eval(x[0], x[1], 0.0)]]
    }

    fn is_constant(&self) -> bool {
        self.constant
    }
}

/// A problem given entirely by closed-form strings; it has no exact solution.
#[derive(Debug, Clone)]
pub struct CustomProblem {
    pub f: Expr,
    pub u0: Expr,
    pub u1: Expr,
    pub coefficient: ExprCoefficient,
}

impl Problem for CustomProblem {
    fn coefficient(&self) -> &dyn Coefficient {
        &self.coefficient
    }

    fn f(&self, x: Point, t: f64) -> f64 {
        self.f.eval(x[0], x[1], t)
    }

    fn u0(&self, x: Point) -> f64 {
        self.u0.eval(x[0], x[1], 0.0)
    }

    fn u1(&self, x: Point) -> f64 {
        self.u1.eval(x[0], x[1], 0.0)
    }

    fn forcing_is_time_independent(&self) -> bool {
        !self.f.depends_on_t()
    }
}

/// Either a registered manufactured problem or a custom one.
pub enum LoadedProblem {
    Manufactured(ManufacturedProblem),
    Custom(CustomProblem),
}

impl LoadedProblem {
    pub fn as_problem(&self) -> &dyn Problem {
        match self {
            LoadedProblem::Manufactured(p) => p,
            LoadedProblem::Custom(p) => p,
        }
    }

    pub fn exact(&self) -> Option<&dyn ExactSolution> {
        self.as_problem().exact()
    }
}
