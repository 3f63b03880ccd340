use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::cones::ConvexSet;
use crate::dynamics::ControlProblem;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::geometry::ManifoldChart;
use crate::smooth::{ExprMap, SmoothMap};

/// Minimise `∫ f0(t, y, u) dt` subject to `y' = f(t, y, u)`, `u in U`,
/// `y(0) = initial`, `y(T) = terminal`.
#[derive(Clone, Debug)]
pub struct BolzaProblem {
    pub chart: ManifoldChart,
    /// `(t, [y, u]) -> f`.
    pub dynamics: Arc<dyn SmoothMap>,
    /// `(t, [y, u]) -> f0`, one output.
    pub running_cost: Arc<dyn SmoothMap>,
    pub control_set: ConvexSet,
    pub horizon: f64,
    pub initial: DVector<f64>,
    pub terminal: DVector<f64>,
}

/// `(t, [y, z, u]) -> (f(t, y, u), f0(t, y, u))`.
#[derive(Debug)]
struct Augmented {
    n: usize,
    m: usize,
    f: Arc<dyn SmoothMap>,
    f0: Arc<dyn SmoothMap>,
}

impl Augmented {
    fn inner_args(&self, z: &[f64]) -> Vec<f64> {
        let mut w = z[..self.n].to_vec();
        w.extend_from_slice(&z[self.n + 1..]);
        w
    }

    /// Maps an index of `[y, u]` to the corresponding index of `[y, z, u]`.
    fn outer(&self, i: usize) -> usize {
        if i < self.n {
            i
        } else {
            i + 1
        }
    }
}

impl SmoothMap for Augmented {
    fn input_dim(&self) -> usize {
        self.n + 1 + self.m
    }

    fn output_dim(&self) -> usize {
        self.n + 1
    }

    fn eval(&self, t: f64, z: &[f64]) -> DVector<f64> {
        let w = self.inner_args(z);
        let f = self.f.eval(t, &w);
        let f0 = self.f0.eval(t, &w);
        DVector::from_iterator(self.n + 1, f.iter().copied().chain(std::iter::once(f0[0])))
    }

    fn jacobian(&self, t: f64, z: &[f64]) -> DMatrix<f64> {
        let w = self.inner_args(z);
        let jf = self.f.jacobian(t, &w);
        let j0 = self.f0.jacobian(t, &w);
        let mut out = DMatrix::zeros(self.n + 1, self.input_dim());
        for c in 0..w.len() {
            let oc = self.outer(c);
            for r in 0..self.n {
                out[(r, oc)] = jf[(r, c)];
            }
            out[(self.n, oc)] = j0[(0, c)];
        }
        out
    }

    fn hessians(&self, t: f64, z: &[f64]) -> Vec<DMatrix<f64>> {
        let w = self.inner_args(z);
        let mut hs = self.f.hessians(t, &w);
        hs.push(self.f0.hessians(t, &w).remove(0));
        hs.into_iter()
            .map(|h| {
                let mut out = DMatrix::zeros(self.input_dim(), self.input_dim());
                for a in 0..w.len() {
                    for b in 0..w.len() {
                        out[(self.outer(a), self.outer(b))] = h[(a, b)];
                    }
                }
                out
            })
            .collect()
    }
}

/// Rewrites an integral-cost problem with fixed endpoints as an endpoint
/// problem on `M x R`: the extra state `z` accumulates the running cost,
/// `phi0 = z(T) - z(0)` and `psi = (y(0) - initial, y(T) - terminal)`.
/// The multiplier of the result reads `(l0, l_initial, l_terminal)`; the
/// terminal covector of the integral-cost conditions is `l_terminal`.
pub fn mayer_augment(b: &BolzaProblem) -> Result<ControlProblem> {
    let n = b.chart.dim();
    let m = b.control_set.dim();
    if b.running_cost.output_dim() != 1 {
        return Err(Error::dim("running cost outputs", 1, b.running_cost.output_dim()));
    }
    if b.running_cost.input_dim() != n + m {
        return Err(Error::dim("running cost inputs", n + m, b.running_cost.input_dim()));
    }
    if b.dynamics.input_dim() != n + m {
        return Err(Error::dim("dynamics inputs", n + m, b.dynamics.input_dim()));
    }
    if b.initial.len() != n || b.terminal.len() != n {
        return Err(Error::dim("fixed endpoint", n, b.initial.len().min(b.terminal.len())));
    }
    let dynamics = Arc::new(Augmented {
        n,
        m,
        f: b.dynamics.clone(),
        f0: b.running_cost.clone(),
    });
    // Endpoint arguments: [y0, z0, yT, zT].
    let na = n + 1;
    let var = |i: usize| Box::new(Expr::Var(i));
    let minus = |i: usize, c: f64| Expr::Sub(var(i), Box::new(Expr::Const(c))).simplify();
    let mut exprs = vec![Expr::Sub(var(na + n), var(n))];
    exprs.extend((0..n).map(|i| minus(i, b.initial[i])));
    exprs.extend((0..n).map(|i| minus(na + i, b.terminal[i])));
    let endpoint = Arc::new(ExprMap::from_exprs(2 * na, exprs));
    ControlProblem::new(
        ManifoldChart::product(b.chart.clone(), 1),
        dynamics,
        endpoint,
        0,
        b.control_set.clone(),
        b.horizon,
    )
}
