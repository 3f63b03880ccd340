//! Controlled dynamics on a chart: state, variational, second-variation and
//! adjoint integration, Hamiltonian derivatives and the endpoint Lagrangian.

mod expansion;
pub(crate) mod hamiltonian;
mod integrate;
mod lagrange;
pub(crate) mod local;

pub use expansion::expansion_residual;
pub use hamiltonian::{check_hamiltonian_blocks, hamiltonian, hamiltonian_blocks, HamiltonianBlocks};
pub use integrate::{integrate_adjoint, integrate_second_variation, integrate_state, integrate_variational};
pub use lagrange::{endpoint_rows, LagrangeData};

use std::io::{Read, Write};
use std::sync::Arc;

use nalgebra::DVector;

use crate::cones::ConvexSet;
use crate::error::{Error, Result};
use crate::geometry::ManifoldChart;
use crate::smooth::SmoothMap;

/// An optimal control problem: minimise `phi0(y(0), y(T))` subject to
/// `y' = f(t, y, u)`, `u(t) in U`, `phi_i <= 0` (`i = 1..j`) and `psi = 0`.
#[derive(Clone, Debug)]
pub struct ControlProblem {
    pub chart: ManifoldChart,
    /// `(t, [y, u]) -> f`, in chart coordinates.
    pub dynamics: Arc<dyn SmoothMap>,
    pub control_dim: usize,
    /// `(t, [y0, yT]) -> (phi0, ..., phij, psi1, ..., psik)`; `t` is unused.
    pub endpoint: Arc<dyn SmoothMap>,
    pub num_inequalities: usize,
    pub control_set: ConvexSet,
    pub horizon: f64,
    /// Cap on the discrete `L^2` norm of lifted second-order corrections.
    pub sigma_cap: f64,
}

impl ControlProblem {
    pub fn new(
        chart: ManifoldChart,
        dynamics: Arc<dyn SmoothMap>,
        endpoint: Arc<dyn SmoothMap>,
        num_inequalities: usize,
        control_set: ConvexSet,
        horizon: f64,
    ) -> Result<Self> {
        let n = chart.dim();
        let m = control_set.dim();
        if dynamics.input_dim() != n + m {
            return Err(Error::dim("dynamics inputs", n + m, dynamics.input_dim()));
        }
        if dynamics.output_dim() != n {
            return Err(Error::dim("dynamics outputs", n, dynamics.output_dim()));
        }
        if endpoint.input_dim() != 2 * n {
            return Err(Error::dim("endpoint inputs", 2 * n, endpoint.input_dim()));
        }
        if endpoint.output_dim() < 1 + num_inequalities {
            return Err(Error::dim(
                "endpoint outputs",
                1 + num_inequalities,
                endpoint.output_dim(),
            ));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::input("grid.T", format!("horizon must be positive, got {horizon}")));
        }
        Ok(ControlProblem {
            chart,
            dynamics,
            control_dim: m,
            endpoint,
            num_inequalities,
            control_set,
            horizon,
            sigma_cap: 1e6,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn num_equalities(&self) -> usize {
        self.endpoint.output_dim() - 1 - self.num_inequalities
    }

    /// `1 + j + k`.
    pub fn num_multipliers(&self) -> usize {
        self.endpoint.output_dim()
    }

    pub fn eval_dynamics(&self, t: f64, y: &[f64], u: &[f64]) -> DVector<f64> {
        let mut z = Vec::with_capacity(y.len() + u.len());
        z.extend_from_slice(y);
        z.extend_from_slice(u);
        self.dynamics.eval(t, &z)
    }

    pub fn eval_endpoint(&self, y0: &[f64], yt: &[f64]) -> DVector<f64> {
        let mut z = Vec::with_capacity(2 * y0.len());
        z.extend_from_slice(y0);
        z.extend_from_slice(yt);
        self.endpoint.eval(0.0, &z)
    }
}

/// States at `N+1` uniform nodes and piecewise-constant controls on `N`
/// intervals.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub horizon: f64,
    pub states: Vec<DVector<f64>>,
    pub controls: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.controls.len()
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps() as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        self.horizon * i as f64 / self.steps() as f64
    }

    pub fn initial(&self) -> &DVector<f64> {
        &self.states[0]
    }

    pub fn terminal(&self) -> &DVector<f64> {
        self.states.last().expect("non-empty trajectory")
    }

    /// Writes `t, y1..yn, u1..um` with 17 significant digits; the last row
    /// repeats the last control.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let n = self.states[0].len();
        let m = self.controls.first().map_or(0, |u| u.len());
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("y{i}")));
        header.extend((1..=m).map(|i| format!("u{i}")));
        w.write_record(&header).map_err(csv_err)?;
        for (i, y) in self.states.iter().enumerate() {
            let u = &self.controls[i.min(self.steps() - 1)];
            let mut rec = vec![format!("{:.16e}", self.time(i))];
            rec.extend(y.iter().map(|v| format!("{v:.16e}")));
            rec.extend(u.iter().map(|v| format!("{v:.16e}")));
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the format written by [`Self::write_csv`]; `n` is the state
    /// dimension.
    pub fn read_csv<R: Read>(input: R, n: usize) -> Result<Trajectory> {
        let mut r = csv::Reader::from_reader(input);
        let mut times = Vec::new();
        let mut states = Vec::new();
        let mut controls = Vec::new();
        for (row, rec) in r.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            let vals: Vec<f64> = rec
                .iter()
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::input(format!("csv row {}", row + 2), e.to_string()))?;
            if vals.len() < 1 + n {
                return Err(Error::input(format!("csv row {}", row + 2), "too few columns"));
            }
            times.push(vals[0]);
            states.push(DVector::from_column_slice(&vals[1..1 + n]));
            controls.push(DVector::from_column_slice(&vals[1 + n..]));
        }
        if states.len() < 2 {
            return Err(Error::input("csv", "need at least two rows"));
        }
        controls.pop();
        let horizon = times.last().unwrap() - times[0];
        Ok(Trajectory {
            horizon,
            states,
            controls,
        })
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldKind {
    Vector,
    Covector,
}

/// A vector or covector field sampled at the trajectory nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldAlongCurve {
    pub kind: FieldKind,
    pub values: Vec<DVector<f64>>,
}

impl FieldAlongCurve {
    pub fn zeros(kind: FieldKind, nodes: usize, n: usize) -> Self {
        FieldAlongCurve {
            kind,
            values: vec![DVector::zeros(n); nodes],
        }
    }

    /// `sum_c weights[c] * fields[c]`.
    pub fn combine(fields: &[FieldAlongCurve], weights: &[f64]) -> FieldAlongCurve {
        let mut out = FieldAlongCurve::zeros(fields[0].kind, fields[0].values.len(), fields[0].values[0].len());
        for (f, w) in fields.iter().zip(weights) {
            if *w == 0.0 {
                continue;
            }
            for (o, v) in out.values.iter_mut().zip(&f.values) {
                o.axpy(*w, v, 1.0);
            }
        }
        out
    }
}
