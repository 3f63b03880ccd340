use std::sync::Arc;

use nalgebra::DVector;

use super::{
    at, eval_scalar, eval_vec, ChartName, ChartSpec, DirectionSpec, ProblemFile, ProblemKind, SetSpec, SphereCoordsName,
};
use crate::cones::ConvexSet;
use crate::conditions::{mayer_augment, BolzaProblem};
use crate::dynamics::{integrate_state, ControlProblem, Trajectory};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::geometry::{ExprMetric, ManifoldChart};
use crate::optproblem::OptProblem;
use crate::smooth::ExprMap;

/// A control problem with its candidate and optional direction data.
#[derive(Clone, Debug)]
pub struct OcpSetup {
    pub problem: ControlProblem,
    pub candidate: Trajectory,
    pub direction: Option<DirectionSetup>,
}

#[derive(Clone, Debug)]
pub struct DirectionSetup {
    pub v: Vec<DVector<f64>>,
    pub x0: DVector<f64>,
    pub w: DVector<f64>,
    /// Correction candidates; a single zero correction when none are given.
    pub sigmas: Vec<Vec<DVector<f64>>>,
    pub expansion: bool,
}

#[derive(Clone, Debug)]
pub struct OpSetup {
    pub problem: OptProblem,
    pub point: Vec<f64>,
    pub direction: Option<DVector<f64>>,
    pub bruteforce_resolution: Option<f64>,
    pub separation_samples: Option<usize>,
}

#[derive(Clone, Debug)]
pub enum Setup {
    Control(OcpSetup),
    Finite(OpSetup),
}

fn names(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

fn expr_map(
    sources: &[String],
    vars: &[String],
    time: Option<&str>,
    consts: &[(String, f64)],
    path: &str,
) -> Result<ExprMap> {
    // Parse row by row so a bad row is reported with its index.
    for (i, s) in sources.iter().enumerate() {
        ExprMap::parse(std::slice::from_ref(s), vars, time, consts).map_err(|e| at(&format!("{path}[{i}]"), e))?;
    }
    ExprMap::parse(sources, vars, time, consts)
}

/// Samples expressions in `t` at the midpoints of `steps` intervals.
fn sample_in_time(
    sources: &[String],
    dim: usize,
    horizon: f64,
    steps: usize,
    consts: &[(String, f64)],
    path: &str,
) -> Result<Vec<DVector<f64>>> {
    if sources.len() != dim {
        return Err(Error::input(path, format!("expected {dim} entries, got {}", sources.len())));
    }
    let c: Vec<(&str, f64)> = consts.iter().map(|(k, v)| (k.as_str(), *v)).collect();
    let exprs = sources
        .iter()
        .enumerate()
        .map(|(i, s)| Expr::parse_with(s, &["t"], &c).map_err(|e| at(&format!("{path}[{i}]"), e)))
        .collect::<Result<Vec<_>>>()?;
    let h = horizon / steps as f64;
    let out: Vec<DVector<f64>> = (0..steps)
        .map(|i| {
            let t = (i as f64 + 0.5) * h;
            DVector::from_iterator(dim, exprs.iter().map(|e| e.eval(&[t])))
        })
        .collect();
    if out.iter().any(|u| !u.iter().all(|x| x.is_finite())) {
        return Err(Error::input(path, "non-finite value on the grid"));
    }
    Ok(out)
}

fn fixed_vec(s: Option<&Vec<super::Scalar>>, dim: usize, consts: &[(String, f64)], path: &str) -> Result<DVector<f64>> {
    match s {
        None => Ok(DVector::zeros(dim)),
        Some(s) => {
            let v = eval_vec(s, consts, path)?;
            if v.len() != dim {
                return Err(Error::input(path, format!("expected {dim} entries, got {}", v.len())));
            }
            Ok(DVector::from_vec(v))
        }
    }
}

fn build_set(s: &SetSpec, consts: &[(String, f64)], path: &str) -> Result<ConvexSet> {
    let checked = |r: Result<ConvexSet>| r.map_err(|e| Error::input(path, e.to_string()));
    match s {
        SetSpec::Ball { center, radius } => checked(ConvexSet::ball(
            eval_vec(center, consts, &format!("{path}.center"))?,
            eval_scalar(radius, consts, &format!("{path}.radius"))?,
        )),
        SetSpec::Box { lower, upper } => checked(ConvexSet::boxed(
            eval_vec(lower, consts, &format!("{path}.lower"))?,
            eval_vec(upper, consts, &format!("{path}.upper"))?,
        )),
        SetSpec::Polyhedron { a, b } => {
            let rows = a
                .iter()
                .enumerate()
                .map(|(i, r)| eval_vec(r, consts, &format!("{path}.a[{i}]")))
                .collect::<Result<Vec<_>>>()?;
            checked(ConvexSet::polyhedron(rows, eval_vec(b, consts, &format!("{path}.b"))?))
        }
        SetSpec::Product { parts } => {
            let parts = parts
                .iter()
                .enumerate()
                .map(|(i, p)| build_set(p, consts, &format!("{path}.parts[{i}]")))
                .collect::<Result<Vec<_>>>()?;
            checked(ConvexSet::product(parts))
        }
        SetSpec::Whole { dim } if *dim > 0 => Ok(ConvexSet::whole_space(*dim)),
        SetSpec::Whole { .. } => Err(Error::input(format!("{path}.dim"), "dimension must be positive")),
    }
}

fn build_chart(c: &ChartSpec, consts: &[(String, f64)]) -> Result<ManifoldChart> {
    let dim = |default: Option<usize>| {
        c.dim
            .or(default)
            .filter(|&d| d > 0)
            .ok_or_else(|| Error::input("chart.dim", "positive dimension required"))
    };
    let scalar = |s: &Option<super::Scalar>, path: &str, default: f64| match s {
        Some(s) => eval_scalar(s, consts, path),
        None => Ok(default),
    };
    let mut chart = match c.kind {
        ChartName::Euclidean => ManifoldChart::euclidean(dim(None)?),
        ChartName::Sphere => {
            let r = scalar(&c.radius, "chart.radius", 1.0)?;
            match c.coords.unwrap_or(SphereCoordsName::Spherical) {
                SphereCoordsName::Spherical => {
                    if dim(Some(2))? != 2 {
                        return Err(Error::input("chart.dim", "spherical coordinates are two-dimensional"));
                    }
                    ManifoldChart::sphere_spherical(r)?
                }
                SphereCoordsName::Stereographic => ManifoldChart::sphere_stereographic(dim(Some(2))?, r)?,
            }
        }
        ChartName::Hyperbolic => ManifoldChart::hyperbolic(dim(None)?, scalar(&c.curvature, "chart.curvature", -1.0)?)?,
        ChartName::Custom => {
            let rows = c
                .metric
                .as_ref()
                .ok_or_else(|| Error::input("chart.metric", "custom charts need a metric"))?;
            if c.dim.is_some_and(|d| d != rows.len()) {
                return Err(Error::input("chart.dim", "does not match the metric size"));
            }
            let metric = ExprMetric::parse(rows, consts).map_err(|e| at("chart.metric", e))?;
            ManifoldChart::custom(Arc::new(metric), f64::INFINITY)
        }
    };
    if let Some(r) = c.trust_radius {
        if !(r > 0.0) {
            return Err(Error::input("chart.trust_radius", "must be positive"));
        }
        chart = chart.with_trust_radius(r);
    }
    if let Some(k) = c.steps_per_unit {
        chart = chart.with_steps_per_unit(k);
    }
    Ok(chart)
}

fn build_direction(
    d: &DirectionSpec,
    p: &ControlProblem,
    steps: usize,
    base_dim: usize,
    consts: &[(String, f64)],
) -> Result<DirectionSetup> {
    let n = p.state_dim();
    let m = p.control_dim;
    let v = sample_in_time(&d.v, m, p.horizon, steps, consts, "direction.v")?;
    // For augmented problems the cost coordinate may be omitted.
    let pad = |s: Option<&Vec<super::Scalar>>, path: &str| -> Result<DVector<f64>> {
        let len = s.map_or(n, |s| s.len());
        let x = fixed_vec(s, len, consts, path)?;
        if len == n {
            Ok(x)
        } else if len == base_dim {
            Ok(x.push(0.0))
        } else {
            Err(Error::input(path, format!("expected {n} entries, got {len}")))
        }
    };
    let x0 = pad(d.x0.as_ref(), "direction.X0")?;
    let w = pad(d.w.as_ref(), "direction.W")?;
    let sigmas = if d.sigma.is_empty() {
        vec![vec![DVector::zeros(m); steps]]
    } else {
        d.sigma
            .iter()
            .enumerate()
            .map(|(i, s)| sample_in_time(s, m, p.horizon, steps, consts, &format!("direction.sigma[{i}]")))
            .collect::<Result<_>>()?
    };
    Ok(DirectionSetup {
        v,
        x0,
        w,
        sigmas,
        expansion: d.expansion,
    })
}

impl ProblemFile {
    /// Builds the problem, integrates the candidate and samples the direction.
    pub fn build(&self) -> Result<Setup> {
        let consts = self.constants();
        if self.kind == ProblemKind::Op {
            return self.build_op(&consts).map(Setup::Finite);
        }
        let chart = build_chart(self.chart.as_ref().unwrap(), &consts)?;
        let n = chart.dim();
        let set = build_set(self.control_set.as_ref().unwrap(), &consts, "control_set")?;
        let m = set.dim();
        let grid = self.grid.as_ref().unwrap();
        if grid.n == 0 {
            return Err(Error::input("grid.N", "grid size must be positive"));
        }
        let horizon = eval_scalar(&grid.horizon, &consts, "grid.T")?;
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::input("grid.T", format!("horizon must be positive, got {horizon}")));
        }
        let dynamics = self.dynamics.as_ref().unwrap();
        if dynamics.f.len() != n {
            return Err(Error::input("dynamics.f", format!("expected {n} rows, got {}", dynamics.f.len())));
        }
        let mut vars = names("y", n);
        vars.extend(names("u", m));
        let f = expr_map(&dynamics.f, &vars, Some("t"), &consts, "dynamics.f")?;
        let endpoint = self.endpoint.as_ref().unwrap();
        let cand = self.candidate.as_ref().unwrap();
        let (problem, y0) = match self.kind {
            ProblemKind::Ocp => {
                if dynamics.running_cost.is_some() {
                    return Err(Error::input("dynamics.running_cost", "only allowed for kind ocpe"));
                }
                if endpoint.initial.is_some() || endpoint.terminal.is_some() {
                    return Err(Error::input("endpoint", "initial/terminal are only allowed for kind ocpe"));
                }
                let cost = endpoint
                    .cost
                    .clone()
                    .ok_or_else(|| Error::input("endpoint.cost", "missing"))?;
                let mut rows = vec![cost];
                rows.extend(endpoint.inequalities.iter().cloned());
                rows.extend(endpoint.equalities.iter().cloned());
                let mut evars = names("y0_", n);
                evars.extend(names("yT_", n));
                let ep = expr_map(&rows, &evars, None, &consts, "endpoint")?;
                let p = ControlProblem::new(chart, Arc::new(f), Arc::new(ep), endpoint.inequalities.len(), set, horizon)?;
                let y0 = fixed_vec(cand.y0.as_ref(), n, &consts, "candidate.y0")?;
                if cand.y0.is_none() {
                    return Err(Error::input("candidate.y0", "missing"));
                }
                (p, y0)
            }
            ProblemKind::Ocpe => {
                if endpoint.cost.is_some() || !endpoint.inequalities.is_empty() || !endpoint.equalities.is_empty() {
                    return Err(Error::input("endpoint", "kind ocpe takes only initial and terminal"));
                }
                let running = dynamics
                    .running_cost
                    .clone()
                    .ok_or_else(|| Error::input("dynamics.running_cost", "missing"))?;
                let f0 = expr_map(&[running], &vars, Some("t"), &consts, "dynamics.running_cost")?;
                let initial = fixed_vec(endpoint.initial.as_ref(), n, &consts, "endpoint.initial")?;
                let terminal = fixed_vec(endpoint.terminal.as_ref(), n, &consts, "endpoint.terminal")?;
                if endpoint.initial.is_none() || endpoint.terminal.is_none() {
                    return Err(Error::input("endpoint", "kind ocpe needs initial and terminal"));
                }
                let y0 = match &cand.y0 {
                    Some(_) => fixed_vec(cand.y0.as_ref(), n, &consts, "candidate.y0")?,
                    None => initial.clone(),
                };
                let p = mayer_augment(&BolzaProblem {
                    chart,
                    dynamics: Arc::new(f),
                    running_cost: Arc::new(f0),
                    control_set: set,
                    horizon,
                    initial,
                    terminal,
                })?;
                (p, y0.push(0.0))
            }
            ProblemKind::Op => unreachable!(),
        };
        let controls = sample_in_time(&cand.u, m, horizon, grid.n, &consts, "candidate.u")?;
        for (i, u) in controls.iter().enumerate() {
            if !problem.control_set.contains(u.as_slice(), 1e-9) {
                return Err(Error::input(
                    "candidate.u",
                    format!("control leaves the control set on interval {i}: {:?}", u.as_slice()),
                ));
            }
        }
        let candidate = integrate_state(&problem, &y0, &controls)?;
        let direction = self
            .direction
            .as_ref()
            .map(|d| build_direction(d, &problem, grid.n, n, &consts))
            .transpose()?;
        Ok(Setup::Control(OcpSetup {
            problem,
            candidate,
            direction,
        }))
    }

    fn build_op(&self, consts: &[(String, f64)]) -> Result<OpSetup> {
        let op = self.op.as_ref().unwrap();
        let set = build_set(&op.set, consts, "op.set")?;
        let n = set.dim();
        let mut rows = vec![op.objective.clone()];
        rows.extend(op.inequalities.iter().cloned());
        rows.extend(op.equalities.iter().cloned());
        let map = expr_map(&rows, &names("e", n), None, consts, "op")?;
        let problem = OptProblem::new(set, Arc::new(map), op.inequalities.len())?;
        let point = eval_vec(&op.point, consts, "op.point")?;
        if point.len() != n {
            return Err(Error::input("op.point", format!("expected {n} entries, got {}", point.len())));
        }
        let direction = op
            .direction
            .as_ref()
            .map(|d| fixed_vec(Some(d), n, consts, "op.direction"))
            .transpose()?;
        if let Some(h) = op.bruteforce_resolution {
            if !(h > 0.0) {
                return Err(Error::input("op.bruteforce_resolution", "must be positive"));
            }
        }
        Ok(OpSetup {
            problem,
            point,
            direction,
            bruteforce_resolution: op.bruteforce_resolution,
            separation_samples: op.separation_samples,
        })
    }
}

impl SetSpec {
    /// Builds a set whose entries are plain numbers or constant expressions.
    pub fn build(&self) -> Result<ConvexSet> {
        build_set(self, &[], "set")
    }
}
