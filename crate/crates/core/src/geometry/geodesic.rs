use nalgebra::{DMatrix, DVector};

use super::chart::ManifoldChart;
use super::{same_base, TangentVector};
use crate::error::{Error, Result};

const SHOOTING_MAX_ITER: usize = 50;
const SHOOTING_TOL: f64 = 1e-10;

fn steps_for(chart: &ManifoldChart, v: &[f64]) -> usize {
    let len = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    chart.steps_per_unit() * (len.ceil() as usize).max(1)
}

fn geodesic_rhs(chart: &ManifoldChart, x: &[f64], v: &[f64]) -> Result<DVector<f64>> {
    Ok(-chart.christoffel(x)?.contract(v, v))
}

/// Integrates the geodesic equation for unit parameter time with a fixed
/// number of RK4 steps. Returns the sampled positions (including both ends).
fn shoot(chart: &ManifoldChart, x0: &[f64], v0: &[f64], steps: usize) -> Result<Vec<DVector<f64>>> {
    let n = chart.dim();
    let mut x = DVector::from_column_slice(x0);
    let mut v = DVector::from_column_slice(v0);
    let mut out = Vec::with_capacity(steps + 1);
    out.push(x.clone());
    let h = 1.0 / steps as f64;
    let escape = |p: &DVector<f64>| Error::ChartEscape {
        point: p.as_slice().to_vec(),
    };
    for _ in 0..steps {
        let k1x = v.clone();
        let k1v = geodesic_rhs(chart, x.as_slice(), v.as_slice())?;
        let x2 = &x + &k1x * (h / 2.0);
        let v2 = &v + &k1v * (h / 2.0);
        let k2v = geodesic_rhs(chart, x2.as_slice(), v2.as_slice()).map_err(|_| escape(&x2))?;
        let x3 = &x + &v2 * (h / 2.0);
        let v3 = &v + &k2v * (h / 2.0);
        let k3v = geodesic_rhs(chart, x3.as_slice(), v3.as_slice()).map_err(|_| escape(&x3))?;
        let x4 = &x + &v3 * h;
        let v4 = &v + &k3v * h;
        let k4v = geodesic_rhs(chart, x4.as_slice(), v4.as_slice()).map_err(|_| escape(&x4))?;
        x += (k1x + &v2 * 2.0 + &v3 * 2.0 + &v4) * (h / 6.0);
        v += (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * (h / 6.0);
        if !chart.in_domain(x.as_slice()) {
            return Err(escape(&x));
        }
        debug_assert_eq!(x.len(), n);
        out.push(x.clone());
    }
    Ok(out)
}

/// The point `exp_x(v)`.
pub fn exp_map(chart: &ManifoldChart, v: &TangentVector) -> Result<DVector<f64>> {
    let x = v.base.as_slice();
    chart.metric(x)?;
    if chart.is_flat() {
        return Ok(&v.base + &v.components);
    }
    let comps = v.components.as_slice();
    let path = shoot(chart, x, comps, steps_for(chart, comps))?;
    Ok(path.last().cloned().expect("non-empty path"))
}

/// Samples of the geodesic `t -> exp_x(t v)`, `t` in `[0, 1]`, at the RK4
/// nodes.
pub fn geodesic(chart: &ManifoldChart, v: &TangentVector) -> Result<Vec<DVector<f64>>> {
    let x = v.base.as_slice();
    chart.metric(x)?;
    let comps = v.components.as_slice();
    let steps = steps_for(chart, comps);
    if chart.is_flat() {
        return Ok((0..=steps)
            .map(|s| &v.base + &v.components * (s as f64 / steps as f64))
            .collect());
    }
    shoot(chart, x, comps, steps)
}

fn exp_fixed(chart: &ManifoldChart, x: &[f64], v: &DVector<f64>, steps: usize) -> Result<DVector<f64>> {
    let path = shoot(chart, x, v.as_slice(), steps)?;
    Ok(path.last().cloned().expect("non-empty path"))
}

/// `log_x(y)` by damped Newton shooting on the discrete exponential map.
/// Fails if shooting does not converge or the result is longer than the
/// chart's trust radius.
pub fn log_map(chart: &ManifoldChart, x: &[f64], y: &[f64]) -> Result<TangentVector> {
    chart.metric(x)?;
    chart.metric(y)?;
    let n = chart.dim();
    let xv = DVector::from_column_slice(x);
    let yv = DVector::from_column_slice(y);
    let delta = &yv - &xv;
    let v = if chart.is_flat() {
        delta
    } else {
        let mut v = &delta + chart.christoffel(x)?.contract(delta.as_slice(), delta.as_slice()) * 0.5;
        let mut steps = steps_for(chart, v.as_slice());
        let mut total_iter = 0;
        loop {
            v = newton(chart, x, &yv, v, steps, &mut total_iter)?;
            let s = steps_for(chart, v.as_slice());
            if s == steps {
                break;
            }
            steps = s;
        }
        v
    };
    let out = TangentVector::new(xv, v);
    let len = chart.norm(x, out.components.as_slice())?;
    if len > chart.trust_radius() {
        return Err(Error::OutOfInjectivityTrust {
            distance: len,
            trust: chart.trust_radius(),
        });
    }
    debug_assert_eq!(out.components.len(), n);
    Ok(out)
}

fn newton(
    chart: &ManifoldChart,
    x: &[f64],
    y: &DVector<f64>,
    mut v: DVector<f64>,
    steps: usize,
    iters: &mut usize,
) -> Result<DVector<f64>> {
    let n = chart.dim();
    let scale = 1.0 + y.amax();
    let mut f = exp_fixed(chart, x, &v, steps)? - y;
    let mut res = f.norm();
    while *iters < SHOOTING_MAX_ITER {
        if res <= 1e-14 * scale {
            return Ok(v);
        }
        *iters += 1;
        let h = 1e-7 * (1.0 + v.amax());
        let mut jac = DMatrix::zeros(n, n);
        for i in 0..n {
            let mut vp = v.clone();
            vp[i] += h;
            let mut vm = v.clone();
            vm[i] -= h;
            let col = (exp_fixed(chart, x, &vp, steps)? - exp_fixed(chart, x, &vm, steps)?) / (2.0 * h);
            jac.set_column(i, &col);
        }
        let Some(dv) = jac.lu().solve(&(-&f)) else {
            break;
        };
        let mut alpha = 1.0;
        let mut improved = false;
        for _ in 0..20 {
            let cand = &v + &dv * alpha;
            if let Ok(p) = exp_fixed(chart, x, &cand, steps) {
                let fc = p - y;
                let rc = fc.norm();
                if rc < res {
                    v = cand;
                    f = fc;
                    res = rc;
                    improved = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !improved {
            break;
        }
    }
    if res <= SHOOTING_TOL * scale {
        Ok(v)
    } else {
        Err(Error::ShootingDiverged {
            iterations: *iters,
            residual: res,
        })
    }
}

pub fn distance(chart: &ManifoldChart, x: &[f64], y: &[f64]) -> Result<f64> {
    let v = log_map(chart, x, y)?;
    chart.norm(x, v.components.as_slice())
}

/// Parallel transport of `v` along the polyline through `curve` (the first
/// point must be `v`'s base). Each segment is a coordinate straight line.
pub fn parallel_transport(
    chart: &ManifoldChart,
    curve: &[DVector<f64>],
    v: &TangentVector,
) -> Result<TangentVector> {
    let Some(first) = curve.first() else {
        return Ok(v.clone());
    };
    if !same_base(first, &v.base) {
        return Err(Error::BasePointMismatch);
    }
    let mut w = v.components.clone();
    if chart.is_flat() {
        return Ok(TangentVector::new(curve.last().unwrap().clone(), w));
    }
    for seg in curve.windows(2) {
        let (a, b) = (&seg[0], &seg[1]);
        let d = b - a;
        let steps = ((chart.steps_per_unit() as f64 * d.norm()).ceil() as usize).max(1);
        let h = 1.0 / steps as f64;
        let rhs = |s: f64, w: &DVector<f64>| -> Result<DVector<f64>> {
            let p = a + &d * s;
            Ok(-chart.christoffel(p.as_slice())?.contract(d.as_slice(), w.as_slice()))
        };
        for k in 0..steps {
            let s = k as f64 * h;
            let k1 = rhs(s, &w)?;
            let k2 = rhs(s + h / 2.0, &(&w + &k1 * (h / 2.0)))?;
            let k3 = rhs(s + h / 2.0, &(&w + &k2 * (h / 2.0)))?;
            let k4 = rhs(s + h, &(&w + &k3 * h))?;
            w += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        }
    }
    Ok(TangentVector::new(curve.last().unwrap().clone(), w))
}
