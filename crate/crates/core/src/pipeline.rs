//! End-to-end runs of problem files and parameter sweeps.

use std::io::Write;
use std::time::Instant;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::conditions::{
    active_sets, find_first_order_multipliers, refute_optimality, verify_singular_direction, Verdict,
};
use crate::dynamics::expansion_residual;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::optproblem::{build_separation, op_bruteforce, op_first_order, op_second_order, BruteForceVerdict};
use crate::problem::{OcpSetup, OpSetup, ProblemFile, Setup};
use crate::report::{DirectionReport, FirstOrderReport, MultiplierReport, OpReport, Report, SeparationReport, Timing};

/// Seed of the separation sampler; fixed so reports are reproducible.
const SEPARATION_SEED: u64 = 0x5EED;
const EXPANSION_EPS: [f64; 3] = [0.1, 0.05, 0.025];

#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    pub exec: Exec,
    /// Include wall-clock timing; the report is then no longer reproducible.
    pub timing: bool,
}

struct Outcome {
    verdict: Verdict,
    reason: String,
    notes: Vec<String>,
}

/// Runs the full analysis of a problem file. Only malformed input is an
/// error; numerical failures give an inconclusive report.
pub fn run(file: &ProblemFile, opts: &RunOptions) -> Result<Report> {
    let start = Instant::now();
    let mut tol = file.tolerances.clone();
    tol.exec = opts.exec;
    let hypotheses = file.check_hypotheses()?;
    let mut report = Report {
        schema_version: crate::report::REPORT_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        input_digest: file.digest(),
        problem: file.canonical(),
        kind: file.kind,
        hypotheses,
        first_order: None,
        direction: None,
        certificate: None,
        op: None,
        verdict: Verdict::Inconclusive,
        reason: String::new(),
        notes: vec![],
        tolerances: tol.clone(),
        timing: None,
    };
    for h in report.hypotheses.iter().filter(|h| !h.holds) {
        report.notes.push(format!("hypothesis violation: {}", h.message));
    }
    let analysed = file.build().and_then(|setup| match setup {
        Setup::Control(s) => run_control(&s, &tol, &mut report),
        Setup::Finite(s) => run_finite(&s, &tol, &mut report),
    });
    // Numerical failures on valid input leave the question open.
    let outcome = match analysed {
        Ok(o) => o,
        Err(e) if e.is_input_error() => return Err(e),
        Err(e) => outcome(Verdict::Inconclusive, format!("analysis failed: {e}")),
    };
    report.verdict = outcome.verdict;
    report.reason = outcome.reason;
    report.notes.extend(outcome.notes);
    if opts.timing {
        report.timing = Some(Timing {
            total_ms: start.elapsed().as_secs_f64() * 1e3,
        });
    }
    Ok(report)
}

fn outcome(verdict: Verdict, reason: impl Into<String>) -> Outcome {
    Outcome {
        verdict,
        reason: reason.into(),
        notes: vec![],
    }
}

fn run_control(s: &OcpSetup, tol: &crate::conditions::Tolerances, report: &mut Report) -> Result<Outcome> {
    let (p, traj) = (&s.problem, &s.candidate);
    let sets = active_sets(p, traj, tol)?;
    let cone = match find_first_order_multipliers(p, traj, &sets, tol) {
        Err(Error::NoMultiplier) => {
            report.first_order = Some(FirstOrderReport {
                index_sets: sets,
                multipliers: vec![],
                normal: false,
                over_budget: false,
            });
            return Ok(outcome(
                Verdict::Refuted,
                "first-order conditions fail: no nonzero multiplier exists",
            ));
        }
        other => other?,
    };
    report.first_order = Some(FirstOrderReport {
        index_sets: cone.index_sets.clone(),
        multipliers: cone.multipliers.iter().map(MultiplierReport::from).collect(),
        normal: cone.multipliers.iter().any(|m| m.values[0] != 0.0),
        over_budget: cone.over_budget,
    });
    if cone.over_budget {
        return Ok(outcome(
            Verdict::Inconclusive,
            format!("multiplier cone has more than {} generators", tol.ray_budget),
        ));
    }
    let Some(d) = &s.direction else {
        return Ok(outcome(
            Verdict::Consistent,
            "first-order conditions hold; no direction supplied for the second-order test",
        ));
    };
    let dir = match verify_singular_direction(p, traj, &sets, &d.v, &d.x0, tol) {
        Ok(dir) => dir,
        Err(e @ (Error::ConeViolation { .. } | Error::EndpointRowViolation { .. })) => {
            return Ok(outcome(Verdict::Inconclusive, format!("direction is not critical: {e}")));
        }
        Err(e) => return Err(e),
    };
    let cert = refute_optimality(p, traj, &cone, &dir, &d.sigmas, tol)?;
    let mut expansion = None;
    let mut notes = vec![];
    if d.expansion {
        if let Some(best) = cert.best_candidate {
            match expansion_residual(p, traj, &d.v, &d.x0, &d.sigmas[best], &d.w, &EXPANSION_EPS) {
                Ok(r) => expansion = Some(r.into_iter().map(|(e, res)| (e, res / (e * e))).collect()),
                Err(e) => notes.push(format!("expansion check failed: {e}")),
            }
        }
    }
    report.direction = Some(DirectionReport {
        endpoint_rows: dir.rows.iter().copied().collect(),
        index_sets: dir.index_sets.clone(),
        expansion,
    });
    let out = Outcome {
        verdict: cert.verdict,
        reason: cert.reason.clone(),
        notes,
    };
    report.certificate = Some(cert);
    Ok(out)
}

fn run_finite(s: &OpSetup, tol: &crate::conditions::Tolerances, report: &mut Report) -> Result<Outcome> {
    let e = &s.point;
    let first = op_first_order(&s.problem, e, tol)?;
    let mut op = OpReport {
        first_order: first,
        second_order: None,
        separation: None,
        bruteforce: None,
    };
    let mut out = if op.first_order.multipliers.is_empty() {
        outcome(Verdict::Refuted, "first-order conditions fail: no nonzero multiplier exists")
    } else {
        outcome(Verdict::Consistent, "first-order conditions hold")
    };
    if let (Some(y), false) = (&s.direction, op.first_order.multipliers.is_empty()) {
        match op_second_order(&s.problem, e, y, tol) {
            Ok(second) => {
                out = if second.refuted {
                    outcome(Verdict::Refuted, "no multiplier satisfies the second-order condition along the direction")
                } else {
                    outcome(Verdict::Consistent, "second-order condition holds along the direction")
                };
                op.second_order = Some(second);
            }
            Err(err @ (Error::DirectionNotCritical(_) | Error::EmptySecondCone)) => {
                out = outcome(Verdict::Inconclusive, format!("second-order test not applicable: {err}"));
            }
            Err(err) => return Err(err),
        }
        if op.second_order.is_some() {
            let sep = build_separation(&s.problem, e, y, tol)?;
            let samples = s.separation_samples.unwrap_or(0);
            let sample_max = sep.separator.as_ref().filter(|_| samples > 0).map(|l| {
                let l = DVector::from_column_slice(&l.values);
                let mut rng = ChaCha8Rng::seed_from_u64(SEPARATION_SEED);
                sep.sample(&mut rng, samples)
                    .iter()
                    .map(|k| l.dot(k))
                    .fold(f64::NEG_INFINITY, f64::max)
            });
            op.separation = Some(SeparationReport {
                separator: sep.separator.as_ref().map(|m| m.values.clone()),
                separators: sep.separators.len(),
                psi_rank: sep.psi_rank,
                sample_max,
                samples: if sample_max.is_some() { samples } else { 0 },
            });
        }
    }
    if let Some(h) = s.bruteforce_resolution {
        let b = op_bruteforce(&s.problem, e, h, tol.exec)?;
        let disagree = match b.verdict {
            BruteForceVerdict::Improved => out.verdict == Verdict::Consistent,
            BruteForceVerdict::Confirmed => out.verdict == Verdict::Refuted,
            _ => false,
        };
        if disagree {
            out.notes.push(format!("exhaustive search at resolution {h} disagrees: {:?}", b.verdict));
        }
        op.bruteforce = Some(b);
    }
    report.op = Some(op);
    Ok(out)
}

/// Values of one swept parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepAxis {
    pub name: String,
    pub values: Vec<f64>,
}

impl SweepAxis {
    /// Parses `name=a:b:n` (`n` evenly spaced values from `a` to `b`
    /// inclusive) or `name=x,y,z`.
    pub fn parse(s: &str) -> Result<SweepAxis> {
        let bad = |m: &str| Error::input(format!("--param {s}"), m.to_string());
        let (name, spec) = s.split_once('=').ok_or_else(|| bad("expected name=values"))?;
        let num = |x: &str| x.trim().parse::<f64>().map_err(|_| bad(&format!("not a number: {x:?}")));
        let values = if spec.contains(':') {
            let parts: Vec<&str> = spec.split(':').collect();
            let [a, b, n] = parts[..] else {
                return Err(bad("range must be start:stop:count"));
            };
            let (a, b) = (num(a)?, num(b)?);
            let n: usize = n.trim().parse().map_err(|_| bad("count must be a positive integer"))?;
            match n {
                0 => return Err(bad("count must be a positive integer")),
                1 => vec![a],
                _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
            }
        } else {
            spec.split(',').map(num).collect::<Result<Vec<_>>>()?
        };
        Ok(SweepAxis {
            name: name.trim().to_string(),
            values,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub parameters: Vec<f64>,
    /// `None` when the run failed; the reason then holds the error.
    pub verdict: Option<Verdict>,
    pub lhs: Option<f64>,
    /// First multiplier at the reporting scale.
    pub multiplier: Option<Vec<f64>>,
    pub hypotheses_hold: bool,
    pub reason: String,
}

/// Runs the problem at every point of the Cartesian product of `axes`, the
/// first axis varying slowest. Rows come back in that order regardless of
/// `exec`.
pub fn sweep(file: &ProblemFile, axes: &[SweepAxis], exec: Exec) -> Result<Vec<SweepRow>> {
    for a in axes {
        if !file.parameters.contains_key(&a.name) {
            return Err(Error::input(format!("parameters.{}", a.name), "parameter is not declared"));
        }
    }
    let total: usize = axes.iter().map(|a| a.values.len()).product();
    let point = |mut idx: usize| -> Vec<f64> {
        let mut out = vec![0.0; axes.len()];
        for (k, a) in axes.iter().enumerate().rev() {
            out[k] = a.values[idx % a.values.len()];
            idx /= a.values.len();
        }
        out
    };
    // Runs are independent; each is sequential inside when the sweep itself
    // is parallel.
    let inner = if exec.is_parallel() { Exec::Sequential } else { exec };
    let rows = exec.map_range(total, |idx| {
        let params = point(idx);
        let mut f = file.clone();
        for (a, v) in axes.iter().zip(&params) {
            f.set_parameter(&a.name, *v).expect("checked above");
        }
        match run(&f, &RunOptions { exec: inner, timing: false }) {
            Ok(r) => SweepRow {
                parameters: params,
                verdict: Some(r.verdict),
                lhs: r.lhs(),
                multiplier: r
                    .first_order
                    .as_ref()
                    .and_then(|f| f.multipliers.first())
                    .map(|m| m.reporting_scale.clone()),
                hypotheses_hold: r.hypotheses.iter().all(|h| h.holds),
                reason: r.reason,
            },
            Err(e) => SweepRow {
                parameters: params,
                verdict: None,
                lhs: None,
                multiplier: None,
                hypotheses_hold: f.check_hypotheses().is_ok_and(|h| h.iter().all(|h| h.holds)),
                reason: e.to_string(),
            },
        }
    });
    Ok(rows)
}

/// Writes sweep rows as CSV with one column per parameter.
pub fn write_sweep_csv<W: Write>(axes: &[SweepAxis], rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(e.to_string());
    let mut header: Vec<String> = axes.iter().map(|a| a.name.clone()).collect();
    header.extend(["verdict", "lhs", "multiplier", "hypotheses_hold", "reason"].map(String::from));
    w.write_record(&header).map_err(io)?;
    for r in rows {
        let mut rec: Vec<String> = r.parameters.iter().map(|v| v.to_string()).collect();
        rec.push(match r.verdict {
            Some(v) => serde_json::to_value(v).unwrap().as_str().unwrap().to_string(),
            None => "error".into(),
        });
        rec.push(r.lhs.map(|x| x.to_string()).unwrap_or_default());
        rec.push(
            r.multiplier
                .as_ref()
                .map(|m| m.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" "))
                .unwrap_or_default(),
        );
        rec.push(r.hypotheses_hold.to_string());
        rec.push(r.reason.clone());
        w.write_record(&rec).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}
