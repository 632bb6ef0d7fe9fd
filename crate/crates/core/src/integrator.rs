//! Fixed-step trajectory generation, time averages and orbit diagnostics.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::dynamics::{DynamicsSpec, Regime};
use crate::error::{Error, Result};
use crate::metrics::Descriptor;
use crate::numerics;
use crate::simplex::{euclid_project_simplex, SimplexPoint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// RK4 in the continuous regime, projected Euler in the discontinuous one.
    #[default]
    Auto,
    Rk4,
    EulerProjected,
}

/// Clock used for the independent variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Parametrization {
    #[default]
    Native,
    /// Unit Euclidean speed; traces the same orbits.
    ArcLength,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub scheme: Scheme,
    pub step: f64,
    pub t_end: f64,
    pub boundary_snap: f64,
    pub parametrization: Parametrization,
    /// Record every k-th step (the final state is always recorded).
    pub sample_every: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            scheme: Scheme::Auto,
            step: 1e-3,
            t_end: 10.0,
            boundary_snap: 1e-12,
            parametrization: Parametrization::Native,
            sample_every: 1,
        }
    }
}

impl IntegratorConfig {
    pub fn new(step: f64, t_end: f64) -> Self {
        IntegratorConfig { step, t_end, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(Error::InvalidArgument(format!("step must be positive, got {}", self.step)));
        }
        if !(self.t_end.is_finite() && self.t_end >= self.step) {
            return Err(Error::InvalidArgument(format!("t_end {} must be at least the step {}", self.t_end, self.step)));
        }
        if !(self.boundary_snap >= 0.0 && self.boundary_snap < 1e-3) {
            return Err(Error::InvalidArgument("boundary_snap must lie in [0, 1e-3)".into()));
        }
        if self.sample_every == 0 {
            return Err(Error::InvalidArgument("sample_every must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<SimplexPoint>,
    /// `‖V(x)‖ₓ` at each recorded state.
    pub speed: Vec<f64>,
    pub supports: Vec<Vec<bool>>,
    pub warnings: Vec<String>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn n(&self) -> usize {
        self.states.first().map_or(0, |s| s.dim())
    }

    pub fn last(&self) -> Option<&SimplexPoint> {
        self.states.last()
    }

    /// Number of recorded transitions where the support changes.
    pub fn support_changes(&self) -> usize {
        self.supports.windows(2).filter(|w| w[0] != w[1]).count()
    }

    /// Coordinate `alpha` along the trajectory.
    pub fn coordinate(&self, alpha: usize) -> Vec<f64> {
        self.states.iter().map(|s| s.coords()[alpha]).collect()
    }

    /// Builds a trajectory from raw samples (speeds are left at zero).
    pub fn from_samples(times: Vec<f64>, states: Vec<SimplexPoint>) -> Result<Self> {
        if times.len() != states.len() || times.is_empty() {
            return Err(Error::InvalidArgument("times and states must be nonempty and of equal length".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("times must be strictly increasing".into()));
        }
        let supports = states.iter().map(|s| s.support_mask()).collect();
        let speed = vec![0.0; times.len()];
        Ok(Trajectory { times, states, speed, supports, warnings: Vec::new() })
    }
}

fn field_at(spec: &DynamicsSpec, coords: &[f64], tol: f64, param: Parametrization) -> Result<Vec<f64>> {
    let x = SimplexPoint::from_raw_unchecked(coords.to_vec(), tol);
    let v = spec.field(&x)?.into_coords();
    Ok(match param {
        Parametrization::Native => v,
        Parametrization::ArcLength => {
            let s = numerics::norm2(&v);
            if s > 1e-300 {
                v.iter().map(|c| c / s).collect()
            } else {
                vec![0.0; v.len()]
            }
        }
    })
}

fn axpy(x: &[f64], h: f64, k: &[f64]) -> Vec<f64> {
    x.iter().zip(k).map(|(a, b)| a + h * b).collect()
}

fn non_lipschitz_warning(spec: &DynamicsSpec, x0: &SimplexPoint) -> Option<String> {
    let p = match spec.metric.descriptor() {
        Descriptor::PRep(p) => *p,
        Descriptor::Hessian(hp) => hp.p(),
        _ => return None,
    };
    (p > 0.0 && p < 1.0 && !x0.is_interior()).then(|| {
        format!("metric exponent {p} is not Lipschitz at the boundary; solutions from this boundary state are not unique and the stationary branch is followed")
    })
}

/// Integrates `ẋ = V(x)` from `x0` up to `cfg.t_end`.
pub fn integrate(spec: &DynamicsSpec, x0: &SimplexPoint, cfg: &IntegratorConfig) -> Result<Trajectory> {
    cfg.validate()?;
    if x0.dim() != spec.n() {
        return Err(Error::DimensionMismatch { expected: spec.n(), got: x0.dim() });
    }
    let regime = spec.regime();
    let scheme = match cfg.scheme {
        Scheme::Auto => match regime {
            Regime::Continuous => Scheme::Rk4,
            Regime::Discontinuous => Scheme::EulerProjected,
        },
        s => s,
    };
    // Continuous dynamics keep the support of x0; the tolerance 0 keeps every
    // positive coordinate in the support.
    let tol = match regime {
        Regime::Continuous => 0.0,
        Regime::Discontinuous => cfg.boundary_snap,
    };
    let param = cfg.parametrization;
    let mut traj = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
        speed: Vec::new(),
        supports: Vec::new(),
        warnings: Vec::new(),
    };
    if let Some(w) = non_lipschitz_warning(spec, x0) {
        traj.warnings.push(w);
    }
    let support0 = x0.support_mask();
    let mut x: Vec<f64> = x0.coords().to_vec();
    let steps = ((cfg.t_end / cfg.step) - 1e-9).ceil().max(1.0) as usize;
    let mut clipped = false;

    let record = |traj: &mut Trajectory, t: f64, x: &[f64]| -> Result<()> {
        let p = SimplexPoint::from_raw_unchecked(x.to_vec(), tol);
        let v = spec.field(&p)?;
        let speed = spec.speed(&p, &v).unwrap_or(f64::NAN);
        traj.times.push(t);
        traj.supports.push(p.support_mask());
        traj.states.push(p);
        traj.speed.push(speed);
        Ok(())
    };
    record(&mut traj, 0.0, &x)?;

    for k in 0..steps {
        let t0 = k as f64 * cfg.step;
        let t1 = if k + 1 == steps { cfg.t_end } else { (k + 1) as f64 * cfg.step };
        let h = t1 - t0;
        let mut next = match scheme {
            Scheme::Rk4 | Scheme::Auto => {
                let k1 = field_at(spec, &x, tol, param)?;
                let k2 = field_at(spec, &axpy(&x, 0.5 * h, &k1), tol, param)?;
                let k3 = field_at(spec, &axpy(&x, 0.5 * h, &k2), tol, param)?;
                let k4 = field_at(spec, &axpy(&x, h, &k3), tol, param)?;
                (0..x.len()).map(|a| x[a] + h / 6.0 * (k1[a] + 2.0 * k2[a] + 2.0 * k3[a] + k4[a])).collect::<Vec<f64>>()
            }
            Scheme::EulerProjected => axpy(&x, h, &field_at(spec, &x, tol, param)?),
        };
        if next.iter().any(|c| !c.is_finite()) {
            return Err(Error::StepExplosion(f64::NAN));
        }
        let violation = next.iter().fold(0.0_f64, |m, c| m.max(-c)).max((next.iter().sum::<f64>() - 1.0).abs());
        if violation > 10.0 * cfg.step {
            return Err(Error::StepExplosion(violation));
        }
        match regime {
            Regime::Continuous if scheme != Scheme::EulerProjected => {
                for (a, c) in next.iter_mut().enumerate() {
                    if !support0[a] {
                        *c = 0.0;
                    } else if *c <= 0.0 {
                        *c = f64::MIN_POSITIVE;
                        clipped = true;
                    }
                }
                let total: f64 = next.iter().sum();
                next.iter_mut().for_each(|c| *c /= total);
            }
            _ => {
                let mut p = euclid_project_simplex(&next)?.into_coords();
                for c in p.iter_mut() {
                    if *c <= cfg.boundary_snap {
                        *c = 0.0;
                    }
                }
                let total: f64 = p.iter().sum();
                p.iter_mut().for_each(|c| *c /= total);
                next = p;
            }
        }
        x = next;
        if (k + 1) % cfg.sample_every == 0 || k + 1 == steps {
            record(&mut traj, t1, &x)?;
        }
    }
    if clipped {
        traj.warnings.push("a coordinate inside the support underflowed and was held at the smallest positive value".into());
    }
    Ok(traj)
}

/// Trapezoidal running average `t⁻¹ ∫₀ᵗ x(s) ds` at every recorded time.
pub fn time_average(traj: &Trajectory) -> Result<Vec<SimplexPoint>> {
    if traj.is_empty() {
        return Err(Error::InvalidArgument("empty trajectory".into()));
    }
    let n = traj.n();
    let t0 = traj.times[0];
    let mut integral = vec![0.0; n];
    let mut out = Vec::with_capacity(traj.len());
    out.push(traj.states[0].clone());
    for i in 1..traj.len() {
        let dt = traj.times[i] - traj.times[i - 1];
        let (a, b) = (traj.states[i - 1].coords(), traj.states[i].coords());
        for k in 0..n {
            integral[k] += 0.5 * dt * (a[k] + b[k]);
        }
        let span = traj.times[i] - t0;
        out.push(SimplexPoint::from_weights(integral.iter().map(|v| v / span).collect())?);
    }
    Ok(out)
}

/// A return of the trajectory to its starting point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosureHit {
    pub period: f64,
    pub distance: f64,
}

pub const DEFAULT_CLOSURE_T_MIN: f64 = 0.5;

fn segment_distance(p: &[f64], a: &[f64], b: &[f64]) -> (f64, f64) {
    let d = numerics::sub(b, a);
    let dd = numerics::dot(&d, &d);
    let s = if dd > 0.0 { (numerics::dot(&numerics::sub(p, a), &d) / dd).clamp(0.0, 1.0) } else { 0.0 };
    let q = axpy(a, s, &d);
    (numerics::norm2(&numerics::sub(p, &q)), s)
}

/// First return within `eps` of the initial state after the trajectory has left
/// that ball and `t > t_min`; a trajectory that never leaves reports its first
/// sample beyond `t_min`.
pub fn orbit_closure(traj: &Trajectory, eps: f64, t_min: f64) -> Option<ClosureHit> {
    let x0 = traj.states.first()?.coords();
    let t0 = traj.times[0];
    let exit = traj.states.iter().position(|s| numerics::norm2(&numerics::sub(s.coords(), x0)) >= eps);
    let Some(exit) = exit else {
        let i = traj.times.iter().position(|t| *t - t0 > t_min)?;
        return Some(ClosureHit { period: traj.times[i] - t0, distance: traj.states[i].distance(&traj.states[0]) });
    };
    let start = exit.max(1);
    let mut best: Option<(f64, f64)> = None;
    for i in start..traj.len() {
        let (a, b) = (traj.states[i - 1].coords(), traj.states[i].coords());
        let (dist, s) = segment_distance(x0, a, b);
        let t = traj.times[i - 1] + s * (traj.times[i] - traj.times[i - 1]) - t0;
        if dist < eps && t > t_min {
            if best.is_none_or(|(bd, _)| dist < bd) {
                best = Some((dist, t));
            }
        } else if best.is_some() {
            break;
        }
    }
    best.map(|(distance, period)| ClosureHit { period, distance })
}

/// Minimum of `x_α` over the trailing 20% of samples (at least 100 samples
/// when available).
pub fn extinction_profile(traj: &Trajectory, alpha: usize) -> Result<f64> {
    if traj.is_empty() || alpha >= traj.n() {
        return Err(Error::InvalidArgument("strategy index out of range or empty trajectory".into()));
    }
    let window = trailing_window(traj.len());
    Ok(traj.states[traj.len() - window..].iter().map(|s| s.coords()[alpha]).fold(f64::INFINITY, f64::min))
}

pub(crate) fn trailing_window(len: usize) -> usize {
    (len / 5).max(100.min(len)).max(1)
}

/// CSV with header `t,x_1..x_n,speed,support_mask` followed by `extra` columns.
pub fn write_csv<W: Write>(traj: &Trajectory, extra: &[(String, Vec<f64>)], out: &mut W) -> io::Result<()> {
    let n = traj.n();
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("x_{i}")));
    header.push("speed".into());
    header.push("support_mask".into());
    header.extend(extra.iter().map(|(name, _)| csv_field(name)));
    write!(out, "{}\r\n", header.join(","))?;
    for i in 0..traj.len() {
        let mut row = vec![format!("{}", traj.times[i])];
        row.extend(traj.states[i].coords().iter().map(|c| format!("{c}")));
        row.push(format!("{}", traj.speed[i]));
        row.push(traj.supports[i].iter().map(|b| if *b { '1' } else { '0' }).collect());
        row.extend(extra.iter().map(|(_, v)| format!("{}", v[i])));
        write!(out, "{}\r\n", row.join(","))?;
    }
    Ok(())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
