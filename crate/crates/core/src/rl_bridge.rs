//! Reinforcement learning in score space: `ẏ = v(x)`, `x = Q(y)`.

use std::io::{self, Write};

use crate::dynamics::DynamicsSpec;
use crate::error::{Error, Result};
use crate::games::{dominated_pairs, PopulationGame};
use crate::hessian::HessianPotential;
use crate::integrator::{IntegratorConfig, Trajectory};
use crate::simplex::Covector;

/// Scores and the mixed strategies they induce.
#[derive(Debug, Clone)]
pub struct RlRun {
    pub scores: Vec<Covector>,
    pub induced: Trajectory,
}

impl RlRun {
    pub fn times(&self) -> &[f64] {
        &self.induced.times
    }
}

fn payoff_of(hp: &HessianPotential, game: &PopulationGame, y: &[f64]) -> Result<Vec<f64>> {
    let x = hp.choice_map(&Covector(y.to_vec()))?;
    Ok(game.payoff(&x)?.0)
}

/// RK4 on the scores; `speed` on the induced path is that of the matching
/// Hessian dynamics.
pub fn integrate_rl(hp: &HessianPotential, game: &PopulationGame, y0: &Covector, cfg: &IntegratorConfig) -> Result<RlRun> {
    cfg.validate()?;
    if !hp.steep() {
        return Err(Error::NonSteep);
    }
    let n = game.n();
    if y0.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y0.dim() });
    }
    let spec = DynamicsSpec::new(game.clone(), hp.metric(n))?;
    let steps = ((cfg.t_end / cfg.step) - 1e-9).ceil().max(1.0) as usize;
    let mut y = y0.0.clone();
    let mut scores = Vec::new();
    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut speed = Vec::new();
    let mut record = |t: f64, y: &[f64]| -> Result<()> {
        let x = hp.choice_map(&Covector(y.to_vec()))?;
        let v = spec.field(&x)?;
        speed.push(spec.speed(&x, &v).unwrap_or(f64::NAN));
        times.push(t);
        states.push(x);
        scores.push(Covector(y.to_vec()));
        Ok(())
    };
    record(0.0, &y)?;
    for k in 0..steps {
        let t0 = k as f64 * cfg.step;
        let t1 = if k + 1 == steps { cfg.t_end } else { (k + 1) as f64 * cfg.step };
        let h = t1 - t0;
        let stage = |base: &[f64], s: f64, d: &[f64]| -> Vec<f64> { base.iter().zip(d).map(|(a, b)| a + s * b).collect() };
        let k1 = payoff_of(hp, game, &y)?;
        let k2 = payoff_of(hp, game, &stage(&y, 0.5 * h, &k1))?;
        let k3 = payoff_of(hp, game, &stage(&y, 0.5 * h, &k2))?;
        let k4 = payoff_of(hp, game, &stage(&y, h, &k3))?;
        for a in 0..n {
            y[a] += h / 6.0 * (k1[a] + 2.0 * k2[a] + 2.0 * k3[a] + k4[a]);
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::StepExplosion(f64::NAN));
        }
        if (k + 1) % cfg.sample_every == 0 || k + 1 == steps {
            record(t1, &y)?;
        }
    }
    let supports = states.iter().map(|s| s.support_mask()).collect();
    Ok(RlRun { scores, induced: Trajectory { times, states, speed, supports, warnings: Vec::new() } })
}

/// Largest terminal share of a strictly dominated strategy after an RL run to `t_end`.
pub fn rl_dominated_extinction(
    hp: &HessianPotential,
    game: &PopulationGame,
    y0: &Covector,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    let pairs = dominated_pairs(game, 0.0)?;
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("game has no strictly dominated strategy".into()));
    }
    let run = integrate_rl(hp, game, y0, cfg)?;
    let last = run.induced.last().expect("nonempty run");
    Ok(pairs.iter().map(|(d, _)| last.coords()[*d]).fold(0.0, f64::max))
}

/// CSV with header `t,y_1..y_n,x_1..x_n`.
pub fn write_rl_csv<W: Write>(run: &RlRun, out: &mut W) -> io::Result<()> {
    let n = run.induced.n();
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("y_{i}")));
    header.extend((1..=n).map(|i| format!("x_{i}")));
    write!(out, "{}\r\n", header.join(","))?;
    for (i, t) in run.times().iter().enumerate() {
        let mut row = vec![format!("{t}")];
        row.extend(run.scores[i].0.iter().map(|v| format!("{v}")));
        row.extend(run.induced.states[i].coords().iter().map(|v| format!("{v}")));
        write!(out, "{}\r\n", row.join(","))?;
    }
    Ok(())
}
