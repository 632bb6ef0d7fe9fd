//! Lyapunov monitors, convergence verdicts and structural audits of trajectories.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dynamics::DynamicsSpec;
use crate::error::{Error, Result};
use crate::games::enumerate_restricted_equilibria;
use crate::hessian::HessianPotential;
use crate::integrator::{integrate, orbit_closure, trailing_window, IntegratorConfig, Trajectory, DEFAULT_CLOSURE_T_MIN};
use crate::numerics;
use crate::simplex::{sample_face, sample_uniform, SimplexPoint};

#[derive(Debug, Clone, PartialEq)]
pub enum MonitorKind {
    PotentialF,
    BregmanTo(SimplexPoint),
    KlTo(SimplexPoint),
    PayoffCorrelation,
    Speed,
}

impl MonitorKind {
    pub fn name(&self) -> &'static str {
        match self {
            MonitorKind::PotentialF => "potential_f",
            MonitorKind::BregmanTo(_) => "bregman_to",
            MonitorKind::KlTo(_) => "kl_to",
            MonitorKind::PayoffCorrelation => "payoff_correlation",
            MonitorKind::Speed => "speed",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Monitor {
    pub kind: MonitorKind,
    pub values: Vec<f64>,
    /// Forward differences `Δvalue / Δt`, one per step.
    pub rates: Vec<f64>,
}

impl Monitor {
    fn new(kind: MonitorKind, traj: &Trajectory, values: Vec<f64>) -> Self {
        let rates = values
            .windows(2)
            .zip(traj.times.windows(2))
            .map(|(v, t)| if v[0].is_finite() && v[1].is_finite() { (v[1] - v[0]) / (t[1] - t[0]) } else { f64::NAN })
            .collect();
        Monitor { kind, values, rates }
    }

    /// Largest single-step increase among finite values.
    pub fn max_increase(&self) -> f64 {
        self.finite_steps().map(|(a, b)| b - a).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest single-step decrease among finite values.
    pub fn max_decrease(&self) -> f64 {
        self.finite_steps().map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max)
    }

    fn finite_steps(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.values.windows(2).filter(|w| w[0].is_finite() && w[1].is_finite()).map(|w| (w[0], w[1]))
    }

    pub fn is_nonincreasing(&self, tol: f64) -> bool {
        self.finite_steps().all(|(a, b)| b <= a + tol)
    }

    pub fn is_nondecreasing(&self, tol: f64) -> bool {
        self.finite_steps().all(|(a, b)| b >= a - tol)
    }

    /// Strict decrease, ignoring steps where both values are below `floor`.
    pub fn is_strictly_decreasing(&self, floor: f64) -> bool {
        self.finite_steps().all(|(a, b)| b < a || (a <= floor && b <= floor))
    }

    /// `max_t |value(t) − value(0)|`.
    pub fn max_drift(&self) -> f64 {
        let v0 = self.values[0];
        self.values.iter().map(|v| (v - v0).abs()).fold(0.0, f64::max)
    }

    pub fn last(&self) -> f64 {
        *self.values.last().expect("monitors are never empty")
    }
}

/// Evaluates `kind` along a trajectory of `spec`.
pub fn monitor(traj: &Trajectory, spec: &DynamicsSpec, kind: MonitorKind) -> Result<Monitor> {
    let values = match &kind {
        MonitorKind::PotentialF => {
            let pot = spec.game.potential().ok_or(Error::MissingPotential)?;
            traj.states.iter().map(|s| (pot.f)(s.coords())).collect()
        }
        MonitorKind::BregmanTo(x_star) => {
            let hp = spec.metric.hessian_potential().ok_or(Error::MissingHessian)?;
            bregman_series(&hp, x_star, traj)?
        }
        MonitorKind::KlTo(x_star) => bregman_series(&HessianPotential::entropy(), x_star, traj)?,
        MonitorKind::PayoffCorrelation => traj
            .states
            .iter()
            .map(|s| {
                let v = spec.game.payoff(s)?;
                let f = spec.field(s)?;
                Ok(v.pair(f.coords()))
            })
            .collect::<Result<Vec<f64>>>()?,
        MonitorKind::Speed => traj.speed.clone(),
    };
    Ok(Monitor::new(kind, traj, values))
}

fn bregman_series(hp: &HessianPotential, x_star: &SimplexPoint, traj: &Trajectory) -> Result<Vec<f64>> {
    traj.states.iter().map(|s| hp.bregman(x_star.coords(), s.coords())).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    ConvergedToRestPoint { point: Vec<f64> },
    Recurrent { period: f64 },
    Undecided,
}

const CLOSURE_EPS: f64 = 1e-3;

/// Converged when the trailing window is within `tol` (per coordinate) and the
/// speed at its mean is below `tol`; recurrent when the orbit closes.
pub fn convergence_verdict(traj: &Trajectory, spec: &DynamicsSpec, tol: f64) -> Verdict {
    if traj.len() < 100 {
        return Verdict::Undecided;
    }
    let n = traj.n();
    let window = &traj.states[traj.len() - trailing_window(traj.len())..];
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    let mut mean = vec![0.0; n];
    for s in window {
        for a in 0..n {
            lo[a] = lo[a].min(s.coords()[a]);
            hi[a] = hi[a].max(s.coords()[a]);
            mean[a] += s.coords()[a] / window.len() as f64;
        }
    }
    let diameter = (0..n).map(|a| hi[a] - lo[a]).fold(0.0, f64::max);
    if diameter < tol {
        let tol_support = window.last().map_or(0.0, |s| s.support_tol());
        let m = SimplexPoint::from_raw_unchecked(mean, tol_support);
        if let Ok(v) = spec.field(&m) {
            if spec.speed(&m, &v).is_ok_and(|s| s < tol) {
                return Verdict::ConvergedToRestPoint { point: m.into_coords() };
            }
        }
    }
    match orbit_closure(traj, CLOSURE_EPS, DEFAULT_CLOSURE_T_MIN) {
        Some(hit) => Verdict::Recurrent { period: hit.period },
        None => Verdict::Undecided,
    }
}

/// Integrates `count` perturbations of `x_star` inside its domain and checks
/// that the Bregman divergence never increases and the final state is within
/// `radius / 10`.
pub fn ess_stability_probe(
    spec: &DynamicsSpec,
    x_star: &SimplexPoint,
    radius: f64,
    count: usize,
    cfg: &IntegratorConfig,
    seed: u64,
) -> Result<bool> {
    let Some(hp) = spec.metric.hessian_potential() else {
        return Ok(false);
    };
    let n = spec.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..count {
        let u = sample_uniform(&mut rng, n);
        let spread = numerics::norm2(&numerics::sub(u.coords(), x_star.coords())).max(1e-12);
        let r = radius * (0.2 + 0.8 * (i as f64 + 1.0) / count as f64) / spread;
        let x0 = SimplexPoint::from_weights(
            x_star.coords().iter().zip(u.coords()).map(|(a, b)| (1.0 - r.min(1.0)) * a + r.min(1.0) * b).collect(),
        )?;
        let traj = integrate(spec, &x0, cfg)?;
        let d = bregman_series(&hp, x_star, &traj)?;
        let tol = 1e-9 * d[0].abs().max(1e-12);
        if d.windows(2).any(|w| w[1] > w[0] + tol) {
            return Ok(false);
        }
        if traj.last().expect("nonempty").distance(x_star) >= radius / 10.0 {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PermanenceReport {
    pub certified: bool,
    /// Smallest value of `⟨v(x*), p − x*⟩` over boundary rest points.
    pub margin: f64,
    pub witness: Option<Vec<f64>>,
    /// Boundary faces carrying a continuum of rest points; these block certification.
    pub degenerate_faces: Vec<Vec<usize>>,
}

const PERMANENCE_MARGIN: f64 = 1e-9;

/// Checks `⟨v(x*), p − x*⟩ > 0` at every boundary rest point `x*`.
pub fn permanence_certificate(spec: &DynamicsSpec, p: &SimplexPoint) -> Result<PermanenceReport> {
    if spec.game.matrix().is_none() {
        return Err(Error::EnumerationImpossible);
    }
    if !p.is_interior() {
        return Err(Error::NotInterior);
    }
    let eq = enumerate_restricted_equilibria(&spec.game, 1e-12)?;
    let n = spec.n();
    let mut margin = f64::INFINITY;
    let mut witness = None;
    for x in eq.points.iter().filter(|x| !x.is_interior()) {
        let d = numerics::sub(p.coords(), x.coords());
        let m = spec.game.payoff(x)?.pair(&d);
        if m < margin {
            margin = m;
            witness = Some(x.coords().to_vec());
        }
    }
    let degenerate_faces: Vec<Vec<usize>> = eq.degenerate_supports.into_iter().filter(|s| s.len() < n).collect();
    let certified = margin > PERMANENCE_MARGIN && degenerate_faces.is_empty();
    Ok(PermanenceReport { certified, margin, witness: if certified { None } else { witness }, degenerate_faces })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationReport {
    pub samples: usize,
    /// `min ⟨v, V⟩ − ‖V‖ₓ²`.
    pub min_gap: f64,
    /// `min ⟨v, V⟩`.
    pub min_correlation: f64,
    /// Largest `‖V‖ₓ` among samples with `⟨v, V⟩ ≤ 1e-8`.
    pub max_speed_when_uncorrelated: f64,
}

/// Samples states uniformly and on random faces and records the worst
/// positive-correlation margins.
pub fn positive_correlation_audit(spec: &DynamicsSpec, samples: usize, seed: u64) -> Result<CorrelationReport> {
    if samples == 0 {
        return Err(Error::InvalidArgument("at least one sample is required".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = spec.n();
    let mut report = CorrelationReport {
        samples,
        min_gap: f64::INFINITY,
        min_correlation: f64::INFINITY,
        max_speed_when_uncorrelated: 0.0,
    };
    for i in 0..samples {
        let x = if i % 2 == 0 { sample_uniform(&mut rng, n) } else { sample_face(&mut rng, n) };
        let (corr, sq) = correlation_at(spec, &x)?;
        report.min_gap = report.min_gap.min(corr - sq);
        report.min_correlation = report.min_correlation.min(corr);
        if corr <= 1e-8 {
            report.max_speed_when_uncorrelated = report.max_speed_when_uncorrelated.max(sq.max(0.0).sqrt());
        }
    }
    Ok(report)
}

/// `(⟨v(x), V(x)⟩, ‖V(x)‖ₓ²)`.
pub fn correlation_at(spec: &DynamicsSpec, x: &SimplexPoint) -> Result<(f64, f64)> {
    let v = spec.game.payoff(x)?;
    let f = spec.field(x)?;
    Ok((v.pair(f.coords()), spec.metric.norm_sq(x, f.coords())?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::builtin;
    use crate::metrics::MetricField;

    fn pt(c: &[f64]) -> SimplexPoint {
        SimplexPoint::new(c.to_vec()).unwrap()
    }

    #[test]
    fn potential_increases_under_replicator() {
        let spec = DynamicsSpec::new(builtin::coordination(3), MetricField::shahshahani(3)).unwrap();
        let traj = integrate(&spec, &pt(&[0.5, 0.3, 0.2]), &IntegratorConfig::new(1e-2, 20.0)).unwrap();
        let m = monitor(&traj, &spec, MonitorKind::PotentialF).unwrap();
        assert!(m.is_nondecreasing(1e-12));
        assert!(m.last() > m.values[0]);
        let rps = DynamicsSpec::new(builtin::rps(), MetricField::shahshahani(3)).unwrap();
        assert!(matches!(monitor(&traj, &rps, MonitorKind::PotentialF), Err(Error::MissingPotential)));
    }

    #[test]
    fn potential_rate_matches_correlation() {
        let spec = DynamicsSpec::new(builtin::coordination(3), MetricField::prep(3, 1.5).unwrap()).unwrap();
        let traj = integrate(&spec, &pt(&[0.4, 0.35, 0.25]), &IntegratorConfig::new(1e-3, 2.0)).unwrap();
        let f = monitor(&traj, &spec, MonitorKind::PotentialF).unwrap();
        let c = monitor(&traj, &spec, MonitorKind::PayoffCorrelation).unwrap();
        for i in 0..f.rates.len() {
            let mid = 0.5 * (c.values[i] + c.values[i + 1]);
            assert!((f.rates[i] - mid).abs() < 1e-6);
        }
    }

    #[test]
    fn kl_decreases_in_contractive_game() {
        let spec = DynamicsSpec::new(builtin::contractive(3), MetricField::shahshahani(3)).unwrap();
        let b = SimplexPoint::barycenter(3);
        let traj = integrate(&spec, &pt(&[0.6, 0.3, 0.1]), &IntegratorConfig::new(1e-2, 50.0)).unwrap();
        let m = monitor(&traj, &spec, MonitorKind::KlTo(b)).unwrap();
        assert!(m.is_strictly_decreasing(1e-14));
        assert!(m.last() < 1e-6);
    }

    #[test]
    fn kl_is_conserved_in_rps() {
        let spec = DynamicsSpec::new(builtin::rps(), MetricField::shahshahani(3)).unwrap();
        let traj = integrate(&spec, &pt(&[0.5, 0.25, 0.25]), &IntegratorConfig::new(1e-3, 100.0)).unwrap();
        let m = monitor(&traj, &spec, MonitorKind::KlTo(SimplexPoint::barycenter(3))).unwrap();
        assert!(m.max_drift() < 5e-4);
    }

    #[test]
    fn verdicts() {
        let rps = DynamicsSpec::new(builtin::rps(), MetricField::shahshahani(3)).unwrap();
        let b = SimplexPoint::barycenter(3);
        let still = integrate(&rps, &b, &IntegratorConfig::new(1e-2, 2.0)).unwrap();
        assert!(matches!(convergence_verdict(&still, &rps, 1e-5), Verdict::ConvergedToRestPoint { .. }));
        let cyc = integrate(&rps, &pt(&[0.5, 0.25, 0.25]), &IntegratorConfig::new(1e-3, 30.0)).unwrap();
        assert!(matches!(convergence_verdict(&cyc, &rps, 1e-5), Verdict::Recurrent { .. }));
        let coord = DynamicsSpec::new(builtin::coordination(3), MetricField::shahshahani(3)).unwrap();
        let run = integrate(&coord, &pt(&[0.5, 0.3, 0.2]), &IntegratorConfig::new(1e-2, 60.0)).unwrap();
        match convergence_verdict(&run, &coord, 1e-5) {
            Verdict::ConvergedToRestPoint { point } => assert!(numerics::max_abs_diff(&point, &[1.0, 0.0, 0.0]) < 1e-5),
            v => panic!("{v:?}"),
        }
    }

    #[test]
    fn ess_probe_examples() {
        let cfg = IntegratorConfig::new(1e-2, 40.0);
        let b = SimplexPoint::barycenter(3);
        let neg = DynamicsSpec::new(builtin::contractive(3), MetricField::shahshahani(3)).unwrap();
        assert!(ess_stability_probe(&neg, &b, 0.1, 20, &cfg, 0).unwrap());
        let rps = DynamicsSpec::new(builtin::rps(), MetricField::shahshahani(3)).unwrap();
        assert!(!ess_stability_probe(&rps, &b, 0.1, 5, &cfg, 0).unwrap());
        let coord = DynamicsSpec::new(builtin::coordination(3), MetricField::shahshahani(3)).unwrap();
        assert!(ess_stability_probe(&coord, &SimplexPoint::vertex(3, 0), 0.1, 10, &cfg, 0).unwrap());
    }

    #[test]
    fn permanence_examples() {
        let b = SimplexPoint::barycenter(3);
        let m = MetricField::shahshahani(3);
        let rps = DynamicsSpec::new(builtin::rps(), m.clone()).unwrap();
        let r = permanence_certificate(&rps, &b).unwrap();
        assert!(!r.certified);
        assert!(r.margin.abs() < 1e-15);
        let perm = DynamicsSpec::new(builtin::rps_permanent(), m.clone()).unwrap();
        let r = permanence_certificate(&perm, &b).unwrap();
        assert!(r.certified);
        assert!((r.margin - 1.0 / 3.0).abs() < 1e-15);
        let coord = DynamicsSpec::new(builtin::coordination(3), m).unwrap();
        let r = permanence_certificate(&coord, &b).unwrap();
        assert!(!r.certified && r.margin < 0.0);
        let bb = crate::games::PopulationGame::black_box(3, |x| x.to_vec());
        let spec = DynamicsSpec::new(bb, MetricField::shahshahani(3)).unwrap();
        assert_eq!(permanence_certificate(&spec, &b), Err(Error::EnumerationImpossible));
    }

    #[test]
    fn correlation_audits() {
        for m in [MetricField::shahshahani(3), MetricField::euclidean(3), MetricField::prep(3, 2.0).unwrap()] {
            let spec = DynamicsSpec::new(builtin::rps(), m).unwrap();
            let r = positive_correlation_audit(&spec, 500, 1).unwrap();
            assert!(r.min_gap >= -1e-10, "{r:?}");
            assert!(r.min_correlation >= -1e-10);
            assert!(r.max_speed_when_uncorrelated <= 1e-5);
        }
        let spec = DynamicsSpec::new(builtin::rps(), MetricField::shahshahani(3)).unwrap();
        let (c, s) = correlation_at(&spec, &SimplexPoint::barycenter(3)).unwrap();
        assert_eq!((c.abs(), s), (0.0, 0.0));
    }
}
