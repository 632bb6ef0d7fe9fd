//! Scenario files and the `simulate`, `portrait` and `audit` commands.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{monitor, positive_correlation_audit, MonitorKind};
use crate::dynamics::{
    mean_dynamics_shifted, vector_field, vector_field_coords, vector_field_hopkins, vector_field_normalized,
    DynamicsSpec, Form, ProtocolKind, RevisionProtocol,
};
use crate::games::{builtin, classify_contractive, enumerate_nash, enumerate_restricted_equilibria, Contractivity, PopulationGame};
use crate::hessian::HessianPotential;
use crate::integrator::{integrate, orbit_closure, write_csv, IntegratorConfig, Parametrization, Trajectory, DEFAULT_CLOSURE_T_MIN};
use crate::metrics::{Extendability, MetricField};
use crate::numerics::{max_abs_diff, Matrix};
use crate::rl_bridge::{integrate_rl, write_rl_csv};
use crate::simplex::{sample_interior, Covector, SimplexPoint};

pub const SCHEMA_VERSION: u32 = 1;
pub const THREADS_ENV: &str = "GEOFLOW_THREADS";

// ---------------------------------------------------------------------------
// Scenario
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: u64,
    pub game: GameSpec,
    pub metric: MetricSpec,
    #[serde(default)]
    pub form: Form,
    #[serde(default)]
    pub mode: Mode,
    pub initial_conditions: InitialConditions,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub monitors: Vec<MonitorSpec>,
    /// Target of the `bregman` and `kl` monitors; defaults to the barycenter.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rest_point: Option<Vec<f64>>,
    #[serde(default)]
    pub outputs: Outputs,
}

/// A named built-in game or an explicit payoff matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct GameSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    /// Size of the scalable built-ins (`coordination`, `contractive`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
    /// Declares the matrix symmetric, giving the game the potential `½xᵀAx`.
    #[serde(default)]
    pub symmetric: bool,
}

/// `"euclidean"`, `"projection"`, `"shahshahani"`, `"replicator"`,
/// `"logbarrier"`, `"prep:<p>"`, `"custom-potential:<id>"`, or the
/// structured form `{"kind": "prep", "p": 1.5}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MetricSpec {
    Named(String),
    Detailed(MetricDetail),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricDetail {
    pub kind: MetricKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricKind {
    Euclidean,
    Shahshahani,
    Prep,
    Logbarrier,
    CustomPotential,
}

/// Ids accepted by the `custom-potential` metric.
pub const CUSTOM_POTENTIALS: &[&str] = &["entropy", "log-barrier", "quadratic", "p=<value>"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Integrate the state dynamics.
    #[default]
    Flow,
    /// Integrate scores `ẏ = v(Q(y))` from `y₀ = ∇h(x₀)`.
    Rl,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct InitialConditions {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<Vec<f64>>>,
    /// Grid density `d`: every point with coordinates in `{0, 1/d, …, 1}`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(default)]
    pub include_boundary: bool,
    /// Relative multiplicative jitter applied to grid points.
    #[serde(default)]
    pub jitter: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MonitorSpec {
    Speed,
    Potential,
    Bregman,
    Kl,
    PayoffCorrelation,
}

impl MonitorSpec {
    pub fn column(&self) -> &'static str {
        match self {
            MonitorSpec::Speed => "monitor_speed",
            MonitorSpec::Potential => "potential",
            MonitorSpec::Bregman => "bregman",
            MonitorSpec::Kl => "kl",
            MonitorSpec::PayoffCorrelation => "payoff_correlation",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Outputs {
    pub dir: PathBuf,
    pub prefix: String,
    pub portrait: String,
    pub report: String,
}

impl Default for Outputs {
    fn default() -> Self {
        Outputs {
            dir: PathBuf::from("."),
            prefix: "trajectory".into(),
            portrait: "portrait.svg".into(),
            report: "audit.json".into(),
        }
    }
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| CliError::Validation(format!("scenario: {e}")))?;
        if s.schema_version != SCHEMA_VERSION {
            return Err(CliError::Validation(format!(
                "schema_version: unsupported version {}, expected {SCHEMA_VERSION}",
                s.schema_version
            )));
        }
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Hex SHA-256 of the canonical serialization, output locations excluded.
    pub fn hash(&self) -> String {
        let canonical = Scenario { outputs: Outputs::default(), ..self.clone() };
        hex::encode(Sha256::digest(canonical.to_json().as_bytes()))
    }

    pub fn apply_overrides(&mut self, o: &Overrides) {
        if let Some(d) = &o.out_dir {
            self.outputs.dir = d.clone();
        }
        if let Some(s) = o.step {
            self.integrator.step = s;
        }
        if let Some(t) = o.t_end {
            self.integrator.t_end = t;
        }
    }

    /// Builds every object the commands need, or a field-level diagnostic.
    pub fn resolve(&self) -> Result<Resolved, CliError> {
        let game = resolve_game(&self.game)?;
        let n = game.n();
        let (metric, hp) = resolve_metric(&self.metric, n)?;
        let spec = DynamicsSpec::new(game, metric).map_err(|e| invalid("metric", e))?.with_form(self.form);
        self.integrator.validate().map_err(|e| invalid("integrator", e))?;
        let initial = self.resolve_initial(n)?;
        let target = match &self.rest_point {
            Some(p) => point("rest_point", p, n)?,
            None => SimplexPoint::barycenter(n),
        };
        let mut monitors = Vec::new();
        for m in &self.monitors {
            let kind = match m {
                MonitorSpec::Speed => MonitorKind::Speed,
                MonitorSpec::Potential => {
                    if spec.game.potential().is_none() {
                        return Err(CliError::Validation("monitors: potential requested but the game has none".into()));
                    }
                    MonitorKind::PotentialF
                }
                MonitorSpec::Bregman => {
                    if hp.is_none() {
                        return Err(CliError::Validation("monitors: bregman requested but the metric has no Hessian potential".into()));
                    }
                    MonitorKind::BregmanTo(target.clone())
                }
                MonitorSpec::Kl => MonitorKind::KlTo(target.clone()),
                MonitorSpec::PayoffCorrelation => MonitorKind::PayoffCorrelation,
            };
            monitors.push((m.column().to_string(), kind));
        }
        if self.mode == Mode::Rl {
            match hp {
                Some(h) if h.steep() => {}
                _ => return Err(CliError::Validation("mode: rl needs a metric with a steep Hessian potential (p >= 1)".into())),
            }
            if !self.monitors.is_empty() {
                return Err(CliError::Validation("monitors: not available in rl mode".into()));
            }
            if let Some(i) = initial.iter().position(|x| !x.is_interior()) {
                return Err(CliError::Validation(format!("initial_conditions[{i}]: rl mode needs interior starts")));
            }
        }
        Ok(Resolved { spec, hp, initial, monitors, target })
    }

    fn resolve_initial(&self, n: usize) -> Result<Vec<SimplexPoint>, CliError> {
        let ic = &self.initial_conditions;
        if !(ic.jitter.is_finite() && (0.0..1.0).contains(&ic.jitter)) {
            return Err(CliError::Validation("initial_conditions.jitter: must lie in [0, 1)".into()));
        }
        match (&ic.points, ic.grid) {
            (Some(pts), None) => {
                if pts.is_empty() {
                    return Err(CliError::Validation("initial_conditions.points: empty list".into()));
                }
                pts.iter()
                    .enumerate()
                    .map(|(i, p)| point(&format!("initial_conditions.points[{i}]"), p, n))
                    .collect()
            }
            (None, Some(d)) => {
                if d == 0 || (!ic.include_boundary && d < n) {
                    return Err(CliError::Validation(format!(
                        "initial_conditions.grid: density {d} yields no {} points for n = {n}",
                        if ic.include_boundary { "grid" } else { "interior" }
                    )));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                let lo = if ic.include_boundary { 0 } else { 1 };
                let mut out = Vec::new();
                let mut parts = vec![0usize; n];
                compositions(d, lo, 0, &mut parts, &mut |c| {
                    let w: Vec<f64> = c
                        .iter()
                        .map(|k| {
                            let base = *k as f64 / d as f64;
                            if ic.jitter > 0.0 && *k > 0 {
                                base * (1.0 + ic.jitter * (2.0 * rng.random::<f64>() - 1.0))
                            } else {
                                base
                            }
                        })
                        .collect();
                    out.push(SimplexPoint::from_weights(w).expect("grid point has positive mass"));
                });
                Ok(out)
            }
            _ => Err(CliError::Validation("initial_conditions: give exactly one of `points` or `grid`".into())),
        }
    }
}

fn compositions(rest: usize, lo: usize, i: usize, parts: &mut Vec<usize>, emit: &mut dyn FnMut(&[usize])) {
    let n = parts.len();
    if i + 1 == n {
        if rest >= lo {
            parts[i] = rest;
            emit(parts);
        }
        return;
    }
    let reserve = lo * (n - i - 1);
    if rest < reserve + lo {
        return;
    }
    for k in (lo..=rest - reserve).rev() {
        parts[i] = k;
        compositions(rest - k, lo, i + 1, parts, emit);
    }
}

fn invalid(field: &str, e: crate::Error) -> CliError {
    CliError::Validation(format!("{field}: {e}"))
}

fn point(field: &str, p: &[f64], n: usize) -> Result<SimplexPoint, CliError> {
    if p.len() != n {
        return Err(CliError::Validation(format!("{field}: has {} coordinates, expected {n}", p.len())));
    }
    SimplexPoint::new(p.to_vec()).map_err(|e| invalid(field, e))
}

fn resolve_game(g: &GameSpec) -> Result<PopulationGame, CliError> {
    match (&g.builtin, &g.matrix) {
        (Some(name), None) => {
            if g.symmetric {
                return Err(CliError::Validation("game.symmetric: only applies to an explicit matrix".into()));
            }
            match (name.as_str(), g.n) {
                ("coordination", Some(n)) if n >= 2 => Ok(builtin::coordination(n)),
                ("contractive", Some(n)) if n >= 2 => Ok(builtin::contractive(n)),
                (_, Some(n)) if n < 2 => Err(CliError::Validation("game.n: must be at least 2".into())),
                ("coordination" | "contractive", None) => Ok(builtin::by_name(name).expect("known builtin")),
                (_, Some(_)) => Err(CliError::Validation(format!("game.n: builtin `{name}` has a fixed size"))),
                (_, None) => builtin::by_name(name).ok_or_else(|| {
                    CliError::Validation(format!("game.builtin: unknown game `{name}` (known: {})", builtin::NAMES.join(", ")))
                }),
            }
        }
        (None, Some(rows)) => {
            if g.n.is_some() {
                return Err(CliError::Validation("game.n: only applies to scalable builtins".into()));
            }
            if rows.is_empty() {
                return Err(CliError::Validation("game.matrix: empty matrix".into()));
            }
            if let Some(i) = rows.iter().position(|r| r.len() != rows.len()) {
                return Err(CliError::Validation(format!(
                    "game.matrix[{i}]: row has {} entries, expected {}",
                    rows[i].len(),
                    rows.len()
                )));
            }
            let a = Matrix::from_rows(rows).map_err(|e| invalid("game.matrix", e))?;
            let game = if g.symmetric { PopulationGame::symmetric_matching(a) } else { PopulationGame::matching(a) };
            game.map_err(|e| invalid("game.matrix", e))
        }
        _ => Err(CliError::Validation("game: give exactly one of `builtin` or `matrix`".into())),
    }
}

fn custom_potential(id: &str) -> Option<HessianPotential> {
    match id {
        "entropy" => Some(HessianPotential::entropy()),
        "log-barrier" => Some(HessianPotential::log_barrier()),
        "quadratic" => Some(HessianPotential::quadratic()),
        _ => id.strip_prefix("p=").and_then(|v| v.parse::<f64>().ok()).and_then(|p| HessianPotential::new(p).ok()),
    }
}

fn resolve_metric(m: &MetricSpec, n: usize) -> Result<(MetricField, Option<HessianPotential>), CliError> {
    let (kind, p, id) = match m {
        MetricSpec::Named(s) => match s.as_str() {
            "euclidean" | "projection" => (MetricKind::Euclidean, None, None),
            "shahshahani" | "replicator" => (MetricKind::Shahshahani, None, None),
            "logbarrier" | "log-barrier" => (MetricKind::Logbarrier, None, None),
            other => {
                if let Some(v) = other.strip_prefix("prep:") {
                    let p = v.parse::<f64>().map_err(|_| CliError::Validation(format!("metric: `{v}` is not a number")))?;
                    (MetricKind::Prep, Some(p), None)
                } else if let Some(id) = other.strip_prefix("custom-potential:") {
                    (MetricKind::CustomPotential, None, Some(id.to_string()))
                } else {
                    return Err(CliError::Validation(format!("metric: unknown metric `{other}`")));
                }
            }
        },
        MetricSpec::Detailed(d) => (d.kind, d.p, d.id.clone()),
    };
    let hp = match kind {
        MetricKind::Euclidean => HessianPotential::quadratic(),
        MetricKind::Shahshahani => HessianPotential::entropy(),
        MetricKind::Logbarrier => HessianPotential::log_barrier(),
        MetricKind::Prep => {
            let p = p.ok_or_else(|| CliError::Validation("metric.p: required for prep".into()))?;
            HessianPotential::new(p).map_err(|e| invalid("metric.p", e))?
        }
        MetricKind::CustomPotential => {
            let id = id.ok_or_else(|| CliError::Validation("metric.id: required for custom-potential".into()))?;
            custom_potential(&id).ok_or_else(|| {
                CliError::Validation(format!("metric.id: unknown potential `{id}` (known: {})", CUSTOM_POTENTIALS.join(", ")))
            })?
        }
    };
    let metric = match kind {
        MetricKind::Euclidean => MetricField::euclidean(n),
        MetricKind::Shahshahani => MetricField::shahshahani(n),
        MetricKind::Prep | MetricKind::Logbarrier => MetricField::prep(n, hp.p()).map_err(|e| invalid("metric", e))?,
        MetricKind::CustomPotential => hp.metric(n),
    };
    Ok((metric, Some(hp)))
}

/// A validated scenario.
pub struct Resolved {
    pub spec: DynamicsSpec,
    pub hp: Option<HessianPotential>,
    pub initial: Vec<SimplexPoint>,
    pub monitors: Vec<(String, MonitorKind)>,
    pub target: SimplexPoint,
}

// ---------------------------------------------------------------------------
// Errors and command line
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CliError {
    #[error("invalid scenario: {0}")]
    Validation(String),
    #[error("{0}")]
    Dimension(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Dimension(_) => 3,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "geoflow", version, about = "Riemannian game dynamics on the simplex")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate every initial condition and write one CSV each.
    Simulate(Overrides),
    /// Draw a ternary phase portrait (3 strategies only).
    Portrait(Overrides),
    /// Run the diagnostic checks and write a JSON report.
    Audit(Overrides),
}

#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// Scenario file (JSON).
    pub scenario: PathBuf,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub t_end: Option<f64>,
}

/// Runs a parsed command line; returns the files written.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    let (o, cmd): (&Overrides, fn(&Scenario) -> Result<Vec<PathBuf>, CliError>) = match &cli.command {
        Command::Simulate(o) => (o, cmd_simulate),
        Command::Portrait(o) => (o, cmd_portrait),
        Command::Audit(o) => (o, cmd_audit),
    };
    let mut scenario = Scenario::load(&o.scenario)?;
    scenario.apply_overrides(o);
    with_thread_cap(|| cmd(&scenario))
}

fn with_thread_cap<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(k) = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()).filter(|k| *k > 0) {
        builder = builder.num_threads(k);
    }
    match builder.build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

fn out_path(s: &Scenario, name: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(&s.outputs.dir)?;
    Ok(s.outputs.dir.join(name))
}

fn integrate_all(r: &Resolved, cfg: &IntegratorConfig) -> Result<Vec<Trajectory>, CliError> {
    r.initial.par_iter().map(|x0| integrate(&r.spec, x0, cfg).map_err(CliError::from)).collect()
}

fn report_warnings(trajs: &[Trajectory]) {
    for (i, t) in trajs.iter().enumerate() {
        for w in &t.warnings {
            eprintln!("warning: initial condition {i}: {w}");
        }
    }
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

/// One CSV per initial condition: `<prefix>_<index>.csv`.
pub fn cmd_simulate(s: &Scenario) -> Result<Vec<PathBuf>, CliError> {
    let r = s.resolve()?;
    let mut written = Vec::new();
    match s.mode {
        Mode::Flow => {
            let trajs = integrate_all(&r, &s.integrator)?;
            report_warnings(&trajs);
            for (i, traj) in trajs.iter().enumerate() {
                let mut extra = Vec::new();
                for (col, kind) in &r.monitors {
                    extra.push((col.clone(), monitor(traj, &r.spec, kind.clone())?.values));
                }
                let path = out_path(s, &format!("{}_{i:03}.csv", s.outputs.prefix))?;
                let mut w = BufWriter::new(fs::File::create(&path)?);
                write_csv(traj, &extra, &mut w)?;
                w.flush()?;
                written.push(path);
            }
        }
        Mode::Rl => {
            let hp = r.hp.expect("validated");
            let runs: Vec<_> = r
                .initial
                .par_iter()
                .map(|x0| integrate_rl(&hp, &r.spec.game, &Covector(hp.dh(x0.coords())), &s.integrator))
                .collect::<crate::Result<_>>()?;
            for (i, run) in runs.iter().enumerate() {
                let path = out_path(s, &format!("{}_{i:03}.csv", s.outputs.prefix))?;
                let mut w = BufWriter::new(fs::File::create(&path)?);
                write_rl_csv(run, &mut w)?;
                w.flush()?;
                written.push(path);
            }
        }
    }
    Ok(written)
}

// ---------------------------------------------------------------------------
// portrait
// ---------------------------------------------------------------------------

const SVG_W: f64 = 640.0;
const SVG_H: f64 = 580.0;
const SIDE: f64 = 560.0;
const MAX_POINTS: usize = 4000;
const REST_TOL: f64 = 1e-9;

/// Numbers in SVG output carry 9 significant digits.
pub fn fmt_sig9(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return "0".into();
    }
    let rounded: f64 = format!("{v:.8e}").parse().expect("formatted float parses");
    format!("{rounded}")
}

/// Barycentric coordinates to the plane: `e₁` bottom left, `e₂` bottom right, `e₃` on top.
pub fn ternary_xy(x: &[f64]) -> (f64, f64) {
    let left = (SVG_W - SIDE) / 2.0;
    let base = SVG_H - 40.0;
    let h = SIDE * 3f64.sqrt() / 2.0;
    let corners = [(left, base), (left + SIDE, base), (left + SIDE / 2.0, base - h)];
    let mut p = (0.0, 0.0);
    for (c, w) in corners.iter().zip(x) {
        p.0 += w * c.0;
        p.1 += w * c.1;
    }
    p
}

/// Rest points among the restricted equilibria of a matching game.
fn rest_points(spec: &DynamicsSpec) -> Vec<SimplexPoint> {
    let Ok(candidates) = enumerate_restricted_equilibria(&spec.game, 1e-10) else {
        return Vec::new();
    };
    candidates
        .points
        .into_iter()
        .filter(|x| spec.field(x).map(|v| v.norm2() < REST_TOL).unwrap_or(false))
        .collect()
}

fn pts_attr(pts: &[(f64, f64)]) -> String {
    let mut s = String::new();
    for (i, (a, b)) in pts.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{},{}", fmt_sig9(*a), fmt_sig9(*b));
    }
    s
}

fn arrows(pts: &[(f64, f64)], out: &mut String) {
    let mut cum = vec![0.0];
    for w in pts.windows(2) {
        let d = ((w[1].0 - w[0].0).powi(2) + (w[1].1 - w[0].1).powi(2)).sqrt();
        cum.push(cum.last().unwrap() + d);
    }
    let total = *cum.last().unwrap();
    for f in [0.2, 0.5, 0.8] {
        let target = f * total;
        let i = cum.partition_point(|c| *c < target).clamp(1, pts.len() - 1);
        let mut j = i - 1;
        while j > 0 && cum[i] - cum[j] < 2.0 {
            j -= 1;
        }
        if cum[i] - cum[j] <= 1e-9 {
            continue;
        }
        let _ = writeln!(
            out,
            r#"  <path class="arrow" d="M{},{} L{},{}" marker-end="url(#arrow)"/>"#,
            fmt_sig9(pts[j].0),
            fmt_sig9(pts[j].1),
            fmt_sig9(pts[i].0),
            fmt_sig9(pts[i].1)
        );
    }
}

/// SVG 1.1 ternary plot of `trajs` with the rest points of `spec` marked.
pub fn render_portrait(spec: &DynamicsSpec, trajs: &[Trajectory]) -> String {
    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{SVG_W}" height="{SVG_H}" viewBox="0 0 {SVG_W} {SVG_H}">"#
    );
    svg.push_str(concat!(
        "  <defs>\n",
        "    <marker id=\"arrow\" viewBox=\"0 0 10 10\" refX=\"8\" refY=\"5\" markerWidth=\"7\" markerHeight=\"7\" orient=\"auto\">\n",
        "      <path d=\"M0,0 L10,5 L0,10 z\" fill=\"#1f4e79\"/>\n",
        "    </marker>\n",
        "  </defs>\n",
        "  <style>\n",
        "    .edge { fill: none; stroke: #000; stroke-width: 1.5 }\n",
        "    .orbit { fill: none; stroke: #1f4e79; stroke-width: 1 }\n",
        "    .arrow { fill: none; stroke: #1f4e79; stroke-width: 1 }\n",
        "    .still { fill: #1f4e79 }\n",
        "    .rest { fill: #c00000; stroke: #000; stroke-width: 0.5 }\n",
        "    text { font-family: sans-serif; font-size: 14px }\n",
        "  </style>\n",
    ));
    let corners: Vec<(f64, f64)> = (0..3).map(|a| ternary_xy(SimplexPoint::vertex(3, a).coords())).collect();
    let _ = writeln!(svg, r#"  <polygon class="edge" points="{}"/>"#, pts_attr(&corners));
    for (a, (cx, cy)) in corners.iter().enumerate() {
        let (dx, dy) = match a {
            0 => (-18.0, 18.0),
            1 => (8.0, 18.0),
            _ => (-4.0, -10.0),
        };
        let _ = writeln!(svg, r#"  <text x="{}" y="{}">{}</text>"#, fmt_sig9(cx + dx), fmt_sig9(cy + dy), a + 1);
    }
    for traj in trajs {
        let stride = traj.len().div_ceil(MAX_POINTS).max(1);
        let mut pts: Vec<(f64, f64)> = traj.states.iter().step_by(stride).map(|s| ternary_xy(s.coords())).collect();
        let last = ternary_xy(traj.states.last().expect("nonempty trajectory").coords());
        if pts.last() != Some(&last) {
            pts.push(last);
        }
        let extent = pts.iter().map(|p| (p.0 - pts[0].0).abs().max((p.1 - pts[0].1).abs())).fold(0.0, f64::max);
        if extent < 1e-9 {
            let _ = writeln!(svg, r#"  <circle class="still" cx="{}" cy="{}" r="2.5"/>"#, fmt_sig9(pts[0].0), fmt_sig9(pts[0].1));
            continue;
        }
        let _ = writeln!(svg, r#"  <polyline class="orbit" points="{}"/>"#, pts_attr(&pts));
        let first_loop = match orbit_closure(traj, 1e-3, DEFAULT_CLOSURE_T_MIN) {
            Some(hit) => {
                let k = traj.times.partition_point(|t| *t <= hit.period);
                let end = k.div_ceil(stride).clamp(2, pts.len());
                &pts[..end]
            }
            None => &pts[..],
        };
        arrows(first_loop, &mut svg);
    }
    for x in rest_points(spec) {
        let (cx, cy) = ternary_xy(x.coords());
        let _ = writeln!(svg, r#"  <circle class="rest" cx="{}" cy="{}" r="4"/>"#, fmt_sig9(cx), fmt_sig9(cy));
    }
    svg.push_str("</svg>\n");
    svg
}

pub fn cmd_portrait(s: &Scenario) -> Result<Vec<PathBuf>, CliError> {
    let r = s.resolve()?;
    if r.spec.n() != 3 {
        return Err(CliError::Dimension(format!("portrait needs 3 strategies, the game has {}", r.spec.n())));
    }
    let trajs = match s.mode {
        Mode::Flow => integrate_all(&r, &s.integrator)?,
        Mode::Rl => {
            let hp = r.hp.expect("validated");
            r.initial
                .par_iter()
                .map(|x0| integrate_rl(&hp, &r.spec.game, &Covector(hp.dh(x0.coords())), &s.integrator).map(|run| run.induced))
                .collect::<crate::Result<Vec<_>>>()?
        }
    };
    report_warnings(&trajs);
    let path = out_path(s, &s.outputs.portrait)?;
    fs::write(&path, render_portrait(&r.spec, &trajs))?;
    Ok(vec![path])
}

// ---------------------------------------------------------------------------
// audit
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    /// Signed slack to the threshold; nonnegative exactly when `pass`.
    pub margin: f64,
    pub details: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Skipped {
    pub name: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub schema_version: u32,
    pub scenario_hash: String,
    pub checks: Vec<Check>,
    pub skipped: Vec<Skipped>,
}

impl AuditReport {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub const PC_TOL: f64 = 1e-8;
pub const PC_SPEED_TOL: f64 = 1e-5;
pub const MONOTONE_TOL: f64 = 1e-9;
pub const CONSERVATION_TOL: f64 = 5e-4;
pub const PROTOCOL_TOL: f64 = 1e-10;
pub const FORM_TOL: f64 = 1e-8;
pub const RL_TOL: f64 = 1e-4;
const AUDIT_SAMPLES: usize = 200;
const RL_HORIZON: f64 = 20.0;

struct Audit {
    checks: Vec<Check>,
    skipped: Vec<Skipped>,
}

impl Audit {
    fn push(&mut self, name: &str, margin: f64, details: serde_json::Value) {
        self.checks.push(Check { name: name.into(), pass: margin >= 0.0, margin, details });
    }

    fn skip(&mut self, name: &str, reason: impl Into<String>) {
        self.skipped.push(Skipped { name: name.into(), reason: reason.into() });
    }
}

fn interior_samples(n: usize, seed: u64) -> Vec<SimplexPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..AUDIT_SAMPLES).map(|_| sample_interior(&mut rng, n, 1e-3)).collect()
}

/// Runs every applicable check.
pub fn audit(s: &Scenario) -> Result<AuditReport, CliError> {
    let r = s.resolve()?;
    let spec = &r.spec;
    let n = spec.n();
    let mut a = Audit { checks: Vec::new(), skipped: Vec::new() };
    let trajs = integrate_all(&r, &s.integrator)?;
    report_warnings(&trajs);

    let pc = positive_correlation_audit(spec, 500, s.seed)?;
    a.push(
        "positive_correlation",
        (pc.min_gap + PC_TOL).min(PC_SPEED_TOL - pc.max_speed_when_uncorrelated),
        serde_json::to_value(&pc).expect("serializable"),
    );

    let nash = enumerate_nash(&spec.game, 1e-10);
    match (&nash, spec.metric.extendability()) {
        (Err(e), _) => a.skip("rest_points_match_nash", e.to_string()),
        (Ok(_), Extendability::Neither) => a.skip("rest_points_match_nash", "metric extends neither continuously nor with full rank"),
        (Ok(nash), ext) => {
            let candidates = enumerate_restricted_equilibria(&spec.game, 1e-10)?;
            let mut margin = f64::INFINITY;
            let mut rest = Vec::new();
            for x in &candidates.points {
                let speed = spec.field(x)?.norm2();
                let expected_rest = ext == Extendability::MinimalRank || nash.contains(x, 1e-9);
                margin = margin.min(if expected_rest { REST_TOL - speed } else { speed - REST_TOL });
                if speed < REST_TOL {
                    rest.push(x.coords().to_vec());
                }
            }
            let nash_pts: Vec<_> = nash.points.iter().map(|p| p.coords().to_vec()).collect();
            a.push(
                "rest_points_match_nash",
                margin,
                serde_json::json!({
                    "rest_points": rest,
                    "nash_equilibria": nash_pts,
                    "degenerate_supports": candidates.degenerate_supports,
                    "extendability": ext,
                }),
            );
        }
    }

    let class = classify_contractive(&spec.game, AUDIT_SAMPLES);
    let x_star = match &nash {
        Ok(set) if set.points.len() == 1 => Some(set.points[0].clone()),
        _ => s.rest_point.as_ref().map(|_| r.target.clone()),
    };
    match (r.hp, class.class, &x_star) {
        (None, ..) => a.skip("bregman_monotone", "metric has no Hessian potential"),
        (_, Contractivity::None, _) => a.skip("bregman_monotone", "game is not contractive"),
        (_, _, None) => a.skip("bregman_monotone", "no unique equilibrium and no rest_point given"),
        (Some(hp), c, Some(xs)) => {
            let mut max_increase: f64 = 0.0;
            let mut max_drift: f64 = 0.0;
            let mut used = 0;
            for t in trajs.iter().filter(|t| xs.support_within(&t.states[0])) {
                let m = monitor(t, spec, crate::analysis::MonitorKind::BregmanTo(xs.clone()))?;
                let inc = m.values.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
                max_increase = max_increase.max(inc);
                max_drift = max_drift.max(m.max_drift());
                used += 1;
            }
            if used == 0 {
                a.skip("bregman_monotone", "no initial condition lies in the domain of the equilibrium");
            } else {
                a.push(
                    "bregman_monotone",
                    MONOTONE_TOL - max_increase,
                    serde_json::json!({
                        "equilibrium": xs.coords(),
                        "potential_p": hp.p(),
                        "contractivity": c,
                        "trajectories": used,
                        "max_step_increase": max_increase,
                    }),
                );
                if c == Contractivity::Conservative {
                    a.push(
                        "conservation_drift",
                        CONSERVATION_TOL - max_drift,
                        serde_json::json!({ "max_drift": max_drift, "threshold": CONSERVATION_TOL, "trajectories": used }),
                    );
                } else {
                    a.skip("conservation_drift", "game is not conservative");
                }
            }
        }
    }
    if !a.checks.iter().any(|c| c.name == "conservation_drift") && !a.skipped.iter().any(|c| c.name == "conservation_drift") {
        a.skip("conservation_drift", "needs a Hessian potential and a unique equilibrium");
    }

    if spec.game.potential().is_some() {
        let mut max_decrease: f64 = 0.0;
        for t in &trajs {
            max_decrease = max_decrease.max(monitor(t, spec, MonitorKind::PotentialF)?.max_decrease());
        }
        a.push(
            "potential_monotone",
            MONOTONE_TOL - max_decrease,
            serde_json::json!({ "max_step_decrease": max_decrease, "trajectories": trajs.len() }),
        );
    } else {
        a.skip("potential_monotone", "game has no potential");
    }

    let samples = interior_samples(n, s.seed);
    let mut form_res: f64 = 0.0;
    let mut hop_res: f64 = 0.0;
    let mut hop_pinv: f64 = 0.0;
    for x in &samples {
        let v = vector_field(spec, x)?;
        let c = vector_field_coords(spec, x)?;
        let nrm = vector_field_normalized(spec, x)?;
        let total: f64 = spec.metric.normal_vector(x).iter().sum();
        let scaled: Vec<f64> = nrm.coords().iter().map(|z| z / total).collect();
        form_res = form_res.max(max_abs_diff(v.coords(), c.coords())).max(max_abs_diff(v.coords(), &scaled));
        let h = vector_field_hopkins(spec, x)?;
        hop_res = hop_res.max(max_abs_diff(v.coords(), h.closed_form.coords()));
        hop_pinv = hop_pinv.max(h.deviation);
    }
    a.push(
        "form_equivalence",
        FORM_TOL - form_res,
        serde_json::json!({ "max_residual": form_res, "samples": samples.len() }),
    );
    a.push(
        "hopkins_residual",
        FORM_TOL - hop_res.max(hop_pinv),
        serde_json::json!({ "field_residual": hop_res, "pseudoinverse_residual": hop_pinv, "samples": samples.len() }),
    );

    let diagonal = spec.metric.sharp_diagonal(samples[0].coords()).is_some();
    if spec.game.matrix().is_none() {
        a.skip("protocol_equivalence", "needs a matching game");
    } else if !diagonal {
        a.skip("protocol_equivalence", "needs a diagonal metric");
    } else {
        let mut res = serde_json::Map::new();
        let mut worst: f64 = 0.0;
        for (name, kind) in [
            ("payoff_attraction", ProtocolKind::PayoffAttraction),
            ("payoff_aversion", ProtocolKind::PayoffAversion),
            ("pairwise_comparison", ProtocolKind::PairwiseComparison),
        ] {
            let protocol = RevisionProtocol::new(kind, spec.metric.clone());
            let mut r: f64 = 0.0;
            for x in &samples {
                let m = mean_dynamics_shifted(&protocol, &spec.game, x)?;
                r = r.max(max_abs_diff(m.field.coords(), vector_field_normalized(spec, x)?.coords()));
            }
            worst = worst.max(r);
            res.insert(name.into(), serde_json::json!(r));
        }
        a.push("protocol_equivalence", PROTOCOL_TOL - worst, serde_json::Value::Object(res));
    }

    match r.hp {
        Some(hp) if hp.steep() => match r.initial.iter().find(|x| x.is_interior()) {
            Some(x0) => {
                let cfg = IntegratorConfig {
                    t_end: s.integrator.t_end.min(RL_HORIZON).max(s.integrator.step),
                    parametrization: Parametrization::Native,
                    ..s.integrator.clone()
                };
                let run = integrate_rl(&hp, &spec.game, &Covector(hp.dh(x0.coords())), &cfg)?;
                let flow = integrate(spec, x0, &cfg)?;
                let gap = run
                    .induced
                    .states
                    .iter()
                    .zip(&flow.states)
                    .map(|(p, q)| max_abs_diff(p.coords(), q.coords()))
                    .fold(0.0, f64::max);
                a.push(
                    "rl_equivalence",
                    RL_TOL - gap,
                    serde_json::json!({ "sup_gap": gap, "horizon": cfg.t_end, "start": x0.coords() }),
                );
            }
            None => a.skip("rl_equivalence", "no interior initial condition"),
        },
        _ => a.skip("rl_equivalence", "metric has no steep Hessian potential"),
    }

    Ok(AuditReport { schema_version: SCHEMA_VERSION, scenario_hash: s.hash(), checks: a.checks, skipped: a.skipped })
}

pub fn cmd_audit(s: &Scenario) -> Result<Vec<PathBuf>, CliError> {
    let report = audit(s)?;
    let path = out_path(s, &s.outputs.report)?;
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    fs::write(&path, text)?;
    Ok(vec![path])
}
