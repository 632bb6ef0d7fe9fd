//! The vector field `V(x) = Π_x(v♯(x))` in its equivalent forms, revision
//! protocol mean dynamics and the score-space reinforcement learning field.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::games::PopulationGame;
use crate::hessian::HessianPotential;
use crate::metrics::{Extendability, MetricField};
use crate::numerics::{self, pseudoinverse, zero_sum_projector, SymMatrix, DEFAULT_RANK_TOL};
use crate::projection::{project, ProjectionResult};
use crate::simplex::{Covector, SimplexPoint, TangentVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Form {
    #[default]
    Projected,
    Coords,
    Normalized,
    Hopkins,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Continuous,
    Discontinuous,
}

#[derive(Debug, Clone)]
pub struct DynamicsSpec {
    pub game: PopulationGame,
    pub metric: MetricField,
    pub form: Form,
}

impl DynamicsSpec {
    pub fn new(game: PopulationGame, metric: MetricField) -> Result<Self> {
        if game.n() != metric.n() {
            return Err(Error::DimensionMismatch { expected: game.n(), got: metric.n() });
        }
        Ok(DynamicsSpec { game, metric, form: Form::Projected })
    }

    pub fn with_form(mut self, form: Form) -> Self {
        self.form = form;
        self
    }

    pub fn n(&self) -> usize {
        self.game.n()
    }

    pub fn regime(&self) -> Regime {
        match self.metric.extendability() {
            Extendability::FullRank => Regime::Discontinuous,
            Extendability::MinimalRank | Extendability::Neither => Regime::Continuous,
        }
    }

    /// `v♯(x) = g♯(x) v(x)`.
    pub fn sharp_payoff(&self, x: &SimplexPoint) -> Result<Vec<f64>> {
        let v = self.game.payoff(x)?;
        Ok(self.metric.sharp(x, &v))
    }

    /// The field in the configured form.
    pub fn field(&self, x: &SimplexPoint) -> Result<TangentVector> {
        match self.form {
            Form::Projected => vector_field(self, x),
            Form::Coords => vector_field_coords(self, x),
            Form::Normalized => vector_field_normalized(self, x),
            Form::Hopkins if x.is_interior() => Ok(vector_field_hopkins(self, x)?.closed_form),
            Form::Hopkins => vector_field(self, x),
        }
    }

    /// The field together with projection diagnostics.
    pub fn projection(&self, x: &SimplexPoint) -> Result<ProjectionResult> {
        project(&self.metric, x, &self.sharp_payoff(x)?)
    }

    /// `‖V(x)‖ₓ`.
    pub fn speed(&self, x: &SimplexPoint, v: &TangentVector) -> Result<f64> {
        Ok(self.metric.norm_sq(x, v.coords())?.max(0.0).sqrt())
    }
}

/// `V(x) = Π_x(v♯(x))`.
pub fn vector_field(spec: &DynamicsSpec, x: &SimplexPoint) -> Result<TangentVector> {
    Ok(spec.projection(x)?.vector)
}

/// `V_α = v♯_α − (Σv♯ / Σn) n_α`, with the cone projection at boundary states
/// of full-rank metrics.
pub fn vector_field_coords(spec: &DynamicsSpec, x: &SimplexPoint) -> Result<TangentVector> {
    if !x.is_interior() && spec.metric.is_full_rank() {
        return vector_field(spec, x);
    }
    let vs = spec.sharp_payoff(x)?;
    let nx = spec.metric.normal_vector(x);
    let ratio = vs.iter().sum::<f64>() / nx.iter().sum::<f64>();
    Ok(TangentVector::from_raw(vs.iter().zip(&nx).map(|(a, b)| a - ratio * b).collect()))
}

/// `V_α Σn = v♯_α Σn − n_α Σv♯`.
pub fn vector_field_normalized(spec: &DynamicsSpec, x: &SimplexPoint) -> Result<TangentVector> {
    let nx = spec.metric.normal_vector(x);
    let sn: f64 = nx.iter().sum();
    if !x.is_interior() && spec.metric.is_full_rank() {
        let v = vector_field(spec, x)?;
        return Ok(TangentVector::from_raw(v.coords().iter().map(|c| c * sn).collect()));
    }
    let vs = spec.sharp_payoff(x)?;
    let sv: f64 = vs.iter().sum();
    Ok(TangentVector::from_raw(vs.iter().zip(&nx).map(|(a, b)| a * sn - b * sv).collect()))
}

/// The pseudoinverse form evaluated both ways.
#[derive(Debug, Clone)]
pub struct HopkinsField {
    /// `(g♯ − g♯𝟏𝟏ᵀg♯ / 𝟏ᵀg♯𝟏) v`.
    pub closed_form: TangentVector,
    /// `(Φ g Φ)⁺ v` via a numerical pseudoinverse.
    pub numeric: TangentVector,
    pub deviation: f64,
}

/// `g♯ − g♯𝟏𝟏ᵀg♯ / 𝟏ᵀg♯𝟏` for a positive-definite `g♯`.
pub fn hopkins_matrix(sharp: &SymMatrix) -> SymMatrix {
    let n = sharp.dim();
    let u: Vec<f64> = (0..n).map(|a| sharp.row(a).iter().sum()).collect();
    let s: f64 = u.iter().sum();
    let mut data = Vec::with_capacity(n * n);
    for a in 0..n {
        for b in 0..n {
            data.push(sharp.get(a, b) - u[a] * u[b] / s);
        }
    }
    SymMatrix::from_row_major(n, data).expect("symmetric by construction")
}

/// `(Φ H Φ)⁺` with `Φ = I − 𝟏𝟏ᵀ/n`.
pub fn hopkins_matrix_numeric(h: &SymMatrix) -> SymMatrix {
    let phi = zero_sum_projector(h.dim());
    let m = h.congruence(&phi);
    pseudoinverse(&m, DEFAULT_RANK_TOL)
}

pub fn vector_field_hopkins(spec: &DynamicsSpec, x: &SimplexPoint) -> Result<HopkinsField> {
    if !x.is_interior() {
        return Err(Error::NotInterior);
    }
    let v = spec.game.payoff(x)?;
    let sharp = spec.metric.sharp_tensor(x);
    let closed = hopkins_matrix(&sharp).mul_vec(v.coords());
    let g = spec.metric.metric_tensor_at(x.coords())?;
    let numeric = hopkins_matrix_numeric(&g).mul_vec(v.coords());
    let deviation = numerics::max_abs_diff(&closed, &numeric);
    Ok(HopkinsField {
        closed_form: TangentVector::from_raw(closed),
        numeric: TangentVector::from_raw(numeric),
        deviation,
    })
}

pub type SwitchRate = Arc<dyn Fn(&[f64], &[f64], usize, usize) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum ProtocolKind {
    /// `s_{αβ} = n_α (π♯)_β`; needs nonnegative payoffs.
    PayoffAttraction,
    /// `s_{αβ} = −(π♯)_α n_β`; needs nonpositive payoffs.
    PayoffAversion,
    /// `s_{αβ} = g♯_{αα} g♯_{ββ} [π_β − π_α]₊`; diagonal metrics.
    PairwiseComparison,
    /// Arbitrary switch rates `s(x, π, α, β)`.
    Custom(SwitchRate),
}

impl fmt::Debug for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProtocolKind::PayoffAttraction => f.write_str("PayoffAttraction"),
            ProtocolKind::PayoffAversion => f.write_str("PayoffAversion"),
            ProtocolKind::PairwiseComparison => f.write_str("PairwiseComparison"),
            ProtocolKind::Custom(_) => f.write_str("Custom"),
        }
    }
}

/// A revision protocol built on a metric.
#[derive(Debug, Clone)]
pub struct RevisionProtocol {
    pub kind: ProtocolKind,
    pub metric: MetricField,
}

impl RevisionProtocol {
    pub fn new(kind: ProtocolKind, metric: MetricField) -> Self {
        RevisionProtocol { kind, metric }
    }

    /// All switch rates `s_{αβ}(x, π)` as a row-major matrix.
    pub fn switch_rates(&self, x: &[f64], pi: &[f64]) -> Result<Vec<Vec<f64>>> {
        let n = x.len();
        let mut s = vec![vec![0.0; n]; n];
        match &self.kind {
            ProtocolKind::PayoffAttraction | ProtocolKind::PayoffAversion => {
                let nx = self.metric.normal_vector_at(x);
                let ps = self.metric.sharp_at(x, pi);
                let attraction = matches!(self.kind, ProtocolKind::PayoffAttraction);
                for a in 0..n {
                    for b in 0..n {
                        s[a][b] = if attraction { nx[a] * ps[b] } else { -ps[a] * nx[b] };
                    }
                }
            }
            ProtocolKind::PairwiseComparison => {
                let d = self.metric.sharp_diagonal(x).ok_or_else(|| {
                    Error::InvalidArgument("pairwise comparison protocol needs a diagonal metric".into())
                })?;
                for a in 0..n {
                    for b in 0..n {
                        s[a][b] = d[a] * d[b] * (pi[b] - pi[a]).max(0.0);
                    }
                }
            }
            ProtocolKind::Custom(rate) => {
                for a in 0..n {
                    for b in 0..n {
                        s[a][b] = rate(x, pi, a, b);
                    }
                }
            }
        }
        Ok(s)
    }

    fn check_sign(&self, pi: &[f64]) -> Result<()> {
        match self.kind {
            ProtocolKind::PayoffAttraction if pi.iter().any(|p| *p < 0.0) => {
                Err(Error::SignViolation("payoff attraction needs nonnegative payoffs".into()))
            }
            ProtocolKind::PayoffAversion if pi.iter().any(|p| *p > 0.0) => {
                Err(Error::SignViolation("payoff aversion needs nonpositive payoffs".into()))
            }
            _ => Ok(()),
        }
    }

    /// Constant payoff shift that puts every payoff of `game` in the sign
    /// domain of the protocol.
    pub fn payoff_shift(&self, game: &PopulationGame, pi: &[f64]) -> f64 {
        let (lo, hi) = match game.matrix() {
            Some(a) => {
                let rows = a.to_rows();
                let all = rows.iter().flatten();
                (all.clone().cloned().fold(f64::INFINITY, f64::min), all.cloned().fold(f64::NEG_INFINITY, f64::max))
            }
            None => (
                pi.iter().cloned().fold(f64::INFINITY, f64::min),
                pi.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            ),
        };
        match self.kind {
            ProtocolKind::PayoffAttraction => (-lo).max(0.0),
            ProtocolKind::PayoffAversion => (-hi).min(0.0),
            _ => 0.0,
        }
    }
}

/// `ẋ_α = Σ_β (s_{βα} − s_{αβ})` at payoffs `π`.
pub fn mean_dynamics_at(protocol: &RevisionProtocol, x: &[f64], pi: &[f64]) -> Result<TangentVector> {
    protocol.check_sign(pi)?;
    let s = protocol.switch_rates(x, pi)?;
    let n = x.len();
    Ok(TangentVector::from_raw((0..n).map(|a| (0..n).map(|b| s[b][a] - s[a][b]).sum()).collect()))
}

pub fn mean_dynamics(protocol: &RevisionProtocol, game: &PopulationGame, x: &SimplexPoint) -> Result<TangentVector> {
    let pi = game.payoff(x)?;
    mean_dynamics_at(protocol, x.coords(), pi.coords())
}

/// Mean dynamics after shifting payoffs into the protocol's sign domain.
#[derive(Debug, Clone)]
pub struct ShiftedMeanDynamics {
    pub field: TangentVector,
    pub shift: f64,
}

pub fn mean_dynamics_shifted(
    protocol: &RevisionProtocol,
    game: &PopulationGame,
    x: &SimplexPoint,
) -> Result<ShiftedMeanDynamics> {
    let pi = game.payoff(x)?;
    let shift = protocol.payoff_shift(game, pi.coords());
    let shifted = pi.shifted(shift, 1.0);
    Ok(ShiftedMeanDynamics { field: mean_dynamics_at(protocol, x.coords(), shifted.coords())?, shift })
}

/// `‖Π_x((a𝟏 + b v)♯) − b Π_x(v♯)‖ₓ`.
pub fn payoff_transform_check(spec: &DynamicsSpec, x: &SimplexPoint, a: f64, b: f64) -> Result<f64> {
    if !(b > 0.0) {
        return Err(Error::InvalidArgument("payoff scale must be positive".into()));
    }
    let v = spec.game.payoff(x)?;
    let base = project(&spec.metric, x, &spec.metric.sharp(x, &v))?.vector;
    let tv = v.shifted(a, b);
    let moved = project(&spec.metric, x, &spec.metric.sharp(x, &tv))?.vector;
    let diff: Vec<f64> = moved.coords().iter().zip(base.coords()).map(|(m, c)| m - b * c).collect();
    Ok(spec.metric.norm_sq(x, &diff)?.max(0.0).sqrt())
}

/// `ẏ = v(Q(y))` together with the induced state `x = Q(y)`.
pub fn rl_field(hp: &HessianPotential, game: &PopulationGame, y: &Covector) -> Result<(Covector, SimplexPoint)> {
    let x = hp.choice_map(y)?;
    let ydot = game.payoff(&x)?;
    Ok((ydot, x))
}
