//! Population games: payoffs, structural classification and equilibria.

use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numerics::{self, dot, eig_sym, solve_linear, LinearSolution, Matrix};
use crate::simplex::{sample_face, sample_uniform, Covector, SimplexPoint};

pub type PayoffFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A potential `f` with `df = v`.
#[derive(Clone)]
pub struct PotentialSpec {
    pub f: ScalarFn,
    pub df: PayoffFn,
}

impl fmt::Debug for PotentialSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("PotentialSpec { .. }")
    }
}

#[derive(Clone)]
enum Payoff {
    Matching(Matrix),
    BlackBox(PayoffFn),
}

/// A single-population game with `n` strategies.
#[derive(Clone)]
pub struct PopulationGame {
    n: usize,
    name: String,
    payoff: Payoff,
    potential: Option<PotentialSpec>,
}

impl fmt::Debug for PopulationGame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut d = f.debug_struct("PopulationGame");
        d.field("name", &self.name).field("n", &self.n);
        if let Payoff::Matching(a) = &self.payoff {
            d.field("matrix", &a.to_rows());
        }
        d.field("potential", &self.potential.is_some()).finish()
    }
}

impl PopulationGame {
    /// Random matching game with payoffs `v(x) = A x`.
    pub fn matching(a: Matrix) -> Result<Self> {
        if a.rows() == 0 || a.rows() != a.cols() {
            return Err(Error::InvalidArgument("payoff matrix must be square and nonempty".into()));
        }
        if a.max_abs().is_nan() || a.to_rows().iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("payoff matrix has non-finite entries".into()));
        }
        Ok(PopulationGame { n: a.rows(), name: "matching".into(), payoff: Payoff::Matching(a), potential: None })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::matching(Matrix::from_rows(rows)?)
    }

    /// Matching game with a symmetric matrix, carrying the potential `½ xᵀAx`.
    pub fn symmetric_matching(a: Matrix) -> Result<Self> {
        let n = a.rows();
        for i in 0..n {
            for j in 0..n {
                if (a.get(i, j) - a.get(j, i)).abs() > 1e-12 {
                    return Err(Error::InvalidArgument("matrix is not symmetric".into()));
                }
            }
        }
        let g = Self::matching(a.clone())?;
        let af = a.clone();
        let potential = PotentialSpec {
            f: Arc::new(move |x: &[f64]| 0.5 * dot(x, &af.mul_vec(x))),
            df: Arc::new(move |x: &[f64]| a.mul_vec(x)),
        };
        Ok(g.with_potential(potential))
    }

    pub fn black_box<F>(n: usize, payoff: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        PopulationGame { n, name: "custom".into(), payoff: Payoff::BlackBox(Arc::new(payoff)), potential: None }
    }

    pub fn with_potential(mut self, potential: PotentialSpec) -> Self {
        self.potential = Some(potential);
        self
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn matrix(&self) -> Option<&Matrix> {
        match &self.payoff {
            Payoff::Matching(a) => Some(a),
            Payoff::BlackBox(_) => None,
        }
    }

    pub fn potential(&self) -> Option<&PotentialSpec> {
        self.potential.as_ref()
    }

    /// Payoffs at an arbitrary point of `ℝ^n` (games are defined on a
    /// neighbourhood of the simplex).
    pub fn payoff_at(&self, x: &[f64]) -> Result<Covector> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: x.len() });
        }
        let v = match &self.payoff {
            Payoff::Matching(a) => a.mul_vec(x),
            Payoff::BlackBox(f) => f(x),
        };
        if v.len() != self.n {
            return Err(Error::EvaluationFailure(format!("payoff returned {} entries, expected {}", v.len(), self.n)));
        }
        if v.iter().any(|p| !p.is_finite()) {
            return Err(Error::EvaluationFailure("non-finite payoff".into()));
        }
        Ok(Covector(v))
    }

    pub fn payoff(&self, x: &SimplexPoint) -> Result<Covector> {
        self.payoff_at(x.coords())
    }

    /// Potential value, if the game has one.
    pub fn potential_value(&self, x: &[f64]) -> Result<f64> {
        let p = self.potential.as_ref().ok_or(Error::MissingPotential)?;
        Ok((p.f)(x))
    }

    /// Largest payoff advantage of any strategy over the population average;
    /// nonpositive (up to roundoff) exactly at Nash equilibria.
    pub fn nash_gap(&self, x: &SimplexPoint) -> Result<f64> {
        let v = self.payoff(x)?;
        let avg = v.pair(x.coords());
        Ok(v.0.iter().fold(f64::NEG_INFINITY, |m, p| m.max(p - avg)))
    }

    pub fn is_nash(&self, x: &SimplexPoint, tol: f64) -> Result<bool> {
        Ok(self.nash_gap(x)? <= tol)
    }
}

/// Named games used throughout the test and acceptance suites.
pub mod builtin {
    use super::*;

    /// Standard Rock-Paper-Scissors.
    pub fn rps() -> PopulationGame {
        PopulationGame::from_rows(&[
            vec![0.0, -1.0, 1.0],
            vec![1.0, 0.0, -1.0],
            vec![-1.0, 1.0, 0.0],
        ])
        .expect("static matrix")
        .with_name("rps")
    }

    /// RPS with wins worth 2 and losses costing 1.
    pub fn rps_permanent() -> PopulationGame {
        PopulationGame::from_rows(&[
            vec![0.0, -1.0, 2.0],
            vec![2.0, 0.0, -1.0],
            vec![-1.0, 2.0, 0.0],
        ])
        .expect("static matrix")
        .with_name("rps-permanent")
    }

    /// RPS plus a fourth strategy that copies rock and pays 0.1 less.
    pub fn rps_dominated() -> PopulationGame {
        PopulationGame::from_rows(&[
            vec![0.0, -1.0, 1.0, 0.0],
            vec![1.0, 0.0, -1.0, 1.0],
            vec![-1.0, 1.0, 0.0, -1.0],
            vec![-0.1, -1.1, 0.9, -0.1],
        ])
        .expect("static matrix")
        .with_name("rps-dominated")
    }

    /// Two strategies with constant payoffs `v = (1, 0)`.
    pub fn toy() -> PopulationGame {
        let g = PopulationGame::from_rows(&[vec![1.0, 1.0], vec![0.0, 0.0]]).expect("static matrix");
        g.with_potential(PotentialSpec {
            f: Arc::new(|x: &[f64]| x[0]),
            df: Arc::new(|_x: &[f64]| vec![1.0, 0.0]),
        })
        .with_name("toy")
    }

    /// Pure coordination, `A = I`; a potential game.
    pub fn coordination(n: usize) -> PopulationGame {
        PopulationGame::symmetric_matching(Matrix::identity(n)).expect("identity").with_name("coordination")
    }

    /// `A = −I`; strictly contractive with the barycenter as unique equilibrium.
    pub fn contractive(n: usize) -> PopulationGame {
        let mut a = Matrix::identity(n);
        for i in 0..n {
            a.set(i, i, -1.0);
        }
        PopulationGame::symmetric_matching(a).expect("diagonal").with_name("contractive")
    }

    pub fn by_name(name: &str) -> Option<PopulationGame> {
        match name {
            "rps" => Some(rps()),
            "rps-permanent" => Some(rps_permanent()),
            "rps-dominated" => Some(rps_dominated()),
            "toy" => Some(toy()),
            "coordination" => Some(coordination(3)),
            "contractive" => Some(contractive(3)),
            _ => None,
        }
    }

    pub const NAMES: &[&str] = &["rps", "rps-permanent", "rps-dominated", "toy", "coordination", "contractive"];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Contractivity {
    StrictlyContractive,
    Contractive,
    Conservative,
    None,
}

/// Verdict of [`classify_contractive`]; `exact` is false for sampled verdicts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractivityReport {
    pub class: Contractivity,
    pub exact: bool,
}

const CLASS_TOL: f64 = 1e-10;

/// Classifies the monotonicity of a game's payoff field.
///
/// Matching games are classified exactly from the spectrum of the symmetric
/// part restricted to zero-sum vectors; other games by sampling `samples`
/// pairs of states.
pub fn classify_contractive(game: &PopulationGame, samples: usize) -> ContractivityReport {
    if let Some(a) = game.matrix() {
        let n = game.n();
        let sym = a.symmetric_part();
        let basis = numerics::zero_sum_basis(n);
        let k = basis.len();
        if k == 0 {
            return ContractivityReport { class: Contractivity::Conservative, exact: true };
        }
        let mut data = vec![0.0; k * k];
        for i in 0..k {
            let si = sym.mul_vec(&basis[i]);
            for j in 0..k {
                data[i * k + j] = dot(&basis[j], &si);
            }
        }
        let restricted = numerics::SymMatrix::from_row_major(k, data).expect("congruence is symmetric");
        let ev = eig_sym(&restricted).values;
        let scale = sym.max_abs().max(1.0);
        let tol = CLASS_TOL * scale;
        let class = if ev.iter().all(|l| l.abs() <= tol) {
            Contractivity::Conservative
        } else if ev.iter().all(|l| *l < -tol) {
            Contractivity::StrictlyContractive
        } else if ev.iter().all(|l| *l <= tol) {
            Contractivity::Contractive
        } else {
            Contractivity::None
        };
        return ContractivityReport { class, exact: true };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let n = game.n();
    let (mut all_zero, mut all_neg, mut all_nonpos) = (true, true, true);
    for _ in 0..samples.max(1) {
        let x = sample_uniform(&mut rng, n);
        let y = sample_uniform(&mut rng, n);
        let (Ok(vx), Ok(vy)) = (game.payoff(&x), game.payoff(&y)) else {
            continue;
        };
        let dx = numerics::sub(y.coords(), x.coords());
        let q = dot(&numerics::sub(&vy.0, &vx.0), &dx);
        let d2 = dot(&dx, &dx);
        all_zero &= q.abs() <= CLASS_TOL;
        all_neg &= q < -CLASS_TOL * d2.max(1e-12);
        all_nonpos &= q <= CLASS_TOL;
    }
    let class = if all_zero {
        Contractivity::Conservative
    } else if all_neg {
        Contractivity::StrictlyContractive
    } else if all_nonpos {
        Contractivity::Contractive
    } else {
        Contractivity::None
    };
    ContractivityReport { class, exact: false }
}

/// Result of a support enumeration.
#[derive(Debug, Clone, Default)]
pub struct EquilibriumSet {
    pub points: Vec<SimplexPoint>,
    /// Supports whose equal-payoff system is singular but consistent; these
    /// may carry a continuum of equilibria and are reported instead of points.
    pub degenerate_supports: Vec<Vec<usize>>,
}

impl EquilibriumSet {
    pub fn contains(&self, x: &SimplexPoint, tol: f64) -> bool {
        self.points.iter().any(|p| numerics::max_abs_diff(p.coords(), x.coords()) <= tol)
    }
}

const PIVOT_TOL: f64 = 1e-10;
const MAX_ENUMERATION: usize = 12;

fn enumerate_supports(game: &PopulationGame, tol: f64, nash_only: bool) -> Result<EquilibriumSet> {
    let a = game.matrix().ok_or(Error::NotMatching)?;
    let n = game.n();
    if n > MAX_ENUMERATION {
        return Err(Error::InvalidArgument(format!("support enumeration limited to {MAX_ENUMERATION} strategies")));
    }
    let mut out = EquilibriumSet::default();
    for mask in 1u32..(1 << n) {
        let s: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let k = s.len();
        // unknowns: x_S and the common payoff u
        let mut sys = Matrix::zeros(k + 1, k + 1);
        for (r, &i) in s.iter().enumerate() {
            for (c, &j) in s.iter().enumerate() {
                sys.set(r, c, a.get(i, j));
            }
            sys.set(r, k, -1.0);
            sys.set(k, r, 1.0);
        }
        let mut rhs = vec![0.0; k + 1];
        rhs[k] = 1.0;
        let sol = match solve_linear(&sys, &rhs, PIVOT_TOL) {
            LinearSolution::Unique(sol) => sol,
            LinearSolution::Singular { consistent: true } => {
                out.degenerate_supports.push(s);
                continue;
            }
            LinearSolution::Singular { consistent: false } => continue,
        };
        if sol[..k].iter().any(|v| *v <= tol) {
            continue;
        }
        let mut coords = vec![0.0; n];
        for (r, &i) in s.iter().enumerate() {
            coords[i] = sol[r];
        }
        let x = SimplexPoint::from_weights(coords)?;
        if nash_only {
            let v = a.mul_vec(x.coords());
            let u = sol[k];
            if (0..n).any(|b| mask & (1 << b) == 0 && v[b] > u + tol) {
                continue;
            }
        }
        out.points.push(x);
    }
    Ok(out)
}

/// All Nash equilibria of a matching game with isolated supports.
pub fn enumerate_nash(game: &PopulationGame, tol: f64) -> Result<EquilibriumSet> {
    enumerate_supports(game, tol, true)
}

/// All restricted equilibria: states whose used strategies earn equal payoffs.
pub fn enumerate_restricted_equilibria(game: &PopulationGame, tol: f64) -> Result<EquilibriumSet> {
    enumerate_supports(game, tol, false)
}

/// Sampled check of the global evolutionary stability inequality
/// `⟨v(x), x − x*⟩ < 0` for `x ≠ x*`.
pub fn is_gess(game: &PopulationGame, x_star: &SimplexPoint, samples: usize) -> Result<bool> {
    const MARGIN: f64 = 1e-9;
    if !game.is_nash(x_star, 1e-9)? {
        return Ok(false);
    }
    if game.matrix().is_some()
        && classify_contractive(game, 1).class == Contractivity::StrictlyContractive
    {
        return Ok(true);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let n = game.n();
    for i in 0..samples.max(1) {
        let x = if i % 2 == 0 { sample_uniform(&mut rng, n) } else { sample_face(&mut rng, n) };
        let d = numerics::sub(x.coords(), x_star.coords());
        let d2 = dot(&d, &d);
        if d2 < 1e-16 {
            continue;
        }
        if game.payoff(&x)?.pair(&d) > -MARGIN * d2 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Pairs `(dominated, dominator)` of strictly dominated strategies in a
/// matching game (0-based). By linearity it suffices to compare at vertices.
pub fn dominated_pairs(game: &PopulationGame, tol: f64) -> Result<Vec<(usize, usize)>> {
    let a = game.matrix().ok_or(Error::NotMatching)?;
    let n = game.n();
    let mut out = Vec::new();
    for alpha in 0..n {
        for beta in 0..n {
            if alpha == beta {
                continue;
            }
            let gap = (0..n).map(|g| a.get(beta, g) - a.get(alpha, g)).fold(f64::INFINITY, f64::min);
            if gap > tol {
                out.push((alpha, beta));
            }
        }
    }
    Ok(out)
}
