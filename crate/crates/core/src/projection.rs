//! Metric projection `Π_x` onto the admissible directions at a state.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::MetricField;
use crate::numerics::{solve_linear, LinearSolution, Matrix, SymMatrix};
use crate::simplex::{SimplexPoint, TangentVector};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectionResult {
    pub vector: TangentVector,
    pub active_support: Vec<usize>,
    pub kkt_residual: f64,
}

const MAX_FREE_COORDS: usize = 20;
const TIE_TOL: f64 = 1e-12;
const OFF_SUPPORT_TOL: f64 = 1e-10;

fn inf_norm(w: &[f64]) -> f64 {
    w.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// `w − (Σw / Σn) n`: projection onto zero-sum vectors along the normal.
///
/// Valid at interior states and at boundary states of metrics whose `g♯`
/// vanishes off the support; in the latter case `w` must vanish there too.
pub fn project_interior(g: &MetricField, x: &SimplexPoint, w: &[f64]) -> Result<ProjectionResult> {
    let n = x.dim();
    if w.len() != n || g.n() != n {
        return Err(Error::DimensionMismatch { expected: n, got: w.len() });
    }
    let scale = inf_norm(w).max(1.0);
    if !x.is_interior() && (0..n).any(|a| !x.in_support(a) && w[a].abs() > OFF_SUPPORT_TOL * scale) {
        return Err(Error::OutsideDomain);
    }
    let nx = g.normal_vector(x);
    let sn: f64 = nx.iter().sum();
    if !(sn > 0.0) {
        return Err(Error::EvaluationFailure("normal vector has nonpositive mass".into()));
    }
    let lambda = w.iter().sum::<f64>() / sn;
    let mut z: Vec<f64> = w.iter().zip(&nx).map(|(a, b)| a - lambda * b).collect();
    for a in 0..n {
        if !x.in_support(a) {
            z[a] = 0.0;
        }
    }
    let residual = z.iter().sum::<f64>().abs() * lambda.abs().max(1.0) / scale;
    Ok(ProjectionResult { vector: TangentVector::from_raw(z), active_support: x.support(), kkt_residual: residual })
}

struct Candidate {
    z: Vec<f64>,
    dist: f64,
    support: Vec<usize>,
}

/// Exact minimizer of `‖w − z‖ₓ` over the tangent cone at a boundary state of a
/// full-rank metric, by enumeration of the supports containing `supp(x)`.
pub fn project_cone(g: &MetricField, x: &SimplexPoint, w: &[f64]) -> Result<ProjectionResult> {
    let n = x.dim();
    if w.len() != n || g.n() != n {
        return Err(Error::DimensionMismatch { expected: n, got: w.len() });
    }
    if x.is_interior() {
        return project_interior(g, x, w);
    }
    let base = x.support();
    let free: Vec<usize> = (0..n).filter(|a| !x.in_support(*a)).collect();
    if free.len() > MAX_FREE_COORDS {
        return Err(Error::DimensionalityLimit(free.len()));
    }
    let m = g.metric_tensor_at(x.coords())?;
    let diag = g.sharp_diagonal(x.coords());
    let mw = m.mul_vec(w);
    let scale = inf_norm(w).max(1.0);

    let mut best: Option<Candidate> = None;
    for mask in 0u32..(1u32 << free.len()) {
        let mut support = base.clone();
        support.extend(free.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, a)| *a));
        support.sort_unstable();
        let Some(mut z) = subspace_projection(&m, diag.as_deref(), &mw, w, &support) else {
            continue;
        };
        if free.iter().any(|&a| z[a] < -TIE_TOL * scale) {
            continue;
        }
        for &a in &free {
            z[a] = z[a].max(0.0);
        }
        let diff: Vec<f64> = w.iter().zip(&z).map(|(a, b)| a - b).collect();
        let dist = m.bilinear(&diff, &diff);
        let better = match &best {
            None => true,
            Some(b) => {
                let tol = TIE_TOL * b.dist.abs().max(scale * scale);
                dist < b.dist - tol || (dist <= b.dist + tol && support.len() > b.support.len())
            }
        };
        if better {
            best = Some(Candidate { z, dist, support });
        }
    }
    let best = best.ok_or_else(|| Error::EvaluationFailure("no feasible support in cone projection".into()))?;
    let residual = cone_residual(&m, x, w, &best.z);
    Ok(ProjectionResult { vector: TangentVector::from_raw(best.z), active_support: best.support, kkt_residual: residual })
}

/// Projection of `w` onto `{Σz = 0, z = 0 off S}` under the inner product `M`.
fn subspace_projection(m: &SymMatrix, diag: Option<&[f64]>, mw: &[f64], w: &[f64], s: &[usize]) -> Option<Vec<f64>> {
    let n = w.len();
    let k = s.len();
    // y = G_S (Mw)_S and q = G_S 𝟏 with G_S = (M_SS)⁻¹
    let (y, q): (Vec<f64>, Vec<f64>) = match diag {
        Some(d) => (s.iter().map(|&a| d[a] * mw[a]).collect(), s.iter().map(|&a| d[a]).collect()),
        None => {
            let sub = m.restrict(s);
            let rows: Vec<Vec<f64>> = (0..k).map(|i| sub.row(i).to_vec()).collect();
            let a = Matrix::from_rows(&rows).ok()?;
            let rhs: Vec<f64> = s.iter().map(|&i| mw[i]).collect();
            let LinearSolution::Unique(y) = solve_linear(&a, &rhs, 1e-14) else {
                return None;
            };
            let LinearSolution::Unique(q) = solve_linear(&a, &vec![1.0; k], 1e-14) else {
                return None;
            };
            (y, q)
        }
    };
    let sq: f64 = q.iter().sum();
    if !(sq > 0.0) {
        return None;
    }
    let lambda = -y.iter().sum::<f64>() / sq;
    let mut z = vec![0.0; n];
    for (i, &a) in s.iter().enumerate() {
        z[a] = y[i] + lambda * q[i];
    }
    Some(z)
}

/// Scaled violation of the Moreau conditions for a cone projection: the
/// residual covector `M(w − z)` must be constant on `supp(x)`, no larger off
/// it, and orthogonal to `z`.
fn cone_residual(m: &SymMatrix, x: &SimplexPoint, w: &[f64], z: &[f64]) -> f64 {
    let n = w.len();
    let diff: Vec<f64> = w.iter().zip(z).map(|(a, b)| a - b).collect();
    let r = m.mul_vec(&diff);
    let supp = x.support();
    let j0 = supp[0];
    let mut worst = 0.0_f64;
    for a in 0..n {
        let d = r[a] - r[j0];
        worst = worst.max(if x.in_support(a) { d.abs() } else { d.max(0.0) });
    }
    worst = worst.max(crate::numerics::dot(&r, z).abs());
    let scale = inf_norm(&m.mul_vec(w)).max(inf_norm(&r)).max(1.0);
    worst / scale
}

/// Projection at any state: the normal-vector formula wherever the metric
/// restricts motion to the support, and the cone projection at boundary
/// states of full-rank metrics.
pub fn project(g: &MetricField, x: &SimplexPoint, w: &[f64]) -> Result<ProjectionResult> {
    if x.is_interior() || !g.is_full_rank() {
        project_interior(g, x, w)
    } else {
        project_cone(g, x, w)
    }
}

/// Euclidean tangent-cone projection in closed form: subtract the average of
/// `w` over the superset of `supp(x)` that maximizes that average.
pub fn euclid_formula_projection(x: &SimplexPoint, w: &[f64]) -> Result<Vec<f64>> {
    let n = x.dim();
    if w.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: w.len() });
    }
    let mut set: Vec<usize> = x.support();
    let mut total: f64 = set.iter().map(|&a| w[a]).sum();
    let mut rest: Vec<usize> = (0..n).filter(|a| !x.in_support(*a)).collect();
    rest.sort_by(|a, b| w[*b].total_cmp(&w[*a]));
    for a in rest {
        let avg = total / set.len() as f64;
        if w[a] >= avg {
            set.push(a);
            total += w[a];
        } else {
            break;
        }
    }
    let avg = total / set.len() as f64;
    let mut z = vec![0.0; n];
    for &a in &set {
        z[a] = w[a] - avg;
    }
    Ok(z)
}
