//! Population states, tangent vectors and covectors on the standard simplex.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coordinates at or below this value are treated as structural zeros.
pub const DEFAULT_SUPPORT_TOL: f64 = 1e-12;

/// Tolerance for membership in tangent spaces and cones.
pub const TANGENT_TOL: f64 = 1e-10;

/// A population state: nonnegative coordinates with unit mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexPoint {
    coords: Vec<f64>,
    #[serde(default = "default_support_tol")]
    support_tol: f64,
}

fn default_support_tol() -> f64 {
    DEFAULT_SUPPORT_TOL
}

impl SimplexPoint {
    /// Validates, snaps coordinates below `DEFAULT_SUPPORT_TOL` to zero and
    /// renormalizes.
    ///
    /// Input must already be a simplex point up to `1e-9` in every
    /// coordinate and in total mass.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        Self::with_tol(coords, DEFAULT_SUPPORT_TOL)
    }

    pub fn with_tol(mut coords: Vec<f64>, support_tol: f64) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidArgument("a simplex point needs at least one coordinate".into()));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("non-finite coordinate".into()));
        }
        if let Some(c) = coords.iter().find(|c| **c < -1e-9) {
            return Err(Error::InvalidArgument(format!("negative coordinate {c}")));
        }
        let total: f64 = coords.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("coordinates sum to {total}, not 1")));
        }
        snap_and_normalize(&mut coords, support_tol);
        Ok(SimplexPoint { coords, support_tol })
    }

    /// Like [`SimplexPoint::new`] but rescales positive mass of any size.
    pub fn from_weights(mut weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) || total <= 0.0 {
            return Err(Error::InvalidArgument("weights must be nonnegative with positive mass".into()));
        }
        weights.iter_mut().for_each(|w| *w /= total);
        Self::new(weights)
    }

    pub(crate) fn from_raw_unchecked(mut coords: Vec<f64>, support_tol: f64) -> Self {
        snap_and_normalize(&mut coords, support_tol);
        SimplexPoint { coords, support_tol }
    }

    pub fn vertex(n: usize, alpha: usize) -> Self {
        let mut c = vec![0.0; n];
        c[alpha] = 1.0;
        SimplexPoint { coords: c, support_tol: DEFAULT_SUPPORT_TOL }
    }

    pub fn barycenter(n: usize) -> Self {
        SimplexPoint { coords: vec![1.0 / n as f64; n], support_tol: DEFAULT_SUPPORT_TOL }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn support_tol(&self) -> f64 {
        self.support_tol
    }

    pub fn in_support(&self, alpha: usize) -> bool {
        self.coords[alpha] > self.support_tol
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&a| self.in_support(a)).collect()
    }

    pub fn support_mask(&self) -> Vec<bool> {
        (0..self.dim()).map(|a| self.in_support(a)).collect()
    }

    pub fn is_interior(&self) -> bool {
        (0..self.dim()).all(|a| self.in_support(a))
    }

    /// `supp(self) ⊆ supp(other)`.
    pub fn support_within(&self, other: &SimplexPoint) -> bool {
        (0..self.dim()).all(|a| !self.in_support(a) || other.in_support(a))
    }

    pub fn distance(&self, other: &SimplexPoint) -> f64 {
        crate::numerics::norm2(&crate::numerics::sub(&self.coords, &other.coords))
    }
}

fn snap_and_normalize(coords: &mut [f64], tol: f64) {
    for c in coords.iter_mut() {
        if *c <= tol {
            *c = 0.0;
        }
    }
    let total: f64 = coords.iter().sum();
    if total > 0.0 {
        coords.iter_mut().for_each(|c| *c /= total);
    }
}

/// A zero-sum displacement.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TangentVector {
    coords: Vec<f64>,
}

impl TangentVector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        let s: f64 = coords.iter().sum();
        let scale = coords.iter().fold(1.0_f64, |m, c| m.max(c.abs()));
        if s.abs() > TANGENT_TOL * scale {
            return Err(Error::InvalidArgument(format!("tangent vector sums to {s}")));
        }
        Ok(TangentVector { coords })
    }

    pub(crate) fn from_raw(coords: Vec<f64>) -> Self {
        TangentVector { coords }
    }

    pub fn zeros(n: usize) -> Self {
        TangentVector { coords: vec![0.0; n] }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn norm2(&self) -> f64 {
        crate::numerics::norm2(&self.coords)
    }
}

/// A linear functional on displacements: payoffs, scores and the like.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Covector(pub Vec<f64>);

impl Covector {
    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// `⟨ω, w⟩ = Σ ω_α w_α`.
    pub fn pair(&self, w: &[f64]) -> f64 {
        crate::numerics::dot(&self.0, w)
    }

    pub fn shifted(&self, a: f64, b: f64) -> Covector {
        Covector(self.0.iter().map(|v| a + b * v).collect())
    }
}

fn check_dims(x: &SimplexPoint, z: &[f64]) -> Result<()> {
    if x.dim() != z.len() {
        return Err(Error::DimensionMismatch { expected: x.dim(), got: z.len() });
    }
    Ok(())
}

/// Membership in the tangent cone: zero mass, and no negative component at
/// an unused strategy.
pub fn in_tangent_cone(x: &SimplexPoint, z: &[f64]) -> Result<bool> {
    check_dims(x, z)?;
    let s: f64 = z.iter().sum();
    Ok(s.abs() <= TANGENT_TOL
        && (0..x.dim()).all(|a| x.in_support(a) || z[a] >= -TANGENT_TOL))
}

/// Membership in the tangent space of the face spanned by `supp(x)`.
pub fn in_tangent_space(x: &SimplexPoint, z: &[f64]) -> Result<bool> {
    check_dims(x, z)?;
    let s: f64 = z.iter().sum();
    Ok(s.abs() <= TANGENT_TOL && (0..x.dim()).all(|a| x.in_support(a) || z[a].abs() <= TANGENT_TOL))
}

/// Euclidean projection of an arbitrary vector onto the simplex
/// (sort-and-threshold).
pub fn euclid_project_simplex(p: &[f64]) -> Result<SimplexPoint> {
    if p.is_empty() || p.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("projection input must be finite and nonempty".into()));
    }
    let mut u = p.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut tau = 0.0;
    for (k, uk) in u.iter().enumerate() {
        cum += uk;
        let t = (cum - 1.0) / (k + 1) as f64;
        if uk - t > 0.0 {
            tau = t;
        }
    }
    let coords = p.iter().map(|v| (v - tau).max(0.0)).collect();
    Ok(SimplexPoint::from_raw_unchecked(coords, DEFAULT_SUPPORT_TOL))
}

/// Uniform sample from the simplex (flat Dirichlet).
pub fn sample_uniform<R: Rng + ?Sized>(rng: &mut R, n: usize) -> SimplexPoint {
    loop {
        let w: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
        if let Ok(p) = SimplexPoint::from_weights(w) {
            return p;
        }
    }
}

/// Interior sample kept at least `margin / n` away from every face.
pub fn sample_interior<R: Rng + ?Sized>(rng: &mut R, n: usize, margin: f64) -> SimplexPoint {
    let u = sample_uniform(rng, n);
    let c = u.coords().iter().map(|v| (1.0 - margin) * v + margin / n as f64).collect();
    SimplexPoint::from_raw_unchecked(c, DEFAULT_SUPPORT_TOL)
}

/// Sample from the relative interior of a random face (possibly the whole
/// simplex or a vertex).
pub fn sample_face<R: Rng + ?Sized>(rng: &mut R, n: usize) -> SimplexPoint {
    loop {
        let mask: Vec<bool> = (0..n).map(|_| rng.random_bool(0.6)).collect();
        if !mask.iter().any(|m| *m) {
            continue;
        }
        let w: Vec<f64> = mask
            .iter()
            .map(|&m| if m { 0.02 - (1.0 - rng.random::<f64>()).ln() } else { 0.0 })
            .collect();
        if let Ok(p) = SimplexPoint::from_weights(w) {
            return p;
        }
    }
}
