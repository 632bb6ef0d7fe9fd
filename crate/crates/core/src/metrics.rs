//! Metric fields on the simplex, given through their inverse tensor `g♯(x)`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::hessian::HessianPotential;
use crate::numerics::{self, eig_sym, SymMatrix, DEFAULT_RANK_TOL};
use crate::simplex::{Covector, SimplexPoint};

pub type ScalarMap = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type TensorMap = Arc<dyn Fn(&[f64]) -> SymMatrix + Send + Sync>;

/// Boundary behaviour of `g♯`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Extendability {
    MinimalRank,
    FullRank,
    Neither,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Descriptor {
    Euclidean,
    Shahshahani,
    Separable,
    PRep(f64),
    Hessian(HessianPotential),
    Custom,
}

/// Limit of a weight function at `0⁺`, as seen by sampling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ZeroLimit {
    Vanishing,
    Positive,
    Oscillating,
}

/// Weight `φ` of a separable metric `g♯ = diag(φ(x_α))`.
#[derive(Clone)]
pub struct WeightFunction {
    phi: ScalarMap,
    limit: ZeroLimit,
}

impl fmt::Debug for WeightFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WeightFunction").field("limit", &self.limit).finish()
    }
}

impl WeightFunction {
    pub fn new<F>(phi: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let phi: ScalarMap = Arc::new(phi);
        for k in -6..=2 {
            let z = 10f64.powi(k);
            let v = phi(z);
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!("weight must be positive and finite, got φ({z}) = {v}")));
            }
        }
        let limit = Self::sample_limit(&phi);
        Ok(WeightFunction { phi, limit })
    }

    fn sample_limit(phi: &ScalarMap) -> ZeroLimit {
        let at_zero = phi(0.0);
        if !at_zero.is_finite() || at_zero < 0.0 {
            return ZeroLimit::Oscillating;
        }
        // oscillation over two decades close to zero, relative to the value at 1e-1
        const SAMPLES: usize = 4000;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..SAMPLES {
            let z = 10f64.powf(-5.0 + 2.0 * i as f64 / (SAMPLES - 1) as f64);
            let v = phi(z);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let scale = phi(0.1).abs().max(at_zero).max(1e-300);
        if hi - lo > 0.5 * scale + 1e-12 {
            return ZeroLimit::Oscillating;
        }
        if at_zero == 0.0 {
            ZeroLimit::Vanishing
        } else {
            ZeroLimit::Positive
        }
    }

    pub fn eval(&self, z: f64) -> f64 {
        (self.phi)(z)
    }

    pub fn limit_at_zero(&self) -> ZeroLimit {
        self.limit
    }

    pub fn vanishing_at_zero(&self) -> bool {
        self.limit == ZeroLimit::Vanishing
    }
}

#[derive(Clone)]
enum Tensor {
    Diagonal(ScalarMap),
    Dense(TensorMap),
}

/// The field `x ↦ g♯(x)` together with its boundary class.
#[derive(Clone)]
pub struct MetricField {
    n: usize,
    descriptor: Descriptor,
    extendability: Extendability,
    tensor: Tensor,
}

impl fmt::Debug for MetricField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MetricField")
            .field("n", &self.n)
            .field("descriptor", &self.descriptor)
            .field("extendability", &self.extendability)
            .finish()
    }
}

const OFF_DOMAIN_TOL: f64 = 1e-10;

impl MetricField {
    pub fn euclidean(n: usize) -> Self {
        MetricField {
            n,
            descriptor: Descriptor::Euclidean,
            extendability: Extendability::FullRank,
            tensor: Tensor::Diagonal(Arc::new(|_| 1.0)),
        }
    }

    pub fn shahshahani(n: usize) -> Self {
        MetricField {
            n,
            descriptor: Descriptor::Shahshahani,
            extendability: Extendability::MinimalRank,
            tensor: Tensor::Diagonal(Arc::new(|z| z)),
        }
    }

    /// `g♯ = diag(x^p)`: the p-replicator metric.
    pub fn prep(n: usize, p: f64) -> Result<Self> {
        if !(p.is_finite() && p >= 0.0) {
            return Err(Error::InvalidArgument(format!("metric exponent must be finite and >= 0, got {p}")));
        }
        Ok(MetricField {
            n,
            descriptor: Descriptor::PRep(p),
            extendability: if p > 0.0 { Extendability::MinimalRank } else { Extendability::FullRank },
            tensor: Tensor::Diagonal(power_map(p)),
        })
    }

    pub(crate) fn hessian(n: usize, hp: HessianPotential) -> Self {
        let p = hp.p();
        MetricField {
            n,
            descriptor: Descriptor::Hessian(hp),
            extendability: if p > 0.0 { Extendability::MinimalRank } else { Extendability::FullRank },
            tensor: Tensor::Diagonal(power_map(p)),
        }
    }

    /// `g♯ = diag(φ(x_α))`.
    pub fn separable(n: usize, phi: &WeightFunction) -> Self {
        let extendability = match phi.limit {
            ZeroLimit::Vanishing => Extendability::MinimalRank,
            ZeroLimit::Positive => Extendability::FullRank,
            ZeroLimit::Oscillating => Extendability::Neither,
        };
        MetricField { n, descriptor: Descriptor::Separable, extendability, tensor: Tensor::Diagonal(phi.phi.clone()) }
    }

    /// A user-supplied `g♯` field with a declared boundary class.
    pub fn custom<F>(n: usize, extendability: Extendability, sharp: F) -> Self
    where
        F: Fn(&[f64]) -> SymMatrix + Send + Sync + 'static,
    {
        MetricField { n, descriptor: Descriptor::Custom, extendability, tensor: Tensor::Dense(Arc::new(sharp)) }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn descriptor(&self) -> &Descriptor {
        &self.descriptor
    }

    pub fn extendability(&self) -> Extendability {
        self.extendability
    }

    pub fn is_full_rank(&self) -> bool {
        self.extendability == Extendability::FullRank
    }

    pub fn is_diagonal(&self) -> bool {
        matches!(self.tensor, Tensor::Diagonal(_))
    }

    /// The Hessian potential generating this metric, when there is one.
    pub fn hessian_potential(&self) -> Option<HessianPotential> {
        match &self.descriptor {
            Descriptor::Euclidean => Some(HessianPotential::quadratic()),
            Descriptor::Shahshahani => Some(HessianPotential::entropy()),
            Descriptor::PRep(p) => HessianPotential::new(*p).ok(),
            Descriptor::Hessian(hp) => Some(*hp),
            Descriptor::Separable | Descriptor::Custom => None,
        }
    }

    /// Diagonal of `g♯(x)` for separable metrics.
    pub fn sharp_diagonal(&self, x: &[f64]) -> Option<Vec<f64>> {
        match &self.tensor {
            Tensor::Diagonal(phi) => Some(x.iter().map(|&z| phi(z.max(0.0))).collect()),
            Tensor::Dense(_) => None,
        }
    }

    pub fn sharp_tensor_at(&self, x: &[f64]) -> SymMatrix {
        match &self.tensor {
            Tensor::Diagonal(_) => SymMatrix::diagonal(&self.sharp_diagonal(x).expect("diagonal")),
            Tensor::Dense(f) => f(x),
        }
    }

    pub fn sharp_tensor(&self, x: &SimplexPoint) -> SymMatrix {
        self.sharp_tensor_at(x.coords())
    }

    pub fn sharp_at(&self, x: &[f64], omega: &[f64]) -> Vec<f64> {
        match self.sharp_diagonal(x) {
            Some(d) => d.iter().zip(omega).map(|(a, b)| a * b).collect(),
            None => self.sharp_tensor_at(x).mul_vec(omega),
        }
    }

    /// `ω♯ = g♯(x) ω`.
    pub fn sharp(&self, x: &SimplexPoint, omega: &Covector) -> Vec<f64> {
        self.sharp_at(x.coords(), omega.coords())
    }

    /// `n(x) = 𝟏♯`.
    pub fn normal_vector(&self, x: &SimplexPoint) -> Vec<f64> {
        self.normal_vector_at(x.coords())
    }

    pub fn normal_vector_at(&self, x: &[f64]) -> Vec<f64> {
        match self.sharp_diagonal(x) {
            Some(d) => d,
            None => {
                let m = self.sharp_tensor_at(x);
                (0..self.n).map(|a| m.row(a).iter().sum()).collect()
            }
        }
    }

    /// `⟨w, w'⟩ₓ = wᵀ (g♯(x))⁺ w'`; vectors must lie in the image of `g♯(x)`.
    pub fn inner(&self, x: &SimplexPoint, w: &[f64], w2: &[f64]) -> Result<f64> {
        self.inner_at(x.coords(), w, w2)
    }

    pub fn inner_at(&self, x: &[f64], w: &[f64], w2: &[f64]) -> Result<f64> {
        let n = self.n;
        if x.len() != n || w.len() != n || w2.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: w.len().min(w2.len()).min(x.len()) });
        }
        if let Some(d) = self.sharp_diagonal(x) {
            let dmax = d.iter().fold(0.0_f64, |m, v| m.max(*v));
            let scale = w.iter().chain(w2).fold(1.0_f64, |m, v| m.max(v.abs()));
            let mut s = 0.0;
            for a in 0..n {
                if d[a] <= DEFAULT_RANK_TOL * dmax {
                    if w[a].abs() > OFF_DOMAIN_TOL * scale || w2[a].abs() > OFF_DOMAIN_TOL * scale {
                        return Err(Error::OutsideDomain);
                    }
                    continue;
                }
                s += w[a] * w2[a] / d[a];
            }
            return Ok(s);
        }
        let eig = eig_sym(&self.sharp_tensor_at(x));
        let lmax = eig.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let scale = numerics::norm2(w).max(numerics::norm2(w2)).max(1.0);
        let mut s = 0.0;
        for (lambda, q) in eig.values.iter().zip(&eig.vectors) {
            let (cw, cw2) = (numerics::dot(q, w), numerics::dot(q, w2));
            if *lambda <= DEFAULT_RANK_TOL * lmax {
                if cw.abs() > OFF_DOMAIN_TOL * scale || cw2.abs() > OFF_DOMAIN_TOL * scale {
                    return Err(Error::OutsideDomain);
                }
                continue;
            }
            s += cw * cw2 / lambda;
        }
        Ok(s)
    }

    pub fn norm_sq(&self, x: &SimplexPoint, w: &[f64]) -> Result<f64> {
        self.inner(x, w, w)
    }

    /// `g(x) = (g♯(x))⁺`.
    pub fn metric_tensor_at(&self, x: &[f64]) -> Result<SymMatrix> {
        if let Some(d) = self.sharp_diagonal(x) {
            let dmax = d.iter().fold(0.0_f64, |m, v| m.max(*v));
            return Ok(SymMatrix::diagonal(
                &d.iter().map(|v| if *v > DEFAULT_RANK_TOL * dmax { 1.0 / v } else { 0.0 }).collect::<Vec<_>>(),
            ));
        }
        let m = self.sharp_tensor_at(x);
        if m.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::EvaluationFailure("non-finite metric tensor".into()));
        }
        Ok(numerics::pseudoinverse(&m, DEFAULT_RANK_TOL))
    }

    /// `ρ_{αβ} = g♯_{αβ} / (g♯_{αα} g♯_{ββ})^{1/2}`.
    pub fn similarity(&self, x: &SimplexPoint, a: usize, b: usize) -> Result<f64> {
        let n = self.n;
        if a >= n || b >= n {
            return Err(Error::InvalidArgument(format!("strategy index out of range for n = {n}")));
        }
        let m = self.sharp_tensor(x);
        for i in [a, b] {
            if m.get(i, i) <= 0.0 {
                return Err(Error::ZeroSalience(i));
            }
        }
        Ok((m.get(a, b) / (m.get(a, a) * m.get(b, b)).sqrt()).clamp(-1.0, 1.0))
    }
}

fn power_map(p: f64) -> ScalarMap {
    if p == 0.0 {
        Arc::new(|_| 1.0)
    } else if p == 1.0 {
        Arc::new(|z| z)
    } else if p == 2.0 {
        Arc::new(|z| z * z)
    } else {
        Arc::new(move |z: f64| z.powf(p))
    }
}

pub fn separable_metric(phi: &WeightFunction, n: usize) -> MetricField {
    MetricField::separable(n, phi)
}

/// Boundary states covering every proper face of the simplex: the barycenter
/// of each face, capped at 256 faces.
pub fn default_probes(n: usize) -> Vec<SimplexPoint> {
    let mut out = Vec::new();
    let full = if n >= 31 { u32::MAX } else { (1u32 << n) - 1 };
    for mask in 1..full {
        let k = mask.count_ones() as f64;
        let w: Vec<f64> = (0..n).map(|i| if mask & (1 << i) != 0 { 1.0 / k } else { 0.0 }).collect();
        out.push(SimplexPoint::new(w).expect("face barycenter"));
        if out.len() >= 256 {
            break;
        }
    }
    out
}

/// Samples the boundary class of `g♯` at boundary `probes`.
///
/// Each probe is checked for rank (full, or exactly the support) and for
/// continuity of `g♯` along an interior approach.
pub fn classify_extendability(g: &MetricField, probes: &[SimplexPoint]) -> Extendability {
    let n = g.n();
    let bary = SimplexPoint::barycenter(n);
    let (mut full, mut minimal) = (true, true);
    for x in probes.iter().filter(|x| !x.is_interior()) {
        let m = g.sharp_tensor(x);
        if m.as_slice().iter().any(|v| !v.is_finite()) {
            return Extendability::Neither;
        }
        let scale = m.max_abs().max(1e-300);
        let r = numerics::rank(&m, DEFAULT_RANK_TOL);
        let supp = x.support();
        full &= r == n;
        let vanishes_off = (0..n)
            .filter(|a| !x.in_support(*a))
            .all(|a| (0..n).all(|b| m.get(a, b).abs() <= 1e-12 * scale));
        minimal &= vanishes_off && numerics::rank(&m.restrict(&supp), DEFAULT_RANK_TOL) == supp.len();
        if !approach_is_continuous(g, x, &bary) {
            return Extendability::Neither;
        }
    }
    match (full, minimal) {
        (true, _) => Extendability::FullRank,
        (false, true) => Extendability::MinimalRank,
        _ => Extendability::Neither,
    }
}

fn approach_is_continuous(g: &MetricField, x: &SimplexPoint, toward: &SimplexPoint) -> bool {
    let at = g.sharp_tensor(x);
    let dev = |eps: f64| -> f64 {
        let y: Vec<f64> = x.coords().iter().zip(toward.coords()).map(|(a, b)| (1.0 - eps) * a + eps * b).collect();
        g.sharp_tensor_at(&y).sub(&at).max_abs()
    };
    let coarse = dev(0.1);
    const SAMPLES: usize = 2000;
    let mut worst = 0.0_f64;
    for i in 0..SAMPLES {
        let eps = 10f64.powf(-5.0 + 2.0 * i as f64 / (SAMPLES - 1) as f64);
        worst = worst.max(dev(eps));
    }
    let fine = dev(1e-6);
    worst <= coarse.max(1e-12) + 1e-12 && (fine <= 0.9 * coarse || fine < 1e-8)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simplex::{sample_face, sample_interior};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pt(c: &[f64]) -> SimplexPoint {
        SimplexPoint::new(c.to_vec()).unwrap()
    }

    #[test]
    fn sharp_examples() {
        let x = pt(&[0.5, 0.25, 0.25]);
        let w = Covector(vec![4.0, -1.0, 8.0]);
        assert_eq!(MetricField::euclidean(3).sharp(&x, &w), w.0);
        let s = MetricField::shahshahani(3);
        assert_eq!(s.sharp(&x, &Covector(vec![4.0, 0.0, 8.0])), vec![2.0, 0.0, 2.0]);
        assert_eq!(s.sharp(&pt(&[0.0, 0.5, 0.5]), &Covector(vec![7.0, 2.0, 2.0])), vec![0.0, 1.0, 1.0]);
    }

    #[test]
    fn normal_examples() {
        let x = pt(&[0.5, 0.25, 0.25]);
        assert_eq!(MetricField::euclidean(3).normal_vector(&x), vec![1.0; 3]);
        assert_eq!(MetricField::shahshahani(3).normal_vector(&x), x.coords());
        assert_eq!(MetricField::prep(3, 2.0).unwrap().normal_vector(&x), vec![0.25, 1.0 / 16.0, 1.0 / 16.0]);
    }

    #[test]
    fn inner_examples() {
        let x = pt(&[0.5, 0.25, 0.25]);
        assert_eq!(MetricField::euclidean(3).inner(&x, &[1.0, -1.0, 0.0], &[1.0, -1.0, 0.0]).unwrap(), 2.0);
        let s = MetricField::shahshahani(3);
        assert_eq!(s.inner(&x, &[0.0, 1.0, -1.0], &[0.0, 1.0, -1.0]).unwrap(), 8.0);
        assert_eq!(s.inner(&pt(&[0.0, 0.5, 0.5]), &[1.0, 0.0, -1.0], &[1.0, 0.0, -1.0]), Err(Error::OutsideDomain));
    }

    #[test]
    fn dense_inner_matches_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let dense = MetricField::custom(3, Extendability::MinimalRank, |x| SymMatrix::diagonal(x));
        let s = MetricField::shahshahani(3);
        for _ in 0..100 {
            let x = sample_face(&mut rng, 3);
            let w: Vec<f64> = (0..3).map(|a| if x.in_support(a) { rng.random_range(-1.0..1.0) } else { 0.0 }).collect();
            let a = dense.inner(&x, &w, &w).unwrap();
            let b = s.inner(&x, &w, &w).unwrap();
            assert!((a - b).abs() < 1e-9 * (1.0 + b.abs()));
        }
        let off = [1.0, 0.0, -1.0];
        assert_eq!(dense.inner(&pt(&[0.0, 0.5, 0.5]), &off, &off), Err(Error::OutsideDomain));
    }

    #[test]
    fn separable_examples() {
        let x = pt(&[0.2, 0.3, 0.5]);
        let w = Covector(vec![1.0, 2.0, 3.0]);
        let id = WeightFunction::new(|z| z).unwrap();
        let one = WeightFunction::new(|_| 1.0).unwrap();
        let sq = WeightFunction::new(|z| z.powf(1.5)).unwrap();
        assert!(id.vanishing_at_zero() && !one.vanishing_at_zero());
        let a = separable_metric(&id, 3);
        assert_eq!(a.sharp(&x, &w), MetricField::shahshahani(3).sharp(&x, &w));
        assert_eq!(a.extendability(), Extendability::MinimalRank);
        let b = separable_metric(&one, 3);
        assert_eq!(b.sharp(&x, &w), w.0);
        assert_eq!(b.extendability(), Extendability::FullRank);
        let c = separable_metric(&sq, 3);
        assert_eq!(c.sharp(&x, &w), MetricField::prep(3, 1.5).unwrap().sharp(&x, &w));
    }

    #[test]
    fn prep_special_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let x = sample_face(&mut rng, 4);
            let p1 = MetricField::prep(4, 1.0).unwrap().sharp_tensor(&x);
            assert_eq!(p1, MetricField::shahshahani(4).sharp_tensor(&x));
            let p0 = MetricField::prep(4, 0.0).unwrap().sharp_tensor(&x);
            assert_eq!(p0, MetricField::euclidean(4).sharp_tensor(&x));
        }
    }

    #[test]
    fn similarity_examples() {
        let x = pt(&[0.2, 0.3, 0.5]);
        let s = MetricField::prep(3, 1.5).unwrap();
        assert_eq!(s.similarity(&x, 0, 1).unwrap(), 0.0);
        assert_eq!(s.similarity(&x, 2, 2).unwrap(), 1.0);
        let corr = MetricField::custom(2, Extendability::FullRank, |_| {
            SymMatrix::from_rows(&[vec![4.0, 2.0], vec![2.0, 1.0]]).unwrap()
        });
        assert!((corr.similarity(&pt(&[0.5, 0.5]), 0, 1).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(
            MetricField::shahshahani(3).similarity(&pt(&[0.0, 0.5, 0.5]), 0, 1),
            Err(Error::ZeroSalience(0))
        );
    }

    #[test]
    fn extendability_classification() {
        let probes = default_probes(3);
        assert_eq!(probes.len(), 6);
        assert_eq!(classify_extendability(&MetricField::euclidean(3), &probes), Extendability::FullRank);
        assert_eq!(classify_extendability(&MetricField::shahshahani(3), &probes), Extendability::MinimalRank);
        for p in [0.3, 1.5, 5.0] {
            assert_eq!(
                classify_extendability(&MetricField::prep(3, p).unwrap(), &probes),
                Extendability::MinimalRank,
                "p={p}"
            );
        }
        let wild = WeightFunction::new(|z: f64| 1.0 / (1.0 + (1.0 / z).sin().powi(2) / z)).unwrap();
        assert_eq!(wild.limit_at_zero(), ZeroLimit::Oscillating);
        let g = separable_metric(&wild, 3);
        assert_eq!(g.extendability(), Extendability::Neither);
        assert_eq!(classify_extendability(&g, &probes), Extendability::Neither);
        // same weight, but with the boundary value patched to 0: the approach check catches it
        let patched = MetricField::custom(3, Extendability::Neither, |x| {
            SymMatrix::diagonal(
                &x.iter().map(|&z| if z == 0.0 { 0.0 } else { 1.0 / (1.0 + (1.0 / z).sin().powi(2) / z) }).collect::<Vec<_>>(),
            )
        });
        assert_eq!(classify_extendability(&patched, &probes), Extendability::Neither);
    }

    #[test]
    fn sharp_inner_duality() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let metrics = [
            MetricField::euclidean(4),
            MetricField::shahshahani(4),
            MetricField::prep(4, 2.5).unwrap(),
            MetricField::custom(4, Extendability::FullRank, |x| {
                let mut m = SymMatrix::diagonal(&x.iter().map(|v| 1.0 + v).collect::<Vec<_>>());
                m = m.add(&SymMatrix::from_rows(&[
                    vec![0.0, 0.2, 0.0, 0.0],
                    vec![0.2, 0.0, 0.1, 0.0],
                    vec![0.0, 0.1, 0.0, 0.0],
                    vec![0.0, 0.0, 0.0, 0.0],
                ]).unwrap());
                m
            }),
        ];
        for g in &metrics {
            for _ in 0..100 {
                let x = sample_interior(&mut rng, 4, 0.01);
                let om: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
                let w: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
                let lhs = g.inner(&x, &g.sharp(&x, &Covector(om.clone())), &w).unwrap();
                assert!((lhs - numerics::dot(&om, &w)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn normal_is_orthogonal_to_tangent_space() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = MetricField::prep(3, 1.5).unwrap();
        for _ in 0..100 {
            let x = sample_face(&mut rng, 3);
            let supp = x.support();
            let mut z = vec![0.0; 3];
            if supp.len() >= 2 {
                let t = rng.random_range(-1.0..1.0);
                z[supp[0]] = t;
                z[supp[1]] = -t;
            }
            let nx = g.normal_vector(&x);
            assert!(g.inner(&x, &nx, &z).unwrap().abs() < 1e-9);
        }
    }

    #[test]
    fn inner_is_continuous_up_to_the_boundary() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for g in [MetricField::shahshahani(3), MetricField::prep(3, 2.0).unwrap()] {
            for _ in 0..10 {
                let x = sample_face(&mut rng, 3);
                if x.is_interior() {
                    continue;
                }
                let w: Vec<f64> = (0..3).map(|a| if x.in_support(a) { rng.random_range(-1.0..1.0) } else { 0.0 }).collect();
                let at = g.inner(&x, &w, &w).unwrap();
                let b = SimplexPoint::barycenter(3);
                let mut last = f64::INFINITY;
                for k in 1..=6 {
                    let eps = 10f64.powi(-k);
                    let xk: Vec<f64> = x.coords().iter().zip(b.coords()).map(|(a, c)| (1.0 - eps) * a + eps * c).collect();
                    last = (g.inner_at(&xk, &w, &w).unwrap() - at).abs();
                }
                assert!(last < 1e-4 * (1.0 + at));
            }
        }
    }
}
