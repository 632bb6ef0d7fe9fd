//! Separable Hessian potentials `h(x) = Σ θ(x_α)` of the p-replicator family,
//! their Bregman divergences, convex conjugates and choice maps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::MetricField;
use crate::numerics::{self, SymMatrix};
use crate::simplex::{Covector, SimplexPoint};

/// `θ_p(z) = z^{2−p} / ((p−1)(p−2))`, with `z log z` at `p = 1` and `−log z` at `p = 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HessianPotential {
    p: f64,
}

const BISECTION_ITERS: usize = 200;
const MASS_TOL: f64 = 1e-12;

pub fn potential_p(p: f64) -> Result<HessianPotential> {
    HessianPotential::new(p)
}

impl HessianPotential {
    pub fn new(p: f64) -> Result<Self> {
        if !(p.is_finite() && p >= 0.0) {
            return Err(Error::InvalidArgument(format!("potential exponent must be finite and >= 0, got {p}")));
        }
        Ok(HessianPotential { p })
    }

    pub fn entropy() -> Self {
        HessianPotential { p: 1.0 }
    }

    pub fn log_barrier() -> Self {
        HessianPotential { p: 2.0 }
    }

    pub fn quadratic() -> Self {
        HessianPotential { p: 0.0 }
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// `q = 2 − p`, the exponent of `θ`.
    fn q(&self) -> f64 {
        2.0 - self.p
    }

    pub fn steep(&self) -> bool {
        self.p >= 1.0
    }

    /// Whether `θ(0) = +∞`, i.e. `h` blows up on the boundary.
    pub fn infinite_on_boundary(&self) -> bool {
        self.p >= 2.0
    }

    /// The metric `g = Hess h`, i.e. `g♯ = diag(x^p)`.
    pub fn metric(&self, n: usize) -> MetricField {
        MetricField::hessian(n, *self)
    }

    pub fn theta(&self, z: f64) -> f64 {
        let p = self.p;
        if p == 1.0 {
            if z == 0.0 {
                0.0
            } else {
                z * z.ln()
            }
        } else if p == 2.0 {
            -z.ln()
        } else {
            z.powf(self.q()) / ((p - 1.0) * (p - 2.0))
        }
    }

    pub fn theta_prime(&self, z: f64) -> f64 {
        let p = self.p;
        if p == 1.0 {
            z.ln() + 1.0
        } else if p == 2.0 {
            -1.0 / z
        } else if z == 0.0 {
            if p < 1.0 {
                0.0
            } else {
                f64::NEG_INFINITY
            }
        } else {
            -z.powf(1.0 - p) / (p - 1.0)
        }
    }

    pub fn theta_second(&self, z: f64) -> f64 {
        z.powf(-self.p)
    }

    /// Inverse of `θ′`; for nonsteep potentials arguments below `θ′(0)` map to 0.
    pub fn theta_prime_inv(&self, u: f64) -> f64 {
        let p = self.p;
        if p == 1.0 {
            (u - 1.0).exp()
        } else if p == 2.0 {
            if u < 0.0 {
                -1.0 / u
            } else {
                f64::INFINITY
            }
        } else if p < 1.0 {
            if u <= 0.0 {
                0.0
            } else {
                ((1.0 - p) * u).powf(1.0 / (1.0 - p))
            }
        } else if u < 0.0 {
            (-(p - 1.0) * u).powf(-1.0 / (p - 1.0))
        } else {
            f64::INFINITY
        }
    }

    /// `h(x)`, possibly `+∞` on the boundary.
    pub fn value(&self, x: &[f64]) -> f64 {
        x.iter().map(|&z| self.theta(z)).sum()
    }

    pub fn dh(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|&z| self.theta_prime(z)).collect()
    }

    pub fn hess(&self, x: &[f64]) -> SymMatrix {
        SymMatrix::diagonal(&x.iter().map(|&z| self.theta_second(z)).collect::<Vec<_>>())
    }

    /// `((1+u)^q − 1 − q u) / (q(q−1))`, evaluated without cancellation.
    fn kernel(&self, u: f64) -> f64 {
        let q = self.q();
        if u.abs() < 1e-3 {
            // Taylor series in u
            let mut coeff = 0.5;
            let mut sum = 0.0;
            let mut pow = u * u;
            for k in 2..9 {
                sum += coeff * pow;
                coeff *= (q - k as f64) / (k as f64 + 1.0);
                pow *= u;
            }
            return sum;
        }
        if self.p == 1.0 {
            (1.0 + u) * u.ln_1p() - u
        } else if self.p == 2.0 {
            u - u.ln_1p()
        } else {
            ((q * u.ln_1p()).exp_m1() - q * u) / (q * (q - 1.0))
        }
    }

    fn bregman_term(&self, xs: f64, x: f64) -> f64 {
        if x > 0.0 {
            if xs == 0.0 && self.infinite_on_boundary() {
                return 0.0;
            }
            let q = self.q();
            if xs == 0.0 {
                return x.powf(q) / q;
            }
            x.powf(q) * self.kernel((xs - x) / x)
        } else if xs == 0.0 {
            0.0
        } else if self.steep() {
            f64::INFINITY
        } else {
            self.theta(xs)
        }
    }

    /// `D_h(x*, x) = h(x*) − h(x) − ⟨dh(x), x* − x⟩`.
    ///
    /// Coordinates where `x*` vanishes are left out of the sum when `h` is
    /// infinite on the boundary; the value is `+∞` when a steep potential is
    /// evaluated at an `x` missing part of the support of `x*`.
    pub fn bregman(&self, x_star: &[f64], x: &[f64]) -> Result<f64> {
        if x_star.len() != x.len() {
            return Err(Error::DimensionMismatch { expected: x_star.len(), got: x.len() });
        }
        Ok(x_star.iter().zip(x).map(|(&s, &z)| self.bregman_term(s, z)).sum::<f64>().max(0.0))
    }

    /// Rate of change of [`Self::bregman`] along `ẋ`: `⟨ẋ, x − x*⟩ₓ` under `g = Hess h`.
    pub fn bregman_rate(&self, x_star: &[f64], x: &[f64], xdot: &[f64]) -> Result<f64> {
        let n = x.len();
        if x_star.len() != n || xdot.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: x_star.len().min(xdot.len()) });
        }
        let mut rate = 0.0;
        for a in 0..n {
            if x_star[a] == 0.0 && self.infinite_on_boundary() {
                continue;
            }
            if x[a] == 0.0 {
                if xdot[a] == 0.0 {
                    continue;
                }
                if self.p > 0.0 {
                    return Err(Error::OutsideDomain);
                }
            }
            rate += xdot[a] * (x[a] - x_star[a]) * self.theta_second(x[a]);
        }
        Ok(rate)
    }

    /// Maximizer of `⟨y, x⟩ − h(x)` over the simplex.
    pub fn choice_map(&self, y: &Covector) -> Result<SimplexPoint> {
        if !self.steep() {
            return Err(Error::NonSteep);
        }
        let y = y.coords();
        let n = y.len();
        if n == 0 {
            return Err(Error::InvalidArgument("empty score vector".into()));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::EvaluationFailure("non-finite score".into()));
        }
        let ymax = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if self.p == 1.0 {
            let w: Vec<f64> = y.iter().map(|v| (v - ymax).exp()).collect();
            return SimplexPoint::from_weights(w);
        }
        let mass = |lambda: f64| -> f64 { y.iter().map(|v| self.theta_prime_inv(v - lambda)).sum() };
        let mut lo = ymax - self.theta_prime(1.0);
        let mut hi = ymax - self.theta_prime(1.0 / n as f64);
        for _ in 0..BISECTION_ITERS {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let m = mass(mid);
            if (m - 1.0).abs() < MASS_TOL * 1e-3 {
                lo = mid;
                hi = mid;
                break;
            }
            if m > 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let lambda = 0.5 * (lo + hi);
        let x: Vec<f64> = y.iter().map(|v| self.theta_prime_inv(v - lambda)).collect();
        let total: f64 = x.iter().sum();
        if (total - 1.0).abs() > 1e3 * MASS_TOL {
            return Err(Error::EvaluationFailure(format!("choice map multiplier search stalled at mass {total}")));
        }
        SimplexPoint::from_weights(x)
    }

    /// `max_{x ∈ Δ} ⟨y, x⟩ − h(x)`.
    pub fn conjugate_value(&self, y: &Covector) -> Result<f64> {
        if self.p == 1.0 && self.steep() {
            let ymax = y.0.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            return Ok(ymax + y.0.iter().map(|v| (v - ymax).exp()).sum::<f64>().ln());
        }
        let x = self.choice_map(y)?;
        Ok(y.pair(x.coords()) - self.value(x.coords()))
    }

    /// Unconstrained choice map on the positive orthant, `(θ′)⁻¹(y)` componentwise.
    pub fn orthant_choice(&self, y: &[f64]) -> Result<Vec<f64>> {
        if !self.steep() {
            return Err(Error::NonSteep);
        }
        let q: Vec<f64> = y.iter().map(|&u| self.theta_prime_inv(u)).collect();
        if q.iter().any(|v| !v.is_finite()) {
            return Err(Error::OutsideDomain);
        }
        Ok(q)
    }

    /// Convex conjugate of `h` over the positive orthant.
    pub fn orthant_conjugate(&self, y: &[f64]) -> Result<f64> {
        let q = self.orthant_choice(y)?;
        Ok(numerics::dot(y, &q) - self.value(&q))
    }

    /// Frobenius deviation between a finite-difference Hessian of the orthant
    /// conjugate at `y` and the inverse of `Hess h` at the orthant choice.
    pub fn legendre_hessian_check(&self, y: &[f64]) -> Result<f64> {
        let q = self.orthant_choice(y)?;
        let n = y.len();
        let step = 1e-4 * y.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        let f = |z: &[f64]| self.orthant_conjugate(z);
        let mut dev = 0.0;
        let mut probe = y.to_vec();
        let f0 = f(y)?;
        for a in 0..n {
            for b in a..n {
                let second = if a == b {
                    probe[a] = y[a] + step;
                    let fp = f(&probe)?;
                    probe[a] = y[a] - step;
                    let fm = f(&probe)?;
                    probe[a] = y[a];
                    (fp - 2.0 * f0 + fm) / (step * step)
                } else {
                    let mut eval = |sa: f64, sb: f64| -> Result<f64> {
                        probe[a] = y[a] + sa;
                        probe[b] = y[b] + sb;
                        let v = f(&probe);
                        probe[a] = y[a];
                        probe[b] = y[b];
                        v
                    };
                    (eval(step, step)? - eval(step, -step)? - eval(-step, step)? + eval(-step, -step)?)
                        / (4.0 * step * step)
                };
                let exact = if a == b { 1.0 / self.theta_second(q[a]) } else { 0.0 };
                let d = second - exact;
                dev += if a == b { d * d } else { 2.0 * d * d };
            }
        }
        Ok(dev.sqrt())
    }

    /// Sampled steepness: `|θ′|` grows along boundary offsets `10⁻¹ … 10⁻⁸`.
    pub fn steepness_probe(&self) -> bool {
        let vals: Vec<f64> = (1..=8).map(|k| self.theta_prime(10f64.powi(-k)).abs()).collect();
        vals.windows(2).all(|w| w[1] > w[0])
    }
}

/// Largest asymmetry of `∂g_{αγ}/∂x_β` in `(α, β)` at an interior `x`,
/// estimated by central differences of `g = (g♯)⁻¹`.
pub fn integrability_defect(metric: &MetricField, x: &[f64]) -> Result<f64> {
    let n = x.len();
    let h = 1e-5;
    // derivs[b] = ∂g/∂x_b
    let mut derivs = Vec::with_capacity(n);
    let mut probe = x.to_vec();
    for b in 0..n {
        probe[b] = x[b] + h;
        let gp = metric.metric_tensor_at(&probe)?;
        probe[b] = x[b] - h;
        let gm = metric.metric_tensor_at(&probe)?;
        probe[b] = x[b];
        derivs.push(gp.sub(&gm).scale(0.5 / h));
    }
    let mut worst = 0.0_f64;
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                worst = worst.max((derivs[b].get(a, c) - derivs[a].get(b, c)).abs());
            }
        }
    }
    Ok(worst)
}
