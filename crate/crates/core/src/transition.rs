//! Transition (Cauchy) matrix `Φ(t, s)` of `x' = A(t) x`, `Φ(s, s) = I`.

use std::collections::HashMap;
use std::sync::Mutex;

use serde::Serialize;

use crate::coeffs::MatrixFunction;
use crate::error::{Error, Result};
use crate::grid::Partition;
use crate::linalg::{all_finite, expm, identity, norm2, Matrix};
use crate::quadrature::Composite;
use crate::system::{Numerics, TransitionMethod};

#[derive(Debug, Clone)]
enum Backend {
    Exponential(Matrix),
    Rk4,
}

#[derive(Debug)]
pub struct TransitionEngine {
    a: MatrixFunction,
    backend: Backend,
    steps_per_unit: usize,
    cache: Mutex<HashMap<(u64, u64), Matrix>>,
}

impl TransitionEngine {
    pub fn new(a: MatrixFunction, numerics: &Numerics) -> Result<Self> {
        numerics.validate()?;
        let backend = match numerics.method {
            TransitionMethod::Rk4 => Backend::Rk4,
            TransitionMethod::Auto if !a.is_constant() => Backend::Rk4,
            TransitionMethod::Auto | TransitionMethod::MatrixExponential => {
                if !a.is_constant() {
                    return Err(Error::InvalidArgument(
                        "the matrix exponential needs a constant A".into(),
                    ));
                }
                Backend::Exponential(a.eval(0.0)?)
            }
        };
        Ok(TransitionEngine {
            a,
            backend,
            steps_per_unit: numerics.steps_per_unit,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn a(&self) -> &MatrixFunction {
        &self.a
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    pub fn uses_exponential(&self) -> bool {
        matches!(self.backend, Backend::Exponential(_))
    }

    fn steps(&self, len: f64, min: usize) -> usize {
        ((len.abs() * self.steps_per_unit as f64).ceil() as usize).max(min)
    }

    /// `Φ(t, s)`. For `t < s` the matrix ODE is integrated backwards from `s`.
    pub fn phi(&self, t: f64, s: f64) -> Result<Matrix> {
        let n = self.dim();
        if t == s {
            return Ok(identity(n));
        }
        match &self.backend {
            Backend::Exponential(a) => Ok(expm(&(a * (t - s)))),
            Backend::Rk4 => {
                let steps = self.steps(t - s, 4);
                let h = (t - s) / steps as f64;
                let mut x = identity(n);
                for i in 0..steps {
                    let u = s + i as f64 * h;
                    let k1 = self.a.eval(u)? * &x;
                    let k2 = self.a.eval(u + 0.5 * h)? * (&x + &k1 * (0.5 * h));
                    let k3 = self.a.eval(u + 0.5 * h)? * (&x + &k2 * (0.5 * h));
                    let k4 = self.a.eval(u + h)? * (&x + &k3 * h);
                    x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
                    if !all_finite(&x) {
                        return Err(Error::NonFinite {
                            what: "the transition matrix",
                            from: u,
                            to: u + h,
                        });
                    }
                }
                Ok(x)
            }
        }
    }

    /// Memoised `Φ(t, s)` for partition-relevant pairs (nodes, anchors).
    pub fn phi_cached(&self, t: f64, s: f64) -> Result<Matrix> {
        let key = (t.to_bits(), s.to_bits());
        if let Some(m) = self.cache.lock().expect("transition cache poisoned").get(&key) {
            return Ok(m.clone());
        }
        let m = self.phi(t, s)?;
        // a concurrent caller may have inserted first; keep the stored value
        let mut cache = self.cache.lock().expect("transition cache poisoned");
        Ok(cache.entry(key).or_insert(m).clone())
    }

    pub fn cache_len(&self) -> usize {
        self.cache.lock().map(|c| c.len()).unwrap_or(0)
    }

    /// `Φ(c, s_i)` for points moving monotonically away from `c`, obtained in a
    /// single pass of `∂_s Φ(c, s) = −Φ(c, s) A(s)`.
    pub fn phi_sweep(&self, c: f64, points: &[f64]) -> Result<Vec<Matrix>> {
        let n = self.dim();
        if let Backend::Exponential(a) = &self.backend {
            return Ok(points.iter().map(|&s| expm(&(a * (c - s)))).collect());
        }
        let mut out = Vec::with_capacity(points.len());
        let mut p = identity(n);
        let mut u = c;
        for &s in points {
            let gap = s - u;
            if gap != 0.0 {
                if (s - c).abs() < (u - c).abs() || (s - c) * (u - c) < 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "sweep points must move away from {c} monotonically"
                    )));
                }
                let steps = self.steps(gap, 1);
                let h = gap / steps as f64;
                for i in 0..steps {
                    let v = u + i as f64 * h;
                    let a0 = self.a.eval(v)?;
                    let am = self.a.eval(v + 0.5 * h)?;
                    let a1 = self.a.eval(v + h)?;
                    let k1 = -(&p * &a0);
                    let k2 = -((&p + &k1 * (0.5 * h)) * &am);
                    let k3 = -((&p + &k2 * (0.5 * h)) * &am);
                    let k4 = -((&p + &k3 * h) * &a1);
                    p += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
                }
                if !all_finite(&p) {
                    return Err(Error::NonFinite {
                        what: "the transition matrix",
                        from: u,
                        to: s,
                    });
                }
                u = s;
            }
            out.push(p.clone());
        }
        Ok(out)
    }

    /// `∫_a^b Φ(c, s) g(s) ds` (oriented) where `c` is one of the endpoints and
    /// `g` returns an `n × m` matrix.
    pub fn integrate_weighted<G>(
        &self,
        quad: &Composite,
        c: f64,
        a: f64,
        b: f64,
        cols: usize,
        mut g: G,
    ) -> Result<Matrix>
    where
        G: FnMut(f64) -> Result<Matrix>,
    {
        let n = self.dim();
        let mut acc = Matrix::zeros(n, cols);
        if a == b {
            return Ok(acc);
        }
        debug_assert!(c == a || c == b, "weight anchor must be an endpoint");
        let mut pts = quad.points(a, b);
        if c == b {
            pts.reverse();
        }
        let s: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let phis = self.phi_sweep(c, &s)?;
        for ((si, wi), phi) in pts.iter().zip(&phis) {
            acc += phi * g(*si)? * *wi;
        }
        Ok(acc)
    }
}

/// Per-interval `ρ_k^± = exp(∫ ‖M‖)` over the advanced/delayed parts.
#[derive(Debug, Clone, Serialize)]
pub struct RhoReport {
    pub rho_plus: Vec<f64>,
    pub rho_minus: Vec<f64>,
    pub rho: Vec<f64>,
    /// `max_k ρ_k`.
    pub rho_max: f64,
}

const NORM_INTEGRAL_TOL: f64 = 1e-12;

/// `∫_a^b ‖M(u)‖₂ du` by composite Gauss–Legendre with panel refinement.
pub fn integral_of_norm(quad: &Composite, m: &MatrixFunction, a: f64, b: f64) -> Result<f64> {
    if m.is_zero() {
        return Ok(0.0);
    }
    if m.is_constant() {
        return Ok(norm2(&m.eval(a)?) * (b - a));
    }
    quad.try_integrate_adaptive(a, b, NORM_INTEGRAL_TOL, |u| m.eval(u).map(|x| norm2(&x)))
}

pub fn rho_diagnostics(quad: &Composite, p: &Partition, m: &MatrixFunction) -> Result<RhoReport> {
    let mut rho_plus = Vec::with_capacity(p.intervals());
    let mut rho_minus = Vec::with_capacity(p.intervals());
    for k in 0..p.intervals() {
        let (adv, del) = p.split(k);
        rho_plus.push(integral_of_norm(quad, m, adv.lo, adv.hi)?.exp());
        rho_minus.push(integral_of_norm(quad, m, del.lo, del.hi)?.exp());
    }
    let rho: Vec<f64> = rho_plus.iter().zip(&rho_minus).map(|(a, b)| a * b).collect();
    let rho_max = rho.iter().copied().fold(1.0, f64::max);
    Ok(RhoReport {
        rho_plus,
        rho_minus,
        rho,
        rho_max,
    })
}
