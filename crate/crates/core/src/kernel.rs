//! `J(t, τ) = I + ∫_τ^t Φ(τ, s) B(s) ds` and `E(t, τ) = Φ(t, τ) J(t, τ)`.

use serde::Serialize;

use crate::coeffs::MatrixFunction;
use crate::error::{Error, Result};
use crate::grid::Partition;
use crate::linalg::{checked_inverse, identity, unit_condition, Matrix, MAX_CONDITION};
use crate::quadrature::Composite;
use crate::system::Numerics;
use crate::transition::{integral_of_norm, rho_diagnostics, TransitionEngine};

#[derive(Debug)]
pub struct KernelEngine {
    transition: TransitionEngine,
    b: MatrixFunction,
    quad: Composite,
}

/// Diagnostics for one partition interval.
#[derive(Debug, Clone, Serialize)]
pub struct H3Interval {
    /// Global index `k`.
    pub k: i64,
    pub t_k: f64,
    pub zeta_k: f64,
    pub t_next: f64,
    pub rho_plus: f64,
    pub rho_minus: f64,
    pub nu_plus: f64,
    pub nu_minus: f64,
    /// Condition number of `J(t_k, ζ_k)`.
    pub cond_left: f64,
    /// Condition number of `J(t_{k+1}, ζ_k)`.
    pub cond_right: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct H3Report {
    pub intervals: Vec<H3Interval>,
    /// `sup_k ρ_k(A)`.
    pub rho: f64,
    pub nu_plus: f64,
    pub nu_minus: f64,
    /// Global indices whose anchor-pair `J` has condition number above the limit.
    pub flagged: Vec<i64>,
    pub pass: bool,
}

impl H3Report {
    pub fn summary(&self) -> String {
        let mut s = format!(
            "H3 {}: nu+ = {:.6e}, nu- = {:.6e}, rho(A) = {:.6e}",
            if self.pass { "pass" } else { "FAIL" },
            self.nu_plus,
            self.nu_minus,
            self.rho
        );
        if !self.flagged.is_empty() {
            s.push_str(&format!(", ill-conditioned J on intervals {:?}", self.flagged));
        }
        s
    }
}

impl KernelEngine {
    pub fn new(a: MatrixFunction, b: MatrixFunction, numerics: &Numerics) -> Result<Self> {
        if a.dim() != b.dim() {
            return Err(Error::Dimension(format!(
                "A is {0}x{0} but B is {1}x{1}",
                a.dim(),
                b.dim()
            )));
        }
        Ok(KernelEngine {
            transition: TransitionEngine::new(a, numerics)?,
            b,
            quad: numerics.quadrature(),
        })
    }

    pub fn transition(&self) -> &TransitionEngine {
        &self.transition
    }

    pub fn b(&self) -> &MatrixFunction {
        &self.b
    }

    pub fn quadrature(&self) -> &Composite {
        &self.quad
    }

    pub fn dim(&self) -> usize {
        self.transition.dim()
    }

    pub fn j_matrix(&self, t: f64, tau: f64) -> Result<Matrix> {
        let n = self.dim();
        if t == tau || self.b.is_zero() {
            return Ok(identity(n));
        }
        let integral = self
            .transition
            .integrate_weighted(&self.quad, tau, tau, t, n, |s| self.b.eval(s))?;
        Ok(identity(n) + integral)
    }

    pub fn e_matrix(&self, t: f64, tau: f64) -> Result<Matrix> {
        if t == tau {
            return Ok(identity(self.dim()));
        }
        Ok(self.transition.phi(t, tau)? * self.j_matrix(t, tau)?)
    }

    pub fn e_inverse(&self, t: f64, tau: f64) -> Result<Matrix> {
        let e = self.e_matrix(t, tau)?;
        invert(&e, "E", t, tau)
    }

    pub fn check_h3(&self, p: &Partition) -> Result<H3Report> {
        let rho = rho_diagnostics(&self.quad, p, self.transition.a())?;
        let mut intervals = Vec::with_capacity(p.intervals());
        let mut flagged = Vec::new();
        for k in 0..p.intervals() {
            let (adv, del) = p.split(k);
            let nu_plus = rho.rho_plus[k] * integral_of_norm(&self.quad, &self.b, adv.lo, adv.hi)?;
            let nu_minus = rho.rho_minus[k] * integral_of_norm(&self.quad, &self.b, del.lo, del.hi)?;
            let cond_left = self.j_condition(adv.lo, adv.hi);
            let cond_right = self.j_condition(del.hi, del.lo);
            let k_global = p.global_index(k);
            if !(cond_left <= MAX_CONDITION && cond_right <= MAX_CONDITION) {
                flagged.push(k_global);
            }
            intervals.push(H3Interval {
                k: k_global,
                t_k: adv.lo,
                zeta_k: adv.hi,
                t_next: del.hi,
                rho_plus: rho.rho_plus[k],
                rho_minus: rho.rho_minus[k],
                nu_plus,
                nu_minus,
                cond_left,
                cond_right,
            });
        }
        let nu_plus = intervals.iter().map(|i| i.nu_plus).fold(0.0, f64::max);
        let nu_minus = intervals.iter().map(|i| i.nu_minus).fold(0.0, f64::max);
        let pass = nu_plus < 1.0 && nu_minus < 1.0 && flagged.is_empty();
        Ok(H3Report {
            intervals,
            rho: rho.rho_max,
            nu_plus,
            nu_minus,
            flagged,
            pass,
        })
    }

    /// Unit-scale condition number of `J(t, τ)`; infinite when it cannot be computed.
    fn j_condition(&self, t: f64, tau: f64) -> f64 {
        match self.j_matrix(t, tau) {
            Ok(j) => unit_condition(&j),
            Err(_) => f64::INFINITY,
        }
    }
}

pub(crate) fn invert(m: &Matrix, what: &'static str, t: f64, tau: f64) -> Result<Matrix> {
    let cond = unit_condition(m);
    if !(cond <= MAX_CONDITION) {
        return Err(Error::Singular { what, t, tau, cond });
    }
    checked_inverse(m).ok_or(Error::Singular { what, t, tau, cond })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::linalg::{max_abs, norm2};
    use approx::assert_relative_eq;

    fn engine(a: &str, b: &str) -> KernelEngine {
        KernelEngine::new(
            MatrixFunction::scalar(a).unwrap(),
            MatrixFunction::scalar(b).unwrap(),
            &Numerics::default(),
        )
        .unwrap()
    }

    #[test]
    fn zero_b_gives_identity_j_and_phi_e() {
        let k = engine("sin(t)", "0");
        assert_eq!(k.j_matrix(2.0, 0.3).unwrap(), identity(1));
        let e = k.e_matrix(2.0, 0.3).unwrap();
        let phi = k.transition().phi(2.0, 0.3).unwrap();
        assert_relative_eq!(e[(0, 0)], phi[(0, 0)], epsilon = 1e-14);
    }

    #[test]
    fn j_is_linear_for_zero_a() {
        let k = engine("0", "0.7");
        assert_relative_eq!(k.j_matrix(1.5, 0.25).unwrap()[(0, 0)], 1.0 + 0.7 * 1.25, epsilon = 1e-13);
        assert_relative_eq!(k.j_matrix(0.25, 1.5).unwrap()[(0, 0)], 1.0 - 0.7 * 1.25, epsilon = 1e-13);
        assert_eq!(k.j_matrix(0.4, 0.4).unwrap(), identity(1));
    }

    #[test]
    fn scalar_constant_e_closed_form() {
        let (a, b) = (0.6, -0.35);
        let k = engine("0.6", "-0.35");
        for (t, tau) in [(1.3, 0.2), (0.2, 1.3), (4.0, 4.5)] {
            let d: f64 = t - tau;
            let expected = (a * d).exp() * (1.0 + b / a * (1.0 - (-a * d).exp()));
            assert_relative_eq!(k.e_matrix(t, tau).unwrap()[(0, 0)], expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn minus_a_coupling_makes_j_inverse_of_phi() {
        let k = engine("1/(t+1)", "-1/(t+1)");
        for (t, tk) in [(0.7, 0.0), (3.9, 3.0), (2.0, 2.5)] {
            let j = k.j_matrix(t, tk).unwrap();
            let phi = k.transition().phi(t, tk).unwrap();
            assert!((j[(0, 0)] * phi[(0, 0)] - 1.0).abs() < 1e-9);
            assert!((k.e_matrix(t, tk).unwrap()[(0, 0)] - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn e_inverse_residual() {
        let a = MatrixFunction::parse(3, &["0.1", "t", "0", "0", "-0.2", "0.3", "0.05", "0", "cos(t)"]).unwrap();
        let b = MatrixFunction::parse(3, &["0.2", "0", "0.1", "0", "0.1", "0", "-0.1", "0", "0.2"]).unwrap();
        let k = KernelEngine::new(a, b, &Numerics::default()).unwrap();
        let e = k.e_matrix(1.1, 0.4).unwrap();
        let inv = k.e_inverse(1.1, 0.4).unwrap();
        assert!(max_abs(&(&e * &inv - identity(3))) < 1e-10);
    }

    #[test]
    fn singular_e_is_reported() {
        // J(1, 0) = 1 + b = 0
        let k = engine("0", "-1");
        match k.e_inverse(1.0, 0.0) {
            Err(Error::Singular { t, tau, .. }) => assert_eq!((t, tau), (1.0, 0.0)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn j_ignores_b_outside_range() {
        let k1 = engine("0.3", "t");
        let k2 = engine("0.3", "t + 5*floor(t/2)");
        let j1 = k1.j_matrix(1.9, 0.4).unwrap();
        let j2 = k2.j_matrix(1.9, 0.4).unwrap();
        assert_eq!(j1, j2);
    }

    #[test]
    fn h3_zero_system_passes() {
        let k = engine("0", "0");
        let p = Partition::build(&GridSpec::Uniform { h: 1.0, offset: 0.0, beta: 0.5 }, (0.0, 4.0)).unwrap();
        let r = k.check_h3(&p).unwrap();
        assert!(r.pass);
        assert_eq!((r.nu_plus, r.nu_minus), (0.0, 0.0));
    }

    #[test]
    fn h3_constant_b_values() {
        let (b, h, beta) = (0.8, 0.5, 0.3);
        let k = engine("0", "-0.8");
        let p = Partition::build(&GridSpec::Uniform { h, offset: 0.0, beta }, (0.0, 3.0)).unwrap();
        let r = k.check_h3(&p).unwrap();
        assert_relative_eq!(r.nu_plus, b * beta * h, epsilon = 1e-14);
        assert_relative_eq!(r.nu_minus, b * (1.0 - beta) * h, epsilon = 1e-14);
        assert!(r.pass);
    }

    #[test]
    fn h3_bounds_on_j_at_anchor_pairs() {
        let a = MatrixFunction::parse(2, &["0.2*sin(t)", "0.1", "-0.1", "0.15"]).unwrap();
        let b = MatrixFunction::parse(2, &["0.3", "0.1*t", "0", "-0.25"]).unwrap();
        let k = KernelEngine::new(a, b, &Numerics::default()).unwrap();
        let p = Partition::build(&GridSpec::Uniform { h: 1.0, offset: 0.0, beta: 0.6 }, (0.0, 3.0)).unwrap();
        let r = k.check_h3(&p).unwrap();
        assert!(r.pass);
        for i in 0..p.intervals() {
            let (adv, _) = p.split(i);
            let j = k.j_matrix(adv.lo, adv.hi).unwrap();
            let inv = checked_inverse(&j).unwrap();
            assert!(norm2(&j) <= 1.0 + r.nu_plus + 1e-12);
            assert!(norm2(&inv) <= 1.0 / (1.0 - r.nu_plus) + 1e-12);
        }
    }

    #[test]
    fn h3_flags_singular_anchor_pairs() {
        // J(t_k, ζ_k) = 1 - h vanishes for advanced unit steps
        let k = engine("0", "1");
        let p = Partition::build(&GridSpec::Uniform { h: 1.0, offset: 0.0, beta: 1.0 }, (0.0, 2.0)).unwrap();
        let r = k.check_h3(&p).unwrap();
        assert!(!r.pass);
        assert_eq!(r.flagged, vec![0, 1]);
    }

    #[test]
    fn h3_sine_example_small_step() {
        let k = engine("0", "sin(2*pi*t)");
        let (h, beta) = (0.2, 0.2);
        let p = Partition::build(&GridSpec::Uniform { h, offset: 0.0, beta }, (0.0, 4.0)).unwrap();
        let r = k.check_h3(&p).unwrap();
        assert!(r.pass);
        assert!(r.nu_plus <= beta * h + 1e-15);
        assert!(r.nu_minus <= (1.0 - beta) * h + 1e-15);
    }
}
