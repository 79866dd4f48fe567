//! Gronwall–Bellman envelopes for impulsive equations with piecewise constant
//! argument, and the Lipschitz data of a linear system.
//!
//! The impulse product runs over nodes with `τ < t_k ≤ t`, matching the jump
//! convention of the solver.

use serde::Serialize;

use crate::coeffs::{Expression, ImpulseSequence, MatrixFunction};
use crate::error::{Error, Result};
use crate::grid::Partition;
use crate::linalg::norm2;
use crate::quadrature::Composite;
use crate::system::LinearSystem;

const BOUND_TOL: f64 = 1e-12;

/// A nonnegative weight `η(t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum ScalarFunction {
    Constant(f64),
    Expr(Expression),
    /// `‖M(t)‖₂`.
    MatrixNorm(MatrixFunction),
}

impl ScalarFunction {
    pub fn eval(&self, t: f64) -> Result<f64> {
        match self {
            ScalarFunction::Constant(c) => Ok(*c),
            ScalarFunction::Expr(e) => e.eval_t(t),
            ScalarFunction::MatrixNorm(m) => Ok(norm2(&m.eval(t)?)),
        }
    }

    fn constant_value(&self) -> Option<f64> {
        match self {
            ScalarFunction::Constant(c) => Some(*c),
            ScalarFunction::MatrixNorm(m) if m.is_zero() => Some(0.0),
            ScalarFunction::MatrixNorm(m) if m.is_constant() => m.eval(0.0).ok().map(|x| norm2(&x)),
            _ => None,
        }
    }

    fn integrate(&self, quad: &Composite, a: f64, b: f64) -> Result<f64> {
        if let Some(c) = self.constant_value() {
            return Ok(c * (b - a));
        }
        quad.try_integrate_adaptive(a, b, BOUND_TOL, |s| self.eval(s))
    }
}

/// Lipschitz data of a linear system: `η1 = ‖A‖`, `η2 = ‖B‖`,
/// `λ_k = ‖C_k‖` and the affine offsets `‖D_k‖`.
#[derive(Debug, Clone)]
pub struct H1Constants {
    pub eta1: ScalarFunction,
    pub eta2: ScalarFunction,
    impulses: ImpulseSequence,
}

impl H1Constants {
    pub fn lambda(&self, k: i64) -> Result<f64> {
        Ok(norm2(&self.impulses.c_at(k)?))
    }

    pub fn offset(&self, k: i64) -> Result<f64> {
        Ok(self.impulses.d_at(k)?.norm())
    }
}

pub fn h1_constants(system: &LinearSystem) -> H1Constants {
    H1Constants {
        eta1: ScalarFunction::MatrixNorm(system.a.clone()),
        eta2: ScalarFunction::MatrixNorm(system.b.clone()),
        impulses: system.impulses.clone(),
    }
}

/// Which form of the estimate for `u(ζ_k)` to use in the `γ(t)` bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ZetaReading {
    /// Prefactor `(1 − ϑ̂)⁻¹`.
    #[default]
    Inverse,
    /// Prefactor `(1 − ϑ̂)` as printed.
    Literal,
}

#[derive(Debug, Clone)]
pub struct GronwallData {
    eta1: ScalarFunction,
    eta2: ScalarFunction,
    /// `η(t_i)` per local node.
    jumps: Vec<f64>,
    partition: Partition,
    tau: f64,
    quad: Composite,
    /// `∫_{t_k}^{ζ_k} (η1 + η2)` per interval.
    theta: Vec<f64>,
    /// `∫_{t_k}^{ζ_k} η2(s) e^{∫_s^{ζ_k} η1} ds` per interval.
    rho: Vec<f64>,
    /// `e^{∫_{t_k}^{ζ_k} η1}` per interval.
    advance_growth: Vec<f64>,
}

impl GronwallData {
    pub fn new(
        eta1: ScalarFunction,
        eta2: ScalarFunction,
        jumps: Vec<f64>,
        partition: Partition,
        tau: f64,
    ) -> Result<Self> {
        if jumps.len() != partition.nodes().len() {
            return Err(Error::Dimension(format!(
                "expected {} node weights, got {}",
                partition.nodes().len(),
                jumps.len()
            )));
        }
        if let Some(w) = jumps.iter().find(|w| !(**w >= 0.0)) {
            return Err(Error::InvalidArgument(format!("node weight {w} is negative")));
        }
        if !partition.contains(tau) {
            let (lo, hi) = partition.window();
            return Err(Error::OutsideWindow { t: tau, lo, hi });
        }
        let quad = Composite::default();
        for (i, &t) in partition.nodes().iter().enumerate() {
            let probe = if i + 1 < partition.nodes().len() {
                0.5 * (t + partition.node(i + 1))
            } else {
                t
            };
            for s in [t, probe] {
                let (a, b) = (eta1.eval(s)?, eta2.eval(s)?);
                if !(a >= 0.0 && b >= 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "weights must be nonnegative, got eta1 = {a}, eta2 = {b} at t = {s}"
                    )));
                }
            }
        }
        let mut theta = Vec::with_capacity(partition.intervals());
        let mut rho = Vec::with_capacity(partition.intervals());
        let mut advance_growth = Vec::with_capacity(partition.intervals());
        for k in 0..partition.intervals() {
            let (adv, _) = partition.split(k);
            let i1 = eta1.integrate(&quad, adv.lo, adv.hi)?;
            theta.push(i1 + eta2.integrate(&quad, adv.lo, adv.hi)?);
            advance_growth.push(i1.exp());
            let r = if eta2.constant_value() == Some(0.0) {
                0.0
            } else {
                quad.try_integrate_adaptive(adv.lo, adv.hi, BOUND_TOL, |s| {
                    Ok::<_, Error>(eta2.eval(s)? * eta1.integrate(&quad, s, adv.hi)?.exp())
                })?
            };
            rho.push(r);
        }
        Ok(GronwallData {
            eta1,
            eta2,
            jumps,
            partition,
            tau,
            quad,
            theta,
            rho,
            advance_growth,
        })
    }

    /// Data from a linear system's norms; the jumps are `‖C_k‖`.
    pub fn from_system(system: &LinearSystem, partition: Partition, tau: f64) -> Result<Self> {
        let h1 = h1_constants(system);
        let jumps = (0..partition.nodes().len())
            .map(|i| h1.lambda(partition.global_index(i)))
            .collect::<Result<Vec<_>>>()?;
        GronwallData::new(h1.eta1, h1.eta2, jumps, partition, tau)
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn theta_per_interval(&self) -> &[f64] {
        &self.theta
    }

    /// `ϑ̂ = sup_k ∫_{t_k}^{ζ_k} (η1 + η2)`.
    pub fn theta_hat(&self) -> f64 {
        self.theta.iter().copied().fold(0.0, f64::max)
    }

    pub fn rho_per_interval(&self) -> &[f64] {
        &self.rho
    }

    /// `ϱ = sup_k ∫_{t_k}^{ζ_k} η2(s) e^{∫_s^{ζ_k} η1} ds`.
    pub fn rho(&self) -> f64 {
        self.rho.iter().copied().fold(0.0, f64::max)
    }

    fn check_time(&self, t: f64) -> Result<()> {
        let (_, hi) = self.partition.window();
        if !(t >= self.tau && t <= hi) {
            return Err(Error::OutsideWindow { t, lo: self.tau, hi });
        }
        Ok(())
    }

    /// `∏_{τ < t_k ≤ t} (1 + η(t_k))`.
    fn jump_product(&self, t: f64) -> f64 {
        self.partition
            .nodes()
            .iter()
            .zip(&self.jumps)
            .filter(|(&tk, _)| self.tau < tk && tk <= t)
            .map(|(_, w)| 1.0 + w)
            .product()
    }

    /// Pieces `(k, lo, hi)` of `[τ, t]` cut at the nodes.
    fn pieces(&self, t: f64) -> Result<Vec<(usize, f64, f64)>> {
        let p = &self.partition;
        let first = p.locate(self.tau)?;
        let last = p.locate(t)?;
        Ok((first..=last)
            .map(|k| (k, p.node(k).max(self.tau), p.node(k + 1).min(t)))
            .filter(|(_, lo, hi)| hi > lo)
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Gronwall1 {
    /// Bound on `u(t)`.
    pub at_t: f64,
    /// Bound on `u(γ(t))`.
    pub at_gamma: f64,
}

/// First envelope: `∏(1 + η(t_k)) · exp(∫_τ^t (η1 + η2/(1 − ϑ̂))) · u(τ)`.
pub fn gronwall1_bound(d: &GronwallData, u_tau: f64, t: f64, reading: ZetaReading) -> Result<Gronwall1> {
    d.check_time(t)?;
    let theta = d.theta_hat();
    if !(theta < 1.0) {
        return Err(Error::Hypothesis(format!("theta_hat = {theta:.6e} is not below 1")));
    }
    let mut exponent = 0.0;
    for (_, lo, hi) in d.pieces(t)? {
        exponent += d.eta1.integrate(&d.quad, lo, hi)? + d.eta2.integrate(&d.quad, lo, hi)? / (1.0 - theta);
    }
    let at_t = d.jump_product(t) * exponent.exp() * u_tau;
    let factor = match reading {
        ZetaReading::Inverse => 1.0 / (1.0 - theta),
        ZetaReading::Literal => 1.0 - theta,
    };
    Ok(Gronwall1 {
        at_t,
        at_gamma: factor * at_t,
    })
}

/// Second envelope, with the per-interval weights `e^{∫_{t_k}^{ζ_k} η1}`.
pub fn gronwall2_bound(d: &GronwallData, u_tau: f64, t: f64) -> Result<f64> {
    d.check_time(t)?;
    let rho = d.rho();
    if !(rho < 1.0) {
        return Err(Error::Hypothesis(format!("rho = {rho:.6e} is not below 1")));
    }
    let mut exponent = 0.0;
    for (k, lo, hi) in d.pieces(t)? {
        exponent += d.eta1.integrate(&d.quad, lo, hi)?
            + d.advance_growth[k] * d.eta2.integrate(&d.quad, lo, hi)? / (1.0 - rho);
    }
    Ok(d.jump_product(t) * exponent.exp() * u_tau)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::Indexed;
    use crate::coeffs::VectorFunction;
    use crate::fundamental::Side;
    use crate::grid::GridSpec;
    use crate::linalg::Vector;
    use crate::system::{Ivp, Numerics};
    use crate::vop::{H3Policy, VopSolver};
    use approx::assert_relative_eq;

    fn uniform(h: f64, beta: f64, window: (f64, f64)) -> Partition {
        Partition::build(&GridSpec::Uniform { h, offset: 0.0, beta }, window).unwrap()
    }

    fn plain(eta1: f64, eta2: f64, p: Partition, jump: f64) -> GronwallData {
        let jumps = vec![jump; p.nodes().len()];
        GronwallData::new(ScalarFunction::Constant(eta1), ScalarFunction::Constant(eta2), jumps, p, 0.0).unwrap()
    }

    #[test]
    fn zero_data_keeps_initial_value() {
        let d = plain(0.0, 0.0, uniform(0.5, 0.3, (0.0, 3.0)), 0.0);
        let b = gronwall1_bound(&d, 2.5, 2.2, ZetaReading::Inverse).unwrap();
        assert_eq!(b.at_t, 2.5);
        assert_eq!(gronwall2_bound(&d, 2.5, 2.2).unwrap(), 2.5);
    }

    #[test]
    fn classical_gronwall_when_delayed() {
        let d = plain(0.0, 0.7, uniform(0.25, 0.0, (0.0, 2.0)), 0.0);
        assert_eq!(d.theta_hat(), 0.0);
        assert_eq!(d.rho(), 0.0);
        let t: f64 = 1.3;
        let b = gronwall1_bound(&d, 1.0, t, ZetaReading::Inverse).unwrap();
        assert_relative_eq!(b.at_t, (0.7 * t).exp(), max_relative = 1e-14);
        assert_relative_eq!(gronwall2_bound(&d, 1.0, t).unwrap(), (0.7 * t).exp(), max_relative = 1e-14);
    }

    #[test]
    fn no_eta2_collapses_to_product_times_exponential() {
        let d = plain(0.4, 0.0, uniform(0.5, 1.0, (0.0, 3.0)), 0.2);
        let t: f64 = 1.75;
        let expected = 1.2f64.powi(3) * (0.4 * t).exp();
        assert_relative_eq!(gronwall2_bound(&d, 1.0, t).unwrap(), expected, max_relative = 1e-13);
        assert_relative_eq!(
            gronwall1_bound(&d, 1.0, t, ZetaReading::Inverse).unwrap().at_t,
            expected,
            max_relative = 1e-13
        );
    }

    #[test]
    fn advanced_constants() {
        let d = plain(0.3, 0.2, uniform(1.0, 0.5, (0.0, 4.0)), 0.0);
        assert_relative_eq!(d.theta_hat(), 0.25, max_relative = 1e-14);
        let expected_rho = 0.2 * ((0.15f64).exp() - 1.0) / 0.3;
        assert_relative_eq!(d.rho(), expected_rho, max_relative = 1e-12);
        let b = gronwall1_bound(&d, 1.0, 2.0, ZetaReading::Literal).unwrap();
        assert_relative_eq!(b.at_gamma, 0.75 * b.at_t, max_relative = 1e-15);
    }

    #[test]
    fn gates() {
        let d = plain(0.0, 1.5, uniform(1.0, 1.0, (0.0, 2.0)), 0.0);
        assert!(matches!(gronwall1_bound(&d, 1.0, 1.0, ZetaReading::Inverse), Err(Error::Hypothesis(_))));
        assert!(matches!(gronwall2_bound(&d, 1.0, 1.0), Err(Error::Hypothesis(_))));
        assert!(matches!(
            gronwall1_bound(&d, 1.0, 5.0, ZetaReading::Inverse),
            Err(Error::OutsideWindow { .. })
        ));
    }

    #[test]
    fn negative_weight_rejected() {
        let p = uniform(1.0, 0.0, (0.0, 2.0));
        let e = ScalarFunction::Expr(Expression::parse("sin(t) - 2").unwrap());
        assert!(GronwallData::new(e, ScalarFunction::Constant(0.0), vec![0.0; 3], p, 0.0).is_err());
    }

    #[test]
    fn h1_of_sine_example() {
        let sys = LinearSystem::new(
            MatrixFunction::zero(1),
            MatrixFunction::scalar("sin(2*pi*t)").unwrap(),
            VectorFunction::parse(&["1"]).unwrap(),
            ImpulseSequence::new(1, Indexed::family(&["-3/2"]).unwrap(), Indexed::family(&["1/2"]).unwrap())
                .unwrap(),
        )
        .unwrap();
        let h1 = h1_constants(&sys);
        assert_eq!(h1.eta1.eval(0.3).unwrap(), 0.0);
        assert_relative_eq!(h1.eta2.eval(0.7).unwrap(), (2.0 * std::f64::consts::PI * 0.7).sin().abs());
        assert_eq!(h1.lambda(4).unwrap(), 1.5);
        assert_eq!(h1.offset(4).unwrap(), 0.5);
    }

    #[test]
    fn h1_of_zero_system() {
        let sys = LinearSystem::homogeneous(MatrixFunction::zero(2), MatrixFunction::zero(2)).unwrap();
        let h1 = h1_constants(&sys);
        assert_eq!(h1.eta1.eval(1.0).unwrap(), 0.0);
        assert_eq!(h1.eta2.eval(1.0).unwrap(), 0.0);
        assert_eq!(h1.lambda(3).unwrap(), 0.0);
    }

    #[test]
    fn bounds_nondecreasing() {
        let p = uniform(0.5, 0.6, (0.0, 4.0));
        let jumps = vec![0.3; p.nodes().len()];
        let d = GronwallData::new(
            ScalarFunction::Expr(Expression::parse("abs(sin(3*t))/4").unwrap()),
            ScalarFunction::Expr(Expression::parse("0.3 + cos(t)^2/5").unwrap()),
            jumps,
            p,
            0.2,
        )
        .unwrap();
        let mut prev = (0.0, 0.0);
        for i in 0..=120 {
            let t = 0.2 + 3.8 * i as f64 / 120.0;
            let b1 = gronwall1_bound(&d, 1.0, t, ZetaReading::Inverse).unwrap().at_t;
            let b2 = gronwall2_bound(&d, 1.0, t).unwrap();
            assert!(b1 >= prev.0 && b2 >= prev.1, "t = {t}");
            prev = (b1, b2);
        }
    }

    fn solver(a: &str, b: &str, c: &str, beta: f64) -> VopSolver {
        let sys = LinearSystem::new(
            MatrixFunction::scalar(a).unwrap(),
            MatrixFunction::scalar(b).unwrap(),
            VectorFunction::zero(1),
            ImpulseSequence::new(1, Indexed::family(&[c]).unwrap(), Indexed::Zero).unwrap(),
        )
        .unwrap();
        let p = uniform(0.5, beta, (0.0, 5.0));
        let ivp = Ivp::new(sys, p, 0.0, Vector::from_vec(vec![1.0])).unwrap();
        VopSolver::new(ivp, &Numerics::default(), H3Policy::Enforce).unwrap()
    }

    /// Value used for `y(γ(t))`: at a right-end anchor the interval's left limit.
    fn gamma_value(s: &VopSolver, t: f64) -> f64 {
        let p = &s.ivp().partition;
        let k = p.locate(t).unwrap();
        let z = p.anchor(k);
        let side = if z > p.node(k) && p.node_at(z).is_some() { Side::Left } else { Side::Post };
        s.solve_side(z, side).unwrap().norm()
    }

    #[test]
    fn dominates_solutions() {
        let s = solver("0.3*cos(t)", "0.8", "0.25*sin(k)", 1.0);
        let sys = &s.ivp().system;
        let d = GronwallData::from_system(sys, s.ivp().partition.clone(), 0.0).unwrap();
        for i in 0..=100 {
            let t = 4.99 * i as f64 / 100.0;
            let y = s.solve(t).unwrap().norm();
            let b1 = gronwall1_bound(&d, 1.0, t, ZetaReading::Inverse).unwrap();
            assert!(y <= b1.at_t * (1.0 + 1e-8), "t = {t}: {y} > {}", b1.at_t);
            assert!(gamma_value(&s, t) <= b1.at_gamma * (1.0 + 1e-8), "t = {t}");
            assert!(y <= gronwall2_bound(&d, 1.0, t).unwrap() * (1.0 + 1e-8), "t = {t}");
        }
    }

    #[test]
    fn literal_zeta_reading_is_violated() {
        // Fully advanced anchors with a pure delay term: u(ζ_k) exceeds u(t_k).
        let s = solver("0", "0.8", "0", 1.0);
        let d = GronwallData::from_system(&s.ivp().system, s.ivp().partition.clone(), 0.0).unwrap();
        let t = 0.0;
        let literal = gronwall1_bound(&d, 1.0, t, ZetaReading::Literal).unwrap();
        let inverse = gronwall1_bound(&d, 1.0, t, ZetaReading::Inverse).unwrap();
        let u_gamma = gamma_value(&s, t);
        assert!(u_gamma > literal.at_gamma);
        assert!(u_gamma <= inverse.at_gamma * (1.0 + 1e-8));
    }
}
