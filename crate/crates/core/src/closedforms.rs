//! Specialised evaluation paths used to cross-check the generic solver:
//! fully delayed and fully advanced grids, `A ≡ 0`, and constant coefficients.
//!
//! Each path supplies its own per-interval matrix `W(t, s)` and forcing
//! integrals; the surrounding sum over intervals is shared.

use crate::error::{Error, Result};
use crate::kernel::{invert, KernelEngine};
use crate::linalg::{checked_inverse, condition_number, expm, identity, Matrix, Vector, MAX_CONDITION};
use crate::quadrature::Composite;
use crate::system::{Ivp, LinearSystem, Numerics};

/// `y' = A y + B y(γ) + f`, `y(t_k) = (I + C) y(t_k^-) + D_k` with constant
/// `A` (invertible), `B` and `C`.
#[derive(Debug, Clone)]
pub struct ConstantSystem {
    a: Matrix,
    b: Matrix,
    c: Matrix,
    a_inv: Matrix,
}

/// Which constant-coefficient representation to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstantForm {
    /// Ordered product of per-interval factors.
    Product,
    /// Powers of the single node step `Ê = (I + C) Ẽ(η⁻) Ẽ⁻¹(−η⁺)`; needs
    /// the same `η⁺`, `η⁻` on every interior interval.
    Power,
}

impl ConstantSystem {
    pub fn new(a: Matrix, b: Matrix, c: Matrix) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || b.shape() != (n, n) || c.shape() != (n, n) {
            return Err(Error::Dimension("A, B and C must be square of equal size".into()));
        }
        let cond = condition_number(&a);
        let a_inv = if cond <= MAX_CONDITION { checked_inverse(&a) } else { None };
        let a_inv = a_inv.ok_or(Error::Singular {
            what: "A",
            t: 0.0,
            tau: 0.0,
            cond,
        })?;
        Ok(ConstantSystem { a, b, c, a_inv })
    }

    pub fn from_system(sys: &LinearSystem) -> Result<Self> {
        if !(sys.a.is_constant() && sys.b.is_constant()) {
            return Err(Error::InvalidArgument("A and B must be constant".into()));
        }
        let c = sys
            .impulses
            .constant_c()
            .ok_or_else(|| Error::InvalidArgument("C_k must not depend on k".into()))?;
        ConstantSystem::new(sys.a.eval(0.0)?, sys.b.eval(0.0)?, c)
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// `Ẽ(t) = e^{At} (I + A⁻¹ (I − e^{−At}) B)`.
    pub fn e_tilde(&self, t: f64) -> Matrix {
        let n = self.dim();
        let inner = identity(n) + &self.a_inv * (identity(n) - expm(&(&self.a * -t))) * &self.b;
        expm(&(&self.a * t)) * inner
    }

    pub fn e_tilde_inverse(&self, t: f64) -> Result<Matrix> {
        invert(&self.e_tilde(t), "E~", t, 0.0)
    }

    /// `W(t, s) = Ẽ(t − z) Ẽ⁻¹(s − z)` for anchor `z`.
    fn local(&self, t: f64, s: f64, z: f64) -> Result<Matrix> {
        if t == s {
            return Ok(identity(self.dim()));
        }
        Ok(self.e_tilde(t - z) * self.e_tilde_inverse(s - z)?)
    }

    /// `Ê` for advanced length `eta_plus` and delayed length `eta_minus`.
    pub fn e_hat(&self, eta_plus: f64, eta_minus: f64) -> Result<Matrix> {
        Ok((identity(self.dim()) + &self.c) * self.e_tilde(eta_minus) * self.e_tilde_inverse(-eta_plus)?)
    }
}

/// Building blocks of one evaluation path.
struct Path<'a> {
    ivp: &'a Ivp,
    /// `W(t, s)` on interval `k`, anchor already resolved.
    local: &'a dyn Fn(usize, f64, f64, f64) -> Result<Matrix>,
    /// `∫_a^b Φ(c, s) f(s) ds`.
    force: &'a dyn Fn(f64, f64, f64) -> Result<Vector>,
    /// Common node step for the power form.
    power: Option<Matrix>,
}

impl Path<'_> {
    fn jump(&self, i: usize) -> Result<Matrix> {
        let p = &self.ivp.partition;
        Ok(identity(self.ivp.dim()) + self.ivp.system.impulses.c_at(p.global_index(i))?)
    }

    fn evaluate(&self, t: f64) -> Result<Vector> {
        let ivp = self.ivp;
        let p = &ivp.partition;
        let tau = ivp.tau;
        let (_, hi) = p.window();
        if !(t >= tau && t <= hi) {
            return Err(Error::OutsideWindow { t, lo: tau, hi });
        }
        if t == tau {
            return Ok(ivp.y0.clone());
        }
        let k_tau = p.locate(tau)?;
        let kt = if t == hi { p.intervals() } else { p.locate(t)? };
        let z0 = p.anchor(k_tau).max(tau);
        let lifted = &ivp.y0 + (self.force)(tau, tau, z0)?;
        if kt == k_tau {
            return Ok((self.local)(k_tau, t, tau, z0)? * lifted + (self.force)(t, z0, t)?);
        }
        let at_node = t == p.node(kt);
        let head = if at_node {
            identity(ivp.dim())
        } else {
            (self.local)(kt, t, p.node(kt), p.anchor(kt))?
        };
        let mut y = Vector::zeros(ivp.dim());
        if !at_node {
            let (t_k, z) = (p.node(kt), p.anchor(kt));
            y += &head * (self.force)(t_k, t_k, z)? + (self.force)(t, z, t)?;
        }
        let mut g = head.clone();
        let mut w_t_tau = None;
        for r in (k_tau + 1..=kt).rev() {
            if let Some(e_hat) = &self.power {
                g = &head * matrix_power(e_hat, kt - r);
            }
            let t_r = p.node(r);
            y += &g * ivp.system.impulses.d_at(p.global_index(r))?;
            if r < kt {
                y += &g * (self.force)(t_r, t_r, p.anchor(r))?;
            }
            let lo = if r - 1 == k_tau { z0 } else { p.anchor(r - 1) };
            let jump = self.jump(r)?;
            y += &g * &jump * (self.force)(t_r, lo, t_r)?;
            if r - 1 == k_tau {
                w_t_tau = Some(&g * jump * (self.local)(k_tau, t_r, tau, z0)?);
            } else if self.power.is_none() {
                g = g * jump * (self.local)(r - 1, t_r, p.node(r - 1), p.anchor(r - 1))?;
            }
        }
        let w = w_t_tau.expect("loop reaches the first interval");
        Ok(y + w * lifted)
    }
}

/// `M^k` by repeated multiplication.
fn matrix_power(m: &Matrix, k: usize) -> Matrix {
    let mut acc = identity(m.nrows());
    for _ in 0..k {
        acc *= m;
    }
    acc
}

fn require_h3(kernel: &KernelEngine, ivp: &Ivp) -> Result<()> {
    let report = kernel.check_h3(&ivp.partition)?;
    if report.pass {
        Ok(())
    } else {
        Err(Error::Hypothesis(report.summary()))
    }
}

fn kernel_for(ivp: &Ivp, numerics: &Numerics) -> Result<KernelEngine> {
    KernelEngine::new(ivp.system.a.clone(), ivp.system.b.clone(), numerics)
}

fn transition_forcing<'a>(kernel: &'a KernelEngine, ivp: &'a Ivp) -> impl Fn(f64, f64, f64) -> Result<Vector> + 'a {
    move |c, a, b| {
        let n = ivp.dim();
        if a == b || ivp.system.f.is_zero() {
            return Ok(Vector::zeros(n));
        }
        let m = kernel.transition().integrate_weighted(kernel.quadrature(), c, a, b, 1, |s| {
            ivp.system.f.eval(s).map(|v| Matrix::from_column_slice(n, 1, v.as_slice()))
        })?;
        Ok(Vector::from_column_slice(m.as_slice()))
    }
}

/// Fully delayed grid (`ζ_k = t_k`): `W_-` is a product of `E` factors, no inverses.
pub fn solve_delayed(ivp: &Ivp, t: f64, numerics: &Numerics) -> Result<Vector> {
    if !ivp.partition.is_delayed() {
        return Err(Error::InvalidArgument("every anchor must equal its left node".into()));
    }
    let kernel = kernel_for(ivp, numerics)?;
    require_h3(&kernel, ivp)?;
    let local = |_k: usize, t: f64, s: f64, _z: f64| kernel.e_matrix(t, s);
    let force = transition_forcing(&kernel, ivp);
    Path {
        ivp,
        local: &local,
        force: &force,
        power: None,
    }
    .evaluate(t)
}

/// Fully advanced grid (`ζ_k = t_{k+1}`): `W_+` uses `E⁻¹(s, t_{k+1})` factors.
pub fn solve_advanced(ivp: &Ivp, t: f64, numerics: &Numerics) -> Result<Vector> {
    if !ivp.partition.is_advanced() {
        return Err(Error::InvalidArgument("every anchor must equal its right node".into()));
    }
    let kernel = kernel_for(ivp, numerics)?;
    require_h3(&kernel, ivp)?;
    let p = &ivp.partition;
    let local = |k: usize, t: f64, s: f64, _z: f64| {
        let right = p.node(k + 1);
        let inv = invert(&kernel.e_matrix(s, right)?, "E", s, right)?;
        if t == right {
            Ok(inv)
        } else {
            Ok(kernel.e_matrix(t, right)? * inv)
        }
    };
    let force = transition_forcing(&kernel, ivp);
    Path {
        ivp,
        local: &local,
        force: &force,
        power: None,
    }
    .evaluate(t)
}

/// `A ≡ 0`: `Φ = I`, `E = J = I + ∫ B`.
pub fn solve_b_only(ivp: &Ivp, t: f64, numerics: &Numerics) -> Result<Vector> {
    let sys = &ivp.system;
    if !sys.a.is_zero() {
        return Err(Error::InvalidArgument("A must vanish identically".into()));
    }
    let kernel = kernel_for(ivp, numerics)?;
    require_h3(&kernel, ivp)?;
    let n = ivp.dim();
    let quad = numerics.quadrature();
    let j = |t: f64, s: f64| -> Result<Matrix> {
        let mut acc = identity(n);
        for (u, w) in quad.points(s, t) {
            acc += sys.b.eval(u)? * w;
        }
        Ok(acc)
    };
    let local = |_k: usize, t: f64, s: f64, z: f64| -> Result<Matrix> {
        if t == s {
            return Ok(identity(n));
        }
        Ok(j(t, z)? * invert(&j(s, z)?, "J", s, z)?)
    };
    let force = |_c: f64, a: f64, b: f64| -> Result<Vector> {
        let mut acc = Vector::zeros(n);
        for (u, w) in quad.points(a, b) {
            acc += sys.f.eval(u)? * w;
        }
        Ok(acc)
    };
    Path {
        ivp,
        local: &local,
        force: &force,
        power: None,
    }
    .evaluate(t)
}

/// Constant-coefficient closed form. The power form requires the interior
/// intervals to share `η⁺` and `η⁻`.
pub fn solve_constant(cs: &ConstantSystem, ivp: &Ivp, t: f64, form: ConstantForm, numerics: &Numerics) -> Result<Vector> {
    if cs.dim() != ivp.dim() {
        return Err(Error::Dimension("constant system and IVP differ in size".into()));
    }
    let kernel = KernelEngine::new(
        crate::coeffs::MatrixFunction::constant(&cs.a),
        crate::coeffs::MatrixFunction::constant(&cs.b),
        numerics,
    )?;
    require_h3(&kernel, ivp)?;
    let power = match form {
        ConstantForm::Product => None,
        ConstantForm::Power => Some(uniform_step(cs, ivp, t)?),
    };
    let local = |_k: usize, t: f64, s: f64, z: f64| cs.local(t, s, z);
    let quad: Composite = numerics.quadrature();
    let n = cs.dim();
    let force = |c: f64, a: f64, b: f64| -> Result<Vector> {
        let mut acc = Vector::zeros(n);
        if a == b || ivp.system.f.is_zero() {
            return Ok(acc);
        }
        for (s, w) in quad.points(a, b) {
            acc += expm(&(&cs.a * (c - s))) * ivp.system.f.eval(s)? * w;
        }
        Ok(acc)
    };
    Path {
        ivp,
        local: &local,
        force: &force,
        power,
    }
    .evaluate(t)
}

/// `Ê` for the intervals strictly between those of `τ` and `t`.
fn uniform_step(cs: &ConstantSystem, ivp: &Ivp, t: f64) -> Result<Matrix> {
    let p = &ivp.partition;
    let k_tau = p.locate(ivp.tau)?;
    let (_, hi) = p.window();
    let kt = if t == hi { p.intervals() } else { p.locate(t)? };
    let lengths = |k: usize| {
        let (adv, del) = p.split(k);
        (adv.len(), del.len())
    };
    let interior: Vec<(f64, f64)> = (k_tau + 1..kt).map(lengths).collect();
    let (eta_plus, eta_minus) = match interior.first() {
        Some(&first) => first,
        None => lengths(k_tau.min(p.intervals() - 1)),
    };
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * (1.0 + a.abs());
    if interior.iter().any(|&(ep, em)| !close(ep, eta_plus) || !close(em, eta_minus)) {
        return Err(Error::InvalidArgument(
            "the power form needs equal advanced and delayed lengths on every interval".into(),
        ));
    }
    cs.e_hat(eta_plus, eta_minus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::{ImpulseSequence, Indexed, MatrixFunction, VectorFunction};
    use crate::grid::{GridSpec, Partition};
    use crate::linalg::max_abs;
    use crate::vop::{H3Policy, VopSolver};
    use approx::assert_relative_eq;

    fn system(a: &[&str], b: &[&str], f: &[&str], c: &[&str], d: &[&str]) -> LinearSystem {
        let n = f.len();
        LinearSystem::new(
            MatrixFunction::parse(n, a).unwrap(),
            MatrixFunction::parse(n, b).unwrap(),
            VectorFunction::parse(f).unwrap(),
            ImpulseSequence::new(n, Indexed::family(c).unwrap(), Indexed::family(d).unwrap()).unwrap(),
        )
        .unwrap()
    }

    fn ivp(sys: LinearSystem, grid: GridSpec, window: (f64, f64), tau: f64, y0: &[f64]) -> Ivp {
        Ivp::new(sys, Partition::build(&grid, window).unwrap(), tau, Vector::from_column_slice(y0)).unwrap()
    }

    fn generic(ivp: &Ivp, t: f64) -> Vector {
        VopSolver::new(ivp.clone(), &Numerics::default(), H3Policy::Enforce)
            .unwrap()
            .solve(t)
            .unwrap()
    }

    #[test]
    fn e_tilde_values() {
        let cs = ConstantSystem::new(Matrix::from_element(1, 1, 1.0), Matrix::from_element(1, 1, 1.0), Matrix::zeros(1, 1)).unwrap();
        assert_relative_eq!(cs.e_tilde(0.0)[(0, 0)], 1.0, epsilon = 1e-15);
        assert_relative_eq!(cs.e_tilde(1.0)[(0, 0)], 2.0 * std::f64::consts::E - 1.0, epsilon = 1e-13);
        let a = Matrix::from_row_slice(2, 2, &[0.3, 1.0, -1.0, 0.1]);
        let cs = ConstantSystem::new(a.clone(), Matrix::zeros(2, 2), Matrix::zeros(2, 2)).unwrap();
        assert!(max_abs(&(cs.e_tilde(0.8) - expm(&(a * 0.8)))) < 1e-13);
    }

    #[test]
    fn e_tilde_matches_kernel() {
        let a = Matrix::from_row_slice(2, 2, &[0.3, 0.2, -0.1, -0.4]);
        let b = Matrix::from_row_slice(2, 2, &[0.1, 0.0, 0.05, -0.2]);
        let cs = ConstantSystem::new(a.clone(), b.clone(), Matrix::zeros(2, 2)).unwrap();
        let k = KernelEngine::new(MatrixFunction::constant(&a), MatrixFunction::constant(&b), &Numerics::default()).unwrap();
        for (tau, d) in [(0.3, 0.7), (2.0, -0.5), (-1.0, 1.2)] {
            assert!(max_abs(&(cs.e_tilde(d) - k.e_matrix(tau + d, tau).unwrap())) < 1e-9);
        }
    }

    #[test]
    fn singular_a_rejected() {
        assert!(ConstantSystem::new(Matrix::zeros(1, 1), Matrix::zeros(1, 1), Matrix::zeros(1, 1)).is_err());
    }

    #[test]
    fn constant_paths_match_generic() {
        let sys = system(&["0.3", "0.2", "-0.1", "-0.4"], &["0.1", "0", "0.05", "-0.2"], &["sin(t)", "1"], &["0.1", "0", "0", "-0.2"], &["0.5", "k/10"]);
        let cs = ConstantSystem::from_system(&sys).unwrap();
        for tau in [0.0, 0.35, 1.8] {
            let v = ivp(sys.clone(), GridSpec::Uniform { h: 0.8, offset: 0.0, beta: 0.3 }, (0.0, 6.4), tau, &[1.0, -0.5]);
            for t in [tau, 0.9, 1.6, 2.0, 4.1, 6.4] {
                if t < tau {
                    continue;
                }
                let g = generic(&v, t);
                let prod = solve_constant(&cs, &v, t, ConstantForm::Product, &Numerics::default()).unwrap();
                let pow = solve_constant(&cs, &v, t, ConstantForm::Power, &Numerics::default()).unwrap();
                assert!((&prod - &g).amax() < 1e-8, "tau {tau} t {t}");
                assert!((&pow - &prod).amax() < 1e-10, "tau {tau} t {t}");
            }
        }
    }

    #[test]
    fn constant_free_motion() {
        let sys = system(&["-0.5"], &["0"], &["0"], &["0"], &["0"]);
        let cs = ConstantSystem::from_system(&sys).unwrap();
        let v = ivp(sys, GridSpec::Uniform { h: 1.0, offset: 0.0, beta: 0.5 }, (0.0, 4.0), 0.5, &[2.0]);
        let y = solve_constant(&cs, &v, 3.7, ConstantForm::Power, &Numerics::default()).unwrap()[0];
        assert_relative_eq!(y, 2.0 * (-0.5f64 * 3.2).exp(), epsilon = 1e-12);
    }

    #[test]
    fn power_form_rejects_irregular_geometry() {
        let sys = system(&["0.2"], &["0.1"], &["0"], &["0"], &["0"]);
        let cs = ConstantSystem::from_system(&sys).unwrap();
        let p = Partition::new(vec![0.0, 1.0, 2.5, 3.0, 4.0], vec![0.5, 1.2, 2.9, 3.5], 0).unwrap();
        let v = Ivp::new(sys, p, 0.0, Vector::from_element(1, 1.0)).unwrap();
        assert!(solve_constant(&cs, &v, 3.9, ConstantForm::Power, &Numerics::default()).is_err());
        assert!(solve_constant(&cs, &v, 3.9, ConstantForm::Product, &Numerics::default()).is_ok());
    }

    #[test]
    fn delayed_and_advanced_match_generic() {
        let sys = system(&["0.2*cos(t)", "0.1", "0", "-0.3"], &["0.2", "0", "0.1*sin(t)", "-0.25"], &["1", "exp(-t)"], &["-0.3", "0", "0.1", "0.2"], &["0.1", "-0.2"]);
        for tau in [0.0, 0.6] {
            let d = ivp(sys.clone(), GridSpec::Uniform { h: 1.0, offset: 0.0, beta: 0.0 }, (0.0, 5.0), tau, &[1.0, 2.0]);
            let a = ivp(sys.clone(), GridSpec::Uniform { h: 1.0, offset: 0.0, beta: 1.0 }, (0.0, 5.0), tau, &[1.0, 2.0]);
            for t in [tau, 0.9, 1.0, 2.5, 4.99, 5.0] {
                let yd = solve_delayed(&d, t, &Numerics::default()).unwrap();
                assert!((yd - generic(&d, t)).amax() < 1e-8);
                let ya = solve_advanced(&a, t, &Numerics::default()).unwrap();
                assert!((ya - generic(&a, t)).amax() < 1e-8);
            }
            assert!(solve_delayed(&a, 1.0, &Numerics::default()).is_err());
            assert!(solve_advanced(&d, 1.0, &Numerics::default()).is_err());
        }
    }

    #[test]
    fn b_only_matches_generic_and_pure_impulses() {
        let sys = system(&["0"], &["sin(2*pi*t)"], &["1"], &["-1.5"], &["0.5"]);
        let v = ivp(sys, GridSpec::Uniform { h: 0.2, offset: 0.0, beta: 0.2 }, (0.0, 2.0), 0.0, &[1.0]);
        for t in [0.1, 0.2, 0.73, 1.99, 2.0] {
            let y = solve_b_only(&v, t, &Numerics::default()).unwrap()[0];
            assert!((y - generic(&v, t)[0]).abs() < 1e-9);
        }
        let sys = system(&["0"], &["0"], &["0"], &["-0.5"], &["0"]);
        let v = ivp(sys, GridSpec::Uniform { h: 1.0, offset: 0.0, beta: 0.5 }, (0.0, 4.0), 0.0, &[3.0]);
        assert_relative_eq!(solve_b_only(&v, 3.5, &Numerics::default()).unwrap()[0], 3.0 * 0.125, epsilon = 1e-15);
    }
}
