//! Per-interval matrix `W(t, s) = E(t, γ(s)) E⁻¹(s, γ(s))` and the global
//! fundamental matrix `W(t, τ)` of the homogeneous impulsive system.
//!
//! Products are accumulated left to right: the factor for the latest interval
//! is leftmost, matching `∏_{j=a}^{b}` read as `T_b ⋯ T_a`.
//!
//! The initial time may sit past its anchor; in that case the anchor of the
//! first interval is replaced by `τ` itself.

use std::sync::OnceLock;

use crate::coeffs::ImpulseSequence;
use crate::error::{Error, Result};
use crate::grid::Partition;
use crate::kernel::{invert, KernelEngine};
use crate::linalg::{identity, Matrix, Vector};

/// Which one-sided value to report at a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Value after the jump (the solution is right-continuous).
    Post,
    /// `lim_{s → t^-}`.
    Left,
}

/// Interval whose formula evaluates `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Slot {
    /// Local interval index; equals `intervals()` for the post-jump value at the window end.
    pub k: usize,
    pub t: f64,
}

#[derive(Debug)]
pub struct FundamentalEngine {
    kernel: KernelEngine,
    partition: Partition,
    impulses: ImpulseSequence,
    /// `E⁻¹(t_k, ζ_k)`.
    node_inverse: Vec<OnceLock<Matrix>>,
    /// `(I + C_{k+1}) W(t_{k+1}, t_k)`.
    node_step: Vec<OnceLock<Matrix>>,
}

impl FundamentalEngine {
    pub fn new(kernel: KernelEngine, partition: Partition, impulses: ImpulseSequence) -> Result<Self> {
        if impulses.dim() != kernel.dim() {
            return Err(Error::Dimension(format!(
                "impulses are {}-dimensional but A is {}x{}",
                impulses.dim(),
                kernel.dim(),
                kernel.dim()
            )));
        }
        let m = partition.intervals();
        Ok(FundamentalEngine {
            kernel,
            partition,
            impulses: impulses.without_d(),
            node_inverse: (0..m).map(|_| OnceLock::new()).collect(),
            node_step: (0..m).map(|_| OnceLock::new()).collect(),
        })
    }

    pub fn kernel(&self) -> &KernelEngine {
        &self.kernel
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn dim(&self) -> usize {
        self.kernel.dim()
    }

    /// `I + C_k` for the node with local index `i`.
    pub fn jump(&self, i: usize) -> Result<Matrix> {
        let c = self.impulses.c_at(self.partition.global_index(i))?;
        Ok(identity(self.dim()) + c)
    }

    /// Anchor used when the motion on interval `k` starts at `s`.
    pub(crate) fn anchor_from(&self, k: usize, s: f64) -> f64 {
        self.partition.anchor(k).max(s)
    }

    fn cached_inverse(&self, k: usize) -> Result<Matrix> {
        if let Some(m) = self.node_inverse[k].get() {
            return Ok(m.clone());
        }
        let (t_k, z) = (self.partition.node(k), self.partition.anchor(k));
        let e = self.kernel.e_matrix(t_k, z)?;
        let inv = invert(&e, "E", t_k, z)?;
        Ok(self.node_inverse[k].get_or_init(|| inv).clone())
    }

    /// `W(t, s)` on interval `k`, for `s ∈ [t_k, t_{k+1})` and `t ∈ [t_k, t_{k+1}]`.
    pub(crate) fn local_in(&self, k: usize, t: f64, s: f64) -> Result<Matrix> {
        if t == s {
            return Ok(identity(self.dim()));
        }
        let z = self.anchor_from(k, s);
        let inv = if s == self.partition.node(k) {
            self.cached_inverse(k)?
        } else {
            invert(&self.kernel.e_matrix(s, z)?, "E", s, z)?
        };
        Ok(self.kernel.e_matrix(t, z)? * inv)
    }

    /// `W(t, s)` for `t` and `s` in the same interval. `t` may also be the
    /// right node of the interval of `s`, giving the left limit there.
    pub fn w_local(&self, t: f64, s: f64) -> Result<Matrix> {
        let k = self.partition.locate(s)?;
        self.partition.locate(t)?;
        let (lo, hi) = (self.partition.node(k), self.partition.node(k + 1));
        if s == hi || t < lo || t > hi {
            return Err(Error::InvalidArgument(format!(
                "t = {t} and s = {s} are not in the same interval"
            )));
        }
        self.local_in(k, t, s)
    }

    /// `(I + C_{k+1}) W(t_{k+1}, t_k)`.
    pub fn node_step(&self, k: usize) -> Result<Matrix> {
        if let Some(m) = self.node_step[k].get() {
            return Ok(m.clone());
        }
        let p = &self.partition;
        let m = self.jump(k + 1)? * self.local_in(k, p.node(k + 1), p.node(k))?;
        Ok(self.node_step[k].get_or_init(|| m).clone())
    }

    /// Interval index of the formula that evaluates `t` from the given side.
    pub(crate) fn slot(&self, t: f64, side: Side) -> Result<Slot> {
        let p = &self.partition;
        p.locate(t)?;
        let last = p.intervals();
        let k = if t == p.window().1 { last } else { p.locate(t)? };
        let k = match side {
            Side::Left if k > 0 && t == p.node(k) => k - 1,
            _ => k,
        };
        Ok(Slot { k, t })
    }

    /// `W(t, t_k)` where `k = slot.k`; identity at the slot's own node.
    pub(crate) fn w_slot_node(&self, slot: Slot) -> Result<Matrix> {
        if slot.k == self.partition.intervals() || slot.t == self.partition.node(slot.k) {
            return Ok(identity(self.dim()));
        }
        self.local_in(slot.k, slot.t, self.partition.node(slot.k))
    }

    fn ordered(&self, t: f64, tau: f64) -> Result<()> {
        self.partition.locate(t)?;
        self.partition.locate(tau)?;
        if t < tau {
            return Err(Error::InvalidArgument(format!(
                "only forward evaluation is supported (t = {t} < tau = {tau})"
            )));
        }
        Ok(())
    }

    pub(crate) fn w_slot(&self, slot: Slot, tau: f64) -> Result<Matrix> {
        let p = &self.partition;
        if slot.t == tau {
            return Ok(identity(self.dim()));
        }
        let k_tau = p.locate(tau)?;
        if slot.k == k_tau {
            return self.local_in(k_tau, slot.t, tau);
        }
        let mut acc = self.w_slot_node(slot)?;
        for j in (k_tau + 1..slot.k).rev() {
            acc *= self.node_step(j)?;
        }
        if tau == p.node(k_tau) {
            acc *= self.node_step(k_tau)?;
        } else {
            acc = acc * self.jump(k_tau + 1)? * self.local_in(k_tau, p.node(k_tau + 1), tau)?;
        }
        Ok(acc)
    }

    /// Global fundamental matrix `W(t, τ)` for `τ ≤ t`. At a node the jump is
    /// included; at the window end this is the last node's jump.
    pub fn w_global(&self, t: f64, tau: f64) -> Result<Matrix> {
        self.w_side(t, tau, Side::Post)
    }

    /// `W(t, τ)` from the chosen side of `t`.
    pub fn w_side(&self, t: f64, tau: f64, side: Side) -> Result<Matrix> {
        self.ordered(t, tau)?;
        let slot = self.slot(t, side)?;
        self.w_slot(slot, tau)
    }

    pub fn solve_homogeneous(&self, tau: f64, w0: &Vector, t: f64) -> Result<Vector> {
        if w0.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "initial vector has {} entries, expected {}",
                w0.len(),
                self.dim()
            )));
        }
        Ok(self.w_global(t, tau)? * w0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::{Indexed, MatrixFunction};
    use crate::grid::GridSpec;
    use crate::linalg::{expm, max_abs};
    use crate::system::Numerics;
    use approx::assert_relative_eq;

    fn scalar_engine(a: &str, b: &str, c: &str, grid: GridSpec, window: (f64, f64)) -> FundamentalEngine {
        let kernel = KernelEngine::new(
            MatrixFunction::scalar(a).unwrap(),
            MatrixFunction::scalar(b).unwrap(),
            &Numerics::default(),
        )
        .unwrap();
        let imp = ImpulseSequence::new(1, Indexed::family(&[c]).unwrap(), Indexed::Zero).unwrap();
        FundamentalEngine::new(kernel, Partition::build(&grid, window).unwrap(), imp).unwrap()
    }

    fn floor_grid() -> GridSpec {
        GridSpec::Uniform {
            h: 1.0,
            offset: 0.0,
            beta: 0.0,
        }
    }

    #[test]
    fn identity_at_equal_times() {
        let f = scalar_engine("0.3", "0.2", "0.5", floor_grid(), (0.0, 4.0));
        assert_eq!(f.w_global(1.5, 1.5).unwrap(), identity(1));
        assert_eq!(f.w_local(2.25, 2.25).unwrap(), identity(1));
    }

    #[test]
    fn classical_case_reduces_to_transition() {
        let a = MatrixFunction::parse(2, &["0.1", "1", "-1", "-0.2"]).unwrap();
        let kernel = KernelEngine::new(a, MatrixFunction::zero(2), &Numerics::default()).unwrap();
        let p = Partition::build(&GridSpec::Uniform { h: 0.7, offset: 0.0, beta: 0.4 }, (0.0, 5.0)).unwrap();
        let f = FundamentalEngine::new(kernel, p, ImpulseSequence::none(2)).unwrap();
        let a0 = Matrix::from_row_slice(2, 2, &[0.1, 1.0, -1.0, -0.2]);
        for (t, tau) in [(3.3, 0.2), (4.9, 1.4), (0.6, 0.1)] {
            let w = f.w_global(t, tau).unwrap();
            assert!(max_abs(&(w - expm(&(&a0 * (t - tau))))) < 1e-10);
        }
    }

    #[test]
    fn geometric_example_node_values() {
        let (alpha, beta): (f64, f64) = (0.9, 1.2);
        let f = scalar_engine("0", "-0.1", "0.2", floor_grid(), (0.0, 10.0));
        for n in 1..=10 {
            let w = f.w_global(n as f64, 0.0).unwrap()[(0, 0)];
            assert_relative_eq!(w, (alpha * beta).powi(n), epsilon = 1e-12);
        }
        let y = f.solve_homogeneous(0.0, &Vector::from_element(1, 1.8), 2.5).unwrap()[0];
        assert_relative_eq!(y, 1.08f64.powi(2) * (1.0 - 0.1 * 0.5) * 1.8, epsilon = 1e-12);
    }

    #[test]
    fn left_limit_and_jump() {
        let f = scalar_engine("0", "-0.1", "0.2", floor_grid(), (0.0, 10.0));
        let left = f.w_side(3.0, 0.0, Side::Left).unwrap()[(0, 0)];
        let post = f.w_side(3.0, 0.0, Side::Post).unwrap()[(0, 0)];
        assert_relative_eq!(post, 1.2 * left, epsilon = 1e-13);
        let eps = 1e-7;
        let near = f.w_global(3.0 - eps, 0.0).unwrap()[(0, 0)];
        assert!((near - left).abs() < 1e-6);
        // window end includes the last jump
        let end = f.w_global(10.0, 0.0).unwrap()[(0, 0)];
        assert_relative_eq!(end, 1.08f64.powi(10), epsilon = 1e-12);
    }

    #[test]
    fn impulse_product_law() {
        let f = scalar_engine("1/(t+2)", "-1/(t+2)", "-2.1", floor_grid(), (0.0, 6.0));
        for t in [0.5, 1.0, 3.2, 3.999, 5.5] {
            let w = f.w_global(t, 0.0).unwrap()[(0, 0)];
            let expected = (-1.1f64).powi(t.floor() as i32);
            assert!((w - expected).abs() < 1e-9, "t = {t}: {w} vs {expected}");
        }
    }

    #[test]
    fn mid_interval_start_uses_tau_as_anchor() {
        // with ζ = t_k < τ the motion on the first interval is E(t, τ)
        let f = scalar_engine("0.4", "0.3", "0", floor_grid(), (0.0, 3.0));
        let w = f.w_global(0.9, 0.5).unwrap()[(0, 0)];
        let e = f.kernel().e_matrix(0.9, 0.5).unwrap()[(0, 0)];
        assert_relative_eq!(w, e, epsilon = 1e-14);
    }

    #[test]
    fn node_cocycle() {
        let f = scalar_engine("0.2*cos(t)", "0.3", "-0.4", GridSpec::Uniform { h: 1.0, offset: 0.0, beta: 0.5 }, (0.0, 8.0));
        let (a, b, c) = (1.0, 4.0, 7.0);
        let lhs = f.w_global(c, a).unwrap();
        let rhs = f.w_global(c, b).unwrap() * f.w_global(b, a).unwrap();
        assert!(max_abs(&(lhs - rhs)) < 1e-8);
    }

    #[test]
    fn continuity_without_impulses() {
        let f = scalar_engine("0.2*t", "0.25", "0", GridSpec::Uniform { h: 1.0, offset: 0.0, beta: 0.7 }, (0.0, 5.0));
        for node in [1.0, 2.0, 3.0, 4.0] {
            let l = f.w_side(node, 0.0, Side::Left).unwrap();
            let r = f.w_side(node, 0.0, Side::Post).unwrap();
            assert!(max_abs(&(l - r)) < 1e-8);
        }
    }

    #[test]
    fn backward_and_mismatched_requests_fail() {
        let f = scalar_engine("0", "0", "0", floor_grid(), (0.0, 3.0));
        assert!(f.w_global(0.5, 1.0).is_err());
        assert!(f.w_local(1.5, 0.5).is_err());
        assert!(f.w_global(4.0, 0.0).is_err());
        assert!(f.w_local(1.0, 0.5).is_ok());
    }
}
