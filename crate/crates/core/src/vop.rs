//! Variation-of-parameters solution of the nonhomogeneous impulsive system,
//! its node recursion and the Green-kernel form.

use std::io::Write;
use std::sync::OnceLock;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fundamental::{FundamentalEngine, Side, Slot};
use crate::kernel::{H3Report, KernelEngine};
use crate::linalg::{Matrix, Vector};
use crate::system::{Ivp, Numerics};

/// What to do when the invertibility hypothesis fails.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum H3Policy {
    #[default]
    Enforce,
    /// Proceed anyway; singular `E(t_k, ζ_k)` is still an error when hit.
    Force,
}

#[derive(Debug)]
pub struct VopSolver {
    ivp: Ivp,
    engine: FundamentalEngine,
    h3: H3Report,
    /// `∫_{t_k}^{ζ_k} Φ(t_k, s) f(s) ds`.
    alpha_plus: Vec<OnceLock<Vector>>,
    /// `(I + C_{k+1}) ∫_{ζ_k}^{t_{k+1}} Φ(t_{k+1}, s) f(s) ds`.
    alpha_minus: Vec<OnceLock<Vector>>,
}

/// Post-jump value at a node.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeValue {
    pub index: i64,
    pub t: f64,
    pub y: Vec<f64>,
}

impl VopSolver {
    pub fn new(ivp: Ivp, numerics: &Numerics, policy: H3Policy) -> Result<Self> {
        let sys = &ivp.system;
        let kernel = KernelEngine::new(sys.a.clone(), sys.b.clone(), numerics)?;
        let h3 = kernel.check_h3(&ivp.partition)?;
        if !h3.pass && policy == H3Policy::Enforce {
            return Err(Error::Hypothesis(h3.summary()));
        }
        let engine = FundamentalEngine::new(kernel, ivp.partition.clone(), sys.impulses.clone())?;
        let m = ivp.partition.intervals();
        Ok(VopSolver {
            ivp,
            engine,
            h3,
            alpha_plus: (0..m).map(|_| OnceLock::new()).collect(),
            alpha_minus: (0..m).map(|_| OnceLock::new()).collect(),
        })
    }

    pub fn ivp(&self) -> &Ivp {
        &self.ivp
    }

    pub fn fundamental(&self) -> &FundamentalEngine {
        &self.engine
    }

    pub fn h3_report(&self) -> &H3Report {
        &self.h3
    }

    fn dim(&self) -> usize {
        self.ivp.dim()
    }

    fn check_time(&self, t: f64) -> Result<()> {
        let (_, hi) = self.ivp.partition.window();
        if !(t >= self.ivp.tau && t <= hi) {
            return Err(Error::OutsideWindow {
                t,
                lo: self.ivp.tau,
                hi,
            });
        }
        Ok(())
    }

    /// `∫_a^b Φ(c, s) f(s) ds` with `c ∈ {a, b}`.
    fn forcing(&self, c: f64, a: f64, b: f64) -> Result<Vector> {
        let n = self.dim();
        let f = &self.ivp.system.f;
        if a == b || f.is_zero() {
            return Ok(Vector::zeros(n));
        }
        let m = self
            .engine
            .kernel()
            .transition()
            .integrate_weighted(self.engine.kernel().quadrature(), c, a, b, 1, |s| {
                f.eval(s).map(|v| Matrix::from_column_slice(n, 1, v.as_slice()))
            })?;
        Ok(Vector::from_column_slice(m.as_slice()))
    }

    fn alpha_plus(&self, k: usize) -> Result<Vector> {
        if let Some(v) = self.alpha_plus[k].get() {
            return Ok(v.clone());
        }
        let p = &self.ivp.partition;
        let v = self.forcing(p.node(k), p.node(k), p.anchor(k))?;
        Ok(self.alpha_plus[k].get_or_init(|| v).clone())
    }

    fn alpha_minus(&self, k: usize) -> Result<Vector> {
        if let Some(v) = self.alpha_minus[k].get() {
            return Ok(v.clone());
        }
        let p = &self.ivp.partition;
        let next = p.node(k + 1);
        let v = self.engine.jump(k + 1)? * self.forcing(next, p.anchor(k), next)?;
        Ok(self.alpha_minus[k].get_or_init(|| v).clone())
    }

    /// Start-of-motion data: interval of `τ`, its effective anchor and
    /// `y0 + ∫_τ^{ζ} Φ(τ, s) f(s) ds`.
    fn start(&self) -> Result<(usize, f64, Vector)> {
        let tau = self.ivp.tau;
        let k = self.ivp.partition.locate(tau)?;
        let z = self.engine.anchor_from(k, tau);
        let lifted = &self.ivp.y0 + self.forcing(tau, tau, z)?;
        Ok((k, z, lifted))
    }

    /// Delayed-part contribution of interval `j` seen from `t_{j+1}`.
    fn delayed_term(&self, j: usize, k_tau: usize, z0: f64) -> Result<Vector> {
        let p = &self.ivp.partition;
        if j > k_tau || self.ivp.tau == p.node(k_tau) {
            return self.alpha_minus(j);
        }
        let next = p.node(j + 1);
        Ok(self.engine.jump(j + 1)? * self.forcing(next, z0, next)?)
    }

    fn value(&self, slot: Slot) -> Result<Vector> {
        let p = &self.ivp.partition;
        let tau = self.ivp.tau;
        if slot.t == tau {
            return Ok(self.ivp.y0.clone());
        }
        let (k_tau, z0, lifted) = self.start()?;
        let (k, t) = (slot.k, slot.t);
        if k == k_tau {
            return Ok(self.engine.w_slot(slot, tau)? * lifted + self.forcing(t, z0, t)?);
        }
        let mut g = self.engine.w_slot_node(slot)?;
        let mut y = Vector::zeros(self.dim());
        if t != p.node(k) {
            y += &g * self.alpha_plus(k)? + self.forcing(t, p.anchor(k), t)?;
        }
        let impulses = &self.ivp.system.impulses;
        for r in (k_tau + 1..=k).rev() {
            // g = W(t, t_r)
            y += &g * impulses.d_at(p.global_index(r))?;
            if r < k {
                y += &g * self.alpha_plus(r)?;
            }
            y += &g * self.delayed_term(r - 1, k_tau, z0)?;
            if r - 1 > k_tau {
                g *= self.engine.node_step(r - 1)?;
            } else if tau == p.node(k_tau) {
                g *= self.engine.node_step(k_tau)?;
            } else {
                g = g * self.engine.jump(r)? * self.engine.local_in(k_tau, p.node(r), tau)?;
            }
        }
        // g = W(t, τ)
        Ok(y + g * lifted)
    }

    /// `y(t)` for `τ ≤ t`; right-continuous at nodes.
    pub fn solve(&self, t: f64) -> Result<Vector> {
        self.solve_side(t, Side::Post)
    }

    pub fn solve_side(&self, t: f64, side: Side) -> Result<Vector> {
        self.check_time(t)?;
        let slot = self.engine.slot(t, side)?;
        self.value(slot)
    }

    /// Node values `y(t_k)` from the first node at or after `τ` up to local node `up_to`,
    /// by the one-step recursion.
    pub fn discrete_solution(&self, up_to: usize) -> Result<Vec<NodeValue>> {
        let p = &self.ivp.partition;
        if up_to > p.intervals() {
            return Err(Error::InvalidArgument(format!(
                "node {up_to} is past the last node {}",
                p.intervals()
            )));
        }
        let tau = self.ivp.tau;
        let (k_tau, z0, lifted) = self.start()?;
        let mut out = Vec::new();
        let push = |out: &mut Vec<NodeValue>, i: usize, y: &Vector| {
            out.push(NodeValue {
                index: p.global_index(i),
                t: p.node(i),
                y: y.as_slice().to_vec(),
            })
        };
        let mut y;
        let first;
        if tau == p.node(k_tau) {
            y = self.ivp.y0.clone();
            first = k_tau;
        } else {
            if up_to <= k_tau {
                return Ok(out);
            }
            let next = k_tau + 1;
            let w = self.engine.jump(next)? * self.engine.local_in(k_tau, p.node(next), tau)?;
            y = w * lifted + self.delayed_term(k_tau, k_tau, z0)? + self.ivp.system.impulses.d_at(p.global_index(next))?;
            first = next;
        }
        if up_to < first {
            return Ok(out);
        }
        push(&mut out, first, &y);
        for k in first..up_to {
            let d = self.ivp.system.impulses.d_at(p.global_index(k + 1))?;
            y = self.engine.node_step(k)? * (&y + self.alpha_plus(k)?) + self.alpha_minus(k)? + d;
            push(&mut out, k + 1, &y);
        }
        Ok(out)
    }

    /// Green kernel `W̃(t, s) = L · Φ(c, s)` split into its factors, plus whether
    /// `Φ(t, s)` has to be subtracted (advanced part of the current interval
    /// beyond `t`).
    fn green_factors(&self, slot: Slot, s: f64) -> Result<(Matrix, f64, bool)> {
        let p = &self.ivp.partition;
        let tau = self.ivp.tau;
        let t = slot.t;
        let k_tau = p.locate(tau)?;
        let ks = if slot.k < p.intervals() && s >= p.node(slot.k) {
            slot.k
        } else {
            p.locate(s)?
        };
        let base = if ks == k_tau { tau } else { p.node(ks) };
        let z = self.engine.anchor_from(ks, base);
        let current = ks == slot.k;
        if current && s > t {
            if s > z {
                return Err(Error::InvalidArgument(format!(
                    "s = {s} is past both t = {t} and the anchor {z}"
                )));
            }
            return Ok((self.engine.w_side(t, base, Side::Post)?, base, true));
        }
        if s <= z {
            return Ok((self.engine.w_side(t, base, Side::Post)?, base, false));
        }
        if current {
            return Ok((crate::linalg::identity(self.dim()), t, false));
        }
        let next = p.node(ks + 1);
        let l = self.engine.w_side(t, next, Side::Post)? * self.engine.jump(ks + 1)?;
        Ok((l, next, false))
    }

    /// `W̃(t, s)` for `τ ≤ s ≤ t`. When `t` precedes the anchor of its interval,
    /// `s` may also range over `(t, ζ]`, where the kernel is
    /// `W(t, t_k) Φ(t_k, s) − Φ(t, s)`.
    pub fn green_kernel(&self, t: f64, s: f64) -> Result<Matrix> {
        self.check_time(t)?;
        if s < self.ivp.tau {
            return Err(Error::OutsideWindow {
                t: s,
                lo: self.ivp.tau,
                hi: t,
            });
        }
        let slot = self.engine.slot(t, Side::Post)?;
        let transition = self.engine.kernel().transition();
        let (l, c, subtract) = self.green_factors(slot, s)?;
        let mut g = l * transition.phi(c, s)?;
        if subtract {
            g -= transition.phi(t, s)?;
        }
        Ok(g)
    }

    /// Support of `s ↦ W̃(t, s)` split where the kernel changes branch.
    fn green_pieces(&self, slot: Slot) -> Result<Vec<(f64, f64)>> {
        let p = &self.ivp.partition;
        let tau = self.ivp.tau;
        let k_tau = p.locate(tau)?;
        let mut pieces = Vec::new();
        let mut push = |a: f64, b: f64| {
            if b > a {
                pieces.push((a, b));
            }
        };
        for j in k_tau..=slot.k.min(p.intervals() - 1) {
            let base = if j == k_tau { tau } else { p.node(j) };
            let z = self.engine.anchor_from(j, base);
            if j < slot.k {
                push(base, z);
                push(z, p.node(j + 1));
            } else if slot.t > base {
                let t = slot.t;
                push(base, z.min(t));
                push(z.min(t), t);
                push(t, z);
            }
        }
        Ok(pieces)
    }

    /// `y(t) = W(t, τ) y0 + ∫ W̃(t, s) f(s) ds + Σ W(t, t_r) D_r`, integrating the
    /// kernel pointwise.
    pub fn solve_via_green(&self, t: f64) -> Result<Vector> {
        self.check_time(t)?;
        let p = &self.ivp.partition;
        let tau = self.ivp.tau;
        let slot = self.engine.slot(t, Side::Post)?;
        let mut y = self.engine.w_global(t, tau)? * &self.ivp.y0;
        let impulses = &self.ivp.system.impulses;
        for (i, &node) in p.nodes().iter().enumerate() {
            if node > tau && node <= t {
                y += self.engine.w_global(t, node)? * impulses.d_at(p.global_index(i))?;
            }
        }
        let f = &self.ivp.system.f;
        if f.is_zero() || t == tau {
            return Ok(y);
        }
        let transition = self.engine.kernel().transition();
        let quad = self.engine.kernel().quadrature();
        for (a, b) in self.green_pieces(slot)? {
            let mid = 0.5 * (a + b);
            let (l, c, subtract) = self.green_factors(slot, mid)?;
            for (s, w) in quad.points(a, b) {
                let mut kernel = &l * transition.phi(c, s)?;
                if subtract {
                    kernel -= transition.phi(t, s)?;
                }
                y += kernel * f.eval(s)? * w;
            }
        }
        Ok(y)
    }

    /// Samples at increasing times in `[τ, window end]`. Nodes after `τ` yield
    /// a left-limit row followed by the post-jump row.
    pub fn sample_trajectory(&self, times: &[f64]) -> Result<Trajectory> {
        self.sample_trajectory_with(times, 1)
    }

    /// As [`VopSolver::sample_trajectory`], spreading evaluations over `threads` workers.
    pub fn sample_trajectory_with(&self, times: &[f64], threads: usize) -> Result<Trajectory> {
        if times.windows(2).any(|w| !(w[0] <= w[1])) {
            return Err(Error::InvalidArgument("sample times must be sorted".into()));
        }
        for &t in times {
            self.check_time(t)?;
        }
        let threads = threads.clamp(1, times.len().max(1));
        let rows: Vec<Vec<TrajectoryPoint>> = if threads == 1 {
            times.iter().map(|&t| self.sample_at(t)).collect::<Result<_>>()?
        } else {
            let chunk = times.len().div_ceil(threads);
            std::thread::scope(|scope| {
                let handles: Vec<_> = times
                    .chunks(chunk)
                    .map(|part| {
                        scope.spawn(move || part.iter().map(|&t| self.sample_at(t)).collect::<Result<Vec<_>>>())
                    })
                    .collect();
                let mut all = Vec::with_capacity(times.len());
                for h in handles {
                    all.extend(h.join().expect("sampling worker panicked")?);
                }
                Ok::<_, Error>(all)
            })?
        };
        Ok(Trajectory {
            dim: self.dim(),
            points: rows.into_iter().flatten().collect(),
        })
    }

    fn sample_at(&self, t: f64) -> Result<Vec<TrajectoryPoint>> {
        let p = &self.ivp.partition;
        let node = p.node_at(t);
        let post = self.solve(t)?;
        let post_k = match node {
            Some(i) => p.global_index(i),
            None => p.global_index(p.locate(t)?),
        };
        let point = |y: &Vector, k: i64, is_left_limit: bool| TrajectoryPoint {
            t,
            y: y.as_slice().to_vec(),
            k,
            is_node: node.is_some(),
            is_left_limit,
        };
        match node {
            Some(i) if t > self.ivp.tau => {
                let left = self.solve_side(t, Side::Left)?;
                let (c, d) = self.ivp.system.impulses.impulse_at(p.global_index(i))?;
                let expected = &left + c * &left + d;
                let residual = (&post - &expected).amax();
                if !(residual <= 1e-8 * (1.0 + post.amax())) {
                    return Err(Error::JumpMismatch { t, residual });
                }
                Ok(vec![point(&left, p.global_index(i - 1), true), point(&post, post_k, false)])
            }
            _ => Ok(vec![point(&post, post_k, false)]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub y: Vec<f64>,
    /// Global index of the interval the formula was evaluated on; for
    /// post-jump rows at a node this is the node's index.
    pub k: i64,
    pub is_node: bool,
    pub is_left_limit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub dim: usize,
    pub points: Vec<TrajectoryPoint>,
}

impl Trajectory {
    pub fn csv_header(dim: usize) -> String {
        let mut cols = vec!["t".to_string()];
        cols.extend((1..=dim).map(|i| format!("y_{i}")));
        cols.extend(["k", "is_node", "is_left_limit"].map(String::from));
        cols.join(",")
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", Self::csv_header(self.dim))?;
        for p in &self.points {
            write!(out, "{}", fmt_f64(p.t))?;
            for v in &p.y {
                write!(out, ",{}", fmt_f64(*v))?;
            }
            writeln!(out, ",{},{},{}", p.k, p.is_node as u8, p.is_left_limit as u8)?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("trajectory serialises")
    }
}

/// 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn default_solver(ivp: &Ivp) -> Result<VopSolver> {
    VopSolver::new(ivp.clone(), &Numerics::default(), H3Policy::Enforce)
}

/// One-shot [`VopSolver::solve`] with default numerics.
pub fn solve(ivp: &Ivp, t: f64) -> Result<Vector> {
    default_solver(ivp)?.solve(t)
}

pub fn discrete_solution(ivp: &Ivp, up_to: usize) -> Result<Vec<NodeValue>> {
    default_solver(ivp)?.discrete_solution(up_to)
}

pub fn green_kernel(ivp: &Ivp, t: f64, s: f64) -> Result<Matrix> {
    default_solver(ivp)?.green_kernel(t, s)
}

pub fn solve_via_green(ivp: &Ivp, t: f64) -> Result<Vector> {
    default_solver(ivp)?.solve_via_green(t)
}

pub fn sample_trajectory(ivp: &Ivp, times: &[f64]) -> Result<Trajectory> {
    default_solver(ivp)?.sample_trajectory(times)
}
