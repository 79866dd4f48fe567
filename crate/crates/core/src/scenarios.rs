//! Named worked examples with reference solutions and the behaviour
//! classifier for the scalar geometric example.
//!
//! | id | equation |
//! |----|----------|
//! | `s1-geometric` | `x' = (α−1) x([t])`, `x(n) = β x(n⁻)` |
//! | `s2-impulse-product` | `z' = a(t)(z − z([t]))`, `z(k) = c z(k⁻)` |
//! | `s3-cooke-yorke` | `z' = a(t)(z − z(γ(t))) + f(t)`, `z(t_k) = z(t_k⁻) + D_k` |
//! | `s4-sine` | `z' = sin(2πt) z([t/h]h + βh) + 1`, `z(kh) = −z(kh⁻)/2 + 1/2` |

use std::f64::consts::PI;
use std::fmt;
use std::sync::OnceLock;

use serde::Serialize;

use crate::coeffs::{Expression, ImpulseSequence, Indexed, MatrixFunction, VectorFunction};
use crate::error::{Error, Result};
use crate::grid::{GridSpec, Partition};
use crate::kernel::KernelEngine;
use crate::linalg::{Matrix, Vector};
use crate::oracle::{h2_check, picard_solve, PicardConfig};
use crate::system::{Ivp, LinearSystem, Numerics};
use crate::vop::{H3Policy, VopSolver};

pub const SCENARIO_IDS: [&str; 4] = ["s1-geometric", "s2-impulse-product", "s3-cooke-yorke", "s4-sine"];

fn floor_grid() -> GridSpec {
    GridSpec::Uniform {
        h: 1.0,
        offset: 0.0,
        beta: 0.0,
    }
}

fn scalar(v: f64) -> Vector {
    Vector::from_vec(vec![v])
}

fn number(key: &str, value: &str) -> Result<f64> {
    value
        .trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::InvalidArgument(format!("parameter `{key}` expects a number, got `{value}`")))
}

fn flag(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(Error::InvalidArgument(format!("parameter `{key}` expects a boolean, got `{other}`"))),
    }
}

fn expression(value: &str) -> Result<String> {
    Expression::parse(value)?;
    Ok(value.to_string())
}

fn unknown(id: &str, key: &str) -> Error {
    Error::InvalidArgument(format!("scenario `{id}` has no parameter `{key}`"))
}

/// Index of the slot holding `t`: the interval, or the last node at the window end.
fn slot_index(p: &Partition, t: f64) -> Result<usize> {
    if t == p.window().1 {
        Ok(p.intervals())
    } else {
        p.locate(t)
    }
}

#[derive(Debug, Clone)]
enum Reference {
    Geometric { alpha: f64, beta: f64, x0: f64 },
    Product { c: f64, z0: f64, impulsive: bool },
    CookeYorke(Box<CookeYorkeReference>),
    Sine { h: f64, beta: f64, z0: f64 },
}

/// A worked example: its initial value problem and, where known, an exact
/// or independently computed reference.
#[derive(Debug, Clone)]
pub struct Scenario {
    id: &'static str,
    ivp: Ivp,
    notes: String,
    reference: Option<Reference>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub samples: usize,
    pub max_closed_form_error: Option<f64>,
    pub max_oracle_deviation: Option<f64>,
    /// Why the oracle was skipped, if it was.
    pub oracle_note: Option<String>,
}

impl Scenario {
    pub fn id(&self) -> &'static str {
        self.id
    }

    pub fn ivp(&self) -> &Ivp {
        &self.ivp
    }

    pub fn notes(&self) -> &str {
        &self.notes
    }

    pub fn has_closed_form(&self) -> bool {
        self.reference.is_some()
    }

    /// Reference value at `t`, post-jump at nodes.
    pub fn closed_form(&self, t: f64) -> Result<Option<Vector>> {
        let p = &self.ivp.partition;
        let (_, hi) = p.window();
        if !(t >= self.ivp.tau && t <= hi) {
            return Err(Error::OutsideWindow { t, lo: self.ivp.tau, hi });
        }
        let value = match &self.reference {
            None => return Ok(None),
            Some(Reference::Geometric { alpha, beta, x0 }) => {
                let n = t.floor();
                (alpha * beta).powi(n as i32) * (1.0 + (alpha - 1.0) * (t - n)) * x0
            }
            Some(Reference::Product { c, z0, impulsive }) => {
                if *impulsive {
                    let count = p.nodes().iter().filter(|&&tk| self.ivp.tau < tk && tk <= t).count();
                    c.powi(count as i32) * z0
                } else {
                    *z0
                }
            }
            Some(Reference::CookeYorke(r)) => r.eval(&self.ivp, t)?,
            Some(Reference::Sine { h, beta, z0 }) => sine_reference(p, *h, *beta, *z0, t)?,
        };
        Ok(Some(scalar(value)))
    }

    pub fn solver(&self, numerics: &Numerics, policy: H3Policy) -> Result<VopSolver> {
        VopSolver::new(self.ivp.clone(), numerics, policy)
    }

    /// `count` evenly spaced times covering `[τ, window end]`.
    pub fn sample_times(&self, count: usize) -> Vec<f64> {
        let (_, hi) = self.ivp.partition.window();
        linspace(self.ivp.tau, hi, count)
    }

    /// Largest deviation of `solver` from the reference over `times`, and from
    /// the Picard oracle over up to `oracle_points` of them.
    pub fn compare(&self, solver: &VopSolver, times: &[f64], oracle_points: usize) -> Result<Comparison> {
        let mut max_cf: Option<f64> = None;
        for &t in times {
            if let Some(reference) = self.closed_form(t)? {
                let err = (solver.solve(t)? - reference).amax();
                max_cf = Some(max_cf.map_or(err, |m| m.max(err)));
            }
        }
        let mut max_oracle = None;
        let mut oracle_note = None;
        let stride = if oracle_points == 0 {
            0
        } else {
            times.len().div_ceil(oracle_points).max(1)
        };
        if stride > 0 {
            let h2 = h2_check(&self.ivp)?;
            if !h2.pass {
                oracle_note = Some(format!("{}; oracle run without the contraction gate", h2.summary()));
            }
            let cfg = PicardConfig {
                require_contraction: false,
                ..PicardConfig::default()
            };
            for &t in times.iter().step_by(stride) {
                match picard_solve(&self.ivp, t, &cfg) {
                    Ok(y) => {
                        let err = (solver.solve(t)? - y).amax();
                        max_oracle = Some(max_oracle.map_or(err, |m: f64| m.max(err)));
                    }
                    Err(e @ Error::NotConverged { .. }) => {
                        oracle_note = Some(e.to_string());
                        max_oracle = None;
                        break;
                    }
                    Err(e) => return Err(e),
                }
            }
        }
        Ok(Comparison {
            samples: times.len(),
            max_closed_form_error: max_cf,
            max_oracle_deviation: max_oracle,
            oracle_note,
        })
    }
}

pub fn linspace(a: f64, b: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..count)
            .map(|i| if i + 1 == count { b } else { a + (b - a) * i as f64 / (count - 1) as f64 })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeometricParams {
    pub alpha: f64,
    pub beta: f64,
    pub x0: f64,
    pub horizon: f64,
}

impl Default for GeometricParams {
    fn default() -> Self {
        GeometricParams {
            alpha: 0.9,
            beta: 1.2,
            x0: 1.8,
            horizon: 10.0,
        }
    }
}

impl GeometricParams {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "alpha" => self.alpha = number(key, value)?,
            "beta" => self.beta = number(key, value)?,
            "x0" => self.x0 = number(key, value)?,
            "horizon" => self.horizon = number(key, value)?,
            _ => return Err(unknown("s1-geometric", key)),
        }
        Ok(())
    }

    pub fn build(&self) -> Result<Scenario> {
        let system = LinearSystem::new(
            MatrixFunction::zero(1),
            MatrixFunction::constant(&Matrix::from_element(1, 1, self.alpha - 1.0)),
            VectorFunction::zero(1),
            ImpulseSequence::new(1, Indexed::Family {
                entries: vec![Expression::number(self.beta - 1.0)],
                from: None,
                to: None,
            }, Indexed::Zero)?,
        )?;
        let partition = Partition::build(&floor_grid(), (0.0, self.horizon))?;
        let ivp = Ivp::new(system, partition, 0.0, scalar(self.x0))?;
        let behaviour = classify_s1(self.alpha, self.beta);
        Ok(Scenario {
            id: "s1-geometric",
            ivp,
            notes: format!("alpha = {}, beta = {}: {behaviour}", self.alpha, self.beta),
            reference: Some(Reference::Geometric {
                alpha: self.alpha,
                beta: self.beta,
                x0: self.x0,
            }),
        })
    }
}

/// Geometric example on `[0, 10]`.
pub fn s1_geometric(alpha: f64, beta_imp: f64, x0: f64) -> Result<Scenario> {
    GeometricParams {
        alpha,
        beta: beta_imp,
        x0,
        ..GeometricParams::default()
    }
    .build()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BehaviourLabel {
    DecaysExponentially,
    Constant,
    Oscillatory,
    PiecewiseConstant,
    PiecewiseConstantGrowing,
    PiecewiseConstantDecaying,
    GrowsExponentially,
    /// `αβ = 1` with `α ≠ 1`: the node values repeat but the solution is not constant.
    Unclassified,
}

impl fmt::Display for BehaviourLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BehaviourLabel::DecaysExponentially => "decays-exponentially",
            BehaviourLabel::Constant => "constant",
            BehaviourLabel::Oscillatory => "oscillatory",
            BehaviourLabel::PiecewiseConstant => "piecewise-constant",
            BehaviourLabel::PiecewiseConstantGrowing => "piecewise-constant-growing",
            BehaviourLabel::PiecewiseConstantDecaying => "piecewise-constant-decaying",
            BehaviourLabel::GrowsExponentially => "grows-exponentially",
            BehaviourLabel::Unclassified => "unclassified",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Behaviour {
    pub label: BehaviourLabel,
    /// `αβ < 0`: node values alternate in sign.
    pub oscillatory: bool,
}

impl fmt::Display for Behaviour {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label)?;
        if self.oscillatory && self.label != BehaviourLabel::Oscillatory {
            write!(f, " (oscillatory)")?;
        }
        Ok(())
    }
}

/// Behaviour of `(αβ)^{[t]}(1 + (α−1)(t−[t]))x0`. Rows with `α = 1` are
/// tested before the `|αβ|` rows.
pub fn classify_s1(alpha: f64, beta_imp: f64) -> Behaviour {
    let m = alpha * beta_imp;
    let label = if m == 0.0 || (alpha == 1.0 && beta_imp == 1.0) {
        BehaviourLabel::Constant
    } else if alpha == 1.0 {
        if beta_imp.abs() > 1.0 {
            BehaviourLabel::PiecewiseConstantGrowing
        } else if 0.0 < beta_imp && beta_imp < 1.0 {
            BehaviourLabel::PiecewiseConstantDecaying
        } else {
            BehaviourLabel::PiecewiseConstant
        }
    } else if m.abs() < 1.0 {
        BehaviourLabel::DecaysExponentially
    } else if m.abs() > 1.0 {
        BehaviourLabel::GrowsExponentially
    } else if m < 0.0 {
        BehaviourLabel::Oscillatory
    } else {
        BehaviourLabel::Unclassified
    };
    Behaviour {
        label,
        oscillatory: m < 0.0,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProductParams {
    pub a: String,
    pub c: f64,
    pub z0: f64,
    pub tau: f64,
    pub horizon: f64,
    /// `false` drops the jumps.
    pub impulsive: bool,
}

impl Default for ProductParams {
    fn default() -> Self {
        ProductParams {
            a: "1/(t+2)".into(),
            c: -1.1,
            z0: -1.2,
            tau: 0.0,
            horizon: 10.0,
            impulsive: true,
        }
    }
}

impl ProductParams {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "a" => self.a = expression(value)?,
            "c" => self.c = number(key, value)?,
            "z0" => self.z0 = number(key, value)?,
            "tau" => self.tau = number(key, value)?,
            "horizon" => self.horizon = number(key, value)?,
            "impulsive" => self.impulsive = flag(key, value)?,
            _ => return Err(unknown("s2-impulse-product", key)),
        }
        Ok(())
    }

    pub fn build(&self) -> Result<Scenario> {
        let a = MatrixFunction::scalar(&self.a)?;
        let impulses = if self.impulsive {
            ImpulseSequence::new(1, Indexed::Family {
                entries: vec![Expression::number(self.c - 1.0)],
                from: None,
                to: None,
            }, Indexed::Zero)?
        } else {
            ImpulseSequence::none(1)
        };
        let system = LinearSystem::new(a.clone(), a.negated(), VectorFunction::zero(1), impulses)?;
        let window_start = self.tau.floor().min(0.0);
        let partition = Partition::build(&floor_grid(), (window_start, self.horizon))?;
        let ivp = Ivp::new(system, partition, self.tau, scalar(self.z0))?;
        Ok(Scenario {
            id: "s2-impulse-product",
            ivp,
            notes: format!("a(t) = {}, c = {}, impulsive = {}", self.a, self.c, self.impulsive),
            reference: Some(Reference::Product {
                c: self.c,
                z0: self.z0,
                impulsive: self.impulsive,
            }),
        })
    }
}

pub fn s2_impulse_product(a_expr: &str, c: f64, z0: f64) -> Result<Scenario> {
    ProductParams {
        a: a_expr.into(),
        c,
        z0,
        ..ProductParams::default()
    }
    .build()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CookeYorkeParams {
    pub a: String,
    pub f: String,
    /// `D_k` as an expression in `k`, applied from `k = 1`.
    pub d: String,
    pub y0: f64,
    pub tau: f64,
    pub horizon: f64,
    pub grid: GridSpec,
}

impl Default for CookeYorkeParams {
    fn default() -> Self {
        CookeYorkeParams {
            a: "1/(t+1)".into(),
            f: "0".into(),
            d: "1/k^2".into(),
            y0: 1.0,
            tau: 0.0,
            horizon: 100.0,
            grid: floor_grid(),
        }
    }
}

impl CookeYorkeParams {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "a" => self.a = expression(value)?,
            "f" => self.f = expression(value)?,
            "d" => self.d = expression(value)?,
            "y0" => self.y0 = number(key, value)?,
            "tau" => self.tau = number(key, value)?,
            "horizon" => self.horizon = number(key, value)?,
            "h" | "beta" => {
                let v = number(key, value)?;
                let (mut h, mut beta) = match self.grid {
                    GridSpec::Uniform { h, beta, .. } => (h, beta),
                    _ => (1.0, 0.0),
                };
                if key == "h" {
                    h = v;
                } else {
                    beta = v;
                }
                self.grid = GridSpec::Uniform { h, offset: 0.0, beta };
            }
            _ => return Err(unknown("s3-cooke-yorke", key)),
        }
        Ok(())
    }

    pub fn build(&self) -> Result<Scenario> {
        let a = MatrixFunction::scalar(&self.a)?;
        let f = VectorFunction::parse(&[&self.f])?;
        let d = Indexed::family(&[&self.d])?.with_range(Some(1), None);
        let impulses = ImpulseSequence::new(1, Indexed::Zero, d)?;
        let system = LinearSystem::new(a.clone(), a.negated(), f, impulses)?;
        let partition = Partition::build(&self.grid, (0.0, self.horizon))?;
        let ivp = Ivp::new(system, partition, self.tau, scalar(self.y0))?;
        let reference = CookeYorkeReference::new(&self.a, &self.f, &ivp)?;
        Ok(Scenario {
            id: "s3-cooke-yorke",
            ivp,
            notes: format!("a(t) = {}, f(t) = {}, D_k = {}", self.a, self.f, self.d),
            reference: Some(Reference::CookeYorke(Box::new(reference))),
        })
    }
}

pub fn s3_cooke_yorke(a_expr: &str, f_expr: &str, d_expr: &str, y0: f64, grid: GridSpec) -> Result<Scenario> {
    CookeYorkeParams {
        a: a_expr.into(),
        f: f_expr.into(),
        d: d_expr.into(),
        y0,
        grid,
        ..CookeYorkeParams::default()
    }
    .build()
}

const SIMPSON_TOL: f64 = 1e-12;

/// Adaptive Simpson on `[a, b]` (oriented).
fn simpson<F: Fn(f64) -> Result<f64>>(f: &F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let (fa, fb, fm) = (f(a)?, f(b)?, f(0.5 * (a + b))?);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 0)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> Result<f64>>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm)?, f(rm)?);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth >= 40 || delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    Ok(simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1)?
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1)?)
}

/// The explicit scalar solution: `y(τ)` plus forcing integrals weighted by
/// `Φ(x, s) = exp(∫_s^x a)` plus the sum of the `D_r`.
#[derive(Debug, Clone)]
struct CookeYorkeReference {
    a: Expression,
    f: Option<Expression>,
    /// `∫_{t_r}^{ζ_r} Φ(t_r, s) f(s) ds` per interval.
    advanced: Vec<OnceLock<f64>>,
    /// `∫_{ζ_r}^{t_{r+1}} Φ(t_{r+1}, s) f(s) ds` per interval.
    delayed: Vec<OnceLock<f64>>,
}

impl CookeYorkeReference {
    fn new(a: &str, f: &str, ivp: &Ivp) -> Result<Self> {
        let f = Expression::parse(f)?;
        let forcing = !matches!(f.root(), crate::coeffs::Expr::Num(v) if *v == 0.0);
        let n = ivp.partition.intervals();
        Ok(CookeYorkeReference {
            a: Expression::parse(a)?,
            f: forcing.then_some(f),
            advanced: (0..n).map(|_| OnceLock::new()).collect(),
            delayed: (0..n).map(|_| OnceLock::new()).collect(),
        })
    }

    /// `∫_lo^hi Φ(x, s) f(s) ds`.
    fn weighted(&self, x: f64, lo: f64, hi: f64) -> Result<f64> {
        let Some(f) = &self.f else { return Ok(0.0) };
        simpson(
            &|s| {
                let growth = simpson(&|u| self.a.eval_t(u), s, x, SIMPSON_TOL)?;
                Ok(growth.exp() * f.eval_t(s)?)
            },
            lo,
            hi,
            SIMPSON_TOL,
        )
    }

    fn cached(&self, cache: &OnceLock<f64>, x: f64, lo: f64, hi: f64) -> Result<f64> {
        if let Some(v) = cache.get() {
            return Ok(*v);
        }
        let v = self.weighted(x, lo, hi)?;
        Ok(*cache.get_or_init(|| v))
    }

    fn eval(&self, ivp: &Ivp, t: f64) -> Result<f64> {
        let p = &ivp.partition;
        let k_tau = p.locate(ivp.tau)?;
        let k_t = slot_index(p, t)?;
        let anchor = |k: usize| {
            let z = if k < p.intervals() { p.anchor(k) } else { p.node(k) };
            if k == k_tau {
                z.max(ivp.tau)
            } else {
                z
            }
        };
        let mut y = ivp.y0[0] + self.weighted(ivp.tau, ivp.tau, anchor(k_tau))?;
        for r in k_tau + 1..=k_t.min(p.intervals() - 1) {
            y += self.cached(&self.advanced[r], p.node(r), p.node(r), p.anchor(r))?;
        }
        for r in k_tau..k_t {
            y += self.cached(&self.delayed[r], p.node(r + 1), anchor(r), p.node(r + 1))?;
        }
        y += self.weighted(t, anchor(k_t), t)?;
        for r in k_tau + 1..=k_t {
            y += ivp.system.impulses.d_at(p.global_index(r))?[0];
        }
        Ok(y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SineParams {
    pub h: f64,
    pub beta: f64,
    pub z0: f64,
    pub horizon: f64,
}

impl Default for SineParams {
    fn default() -> Self {
        SineParams {
            h: 0.2,
            beta: 0.2,
            z0: 1.0,
            horizon: 5.0,
        }
    }
}

impl SineParams {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "h" => self.h = number(key, value)?,
            "beta" => self.beta = number(key, value)?,
            "z0" => self.z0 = number(key, value)?,
            "horizon" => self.horizon = number(key, value)?,
            _ => return Err(unknown("s4-sine", key)),
        }
        Ok(())
    }

    /// The initial value problem without the invertibility gate.
    pub fn ivp(&self) -> Result<Ivp> {
        let system = LinearSystem::new(
            MatrixFunction::zero(1),
            MatrixFunction::scalar("sin(2*pi*t)")?,
            VectorFunction::parse(&["1"])?,
            ImpulseSequence::new(1, Indexed::family(&["-3/2"])?, Indexed::family(&["1/2"])?)?,
        )?;
        let grid = GridSpec::Uniform {
            h: self.h,
            offset: 0.0,
            beta: self.beta,
        };
        let partition = Partition::build(&grid, (0.0, self.horizon))?;
        Ivp::new(system, partition, 0.0, scalar(self.z0))
    }

    pub fn build(&self) -> Result<Scenario> {
        let ivp = self.ivp()?;
        let kernel = KernelEngine::new(ivp.system.a.clone(), ivp.system.b.clone(), &Numerics::default())?;
        let h3 = kernel.check_h3(&ivp.partition)?;
        if !h3.pass {
            return Err(Error::Hypothesis(format!("h = {}: {}", self.h, h3.summary())));
        }
        Ok(Scenario {
            id: "s4-sine",
            ivp,
            notes: format!("h = {}, beta = {}", self.h, self.beta),
            reference: Some(Reference::Sine {
                h: self.h,
                beta: self.beta,
                z0: self.z0,
            }),
        })
    }
}

pub fn s4_sine_idepca(h: f64, beta: f64, z0: f64) -> Result<Scenario> {
    SineParams {
        h,
        beta,
        z0,
        ..SineParams::default()
    }
    .build()
}

/// `∫_a^b sin(2πs) ds`.
fn sine_integral(a: f64, b: f64) -> f64 {
    ((2.0 * PI * a).cos() - (2.0 * PI * b).cos()) / (2.0 * PI)
}

/// `E(t, s) = 1 + ∫_s^t sin(2πu) du`.
fn sine_e(t: f64, s: f64) -> f64 {
    1.0 + sine_integral(s, t)
}

/// The explicit solution of the sine example, built from `W(t, 0)` and
/// `W(t, rh)` as products of `E` ratios. The offset `1/2` enters with a
/// positive sign.
fn sine_reference(p: &Partition, h: f64, beta: f64, z0: f64, t: f64) -> Result<f64> {
    let k = slot_index(p, t)?;
    let node = |j: usize| p.node(j);
    let zeta = |j: usize| if j < p.intervals() { p.anchor(j) } else { node(j) + beta * h };
    let local = if k < p.intervals() {
        sine_e(t, zeta(k)) / sine_e(node(k), zeta(k))
    } else {
        1.0
    };
    let step = |j: usize| sine_e(node(j + 1), zeta(j)) / sine_e(node(j), zeta(j));
    // W(t, t_r) for r ≤ k, starting from the post-jump value at t_r.
    let w_from = |r: usize| -> f64 { local * (r..k).map(|j| -0.5 * step(j)).product::<f64>() };
    let w0 = w_from(0);
    let mut z = w0 * z0 + w0 * beta * h + (t - zeta(k));
    for r in 0..k {
        z += -0.5 * (1.0 - beta) * h * w_from(r + 1) + 0.5 * w_from(r + 1);
    }
    for r in 1..=k {
        z += beta * h * w_from(r);
    }
    Ok(z)
}

/// Builds a scenario by id with `key=value` overrides.
pub fn build_scenario(id: &str, params: &[(String, String)]) -> Result<Scenario> {
    macro_rules! with_params {
        ($p:expr) => {{
            let mut p = $p;
            for (k, v) in params {
                p.set(k, v)?;
            }
            p.build()
        }};
    }
    match id {
        "s1-geometric" => with_params!(GeometricParams::default()),
        "s2-impulse-product" => with_params!(ProductParams::default()),
        "s3-cooke-yorke" => with_params!(CookeYorkeParams::default()),
        "s4-sine" => with_params!(SineParams::default()),
        other => Err(Error::InvalidArgument(format!(
            "unknown scenario `{other}`; known: {}",
            SCENARIO_IDS.join(", ")
        ))),
    }
}
