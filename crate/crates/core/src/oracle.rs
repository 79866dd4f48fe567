//! Reference solvers that avoid the `J`/`E`/`W` machinery: Picard iteration
//! on the integral equation, one interval at a time, and a plain iterator for
//! linear difference equations.
//!
//! The Picard solver uses the trapezoid rule on its own grid and evaluates the
//! coefficients directly, so it shares no quadrature or transition code with
//! the main path.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{norm2, Matrix, Vector};
use crate::system::Ivp;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardConfig {
    pub grid_points_per_interval: usize,
    pub max_iterations: usize,
    /// Sup-norm bound on the change between successive iterates, relative to `max(1, ‖y‖∞)`.
    pub tolerance: f64,
    /// Refuse to run when some interval fails the contraction condition.
    pub require_contraction: bool,
}

impl Default for PicardConfig {
    fn default() -> Self {
        PicardConfig {
            grid_points_per_interval: 512,
            max_iterations: 200,
            tolerance: 1e-10,
            require_contraction: true,
        }
    }
}

impl PicardConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_points_per_interval < 2 || self.max_iterations == 0 {
            return Err(Error::InvalidArgument(
                "grid_points_per_interval must be at least 2 and max_iterations positive".into(),
            ));
        }
        if !(self.tolerance > 0.0 && self.tolerance < 1e-4) {
            return Err(Error::InvalidArgument(format!(
                "tolerance {} must lie in (0, 1e-4)",
                self.tolerance
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct H2Report {
    /// `∫_{t_k}^{t_{k+1}} (‖A‖ + ‖B‖)` per interval.
    pub per_interval: Vec<f64>,
    pub nu_bar: f64,
    pub pass: bool,
}

impl H2Report {
    pub fn summary(&self) -> String {
        format!(
            "H2 {}: nu_bar = {:.6e}",
            if self.pass { "pass" } else { "FAIL" },
            self.nu_bar
        )
    }
}

/// Composite trapezoid with `n` panels.
fn trapezoid<F: FnMut(f64) -> Result<f64>>(a: f64, b: f64, n: usize, mut f: F) -> Result<f64> {
    let h = (b - a) / n as f64;
    let mut acc = 0.5 * (f(a)? + f(b)?);
    for i in 1..n {
        acc += f(a + i as f64 * h)?;
    }
    Ok(acc * h)
}

pub fn h2_check(ivp: &Ivp) -> Result<H2Report> {
    let p = &ivp.partition;
    let sys = &ivp.system;
    let mut per_interval = Vec::with_capacity(p.intervals());
    for k in 0..p.intervals() {
        let (a, b) = (p.node(k), p.node(k + 1));
        let panels = ((b - a) * 4096.0).ceil().max(64.0) as usize;
        let v = trapezoid(a, b, panels, |s| {
            Ok(norm2(&sys.a.eval(s)?) + norm2(&sys.b.eval(s)?))
        })?;
        per_interval.push(v);
    }
    let nu_bar = per_interval.iter().copied().fold(0.0, f64::max);
    Ok(H2Report {
        per_interval,
        nu_bar,
        pass: nu_bar < 1.0,
    })
}

/// Fine grid over `[start, end]` containing `anchor` and, optionally, `target` as exact points.
fn build_grid(start: f64, end: f64, marks: &[f64], points: usize) -> Vec<f64> {
    let mut breaks = vec![start, end];
    breaks.extend(marks.iter().copied().filter(|&m| m > start && m < end));
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let total = end - start;
    let mut grid = vec![start];
    for w in breaks.windows(2) {
        let n = ((points as f64 * (w[1] - w[0]) / total).round() as usize).max(1);
        let h = (w[1] - w[0]) / n as f64;
        for i in 1..n {
            grid.push(w[0] + i as f64 * h);
        }
        grid.push(w[1]);
    }
    grid
}

/// Picard iteration on `[start, end]` with the argument frozen at `anchor`.
fn picard_interval(
    ivp: &Ivp,
    interval: usize,
    grid: &[f64],
    anchor_idx: usize,
    y_start: &Vector,
    cfg: &PicardConfig,
) -> Result<Vec<Vector>> {
    let sys = &ivp.system;
    let a: Vec<Matrix> = grid.iter().map(|&s| sys.a.eval(s)).collect::<Result<_>>()?;
    let b: Vec<Matrix> = grid.iter().map(|&s| sys.b.eval(s)).collect::<Result<_>>()?;
    let f: Vec<Vector> = grid.iter().map(|&s| sys.f.eval(s)).collect::<Result<_>>()?;
    let mut y: Vec<Vector> = vec![y_start.clone(); grid.len()];
    let mut change = f64::INFINITY;
    for _ in 0..cfg.max_iterations {
        let yz = y[anchor_idx].clone();
        let rhs: Vec<Vector> = (0..grid.len()).map(|i| &a[i] * &y[i] + &b[i] * &yz + &f[i]).collect();
        let mut next = Vec::with_capacity(grid.len());
        next.push(y_start.clone());
        let mut acc = y_start.clone();
        for i in 1..grid.len() {
            acc += (&rhs[i - 1] + &rhs[i]) * (0.5 * (grid[i] - grid[i - 1]));
            next.push(acc.clone());
        }
        change = next.iter().zip(&y).map(|(u, v)| (u - v).amax()).fold(0.0, f64::max);
        let scale = next.iter().map(|v| v.amax()).fold(1.0, f64::max);
        if !change.is_finite() {
            break;
        }
        y = next;
        if change <= cfg.tolerance * scale {
            return Ok(y);
        }
    }
    Err(Error::NotConverged {
        interval,
        iterations: cfg.max_iterations,
        change,
    })
}

/// `y(t)` by Picard iteration, interval by interval, applying jumps at nodes
/// after `τ` up to and including `t`.
pub fn picard_solve(ivp: &Ivp, t: f64, cfg: &PicardConfig) -> Result<Vector> {
    Ok(picard_solve_many(ivp, &[t], cfg)?.pop().expect("one value per time"))
}

/// `y` at each of the sorted `times` from a single sweep.
pub fn picard_solve_many(ivp: &Ivp, times: &[f64], cfg: &PicardConfig) -> Result<Vec<Vector>> {
    cfg.validate()?;
    if times.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::InvalidArgument("times must be sorted".into()));
    }
    let p = &ivp.partition;
    let (_, hi) = p.window();
    if let Some(&t) = times.iter().find(|&&t| !(t >= ivp.tau && t <= hi)) {
        return Err(Error::OutsideWindow { t, lo: ivp.tau, hi });
    }
    let Some(&last) = times.last() else {
        return Ok(Vec::new());
    };
    if cfg.require_contraction {
        let h2 = h2_check(ivp)?;
        let first = p.locate(ivp.tau)?;
        if let Some(k) = (first..=p.locate(last)?).find(|&k| h2.per_interval[k] >= 1.0) {
            return Err(Error::Hypothesis(format!(
                "contraction fails on interval {}: integral of |A| + |B| is {:.6e}",
                p.global_index(k),
                h2.per_interval[k]
            )));
        }
    }
    let mut out = Vec::with_capacity(times.len());
    let mut pending = times.iter().copied().peekable();
    let mut y = ivp.y0.clone();
    while pending.next_if_eq(&ivp.tau).is_some() {
        out.push(y.clone());
    }
    let mut start = ivp.tau;
    let mut k = p.locate(start)?;
    while pending.peek().is_some() {
        let end = p.node(k + 1);
        let anchor = p.anchor(k).max(start);
        let inside: Vec<f64> = times.iter().copied().filter(|&t| t > start && t < end).collect();
        let mut marks = vec![anchor];
        marks.extend(&inside);
        let grid = build_grid(start, end, &marks, cfg.grid_points_per_interval);
        let find = |x: f64| grid.iter().position(|&g| g == x).expect("mark is a grid point");
        let values = picard_interval(ivp, k, &grid, find(anchor), &y, cfg)?;
        while let Some(t) = pending.next_if(|&t| t < end) {
            out.push(values[find(t)].clone());
        }
        let (c, d) = ivp.system.impulses.impulse_at(p.global_index(k + 1))?;
        let left = values.last().expect("grid is non-empty");
        y = left + c * left + d;
        while pending.next_if_eq(&end).is_some() {
            out.push(y.clone());
        }
        start = end;
        k += 1;
    }
    Ok(out)
}

/// `y_{k+1} = M_k y_k + g_k` for `k = 0..maps.len()`; returns `y_0, …, y_K`.
pub fn difference_step(maps: &[Matrix], offsets: &[Vector], y0: &Vector) -> Result<Vec<Vector>> {
    if maps.len() != offsets.len() {
        return Err(Error::Dimension(format!(
            "{} maps but {} offsets",
            maps.len(),
            offsets.len()
        )));
    }
    let n = y0.len();
    let mut out = Vec::with_capacity(maps.len() + 1);
    out.push(y0.clone());
    for (m, g) in maps.iter().zip(offsets) {
        if m.nrows() != n || m.ncols() != n || g.len() != n {
            return Err(Error::Dimension(format!(
                "step map {}x{} and offset {} do not match state dimension {n}",
                m.nrows(),
                m.ncols(),
                g.len()
            )));
        }
        let next = m * out.last().expect("non-empty") + g;
        out.push(next);
    }
    Ok(out)
}
