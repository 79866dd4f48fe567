//! Composite Gauss–Legendre quadrature.

use std::f64::consts::PI;

/// Gauss–Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes are the roots of P_n found by Newton iteration from the
    /// Chebyshev-like initial guess; weights from P_n'.
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "Gauss-Legendre order must be positive");
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Value and derivative of the Legendre polynomial P_n at x.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Composite rule: the range is split into `max(min_panels, ceil(len * panels_per_unit))`
/// equal panels, each integrated with the base rule.
#[derive(Debug, Clone)]
pub struct Composite {
    rule: GaussLegendre,
    pub min_panels: usize,
    pub panels_per_unit: f64,
}

impl Composite {
    pub fn new(order: usize, min_panels: usize, panels_per_unit: f64) -> Self {
        Composite {
            rule: GaussLegendre::new(order),
            min_panels: min_panels.max(1),
            panels_per_unit,
        }
    }

    pub fn rule(&self) -> &GaussLegendre {
        &self.rule
    }

    /// Quadrature points for the oriented integral from `a` to `b`, listed in
    /// order of travel from `a` towards `b`. Weights carry the sign of `b - a`.
    pub fn points(&self, a: f64, b: f64) -> Vec<(f64, f64)> {
        if a == b {
            return Vec::new();
        }
        let len = (b - a).abs();
        let panels = ((len * self.panels_per_unit).ceil() as usize).max(self.min_panels);
        let step = (b - a) / panels as f64;
        let half = 0.5 * step;
        let mut out = Vec::with_capacity(panels * self.rule.order());
        for p in 0..panels {
            let mid = a + (p as f64 + 0.5) * step;
            // step may be negative; iterate nodes so points move from a to b
            for (&x, &w) in self.rule.nodes.iter().zip(&self.rule.weights) {
                out.push((mid + half * x, half * w));
            }
        }
        out
    }

    /// Oriented scalar integral.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.points(a, b).into_iter().map(|(s, w)| w * f(s)).sum()
    }

    /// Oriented scalar integral with fallible integrand.
    pub fn try_integrate<E, F: FnMut(f64) -> Result<f64, E>>(
        &self,
        a: f64,
        b: f64,
        mut f: F,
    ) -> Result<f64, E> {
        let mut acc = 0.0;
        for (s, w) in self.points(a, b) {
            acc += w * f(s)?;
        }
        Ok(acc)
    }

    /// Like [`Composite::try_integrate`], but each panel is bisected until the
    /// halves agree with the whole to `tol` (relative to the panel length).
    /// Meant for integrands with kinks such as `‖M(u)‖`.
    pub fn try_integrate_adaptive<E, F: FnMut(f64) -> Result<f64, E>>(
        &self,
        a: f64,
        b: f64,
        tol: f64,
        mut f: F,
    ) -> Result<f64, E> {
        if a == b {
            return Ok(0.0);
        }
        let panels = (((b - a).abs() * self.panels_per_unit).ceil() as usize).max(self.min_panels);
        let step = (b - a) / panels as f64;
        let scale = tol / (b - a).abs();
        let mut acc = 0.0;
        for p in 0..panels {
            let lo = a + p as f64 * step;
            let hi = if p + 1 == panels { b } else { lo + step };
            let whole = self.panel(lo, hi, &mut f)?;
            acc += self.refine(lo, hi, whole, scale, 0, &mut f)?;
        }
        Ok(acc)
    }

    fn panel<E, F: FnMut(f64) -> Result<f64, E>>(&self, lo: f64, hi: f64, f: &mut F) -> Result<f64, E> {
        let mid = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        let mut acc = 0.0;
        for (&x, &w) in self.rule.nodes.iter().zip(&self.rule.weights) {
            acc += half * w * f(mid + half * x)?;
        }
        Ok(acc)
    }

    fn refine<E, F: FnMut(f64) -> Result<f64, E>>(
        &self,
        lo: f64,
        hi: f64,
        whole: f64,
        scale: f64,
        depth: u32,
        f: &mut F,
    ) -> Result<f64, E> {
        let mid = 0.5 * (lo + hi);
        let left = self.panel(lo, mid, f)?;
        let right = self.panel(mid, hi, f)?;
        if depth >= 40 || (left + right - whole).abs() <= scale * (hi - lo).abs() {
            return Ok(left + right);
        }
        Ok(self.refine(lo, mid, left, scale, depth + 1, f)? + self.refine(mid, hi, right, scale, depth + 1, f)?)
    }
}

impl Default for Composite {
    fn default() -> Self {
        Composite::new(16, 4, 4.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn weights_sum_to_two() {
        for n in 1..=24 {
            let r = GaussLegendre::new(n);
            let s: f64 = r.weights().iter().sum();
            assert_relative_eq!(s, 2.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn exact_for_polynomials_up_to_degree_2n_minus_1() {
        let r = GaussLegendre::new(5);
        for deg in 0..10 {
            let q: f64 = r
                .nodes()
                .iter()
                .zip(r.weights())
                .map(|(&x, &w)| w * x.powi(deg))
                .sum();
            let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
            assert_relative_eq!(q, exact, epsilon = 1e-14);
        }
    }

    #[test]
    fn oriented_integral_changes_sign() {
        let c = Composite::default();
        let fwd = c.integrate(0.0, 1.0, |s| (2.0 * PI * s).sin().abs());
        let bwd = c.integrate(1.0, 0.0, |s| (2.0 * PI * s).sin().abs());
        assert_relative_eq!(fwd, 2.0 / PI, epsilon = 1e-6);
        assert_relative_eq!(fwd, -bwd, epsilon = 1e-15);
        assert_eq!(c.integrate(0.3, 0.3, |s| s), 0.0);
    }

    #[test]
    fn points_travel_from_a_to_b() {
        let c = Composite::new(4, 2, 1.0);
        let pts = c.points(1.0, 0.0);
        assert!(pts.windows(2).all(|w| w[1].0 < w[0].0));
        assert!(pts.iter().all(|&(_, w)| w < 0.0));
    }
}
