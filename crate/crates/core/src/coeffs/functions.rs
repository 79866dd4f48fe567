use std::collections::BTreeMap;

use crate::coeffs::expr::{Expression, Var};
use crate::error::{Error, Result};
use crate::linalg::{identity, norm2, sigma_min, Matrix, Vector};

fn parse_all(srcs: &[&str], forbidden: Var, what: &str) -> Result<Vec<Expression>> {
    srcs.iter()
        .enumerate()
        .map(|(i, s)| {
            let e = Expression::parse(s)?;
            if e.uses(forbidden) {
                let name = if forbidden == Var::K { "k" } else { "t" };
                return Err(Error::InvalidArgument(format!(
                    "{what} entry {i} (`{s}`) must not reference `{name}`"
                )));
            }
            Ok(e)
        })
        .collect()
}

/// `n × n` matrix of expressions in `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixFunction {
    n: usize,
    entries: Vec<Expression>,
    constant: bool,
}

impl MatrixFunction {
    /// Entries in row-major order.
    pub fn new(n: usize, entries: Vec<Expression>) -> Result<Self> {
        if n == 0 || entries.len() != n * n {
            return Err(Error::Dimension(format!(
                "a {n}x{n} matrix function needs {} entries, got {}",
                n * n,
                entries.len()
            )));
        }
        if let Some(i) = entries.iter().position(|e| e.uses(Var::K)) {
            return Err(Error::InvalidArgument(format!(
                "matrix entry ({}, {}) must not reference `k`",
                i / n,
                i % n
            )));
        }
        let constant = entries.iter().all(|e| !e.uses(Var::T));
        Ok(MatrixFunction {
            n,
            entries,
            constant,
        })
    }

    pub fn parse(n: usize, entries: &[&str]) -> Result<Self> {
        MatrixFunction::new(n, parse_all(entries, Var::K, "matrix")?)
    }

    pub fn zero(n: usize) -> Self {
        MatrixFunction::constant(&Matrix::zeros(n, n))
    }

    pub fn constant(m: &Matrix) -> Self {
        let n = m.nrows();
        assert_eq!(n, m.ncols(), "constant matrix function must be square");
        let entries = (0..n * n)
            .map(|i| Expression::number(m[(i / n, i % n)]))
            .collect();
        MatrixFunction {
            n,
            entries,
            constant: true,
        }
    }

    /// The scalar function `a(t)` as a 1×1 matrix.
    pub fn scalar(src: &str) -> Result<Self> {
        MatrixFunction::parse(1, &[src])
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// No entry references `t`.
    pub fn is_constant(&self) -> bool {
        self.constant
    }

    pub fn entries(&self) -> &[Expression] {
        &self.entries
    }

    pub fn entry(&self, row: usize, col: usize) -> &Expression {
        &self.entries[row * self.n + col]
    }

    pub fn eval(&self, t: f64) -> Result<Matrix> {
        let n = self.n;
        let mut m = Matrix::zeros(n, n);
        for (i, e) in self.entries.iter().enumerate() {
            let (r, c) = (i / n, i % n);
            m[(r, c)] = e
                .eval_t(t)
                .map_err(|err| err.with_context(|| format!(" in entry ({r}, {c}) at t = {t}")))?;
        }
        Ok(m)
    }

    /// Constant and identically zero.
    pub fn is_zero(&self) -> bool {
        self.constant
            && self
                .entries
                .iter()
                .all(|e| e.eval_t(0.0).map(|v| v == 0.0).unwrap_or(false))
    }

    /// Entrywise negation.
    pub fn negated(&self) -> Self {
        use crate::coeffs::expr::Expr;
        let entries = self
            .entries
            .iter()
            .map(|e| Expression::from_expr(Expr::Neg(Box::new(e.root().clone()))))
            .collect();
        MatrixFunction {
            n: self.n,
            entries,
            constant: self.constant,
        }
    }
}

/// Length-`n` vector of expressions in `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorFunction {
    entries: Vec<Expression>,
    constant: bool,
}

impl VectorFunction {
    pub fn new(entries: Vec<Expression>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Dimension("vector function needs at least one entry".into()));
        }
        if let Some(i) = entries.iter().position(|e| e.uses(Var::K)) {
            return Err(Error::InvalidArgument(format!(
                "vector entry {i} must not reference `k`"
            )));
        }
        let constant = entries.iter().all(|e| !e.uses(Var::T));
        Ok(VectorFunction { entries, constant })
    }

    pub fn parse(entries: &[&str]) -> Result<Self> {
        VectorFunction::new(parse_all(entries, Var::K, "vector")?)
    }

    pub fn zero(n: usize) -> Self {
        VectorFunction {
            entries: (0..n).map(|_| Expression::number(0.0)).collect(),
            constant: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn is_constant(&self) -> bool {
        self.constant
    }

    pub fn entries(&self) -> &[Expression] {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.constant
            && self
                .entries
                .iter()
                .all(|e| e.eval_t(0.0).map(|v| v == 0.0).unwrap_or(false))
    }

    pub fn eval(&self, t: f64) -> Result<Vector> {
        let mut v = Vector::zeros(self.entries.len());
        for (i, e) in self.entries.iter().enumerate() {
            v[i] = e
                .eval_t(t)
                .map_err(|err| err.with_context(|| format!(" in entry {i} at t = {t}")))?;
        }
        Ok(v)
    }
}

/// A matrix- or vector-valued sequence indexed by the global node index `k`.
#[derive(Debug, Clone, PartialEq)]
pub enum Indexed {
    /// Zero for every `k`.
    Zero,
    /// Entrywise expressions in `k`, applied for `k ∈ [from, to]` (either bound optional)
    /// and zero elsewhere.
    Family {
        entries: Vec<Expression>,
        from: Option<i64>,
        to: Option<i64>,
    },
    /// Explicit values; zero for indices not listed.
    Table(BTreeMap<i64, Vec<f64>>),
}

impl Indexed {
    pub fn family(entries: &[&str]) -> Result<Self> {
        Ok(Indexed::Family {
            entries: parse_all(entries, Var::T, "impulse")?,
            from: None,
            to: None,
        })
    }

    pub fn with_range(self, from: Option<i64>, to: Option<i64>) -> Self {
        match self {
            Indexed::Family { entries, .. } => Indexed::Family { entries, from, to },
            other => other,
        }
    }

    fn len(&self) -> Option<usize> {
        match self {
            Indexed::Zero => None,
            Indexed::Family { entries, .. } => Some(entries.len()),
            Indexed::Table(map) => map.values().next().map(Vec::len),
        }
    }

    fn values(&self, k: i64, len: usize) -> Result<Vec<f64>> {
        match self {
            Indexed::Zero => Ok(vec![0.0; len]),
            Indexed::Family { entries, from, to } => {
                if from.is_some_and(|f| k < f) || to.is_some_and(|t| k > t) {
                    return Ok(vec![0.0; len]);
                }
                entries
                    .iter()
                    .enumerate()
                    .map(|(i, e)| {
                        e.eval_k(k)
                            .map_err(|err| err.with_context(|| format!(" in impulse entry {i} at k = {k}")))
                    })
                    .collect()
            }
            Indexed::Table(map) => Ok(map.get(&k).cloned().unwrap_or_else(|| vec![0.0; len])),
        }
    }

    /// Same value for every index.
    fn constant_values(&self, len: usize) -> Option<Vec<f64>> {
        match self {
            Indexed::Zero => Some(vec![0.0; len]),
            Indexed::Family {
                entries,
                from: None,
                to: None,
            } if entries.iter().all(|e| !e.uses(Var::K)) => {
                entries.iter().map(|e| e.eval_k(0).ok()).collect()
            }
            _ => None,
        }
    }
}

/// Impulse data: `y(t_k) = (I + C_k) y(t_k^-) + D_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseSequence {
    n: usize,
    c: Indexed,
    d: Indexed,
}

impl ImpulseSequence {
    pub fn new(n: usize, c: Indexed, d: Indexed) -> Result<Self> {
        if let Some(len) = c.len() {
            if len != n * n {
                return Err(Error::Dimension(format!(
                    "C_k must have {} entries, got {len}",
                    n * n
                )));
            }
        }
        if let Some(len) = d.len() {
            if len != n {
                return Err(Error::Dimension(format!("D_k must have {n} entries, got {len}")));
            }
        }
        if let Indexed::Table(map) = &c {
            if map.values().any(|v| v.len() != n * n) {
                return Err(Error::Dimension("inconsistent C_k table entries".into()));
            }
        }
        if let Indexed::Table(map) = &d {
            if map.values().any(|v| v.len() != n) {
                return Err(Error::Dimension("inconsistent D_k table entries".into()));
            }
        }
        Ok(ImpulseSequence { n, c, d })
    }

    pub fn none(n: usize) -> Self {
        ImpulseSequence {
            n,
            c: Indexed::Zero,
            d: Indexed::Zero,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn c(&self) -> &Indexed {
        &self.c
    }

    pub fn d(&self) -> &Indexed {
        &self.d
    }

    /// Drops the affine part.
    pub fn without_d(&self) -> Self {
        ImpulseSequence {
            n: self.n,
            c: self.c.clone(),
            d: Indexed::Zero,
        }
    }

    pub fn c_at(&self, k: i64) -> Result<Matrix> {
        let n = self.n;
        let c = Matrix::from_row_slice(n, n, &self.c.values(k, n * n)?);
        let jump = identity(n) + &c;
        let smin = sigma_min(&jump);
        if !(smin >= 1e-12 * (1.0 + norm2(&c))) {
            return Err(Error::SingularImpulse { k, sigma_min: smin });
        }
        Ok(c)
    }

    pub fn d_at(&self, k: i64) -> Result<Vector> {
        Ok(Vector::from_vec(self.d.values(k, self.n)?))
    }

    /// `(C_k, D_k)` with `I + C_k` checked for invertibility.
    pub fn impulse_at(&self, k: i64) -> Result<(Matrix, Vector)> {
        Ok((self.c_at(k)?, self.d_at(k)?))
    }

    /// `C` when it does not depend on `k`.
    pub fn constant_c(&self) -> Option<Matrix> {
        let n = self.n;
        self.c
            .constant_values(n * n)
            .map(|v| Matrix::from_row_slice(n, n, &v))
    }

    pub fn has_d(&self) -> bool {
        !matches!(self.d, Indexed::Zero)
    }
}
