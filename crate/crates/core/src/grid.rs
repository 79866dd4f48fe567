//! Partitions `{t_k}`, anchors `{ζ_k}` and the piecewise constant argument
//! `γ(t) = ζ_k` for `t ∈ [t_k, t_{k+1})`.
//!
//! Node `i` of a [`Partition`] carries the global index `first_index + i`;
//! impulse families written in `k` are evaluated at global indices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack used when snapping generated nodes onto the requested window.
const SNAP: f64 = 1e-9;

/// How to generate a partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridSpec {
    /// `t_k = k·h − offset`, `ζ_k = t_k + beta·h`.
    Uniform {
        h: f64,
        #[serde(default)]
        offset: f64,
        #[serde(default)]
        beta: f64,
    },
    /// `γ(t) = p·⌊(t + l)/p⌋`: nodes `k·p − l`, anchors `k·p`.
    Chiu { p: f64, l: f64 },
    Explicit { nodes: Vec<f64>, anchors: Vec<f64> },
}

/// A closed interval `[lo, hi]`, possibly degenerate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Span {
    pub lo: f64,
    pub hi: f64,
}

impl Span {
    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_degenerate(&self) -> bool {
        self.hi == self.lo
    }
}

/// Where a time sits relative to the partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Position {
    /// Inside `[t_k, t_{k+1})`.
    Interval(usize),
    /// Exactly the right end of the window, i.e. the last node.
    WindowEnd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    nodes: Vec<f64>,
    anchors: Vec<f64>,
    first_index: i64,
}

impl Partition {
    /// Validates the ordering invariants.
    pub fn new(nodes: Vec<f64>, anchors: Vec<f64>, first_index: i64) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::InvalidGrid("at least two nodes are required".into()));
        }
        if anchors.len() + 1 != nodes.len() {
            return Err(Error::InvalidGrid(format!(
                "{} nodes need {} anchors, got {}",
                nodes.len(),
                nodes.len() - 1,
                anchors.len()
            )));
        }
        if nodes.iter().chain(&anchors).any(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid("non-finite node or anchor".into()));
        }
        for (k, w) in nodes.windows(2).enumerate() {
            if w[0] >= w[1] {
                return Err(Error::InvalidGrid(format!(
                    "nodes must be strictly increasing (t_{k} = {} >= t_{} = {})",
                    w[0],
                    k + 1,
                    w[1]
                )));
            }
            let z = anchors[k];
            if z < w[0] || z > w[1] {
                return Err(Error::InvalidGrid(format!(
                    "anchor {z} of interval {k} is outside [{}, {}]",
                    w[0], w[1]
                )));
            }
        }
        Ok(Partition {
            nodes,
            anchors,
            first_index,
        })
    }

    /// Generates a partition from `spec` that covers `window`.
    pub fn build(spec: &GridSpec, window: (f64, f64)) -> Result<Self> {
        let (a, b) = window;
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::InvalidGrid(format!("window [{a}, {b}] is empty")));
        }
        match *spec {
            GridSpec::Uniform { h, offset, beta } => {
                if !(h.is_finite() && h > 0.0) {
                    return Err(Error::InvalidGrid(format!("step h = {h} must be positive")));
                }
                if !(0.0..=1.0).contains(&beta) {
                    return Err(Error::InvalidGrid(format!("beta = {beta} must lie in [0, 1]")));
                }
                if !offset.is_finite() {
                    return Err(Error::InvalidGrid("offset must be finite".into()));
                }
                Self::tiled(h, offset, window, |_, lo, hi| {
                    if beta == 0.0 {
                        lo
                    } else if beta == 1.0 {
                        hi
                    } else {
                        (lo + beta * h).clamp(lo, hi)
                    }
                })
            }
            GridSpec::Chiu { p, l } => {
                if !(p.is_finite() && p > 0.0) {
                    return Err(Error::InvalidGrid(format!("period p = {p} must be positive")));
                }
                if !(0.0 <= l && l < p) {
                    return Err(Error::InvalidGrid(format!("shift l = {l} must satisfy 0 <= l < p")));
                }
                Self::tiled(p, l, window, |k, lo, hi| (k as f64 * p).clamp(lo, hi))
            }
            GridSpec::Explicit {
                ref nodes,
                ref anchors,
            } => {
                let part = Partition::new(nodes.clone(), anchors.clone(), 0)?;
                let (lo, hi) = part.window();
                if a < lo || b > hi {
                    return Err(Error::InvalidGrid(format!(
                        "explicit nodes span [{lo}, {hi}] but the window is [{a}, {b}]"
                    )));
                }
                Ok(part)
            }
        }
    }

    fn tiled(
        h: f64,
        offset: f64,
        (a, b): (f64, f64),
        anchor: impl Fn(i64, f64, f64) -> f64,
    ) -> Result<Self> {
        let k0 = ((a + offset) / h + SNAP).floor() as i64;
        let mut k1 = ((b + offset) / h - SNAP).ceil() as i64;
        if k1 <= k0 {
            k1 = k0 + 1;
        }
        if k1 - k0 > 10_000_000 {
            return Err(Error::InvalidGrid(format!(
                "window would need {} intervals",
                k1 - k0
            )));
        }
        let nodes: Vec<f64> = (k0..=k1).map(|k| k as f64 * h - offset).collect();
        let anchors = nodes
            .windows(2)
            .zip(k0..)
            .map(|(w, k)| anchor(k, w[0], w[1]))
            .collect();
        Partition::new(nodes, anchors, k0)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn anchors(&self) -> &[f64] {
        &self.anchors
    }

    pub fn node(&self, i: usize) -> f64 {
        self.nodes[i]
    }

    pub fn anchor(&self, k: usize) -> f64 {
        self.anchors[k]
    }

    /// Number of intervals `[t_k, t_{k+1})`.
    pub fn intervals(&self) -> usize {
        self.anchors.len()
    }

    pub fn first_index(&self) -> i64 {
        self.first_index
    }

    /// Global index of local node `i`.
    pub fn global_index(&self, i: usize) -> i64 {
        self.first_index + i as i64
    }

    pub fn window(&self) -> (f64, f64) {
        (self.nodes[0], self.nodes[self.nodes.len() - 1])
    }

    pub fn contains(&self, t: f64) -> bool {
        let (lo, hi) = self.window();
        lo <= t && t <= hi
    }

    fn check(&self, t: f64) -> Result<()> {
        if self.contains(t) {
            Ok(())
        } else {
            let (lo, hi) = self.window();
            Err(Error::OutsideWindow { t, lo, hi })
        }
    }

    /// Interval index with `t ∈ [t_k, t_{k+1})`; the window end maps to the last interval.
    pub fn locate(&self, t: f64) -> Result<usize> {
        self.check(t)?;
        let last = self.intervals() - 1;
        let k = self.nodes.partition_point(|&x| x <= t).saturating_sub(1);
        Ok(k.min(last))
    }

    pub fn position(&self, t: f64) -> Result<Position> {
        self.check(t)?;
        if t == self.window().1 {
            Ok(Position::WindowEnd)
        } else {
            self.locate(t).map(Position::Interval)
        }
    }

    /// Local index of the node equal to `t`, if any.
    pub fn node_at(&self, t: f64) -> Option<usize> {
        self.nodes.binary_search_by(|x| x.total_cmp(&t)).ok()
    }

    /// `γ(t) = ζ_{k(t)}`.
    pub fn gamma(&self, t: f64) -> Result<f64> {
        self.locate(t).map(|k| self.anchors[k])
    }

    /// Advanced part `[t_k, ζ_k]` and delayed part `[ζ_k, t_{k+1}]`.
    pub fn split(&self, k: usize) -> (Span, Span) {
        let z = self.anchors[k];
        (
            Span {
                lo: self.nodes[k],
                hi: z,
            },
            Span {
                lo: z,
                hi: self.nodes[k + 1],
            },
        )
    }

    /// True when every anchor sits on the left node.
    pub fn is_delayed(&self) -> bool {
        self.anchors.iter().zip(&self.nodes).all(|(z, t)| z == t)
    }

    /// True when every anchor sits on the right node.
    pub fn is_advanced(&self) -> bool {
        self.anchors.iter().zip(&self.nodes[1..]).all(|(z, t)| z == t)
    }
}
