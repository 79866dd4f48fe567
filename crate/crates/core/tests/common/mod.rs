#![allow(dead_code)]

use idepcag::linalg::{condition_number, Matrix, Vector};
use idepcag::{
    h2_check, GridSpec, ImpulseSequence, Indexed, Ivp, KernelEngine, LinearSystem, MatrixFunction, Numerics,
    Partition, VectorFunction,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Geometry {
    /// Anchors anywhere, including both ends.
    Mixed,
    Delayed,
    Advanced,
    /// Equal steps and a common anchor offset.
    Uniform,
}

#[derive(Debug, Clone)]
pub struct Spec {
    pub geometry: Geometry,
    pub max_dim: usize,
    pub intervals: (usize, usize),
    pub forcing: bool,
    pub jumps: bool,
    pub offsets: bool,
    pub a_zero: bool,
    pub constant: bool,
    /// Start somewhere other than the first node.
    pub free_tau: bool,
}

impl Default for Spec {
    fn default() -> Self {
        Spec {
            geometry: Geometry::Mixed,
            max_dim: 3,
            intervals: (6, 12),
            forcing: true,
            jumps: true,
            offsets: true,
            a_zero: false,
            constant: false,
            free_tau: true,
        }
    }
}

fn num(v: f64) -> String {
    format!("{v:.6}")
}

fn sym(rng: &mut ChaCha8Rng, scale: f64) -> f64 {
    rng.random_range(-1.0..=1.0) * scale
}

fn coefficient(rng: &mut ChaCha8Rng, cap: f64, constant: bool) -> String {
    if constant {
        return num(sym(rng, cap));
    }
    let (c0, c1) = (sym(rng, 0.6 * cap), sym(rng, 0.4 * cap));
    let (w, p) = (rng.random_range(0.5..3.0), rng.random_range(0.0..3.0));
    format!("{} + {}*sin({}*t + {})", num(c0), num(c1), num(w), num(p))
}

fn partition(rng: &mut ChaCha8Rng, spec: &Spec, intervals: usize) -> (Partition, f64) {
    if spec.geometry == Geometry::Uniform {
        let h = rng.random_range(0.4..1.0);
        let beta = [0.0, 1.0, rng.random_range(0.0..1.0)][rng.random_range(0..3)];
        let grid = GridSpec::Uniform { h, offset: 0.0, beta };
        return (Partition::build(&grid, (0.0, intervals as f64 * h)).unwrap(), h);
    }
    let mut nodes = vec![0.0];
    for _ in 0..intervals {
        let last = *nodes.last().unwrap();
        nodes.push(last + rng.random_range(0.4..1.0));
    }
    let anchors = (0..intervals)
        .map(|k| {
            let (lo, hi) = (nodes[k], nodes[k + 1]);
            match spec.geometry {
                Geometry::Delayed => lo,
                Geometry::Advanced => hi,
                _ => match rng.random_range(0..4) {
                    0 => lo,
                    1 => hi,
                    _ => lo + rng.random_range(0.0..1.0) * (hi - lo),
                },
            }
        })
        .collect();
    let h_max = nodes.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    (Partition::new(nodes, anchors, 0).unwrap(), h_max)
}

/// A random system whose coefficients are scaled so that the contraction
/// and invertibility checks both pass.
pub fn random_ivp(rng: &mut ChaCha8Rng, spec: &Spec) -> Ivp {
    loop {
        if let Some(ivp) = attempt(rng, spec) {
            return ivp;
        }
    }
}

fn attempt(rng: &mut ChaCha8Rng, spec: &Spec) -> Option<Ivp> {
    let n = rng.random_range(1..=spec.max_dim);
    let intervals = rng.random_range(spec.intervals.0..=spec.intervals.1);
    let (p, h_max) = partition(rng, spec, intervals);
    let cap = 0.35 / (n as f64 * h_max);
    let matrix = |rng: &mut ChaCha8Rng, zero: bool| -> MatrixFunction {
        if zero {
            return MatrixFunction::zero(n);
        }
        let entries: Vec<String> = (0..n * n).map(|_| coefficient(rng, cap, spec.constant)).collect();
        MatrixFunction::parse(n, &entries.iter().map(String::as_str).collect::<Vec<_>>()).unwrap()
    };
    let a = matrix(rng, spec.a_zero);
    let b = matrix(rng, false);
    if spec.constant && !spec.a_zero && condition_number(&a.eval(0.0).unwrap()) > 1e4 {
        return None;
    }
    let f = if spec.forcing {
        let e: Vec<String> = (0..n)
            .map(|_| format!("{}*sin({}*t) + {}", num(sym(rng, 1.0)), num(rng.random_range(0.5..3.0)), num(sym(rng, 0.5))))
            .collect();
        VectorFunction::parse(&e.iter().map(String::as_str).collect::<Vec<_>>()).unwrap()
    } else {
        VectorFunction::zero(n)
    };
    let c = if spec.jumps {
        let e: Vec<String> = (0..n * n)
            .map(|_| {
                let c0 = sym(rng, 0.3 / n as f64);
                if spec.constant {
                    num(c0)
                } else {
                    format!("{} + {}*sin(k)", num(c0), num(sym(rng, 0.2 / n as f64)))
                }
            })
            .collect();
        Indexed::family(&e.iter().map(String::as_str).collect::<Vec<_>>()).unwrap()
    } else {
        Indexed::Zero
    };
    let d = if spec.offsets {
        let e: Vec<String> = (0..n)
            .map(|_| format!("{}*cos(k) + {}", num(sym(rng, 0.5)), num(sym(rng, 0.2))))
            .collect();
        Indexed::family(&e.iter().map(String::as_str).collect::<Vec<_>>()).unwrap()
    } else {
        Indexed::Zero
    };
    let system = LinearSystem::new(a, b, f, ImpulseSequence::new(n, c, d).unwrap()).unwrap();
    let tau = if spec.free_tau {
        match rng.random_range(0..3) {
            0 => p.node(0),
            1 => rng.random_range(p.node(0)..p.node(1)),
            _ => rng.random_range(p.node(0)..p.node(intervals / 2)),
        }
    } else {
        p.node(0)
    };
    let y0 = Vector::from_fn(n, |_, _| sym(rng, 1.0));
    let ivp = Ivp::new(system, p, tau, y0).ok()?;
    let h2 = h2_check(&ivp).ok()?;
    let kernel = KernelEngine::new(ivp.system.a.clone(), ivp.system.b.clone(), &Numerics::default()).ok()?;
    let h3 = kernel.check_h3(&ivp.partition).ok()?;
    (h2.pass && h3.pass).then_some(ivp)
}

/// Sorted random times in `[τ, window end]`, including some nodes, some
/// anchors and the window end itself.
pub fn random_times(rng: &mut ChaCha8Rng, ivp: &Ivp, count: usize) -> Vec<f64> {
    let p = &ivp.partition;
    let (_, hi) = p.window();
    let mut special: Vec<f64> = p
        .nodes()
        .iter()
        .chain(p.anchors())
        .copied()
        .filter(|&t| t >= ivp.tau)
        .collect();
    let mut times = vec![hi];
    while times.len() < count {
        if !special.is_empty() && rng.random_range(0..4) == 0 {
            let i = rng.random_range(0..special.len());
            times.push(special.swap_remove(i));
        } else {
            times.push(rng.random_range(ivp.tau..=hi));
        }
    }
    times.sort_by(f64::total_cmp);
    times
}

pub fn relative_gap(a: &Vector, b: &Vector) -> f64 {
    (a - b).norm() / (1.0 + b.norm())
}

pub fn matrix_gap(a: &Matrix, b: &Matrix) -> f64 {
    (a - b).norm()
}
