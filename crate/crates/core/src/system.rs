use crate::coeffs::{ImpulseSequence, MatrixFunction, VectorFunction};
use crate::error::{Error, Result};
use crate::grid::Partition;
use crate::linalg::Vector;
use crate::quadrature::Composite;

/// `y' = A(t) y + B(t) y(γ(t)) + F(t)` between nodes,
/// `y(t_k) = (I + C_k) y(t_k^-) + D_k` at nodes.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub a: MatrixFunction,
    pub b: MatrixFunction,
    pub f: VectorFunction,
    pub impulses: ImpulseSequence,
}

impl LinearSystem {
    pub fn new(
        a: MatrixFunction,
        b: MatrixFunction,
        f: VectorFunction,
        impulses: ImpulseSequence,
    ) -> Result<Self> {
        let n = a.dim();
        if b.dim() != n || f.dim() != n || impulses.dim() != n {
            return Err(Error::Dimension(format!(
                "A is {n}x{n} but B is {0}x{0}, F has {1} entries and impulses are {2}-dimensional",
                b.dim(),
                f.dim(),
                impulses.dim()
            )));
        }
        Ok(LinearSystem { a, b, f, impulses })
    }

    /// Homogeneous system with zero forcing and no jumps.
    pub fn homogeneous(a: MatrixFunction, b: MatrixFunction) -> Result<Self> {
        let n = a.dim();
        LinearSystem::new(a, b, VectorFunction::zero(n), ImpulseSequence::none(n))
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    /// Same coefficients with `F = 0` and `D_k = 0`.
    pub fn homogeneous_part(&self) -> Self {
        LinearSystem {
            a: self.a.clone(),
            b: self.b.clone(),
            f: VectorFunction::zero(self.dim()),
            impulses: self.impulses.without_d(),
        }
    }
}

/// Initial value problem on a partition.
#[derive(Debug, Clone)]
pub struct Ivp {
    pub system: LinearSystem,
    pub partition: Partition,
    pub tau: f64,
    pub y0: Vector,
}

impl Ivp {
    pub fn new(system: LinearSystem, partition: Partition, tau: f64, y0: Vector) -> Result<Self> {
        if y0.len() != system.dim() {
            return Err(Error::Dimension(format!(
                "y0 has {} entries but the system is {}-dimensional",
                y0.len(),
                system.dim()
            )));
        }
        if !partition.contains(tau) {
            let (lo, hi) = partition.window();
            return Err(Error::OutsideWindow { t: tau, lo, hi });
        }
        Ok(Ivp {
            system,
            partition,
            tau,
            y0,
        })
    }

    pub fn dim(&self) -> usize {
        self.system.dim()
    }

    pub fn with_system(&self, system: LinearSystem) -> Result<Self> {
        Ivp::new(system, self.partition.clone(), self.tau, self.y0.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionMethod {
    /// Matrix exponential when `A` is constant, RK4 otherwise.
    #[default]
    Auto,
    Rk4,
    MatrixExponential,
}

/// Resolution knobs shared by every engine.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct Numerics {
    /// RK4 steps per unit time for the transition matrix.
    pub steps_per_unit: usize,
    pub method: TransitionMethod,
    /// Gauss–Legendre points per panel.
    pub quad_order: usize,
    pub min_panels: usize,
    pub panels_per_unit: f64,
}

impl Default for Numerics {
    fn default() -> Self {
        Numerics {
            steps_per_unit: 256,
            method: TransitionMethod::Auto,
            quad_order: 16,
            min_panels: 4,
            panels_per_unit: 4.0,
        }
    }
}

impl Numerics {
    pub fn validate(&self) -> Result<()> {
        if self.steps_per_unit < 8 {
            return Err(Error::InvalidArgument(format!(
                "steps_per_unit = {} must be at least 8",
                self.steps_per_unit
            )));
        }
        if self.quad_order == 0 || self.quad_order > 64 {
            return Err(Error::InvalidArgument(format!(
                "quad_order = {} must lie in 1..=64",
                self.quad_order
            )));
        }
        if !(self.panels_per_unit.is_finite() && self.panels_per_unit > 0.0) {
            return Err(Error::InvalidArgument("panels_per_unit must be positive".into()));
        }
        Ok(())
    }

    pub fn quadrature(&self) -> Composite {
        Composite::new(self.quad_order, self.min_panels, self.panels_per_unit)
    }
}
