//! JSON run configuration for the command-line front end.
//!
//! Expression fields accept a string (`"sin(2*pi*t)"`) or a plain number.
//! Matrices may be written as an array of rows, a flat row-major array or,
//! for `n = 1`, a single entry.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::coeffs::{Expression, ImpulseSequence, Indexed, MatrixFunction, VectorFunction};
use crate::error::{Error, Result};
use crate::grid::{GridSpec, Partition};
use crate::linalg::Vector;
use crate::scenarios::linspace;
use crate::system::{Ivp, LinearSystem, Numerics};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Number(f64),
    Text(String),
}

impl Entry {
    fn parse(&self, field: &str) -> Result<Expression> {
        match self {
            Entry::Number(v) if v.is_finite() => Ok(Expression::number(*v)),
            Entry::Number(v) => Err(Error::Config(format!("{field}: {v} is not finite"))),
            Entry::Text(s) => Expression::parse(s).map_err(|e| Error::Config(format!("{field} (`{s}`): {e}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Rows(Vec<Vec<Entry>>),
    Flat(Vec<Entry>),
    Single(Entry),
}

impl MatrixSpec {
    fn entries(&self, n: usize, field: &str) -> Result<Vec<Expression>> {
        let flat: Vec<&Entry> = match self {
            MatrixSpec::Rows(rows) => {
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return Err(Error::Config(format!("{field}: expected {n} rows of {n} entries")));
                }
                rows.iter().flatten().collect()
            }
            MatrixSpec::Flat(v) => v.iter().collect(),
            MatrixSpec::Single(e) => vec![e],
        };
        if flat.len() != n * n {
            return Err(Error::Config(format!("{field}: expected {} entries, got {}", n * n, flat.len())));
        }
        flat.iter()
            .enumerate()
            .map(|(i, e)| e.parse(&format!("{field}[{}][{}]", i / n, i % n)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VectorSpec {
    List(Vec<Entry>),
    Single(Entry),
}

impl VectorSpec {
    fn entries(&self, n: usize, field: &str) -> Result<Vec<Expression>> {
        let flat: Vec<&Entry> = match self {
            VectorSpec::List(v) => v.iter().collect(),
            VectorSpec::Single(e) => vec![e],
        };
        if flat.len() != n {
            return Err(Error::Config(format!("{field}: expected {n} entries, got {}", flat.len())));
        }
        flat.iter()
            .enumerate()
            .map(|(i, e)| e.parse(&format!("{field}[{i}]")))
            .collect()
    }

    fn numbers(&self, n: usize, field: &str) -> Result<Vec<f64>> {
        self.entries(n, field)?
            .iter()
            .enumerate()
            .map(|(i, e)| {
                e.eval(0.0, 0.0)
                    .map_err(|err| Error::Config(format!("{field}[{i}]: {err}")))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImpulseConfig {
    /// `C_k`, entries are expressions in `k`.
    #[serde(rename = "C", default)]
    pub c: Option<MatrixSpec>,
    /// `D_k`, entries are expressions in `k`.
    #[serde(rename = "D", default)]
    pub d: Option<VectorSpec>,
    /// First global index carrying the family (inclusive).
    #[serde(default)]
    pub from: Option<i64>,
    /// Last global index carrying the family (inclusive).
    #[serde(default)]
    pub to: Option<i64>,
    /// Explicit `C_k` per index; overrides `C`.
    #[serde(rename = "C_table", default)]
    pub c_table: Option<BTreeMap<i64, MatrixSpec>>,
    /// Explicit `D_k` per index; overrides `D`.
    #[serde(rename = "D_table", default)]
    pub d_table: Option<BTreeMap<i64, VectorSpec>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub n: usize,
    #[serde(rename = "A", default)]
    pub a: Option<MatrixSpec>,
    #[serde(rename = "B", default)]
    pub b: Option<MatrixSpec>,
    #[serde(rename = "F", default)]
    pub f: Option<VectorSpec>,
    #[serde(default)]
    pub impulses: ImpulseConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IvpConfig {
    #[serde(default)]
    pub tau: Option<f64>,
    pub y0: VectorSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Explicit sample times; overrides `samples`.
    #[serde(default)]
    pub times: Option<Vec<f64>>,
    #[serde(default)]
    pub format: OutputFormat,
}

fn default_samples() -> usize {
    201
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            samples: default_samples(),
            times: None,
            format: OutputFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemConfig,
    pub grid: GridSpec,
    pub window: [f64; 2],
    pub ivp: IvpConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub numerics: Numerics,
}

fn matrix(spec: &Option<MatrixSpec>, n: usize, field: &str) -> Result<MatrixFunction> {
    match spec {
        None => Ok(MatrixFunction::zero(n)),
        Some(m) => MatrixFunction::new(n, m.entries(n, field)?),
    }
}

fn reject_var(e: &[Expression], var: crate::coeffs::Var, field: &str) -> Result<()> {
    if e.iter().any(|x| x.uses(var)) {
        let name = if var == crate::coeffs::Var::K { "k" } else { "t" };
        return Err(Error::Config(format!("{field} must not reference `{name}`")));
    }
    Ok(())
}

impl ImpulseConfig {
    fn build(&self, n: usize) -> Result<ImpulseSequence> {
        use crate::coeffs::Var;
        let c = match (&self.c_table, &self.c) {
            (Some(table), _) => {
                let mut map = BTreeMap::new();
                for (k, m) in table {
                    let field = format!("system.impulses.C_table[{k}]");
                    let values = m
                        .entries(n, &field)?
                        .iter()
                        .map(|e| e.eval(0.0, *k as f64))
                        .collect::<Result<Vec<_>>>()?;
                    map.insert(*k, values);
                }
                Indexed::Table(map)
            }
            (None, Some(m)) => {
                let entries = m.entries(n, "system.impulses.C")?;
                reject_var(&entries, Var::T, "system.impulses.C")?;
                Indexed::Family {
                    entries,
                    from: self.from,
                    to: self.to,
                }
            }
            (None, None) => Indexed::Zero,
        };
        let d = match (&self.d_table, &self.d) {
            (Some(table), _) => {
                let mut map = BTreeMap::new();
                for (k, v) in table {
                    map.insert(*k, v.numbers(n, &format!("system.impulses.D_table[{k}]"))?);
                }
                Indexed::Table(map)
            }
            (None, Some(v)) => {
                let entries = v.entries(n, "system.impulses.D")?;
                reject_var(&entries, Var::T, "system.impulses.D")?;
                Indexed::Family {
                    entries,
                    from: self.from,
                    to: self.to,
                }
            }
            (None, None) => Indexed::Zero,
        };
        ImpulseSequence::new(n, c, d)
    }
}

impl RunConfig {
    pub fn from_json(src: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(src).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    fn validate(&self) -> Result<()> {
        let n = self.system.n;
        if n == 0 || n > 64 {
            return Err(Error::Config(format!("system.n = {n} must lie in 1..=64")));
        }
        let [a, b] = self.window;
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::Config(format!("window [{a}, {b}] is empty")));
        }
        if let Some(times) = &self.output.times {
            if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[0] > w[1]) {
                return Err(Error::Config("output.times must be finite and sorted".into()));
            }
        }
        self.numerics.validate().map_err(|e| Error::Config(e.to_string()))
    }

    pub fn system(&self) -> Result<LinearSystem> {
        use crate::coeffs::Var;
        let n = self.system.n;
        let a = matrix(&self.system.a, n, "system.A")?;
        let b = matrix(&self.system.b, n, "system.B")?;
        for (m, field) in [(&a, "system.A"), (&b, "system.B")] {
            reject_var(m.entries(), Var::K, field)?;
        }
        let f = match &self.system.f {
            None => VectorFunction::zero(n),
            Some(v) => {
                let entries = v.entries(n, "system.F")?;
                reject_var(&entries, Var::K, "system.F")?;
                VectorFunction::new(entries)?
            }
        };
        LinearSystem::new(a, b, f, self.system.impulses.build(n)?)
    }

    pub fn partition(&self) -> Result<Partition> {
        Partition::build(&self.grid, (self.window[0], self.window[1]))
    }

    pub fn ivp(&self) -> Result<Ivp> {
        let partition = self.partition()?;
        let tau = self.ivp.tau.unwrap_or(self.window[0]);
        let y0 = Vector::from_vec(self.ivp.y0.numbers(self.system.n, "ivp.y0")?);
        Ivp::new(self.system()?, partition, tau, y0)
    }

    /// Output times: the explicit list, or `samples` evenly spaced points on `[τ, window end]`.
    pub fn sample_times(&self) -> Vec<f64> {
        match &self.output.times {
            Some(t) => t.clone(),
            None => linspace(self.ivp.tau.unwrap_or(self.window[0]), self.window[1], self.output.samples),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const S1: &str = r#"{
        "system": {"n": 1, "B": "0.9 - 1", "impulses": {"C": 0.2}},
        "grid": {"uniform": {"h": 1.0}},
        "window": [0, 10],
        "ivp": {"y0": 1.8},
        "output": {"samples": 11}
    }"#;

    #[test]
    fn parses_scalar_config() {
        let cfg = RunConfig::from_json(S1).unwrap();
        let ivp = cfg.ivp().unwrap();
        assert_eq!(ivp.tau, 0.0);
        assert_eq!(ivp.y0[0], 1.8);
        assert!((ivp.system.b.eval(0.3).unwrap()[(0, 0)] + 0.1).abs() < 1e-15);
        assert!((ivp.system.impulses.c_at(3).unwrap()[(0, 0)] - 0.2).abs() < 1e-15);
        assert_eq!(cfg.sample_times().len(), 11);
        assert_eq!(cfg.output.format, OutputFormat::Csv);
    }

    #[test]
    fn matrix_layouts() {
        let src = r#"{
            "system": {"n": 2, "A": [["0", 1], ["-1", "0"]], "B": ["t", 0, 0, "t"], "F": ["1", "sin(t)"],
                       "impulses": {"D": ["1/k^2", 0], "from": 1}},
            "grid": {"chiu": {"p": 1.0, "l": 0.5}},
            "window": [0, 4],
            "ivp": {"tau": 0.5, "y0": [1, 2]},
            "numerics": {"steps_per_unit": 512}
        }"#;
        let cfg = RunConfig::from_json(src).unwrap();
        let ivp = cfg.ivp().unwrap();
        assert_eq!(ivp.system.a.eval(0.0).unwrap()[(0, 1)], 1.0);
        assert_eq!(ivp.system.b.eval(2.0).unwrap()[(1, 1)], 2.0);
        assert_eq!(ivp.system.impulses.d_at(2).unwrap()[0], 0.25);
        assert_eq!(ivp.system.impulses.d_at(0).unwrap()[0], 0.0);
        assert_eq!(cfg.numerics.steps_per_unit, 512);
        assert_eq!(cfg.numerics.quad_order, 16);
    }

    #[test]
    fn tables() {
        let src = r#"{
            "system": {"n": 1, "impulses": {"C_table": {"2": -0.5}, "D_table": {"3": 1.5}}},
            "grid": {"explicit": {"nodes": [0, 1, 2, 3], "anchors": [0.5, 1.5, 2.5]}},
            "window": [0, 3],
            "ivp": {"y0": 1}
        }"#;
        let ivp = RunConfig::from_json(src).unwrap().ivp().unwrap();
        assert_eq!(ivp.system.impulses.c_at(2).unwrap()[(0, 0)], -0.5);
        assert_eq!(ivp.system.impulses.c_at(1).unwrap()[(0, 0)], 0.0);
        assert_eq!(ivp.system.impulses.d_at(3).unwrap()[0], 1.5);
    }

    #[test]
    fn malformed_expression_reports_position() {
        let src = S1.replace("0.9 - 1", "0.9 - * 1");
        let err = RunConfig::from_json(&src).unwrap().ivp().unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Config(_)));
        assert!(msg.contains("system.B[0][0]") && msg.contains("byte 6"), "{msg}");
    }

    #[test]
    fn schema_errors() {
        let unknown_field = S1.replace("\"window\"", "\"windo\"");
        assert!(matches!(RunConfig::from_json(&unknown_field), Err(Error::Config(_))));
        let bad_dim = S1.replace("\"B\": \"0.9 - 1\"", "\"B\": [1, 2]");
        assert!(RunConfig::from_json(&bad_dim).unwrap().ivp().is_err());
        let empty = S1.replace("[0, 10]", "[3, 3]");
        assert!(RunConfig::from_json(&empty).is_err());
        let k_in_a = S1.replace("0.9 - 1", "k");
        assert!(RunConfig::from_json(&k_in_a).unwrap().ivp().is_err());
        let t_in_c = S1.replace("\"C\": 0.2", "\"C\": \"t\"");
        assert!(RunConfig::from_json(&t_in_c).unwrap().ivp().is_err());
    }

    #[test]
    fn roundtrip() {
        let cfg = RunConfig::from_json(S1).unwrap();
        assert_eq!(RunConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }
}
