//! TOML experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid1D;
use crate::harness::generate::InputKind;
use crate::model::ModelKind;
use crate::multiplier::ExponentTuple;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Invariants,
    WeakTypeSweep,
    LeibnizSweep,
    SparsitySuite,
    OracleEquivalence,
}

impl ExperimentKind {
    pub const ALL: [Self; 5] = [
        Self::Invariants,
        Self::WeakTypeSweep,
        Self::LeibnizSweep,
        Self::SparsitySuite,
        Self::OracleEquivalence,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Invariants => "invariants",
            Self::WeakTypeSweep => "weak_type_sweep",
            Self::LeibnizSweep => "leibniz_sweep",
            Self::SparsitySuite => "sparsity_suite",
            Self::OracleEquivalence => "oracle_equivalence",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("run.kind: unknown experiment {s:?}")))
    }

    /// `(J, m)` used when the config has no `[grid]` section.
    pub fn default_grid(&self) -> GridSection {
        let (box_exp, res_exp) = match self {
            Self::Invariants => (0, 6),
            Self::WeakTypeSweep => (0, 8),
            Self::LeibnizSweep => (0, 6),
            Self::SparsitySuite => (4, 10),
            Self::OracleEquivalence => (0, 4),
        };
        GridSection { box_exp, res_exp }
    }

    pub fn default_trials(&self) -> usize {
        match self {
            Self::Invariants => 10,
            Self::LeibnizSweep => 10,
            _ => 100,
        }
    }

    /// Largest `J + m` the suite accepts.
    fn grid_cap(&self) -> i32 {
        match self {
            Self::SparsitySuite => 16,
            Self::Invariants | Self::OracleEquivalence => 8,
            Self::LeibnizSweep => 9,
            Self::WeakTypeSweep => 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    /// Must agree with the CLI subcommand when both are given.
    pub kind: Option<ExperimentKind>,
    #[serde(default)]
    pub seed: u64,
    pub trials: Option<usize>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    /// `J`: the box is `[0, 2^J)`.
    pub box_exp: i32,
    /// `m`: `2^m` cells per unit length.
    pub res_exp: i32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstantsSection {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl Default for ConstantsSection {
    fn default() -> Self {
        Self { c1: 1024.0, c2: 1024.0, c3: 1024.0 }
    }
}

pub fn default_exponents() -> ExponentTuple {
    ExponentTuple { p1: 4.0 / 3.0, q1: 4.0, p2: 4.0, q2: 4.0 / 3.0, s: 1.5 }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub model: ModelKind,
    /// Collections hold the dyadic intervals of scales `J − depth ..= J`.
    pub depth: i32,
    pub sharp1: u32,
    pub sharp2: u32,
    pub haar: bool,
    pub input_kind: InputKind,
    /// Inputs are piecewise constant on cells of width `2^{-input_res}`.
    pub input_res: i32,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            model: ModelKind::Flag0Flag0,
            depth: 4,
            sharp1: 1,
            sharp2: 1,
            haar: true,
            input_kind: InputKind::IndicatorBounded,
            input_res: 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeakTypeSection {
    /// Grid doublings after the base `m`.
    pub grid_doublings: i32,
    /// Collection doublings after the base depth.
    pub depth_doublings: i32,
    /// Allowed relative growth of the max ratio per doubling.
    pub growth_tol: f64,
    /// Required fraction of trials with `|E'| ≥ |E|/2`.
    pub e_prime_rate: f64,
}

impl Default for WeakTypeSection {
    fn default() -> Self {
        Self { grid_doublings: 2, depth_doublings: 1, growth_tol: 0.10, e_prime_rate: 0.99 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LeibnizSection {
    /// Values `v` of `α₁ = α₂ = β₁ = β₂ = v`.
    pub orders: Vec<f64>,
    /// Dilation exponents `j` (`λ = 2^j`).
    pub dilations: Vec<i32>,
    pub gap: i32,
    pub slope_tol: f64,
}

impl Default for LeibnizSection {
    fn default() -> Self {
        Self { orders: vec![0.0, 1.0], dilations: vec![0, 1, 2], gap: 3, slope_tol: 1e-8 }
    }
}

/// One experiment: which suite, where, with which constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub run: RunSection,
    pub grid: Option<GridSection>,
    #[serde(default)]
    pub constants: ConstantsSection,
    #[serde(default = "default_exponents")]
    pub exponents: ExponentTuple,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub weak_type: WeakTypeSection,
    #[serde(default)]
    pub leibniz: LeibnizSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            run: RunSection::default(),
            grid: None,
            constants: ConstantsSection::default(),
            exponents: default_exponents(),
            model: ModelSection::default(),
            weak_type: WeakTypeSection::default(),
            leibniz: LeibnizSection::default(),
        }
    }
}

fn field_error(field: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{field}: {msg}"))
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind) -> Self {
        Self {
            run: RunSection { kind: Some(kind), ..Default::default() },
            ..Default::default()
        }
    }

    /// Parses TOML; `kind` (from the CLI) fills or must match `run.kind`.
    pub fn from_toml(text: &str, kind: Option<ExperimentKind>) -> Result<Self> {
        let mut c: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))?;
        match (c.run.kind, kind) {
            (Some(a), Some(b)) if a != b => {
                return Err(field_error("run.kind", format!("{} does not match the requested {}", a.name(), b.name())));
            }
            (None, Some(b)) => c.run.kind = Some(b),
            (None, None) => return Err(field_error("run.kind", "missing")),
            _ => {}
        }
        Ok(c)
    }

    pub fn from_path(path: &Path, kind: Option<ExperimentKind>) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text, kind)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn kind(&self) -> ExperimentKind {
        self.run.kind.unwrap_or(ExperimentKind::Invariants)
    }

    pub fn grid_section(&self) -> GridSection {
        self.grid.unwrap_or_else(|| self.kind().default_grid())
    }

    pub fn grid(&self) -> Result<Grid1D> {
        let g = self.grid_section();
        Grid1D::new(g.box_exp, g.res_exp)
    }

    pub fn trials(&self) -> usize {
        self.run.trials.unwrap_or_else(|| self.kind().default_trials())
    }

    /// Checks every field before any computation.
    pub fn validate(&self) -> Result<()> {
        let kind = self.kind();
        if self.trials() == 0 {
            return Err(field_error("run.trials", "must be at least 1"));
        }
        let g = self.grid_section();
        if g.res_exp < 1 {
            return Err(field_error("grid.res_exp", "must be at least 1"));
        }
        let top = g.box_exp + g.res_exp
            + if kind == ExperimentKind::WeakTypeSweep { self.weak_type.grid_doublings } else { 0 };
        if top > kind.grid_cap() || top < 2 {
            return Err(field_error(
                "grid",
                format!("2^{top} cells is outside 2^2..=2^{} for {}", kind.grid_cap(), kind.name()),
            ));
        }
        for (name, v) in [("constants.c1", self.constants.c1), ("constants.c2", self.constants.c2), ("constants.c3", self.constants.c3)] {
            if !(v >= 1.0) || !v.is_finite() {
                return Err(field_error(name, format!("{v} must be a finite value ≥ 1")));
            }
        }
        self.exponents.validate().map_err(|e| field_error("exponents", e))?;
        let m = &self.model;
        if m.depth < 1 {
            return Err(field_error("model.depth", "must be at least 1"));
        }
        let depth_top = m.depth + if kind == ExperimentKind::WeakTypeSweep { self.weak_type.depth_doublings } else { 0 };
        if kind == ExperimentKind::WeakTypeSweep && depth_top >= g.box_exp + g.res_exp {
            return Err(field_error("model.depth", format!("depth {depth_top} reaches the grid cells")));
        }
        let uses_inputs = matches!(kind, ExperimentKind::WeakTypeSweep | ExperimentKind::LeibnizSweep);
        if uses_inputs && (m.input_res < 1 || m.input_res > g.res_exp) {
            return Err(field_error("model.input_res", format!("must lie in 1..={}", g.res_exp)));
        }
        if m.sharp1 > 8 || m.sharp2 > 8 {
            return Err(field_error("model.sharp1", "scale offsets above 8 are not supported"));
        }
        let w = &self.weak_type;
        if w.grid_doublings < 0 || w.depth_doublings < 0 {
            return Err(field_error("weak_type", "doubling counts must be ≥ 0"));
        }
        if !(w.growth_tol > 0.0) {
            return Err(field_error("weak_type.growth_tol", "must be positive"));
        }
        if !(w.e_prime_rate > 0.0 && w.e_prime_rate <= 1.0) {
            return Err(field_error("weak_type.e_prime_rate", "must lie in (0, 1]"));
        }
        let l = &self.leibniz;
        if l.orders.is_empty() || l.orders.iter().any(|v| !(*v >= 0.0)) {
            return Err(field_error("leibniz.orders", "needs at least one order, all ≥ 0"));
        }
        let mut d = l.dilations.clone();
        d.sort_unstable();
        d.dedup();
        if d.len() < 2 || d.len() != l.dilations.len() {
            return Err(field_error("leibniz.dilations", "needs at least two distinct values"));
        }
        if d.iter().any(|j| *j < 0 || g.box_exp - j < -8) {
            return Err(field_error("leibniz.dilations", "values must lie in 0..=8"));
        }
        if l.gap < 2 {
            return Err(field_error("leibniz.gap", "must be at least 2"));
        }
        if !(l.slope_tol > 0.0) {
            return Err(field_error("leibniz.slope_tol", "must be positive"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_for_every_kind() {
        for k in ExperimentKind::ALL {
            ExperimentConfig::new(k).validate().unwrap();
            assert_eq!(ExperimentKind::parse(k.name()).unwrap(), k);
        }
    }

    #[test]
    fn toml_round_trip_and_kind_rules() {
        let c = ExperimentConfig::new(ExperimentKind::WeakTypeSweep);
        let text = c.to_toml().unwrap();
        assert_eq!(ExperimentConfig::from_toml(&text, None).unwrap(), c);
        assert!(ExperimentConfig::from_toml(&text, Some(ExperimentKind::LeibnizSweep)).is_err());
        assert!(ExperimentConfig::from_toml("", None).is_err());
        let c = ExperimentConfig::from_toml("[run]\nseed = 5\n", Some(ExperimentKind::SparsitySuite)).unwrap();
        assert_eq!(c.grid_section(), GridSection { box_exp: 4, res_exp: 10 });
    }

    #[test]
    fn validation_names_the_field() {
        let bad = "[exponents]\np1 = 2.0\nq1 = 2.0\np2 = 3.0\nq2 = 3.0\ns = 2.0\n";
        let c = ExperimentConfig::from_toml(bad, Some(ExperimentKind::WeakTypeSweep)).unwrap();
        let e = c.validate().unwrap_err().to_string();
        assert!(e.contains("exponents"), "{e}");
        let e = ExperimentConfig::from_toml("[grid]\nbox_exp = 0\nres_exp = 8\nextra = 1\n", Some(ExperimentKind::Invariants))
            .unwrap_err()
            .to_string();
        assert!(e.contains("extra") && e.contains("line"), "{e}");
        let c = ExperimentConfig::from_toml("[model]\ndepth = 0\n", Some(ExperimentKind::WeakTypeSweep)).unwrap();
        assert!(c.validate().unwrap_err().to_string().contains("model.depth"));
    }
}
