//! JSON experiment configuration and its translation into core types.

use std::collections::BTreeMap;
use std::path::Path;

use lrclt_core::polymer::Cutoffs;
use lrclt_core::{
    BoundaryCondition, Coupling, Error as CoreError, Kernel, LatticeBox, Model, PairConvention,
    PairPotential, Site, SpinSpace,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    VerifyExpansion,
    Bounds,
    Lclt,
    Charfn,
    Decimate,
    Mc,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::VerifyExpansion => "verify-expansion",
            Task::Bounds => "bounds",
            Task::Lclt => "lclt",
            Task::Charfn => "charfn",
            Task::Decimate => "decimate",
            Task::Mc => "mc",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SpinSpaceSpec {
    pub labels: Vec<String>,
    pub weights: Vec<f64>,
    pub f: Vec<i64>,
}

impl Default for SpinSpaceSpec {
    fn default() -> Self {
        SpinSpaceSpec {
            labels: vec!["+".into(), "-".into()],
            weights: vec![1.0, 1.0],
            f: vec![1, -1],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Family {
    LongRangeIsing,
    Geometric,
    FiniteRange,
    Zero,
    Table,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct PotentialSpec {
    pub family: Family,
    #[serde(default)]
    pub params: Value,
    pub truncation_radius: u32,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LongRangeParams {
    #[serde(rename = "J", default = "one")]
    j: f64,
    alpha: f64,
    spins: Option<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GeometricParams {
    amplitude: f64,
    ratio: f64,
    spins: Option<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FiniteRangeParams {
    values: Vec<f64>,
    spins: Option<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TableEntry {
    displacement: Vec<i64>,
    energies: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TableParams {
    entries: Vec<TableEntry>,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct BoxSpec {
    pub d: usize,
    pub k: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Rule {
    Free,
    Constant,
    Explicit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct BoundarySpec {
    pub rule: Rule,
    #[serde(default)]
    pub params: Value,
}

impl Default for BoundarySpec {
    fn default() -> Self {
        BoundarySpec {
            rule: Rule::Free,
            params: Value::Null,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstantParams {
    label: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ExplicitSite {
    site: Vec<i64>,
    label: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ExplicitParams {
    spins: Vec<ExplicitSite>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
pub struct ExpansionSpec {
    pub betas: Vec<f64>,
    pub ts: Vec<f64>,
    /// Highest order of the truncated log-series; 0 skips the series.
    pub series_order: usize,
}

impl Default for ExpansionSpec {
    fn default() -> Self {
        ExpansionSpec {
            betas: vec![0.1, 0.2],
            ts: vec![0.0, 0.5],
            series_order: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
pub struct BoundsSpec {
    pub delta: f64,
    pub epsilon: f64,
    pub epsilon_c: Option<f64>,
    pub r0: u32,
    /// Radius of the explicit lattice sums; tails are added beyond it.
    pub radius: u64,
    pub boundary_samples: usize,
}

impl Default for BoundsSpec {
    fn default() -> Self {
        BoundsSpec {
            delta: 0.05,
            epsilon: 0.05,
            epsilon_c: None,
            r0: 3,
            radius: 2000,
            boundary_samples: 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
pub struct KpSpec {
    pub c: f64,
    /// `None` takes half of `beta_C`.
    pub beta: Option<f64>,
    pub max_bonds: usize,
    pub max_pair_range: Option<u64>,
    pub restrict_to_r2: bool,
}

impl Default for KpSpec {
    fn default() -> Self {
        KpSpec {
            c: 0.1,
            beta: None,
            max_bonds: 3,
            max_pair_range: None,
            restrict_to_r2: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
pub struct LcltSpec {
    /// Half-widths of the boxes in the sweep; empty takes `box.k` alone.
    pub ks: Vec<u32>,
    pub b: f64,
    pub delta: f64,
    pub resolution: usize,
}

impl Default for LcltSpec {
    fn default() -> Self {
        LcltSpec {
            ks: vec![],
            b: 3.0,
            delta: 1.0,
            resolution: 4096,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
pub struct CharfnSpec {
    pub grid: usize,
    /// Inverse temperature for the small-t check; `None` takes half the
    /// largest point of a 201-point grid on `[0, beta_C]` with `D > 0`.
    pub high_t_beta: Option<f64>,
    /// Inverse temperature for the large-t check; `None` takes half the
    /// largest `beta` with `C > 0`.
    pub tail_beta: Option<f64>,
}

impl Default for CharfnSpec {
    fn default() -> Self {
        CharfnSpec {
            grid: 2048,
            high_t_beta: None,
            tail_beta: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
pub struct DecimationSpec {
    pub r0: u32,
    pub samples: usize,
    pub grid: usize,
}

impl Default for DecimationSpec {
    fn default() -> Self {
        DecimationSpec {
            r0: 3,
            samples: 20,
            grid: 2048,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
pub struct McSpec {
    pub sweeps: u64,
    pub burn_in: u64,
    pub thinning: u64,
}

impl Default for McSpec {
    fn default() -> Self {
        McSpec {
            sweeps: 100_000,
            burn_in: 1_000,
            thinning: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub spin_space: SpinSpaceSpec,
    pub potential: PotentialSpec,
    #[serde(default)]
    pub convention: PairConvention,
    #[serde(rename = "box")]
    pub bx: BoxSpec,
    #[serde(default)]
    pub boundary: BoundarySpec,
    pub beta: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tasks: Vec<Task>,
    #[serde(default)]
    pub expansion: ExpansionSpec,
    #[serde(default)]
    pub bounds: BoundsSpec,
    #[serde(default)]
    pub kp: KpSpec,
    #[serde(default)]
    pub lclt: LcltSpec,
    #[serde(default)]
    pub charfn: CharfnSpec,
    #[serde(default)]
    pub decimation: DecimationSpec,
    #[serde(default)]
    pub mc: McSpec,
}

/// A validated configuration with its core objects built.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub config: ExperimentConfig,
    pub model: Model,
    pub bx: LatticeBox,
    pub bc: BoundaryCondition,
}

fn parse_at<T: DeserializeOwned>(path: &str, v: &Value) -> Result<T, CliError> {
    serde_path_to_error::deserialize(v.clone()).map_err(|e| {
        let inner = e.path().to_string();
        let full = if inner == "." {
            path.to_string()
        } else {
            format!("{path}.{inner}")
        };
        CliError::Validation(format!("{full}: {}", e.inner()))
    })
}

fn core_invalid(e: CoreError) -> CliError {
    match e {
        CoreError::Budget { .. } => CliError::Budget(e.to_string()),
        other => CliError::Validation(other.to_string()),
    }
}

fn positive(path: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Validation(format!(
            "{path}: must be positive and finite, got {v}"
        )))
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            CliError::Validation(format!("{path}: {}", e.inner()))
        })
    }

    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn spin_space(&self) -> Result<SpinSpace, CliError> {
        let s = &self.spin_space;
        SpinSpace::new(s.labels.clone(), s.weights.clone(), s.f.clone()).map_err(core_invalid)
    }

    pub fn potential(&self, spins: &SpinSpace) -> Result<PairPotential, CliError> {
        let p = &self.potential;
        let d = self.bx.d;
        let default_spins = || spins.f().iter().map(|v| *v as f64).collect::<Vec<f64>>();
        let product = |coupling: Coupling, s: Option<Vec<f64>>| {
            let s = s.unwrap_or_else(default_spins);
            if s.len() != spins.len() {
                return Err(CliError::Validation(format!(
                    "potential.params.spins: expected {} values, got {}",
                    spins.len(),
                    s.len()
                )));
            }
            PairPotential::product(d, coupling, s, p.truncation_radius).map_err(core_invalid)
        };
        match p.family {
            Family::LongRangeIsing => {
                let q: LongRangeParams = parse_at("potential.params", &p.params)?;
                product(
                    Coupling::LongRangeIsing {
                        j: q.j,
                        alpha: q.alpha,
                    },
                    q.spins,
                )
            }
            Family::Geometric => {
                let q: GeometricParams = parse_at("potential.params", &p.params)?;
                product(
                    Coupling::Geometric {
                        amplitude: q.amplitude,
                        ratio: q.ratio,
                    },
                    q.spins,
                )
            }
            Family::FiniteRange => {
                let q: FiniteRangeParams = parse_at("potential.params", &p.params)?;
                product(Coupling::FiniteRange { values: q.values }, q.spins)
            }
            Family::Zero => {
                if p.truncation_radius == 0 {
                    return Err(CliError::Validation(
                        "potential.truncationRadius: must be at least 1".into(),
                    ));
                }
                Ok(PairPotential::zero(d, spins.len(), p.truncation_radius))
            }
            Family::Table => {
                let q: TableParams = parse_at("potential.params", &p.params)?;
                let mut entries = BTreeMap::new();
                for (i, e) in q.entries.into_iter().enumerate() {
                    if e.displacement.len() != d {
                        return Err(CliError::Validation(format!(
                            "potential.params.entries[{i}].displacement: expected {d} coordinates"
                        )));
                    }
                    entries.insert(e.displacement, e.energies);
                }
                PairPotential::new(
                    d,
                    Kernel::Table { entries },
                    p.truncation_radius,
                    spins.len(),
                )
                .map_err(core_invalid)
            }
        }
    }

    pub fn boundary_condition(&self, spins: &SpinSpace) -> Result<BoundaryCondition, CliError> {
        let label = |path: String, name: &str| {
            spins
                .label_index(name)
                .ok_or_else(|| CliError::Validation(format!("{path}: unknown spin label {name:?}")))
        };
        match self.boundary.rule {
            Rule::Free => Ok(BoundaryCondition::Free),
            Rule::Constant => {
                let q: ConstantParams = parse_at("boundary.params", &self.boundary.params)?;
                Ok(BoundaryCondition::Constant {
                    label: label("boundary.params.label".into(), &q.label)?,
                })
            }
            Rule::Explicit => {
                let q: ExplicitParams = parse_at("boundary.params", &self.boundary.params)?;
                let mut map = BTreeMap::new();
                for (i, s) in q.spins.into_iter().enumerate() {
                    if s.site.len() != self.bx.d {
                        return Err(CliError::Validation(format!(
                            "boundary.params.spins[{i}].site: expected {} coordinates",
                            self.bx.d
                        )));
                    }
                    map.insert(
                        Site::new(s.site),
                        label(format!("boundary.params.spins[{i}].label"), &s.label)?,
                    );
                }
                Ok(BoundaryCondition::Explicit { spins: map })
            }
        }
    }

    pub fn kp_cutoffs(&self) -> Cutoffs {
        Cutoffs {
            max_bonds: self.kp.max_bonds,
            max_pair_range: self
                .kp
                .max_pair_range
                .unwrap_or(self.potential.truncation_radius as u64),
            restrict_to_r2: self.kp.restrict_to_r2,
        }
    }

    pub fn resolve(self) -> Result<Resolved, CliError> {
        let bx = LatticeBox::new(self.bx.d, self.bx.k).map_err(core_invalid)?;
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(CliError::Validation(format!(
                "beta: must be finite and non-negative, got {}",
                self.beta
            )));
        }
        positive("bounds.delta", self.bounds.delta)?;
        positive("bounds.epsilon", self.bounds.epsilon)?;
        positive("lclt.b", self.lclt.b)?;
        positive("lclt.delta", self.lclt.delta)?;
        if !(0.0..std::f64::consts::E.recip()).contains(&self.kp.c) {
            return Err(CliError::Validation(format!(
                "kp.c: must lie in [0, 1/e), got {}",
                self.kp.c
            )));
        }
        if self.mc.sweeps <= self.mc.burn_in {
            return Err(CliError::Validation(
                "mc.sweeps: must exceed mc.burnIn".into(),
            ));
        }
        if self.mc.thinning == 0 {
            return Err(CliError::Validation(
                "mc.thinning: must be at least 1".into(),
            ));
        }
        let spins = self.spin_space()?;
        let potential = self.potential(&spins)?;
        let bc = self.boundary_condition(&spins)?;
        let model = Model::new(spins, potential, self.convention).map_err(core_invalid)?;
        Ok(Resolved {
            config: self,
            model,
            bx,
            bc,
        })
    }
}

impl Resolved {
    pub fn ks(&self) -> Vec<u32> {
        if self.config.lclt.ks.is_empty() {
            vec![self.bx.k]
        } else {
            self.config.lclt.ks.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{
        "potential": {"family": "longRangeIsing", "params": {"J": 1.0, "alpha": 0.0}, "truncationRadius": 6},
        "box": {"d": 1, "k": 2},
        "beta": 0.1
    }"#;

    #[test]
    fn defaults_resolve() {
        let r = ExperimentConfig::from_json(BASE)
            .unwrap()
            .resolve()
            .unwrap();
        assert_eq!(r.model.n_labels(), 2);
        assert_eq!(r.bc, BoundaryCondition::Free);
        assert!(r.config.tasks.is_empty());
    }

    #[test]
    fn alpha_out_of_range_names_field() {
        let text = BASE.replace("\"alpha\": 0.0", "\"alpha\": 1.5");
        let err = ExperimentConfig::from_json(&text)
            .unwrap()
            .resolve()
            .unwrap_err();
        assert!(err.to_string().contains("potential.params.alpha"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn unknown_field_is_located() {
        let text = BASE.replace("\"k\": 2", "\"k\": 2, \"q\": 1");
        let err = ExperimentConfig::from_json(&text).unwrap_err();
        assert!(err.to_string().contains("box.q"), "{err}");
    }

    #[test]
    fn wrong_param_type_is_located() {
        let text = BASE.replace("\"alpha\": 0.0", "\"alpha\": \"zero\"");
        let err = ExperimentConfig::from_json(&text)
            .unwrap()
            .resolve()
            .unwrap_err();
        assert!(err.to_string().contains("potential.params.alpha"), "{err}");
    }

    #[test]
    fn constant_boundary_by_label() {
        let text = BASE.replace(
            "\"beta\": 0.1",
            "\"beta\": 0.1, \"boundary\": {\"rule\": \"constant\", \"params\": {\"label\": \"-\"}}",
        );
        let r = ExperimentConfig::from_json(&text)
            .unwrap()
            .resolve()
            .unwrap();
        assert_eq!(r.bc, BoundaryCondition::Constant { label: 1 });
        let bad = text.replace("\"label\": \"-\"", "\"label\": \"x\"");
        let err = ExperimentConfig::from_json(&bad)
            .unwrap()
            .resolve()
            .unwrap_err();
        assert!(err.to_string().contains("boundary.params.label"));
    }
}
