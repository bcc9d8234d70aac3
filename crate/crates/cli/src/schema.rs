//! JSON schema of the experiment configuration.
//!
//! The schema mirrors [`ExperimentConfig`](crate::config::ExperimentConfig)
//! field by field. The published copy lives in `schema/experiment.schema.json`
//! and the integration tests check it against the output of `lrclt schema`.

use schemars::JsonSchema;
use serde::Serialize;
use serde_json::Value;

#[derive(Serialize, JsonSchema)]
#[serde(rename_all = "camelCase")]
#[allow(dead_code)]
enum Convention {
    Unordered,
    Ordered,
}

#[derive(Serialize, JsonSchema)]
#[serde(rename_all = "kebab-case")]
#[allow(dead_code)]
enum TaskName {
    VerifyExpansion,
    Bounds,
    Lclt,
    Charfn,
    Decimate,
    Mc,
}

#[derive(Serialize, JsonSchema)]
#[serde(rename_all = "camelCase")]
#[allow(dead_code)]
enum FamilyName {
    LongRangeIsing,
    Geometric,
    FiniteRange,
    Zero,
    Table,
}

#[derive(Serialize, JsonSchema)]
#[serde(rename_all = "camelCase")]
#[allow(dead_code)]
enum RuleName {
    Free,
    Constant,
    Explicit,
}

#[derive(Serialize, JsonSchema)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
#[allow(dead_code)]
struct SpinSpace {
    labels: Vec<String>,
    weights: Vec<f64>,
    f: Vec<i64>,
}

/// `params` depends on `family`:
/// longRangeIsing `{J, alpha, spins?}`, geometric `{amplitude, ratio, spins?}`,
/// finiteRange `{values, spins?}`, zero `{}`,
/// table `{entries: [{displacement, energies}]}`.
#[derive(Serialize, JsonSchema)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
#[allow(dead_code)]
struct Potential {
    family: FamilyName,
    params: Option<Value>,
    #[schemars(range(min = 1))]
    truncation_radius: u32,
}

#[derive(Serialize, JsonSchema)]
#[serde(deny_unknown_fields)]
#[allow(dead_code)]
struct BoxSpec {
    #[schemars(range(min = 1))]
    d: usize,
    k: u32,
}

/// `params` depends on `rule`: free `{}`, constant `{label}`,
/// explicit `{spins: [{site, label}]}`.
#[derive(Serialize, JsonSchema)]
#[serde(deny_unknown_fields)]
#[allow(dead_code)]
struct Boundary {
    rule: RuleName,
    params: Option<Value>,
}

#[derive(Serialize, JsonSchema)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
#[allow(dead_code)]
struct Expansion {
    betas: Option<Vec<f64>>,
    ts: Option<Vec<f64>>,
    series_order: Option<usize>,
}

#[derive(Serialize, JsonSchema)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
#[allow(dead_code)]
struct Bounds {
    delta: Option<f64>,
    epsilon: Option<f64>,
    epsilon_c: Option<f64>,
    r0: Option<u32>,
    radius: Option<u64>,
    boundary_samples: Option<usize>,
}

#[derive(Serialize, JsonSchema)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
#[allow(dead_code)]
struct Kp {
    c: Option<f64>,
    beta: Option<f64>,
    max_bonds: Option<usize>,
    max_pair_range: Option<u64>,
    restrict_to_r2: Option<bool>,
}

#[derive(Serialize, JsonSchema)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
#[allow(dead_code)]
struct Lclt {
    ks: Option<Vec<u32>>,
    b: Option<f64>,
    delta: Option<f64>,
    resolution: Option<usize>,
}

#[derive(Serialize, JsonSchema)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
#[allow(dead_code)]
struct Charfn {
    grid: Option<usize>,
    high_t_beta: Option<f64>,
    tail_beta: Option<f64>,
}

#[derive(Serialize, JsonSchema)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
#[allow(dead_code)]
struct Decimation {
    r0: Option<u32>,
    samples: Option<usize>,
    grid: Option<usize>,
}

#[derive(Serialize, JsonSchema)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
#[allow(dead_code)]
struct Mc {
    sweeps: Option<u64>,
    burn_in: Option<u64>,
    thinning: Option<u64>,
}

/// Experiment configuration for `lrclt`.
#[derive(Serialize, JsonSchema)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
#[allow(dead_code)]
struct Experiment {
    spin_space: Option<SpinSpace>,
    potential: Potential,
    convention: Option<Convention>,
    #[serde(rename = "box")]
    bx: BoxSpec,
    boundary: Option<Boundary>,
    beta: f64,
    seed: Option<u64>,
    tasks: Option<Vec<TaskName>>,
    expansion: Option<Expansion>,
    bounds: Option<Bounds>,
    kp: Option<Kp>,
    lclt: Option<Lclt>,
    charfn: Option<Charfn>,
    decimation: Option<Decimation>,
    mc: Option<Mc>,
}

pub fn experiment_schema() -> Value {
    serde_json::to_value(schemars::schema_for!(Experiment)).expect("schema serializes")
}
