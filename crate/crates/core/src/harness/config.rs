//! Run configuration: typed schema, TOML files, and override merging.
//!
//! Precedence is strictly `--override` > config file > built-in defaults.
//! The merge happens on the TOML value tree, so a file or override only
//! touches the keys it names; everything else keeps its default. The typed
//! schema rejects unknown keys, which catches typos at load time instead of
//! silently running a default.

use crate::control::{LagrangianState, TrainingSchedule, UpdateCadence};
use crate::envs::{BanditParams, ConsumptionParams, PortfolioParams, ThreeArmBandit};
use crate::error::{Error, Result};
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::path::Path;

/// Which experiment driver a config feeds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Bandit,
    Portfolio,
    Consumption,
    Landscape,
    Predict,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Bandit => "bandit",
            Experiment::Portfolio => "portfolio",
            Experiment::Consumption => "consumption",
            Experiment::Landscape => "landscape",
            Experiment::Predict => "predict",
        }
    }

    /// Output file written into the `--out` directory.
    pub fn csv_name(&self) -> &'static str {
        match self {
            Experiment::Bandit => "bandit.csv",
            Experiment::Portfolio => "portfolio.csv",
            Experiment::Consumption => "consumption.csv",
            Experiment::Landscape => "landscape.csv",
            Experiment::Predict => "predict.csv",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A constraint threshold that may be unbounded. Unbounded is spelled
/// `"inf"` in config files (a bare TOML `inf` float is accepted too) and
/// selects the unconstrained mode: the multiplier is pinned at zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NuValue(pub f64);

impl NuValue {
    pub fn unbounded() -> Self {
        NuValue(f64::INFINITY)
    }

    pub fn is_unbounded(&self) -> bool {
        self.0.is_infinite()
    }

    /// Stable text form used in CSV columns: `inf` or the plain number.
    pub fn label(&self) -> String {
        if self.is_unbounded() {
            "inf".to_string()
        } else {
            format!("{}", self.0)
        }
    }
}

impl Serialize for NuValue {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        if self.is_unbounded() {
            serializer.serialize_str("inf")
        } else {
            serializer.serialize_f64(self.0)
        }
    }
}

struct NuVisitor;

impl Visitor<'_> for NuVisitor {
    type Value = NuValue;

    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("a non-negative number or the string \"inf\"")
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<NuValue, E> {
        Ok(NuValue(v))
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<NuValue, E> {
        Ok(NuValue(v as f64))
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<NuValue, E> {
        Ok(NuValue(v as f64))
    }

    fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<NuValue, E> {
        match v {
            "inf" | "+inf" => Ok(NuValue::unbounded()),
            other => Err(E::custom(format!(
                "threshold must be a number or \"inf\", got {other:?}"
            ))),
        }
    }
}

impl<'de> Deserialize<'de> for NuValue {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        deserializer.deserialize_any(NuVisitor)
    }
}

/// Per-step threshold function for the transformed reward.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetKind {
    /// Constant return-level target `tau`, spread uniformly per step.
    Fixed,
    /// The learned mean reward of the current pair: penalises falling
    /// below the typical reward at `(s, a)`.
    Centralised,
    /// Consumption benchmark `W_t·Δt·(T − t)`: the reward of spending the
    /// current wealth at a constant rate for the rest of the episode.
    Pacing,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    pub kind: TargetKind,
    /// Return-level target for `kind = "fixed"`.
    pub tau: f64,
    /// Partial-moment order m (m ≥ 2 needs single-step episodes).
    pub order: u32,
    /// LMS rate for the mean-reward estimator behind `centralised` targets
    /// on continuous state spaces.
    pub estimator_step: f64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriticSpec {
    pub step_size: f64,
    pub discount: f64,
    pub trace_decay: f64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySpec {
    /// Fourier basis order for continuous-state policies.
    pub fourier_order: u32,
    /// Wealth normalisation scale for the consumption policy features.
    pub w_scale: f64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LagrangianSpec {
    /// Constraint threshold ν; `"inf"` disables the constraint.
    pub nu: NuValue,
    pub step_size: f64,
    pub initial: f64,
    /// When set, the multiplier is held at this value and ν is ignored
    /// (penalty-style objectives and ablations).
    pub constant_lambda: Option<f64>,
}

impl LagrangianSpec {
    pub fn to_state(&self) -> Result<LagrangianState> {
        if let Some(lambda) = self.constant_lambda {
            return LagrangianState::constant(lambda);
        }
        if self.nu.is_unbounded() {
            return LagrangianState::constant(0.0);
        }
        LagrangianState::adaptive(self.initial, self.nu.0, self.step_size)
    }

    /// Same construction with the threshold swapped in (used by ν-sweeps).
    pub fn with_nu(&self, nu: NuValue) -> LagrangianSpec {
        LagrangianSpec { nu, ..*self }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CadenceUnit {
    Episodes,
    Steps,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    pub cadence_unit: CadenceUnit,
    pub cadence: usize,
    pub eta: f64,
    pub pretrain_episodes: usize,
    pub total_episodes: usize,
    pub max_steps_per_episode: usize,
    pub eval_every: usize,
    pub eval_rollouts: usize,
    pub constraint_window: usize,
    pub snapshot_every: usize,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandscapeSpec {
    pub resolution: usize,
    pub rollouts: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictSpec {
    /// Interior policy-parameter values; the run covers the full grid
    /// `grid × grid`.
    pub grid: Vec<f64>,
    pub train_episodes: usize,
    pub mc_rollouts: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub nu_values: Vec<NuValue>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSpec {
    /// Moving-average window applied to evaluation curves.
    pub smoothing_window: usize,
    /// Post-training rollout count for frontier evaluation.
    pub final_rollouts: usize,
}

/// Complete, concrete configuration for one experiment run. Every field is
/// serialised, so `parse(serialize(cfg)) == cfg`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub trials: usize,
    pub base_seed: u64,
    /// Output directory; empty means "fall back to --out, the
    /// `LPMRL_OUT_DIR` environment variable, or the working directory".
    pub out_dir: String,
    pub bandit_env: BanditParams,
    pub portfolio_env: PortfolioParams,
    pub consumption_env: ConsumptionParams,
    pub policy: PolicySpec,
    pub critic: CriticSpec,
    pub target: TargetSpec,
    pub lagrangian: LagrangianSpec,
    pub schedule: ScheduleSpec,
    pub landscape: LandscapeSpec,
    pub predict: PredictSpec,
    pub sweep: SweepSpec,
    pub eval: EvalSpec,
}

impl RunConfig {
    /// Built-in defaults for each experiment, following the published
    /// per-domain settings (critic rates, discounts, traces, cadences,
    /// pretraining budgets). The checked-in files under `configs/` carry
    /// recipes recalibrated for desk-scale runs; see the comments there.
    pub fn defaults(experiment: Experiment) -> Self {
        let mut cfg = RunConfig {
            experiment,
            trials: 1,
            base_seed: 2024,
            out_dir: String::new(),
            bandit_env: BanditParams::default(),
            portfolio_env: PortfolioParams::default(),
            consumption_env: ConsumptionParams::default(),
            policy: PolicySpec {
                fourier_order: 3,
                w_scale: 4.0,
            },
            critic: CriticSpec {
                step_size: 0.01,
                discount: 1.0,
                trace_decay: 0.0,
            },
            target: TargetSpec {
                kind: TargetKind::Fixed,
                tau: 0.0,
                order: 1,
                estimator_step: 0.001,
            },
            lagrangian: LagrangianSpec {
                nu: NuValue::unbounded(),
                step_size: 0.001,
                initial: 0.0,
                constant_lambda: None,
            },
            schedule: ScheduleSpec {
                cadence_unit: CadenceUnit::Episodes,
                cadence: 100,
                eta: 0.001,
                pretrain_episodes: 0,
                total_episodes: 10_000,
                max_steps_per_episode: 1,
                eval_every: 0,
                eval_rollouts: 0,
                constraint_window: 100,
                snapshot_every: 0,
            },
            landscape: LandscapeSpec {
                resolution: 51,
                rollouts: 2_000,
            },
            predict: PredictSpec {
                grid: vec![0.1, 0.3, 0.5, 0.7, 0.9],
                train_episodes: 40_000,
                mc_rollouts: 20_000,
            },
            sweep: SweepSpec { nu_values: vec![] },
            eval: EvalSpec {
                smoothing_window: 100,
                final_rollouts: 10_000,
            },
        };
        match experiment {
            Experiment::Bandit => {
                cfg.trials = 100;
                cfg.critic = CriticSpec {
                    step_size: 0.005,
                    discount: 1.0,
                    trace_decay: 0.0,
                };
                cfg.target.kind = TargetKind::Centralised;
                cfg.lagrangian.constant_lambda = Some(0.0);
                cfg.schedule = ScheduleSpec {
                    cadence_unit: CadenceUnit::Episodes,
                    cadence: 100,
                    eta: 0.001,
                    pretrain_episodes: 0,
                    total_episodes: 10_000,
                    max_steps_per_episode: 1,
                    eval_every: 0,
                    eval_rollouts: 0,
                    constraint_window: 100,
                    snapshot_every: 1,
                };
            }
            Experiment::Portfolio => {
                cfg.trials = 3;
                cfg.critic = CriticSpec {
                    step_size: 1e-4,
                    discount: 0.99,
                    trace_decay: 1.0,
                };
                cfg.target.kind = TargetKind::Centralised;
                cfg.lagrangian = LagrangianSpec {
                    nu: NuValue(0.5),
                    step_size: 0.001,
                    initial: 0.0,
                    constant_lambda: None,
                };
                cfg.schedule = ScheduleSpec {
                    cadence_unit: CadenceUnit::Steps,
                    cadence: 200,
                    eta: 1e-4,
                    pretrain_episodes: 1_000,
                    total_episodes: 50_000,
                    max_steps_per_episode: 50,
                    eval_every: 0,
                    eval_rollouts: 0,
                    constraint_window: 100,
                    snapshot_every: 0,
                };
                cfg.sweep.nu_values = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0].map(NuValue).to_vec();
            }
            Experiment::Consumption => {
                cfg.trials = 3;
                cfg.critic = CriticSpec {
                    step_size: 1e-5,
                    discount: 1.0,
                    trace_decay: 0.97,
                };
                cfg.target.kind = TargetKind::Pacing;
                cfg.lagrangian = LagrangianSpec {
                    nu: NuValue(0.05),
                    step_size: 0.0025,
                    initial: 0.0,
                    constant_lambda: None,
                };
                cfg.schedule = ScheduleSpec {
                    cadence_unit: CadenceUnit::Steps,
                    cadence: 1_000,
                    eta: 1e-5,
                    pretrain_episodes: 1_000,
                    total_episodes: 100_000,
                    max_steps_per_episode: 200,
                    eval_every: 100,
                    eval_rollouts: 100,
                    constraint_window: 100,
                    snapshot_every: 0,
                };
                cfg.sweep.nu_values =
                    vec![NuValue(0.05), NuValue(0.1), NuValue::unbounded()];
            }
            Experiment::Landscape | Experiment::Predict => {}
        }
        cfg
    }

    pub fn to_schedule(&self) -> TrainingSchedule {
        let cadence = match self.schedule.cadence_unit {
            CadenceUnit::Episodes => UpdateCadence::Episodes(self.schedule.cadence),
            CadenceUnit::Steps => UpdateCadence::Steps(self.schedule.cadence),
        };
        TrainingSchedule {
            discount: self.critic.discount,
            cadence,
            eta: self.schedule.eta,
            pretrain_episodes: self.schedule.pretrain_episodes,
            total_episodes: self.schedule.total_episodes,
            max_steps_per_episode: self.schedule.max_steps_per_episode,
            eval_every: self.schedule.eval_every,
            eval_rollouts: self.schedule.eval_rollouts,
            constraint_window: self.schedule.constraint_window,
            snapshot_every: self.schedule.snapshot_every,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        match self.experiment {
            Experiment::Bandit => {
                ThreeArmBandit::new(self.bandit_env)?;
            }
            Experiment::Portfolio => {
                self.portfolio_env.validate()?;
                if self.sweep.nu_values.is_empty() {
                    return Err(Error::Config(
                        "sweep.nu_values must name at least one threshold".into(),
                    ));
                }
                for nu in &self.sweep.nu_values {
                    if !(0.0..=1.0).contains(&nu.0) {
                        return Err(Error::Config(format!(
                            "portfolio thresholds must lie in [0, 1], got {}",
                            nu.label()
                        )));
                    }
                }
            }
            Experiment::Consumption => {
                self.consumption_env.validate()?;
                if self.sweep.nu_values.is_empty() {
                    return Err(Error::Config(
                        "sweep.nu_values must name at least one threshold".into(),
                    ));
                }
                for nu in &self.sweep.nu_values {
                    if !nu.is_unbounded() && !(nu.0 >= 0.0 && nu.0.is_finite()) {
                        return Err(Error::Config(format!(
                            "consumption thresholds must be non-negative or \"inf\", got {}",
                            nu.label()
                        )));
                    }
                }
                if self.eval.smoothing_window == 0 {
                    return Err(Error::Config("eval.smoothing_window must be at least 1".into()));
                }
                if self.schedule.eval_every == 0 {
                    return Err(Error::Config(
                        "consumption runs need a periodic evaluation cadence".into(),
                    ));
                }
            }
            Experiment::Landscape => {
                if self.landscape.resolution < 2 {
                    return Err(Error::Config("landscape.resolution must be at least 2".into()));
                }
                if self.landscape.rollouts == 0 {
                    return Err(Error::Config("landscape.rollouts must be at least 1".into()));
                }
            }
            Experiment::Predict => {
                if self.predict.grid.is_empty() {
                    return Err(Error::Config("predict.grid must be non-empty".into()));
                }
                for &p in &self.predict.grid {
                    if !(p > 0.0 && p < 1.0) {
                        return Err(Error::Config(format!(
                            "predict.grid values must lie strictly inside (0, 1), got {p}"
                        )));
                    }
                }
                if self.predict.train_episodes == 0 || self.predict.mc_rollouts < 2 {
                    return Err(Error::Config(
                        "predict needs train_episodes ≥ 1 and mc_rollouts ≥ 2".into(),
                    ));
                }
            }
        }
        if self.target.order == 0 {
            return Err(Error::Config("target.order must be at least 1".into()));
        }
        if self.target.kind == TargetKind::Fixed && !self.target.tau.is_finite() {
            return Err(Error::Config("fixed targets need a finite tau".into()));
        }
        if self.target.estimator_step <= 0.0 {
            return Err(Error::Config("target.estimator_step must be positive".into()));
        }
        if self.critic.step_size <= 0.0 {
            return Err(Error::Config("critic.step_size must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.critic.discount) {
            return Err(Error::Config("critic.discount must lie in [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.critic.trace_decay) {
            return Err(Error::Config("critic.trace_decay must lie in [0, 1]".into()));
        }
        self.lagrangian.to_state().map_err(reclassify)?;
        self.to_schedule().validate().map_err(reclassify)?;
        Ok(())
    }
}

/// Validation failures found while checking a config are config errors,
/// whatever layer noticed them.
fn reclassify(err: Error) -> Error {
    match err {
        Error::Precondition(msg) => Error::Config(msg),
        other => other,
    }
}

/// Line (1-based) on which `key` is set or opened in `text`, for anchoring
/// schema errors to the offending spot in the user's file.
fn key_line(text: &str, key: &str) -> Option<usize> {
    for (index, line) in text.lines().enumerate() {
        let trimmed = line.trim_start();
        let body = trimmed.strip_prefix('[').unwrap_or(trimmed);
        if let Some(rest) = body.strip_prefix(key) {
            if matches!(rest.trim_start().chars().next(), Some('=' | '.' | ']') | None) {
                return Some(index + 1);
            }
        }
    }
    None
}

/// Walk the user's parsed file against the schema (a serialised exemplar
/// with every optional field populated, so all legal keys appear) and
/// reject unknown keys up front. The later typed deserialisation would
/// also catch them, but only after the merge has erased source positions;
/// here the error still points at a line.
fn check_unknown_keys(
    schema: &toml::Value,
    file: &toml::Value,
    text: &str,
    source: &str,
    path: &mut Vec<String>,
) -> Result<()> {
    let (Some(schema_table), Some(file_table)) = (schema.as_table(), file.as_table()) else {
        return Ok(());
    };
    for (key, value) in file_table {
        path.push(key.clone());
        match schema_table.get(key) {
            Some(slot) => check_unknown_keys(slot, value, text, source, path)?,
            None => {
                let full = path.join(".");
                let anchor = key_line(text, key)
                    .map(|line| format!("line {line}: "))
                    .unwrap_or_default();
                return Err(Error::Config(format!(
                    "{source}: {anchor}unknown key `{full}`"
                )));
            }
        }
        path.pop();
    }
    Ok(())
}

///// Deep merge: tables combine key-wise, everything else is replaced.
fn merge_value(dst: &mut toml::Value, src: toml::Value) {
    match (dst, src) {
        (toml::Value::Table(dst_table), toml::Value::Table(src_table)) => {
            for (key, value) in src_table {
                match dst_table.get_mut(&key) {
                    Some(slot) => merge_value(slot, value),
                    None => {
                        dst_table.insert(key, value);
                    }
                }
            }
        }
        (slot, value) => *slot = value,
    }
}

/// Parse the right-hand side of an override. Anything that reads as a TOML
/// value (numbers, booleans, arrays, quoted strings, `inf`) is taken as
/// such; everything else is a bare string, so `--override out_dir=/tmp/x`
/// works without quoting.
fn parse_override_value(raw: &str) -> toml::Value {
    #[derive(Deserialize)]
    struct Holder {
        v: toml::Value,
    }
    match toml::from_str::<Holder>(&format!("v = {raw}")) {
        Ok(holder) => holder.v,
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

fn apply_override(root: &mut toml::Value, spec: &str) -> Result<()> {
    let (key, raw_value) = spec.split_once('=').ok_or_else(|| {
        Error::Config(format!("override {spec:?} must have the form key=value"))
    })?;
    let key = key.trim();
    if key.is_empty() {
        return Err(Error::Config(format!("override {spec:?} has an empty key")));
    }
    let segments: Vec<&str> = key.split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        return Err(Error::Config(format!("override key {key:?} has an empty segment")));
    }
    let (leaf, parents) = segments.split_last().expect("split produced a segment");
    let mut cursor = root;
    for segment in parents {
        cursor = cursor
            .as_table_mut()
            .ok_or_else(|| {
                Error::Config(format!("override key {key:?} descends into a non-table value"))
            })?
            .entry(segment.to_string())
            .or_insert_with(|| toml::Value::Table(toml::map::Map::new()));
    }
    let table = cursor.as_table_mut().ok_or_else(|| {
        Error::Config(format!("override key {key:?} descends into a non-table value"))
    })?;
    table.insert(leaf.to_string(), parse_override_value(raw_value.trim()));
    Ok(())
}

/// Assemble a config from defaults, optional file text, and overrides,
/// in precedence order. `source` names the file in error messages.
pub fn load_from_sources(
    experiment: Experiment,
    file: Option<(&str, &str)>,
    overrides: &[String],
) -> Result<RunConfig> {
    let defaults = RunConfig::defaults(experiment);
    let mut value =
        toml::Value::try_from(&defaults).map_err(|e| Error::Config(e.to_string()))?;
    if let Some((source, text)) = file {
        let file_value: toml::Value = toml::from_str(text)
            .map_err(|e| Error::Config(format!("{source}: {e}")))?;
        // The schema for the unknown-key check needs every legal key present,
        // so optional fields are filled in before serialising (TOML omits
        // `None`, which would otherwise make the key look unknown).
        let mut exemplar = defaults.clone();
        exemplar.lagrangian.constant_lambda = Some(0.0);
        let schema =
            toml::Value::try_from(&exemplar).map_err(|e| Error::Config(e.to_string()))?;
        check_unknown_keys(&schema, &file_value, text, source, &mut Vec::new())?;
        merge_value(&mut value, file_value);
    }
    for spec in overrides {
        apply_override(&mut value, spec)?;
    }
    let config: RunConfig = value
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    if config.experiment != experiment {
        return Err(Error::Config(format!(
            "config names experiment {} but the {} driver was invoked",
            config.experiment, experiment
        )));
    }
    config.validate()?;
    Ok(config)
}

/// Load for a known experiment (the CLI subcommand decides which).
pub fn load(
    experiment: Experiment,
    path: Option<&Path>,
    overrides: &[String],
) -> Result<RunConfig> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            load_from_sources(experiment, Some((&p.display().to_string(), &text)), overrides)
        }
        None => load_from_sources(experiment, None, overrides),
    }
}

/// Load when only the file knows the experiment (`validate-config`).
pub fn load_for_validation(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let value: toml::Value = toml::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let experiment = value
        .get("experiment")
        .and_then(|v| v.as_str())
        .ok_or_else(|| {
            Error::Config(format!(
                "{}: missing required key `experiment`",
                path.display()
            ))
        })?;
    let experiment: Experiment = toml::Value::String(experiment.to_string())
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    load_from_sources(
        experiment,
        Some((&path.display().to_string(), &text)),
        &[],
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn as_toml(cfg: &RunConfig) -> String {
        toml::to_string(cfg).unwrap()
    }

    #[test]
    fn defaults_round_trip_through_toml() {
        for experiment in [
            Experiment::Bandit,
            Experiment::Portfolio,
            Experiment::Consumption,
            Experiment::Landscape,
            Experiment::Predict,
        ] {
            let cfg = RunConfig::defaults(experiment);
            let text = as_toml(&cfg);
            let reparsed: RunConfig = toml::from_str(&text).unwrap();
            assert_eq!(text, as_toml(&reparsed), "{experiment} drifted in round-trip");
            cfg.validate().unwrap();
        }
    }

    #[test]
    fn file_beats_defaults_and_overrides_beat_file() {
        let file = "trials = 7\n[schedule]\ntotal_episodes = 123\n";
        let cfg = load_from_sources(Experiment::Bandit, Some(("test.toml", file)), &[]).unwrap();
        assert_eq!(cfg.trials, 7);
        assert_eq!(cfg.schedule.total_episodes, 123);
        // Untouched keys keep their defaults.
        assert_eq!(cfg.schedule.cadence, 100);

        let overrides = vec!["trials=9".to_string(), "schedule.cadence=50".to_string()];
        let cfg = load_from_sources(Experiment::Bandit, Some(("test.toml", file)), &overrides)
            .unwrap();
        assert_eq!(cfg.trials, 9);
        assert_eq!(cfg.schedule.total_episodes, 123);
        assert_eq!(cfg.schedule.cadence, 50);
    }

    #[test]
    fn unbounded_thresholds_parse_from_files_and_overrides() {
        let file = "[lagrangian]\nnu = \"inf\"\n";
        let cfg =
            load_from_sources(Experiment::Consumption, Some(("t.toml", file)), &[]).unwrap();
        assert!(cfg.lagrangian.nu.is_unbounded());
        assert_eq!(cfg.lagrangian.to_state().unwrap().lambda(), 0.0);

        let cfg = load_from_sources(
            Experiment::Consumption,
            None,
            &["lagrangian.nu=inf".to_string()],
        )
        .unwrap();
        assert!(cfg.lagrangian.nu.is_unbounded());
        assert_eq!(cfg.lagrangian.nu.label(), "inf");
    }

    #[test]
    fn unknown_keys_are_rejected_with_the_offending_name() {
        let err = load_from_sources(
            Experiment::Bandit,
            Some(("t.toml", "trails = 3\n")),
            &[],
        )
        .unwrap_err();
        assert!(err.to_string().contains("trails"), "{err}");
    }

    #[test]
    fn unknown_keys_are_anchored_to_their_line() {
        let text = "experiment = \"bandit\"\n\n[schedule]\ncadense = 10\n";
        let err = load_from_sources(Experiment::Bandit, Some(("t.toml", text)), &[])
            .unwrap_err()
            .to_string();
        assert!(err.contains("line 4"), "{err}");
        assert!(err.contains("schedule.cadense"), "{err}");
    }

    #[test]
    fn optional_keys_absent_from_the_defaults_are_still_legal() {
        let text = "experiment = \"bandit\"\n[lagrangian]\nconstant_lambda = 0.7\n";
        let cfg = load_from_sources(Experiment::Bandit, Some(("t.toml", text)), &[]).unwrap();
        assert_eq!(cfg.lagrangian.constant_lambda, Some(0.7));
    }

    #[test]
    fn parse_errors_carry_line_information() {
        let err = load_from_sources(
            Experiment::Bandit,
            Some(("broken.toml", "trials = [unclosed\n")),
            &[],
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("broken.toml"), "{msg}");
        assert!(msg.contains("line"), "{msg}");
    }

    #[test]
    fn malformed_overrides_are_config_errors() {
        let err = load_from_sources(Experiment::Bandit, None, &["trials".to_string()])
            .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        let err =
            load_from_sources(Experiment::Bandit, None, &["schedule..x=1".to_string()])
                .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn override_values_keep_their_types() {
        let overrides = vec![
            "out_dir=/tmp/results".to_string(),
            "critic.discount=1".to_string(),
            "sweep.nu_values=[0.0, 0.4]".to_string(),
        ];
        let cfg = load_from_sources(Experiment::Portfolio, None, &overrides).unwrap();
        assert_eq!(cfg.out_dir, "/tmp/results");
        assert_eq!(cfg.critic.discount, 1.0);
        assert_eq!(cfg.sweep.nu_values, vec![NuValue(0.0), NuValue(0.4)]);
    }

    #[test]
    fn validation_rejects_out_of_range_settings() {
        let err = load_from_sources(Experiment::Bandit, None, &["trials=0".to_string()])
            .unwrap_err();
        assert!(err.to_string().contains("trials"));
        let err = load_from_sources(
            Experiment::Landscape,
            None,
            &["landscape.resolution=1".to_string()],
        )
        .unwrap_err();
        assert!(err.to_string().contains("resolution"));
        let err = load_from_sources(
            Experiment::Portfolio,
            None,
            &["sweep.nu_values=[1.5]".to_string()],
        )
        .unwrap_err();
        assert!(err.to_string().contains("[0, 1]"));
        let err = load_from_sources(
            Experiment::Predict,
            None,
            &["predict.grid=[0.0]".to_string()],
        )
        .unwrap_err();
        assert!(err.to_string().contains("strictly inside"));
    }

    #[test]
    fn experiment_mismatch_is_reported() {
        let err = load_from_sources(
            Experiment::Bandit,
            Some(("t.toml", "experiment = \"portfolio\"\n")),
            &[],
        )
        .unwrap_err();
        assert!(err.to_string().contains("portfolio"));
    }
}
