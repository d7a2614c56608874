//! Synthetic measurements, the localization success metric, the Monte Carlo
//! sweep, and noiseless per-iteration damage studies.
//!
//! Element ids are 0-based here; scenario files and report tables use
//! 1-based labels.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::Uniform;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fem::{StiffnessParams, TrussModel};
use crate::sensitivity::{modes_at, SensitivityError};
use crate::solvers::{self, IrlsOptions, Method, SupportThresholds};
use crate::updating::{one_shot, run_update, EpsilonRule, UpdateConfig, UpdateError, UpdateResult};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("truth model: {0}")]
    Truth(#[from] SensitivityError),
    #[error(transparent)]
    Update(#[from] UpdateError),
}

impl ExperimentError {
    pub fn is_numerical(&self) -> bool {
        match self {
            ExperimentError::Scenario(_) | ExperimentError::Config(_) => false,
            ExperimentError::Truth(e) => e.is_numerical(),
            ExperimentError::Update(e) => e.is_numerical(),
        }
    }
}

/// Stiffness loss on a few elements.
#[derive(Clone, Debug, PartialEq)]
pub struct DamageScenario {
    /// `(element id, severity)`, severity in `(0, 1)`.
    pub damaged: Vec<(usize, f64)>,
    pub label: String,
}

impl DamageScenario {
    /// `severity` on the canonical elements labelled 2 and 18.
    pub fn canonical(severity: f64) -> Self {
        Self {
            damaged: vec![(1, severity), (17, severity)],
            label: format!("bars 2 and 18 at {:.0}%", severity * 100.0),
        }
    }

    pub fn validate(&self, n_elements: usize) -> Result<(), ExperimentError> {
        let mut seen = BTreeSet::new();
        for &(id, severity) in &self.damaged {
            if id >= n_elements {
                return Err(ExperimentError::Scenario(format!(
                    "element label {} out of range 1..={n_elements}",
                    id + 1
                )));
            }
            if !(severity > 0.0 && severity < 1.0) {
                return Err(ExperimentError::Scenario(format!(
                    "severity {severity} of element {} outside (0, 1)",
                    id + 1
                )));
            }
            if !seen.insert(id) {
                return Err(ExperimentError::Scenario(format!("element {} listed twice", id + 1)));
            }
        }
        Ok(())
    }

    pub fn damaged_ids(&self) -> BTreeSet<usize> {
        self.damaged.iter().map(|(id, _)| *id).collect()
    }

    pub fn truth_params(&self, n_elements: usize) -> StiffnessParams<f64> {
        let mut theta = DVector::from_element(n_elements, 1.0);
        for &(id, severity) in &self.damaged {
            theta[id] = 1.0 - severity;
        }
        StiffnessParams::new(theta)
    }

    /// Truth change vector `θ_truth − 1`.
    pub fn truth_change(&self, n_elements: usize) -> DVector<f64> {
        self.truth_params(n_elements).theta.map(|t| t - 1.0)
    }

    pub fn to_document(&self) -> ScenarioDocument {
        ScenarioDocument {
            damaged: self
                .damaged
                .iter()
                .map(|&(id, severity)| DamagedElement {
                    element: id + 1,
                    severity,
                })
                .collect(),
            label: self.label.clone(),
        }
    }
}

/// Scenario file: `{"damaged": [{"element": 2, "severity": 0.2}], "label": ".."}`
/// with 1-based element labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDocument {
    pub damaged: Vec<DamagedElement>,
    #[serde(default)]
    pub label: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DamagedElement {
    pub element: usize,
    pub severity: f64,
}

impl ScenarioDocument {
    pub fn to_scenario(&self) -> Result<DamageScenario, ExperimentError> {
        let damaged = self
            .damaged
            .iter()
            .map(|d| {
                if d.element == 0 {
                    Err(ExperimentError::Scenario("element labels start at 1".into()))
                } else {
                    Ok((d.element - 1, d.severity))
                }
            })
            .collect::<Result<_, _>>()?;
        Ok(DamageScenario {
            damaged,
            label: self.label.clone(),
        })
    }
}

/// Independent uniform multiplicative noise of up to `level_percent` % per
/// frequency.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub level_percent: f64,
}

impl NoiseSpec {
    pub fn noiseless() -> Self {
        Self { level_percent: 0.0 }
    }
}

/// The `m` lowest frequencies (Hz) of the scenario's truth model.
pub fn truth_frequencies(
    model: &TrussModel<f64>,
    scenario: &DamageScenario,
    m: usize,
) -> Result<Vec<f64>, ExperimentError> {
    scenario.validate(model.n_elements())?;
    let modal = modes_at(model, &scenario.truth_params(model.n_elements()), m)?;
    Ok(modal.frequencies.iter().take(m).copied().collect())
}

/// `f_m = f_e·(1 + u/100)`, `u ~ Uniform[−no, no]` drawn per frequency.
pub fn apply_noise<R: Rng>(exact: &[f64], noise: NoiseSpec, rng: &mut R) -> Vec<f64> {
    let level = noise.level_percent;
    if level == 0.0 {
        return exact.to_vec();
    }
    let dist = Uniform::new_inclusive(-level, level).expect("finite noise level");
    let noisy: Vec<f64> = exact
        .iter()
        .map(|f| f * (1.0 + rng.sample(dist) / 100.0))
        .collect();
    for (fm, fe) in noisy.iter().zip(exact) {
        assert!(
            ((fm / fe - 1.0).abs()) <= level / 100.0 * (1.0 + 1e-12),
            "noise bound violated"
        );
    }
    noisy
}

/// Noisy frequencies reported in ascending order, as a measured spectrum
/// would be. Close modes can swap under noise; pairing is by rank.
pub fn measured_spectrum<R: Rng>(exact: &[f64], noise: NoiseSpec, rng: &mut R) -> Vec<f64> {
    let mut f = apply_noise(exact, noise, rng);
    f.sort_by(f64::total_cmp);
    f
}

/// Noisy truth frequencies for one realization, ascending.
pub fn simulate_measurement<R: Rng>(
    model: &TrussModel<f64>,
    scenario: &DamageScenario,
    m: usize,
    noise: NoiseSpec,
    rng: &mut R,
) -> Result<Vec<f64>, ExperimentError> {
    if !(noise.level_percent >= 0.0) {
        return Err(ExperimentError::Config("noise level must be nonnegative".into()));
    }
    let exact = truth_frequencies(model, scenario, m)?;
    Ok(measured_spectrum(&exact, noise, rng))
}

/// Localization success: the support contains every damaged element and has
/// fewer than `m` entries.
pub fn is_success(
    x: &DVector<f64>,
    scenario: &DamageScenario,
    m: usize,
    thresholds: SupportThresholds,
) -> bool {
    let support: BTreeSet<usize> = solvers::support(x, thresholds).into_iter().collect();
    support.len() < m && scenario.damaged_ids().is_subset(&support)
}

/// A solver choice in a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSpec {
    pub method: Method,
    /// Exponent for `lp_irls`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
}

impl MethodSpec {
    pub fn label(&self) -> String {
        match (self.method, self.p) {
            (Method::LpIrls, p) => format!("lp_irls(p={})", p.unwrap_or(0.5)),
            (m, _) => m.to_string(),
        }
    }
}

/// Which solution the success metric is applied to.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Evaluation {
    #[default]
    OneShot,
    Iterated,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MonteCarloConfig {
    pub scenario: DamageScenario,
    pub noise_levels: Vec<f64>,
    pub freq_counts: Vec<usize>,
    pub methods: Vec<MethodSpec>,
    pub realizations: usize,
    pub seed: u64,
    pub thresholds: SupportThresholds,
    pub evaluation: Evaluation,
    pub irls: IrlsOptions,
}

impl MonteCarloConfig {
    /// 20 % damage on bars 2 and 18; 1–5 % noise; 9–12 frequencies; L1 and
    /// Lp(0.5); 1000 realizations.
    pub fn default_sweep(seed: u64) -> Self {
        Self {
            scenario: DamageScenario::canonical(0.2),
            noise_levels: vec![1.0, 2.0, 3.0, 4.0, 5.0],
            freq_counts: vec![9, 10, 11, 12],
            methods: vec![
                MethodSpec {
                    method: Method::L1Ineq,
                    p: None,
                },
                MethodSpec {
                    method: Method::LpIrls,
                    p: Some(0.5),
                },
            ],
            realizations: 1000,
            seed,
            thresholds: SupportThresholds::default(),
            evaluation: Evaluation::OneShot,
            irls: IrlsOptions::default(),
        }
    }

    pub fn validate(&self, model: &TrussModel<f64>) -> Result<(), ExperimentError> {
        self.scenario.validate(model.n_elements())?;
        if self.realizations == 0 {
            return Err(ExperimentError::Config("realizations must be at least 1".into()));
        }
        if self.methods.is_empty() || self.freq_counts.is_empty() || self.noise_levels.is_empty() {
            return Err(ExperimentError::Config("empty sweep axis".into()));
        }
        if self.methods.len() > 255 || self.noise_levels.len() > 255 {
            return Err(ExperimentError::Config("too many sweep entries".into()));
        }
        if let Some(l) = self.noise_levels.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
            return Err(ExperimentError::Config(format!("bad noise level {l}")));
        }
        if let Some(m) = self
            .freq_counts
            .iter()
            .find(|&&m| m == 0 || m > model.n_dof() || m > 255)
        {
            return Err(ExperimentError::Config(format!(
                "frequency count {m} outside 1..={}",
                model.n_dof()
            )));
        }
        if self.realizations > u32::MAX as usize {
            return Err(ExperimentError::Config("too many realizations".into()));
        }
        Ok(())
    }

    /// Updating configuration for one sweep cell. `l1_ineq` uses the
    /// noise-derived bound with the generator's level (oracle knowledge).
    pub fn cell_config(&self, spec: MethodSpec, m: usize, level: f64) -> UpdateConfig<f64> {
        let mut config = UpdateConfig::new(spec.method, m);
        config.p = spec.p.unwrap_or(0.5);
        config.irls = self.irls.clone();
        config.thresholds = self.thresholds;
        if spec.method == Method::L1Ineq {
            config.epsilon_rule = Some(EpsilonRule::NoiseDerived {
                assumed_percent: level,
            });
        }
        config
    }
}

/// Sweep file. Omitted fields take the default sweep's values; the seed is
/// supplied separately.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioDocument>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_levels: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub freq_counts: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub methods: Option<Vec<MethodSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub realizations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluation: Option<Evaluation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<SupportThresholds>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub irls: Option<IrlsOptions>,
}

impl SweepDocument {
    pub fn to_config(&self, seed: u64) -> Result<MonteCarloConfig, ExperimentError> {
        let mut config = MonteCarloConfig::default_sweep(seed);
        if let Some(doc) = &self.scenario {
            config.scenario = doc.to_scenario()?;
        }
        if let Some(v) = &self.noise_levels {
            config.noise_levels = v.clone();
        }
        if let Some(v) = &self.freq_counts {
            config.freq_counts = v.clone();
        }
        if let Some(v) = &self.methods {
            config.methods = v.clone();
        }
        if let Some(v) = self.realizations {
            config.realizations = v;
        }
        if let Some(v) = self.evaluation {
            config.evaluation = v;
        }
        if let Some(v) = self.thresholds {
            config.thresholds = v;
        }
        if let Some(v) = &self.irls {
            config.irls = v.clone();
        }
        Ok(config)
    }

    pub fn from_config(config: &MonteCarloConfig) -> Self {
        Self {
            scenario: Some(config.scenario.to_document()),
            noise_levels: Some(config.noise_levels.clone()),
            freq_counts: Some(config.freq_counts.clone()),
            methods: Some(config.methods.clone()),
            realizations: Some(config.realizations),
            evaluation: Some(config.evaluation),
            thresholds: Some(config.thresholds),
            irls: Some(config.irls.clone()),
        }
    }
}

/// Stream id of one realization: method, m and level indices in the top
/// 24 bits, the realization index in the low 32.
pub fn stream_id(method_index: usize, m: usize, level_index: usize, realization: usize) -> u64 {
    ((method_index as u64) << 56)
        | ((m as u64) << 48)
        | ((level_index as u64) << 40)
        | realization as u64
}

/// Counter-based generator for one realization of one cell.
pub fn cell_rng(seed: u64, method_index: usize, m: usize, level_index: usize, realization: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(method_index, m, level_index, realization));
    rng
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub method: String,
    pub m: usize,
    pub noise_pct: f64,
    pub successes: usize,
    /// Realizations where the solver or modal solve failed (counted as
    /// non-successes).
    pub failures: usize,
    pub realizations: usize,
    pub rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub cells: Vec<CellResult>,
    pub scenario: ScenarioDocument,
    pub noise_levels: Vec<f64>,
    pub freq_counts: Vec<usize>,
    pub methods: Vec<MethodSpec>,
    pub realizations: usize,
    pub evaluation: Evaluation,
    pub thresholds: SupportThresholds,
    pub seed: u64,
    pub rng: String,
    /// Wall-clock time; not serialized so reruns are byte-identical.
    #[serde(skip)]
    pub runtime: Duration,
}

impl ExperimentReport {
    pub fn cell(&self, method: &str, m: usize, noise_pct: f64) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.method == method && c.m == m && c.noise_pct == noise_pct)
    }
}

/// Runs every `(method, m, level)` cell for `config.realizations` noise
/// draws. Realizations run in parallel; each draws from its own stream, so
/// the report does not depend on scheduling.
pub fn run_monte_carlo(
    model: &TrussModel<f64>,
    config: &MonteCarloConfig,
) -> Result<ExperimentReport, ExperimentError> {
    let start = Instant::now();
    config.validate(model)?;
    let max_m = *config.freq_counts.iter().max().expect("validated non-empty");
    let exact = truth_frequencies(model, &config.scenario, max_m)?;

    let mut cells = Vec::new();
    for (mi, spec) in config.methods.iter().enumerate() {
        for &m in &config.freq_counts {
            for (li, &level) in config.noise_levels.iter().enumerate() {
                let update = config.cell_config(*spec, m, level);
                let noise = NoiseSpec {
                    level_percent: level,
                };
                let outcomes: Vec<Option<bool>> = (0..config.realizations)
                    .into_par_iter()
                    .map(|r| {
                        let mut rng = cell_rng(config.seed, mi, m, li, r);
                        let f = measured_spectrum(&exact[..m], noise, &mut rng);
                        let result = match config.evaluation {
                            Evaluation::OneShot => one_shot(model, &f, &update),
                            Evaluation::Iterated => run_update(model, &f, &update),
                        };
                        result
                            .ok()
                            .map(|res| is_success(&res.parameter_change(), &config.scenario, m, config.thresholds))
                    })
                    .collect();
                let successes = outcomes.iter().filter(|o| **o == Some(true)).count();
                let failures = outcomes.iter().filter(|o| o.is_none()).count();
                cells.push(CellResult {
                    method: spec.label(),
                    m,
                    noise_pct: level,
                    successes,
                    failures,
                    realizations: config.realizations,
                    rate: successes as f64 / config.realizations as f64,
                });
            }
        }
    }

    Ok(ExperimentReport {
        cells,
        scenario: config.scenario.to_document(),
        noise_levels: config.noise_levels.clone(),
        freq_counts: config.freq_counts.clone(),
        methods: config.methods.clone(),
        realizations: config.realizations,
        evaluation: config.evaluation,
        thresholds: config.thresholds,
        seed: config.seed,
        rng: "ChaCha8 seeded from seed; stream = method<<56 | m<<48 | level<<40 | realization".into(),
        runtime: start.elapsed(),
    })
}

/// Per-iteration damage estimates of a noiseless identification run.
#[derive(Clone, Debug, PartialEq)]
pub struct DamageStudy {
    pub scenario: DamageScenario,
    pub m: usize,
    pub result: UpdateResult<f64>,
}

/// One row of the bar-chart table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub iteration: usize,
    /// 1-based label.
    pub element: usize,
    pub damage_estimate: f64,
}

impl DamageStudy {
    pub fn rows(&self) -> Vec<StudyRow> {
        self.result
            .per_iteration
            .iter()
            .flat_map(|rec| {
                rec.damage.iter().enumerate().map(move |(i, d)| StudyRow {
                    iteration: rec.iteration,
                    element: i + 1,
                    damage_estimate: *d,
                })
            })
            .collect()
    }

    /// Mean absolute error of the damage estimate over the damaged elements
    /// at iteration `k` (1-based).
    pub fn damaged_error_at(&self, k: usize) -> f64 {
        damaged_error(&self.result.per_iteration[k - 1].damage, &self.scenario)
    }

    pub fn final_damaged_error(&self) -> f64 {
        damaged_error(&self.result.damage_estimates, &self.scenario)
    }
}

fn damaged_error(damage: &DVector<f64>, scenario: &DamageScenario) -> f64 {
    let total: f64 = scenario
        .damaged
        .iter()
        .map(|&(id, sev)| (damage[id] - sev).abs())
        .sum();
    total / scenario.damaged.len().max(1) as f64
}

/// Noiseless identification with the full updating loop.
pub fn run_damage_study(
    model: &TrussModel<f64>,
    scenario: &DamageScenario,
    m: usize,
    method: Method,
    max_iterations: usize,
) -> Result<DamageStudy, ExperimentError> {
    let mut config = UpdateConfig::new(method, m);
    config.max_iterations = max_iterations;
    run_damage_study_with(model, scenario, &config)
}

pub fn run_damage_study_with(
    model: &TrussModel<f64>,
    scenario: &DamageScenario,
    config: &UpdateConfig<f64>,
) -> Result<DamageStudy, ExperimentError> {
    let f = truth_frequencies(model, scenario, config.m)?;
    let result = run_update(model, &f, config)?;
    Ok(DamageStudy {
        scenario: scenario.clone(),
        m: config.m,
        result,
    })
}
