//! Scenario files: TOML with an explicit schema version; unknown keys are
//! rejected at every level.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use thermacro::micro::BurnIn;
use thermacro::model::ModelSpec;
use thermacro::micro::Channel;
use thermacro::protocols::carnot::Direction;
use thermacro::protocols::script::Step;
use thermacro::protocols::{AgentEconomy, Economy};
use thermacro::state::MacroState;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Analytic,
    Stochastic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    /// Master seed; replica seeds derive from it by counter.
    pub seed: u64,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicas: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub economies: Vec<EconomySpec>,
    #[serde(default)]
    pub sim: SimSettings,
    pub experiment: Experiment,
    #[serde(default, rename = "assert", skip_serializing_if = "Vec::is_empty")]
    pub assertions: Vec<AssertionSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EconomySpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub model: ModelSpec,
    pub money: f64,
    pub goods: Vec<f64>,
}

impl EconomySpec {
    fn label(&self, index: usize) -> String {
        self.name.clone().unwrap_or_else(|| format!("e{index}"))
    }

    pub fn economy(&self, index: usize, base: &Path) -> Result<Economy> {
        let model = self.model.build(base).with_context(|| format!("economy {index}: model"))?;
        Ok(Economy::new(&self.label(index), model, MacroState::new(self.money, &self.goods)?)?)
    }

    /// Agent realisation; only Cobb-Douglas economies have one.
    pub fn agents(&self, index: usize) -> Result<AgentEconomy> {
        let Some(params) = self.model.cobb_douglas_params() else {
            bail!("economy {index} must be cobb-douglas to be simulated with agents");
        };
        params.validate()?;
        Ok(AgentEconomy { params, state: MacroState::new(self.money, &self.goods)? })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSettings {
    #[serde(default = "default_sweeps")]
    pub sweeps: u64,
    #[serde(default = "one_u64")]
    pub thin: u64,
    #[serde(default)]
    pub burn_in: BurnIn,
    /// Rate of each cross-economy pair relative to the internal pair rate 1.
    #[serde(default = "one_f64")]
    pub cross_rate: f64,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self { sweeps: default_sweeps(), thin: 1, burn_in: BurnIn::default(), cross_rate: 1.0 }
    }
}

fn default_sweeps() -> u64 {
    10_000
}

fn one_u64() -> u64 {
    1
}

fn one_f64() -> f64 {
    1.0
}

fn one_usize() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Experiment {
    /// Money shares of one economy against their Beta marginal.
    Stationary {
        #[serde(default)]
        economy: usize,
        #[serde(default = "Defaults::bins")]
        bins: usize,
    },
    /// Market price of one good by bisection on the trader's flow.
    PriceSearch {
        #[serde(default)]
        economy: usize,
        #[serde(default)]
        good: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        probes_per_sweep: Option<u64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lo: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        hi: Option<f64>,
        #[serde(default = "Defaults::rel_tol")]
        rel_tol: f64,
    },
    /// Financial contact of every economy until temperatures agree.
    Join {},
    Thermometer {
        #[serde(default)]
        mainland: usize,
        #[serde(default = "Defaults::second")]
        ship: usize,
        /// Read the price of this good instead of the ship's money.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        price_good: Option<usize>,
    },
    /// Carnot cycle of economy `boat`. Each side is a reservoir at the given
    /// temperature or one of the economies.
    Carnot {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        hot: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cold: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        hot_temperature: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cold_temperature: Option<f64>,
        boat: usize,
        #[serde(default)]
        good: usize,
        goods_ratio: f64,
        #[serde(default = "Defaults::n_steps")]
        n_steps: usize,
        #[serde(default = "one_usize")]
        cycles: usize,
        #[serde(default = "Defaults::direction")]
        direction: Direction,
        #[serde(default = "Defaults::sweeps_per_step")]
        sweeps_per_step: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        trades_per_sweep: Option<u64>,
    },
    /// Isentropes, Pareto set, equal-temperature line and price/temperature
    /// quadrants of economies 0 and 1.
    Edgeworth {
        #[serde(default = "Defaults::n_points")]
        n_points: usize,
        #[serde(default = "Defaults::grid")]
        grid: usize,
    },
    /// Maximum trader profit between economies 0 and 1 three ways.
    Gains {
        #[serde(default = "Defaults::gains_tol")]
        rel_tol: f64,
        #[serde(default = "Defaults::max_rounds")]
        max_rounds: usize,
    },
    /// Derivative relations at random states scattered around one economy.
    Derivatives {
        #[serde(default)]
        economy: usize,
        #[serde(default = "Defaults::states")]
        states: usize,
        #[serde(default = "Defaults::probes")]
        probes: usize,
        /// States draw each coordinate from `x·U(1 − spread, 1 + spread)`.
        #[serde(default = "Defaults::spread")]
        spread: f64,
    },
    /// Entropy of a single-good economy rebuilt from its prices.
    Reconstruct {
        #[serde(default)]
        economy: usize,
        goods: [f64; 2],
        money: [f64; 2],
        #[serde(default = "Defaults::points")]
        points: usize,
        reference_goods: f64,
        reference_money: [f64; 2],
        /// Measured-price grid size per axis in stochastic mode.
        #[serde(default = "Defaults::price_points")]
        price_points: usize,
    },
    Onsager {
        #[serde(default)]
        a: usize,
        #[serde(default = "Defaults::second")]
        b: usize,
        #[serde(default = "Defaults::channel")]
        channel: Channel,
        #[serde(default = "Defaults::rel_perturbation")]
        rel_perturbation: f64,
        #[serde(default = "Defaults::window")]
        window_sweeps: u64,
    },
    Fluctuations {
        #[serde(default)]
        mainland: usize,
        #[serde(default = "Defaults::second")]
        ship: usize,
        ship_sizes: Vec<usize>,
    },
    /// A protocol script over all economies with a second-law audit.
    Script {
        steps: Vec<Step>,
        #[serde(default = "Defaults::window")]
        snapshot_window: u64,
        #[serde(default = "Defaults::leg_sweeps")]
        leg_sweeps: u64,
    },
}

struct Defaults;

impl Defaults {
    fn bins() -> usize {
        100
    }
    fn rel_tol() -> f64 {
        1e-10
    }
    fn second() -> usize {
        1
    }
    fn n_steps() -> usize {
        200
    }
    fn direction() -> Direction {
        Direction::Engine
    }
    fn sweeps_per_step() -> u64 {
        20
    }
    fn n_points() -> usize {
        100
    }
    fn grid() -> usize {
        40
    }
    fn gains_tol() -> f64 {
        1e-12
    }
    fn max_rounds() -> usize {
        10_000
    }
    fn states() -> usize {
        100
    }
    fn probes() -> usize {
        50
    }
    fn spread() -> f64 {
        0.5
    }
    fn points() -> usize {
        50
    }
    fn price_points() -> usize {
        5
    }
    fn channel() -> Channel {
        Channel::Full
    }
    fn rel_perturbation() -> f64 {
        0.05
    }
    fn window() -> u64 {
        200
    }
    fn leg_sweeps() -> u64 {
        50
    }
}

/// Named experiments with one-line descriptions.
pub const EXPERIMENTS: [(&str, &str); 12] = [
    ("stationary", "money shares of one economy against the Beta marginal (stochastic)"),
    ("price-search", "market price of a good: oracle, or trader bisection in stochastic mode"),
    ("join", "financial join of all economies to a common temperature"),
    ("thermometer", "ship economy reading the temperature of a mainland"),
    ("carnot", "Carnot cycle of a boat between two mainlands or reservoirs"),
    ("edgeworth", "Edgeworth box: isentropes, Pareto set, equal-temperature line, quadrants"),
    ("gains", "maximum trader profit: closed form, optimizer and protocol"),
    ("derivatives", "derivative relations and flexibility matrix at random states"),
    ("reconstruct", "entropy rebuilt from prices: oracle, or measured prices in stochastic mode"),
    ("onsager", "Onsager matrix from small perturbations of two economies (stochastic)"),
    ("fluctuations", "ship fluctuations against the capacity formulas (stochastic)"),
    ("script", "protocol script over all economies with a second-law audit"),
];

impl Experiment {
    pub fn name(&self) -> &'static str {
        let i = match self {
            Experiment::Stationary { .. } => 0,
            Experiment::PriceSearch { .. } => 1,
            Experiment::Join {} => 2,
            Experiment::Thermometer { .. } => 3,
            Experiment::Carnot { .. } => 4,
            Experiment::Edgeworth { .. } => 5,
            Experiment::Gains { .. } => 6,
            Experiment::Derivatives { .. } => 7,
            Experiment::Reconstruct { .. } => 8,
            Experiment::Onsager { .. } => 9,
            Experiment::Fluctuations { .. } => 10,
            Experiment::Script { .. } => 11,
        };
        EXPERIMENTS[i].0
    }
}

/// A bound on one summary metric; failing bounds give exit code 2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssertionSpec {
    pub metric: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
}

/// Command-line values that replace config entries.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub mode: Option<Mode>,
    pub replicas: Option<u64>,
    pub steps: Option<u64>,
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| anyhow::anyhow!("invalid config: {e}"))?;
        if cfg.schema_version != SCHEMA_VERSION {
            bail!("unsupported schema_version {} (expected {SCHEMA_VERSION})", cfg.schema_version);
        }
        for (i, a) in cfg.assertions.iter().enumerate() {
            if a.min.is_none() && a.max.is_none() {
                bail!("assert[{i}] on {:?} needs min or max", a.metric);
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    /// `--steps` sets the posted prices per leg of a Carnot cycle and the
    /// sweep count of every other experiment.
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(m) = o.mode {
            self.mode = m;
        }
        if let Some(r) = o.replicas {
            self.replicas = Some(r);
        }
        if let Some(n) = o.steps {
            match &mut self.experiment {
                Experiment::Carnot { n_steps, .. } => *n_steps = n as usize,
                _ => self.sim.sweeps = n,
            }
        }
    }

    pub fn economy(&self, index: usize, base: &Path) -> Result<Economy> {
        self.spec(index)?.economy(index, base)
    }

    pub fn agents(&self, index: usize) -> Result<AgentEconomy> {
        self.spec(index)?.agents(index)
    }

    fn spec(&self, index: usize) -> Result<&EconomySpec> {
        self.economies.get(index).with_context(|| format!("experiment refers to economy {index}, but {} are defined", self.economies.len()))
    }

    /// Canonical JSON of the effective configuration, the input of the hash.
    pub fn canonical_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CARNOT: &str = r#"
schema_version = 1
seed = 3

[[economies]]
model = { kind = "cobb-douglas", n_agents = 10, alpha = [2.0], eta = 2.5 }
money = 1.0
goods = [10.0]

[experiment]
name = "carnot"
hot_temperature = 0.47
cold_temperature = 0.24
boat = 0
goods_ratio = 2.0
"#;

    #[test]
    fn parses_with_defaults() {
        let cfg = ScenarioConfig::parse(CARNOT).unwrap();
        assert_eq!(cfg.mode, Mode::Analytic);
        assert_eq!(cfg.experiment.name(), "carnot");
        let Experiment::Carnot { n_steps, cycles, .. } = cfg.experiment else { panic!() };
        assert_eq!((n_steps, cycles), (200, 1));
    }

    #[test]
    fn unknown_keys_are_rejected_with_their_name() {
        let err = ScenarioConfig::parse(&CARNOT.replace("goods_ratio", "goods_ration")).unwrap_err();
        let msg = format!("{err:#}");
        assert!(msg.contains("goods_ration"), "{msg}");
        let err = ScenarioConfig::parse(&format!("{CARNOT}\n[sim]\nsweep = 3\n")).unwrap_err();
        assert!(format!("{err:#}").contains("sweep"));
    }

    #[test]
    fn missing_keys_and_versions_are_errors() {
        assert!(ScenarioConfig::parse(&CARNOT.replace("seed = 3", "")).is_err());
        assert!(ScenarioConfig::parse(&CARNOT.replace("schema_version = 1", "schema_version = 2")).is_err());
    }

    #[test]
    fn overrides_change_the_hash_input() {
        let mut cfg = ScenarioConfig::parse(CARNOT).unwrap();
        let before = cfg.canonical_json().unwrap();
        cfg.apply(&Overrides { steps: Some(500), ..Default::default() });
        let Experiment::Carnot { n_steps, .. } = cfg.experiment else { panic!() };
        assert_eq!(n_steps, 500);
        assert_ne!(before, cfg.canonical_json().unwrap());
    }
}
