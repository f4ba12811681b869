//! Flags and config-file keys. Config files are JSON objects whose keys are
//! the long flag names (`"chi-x": 0.5`); flags take precedence.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{invalid, CliResult};

#[derive(Parser, Debug)]
#[command(name = "turnover", version, about = "Replicator dynamics with population turnover")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct GlobalArgs {
    /// JSON config file keyed by flag name
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Seed for every random draw [default: 0]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory for artifacts and the manifest [default: output]
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    /// Table format [default: csv]
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Threads for scans, basin maps and fits [default: 1]
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

pub const GLOBAL_KEYS: [&str; 4] = ["seed", "output-dir", "format", "workers"];

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Integrate the turnover replicator equation
    Simulate(SimulateArgs),
    /// Experience-structured population run to steady state
    Micro(MicroArgs),
    /// Turnover equilibria with stability labels
    Equilibria(EquilibriaArgs),
    /// Equilibrium branches and events along a turnover-rate grid
    Bifurcate(BifurcateArgs),
    /// Lowest unique bid auctions
    Luba {
        #[command(subcommand)]
        action: LubaCommand,
    },
}

#[derive(Subcommand, Debug)]
pub enum LubaCommand {
    /// Turnover equilibrium bid distribution
    Equilibrium(LubaEquilibriumArgs),
    /// Nash bid distribution
    Nash(LubaNashArgs),
    /// Least-squares turnover rate for an auction CSV
    Fit(LubaFitArgs),
    /// Synthetic auctions drawn from a model distribution
    Generate(LubaGenerateArgs),
    /// Linear trend of per-auction distances in file order
    Trend(LubaTrendArgs),
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BuiltinGame {
    Rps,
    Pennies,
    Coordination,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScanParameter {
    ChiX,
    ChiY,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialProfileArg {
    Newcomers,
    Geometric,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IndexArg {
    Corrected,
    Literal,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelArg {
    Turnover,
    Nash,
    Prior,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IngestArg {
    Strict,
    Lenient,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub game: Option<BuiltinGame>,
    /// JSON game definition (matrix or bimatrix)
    #[arg(long)]
    pub game_file: Option<PathBuf>,
    /// Matching-pennies stake [default: 1]
    #[arg(long)]
    pub r: Option<f64>,
    /// Turnover rate; for two populations the default of both rates
    #[arg(long)]
    pub chi: Option<f64>,
    #[arg(long)]
    pub chi_x: Option<f64>,
    #[arg(long)]
    pub chi_y: Option<f64>,
    /// Newcomer strategy, comma separated [default: uniform]
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    #[serde(default, deserialize_with = "one_or_many")]
    pub prior: Option<Vec<f64>>,
    /// Newcomer strategy of population x; one number means the first strategy
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    #[serde(default, deserialize_with = "one_or_many")]
    pub prior_x: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    #[serde(default, deserialize_with = "one_or_many")]
    pub prior_y: Option<Vec<f64>>,
    /// Starting state [default: the prior]
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    #[serde(default, deserialize_with = "one_or_many")]
    pub initial: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    #[serde(default, deserialize_with = "one_or_many")]
    pub initial_x: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    #[serde(default, deserialize_with = "one_or_many")]
    pub initial_y: Option<Vec<f64>>,
    /// RK4 step [default: 0.01]
    #[arg(long)]
    pub step: Option<f64>,
    /// [default: 10000]
    #[arg(long)]
    pub t_max: Option<f64>,
    /// Rest threshold on the vector field [default: 1e-10]
    #[arg(long)]
    pub convergence_eps: Option<f64>,
    /// Record every k-th step [default: 1]
    #[arg(long)]
    pub record_stride: Option<usize>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct MicroArgs {
    #[arg(long, value_enum)]
    pub game: Option<BuiltinGame>,
    #[arg(long)]
    pub game_file: Option<PathBuf>,
    /// Replacement probability per time unit
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    #[serde(default, deserialize_with = "one_or_many")]
    pub prior: Option<Vec<f64>>,
    /// Population size [default: 20]
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub n: Option<f64>,
    /// Fixed learning rate [default: 1]
    #[arg(long)]
    pub learn_rate: Option<f64>,
    /// Per-step rate scale / payoff spread instead of a fixed rate
    #[arg(long)]
    pub adaptive_scale: Option<f64>,
    /// Oldest tracked experience class [default: from p]
    #[arg(long)]
    pub age_cap: Option<usize>,
    #[arg(long, value_enum)]
    pub initial_profile: Option<InitialProfileArg>,
    /// Steady-state threshold on the aggregate change per step [default: 1e-13]
    #[arg(long)]
    pub tol: Option<f64>,
    /// [default: 1000000]
    #[arg(long)]
    pub max_steps: Option<usize>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct EquilibriaArgs {
    #[arg(long, value_enum)]
    pub game: Option<BuiltinGame>,
    #[arg(long)]
    pub game_file: Option<PathBuf>,
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long)]
    pub chi: Option<f64>,
    #[arg(long)]
    pub chi_x: Option<f64>,
    #[arg(long)]
    pub chi_y: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    #[serde(default, deserialize_with = "one_or_many")]
    pub prior: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    #[serde(default, deserialize_with = "one_or_many")]
    pub prior_x: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    #[serde(default, deserialize_with = "one_or_many")]
    pub prior_y: Option<Vec<f64>>,
    /// Confirm stable labels by perturbed integration [default: true]
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub verify: Option<bool>,
    /// Cells per side of a basin map (two-population games)
    #[arg(long)]
    pub basin_resolution: Option<usize>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct BifurcateArgs {
    #[arg(long, value_enum)]
    pub game: Option<BuiltinGame>,
    #[arg(long)]
    pub game_file: Option<PathBuf>,
    #[arg(long)]
    pub r: Option<f64>,
    /// Scanned rate [default: chi-x]
    #[arg(long, value_enum)]
    pub parameter: Option<ScanParameter>,
    #[arg(long)]
    pub from: Option<f64>,
    #[arg(long)]
    pub to: Option<f64>,
    /// Grid size, at least 100 [default: 200]
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long, value_enum)]
    pub spacing: Option<Spacing>,
    /// Rate of the population that is not scanned
    #[arg(long)]
    pub chi: Option<f64>,
    #[arg(long)]
    pub chi_x: Option<f64>,
    #[arg(long)]
    pub chi_y: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    #[serde(default, deserialize_with = "one_or_many")]
    pub prior_x: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    #[serde(default, deserialize_with = "one_or_many")]
    pub prior_y: Option<Vec<f64>>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct LubaEquilibriumArgs {
    /// Players per auction
    #[arg(long)]
    pub n: Option<u32>,
    /// [default: 0.0062]
    #[arg(long)]
    pub chi: Option<f64>,
    /// Exponential prior decay [default: 0.02]
    #[arg(long)]
    pub beta: Option<f64>,
    /// Highest bid [default: where the prior tail drops below 1e-6]
    #[arg(long)]
    pub max_bid: Option<usize>,
    #[arg(long, value_enum)]
    pub index: Option<IndexArg>,
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub t_max: Option<f64>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct LubaNashArgs {
    #[arg(long)]
    pub n: Option<u32>,
    /// Sets the default highest bid [default: 0.02]
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub max_bid: Option<usize>,
    #[arg(long, value_enum)]
    pub index: Option<IndexArg>,
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub t_max: Option<f64>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct LubaGenerateArgs {
    #[arg(long)]
    pub n: Option<u32>,
    /// Number of auctions [default: 30]
    #[arg(long)]
    pub auctions: Option<usize>,
    /// Distribution the bids are drawn from [default: turnover]
    #[arg(long, value_enum)]
    pub model: Option<ModelArg>,
    #[arg(long)]
    pub chi: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub max_bid: Option<usize>,
    #[arg(long, value_enum)]
    pub index: Option<IndexArg>,
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub t_max: Option<f64>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct LubaFitArgs {
    /// Auction CSV with header auction_id,n_players,bid,count
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// [default: 1e-5]
    #[arg(long)]
    pub chi_lower: Option<f64>,
    /// [default: 1]
    #[arg(long)]
    pub chi_upper: Option<f64>,
    /// Relative bracket width that ends the search [default: 1e-3]
    #[arg(long)]
    pub rel_width: Option<f64>,
    #[arg(long)]
    pub max_bid: Option<usize>,
    /// Also report distances to the Nash distribution [default: true]
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub nash: Option<bool>,
    /// Fit every player count separately
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub by_size: Option<bool>,
    /// Handling of auctions whose counts do not sum to the player count
    #[arg(long, value_enum)]
    pub ingest: Option<IngestArg>,
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub t_max: Option<f64>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct LubaTrendArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Reference distribution [default: turnover]
    #[arg(long, value_enum)]
    pub model: Option<ModelArg>,
    #[arg(long)]
    pub chi: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub max_bid: Option<usize>,
    #[arg(long, value_enum)]
    pub ingest: Option<IngestArg>,
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub t_max: Option<f64>,
}

/// Accepts `0.3` as well as `[0.3]` for list-valued keys.
fn one_or_many<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Option<Vec<f64>>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(f64),
        Many(Vec<f64>),
    }
    Ok(Option::<OneOrMany>::deserialize(d)?.map(|v| match v {
        OneOrMany::One(x) => vec![x],
        OneOrMany::Many(v) => v,
    }))
}

/// Config-file object split into global and command keys.
#[derive(Debug, Default)]
pub struct ConfigFile {
    pub global: Map<String, Value>,
    pub command: Map<String, Value>,
}

impl ConfigFile {
    pub fn load(path: Option<&PathBuf>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("config file {}: {e}", path.display())))?;
        let value: Value = serde_json::from_str(&text)
            .map_err(|e| invalid(format!("config file {}: {e}", path.display())))?;
        let Value::Object(map) = value else {
            return Err(invalid(format!("config file {}: expected a JSON object", path.display())));
        };
        let mut out = Self::default();
        for (k, v) in map {
            if GLOBAL_KEYS.contains(&k.as_str()) {
                out.global.insert(k, v);
            } else {
                out.command.insert(k, v);
            }
        }
        Ok(out)
    }
}

/// Overlays the flags that were given on top of the file values.
pub fn merge<T: Serialize + DeserializeOwned>(
    flags: &T,
    file: &Map<String, Value>,
    what: &str,
) -> CliResult<T> {
    let mut merged = file.clone();
    if let Value::Object(given) = serde_json::to_value(flags).expect("flag struct serializes") {
        for (k, v) in given {
            if !v.is_null() {
                merged.insert(k, v);
            }
        }
    }
    serde_json::from_value(Value::Object(merged))
        .map_err(|e| invalid(format!("{what} config: {e}")))
}
