use std::path::Path;

use turnover::game_file::GameDefinition;
use turnover::{BimatrixGame, MatrixGame, SimplexDistribution};

use crate::args::BuiltinGame;
use crate::error::{invalid, CliResult};

pub enum Game {
    Matrix(MatrixGame),
    Bimatrix(BimatrixGame),
}

/// Game named by `--game` or read from `--game-file`, plus a label for
/// summaries.
pub fn load(
    builtin: Option<BuiltinGame>,
    file: Option<&Path>,
    r: Option<f64>,
) -> CliResult<(Game, String)> {
    if r.is_some() && builtin != Some(BuiltinGame::Pennies) {
        return Err(invalid("--r only applies to --game pennies"));
    }
    match (builtin, file) {
        (Some(_), Some(_)) => Err(invalid("give either --game or --game-file, not both")),
        (None, None) => Err(invalid("one of --game or --game-file is required")),
        (Some(BuiltinGame::Rps), None) => {
            Ok((Game::Matrix(MatrixGame::rock_paper_scissors()), "rps".into()))
        }
        (Some(BuiltinGame::Pennies), None) => Ok((
            Game::Bimatrix(BimatrixGame::matching_pennies(r.unwrap_or(1.0))?),
            "pennies".into(),
        )),
        (Some(BuiltinGame::Coordination), None) => {
            Ok((Game::Bimatrix(BimatrixGame::coordination()), "coordination".into()))
        }
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| invalid(format!("game file {}: {e}", path.display())))?;
            let label = path.display().to_string();
            match GameDefinition::from_json(&text)? {
                GameDefinition::Matrix(g) => Ok((Game::Matrix(g), label)),
                GameDefinition::Bimatrix(g) => Ok((Game::Bimatrix(g), label)),
                GameDefinition::Luba(_) => Err(invalid(
                    "auction games are handled by the `luba` subcommands",
                )),
            }
        }
    }
}

/// Distribution over `dim` strategies; `None` means uniform and a single
/// number for two strategies is the weight of the first.
pub fn distribution(values: Option<&[f64]>, dim: usize, flag: &str) -> CliResult<SimplexDistribution> {
    let Some(values) = values else {
        return Ok(SimplexDistribution::uniform(dim));
    };
    let d = match values {
        [v] if dim == 2 => SimplexDistribution::binary(*v),
        _ if values.len() != dim => {
            return Err(invalid(format!(
                "--{flag} has {} entries, the game has {dim} strategies",
                values.len()
            )))
        }
        _ => SimplexDistribution::new(values.to_vec()),
    };
    d.map_err(|e| invalid(format!("--{flag}: {e}")))
}

pub fn reject(present: bool, flag: &str, reason: &str) -> CliResult<()> {
    if present {
        return Err(invalid(format!("--{flag} {reason}")));
    }
    Ok(())
}

/// Rates of both populations; `--chi` fills whichever is not given.
pub fn pair_rates(
    chi: Option<f64>,
    chi_x: Option<f64>,
    chi_y: Option<f64>,
) -> CliResult<(f64, f64)> {
    let x = chi_x.or(chi).ok_or_else(|| invalid("--chi-x (or --chi) is required"))?;
    let y = chi_y.or(chi).ok_or_else(|| invalid("--chi-y (or --chi) is required"))?;
    Ok((x, y))
}
