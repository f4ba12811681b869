//! JSON game definitions.
//!
//! ```json
//! {"type": "matrix",   "A": [[0, -1, 1], [1, 0, -1], [-1, 1, 0]], "labels": ["R", "P", "S"]}
//! {"type": "bimatrix", "A": [[6, 0], [3, 2]], "B": [[6, 0], [3, 2]], "labels": [["a", "b"], ["c", "d"]]}
//! {"type": "luba",     "n_players": 500, "max_bid": 691}
//! ```
//!
//! `labels` is optional everywhere; unknown keys and non-finite entries are
//! rejected.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{BimatrixGame, MatrixGame};
use crate::luba::{LubaGame, ProductIndex};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum GameFile {
    Matrix {
        #[serde(rename = "A")]
        a: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        labels: Option<Vec<String>>,
    },
    Bimatrix {
        #[serde(rename = "A")]
        a: Vec<Vec<f64>>,
        #[serde(rename = "B")]
        b: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        labels: Option<[Vec<String>; 2]>,
    },
    Luba {
        n_players: u32,
        max_bid: usize,
        #[serde(default)]
        product_index: ProductIndex,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum GameDefinition {
    Matrix(MatrixGame),
    Bimatrix(BimatrixGame),
    Luba(LubaGame),
}

impl GameFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidGame(format!("game file: {e}")))
    }

    pub fn build(self) -> Result<GameDefinition> {
        Ok(match self {
            GameFile::Matrix { a, labels } => {
                let g = MatrixGame::new(a)?;
                GameDefinition::Matrix(match labels {
                    Some(l) => g.with_labels(l)?,
                    None => g,
                })
            }
            GameFile::Bimatrix { a, b, labels } => {
                let g = BimatrixGame::new(a, b)?;
                GameDefinition::Bimatrix(match labels {
                    Some([lx, ly]) => g.with_labels(lx, ly)?,
                    None => g,
                })
            }
            GameFile::Luba {
                n_players,
                max_bid,
                product_index,
            } => GameDefinition::Luba(LubaGame::new(n_players, max_bid)?.with_index(product_index)),
        })
    }
}

impl GameDefinition {
    pub fn from_json(text: &str) -> Result<Self> {
        GameFile::from_json(text)?.build()
    }
}
