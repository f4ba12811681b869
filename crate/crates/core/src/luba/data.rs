use std::collections::BTreeMap;
use std::io::{Read, Write};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::LubaGame;
use crate::error::{Error, Result};
use crate::simplex::SimplexDistribution;

const CSV_HEADER: [&str; 4] = ["auction_id", "n_players", "bid", "count"];

/// How to treat auctions whose bid counts do not add up to the player count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IngestMode {
    #[default]
    Strict,
    /// Accept with a warning; frequencies are renormalized.
    Lenient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Auction {
    pub id: String,
    pub n_players: u32,
    /// Number of players placing each bid.
    pub bid_counts: BTreeMap<u32, u64>,
    pub item_value: Option<f64>,
}

impl Auction {
    pub fn total_bids(&self) -> u64 {
        self.bid_counts.values().sum()
    }

    pub fn max_bid(&self) -> Option<u32> {
        self.bid_counts.keys().next_back().copied()
    }

    /// Bid frequencies over `1..=max_bid`; `None` without bids.
    pub fn frequencies(&self, max_bid: usize) -> Option<Vec<f64>> {
        let total = self.total_bids();
        if total == 0 {
            return None;
        }
        let mut x = vec![0.0; max_bid];
        for (&bid, &count) in &self.bid_counts {
            if let Some(slot) = x.get_mut(bid as usize - 1) {
                *slot = count as f64 / total as f64;
            }
        }
        Some(x)
    }
}

/// Observed bid distribution of one auction, ready for fitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalAuction {
    pub id: String,
    pub n_players: u32,
    pub frequencies: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AuctionDataset {
    pub auctions: Vec<Auction>,
}

impl AuctionDataset {
    /// Reads `auction_id,n_players,bid,count` rows. Rows of one auction need
    /// not be contiguous; auctions keep the order of first appearance.
    pub fn read_csv<R: Read>(reader: R, mode: IngestMode) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| Error::Data(format!("line 1: {e}")))?
            .clone();
        if headers.iter().map(str::trim).ne(CSV_HEADER) {
            return Err(Error::Data(format!(
                "line 1: expected header `{}`, got `{}`",
                CSV_HEADER.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }

        let mut order: Vec<String> = Vec::new();
        let mut by_id: BTreeMap<String, Auction> = BTreeMap::new();
        for (i, record) in rdr.records().enumerate() {
            let line = i + 2;
            let record = record.map_err(|e| Error::Data(format!("line {line}: {e}")))?;
            if record.len() != 4 {
                return Err(Error::Data(format!(
                    "line {line}: expected 4 fields, got {}",
                    record.len()
                )));
            }
            let id = record[0].trim().to_string();
            if id.is_empty() {
                return Err(Error::Data(format!("line {line}: empty auction_id")));
            }
            let n_players: u32 = parse_field(&record[1], "n_players", line)?;
            let bid: u32 = parse_field(&record[2], "bid", line)?;
            let count: u64 = parse_field(&record[3], "count", line)?;
            if n_players == 0 || bid == 0 || count == 0 {
                return Err(Error::Data(format!(
                    "line {line}: n_players, bid and count must be positive"
                )));
            }
            let auction = by_id.entry(id.clone()).or_insert_with(|| {
                order.push(id.clone());
                Auction {
                    id: id.clone(),
                    n_players,
                    bid_counts: BTreeMap::new(),
                    item_value: None,
                }
            });
            if auction.n_players != n_players {
                return Err(Error::Data(format!(
                    "line {line}: auction {id} has n_players {n_players}, earlier rows say {}",
                    auction.n_players
                )));
            }
            if auction.bid_counts.insert(bid, count).is_some() {
                return Err(Error::Data(format!("line {line}: duplicate bid {bid} in auction {id}")));
            }
        }

        let mut auctions = Vec::with_capacity(order.len());
        for id in order {
            let auction = by_id.remove(&id).expect("recorded id");
            let total = auction.total_bids();
            if total != auction.n_players as u64 {
                let msg = format!(
                    "auction {id}: counts sum to {total} but n_players is {}",
                    auction.n_players
                );
                match mode {
                    IngestMode::Strict => return Err(Error::Data(msg)),
                    IngestMode::Lenient => log::warn!("{msg}; using renormalized frequencies"),
                }
            }
            auctions.push(auction);
        }
        Ok(Self { auctions })
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Data(e.to_string());
        wtr.write_record(CSV_HEADER).map_err(io)?;
        for a in &self.auctions {
            for (bid, count) in &a.bid_counts {
                wtr.write_record([
                    a.id.clone(),
                    a.n_players.to_string(),
                    bid.to_string(),
                    count.to_string(),
                ])
                .map_err(io)?;
            }
        }
        wtr.flush().map_err(|e| Error::Data(e.to_string()))
    }

    pub fn len(&self) -> usize {
        self.auctions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.auctions.is_empty()
    }

    pub fn max_bid(&self) -> Option<u32> {
        self.auctions.iter().filter_map(Auction::max_bid).max()
    }

    /// Combined number of bidders, the expected squared distance of data
    /// drawn from the model itself.
    pub fn total_players(&self) -> u64 {
        self.auctions.iter().map(|a| a.n_players as u64).sum()
    }

    /// Frequencies over `1..=max_bid`; auctions without bids are skipped
    /// with a warning.
    pub fn empirical(&self, max_bid: usize) -> Vec<EmpiricalAuction> {
        self.auctions
            .iter()
            .filter_map(|a| match a.frequencies(max_bid) {
                Some(frequencies) => Some(EmpiricalAuction {
                    id: a.id.clone(),
                    n_players: a.n_players,
                    frequencies,
                }),
                None => {
                    log::warn!("auction {} has no recorded bids; skipped", a.id);
                    None
                }
            })
            .collect()
    }

    /// Sub-datasets by player count, ascending.
    pub fn by_size(&self) -> BTreeMap<u32, AuctionDataset> {
        let mut out: BTreeMap<u32, AuctionDataset> = BTreeMap::new();
        for a in &self.auctions {
            out.entry(a.n_players).or_default().auctions.push(a.clone());
        }
        out
    }
}

fn parse_field<T: std::str::FromStr>(raw: &str, name: &str, line: usize) -> Result<T> {
    raw.trim()
        .parse()
        .map_err(|_| Error::Data(format!("line {line}: {name} `{raw}` is not a non-negative integer")))
}

/// Draws `N` independent bids per auction from `distribution`.
///
/// Auction `k` uses stream `k` of a ChaCha8 generator keyed by `seed`, so the
/// output depends only on the inputs and never on evaluation order.
pub fn generate_synthetic(
    game: &LubaGame,
    distribution: &SimplexDistribution,
    n_auctions: usize,
    seed: u64,
) -> Result<AuctionDataset> {
    distribution.check_len(game.max_bid())?;
    let sampler = WeightedIndex::new(distribution.weights())
        .map_err(|e| Error::InvalidParameter(format!("bid distribution: {e}")))?;
    let width = n_auctions.max(1).to_string().len();
    let auctions = (0..n_auctions)
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let mut bid_counts = BTreeMap::new();
            for _ in 0..game.n_players() {
                let bid = sampler.sample(&mut rng) as u32 + 1;
                *bid_counts.entry(bid).or_insert(0u64) += 1;
            }
            Auction {
                id: format!("synthetic-{k:0width$}"),
                n_players: game.n_players(),
                bid_counts,
                item_value: None,
            }
        })
        .collect();
    Ok(AuctionDataset { auctions })
}
