//! Choosing a synchronisation strategy from the three analyses.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::KeyMovement;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    FineGrained,
    Rcu,
    CoarseGrained,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::FineGrained => "fine_grained",
            Strategy::Rcu => "rcu",
            Strategy::CoarseGrained => "coarse_grained",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "fine_grained" => Ok(Strategy::FineGrained),
            "rcu" => Ok(Strategy::Rcu),
            "coarse_grained" => Ok(Strategy::CoarseGrained),
            _ => Err(format!("unknown strategy {s}; expected fine_grained, rcu or coarse_grained")),
        }
    }
}

/// An unknown key-movement result counts as no movement.
pub fn select_strategy(order_exists: bool, adequate: bool, key_movement: &KeyMovement) -> Strategy {
    if key_movement.detected() {
        Strategy::Rcu
    } else if adequate && order_exists {
        Strategy::FineGrained
    } else if adequate {
        Strategy::Rcu
    } else {
        Strategy::CoarseGrained
    }
}
