//! Exposure models: maps from a unit's neighborhood treatments to a finite
//! exposure level.
//!
//! Level 0 always means "no neighbor treated". The exposure rule is shared
//! by all units; only the level range varies with degree.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::InterferenceGraph;

/// Hard cap on the neighborhood size for the general (pattern) model;
/// beyond this the level count 2^d is refused outright.
pub const GENERAL_PATTERN_DEGREE_CAP: usize = 20;

/// The exposure rule applied to every unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExposureModel {
    /// Level 1 iff at least one neighbor is treated, else 0.
    BinaryAny,
    /// Level = number of treated neighbors, in `0..=d_i`.
    SymmetricCount,
    /// Level indexes the exact treatment pattern of the (sorted)
    /// neighborhood, in `0..2^{d_i}`.
    GeneralPattern,
}

impl ExposureModel {
    /// Parses the config names `binary`, `symmetric`, `general`.
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "binary" => Ok(Self::BinaryAny),
            "symmetric" => Ok(Self::SymmetricCount),
            "general" => Ok(Self::GeneralPattern),
            other => Err(Error::Config(format!("unknown exposure model `{other}`"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::BinaryAny => "binary",
            Self::SymmetricCount => "symmetric",
            Self::GeneralPattern => "general",
        }
    }

    /// Number of exposure levels K_i for unit `i`. Each unit then has
    /// `2·K_i` potential outcomes.
    pub fn level_count(&self, g: &InterferenceGraph, i: usize) -> Result<u32> {
        let d = g.degree(i);
        match self {
            Self::BinaryAny => Ok(2),
            Self::SymmetricCount => Ok(d as u32 + 1),
            Self::GeneralPattern => {
                if d > GENERAL_PATTERN_DEGREE_CAP {
                    return Err(Error::PatternBlowup {
                        unit: i,
                        degree: d,
                        cap: GENERAL_PATTERN_DEGREE_CAP,
                    });
                }
                Ok(1u32 << d)
            }
        }
    }

    /// Exposure level of unit `i` given the full treatment vector.
    pub fn level_of(&self, g: &InterferenceGraph, i: usize, z: &[u8]) -> u32 {
        match self {
            Self::BinaryAny => {
                let any = g.neighbors(i).iter().any(|&j| z[j] == 1);
                any as u32
            }
            Self::SymmetricCount => g.neighbors(i).iter().map(|&j| z[j] as u32).sum(),
            Self::GeneralPattern => {
                // Level indices are u32 pattern masks; callers must gate on
                // level_count, which refuses large neighborhoods first.
                assert!(
                    g.degree(i) < 32,
                    "pattern exposure level of unit {i} does not fit an index"
                );
                let mut e = 0u32;
                for (bit, &j) in g.neighbors(i).iter().enumerate() {
                    if z[j] == 1 {
                        e |= 1 << bit;
                    }
                }
                e
            }
        }
    }

    /// Exposure level unit `i` would take if every other unit were treated.
    /// This is the "fully exposed" level used by total-effect estimands.
    pub fn level_at_all_treated(&self, g: &InterferenceGraph, i: usize) -> u32 {
        let d = g.degree(i);
        match self {
            Self::BinaryAny => (d > 0) as u32,
            Self::SymmetricCount => d as u32,
            Self::GeneralPattern => ((1u64 << d) - 1) as u32,
        }
    }

    /// Maps a treatment vector to every unit's `(z_i, e_i)` pair.
    pub fn expose(&self, g: &InterferenceGraph, z: &[u8]) -> ExposureAssignment {
        assert_eq!(z.len(), g.n(), "treatment vector length must equal n");
        debug_assert!(z.iter().all(|&v| v <= 1));
        let pairs = (0..g.n()).map(|i| (z[i], self.level_of(g, i, z))).collect();
        ExposureAssignment { pairs }
    }
}

/// One treatment-and-exposure condition `(z, e)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cell {
    pub z: u8,
    pub e: u32,
}

impl Cell {
    pub fn new(z: u8, e: u32) -> Self {
        Self { z, e }
    }
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{})", self.z, self.e)
    }
}

/// An exposure level named either literally or by role, so contrasts can
/// say "fully exposed" without pinning a unit-specific number.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LevelSpec {
    Exact(u32),
    /// The level reached when all neighbors are treated (degree-dependent).
    FullyExposed,
}

impl LevelSpec {
    pub fn resolve(&self, model: ExposureModel, g: &InterferenceGraph, i: usize) -> u32 {
        match self {
            LevelSpec::Exact(e) => *e,
            LevelSpec::FullyExposed => model.level_at_all_treated(g, i),
        }
    }
}

/// Per-unit `(z_i, e_i)` pairs for one realized treatment vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExposureAssignment {
    pub pairs: Vec<(u8, u32)>,
}

impl ExposureAssignment {
    pub fn n(&self) -> usize {
        self.pairs.len()
    }

    pub fn treatment(&self, i: usize) -> u8 {
        self.pairs[i].0
    }

    pub fn level(&self, i: usize) -> u32 {
        self.pairs[i].1
    }
}
