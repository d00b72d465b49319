//! Inference-cost accounting.
//!
//! Costs are reported in two forms: deterministic proxy units (one unit per
//! Bellman backup for the planner, one per table read for the model-free
//! expert, one per forward pass for the network) and a seconds-equivalent used
//! by the arbitration criterion. In proxy mode the seconds-equivalent is the
//! unit count times a calibration factor; in measured mode it is wall-clock.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CostMode {
    #[default]
    Proxy,
    Measured,
}

impl std::str::FromStr for CostMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "proxy" => Ok(CostMode::Proxy),
            "measured" => Ok(CostMode::Measured),
            other => Err(Error::Config(format!("unknown cost mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostModel {
    pub mode: CostMode,
    /// Seconds-equivalent of one planner backup.
    pub seconds_per_backup: f64,
    /// Seconds-equivalent of one model-free table read.
    pub mf_read_seconds: f64,
    /// Seconds-equivalent of one network forward pass.
    pub forward_pass_seconds: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            mode: CostMode::Proxy,
            seconds_per_backup: 2e-6,
            mf_read_seconds: 1e-5,
            forward_pass_seconds: 1e-5,
        }
    }
}

impl CostModel {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("seconds_per_backup", self.seconds_per_backup),
            ("mf_read_seconds", self.mf_read_seconds),
            ("forward_pass_seconds", self.forward_pass_seconds),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::param(name, format!("must be a non-negative number, got {v}")));
            }
        }
        Ok(())
    }

    fn build(&self, units: u64, per_unit: f64, wall: Duration) -> InferenceCost {
        let wall_seconds = wall.as_secs_f64();
        let seconds_equivalent = match self.mode {
            CostMode::Proxy => units as f64 * per_unit,
            CostMode::Measured => wall_seconds,
        };
        InferenceCost {
            units,
            wall_seconds: (self.mode == CostMode::Measured).then_some(wall_seconds),
            seconds_equivalent,
        }
    }

    pub fn planner(&self, backups: u64, wall: Duration) -> InferenceCost {
        self.build(backups, self.seconds_per_backup, wall)
    }

    pub fn table_read(&self, wall: Duration) -> InferenceCost {
        self.build(1, self.mf_read_seconds, wall)
    }

    pub fn forward_pass(&self, wall: Duration) -> InferenceCost {
        self.build(1, self.forward_pass_seconds, wall)
    }
}

/// Cost of a single inference.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct InferenceCost {
    /// Proxy units (backups, table reads or forward passes).
    pub units: u64,
    pub wall_seconds: Option<f64>,
    pub seconds_equivalent: f64,
}

impl InferenceCost {
    pub const ZERO: InferenceCost = InferenceCost {
        units: 0,
        wall_seconds: None,
        seconds_equivalent: 0.0,
    };
}
