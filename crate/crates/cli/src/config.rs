//! JSON configuration document. All values are SI base units.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crowbar_core::sweep::{
    log_axis, SweepBase, SweepGrid, DEFAULT_CD_MAX, DEFAULT_CD_MIN, DEFAULT_CD_POINTS,
};
use crowbar_core::{
    BalancingDesign, CircuitSpec, DesignConstraints, DeviceParams, Error, Result, ToleranceSpec,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub circuit: CircuitSpec,
    pub device: DeviceParams,
    pub tolerances: ToleranceSpec,
    #[serde(default)]
    pub design: Option<DesignBlock>,
    #[serde(default)]
    pub constraints: Option<DesignConstraints>,
    #[serde(default)]
    pub sweep: Option<SweepAxes>,
}

/// Network values; tolerances come from the top-level block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignBlock {
    #[serde(rename = "R_s")]
    pub static_resistance: f64,
    #[serde(rename = "R_d")]
    pub damping_resistance: f64,
    #[serde(rename = "C_d")]
    pub capacitance: f64,
}

/// Sweep axes. Omitted axes hold the base value; `cd_axis` overrides the
/// log-spaced `cd_min`..`cd_max` range.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxes {
    pub cd_axis: Option<Vec<f64>>,
    pub cd_min: Option<f64>,
    pub cd_max: Option<f64>,
    pub cd_points: Option<usize>,
    pub rd_values: Option<Vec<f64>>,
    pub tdtol_values: Option<Vec<f64>>,
    pub ton_values: Option<Vec<f64>>,
    pub l_values: Option<Vec<f64>>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Invalid(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Invalid(format!("config {}: {e}", path.display())))
    }

    fn missing(block: &str) -> Error {
        Error::Invalid(format!("config has no `{block}` block"))
    }

    pub fn design(&self) -> Result<BalancingDesign> {
        let d = self.design.ok_or_else(|| Self::missing("design"))?;
        Ok(BalancingDesign {
            static_resistance: d.static_resistance,
            damping_resistance: d.damping_resistance,
            capacitance: d.capacitance,
            tolerances: self.tolerances,
        })
    }

    pub fn constraints(&self) -> Result<DesignConstraints> {
        self.constraints.ok_or_else(|| Self::missing("constraints"))
    }

    pub fn sweep_grid(&self) -> Result<SweepGrid> {
        let axes = self.sweep.as_ref().ok_or_else(|| Self::missing("sweep"))?;
        let base = SweepBase {
            circuit: self.circuit,
            device: self.device,
            tolerances: self.tolerances,
        };
        let cd_axis = match &axes.cd_axis {
            Some(axis) => axis.clone(),
            None => {
                let min = axes.cd_min.unwrap_or(DEFAULT_CD_MIN);
                let max = axes.cd_max.unwrap_or(DEFAULT_CD_MAX);
                if !(min > 0.0 && max > min) {
                    return Err(Error::EmptyGrid(format!(
                        "C_d range needs 0 < cd_min < cd_max, got {min:e}..{max:e}"
                    )));
                }
                log_axis(min, max, axes.cd_points.unwrap_or(DEFAULT_CD_POINTS))
            }
        };
        let or = |v: &Option<Vec<f64>>, base: f64| v.clone().unwrap_or_else(|| vec![base]);
        let grid = SweepGrid {
            cd_axis,
            rd_values: or(&axes.rd_values, 0.0),
            tdtol_values: or(&axes.tdtol_values, self.device.delay_tolerance()),
            ton_values: or(&axes.ton_values, self.device.turn_on_time),
            l_values: or(&axes.l_values, self.circuit.inductance),
            base,
        };
        grid.validate()?;
        Ok(grid)
    }
}
