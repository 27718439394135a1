//! Design-curve sweeps over Cartesian parameter grids.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::ClosedForm;
use crate::error::{Error, Result};
use crate::presets;
use crate::types::{validate_context, BalancingDesign, CircuitSpec, DeviceParams, ToleranceSpec};

/// Default number of log-spaced capacitance points.
pub const DEFAULT_CD_POINTS: usize = 64;
pub const DEFAULT_CD_MIN: f64 = 5e-9;
pub const DEFAULT_CD_MAX: f64 = 300e-9;

pub const CSV_HEADER: [&str; 10] = [
    "C_d",
    "R_d",
    "t_dTol",
    "t_on",
    "L",
    "skipped",
    "V_d_ov",
    "I_ch_max",
    "I_dis_max",
    "I_ratio",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBase {
    pub circuit: CircuitSpec,
    pub device: DeviceParams,
    pub tolerances: ToleranceSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub cd_axis: Vec<f64>,
    pub rd_values: Vec<f64>,
    pub tdtol_values: Vec<f64>,
    pub ton_values: Vec<f64>,
    pub l_values: Vec<f64>,
    pub base: SweepBase,
}

/// `points` values log-spaced over `[min, max]`, endpoints exact.
pub fn log_axis(min: f64, max: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![min],
        _ => {
            let last = points - 1;
            let ratio = (max / min).ln();
            (0..points)
                .map(|k| match k {
                    0 => min,
                    k if k == last => max,
                    k => min * (ratio * k as f64 / last as f64).exp(),
                })
                .collect()
        }
    }
}

pub fn default_cd_axis() -> Vec<f64> {
    log_axis(DEFAULT_CD_MIN, DEFAULT_CD_MAX, DEFAULT_CD_POINTS)
}

impl SweepGrid {
    /// Single-valued grid at the base point, over `cd_axis`.
    pub fn at_base(base: SweepBase, cd_axis: Vec<f64>, r_d: f64) -> Self {
        SweepGrid {
            cd_axis,
            rd_values: vec![r_d],
            tdtol_values: vec![base.device.delay_tolerance()],
            ton_values: vec![base.device.turn_on_time],
            l_values: vec![base.circuit.inductance],
            base,
        }
    }

    /// `V_d_ov`, `I_ch_max`, `I_dis_max` against `C_d`: `t_on` = 5 µs,
    /// `t_dTol` ∈ {1, 2, 3} µs, `R_d` ∈ {0, 15, 30} Ω.
    pub fn stress_vs_damping() -> Self {
        SweepGrid {
            rd_values: vec![0.0, 15.0, 30.0],
            tdtol_values: vec![1e-6, 2e-6, 3e-6],
            ..Self::at_base(reference_base(), default_cd_axis(), 0.0)
        }
    }

    /// Stresses and current ratio against `C_d`: `R_d` = 5 Ω,
    /// `t_on` ∈ {5, 7.5, 10} µs, `t_dTol` ∈ {1, 2, 3} µs.
    pub fn stress_vs_fall_time() -> Self {
        SweepGrid {
            rd_values: vec![5.0],
            tdtol_values: vec![1e-6, 2e-6, 3e-6],
            ton_values: vec![5e-6, 7.5e-6, 10e-6],
            ..Self::at_base(reference_base(), default_cd_axis(), 5.0)
        }
    }

    /// Stresses against `C_d` for several limiting inductances: `R_d` = 5 Ω,
    /// `t_on` = 5 µs, `t_dTol` ∈ {1, 2, 3} µs.
    pub fn stress_vs_inductance() -> Self {
        SweepGrid {
            rd_values: vec![5.0],
            tdtol_values: vec![1e-6, 2e-6, 3e-6],
            l_values: vec![100e-6, 250e-6, 500e-6, 1000e-6],
            ..Self::at_base(reference_base(), default_cd_axis(), 5.0)
        }
    }

    pub fn point_count(&self) -> usize {
        self.cd_axis.len()
            * self.rd_values.len()
            * self.tdtol_values.len()
            * self.ton_values.len()
            * self.l_values.len()
    }

    pub fn validate(&self) -> Result<()> {
        let axes: [(&str, &[f64], bool); 5] = [
            ("cd_axis", &self.cd_axis, true),
            ("rd_values", &self.rd_values, false),
            ("tdtol_values", &self.tdtol_values, false),
            ("ton_values", &self.ton_values, true),
            ("l_values", &self.l_values, true),
        ];
        for (name, axis, strictly_positive) in axes {
            if axis.is_empty() {
                return Err(Error::EmptyGrid(format!("{name} is empty")));
            }
            if axis.iter().any(|v| !v.is_finite()) {
                return Err(Error::EmptyGrid(format!("{name} has non-finite values")));
            }
            if axis.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::EmptyGrid(format!(
                    "{name} is not strictly increasing"
                )));
            }
            let low = axis[0];
            if (strictly_positive && !(low > 0.0)) || low < 0.0 {
                return Err(Error::EmptyGrid(format!(
                    "{name} must be {}",
                    if strictly_positive {
                        "positive"
                    } else {
                        "non-negative"
                    }
                )));
            }
        }
        validate_context(&self.base.circuit, &self.base.device, &self.base.tolerances).into_result()
    }

    /// Grid points in row order: `L`, then `t_on`, `t_dTol`, `R_d`, with `C_d` innermost.
    fn points(&self) -> Vec<GridPoint> {
        let mut out = Vec::with_capacity(self.point_count());
        for &inductance in &self.l_values {
            for &t_on in &self.ton_values {
                for &t_dtol in &self.tdtol_values {
                    for &r_d in &self.rd_values {
                        for &c_d in &self.cd_axis {
                            out.push(GridPoint {
                                c_d,
                                r_d,
                                t_dtol,
                                t_on,
                                inductance,
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

fn reference_base() -> SweepBase {
    SweepBase {
        circuit: presets::hv_circuit(),
        device: presets::hv_device(),
        tolerances: presets::hv_tolerances(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct GridPoint {
    c_d: f64,
    r_d: f64,
    t_dtol: f64,
    t_on: f64,
    inductance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepMetrics {
    #[serde(rename = "V_d_ov")]
    pub overvoltage_pct: f64,
    #[serde(rename = "I_ch_max")]
    pub peak_charge_current: f64,
    /// Signed (negative while discharging).
    #[serde(rename = "I_dis_max")]
    pub peak_discharge_signed: f64,
    /// `I_ch_max / |I_dis_max|`; absent when the discharge peak is zero.
    #[serde(rename = "I_ratio")]
    pub current_ratio: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(rename = "C_d")]
    pub capacitance: f64,
    #[serde(rename = "R_d")]
    pub damping_resistance: f64,
    #[serde(rename = "t_dTol")]
    pub delay_tolerance: f64,
    #[serde(rename = "t_on")]
    pub turn_on_time: f64,
    #[serde(rename = "L")]
    pub inductance: f64,
    /// `None` when the point is not underdamped and was skipped.
    pub metrics: Option<SweepMetrics>,
}

impl SweepRow {
    pub fn skipped(&self) -> bool {
        self.metrics.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn skipped_count(&self) -> usize {
        self.rows.iter().filter(|r| r.skipped()).count()
    }

    /// Rows matching the non-`C_d` coordinates, in `C_d` order.
    pub fn curve(&self, r_d: f64, t_dtol: f64, t_on: f64, inductance: f64) -> Vec<&SweepRow> {
        self.rows
            .iter()
            .filter(|r| {
                r.damping_resistance == r_d
                    && r.delay_tolerance == t_dtol
                    && r.turn_on_time == t_on
                    && r.inductance == inductance
            })
            .collect()
    }

    /// RFC-4180 CSV, one header row, floats in round-trip scientific notation.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        for row in &self.rows {
            let sci = |v: f64| format!("{v:e}");
            let (ov, ich, idis, ratio) = match &row.metrics {
                Some(m) => (
                    sci(m.overvoltage_pct),
                    sci(m.peak_charge_current),
                    sci(m.peak_discharge_signed),
                    m.current_ratio.map(sci).unwrap_or_default(),
                ),
                None => Default::default(),
            };
            w.write_record([
                sci(row.capacitance),
                sci(row.damping_resistance),
                sci(row.delay_tolerance),
                sci(row.turn_on_time),
                sci(row.inductance),
                row.skipped().to_string(),
                ov,
                ich,
                idis,
                ratio,
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn export_csv(result: &SweepResult, path: &Path) -> Result<()> {
    let file = BufWriter::new(File::create(path)?);
    result.write_csv(file)
}

/// Reproducibility record written next to the CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepManifest {
    pub grid: SweepGrid,
    pub columns: Vec<String>,
    pub rows: usize,
    pub skipped: usize,
    pub row_order: String,
}

impl SweepManifest {
    pub fn new(grid: &SweepGrid, result: &SweepResult) -> Self {
        SweepManifest {
            grid: grid.clone(),
            columns: CSV_HEADER.iter().map(|s| s.to_string()).collect(),
            rows: result.rows.len(),
            skipped: result.skipped_count(),
            row_order: "L, t_on, t_dTol, R_d, C_d (last varies fastest)".into(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut file = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut file, self)?;
        file.write_all(b"\n")?;
        file.flush()?;
        Ok(())
    }
}

fn evaluate(base: &SweepBase, p: &GridPoint) -> Result<Option<SweepMetrics>> {
    let spec = CircuitSpec {
        inductance: p.inductance,
        ..base.circuit
    };
    let dev = base
        .device
        .with_turn_on_time(p.t_on)
        .with_delay_tolerance(p.t_dtol);
    // R_s does not enter the transient model.
    let design = BalancingDesign {
        static_resistance: f64::INFINITY,
        damping_resistance: p.r_d,
        capacitance: p.c_d,
        tolerances: base.tolerances,
    };
    match ClosedForm::new(&spec, &dev, &design) {
        Ok(model) => {
            let report = model.report();
            Ok(Some(SweepMetrics {
                overvoltage_pct: report.overvoltage_pct,
                peak_charge_current: report.peak_charge_current,
                peak_discharge_signed: report.peak_discharge_signed,
                current_ratio: report.current_ratio(),
            }))
        }
        Err(Error::NotUnderdamped { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Evaluates every grid point. Non-underdamped points become skipped rows.
pub fn run_sweep(grid: &SweepGrid) -> Result<SweepResult> {
    grid.validate()?;
    let rows = grid
        .points()
        .par_iter()
        .map(|p| {
            evaluate(&grid.base, p).map(|metrics| SweepRow {
                capacitance: p.c_d,
                damping_resistance: p.r_d,
                delay_tolerance: p.t_dtol,
                turn_on_time: p.t_on,
                inductance: p.inductance,
                metrics,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::transient_report;

    fn csv_text(result: &SweepResult) -> String {
        let mut buf = Vec::new();
        result.write_csv(&mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn log_axis_endpoints_and_spacing() {
        let axis = default_cd_axis();
        assert_eq!(axis.len(), 64);
        assert_eq!(axis[0], 5e-9);
        assert_eq!(axis[63], 300e-9);
        let r0 = axis[1] / axis[0];
        for w in axis.windows(2) {
            assert!((w[1] / w[0] - r0).abs() < 1e-12);
        }
    }

    #[test]
    fn single_point_matches_direct_evaluation() {
        let base = reference_base();
        let grid = SweepGrid::at_base(base, vec![40e-9], 0.0);
        let result = run_sweep(&grid).unwrap();
        assert_eq!(result.rows.len(), 1);
        let design = BalancingDesign {
            static_resistance: 2.5e6,
            damping_resistance: 0.0,
            capacitance: 40e-9,
            tolerances: base.tolerances,
        };
        let direct = transient_report(&base.circuit, &base.device, &design).unwrap();
        let m = result.rows[0].metrics.unwrap();
        assert_eq!(m.overvoltage_pct, direct.overvoltage_pct);
        assert_eq!(m.peak_charge_current, direct.peak_charge_current);
        assert_eq!(m.peak_discharge_signed, direct.peak_discharge_signed);
        assert_eq!(m.current_ratio, direct.current_ratio());
    }

    #[test]
    fn damping_grid_cardinality_and_worked_point() {
        let grid = SweepGrid::stress_vs_damping();
        let result = run_sweep(&grid).unwrap();
        assert_eq!(result.rows.len(), 64 * 3 * 3);
        assert_eq!(result.skipped_count(), 0);
        let grid = SweepGrid {
            cd_axis: vec![40e-9],
            ..SweepGrid::stress_vs_damping()
        };
        let result = run_sweep(&grid).unwrap();
        let row = result.curve(0.0, 3e-6, 5e-6, 250e-6)[0];
        let ov = row.metrics.unwrap().overvoltage_pct;
        assert!((ov - 50.0).abs() < 5.0, "{ov}");
    }

    #[test]
    fn overdamped_points_are_skipped_not_dropped() {
        let grid = SweepGrid {
            rd_values: vec![0.0, 200.0],
            ..SweepGrid::at_base(reference_base(), vec![10e-9, 1e-6], 0.0)
        };
        let result = run_sweep(&grid).unwrap();
        assert_eq!(result.rows.len(), 4);
        // 2 sqrt(L / C_eff) at 1 µF ≈ 33 Ω
        assert_eq!(result.skipped_count(), 1);
        let skipped = result.rows.iter().find(|r| r.skipped()).unwrap();
        assert_eq!(
            (skipped.damping_resistance, skipped.capacitance),
            (200.0, 1e-6)
        );
        let text = csv_text(&result);
        let line = text.lines().find(|l| l.contains(",true,")).unwrap();
        assert!(line.ends_with("true,,,,"), "{line}");
    }

    #[test]
    fn empty_and_unsorted_axes_are_rejected() {
        let grid = SweepGrid::at_base(reference_base(), vec![], 0.0);
        assert!(matches!(run_sweep(&grid), Err(Error::EmptyGrid(_))));
        let grid = SweepGrid::at_base(reference_base(), vec![2e-9, 1e-9], 0.0);
        assert!(matches!(run_sweep(&grid), Err(Error::EmptyGrid(_))));
        let grid = SweepGrid::at_base(reference_base(), vec![0.0, 1e-9], 0.0);
        assert!(matches!(run_sweep(&grid), Err(Error::EmptyGrid(_))));
    }

    #[test]
    fn csv_shape() {
        let empty = SweepResult { rows: vec![] };
        assert_eq!(csv_text(&empty), format!("{}\n", CSV_HEADER.join(",")));
        let one = run_sweep(&SweepGrid::at_base(reference_base(), vec![40e-9], 0.0)).unwrap();
        let text = csv_text(&one);
        assert_eq!(text.lines().count(), 2);
        let fields: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(fields.len(), 10);
        assert_eq!(fields[0], "4e-8");
        assert_eq!(fields[5], "false");
        // full precision: parses back to the same bits
        let m = one.rows[0].metrics.unwrap();
        assert_eq!(fields[7].parse::<f64>().unwrap(), m.peak_charge_current);
    }

    #[test]
    fn rows_follow_lexicographic_order() {
        let grid = SweepGrid {
            cd_axis: vec![10e-9, 20e-9],
            ..SweepGrid::stress_vs_fall_time()
        };
        let result = run_sweep(&grid).unwrap();
        let keys: Vec<_> = result
            .rows
            .iter()
            .map(|r| {
                (
                    r.inductance,
                    r.turn_on_time,
                    r.delay_tolerance,
                    r.damping_resistance,
                    r.capacitance,
                )
            })
            .collect();
        let mut sorted = keys.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(keys, sorted);
    }

    #[test]
    fn identical_grids_give_identical_csv() {
        let grid = SweepGrid::stress_vs_fall_time();
        let a = csv_text(&run_sweep(&grid).unwrap());
        let b = csv_text(&run_sweep(&grid).unwrap());
        assert_eq!(a, b);
    }
}
