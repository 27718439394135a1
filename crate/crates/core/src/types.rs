//! Domain value objects shared by every analysis stage.
//!
//! All quantities are SI base units (V, A, s, H, F, Ω). Serialized field
//! names use the conventional circuit symbols (`V_s`, `C_d`, ...) so that
//! config files and reports read like a datasheet.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::eng;

/// Crowbar-level electrical context.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitSpec {
    /// DC source voltage (V).
    #[serde(rename = "V_s")]
    pub source_voltage: f64,
    /// Number of series thyristors.
    #[serde(rename = "N")]
    pub device_count: u32,
    /// di/dt limiting inductance (H).
    #[serde(rename = "L")]
    pub inductance: f64,
}

impl CircuitSpec {
    /// Steady-state share of the source voltage per device.
    pub fn static_share(&self) -> f64 {
        self.source_voltage / f64::from(self.device_count)
    }

    pub(crate) fn n(&self) -> f64 {
        f64::from(self.device_count)
    }
}

/// Thyristor datasheet values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceParams {
    /// Maximum gate turn-on delay (s).
    #[serde(rename = "t_dmax")]
    pub delay_max: f64,
    /// Minimum gate turn-on delay (s).
    #[serde(rename = "t_dmin")]
    pub delay_min: f64,
    /// Linearized anode-voltage fall time, 100% to 0 (s).
    #[serde(rename = "t_on")]
    pub turn_on_time: f64,
    /// Maximum forward leakage current (A).
    #[serde(rename = "I_Dmax")]
    pub leakage_max: f64,
    /// Minimum forward leakage current (A).
    #[serde(rename = "I_Dmin")]
    pub leakage_min: f64,
    /// Rated DC blocking voltage (V).
    #[serde(rename = "V_Ddc")]
    pub rated_dc_voltage: f64,
    /// RMS on-state current (A).
    #[serde(rename = "I_Trms")]
    pub rms_current: f64,
    /// Peak non-repetitive surge current (A).
    #[serde(rename = "I_TSM")]
    pub surge_current: f64,
    /// Maximum reverse-recovery charge (C).
    #[serde(rename = "Q_max")]
    pub recovery_charge_max: f64,
    /// Minimum reverse-recovery charge (C).
    #[serde(rename = "Q_min")]
    pub recovery_charge_min: f64,
}

impl DeviceParams {
    /// Turn-on delay spread `t_dmax - t_dmin`.
    pub fn delay_tolerance(&self) -> f64 {
        self.delay_max - self.delay_min
    }

    /// Copy with the delay spread replaced, keeping `t_dmin`.
    pub fn with_delay_tolerance(mut self, spread: f64) -> Self {
        self.delay_max = self.delay_min + spread;
        self
    }

    pub fn with_turn_on_time(mut self, t_on: f64) -> Self {
        self.turn_on_time = t_on;
        self
    }
}

/// Fractional component tolerances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceSpec {
    /// Capacitor tolerance `a_c`.
    #[serde(rename = "a_c")]
    pub capacitor: f64,
    /// Resistor tolerance `a_R`.
    #[serde(rename = "a_R")]
    pub resistor: f64,
}

impl ToleranceSpec {
    pub const EXACT: ToleranceSpec = ToleranceSpec {
        capacitor: 0.0,
        resistor: 0.0,
    };
}

/// A candidate static + dynamic balancing network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BalancingDesign {
    /// Static balancing resistance (Ω).
    #[serde(rename = "R_s")]
    pub static_resistance: f64,
    /// Dynamic damping resistance (Ω).
    #[serde(rename = "R_d")]
    pub damping_resistance: f64,
    /// Nominal dynamic balancing capacitance (F).
    #[serde(rename = "C_d")]
    pub capacitance: f64,
    pub tolerances: ToleranceSpec,
}

impl BalancingDesign {
    /// Worst-case capacitance seen by the slowest device, `(1 - a_c) * C_d`.
    pub fn effective_capacitance(&self) -> f64 {
        (1.0 - self.tolerances.capacitor) * self.capacitance
    }

    pub fn with_dynamic(mut self, r_d: f64, c_d: f64) -> Self {
        self.damping_resistance = r_d;
        self.capacitance = c_d;
        self
    }
}

/// Characteristic values of the charging loop `L`, `R_d`, `C_eff`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecondOrderParams {
    /// `R_d / 2L` (1/s).
    #[serde(rename = "delta")]
    pub damping_rate: f64,
    /// Damped angular frequency (rad/s).
    #[serde(rename = "omega_d")]
    pub damped_frequency: f64,
    /// `atan(delta / omega_d)` (rad).
    #[serde(rename = "phi")]
    pub phase: f64,
}

/// Which charging model applies, decided only by `t_dTol` versus `t_on`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    /// `t_dTol <= t_on`: the drive ramps for the whole charging window.
    Regime1,
    /// `t_dTol > t_on`: the drive saturates at `V_s` before the slow device fires.
    Regime2,
}

impl Regime {
    pub fn classify(dev: &DeviceParams) -> Regime {
        if dev.delay_tolerance() <= dev.turn_on_time {
            Regime::Regime1
        } else {
            Regime::Regime2
        }
    }
}

/// Peak stresses on the slowest device and its dynamic network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransientReport {
    /// Peak anode-cathode voltage of the slowest device (V).
    #[serde(rename = "V_AK1_max")]
    pub peak_voltage: f64,
    /// Overvoltage above the static share (%).
    #[serde(rename = "V_d_ov")]
    pub overvoltage_pct: f64,
    /// Peak charging current (A).
    #[serde(rename = "I_ch_max")]
    pub peak_charge_current: f64,
    /// Peak discharge current magnitude (A).
    #[serde(rename = "I_dis_max")]
    pub peak_discharge_current: f64,
    /// Peak discharge current with its sign (negative = discharging) (A).
    #[serde(rename = "I_dis_max_signed")]
    pub peak_discharge_signed: f64,
    /// Time at which the slowest device reaches conduction (s).
    #[serde(rename = "t_on1")]
    pub first_device_on_time: f64,
    pub regime: Regime,
}

impl TransientReport {
    /// `I_ch_max / |I_dis_max|`, when the denominator is non-zero.
    pub fn current_ratio(&self) -> Option<f64> {
        (self.peak_discharge_current > 0.0)
            .then(|| self.peak_charge_current / self.peak_discharge_current)
    }
}

impl fmt::Display for TransientReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "regime            {:?}", self.regime)?;
        writeln!(f, "V_AK1_max         {}", eng(self.peak_voltage, "V"))?;
        writeln!(f, "V_d_ov            {:.2} %", self.overvoltage_pct)?;
        writeln!(
            f,
            "I_ch_max          {}",
            eng(self.peak_charge_current, "A")
        )?;
        writeln!(
            f,
            "I_dis_max         {}",
            eng(self.peak_discharge_signed, "A")
        )?;
        match self.current_ratio() {
            Some(r) => writeln!(f, "I_ratio           {r:.3}")?,
            None => writeln!(f, "I_ratio           n/a")?,
        }
        write!(
            f,
            "t_on1             {}",
            eng(self.first_device_on_time, "s")
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Channel {
    #[serde(rename = "v_drive")]
    DriveVoltage,
    #[serde(rename = "i_ch")]
    ChargeCurrent,
    #[serde(rename = "v_AK1")]
    DeviceVoltage,
    #[serde(rename = "i_dis")]
    DischargeCurrent,
}

impl Channel {
    pub const ALL: [Channel; 4] = [
        Channel::DriveVoltage,
        Channel::ChargeCurrent,
        Channel::DeviceVoltage,
        Channel::DischargeCurrent,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Channel::DriveVoltage => "v_drive",
            Channel::ChargeCurrent => "i_ch",
            Channel::DeviceVoltage => "v_AK1",
            Channel::DischargeCurrent => "i_dis",
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// A sampled channel. Times are strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waveform {
    pub channel: Channel,
    t: Vec<f64>,
    y: Vec<f64>,
}

impl Waveform {
    pub fn new(channel: Channel, t: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if t.len() != y.len() {
            return Err(Error::Invalid(format!(
                "waveform {channel}: {} times but {} values",
                t.len(),
                y.len()
            )));
        }
        if t.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Invalid(format!(
                "waveform {channel}: sample times not strictly increasing"
            )));
        }
        Ok(Self { channel, t, y })
    }

    pub fn times(&self) -> &[f64] {
        &self.t
    }

    pub fn values(&self) -> &[f64] {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.t.iter().copied().zip(self.y.iter().copied())
    }

    /// Largest absolute sample value.
    pub fn peak_magnitude(&self) -> f64 {
        self.y.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Writes `t_s,value` CSV with a header row.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t_s", "value"])?;
        for (t, y) in self.samples() {
            w.write_record([format!("{t:e}"), format!("{y:e}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// One violated invariant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub rule: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationOutcome {
    pub violations: Vec<Violation>,
}

impl ValidationOutcome {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    fn check(&mut self, ok: bool, field: &str, rule: &str) {
        if !ok {
            self.violations.push(Violation {
                field: field.to_owned(),
                rule: rule.to_owned(),
            });
        }
    }

    /// Converts a failed outcome into an `Error::Invalid` listing every violation.
    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            return Ok(());
        }
        let list = self
            .violations
            .iter()
            .map(|v| format!("{}: {}", v.field, v.rule))
            .collect::<Vec<_>>()
            .join("; ");
        Err(Error::Invalid(list))
    }
}

impl fmt::Display for ValidationOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return f.write_str("ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("\n")?;
            }
            write!(f, "{}: violates {}", v.field, v.rule)?;
        }
        Ok(())
    }
}

fn finite(x: f64) -> bool {
    x.is_finite()
}

/// Checks circuit and device invariants only.
pub fn validate_context(
    spec: &CircuitSpec,
    dev: &DeviceParams,
    tol: &ToleranceSpec,
) -> ValidationOutcome {
    let mut out = ValidationOutcome::default();
    out.check(
        finite(spec.source_voltage) && spec.source_voltage > 0.0,
        "V_s",
        "V_s > 0",
    );
    out.check(spec.device_count >= 2, "N", "N ≥ 2");
    out.check(
        finite(spec.inductance) && spec.inductance > 0.0,
        "L",
        "L > 0",
    );

    out.check(
        finite(dev.delay_min) && dev.delay_min >= 0.0,
        "t_dmin",
        "t_dmin ≥ 0",
    );
    out.check(
        finite(dev.delay_max) && dev.delay_max >= dev.delay_min,
        "t_dmax",
        "t_dmin ≤ t_dmax",
    );
    out.check(
        finite(dev.turn_on_time) && dev.turn_on_time > 0.0,
        "t_on",
        "t_on > 0",
    );
    out.check(
        finite(dev.leakage_min) && dev.leakage_min >= 0.0,
        "I_Dmin",
        "I_Dmin ≥ 0",
    );
    out.check(
        finite(dev.leakage_max) && dev.leakage_max > dev.leakage_min,
        "I_Dmax",
        "I_Dmax > I_Dmin",
    );
    out.check(
        finite(dev.recovery_charge_min) && dev.recovery_charge_min >= 0.0,
        "Q_min",
        "Q_min ≥ 0",
    );
    out.check(
        finite(dev.recovery_charge_max) && dev.recovery_charge_max >= dev.recovery_charge_min,
        "Q_max",
        "Q_max ≥ Q_min",
    );
    out.check(
        finite(dev.rated_dc_voltage) && dev.rated_dc_voltage >= 0.0,
        "V_Ddc",
        "V_Ddc ≥ 0",
    );
    out.check(
        finite(dev.rms_current) && dev.rms_current >= 0.0,
        "I_Trms",
        "I_Trms ≥ 0",
    );
    out.check(
        finite(dev.surge_current) && dev.surge_current >= 0.0,
        "I_TSM",
        "I_TSM ≥ 0",
    );

    out.check(tol.capacitor >= 0.0, "a_c", "a_c ≥ 0");
    out.check(tol.capacitor < 1.0, "a_c", "(1 − a_c) > 0");
    out.check(tol.resistor >= 0.0, "a_R", "a_R ≥ 0");
    out.check(tol.resistor < 1.0, "a_R", "(1 − a_R²) > 0");
    out
}

/// Checks every invariant of the three inputs. Never fails; violations are data.
pub fn validate(
    spec: &CircuitSpec,
    dev: &DeviceParams,
    design: &BalancingDesign,
) -> ValidationOutcome {
    let mut out = validate_context(spec, dev, &design.tolerances);
    out.check(
        !design.static_resistance.is_nan() && design.static_resistance > 0.0,
        "R_s",
        "R_s > 0",
    );
    out.check(
        finite(design.damping_resistance) && design.damping_resistance >= 0.0,
        "R_d",
        "R_d ≥ 0",
    );
    out.check(
        finite(design.capacitance) && design.capacitance > 0.0,
        "C_d",
        "C_d > 0",
    );
    out
}

/// Damping rate, damped frequency and phase of the charging loop.
pub fn second_order_params(
    spec: &CircuitSpec,
    design: &BalancingDesign,
) -> Result<SecondOrderParams> {
    let c_eff = design.effective_capacitance();
    if !(c_eff > 0.0) {
        return Err(Error::Invalid(format!(
            "effective capacitance (1 − a_c)·C_d = {c_eff:e} must be positive"
        )));
    }
    let l = spec.inductance;
    let delta = design.damping_resistance / (2.0 * l);
    let natural_sq = 1.0 / (l * c_eff);
    let damping_sq = delta * delta;
    if natural_sq <= damping_sq {
        return Err(Error::NotUnderdamped {
            natural_sq,
            damping_sq,
        });
    }
    let omega_d = (natural_sq - damping_sq).sqrt();
    Ok(SecondOrderParams {
        damping_rate: delta,
        damped_frequency: omega_d,
        phase: (delta / omega_d).atan(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    fn hv_design() -> BalancingDesign {
        BalancingDesign {
            static_resistance: 2.5e6,
            damping_resistance: 3.0,
            capacitance: 40e-9,
            tolerances: presets::hv_tolerances(),
        }
    }

    #[test]
    fn hv_design_validates() {
        let out = validate(&presets::hv_circuit(), &presets::hv_device(), &hv_design());
        assert!(out.is_ok(), "{out}");
    }

    #[test]
    fn single_device_is_rejected() {
        let mut spec = presets::hv_circuit();
        spec.device_count = 1;
        let out = validate(&spec, &presets::hv_device(), &hv_design());
        assert_eq!(out.violations.len(), 1);
        assert_eq!(out.violations[0].field, "N");
        assert_eq!(out.violations[0].rule, "N ≥ 2");
    }

    #[test]
    fn unit_capacitor_tolerance_is_rejected() {
        let mut design = hv_design();
        design.tolerances.capacitor = 1.0;
        let out = validate(&presets::hv_circuit(), &presets::hv_device(), &design);
        assert!(out.violations.iter().any(|v| v.rule == "(1 − a_c) > 0"));
    }

    #[test]
    fn validate_collects_every_violation_and_never_panics() {
        let spec = CircuitSpec {
            source_voltage: f64::NAN,
            device_count: 0,
            inductance: -1.0,
        };
        let mut dev = presets::hv_device();
        dev.delay_min = 5e-6;
        dev.leakage_max = dev.leakage_min;
        let design = BalancingDesign {
            static_resistance: 0.0,
            damping_resistance: -1.0,
            capacitance: 0.0,
            tolerances: ToleranceSpec {
                capacitor: 2.0,
                resistor: -0.1,
            },
        };
        let out = validate(&spec, &dev, &design);
        let fields: Vec<_> = out.violations.iter().map(|v| v.field.as_str()).collect();
        for f in [
            "V_s", "N", "L", "t_dmax", "I_Dmax", "R_s", "R_d", "C_d", "a_c", "a_R",
        ] {
            assert!(fields.contains(&f), "missing {f} in {fields:?}");
        }
    }

    #[test]
    fn zero_min_delay_is_allowed() {
        let dev = presets::hv_device();
        assert_eq!(dev.delay_min, 0.0);
        assert!(validate_context(&presets::hv_circuit(), &dev, &presets::hv_tolerances()).is_ok());
    }

    #[test]
    fn undamped_parameters() {
        // L = 250 µH, C_eff = 36 nF  =>  omega = 1/sqrt(9e-12) = 1/3e-6
        let spec = presets::hv_circuit();
        let design = hv_design().with_dynamic(0.0, 40e-9);
        let p = second_order_params(&spec, &design).unwrap();
        assert_eq!(p.damping_rate, 0.0);
        assert_eq!(p.phase, 0.0);
        assert!((p.damped_frequency - 1.0 / 3e-6).abs() / (1.0 / 3e-6) < 1e-12);
    }

    #[test]
    fn critical_damping_is_not_underdamped() {
        let spec = presets::hv_circuit();
        let c_eff = 36e-9;
        let r_crit = 2.0 * (spec.inductance / c_eff).sqrt();
        let design = hv_design().with_dynamic(r_crit, 40e-9);
        assert!(matches!(
            second_order_params(&spec, &design),
            Err(Error::NotUnderdamped { .. })
        ));
        let design = hv_design().with_dynamic(1.01 * r_crit, 40e-9);
        assert!(matches!(
            second_order_params(&spec, &design),
            Err(Error::NotUnderdamped { .. })
        ));
    }

    #[test]
    fn small_damping_phase() {
        // R_d = 3 Ω, L = 250 µH  =>  delta = 6000 1/s
        let spec = presets::hv_circuit();
        let design = hv_design().with_dynamic(3.0, 47e-9);
        let p = second_order_params(&spec, &design).unwrap();
        assert!((p.damping_rate - 6000.0).abs() < 1e-9);
        let c_eff: f64 = 0.9 * 47e-9;
        let omega: f64 = (1.0 / (250e-6 * c_eff) - 36e6).sqrt();
        assert!((p.damped_frequency - omega).abs() / omega < 1e-12);
        assert!((p.phase - (6000.0 / omega).atan()).abs() < 1e-15);
        assert!(p.phase < 0.05);
    }

    #[test]
    fn regime_depends_only_on_delay_spread_versus_fall_time() {
        let dev = presets::hv_device();
        assert_eq!(Regime::classify(&dev), Regime::Regime1);
        assert_eq!(
            Regime::classify(&dev.with_delay_tolerance(5e-6)),
            Regime::Regime1
        );
        assert_eq!(
            Regime::classify(&dev.with_delay_tolerance(5.0001e-6)),
            Regime::Regime2
        );
    }

    #[test]
    fn waveform_rejects_bad_shapes() {
        assert!(Waveform::new(Channel::ChargeCurrent, vec![0.0, 1.0], vec![0.0]).is_err());
        assert!(Waveform::new(Channel::ChargeCurrent, vec![0.0, 0.0], vec![0.0, 1.0]).is_err());
        let w = Waveform::new(Channel::ChargeCurrent, vec![0.0, 1.0], vec![-3.0, 2.0]).unwrap();
        assert_eq!(w.peak_magnitude(), 3.0);
    }

    #[test]
    fn waveform_csv_has_header() {
        let w = Waveform::new(
            Channel::DeviceVoltage,
            vec![0.0, 1e-6],
            vec![2000.0, 2500.5],
        )
        .unwrap();
        let mut buf = Vec::new();
        w.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "t_s,value\n0e0,2e3\n1e-6,2.5005e3\n");
    }

    #[test]
    fn json_uses_circuit_symbols() {
        let text = serde_json::to_string(&presets::hv_circuit()).unwrap();
        assert_eq!(text, r#"{"V_s":12000.0,"N":6,"L":0.00025}"#);
        assert!(serde_json::from_str::<CircuitSpec>(r#"{"V_s":1,"N":2,"L":1,"X":0}"#).is_err());
    }
}
