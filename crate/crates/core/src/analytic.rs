//! Closed-form turn-on transient of the slowest device in the string.
//!
//! The slowest device `T1` fires at `t_dmax`; the other `N - 1` fire at
//! `t_dmin` and their anode voltages ramp linearly to zero over `t_on`.
//! Until `t_dmax` the dynamic network of `T1` charges through `L` from that
//! ramp (the charging cycle). Afterwards `C_d` discharges into `T1` while its
//! own voltage falls with the same slope (the discharging cycle).
//!
//! Sign convention: charging current is positive, discharge current negative.

use crate::error::{Error, Result};
use crate::types::{
    second_order_params, BalancingDesign, Channel, CircuitSpec, DeviceParams, Regime,
    SecondOrderParams, ToleranceSpec, TransientReport, Waveform,
};

/// Voltage across `L` and `T1` (with its network) while the others turn on.
///
/// Ramps from `V_s/N` at `t_dmin` and saturates at `V_s` once the fast
/// devices have finished their fall, at `t_dmin + t_on`.
pub fn drive_voltage(t: f64, spec: &CircuitSpec, dev: &DeviceParams) -> Result<f64> {
    if !(t >= dev.delay_min) {
        return Err(Error::Domain {
            t,
            start: dev.delay_min,
            end: f64::INFINITY,
        });
    }
    let elapsed = t - dev.delay_min;
    if elapsed >= dev.turn_on_time {
        return Ok(spec.source_voltage);
    }
    let n = spec.n();
    Ok(
        spec.source_voltage / n
            + spec.source_voltage * (n - 1.0) * elapsed / (n * dev.turn_on_time),
    )
}

/// Initial conditions for the free (constant-drive) continuation after `t_1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Regime2Constants {
    /// `t_on + t_dmin`, where the drive reaches `V_s`.
    pub boundary_time: f64,
    /// Charging current at the boundary (A).
    pub boundary_current: f64,
    /// `T1` voltage at the boundary (V).
    pub boundary_device_voltage: f64,
    /// Capacitor voltage at the boundary, `v_AK1 - i·R_d` (V).
    pub boundary_capacitor_voltage: f64,
    /// Cosine coefficient, equal to the boundary current (A).
    pub k1: f64,
    /// Sine coefficient (A).
    pub k2: f64,
}

/// Evaluates the closed forms for one design point.
///
/// Construction fails with [`Error::NotUnderdamped`] when the charging loop
/// has real roots.
#[derive(Debug, Clone)]
pub struct ClosedForm {
    spec: CircuitSpec,
    dev: DeviceParams,
    design: BalancingDesign,
    params: SecondOrderParams,
    regime: Regime,
    /// `V_s (N-1) / (N t_on)`: drive slope during the ramp (V/s).
    ramp_slope: f64,
    regime2: Option<Regime2Constants>,
}

impl ClosedForm {
    pub fn new(spec: &CircuitSpec, dev: &DeviceParams, design: &BalancingDesign) -> Result<Self> {
        let params = second_order_params(spec, design)?;
        let n = spec.n();
        let mut model = ClosedForm {
            spec: *spec,
            dev: *dev,
            design: *design,
            params,
            regime: Regime::classify(dev),
            ramp_slope: spec.source_voltage * (n - 1.0) / (n * dev.turn_on_time),
            regime2: None,
        };
        if model.regime == Regime::Regime2 {
            let boundary_time = dev.delay_min + dev.turn_on_time;
            let tau = dev.turn_on_time;
            let i1 = model.ramp_current(tau);
            let v1 = model.ramp_device_voltage(tau);
            let vc = v1 - i1 * design.damping_resistance;
            let l = spec.inductance;
            let SecondOrderParams {
                damping_rate: delta,
                damped_frequency: omega,
                ..
            } = params;
            model.regime2 = Some(Regime2Constants {
                boundary_time,
                boundary_current: i1,
                boundary_device_voltage: v1,
                boundary_capacitor_voltage: vc,
                k1: i1,
                k2: (spec.source_voltage - vc - i1 * l * delta) / (l * omega),
            });
        }
        Ok(model)
    }

    pub fn params(&self) -> SecondOrderParams {
        self.params
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn regime2_constants(&self) -> Option<Regime2Constants> {
        self.regime2
    }

    pub fn circuit(&self) -> &CircuitSpec {
        &self.spec
    }

    pub fn device(&self) -> &DeviceParams {
        &self.dev
    }

    pub fn design(&self) -> &BalancingDesign {
        &self.design
    }

    fn c_eff(&self) -> f64 {
        self.design.effective_capacitance()
    }

    /// Charging current under the ramp drive, `tau = t - t_dmin`.
    ///
    /// The amplitude `cos(ωτ - φ) / (ω·sqrt(L·C))` is expanded to
    /// `cos ωτ + (δ/ω) sin ωτ`, which is exactly 1 at `τ = 0`.
    fn ramp_current(&self, tau: f64) -> f64 {
        let SecondOrderParams {
            damping_rate: delta,
            damped_frequency: omega,
            ..
        } = self.params;
        let (s, c) = (omega * tau).sin_cos();
        let envelope = (-delta * tau).exp();
        self.ramp_slope * self.c_eff() * (1.0 - envelope * (c + delta / omega * s))
    }

    fn ramp_device_voltage(&self, tau: f64) -> f64 {
        let SecondOrderParams {
            damping_rate: delta,
            damped_frequency: omega,
            ..
        } = self.params;
        let envelope = (-delta * tau).exp();
        self.spec.static_share() + self.ramp_slope * (tau - envelope * (omega * tau).sin() / omega)
    }

    fn free_terms(&self, k: &Regime2Constants, t: f64) -> (f64, f64) {
        let SecondOrderParams {
            damping_rate: delta,
            damped_frequency: omega,
            ..
        } = self.params;
        let s_t = t - k.boundary_time;
        let (s, c) = (omega * s_t).sin_cos();
        let envelope = (-delta * s_t).exp();
        let current = envelope * (k.k1 * c + k.k2 * s);
        let voltage = self.spec.source_voltage
            + self.spec.inductance
                * envelope
                * ((k.k1 * omega + k.k2 * delta) * s + (k.k1 * delta - k.k2 * omega) * c);
        (current, voltage)
    }

    fn check_charging_window(&self, t: f64) -> Result<()> {
        if t >= self.dev.delay_min && t <= self.dev.delay_max {
            Ok(())
        } else {
            Err(Error::Domain {
                t,
                start: self.dev.delay_min,
                end: self.dev.delay_max,
            })
        }
    }

    /// Charging current `i_ch(t)` for `t` in `[t_dmin, t_dmax]`.
    pub fn charging_current(&self, t: f64) -> Result<f64> {
        self.check_charging_window(t)?;
        Ok(match &self.regime2 {
            Some(k) if t > k.boundary_time => self.free_terms(k, t).0,
            _ => self.ramp_current(t - self.dev.delay_min),
        })
    }

    /// Voltage across `T1`, `v_AK1(t)`, for `t` in `[t_dmin, t_dmax]`.
    pub fn device_voltage(&self, t: f64) -> Result<f64> {
        self.check_charging_window(t)?;
        Ok(match &self.regime2 {
            Some(k) if t > k.boundary_time => self.free_terms(k, t).1,
            _ => self.ramp_device_voltage(t - self.dev.delay_min),
        })
    }

    pub fn drive_voltage(&self, t: f64) -> Result<f64> {
        drive_voltage(t, &self.spec, &self.dev)
    }

    /// `(I_ch_max, V_AK1_max)`, both taken at the firing instant `t_dmax`.
    pub fn peak_charging(&self) -> (f64, f64) {
        let t = self.dev.delay_max;
        // t_dmax is inside the window by construction
        (
            self.charging_current(t).expect("t_dmax in window"),
            self.device_voltage(t).expect("t_dmax in window"),
        )
    }

    /// Forced value of the discharge current, `-V_s·C_eff / (N·t_on)`.
    pub fn discharge_asymptote(&self) -> f64 {
        -self.spec.source_voltage * self.c_eff() / (self.spec.n() * self.dev.turn_on_time)
    }

    /// Discharge current `i_dis(t)` for `t >= t_dmax`.
    ///
    /// With `R_d = 0` the network current jumps to its forced value
    /// immediately after `t_dmax`.
    pub fn discharge_current(&self, t: f64) -> Result<f64> {
        let t0 = self.dev.delay_max;
        if !(t >= t0) {
            return Err(Error::Domain {
                t,
                start: t0,
                end: f64::INFINITY,
            });
        }
        let initial = self.peak_charging().0;
        let forced = self.discharge_asymptote();
        if t == t0 {
            return Ok(initial);
        }
        let time_constant = self.design.damping_resistance * self.c_eff();
        if time_constant == 0.0 {
            return Ok(forced);
        }
        Ok((initial - forced) * (-(t - t0) / time_constant).exp() + forced)
    }

    /// `t_on1`: when the slowest device reaches conduction.
    pub fn first_device_on_time(&self) -> f64 {
        turn_on_time_from_peak(&self.spec, &self.dev, self.peak_charging().1)
    }

    /// Signed discharge current at `t_on1`.
    pub fn peak_discharge(&self) -> f64 {
        self.discharge_current(self.first_device_on_time())
            .expect("t_on1 >= t_dmax")
    }

    pub fn report(&self) -> TransientReport {
        let (i_ch, v_peak) = self.peak_charging();
        let t_on1 = turn_on_time_from_peak(&self.spec, &self.dev, v_peak);
        let i_dis = self.discharge_current(t_on1).expect("t_on1 >= t_dmax");
        TransientReport {
            peak_voltage: v_peak,
            overvoltage_pct: overvoltage_percent(&self.spec, v_peak),
            peak_charge_current: i_ch,
            peak_discharge_current: i_dis.abs(),
            peak_discharge_signed: i_dis,
            first_device_on_time: t_on1,
            regime: self.regime,
        }
    }

    /// Value of `channel` at `t`, within that channel's validity window.
    pub fn sample(&self, channel: Channel, t: f64) -> Result<f64> {
        match channel {
            Channel::DriveVoltage => self.drive_voltage(t),
            Channel::ChargeCurrent => self.charging_current(t),
            Channel::DeviceVoltage => self.device_voltage(t),
            Channel::DischargeCurrent => self.discharge_current(t),
        }
    }

    /// Time window over which `channel` is sampled by [`ClosedForm::waveform`].
    pub fn window(&self, channel: Channel) -> (f64, f64) {
        match channel {
            Channel::DischargeCurrent => (self.dev.delay_max, self.first_device_on_time()),
            _ => (self.dev.delay_min, self.dev.delay_max),
        }
    }

    /// Uniformly sampled waveform with `points` samples (one if the window is empty).
    pub fn waveform(&self, channel: Channel, points: usize) -> Result<Waveform> {
        let (start, end) = self.window(channel);
        let times = uniform_times(start, end, points);
        let values = times
            .iter()
            .map(|&t| self.sample(channel, t))
            .collect::<Result<Vec<_>>>()?;
        Waveform::new(channel, times, values)
    }
}

pub(crate) fn uniform_times(start: f64, end: f64, points: usize) -> Vec<f64> {
    if !(end > start) || points < 2 {
        return vec![start];
    }
    let last = points - 1;
    (0..points)
        .map(|k| {
            if k == last {
                end
            } else {
                start + (end - start) * k as f64 / last as f64
            }
        })
        .collect()
}

pub fn charging_current(
    t: f64,
    spec: &CircuitSpec,
    dev: &DeviceParams,
    design: &BalancingDesign,
) -> Result<f64> {
    ClosedForm::new(spec, dev, design)?.charging_current(t)
}

pub fn vak1(
    t: f64,
    spec: &CircuitSpec,
    dev: &DeviceParams,
    design: &BalancingDesign,
) -> Result<f64> {
    ClosedForm::new(spec, dev, design)?.device_voltage(t)
}

/// `(I_ch_max, V_AK1_max)`.
pub fn peak_charging(
    spec: &CircuitSpec,
    dev: &DeviceParams,
    design: &BalancingDesign,
) -> Result<(f64, f64)> {
    Ok(ClosedForm::new(spec, dev, design)?.peak_charging())
}

pub fn discharge_current(
    t: f64,
    spec: &CircuitSpec,
    dev: &DeviceParams,
    design: &BalancingDesign,
) -> Result<f64> {
    ClosedForm::new(spec, dev, design)?.discharge_current(t)
}

pub fn first_device_turnon_time(
    spec: &CircuitSpec,
    dev: &DeviceParams,
    design: &BalancingDesign,
) -> Result<f64> {
    Ok(ClosedForm::new(spec, dev, design)?.first_device_on_time())
}

/// `t_on1 = V_AK1_max·N·t_on / V_s + t_dmax`.
pub fn turn_on_time_from_peak(spec: &CircuitSpec, dev: &DeviceParams, peak_voltage: f64) -> f64 {
    peak_voltage * spec.n() * dev.turn_on_time / spec.source_voltage + dev.delay_max
}

/// Signed peak discharge current.
pub fn peak_discharge(
    spec: &CircuitSpec,
    dev: &DeviceParams,
    design: &BalancingDesign,
) -> Result<f64> {
    Ok(ClosedForm::new(spec, dev, design)?.peak_discharge())
}

pub fn transient_report(
    spec: &CircuitSpec,
    dev: &DeviceParams,
    design: &BalancingDesign,
) -> Result<TransientReport> {
    Ok(ClosedForm::new(spec, dev, design)?.report())
}

/// Percentage by which `peak_voltage` exceeds the static share `V_s/N`.
pub fn overvoltage_percent(spec: &CircuitSpec, peak_voltage: f64) -> f64 {
    let share = spec.static_share();
    100.0 * (peak_voltage - share) / share
}

/// Static balancing resistance holding the worst device at or below `v_d1`
/// given leakage mismatch and resistor tolerance.
///
/// A zero numerator (no headroom) returns 0 Ω; a negative one is infeasible.
pub fn static_resistor(
    spec: &CircuitSpec,
    dev: &DeviceParams,
    tol: &ToleranceSpec,
    v_d1: f64,
) -> Result<f64> {
    let n = spec.n();
    let a = tol.resistor;
    let leakage_spread = dev.leakage_max - dev.leakage_min;
    if !(leakage_spread > 0.0) {
        return Err(Error::Invalid("I_Dmax must exceed I_Dmin".into()));
    }
    if !(0.0..1.0).contains(&a) {
        return Err(Error::Invalid(format!("a_R = {a} outside [0, 1)")));
    }
    let numerator = v_d1 * (n * (1.0 - a) + 2.0 * a) - (1.0 + a) * spec.source_voltage;
    if numerator < 0.0 || numerator.is_nan() {
        return Err(Error::InfeasibleStatic { v_d1, numerator });
    }
    Ok(numerator / ((n - 1.0) * (1.0 - a * a) * leakage_spread))
}

/// Conventional turn-off sizing of `C_d` from the recovery-charge spread.
pub fn reverse_recovery_cd(
    spec: &CircuitSpec,
    dev: &DeviceParams,
    tol: &ToleranceSpec,
    v_d1: f64,
) -> Result<f64> {
    let n = spec.n();
    let a = tol.capacitor;
    if !(0.0..1.0).contains(&a) {
        return Err(Error::Invalid(format!("a_c = {a} outside [0, 1)")));
    }
    let sharing = 1.0 + (n - 1.0) * (1.0 - a) / (1.0 + a);
    let bracket = v_d1 * sharing - spec.source_voltage;
    if !(bracket > 0.0) {
        return Err(Error::InfeasibleRecovery {
            denominator: (1.0 - a) * bracket,
        });
    }
    let charge_spread = dev.recovery_charge_max - dev.recovery_charge_min;
    Ok(sharing * charge_spread / ((1.0 - a) * bracket))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    fn design(r_d: f64, c_d: f64) -> BalancingDesign {
        BalancingDesign {
            static_resistance: 2.5e6,
            damping_resistance: r_d,
            capacitance: c_d,
            tolerances: hv_tolerances(),
        }
    }

    #[test]
    fn drive_starts_at_static_share_and_reaches_source() {
        let spec = hv_circuit();
        let dev = hv_device();
        assert_eq!(drive_voltage(0.0, &spec, &dev).unwrap(), 2000.0);
        assert_eq!(drive_voltage(5e-6, &spec, &dev).unwrap(), 12000.0);
        assert_eq!(drive_voltage(9e-6, &spec, &dev).unwrap(), 12000.0);
        // 2000 + 10000 * 3/5
        assert!((drive_voltage(3e-6, &spec, &dev).unwrap() - 8000.0).abs() < 1e-9);
        assert!(matches!(
            drive_voltage(-1e-9, &spec, &dev),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn drive_respects_nonzero_min_delay() {
        let spec = hv_circuit();
        let mut dev = hv_device();
        dev.delay_min = 1e-6;
        dev.delay_max = 4e-6;
        assert_eq!(drive_voltage(1e-6, &spec, &dev).unwrap(), 2000.0);
        assert!((drive_voltage(4e-6, &spec, &dev).unwrap() - 8000.0).abs() < 1e-9);
        assert!(drive_voltage(0.5e-6, &spec, &dev).is_err());
    }

    #[test]
    fn expanded_amplitude_matches_phase_form() {
        let spec = hv_circuit();
        let dev = hv_device();
        for r_d in [0.0, 3.0, 15.0, 30.0] {
            let d = design(r_d, 40e-9);
            let m = ClosedForm::new(&spec, &dev, &d).unwrap();
            let p = m.params();
            let c = d.effective_capacitance();
            let k = 12e3 * 5.0 / (6.0 * 5e-6);
            for tau in [0.3e-6, 1.1e-6, 2.9e-6] {
                let phase_form = k
                    * c
                    * (1.0
                        - (-p.damping_rate * tau).exp()
                            / (p.damped_frequency * (spec.inductance * c).sqrt())
                            * (p.damped_frequency * tau - p.phase).cos());
                let got = m.charging_current(tau).unwrap();
                assert!(
                    (got - phase_form).abs() < 1e-9 * k * c,
                    "{got} vs {phase_form}"
                );
            }
        }
    }

    #[test]
    fn initial_conditions_are_exact() {
        let spec = hv_circuit();
        let dev = hv_device();
        for r_d in [0.0, 1.0, 3.0, 15.0, 30.0, 60.0] {
            let m = ClosedForm::new(&spec, &dev, &design(r_d, 40e-9)).unwrap();
            assert_eq!(m.charging_current(0.0).unwrap(), 0.0);
            assert_eq!(m.device_voltage(0.0).unwrap(), 2000.0);
        }
    }

    #[test]
    fn charging_window_is_enforced() {
        let m = ClosedForm::new(&hv_circuit(), &hv_device(), &design(0.0, 40e-9)).unwrap();
        assert!(m.charging_current(-1e-9).is_err());
        assert!(m.charging_current(3.0001e-6).is_err());
        assert!(m.device_voltage(3.0001e-6).is_err());
        assert!(m.discharge_current(2.9e-6).is_err());
    }

    #[test]
    fn worked_design_point() {
        let report = transient_report(&hv_circuit(), &hv_device(), &design(0.0, 40e-9)).unwrap();
        assert!(rel(report.peak_charge_current, 33.0) < 0.10, "{report:?}");
        assert!(rel(report.peak_voltage, 3000.0) < 0.02, "{report:?}");
        assert!(
            rel(report.peak_discharge_current, 15.0) < 0.10,
            "{report:?}"
        );
        assert!(report.peak_discharge_signed < 0.0);
        assert_eq!(report.regime, Regime::Regime1);
        // R_d = 0: forced value reached at once, 12 kV · 36 nF / 30 µs
        assert!(rel(report.peak_discharge_current, 14.4) < 1e-12);
    }

    #[test]
    fn no_delay_spread_means_no_transient() {
        let dev = hv_device().with_delay_tolerance(0.0);
        let (i, v) = peak_charging(&hv_circuit(), &dev, &design(3.0, 40e-9)).unwrap();
        assert_eq!(i, 0.0);
        assert_eq!(v, 2000.0);
        let t_on1 = first_device_turnon_time(&hv_circuit(), &dev, &design(3.0, 40e-9)).unwrap();
        assert!((t_on1 - (dev.turn_on_time + dev.delay_max)).abs() < 1e-18);
    }

    #[test]
    fn first_device_on_time_from_peak() {
        let spec = hv_circuit();
        let dev = hv_device();
        // 3000 · 6 · 5 µs / 12000 + 3 µs
        assert!((turn_on_time_from_peak(&spec, &dev, 3000.0) - 10.5e-6).abs() < 1e-15);
        let a = turn_on_time_from_peak(&spec, &dev, 2500.0) - dev.delay_max;
        let b = turn_on_time_from_peak(&spec, &dev, 5000.0) - dev.delay_max;
        assert!((b - 2.0 * a).abs() < 1e-18);
    }

    #[test]
    fn discharge_starts_from_charging_current_and_decays_to_forced_value() {
        let spec = hv_circuit();
        let dev = hv_device();
        let m = ClosedForm::new(&spec, &dev, &design(3.0, 40e-9)).unwrap();
        let i0 = m.peak_charging().0;
        assert_eq!(m.discharge_current(dev.delay_max).unwrap(), i0);
        let forced = -12e3 * 36e-9 / (6.0 * 5e-6);
        assert!(rel(m.discharge_asymptote(), forced) < 1e-12);
        assert!(rel(m.discharge_current(1.0).unwrap(), forced) < 1e-12);
    }

    #[test]
    fn discharge_vanishes_with_capacitance() {
        let spec = hv_circuit();
        let dev = hv_device();
        let mut last = f64::INFINITY;
        for c in [1e-9, 1e-11, 1e-13, 1e-15] {
            let i = peak_discharge(&spec, &dev, &design(3.0, c)).unwrap().abs();
            assert!(i < last);
            last = i;
        }
        assert!(last < 1e-5);
    }

    #[test]
    fn recovery_comparison_point() {
        let report = transient_report(&hv_circuit(), &hv_device(), &design(0.0, 2.25e-6)).unwrap();
        assert!(rel(report.peak_charge_current, 36.0) < 0.10, "{report:?}");
        assert!(
            rel(report.peak_discharge_current, 810.0) < 0.10,
            "{report:?}"
        );
    }

    #[test]
    fn bench_predictions() {
        for tol in [
            hv_tolerances(),
            ToleranceSpec {
                capacitor: 0.0,
                resistor: 0.05,
            },
        ] {
            let spec = bench_circuit();
            let wide = transient_report(&spec, &bench_device(2.4e-6), &bench_design(tol)).unwrap();
            let narrow =
                transient_report(&spec, &bench_device(0.8e-6), &bench_design(tol)).unwrap();
            assert!(rel(wide.peak_voltage, 112.6) < 0.05, "{wide:?}");
            assert!(rel(narrow.peak_voltage, 82.0) < 0.05, "{narrow:?}");
            assert!(rel(narrow.peak_charge_current, 0.18) < 0.15, "{narrow:?}");
            assert!(
                rel(narrow.peak_discharge_current, 1.14) < 0.15,
                "{narrow:?}"
            );
        }
    }

    #[test]
    fn overvoltage_examples() {
        let spec = hv_circuit();
        assert_eq!(overvoltage_percent(&spec, 2000.0), 0.0);
        assert!((overvoltage_percent(&spec, 3000.0) - 50.0).abs() < 1e-12);
        // (112.6 - 80) / 80
        let v = overvoltage_percent(&bench_circuit(), 112.6);
        assert!((v - 40.75).abs() < 1e-9);
    }

    #[test]
    fn static_resistor_worked_value() {
        let r = static_resistor(&hv_circuit(), &hv_device(), &hv_tolerances(), 2.7e3).unwrap();
        assert!(rel(r, 2.5e6) < 0.02, "{r}");
    }

    #[test]
    fn static_resistor_without_tolerance_reduces() {
        let spec = hv_circuit();
        let dev = hv_device();
        let exact = ToleranceSpec {
            capacitor: 0.1,
            resistor: 0.0,
        };
        let r0 = static_resistor(&spec, &dev, &exact, 2.7e3).unwrap();
        // (6 · 2700 - 12000) / (5 · 250 µA)
        assert!(rel(r0, 4200.0 / 1.25e-3) < 1e-12);
        let r5 = static_resistor(&spec, &dev, &hv_tolerances(), 2.7e3).unwrap();
        assert!(r0 > r5 * (1.0 - 0.05));
    }

    #[test]
    fn static_resistor_boundary_and_infeasible() {
        let spec = CircuitSpec {
            device_count: 2,
            ..hv_circuit()
        };
        let dev = hv_device();
        let exact = ToleranceSpec::EXACT;
        assert_eq!(static_resistor(&spec, &dev, &exact, 6000.0).unwrap(), 0.0);
        assert!(matches!(
            static_resistor(&spec, &dev, &exact, 5999.0),
            Err(Error::InfeasibleStatic { .. })
        ));
    }

    #[test]
    fn recovery_capacitance_worked_value() {
        let c = reverse_recovery_cd(&hv_circuit(), &hv_device(), &hv_tolerances(), 3e3).unwrap();
        assert!(rel(c, 2.25e-6) < 0.02, "{c}");
    }

    #[test]
    fn recovery_capacitance_limits() {
        let spec = hv_circuit();
        let mut dev = hv_device();
        let tol = ToleranceSpec {
            capacitor: 0.0,
            resistor: 0.05,
        };
        let c = reverse_recovery_cd(&spec, &dev, &tol, 3e3).unwrap();
        // a_c = 0: N ΔQ / (N V_d1 - V_s)
        assert!(rel(c, 6.0 * 1.3e-3 / (18e3 - 12e3)) < 1e-12);
        dev.recovery_charge_max = dev.recovery_charge_min;
        assert_eq!(reverse_recovery_cd(&spec, &dev, &tol, 3e3).unwrap(), 0.0);
        assert!(matches!(
            reverse_recovery_cd(&spec, &dev, &hv_tolerances(), 2000.0 / 1.5),
            Err(Error::InfeasibleRecovery { .. })
        ));
    }

    #[test]
    fn regime2_is_continuous_at_boundary() {
        let spec = hv_circuit();
        let dev = hv_device().with_turn_on_time(1e-6);
        for r_d in [0.0, 5.0, 30.0] {
            let m = ClosedForm::new(&spec, &dev, &design(r_d, 40e-9)).unwrap();
            let k = m.regime2_constants().unwrap();
            assert_eq!(k.k1, k.boundary_current);
            assert!(
                (k.boundary_capacitor_voltage
                    - (k.boundary_device_voltage - k.boundary_current * r_d))
                    .abs()
                    < 1e-12
            );
            let t1 = k.boundary_time;
            let after = t1 * (1.0 + 1e-15);
            let i_l = m.charging_current(t1).unwrap();
            let i_r = m.charging_current(after).unwrap();
            let v_l = m.device_voltage(t1).unwrap();
            let v_r = m.device_voltage(after).unwrap();
            assert!(
                (i_l - i_r).abs() <= 1e-9 * i_l.abs().max(1.0),
                "{i_l} {i_r}"
            );
            assert!((v_l - v_r).abs() <= 1e-9 * v_l.abs(), "{v_l} {v_r}");
        }
    }
}
