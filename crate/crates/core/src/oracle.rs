//! Fixed-step numerical integration of the charging and discharging circuits.
//!
//! Nothing here uses the closed forms. The charging loop is integrated in
//! its natural state variables, inductor current `i` and capacitor voltage
//! `v_c`, straight from Kirchhoff's voltage law around `L`, `R_d`, `C_eff`
//! under the piecewise drive:
//!
//! ```text
//! L di/dt  = v_drive(t) - R_d i - v_c
//! C dv_c/dt = i
//! ```
//!
//! The discharge is the first-order current equation
//! `R_d di/dt + i/C_eff = -V_s/(N t_on)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{BalancingDesign, Channel, CircuitSpec, DeviceParams, Waveform};

/// Minimum resolution: integration steps per oscillation period.
pub const MIN_STEPS_PER_PERIOD: f64 = 200.0;

/// Default resolution used by [`IntegratorConfig::auto`].
pub const DEFAULT_STEPS_PER_PERIOD: f64 = 1000.0;

/// Internal sub-steps per discharge time constant.
const DISCHARGE_STEPS_PER_TAU: f64 = 50.0;

const MAX_DISCHARGE_STEPS: f64 = 5e7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "RK4")]
    Rk4,
    #[serde(rename = "trapezoidal")]
    Trapezoidal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    /// Time step (s).
    pub dt: f64,
    pub method: Method,
    /// End of the discharge horizon (s). `None` runs to `t_on1` plus a 25% margin.
    pub t_end: Option<f64>,
}

impl IntegratorConfig {
    /// RK4 at [`DEFAULT_STEPS_PER_PERIOD`] steps per natural period of the loop.
    pub fn auto(spec: &CircuitSpec, design: &BalancingDesign) -> Self {
        IntegratorConfig {
            dt: oscillation_period(spec, design) / DEFAULT_STEPS_PER_PERIOD,
            method: Method::Rk4,
            t_end: None,
        }
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }
}

/// Damped period `2π/ω_d` when underdamped, otherwise the undamped `2π sqrt(L C_eff)`.
pub fn oscillation_period(spec: &CircuitSpec, design: &BalancingDesign) -> f64 {
    let l = spec.inductance;
    let c = design.effective_capacitance();
    let delta = design.damping_resistance / (2.0 * l);
    let natural_sq = 1.0 / (l * c);
    let omega = if natural_sq > delta * delta {
        (natural_sq - delta * delta).sqrt()
    } else {
        natural_sq.sqrt()
    };
    std::f64::consts::TAU / omega
}

fn check_step(spec: &CircuitSpec, design: &BalancingDesign, cfg: &IntegratorConfig) -> Result<()> {
    let limit = oscillation_period(spec, design) / MIN_STEPS_PER_PERIOD;
    if !(cfg.dt > 0.0) || cfg.dt > limit {
        return Err(Error::StepTooLarge { dt: cfg.dt, limit });
    }
    Ok(())
}

/// Linear system `x' = A x + b(t)`, two states.
struct Loop {
    a: [[f64; 2]; 2],
    b: Box<dyn Fn(f64) -> [f64; 2]>,
}

impl Loop {
    fn rhs(&self, t: f64, x: [f64; 2]) -> [f64; 2] {
        let b = (self.b)(t);
        [
            self.a[0][0] * x[0] + self.a[0][1] * x[1] + b[0],
            self.a[1][0] * x[0] + self.a[1][1] * x[1] + b[1],
        ]
    }

    fn rk4(&self, t: f64, x: [f64; 2], h: f64) -> [f64; 2] {
        let add = |x: [f64; 2], k: [f64; 2], s: f64| [x[0] + s * k[0], x[1] + s * k[1]];
        let k1 = self.rhs(t, x);
        let k2 = self.rhs(t + h / 2.0, add(x, k1, h / 2.0));
        let k3 = self.rhs(t + h / 2.0, add(x, k2, h / 2.0));
        let k4 = self.rhs(t + h, add(x, k3, h));
        [
            x[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            x[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ]
    }

    fn trapezoidal(&self, t: f64, x: [f64; 2], h: f64) -> [f64; 2] {
        let a = self.a;
        let half = h / 2.0;
        let b0 = (self.b)(t);
        let b1 = (self.b)(t + h);
        let rhs = [
            x[0] + half * (a[0][0] * x[0] + a[0][1] * x[1] + b0[0] + b1[0]),
            x[1] + half * (a[1][0] * x[0] + a[1][1] * x[1] + b0[1] + b1[1]),
        ];
        // (I - h/2 A) x_next = rhs
        let m = [
            [1.0 - half * a[0][0], -half * a[0][1]],
            [-half * a[1][0], 1.0 - half * a[1][1]],
        ];
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        [
            (rhs[0] * m[1][1] - m[0][1] * rhs[1]) / det,
            (m[0][0] * rhs[1] - m[1][0] * rhs[0]) / det,
        ]
    }

    fn step(&self, method: Method, t: f64, x: [f64; 2], h: f64) -> [f64; 2] {
        match method {
            Method::Rk4 => self.rk4(t, x, h),
            Method::Trapezoidal => self.trapezoidal(t, x, h),
        }
    }
}

/// Integrated charging-cycle waveforms on `[t_dmin, t_dmax]`.
#[derive(Debug, Clone)]
pub struct ChargingTrace {
    pub current: Waveform,
    pub device_voltage: Waveform,
    /// Voltage on the (worst-case) capacitor.
    pub capacitor_voltage: Waveform,
}

/// Integrates the charging loop from `t_dmin` (zero current, zero inductor
/// voltage) to `t_dmax`. Works for any damping.
pub fn integrate_charging(
    spec: &CircuitSpec,
    dev: &DeviceParams,
    design: &BalancingDesign,
    cfg: &IntegratorConfig,
) -> Result<ChargingTrace> {
    check_step(spec, design, cfg)?;
    let l = spec.inductance;
    let r = design.damping_resistance;
    let c = design.effective_capacitance();
    let n = f64::from(spec.device_count);
    let v_s = spec.source_voltage;
    let (t_start, t_fire, t_on) = (dev.delay_min, dev.delay_max, dev.turn_on_time);
    let ramp_end = t_start + t_on;

    // T1 plus its inductor see the source minus what the fast devices still block.
    let drive = move |t: f64| {
        let fast_blocking = if t < ramp_end {
            (n - 1.0) * (v_s / n) * (ramp_end - t) / t_on
        } else {
            0.0
        };
        v_s - fast_blocking
    };
    let system = Loop {
        a: [[-r / l, -1.0 / l], [1.0 / c, 0.0]],
        b: Box::new(move |t| [drive(t) / l, 0.0]),
    };

    let mut times = vec![t_start];
    let mut state = [0.0, drive(t_start)];
    let mut states = vec![state];

    // Break the grid at the drive's corner so every step sees a smooth input.
    let mut breakpoints = vec![t_start];
    if ramp_end < t_fire {
        breakpoints.push(ramp_end);
    }
    breakpoints.push(t_fire);
    for seg in breakpoints.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        if !(b > a) {
            continue;
        }
        let steps = ((b - a) / cfg.dt).ceil().max(1.0) as usize;
        let h = (b - a) / steps as f64;
        for k in 0..steps {
            let t = a + h * k as f64;
            state = system.step(cfg.method, t, state, h);
            let t_next = if k + 1 == steps {
                b
            } else {
                a + h * (k + 1) as f64
            };
            times.push(t_next);
            states.push(state);
        }
    }

    let current: Vec<f64> = states.iter().map(|s| s[0]).collect();
    let cap: Vec<f64> = states.iter().map(|s| s[1]).collect();
    let device: Vec<f64> = states.iter().map(|s| s[1] + r * s[0]).collect();
    Ok(ChargingTrace {
        current: Waveform::new(Channel::ChargeCurrent, times.clone(), current)?,
        device_voltage: Waveform::new(Channel::DeviceVoltage, times.clone(), device)?,
        capacitor_voltage: Waveform::new(Channel::DeviceVoltage, times, cap)?,
    })
}

/// Integrates the discharge current from `t_dmax` with initial value `init`
/// up to `t_end`.
///
/// Output samples are spaced by at most `cfg.dt`; internally each is split
/// so a step never exceeds 1/50 of the `R_d·C_eff` time constant. With
/// `R_d = 0` the equation degenerates to its algebraic limit.
pub fn integrate_discharge(
    spec: &CircuitSpec,
    dev: &DeviceParams,
    design: &BalancingDesign,
    init: f64,
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<Waveform> {
    check_step(spec, design, cfg)?;
    let t0 = dev.delay_max;
    if !(t_end >= t0) {
        return Err(Error::Domain {
            t: t_end,
            start: t0,
            end: f64::INFINITY,
        });
    }
    let c = design.effective_capacitance();
    let r = design.damping_resistance;
    let slope = spec.source_voltage / (f64::from(spec.device_count) * dev.turn_on_time);

    let outputs = if t_end > t0 {
        ((t_end - t0) / cfg.dt).ceil().max(1.0) as usize
    } else {
        0
    };
    let mut times = Vec::with_capacity(outputs + 1);
    let mut values = Vec::with_capacity(outputs + 1);
    times.push(t0);
    values.push(init);
    if outputs == 0 {
        return Waveform::new(Channel::DischargeCurrent, times, values);
    }
    let h_out = (t_end - t0) / outputs as f64;

    if r == 0.0 {
        // i / C_eff = -V_s/(N t_on)
        for k in 1..=outputs {
            times.push(if k == outputs {
                t_end
            } else {
                t0 + h_out * k as f64
            });
            values.push(-slope * c);
        }
        return Waveform::new(Channel::DischargeCurrent, times, values);
    }

    let tau = r * c;
    let sub = (h_out / (tau / DISCHARGE_STEPS_PER_TAU)).ceil().max(1.0);
    if sub * outputs as f64 > MAX_DISCHARGE_STEPS {
        return Err(Error::StepTooLarge {
            dt: h_out / sub,
            limit: tau / DISCHARGE_STEPS_PER_TAU,
        });
    }
    let sub = sub as usize;
    let h = h_out / sub as f64;
    let f = |i: f64| -(i / c + slope) / r;
    let mut i = init;
    for k in 1..=outputs {
        for _ in 0..sub {
            i = match cfg.method {
                Method::Rk4 => {
                    let k1 = f(i);
                    let k2 = f(i + h / 2.0 * k1);
                    let k3 = f(i + h / 2.0 * k2);
                    let k4 = f(i + h * k3);
                    i + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
                }
                Method::Trapezoidal => {
                    let g = h / (2.0 * tau);
                    (i * (1.0 - g) - h * slope / r) / (1.0 + g)
                }
            };
        }
        times.push(if k == outputs {
            t_end
        } else {
            t0 + h_out * k as f64
        });
        values.push(i);
    }
    Waveform::new(Channel::DischargeCurrent, times, values)
}

/// A complete numerical run: charging, then discharge seeded by the
/// integrated current at `t_dmax`.
#[derive(Debug, Clone)]
pub struct OracleRun {
    pub charging: ChargingTrace,
    pub discharge: Waveform,
    /// `t_on1` computed from the integrated `v_AK1(t_dmax)`.
    pub first_device_on_time: f64,
}

impl OracleRun {
    pub fn waveform(&self, channel: Channel) -> Option<&Waveform> {
        match channel {
            Channel::ChargeCurrent => Some(&self.charging.current),
            Channel::DeviceVoltage => Some(&self.charging.device_voltage),
            Channel::DischargeCurrent => Some(&self.discharge),
            Channel::DriveVoltage => None,
        }
    }

    /// Largest charging current found anywhere on the integrated waveform.
    pub fn max_charge_current(&self) -> f64 {
        self.charging
            .current
            .values()
            .iter()
            .copied()
            .fold(f64::MIN, f64::max)
    }

    /// Largest `v_AK1` found anywhere on the integrated waveform.
    pub fn max_device_voltage(&self) -> f64 {
        self.charging
            .device_voltage
            .values()
            .iter()
            .copied()
            .fold(f64::MIN, f64::max)
    }

    /// Discharge current sampled nearest to `t_on1`.
    pub fn discharge_at_turn_on(&self) -> f64 {
        let t = self.discharge.times();
        let idx = t.partition_point(|&x| x < self.first_device_on_time);
        let idx = idx.min(t.len() - 1);
        self.discharge.values()[idx]
    }
}

pub fn run(
    spec: &CircuitSpec,
    dev: &DeviceParams,
    design: &BalancingDesign,
    cfg: &IntegratorConfig,
) -> Result<OracleRun> {
    let charging = integrate_charging(spec, dev, design, cfg)?;
    let v_end = *charging.device_voltage.values().last().expect("non-empty");
    let i_end = *charging.current.values().last().expect("non-empty");
    let t_on1 = v_end * f64::from(spec.device_count) * dev.turn_on_time / spec.source_voltage
        + dev.delay_max;
    let t_end = cfg.t_end.unwrap_or(t_on1 + 0.25 * (t_on1 - dev.delay_max));
    let discharge = integrate_discharge(spec, dev, design, i_end, t_end, cfg)?;
    Ok(OracleRun {
        charging,
        discharge,
        first_device_on_time: t_on1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::*;

    fn design(r_d: f64, c_d: f64) -> BalancingDesign {
        BalancingDesign {
            static_resistance: 2.5e6,
            damping_resistance: r_d,
            capacitance: c_d,
            tolerances: hv_tolerances(),
        }
    }

    #[test]
    fn rejects_coarse_steps() {
        let spec = hv_circuit();
        let d = design(0.0, 40e-9);
        let period = oscillation_period(&spec, &d);
        let cfg = IntegratorConfig::auto(&spec, &d).with_dt(period / 150.0);
        assert!(matches!(
            integrate_charging(&spec, &hv_device(), &d, &cfg),
            Err(Error::StepTooLarge { .. })
        ));
        let cfg = cfg.with_dt(period / 200.0);
        assert!(integrate_charging(&spec, &hv_device(), &d, &cfg).is_ok());
        assert!(integrate_charging(&spec, &hv_device(), &d, &cfg.with_dt(0.0)).is_err());
    }

    #[test]
    fn lossless_loop_conserves_energy_under_constant_drive() {
        // t_on = 0.5 µs, t_dTol = 20 µs: the drive is flat at V_s for most of the window.
        let spec = hv_circuit();
        let dev = hv_device()
            .with_turn_on_time(0.5e-6)
            .with_delay_tolerance(20e-6);
        let d = design(0.0, 40e-9);
        let cfg = IntegratorConfig::auto(&spec, &d);
        let trace = integrate_charging(&spec, &dev, &d, &cfg).unwrap();
        let c = d.effective_capacitance();
        let l = spec.inductance;
        let energy: Vec<(f64, f64)> = trace
            .current
            .samples()
            .zip(trace.capacitor_voltage.values())
            .filter(|((t, _), _)| *t >= 0.5e-6)
            .map(|((t, i), v)| {
                (
                    t,
                    0.5 * l * i * i + 0.5 * c * (v - spec.source_voltage).powi(2),
                )
            })
            .collect();
        let e0 = energy[0].1;
        let period = oscillation_period(&spec, &d);
        let span = energy.last().unwrap().0 - energy[0].0;
        let drift = energy
            .iter()
            .map(|(_, e)| (e - e0).abs())
            .fold(0.0, f64::max)
            / e0;
        assert!(drift / (span / period) < 1e-4, "drift {drift}");
    }

    #[test]
    fn discharge_fixed_point_is_held() {
        let spec = hv_circuit();
        let dev = hv_device();
        for r_d in [0.0, 3.0, 30.0] {
            let d = design(r_d, 40e-9);
            let forced =
                -spec.source_voltage * d.effective_capacitance() / (6.0 * dev.turn_on_time);
            let cfg = IntegratorConfig::auto(&spec, &d);
            for method in [Method::Rk4, Method::Trapezoidal] {
                let w =
                    integrate_discharge(&spec, &dev, &d, forced, 12e-6, &cfg.with_method(method))
                        .unwrap();
                for v in w.values() {
                    assert!(
                        (v - forced).abs() <= 1e-12 * forced.abs(),
                        "{v} vs {forced}"
                    );
                }
            }
        }
    }

    #[test]
    fn discharge_decay_constant_from_log_slope() {
        let spec = hv_circuit();
        let dev = hv_device();
        let d = design(500.0, 1e-9);
        let c = d.effective_capacitance();
        let forced = -spec.source_voltage * c / (6.0 * dev.turn_on_time);
        let cfg = IntegratorConfig::auto(&spec, &d);
        let tau = 500.0 * c;
        let w = integrate_discharge(&spec, &dev, &d, 1.0, dev.delay_max + 3.0 * tau, &cfg).unwrap();
        // least-squares slope of ln(i - forced) against t
        let pts: Vec<(f64, f64)> = w.samples().map(|(t, i)| (t, (i - forced).ln())).collect();
        let n = pts.len() as f64;
        let (sx, sy) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
        let (mx, my) = (sx / n, sy / n);
        let (num, den) = pts.iter().fold((0.0, 0.0), |a, p| {
            (a.0 + (p.0 - mx) * (p.1 - my), a.1 + (p.0 - mx).powi(2))
        });
        let fitted_tau = -den / num;
        assert!(
            (fitted_tau - tau).abs() / tau < 0.01,
            "{fitted_tau} vs {tau}"
        );
    }

    #[test]
    fn overdamped_loop_still_integrates() {
        let spec = hv_circuit();
        let d = design(500.0, 100e-9);
        let cfg = IntegratorConfig::auto(&spec, &d);
        let run = run(&spec, &hv_device(), &d, &cfg).unwrap();
        assert!(run.max_charge_current() > 0.0);
        assert!(run.max_device_voltage() >= spec.static_share());
    }

    #[test]
    fn trapezoidal_agrees_with_rk4() {
        let spec = hv_circuit();
        let dev = hv_device();
        let d = design(3.0, 40e-9);
        let cfg = IntegratorConfig::auto(&spec, &d).with_dt(oscillation_period(&spec, &d) / 4000.0);
        let a = run(&spec, &dev, &d, &cfg).unwrap();
        let b = run(&spec, &dev, &d, &cfg.with_method(Method::Trapezoidal)).unwrap();
        let ia = *a.charging.current.values().last().unwrap();
        let ib = *b.charging.current.values().last().unwrap();
        assert!((ia - ib).abs() / ia < 1e-4, "{ia} {ib}");
    }

    #[test]
    fn zero_delay_spread_gives_single_sample() {
        let spec = hv_circuit();
        let dev = hv_device().with_delay_tolerance(0.0);
        let d = design(3.0, 40e-9);
        let run = run(&spec, &dev, &d, &IntegratorConfig::auto(&spec, &d)).unwrap();
        assert_eq!(run.charging.current.len(), 1);
        assert_eq!(run.charging.current.values()[0], 0.0);
        assert_eq!(run.charging.device_voltage.values()[0], 2000.0);
        assert!((run.first_device_on_time - dev.turn_on_time).abs() < 1e-18);
    }
}
