//! Reference parameter sets: a 12 kV, six-device crowbar built from
//! 6.5 kV-class phase-control thyristors, and its 480 V low-voltage bench setup.

use crate::types::{BalancingDesign, CircuitSpec, DeviceParams, ToleranceSpec};

/// 12 kV source, six devices, 250 µH di/dt limiter.
pub fn hv_circuit() -> CircuitSpec {
    CircuitSpec {
        source_voltage: 12e3,
        device_count: 6,
        inductance: 250e-6,
    }
}

/// Datasheet values with the worst-case 5 µs linearized fall time.
pub fn hv_device() -> DeviceParams {
    DeviceParams {
        delay_max: 3e-6,
        delay_min: 0.0,
        turn_on_time: 5e-6,
        leakage_max: 350e-6,
        leakage_min: 100e-6,
        rated_dc_voltage: 3.3e3,
        rms_current: 550.0,
        surge_current: 4500.0,
        recovery_charge_max: 2300e-6,
        recovery_charge_min: 1000e-6,
    }
}

pub fn hv_tolerances() -> ToleranceSpec {
    ToleranceSpec {
        capacitor: 0.1,
        resistor: 0.05,
    }
}

/// The same stack run at 480 V.
pub fn bench_circuit() -> CircuitSpec {
    CircuitSpec {
        source_voltage: 480.0,
        ..hv_circuit()
    }
}

/// Bench devices: measured 3 µs fall time, delay spread set by the caller.
pub fn bench_device(delay_spread: f64) -> DeviceParams {
    hv_device()
        .with_turn_on_time(3e-6)
        .with_delay_tolerance(delay_spread)
}

/// Components fitted on the bench: 47 nF, 3 Ω, 2.2 MΩ.
pub fn bench_design(tolerances: ToleranceSpec) -> BalancingDesign {
    BalancingDesign {
        static_resistance: 2.2e6,
        damping_resistance: 3.0,
        capacitance: 47e-9,
        tolerances,
    }
}
