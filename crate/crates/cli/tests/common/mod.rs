#![allow(dead_code)]

use std::path::{Path, PathBuf};

use serde_json::{json, Value};

/// 12 kV stack circuit, devices and tolerances with no optional blocks.
pub fn hv_config() -> Value {
    json!({
        "circuit": {"V_s": 12000.0, "N": 6, "L": 250e-6},
        "device": {
            "t_dmax": 3e-6, "t_dmin": 0.0, "t_on": 5e-6,
            "I_Dmax": 350e-6, "I_Dmin": 100e-6,
            "V_Ddc": 3300.0, "I_Trms": 550.0, "I_TSM": 4500.0,
            "Q_max": 2300e-6, "Q_min": 1000e-6
        },
        "tolerances": {"a_c": 0.1, "a_R": 0.05}
    })
}

pub fn with(mut base: Value, key: &str, block: Value) -> Value {
    base[key] = block;
    base
}

pub fn hv_constraints() -> Value {
    json!({
        "max_overvoltage_pct": 50.0,
        "max_charge_current": 100.0,
        "max_discharge_current": 100.0,
        "max_steady_voltage": 2700.0
    })
}

/// Bench stack at 480 V with the fitted 47 nF / 3 Ω / 2.2 MΩ network.
pub fn bench(spread: f64) -> Value {
    let mut cfg = hv_config();
    cfg["circuit"]["V_s"] = json!(480.0);
    cfg["device"]["t_on"] = json!(3e-6);
    cfg["device"]["t_dmax"] = json!(spread);
    with(
        cfg,
        "design",
        json!({"R_s": 2.2e6, "R_d": 3.0, "C_d": 47e-9}),
    )
}

pub fn write_config(dir: &Path, name: &str, cfg: &Value) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path
}

pub fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}
