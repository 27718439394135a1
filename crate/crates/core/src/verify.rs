//! Cross-checks a transient model against the numerical oracle.

use serde::{Deserialize, Serialize};

use crate::analytic::ClosedForm;
use crate::error::Result;
use crate::oracle::{self, IntegratorConfig, OracleRun};
use crate::types::{BalancingDesign, Channel, CircuitSpec, DeviceParams};

/// Pass threshold on per-channel sup-norm relative error.
pub const DEFAULT_THRESHOLD: f64 = 1e-3;

/// Anything that can be sampled like the closed-form model.
pub trait TransientModel {
    fn sample(&self, channel: Channel, t: f64) -> Result<f64>;
}

impl TransientModel for ClosedForm {
    fn sample(&self, channel: Channel, t: f64) -> Result<f64> {
        ClosedForm::sample(self, channel, t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelError {
    pub channel: Channel,
    /// `max |model - oracle| / max |model|` over the oracle samples.
    pub sup_rel_error: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub channels: Vec<ChannelError>,
    pub threshold: f64,
}

impl Comparison {
    pub fn passed(&self) -> bool {
        self.channels
            .iter()
            .all(|c| c.sup_rel_error < self.threshold)
    }

    pub fn worst(&self) -> f64 {
        self.channels
            .iter()
            .map(|c| c.sup_rel_error)
            .fold(0.0, f64::max)
    }

    pub fn error(&self, channel: Channel) -> Option<f64> {
        self.channels
            .iter()
            .find(|c| c.channel == channel)
            .map(|c| c.sup_rel_error)
    }
}

pub const COMPARED: [Channel; 3] = [
    Channel::ChargeCurrent,
    Channel::DeviceVoltage,
    Channel::DischargeCurrent,
];

/// Sup-norm relative error of `model` on the oracle's sample grid.
///
/// The scale is the model's own peak magnitude on that grid; an all-zero
/// model falls back to absolute error.
pub fn compare_run<M: TransientModel + ?Sized>(
    model: &M,
    run: &OracleRun,
    threshold: f64,
) -> Result<Comparison> {
    let mut channels = Vec::with_capacity(COMPARED.len());
    for channel in COMPARED {
        let wave = run
            .waveform(channel)
            .expect("compared channels have oracle waveforms");
        let mut scale = 0.0_f64;
        let mut worst = 0.0_f64;
        for (t, y) in wave.samples() {
            let m = model.sample(channel, t)?;
            scale = scale.max(m.abs());
            worst = worst.max((m - y).abs());
        }
        let sup_rel_error = if scale > 0.0 { worst / scale } else { worst };
        channels.push(ChannelError {
            channel,
            sup_rel_error,
            samples: wave.len(),
        });
    }
    Ok(Comparison {
        channels,
        threshold,
    })
}

/// Integrates the oracle and compares the closed forms against it.
pub fn compare(
    spec: &CircuitSpec,
    dev: &DeviceParams,
    design: &BalancingDesign,
    cfg: &IntegratorConfig,
) -> Result<(Comparison, OracleRun)> {
    let model = ClosedForm::new(spec, dev, design)?;
    let run = oracle::run(spec, dev, design, cfg)?;
    let cmp = compare_run(&model, &run, DEFAULT_THRESHOLD)?;
    Ok((cmp, run))
}
