//! Commands behind the `crowbar` binary.
//!
//! Every command reads one JSON config, writes its outputs under `out_dir`
//! and reports diagnostics on stderr. Exit codes: 0 success, 2 invalid
//! input, 3 infeasible design, 4 verification failure.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crowbar_core::oracle::{self, IntegratorConfig, OracleRun};
use crowbar_core::selector::{recovery_comparison, solve_min_cd};
use crowbar_core::sweep::{export_csv, run_sweep, SweepManifest};
use crowbar_core::types::{validate, validate_context};
use crowbar_core::units::eng;
use crowbar_core::verify::{compare_run, Comparison, TransientModel, DEFAULT_THRESHOLD};
use crowbar_core::{select_network, BalancingDesign, Channel, ClosedForm, Error, Result, Snap};

pub use config::ConfigFile;

/// Samples per analytic waveform CSV.
pub const WAVEFORM_POINTS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Ok = 0,
    Invalid = 2,
    Infeasible = 3,
    VerificationFailed = 4,
}

impl Exit {
    pub fn code(self) -> u8 {
        self as u8
    }

    fn from_error(e: &Error) -> Exit {
        match e {
            Error::Infeasible { .. } => Exit::Infeasible,
            _ => Exit::Invalid,
        }
    }
}

/// Flag overrides applied on top of the config.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Options {
    pub snap: Option<Snap>,
    /// Oracle step (s).
    pub dt: Option<f64>,
}

fn report_error(cmd: &str, e: &Error) -> Exit {
    eprintln!("{cmd}: {e}");
    Exit::from_error(e)
}

fn finish(cmd: &str, r: Result<Exit>) -> Exit {
    r.unwrap_or_else(|e| report_error(cmd, &e))
}

fn prepare(config: &Path, out_dir: &Path) -> Result<ConfigFile> {
    let cfg = ConfigFile::load(config)?;
    fs::create_dir_all(out_dir)?;
    Ok(cfg)
}

fn write_text(path: PathBuf, text: &str) -> Result<()> {
    fs::write(path, text)?;
    Ok(())
}

fn write_json<T: Serialize>(path: PathBuf, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

fn write_waveforms(out_dir: &Path, prefix: &str, waves: &[&crowbar_core::Waveform]) -> Result<()> {
    for w in waves {
        let path = out_dir.join(format!("{prefix}_{}.csv", w.channel.tag()));
        w.write_csv(fs::File::create(path)?)?;
    }
    Ok(())
}

fn design_summary(d: &BalancingDesign) -> String {
    format!(
        "R_s = {}, R_d = {}, C_d = {} (a_c = {}, a_R = {})",
        eng(d.static_resistance, "Ω"),
        eng(d.damping_resistance, "Ω"),
        eng(d.capacitance, "F"),
        d.tolerances.capacitor,
        d.tolerances.resistor
    )
}

/// Closed-form stresses plus the four analytic waveforms.
///
/// Writes `report.txt`, `report.json` and `waveform_<channel>.csv`.
pub fn cmd_analyze(config: &Path, out_dir: &Path) -> Exit {
    finish("analyze", analyze(config, out_dir))
}

fn analyze(config: &Path, out_dir: &Path) -> Result<Exit> {
    let cfg = ConfigFile::load(config)?;
    let design = cfg.design()?;
    validate(&cfg.circuit, &cfg.device, &design).into_result()?;
    let model = ClosedForm::new(&cfg.circuit, &cfg.device, &design)?;
    let report = model.report();
    fs::create_dir_all(out_dir)?;
    let text = format!("{}\n\n{report}\n", design_summary(&design));
    write_text(out_dir.join("report.txt"), &text)?;
    write_json(out_dir.join("report.json"), &report)?;
    let waves = Channel::ALL
        .iter()
        .map(|&ch| model.waveform(ch, WAVEFORM_POINTS))
        .collect::<Result<Vec<_>>>()?;
    write_waveforms(out_dir, "waveform", &waves.iter().collect::<Vec<_>>())?;
    eprint!("{text}");
    Ok(Exit::Ok)
}

/// Evaluates the configured grid; writes `sweep.csv` and `manifest.json`.
pub fn cmd_sweep(config: &Path, out_dir: &Path) -> Exit {
    finish("sweep", sweep(config, out_dir))
}

fn sweep(config: &Path, out_dir: &Path) -> Result<Exit> {
    let cfg = ConfigFile::load(config)?;
    validate_context(&cfg.circuit, &cfg.device, &cfg.tolerances).into_result()?;
    let grid = cfg.sweep_grid()?;
    let result = run_sweep(&grid)?;
    fs::create_dir_all(out_dir)?;
    export_csv(&result, &out_dir.join("sweep.csv"))?;
    SweepManifest::new(&grid, &result).write(&out_dir.join("manifest.json"))?;
    eprintln!(
        "sweep: {} points, {} skipped (not underdamped)",
        result.rows.len(),
        result.skipped_count()
    );
    Ok(Exit::Ok)
}

/// Runs component selection; writes `design.txt` and `design.json`, also
/// for infeasible outcomes.
pub fn cmd_design(config: &Path, out_dir: &Path, opts: &Options) -> Exit {
    finish("design", design(config, out_dir, opts))
}

fn design(config: &Path, out_dir: &Path, opts: &Options) -> Result<Exit> {
    let cfg = ConfigFile::load(config)?;
    let mut constraints = cfg.constraints()?;
    if let Some(snap) = opts.snap {
        constraints.snap = snap;
    }
    let outcome = select_network(&cfg.circuit, &cfg.device, &cfg.tolerances, &constraints);
    let (report, exit) = match outcome {
        Ok(report) => (report, Exit::Ok),
        Err(Error::Infeasible { binding, report }) => {
            eprintln!("design: infeasible, binding constraint {binding}");
            (*report, Exit::Infeasible)
        }
        Err(e) => return Err(e),
    };
    fs::create_dir_all(out_dir)?;
    let text = report.to_string();
    write_text(out_dir.join("design.txt"), &text)?;
    write_json(out_dir.join("design.json"), &report)?;
    eprintln!("design: {}", design_summary(&report.chosen));
    Ok(exit)
}

/// Sizes `C_d` from recovery charge and sets it against the proposed
/// capacitance: the config `design` if present, otherwise the minimum for
/// the overvoltage target at `R_d = 0`. Writes `compare_rr.txt` and
/// `compare_rr.json`.
pub fn cmd_compare_rr(config: &Path, out_dir: &Path) -> Exit {
    finish("compare-rr", compare_rr(config, out_dir))
}

fn compare_rr(config: &Path, out_dir: &Path) -> Result<Exit> {
    let cfg = ConfigFile::load(config)?;
    let constraints = cfg.constraints()?;
    constraints.validate(&cfg.circuit)?;
    let (spec, dev, tol) = (&cfg.circuit, &cfg.device, &cfg.tolerances);
    let proposed = match cfg.design {
        Some(_) => cfg.design()?.capacitance,
        None => solve_min_cd(spec, dev, tol, constraints.max_overvoltage_pct, 0.0)?,
    };
    let v_d1 = constraints.transient_voltage_limit(spec);
    let rr = recovery_comparison(spec, dev, tol, v_d1, proposed)?;
    fs::create_dir_all(out_dir)?;
    let text = format!(
        "proposed C_d       {}\nC_d_rr (V_d1 = {}) {}\nratio              {:.1}\n\nstresses at C_d_rr, R_d = 0\n{}\n",
        eng(proposed, "F"),
        eng(v_d1, "V"),
        eng(rr.capacitance, "F"),
        rr.ratio,
        rr.stresses_rr
    );
    write_text(out_dir.join("compare_rr.txt"), &text)?;
    write_json(out_dir.join("compare_rr.json"), &rr)?;
    eprint!("{text}");
    Ok(Exit::Ok)
}

/// Integrates the circuit numerically and compares the closed forms with it.
///
/// Writes `oracle_<channel>.csv` and, for underdamped loops, `verify.json`.
/// An overdamped loop has no closed form: the comparison is skipped and the
/// command still succeeds.
pub fn cmd_verify(config: &Path, out_dir: &Path, opts: &Options) -> Exit {
    finish(
        "verify",
        verify_with(config, out_dir, opts, |m| Box::new(m)),
    )
}

/// [`cmd_verify`] with the closed-form model wrapped by `wrap` before the
/// comparison.
pub fn cmd_verify_with<F>(config: &Path, out_dir: &Path, opts: &Options, wrap: F) -> Exit
where
    F: FnOnce(ClosedForm) -> Box<dyn TransientModel>,
{
    finish("verify", verify_with(config, out_dir, opts, wrap))
}

fn verify_with<F>(config: &Path, out_dir: &Path, opts: &Options, wrap: F) -> Result<Exit>
where
    F: FnOnce(ClosedForm) -> Box<dyn TransientModel>,
{
    let cfg = prepare(config, out_dir)?;
    let design = cfg.design()?;
    validate(&cfg.circuit, &cfg.device, &design).into_result()?;
    let (spec, dev) = (&cfg.circuit, &cfg.device);
    let mut icfg = IntegratorConfig::auto(spec, &design);
    if let Some(dt) = opts.dt {
        icfg = icfg.with_dt(dt);
    }
    let model = match ClosedForm::new(spec, dev, &design) {
        Ok(m) => Some(m),
        Err(e @ Error::NotUnderdamped { .. }) => {
            eprintln!("verify: {e}; closed forms do not apply, analytic check skipped");
            None
        }
        Err(e) => return Err(e),
    };
    let run = oracle::run(spec, dev, &design, &icfg)?;
    write_oracle(out_dir, &run)?;
    let Some(model) = model else {
        return Ok(Exit::Ok);
    };
    let cmp = compare_run(wrap(model).as_ref(), &run, DEFAULT_THRESHOLD)?;
    write_json(out_dir.join("verify.json"), &cmp)?;
    eprint!("{}", render_comparison(&cmp, &icfg));
    Ok(if cmp.passed() {
        Exit::Ok
    } else {
        Exit::VerificationFailed
    })
}

fn write_oracle(out_dir: &Path, run: &OracleRun) -> Result<()> {
    write_waveforms(
        out_dir,
        "oracle",
        &[
            &run.charging.current,
            &run.charging.device_voltage,
            &run.discharge,
        ],
    )
}

fn render_comparison(cmp: &Comparison, icfg: &IntegratorConfig) -> String {
    let mut s = format!(
        "oracle {:?}, dt = {}; threshold {:e}\n",
        icfg.method,
        eng(icfg.dt, "s"),
        cmp.threshold
    );
    for c in &cmp.channels {
        let verdict = if c.sup_rel_error < cmp.threshold {
            "ok"
        } else {
            "FAIL"
        };
        s += &format!(
            "{:<6} sup rel error {:.3e} over {} samples  {verdict}\n",
            c.channel.tag(),
            c.sup_rel_error,
            c.samples
        );
    }
    s
}
