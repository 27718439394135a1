//! Component selection for the balancing network.
//!
//! Procedure:
//! 1. Solve the smallest `C_d` meeting the overvoltage target with `R_d = 0`.
//! 2. If both peak currents are within limits, add the minimum damping
//!    resistance and re-solve `C_d` with it, since the damping drop raises
//!    the peak device voltage.
//! 3. Otherwise raise `R_d` over a fixed grid, re-solving `C_d` each time.
//! 4. Past the `R_d` cap, reduce `C_d` in 10% steps and report the
//!    overvoltage that would have to be accepted. The design is then
//!    infeasible; the relaxation is never applied silently.
//! 5. Size `R_s`, snap to a preferred series, re-verify, and attach the
//!    reverse-recovery comparison.
//!
//! Every decision is appended to an adjustment log that [`replay`] can
//! re-execute step by step.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::analytic::{reverse_recovery_cd, static_resistor, transient_report, ClosedForm};
use crate::error::{Error, Result};
use crate::eseries::Snap;
use crate::types::{
    validate_context, BalancingDesign, CircuitSpec, DeviceParams, ToleranceSpec, TransientReport,
};
use crate::units::eng;

/// Damping values tried when the currents are too high at `R_d = 0`.
pub const DAMPING_GRID: [f64; 8] = [0.0, 1.0, 2.0, 5.0, 10.0, 15.0, 20.0, 30.0];

/// Largest damping resistance the selector will use.
pub const DAMPING_CAP: f64 = 30.0;

/// Relative bracket width at which the `C_d` bisection stops.
pub const BISECTION_WIDTH: f64 = 0.005;

/// Capacitance reduction per back-off step.
pub const BACKOFF_FACTOR: f64 = 0.9;
pub const MAX_BACKOFF_STEPS: usize = 40;

pub const DEFAULT_MIN_DAMPING: f64 = 3.0;

/// Largest capacitance considered when `R_d = 0` (F).
const CD_CEILING: f64 = 1.0;

fn default_min_damping() -> f64 {
    DEFAULT_MIN_DAMPING
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignConstraints {
    /// Allowed transient overvoltage above `V_s/N` (%).
    pub max_overvoltage_pct: f64,
    /// Peak charging current limit (A).
    pub max_charge_current: f64,
    /// Peak discharge current magnitude limit (A).
    pub max_discharge_current: f64,
    /// Steady-state blocking voltage limit `V_d1` used to size `R_s` (V).
    pub max_steady_voltage: f64,
    #[serde(default)]
    pub snap: Snap,
    /// Damping resistance kept even when the currents allow none (Ω).
    #[serde(default = "default_min_damping")]
    pub min_damping: f64,
}

impl DesignConstraints {
    pub fn validate(&self, spec: &CircuitSpec) -> Result<()> {
        let mut bad = Vec::new();
        if !(self.max_overvoltage_pct > 0.0) {
            bad.push("max_overvoltage_pct > 0");
        }
        if !(self.max_charge_current > 0.0) {
            bad.push("max_charge_current > 0");
        }
        if !(self.max_discharge_current > 0.0) {
            bad.push("max_discharge_current > 0");
        }
        if !(self.max_steady_voltage > spec.static_share()) {
            bad.push("max_steady_voltage > V_s/N");
        }
        if !(self.min_damping >= 0.0 && self.min_damping.is_finite()) {
            bad.push("min_damping ≥ 0");
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Invalid(format!(
                "constraints violate {}",
                bad.join(", ")
            )))
        }
    }

    /// Peak device voltage allowed by the overvoltage target.
    pub fn transient_voltage_limit(&self, spec: &CircuitSpec) -> f64 {
        spec.static_share() * (1.0 + self.max_overvoltage_pct / 100.0)
    }

    fn currents_ok(&self, r: &TransientReport) -> bool {
        r.peak_charge_current <= self.max_charge_current
            && r.peak_discharge_current <= self.max_discharge_current
    }

    /// First violated constraint, if any.
    pub fn violation(&self, r: &TransientReport) -> Option<Constraint> {
        if r.overvoltage_pct > self.max_overvoltage_pct {
            Some(Constraint::Overvoltage)
        } else if r.peak_charge_current > self.max_charge_current {
            Some(Constraint::ChargeCurrent)
        } else if r.peak_discharge_current > self.max_discharge_current {
            Some(Constraint::DischargeCurrent)
        } else {
            None
        }
    }

    fn current_violation(&self, r: &TransientReport) -> Constraint {
        if r.peak_discharge_current > self.max_discharge_current {
            Constraint::DischargeCurrent
        } else {
            Constraint::ChargeCurrent
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Constraint {
    #[serde(rename = "max_overvoltage_pct")]
    Overvoltage,
    #[serde(rename = "max_charge_current")]
    ChargeCurrent,
    #[serde(rename = "max_discharge_current")]
    DischargeCurrent,
    #[serde(rename = "max_steady_voltage")]
    SteadyVoltage,
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Constraint::Overvoltage => "max_overvoltage_pct",
            Constraint::ChargeCurrent => "max_charge_current",
            Constraint::DischargeCurrent => "max_discharge_current",
            Constraint::SteadyVoltage => "max_steady_voltage",
        })
    }
}

/// Bisection result with the full bracket history.
#[derive(Debug, Clone, PartialEq)]
pub struct MinCdSolution {
    pub capacitance: f64,
    /// `(infeasible lower, feasible upper)` after each step, starting with the initial bracket.
    pub brackets: Vec<(f64, f64)>,
}

fn overvoltage_at(
    spec: &CircuitSpec,
    dev: &DeviceParams,
    tol: &ToleranceSpec,
    r_d: f64,
    c_d: f64,
) -> Result<f64> {
    let design = BalancingDesign {
        static_resistance: f64::INFINITY,
        damping_resistance: r_d,
        capacitance: c_d,
        tolerances: *tol,
    };
    Ok(ClosedForm::new(spec, dev, &design)?
        .report()
        .overvoltage_pct)
}

/// Smallest `C_d` whose overvoltage is within `target_pct` at damping `r_d`.
///
/// Bisects on `log C_d`. The upper end is the largest underdamped capacitance
/// (capped at 1 F); the lower end is where the charging loop completes half
/// an oscillation within `t_dTol`, below which the overvoltage is no longer
/// monotone in `C_d`.
pub fn solve_min_cd_traced(
    spec: &CircuitSpec,
    dev: &DeviceParams,
    tol: &ToleranceSpec,
    target_pct: f64,
    r_d: f64,
) -> Result<MinCdSolution> {
    validate_context(spec, dev, tol).into_result()?;
    if !(r_d >= 0.0 && r_d.is_finite()) {
        return Err(Error::Invalid(format!("R_d = {r_d} must be ≥ 0")));
    }
    let spread = dev.delay_tolerance();
    if spread == 0.0 {
        return Err(Error::Invalid(
            "t_dTol = 0: no transient, any C_d meets the target".into(),
        ));
    }
    let derate = 1.0 - tol.capacitor;
    let l = spec.inductance;
    let mut hi = CD_CEILING;
    if r_d > 0.0 {
        // strictly below critical damping, C_eff < 4L / R_d²
        hi = hi.min(4.0 * l / (r_d * r_d) / derate * (1.0 - 1e-9));
    }
    let best = overvoltage_at(spec, dev, tol, r_d, hi)?;
    if best > target_pct {
        return Err(Error::TargetUnreachable {
            target_pct,
            best_pct: best,
        });
    }
    let half_cycle = spread * spread / (std::f64::consts::PI.powi(2) * l) / derate;
    let mut lo = half_cycle.min(hi);
    if overvoltage_at(spec, dev, tol, r_d, lo)? <= target_pct {
        return Ok(MinCdSolution {
            capacitance: lo,
            brackets: vec![(lo, lo)],
        });
    }
    let mut brackets = vec![(lo, hi)];
    while hi / lo > 1.0 + BISECTION_WIDTH {
        let mid = (lo * hi).sqrt();
        if overvoltage_at(spec, dev, tol, r_d, mid)? <= target_pct {
            hi = mid;
        } else {
            lo = mid;
        }
        brackets.push((lo, hi));
    }
    Ok(MinCdSolution {
        capacitance: hi,
        brackets,
    })
}

pub fn solve_min_cd(
    spec: &CircuitSpec,
    dev: &DeviceParams,
    tol: &ToleranceSpec,
    target_pct: f64,
    r_d: f64,
) -> Result<f64> {
    Ok(solve_min_cd_traced(spec, dev, tol, target_pct, r_d)?.capacitance)
}

/// Conventional turn-off sizing set against the chosen capacitance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryComparison {
    /// Capacitance sized from the recovery-charge spread (F).
    #[serde(rename = "C_d_rr")]
    pub capacitance: f64,
    /// Turn-on stresses with that capacitance and no damping.
    pub stresses_rr: TransientReport,
    /// `C_d_rr / C_d`.
    pub ratio: f64,
}

/// Sizes `C_d` from recovery charge at `v_d1` and evaluates its turn-on
/// stresses with `R_d = 0`.
pub fn recovery_comparison(
    spec: &CircuitSpec,
    dev: &DeviceParams,
    tol: &ToleranceSpec,
    v_d1: f64,
    proposed_capacitance: f64,
) -> Result<RecoveryComparison> {
    let c_rr = reverse_recovery_cd(spec, dev, tol, v_d1)?;
    let design = BalancingDesign {
        static_resistance: f64::INFINITY,
        damping_resistance: 0.0,
        capacitance: c_rr,
        tolerances: *tol,
    };
    Ok(RecoveryComparison {
        capacitance: c_rr,
        stresses_rr: transient_report(spec, dev, &design)?,
        ratio: c_rr / proposed_capacitance,
    })
}

/// One logged decision of the selection procedure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum Adjustment {
    SolveMinCd {
        #[serde(rename = "R_d")]
        damping_resistance: f64,
        target_pct: f64,
        #[serde(rename = "C_d")]
        capacitance: f64,
    },
    TargetUnreachable {
        #[serde(rename = "R_d")]
        damping_resistance: f64,
        best_pct: f64,
    },
    CheckStresses {
        #[serde(rename = "R_d")]
        damping_resistance: f64,
        #[serde(rename = "C_d")]
        capacitance: f64,
        #[serde(rename = "V_d_ov")]
        overvoltage_pct: f64,
        #[serde(rename = "I_ch_max")]
        charge_current: f64,
        #[serde(rename = "I_dis_max")]
        discharge_current: f64,
        within_limits: bool,
    },
    ApplyMinDamping {
        #[serde(rename = "R_d")]
        damping_resistance: f64,
    },
    RaiseDamping {
        #[serde(rename = "R_d")]
        damping_resistance: f64,
    },
    DampingCapReached {
        cap: f64,
        binding: Constraint,
    },
    /// Reduced `C_d` at minimum damping; the overvoltage shown is what would
    /// have to be accepted. Never adopted as a feasible design.
    BackOffCd {
        #[serde(rename = "C_d")]
        capacitance: f64,
        relaxed_overvoltage_pct: f64,
    },
    Accept {
        #[serde(rename = "R_d")]
        damping_resistance: f64,
        #[serde(rename = "C_d")]
        capacitance: f64,
    },
    StaticResistor {
        #[serde(rename = "V_d1")]
        v_d1: f64,
        #[serde(rename = "R_s")]
        static_resistance: f64,
    },
    SnapCapacitance {
        series: Snap,
        from: f64,
        to: f64,
    },
    SnapStaticResistance {
        series: Snap,
        from: f64,
        to: f64,
    },
    RecoveryComparison {
        #[serde(rename = "V_d1")]
        v_d1: f64,
        #[serde(rename = "C_d_rr")]
        capacitance: f64,
        ratio: f64,
    },
    Infeasible {
        binding: Constraint,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignReport {
    pub chosen: BalancingDesign,
    pub stresses: TransientReport,
    pub rr_comparison: Option<RecoveryComparison>,
    pub feasible: bool,
    pub binding: Option<Constraint>,
    pub adjustments: Vec<Adjustment>,
}

impl fmt::Display for DesignReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = match self.binding {
            None => "feasible".to_owned(),
            Some(b) => format!("INFEASIBLE (binding: {b})"),
        };
        writeln!(f, "design            {status}")?;
        writeln!(
            f,
            "R_s               {}",
            eng(self.chosen.static_resistance, "Ω")
        )?;
        writeln!(
            f,
            "R_d               {}",
            eng(self.chosen.damping_resistance, "Ω")
        )?;
        writeln!(f, "C_d               {}", eng(self.chosen.capacitance, "F"))?;
        writeln!(f, "\nstresses")?;
        writeln!(f, "{}", self.stresses)?;
        if let Some(rr) = &self.rr_comparison {
            writeln!(f, "\nrecovery-charge sizing")?;
            writeln!(f, "C_d_rr            {}", eng(rr.capacitance, "F"))?;
            writeln!(f, "C_d_rr / C_d      {:.1}", rr.ratio)?;
            writeln!(f, "{}", rr.stresses_rr)?;
        }
        writeln!(f, "\nadjustments")?;
        for (i, adj) in self.adjustments.iter().enumerate() {
            writeln!(f, "{:>3}  {}", i, adj)?;
        }
        Ok(())
    }
}

impl fmt::Display for Adjustment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Adjustment::SolveMinCd {
                damping_resistance,
                target_pct,
                capacitance,
            } => write!(
                f,
                "min C_d for {target_pct}% at R_d = {}: {}",
                eng(damping_resistance, "Ω"),
                eng(capacitance, "F")
            ),
            Adjustment::TargetUnreachable {
                damping_resistance,
                best_pct,
            } => write!(
                f,
                "target unreachable at R_d = {} (best {best_pct:.2}%)",
                eng(damping_resistance, "Ω")
            ),
            Adjustment::CheckStresses {
                damping_resistance,
                capacitance,
                overvoltage_pct,
                charge_current,
                discharge_current,
                within_limits,
            } => write!(
                f,
                "check R_d = {}, C_d = {}: V_d_ov {overvoltage_pct:.2}%, I_ch {}, |I_dis| {} -> {}",
                eng(damping_resistance, "Ω"),
                eng(capacitance, "F"),
                eng(charge_current, "A"),
                eng(discharge_current, "A"),
                if within_limits { "ok" } else { "over limit" }
            ),
            Adjustment::ApplyMinDamping { damping_resistance } => {
                write!(
                    f,
                    "apply minimum damping R_d = {}",
                    eng(damping_resistance, "Ω")
                )
            }
            Adjustment::RaiseDamping { damping_resistance } => {
                write!(f, "raise R_d to {}", eng(damping_resistance, "Ω"))
            }
            Adjustment::DampingCapReached { cap, binding } => {
                write!(
                    f,
                    "R_d cap {} reached, {binding} still violated",
                    eng(cap, "Ω")
                )
            }
            Adjustment::BackOffCd {
                capacitance,
                relaxed_overvoltage_pct,
            } => write!(
                f,
                "back off C_d to {}: would need V_d_ov {relaxed_overvoltage_pct:.2}%",
                eng(capacitance, "F")
            ),
            Adjustment::Accept {
                damping_resistance,
                capacitance,
            } => write!(
                f,
                "accept R_d = {}, C_d = {}",
                eng(damping_resistance, "Ω"),
                eng(capacitance, "F")
            ),
            Adjustment::StaticResistor {
                v_d1,
                static_resistance,
            } => write!(
                f,
                "R_s for V_d1 = {}: {}",
                eng(v_d1, "V"),
                eng(static_resistance, "Ω")
            ),
            Adjustment::SnapCapacitance { series, from, to } => {
                write!(
                    f,
                    "snap C_d up to {series}: {} -> {}",
                    eng(from, "F"),
                    eng(to, "F")
                )
            }
            Adjustment::SnapStaticResistance { series, from, to } => {
                write!(
                    f,
                    "snap R_s down to {series}: {} -> {}",
                    eng(from, "Ω"),
                    eng(to, "Ω")
                )
            }
            Adjustment::RecoveryComparison {
                v_d1,
                capacitance,
                ratio,
            } => write!(
                f,
                "recovery-charge C_d at V_d1 = {}: {} ({ratio:.1}x)",
                eng(v_d1, "V"),
                eng(capacitance, "F")
            ),
            Adjustment::Infeasible { binding } => write!(f, "infeasible: {binding}"),
        }
    }
}

struct Selection<'a> {
    spec: &'a CircuitSpec,
    dev: &'a DeviceParams,
    tol: &'a ToleranceSpec,
    constraints: &'a DesignConstraints,
    log: Vec<Adjustment>,
}

impl Selection<'_> {
    fn design(&self, r_d: f64, c_d: f64, r_s: f64) -> BalancingDesign {
        BalancingDesign {
            static_resistance: r_s,
            damping_resistance: r_d,
            capacitance: c_d,
            tolerances: *self.tol,
        }
    }

    /// Solves `C_d` at `r_d`, logging the outcome. `None` when the target is unreachable.
    fn solve(&mut self, r_d: f64) -> Result<Option<f64>> {
        let target = self.constraints.max_overvoltage_pct;
        match solve_min_cd(self.spec, self.dev, self.tol, target, r_d) {
            Ok(c) => {
                self.log.push(Adjustment::SolveMinCd {
                    damping_resistance: r_d,
                    target_pct: target,
                    capacitance: c,
                });
                Ok(Some(c))
            }
            Err(Error::TargetUnreachable { best_pct, .. }) => {
                self.log.push(Adjustment::TargetUnreachable {
                    damping_resistance: r_d,
                    best_pct,
                });
                Ok(None)
            }
            Err(e) => Err(e),
        }
    }

    fn check(&mut self, r_d: f64, c_d: f64) -> Result<TransientReport> {
        let report = transient_report(self.spec, self.dev, &self.design(r_d, c_d, f64::INFINITY))?;
        self.log.push(Adjustment::CheckStresses {
            damping_resistance: r_d,
            capacitance: c_d,
            overvoltage_pct: report.overvoltage_pct,
            charge_current: report.peak_charge_current,
            discharge_current: report.peak_discharge_current,
            within_limits: self.constraints.violation(&report).is_none(),
        });
        Ok(report)
    }

    /// Steps 1-3: returns `(R_d, C_d)` or the binding current constraint.
    fn size_dynamic(&mut self) -> Result<std::result::Result<(f64, f64), (Constraint, f64)>> {
        let min_damping = self.constraints.min_damping;
        let Some(c0) = self.solve(0.0)? else {
            return Ok(Err((Constraint::Overvoltage, f64::NAN)));
        };
        let r0 = self.check(0.0, c0)?;
        let mut binding = None;
        if self.constraints.currents_ok(&r0) {
            if min_damping == 0.0 {
                return Ok(Ok((0.0, c0)));
            }
            self.log.push(Adjustment::ApplyMinDamping {
                damping_resistance: min_damping,
            });
            if let Some(c) = self.solve(min_damping)? {
                let r = self.check(min_damping, c)?;
                if self.constraints.currents_ok(&r) {
                    return Ok(Ok((min_damping, c)));
                }
                binding = Some(self.constraints.current_violation(&r));
            }
        } else {
            binding = Some(self.constraints.current_violation(&r0));
        }
        let floor = min_damping;
        for &r_d in DAMPING_GRID
            .iter()
            .filter(|&&r| r > floor && r <= DAMPING_CAP)
        {
            self.log.push(Adjustment::RaiseDamping {
                damping_resistance: r_d,
            });
            let Some(c) = self.solve(r_d)? else {
                binding = Some(Constraint::Overvoltage);
                continue;
            };
            let r = self.check(r_d, c)?;
            if self.constraints.currents_ok(&r) {
                return Ok(Ok((r_d, c)));
            }
            binding = Some(self.constraints.current_violation(&r));
        }
        let binding = binding.unwrap_or(Constraint::Overvoltage);
        self.log.push(Adjustment::DampingCapReached {
            cap: DAMPING_CAP,
            binding,
        });
        Ok(Err((binding, c0)))
    }

    /// Step 4: reduce `C_d` at minimum damping until the currents fit.
    fn back_off(&mut self, c0: f64) -> Result<(f64, f64)> {
        let r_d = self.constraints.min_damping;
        let mut c = c0;
        for _ in 0..MAX_BACKOFF_STEPS {
            c *= BACKOFF_FACTOR;
            let report = self.check(r_d, c)?;
            self.log.push(Adjustment::BackOffCd {
                capacitance: c,
                relaxed_overvoltage_pct: report.overvoltage_pct,
            });
            if self.constraints.currents_ok(&report) {
                break;
            }
        }
        Ok((r_d, c))
    }

    fn finish(
        &mut self,
        r_d: f64,
        c_d: f64,
        r_s: f64,
        binding: Option<Constraint>,
    ) -> Result<DesignReport> {
        let chosen = self.design(r_d, c_d, r_s);
        let stresses = transient_report(self.spec, self.dev, &chosen)?;
        let v_d1 = self.constraints.transient_voltage_limit(self.spec);
        let rr_comparison = match recovery_comparison(self.spec, self.dev, self.tol, v_d1, c_d) {
            Ok(rr) => {
                self.log.push(Adjustment::RecoveryComparison {
                    v_d1,
                    capacitance: rr.capacitance,
                    ratio: rr.ratio,
                });
                Some(rr)
            }
            Err(Error::InfeasibleRecovery { .. }) => None,
            Err(e) => return Err(e),
        };
        if let Some(b) = binding {
            self.log.push(Adjustment::Infeasible { binding: b });
        }
        Ok(DesignReport {
            chosen,
            stresses,
            rr_comparison,
            feasible: binding.is_none(),
            binding,
            adjustments: std::mem::take(&mut self.log),
        })
    }
}

fn infeasible(report: DesignReport) -> Error {
    Error::Infeasible {
        binding: report
            .binding
            .expect("infeasible report names its binding constraint"),
        report: Box::new(report),
    }
}

/// Runs the full selection procedure.
///
/// Returns [`Error::Infeasible`] carrying the best candidate report when a
/// constraint cannot be met.
pub fn select_network(
    spec: &CircuitSpec,
    dev: &DeviceParams,
    tol: &ToleranceSpec,
    constraints: &DesignConstraints,
) -> Result<DesignReport> {
    validate_context(spec, dev, tol).into_result()?;
    constraints.validate(spec)?;
    let mut sel = Selection {
        spec,
        dev,
        tol,
        constraints,
        log: Vec::new(),
    };

    let (r_d, c_d) = match sel.size_dynamic()? {
        Ok(found) => found,
        Err((binding, c0)) => {
            let (r_d, c_d) = if c0.is_finite() {
                sel.back_off(c0)?
            } else {
                (constraints.min_damping, f64::NAN)
            };
            if !c_d.is_finite() {
                return Err(Error::TargetUnreachable {
                    target_pct: constraints.max_overvoltage_pct,
                    best_pct: sel
                        .log
                        .iter()
                        .find_map(|a| match a {
                            Adjustment::TargetUnreachable { best_pct, .. } => Some(*best_pct),
                            _ => None,
                        })
                        .unwrap_or(f64::NAN),
                });
            }
            let r_s = static_resistor(spec, dev, tol, constraints.max_steady_voltage)
                .unwrap_or(f64::INFINITY);
            return Err(infeasible(sel.finish(r_d, c_d, r_s, Some(binding))?));
        }
    };
    sel.log.push(Adjustment::Accept {
        damping_resistance: r_d,
        capacitance: c_d,
    });

    let v_d1 = constraints.max_steady_voltage;
    let r_s = match static_resistor(spec, dev, tol, v_d1) {
        Ok(r) => r,
        Err(Error::InfeasibleStatic { .. }) => {
            return Err(infeasible(sel.finish(
                r_d,
                c_d,
                f64::INFINITY,
                Some(Constraint::SteadyVoltage),
            )?));
        }
        Err(e) => return Err(e),
    };
    sel.log.push(Adjustment::StaticResistor {
        v_d1,
        static_resistance: r_s,
    });

    let (mut c_final, mut r_s_final) = (c_d, r_s);
    if constraints.snap != Snap::None {
        c_final = constraints.snap.up(c_d);
        r_s_final = constraints.snap.down(r_s);
        sel.log.push(Adjustment::SnapCapacitance {
            series: constraints.snap,
            from: c_d,
            to: c_final,
        });
        sel.log.push(Adjustment::SnapStaticResistance {
            series: constraints.snap,
            from: r_s,
            to: r_s_final,
        });
    }
    // Always verify the values actually fitted.
    let verified = sel.check(r_d, c_final)?;
    let binding = constraints.violation(&verified);
    let report = sel.finish(r_d, c_final, r_s_final, binding)?;
    if report.feasible {
        Ok(report)
    } else {
        Err(infeasible(report))
    }
}

fn mismatch(step: usize, what: &str, logged: f64, replayed: f64) -> Error {
    Error::ReplayMismatch {
        step,
        detail: format!("{what}: logged {logged:e}, replayed {replayed:e}"),
    }
}

/// Re-executes every logged computation and returns the design it leads to.
///
/// Fails with [`Error::ReplayMismatch`] at the first step whose recomputed
/// value differs from the logged one.
pub fn replay(
    spec: &CircuitSpec,
    dev: &DeviceParams,
    tol: &ToleranceSpec,
    log: &[Adjustment],
) -> Result<BalancingDesign> {
    let mut design = BalancingDesign {
        static_resistance: f64::INFINITY,
        damping_resistance: 0.0,
        capacitance: f64::NAN,
        tolerances: *tol,
    };
    let same = |a: f64, b: f64| a.to_bits() == b.to_bits();
    for (step, adj) in log.iter().enumerate() {
        match *adj {
            Adjustment::SolveMinCd {
                damping_resistance,
                target_pct,
                capacitance,
            } => {
                let c = solve_min_cd(spec, dev, tol, target_pct, damping_resistance)?;
                if !same(c, capacitance) {
                    return Err(mismatch(step, "C_d", capacitance, c));
                }
                design.damping_resistance = damping_resistance;
                design.capacitance = c;
            }
            Adjustment::TargetUnreachable {
                damping_resistance, ..
            } => {
                design.damping_resistance = damping_resistance;
            }
            Adjustment::CheckStresses {
                damping_resistance,
                capacitance,
                overvoltage_pct,
                charge_current,
                discharge_current,
                ..
            } => {
                let probe = design.with_dynamic(damping_resistance, capacitance);
                let r = transient_report(spec, dev, &probe)?;
                for (what, logged, got) in [
                    ("V_d_ov", overvoltage_pct, r.overvoltage_pct),
                    ("I_ch_max", charge_current, r.peak_charge_current),
                    ("I_dis_max", discharge_current, r.peak_discharge_current),
                ] {
                    if !same(logged, got) {
                        return Err(mismatch(step, what, logged, got));
                    }
                }
            }
            Adjustment::ApplyMinDamping { damping_resistance }
            | Adjustment::RaiseDamping { damping_resistance } => {
                design.damping_resistance = damping_resistance;
            }
            Adjustment::DampingCapReached { .. } | Adjustment::Infeasible { .. } => {}
            Adjustment::BackOffCd { capacitance, .. } => {
                design.capacitance = capacitance;
            }
            Adjustment::Accept {
                damping_resistance,
                capacitance,
            } => {
                design.damping_resistance = damping_resistance;
                design.capacitance = capacitance;
            }
            Adjustment::StaticResistor {
                v_d1,
                static_resistance,
            } => {
                let r = static_resistor(spec, dev, tol, v_d1)?;
                if !same(r, static_resistance) {
                    return Err(mismatch(step, "R_s", static_resistance, r));
                }
                design.static_resistance = r;
            }
            Adjustment::SnapCapacitance { series, from, to } => {
                let c = series.up(from);
                if !same(c, to) {
                    return Err(mismatch(step, "snapped C_d", to, c));
                }
                design.capacitance = c;
            }
            Adjustment::SnapStaticResistance { series, from, to } => {
                let r = series.down(from);
                if !same(r, to) {
                    return Err(mismatch(step, "snapped R_s", to, r));
                }
                design.static_resistance = r;
            }
            Adjustment::RecoveryComparison {
                v_d1, capacitance, ..
            } => {
                let c = reverse_recovery_cd(spec, dev, tol, v_d1)?;
                if !same(c, capacitance) {
                    return Err(mismatch(step, "C_d_rr", capacitance, c));
                }
            }
        }
    }
    Ok(design)
}
