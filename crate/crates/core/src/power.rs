//! Switching-activity power estimation.
//!
//! `P_total = P_static + a · C · f · V²`, where each gate contributes its
//! toggle rate times its load capacitance, `f` is the clock frequency and
//! leakage scales linearly with the supply.

use serde::{Deserialize, Serialize};

use crate::celllib::CellLibrary;
use crate::logicsim::ActivityProfile;
use crate::netlist::Netlist;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerReport {
    pub v_dd: f64,
    pub v_nominal: f64,
    pub clock_period: f64,
    pub frequency: f64,
    /// Capacitance-weighted mean toggle rate.
    pub activity: f64,
    /// Total load capacitance over all gate outputs.
    pub capacitance: f64,
    pub p_static: f64,
    pub p_dynamic: f64,
    pub p_total: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum PowerError {
    #[error("activity profile was taken on revision {found}, netlist is {expected}")]
    StaleProfile { expected: String, found: String },
    #[error("clock period must be positive, got {0}")]
    ClockPeriod(f64),
}

/// Load on each gate output: fanout pin capacitance plus one wire
/// capacitance per fanout edge; primary-output bits add the output load.
pub fn load_capacitances(n: &Netlist, lib: &CellLibrary) -> Vec<f64> {
    let mut load = vec![0.0f64; n.net_count as usize];
    let wire = lib.wire_capacitance();
    for g in &n.gates {
        let pin = lib.cell(g.function).input_capacitance;
        for i in &g.inputs {
            load[i.index()] += pin + wire;
        }
    }
    for bus in &n.outputs {
        for b in &bus.bits {
            load[b.index()] += lib.output_load() + wire;
        }
    }
    n.gates.iter().map(|g| load[g.output.index()]).collect()
}

pub fn power(
    n: &Netlist,
    prof: &ActivityProfile,
    lib: &CellLibrary,
    v: f64,
    clock_period: f64,
) -> Result<PowerReport, PowerError> {
    let fp = n.fingerprint();
    if prof.netlist != fp {
        return Err(PowerError::StaleProfile {
            expected: fp,
            found: prof.netlist.clone(),
        });
    }
    if !(clock_period > 0.0) {
        return Err(PowerError::ClockPeriod(clock_period));
    }
    let caps = load_capacitances(n, lib);
    let f = 1.0 / clock_period;
    let switched: f64 = caps
        .iter()
        .enumerate()
        .map(|(g, c)| prof.toggle_rate(g) * c)
        .sum();
    let capacitance: f64 = caps.iter().sum();
    let vn = lib.voltage().v_nominal;
    let p_dynamic = switched * f * v * v;
    let p_static: f64 = n
        .gates
        .iter()
        .map(|g| lib.cell(g.function).leakage * v / vn)
        .sum();
    Ok(PowerReport {
        v_dd: v,
        v_nominal: vn,
        clock_period,
        frequency: f,
        activity: if capacitance > 0.0 { switched / capacitance } else { 0.0 },
        capacitance,
        p_static,
        p_dynamic,
        p_total: p_static + p_dynamic,
    })
}

/// Analytic rescale to another supply at the same clock and activity.
pub fn rescale_power(r: &PowerReport, v_new: f64) -> PowerReport {
    let k = v_new / r.v_dd;
    let p_dynamic = r.p_dynamic * k * k;
    let p_static = r.p_static * k;
    PowerReport {
        v_dd: v_new,
        p_static,
        p_dynamic,
        p_total: p_static + p_dynamic,
        ..*r
    }
}

/// Highest voltage of `grid` (ascending) whose rescaled power fits `p_bat`,
/// i.e. the supply reached by scaling down from nominal just far enough.
/// `None` when even the lowest grid voltage exceeds the budget.
pub fn min_voltage_for_budget(r: &PowerReport, grid: &[f64], p_bat: f64) -> Option<f64> {
    if !(p_bat > 0.0) || grid.is_empty() {
        return None;
    }
    let fits = |v: f64| rescale_power(r, v).p_total <= p_bat;
    // power grows with v, so the fitting voltages form a prefix of the grid
    let k = grid.partition_point(|&v| fits(v));
    k.checked_sub(1).map(|i| grid[i])
}
