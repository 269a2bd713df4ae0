//! Activity-driven netlist pruning.
//!
//! A gate is a pruning candidate when it holds one value for at least a
//! fraction `τ_c` of the profiling run (`τ ≥ τ_c`) and it can only reach
//! output bits up to position `φ_c` of the significance buses (`φ ≤ φ_c`).
//! Candidates are tied to their dominant value and the netlist is
//! re-simplified. Gates of the decode logic (argmax, voting, regression
//! rounding) are never candidates.
//!
//! Because a pruned gate only reaches bits `0..=φ_c`, a regressor's raw
//! accumulator moves by at most `2^(φ_c+1) − 1`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::logicsim::ActivityProfile;
use crate::netlist::{BusRole, GateId, GateRole, Netlist};

/// Tolerance on `τ ≥ τ_c` so grid values like 0.8 compare as intended.
const TAU_EPS: f64 = 1e-12;

/// Per-gate significance `φ` and prunability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateSignificance {
    pub netlist: String,
    pub phi: Vec<i32>,
    pub prunable: Vec<bool>,
}

impl GateSignificance {
    pub fn max_phi(&self) -> i32 {
        self.phi.iter().copied().max().unwrap_or(-1)
    }
}

/// `φ(g)`: highest significance-bus bit reachable from `g`, −1 if none.
pub fn compute_phi(n: &Netlist) -> GateSignificance {
    let buses: Vec<usize> = n.output_bus(BusRole::Significance).map(|(i, _)| i).collect();
    let reach = n.cone_bits(&buses);
    let phi = n
        .gates
        .iter()
        .map(|g| reach[g.output.index()].iter().copied().max().unwrap_or(-1))
        .collect();
    GateSignificance {
        netlist: n.fingerprint(),
        phi,
        prunable: n.gates.iter().map(|g| g.role == GateRole::Datapath).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PruneConfig {
    pub tau_c: f64,
    pub phi_c: i32,
}

#[derive(Debug, thiserror::Error)]
pub enum PruneError {
    #[error("activity profile was taken on revision {found}, netlist is {expected}")]
    StaleProfile { expected: String, found: String },
    #[error("significance table was computed on revision {found}, netlist is {expected}")]
    StaleSignificance { expected: String, found: String },
}

fn check_revision(n: &Netlist, prof: &ActivityProfile, sig: &GateSignificance) -> Result<String, PruneError> {
    let fp = n.fingerprint();
    if prof.netlist != fp {
        return Err(PruneError::StaleProfile {
            expected: fp,
            found: prof.netlist.clone(),
        });
    }
    if sig.netlist != fp {
        return Err(PruneError::StaleSignificance {
            expected: fp,
            found: sig.netlist.clone(),
        });
    }
    Ok(fp)
}

/// Gates with `τ ≥ τ_c` that may be pruned, regardless of `φ`.
pub fn qualifying(prof: &ActivityProfile, sig: &GateSignificance, tau_c: f64) -> Vec<GateId> {
    (0..sig.phi.len())
        .filter(|&g| sig.prunable[g] && prof.tau(g) >= tau_c - TAU_EPS)
        .map(|g| GateId(g as u32))
        .collect()
}

/// `Φ_τ`: sorted distinct `φ` among qualifying gates.
pub fn phi_grid(prof: &ActivityProfile, sig: &GateSignificance, tau_c: f64) -> Vec<i32> {
    let mut v: Vec<i32> = qualifying(prof, sig, tau_c)
        .into_iter()
        .map(|g| sig.phi[g.index()])
        .collect();
    v.sort_unstable();
    v.dedup();
    v
}

/// Gates that `cfg` ties to constants, with their dominant values.
pub fn selected(prof: &ActivityProfile, sig: &GateSignificance, cfg: PruneConfig) -> Vec<(GateId, bool)> {
    qualifying(prof, sig, cfg.tau_c)
        .into_iter()
        .filter(|g| sig.phi[g.index()] <= cfg.phi_c)
        .map(|g| (g, prof.dominant(g.index())))
        .collect()
}

/// Tie every selected gate to its dominant value and re-simplify.
pub fn prune(
    n: &Netlist,
    prof: &ActivityProfile,
    sig: &GateSignificance,
    cfg: PruneConfig,
) -> Result<Netlist, PruneError> {
    check_revision(n, prof, sig)?;
    Ok(n.tie_gates(&selected(prof, sig, cfg)).const_propagate())
}

/// `0.80, 0.81, .., 0.99`.
pub fn default_tau_grid() -> Vec<f64> {
    (80..=99).map(|p| f64::from(p) / 100.0).collect()
}

/// One point of a pruning sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub tau_c: f64,
    pub phi_c: i32,
    pub pruned_gates: usize,
    pub gates: usize,
    pub area: f64,
    pub accuracy: f64,
    pub critical_path: f64,
}

pub fn sweep_csv(rows: &[SweepRow], manifest: &str) -> String {
    let mut s = String::from("manifest,tau_c,phi_c,pruned_gates,gates,area,accuracy,critical_path\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{manifest},{:.2},{},{},{},{:.4},{:.6},{:.4}",
            r.tau_c, r.phi_c, r.pruned_gates, r.gates, r.area, r.accuracy, r.critical_path
        );
    }
    s
}
