//! Static timing and voltage over-scaling simulation.
//!
//! Arrival times are computed once at nominal voltage and multiplied by the
//! library's delay stretch, so timing at any voltage is an exact uniform
//! scaling of the nominal report.
//!
//! Over-scaling is modelled at the output registers: an output bit whose
//! arrival exceeds the clock period keeps the settled value of the previous
//! vector (all zero before the first vector). Lowering the voltage can only
//! grow the set of late bits, so accuracy is nonincreasing in `V_dd`.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::celllib::{delay_scale, CellLibrary, LibraryError};
use crate::logicsim::{simulate, SimResult};
use crate::netlist::{Netlist, NetlistError};

/// Nominal-voltage arrival of every net.
pub fn nominal_arrivals(n: &Netlist, lib: &CellLibrary) -> Vec<f64> {
    let mut at = vec![0.0f64; n.net_count as usize];
    for gid in n.topo_order().expect("acyclic netlist") {
        let g = n.gate(gid);
        let fanin = g.inputs.iter().map(|i| at[i.index()]).fold(0.0, f64::max);
        at[g.output.index()] = fanin + lib.cell(g.function).intrinsic_delay;
    }
    at
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub voltage: f64,
    pub scale: f64,
    /// Arrival per gate output, indexed by gate id.
    pub gate_arrival: Vec<f64>,
    /// `[bus][bit]` arrival at the output registers.
    pub output_arrival: Vec<Vec<f64>>,
    pub critical_path: f64,
}

impl TimingReport {
    pub fn slack(&self, clock_period: f64) -> f64 {
        clock_period - self.critical_path
    }

    /// Output bits whose arrival is strictly later than `clock_period`.
    pub fn late_bits(&self, clock_period: f64) -> Vec<Vec<bool>> {
        self.output_arrival
            .iter()
            .map(|bus| bus.iter().map(|&a| a > clock_period).collect())
            .collect()
    }

    pub fn violating_bits(&self, clock_period: f64) -> usize {
        self.late_bits(clock_period).iter().flatten().filter(|&&b| b).count()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("gate,arrival\n");
        for (g, a) in self.gate_arrival.iter().enumerate() {
            let _ = writeln!(s, "{g},{a:.6}");
        }
        s
    }
}

/// Arrival times at voltage `v`.
pub fn sta(n: &Netlist, lib: &CellLibrary, v: f64) -> Result<TimingReport, LibraryError> {
    let scale = delay_scale(lib.voltage(), v)?;
    let nominal = nominal_arrivals(n, lib);
    let at: Vec<f64> = nominal.iter().map(|a| a * scale).collect();
    let output_arrival: Vec<Vec<f64>> = n
        .outputs
        .iter()
        .map(|b| b.bits.iter().map(|x| at[x.index()]).collect())
        .collect();
    let critical_path = output_arrival.iter().flatten().copied().fold(0.0, f64::max);
    Ok(TimingReport {
        voltage: v,
        scale,
        gate_arrival: n.gates.iter().map(|g| at[g.output.index()]).collect(),
        output_arrival,
        critical_path,
    })
}

/// Nominal critical path.
pub fn critical_path(n: &Netlist, lib: &CellLibrary) -> f64 {
    let at = nominal_arrivals(n, lib);
    n.outputs
        .iter()
        .flat_map(|b| b.bits.iter())
        .map(|x| at[x.index()])
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VosConfig {
    pub v_dd: f64,
    pub clock_period: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum VosError {
    #[error(transparent)]
    Library(#[from] LibraryError),
    #[error(transparent)]
    Netlist(#[from] NetlistError),
}

/// Replace the listed output bits by their value one vector earlier.
pub fn apply_stale(r: &mut SimResult, late: &[Vec<bool>]) {
    let valid_last = r.vectors % 64;
    for (bus, bits) in late.iter().enumerate() {
        for (k, &is_late) in bits.iter().enumerate() {
            if !is_late {
                continue;
            }
            let w = &mut r.words[bus][k];
            let mut carry = 0u64;
            for word in w.iter_mut() {
                let next_carry = *word >> 63;
                *word = (*word << 1) | carry;
                carry = next_carry;
            }
            if valid_last != 0 {
                if let Some(last) = w.last_mut() {
                    *last &= (1u64 << valid_last) - 1;
                }
            }
        }
    }
}

/// Timing-aware simulation of an ordered vector stream.
pub fn vos_simulate(
    n: &Netlist,
    lib: &CellLibrary,
    cfg: VosConfig,
    vectors: &[Vec<u32>],
) -> Result<SimResult, VosError> {
    let t = sta(n, lib, cfg.v_dd)?;
    let mut r = simulate(n, vectors)?;
    apply_stale(&mut r, &t.late_bits(cfg.clock_period));
    Ok(r)
}

/// Replicate-and-shuffle order of sample indices: `target / len` full
/// copies plus a random subset for the remainder, then one shuffle.
pub fn build_vos_stimuli(len: usize, target: usize, seed: u64) -> Vec<usize> {
    if len == 0 {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = Vec::with_capacity(target);
    for _ in 0..target / len {
        order.extend(0..len);
    }
    let mut rest: Vec<usize> = (0..len).collect();
    rest.shuffle(&mut rng);
    order.extend_from_slice(&rest[..target % len]);
    order.shuffle(&mut rng);
    order
}

/// Smallest grid voltage at which no output bit misses `clock_period`.
pub fn min_violation_free_voltage(n: &Netlist, lib: &CellLibrary, clock_period: f64) -> Option<f64> {
    let nominal = critical_path(n, lib);
    lib.voltage()
        .grid()
        .into_iter()
        .filter(|&v| nominal * delay_scale(lib.voltage(), v).expect("grid above threshold") <= clock_period)
        .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.min(v))))
}
