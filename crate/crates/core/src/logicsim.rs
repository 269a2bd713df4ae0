//! Zero-delay, 64-way bit-parallel gate simulation and activity profiling.
//!
//! Vector `t` lives in bit `t % 64` of word `t / 64`. Blocks of words are
//! evaluated independently on the rayon pool; profiles keep the first and
//! last value of every gate so per-block tallies merge exactly, including
//! the toggles that straddle block boundaries.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::celllib::CellFunction;
use crate::model_ir::Dataset;
use crate::netlist::{Bus, BusRole, Netlist, NetlistError};

/// Words per parallel work item.
const CHUNK_WORDS: usize = 16;

/// Flattened, topologically ordered form of a netlist for evaluation.
pub struct Compiled {
    n_nets: usize,
    ops: Vec<(CellFunction, [u32; 3], u32)>,
    /// Gate index of each op.
    gate_of: Vec<u32>,
    /// Input bit nets, bus-major, LSB first.
    input_bits: Vec<(usize, Vec<u32>)>,
    constants: Vec<(u32, bool)>,
}

impl Compiled {
    pub fn new(n: &Netlist) -> Result<Compiled, NetlistError> {
        let order = n.topo_order()?;
        let mut ops = Vec::with_capacity(order.len());
        let mut gate_of = Vec::with_capacity(order.len());
        for gid in order {
            let g = n.gate(gid);
            let mut ins = [0u32; 3];
            for (slot, i) in ins.iter_mut().zip(&g.inputs) {
                *slot = i.0;
            }
            ops.push((g.function, ins, g.output.0));
            gate_of.push(gid.0);
        }
        Ok(Compiled {
            n_nets: n.net_count as usize,
            ops,
            gate_of,
            input_bits: n
                .inputs
                .iter()
                .map(|b| (b.width(), b.bits.iter().map(|x| x.0).collect()))
                .collect(),
            constants: n.constants.iter().map(|&(c, v)| (c.0, v)).collect(),
        })
    }

    /// Evaluate one 64-vector word; `vals` is scratch of `n_nets` words.
    fn eval_word(&self, vectors: &[Vec<u32>], base: usize, vals: &mut [u64]) {
        for &(c, v) in &self.constants {
            vals[c as usize] = if v { !0 } else { 0 };
        }
        for (bus, (_, bits)) in self.input_bits.iter().enumerate() {
            for (k, &net) in bits.iter().enumerate() {
                let mut w = 0u64;
                for (lane, x) in vectors[base..].iter().take(64).enumerate() {
                    w |= u64::from((x[bus] >> k) & 1) << lane;
                }
                vals[net as usize] = w;
            }
        }
        for &(f, ins, out) in &self.ops {
            let a = vals[ins[0] as usize];
            let r = match f {
                CellFunction::Inv => !a,
                CellFunction::Buf => a,
                CellFunction::Nand2 => !(a & vals[ins[1] as usize]),
                CellFunction::Nor2 => !(a | vals[ins[1] as usize]),
                CellFunction::And2 => a & vals[ins[1] as usize],
                CellFunction::Or2 => a | vals[ins[1] as usize],
                CellFunction::Xor2 => a ^ vals[ins[1] as usize],
                CellFunction::Xnor2 => !(a ^ vals[ins[1] as usize]),
                CellFunction::Mux2 => {
                    let s = a;
                    (!s & vals[ins[1] as usize]) | (s & vals[ins[2] as usize])
                }
                CellFunction::Tie0 => 0,
                CellFunction::Tie1 => !0,
            };
            vals[out as usize] = r;
        }
    }
}

fn check_vectors(n: &Netlist, vectors: &[Vec<u32>]) -> Result<(), NetlistError> {
    let expected = n.inputs.len();
    for v in vectors {
        if v.len() != expected {
            return Err(NetlistError::WidthMismatch {
                got: v.len(),
                expected,
            });
        }
        for (x, bus) in v.iter().zip(&n.inputs) {
            if bus.width() < 32 && *x >> bus.width() != 0 {
                return Err(NetlistError::WidthMismatch {
                    got: (32 - x.leading_zeros()) as usize,
                    expected: bus.width(),
                });
            }
        }
    }
    Ok(())
}

fn lane_mask(valid: usize) -> u64 {
    if valid >= 64 {
        !0
    } else {
        (1u64 << valid) - 1
    }
}

/// Packed values of every output bit.
#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub vectors: usize,
    /// `[bus][bit][word]`.
    pub words: Vec<Vec<Vec<u64>>>,
    pub buses: Vec<Bus>,
}

impl SimResult {
    pub fn bit(&self, bus: usize, bit: usize, t: usize) -> bool {
        (self.words[bus][bit][t / 64] >> (t % 64)) & 1 == 1
    }

    /// Bus value at vector `t`, two's complement when the bus is signed.
    pub fn bus_value(&self, bus: usize, t: usize) -> i64 {
        let b = &self.buses[bus];
        let w = b.width();
        let mut v: i64 = 0;
        for i in 0..w {
            if self.bit(bus, i, t) {
                v |= 1i64 << i;
            }
        }
        if b.signed && w > 0 && w < 64 && (v >> (w - 1)) & 1 == 1 {
            v -= 1i64 << w;
        }
        v
    }

    pub fn class_bus(&self) -> Option<usize> {
        self.buses.iter().position(|b| b.role == BusRole::Class)
    }

    pub fn class_index(&self, t: usize) -> usize {
        let c = self.class_bus().expect("netlist exposes a class bus");
        self.bus_value(c, t) as usize
    }

    pub fn predictions(&self) -> Vec<usize> {
        (0..self.vectors).map(|t| self.class_index(t)).collect()
    }
}

fn run<F, T>(n: &Netlist, vectors: &[Vec<u32>], per_chunk: F) -> Result<Vec<T>, NetlistError>
where
    F: Fn(&Compiled, &[u64], usize, usize) -> T + Sync,
    T: Send,
{
    check_vectors(n, vectors)?;
    let c = Compiled::new(n)?;
    let words = vectors.len().div_ceil(64);
    let chunks: Vec<usize> = (0..words).step_by(CHUNK_WORDS).collect();
    Ok(chunks
        .into_par_iter()
        .map_init(
            || vec![0u64; c.n_nets],
            |vals, w0| {
                let w1 = (w0 + CHUNK_WORDS).min(words);
                let mut acc = Vec::new();
                for w in w0..w1 {
                    c.eval_word(vectors, w * 64, vals);
                    let valid = (vectors.len() - w * 64).min(64);
                    acc.push(per_chunk(&c, vals, w, valid));
                }
                acc
            },
        )
        .flatten_iter()
        .collect())
}

/// Zero-delay simulation of every vector.
pub fn simulate(n: &Netlist, vectors: &[Vec<u32>]) -> Result<SimResult, NetlistError> {
    let per_word = run(n, vectors, |_, vals, _, valid| {
        let m = lane_mask(valid);
        n.outputs
            .iter()
            .map(|b| b.bits.iter().map(|x| vals[x.index()] & m).collect::<Vec<u64>>())
            .collect::<Vec<_>>()
    })?;
    let mut words: Vec<Vec<Vec<u64>>> = n
        .outputs
        .iter()
        .map(|b| vec![Vec::with_capacity(per_word.len()); b.width()])
        .collect();
    for w in per_word {
        for (bus, bits) in w.into_iter().enumerate() {
            for (k, v) in bits.into_iter().enumerate() {
                words[bus][k].push(v);
            }
        }
    }
    Ok(SimResult {
        vectors: vectors.len(),
        words,
        buses: n.outputs.clone(),
    })
}

/// One-vector scalar evaluation, used as a reference for the packed kernel.
pub fn simulate_scalar(n: &Netlist, x: &[u32]) -> Result<Vec<Vec<bool>>, NetlistError> {
    check_vectors(n, std::slice::from_ref(&x.to_vec()))?;
    let mut v = vec![false; n.net_count as usize];
    for (bus, val) in n.inputs.iter().zip(x) {
        for (k, b) in bus.bits.iter().enumerate() {
            v[b.index()] = (val >> k) & 1 == 1;
        }
    }
    for &(c, b) in &n.constants {
        v[c.index()] = b;
    }
    for gid in n.topo_order()? {
        let g = n.gate(gid);
        let i: Vec<bool> = g.inputs.iter().map(|x| v[x.index()]).collect();
        v[g.output.index()] = match g.function {
            CellFunction::Inv => !i[0],
            CellFunction::Buf => i[0],
            CellFunction::Nand2 => !(i[0] && i[1]),
            CellFunction::Nor2 => !(i[0] || i[1]),
            CellFunction::And2 => i[0] && i[1],
            CellFunction::Or2 => i[0] || i[1],
            CellFunction::Xor2 => i[0] != i[1],
            CellFunction::Xnor2 => i[0] == i[1],
            CellFunction::Mux2 => {
                if i[0] {
                    i[2]
                } else {
                    i[1]
                }
            }
            CellFunction::Tie0 => false,
            CellFunction::Tie1 => true,
        };
    }
    Ok(n.outputs
        .iter()
        .map(|b| b.bits.iter().map(|x| v[x.index()]).collect())
        .collect())
}

/// Per-gate switching activity over an ordered vector sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityProfile {
    /// Fingerprint of the profiled netlist revision.
    pub netlist: String,
    pub vectors: u64,
    pub ones: Vec<u64>,
    pub toggles: Vec<u64>,
    pub first: Vec<bool>,
    pub last: Vec<bool>,
}

impl ActivityProfile {
    fn empty(gates: usize, netlist: String) -> ActivityProfile {
        ActivityProfile {
            netlist,
            vectors: 0,
            ones: vec![0; gates],
            toggles: vec![0; gates],
            first: vec![false; gates],
            last: vec![false; gates],
        }
    }

    pub fn gate_count(&self) -> usize {
        self.ones.len()
    }

    pub fn ones_fraction(&self, g: usize) -> f64 {
        if self.vectors == 0 {
            return 0.0;
        }
        self.ones[g] as f64 / self.vectors as f64
    }

    /// Fraction of time the gate holds its dominant value.
    pub fn tau(&self, g: usize) -> f64 {
        let f = self.ones_fraction(g);
        f.max(1.0 - f)
    }

    /// Dominant value; an exact 50/50 split resolves to 1.
    pub fn dominant(&self, g: usize) -> bool {
        2 * self.ones[g] >= self.vectors
    }

    /// Toggles per vector transition, the activity factor used for power.
    pub fn toggle_rate(&self, g: usize) -> f64 {
        if self.vectors == 0 {
            return 0.0;
        }
        self.toggles[g] as f64 / self.vectors as f64
    }

    /// Profile of the sequence `self` followed by `next`.
    pub fn merge(&self, next: &ActivityProfile) -> ActivityProfile {
        assert_eq!(self.netlist, next.netlist, "profiles of different revisions");
        if self.vectors == 0 {
            return next.clone();
        }
        if next.vectors == 0 {
            return self.clone();
        }
        let g = self.gate_count();
        ActivityProfile {
            netlist: self.netlist.clone(),
            vectors: self.vectors + next.vectors,
            ones: (0..g).map(|i| self.ones[i] + next.ones[i]).collect(),
            toggles: (0..g)
                .map(|i| self.toggles[i] + next.toggles[i] + u64::from(self.last[i] != next.first[i]))
                .collect(),
            first: self.first.clone(),
            last: next.last.clone(),
        }
    }

    /// Text dump: one line per gate, `id ones_fraction toggles`.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for g in 0..self.gate_count() {
            let _ = writeln!(s, "{g} {:.6} {}", self.ones_fraction(g), self.toggles[g]);
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("profile serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        std::fs::write(path, self.to_json())
    }

    pub fn load(path: impl AsRef<Path>) -> std::io::Result<ActivityProfile> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ProfileError {
    #[error("cannot profile an empty vector set")]
    Empty,
    #[error(transparent)]
    Netlist(#[from] NetlistError),
}

/// Profile gate activity over `vectors` in the given order.
pub fn profile(n: &Netlist, vectors: &[Vec<u32>]) -> Result<ActivityProfile, ProfileError> {
    if vectors.is_empty() {
        return Err(ProfileError::Empty);
    }
    let fp = n.fingerprint();
    let gates = n.gate_count();
    let parts = run(n, vectors, |c, vals, _, valid| {
        let m = lane_mask(valid);
        let pair_mask = lane_mask(valid.saturating_sub(1));
        let mut p = ActivityProfile::empty(gates, fp.clone());
        p.vectors = valid as u64;
        for (&(_, _, out), &g) in c.ops.iter().zip(&c.gate_of) {
            let w = vals[out as usize] & m;
            let g = g as usize;
            p.ones[g] = u64::from(w.count_ones());
            p.toggles[g] = u64::from(((w ^ (w >> 1)) & pair_mask).count_ones());
            p.first[g] = w & 1 == 1;
            p.last[g] = (w >> (valid - 1)) & 1 == 1;
        }
        p
    })?;
    let mut acc = ActivityProfile::empty(gates, fp);
    for p in &parts {
        acc = acc.merge(p);
    }
    Ok(acc)
}

/// Test-set accuracy of a netlist's decoded class output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub tag: String,
    pub correct: u64,
    pub total: u64,
    pub accuracy: f64,
    /// `confusion[true][predicted]` over class indices.
    pub confusion: Vec<Vec<u64>>,
}

/// Score predicted class indices against integer labels.
pub fn score(tag: &str, predictions: &[usize], labels: &[i64], class_labels: &[i64]) -> AccuracyReport {
    let k = class_labels.len();
    let mut confusion = vec![vec![0u64; k]; k];
    let mut correct = 0u64;
    for (&p, &y) in predictions.iter().zip(labels) {
        let truth = class_labels.iter().position(|&c| c == y);
        if p < k && class_labels[p] == y {
            correct += 1;
        }
        if let (Some(t), true) = (truth, p < k) {
            confusion[t][p] += 1;
        }
    }
    let total = labels.len() as u64;
    AccuracyReport {
        tag: tag.to_string(),
        correct,
        total,
        accuracy: if total == 0 { 0.0 } else { correct as f64 / total as f64 },
        confusion,
    }
}

pub fn evaluate_accuracy(n: &Netlist, test: &Dataset) -> Result<AccuracyReport, NetlistError> {
    let r = simulate(n, &test.features)?;
    let tag = match test.split {
        crate::model_ir::Split::Train => "train",
        crate::model_ir::Split::Test => "test",
    };
    Ok(score(tag, &r.predictions(), &test.labels, &n.meta.class_labels))
}
