//! Hardware-driven coefficient approximation.
//!
//! For every coefficient `w` two replacements are considered: the cheapest
//! multiplier in `[w, w + e]` and the cheapest in `[w − e, w]`. Each weighted
//! sum then picks one candidate per coefficient so that the signed errors
//! `Σ (w − w̃)` cancel as far as possible, breaking ties by total multiplier
//! area and then by the lexicographically smallest coefficient vector.

use std::collections::HashMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::celllib::CellLibrary;
use crate::model_ir::{Interval, QuantizedModel};
use crate::synth::{csd_decompose, AreaTable};

/// Exhaustive assignment is used while `2^N` stays within this bound.
pub const EXHAUSTIVE_LIMIT: u64 = 1 << 24;

const AREA_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub w: i64,
    /// Cheapest value in `[w, w + e]`: error `w − w̃ ≤ 0`.
    pub up: i64,
    /// Cheapest value in `[w − e, w]`: error `w − w̃ ≥ 0`.
    pub down: i64,
    pub area_w: f64,
    pub area_up: f64,
    pub area_down: f64,
}

impl Candidate {
    pub fn options(&self) -> [(i64, f64); 2] {
        [(self.up, self.area_up), (self.down, self.area_down)]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub e: u32,
    pub candidates: Vec<Candidate>,
}

/// Cheapest value in `[a, b]`; ties go to the value closest to `w`, then the smaller one.
fn segment_min(w: i64, a: i64, b: i64, area: &impl Fn(i64) -> f64) -> (i64, f64) {
    let mut best = (w, area(w));
    for v in a..=b {
        let av = area(v);
        let better = av < best.1 - AREA_EPS
            || (av <= best.1 + AREA_EPS
                && ((v - w).abs() < (best.0 - w).abs()
                    || ((v - w).abs() == (best.0 - w).abs() && v < best.0)));
        if better {
            best = (v, av);
        }
    }
    best
}

/// Candidate pair for one coefficient within `[lo, hi]`.
pub fn candidate_for(w: i64, e: u32, lo: i64, hi: i64, area: impl Fn(i64) -> f64) -> Candidate {
    let e = i64::from(e);
    let (up, area_up) = segment_min(w, w, (w + e).min(hi).max(w), &area);
    let (down, area_down) = segment_min(w, (w - e).max(lo).min(w), w, &area);
    Candidate {
        w,
        up,
        down,
        area_w: area(w),
        area_up,
        area_down,
    }
}

/// Candidate sets for coefficients that all see the same input range.
pub fn build_candidates(ws: &[i64], e: u32, table: &AreaTable) -> CandidateSet {
    CandidateSet {
        e,
        candidates: ws
            .iter()
            .map(|&w| candidate_for(w, e, table.lo, table.hi(), |v| table.area(v)))
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxAssignment {
    pub approx: Vec<i64>,
    /// `Σ (w − w̃)`.
    pub residual: i64,
    /// `Σ AREA(BM_w̃)`.
    pub area: f64,
    pub exhaustive: bool,
}

#[derive(Debug, thiserror::Error)]
#[error("exhaustive assignment over {n} coefficients exceeds the 2^24 search guard")]
pub struct SearchGuardExceeded {
    pub n: usize,
}

fn better(
    (r, a, v): (i64, f64, &[i64]),
    best: &Option<(i64, f64, Vec<i64>)>,
) -> bool {
    match best {
        None => true,
        Some((br, ba, bv)) => {
            r.abs() < br.abs()
                || (r.abs() == br.abs()
                    && (a < ba - AREA_EPS || (a <= ba + AREA_EPS && v < bv.as_slice())))
        }
    }
}

/// Exhaustive search over `∏ R_i`.
pub fn assign_exhaustive(c: &CandidateSet) -> Result<ApproxAssignment, SearchGuardExceeded> {
    let n = c.candidates.len();
    if n >= 64 || (1u64 << n) > EXHAUSTIVE_LIMIT {
        return Err(SearchGuardExceeded { n });
    }
    let mut best: Option<(i64, f64, Vec<i64>)> = None;
    let mut v = vec![0i64; n];
    for mask in 0u64..(1u64 << n) {
        let mut r = 0i64;
        let mut a = 0.0f64;
        let mut dup = false;
        for (i, cand) in c.candidates.iter().enumerate() {
            let pick = ((mask >> i) & 1) as usize;
            if pick == 1 && cand.up == cand.down {
                dup = true;
                break;
            }
            let (val, area) = cand.options()[pick];
            v[i] = val;
            r += cand.w - val;
            a += area;
        }
        if dup {
            continue;
        }
        if better((r, a, &v), &best) {
            best = Some((r, a, v.clone()));
        }
    }
    let (residual, area, approx) = best.unwrap_or((0, 0.0, Vec::new()));
    Ok(ApproxAssignment {
        approx,
        residual,
        area,
        exhaustive: true,
    })
}

/// Sign-alternating greedy balancing by running residual.
pub fn assign_greedy(c: &CandidateSet) -> ApproxAssignment {
    let mut r = 0i64;
    let mut area = 0.0;
    let mut approx = Vec::with_capacity(c.candidates.len());
    for cand in &c.candidates {
        let pick = cand
            .options()
            .into_iter()
            .min_by(|x, y| {
                let rx = (r + cand.w - x.0).abs();
                let ry = (r + cand.w - y.0).abs();
                rx.cmp(&ry)
                    .then(x.1.partial_cmp(&y.1).expect("finite area"))
                    .then(x.0.cmp(&y.0))
            })
            .expect("two options");
        r += cand.w - pick.0;
        area += pick.1;
        approx.push(pick.0);
    }
    ApproxAssignment {
        approx,
        residual: r,
        area,
        exhaustive: false,
    }
}

/// Exhaustive when within the guard, greedy otherwise.
pub fn assign(c: &CandidateSet) -> ApproxAssignment {
    assign_exhaustive(c).unwrap_or_else(|_| assign_greedy(c))
}

/// One row of the approximation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoeffRow {
    pub layer: usize,
    pub neuron: usize,
    /// Input index, or `None` for the bias.
    pub index: Option<usize>,
    pub w: i64,
    pub approx: i64,
    pub area_w: f64,
    pub area_approx: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxReport {
    pub e: u32,
    pub rows: Vec<CoeffRow>,
    /// `Σ (w − w̃)` per weighted sum, `[layer][neuron]`.
    pub residuals: Vec<Vec<i64>>,
    pub exact_area: f64,
    pub approx_area: f64,
}

impl ApproxReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("layer,neuron,index,w,w_approx,area_w,area_approx\n");
        for r in &self.rows {
            let idx = r.index.map_or("bias".to_string(), |i| i.to_string());
            let _ = writeln!(
                s,
                "{},{},{},{},{},{:.4},{:.4}",
                r.layer, r.neuron, idx, r.w, r.approx, r.area_w, r.area_approx
            );
        }
        s
    }
}

/// Area proxy for a bias constant: CSD digit count, as a unit-free cost.
fn bias_cost(b: i64) -> f64 {
    csd_decompose(b).nonzero_digits() as f64
}

/// Caches multiplier area tables by input interval.
pub struct AreaCache<'a> {
    lib: &'a CellLibrary,
    lo: i64,
    hi: i64,
    tables: HashMap<Interval, AreaTable>,
}

impl<'a> AreaCache<'a> {
    pub fn new(lib: &'a CellLibrary, lo: i64, hi: i64) -> AreaCache<'a> {
        AreaCache {
            lib,
            lo,
            hi,
            tables: HashMap::new(),
        }
    }

    pub fn table(&mut self, iv: Interval) -> &AreaTable {
        let (lib, lo, hi) = (self.lib, self.lo, self.hi);
        self.tables
            .entry(iv)
            .or_insert_with(|| AreaTable::new(lo, hi, iv, lib))
    }
}

/// Proxy area `Σ AREA(BM_w)` of a model's multiplicative coefficients.
pub fn proxy_area(m: &QuantizedModel, cache: &mut AreaCache) -> f64 {
    let xmax = i64::from(m.spec.input_max());
    let mut inputs = vec![Interval::new(0, xmax); m.n_features];
    let intervals = m.sum_intervals();
    let mut total = 0.0;
    for (l, layer) in m.layers.iter().enumerate() {
        for row in &layer.weights {
            for (w, iv) in row.iter().zip(&inputs) {
                total += cache.table(*iv).area(*w);
            }
        }
        if l + 1 < m.layers.len() {
            inputs = intervals[l].iter().map(Interval::relu).collect();
        }
    }
    total
}

/// Approximate every weighted sum independently; layer 1 first, so that
/// layer-2 multiplier areas see the approximated hidden ranges.
pub fn approximate_model(
    m: &QuantizedModel,
    e: u32,
    lib: &CellLibrary,
    approx_biases: bool,
) -> (QuantizedModel, ApproxReport) {
    let mut cache = AreaCache::new(lib, m.spec.coeff_min(), m.spec.coeff_max());
    let exact_area = proxy_area(m, &mut cache);
    let mut out = m.clone();
    let mut rows = Vec::new();
    let mut residuals = Vec::new();
    let xmax = i64::from(m.spec.input_max());
    let (lo, hi) = (m.spec.coeff_min(), m.spec.coeff_max());
    for l in 0..out.layers.len() {
        let inputs: Vec<Interval> = if l == 0 {
            vec![Interval::new(0, xmax); m.n_features]
        } else {
            out.sum_intervals()[l - 1].iter().map(Interval::relu).collect()
        };
        for iv in &inputs {
            cache.table(*iv);
        }
        let tables: Vec<&AreaTable> = inputs.iter().map(|iv| &cache.tables[iv]).collect();
        let layer = &out.layers[l];
        let results: Vec<(Vec<i64>, i64, i64, CandidateSet)> = (0..layer.outputs())
            .into_par_iter()
            .map(|j| {
                let row = &layer.weights[j];
                let mut cands: Vec<Candidate> = row
                    .iter()
                    .zip(&tables)
                    .map(|(&w, t)| candidate_for(w, e, lo, hi, |v| t.area(v)))
                    .collect();
                let b = layer.biases[j];
                if approx_biases {
                    cands.push(candidate_for(b, e, i64::MIN / 4, i64::MAX / 4, bias_cost));
                }
                let set = CandidateSet { e, candidates: cands };
                let a = assign(&set);
                let mut approx = a.approx;
                let new_b = if approx_biases { approx.pop().expect("bias slot") } else { b };
                (approx, new_b, a.residual, set)
            })
            .collect();
        let mut layer_res = Vec::with_capacity(results.len());
        for (j, (approx, new_b, residual, set)) in results.into_iter().enumerate() {
            for (i, (c, &v)) in set.candidates.iter().zip(&approx).enumerate() {
                let area_approx = if v == c.up { c.area_up } else if v == c.down { c.area_down } else { c.area_w };
                rows.push(CoeffRow {
                    layer: l,
                    neuron: j,
                    index: Some(i),
                    w: c.w,
                    approx: v,
                    area_w: c.area_w,
                    area_approx,
                });
            }
            if approx_biases {
                let c = set.candidates.last().expect("bias candidate");
                rows.push(CoeffRow {
                    layer: l,
                    neuron: j,
                    index: None,
                    w: c.w,
                    approx: new_b,
                    area_w: c.area_w,
                    area_approx: bias_cost(new_b),
                });
            }
            out.layers[l].weights[j] = approx;
            out.layers[l].biases[j] = new_b;
            layer_res.push(residual);
        }
        residuals.push(layer_res);
    }
    let approx_area = proxy_area(&out, &mut cache);
    (
        out,
        ApproxReport {
            e,
            rows,
            residuals,
            exact_area,
            approx_area,
        },
    )
}

/// Per-multiplier area reduction `1 − min(AREA(w̃⁻), AREA(w̃⁺)) / AREA(w)`
/// for every coefficient in the table's range (0 where `AREA(w) = 0`).
pub fn multiplier_reductions(table: &AreaTable, e: u32) -> Vec<f64> {
    (table.lo..=table.hi())
        .map(|w| {
            let c = candidate_for(w, e, table.lo, table.hi(), |v| table.area(v));
            if c.area_w <= 0.0 {
                0.0
            } else {
                1.0 - c.area_up.min(c.area_down) / c.area_w
            }
        })
        .collect()
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let n = s.len();
    if n == 0 {
        return 0.0;
    }
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}
