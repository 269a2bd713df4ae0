//! Bespoke synthesis of quantized models into gate-level netlists.
//!
//! Every coefficient is hardwired: a multiplier by `w` is a shift-add
//! network over the canonical signed-digit form of `|w|`, and the sign of
//! `w` is absorbed by the weighted-sum tree, which adds the positive
//! products and subtracts the negative ones. Adders are ripple-carry over
//! the cell set; the raw netlist is cleaned up by
//! [`Netlist::const_propagate`], which is what turns shifted constant-zero
//! bits into half adders and wires.
//!
//! Word widths are derived from value intervals, so no adder is wider than
//! the range it can actually produce.

use rayon::prelude::*;

use crate::celllib::{CellFunction, CellLibrary};
use crate::model_ir::{class_pairs, unsigned_width, Interval, ModelKind, QuantizedModel};
use crate::netlist::{Bus, BusRole, Gate, GateId, GateRole, NetId, Netlist, NetlistMeta};

/// Canonical signed-digit form: `value = Σ sign · 2^shift`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsdForm {
    /// `(shift, sign)`, ascending shift, sign is ±1.
    pub digits: Vec<(u32, i8)>,
    pub value: i64,
}

impl CsdForm {
    pub fn nonzero_digits(&self) -> usize {
        self.digits.len()
    }

    pub fn eval(&self) -> i64 {
        self.digits
            .iter()
            .map(|&(s, sign)| i64::from(sign) << s)
            .sum()
    }
}

/// Non-adjacent-form recoding of `w`.
pub fn csd_decompose(w: i64) -> CsdForm {
    let mut digits = Vec::new();
    let mut n = w as i128;
    let mut shift = 0u32;
    while n != 0 {
        if n & 1 == 1 {
            let d: i128 = 2 - n.rem_euclid(4);
            digits.push((shift, d as i8));
            n -= d;
        }
        n >>= 1;
        shift += 1;
    }
    CsdForm { digits, value: w }
}

/// Bits of a value together with the interval it is known to lie in.
#[derive(Debug, Clone)]
struct Word {
    bits: Vec<NetId>,
    iv: Interval,
}

impl Word {
    fn signed(&self) -> bool {
        self.iv.is_signed()
    }
}

/// Raw netlist under construction.
struct Builder {
    gates: Vec<Gate>,
    constants: Vec<(NetId, bool)>,
    consts: [Option<NetId>; 2],
    inputs: Vec<Bus>,
    outputs: Vec<Bus>,
    next: u32,
    role: GateRole,
}

impl Builder {
    fn new() -> Builder {
        Builder {
            gates: Vec::new(),
            constants: Vec::new(),
            consts: [None, None],
            inputs: Vec::new(),
            outputs: Vec::new(),
            next: 0,
            role: GateRole::Datapath,
        }
    }

    fn fresh(&mut self) -> NetId {
        let id = NetId(self.next);
        self.next += 1;
        id
    }

    fn konst(&mut self, v: bool) -> NetId {
        if let Some(n) = self.consts[v as usize] {
            return n;
        }
        let n = self.fresh();
        self.constants.push((n, v));
        self.consts[v as usize] = Some(n);
        n
    }

    fn gate(&mut self, function: CellFunction, ins: &[NetId]) -> NetId {
        let out = self.fresh();
        self.gates.push(Gate {
            id: GateId(self.gates.len() as u32),
            function,
            inputs: ins.to_vec(),
            output: out,
            role: self.role,
        });
        out
    }

    fn input(&mut self, name: String, bits: u32, hi: i64) -> Word {
        let nets: Vec<NetId> = (0..bits).map(|_| self.fresh()).collect();
        self.inputs.push(Bus {
            name,
            bits: nets.clone(),
            signed: false,
            role: BusRole::Input,
        });
        Word {
            bits: nets,
            iv: Interval::new(0, hi),
        }
    }

    fn zero(&self) -> Word {
        Word {
            bits: Vec::new(),
            iv: Interval::point(0),
        }
    }

    fn constant(&mut self, v: i64) -> Word {
        let iv = Interval::point(v);
        let bits = (0..iv.width())
            .map(|i| self.konst((v >> i) & 1 == 1))
            .collect();
        Word { bits, iv }
    }

    /// Bit `i` of `w` under sign or zero extension.
    fn bit(&mut self, w: &Word, i: usize) -> NetId {
        if i < w.bits.len() {
            w.bits[i]
        } else if w.signed() {
            *w.bits.last().expect("signed word has a sign bit")
        } else {
            self.konst(false)
        }
    }

    fn extend(&mut self, w: &Word, width: usize) -> Vec<NetId> {
        (0..width).map(|i| self.bit(w, i)).collect()
    }

    fn shl(&mut self, w: &Word, k: u32) -> Word {
        if w.iv == Interval::point(0) {
            return self.zero();
        }
        let z = self.konst(false);
        let mut bits = vec![z; k as usize];
        bits.extend_from_slice(&w.bits);
        Word {
            bits,
            iv: Interval::new(w.iv.lo << k, w.iv.hi << k),
        }
    }

    fn full_adder(&mut self, a: NetId, b: NetId, c: NetId, need_carry: bool) -> (NetId, Option<NetId>) {
        let p = self.gate(CellFunction::Xor2, &[a, b]);
        let s = self.gate(CellFunction::Xor2, &[p, c]);
        if !need_carry {
            return (s, None);
        }
        let g = self.gate(CellFunction::Nand2, &[a, b]);
        let t = self.gate(CellFunction::Nand2, &[p, c]);
        let co = self.gate(CellFunction::Nand2, &[g, t]);
        (s, Some(co))
    }

    /// Ripple-carry `a ± b` at the width of `iv`, which must contain the true result.
    fn addsub(&mut self, a: &Word, b: &Word, subtract: bool, iv: Interval) -> Word {
        let width = iv.width() as usize;
        if width == 0 {
            return self.zero();
        }
        let mut carry = self.konst(subtract);
        let mut bits = Vec::with_capacity(width);
        for i in 0..width {
            let ai = self.bit(a, i);
            let mut bi = self.bit(b, i);
            if subtract {
                bi = self.gate(CellFunction::Inv, &[bi]);
            }
            let (s, co) = self.full_adder(ai, bi, carry, i + 1 < width);
            bits.push(s);
            if let Some(co) = co {
                carry = co;
            }
        }
        Word { bits, iv }
    }

    fn add(&mut self, a: &Word, b: &Word) -> Word {
        if a.iv == Interval::point(0) {
            return b.clone();
        }
        if b.iv == Interval::point(0) {
            return a.clone();
        }
        let iv = Interval::new(a.iv.lo + b.iv.lo, a.iv.hi + b.iv.hi);
        self.addsub(a, b, false, iv)
    }

    /// Balanced reduction by operand count.
    fn sum_tree(&mut self, mut terms: Vec<Word>) -> Word {
        if terms.is_empty() {
            return self.zero();
        }
        while terms.len() > 1 {
            let mut next = Vec::with_capacity(terms.len().div_ceil(2));
            let mut it = terms.into_iter();
            while let Some(a) = it.next() {
                match it.next() {
                    Some(b) => next.push(self.add(&a, &b)),
                    None => next.push(a),
                }
            }
            terms = next;
        }
        terms.pop().expect("one term left")
    }

    /// `pos − neg` where `iv` is a known enclosure of the result.
    fn difference(&mut self, pos: Vec<Word>, neg: Vec<Word>, iv: Interval) -> Word {
        let p = self.sum_tree(pos);
        if neg.is_empty() {
            return Word { bits: p.bits, iv };
        }
        let n = self.sum_tree(neg);
        self.addsub(&p, &n, true, iv)
    }

    /// `m · x` for a nonnegative constant `m` and a nonnegative word `x`.
    fn mul_const(&mut self, x: &Word, m: i64) -> Word {
        debug_assert!(m >= 0 && x.iv.lo >= 0);
        if m == 0 || x.iv == Interval::point(0) {
            return self.zero();
        }
        let csd = csd_decompose(m);
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for &(shift, sign) in &csd.digits {
            let t = self.shl(x, shift);
            if sign > 0 {
                pos.push(t);
            } else {
                neg.push(t);
            }
        }
        let iv = Interval::new(m * x.iv.lo, m * x.iv.hi);
        self.difference(pos, neg, iv)
    }

    /// `Σ w_i · x_i + bias` for nonnegative inputs.
    fn weighted_sum(&mut self, xs: &[Word], ws: &[i64], bias: i64) -> Word {
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        let (mut lo, mut hi) = (bias, bias);
        for (x, &w) in xs.iter().zip(ws) {
            let a = w * x.iv.lo;
            let b = w * x.iv.hi;
            lo += a.min(b);
            hi += a.max(b);
            if w == 0 {
                continue;
            }
            let p = self.mul_const(x, w.abs());
            if w > 0 {
                pos.push(p);
            } else {
                neg.push(p);
            }
        }
        if bias > 0 {
            pos.push(self.constant(bias));
        } else if bias < 0 {
            neg.push(self.constant(-bias));
        }
        let iv = Interval::new(lo, hi);
        if pos.is_empty() && !neg.is_empty() {
            let n = self.sum_tree(neg);
            let z = self.zero();
            return self.addsub(&z, &n, true, iv);
        }
        self.difference(pos, neg, iv)
    }

    fn relu(&mut self, s: &Word) -> Word {
        let iv = s.iv.relu();
        if !s.signed() {
            return s.clone();
        }
        let width = iv.width() as usize;
        let sign = *s.bits.last().expect("signed word");
        let keep = self.gate(CellFunction::Inv, &[sign]);
        let bits = (0..width)
            .map(|i| self.gate(CellFunction::And2, &[s.bits[i], keep]))
            .collect();
        Word { bits, iv }
    }

    /// `a > b`.
    fn greater(&mut self, a: &Word, b: &Word) -> NetId {
        let iv = Interval::new(b.iv.lo - a.iv.hi, b.iv.hi - a.iv.lo);
        if iv.hi < 0 {
            return self.konst(true);
        }
        if iv.lo >= 0 {
            return self.konst(false);
        }
        let d = self.addsub(b, a, true, iv);
        *d.bits.last().expect("signed difference")
    }

    /// `s ? b : a`, bitwise over the hull of both intervals.
    fn select(&mut self, s: NetId, a: &Word, b: &Word) -> Word {
        let iv = Interval::new(a.iv.lo.min(b.iv.lo), a.iv.hi.max(b.iv.hi));
        let width = iv.width() as usize;
        let bits = (0..width)
            .map(|i| {
                let ai = self.bit(a, i);
                let bi = self.bit(b, i);
                self.gate(CellFunction::Mux2, &[s, ai, bi])
            })
            .collect();
        Word { bits, iv }
    }

    /// Tournament argmax; the lower index wins ties.
    fn argmax(&mut self, values: &[Word], index_bits: u32) -> Word {
        let mut level: Vec<(Word, Word)> = values
            .iter()
            .enumerate()
            .map(|(i, v)| (v.clone(), self.constant(i as i64)))
            .collect();
        while level.len() > 1 {
            let mut next = Vec::with_capacity(level.len().div_ceil(2));
            let mut it = level.into_iter();
            while let Some(l) = it.next() {
                match it.next() {
                    Some(r) => {
                        let gt = self.greater(&r.0, &l.0);
                        let v = self.select(gt, &l.0, &r.0);
                        let ix = self.select(gt, &l.1, &r.1);
                        next.push((v, ix));
                    }
                    None => next.push(l),
                }
            }
            level = next;
        }
        let (_, ix) = level.pop().expect("nonempty argmax");
        let bits = self.extend(&ix, index_bits as usize);
        Word {
            bits,
            iv: ix.iv,
        }
    }

    /// Pairwise decisions to vote counts, then argmax over the counts.
    fn vote(&mut self, sums: &[Word], k: usize, index_bits: u32) -> Word {
        let mut pos = Vec::with_capacity(sums.len());
        for s in sums {
            let p = if s.iv.hi <= 0 {
                self.konst(false)
            } else if s.iv.lo > 0 {
                self.konst(true)
            } else {
                let any = self.or_tree(&s.bits);
                if s.signed() {
                    let sign = *s.bits.last().expect("signed word");
                    let ns = self.gate(CellFunction::Inv, &[sign]);
                    self.gate(CellFunction::And2, &[ns, any])
                } else {
                    any
                }
            };
            pos.push(p);
        }
        let mut ballots: Vec<Vec<Word>> = vec![Vec::new(); k];
        for ((i, j), &p) in class_pairs(k).zip(&pos) {
            let np = self.gate(CellFunction::Inv, &[p]);
            ballots[i].push(Word {
                bits: vec![p],
                iv: Interval::new(0, 1),
            });
            ballots[j].push(Word {
                bits: vec![np],
                iv: Interval::new(0, 1),
            });
        }
        let counts: Vec<Word> = ballots.into_iter().map(|b| self.sum_tree(b)).collect();
        self.argmax(&counts, index_bits)
    }

    fn or_tree(&mut self, bits: &[NetId]) -> NetId {
        let mut level = bits.to_vec();
        if level.is_empty() {
            return self.konst(false);
        }
        while level.len() > 1 {
            let mut next = Vec::with_capacity(level.len().div_ceil(2));
            for pair in level.chunks(2) {
                next.push(if pair.len() == 2 {
                    self.gate(CellFunction::Or2, &[pair[0], pair[1]])
                } else {
                    pair[0]
                });
            }
            level = next;
        }
        level[0]
    }

    /// Round-to-nearest at `frac` bits, subtract `min_label`, clamp to `[0, k-1]`.
    fn regress_decode(&mut self, y: &Word, frac: u32, min_label: i64, k: usize, index_bits: u32) -> Word {
        let half = if frac == 0 { 0 } else { 1i64 << (frac - 1) };
        let h = self.constant(half);
        let r = self.add(y, &h);
        // arithmetic shift right by frac
        let shifted_iv = Interval::new(r.iv.lo >> frac, r.iv.hi >> frac);
        let sbits: Vec<NetId> = (frac as usize..(frac as usize + shifted_iv.width() as usize))
            .map(|i| self.bit(&r, i))
            .collect();
        let shifted = Word {
            bits: sbits,
            iv: shifted_iv,
        };
        let m = self.constant(min_label);
        let iv = Interval::new(shifted.iv.lo - min_label, shifted.iv.hi - min_label);
        let idx = if min_label == 0 {
            shifted
        } else {
            self.addsub(&shifted, &m, true, iv)
        };
        let top = self.constant(k as i64 - 1);
        let zero = self.zero();
        let below = if idx.signed() {
            *idx.bits.last().expect("signed word")
        } else {
            self.konst(false)
        };
        let above = self.greater(&idx, &top);
        let low_bits = Word {
            bits: self.extend(&idx, index_bits as usize),
            iv: Interval::new(0, (1i64 << index_bits) - 1),
        };
        let floor = self.select(below, &low_bits, &zero);
        let clamped = self.select(above, &floor, &top);
        Word {
            bits: self.extend(&clamped, index_bits as usize),
            iv: Interval::new(0, k as i64 - 1),
        }
    }

    fn output(&mut self, name: String, w: &Word, width: usize, signed: bool, role: BusRole) {
        let bits = self.extend(w, width);
        self.outputs.push(Bus {
            name,
            bits,
            signed,
            role,
        });
    }

    fn finish(self, meta: NetlistMeta) -> Netlist {
        Netlist {
            net_count: self.next,
            inputs: self.inputs,
            outputs: self.outputs,
            constants: self.constants,
            gates: self.gates,
            meta,
        }
    }
}

/// Width of the decoded class-index bus.
pub fn class_index_bits(k: usize) -> u32 {
    unsigned_width((k.max(2) - 1) as u64)
}

/// Raw (unsimplified) multiplier `|w| · x` for `x` in `[lo, hi]`, `lo ≥ 0`.
pub fn multiplier_netlist(w: i64, x: Interval) -> Netlist {
    let mut b = Builder::new();
    let xw = b.input("x".into(), x.width(), x.hi);
    let xw = Word { bits: xw.bits, iv: x };
    let p = b.mul_const(&xw, w.abs());
    let width = p.iv.width() as usize;
    b.output("p".into(), &p, width, false, BusRole::Significance);
    b.finish(NetlistMeta::default()).const_propagate()
}

/// Bespoke multiplier for an `input_bits`-bit unsigned input and its area.
pub fn synth_multiplier(w: i64, input_bits: u32, lib: &CellLibrary) -> (Netlist, f64) {
    let x = Interval::new(0, (1i64 << input_bits) - 1);
    let n = multiplier_netlist(w, x);
    let a = area_of(&n, lib);
    (n, a)
}

pub fn multiplier_area(w: i64, x: Interval, lib: &CellLibrary) -> f64 {
    area_of(&multiplier_netlist(w, x), lib)
}

/// Σ of cell areas.
pub fn area_of(n: &Netlist, lib: &CellLibrary) -> f64 {
    n.area(lib)
}

/// Multiplier areas for every coefficient in `[lo, hi]` at one input interval.
#[derive(Debug, Clone)]
pub struct AreaTable {
    pub input: Interval,
    pub lo: i64,
    areas: Vec<f64>,
}

impl AreaTable {
    pub fn new(lo: i64, hi: i64, input: Interval, lib: &CellLibrary) -> AreaTable {
        // area depends on |w| only
        let top = lo.abs().max(hi.abs());
        let by_mag: Vec<f64> = (0..=top)
            .into_par_iter()
            .map(|m| multiplier_area(m, input, lib))
            .collect();
        let areas = (lo..=hi).map(|w| by_mag[w.unsigned_abs() as usize]).collect();
        AreaTable { input, lo, areas }
    }

    pub fn hi(&self) -> i64 {
        self.lo + self.areas.len() as i64 - 1
    }

    pub fn area(&self, w: i64) -> f64 {
        self.areas[(w - self.lo) as usize]
    }
}

/// A single weighted sum as a standalone netlist, with its sum as output.
pub fn synth_weighted_sum(ws: &[i64], bias: i64, inputs: &[Interval]) -> Netlist {
    let mut b = Builder::new();
    let xs: Vec<Word> = inputs
        .iter()
        .enumerate()
        .map(|(i, iv)| {
            let w = b.input(format!("x{i}"), iv.width(), iv.hi);
            Word { bits: w.bits, iv: *iv }
        })
        .collect();
    let s = b.weighted_sum(&xs, ws, bias);
    let width = s.iv.width().max(1) as usize;
    let signed = s.signed();
    b.output("S".into(), &s, width, signed, BusRole::Significance);
    b.finish(NetlistMeta::default()).const_propagate()
}

/// Compile a quantized model into a simplified bespoke netlist.
///
/// Classifiers expose one significance bus per argmax input (MLP-C output
/// neuron or SVM-C pairwise classifier); regressors expose the raw
/// accumulator. All significance buses are sign-extended to the model's
/// accumulator width. A final `class` bus carries the decoded class index.
pub fn synth_model(m: &QuantizedModel) -> Netlist {
    let mut b = Builder::new();
    let ib = m.spec.input_bits;
    let xmax = i64::from(m.spec.input_max());
    let xs: Vec<Word> = (0..m.n_features)
        .map(|i| b.input(format!("x{i}"), ib, xmax))
        .collect();

    let l1 = &m.layers[0];
    let s1: Vec<Word> = (0..l1.outputs())
        .map(|j| b.weighted_sum(&xs, &l1.weights[j], l1.bias_term(j)))
        .collect();
    let sums = if m.kind.is_mlp() {
        let hidden: Vec<Word> = s1.iter().map(|s| b.relu(s)).collect();
        let l2 = &m.layers[1];
        (0..l2.outputs())
            .map(|j| b.weighted_sum(&hidden, &l2.weights[j], l2.bias_term(j)))
            .collect()
    } else {
        s1
    };

    let acc = *m.accumulator_widths().last().expect("at least one layer") as usize;
    let k = m.n_classes();
    let ibits = class_index_bits(k);
    let name = |j: usize| {
        if m.kind.is_classifier() {
            format!("O{j}")
        } else {
            "Y".to_string()
        }
    };
    for (j, s) in sums.iter().enumerate() {
        b.output(name(j), s, acc, true, BusRole::Significance);
    }

    b.role = GateRole::Decode;
    let class = match m.kind {
        ModelKind::MlpC => b.argmax(&sums, ibits),
        ModelKind::SvmC => b.vote(&sums, k, ibits),
        ModelKind::MlpR | ModelKind::SvmR => {
            b.regress_decode(&sums[0], m.frac_bits(), m.class_labels[0], k, ibits)
        }
    };
    b.output("class".into(), &class, ibits as usize, false, BusRole::Class);

    let meta = NetlistMeta {
        model_kind: Some(m.kind),
        clock_period: None,
        class_labels: m.class_labels.clone(),
    };
    b.finish(meta).const_propagate()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logicsim::simulate;
    use crate::model_ir::{quantize, FixedPointSpec, TrainedModel};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lib() -> CellLibrary {
        CellLibrary::default_printed()
    }

    #[test]
    fn csd_examples() {
        assert_eq!(csd_decompose(16).digits, vec![(4, 1)]);
        assert_eq!(csd_decompose(7).digits, vec![(0, -1), (3, 1)]);
        assert!(csd_decompose(0).digits.is_empty());
        assert_eq!(csd_decompose(-3).eval(), -3);
    }

    /// Minimal nonzero digits among signed-binary forms, by dynamic programming.
    fn min_signed_digits(w: i64) -> usize {
        fn go(n: i64, memo: &mut std::collections::HashMap<i64, usize>) -> usize {
            if n == 0 {
                return 0;
            }
            if n.abs() == 1 {
                return 1;
            }
            if let Some(&v) = memo.get(&n) {
                return v;
            }
            let r = if n.rem_euclid(2) == 0 {
                go(n.div_euclid(2), memo)
            } else {
                1 + go((n - 1).div_euclid(2), memo).min(go((n + 1).div_euclid(2), memo))
            };
            memo.insert(n, r);
            r
        }
        go(w, &mut Default::default())
    }

    #[test]
    fn csd_is_canonical_and_minimal() {
        for w in -300i64..=300 {
            let c = csd_decompose(w);
            assert_eq!(c.eval(), w);
            for pair in c.digits.windows(2) {
                assert!(pair[1].0 > pair[0].0 + 1, "adjacent digits for {w}");
            }
            assert_eq!(c.nonzero_digits(), min_signed_digits(w), "w = {w}");
        }
    }

    #[test]
    fn trivial_multipliers_are_free() {
        let l = lib();
        for w in [0i64, 1, -1, 2, 64, -64, -128] {
            let (n, a) = synth_multiplier(w, 4, &l);
            assert_eq!(a, 0.0, "w = {w}");
            assert_eq!(n.gate_count(), 0);
        }
    }

    fn product_bus(n: &Netlist, x: u32) -> i64 {
        let r = simulate(n, &[vec![x]]).unwrap();
        r.bus_value(0, 0)
    }

    #[test]
    fn multiplier_exhaustive() {
        for w in [45i64, 7, 127, 93, 3, 85] {
            let (n, _) = synth_multiplier(w, 4, &lib());
            for x in 0..16u32 {
                assert_eq!(product_bus(&n, x), w * i64::from(x), "w = {w}, x = {x}");
            }
        }
    }

    #[test]
    fn bm45_area_is_its_cells() {
        let l = lib();
        let (n, a) = synth_multiplier(45, 4, &l);
        let recount: f64 = n.gates.iter().map(|g| l.cell(g.function).area).sum();
        assert!((a - recount).abs() < 1e-12);
        assert!(a > 0.0);
    }

    #[test]
    fn sign_and_shift_area_laws() {
        let l = lib();
        let t = AreaTable::new(-128, 127, Interval::new(0, 15), &l);
        for w in 1..=63 {
            assert_eq!(t.area(w), t.area(-w));
            assert!(t.area(2 * w) <= t.area(w) + 1e-9, "w = {w}");
        }
    }

    #[test]
    fn weighted_sum_exhaustive_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let ws: Vec<i64> = (0..2).map(|_| rng.gen_range(-128..128)).collect();
            let bias = rng.gen_range(-2000..2000);
            let ivs = vec![Interval::new(0, 15); 2];
            let n = synth_weighted_sum(&ws, bias, &ivs);
            for x0 in 0..16u32 {
                for x1 in 0..16u32 {
                    let r = simulate(&n, &[vec![x0, x1]]).unwrap();
                    let want = ws[0] * i64::from(x0) + ws[1] * i64::from(x1) + bias;
                    assert_eq!(r.bus_value(0, 0), want);
                }
            }
        }
    }

    #[test]
    fn identity_svr() {
        let m = TrainedModel {
            kind: ModelKind::SvmR,
            topology: vec![1],
            weights: vec![vec![vec![1.0]]],
            biases: vec![vec![0.0]],
            n_features: 1,
            n_classes: 16,
            class_labels: (0..16).collect(),
        };
        let spec = FixedPointSpec {
            input_bits: 4,
            coeff_bits: 2,
        };
        let q = quantize(&m, spec).unwrap();
        assert_eq!(q.scale, 0);
        let n = synth_model(&q);
        let xs: Vec<Vec<u32>> = (0..16).map(|x| vec![x]).collect();
        let r = simulate(&n, &xs).unwrap();
        for (t, x) in xs.iter().enumerate() {
            assert_eq!(r.class_index(t), q.infer(x));
        }
    }

    fn random_model(kind: ModelKind, nf: usize, h: usize, k: usize, rng: &mut ChaCha8Rng) -> QuantizedModel {
        let mut mat = |r: usize, c: usize| -> Vec<Vec<f64>> {
            (0..r).map(|_| (0..c).map(|_| rng.gen_range(-3.0..3.0)).collect()).collect()
        };
        let (topology, weights, biases) = match kind {
            ModelKind::MlpC | ModelKind::MlpR => {
                let o = if kind == ModelKind::MlpC { k } else { 1 };
                let b = mat(2, h.max(o));
                (
                    vec![nf, h, o],
                    vec![mat(h, nf), mat(o, h)],
                    vec![b[0][..h].to_vec(), b[1][..o].to_vec()],
                )
            }
            ModelKind::SvmC => {
                let t = k * (k - 1) / 2;
                (vec![t], vec![mat(t, nf)], vec![mat(1, t)[0].clone()])
            }
            ModelKind::SvmR => (vec![1], vec![mat(1, nf)], vec![mat(1, 1)[0].clone()]),
        };
        let tm = TrainedModel {
            kind,
            topology,
            weights,
            biases,
            n_features: nf,
            n_classes: k,
            class_labels: (3..3 + k as i64).collect(),
        };
        quantize(&tm, FixedPointSpec::default()).unwrap()
    }

    #[test]
    fn random_models_match_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for kind in [ModelKind::MlpC, ModelKind::MlpR, ModelKind::SvmC, ModelKind::SvmR] {
            for _ in 0..3 {
                let q = random_model(kind, 4, 3, 3, &mut rng);
                let n = synth_model(&q);
                n.audit().unwrap();
                let xs: Vec<Vec<u32>> = (0..500)
                    .map(|_| (0..4).map(|_| rng.gen_range(0..16)).collect())
                    .collect();
                let r = simulate(&n, &xs).unwrap();
                for (t, x) in xs.iter().enumerate() {
                    assert_eq!(r.class_index(t), q.infer(x), "{kind} vector {x:?}");
                    let sig = q.significance(x);
                    for (j, v) in sig.iter().enumerate() {
                        assert_eq!(r.bus_value(j, t), *v);
                    }
                }
            }
        }
    }

    #[test]
    fn three_class_svm_structure() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let q = random_model(ModelKind::SvmC, 5, 0, 3, &mut rng);
        let n = synth_model(&q);
        assert_eq!(n.output_bus(BusRole::Significance).count(), 3);
        let xs: Vec<Vec<u32>> = (0..1000)
            .map(|_| (0..5).map(|_| rng.gen_range(0..16)).collect())
            .collect();
        let r = simulate(&n, &xs).unwrap();
        for (t, x) in xs.iter().enumerate() {
            assert_eq!(r.class_index(t), q.infer(x));
        }
    }
}
