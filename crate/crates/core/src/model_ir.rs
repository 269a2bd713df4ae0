//! Trained-model ingestion, fixed-point quantization and the integer
//! reference inference that every synthesized circuit must reproduce.
//!
//! Inputs are unsigned `input_bits`-bit fractions of `[0, 1]`. All
//! coefficients share one power-of-two scale `2^s`, chosen as the finest
//! scale at which the largest magnitude still fits `coeff_bits`.
//!
//! The integer datapath is
//!
//! ```text
//! SVM:  S   = Σ x_q·w + (b << ib)                      (F = ib + s)
//! MLP:  h_j = max(0, Σ x_q·w1 + (b1 << ib))
//!       O   = Σ h·w2 + (b2 << (ib + s))                (F = ib + 2s)
//! ```
//!
//! where `F` is the number of fractional bits of the final sums.

use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "MLP-C")]
    MlpC,
    #[serde(rename = "MLP-R")]
    MlpR,
    #[serde(rename = "SVM-C")]
    SvmC,
    #[serde(rename = "SVM-R")]
    SvmR,
}

impl ModelKind {
    pub fn is_classifier(self) -> bool {
        matches!(self, ModelKind::MlpC | ModelKind::SvmC)
    }

    pub fn is_mlp(self) -> bool {
        matches!(self, ModelKind::MlpC | ModelKind::MlpR)
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::MlpC => "MLP-C",
            ModelKind::MlpR => "MLP-R",
            ModelKind::SvmC => "SVM-C",
            ModelKind::SvmR => "SVM-R",
        }
    }

    pub fn parse(s: &str) -> Option<ModelKind> {
        match s {
            "MLP-C" => Some(ModelKind::MlpC),
            "MLP-R" => Some(ModelKind::MlpR),
            "SVM-C" => Some(ModelKind::SvmC),
            "SVM-R" => Some(ModelKind::SvmR),
            _ => None,
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed model file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported model kind {0:?}")]
    UnsupportedKind(String),
    #[error("inconsistent shapes: {0}")]
    Shape(String),
    #[error("invalid fixed-point spec: {0}")]
    Spec(String),
    #[error("dataset {path}, line {line}: {msg}")]
    Dataset {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("input has {got} features, model expects {expected}")]
    InputWidth { got: usize, expected: usize },
}

#[derive(Deserialize)]
struct RawModel {
    kind: String,
    topology: Vec<usize>,
    weights: Vec<Vec<Vec<f64>>>,
    biases: Vec<Vec<f64>>,
    n_features: usize,
    n_classes: usize,
    class_labels: Vec<i64>,
}

/// Real-valued model as exported from the training environment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainedModel {
    pub kind: ModelKind,
    pub topology: Vec<usize>,
    /// One matrix per layer, rows are output neurons / classifiers.
    pub weights: Vec<Vec<Vec<f64>>>,
    pub biases: Vec<Vec<f64>>,
    pub n_features: usize,
    pub n_classes: usize,
    pub class_labels: Vec<i64>,
}

fn check_matrix(m: &[Vec<f64>], rows: usize, cols: usize, what: &str) -> Result<(), ModelError> {
    if m.len() != rows {
        return Err(ModelError::Shape(format!(
            "{what} has {} rows, expected {rows}",
            m.len()
        )));
    }
    if let Some((r, row)) = m.iter().enumerate().find(|(_, r)| r.len() != cols) {
        return Err(ModelError::Shape(format!(
            "{what} row {r} has {} columns, expected {cols}",
            row.len()
        )));
    }
    if m.iter().flatten().any(|v| !v.is_finite()) {
        return Err(ModelError::Shape(format!("{what} contains a non-finite value")));
    }
    Ok(())
}

fn check_vector(v: &[f64], len: usize, what: &str) -> Result<(), ModelError> {
    if v.len() != len {
        return Err(ModelError::Shape(format!(
            "{what} has {} entries, expected {len}",
            v.len()
        )));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(ModelError::Shape(format!("{what} contains a non-finite value")));
    }
    Ok(())
}

impl TrainedModel {
    pub fn from_json(text: &str) -> Result<TrainedModel, ModelError> {
        let raw: RawModel = serde_json::from_str(text)?;
        let kind = ModelKind::parse(&raw.kind).ok_or(ModelError::UnsupportedKind(raw.kind))?;
        let m = TrainedModel {
            kind,
            topology: raw.topology,
            weights: raw.weights,
            biases: raw.biases,
            n_features: raw.n_features,
            n_classes: raw.n_classes,
            class_labels: raw.class_labels,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<TrainedModel, ModelError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
            path: path.display().to_string(),
            source,
        })?;
        TrainedModel::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let nf = self.n_features;
        let k = self.n_classes;
        if nf == 0 {
            return Err(ModelError::Shape("n_features must be positive".into()));
        }
        if self.class_labels.len() != k || k == 0 {
            return Err(ModelError::Shape(format!(
                "{} class labels for n_classes = {k}",
                self.class_labels.len()
            )));
        }
        let mut sorted = self.class_labels.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != k {
            return Err(ModelError::Shape("duplicate class labels".into()));
        }
        let layers = if self.kind.is_mlp() { 2 } else { 1 };
        if self.weights.len() != layers || self.biases.len() != layers {
            return Err(ModelError::Shape(format!(
                "{} expects {layers} weight layers, found {} (biases {})",
                self.kind,
                self.weights.len(),
                self.biases.len()
            )));
        }
        match self.kind {
            ModelKind::MlpC | ModelKind::MlpR => {
                let outs = if self.kind == ModelKind::MlpC { k } else { 1 };
                if self.topology.len() != 3 {
                    return Err(ModelError::Shape(format!(
                        "MLP topology must be [inputs, hidden, outputs], got {:?}",
                        self.topology
                    )));
                }
                let (i, h, o) = (self.topology[0], self.topology[1], self.topology[2]);
                if i != nf || o != outs || h == 0 {
                    return Err(ModelError::Shape(format!(
                        "topology {:?} does not match {nf} features / {outs} outputs",
                        self.topology
                    )));
                }
                check_matrix(&self.weights[0], h, nf, "hidden weights")?;
                check_matrix(&self.weights[1], o, h, "output weights")?;
                check_vector(&self.biases[0], h, "hidden biases")?;
                check_vector(&self.biases[1], o, "output biases")?;
            }
            ModelKind::SvmC | ModelKind::SvmR => {
                let t = if self.kind == ModelKind::SvmC {
                    if k < 2 {
                        return Err(ModelError::Shape("SVM-C needs at least 2 classes".into()));
                    }
                    k * (k - 1) / 2
                } else {
                    1
                };
                if self.topology != [t] {
                    return Err(ModelError::Shape(format!(
                        "SVM topology {:?}, expected [{t}]",
                        self.topology
                    )));
                }
                check_matrix(&self.weights[0], t, nf, "classifier weights")?;
                check_vector(&self.biases[0], t, "intercepts")?;
            }
        }
        if !self.kind.is_classifier() {
            let contiguous = self.class_labels.windows(2).all(|w| w[1] == w[0] + 1);
            if !contiguous {
                return Err(ModelError::Shape(
                    "regressor labels must be ascending consecutive integers".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Bit widths of the bespoke fixed-point datapath.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixedPointSpec {
    pub input_bits: u32,
    pub coeff_bits: u32,
}

impl Default for FixedPointSpec {
    fn default() -> Self {
        FixedPointSpec {
            input_bits: 4,
            coeff_bits: 8,
        }
    }
}

/// Largest exponent tried when picking the coefficient scale.
const MAX_SCALE: i32 = 24;

impl FixedPointSpec {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(1..=16).contains(&self.input_bits) {
            return Err(ModelError::Spec(format!(
                "input_bits = {} outside 1..=16",
                self.input_bits
            )));
        }
        if !(2..=16).contains(&self.coeff_bits) {
            return Err(ModelError::Spec(format!(
                "coeff_bits = {} outside 2..=16",
                self.coeff_bits
            )));
        }
        Ok(())
    }

    pub fn coeff_min(&self) -> i64 {
        -(1i64 << (self.coeff_bits - 1))
    }

    pub fn coeff_max(&self) -> i64 {
        (1i64 << (self.coeff_bits - 1)) - 1
    }

    pub fn input_max(&self) -> u32 {
        (1u32 << self.input_bits) - 1
    }

    /// Saturating input quantizer for a feature normalized to `[0, 1]`.
    pub fn quantize_input(&self, x: f64) -> u32 {
        let q = (x * f64::from(1u32 << self.input_bits)).round_ties_even();
        q.clamp(0.0, f64::from(self.input_max())) as u32
    }

    /// Finest power-of-two exponent at which `max_abs` fits the coefficient range.
    pub fn scale_exponent(&self, max_abs: f64) -> i32 {
        if max_abs == 0.0 {
            return 0;
        }
        let hi = self.coeff_max() as f64;
        let mut s = MAX_SCALE;
        while s > 0 && (max_abs * 2f64.powi(s)).round_ties_even() > hi {
            s -= 1;
        }
        s
    }
}

/// One integer weighted-sum layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QLayer {
    /// Rows are output neurons / classifiers.
    pub weights: Vec<Vec<i64>>,
    /// Biases at coefficient scale; added as `bias << bias_shift`.
    pub biases: Vec<i64>,
    pub bias_shift: u32,
}

impl QLayer {
    pub fn outputs(&self) -> usize {
        self.weights.len()
    }

    pub fn fan_in(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn bias_term(&self, j: usize) -> i64 {
        self.biases[j] << self.bias_shift
    }

    fn eval(&self, x: &[i64]) -> Vec<i64> {
        self.weights
            .iter()
            .enumerate()
            .map(|(j, row)| row.iter().zip(x).map(|(w, v)| w * v).sum::<i64>() + self.bias_term(j))
            .collect()
    }
}

/// Closed integer interval of a signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Interval {
    pub lo: i64,
    pub hi: i64,
}

impl Interval {
    pub fn new(lo: i64, hi: i64) -> Interval {
        debug_assert!(lo <= hi);
        Interval { lo, hi }
    }

    pub fn point(v: i64) -> Interval {
        Interval { lo: v, hi: v }
    }

    pub fn is_signed(&self) -> bool {
        self.lo < 0
    }

    /// Bits needed for a two's-complement (if signed) or plain binary word.
    pub fn width(&self) -> u32 {
        if self.is_signed() {
            signed_width(self.lo, self.hi)
        } else {
            unsigned_width(self.hi as u64)
        }
    }

    pub fn relu(&self) -> Interval {
        Interval::new(self.lo.max(0), self.hi.max(0))
    }
}

/// Bits needed to hold `v` unsigned (0 needs 0 bits).
pub fn unsigned_width(v: u64) -> u32 {
    64 - v.leading_zeros()
}

/// Two's-complement bits needed to hold every value in `[lo, hi]`.
pub fn signed_width(lo: i64, hi: i64) -> u32 {
    let mut w = 1;
    while w < 64 && !(lo >= -(1i64 << (w - 1)) && hi < (1i64 << (w - 1))) {
        w += 1;
    }
    w
}

/// Fixed-point model with integer parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizedModel {
    pub kind: ModelKind,
    pub spec: FixedPointSpec,
    /// Coefficients are real values times `2^scale`.
    pub scale: i32,
    pub layers: Vec<QLayer>,
    pub n_features: usize,
    pub class_labels: Vec<i64>,
}

/// Quantize with round-half-even and a saturating clamp on weights.
pub fn quantize(model: &TrainedModel, spec: FixedPointSpec) -> Result<QuantizedModel, ModelError> {
    spec.validate()?;
    model.validate()?;
    let max_abs = model
        .weights
        .iter()
        .flatten()
        .flatten()
        .fold(0.0f64, |m, w| m.max(w.abs()));
    let s = spec.scale_exponent(max_abs);
    let f = 2f64.powi(s);
    let qw = |w: f64| ((w * f).round_ties_even() as i64).clamp(spec.coeff_min(), spec.coeff_max());
    let qb = |b: f64| (b * f).round_ties_even() as i64;
    let ib = spec.input_bits;
    let layers = model
        .weights
        .iter()
        .zip(&model.biases)
        .enumerate()
        .map(|(l, (w, b))| QLayer {
            weights: w.iter().map(|row| row.iter().map(|&v| qw(v)).collect()).collect(),
            biases: b.iter().map(|&v| qb(v)).collect(),
            bias_shift: if l == 0 { ib } else { ib + s as u32 },
        })
        .collect();
    Ok(QuantizedModel {
        kind: model.kind,
        spec,
        scale: s,
        layers,
        n_features: model.n_features,
        class_labels: model.class_labels.clone(),
    })
}

impl QuantizedModel {
    pub fn n_classes(&self) -> usize {
        self.class_labels.len()
    }

    /// Fractional bits of the final weighted sums.
    pub fn frac_bits(&self) -> u32 {
        let ib = self.spec.input_bits;
        let s = self.scale as u32;
        if self.kind.is_mlp() {
            ib + 2 * s
        } else {
            ib + s
        }
    }

    /// Number of multiplicative coefficients (biases excluded).
    pub fn coefficient_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.iter().map(Vec::len).sum::<usize>())
            .sum()
    }

    /// Number of weighted sums (neurons or classifiers).
    pub fn weighted_sum_count(&self) -> usize {
        self.layers.iter().map(QLayer::outputs).sum()
    }

    /// Per-layer value intervals of each weighted sum (before ReLU).
    pub fn sum_intervals(&self) -> Vec<Vec<Interval>> {
        let xmax = i64::from(self.spec.input_max());
        let mut inputs: Vec<Interval> = vec![Interval::new(0, xmax); self.n_features];
        let mut out = Vec::with_capacity(self.layers.len());
        for (l, layer) in self.layers.iter().enumerate() {
            let sums: Vec<Interval> = layer
                .weights
                .iter()
                .enumerate()
                .map(|(j, row)| {
                    let mut lo = layer.bias_term(j);
                    let mut hi = lo;
                    for (w, x) in row.iter().zip(&inputs) {
                        let a = w * x.lo;
                        let b = w * x.hi;
                        lo += a.min(b);
                        hi += a.max(b);
                    }
                    Interval::new(lo, hi)
                })
                .collect();
            if l + 1 < self.layers.len() {
                inputs = sums.iter().map(Interval::relu).collect();
            }
            out.push(sums);
        }
        out
    }

    /// Declared accumulator width per layer: wide enough for every
    /// reachable sum and never below `input_bits + coeff_bits + ceil(log2 N)`.
    pub fn accumulator_widths(&self) -> Vec<u32> {
        self.sum_intervals()
            .iter()
            .zip(&self.layers)
            .map(|(sums, layer)| {
                let n = layer.fan_in() + 1;
                let floor = self.spec.input_bits
                    + self.spec.coeff_bits
                    + (usize::BITS - (n - 1).leading_zeros());
                let need = sums
                    .iter()
                    .map(|iv| signed_width(iv.lo.min(0), iv.hi.max(0)))
                    .max()
                    .unwrap_or(1);
                need.max(floor)
            })
            .collect()
    }

    fn check_input(&self, x: &[u32]) -> Result<(), ModelError> {
        if x.len() != self.n_features {
            return Err(ModelError::InputWidth {
                got: x.len(),
                expected: self.n_features,
            });
        }
        Ok(())
    }

    /// Hidden activations after ReLU (MLP only; empty for SVM).
    pub fn hidden(&self, x: &[u32]) -> Vec<i64> {
        if !self.kind.is_mlp() {
            return Vec::new();
        }
        let xi: Vec<i64> = x.iter().map(|&v| i64::from(v)).collect();
        self.layers[0].eval(&xi).into_iter().map(|v| v.max(0)).collect()
    }

    /// Values of the final weighted sums: the argmax inputs, the pairwise
    /// decision values, or the single regression accumulator.
    pub fn significance(&self, x: &[u32]) -> Vec<i64> {
        let xi: Vec<i64> = x.iter().map(|&v| i64::from(v)).collect();
        if self.kind.is_mlp() {
            self.layers[1].eval(&self.hidden(x))
        } else {
            self.layers[0].eval(&xi)
        }
    }

    /// Decoded prediction as an index into `class_labels`.
    pub fn decode(&self, sig: &[i64]) -> usize {
        match self.kind {
            ModelKind::MlpC => argmax_low(sig),
            ModelKind::SvmC => argmax_low(&self.votes(sig)),
            ModelKind::MlpR | ModelKind::SvmR => {
                let v = self.regression_value(sig[0]);
                (v - self.class_labels[0]) as usize
            }
        }
    }

    /// Vote tally of the 1-vs-1 classifiers, ordered `(0,1), (0,2), .., (k-2,k-1)`.
    pub fn votes(&self, sig: &[i64]) -> Vec<u32> {
        let k = self.n_classes();
        let mut votes = vec![0u32; k];
        for ((i, j), &s) in class_pairs(k).zip(sig) {
            if s > 0 {
                votes[i] += 1;
            } else {
                votes[j] += 1;
            }
        }
        votes
    }

    /// Round-to-nearest decode of a regression accumulator, clamped to labels.
    pub fn regression_value(&self, acc: i64) -> i64 {
        let f = self.frac_bits();
        let rounded = if f == 0 { acc } else { (acc + (1i64 << (f - 1))) >> f };
        let lo = self.class_labels[0];
        let hi = *self.class_labels.last().expect("nonempty labels");
        rounded.clamp(lo, hi)
    }

    /// Reference prediction (class index).
    pub fn infer(&self, x: &[u32]) -> usize {
        self.try_infer(x).expect("input width matches model")
    }

    pub fn try_infer(&self, x: &[u32]) -> Result<usize, ModelError> {
        self.check_input(x)?;
        Ok(self.decode(&self.significance(x)))
    }

    pub fn label_of(&self, index: usize) -> i64 {
        self.class_labels[index]
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("quantized model serializes")
    }

    pub fn from_json(text: &str) -> Result<QuantizedModel, ModelError> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Index of the first maximum.
pub fn argmax_low<T: PartialOrd + Copy>(v: &[T]) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    best
}

/// Lexicographic class pairs `(i, j)`, `i < j`.
pub fn class_pairs(k: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..k).flat_map(move |i| (i + 1..k).map(move |j| (i, j)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Split {
    Train,
    Test,
}

/// Quantized samples with their integer labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Vec<Vec<u32>>,
    pub labels: Vec<i64>,
    pub split: Split,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    /// Parse headerless CSV: real features in `[0, 1]`, integer label last.
    pub fn from_reader<R: std::io::Read>(
        reader: R,
        spec: FixedPointSpec,
        split: Split,
        origin: &str,
    ) -> Result<Dataset, ModelError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 1;
            let err = |msg: String| ModelError::Dataset {
                path: origin.to_string(),
                line,
                msg,
            };
            let rec = rec.map_err(|e| err(e.to_string()))?;
            if rec.len() < 2 {
                return Err(err("need at least one feature and a label".into()));
            }
            let label: i64 = rec[rec.len() - 1]
                .parse()
                .map_err(|_| err(format!("label {:?} is not an integer", &rec[rec.len() - 1])))?;
            let mut row = Vec::with_capacity(rec.len() - 1);
            for field in rec.iter().take(rec.len() - 1) {
                let v: f64 = field
                    .parse()
                    .map_err(|_| err(format!("feature {field:?} is not a number")))?;
                if !(-1e-9..=1.0 + 1e-9).contains(&v) {
                    return Err(err(format!("feature {v} outside [0, 1]")));
                }
                row.push(spec.quantize_input(v));
            }
            if let Some(first) = features.first() {
                let first: &Vec<u32> = first;
                if first.len() != row.len() {
                    return Err(err(format!(
                        "{} features, previous rows have {}",
                        row.len(),
                        first.len()
                    )));
                }
            }
            features.push(row);
            labels.push(label);
        }
        Ok(Dataset {
            features,
            labels,
            split,
        })
    }

    pub fn load(path: impl AsRef<Path>, spec: FixedPointSpec, split: Split) -> Result<Dataset, ModelError> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|source| ModelError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Dataset::from_reader(file, spec, split, &path.display().to_string())
    }

    /// Fraction of samples whose reference prediction matches the label.
    pub fn oracle_accuracy(&self, m: &QuantizedModel) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let hits = self
            .features
            .iter()
            .zip(&self.labels)
            .filter(|(x, &y)| m.label_of(m.infer(x)) == y)
            .count();
        hits as f64 / self.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mlp(kind: ModelKind, nf: usize, h: usize, o: usize, rng: &mut ChaCha8Rng) -> TrainedModel {
        let mut m = |r: usize, c: usize| -> Vec<Vec<f64>> {
            (0..r).map(|_| (0..c).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect()
        };
        let w1 = m(h, nf);
        let w2 = m(o, h);
        let b = m(2, h.max(o));
        let k = if kind == ModelKind::MlpC { o } else { 5 };
        TrainedModel {
            kind,
            topology: vec![nf, h, o],
            weights: vec![w1, w2],
            biases: vec![b[0][..h].to_vec(), b[1][..o].to_vec()],
            n_features: nf,
            n_classes: k,
            class_labels: (0..k as i64).collect(),
        }
    }

    #[test]
    fn two_class_svm_has_one_classifier() {
        let text = r#"{"kind":"SVM-C","topology":[1],"weights":[[[0.1,0.2,0.3,0.4]]],
            "biases":[[0.5]],"n_features":4,"n_classes":2,"class_labels":[0,1]}"#;
        let m = TrainedModel::from_json(text).unwrap();
        assert_eq!(m.kind, ModelKind::SvmC);
        assert_eq!(m.weights[0].len(), 1);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let text = r#"{"kind":"MLP-C","topology":[7,3,3],"weights":[[[0.0]],[[0.0]]],
            "biases":[[0.0],[0.0]],"n_features":7,"n_classes":3,"class_labels":[0,1,2]}"#;
        assert!(matches!(TrainedModel::from_json(text), Err(ModelError::Shape(_))));
        let bad_kind = text.replace("MLP-C", "RBF-SVM");
        assert!(matches!(
            TrainedModel::from_json(&bad_kind),
            Err(ModelError::UnsupportedKind(_))
        ));
    }

    #[test]
    fn seven_three_three_has_thirty_coefficients() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = mlp(ModelKind::MlpC, 7, 3, 3, &mut rng);
        let q = quantize(&m, FixedPointSpec::default()).unwrap();
        assert_eq!(q.coefficient_count(), 30);
    }

    #[test]
    fn quantize_half_and_quarter() {
        let m = TrainedModel {
            kind: ModelKind::SvmR,
            topology: vec![1],
            weights: vec![vec![vec![0.5, -0.25, 0.0]]],
            biases: vec![vec![0.0]],
            n_features: 3,
            n_classes: 2,
            class_labels: vec![0, 1],
        };
        let q = quantize(&m, FixedPointSpec::default()).unwrap();
        assert_eq!(q.scale, 7);
        assert_eq!(q.layers[0].weights[0], vec![64, -32, 0]);
    }

    #[test]
    fn quantized_coefficients_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let m = mlp(ModelKind::MlpC, 5, 4, 3, &mut rng);
            let q = quantize(&m, FixedPointSpec::default()).unwrap();
            for w in q.layers.iter().flat_map(|l| l.weights.iter().flatten()) {
                assert!((-128..=127).contains(w));
            }
            // per-coefficient error at most half an ulp
            let ulp = 2f64.powi(-q.scale);
            for (lq, lf) in q.layers.iter().zip(&m.weights) {
                for (rq, rf) in lq.weights.iter().zip(lf) {
                    for (&a, &b) in rq.iter().zip(rf) {
                        assert!((a as f64 * ulp - b).abs() <= 0.5 * ulp + 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn zero_model_predicts_class_zero() {
        let m = TrainedModel {
            kind: ModelKind::MlpC,
            topology: vec![2, 1, 3],
            weights: vec![vec![vec![0.0, 0.0]], vec![vec![0.0]; 3]],
            biases: vec![vec![0.0], vec![0.0; 3]],
            n_features: 2,
            n_classes: 3,
            class_labels: vec![0, 1, 2],
        };
        let q = quantize(&m, FixedPointSpec::default()).unwrap();
        assert_eq!(q.infer(&[7, 9]), 0);
    }

    #[test]
    fn three_class_svm_votes_three_pairs() {
        let pairs: Vec<_> = class_pairs(3).collect();
        assert_eq!(pairs, vec![(0, 1), (0, 2), (1, 2)]);
        let m = TrainedModel {
            kind: ModelKind::SvmC,
            topology: vec![3],
            weights: vec![vec![vec![1.0], vec![1.0], vec![-1.0]]],
            biases: vec![vec![0.0; 3]],
            n_features: 1,
            n_classes: 3,
            class_labels: vec![0, 1, 2],
        };
        let q = quantize(&m, FixedPointSpec::default()).unwrap();
        // x = 0: every decision is 0, so each pair votes for j
        assert_eq!(q.votes(&q.significance(&[0])), vec![0, 1, 2]);
        assert_eq!(q.infer(&[0]), 2);
        assert_eq!(q.votes(&q.significance(&[5])), vec![2, 0, 1]);
        assert_eq!(q.infer(&[5]), 0);
    }

    fn big_mlp_eval(q: &QuantizedModel, x: &[u32]) -> BigInt {
        let l1 = &q.layers[0];
        let l2 = &q.layers[1];
        let hidden: Vec<BigInt> = l1
            .weights
            .iter()
            .zip(&l1.biases)
            .map(|(row, &b)| {
                let mut acc = BigInt::from(b) * (BigInt::from(1) << l1.bias_shift);
                for (&w, &v) in row.iter().zip(x) {
                    acc += BigInt::from(w) * BigInt::from(v);
                }
                if acc < BigInt::from(0) {
                    BigInt::from(0)
                } else {
                    acc
                }
            })
            .collect();
        let mut acc = BigInt::from(l2.biases[0]) * (BigInt::from(1) << l2.bias_shift);
        for (&w, h) in l2.weights[0].iter().zip(&hidden) {
            acc += BigInt::from(w) * h;
        }
        acc
    }

    #[test]
    fn mlp_r_matches_bigint_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = mlp(ModelKind::MlpR, 5, 4, 1, &mut rng);
        let q = quantize(&m, FixedPointSpec::default()).unwrap();
        let widths = q.accumulator_widths();
        for _ in 0..20 {
            let x: Vec<u32> = (0..5).map(|_| rng.gen_range(0..16)).collect();
            let acc = big_mlp_eval(&q, &x);
            assert_eq!(BigInt::from(q.significance(&x)[0]), acc);
            let lim = BigInt::from(1) << (widths[1] - 1);
            assert!(acc < lim && acc >= -lim);
            // decode by exact rational rounding
            let f = q.frac_bits();
            let num: BigInt = acc * BigInt::from(2) + (BigInt::from(1) << f);
            let den = BigInt::from(1) << (f + 1);
            let quo: BigInt = &num / &den;
            let r: BigInt = &num % &den;
            let floor = if r < BigInt::from(0) { quo - 1 } else { quo };
            let v: i64 = floor.try_into().unwrap();
            assert_eq!(q.regression_value(q.significance(&x)[0]), v.clamp(0, 4));
        }
    }

    #[test]
    fn accumulator_width_lower_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = mlp(ModelKind::MlpC, 6, 3, 2, &mut rng);
        let q = quantize(&m, FixedPointSpec::default()).unwrap();
        let w = q.accumulator_widths();
        assert!(w[0] >= 4 + 8 + 3);
    }

    #[test]
    fn argmax_scale_invariance() {
        let v = [3i64, 9, 9, -2];
        assert_eq!(argmax_low(&v), 1);
        let scaled: Vec<i64> = v.iter().map(|x| x * 7).collect();
        assert_eq!(argmax_low(&scaled), 1);
    }

    #[test]
    fn input_quantizer_saturates() {
        let s = FixedPointSpec::default();
        assert_eq!(s.quantize_input(0.0), 0);
        assert_eq!(s.quantize_input(1.0), 15);
        assert_eq!(s.quantize_input(0.5), 8);
        assert_eq!(s.quantize_input(0.03125), 0); // 0.5 ulp ties to even
        assert_eq!(s.quantize_input(0.09375), 2);
    }

    #[test]
    fn csv_dataset_parses_and_validates() {
        let text = "0.0,1.0,2\n0.5,0.25,0\n";
        let d = Dataset::from_reader(text.as_bytes(), FixedPointSpec::default(), Split::Test, "t").unwrap();
        assert_eq!(d.features, vec![vec![0, 15], vec![8, 4]]);
        assert_eq!(d.labels, vec![2, 0]);
        let bad = "0.0,1.5,2\n";
        assert!(Dataset::from_reader(bad.as_bytes(), FixedPointSpec::default(), Split::Test, "t").is_err());
    }

    #[test]
    fn signed_widths() {
        assert_eq!(signed_width(-128, 127), 8);
        assert_eq!(signed_width(-129, 0), 9);
        assert_eq!(signed_width(0, 128), 9);
        assert_eq!(unsigned_width(15), 4);
        assert_eq!(unsigned_width(0), 0);
    }
}
