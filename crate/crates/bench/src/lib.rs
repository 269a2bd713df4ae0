//! Shared inputs for the benchmarks.

use std::path::PathBuf;

use printax_core::{quantize, Dataset, FixedPointSpec, QuantizedModel, Split, TrainedModel};

pub fn fixture_dir(dataset: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(dataset)
}

/// Quantized model plus its training and test splits.
pub fn load(dataset: &str, kind: &str) -> (QuantizedModel, Dataset, Dataset) {
    let dir = fixture_dir(dataset);
    let spec = FixedPointSpec::default();
    let t = TrainedModel::load(dir.join(format!("{kind}.json"))).expect("fixture model");
    let q = quantize(&t, spec).expect("fixture quantizes");
    let train = Dataset::load(dir.join("train.csv"), spec, Split::Train).expect("fixture train split");
    let test = Dataset::load(dir.join("test.csv"), spec, Split::Test).expect("fixture test split");
    (q, train, test)
}

/// `count` test vectors in replicated, shuffled order.
pub fn stream(test: &Dataset, count: usize) -> Vec<Vec<u32>> {
    printax_core::timing::build_vos_stimuli(test.len(), count, 7)
        .into_iter()
        .map(|i| test.features[i].clone())
        .collect()
}
