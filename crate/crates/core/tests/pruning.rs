//! Pruning against its parent on the bundled models.

use std::path::PathBuf;

use printax_core::celllib::CellLibrary;
use printax_core::logicsim::profile;
use printax_core::model_ir::{quantize, Dataset, FixedPointSpec, Split, TrainedModel};
use printax_core::power::power;
use printax_core::pruner::{compute_phi, default_tau_grid, phi_grid, prune, PruneConfig};
use printax_core::synth::synth_model;
use printax_core::timing::critical_path;

#[test]
fn pruned_power_never_exceeds_parent() {
    let lib = CellLibrary::default_printed();
    let spec = FixedPointSpec::default();
    let (mut worse, mut total) = (Vec::new(), 0);
    for ds in ["balance_scale", "iris", "redwine"] {
        for kind in ["mlp_c", "mlp_r", "svm_c", "svm_r"] {
            let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(ds);
            let q = quantize(&TrainedModel::load(dir.join(format!("{kind}.json"))).unwrap(), spec).unwrap();
            let train = Dataset::load(dir.join("train.csv"), spec, Split::Train).unwrap();
            let test = Dataset::load(dir.join("test.csv"), spec, Split::Test).unwrap();
            let n = synth_model(&q);
            let clock = critical_path(&n, &lib);
            let p = profile(&n, &train.features).unwrap();
            let sig = compute_phi(&n);
            let base = power(&n, &profile(&n, &test.features).unwrap(), &lib, 1.0, clock).unwrap().p_total;
            for tau_c in default_tau_grid() {
                for phi_c in phi_grid(&p, &sig, tau_c) {
                    let m = prune(&n, &p, &sig, PruneConfig { tau_c, phi_c }).unwrap();
                    let pm = power(&m, &profile(&m, &test.features).unwrap(), &lib, 1.0, clock).unwrap().p_total;
                    total += 1;
                    if pm > base {
                        worse.push(format!("{ds}/{kind} {tau_c:.2}/{phi_c}: {pm:.3} > {base:.3}"));
                    }
                }
            }
        }
    }
    assert!(total > 0);
    assert!(worse.is_empty(), "{worse:#?}");
}
