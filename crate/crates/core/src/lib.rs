//! Compile small trained classifiers and regressors into bespoke gate-level
//! netlists, approximate them at the coefficient, logic and voltage levels,
//! and search the combined space under a battery budget.

pub mod celllib;
pub mod coeffapprox;
pub mod dse;
pub mod flow;
pub mod logicsim;
pub mod model_ir;
pub mod netlist;
pub mod power;
pub mod pruner;
pub mod synth;
pub mod timing;

pub use celllib::{delay_scale, Cell, CellFunction, CellLibrary, LibraryError, VoltageModel};
pub use coeffapprox::{approximate_model, assign, build_candidates, ApproxAssignment, ApproxReport, CandidateSet};
pub use dse::{
    evolve, hypervolume, pareto_front, pop_init, prune_space, Battery, Chromosome, DesignSpace, DseError, DseResult,
    EvaluatedDesign, Explorer, GaConfig, GridEval,
};
pub use flow::{run_pipeline, FlowError, PipelineReport, RunManifest, Study};
pub use logicsim::{evaluate_accuracy, profile, simulate, AccuracyReport, ActivityProfile, SimResult};
pub use model_ir::{quantize, Dataset, FixedPointSpec, Interval, ModelError, ModelKind, QuantizedModel, Split, TrainedModel};
pub use netlist::{Bus, BusRole, Gate, GateId, GateRole, NetId, Netlist, NetlistError};
pub use power::{min_voltage_for_budget, power, rescale_power, PowerReport};
pub use pruner::{compute_phi, phi_grid, prune, GateSignificance, PruneConfig};
pub use synth::{csd_decompose, synth_model, CsdForm};
pub use timing::{build_vos_stimuli, sta, vos_simulate, TimingReport, VosConfig};
