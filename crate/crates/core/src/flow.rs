//! End-to-end run: quantize, synthesize, approximate coefficients, profile,
//! sweep pruning, time, over-scale, estimate power and search.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::celllib::{delay_scale, CellLibrary};
use crate::coeffapprox::{approximate_model, ApproxReport};
use crate::dse::{
    archive_json, design_hypervolume, evolve, grid_csv, pareto_csv, pop_init, prune_space, screen, Battery, DesignSpace,
    DseResult, EvaluatedDesign, Explorer, ExplorerConfig, GaConfig, GridEval,
};
use crate::logicsim::{profile, simulate, ActivityProfile};
use crate::model_ir::{quantize, Dataset, FixedPointSpec, QuantizedModel, Split, TrainedModel};
use crate::netlist::Netlist;
use crate::power::{power, rescale_power};
use crate::pruner::{compute_phi, default_tau_grid};
use crate::synth::synth_model;
use crate::timing::{apply_stale, build_vos_stimuli, critical_path, sta};

/// Everything that determines a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub model: PathBuf,
    pub train: PathBuf,
    pub test: PathBuf,
    pub library: Option<PathBuf>,
    pub seed: u64,
    pub spec: FixedPointSpec,
    pub e: u32,
    pub approx_biases: bool,
    pub tau_grid: Vec<f64>,
    /// Restrict `φ_c` to these values; `None` explores every `Φ_τ`.
    pub phi: Option<Vec<i32>>,
    pub battery: Battery,
    pub epochs: Option<usize>,
    pub population: usize,
    pub loss_threshold: f64,
    pub prune_loss_cutoff: f64,
    pub stimuli_count: usize,
    pub clock_period: Option<f64>,
    pub output_dir: PathBuf,
    pub tool_version: String,
}

impl RunManifest {
    pub fn new(model: impl Into<PathBuf>, train: impl Into<PathBuf>, test: impl Into<PathBuf>, out: impl Into<PathBuf>) -> RunManifest {
        RunManifest {
            model: model.into(),
            train: train.into(),
            test: test.into(),
            library: None,
            seed: 1,
            spec: FixedPointSpec::default(),
            e: 4,
            approx_biases: false,
            tau_grid: default_tau_grid(),
            phi: None,
            battery: Battery::presets().remove(0),
            epochs: None,
            population: 20,
            loss_threshold: 0.05,
            prune_loss_cutoff: 0.20,
            stimuli_count: 100_000,
            clock_period: None,
            output_dir: out.into(),
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
        }
    }

    /// Short digest of every field except the output directory.
    pub fn hash(&self) -> String {
        let mut m = self.clone();
        m.output_dir = PathBuf::new();
        let bytes = serde_json::to_vec(&m).expect("manifest serialises");
        hex::encode(&Sha256::digest(&bytes)[..8])
    }

    /// Independent seed for a named stage.
    pub fn sub_seed(&self, stage: &str) -> u64 {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(stage.as_bytes());
        let d = h.finalize();
        u64::from_le_bytes(d[..8].try_into().expect("digest has 8 bytes"))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serialises")
    }

    pub fn from_json(text: &str) -> Result<RunManifest, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[derive(Debug, thiserror::Error)]
#[error("[{stage}] {message}")]
pub struct FlowError {
    pub stage: &'static str,
    pub message: String,
}

pub fn stage_err<E: std::fmt::Display>(stage: &'static str) -> impl Fn(E) -> FlowError {
    move |e| FlowError {
        stage,
        message: e.to_string(),
    }
}

/// Class index of each label, `usize::MAX` for labels the model cannot emit.
pub fn label_targets(labels: &[i64], class_labels: &[i64]) -> Vec<usize> {
    labels
        .iter()
        .map(|y| class_labels.iter().position(|c| c == y).unwrap_or(usize::MAX))
        .collect()
}

fn stream_accuracy(predictions: &[usize], targets: &[usize]) -> f64 {
    if targets.is_empty() {
        return 0.0;
    }
    predictions.iter().zip(targets).filter(|(p, t)| p == t).count() as f64 / targets.len() as f64
}

/// In-memory artifacts shared by every stage.
pub struct Study {
    pub manifest: RunManifest,
    pub lib: CellLibrary,
    pub trained: TrainedModel,
    pub quantized: QuantizedModel,
    pub approx: QuantizedModel,
    pub approx_report: ApproxReport,
    pub train: Dataset,
    pub test: Dataset,
    pub exact: Netlist,
    pub approx_netlist: Netlist,
    pub clock_period: f64,
    pub stream: Vec<Vec<u32>>,
    pub targets: Vec<usize>,
}

impl Study {
    pub fn load(manifest: &RunManifest) -> Result<Study, FlowError> {
        let lib = match &manifest.library {
            Some(p) => CellLibrary::load(p).map_err(stage_err("library"))?,
            None => CellLibrary::default_printed(),
        };
        let trained = TrainedModel::load(&manifest.model).map_err(stage_err("quantize"))?;
        let quantized = quantize(&trained, manifest.spec).map_err(stage_err("quantize"))?;
        let train = Dataset::load(&manifest.train, manifest.spec, Split::Train).map_err(stage_err("quantize"))?;
        let test = Dataset::load(&manifest.test, manifest.spec, Split::Test).map_err(stage_err("quantize"))?;
        for d in [&train, &test] {
            if d.features.first().is_some_and(|x| x.len() != quantized.n_features) {
                return Err(FlowError {
                    stage: "quantize",
                    message: format!("dataset has {} features, model expects {}", d.features[0].len(), quantized.n_features),
                });
            }
        }
        if train.is_empty() || test.is_empty() {
            return Err(FlowError {
                stage: "quantize",
                message: "empty dataset".into(),
            });
        }
        let exact = synth_model(&quantized);
        let (approx, approx_report) = approximate_model(&quantized, manifest.e, &lib, manifest.approx_biases);
        let approx_netlist = synth_model(&approx);
        let clock_period = manifest.clock_period.unwrap_or_else(|| critical_path(&exact, &lib));
        let order = build_vos_stimuli(test.len(), manifest.stimuli_count.max(test.len()), manifest.sub_seed("vos-stimuli"));
        let stream: Vec<Vec<u32>> = order.iter().map(|&i| test.features[i].clone()).collect();
        let labels: Vec<i64> = order.iter().map(|&i| test.labels[i]).collect();
        let targets = label_targets(&labels, &quantized.class_labels);
        Ok(Study {
            manifest: manifest.clone(),
            lib,
            trained,
            quantized,
            approx,
            approx_report,
            train,
            test,
            exact,
            approx_netlist,
            clock_period,
            stream,
            targets,
        })
    }

    /// Zero-delay stream accuracy of `n`.
    pub fn accuracy(&self, n: &Netlist) -> f64 {
        let r = simulate(n, &self.stream).expect("valid netlist");
        stream_accuracy(&r.predictions(), &self.targets)
    }

    pub fn train_profile(&self, n: &Netlist) -> ActivityProfile {
        profile(n, &self.train.features).expect("nonempty training set")
    }

    /// Search context rooted at `base`, with accuracy loss measured against
    /// the exact design.
    pub fn explorer(&self, base: &Netlist, battery: &Battery, loss_threshold: f64) -> Explorer {
        let prof = self.train_profile(base);
        let sig = compute_phi(base);
        let space = DesignSpace::new(
            &self.manifest.tau_grid,
            self.lib.voltage().grid(),
            &prof,
            &sig,
            self.manifest.phi.as_deref(),
        );
        Explorer::new(
            self.lib.clone(),
            base.clone(),
            prof,
            sig,
            space,
            self.stream.clone(),
            self.targets.clone(),
            ExplorerConfig {
                clock_period: self.clock_period,
                baseline_accuracy: self.accuracy(&self.exact),
                battery: battery.clone(),
                loss_threshold,
            },
        )
    }

    pub fn epochs(&self) -> usize {
        self.manifest
            .epochs
            .unwrap_or_else(|| GaConfig::default_epochs(self.quantized.kind.is_mlp()))
    }

    pub fn ga_config(&self) -> GaConfig {
        GaConfig {
            population: self.manifest.population,
            epochs: self.epochs(),
            loss_threshold: self.manifest.loss_threshold,
            seed: self.manifest.sub_seed("dse"),
            prune_loss_cutoff: self.manifest.prune_loss_cutoff,
        }
    }
}

/// Accuracy of one design over the voltage grid at a fixed clock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VosRow {
    pub v_dd: f64,
    pub violating_bits: usize,
    pub accuracy: f64,
}

pub fn vos_sweep(n: &Netlist, lib: &CellLibrary, clock_period: f64, stream: &[Vec<u32>], targets: &[usize]) -> Vec<VosRow> {
    let base = simulate(n, stream).expect("valid netlist");
    lib.voltage()
        .grid()
        .into_par_iter()
        .map(|v| {
            let t = sta(n, lib, v).expect("grid voltage");
            let late = t.late_bits(clock_period);
            let mut r = base.clone();
            apply_stale(&mut r, &late);
            VosRow {
                v_dd: v,
                violating_bits: late.iter().flatten().filter(|&&b| b).count(),
                accuracy: stream_accuracy(&r.predictions(), targets),
            }
        })
        .collect()
}

/// Summary of one named design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSummary {
    pub name: String,
    pub tau_c: Option<f64>,
    pub phi_c: Option<i32>,
    pub v_dd: f64,
    pub accuracy: f64,
    pub area: f64,
    pub power: f64,
    pub critical_path: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub manifest: String,
    pub model_kind: String,
    pub clock_period: f64,
    pub exact: DesignSummary,
    pub coeff_approx: DesignSummary,
    pub pruning_only: Option<DesignSummary>,
    pub cross: Option<DesignSummary>,
    pub grid_points: usize,
    pub space_size: usize,
    pub reduced_size: usize,
    pub screened_size: usize,
    pub archive_size: usize,
    pub archive_hypervolume: f64,
}

/// Lowest-power nominal-voltage pruning of the exact design within `loss`.
pub fn pruning_only_best(grid: &[GridEval], loss: f64) -> Option<&GridEval> {
    grid.iter()
        .filter(|g| g.accuracy_loss <= loss)
        .min_by(|a, b| a.power.p_total.total_cmp(&b.power.p_total))
}

/// Lowest-power archived design within `loss`.
pub fn cross_best(archive: &[EvaluatedDesign], loss: f64) -> Option<&EvaluatedDesign> {
    archive
        .iter()
        .filter(|d| d.feasible && d.accuracy_loss <= loss)
        .min_by(|a, b| a.power.total_cmp(&b.power))
}

fn write(dir: &Path, name: &str, text: &str) -> Result<(), FlowError> {
    std::fs::write(dir.join(name), text).map_err(|e| FlowError {
        stage: "output",
        message: format!("{}: {e}", dir.join(name).display()),
    })
}

fn nominal_summary(name: &str, study: &Study, n: &Netlist) -> DesignSummary {
    let p = profile(n, &study.stream).expect("nonempty stream");
    let pw = power(n, &p, &study.lib, study.lib.voltage().v_nominal, study.clock_period).expect("fresh profile");
    DesignSummary {
        name: name.to_owned(),
        tau_c: None,
        phi_c: None,
        v_dd: study.lib.voltage().v_nominal,
        accuracy: study.accuracy(n),
        area: n.area(&study.lib),
        power: pw.p_total,
        critical_path: critical_path(n, &study.lib),
    }
}

/// Run every stage and write its artifacts under `manifest.output_dir`.
pub fn run_pipeline(manifest: &RunManifest) -> Result<PipelineReport, FlowError> {
    let dir = manifest.output_dir.clone();
    std::fs::create_dir_all(&dir).map_err(stage_err("output"))?;
    let hash = manifest.hash();
    let study = Study::load(manifest)?;
    write(&dir, "manifest.json", &manifest.to_json())?;
    write(&dir, "quantized.json", &study.quantized.to_json())?;
    write(&dir, "exact.netlist.json", &study.exact.to_json())?;
    write(&dir, "approx.json", &study.approx.to_json())?;
    write(&dir, "coeff_approx.csv", &with_manifest(&study.approx_report.to_csv(), &hash))?;
    write(&dir, "approx.netlist.json", &study.approx_netlist.to_json())?;

    let battery = &manifest.battery;
    let ex = study.explorer(&study.approx_netlist, battery, manifest.loss_threshold);
    write(&dir, "profile.json", &ex.profile.to_json())?;
    let grid = ex.grid();
    write(&dir, "prune_sweep.csv", &grid_csv(&grid, &hash))?;

    let t = sta(&study.approx_netlist, &study.lib, study.lib.voltage().v_nominal).map_err(stage_err("sta"))?;
    write(&dir, "sta.csv", &t.to_csv())?;

    let mut vos = String::from("manifest,design,v_dd,delay_scale,violating_bits,accuracy\n");
    for (name, n) in [("exact", &study.exact), ("coeff_approx", &study.approx_netlist)] {
        for r in vos_sweep(n, &study.lib, study.clock_period, &study.stream, &study.targets) {
            let s = delay_scale(study.lib.voltage(), r.v_dd).map_err(stage_err("vos"))?;
            let _ = writeln!(vos, "{hash},{name},{:.2},{s:.6},{},{:.6}", r.v_dd, r.violating_bits, r.accuracy);
        }
    }
    write(&dir, "vos.csv", &vos)?;

    let exact = nominal_summary("exact", &study, &study.exact);
    let coeff = nominal_summary("coeff_approx", &study, &study.approx_netlist);
    let mut pw = String::from("manifest,design,v_dd,p_static,p_dynamic,p_total\n");
    for (name, n) in [("exact", &study.exact), ("coeff_approx", &study.approx_netlist)] {
        let p = profile(n, &study.stream).map_err(stage_err("power"))?;
        let r = power(n, &p, &study.lib, study.lib.voltage().v_nominal, study.clock_period).map_err(stage_err("power"))?;
        for v in study.lib.voltage().grid() {
            let s = rescale_power(&r, v);
            let _ = writeln!(pw, "{hash},{name},{v:.2},{:.6},{:.6},{:.6}", s.p_static, s.p_dynamic, s.p_total);
        }
    }
    write(&dir, "power.csv", &pw)?;

    // pruning alone, on the exact design at nominal voltage
    let exact_ex = study.explorer(&study.exact, battery, manifest.loss_threshold);
    let exact_grid = exact_ex.grid();
    write(&dir, "prune_only_sweep.csv", &grid_csv(&exact_grid, &hash))?;
    let pruning_only = pruning_only_best(&exact_grid, manifest.loss_threshold).map(|g| DesignSummary {
        name: "pruning_only".into(),
        tau_c: g.phi_c.map(|_| g.tau_c),
        phi_c: g.phi_c,
        v_dd: study.lib.voltage().v_nominal,
        accuracy: g.accuracy,
        area: g.area,
        power: g.power.p_total,
        critical_path: g.critical_path,
    });

    let (result, reduced, screened) = search(&study, &ex, &grid)?;
    write(&dir, "dse_archive.json", &archive_json(&result, &hash))?;
    write(&dir, "pareto.csv", &pareto_csv(&result.archive, &hash))?;
    let cross = cross_best(&result.archive, manifest.loss_threshold).map(|d| {
        let p = ex.point(d.chromosome.tau, d.chromosome.phi);
        DesignSummary {
            name: "cross".into(),
            tau_c: d.phi_c.map(|_| d.tau_c),
            phi_c: d.phi_c,
            v_dd: d.v_dd,
            accuracy: d.accuracy,
            area: d.area,
            power: d.power,
            critical_path: p.critical_path,
        }
    });
    let max_area = grid.iter().map(|g| g.area).fold(0.0, f64::max);
    let report = PipelineReport {
        manifest: hash.clone(),
        model_kind: study.quantized.kind.name().to_owned(),
        clock_period: study.clock_period,
        exact,
        coeff_approx: coeff,
        pruning_only,
        cross,
        grid_points: grid.len(),
        space_size: ex.space.size(),
        reduced_size: reduced,
        screened_size: screened,
        archive_size: result.archive.len(),
        archive_hypervolume: design_hypervolume(&result.archive, max_area, battery.p_bat),
    };
    write(&dir, "summary.json", &serde_json::to_string_pretty(&report).expect("report serialises"))?;
    write(&dir, "summary.csv", &summary_csv(&report))?;
    Ok(report)
}

/// Reduce, screen, seed and evolve. Returns the result with the reduced and
/// screened set sizes.
pub fn search(study: &Study, ex: &Explorer, grid: &[GridEval]) -> Result<(DseResult, usize, usize), FlowError> {
    let m = &study.manifest;
    let reduced = prune_space(grid, &ex.space.voltages, &m.battery, m.prune_loss_cutoff);
    let screened = screen(grid, &ex.space, &reduced, &m.battery, m.loss_threshold);
    let pool = if screened.is_empty() { &reduced } else { &screened };
    if pool.is_empty() {
        return Ok((
            DseResult {
                archive: Vec::new(),
                best_accuracy: Vec::new(),
                evaluated: 0,
            },
            0,
            0,
        ));
    }
    let init = pop_init(pool, m.population, m.sub_seed("pop-init")).map_err(stage_err("dse"))?;
    let result = evolve(&init, pool, &study.ga_config(), ex).map_err(stage_err("dse"))?;
    Ok((result, reduced.len(), screened.len()))
}

fn with_manifest(csv: &str, hash: &str) -> String {
    let mut out = String::new();
    for (i, line) in csv.lines().enumerate() {
        let head = if i == 0 { "manifest" } else { hash };
        let _ = writeln!(out, "{head},{line}");
    }
    out
}

pub fn summary_csv(r: &PipelineReport) -> String {
    let mut s = String::from("manifest,design,tau_c,phi_c,v_dd,accuracy,area,power,critical_path\n");
    let rows = [Some(&r.exact), Some(&r.coeff_approx), r.pruning_only.as_ref(), r.cross.as_ref()];
    for d in rows.into_iter().flatten() {
        let tau = d.tau_c.map_or_else(|| "none".to_owned(), |t| format!("{t:.2}"));
        let phi = d.phi_c.map_or_else(|| "none".to_owned(), |p| p.to_string());
        let _ = writeln!(
            s,
            "{},{},{tau},{phi},{:.2},{:.6},{:.4},{:.6},{:.4}",
            r.manifest, d.name, d.v_dd, d.accuracy, d.area, d.power, d.critical_path
        );
    }
    s
}
