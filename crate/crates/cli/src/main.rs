use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use printax_core::celllib::{delay_scale, CellLibrary};
use printax_core::coeffapprox::approximate_model;
use printax_core::dse::{archive_json, pareto_csv, Battery};
use printax_core::flow::{label_targets, run_pipeline, search, stage_err, summary_csv, FlowError, PipelineReport, RunManifest, Study};
use printax_core::logicsim::{profile, simulate, ActivityProfile};
use printax_core::model_ir::{quantize, Dataset, FixedPointSpec, QuantizedModel, Split, TrainedModel};
use printax_core::netlist::Netlist;
use printax_core::power::{power, rescale_power};
use printax_core::pruner::{compute_phi, phi_grid, prune, sweep_csv, PruneConfig, SweepRow};
use printax_core::synth::synth_model;
use printax_core::timing::{build_vos_stimuli, critical_path, sta, vos_simulate, VosConfig};
use sha2::{Digest, Sha256};

#[derive(Parser)]
#[command(name = "printax", version, about = "Bespoke printed classifiers with cross-layer approximation")]
struct Cli {
    /// Worker threads for simulation and search (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Cell library JSON (default: the bundled printed library).
    #[arg(long, global = true)]
    lib: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Quantize a trained model to fixed point.
    Quantize {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Report oracle accuracy on this split.
        #[arg(long)]
        test: Option<PathBuf>,
    },
    /// Synthesize a quantized model into a gate-level netlist.
    Synth {
        #[arg(long)]
        quantized: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replace coefficients with cheaper neighbours.
    CoeffApprox {
        #[arg(long)]
        quantized: PathBuf,
        #[arg(long, default_value_t = 4)]
        e: u32,
        #[arg(long)]
        approx_biases: bool,
        #[arg(long)]
        out: PathBuf,
        /// Per-coefficient CSV.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Record per-gate activity over a dataset.
    Profile {
        #[arg(long)]
        netlist: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Prune a netlist over a (τ, φ) grid.
    Prune {
        #[arg(long)]
        netlist: PathBuf,
        #[arg(long)]
        profile: PathBuf,
        /// Accuracy is measured on this split.
        #[arg(long)]
        test: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = printax_core::pruner::default_tau_grid())]
        tau_grid: Vec<f64>,
        /// `auto` for every significance level, or a comma-separated list.
        #[arg(long, default_value = "auto")]
        phi: PhiArg,
        /// Directory for the sweep CSV and pruned netlists.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Static timing at one or more supply voltages.
    Sta {
        #[arg(long)]
        netlist: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1.0")]
        vdd: Vec<f64>,
        /// Per-gate arrival CSV at the first voltage.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Over-scaled simulation on a replicated test stream.
    VosSim {
        #[arg(long)]
        netlist: PathBuf,
        #[arg(long)]
        test: PathBuf,
        /// Supply voltages (default: the whole library grid).
        #[arg(long, value_delimiter = ',')]
        vdd: Vec<f64>,
        /// Clock period (default: the netlist's nominal critical path).
        #[arg(long)]
        clock: Option<f64>,
        #[arg(long, default_value_t = 100_000)]
        stimuli_count: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Switching power from an activity profile.
    Power {
        #[arg(long)]
        netlist: PathBuf,
        #[arg(long)]
        profile: PathBuf,
        #[arg(long, value_delimiter = ',')]
        vdd: Vec<f64>,
        #[arg(long)]
        clock: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Battery-constrained search over (τ, φ, V_dd).
    Dse(RunArgs),
    /// Print the summary of a finished run.
    Report {
        #[arg(long)]
        run_dir: PathBuf,
    },
    /// Every stage end to end.
    Pipeline(RunArgs),
}

#[derive(Debug, Clone)]
enum PhiArg {
    Auto,
    List(Vec<i32>),
}

impl std::str::FromStr for PhiArg {
    type Err = String;

    fn from_str(s: &str) -> Result<PhiArg, String> {
        if s == "auto" {
            return Ok(PhiArg::Auto);
        }
        s.split(',')
            .map(|p| p.trim().parse::<i32>().map_err(|e| format!("bad φ value {p:?}: {e}")))
            .collect::<Result<Vec<_>, _>>()
            .map(PhiArg::List)
    }
}

impl PhiArg {
    fn list(&self) -> Option<Vec<i32>> {
        match self {
            PhiArg::Auto => None,
            PhiArg::List(v) => Some(v.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Fitness {
    Nsga2,
}

#[derive(Args)]
struct RunArgs {
    /// Read every setting from a manifest file; other flags are ignored.
    #[arg(long, conflicts_with_all = ["model", "train", "test"])]
    manifest: Option<PathBuf>,
    #[arg(long, required_unless_present = "manifest")]
    model: Option<PathBuf>,
    #[arg(long, required_unless_present = "manifest")]
    train: Option<PathBuf>,
    #[arg(long, required_unless_present = "manifest")]
    test: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 4)]
    e: u32,
    #[arg(long)]
    approx_biases: bool,
    #[arg(long, value_delimiter = ',', default_values_t = printax_core::pruner::default_tau_grid())]
    tau_grid: Vec<f64>,
    #[arg(long, default_value = "auto")]
    phi: PhiArg,
    /// Preset (molex-30mw, zinergy-15mw, bluespark-6mw) or a budget in mW.
    #[arg(long, default_value = "molex-30mw", value_parser = parse_battery)]
    battery: Battery,
    /// Default: 4 for MLPs, 8 for SVMs.
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long, default_value_t = 20)]
    population: usize,
    #[arg(long, default_value_t = 0.05)]
    loss_threshold: f64,
    #[arg(long, default_value_t = 0.20)]
    prune_loss_cutoff: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 100_000)]
    stimuli_count: usize,
    /// Clock period (default: the exact design's critical path).
    #[arg(long)]
    clock: Option<f64>,
    #[arg(long, value_enum, default_value = "nsga2")]
    fitness: Fitness,
}

fn parse_battery(s: &str) -> Result<Battery, String> {
    Battery::parse(s).ok_or_else(|| format!("unknown battery {s:?}"))
}

impl RunArgs {
    fn manifest(&self, lib: Option<&Path>) -> Result<RunManifest, FlowError> {
        if let Some(p) = &self.manifest {
            let text = std::fs::read_to_string(p).map_err(stage_err("manifest"))?;
            let mut m = RunManifest::from_json(&text).map_err(stage_err("manifest"))?;
            m.output_dir = self.out.clone();
            return Ok(m);
        }
        let Fitness::Nsga2 = self.fitness;
        let mut m = RunManifest::new(
            self.model.clone().expect("required by clap"),
            self.train.clone().expect("required by clap"),
            self.test.clone().expect("required by clap"),
            &self.out,
        );
        m.library = lib.map(Path::to_path_buf);
        m.seed = self.seed;
        m.e = self.e;
        m.approx_biases = self.approx_biases;
        m.tau_grid = self.tau_grid.clone();
        m.phi = self.phi.list();
        m.battery = self.battery.clone();
        m.epochs = self.epochs;
        m.population = self.population;
        m.loss_threshold = self.loss_threshold;
        m.prune_loss_cutoff = self.prune_loss_cutoff;
        m.stimuli_count = self.stimuli_count;
        m.clock_period = self.clock;
        Ok(m)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: [threads] {e}");
            return ExitCode::from(3);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}

/// Short digest identifying a stand-alone invocation: its name, arguments
/// and the bytes of every input file.
fn invocation_hash(name: &str, args: &[String], inputs: &[&Path]) -> Result<String, FlowError> {
    let mut h = Sha256::new();
    h.update(name.as_bytes());
    for a in args {
        h.update([0]);
        h.update(a.as_bytes());
    }
    for p in inputs {
        let bytes = std::fs::read(p).map_err(|e| FlowError {
            stage: "input",
            message: format!("{}: {e}", p.display()),
        })?;
        h.update(Sha256::digest(&bytes));
    }
    Ok(hex::encode(&h.finalize()[..8]))
}

fn write(path: &Path, text: &str) -> Result<(), FlowError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(stage_err("output"))?;
    }
    std::fs::write(path, text).map_err(|e| FlowError {
        stage: "output",
        message: format!("{}: {e}", path.display()),
    })
}

fn library(p: Option<&Path>) -> Result<CellLibrary, FlowError> {
    match p {
        Some(p) => CellLibrary::load(p).map_err(stage_err("library")),
        None => Ok(CellLibrary::default_printed()),
    }
}

fn load_quantized(p: &Path, stage: &'static str) -> Result<QuantizedModel, FlowError> {
    let text = std::fs::read_to_string(p).map_err(|e| FlowError {
        stage,
        message: format!("{}: {e}", p.display()),
    })?;
    QuantizedModel::from_json(&text).map_err(stage_err(stage))
}

fn load_netlist(p: &Path, stage: &'static str) -> Result<Netlist, FlowError> {
    Netlist::load(p).map_err(stage_err(stage))
}

fn load_profile(p: &Path, stage: &'static str) -> Result<ActivityProfile, FlowError> {
    ActivityProfile::load(p).map_err(|e| FlowError {
        stage,
        message: format!("{}: {e}", p.display()),
    })
}

fn load_data(p: &Path, split: Split, stage: &'static str) -> Result<Dataset, FlowError> {
    Dataset::load(p, FixedPointSpec::default(), split).map_err(stage_err(stage))
}

fn voltages(requested: &[f64], lib: &CellLibrary) -> Result<Vec<f64>, FlowError> {
    if requested.is_empty() {
        return Ok(lib.voltage().grid());
    }
    for &v in requested {
        delay_scale(lib.voltage(), v).map_err(stage_err("voltage"))?;
    }
    Ok(requested.to_vec())
}

fn run(cli: &Cli) -> Result<(), FlowError> {
    let lib_path = cli.lib.as_deref();
    let args: Vec<String> = std::env::args().skip(1).collect();
    match &cli.cmd {
        Cmd::Quantize { model, out, test } => {
            let t = TrainedModel::load(model).map_err(stage_err("quantize"))?;
            let q = quantize(&t, FixedPointSpec::default()).map_err(stage_err("quantize"))?;
            write(out, &q.to_json())?;
            println!("kind,coefficients,scale,accuracy");
            let acc = match test {
                Some(p) => format!("{:.6}", load_data(p, Split::Test, "quantize")?.oracle_accuracy(&q)),
                None => String::new(),
            };
            println!("{},{},{},{acc}", q.kind.name(), q.coefficient_count(), q.scale);
        }
        Cmd::Synth { quantized, out } => {
            let lib = library(lib_path)?;
            let q = load_quantized(quantized, "synth")?;
            let n = synth_model(&q);
            n.audit().map_err(stage_err("synth"))?;
            write(out, &n.to_json())?;
            println!("gates,area,critical_path");
            println!("{},{:.4},{:.4}", n.gate_count(), n.area(&lib), critical_path(&n, &lib));
        }
        Cmd::CoeffApprox {
            quantized,
            e,
            approx_biases,
            out,
            report,
        } => {
            let lib = library(lib_path)?;
            let q = load_quantized(quantized, "coeff-approx")?;
            let (a, r) = approximate_model(&q, *e, &lib, *approx_biases);
            write(out, &a.to_json())?;
            if let Some(p) = report {
                let hash = invocation_hash("coeff-approx", &args, &[quantized])?;
                let mut csv = String::new();
                for (i, line) in r.to_csv().lines().enumerate() {
                    let _ = writeln!(csv, "{},{line}", if i == 0 { "manifest" } else { &hash });
                }
                write(p, &csv)?;
            }
            println!("e,exact_proxy_area,approx_proxy_area");
            println!("{e},{:.4},{:.4}", r.exact_area, r.approx_area);
        }
        Cmd::Profile { netlist, data, out } => {
            let n = load_netlist(netlist, "profile")?;
            let d = load_data(data, Split::Train, "profile")?;
            let p = profile(&n, &d.features).map_err(stage_err("profile"))?;
            write(out, &p.to_json())?;
        }
        Cmd::Prune {
            netlist,
            profile: prof_path,
            test,
            tau_grid,
            phi,
            out_dir,
        } => {
            let lib = library(lib_path)?;
            let n = load_netlist(netlist, "prune")?;
            let prof = load_profile(prof_path, "prune")?;
            let d = load_data(test, Split::Test, "prune")?;
            let targets = label_targets(&d.labels, &n.meta.class_labels);
            let hash = invocation_hash("prune", &args, &[netlist, prof_path, test])?;
            let sig = compute_phi(&n);
            let mut rows = Vec::new();
            for &tau_c in tau_grid {
                let phis = match phi.list() {
                    Some(l) => l,
                    None => phi_grid(&prof, &sig, tau_c),
                };
                for phi_c in phis {
                    let cfg = PruneConfig { tau_c, phi_c };
                    let m = prune(&n, &prof, &sig, cfg).map_err(stage_err("prune"))?;
                    let r = simulate(&m, &d.features).map_err(stage_err("prune"))?;
                    let hits = r.predictions().iter().zip(&targets).filter(|(p, t)| p == t).count();
                    write(&out_dir.join(format!("pruned_t{tau_c:.2}_p{phi_c}.netlist.json")), &m.to_json())?;
                    rows.push(SweepRow {
                        tau_c,
                        phi_c,
                        pruned_gates: n.gate_count().saturating_sub(m.gate_count()),
                        gates: m.gate_count(),
                        area: m.area(&lib),
                        accuracy: hits as f64 / targets.len().max(1) as f64,
                        critical_path: critical_path(&m, &lib),
                    });
                }
            }
            write(&out_dir.join("prune_sweep.csv"), &sweep_csv(&rows, &hash))?;
        }
        Cmd::Sta { netlist, vdd, out } => {
            let lib = library(lib_path)?;
            let n = load_netlist(netlist, "sta")?;
            println!("v_dd,delay_scale,critical_path");
            for (i, &v) in vdd.iter().enumerate() {
                let t = sta(&n, &lib, v).map_err(stage_err("sta"))?;
                println!("{v:.2},{:.6},{:.4}", t.scale, t.critical_path);
                if i == 0 {
                    if let Some(p) = out {
                        write(p, &t.to_csv())?;
                    }
                }
            }
        }
        Cmd::VosSim {
            netlist,
            test,
            vdd,
            clock,
            stimuli_count,
            seed,
            out,
        } => {
            let lib = library(lib_path)?;
            let n = load_netlist(netlist, "vos")?;
            let d = load_data(test, Split::Test, "vos")?;
            let hash = invocation_hash("vos-sim", &args, &[netlist, test])?;
            let order = build_vos_stimuli(d.len(), (*stimuli_count).max(d.len()), *seed);
            let stream: Vec<Vec<u32>> = order.iter().map(|&i| d.features[i].clone()).collect();
            let labels: Vec<i64> = order.iter().map(|&i| d.labels[i]).collect();
            let targets = label_targets(&labels, &n.meta.class_labels);
            let clock = clock.or(n.meta.clock_period).unwrap_or_else(|| critical_path(&n, &lib));
            let mut csv = String::from("manifest,v_dd,clock_period,violating_bits,accuracy\n");
            for v in voltages(vdd, &lib)? {
                let r = vos_simulate(&n, &lib, VosConfig { v_dd: v, clock_period: clock }, &stream)
                    .map_err(stage_err("vos"))?;
                let late = sta(&n, &lib, v).map_err(stage_err("vos"))?.violating_bits(clock);
                let hits = r.predictions().iter().zip(&targets).filter(|(p, t)| p == t).count();
                let acc = hits as f64 / targets.len().max(1) as f64;
                let _ = writeln!(csv, "{hash},{v:.2},{clock:.4},{late},{acc:.6}");
            }
            write(out, &csv)?;
        }
        Cmd::Power {
            netlist,
            profile: prof_path,
            vdd,
            clock,
            out,
        } => {
            let lib = library(lib_path)?;
            let n = load_netlist(netlist, "power")?;
            let prof = load_profile(prof_path, "power")?;
            let hash = invocation_hash("power", &args, &[netlist, prof_path])?;
            let clock = clock.or(n.meta.clock_period).unwrap_or_else(|| critical_path(&n, &lib));
            let nominal = power(&n, &prof, &lib, lib.voltage().v_nominal, clock).map_err(stage_err("power"))?;
            let mut csv = String::from("manifest,v_dd,clock_period,p_static,p_dynamic,p_total\n");
            for v in voltages(vdd, &lib)? {
                let r = rescale_power(&nominal, v);
                let _ = writeln!(csv, "{hash},{v:.2},{clock:.4},{:.6},{:.6},{:.6}", r.p_static, r.p_dynamic, r.p_total);
            }
            write(out, &csv)?;
        }
        Cmd::Dse(a) => {
            let m = a.manifest(lib_path)?;
            let study = Study::load(&m)?;
            let ex = study.explorer(&study.approx_netlist, &m.battery, m.loss_threshold);
            let grid = ex.grid();
            let (r, reduced, screened) = search(&study, &ex, &grid)?;
            let hash = m.hash();
            write(&m.output_dir.join("manifest.json"), &m.to_json())?;
            write(&m.output_dir.join("dse_archive.json"), &archive_json(&r, &hash))?;
            write(&m.output_dir.join("pareto.csv"), &pareto_csv(&r.archive, &hash))?;
            println!("space,reduced,screened,archive");
            println!("{},{reduced},{screened},{}", ex.space.size(), r.archive.len());
        }
        Cmd::Report { run_dir } => {
            let p = run_dir.join("summary.json");
            let text = std::fs::read_to_string(&p).map_err(|e| FlowError {
                stage: "report",
                message: format!("{}: {e}", p.display()),
            })?;
            let r: PipelineReport = serde_json::from_str(&text).map_err(stage_err("report"))?;
            print!("{}", summary_csv(&r));
        }
        Cmd::Pipeline(a) => {
            let m = a.manifest(lib_path)?;
            let r = run_pipeline(&m)?;
            print!("{}", summary_csv(&r));
        }
    }
    Ok(())
}
