//! Battery-constrained search over `(τ_c, φ_c, V_dd)`.
//!
//! Every `(τ_c, φ_c)` point is first evaluated at nominal voltage with
//! zero-delay simulation. Points losing too much accuracy are dropped, and
//! the survivors are expanded over the voltage grid with the analytic power
//! rescale, discarding pairs over the battery budget. NSGA-II then explores
//! the reduced space with VOS-aware evaluations.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::sync::{Arc, Mutex, OnceLock};

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::celllib::{delay_scale, CellLibrary};
use crate::logicsim::{profile, simulate, ActivityProfile, SimResult};
use crate::netlist::{BusRole, Netlist};
use crate::power::{min_voltage_for_budget, power, rescale_power, PowerReport};
use crate::pruner::{phi_grid, prune, GateSignificance, PruneConfig};
use crate::timing::{apply_stale, nominal_arrivals};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Battery {
    pub name: String,
    pub p_bat: f64,
}

impl Battery {
    pub fn new(name: &str, p_bat: f64) -> Battery {
        assert!(p_bat > 0.0, "battery budget must be positive");
        Battery {
            name: name.to_owned(),
            p_bat,
        }
    }

    pub fn presets() -> Vec<Battery> {
        vec![
            Battery::new("molex-30mw", 30.0),
            Battery::new("zinergy-15mw", 15.0),
            Battery::new("bluespark-6mw", 6.0),
        ]
    }

    /// A preset name, or a bare number of mW.
    pub fn parse(s: &str) -> Option<Battery> {
        if let Some(b) = Battery::presets().into_iter().find(|b| b.name == s) {
            return Some(b);
        }
        let mw = s.trim_end_matches("mw").trim_end_matches("mW").parse::<f64>().ok()?;
        (mw > 0.0 && mw.is_finite()).then(|| Battery::new(&format!("{mw}mw"), mw))
    }
}

/// Gene indices: `τ_c` on the τ grid, `φ_c` into that τ's options
/// (index 0 is "no pruning"), `V_dd` on the voltage grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Chromosome {
    pub tau: usize,
    pub phi: usize,
    pub vdd: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSpace {
    pub tau_grid: Vec<f64>,
    /// Per τ: `None` (no pruning) followed by `Φ_τ`.
    pub phi_options: Vec<Vec<Option<i32>>>,
    pub voltages: Vec<f64>,
}

impl DesignSpace {
    pub fn new(
        tau_grid: &[f64],
        voltages: Vec<f64>,
        prof: &ActivityProfile,
        sig: &GateSignificance,
        phi_filter: Option<&[i32]>,
    ) -> DesignSpace {
        let phi_options = tau_grid
            .iter()
            .map(|&t| {
                let mut v = vec![None];
                v.extend(
                    phi_grid(prof, sig, t)
                        .into_iter()
                        .filter(|p| phi_filter.map_or(true, |f| f.contains(p)))
                        .map(Some),
                );
                v
            })
            .collect();
        DesignSpace {
            tau_grid: tau_grid.to_vec(),
            phi_options,
            voltages,
        }
    }

    /// `(τ, φ)` pairs in order.
    pub fn points(&self) -> Vec<(usize, usize)> {
        self.phi_options
            .iter()
            .enumerate()
            .flat_map(|(t, o)| (0..o.len()).map(move |p| (t, p)))
            .collect()
    }

    pub fn point_index(&self, tau: usize, phi: usize) -> usize {
        self.phi_options[..tau].iter().map(Vec::len).sum::<usize>() + phi
    }

    pub fn size(&self) -> usize {
        self.points().len() * self.voltages.len()
    }

    pub fn contains(&self, c: Chromosome) -> bool {
        c.tau < self.tau_grid.len() && c.phi < self.phi_options[c.tau].len() && c.vdd < self.voltages.len()
    }

    pub fn all(&self) -> Vec<Chromosome> {
        let mut v = Vec::with_capacity(self.size());
        for (tau, phi) in self.points() {
            for vdd in 0..self.voltages.len() {
                v.push(Chromosome { tau, phi, vdd });
            }
        }
        v
    }

    pub fn phi_c(&self, c: Chromosome) -> Option<i32> {
        self.phi_options[c.tau][c.phi]
    }

    pub fn prune_config(&self, tau: usize, phi: usize) -> Option<PruneConfig> {
        self.phi_options[tau][phi].map(|phi_c| PruneConfig {
            tau_c: self.tau_grid[tau],
            phi_c,
        })
    }
}

/// Nominal-voltage evaluation of one `(τ_c, φ_c)` point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridEval {
    pub tau: usize,
    pub phi: usize,
    pub tau_c: f64,
    pub phi_c: Option<i32>,
    pub gates: usize,
    pub area: f64,
    pub critical_path: f64,
    pub accuracy: f64,
    pub accuracy_loss: f64,
    pub power: PowerReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluatedDesign {
    pub chromosome: Chromosome,
    pub tau_c: f64,
    pub phi_c: Option<i32>,
    pub v_dd: f64,
    pub accuracy: f64,
    pub accuracy_loss: f64,
    pub area: f64,
    pub power: f64,
    pub feasible: bool,
    /// Normalised amount by which the constraints are exceeded.
    pub violation: f64,
}

impl EvaluatedDesign {
    /// Minimisation form: `(−accuracy, area, power)`.
    pub fn objectives(&self) -> [f64; 3] {
        [-self.accuracy, self.area, self.power]
    }
}

/// `a` dominates `b` in minimisation form.
pub fn dominates(a: &[f64; 3], b: &[f64; 3]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y) && a.iter().zip(b).any(|(x, y)| x < y)
}

/// Indices of the non-dominated points.
pub fn non_dominated(points: &[[f64; 3]]) -> Vec<usize> {
    (0..points.len())
        .filter(|&i| !points.iter().any(|q| dominates(q, &points[i])))
        .collect()
}

/// Non-dominated designs, one per distinct objective vector.
pub fn pareto_front(designs: &[EvaluatedDesign]) -> Vec<EvaluatedDesign> {
    let objs: Vec<[f64; 3]> = designs.iter().map(EvaluatedDesign::objectives).collect();
    let mut seen = HashSet::new();
    let mut front: Vec<EvaluatedDesign> = Vec::new();
    let mut idx = non_dominated(&objs);
    idx.sort_by_key(|&i| designs[i].chromosome);
    for i in idx {
        let key = objs[i].map(f64::to_bits);
        if seen.insert(key) {
            front.push(designs[i].clone());
        }
    }
    front
}

/// Exact hypervolume dominated by `points` (minimisation) up to `reference`.
pub fn hypervolume(points: &[[f64; 3]], reference: [f64; 3]) -> f64 {
    let mut pts: Vec<[f64; 3]> = points
        .iter()
        .copied()
        .filter(|p| p.iter().zip(&reference).all(|(x, r)| x < r))
        .collect();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]));
    let mut total = 0.0;
    for i in 0..pts.len() {
        let next = if i + 1 < pts.len() { pts[i + 1][0] } else { reference[0] };
        let depth = next - pts[i][0];
        if depth > 0.0 {
            total += depth * area_2d(&pts[..=i], [reference[1], reference[2]]);
        }
    }
    total
}

fn area_2d(pts: &[[f64; 3]], reference: [f64; 2]) -> f64 {
    let mut yz: Vec<[f64; 2]> = pts.iter().map(|p| [p[1], p[2]]).collect();
    yz.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    let mut area = 0.0;
    let mut best_z = reference[1];
    for (i, p) in yz.iter().enumerate() {
        if p[1] < best_z {
            best_z = p[1];
        }
        let next = yz.get(i + 1).map_or(reference[0], |q| q[0]);
        area += (next - p[0]) * (reference[1] - best_z);
    }
    area
}

/// Hypervolume of designs against `(0 accuracy, 1.01·max area, 1.01·p_bat)`.
pub fn design_hypervolume(designs: &[EvaluatedDesign], max_area: f64, p_bat: f64) -> f64 {
    let pts: Vec<[f64; 3]> = designs.iter().map(EvaluatedDesign::objectives).collect();
    hypervolume(&pts, [0.0, 1.01 * max_area, 1.01 * p_bat])
}

pub trait Evaluate: Sync {
    fn space(&self) -> &DesignSpace;
    fn evaluate(&self, c: Chromosome) -> EvaluatedDesign;
}

/// Per-point data shared by every voltage of that point.
#[derive(Debug)]
pub struct PointData {
    pub netlist: Netlist,
    pub area: f64,
    pub critical_path: f64,
    pub accuracy: f64,
    pub power: PowerReport,
    class_arrival: Vec<f64>,
    class_words: SimResult,
}

/// VOS-aware evaluator over a pruned design space.
pub struct Explorer {
    pub lib: CellLibrary,
    pub base: Netlist,
    pub profile: ActivityProfile,
    pub significance: GateSignificance,
    pub space: DesignSpace,
    pub stream: Vec<Vec<u32>>,
    /// Class index expected for each stream vector.
    pub targets: Vec<usize>,
    pub clock_period: f64,
    pub baseline_accuracy: f64,
    pub battery: Battery,
    pub loss_threshold: f64,
    points: Vec<OnceLock<Arc<PointData>>>,
    memo: Mutex<HashMap<Chromosome, EvaluatedDesign>>,
}

#[derive(Debug, thiserror::Error)]
pub enum DseError {
    #[error("no design survives the accuracy cutoff and battery budget")]
    EmptySpace,
    #[error("population size must be at least 2, got {0}")]
    Population(usize),
    #[error(transparent)]
    Prune(#[from] crate::pruner::PruneError),
}

pub struct ExplorerConfig {
    pub clock_period: f64,
    pub baseline_accuracy: f64,
    pub battery: Battery,
    pub loss_threshold: f64,
}

impl Explorer {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        lib: CellLibrary,
        base: Netlist,
        profile: ActivityProfile,
        significance: GateSignificance,
        space: DesignSpace,
        stream: Vec<Vec<u32>>,
        targets: Vec<usize>,
        cfg: ExplorerConfig,
    ) -> Explorer {
        let n = space.points().len();
        Explorer {
            lib,
            base,
            profile,
            significance,
            space,
            stream,
            targets,
            clock_period: cfg.clock_period,
            baseline_accuracy: cfg.baseline_accuracy,
            battery: cfg.battery,
            loss_threshold: cfg.loss_threshold,
            points: (0..n).map(|_| OnceLock::new()).collect(),
            memo: Mutex::new(HashMap::new()),
        }
    }

    pub fn netlist_for(&self, tau: usize, phi: usize) -> Result<Netlist, DseError> {
        Ok(match self.space.prune_config(tau, phi) {
            None => self.base.clone(),
            Some(cfg) => prune(&self.base, &self.profile, &self.significance, cfg)?,
        })
    }

    pub fn point(&self, tau: usize, phi: usize) -> Arc<PointData> {
        let k = self.space.point_index(tau, phi);
        self.points[k]
            .get_or_init(|| {
                let n = self.netlist_for(tau, phi).expect("profile taken on base netlist");
                Arc::new(self.build_point(n))
            })
            .clone()
    }

    fn build_point(&self, netlist: Netlist) -> PointData {
        let at = nominal_arrivals(&netlist, &self.lib);
        let (cb, bus) = netlist.output_bus(BusRole::Class).next().expect("netlist has a class bus");
        let class_arrival: Vec<f64> = bus.bits.iter().map(|b| at[b.index()]).collect();
        let critical_path = netlist
            .outputs
            .iter()
            .flat_map(|b| b.bits.iter())
            .map(|b| at[b.index()])
            .fold(0.0, f64::max);
        let sim = simulate(&netlist, &self.stream).expect("valid netlist");
        let class_words = SimResult {
            vectors: sim.vectors,
            words: vec![sim.words[cb].clone()],
            buses: vec![sim.buses[cb].clone()],
        };
        let prof = profile(&netlist, &self.stream).expect("nonempty stream");
        let pw = power(&netlist, &prof, &self.lib, self.lib.voltage().v_nominal, self.clock_period)
            .expect("fresh profile");
        let accuracy = self.score(&class_words.predictions());
        PointData {
            area: netlist.area(&self.lib),
            netlist,
            critical_path,
            accuracy,
            power: pw,
            class_arrival,
            class_words,
        }
    }

    fn score(&self, predictions: &[usize]) -> f64 {
        if self.targets.is_empty() {
            return 0.0;
        }
        let hit = predictions.iter().zip(&self.targets).filter(|(p, t)| p == t).count();
        hit as f64 / self.targets.len() as f64
    }

    /// Accuracy of a point's design on the stream at supply `v`.
    pub fn vos_accuracy(&self, p: &PointData, v: f64) -> f64 {
        let scale = delay_scale(self.lib.voltage(), v).expect("grid voltage above threshold");
        let late: Vec<bool> = p.class_arrival.iter().map(|a| a * scale > self.clock_period).collect();
        if !late.iter().any(|&l| l) {
            return p.accuracy;
        }
        let mut r = p.class_words.clone();
        apply_stale(&mut r, &[late]);
        self.score(&r.predictions())
    }

    /// All `(τ_c, φ_c)` points at nominal voltage.
    pub fn grid(&self) -> Vec<GridEval> {
        self.space
            .points()
            .into_par_iter()
            .map(|(tau, phi)| {
                let p = self.point(tau, phi);
                GridEval {
                    tau,
                    phi,
                    tau_c: self.space.tau_grid[tau],
                    phi_c: self.space.phi_options[tau][phi],
                    gates: p.netlist.gate_count(),
                    area: p.area,
                    critical_path: p.critical_path,
                    accuracy: p.accuracy,
                    accuracy_loss: self.baseline_accuracy - p.accuracy,
                    power: p.power,
                }
            })
            .collect()
    }

    pub fn evaluations(&self) -> usize {
        self.memo.lock().expect("memo lock").len()
    }

    fn compute(&self, c: Chromosome) -> EvaluatedDesign {
        let p = self.point(c.tau, c.phi);
        let v = self.space.voltages[c.vdd];
        let accuracy = self.vos_accuracy(&p, v);
        let pw = rescale_power(&p.power, v).p_total;
        let loss = self.baseline_accuracy - accuracy;
        let violation = (pw - self.battery.p_bat).max(0.0) / self.battery.p_bat + (loss - self.loss_threshold).max(0.0);
        EvaluatedDesign {
            chromosome: c,
            tau_c: self.space.tau_grid[c.tau],
            phi_c: self.space.phi_c(c),
            v_dd: v,
            accuracy,
            accuracy_loss: loss,
            area: p.area,
            power: pw,
            feasible: violation == 0.0,
            violation,
        }
    }
}

impl Evaluate for Explorer {
    fn space(&self) -> &DesignSpace {
        &self.space
    }

    fn evaluate(&self, c: Chromosome) -> EvaluatedDesign {
        if let Some(d) = self.memo.lock().expect("memo lock").get(&c) {
            return d.clone();
        }
        let d = self.compute(c);
        self.memo.lock().expect("memo lock").insert(c, d.clone());
        d
    }
}

/// Drop points over the accuracy-loss cutoff, then every `(point, V_dd)`
/// pair whose rescaled power exceeds the battery.
pub fn prune_space(grid: &[GridEval], voltages: &[f64], battery: &Battery, cutoff: f64) -> Vec<Chromosome> {
    let mut out = Vec::new();
    for g in grid.iter().filter(|g| g.accuracy_loss <= cutoff) {
        for (vdd, &v) in voltages.iter().enumerate() {
            if rescale_power(&g.power, v).p_total <= battery.p_bat {
                out.push(Chromosome {
                    tau: g.tau,
                    phi: g.phi,
                    vdd,
                });
            }
        }
    }
    out
}

/// Chromosomes passing the fast pre-screen: zero-delay loss within `T` and
/// `V_dd` no higher than the budget allows.
pub fn screen(grid: &[GridEval], space: &DesignSpace, reduced: &[Chromosome], battery: &Battery, loss_threshold: f64) -> Vec<Chromosome> {
    let by_point: HashMap<(usize, usize), &GridEval> = grid.iter().map(|g| ((g.tau, g.phi), g)).collect();
    reduced
        .iter()
        .copied()
        .filter(|c| {
            let g = by_point[&(c.tau, c.phi)];
            g.accuracy_loss <= loss_threshold
                && min_voltage_for_budget(&g.power, &space.voltages, battery.p_bat)
                    .is_some_and(|vmax| space.voltages[c.vdd] <= vmax + 1e-12)
        })
        .collect()
}

/// `λ` chromosomes drawn uniformly from `candidates`, without replacement
/// while possible.
pub fn pop_init(candidates: &[Chromosome], lambda: usize, seed: u64) -> Result<Vec<Chromosome>, DseError> {
    if candidates.is_empty() {
        return Err(DseError::EmptySpace);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pop: Vec<Chromosome> = Vec::with_capacity(lambda);
    while pop.len() < lambda {
        let take = (lambda - pop.len()).min(candidates.len());
        pop.extend(sample(&mut rng, candidates.len(), take).into_iter().map(|i| candidates[i]));
    }
    Ok(pop)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    pub population: usize,
    pub epochs: usize,
    pub loss_threshold: f64,
    pub seed: u64,
    pub prune_loss_cutoff: f64,
}

impl GaConfig {
    pub fn default_epochs(is_mlp: bool) -> usize {
        if is_mlp {
            4
        } else {
            8
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DseResult {
    pub archive: Vec<EvaluatedDesign>,
    /// Best feasible accuracy in the population after each epoch (index 0 is
    /// the initial population).
    pub best_accuracy: Vec<Option<f64>>,
    pub evaluated: usize,
}

/// Constraint-domination: feasible beats infeasible, lower violation beats
/// higher, otherwise Pareto dominance.
fn c_dominates(a: &EvaluatedDesign, b: &EvaluatedDesign) -> bool {
    match (a.feasible, b.feasible) {
        (true, false) => true,
        (false, true) => false,
        (false, false) => a.violation < b.violation,
        (true, true) => dominates(&a.objectives(), &b.objectives()),
    }
}

fn sort_fronts(pop: &[EvaluatedDesign]) -> Vec<Vec<usize>> {
    let n = pop.len();
    let mut dominated_by = vec![0usize; n];
    let mut dominates_list: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in 0..n {
            if i != j && c_dominates(&pop[i], &pop[j]) {
                dominates_list[i].push(j);
            } else if i != j && c_dominates(&pop[j], &pop[i]) {
                dominated_by[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| dominated_by[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominates_list[i] {
                dominated_by[j] -= 1;
                if dominated_by[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    fronts
}

fn crowding(pop: &[EvaluatedDesign], front: &[usize]) -> Vec<f64> {
    let mut d = vec![0.0f64; front.len()];
    if front.len() <= 2 {
        return vec![f64::INFINITY; front.len()];
    }
    for m in 0..3 {
        let mut order: Vec<usize> = (0..front.len()).collect();
        order.sort_by(|&a, &b| pop[front[a]].objectives()[m].total_cmp(&pop[front[b]].objectives()[m]));
        let lo = pop[front[order[0]]].objectives()[m];
        let hi = pop[front[*order.last().unwrap()]].objectives()[m];
        d[order[0]] = f64::INFINITY;
        d[*order.last().unwrap()] = f64::INFINITY;
        if hi > lo {
            for k in 1..order.len() - 1 {
                let prev = pop[front[order[k - 1]]].objectives()[m];
                let next = pop[front[order[k + 1]]].objectives()[m];
                d[order[k]] += (next - prev) / (hi - lo);
            }
        }
    }
    d
}

/// Rank and crowding distance per member.
fn rank_and_crowd(pop: &[EvaluatedDesign]) -> (Vec<usize>, Vec<f64>) {
    let mut rank = vec![0; pop.len()];
    let mut crowd = vec![0.0; pop.len()];
    for (r, front) in sort_fronts(pop).iter().enumerate() {
        for (k, &i) in front.iter().enumerate() {
            rank[i] = r;
            crowd[i] = crowding(pop, front)[k];
        }
    }
    (rank, crowd)
}

fn select_survivors(pop: &[EvaluatedDesign], lambda: usize) -> Vec<EvaluatedDesign> {
    let mut out = Vec::with_capacity(lambda);
    for front in sort_fronts(pop) {
        if out.len() + front.len() <= lambda {
            out.extend(front.iter().map(|&i| pop[i].clone()));
            continue;
        }
        let d = crowding(pop, &front);
        let mut order: Vec<usize> = (0..front.len()).collect();
        order.sort_by(|&a, &b| d[b].total_cmp(&d[a]).then(pop[front[a]].chromosome.cmp(&pop[front[b]].chromosome)));
        out.extend(order.iter().take(lambda - out.len()).map(|&k| pop[front[k]].clone()));
        break;
    }
    out
}

fn tournament(rng: &mut ChaCha8Rng, rank: &[usize], crowd: &[f64]) -> usize {
    let a = rng.gen_range(0..rank.len());
    let b = rng.gen_range(0..rank.len());
    if (rank[a], -crowd[a]) <= (rank[b], -crowd[b]) {
        a
    } else {
        b
    }
}

fn offspring(
    rng: &mut ChaCha8Rng,
    space: &DesignSpace,
    a: Chromosome,
    b: Chromosome,
    admissible: &HashSet<Chromosome>,
    pool: &[Chromosome],
    seen: &HashSet<Chromosome>,
) -> Chromosome {
    let mut fallback = None;
    for _ in 0..32 {
        let ga = [a.tau, a.phi, a.vdd];
        let gb = [b.tau, b.phi, b.vdd];
        let cut = rng.gen_range(1..3);
        let mut g = [0usize; 3];
        for k in 0..3 {
            g[k] = if k < cut { ga[k] } else { gb[k] };
        }
        if rng.gen_bool(1.0 / 3.0) {
            g[0] = rng.gen_range(0..space.tau_grid.len());
        }
        g[1] = g[1].min(space.phi_options[g[0]].len() - 1);
        if rng.gen_bool(1.0 / 3.0) {
            g[1] = rng.gen_range(0..space.phi_options[g[0]].len());
        }
        if rng.gen_bool(1.0 / 3.0) {
            g[2] = rng.gen_range(0..space.voltages.len());
        }
        let c = Chromosome {
            tau: g[0],
            phi: g[1],
            vdd: g[2],
        };
        if admissible.contains(&c) {
            if !seen.contains(&c) {
                return c;
            }
            fallback.get_or_insert(c);
        }
    }
    let fresh: Vec<&Chromosome> = pool.iter().filter(|c| !seen.contains(c)).collect();
    match fresh.choose(rng) {
        Some(&&c) => c,
        None => fallback.unwrap_or_else(|| *pool.choose(rng).expect("nonempty pool")),
    }
}

/// NSGA-II from `initial`; offspring are kept inside `admissible` and
/// steered towards points not yet evaluated.
pub fn evolve<E: Evaluate>(
    initial: &[Chromosome],
    admissible: &[Chromosome],
    cfg: &GaConfig,
    eval: &E,
) -> Result<DseResult, DseError> {
    if cfg.population < 2 && initial.len() >= 2 {
        return Err(DseError::Population(cfg.population));
    }
    if admissible.is_empty() {
        return Err(DseError::EmptySpace);
    }
    let space = eval.space();
    let allowed: HashSet<Chromosome> = admissible.iter().copied().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut seen: HashMap<Chromosome, EvaluatedDesign> = HashMap::new();
    let run = |cs: &[Chromosome], seen: &mut HashMap<Chromosome, EvaluatedDesign>| {
        let ds: Vec<EvaluatedDesign> = cs.par_iter().map(|&c| eval.evaluate(c)).collect();
        for d in &ds {
            seen.entry(d.chromosome).or_insert_with(|| d.clone());
        }
        ds
    };
    let best = |pop: &[EvaluatedDesign]| {
        pop.iter()
            .filter(|d| d.feasible)
            .map(|d| d.accuracy)
            .fold(None, |m: Option<f64>, a| Some(m.map_or(a, |m| m.max(a))))
    };
    let mut pop = run(initial, &mut seen);
    let mut best_accuracy = vec![best(&pop)];
    let lambda = cfg.population.max(1);
    for _ in 0..cfg.epochs {
        let (rank, crowd) = rank_and_crowd(&pop);
        let mut proposed: HashSet<Chromosome> = seen.keys().copied().collect();
        let kids: Vec<Chromosome> = (0..lambda)
            .map(|_| {
                let a = pop[tournament(&mut rng, &rank, &crowd)].chromosome;
                let b = pop[tournament(&mut rng, &rank, &crowd)].chromosome;
                let c = offspring(&mut rng, space, a, b, &allowed, admissible, &proposed);
                proposed.insert(c);
                c
            })
            .collect();
        let mut merged = pop.clone();
        merged.extend(run(&kids, &mut seen));
        // copies would crowd out distinct neighbours
        let mut unique = HashSet::new();
        merged.retain(|d| unique.insert(d.chromosome));
        pop = select_survivors(&merged, lambda);
        best_accuracy.push(best(&pop));
    }
    let mut all: Vec<EvaluatedDesign> = seen.into_values().filter(|d| d.feasible).collect();
    all.sort_by_key(|d| d.chromosome);
    Ok(DseResult {
        archive: pareto_front(&all),
        best_accuracy,
        evaluated: all.len(),
    })
}

pub fn archive_json(r: &DseResult, manifest: &str) -> String {
    #[derive(Serialize)]
    struct Out<'a> {
        manifest: &'a str,
        #[serde(flatten)]
        result: &'a DseResult,
    }
    serde_json::to_string_pretty(&Out { manifest, result: r }).expect("archive serialises")
}

pub fn pareto_csv(designs: &[EvaluatedDesign], manifest: &str) -> String {
    let mut s = String::from("manifest,tau_c,phi_c,v_dd,accuracy,accuracy_loss,area,power,feasible\n");
    for d in designs {
        let phi = d.phi_c.map_or_else(|| "none".to_owned(), |p| p.to_string());
        let _ = writeln!(
            s,
            "{manifest},{:.2},{phi},{:.2},{:.6},{:.6},{:.4},{:.6},{}",
            d.tau_c, d.v_dd, d.accuracy, d.accuracy_loss, d.area, d.power, d.feasible
        );
    }
    s
}

pub fn grid_csv(grid: &[GridEval], manifest: &str) -> String {
    let mut s = String::from("manifest,tau_c,phi_c,gates,area,critical_path,accuracy,accuracy_loss,p_static,p_dynamic,p_total\n");
    for g in grid {
        let phi = g.phi_c.map_or_else(|| "none".to_owned(), |p| p.to_string());
        let _ = writeln!(
            s,
            "{manifest},{:.2},{phi},{},{:.4},{:.4},{:.6},{:.6},{:.6},{:.6},{:.6}",
            g.tau_c, g.gates, g.area, g.critical_path, g.accuracy, g.accuracy_loss, g.power.p_static, g.power.p_dynamic, g.power.p_total
        );
    }
    s
}
