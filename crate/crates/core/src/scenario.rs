//! Scenario sweeps: every (VM count, seed, weighting) combination is solved
//! exactly, then the weightings are compared on total power.
//!
//! Output files are a pure function of the config. Solve times are logged but
//! never written, so a rerun overwrites each file with identical bytes.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::export_milp;
use crate::power::{DeviceSpecs, Weights};
use crate::solver::{solve_bnb, Instance, SolveOptions, Status};
use crate::topology::{NodeId, Topology, TopologyConfig};
use crate::workload::{generate_workload, WorkloadConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightEntry {
    pub label: String,
    pub alpha: f64,
    pub beta: f64,
    #[serde(default)]
    pub lexicographic: bool,
}

impl WeightEntry {
    pub fn weights(&self) -> Weights {
        Weights { alpha: self.alpha, beta: self.beta, lexicographic: self.lexicographic }
    }
}

fn default_budget() -> f64 {
    60.0
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("results")
}

fn default_weights() -> Vec<WeightEntry> {
    vec![
        WeightEntry { label: "net-only".into(), alpha: 1000.0, beta: 1.0, lexicographic: false },
        WeightEntry { label: "equal".into(), alpha: 1.0, beta: 1.0, lexicographic: false },
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub topology: TopologyConfig,
    #[serde(default)]
    pub workload: WorkloadConfig,
    pub vm_counts: Vec<usize>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub devices: DeviceSpecs,
    /// Defaults to the network-first and equal pair of [`ScenarioConfig::standard`].
    #[serde(default = "default_weights")]
    pub weights: Vec<WeightEntry>,
    /// `[baseline, candidate]` labels for the reduction table. Defaults to the
    /// first two weight entries.
    #[serde(default)]
    pub compare: Option<[String; 2]>,
    #[serde(default = "default_budget")]
    pub budget_seconds: f64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    /// Worker threads; 0 means one per available core.
    #[serde(default)]
    pub threads: usize,
    /// Also write the MILP of every run under `lp/`.
    #[serde(default)]
    pub export_lp: bool,
}

impl ScenarioConfig {
    /// Two weightings (network-first and equal) over 10/15/20 VMs and seeds 1-20.
    pub fn standard() -> Self {
        ScenarioConfig {
            topology: TopologyConfig::default(),
            workload: WorkloadConfig::default(),
            vm_counts: vec![10, 15, 20],
            seeds: (1..=20).collect(),
            devices: DeviceSpecs::default(),
            weights: default_weights(),
            compare: None,
            budget_seconds: default_budget(),
            out_dir: default_out_dir(),
            threads: 0,
            export_lp: false,
        }
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.is_empty() || self.seeds.is_empty() || self.vm_counts.is_empty() {
            return Err(Error::InvalidConfig("need at least one weight entry, seed and VM count".into()));
        }
        let mut labels: Vec<&str> = self.weights.iter().map(|w| w.label.as_str()).collect();
        labels.sort_unstable();
        labels.dedup();
        if labels.len() != self.weights.len() {
            return Err(Error::InvalidConfig("weight labels must be unique".into()));
        }
        for w in &self.weights {
            if w.label.is_empty() || !w.label.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
                return Err(Error::InvalidConfig(format!("label {:?} must be [A-Za-z0-9_-]+", w.label)));
            }
            if !(w.alpha >= 0.0 && w.beta >= 0.0 && w.alpha.is_finite() && w.beta.is_finite()) {
                return Err(Error::InvalidConfig(format!("weights of {} must be finite and >= 0", w.label)));
            }
        }
        if let Some([a, b]) = &self.compare {
            for l in [a, b] {
                if !self.weights.iter().any(|w| &w.label == l) {
                    return Err(Error::InvalidConfig(format!("compare label {l} has no weight entry")));
                }
            }
        }
        if !(self.budget_seconds > 0.0 && self.budget_seconds.is_finite()) {
            return Err(Error::InvalidConfig("budget_seconds must be positive".into()));
        }
        self.workload.validate()?;
        self.devices.validate()?;
        if self.devices.cells.len() != self.topology.cells {
            return Err(Error::InvalidConfig(format!(
                "{} server specs for {} cells",
                self.devices.cells.len(),
                self.topology.cells
            )));
        }
        Ok(())
    }

    fn comparison(&self) -> Option<(String, String)> {
        match &self.compare {
            Some([a, b]) => Some((a.clone(), b.clone())),
            None if self.weights.len() >= 2 => Some((self.weights[0].label.clone(), self.weights[1].label.clone())),
            None => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunRecord {
    pub vm_count: usize,
    pub seed: u64,
    pub label: String,
    pub alpha: f64,
    pub beta: f64,
    pub status: Status,
    pub objective: Option<f64>,
    pub n_pc_w: Option<f64>,
    pub p_pc_w: Option<f64>,
    pub total_w: Option<f64>,
    pub nodes_explored: u64,
    pub per_cell_w: BTreeMap<usize, f64>,
    pub cell_cpu_ghz: BTreeMap<usize, f64>,
    pub server_utilization: BTreeMap<NodeId, f64>,
    /// Wall-clock solve time; kept out of every written file.
    #[serde(skip)]
    pub solve_time: Duration,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Reduction {
    pub vm_count: usize,
    pub seed: u64,
    pub baseline_total_w: f64,
    pub candidate_total_w: f64,
    /// `(baseline - candidate) / baseline`.
    pub reduction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub baseline: Option<String>,
    pub candidate: Option<String>,
    pub runs: Vec<RunRecord>,
    pub reductions: Vec<Reduction>,
    /// Mean reduction per VM count, over the pairs in `reductions`.
    pub mean_reduction: BTreeMap<usize, f64>,
    pub cells: usize,
}

impl RunReport {
    pub fn count(&self, status: Status) -> usize {
        self.runs.iter().filter(|r| r.status == status).count()
    }

    /// 0 when every run is optimal, 3 if any aborted, otherwise 2 if any infeasible.
    pub fn exit_code(&self) -> i32 {
        if self.count(Status::Aborted) > 0 {
            3
        } else if self.count(Status::Infeasible) > 0 {
            2
        } else {
            0
        }
    }

    pub fn run(&self, vm_count: usize, seed: u64, label: &str) -> Option<&RunRecord> {
        self.runs.iter().find(|r| r.vm_count == vm_count && r.seed == seed && r.label == label)
    }
}

fn solve_one(
    cfg: &ScenarioConfig,
    topo: &Topology,
    vm_count: usize,
    seed: u64,
    entry: &WeightEntry,
) -> Result<RunRecord> {
    let workload = generate_workload(vm_count, &cfg.workload, topo, seed)?;
    let inst = Instance::new(topo, &workload, &cfg.devices)?;
    let weights = entry.weights();
    let started = Instant::now();
    let sol = solve_bnb(&inst, &weights, SolveOptions { time_budget: Duration::from_secs_f64(cfg.budget_seconds) })?;
    let solve_time = started.elapsed();
    log::info!(
        "{vm_count} VMs seed {seed} {}: {:?} after {} nodes in {:.2?}",
        entry.label,
        sol.status,
        sol.nodes_explored,
        solve_time
    );
    if cfg.export_lp {
        let dir = cfg.out_dir.join("lp");
        fs::create_dir_all(&dir)?;
        let doc = export_milp(&inst, &weights)?;
        fs::write(dir.join(format!("n{vm_count}_s{seed}_{}.lp", entry.label)), doc.to_lp_string())?;
    }
    let report = sol.report.as_ref();
    Ok(RunRecord {
        vm_count,
        seed,
        label: entry.label.clone(),
        alpha: entry.alpha,
        beta: entry.beta,
        status: sol.status,
        objective: report.map(|r| r.objective),
        n_pc_w: report.map(|r| r.n_pc_w),
        p_pc_w: report.map(|r| r.p_pc_w),
        total_w: report.map(|r| r.total_w()),
        nodes_explored: sol.nodes_explored,
        per_cell_w: report.map(|r| r.per_cell_w.clone()).unwrap_or_default(),
        cell_cpu_ghz: report.map(|r| r.cell_cpu_ghz.clone()).unwrap_or_default(),
        server_utilization: report.map(|r| r.server_utilization.clone()).unwrap_or_default(),
        solve_time,
    })
}

/// Solve every combination without writing anything. Results come back in
/// canonical (VM count, seed, weight entry) order whatever the thread count.
pub fn solve_scenario(cfg: &ScenarioConfig) -> Result<RunReport> {
    cfg.validate()?;
    let topo = Topology::build(&cfg.topology)?;
    if let Some(w) = cfg.workload.capacity_warning(&cfg.devices) {
        log::warn!("{w}");
    }
    let mut jobs = Vec::new();
    for &n in &cfg.vm_counts {
        for &seed in &cfg.seeds {
            for entry in &cfg.weights {
                jobs.push((n, seed, entry));
            }
        }
    }
    let threads = match cfg.threads {
        0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
        t => t,
    }
    .min(jobs.len().max(1));

    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<RunRecord>>>> = Mutex::new(vec![None; jobs.len()]);
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(n, seed, entry)) = jobs.get(i) else { break };
                let r = solve_one(cfg, &topo, n, seed, entry);
                results.lock().expect("no worker panics while holding the lock")[i] = Some(r);
            });
        }
    });
    let runs = results
        .into_inner()
        .expect("workers joined")
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect::<Result<Vec<_>>>()?;

    let comparison = cfg.comparison();
    let mut reductions = Vec::new();
    if let Some((base, cand)) = &comparison {
        for &n in &cfg.vm_counts {
            for &seed in &cfg.seeds {
                let find = |l: &str| runs.iter().find(|r| r.vm_count == n && r.seed == seed && r.label == l);
                if let (Some(b), Some(c)) = (find(base), find(cand)) {
                    if let (Status::Optimal, Status::Optimal, Some(p1), Some(p2)) =
                        (b.status, c.status, b.total_w, c.total_w)
                    {
                        reductions.push(Reduction {
                            vm_count: n,
                            seed,
                            baseline_total_w: p1,
                            candidate_total_w: p2,
                            reduction: (p1 - p2) / p1,
                        });
                    }
                }
            }
        }
    }
    let mut mean_reduction = BTreeMap::new();
    for &n in &cfg.vm_counts {
        let xs: Vec<f64> = reductions.iter().filter(|r| r.vm_count == n).map(|r| r.reduction).collect();
        if !xs.is_empty() {
            mean_reduction.insert(n, xs.iter().sum::<f64>() / xs.len() as f64);
        }
    }
    let (baseline, candidate) = comparison.map_or((None, None), |(a, b)| (Some(a), Some(b)));
    Ok(RunReport { baseline, candidate, runs, reductions, mean_reduction, cells: cfg.topology.cells })
}

/// Solve, then write every output file into `cfg.out_dir`.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunReport> {
    let report = solve_scenario(cfg)?;
    write_report(&report, &cfg.out_dir)?;
    Ok(report)
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn write_csv(path: &Path, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Summary<'a> {
    runs_total: usize,
    optimal: usize,
    infeasible: usize,
    aborted: usize,
    exit_code: i32,
    baseline: &'a Option<String>,
    candidate: &'a Option<String>,
    mean_reduction: &'a BTreeMap<usize, f64>,
    /// `(vm_count, seed, label)` of every run that is not optimal.
    flagged: Vec<(usize, u64, &'a str, Status)>,
    runs: &'a [RunRecord],
    reductions: &'a [Reduction],
}

/// Write the run tables, the summary and the figure tables. Returns the paths written.
pub fn write_report(report: &RunReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    let path = dir.join("runs.csv");
    write_csv(
        &path,
        &[
            "vm_count",
            "seed",
            "label",
            "alpha",
            "beta",
            "status",
            "objective",
            "n_pc_w",
            "p_pc_w",
            "total_w",
            "nodes_explored",
        ],
        report
            .runs
            .iter()
            .map(|r| {
                vec![
                    r.vm_count.to_string(),
                    r.seed.to_string(),
                    r.label.clone(),
                    r.alpha.to_string(),
                    r.beta.to_string(),
                    format!("{:?}", r.status),
                    opt(r.objective),
                    opt(r.n_pc_w),
                    opt(r.p_pc_w),
                    opt(r.total_w),
                    r.nodes_explored.to_string(),
                ]
            })
            .collect(),
    )?;
    written.push(path);

    let path = dir.join("cells.csv");
    write_csv(
        &path,
        &["vm_count", "seed", "label", "cell", "power_w", "cpu_ghz"],
        report
            .runs
            .iter()
            .flat_map(|r| {
                r.per_cell_w.iter().map(move |(c, w)| {
                    vec![
                        r.vm_count.to_string(),
                        r.seed.to_string(),
                        r.label.clone(),
                        c.to_string(),
                        w.to_string(),
                        r.cell_cpu_ghz.get(c).copied().unwrap_or(0.0).to_string(),
                    ]
                })
            })
            .collect(),
    )?;
    written.push(path);

    let path = dir.join("reductions.csv");
    write_csv(
        &path,
        &["vm_count", "seed", "baseline_total_w", "candidate_total_w", "reduction"],
        report
            .reductions
            .iter()
            .map(|r| {
                vec![
                    r.vm_count.to_string(),
                    r.seed.to_string(),
                    r.baseline_total_w.to_string(),
                    r.candidate_total_w.to_string(),
                    r.reduction.to_string(),
                ]
            })
            .collect(),
    )?;
    written.push(path);

    let path = dir.join("reduction_means.csv");
    write_csv(
        &path,
        &["vm_count", "pairs", "mean_reduction"],
        report
            .mean_reduction
            .iter()
            .map(|(n, m)| {
                let pairs = report.reductions.iter().filter(|r| r.vm_count == *n).count();
                vec![n.to_string(), pairs.to_string(), m.to_string()]
            })
            .collect(),
    )?;
    written.push(path);

    written.extend(emit_plot_data(report, dir)?);

    let summary = Summary {
        runs_total: report.runs.len(),
        optimal: report.count(Status::Optimal),
        infeasible: report.count(Status::Infeasible),
        aborted: report.count(Status::Aborted),
        exit_code: report.exit_code(),
        baseline: &report.baseline,
        candidate: &report.candidate,
        mean_reduction: &report.mean_reduction,
        flagged: report
            .runs
            .iter()
            .filter(|r| r.status != Status::Optimal)
            .map(|r| (r.vm_count, r.seed, r.label.as_str(), r.status))
            .collect(),
        runs: &report.runs,
        reductions: &report.reductions,
    };
    let path = dir.join("summary.json");
    let mut json = serde_json::to_string_pretty(&summary).map_err(|e| Error::Io(e.to_string()))?;
    json.push('\n');
    fs::write(&path, json)?;
    written.push(path);

    let path = dir.join("status.txt");
    let mut status = format!(
        "runs {}\noptimal {}\ninfeasible {}\naborted {}\nexit_code {}\n",
        summary.runs_total, summary.optimal, summary.infeasible, summary.aborted, summary.exit_code
    );
    for (n, seed, label, st) in &summary.flagged {
        status.push_str(&format!("{st:?} vm_count={n} seed={seed} label={label}\n"));
    }
    fs::write(&path, status)?;
    written.push(path);
    Ok(written)
}

/// Per weighting: total power against VM count, power and CPU per cell, and
/// mean utilization per server. Means are over optimal runs only; VM counts
/// with no optimal run get no row.
pub fn emit_plot_data(report: &RunReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut labels: Vec<&str> = Vec::new();
    for r in &report.runs {
        if !labels.contains(&r.label.as_str()) {
            labels.push(&r.label);
        }
    }
    let mut counts: Vec<usize> = report.runs.iter().map(|r| r.vm_count).collect();
    counts.sort_unstable();
    counts.dedup();

    let mut written = Vec::new();
    for label in labels {
        let optimal = |n: usize| -> Vec<&RunRecord> {
            report.runs.iter().filter(|r| r.label == label && r.vm_count == n && r.status == Status::Optimal).collect()
        };

        let mut total_rows = Vec::new();
        let mut cell_rows = Vec::new();
        let mut util_rows = Vec::new();
        for &n in &counts {
            let runs = optimal(n);
            if runs.is_empty() {
                continue;
            }
            let col = |f: fn(&RunRecord) -> Option<f64>| mean(&runs.iter().filter_map(|r| f(r)).collect::<Vec<_>>());
            total_rows.push(vec![
                n.to_string(),
                runs.len().to_string(),
                col(|r| r.n_pc_w).to_string(),
                col(|r| r.p_pc_w).to_string(),
                col(|r| r.total_w).to_string(),
            ]);
            for c in 0..report.cells {
                let power: Vec<f64> = runs.iter().map(|r| r.per_cell_w.get(&c).copied().unwrap_or(0.0)).collect();
                let cpu: Vec<f64> = runs.iter().map(|r| r.cell_cpu_ghz.get(&c).copied().unwrap_or(0.0)).collect();
                cell_rows.push(vec![n.to_string(), c.to_string(), mean(&power).to_string(), mean(&cpu).to_string()]);
            }
            let servers: Vec<NodeId> = runs[0].server_utilization.keys().copied().collect();
            for s in servers {
                let u: Vec<f64> = runs.iter().map(|r| r.server_utilization.get(&s).copied().unwrap_or(0.0)).collect();
                util_rows.push(vec![
                    n.to_string(),
                    s.cell.map_or(String::new(), |c| c.to_string()),
                    s.to_string(),
                    mean(&u).to_string(),
                ]);
            }
        }

        let path = dir.join(format!("total_power_{label}.csv"));
        write_csv(&path, &["vm_count", "runs", "mean_n_pc_w", "mean_p_pc_w", "mean_total_w"], total_rows)?;
        written.push(path);
        let path = dir.join(format!("cell_power_{label}.csv"));
        write_csv(&path, &["vm_count", "cell", "mean_power_w", "mean_cpu_ghz"], cell_rows)?;
        written.push(path);
        let path = dir.join(format!("utilization_{label}.csv"));
        write_csv(&path, &["vm_count", "cell", "server", "mean_utilization"], util_rows)?;
        written.push(path);
    }
    Ok(written)
}
