use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fogplace::lp::export_milp;
use fogplace::scenario::{run_scenario, ScenarioConfig};
use fogplace::solver::{solve_bnb, solve_bruteforce, DEFAULT_ORACLE_CAP};
use fogplace::topology::build_topology;
use fogplace::workload::generate_workload;
use fogplace::{
    DeviceSpecs, Instance, ServerSpec, SolveOptions, Topology, TopologyConfig, Weights, Workload, WorkloadConfig,
};

#[derive(Parser)]
#[command(name = "fogplace", version, about = "Energy-minimizing VM placement across PON-linked fog cells")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write reports.
    Run {
        config: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        budget_seconds: Option<f64>,
        /// Replace the seed list with this single seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Compare branch-and-bound against exhaustive search on random small instances.
    OracleCheck {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        instances: usize,
        #[arg(long, default_value_t = 5)]
        max_vms: usize,
        #[arg(long, default_value_t = 60.0)]
        budget_seconds: f64,
    },
    /// Write the MILP for one instance in LP format.
    ExportLp {
        /// Workload file from `gen-workload`; drawn from --vms/--seed otherwise.
        #[arg(long)]
        workload: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        vms: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Draw a workload and write it as TOML.
    GenWorkload {
        #[arg(long, default_value_t = 10)]
        vms: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn default_instance_parts() -> fogplace::Result<(Topology, DeviceSpecs)> {
    Ok((Topology::build(&TopologyConfig::default())?, DeviceSpecs::default()))
}

fn run(cli: Cli) -> fogplace::Result<u8> {
    match cli.command {
        Command::Run { config, out_dir, budget_seconds, seed, threads } => {
            let mut cfg = ScenarioConfig::load(&config)?;
            if let Some(d) = out_dir {
                cfg.out_dir = d;
            }
            if let Some(b) = budget_seconds {
                cfg.budget_seconds = b;
            }
            if let Some(s) = seed {
                cfg.seeds = vec![s];
            }
            if let Some(t) = threads {
                cfg.threads = t;
            }
            let report = run_scenario(&cfg)?;
            for (n, m) in &report.mean_reduction {
                println!("{n} VMs: mean reduction {:.2}%", 100.0 * m);
            }
            println!(
                "{} runs, {} optimal; reports in {}",
                report.runs.len(),
                report.count(fogplace::Status::Optimal),
                cfg.out_dir.display()
            );
            Ok(report.exit_code() as u8)
        }
        Command::OracleCheck { seed, instances, max_vms, budget_seconds } => {
            oracle_check(seed, instances, max_vms, budget_seconds)
        }
        Command::ExportLp { workload, vms, seed, alpha, beta, out_dir } => {
            let (topo, specs) = default_instance_parts()?;
            let (w, name) = match workload {
                Some(path) => {
                    let stem = path.file_stem().map_or("instance".into(), |s| s.to_string_lossy().into_owned());
                    (Workload::from_toml(&fs::read_to_string(&path)?)?, stem)
                }
                None => (generate_workload(vms, &WorkloadConfig::default(), &topo, seed)?, format!("n{vms}_s{seed}")),
            };
            let inst = Instance::new(&topo, &w, &specs)?;
            let doc = export_milp(&inst, &Weights::new(alpha, beta))?;
            fs::create_dir_all(&out_dir)?;
            let path = out_dir.join(format!("{name}.lp"));
            fs::write(&path, doc.to_lp_string())?;
            println!(
                "wrote {} ({} variables, {} constraints)",
                path.display(),
                doc.variable_count(),
                doc.constraints.len()
            );
            Ok(0)
        }
        Command::GenWorkload { vms, seed, out_dir } => {
            let (topo, specs) = default_instance_parts()?;
            let cfg = WorkloadConfig::default();
            if let Some(w) = cfg.capacity_warning(&specs) {
                log::warn!("{w}");
            }
            let w = generate_workload(vms, &cfg, &topo, seed)?;
            fs::create_dir_all(&out_dir)?;
            let path = out_dir.join(format!("workload_n{vms}_s{seed}.toml"));
            fs::write(&path, w.to_toml()?)?;
            println!("wrote {}", path.display());
            Ok(0)
        }
    }
}

/// Random instances with at most `max_vms` VMs on at most six servers of mixed types.
fn oracle_check(seed: u64, instances: usize, max_vms: usize, budget_seconds: f64) -> fogplace::Result<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let table = [ServerSpec::r620(), ServerSpec::r740(), ServerSpec::ha8000()];
    let mut mismatches = 0;
    for i in 0..instances {
        let cells = rng.gen_range(1..=3);
        let per_cell = rng.gen_range(1..=6 / cells);
        let topo = build_topology(cells, per_cell, 1, fogplace::topology::DEFAULT_LINK_CAPACITY_GBPS)?;
        let specs = DeviceSpecs {
            cells: (0..cells).map(|_| table[rng.gen_range(0..3)].clone()).collect(),
            ..Default::default()
        };
        let n = rng.gen_range(1..=max_vms.max(1));
        let w = generate_workload(n, &WorkloadConfig::default(), &topo, rng.gen())?;
        let inst = Instance::new(&topo, &w, &specs)?;
        let weights = if rng.gen_bool(0.5) { Weights::equal() } else { Weights::new(1000.0, 1.0) };
        let exact = solve_bnb(
            &inst,
            &weights,
            SolveOptions { time_budget: std::time::Duration::from_secs_f64(budget_seconds) },
        )?;
        let oracle = solve_bruteforce(&inst, &weights, DEFAULT_ORACLE_CAP)?;
        if exact.objective() != oracle.objective() || exact.placement != oracle.placement {
            mismatches += 1;
            println!(
                "instance {i}: bnb {:?} {:?} vs oracle {:?} {:?}",
                exact.status,
                exact.objective(),
                oracle.status,
                oracle.objective()
            );
        }
    }
    println!("{instances} instances, {mismatches} mismatches");
    Ok(if mismatches == 0 { 0 } else { 1 })
}
