//! Config loading, sweep execution and CSV output for the `twinswarm` binary.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use rayon::prelude::*;
use twinswarm::engine::{run_scenario, summarize, MonteCarlo, RunMetrics};
use twinswarm::rng::run_seed;
use twinswarm::{Config, Mode, World};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

/// `[sweep]` section as written in a config file; empty lists fall back to
/// the scenario's own mode and agent count.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub modes: Vec<Mode>,
    pub agents: Vec<usize>,
    pub runs: Option<usize>,
    pub seed_base: Option<u64>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub scenario: Config,
    pub sweep: SweepSection,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub modes: Vec<Mode>,
    pub agents: Vec<usize>,
    pub runs: usize,
    pub seed_base: u64,
    pub out: PathBuf,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.modes.is_empty() {
            return Err(CliError::Config("sweep.modes must not be empty".into()));
        }
        if self.agents.is_empty() {
            return Err(CliError::Config("sweep.agents must not be empty".into()));
        }
        if self.agents.contains(&0) {
            return Err(CliError::Config("n_agents ≥ 1".into()));
        }
        if self.runs < 1 {
            return Err(CliError::Config("runs ≥ 1".into()));
        }
        Ok(())
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub modes: Option<Vec<Mode>>,
    pub agents: Option<Vec<usize>>,
    pub runs: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub max_rounds: Option<u64>,
}

/// A fully materialized, validated invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub scenario: Config,
    pub sweep: SweepSpec,
    /// Directory that relative map paths resolve against.
    pub base_dir: PathBuf,
}

impl Plan {
    /// The effective config in file form, every default filled in.
    pub fn effective(&self) -> ConfigFile {
        ConfigFile {
            scenario: self.scenario.clone(),
            sweep: SweepSection {
                modes: self.sweep.modes.clone(),
                agents: self.sweep.agents.clone(),
                runs: Some(self.sweep.runs),
                seed_base: Some(self.sweep.seed_base),
                out: Some(self.sweep.out.clone()),
            },
        }
    }

    pub fn effective_toml(&self) -> String {
        toml::to_string(&self.effective()).expect("config serializes")
    }

    /// Scenario config of one sweep cell, seeded with the seed base.
    pub fn cell_config(&self, mode: Mode, n_agents: usize) -> Config {
        Config { mode, n_agents, seed: self.sweep.seed_base, ..self.scenario.clone() }
    }
}

pub fn parse_config_str(text: &str) -> Result<ConfigFile, CliError> {
    toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
}

/// Reads and validates a config file.
pub fn parse_config(path: &Path) -> Result<Plan, CliError> {
    load(Some(path), &Overrides::default())
}

/// Builds a plan from an optional config file plus overrides.
pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Plan, CliError> {
    let (file, base_dir) = match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            let file = parse_config_str(&text).map_err(|e| match e {
                CliError::Config(m) => CliError::Config(format!("{}: {m}", p.display())),
                other => other,
            })?;
            let dir = p.parent().map(Path::to_path_buf).unwrap_or_default();
            (file, dir)
        }
        None => (ConfigFile::default(), PathBuf::new()),
    };
    materialize(file, base_dir, overrides)
}

pub fn materialize(file: ConfigFile, base_dir: PathBuf, o: &Overrides) -> Result<Plan, CliError> {
    let mut scenario = file.scenario;
    if let Some(m) = o.max_rounds {
        scenario.max_rounds = m;
    }
    if let Some(s) = o.seed {
        scenario.seed = s;
    }
    let pick_modes = o.modes.clone().filter(|m| !m.is_empty());
    let modes = pick_modes.unwrap_or(if file.sweep.modes.is_empty() { vec![scenario.mode] } else { file.sweep.modes });
    let agents = o.agents.clone().unwrap_or(if file.sweep.agents.is_empty() {
        vec![scenario.n_agents]
    } else {
        file.sweep.agents
    });
    scenario.mode = modes[0];
    if let Some(&n) = agents.first() {
        scenario.n_agents = n;
    }
    let sweep = SweepSpec {
        modes,
        agents,
        runs: o.runs.or(file.sweep.runs).unwrap_or(1),
        seed_base: o.seed.or(file.sweep.seed_base).unwrap_or(scenario.seed),
        out: o.out.clone().or(file.sweep.out).unwrap_or_else(|| PathBuf::from("out")),
    };
    sweep.validate()?;
    scenario.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(Plan { scenario, sweep, base_dir })
}

/// First 16 hex digits of SHA-256 over the cell's effective TOML.
pub fn config_hash(config: &Config) -> String {
    let text = toml::to_string(config).expect("config serializes");
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub mode: Mode,
    pub n_agents: usize,
    pub config_hash: String,
    pub config: Config,
    pub batch: MonteCarlo<f64>,
}

pub fn build_world(plan: &Plan) -> Result<World, CliError> {
    World::from_config(&plan.scenario, Some(&plan.base_dir)).map_err(|e| CliError::Config(e.to_string()))
}

/// Runs every `(mode, n, run)` job on a pool of `jobs` threads (all cores
/// when `None`); results come back in sweep order.
pub fn execute(plan: &Plan, world: &World, jobs: Option<usize>) -> Result<Vec<CellResult>, CliError> {
    let cells: Vec<(Mode, usize)> = plan
        .sweep
        .modes
        .iter()
        .flat_map(|&m| plan.sweep.agents.iter().map(move |&n| (m, n)))
        .collect();
    let runs = plan.sweep.runs;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let total = cells.len();
    let results: Vec<Result<CellResult, CliError>> = pool.install(|| {
        cells
            .iter()
            .enumerate()
            .map(|(k, &(mode, n))| {
                let config = plan.cell_config(mode, n);
                let metrics = (0..runs)
                    .into_par_iter()
                    .map(|i| {
                        let cfg = Config { seed: run_seed(plan.sweep.seed_base, i as u64), ..config.clone() };
                        run_scenario(world, &cfg).map_err(|e| CliError::Runtime(e.to_string()))
                    })
                    .collect::<Result<Vec<RunMetrics<f64>>, _>>()?;
                let batch = summarize(metrics);
                eprintln!(
                    "[{}/{total}] {mode} n={n}: {runs} runs, convergence rate {:.2}, mean moves {:.0}, mean uplink {:.0}, mean downlink {:.0}",
                    k + 1,
                    batch.convergence_rate,
                    batch.all.total_moves.mean,
                    batch.all.uplink.mean,
                    batch.all.downlink.mean,
                );
                Ok(CellResult { mode, n_agents: n, config_hash: config_hash(&config), config, batch })
            })
            .collect()
    });
    results.into_iter().collect()
}

pub const SUMMARY_HEADER: [&str; 13] = [
    "mode",
    "n_agents",
    "run",
    "seed",
    "converged",
    "rounds",
    "total_moves",
    "uplink",
    "downlink",
    "assistance_requests",
    "convergence_fraction",
    "convergence_radius",
    "config_hash",
];

pub const TIMESERIES_HEADER: [&str; 14] = [
    "mode",
    "n_agents",
    "run",
    "round",
    "uplink_attempts",
    "uplink_successes",
    "downlink_attempts",
    "downlink_successes",
    "assistance_requests",
    "moves",
    "arrived",
    "convergence_fraction",
    "gbest_dist",
    "min_dist",
];

pub const AGGREGATE_HEADER: [&str; 19] = [
    "mode",
    "n_agents",
    "runs",
    "convergence_rate",
    "total_moves_mean",
    "total_moves_ci_low",
    "total_moves_ci_high",
    "uplink_mean",
    "uplink_ci_low",
    "uplink_ci_high",
    "downlink_mean",
    "downlink_ci_low",
    "downlink_ci_high",
    "transmissions_mean",
    "transmissions_ci_low",
    "transmissions_ci_high",
    "rounds_mean",
    "convergence_radius",
    "config_hash",
];

fn num(v: f64) -> String {
    if v.is_finite() {
        v.to_string()
    } else {
        String::new()
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>, CliError> {
    csv::Writer::from_path(path).map_err(|e| io_err(path, e))
}

fn write_rows<I, R>(path: &Path, header: &[&str], rows: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(|e| io_err(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn write_summary(path: &Path, cells: &[CellResult]) -> Result<(), CliError> {
    let rows = cells.iter().flat_map(|c| {
        c.batch.runs.iter().enumerate().map(move |(i, r)| {
            vec![
                c.mode.to_string(),
                c.n_agents.to_string(),
                i.to_string(),
                r.seed.to_string(),
                r.converged.to_string(),
                r.rounds_used.to_string(),
                r.total_moves.to_string(),
                r.uplink_attempts.to_string(),
                r.downlink_attempts.to_string(),
                r.assistance_requests.to_string(),
                num(r.final_convergence_fraction),
                num(c.config.convergence_radius),
                c.config_hash.clone(),
            ]
        })
    });
    write_rows(path, &SUMMARY_HEADER, rows)
}

pub fn write_timeseries(path: &Path, cells: &[CellResult]) -> Result<(), CliError> {
    let rows = cells.iter().flat_map(|c| {
        c.batch.runs.iter().enumerate().flat_map(move |(i, r)| {
            r.series.iter().map(move |s| {
                vec![
                    c.mode.to_string(),
                    c.n_agents.to_string(),
                    i.to_string(),
                    s.round.to_string(),
                    s.comm.uplink_attempts.to_string(),
                    s.comm.uplink_successes.to_string(),
                    s.comm.downlink_attempts.to_string(),
                    s.comm.downlink_successes.to_string(),
                    s.comm.assistance_requests.to_string(),
                    s.moves.to_string(),
                    s.arrived.to_string(),
                    num(s.convergence_fraction),
                    num(s.gbest_dist),
                    num(s.min_dist),
                ]
            })
        })
    });
    write_rows(path, &TIMESERIES_HEADER, rows)
}

pub fn write_aggregate(path: &Path, cells: &[CellResult]) -> Result<(), CliError> {
    let rows = cells.iter().map(|c| {
        let a = &c.batch.all;
        vec![
            c.mode.to_string(),
            c.n_agents.to_string(),
            c.batch.runs.len().to_string(),
            num(c.batch.convergence_rate),
            num(a.total_moves.mean),
            num(a.total_moves.ci_low),
            num(a.total_moves.ci_high),
            num(a.uplink.mean),
            num(a.uplink.ci_low),
            num(a.uplink.ci_high),
            num(a.downlink.mean),
            num(a.downlink.ci_low),
            num(a.downlink.ci_high),
            num(a.transmissions.mean),
            num(a.transmissions.ci_low),
            num(a.transmissions.ci_high),
            num(a.rounds.mean),
            num(c.config.convergence_radius),
            c.config_hash.clone(),
        ]
    });
    write_rows(path, &AGGREGATE_HEADER, rows)
}

pub fn write_per_field(path: &Path, world: &World) -> Result<(), CliError> {
    let mut f = fs::File::create(path).map_err(|e| io_err(path, e))?;
    f.write_all(world.field.to_csv().as_bytes()).map_err(|e| io_err(path, e))
}

pub const SUMMARY_FILE: &str = "summary.csv";
pub const TIMESERIES_FILE: &str = "timeseries.csv";
pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const EFFECTIVE_CONFIG_FILE: &str = "effective_config.toml";
pub const PER_FIELD_FILE: &str = "per_field.csv";

/// Runs the plan and writes every output file into `plan.sweep.out`.
///
/// `per_field` exports the PER grid; `Some(None)` uses the default file name.
pub fn run_sweep(plan: &Plan, jobs: Option<usize>, per_field: Option<Option<&Path>>) -> Result<Vec<CellResult>, CliError> {
    let out = &plan.sweep.out;
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    let effective = plan.effective_toml();
    eprintln!("# effective config\n{effective}");
    let cfg_path = out.join(EFFECTIVE_CONFIG_FILE);
    fs::write(&cfg_path, &effective).map_err(|e| io_err(&cfg_path, e))?;

    let world = build_world(plan)?;
    if let Some(target) = per_field {
        let path = target.map_or_else(|| out.join(PER_FIELD_FILE), Path::to_path_buf);
        write_per_field(&path, &world)?;
    }
    let cells = execute(plan, &world, jobs)?;
    write_summary(&out.join(SUMMARY_FILE), &cells)?;
    write_aggregate(&out.join(AGGREGATE_FILE), &cells)?;
    write_timeseries(&out.join(TIMESERIES_FILE), &cells)?;
    Ok(cells)
}
