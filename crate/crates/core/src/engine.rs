//! Round loop, convergence detection and Monte Carlo batches.

use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::avoidance::VfhParams;
use crate::coordinator::{
    dt_exchange, handle_assistance, p2p_exchange, CommLedger, Exchange, Mode, RetryPolicy, RoundComm,
    TwinRegistry,
};
use crate::environment::{sense_distance, MapSpec, WorldMap};
use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::planner::{next_waypoint, plan, PlannerParams};
use crate::radio::{compute_field, RadioField, RadioParams};
use crate::rng::{run_seed, stream, Purpose};
use crate::scalar::Scalar;
use crate::swarm::{
    apply_move, detect_stuck, pso_step, random_walk_step, AgentMode, AgentState, GbestRecord, MoveOutcome,
    PsoParams, Rescue,
};

pub const BUILTIN_PLANT: &str = "builtin:plant";
pub const BUILTIN_EMPTY: &str = "builtin:empty";

/// Immutable per-scenario environment shared by every run.
#[derive(Debug, Clone, PartialEq)]
pub struct World<S> {
    pub map: WorldMap<S>,
    pub field: RadioField<S>,
}

impl<S: Scalar> World<S> {
    pub fn new(map: WorldMap<S>, radio: &RadioParams<S>) -> Self {
        let field = compute_field(&map, radio);
        Self { map, field }
    }

    /// Same map, PER ≡ 0.
    pub fn perfect_channel(map: WorldMap<S>) -> Self {
        let field = RadioField::uniform(&map, S::zero());
        Self { map, field }
    }

    /// Resolves `config.map` (a builtin name or a map file path, relative to
    /// `base_dir` when given) and computes the PER field.
    pub fn from_config(config: &ScenarioConfig<S>, base_dir: Option<&Path>) -> Result<Self> {
        let spec = load_map_spec(&config.map, base_dir)?;
        Ok(Self::new(spec.build()?, &config.radio))
    }
}

pub fn load_map_spec<S: Scalar>(reference: &str, base_dir: Option<&Path>) -> Result<MapSpec<S>> {
    match reference {
        BUILTIN_PLANT => Ok(MapSpec::plant()),
        BUILTIN_EMPTY => Ok(MapSpec::empty()),
        other if other.starts_with("builtin:") => Err(Error::MapFile(format!(
            "unknown builtin map {other:?}; expected {BUILTIN_PLANT} or {BUILTIN_EMPTY}"
        ))),
        path => {
            let path = match base_dir {
                Some(dir) => dir.join(path),
                None => Path::new(path).to_path_buf(),
            };
            let text = std::fs::read_to_string(&path)
                .map_err(|e| Error::MapFile(format!("{}: {e}", path.display())))?;
            MapSpec::from_toml(&text).map_err(|e| Error::MapFile(format!("{}: {e}", path.display())))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, bound = "S: Scalar")]
pub struct ScenarioConfig<S> {
    /// `builtin:plant`, `builtin:empty` or a map file path.
    pub map: String,
    pub mode: Mode,
    pub n_agents: usize,
    pub seed: u64,
    pub max_rounds: u64,
    /// Meters from the target that count as arrived.
    pub convergence_radius: S,
    pub convergence_fraction: S,
    /// Range sensor noise, meters.
    pub sigma: S,
    /// Whether retry modes also retry the downlink leg.
    pub retry_downlink: bool,
    pub pso: PsoParams<S>,
    pub radio: RadioParams<S>,
    pub avoidance: VfhParams<S>,
    pub planner: PlannerParams<S>,
}

impl<S: Scalar> Default for ScenarioConfig<S> {
    fn default() -> Self {
        Self {
            map: BUILTIN_PLANT.into(),
            mode: Mode::DT1,
            n_agents: 20,
            seed: 1,
            max_rounds: 3000,
            convergence_radius: S::lit(10.0),
            convergence_fraction: S::lit(0.9),
            sigma: S::lit(2.0),
            retry_downlink: false,
            pso: PsoParams::default(),
            radio: RadioParams::default(),
            avoidance: VfhParams::default(),
            planner: PlannerParams::default(),
        }
    }
}

impl<S: Scalar> ScenarioConfig<S> {
    pub fn validate(&self) -> Result<()> {
        let invalid = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.n_agents < 1 {
            return invalid("n_agents ≥ 1");
        }
        if self.max_rounds < 1 {
            return invalid("max_rounds ≥ 1");
        }
        if !(self.convergence_fraction > S::zero() && self.convergence_fraction <= S::one()) {
            return invalid("0 < convergence_fraction ≤ 1");
        }
        if !(self.convergence_radius > S::zero() && self.convergence_radius.is_finite()) {
            return invalid("convergence_radius > 0");
        }
        if !(self.sigma >= S::zero() && self.sigma.is_finite()) {
            return invalid("sigma ≥ 0");
        }
        self.pso.validate()?;
        self.radio.validate()?;
        self.avoidance.validate()?;
        self.planner.validate()
    }
}

/// One row of the per-round time series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(bound = "S: Scalar")]
pub struct RoundRecord<S> {
    pub round: u64,
    pub comm: RoundComm,
    /// Executed moves this round.
    pub moves: u64,
    pub arrived: usize,
    pub convergence_fraction: S,
    /// Best sensed distance the coordinating layer knows of (registry, or
    /// the best peer view in P2P); infinite before the first report.
    pub gbest_dist: S,
    /// Closest true distance of any agent to the target after the round.
    pub min_dist: S,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "S: Scalar")]
pub struct RunMetrics<S> {
    pub seed: u64,
    pub converged: bool,
    pub rounds_used: u64,
    pub final_convergence_fraction: S,
    pub total_moves: u64,
    pub uplink_attempts: u64,
    pub uplink_successes: u64,
    pub downlink_attempts: u64,
    pub downlink_successes: u64,
    pub assistance_requests: u64,
    pub series: Vec<RoundRecord<S>>,
}

impl<S> RunMetrics<S> {
    pub fn total_transmissions(&self) -> u64 {
        self.uplink_attempts + self.downlink_attempts
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Convergence<S> {
    pub fraction: S,
    pub converged: bool,
}

pub fn check_convergence<S: Scalar>(
    agents: &[AgentState<S>],
    target: Vec2<S>,
    radius: S,
    fraction: S,
) -> Convergence<S> {
    debug_assert!(radius > S::zero());
    if agents.is_empty() {
        return Convergence { fraction: S::zero(), converged: false };
    }
    let within = agents.iter().filter(|a| a.pos.distance(target) <= radius).count();
    let now = S::from_count(within) / S::from_count(agents.len());
    Convergence { fraction: now, converged: now >= fraction }
}

/// Mutable state of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunState<S> {
    pub seed: u64,
    pub round: u64,
    pub agents: Vec<AgentState<S>>,
    pub registry: TwinRegistry<S>,
    pub ledger: CommLedger,
}

impl<S: Scalar> RunState<S> {
    /// Spawns agents uniformly over the map's spawn cells.
    pub fn spawn(map: &WorldMap<S>, n_agents: usize, seed: u64) -> Self {
        let cells = map.spawn_cells();
        let mut rng = stream(seed, 0, 0, Purpose::Spawn);
        let agents = (0..n_agents)
            .map(|id| {
                let cell = cells[rng.random_range(0..cells.len())];
                let corner = map.cell_center(cell) - Vec2::new(map.cell_size, map.cell_size) * S::lit(0.5);
                let offset = Vec2::new(S::lit(rng.random::<f64>()), S::lit(rng.random::<f64>())) * map.cell_size;
                AgentState::new(id, map.clamp(corner + offset))
            })
            .collect();
        Self::with_agents(agents, seed)
    }

    pub fn with_agents(agents: Vec<AgentState<S>>, seed: u64) -> Self {
        let n = agents.len();
        Self { seed, round: 0, agents, registry: TwinRegistry::new(n), ledger: CommLedger::default() }
    }

    /// The agent views (P2P) or registry gbest (twin modes), whichever applies.
    pub fn gbest_dist(&self, mode: Mode) -> S {
        let best = if mode.uses_twins() {
            self.registry.gbest()
        } else {
            let mut best = None;
            for a in &self.agents {
                if let Some(g) = a.gbest {
                    GbestRecord::merge_into(g, &mut best);
                }
            }
            best
        };
        best.map_or(S::infinity(), |g| g.dist)
    }
}

/// One flowchart iteration: sense, exchange, decide and move, assist.
pub fn run_round<S: Scalar>(world: &World<S>, state: &mut RunState<S>, config: &ScenarioConfig<S>) -> RoundRecord<S> {
    state.round += 1;
    let round = state.round;
    let seed = state.seed;
    let map = &world.map;
    let target = map.target;
    let mode = config.mode;
    let n = state.agents.len();
    state.ledger.begin_round();

    // (1) sense
    for agent in state.agents.iter_mut().filter(|a| !a.arrived()) {
        let mut rng = stream(seed, round, agent.id as u64, Purpose::Sense);
        let d = sense_distance(agent.pos, target, config.sigma, &mut rng);
        agent.observe(d);
    }

    // (2) exchange
    let outcomes: Vec<Exchange<S>> = if mode.uses_twins() {
        let policy = RetryPolicy::for_mode(mode, n, config.retry_downlink);
        dt_exchange(&state.agents, &mut state.registry, &world.field, &mut state.ledger, policy, seed, round)
    } else {
        let received = p2p_exchange(&mut state.agents, &world.field, &mut state.ledger, seed, round);
        received
            .into_iter()
            .zip(&state.agents)
            .map(|(count, a)| match a.gbest {
                _ if a.arrived() => Exchange::Idle,
                Some(g) if count > 0 || n == 1 => Exchange::Received(g),
                _ => Exchange::Failed { stationary: false },
            })
            .collect()
    };

    // (3) decide and move
    let mut moves = 0;
    let mut stationary = vec![false; n];
    for (agent, outcome) in state.agents.iter_mut().zip(&outcomes) {
        if agent.arrived() {
            continue;
        }
        if agent.pos.distance(target) <= config.convergence_radius {
            agent.mode = AgentMode::Arrived;
            agent.vel = Vec2::zero();
            state.registry.mark_arrived(agent.id);
            continue;
        }
        if let Exchange::Received(g) = outcome {
            agent.gbest = Some(*g);
        }
        if matches!(outcome, Exchange::Failed { stationary: true }) && agent.rescue.is_none() {
            // Retries exhausted: hold position now, walk on the next move.
            agent.vel = Vec2::zero();
            stationary[agent.id] = true;
            continue;
        }
        if step_agent(world, agent, outcome, config, seed, round) == MoveOutcome::Moved {
            moves += 1;
        }
        if agent.pos.distance(target) <= config.convergence_radius {
            agent.mode = AgentMode::Arrived;
            agent.rescue = None;
            state.registry.mark_arrived(agent.id);
        }
    }

    // (4) assistance for stuck agents
    for agent in state.agents.iter_mut().filter(|a| !a.arrived()) {
        if !detect_stuck(agent, &config.pso) {
            continue;
        }
        agent.blocked_proposals = 0;
        let mut rng = stream(seed, round, agent.id as u64, Purpose::Assist);
        let reply =
            handle_assistance(agent, mode, &state.registry, map, &world.field, &mut state.ledger, &mut rng);
        match (reply, state.registry.gbest()) {
            (Ok(path), Some(g)) => {
                agent.rescue = Some(Rescue::new(path, g.pos));
                agent.mode = AgentMode::RescueFollow;
                agent.walk_rounds = 0;
            }
            _ => {
                agent.rescue = None;
                agent.mode = AgentMode::RandomWalk;
                agent.walk_rounds = config.pso.escape_walk_rounds;
            }
        }
    }

    // (5) agents held in place by exhausted retries walk next round
    for agent in state.agents.iter_mut() {
        if stationary[agent.id] && !agent.arrived() && agent.rescue.is_none() {
            agent.walk_rounds = agent.walk_rounds.max(1);
            agent.mode = AgentMode::RandomWalk;
        }
    }

    let conv = check_convergence(&state.agents, target, config.convergence_radius, config.convergence_fraction);
    RoundRecord {
        round,
        comm: *state.ledger.per_round.last().expect("round begun"),
        moves,
        arrived: state.agents.iter().filter(|a| a.arrived()).count(),
        convergence_fraction: conv.fraction,
        gbest_dist: state.gbest_dist(mode),
        min_dist: state.agents.iter().map(|a| a.pos.distance(target)).fold(S::infinity(), S::min),
    }
}

/// Rescue waypoint, random walk or PSO, then the physical move.
fn step_agent<S: Scalar>(
    world: &World<S>,
    agent: &mut AgentState<S>,
    outcome: &Exchange<S>,
    config: &ScenarioConfig<S>,
    seed: u64,
    round: u64,
) -> MoveOutcome {
    let map = &world.map;
    let mut rng = stream(seed, round, agent.id as u64, Purpose::Move);

    if let Some(rescue) = &mut agent.rescue {
        if let Exchange::Received(g) = outcome {
            if g.pos.distance(rescue.goal) > config.planner.replan_threshold {
                match plan(map, agent.pos, g.pos) {
                    Ok(path) => *rescue = Rescue::new(path, g.pos),
                    Err(_) => agent.rescue = None,
                }
            }
        }
    }
    if let Some(rescue) = &agent.rescue {
        let wp = next_waypoint(map, &rescue.path, agent.pos, rescue.progress, config.pso.v_max);
        let result = apply_move(agent, wp.point, map);
        let rescue = agent.rescue.as_mut().expect("still following");
        if result == MoveOutcome::Moved {
            if let Some(j) = wp.reached {
                rescue.progress = rescue.progress.max(j);
            }
        }
        if rescue.finished() {
            agent.rescue = None;
            agent.mode = AgentMode::Pso;
        }
        return result;
    }

    let gbest = agent.gbest.map(|g| g.pos);
    let stagnant = gbest.is_some_and(|g| agent.pos.distance(g) <= config.pso.stagnation_radius);
    let walk = if agent.walk_rounds > 0 {
        agent.walk_rounds -= 1;
        true
    } else {
        outcome.failed() || stagnant || gbest.is_none()
    };
    match gbest {
        Some(g) if !walk => {
            agent.mode = AgentMode::Pso;
            let proposal = pso_step(agent, g, &config.pso, &mut rng);
            apply_move(agent, proposal, map)
        }
        _ => {
            agent.mode = AgentMode::RandomWalk;
            // Only PSO proposals count towards being stuck.
            let blocked = agent.blocked_proposals;
            let result = match random_walk_step(agent, map, &config.avoidance, config.pso.walk_step, &mut rng) {
                Some(p) => apply_move(agent, p, map),
                None => {
                    agent.vel = Vec2::zero();
                    MoveOutcome::Stayed
                }
            };
            agent.blocked_proposals = blocked;
            result
        }
    }
}

/// Runs until converged or `max_rounds`.
pub fn run_scenario<S: Scalar>(world: &World<S>, config: &ScenarioConfig<S>) -> Result<RunMetrics<S>> {
    config.validate()?;
    let mut state = RunState::spawn(&world.map, config.n_agents, config.seed);
    let mut series = Vec::new();
    let mut converged = false;
    while state.round < config.max_rounds {
        let record = run_round(world, &mut state, config);
        series.push(record);
        if record.convergence_fraction >= config.convergence_fraction {
            converged = true;
            break;
        }
    }
    let totals = state.ledger.totals;
    Ok(RunMetrics {
        seed: config.seed,
        converged,
        rounds_used: state.round,
        final_convergence_fraction: series.last().map_or(S::zero(), |r| r.convergence_fraction),
        total_moves: state.agents.iter().map(|a| a.moves).sum(),
        uplink_attempts: totals.uplink_attempts,
        uplink_successes: totals.uplink_successes,
        downlink_attempts: totals.downlink_attempts,
        downlink_successes: totals.downlink_successes,
        assistance_requests: totals.assistance_requests,
        series,
    })
}

/// Mean, sample standard deviation and two-sided 95% t interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub stdev: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Self> {
        let count = values.len();
        if count == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / count as f64;
        if count == 1 {
            return Some(Self { count, mean, stdev: 0.0, ci_low: mean, ci_high: mean });
        }
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1) as f64;
        let stdev = var.sqrt();
        let t = StudentsT::new(0.0, 1.0, (count - 1) as f64).expect("df ≥ 1").inverse_cdf(0.975);
        let half = t * stdev / (count as f64).sqrt();
        Some(Self { count, mean, stdev, ci_low: mean - half, ci_high: mean + half })
    }

    /// Intervals are disjoint and `self` lies above `other`.
    pub fn separated_above(&self, other: &Self) -> bool {
        self.ci_low > other.ci_high
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Aggregate {
    pub rounds: Summary,
    pub total_moves: Summary,
    pub uplink: Summary,
    pub downlink: Summary,
    pub transmissions: Summary,
    pub assistance_requests: Summary,
    pub convergence_fraction: Summary,
}

impl Aggregate {
    pub fn of<'a, S: Scalar>(runs: impl IntoIterator<Item = &'a RunMetrics<S>> + Clone) -> Option<Self> {
        let col = |f: &dyn Fn(&RunMetrics<S>) -> f64| {
            Summary::of(&runs.clone().into_iter().map(f).collect::<Vec<_>>())
        };
        Some(Self {
            rounds: col(&|r| r.rounds_used as f64)?,
            total_moves: col(&|r| r.total_moves as f64)?,
            uplink: col(&|r| r.uplink_attempts as f64)?,
            downlink: col(&|r| r.downlink_attempts as f64)?,
            transmissions: col(&|r| r.total_transmissions() as f64)?,
            assistance_requests: col(&|r| r.assistance_requests as f64)?,
            convergence_fraction: col(&|r| r.final_convergence_fraction.as_f64())?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarlo<S> {
    pub runs: Vec<RunMetrics<S>>,
    pub all: Aggregate,
    /// Over converged runs only; `None` when no run converged.
    pub converged: Option<Aggregate>,
    pub convergence_rate: f64,
}

/// `runs` independent runs, run `i` seeded with `run_seed(seed_base, i)`.
pub fn monte_carlo<S: Scalar>(
    world: &World<S>,
    config: &ScenarioConfig<S>,
    runs: usize,
    seed_base: u64,
) -> Result<MonteCarlo<S>> {
    if runs < 1 {
        return Err(Error::InvalidConfig("runs ≥ 1".into()));
    }
    config.validate()?;
    let results = (0..runs)
        .into_par_iter()
        .map(|i| {
            let cfg = ScenarioConfig { seed: run_seed(seed_base, i as u64), ..config.clone() };
            run_scenario(world, &cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(results))
}

pub fn summarize<S: Scalar>(runs: Vec<RunMetrics<S>>) -> MonteCarlo<S> {
    let all = Aggregate::of(&runs).expect("at least one run");
    let converged = Aggregate::of(runs.iter().filter(|r| r.converged));
    let convergence_rate = runs.iter().filter(|r| r.converged).count() as f64 / runs.len() as f64;
    MonteCarlo { runs, all, converged, convergence_rate }
}
