//! Per-agent movement: PSO proposals, VFH-guided random walk, physical move
//! resolution and stuck/stagnation detection.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::avoidance::{build_histogram, select_heading, VfhParams};
use crate::environment::{range_scan, WorldMap};
use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::planner::GridPath;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AgentMode {
    Pso,
    RandomWalk,
    RescueFollow,
    Arrived,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, bound = "S: Scalar")]
pub struct PsoParams<S> {
    pub inertia: S,
    pub cognitive: S,
    pub social: S,
    /// Speed cap, meters per round.
    pub v_max: S,
    /// Consecutive blocked proposals before an agent counts as stuck.
    pub stuck_threshold: u32,
    /// Within this distance of gbest (and not at the target) an agent walks away.
    pub stagnation_radius: S,
    /// Random-walk step length, meters.
    pub walk_step: S,
    /// Random-walk rounds after an assistance request is denied.
    pub escape_walk_rounds: u32,
}

impl<S: Scalar> Default for PsoParams<S> {
    fn default() -> Self {
        Self {
            inertia: S::lit(0.7298),
            cognitive: S::lit(1.49618),
            social: S::lit(1.49618),
            v_max: S::lit(5.0),
            stuck_threshold: 3,
            stagnation_radius: S::lit(2.0),
            walk_step: S::lit(5.0),
            escape_walk_rounds: 25,
        }
    }
}

impl<S: Scalar> PsoParams<S> {
    pub fn validate(&self) -> Result<()> {
        if !(self.v_max > S::zero()) {
            return Err(Error::InvalidConfig("pso.v_max > 0".into()));
        }
        if self.stuck_threshold < 1 {
            return Err(Error::InvalidConfig("pso.stuck_threshold >= 1".into()));
        }
        if !(self.walk_step > S::zero() && self.walk_step <= self.v_max) {
            return Err(Error::InvalidConfig("0 < pso.walk_step <= pso.v_max".into()));
        }
        if !(self.stagnation_radius >= S::zero()) {
            return Err(Error::InvalidConfig("pso.stagnation_radius >= 0".into()));
        }
        for (name, v) in [("inertia", self.inertia), ("cognitive", self.cognitive), ("social", self.social)] {
            if !(v.is_finite() && v >= S::zero()) {
                return Err(Error::InvalidConfig(format!("pso.{name} >= 0")));
            }
        }
        Ok(())
    }
}

/// A waypoint queue handed out by the edge server.
#[derive(Debug, Clone, PartialEq)]
pub struct Rescue<S> {
    pub path: GridPath<S>,
    /// Index of the last path point reached.
    pub progress: usize,
    /// The gbest position the plan was made for.
    pub goal: Vec2<S>,
}

impl<S: Scalar> Rescue<S> {
    pub fn new(path: GridPath<S>, goal: Vec2<S>) -> Self {
        Self { path, progress: 0, goal }
    }

    pub fn finished(&self) -> bool {
        self.progress + 1 >= self.path.points.len()
    }
}

/// Best known `(position, sensed distance)` tagged with who recorded it when.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(bound = "S: Scalar")]
pub struct GbestRecord<S> {
    pub pos: Vec2<S>,
    pub dist: S,
    pub agent: usize,
    pub round: u64,
}

impl<S: Scalar> GbestRecord<S> {
    /// Strictly better: smaller distance, then lower agent id, then earlier round.
    pub fn beats(&self, other: &Self) -> bool {
        match self.dist.partial_cmp(&other.dist) {
            Some(std::cmp::Ordering::Less) => true,
            Some(std::cmp::Ordering::Greater) => false,
            _ => (self.agent, self.round) < (other.agent, other.round),
        }
    }

    /// Keeps the better of `slot` and `candidate`.
    pub fn merge_into(candidate: Self, slot: &mut Option<Self>) -> bool {
        match slot {
            Some(cur) if !candidate.beats(cur) => false,
            _ => {
                *slot = Some(candidate);
                true
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentState<S> {
    pub id: usize,
    pub pos: Vec2<S>,
    /// Displacement of the last executed move, m/round.
    pub vel: Vec2<S>,
    pub pbest_pos: Vec2<S>,
    pub pbest_dist: S,
    /// `d_i`: the most recent sensed distance.
    pub last_sensed_dist: S,
    pub mode: AgentMode,
    pub blocked_proposals: u32,
    pub rescue: Option<Rescue<S>>,
    /// Executed, non-zero moves.
    pub moves: u64,
    /// Forced random-walk rounds still pending.
    pub walk_rounds: u32,
    /// The agent's current gbest: last downlinked (twin modes) or its own peer view.
    pub gbest: Option<GbestRecord<S>>,
}

impl<S: Scalar> AgentState<S> {
    pub fn new(id: usize, pos: Vec2<S>) -> Self {
        Self {
            id,
            pos,
            vel: Vec2::zero(),
            pbest_pos: pos,
            pbest_dist: S::infinity(),
            last_sensed_dist: S::infinity(),
            mode: AgentMode::Pso,
            blocked_proposals: 0,
            rescue: None,
            moves: 0,
            walk_rounds: 0,
            gbest: None,
        }
    }

    pub fn arrived(&self) -> bool {
        self.mode == AgentMode::Arrived
    }

    /// Records a sensed distance and updates the personal best.
    pub fn observe(&mut self, dist: S) {
        self.last_sensed_dist = dist;
        if dist < self.pbest_dist {
            self.pbest_dist = dist;
            self.pbest_pos = self.pos;
        }
    }
}

/// PSO velocity update; returns the proposed position without moving the agent.
///
/// Draws `r1` and `r2` per axis, in that order.
pub fn pso_step<S: Scalar, R: Rng + ?Sized>(
    agent: &AgentState<S>,
    gbest: Vec2<S>,
    params: &PsoParams<S>,
    rng: &mut R,
) -> Vec2<S> {
    let mut draw = || Vec2::new(S::lit(rng.random::<f64>()), S::lit(rng.random::<f64>()));
    let r1 = draw();
    let r2 = draw();
    let vel = agent.vel * params.inertia
        + r1.hadamard(agent.pbest_pos - agent.pos) * params.cognitive
        + r2.hadamard(gbest - agent.pos) * params.social;
    agent.pos + vel.clamp_norm(params.v_max)
}

/// Uniform heading filtered through VFH; `None` when no valley exists.
pub fn random_walk_step<S: Scalar, R: Rng + ?Sized>(
    agent: &AgentState<S>,
    map: &WorldMap<S>,
    vfh: &VfhParams<S>,
    step: S,
    rng: &mut R,
) -> Option<Vec2<S>> {
    let desired = S::lit(rng.random::<f64>()) * S::TAU();
    let scan = range_scan(map, agent.pos, vfh.ray_count, vfh.max_range).ok()?;
    let hist = build_histogram(&scan, vfh.sector_count, vfh.threshold);
    let heading = select_heading(&hist, desired, vfh.safety_margin_sectors)?;
    Some(agent.pos + Vec2::from_heading(heading) * step)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MoveOutcome {
    Moved,
    Blocked,
    /// Zero-length proposal; not a move and not a block.
    Stayed,
}

/// Executes a proposal if the straight segment to it is free.
pub fn apply_move<S: Scalar>(agent: &mut AgentState<S>, proposal: Vec2<S>, map: &WorldMap<S>) -> MoveOutcome {
    debug_assert!(proposal.is_finite());
    let target = map.clamp(proposal);
    if target == agent.pos {
        agent.vel = Vec2::zero();
        return MoveOutcome::Stayed;
    }
    if map.is_free(target) && map.segment_clear(agent.pos, target) {
        agent.vel = target - agent.pos;
        agent.pos = target;
        agent.moves += 1;
        agent.blocked_proposals = 0;
        MoveOutcome::Moved
    } else {
        agent.vel = Vec2::zero();
        agent.blocked_proposals += 1;
        MoveOutcome::Blocked
    }
}

pub fn detect_stuck<S: Scalar>(agent: &AgentState<S>, params: &PsoParams<S>) -> bool {
    agent.blocked_proposals >= params.stuck_threshold
}

/// Arrival dominates; otherwise an agent sitting on gbest switches to random walk.
pub fn escape_gbest_stagnation<S: Scalar>(
    agent: &mut AgentState<S>,
    gbest: Vec2<S>,
    radius: S,
    target: Vec2<S>,
    convergence_radius: S,
) {
    if agent.pos.distance(target) <= convergence_radius {
        agent.mode = AgentMode::Arrived;
    } else if agent.pos.distance(gbest) <= radius {
        agent.mode = AgentMode::RandomWalk;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{build_map, ObstacleSpec, Rect};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn p(x: f64, y: f64) -> Vec2<f64> {
        Vec2::new(x, y)
    }

    fn open_map() -> WorldMap<f64> {
        build_map(&ObstacleSpec::default(), p(320.0, 290.0), p(300.0, 300.0), 5.0).unwrap()
    }

    #[test]
    fn pso_at_rest_on_its_bests_stays() {
        let agent = AgentState::new(0, p(50.0, 50.0));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(pso_step(&agent, agent.pos, &PsoParams::default(), &mut rng), agent.pos);
    }

    #[test]
    fn pso_step_is_capped_at_v_max() {
        let mut agent = AgentState::new(0, p(50.0, 50.0));
        agent.vel = p(12.0 / 0.7298, 0.0);
        let params = PsoParams { cognitive: 0.0, social: 0.0, ..PsoParams::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let prop = pso_step(&agent, agent.pos, &params, &mut rng);
        assert!((prop.distance(agent.pos) - 5.0).abs() < 1e-12);

        let mut agent32 = AgentState::<f32>::new(0, Vec2::new(50.0, 50.0));
        agent32.vel = Vec2::new(0.0, 12.0 / 0.7298);
        let params32 = PsoParams { cognitive: 0.0, social: 0.0, ..PsoParams::default() };
        let prop = pso_step(&agent32, agent32.pos, &params32, &mut rng);
        assert!((prop.distance(agent32.pos) - 5.0).abs() < 1e-5);
    }

    #[test]
    fn pso_step_is_deterministic_per_seed() {
        let mut agent = AgentState::new(0, p(50.0, 50.0));
        agent.pbest_pos = p(60.0, 40.0);
        let params = PsoParams::default();
        let a = pso_step(&agent, p(300.0, 300.0), &params, &mut ChaCha8Rng::seed_from_u64(11));
        let b = pso_step(&agent, p(300.0, 300.0), &params, &mut ChaCha8Rng::seed_from_u64(11));
        assert_eq!(a, b);
    }

    #[test]
    fn random_walk_on_open_map_keeps_drawn_heading() {
        let map = open_map();
        let agent = AgentState::new(0, p(300.0, 300.0));
        let vfh = VfhParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let drawn: f64 = ChaCha8Rng::seed_from_u64(5).random::<f64>() * std::f64::consts::TAU;
        let prop = random_walk_step(&agent, &map, &vfh, 5.0, &mut rng).unwrap();
        let expected = agent.pos + Vec2::from_heading(drawn) * 5.0;
        assert!(prop.distance(expected) < 1e-9);
    }

    #[test]
    fn apply_move_examples() {
        let map = build_map(
            &ObstacleSpec::new(vec![Rect::new(100.0, 100.0, 200.0, 200.0)]),
            p(320.0, 290.0),
            p(300.0, 300.0),
            5.0,
        )
        .unwrap();
        let mut agent = AgentState::new(0, p(50.0, 50.0));
        assert_eq!(apply_move(&mut agent, p(55.0, 50.0), &map), MoveOutcome::Moved);
        assert_eq!((agent.pos, agent.moves), (p(55.0, 50.0), 1));

        let mut agent = AgentState::new(0, p(97.0, 150.0));
        agent.blocked_proposals = 2;
        assert_eq!(apply_move(&mut agent, p(101.0, 150.0), &map), MoveOutcome::Blocked);
        assert_eq!((agent.pos, agent.blocked_proposals, agent.moves), (p(97.0, 150.0), 3, 0));

        let mut agent = AgentState::new(0, p(2.0, 50.0));
        assert_eq!(apply_move(&mut agent, p(-3.0, 50.0), &map), MoveOutcome::Moved);
        assert_eq!(agent.pos, p(0.0, 50.0));
    }

    #[test]
    fn stuck_threshold_boundary() {
        let params = PsoParams::<f64>::default();
        let mut agent = AgentState::new(0, p(1.0, 1.0));
        assert!(!detect_stuck(&agent, &params));
        agent.blocked_proposals = params.stuck_threshold;
        assert!(detect_stuck(&agent, &params));
    }

    #[test]
    fn stagnation_escape_examples() {
        let target = p(320.0, 290.0);
        let mut at_gbest = AgentState::new(0, p(100.0, 100.0));
        escape_gbest_stagnation(&mut at_gbest, p(100.0, 100.0), 2.0, target, 10.0);
        assert_eq!(at_gbest.mode, AgentMode::RandomWalk);

        let mut far = AgentState::new(0, p(150.0, 100.0));
        escape_gbest_stagnation(&mut far, p(100.0, 100.0), 2.0, target, 10.0);
        assert_eq!(far.mode, AgentMode::Pso);

        let mut home = AgentState::new(0, p(322.0, 291.0));
        escape_gbest_stagnation(&mut home, p(322.0, 291.0), 2.0, target, 10.0);
        assert_eq!(home.mode, AgentMode::Arrived);
    }

    #[test]
    fn gbest_record_tie_breaks() {
        let a = GbestRecord { pos: p(0.0, 0.0), dist: 5.0, agent: 1, round: 3 };
        let b = GbestRecord { pos: p(1.0, 0.0), dist: 5.0, agent: 2, round: 1 };
        let c = GbestRecord { pos: p(2.0, 0.0), dist: 5.0, agent: 1, round: 2 };
        assert!(a.beats(&b));
        assert!(c.beats(&a));
        let mut slot = None;
        for r in [b, a, c] {
            GbestRecord::merge_into(r, &mut slot);
        }
        assert_eq!(slot, Some(c));
    }
}
