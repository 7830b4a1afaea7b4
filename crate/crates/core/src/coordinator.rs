//! Edge-server twin layer and its peer-to-peer counterfactual.
//!
//! Owns the twin registry, gbest selection, uplink/downlink exchange with
//! per-mode retry rules, assistance requests and the transmission ledger.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::environment::WorldMap;
use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::planner::{plan, GridPath};
use crate::radio::{try_transmit, RadioField};
use crate::rng::{stream, Purpose, StreamRng};
use crate::scalar::Scalar;
use crate::swarm::{AgentState, GbestRecord};

/// Communication / coordination mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Mode {
    P2P,
    DT1,
    DT2,
    RW1,
    RW2,
}

impl Mode {
    pub const ALL: [Mode; 5] = [Mode::P2P, Mode::DT1, Mode::DT2, Mode::RW1, Mode::RW2];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::P2P => "P2P",
            Mode::DT1 => "DT1",
            Mode::DT2 => "DT2",
            Mode::RW1 => "RW1",
            Mode::RW2 => "RW2",
        }
    }

    /// Agents exchange through server-side twins rather than pairwise.
    pub fn uses_twins(self) -> bool {
        self != Mode::P2P
    }

    /// The server also holds the obstacle twin and can plan rescues.
    pub fn has_planner(self) -> bool {
        matches!(self, Mode::DT1 | Mode::DT2)
    }

    /// Agents retry in place instead of walking off on failure.
    pub fn retries(self) -> bool {
        matches!(self, Mode::DT2 | Mode::RW2)
    }

    /// Attempts per leg for a swarm of `n`: `1 + (n − 2)` under retry modes.
    pub fn max_attempts(self, n: usize) -> usize {
        if self.retries() {
            1 + n.saturating_sub(2)
        } else {
            1
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownMode(pub String);

impl fmt::Display for UnknownMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown mode {:?}; valid modes are P2P, DT1, DT2, RW1, RW2", self.0)
    }
}

impl std::error::Error for UnknownMode {}

impl FromStr for Mode {
    type Err = UnknownMode;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| UnknownMode(s.to_string()))
    }
}

impl TryFrom<String> for Mode {
    type Error = UnknownMode;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Mode> for String {
    fn from(m: Mode) -> Self {
        m.as_str().to_string()
    }
}

/// Server-side replica of one agent.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Twin<S> {
    pub last_known_pos: Option<Vec2<S>>,
    pub last_dist: Option<S>,
    /// Uploaded successfully this round.
    pub fresh: bool,
    pub arrived: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwinRegistry<S> {
    pub twins: Vec<Twin<S>>,
    best: Option<GbestRecord<S>>,
}

impl<S: Scalar> TwinRegistry<S> {
    pub fn new(n_agents: usize) -> Self {
        Self { twins: vec![Twin { last_known_pos: None, last_dist: None, fresh: false, arrived: false }; n_agents], best: None }
    }

    pub fn begin_round(&mut self) {
        for t in &mut self.twins {
            t.fresh = false;
        }
    }

    /// Stores an upload; history is kept, so gbest never worsens.
    pub fn record(&mut self, agent: usize, pos: Vec2<S>, dist: S, round: u64) {
        let twin = &mut self.twins[agent];
        twin.last_known_pos = Some(pos);
        twin.last_dist = Some(dist);
        twin.fresh = true;
        GbestRecord::merge_into(GbestRecord { pos, dist, agent, round }, &mut self.best);
    }

    pub fn mark_arrived(&mut self, agent: usize) {
        self.twins[agent].arrived = true;
    }

    pub fn gbest(&self) -> Option<GbestRecord<S>> {
        self.best
    }
}

/// Position of the smallest `d_i` ever uploaded.
pub fn compute_gbest<S: Scalar>(reg: &TwinRegistry<S>) -> Result<Vec2<S>> {
    reg.gbest().map(|g| g.pos).ok_or(Error::EmptyRegistry)
}

/// Transmission counts for one round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct RoundComm {
    pub uplink_attempts: u64,
    pub uplink_successes: u64,
    pub downlink_attempts: u64,
    pub downlink_successes: u64,
    /// Assistance requests issued (their messages are also in the counts above).
    pub assistance_requests: u64,
}

impl RoundComm {
    fn add(&mut self, o: &RoundComm) {
        self.uplink_attempts += o.uplink_attempts;
        self.uplink_successes += o.uplink_successes;
        self.downlink_attempts += o.downlink_attempts;
        self.downlink_successes += o.downlink_successes;
        self.assistance_requests += o.assistance_requests;
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CommLedger {
    pub totals: RoundComm,
    pub per_round: Vec<RoundComm>,
}

impl CommLedger {
    pub fn begin_round(&mut self) {
        self.per_round.push(RoundComm::default());
    }

    fn current(&mut self) -> &mut RoundComm {
        if self.per_round.is_empty() {
            self.per_round.push(RoundComm::default());
        }
        self.per_round.last_mut().expect("just ensured")
    }

    pub fn uplink(&mut self, success: bool) {
        let c = self.current();
        c.uplink_attempts += 1;
        c.uplink_successes += success as u64;
        self.totals.uplink_attempts += 1;
        self.totals.uplink_successes += success as u64;
    }

    pub fn downlink(&mut self, success: bool) {
        let c = self.current();
        c.downlink_attempts += 1;
        c.downlink_successes += success as u64;
        self.totals.downlink_attempts += 1;
        self.totals.downlink_successes += success as u64;
    }

    pub fn assistance(&mut self) {
        self.current().assistance_requests += 1;
        self.totals.assistance_requests += 1;
    }

    /// Sum of the per-round entries; equals `totals`.
    pub fn summed(&self) -> RoundComm {
        let mut s = RoundComm::default();
        for r in &self.per_round {
            s.add(r);
        }
        s
    }
}

/// What an agent got out of this round's exchange.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exchange<S> {
    /// Already at the target; nothing sent.
    Idle,
    Received(GbestRecord<S>),
    /// A leg failed. `stationary` when retries were exhausted under a retry mode.
    Failed { stationary: bool },
}

impl<S> Exchange<S> {
    pub fn failed(&self) -> bool {
        matches!(self, Exchange::Failed { .. })
    }
}

/// Up to `attempts` tries; stops at the first success.
fn transmit_with_retries<S: Scalar>(
    field: &RadioField<S>,
    pos: Vec2<S>,
    attempts: usize,
    rng: &mut StreamRng,
    mut log: impl FnMut(bool),
) -> bool {
    for _ in 0..attempts {
        let ok = try_transmit(field, pos, rng);
        log(ok);
        if ok {
            return true;
        }
    }
    false
}

/// Per-leg retry budget for twin modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub uplink_attempts: usize,
    pub downlink_attempts: usize,
}

impl RetryPolicy {
    pub fn for_mode(mode: Mode, n_agents: usize, retry_downlink: bool) -> Self {
        let max = mode.max_attempts(n_agents);
        Self { uplink_attempts: max, downlink_attempts: if retry_downlink { max } else { 1 } }
    }
}

/// Uplink of `(pos, d_i)` from every non-arrived agent, gbest selection, then
/// downlink to the agents whose uplink got through.
pub fn dt_exchange<S: Scalar>(
    agents: &[AgentState<S>],
    reg: &mut TwinRegistry<S>,
    field: &RadioField<S>,
    ledger: &mut CommLedger,
    policy: RetryPolicy,
    seed: u64,
    round: u64,
) -> Vec<Exchange<S>> {
    reg.begin_round();
    let mut rngs: Vec<Option<StreamRng>> = Vec::with_capacity(agents.len());
    let mut uplinked = vec![false; agents.len()];

    for (i, agent) in agents.iter().enumerate() {
        if agent.arrived() {
            rngs.push(None);
            continue;
        }
        let mut rng = stream(seed, round, agent.id as u64, Purpose::Exchange);
        uplinked[i] = transmit_with_retries(field, agent.pos, policy.uplink_attempts, &mut rng, |ok| ledger.uplink(ok));
        if uplinked[i] {
            reg.record(agent.id, agent.pos, agent.last_sensed_dist, round);
        }
        rngs.push(Some(rng));
    }

    let gbest = reg.gbest();
    let exhausted = |attempts: usize| attempts > 1;
    agents
        .iter()
        .zip(rngs.iter_mut())
        .enumerate()
        .map(|(i, (agent, rng))| {
            let Some(rng) = rng else { return Exchange::Idle };
            if !uplinked[i] {
                return Exchange::Failed { stationary: exhausted(policy.uplink_attempts) };
            }
            let g = gbest.expect("an uplink succeeded this round");
            if transmit_with_retries(field, agent.pos, policy.downlink_attempts, rng, |ok| ledger.downlink(ok)) {
                Exchange::Received(g)
            } else {
                Exchange::Failed { stationary: exhausted(policy.downlink_attempts) }
            }
        })
        .collect()
}

/// Every ordered pair `(i, j)` sends `i`'s current `(pos, d_i)`.
///
/// A message arrives when both endpoint draws succeed. Each attempt is logged
/// as one uplink-equivalent transmission. Every agent folds its own tuple and
/// whatever it received into its gbest view. Returns the number of messages
/// each agent received.
pub fn p2p_exchange<S: Scalar>(
    agents: &mut [AgentState<S>],
    field: &RadioField<S>,
    ledger: &mut CommLedger,
    seed: u64,
    round: u64,
) -> Vec<usize> {
    let n = agents.len();
    let mut received: Vec<Vec<GbestRecord<S>>> = vec![Vec::new(); n];
    for i in 0..n {
        let sender = &agents[i];
        let mut rng = stream(seed, round, sender.id as u64, Purpose::Peer);
        let tuple = GbestRecord { pos: sender.pos, dist: sender.last_sensed_dist, agent: sender.id, round };
        for (j, inbox) in received.iter_mut().enumerate() {
            if j == i {
                continue;
            }
            let tx = try_transmit(field, sender.pos, &mut rng);
            let rx = try_transmit(field, agents[j].pos, &mut rng);
            ledger.uplink(tx && rx);
            if tx && rx && tuple.dist.is_finite() {
                inbox.push(tuple);
            }
        }
    }
    agents
        .iter_mut()
        .zip(received)
        .map(|(agent, inbox)| {
            let count = inbox.len();
            if agent.last_sensed_dist.is_finite() {
                let own = GbestRecord { pos: agent.pos, dist: agent.last_sensed_dist, agent: agent.id, round };
                GbestRecord::merge_into(own, &mut agent.gbest);
            }
            for t in inbox {
                GbestRecord::merge_into(t, &mut agent.gbest);
            }
            count
        })
        .collect()
}

/// Why an assistance request did not yield a path.
#[derive(Debug, Clone, PartialEq)]
pub enum Denial {
    /// The server has no obstacle twin in this mode.
    NoPlanner,
    UplinkFailed,
    Unreachable,
    DownlinkFailed,
    NoGbest,
}

/// One uplink request, a plan on the obstacle twin, one downlink reply.
pub fn handle_assistance<S: Scalar, R: Rng + ?Sized>(
    agent: &AgentState<S>,
    mode: Mode,
    reg: &TwinRegistry<S>,
    map: &WorldMap<S>,
    field: &RadioField<S>,
    ledger: &mut CommLedger,
    rng: &mut R,
) -> Result<GridPath<S>, Denial> {
    if !mode.has_planner() {
        return Err(Denial::NoPlanner);
    }
    ledger.assistance();
    let up = try_transmit(field, agent.pos, rng);
    ledger.uplink(up);
    if !up {
        return Err(Denial::UplinkFailed);
    }
    let goal = compute_gbest(reg).map_err(|_| Denial::NoGbest)?;
    let path = plan(map, agent.pos, goal).map_err(|_| Denial::Unreachable)?;
    let down = try_transmit(field, agent.pos, rng);
    ledger.downlink(down);
    if down {
        Ok(path)
    } else {
        Err(Denial::DownlinkFailed)
    }
}
