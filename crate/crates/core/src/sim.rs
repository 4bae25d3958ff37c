//! Fixed-step replay of a mission.
//!
//! Two protocols are supported:
//!
//! * [`Mode::Method1`]: everything lives in the global frame. The leader
//!   walks its path and each agent tracks `d + z_d ĉ3 + s_i(t)`.
//! * [`Mode::Method2`]: the leader is pinned at the origin of the flight
//!   space, the agents track their local desired positions, and the
//!   environment is re-expressed in the leader frame every step. Virtual
//!   global positions are reconstructed by composing with the leader path.
//!
//! Agents follow a saturated proportional velocity law integrated with
//! explicit Euler steps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formation::{apply_transform, AgentId, FormationSnapshot, Jacobian2};
use crate::frames::{global_to_local, local_to_global, normalize_angle, GlobalPoint, LeaderState, LocalPoint};
use crate::planner::MissionPlan;
use crate::safety::{corridor_clearance, local_corridor_clearance, polar_decompose, SafetyConfig, SafetyReport, StrainDecomposition};

pub const DEFAULT_DT: f64 = 0.01;
pub const DEFAULT_GAIN: f64 = 2.0;
pub const DEFAULT_V_MAX: f64 = 1.0;

/// One recorded leader pose.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeaderSample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub z_d: f64,
}

/// A straight-line (or hold) leg appended to a leader path. Omitted targets
/// keep the previous value.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PathSegment {
    pub duration: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heading: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_d: Option<f64>,
}

/// Leader trajectory as time-ordered samples, interpolated linearly in
/// position and elevation and along the shortest arc in heading. Outside the
/// sampled span the nearest end pose is held.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderPath {
    samples: Vec<LeaderSample>,
}

impl LeaderPath {
    pub fn new(samples: Vec<LeaderSample>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidConfig("leader path needs at least one sample".into()));
        }
        for s in &samples {
            LeaderState::new(s.x, s.y, s.heading, s.z_d)?;
            if !s.t.is_finite() {
                return Err(Error::InvalidConfig("leader sample time must be finite".into()));
            }
        }
        for (k, w) in samples.windows(2).enumerate() {
            if !(w[1].t > w[0].t) {
                return Err(Error::InvalidConfig(format!(
                    "leader sample times must increase strictly (sample {} at t = {}, sample {} at t = {})",
                    k,
                    w[0].t,
                    k + 1,
                    w[1].t
                )));
            }
            if (w[1].heading - w[0].heading).abs() > std::f64::consts::PI {
                return Err(Error::InvalidConfig(format!(
                    "leader heading jumps by more than pi between samples {} and {}",
                    k,
                    k + 1
                )));
            }
        }
        Ok(Self { samples })
    }

    pub fn stationary(x: f64, y: f64, heading: f64, z_d: f64) -> Result<Self> {
        Self::new(vec![LeaderSample {
            t: 0.0,
            x,
            y,
            heading,
            z_d,
        }])
    }

    /// Builds a path from a start pose at `start.t` and consecutive legs.
    pub fn from_segments(start: LeaderSample, segments: &[PathSegment]) -> Result<Self> {
        let mut samples = vec![start];
        let mut last = start;
        for (k, seg) in segments.iter().enumerate() {
            if !(seg.duration > 0.0 && seg.duration.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "leader segment {} needs a positive duration",
                    k + 1
                )));
            }
            let [x, y] = seg.to.unwrap_or([last.x, last.y]);
            last = LeaderSample {
                t: last.t + seg.duration,
                x,
                y,
                heading: seg.heading.unwrap_or(last.heading),
                z_d: seg.z_d.unwrap_or(last.z_d),
            };
            samples.push(last);
        }
        Self::new(samples)
    }

    pub fn samples(&self) -> &[LeaderSample] {
        &self.samples
    }

    pub fn state_at(&self, t: f64) -> LeaderState {
        let s = &self.samples;
        let pose = |a: &LeaderSample| {
            LeaderState::new(a.x, a.y, a.heading, a.z_d).expect("validated leader sample")
        };
        if t <= s[0].t {
            return pose(&s[0]);
        }
        let last = &s[s.len() - 1];
        if t >= last.t {
            return pose(last);
        }
        let k = s.partition_point(|p| p.t <= t);
        let (a, b) = (&s[k - 1], &s[k]);
        let w = (t - a.t) / (b.t - a.t);
        let lerp = |p: f64, q: f64| p + (q - p) * w;
        let heading = a.heading + normalize_angle(b.heading - a.heading) * w;
        LeaderState::new(lerp(a.x, b.x), lerp(a.y, b.y), heading, lerp(a.z_d, b.z_d))
            .expect("interpolated leader state is finite")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    /// Global-frame protocol: the leader moves through the environment.
    #[serde(rename = "method1", alias = "global")]
    Method1,
    /// Local-frame protocol: the environment moves past a pinned leader.
    #[serde(rename = "method2", alias = "local")]
    Method2,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Method1 => "method1",
            Mode::Method2 => "method2",
        }
    }
}

/// Saturated proportional velocity law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackingLaw {
    pub gain: f64,
    pub v_max: f64,
}

impl Default for TrackingLaw {
    fn default() -> Self {
        Self {
            gain: DEFAULT_GAIN,
            v_max: DEFAULT_V_MAX,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub mode: Mode,
    pub dt: f64,
    pub duration: f64,
    pub tracking: TrackingLaw,
    pub safety: SafetyConfig,
    pub mission: MissionPlan,
    pub leader: LeaderPath,
    /// Offset of every agent from its desired position at t = 0.
    pub initial_offset: [f64; 3],
    /// Abort on the first safety violation instead of flagging it.
    pub strict: bool,
}

impl RunConfig {
    pub fn new(mission: MissionPlan, leader: LeaderPath, mode: Mode) -> Self {
        let duration = mission.span().1.max(0.0);
        Self {
            mode,
            dt: DEFAULT_DT,
            duration,
            tracking: TrackingLaw::default(),
            safety: SafetyConfig::default(),
            mission,
            leader,
            initial_offset: [0.0; 3],
            strict: false,
        }
    }

    /// Checks everything except integration stability.
    pub fn validate_structure(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidConfig(format!("dt must be > 0, got {}", self.dt)));
        }
        let end = self.mission.span().1;
        if !(self.duration >= end && self.duration.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "duration {} must cover the mission span ending at {end}",
                self.duration
            )));
        }
        if !(self.tracking.gain > 0.0 && self.tracking.v_max > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "tracking gain and v_max must be > 0, got gain = {}, v_max = {}",
                self.tracking.gain, self.tracking.v_max
            )));
        }
        if !self.initial_offset.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidConfig("initial_offset must be finite".into()));
        }
        Ok(())
    }

    /// The explicit proportional law contracts only while `gain · dt < 1`.
    pub fn check_stability(&self) -> Result<()> {
        let product = self.tracking.gain * self.dt;
        if product >= 1.0 {
            return Err(Error::InvalidConfig(format!(
                "stability constraint gain * dt < 1 violated (gain = {}, dt = {}, product = {product})",
                self.tracking.gain, self.dt
            )));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_structure()?;
        self.check_stability()
    }

    pub fn step_count(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub position: GlobalPoint,
    pub velocity: [f64; 3],
}

impl AgentState {
    pub fn at_rest(position: GlobalPoint) -> Self {
        Self {
            position,
            velocity: [0.0; 3],
        }
    }
}

/// Global desired position of one agent at time `t`.
pub fn desired_global(
    agent: AgentId,
    t: f64,
    mission: &MissionPlan,
    leader: &LeaderState,
) -> Result<GlobalPoint> {
    let snap = mission.formation_at(t)?;
    let s = snap.get(agent).ok_or_else(|| {
        Error::InvalidConfig(format!("agent {agent} not in formation of {} agents", snap.len()))
    })?;
    Ok(local_to_global(s, leader))
}

/// One Euler step of the saturated proportional law for every agent.
pub fn step(
    states: &[AgentState],
    desired: &[GlobalPoint],
    dt: f64,
    law: &TrackingLaw,
) -> Vec<AgentState> {
    states
        .iter()
        .zip(desired)
        .map(|(s, d)| {
            let mut v = (*d - s.position).scale(law.gain);
            let speed = v.norm();
            if speed > law.v_max {
                v = v.scale(law.v_max / speed);
            }
            AgentState {
                position: s.position + v.scale(dt),
                velocity: [v.x, v.y, v.z],
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentRecord {
    pub agent: AgentId,
    pub desired_local: LocalPoint,
    pub actual_local: LocalPoint,
    /// Global (Method 1) or virtual-global (Method 2) desired position.
    pub desired_global: GlobalPoint,
    pub actual_global: GlobalPoint,
    /// Distance between desired and actual position in flight space.
    pub tracking_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: f64,
    pub leader: LeaderState,
    pub q: Jacobian2,
    pub decomposition: StrainDecomposition,
    pub agents: Vec<AgentRecord>,
    pub safety: SafetyReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLog {
    pub mode: Mode,
    pub dt: f64,
    pub records: Vec<StepRecord>,
}

/// Aggregate figures over a completed run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub mode: Mode,
    pub steps: usize,
    pub min_lambda_2: f64,
    pub min_pairwise_distance: f64,
    pub containment_fraction: f64,
    pub corridor_fraction: Option<f64>,
    pub violation_steps: usize,
    pub first_violation_time: Option<f64>,
    pub max_tracking_error: f64,
}

impl TrajectoryLog {
    pub fn summary(&self) -> RunSummary {
        let n = self.records.len();
        let frac = |count: usize| if n == 0 { 0.0 } else { count as f64 / n as f64 };
        let reports = || self.records.iter().map(|r| &r.safety);
        let corridor: Vec<bool> = reports().filter_map(|s| s.corridor_ok).collect();
        RunSummary {
            mode: self.mode,
            steps: n,
            min_lambda_2: reports().map(|s| s.lambda_2).fold(f64::INFINITY, f64::min),
            min_pairwise_distance: reports()
                .map(|s| s.min_pairwise_dist)
                .fold(f64::INFINITY, f64::min),
            containment_fraction: frac(reports().filter(|s| s.containment_ok).count()),
            corridor_fraction: (!corridor.is_empty())
                .then(|| corridor.iter().filter(|&&ok| ok).count() as f64 / corridor.len() as f64),
            violation_steps: reports().filter(|s| !s.is_safe()).count(),
            first_violation_time: reports().find(|s| !s.is_safe()).map(|s| s.time),
            max_tracking_error: self
                .records
                .iter()
                .flat_map(|r| r.agents.iter().map(|a| a.tracking_error))
                .fold(0.0, f64::max),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dynamics {
    Tracking,
    Disabled,
}

/// Runs the configured protocol with tracking dynamics.
pub fn run(cfg: &RunConfig) -> Result<TrajectoryLog> {
    cfg.validate()?;
    simulate(cfg, Dynamics::Tracking)
}

/// Runs the protocol with agents placed exactly on their desired positions.
pub fn run_desired(cfg: &RunConfig) -> Result<TrajectoryLog> {
    cfg.validate_structure()?;
    simulate(cfg, Dynamics::Disabled)
}

fn simulate(cfg: &RunConfig, dynamics: Dynamics) -> Result<TrajectoryLog> {
    let reference = cfg.mission.reference();
    let offset = GlobalPoint::new(cfg.initial_offset[0], cfg.initial_offset[1], cfg.initial_offset[2]);
    let steps = cfg.step_count();
    let mut records = Vec::with_capacity(steps + 1);
    let mut states: Vec<AgentState> = Vec::new();

    for k in 0..=steps {
        let t = k as f64 * cfg.dt;
        let leader = cfg.leader.state_at(t);
        let q = cfg.mission.jacobian_at(t)?;
        let decomposition = polar_decompose(&q)?;
        let desired = apply_transform(reference, &q)?.at(t);

        // Frame the agents physically fly in.
        let flight_frame = match cfg.mode {
            Mode::Method1 => leader,
            Mode::Method2 => LeaderState::at_origin(leader.elevation())?,
        };
        let desired_flight: Vec<GlobalPoint> = desired
            .positions()
            .iter()
            .map(|p| local_to_global(*p, &flight_frame))
            .collect();
        if k == 0 {
            states = desired_flight
                .iter()
                .map(|p| AgentState::at_rest(*p + offset))
                .collect();
        }
        let actual_flight: Vec<GlobalPoint> = match dynamics {
            Dynamics::Tracking => states.iter().map(|s| s.position).collect(),
            Dynamics::Disabled => desired_flight.clone(),
        };
        let actual_local: Vec<LocalPoint> = actual_flight
            .iter()
            .map(|p| global_to_local(*p, &flight_frame))
            .collect();

        let (desired_global, actual_global, corridor_ok) = match cfg.mode {
            Mode::Method1 => {
                let corridor_ok = cfg
                    .safety
                    .corridor
                    .map(|_| corridor_clearance(&actual_flight, &cfg.safety))
                    .transpose()?;
                (desired_flight.clone(), actual_flight.clone(), corridor_ok)
            }
            Mode::Method2 => {
                let lift = |p: &LocalPoint, z: f64| {
                    let g = local_to_global(*p, &leader);
                    GlobalPoint::new(g.x, g.y, z)
                };
                let desired_global = desired
                    .positions()
                    .iter()
                    .zip(&desired_flight)
                    .map(|(p, f)| lift(p, f.z))
                    .collect();
                let actual_global = actual_local
                    .iter()
                    .zip(&actual_flight)
                    .map(|(p, f)| lift(p, f.z))
                    .collect();
                // The environment, not the team, moves: re-express it locally.
                let corridor_ok = cfg
                    .safety
                    .corridor
                    .map(|c| local_corridor_clearance(&actual_local, &c.in_local_frame(&leader)));
                (desired_global, actual_global, corridor_ok)
            }
        };

        let realized = FormationSnapshot::new(t, actual_local.clone());
        let safety = SafetyReport::assess(&decomposition, &desired, &realized, corridor_ok, &cfg.safety);
        if cfg.strict && !safety.is_safe() {
            return Err(Error::SafetyViolation {
                time: t,
                kinds: safety.violations(),
            });
        }

        let agents = desired
            .iter()
            .map(|(id, p)| {
                let i = id.index();
                AgentRecord {
                    agent: id,
                    desired_local: p,
                    actual_local: actual_local[i],
                    desired_global: desired_global[i],
                    actual_global: actual_global[i],
                    tracking_error: desired_flight[i].distance(actual_flight[i]),
                }
            })
            .collect();
        records.push(StepRecord {
            t,
            leader,
            q,
            decomposition,
            agents,
            safety,
        });

        if dynamics == Dynamics::Tracking && k < steps {
            states = step(&states, &desired_flight, cfg.dt, &cfg.tracking);
        }
    }

    Ok(TrajectoryLog {
        mode: cfg.mode,
        dt: cfg.dt,
        records,
    })
}

/// Composes a local-frame log's desired positions with its recorded leader
/// poses, `d + z_d ĉ3 + u ĉ1 + v ĉ2`, and returns the largest distance to the
/// global-frame log's desired positions.
pub fn desired_deviation(global_log: &TrajectoryLog, local_log: &TrajectoryLog) -> f64 {
    if global_log.records.len() != local_log.records.len() {
        return f64::INFINITY;
    }
    let mut worst: f64 = 0.0;
    for (g, l) in global_log.records.iter().zip(&local_log.records) {
        let (c1, c2) = l.leader.basis();
        for (ga, la) in g.agents.iter().zip(&l.agents) {
            let s = la.desired_local;
            let composed = GlobalPoint::new(
                l.leader.x() + s.u * c1[0] + s.v * c2[0],
                l.leader.y() + s.u * c1[1] + s.v * c2[1],
                l.leader.elevation(),
            );
            worst = worst.max(composed.distance(ga.desired_global));
        }
    }
    worst
}

/// Runs both protocols without dynamics and returns the largest distance
/// between Method-1 desired global positions and leader-composed Method-2
/// desired positions.
pub fn method_equivalence_check(cfg: &RunConfig) -> Result<f64> {
    let mut global = cfg.clone();
    global.mode = Mode::Method1;
    global.strict = false;
    let mut local = global.clone();
    local.mode = Mode::Method2;
    Ok(desired_deviation(&run_desired(&global)?, &run_desired(&local)?))
}
