//! Reference and desired configurations of the quadcopter team.
//!
//! Agent 1 is the primary leader and keeps its reference position for all
//! time. Every other agent is placed by the 2×2 Jacobian acting on its
//! reference position. Agents 1, 2 and 3 form the boundary triangle that
//! must enclose the quadruped (the local origin).

use std::f64::consts::TAU;
use std::fmt;
use std::ops::{Add, Mul};

use serde::{Deserialize, Serialize};

use crate::error::{Assumption, Error, Result};
use crate::frames::LocalPoint;

/// Determinant threshold below which a Jacobian is treated as singular.
pub const EPS_DET: f64 = 1e-9;
/// Area threshold (m²) below which the boundary triangle is degenerate.
pub const EPS_AREA: f64 = 1e-9;

/// 1-based agent index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AgentId(pub usize);

impl AgentId {
    pub const PRIMARY: AgentId = AgentId(1);

    pub fn index(self) -> usize {
        self.0 - 1
    }

    pub fn is_boundary(self) -> bool {
        (1..=3).contains(&self.0)
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Row-major 2×2 Jacobian of the affine formation map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jacobian2 {
    pub q11: f64,
    pub q12: f64,
    pub q21: f64,
    pub q22: f64,
}

impl Jacobian2 {
    pub const IDENTITY: Jacobian2 = Jacobian2::new(1.0, 0.0, 0.0, 1.0);

    pub const fn new(q11: f64, q12: f64, q21: f64, q22: f64) -> Self {
        Self { q11, q12, q21, q22 }
    }

    /// Builds from the stacked vector `(Q11, Q12, Q21, Q22)`.
    pub fn from_vector(v: [f64; 4]) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn to_vector(self) -> [f64; 4] {
        [self.q11, self.q12, self.q21, self.q22]
    }

    pub fn rotation(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(c, -s, s, c)
    }

    pub fn det(&self) -> f64 {
        self.q11 * self.q22 - self.q12 * self.q21
    }

    pub fn transpose(&self) -> Self {
        Self::new(self.q11, self.q21, self.q12, self.q22)
    }

    pub fn apply(&self, p: LocalPoint) -> LocalPoint {
        LocalPoint::new(
            self.q11 * p.u + self.q12 * p.v,
            self.q21 * p.u + self.q22 * p.v,
        )
    }

    pub fn matmul(&self, rhs: &Jacobian2) -> Jacobian2 {
        Jacobian2::new(
            self.q11 * rhs.q11 + self.q12 * rhs.q21,
            self.q11 * rhs.q12 + self.q12 * rhs.q22,
            self.q21 * rhs.q11 + self.q22 * rhs.q21,
            self.q21 * rhs.q12 + self.q22 * rhs.q22,
        )
    }

    /// Largest absolute entry-wise difference.
    pub fn max_abs_diff(&self, other: &Jacobian2) -> f64 {
        self.to_vector()
            .iter()
            .zip(other.to_vector())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|q| q.is_finite())
    }
}

impl Add for Jacobian2 {
    type Output = Jacobian2;
    fn add(self, rhs: Jacobian2) -> Jacobian2 {
        Jacobian2::new(
            self.q11 + rhs.q11,
            self.q12 + rhs.q12,
            self.q21 + rhs.q21,
            self.q22 + rhs.q22,
        )
    }
}

impl Mul<f64> for Jacobian2 {
    type Output = Jacobian2;
    fn mul(self, s: f64) -> Jacobian2 {
        Jacobian2::new(self.q11 * s, self.q12 * s, self.q21 * s, self.q22 * s)
    }
}

/// Reference configuration of the team in the leader-local frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceFormation {
    l_1_0: f64,
    l_0: f64,
    theta_2_0: f64,
    theta_3_0: f64,
    positions: Vec<LocalPoint>,
}

/// Builds and validates the reference formation for the three boundary
/// agents: agent 1 on the first local axis at `l_1_0`, agents 2 and 3 at
/// radius `l_0` and angles `theta_2_0 < theta_3_0`.
pub fn build_reference(
    l_1_0: f64,
    l_0: f64,
    theta_2_0: f64,
    theta_3_0: f64,
) -> Result<ReferenceFormation> {
    for (name, value) in [
        ("l_1_0", l_1_0),
        ("l_0", l_0),
        ("theta_2_0", theta_2_0),
        ("theta_3_0", theta_3_0),
    ] {
        if !value.is_finite() {
            return Err(Error::InvalidConfig(format!("{name} must be finite")));
        }
    }
    if !(theta_2_0 > 0.0 && theta_3_0 > theta_2_0 && theta_3_0 < TAU) {
        return Err(Error::assumption(
            Assumption::NonCollinearBoundary,
            format!("got theta_2_0 = {theta_2_0}, theta_3_0 = {theta_3_0}"),
        ));
    }
    if !(l_0 > 0.0 && l_1_0 >= l_0) {
        return Err(Error::assumption(
            Assumption::ReferenceLengths,
            format!("got l_0 = {l_0}, l_1_0 = {l_1_0}"),
        ));
    }
    let positions = vec![
        LocalPoint::new(l_1_0, 0.0),
        LocalPoint::polar(l_0, theta_2_0),
        LocalPoint::polar(l_0, theta_3_0),
    ];
    Ok(ReferenceFormation {
        l_1_0,
        l_0,
        theta_2_0,
        theta_3_0,
        positions,
    })
}

impl ReferenceFormation {
    /// Adds interior (non-boundary) agents with the given reference
    /// positions. They receive ids 4, 5, ... in order.
    pub fn with_interior(mut self, interior: impl IntoIterator<Item = LocalPoint>) -> Result<Self> {
        for p in interior {
            if !p.is_finite() {
                return Err(Error::InvalidConfig(
                    "interior reference positions must be finite".into(),
                ));
            }
            self.positions.push(p);
        }
        Ok(self)
    }

    pub fn l_1_0(&self) -> f64 {
        self.l_1_0
    }

    pub fn l_0(&self) -> f64 {
        self.l_0
    }

    pub fn theta_2_0(&self) -> f64 {
        self.theta_2_0
    }

    pub fn theta_3_0(&self) -> f64 {
        self.theta_3_0
    }

    pub fn agent_count(&self) -> usize {
        self.positions.len()
    }

    pub fn position(&self, id: AgentId) -> Option<LocalPoint> {
        self.positions.get(id.0.checked_sub(1)?).copied()
    }

    pub fn positions(&self) -> &[LocalPoint] {
        &self.positions
    }

    pub fn agents(&self) -> impl Iterator<Item = AgentId> + '_ {
        (1..=self.positions.len()).map(AgentId)
    }
}

/// Desired local positions of every agent at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormationSnapshot {
    pub time: f64,
    positions: Vec<LocalPoint>,
}

impl FormationSnapshot {
    /// Snapshot from positions listed in agent-id order (agent 1 first).
    pub fn new(time: f64, positions: Vec<LocalPoint>) -> Self {
        Self { time, positions }
    }

    pub fn at(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    pub fn get(&self, id: AgentId) -> Option<LocalPoint> {
        self.positions.get(id.0.checked_sub(1)?).copied()
    }

    pub fn positions(&self) -> &[LocalPoint] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (AgentId, LocalPoint)> + '_ {
        self.positions
            .iter()
            .enumerate()
            .map(|(i, p)| (AgentId(i + 1), *p))
    }
}

/// Applies the Jacobian to every agent except the primary leader, which
/// stays at its reference position.
pub fn apply_transform(reference: &ReferenceFormation, q: &Jacobian2) -> Result<FormationSnapshot> {
    let det = q.det();
    if !(det > EPS_DET) || !det.is_finite() {
        return Err(Error::SingularJacobian { det });
    }
    let positions = reference
        .positions
        .iter()
        .enumerate()
        .map(|(i, p)| if i == 0 { *p } else { q.apply(*p) })
        .collect();
    Ok(FormationSnapshot::new(0.0, positions))
}

fn signed_area2(a: LocalPoint, b: LocalPoint, c: LocalPoint) -> f64 {
    (b.u - a.u) * (c.v - a.v) - (b.v - a.v) * (c.u - a.u)
}

/// True iff the local origin lies strictly inside the boundary triangle of
/// agents 1–3. Touching an edge counts as outside.
pub fn contains_leader(snap: &FormationSnapshot) -> Result<bool> {
    let (a, b, c) = match (snap.get(AgentId(1)), snap.get(AgentId(2)), snap.get(AgentId(3))) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => {
            return Err(Error::InvalidConfig(
                "containment needs the three boundary agents".into(),
            ))
        }
    };
    let area = 0.5 * signed_area2(a, b, c);
    if area.abs() < EPS_AREA {
        return Err(Error::DegenerateHull { area: area.abs() });
    }
    let o = LocalPoint::ORIGIN;
    // Sub-triangle areas against the origin, oriented like the hull.
    let sign = area.signum();
    let parts = [
        0.5 * signed_area2(o, b, c) * sign,
        0.5 * signed_area2(a, o, c) * sign,
        0.5 * signed_area2(a, b, o) * sign,
    ];
    Ok(parts.iter().all(|&s| s > EPS_AREA))
}
