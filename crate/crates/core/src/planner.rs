//! Jacobian planning from boundary-agent polar schedules.
//!
//! The local positions of boundary agents 2 and 3 are the design variables,
//! written in polar form `(l_i, θ_i)`. Because agents 2 and 3 are related to
//! their reference positions by the same Jacobian, the four entries of `Q`
//! follow from a constant 4×4 linear map `J` acting on
//! `(l2 cos θ2, l3 cos θ3, l2 sin θ2, l3 sin θ3)`. Over each mission phase the
//! polar variables are blended with the quintic `β` so that velocity and
//! acceleration vanish at both ends.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Assumption, Constraint, Error, Result};
use crate::formation::{apply_transform, FormationSnapshot, Jacobian2, ReferenceFormation};

/// Default lower bound on the radial distance of agents 2 and 3 (m).
pub const DEFAULT_L_MIN: f64 = 0.3;

/// Slack on the radial bound for values produced by floating-point blends.
const BOUND_SLACK: f64 = 1e-12;

/// Tolerance on value and time mismatches at phase joins.
pub const JOIN_TOLERANCE: f64 = 1e-9;

/// Polar coordinates of boundary agents 2 and 3 in the local frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPolar {
    pub l_2: f64,
    pub l_3: f64,
    pub theta_2: f64,
    pub theta_3: f64,
}

impl BoundaryPolar {
    pub const fn new(l_2: f64, l_3: f64, theta_2: f64, theta_3: f64) -> Self {
        Self {
            l_2,
            l_3,
            theta_2,
            theta_3,
        }
    }

    /// The stacked vector `(l2 cos θ2, l3 cos θ3, l2 sin θ2, l3 sin θ3)`.
    pub fn stacked(&self) -> [f64; 4] {
        let (s2, c2) = self.theta_2.sin_cos();
        let (s3, c3) = self.theta_3.sin_cos();
        [self.l_2 * c2, self.l_3 * c3, self.l_2 * s2, self.l_3 * s3]
    }

    fn components(&self) -> [f64; 4] {
        [self.l_2, self.l_3, self.theta_2, self.theta_3]
    }

    /// Componentwise `a (1 − β) + b β`.
    fn blend(a: &Self, b: &Self, beta: f64) -> Self {
        let mix = |x: f64, y: f64| x * (1.0 - beta) + y * beta;
        Self::new(
            mix(a.l_2, b.l_2),
            mix(a.l_3, b.l_3),
            mix(a.theta_2, b.theta_2),
            mix(a.theta_3, b.theta_3),
        )
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.components()
            .iter()
            .zip(other.components())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Admissible radial interval `[l_min, l_max]` for agents 2 and 3.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialLimits {
    pub l_min: f64,
    pub l_max: f64,
}

impl RadialLimits {
    /// Checks the schedule constraints: both radii inside the limits and
    /// `θ2 < θ3`.
    pub fn check(&self, bp: &BoundaryPolar) -> Result<()> {
        for (name, l) in [("l_2", bp.l_2), ("l_3", bp.l_3)] {
            if !(l >= self.l_min - BOUND_SLACK && l <= self.l_max + BOUND_SLACK) {
                return Err(Error::constraint(
                    Constraint::RadialBound,
                    format!(
                        "{name} = {l} outside [{}, {}]",
                        self.l_min, self.l_max
                    ),
                ));
            }
        }
        if !(bp.theta_2 < bp.theta_3) {
            return Err(Error::constraint(
                Constraint::AngleOrder,
                format!("theta_2 = {} >= theta_3 = {}", bp.theta_2, bp.theta_3),
            ));
        }
        Ok(())
    }
}

/// The constant 4×4 map from stacked boundary coordinates to the entries
/// `(Q11, Q12, Q21, Q22)`, together with the reference it was built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanMatrixJ {
    matrix: [[f64; 4]; 4],
    reference: ReferenceFormation,
    limits: RadialLimits,
}

fn block_diag(block: [[f64; 2]; 2], scale: f64) -> [[f64; 4]; 4] {
    let mut m = [[0.0; 4]; 4];
    for k in 0..2 {
        for i in 0..2 {
            for j in 0..2 {
                m[2 * k + i][2 * k + j] = scale * block[i][j];
            }
        }
    }
    m
}

/// Builds `J = 1 / (l_0 sin(θ3,0 − θ2,0)) · (I₂ ⊗ [[sin θ3,0, −sin θ2,0], [−cos θ3,0, cos θ2,0]])`.
pub fn build_j(reference: &ReferenceFormation, l_min: f64) -> Result<PlanMatrixJ> {
    let l_0 = reference.l_0();
    if !(l_min > 0.0 && l_min <= l_0) {
        return Err(Error::InvalidConfig(format!(
            "l_min must satisfy 0 < l_min <= l_0 = {l_0}, got {l_min}"
        )));
    }
    let (t2, t3) = (reference.theta_2_0(), reference.theta_3_0());
    let gap = (t3 - t2).sin();
    if gap.abs() < 1e-9 {
        return Err(Error::assumption(
            Assumption::NonCollinearBoundary,
            format!("sin(theta_3_0 - theta_2_0) = {gap:e}; boundary agents are collinear with the leader"),
        ));
    }
    let (s2, c2) = t2.sin_cos();
    let (s3, c3) = t3.sin_cos();
    let matrix = block_diag([[s3, -s2], [-c3, c2]], 1.0 / (l_0 * gap));
    Ok(PlanMatrixJ {
        matrix,
        reference: reference.clone(),
        limits: RadialLimits {
            l_min,
            l_max: l_0,
        },
    })
}

impl PlanMatrixJ {
    pub fn matrix(&self) -> &[[f64; 4]; 4] {
        &self.matrix
    }

    pub fn reference(&self) -> &ReferenceFormation {
        &self.reference
    }

    pub fn limits(&self) -> RadialLimits {
        self.limits
    }

    /// The forward map `H = l_0 (I₂ ⊗ [[cos θ2,0, sin θ2,0], [cos θ3,0, sin θ3,0]])`
    /// taking `(Q11, Q12, Q21, Q22)` to the stacked boundary coordinates.
    pub fn forward_map(&self) -> [[f64; 4]; 4] {
        let (s2, c2) = self.reference.theta_2_0().sin_cos();
        let (s3, c3) = self.reference.theta_3_0().sin_cos();
        block_diag([[c2, s2], [c3, s3]], self.reference.l_0())
    }

    /// `J` applied to a stacked vector without any constraint checks.
    pub fn apply_raw(&self, x: [f64; 4]) -> [f64; 4] {
        let mut out = [0.0; 4];
        for (o, row) in out.iter_mut().zip(&self.matrix) {
            *o = row.iter().zip(&x).map(|(a, b)| a * b).sum();
        }
        out
    }

    /// The boundary polar coordinates of the reference configuration.
    pub fn reference_boundary(&self) -> BoundaryPolar {
        BoundaryPolar::new(
            self.reference.l_0(),
            self.reference.l_0(),
            self.reference.theta_2_0(),
            self.reference.theta_3_0(),
        )
    }
}

/// Computes the Jacobian for the given boundary polar coordinates.
pub fn jacobian_from_boundary(j: &PlanMatrixJ, bp: &BoundaryPolar) -> Result<Jacobian2> {
    j.limits.check(bp)?;
    Ok(Jacobian2::from_vector(j.apply_raw(bp.stacked())))
}

/// Recovers boundary polar coordinates from a Jacobian by transforming the
/// reference positions of agents 2 and 3. Angles are reported in [0, 2π).
pub fn recover_boundary(reference: &ReferenceFormation, q: &Jacobian2) -> BoundaryPolar {
    let p = reference.positions();
    let s2 = q.apply(p[1]);
    let s3 = q.apply(p[2]);
    BoundaryPolar::new(
        s2.norm(),
        s3.norm(),
        s2.angle().rem_euclid(TAU),
        s3.angle().rem_euclid(TAU),
    )
}

fn check_interval(t: f64, t_0: f64, t_f: f64) -> Result<()> {
    if !(t_f > t_0) {
        return Err(Error::InvalidConfig(format!(
            "interval end {t_f} must exceed start {t_0}"
        )));
    }
    if !(t >= t_0 && t <= t_f) {
        return Err(Error::OutOfInterval { t, t_0, t_f });
    }
    Ok(())
}

/// The polynomial `6τ⁵ − 15τ⁴ + 10τ³`, defined for any real `τ`.
pub fn quintic(tau: f64) -> f64 {
    tau * tau * tau * (10.0 + tau * (-15.0 + 6.0 * tau))
}

/// Quintic blend `6τ⁵ − 15τ⁴ + 10τ³`, `τ = (t − t_0)/(t_f − t_0)`.
pub fn beta(t: f64, t_0: f64, t_f: f64) -> Result<f64> {
    check_interval(t, t_0, t_f)?;
    Ok(quintic((t - t_0) / (t_f - t_0)))
}

/// One mission phase: boundary coordinates blended from `start` to `end`
/// over `[t_0, t_f]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpec {
    pub t_0: f64,
    pub t_f: f64,
    pub start: BoundaryPolar,
    pub end: BoundaryPolar,
}

impl PhaseSpec {
    pub fn new(t_0: f64, t_f: f64, start: BoundaryPolar, end: BoundaryPolar) -> Result<Self> {
        if !(t_0.is_finite() && t_f.is_finite() && t_f > t_0) {
            return Err(Error::InvalidConfig(format!(
                "phase needs finite t_f > t_0, got [{t_0}, {t_f}]"
            )));
        }
        Ok(Self {
            t_0,
            t_f,
            start,
            end,
        })
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.t_0 && t <= self.t_f
    }
}

/// Boundary coordinates of `phase` at time `t`.
pub fn schedule_at(phase: &PhaseSpec, t: f64) -> Result<BoundaryPolar> {
    let b = beta(t, phase.t_0, phase.t_f)?;
    Ok(BoundaryPolar::blend(&phase.start, &phase.end, b))
}

/// A validated, time-contiguous sequence of phases.
///
/// Before the first phase the plan holds the first start values; after the
/// last it holds the last end values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionPlan {
    j: PlanMatrixJ,
    phases: Vec<PhaseSpec>,
}

/// Validates and assembles a mission.
pub fn plan_mission(j: PlanMatrixJ, phases: Vec<PhaseSpec>) -> Result<MissionPlan> {
    if phases.is_empty() {
        return Err(Error::InvalidConfig("a mission needs at least one phase".into()));
    }
    for (k, phase) in phases.iter().enumerate() {
        PhaseSpec::new(phase.t_0, phase.t_f, phase.start, phase.end)?;
        j.limits.check(&phase.start).map_err(|e| in_phase(e, k, "start"))?;
        j.limits.check(&phase.end).map_err(|e| in_phase(e, k, "end"))?;
    }
    for (k, pair) in phases.windows(2).enumerate() {
        let (a, b) = (&pair[0], &pair[1]);
        if (a.t_f - b.t_0).abs() > JOIN_TOLERANCE {
            return Err(Error::DiscontinuousMission {
                index: k,
                detail: format!("phase {} ends at {} but phase {} starts at {}", k + 1, a.t_f, k + 2, b.t_0),
            });
        }
        let jump = a.end.max_abs_diff(&b.start);
        if jump > JOIN_TOLERANCE {
            return Err(Error::DiscontinuousMission {
                index: k,
                detail: format!(
                    "boundary values jump by {jump:e} between phase {} and phase {}",
                    k + 1,
                    k + 2
                ),
            });
        }
    }
    Ok(MissionPlan { j, phases })
}

fn in_phase(err: Error, k: usize, which: &str) -> Error {
    match err {
        Error::ConstraintViolation { constraint, detail } => Error::ConstraintViolation {
            constraint,
            detail: format!("phase {} {which}: {detail}", k + 1),
        },
        other => other,
    }
}

impl MissionPlan {
    pub fn plan_matrix(&self) -> &PlanMatrixJ {
        &self.j
    }

    pub fn reference(&self) -> &ReferenceFormation {
        &self.j.reference
    }

    pub fn phases(&self) -> &[PhaseSpec] {
        &self.phases
    }

    /// `(first t_0, last t_f)`.
    pub fn span(&self) -> (f64, f64) {
        (self.phases[0].t_0, self.phases[self.phases.len() - 1].t_f)
    }

    /// Boundary coordinates at any time, holding the end values outside the
    /// mission span.
    pub fn boundary_at(&self, t: f64) -> BoundaryPolar {
        let first = &self.phases[0];
        if t <= first.t_0 {
            return first.start;
        }
        for phase in &self.phases {
            if let Ok(bp) = schedule_at(phase, t) {
                return bp;
            }
        }
        // Past the end, or inside a sub-tolerance gap at a join.
        self.phases
            .iter()
            .rev()
            .find(|p| p.t_f <= t)
            .map(|p| p.end)
            .unwrap_or(first.start)
    }

    pub fn jacobian_at(&self, t: f64) -> Result<Jacobian2> {
        jacobian_from_boundary(&self.j, &self.boundary_at(t))
    }

    /// Desired local formation at time `t`.
    pub fn formation_at(&self, t: f64) -> Result<FormationSnapshot> {
        let q = self.jacobian_at(t)?;
        Ok(apply_transform(&self.j.reference, &q)?.at(t))
    }
}
