//! Collision-avoidance certification.
//!
//! `Q = R(ψ_r) · U` with `U` the symmetric positive-definite strain
//!
//! ```text
//! U = [ λ1 cos²ψ_d + λ2 sin²ψ_d      (λ1 − λ2) cos ψ_d sin ψ_d ]
//!     [ (λ1 − λ2) cos ψ_d sin ψ_d    λ1 sin²ψ_d + λ2 cos²ψ_d   ]
//! ```
//!
//! Inter-agent separation is guaranteed while the smaller principal stretch
//! stays above `λ_min`. Realized snapshots are additionally checked for
//! pairwise distance and, when a corridor is configured, for clearance.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formation::{contains_leader, FormationSnapshot, Jacobian2, EPS_DET};
use crate::frames::{global_to_local, GlobalPoint, LeaderState, LocalPoint};

pub const DEFAULT_LAMBDA_MIN: f64 = 0.35;
pub const DEFAULT_MIN_SEPARATION: f64 = 0.5;

/// Rotation angle, principal stretches and shear angle of a Jacobian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrainDecomposition {
    pub psi_r: f64,
    pub lambda_1: f64,
    pub lambda_2: f64,
    pub psi_d: f64,
}

impl StrainDecomposition {
    pub fn rotation(&self) -> Jacobian2 {
        Jacobian2::rotation(self.psi_r)
    }

    /// The strain matrix rebuilt from `(λ1, λ2, ψ_d)`.
    pub fn strain(&self) -> Jacobian2 {
        let (s, c) = self.psi_d.sin_cos();
        let (l1, l2) = (self.lambda_1, self.lambda_2);
        let off = (l1 - l2) * c * s;
        Jacobian2::new(l1 * c * c + l2 * s * s, off, off, l1 * s * s + l2 * c * c)
    }

    /// `R(ψ_r) · U`.
    pub fn reconstruct(&self) -> Jacobian2 {
        self.rotation().matmul(&self.strain())
    }
}

/// Polar decomposition of an orientation-preserving 2×2 Jacobian.
///
/// `U = sqrt(QᵀQ)` is obtained from the closed-form eigensystem of `QᵀQ`,
/// then `R = Q U⁻¹`.
pub fn polar_decompose(q: &Jacobian2) -> Result<StrainDecomposition> {
    let det = q.det();
    if det < -EPS_DET {
        return Err(Error::ImproperJacobian { det });
    }
    if !(det > EPS_DET) || !q.is_finite() {
        return Err(Error::SingularJacobian { det });
    }

    // C = QᵀQ
    let c11 = q.q11 * q.q11 + q.q21 * q.q21;
    let c22 = q.q12 * q.q12 + q.q22 * q.q22;
    let c12 = q.q11 * q.q12 + q.q21 * q.q22;

    let trace = c11 + c22;
    let spread = (c11 - c22).hypot(2.0 * c12);
    let lambda_1 = (0.5 * (trace + spread)).sqrt();
    // λ1 λ2 = det Q; avoids cancellation in (trace − spread).
    let lambda_2 = det / lambda_1;

    let psi_d = if spread <= 1e-14 * trace {
        0.0
    } else {
        let a = (0.5 * (2.0 * c12).atan2(c11 - c22)).rem_euclid(PI);
        if a >= PI {
            0.0
        } else {
            a
        }
    };

    let mut dec = StrainDecomposition {
        psi_r: 0.0,
        lambda_1,
        lambda_2,
        psi_d,
    };
    let u = dec.strain();
    let det_u = lambda_1 * lambda_2;
    let u_inv = Jacobian2::new(u.q22 / det_u, -u.q12 / det_u, -u.q21 / det_u, u.q11 / det_u);
    let r = q.matmul(&u_inv);
    dec.psi_r = (r.q21 - r.q12).atan2(r.q11 + r.q22);
    Ok(dec)
}

/// Axis-aligned corridor slab in the global frame: for `x` inside
/// `x_range`, agents must satisfy `|y − center_y| <= half_width`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Corridor {
    pub center_y: f64,
    pub half_width: f64,
    pub x_range: [f64; 2],
}

impl Corridor {
    pub fn new(center_y: f64, half_width: f64, x_range: [f64; 2]) -> Result<Self> {
        if !(half_width > 0.0 && x_range[1] >= x_range[0] && center_y.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "corridor needs half_width > 0 and x_range[0] <= x_range[1], got half_width = {half_width}, x_range = {x_range:?}"
            )));
        }
        Ok(Self {
            center_y,
            half_width,
            x_range,
        })
    }

    fn admits(&self, along: f64, across: f64) -> bool {
        along < self.x_range[0] || along > self.x_range[1] || across.abs() <= self.half_width
    }

    /// The corridor as seen from the leader frame.
    pub fn in_local_frame(&self, leader: &LeaderState) -> LocalCorridor {
        let origin = global_to_local(GlobalPoint::new(0.0, self.center_y, 0.0), leader);
        let (s, c) = leader.heading().sin_cos();
        LocalCorridor {
            corridor: *self,
            origin,
            axis: [c, -s],
            normal: [s, c],
        }
    }
}

/// A corridor re-expressed in the leader frame: the global centerline point
/// `(0, center_y)` and the global axes written in local coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalCorridor {
    pub corridor: Corridor,
    pub origin: LocalPoint,
    pub axis: [f64; 2],
    pub normal: [f64; 2],
}

impl LocalCorridor {
    pub fn admits(&self, p: LocalPoint) -> bool {
        let du = p.u - self.origin.u;
        let dv = p.v - self.origin.v;
        let along = du * self.axis[0] + dv * self.axis[1];
        let across = du * self.normal[0] + dv * self.normal[1];
        self.corridor.admits(along, across)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafetyConfig {
    pub lambda_min: f64,
    pub min_separation: f64,
    pub corridor: Option<Corridor>,
}

impl Default for SafetyConfig {
    fn default() -> Self {
        Self {
            lambda_min: DEFAULT_LAMBDA_MIN,
            min_separation: DEFAULT_MIN_SEPARATION,
            corridor: None,
        }
    }
}

impl SafetyConfig {
    pub fn new(lambda_min: f64, min_separation: f64, corridor: Option<Corridor>) -> Result<Self> {
        if !(lambda_min > 0.0 && lambda_min.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "lambda_min must be > 0, got {lambda_min}"
            )));
        }
        if !(min_separation > 0.0 && min_separation.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "min_separation must be > 0, got {min_separation}"
            )));
        }
        Ok(Self {
            lambda_min,
            min_separation,
            corridor,
        })
    }
}

/// True iff the smaller principal stretch reaches `lambda_min`.
pub fn check_eigenvalues(dec: &StrainDecomposition, cfg: &SafetyConfig) -> bool {
    dec.lambda_2 >= cfg.lambda_min
}

/// Smallest distance over all unordered agent pairs; infinite for fewer
/// than two agents.
pub fn min_pairwise_distance(snap: &FormationSnapshot) -> f64 {
    let p = snap.positions();
    let mut best = f64::INFINITY;
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            best = best.min(p[i].distance(p[j]));
        }
    }
    best
}

/// Checks every agent inside the corridor's x-range against its half width.
pub fn corridor_clearance(global_positions: &[GlobalPoint], cfg: &SafetyConfig) -> Result<bool> {
    let corridor = cfg.corridor.as_ref().ok_or(Error::CorridorUnset)?;
    Ok(global_positions
        .iter()
        .all(|p| corridor.admits(p.x, p.y - corridor.center_y)))
}

/// Same check as [`corridor_clearance`] for positions in the leader frame.
pub fn local_corridor_clearance(local_positions: &[LocalPoint], corridor: &LocalCorridor) -> bool {
    local_positions.iter().all(|p| corridor.admits(*p))
}

/// Per-timestep safety verdicts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafetyReport {
    pub time: f64,
    pub eig_ok: bool,
    pub lambda_1: f64,
    pub lambda_2: f64,
    pub containment_ok: bool,
    pub min_pairwise_dist: f64,
    pub separation_ok: bool,
    /// `None` when no corridor is configured.
    pub corridor_ok: Option<bool>,
}

impl SafetyReport {
    /// Assembles the report. Containment is judged on the desired formation,
    /// separation on the realized one. A degenerate boundary triangle counts
    /// as not contained.
    pub fn assess(
        dec: &StrainDecomposition,
        desired: &FormationSnapshot,
        realized: &FormationSnapshot,
        corridor_ok: Option<bool>,
        cfg: &SafetyConfig,
    ) -> Self {
        let min_pairwise_dist = min_pairwise_distance(realized);
        Self {
            time: desired.time,
            eig_ok: check_eigenvalues(dec, cfg),
            lambda_1: dec.lambda_1,
            lambda_2: dec.lambda_2,
            containment_ok: contains_leader(desired).unwrap_or(false),
            min_pairwise_dist,
            separation_ok: min_pairwise_dist >= cfg.min_separation,
            corridor_ok,
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.eig_ok {
            out.push(format!("strain eigenvalue {:.4} below lambda_min", self.lambda_2));
        }
        if !self.containment_ok {
            out.push("leader outside boundary triangle".to_string());
        }
        if !self.separation_ok {
            out.push(format!(
                "pairwise distance {:.4} m below min_separation",
                self.min_pairwise_dist
            ));
        }
        if self.corridor_ok == Some(false) {
            out.push("corridor clearance lost".to_string());
        }
        out
    }

    pub fn is_safe(&self) -> bool {
        self.eig_ok && self.containment_ok && self.separation_ok && self.corridor_ok != Some(false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formation::{apply_transform, build_reference};
    use crate::frames::local_to_global;
    use proptest::prelude::*;

    const T2: f64 = 2.0 * PI / 3.0;
    const T3: f64 = 4.0 * PI / 3.0;

    fn phase2_q() -> Jacobian2 {
        let s = 3.0f64.sqrt();
        Jacobian2::new(0.48, s / 6.0 * 0.2 / 1.25, s / 2.0 * 0.2 / 1.25, 0.48)
    }

    /// Oracle: Newton iteration `X ← (X + X⁻ᵀ)/2` converges to the polar
    /// rotation; `U = Xᵀ Q`, eigenvalues of a symmetric 2×2 by bisection on
    /// the characteristic polynomial.
    fn oracle_polar(q: &Jacobian2) -> (Jacobian2, f64, f64) {
        let mut x = *q;
        for _ in 0..100 {
            let d = x.det();
            let inv_t = Jacobian2::new(x.q22 / d, -x.q21 / d, -x.q12 / d, x.q11 / d);
            x = (x + inv_t) * 0.5;
        }
        let u = x.transpose().matmul(q);
        let (a, b, c) = (u.q11, 0.5 * (u.q12 + u.q21), u.q22);
        let charpoly = |l: f64| (a - l) * (c - l) - b * b;
        let bisect = |mut lo: f64, mut hi: f64| {
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if charpoly(lo).signum() == charpoly(mid).signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        let centre = 0.5 * (a + c);
        let bound = a.abs() + c.abs() + 2.0 * b.abs() + 1.0;
        (x, bisect(centre, bound), bisect(-bound, centre))
    }

    #[test]
    fn identity_decomposes_trivially() {
        let d = polar_decompose(&Jacobian2::IDENTITY).unwrap();
        assert_eq!((d.psi_r, d.lambda_1, d.lambda_2, d.psi_d), (0.0, 1.0, 1.0, 0.0));
    }

    #[test]
    fn pure_rotation_has_unit_strain() {
        let d = polar_decompose(&Jacobian2::rotation(0.3)).unwrap();
        assert!((d.psi_r - 0.3).abs() < 1e-12);
        assert!((d.lambda_1 - 1.0).abs() < 1e-12 && (d.lambda_2 - 1.0).abs() < 1e-12);
        assert_eq!(d.psi_d, 0.0);
    }

    #[test]
    fn phase_two_stretches_match_oracle() {
        let q = phase2_q();
        let d = polar_decompose(&q).unwrap();
        let (rot, l1, l2) = oracle_polar(&q);
        assert!((d.lambda_1 - l1).abs() < 1e-12, "{} vs {l1}", d.lambda_1);
        assert!((d.lambda_2 - l2).abs() < 1e-12, "{} vs {l2}", d.lambda_2);
        assert!(d.rotation().max_abs_diff(&rot) < 1e-12);
        assert!((d.lambda_1 - 0.5746).abs() < 1e-4 && (d.lambda_2 - 0.3898).abs() < 1e-4);
    }

    #[test]
    fn rejects_singular_and_reflecting() {
        assert!(matches!(
            polar_decompose(&Jacobian2::new(1.0, 2.0, 2.0, 4.0)),
            Err(Error::SingularJacobian { .. })
        ));
        assert!(matches!(
            polar_decompose(&Jacobian2::new(1.0, 0.0, 0.0, -1.0)),
            Err(Error::ImproperJacobian { .. })
        ));
    }

    #[test]
    fn shear_angle_in_half_turn() {
        // Stretch along the second axis: principal direction at π/2.
        let d = polar_decompose(&Jacobian2::new(1.0, 0.0, 0.0, 2.0)).unwrap();
        assert!((d.psi_d - PI / 2.0).abs() < 1e-12);
        let d = polar_decompose(&Jacobian2::new(2.0, 0.0, 0.0, 1.0)).unwrap();
        assert_eq!(d.psi_d, 0.0);
    }

    #[test]
    fn eigenvalue_gate() {
        let cfg = SafetyConfig::default();
        let dec = |l1, l2| StrainDecomposition {
            psi_r: 0.0,
            lambda_1: l1,
            lambda_2: l2,
            psi_d: 0.0,
        };
        assert!(check_eigenvalues(&dec(0.5746, 0.3898), &cfg));
        assert!(check_eigenvalues(&dec(1.0, 1.0), &cfg));
        assert!(!check_eigenvalues(&dec(0.5746, 0.30), &cfg));
    }

    #[test]
    fn pairwise_distance_cases() {
        let r = build_reference(1.25, 1.25, T2, T3).unwrap();
        let snap = apply_transform(&r, &Jacobian2::IDENTITY).unwrap();
        // Brute force over the three pairs.
        let p = snap.positions();
        let brute = [(0, 1), (0, 2), (1, 2)]
            .iter()
            .map(|&(i, j)| ((p[i].u - p[j].u).powi(2) + (p[i].v - p[j].v).powi(2)).sqrt())
            .fold(f64::INFINITY, f64::min);
        assert!((min_pairwise_distance(&snap) - brute).abs() < 1e-12);
        assert!((brute - 2.0 * 1.25 * (PI / 3.0).sin()).abs() < 1e-12);
        assert!((brute - 2.1651).abs() < 1e-4);

        let same = FormationSnapshot::new(0.0, vec![LocalPoint::new(1.0, 1.0); 2]);
        assert_eq!(min_pairwise_distance(&same), 0.0);

        let phase2 = apply_transform(&r, &phase2_q()).unwrap();
        let d = min_pairwise_distance(&phase2);
        let p = phase2.positions();
        let d23 = ((p[1].u - p[2].u).powi(2) + (p[1].v - p[2].v).powi(2)).sqrt();
        assert!((d - d23).abs() < 1e-12);
        assert!(d >= DEFAULT_MIN_SEPARATION);
    }

    #[test]
    fn corridor_cases() {
        let cfg = SafetyConfig::new(0.35, 0.5, Some(Corridor::new(0.0, 0.8, [0.0, 10.0]).unwrap()))
            .unwrap();
        let inside: Vec<_> = [0.7, -0.7, 0.0]
            .iter()
            .enumerate()
            .map(|(i, &y)| GlobalPoint::new(i as f64, y, 1.5))
            .collect();
        assert!(corridor_clearance(&inside, &cfg).unwrap());
        let mut outside = inside.clone();
        outside[1].y = 0.9;
        assert!(!corridor_clearance(&outside, &cfg).unwrap());
        // Outside the x-range the width is not enforced.
        outside[1].x = -1.0;
        assert!(corridor_clearance(&outside, &cfg).unwrap());

        assert!(matches!(
            corridor_clearance(&inside, &SafetyConfig::default()),
            Err(Error::CorridorUnset)
        ));
    }

    #[test]
    fn phase_two_formation_fits_corridor() {
        let r = build_reference(1.25, 1.25, T2, T3).unwrap();
        let snap = apply_transform(&r, &phase2_q()).unwrap();
        let max_v = snap.positions().iter().map(|p| p.v.abs()).fold(0.0, f64::max);
        assert!((max_v - 0.6062).abs() < 1e-4);
        let leader = LeaderState::new(3.0, 0.0, 0.0, 1.5).unwrap();
        let globals: Vec<_> = snap.positions().iter().map(|p| local_to_global(*p, &leader)).collect();
        let cfg = SafetyConfig::new(0.35, 0.5, Some(Corridor::new(0.0, 0.7, [0.0, 10.0]).unwrap()))
            .unwrap();
        assert!(corridor_clearance(&globals, &cfg).unwrap());
    }

    #[test]
    fn assess_flags_each_violation() {
        let r = build_reference(1.25, 1.25, T2, T3).unwrap();
        let snap = apply_transform(&r, &phase2_q()).unwrap();
        let dec = polar_decompose(&phase2_q()).unwrap();
        let strict = SafetyConfig::new(0.4, 1.2, None).unwrap();
        let report = SafetyReport::assess(&dec, &snap, &snap, Some(false), &strict);
        assert!(!report.eig_ok && !report.separation_ok && report.containment_ok);
        assert_eq!(report.violations().len(), 3);
        assert!(!report.is_safe());
    }

    fn positive_q() -> impl Strategy<Value = Jacobian2> {
        (-3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64)
            .prop_map(|(a, b, c, d)| Jacobian2::new(a, b, c, d))
            .prop_filter("det > 0.01", |q| q.det() > 0.01)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn reconstruction(q in positive_q()) {
            let d = polar_decompose(&q).unwrap();
            prop_assert!(d.reconstruct().max_abs_diff(&q) < 1e-9);
            prop_assert!(d.lambda_1 >= d.lambda_2 && d.lambda_2 > 0.0);
            prop_assert!((d.lambda_1 * d.lambda_2 - q.det()).abs() < 1e-9);
            prop_assert!(d.psi_d >= 0.0 && d.psi_d < PI);
            let r = d.rotation();
            prop_assert!(r.transpose().matmul(&r).max_abs_diff(&Jacobian2::IDENTITY) < 1e-12);
            prop_assert!((r.det() - 1.0).abs() < 1e-12);
            let u = d.strain();
            prop_assert_eq!(u.q12, u.q21);
        }

        #[test]
        fn scaling_scales_stretches(q in positive_q(), s in 0.1..10.0f64) {
            let d = polar_decompose(&q).unwrap();
            let ds = polar_decompose(&(q * s)).unwrap();
            prop_assert!((ds.lambda_1 - s * d.lambda_1).abs() < 1e-12 * s * d.lambda_1.max(1.0));
            prop_assert!((ds.lambda_2 - s * d.lambda_2).abs() < 1e-12 * s * d.lambda_1.max(1.0));
            let cfg = SafetyConfig::new(d.lambda_2 * 0.9, 0.5, None).unwrap();
            let scaled = SafetyConfig::new(cfg.lambda_min * s, 0.5, None).unwrap();
            prop_assert_eq!(check_eigenvalues(&d, &cfg), check_eigenvalues(&ds, &scaled));
        }

        #[test]
        fn local_and_global_corridor_agree(x in -3.0..8.0f64, y in -2.0..2.0f64,
                                           lx in -3.0..8.0f64, ly in -1.0..1.0f64, h in -PI..PI) {
            let cfg = SafetyConfig::new(0.35, 0.5, Some(Corridor::new(0.2, 0.7, [2.0, 5.0]).unwrap())).unwrap();
            let leader = LeaderState::new(lx, ly, h, 1.5).unwrap();
            let g = GlobalPoint::new(x, y, 1.5);
            let local = global_to_local(g, &leader);
            let lc = cfg.corridor.unwrap().in_local_frame(&leader);
            // Skip points within rounding distance of the slab boundary.
            prop_assume!((x - 2.0).abs() > 1e-9 && (x - 5.0).abs() > 1e-9);
            prop_assume!(((y - 0.2).abs() - 0.7).abs() > 1e-9);
            prop_assert_eq!(local_corridor_clearance(&[local], &lc), corridor_clearance(&[g], &cfg).unwrap());
        }
    }

    #[test]
    fn table_box_has_positive_determinant() {
        use crate::planner::{build_j, jacobian_from_boundary, BoundaryPolar};
        let r = build_reference(1.25, 1.25, T2, T3).unwrap();
        let j = build_j(&r, 0.3).unwrap();
        for a in 0..50 {
            for b in 0..50 {
                let l2 = 0.3 + (1.25 - 0.3) * a as f64 / 49.0;
                let l3 = 0.3 + (1.25 - 0.3) * b as f64 / 49.0;
                let q = jacobian_from_boundary(&j, &BoundaryPolar::new(l2, l3, T2, T3)).unwrap();
                assert!(q.det() > 0.0);
                assert!(polar_decompose(&q).is_ok());
            }
        }
    }
}
