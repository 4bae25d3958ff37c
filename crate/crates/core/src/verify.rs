//! Property checks run against a scenario.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::formation::Jacobian2;
use crate::planner::{quintic, recover_boundary, PlanMatrixJ};
use crate::safety::polar_decompose;
use crate::sim::{method_equivalence_check, run_desired, RunConfig};

/// Residual bound for algebraic identities.
pub const IDENTITY_TOLERANCE: f64 = 1e-9;
/// Bound on endpoint derivatives of the blend.
pub const FLATNESS_TOLERANCE: f64 = 1e-6;
/// Grid used for the monotonicity check.
pub const MONOTONE_GRID: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub residual: f64,
    pub threshold: f64,
    pub detail: String,
}

impl CheckResult {
    fn below(name: &str, residual: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.to_string(),
            passed: residual < threshold,
            residual,
            threshold,
            detail: detail.into(),
        }
    }

    fn at_least(name: &str, value: f64, bound: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.to_string(),
            passed: value >= bound,
            residual: value,
            threshold: bound,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<22} value {:.3e} (threshold {:.3e})  {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.residual,
            self.threshold,
            self.detail
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Largest entry of `J·H − I₄`.
pub fn plan_inverse_residual(j: &PlanMatrixJ) -> f64 {
    let a = j.matrix();
    let h = j.forward_map();
    let mut worst: f64 = 0.0;
    for r in 0..4 {
        for c in 0..4 {
            let v: f64 = (0..4).map(|k| a[r][k] * h[k][c]).sum();
            let target = if r == c { 1.0 } else { 0.0 };
            worst = worst.max((v - target).abs());
        }
    }
    worst
}

/// Central-difference estimates of `dβ/dt` and `d²β/dt²` at both ends of a
/// blend of length `span`, with step `h = 1e-5·span`. Near `τ = 1` the
/// polynomial is evaluated through `β(τ) − 1 = −β(1 − τ)` so the differences
/// are taken on values near zero.
pub fn blend_endpoint_derivatives(span: f64) -> [f64; 4] {
    let h = 1e-5 * span;
    let d = h / span;
    let first = |f: &dyn Fn(f64) -> f64, x: f64| (f(x + d) - f(x - d)) / (2.0 * h);
    let second = |f: &dyn Fn(f64) -> f64, x: f64| (f(x + d) - 2.0 * f(x) + f(x - d)) / (h * h);
    let near_start = |tau: f64| quintic(tau);
    let near_end = |tau: f64| -quintic(1.0 - tau);
    [
        first(&near_start, 0.0),
        second(&near_start, 0.0),
        first(&near_end, 1.0),
        second(&near_end, 1.0),
    ]
}

/// Runs every property check on `cfg`. Only structural validity is
/// required; the integration stability bound is itself one of the checks.
pub fn verify(cfg: &RunConfig) -> Result<VerifyReport> {
    cfg.validate_structure()?;
    let mut checks = Vec::new();
    let j = cfg.mission.plan_matrix();
    let reference = cfg.mission.reference();

    let gdt = cfg.tracking.gain * cfg.dt;
    checks.push(CheckResult::below(
        "stability",
        gdt,
        1.0,
        if gdt < 1.0 {
            "gain * dt < 1".to_string()
        } else {
            format!("stability constraint gain * dt < 1 violated (gain {} * dt {})", cfg.tracking.gain, cfg.dt)
        },
    ));

    checks.push(CheckResult::below(
        "plan_inverse",
        plan_inverse_residual(j),
        IDENTITY_TOLERANCE,
        "max |J*H - I4|",
    ));

    let q_ref = crate::planner::jacobian_from_boundary(j, &j.reference_boundary())?;
    checks.push(CheckResult::below(
        "reference_fixpoint",
        q_ref.max_abs_diff(&Jacobian2::IDENTITY),
        IDENTITY_TOLERANCE,
        "reference boundary maps to Q = I",
    ));

    let mut endpoint = 0.0_f64;
    let mut flat = 0.0_f64;
    let mut monotone = true;
    for phase in cfg.mission.phases() {
        let b0 = crate::planner::beta(phase.t_0, phase.t_0, phase.t_f)?;
        let b1 = crate::planner::beta(phase.t_f, phase.t_0, phase.t_f)?;
        endpoint = endpoint.max(b0.abs()).max((b1 - 1.0).abs());
        let span = phase.t_f - phase.t_0;
        flat = blend_endpoint_derivatives(span).iter().fold(flat, |m, v| m.max(v.abs()));
        let mut prev = f64::NEG_INFINITY;
        for k in 0..=MONOTONE_GRID {
            let t = phase.t_0 + span * k as f64 / MONOTONE_GRID as f64;
            let b = crate::planner::beta(t.min(phase.t_f), phase.t_0, phase.t_f)?;
            monotone &= b > prev;
            prev = b;
        }
    }
    checks.push(CheckResult {
        name: "blend_endpoints".into(),
        passed: endpoint == 0.0,
        residual: endpoint,
        threshold: 0.0,
        detail: "beta(t0) = 0 and beta(tf) = 1 exactly".into(),
    });
    checks.push(CheckResult::below(
        "blend_flatness",
        flat,
        FLATNESS_TOLERANCE,
        "endpoint first/second derivatives",
    ));
    checks.push(CheckResult {
        name: "blend_monotone".into(),
        passed: monotone,
        residual: if monotone { 0.0 } else { 1.0 },
        threshold: 0.0,
        detail: format!("strictly increasing on {MONOTONE_GRID} intervals per phase"),
    });

    let steps = cfg.step_count();
    let mut reconstruction = 0.0_f64;
    let mut det_identity = 0.0_f64;
    let mut round_trip = 0.0_f64;
    let mut bound_failures = 0usize;
    for k in 0..=steps {
        let t = k as f64 * cfg.dt;
        let bp = cfg.mission.boundary_at(t);
        if j.limits().check(&bp).is_err() {
            bound_failures += 1;
        }
        let q = cfg.mission.jacobian_at(t)?;
        let dec = polar_decompose(&q)?;
        reconstruction = reconstruction.max(dec.reconstruct().max_abs_diff(&q));
        det_identity = det_identity.max((dec.lambda_1 * dec.lambda_2 - q.det()).abs());
        round_trip = round_trip.max(recover_boundary(reference, &q).max_abs_diff(&bp));
    }
    checks.push(CheckResult::below(
        "strain_reconstruction",
        reconstruction,
        IDENTITY_TOLERANCE,
        "max |R*U - Q| over the run",
    ));
    checks.push(CheckResult::below(
        "strain_determinant",
        det_identity,
        IDENTITY_TOLERANCE,
        "max |lambda1*lambda2 - det Q|",
    ));
    checks.push(CheckResult {
        name: "boundary_constraints".into(),
        passed: bound_failures == 0,
        residual: bound_failures as f64,
        threshold: 0.0,
        detail: "steps violating l_min <= l_i <= l_0 or theta_2 < theta_3".into(),
    });
    checks.push(CheckResult::below(
        "boundary_round_trip",
        round_trip,
        IDENTITY_TOLERANCE,
        "polar coordinates recovered from Q",
    ));

    checks.push(CheckResult::below(
        "method_equivalence",
        method_equivalence_check(cfg)?,
        IDENTITY_TOLERANCE,
        "global vs leader-composed local desired positions (m)",
    ));

    let mut desired_cfg = cfg.clone();
    desired_cfg.strict = false;
    let summary = run_desired(&desired_cfg)?.summary();
    checks.push(CheckResult::at_least(
        "eigenvalue_gate",
        summary.min_lambda_2,
        cfg.safety.lambda_min,
        "min lambda2 >= lambda_min",
    ));
    checks.push(CheckResult::at_least(
        "containment",
        summary.containment_fraction,
        1.0,
        "fraction of steps with the leader inside the boundary triangle",
    ));
    checks.push(CheckResult::at_least(
        "separation",
        summary.min_pairwise_distance,
        cfg.safety.min_separation,
        "min pairwise distance of the desired formation (m)",
    ));
    if let Some(fraction) = summary.corridor_fraction {
        checks.push(CheckResult::at_least(
            "corridor",
            fraction,
            1.0,
            "fraction of steps with the desired formation inside the corridor",
        ));
    }

    Ok(VerifyReport { checks })
}
