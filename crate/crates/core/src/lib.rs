//! Affine formation planning and replay for a quadcopter team guided by a
//! single quadruped.
//!
//! The quadruped is the translational leader: its pose defines a local
//! frame. Inside that frame the quadcopters form a 2-D deformable body
//! whose shape is an affine image of a reference triangle. The Jacobian of
//! that map is planned from polar schedules of two boundary quadcopters and
//! certified by polar decomposition into rotation and strain.
//!
//! - [`frames`]: global/local frame algebra
//! - [`formation`]: reference configuration, Jacobian, containment
//! - [`planner`]: closed-form Jacobian planning and quintic schedules
//! - [`safety`]: polar decomposition, eigenvalue gate, separation, corridor
//! - [`sim`]: fixed-step replay in the global or leader-local protocol
//! - [`scenario`]: human-editable scenario files
//! - [`export`]: CSV / JSON writers for trajectory and safety data
//! - [`verify`]: property checks on a scenario

pub mod error;
pub mod export;
pub mod formation;
pub mod frames;
pub mod planner;
pub mod safety;
pub mod scenario;
pub mod sim;
pub mod verify;

pub use error::{Assumption, Constraint, Error, Result};
pub use formation::{apply_transform, build_reference, contains_leader, AgentId, FormationSnapshot, Jacobian2, ReferenceFormation};
pub use frames::{global_to_local, local_to_global, GlobalPoint, LeaderState, LocalPoint};
pub use planner::{beta, build_j, jacobian_from_boundary, plan_mission, schedule_at, BoundaryPolar, MissionPlan, PhaseSpec, PlanMatrixJ};
pub use safety::{check_eigenvalues, corridor_clearance, min_pairwise_distance, polar_decompose, Corridor, SafetyConfig, SafetyReport, StrainDecomposition};
pub use verify::{verify, CheckResult, VerifyReport};
pub use sim::{desired_global, method_equivalence_check, run, run_desired, step, LeaderPath, Mode, RunConfig, TrajectoryLog};
