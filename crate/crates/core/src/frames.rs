//! Planar frame algebra between the ground-fixed global frame and the
//! leader-fixed local frame.
//!
//! The local frame shares its vertical axis with the global one, so a local
//! point maps to global coordinates by a rotation about that axis through
//! the leader heading, a planar translation to the leader position, and a
//! pure elevation offset.

use std::f64::consts::{PI, TAU};
use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in the global frame, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GlobalPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl GlobalPoint {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn norm(self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn distance(self, other: GlobalPoint) -> f64 {
        (self - other).norm()
    }

    pub fn scale(self, s: f64) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Add for GlobalPoint {
    type Output = GlobalPoint;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl Sub for GlobalPoint {
    type Output = GlobalPoint;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

/// A point in the formation plane of the leader's local frame, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LocalPoint {
    pub u: f64,
    pub v: f64,
}

impl LocalPoint {
    pub const ORIGIN: LocalPoint = LocalPoint { u: 0.0, v: 0.0 };

    pub const fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    /// Point at radius `r` and polar angle `theta`.
    pub fn polar(r: f64, theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self::new(r * c, r * s)
    }

    pub fn norm(self) -> f64 {
        self.u.hypot(self.v)
    }

    pub fn angle(self) -> f64 {
        self.v.atan2(self.u)
    }

    pub fn distance(self, other: LocalPoint) -> f64 {
        (self.u - other.u).hypot(self.v - other.v)
    }

    pub fn is_finite(self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }
}

/// Wraps an angle into (−π, π].
pub fn normalize_angle(theta: f64) -> f64 {
    let a = theta.rem_euclid(TAU);
    if a > PI {
        a - TAU
    } else {
        a
    }
}

/// Planar pose of the leader plus the team elevation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeaderState {
    x: f64,
    y: f64,
    heading: f64,
    z_d: f64,
}

impl LeaderState {
    /// Builds a leader state, normalizing the heading into (−π, π].
    pub fn new(x: f64, y: f64, heading: f64, z_d: f64) -> Result<Self> {
        if !(x.is_finite() && y.is_finite() && heading.is_finite() && z_d.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "leader state must be finite (x={x}, y={y}, heading={heading}, z_d={z_d})"
            )));
        }
        if z_d < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "team elevation z_d must be >= 0, got {z_d}"
            )));
        }
        Ok(Self {
            x,
            y,
            heading: normalize_angle(heading),
            z_d,
        })
    }

    /// Leader at the origin with zero heading.
    pub fn at_origin(z_d: f64) -> Result<Self> {
        Self::new(0.0, 0.0, 0.0, z_d)
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn heading(&self) -> f64 {
        self.heading
    }

    pub fn elevation(&self) -> f64 {
        self.z_d
    }

    /// Leader position lifted to the team elevation.
    pub fn anchor(&self) -> GlobalPoint {
        GlobalPoint::new(self.x, self.y, self.z_d)
    }

    /// Local basis vectors `(ĉ1, ĉ2)` expressed in global planar coordinates.
    pub fn basis(&self) -> ([f64; 2], [f64; 2]) {
        let (s, c) = self.heading.sin_cos();
        ([c, s], [-s, c])
    }
}

/// Maps a local formation point to the global frame at the team elevation.
pub fn local_to_global(p: LocalPoint, leader: &LeaderState) -> GlobalPoint {
    let (s, c) = leader.heading.sin_cos();
    GlobalPoint::new(
        leader.x + p.u * c - p.v * s,
        leader.y + p.u * s + p.v * c,
        leader.z_d,
    )
}

/// Inverse of [`local_to_global`] in the plane. The z component is dropped.
pub fn global_to_local(p: GlobalPoint, leader: &LeaderState) -> LocalPoint {
    let (s, c) = leader.heading.sin_cos();
    let dx = p.x - leader.x;
    let dy = p.y - leader.y;
    LocalPoint::new(dx * c + dy * s, -dx * s + dy * c)
}

/// Rotates a local point by `angle` about the local origin.
pub fn rotate(p: LocalPoint, angle: f64) -> LocalPoint {
    let (s, c) = angle.sin_cos();
    LocalPoint::new(p.u * c - p.v * s, p.u * s + p.v * c)
}
