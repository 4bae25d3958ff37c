//! Scenario files.
//!
//! A scenario is a TOML document with five sections. Lengths are in meters,
//! times in seconds, angles in radians. Angles may also be written as
//! multiples of π, e.g. `"2pi/3"`, `"-pi/2"` or `"0.5*pi"`.
//!
//! ```toml
//! [reference]          # reference triangle
//! l_1_0 = 1.25         # m, primary leader distance on the first local axis
//! l_0 = 1.25           # m, radius of agents 2 and 3
//! theta_2_0 = "2pi/3"  # rad
//! theta_3_0 = "4pi/3"  # rad
//!
//! [[phases]]           # contiguous blend phases
//! t0 = 5.0             # s
//! tf = 15.0            # s
//! l2_0 = 1.25          # m, agent 2 radius at t0
//! l3_0 = 1.25
//! l2_f = 0.5           # m, agent 2 radius at tf
//! l3_f = 0.7
//! # theta2_0, theta3_0, theta2_f, theta3_f default to the reference angles
//!
//! [leader]             # one of: segments, samples, file
//! start = [0.0, 0.0]   # m
//! heading = 0.0        # rad
//! z_d = 1.5            # m, team elevation
//! segments = [{ duration = 35.0, to = [7.0, 0.0] }]
//!
//! [safety]
//! lambda_min = 0.35
//! min_separation = 0.5 # m
//! l_min = 0.3          # m, lower radial bound for agents 2 and 3
//! corridor = { center_y = 0.0, half_width = 0.7, x_range = [2.5, 5.0] }
//!
//! [run]
//! mode = "method2"     # or "method1"
//! dt = 0.01            # s
//! duration = 35.0      # s, defaults to the mission end
//! gain = 2.0           # 1/s
//! v_max = 1.0          # m/s
//! ```

use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::formation::build_reference;
use crate::frames::LocalPoint;
use crate::planner::{build_j, plan_mission, BoundaryPolar, PhaseSpec, DEFAULT_L_MIN};
use crate::safety::{Corridor, SafetyConfig, DEFAULT_LAMBDA_MIN, DEFAULT_MIN_SEPARATION};
use crate::sim::{LeaderPath, LeaderSample, Mode, PathSegment, RunConfig, TrackingLaw, DEFAULT_DT, DEFAULT_GAIN, DEFAULT_V_MAX};

/// Parses a plain number or a multiple of π such as `2pi/3`, `-pi`,
/// `0.25*pi` or `3π/2`.
pub fn parse_angle(text: &str) -> std::result::Result<f64, String> {
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect::<String>().to_lowercase();
    if let Ok(v) = s.parse::<f64>() {
        return Ok(v);
    }
    let bad = || format!("cannot parse angle `{text}` (expected radians or a multiple of pi like `2pi/3`)");
    let (numerator, denominator) = match s.split_once('/') {
        Some((n, d)) => (n, d.parse::<f64>().map_err(|_| bad())?),
        None => (s.as_str(), 1.0),
    };
    let coefficient = numerator
        .strip_suffix("pi")
        .or_else(|| numerator.strip_suffix('π'))
        .ok_or_else(bad)?;
    let coefficient = coefficient.strip_suffix('*').unwrap_or(coefficient);
    let c = match coefficient {
        "" | "+" => 1.0,
        "-" => -1.0,
        other => other.parse::<f64>().map_err(|_| bad())?,
    };
    if denominator == 0.0 {
        return Err(bad());
    }
    Ok(c * PI / denominator)
}

/// An angle in radians that deserializes from a number or a π expression.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Angle(pub f64);

impl Serialize for Angle {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.0)
    }
}

impl<'de> Deserialize<'de> for Angle {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Number(v) => Ok(Angle(v)),
            Raw::Text(s) => parse_angle(&s).map(Angle).map_err(serde::de::Error::custom),
        }
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSection {
    pub l_1_0: f64,
    pub l_0: f64,
    pub theta_2_0: Angle,
    pub theta_3_0: Angle,
    /// Optional interior agents as `[u, v]` reference positions.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub interior: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseSection {
    pub t0: f64,
    pub tf: f64,
    pub l2_0: f64,
    pub l3_0: f64,
    pub l2_f: f64,
    pub l3_f: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta2_0: Option<Angle>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta3_0: Option<Angle>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta2_f: Option<Angle>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta3_f: Option<Angle>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentSection {
    pub duration: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heading: Option<Angle>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_d: Option<f64>,
}

/// Leader path source. Exactly one of `samples`, `file` or `segments` is
/// used; `start`, `heading` and `z_d` seed the segment form.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeaderSection {
    /// Inline `[t, x, y, heading, z_d]` rows.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<[f64; 5]>>,
    /// CSV file with header `t,x,y,heading,z_d`, relative to the scenario.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heading: Option<Angle>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_d: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub segments: Vec<SegmentSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorridorSection {
    pub center_y: f64,
    pub half_width: f64,
    pub x_range: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SafetySection {
    pub lambda_min: f64,
    pub min_separation: f64,
    pub l_min: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corridor: Option<CorridorSection>,
}

impl Default for SafetySection {
    fn default() -> Self {
        Self {
            lambda_min: DEFAULT_LAMBDA_MIN,
            min_separation: DEFAULT_MIN_SEPARATION,
            l_min: DEFAULT_L_MIN,
            corridor: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub mode: Mode,
    pub dt: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duration: Option<f64>,
    pub gain: f64,
    pub v_max: f64,
    pub initial_offset: [f64; 3],
    pub strict: bool,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            mode: Mode::Method1,
            dt: DEFAULT_DT,
            duration: None,
            gain: DEFAULT_GAIN,
            v_max: DEFAULT_V_MAX,
            initial_offset: [0.0; 3],
            strict: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub reference: ReferenceSection,
    pub phases: Vec<PhaseSection>,
    #[serde(default)]
    pub leader: LeaderSection,
    #[serde(default)]
    pub safety: SafetySection,
    #[serde(default)]
    pub run: RunSection,
}

/// A parsed scenario and the directory relative paths resolve against.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub base_dir: PathBuf,
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Builds and validates a run configuration. Integration stability is
    /// not checked here; see [`RunConfig::check_stability`].
    pub fn to_run_config(&self, base_dir: &Path) -> Result<RunConfig> {
        let r = &self.reference;
        let reference = build_reference(r.l_1_0, r.l_0, r.theta_2_0.0, r.theta_3_0.0)
            .and_then(|f| f.with_interior(r.interior.iter().map(|&[u, v]| LocalPoint::new(u, v))))
            .map_err(|e| e.at("reference"))?;
        let j = build_j(&reference, self.safety.l_min).map_err(|e| e.at("safety.l_min"))?;

        let (t2, t3) = (r.theta_2_0.0, r.theta_3_0.0);
        let phases = self
            .phases
            .iter()
            .enumerate()
            .map(|(k, p)| {
                let angle = |a: Option<Angle>, default: f64| a.map_or(default, |a| a.0);
                let start = BoundaryPolar::new(p.l2_0, p.l3_0, angle(p.theta2_0, t2), angle(p.theta3_0, t3));
                let end = BoundaryPolar::new(p.l2_f, p.l3_f, angle(p.theta2_f, t2), angle(p.theta3_f, t3));
                PhaseSpec::new(p.t0, p.tf, start, end).map_err(|e| e.at(format!("phases[{k}]")))
            })
            .collect::<Result<Vec<_>>>()?;
        let mission = plan_mission(j, phases).map_err(|e| e.at("phases"))?;

        let leader = self.leader.to_path(base_dir).map_err(|e| e.at("leader"))?;

        let s = &self.safety;
        let corridor = s
            .corridor
            .as_ref()
            .map(|c| Corridor::new(c.center_y, c.half_width, c.x_range))
            .transpose()
            .map_err(|e| e.at("safety.corridor"))?;
        let safety = SafetyConfig::new(s.lambda_min, s.min_separation, corridor).map_err(|e| e.at("safety"))?;

        let run = &self.run;
        let duration = run.duration.unwrap_or_else(|| mission.span().1);
        let cfg = RunConfig {
            mode: run.mode,
            dt: run.dt,
            duration,
            tracking: TrackingLaw {
                gain: run.gain,
                v_max: run.v_max,
            },
            safety,
            mission,
            leader,
            initial_offset: run.initial_offset,
            strict: run.strict,
        };
        cfg.validate_structure().map_err(|e| e.at("run"))?;
        Ok(cfg)
    }
}

impl LeaderSection {
    fn to_path(&self, base_dir: &Path) -> Result<LeaderPath> {
        let sources = [self.samples.is_some(), self.file.is_some(), !self.segments.is_empty()]
            .iter()
            .filter(|&&b| b)
            .count();
        if sources > 1 {
            return Err(Error::InvalidConfig(
                "use only one of `samples`, `file` or `segments`".into(),
            ));
        }
        if let Some(rows) = &self.samples {
            return LeaderPath::new(rows.iter().map(|&r| sample_from_row(r)).collect());
        }
        if let Some(file) = &self.file {
            return read_leader_csv(&base_dir.join(file));
        }
        let [x, y] = self.start.unwrap_or([0.0, 0.0]);
        let start = LeaderSample {
            t: 0.0,
            x,
            y,
            heading: self.heading.map_or(0.0, |a| a.0),
            z_d: self.z_d.unwrap_or(0.0),
        };
        let segments: Vec<PathSegment> = self
            .segments
            .iter()
            .map(|s| PathSegment {
                duration: s.duration,
                to: s.to,
                heading: s.heading.map(|a| a.0),
                z_d: s.z_d,
            })
            .collect();
        LeaderPath::from_segments(start, &segments)
    }
}

fn sample_from_row([t, x, y, heading, z_d]: [f64; 5]) -> LeaderSample {
    LeaderSample {
        t,
        x,
        y,
        heading,
        z_d,
    }
}

/// Reads leader samples from a CSV file with header `t,x,y,heading,z_d`.
pub fn read_leader_csv(path: &Path) -> Result<LeaderPath> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    let samples = reader
        .deserialize::<LeaderSample>()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    LeaderPath::new(samples)
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let file = ScenarioFile::parse(&text).map_err(|e| e.at(path.display().to_string()))?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { file, base_dir })
    }

    pub fn run_config(&self) -> Result<RunConfig> {
        self.file.to_run_config(&self.base_dir)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::{Assumption, Constraint};

    const TABLE2: &str = r#"
name = "three-phase"

[reference]
l_1_0 = 1.25
l_0 = 1.25
theta_2_0 = "2pi/3"
theta_3_0 = "4pi/3"

[[phases]]
t0 = 5.0
tf = 15.0
l2_0 = 1.25
l3_0 = 1.25
l2_f = 0.5
l3_f = 0.7

[[phases]]
t0 = 15.0
tf = 25.0
l2_0 = 0.5
l3_0 = 0.7
l2_f = 0.5
l3_f = 0.7

[[phases]]
t0 = 25.0
tf = 35.0
l2_0 = 0.5
l3_0 = 0.7
l2_f = 1.25
l3_f = 1.25

[leader]
start = [0.0, 0.0]
heading = 0
z_d = 1.5
segments = [{ duration = 35.0, to = [7.0, 0.0] }]

[safety]
corridor = { center_y = 0.0, half_width = 0.7, x_range = [2.5, 5.0] }

[run]
mode = "method2"
"#;

    #[test]
    fn angle_expressions() {
        let cases = [
            ("2pi/3", 2.0 * PI / 3.0),
            ("4*pi/3", 4.0 * PI / 3.0),
            ("-pi/2", -PI / 2.0),
            ("pi", PI),
            ("0.5pi", 0.5 * PI),
            ("3π/2", 1.5 * PI),
            (" 1.25 ", 1.25),
        ];
        for (text, want) in cases {
            assert!((parse_angle(text).unwrap() - want).abs() < 1e-15, "{text}");
        }
        for bad in ["two pi", "pi/0", "2pi/x", "deg"] {
            assert!(parse_angle(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn parses_three_phase_scenario() {
        let file = ScenarioFile::parse(TABLE2).unwrap();
        let cfg = file.to_run_config(Path::new(".")).unwrap();
        assert_eq!(cfg.mode, Mode::Method2);
        assert_eq!(cfg.duration, 35.0);
        assert_eq!(cfg.mission.phases().len(), 3);
        assert_eq!(cfg.safety.lambda_min, 0.35);
        assert!(cfg.safety.corridor.is_some());
        assert!((cfg.leader.state_at(17.5).x() - 3.5).abs() < 1e-12);
    }

    #[test]
    fn round_trip_preserves_run_config() {
        let file = ScenarioFile::parse(TABLE2).unwrap();
        let text = file.to_toml_string().unwrap();
        let again = ScenarioFile::parse(&text).unwrap();
        assert_eq!(file, again);
        let base = Path::new(".");
        assert_eq!(file.to_run_config(base).unwrap(), again.to_run_config(base).unwrap());
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let err = ScenarioFile::parse("[reference]\nl_0 = = 1\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        let err = ScenarioFile::parse(&TABLE2.replace("l_1_0", "l_one")).unwrap_err();
        assert!(err.to_string().contains("l_one"), "{err}");
    }

    #[test]
    fn semantic_errors_name_field_and_rule() {
        let swapped = TABLE2
            .replace("theta_2_0 = \"2pi/3\"", "theta_2_0 = \"4pi/3\"")
            .replace("theta_3_0 = \"4pi/3\"", "theta_3_0 = \"2pi/3\"");
        let err = ScenarioFile::parse(&swapped).unwrap().to_run_config(Path::new(".")).unwrap_err();
        assert!(matches!(
            err.root(),
            Error::AssumptionViolation { assumption: Assumption::NonCollinearBoundary, .. }
        ));
        assert!(err.to_string().contains("reference"), "{err}");

        let too_small = TABLE2.replacen("l2_f = 0.5", "l2_f = 0.2", 1).replacen("l2_0 = 0.5", "l2_0 = 0.2", 1);
        let err = ScenarioFile::parse(&too_small).unwrap().to_run_config(Path::new(".")).unwrap_err();
        assert!(matches!(
            err.root(),
            Error::ConstraintViolation { constraint: Constraint::RadialBound, .. }
        ));
        assert!(err.to_string().contains("l_min <= l_i <= l_0"), "{err}");
    }

    #[test]
    fn leader_sources_are_exclusive() {
        let both = TABLE2.replace("segments = [", "samples = [[0.0, 0.0, 0.0, 0.0, 1.5]]\nsegments = [");
        assert!(ScenarioFile::parse(&both).unwrap().to_run_config(Path::new(".")).is_err());
    }

    #[test]
    fn leader_from_csv_file() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(
            dir.path().join("walk.csv"),
            "t,x,y,heading,z_d\n0,0,0,0,1.5\n10,1,0,0,1.5\n35,1,1,1.5707963267948966,1.5\n",
        )
        .unwrap();
        let text = TABLE2.replace(
            "start = [0.0, 0.0]\nheading = 0\nz_d = 1.5\nsegments = [{ duration = 35.0, to = [7.0, 0.0] }]",
            "file = \"walk.csv\"",
        );
        let path = dir.path().join("s.cfg");
        fs::write(&path, text).unwrap();
        let cfg = Scenario::load(&path).unwrap().run_config().unwrap();
        assert_eq!(cfg.leader.samples().len(), 3);
        assert!((cfg.leader.state_at(5.0).x() - 0.5).abs() < 1e-12);
    }
}
