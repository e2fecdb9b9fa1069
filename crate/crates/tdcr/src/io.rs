//! File formats: robot descriptions (JSON), shape and gait records (CSV),
//! ground-truth centerlines (CSV), calibration results (JSON), and the
//! tip-error metric.
//!
//! All formats are SI (meters, radians) and versioned: JSON documents carry
//! a `format_version` field, CSV files a `# format_version 1` comment line.
//! Floats are written in full round-trip precision, so writing and
//! re-reading reproduces values bit-exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{Error, Result};
use crate::gait::GaitSequence;
use crate::geometry::{RobotGeometry, TendonRouting, Vec3};
use crate::statics::ActuationCommand;

/// Current version of every file format in this module.
pub const FORMAT_VERSION: u32 = 1;

/// File-level failures, each variant a distinct machine-recognizable class.
#[derive(Debug, Error)]
pub enum IoError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}:{column}: parse error: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: tendon {tendon}: expected {expected} way points (2n+1), got {actual}")]
    WaypointCount {
        path: PathBuf,
        tendon: usize,
        expected: usize,
        actual: usize,
    },
    #[error("{path}: unsupported format_version {found}, this build reads {supported}")]
    Version {
        path: PathBuf,
        found: u32,
        supported: u32,
    },
    #[error("{path}: {message}")]
    Invalid { path: PathBuf, message: String },
    #[error("{path}: line {line}: {message}")]
    Csv {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

#[derive(Debug, Serialize, Deserialize)]
struct TendonFile {
    waypoints_rel_m: Vec<[f64; 3]>,
    terminal_anchored: bool,
}

/// On-disk robot description. `n`, `link_lengths_m`, `joint_limit_rad` and
/// `tendons` are required; `mu` and `stretch_compliance_m` are optional
/// solver defaults carried with the robot.
#[derive(Debug, Serialize, Deserialize)]
pub struct RobotDescriptionFile {
    #[serde(default = "default_version")]
    pub format_version: u32,
    pub n: usize,
    pub link_lengths_m: Vec<f64>,
    pub joint_limit_rad: f64,
    tendons: Vec<TendonFile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stretch_compliance_m: Option<f64>,
}

fn default_version() -> u32 {
    FORMAT_VERSION
}

/// A validated robot plus the optional solver defaults and any warnings
/// (unknown keys) produced while loading.
#[derive(Debug)]
pub struct LoadedRobot {
    pub geometry: RobotGeometry,
    pub mu: Option<f64>,
    pub stretch_compliance: Option<f64>,
    pub warnings: Vec<String>,
}

const ROBOT_KEYS: &[&str] = &[
    "format_version",
    "n",
    "link_lengths_m",
    "joint_limit_rad",
    "tendons",
    "mu",
    "stretch_compliance_m",
];
const TENDON_KEYS: &[&str] = &["waypoints_rel_m", "terminal_anchored"];

fn unknown_key_warnings(value: &serde_json::Value) -> Vec<String> {
    let mut warnings = Vec::new();
    if let Some(map) = value.as_object() {
        for key in map.keys() {
            if !ROBOT_KEYS.contains(&key.as_str()) {
                warnings.push(format!("unknown key `{key}` ignored"));
            }
        }
        if let Some(tendons) = map.get("tendons").and_then(|t| t.as_array()) {
            for (i, tendon) in tendons.iter().enumerate() {
                if let Some(tmap) = tendon.as_object() {
                    for key in tmap.keys() {
                        if !TENDON_KEYS.contains(&key.as_str()) {
                            warnings.push(format!("tendon {i}: unknown key `{key}` ignored"));
                        }
                    }
                }
            }
        }
    }
    warnings
}

/// Loads and fully validates a robot description.
pub fn load_robot(path: impl AsRef<Path>) -> std::result::Result<LoadedRobot, IoError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| IoError::Read {
        path: path.into(),
        source,
    })?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| IoError::Parse {
            path: path.into(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
    let warnings = unknown_key_warnings(&value);
    let file: RobotDescriptionFile =
        serde_json::from_value(value).map_err(|e| IoError::Parse {
            path: path.into(),
            line: 0,
            column: 0,
            message: e.to_string(),
        })?;
    if file.format_version != FORMAT_VERSION {
        return Err(IoError::Version {
            path: path.into(),
            found: file.format_version,
            supported: FORMAT_VERSION,
        });
    }
    if file.link_lengths_m.len() != file.n {
        return Err(IoError::Invalid {
            path: path.into(),
            message: format!(
                "n = {} but link_lengths_m has {} entries",
                file.n,
                file.link_lengths_m.len()
            ),
        });
    }
    let expected = 2 * file.n + 1;
    let mut tendons = Vec::with_capacity(file.tendons.len());
    for (i, t) in file.tendons.iter().enumerate() {
        if t.waypoints_rel_m.len() != expected {
            return Err(IoError::WaypointCount {
                path: path.into(),
                tendon: i,
                expected,
                actual: t.waypoints_rel_m.len(),
            });
        }
        let pts = t
            .waypoints_rel_m
            .iter()
            .map(|p| Vec3::new(p[0], p[1], p[2]))
            .collect();
        tendons.push(TendonRouting::new(pts, t.terminal_anchored));
    }
    let geometry = RobotGeometry::new(file.link_lengths_m, file.joint_limit_rad, tendons)
        .map_err(|e| IoError::Invalid {
            path: path.into(),
            message: e.to_string(),
        })?;
    Ok(LoadedRobot {
        geometry,
        mu: file.mu,
        stretch_compliance: file.stretch_compliance_m,
        warnings,
    })
}

/// Writes a robot description; loading it back reproduces the geometry
/// bit-exactly.
pub fn write_robot(
    path: impl AsRef<Path>,
    geometry: &RobotGeometry,
    mu: Option<f64>,
    stretch_compliance: Option<f64>,
) -> std::result::Result<(), IoError> {
    let path = path.as_ref();
    let file = RobotDescriptionFile {
        format_version: FORMAT_VERSION,
        n: geometry.n(),
        link_lengths_m: geometry.link_lengths().to_vec(),
        joint_limit_rad: geometry.joint_limit(),
        tendons: geometry
            .tendons()
            .iter()
            .map(|t| TendonFile {
                waypoints_rel_m: t
                    .relative_waypoints
                    .iter()
                    .map(|p| [p.x, p.y, p.z])
                    .collect(),
                terminal_anchored: t.terminal_anchored,
            })
            .collect(),
        mu,
        stretch_compliance_m: stretch_compliance,
    };
    let text = serde_json::to_string_pretty(&file).expect("robot description serializes");
    fs::write(path, text).map_err(|source| IoError::Write {
        path: path.into(),
        source,
    })
}

/// Frame origins of one shape, optionally with per-tendon way points.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ShapeRecord {
    pub frames: Vec<Vec3>,
    /// `(tendon index, world way points)` blocks, in tendon order.
    pub waypoints: Vec<(usize, Vec<Vec3>)>,
}

impl ShapeRecord {
    pub fn from_frames(frames: Vec<Vec3>) -> Self {
        Self {
            frames,
            waypoints: Vec::new(),
        }
    }

    /// CSV rows `frame_index,x_m,y_m,z_m[,tendon]`; way point rows carry
    /// their tendon index in the extra column.
    pub fn write(&self, path: impl AsRef<Path>) -> std::result::Result<(), IoError> {
        let path = path.as_ref();
        let mut out = String::new();
        let _ = writeln!(out, "# format_version {FORMAT_VERSION}");
        if self.waypoints.is_empty() {
            let _ = writeln!(out, "frame_index,x_m,y_m,z_m");
            for (i, p) in self.frames.iter().enumerate() {
                let _ = writeln!(out, "{i},{},{},{}", p.x, p.y, p.z);
            }
        } else {
            let _ = writeln!(out, "frame_index,x_m,y_m,z_m,tendon");
            for (i, p) in self.frames.iter().enumerate() {
                let _ = writeln!(out, "{i},{},{},{},", p.x, p.y, p.z);
            }
            for (tendon, pts) in &self.waypoints {
                for (i, p) in pts.iter().enumerate() {
                    let _ = writeln!(out, "{i},{},{},{},{tendon}", p.x, p.y, p.z);
                }
            }
        }
        fs::write(path, out).map_err(|source| IoError::Write {
            path: path.into(),
            source,
        })
    }

    pub fn read(path: impl AsRef<Path>) -> std::result::Result<Self, IoError> {
        let path = path.as_ref();
        let rows = read_csv_rows(path)?;
        let Some((header, data)) = rows.split_first() else {
            return Err(IoError::Invalid {
                path: path.into(),
                message: "missing header row".into(),
            });
        };
        let with_tendon = match header.1.as_slice() {
            [a, b, c, d] if a == "frame_index" && b == "x_m" && c == "y_m" && d == "z_m" => false,
            [a, b, c, d, e]
                if a == "frame_index"
                    && b == "x_m"
                    && c == "y_m"
                    && d == "z_m"
                    && e == "tendon" =>
            {
                true
            }
            _ => {
                return Err(IoError::Csv {
                    path: path.into(),
                    line: header.0,
                    message: format!("unexpected header {:?}", header.1),
                })
            }
        };
        let mut record = ShapeRecord::default();
        for (line, fields) in data {
            let want = if with_tendon { 5 } else { 4 };
            if fields.len() != want {
                return Err(IoError::Csv {
                    path: path.into(),
                    line: *line,
                    message: format!("expected {want} fields, got {}", fields.len()),
                });
            }
            let idx: usize = parse_field(path, *line, &fields[0])?;
            let p = Vec3::new(
                parse_field(path, *line, &fields[1])?,
                parse_field(path, *line, &fields[2])?,
                parse_field(path, *line, &fields[3])?,
            );
            let tendon: Option<usize> = if with_tendon && !fields[4].is_empty() {
                Some(parse_field(path, *line, &fields[4])?)
            } else {
                None
            };
            match tendon {
                None => {
                    if idx != record.frames.len() {
                        return Err(IoError::Csv {
                            path: path.into(),
                            line: *line,
                            message: format!(
                                "frame_index must increase from 0, got {idx} after {}",
                                record.frames.len()
                            ),
                        });
                    }
                    record.frames.push(p);
                }
                Some(t) => {
                    match record.waypoints.last_mut() {
                        Some((last, pts)) if *last == t => pts.push(p),
                        _ => record.waypoints.push((t, vec![p])),
                    };
                }
            }
        }
        Ok(record)
    }
}

/// Arc-length-parameterized centerline samples, the ground-truth ingestion
/// format. `s_m` is non-decreasing and starts at zero; the tip is the
/// sample with the largest arc length.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthShape {
    samples: Vec<(f64, Vec3)>,
}

impl GroundTruthShape {
    pub fn new(samples: Vec<(f64, Vec3)>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyInput {
                what: "ground-truth samples",
            });
        }
        if samples[0].0 != 0.0 {
            return Err(Error::InvalidParameter {
                name: "s_m",
                reason: format!("must start at 0, got {}", samples[0].0),
            });
        }
        for w in samples.windows(2) {
            if !(w[1].0 >= w[0].0) {
                return Err(Error::InvalidParameter {
                    name: "s_m",
                    reason: format!("must be non-decreasing, got {} after {}", w[1].0, w[0].0),
                });
            }
        }
        Ok(Self { samples })
    }

    /// Chord-length parameterization of a polyline (e.g. frame origins).
    pub fn from_polyline(points: &[Vec3]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyInput {
                what: "ground-truth samples",
            });
        }
        let mut s = 0.0;
        let mut samples = vec![(0.0, points[0])];
        for w in points.windows(2) {
            s += (w[1] - w[0]).norm();
            samples.push((s, w[1]));
        }
        Self::new(samples)
    }

    pub fn samples(&self) -> &[(f64, Vec3)] {
        &self.samples
    }

    /// The sample with the largest arc length.
    pub fn tip(&self) -> Vec3 {
        self.samples
            .iter()
            .max_by(|a, b| a.0.total_cmp(&b.0))
            .expect("non-empty by construction")
            .1
    }

    pub fn write(&self, path: impl AsRef<Path>) -> std::result::Result<(), IoError> {
        let path = path.as_ref();
        let mut out = String::new();
        let _ = writeln!(out, "# format_version {FORMAT_VERSION}");
        let _ = writeln!(out, "s_m,x_m,y_m,z_m");
        for (s, p) in &self.samples {
            let _ = writeln!(out, "{s},{},{},{}", p.x, p.y, p.z);
        }
        fs::write(path, out).map_err(|source| IoError::Write {
            path: path.into(),
            source,
        })
    }

    pub fn read(path: impl AsRef<Path>) -> std::result::Result<Self, IoError> {
        let path = path.as_ref();
        let rows = read_csv_rows(path)?;
        let Some((header, data)) = rows.split_first() else {
            return Err(IoError::Invalid {
                path: path.into(),
                message: "missing header row".into(),
            });
        };
        if header.1 != ["s_m", "x_m", "y_m", "z_m"] {
            return Err(IoError::Csv {
                path: path.into(),
                line: header.0,
                message: format!("unexpected header {:?}", header.1),
            });
        }
        let mut samples = Vec::with_capacity(data.len());
        for (line, fields) in data {
            if fields.len() != 4 {
                return Err(IoError::Csv {
                    path: path.into(),
                    line: *line,
                    message: format!("expected 4 fields, got {}", fields.len()),
                });
            }
            samples.push((
                parse_field(path, *line, &fields[0])?,
                Vec3::new(
                    parse_field(path, *line, &fields[1])?,
                    parse_field(path, *line, &fields[2])?,
                    parse_field(path, *line, &fields[3])?,
                ),
            ));
        }
        Self::new(samples).map_err(|e| IoError::Invalid {
            path: path.into(),
            message: e.to_string(),
        })
    }
}

/// Euclidean distance between the estimated tip (last frame origin) and the
/// ground-truth tip, plus that error as a fraction of the chain length.
pub fn tip_error(estimated: &[Vec3], truth: &GroundTruthShape) -> Result<(f64, f64)> {
    if estimated.is_empty() {
        return Err(Error::EmptyInput {
            what: "estimated frame origins",
        });
    }
    let error = (estimated[estimated.len() - 1] - truth.tip()).norm();
    let length: f64 = estimated.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
    if length <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "estimated",
            reason: "chain length is zero".into(),
        });
    }
    Ok((error, error / length))
}

/// Writes `step,tendon_0_m,...` rows for one gait cycle.
pub fn write_gait(
    path: impl AsRef<Path>,
    gait: &GaitSequence,
) -> std::result::Result<(), IoError> {
    let path = path.as_ref();
    let tendons = gait
        .steps
        .first()
        .map_or(0, |c| c.displacements().len());
    let mut out = String::new();
    let _ = writeln!(out, "# format_version {FORMAT_VERSION}");
    let _ = writeln!(
        out,
        "# period_steps {} frequency_hint_hz {}",
        gait.period_steps, gait.frequency_hint_hz
    );
    let mut header = String::from("step");
    for t in 0..tendons {
        let _ = write!(header, ",tendon_{t}_m");
    }
    let _ = writeln!(out, "{header}");
    for (k, cmd) in gait.steps.iter().enumerate() {
        let _ = write!(out, "{k}");
        for d in cmd.displacements() {
            let _ = write!(out, ",{d}");
        }
        let _ = writeln!(out);
    }
    fs::write(path, out).map_err(|source| IoError::Write {
        path: path.into(),
        source,
    })
}

/// Reads a gait CSV back into per-step displacement rows.
pub fn read_gait(path: impl AsRef<Path>) -> std::result::Result<Vec<Vec<f64>>, IoError> {
    let path = path.as_ref();
    let rows = read_csv_rows(path)?;
    let Some((header, data)) = rows.split_first() else {
        return Err(IoError::Invalid {
            path: path.into(),
            message: "missing header row".into(),
        });
    };
    if header.1.first().map(String::as_str) != Some("step") {
        return Err(IoError::Csv {
            path: path.into(),
            line: header.0,
            message: format!("unexpected header {:?}", header.1),
        });
    }
    let mut steps = Vec::with_capacity(data.len());
    for (line, fields) in data {
        if fields.len() != header.1.len() {
            return Err(IoError::Csv {
                path: path.into(),
                line: *line,
                message: format!(
                    "expected {} fields, got {}",
                    header.1.len(),
                    fields.len()
                ),
            });
        }
        let mut row = Vec::with_capacity(fields.len() - 1);
        for f in &fields[1..] {
            row.push(parse_field(path, *line, f)?);
        }
        steps.push(row);
    }
    Ok(steps)
}

/// One command file of a calibration dataset.
#[derive(Debug, Serialize, Deserialize)]
pub struct CommandFile {
    #[serde(default = "default_version")]
    pub format_version: u32,
    /// One displacement per tendon, meters.
    pub displacements_m: Vec<f64>,
    /// Explicit actuated set; defaults to the nonzero displacements.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub actuated: Option<Vec<usize>>,
}

impl CommandFile {
    pub fn to_command(&self) -> Result<ActuationCommand> {
        match &self.actuated {
            Some(set) => ActuationCommand::new(self.displacements_m.clone(), set.clone()),
            None => ActuationCommand::from_displacements(self.displacements_m.clone()),
        }
    }
}

pub fn load_command(path: impl AsRef<Path>) -> std::result::Result<CommandFile, IoError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| IoError::Read {
        path: path.into(),
        source,
    })?;
    let file: CommandFile = serde_json::from_str(&text).map_err(|e| IoError::Parse {
        path: path.into(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    if file.format_version != FORMAT_VERSION {
        return Err(IoError::Version {
            path: path.into(),
            found: file.format_version,
            supported: FORMAT_VERSION,
        });
    }
    Ok(file)
}

pub fn write_command(
    path: impl AsRef<Path>,
    command: &ActuationCommand,
) -> std::result::Result<(), IoError> {
    let path = path.as_ref();
    let file = CommandFile {
        format_version: FORMAT_VERSION,
        displacements_m: command.displacements().to_vec(),
        actuated: Some(command.actuated().to_vec()),
    };
    let text = serde_json::to_string_pretty(&file).expect("command serializes");
    fs::write(path, text).map_err(|source| IoError::Write {
        path: path.into(),
        source,
    })
}

/// Calibration output document.
#[derive(Debug, Serialize, Deserialize)]
pub struct CalibrationFile {
    #[serde(default = "default_version")]
    pub format_version: u32,
    pub mu: f64,
    pub stretch_compliance_m: f64,
    pub mean_tip_error_m: f64,
    pub per_sample_errors_m: Vec<f64>,
}

pub fn write_calibration(
    path: impl AsRef<Path>,
    calibration: &CalibrationFile,
) -> std::result::Result<(), IoError> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(calibration).expect("calibration serializes");
    fs::write(path, text).map_err(|source| IoError::Write {
        path: path.into(),
        source,
    })
}

/// CSV rows with 1-based line numbers; `#` comment lines skipped.
fn read_csv_rows(
    path: &Path,
) -> std::result::Result<Vec<(usize, Vec<String>)>, IoError> {
    let text = fs::read_to_string(path).map_err(|source| IoError::Read {
        path: path.into(),
        source,
    })?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim_end_matches('\r');
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        rows.push((
            i + 1,
            trimmed.split(',').map(|s| s.trim().to_string()).collect(),
        ));
    }
    Ok(rows)
}

fn parse_field<T: std::str::FromStr>(
    path: &Path,
    line: usize,
    field: &str,
) -> std::result::Result<T, IoError>
where
    T::Err: std::fmt::Display,
{
    field.parse().map_err(|e: T::Err| IoError::Csv {
        path: path.into(),
        line,
        message: format!("cannot parse `{field}`: {e}"),
    })
}
