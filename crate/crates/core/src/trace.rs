//! CSV trace files and figure data extraction.

use std::io::{self, BufRead, Write};

use thiserror::Error;

use crate::controller::SlidingSurface;
use crate::estimation::ErrorState;
use crate::geometry::{Point2D, Pose2D};
use crate::metrics::ratio_series;
use crate::plant::{ControlCommand, WheelSpeeds};
use crate::sim::TraceRow;

/// Column names, in [`TraceRow`] field order.
pub const HEADER: [&str; 18] = [
    "t",
    "true_x",
    "true_y",
    "true_theta",
    "o_cam_x",
    "o_cam_y",
    "e1",
    "e2",
    "e3",
    "s1",
    "s2",
    "s3",
    "v",
    "w",
    "w_rw",
    "w_lw",
    "V",
    "e_cam",
];

#[derive(Debug, Error)]
pub enum TraceError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {msg}")]
    Format { line: usize, msg: String },
}

/// Formats a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn row_values(r: &TraceRow) -> [f64; 18] {
    [
        r.t,
        r.true_pose.x,
        r.true_pose.y,
        r.true_pose.theta,
        r.o_cam.x,
        r.o_cam.y,
        r.e.e1,
        r.e.e2,
        r.e.e3,
        r.s.s1,
        r.s.s2,
        r.s.s3,
        r.cmd.v,
        r.cmd.w,
        r.wheels.w_rw,
        r.wheels.w_lw,
        r.v_lyap,
        r.e_cam,
    ]
}

fn write_line<W: Write>(out: &mut W, values: impl IntoIterator<Item = f64>) -> io::Result<()> {
    let line = values
        .into_iter()
        .map(fmt_f64)
        .collect::<Vec<_>>()
        .join(",");
    writeln!(out, "{line}")
}

pub fn write_csv<'a, W: Write>(
    out: &mut W,
    rows: impl IntoIterator<Item = &'a TraceRow>,
) -> io::Result<()> {
    writeln!(out, "{}", HEADER.join(","))?;
    for r in rows {
        write_line(out, row_values(r))?;
    }
    Ok(())
}

pub fn read_csv<R: BufRead>(input: R) -> Result<Vec<TraceRow>, TraceError> {
    let mut lines = input.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header.trim() != HEADER.join(",") {
        return Err(TraceError::Format {
            line: 1,
            msg: "unexpected header".to_owned(),
        });
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let v: Vec<f64> = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| TraceError::Format {
                line: i + 2,
                msg: e.to_string(),
            })?;
        if v.len() != HEADER.len() {
            return Err(TraceError::Format {
                line: i + 2,
                msg: format!("expected {} fields, found {}", HEADER.len(), v.len()),
            });
        }
        rows.push(TraceRow {
            t: v[0],
            true_pose: Pose2D::new(v[1], v[2], v[3]),
            o_cam: Point2D::new(v[4], v[5]),
            e: ErrorState::new(v[6], v[7], v[8]),
            s: SlidingSurface {
                s1: v[9],
                s2: v[10],
                s3: v[11],
            },
            cmd: ControlCommand::new(v[12], v[13]),
            wheels: WheelSpeeds {
                w_rw: v[14],
                w_lw: v[15],
            },
            v_lyap: v[16],
            e_cam: v[17],
        });
    }
    Ok(rows)
}

/// Figure series that can be extracted from a trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    /// Robot-centre and tracking-point paths.
    Trajectories,
    /// Tracking errors.
    Errors,
    /// Wheel speeds.
    Wheels,
    /// Linear over angular velocity.
    VelocityRatio,
}

impl Figure {
    pub fn from_number(n: u32) -> Option<Self> {
        match n {
            5 => Some(Self::Trajectories),
            6 => Some(Self::Errors),
            7 => Some(Self::Wheels),
            12 => Some(Self::VelocityRatio),
            _ => None,
        }
    }

    pub fn columns(self) -> &'static [&'static str] {
        match self {
            Self::Trajectories => &["t", "robot_x", "robot_y", "o_cam_x", "o_cam_y"],
            Self::Errors => &["t", "e1", "e2", "e3"],
            Self::Wheels => &["t", "w_rw", "w_lw"],
            Self::VelocityRatio => &["t", "v_over_w"],
        }
    }
}

/// Writes the columns of `fig` as CSV; undefined ratios are written as NaN.
pub fn write_plotdata<W: Write>(out: &mut W, rows: &[TraceRow], fig: Figure) -> io::Result<()> {
    writeln!(out, "{}", fig.columns().join(","))?;
    match fig {
        Figure::Trajectories => {
            for r in rows {
                write_line(
                    out,
                    [r.t, r.true_pose.x, r.true_pose.y, r.o_cam.x, r.o_cam.y],
                )?;
            }
        }
        Figure::Errors => {
            for r in rows {
                write_line(out, [r.t, r.e.e1, r.e.e2, r.e.e3])?;
            }
        }
        Figure::Wheels => {
            for r in rows {
                write_line(out, [r.t, r.wheels.w_rw, r.wheels.w_lw])?;
            }
        }
        Figure::VelocityRatio => {
            for (t, ratio) in ratio_series(rows) {
                write_line(out, [t, ratio.unwrap_or(f64::NAN)])?;
            }
        }
    }
    Ok(())
}
