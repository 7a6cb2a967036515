//! Text file formats.
//!
//! Floats are written with the shortest representation that parses back to
//! the same bits, so every writer round-trips exactly and identical inputs
//! give identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::active::{SamplingTrace, TraceEntry};
use crate::error::{Error, Result};
use crate::eval::{CurvePoint, ErrorReport};
use crate::field::FieldGrid;
use crate::geometry::{Position, SceneBounds};
use crate::observation::{Observation, ObservationSet};

/// Lossless, deterministic float text.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        // collapse -0 so equal grids print equal text
        return "0".into();
    }
    format!("{x}")
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn field(path: &Path, line: usize, s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::parse(path, line, format!("{what}: cannot parse '{}'", s.trim())))
}

pub fn observations_to_csv(obs: &ObservationSet, with_slot: bool) -> String {
    let mut out = String::from(if with_slot {
        "x,y,value,slot\n"
    } else {
        "x,y,value\n"
    });
    for o in obs {
        let _ = write!(
            out,
            "{},{},{}",
            fmt_f64(o.position.x),
            fmt_f64(o.position.y),
            fmt_f64(o.value)
        );
        if with_slot {
            let _ = write!(out, ",{}", o.slot);
        }
        out.push('\n');
    }
    out
}

pub fn parse_observations_csv(text: &str, path: &Path) -> Result<ObservationSet> {
    let mut lines = text.lines().enumerate();
    let with_slot = match lines.next().map(|(_, h)| h.trim()) {
        Some("x,y,value") => false,
        Some("x,y,value,slot") => true,
        _ => {
            return Err(Error::parse(
                path,
                1,
                "header must be 'x,y,value' or 'x,y,value,slot'",
            ))
        }
    };
    let width = if with_slot { 4 } else { 3 };
    let mut items = Vec::new();
    for (i, line) in lines {
        let n = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != width {
            return Err(Error::parse(
                path,
                n,
                format!("expected {width} fields, found {}", cols.len()),
            ));
        }
        let p = Position::new(field(path, n, cols[0], "x")?, field(path, n, cols[1], "y")?);
        let v = field(path, n, cols[2], "value")?;
        let slot = if with_slot {
            cols[3].trim().parse().map_err(|_| {
                Error::parse(path, n, format!("slot: cannot parse '{}'", cols[3].trim()))
            })?
        } else {
            0
        };
        let o = Observation::new(p, v).at_slot(slot);
        if !(p.is_finite() && v.is_finite()) {
            return Err(Error::parse(path, n, "non-finite value"));
        }
        items.push(o);
    }
    ObservationSet::new(items).map_err(|e| Error::parse(path, 0, e.to_string()))
}

pub fn load_observations_csv(path: impl AsRef<Path>) -> Result<ObservationSet> {
    let path = path.as_ref();
    parse_observations_csv(&read_text(path)?, path)
}

/// Writes the slot column only when some observation has a nonzero slot.
pub fn save_observations_csv(obs: &ObservationSet, path: impl AsRef<Path>) -> Result<()> {
    let with_slot = obs.iter().any(|o| o.slot != 0);
    write_text(path.as_ref(), &observations_to_csv(obs, with_slot))
}

pub fn grid_to_csv(grid: &FieldGrid) -> String {
    let b = grid.bounds();
    let (rows, cols) = grid.shape();
    let mut out = format!(
        "# bounds {} {} {} {}\n# resolution {}\n",
        fmt_f64(b.x_min),
        fmt_f64(b.x_max),
        fmt_f64(b.y_min),
        fmt_f64(b.y_max),
        fmt_f64(grid.resolution())
    );
    for row in 0..rows {
        let line: Vec<String> = (0..cols).map(|c| fmt_f64(grid.get(c, row))).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn parse_grid_csv(text: &str, path: &Path) -> Result<FieldGrid> {
    let mut lines = text.lines();
    let bounds_line = lines.next().unwrap_or("");
    let nums: Vec<&str> = match bounds_line.strip_prefix("# bounds ") {
        Some(rest) => rest.split_whitespace().collect(),
        None => {
            return Err(Error::parse(
                path,
                1,
                "header mismatch: expected '# bounds x_min x_max y_min y_max'",
            ))
        }
    };
    if nums.len() != 4 {
        return Err(Error::parse(
            path,
            1,
            "header mismatch: bounds needs four numbers",
        ));
    }
    let v: Vec<f64> = nums
        .iter()
        .map(|s| field(path, 1, s, "bounds"))
        .collect::<Result<_>>()?;
    let bounds = SceneBounds::new(v[0], v[1], v[2], v[3])
        .map_err(|e| Error::parse(path, 1, e.to_string()))?;
    let res = match lines.next().and_then(|l| l.strip_prefix("# resolution ")) {
        Some(r) => field(path, 2, r, "resolution")?,
        None => {
            return Err(Error::parse(
                path,
                2,
                "header mismatch: expected '# resolution r'",
            ))
        }
    };
    let empty =
        FieldGrid::constant(bounds, res, 0.0).map_err(|e| Error::parse(path, 2, e.to_string()))?;
    let (rows, cols) = empty.shape();
    let mut values = Vec::with_capacity(rows * cols);
    let mut row = 0;
    for (i, line) in lines.enumerate() {
        let n = i + 3;
        if line.trim().is_empty() {
            continue;
        }
        if row == rows {
            return Err(Error::parse(
                path,
                n,
                format!("header mismatch: more than {rows} data rows"),
            ));
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols {
            return Err(Error::parse(
                path,
                n,
                format!(
                    "header mismatch: expected {cols} fields, found {}",
                    fields.len()
                ),
            ));
        }
        for s in fields {
            values.push(field(path, n, s, "value")?);
        }
        row += 1;
    }
    if row != rows {
        return Err(Error::parse(
            path,
            row + 3,
            format!("header mismatch: expected {rows} data rows, found {row}"),
        ));
    }
    FieldGrid::new(bounds, res, values)
}

pub fn write_grid_csv(grid: &FieldGrid, path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &grid_to_csv(grid))
}

pub fn read_grid_csv(path: impl AsRef<Path>) -> Result<FieldGrid> {
    let path = path.as_ref();
    parse_grid_csv(&read_text(path)?, path)
}

/// ASCII graymap, top row at `y_max`, minimum black, maximum white.
pub fn grid_to_pgm(grid: &FieldGrid) -> String {
    let (rows, cols) = grid.shape();
    let (lo, hi) = (grid.min(), grid.max());
    let mut out = format!("P2\n{cols} {rows}\n255\n");
    for row in (0..rows).rev() {
        let line: Vec<String> = (0..cols)
            .map(|c| {
                let v = grid.get(c, row);
                let px = if hi > lo {
                    (255.0 * (v - lo) / (hi - lo)).round().clamp(0.0, 255.0) as u8
                } else {
                    128
                };
                px.to_string()
            })
            .collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

pub fn write_pgm(grid: &FieldGrid, path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &grid_to_pgm(grid))
}

pub fn trace_to_csv(trace: &SamplingTrace) -> String {
    let mut out = String::from("round,x,y,value,variance\n");
    for TraceEntry {
        round,
        position,
        value,
        variance,
    } in &trace.entries
    {
        let _ = writeln!(
            out,
            "{round},{},{},{},{}",
            fmt_f64(position.x),
            fmt_f64(position.y),
            fmt_f64(*value),
            fmt_f64(*variance)
        );
    }
    out
}

pub fn write_trace_csv(trace: &SamplingTrace, path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &trace_to_csv(trace))
}

pub fn curve_to_csv(curve: &[CurvePoint]) -> String {
    let mut out = String::from("n_obs,mae,median_ae\n");
    for c in curve {
        let _ = writeln!(
            out,
            "{},{},{}",
            c.n_obs,
            fmt_f64(c.mae),
            fmt_f64(c.median_ae)
        );
    }
    out
}

pub fn write_curve_csv(curve: &[CurvePoint], path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &curve_to_csv(curve))
}

pub fn report_to_csv(r: &ErrorReport) -> String {
    format!(
        "mae,median_ae,n_evaluated\n{},{},{}\n",
        fmt_f64(r.mae),
        fmt_f64(r.median_ae),
        r.n_evaluated
    )
}

pub fn write_report_csv(r: &ErrorReport, path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &report_to_csv(r))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> &'static Path {
        Path::new("mem.csv")
    }

    #[test]
    fn floats_round_trip() {
        for x in [
            0.1,
            -40.2,
            1.0 / 3.0,
            6.02e23,
            5e-324,
            f64::MAX,
            -0.0,
            123456789.0,
        ] {
            assert_eq!(
                fmt_f64(x).parse::<f64>().unwrap(),
                if x == 0.0 { 0.0 } else { x }
            );
        }
        assert_eq!(fmt_f64(0.0), "0");
        assert_eq!(fmt_f64(-0.0), "0");
    }

    #[test]
    fn observation_row_and_errors() {
        let o = parse_observations_csv("x,y,value\n1.5,2.0,-40.2\n", p()).unwrap();
        assert_eq!(
            o.as_slice()[0],
            Observation::new(Position::new(1.5, 2.0), -40.2)
        );
        let e = parse_observations_csv("x,y,value\n1,1,1\n1.5,2.0,abc\n", p()).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }), "{e}");
        assert!(parse_observations_csv("x,y\n", p()).is_err());
        assert!(parse_observations_csv("x,y,value\n1,2\n", p()).is_err());
    }

    #[test]
    fn four_column_round_trip() {
        let text = "x,y,value,slot\n0.1,0.2,-50.25,3\n1,2,0.30000000000000004,3\n";
        let o = parse_observations_csv(text, p()).unwrap();
        assert_eq!(observations_to_csv(&o, true), text);
    }

    #[test]
    fn grid_round_trip_and_layout() {
        let b = SceneBounds::sized(1.0, 1.0).unwrap();
        let g = FieldGrid::new(b, 1.0, vec![1.0 / 3.0, -2.5, 1e-300, 7.0]).unwrap();
        let text = grid_to_csv(&g);
        let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(data.len(), 2);
        assert!(data.iter().all(|l| l.split(',').count() == 2));
        assert_eq!(data[0], format!("{},-2.5", 1.0 / 3.0));
        assert_eq!(parse_grid_csv(&text, p()).unwrap(), g);
    }

    #[test]
    fn truncated_grid_is_a_header_mismatch() {
        let g = FieldGrid::constant(SceneBounds::sized(1.0, 1.0).unwrap(), 0.5, 2.0).unwrap();
        let text = grid_to_csv(&g);
        let cut: String = text.lines().take(3).map(|l| format!("{l}\n")).collect();
        let e = parse_grid_csv(&cut, p()).unwrap_err();
        assert!(e.to_string().contains("header mismatch"), "{e}");
        assert!(parse_grid_csv("", p())
            .unwrap_err()
            .to_string()
            .contains("header mismatch"));
    }

    #[test]
    fn pgm_mapping() {
        let b = SceneBounds::sized(1.0, 1.0).unwrap();
        let flat = grid_to_pgm(&FieldGrid::constant(b, 1.0, -3.0).unwrap());
        assert!(flat.starts_with("P2\n2 2\n255\n"));
        assert!(flat.lines().skip(3).all(|l| l == "128 128"));
        let g = FieldGrid::new(b, 1.0, vec![0.0, 10.0, 10.0, 10.0]).unwrap();
        let text = grid_to_pgm(&g);
        // bottom row (y_min) is printed last
        assert_eq!(text.lines().nth(3).unwrap(), "255 255");
        assert_eq!(text.lines().nth(4).unwrap(), "0 255");
    }

    #[test]
    fn report_line_for_a_perfect_prediction() {
        let r = ErrorReport {
            mae: 0.0,
            median_ae: 0.0,
            n_evaluated: 12,
        };
        assert_eq!(report_to_csv(&r).lines().nth(1).unwrap(), "0,0,12");
    }
}
