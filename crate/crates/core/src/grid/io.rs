//! Portable text form of a grid.
//!
//! ```text
//! width height resolution origin_x origin_y
//! p(0,0) p(1,0) ... p(width-1,0)
//! ...
//! ```
//! Probabilities use six decimals; `-1` marks a never-measured cell.

use std::fmt::Write as _;

use super::{logit, probability_from_logodds, ClassifierConfig, GridError, GridSpec, OccupancyGrid};
use crate::geometry::WorldPoint;

impl OccupancyGrid {
    pub fn to_text(&self) -> String {
        let s = self.spec();
        let mut out = format!(
            "{} {} {} {} {}\n",
            s.width, s.height, s.resolution, s.origin.x, s.origin.y
        );
        for row in self.raw_logodds().chunks(s.width) {
            let mut first = true;
            for &l in row {
                if !first {
                    out.push(' ');
                }
                first = false;
                if l.is_nan() {
                    out.push_str("-1");
                } else {
                    let _ = write!(out, "{:.6}", probability_from_logodds(l));
                }
            }
            out.push('\n');
        }
        out
    }

    /// Parses [`OccupancyGrid::to_text`] output. Probabilities are restored
    /// to six decimals.
    pub fn from_text(text: &str, config: ClassifierConfig) -> Result<OccupancyGrid, GridError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| GridError::Parse("empty input".into()))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 5 {
            return Err(GridError::Parse(format!("bad header {header:?}")));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| GridError::Parse(format!("{s:?}: {e}")));
        let width: usize = h[0].parse().map_err(|e| GridError::Parse(format!("width: {e}")))?;
        let height: usize = h[1].parse().map_err(|e| GridError::Parse(format!("height: {e}")))?;
        let spec = GridSpec::new(width, height, num(h[2])?, WorldPoint::new(num(h[3])?, num(h[4])?))?;
        let mut grid = OccupancyGrid::new(spec, config)?;
        let cells = grid.raw_logodds_mut();
        let mut rows = 0;
        for (y, line) in lines.enumerate() {
            if y >= height {
                return Err(GridError::Parse("too many rows".into()));
            }
            let values: Vec<&str> = line.split_whitespace().collect();
            if values.len() != width {
                return Err(GridError::Parse(format!(
                    "row {y} has {} values, expected {width}",
                    values.len()
                )));
            }
            for (x, v) in values.into_iter().enumerate() {
                let p = num(v)?;
                cells[y * width + x] = if p < 0.0 {
                    f64::NAN
                } else if p < 1.0 {
                    logit(p)
                } else {
                    return Err(GridError::Parse(format!("probability {p} at ({x},{y})")));
                };
            }
            rows += 1;
        }
        if rows != height {
            return Err(GridError::Parse(format!("{rows} rows, expected {height}")));
        }
        Ok(grid)
    }
}
