//! Rectangular grid discretization over a bounding box.

use super::BoundingBox;
use crate::error::SpatialError;

/// A rows x cols grid laid over a bounding box. Row 0 starts at `min_lat`,
/// column 0 at `min_lon`; points on the top or right boundary fall into the
/// last row/column rather than out of the grid.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub bbox: BoundingBox,
    pub rows: usize,
    pub cols: usize,
}

impl GridSpec {
    pub fn with_cells(bbox: BoundingBox, rows: usize, cols: usize) -> Result<GridSpec, SpatialError> {
        bbox.validate()?;
        if rows == 0 || cols == 0 {
            return Err(SpatialError::EmptyGrid);
        }
        Ok(GridSpec { bbox, rows, cols })
    }

    /// Sizes the grid from target cell edge lengths in degrees, rounding the
    /// counts up so the grid always covers the box.
    pub fn with_cell_size(
        bbox: BoundingBox,
        cell_height_deg: f64,
        cell_width_deg: f64,
    ) -> Result<GridSpec, SpatialError> {
        bbox.validate()?;
        if !(cell_height_deg > 0.0) || !(cell_width_deg > 0.0) {
            return Err(SpatialError::EmptyGrid);
        }
        let rows = count_cells(bbox.max_lat - bbox.min_lat, cell_height_deg);
        let cols = count_cells(bbox.max_lon - bbox.min_lon, cell_width_deg);
        GridSpec::with_cells(bbox, rows.max(1), cols.max(1))
    }

    pub fn cell_height(&self) -> f64 {
        (self.bbox.max_lat - self.bbox.min_lat) / self.rows as f64
    }

    pub fn cell_width(&self) -> f64 {
        (self.bbox.max_lon - self.bbox.min_lon) / self.cols as f64
    }

    /// Maps a coordinate to its `(row, col)` cell. Points outside the box are
    /// an error naming the offending axis.
    pub fn encode(&self, lat: f64, lon: f64) -> Result<(usize, usize), SpatialError> {
        if !(lat >= self.bbox.min_lat && lat <= self.bbox.max_lat) {
            return Err(SpatialError::OutOfBounds {
                axis: "latitude",
                value: lat,
                lo: self.bbox.min_lat,
                hi: self.bbox.max_lat,
            });
        }
        if !(lon >= self.bbox.min_lon && lon <= self.bbox.max_lon) {
            return Err(SpatialError::OutOfBounds {
                axis: "longitude",
                value: lon,
                lo: self.bbox.min_lon,
                hi: self.bbox.max_lon,
            });
        }
        let row = ((lat - self.bbox.min_lat) / self.cell_height()) as usize;
        let col = ((lon - self.bbox.min_lon) / self.cell_width()) as usize;
        Ok((row.min(self.rows - 1), col.min(self.cols - 1)))
    }

    /// Center coordinate of a cell.
    pub fn decode(&self, row: usize, col: usize) -> Result<(f64, f64), SpatialError> {
        if row >= self.rows {
            return Err(SpatialError::OutOfBounds {
                axis: "row",
                value: row as f64,
                lo: 0.0,
                hi: (self.rows - 1) as f64,
            });
        }
        if col >= self.cols {
            return Err(SpatialError::OutOfBounds {
                axis: "col",
                value: col as f64,
                lo: 0.0,
                hi: (self.cols - 1) as f64,
            });
        }
        let lat = self.bbox.min_lat + (row as f64 + 0.5) * self.cell_height();
        let lon = self.bbox.min_lon + (col as f64 + 0.5) * self.cell_width();
        Ok((lat, lon))
    }

    /// Stable string id for a cell; zero-padded so lexicographic order equals
    /// row-major numeric order.
    pub fn cell_id(&self, row: usize, col: usize) -> String {
        format!("r{row:05}c{col:05}")
    }
}

/// Cells needed to cover `span` at the given edge length: ratios within float
/// noise of an integer snap to it (0.15 / 0.01 must give 15, not 16), anything
/// else rounds up so the grid still covers the box.
fn count_cells(span: f64, cell: f64) -> usize {
    let ratio = span / cell;
    let nearest = ratio.round();
    if nearest >= 1.0 && (ratio - nearest).abs() <= 1e-9 * ratio.max(1.0) {
        nearest as usize
    } else {
        ratio.ceil() as usize
    }
}
