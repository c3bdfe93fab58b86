use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use super::MatchError;

/// Row/column index into a feature grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }

    /// Euclidean distance in grid-cell units.
    pub fn distance(&self, other: &Cell) -> f64 {
        let dr = self.row as f64 - other.row as f64;
        let dc = self.col as f64 - other.col as f64;
        dr.hypot(dc)
    }
}

/// Dense descriptor grid. `data` is cell-major then channel: the descriptor
/// of cell `(i, j)` occupies `data[(i·w + j)·c .. (i·w + j + 1)·c]`.
///
/// Cell `(i, j)` is centred on pixel
/// `(pixel_offset + j·pixel_stride, pixel_offset + i·pixel_stride)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f32>,
    pixel_stride: f64,
    pixel_offset: f64,
    mask: Option<Vec<bool>>,
}

impl FeatureMap {
    pub fn new(
        height: usize,
        width: usize,
        channels: usize,
        data: Vec<f32>,
        pixel_stride: f64,
        pixel_offset: f64,
        mask: Option<Vec<bool>>,
    ) -> Result<Self, MatchError> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(MatchError::InvalidFeatureMap(format!(
                "dimensions must be non-zero, got {height}x{width}x{channels}"
            )));
        }
        let expected = height * width * channels;
        if data.len() != expected {
            return Err(MatchError::InvalidFeatureMap(format!(
                "data has {} values, expected {expected}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|x| !x.is_finite()) {
            return Err(MatchError::InvalidFeatureMap(format!("non-finite value at index {i}")));
        }
        if !(pixel_stride.is_finite() && pixel_stride >= 1.0) {
            return Err(MatchError::InvalidFeatureMap(format!("pixel_stride={pixel_stride} must be ≥ 1")));
        }
        if !(pixel_offset.is_finite() && pixel_offset >= 0.0) {
            return Err(MatchError::InvalidFeatureMap(format!("pixel_offset={pixel_offset} must be ≥ 0")));
        }
        if let Some(m) = &mask {
            if m.len() != height * width {
                return Err(MatchError::InvalidFeatureMap(format!(
                    "mask has {} cells, expected {}",
                    m.len(),
                    height * width
                )));
            }
        }
        Ok(Self { height, width, channels, data, pixel_stride, pixel_offset, mask })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn pixel_stride(&self) -> f64 {
        self.pixel_stride
    }

    pub fn pixel_offset(&self) -> f64 {
        self.pixel_offset
    }

    pub fn mask(&self) -> Option<&[bool]> {
        self.mask.as_deref()
    }

    pub fn num_cells(&self) -> usize {
        self.height * self.width
    }

    #[inline]
    pub fn index(&self, cell: Cell) -> usize {
        cell.row * self.width + cell.col
    }

    #[inline]
    pub fn cell_at(&self, index: usize) -> Cell {
        Cell::new(index / self.width, index % self.width)
    }

    pub fn contains(&self, cell: Cell) -> bool {
        cell.row < self.height && cell.col < self.width
    }

    pub fn descriptor(&self, cell: Cell) -> &[f32] {
        let i = self.index(cell) * self.channels;
        &self.data[i..i + self.channels]
    }

    pub fn is_foreground(&self, cell: Cell) -> bool {
        self.mask.as_ref().map_or(true, |m| m[self.index(cell)])
    }

    /// Row-major indices of cells that are not masked out.
    pub fn foreground_indices(&self) -> Vec<usize> {
        (0..self.num_cells()).filter(|&i| self.mask.as_ref().map_or(true, |m| m[i])).collect()
    }

    pub fn cell_to_pixel(&self, cell: Cell) -> Vector2<f64> {
        Vector2::new(
            self.pixel_offset + cell.col as f64 * self.pixel_stride,
            self.pixel_offset + cell.row as f64 * self.pixel_stride,
        )
    }

    /// Whether every cell centre lies inside a `width × height` image.
    pub fn fits_image(&self, width: u32, height: u32) -> bool {
        let last = self.cell_to_pixel(Cell::new(self.height - 1, self.width - 1));
        last.x < f64::from(width) && last.y < f64::from(height)
    }
}
