//! Descriptor views of convolutional feature maps.
//!
//! A `C×H×W` feature map can be read two ways: as `HW` pixel-level
//! descriptors of dimension `C` (one channel fiber per spatial position), or
//! as `C` part-level descriptors of dimension `HW` (one flattened spatial
//! plane per channel). Support classes pool the descriptors of their `M`
//! shots by concatenating columns in shot order.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::invalid_arg;
use crate::tensor::Matrix;
use crate::Result;

/// One image's extracted feature tensor, `C×H×W`, stored channel-major with
/// row-major spatial order: `values[c·H·W + h·W + w]`.
///
/// Values are `f32` — the storage precision of feature banks — and are
/// widened to `f64` when a view matrix is built.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    channels: usize,
    height: usize,
    width: usize,
    values: Vec<f32>,
}

impl FeatureMap {
    pub fn new(channels: usize, height: usize, width: usize, values: Vec<f32>) -> Result<Self> {
        if channels < 1 || height < 1 || width < 1 {
            return Err(invalid_arg!(
                "feature map dimensions must be >= 1, got {channels}x{height}x{width}"
            ));
        }
        if values.len() != channels * height * width {
            return Err(invalid_arg!(
                "feature map values length {} does not match {channels}x{height}x{width}",
                values.len()
            ));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(invalid_arg!("feature map contains non-finite value {v}"));
        }
        Ok(Self {
            channels,
            height,
            width,
            values,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// `(C, H, W)`.
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn spatial_len(&self) -> usize {
        self.height * self.width
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    #[inline]
    pub fn get(&self, c: usize, h: usize, w: usize) -> f32 {
        self.values[(c * self.height + h) * self.width + w]
    }
}

/// Pixel-level view: a `C×(M·HW)` matrix whose column `m·HW + p` is the
/// channel fiber at spatial position `p` (row-major) of map `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelView {
    columns: Matrix,
}

/// Part-level view: an `HW×(M·C)` matrix whose column `m·C + c` is the
/// flattened spatial plane of channel `c` of map `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartView {
    columns: Matrix,
}

impl PixelView {
    /// Descriptor dimension `C`.
    pub fn dim(&self) -> usize {
        self.columns.rows()
    }

    /// Number of descriptors, `M·HW`.
    pub fn count(&self) -> usize {
        self.columns.cols()
    }

    pub fn columns(&self) -> &Matrix {
        &self.columns
    }
}

impl PartView {
    /// Descriptor dimension `HW`.
    pub fn dim(&self) -> usize {
        self.columns.rows()
    }

    /// Number of descriptors, `M·C`.
    pub fn count(&self) -> usize {
        self.columns.cols()
    }

    pub fn columns(&self) -> &Matrix {
        &self.columns
    }
}

fn check_shapes(maps: &[FeatureMap]) -> Result<(usize, usize, usize)> {
    let first = maps
        .first()
        .ok_or_else(|| invalid_arg!("descriptor view needs at least one feature map"))?;
    let shape = first.shape();
    for (i, m) in maps.iter().enumerate() {
        if m.shape() != shape {
            return Err(invalid_arg!(
                "feature map {i} has shape {:?}, expected {:?}",
                m.shape(),
                shape
            ));
        }
    }
    Ok(shape)
}

/// Builds the pixel-level view of one or more feature maps (shots of a
/// support class are concatenated in the order given).
pub fn pixel_view(maps: &[FeatureMap]) -> Result<PixelView> {
    let (c, h, w) = check_shapes(maps)?;
    let hw = h * w;
    let cols = maps.len() * hw;
    let mut values = vec![0.0f64; c * cols];
    for (m, map) in maps.iter().enumerate() {
        for ch in 0..c {
            let plane = &map.values[ch * hw..(ch + 1) * hw];
            let row = &mut values[ch * cols..(ch + 1) * cols];
            for (p, &v) in plane.iter().enumerate() {
                row[m * hw + p] = v as f64;
            }
        }
    }
    Ok(PixelView {
        columns: Matrix::from_values(c, cols, values)?,
    })
}

/// Builds the part-level view of one or more feature maps. For a single map
/// this is exactly the transpose of its pixel-level view.
pub fn part_view(maps: &[FeatureMap]) -> Result<PartView> {
    let (c, h, w) = check_shapes(maps)?;
    let hw = h * w;
    let cols = maps.len() * c;
    let mut values = vec![0.0f64; hw * cols];
    for (m, map) in maps.iter().enumerate() {
        for ch in 0..c {
            let plane = &map.values[ch * hw..(ch + 1) * hw];
            for (p, &v) in plane.iter().enumerate() {
                values[p * cols + m * c + ch] = v as f64;
            }
        }
    }
    Ok(PartView {
        columns: Matrix::from_values(hw, cols, values)?,
    })
}
