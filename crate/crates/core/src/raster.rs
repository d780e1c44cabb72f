//! Two-dimensional scalar images.
//!
//! Storage is row-major with `height` rows of `width` samples. Spatial rasters
//! carry their pixel pitch in meters; frequency-plane rasters carry their
//! sample step in 1/m and store DC at `(height/2, width/2)`.

use ndarray::Array2;

use crate::error::{LppError, Result};
use crate::scalar::Real;

/// The plane a raster lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Plane {
    Image,
    Diffraction,
    Frequency,
    PhasePlate,
    Generic,
}

/// What the raster values mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ValueKind {
    Intensity,
    Phase,
    Ctf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage<T> {
    data: Array2<T>,
    pixel_size: T,
    plane: Plane,
    kind: ValueKind,
}

impl<T: Real> RasterImage<T> {
    pub fn new(data: Array2<T>, pixel_size: T, plane: Plane, kind: ValueKind) -> Result<Self> {
        if !(pixel_size > T::zero()) || !pixel_size.is_finite() {
            return Err(LppError::validation(format!("pixel size must be positive and finite, got {pixel_size}")));
        }
        if data.is_empty() {
            return Err(LppError::validation("raster must not be empty"));
        }
        Ok(Self { data, pixel_size, plane, kind })
    }

    /// Raster of `height` rows by `width` columns filled with `value`.
    pub fn filled(width: usize, height: usize, value: T, pixel_size: T, plane: Plane, kind: ValueKind) -> Result<Self> {
        Self::new(Array2::from_elem((height, width), value), pixel_size, plane, kind)
    }

    pub fn width(&self) -> usize {
        self.data.ncols()
    }

    pub fn height(&self) -> usize {
        self.data.nrows()
    }

    pub fn pixel_size(&self) -> T {
        self.pixel_size
    }

    pub fn plane(&self) -> Plane {
        self.plane
    }

    pub fn kind(&self) -> ValueKind {
        self.kind
    }

    pub fn data(&self) -> &Array2<T> {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut Array2<T> {
        &mut self.data
    }

    pub fn into_data(self) -> Array2<T> {
        self.data
    }

    pub fn with_kind(mut self, kind: ValueKind) -> Self {
        self.kind = kind;
        self
    }

    /// Applies `f` to every sample.
    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self { data: self.data.mapv(f), ..self.clone() }
    }

    pub fn min_max(&self) -> (T, T) {
        self.data.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    pub fn mean(&self) -> T {
        let sum: f64 = self.data.iter().map(|v| v.as_f64()).sum();
        T::lit(sum / self.data.len() as f64)
    }

    /// Converts the samples to another scalar type.
    pub fn cast<U: Real>(&self) -> RasterImage<U> {
        RasterImage {
            data: self.data.mapv(|v| U::lit(v.as_f64())),
            pixel_size: U::lit(self.pixel_size.as_f64()),
            plane: self.plane,
            kind: self.kind,
        }
    }
}
