//! 4-D volume, 3-D mask and parameter-map data model.
//!
//! One addressing rule is used everywhere: the linear index of voxel
//! `(x, y, z, t)` is `x + nx*(y + ny*(z + nz*t))`, i.e. x varies fastest
//! and t slowest, so each time frame is a contiguous 3-D spatial block.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::series::{SeriesKind, TimeSeries};

/// Acquisition geometry and timing of a 4-D volume.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeHeader {
    /// (nx, ny, nz, nt)
    pub dims: [usize; 4],
    /// Sampling interval in seconds.
    pub dt_s: f64,
    /// Echo time in seconds.
    pub te_s: f64,
    /// Voxel edge lengths in millimetres.
    pub voxel_mm: [f64; 3],
}

impl VolumeHeader {
    pub fn validate(&self) -> Result<()> {
        if self.dims.iter().any(|&d| d == 0) {
            return Err(Error::Invalid(format!("all dims must be >= 1, got {:?}", self.dims)));
        }
        if !(self.dt_s > 0.0) || !self.dt_s.is_finite() {
            return Err(Error::Invalid(format!("dt_s must be positive, got {}", self.dt_s)));
        }
        if !(self.te_s > 0.0) || !self.te_s.is_finite() {
            return Err(Error::Invalid(format!("te_s must be positive, got {}", self.te_s)));
        }
        if self.voxel_mm.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::Invalid(format!(
                "voxel_mm components must be positive, got {:?}",
                self.voxel_mm
            )));
        }
        Ok(())
    }

    pub fn n_voxels(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn n_samples(&self) -> usize {
        self.n_voxels() * self.dims[3]
    }

    pub fn spatial_dims(&self) -> [usize; 3] {
        [self.dims[0], self.dims[1], self.dims[2]]
    }
}

/// Raw 4-D signal volume. Values are arbitrary scanner units, nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume4D<T: Scalar> {
    pub header: VolumeHeader,
    pub data: Vec<T>,
}

impl<T: Scalar> Volume4D<T> {
    pub fn new(header: VolumeHeader, data: Vec<T>) -> Result<Self> {
        let v = Volume4D { header, data };
        v.validate()?;
        Ok(v)
    }

    pub fn validate(&self) -> Result<()> {
        self.header.validate()?;
        if self.data.len() != self.header.n_samples() {
            return Err(Error::Dim(format!(
                "volume data length {} does not match dims {:?} (expected {})",
                self.data.len(),
                self.header.dims,
                self.header.n_samples()
            )));
        }
        if self.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("volume contains non-finite values".into()));
        }
        if self.data.iter().any(|&v| v < T::zero()) {
            return Err(Error::Invalid("signal values must be nonnegative".into()));
        }
        Ok(())
    }

    /// The single addressing rule: x fastest, t slowest.
    #[inline]
    pub fn idx(&self, x: usize, y: usize, z: usize, t: usize) -> usize {
        let [nx, ny, nz, _] = self.header.dims;
        x + nx * (y + ny * (z + nz * t))
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize, z: usize, t: usize) -> T {
        self.data[self.idx(x, y, z, t)]
    }

    /// Extract the time series of one voxel (strided gather).
    pub fn voxel_series(&self, x: usize, y: usize, z: usize) -> TimeSeries<T> {
        let nt = self.header.dims[3];
        let stride = self.header.n_voxels();
        let base = self.idx(x, y, z, 0);
        let values = (0..nt).map(|t| self.data[base + t * stride]).collect();
        TimeSeries {
            values,
            dt_s: T::c(self.header.dt_s),
            kind: SeriesKind::Signal,
        }
    }
}

/// Binary 3-D mask on the spatial grid of a volume.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask3D {
    pub dims: [usize; 3],
    pub data: Vec<u8>,
}

impl Mask3D {
    pub fn new(dims: [usize; 3], data: Vec<u8>) -> Result<Self> {
        let m = Mask3D { dims, data };
        m.validate()?;
        Ok(m)
    }

    pub fn zeros(dims: [usize; 3]) -> Self {
        Mask3D {
            dims,
            data: vec![0u8; dims[0] * dims[1] * dims[2]],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.iter().any(|&d| d == 0) {
            return Err(Error::Invalid(format!("mask dims must be >= 1, got {:?}", self.dims)));
        }
        let n = self.dims[0] * self.dims[1] * self.dims[2];
        if self.data.len() != n {
            return Err(Error::Dim(format!(
                "mask data length {} does not match dims {:?}",
                self.data.len(),
                self.dims
            )));
        }
        if self.data.iter().any(|&v| v > 1) {
            return Err(Error::Invalid("mask values must be 0 or 1".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn idx(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> bool {
        self.data[self.idx(x, y, z)] != 0
    }

    pub fn set(&mut self, x: usize, y: usize, z: usize, v: bool) {
        let i = self.idx(x, y, z);
        self.data[i] = v as u8;
    }

    /// Number of set voxels.
    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    pub fn is_subset_of(&self, other: &Mask3D) -> bool {
        self.dims == other.dims
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(&a, &b)| a == 0 || b != 0)
    }

    /// Coordinates of set voxels in scan order (x fastest).
    pub fn set_voxels(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::with_capacity(self.count());
        for z in 0..self.dims[2] {
            for y in 0..self.dims[1] {
                for x in 0..self.dims[0] {
                    if self.get(x, y, z) {
                        out.push((x, y, z));
                    }
                }
            }
        }
        out
    }
}

/// Per-voxel CBV [ml/100g], CBF [ml/100g/min], MTT [s] and Tmax [s] maps
/// sharing one spatial grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterMaps<T: Scalar> {
    pub dims: [usize; 3],
    pub voxel_mm: [f64; 3],
    pub cbv: Vec<T>,
    pub cbf: Vec<T>,
    pub mtt: Vec<T>,
    pub tmax: Vec<T>,
}

impl<T: Scalar> ParameterMaps<T> {
    pub fn zeros(dims: [usize; 3], voxel_mm: [f64; 3]) -> Self {
        let n = dims[0] * dims[1] * dims[2];
        ParameterMaps {
            dims,
            voxel_mm,
            cbv: vec![T::zero(); n],
            cbf: vec![T::zero(); n],
            mtt: vec![T::zero(); n],
            tmax: vec![T::zero(); n],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.iter().any(|&d| d == 0) {
            return Err(Error::Invalid(format!("map dims must be >= 1, got {:?}", self.dims)));
        }
        let n = self.n_voxels();
        for (name, m) in self.named() {
            if m.len() != n {
                return Err(Error::Dim(format!(
                    "{name} map length {} does not match dims {:?}",
                    m.len(),
                    self.dims
                )));
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::Invalid(format!("{name} map contains non-finite values")));
            }
        }
        Ok(())
    }

    pub fn n_voxels(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    #[inline]
    pub fn idx(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    /// The four maps in canonical order.
    pub fn named(&self) -> [(&'static str, &[T]); 4] {
        [
            ("cbv", self.cbv.as_slice()),
            ("cbf", self.cbf.as_slice()),
            ("mtt", self.mtt.as_slice()),
            ("tmax", self.tmax.as_slice()),
        ]
    }
}
