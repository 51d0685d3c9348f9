//! Periodic collocated Cartesian grid, vector/scalar fields sampled on it,
//! centered finite-difference operators and deterministic reductions.
//!
//! Storage is x-fastest: `index = i + nx * (j + ny * k)`. Node `(i, j, k)`
//! sits at `(i dx, j dy, k dz)`.
//!
//! All derivative operators are antisymmetric centered stencils applied along
//! one axis at a time. Because the one-dimensional difference operators along
//! different axes commute on a periodic grid, `div(curl v) == 0` and
//! `curl(grad f) == 0` hold up to floating-point rounding for every stencil
//! order.

use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::vec3::Vec3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub lx: f64,
    pub ly: f64,
    pub lz: f64,
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, nz: usize, lx: f64, ly: f64, lz: f64) -> Result<Self> {
        if nx < 4 || ny < 4 || nz < 4 {
            return Err(Error::InvalidGrid(format!(
                "cell counts must be >= 4, got {nx}x{ny}x{nz}"
            )));
        }
        for (name, l) in [("lx", lx), ("ly", ly), ("lz", lz)] {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::InvalidGrid(format!("{name} must be positive, got {l}")));
            }
        }
        nx.checked_mul(ny)
            .and_then(|n| n.checked_mul(nz))
            .and_then(|n| n.checked_mul(3 * std::mem::size_of::<f64>()))
            .filter(|&bytes| bytes <= isize::MAX as usize)
            .ok_or_else(|| Error::InvalidGrid("cell count exceeds addressable memory".into()))?;
        Ok(Self { nx, ny, nz, lx, ly, lz })
    }

    /// Cubic grid with `n` cells and length `l` along each axis.
    pub fn cube(n: usize, l: f64) -> Result<Self> {
        Self::new(n, n, n, l, l, l)
    }

    pub fn dx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    pub fn dz(&self) -> f64 {
        self.lz / self.nz as f64
    }

    pub fn min_spacing(&self) -> f64 {
        self.dx().min(self.dy()).min(self.dz())
    }

    pub fn cell_volume(&self) -> f64 {
        self.dx() * self.dy() * self.dz()
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.nx * (j + self.ny * k)
    }

    #[inline]
    pub fn unravel(&self, idx: usize) -> (usize, usize, usize) {
        let i = idx % self.nx;
        let j = (idx / self.nx) % self.ny;
        let k = idx / (self.nx * self.ny);
        (i, j, k)
    }

    #[inline]
    pub fn position(&self, idx: usize) -> Vec3 {
        let (i, j, k) = self.unravel(idx);
        Vec3::new(i as f64 * self.dx(), j as f64 * self.dy(), k as f64 * self.dz())
    }

    pub fn center(&self) -> Vec3 {
        Vec3::new(0.5 * self.lx, 0.5 * self.ly, 0.5 * self.lz)
    }

    pub fn lengths(&self) -> Vec3 {
        Vec3::new(self.lx, self.ly, self.lz)
    }

    fn slab(&self) -> usize {
        self.nx * self.ny
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self { grid, values: vec![0.0; grid.len()] }
    }

    pub fn from_fn<F>(grid: GridSpec, f: F) -> Self
    where
        F: Fn(Vec3) -> f64 + Sync,
    {
        let values = (0..grid.len()).into_par_iter().map(|idx| f(grid.position(idx))).collect();
        Self { grid, values }
    }

    pub fn from_values(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        Ok(Self { grid, values })
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.values)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|v| v * s).collect() }
    }

    /// Pointwise `self - other`.
    pub fn sub(&self, other: &ScalarField) -> Result<Self> {
        same_grid(&self.grid, &other.grid)?;
        Ok(Self {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn add(&self, other: &ScalarField) -> Result<Self> {
        same_grid(&self.grid, &other.grid)?;
        Ok(Self {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vec3Field {
    pub grid: GridSpec,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
}

impl Vec3Field {
    pub fn zeros(grid: GridSpec) -> Self {
        let n = grid.len();
        Self { grid, x: vec![0.0; n], y: vec![0.0; n], z: vec![0.0; n] }
    }

    pub fn from_fn<F>(grid: GridSpec, f: F) -> Self
    where
        F: Fn(Vec3) -> Vec3 + Sync,
    {
        let samples: Vec<Vec3> =
            (0..grid.len()).into_par_iter().map(|idx| f(grid.position(idx))).collect();
        Self::from_vecs(grid, &samples)
    }

    pub fn from_vecs(grid: GridSpec, samples: &[Vec3]) -> Self {
        Self {
            grid,
            x: samples.iter().map(|v| v.0[0]).collect(),
            y: samples.iter().map(|v| v.0[1]).collect(),
            z: samples.iter().map(|v| v.0[2]).collect(),
        }
    }

    pub fn from_components(grid: GridSpec, x: Vec<f64>, y: Vec<f64>, z: Vec<f64>) -> Result<Self> {
        let n = grid.len();
        if x.len() != n || y.len() != n || z.len() != n {
            return Err(Error::GridMismatch);
        }
        Ok(Self { grid, x, y, z })
    }

    #[inline]
    pub fn get(&self, idx: usize) -> Vec3 {
        Vec3([self.x[idx], self.y[idx], self.z[idx]])
    }

    #[inline]
    pub fn set(&mut self, idx: usize, v: Vec3) {
        self.x[idx] = v.0[0];
        self.y[idx] = v.0[1];
        self.z[idx] = v.0[2];
    }

    pub fn components(&self) -> [&[f64]; 3] {
        [&self.x, &self.y, &self.z]
    }

    pub fn components_mut(&mut self) -> [&mut Vec<f64>; 3] {
        [&mut self.x, &mut self.y, &mut self.z]
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.x).max(max_abs(&self.y)).max(max_abs(&self.z))
    }

    /// Largest pointwise Euclidean norm.
    pub fn max_norm(&self) -> f64 {
        (0..self.grid.len()).map(|i| self.get(i).norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.components().iter().all(|c| c.iter().all(|v| v.is_finite()))
    }

    pub fn scaled(&self, s: f64) -> Self {
        let scale = |c: &[f64]| c.iter().map(|v| v * s).collect();
        Self { grid: self.grid, x: scale(&self.x), y: scale(&self.y), z: scale(&self.z) }
    }

    pub fn negated(&self) -> Self {
        let neg = |c: &[f64]| c.iter().map(|v| -v).collect();
        Self { grid: self.grid, x: neg(&self.x), y: neg(&self.y), z: neg(&self.z) }
    }

    /// Returns `self + s * other`.
    pub fn axpy(&self, s: f64, other: &Vec3Field) -> Result<Self> {
        same_grid(&self.grid, &other.grid)?;
        let comb = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(a, b)| a + s * b).collect();
        Ok(Self {
            grid: self.grid,
            x: comb(&self.x, &other.x),
            y: comb(&self.y, &other.y),
            z: comb(&self.z, &other.z),
        })
    }

    pub fn sub(&self, other: &Vec3Field) -> Result<Self> {
        self.axpy(-1.0, other)
    }

    /// Applies `f` at every node, producing a new vector field.
    pub fn map<F>(&self, f: F) -> Self
    where
        F: Fn(Vec3) -> Vec3 + Sync,
    {
        let samples: Vec<Vec3> = (0..self.grid.len()).into_par_iter().map(|i| f(self.get(i))).collect();
        Self::from_vecs(self.grid, &samples)
    }

    /// Applies `f` to paired samples of two fields on the same grid.
    pub fn zip_map<F>(&self, other: &Vec3Field, f: F) -> Result<Self>
    where
        F: Fn(Vec3, Vec3) -> Vec3 + Sync,
    {
        same_grid(&self.grid, &other.grid)?;
        let samples: Vec<Vec3> =
            (0..self.grid.len()).into_par_iter().map(|i| f(self.get(i), other.get(i))).collect();
        Ok(Self::from_vecs(self.grid, &samples))
    }

    /// Scalar field from paired samples of two fields on the same grid.
    pub fn zip_scalar<F>(&self, other: &Vec3Field, f: F) -> Result<ScalarField>
    where
        F: Fn(Vec3, Vec3) -> f64 + Sync,
    {
        same_grid(&self.grid, &other.grid)?;
        let values = (0..self.grid.len()).into_par_iter().map(|i| f(self.get(i), other.get(i))).collect();
        Ok(ScalarField { grid: self.grid, values })
    }

    /// Pointwise product with a scalar field.
    pub fn times(&self, s: &ScalarField) -> Result<Self> {
        same_grid(&self.grid, &s.grid)?;
        let mul = |c: &[f64]| c.iter().zip(&s.values).map(|(a, b)| a * b).collect();
        Ok(Self { grid: self.grid, x: mul(&self.x), y: mul(&self.y), z: mul(&self.z) })
    }
}

pub(crate) fn same_grid(a: &GridSpec, b: &GridSpec) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

pub(crate) fn max_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Accuracy order of the centered first-derivative stencil.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Stencil {
    Second,
    Fourth,
    #[default]
    Sixth,
    Eighth,
}

impl Stencil {
    pub const ALL: [Stencil; 4] = [Stencil::Second, Stencil::Fourth, Stencil::Sixth, Stencil::Eighth];

    pub fn from_order(order: usize) -> Option<Self> {
        match order {
            2 => Some(Self::Second),
            4 => Some(Self::Fourth),
            6 => Some(Self::Sixth),
            8 => Some(Self::Eighth),
            _ => None,
        }
    }

    pub fn order(&self) -> usize {
        match self {
            Self::Second => 2,
            Self::Fourth => 4,
            Self::Sixth => 6,
            Self::Eighth => 8,
        }
    }

    /// Weights `c_s` of `f'(x) ≈ Σ c_s (f(x + s h) - f(x - s h)) / h`, `s = 1..=r`.
    pub fn weights(&self) -> &'static [f64] {
        match self {
            Self::Second => &[0.5],
            Self::Fourth => &[2.0 / 3.0, -1.0 / 12.0],
            Self::Sixth => &[3.0 / 4.0, -3.0 / 20.0, 1.0 / 60.0],
            Self::Eighth => &[4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0],
        }
    }

    /// Partial derivative of `values` along `axis` (0 = x, 1 = y, 2 = z).
    pub fn derivative(&self, grid: &GridSpec, values: &[f64], axis: usize) -> Vec<f64> {
        assert_eq!(values.len(), grid.len());
        let (n, h) = match axis {
            0 => (grid.nx, grid.dx()),
            1 => (grid.ny, grid.dy()),
            2 => (grid.nz, grid.dz()),
            _ => panic!("axis out of range: {axis}"),
        };
        let weights: Vec<f64> = self.weights().iter().map(|w| w / h).collect();
        // plus[s - 1][i] = (i + s) mod n, minus[s - 1][i] = (i - s) mod n
        let plus: Vec<Vec<usize>> =
            (1..=weights.len()).map(|s| (0..n).map(|i| (i + s) % n).collect()).collect();
        let minus: Vec<Vec<usize>> =
            (1..=weights.len()).map(|s| (0..n).map(|i| (i + n * s - s) % n).collect()).collect();

        let (nx, ny) = (grid.nx, grid.ny);
        let slab = grid.slab();
        let r = weights.len();
        let mut out = vec![0.0; values.len()];
        out.par_chunks_mut(slab).enumerate().for_each(|(k, chunk)| match axis {
            0 => {
                for j in 0..ny {
                    let src = &values[slab * k + nx * j..slab * k + nx * (j + 1)];
                    let dst = &mut chunk[nx * j..nx * (j + 1)];
                    for i in 0..nx {
                        let mut acc = 0.0;
                        if i >= r && i + r < nx {
                            for (s, w) in weights.iter().enumerate() {
                                acc += w * (src[i + s + 1] - src[i - s - 1]);
                            }
                        } else {
                            for (s, w) in weights.iter().enumerate() {
                                acc += w * (src[plus[s][i]] - src[minus[s][i]]);
                            }
                        }
                        dst[i] = acc;
                    }
                }
            }
            1 => {
                let src = &values[slab * k..slab * (k + 1)];
                for j in 0..ny {
                    let dst = &mut chunk[nx * j..nx * (j + 1)];
                    for (s, w) in weights.iter().enumerate() {
                        let p = &src[nx * plus[s][j]..nx * (plus[s][j] + 1)];
                        let m = &src[nx * minus[s][j]..nx * (minus[s][j] + 1)];
                        for ((o, a), b) in dst.iter_mut().zip(p).zip(m) {
                            *o += w * (a - b);
                        }
                    }
                }
            }
            _ => {
                for (s, w) in weights.iter().enumerate() {
                    let p = &values[slab * plus[s][k]..slab * (plus[s][k] + 1)];
                    let m = &values[slab * minus[s][k]..slab * (minus[s][k] + 1)];
                    for ((o, a), b) in chunk.iter_mut().zip(p).zip(m) {
                        *o += w * (a - b);
                    }
                }
            }
        });
        out
    }

    pub fn grad(&self, f: &ScalarField) -> Vec3Field {
        let g = &f.grid;
        Vec3Field {
            grid: *g,
            x: self.derivative(g, &f.values, 0),
            y: self.derivative(g, &f.values, 1),
            z: self.derivative(g, &f.values, 2),
        }
    }

    pub fn div(&self, v: &Vec3Field) -> ScalarField {
        let g = &v.grid;
        let dx = self.derivative(g, &v.x, 0);
        let dy = self.derivative(g, &v.y, 1);
        let dz = self.derivative(g, &v.z, 2);
        let values = dx.iter().zip(&dy).zip(&dz).map(|((a, b), c)| a + b + c).collect();
        ScalarField { grid: *g, values }
    }

    pub fn curl(&self, v: &Vec3Field) -> Vec3Field {
        let g = &v.grid;
        let dyz = self.derivative(g, &v.z, 1);
        let dzy = self.derivative(g, &v.y, 2);
        let dzx = self.derivative(g, &v.x, 2);
        let dxz = self.derivative(g, &v.z, 0);
        let dxy = self.derivative(g, &v.y, 0);
        let dyx = self.derivative(g, &v.x, 1);
        let diff = |a: Vec<f64>, b: &[f64]| a.iter().zip(b).map(|(a, b)| a - b).collect();
        Vec3Field { grid: *g, x: diff(dyz, &dzy), y: diff(dzx, &dxz), z: diff(dxy, &dyx) }
    }
}

/// Gradient with the default stencil.
pub fn grad(f: &ScalarField) -> Vec3Field {
    Stencil::default().grad(f)
}

/// Divergence with the default stencil.
pub fn div(v: &Vec3Field) -> ScalarField {
    Stencil::default().div(v)
}

/// Curl with the default stencil.
pub fn curl(v: &Vec3Field) -> Vec3Field {
    Stencil::default().curl(v)
}

const PAIRWISE_LEAF: usize = 128;
const PAIRWISE_PAR: usize = 1 << 15;

/// Pairwise sum with split points that depend only on the slice length, so
/// the result is bit-identical for any number of worker threads.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= PAIRWISE_LEAF {
        return values.iter().fold(0.0, |acc, v| acc + v);
    }
    let (lo, hi) = values.split_at(values.len() / 2);
    if values.len() >= PAIRWISE_PAR {
        let (a, b) = rayon::join(|| pairwise_sum(lo), || pairwise_sum(hi));
        a + b
    } else {
        pairwise_sum(lo) + pairwise_sum(hi)
    }
}

/// Midpoint-rule volume integral `Σ f dx dy dz` over the periodic box.
pub fn integrate(f: &ScalarField) -> f64 {
    pairwise_sum(&f.values) * f.grid.cell_volume()
}

/// Volume integral of each component of a vector field.
pub fn integrate_vec(v: &Vec3Field) -> Vec3 {
    let dv = v.grid.cell_volume();
    Vec3::new(pairwise_sum(&v.x) * dv, pairwise_sum(&v.y) * dv, pairwise_sum(&v.z) * dv)
}

/// Root-mean-square of the pointwise difference of two vector fields.
pub fn rms_difference(a: &Vec3Field, b: &Vec3Field) -> Result<f64> {
    same_grid(&a.grid, &b.grid)?;
    let sq: Vec<f64> = (0..a.grid.len()).map(|i| (a.get(i) - b.get(i)).norm_sq()).collect();
    Ok((pairwise_sum(&sq) / a.grid.len() as f64).sqrt())
}

pub const SNAPSHOT_MAGIC: [u8; 8] = *b"KKNLED1\0";

/// In-memory form of a binary field snapshot.
///
/// Layout (all little-endian): magic `KKNLED1\0`, `nx ny nz` as `u64`,
/// `lx ly lz` as `f64`, component count as `u64`, then each component's
/// `nx*ny*nz` `f64` values in storage order.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub grid: GridSpec,
    pub components: Vec<Vec<f64>>,
}

impl Snapshot {
    pub fn from_fields(fields: &[&Vec3Field]) -> Result<Self> {
        let grid = fields.first().map(|f| f.grid).ok_or_else(|| Error::Snapshot("no fields".into()))?;
        let mut components = Vec::with_capacity(3 * fields.len());
        for f in fields {
            same_grid(&grid, &f.grid)?;
            components.extend([f.x.clone(), f.y.clone(), f.z.clone()]);
        }
        Ok(Self { grid, components })
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&SNAPSHOT_MAGIC)?;
        for n in [self.grid.nx, self.grid.ny, self.grid.nz] {
            w.write_all(&(n as u64).to_le_bytes())?;
        }
        for l in [self.grid.lx, self.grid.ly, self.grid.lz] {
            w.write_all(&l.to_le_bytes())?;
        }
        w.write_all(&(self.components.len() as u64).to_le_bytes())?;
        for c in &self.components {
            let mut buf = Vec::with_capacity(8 * c.len());
            for v in c {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if magic != SNAPSHOT_MAGIC {
            return Err(Error::Snapshot("bad magic".into()));
        }
        let mut word = [0u8; 8];
        let mut next_u64 = |r: &mut R| -> Result<u64> {
            r.read_exact(&mut word)?;
            Ok(u64::from_le_bytes(word))
        };
        let nx = next_u64(&mut r)? as usize;
        let ny = next_u64(&mut r)? as usize;
        let nz = next_u64(&mut r)? as usize;
        let lx = f64::from_bits(next_u64(&mut r)?);
        let ly = f64::from_bits(next_u64(&mut r)?);
        let lz = f64::from_bits(next_u64(&mut r)?);
        let count = next_u64(&mut r)? as usize;
        let grid = GridSpec::new(nx, ny, nz, lx, ly, lz)?;
        let mut components = Vec::with_capacity(count);
        let mut buf = vec![0u8; 8 * grid.len()];
        for _ in 0..count {
            r.read_exact(&mut buf)?;
            components.push(
                buf.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect(),
            );
        }
        Ok(Self { grid, components })
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(file))
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(file))
    }
}
