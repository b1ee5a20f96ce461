//! Cell-centered grids on centered boxes `Q_r = (-r, r)^d` and the fields that live on them.

use std::fmt;

use crate::error::{Error, Result};

/// Largest dimension the solvers support.
pub const MAX_DIM: usize = 3;

/// A uniform cell-centered grid with `n` points per axis on `(-r, r)^d`.
///
/// Node `i` along an axis sits at `-r + (i + 1/2) h` with `h = 2r / n`, so no node lies on the
/// box boundary. Functions are extended by zero outside the box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    dim: usize,
    n: usize,
    radius: f64,
}

impl Grid {
    pub fn new(dim: usize, n: usize, radius: f64) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidParameter(format!(
                "grid dimension must be in 1..={MAX_DIM}, got {dim}"
            )));
        }
        if n < 2 {
            return Err(Error::InvalidParameter(format!(
                "grid needs at least 2 points per axis, got {n}"
            )));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "box radius must be positive, got {radius}"
            )));
        }
        Ok(Self { dim, n, radius })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_dim(&self) -> usize {
        self.n
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.radius / self.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinate of node `i` along any axis.
    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        -self.radius + (i as f64 + 0.5) * self.spacing()
    }

    /// Row-major multi-index of a flat index (last axis fastest).
    #[inline]
    pub fn multi_index(&self, mut flat: usize) -> [usize; MAX_DIM] {
        let mut idx = [0; MAX_DIM];
        for axis in (0..self.dim).rev() {
            idx[axis] = flat % self.n;
            flat /= self.n;
        }
        idx
    }

    #[inline]
    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx[..self.dim].iter().fold(0, |acc, &i| acc * self.n + i)
    }

    /// Flat index of the cell containing `x`, clamped to the box.
    #[inline]
    pub fn cell_of(&self, x: &[f64]) -> usize {
        let mut flat = 0;
        for &c in &x[..self.dim] {
            let i = ((c + self.radius) / self.spacing()).floor();
            let i = (i.max(0.0) as usize).min(self.n - 1);
            flat = flat * self.n + i;
        }
        flat
    }

    /// Physical position of the node with the given flat index.
    #[inline]
    pub fn point(&self, flat: usize) -> [f64; MAX_DIM] {
        let idx = self.multi_index(flat);
        let mut x = [0.0; MAX_DIM];
        for axis in 0..self.dim {
            x[axis] = self.coord(idx[axis]);
        }
        x
    }

    /// Stride of `axis` in the row-major layout.
    #[inline]
    pub fn stride(&self, axis: usize) -> usize {
        self.n.pow((self.dim - 1 - axis) as u32)
    }

    /// Same resolution, radius scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.dim, self.n, self.radius * factor)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x[..self.dim].iter().all(|c| c.abs() < self.radius)
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Q_{}^{} with {} points/axis", self.radius, self.dim, self.n)
    }
}

/// A real function sampled at the nodes of a [`Grid`].
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "field has {} values but grid {} needs {}",
                values.len(),
                grid,
                grid.len()
            )));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "field value at index {bad} is not finite"
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self { grid, values: vec![0.0; grid.len()] }
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        Self { grid, values: vec![value; grid.len()] }
    }

    pub fn from_fn(grid: Grid, mut f: impl FnMut(&[f64]) -> f64) -> Self {
        let dim = grid.dim();
        let values = (0..grid.len())
            .map(|k| {
                let x = grid.point(k);
                f(&x[..dim])
            })
            .collect();
        Self { grid, values }
    }

    pub(crate) fn from_raw(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// `∫ f g dx` by the midpoint rule.
    pub fn inner(&self, other: &Field) -> f64 {
        debug_assert_eq!(self.grid, other.grid);
        self.grid.cell_volume() * dot(&self.values, &other.values)
    }

    pub fn l2_norm(&self) -> f64 {
        self.lp_norm(2.0)
    }

    pub fn lp_norm(&self, p: f64) -> f64 {
        let s: f64 = self.values.iter().map(|v| v.abs().powf(p)).sum();
        (self.grid.cell_volume() * s).powf(1.0 / p)
    }

    /// `∫ f dx`.
    pub fn integral(&self) -> f64 {
        self.grid.cell_volume() * self.values.iter().sum::<f64>()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Rescales in place to unit `L²` norm.
    pub fn normalize(&mut self) -> Result<()> {
        let norm = self.l2_norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::InvalidParameter("cannot normalize a zero field".into()));
        }
        self.values.iter_mut().for_each(|v| *v /= norm);
        Ok(())
    }

    pub fn normalized(mut self) -> Result<Self> {
        self.normalize()?;
        Ok(self)
    }

    pub fn scale(&mut self, factor: f64) {
        self.values.iter_mut().for_each(|v| *v *= factor);
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    /// `L²` distance to `other`.
    pub fn l2_distance(&self, other: &Field) -> f64 {
        debug_assert_eq!(self.grid, other.grid);
        let s: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        (self.grid.cell_volume() * s).sqrt()
    }

    /// Barycenter of the probability density `f² / ‖f‖²`.
    pub fn barycenter(&self) -> [f64; MAX_DIM] {
        let mut m = [0.0; MAX_DIM];
        let mut mass = 0.0;
        for (k, v) in self.values.iter().enumerate() {
            let w = v * v;
            let x = self.grid.point(k);
            for axis in 0..self.grid.dim() {
                m[axis] += w * x[axis];
            }
            mass += w;
        }
        if mass > 0.0 {
            m.iter_mut().for_each(|c| *c /= mass);
        }
        m
    }

    /// Multilinear interpolation at `x`, extended by the nearest boundary node beyond the outer
    /// nodes (constant extension).
    pub fn interpolate(&self, x: &[f64]) -> f64 {
        let g = &self.grid;
        let dim = g.dim();
        let h = g.spacing();
        let n = g.points_per_dim();
        let mut lo = [0usize; MAX_DIM];
        let mut frac = [0.0; MAX_DIM];
        for axis in 0..dim {
            let s = (x[axis] + g.radius()) / h - 0.5;
            let s = s.clamp(0.0, (n - 1) as f64);
            let i = (s.floor() as usize).min(n - 2);
            lo[axis] = i;
            frac[axis] = s - i as f64;
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << dim) {
            let mut w = 1.0;
            let mut flat = 0;
            for axis in 0..dim {
                let bit = (corner >> axis) & 1;
                w *= if bit == 1 { frac[axis] } else { 1.0 - frac[axis] };
                flat = flat * n + lo[axis] + bit;
            }
            if w != 0.0 {
                acc += w * self.values[flat];
            }
        }
        acc
    }

    /// Value at the node nearest to the origin-centered point `x` with the same multi-index.
    pub fn at(&self, idx: &[usize]) -> f64 {
        self.values[self.grid.flat_index(idx)]
    }

    /// Translates the field by `shift` (resampled by interpolation, zero outside the box).
    pub fn shifted(&self, shift: &[f64]) -> Self {
        let dim = self.grid.dim();
        let g = self.grid;
        Self::from_fn(g, |x| {
            let mut y = [0.0; MAX_DIM];
            for axis in 0..dim {
                y[axis] = x[axis] + shift[axis];
            }
            if g.contains(&y[..dim]) {
                self.interpolate(&y[..dim])
            } else {
                0.0
            }
        })
    }

    /// Shift so that the barycenter of `f²` sits at the origin.
    pub fn centered(&self) -> Self {
        let m = self.barycenter();
        self.shifted(&m[..self.grid.dim()])
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_centered_nodes() {
        let g = Grid::new(1, 4, 1.0).unwrap();
        let xs: Vec<f64> = (0..4).map(|i| g.coord(i)).collect();
        assert_eq!(xs, vec![-0.75, -0.25, 0.25, 0.75]);
        assert_eq!(g.spacing(), 0.5);
    }

    #[test]
    fn flat_and_multi_index_agree() {
        let g = Grid::new(3, 5, 2.0).unwrap();
        for k in 0..g.len() {
            let idx = g.multi_index(k);
            assert_eq!(g.flat_index(&idx), k);
        }
        assert_eq!(g.stride(0), 25);
        assert_eq!(g.stride(2), 1);
    }

    #[test]
    fn l2_norm_uses_cell_volume() {
        let g = Grid::new(2, 8, 1.0).unwrap();
        let f = Field::constant(g, 1.0);
        // area of (-1,1)^2
        assert!((f.l2_norm() - 2.0).abs() < 1e-14);
        assert!((f.integral() - 4.0).abs() < 1e-14);
    }

    #[test]
    fn interpolation_is_exact_for_affine_functions() {
        let g = Grid::new(2, 16, 3.0).unwrap();
        let f = Field::from_fn(g, |x| 1.0 + 2.0 * x[0] - 0.5 * x[1]);
        for &(a, b) in &[(0.1, 0.2), (-1.37, 2.0), (2.5, -2.5)] {
            let v = f.interpolate(&[a, b]);
            assert!((v - (1.0 + 2.0 * a - 0.5 * b)).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(Grid::new(0, 4, 1.0).is_err());
        assert!(Grid::new(4, 4, 1.0).is_err());
        assert!(Grid::new(1, 4, -1.0).is_err());
        let g = Grid::new(1, 4, 1.0).unwrap();
        assert!(Field::new(g, vec![0.0; 3]).is_err());
        assert!(Field::new(g, vec![0.0, f64::NAN, 0.0, 0.0]).is_err());
    }
}
