//! Uniform space-time lattice and fields sampled on it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Truncated space-time lattice: `nx` uniform points on `[x_min, x_max]`
/// and `nt` uniform times on `[0, t_max]` with `t_0 = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub t_max: f64,
    pub nt: usize,
}

impl Default for Grid {
    fn default() -> Self {
        Self {
            x_min: -20.0,
            x_max: 20.0,
            nx: 401,
            t_max: 2.0,
            nt: 201,
        }
    }
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, nx: usize, t_max: f64, nt: usize) -> Result<Self> {
        let g = Self {
            x_min,
            x_max,
            nx,
            t_max,
            nt,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x_min.is_finite() && self.x_max.is_finite() && self.x_min < self.x_max) {
            return Err(Error::Validation {
                name: "x_min/x_max",
                reason: format!("need x_min < x_max, got [{}, {}]", self.x_min, self.x_max),
            });
        }
        if self.nx < 3 {
            return Err(Error::Validation {
                name: "nx",
                reason: format!("need at least 3 points, got {}", self.nx),
            });
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(Error::Validation {
                name: "t_max",
                reason: format!("must be positive, got {}", self.t_max),
            });
        }
        if self.nt < 2 {
            return Err(Error::Validation {
                name: "nt",
                reason: format!("need at least 2 time points, got {}", self.nt),
            });
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx - 1) as f64
    }

    pub fn dt(&self) -> f64 {
        self.t_max / (self.nt - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    pub fn t(&self, k: usize) -> f64 {
        k as f64 * self.dt()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.x(i)).collect()
    }

    pub fn ts(&self) -> Vec<f64> {
        (0..self.nt).map(|k| self.t(k)).collect()
    }

    /// Same domain with `factor` times as many intervals in each direction.
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            nx: (self.nx - 1) * factor + 1,
            nt: (self.nt - 1) * factor + 1,
            ..*self
        }
    }
}

/// Values on a [`Grid`], stored time-major: `values[k * nx + i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.nx * grid.nt],
        }
    }

    pub fn from_fn(grid: Grid, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.nx * grid.nt);
        for k in 0..grid.nt {
            let t = grid.t(k);
            for i in 0..grid.nx {
                values.push(f(grid.x(i), t));
            }
        }
        Self { grid, values }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.nx * grid.nt {
            return Err(Error::Shape(format!(
                "expected {} values, got {}",
                grid.nx * grid.nt,
                values.len()
            )));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite field value at index {bad}")));
        }
        Ok(Self { grid, values })
    }

    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.values[k * self.grid.nx + i]
    }

    pub fn set(&mut self, i: usize, k: usize, v: f64) {
        self.values[k * self.grid.nx + i] = v;
    }

    pub fn slice(&self, k: usize) -> &[f64] {
        let nx = self.grid.nx;
        &self.values[k * nx..(k + 1) * nx]
    }

    pub fn slice_mut(&mut self, k: usize) -> &mut [f64] {
        let nx = self.grid.nx;
        &mut self.values[k * nx..(k + 1) * nx]
    }

    /// Time series at space index `i`.
    pub fn series(&self, i: usize) -> Vec<f64> {
        (0..self.grid.nt).map(|k| self.get(i, k)).collect()
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn slice_sup(&self, k: usize) -> f64 {
        self.slice(k).iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn sup_diff(&self, other: &Field) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::Shape("fields live on different grids".into()));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs())))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn scaled(&self, factor: f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn steps_are_consistent() {
        let g = Grid::new(-1.0, 1.0, 5, 2.0, 3).unwrap();
        assert_eq!(g.dx(), 0.5);
        assert_eq!(g.dt(), 1.0);
        assert_eq!(g.x(4), 1.0);
        assert_eq!(g.t(2), 2.0);
        let r = g.refined(2);
        assert_eq!((r.nx, r.nt), (9, 5));
        assert_eq!(r.dx(), 0.25);
    }

    #[test]
    fn invalid_grids() {
        assert!(Grid::new(1.0, 1.0, 5, 1.0, 3).is_err());
        assert!(Grid::new(0.0, 1.0, 2, 1.0, 3).is_err());
        assert!(Grid::new(0.0, 1.0, 5, 0.0, 3).is_err());
        assert!(Grid::new(0.0, 1.0, 5, 1.0, 1).is_err());
    }

    #[test]
    fn field_layout_is_time_major() {
        let g = Grid::new(0.0, 2.0, 3, 1.0, 2).unwrap();
        let f = Field::from_fn(g, |x, t| x + 10.0 * t);
        assert_eq!(f.slice(1), &[10.0, 11.0, 12.0]);
        assert_eq!(f.series(2), vec![2.0, 12.0]);
        assert_eq!(f.sup(), 12.0);
        assert!(Field::from_values(g, vec![0.0; 5]).is_err());
        assert!(Field::from_values(g, vec![f64::NAN; 6]).is_err());
    }
}
