//! Uniform grids on `[0, T]` and piecewise-constant signals living on them.
//!
//! A [`Signal`] stores one value per cell `[t_{j-1}, t_j)`. Norms and the
//! duality pairing are the exact integrals of the piecewise-constant function,
//! i.e. cell sums weighted by the step `h = T / n`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform partition of `[0, horizon]` into `cells` equal cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    horizon: f64,
    cells: usize,
}

impl Grid {
    pub fn new(horizon: f64, cells: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "grid horizon must be positive and finite, got {horizon}"
            )));
        }
        if cells == 0 {
            return Err(Error::InvalidParameter("grid needs at least one cell".into()));
        }
        Ok(Self { horizon, cells })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn step(&self) -> f64 {
        self.horizon / self.cells as f64
    }

    /// Right endpoint `t_j` of cell `j` (0-based), i.e. `(j + 1) h`.
    pub fn right_endpoint(&self, j: usize) -> f64 {
        self.horizon * (j + 1) as f64 / self.cells as f64
    }

    pub fn midpoint(&self, j: usize) -> f64 {
        self.horizon * (j as f64 + 0.5) / self.cells as f64
    }

    /// Same cell count and horizons equal to within a few ulps.
    pub fn compatible(&self, other: &Grid) -> bool {
        self.cells == other.cells
            && (self.horizon - other.horizon).abs()
                <= 4.0 * f64::EPSILON * self.horizon.abs().max(other.horizon.abs())
    }

    pub fn ensure_compatible(&self, other: &Grid) -> Result<()> {
        if self.compatible(other) {
            Ok(())
        } else {
            Err(Error::IncompatibleGrids {
                left: *self,
                right: *other,
            })
        }
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[0, {}] with {} cells", self.horizon, self.cells)
    }
}

/// Piecewise-constant function on a [`Grid`]; all values are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    grid: Grid,
    values: Vec<f64>,
}

impl Signal {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cells() {
            return Err(Error::InvalidParameter(format!(
                "signal has {} values but the grid has {} cells",
                values.len(),
                grid.cells()
            )));
        }
        if let Some(idx) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(idx));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        assert!(value.is_finite(), "constant signal value must be finite");
        Self {
            grid,
            values: vec![value; grid.cells()],
        }
    }

    /// Builds a signal from a function of the cell index.
    pub fn from_fn(grid: Grid, f: impl FnMut(usize) -> f64) -> Result<Self> {
        Self::new(grid, (0..grid.cells()).map(f).collect())
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Discrete `L^p(0, T)` norm; `p = f64::INFINITY` gives the max norm.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        if p.is_nan() || p < 1.0 {
            return Err(Error::InvalidParameter(format!(
                "norm exponent must satisfy p >= 1, got {p}"
            )));
        }
        if p.is_infinite() {
            return Ok(self.max_abs());
        }
        let h = self.grid.step();
        if p == 1.0 {
            return Ok(h * self.values.iter().map(|v| v.abs()).sum::<f64>());
        }
        if p == 2.0 {
            // scaled sum of squares avoids overflow for huge entries
            let m = self.max_abs();
            if m == 0.0 {
                return Ok(0.0);
            }
            let s: f64 = self.values.iter().map(|v| (v / m) * (v / m)).sum();
            return Ok(m * (h * s).sqrt());
        }
        let m = self.max_abs();
        if m == 0.0 {
            return Ok(0.0);
        }
        let s: f64 = self.values.iter().map(|v| (v.abs() / m).powf(p)).sum();
        Ok(m * (h * s).powf(1.0 / p))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    /// `h * sum_j u_j v_j`.
    pub fn dual_pairing(&self, other: &Signal) -> Result<f64> {
        self.grid.ensure_compatible(&other.grid)?;
        let s: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum();
        Ok(self.grid.step() * s)
    }

    /// Running integral at the right endpoints: `L_i = h * sum_{j <= i} s_j`.
    pub fn cumulative_integral(&self) -> Vec<f64> {
        cumulative_integral(self.values(), self.grid.step())
    }

    /// Sum of absolute consecutive differences.
    pub fn total_variation(&self) -> f64 {
        self.values.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
    }

    pub fn scaled(&self, c: f64) -> Signal {
        Signal {
            grid: self.grid,
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    pub fn add(&self, other: &Signal) -> Result<Signal> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Signal) -> Result<Signal> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn offset(&self, c: f64) -> Signal {
        Signal {
            grid: self.grid,
            values: self.values.iter().map(|v| v + c).collect(),
        }
    }

    fn zip_with(&self, other: &Signal, op: impl Fn(f64, f64) -> f64) -> Result<Signal> {
        self.grid.ensure_compatible(&other.grid)?;
        Signal::new(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| op(a, b))
                .collect(),
        )
    }
}

/// Right-endpoint running integral of cell values with step `h`.
pub fn cumulative_integral(values: &[f64], h: f64) -> Vec<f64> {
    let mut acc = 0.0;
    values
        .iter()
        .map(|v| {
            acc += v;
            h * acc
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(t: f64, n: usize) -> Grid {
        Grid::new(t, n).unwrap()
    }

    #[test]
    fn rejects_bad_grids_and_values() {
        assert!(Grid::new(0.0, 4).is_err());
        assert!(Grid::new(-1.0, 4).is_err());
        assert!(Grid::new(1.0, 0).is_err());
        assert!(matches!(
            Signal::new(grid(1.0, 2), vec![1.0, f64::NAN]),
            Err(Error::NonFinite(1))
        ));
        assert!(Signal::new(grid(1.0, 2), vec![1.0]).is_err());
    }

    #[test]
    fn step_times_cells_recovers_horizon() {
        for &(t, n) in &[(1.0, 3), (0.7, 7), (13.0, 1000), (2.5, 17)] {
            let g = grid(t, n);
            let back = g.step() * n as f64;
            assert!((back - t).abs() <= f64::EPSILON * t, "{t} {n} {back}");
        }
    }

    #[test]
    fn lp_norm_examples() {
        let g = grid(2.0, 4);
        assert_eq!(Signal::zeros(g).lp_norm(1.0).unwrap(), 0.0);
        assert_eq!(Signal::zeros(g).lp_norm(f64::INFINITY).unwrap(), 0.0);
        let one = Signal::constant(g, 1.0);
        assert!((one.lp_norm(2.0).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        let s = Signal::new(grid(1.0, 2), vec![3.0, -4.0]).unwrap();
        assert!((s.lp_norm(1.0).unwrap() - 3.5).abs() < 1e-15);
        assert_eq!(s.lp_norm(f64::INFINITY).unwrap(), 4.0);
        assert!((s.lp_norm(3.0).unwrap() - (0.5f64 * 91.0).cbrt()).abs() < 1e-13);
        assert!(matches!(s.lp_norm(0.5), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn pairing_examples() {
        let g = grid(1.0, 5);
        let one = Signal::constant(g, 1.0);
        assert!((one.dual_pairing(&one).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(Signal::zeros(g).dual_pairing(&one).unwrap(), 0.0);
        let g2 = grid(1.0, 2);
        let u = Signal::new(g2, vec![1.0, 2.0]).unwrap();
        let v = Signal::new(g2, vec![3.0, -1.0]).unwrap();
        assert!((u.dual_pairing(&v).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(
            u.dual_pairing(&one),
            Err(Error::IncompatibleGrids { .. })
        ));
    }

    #[test]
    fn cumulative_examples() {
        let c = Signal::constant(grid(1.0, 4), 1.0).cumulative_integral();
        assert_eq!(c, vec![0.25, 0.5, 0.75, 1.0]);
        assert!(Signal::zeros(grid(3.0, 3))
            .cumulative_integral()
            .iter()
            .all(|&v| v == 0.0));
        let s = Signal::new(grid(1.0, 2), vec![2.0, -2.0]).unwrap();
        assert_eq!(s.cumulative_integral(), vec![1.0, 0.0]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn signal_strategy() -> impl Strategy<Value = Signal> {
            (1usize..40, 0.1f64..10.0).prop_flat_map(|(n, t)| {
                prop::collection::vec(-1e3f64..1e3, n)
                    .prop_map(move |v| Signal::new(Grid::new(t, n).unwrap(), v).unwrap())
            })
        }

        proptest! {
            #[test]
            fn norm_is_absolutely_homogeneous(s in signal_strategy(), c in -50.0f64..50.0, p in prop::sample::select(vec![1.0, 1.5, 2.0, 3.0, f64::INFINITY])) {
                let lhs = s.scaled(c).lp_norm(p).unwrap();
                let rhs = c.abs() * s.lp_norm(p).unwrap();
                prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1e-300));
            }

            #[test]
            fn pairing_matches_squared_norm(s in signal_strategy()) {
                let pair = s.dual_pairing(&s).unwrap();
                let norm = s.lp_norm(2.0).unwrap();
                prop_assert!((pair - norm * norm).abs() <= 1e-12 * pair.max(1e-300));
            }

            #[test]
            fn last_cumulative_is_pairing_with_one(s in signal_strategy()) {
                let one = Signal::constant(*s.grid(), 1.0);
                let last = *s.cumulative_integral().last().unwrap();
                let pair = s.dual_pairing(&one).unwrap();
                let scale = s.lp_norm(1.0).unwrap().max(1e-300);
                prop_assert!((last - pair).abs() <= 1e-12 * scale);
            }

            #[test]
            fn pairing_is_symmetric(s in signal_strategy(), c in -3.0f64..3.0) {
                let t = s.scaled(c).offset(1.0);
                let a = s.dual_pairing(&t).unwrap();
                let b = t.dual_pairing(&s).unwrap();
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300));
            }
        }
    }
}
