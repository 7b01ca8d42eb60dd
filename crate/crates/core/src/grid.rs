//! Discretization of the 1-D domain: quadrature grids, fields living on
//! them, and the finite-difference gradient oracle.
//!
//! A [`Grid`] fixes node positions and quadrature weights once; every
//! [`Field`] carries a cheap handle to its grid so that mismatched
//! operands are rejected instead of silently zipped. Integrals are plain
//! weighted sums, which keeps every discrete identity in this crate exact
//! up to rounding rather than up to quadrature error.

use std::sync::Arc;

use crate::error::{Error, Result};

/// Default relative step for [`fd_gradient`].
pub const DEFAULT_FD_STEP: f64 = 1e-5;

#[derive(Debug)]
struct GridData {
    n: usize,
    length: f64,
    periodic: bool,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

/// Quadrature grid on `[0, length]`.
///
/// Periodic grids place nodes at cell midpoints `x_i = (i + 1/2) * length / n`
/// with uniform weights `length / n` (midpoint rule); non-periodic grids use
/// endpoint nodes with trapezoid weights. Both satisfy
/// `sum(weights) == length`.
///
/// Cloning is cheap; the node and weight tables are shared.
///
/// ```
/// use kfunc_core::Grid;
///
/// let g = Grid::periodic(200, 1.0).unwrap();
/// let total: f64 = g.weights().iter().sum();
/// assert!((total - 1.0).abs() < 1e-12);
/// ```
#[derive(Clone, Debug)]
pub struct Grid {
    data: Arc<GridData>,
}

impl Grid {
    /// Midpoint grid on a circle of circumference `length`.
    pub fn periodic(n: usize, length: f64) -> Result<Self> {
        Self::build(n, length, true)
    }

    /// Endpoint grid on the segment `[0, length]` with trapezoid weights.
    pub fn line(n: usize, length: f64) -> Result<Self> {
        Self::build(n, length, false)
    }

    fn build(n: usize, length: f64, periodic: bool) -> Result<Self> {
        let min = if periodic { 2 } else { 3 };
        if n < min {
            return Err(Error::GridTooSmall { n, min });
        }
        if !length.is_finite() || length <= 0.0 {
            return Err(Error::BadGridLength { length });
        }
        let (nodes, weights) = if periodic {
            let h = length / n as f64;
            let nodes = (0..n).map(|i| (i as f64 + 0.5) * h).collect();
            (nodes, vec![h; n])
        } else {
            let h = length / (n - 1) as f64;
            let nodes: Vec<f64> = (0..n).map(|i| i as f64 * h).collect();
            let mut weights = vec![h; n];
            weights[0] = 0.5 * h;
            weights[n - 1] = 0.5 * h;
            (nodes, weights)
        };
        Ok(Grid {
            data: Arc::new(GridData {
                n,
                length,
                periodic,
                nodes,
                weights,
            }),
        })
    }

    pub fn n(&self) -> usize {
        self.data.n
    }

    pub fn length(&self) -> f64 {
        self.data.length
    }

    pub fn is_periodic(&self) -> bool {
        self.data.periodic
    }

    /// Node spacing: `length / n` (periodic) or `length / (n - 1)` (line).
    pub fn spacing(&self) -> f64 {
        if self.data.periodic {
            self.data.length / self.data.n as f64
        } else {
            self.data.length / (self.data.n - 1) as f64
        }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.data.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.data.weights
    }

    fn describe(&self) -> String {
        format!(
            "{} x {} ({})",
            self.data.n,
            self.data.length,
            if self.data.periodic { "periodic" } else { "line" }
        )
    }

    fn check_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                left: self.describe(),
                right: other.describe(),
            })
        }
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.data, &other.data)
            || (self.data.n == other.data.n
                && self.data.length == other.data.length
                && self.data.periodic == other.data.periodic)
    }
}

/// Real-valued function sampled on a [`Grid`]. All values are finite; the
/// constructors reject NaN and infinities so downstream quadrature never has
/// to re-check.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::GridMismatch {
                left: grid.describe(),
                right: format!("{} values", values.len()),
            });
        }
        for (node, &value) in values.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFiniteValue { node, value });
            }
        }
        Ok(Field {
            grid: grid.clone(),
            values,
        })
    }

    /// Samples `f(x)` at the grid nodes.
    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::from_values(grid, grid.nodes().iter().map(|&x| f(x)).collect())
    }

    pub fn constant(grid: &Grid, c: f64) -> Result<Self> {
        Self::from_values(grid, vec![c; grid.n()])
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Quadrature approximation of the integral over the domain.
    ///
    /// Exact (up to rounding) for affine integrands on both grid kinds.
    pub fn integrate(&self) -> f64 {
        self.grid
            .weights()
            .iter()
            .zip(&self.values)
            .map(|(w, v)| w * v)
            .sum()
    }

    /// Weighted inner product `sum_i w_i a_i b_i`, the discrete `L2` pairing.
    pub fn inner(&self, other: &Field) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        Ok(self
            .grid
            .weights()
            .iter()
            .zip(self.values.iter().zip(&other.values))
            .map(|(w, (a, b))| w * a * b)
            .sum())
    }

    /// Weighted 2-norm `sqrt(sum_i w_i v_i^2)`.
    pub fn weighted_norm(&self) -> f64 {
        self.grid
            .weights()
            .iter()
            .zip(&self.values)
            .map(|(w, v)| w * v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Pointwise map. The result is validated, so a map that produces NaN
    /// (say a square root of a negative value) fails loudly.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Field> {
        Self::from_values(&self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Pointwise map with access to the node coordinate.
    pub fn map_with_x(&self, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        let values = self
            .grid
            .nodes()
            .iter()
            .zip(&self.values)
            .map(|(&x, &v)| f(x, v))
            .collect();
        Self::from_values(&self.grid, values)
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        self.grid.check_same(&other.grid)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self::from_values(&self.grid, values)
    }

    /// `self + c * other`.
    pub fn add_scaled(&self, c: f64, other: &Field) -> Result<Field> {
        self.zip_map(other, |a, b| a + c * b)
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, c: f64) -> Result<Field> {
        self.map(|v| c * v)
    }

    /// Largest pointwise difference, used by the identity checks.
    pub fn max_abs_diff(&self, other: &Field) -> Result<f64> {
        Ok(self.sub(other)?.max_abs())
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

/// Central-difference gradient oracle for a scalar functional.
///
/// Returns the field `g` with `g_i = (a[rho + d_i e_i] - a[rho - d_i e_i])
/// / (2 d_i w_i)`, the discrete counterpart of the functional derivative
/// `dA/d rho(x_i)`. The step adapts to the local magnitude,
/// `d_i = delta0 * (1 + |rho_i|)`.
///
/// Evaluation failures of `a` (for instance a domain violation caused by
/// the perturbation) propagate unchanged.
pub fn fd_gradient(
    a: impl Fn(&Field) -> Result<f64>,
    rho: &Field,
    delta0: f64,
) -> Result<Field> {
    let weights = rho.grid().weights();
    let mut work = rho.clone();
    let mut grad = Vec::with_capacity(rho.len());
    for i in 0..rho.len() {
        let base = rho.values[i];
        let d = delta0 * (1.0 + base.abs());
        work.values_mut()[i] = base + d;
        let up = a(&work)?;
        work.values_mut()[i] = base - d;
        let down = a(&work)?;
        work.values_mut()[i] = base;
        grad.push((up - down) / (2.0 * d * weights[i]));
    }
    Field::from_values(rho.grid(), grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_grid(n: usize) -> Grid {
        Grid::periodic(n, 1.0).unwrap()
    }

    #[test]
    fn weights_sum_to_length() {
        for grid in [
            Grid::periodic(200, 1.0).unwrap(),
            Grid::periodic(7, 2.5).unwrap(),
            Grid::line(9, 3.0).unwrap(),
        ] {
            let total: f64 = grid.weights().iter().sum();
            assert!(
                (total - grid.length()).abs() <= 1e-12 * grid.length(),
                "sum of weights {total} != length {}",
                grid.length()
            );
        }
    }

    #[test]
    fn midpoint_integrates_affine_exactly() {
        let grid = unit_grid(200);
        let v = Field::from_fn(&grid, |x| x + 0.5).unwrap();
        assert!((v.integrate() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn trapezoid_integrates_affine_exactly() {
        let grid = Grid::line(51, 2.0).unwrap();
        let v = Field::from_fn(&grid, |x| 3.0 * x - 1.0).unwrap();
        // integral of 3x - 1 over [0, 2] is 4
        assert!((v.integrate() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn inner_product_matches_high_resolution_quadrature() {
        // integral of (2x - 7/6) sin(2 pi x) over [0, 1] is -1/pi;
        // cross-checked against a 10^4-node midpoint sum.
        let fine = unit_grid(10_000);
        let a = Field::from_fn(&fine, |x| 2.0 * x - 7.0 / 6.0).unwrap();
        let b = Field::from_fn(&fine, |x| (2.0 * std::f64::consts::PI * x).sin()).unwrap();
        let oracle = a.inner(&b).unwrap();
        let exact = -1.0 / std::f64::consts::PI;
        assert!((oracle - exact).abs() < 1e-6, "oracle {oracle} vs {exact}");

        let grid = unit_grid(200);
        let a = Field::from_fn(&grid, |x| 2.0 * x - 7.0 / 6.0).unwrap();
        let b = Field::from_fn(&grid, |x| (2.0 * std::f64::consts::PI * x).sin()).unwrap();
        assert!((a.inner(&b).unwrap() - exact).abs() < 1e-3);
    }

    #[test]
    fn inner_rejects_grid_mismatch() {
        let a = Field::constant(&unit_grid(8), 1.0).unwrap();
        let b = Field::constant(&unit_grid(9), 1.0).unwrap();
        assert!(matches!(
            a.inner(&b),
            Err(Error::GridMismatch { .. })
        ));
    }

    #[test]
    fn structurally_equal_grids_interoperate() {
        let a = Field::constant(&unit_grid(16), 2.0).unwrap();
        let b = Field::constant(&unit_grid(16), 3.0).unwrap();
        assert!((a.inner(&b).unwrap() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn constructors_reject_non_finite_values() {
        let grid = unit_grid(4);
        let err = Field::from_values(&grid, vec![1.0, f64::NAN, 0.0, 0.0]);
        assert!(matches!(err, Err(Error::NonFiniteValue { node: 1, .. })));
    }

    #[test]
    fn grids_reject_degenerate_parameters() {
        assert!(matches!(
            Grid::periodic(1, 1.0),
            Err(Error::GridTooSmall { .. })
        ));
        assert!(matches!(
            Grid::periodic(8, 0.0),
            Err(Error::BadGridLength { .. })
        ));
        assert!(matches!(
            Grid::line(8, f64::NAN),
            Err(Error::BadGridLength { .. })
        ));
    }

    #[test]
    fn fd_gradient_recovers_quadratic_density_gradient() {
        // A[rho] = sum w rho^2 is quadratic, so central differences are
        // exact up to rounding; the density gradient is 2 rho.
        let grid = unit_grid(200);
        let rho = Field::from_fn(&grid, |x| x + 0.5).unwrap();
        let grad = fd_gradient(
            |f| Ok(f.values().iter().zip(f.grid().weights()).map(|(v, w)| w * v * v).sum()),
            &rho,
            DEFAULT_FD_STEP,
        )
        .unwrap();
        let expected = rho.scale(2.0).unwrap();
        let scale = expected.max_abs();
        assert!(grad.max_abs_diff(&expected).unwrap() / scale < 1e-8);
    }

    #[test]
    fn fd_gradient_propagates_evaluation_failure() {
        let grid = unit_grid(8);
        let rho = Field::constant(&grid, 1.0).unwrap();
        let result = fd_gradient(
            |_| {
                Err(Error::Evaluation {
                    label: "stub".into(),
                    reason: "always fails".into(),
                })
            },
            &rho,
            DEFAULT_FD_STEP,
        );
        assert!(matches!(result, Err(Error::Evaluation { .. })));
    }
}
