//! Shape/number decomposition of a functional derivative.
//!
//! Any change of a field splits into a change of its total amount
//! `N = integral rho` and a change of its shape `n = rho / N`. The plain
//! gradient density splits accordingly: a constant `shape_part`, which is
//! the derivative of `A` along pure rescaling (`(1/N) integral rho g`), and
//! the mass-conserving remainder `n_part = g - shape_part`. The same
//! picture for a weighted-linear constraint `integral h rho = L` uses the
//! L-shape `l = rho / integral(h rho)` and reconstructs the gradient as
//! `g = n_part + h * shape_part`; the `h` factor is forced by requiring the
//! reconstruction to be exact and to reduce to the plain split at `h = 1`.

use crate::constraint::{ConstraintSpec, KTarget};
use crate::error::{Error, Result};
use crate::functionals::Functional;
use crate::grid::{fd_gradient, Field, DEFAULT_FD_STEP};
use crate::kderiv::k_derivative;

/// Result of splitting a gradient density along a mass-like constraint.
#[derive(Clone, Debug)]
pub struct ShapeSplit {
    /// Conserving part of the derivative (a field).
    pub n_part: Field,
    /// Derivative along pure rescaling (a scalar).
    pub shape_part: f64,
    /// The conserved amount the split is taken at: `integral rho`
    /// (or `integral h rho` for the weighted split).
    pub norm: f64,
}

fn checked_norm(weights: &[f64], values: impl Iterator<Item = f64>) -> Result<f64> {
    let mut total = 0.0;
    let mut scale = 0.0;
    for (w, v) in weights.iter().zip(values) {
        total += w * v;
        scale += w * v.abs();
    }
    if !total.is_finite() || total.abs() <= 1e-13 * scale {
        return Err(Error::ZeroNorm);
    }
    Ok(total)
}

/// Normalized shape `n = rho / integral rho`, satisfying
/// `integral n = 1` to rounding.
pub fn shape(rho: &Field) -> Result<Field> {
    let n = checked_norm(rho.grid().weights(), rho.values().iter().copied())?;
    rho.scale(1.0 / n)
}

/// Splits `g` into `shape_part + n_part` at the field `rho`.
///
/// `shape_part = (1/N) sum w rho g` and `n_part = g - shape_part`; the
/// reconstruction is exact by construction, and `n_part` coincides with the
/// mass-conserving derivative of `g` (the identity-constraint case of
/// `k_derivative` with `K = N`).
pub fn shape_split(g: &Field, rho: &Field) -> Result<ShapeSplit> {
    let norm = checked_norm(rho.grid().weights(), rho.values().iter().copied())?;
    let shape_part = g.inner(rho)? / norm;
    let n_part = g.map(|v| v - shape_part)?;
    Ok(ShapeSplit {
        n_part,
        shape_part,
        norm,
    })
}

/// Weighted-linear version of [`shape_split`] for the constraint
/// `integral h rho = L`.
///
/// Uses the L-shape `l = rho / integral(h rho)` (so `integral h l = 1`),
/// `shape_part = sum w l g`, and `n_part = g - h * shape_part`. Requires
/// `rho` to sit on the constraint set of the target `L`.
pub fn l_split(g: &Field, rho: &Field, h: &Field, l: &KTarget) -> Result<ShapeSplit> {
    let weighted = rho.zip_map(h, |r, hv| hv * r)?;
    let norm = checked_norm(rho.grid().weights(), weighted.values().iter().copied())?;
    let diff = (norm - l.value()).abs();
    if diff > l.tolerance() * l.value().abs().max(1.0) {
        return Err(Error::ConstraintMismatch {
            expected: l.value(),
            actual: norm,
            diff,
            tol: l.tolerance(),
        });
    }
    let shape_part = g.inner(rho)? / norm;
    let n_part = g.zip_map(h, |gv, hv| gv - hv * shape_part)?;
    Ok(ShapeSplit {
        n_part,
        shape_part,
        norm,
    })
}

/// Cross-check of the two routes to the mass-conserving derivative.
///
/// Route one: split the gradient of `a` at `rho` directly. Route two: hold
/// the amount `N` fixed, differentiate the rescaled functional
/// `B[n] = A[N n]` at the unit-mass shape `n = shape(rho)` (by finite
/// differences, keeping the route independent), and take its unit-mass
/// conserving derivative. The two agree after scaling by `N`; the returned
/// max-norm difference is finite-difference noise.
pub fn shape_route_residual(a: &Functional, rho: &Field) -> Result<f64> {
    let norm = checked_norm(rho.grid().weights(), rho.values().iter().copied())?;
    let n = shape(rho)?;
    let g = a.gradient(rho)?;
    let split = shape_split(&g, rho)?;

    let gb = fd_gradient(|m| a.value(&m.scale(norm)?), &n, DEFAULT_FD_STEP)?;
    let unit = KTarget::new(1.0)?;
    let kd = k_derivative(&gb, &n, &ConstraintSpec::identity(), &unit)?;

    kd.max_abs_diff(&split.n_part.scale(norm)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use std::f64::consts::PI;

    fn unit_grid(n: usize) -> Grid {
        Grid::periodic(n, 1.0).unwrap()
    }

    #[test]
    fn shape_normalizes_affine_field() {
        let grid = unit_grid(200);
        let rho = Field::from_fn(&grid, |x| 2.0 * x + 1.0).unwrap();
        let n = shape(&rho).unwrap();
        let expected = Field::from_fn(&grid, |x| x + 0.5).unwrap();
        assert!(n.max_abs_diff(&expected).unwrap() < 1e-12);
        assert!((n.integrate() - 1.0).abs() < 1e-12);
        let again = shape(&n).unwrap();
        assert!(n.max_abs_diff(&again).unwrap() < 1e-12);
    }

    #[test]
    fn shape_rejects_zero_mass() {
        let grid = unit_grid(64);
        let rho = Field::from_fn(&grid, |x| (2.0 * PI * x).sin()).unwrap();
        assert!(matches!(shape(&rho), Err(Error::ZeroNorm)));
    }

    #[test]
    fn split_of_square_functional_at_unit_mass() {
        // A = integral rho^2 at rho = x + 1/2: g = 2x + 1 splits into the
        // rescaling derivative 13/6 and the conserving part 2x - 7/6.
        let grid = unit_grid(200);
        let rho = Field::from_fn(&grid, |x| x + 0.5).unwrap();
        let g = rho.scale(2.0).unwrap();
        let split = shape_split(&g, &rho).unwrap();
        assert!((split.shape_part - 13.0 / 6.0).abs() < 1e-4);
        assert!((split.norm - 1.0).abs() < 1e-12);
        let expected = Field::from_fn(&grid, |x| 2.0 * x - 7.0 / 6.0).unwrap();
        assert!(split.n_part.max_abs_diff(&expected).unwrap() < 1e-4);
    }

    #[test]
    fn constant_gradient_is_pure_rescaling() {
        let grid = unit_grid(80);
        let rho = Field::from_fn(&grid, |x| 1.0 + 0.4 * (2.0 * PI * x).sin()).unwrap();
        let g = Field::constant(&grid, 3.2).unwrap();
        let split = shape_split(&g, &rho).unwrap();
        assert!((split.shape_part - 3.2).abs() < 1e-12);
        assert!(split.n_part.max_abs() < 1e-12);
    }

    #[test]
    fn split_reconstructs_and_matches_conserving_derivative() {
        let grid = unit_grid(120);
        let rho = Field::from_fn(&grid, |x| 1.1 + 0.3 * (4.0 * PI * x).cos()).unwrap();
        let g = Field::from_fn(&grid, |x| x * x - 0.2).unwrap();
        let split = shape_split(&g, &rho).unwrap();
        let rebuilt = split.n_part.map(|v| v + split.shape_part).unwrap();
        assert!(rebuilt.max_abs_diff(&g).unwrap() < 1e-12);

        let k = KTarget::new(split.norm).unwrap();
        let kd = k_derivative(&g, &rho, &ConstraintSpec::identity(), &k).unwrap();
        assert!(split.n_part.max_abs_diff(&kd).unwrap() < 1e-12);

        let weighted_avg = g.inner(&rho).unwrap() / split.norm;
        assert!((split.shape_part - weighted_avg).abs() < 1e-12);
    }

    #[test]
    fn rescaling_derivative_matches_finite_differences_in_the_amount() {
        // shape_part is the weighted average (1/N) integral rho g; check it
        // against a central difference of N -> A[N n] at fixed shape.
        let grid = unit_grid(100);
        let rho = Field::from_fn(&grid, |x| 1.5 + 0.5 * (2.0 * PI * x).sin()).unwrap();
        let a = Functional::quartic();
        let split = shape_split(&a.gradient(&rho).unwrap(), &rho).unwrap();
        let n = shape(&rho).unwrap();
        let d = 1e-6 * split.norm;
        let up = a.value(&n.scale(split.norm + d).unwrap()).unwrap();
        let down = a.value(&n.scale(split.norm - d).unwrap()).unwrap();
        let fd = (up - down) / (2.0 * d);
        assert!(
            (split.shape_part - fd).abs() < 1e-6 * split.shape_part.abs().max(1.0),
            "weighted average {} vs FD {fd}",
            split.shape_part
        );
    }

    #[test]
    fn weighted_split_on_affine_profile() {
        // h = 1 + x, rho = 1, g = x on [0, 1]: L = 3/2, the rescaling
        // derivative is (1/L) integral x = 1/3, and the conserving part is
        // x - (1 + x)/3.
        let grid = unit_grid(200);
        let rho = Field::constant(&grid, 1.0).unwrap();
        let h = Field::from_fn(&grid, |x| 1.0 + x).unwrap();
        let g = Field::from_fn(&grid, |x| x).unwrap();
        let l = KTarget::new(1.5).unwrap();
        let split = l_split(&g, &rho, &h, &l).unwrap();
        assert!((split.norm - 1.5).abs() < 1e-12);
        assert!((split.shape_part - 1.0 / 3.0).abs() < 1e-4);
        let expected = Field::from_fn(&grid, |x| x - (1.0 + x) / 3.0).unwrap();
        assert!(split.n_part.max_abs_diff(&expected).unwrap() < 1e-4);

        let rebuilt = split
            .n_part
            .zip_map(&h, |npv, hv| npv + hv * split.shape_part)
            .unwrap();
        assert!(rebuilt.max_abs_diff(&g).unwrap() < 1e-12);
    }

    #[test]
    fn weighted_split_normalizes_the_l_shape() {
        let grid = unit_grid(90);
        let rho = Field::from_fn(&grid, |x| 1.2 + 0.4 * (2.0 * PI * x).cos()).unwrap();
        let h = Field::from_fn(&grid, |x| 2.0 - x).unwrap();
        let weighted = rho.zip_map(&h, |r, hv| hv * r).unwrap();
        let l = KTarget::new(weighted.integrate()).unwrap();
        let split = l_split(&Field::constant(&grid, 1.0).unwrap(), &rho, &h, &l).unwrap();
        // l = rho / norm; integral h l must be 1.
        let lf = rho.scale(1.0 / split.norm).unwrap();
        let total = lf.zip_map(&h, |a, b| a * b).unwrap().integrate();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn weighted_split_with_unit_profile_reduces_to_plain_split() {
        let grid = unit_grid(70);
        let rho = Field::from_fn(&grid, |x| 1.0 + 0.25 * (2.0 * PI * x).sin()).unwrap();
        let g = Field::from_fn(&grid, |x| 0.3 + x).unwrap();
        let h = Field::constant(&grid, 1.0).unwrap();
        let l = KTarget::new(rho.integrate()).unwrap();
        let a = l_split(&g, &rho, &h, &l).unwrap();
        let b = shape_split(&g, &rho).unwrap();
        assert!((a.shape_part - b.shape_part).abs() < 1e-12);
        assert!(a.n_part.max_abs_diff(&b.n_part).unwrap() < 1e-12);
    }

    #[test]
    fn weighted_split_rejects_off_target_fields() {
        let grid = unit_grid(40);
        let rho = Field::constant(&grid, 1.0).unwrap();
        let h = Field::from_fn(&grid, |x| 1.0 + x).unwrap();
        let g = Field::constant(&grid, 1.0).unwrap();
        let l = KTarget::new(2.0).unwrap();
        assert!(matches!(
            l_split(&g, &rho, &h, &l),
            Err(Error::ConstraintMismatch { .. })
        ));
    }

    #[test]
    fn two_routes_to_the_conserving_derivative_agree() {
        // A = integral rho^2 at rho = 2x + 1 (N = 2): both routes give
        // 8x - 14/3 after scaling by N.
        let grid = unit_grid(200);
        let rho = Field::from_fn(&grid, |x| 2.0 * x + 1.0).unwrap();
        let a = Functional::square();
        assert!(shape_route_residual(&a, &rho).unwrap() < 1e-5);

        let split = shape_split(&a.gradient(&rho).unwrap(), &rho).unwrap();
        let scaled = split.n_part.scale(split.norm).unwrap();
        let expected = Field::from_fn(&grid, |x| 8.0 * x - 14.0 / 3.0).unwrap();
        assert!(scaled.max_abs_diff(&expected).unwrap() < 1e-3);
    }

    #[test]
    fn linear_functional_routes_agree() {
        let grid = unit_grid(160);
        let rho = Field::from_fn(&grid, |x| 1.0 + 0.5 * (2.0 * PI * x).sin()).unwrap();
        let a = Functional::linear("linear-cos", |x| (2.0 * PI * x).cos());
        assert!(shape_route_residual(&a, &rho).unwrap() < 1e-6);
    }

    #[test]
    fn constant_field_routes_are_trivial() {
        let grid = unit_grid(50);
        let rho = Field::constant(&grid, 1.5).unwrap();
        let a = Functional::square();
        assert!(shape_route_residual(&a, &rho).unwrap() < 1e-8);
        let split = shape_split(&a.gradient(&rho).unwrap(), &rho).unwrap();
        assert!(split.n_part.max_abs() < 1e-12);
    }
}
