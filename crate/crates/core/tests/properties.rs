//! Randomized structural properties over arbitrary bounded node values,
//! complementing the identity suite's smooth profiles: the algebraic
//! identities are exact rearrangements of finite sums, so they must hold at
//! rounding level for rough fields too.

use approx::assert_relative_eq;
use kfunc_core::{
    extend, k_derivative, k_value, project_change, shape_split, u_derivative, ConstraintSpec,
    Field, Grid, KTarget, WeightChoice,
};
use proptest::collection::vec;
use proptest::prelude::*;

fn grid(n: usize) -> Grid {
    Grid::periodic(n, 1.0).unwrap()
}

fn builtins() -> Vec<ConstraintSpec> {
    vec![
        ConstraintSpec::identity(),
        ConstraintSpec::power(2.0).unwrap(),
        ConstraintSpec::exponential(),
        ConstraintSpec::weighted_linear(|x| 1.0 + x),
    ]
}

/// Node values comfortably inside every builtin constraint domain.
fn positive_nodes(n: usize) -> impl Strategy<Value = Vec<f64>> {
    vec(0.2f64..3.0, n)
}

fn signed_nodes(n: usize) -> impl Strategy<Value = Vec<f64>> {
    vec(-2.0f64..2.0, n)
}

/// Field on the constraint set of its own measured target.
fn on_set(grid: &Grid, values: &[f64], c: &ConstraintSpec) -> (Field, KTarget) {
    let raw = Field::from_values(grid, values.to_vec()).unwrap();
    let k = KTarget::new(k_value(&raw, c).unwrap()).unwrap();
    (extend(&raw, c, &k).unwrap(), k)
}

proptest! {
    #[test]
    fn inner_product_is_symmetric_and_bilinear(
        (a, b, d, c) in (8usize..48).prop_flat_map(|n| {
            (signed_nodes(n), signed_nodes(n), signed_nodes(n), -3.0f64..3.0)
        })
    ) {
        let grid = grid(a.len());
        let a = Field::from_values(&grid, a).unwrap();
        let b = Field::from_values(&grid, b).unwrap();
        let d = Field::from_values(&grid, d).unwrap();

        assert_relative_eq!(
            a.inner(&b).unwrap(),
            b.inner(&a).unwrap(),
            epsilon = 1e-13,
            max_relative = 1e-12
        );

        let lhs = a.add_scaled(c, &b).unwrap().inner(&d).unwrap();
        let rhs = a.inner(&d).unwrap() + c * b.inner(&d).unwrap();
        assert_relative_eq!(lhs, rhs, epsilon = 1e-12, max_relative = 1e-11);
    }

    #[test]
    fn split_reconstruction_is_exact(
        (rho, g) in (8usize..48).prop_flat_map(|n| (positive_nodes(n), signed_nodes(n)))
    ) {
        let grid = grid(rho.len());
        let rho = Field::from_values(&grid, rho).unwrap();
        let g = Field::from_values(&grid, g).unwrap();
        let split = shape_split(&g, &rho).unwrap();
        let rebuilt = split.n_part.map(|v| v + split.shape_part).unwrap();
        let tol = 1e-12 * (1.0 + split.shape_part.abs() + g.max_abs());
        prop_assert!(rebuilt.max_abs_diff(&g).unwrap() <= tol);
    }

    #[test]
    fn projection_annihilates_the_constraint_direction(
        (rho, delta) in (8usize..48).prop_flat_map(|n| (positive_nodes(n), signed_nodes(n)))
    ) {
        let grid = grid(rho.len());
        for c in builtins() {
            let (rho, k) = on_set(&grid, &rho, &c);
            let delta = Field::from_values(&grid, delta.clone()).unwrap();
            let projected = project_change(&delta, &rho, &c, &k, &WeightChoice::FOfRho).unwrap();
            let fp = c.f_prime_values(&rho).unwrap();
            let mut leak = 0.0;
            let mut scale = 0.0;
            for ((w, p), d) in grid.weights().iter().zip(&fp).zip(projected.values()) {
                leak += w * p * d;
                scale += (w * p * d).abs();
            }
            prop_assert!(
                leak.abs() <= 1e-13 + 1e-12 * scale,
                "{}: leak {leak:.3e} at scale {scale:.3e}",
                c.name()
            );
        }
    }

    #[test]
    fn conserving_derivative_ignores_density_direction_shifts(
        (rho, g, mu) in (8usize..48).prop_flat_map(|n| {
            (positive_nodes(n), signed_nodes(n), -10.0f64..10.0)
        })
    ) {
        let grid = grid(rho.len());
        for c in builtins() {
            let (rho, k) = on_set(&grid, &rho, &c);
            let g = Field::from_values(&grid, g.clone()).unwrap();
            let fp = Field::from_values(&grid, c.f_prime_values(&rho).unwrap()).unwrap();
            let base = k_derivative(&g, &rho, &c, &k).unwrap();
            let shifted = k_derivative(&g.add_scaled(mu, &fp).unwrap(), &rho, &c, &k).unwrap();
            let tol = 1e-12 * (1.0 + g.max_abs() + mu.abs() * fp.max_abs());
            prop_assert!(
                base.max_abs_diff(&shifted).unwrap() <= tol,
                "{} at mu {mu}",
                c.name()
            );
        }
    }

    #[test]
    fn extension_lands_on_the_target(
        (rho, factor) in (8usize..48).prop_flat_map(|n| (positive_nodes(n), 0.5f64..2.0))
    ) {
        let grid = grid(rho.len());
        for c in builtins() {
            let raw = Field::from_values(&grid, rho.clone()).unwrap();
            // Scaling the measured value keeps the target attainable.
            let k = KTarget::new(factor * k_value(&raw, &c).unwrap()).unwrap();
            let lifted = extend(&raw, &c, &k).unwrap();
            let got = k_value(&lifted, &c).unwrap();
            prop_assert!(
                (got - k.value()).abs() <= 1e-11 * (1.0 + k.value().abs()),
                "{}: {got} vs {}",
                c.name(),
                k.value()
            );
        }
    }

    #[test]
    fn point_weight_pins_the_chosen_node(
        (rho, g, pick) in (8usize..48).prop_flat_map(|n| {
            (positive_nodes(n), signed_nodes(n), 0..n)
        })
    ) {
        let grid = grid(rho.len());
        for c in builtins() {
            let rho = Field::from_values(&grid, rho.clone()).unwrap();
            let g = Field::from_values(&grid, g.clone()).unwrap();
            let out = u_derivative(&g, &rho, &c, &WeightChoice::Point(pick)).unwrap();
            let tol = 1e-12 * (1.0 + g.max_abs());
            prop_assert!(
                out.values()[pick].abs() <= tol,
                "{}: residual {:.3e} at node {pick}",
                c.name(),
                out.values()[pick]
            );
        }
    }
}
