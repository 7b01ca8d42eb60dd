//! Constraint densities and the degree-zero extension map.
//!
//! A constraint fixes the integral `K[rho] = integral f(x, rho(x)) dx`. The
//! extension map sends an arbitrary admissible field to the unique member of
//! its deformation fiber that satisfies the constraint exactly:
//!
//! ```text
//! rho0 = f_inv( (K / K[rho]) * f(rho) )
//! ```
//!
//! Extension is idempotent, constant on fibers `f_inv(lambda f(rho))`, and
//! reproduces the target `K` to rounding, because the scale is applied to
//! the constraint density itself rather than to the field.

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};

type PointwiseFn = Box<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Open interval, possibly unbounded. Used for both the admissible field
/// values and the range of the constraint density.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub const fn all() -> Self {
        Interval {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        }
    }

    pub const fn positive() -> Self {
        Interval {
            lo: 0.0,
            hi: f64::INFINITY,
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        v.is_finite() && v > self.lo && v < self.hi
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }
}

/// Differentiable, invertible-in-`rho` constraint density `f(x, rho)`.
///
/// The three closures must satisfy `f_inv(x, f(x, rho)) = rho` on
/// `rho_domain` and `d/d rho f(x, rho) != 0` there; those are the properties
/// every operator in this crate leans on when it divides by `f'` or pulls a
/// scaled density back through `f_inv`.
pub struct ConstraintSpec {
    name: String,
    f: PointwiseFn,
    f_prime: PointwiseFn,
    f_inv: PointwiseFn,
    rho_domain: Interval,
    f_range: Interval,
}

impl ConstraintSpec {
    pub fn new(
        name: impl Into<String>,
        f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        f_prime: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        f_inv: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        rho_domain: Interval,
        f_range: Interval,
    ) -> Self {
        ConstraintSpec {
            name: name.into(),
            f: Box::new(f),
            f_prime: Box::new(f_prime),
            f_inv: Box::new(f_inv),
            rho_domain,
            f_range,
        }
    }

    /// `f(rho) = rho`: conserved particle number / total mass.
    pub fn identity() -> Self {
        Self::new(
            "identity",
            |_, r| r,
            |_, _| 1.0,
            |_, y| y,
            Interval::all(),
            Interval::all(),
        )
    }

    /// `f(rho) = rho^p` on positive fields, `p > 0`.
    pub fn power(p: f64) -> Result<Self> {
        if !p.is_finite() || p <= 0.0 {
            return Err(Error::Evaluation {
                label: "power".into(),
                reason: format!("exponent must be positive and finite, got {p}"),
            });
        }
        Ok(Self::new(
            format!("power-{p}"),
            move |_, r| r.powf(p),
            move |_, r| p * r.powf(p - 1.0),
            move |_, y| y.powf(1.0 / p),
            Interval::positive(),
            Interval::positive(),
        ))
    }

    /// `f(rho) = exp(rho)`.
    pub fn exponential() -> Self {
        Self::new(
            "exp",
            |_, r| r.exp(),
            |_, r| r.exp(),
            |_, y| y.ln(),
            Interval::all(),
            Interval::positive(),
        )
    }

    /// `f(x, rho) = h(x) * rho` with a fixed positive weight profile `h`.
    pub fn weighted_linear(h: impl Fn(f64) -> f64 + Send + Sync + Clone + 'static) -> Self {
        let hf = h.clone();
        let hp = h.clone();
        Self::new(
            "weighted-linear",
            move |x, r| hf(x) * r,
            move |x, _| hp(x),
            move |x, y| y / h(x),
            Interval::all(),
            Interval::all(),
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn rho_domain(&self) -> Interval {
        self.rho_domain
    }

    pub fn f_range(&self) -> Interval {
        self.f_range
    }

    pub fn f(&self, x: f64, rho: f64) -> f64 {
        (self.f)(x, rho)
    }

    pub fn f_prime(&self, x: f64, rho: f64) -> f64 {
        (self.f_prime)(x, rho)
    }

    pub fn f_inv(&self, x: f64, y: f64) -> f64 {
        (self.f_inv)(x, y)
    }

    /// Rejects the first node whose value leaves the admissible domain.
    pub fn check_domain(&self, rho: &Field) -> Result<()> {
        for (node, &value) in rho.values().iter().enumerate() {
            if !self.rho_domain.contains(value) {
                return Err(Error::DomainViolation {
                    constraint: self.name.clone(),
                    node,
                    value,
                });
            }
        }
        Ok(())
    }

    /// `f(x_i, rho_i)` for all nodes, after the domain check.
    pub fn f_values(&self, rho: &Field) -> Result<Vec<f64>> {
        self.check_domain(rho)?;
        Ok(rho
            .grid()
            .nodes()
            .iter()
            .zip(rho.values())
            .map(|(&x, &r)| (self.f)(x, r))
            .collect())
    }

    /// `f'(x_i, rho_i)` for all nodes; fails with the node index if the
    /// derivative vanishes anywhere (the operators divide by it).
    pub fn f_prime_values(&self, rho: &Field) -> Result<Vec<f64>> {
        self.check_domain(rho)?;
        let mut out = Vec::with_capacity(rho.len());
        for (node, (&x, &r)) in rho.grid().nodes().iter().zip(rho.values()).enumerate() {
            let fp = (self.f_prime)(x, r);
            if fp == 0.0 || !fp.is_finite() {
                return Err(Error::ZeroFPrime {
                    constraint: self.name.clone(),
                    node,
                });
            }
            out.push(fp);
        }
        Ok(out)
    }

    /// Worst-case round-trip error `max_i |f_inv(x_i, f(x_i, rho_i)) - rho_i|`
    /// over the given probe field. Near zero for an honest spec; the verify
    /// suite runs this over sampled fields for every built-in constraint.
    pub fn invertibility_residual(&self, rho: &Field) -> Result<f64> {
        self.check_domain(rho)?;
        let mut worst = 0.0f64;
        for (&x, &r) in rho.grid().nodes().iter().zip(rho.values()) {
            let back = (self.f_inv)(x, (self.f)(x, r));
            worst = worst.max((back - r).abs());
        }
        Ok(worst)
    }

    /// Attainable range of `integral f(rho)` over admissible fields: the
    /// `f_range` scaled by the domain length.
    pub fn attainable_k(&self, grid: &Grid) -> Interval {
        let scale = grid.length();
        Interval {
            lo: self.f_range.lo * scale,
            hi: self.f_range.hi * scale,
        }
    }
}

impl std::fmt::Debug for ConstraintSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ConstraintSpec")
            .field("name", &self.name)
            .field("rho_domain", &self.rho_domain)
            .field("f_range", &self.f_range)
            .finish()
    }
}

/// Target value for the conserved integral, together with the tolerance used
/// to decide whether a field sits on the constraint set.
#[derive(Clone, Copy, Debug)]
pub struct KTarget {
    value: f64,
    tol: f64,
}

/// Default relative tolerance for constraint-set membership checks.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

impl KTarget {
    pub fn new(value: f64) -> Result<Self> {
        if !value.is_finite() || value == 0.0 {
            return Err(Error::ZeroK { value });
        }
        Ok(KTarget {
            value,
            tol: MEMBERSHIP_TOL,
        })
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn tolerance(&self) -> f64 {
        self.tol
    }

    /// Fails unless the target lies in the attainable range of the
    /// constraint over the grid.
    pub fn validate_attainable(&self, c: &ConstraintSpec, grid: &Grid) -> Result<()> {
        let range = c.attainable_k(grid);
        if range.contains(self.value) {
            Ok(())
        } else {
            Err(Error::UnattainableK {
                value: self.value,
                lo: range.lo,
                hi: range.hi,
            })
        }
    }

    /// Membership check: `|k_value(rho) - K| <= tol * max(1, |K|, S)` where
    /// `S = sum_i w_i |f(x_i, rho_i)|`. The `S` floor matters when the
    /// conserved integral is a small difference of large per-node terms;
    /// quadrature rounding alone then exceeds any absolute tolerance.
    /// Returns the measured value so callers can report it.
    pub fn check_member(&self, rho: &Field, c: &ConstraintSpec) -> Result<f64> {
        let actual = k_value(rho, c)?;
        let scale: f64 = rho
            .grid()
            .weights()
            .iter()
            .zip(&c.f_values(rho)?)
            .map(|(w, fv)| w * fv.abs())
            .sum();
        let diff = (actual - self.value).abs();
        if diff <= self.tol * self.value.abs().max(1.0).max(scale) {
            Ok(actual)
        } else {
            Err(Error::ConstraintMismatch {
                expected: self.value,
                actual,
                diff,
                tol: self.tol,
            })
        }
    }
}

/// Conserved integral `K[rho] = sum_i w_i f(x_i, rho_i)`.
pub fn k_value(rho: &Field, c: &ConstraintSpec) -> Result<f64> {
    let fv = c.f_values(rho)?;
    Ok(rho
        .grid()
        .weights()
        .iter()
        .zip(&fv)
        .map(|(w, q)| w * q)
        .sum())
}

/// Degree-zero extension onto the constraint set.
///
/// Scales the constraint density by `K / K[rho]` and pulls the result back
/// through `f_inv`. The output satisfies `k_value == K` to rounding; inputs
/// already on the constraint set come back unchanged.
pub fn extend(rho: &Field, c: &ConstraintSpec, k: &KTarget) -> Result<Field> {
    let fv = c.f_values(rho)?;
    let weights = rho.grid().weights();
    let denom: f64 = weights.iter().zip(&fv).map(|(w, q)| w * q).sum();
    let scale_floor: f64 = weights
        .iter()
        .zip(&fv)
        .map(|(w, q)| w * q.abs())
        .sum::<f64>()
        * 1e-13;
    if !denom.is_finite() || denom.abs() <= scale_floor {
        return Err(Error::ZeroDenominator {
            constraint: c.name().to_string(),
        });
    }
    let s = k.value() / denom;
    let mut out = Vec::with_capacity(rho.len());
    for (node, (&x, &q)) in rho.grid().nodes().iter().zip(&fv).enumerate() {
        let y = s * q;
        if !c.f_range().contains(y) {
            return Err(Error::RangeViolation {
                constraint: c.name().to_string(),
                node,
                value: y,
            });
        }
        out.push(c.f_inv(x, y));
    }
    Field::from_values(rho.grid(), out)
}

/// The deformed straight line through `rho` in direction `delta`:
/// `extend(rho + eps * delta)`. Every point of the path sits on the
/// constraint set exactly, which is what makes directional derivatives
/// along it constraint-conserving.
pub fn deformed_path(
    rho: &Field,
    delta: &Field,
    eps: f64,
    c: &ConstraintSpec,
    k: &KTarget,
) -> Result<Field> {
    extend(&rho.add_scaled(eps, delta)?, c, k)
}
