//! Functionals of a field: evaluation, gradients, and the built-in catalog.
//!
//! A [`Functional`] is a scalar map on fields with an optional analytic
//! gradient; when no analytic form is attached, [`Functional::gradient`]
//! falls back to the central-difference oracle. Gradients are densities:
//! the discrete derivative `(1/w_i) dA/d rho_i`, so that
//! `dA = sum_i w_i g_i d rho_i` mirrors the continuum pairing.
//!
//! Composed functionals built from the constraint machinery (the
//! degree-zero extension) deliberately do not carry analytic gradients;
//! differentiating them numerically is what keeps the chain-rule checks
//! in `gateaux` independent of the identities they test.

use std::sync::Arc;

use crate::constraint::{extend, k_value, ConstraintSpec, KTarget};
use crate::error::{Error, Result};
use crate::grid::{fd_gradient, Field, DEFAULT_FD_STEP};

type ValueFn = Box<dyn Fn(&Field) -> Result<f64> + Send + Sync>;
type GradientFn = Box<dyn Fn(&Field) -> Result<Field> + Send + Sync>;

/// Declares that a functional is invariant (up to the stated degree) under
/// deformations `rho -> f_inv(lambda * f(rho))` of the named constraint:
/// `A[deformed] = lambda^degree * A[rho]`.
#[derive(Clone, Debug)]
pub struct HomogeneityMeta {
    pub constraint: String,
    pub degree: f64,
}

pub struct Functional {
    label: String,
    value: ValueFn,
    gradient: Option<GradientFn>,
    homogeneity: Option<HomogeneityMeta>,
}

impl Functional {
    pub fn new(
        label: impl Into<String>,
        value: impl Fn(&Field) -> Result<f64> + Send + Sync + 'static,
    ) -> Self {
        Functional {
            label: label.into(),
            value: Box::new(value),
            gradient: None,
            homogeneity: None,
        }
    }

    pub fn with_gradient(
        mut self,
        gradient: impl Fn(&Field) -> Result<Field> + Send + Sync + 'static,
    ) -> Self {
        self.gradient = Some(Box::new(gradient));
        self
    }

    pub fn with_homogeneity(mut self, constraint: impl Into<String>, degree: f64) -> Self {
        self.homogeneity = Some(HomogeneityMeta {
            constraint: constraint.into(),
            degree,
        });
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn value(&self, rho: &Field) -> Result<f64> {
        (self.value)(rho)
    }

    pub fn has_analytic_gradient(&self) -> bool {
        self.gradient.is_some()
    }

    pub fn homogeneity(&self) -> Option<&HomogeneityMeta> {
        self.homogeneity.as_ref()
    }

    /// Analytic gradient when attached, otherwise the finite-difference
    /// oracle at the default step.
    pub fn gradient(&self, rho: &Field) -> Result<Field> {
        match &self.gradient {
            Some(g) => g(rho),
            None => self.fd_gradient(rho, DEFAULT_FD_STEP),
        }
    }

    /// Central-difference gradient regardless of any analytic form; used to
    /// cross-check attached gradients.
    pub fn fd_gradient(&self, rho: &Field, delta0: f64) -> Result<Field> {
        fd_gradient(|f| self.value(f), rho, delta0)
    }

    /// `A[rho] = sum_i w_i a(x_i, rho_i)`, gradient density `da/d rho`.
    pub fn local_integral(
        label: impl Into<String>,
        a: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        da: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        let label = label.into();
        let value_label = label.clone();
        Functional::new(label.clone(), move |rho: &Field| {
            let mut total = 0.0;
            for (node, ((&x, &w), &r)) in rho
                .grid()
                .nodes()
                .iter()
                .zip(rho.grid().weights())
                .zip(rho.values())
                .enumerate()
            {
                let v = a(x, r);
                if !v.is_finite() {
                    return Err(Error::Evaluation {
                        label: value_label.clone(),
                        reason: format!("integrand not finite at node {node} (rho = {r})"),
                    });
                }
                total += w * v;
            }
            Ok(total)
        })
        .with_gradient(move |rho: &Field| rho.map_with_x(|x, r| da(x, r)))
    }

    /// `integral rho^2`.
    pub fn square() -> Self {
        Functional::local_integral("square", |_, r| r * r, |_, r| 2.0 * r)
            .with_homogeneity("power-2", 1.0)
    }

    /// `integral rho^4`.
    pub fn quartic() -> Self {
        Functional::local_integral("quartic", |_, r| r.powi(4), |_, r| 4.0 * r.powi(3))
    }

    /// `integral rho ln rho` on positive fields.
    pub fn entropy() -> Self {
        Functional::local_integral(
            "entropy",
            |_, r| if r > 0.0 { r * r.ln() } else { f64::NAN },
            |_, r| r.ln() + 1.0,
        )
    }

    /// `integral v(x) rho(x)`.
    pub fn linear(label: impl Into<String>, v: impl Fn(f64) -> f64 + Send + Sync + Clone + 'static) -> Self {
        let vg = v.clone();
        Functional::local_integral(label, move |x, r| v(x) * r, move |x, _| vg(x))
    }

    /// Forward-difference Dirichlet energy on a periodic grid:
    /// `sum_i w_i ((rho_{i+1} - rho_i) / h)^2` with cyclic indexing.
    pub fn gradient_square() -> Self {
        Functional::new("gradsq", |rho: &Field| {
            let grid = rho.grid();
            if !grid.is_periodic() {
                return Err(Error::PeriodicRequired);
            }
            let h = grid.spacing();
            let v = rho.values();
            let n = v.len();
            let mut total = 0.0;
            for i in 0..n {
                let d = (v[(i + 1) % n] - v[i]) / h;
                total += grid.weights()[i] * d * d;
            }
            Ok(total)
        })
        .with_gradient(|rho: &Field| {
            let grid = rho.grid();
            if !grid.is_periodic() {
                return Err(Error::PeriodicRequired);
            }
            let h = grid.spacing();
            let v = rho.values();
            let n = v.len();
            let values = (0..n)
                .map(|i| {
                    let lap = v[(i + 1) % n] - 2.0 * v[i] + v[(i + n - 1) % n];
                    -2.0 * lap / (h * h)
                })
                .collect();
            Field::from_values(grid, values)
        })
    }

    /// `A[rho] = b(K[rho])`: a function of the conserved integral alone.
    /// Gradient density `b'(K[rho]) * f'(rho)`.
    pub fn of_k(
        label: impl Into<String>,
        b: impl Fn(f64) -> f64 + Send + Sync + 'static,
        b_prime: impl Fn(f64) -> f64 + Send + Sync + 'static,
        c: Arc<ConstraintSpec>,
    ) -> Self {
        let cv = Arc::clone(&c);
        Functional::new(label, move |rho: &Field| Ok(b(k_value(rho, &cv)?)))
            .with_gradient(move |rho: &Field| {
                let scale = b_prime(k_value(rho, &c)?);
                rho.map_with_x(|x, r| scale * c.f_prime(x, r))
            })
    }

    /// Degree-zero extension of `a`: `A0[rho] = a[extend(rho, c, k)]`.
    ///
    /// Constant along deformation fibers by construction, hence homogeneous
    /// of degree zero for `c`. Its gradient is left to the
    /// finite-difference oracle.
    pub fn zero_hom_extension(a: Functional, c: Arc<ConstraintSpec>, k: KTarget) -> Self {
        let label = format!("{}@{}", a.label, c.name());
        let name = c.name().to_string();
        Functional::new(label, move |rho: &Field| a.value(&extend(rho, &c, &k)?))
            .with_homogeneity(name, 0.0)
    }

    /// `P[rho] / Q[rho]^2` with analytic quotient-rule gradient when both
    /// parts carry one.
    pub fn normalized_ratio(label: impl Into<String>, p: Functional, q: Functional) -> Self {
        let label = label.into();
        let p = Arc::new(p);
        let q = Arc::new(q);
        let (pv, qv) = (Arc::clone(&p), Arc::clone(&q));
        let value_label = label.clone();
        let has_gradients = p.has_analytic_gradient() && q.has_analytic_gradient();
        let mut out = Functional::new(label, move |rho: &Field| {
            let qs = qv.value(rho)?;
            if qs == 0.0 {
                return Err(Error::Evaluation {
                    label: value_label.clone(),
                    reason: "normalizer integral is zero".into(),
                });
            }
            Ok(pv.value(rho)? / (qs * qs))
        });
        if has_gradients {
            out = out.with_gradient(move |rho: &Field| {
                let ps = p.value(rho)?;
                let qs = q.value(rho)?;
                let gp = p.gradient(rho)?;
                let gq = q.gradient(rho)?;
                gp.scale(1.0 / (qs * qs))?
                    .add_scaled(-2.0 * ps / (qs * qs * qs), &gq)
            });
        }
        out
    }

    /// `integral rho^2 / (integral rho)^2`: invariant under uniform scaling
    /// of the field.
    pub fn shape_concentration() -> Self {
        Functional::normalized_ratio(
            "ratio-shape",
            Functional::square(),
            Functional::local_integral("mass", |_, r| r, |_, _| 1.0),
        )
        .with_homogeneity("identity", 0.0)
    }

    /// `integral rho^4 / (integral rho^2)^2`: invariant under deformations
    /// that rescale the squared density.
    pub fn square_concentration() -> Self {
        Functional::normalized_ratio("ratio-square", Functional::quartic(), Functional::square())
            .with_homogeneity("power-2", 0.0)
    }

    /// Pointwise sum `A + B`; analytic gradient only when both parts have one.
    pub fn add(self, other: Functional) -> Self {
        let label = format!("{}+{}", self.label, other.label);
        let both = self.has_analytic_gradient() && other.has_analytic_gradient();
        let a = Arc::new(self);
        let b = Arc::new(other);
        let (av, bv) = (Arc::clone(&a), Arc::clone(&b));
        let mut out =
            Functional::new(label, move |rho: &Field| Ok(av.value(rho)? + bv.value(rho)?));
        if both {
            out = out.with_gradient(move |rho: &Field| {
                a.gradient(rho)?.add_scaled(1.0, &b.gradient(rho)?)
            });
        }
        out
    }
}

impl std::fmt::Debug for Functional {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Functional")
            .field("label", &self.label)
            .field("analytic_gradient", &self.gradient.is_some())
            .field("homogeneity", &self.homogeneity)
            .finish()
    }
}
