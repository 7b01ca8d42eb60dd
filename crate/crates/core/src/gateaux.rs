//! Directional derivatives along deformed, constraint-conserving paths.
//!
//! The straight line `rho + eps * delta` leaves the constraint set for
//! generic directions; composing it with the extension retraction gives a
//! path that conserves the constraint at every `eps`. Differentiating a
//! functional along that path is the constrained directional derivative,
//! and it must agree with pairing the constraint-conserving gradient
//! against `delta`:
//!
//! ```text
//! d/d eps A[extend(rho + eps delta)] |_0  =  inner(k_derivative(grad A), delta)
//! ```
//!
//! for arbitrary `delta`, because the renormalizing path absorbs the
//! constraint-violating component. The probes here realize the `eps -> 0`
//! limit with central differences on a decreasing schedule plus Richardson
//! extrapolation, never a single step: a lone finite `eps` would silently
//! hide path-curvature error.

use crate::constraint::{deformed_path, extend, ConstraintSpec, KTarget};
use crate::error::{Error, Result};
use crate::functionals::Functional;
use crate::grid::{fd_gradient, Field, DEFAULT_FD_STEP};
use crate::kderiv::{k_derivative, project_change, WeightChoice};

/// Schedule and convergence tolerance for a directional probe.
#[derive(Clone, Debug)]
pub struct ProbeOptions {
    /// Strictly decreasing positive steps; at least two.
    pub eps_schedule: Vec<f64>,
    /// Relative agreement required between the two finest estimates.
    pub rel_tol: f64,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        ProbeOptions {
            eps_schedule: vec![1e-3, 5e-4],
            rel_tol: 1e-6,
        }
    }
}

impl ProbeOptions {
    fn validate(&self) -> Result<()> {
        let s = &self.eps_schedule;
        if s.len() < 2 || s.iter().any(|&e| !e.is_finite() || e <= 0.0) {
            return Err(Error::BadEpsSchedule);
        }
        if s.windows(2).any(|p| p[1] >= p[0]) {
            return Err(Error::BadEpsSchedule);
        }
        Ok(())
    }
}

/// Outcome of a directional probe: one central-difference estimate per
/// scheduled `eps`, the Richardson extrapolation of the two finest, and a
/// convergence flag.
#[derive(Clone, Debug)]
pub struct PathProbe {
    eps_schedule: Vec<f64>,
    estimates: Vec<f64>,
    value: f64,
    converged: bool,
    last_diff: f64,
    rel_tol: f64,
    path_ratio: f64,
}

impl PathProbe {
    pub fn eps_schedule(&self) -> &[f64] {
        &self.eps_schedule
    }

    pub fn estimates(&self) -> &[f64] {
        &self.estimates
    }

    /// Extrapolated derivative (fourth-order in the finest step).
    pub fn value(&self) -> f64 {
        self.value
    }

    /// Whether the two finest estimates agree to the configured relative
    /// tolerance.
    pub fn converged(&self) -> bool {
        self.converged
    }

    /// Gap between the two finest estimates, the quantity the convergence
    /// flag compares against the relative tolerance.
    pub fn last_diff(&self) -> f64 {
        self.last_diff
    }

    /// Boundedness diagnostic: the largest observed
    /// `||deformed(eps) - rho||_w2 / eps` over the schedule. Stays O(1)
    /// when the deformed path is differentiable at `eps = 0`.
    pub fn path_ratio(&self) -> f64 {
        self.path_ratio
    }

    pub fn require_converged(&self) -> Result<&Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NotConverged {
                diff: self.last_diff,
                tol: self.rel_tol,
            })
        }
    }
}

/// Constrained directional derivative of `a` at `rho` along `delta`, with
/// the default two-point schedule.
pub fn directional(
    a: &Functional,
    rho: &Field,
    delta: &Field,
    c: &ConstraintSpec,
    k: &KTarget,
) -> Result<PathProbe> {
    directional_with(a, rho, delta, c, k, &ProbeOptions::default())
}

/// As [`directional`], with an explicit schedule.
pub fn directional_with(
    a: &Functional,
    rho: &Field,
    delta: &Field,
    c: &ConstraintSpec,
    k: &KTarget,
    opts: &ProbeOptions,
) -> Result<PathProbe> {
    opts.validate()?;
    k.check_member(rho, c)?;

    let at = |eps: f64| -> Result<(f64, f64)> {
        let wrap = |e: Error| Error::PathDomainViolation {
            eps,
            source: Box::new(e),
        };
        let point = deformed_path(rho, delta, eps, c, k).map_err(wrap)?;
        let value = a.value(&point).map_err(wrap)?;
        let dist = point.sub(rho).map_err(wrap)?.weighted_norm();
        Ok((value, dist))
    };

    let mut estimates = Vec::with_capacity(opts.eps_schedule.len());
    let mut path_ratio = 0.0f64;
    for &eps in &opts.eps_schedule {
        let (up, dist) = at(eps)?;
        let (down, _) = at(-eps)?;
        estimates.push((up - down) / (2.0 * eps));
        path_ratio = path_ratio.max(dist / eps);
    }

    let m = estimates.len();
    let (prev, last) = (estimates[m - 2], estimates[m - 1]);
    // The schedule halves by default, so the eps^2 error term cancels in
    // (4*last - prev)/3; for other ratios this is still a consistent
    // second-order combination of the two finest estimates.
    let value = (4.0 * last - prev) / 3.0;
    let last_diff = (last - prev).abs();
    let converged = last_diff <= opts.rel_tol * value.abs().max(1.0);

    Ok(PathProbe {
        eps_schedule: opts.eps_schedule.clone(),
        estimates,
        value,
        converged,
        last_diff,
        rel_tol: opts.rel_tol,
        path_ratio,
    })
}

/// Residual of the directional-derivative identity:
/// `|directional(a, rho, delta) - inner(k_derivative(grad a), delta)|`.
///
/// Holds for arbitrary directions; pass `projected = true` to first strip
/// the constraint-violating component of `delta` and test the literal
/// conserving-change statement.
pub fn directional_residual(
    a: &Functional,
    rho: &Field,
    delta: &Field,
    c: &ConstraintSpec,
    k: &KTarget,
    projected: bool,
) -> Result<f64> {
    directional_residual_with(a, rho, delta, c, k, projected, &ProbeOptions::default())
}

/// As [`directional_residual`], with explicit probe options. Sweeps over
/// rough directions may need a looser convergence gate than the default;
/// the residual itself stays the quantity under test.
pub fn directional_residual_with(
    a: &Functional,
    rho: &Field,
    delta: &Field,
    c: &ConstraintSpec,
    k: &KTarget,
    projected: bool,
    opts: &ProbeOptions,
) -> Result<f64> {
    let delta = if projected {
        project_change(delta, rho, c, k, &WeightChoice::FOfRho)?
    } else {
        delta.clone()
    };
    let probe = directional_with(a, rho, &delta, c, k, opts)?;
    probe.require_converged()?;
    let kd = k_derivative(&a.gradient(rho)?, rho, c, k)?;
    Ok((probe.value() - kd.inner(&delta)?).abs())
}

/// Two residuals of the composition (chain-rule) identity at `g_field`.
#[derive(Clone, Copy, Debug)]
pub struct ChainRuleCheck {
    /// Max-norm gap between the finite-difference gradient of
    /// `g -> a[extend(g)]` and the constraint-conserving derivative of `a`
    /// at the extension point.
    pub residual: f64,
    /// Change of the constrained derivative under a `mu * f'` shift of the
    /// inner gradient; zero in exact arithmetic.
    pub mu_shift_residual: f64,
}

/// Verifies that differentiating through the extension map lands on the
/// constraint-conserving derivative.
///
/// Route one differentiates the composed functional `g -> a[extend(g)]`
/// numerically at `g_field`; route two evaluates
/// `k_derivative(grad a, extend(g_field))` directly. On the constraint set
/// the two coincide; the `mu_probe` shift exercises the insensitivity of
/// route two to the component plain differentiation cannot determine.
pub fn chain_rule_residual(
    a: &Functional,
    g_field: &Field,
    c: &ConstraintSpec,
    k: &KTarget,
    mu_probe: f64,
) -> Result<ChainRuleCheck> {
    let composed = fd_gradient(|g| a.value(&extend(g, c, k)?), g_field, DEFAULT_FD_STEP)?;

    let rho_star = extend(g_field, c, k)?;
    let grad = a.gradient(&rho_star)?;
    let direct = k_derivative(&grad, &rho_star, c, k)?;

    let fp = Field::from_values(rho_star.grid(), c.f_prime_values(&rho_star)?)?;
    let shifted = k_derivative(&grad.add_scaled(mu_probe, &fp)?, &rho_star, c, k)?;

    Ok(ChainRuleCheck {
        residual: composed.max_abs_diff(&direct)?,
        mu_shift_residual: direct.max_abs_diff(&shifted)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraint::k_value;
    use crate::grid::Grid;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn unit_grid(n: usize) -> Grid {
        Grid::periodic(n, 1.0).unwrap()
    }

    #[test]
    fn square_functional_along_sine_direction() {
        // d/d eps of integral rho^2 along sin(2 pi x) at rho = x + 1/2 with
        // unit mass equals integral (2x - 7/6) sin(2 pi x) = -1/pi.
        let grid = unit_grid(200);
        let rho = Field::from_fn(&grid, |x| x + 0.5).unwrap();
        let delta = Field::from_fn(&grid, |x| (2.0 * PI * x).sin()).unwrap();
        let a = Functional::square();
        let c = ConstraintSpec::identity();
        let k = KTarget::new(1.0).unwrap();
        let probe = directional(&a, &rho, &delta, &c, &k).unwrap();
        assert!(probe.converged());
        let exact = -1.0 / PI;
        assert!(
            (probe.value() - exact).abs() < 1e-4,
            "probe {} vs {exact}",
            probe.value()
        );
        assert!(probe.path_ratio() < 10.0, "path ratio {}", probe.path_ratio());

        let r = directional_residual(&a, &rho, &delta, &c, &k, false).unwrap();
        assert!(r < 1e-4, "identity residual {r}");
    }

    #[test]
    fn functions_of_the_constraint_are_flat_along_the_path() {
        let grid = unit_grid(100);
        let rho = Field::from_fn(&grid, |x| 1.0 + 0.3 * (2.0 * PI * x).sin()).unwrap();
        let c = Arc::new(ConstraintSpec::exponential());
        let k = KTarget::new(k_value(&rho, &c).unwrap()).unwrap();
        let a = Functional::of_k("k-sin", |k| k.sin(), |k| k.cos(), Arc::clone(&c));
        let delta = Field::from_fn(&grid, |x| x - 0.2).unwrap();
        let probe = directional(&a, &rho, &delta, &c, &k).unwrap();
        assert!(probe.value().abs() < 1e-8, "value {}", probe.value());
    }

    #[test]
    fn zero_direction_gives_zero() {
        let grid = unit_grid(64);
        let rho = Field::constant(&grid, 1.0).unwrap();
        let delta = Field::constant(&grid, 0.0).unwrap();
        let a = Functional::square();
        let c = ConstraintSpec::identity();
        let k = KTarget::new(1.0).unwrap();
        let probe = directional(&a, &rho, &delta, &c, &k).unwrap();
        assert_eq!(probe.value(), 0.0);
        assert!(probe.converged());
    }

    #[test]
    fn pure_scaling_direction_is_annihilated() {
        let grid = unit_grid(150);
        let rho = Field::from_fn(&grid, |x| x + 0.5).unwrap();
        let a = Functional::square();
        let c = ConstraintSpec::identity();
        let k = KTarget::new(1.0).unwrap();
        let probe = directional(&a, &rho, &rho, &c, &k).unwrap();
        assert!(probe.value().abs() < 1e-8);
        let kd = k_derivative(&a.gradient(&rho).unwrap(), &rho, &c, &k).unwrap();
        assert!(kd.inner(&rho).unwrap().abs() < 1e-8);
    }

    #[test]
    fn identity_holds_for_composed_functionals() {
        let grid = unit_grid(120);
        let rho = Field::from_fn(&grid, |x| 1.2 + 0.4 * (2.0 * PI * x).cos()).unwrap();
        let c = Arc::new(ConstraintSpec::identity());
        let k = KTarget::new(k_value(&rho, &c).unwrap()).unwrap();
        let a = Functional::zero_hom_extension(Functional::quartic(), Arc::clone(&c), k);
        let delta = Field::from_fn(&grid, |x| (4.0 * PI * x).sin() + 0.1).unwrap();
        let r = directional_residual(&a, &rho, &delta, &c, &k, false).unwrap();
        assert!(r < 1e-6, "residual {r}");
        let r = directional_residual(&a, &rho, &delta, &c, &k, true).unwrap();
        assert!(r < 1e-6, "projected residual {r}");
    }

    #[test]
    fn conserving_directions_need_no_deformation_for_linear_constraints() {
        // f = h(x) rho: for directions with integral h delta = 0 the straight
        // path already conserves, so the deformed derivative equals the plain
        // one.
        let grid = unit_grid(96);
        let rho = Field::from_fn(&grid, |x| 1.0 + 0.2 * (2.0 * PI * x).sin()).unwrap();
        let c = ConstraintSpec::weighted_linear(|x| 1.0 + x);
        let k = KTarget::new(k_value(&rho, &c).unwrap()).unwrap();
        let raw = Field::from_fn(&grid, |x| (6.0 * PI * x).cos() + 0.4).unwrap();
        let delta = project_change(&raw, &rho, &c, &k, &WeightChoice::FOfRho).unwrap();

        let a = Functional::quartic();
        let deformed = directional(&a, &rho, &delta, &c, &k).unwrap();

        let opts = ProbeOptions::default();
        let mut plain = Vec::new();
        for &eps in &opts.eps_schedule {
            let up = a.value(&rho.add_scaled(eps, &delta).unwrap()).unwrap();
            let down = a.value(&rho.add_scaled(-eps, &delta).unwrap()).unwrap();
            plain.push((up - down) / (2.0 * eps));
        }
        let plain_value = (4.0 * plain[1] - plain[0]) / 3.0;
        assert!(
            (deformed.value() - plain_value).abs() < 1e-8,
            "deformed {} vs straight {plain_value}",
            deformed.value()
        );
    }

    #[test]
    fn estimates_converge_at_second_order() {
        let grid = unit_grid(80);
        let rho = Field::from_fn(&grid, |x| 1.3 + 0.5 * (2.0 * PI * x).sin()).unwrap();
        let c = ConstraintSpec::identity();
        let k = KTarget::new(k_value(&rho, &c).unwrap()).unwrap();
        let a = Functional::quartic();
        let delta = Field::from_fn(&grid, |x| (2.0 * PI * x).cos() + 0.6).unwrap();
        let opts = ProbeOptions {
            eps_schedule: vec![4e-3, 2e-3, 1e-3],
            rel_tol: 1e-6,
        };
        let probe = directional_with(&a, &rho, &delta, &c, &k, &opts).unwrap();
        let d = probe.value();
        let e = probe.estimates();
        let ratio = (e[0] - d) / (e[1] - d);
        assert!(
            (3.2..=4.8).contains(&ratio),
            "halving eps should quarter the error, got ratio {ratio}"
        );
    }

    #[test]
    fn domain_violations_on_the_path_carry_eps() {
        let grid = unit_grid(32);
        let rho = Field::constant(&grid, 1.0).unwrap();
        let delta = Field::constant(&grid, 2000.0).unwrap();
        let c = ConstraintSpec::power(2.0).unwrap();
        let k = KTarget::new(1.0).unwrap();
        let a = Functional::square();
        match directional(&a, &rho, &delta, &c, &k) {
            Err(Error::PathDomainViolation { eps, .. }) => assert_eq!(eps, -1e-3),
            other => panic!("expected path domain violation, got {other:?}"),
        }
    }

    #[test]
    fn unconverged_probes_are_reportable() {
        let grid = unit_grid(40);
        let rho = Field::from_fn(&grid, |x| 1.0 + 0.2 * (2.0 * PI * x).sin()).unwrap();
        let c = ConstraintSpec::identity();
        let k = KTarget::new(k_value(&rho, &c).unwrap()).unwrap();
        let a = Functional::quartic();
        let delta = Field::constant(&grid, 1.0).unwrap();
        let opts = ProbeOptions {
            eps_schedule: vec![1e-2, 5e-3],
            rel_tol: 0.0,
        };
        let probe = directional_with(&a, &rho, &delta, &c, &k, &opts).unwrap();
        assert!(!probe.converged());
        assert!(matches!(
            probe.require_converged(),
            Err(Error::NotConverged { .. })
        ));
    }

    #[test]
    fn schedules_are_validated() {
        let grid = unit_grid(16);
        let rho = Field::constant(&grid, 1.0).unwrap();
        let c = ConstraintSpec::identity();
        let k = KTarget::new(1.0).unwrap();
        let a = Functional::square();
        for schedule in [vec![1e-3], vec![1e-3, 1e-3], vec![5e-4, 1e-3], vec![1e-3, -1e-4]] {
            let opts = ProbeOptions {
                eps_schedule: schedule,
                rel_tol: 1e-6,
            };
            assert!(matches!(
                directional_with(&a, &rho, &rho, &c, &k, &opts),
                Err(Error::BadEpsSchedule)
            ));
        }
    }

    #[test]
    fn chain_rule_on_and_off_the_constraint_set() {
        let grid = unit_grid(200);
        let c = ConstraintSpec::identity();
        let k = KTarget::new(1.0).unwrap();
        let a = Functional::square();

        let on_set = Field::from_fn(&grid, |x| x + 0.5).unwrap();
        let check = chain_rule_residual(&a, &on_set, &c, &k, 3.0).unwrap();
        assert!(check.residual < 1e-5, "on-set residual {}", check.residual);
        assert!(check.mu_shift_residual < 1e-12);

        // Off the set the extension maps the constant 2 to the minimizer 1,
        // where both routes vanish.
        let off_set = Field::constant(&grid, 2.0).unwrap();
        let check = chain_rule_residual(&a, &off_set, &c, &k, -5.0).unwrap();
        assert!(check.residual < 1e-5, "off-set residual {}", check.residual);
        assert!(check.mu_shift_residual < 1e-12);
    }

    #[test]
    fn chain_rule_across_nonlinear_constraints() {
        let grid = unit_grid(64);
        let rho = Field::from_fn(&grid, |x| 1.1 + 0.3 * (2.0 * PI * x).sin()).unwrap();
        for c in [
            ConstraintSpec::power(2.0).unwrap(),
            ConstraintSpec::exponential(),
        ] {
            let k = KTarget::new(k_value(&rho, &c).unwrap()).unwrap();
            let on_set = extend(&rho, &c, &k).unwrap();
            let check = chain_rule_residual(&Functional::quartic(), &on_set, &c, &k, 1.5).unwrap();
            assert!(check.residual < 1e-5, "{}: {}", c.name(), check.residual);
            assert!(check.mu_shift_residual < 1e-12, "{}", c.name());
        }
    }
}
