//! The identity suite: every structural identity of the constrained
//! calculus, bound to an executable residual check with a pinned tolerance.
//!
//! Each case sweeps a small cross-product (built-in constraints, weight
//! choices, catalog functionals, seeded random fields) and reports its
//! worst residual. Identities that are finite sums rearranged on both
//! sides carry rounding-level tolerances (1e-12); identities with a
//! finite-difference or finite-eps side carry oracle-level tolerances
//! (1e-5 to 1e-6). The id list is pinned by [`REQUIRED_IDENTITIES`]; a
//! missing case is a test failure, not a silent gap.

use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::constraint::{deformed_path, extend, k_value, ConstraintSpec, Interval, KTarget};
use crate::decompose::{l_split, shape_route_residual, shape_split};
use crate::error::Result;
use crate::functionals::Functional;
use crate::gateaux::{chain_rule_residual, directional_residual_with, ProbeOptions};
use crate::grid::{Field, Grid};
use crate::kderiv::{
    homogeneity_residual, k_derivative, project_change, u_derivative, WeightChoice,
};
use crate::profiles::{smooth_direction, smooth_positive};

/// Ids the suite must cover; the coverage test pins this list.
pub const REQUIRED_IDENTITIES: &[&str] = &[
    "weight-normalization",
    "mu-shift-k-derivative",
    "mu-shift-u-derivative",
    "projection-annihilation",
    "projection-adjoint",
    "equal-on-set-derivatives",
    "constraint-functional-annihilation",
    "degree-zero-plain-derivative",
    "homogeneity-scaling",
    "homogeneity-average",
    "homogeneity-shifted-derivative",
    "extension-gradient-route",
    "chain-rule-composition",
    "chain-rule-mu-insensitivity",
    "extension-idempotence",
    "extension-fiber-invariance",
    "extension-target-exactness",
    "path-conservation",
    "shape-reconstruction",
    "shape-average",
    "shape-conserving-match",
    "shape-route-crosscheck",
    "l-shape-normalization",
    "l-split-reconstruction",
    "directional-inner-match",
    "constraint-invertibility",
];

/// Outcome of one identity case.
#[derive(Clone, Debug)]
pub struct CaseResult {
    pub id: &'static str,
    pub description: &'static str,
    /// Worst residual over the case's cross-product (NaN if the case
    /// errored before producing one).
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub error: Option<String>,
}

/// Full suite outcome.
#[derive(Clone, Debug)]
pub struct Report {
    pub seed: u64,
    pub grid_n: usize,
    pub cases: Vec<CaseResult>,
}

impl Report {
    pub fn all_passed(&self) -> bool {
        self.cases.iter().all(|c| c.passed)
    }

    pub fn failed_count(&self) -> usize {
        self.cases.iter().filter(|c| !c.passed).count()
    }
}

impl std::fmt::Display for Report {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let width = self
            .cases
            .iter()
            .map(|c| c.id.len())
            .max()
            .unwrap_or(8)
            .max("identity".len());
        writeln!(
            f,
            "{:<width$}  {:>12}  {:>9}  status",
            "identity", "residual", "tolerance"
        )?;
        for c in &self.cases {
            let status = if c.passed { "pass" } else { "FAIL" };
            match &c.error {
                Some(e) => writeln!(
                    f,
                    "{:<width$}  {:>12}  {:>9.1e}  {status} ({e})",
                    c.id, "error", c.tolerance
                )?,
                None => writeln!(
                    f,
                    "{:<width$}  {:>12.3e}  {:>9.1e}  {status}",
                    c.id, c.residual, c.tolerance
                )?,
            }
        }
        let failed = self.failed_count();
        if failed == 0 {
            write!(
                f,
                "all {} identities passed (seed {}, n {})",
                self.cases.len(),
                self.seed,
                self.grid_n
            )
        } else {
            write!(
                f,
                "{failed} of {} identities FAILED (seed {}, n {})",
                self.cases.len(),
                self.seed,
                self.grid_n
            )
        }
    }
}

struct Ctx {
    grid: Grid,
    seed: u64,
}

impl Ctx {
    fn rng(&self, salt: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ salt)
    }

    fn constraints(&self) -> Vec<Arc<ConstraintSpec>> {
        vec![
            Arc::new(ConstraintSpec::identity()),
            Arc::new(ConstraintSpec::power(2.0).expect("positive exponent")),
            Arc::new(ConstraintSpec::exponential()),
            Arc::new(ConstraintSpec::weighted_linear(|x| 1.0 + x)),
        ]
    }

    /// Constraints with x-independent densities; the lambda-scaling
    /// (homogeneity) cases are only meaningful for these.
    fn homogeneity_triples(&self) -> Vec<(Functional, Arc<ConstraintSpec>, f64)> {
        let identity = Arc::new(ConstraintSpec::identity());
        let power2 = Arc::new(ConstraintSpec::power(2.0).expect("positive exponent"));
        vec![
            (Functional::shape_concentration(), identity, 0.0),
            (Functional::square_concentration(), Arc::clone(&power2), 0.0),
            (Functional::square(), power2, 1.0),
        ]
    }

    fn catalog(&self) -> Vec<Functional> {
        vec![
            Functional::square(),
            Functional::quartic(),
            Functional::entropy(),
            Functional::linear("linear-sin", |x| (2.0 * std::f64::consts::PI * x).sin()),
            Functional::gradient_square(),
        ]
    }

    fn positive(&self, rng: &mut ChaCha8Rng) -> Result<Field> {
        smooth_positive(&self.grid, rng)
    }

    fn direction(&self, rng: &mut ChaCha8Rng) -> Result<Field> {
        smooth_direction(&self.grid, rng)
    }

    /// A random field retracted onto the constraint set of its own measured
    /// target, so membership holds to rounding.
    fn on_set(&self, c: &ConstraintSpec, rng: &mut ChaCha8Rng) -> Result<(Field, KTarget)> {
        let raw = self.positive(rng)?;
        let k = KTarget::new(k_value(&raw, c)?)?;
        Ok((extend(&raw, c, &k)?, k))
    }

    fn weight_choices(&self, rng: &mut ChaCha8Rng) -> Result<Vec<WeightChoice>> {
        let q = self.positive(rng)?;
        let i0 = rng.random_range(0..self.grid.n());
        Ok(vec![
            WeightChoice::FOfRho,
            WeightChoice::CustomQ(q),
            WeightChoice::Point(i0),
        ])
    }

    fn f_prime_field(&self, c: &ConstraintSpec, rho: &Field) -> Result<Field> {
        Field::from_values(&self.grid, c.f_prime_values(rho)?)
    }
}

type Runner = fn(&Ctx) -> Result<f64>;

struct Case {
    id: &'static str,
    description: &'static str,
    tolerance: f64,
    run: Runner,
}

fn weight_normalization(ctx: &Ctx) -> Result<f64> {
    let mut rng = ctx.rng(0x01);
    let mut worst = 0.0f64;
    for c in ctx.constraints() {
        let rho = ctx.positive(&mut rng)?;
        for w in ctx.weight_choices(&mut rng)? {
            let u = w.u_values(&rho, &c)?;
            let total: f64 = ctx
                .grid
                .weights()
                .iter()
                .zip(&u)
                .map(|(w, u)| w * u)
                .sum();
            worst = worst.max((total - 1.0).abs());
        }
    }
    Ok(worst)
}

fn mu_shift_k_derivative(ctx: &Ctx) -> Result<f64> {
    let mut rng = ctx.rng(0x02);
    let mut worst = 0.0f64;
    for c in ctx.constraints() {
        for _ in 0..5 {
            let (rho, k) = ctx.on_set(&c, &mut rng)?;
            let g = ctx.direction(&mut rng)?;
            let mu: f64 = rng.random_range(-10.0..10.0);
            let fp = ctx.f_prime_field(&c, &rho)?;
            let base = k_derivative(&g, &rho, &c, &k)?;
            let shifted = k_derivative(&g.add_scaled(mu, &fp)?, &rho, &c, &k)?;
            worst = worst.max(base.max_abs_diff(&shifted)?);
        }
    }
    Ok(worst)
}

fn mu_shift_u_derivative(ctx: &Ctx) -> Result<f64> {
    let mut rng = ctx.rng(0x03);
    let mut worst = 0.0f64;
    for c in ctx.constraints() {
        let rho = ctx.positive(&mut rng)?;
        let g = ctx.direction(&mut rng)?;
        let fp = ctx.f_prime_field(&c, &rho)?;
        for w in ctx.weight_choices(&mut rng)? {
            for mu in [-7.5, 0.3, 4.0] {
                let base = u_derivative(&g, &rho, &c, &w)?;
                let shifted = u_derivative(&g.add_scaled(mu, &fp)?, &rho, &c, &w)?;
                worst = worst.max(base.max_abs_diff(&shifted)?);
            }
        }
    }
    Ok(worst)
}

fn projection_annihilation(ctx: &Ctx) -> Result<f64> {
    let mut rng = ctx.rng(0x04);
    let mut worst = 0.0f64;
    for c in ctx.constraints() {
        let (rho, k) = ctx.on_set(&c, &mut rng)?;
        let fp = c.f_prime_values(&rho)?;
        for w in ctx.weight_choices(&mut rng)? {
            for _ in 0..5 {
                let delta = ctx.direction(&mut rng)?;
                let projected = project_change(&delta, &rho, &c, &k, &w)?;
                let leak: f64 = ctx
                    .grid
                    .weights()
                    .iter()
                    .zip(fp.iter().zip(projected.values()))
                    .map(|(w, (p, d))| w * p * d)
                    .sum();
                worst = worst.max(leak.abs());
            }
        }
    }
    Ok(worst)
}

fn projection_adjoint(ctx: &Ctx) -> Result<f64> {
    let mut rng = ctx.rng(0x05);
    let mut worst = 0.0f64;
    for c in ctx.constraints() {
        let (rho, k) = ctx.on_set(&c, &mut rng)?;
        for w in ctx.weight_choices(&mut rng)? {
            let g = ctx.direction(&mut rng)?;
            let delta = ctx.direction(&mut rng)?;
            let lhs = g.inner(&project_change(&delta, &rho, &c, &k, &w)?)?;
            let rhs = u_derivative(&g, &rho, &c, &w)?.inner(&delta)?;
            worst = worst.max((lhs - rhs).abs());
        }
    }
    Ok(worst)
}

fn equal_on_set_derivatives(ctx: &Ctx) -> Result<f64> {
    // A and A + b(K[rho]) coincide on the constraint set; every restricted
    // derivative must agree there.
    let mut rng = ctx.rng(0x06);
    let mut worst = 0.0f64;
    for c in ctx.constraints() {
        let (rho, _k) = ctx.on_set(&c, &mut rng)?;
        let a = Functional::square();
        let b = Functional::square().add(Functional::of_k(
            "k-sin",
            |k| k.sin(),
            |k| k.cos(),
            Arc::clone(&c),
        ));
        let ga = a.gradient(&rho)?;
        let gb = b.gradient(&rho)?;
        for w in ctx.weight_choices(&mut rng)? {
            let da = u_derivative(&ga, &rho, &c, &w)?;
            let db = u_derivative(&gb, &rho, &c, &w)?;
            worst = worst.max(da.max_abs_diff(&db)?);
        }
    }
    Ok(worst)
}

fn constraint_functional_annihilation(ctx: &Ctx) -> Result<f64> {
    let mut rng = ctx.rng(0x07);
    let mut worst = 0.0f64;
    type BPair = (&'static str, fn(f64) -> f64, fn(f64) -> f64);
    let variants: [BPair; 3] = [
        ("k-id", |k| k, |_| 1.0),
        ("k-square", |k| k * k, |k| 2.0 * k),
        ("k-sin", |k| k.sin(), |k| k.cos()),
    ];
    for c in ctx.constraints() {
        let (rho, k) = ctx.on_set(&c, &mut rng)?;
        for (label, b, bp) in variants {
            let a = Functional::of_k(label, b, bp, Arc::clone(&c));
            let kd = k_derivative(&a.gradient(&rho)?, &rho, &c, &k)?;
            worst = worst.max(kd.max_abs());
        }
    }
    Ok(worst)
}

fn degree_zero_plain_derivative(ctx: &Ctx) -> Result<f64> {
    // Degree-zero functionals need no constrained correction: the
    // conserving derivative equals the plain gradient.
    let mut rng = ctx.rng(0x08);
    let mut worst = 0.0f64;
    for (a, c, m) in ctx.homogeneity_triples() {
        if m != 0.0 {
            continue;
        }
        let (rho, k) = ctx.on_set(&c, &mut rng)?;
        let g = a.gradient(&rho)?;
        let kd = k_derivative(&g, &rho, &c, &k)?;
        worst = worst.max(kd.max_abs_diff(&g)?);
    }
    Ok(worst)
}

fn homogeneity_scaling(ctx: &Ctx) -> Result<f64> {
    let mut rng = ctx.rng(0x09);
    let mut worst = 0.0f64;
    for (a, c, m) in ctx.homogeneity_triples() {
        let rho = ctx.positive(&mut rng)?;
        let base = a.value(&rho)?;
        for lambda in [0.5, 1.0, 2.0] {
            let deformed = rho.map_with_x(|x, r| c.f_inv(x, lambda * c.f(x, r)))?;
            let scaled = a.value(&deformed)?;
            let expected = lambda.powf(m) * base;
            worst = worst.max((scaled - expected).abs() / expected.abs().max(1.0));
        }
    }
    Ok(worst)
}

fn homogeneity_average(ctx: &Ctx) -> Result<f64> {
    let mut rng = ctx.rng(0x0a);
    let mut worst = 0.0f64;
    for (a, c, m) in ctx.homogeneity_triples() {
        for _ in 0..3 {
            let rho = ctx.positive(&mut rng)?;
            worst = worst.max(homogeneity_residual(&a, &rho, &c, m)?.abs());
        }
    }
    Ok(worst)
}

fn homogeneity_shifted_derivative(ctx: &Ctx) -> Result<f64> {
    // For a degree-m functional the conserving derivative is the plain one
    // shifted by f' * m A / K.
    let mut rng = ctx.rng(0x0b);
    let mut worst = 0.0f64;
    for (a, c, m) in ctx.homogeneity_triples() {
        let (rho, k) = ctx.on_set(&c, &mut rng)?;
        let g = a.gradient(&rho)?;
        let kd = k_derivative(&g, &rho, &c, &k)?;
        let fp = ctx.f_prime_field(&c, &rho)?;
        let expected = g.add_scaled(-m * a.value(&rho)? / k.value(), &fp)?;
        worst = worst.max(kd.max_abs_diff(&expected)?);
    }
    Ok(worst)
}

fn extension_gradient_route(ctx: &Ctx) -> Result<f64> {
    // The numerical gradient of the degree-zero extension equals the
    // conserving derivative of the original functional on the set.
    let mut rng = ctx.rng(0x0c);
    let mut worst = 0.0f64;
    for c in ctx.constraints() {
        let (rho, k) = ctx.on_set(&c, &mut rng)?;
        for a in [Functional::square(), Functional::quartic()] {
            let kd = k_derivative(&a.gradient(&rho)?, &rho, &c, &k)?;
            let a0 = Functional::zero_hom_extension(a, Arc::clone(&c), k);
            let g0 = a0.gradient(&rho)?;
            worst = worst.max(g0.max_abs_diff(&kd)?);
        }
    }
    Ok(worst)
}

fn chain_rule_composition(ctx: &Ctx) -> Result<f64> {
    let mut rng = ctx.rng(0x0d);
    let mut worst = 0.0f64;
    for c in ctx.constraints() {
        let (rho, k) = ctx.on_set(&c, &mut rng)?;
        for a in ctx.catalog() {
            let mu = rng.random_range(-5.0..5.0);
            let check = chain_rule_residual(&a, &rho, &c, &k, mu)?;
            worst = worst.max(check.residual);
        }
    }
    Ok(worst)
}

fn chain_rule_mu_insensitivity(ctx: &Ctx) -> Result<f64> {
    let mut rng = ctx.rng(0x0e);
    let mut worst = 0.0f64;
    for c in ctx.constraints() {
        let (rho, k) = ctx.on_set(&c, &mut rng)?;
        let mu = rng.random_range(-10.0..10.0);
        let check = chain_rule_residual(&Functional::square(), &rho, &c, &k, mu)?;
        worst = worst.max(check.mu_shift_residual);
    }
    Ok(worst)
}

fn extension_idempotence(ctx: &Ctx) -> Result<f64> {
    let mut rng = ctx.rng(0x0f);
    let mut worst = 0.0f64;
    for c in ctx.constraints() {
        for _ in 0..3 {
            let rho = ctx.positive(&mut rng)?;
            let k = KTarget::new(rng.random_range(0.8..2.5))?;
            let once = extend(&rho, &c, &k)?;
            let twice = extend(&once, &c, &k)?;
            worst = worst.max(once.max_abs_diff(&twice)?);
        }
    }
    Ok(worst)
}

fn extension_fiber_invariance(ctx: &Ctx) -> Result<f64> {
    let mut rng = ctx.rng(0x10);
    let mut worst = 0.0f64;
    for c in ctx.constraints() {
        let rho = ctx.positive(&mut rng)?;
        let k = KTarget::new(1.5)?;
        let base = extend(&rho, &c, &k)?;
        for lambda in [0.5, 2.0] {
            let moved = rho.map_with_x(|x, r| c.f_inv(x, lambda * c.f(x, r)))?;
            let other = extend(&moved, &c, &k)?;
            worst = worst.max(base.max_abs_diff(&other)?);
        }
    }
    Ok(worst)
}

fn extension_target_exactness(ctx: &Ctx) -> Result<f64> {
    let mut rng = ctx.rng(0x11);
    let mut worst = 0.0f64;
    for c in ctx.constraints() {
        for _ in 0..3 {
            let rho = ctx.positive(&mut rng)?;
            let k = KTarget::new(rng.random_range(0.5..3.0))?;
            let out = extend(&rho, &c, &k)?;
            worst = worst.max((k_value(&out, &c)? - k.value()).abs());
        }
    }
    Ok(worst)
}

fn path_conservation(ctx: &Ctx) -> Result<f64> {
    let mut rng = ctx.rng(0x12);
    let mut worst = 0.0f64;
    for c in ctx.constraints() {
        let (rho, k) = ctx.on_set(&c, &mut rng)?;
        let delta = ctx.direction(&mut rng)?;
        for eps in [-1e-3, -5e-4, 5e-4, 1e-3] {
            let point = deformed_path(&rho, &delta, eps, &c, &k)?;
            worst = worst.max((k_value(&point, &c)? - k.value()).abs());
        }
    }
    Ok(worst)
}

fn shape_reconstruction(ctx: &Ctx) -> Result<f64> {
    let mut rng = ctx.rng(0x13);
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let rho = ctx.positive(&mut rng)?;
        let g = ctx.direction(&mut rng)?;
        let split = shape_split(&g, &rho)?;
        let rebuilt = split.n_part.map(|v| v + split.shape_part)?;
        worst = worst.max(rebuilt.max_abs_diff(&g)?);
    }
    Ok(worst)
}

fn shape_average(ctx: &Ctx) -> Result<f64> {
    let mut rng = ctx.rng(0x14);
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let rho = ctx.positive(&mut rng)?;
        let g = ctx.direction(&mut rng)?;
        let split = shape_split(&g, &rho)?;
        let avg = g.inner(&rho)? / rho.integrate();
        worst = worst.max((split.shape_part - avg).abs());
    }
    Ok(worst)
}

fn shape_conserving_match(ctx: &Ctx) -> Result<f64> {
    let mut rng = ctx.rng(0x15);
    let mut worst = 0.0f64;
    let c = ConstraintSpec::identity();
    for _ in 0..5 {
        let rho = ctx.positive(&mut rng)?;
        let g = ctx.direction(&mut rng)?;
        let split = shape_split(&g, &rho)?;
        let k = KTarget::new(split.norm)?;
        let kd = k_derivative(&g, &rho, &c, &k)?;
        worst = worst.max(split.n_part.max_abs_diff(&kd)?);
    }
    Ok(worst)
}

fn shape_route_crosscheck(ctx: &Ctx) -> Result<f64> {
    let mut rng = ctx.rng(0x16);
    let mut worst = 0.0f64;
    let catalog = [
        Functional::square(),
        Functional::quartic(),
        Functional::linear("linear-cos", |x| (2.0 * std::f64::consts::PI * x).cos()),
    ];
    for a in catalog {
        let rho = ctx.positive(&mut rng)?;
        worst = worst.max(shape_route_residual(&a, &rho)?);
    }
    Ok(worst)
}

fn l_shape_normalization(ctx: &Ctx) -> Result<f64> {
    let mut rng = ctx.rng(0x17);
    let mut worst = 0.0f64;
    let h = Field::from_fn(&ctx.grid, |x| 1.0 + x)?;
    for _ in 0..5 {
        let rho = ctx.positive(&mut rng)?;
        let g = ctx.direction(&mut rng)?;
        let weighted = rho.zip_map(&h, |r, hv| hv * r)?;
        let l = KTarget::new(weighted.integrate())?;
        let split = l_split(&g, &rho, &h, &l)?;
        let l_shape = rho.scale(1.0 / split.norm)?;
        let total = l_shape.zip_map(&h, |a, b| a * b)?.integrate();
        worst = worst.max((total - 1.0).abs());
    }
    Ok(worst)
}

fn l_split_reconstruction(ctx: &Ctx) -> Result<f64> {
    let mut rng = ctx.rng(0x18);
    let mut worst = 0.0f64;
    let h = Field::from_fn(&ctx.grid, |x| 2.0 - x)?;
    let unit = Field::constant(&ctx.grid, 1.0)?;
    for _ in 0..5 {
        let rho = ctx.positive(&mut rng)?;
        let g = ctx.direction(&mut rng)?;
        let weighted = rho.zip_map(&h, |r, hv| hv * r)?;
        let l = KTarget::new(weighted.integrate())?;
        let split = l_split(&g, &rho, &h, &l)?;
        let rebuilt = split
            .n_part
            .zip_map(&h, |npv, hv| npv + hv * split.shape_part)?;
        worst = worst.max(rebuilt.max_abs_diff(&g)?);

        // h = 1 degenerates to the plain split.
        let lu = KTarget::new(rho.integrate())?;
        let a = l_split(&g, &rho, &unit, &lu)?;
        let b = shape_split(&g, &rho)?;
        worst = worst.max((a.shape_part - b.shape_part).abs());
        worst = worst.max(a.n_part.max_abs_diff(&b.n_part)?);
    }
    Ok(worst)
}

fn directional_inner_match(ctx: &Ctx) -> Result<f64> {
    // Random multi-mode directions have sizable higher variations along
    // the deformed path; scale them down and gate convergence at 1e-4 so
    // the probe itself stabilizes, leaving the 1e-5 residual as the test.
    let opts = ProbeOptions {
        rel_tol: 1e-4,
        ..ProbeOptions::default()
    };
    let mut rng = ctx.rng(0x19);
    let mut worst = 0.0f64;
    for c in ctx.constraints() {
        for a in ctx.catalog() {
            for _ in 0..5 {
                let (rho, k) = ctx.on_set(&c, &mut rng)?;
                let delta = ctx.direction(&mut rng)?.scale(0.5)?;
                worst = worst.max(directional_residual_with(
                    &a, &rho, &delta, &c, &k, false, &opts,
                )?);
            }
        }
    }
    Ok(worst)
}

fn constraint_invertibility(ctx: &Ctx) -> Result<f64> {
    let mut rng = ctx.rng(0x1a);
    let mut worst = 0.0f64;
    for c in ctx.constraints() {
        for _ in 0..3 {
            let rho = ctx.positive(&mut rng)?;
            worst = worst.max(c.invertibility_residual(&rho)?);
        }
    }
    Ok(worst)
}

const CASES: &[Case] = &[
    Case {
        id: "weight-normalization",
        description: "every weight choice integrates to one",
        tolerance: 1e-12,
        run: weight_normalization,
    },
    Case {
        id: "mu-shift-k-derivative",
        description: "conserving derivative ignores f' shifts of the gradient",
        tolerance: 1e-12,
        run: mu_shift_k_derivative,
    },
    Case {
        id: "mu-shift-u-derivative",
        description: "restricted derivatives ignore f' shifts for every weight",
        tolerance: 1e-12,
        run: mu_shift_u_derivative,
    },
    Case {
        id: "projection-annihilation",
        description: "projected changes conserve the constraint to first order",
        tolerance: 1e-12,
        run: projection_annihilation,
    },
    Case {
        id: "projection-adjoint",
        description: "change projection is adjoint to the restricted derivative",
        tolerance: 1e-12,
        run: projection_adjoint,
    },
    Case {
        id: "equal-on-set-derivatives",
        description: "functionals equal on the set share restricted derivatives",
        tolerance: 1e-10,
        run: equal_on_set_derivatives,
    },
    Case {
        id: "constraint-functional-annihilation",
        description: "functions of the conserved integral have zero conserving derivative",
        tolerance: 1e-10,
        run: constraint_functional_annihilation,
    },
    Case {
        id: "degree-zero-plain-derivative",
        description: "degree-zero functionals need no constrained correction",
        tolerance: 1e-6,
        run: degree_zero_plain_derivative,
    },
    Case {
        id: "homogeneity-scaling",
        description: "declared degrees match direct fiber rescaling",
        tolerance: 1e-10,
        run: homogeneity_scaling,
    },
    Case {
        id: "homogeneity-average",
        description: "weighted gradient average equals degree times value",
        tolerance: 1e-6,
        run: homogeneity_average,
    },
    Case {
        id: "homogeneity-shifted-derivative",
        description: "conserving derivative of a degree-m functional is the gradient minus f' m A / K",
        tolerance: 1e-6,
        run: homogeneity_shifted_derivative,
    },
    Case {
        id: "extension-gradient-route",
        description: "gradient of the degree-zero extension equals the conserving derivative",
        tolerance: 1e-6,
        run: extension_gradient_route,
    },
    Case {
        id: "chain-rule-composition",
        description: "differentiating through the extension map lands on the conserving derivative",
        tolerance: 1e-5,
        run: chain_rule_composition,
    },
    Case {
        id: "chain-rule-mu-insensitivity",
        description: "composition route is blind to f' shifts of the inner gradient",
        tolerance: 1e-12,
        run: chain_rule_mu_insensitivity,
    },
    Case {
        id: "extension-idempotence",
        description: "extending twice equals extending once",
        tolerance: 1e-12,
        run: extension_idempotence,
    },
    Case {
        id: "extension-fiber-invariance",
        description: "all members of a deformation fiber extend to the same field",
        tolerance: 1e-10,
        run: extension_fiber_invariance,
    },
    Case {
        id: "extension-target-exactness",
        description: "extension reproduces the target integral to rounding",
        tolerance: 1e-12,
        run: extension_target_exactness,
    },
    Case {
        id: "path-conservation",
        description: "every point of the deformed path sits on the constraint set",
        tolerance: 1e-12,
        run: path_conservation,
    },
    Case {
        id: "shape-reconstruction",
        description: "gradient equals conserving part plus rescaling constant",
        tolerance: 1e-12,
        run: shape_reconstruction,
    },
    Case {
        id: "shape-average",
        description: "rescaling derivative equals the mass-weighted gradient average",
        tolerance: 1e-12,
        run: shape_average,
    },
    Case {
        id: "shape-conserving-match",
        description: "split's conserving part equals the mass-conserving derivative",
        tolerance: 1e-12,
        run: shape_conserving_match,
    },
    Case {
        id: "shape-route-crosscheck",
        description: "differentiating at fixed amount agrees with the direct split",
        tolerance: 1e-5,
        run: shape_route_crosscheck,
    },
    Case {
        id: "l-shape-normalization",
        description: "weighted shape integrates against its profile to one",
        tolerance: 1e-12,
        run: l_shape_normalization,
    },
    Case {
        id: "l-split-reconstruction",
        description: "weighted split rebuilds the gradient with the profile factor",
        tolerance: 1e-12,
        run: l_split_reconstruction,
    },
    Case {
        id: "directional-inner-match",
        description: "deformed directional derivative equals the conserving inner product",
        tolerance: 1e-5,
        run: directional_inner_match,
    },
    Case {
        id: "constraint-invertibility",
        description: "f_inv round-trips f on the admissible domain",
        tolerance: 1e-10,
        run: constraint_invertibility,
    },
];

fn broken_fixture_case(ctx: &Ctx) -> CaseResult {
    // Deliberately non-invertible density: f doubles, f_inv does not halve.
    // Exists so the failure path of reporting tools can be exercised.
    let stub = ConstraintSpec::new(
        "broken-stub",
        |_, r| 2.0 * r,
        |_, _| 2.0,
        |_, y| y,
        Interval::all(),
        Interval::all(),
    );
    let tolerance = 1e-10;
    let mut rng = ctx.rng(0xdead);
    let outcome = ctx
        .positive(&mut rng)
        .and_then(|rho| stub.invertibility_residual(&rho));
    match outcome {
        Ok(residual) => CaseResult {
            id: "broken-constraint-fixture",
            description: "self-test: a non-invertible density must fail the round-trip check",
            residual,
            tolerance,
            passed: residual <= tolerance,
            error: None,
        },
        Err(e) => CaseResult {
            id: "broken-constraint-fixture",
            description: "self-test: a non-invertible density must fail the round-trip check",
            residual: f64::NAN,
            tolerance,
            passed: false,
            error: Some(e.to_string()),
        },
    }
}

/// Runs the full identity suite on a periodic unit-length grid.
pub fn run_all(seed: u64, grid_n: usize) -> Report {
    run_all_with(seed, grid_n, false)
}

/// As [`run_all`]; `inject_broken` appends the deliberately failing
/// fixture, for exercising failure reporting end to end.
pub fn run_all_with(seed: u64, grid_n: usize, inject_broken: bool) -> Report {
    let grid = Grid::periodic(grid_n, 1.0).expect("verify grid");
    let ctx = Ctx { grid, seed };
    let mut cases: Vec<CaseResult> = CASES
        .iter()
        .map(|case| match (case.run)(&ctx) {
            Ok(residual) => CaseResult {
                id: case.id,
                description: case.description,
                residual,
                tolerance: case.tolerance,
                passed: residual <= case.tolerance,
                error: None,
            },
            Err(e) => CaseResult {
                id: case.id,
                description: case.description,
                residual: f64::NAN,
                tolerance: case.tolerance,
                passed: false,
                error: Some(e.to_string()),
            },
        })
        .collect();
    if inject_broken {
        cases.push(broken_fixture_case(&ctx));
    }
    Report {
        seed,
        grid_n,
        cases,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn all_required_identities_have_cases() {
        let have: BTreeSet<&str> = CASES.iter().map(|c| c.id).collect();
        for id in REQUIRED_IDENTITIES {
            assert!(have.contains(id), "missing identity case: {id}");
        }
        assert_eq!(have.len(), REQUIRED_IDENTITIES.len(), "unlisted extra cases");
    }

    #[test]
    fn suite_passes_at_seed_zero() {
        let report = run_all(0, 64);
        for c in &report.cases {
            assert!(
                c.passed,
                "{}: residual {:e} vs tolerance {:e} ({:?})",
                c.id, c.residual, c.tolerance, c.error
            );
        }
        assert!(report.all_passed());
    }

    #[test]
    fn suite_passes_across_seeds() {
        for seed in [1, 7, 1234] {
            let report = run_all(seed, 48);
            assert!(report.all_passed(), "seed {seed}:\n{report}");
        }
    }

    #[test]
    fn broken_fixture_fails_and_is_reported() {
        let report = run_all_with(0, 32, true);
        let broken = report
            .cases
            .iter()
            .find(|c| c.id == "broken-constraint-fixture")
            .expect("fixture present");
        assert!(!broken.passed);
        assert!(!report.all_passed());
        assert_eq!(report.failed_count(), 1);
    }
}
