//! Browser bindings for the interactive demo page.
//!
//! Three operations are exposed: the conserving-derivative curves for a
//! parametrized field, a projected descent run, and the renormalized
//! deformation path at a chosen step. Each returns a plain result object
//! whose getters copy `Vec<f64>` columns into JavaScript typed arrays;
//! errors surface as exceptions carrying the library's message.

use std::f64::consts::PI;

use kfunc_core::{
    deformed_path, directional, extend, k_derivative, k_value, minimize, shape_split,
    ConstraintSpec, Error, Field, FlowOptions, Functional, Grid, KTarget,
};
use wasm_bindgen::prelude::*;

fn js(e: Error) -> String {
    e.to_string()
}

fn build_grid(n: usize) -> Result<Grid, String> {
    if !(8..=4096).contains(&n) {
        return Err("grid size must be between 8 and 4096 nodes".into());
    }
    Grid::periodic(n, 1.0).map_err(js)
}

fn build_constraint(name: &str) -> Result<ConstraintSpec, String> {
    match name {
        "identity" => Ok(ConstraintSpec::identity()),
        "power2" => ConstraintSpec::power(2.0).map_err(js),
        "exp" => Ok(ConstraintSpec::exponential()),
        "weighted" => Ok(ConstraintSpec::weighted_linear(|x| 1.0 + x)),
        other => Err(format!(
            "unknown constraint `{other}` (expected identity | power2 | exp | weighted)"
        )),
    }
}

fn build_functional(name: &str) -> Result<Functional, String> {
    match name {
        "square" => Ok(Functional::square()),
        "quartic" => Ok(Functional::quartic()),
        "entropy" => Ok(Functional::entropy()),
        "gradsq" => Ok(Functional::gradient_square()),
        other => Err(format!(
            "unknown functional `{other}` (expected square | quartic | entropy | gradsq)"
        )),
    }
}

/// Field `base + tilt * (x - 1/2) + wave * sin(2 pi x)`: positive for the
/// default slider ranges, rough enough to make the curves interesting.
fn build_field(grid: &Grid, base: f64, tilt: f64, wave: f64) -> Result<Field, String> {
    Field::from_fn(grid, |x| base + tilt * (x - 0.5) + wave * (2.0 * PI * x).sin()).map_err(js)
}

/// Derivative curves of one functional at one field, with the measured
/// conserved integral as the target.
#[wasm_bindgen]
#[derive(Debug)]
pub struct Curves {
    xs: Vec<f64>,
    rho: Vec<f64>,
    grad: Vec<f64>,
    k_deriv: Vec<f64>,
    k: f64,
    shape_part: f64,
}

#[wasm_bindgen]
impl Curves {
    #[wasm_bindgen(getter)]
    pub fn xs(&self) -> Vec<f64> {
        self.xs.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn rho(&self) -> Vec<f64> {
        self.rho.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn grad(&self) -> Vec<f64> {
        self.grad.clone()
    }
    #[wasm_bindgen(getter, js_name = kDeriv)]
    pub fn k_deriv(&self) -> Vec<f64> {
        self.k_deriv.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn k(&self) -> f64 {
        self.k
    }
    #[wasm_bindgen(getter, js_name = shapePart)]
    pub fn shape_part(&self) -> f64 {
        self.shape_part
    }
}

/// Plain gradient and conserving derivative of `functional` at the
/// parametrized field, under `constraint` at the field's own integral.
#[wasm_bindgen(js_name = derivativeCurves)]
pub fn derivative_curves(
    n: usize,
    constraint: &str,
    functional: &str,
    base: f64,
    tilt: f64,
    wave: f64,
) -> Result<Curves, JsError> {
    curves_impl(n, constraint, functional, base, tilt, wave).map_err(|m| JsError::new(&m))
}

fn curves_impl(
    n: usize,
    constraint: &str,
    functional: &str,
    base: f64,
    tilt: f64,
    wave: f64,
) -> Result<Curves, String> {
    let grid = build_grid(n)?;
    let c = build_constraint(constraint)?;
    let a = build_functional(functional)?;
    let rho = build_field(&grid, base, tilt, wave)?;
    let k = KTarget::new(k_value(&rho, &c).map_err(js)?).map_err(js)?;
    let rho = extend(&rho, &c, &k).map_err(js)?;

    let grad = a.gradient(&rho).map_err(js)?;
    let kd = k_derivative(&grad, &rho, &c, &k).map_err(js)?;
    let split = shape_split(&grad, &rho).map_err(js)?;

    Ok(Curves {
        xs: grid.nodes().to_vec(),
        rho: rho.values().to_vec(),
        grad: grad.values().to_vec(),
        k_deriv: kd.values().to_vec(),
        k: k.value(),
        shape_part: split.shape_part,
    })
}

/// History and final state of a projected descent run.
#[wasm_bindgen]
#[derive(Debug)]
pub struct FlowDemo {
    energies: Vec<f64>,
    residuals: Vec<f64>,
    xs: Vec<f64>,
    final_field: Vec<f64>,
    status: String,
    multiplier: f64,
    drift: f64,
}

#[wasm_bindgen]
impl FlowDemo {
    #[wasm_bindgen(getter)]
    pub fn energies(&self) -> Vec<f64> {
        self.energies.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn residuals(&self) -> Vec<f64> {
        self.residuals.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn xs(&self) -> Vec<f64> {
        self.xs.clone()
    }
    #[wasm_bindgen(getter, js_name = finalField)]
    pub fn final_field(&self) -> Vec<f64> {
        self.final_field.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn status(&self) -> String {
        self.status.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn multiplier(&self) -> f64 {
        self.multiplier
    }
    #[wasm_bindgen(getter)]
    pub fn drift(&self) -> f64 {
        self.drift
    }
}

/// Runs the projected descent of `functional` from the parametrized field,
/// holding its measured integral fixed.
#[wasm_bindgen(js_name = runFlow)]
pub fn run_flow(
    n: usize,
    constraint: &str,
    functional: &str,
    base: f64,
    tilt: f64,
    wave: f64,
    max_iters: usize,
) -> Result<FlowDemo, JsError> {
    flow_impl(n, constraint, functional, base, tilt, wave, max_iters).map_err(|m| JsError::new(&m))
}

fn flow_impl(
    n: usize,
    constraint: &str,
    functional: &str,
    base: f64,
    tilt: f64,
    wave: f64,
    max_iters: usize,
) -> Result<FlowDemo, String> {
    let grid = build_grid(n)?;
    let c = build_constraint(constraint)?;
    let a = build_functional(functional)?;
    let rho0 = build_field(&grid, base, tilt, wave)?;
    let k = KTarget::new(k_value(&rho0, &c).map_err(js)?).map_err(js)?;

    let opts = FlowOptions {
        max_iters: max_iters.clamp(1, 20_000),
        extend_first: true,
        ..FlowOptions::default()
    };
    let trace = minimize(&a, &rho0, &c, &k, &opts).map_err(js)?;

    Ok(FlowDemo {
        energies: trace.records.iter().map(|r| r.energy).collect(),
        residuals: trace.records.iter().map(|r| r.residual).collect(),
        xs: grid.nodes().to_vec(),
        final_field: trace.final_field.values().to_vec(),
        status: trace.status.to_string(),
        multiplier: trace.multiplier,
        drift: trace.constraint_drift(&k),
    })
}

/// One point on the renormalized deformation path, with the diagnostics
/// that make the construction visible: the raw (non-conserving) step, the
/// renormalized field, their conserved integrals, and the directional
/// probe against the conserving-derivative inner product.
#[wasm_bindgen]
#[derive(Debug)]
pub struct PathDemo {
    xs: Vec<f64>,
    rho: Vec<f64>,
    raw: Vec<f64>,
    deformed: Vec<f64>,
    k: f64,
    k_raw: f64,
    k_deformed: f64,
    probe_value: f64,
    inner_value: f64,
}

#[wasm_bindgen]
impl PathDemo {
    #[wasm_bindgen(getter)]
    pub fn xs(&self) -> Vec<f64> {
        self.xs.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn rho(&self) -> Vec<f64> {
        self.rho.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn raw(&self) -> Vec<f64> {
        self.raw.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn deformed(&self) -> Vec<f64> {
        self.deformed.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn k(&self) -> f64 {
        self.k
    }
    #[wasm_bindgen(getter, js_name = kRaw)]
    pub fn k_raw(&self) -> f64 {
        self.k_raw
    }
    #[wasm_bindgen(getter, js_name = kDeformed)]
    pub fn k_deformed(&self) -> f64 {
        self.k_deformed
    }
    #[wasm_bindgen(getter, js_name = probeValue)]
    pub fn probe_value(&self) -> f64 {
        self.probe_value
    }
    #[wasm_bindgen(getter, js_name = innerValue)]
    pub fn inner_value(&self) -> f64 {
        self.inner_value
    }
}

/// Deforms the parametrized field along `sin(2 pi x)` by `eps`, once as a
/// plain step and once renormalized onto the constraint set, and reports
/// the directional derivative of `functional` along that direction.
#[wasm_bindgen(js_name = pathDemo)]
pub fn path_demo(
    n: usize,
    constraint: &str,
    functional: &str,
    base: f64,
    tilt: f64,
    wave: f64,
    eps: f64,
) -> Result<PathDemo, JsError> {
    path_impl(n, constraint, functional, base, tilt, wave, eps).map_err(|m| JsError::new(&m))
}

fn path_impl(
    n: usize,
    constraint: &str,
    functional: &str,
    base: f64,
    tilt: f64,
    wave: f64,
    eps: f64,
) -> Result<PathDemo, String> {
    if !eps.is_finite() || eps.abs() > 1.0 {
        return Err("deformation step must lie in [-1, 1]".into());
    }
    let grid = build_grid(n)?;
    let c = build_constraint(constraint)?;
    let a = build_functional(functional)?;
    let rho = build_field(&grid, base, tilt, wave)?;
    let k = KTarget::new(k_value(&rho, &c).map_err(js)?).map_err(js)?;
    let rho = extend(&rho, &c, &k).map_err(js)?;
    let delta = Field::from_fn(&grid, |x| (2.0 * PI * x).sin()).map_err(js)?;

    let raw = rho.add_scaled(eps, &delta).map_err(js)?;
    let deformed = deformed_path(&rho, &delta, eps, &c, &k).map_err(js)?;

    let probe = directional(&a, &rho, &delta, &c, &k).map_err(js)?;
    let kd = k_derivative(&a.gradient(&rho).map_err(js)?, &rho, &c, &k).map_err(js)?;
    let inner_value = kd.inner(&delta).map_err(js)?;

    Ok(PathDemo {
        xs: grid.nodes().to_vec(),
        rho: rho.values().to_vec(),
        k_raw: k_value(&raw, &c).map_err(js)?,
        k_deformed: k_value(&deformed, &c).map_err(js)?,
        raw: raw.values().to_vec(),
        deformed: deformed.values().to_vec(),
        k: k.value(),
        probe_value: probe.value(),
        inner_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curves_match_the_direct_computation() {
        let out = curves_impl(64, "identity", "square", 1.5, 1.0, 0.3).unwrap();
        assert_eq!(out.xs.len(), 64);
        // grad = 2 rho for the square functional.
        for (g, r) in out.grad.iter().zip(&out.rho) {
            assert!((g - 2.0 * r).abs() < 1e-12);
        }
        // The conserving derivative annihilates the density direction:
        // sum w rho * k_deriv = 0 for the mass constraint.
        let weighted: f64 = out
            .rho
            .iter()
            .zip(&out.k_deriv)
            .map(|(r, d)| r * d / 64.0)
            .sum();
        assert!(weighted.abs() < 1e-12, "weighted sum {weighted}");
    }

    #[test]
    fn flow_reaches_the_uniform_minimizer() {
        let out = flow_impl(32, "identity", "square", 1.0, 1.0, 0.0, 10_000).unwrap();
        assert_eq!(out.status, "converged");
        for v in &out.final_field {
            assert!((v - 1.0).abs() < 1e-6);
        }
        assert!((out.multiplier - 2.0).abs() < 1e-6);
        assert!(out.drift < 1e-10);
    }

    #[test]
    fn path_point_conserves_the_integral() {
        let out = path_impl(48, "exp", "quartic", 1.2, 0.5, 0.2, 0.4).unwrap();
        assert!((out.k_deformed - out.k).abs() < 1e-10);
        assert!((out.k_raw - out.k).abs() > 1e-3, "raw step should drift");
        assert!((out.probe_value - out.inner_value).abs() < 1e-4);
    }

    #[test]
    fn unknown_names_are_rejected() {
        let err = curves_impl(32, "cubic", "square", 1.0, 0.0, 0.0).unwrap_err();
        assert!(err.contains("unknown constraint `cubic`"), "{err}");
        let err = curves_impl(32, "identity", "fancy", 1.0, 0.0, 0.0).unwrap_err();
        assert!(err.contains("unknown functional `fancy`"), "{err}");
        assert!(build_grid(4).is_err());
    }
}
