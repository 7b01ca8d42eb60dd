//! The four subcommands. Each builds its inputs from the scenario, runs
//! the corresponding library operation, and emits CSV (plus, for `flow`,
//! an optional plot). Human-oriented summaries go to stderr so the CSV
//! stream stays clean when writing to stdout; the `verify` table is the
//! primary output and goes to stdout.

use kfunc_core::{
    directional_with, k_derivative, minimize, run_all_with, shape_split, u_derivative,
    WeightChoice,
};

use crate::output::{csv, emit, flow_plot_svg, real};
use crate::scenario::{CliError, CliResult, Scenario};

/// Runs the identity suite; exit 0 only if every row passes.
pub fn cmd_verify(s: &Scenario) -> CliResult<i32> {
    // Surface config problems (bad grid, K = 0) before the long run.
    s.grid()?;
    s.constraint()?;
    s.ktarget()?;
    let report = run_all_with(s.seed, s.grid_n, s.inject_failure);
    println!("{report}");
    if let Some(path) = &s.out {
        let rows = report.cases.iter().map(|c| {
            vec![
                c.id.to_string(),
                real(c.residual),
                real(c.tolerance),
                if c.passed { "pass" } else { "fail" }.to_string(),
                c.error.clone().unwrap_or_default(),
            ]
        });
        emit(&Some(path.clone()), &csv("id,residual,tolerance,status,error", rows))?;
    }
    if report.all_passed() {
        Ok(0)
    } else {
        Err(CliError::Check(format!(
            "{} identity case(s) failed",
            report.failed_count()
        )))
    }
}

/// Emits the plain and constrained derivative columns, optionally with the
/// amount/shape split.
pub fn cmd_deriv(s: &Scenario) -> CliResult<i32> {
    let grid = s.grid()?;
    let c = s.constraint()?;
    let k = s.ktarget()?;
    let rho = s.field(&grid, &c, &k)?;
    let a = s.functional()?;
    let g = a.gradient(&rho)?;
    let weight = s.weight(&grid)?;
    // The default weight is the conserving derivative proper, which insists
    // on set membership; other weights are the membership-free family.
    let kd = match weight {
        WeightChoice::FOfRho => k_derivative(&g, &rho, &c, &k)?,
        other => u_derivative(&g, &rho, &c, &other)?,
    };
    let split = if s.split {
        Some(shape_split(&g, &rho)?)
    } else {
        None
    };

    let header = if split.is_some() {
        "x,rho,grad,k_deriv,n_part,shape_part"
    } else {
        "x,rho,grad,k_deriv"
    };
    let rows = (0..grid.n()).map(|i| {
        let mut row = vec![
            real(grid.nodes()[i]),
            real(rho.values()[i]),
            real(g.values()[i]),
            real(kd.values()[i]),
        ];
        if let Some(sp) = &split {
            row.push(real(sp.n_part.values()[i]));
            row.push(real(sp.shape_part));
        }
        row
    });
    emit(&s.out, &csv(header, rows))?;
    Ok(0)
}

/// Probes the constrained directional derivative along the deformed path
/// and compares it with the conserving inner product.
pub fn cmd_gateaux(s: &Scenario) -> CliResult<i32> {
    let grid = s.grid()?;
    let c = s.constraint()?;
    let k = s.ktarget()?;
    let rho = s.field(&grid, &c, &k)?;
    let a = s.functional()?;
    let delta = s.delta_field(&grid)?;
    let opts = s.probe_options();
    let probe = directional_with(&a, &rho, &delta, &c, &k, &opts)?;
    let kd = k_derivative(&a.gradient(&rho)?, &rho, &c, &k)?;
    let inner = kd.inner(&delta)?;
    let residual = (probe.value() - inner).abs();

    let mut rows: Vec<Vec<String>> = probe
        .eps_schedule()
        .iter()
        .zip(probe.estimates())
        .map(|(&eps, &est)| vec!["estimate".to_string(), real(eps), real(est)])
        .collect();
    let tail = [
        ("extrapolated", probe.value()),
        ("inner-product", inner),
        ("residual", residual),
        ("last-diff", probe.last_diff()),
        ("path-ratio", probe.path_ratio()),
        ("converged", if probe.converged() { 1.0 } else { 0.0 }),
    ];
    rows.extend(
        tail.iter()
            .map(|(kind, v)| vec![kind.to_string(), String::new(), real(*v)]),
    );
    emit(&s.out, &csv("kind,eps,value", rows))?;
    if !probe.converged() {
        eprintln!(
            "gateaux: estimates not converged (last diff {:.3e}, rel tol {:.3e})",
            probe.last_diff(),
            s.rel_tol
        );
    }
    eprintln!(
        "gateaux: value {} inner {} residual {:.3e}",
        real(probe.value()),
        real(inner),
        residual
    );
    Ok(0)
}

/// Runs the constrained descent flow and emits the trace.
pub fn cmd_flow(s: &Scenario) -> CliResult<i32> {
    let grid = s.grid()?;
    let c = s.constraint()?;
    let k = s.ktarget()?;
    let rho0 = s.field(&grid, &c, &k)?;
    let a = s.functional()?;
    let trace = minimize(&a, &rho0, &c, &k, &s.flow_options())?;

    let rows = trace.records.iter().map(|r| {
        vec![
            r.iter.to_string(),
            real(r.energy),
            real(r.constraint_value),
            real(r.residual),
            real(r.eta),
        ]
    });
    emit(&s.out, &csv("iter,energy,k,residual,eta", rows))?;
    if let Some(path) = &s.plot {
        let svg = flow_plot_svg(&trace, &trace.final_field);
        std::fs::write(path, svg)
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
    }
    let last = trace.final_record();
    eprintln!(
        "flow: status {} after {} accepted step(s), residual {:.3e}, multiplier {}, drift {:.3e}",
        trace.status,
        last.iter,
        last.residual,
        real(trace.multiplier),
        trace.constraint_drift(&k)
    );
    Ok(0)
}
