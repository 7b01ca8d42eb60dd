//! Batch front end for constraint-conserving functional derivatives.
//!
//! Subcommands:
//! - `verify`: run the identity suite, print the residual table.
//! - `deriv`: emit plain and constrained derivative columns as CSV.
//! - `gateaux`: probe a directional derivative along the constraint set.
//! - `flow`: run the constrained descent flow, emit the trace.
//!
//! Every scenario key is settable from a config file (`--config`) or a
//! flag; flags override file values. Exit codes: 0 success, 1 identity
//! failure, 2 usage or config error.

use std::path::PathBuf;
use std::process::ExitCode;

mod commands;
mod output;
mod scenario;

use scenario::{CliError, CliResult, Scenario};

const USAGE: &str = "\
usage: kfunc [FLAGS] <verify|deriv|gateaux|flow>

global flags:
  --config PATH          read scenario from a config file
  --out PATH             write the primary CSV here (default: stdout)
  --seed N               seed for random profiles and the verify sweep
  --grid-n N             grid node count
  --tol X                override run tolerances (gateaux rel-tol, flow grad-tol)

scenario flags (each mirrors a config key):
  --grid-length X --grid-periodic BOOL
  --constraint NAME --constraint-p X --constraint-h PROFILE --k X --k-tol X
  --field PROFILE --extend --functional LABEL
  --weight SPEC --split
  --delta PROFILE --eps E1,E2,.. --rel-tol X
  --flow-eta0 X --flow-grad-tol X --flow-max-iters N --flow-eta-min X
  --plot PATH

verify flags:
  --inject-failure       append a deliberately failing fixture (self-test)

profiles: constant:C | affine:A,B | sine:A,K,B | random
constraints: identity | power | exp | weighted-linear
functionals: square | quartic | entropy | gradsq | ratio-shape | ratio-square
             | k-identity | k-square | k-sin | linear:PROFILE | sums via `+`
weights: f_of_rho | point:I | q:PROFILE
";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Command {
    Verify,
    Deriv,
    Gateaux,
    Flow,
}

struct Invocation {
    command: Command,
    config: Option<PathBuf>,
    /// `(section, key, value)` triples applied over the config file.
    overrides: Vec<(&'static str, &'static str, String)>,
    inject_failure: bool,
}

fn usage_err(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Returns `None` when help was requested and printed.
fn parse_args(args: &[String]) -> CliResult<Option<Invocation>> {
    let mut command = None;
    let mut config = None;
    let mut overrides: Vec<(&'static str, &'static str, String)> = Vec::new();
    let mut inject_failure = false;

    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let mut value_of = |flag: &str| -> CliResult<String> {
            it.next()
                .cloned()
                .ok_or_else(|| usage_err(format!("{flag} needs a value")))
        };
        match arg.as_str() {
            "--help" | "-h" => {
                print!("{USAGE}");
                return Ok(None);
            }
            "--config" => config = Some(PathBuf::from(value_of("--config")?)),
            "--out" => overrides.push(("output", "path", value_of("--out")?)),
            "--plot" => overrides.push(("output", "plot", value_of("--plot")?)),
            "--seed" => overrides.push(("", "seed", value_of("--seed")?)),
            "--grid-n" => overrides.push(("grid", "n", value_of("--grid-n")?)),
            "--grid-length" => overrides.push(("grid", "length", value_of("--grid-length")?)),
            "--grid-periodic" => {
                overrides.push(("grid", "periodic", value_of("--grid-periodic")?))
            }
            "--constraint" => overrides.push(("constraint", "name", value_of("--constraint")?)),
            "--constraint-p" => {
                overrides.push(("constraint", "p", value_of("--constraint-p")?))
            }
            "--constraint-h" => {
                overrides.push(("constraint", "h", value_of("--constraint-h")?))
            }
            "--k" => overrides.push(("constraint", "k", value_of("--k")?)),
            "--k-tol" => overrides.push(("constraint", "k-tol", value_of("--k-tol")?)),
            "--field" => overrides.push(("field", "profile", value_of("--field")?)),
            "--extend" => overrides.push(("field", "extend", "true".to_string())),
            "--functional" => {
                overrides.push(("functional", "label", value_of("--functional")?))
            }
            "--weight" => overrides.push(("deriv", "weight", value_of("--weight")?)),
            "--split" => overrides.push(("deriv", "split", "true".to_string())),
            "--delta" => overrides.push(("gateaux", "delta", value_of("--delta")?)),
            "--eps" => overrides.push(("gateaux", "eps", value_of("--eps")?)),
            "--rel-tol" => overrides.push(("gateaux", "rel-tol", value_of("--rel-tol")?)),
            "--flow-eta0" => overrides.push(("flow", "eta0", value_of("--flow-eta0")?)),
            "--flow-grad-tol" => {
                overrides.push(("flow", "grad-tol", value_of("--flow-grad-tol")?))
            }
            "--flow-max-iters" => {
                overrides.push(("flow", "max-iters", value_of("--flow-max-iters")?))
            }
            "--flow-eta-min" => {
                overrides.push(("flow", "eta-min", value_of("--flow-eta-min")?))
            }
            "--tol" => {
                let v = value_of("--tol")?;
                overrides.push(("gateaux", "rel-tol", v.clone()));
                overrides.push(("flow", "grad-tol", v));
            }
            "--inject-failure" => inject_failure = true,
            "verify" | "deriv" | "gateaux" | "flow" => {
                if command.is_some() {
                    return Err(usage_err(format!("unexpected extra subcommand `{arg}`")));
                }
                command = Some(match arg.as_str() {
                    "verify" => Command::Verify,
                    "deriv" => Command::Deriv,
                    "gateaux" => Command::Gateaux,
                    _ => Command::Flow,
                });
            }
            other => {
                return Err(usage_err(format!(
                    "unknown argument `{other}` (see --help)"
                )))
            }
        }
    }

    let command = command
        .ok_or_else(|| usage_err("missing subcommand: verify | deriv | gateaux | flow"))?;
    if inject_failure && command != Command::Verify {
        return Err(usage_err("--inject-failure only applies to `verify`"));
    }
    Ok(Some(Invocation {
        command,
        config,
        overrides,
        inject_failure,
    }))
}

fn run(args: &[String]) -> CliResult<i32> {
    let Some(inv) = parse_args(args)? else {
        return Ok(0);
    };
    let mut scenario = match &inv.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Config(format!("cannot read {}: {e}", path.display()))
            })?;
            Scenario::from_config_text(&text)?
        }
        None => Scenario::default(),
    };
    for (section, key, value) in &inv.overrides {
        scenario.set(section, key, value)?;
    }
    scenario.inject_failure = inv.inject_failure;

    match inv.command {
        Command::Verify => commands::cmd_verify(&scenario),
        Command::Deriv => commands::cmd_deriv(&scenario),
        Command::Gateaux => commands::cmd_gateaux(&scenario),
        Command::Flow => commands::cmd_flow(&scenario),
    }
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    match run(&args) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {}", e.message());
            if matches!(e, CliError::Usage(_)) {
                eprintln!("{USAGE}");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn argv(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn parses_subcommand_and_overrides() {
        let inv = parse_args(&argv("--seed 9 deriv --grid-n 64 --split"))
            .unwrap()
            .unwrap();
        assert_eq!(inv.command, Command::Deriv);
        assert!(inv
            .overrides
            .contains(&("grid", "n", "64".to_string())));
        assert!(inv
            .overrides
            .contains(&("deriv", "split", "true".to_string())));
    }

    #[test]
    fn tol_fans_out_to_both_run_tolerances() {
        let inv = parse_args(&argv("flow --tol 1e-7")).unwrap().unwrap();
        assert!(inv
            .overrides
            .contains(&("gateaux", "rel-tol", "1e-7".to_string())));
        assert!(inv
            .overrides
            .contains(&("flow", "grad-tol", "1e-7".to_string())));
    }

    #[test]
    fn rejects_missing_subcommand_and_unknown_flags() {
        assert!(matches!(
            parse_args(&argv("--seed 3")),
            Err(CliError::Usage(_))
        ));
        assert!(matches!(
            parse_args(&argv("deriv --frobnicate 1")),
            Err(CliError::Usage(_))
        ));
        assert!(matches!(
            parse_args(&argv("deriv --inject-failure")),
            Err(CliError::Usage(_))
        ));
    }

    #[test]
    fn help_short_circuits() {
        assert!(parse_args(&argv("--help")).unwrap().is_none());
    }
}
