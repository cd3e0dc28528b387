use std::fmt::Write as _;
use std::path::Path;

use externa::audit::{
    audit_desirable, audit_efficiency, audit_ic, audit_ir, audit_wbb, check_necessary_conditions,
    check_sufficient_conditions, AuditReport, Deviation, DEFAULT_TOL, QUAD_STEP,
};
use externa::existence::{desirable_exists, disparity_boundary, disparity_boundary_full, BUDGET_TOL};
use externa::experiments::{
    boundary_sweep, mep_scaling_experiment, mep_type_sweep, to_csv, vcg_counterexample_report, BoundaryRow,
};
use externa::mechanism::give_withhold_family;
use externa::Report;
use serde::Serialize;

use crate::args::{Cli, Command, Common, Format};
use crate::build::{config_reports, grid, market, parse_reports, parse_types};
use crate::config::Config;
use crate::{UsageError, EXIT_OK, EXIT_PROPERTY_FAILED};

fn write_out(path: Option<&Path>, text: &str) -> Result<(), UsageError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| UsageError(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

fn setup_threads(requested: Option<usize>) -> Result<(), UsageError> {
    if let Some(n) = requested {
        if n == 0 {
            return Err(UsageError("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| UsageError(format!("cannot start thread pool: {e}")))?;
    }
    Ok(())
}

fn common(cmd: &Command) -> &Common {
    match cmd {
        Command::Audit { common, .. }
        | Command::Mep { common, .. }
        | Command::VcgExample { common }
        | Command::Existence { common, .. }
        | Command::Boundary { common, .. }
        | Command::Sweep { common, .. } => common,
    }
}

pub fn dispatch(cli: Cli) -> Result<i32, UsageError> {
    let common = common(&cli.command);
    let cfg = Config::load(common.config.as_deref())?;
    setup_threads(cli.threads.or(cfg.threads))?;
    let out = common.out.as_deref();
    let format = common.format;

    match &cli.command {
        Command::Audit {
            model,
            mechanism,
            property,
            tol,
            quad_step,
            ..
        } => {
            let market = market(model, &cfg)?;
            let grid = grid(model, &cfg)?;
            let name = mechanism
                .clone()
                .or_else(|| cfg.mechanism.clone())
                .unwrap_or_else(|| market.default_mechanism().to_string());
            let mech = market.mechanism(&name)?;
            let props: Vec<String> = match property {
                Some(p) => p.split(',').map(|s| s.trim().to_lowercase()).collect(),
                None => cfg
                    .audit
                    .properties
                    .clone()
                    .unwrap_or_else(|| vec!["ic".into(), "ir".into()]),
            };
            let tol = tol.or(cfg.audit.tol).unwrap_or(DEFAULT_TOL);
            let h = quad_step.or(cfg.audit.quad_step).unwrap_or(QUAD_STEP);
            let m = market.model.as_ref();
            let q = &market.quality;
            let family = || give_withhold_family(market.agents(), q);
            let mut reports = Vec::with_capacity(props.len());
            for p in &props {
                reports.push(match p.as_str() {
                    "ic" => audit_ic(&mech, m, q, &grid, tol)?,
                    "ir" => audit_ir(&mech, m, q, &grid, tol)?,
                    "wbb" => audit_wbb(&mech, &grid, tol)?,
                    "efficiency" => audit_efficiency(&mech, m, q, &grid, &family(), tol)?,
                    "desirable" => audit_desirable(&mech, m, q, &grid, &family(), tol)?,
                    "necessary" => check_necessary_conditions(&mech, m, q, &grid, h, tol)?,
                    "sufficient" => check_sufficient_conditions(&mech, m, q, &grid, h, tol)?,
                    other => {
                        return Err(UsageError(format!(
                            "--property: unknown property '{other}' (expected ic, ir, wbb, efficiency, desirable, necessary or sufficient)"
                        )))
                    }
                });
            }
            for r in &reports {
                match r.worst_margin() {
                    None => eprintln!("{} {}: passed ({} checks)", mech.label(), r.property, r.checks),
                    Some(w) => eprintln!(
                        "{} {}: FAILED ({} of {} checks, worst margin {w})",
                        mech.label(),
                        r.property,
                        r.violations.len(),
                        r.checks
                    ),
                }
            }
            let text = match format.unwrap_or(Format::Json) {
                Format::Json => json(&reports),
                Format::Csv => audit_csv(&reports),
            };
            write_out(out, &text)?;
            Ok(if reports.iter().all(|r| r.passed) {
                EXIT_OK
            } else {
                EXIT_PROPERTY_FAILED
            })
        }
        Command::Mep {
            model,
            mechanism,
            types,
            reports,
            ..
        } => {
            let market = market(model, &cfg)?;
            let name = mechanism
                .clone()
                .or_else(|| cfg.mechanism.clone())
                .unwrap_or_else(|| market.default_mechanism().to_string());
            let mech = market.mechanism(&name)?;
            let truth = match types {
                Some(t) => parse_types(t)?,
                None => cfg
                    .run
                    .types
                    .clone()
                    .ok_or_else(|| UsageError("--types (or run.types) is required".into()))?,
            };
            let reports = match reports {
                Some(r) => parse_reports(r)?,
                None => match &cfg.run.reports {
                    Some(r) => config_reports(r)?,
                    None => truth.iter().map(|&t| Report::Size(t)).collect(),
                },
            };
            let outcome = mech.run(market.model.as_ref(), &market.quality, &truth, &reports)?;
            let text = match format.unwrap_or(Format::Json) {
                Format::Json => json(&outcome),
                Format::Csv => {
                    let mut s = String::from("agent,allocation,payment,quality,value,utility\n");
                    for i in 0..truth.len() {
                        let _ = writeln!(
                            s,
                            "{i},{},{},{},{},{}",
                            outcome.allocation[i],
                            outcome.payments[i],
                            outcome.effective_qualities[i],
                            outcome.values[i],
                            outcome.utilities[i]
                        );
                    }
                    s
                }
            };
            eprintln!("{}: revenue {} welfare {}", mech.label(), outcome.revenue, outcome.welfare);
            write_out(out, &text)?;
            Ok(EXIT_OK)
        }
        Command::VcgExample { .. } => {
            if format == Some(Format::Csv) {
                return Err(UsageError("vcg-example emits json only".into()));
            }
            let report = vcg_counterexample_report()?;
            eprintln!(
                "truthful u_1 = {}, deviating u_1 = {}, gain {}",
                report.truthful_utility, report.deviating_utility, report.margin
            );
            write_out(out, &json(&report))?;
            Ok(if report.ic_violated {
                EXIT_PROPERTY_FAILED
            } else {
                EXIT_OK
            })
        }
        Command::Existence { model, tol, .. } => {
            let market = market(model, &cfg)?;
            let grid = grid(model, &cfg)?;
            let alloc = market.efficient_allocation();
            let table = desirable_exists(
                market.model.as_ref(),
                &market.quality,
                alloc.as_ref(),
                &grid,
                tol.unwrap_or(BUDGET_TOL),
            )?;
            match table.witness() {
                None => eprintln!("feasible: a desirable mechanism exists on D/eps = {}", grid.intervals()),
                Some(w) => eprintln!(
                    "infeasible: maximal payments sum to {} at truthful profile {w:?}",
                    table.revenue_at(w)?
                ),
            }
            let text = match format.unwrap_or(Format::Csv) {
                Format::Csv => table.to_csv(),
                Format::Json => json(&table),
            };
            write_out(out, &text)?;
            Ok(if table.is_feasible() {
                EXIT_OK
            } else {
                EXIT_PROPERTY_FAILED
            })
        }
        Command::Boundary {
            alpha,
            cap,
            agents,
            full,
            ..
        } => {
            let alpha = alpha
                .or(cfg.boundary.alpha)
                .ok_or_else(|| UsageError("--alpha (or boundary.alpha) is required".into()))?;
            let cap = cap.or(cfg.boundary.cap).unwrap_or(500);
            let agents = agents.or(cfg.boundary.agents).unwrap_or(2);
            let result = if *full || cfg.boundary.full.unwrap_or(false) {
                disparity_boundary_full(alpha, cap, agents)?
            } else {
                disparity_boundary(alpha, cap, agents)?
            };
            eprintln!(
                "alpha {alpha}: boundary {}{}",
                result.boundary,
                if result.open_above { " (open above)" } else { "" }
            );
            let text = match format.unwrap_or(Format::Json) {
                Format::Json => json(&result),
                Format::Csv => to_csv(&[BoundaryRow {
                    alpha,
                    boundary: result.boundary,
                    open_above: result.open_above,
                }]),
            };
            write_out(out, &text)?;
            Ok(EXIT_OK)
        }
        Command::Sweep {
            experiment,
            seed,
            samples,
            cap,
            positive_diagonal,
            ..
        } => {
            let which = experiment
                .clone()
                .or_else(|| cfg.sweep.experiment.clone())
                .ok_or_else(|| UsageError("--experiment (or sweep.experiment) is required".into()))?;
            let fmt = format.unwrap_or(Format::Csv);
            let seed = seed.or(cfg.seed);
            let text = match which.as_str() {
                "scaling" => {
                    let mut c = cfg.sweep.scaling.clone();
                    c.seed = seed.unwrap_or(c.seed);
                    c.samples = samples.unwrap_or(c.samples);
                    c.positive_diagonal |= positive_diagonal;
                    let rows = mep_scaling_experiment(&c)?;
                    render(fmt, &rows)
                }
                "types" => {
                    let mut c = cfg.sweep.types.clone();
                    c.seed = seed.unwrap_or(c.seed);
                    c.samples = samples.unwrap_or(c.samples);
                    c.positive_diagonal |= positive_diagonal;
                    let rows = mep_type_sweep(&c)?;
                    render(fmt, &rows)
                }
                "boundary" => {
                    let mut c = cfg.sweep.boundary.clone();
                    c.cap = cap.unwrap_or(c.cap);
                    let rows = boundary_sweep(&c)?;
                    render(fmt, &rows)
                }
                other => {
                    return Err(UsageError(format!(
                        "--experiment: unknown experiment '{other}' (expected scaling, types or boundary)"
                    )))
                }
            };
            write_out(out, &text)?;
            Ok(EXIT_OK)
        }
    }
}

fn render<R: externa::experiments::CsvRecord + Serialize>(format: Format, rows: &[R]) -> String {
    match format {
        Format::Csv => to_csv(rows),
        Format::Json => json(&rows),
    }
}

fn join(values: &[f64]) -> String {
    values.iter().map(f64::to_string).collect::<Vec<_>>().join(";")
}

/// One row per violation: `property,check,profile,agent,deviation,margin,detail`.
fn audit_csv(reports: &[AuditReport]) -> String {
    let mut s = String::from("property,check,profile,agent,deviation,margin,detail\n");
    for r in reports {
        for v in &r.violations {
            let agent = v.agent.map(|a| a.to_string()).unwrap_or_default();
            let deviation = match &v.deviation {
                None => String::new(),
                Some(Deviation::Report(x)) => x.to_string(),
                Some(Deviation::Exit) => "none".into(),
                Some(Deviation::Allocation(label)) => label.clone(),
                Some(Deviation::Pair(a, b)) => format!("{a};{b}"),
            };
            let _ = writeln!(
                s,
                "{},{},{},{agent},{deviation},{},{}",
                r.property,
                v.check,
                join(&v.profile),
                v.margin,
                v.detail.as_deref().unwrap_or("")
            );
        }
    }
    s
}
