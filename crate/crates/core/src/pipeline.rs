//! End-to-end runs behind the command-line tool.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::case::{convert_units, CaseDefinition};
use crate::case_file::{load_case, CaseFileError};
use crate::dispatch::DispatchError;
use crate::oracle::{verify_prices, OracleOptions, PriceKind};
use crate::pricing::Rule;
use crate::qp::QpSettings;
use crate::report;
use crate::scenarios;
use crate::surplus::{analyse, verify_unit_invariance, Analysis};
use crate::units::TemperatureUnit;

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    InputError = 1,
    SolverFailure = 2,
    IdentityFailure = 3,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Case(#[from] CaseFileError),
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Dispatch(#[from] DispatchError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl PipelineError {
    pub fn exit_status(&self) -> ExitStatus {
        match self {
            PipelineError::Case(_) | PipelineError::Input(_) => ExitStatus::InputError,
            PipelineError::Dispatch(DispatchError::Network(_)) => ExitStatus::InputError,
            PipelineError::Dispatch(_) => ExitStatus::SolverFailure,
            PipelineError::Io { .. } => ExitStatus::InputError,
        }
    }
}

/// Loads a case from a path, or a bundled case by name (`toy`, `fournode`,
/// `island`) when no such file exists.
pub fn resolve_case(arg: &str) -> Result<CaseDefinition, PipelineError> {
    let path = Path::new(arg);
    if path.exists() {
        return Ok(load_case(path)?);
    }
    let stem = arg.strip_suffix(".case").unwrap_or(arg);
    scenarios::by_name(stem).ok_or_else(|| {
        PipelineError::Input(format!(
            "no case file `{arg}` and no bundled case of that name (toy, fournode, island)"
        ))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleSelection {
    Energy,
    Double,
    Both,
}

impl RuleSelection {
    pub fn rules(self) -> Vec<Rule> {
        match self {
            RuleSelection::Energy => vec![Rule::Energy],
            RuleSelection::Double => vec![Rule::Double],
            RuleSelection::Both => vec![Rule::Energy, Rule::Double],
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub rules: RuleSelection,
    /// Temperature unit to solve and report in; the case's own unit if unset.
    pub unit: Option<TemperatureUnit>,
    pub out_dir: Option<PathBuf>,
    pub tolerance: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            rules: RuleSelection::Both,
            unit: None,
            out_dir: None,
            tolerance: QpSettings::default().tolerance,
        }
    }
}

/// Largest identity residual accepted for a solver tolerance, $.
pub fn identity_threshold(tolerance: f64) -> f64 {
    (100.0 * tolerance).max(1e-5)
}

#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub analysis: Analysis,
    pub summary: String,
    pub written: Vec<PathBuf>,
    pub status: ExitStatus,
    /// Why the run did not succeed, if it did not.
    pub failures: Vec<String>,
}

fn write(
    dir: &Path,
    name: &str,
    contents: &str,
    written: &mut Vec<PathBuf>,
) -> Result<(), PipelineError> {
    let path = dir.join(name);
    report::write_atomic(&path, contents.as_bytes()).map_err(|source| PipelineError::Io {
        path: path.clone(),
        source,
    })?;
    written.push(path);
    Ok(())
}

/// Solves, prices, settles and decomposes `case`, writing reports to
/// `options.out_dir` when set.
pub fn run_pipeline(
    case: &CaseDefinition,
    options: &SolveOptions,
) -> Result<PipelineRun, PipelineError> {
    let case = match options.unit {
        Some(unit) => convert_units(case, unit),
        None => case.clone(),
    };
    let settings = QpSettings::with_tolerance(options.tolerance);
    let analysis = analyse(&case, &settings)?;
    let rules = options.rules.rules();
    let summary = report::summary(&analysis, &rules);

    let threshold = identity_threshold(options.tolerance);
    let mut failures = Vec::new();
    let worst = analysis.report.max_period_residual();
    if worst > threshold {
        failures.push(format!(
            "period identity residual {worst:.3e} $ exceeds {threshold:.1e} $"
        ));
    }
    let total = &analysis.report.total;
    if total.constant_ambient {
        if total.residual.abs() > threshold {
            failures.push(format!(
                "total identity residual {:.3e} $ exceeds {threshold:.1e} $",
                total.residual
            ));
        }
        if total.surplus < -threshold {
            failures.push(format!(
                "double-rule surplus {:.6} $ is negative",
                total.surplus
            ));
        }
    }

    let mut written = Vec::new();
    if let Some(dir) = &options.out_dir {
        std::fs::create_dir_all(dir).map_err(|source| PipelineError::Io {
            path: dir.clone(),
            source,
        })?;
        let settlements: Vec<_> = rules
            .iter()
            .map(|r| match r {
                Rule::Energy => &analysis.energy,
                Rule::Double => &analysis.double,
            })
            .collect();
        write(
            dir,
            "prices.csv",
            &report::prices_csv(&analysis),
            &mut written,
        )?;
        write(
            dir,
            "surplus.csv",
            &report::surplus_csv(&analysis),
            &mut written,
        )?;
        write(
            dir,
            "dispatch.csv",
            &report::dispatch_csv(&analysis),
            &mut written,
        )?;
        write(
            dir,
            "temperatures.csv",
            &report::temperatures_csv(&analysis),
            &mut written,
        )?;
        write(
            dir,
            "settlement.csv",
            &report::settlement_csv(&analysis, &settlements),
            &mut written,
        )?;
        write(dir, "summary.txt", &summary, &mut written)?;
    }

    Ok(PipelineRun {
        analysis,
        summary,
        written,
        status: if failures.is_empty() {
            ExitStatus::Success
        } else {
            ExitStatus::IdentityFailure
        },
        failures,
    })
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub finite_differences: bool,
    /// Overrides both perturbation sizes.
    pub eps: Option<f64>,
    pub tolerance: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            finite_differences: false,
            eps: None,
            tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct VerificationRun {
    pub text: String,
    pub status: ExitStatus,
}

/// Runs every identity check, the unit comparison and, optionally, the
/// finite-difference oracle. One line per check.
pub fn run_verification(
    case: &CaseDefinition,
    options: &VerifyOptions,
) -> Result<VerificationRun, PipelineError> {
    let settings = QpSettings::with_tolerance(options.tolerance);
    let a = analyse(case, &settings)?;
    let threshold = identity_threshold(options.tolerance);
    let mut text = String::new();
    let mut ok = true;

    let r = &a.report;
    check(
        &mut text,
        &mut ok,
        "kkt stationarity",
        r.max_stationarity <= 10.0 * options.tolerance.max(1e-9),
        format!("max residual {:.2e}", r.max_stationarity),
    );
    check(
        &mut text,
        &mut ok,
        "period identity",
        r.max_period_residual() <= threshold,
        format!(
            "max |Υ_t − (CR_t + IL_t + IU_t)| = {:.2e} $",
            r.max_period_residual()
        ),
    );
    if r.total.constant_ambient {
        check(
            &mut text,
            &mut ok,
            "total identity",
            r.total.residual.abs() <= threshold && r.total.surplus >= -threshold,
            format!(
                "residual {:.2e} $, Υ = {:.6} $",
                r.total.residual, r.total.surplus
            ),
        );
    } else {
        let _ = writeln!(
            text,
            "INFO total identity: ambient varies; residual {:.2e} $ with drift term {:.6} $, Υ = {:.6} $",
            r.total.residual, r.total.ambient_drift, r.total.surplus
        );
    }
    let signs = r.warnings.is_empty();
    check(
        &mut text,
        &mut ok,
        "component signs",
        signs,
        if signs {
            "CR ≥ 0, IL ≥ 0, IU ≤ 0 in every period".into()
        } else {
            r.warnings.join("; ")
        },
    );

    let cmp = verify_unit_invariance(case, &settings)?;
    check(
        &mut text,
        &mut ok,
        "unit invariance",
        cmp.surplus_deviation <= 1e-6 && cmp.lambda_deviation <= 1e-4 && cmp.mu_deviation <= 1e-4,
        format!(
            "surplus {:.2e}, λ {:.2e}, 𝒦μ {:.2e} (relative)",
            cmp.surplus_deviation, cmp.lambda_deviation, cmp.mu_deviation
        ),
    );

    if options.finite_differences {
        let mut oracle = OracleOptions {
            settings,
            ..OracleOptions::default()
        };
        if let Some(eps) = options.eps {
            oracle.energy_eps = eps;
            oracle.grade_eps = eps;
        }
        let report = verify_prices(&a.problem, &a.solution, &oracle)?;
        let checked = report.non_degenerate().count();
        let degenerate = report.rows.len() - checked;
        let failures: Vec<_> = report.failures().collect();
        let worst = report
            .non_degenerate()
            .map(|r| r.relative_error)
            .fold(0.0, f64::max);
        check(
            &mut text,
            &mut ok,
            "finite-difference prices",
            failures.is_empty(),
            format!(
                "{checked} rows within {:.0}% (worst {:.2e}), {degenerate} degenerate",
                100.0 * oracle.tolerance,
                worst
            ),
        );
        let net = &case.network;
        for f in failures {
            let what = match f.kind {
                PriceKind::Energy => format!("LMP of {}", net.nodes[f.entity].name),
                PriceKind::Grade => format!("grade price at {}", net.location_name(f.entity)),
                PriceKind::UpperBound => format!("upper bound at {}", net.location_name(f.entity)),
            };
            let _ = writeln!(
                text,
                "  {what}, period {}: dual {:.6} vs finite difference {:.6}",
                f.period + 1,
                f.dual,
                f.fd.value
            );
        }
    }

    Ok(VerificationRun {
        text,
        status: if ok {
            ExitStatus::Success
        } else {
            ExitStatus::IdentityFailure
        },
    })
}

fn check(text: &mut String, ok: &mut bool, name: &str, pass: bool, detail: String) {
    *ok &= pass;
    let _ = writeln!(
        text,
        "{} {name}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
}
