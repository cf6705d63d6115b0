//! CSV and text reports.
//!
//! Every CSV uses `,` separators, `.` decimals, UTF-8 and LF line endings,
//! with periods numbered from 1. Column orders are fixed:
//!
//! | file              | columns                                                    |
//! |-------------------|------------------------------------------------------------|
//! | `prices.csv`      | node, period, lmp, grade_supply, grade_return              |
//! | `surplus.csv`     | period, CR, IL, IU, MS_energy, MS_double, residual         |
//! | `dispatch.csv`    | source, node, period, output_mw, marginal_cost             |
//! | `temperatures.csv`| location, period, temperature, lower, upper                |
//! | `settlement.csv`  | rule, node, period, direction, energy_flow, grade_flow     |

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use crate::pricing::{Direction, Rule, Settlement};
use crate::surplus::Analysis;

/// Writes `contents` to `path` through a temporary file in the same
/// directory, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> io::Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "path has no file name"))?;
    let tmp = dir.join(format!(
        ".{}.{}.tmp",
        name.to_string_lossy(),
        std::process::id()
    ));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

fn csv_string(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

fn num(v: f64) -> String {
    // shortest representation that round-trips; never locale dependent
    format!("{v}")
}

pub fn prices_csv(a: &Analysis) -> String {
    let nodes = &a.problem.case.network.nodes;
    csv_string(
        &["node", "period", "lmp", "grade_supply", "grade_return"],
        a.prices.iter().map(|p| {
            vec![
                nodes[p.node].name.clone(),
                (p.period + 1).to_string(),
                num(p.lmp),
                num(p.grade_supply),
                num(p.grade_return),
            ]
        }),
    )
}

pub fn surplus_csv(a: &Analysis) -> String {
    csv_string(
        &[
            "period",
            "CR",
            "IL",
            "IU",
            "MS_energy",
            "MS_double",
            "residual",
        ],
        a.report.periods.iter().map(|p| {
            vec![
                (p.period + 1).to_string(),
                num(p.cr),
                num(p.il),
                num(p.iu),
                num(p.ms_energy),
                num(p.ms_double),
                num(p.residual),
            ]
        }),
    )
}

pub fn dispatch_csv(a: &Analysis) -> String {
    let case = &a.problem.case;
    let mut rows = Vec::new();
    for (t, g) in a.solution.generation.iter().enumerate() {
        for (s, src) in case.sources.iter().enumerate() {
            rows.push(vec![
                src.name.clone(),
                case.network.nodes[src.node].name.clone(),
                (t + 1).to_string(),
                num(g[s]),
                num(src.marginal_cost(g[s])),
            ]);
        }
    }
    csv_string(
        &["source", "node", "period", "output_mw", "marginal_cost"],
        rows,
    )
}

pub fn temperatures_csv(a: &Analysis) -> String {
    let case = &a.problem.case;
    let mut rows = Vec::new();
    for (t, temps) in a.solution.temperatures.iter().enumerate() {
        for (l, &v) in temps.iter().enumerate() {
            rows.push(vec![
                case.network.location_name(l),
                (t + 1).to_string(),
                num(v),
                num(case.requirements[l].lower[t]),
                num(case.requirements[l].upper[t]),
            ]);
        }
    }
    csv_string(
        &["location", "period", "temperature", "lower", "upper"],
        rows,
    )
}

pub fn settlement_csv(a: &Analysis, settlements: &[&Settlement]) -> String {
    let nodes = &a.problem.case.network.nodes;
    let rows = settlements.iter().flat_map(|s| {
        s.lines.iter().map(|l| {
            vec![
                rule_name(l.rule).to_string(),
                nodes[l.node].name.clone(),
                (l.period + 1).to_string(),
                match l.direction {
                    Direction::Pays => "pays",
                    Direction::Receives => "receives",
                }
                .to_string(),
                num(l.energy_flow),
                num(l.grade_flow),
            ]
        })
    });
    csv_string(
        &[
            "rule",
            "node",
            "period",
            "direction",
            "energy_flow",
            "grade_flow",
        ],
        rows,
    )
}

fn rule_name(rule: Rule) -> &'static str {
    match rule {
        Rule::Energy => "energy",
        Rule::Double => "double",
    }
}

/// Human-readable summary: settlement by node and rule, the surplus
/// decomposition per period, and the identity checks.
pub fn summary(a: &Analysis, rules: &[Rule]) -> String {
    let case = &a.problem.case;
    let sol = &a.solution;
    let unit = case.unit.symbol();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "case {}: {} nodes, {} periods of {} h, temperatures in {}",
        case.name,
        case.network.num_nodes(),
        case.periods,
        case.interval_hours(),
        unit
    );
    let _ = writeln!(
        out,
        "solver: {} after {} iterations, max KKT residual {:.2e}, cost {:.4} $",
        sol.status,
        sol.iterations,
        sol.residuals.max_residual(),
        sol.objective
    );

    for &rule in rules {
        let settlement = match rule {
            Rule::Energy => &a.energy,
            Rule::Double => &a.double,
        };
        let _ = writeln!(
            out,
            "\n{} rule settlement over the horizon ($)",
            rule_name(rule)
        );
        let _ = writeln!(
            out,
            "  {:<10} {:>9} {:>14} {:>14} {:>14}",
            "node", "direction", "energy", "grade", "net"
        );
        for (node, n) in case.network.nodes.iter().enumerate() {
            let lines = settlement.lines.iter().filter(|l| l.node == node);
            let (mut energy, mut grade, mut net, mut dir) = (0.0, 0.0, 0.0, "pays");
            for l in lines {
                energy += l.energy_flow;
                grade += l.grade_flow;
                net += l.to_operator();
                if l.direction == Direction::Receives {
                    dir = "receives";
                }
            }
            let _ = writeln!(
                out,
                "  {:<10} {:>9} {:>14.4} {:>14.4} {:>14.4}",
                n.name, dir, energy, grade, net
            );
        }
        let _ = writeln!(out, "  merchandise surplus {:.6} $", settlement.total());
    }

    out.push('\n');
    out.push_str(&decomposition(a));
    out
}

/// The surplus decomposition per period and the horizon totals.
pub fn decomposition(a: &Analysis) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "surplus decomposition ($)");
    let _ = writeln!(
        out,
        "  {:>6} {:>12} {:>12} {:>12} {:>12} {:>12} {:>10}",
        "period", "CR", "IL", "IU", "MS_energy", "MS_double", "residual"
    );
    for p in &a.report.periods {
        let _ = writeln!(
            out,
            "  {:>6} {:>12.4} {:>12.4} {:>12.4} {:>12.4} {:>12.4} {:>10.2e}",
            p.period + 1,
            p.cr,
            p.il,
            p.iu,
            p.ms_energy,
            p.ms_double,
            p.residual
        );
    }
    let total = &a.report.total;
    let _ = writeln!(out, "\nhorizon");
    let _ = writeln!(
        out,
        "  energy-rule surplus   {:.6} $",
        a.report.energy_total
    );
    let _ = writeln!(out, "  double-rule surplus   {:.6} $", total.surplus);
    let _ = writeln!(
        out,
        "  congestion rent       {:.6} $",
        total.congestion_total
    );
    let _ = writeln!(
        out,
        "  initial state term    {:.6} $",
        total.initial_state_term
    );
    if !total.constant_ambient {
        let _ = writeln!(out, "  ambient drift term    {:.6} $", total.ambient_drift);
    }
    let _ = writeln!(
        out,
        "  total identity residual {:.2e} $ (max period residual {:.2e} $)",
        total.residual,
        a.report.max_period_residual()
    );
    for w in &a.report.warnings {
        let _ = writeln!(out, "  warning: {w}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qp::QpSettings;
    use crate::scenarios;
    use crate::surplus::analyse;

    #[test]
    fn csv_headers_and_line_endings() {
        let a = analyse(&scenarios::toy(), &QpSettings::default()).unwrap();
        let prices = prices_csv(&a);
        assert!(prices.starts_with("node,period,lmp,grade_supply,grade_return\n"));
        assert!(!prices.contains('\r'));
        assert_eq!(prices.lines().count(), 1 + 2 * 3);
        let surplus = surplus_csv(&a);
        assert!(surplus.starts_with("period,CR,IL,IU,MS_energy,MS_double,residual\n"));
        assert!(surplus.lines().nth(1).unwrap().starts_with("1,"));
    }

    #[test]
    fn numbers_round_trip() {
        let a = analyse(&scenarios::toy(), &QpSettings::default()).unwrap();
        let text = prices_csv(&a);
        let second = text.lines().nth(1).unwrap();
        let lmp: f64 = second.split(',').nth(2).unwrap().parse().unwrap();
        assert_eq!(lmp, a.prices.get(0, 0).lmp);
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        write_atomic(&path, b"a\n").unwrap();
        write_atomic(&path, b"b\n").unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "b\n");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn summary_mentions_both_rules() {
        let a = analyse(&scenarios::toy(), &QpSettings::default()).unwrap();
        let s = summary(&a, &[Rule::Energy, Rule::Double]);
        assert!(s.contains("energy rule settlement"));
        assert!(s.contains("double rule settlement"));
        assert!(s.contains("NH2"));
    }
}
