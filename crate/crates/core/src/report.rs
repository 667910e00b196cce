//! Plain-text and CSV rendering.
//!
//! CSV numbers carry six significant digits with trailing zeros kept
//! (`0.900000`, `10000.0`); magnitudes outside `[1e-4, 1e6)` switch to
//! exponent form (`1.23457e-5`). Undefined numeric cells are `NA`. Lines end
//! with `\n`.

use std::fmt::Write as _;

use thiserror::Error;

use crate::error::Error;
use crate::estimators::{estimate, Arms, ControlGroup, Method, ObservedCounts};
use crate::population::assumption_gap;
use crate::sampling::Sampling;
use crate::simulate::{run_scenario, Adjustment, McSummary, Scenario, ScenarioOutcome, SweepResult};
use crate::testing::{apply_test, ConfusionTable};

/// Six significant digits, trailing zeros kept.
pub fn sig6(x: f64) -> String {
    if !x.is_finite() {
        return "NA".into();
    }
    let x = if x == 0.0 { 0.0 } else { x };
    // Exponent after rounding to six significant digits.
    let sci = format!("{x:.5e}");
    let exp: i32 = sci[sci.find('e').unwrap() + 1..].parse().unwrap();
    if (-4..6).contains(&exp) {
        format!("{:.*}", (5 - exp) as usize, x)
    } else {
        sci
    }
}

pub fn opt_sig6(x: Option<f64>) -> String {
    x.map(sig6).unwrap_or_else(|| "NA".into())
}

/// VE as printed in text reports.
pub fn ve5(x: f64) -> String {
    format!("{x:.5}")
}

/// Whole counts print as integers, anything else with six significant digits.
pub fn count(x: f64) -> String {
    if (x - x.round()).abs() < 1e-9 {
        format!("{:.0}", x.round() + 0.0)
    } else {
        sig6(x)
    }
}

pub const SWEEP_TRAILER: [&str; 11] = [
    "ve",
    "method",
    "control_group",
    "mc_mean",
    "mc_sd",
    "q025",
    "q50",
    "q975",
    "error_rate",
    "assumption_gap",
    "clamped",
];

fn clamped_cell(scenario: &Scenario, outcome: &Result<ScenarioOutcome, Error>) -> String {
    match (scenario.adjustment, outcome) {
        (Adjustment::RoganGladen, Ok(o)) => o.clamped.to_string(),
        _ => "NA".into(),
    }
}

pub fn sweep_csv(result: &SweepResult) -> String {
    let mut out = String::new();
    let mut header: Vec<String> = result.columns.iter().map(|p| p.path()).collect();
    header.extend(SWEEP_TRAILER.iter().map(|s| s.to_string()));
    out.push_str(&header.join(","));
    out.push('\n');
    for row in &result.rows {
        let mut cells: Vec<String> = row.values.iter().map(|v| sig6(*v)).collect();
        let outcome = row.outcome.as_ref().ok();
        cells.push(opt_sig6(outcome.map(|o| o.estimate.value)));
        cells.push(row.scenario.method.to_string());
        cells.push(row.scenario.effective_control().to_string());
        let mc = row.monte_carlo.as_ref().and_then(|m| m.as_ref().ok());
        cells.push(opt_sig6(mc.map(|m| m.mean)));
        cells.push(opt_sig6(mc.and_then(|m| m.sd)));
        cells.push(opt_sig6(mc.map(|m| m.q025)));
        cells.push(opt_sig6(mc.map(|m| m.q50)));
        cells.push(opt_sig6(mc.map(|m| m.q975)));
        cells.push(sig6(row.error_rate()));
        cells.push(opt_sig6(outcome.and_then(|o| o.assumption_gap)));
        cells.push(clamped_cell(&row.scenario, &row.outcome));
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

fn table(rows: &[Vec<String>]) -> String {
    aligned(rows, "l")
}

/// Column `k` is left-aligned when `align[k] == 'l'`; columns past the end
/// of `align` are right-aligned.
fn aligned(rows: &[Vec<String>], align: &str) -> String {
    let left: Vec<bool> = align.chars().map(|c| c == 'l').collect();
    let cols = rows.iter().map(|r| r.len()).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| {
            rows.iter()
                .filter_map(|r| r.get(c))
                .map(|s| s.chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for r in rows {
        let mut line = String::new();
        for (c, cell) in r.iter().enumerate() {
            if left.get(c).copied().unwrap_or(false) {
                write!(line, "  {:<w$}", cell, w = widths[c]).unwrap();
            } else {
                write!(line, "  {:>w$}", cell, w = widths[c]).unwrap();
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

pub fn sweep_text(result: &SweepResult) -> String {
    let mut rows = vec![{
        let mut h: Vec<String> = result.columns.iter().map(|p| p.path()).collect();
        h.extend(["ve", "mc_mean", "mc_sd", "error_rate", "assumption_gap", "note"].map(String::from));
        h
    }];
    for row in &result.rows {
        let mut cells: Vec<String> = row.values.iter().map(|v| sig6(*v)).collect();
        let mc = row.monte_carlo.as_ref().and_then(|m| m.as_ref().ok());
        cells.push(match &row.outcome {
            Ok(o) => ve5(o.estimate.value),
            Err(_) => "NA".into(),
        });
        cells.push(mc.map(|m| ve5(m.mean)).unwrap_or_else(|| "NA".into()));
        cells.push(opt_sig6(mc.and_then(|m| m.sd)));
        cells.push(sig6(row.error_rate()));
        cells.push(opt_sig6(row.outcome.as_ref().ok().and_then(|o| o.assumption_gap)));
        let mut notes = Vec::new();
        if let Err(e) = &row.outcome {
            notes.push(e.tag());
        }
        if let Some(Err(e)) = &row.monte_carlo {
            notes.push(format!("mc {}", e.tag()));
        }
        if let Some(m) = mc {
            for (tag, n) in &m.failures {
                notes.push(format!("{n}x {tag}"));
            }
        }
        cells.push(notes.join("; "));
        rows.push(cells);
    }
    let method = result
        .rows
        .first()
        .map(|r| format!("{} / {}", r.scenario.method, r.scenario.effective_control()))
        .unwrap_or_default();
    let mut align = "r".repeat(result.columns.len() + 5);
    align.push('l');
    format!("estimator: {method}\n{}", aligned(&rows, &align))
}

/// A worked example: name, test, and the exact VE as `1 - numerator / denominator`.
struct Example {
    title: &'static str,
    sensitivity: f64,
    specificity: f64,
    reference: (u64, u64),
}

const EXAMPLES: [Example; 3] = [
    Example {
        title: "perfect test",
        sensitivity: 1.0,
        specificity: 1.0,
        reference: (100, 1_000),
    },
    Example {
        title: "sensitivity 0.70, specificity 0.95",
        sensitivity: 0.70,
        specificity: 0.95,
        reference: (565, 1_150),
    },
    Example {
        title: "sensitivity 0.95, specificity 0.70",
        sensitivity: 0.95,
        specificity: 0.70,
        reference: (3_065, 3_650),
    },
];

pub const SELF_CHECK_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("self-check failed for {example}: computed {computed}, reference {reference}")]
    SelfCheck {
        example: String,
        computed: f64,
        reference: f64,
    },
    #[error(transparent)]
    Estimate(#[from] Error),
}

struct Reproduced {
    example: &'static Example,
    vaccinated: ConfusionTable,
    unvaccinated: ConfusionTable,
    outcome: ScenarioOutcome,
    reference: f64,
}

fn reproduce() -> Result<Vec<Reproduced>, ReportError> {
    let mut out = Vec::new();
    for example in &EXAMPLES {
        let scenario = Scenario::paper_baseline().with_test(example.sensitivity, example.specificity);
        let test = scenario.test()?;
        let outcome = run_scenario(&scenario)?;
        let t = &outcome.table;
        let vaccinated = apply_test(t.a(), t.b() + t.c(), &test, Sampling::Deterministic)?;
        let unvaccinated = apply_test(t.g(), t.h() + t.i(), &test, Sampling::Deterministic)?;
        let reference = 1.0 - example.reference.0 as f64 / example.reference.1 as f64;
        let computed = outcome.estimate.value;
        if !((computed - reference).abs() <= SELF_CHECK_TOLERANCE) {
            return Err(ReportError::SelfCheck {
                example: example.title.into(),
                computed,
                reference,
            });
        }
        out.push(Reproduced {
            example,
            vaccinated,
            unvaccinated,
            outcome,
            reference,
        });
    }
    Ok(out)
}

fn confusion_rows(label: &str, c: &ConfusionTable) -> Vec<Vec<String>> {
    vec![
        vec![label.into(), "infected".into(), "not infected".into(), "total".into()],
        vec![
            "test positive".into(),
            count(c.true_positive),
            count(c.false_positive),
            count(c.positives()),
        ],
        vec![
            "test negative".into(),
            count(c.false_negative),
            count(c.true_negative),
            count(c.negatives()),
        ],
        vec![
            "total".into(),
            count(c.infected()),
            count(c.not_infected()),
            count(c.total()),
        ],
    ]
}

/// The three worked examples, recomputed and checked against their exact
/// fractions before anything is printed.
pub fn reproduce_paper_text() -> Result<String, ReportError> {
    let mut out = String::new();
    let base = Scenario::paper_baseline();
    writeln!(
        out,
        "Population: {} vaccinated (prevalence {}), {} unvaccinated (prevalence {}), everyone seeks care.",
        count(base.sizes.vaccinated),
        base.prevalence.vaccinated,
        count(base.sizes.unvaccinated),
        base.prevalence.unvaccinated
    )
    .unwrap();
    for (k, r) in reproduce()?.iter().enumerate() {
        writeln!(out).unwrap();
        writeln!(out, "Example {}: {}", k + 1, r.example.title).unwrap();
        writeln!(out).unwrap();
        out.push_str(&table(&confusion_rows("vaccinated people", &r.vaccinated)));
        writeln!(out).unwrap();
        out.push_str(&table(&confusion_rows("unvaccinated people", &r.unvaccinated)));
        writeln!(out).unwrap();
        let o = &r.outcome.observed;
        let neg_v = o.b + o.c;
        let neg_u = o.h + o.i;
        out.push_str(&table(&[
            vec!["".into(), "test positive".into(), "test negative".into(), "total".into()],
            vec!["vaccinated".into(), format!("A = {}", count(o.a)), format!("B = {}", count(neg_v)), format!("N1 = {}", count(o.n1()))],
            vec!["not vaccinated".into(), format!("G = {}", count(o.g)), format!("H = {}", count(neg_u)), format!("N3 = {}", count(o.n3()))],
            vec!["total".into(), count(o.a + o.g), count(neg_v + neg_u), count(o.n1() + o.n3())],
        ]));
        writeln!(out).unwrap();
        writeln!(
            out,
            "  VE-hat = {}  (exact 1 - {}/{} = {})",
            ve5(r.outcome.estimate.value),
            r.example.reference.0,
            r.example.reference.1,
            sig6(r.reference)
        )
        .unwrap();
    }
    Ok(out)
}

pub fn reproduce_paper_csv() -> Result<String, ReportError> {
    let mut out = String::from(
        "example,sensitivity,specificity,vaccinated_tp,vaccinated_fp,vaccinated_positive,vaccinated_negative,\
unvaccinated_tp,unvaccinated_fp,unvaccinated_positive,unvaccinated_negative,ve,reference\n",
    );
    for (k, r) in reproduce()?.iter().enumerate() {
        let cells = [
            (k + 1).to_string(),
            sig6(r.example.sensitivity),
            sig6(r.example.specificity),
            sig6(r.vaccinated.true_positive),
            sig6(r.vaccinated.false_positive),
            sig6(r.vaccinated.positives()),
            sig6(r.vaccinated.negatives()),
            sig6(r.unvaccinated.true_positive),
            sig6(r.unvaccinated.false_positive),
            sig6(r.unvaccinated.positives()),
            sig6(r.unvaccinated.negatives()),
            sig6(r.outcome.estimate.value),
            sig6(r.reference),
        ];
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    Ok(out)
}

/// Every estimator on one set of observed counts.
pub struct EstimateReport {
    pub counts: ObservedCounts,
    pub rows: Vec<(Method, ControlGroup, Result<f64, Error>)>,
    pub assumption_gap: Result<f64, Error>,
}

pub fn estimate_all(counts: &ObservedCounts) -> EstimateReport {
    let mut rows = vec![(
        Method::RiskRatio,
        ControlGroup::NotApplicable,
        estimate(counts, Method::RiskRatio, ControlGroup::NotApplicable).map(|e| e.value),
    )];
    for policy in ControlGroup::POLICIES {
        rows.push((
            Method::OddsRatio,
            policy,
            estimate(counts, Method::OddsRatio, policy).map(|e| e.value),
        ));
    }
    EstimateReport {
        counts: *counts,
        rows,
        assumption_gap: assumption_gap(&counts.as_table()),
    }
}

impl EstimateReport {
    pub fn text(&self) -> String {
        let c = &self.counts;
        let mut out = String::new();
        writeln!(
            out,
            "vaccinated:   a = {}, b = {}, c = {}, n1 = {}",
            count(c.a),
            count(c.b),
            count(c.c),
            count(c.n1())
        )
        .unwrap();
        writeln!(
            out,
            "unvaccinated: g = {}, h = {}, i = {}, n3 = {}",
            count(c.g),
            count(c.h),
            count(c.i),
            count(c.n3())
        )
        .unwrap();
        match &self.assumption_gap {
            Ok(g) => writeln!(out, "assumption gap |b/n1 - h/n3| = {}", sig6(*g)).unwrap(),
            Err(e) => writeln!(out, "assumption gap undefined: {e}").unwrap(),
        }
        writeln!(out).unwrap();
        let mut rows = vec![vec![
            "method".to_string(),
            "control group".into(),
            "ve".into(),
            "note".into(),
        ]];
        for (m, cg, v) in &self.rows {
            let (ve, note) = match v {
                Ok(v) => (ve5(*v), String::new()),
                Err(e) => ("NA".into(), e.to_string()),
            };
            rows.push(vec![m.to_string(), cg.to_string(), ve, note]);
        }
        out.push_str(&aligned(&rows, "llrl"));
        out
    }

    pub fn csv(&self) -> String {
        let mut out = String::from("method,control_group,ve,error,assumption_gap\n");
        let gap = self.assumption_gap.as_ref().ok().copied();
        for (m, cg, v) in &self.rows {
            let (ve, err) = match v {
                Ok(v) => (sig6(*v), String::new()),
                Err(e) => ("NA".into(), e.tag()),
            };
            writeln!(out, "{m},{cg},{ve},{err},{}", opt_sig6(gap)).unwrap();
        }
        out
    }
}

/// One scenario run, optionally with its Monte Carlo summary.
pub fn scenario_text(
    scenario: &Scenario,
    outcome: &Result<ScenarioOutcome, Error>,
    mc: Option<&Result<McSummary, Error>>,
) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "estimator: {} / {} (adjustment {}), mode {}",
        scenario.method,
        scenario.effective_control(),
        scenario.adjustment,
        scenario.mode
    )
    .unwrap();
    writeln!(
        out,
        "test: sensitivity {}, specificity {}",
        scenario.sensitivity, scenario.specificity
    )
    .unwrap();
    if mc.is_some() {
        writeln!(out, "\nExpected counts (deterministic run of the same scenario):").unwrap();
    }
    match outcome {
        Ok(o) => {
            let t = &o.table;
            writeln!(out).unwrap();
            out.push_str(&table(&[
                vec![
                    "study table".into(),
                    "target".into(),
                    "other".into(),
                    "none".into(),
                    "total".into(),
                ],
                vec![
                    "vaccinated, seek care".into(),
                    count(t.a()),
                    count(t.b()),
                    count(t.c()),
                    count(t.n1()),
                ],
                vec![
                    "vaccinated, no care".into(),
                    count(t.vaccinated.no_seek.target),
                    count(t.vaccinated.no_seek.other),
                    count(t.vaccinated.no_seek.uninfected),
                    count(t.n2()),
                ],
                vec![
                    "unvaccinated, seek care".into(),
                    count(t.g()),
                    count(t.h()),
                    count(t.i()),
                    count(t.n3()),
                ],
                vec![
                    "unvaccinated, no care".into(),
                    count(t.unvaccinated.no_seek.target),
                    count(t.unvaccinated.no_seek.other),
                    count(t.unvaccinated.no_seek.uninfected),
                    count(t.n4()),
                ],
            ]));
            writeln!(out).unwrap();
            let c = &o.observed;
            out.push_str(&table(&[
                vec![
                    "observed".into(),
                    "target positive".into(),
                    "other positive".into(),
                    "pan-negative".into(),
                    "total".into(),
                ],
                vec!["vaccinated".into(), count(c.a), count(c.b), count(c.c), count(c.n1())],
                vec!["unvaccinated".into(), count(c.g), count(c.h), count(c.i), count(c.n3())],
            ]));
            writeln!(out).unwrap();
            writeln!(out, "VE-hat = {}", ve5(o.estimate.value)).unwrap();
            match o.design_ve {
                Some(v) => writeln!(out, "design VE (true care-seeker table) = {}", ve5(v)).unwrap(),
                None => writeln!(out, "design VE undefined").unwrap(),
            }
            writeln!(out, "assumption gap = {}", opt_sig6(o.assumption_gap)).unwrap();
            if scenario.adjustment == Adjustment::RoganGladen {
                writeln!(out, "correction clamped: {}", o.clamped).unwrap();
            }
        }
        Err(e) => writeln!(out, "estimate failed: {} ({e})", e.tag()).unwrap(),
    }
    if let Some(mc) = mc {
        writeln!(out).unwrap();
        match mc {
            Ok(m) => {
                writeln!(out, "Monte Carlo: {} replicates, {} failed", m.replications, m.failed()).unwrap();
                writeln!(out, "  mean = {}", sig6(m.mean)).unwrap();
                writeln!(out, "  sd = {}", opt_sig6(m.sd)).unwrap();
                writeln!(
                    out,
                    "  quantiles 2.5% / 50% / 97.5% = {} / {} / {}",
                    sig6(m.q025),
                    sig6(m.q50),
                    sig6(m.q975)
                )
                .unwrap();
                writeln!(out, "  error rate = {}", sig6(m.error_rate())).unwrap();
                for (tag, n) in &m.failures {
                    writeln!(out, "  {n} x {tag}").unwrap();
                }
                if scenario.adjustment == Adjustment::RoganGladen {
                    writeln!(out, "  clamped rate = {}", sig6(m.clamped_rate)).unwrap();
                }
            }
            Err(e) => writeln!(out, "Monte Carlo failed: {} ({e})", e.tag()).unwrap(),
        }
    }
    out
}

pub fn scenario_csv(
    scenario: &Scenario,
    outcome: &Result<ScenarioOutcome, Error>,
    mc: Option<&Result<McSummary, Error>>,
) -> String {
    let header = SWEEP_TRAILER.join(",");
    let ok = outcome.as_ref().ok();
    let m = mc.and_then(|m| m.as_ref().ok());
    let error_rate = match mc {
        Some(Ok(m)) => m.error_rate(),
        Some(Err(_)) => 1.0,
        None => (ok.is_none() as u8) as f64,
    };
    let cells = [
        opt_sig6(ok.map(|o| o.estimate.value)),
        scenario.method.to_string(),
        scenario.effective_control().to_string(),
        opt_sig6(m.map(|m| m.mean)),
        opt_sig6(m.and_then(|m| m.sd)),
        opt_sig6(m.map(|m| m.q025)),
        opt_sig6(m.map(|m| m.q50)),
        opt_sig6(m.map(|m| m.q975)),
        sig6(error_rate),
        opt_sig6(ok.and_then(|o| o.assumption_gap)),
        clamped_cell(scenario, outcome),
    ];
    format!("{header}\n{}\n", cells.join(","))
}

/// Convenience used by reports and tests: positive counts of the worked
/// example's arms under a test.
pub fn example_positives(sensitivity: f64, specificity: f64) -> Result<Arms<f64>, Error> {
    let s = Scenario::paper_baseline().with_test(sensitivity, specificity);
    let o = run_scenario(&s)?;
    Ok(Arms::new(o.observed.a, o.observed.g))
}
