//! Line-oriented scenario files.
//!
//! ```text
//! # comment
//! schema = 1
//! kind = scenario            # or sweep
//! vaccinated.size = 10000
//! unvaccinated.size = 10000
//! vaccinated.prevalence = 0.01
//! unvaccinated.prevalence = 0.10
//! test.sensitivity = 1.0
//! test.specificity = 1.0
//! ```
//!
//! Optional keys (defaults in brackets): `vaccinated.other_prevalence`,
//! `unvaccinated.other_prevalence` [0], `care.<arm>.<target|other|uninfected>`
//! [1], `estimator` [risk-ratio], `control` [combined], `adjustment` [none],
//! `mode` [deterministic], `seed` [required when stochastic],
//! `replications` [1].
//!
//! Sweeps set `kind = sweep` and list values with `sweep.<parameter> = v1, v2`.
//! A swept parameter needs no base value. `sweep.zip = p1, p2; p3, p4` makes
//! each group of parameters one axis whose values advance together. Axes are
//! ordered by the first appearance of any of their parameters.

use std::collections::HashMap;
use std::fmt;
use std::fmt::Write as _;

use thiserror::Error;

use crate::estimators::{Arms, ControlGroup, Method};
use crate::population::CareSeeking;
use crate::simulate::{Adjustment, Axis, Mode, Param, Scenario, SweepSpec};

pub const SCHEMA_VERSION: &str = "1";

/// A problem found in a config file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Issue {
    pub line: Option<usize>,
    pub key: Option<String>,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(line) = self.line {
            write!(f, "line {line}: ")?;
        }
        if let Some(key) = &self.key {
            write!(f, "{key}: ")?;
        }
        f.write_str(&self.message)
    }
}

fn join(issues: &[Issue]) -> String {
    issues
        .iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join("\n")
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("malformed config:\n{}", join(.0))]
    Syntax(Vec<Issue>),
    #[error("invalid config:\n{}", join(.0))]
    Schema(Vec<Issue>),
    #[error("unsupported schema version {found:?} (expected {SCHEMA_VERSION})")]
    Version { found: String },
}

impl ConfigError {
    pub fn issues(&self) -> &[Issue] {
        match self {
            ConfigError::Syntax(v) | ConfigError::Schema(v) => v,
            ConfigError::Version { .. } => &[],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Config {
    Scenario { scenario: Scenario, replications: usize },
    Sweep(SweepSpec),
}

struct Entry {
    line: usize,
    value: String,
}

const REQUIRED_NUMERIC: [&str; 6] = [
    "vaccinated.size",
    "unvaccinated.size",
    "vaccinated.prevalence",
    "unvaccinated.prevalence",
    "test.sensitivity",
    "test.specificity",
];

const SETTINGS: [&str; 8] = [
    "schema",
    "kind",
    "estimator",
    "control",
    "adjustment",
    "mode",
    "seed",
    "replications",
];

pub fn parse_config(text: &str) -> Result<Config, ConfigError> {
    let mut entries: HashMap<String, Entry> = HashMap::new();
    let mut order: Vec<String> = Vec::new();
    let mut syntax = Vec::new();
    let mut issues = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            syntax.push(Issue {
                line: Some(line),
                key: None,
                message: format!("expected `key = value`, got {content:?}"),
            });
            continue;
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if key.is_empty() {
            syntax.push(Issue {
                line: Some(line),
                key: None,
                message: "empty key".into(),
            });
            continue;
        }
        if let Some(prev) = entries.get(&key) {
            issues.push(Issue {
                line: Some(line),
                key: Some(key.clone()),
                message: format!("duplicate key, first set on line {}", prev.line),
            });
            continue;
        }
        order.push(key.clone());
        entries.insert(key, Entry { line, value });
    }
    if !syntax.is_empty() {
        return Err(ConfigError::Syntax(syntax));
    }

    if let Some(schema) = entries.get("schema") {
        if schema.value != SCHEMA_VERSION {
            return Err(ConfigError::Version {
                found: schema.value.clone(),
            });
        }
    }

    let mut p = Parser {
        entries: &entries,
        issues,
    };

    // Unknown keys.
    for key in &order {
        let known = SETTINGS.contains(&key.as_str())
            || Param::from_path(key).is_some()
            || key == "sweep.zip"
            || key
                .strip_prefix("sweep.")
                .is_some_and(|rest| Param::from_path(rest).is_some());
        if !known {
            let line = entries[key].line;
            p.issue(Some(line), key, "unknown key".into());
        }
    }

    let kind = p.enumerated("kind", None, |s| match s {
        "scenario" | "sweep" => Ok(s.to_string()),
        _ => Err(format!("expected scenario or sweep, got {s:?}")),
    });

    // Swept parameters, in file order.
    let mut swept: Vec<(Param, Vec<f64>, usize)> = Vec::new();
    for key in &order {
        let Some(param) = key.strip_prefix("sweep.").and_then(Param::from_path) else {
            continue;
        };
        let entry = &entries[key];
        let mut values = Vec::new();
        let mut ok = true;
        for item in entry.value.split(',') {
            match parse_number(item.trim()) {
                Ok(v) => match param.check(v) {
                    Ok(()) => values.push(v),
                    Err(e) => {
                        p.issue(Some(entry.line), key, e.to_string());
                        ok = false;
                    }
                },
                Err(m) => {
                    p.issue(Some(entry.line), key, m);
                    ok = false;
                }
            }
        }
        if ok {
            swept.push((param, values, entry.line));
        }
    }

    let mut missing = Vec::new();
    for key in ["schema", "kind"] {
        if !entries.contains_key(key) {
            missing.push(key.to_string());
        }
    }
    for key in REQUIRED_NUMERIC {
        let in_sweep = entries.contains_key(&format!("sweep.{key}"));
        if !entries.contains_key(key) && !in_sweep {
            missing.push(key.to_string());
        }
    }
    for key in &missing {
        p.issue(None, key, "missing required key".into());
    }

    let mut scenario = Scenario {
        sizes: Arms::new(0.0, 0.0),
        prevalence: Arms::new(0.0, 0.0),
        other_prevalence: Arms::new(0.0, 0.0),
        care_seek: CareSeeking::default(),
        sensitivity: 0.0,
        specificity: 0.0,
        method: Method::RiskRatio,
        control: ControlGroup::Combined,
        adjustment: Adjustment::None,
        mode: Mode::Deterministic,
        seed: None,
    };
    for param in Param::all() {
        if let Some(v) = p.number(&param.path(), |v| param.check(v).map_err(|e| e.to_string())) {
            param.set(&mut scenario, v);
        } else if let Some((_, values, _)) = swept.iter().find(|s| s.0 == param) {
            // placeholder for validation; the grid overrides it
            if let Some(first) = values.first() {
                param.set(&mut scenario, *first);
            }
        }
    }
    if let Some(m) = p.enumerated("estimator", Some("risk-ratio"), |s| s.parse::<Method>()) {
        scenario.method = m;
    }
    if let Some(c) = p.enumerated("control", Some("combined"), |s| s.parse::<ControlGroup>()) {
        scenario.control = c;
    }
    if let Some(a) = p.enumerated("adjustment", Some("none"), |s| s.parse::<Adjustment>()) {
        scenario.adjustment = a;
    }
    if let Some(m) = p.enumerated("mode", Some("deterministic"), |s| s.parse::<Mode>()) {
        scenario.mode = m;
    }
    scenario.seed = p.enumerated("seed", None, |s| {
        s.parse::<u64>()
            .map_err(|_| format!("expected an unsigned 64-bit integer, got {s:?}"))
    });
    let replications = p
        .enumerated("replications", Some("1"), |s| match s.parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(format!("expected a positive integer, got {s:?}")),
        })
        .unwrap_or(1);
    if scenario.mode == Mode::Stochastic && !entries.contains_key("seed") {
        p.issue(None, "seed", "stochastic mode needs a seed".into());
    }

    let zip = entries.get("sweep.zip").map(|e| {
        let groups: Vec<Vec<String>> = e
            .value
            .split(';')
            .map(|g| g.split(',').map(|s| s.trim().to_string()).collect())
            .collect();
        (groups, e.line)
    });

    let is_sweep = kind.as_deref() == Some("sweep");
    if kind.as_deref() == Some("scenario") {
        if let Some((_, _, line)) = swept.first() {
            p.issue(Some(*line), "kind", "sweep axes need kind = sweep".into());
        }
        if let Some((_, line)) = &zip {
            p.issue(Some(*line), "sweep.zip", "sweep axes need kind = sweep".into());
        }
    }

    let axes = if is_sweep {
        build_axes(&mut p, &swept, zip.as_ref())
    } else {
        Vec::new()
    };

    if !p.issues.is_empty() {
        return Err(ConfigError::Schema(p.issues));
    }

    if let Err(e) = scenario.validate() {
        return Err(ConfigError::Schema(vec![Issue {
            line: None,
            key: None,
            message: e.to_string(),
        }]));
    }
    if is_sweep {
        let spec = SweepSpec {
            base: scenario,
            axes,
            replications,
        };
        spec.validate().map_err(|e| {
            ConfigError::Schema(vec![Issue {
                line: None,
                key: None,
                message: e.to_string(),
            }])
        })?;
        Ok(Config::Sweep(spec))
    } else {
        if replications > 1 && scenario.mode != Mode::Stochastic {
            return Err(ConfigError::Schema(vec![Issue {
                line: entries.get("replications").map(|e| e.line),
                key: Some("replications".into()),
                message: "replications > 1 needs stochastic mode".into(),
            }]));
        }
        Ok(Config::Scenario {
            scenario,
            replications,
        })
    }
}

fn build_axes(
    p: &mut Parser<'_>,
    swept: &[(Param, Vec<f64>, usize)],
    zip: Option<&(Vec<Vec<String>>, usize)>,
) -> Vec<Axis> {
    if swept.is_empty() {
        p.issue(None, "sweep", "a sweep needs at least one sweep.<parameter> axis".into());
        return Vec::new();
    }
    // group index per swept param
    let mut group_of: HashMap<Param, usize> = HashMap::new();
    let mut groups: Vec<Vec<Param>> = Vec::new();
    if let Some((zip_groups, line)) = zip {
        for names in zip_groups {
            let mut group = Vec::new();
            for name in names {
                match Param::from_path(name) {
                    Some(param) if swept.iter().any(|s| s.0 == param) => {
                        if let std::collections::hash_map::Entry::Vacant(slot) = group_of.entry(param) {
                            slot.insert(groups.len());
                            group.push(param);
                        } else {
                            p.issue(Some(*line), "sweep.zip", format!("{name} zipped twice"));
                        }
                    }
                    _ => p.issue(
                        Some(*line),
                        "sweep.zip",
                        format!("{name:?} is not a swept parameter"),
                    ),
                }
            }
            if group.len() < 2 {
                p.issue(
                    Some(*line),
                    "sweep.zip",
                    "each zip group needs at least two parameters".into(),
                );
            }
            groups.push(group);
        }
    }

    let values = |param: Param| swept.iter().find(|s| s.0 == param).map(|s| s.1.clone()).unwrap();
    let mut axes = Vec::new();
    let mut emitted = vec![false; groups.len()];
    for (param, vals, line) in swept {
        match group_of.get(param) {
            None => axes.push(Axis::single(*param, vals)),
            Some(&g) if !emitted[g] => {
                emitted[g] = true;
                let columns = groups[g].iter().map(|q| (*q, values(*q))).collect();
                match Axis::zipped(columns) {
                    Ok(axis) => axes.push(axis),
                    Err(e) => p.issue(Some(*line), "sweep.zip", e.to_string()),
                }
            }
            Some(_) => {}
        }
    }
    axes
}

struct Parser<'a> {
    entries: &'a HashMap<String, Entry>,
    issues: Vec<Issue>,
}

impl Parser<'_> {
    fn issue(&mut self, line: Option<usize>, key: &str, message: String) {
        self.issues.push(Issue {
            line,
            key: Some(key.to_string()),
            message,
        });
    }

    fn number<F>(&mut self, key: &str, check: F) -> Option<f64>
    where
        F: Fn(f64) -> Result<(), String>,
    {
        let entry = self.entries.get(key)?;
        let line = entry.line;
        match parse_number(&entry.value).and_then(|v| check(v).map(|_| v)) {
            Ok(v) => Some(v),
            Err(m) => {
                self.issue(Some(line), key, m);
                None
            }
        }
    }

    fn enumerated<T, F>(&mut self, key: &str, default: Option<&str>, parse: F) -> Option<T>
    where
        F: Fn(&str) -> Result<T, String>,
    {
        let (value, line) = match self.entries.get(key) {
            Some(e) => (e.value.as_str(), Some(e.line)),
            None => (default?, None),
        };
        match parse(value) {
            Ok(v) => Some(v),
            Err(m) => {
                self.issue(line, key, m);
                None
            }
        }
    }
}

fn parse_number(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(format!("expected a finite number, got {s:?}")),
    }
}

/// Canonical text for `config`; parses back to an equal value.
pub fn to_text(config: &Config) -> String {
    let (scenario, replications, axes, kind) = match config {
        Config::Scenario {
            scenario,
            replications,
        } => (scenario, *replications, &[][..], "scenario"),
        Config::Sweep(spec) => (&spec.base, spec.replications, &spec.axes[..], "sweep"),
    };
    let swept: Vec<Param> = axes.iter().flat_map(|a| a.params.iter().copied()).collect();

    let mut out = String::new();
    writeln!(out, "schema = {SCHEMA_VERSION}").unwrap();
    writeln!(out, "kind = {kind}").unwrap();
    for param in Param::all() {
        if !swept.contains(&param) {
            writeln!(out, "{} = {}", param.path(), param.get(scenario)).unwrap();
        }
    }
    writeln!(out, "estimator = {}", scenario.method).unwrap();
    writeln!(out, "control = {}", scenario.control).unwrap();
    writeln!(out, "adjustment = {}", scenario.adjustment).unwrap();
    writeln!(out, "mode = {}", scenario.mode).unwrap();
    if let Some(seed) = scenario.seed {
        writeln!(out, "seed = {seed}").unwrap();
    }
    writeln!(out, "replications = {replications}").unwrap();
    let mut zips = Vec::new();
    for axis in axes {
        for (j, param) in axis.params.iter().enumerate() {
            let values: Vec<String> = axis.points.iter().map(|pt| pt[j].to_string()).collect();
            writeln!(out, "sweep.{} = {}", param.path(), values.join(", ")).unwrap();
        }
        if axis.params.len() > 1 {
            zips.push(
                axis.params
                    .iter()
                    .map(|p| p.path())
                    .collect::<Vec<_>>()
                    .join(", "),
            );
        }
    }
    if !zips.is_empty() {
        writeln!(out, "sweep.zip = {}", zips.join("; ")).unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Arm;
    use proptest::prelude::*;

    const BASELINE: &str = "\
# first worked example
schema = 1
kind = scenario
vaccinated.size = 10000
unvaccinated.size = 10000
vaccinated.prevalence = 0.01
unvaccinated.prevalence = 0.10
test.sensitivity = 1.0
test.specificity = 1.0
";

    #[test]
    fn parses_baseline() {
        let c = parse_config(BASELINE).unwrap();
        assert_eq!(
            c,
            Config::Scenario {
                scenario: Scenario::paper_baseline(),
                replications: 1
            }
        );
    }

    #[test]
    fn empty_document_lists_every_missing_key() {
        let err = parse_config("").unwrap_err();
        let ConfigError::Schema(issues) = &err else {
            panic!("{err:?}")
        };
        let keys: Vec<&str> = issues.iter().filter_map(|i| i.key.as_deref()).collect();
        let mut expected = vec!["schema", "kind"];
        expected.extend(REQUIRED_NUMERIC);
        assert_eq!(keys, expected);
        assert!(issues.iter().all(|i| i.message == "missing required key"));
    }

    #[test]
    fn range_violation_names_key_and_line() {
        let text = BASELINE.replace("test.sensitivity = 1.0", "test.sensitivity = 1.3");
        let err = parse_config(&text).unwrap_err();
        let issues = err.issues();
        assert_eq!(issues.len(), 1);
        assert_eq!(issues[0].key.as_deref(), Some("test.sensitivity"));
        assert_eq!(issues[0].line, Some(8));
        assert!(err.to_string().contains("line 8: test.sensitivity"));
    }

    #[test]
    fn collects_all_violations() {
        let text = format!("{BASELINE}bogus = 3\nmode = sometimes\nvaccinated.size = -4\n");
        let err = parse_config(&text).unwrap_err();
        let keys: Vec<&str> = err.issues().iter().filter_map(|i| i.key.as_deref()).collect();
        assert!(keys.contains(&"bogus"));
        assert!(keys.contains(&"mode"));
        assert!(keys.contains(&"vaccinated.size"));
    }

    #[test]
    fn syntax_and_version_errors() {
        assert!(matches!(
            parse_config("schema = 1\nthis line has no equals\n"),
            Err(ConfigError::Syntax(_))
        ));
        assert_eq!(
            parse_config("schema = 2\nkind = scenario\n"),
            Err(ConfigError::Version { found: "2".into() })
        );
    }

    #[test]
    fn stochastic_needs_seed() {
        let text = format!("{BASELINE}mode = stochastic\n");
        let err = parse_config(&text).unwrap_err();
        assert!(err.issues().iter().any(|i| i.key.as_deref() == Some("seed")));
        let ok = parse_config(&format!("{text}seed = 7\nreplications = 100\n")).unwrap();
        let Config::Scenario { scenario, replications } = ok else { panic!() };
        assert_eq!(scenario.seed, Some(7));
        assert_eq!(replications, 100);
    }

    #[test]
    fn sweep_with_zip() {
        let text = "\
schema = 1
kind = sweep
vaccinated.size = 10000
unvaccinated.size = 10000
vaccinated.prevalence = 0.01
unvaccinated.prevalence = 0.10
sweep.test.sensitivity = 1.0, 0.70, 0.95
sweep.test.specificity = 1.0, 0.95, 0.70
sweep.care.vaccinated.target = 1, 0.5
sweep.zip = test.sensitivity, test.specificity
";
        let Config::Sweep(spec) = parse_config(text).unwrap() else {
            panic!()
        };
        assert_eq!(spec.axes.len(), 2);
        assert_eq!(spec.axes[0].params, vec![Param::Sensitivity, Param::Specificity]);
        assert_eq!(spec.axes[0].points[1], vec![0.70, 0.95]);
        assert_eq!(
            spec.axes[1],
            Axis::single(Param::Care(Arm::Vaccinated, crate::population::Category::Target), &[1.0, 0.5])
        );
        assert_eq!(spec.grid_len(), 6);
    }

    #[test]
    fn zero_axis_sweep_is_rejected() {
        let text = BASELINE.replace("kind = scenario", "kind = sweep");
        let err = parse_config(&text).unwrap_err();
        assert!(matches!(err, ConfigError::Schema(_)));
        assert!(err.to_string().contains("at least one"));
    }

    #[test]
    fn bad_zip_groups() {
        let text = "\
schema = 1
kind = sweep
vaccinated.size = 10000
unvaccinated.size = 10000
vaccinated.prevalence = 0.01
unvaccinated.prevalence = 0.10
sweep.test.sensitivity = 1.0, 0.70
sweep.test.specificity = 1.0, 0.95, 0.70
sweep.zip = test.sensitivity, test.specificity
";
        assert!(parse_config(text).is_err());
        let text = text.replace("test.specificity\n", "vaccinated.size\n");
        assert!(parse_config(&text).is_err());
    }

    #[test]
    fn sweep_keys_rejected_in_scenario() {
        let text = format!("{BASELINE}sweep.test.sensitivity = 0.5, 0.6\n");
        assert!(parse_config(&text).is_err());
    }

    #[test]
    fn canonical_text_round_trips_baseline() {
        let c = parse_config(BASELINE).unwrap();
        assert_eq!(parse_config(&to_text(&c)).unwrap(), c);
    }

    fn prob() -> impl Strategy<Value = f64> {
        prop_oneof![Just(0.0), Just(1.0), 0.0f64..=1.0]
    }

    prop_compose! {
        fn scenario()(
            sizes in (1u32..100_000, 1u32..100_000),
            prev in (0.0f64..0.5, 0.0f64..0.5),
            other in (0.0f64..0.5, 0.0f64..0.5),
            care in proptest::collection::vec(prob(), 6),
            se in prob(), sp in prob(),
            odds in any::<bool>(),
            control in 0usize..3,
            seed in proptest::option::of(any::<u64>()),
        ) -> Scenario {
            let mut s = Scenario::paper_baseline();
            s.sizes = Arms::new(sizes.0 as f64, sizes.1 as f64);
            s.prevalence = Arms::new(prev.0, prev.1);
            s.other_prevalence = Arms::new(other.0, other.1);
            let mut k = 0;
            for arm in [Arm::Vaccinated, Arm::Unvaccinated] {
                for c in crate::population::Category::ALL {
                    s.care_seek.set(arm, c, care[k]);
                    k += 1;
                }
            }
            s.sensitivity = se;
            s.specificity = sp;
            s.method = if odds { Method::OddsRatio } else { Method::RiskRatio };
            s.control = ControlGroup::POLICIES[control];
            if let Some(seed) = seed {
                s = s.stochastic(seed);
            }
            s
        }
    }

    proptest! {
        #[test]
        fn parse_serialize_parse(s in scenario(), se_values in proptest::collection::vec(prob(), 1..5), sweep in any::<bool>()) {
            let config = if sweep {
                Config::Sweep(SweepSpec {
                    base: s,
                    axes: vec![
                        Axis::single(Param::Sensitivity, &se_values),
                        Axis::zipped(vec![
                            (Param::Prevalence(Arm::Vaccinated), vec![0.01, 0.02]),
                            (Param::Prevalence(Arm::Unvaccinated), vec![0.1, 0.2]),
                        ]).unwrap(),
                    ],
                    replications: 1,
                })
            } else {
                Config::Scenario { scenario: s, replications: 1 }
            };
            let text = to_text(&config);
            let parsed = parse_config(&text).unwrap();
            // swept fields in the base only carry the first grid value
            let again = parse_config(&to_text(&parsed)).unwrap();
            prop_assert_eq!(&parsed, &again);
            if !sweep {
                prop_assert_eq!(parsed, config);
            } else if let (Config::Sweep(a), Config::Sweep(b)) = (&parsed, &config) {
                prop_assert_eq!(&a.axes, &b.axes);
                prop_assert_eq!(a.replications, b.replications);
            }
        }
    }
}
