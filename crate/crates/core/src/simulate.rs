//! Scenario engine: single runs, Monte Carlo replication, grid sweeps and
//! sign-boundary search.
//!
//! A scenario run goes latent population -> care seeking -> target-pathogen
//! test on care seekers -> control selection -> estimate. In stochastic mode
//! every stage draws from one `ChaCha8Rng` stream in that order, vaccinated
//! arm before unvaccinated:
//!
//! 1. infections per arm: target ~ Bin(n, p_target), other ~ Bin(n - target,
//!    p_other / (1 - p_target)), the rest uninfected;
//! 2. care seeking per arm and category (target, other, uninfected);
//! 3. test per arm: target-infected and pan-negative care seekers, then
//!    other-pathogen care seekers.
//!
//! Grid points of a sweep all use the scenario's master seed, so neighbouring
//! points share random numbers and differences between them are not sampling
//! noise.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use statrs::statistics::{Data, OrderStatistics, Statistics};

use crate::error::{check_count, check_probability, Arm, Error, Result, Stage};
use crate::estimators::{estimate, ve_corrected, Arms, ControlGroup, Method, ObservedCounts, VeEstimate};
use crate::population::{
    assumption_gap, build_study_table, build_study_table_with, CareSeeking, Category, Cells,
    LatentPopulation, StudyTable,
};
use crate::sampling::{binomial, replicate_seed, rng_from_seed, whole_count, Sampling, SimRng};
use crate::testing::{apply_test, apply_test_with, DiagnosticTest};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Deterministic,
    Stochastic,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Deterministic => f.write_str("deterministic"),
            Mode::Stochastic => f.write_str("stochastic"),
        }
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "deterministic" => Ok(Mode::Deterministic),
            "stochastic" => Ok(Mode::Stochastic),
            _ => Err(format!("expected deterministic or stochastic, got {s:?}")),
        }
    }
}

/// Optional misclassification correction applied before estimating.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Adjustment {
    None,
    RoganGladen,
}

impl fmt::Display for Adjustment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Adjustment::None => f.write_str("none"),
            Adjustment::RoganGladen => f.write_str("rogan-gladen"),
        }
    }
}

impl FromStr for Adjustment {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "none" => Ok(Adjustment::None),
            "rogan-gladen" => Ok(Adjustment::RoganGladen),
            _ => Err(format!("expected none or rogan-gladen, got {s:?}")),
        }
    }
}

/// A numeric scenario field addressable from configs and sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Param {
    Size(Arm),
    Prevalence(Arm),
    OtherPrevalence(Arm),
    Care(Arm, Category),
    Sensitivity,
    Specificity,
}

const ARMS: [Arm; 2] = [Arm::Vaccinated, Arm::Unvaccinated];

impl Param {
    pub fn all() -> Vec<Param> {
        let mut out = Vec::new();
        for arm in ARMS {
            out.push(Param::Size(arm));
        }
        for arm in ARMS {
            out.push(Param::Prevalence(arm));
        }
        for arm in ARMS {
            out.push(Param::OtherPrevalence(arm));
        }
        for arm in ARMS {
            for c in Category::ALL {
                out.push(Param::Care(arm, c));
            }
        }
        out.push(Param::Sensitivity);
        out.push(Param::Specificity);
        out
    }

    pub fn path(&self) -> String {
        let category = |c: &Category| match c {
            Category::Target => "target",
            Category::Other => "other",
            Category::Uninfected => "uninfected",
        };
        match self {
            Param::Size(arm) => format!("{arm}.size"),
            Param::Prevalence(arm) => format!("{arm}.prevalence"),
            Param::OtherPrevalence(arm) => format!("{arm}.other_prevalence"),
            Param::Care(arm, c) => format!("care.{arm}.{}", category(c)),
            Param::Sensitivity => "test.sensitivity".into(),
            Param::Specificity => "test.specificity".into(),
        }
    }

    pub fn from_path(path: &str) -> Option<Param> {
        Param::all().into_iter().find(|p| p.path() == path)
    }

    /// Sizes are counts, every other parameter is a probability.
    pub fn check(&self, value: f64) -> Result<()> {
        match self {
            Param::Size(_) => {
                check_count(&self.path(), value)?;
                if value == 0.0 {
                    return Err(Error::InvalidInput(format!("{} must be positive", self.path())));
                }
                Ok(())
            }
            _ => check_probability(&self.path(), value),
        }
    }

    pub fn get(&self, s: &Scenario) -> f64 {
        let pick = |arms: &Arms<f64>, arm: &Arm| match arm {
            Arm::Vaccinated => arms.vaccinated,
            Arm::Unvaccinated => arms.unvaccinated,
        };
        match self {
            Param::Size(arm) => pick(&s.sizes, arm),
            Param::Prevalence(arm) => pick(&s.prevalence, arm),
            Param::OtherPrevalence(arm) => pick(&s.other_prevalence, arm),
            Param::Care(arm, c) => s.care_seek.get(*arm, *c),
            Param::Sensitivity => s.sensitivity,
            Param::Specificity => s.specificity,
        }
    }

    pub fn set(&self, s: &mut Scenario, value: f64) {
        let pick = |arms: &mut Arms<f64>, arm: &Arm, v: f64| match arm {
            Arm::Vaccinated => arms.vaccinated = v,
            Arm::Unvaccinated => arms.unvaccinated = v,
        };
        match self {
            Param::Size(arm) => pick(&mut s.sizes, arm, value),
            Param::Prevalence(arm) => pick(&mut s.prevalence, arm, value),
            Param::OtherPrevalence(arm) => pick(&mut s.other_prevalence, arm, value),
            Param::Care(arm, c) => s.care_seek.set(*arm, *c, value),
            Param::Sensitivity => s.sensitivity = value,
            Param::Specificity => s.specificity = value,
        }
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.path())
    }
}

/// Everything needed to run one simulated study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub sizes: Arms<f64>,
    pub prevalence: Arms<f64>,
    pub other_prevalence: Arms<f64>,
    pub care_seek: CareSeeking,
    pub sensitivity: f64,
    pub specificity: f64,
    pub method: Method,
    pub control: ControlGroup,
    pub adjustment: Adjustment,
    pub mode: Mode,
    pub seed: Option<u64>,
}

impl Scenario {
    /// 10 000 people per arm, 1% / 10% prevalence, perfect test.
    pub fn paper_baseline() -> Self {
        Self {
            sizes: Arms::new(10_000.0, 10_000.0),
            prevalence: Arms::new(0.01, 0.10),
            other_prevalence: Arms::new(0.0, 0.0),
            care_seek: CareSeeking::default(),
            sensitivity: 1.0,
            specificity: 1.0,
            method: Method::RiskRatio,
            control: ControlGroup::Combined,
            adjustment: Adjustment::None,
            mode: Mode::Deterministic,
            seed: None,
        }
    }

    pub fn with_test(mut self, sensitivity: f64, specificity: f64) -> Self {
        self.sensitivity = sensitivity;
        self.specificity = specificity;
        self
    }

    pub fn stochastic(mut self, seed: u64) -> Self {
        self.mode = Mode::Stochastic;
        self.seed = Some(seed);
        self
    }

    pub fn deterministic(mut self) -> Self {
        self.mode = Mode::Deterministic;
        self
    }

    pub fn test(&self) -> Result<DiagnosticTest> {
        DiagnosticTest::new(self.sensitivity, self.specificity)
    }

    /// Control group actually used by the configured method.
    pub fn effective_control(&self) -> ControlGroup {
        match self.method {
            Method::RiskRatio => ControlGroup::NotApplicable,
            Method::OddsRatio => self.control,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for p in Param::all() {
            p.check(p.get(self))?;
        }
        for arm in ARMS {
            let t = Param::Prevalence(arm).get(self);
            let o = Param::OtherPrevalence(arm).get(self);
            if t + o > 1.0 {
                return Err(Error::InvalidInput(format!(
                    "{arm} target and other-pathogen prevalences sum to {} > 1",
                    t + o
                )));
            }
        }
        if self.method == Method::OddsRatio && self.control == ControlGroup::NotApplicable {
            return Err(Error::InvalidInput("odds-ratio needs a control-group policy".into()));
        }
        if self.adjustment == Adjustment::RoganGladen && self.method != Method::RiskRatio {
            return Err(Error::InvalidInput(
                "rogan-gladen adjustment is only defined for the risk-ratio estimator".into(),
            ));
        }
        if self.mode == Mode::Stochastic {
            if self.seed.is_none() {
                return Err(Error::InvalidInput("stochastic mode needs a seed".into()));
            }
            for arm in ARMS {
                whole_count(&Param::Size(arm).path(), Param::Size(arm).get(self))?;
            }
        }
        Ok(())
    }
}

/// Result of one scenario run with its intermediate tables.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioOutcome {
    pub estimate: VeEstimate,
    pub table: StudyTable,
    pub observed: ObservedCounts,
    /// Attack-rate ratio VE computed on the true care-seeker table, if defined.
    pub design_ve: Option<f64>,
    /// Gap between the arms' other-pathogen shares of the true care-seeker table.
    pub assumption_gap: Option<f64>,
    pub clamped: bool,
}

/// Runs one study. Deterministic scenarios are pure functions of their
/// parameters; stochastic ones of their parameters and seed.
pub fn run_scenario(s: &Scenario) -> Result<ScenarioOutcome> {
    match s.mode {
        Mode::Deterministic => run_inner(s, None),
        Mode::Stochastic => {
            let seed = s
                .seed
                .ok_or_else(|| Error::InvalidInput("stochastic mode needs a seed".into()))?;
            run_inner(s, Some(&mut rng_from_seed(seed)))
        }
    }
}

fn run_inner(s: &Scenario, mut rng: Option<&mut SimRng>) -> Result<ScenarioOutcome> {
    s.validate().map_err(|e| e.at(Stage::Population))?;
    let test = s.test().map_err(|e| e.at(Stage::Testing))?;

    let latent = match rng.as_deref_mut() {
        None => LatentPopulation::from_prevalences(
            (s.sizes.vaccinated, s.sizes.unvaccinated),
            (s.prevalence.vaccinated, s.prevalence.unvaccinated),
            (s.other_prevalence.vaccinated, s.other_prevalence.unvaccinated),
            s.care_seek,
        ),
        Some(rng) => sample_latent(s, rng),
    }
    .map_err(|e| e.at(Stage::Population))?;

    let table = match rng.as_deref_mut() {
        None => build_study_table(&latent, Sampling::Deterministic),
        Some(rng) => build_study_table_with(&latent, rng),
    }
    .map_err(|e| e.at(Stage::CareSeeking))?;

    let mut observe = |cells: &Cells| -> Result<Cells> {
        let (main, other) = match rng.as_deref_mut() {
            None => (
                apply_test(cells.target, cells.uninfected, &test, Sampling::Deterministic)?,
                apply_test(0.0, cells.other, &test, Sampling::Deterministic)?,
            ),
            Some(rng) => (
                apply_test_with(cells.target, cells.uninfected, &test, rng)?,
                apply_test_with(0.0, cells.other, &test, rng)?,
            ),
        };
        Ok(Cells::new(
            main.positives() + other.false_positive,
            other.true_negative,
            main.negatives(),
        ))
    };
    let vax = observe(&table.vaccinated.seek).map_err(|e| e.at(Stage::Testing))?;
    let unvax = observe(&table.unvaccinated.seek).map_err(|e| e.at(Stage::Testing))?;
    let observed = ObservedCounts::new(
        vax.target,
        vax.other,
        vax.uninfected,
        unvax.target,
        unvax.other,
        unvax.uninfected,
    )
    .map_err(|e| e.at(Stage::Testing))?;

    let (estimate, clamped) = match s.adjustment {
        Adjustment::None => {
            let e = match s.method {
                Method::RiskRatio => estimate(&observed, Method::RiskRatio, ControlGroup::NotApplicable)
                    .map_err(|e| e.at(Stage::Estimation))?,
                Method::OddsRatio => {
                    crate::estimators::select_control(&observed, s.control)
                        .map_err(|e| e.at(Stage::ControlSelection))?;
                    estimate(&observed, Method::OddsRatio, s.control)
                        .map_err(|e| e.at(Stage::Estimation))?
                }
            };
            (e, false)
        }
        Adjustment::RoganGladen => {
            let c = ve_corrected(
                Arms::new(observed.a, observed.g),
                Arms::new(observed.n1(), observed.n3()),
                &test,
            )
            .map_err(|e| e.at(Stage::Estimation))?;
            (c.estimate, c.any_clamped())
        }
    };

    let design_ve = crate::estimators::ve_risk_ratio(table.a(), table.n1(), table.g(), table.n3())
        .ok()
        .map(|e| e.value);
    Ok(ScenarioOutcome {
        estimate,
        table,
        observed,
        design_ve,
        assumption_gap: assumption_gap(&table).ok(),
        clamped,
    })
}

fn sample_latent(s: &Scenario, rng: &mut SimRng) -> Result<LatentPopulation> {
    let mut arm = |n: f64, p_target: f64, p_other: f64| -> Result<Cells> {
        let target = binomial(rng, "arm size", n, p_target)?;
        let p_rest = if p_target < 1.0 {
            (p_other / (1.0 - p_target)).min(1.0)
        } else {
            0.0
        };
        let other = binomial(rng, "arm size", n - target, p_rest)?;
        Ok(Cells::new(target, other, n - target - other))
    };
    let vaccinated = arm(
        s.sizes.vaccinated,
        s.prevalence.vaccinated,
        s.other_prevalence.vaccinated,
    )?;
    let unvaccinated = arm(
        s.sizes.unvaccinated,
        s.prevalence.unvaccinated,
        s.other_prevalence.unvaccinated,
    )?;
    LatentPopulation::new(vaccinated, unvaccinated, s.care_seek)
}

/// Distribution of the estimate over stochastic replicates.
#[derive(Debug, Clone, PartialEq)]
pub struct McSummary {
    pub replications: usize,
    pub successes: usize,
    pub mean: f64,
    /// Sample standard deviation; `None` with a single successful replicate.
    pub sd: Option<f64>,
    pub q025: f64,
    pub q50: f64,
    pub q975: f64,
    /// Failed replicates counted by error tag.
    pub failures: BTreeMap<String, usize>,
    /// Fraction of successful replicates whose correction was clamped.
    pub clamped_rate: f64,
}

impl McSummary {
    pub fn failed(&self) -> usize {
        self.replications - self.successes
    }

    pub fn error_rate(&self) -> f64 {
        self.failed() as f64 / self.replications as f64
    }
}

/// Runs `replications` independent stochastic studies; replicate `k` is seeded
/// with [`replicate_seed`]`(seed, k)`.
///
/// Quantiles use the median-unbiased estimator (Hyndman-Fan type 8).
pub fn monte_carlo(s: &Scenario, replications: usize, seed: u64) -> Result<McSummary> {
    if replications == 0 {
        return Err(Error::InvalidInput("replications must be at least 1".into()));
    }
    if s.mode != Mode::Stochastic {
        return Err(Error::InvalidInput(
            "Monte Carlo replication needs a stochastic scenario".into(),
        ));
    }
    let runs: Vec<Result<(f64, bool)>> = (0..replications)
        .into_par_iter()
        .map(|k| {
            let mut rng = rng_from_seed(replicate_seed(seed, k as u64));
            run_inner(s, Some(&mut rng)).map(|o| (o.estimate.value, o.clamped))
        })
        .collect();

    let mut values = Vec::with_capacity(replications);
    let mut clamped = 0usize;
    let mut failures = BTreeMap::new();
    for run in runs {
        match run {
            Ok((v, c)) => {
                values.push(v);
                clamped += c as usize;
            }
            Err(e) => *failures.entry(e.tag()).or_insert(0) += 1,
        }
    }
    if values.is_empty() {
        return Err(Error::NoValidReplicates { replications });
    }
    let successes = values.len();
    let mean = values.iter().mean();
    let sd = (successes > 1).then(|| values.iter().std_dev());
    let mut data = Data::new(values);
    Ok(McSummary {
        replications,
        successes,
        mean,
        sd,
        q025: data.quantile(0.025),
        q50: data.quantile(0.5),
        q975: data.quantile(0.975),
        failures,
        clamped_rate: clamped as f64 / successes as f64,
    })
}

/// One sweep dimension. Several parameters on one axis move together: value
/// `k` of the axis sets `params[j]` to `points[k][j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub params: Vec<Param>,
    pub points: Vec<Vec<f64>>,
}

impl Axis {
    pub fn single(param: Param, values: &[f64]) -> Self {
        Self {
            params: vec![param],
            points: values.iter().map(|v| vec![*v]).collect(),
        }
    }

    /// Zips equally long value lists into one axis.
    pub fn zipped(columns: Vec<(Param, Vec<f64>)>) -> Result<Self> {
        let len = columns.first().map(|c| c.1.len()).unwrap_or(0);
        if columns.iter().any(|c| c.1.len() != len) {
            return Err(Error::InvalidInput(
                "zipped sweep parameters need value lists of equal length".into(),
            ));
        }
        Ok(Self {
            params: columns.iter().map(|c| c.0).collect(),
            points: (0..len)
                .map(|k| columns.iter().map(|c| c.1[k]).collect())
                .collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base: Scenario,
    pub axes: Vec<Axis>,
    pub replications: usize,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.axes.is_empty() {
            return Err(Error::InvalidInput("a sweep needs at least one axis".into()));
        }
        if self.replications == 0 {
            return Err(Error::InvalidInput("replications must be at least 1".into()));
        }
        if self.replications > 1 && self.base.mode != Mode::Stochastic {
            return Err(Error::InvalidInput(
                "replications > 1 needs stochastic mode".into(),
            ));
        }
        let mut seen = Vec::new();
        for axis in &self.axes {
            if axis.params.is_empty() || axis.points.is_empty() {
                return Err(Error::InvalidInput("empty sweep axis".into()));
            }
            for p in &axis.params {
                if seen.contains(p) {
                    return Err(Error::InvalidInput(format!("{p} appears on two axes")));
                }
                seen.push(*p);
            }
            for point in &axis.points {
                if point.len() != axis.params.len() {
                    return Err(Error::InvalidInput("ragged sweep axis".into()));
                }
                for (p, v) in axis.params.iter().zip(point) {
                    p.check(*v)?;
                }
            }
        }
        Ok(())
    }

    /// Swept parameters in column order.
    pub fn columns(&self) -> Vec<Param> {
        self.axes.iter().flat_map(|a| a.params.iter().copied()).collect()
    }

    pub fn grid_len(&self) -> usize {
        self.axes.iter().map(|a| a.points.len()).product()
    }

    /// Scenario and parameter values at grid position `index`; the last axis
    /// varies fastest.
    pub fn point(&self, index: usize) -> (Scenario, Vec<f64>) {
        let mut digits = vec![0; self.axes.len()];
        let mut rest = index;
        for (d, axis) in digits.iter_mut().zip(&self.axes).rev() {
            *d = rest % axis.points.len();
            rest /= axis.points.len();
        }
        let mut scenario = self.base;
        let mut values = Vec::new();
        for (axis, &d) in self.axes.iter().zip(&digits) {
            for (p, v) in axis.params.iter().zip(&axis.points[d]) {
                p.set(&mut scenario, *v);
                values.push(*v);
            }
        }
        (scenario, values)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub values: Vec<f64>,
    pub scenario: Scenario,
    /// Deterministic evaluation of the grid point.
    pub outcome: std::result::Result<ScenarioOutcome, Error>,
    /// Replicate summary, present in stochastic mode.
    pub monte_carlo: Option<std::result::Result<McSummary, Error>>,
}

impl SweepRow {
    /// Fraction of failed evaluations behind this row.
    pub fn error_rate(&self) -> f64 {
        match &self.monte_carlo {
            Some(Ok(mc)) => mc.error_rate(),
            Some(Err(_)) => 1.0,
            None => {
                if self.outcome.is_ok() {
                    0.0
                } else {
                    1.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub columns: Vec<Param>,
    pub rows: Vec<SweepRow>,
}

/// Evaluates every grid point. Points run in parallel; rows come back in grid
/// order and do not depend on scheduling.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let rows = (0..spec.grid_len())
        .into_par_iter()
        .map(|k| evaluate_point(spec, k))
        .collect();
    Ok(SweepResult {
        columns: spec.columns(),
        rows,
    })
}

/// Serial reference for [`run_sweep`].
pub fn run_sweep_serial(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let rows = (0..spec.grid_len()).map(|k| evaluate_point(spec, k)).collect();
    Ok(SweepResult {
        columns: spec.columns(),
        rows,
    })
}

fn evaluate_point(spec: &SweepSpec, index: usize) -> SweepRow {
    let (scenario, values) = spec.point(index);
    let outcome = run_scenario(&scenario.deterministic());
    let monte_carlo = match (scenario.mode, scenario.seed) {
        (Mode::Stochastic, Some(seed)) => Some(monte_carlo(&scenario, spec.replications, seed)),
        (Mode::Stochastic, None) => Some(Err(Error::InvalidInput(
            "stochastic mode needs a seed".into(),
        ))),
        (Mode::Deterministic, _) => None,
    };
    SweepRow {
        values,
        scenario,
        outcome,
        monte_carlo,
    }
}

/// A grid cell whose corner estimates straddle zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryCell {
    pub se_index: usize,
    pub sp_index: usize,
    pub se: (f64, f64),
    pub sp: (f64, f64),
}

/// Cells of the (sensitivity, specificity) grid across which the deterministic
/// estimate changes sign. A cell straddles zero when one corner is negative and
/// another positive, or when a corner is exactly zero. Cells with an undefined
/// corner are skipped.
pub fn find_sign_boundary(base: &Scenario, se_grid: &[f64], sp_grid: &[f64]) -> Vec<BoundaryCell> {
    let base = base.deterministic();
    let values: Vec<Option<f64>> = se_grid
        .par_iter()
        .flat_map_iter(|&se| {
            sp_grid.iter().map(move |&sp| {
                run_scenario(&base.with_test(se, sp))
                    .ok()
                    .map(|o| o.estimate.value)
            })
        })
        .collect();
    let at = |i: usize, j: usize| values[i * sp_grid.len() + j];

    let mut cells = Vec::new();
    for i in 0..se_grid.len().saturating_sub(1) {
        for j in 0..sp_grid.len().saturating_sub(1) {
            let corners = [at(i, j), at(i + 1, j), at(i, j + 1), at(i + 1, j + 1)];
            let Some(corners) = corners.into_iter().collect::<Option<Vec<f64>>>() else {
                continue;
            };
            let neg = corners.iter().any(|v| *v < 0.0);
            let pos = corners.iter().any(|v| *v > 0.0);
            let zero = corners.contains(&0.0);
            if (neg && pos) || zero {
                cells.push(BoundaryCell {
                    se_index: i,
                    sp_index: j,
                    se: (se_grid[i], se_grid[i + 1]),
                    sp: (sp_grid[j], sp_grid[j + 1]),
                });
            }
        }
    }
    cells
}
