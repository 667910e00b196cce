//! Vaccine-effectiveness estimators.
//!
//! Risk-ratio VE compares attack rates among care seekers,
//! `1 - (a / n1) / (g / n3)`. Odds-ratio VE compares the vaccinated share of
//! cases with the vaccinated share of a control group,
//! `1 - (a * control_unvax) / (g * control_vax)`. When the other-pathogen
//! rate among care seekers is the same in both arms the two coincide on the
//! other-pathogen control group.

use std::fmt;
use std::str::FromStr;

use crate::error::{check_count, Arm, Error, Result};
use crate::population::{Cells, StudyTable};
use crate::sampling::Sampling;
use crate::testing::{apply_test, correct_observed_rate, DiagnosticTest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    RiskRatio,
    OddsRatio,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::RiskRatio => f.write_str("risk-ratio"),
            Method::OddsRatio => f.write_str("odds-ratio"),
        }
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "risk-ratio" => Ok(Method::RiskRatio),
            "odds-ratio" => Ok(Method::OddsRatio),
            _ => Err(format!("expected risk-ratio or odds-ratio, got {s:?}")),
        }
    }
}

/// Which test-negative people serve as controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ControlGroup {
    OtherPathogen,
    PanNegative,
    Combined,
    NotApplicable,
}

impl ControlGroup {
    pub const POLICIES: [ControlGroup; 3] = [
        ControlGroup::OtherPathogen,
        ControlGroup::PanNegative,
        ControlGroup::Combined,
    ];
}

impl fmt::Display for ControlGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ControlGroup::OtherPathogen => "other-pathogen",
            ControlGroup::PanNegative => "pan-negative",
            ControlGroup::Combined => "combined",
            ControlGroup::NotApplicable => "not-applicable",
        };
        f.write_str(s)
    }
}

impl FromStr for ControlGroup {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "other-pathogen" => Ok(ControlGroup::OtherPathogen),
            "pan-negative" => Ok(ControlGroup::PanNegative),
            "combined" => Ok(ControlGroup::Combined),
            _ => Err(format!(
                "expected other-pathogen, pan-negative or combined, got {s:?}"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VeEstimate {
    pub value: f64,
    pub method: Method,
    pub control_group: ControlGroup,
}

/// Care-seeker counts as recorded by a study.
///
/// `a`/`g` tested positive for the target pathogen, `b`/`h` for another
/// panel pathogen and `c`/`i` for nothing. A table that only records
/// positive/negative for the target is held with `three_way == false`, its
/// negatives in `c`/`i`, and supports only the combined control group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservedCounts {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub g: f64,
    pub h: f64,
    pub i: f64,
    pub three_way: bool,
}

impl ObservedCounts {
    pub fn new(a: f64, b: f64, c: f64, g: f64, h: f64, i: f64) -> Result<Self> {
        let counts = Self {
            a,
            b,
            c,
            g,
            h,
            i,
            three_way: true,
        };
        counts.validate()?;
        Ok(counts)
    }

    /// Target-positive / target-negative table without a pathogen split.
    pub fn collapsed(a: f64, negative_vax: f64, g: f64, negative_unvax: f64) -> Result<Self> {
        let counts = Self {
            a,
            b: 0.0,
            c: negative_vax,
            g,
            h: 0.0,
            i: negative_unvax,
            three_way: false,
        };
        counts.validate()?;
        Ok(counts)
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("a", self.a),
            ("b", self.b),
            ("c", self.c),
            ("g", self.g),
            ("h", self.h),
            ("i", self.i),
        ] {
            check_count(name, v)?;
        }
        Ok(())
    }

    pub fn n1(&self) -> f64 {
        self.a + self.b + self.c
    }

    pub fn n3(&self) -> f64 {
        self.g + self.h + self.i
    }

    /// The counts as the seek-care half of a study table.
    pub fn as_table(&self) -> StudyTable {
        StudyTable::from_seek_care(
            Cells::new(self.a, self.b, self.c),
            Cells::new(self.g, self.h, self.i),
        )
    }
}

/// `1 - (a / n1) / (g / n3)`.
pub fn ve_risk_ratio(a: f64, n1: f64, g: f64, n3: f64) -> Result<VeEstimate> {
    for (name, v) in [("a", a), ("n1", n1), ("g", g), ("n3", n3)] {
        check_count(name, v)?;
    }
    if n1 == 0.0 || n3 == 0.0 {
        return Err(Error::InvalidInput(format!(
            "arm totals must be positive, got n1 = {n1}, n3 = {n3}"
        )));
    }
    if g == 0.0 {
        return Err(Error::UndefinedEstimate(
            "no unvaccinated cases, attack rate ratio divides by zero".into(),
        ));
    }
    let value = 1.0 - (a / n1) / (g / n3);
    finite(value)?;
    Ok(VeEstimate {
        value,
        method: Method::RiskRatio,
        control_group: ControlGroup::NotApplicable,
    })
}

/// `1 - (a * control_unvax) / (g * control_vax)`, tagged with the control group
/// the caller drew the controls from.
pub fn ve_odds_ratio(
    a: f64,
    control_vax: f64,
    g: f64,
    control_unvax: f64,
    control_group: ControlGroup,
) -> Result<VeEstimate> {
    for (name, v) in [
        ("a", a),
        ("vaccinated controls", control_vax),
        ("g", g),
        ("unvaccinated controls", control_unvax),
    ] {
        check_count(name, v)?;
    }
    if g == 0.0 || control_vax == 0.0 {
        return Err(Error::UndefinedEstimate(format!(
            "odds ratio divides by zero (g = {g}, vaccinated controls = {control_vax})"
        )));
    }
    // Ratio of ratios keeps large products from overflowing.
    let value = 1.0 - (a / g) * (control_unvax / control_vax);
    finite(value)?;
    Ok(VeEstimate {
        value,
        method: Method::OddsRatio,
        control_group,
    })
}

fn finite(value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::UndefinedEstimate(format!("estimate is not finite ({value})")))
    }
}

/// Control counts `(vaccinated, unvaccinated)` under `policy`.
pub fn select_control(counts: &ObservedCounts, policy: ControlGroup) -> Result<(f64, f64)> {
    let pair = match policy {
        ControlGroup::Combined => (counts.b + counts.c, counts.h + counts.i),
        ControlGroup::NotApplicable => {
            return Err(Error::InvalidInput(
                "not-applicable is not a control-group policy".into(),
            ))
        }
        _ if !counts.three_way => {
            return Err(Error::InvalidInput(format!(
                "the {policy} control group needs counts split by pathogen"
            )))
        }
        ControlGroup::OtherPathogen => (counts.b, counts.h),
        ControlGroup::PanNegative => (counts.c, counts.i),
    };
    if pair.0 == 0.0 {
        return Err(Error::EmptyControlGroup {
            policy,
            arm: Arm::Vaccinated,
        });
    }
    if pair.1 == 0.0 {
        return Err(Error::EmptyControlGroup {
            policy,
            arm: Arm::Unvaccinated,
        });
    }
    Ok(pair)
}

/// Estimate from observed counts with the given method; `policy` is ignored
/// by the risk ratio.
pub fn estimate(counts: &ObservedCounts, method: Method, policy: ControlGroup) -> Result<VeEstimate> {
    match method {
        Method::RiskRatio => ve_risk_ratio(counts.a, counts.n1(), counts.g, counts.n3()),
        Method::OddsRatio => {
            let (cv, cu) = select_control(counts, policy)?;
            ve_odds_ratio(counts.a, cv, counts.g, cu, policy)
        }
    }
}

/// Two vaccination arms' worth of something.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arms<T> {
    pub vaccinated: T,
    pub unvaccinated: T,
}

impl<T> Arms<T> {
    pub fn new(vaccinated: T, unvaccinated: T) -> Self {
        Self {
            vaccinated,
            unvaccinated,
        }
    }
}

/// Applies `test` to each arm in expectation and estimates VE from the
/// resulting positive/negative table.
pub fn ve_pipeline_with_misclassification(
    sizes: Arms<f64>,
    prevalences: Arms<f64>,
    test: &DiagnosticTest,
    method: Method,
) -> Result<VeEstimate> {
    if !(sizes.vaccinated > 0.0 && sizes.unvaccinated > 0.0) {
        return Err(Error::InvalidInput(format!(
            "arm sizes must be positive, got {} and {}",
            sizes.vaccinated, sizes.unvaccinated
        )));
    }
    let arm = |n: f64, p: f64| {
        crate::error::check_probability("prevalence", p)?;
        apply_test(n * p, n - n * p, test, Sampling::Deterministic)
    };
    let vax = arm(sizes.vaccinated, prevalences.vaccinated)?;
    let unvax = arm(sizes.unvaccinated, prevalences.unvaccinated)?;
    let counts =
        ObservedCounts::collapsed(vax.positives(), vax.negatives(), unvax.positives(), unvax.negatives())?;
    estimate(&counts, method, ControlGroup::Combined)
}

/// Risk-ratio VE after Rogan-Gladen correction of each arm's positive rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectedVe {
    pub estimate: VeEstimate,
    pub prevalences: Arms<f64>,
    pub clamped: Arms<bool>,
}

impl CorrectedVe {
    pub fn any_clamped(&self) -> bool {
        self.clamped.vaccinated || self.clamped.unvaccinated
    }
}

pub fn ve_corrected(positives: Arms<f64>, sizes: Arms<f64>, test: &DiagnosticTest) -> Result<CorrectedVe> {
    check_count("vaccinated positives", positives.vaccinated)?;
    check_count("unvaccinated positives", positives.unvaccinated)?;
    if !(sizes.vaccinated > 0.0 && sizes.unvaccinated > 0.0) {
        return Err(Error::InvalidInput(format!(
            "arm sizes must be positive, got {} and {}",
            sizes.vaccinated, sizes.unvaccinated
        )));
    }
    let rate = |pos: f64, n: f64| -> Result<f64> {
        if pos > n {
            return Err(Error::InvalidInput(format!("{pos} positives out of {n}")));
        }
        Ok(pos / n)
    };
    let vax = correct_observed_rate(rate(positives.vaccinated, sizes.vaccinated)?, test)?;
    let unvax = correct_observed_rate(rate(positives.unvaccinated, sizes.unvaccinated)?, test)?;
    if unvax.prevalence == 0.0 {
        return Err(Error::UndefinedEstimate(
            "corrected unvaccinated prevalence is zero".into(),
        ));
    }
    let value = 1.0 - vax.prevalence / unvax.prevalence;
    finite(value)?;
    Ok(CorrectedVe {
        estimate: VeEstimate {
            value,
            method: Method::RiskRatio,
            control_group: ControlGroup::NotApplicable,
        },
        prevalences: Arms::new(vax.prevalence, unvax.prevalence),
        clamped: Arms::new(vax.clamped, unvax.clamped),
    })
}
