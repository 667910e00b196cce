//! Latent population and the care-seeking study table.
//!
//! The study table splits each vaccination arm into infection categories
//! (target pathogen, other pathogen, not infected) and into people who do
//! and do not seek care. In the conventional letter notation the cells are
//!
//! ```text
//!                  seek care               do not seek care
//!               target other none total   target other none total
//! vaccinated      A     B     C    N1       D     E     F    N2
//! unvaccinated    G     H     I    N3       J     K     L    N4
//! ```

use std::fmt;

use crate::error::{check_count, check_probability, Arm, Error, Result};
use crate::sampling::{binomial, rng_from_seed, Sampling, SimRng};

/// Infection status of a latent cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Category {
    Target,
    Other,
    Uninfected,
}

impl Category {
    pub const ALL: [Category; 3] = [Category::Target, Category::Other, Category::Uninfected];
}

/// Per (arm, category) probability of seeking care.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CareSeeking {
    probs: [[f64; 3]; 2],
}

impl Default for CareSeeking {
    fn default() -> Self {
        Self::uniform(1.0)
    }
}

fn arm_index(arm: Arm) -> usize {
    match arm {
        Arm::Vaccinated => 0,
        Arm::Unvaccinated => 1,
    }
}

fn category_index(category: Category) -> usize {
    match category {
        Category::Target => 0,
        Category::Other => 1,
        Category::Uninfected => 2,
    }
}

impl CareSeeking {
    pub fn uniform(q: f64) -> Self {
        Self { probs: [[q; 3]; 2] }
    }

    pub fn get(&self, arm: Arm, category: Category) -> f64 {
        self.probs[arm_index(arm)][category_index(category)]
    }

    pub fn set(&mut self, arm: Arm, category: Category, q: f64) {
        self.probs[arm_index(arm)][category_index(category)] = q;
    }

    pub fn with(mut self, arm: Arm, category: Category, q: f64) -> Self {
        self.set(arm, category, q);
        self
    }

    fn validate(&self) -> Result<()> {
        for arm in [Arm::Vaccinated, Arm::Unvaccinated] {
            for category in Category::ALL {
                check_probability(
                    &format!("care-seeking probability ({arm}, {category:?})"),
                    self.get(arm, category),
                )?;
            }
        }
        Ok(())
    }
}

/// Counts for one arm, split by infection category.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Cells {
    pub target: f64,
    pub other: f64,
    pub uninfected: f64,
}

impl Cells {
    pub fn new(target: f64, other: f64, uninfected: f64) -> Self {
        Self {
            target,
            other,
            uninfected,
        }
    }

    pub fn get(&self, category: Category) -> f64 {
        match category {
            Category::Target => self.target,
            Category::Other => self.other,
            Category::Uninfected => self.uninfected,
        }
    }

    fn get_mut(&mut self, category: Category) -> &mut f64 {
        match category {
            Category::Target => &mut self.target,
            Category::Other => &mut self.other,
            Category::Uninfected => &mut self.uninfected,
        }
    }

    pub fn total(&self) -> f64 {
        self.target + self.other + self.uninfected
    }
}

/// Ground truth: who is infected with what, and how likely each cell is to
/// seek care.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatentPopulation {
    pub vaccinated: Cells,
    pub unvaccinated: Cells,
    pub care_seek: CareSeeking,
}

impl LatentPopulation {
    pub fn new(vaccinated: Cells, unvaccinated: Cells, care_seek: CareSeeking) -> Result<Self> {
        let pop = Self {
            vaccinated,
            unvaccinated,
            care_seek,
        };
        pop.validate()?;
        Ok(pop)
    }

    /// Expected latent counts for arms of the given sizes, with target and
    /// other-pathogen prevalences per arm.
    pub fn from_prevalences(
        sizes: (f64, f64),
        target: (f64, f64),
        other: (f64, f64),
        care_seek: CareSeeking,
    ) -> Result<Self> {
        let arm = |name: Arm, n: f64, p_target: f64, p_other: f64| -> Result<Cells> {
            check_count(&format!("{name} arm size"), n)?;
            check_probability(&format!("{name} target prevalence"), p_target)?;
            check_probability(&format!("{name} other-pathogen prevalence"), p_other)?;
            if p_target + p_other > 1.0 {
                return Err(Error::InvalidInput(format!(
                    "{name} prevalences sum to {} > 1",
                    p_target + p_other
                )));
            }
            let t = n * p_target;
            let o = n * p_other;
            Ok(Cells::new(t, o, n - t - o))
        };
        Self::new(
            arm(Arm::Vaccinated, sizes.0, target.0, other.0)?,
            arm(Arm::Unvaccinated, sizes.1, target.1, other.1)?,
            care_seek,
        )
    }

    pub fn arm(&self, arm: Arm) -> &Cells {
        match arm {
            Arm::Vaccinated => &self.vaccinated,
            Arm::Unvaccinated => &self.unvaccinated,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for arm in [Arm::Vaccinated, Arm::Unvaccinated] {
            for category in Category::ALL {
                check_count(&format!("{arm} {category:?} count"), self.arm(arm).get(category))?;
            }
        }
        self.care_seek.validate()
    }
}

/// One vaccination row of the study table.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ArmTable {
    pub seek: Cells,
    pub seek_total: f64,
    pub no_seek: Cells,
    pub no_seek_total: f64,
}

/// The twelve-cell care-seeking table with its four row totals.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StudyTable {
    pub vaccinated: ArmTable,
    pub unvaccinated: ArmTable,
}

// Letter accessors follow the conventional table notation.
impl StudyTable {
    pub fn a(&self) -> f64 {
        self.vaccinated.seek.target
    }
    pub fn b(&self) -> f64 {
        self.vaccinated.seek.other
    }
    pub fn c(&self) -> f64 {
        self.vaccinated.seek.uninfected
    }
    pub fn g(&self) -> f64 {
        self.unvaccinated.seek.target
    }
    pub fn h(&self) -> f64 {
        self.unvaccinated.seek.other
    }
    pub fn i(&self) -> f64 {
        self.unvaccinated.seek.uninfected
    }
    pub fn n1(&self) -> f64 {
        self.vaccinated.seek_total
    }
    pub fn n2(&self) -> f64 {
        self.vaccinated.no_seek_total
    }
    pub fn n3(&self) -> f64 {
        self.unvaccinated.seek_total
    }
    pub fn n4(&self) -> f64 {
        self.unvaccinated.no_seek_total
    }

    pub fn arm(&self, arm: Arm) -> &ArmTable {
        match arm {
            Arm::Vaccinated => &self.vaccinated,
            Arm::Unvaccinated => &self.unvaccinated,
        }
    }

    /// Table with only the seek-care half populated, totals recomputed.
    pub fn from_seek_care(vaccinated: Cells, unvaccinated: Cells) -> Self {
        let row = |seek: Cells| ArmTable {
            seek,
            seek_total: seek.total(),
            no_seek: Cells::default(),
            no_seek_total: 0.0,
        };
        Self {
            vaccinated: row(vaccinated),
            unvaccinated: row(unvaccinated),
        }
    }
}

/// Splits every latent cell into seek-care and no-care parts.
///
/// Deterministic mode uses the expectation `n * q`; stochastic mode draws the
/// seek-care count from Binomial(n, q) and needs whole latent counts.
pub fn build_study_table(pop: &LatentPopulation, mode: Sampling) -> Result<StudyTable> {
    match mode {
        Sampling::Deterministic => split(pop, |n, q, _| Ok(n * q)),
        Sampling::Stochastic { seed } => build_study_table_with(pop, &mut rng_from_seed(seed)),
    }
}

/// Stochastic split drawing from an existing generator.
pub fn build_study_table_with(pop: &LatentPopulation, rng: &mut SimRng) -> Result<StudyTable> {
    split(pop, |n, q, name| binomial(rng, name, n, q))
}

fn split<F>(pop: &LatentPopulation, mut seek_count: F) -> Result<StudyTable>
where
    F: FnMut(f64, f64, &str) -> Result<f64>,
{
    pop.validate()?;
    let mut table = StudyTable::default();
    for arm in [Arm::Vaccinated, Arm::Unvaccinated] {
        let latent = pop.arm(arm);
        let mut row = ArmTable::default();
        for category in Category::ALL {
            let n = latent.get(category);
            let seek = seek_count(n, pop.care_seek.get(arm, category), "latent cell")?;
            *row.seek.get_mut(category) = seek;
            *row.no_seek.get_mut(category) = n - seek;
        }
        row.seek_total = row.seek.total();
        row.no_seek_total = row.no_seek.total();
        match arm {
            Arm::Vaccinated => table.vaccinated = row,
            Arm::Unvaccinated => table.unvaccinated = row,
        }
    }
    Ok(table)
}

/// A broken table invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    RowSum {
        row: &'static str,
        cells: &'static str,
        total: &'static str,
        sum: f64,
        stated: f64,
    },
    Negative {
        cell: &'static str,
        value: f64,
    },
    NonFinite {
        cell: &'static str,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::RowSum {
                row,
                cells,
                total,
                sum,
                stated,
            } => write!(
                f,
                "{row}: {cells} = {sum} but {total} = {stated} (off by {})",
                sum - stated
            ),
            Violation::Negative { cell, value } => write!(f, "cell {cell} is negative ({value})"),
            Violation::NonFinite { cell } => write!(f, "cell {cell} is not finite"),
        }
    }
}

const ROW_TOLERANCE: f64 = 1e-9;

/// Lists every broken invariant of `t`; an empty list means the table is valid.
pub fn validate_table(t: &StudyTable) -> Vec<Violation> {
    let rows: [(&'static str, &Cells, f64, [&'static str; 3], &'static str, &'static str); 4] = [
        (
            "row 1 (vaccinated, seek care)",
            &t.vaccinated.seek,
            t.vaccinated.seek_total,
            ["A", "B", "C"],
            "A+B+C",
            "N1",
        ),
        (
            "row 2 (vaccinated, no care)",
            &t.vaccinated.no_seek,
            t.vaccinated.no_seek_total,
            ["D", "E", "F"],
            "D+E+F",
            "N2",
        ),
        (
            "row 3 (unvaccinated, seek care)",
            &t.unvaccinated.seek,
            t.unvaccinated.seek_total,
            ["G", "H", "I"],
            "G+H+I",
            "N3",
        ),
        (
            "row 4 (unvaccinated, no care)",
            &t.unvaccinated.no_seek,
            t.unvaccinated.no_seek_total,
            ["J", "K", "L"],
            "J+K+L",
            "N4",
        ),
    ];
    let mut out = Vec::new();
    for (row, cells, stated, names, cells_label, total) in rows {
        let values = [cells.target, cells.other, cells.uninfected];
        for (name, value) in names.into_iter().zip(values) {
            if !value.is_finite() {
                out.push(Violation::NonFinite { cell: name });
            } else if value < 0.0 {
                out.push(Violation::Negative { cell: name, value });
            }
        }
        if !stated.is_finite() {
            out.push(Violation::NonFinite { cell: total });
        } else if stated < 0.0 {
            out.push(Violation::Negative {
                cell: total,
                value: stated,
            });
        }
        let sum = cells.total();
        if sum.is_finite()
            && stated.is_finite()
            && (sum - stated).abs() > ROW_TOLERANCE * stated.abs().max(1.0)
        {
            out.push(Violation::RowSum {
                row,
                cells: cells_label,
                total,
                sum,
                stated,
            });
        }
    }
    out
}

/// |B/N1 - H/N3|: how far the table is from equal other-pathogen incidence
/// among care seekers in both arms.
pub fn assumption_gap(t: &StudyTable) -> Result<f64> {
    if !(t.n1() > 0.0) || !(t.n3() > 0.0) {
        return Err(Error::InvalidInput(format!(
            "assumption gap needs N1 > 0 and N3 > 0, got N1 = {}, N3 = {}",
            t.n1(),
            t.n3()
        )));
    }
    Ok((t.b() / t.n1() - t.h() / t.n3()).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn baseline_pop(q: f64) -> LatentPopulation {
        LatentPopulation::new(
            Cells::new(100.0, 0.0, 9_900.0),
            Cells::new(1_000.0, 0.0, 9_000.0),
            CareSeeking::uniform(q),
        )
        .unwrap()
    }

    #[test]
    fn full_care_puts_everyone_in_the_seek_half() {
        let t = build_study_table(&baseline_pop(1.0), Sampling::Deterministic).unwrap();
        assert_eq!((t.a(), t.b(), t.c(), t.n1()), (100.0, 0.0, 9_900.0, 10_000.0));
        assert_eq!((t.g(), t.h(), t.i(), t.n3()), (1_000.0, 0.0, 9_000.0, 10_000.0));
        assert_eq!(t.vaccinated.no_seek, Cells::default());
        assert_eq!(t.unvaccinated.no_seek, Cells::default());
        assert_eq!((t.n2(), t.n4()), (0.0, 0.0));
        assert!(validate_table(&t).is_empty());
    }

    #[test]
    fn half_care_halves_the_seek_cells() {
        let t = build_study_table(&baseline_pop(0.5), Sampling::Deterministic).unwrap();
        assert_eq!((t.a(), t.c(), t.n1()), (50.0, 4_950.0, 5_000.0));
        assert_eq!((t.g(), t.i(), t.n3()), (500.0, 4_500.0, 5_000.0));
        assert_eq!(t.vaccinated.no_seek.uninfected, 4_950.0);
        assert_eq!(t.n4(), 5_000.0);
    }

    #[test]
    fn zero_care_probability_zeroes_the_cell() {
        let care = CareSeeking::default().with(Arm::Unvaccinated, Category::Target, 0.0);
        let pop = LatentPopulation::new(
            Cells::new(10.0, 20.0, 30.0),
            Cells::new(40.0, 50.0, 60.0),
            care,
        )
        .unwrap();
        let t = build_study_table(&pop, Sampling::Stochastic { seed: 3 }).unwrap();
        assert_eq!(t.g(), 0.0);
        assert_eq!(t.unvaccinated.no_seek.target, 40.0);
    }

    #[test]
    fn stochastic_split_is_reproducible_and_conserves_counts() {
        let pop = LatentPopulation::new(
            Cells::new(100.0, 250.0, 9_650.0),
            Cells::new(1_000.0, 300.0, 8_700.0),
            CareSeeking::uniform(0.3).with(Arm::Vaccinated, Category::Target, 0.8),
        )
        .unwrap();
        let x = build_study_table(&pop, Sampling::Stochastic { seed: 11 }).unwrap();
        let y = build_study_table(&pop, Sampling::Stochastic { seed: 11 }).unwrap();
        assert_eq!(x, y);
        assert!(validate_table(&x).is_empty());
        for arm in [Arm::Vaccinated, Arm::Unvaccinated] {
            for c in Category::ALL {
                let row = x.arm(arm);
                assert_eq!(row.seek.get(c) + row.no_seek.get(c), pop.arm(arm).get(c));
                assert_eq!(row.seek.get(c).fract(), 0.0);
            }
        }
    }

    #[test]
    fn stochastic_split_needs_whole_counts() {
        let pop = LatentPopulation::new(
            Cells::new(10.5, 0.0, 1.0),
            Cells::new(1.0, 0.0, 1.0),
            CareSeeking::default(),
        )
        .unwrap();
        assert!(matches!(
            build_study_table(&pop, Sampling::Stochastic { seed: 1 }),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn rejects_bad_population() {
        assert!(LatentPopulation::new(
            Cells::new(-1.0, 0.0, 1.0),
            Cells::new(1.0, 0.0, 1.0),
            CareSeeking::default()
        )
        .is_err());
        assert!(LatentPopulation::new(
            Cells::new(1.0, 0.0, 1.0),
            Cells::new(1.0, 0.0, 1.0),
            CareSeeking::uniform(1.2)
        )
        .is_err());
        assert!(LatentPopulation::from_prevalences(
            (10.0, 10.0),
            (0.6, 0.1),
            (0.5, 0.0),
            CareSeeking::default()
        )
        .is_err());
    }

    #[test]
    fn validate_reports_row_and_negativity() {
        let good = build_study_table(&baseline_pop(1.0), Sampling::Deterministic).unwrap();

        let mut bad_row = good;
        bad_row.vaccinated.seek_total = 9_990.0;
        let v = validate_table(&bad_row);
        assert_eq!(v.len(), 1);
        match &v[0] {
            Violation::RowSum { row, total, sum, stated, .. } => {
                assert!(row.starts_with("row 1"));
                assert_eq!(*total, "N1");
                assert_eq!(sum - stated, 10.0);
            }
            other => panic!("unexpected {other:?}"),
        }

        let mut negative = good;
        negative.vaccinated.seek.uninfected = -1.0;
        negative.vaccinated.seek_total = 99.0;
        let v = validate_table(&negative);
        assert_eq!(v, vec![Violation::Negative { cell: "C", value: -1.0 }]);
    }

    #[test]
    fn assumption_gap_cases() {
        let t = build_study_table(&baseline_pop(1.0), Sampling::Deterministic).unwrap();
        assert_eq!(assumption_gap(&t).unwrap(), 0.0);

        let equal = StudyTable::from_seek_care(
            Cells::new(10.0, 20.0, 70.0),
            Cells::new(30.0, 40.0, 130.0),
        );
        assert_eq!(assumption_gap(&equal).unwrap(), 0.0);

        let observed = StudyTable::from_seek_care(
            Cells::new(565.0, 9_435.0, 0.0),
            Cells::new(1_150.0, 8_850.0, 0.0),
        );
        assert!((assumption_gap(&observed).unwrap() - 0.0585).abs() < 1e-15);

        assert!(matches!(
            assumption_gap(&StudyTable::default()),
            Err(Error::InvalidInput(_))
        ));
    }
}
