//! Diagnostic test model: forward misclassification, prevalence correction
//! and the false-positive / true-positive crossover.

use crate::error::{check_count, check_probability, Error, Result};
use crate::sampling::{binomial, rng_from_seed, Sampling, SimRng};

/// Below this distance from `se + sp = 1` a test is treated as uninformative.
pub const INFORMATIVE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticTest {
    sensitivity: f64,
    specificity: f64,
}

impl DiagnosticTest {
    pub const PERFECT: DiagnosticTest = DiagnosticTest {
        sensitivity: 1.0,
        specificity: 1.0,
    };

    pub fn new(sensitivity: f64, specificity: f64) -> Result<Self> {
        check_probability("sensitivity", sensitivity)?;
        check_probability("specificity", specificity)?;
        Ok(Self {
            sensitivity,
            specificity,
        })
    }

    pub fn sensitivity(&self) -> f64 {
        self.sensitivity
    }

    pub fn specificity(&self) -> f64 {
        self.specificity
    }

    /// Youden's J, `se + sp - 1`.
    pub fn youden(&self) -> f64 {
        self.sensitivity + self.specificity - 1.0
    }

    pub fn is_informative(&self) -> bool {
        self.youden().abs() > INFORMATIVE_EPS
    }
}

/// Test outcomes for one group of people with known infection status.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfusionTable {
    pub true_positive: f64,
    pub false_positive: f64,
    pub false_negative: f64,
    pub true_negative: f64,
}

impl ConfusionTable {
    pub fn positives(&self) -> f64 {
        self.true_positive + self.false_positive
    }

    pub fn negatives(&self) -> f64 {
        self.false_negative + self.true_negative
    }

    pub fn infected(&self) -> f64 {
        self.true_positive + self.false_negative
    }

    pub fn not_infected(&self) -> f64 {
        self.false_positive + self.true_negative
    }

    pub fn total(&self) -> f64 {
        self.infected() + self.not_infected()
    }
}

/// Runs `test` on `infected` and `not_infected` people.
pub fn apply_test(
    infected: f64,
    not_infected: f64,
    test: &DiagnosticTest,
    mode: Sampling,
) -> Result<ConfusionTable> {
    match mode {
        Sampling::Deterministic => {
            check_count("infected", infected)?;
            check_count("not infected", not_infected)?;
            let tp = test.sensitivity * infected;
            let tn = test.specificity * not_infected;
            Ok(ConfusionTable {
                true_positive: tp,
                false_positive: not_infected - tn,
                false_negative: infected - tp,
                true_negative: tn,
            })
        }
        Sampling::Stochastic { seed } => {
            apply_test_with(infected, not_infected, test, &mut rng_from_seed(seed))
        }
    }
}

/// Stochastic `apply_test` drawing from an existing generator.
pub fn apply_test_with(
    infected: f64,
    not_infected: f64,
    test: &DiagnosticTest,
    rng: &mut SimRng,
) -> Result<ConfusionTable> {
    let tp = binomial(rng, "infected", infected, test.sensitivity)?;
    let tn = binomial(rng, "not infected", not_infected, test.specificity)?;
    Ok(ConfusionTable {
        true_positive: tp,
        false_positive: not_infected - tn,
        false_negative: infected - tp,
        true_negative: tn,
    })
}

/// Expected fraction of positive results at a given true prevalence.
pub fn observed_positive_rate(prevalence: f64, test: &DiagnosticTest) -> Result<f64> {
    check_probability("prevalence", prevalence)?;
    let rate = test.sensitivity * prevalence + (1.0 - test.specificity) * (1.0 - prevalence);
    Ok(rate.clamp(0.0, 1.0))
}

/// A corrected prevalence and whether it had to be clamped into [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correction {
    pub prevalence: f64,
    pub raw: f64,
    pub clamped: bool,
}

/// Rogan-Gladen inversion of [`observed_positive_rate`].
pub fn correct_observed_rate(observed: f64, test: &DiagnosticTest) -> Result<Correction> {
    check_probability("observed rate", observed)?;
    if !test.is_informative() {
        return Err(Error::NonInvertibleTest {
            sensitivity: test.sensitivity,
            specificity: test.specificity,
        });
    }
    let raw = (observed - (1.0 - test.specificity)) / test.youden();
    let prevalence = raw.clamp(0.0, 1.0);
    Ok(Correction {
        prevalence,
        raw,
        clamped: prevalence != raw,
    })
}

/// Prevalence below which expected false positives outnumber true positives,
/// `(1 - sp) / (se + 1 - sp)`.
pub fn fp_exceeds_tp_prevalence(test: &DiagnosticTest) -> Result<f64> {
    let fpr = 1.0 - test.specificity;
    let denom = test.sensitivity + fpr;
    if !(denom > 0.0) {
        return Err(Error::DegenerateTest);
    }
    Ok(fpr / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn t(se: f64, sp: f64) -> DiagnosticTest {
        DiagnosticTest::new(se, sp).unwrap()
    }

    #[test]
    fn worked_example_vaccinated_arm() {
        let c = apply_test(100.0, 9_900.0, &t(0.70, 0.95), Sampling::Deterministic).unwrap();
        assert!((c.true_positive - 70.0).abs() < 1e-12);
        assert!((c.false_positive - 495.0).abs() < 1e-12);
        assert!((c.positives() - 565.0).abs() < 1e-12);
        assert!((c.negatives() - 9_435.0).abs() < 1e-12);
    }

    #[test]
    fn worked_example_unvaccinated_arm() {
        let c = apply_test(1_000.0, 9_000.0, &t(0.70, 0.95), Sampling::Deterministic).unwrap();
        assert!((c.true_positive - 700.0).abs() < 1e-12);
        assert!((c.false_positive - 450.0).abs() < 1e-12);
        assert!((c.positives() - 1_150.0).abs() < 1e-12);
    }

    #[test]
    fn perfect_test_is_exact() {
        let c = apply_test(37.0, 412.0, &DiagnosticTest::PERFECT, Sampling::Deterministic).unwrap();
        assert_eq!(
            c,
            ConfusionTable {
                true_positive: 37.0,
                false_positive: 0.0,
                false_negative: 0.0,
                true_negative: 412.0
            }
        );
    }

    #[test]
    fn invalid_inputs() {
        assert!(DiagnosticTest::new(1.1, 0.9).is_err());
        assert!(DiagnosticTest::new(0.9, -0.1).is_err());
        assert!(apply_test(-1.0, 1.0, &DiagnosticTest::PERFECT, Sampling::Deterministic).is_err());
        assert!(observed_positive_rate(1.5, &DiagnosticTest::PERFECT).is_err());
    }

    #[test]
    fn positive_rate_examples() {
        let test = t(0.70, 0.95);
        assert!((observed_positive_rate(0.01, &test).unwrap() - 0.0565).abs() < 1e-15);
        assert!((observed_positive_rate(0.0, &test).unwrap() - 0.05).abs() < 1e-15);
        assert_eq!(observed_positive_rate(1.0, &test).unwrap(), 0.70);
    }

    #[test]
    fn correction_examples() {
        let test = t(0.70, 0.95);
        let c = correct_observed_rate(0.0565, &test).unwrap();
        assert!((c.prevalence - 0.01).abs() < 1e-12);
        assert!(!c.clamped);

        let c = correct_observed_rate(0.01, &test).unwrap();
        assert_eq!(c.prevalence, 0.0);
        assert!(c.raw < 0.0);
        assert!(c.clamped);

        let c = correct_observed_rate(0.3, &DiagnosticTest::PERFECT).unwrap();
        assert_eq!(c.prevalence, 0.3);

        assert!(matches!(
            correct_observed_rate(0.3, &t(0.6, 0.4)),
            Err(Error::NonInvertibleTest { .. })
        ));
    }

    #[test]
    fn crossover_examples() {
        assert_eq!(fp_exceeds_tp_prevalence(&t(0.8, 1.0)).unwrap(), 0.0);
        assert!((fp_exceeds_tp_prevalence(&t(0.70, 0.95)).unwrap() - 1.0 / 15.0).abs() < 1e-15);
        assert!((fp_exceeds_tp_prevalence(&t(0.95, 0.70)).unwrap() - 0.24).abs() < 1e-15);
        assert_eq!(fp_exceeds_tp_prevalence(&t(0.0, 1.0)), Err(Error::DegenerateTest));
    }

    #[test]
    fn stochastic_is_seeded() {
        let test = t(0.7, 0.95);
        let a = apply_test(1_000.0, 9_000.0, &test, Sampling::Stochastic { seed: 5 }).unwrap();
        let b = apply_test(1_000.0, 9_000.0, &test, Sampling::Stochastic { seed: 5 }).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.infected(), 1_000.0);
        assert_eq!(a.not_infected(), 9_000.0);
    }

    #[test]
    fn stochastic_means_converge() {
        let test = t(0.7, 0.95);
        let reps = 4_000;
        let mut rng = rng_from_seed(99);
        let mut sum_tp = 0.0;
        let mut sum_fp = 0.0;
        for _ in 0..reps {
            let c = apply_test_with(1_000.0, 9_000.0, &test, &mut rng).unwrap();
            sum_tp += c.true_positive;
            sum_fp += c.false_positive;
        }
        // Binomial standard errors of the means.
        let se_tp = (1_000.0f64 * 0.7 * 0.3 / reps as f64).sqrt();
        let se_fp = (9_000.0f64 * 0.05 * 0.95 / reps as f64).sqrt();
        assert!((sum_tp / reps as f64 - 700.0).abs() < 4.0 * se_tp);
        assert!((sum_fp / reps as f64 - 450.0).abs() < 4.0 * se_fp);
    }

    proptest! {
        #[test]
        fn conservation(
            n in 0u32..5_000, m in 0u32..5_000,
            se in 0.0f64..=1.0, sp in 0.0f64..=1.0, seed in any::<u64>()
        ) {
            let test = t(se, sp);
            for mode in [Sampling::Deterministic, Sampling::Stochastic { seed }] {
                let c = apply_test(n as f64, m as f64, &test, mode).unwrap();
                prop_assert!((c.infected() - n as f64).abs() < 1e-9);
                prop_assert!((c.not_infected() - m as f64).abs() < 1e-9);
                prop_assert!(c.true_positive >= 0.0 && c.false_positive >= -1e-12);
            }
        }

        #[test]
        fn round_trip(p in 0.0f64..=1.0, se in 0.0f64..=1.0, sp in 0.0f64..=1.0) {
            let test = t(se, sp);
            prop_assume!(test.is_informative());
            // keep well clear of the threshold so the 1e-12 bound is meaningful
            prop_assume!(test.youden().abs() > 1e-3);
            let obs = observed_positive_rate(p, &test).unwrap();
            let back = correct_observed_rate(obs, &test).unwrap();
            prop_assert!((back.prevalence - p).abs() < 1e-12, "{} vs {}", back.prevalence, p);
        }

        #[test]
        fn monotone_in_prevalence(
            p in 0.0f64..0.99, dp in 0.001f64..0.01, se in 0.0f64..=1.0, sp in 0.0f64..=1.0
        ) {
            let test = t(se, sp);
            let lo = observed_positive_rate(p, &test).unwrap();
            let hi = observed_positive_rate(p + dp, &test).unwrap();
            let j = test.youden();
            if j > 1e-6 {
                prop_assert!(hi > lo);
            } else if j < -1e-6 {
                prop_assert!(hi < lo);
            }
        }

        #[test]
        fn crossover_splits_fp_and_tp(se in 0.01f64..=1.0, sp in 0.0f64..0.999, p in 0.0f64..=1.0) {
            let test = t(se, sp);
            let star = fp_exceeds_tp_prevalence(&test).unwrap();
            prop_assume!((p - star).abs() > 1e-9);
            let c = apply_test(p, 1.0 - p, &test, Sampling::Deterministic).unwrap();
            if p < star {
                prop_assert!(c.false_positive > c.true_positive);
            } else {
                prop_assert!(c.false_positive < c.true_positive);
            }
        }
    }
}
