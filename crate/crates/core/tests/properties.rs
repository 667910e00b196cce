use proptest::prelude::*;

use tndsim::estimators::{
    ve_corrected, ve_odds_ratio, ve_pipeline_with_misclassification, ve_risk_ratio, Arms,
    ControlGroup, Method,
};
use tndsim::population::{
    assumption_gap, build_study_table, validate_table, CareSeeking, Category, Cells,
    LatentPopulation, StudyTable,
};
use tndsim::report::sweep_csv;
use tndsim::sampling::Sampling;
use tndsim::simulate::{
    find_sign_boundary, monte_carlo, run_scenario, run_sweep, run_sweep_serial, Axis, Param,
    Scenario, SweepSpec,
};
use tndsim::testing::DiagnosticTest;
use tndsim::Arm;

const ARMS: [Arm; 2] = [Arm::Vaccinated, Arm::Unvaccinated];

fn care() -> impl Strategy<Value = CareSeeking> {
    proptest::collection::vec(prop_oneof![Just(0.0), Just(1.0), 0.0f64..=1.0], 6).prop_map(|q| {
        let mut c = CareSeeking::default();
        let mut k = 0;
        for arm in ARMS {
            for cat in Category::ALL {
                c.set(arm, cat, q[k]);
                k += 1;
            }
        }
        c
    })
}

fn whole_cells() -> impl Strategy<Value = Cells> {
    (0u32..20_000, 0u32..20_000, 0u32..20_000)
        .prop_map(|(t, o, u)| Cells::new(t as f64, o as f64, u as f64))
}

proptest! {
    #[test]
    fn study_table_conserves_rows(
        vax in whole_cells(), unvax in whole_cells(), care in care(), seed in any::<u64>()
    ) {
        let pop = LatentPopulation::new(vax, unvax, care).unwrap();
        for mode in [Sampling::Deterministic, Sampling::Stochastic { seed }] {
            let t = build_study_table(&pop, mode).unwrap();
            prop_assert!(validate_table(&t).is_empty(), "{:?}", validate_table(&t));
            for arm in ARMS {
                for cat in Category::ALL {
                    let row = t.arm(arm);
                    let total = row.seek.get(cat) + row.no_seek.get(cat);
                    prop_assert!((total - pop.arm(arm).get(cat)).abs() < 1e-9);
                    if care.get(arm, cat) == 0.0 {
                        prop_assert_eq!(row.seek.get(cat), 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn gap_is_zero_without_other_pathogens(
        a in 0.0f64..1e5, c in 1.0f64..1e5, g in 0.0f64..1e5, i in 1.0f64..1e5
    ) {
        let t = StudyTable::from_seek_care(Cells::new(a, 0.0, c), Cells::new(g, 0.0, i));
        prop_assert_eq!(assumption_gap(&t).unwrap(), 0.0);
    }

    #[test]
    fn estimators_are_scale_invariant(
        a in 0.0f64..1e4, b in 1.0f64..1e4, g in 1.0f64..1e4, h in 0.0f64..1e4,
        extra in (0.0f64..1e4, 0.0f64..1e4), lambda in 1e-3f64..1e3
    ) {
        let (n1, n3) = (a + b + extra.0, g + h + extra.1);
        let rr = ve_risk_ratio(a, n1, g, n3).unwrap().value;
        let rr_scaled = ve_risk_ratio(lambda * a, lambda * n1, lambda * g, lambda * n3).unwrap().value;
        prop_assert!((rr - rr_scaled).abs() < 1e-12 * rr.abs().max(1.0));
        let or = ve_odds_ratio(a, b, g, h, ControlGroup::Combined).unwrap().value;
        let or_scaled =
            ve_odds_ratio(lambda * a, lambda * b, lambda * g, lambda * h, ControlGroup::Combined).unwrap().value;
        prop_assert!((or - or_scaled).abs() < 1e-12 * or.abs().max(1.0));
    }

    #[test]
    fn uninformative_tests_flip_the_sign(
        se in 0.0f64..1.0, sp in 0.0f64..1.0, p_unvax in 0.01f64..1.0, frac in 0.0f64..0.99,
        size in 1.0f64..1e6
    ) {
        prop_assume!(se + sp < 1.0 - 1e-9);
        let p_vax = frac * p_unvax;
        let ve = ve_pipeline_with_misclassification(
            Arms::new(size, size),
            Arms::new(p_vax, p_unvax),
            &DiagnosticTest::new(se, sp).unwrap(),
            Method::RiskRatio,
        ).unwrap().value;
        prop_assert!(ve < 0.0, "VE {ve}");
    }

    // |se + sp - 1| >= 0.01: closer to the uninformative line the inversion
    // amplifies rounding beyond the 1e-9 bound.
    #[test]
    fn correction_undoes_misclassification(
        se in 0.0f64..=1.0, sp in 0.0f64..=1.0, p_unvax in 0.01f64..=1.0, frac in 0.0f64..=1.0,
        size in 100.0f64..1e6
    ) {
        let test = DiagnosticTest::new(se, sp).unwrap();
        prop_assume!(test.youden().abs() >= 0.01);
        let p_vax = frac * p_unvax;
        let sizes = Arms::new(size, size);
        let positives = |p: f64| size * (se * p + (1.0 - sp) * (1.0 - p));
        let observed = ve_pipeline_with_misclassification(sizes, Arms::new(p_vax, p_unvax), &test, Method::RiskRatio)
            .unwrap().value;
        let corrected = ve_corrected(Arms::new(positives(p_vax), positives(p_unvax)), sizes, &test).unwrap();
        prop_assume!(!corrected.any_clamped());
        let truth = 1.0 - p_vax / p_unvax;
        prop_assert!((corrected.estimate.value - truth).abs() < 1e-9,
            "corrected {} truth {} observed {}", corrected.estimate.value, truth, observed);
    }

    #[test]
    fn informative_sweeps_never_go_negative(
        se in 0.0f64..=1.0, sp in 0.0f64..=1.0, p_unvax in 0.001f64..=1.0, frac in 0.0f64..1.0
    ) {
        prop_assume!(se + sp > 1.0);
        let mut s = Scenario::paper_baseline().with_test(se, sp);
        s.prevalence = Arms::new(frac * p_unvax, p_unvax);
        let ve = run_scenario(&s).unwrap().estimate.value;
        prop_assert!(ve >= 0.0, "VE {ve}");
    }
}

#[test]
fn stochastic_cells_average_to_the_deterministic_table() {
    let pop = LatentPopulation::new(
        Cells::new(120.0, 400.0, 9_480.0),
        Cells::new(900.0, 350.0, 8_750.0),
        CareSeeking::uniform(0.6)
            .with(Arm::Vaccinated, Category::Target, 0.9)
            .with(Arm::Unvaccinated, Category::Uninfected, 0.2),
    )
    .unwrap();
    let expected = build_study_table(&pop, Sampling::Deterministic).unwrap();
    let reps = 10_000;
    let tables: Vec<StudyTable> = (0..reps)
        .map(|k| build_study_table(&pop, Sampling::Stochastic { seed: k }).unwrap())
        .collect();
    for arm in ARMS {
        for cat in Category::ALL {
            let xs: Vec<f64> = tables.iter().map(|t| t.arm(arm).seek.get(cat)).collect();
            let mean = xs.iter().sum::<f64>() / reps as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
            let se = (var / reps as f64).sqrt();
            let target = expected.arm(arm).seek.get(cat);
            assert!(
                (mean - target).abs() <= 4.0 * se,
                "{arm} {cat:?}: mean {mean}, deterministic {target}, se {se}"
            );
        }
    }
}

#[test]
fn monte_carlo_means_match_every_worked_example() {
    for (se, sp) in [(1.0, 1.0), (0.70, 0.95), (0.95, 0.70)] {
        let s = Scenario::paper_baseline().with_test(se, sp).stochastic(1234);
        let deterministic = run_scenario(&s.deterministic()).unwrap().estimate.value;
        let mc = monte_carlo(&s, 10_000, 1234).unwrap();
        let se_mean = mc.sd.unwrap() / (mc.successes as f64).sqrt();
        assert!(
            (mc.mean - deterministic).abs() <= 4.0 * se_mean,
            "se={se} sp={sp}: mean {} vs {deterministic} (se {se_mean})",
            mc.mean
        );
        assert_eq!(mc, monte_carlo(&s, 10_000, 1234).unwrap());
    }
}

#[test]
fn parallel_and_serial_sweeps_are_byte_identical() {
    let mut base = Scenario::paper_baseline().stochastic(99);
    base.other_prevalence = Arms::new(0.04, 0.06);
    base.method = Method::OddsRatio;
    base.control = ControlGroup::PanNegative;
    let spec = SweepSpec {
        base,
        axes: vec![
            Axis::single(Param::Sensitivity, &[0.6, 0.8, 1.0]),
            Axis::single(Param::Care(Arm::Vaccinated, Category::Uninfected), &[0.3, 1.0]),
            Axis::zipped(vec![
                (Param::Size(Arm::Vaccinated), vec![200.0, 5_000.0]),
                (Param::Size(Arm::Unvaccinated), vec![200.0, 5_000.0]),
            ])
            .unwrap(),
        ],
        replications: 50,
    };
    let parallel = sweep_csv(&run_sweep(&spec).unwrap());
    let serial = sweep_csv(&run_sweep_serial(&spec).unwrap());
    assert_eq!(parallel, serial);
    assert_eq!(parallel, sweep_csv(&run_sweep(&spec).unwrap()));
    assert_eq!(parallel.lines().count(), 1 + 3 * 2 * 2);
}

#[test]
fn sign_boundary_hugs_the_uninformative_line() {
    let base = Scenario::paper_baseline();
    let grid: Vec<f64> = (0..20).map(|k| (k as f64 + 0.5) / 20.0).collect();
    let cells = find_sign_boundary(&base, &grid, &grid);
    assert!(!cells.is_empty());
    for c in &cells {
        assert!(
            c.se.0 + c.sp.0 <= 1.0 + 1e-12 && c.se.1 + c.sp.1 >= 1.0 - 1e-12,
            "{c:?}"
        );
    }
    // every cell the line crosses strictly is reported
    for i in 0..grid.len() - 1 {
        for j in 0..grid.len() - 1 {
            if grid[i] + grid[j] < 1.0 - 1e-9 && grid[i + 1] + grid[j + 1] > 1.0 + 1e-9 {
                assert!(cells.iter().any(|c| c.se_index == i && c.sp_index == j));
            }
        }
    }
    let informative: Vec<f64> = (0..10).map(|k| 0.55 + k as f64 * 0.045).collect();
    assert!(find_sign_boundary(&base, &informative, &informative).is_empty());
}
