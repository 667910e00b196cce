//! Simulation and estimation toolkit for test-negative vaccine-effectiveness
//! studies.
//!
//! The pipeline mirrors a test-negative study: a latent population of
//! vaccinated and unvaccinated people ([`population`]) seeks care with some
//! probability, care seekers are tested with an imperfect diagnostic test
//! ([`testing`]), and vaccine effectiveness is estimated from the recorded
//! counts ([`estimators`]). [`simulate`] runs whole scenarios, Monte Carlo
//! replicates and parameter sweeps; [`config`] and [`report`] back the
//! command-line tool.

pub mod cli;
pub mod config;
pub mod error;
pub mod estimators;
pub mod population;
pub mod report;
pub mod sampling;
pub mod simulate;
pub mod testing;

pub use error::{Arm, Error, Result, Stage};
pub use estimators::{Arms, ControlGroup, Method, ObservedCounts, VeEstimate};
pub use population::{CareSeeking, Category, Cells, LatentPopulation, StudyTable};
pub use sampling::Sampling;
pub use simulate::{Scenario, SweepSpec};
pub use testing::{ConfusionTable, DiagnosticTest};
