//! Experiment drivers: configs, ratio sweeps, acceptance checks and their outputs.

mod config;
mod output;
mod suites;
pub mod verify;

pub use config::{
    apply_override, CorpusConfig, ExperimentConfig, HeatConfig, PerturbationConfig, Profile, SimulateConfig,
};
pub use output::{cell, write_csv, write_json, CsvTable, Manifest};
pub use suites::{
    corpus, guard_mapping, guard_perturbation, guard_source, guard_target, loglog_slope, mapping_ratio,
    mollification_rates, norm_equivalence, operator_spec, perturbation_suite, potential_high_order, potential_regularity, rel_change,
    schauder_ratio, HIGH_ORDER_VARPHI, EquivalenceReport, EquivalenceTrace, Moduli, MollificationFit, MollificationReport,
    PerturbationReport, PerturbationRow, RatioReport, RatioSample, ResolutionTrace,
};
