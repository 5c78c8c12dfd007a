//! Exact linear-quadratic open-loop games: block-Riccati decoupling field,
//! Gaussian state flows, Bures–Wasserstein gaps and the reduction,
//! perturbation and derivative-decay experiments.

pub mod experiment;
pub mod flow;
pub mod mc;
pub mod riccati;
pub mod spec;
pub mod w2;

pub use experiment::{
    dv_decay_report, full_solution, perturbation_experiment, reduction_experiment, CurveRow, DvDecayReport,
    DvRow, PerturbationReport, W2Curve, DEFAULT_STEPS,
};
pub use flow::{gaussian_flow, GaussianFlow};
pub use mc::{mc_coupling_oracle, McEstimate};
pub use riccati::{riccati_solve, BoundaryData, BoundaryPath, BoundaryPolicy, RiccatiSolution};
pub use spec::{GaussianLaw, LqGameSpec};
pub use w2::{w2_squared, w2_squared_laws};
