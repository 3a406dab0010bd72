//! Objectives, stochastic-gradient families, observables and convexity
//! certificates.

mod certificate;
pub mod examples;
mod family;
mod objective;

pub use certificate::{
    ball_sample_points, certify, certify_default, coupling_rate, eta0_formula, local_constants, r0_formula,
    ConvexityCertificate, LocalConstants,
};
pub use examples::{
    family_by_id, make_example1, make_example2, make_minibatch_quadratic, make_ou_family, make_ou_reference,
    observable_by_id, OuReference, FAMILY_IDS, OBSERVABLE_IDS,
};
pub use family::{CharacteristicMap, NoiseKind, NoiseSampler, NoiseToken, NoisyArrayField, StochasticGradientFamily};
pub use objective::{ArrayField, ObjectiveBundle, ScalarField, TestFunction};
