//! Shared fixtures for the predictor benchmarks.

use pgpr::harness::generate_synthetic;
use pgpr::{select_support, Dataset, Hyperparameters, SupportSet};

pub struct Fixture {
    pub train: Dataset,
    pub test: Dataset,
    pub hyper: Hyperparameters,
    pub support: SupportSet,
}

/// Prior draw in two dimensions with a support set of `support` points.
pub fn fixture(n_train: usize, n_test: usize, support: usize) -> Fixture {
    let hyper = Hyperparameters::isotropic(1.0, 0.01, 0.2, 2).expect("valid hyperparameters");
    let (train, test) = generate_synthetic(n_train, n_test, 2, &hyper, 1).expect("feasible size");
    let support = select_support(train.inputs(), support, &hyper).expect("support set");
    Fixture {
        test: test.without_outputs(),
        train,
        hyper,
        support,
    }
}
