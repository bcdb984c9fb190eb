//! The four damping families of the reference experiments, each with three
//! variants run against one shared hidden path.

use clap::ValueEnum;
use condgauss::analysis::TailClass;
use condgauss::model::DampingSpec;
use serde::{Deserialize, Serialize};

pub const GAMMA: f64 = 2.0;
pub const SIGMA_X: f64 = 1.0;
pub const DT: f64 = 1e-2;
/// Trajectory excerpt written per variant.
pub const WINDOW: (f64, f64) = (9000.0, 10000.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Scale {
    /// `T = 1e5`.
    Desk,
    /// `T = 1e6`.
    Full,
}

impl Scale {
    pub fn horizon(self) -> f64 {
        match self {
            Scale::Desk => 1e5,
            Scale::Full => 1e6,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Variant {
    /// Directory name inside the figure output.
    pub name: String,
    pub damping: DampingSpec,
}

pub fn figure(id: u8) -> Option<Vec<Variant>> {
    let specs = match id {
        1 => [
            DampingSpec::affine(1.0, 3.0, 0.0),
            DampingSpec::affine(1.0, 2.0, 0.0),
            DampingSpec::affine(1.0, 1.0, 0.0),
        ],
        2 => [
            DampingSpec::hinge(1.0, 1.0, 2.0),
            DampingSpec::hinge(1.0, 1.0, 1.0),
            DampingSpec::hinge(1.0, 0.5, 1.0),
        ],
        3 => [
            DampingSpec::power(4.0, 0.0),
            DampingSpec::power(2.0, 0.0),
            DampingSpec::power(1.0, 0.0),
        ],
        4 => [
            DampingSpec::power(4.0, 1.0),
            DampingSpec::power(2.0, 1.0),
            DampingSpec::constant(1.0),
        ],
        _ => return None,
    };
    Some(
        specs
            .into_iter()
            .enumerate()
            .map(|(i, damping)| Variant {
                name: format!("variant{}", i + 1),
                damping,
            })
            .collect(),
    )
}

/// Whether an empirical tail class is consistent with the predicted one.
/// Intermediate tails sit between exponential and Gaussian and cannot be
/// told apart from either at finite sample sizes.
pub fn agrees(predicted: TailClass, empirical: TailClass) -> bool {
    match predicted {
        TailClass::Intermediate => matches!(
            empirical,
            TailClass::Exponential | TailClass::Intermediate | TailClass::Gaussian
        ),
        p => p == empirical,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_figures_of_three() {
        for id in 1..=4 {
            assert_eq!(figure(id).unwrap().len(), 3);
        }
        assert!(figure(0).is_none() && figure(5).is_none());
        assert_eq!(figure(1).unwrap()[0].damping.label(), "1+3u");
    }

    #[test]
    fn agreement_rule() {
        assert!(agrees(TailClass::Intermediate, TailClass::Gaussian));
        assert!(!agrees(TailClass::Intermediate, TailClass::Polynomial));
        assert!(!agrees(TailClass::Exponential, TailClass::Gaussian));
    }
}
