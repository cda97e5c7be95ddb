use std::fmt;
use std::str::FromStr;

use crate::error::Error;

/// Squashing nonlinearities with range (-1, 1), so their value can serve as
/// a signed firing probability.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Activation {
    Tanh,
    HardTanh,
    SoftSign,
}

impl Activation {
    #[inline]
    pub fn apply(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => y.tanh(),
            Activation::HardTanh => y.clamp(-1.0, 1.0),
            Activation::SoftSign => y / (1.0 + y.abs()),
        }
    }

    #[inline]
    pub fn derivative(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let t = y.tanh();
                1.0 - t * t
            }
            Activation::HardTanh => {
                if y.abs() < 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::SoftSign => {
                let d = 1.0 + y.abs();
                1.0 / (d * d)
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::HardTanh => "hard-tanh",
            Activation::SoftSign => "soft-sign",
        }
    }

    pub const ALL: [Activation; 3] = [Activation::Tanh, Activation::HardTanh, Activation::SoftSign];
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "hard-tanh" | "hardtanh" => Ok(Activation::HardTanh),
            "soft-sign" | "softsign" => Ok(Activation::SoftSign),
            other => Err(Error::InvalidArgument(format!("unknown activation {other:?}"))),
        }
    }
}
