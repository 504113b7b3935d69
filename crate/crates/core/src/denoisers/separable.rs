use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::VectorMap;
use crate::error::{Error, Result};

/// Scalar non-linearities applied coordinatewise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalarFn {
    Identity,
    Scale { c: f64 },
    SoftThreshold { lambda: f64 },
    /// `alpha·x + (1 − alpha)·soft(x, λ)`.
    Mix { alpha: f64, lambda: f64 },
}

#[inline]
fn soft(x: f64, lambda: f64) -> f64 {
    if x > lambda {
        x - lambda
    } else if x < -lambda {
        x + lambda
    } else {
        0.0
    }
}

impl ScalarFn {
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            ScalarFn::Identity => x,
            ScalarFn::Scale { c } => c * x,
            ScalarFn::SoftThreshold { lambda } => soft(x, lambda),
            ScalarFn::Mix { alpha, lambda } => alpha * x + (1.0 - alpha) * soft(x, lambda),
        }
    }

    /// Weak derivative; the kink at `|x| = λ` takes the value 0.
    #[inline]
    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            ScalarFn::Identity => 1.0,
            ScalarFn::Scale { c } => c,
            ScalarFn::SoftThreshold { lambda } => {
                if x.abs() > lambda {
                    1.0
                } else {
                    0.0
                }
            }
            ScalarFn::Mix { alpha, lambda } => alpha + if x.abs() > lambda { 1.0 - alpha } else { 0.0 },
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match *self {
            ScalarFn::Identity | ScalarFn::SoftThreshold { .. } => 1.0,
            ScalarFn::Scale { c } => c.abs(),
            // slopes are alpha inside the dead zone and 1 outside
            ScalarFn::Mix { alpha, .. } => alpha.abs().max(1.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ScalarFn::SoftThreshold { lambda } | ScalarFn::Mix { lambda, .. } if !(lambda >= 0.0) => {
                Err(Error::InvalidParameter(format!("threshold must be nonnegative, got {lambda}")))
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> String {
        match *self {
            ScalarFn::Identity => "identity".into(),
            ScalarFn::Scale { c } => format!("scale({c})"),
            ScalarFn::SoftThreshold { lambda } => format!("soft({lambda})"),
            ScalarFn::Mix { alpha, lambda } => format!("mix({alpha},{lambda})"),
        }
    }
}

/// A [`ScalarFn`] applied to every coordinate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Separable(pub ScalarFn);

impl VectorMap for Separable {
    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        x.map(|v| self.0.eval(v))
    }

    fn divergence(&self, x: &DVector<f64>) -> Option<f64> {
        Some(x.iter().map(|&v| self.0.derivative(v)).sum())
    }

    fn lipschitz(&self) -> f64 {
        self.0.lipschitz()
    }

    fn name(&self) -> String {
        self.0.name()
    }
}

/// `sign(x)·(|x| − λ)₊` without parameter checks.
pub fn soft_threshold(x: &DVector<f64>, lambda: f64) -> DVector<f64> {
    x.map(|v| soft(v, lambda))
}

pub fn soft_threshold_apply(x: &DVector<f64>, lambda: f64) -> Result<DVector<f64>> {
    ScalarFn::SoftThreshold { lambda }.validate()?;
    Ok(soft_threshold(x, lambda))
}

/// Number of coordinates with `|x_i| > λ`.
pub fn soft_threshold_divergence(x: &DVector<f64>, lambda: f64) -> f64 {
    x.iter().filter(|v| v.abs() > lambda).count() as f64
}
