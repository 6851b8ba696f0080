use std::f64::consts::PI;

use thiserror::Error;

use super::{OptimizerError, ParamSpace};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ObjectiveError {
    /// The point could not be scored; it is recorded with the penalty score.
    #[error("{0}")]
    Soft(String),
    /// The objective itself is broken; the run stops.
    #[error("{0}")]
    Hard(String),
}

/// Score to maximize. Implementations must be deterministic in `theta`.
pub trait Objective: Send + Sync {
    fn evaluate(&self, theta: &[f64]) -> Result<f64, ObjectiveError>;
}

impl<O: Objective + ?Sized> Objective for &O {
    fn evaluate(&self, theta: &[f64]) -> Result<f64, ObjectiveError> {
        (**self).evaluate(theta)
    }
}

/// `-||theta||^2`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sphere;

impl Objective for Sphere {
    fn evaluate(&self, theta: &[f64]) -> Result<f64, ObjectiveError> {
        Ok(-theta.iter().map(|x| x * x).sum::<f64>())
    }
}

/// Negated Rastrigin function; maximum 0 at the origin.
#[derive(Debug, Clone, Copy, Default)]
pub struct Rastrigin;

impl Objective for Rastrigin {
    fn evaluate(&self, theta: &[f64]) -> Result<f64, ObjectiveError> {
        let d = theta.len() as f64;
        Ok(-(10.0 * d + theta.iter().map(|x| x * x - 10.0 * (2.0 * PI * x).cos()).sum::<f64>()))
    }
}

/// Named built-in benchmark with its conventional search box.
pub fn builtin_objective(name: &str, dim: usize) -> Result<(Box<dyn Objective>, ParamSpace), OptimizerError> {
    match name {
        "sphere" => Ok((Box::new(Sphere), ParamSpace::cube(dim, -1.0, 1.0)?)),
        "rastrigin" => Ok((Box::new(Rastrigin), ParamSpace::cube(dim, -5.12, 5.12)?)),
        other => Err(OptimizerError::InvalidArgument(format!("unknown objective {other:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn optima() {
        assert_eq!(Sphere.evaluate(&[0.0; 3]).unwrap(), 0.0);
        assert_eq!(Sphere.evaluate(&[1.0, 2.0]).unwrap(), -5.0);
        assert!(Rastrigin.evaluate(&[0.0; 3]).unwrap().abs() < 1e-12);
        assert!(Rastrigin.evaluate(&[0.5, 0.0]).unwrap() < -1.0);
        assert!(builtin_objective("nope", 3).is_err());
    }
}
