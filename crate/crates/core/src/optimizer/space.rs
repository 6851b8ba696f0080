use serde::{Deserialize, Serialize};

use super::OptimizerError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    Continuous,
    Integer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dimension {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    #[serde(default = "linear")]
    pub scale: Scale,
    #[serde(default = "continuous")]
    pub kind: ParamKind,
}

fn linear() -> Scale {
    Scale::Linear
}

fn continuous() -> ParamKind {
    ParamKind::Continuous
}

impl Dimension {
    pub fn linear(name: &str, lower: f64, upper: f64) -> Self {
        Self { name: name.into(), lower, upper, scale: Scale::Linear, kind: ParamKind::Continuous }
    }

    pub fn log(name: &str, lower: f64, upper: f64) -> Self {
        Self { scale: Scale::Log, ..Self::linear(name, lower, upper) }
    }

    pub fn integer(name: &str, lower: f64, upper: f64) -> Self {
        Self { kind: ParamKind::Integer, ..Self::linear(name, lower, upper) }
    }

    fn warp(&self, v: f64) -> f64 {
        match self.scale {
            Scale::Linear => v,
            Scale::Log => v.ln(),
        }
    }

    fn unwarp(&self, v: f64) -> f64 {
        match self.scale {
            Scale::Linear => v,
            Scale::Log => v.exp(),
        }
    }

    /// Clamps to bounds and rounds integer dimensions.
    pub fn clamp(&self, v: f64) -> f64 {
        let v = if v.is_nan() { self.lower } else { v.clamp(self.lower, self.upper) };
        match self.kind {
            ParamKind::Continuous => v,
            ParamKind::Integer => v.round().clamp(self.lower.ceil(), self.upper.floor()),
        }
    }

    pub fn to_unit(&self, v: f64) -> f64 {
        let (lo, hi) = (self.warp(self.lower), self.warp(self.upper));
        ((self.warp(v) - lo) / (hi - lo)).clamp(0.0, 1.0)
    }

    pub fn from_unit(&self, u: f64) -> f64 {
        let (lo, hi) = (self.warp(self.lower), self.warp(self.upper));
        self.clamp(self.unwarp(lo + u.clamp(0.0, 1.0) * (hi - lo)))
    }
}

/// Box-bounded search space. Search operators work in unit-cube
/// coordinates (log-warped where declared) and map back through
/// [`ParamSpace::from_unit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpace {
    pub dimensions: Vec<Dimension>,
}

impl ParamSpace {
    pub fn new(dimensions: Vec<Dimension>) -> Result<Self, OptimizerError> {
        if dimensions.is_empty() {
            return Err(OptimizerError::InvalidSpace("no dimensions".into()));
        }
        for (i, d) in dimensions.iter().enumerate() {
            if !(d.lower.is_finite() && d.upper.is_finite() && d.lower < d.upper) {
                return Err(OptimizerError::InvalidSpace(format!("{}: lower must be below upper", d.name)));
            }
            if d.scale == Scale::Log && d.lower <= 0.0 {
                return Err(OptimizerError::InvalidSpace(format!("{}: log scale needs a positive lower bound", d.name)));
            }
            if d.kind == ParamKind::Integer && d.lower.ceil() > d.upper.floor() {
                return Err(OptimizerError::InvalidSpace(format!("{}: no integer inside bounds", d.name)));
            }
            if dimensions[..i].iter().any(|o| o.name == d.name) {
                return Err(OptimizerError::InvalidSpace(format!("duplicate dimension {}", d.name)));
            }
        }
        Ok(Self { dimensions })
    }

    /// `[lo, hi]^dim` linear continuous space with names `x0, x1, ...`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self, OptimizerError> {
        Self::new((0..dim).map(|i| Dimension::linear(&format!("x{i}"), lo, hi)).collect())
    }

    pub fn len(&self) -> usize {
        self.dimensions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dimensions.is_empty()
    }

    pub fn names(&self) -> Vec<&str> {
        self.dimensions.iter().map(|d| d.name.as_str()).collect()
    }

    pub fn clamp(&self, theta: &[f64]) -> Vec<f64> {
        self.dimensions.iter().zip(theta).map(|(d, &v)| d.clamp(v)).collect()
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.len() && self.dimensions.iter().zip(theta).all(|(d, &v)| v >= d.lower && v <= d.upper)
    }

    pub fn to_unit(&self, theta: &[f64]) -> Vec<f64> {
        self.dimensions.iter().zip(theta).map(|(d, &v)| d.to_unit(v)).collect()
    }

    pub fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        self.dimensions.iter().zip(u).map(|(d, &v)| d.from_unit(v)).collect()
    }
}
