//! Support sets for target distributions.
//!
//! Simplex data are handled in the chart of the first `parts - 1`
//! barycentric coordinates; the last part is implied as `1 - sum(x)`.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    FullSpace { dim: usize },
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Ball { dim: usize, radius: f64 },
    SimplexChart { parts: usize },
}

impl Domain {
    pub fn full_space(dim: usize) -> Result<Self> {
        let d = Domain::FullSpace { dim };
        d.validate()?;
        Ok(d)
    }

    pub fn unit_ball(dim: usize) -> Result<Self> {
        Self::ball(dim, 1.0)
    }

    pub fn ball(dim: usize, radius: f64) -> Result<Self> {
        let d = Domain::Ball { dim, radius };
        d.validate()?;
        Ok(d)
    }

    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let d = Domain::Box { lower, upper };
        d.validate()?;
        Ok(d)
    }

    pub fn simplex(parts: usize) -> Result<Self> {
        let d = Domain::SimplexChart { parts };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Domain::FullSpace { dim } if *dim == 0 => {
                Err(Error::InvalidParameter("dimension must be positive".into()))
            }
            Domain::Box { lower, upper } => {
                if lower.is_empty() || lower.len() != upper.len() {
                    return Err(Error::InvalidParameter(
                        "box bounds must be non-empty and of equal length".into(),
                    ));
                }
                if lower.iter().zip(upper).any(|(l, u)| !(l < u)) {
                    return Err(Error::InvalidParameter(
                        "box requires lower[i] < upper[i]".into(),
                    ));
                }
                Ok(())
            }
            Domain::Ball { dim, radius } => {
                if *dim == 0 {
                    Err(Error::InvalidParameter("dimension must be positive".into()))
                } else if !(*radius > 0.0) || !radius.is_finite() {
                    Err(Error::InvalidParameter("ball radius must be positive".into()))
                } else {
                    Ok(())
                }
            }
            Domain::SimplexChart { parts } if *parts < 2 => Err(Error::InvalidParameter(
                "simplex needs at least two parts".into(),
            )),
            _ => Ok(()),
        }
    }

    /// Dimension of the coordinates points are expressed in.
    pub fn dim(&self) -> usize {
        match self {
            Domain::FullSpace { dim } | Domain::Ball { dim, .. } => *dim,
            Domain::Box { lower, .. } => lower.len(),
            Domain::SimplexChart { parts } => parts - 1,
        }
    }

    pub fn is_compact(&self) -> bool {
        !matches!(self, Domain::FullSpace { .. })
    }

    /// Strict interior membership. Non-finite coordinates are never inside.
    pub fn contains(&self, x: &[f64]) -> bool {
        if x.len() != self.dim() || x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match self {
            Domain::FullSpace { .. } => true,
            Domain::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(v, (l, u))| l < v && v < u),
            Domain::Ball { radius, .. } => norm_sq(x) < radius * radius,
            Domain::SimplexChart { .. } => {
                x.iter().all(|&v| v > 0.0) && x.iter().sum::<f64>() < 1.0
            }
        }
    }

    pub fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::OutsideDomain {
                point: x.to_vec(),
                domain: self.to_string(),
            })
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Domain::FullSpace { dim } => write!(f, "R^{dim}"),
            Domain::Box { lower, upper } => write!(f, "box {lower:?} x {upper:?}"),
            Domain::Ball { dim, radius } => write!(f, "ball of radius {radius} in R^{dim}"),
            Domain::SimplexChart { parts } => write!(f, "open simplex with {parts} parts"),
        }
    }
}

/// Barycentric coordinates of a chart point: the chart coordinates followed
/// by the implied last part.
pub fn barycentric(x: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len() + 1);
    out.extend_from_slice(x);
    out.push(1.0 - x.iter().sum::<f64>());
    out
}

pub(crate) fn norm_sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_membership_is_strict() {
        let b = Domain::unit_ball(2).unwrap();
        assert!(b.contains(&[0.5, 0.5]));
        assert!(!b.contains(&[1.0, 0.0]));
        assert!(!b.contains(&[0.5]));
    }

    #[test]
    fn simplex_chart_rejects_faces() {
        let s = Domain::simplex(3).unwrap();
        assert_eq!(s.dim(), 2);
        assert!(s.contains(&[0.2, 0.3]));
        assert!(!s.contains(&[0.0, 0.3]));
        assert!(!s.contains(&[0.5, 0.5]));
        assert_eq!(barycentric(&[0.2, 0.3])[2], 0.5);
    }

    #[test]
    fn invalid_descriptors() {
        assert!(Domain::boxed(vec![0.0], vec![0.0]).is_err());
        assert!(Domain::ball(2, 0.0).is_err());
        assert!(Domain::simplex(1).is_err());
        assert!(Domain::full_space(0).is_err());
    }

    #[test]
    fn json_shape() {
        let d: Domain = serde_json::from_str(r#"{"kind":"ball","dim":3,"radius":1.0}"#).unwrap();
        assert_eq!(d, Domain::unit_ball(3).unwrap());
    }
}
