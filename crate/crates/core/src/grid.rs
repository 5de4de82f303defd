//! Evaluation grids.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    Log,
    Linear,
}

/// `points` values from `min` to `max` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub points: usize,
    pub spacing: Spacing,
}

impl GridSpec {
    pub fn log(min: f64, max: f64, points: usize) -> Self {
        Self { min, max, points, spacing: Spacing::Log }
    }

    pub fn linear(min: f64, max: f64, points: usize) -> Self {
        Self { min, max, points, spacing: Spacing::Linear }
    }

    pub fn validate(&self) -> Result<()> {
        let ok_bounds = self.min.is_finite() && self.max.is_finite() && self.min <= self.max;
        if !ok_bounds || self.points == 0 || (self.points > 1 && self.min == self.max) {
            return Err(Error::domain("grid", format!("{self:?}")));
        }
        if self.spacing == Spacing::Log && self.min <= 0.0 {
            return Err(Error::domain("grid", "log spacing needs min > 0"));
        }
        Ok(())
    }

    pub fn values(&self) -> Result<Vec<f64>> {
        self.validate()?;
        if self.points == 1 {
            return Ok(vec![self.min]);
        }
        let last = (self.points - 1) as f64;
        let v = (0..self.points)
            .map(|i| {
                let t = i as f64 / last;
                if i + 1 == self.points {
                    self.max
                } else {
                    match self.spacing {
                        Spacing::Linear => self.min + t * (self.max - self.min),
                        // base 10 keeps decade points exact
                        Spacing::Log => 10f64.powf(self.min.log10() + t * (self.max / self.min).log10()),
                    }
                }
            })
            .collect();
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_log_grid_hits_decades() {
        let g = GridSpec::log(1.0, 1e6, 61).values().unwrap();
        assert_eq!(g.len(), 61);
        assert_eq!(g[0], 1.0);
        assert_eq!(g[60], 1e6);
        assert!((g[10] - 10.0).abs() < 1e-12);
        assert!((g[30] - 1e3).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(GridSpec::log(0.0, 1.0, 3).values().is_err());
        assert!(GridSpec::linear(2.0, 1.0, 3).values().is_err());
        assert!(GridSpec::linear(1.0, 1.0, 3).values().is_err());
        assert!(GridSpec::linear(0.0, 1.0, 0).values().is_err());
        assert_eq!(GridSpec::linear(0.0, 1.0, 3).values().unwrap(), vec![0.0, 0.5, 1.0]);
    }
}
