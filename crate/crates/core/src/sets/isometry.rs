use serde::{Deserialize, Serialize};

use crate::error::{arg, Result};
use crate::geometry::{self, mat_vec, Matrix, Point};

/// `x ↦ R x + t`, optionally reduced mod 1 per coordinate (torus action).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Isometry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation: Option<Matrix>,
    pub translation: Point,
    #[serde(default)]
    pub wrap: bool,
}

impl Isometry {
    pub fn new(rotation: Option<Matrix>, translation: Point, wrap: bool) -> Result<Self> {
        let iso = Isometry {
            rotation,
            translation,
            wrap,
        };
        iso.validate()?;
        Ok(iso)
    }

    pub fn translation(t: Point) -> Self {
        Isometry {
            rotation: None,
            translation: t,
            wrap: false,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::translation(vec![0.0; n])
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(r) = &self.rotation {
            if !geometry::is_square(r, self.translation.len()) {
                return arg("rotation must be n×n with n the translation length");
            }
            if geometry::orthogonality_defect(r) > 1e-12 {
                return arg("rotation is not orthogonal to 1e-12");
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.translation.len()
    }

    pub fn has_rotation(&self) -> bool {
        self.rotation.as_ref().is_some_and(|r| !geometry::is_identity(r))
    }

    pub fn rotate(&self, v: &[f64]) -> Point {
        match &self.rotation {
            Some(r) => mat_vec(r, v),
            None => v.to_vec(),
        }
    }

    /// Applies the map without torus reduction.
    pub fn apply_unwrapped(&self, x: &[f64]) -> Point {
        self.rotate(x)
            .iter()
            .zip(&self.translation)
            .map(|(a, t)| a + t)
            .collect()
    }

    pub fn apply(&self, x: &[f64]) -> Point {
        let y = self.apply_unwrapped(x);
        if self.wrap {
            y.into_iter().map(|v| v.rem_euclid(1.0)).collect()
        } else {
            y
        }
    }
}
