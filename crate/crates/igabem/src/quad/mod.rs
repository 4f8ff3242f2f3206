//! Numerical and analytical integration: Gauss-Legendre rules, regular and
//! singular surface integration of the U/T kernels, regular and singular
//! volume integration of the E kernel over general inclusions, and the
//! closed-form cylinder integrals for bars.

mod bar;
mod gauss;
mod surface;
mod volume;

pub use bar::{bar_regular_local, bar_singular_local, bar_subregion_block};
pub use gauss::GaussRule;
pub use surface::{for_each_surface_regular, for_each_surface_singular, Rect, SurfacePoint};
pub use volume::{for_each_volume_regular, for_each_volume_singular, VolumePoint};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum QuadError {
    #[error("Gauss order {0} outside supported range 1..=64")]
    OrderOutOfRange(usize),
    #[error("singular point ({0}, {1}) outside the integration rectangle")]
    SingularPointOutside(f64, f64),
    #[error("source must coincide with a cell corner for singular volume integration")]
    SourceNotAtCorner,
    #[error(transparent)]
    Nurbs(#[from] crate::nurbs::NurbsError),
    #[error(transparent)]
    Inclusion(#[from] crate::inclusion::InclusionError),
}

/// Quadrature configuration. The near-field rule raises the Gauss order
/// with the size-to-distance ratio and subdivides once the source is closer
/// than half the region diameter.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct QuadOptions {
    pub surface_order: usize,
    pub surface_singular_order: usize,
    pub volume_order: usize,
    pub volume_singular_order: usize,
    pub max_order: usize,
    /// Subdivide when distance / diameter falls below this.
    pub near_ratio: f64,
    /// Order increment is ceil(escalation * diameter / distance).
    pub escalation: f64,
    pub max_subdivision: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            surface_order: 6,
            surface_singular_order: 12,
            volume_order: 4,
            volume_singular_order: 8,
            max_order: 16,
            near_ratio: 0.5,
            escalation: 4.0,
            max_subdivision: 8,
        }
    }
}

impl QuadOptions {
    /// Escalated order for a region of size `diameter` seen from `distance`.
    pub fn escalated_order(&self, base: usize, diameter: f64, distance: f64) -> usize {
        if distance <= 0.0 {
            return self.max_order;
        }
        let extra = (self.escalation * diameter / distance).ceil();
        let extra = if extra.is_finite() {
            extra as usize
        } else {
            self.max_order
        };
        (base + extra).min(self.max_order)
    }

    pub fn needs_subdivision(&self, diameter: f64, distance: f64, depth: usize) -> bool {
        depth < self.max_subdivision && distance / diameter < self.near_ratio
    }
}
