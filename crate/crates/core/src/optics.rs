//! Gaussian detection-volume model and the two-detector split.

use nalgebra::{Unit, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::CrystalLayout;

/// FWHM of a Gaussian in units of its standard deviation.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_4;

/// Collection optics and the two binary detectors behind the beam splitter.
///
/// Serialized as flat `key = value` TOML.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionModel {
    /// Overall detection efficiency for an emitter at the focus.
    pub eta0: f64,
    /// Radial (off-axis) Gaussian width, µm.
    #[serde(rename = "sigma_r_um")]
    pub sigma_r: f64,
    /// Axial (defocus) Gaussian width, µm.
    #[serde(rename = "sigma_a_um")]
    pub sigma_a: f64,
    /// Fraction of collected light routed to detector 1.
    #[serde(rename = "split_T")]
    pub split_t: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    /// Per-bin dark-click probability of each detector.
    #[serde(default)]
    pub dark_prob: f64,
}

impl Default for DetectionModel {
    /// Narrow-field optics with a balanced splitter and identical detectors.
    fn default() -> Self {
        Self {
            eta0: 6.1e-4,
            sigma_r: 2.3,
            sigma_a: 98.0,
            split_t: 0.5,
            kappa1: 1.0,
            kappa2: 1.0,
            dark_prob: 0.0,
        }
    }
}

impl DetectionModel {
    /// Default optics with detector scale factors reproducing the measured
    /// focal efficiencies of 3.3e-4 (detector 1) and 2.8e-4 (detector 2).
    pub fn measured_apd() -> Self {
        let base = Self::default();
        Self {
            kappa1: 3.3e-4 / (base.eta0 * base.split_t),
            kappa2: 2.8e-4 / (base.eta0 * (1.0 - base.split_t)),
            ..base
        }
    }

    /// Reduced-magnification optics with a ~20 µm radial field of view,
    /// read as a FWHM.
    pub fn wide_field() -> Self {
        Self {
            sigma_r: 20.0 / FWHM_PER_SIGMA,
            ..Self::default()
        }
    }

    /// Parameters of the run-count projection (η = 4e-4) at a given radial width.
    pub fn projection(sigma_r: f64) -> Self {
        Self {
            eta0: 4e-4,
            sigma_r,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta0 > 0.0 && self.eta0 <= 1.0) {
            return Err(invalid("eta0", format!("must be in (0, 1], got {}", self.eta0)));
        }
        if !(self.sigma_r > 0.0 && self.sigma_r.is_finite()) {
            return Err(invalid("sigma_r_um", format!("must be positive, got {}", self.sigma_r)));
        }
        if !(self.sigma_a > 0.0 && self.sigma_a.is_finite()) {
            return Err(invalid("sigma_a_um", format!("must be positive, got {}", self.sigma_a)));
        }
        if !(self.split_t > 0.0 && self.split_t < 1.0) {
            return Err(invalid("split_T", format!("must be in (0, 1), got {}", self.split_t)));
        }
        if !(self.kappa1 >= 0.0 && self.kappa2 >= 0.0) {
            return Err(invalid("kappa", "detector scale factors must be non-negative"));
        }
        if !(0.0..1.0).contains(&self.dark_prob) {
            return Err(invalid(
                "dark_prob",
                format!("must be in [0, 1), got {}", self.dark_prob),
            ));
        }
        Ok(())
    }

    /// Per-detector click probabilities `(ηTκ₁, η(1−T)κ₂)` for one photon
    /// emitted with overall efficiency `eta`.
    pub fn split(&self, eta: f64) -> (f64, f64) {
        (
            eta * self.split_t * self.kappa1,
            eta * (1.0 - self.split_t) * self.kappa2,
        )
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let model: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        model.validate()?;
        Ok(model)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("flat struct serializes")
    }
}

/// Overall detection efficiency at radial distance `r` from the optical axis
/// and axial distance `a` from the focal plane.
pub fn efficiency_at(model: &DetectionModel, r: f64, a: f64) -> f64 {
    let exponent = r * r / (2.0 * model.sigma_r * model.sigma_r) + a * a / (2.0 * model.sigma_a * model.sigma_a);
    model.eta0 * (-exponent).exp()
}

/// Per-emitter overall efficiencies, each in `[0, eta0]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EfficiencyVector(pub Vec<f64>);

impl EfficiencyVector {
    pub fn uniform(eta: f64, n: usize) -> Self {
        Self(vec![eta; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.0.iter().copied()
    }

    pub fn max(&self) -> Option<f64> {
        self.0.iter().copied().reduce(f64::max)
    }

    /// Expected detected photons per excitation, `Σ ηᵢ`.
    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Scales every efficiency, e.g. by the excitation probability.
    pub fn scaled(&self, factor: f64) -> Self {
        Self(self.0.iter().map(|e| e * factor).collect())
    }
}

impl FromIterator<f64> for EfficiencyVector {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

/// Efficiencies of every emitter in `layout`; the focus is at the origin.
pub fn per_ion_efficiencies(
    model: &DetectionModel,
    layout: &CrystalLayout,
    axis: &Unit<Vector3<f64>>,
) -> EfficiencyVector {
    layout
        .positions
        .iter()
        .map(|p| {
            let axial = p.dot(axis);
            let radial = (p - axis.into_inner() * axial).norm();
            efficiency_at(model, radial, axial)
        })
        .collect()
}

/// Number of emitters with `η ≥ eta_th · max(η)`.
pub fn contributing_count(etas: &EfficiencyVector, eta_th: f64) -> Result<usize> {
    if !(0.0..=1.0).contains(&eta_th) {
        return Err(invalid("eta_th", format!("must be in [0, 1], got {eta_th}")));
    }
    let max = etas.max().ok_or(Error::NoEmitters)?;
    let cut = eta_th * max;
    Ok(etas.iter().filter(|&e| e >= cut).count())
}
