//! Model parameters, connection kernel and phase classification.
//!
//! A graph is parametrised by a dimension `d`, Poisson intensity `lambda`, a
//! mark exponent `gamma` in `[0, 1)` and a profile. Vertices carry marks `u`
//! uniform on `(0, 1]`; a pair at distance `dist` with marks `u, v` is joined
//! independently with probability `rho(dist^d * (u*v)^gamma)`. The hard
//! profile is the indicator of `[0, r0]`; the soft profile is the power law
//! `rho(x) = min(1, x^-delta)`.

use crate::error::{Error, Result};
use crate::geometry::dist_pow_d;

/// Relative tolerance used when deciding whether `delta` sits on one of the
/// regime boundaries `1/gamma` or `1/gamma - 1`; `1/3` and friends do not
/// round-trip through `1.0 / gamma` exactly.
const BOUNDARY_REL_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile {
    /// Indicator profile: connect exactly when the kernel argument is <= r0.
    Hard { r0: f64 },
    /// Power-law profile rho(x) = min(1, x^-delta), delta > 1.
    SoftPowerLaw { delta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub dim: u32,
    pub lambda: f64,
    pub gamma: f64,
    pub profile: Profile,
}

/// Which of the theorem regimes the parameters fall in. The five
/// quantitative-phase variants partition `{delta > 2, gamma < 1/2}`, with the
/// hard profile counting as `delta = infinity`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TheoremRegime {
    /// 2 < delta < 1/gamma - 1: one edge dominates everywhere.
    HeavyProfile,
    /// delta = 1/gamma - 1.
    BoundaryLow,
    /// 1/gamma - 1 < delta < 1/gamma.
    Intermediate,
    /// delta = 1/gamma.
    BoundaryHigh,
    /// delta > 1/gamma, including the hard profile.
    LightProfile,
    /// delta <= 2 or gamma >= 1/2: crossing probabilities do not decay.
    NoQuantitativePhase,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeClass {
    pub zeta: f64,
    pub quantitative_phase: bool,
    pub theorem_regime: TheoremRegime,
}

impl ModelParams {
    pub fn new(dim: u32, lambda: f64, gamma: f64, profile: Profile) -> Result<Self> {
        let p = ModelParams { dim, lambda, gamma, profile };
        p.validate()?;
        Ok(p)
    }

    pub fn hard(dim: u32, lambda: f64, gamma: f64, r0: f64) -> Result<Self> {
        Self::new(dim, lambda, gamma, Profile::Hard { r0 })
    }

    pub fn soft(dim: u32, lambda: f64, gamma: f64, delta: f64) -> Result<Self> {
        Self::new(dim, lambda, gamma, Profile::SoftPowerLaw { delta })
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 1 {
            return Err(Error::invalid("dimension must be >= 1"));
        }
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(Error::invalid("lambda must be positive and finite"));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::invalid("gamma must lie in [0, 1)"));
        }
        match self.profile {
            Profile::Hard { r0 } => {
                if !(r0 > 0.0) || !r0.is_finite() {
                    return Err(Error::invalid("hard profile requires r0 > 0"));
                }
                if self.gamma == 0.0 {
                    // The homogeneous hard model is excluded; with gamma = 0
                    // only the soft profile is meaningful.
                    return Err(Error::invalid(
                        "gamma = 0 is only supported with the soft profile",
                    ));
                }
            }
            Profile::SoftPowerLaw { delta } => {
                if !(delta > 1.0) {
                    return Err(Error::invalid("soft profile requires delta > 1"));
                }
            }
        }
        Ok(())
    }

    /// Decay exponent, with the hard profile encoded as infinity.
    pub fn delta_effective(&self) -> f64 {
        match self.profile {
            Profile::Hard { .. } => f64::INFINITY,
            Profile::SoftPowerLaw { delta } => delta,
        }
    }

    pub fn is_hard(&self) -> bool {
        matches!(self.profile, Profile::Hard { .. })
    }

    /// `1/gamma`, with the convention `1/0 = infinity`.
    pub fn inv_gamma(&self) -> f64 {
        if self.gamma == 0.0 {
            f64::INFINITY
        } else {
            1.0 / self.gamma
        }
    }

    /// Profile function applied to a precomputed kernel argument
    /// `dist^d * (u*v)^gamma`.
    #[inline]
    pub(crate) fn profile_at(&self, argument: f64) -> f64 {
        match self.profile {
            Profile::Hard { r0 } => {
                if argument <= r0 {
                    1.0
                } else {
                    0.0
                }
            }
            Profile::SoftPowerLaw { delta } => {
                if argument <= 1.0 {
                    1.0
                } else if delta == delta.trunc() && delta <= 64.0 {
                    // powi is several times cheaper than powf in the pair loop.
                    argument.powi(-(delta as i32))
                } else {
                    argument.powf(-delta)
                }
            }
        }
    }

    /// Connection probability from the squared distance; hot-path variant
    /// without argument checking.
    #[inline]
    pub(crate) fn connection_probability_sq(&self, dist_sq: f64, u: f64, v: f64) -> f64 {
        let marks = if self.gamma == 0.0 {
            1.0
        } else {
            (u * v).powf(self.gamma)
        };
        self.profile_at(dist_pow_d(dist_sq, self.dim) * marks)
    }

    /// Probability that two vertices at the given distance with marks `u`, `v`
    /// are joined by an edge.
    pub fn connection_probability(&self, distance: f64, u: f64, v: f64) -> Result<f64> {
        if !(distance >= 0.0) {
            return Err(Error::invalid("distance must be >= 0"));
        }
        for m in [u, v] {
            if !(m > 0.0 && m <= 1.0) {
                return Err(Error::invalid("marks must lie in (0, 1]"));
            }
        }
        Ok(self.connection_probability_sq(distance * distance, u, v))
    }

    /// Polynomial decay exponent of the crossing probability
    /// `theta_r = r^{d*zeta*(1+o(1))}`. Zero exactly on the boundary set
    /// (`delta = 2, gamma <= 1/2` or `gamma = 1/2, delta >= 2`).
    pub fn zeta(&self) -> f64 {
        let delta = self.delta_effective();
        let inv_gamma = self.inv_gamma();
        if delta > 2.0 && self.gamma < 0.5 {
            (2.0 - delta).max(2.0 - inv_gamma)
        } else if delta < 2.0 || self.gamma > 0.5 {
            (2.0 - delta).max((2.0 * self.gamma - 1.0) / (2.0 * self.gamma - 1.0 / delta))
        } else {
            0.0
        }
    }

    pub fn classify_regime(&self) -> RegimeClass {
        let zeta = self.zeta();
        let quantitative_phase = zeta < 0.0;
        let theorem_regime = if !quantitative_phase {
            TheoremRegime::NoQuantitativePhase
        } else if self.is_hard() {
            TheoremRegime::LightProfile
        } else if self.gamma == 0.0 {
            // 1/gamma - 1 is infinite, so every finite delta is heavy.
            TheoremRegime::HeavyProfile
        } else {
            let delta = self.delta_effective();
            let inv_gamma = self.inv_gamma();
            if approx_eq(delta, inv_gamma) {
                TheoremRegime::BoundaryHigh
            } else if approx_eq(delta, inv_gamma - 1.0) {
                TheoremRegime::BoundaryLow
            } else if delta > inv_gamma {
                TheoremRegime::LightProfile
            } else if delta > inv_gamma - 1.0 {
                TheoremRegime::Intermediate
            } else {
                TheoremRegime::HeavyProfile
            }
        };
        RegimeClass { zeta, quantitative_phase, theorem_regime }
    }

    /// Error unless the parameters admit a quantitative subcritical phase.
    pub fn require_quantitative_phase(&self) -> Result<RegimeClass> {
        let class = self.classify_regime();
        if !class.quantitative_phase {
            return Err(Error::Regime(format!(
                "delta = {}, gamma = {} has no quantitative subcritical phase",
                self.delta_effective(),
                self.gamma
            )));
        }
        Ok(class)
    }
}

fn approx_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= BOUNDARY_REL_EPS * b.abs().max(1.0)
}
