//! Closed-form asymptotic predictions for crossing and escape probabilities.
//!
//! Every prediction is an exponent structure standing for an order statement
//! "≍ u^a r^b R^c (log r)^e (log R)^f" that holds up to constants depending on
//! the intensity and the profile constants; no numeric probabilities are
//! emitted. Logs are natural. The hard profile is routed through every
//! `delta > 1/gamma` branch, and `gamma = 0` uses the convention
//! `1/gamma = infinity`.

use crate::error::{Error, Result};
use crate::model::{ModelParams, TheoremRegime};

/// One multiplicative order in `(u, r, R)`.
///
/// `capped_at_one` records a trailing "∧ 1" in the source formula. The
/// `mixed_log` flag marks the point-to-ball factor `1 + log_+(u R^{d
/// delta})`, which mixes `u` and `R` and so cannot be folded into the plain
/// log powers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticPrediction {
    pub inner_exp: f64,
    pub outer_exp: f64,
    pub mark_exp: f64,
    pub log_outer_pow: f64,
    pub log_inner_pow: f64,
    pub capped_at_one: bool,
    pub mixed_log: bool,
}

impl AsymptoticPrediction {
    fn order() -> Self {
        AsymptoticPrediction {
            inner_exp: 0.0,
            outer_exp: 0.0,
            mark_exp: 0.0,
            log_outer_pow: 0.0,
            log_inner_pow: 0.0,
            capped_at_one: false,
            mixed_log: false,
        }
    }

    /// The constant-order prediction "≍ 1".
    pub fn constant_one() -> Self {
        Self::order()
    }

    pub fn is_constant_one(&self) -> bool {
        *self == Self::order()
    }

    /// Natural log of the predicted order at a concrete point, ignoring the
    /// unknown constant. Used by boundary-agreement and domination checks.
    pub fn evaluate_log(&self, u: f64, r: f64, big_r: f64, d_delta: f64) -> f64 {
        // Zero powers contribute nothing even where the log factor blows up
        // (log log 1 is -inf), so guard each term on its coefficient.
        let term = |pow: f64, log_base: f64| if pow == 0.0 { 0.0 } else { pow * log_base };
        let mut log_p = term(self.mark_exp, u.ln())
            + term(self.inner_exp, r.ln())
            + term(self.outer_exp, big_r.ln())
            + term(self.log_outer_pow, big_r.ln().ln())
            + term(self.log_inner_pow, r.ln().ln());
        if self.mixed_log {
            log_p += (1.0 + (u.ln() + d_delta * big_r.ln()).max(0.0)).ln();
        }
        if self.capped_at_one {
            log_p = log_p.min(0.0);
        }
        log_p
    }
}

/// Threshold `R^{outer_exp} (log R)^{log_outer_pow}` delimiting a piece.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Threshold {
    pub outer_exp: f64,
    pub log_outer_pow: f64,
}

impl Threshold {
    fn new(outer_exp: f64, log_outer_pow: f64) -> Self {
        Threshold { outer_exp, log_outer_pow }
    }

    pub fn log_value(&self, big_r: f64) -> f64 {
        self.outer_exp * big_r.ln() + self.log_outer_pow * big_r.ln().ln()
    }

    pub fn value(&self, big_r: f64) -> f64 {
        self.log_value(big_r).exp()
    }
}

/// Which variable a piecewise table is indexed by.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PieceVar {
    /// The planted root mark `u` in `(0, 1]`.
    Mark,
    /// The inner radius `r` in `(0, R/2]`.
    InnerRadius,
}

/// A prediction valid on `[lower, upper)` of the piece variable; `None`
/// bounds extend to the edge of the domain. Pieces are stored in ascending
/// order and are contiguous, so they partition the domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    pub lower: Option<Threshold>,
    pub upper: Option<Threshold>,
    pub prediction: AsymptoticPrediction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PiecewisePrediction {
    pub var: PieceVar,
    pub pieces: Vec<Piece>,
}

impl PiecewisePrediction {
    fn from_breaks(var: PieceVar, preds: Vec<AsymptoticPrediction>, breaks: Vec<Threshold>) -> Self {
        assert_eq!(preds.len(), breaks.len() + 1);
        let mut pieces = Vec::with_capacity(preds.len());
        for (i, prediction) in preds.into_iter().enumerate() {
            let lower = if i == 0 { None } else { Some(breaks[i - 1]) };
            let upper = breaks.get(i).copied();
            pieces.push(Piece { lower, upper, prediction });
        }
        PiecewisePrediction { var, pieces }
    }

    /// The unique piece containing `value` of the piece variable at outer
    /// radius `big_r`; intervals are closed below and open above, with the
    /// top piece closed.
    pub fn piece_for(&self, value: f64, big_r: f64) -> Result<&Piece> {
        if !(big_r > 1.0) {
            return Err(Error::invalid("piecewise predictions require R > 1"));
        }
        let log_v = value.ln();
        for (i, piece) in self.pieces.iter().enumerate() {
            let below_upper = match piece.upper {
                Some(t) => log_v < t.log_value(big_r),
                None => true,
            };
            let at_or_above_lower = match piece.lower {
                Some(t) => log_v >= t.log_value(big_r),
                None => true,
            };
            if at_or_above_lower && (below_upper || i == self.pieces.len() - 1) {
                return Ok(piece);
            }
        }
        // Contiguity makes this unreachable for positive values; guard anyway.
        Err(Error::invalid("value below the lowest piece"))
    }
}

fn d(p: &ModelParams) -> f64 {
    p.dim as f64
}

/// Order of `g(R)`, the one-edge escape probability from a root with mark 1.
pub fn g_prediction(params: &ModelParams) -> Result<AsymptoticPrediction> {
    let class = params.require_quantitative_phase()?;
    let d = d(params);
    let delta = params.delta_effective();
    let mut pred = AsymptoticPrediction::order();
    match class.theorem_regime {
        TheoremRegime::LightProfile => pred.outer_exp = d * (1.0 - params.inv_gamma()),
        TheoremRegime::BoundaryHigh => {
            pred.outer_exp = d * (1.0 - delta);
            pred.log_outer_pow = 1.0;
        }
        _ => pred.outer_exp = d * (1.0 - delta),
    }
    Ok(pred)
}

/// Order of `h(R)`, the two-edge escape probability from a root with mark 1.
pub fn h_prediction(params: &ModelParams) -> Result<AsymptoticPrediction> {
    let class = params.require_quantitative_phase()?;
    let d = d(params);
    let delta = params.delta_effective();
    let gamma = params.gamma;
    let inv_gamma = params.inv_gamma();
    let mut pred = AsymptoticPrediction::order();
    match class.theorem_regime {
        TheoremRegime::LightProfile => pred.outer_exp = d * (1.0 - gamma) * (1.0 - inv_gamma),
        TheoremRegime::BoundaryHigh => {
            pred.outer_exp = d * (1.0 - gamma) * (1.0 - delta);
            pred.log_outer_pow = 1.0 - gamma;
        }
        TheoremRegime::Intermediate => {
            pred.outer_exp = d * (1.0 - inv_gamma) * (1.0 - 1.0 / delta)
        }
        TheoremRegime::BoundaryLow => {
            pred.outer_exp = d * (1.0 - delta);
            pred.log_outer_pow = 1.0;
        }
        TheoremRegime::HeavyProfile => pred.outer_exp = d * (1.0 - delta),
        TheoremRegime::NoQuantitativePhase => unreachable!(),
    }
    Ok(pred)
}

/// Whether the regime sits at or above `delta = 1/gamma`; routed through the
/// classified regime so near-boundary inputs never get a mixed answer.
fn at_or_above_inv_gamma(params: &ModelParams) -> Result<bool> {
    Ok(matches!(
        params.require_quantitative_phase()?.theorem_regime,
        TheoremRegime::LightProfile | TheoremRegime::BoundaryHigh
    ))
}

/// One-edge escape probability `pi_(u),R ≍ u^{-1} g(R) ∧ 1` (resp. `u^{-gamma
/// delta} g(R) ∧ 1` below `delta = 1/gamma`).
pub fn pi_escape_prediction(params: &ModelParams) -> Result<AsymptoticPrediction> {
    let mut pred = g_prediction(params)?;
    pred.mark_exp = if at_or_above_inv_gamma(params)? {
        -1.0
    } else {
        -params.gamma * params.delta_effective()
    };
    pred.capped_at_one = true;
    Ok(pred)
}

/// One-edge annulus crossing probability `pi_{r,R}`.
pub fn pi_crossing_prediction(params: &ModelParams) -> Result<AsymptoticPrediction> {
    let mut pred = g_prediction(params)?;
    pred.inner_exp = d(params);
    if at_or_above_inv_gamma(params)? {
        pred.log_outer_pow += 1.0;
    }
    Ok(pred)
}

fn with(mut base: AsymptoticPrediction, mark_exp: f64, inner_exp: f64) -> AsymptoticPrediction {
    base.mark_exp = mark_exp;
    base.inner_exp = inner_exp;
    base
}

/// Two-edge escape probability as a piecewise table over the root mark.
pub fn pi2_escape_prediction(params: &ModelParams) -> Result<PiecewisePrediction> {
    let class = params.require_quantitative_phase()?;
    let d = d(params);
    let delta = params.delta_effective();
    let gamma = params.gamma;
    let inv_gamma = params.inv_gamma();
    let g = g_prediction(params)?;
    let h = h_prediction(params)?;
    let one = AsymptoticPrediction::constant_one();

    let table = match class.theorem_regime {
        TheoremRegime::HeavyProfile => {
            if gamma == 0.0 {
                // Marks play no role: a single piece u^0 g(R), still capped.
                let mut p = g;
                p.capped_at_one = true;
                PiecewisePrediction::from_breaks(PieceVar::Mark, vec![p], vec![])
            } else {
                PiecewisePrediction::from_breaks(
                    PieceVar::Mark,
                    vec![one, with(g, -gamma * delta, 0.0)],
                    vec![Threshold::new(d * (1.0 / (gamma * delta) - inv_gamma), 0.0)],
                )
            }
        }
        TheoremRegime::Intermediate => PiecewisePrediction::from_breaks(
            PieceVar::Mark,
            vec![one, with(g, -gamma * delta, 0.0), with(h, -gamma, 0.0)],
            vec![
                Threshold::new(d * (1.0 / (gamma * delta) - inv_gamma), 0.0),
                Threshold::new(-d * (1.0 + delta - inv_gamma) / (gamma * delta), 0.0),
            ],
        ),
        TheoremRegime::BoundaryLow => PiecewisePrediction::from_breaks(
            PieceVar::Mark,
            vec![one, with(g, -gamma * delta, 0.0), with(h, -gamma, 0.0)],
            vec![
                Threshold::new(d * (1.0 / (gamma * delta) - inv_gamma), 0.0),
                Threshold::new(0.0, -1.0 / (1.0 - 2.0 * gamma)),
            ],
        ),
        TheoremRegime::BoundaryHigh => PiecewisePrediction::from_breaks(
            PieceVar::Mark,
            vec![one, with(g, -1.0, 0.0), with(h, -gamma, 0.0)],
            vec![
                Threshold::new(d * (1.0 - inv_gamma), 1.0),
                Threshold::new(-d, gamma / (1.0 - gamma)),
            ],
        ),
        TheoremRegime::LightProfile => PiecewisePrediction::from_breaks(
            PieceVar::Mark,
            vec![one, with(g, -1.0, 0.0), with(h, -gamma, 0.0)],
            vec![
                Threshold::new(d * (1.0 - inv_gamma), 0.0),
                Threshold::new(-d, 0.0),
            ],
        ),
        TheoremRegime::NoQuantitativePhase => unreachable!(),
    };
    Ok(table)
}

/// Two-edge annulus crossing probability as a piecewise table over the inner
/// radius.
pub fn pi2_crossing_prediction(params: &ModelParams) -> Result<PiecewisePrediction> {
    let class = params.require_quantitative_phase()?;
    let d = d(params);
    let delta = params.delta_effective();
    let gamma = params.gamma;
    let inv_gamma = params.inv_gamma();
    let pi = pi_crossing_prediction(params)?;
    let h = h_prediction(params)?;

    let table = match class.theorem_regime {
        TheoremRegime::HeavyProfile => {
            PiecewisePrediction::from_breaks(PieceVar::InnerRadius, vec![pi], vec![])
        }
        TheoremRegime::Intermediate => PiecewisePrediction::from_breaks(
            PieceVar::InnerRadius,
            vec![with(h, 0.0, d / delta), pi],
            vec![Threshold::new(1.0 + delta - inv_gamma, 0.0)],
        ),
        TheoremRegime::BoundaryLow => PiecewisePrediction::from_breaks(
            PieceVar::InnerRadius,
            vec![with(h, 0.0, d / delta), pi],
            vec![Threshold::new(0.0, delta / (d * (delta - 1.0)))],
        ),
        TheoremRegime::BoundaryHigh => {
            let mut low = with(h, 0.0, d * gamma);
            low.log_inner_pow = gamma;
            PiecewisePrediction::from_breaks(
                PieceVar::InnerRadius,
                vec![low, pi],
                vec![Threshold::new(1.0, -1.0 / (d * (1.0 - gamma)))],
            )
        }
        TheoremRegime::LightProfile => PiecewisePrediction::from_breaks(
            PieceVar::InnerRadius,
            vec![with(h, 0.0, d * gamma), pi],
            vec![Threshold::new(1.0, -1.0 / (d * (1.0 - gamma)))],
        ),
        TheoremRegime::NoQuantitativePhase => unreachable!(),
    };
    Ok(table)
}

/// Annulus crossing probability `theta_{r,R}`; the two-edge table, valid
/// whenever the inner radius grows at least polynomially in the outer one
/// (`r >= R^eps` for some caller-chosen `eps > 0`).
pub fn theta_crossing_prediction(params: &ModelParams) -> Result<PiecewisePrediction> {
    pi2_crossing_prediction(params)
}

/// Escape probability `theta_(u),R`; the two-edge table, valid on
/// `u <= R^{-eps}` for some caller-chosen `eps > 0`.
pub fn theta_escape_prediction(params: &ModelParams) -> Result<PiecewisePrediction> {
    pi2_escape_prediction(params)
}

/// Exponent of `R` in the one-arm probability of a typical (Palm) vertex,
/// i.e. `d` times the limit of `log P((0,U) <-> B(0,R)^c) / (d log R)`.
pub fn one_arm_exponent(params: &ModelParams) -> Result<f64> {
    let class = params.require_quantitative_phase()?;
    let d = d(params);
    let delta = params.delta_effective();
    let inv_gamma = params.inv_gamma();
    Ok(match class.theorem_regime {
        TheoremRegime::HeavyProfile => d * (1.0 - delta),
        TheoremRegime::BoundaryLow | TheoremRegime::Intermediate => {
            d * (1.0 - inv_gamma) * (1.0 - 1.0 / delta)
        }
        TheoremRegime::BoundaryHigh | TheoremRegime::LightProfile => {
            d * (1.0 - inv_gamma) * (1.0 - params.gamma)
        }
        TheoremRegime::NoQuantitativePhase => unreachable!(),
    })
}

/// One-edge crossing probability from `B(0,r)` to a fixed vertex at distance
/// `R` with mark `u`.
pub fn pi_point_to_ball_prediction(params: &ModelParams) -> Result<AsymptoticPrediction> {
    let class = params.require_quantitative_phase()?;
    let d = d(params);
    let delta = params.delta_effective();
    let mut pred = AsymptoticPrediction::order();
    pred.inner_exp = d;
    match class.theorem_regime {
        TheoremRegime::LightProfile => {
            pred.mark_exp = -1.0;
            pred.outer_exp = -d * params.inv_gamma();
            pred.capped_at_one = true;
        }
        TheoremRegime::BoundaryHigh => {
            pred.mark_exp = -1.0;
            pred.outer_exp = -d * delta;
            pred.capped_at_one = true;
            pred.mixed_log = true;
        }
        _ => {
            pred.mark_exp = -params.gamma * delta;
            pred.outer_exp = -d * delta;
        }
    }
    Ok(pred)
}

/// Inner radius at which the dominant crossing strategy changes from two
/// edges to one, or `None` when one edge dominates for every inner radius.
pub fn crossover_inner_radius(params: &ModelParams, big_r: f64) -> Result<Option<f64>> {
    let class = params.require_quantitative_phase()?;
    if !(big_r > 1.0) {
        return Err(Error::invalid("crossover requires R > 1"));
    }
    let d = d(params);
    let delta = params.delta_effective();
    let inv_gamma = params.inv_gamma();
    Ok(match class.theorem_regime {
        TheoremRegime::HeavyProfile => None,
        TheoremRegime::Intermediate => Some(big_r.powf(1.0 + delta - inv_gamma)),
        TheoremRegime::BoundaryLow => {
            Some(big_r.ln().powf(delta / (d * (delta - 1.0))))
        }
        TheoremRegime::BoundaryHigh | TheoremRegime::LightProfile => {
            Some(big_r * big_r.ln().powf(-1.0 / (d * (1.0 - params.gamma))))
        }
        TheoremRegime::NoQuantitativePhase => unreachable!(),
    })
}
