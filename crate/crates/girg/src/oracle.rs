//! Exact and quadrature-based ground truth.
//!
//! The expected number of edges from a planted root `(0, u)` to vertices
//! outside `B(0, R)` within a window of radius `W` is
//!
//! ```text
//!   E[M] = lambda * sigma_d * \int_R^W z^{d-1} \int_0^1 rho(z^d (u v)^gamma) dv dz,
//! ```
//!
//! with the inner mark integral available in closed form for both profiles.
//! That count is Poisson, so `1 - exp(-E[M])` is the exact one-edge escape
//! probability of the truncated model. Small fixed configurations get an
//! independent brute-force oracle that enumerates every edge subset.

use crate::connectivity::{crosses, EventSpec};
use crate::error::{Error, Result};
use crate::geometry::{norm, unit_sphere_area};
use crate::model::{ModelParams, Profile};
use crate::sampler::{SampledGraph, Vertex, VertexSet};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureResult {
    pub value: f64,
    pub abs_error_estimate: f64,
}

/// Inner mark integral `\int_0^1 rho(z^d (u v)^gamma) dv`, evaluated in
/// closed form and stably in log space.
fn inner_mark_integral(params: &ModelParams, u: f64, z: f64) -> f64 {
    let d = params.dim as f64;
    match params.profile {
        Profile::Hard { r0 } => {
            // rho = 1 exactly when v <= (r0 z^-d)^{1/gamma} / u.
            let log_vstar = (r0.ln() - d * z.ln()) / params.gamma - u.ln();
            if log_vstar >= 0.0 {
                1.0
            } else {
                log_vstar.exp()
            }
        }
        Profile::SoftPowerLaw { delta } => {
            if params.gamma == 0.0 {
                let log_p = -d * delta * z.ln();
                return if log_p >= 0.0 { 1.0 } else { log_p.exp() };
            }
            // v* = z^{-d/gamma} / u saturates the profile; above it the
            // integrand is (u v)^{-gamma delta} z^{-d delta}.
            let log_t = u.ln() + d / params.gamma * z.ln();
            if log_t <= 0.0 {
                return 1.0;
            }
            let q = params.gamma * delta;
            let b = (-log_t).exp();
            if (1.0 - q).abs() > 1e-6 {
                b + ((-q * log_t).exp() - b) / (1.0 - q)
            } else {
                // Near q = 1 the difference above cancels; expand
                // t^{1-q} - 1 = expm1((1-q) log t).
                let x = (1.0 - q) * log_t;
                let phi = if x.abs() < 1e-12 { 1.0 } else { x.exp_m1() / x };
                b * (1.0 + log_t * phi)
            }
        }
    }
}

/// Radial integrand of the expected exterior degree (without the constant
/// `lambda * sigma_d`).
fn radial_integrand(params: &ModelParams, u: f64, z: f64) -> f64 {
    z.powi(params.dim as i32 - 1) * inner_mark_integral(params, u, z)
}

// 15-point Kronrod extension of the 7-point Gauss rule (positive nodes).
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gauss_kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut resk = 0.0;
    let mut resg = 0.0;
    for (i, (&x, &wk)) in XGK.iter().zip(&WGK).enumerate() {
        let (flo, fhi) = if x == 0.0 {
            let fc = f(center);
            (fc, 0.0)
        } else {
            (f(center - half * x), f(center + half * x))
        };
        let fsum = flo + fhi;
        resk += wk * fsum;
        if i % 2 == 1 {
            resg += WG[i / 2] * fsum;
        } else if x == 0.0 {
            resg += WG[3] * flo;
        }
    }
    let value = resk * half;
    let err = ((resk - resg) * half).abs();
    (value, err)
}

#[derive(Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
    /// Inverted segments integrate f(1/t)/t^2 over t, covering a z-tail.
    inverted: bool,
}

/// Adaptive quadrature over the given z-segments (plus an inverted tail when
/// the window is infinite), refined until the absolute error estimate drops
/// below `max(1e-10, 1e-8 |value|)`.
fn adaptive_radial<F: Fn(f64) -> f64 + Copy>(f: F, breaks: &[f64], tail_from: Option<f64>) -> Result<QuadratureResult> {
    let eval = |seg: &mut Segment| {
        let (v, e) = if seg.inverted {
            gauss_kronrod(&|t: f64| f(1.0 / t) / (t * t), seg.a, seg.b)
        } else {
            gauss_kronrod(&f, seg.a, seg.b)
        };
        seg.value = v;
        seg.err = e;
    };
    let mut segments: Vec<Segment> = Vec::new();
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            let mut s = Segment { a: w[0], b: w[1], value: 0.0, err: 0.0, inverted: false };
            eval(&mut s);
            segments.push(s);
        }
    }
    if let Some(z0) = tail_from {
        let mut s = Segment { a: 0.0, b: 1.0 / z0, value: 0.0, err: 0.0, inverted: true };
        eval(&mut s);
        segments.push(s);
    }
    if segments.is_empty() {
        return Ok(QuadratureResult { value: 0.0, abs_error_estimate: 0.0 });
    }
    for _ in 0..2000 {
        let value: f64 = segments.iter().map(|s| s.value).sum();
        let err: f64 = segments.iter().map(|s| s.err).sum();
        if err <= (1e-8 * value.abs()).max(1e-10) {
            return Ok(QuadratureResult { value, abs_error_estimate: err });
        }
        let worst = segments
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.err.total_cmp(&b.1.err))
            .map(|(i, _)| i)
            .unwrap();
        let seg = segments[worst];
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            break; // interval exhausted at f64 resolution
        }
        let mut left = Segment { a: seg.a, b: mid, ..seg };
        let mut right = Segment { a: mid, b: seg.b, ..seg };
        eval(&mut left);
        eval(&mut right);
        segments[worst] = left;
        segments.push(right);
    }
    let value: f64 = segments.iter().map(|s| s.value).sum();
    let err: f64 = segments.iter().map(|s| s.err).sum();
    if err <= (1e-8 * value.abs()).max(1e-10) {
        Ok(QuadratureResult { value, abs_error_estimate: err })
    } else {
        Err(Error::QuadratureFailed(format!(
            "residual error {err:.3e} on value {value:.6e}"
        )))
    }
}

/// Expected number of root edges landing in `B(0,R)^c` within the window
/// (`window = f64::INFINITY` for the untruncated model).
pub fn expected_exterior_degree(
    params: &ModelParams,
    u: f64,
    big_r: f64,
    window: f64,
) -> Result<QuadratureResult> {
    params.validate()?;
    if !(u > 0.0 && u <= 1.0) {
        return Err(Error::invalid("mark must lie in (0, 1]"));
    }
    if !(big_r > 0.0) || !big_r.is_finite() {
        return Err(Error::invalid("R must be positive and finite"));
    }
    if !(window >= big_r) {
        return Err(Error::invalid("window must satisfy W >= R"));
    }
    if let Profile::SoftPowerLaw { delta } = params.profile {
        if delta <= 1.0 {
            return Err(Error::Divergence("soft profile requires delta > 1".into()));
        }
    }
    if window == big_r {
        return Ok(QuadratureResult { value: 0.0, abs_error_estimate: 0.0 });
    }

    // The integrand has a kink where the profile saturates; split there.
    let knee = match params.profile {
        Profile::Hard { r0 } => (r0.ln() / params.dim as f64 - params.gamma / params.dim as f64 * u.ln()).exp(),
        Profile::SoftPowerLaw { .. } => {
            if params.gamma == 0.0 {
                1.0
            } else {
                (-params.gamma / params.dim as f64 * u.ln()).exp()
            }
        }
    };
    let mut breaks = vec![big_r];
    if knee > big_r && knee < window {
        breaks.push(knee);
    }
    let coef = params.lambda * unit_sphere_area(params.dim);
    let f = |z: f64| radial_integrand(params, u, z);
    let result = if window.is_finite() {
        breaks.push(window);
        adaptive_radial(f, &breaks, None)?
    } else {
        let tail_start = *breaks.last().unwrap();
        adaptive_radial(f, &breaks, Some(tail_start))?
    };
    Ok(QuadratureResult {
        value: coef * result.value,
        abs_error_estimate: coef * result.abs_error_estimate,
    })
}

/// Exact one-edge escape probability of the truncated model: the exterior
/// edge count of the root is Poisson, so the probability of at least one is
/// `1 - exp(-E[M])`.
pub fn exact_one_edge_escape(params: &ModelParams, u: f64, big_r: f64, window: f64) -> Result<f64> {
    let mean = expected_exterior_degree(params, u, big_r, window)?;
    Ok(-(-mean.value).exp_m1())
}

/// Expected number of root edges reaching beyond the window entirely; an
/// upper bound on the probability that truncation at `W` lost a root edge.
pub fn truncation_tail(params: &ModelParams, u: f64, window: f64) -> Result<f64> {
    Ok(expected_exterior_degree(params, u, window, f64::INFINITY)?.value)
}

/// Exact probability of a crossing/escape event over the edge randomness of
/// a fixed vertex configuration, by enumerating all edge subsets. Capped at
/// 12 vertex pairs (4096 configurations).
pub fn brute_force_event_probability(
    params: &ModelParams,
    vertices: &[Vertex],
    root_index: Option<u32>,
    spec: &EventSpec,
) -> Result<f64> {
    params.validate()?;
    spec.validate()?;
    let n = vertices.len();
    if n == 0 {
        return Ok(0.0);
    }
    let pair_count = n * (n - 1) / 2;
    if pair_count > 12 {
        return Err(Error::FixtureTooLarge(format!(
            "{n} vertices give {pair_count} pairs; the cap is 12"
        )));
    }
    if spec.is_root() {
        match root_index {
            Some(i) if (i as usize) < n => {}
            _ => return Err(Error::MissingRoot),
        }
    }
    let verts = VertexSet::from_vertices(params.dim, vertices)?;
    let mut pairs = Vec::with_capacity(pair_count);
    let mut probs = Vec::with_capacity(pair_count);
    for i in 0..n {
        for j in (i + 1)..n {
            let dist = norm(
                &verts
                    .position(i)
                    .iter()
                    .zip(verts.position(j))
                    .map(|(a, b)| a - b)
                    .collect::<Vec<_>>(),
            );
            pairs.push((i as u32, j as u32));
            probs.push(params.connection_probability(dist, verts.mark(i), verts.mark(j))?);
        }
    }
    let window = vertices
        .iter()
        .map(|v| norm(&v.position))
        .fold(spec.outer_radius, f64::max);
    let mut total = 0.0;
    for mask in 0u32..(1 << pair_count) {
        let mut weight = 1.0;
        for (b, &p) in probs.iter().enumerate() {
            weight *= if mask >> b & 1 == 1 { p } else { 1.0 - p };
            if weight == 0.0 {
                break;
            }
        }
        if weight == 0.0 {
            continue;
        }
        let edges: Vec<(u32, u32)> = pairs
            .iter()
            .enumerate()
            .filter(|(b, _)| mask >> b & 1 == 1)
            .map(|(_, &e)| e)
            .collect();
        let graph = SampledGraph::assemble(verts.clone(), edges, window, root_index, 0);
        if crosses(&graph, spec)? {
            total += weight;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connectivity::EdgeBudget;
    use std::f64::consts::PI;

    fn soft(d: u32, lambda: f64, gamma: f64, delta: f64) -> ModelParams {
        ModelParams::soft(d, lambda, gamma, delta).unwrap()
    }

    fn hard(d: u32, lambda: f64, gamma: f64) -> ModelParams {
        ModelParams::hard(d, lambda, gamma, 1.0).unwrap()
    }

    fn assert_rel(actual: f64, expected: f64, tol: f64) {
        assert!(
            (actual - expected).abs() <= tol * expected.abs().max(1e-300),
            "{actual} vs {expected}"
        );
    }

    #[test]
    fn exterior_degree_matches_closed_forms() {
        // gamma = 0, delta = 3, d = 2, R = 2, W = inf: 2 pi int_2^inf z^-5 = pi/32.
        let e = expected_exterior_degree(&soft(2, 1.0, 0.0, 3.0), 0.5, 2.0, f64::INFINITY)
            .unwrap();
        assert_rel(e.value, PI / 32.0, 1e-8);
        assert!(e.abs_error_estimate <= (1e-8 * e.value).max(1e-10));

        // Hard r0 = 1, gamma = 1/3, d = 1, u = 1, R = 2, W = inf: 2 int_2^inf z^-3 = 1/4.
        let e = expected_exterior_degree(&hard(1, 1.0, 1.0 / 3.0), 1.0, 2.0, f64::INFINITY)
            .unwrap();
        assert_rel(e.value, 0.25, 1e-8);

        // Degenerate window W = R.
        let e = expected_exterior_degree(&soft(2, 1.0, 0.0, 3.0), 0.5, 2.0, 2.0).unwrap();
        assert_eq!(e.value, 0.0);
    }

    #[test]
    fn quadrature_matches_closed_forms_across_families() {
        // gamma = 0 soft, finite and infinite windows.
        for &(d, delta, big_r, w) in &[
            (1u32, 3.0f64, 2.0f64, f64::INFINITY),
            (2, 2.5, 1.5, f64::INFINITY),
            (2, 3.0, 2.0, 8.0),
            (3, 4.0, 1.2, 50.0),
        ] {
            let params = soft(d, 0.7, 0.0, delta);
            let dd = d as f64;
            let sig = unit_sphere_area(d);
            let upper = if w.is_finite() { w.powf(dd * (1.0 - delta)) } else { 0.0 };
            let expected =
                0.7 * sig * (big_r.powf(dd * (1.0 - delta)) - upper) / (dd * (delta - 1.0));
            let e = expected_exterior_degree(&params, 0.3, big_r, w).unwrap();
            assert_rel(e.value, expected, 1e-8);
        }

        // Hard profile with u = 1 and R beyond the knee.
        for &(d, gamma, big_r, w) in &[
            (1u32, 1.0f64 / 3.0, 2.0f64, f64::INFINITY),
            (2, 0.25, 1.5, 20.0),
            (1, 0.2, 3.0, 64.0),
        ] {
            let params = hard(d, 1.3, gamma);
            let dd = d as f64;
            let a = dd / gamma - dd; // decay exponent of z^{d-1} z^{-d/gamma}
            let upper = if w.is_finite() { w.powf(-a) } else { 0.0 };
            let expected = 1.3 * unit_sphere_area(d) * (big_r.powf(-a) - upper) / a;
            let e = expected_exterior_degree(&params, 1.0, big_r, w).unwrap();
            assert_rel(e.value, expected, 1e-8);
        }

        // Soft profile, gamma delta < 1, u = 1, R >= 1: both power terms.
        for &(d, gamma, delta, big_r) in &[
            (1u32, 0.2f64, 3.0f64, 2.0f64),
            (2, 0.25, 3.5, 1.5),
            (1, 0.3, 2.5, 4.0),
        ] {
            let params = soft(d, 0.9, gamma, delta);
            let dd = d as f64;
            let q = gamma * delta;
            assert!(q < 1.0);
            let a_b = dd / gamma - dd; // from the saturated part v <= v*
            let a_p = dd * delta - dd; // from the power part
            let expected = 0.9
                * unit_sphere_area(d)
                * ((1.0 - 1.0 / (1.0 - q)) * big_r.powf(-a_b) / a_b
                    + big_r.powf(-a_p) / ((1.0 - q) * a_p));
            let e = expected_exterior_degree(&params, 1.0, big_r, f64::INFINITY).unwrap();
            assert_rel(e.value, expected, 1e-8);
        }
    }

    #[test]
    fn exact_escape_examples() {
        let p = exact_one_edge_escape(&hard(1, 1.0, 1.0 / 3.0), 1.0, 2.0, f64::INFINITY)
            .unwrap();
        assert_rel(p, 1.0 - (-0.25f64).exp(), 1e-8);

        let p = exact_one_edge_escape(&soft(2, 1.0, 0.0, 3.0), 0.5, 2.0, f64::INFINITY)
            .unwrap();
        assert_rel(p, 1.0 - (-PI / 32.0).exp(), 1e-8);

        let p = exact_one_edge_escape(&soft(2, 1.0, 0.0, 3.0), 0.5, 2.0, 2.0).unwrap();
        assert_eq!(p, 0.0);
    }

    #[test]
    fn truncation_tail_examples() {
        // gamma = 0, delta = 3, d = 2, W = 8: 2 pi W^-4 / 4.
        let t = truncation_tail(&soft(2, 1.0, 0.0, 3.0), 0.5, 8.0).unwrap();
        assert_rel(t, 2.0 * PI / (4.0 * 8f64.powi(4)), 1e-8);

        // Hard, gamma = 1/3, d = 1, W = 16: 2 int_16^inf z^-3 = 1/256.
        let t = truncation_tail(&hard(1, 1.0, 1.0 / 3.0), 1.0, 16.0).unwrap();
        assert_rel(t, 1.0 / 256.0, 1e-8);

        // Vanishes monotonically as the window grows.
        let params = soft(2, 1.0, 0.2, 3.0);
        let mut prev = f64::INFINITY;
        for w in [4.0, 8.0, 16.0, 64.0, 512.0] {
            let t = truncation_tail(&params, 0.7, w).unwrap();
            assert!(t < prev);
            prev = t;
        }
        assert!(prev < 1e-6);
    }

    #[test]
    fn escape_probability_monotonicities() {
        let params = soft(2, 1.0, 0.25, 3.0);
        // Non-increasing in R.
        let mut prev = 1.0;
        for big_r in [1.0, 2.0, 4.0, 8.0] {
            let p = exact_one_edge_escape(&params, 0.5, big_r, f64::INFINITY).unwrap();
            assert!(p <= prev + 1e-12);
            prev = p;
        }
        // Non-decreasing as the mark shrinks.
        let mut prev = 0.0;
        for u in [1.0, 0.5, 0.1, 0.01] {
            let p = exact_one_edge_escape(&params, u, 4.0, f64::INFINITY).unwrap();
            assert!(p >= prev - 1e-12);
            prev = p;
        }
        // Non-decreasing in W.
        let mut prev = 0.0;
        for w in [4.0, 8.0, 32.0, f64::INFINITY] {
            let p = exact_one_edge_escape(&params, 0.5, 4.0, w).unwrap();
            assert!(p >= prev - 1e-12);
            prev = p;
        }
    }

    #[test]
    fn brute_force_examples() {
        let params = soft(1, 1.0, 0.0, 3.0);
        let spec = EventSpec::ball(2.0, 8.0, EdgeBudget::Limited(1)).unwrap();

        // Two vertices, one inside and one outside: probability is the edge
        // probability itself.
        let pair = vec![
            Vertex { position: vec![1.0], mark: 1.0 },
            Vertex { position: vec![9.0], mark: 1.0 },
        ];
        let p_edge = params.connection_probability(8.0, 1.0, 1.0).unwrap();
        let p = brute_force_event_probability(&params, &pair, None, &spec).unwrap();
        assert_rel(p, p_edge, 1e-12);

        // Chain s - m - t: k = 2 crossing is p3 + (1 - p3) p1 p2.
        let chain = vec![
            Vertex { position: vec![1.0], mark: 1.0 },
            Vertex { position: vec![4.0], mark: 1.0 },
            Vertex { position: vec![9.0], mark: 1.0 },
        ];
        let p1 = params.connection_probability(3.0, 1.0, 1.0).unwrap();
        let p2 = params.connection_probability(5.0, 1.0, 1.0).unwrap();
        let p3 = params.connection_probability(8.0, 1.0, 1.0).unwrap();
        let spec2 = EventSpec::ball(2.0, 8.0, EdgeBudget::Limited(2)).unwrap();
        let p = brute_force_event_probability(&params, &chain, None, &spec2).unwrap();
        assert_rel(p, p3 + (1.0 - p3) * p1 * p2, 1e-12);

        // Empty vertex list.
        let p = brute_force_event_probability(&params, &[], None, &spec).unwrap();
        assert_eq!(p, 0.0);
    }

    #[test]
    fn brute_force_enforces_the_pair_cap() {
        let params = soft(1, 1.0, 0.0, 3.0);
        let spec = EventSpec::ball(2.0, 8.0, EdgeBudget::Limited(1)).unwrap();
        let many: Vec<Vertex> = (0..6)
            .map(|i| Vertex { position: vec![i as f64], mark: 1.0 })
            .collect();
        assert!(matches!(
            brute_force_event_probability(&params, &many, None, &spec),
            Err(Error::FixtureTooLarge(_))
        ));
    }
}
