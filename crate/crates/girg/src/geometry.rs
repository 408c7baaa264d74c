//! Euclidean helpers shared by the sampler and the oracle integrals.

/// Volume of the unit ball in `d` dimensions, via the two-step recurrence
/// V_d = 2*pi/d * V_{d-2} with V_0 = 1, V_1 = 2.
pub fn unit_ball_volume(d: u32) -> f64 {
    let mut v = if d % 2 == 0 { 1.0 } else { 2.0 };
    let mut k = if d % 2 == 0 { 2 } else { 3 };
    while k <= d {
        v *= 2.0 * std::f64::consts::PI / k as f64;
        k += 2;
    }
    v
}

pub fn ball_volume(d: u32, radius: f64) -> f64 {
    unit_ball_volume(d) * radius.powi(d as i32)
}

/// Surface area of the unit sphere in `d` dimensions (sigma_d = d * V_d(1)).
pub fn unit_sphere_area(d: u32) -> f64 {
    d as f64 * unit_ball_volume(d)
}

pub fn norm(coords: &[f64]) -> f64 {
    coords.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let dxy = x - y;
            dxy * dxy
        })
        .sum()
}

/// `dist^d` computed from the squared distance, avoiding the square root
/// where the dimension allows it.
pub fn dist_pow_d(dist_sq: f64, d: u32) -> f64 {
    match d {
        1 => dist_sq.sqrt(),
        2 => dist_sq,
        3 => dist_sq * dist_sq.sqrt(),
        4 => dist_sq * dist_sq,
        _ => dist_sq.powf(d as f64 / 2.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_volumes_match_known_values() {
        assert!((unit_ball_volume(1) - 2.0).abs() < 1e-12);
        assert!((unit_ball_volume(2) - std::f64::consts::PI).abs() < 1e-12);
        assert!((unit_ball_volume(3) - 4.0 / 3.0 * std::f64::consts::PI).abs() < 1e-12);
        assert!((ball_volume(2, 10.0) - 100.0 * std::f64::consts::PI).abs() < 1e-9);
    }

    #[test]
    fn sphere_area_matches_known_values() {
        assert!((unit_sphere_area(1) - 2.0).abs() < 1e-12);
        assert!((unit_sphere_area(2) - 2.0 * std::f64::consts::PI).abs() < 1e-12);
        assert!((unit_sphere_area(3) - 4.0 * std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn dist_pow_d_agrees_with_powf() {
        for d in 1..=6u32 {
            for &s in &[0.25, 1.0, 7.3, 1234.5] {
                let direct = (s as f64).sqrt().powf(d as f64);
                assert!(
                    (dist_pow_d(s, d) - direct).abs() <= 1e-9 * direct.max(1.0),
                    "d={d} s={s}"
                );
            }
        }
    }
}
