//! Sequence extrapolation helpers.

/// Aitken delta-squared extrapolation of three successive terms.
/// Falls back to the last term when the second difference vanishes.
pub fn aitken(s0: f64, s1: f64, s2: f64) -> f64 {
    let denom = s2 - 2.0 * s1 + s0;
    if denom == 0.0 || !denom.is_finite() {
        return s2;
    }
    let d = s2 - s1;
    let lim = s2 - d * d / denom;
    if lim.is_finite() {
        lim
    } else {
        s2
    }
}

/// Repeated Aitken extrapolation over a whole sequence. Returns the final
/// extrapolant and the magnitude of its last change as an error estimate.
pub fn aitken_iterated(seq: &[f64]) -> (f64, f64) {
    match seq.len() {
        0 => return (f64::NAN, f64::INFINITY),
        1 => return (seq[0], f64::INFINITY),
        2 => return (seq[1], (seq[1] - seq[0]).abs()),
        _ => {}
    }
    let mut cur = seq.to_vec();
    let mut last_err = (cur[cur.len() - 1] - cur[cur.len() - 2]).abs();
    while cur.len() >= 3 {
        let next: Vec<f64> = cur.windows(3).map(|w| aitken(w[0], w[1], w[2])).collect();
        if next.len() >= 2 {
            last_err = (next[next.len() - 1] - next[next.len() - 2]).abs();
        } else {
            last_err = (next[0] - cur[cur.len() - 1]).abs();
        }
        cur = next;
    }
    (cur[cur.len() - 1], last_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_sequence_is_exact() {
        let s: Vec<f64> = (0..3).map(|j| 2.0 + 0.5f64.powi(j)).collect();
        assert!((aitken(s[0], s[1], s[2]) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn constant_sequence_is_fixed() {
        assert_eq!(aitken(3.0, 3.0, 3.0), 3.0);
        assert_eq!(aitken_iterated(&[1.0, 1.0, 1.0, 1.0]).0, 1.0);
    }

    #[test]
    fn iterated_accelerates_power_decay() {
        let s: Vec<f64> = (0..8)
            .map(|j| 0.5f64.powi(j).powf(1.5) + 0.3 * 0.5f64.powi(j).powf(2.5))
            .collect();
        let (lim, _) = aitken_iterated(&s);
        assert!(lim.abs() < 1e-5, "{lim}");
    }
}
