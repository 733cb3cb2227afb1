//! Smooth cutoff: 0 below 1, 1 above 2, with a closed-form derivative so the
//! regularized integrands never difference across the thin transition layer.

/// `chi(t) = g(t-1) / (g(t-1) + g(2-t))` with `g(s) = exp(-1/s)` for `s > 0`.
#[derive(Clone, Copy, Debug, Default)]
pub struct CutoffProfile;

fn g(s: f64) -> f64 {
    if s > 0.0 {
        (-1.0 / s).exp()
    } else {
        0.0
    }
}

fn g_prime(s: f64) -> f64 {
    if s > 0.0 {
        (-1.0 / s).exp() / (s * s)
    } else {
        0.0
    }
}

impl CutoffProfile {
    pub fn chi(&self, t: f64) -> f64 {
        if t <= 1.0 {
            0.0
        } else if t >= 2.0 {
            1.0
        } else {
            let a = g(t - 1.0);
            a / (a + g(2.0 - t))
        }
    }

    pub fn chi_prime(&self, t: f64) -> f64 {
        if t <= 1.0 || t >= 2.0 {
            0.0
        } else {
            let a = g(t - 1.0);
            let b = g(2.0 - t);
            let da = g_prime(t - 1.0);
            let db = g_prime(2.0 - t);
            // quotient rule; d/dt g(2-t) = -db
            (da * b + a * db) / ((a + b) * (a + b))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plateau_values() {
        let chi = CutoffProfile;
        assert_eq!(chi.chi(0.0), 0.0);
        assert_eq!(chi.chi(1.0), 0.0);
        assert_eq!(chi.chi(2.0), 1.0);
        assert_eq!(chi.chi(50.0), 1.0);
        assert!((chi.chi(1.5) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn monotone_on_transition() {
        let chi = CutoffProfile;
        let mut prev = 0.0;
        for k in 0..=100 {
            let v = chi.chi(1.0 + k as f64 / 100.0);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn derivative_matches_differences() {
        let chi = CutoffProfile;
        let h = 1e-6;
        for &t in &[1.1, 1.3, 1.5, 1.7, 1.9, 0.5, 2.5] {
            let fd = (chi.chi(t + h) - chi.chi(t - h)) / (2.0 * h);
            assert!(
                (chi.chi_prime(t) - fd).abs() < 1e-6,
                "t = {t}: {} vs {}",
                chi.chi_prime(t),
                fd
            );
        }
    }

    #[test]
    fn derivative_integrates_to_one() {
        // crude Riemann check that the transition has unit total rise
        let chi = CutoffProfile;
        let n = 20_000;
        let mut s = 0.0;
        for k in 0..n {
            let t = 1.0 + (k as f64 + 0.5) / n as f64;
            s += chi.chi_prime(t) / n as f64;
        }
        assert!((s - 1.0).abs() < 1e-6);
    }
}
