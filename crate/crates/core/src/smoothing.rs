//! Discontinuous initial Delta profile and its quintic regularization.
//!
//! The step `u0` jumps from 0 to 1 at the strike; the smoothed variant
//! replaces it on `[K - w, K + w]` by the degree-5 polynomial `H5` with
//! matching values and vanishing first and second derivatives at both band
//! edges, so the initial data is C^2 on the whole domain.

use crate::error::Error;

/// Step initial profile: 0 below the strike, 1 above, 0.5 at the strike.
#[inline]
pub fn u0_step(x: f64, strike: f64) -> f64 {
    if x < strike {
        0.0
    } else if x > strike {
        1.0
    } else {
        0.5
    }
}

fn check_band(x: f64, strike: f64, w: f64) -> Result<(), Error> {
    if x < strike - w || x > strike + w {
        return Err(Error::Domain(format!(
            "x = {x} outside the smoothing band [{}, {}]",
            strike - w,
            strike + w
        )));
    }
    Ok(())
}

/// Quintic interpolant on the smoothing band, written in the divided-difference
/// form `A^3/(8w^3) - 3A^3 B/(16w^4) + 3A^3 B^2/(16w^5)` with `A = x - K + w`,
/// `B = x - K - w`.
pub fn h5_eval(x: f64, strike: f64, w: f64) -> Result<f64, Error> {
    check_band(x, strike, w)?;
    let a = x - strike + w;
    let b = x - strike - w;
    let a3 = a * a * a;
    Ok(a3 / (8.0 * w.powi(3)) - 3.0 * a3 * b / (16.0 * w.powi(4)) + 3.0 * a3 * b * b / (16.0 * w.powi(5)))
}

/// First derivative of `h5_eval` on the band.
pub fn h5_deriv1(x: f64, strike: f64, w: f64) -> Result<f64, Error> {
    check_band(x, strike, w)?;
    let a = x - strike + w;
    let b = x - strike - w;
    let a2 = a * a;
    let a3 = a2 * a;
    Ok(3.0 * a2 / (8.0 * w.powi(3)) - 3.0 * (3.0 * a2 * b + a3) / (16.0 * w.powi(4))
        + 3.0 * (3.0 * a2 * b * b + 2.0 * a3 * b) / (16.0 * w.powi(5)))
}

/// Second derivative of `h5_eval` on the band.
pub fn h5_deriv2(x: f64, strike: f64, w: f64) -> Result<f64, Error> {
    check_band(x, strike, w)?;
    let a = x - strike + w;
    let b = x - strike - w;
    let a2 = a * a;
    let a3 = a2 * a;
    Ok(6.0 * a / (8.0 * w.powi(3)) - (18.0 * a * b + 18.0 * a2) / (16.0 * w.powi(4))
        + (18.0 * a * b * b + 36.0 * a2 * b + 6.0 * a3) / (16.0 * w.powi(5)))
}

/// Initial profile for the solver: the raw step or its C^2 smoothing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialProfile {
    Step { strike: f64 },
    Smoothed { strike: f64, half_width: f64 },
}

impl InitialProfile {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            InitialProfile::Step { strike } => u0_step(x, strike),
            InitialProfile::Smoothed { strike, half_width } => {
                if x < strike - half_width || x > strike + half_width {
                    u0_step(x, strike)
                } else {
                    // inside the band; cannot fail
                    h5_eval(x, strike, half_width).expect("x inside band")
                }
            }
        }
    }

    /// Samples the profile on a set of nodes.
    pub fn sample(&self, nodes: &[f64]) -> Vec<f64> {
        nodes.iter().map(|&x| self.eval(x)).collect()
    }
}

/// Sampled sup-bound report for `H5` and its derivatives on the band.
#[derive(Debug, Clone)]
pub struct H5Report {
    pub sup_h5: f64,
    pub sup_deriv1: f64,
    pub sup_deriv2: f64,
    /// sup|H5| <= 10
    pub value_bound_holds: bool,
    /// sup|H5'| <= 22.5 / w
    pub deriv1_bound_holds: bool,
    /// sup|H5''| <= 40.5 / w^2
    pub deriv2_bound_holds: bool,
}

impl H5Report {
    pub fn all_hold(&self) -> bool {
        self.value_bound_holds && self.deriv1_bound_holds && self.deriv2_bound_holds
    }
}

/// Samples `H5`, `H5'`, `H5''` on `n` points across the band and checks the
/// sup bounds 10, 22.5/w and 40.5/w^2.
pub fn h5_certify(strike: f64, w: f64, n: usize) -> Result<H5Report, Error> {
    if n < 3 {
        return Err(Error::Precondition(format!("h5_certify needs n >= 3, got {n}")));
    }
    let mut sup = [0.0f64; 3];
    for i in 0..n {
        let x = strike - w + 2.0 * w * (i as f64) / ((n - 1) as f64);
        let x = x.clamp(strike - w, strike + w);
        sup[0] = sup[0].max(h5_eval(x, strike, w)?.abs());
        sup[1] = sup[1].max(h5_deriv1(x, strike, w)?.abs());
        sup[2] = sup[2].max(h5_deriv2(x, strike, w)?.abs());
    }
    Ok(H5Report {
        sup_h5: sup[0],
        sup_deriv1: sup[1],
        sup_deriv2: sup[2],
        value_bound_holds: sup[0] <= 10.0,
        deriv1_bound_holds: sup[1] <= 22.5 / w,
        deriv2_bound_holds: sup[2] <= 40.5 / (w * w),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    const K: f64 = 1.0;

    /// Independent route: H5 is the unique quintic with these interpolation
    /// conditions, so it must equal the rescaled smoothstep
    /// `y^3 (10 - 15 y + 6 y^2)`, `y = (x - K + w) / 2w`.
    fn smoothstep(x: f64, w: f64) -> f64 {
        let y = (x - K + w) / (2.0 * w);
        y * y * y * (10.0 - 15.0 * y + 6.0 * y * y)
    }

    #[test]
    fn step_values() {
        assert_eq!(u0_step(0.5, K), 0.0);
        assert_eq!(u0_step(K, K), 0.5);
        assert_eq!(u0_step(2.0, K), 1.0);
    }

    #[test]
    fn h5_interpolation_conditions() {
        for w in [0.1, 0.01] {
            assert!(h5_eval(K - w, K, w).unwrap().abs() <= 1e-12);
            assert!((h5_eval(K + w, K, w).unwrap() - 1.0).abs() <= 1e-12);
            assert!((h5_eval(K, K, w).unwrap() - 0.5).abs() <= 1e-12);
            for x in [K - w, K + w] {
                assert!(h5_deriv1(x, K, w).unwrap().abs() <= 1e-10 / w);
                assert!(h5_deriv2(x, K, w).unwrap().abs() <= 1e-10 / (w * w));
            }
        }
    }

    #[test]
    fn h5_endpoint_derivatives_by_finite_differences() {
        let w = 0.1;
        let h = 1e-7;
        // one-sided differences into the band
        let d_lo = (h5_eval(K - w + h, K, w).unwrap() - h5_eval(K - w, K, w).unwrap()) / h;
        let d_hi = (h5_eval(K + w, K, w).unwrap() - h5_eval(K + w - h, K, w).unwrap()) / h;
        assert!(d_lo.abs() <= 1e-9);
        assert!(d_hi.abs() <= 1e-9);
    }

    #[test]
    fn h5_matches_smoothstep_and_centered_differences() {
        let w = 0.05;
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..200 {
            let x = rng.random_range((K - w)..(K + w));
            let v = h5_eval(x, K, w).unwrap();
            assert!((v - smoothstep(x, w)).abs() <= 1e-12);
            let h = 1e-6;
            if x - h > K - w && x + h < K + w {
                let d1_fd = (h5_eval(x + h, K, w).unwrap() - h5_eval(x - h, K, w).unwrap()) / (2.0 * h);
                assert!((h5_deriv1(x, K, w).unwrap() - d1_fd).abs() <= 1e-4);
                let d2_fd = (h5_eval(x + h, K, w).unwrap() - 2.0 * v + h5_eval(x - h, K, w).unwrap()) / (h * h);
                assert!((h5_deriv2(x, K, w).unwrap() - d2_fd).abs() <= 1e-2 / w);
            }
        }
    }

    #[test]
    fn h5_monotone_and_point_symmetric() {
        let w = 0.1;
        let n = 2001;
        let mut prev = -1.0;
        for i in 0..n {
            let d = -w + 2.0 * w * (i as f64) / ((n - 1) as f64);
            let v = h5_eval(K + d, K, w).unwrap();
            assert!(v >= prev - 1e-14, "dip at offset {d}");
            prev = v;
            let mirrored = h5_eval(K - d, K, w).unwrap();
            assert!((v + mirrored - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn certify_bounds() {
        for w in [0.1, 0.01] {
            let rep = h5_certify(K, w, 10_000).unwrap();
            assert!(rep.all_hold(), "{rep:?}");
            // the band image is [0, 1], much sharper than the certified 10
            assert!(rep.sup_h5 <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn certify_degenerate_three_points() {
        let rep = h5_certify(K, 0.2, 3).unwrap();
        assert!(rep.all_hold());
        assert!(h5_certify(K, 0.2, 2).is_err());
    }

    #[test]
    fn smoothed_profile_equals_step_outside_band() {
        let prof = InitialProfile::Smoothed {
            strike: K,
            half_width: 0.1,
        };
        for x in [0.0, 0.85, 1.15, 4.0] {
            assert_eq!(prof.eval(x), u0_step(x, K));
        }
        assert!(h5_eval(0.85, K, 0.1).is_err());
    }
}
