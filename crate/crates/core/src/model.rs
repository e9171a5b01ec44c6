//! Model constants and the coefficient/operator algebra of the Delta equation.

use crate::error::Error;

/// Market and contract constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketParams {
    /// Historical volatility.
    pub sigma: f64,
    /// Riskless interest rate.
    pub r: f64,
    /// Continuous dividend rate.
    pub q: f64,
    /// Transaction-cost parameter; enters the diffusion through `a^2 x^2 u_x`.
    pub a: f64,
    /// Strike price.
    pub strike: f64,
    /// Time horizon.
    pub horizon: f64,
}

impl MarketParams {
    pub fn validate(&self) -> Result<(), Error> {
        let finite_nonneg = |key: &str, v: f64| -> Result<(), Error> {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::config(key, format!("must be finite and >= 0, got {v}")));
            }
            Ok(())
        };
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::config("sigma", format!("must be > 0, got {}", self.sigma)));
        }
        finite_nonneg("r", self.r)?;
        finite_nonneg("q", self.q)?;
        finite_nonneg("a", self.a)?;
        if !(self.strike.is_finite() && self.strike > 0.0) {
            return Err(Error::config("K", format!("must be > 0, got {}", self.strike)));
        }
        // horizon = 0 is allowed: the trajectory degenerates to the initial
        // profile.
        finite_nonneg("T", self.horizon)?;
        Ok(())
    }
}

/// Spatial truncation of the half line to `[0, b]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainParams {
    /// Right boundary, well beyond the strike.
    pub b: f64,
}

impl DomainParams {
    pub fn validate(&self, market: &MarketParams) -> Result<(), Error> {
        if !(self.b.is_finite() && self.b > market.strike) {
            return Err(Error::config(
                "b",
                format!("must be > K = {}, got {}", market.strike, self.b),
            ));
        }
        Ok(())
    }
}

/// Viscosity and payoff-smoothing parameters.
///
/// The model couples both to one `eps`; the smoothing half-width can be
/// overridden independently for refinement experiments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularizationParams {
    /// Viscosity added to the diffusion coefficient.
    pub eps: f64,
    /// Half-width of the smoothing band `[K - w, K + w]`.
    pub smoothing_width: f64,
}

impl RegularizationParams {
    /// Uses `eps` for both the viscosity and the smoothing half-width.
    pub fn coupled(eps: f64) -> Self {
        RegularizationParams {
            eps,
            smoothing_width: eps,
        }
    }

    pub fn validate(&self, market: &MarketParams, domain: &DomainParams) -> Result<(), Error> {
        if !(self.eps.is_finite() && self.eps > 0.0 && self.eps < market.strike) {
            return Err(Error::config(
                "eps",
                format!("must satisfy 0 < eps < K = {}, got {}", market.strike, self.eps),
            ));
        }
        let w = self.smoothing_width;
        if !(w.is_finite() && w > 0.0) {
            return Err(Error::config("smoothing_width", format!("must be > 0, got {w}")));
        }
        if market.strike - w <= 0.0 || market.strike + w >= domain.b {
            return Err(Error::config(
                "smoothing_width",
                format!(
                    "band [K - w, K + w] = [{}, {}] must stay inside (0, b = {})",
                    market.strike - w,
                    market.strike + w,
                    domain.b
                ),
            ));
        }
        Ok(())
    }
}

/// Regularized diffusion coefficient `a0 = 0.5 x^2 sigma^2 (1 + e^{rt} a^2 x^2 p) + eps`.
#[inline]
pub fn diffusion_coeff(x: f64, t: f64, slope: f64, market: &MarketParams, eps: f64) -> f64 {
    let x2 = x * x;
    0.5 * x2 * market.sigma * market.sigma * (1.0 + (market.r * t).exp() * market.a * market.a * x2 * slope)
        + eps
}

/// Nondivergence-form operator of the Delta equation,
/// `F(x,t,s,p,X) = -(0.5 x^2 sigma^2 (1 + 2 e^{rt} a^2 x^2 p)) X
///  - 2 sigma^2 e^{rt} a^2 x^3 p^2 - (r - q + sigma^2) x p + q s`.
#[inline]
pub fn operator_f(x: f64, t: f64, value: f64, slope: f64, curvature: f64, market: &MarketParams) -> f64 {
    let MarketParams { sigma, r, q, a, .. } = *market;
    let s2 = sigma * sigma;
    let ea2 = (r * t).exp() * a * a;
    let x2 = x * x;
    -(0.5 * x2 * s2 * (1.0 + 2.0 * ea2 * x2 * slope)) * curvature
        - 2.0 * s2 * ea2 * x2 * x * slope * slope
        - (r - q + s2) * x * slope
        + q * value
}

/// Degenerate-ellipticity check of `operator_f` on one ordered pair.
///
/// Verifies `F(.., value_lo, ..) <= F(.., value_hi, ..)` at shared curvature
/// and `F(.., curv_hi) <= F(.., curv_lo)` at shared value, the two
/// monotonicities a comparison principle needs. Requires `value_lo <=
/// value_hi`, `curv_hi >= curv_lo` and a nonnegative diffusion factor
/// `1 + 2 e^{rt} a^2 x^2 slope`. Comparisons carry a tiny relative slack so
/// floating-point cancellation cannot flip a tie.
pub fn check_proper(
    x: f64,
    t: f64,
    slope: f64,
    value_lo: f64,
    value_hi: f64,
    curv_hi: f64,
    curv_lo: f64,
    market: &MarketParams,
) -> bool {
    debug_assert!(value_lo <= value_hi && curv_hi >= curv_lo);
    let f_xhi = operator_f(x, t, value_lo, slope, curv_hi, market);
    let f_xlo = operator_f(x, t, value_lo, slope, curv_lo, market);
    let f_slo = operator_f(x, t, value_lo, slope, curv_hi, market);
    let f_shi = operator_f(x, t, value_hi, slope, curv_hi, market);
    let scale = 1.0 + f_xhi.abs().max(f_xlo.abs()).max(f_shi.abs());
    let slack = 1e-12 * scale;
    f_xhi <= f_xlo + slack && f_slo <= f_shi + slack
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn market() -> MarketParams {
        MarketParams {
            sigma: 0.2,
            r: 0.1,
            q: 0.0,
            a: 0.02,
            strike: 1.0,
            horizon: 0.5,
        }
    }

    #[test]
    fn diffusion_degenerates_to_eps_at_origin() {
        let m = market();
        for p in [-3.0, 0.0, 7.5] {
            assert_eq!(diffusion_coeff(0.0, 0.3, p, &m, 1e-3), 1e-3);
        }
    }

    #[test]
    fn diffusion_linear_limit() {
        let mut m = market();
        m.a = 0.0;
        let x = 1.7;
        let got = diffusion_coeff(x, 0.2, 0.0, &m, 0.0);
        assert!((got - 0.5 * m.sigma * m.sigma * x * x).abs() < 1e-15);
    }

    #[test]
    fn diffusion_worked_example() {
        // sigma=0.2, r=0.1, a=0.02, x=10, t=1, p=0.5, eps=1e-3
        // = 0.5*100*0.04*(1 + e^{0.1}*4e-4*100*0.5) + 1e-3
        let m = MarketParams {
            sigma: 0.2,
            r: 0.1,
            q: 0.0,
            a: 0.02,
            strike: 1.0,
            horizon: 1.0,
        };
        let got = diffusion_coeff(10.0, 1.0, 0.5, &m, 1e-3);
        let independent = 2.045206836723025905; // high-precision evaluation of the same arithmetic
        assert!((got - independent).abs() < 1e-14, "got {got}");
    }

    #[test]
    fn diffusion_floor_above_eps_for_admissible_slopes() {
        let m = market();
        let eps = 1e-3;
        for &x in &[0.1, 1.0, 3.9] {
            for &t in &[0.0, 0.5] {
                let p_min = -1.0 / ((m.r * t).exp() * m.a * m.a * x * x);
                for frac in [1.0, 0.5, 0.0] {
                    let p = p_min * frac;
                    assert!(diffusion_coeff(x, t, p, &m, eps) >= eps - 1e-15);
                }
            }
        }
    }

    #[test]
    fn operator_vanishes_at_zero_arguments() {
        assert_eq!(operator_f(0.0, 0.0, 0.0, 0.0, 0.0, &market()), 0.0);
    }

    #[test]
    fn operator_reaction_term_only() {
        let mut m = market();
        m.q = 0.07;
        assert!((operator_f(0.0, 0.3, 1.0, 0.0, 0.0, &m) - m.q).abs() < 1e-16);
    }

    #[test]
    fn operator_linear_reduction_when_a_is_zero() {
        let mut m = market();
        m.a = 0.0;
        m.q = 0.03;
        let (x, t, s, p, cv) = (1.3, 0.4, 0.8, -0.6, 2.1);
        let s2 = m.sigma * m.sigma;
        let expect = -0.5 * s2 * x * x * cv - (m.r - m.q + s2) * x * p + m.q * s;
        assert!((operator_f(x, t, s, p, cv, &m) - expect).abs() < 1e-14);
    }

    #[test]
    fn value_monotonicity_margin_is_exactly_q() {
        let mut m = market();
        m.q = 0.04;
        let (x, t, p, cv) = (2.0, 0.25, 1.5, -3.0);
        let (s1, s2) = (-0.7, 1.9);
        let d = operator_f(x, t, s2, p, cv, &m) - operator_f(x, t, s1, p, cv, &m);
        assert!((d - m.q * (s2 - s1)).abs() <= 1e-12 * (1.0 + d.abs()));
    }

    #[test]
    fn properness_holds_on_random_quadruples() {
        let m = market();
        let mut rng = StdRng::seed_from_u64(0x5eed);
        for _ in 0..10_000 {
            let x = rng.random_range(0.0..4.0);
            let t = rng.random_range(0.0..0.5);
            let p = rng.random_range(0.0..50.0);
            let mut s = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            s.sort_by(f64::total_cmp);
            let mut cv = [rng.random_range(-100.0..100.0), rng.random_range(-100.0..100.0)];
            cv.sort_by(f64::total_cmp);
            assert!(check_proper(x, t, p, s[0], s[1], cv[1], cv[0], &m));
        }
    }

    #[test]
    fn properness_trivial_at_origin() {
        let m = market();
        // x = 0 kills the curvature dependence entirely.
        let f1 = operator_f(0.0, 0.1, 0.5, 1.0, 100.0, &m);
        let f2 = operator_f(0.0, 0.1, 0.5, 1.0, -100.0, &m);
        assert_eq!(f1, f2);
    }

    /// Expanding the divergence-form right-hand side by hand must reproduce
    /// `-operator_f` (with eps = 0). The flux derivative is taken by centered
    /// differencing of the flux along an analytic test profile.
    #[test]
    fn divergence_form_matches_operator() {
        let m = market();
        let u = |x: f64| 0.5 + 0.4 * (1.3 * x).sin();
        let ux = |x: f64| 0.4 * 1.3 * (1.3 * x).cos();
        let uxx = |x: f64| -0.4 * 1.3 * 1.3 * (1.3 * x).sin();
        let t = 0.37;
        let flux = |x: f64| diffusion_coeff(x, t, ux(x), &m, 0.0) * ux(x);

        let mut rng = StdRng::seed_from_u64(42);
        for _ in 0..5 {
            let x = rng.random_range(0.5..3.5);
            let h = 1e-5;
            let flux_x = (flux(x + h) - flux(x - h)) / (2.0 * h);
            let rhs = flux_x + (m.r - m.q) * x * ux(x) - m.q * u(x);
            let minus_f = -operator_f(x, t, u(x), ux(x), uxx(x), &m);
            let rel = (rhs - minus_f).abs() / minus_f.abs().max(1.0);
            assert!(rel <= 1e-6, "mismatch {rel} at x = {x}");
        }
    }
}
