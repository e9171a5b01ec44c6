//! Conservative finite-volume discretization of the divergence-form equation:
//! flux-based nonlinear diffusion, upwinded advection `(r - q) x u_x` and
//! reaction `-q u` on a (possibly nonuniform) node-centered mesh.
//!
//! Faces sit midway between nodes; the face flux is
//! `F_{i+1/2} = a0(x_{i+1/2}, t, s_{i+1/2}) * s_{i+1/2}` with the secant slope
//! `s_{i+1/2} = (u_{i+1} - u_i)/(x_{i+1} - x_i)`. Evaluating the coefficient
//! at the face with the face slope keeps the scheme conservative and the
//! Jacobian exactly tridiagonal.

use crate::error::Error;
use crate::model::{diffusion_coeff, MarketParams};

/// Tridiagonal matrix; `lower[0]` and `upper[n-1]` are ignored.
#[derive(Debug, Clone)]
pub struct Tridiagonal {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Tridiagonal {
    pub fn zeros(n: usize) -> Self {
        Tridiagonal {
            lower: vec![0.0; n],
            diag: vec![0.0; n],
            upper: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Thomas elimination; errors on a vanishing pivot.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>, Error> {
        let n = self.len();
        debug_assert_eq!(rhs.len(), n);
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut pivot = self.diag[0];
        if pivot.abs() < 1e-300 {
            return Err(Error::SingularMatrix { row: 0 });
        }
        c[0] = self.upper[0] / pivot;
        d[0] = rhs[0] / pivot;
        for i in 1..n {
            pivot = self.diag[i] - self.lower[i] * c[i - 1];
            if pivot.abs() < 1e-300 {
                return Err(Error::SingularMatrix { row: i });
            }
            if i < n - 1 {
                c[i] = self.upper[i] / pivot;
            }
            d[i] = (rhs[i] - self.lower[i] * d[i - 1]) / pivot;
        }
        let mut x = d;
        for i in (0..n - 1).rev() {
            x[i] -= c[i] * x[i + 1];
        }
        Ok(x)
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut acc = self.diag[i] * x[i];
            if i > 0 {
                acc += self.lower[i] * x[i - 1];
            }
            if i + 1 < n {
                acc += self.upper[i] * x[i + 1];
            }
            y[i] = acc;
        }
        y
    }
}

/// Diffusive flux through every interior face.
pub fn face_fluxes(x: &[f64], u: &[f64], t: f64, market: &MarketParams, eps: f64) -> Vec<f64> {
    let nf = x.len() - 1;
    let mut fluxes = Vec::with_capacity(nf);
    for i in 0..nf {
        let dx = x[i + 1] - x[i];
        let s = (u[i + 1] - u[i]) / dx;
        let xf = 0.5 * (x[i] + x[i + 1]);
        fluxes.push(diffusion_coeff(xf, t, s, market, eps) * s);
    }
    fluxes
}

/// Per-node time rates of the semidiscrete system; boundary entries are zero
/// (their rows become identity rows in the implicit step).
pub fn semidiscrete_rhs(x: &[f64], u: &[f64], t: f64, market: &MarketParams, eps: f64) -> Vec<f64> {
    let n = x.len();
    debug_assert_eq!(u.len(), n);
    let fluxes = face_fluxes(x, u, t, market, eps);
    let rq = market.r - market.q;
    let mut rate = vec![0.0; n];
    for i in 1..n - 1 {
        let h = 0.5 * (x[i + 1] - x[i - 1]);
        let mut r = (fluxes[i] - fluxes[i - 1]) / h;
        let c = rq * x[i];
        // upwind: information travels toward smaller x when c > 0, so take
        // the forward slope there
        let slope = if c >= 0.0 {
            (u[i + 1] - u[i]) / (x[i + 1] - x[i])
        } else {
            (u[i] - u[i - 1]) / (x[i] - x[i - 1])
        };
        r += c * slope - market.q * u[i];
        rate[i] = r;
    }
    rate
}

/// Analytic derivative of [`semidiscrete_rhs`] with respect to the nodal
/// values. Boundary rows are zero. The flux derivative carries the chain
/// term from the slope dependence of the coefficient:
/// `dF/ds = a0(s) + 0.5 sigma^2 e^{rt} a^2 x_f^4 s`.
pub fn jacobian(x: &[f64], u: &[f64], t: f64, market: &MarketParams, eps: f64) -> Tridiagonal {
    let n = x.len();
    let mut jac = Tridiagonal::zeros(n);
    let s2 = market.sigma * market.sigma;
    let ea2 = (market.r * t).exp() * market.a * market.a;
    let rq = market.r - market.q;
    let dflux_ds = |i: usize| -> f64 {
        let dx = x[i + 1] - x[i];
        let s = (u[i + 1] - u[i]) / dx;
        let xf = 0.5 * (x[i] + x[i + 1]);
        let xf2 = xf * xf;
        diffusion_coeff(xf, t, s, market, eps) + 0.5 * s2 * ea2 * xf2 * xf2 * s
    };
    for i in 1..n - 1 {
        let h = 0.5 * (x[i + 1] - x[i - 1]);
        let dxp = x[i + 1] - x[i];
        let dxm = x[i] - x[i - 1];
        let fp = dflux_ds(i) / dxp;
        let fm = dflux_ds(i - 1) / dxm;
        jac.upper[i] = fp / h;
        jac.lower[i] = fm / h;
        jac.diag[i] = -(fp + fm) / h - market.q;
        let c = rq * x[i];
        if c >= 0.0 {
            jac.upper[i] += c / dxp;
            jac.diag[i] -= c / dxp;
        } else {
            jac.diag[i] += c / dxm;
            jac.lower[i] -= c / dxm;
        }
    }
    jac
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn market(a: f64, q: f64) -> MarketParams {
        MarketParams {
            sigma: 0.2,
            r: 0.1,
            q,
            a,
            strike: 1.0,
            horizon: 0.5,
        }
    }

    #[test]
    fn constant_field_rate_is_reaction_only() {
        let m = market(0.02, 0.07);
        let g = Grid::uniform(64, 4.0).unwrap();
        let c = 0.37;
        let u = vec![c; 64];
        let rate = semidiscrete_rhs(g.nodes(), &u, 0.2, &m, 1e-3);
        for &r in &rate[1..63] {
            assert!((r + m.q * c).abs() <= 1e-13, "rate {r}");
        }
    }

    #[test]
    fn linear_field_matches_hand_expansion() {
        // u = x/b, a = 0, eps = 0, q = 0: rate_i = (sigma^2 + r) x_i / b on a
        // uniform grid
        let m = market(0.0, 0.0);
        let b = 4.0;
        let g = Grid::uniform(101, b).unwrap();
        let u: Vec<f64> = g.nodes().iter().map(|&x| x / b).collect();
        let rate = semidiscrete_rhs(g.nodes(), &u, 0.3, &m, 0.0);
        for (i, &x) in g.nodes().iter().enumerate().take(100).skip(1) {
            let expect = (m.sigma * m.sigma + m.r) * x / b;
            assert!(
                ((rate[i] - expect) / expect).abs() <= 1e-12,
                "node {i}: {} vs {expect}",
                rate[i]
            );
        }
    }

    #[test]
    fn jacobian_is_field_independent_in_linear_limit() {
        let m = market(0.0, 0.03);
        let g = Grid::uniform(50, 4.0).unwrap();
        let u1: Vec<f64> = g.nodes().iter().map(|&x| (x / 4.0).powi(2)).collect();
        let u2: Vec<f64> = g.nodes().iter().map(|&x| 0.5 + 0.1 * x).collect();
        let j1 = jacobian(g.nodes(), &u1, 0.1, &m, 1e-3);
        let j2 = jacobian(g.nodes(), &u2, 0.1, &m, 1e-3);
        for i in 0..50 {
            assert_eq!(j1.diag[i], j2.diag[i]);
            assert_eq!(j1.lower[i], j2.lower[i]);
            assert_eq!(j1.upper[i], j2.upper[i]);
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let m = market(0.02, 0.05);
        let g = Grid::uniform(40, 4.0).unwrap();
        let mut rng = StdRng::seed_from_u64(11);
        let u: Vec<f64> = g
            .nodes()
            .iter()
            .map(|&x| (x / 4.0) + 0.05 * (3.0 * x).sin() + 0.01 * rng.random_range(-1.0..1.0))
            .collect();
        let t = 0.25;
        let eps = 1e-3;
        let jac = jacobian(g.nodes(), &u, t, &m, eps);
        let base = semidiscrete_rhs(g.nodes(), &u, t, &m, eps);
        let dh = 1e-7;
        for j in 0..40 {
            let mut up = u.clone();
            up[j] += dh;
            let pert = semidiscrete_rhs(g.nodes(), &up, t, &m, eps);
            for i in 1..39 {
                let fd = (pert[i] - base[i]) / dh;
                let an = if j + 1 == i {
                    jac.lower[i]
                } else if j == i {
                    jac.diag[i]
                } else if j == i + 1 {
                    jac.upper[i]
                } else {
                    0.0
                };
                let scale = an.abs().max(1.0);
                assert!(
                    (fd - an).abs() / scale <= 1e-6,
                    "d rate[{i}]/d u[{j}]: fd {fd} vs analytic {an}"
                );
            }
        }
    }

    #[test]
    fn interior_row_sums_vanish_without_reaction_and_advection() {
        // q = 0, r = q kills advection; row sums of the Jacobian then express
        // discrete conservation
        let mut m = market(0.02, 0.0);
        m.r = 0.0;
        let g = Grid::uniform(64, 4.0).unwrap();
        let u: Vec<f64> = g.nodes().iter().map(|&x| x / 4.0).collect();
        let jac = jacobian(g.nodes(), &u, 0.0, &m, 1e-3);
        for i in 2..62 {
            let row_sum = jac.lower[i] + jac.diag[i] + jac.upper[i];
            let scale = jac.diag[i].abs().max(1.0);
            assert!(row_sum.abs() / scale <= 1e-12, "row {i}: {row_sum}");
        }
    }

    #[test]
    fn discrete_conservation_telescopes() {
        // with q = 0 and advection off, sum_i h_i rate_i = F_{N-1/2} - F_{1/2}
        let mut m = market(0.02, 0.0);
        m.r = 0.0;
        let g = Grid::uniform(80, 4.0).unwrap();
        let x = g.nodes();
        let u: Vec<f64> = x.iter().map(|&xi| (xi / 4.0).powi(3)).collect();
        let t = 0.0;
        let eps = 1e-3;
        let rate = semidiscrete_rhs(x, &u, t, &m, eps);
        let fluxes = face_fluxes(x, &u, t, &m, eps);
        let total: f64 = (1..79)
            .map(|i| 0.5 * (x[i + 1] - x[i - 1]) * rate[i])
            .sum();
        let expect = fluxes[78] - fluxes[0];
        assert!((total - expect).abs() <= 1e-13 * expect.abs().max(1.0));
    }

    #[test]
    fn face_coefficient_keeps_viscosity_floor() {
        let m = market(0.02, 0.0);
        let g = Grid::uniform(64, 4.0).unwrap();
        let x = g.nodes();
        let eps = 1e-3;
        // any nondecreasing field has nonnegative face slopes
        let u: Vec<f64> = x.iter().map(|&xi| (xi / 4.0).sqrt()).collect();
        for i in 0..63 {
            let dx = x[i + 1] - x[i];
            let s = (u[i + 1] - u[i]) / dx;
            let xf = 0.5 * (x[i] + x[i + 1]);
            assert!(diffusion_coeff(xf, 0.1, s, &m, eps) >= eps);
        }
    }

    #[test]
    fn degenerate_left_face_never_divides_by_x() {
        // eps = 0: the face next to x0 = 0 sees the coefficient at x_{1/2} > 0
        let m = market(0.0, 0.0);
        let g = Grid::uniform(64, 4.0).unwrap();
        let u: Vec<f64> = g.nodes().iter().map(|&x| x / 4.0).collect();
        let rate = semidiscrete_rhs(g.nodes(), &u, 0.0, &m, 0.0);
        assert!(rate.iter().all(|r| r.is_finite()));
    }

    #[test]
    fn thomas_solves_spd_system() {
        let n = 50;
        let mut t = Tridiagonal::zeros(n);
        for i in 0..n {
            t.diag[i] = 2.5;
            if i > 0 {
                t.lower[i] = -1.0;
            }
            if i + 1 < n {
                t.upper[i] = -1.0;
            }
        }
        let mut rng = StdRng::seed_from_u64(3);
        let x_true: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let rhs = t.mul_vec(&x_true);
        let x = t.solve(&rhs).unwrap();
        for i in 0..n {
            assert!((x[i] - x_true[i]).abs() <= 1e-12);
        }
    }
}
