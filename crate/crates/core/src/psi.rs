//! The transaction-cost volatility correction ODE
//! `psi'(A) = (psi + 1) / (2 sqrt(A psi) - A)`, `psi(0) = 0`.
//!
//! The right-hand side is singular at the origin (`psi' ~ |A|^{-2/3}`), so
//! integration starts from a cube-root asymptotic seed at `+-seed_radius` and
//! proceeds outward with an adaptive embedded Runge-Kutta pair. Accepted
//! nodes are cached in a [`PsiTable`] and evaluated in between with
//! monotonicity-limited cubic Hermite interpolation, which keeps the table
//! nondecreasing everywhere.

use crate::error::Error;

/// Default radius below which the asymptotic seed replaces integration.
pub const DEFAULT_SEED_RADIUS: f64 = 1e-8;
/// Default absolute/relative integration tolerance.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Leading asymptotic coefficient `(3/2)^{2/3}` of `psi(A) ~ c A^{1/3}`.
pub fn seed_coeff() -> f64 {
    2.25f64.cbrt()
}

/// Asymptotic start value `sign(A) c |A|^{1/3}`.
///
/// Balancing `psi' ~ c/3 |A|^{-2/3}` against `1 / (2 sqrt(|A psi|))` fixes
/// the exponent 1/3 and `c = (3/2)^{2/3}`; the same constant serves both
/// signs because `A psi >= 0` on both branches.
pub fn psi_seed(a: f64) -> f64 {
    if a == 0.0 {
        return 0.0;
    }
    a.signum() * seed_coeff() * a.abs().cbrt()
}

/// ODE right-hand side; `A psi` is clamped at zero against rounding so the
/// square root stays real on both branches.
#[inline]
fn psi_rhs(a: f64, psi: f64) -> f64 {
    let prod = (a * psi).max(0.0);
    (psi + 1.0) / (2.0 * prod.sqrt() - a)
}

/// One cached sample of the solution together with its exact ODE slope.
#[derive(Debug, Clone, Copy)]
pub struct PsiNode {
    pub a: f64,
    pub psi: f64,
    /// Interpolation slope; ODE slope after monotonicity limiting.
    pub slope: f64,
}

// Dormand-Prince 5(4) tableau.
const DP_C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 6] = [
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DP_E: [f64; 7] = [
    35.0 / 384.0 - 5179.0 / 57600.0,
    0.0,
    500.0 / 1113.0 - 7571.0 / 16695.0,
    125.0 / 192.0 - 393.0 / 640.0,
    -2187.0 / 6784.0 + 92097.0 / 339200.0,
    11.0 / 84.0 - 187.0 / 2100.0,
    -1.0 / 40.0,
];

/// Integrates from `(a0, psi0)` to `a_end`, optionally recording accepted
/// nodes. `max_step` bounds the absolute step size (on top of the adaptive
/// controller) so interpolation between recorded nodes stays tight.
fn integrate_branch(
    a0: f64,
    psi0: f64,
    a_end: f64,
    tol: f64,
    max_step: Option<f64>,
    record: Option<&mut Vec<PsiNode>>,
) -> Result<f64, Error> {
    let dir = (a_end - a0).signum();
    if dir == 0.0 {
        return Ok(psi0);
    }
    let mut a = a0;
    let mut y = psi0;
    let mut f0 = psi_rhs(a, y);
    let mut h = dir * (a0.abs() * 0.1).max(1e-12);
    let mut nodes = record;
    if let Some(ns) = nodes.as_deref_mut() {
        ns.push(PsiNode { a, psi: y, slope: f0 });
    }
    let cap = |a_here: f64| -> f64 {
        let adaptive_cap = (0.05 * a_here.abs()).max(0.05);
        match max_step {
            Some(m) => m.min(adaptive_cap),
            None => adaptive_cap,
        }
    };
    let mut k = [0.0f64; 7];
    loop {
        if (a_end - a) * dir <= 0.0 {
            return Ok(y);
        }
        h = h.clamp(-cap(a), cap(a));
        if (a + h - a_end) * dir > 0.0 {
            h = a_end - a;
        }
        if h.abs() < 1e-15 * a.abs().max(1.0) {
            return Err(Error::OdeIntegration(format!(
                "step controller underflow at A = {a} (h = {h:e})"
            )));
        }
        k[0] = f0;
        for s in 0..6 {
            let mut acc = 0.0;
            for (j, kj) in k.iter().enumerate().take(s + 1) {
                acc += DP_A[s][j] * kj;
            }
            k[s + 1] = psi_rhs(a + DP_C[s + 1] * h, y + h * acc);
        }
        let y5 = y + h * (DP_A[5][0] * k[0] + DP_A[5][2] * k[2] + DP_A[5][3] * k[3] + DP_A[5][4] * k[4] + DP_A[5][5] * k[5]);
        let mut err = 0.0;
        for (j, kj) in k.iter().enumerate() {
            err += DP_E[j] * kj;
        }
        err = (h * err).abs();
        let scale = tol + tol * y.abs().max(y5.abs());
        let ratio = err / scale;
        if !y5.is_finite() {
            h *= 0.25;
            continue;
        }
        if ratio <= 1.0 {
            a += h;
            y = y5;
            f0 = k[6]; // FSAL
            if let Some(ns) = nodes.as_deref_mut() {
                ns.push(PsiNode { a, psi: y, slope: f0 });
            }
        }
        let factor = if ratio > 0.0 { 0.9 * ratio.powf(-0.2) } else { 5.0 };
        h *= factor.clamp(0.2, 5.0);
    }
}

/// One-shot evaluation of `psi(A)` to absolute accuracy about `tol` by
/// adaptive integration from the seed. Returns the seed itself inside the
/// seed radius.
pub fn psi_eval(a: f64, tol: f64) -> Result<f64, Error> {
    if tol <= 0.0 {
        return Err(Error::Precondition(format!("psi_eval needs tol > 0, got {tol}")));
    }
    let sr = DEFAULT_SEED_RADIUS;
    if a.abs() <= sr {
        return Ok(psi_seed(a));
    }
    let a0 = a.signum() * sr;
    integrate_branch(a0, psi_seed(a0), a, tol, None, None)
}

/// Cached, monotone-interpolated solution table covering `[-a_neg_max, a_pos_max]`.
#[derive(Debug, Clone)]
pub struct PsiTable {
    /// Nodes strictly increasing in `a`; the open gap `(-seed_radius,
    /// seed_radius)` is served by the asymptotic seed.
    nodes: Vec<PsiNode>,
    seed_radius: f64,
}

impl PsiTable {
    /// Integrates both branches and caches the accepted nodes.
    pub fn build(a_neg_max: f64, a_pos_max: f64, tol: f64) -> Result<Self, Error> {
        Self::build_with_max_step(a_neg_max, a_pos_max, tol, None)
    }

    /// Same as [`PsiTable::build`] with an explicit cap on the recording step.
    pub fn build_with_max_step(
        a_neg_max: f64,
        a_pos_max: f64,
        tol: f64,
        max_step: Option<f64>,
    ) -> Result<Self, Error> {
        if !(a_neg_max >= 0.0 && a_pos_max >= 0.0 && a_neg_max + a_pos_max > 0.0) {
            return Err(Error::Precondition(
                "PsiTable::build needs nonnegative ranges covering more than a point".into(),
            ));
        }
        if tol <= 0.0 {
            return Err(Error::Precondition(format!("PsiTable::build needs tol > 0, got {tol}")));
        }
        let sr = DEFAULT_SEED_RADIUS;
        let mut neg = Vec::new();
        if a_neg_max > sr {
            integrate_branch(-sr, psi_seed(-sr), -a_neg_max, tol, max_step, Some(&mut neg))?;
        }
        let mut pos = Vec::new();
        if a_pos_max > sr {
            integrate_branch(sr, psi_seed(sr), a_pos_max, tol, max_step, Some(&mut pos))?;
        }
        neg.reverse();
        neg.extend(pos);
        let mut table = PsiTable {
            nodes: neg,
            seed_radius: sr,
        };
        table.limit_slopes();
        Ok(table)
    }

    /// Fritsch-Carlson limiting: clamp each Hermite slope into
    /// `[0, 3 min(adjacent secants)]` so the interpolant is nondecreasing on
    /// every interval. The exact ODE slopes already sit close to the secants,
    /// so the limiter only acts against rounding.
    fn limit_slopes(&mut self) {
        let n = self.nodes.len();
        if n < 2 {
            return;
        }
        let secant = |nodes: &[PsiNode], i: usize| -> f64 {
            ((nodes[i + 1].psi - nodes[i].psi) / (nodes[i + 1].a - nodes[i].a)).max(0.0)
        };
        for i in 0..n {
            let bound = if i == 0 {
                3.0 * secant(&self.nodes, 0)
            } else if i == n - 1 {
                3.0 * secant(&self.nodes, n - 2)
            } else {
                3.0 * secant(&self.nodes, i - 1).min(secant(&self.nodes, i))
            };
            self.nodes[i].slope = self.nodes[i].slope.clamp(0.0, bound);
        }
    }

    pub fn nodes(&self) -> &[PsiNode] {
        &self.nodes
    }

    pub fn seed_radius(&self) -> f64 {
        self.seed_radius
    }

    pub fn covers(&self, a: f64) -> bool {
        if a.abs() <= self.seed_radius {
            return true;
        }
        match (self.nodes.first(), self.nodes.last()) {
            (Some(lo), Some(hi)) => a >= lo.a && a <= hi.a,
            _ => false,
        }
    }

    /// Evaluates the cached solution; seed inside the seed radius, monotone
    /// cubic Hermite between nodes.
    pub fn eval(&self, a: f64) -> Result<f64, Error> {
        if a.abs() <= self.seed_radius {
            return Ok(psi_seed(a));
        }
        if !self.covers(a) {
            return Err(Error::Domain(format!("A = {a} outside the cached table range")));
        }
        let idx = self.nodes.partition_point(|n| n.a <= a);
        // a lies in [nodes[idx-1].a, nodes[idx].a]; idx >= 1 since covers().
        if idx >= self.nodes.len() {
            return Ok(self.nodes[self.nodes.len() - 1].psi);
        }
        let lo = self.nodes[idx - 1];
        let hi = self.nodes[idx];
        // the seed gap: between the last negative node and the first positive
        // node the table is served by the seed, handled above; adjacent nodes
        // here always come from one branch
        let h = hi.a - lo.a;
        let t = (a - lo.a) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        Ok(h00 * lo.psi + h * h10 * lo.slope + h01 * hi.psi + h * h11 * hi.slope)
    }

    /// Largest centered-difference ODE residual
    /// `|psi'_fd (2 sqrt(A psi) - A) - (psi + 1)|` over interior nodes with
    /// `lo <= |A| <= hi`.
    pub fn ode_residual_max(&self, lo: f64, hi: f64) -> f64 {
        let mut worst = 0.0f64;
        for w in self.nodes.windows(3) {
            let [l, c, r] = [w[0], w[1], w[2]];
            if c.a.abs() < lo || c.a.abs() > hi {
                continue;
            }
            // skip the seed gap between branches
            if l.a < 0.0 && r.a > 0.0 {
                continue;
            }
            let dfd = (r.psi - l.psi) / (r.a - l.a);
            let prod = (c.a * c.psi).max(0.0);
            let res = (dfd * (2.0 * prod.sqrt() - c.a) - (c.psi + 1.0)).abs();
            worst = worst.max(res);
        }
        worst
    }
}

/// Outcome of one lemma check.
#[derive(Debug, Clone)]
pub struct LemmaCheck {
    pub name: &'static str,
    pub pass: bool,
    /// Smallest slack observed; negative margins are violations.
    pub worst_margin: f64,
}

/// Sampled certification of the solution's qualitative behaviour.
#[derive(Debug, Clone)]
pub struct CertifyReport {
    pub a_max: f64,
    pub n: usize,
    pub checks: Vec<LemmaCheck>,
}

impl CertifyReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Evaluates `psi` on `n` log-spaced nodes per sign in `[a_max * 1e-8, a_max]`
/// and checks: the limit trend `psi(A)/A -> 1`, `psi(A) -> -1`; the sign
/// brackets `psi >= 0` for `A >= 0` and `-1 < psi <= 0` for `A < 0`;
/// nondecrease; and the affine bound `psi(A) <= 1.1 A + 2.62` for `A >= 0`.
pub fn psi_certify(a_max: f64, n: usize, tol: f64) -> Result<CertifyReport, Error> {
    if !(a_max > 0.0) {
        return Err(Error::Precondition(format!("psi_certify needs A_max > 0, got {a_max}")));
    }
    if n < 2 {
        return Err(Error::Precondition(format!("psi_certify needs n >= 2, got {n}")));
    }
    let table = PsiTable::build(a_max, a_max, tol)?;
    let a_lo = a_max * 1e-8;
    let log_span = (a_max / a_lo).ln();
    let mut pos = Vec::with_capacity(n);
    let mut neg = Vec::with_capacity(n);
    for i in 0..n {
        let f = (i as f64) / ((n - 1) as f64);
        let a = a_lo * (f * log_span).exp();
        let a = a.min(a_max);
        pos.push((a, table.eval(a)?));
        neg.push((-a, table.eval(-a)?));
    }
    neg.reverse(); // ascending in A

    // Lemma: limit trend at the sampled extremes.
    let ratio = pos[n - 1].1 / pos[n - 1].0;
    let neg_end = neg[0].1;
    let margin1 = (0.1 - (ratio - 1.0).abs())
        .min(neg_end + 1.0)
        .min(-0.9 - neg_end);
    // Lemma: sign brackets.
    let mut margin2 = f64::INFINITY;
    for &(_, p) in &pos {
        margin2 = margin2.min(p);
    }
    for &(_, p) in &neg {
        margin2 = margin2.min(p + 1.0).min(-p);
    }
    // Lemma: nondecrease across the merged samples (the origin sits between
    // the branches with psi(0) = 0).
    let mut margin3 = f64::INFINITY;
    let mut prev = f64::NEG_INFINITY;
    for &(_, p) in neg.iter().chain([(0.0, 0.0)].iter()).chain(pos.iter()) {
        if prev > f64::NEG_INFINITY {
            margin3 = margin3.min(p - prev);
        }
        prev = p;
    }
    // Lemma: affine growth bound on the positive branch.
    let mut margin4 = f64::INFINITY;
    for &(a, p) in &pos {
        margin4 = margin4.min(1.1 * a + 2.62 - p);
    }

    let checks = vec![
        LemmaCheck {
            name: "limit_trend",
            pass: margin1 > 0.0,
            worst_margin: margin1,
        },
        LemmaCheck {
            name: "sign_brackets",
            pass: margin2 >= 0.0,
            worst_margin: margin2,
        },
        LemmaCheck {
            name: "nondecreasing",
            pass: margin3 >= -1e-12,
            worst_margin: margin3,
        },
        LemmaCheck {
            name: "affine_bound",
            pass: margin4 >= 0.0,
            worst_margin: margin4,
        },
    ];
    Ok(CertifyReport {
        a_max,
        n,
        checks,
    })
}

/// Uniform samples over `[-a_max, a_max]` for plotting; `n` odd hits `A = 0`
/// exactly.
pub fn figure_samples(table: &PsiTable, a_max: f64, n: usize) -> Result<Vec<(f64, f64)>, Error> {
    if n < 2 {
        return Err(Error::Precondition(format!("figure_samples needs n >= 2, got {n}")));
    }
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let a = -a_max + 2.0 * a_max * (i as f64) / ((n - 1) as f64);
        out.push((a, table.eval(a)?));
    }
    Ok(out)
}
