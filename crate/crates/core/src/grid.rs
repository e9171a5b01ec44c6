//! Spatial mesh on `[0, b]` and nodal solution fields.

use crate::error::Error;

/// Grid spacing mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridKind {
    Uniform,
    /// Uniform band around the strike, spacing growing geometrically outside.
    Graded { ratio: f64 },
}

/// Strictly increasing nodes `x_0 = 0 < ... < x_N = b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    nodes: Vec<f64>,
}

impl Grid {
    pub fn uniform(n_nodes: usize, b: f64) -> Result<Self, Error> {
        if n_nodes < 8 {
            return Err(Error::config("nx", format!("need at least 8 nodes, got {n_nodes}")));
        }
        if !(b.is_finite() && b > 0.0) {
            return Err(Error::config("b", format!("must be > 0, got {b}")));
        }
        let n = n_nodes - 1;
        let mut nodes: Vec<f64> = (0..=n).map(|i| b * (i as f64) / (n as f64)).collect();
        nodes[0] = 0.0;
        nodes[n] = b;
        Ok(Grid { nodes })
    }

    /// Graded mesh: at least a quarter of the nodes sit uniformly inside the
    /// band `[K - 2w, K + 2w]`; outside, spacings grow geometrically by
    /// `ratio` and are rescaled to land exactly on `0` and `b`.
    pub fn graded(n_nodes: usize, b: f64, strike: f64, band_half_width: f64, ratio: f64) -> Result<Self, Error> {
        if n_nodes < 32 {
            return Err(Error::config("nx", format!("graded mode needs at least 32 nodes, got {n_nodes}")));
        }
        if !(ratio > 1.0 && ratio <= 2.0) {
            return Err(Error::config("grade_ratio", format!("must lie in (1, 2], got {ratio}")));
        }
        let w2 = 2.0 * band_half_width;
        let (lo, hi) = (strike - w2, strike + w2);
        if !(lo > 0.0 && hi < b) {
            return Err(Error::config(
                "eps",
                format!("graded band [{lo}, {hi}] must stay inside (0, {b})"),
            ));
        }
        let n_band = ((n_nodes as f64) * 0.25).ceil() as usize;
        let n_band = n_band.max(17).min(n_nodes - 8);
        let h_band = 2.0 * w2 / ((n_band - 1) as f64);

        let m_total = n_nodes - n_band; // intervals to distribute outside
        let m_left = ((m_total as f64) * lo / (lo + (b - hi))).round() as usize;
        let m_left = m_left.clamp(4, m_total - 4);
        let m_right = m_total - m_left;

        let side = |len: f64, m: usize| -> Vec<f64> {
            // spacings h_band * ratio^(i+1), rescaled so they sum to len
            let mut hs: Vec<f64> = (0..m).map(|i| h_band * ratio.powi(i as i32 + 1)).collect();
            let sum: f64 = hs.iter().sum();
            for h in &mut hs {
                *h *= len / sum;
            }
            hs
        };

        let mut nodes = Vec::with_capacity(n_nodes);
        // left side: from 0 up to lo
        let left = side(lo, m_left);
        let mut x = lo;
        let mut left_nodes: Vec<f64> = Vec::with_capacity(m_left);
        for h in &left {
            x -= h;
            left_nodes.push(x);
        }
        left_nodes.reverse();
        left_nodes[0] = 0.0;
        nodes.extend(left_nodes);
        // band
        for i in 0..n_band {
            nodes.push(lo + w2 * 2.0 * (i as f64) / ((n_band - 1) as f64));
        }
        // right side: from hi up to b
        let right = side(b - hi, m_right);
        let mut x = hi;
        for h in &right {
            x += h;
            nodes.push(x);
        }
        let n = nodes.len();
        nodes[n - 1] = b;
        debug_assert_eq!(n, n_nodes);
        for w in nodes.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::config("nx", "graded grid construction produced non-increasing nodes"));
            }
        }
        Ok(Grid { nodes })
    }

    /// Wraps an explicit node list; must be strictly increasing and start
    /// at zero.
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self, Error> {
        if nodes.len() < 3 {
            return Err(Error::Precondition("grid needs at least 3 nodes".into()));
        }
        if nodes[0] != 0.0 {
            return Err(Error::Precondition(format!("first node must be 0, got {}", nodes[0])));
        }
        if !nodes.windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::Precondition("grid nodes must be strictly increasing".into()));
        }
        Ok(Grid { nodes })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn b(&self) -> f64 {
        *self.nodes.last().expect("nonempty grid")
    }

    /// Number of nodes inside `[lo, hi]`.
    pub fn count_in(&self, lo: f64, hi: f64) -> usize {
        self.nodes.iter().filter(|&&x| x >= lo && x <= hi).count()
    }
}

/// Nodal values of the Delta field at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionField {
    pub values: Vec<f64>,
    pub time: f64,
}

impl SolutionField {
    pub fn new(values: Vec<f64>, time: f64) -> Self {
        SolutionField { values, time }
    }

    /// Enforces the Dirichlet data `u(0) = 0`, `u(b) = 1`.
    pub fn pin_boundaries(&mut self) {
        if let Some(first) = self.values.first_mut() {
            *first = 0.0;
        }
        if let Some(last) = self.values.last_mut() {
            *last = 1.0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_endpoints_exact() {
        let g = Grid::uniform(801, 4.0).unwrap();
        assert_eq!(g.len(), 801);
        assert_eq!(g.nodes()[0], 0.0);
        assert_eq!(g.b(), 4.0);
        let h = g.nodes()[1] - g.nodes()[0];
        assert!((h - 0.005).abs() < 1e-12);
    }

    #[test]
    fn graded_counts_and_band_share() {
        let (n, b, k, w) = (801, 4.0, 1.0, 0.05);
        let g = Grid::graded(n, b, k, w, 1.05).unwrap();
        assert_eq!(g.len(), n);
        assert_eq!(g.nodes()[0], 0.0);
        assert_eq!(g.b(), b);
        for pair in g.nodes().windows(2) {
            assert!(pair[1] > pair[0]);
        }
        let in_band = g.count_in(k - 2.0 * w, k + 2.0 * w);
        assert!(
            in_band * 5 >= n,
            "only {in_band} of {n} nodes inside the 2w band"
        );
    }

    #[test]
    fn graded_resolves_small_band() {
        let g = Grid::graded(801, 4.0, 1.0, 1e-3, 1.05).unwrap();
        assert!(g.count_in(1.0 - 1e-3, 1.0 + 1e-3) >= 8);
    }

    #[test]
    fn graded_rejects_band_outside_domain() {
        assert!(Grid::graded(101, 4.0, 1.0, 0.6, 1.05).is_err());
        assert!(Grid::graded(101, 4.0, 1.0, 0.05, 1.0).is_err());
    }

    #[test]
    fn pinning() {
        let mut f = SolutionField::new(vec![0.3; 5], 0.0);
        f.pin_boundaries();
        assert_eq!(f.values[0], 0.0);
        assert_eq!(f.values[4], 1.0);
    }
}
