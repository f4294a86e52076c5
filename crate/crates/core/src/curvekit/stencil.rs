//! Finite-difference weights on the uniform sample grid.

use super::Topology;

/// Accuracy order of the stencils used to differentiate sampled points.
///
/// Only curves given as point sets (evolved curves) go through these; curves
/// given by expressions are differentiated with jets.
pub const POINT_DERIVATIVE_ACCURACY: usize = 6;

/// Fornberg's recursion: weights for derivatives `0..=max_order` at `z`
/// using nodes `xs`. Returns `w[d][j]`.
pub fn fornberg_weights(z: f64, xs: &[f64], max_order: usize) -> Vec<Vec<f64>> {
    let n = xs.len();
    let mut c = vec![vec![0.0; n]; max_order + 1];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(max_order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - z;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// One derivative order: a centred stencil for the interior plus shifted
/// stencils near open ends.
#[derive(Debug, Clone)]
struct OrderStencils {
    half_width: usize,
    /// weights in index units, already divided by h^m
    central: Vec<f64>,
    /// `left[i]` is the stencil for sample `i < half_width`, nodes `0..width`
    left: Vec<Vec<f64>>,
    /// `right[k]` is for sample `n - 1 - k`, nodes `n - width..n`
    right: Vec<Vec<f64>>,
}

/// Applies derivatives of orders `1..=max_order` to grid data.
#[derive(Debug, Clone)]
pub struct Differentiator {
    samples: usize,
    topology: Topology,
    orders: Vec<OrderStencils>,
}

impl Differentiator {
    pub fn new(samples: usize, topology: Topology, h: f64, max_order: usize) -> Self {
        Self::with_accuracy(samples, topology, h, max_order, POINT_DERIVATIVE_ACCURACY)
    }

    pub fn with_accuracy(
        samples: usize,
        topology: Topology,
        h: f64,
        max_order: usize,
        accuracy: usize,
    ) -> Self {
        let orders = (1..=max_order)
            .map(|m| {
                let half_width = (accuracy + m - 1) / 2;
                let width = 2 * half_width + 1;
                assert!(width <= samples, "too few samples for a derivative of order {m}");
                let scale = h.powi(m as i32);
                let offsets: Vec<f64> =
                    (0..width).map(|j| j as f64 - half_width as f64).collect();
                let central = fornberg_weights(0.0, &offsets, m)[m].iter().map(|w| w / scale).collect();
                let nodes: Vec<f64> = (0..width).map(|j| j as f64).collect();
                let (mut left, mut right) = (Vec::new(), Vec::new());
                for i in 0..half_width {
                    left.push(
                        fornberg_weights(i as f64, &nodes, m)[m].iter().map(|w| w / scale).collect(),
                    );
                    let z = (width - 1 - i) as f64;
                    right.push(fornberg_weights(z, &nodes, m)[m].iter().map(|w| w / scale).collect());
                }
                OrderStencils { half_width, central, left, right }
            })
            .collect();
        Self { samples, topology, orders }
    }

    pub fn max_order(&self) -> usize {
        self.orders.len()
    }

    /// `order`-th derivative at sample `i` of data read through `get`.
    pub fn apply<T>(&self, order: usize, i: usize, get: impl Fn(usize) -> T) -> T
    where
        T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
    {
        let st = &self.orders[order - 1];
        let n = self.samples;
        let hw = st.half_width;
        let combine = |weights: &[f64], first: usize, wrap: bool| {
            let idx = |j: usize| if wrap { (first + j) % n } else { first + j };
            let mut acc = get(idx(0)) * weights[0];
            for (j, w) in weights.iter().enumerate().skip(1) {
                acc = acc + get(idx(j)) * *w;
            }
            acc
        };
        match self.topology {
            Topology::Closed => combine(&st.central, (i + n - hw) % n, true),
            Topology::Open => {
                if i < hw {
                    combine(&st.left[i], 0, false)
                } else if i + hw >= n {
                    combine(&st.right[n - 1 - i], n - (2 * hw + 1), false)
                } else {
                    combine(&st.central, i - hw, false)
                }
            }
        }
    }
}
