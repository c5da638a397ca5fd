//! Piecewise-linear nonnegative functions on a finite grid, zero outside it.
//!
//! Integrals over cells are exact (trapezoid on the nodes), so mass,
//! cumulative integrals and their inverse need no quadrature.

use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinear {
    nodes: Vec<f64>,
    values: Vec<f64>,
    /// `prefix[i]` = integral over `[nodes[0], nodes[i]]`.
    prefix: Vec<f64>,
}

impl PiecewiseLinear {
    pub fn new(nodes: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(invalid("grid", "need at least two nodes"));
        }
        if nodes.len() != values.len() {
            return Err(invalid("grid", "nodes and values differ in length"));
        }
        if nodes[0] < 0.0 || !nodes.iter().all(|x| x.is_finite()) {
            return Err(invalid("grid", "nodes must be finite and nonnegative"));
        }
        if nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("grid", "nodes must be strictly increasing"));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(invalid("grid", "values must be finite and nonnegative"));
        }
        let mut prefix = Vec::with_capacity(nodes.len());
        prefix.push(0.0);
        for i in 1..nodes.len() {
            let cell = 0.5 * (values[i - 1] + values[i]) * (nodes[i] - nodes[i - 1]);
            prefix.push(prefix[i - 1] + cell);
        }
        Ok(Self {
            nodes,
            values,
            prefix,
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn start(&self) -> f64 {
        self.nodes[0]
    }

    pub fn end(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    pub fn last_value(&self) -> f64 {
        *self.values.last().unwrap()
    }

    pub fn total(&self) -> f64 {
        *self.prefix.last().unwrap()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            nodes: self.nodes.clone(),
            values: self.values.iter().map(|v| v * factor).collect(),
            prefix: self.prefix.iter().map(|v| v * factor).collect(),
        }
    }

    /// Index `i` of the cell `[nodes[i], nodes[i+1])` containing `t`.
    fn cell(&self, t: f64) -> usize {
        let k = self.nodes.partition_point(|&x| x <= t);
        k.saturating_sub(1).min(self.nodes.len() - 2)
    }

    fn slope(&self, i: usize) -> f64 {
        (self.values[i + 1] - self.values[i]) / (self.nodes[i + 1] - self.nodes[i])
    }

    pub fn value(&self, t: f64) -> f64 {
        if t < self.start() || t > self.end() || t.is_nan() {
            return 0.0;
        }
        let i = self.cell(t);
        self.values[i] + self.slope(i) * (t - self.nodes[i])
    }

    /// Integral over `[start, t]`.
    pub fn integral_to(&self, t: f64) -> f64 {
        if t <= self.start() {
            return 0.0;
        }
        if t >= self.end() {
            return self.total();
        }
        let i = self.cell(t);
        let d = t - self.nodes[i];
        self.prefix[i] + self.values[i] * d + 0.5 * self.slope(i) * d * d
    }

    /// Integral over `[t, end]`, computed from the right to keep precision
    /// in the upper tail.
    pub fn integral_from(&self, t: f64) -> f64 {
        if t <= self.start() {
            return self.total();
        }
        if t >= self.end() {
            return 0.0;
        }
        let i = self.cell(t);
        let d = t - self.nodes[i];
        let w = self.nodes[i + 1] - self.nodes[i];
        let within = self.values[i] * d + 0.5 * self.slope(i) * d * d;
        let cell = 0.5 * (self.values[i] + self.values[i + 1]) * w;
        (cell - within).max(0.0) + (self.total() - self.prefix[i + 1])
    }

    /// Integral of `s * g(s)` over `[start, t]`.
    pub fn first_moment_to(&self, t: f64) -> f64 {
        let t = t.min(self.end());
        if t <= self.start() {
            return 0.0;
        }
        let mut acc = 0.0;
        for i in 0..self.nodes.len() - 1 {
            let a = self.nodes[i];
            if a >= t {
                break;
            }
            let d = (self.nodes[i + 1].min(t)) - a;
            let (fa, s) = (self.values[i], self.slope(i));
            acc += a * fa * d + (a * s + fa) * d * d / 2.0 + s * d * d * d / 3.0;
        }
        acc
    }

    /// Smallest `t` with `integral_to(t) = target`, for `0 <= target <= total`.
    pub fn inverse_integral(&self, target: f64) -> f64 {
        if target <= 0.0 {
            return self.start();
        }
        if target >= self.total() {
            return self.end();
        }
        let i = self
            .prefix
            .partition_point(|&p| p < target)
            .saturating_sub(1)
            .min(self.nodes.len() - 2);
        let r = target - self.prefix[i];
        let fa = self.values[i];
        let s = self.slope(i);
        // fa*d + s*d^2/2 = r, rationalized root stable for s -> 0 and fa -> 0
        let disc = (fa * fa + 2.0 * s * r).max(0.0);
        let d = 2.0 * r / (fa + disc.sqrt());
        (self.nodes[i] + d).min(self.nodes[i + 1])
    }

    /// Supremum of the function over `[a, b]`.
    pub fn sup_on(&self, a: f64, b: f64) -> f64 {
        let mut best = self.value(a).max(self.value(b));
        let lo = self.nodes.partition_point(|&x| x < a);
        let hi = self.nodes.partition_point(|&x| x <= b);
        for v in &self.values[lo..hi] {
            best = best.max(*v);
        }
        best
    }

    pub fn is_nonincreasing(&self) -> bool {
        self.values.windows(2).all(|w| w[1] <= w[0])
    }
}
