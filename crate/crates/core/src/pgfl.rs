//! Probability generating functionals `G[z] = E prod z(t_i)`.
//!
//! * [`solve_cluster_pgfl`]: the cluster functional `u(x) = G_c[z_x | 0]`
//!   as the fixed point of `u(x) = z(x) exp(int (u(x+y) - 1) h(y) dy)`;
//! * [`mc_pgfl_cluster`] / [`mc_pgfl_streams`]: Monte Carlo counterparts;
//! * [`renewal_pgfl_truncated`]: the renewal centre on `[0, T]`, summed over
//!   the number of renewals;
//! * [`stationary_pgfl_expansion`]: the stationary RHP through the
//!   factorial-moment expansion of its centre;
//! * [`hawkes_oakes_pgfl`]: the Poisson-centre closed form.
//!
//! Test functions may jump (step functions); every grid built here contains
//! the jump points, and integrands are evaluated with one-sided limits on
//! each cell so that the composite trapezoid rule stays second order.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::cluster::simulate_cluster;
use crate::distributions::{ExcitationKernel, RenewalModel};
use crate::error::{invalid, Result, RhpError};
use crate::events::{Convention, DelaySpec, EventStream};
use crate::renewal::RenewalTable;
use crate::rng::{replicate, Lane};
use crate::stats::mean_and_se;

pub const MAX_ITERATIONS: usize = 10_000;

/// Test function with values in `(0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub enum TestFunction {
    /// `z0` on all of `[0, inf)`; not of bounded support.
    Constant { z0: f64 },
    /// `z0` on `[a, b)`, 1 elsewhere.
    Step { z0: f64, a: f64, b: f64 },
    /// Linear interpolation on the nodes, 1 outside `[nodes[0], last]`.
    Tabulated { nodes: Vec<f64>, values: Vec<f64> },
}

fn check_level(z: f64) -> Result<()> {
    if !(z > 0.0 && z <= 1.0) {
        return Err(invalid("z", format!("values must lie in (0, 1], got {z}")));
    }
    Ok(())
}

impl TestFunction {
    pub fn constant(z0: f64) -> Result<Self> {
        check_level(z0)?;
        Ok(Self::Constant { z0 })
    }

    pub fn step(z0: f64, a: f64, b: f64) -> Result<Self> {
        check_level(z0)?;
        if !(a >= 0.0 && b > a && b.is_finite()) {
            return Err(invalid("z", format!("step needs 0 <= a < b < inf, got [{a}, {b})")));
        }
        Ok(Self::Step { z0, a, b })
    }

    pub fn tabulated(nodes: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 || nodes.len() != values.len() {
            return Err(invalid("z", "tabulated test function needs >= 2 matching nodes and values"));
        }
        if nodes[0] < 0.0 || !nodes.windows(2).all(|w| w[1] > w[0]) || !nodes.iter().all(|x| x.is_finite()) {
            return Err(invalid("z", "nodes must be finite, nonnegative and strictly increasing"));
        }
        for &v in &values {
            check_level(v)?;
        }
        Ok(Self::Tabulated { nodes, values })
    }

    pub fn unit() -> Self {
        Self::Constant { z0: 1.0 }
    }

    /// True for the constant representation, whose `1 - z` does not vanish
    /// outside a bounded set.
    pub fn unbounded_support(&self) -> bool {
        matches!(self, Self::Constant { z0 } if *z0 < 1.0)
    }

    /// Supremum of the set where `z` may differ from its tail value.
    pub fn support_end(&self) -> Option<f64> {
        match self {
            Self::Constant { .. } => None,
            Self::Step { b, .. } => Some(*b),
            Self::Tabulated { nodes, .. } => nodes.last().copied(),
        }
    }

    /// Value of `z` far to the right.
    pub fn tail_value(&self) -> f64 {
        match self {
            Self::Constant { z0 } => *z0,
            _ => 1.0,
        }
    }

    /// Points where `z` may jump or kink.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            Self::Constant { .. } => Vec::new(),
            Self::Step { a, b, .. } => vec![*a, *b],
            Self::Tabulated { nodes, .. } => nodes.clone(),
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        match self {
            Self::Constant { z0 } => *z0,
            Self::Step { z0, a, b } => {
                if *a <= x && x < *b {
                    *z0
                } else {
                    1.0
                }
            }
            Self::Tabulated { nodes, values } => {
                if x < nodes[0] || x > *nodes.last().unwrap() {
                    return 1.0;
                }
                let i = nodes.partition_point(|&n| n <= x).min(nodes.len() - 1).max(1);
                let w = (x - nodes[i - 1]) / (nodes[i] - nodes[i - 1]);
                values[i - 1] + w * (values[i] - values[i - 1])
            }
        }
    }

    /// `z(x-)`.
    pub fn left_limit(&self, x: f64) -> f64 {
        match self {
            Self::Constant { z0 } => *z0,
            Self::Step { z0, a, b } => {
                if *a < x && x <= *b {
                    *z0
                } else {
                    1.0
                }
            }
            Self::Tabulated { nodes, .. } => {
                if x <= nodes[0] {
                    1.0
                } else {
                    self.value(x.min(*nodes.last().unwrap()))
                }
            }
        }
    }

    /// `z(x+)`.
    pub fn right_limit(&self, x: f64) -> f64 {
        match self {
            Self::Tabulated { nodes, .. } if x >= *nodes.last().unwrap() => 1.0,
            _ => self.value(x),
        }
    }

    /// `prod z(t_i)`.
    pub fn product<I: IntoIterator<Item = f64>>(&self, times: I) -> f64 {
        times.into_iter().map(|t| self.value(t)).product()
    }
}

impl FromStr for TestFunction {
    type Err = RhpError;

    /// `const:Z0`, `step:Z0:A:B`, or `tab:X1=V1,X2=V2,...`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || invalid("z", format!("cannot parse `{s}`; expected const:Z0, step:Z0:A:B or tab:X=V,..."));
        let num = |p: &str| p.trim().parse::<f64>().map_err(|_| bad());
        let (head, rest) = s.split_once(':').ok_or_else(bad)?;
        match head.trim() {
            "const" | "constant" => Self::constant(num(rest)?),
            "step" => {
                let parts: Vec<&str> = rest.split(':').collect();
                if parts.len() != 3 {
                    return Err(bad());
                }
                Self::step(num(parts[0])?, num(parts[1])?, num(parts[2])?)
            }
            "tab" | "tabulated" => {
                let mut nodes = Vec::new();
                let mut values = Vec::new();
                for pair in rest.split(',') {
                    let (x, v) = pair.split_once('=').ok_or_else(bad)?;
                    nodes.push(num(x)?);
                    values.push(num(v)?);
                }
                Self::tabulated(nodes, values)
            }
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant { z0 } => write!(f, "const:{z0}"),
            Self::Step { z0, a, b } => write!(f, "step:{z0}:{a}:{b}"),
            Self::Tabulated { nodes, values } => {
                write!(f, "tab:")?;
                for (i, (x, v)) in nodes.iter().zip(values).enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{x}={v}")?;
                }
                Ok(())
            }
        }
    }
}

/// Uniform grid on `[0, end]` with spacing at most `step`, merged with the
/// given breakpoints.
fn merged_grid(end: f64, step: f64, breakpoints: &[f64]) -> Vec<f64> {
    let n = (end / step - 1e-9).ceil().max(1.0) as usize;
    let mut grid: Vec<f64> = (0..=n).map(|k| end * k as f64 / n as f64).collect();
    grid.extend(breakpoints.iter().copied().filter(|&x| x > 0.0 && x < end));
    grid.sort_by(f64::total_cmp);
    let tiny = 1e-12 * end.max(1.0);
    grid.dedup_by(|a, b| (*a - *b).abs() <= tiny);
    grid
}

/// Grid representation of `u(x) = G_c[z_x | 0]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PgflSolution {
    pub grid: Vec<f64>,
    pub u_values: Vec<f64>,
    /// Value of `u` beyond the grid: 1 when `z` has bounded support,
    /// otherwise the scalar fixed point for the tail value of `z`.
    pub tail: f64,
    pub residual: f64,
    pub iterations: usize,
    /// Sup-norm change per iteration.
    pub residual_history: Vec<f64>,
    #[serde(skip)]
    exponent: Vec<f64>,
    #[serde(skip)]
    z_left: Vec<f64>,
    #[serde(skip)]
    z_right: Vec<f64>,
}

impl PgflSolution {
    pub fn end(&self) -> f64 {
        *self.grid.last().unwrap()
    }

    /// `u(x)` at any `x >= 0`; the exponent is interpolated linearly.
    pub fn value(&self, z: &TestFunction, x: f64) -> f64 {
        if x >= self.end() {
            return self.tail;
        }
        let i = self.grid.partition_point(|&g| g <= x).max(1);
        let w = (x - self.grid[i - 1]) / (self.grid[i] - self.grid[i - 1]);
        let e = self.exponent[i - 1] + w * (self.exponent[i] - self.exponent[i - 1]);
        z.value(x) * e.exp()
    }

    pub fn at_origin(&self) -> f64 {
        self.u_values[0]
    }

    fn left(&self, i: usize) -> f64 {
        self.z_left[i] * self.exponent[i].exp()
    }

    fn right(&self, i: usize) -> f64 {
        self.z_right[i] * self.exponent[i].exp()
    }

    /// `int_0^inf (u - 1)`; `-inf` when the tail value is below 1.
    pub fn integral_of_deficit(&self) -> f64 {
        if self.tail < 1.0 {
            return f64::NEG_INFINITY;
        }
        (0..self.grid.len() - 1)
            .map(|j| 0.5 * (self.grid[j + 1] - self.grid[j]) * (self.right(j) - 1.0 + self.left(j + 1) - 1.0))
            .sum()
    }
}

/// Iterates `u_{k+1}(x) = z(x) exp(int_0^inf (u_k(x+y) - 1) h(y) dy)` from
/// `u_0 = 1` until the sup-norm change drops below `tol`.
///
/// The grid covers the support of `1 - z` (or `[0, 1]` for a constant `z`);
/// beyond it `u` equals its tail value, whose contribution is integrated in
/// closed form against the kernel tail. The map contracts with factor
/// `alpha`, so convergence is geometric.
pub fn solve_cluster_pgfl(
    kernel: &ExcitationKernel,
    z: &TestFunction,
    tol: f64,
    grid_step: f64,
) -> Result<PgflSolution> {
    let alpha = kernel.kernel_mass()?;
    if !(tol > 0.0) {
        return Err(invalid("tol", format!("must be positive, got {tol}")));
    }
    let end = z.support_end().unwrap_or(1.0);
    if !(grid_step > 0.0 && grid_step <= end) {
        return Err(invalid("grid_step", format!("must lie in (0, {end}], got {grid_step}")));
    }
    if end / grid_step > 1e5 {
        return Err(invalid("grid_step", "more than 1e5 grid cells"));
    }
    let grid = merged_grid(end, grid_step, &z.breakpoints());
    let n = grid.len();
    let z_point: Vec<f64> = grid.iter().map(|&x| z.value(x)).collect();
    let z_left: Vec<f64> = grid.iter().map(|&x| z.left_limit(x)).collect();
    let z_right: Vec<f64> = grid.iter().map(|&x| z.right_limit(x)).collect();
    let kernel_tail: Vec<f64> = grid.iter().map(|&x| kernel.tail_integral(end - x)).collect();
    let z_tail = z.tail_value();

    let mut exponent = vec![0.0f64; n];
    let mut tail = 1.0;
    let mut history = Vec::new();
    loop {
        let ul: Vec<f64> = (0..n).map(|j| z_left[j] * exponent[j].exp() - 1.0).collect();
        let ur: Vec<f64> = (0..n).map(|j| z_right[j] * exponent[j].exp() - 1.0).collect();
        let next: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| {
                let x = grid[i];
                let mut acc = 0.0;
                for j in i..n - 1 {
                    let w = 0.5 * (grid[j + 1] - grid[j]);
                    acc += w * (ur[j] * kernel.value(grid[j] - x) + ul[j + 1] * kernel.value(grid[j + 1] - x));
                }
                acc + (tail - 1.0) * kernel_tail[i]
            })
            .collect();
        let next_tail = z_tail * (alpha * (tail - 1.0)).exp();
        let mut change = (next_tail - tail).abs();
        for j in 0..n {
            let d = (next[j].exp() - exponent[j].exp()).abs();
            change = change.max(d * z_left[j].max(z_right[j]));
        }
        exponent = next;
        tail = next_tail;
        history.push(change);
        if change < tol {
            break;
        }
        if history.len() >= MAX_ITERATIONS || !change.is_finite() {
            return Err(RhpError::NoConvergence {
                iterations: history.len(),
                residual: change,
            });
        }
    }
    let u_values = (0..n).map(|j| z_point[j] * exponent[j].exp()).collect();
    Ok(PgflSolution {
        grid,
        u_values,
        tail,
        residual: *history.last().unwrap(),
        iterations: history.len(),
        residual_history: history,
        exponent,
        z_left,
        z_right,
    })
}

/// Scalar fixed point `pi = z0 exp(alpha (pi - 1))`, the p.g.f. of the
/// cluster size.
pub fn scalar_fixed_point(alpha: f64, z0: f64, tol: f64) -> f64 {
    let mut p = 1.0;
    for _ in 0..MAX_ITERATIONS {
        let next = z0 * (alpha * (p - 1.0)).exp();
        if (next - p).abs() < tol {
            return next;
        }
        p = next;
    }
    p
}

/// Monte Carlo mean of `prod z(x)` over clusters rooted at `t0`, with its
/// standard error. Replicates run in parallel on independent substreams.
pub fn mc_pgfl_cluster(
    kernel: &ExcitationKernel,
    z: &TestFunction,
    t0: f64,
    reps: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    kernel.kernel_mass()?;
    if reps < 100 {
        return Err(invalid("reps", format!("need at least 100 replicates, got {reps}")));
    }
    let values: Result<Vec<f64>> = replicate(reps, seed, Lane::AUX, |_, rng| {
        Ok(z.product(simulate_cluster(kernel, t0, None, rng)?.times()))
    })
    .into_iter()
    .collect();
    Ok(mean_and_se(&values?))
}

/// Monte Carlo mean of `prod z(t_i)` over complete realizations.
pub fn mc_pgfl_streams(streams: &[EventStream], z: &TestFunction) -> (f64, f64) {
    let values: Vec<f64> = streams.iter().map(|s| z.product(s.times())).collect();
    mean_and_se(&values)
}

type GapDensity<'a> = Box<dyn Fn(f64) -> f64 + 'a>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenewalPgflOptions {
    /// Quadrature spacing; defaults to `T / 2000`.
    pub grid_step: Option<f64>,
    /// Largest acceptable `P(N((0, T]) > n_max)`.
    pub tail_tolerance: f64,
}

impl Default for RenewalPgflOptions {
    fn default() -> Self {
        Self {
            grid_step: None,
            tail_tolerance: 1e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RenewalPgfl {
    pub value: f64,
    /// Contribution of exactly `n` renewals in `(0, T]`, `n = 0..=n_max`.
    pub terms: Vec<f64>,
    /// `P(N((0, T]) > n_max)`, the mass left out of the sum.
    pub tail: f64,
}

/// `G_R[z]` on `[0, T]` as the sum over `n <= n_max` renewals of
/// `int_{0 < s_1 < ... < s_n <= T} prod z(s_i) f(s_1) f(s_2 - s_1) ... (1 - F(T - s_n)) ds`,
/// the `n = 0` term being `1 - F(T)`.
///
/// The ordered integrals are computed by iterated convolution
/// `g_1 = z f`, `g_n = z (g_{n-1} * f)`, so any `n_max` costs
/// `O(n_max grid^2)`. A delayed convention replaces the first gap law; the
/// origin factor `z(0)` is applied when the origin counts as an event. The
/// omitted mass is the probability that renewal `n_max + 1` falls in `[0, T]`.
pub fn renewal_pgfl_truncated(
    model: &RenewalModel,
    z: &TestFunction,
    horizon: f64,
    n_max: usize,
    convention: &Convention,
    options: RenewalPgflOptions,
) -> Result<RenewalPgfl> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(invalid("T", format!("must be positive and finite, got {horizon}")));
    }
    let step = options.grid_step.unwrap_or(horizon / 2000.0);
    if !(step > 0.0 && step <= horizon) || horizon / step > 2e4 {
        return Err(invalid("grid_step", format!("must lie in [T/2e4, T], got {step}")));
    }
    // law of the first gap, its survival at the horizon, and the origin factor
    let (first_density, first_survival, origin): (GapDensity, f64, bool) = match &convention.delay {
        None => (Box::new(|t| model.density(t)), model.survival(horizon), convention.count_origin),
        Some(DelaySpec::AtOrigin) => (Box::new(|t| model.density(t)), model.survival(horizon), true),
        Some(DelaySpec::Stationary) => {
            let m = model.rate()?;
            (
                Box::new(move |t| m * model.survival(t)),
                1.0 - model.equilibrium_cdf(horizon)?,
                convention.count_origin,
            )
        }
        Some(DelaySpec::Law(law)) => {
            let surv = law.survival(horizon);
            (Box::new(move |t| law.density(t)), surv, convention.count_origin)
        }
    };

    let grid = merged_grid(horizon, step, &z.breakpoints());
    let n = grid.len();
    let density: Vec<f64> = grid.iter().map(|&t| model.density(t)).collect();
    let first: Vec<f64> = grid.iter().map(|&t| first_density(t)).collect();
    for (k, v) in density.iter().chain(first.iter()).enumerate() {
        if !v.is_finite() {
            return Err(RhpError::DensityUndefined { t: grid[k % n], value: *v });
        }
    }
    let z_left: Vec<f64> = grid.iter().map(|&x| z.left_limit(x)).collect();
    let z_right: Vec<f64> = grid.iter().map(|&x| z.right_limit(x)).collect();
    let closing: Vec<f64> = grid.iter().map(|&s| model.survival(horizon - s)).collect();
    // rows of f(t_i - t_j), j <= i
    let f_rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (0..=i).map(|j| model.density(grid[i] - grid[j])).collect())
        .collect();

    let cell = |j: usize| 0.5 * (grid[j + 1] - grid[j]);
    let term = |gl: &[f64], gr: &[f64]| -> f64 {
        (0..n - 1)
            .map(|j| cell(j) * (gr[j] * closing[j] + gl[j + 1] * closing[j + 1]))
            .sum()
    };
    let convolve = |gl: &[f64], gr: &[f64]| -> Vec<f64> {
        (0..n)
            .into_par_iter()
            .map(|i| {
                let row = &f_rows[i];
                (0..i)
                    .map(|j| cell(j) * (gr[j] * row[j] + gl[j + 1] * row[j + 1]))
                    .sum()
            })
            .collect()
    };

    let mut terms = vec![first_survival];
    // weighted (z) and unweighted (z = 1) recursions side by side; the
    // unweighted one ends at the density of the (n_max + 1)-th renewal
    let mut base = first.clone();
    let mut gl: Vec<f64> = (0..n).map(|i| z_left[i] * first[i]).collect();
    let mut gr: Vec<f64> = (0..n).map(|i| z_right[i] * first[i]).collect();
    for k in 1..=n_max {
        if k > 1 {
            let conv = convolve(&gl, &gr);
            gl = (0..n).map(|i| z_left[i] * conv[i]).collect();
            gr = (0..n).map(|i| z_right[i] * conv[i]).collect();
        }
        base = convolve(&base, &base);
        terms.push(term(&gl, &gr));
    }
    // P(N > n_max) = P(S_{n_max + 1} <= T), integrated directly so that
    // quadrature error in the terms does not leak into it
    let tail: f64 = (0..n - 1).map(|j| cell(j) * (base[j] + base[j + 1])).sum::<f64>().max(0.0);
    if tail > options.tail_tolerance {
        return Err(RhpError::TailTooLarge {
            tail,
            tolerance: options.tail_tolerance,
        });
    }
    let factor = if origin { z.value(0.0) } else { 1.0 };
    let value = factor * terms.iter().sum::<f64>();
    Ok(RenewalPgfl { value, terms, tail })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpansionResult {
    /// `partial_sums[k]` includes the terms of order `1..=k`.
    pub partial_sums: Vec<f64>,
    pub terms: Vec<f64>,
    /// Magnitude of the last term, used as the truncation estimate.
    pub truncation_estimate: f64,
    /// False when the truncation estimate exceeds the requested tolerance.
    pub converged: bool,
}

impl ExpansionResult {
    pub fn value(&self) -> f64 {
        *self.partial_sums.last().unwrap()
    }
}

/// `G[z]` of the stationary RHP as
/// `1 + sum_k m int_{t_1 < ... < t_k} prod (u(t_i) - 1) phi(t_2 - t_1) ... phi(t_k - t_{k-1}) dt`,
/// where `u(t) = G_c[z | t]` comes from the cluster solution and `phi` from
/// the renewal table. Terms are built by `A_1 = u - 1`,
/// `A_k(t) = (u(t) - 1) int_0^t A_{k-1}(s) phi(t - s) ds`, term `m int A_k`.
pub fn stationary_pgfl_expansion(
    model: &RenewalModel,
    solution: &PgflSolution,
    k_max: usize,
    table: &RenewalTable,
    tolerance: f64,
) -> Result<ExpansionResult> {
    let m = model.rate()?;
    if k_max == 0 || k_max > 50 {
        return Err(invalid("k_max", format!("must lie in 1..=50, got {k_max}")));
    }
    if solution.tail < 1.0 {
        return Err(invalid("z", "the expansion needs a test function of bounded support"));
    }
    if table.horizon() + 1e-9 < solution.end() {
        return Err(invalid(
            "renewal_table",
            format!("horizon {} shorter than the test-function support {}", table.horizon(), solution.end()),
        ));
    }
    let grid = &solution.grid;
    let n = grid.len();
    let dl: Vec<f64> = (0..n).map(|i| solution.left(i) - 1.0).collect();
    let dr: Vec<f64> = (0..n).map(|i| solution.right(i) - 1.0).collect();
    let cell = |j: usize| 0.5 * (grid[j + 1] - grid[j]);
    let integral = |al: &[f64], ar: &[f64]| -> f64 { (0..n - 1).map(|j| cell(j) * (ar[j] + al[j + 1])).sum() };
    let phi_rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (0..=i).map(|j| table.density_at(grid[i] - grid[j])).collect())
        .collect();

    let mut al = dl.clone();
    let mut ar = dr.clone();
    let mut terms = vec![m * integral(&al, &ar)];
    for _ in 2..=k_max {
        let conv: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| {
                let row = &phi_rows[i];
                (0..i).map(|j| cell(j) * (ar[j] * row[j] + al[j + 1] * row[j + 1])).sum()
            })
            .collect();
        al = (0..n).map(|i| dl[i] * conv[i]).collect();
        ar = (0..n).map(|i| dr[i] * conv[i]).collect();
        terms.push(m * integral(&al, &ar));
    }
    let mut partial_sums = vec![1.0];
    for t in &terms {
        partial_sums.push(partial_sums.last().unwrap() + t);
    }
    let truncation_estimate = terms.last().unwrap().abs();
    Ok(ExpansionResult {
        partial_sums,
        terms,
        truncation_estimate,
        converged: truncation_estimate <= tolerance,
    })
}

/// Poisson centre of rate `mu`: `exp(mu int_0^inf (u(s) - 1) ds)`.
/// Zero for a constant `z < 1`, whose deficit integral diverges.
pub fn hawkes_oakes_pgfl(mu: f64, solution: &PgflSolution) -> Result<f64> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(invalid("mu", format!("must be positive and finite, got {mu}")));
    }
    Ok((mu * solution.integral_of_deficit()).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::renewal::renewal_table;
    use crate::rng::replicate;
    use crate::simulate::{simulate_rhp_cluster, simulate_rhp_stationary};
    use proptest::prelude::*;

    fn kernel() -> ExcitationKernel {
        ExcitationKernel::exponential(0.5, 1.0).unwrap()
    }

    #[test]
    fn parses_and_prints_test_functions() {
        let z: TestFunction = "step:0.8:0:2".parse().unwrap();
        assert_eq!(z, TestFunction::Step { z0: 0.8, a: 0.0, b: 2.0 });
        assert_eq!(z.to_string().parse::<TestFunction>().unwrap(), z);
        let t: TestFunction = "tab:0=0.9,1=0.5,2=1".parse().unwrap();
        assert_eq!(t.to_string().parse::<TestFunction>().unwrap(), t);
        assert!((t.value(0.5) - 0.7).abs() < 1e-12);
        assert_eq!(t.value(3.0), 1.0);
        assert!("step:1.2:0:1".parse::<TestFunction>().is_err());
        assert!("step:0.5:2:1".parse::<TestFunction>().is_err());
        assert!("wave:0.5".parse::<TestFunction>().is_err());
        assert!(TestFunction::constant(0.5).unwrap().unbounded_support());
        assert!(!z.unbounded_support());
    }

    #[test]
    fn unit_function_gives_unit_solution() {
        let s = solve_cluster_pgfl(&kernel(), &TestFunction::unit(), 1e-12, 0.01).unwrap();
        assert!(s.u_values.iter().all(|&u| u == 1.0));
        assert_eq!(s.tail, 1.0);
        let step = TestFunction::step(1.0, 0.0, 2.0).unwrap();
        let s = solve_cluster_pgfl(&kernel(), &step, 1e-12, 0.01).unwrap();
        assert!(s.u_values.iter().all(|&u| u == 1.0));
        assert_eq!(hawkes_oakes_pgfl(1.0, &s).unwrap(), 1.0);
    }

    #[test]
    fn constant_function_matches_scalar_fixed_point() {
        let oracle = scalar_fixed_point(0.5, 0.5, 1e-14);
        assert!((oracle - 0.3637).abs() < 1e-4);
        for k in [kernel(), ExcitationKernel::tabulated(vec![0.0, 0.4, 2.0], vec![0.2, 0.6, 0.0]).unwrap()] {
            let oracle = scalar_fixed_point(k.alpha(), 0.5, 1e-14);
            let s = solve_cluster_pgfl(&k, &TestFunction::constant(0.5).unwrap(), 1e-12, 0.001).unwrap();
            assert!((s.at_origin() - oracle).abs() < 1e-6, "{} vs {oracle}", s.at_origin());
            assert!((s.tail - oracle).abs() < 1e-10);
            assert!(s.residual < 1e-12);
            assert_eq!(hawkes_oakes_pgfl(1.0, &s).unwrap(), 0.0);
        }
    }

    #[test]
    fn step_solution_is_one_beyond_support() {
        let z = TestFunction::step(0.8, 0.5, 2.0).unwrap();
        let s = solve_cluster_pgfl(&kernel(), &z, 1e-12, 0.002).unwrap();
        for (x, u) in s.grid.iter().zip(&s.u_values) {
            assert!(*u > 0.0 && *u <= 1.0);
            if *x >= 2.0 {
                assert_eq!(*u, 1.0);
            }
        }
        assert_eq!(s.value(&z, 5.0), 1.0);
    }

    #[test]
    fn residuals_contract() {
        let z = TestFunction::step(0.3, 0.0, 3.0).unwrap();
        let s = solve_cluster_pgfl(&kernel(), &z, 1e-13, 0.003).unwrap();
        for w in s.residual_history.windows(2) {
            if w[0] > 1e-13 {
                assert!(w[1] <= (0.5 + 1e-3) * w[0] + 1e-15, "{w:?}");
            }
        }
    }

    #[test]
    fn solver_converges_under_step_halving() {
        let z = TestFunction::step(0.6, 0.3, 2.0).unwrap();
        let tab = ExcitationKernel::tabulated(vec![0.0, 0.4, 2.0], vec![0.2, 0.6, 0.0]).unwrap();
        let u = |step: f64| solve_cluster_pgfl(&tab, &z, 1e-13, step).unwrap().at_origin();
        let (a, b, c) = (u(0.04), u(0.02), u(0.01));
        let order = ((a - b) / (b - c)).abs().log2();
        assert!(order > 1.5, "observed order {order}");
        assert!((b - c).abs() < 1e-4);
    }

    #[test]
    fn zero_kernel_reduces_to_poisson() {
        let z = TestFunction::step(0.7, 0.5, 2.0).unwrap();
        let s = solve_cluster_pgfl(&ExcitationKernel::zero(), &z, 1e-12, 0.01).unwrap();
        for (x, u) in s.grid.iter().zip(&s.u_values) {
            assert_eq!(*u, z.value(*x));
        }
        let v = hawkes_oakes_pgfl(1.5, &s).unwrap();
        assert!((v - (-1.5 * 0.3 * 1.5f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn solver_matches_monte_carlo() {
        let k = kernel();
        let z = TestFunction::constant(0.5).unwrap();
        let (est, se) = mc_pgfl_cluster(&k, &z, 0.0, 20_000, 1).unwrap();
        assert!((est - scalar_fixed_point(0.5, 0.5, 1e-14)).abs() < 3.0 * se);
        let z = TestFunction::step(0.8, 0.0, 2.0).unwrap();
        let s = solve_cluster_pgfl(&k, &z, 1e-12, 0.002).unwrap();
        for t0 in [0.0, 1.0] {
            let (est, se) = mc_pgfl_cluster(&k, &z, t0, 20_000, 2).unwrap();
            let u = s.value(&z, t0);
            assert!((est - u).abs() < 3.0 * se, "t0={t0}: {est} ± {se} vs {u}");
        }
        let (one, se) = mc_pgfl_cluster(&k, &TestFunction::unit(), 0.0, 100, 3).unwrap();
        assert_eq!((one, se), (1.0, 0.0));
        assert!(mc_pgfl_cluster(&k, &z, 0.0, 99, 3).is_err());
    }

    #[test]
    fn hawkes_oakes_matches_classical_hawkes_simulation() {
        let z = TestFunction::step(0.8, 0.0, 2.0).unwrap();
        let s = solve_cluster_pgfl(&kernel(), &z, 1e-12, 0.002).unwrap();
        let closed = hawkes_oakes_pgfl(1.0, &s).unwrap();
        let model = RenewalModel::exponential(1.0).unwrap();
        let streams = replicate(20_000, 4, Lane::PLAIN, |_, rng| {
            simulate_rhp_cluster(&model, &kernel(), 2.0, &Convention::ordinary(false), rng).unwrap()
        });
        let (est, se) = mc_pgfl_streams(&streams, &z);
        assert!((est - closed).abs() < 3.0 * se, "{est} ± {se} vs {closed}");
    }

    #[test]
    fn renewal_pgfl_exponential_oracle() {
        let model = RenewalModel::exponential(1.0).unwrap();
        let conv = Convention::ordinary(false);
        for (z0, t) in [(0.5, 5.0), (0.9, 2.0), (0.2, 3.0)] {
            let z = TestFunction::constant(z0).unwrap();
            let r = renewal_pgfl_truncated(&model, &z, t, 25, &conv, RenewalPgflOptions::default()).unwrap();
            assert!(r.tail < 1e-5);
            assert!((r.value - (-(1.0 - z0) * t).exp()).abs() < 1e-4, "{} vs {}", r.value, (-(1.0 - z0) * t).exp());
        }
        let z = TestFunction::constant(0.5).unwrap();
        let r = renewal_pgfl_truncated(&model, &z, 5.0, 3, &conv, RenewalPgflOptions::default());
        assert!(matches!(r, Err(RhpError::TailTooLarge { .. })));
        let with_origin = renewal_pgfl_truncated(&model, &z, 2.0, 25, &Convention::ordinary(true), RenewalPgflOptions::default()).unwrap();
        assert!((with_origin.value - 0.5 * (-1.0f64).exp()).abs() < 1e-4);
    }

    #[test]
    fn renewal_pgfl_total_probability_and_short_horizon() {
        let model = RenewalModel::gamma(2.0, 1.0).unwrap();
        let r = renewal_pgfl_truncated(&model, &TestFunction::unit(), 6.0, 20, &Convention::ordinary(false), RenewalPgflOptions::default()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-5);
        let shifted = RenewalModel::tabulated(
            crate::distributions::TabulatedDensity::new(vec![1.0, 2.0, 3.0], vec![1.0, 1.0, 0.0], None).unwrap(),
        )
        .unwrap();
        let z = TestFunction::step(0.4, 0.0, 0.8).unwrap();
        let r = renewal_pgfl_truncated(&shifted, &z, 0.8, 2, &Convention::ordinary(true), RenewalPgflOptions::default()).unwrap();
        assert!((r.value - 0.4).abs() < 1e-12);
        let r = renewal_pgfl_truncated(&shifted, &z, 0.8, 2, &Convention::ordinary(false), RenewalPgflOptions::default()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn renewal_pgfl_matches_simulation_for_gamma() {
        let model = RenewalModel::gamma(2.0, 1.0).unwrap();
        let z = TestFunction::step(0.6, 1.0, 4.0).unwrap();
        for conv in [Convention::ordinary(true), Convention::stationary()] {
            let r = renewal_pgfl_truncated(&model, &z, 5.0, 20, &conv, RenewalPgflOptions::default()).unwrap();
            let streams = replicate(20_000, 5, Lane::PLAIN, |_, rng| {
                crate::renewal::simulate_immigrants(&model, 5.0, &conv, rng).unwrap()
            });
            let (est, se) = mc_pgfl_streams(&streams, &z);
            assert!((est - r.value).abs() < 3.0 * se, "{conv:?}: {est} ± {se} vs {}", r.value);
        }
    }

    #[test]
    fn expansion_reduces_to_hawkes_oakes_for_poisson_centre() {
        let z = TestFunction::step(0.8, 0.0, 2.0).unwrap();
        let s = solve_cluster_pgfl(&kernel(), &z, 1e-12, 0.002).unwrap();
        let closed = hawkes_oakes_pgfl(1.0, &s).unwrap();
        let model = RenewalModel::exponential(1.0).unwrap();
        let table = renewal_table(&model, 2.0, 0.002).unwrap();
        let e = stationary_pgfl_expansion(&model, &s, 8, &table, 1e-6).unwrap();
        let errors: Vec<f64> = e.partial_sums.iter().map(|p| (p - closed).abs()).collect();
        assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
        assert!(errors[8] < 1e-6);
        assert!(e.converged);
        let unit = solve_cluster_pgfl(&kernel(), &TestFunction::unit(), 1e-12, 0.01).unwrap();
        let e = stationary_pgfl_expansion(&model, &unit, 3, &table, 1e-6).unwrap();
        assert_eq!(e.partial_sums, vec![1.0; 4]);
    }

    #[test]
    fn expansion_matches_stationary_simulation_for_gamma() {
        let model = RenewalModel::gamma(2.0, 1.0).unwrap();
        let z = TestFunction::step(0.9, 0.0, 2.0).unwrap();
        let s = solve_cluster_pgfl(&kernel(), &z, 1e-12, 0.002).unwrap();
        let table = renewal_table(&model, 2.0, 0.002).unwrap();
        let e = stationary_pgfl_expansion(&model, &s, 3, &table, 1e-3).unwrap();
        let streams = replicate(40_000, 6, Lane::STATIONARY, |_, rng| {
            simulate_rhp_stationary(&model, &kernel(), 2.0, rng).unwrap()
        });
        let (est, se) = mc_pgfl_streams(&streams, &z);
        assert!((est - e.value()).abs() < 3.0 * se, "{est} ± {se} vs {:?}", e.partial_sums);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn solver_is_monotone_in_z(lo in 0.05f64..0.95, gap in 0.0f64..0.5, a in 0.0f64..1.0, len in 0.2f64..2.0) {
            let hi = (lo + gap).min(1.0);
            let z = TestFunction::step(lo, a, a + len).unwrap();
            let z2 = TestFunction::step(hi, a, a + len).unwrap();
            let s = solve_cluster_pgfl(&kernel(), &z, 1e-10, 0.01).unwrap();
            let s2 = solve_cluster_pgfl(&kernel(), &z2, 1e-10, 0.01).unwrap();
            prop_assert_eq!(&s.grid, &s2.grid);
            for (u, v) in s.u_values.iter().zip(&s2.u_values) {
                prop_assert!(*u <= *v + 1e-12);
                prop_assert!(*u > 0.0 && *v <= 1.0);
            }
        }

        #[test]
        fn solver_residual_below_tolerance(z0 in 0.05f64..1.0, alpha in 0.0f64..0.9, tol_exp in 6i32..12) {
            let tol = 10f64.powi(-tol_exp);
            let k = ExcitationKernel::exponential(alpha, 2.0).unwrap();
            let s = solve_cluster_pgfl(&k, &TestFunction::step(z0, 0.0, 1.0).unwrap(), tol, 0.01).unwrap();
            prop_assert!(s.residual < tol);
        }
    }
}
