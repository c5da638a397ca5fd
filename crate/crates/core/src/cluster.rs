//! Satellite clusters: an immigrant at `t0` and all generations of its
//! offspring. Each point independently produces `Poisson(alpha)` children
//! displaced by i.i.d. draws from `h / alpha`, so generation sizes form a
//! Galton–Watson process and the total size follows the Borel–Tanner law.

use std::collections::VecDeque;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::distributions::ExcitationKernel;
use crate::error::{invalid, Result, RhpError};
use crate::stats::{chi_square_gof, mean_and_se, poisson_pmf, ChiSquareResult};

pub const DEFAULT_NODE_CAP: usize = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClusterNode {
    pub time: f64,
    pub generation: u32,
    pub parent: Option<usize>,
}

/// Nodes are stored in generation (breadth-first) order; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterTree {
    pub root_time: f64,
    pub horizon: Option<f64>,
    pub nodes: Vec<ClusterNode>,
}

impl ClusterTree {
    /// Total size `Z-bar`, root included.
    pub fn size(&self) -> usize {
        self.nodes.len()
    }

    /// `Z_n`, the number of generation-`n` nodes.
    pub fn generation_size(&self, n: u32) -> usize {
        self.nodes.iter().filter(|v| v.generation == n).count()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.nodes.iter().map(|v| v.time)
    }
}

/// Simulates `N_c(. | t0)`; with a finite horizon, a node beyond it is
/// dropped together with its whole subtree.
pub fn simulate_cluster<R: Rng + ?Sized>(
    kernel: &ExcitationKernel,
    t0: f64,
    horizon: Option<f64>,
    rng: &mut R,
) -> Result<ClusterTree> {
    simulate_cluster_capped(kernel, t0, horizon, DEFAULT_NODE_CAP, rng)
}

pub fn simulate_cluster_capped<R: Rng + ?Sized>(
    kernel: &ExcitationKernel,
    t0: f64,
    horizon: Option<f64>,
    cap: usize,
    rng: &mut R,
) -> Result<ClusterTree> {
    let alpha = kernel.kernel_mass()?;
    let mut nodes = vec![ClusterNode {
        time: t0,
        generation: 0,
        parent: None,
    }];
    if alpha == 0.0 {
        return Ok(ClusterTree {
            root_time: t0,
            horizon,
            nodes,
        });
    }
    let offspring = Poisson::new(alpha).map_err(|e| invalid("alpha", e.to_string()))?;
    let mut frontier = VecDeque::from([0usize]);
    while let Some(idx) = frontier.pop_front() {
        let parent = nodes[idx];
        let k = offspring.sample(rng) as usize;
        for _ in 0..k {
            let time = parent.time + kernel.sample_displacement_unchecked(rng);
            if horizon.is_some_and(|h| time > h) {
                continue;
            }
            if nodes.len() >= cap {
                return Err(RhpError::NodeCapExceeded { cap });
            }
            nodes.push(ClusterNode {
                time,
                generation: parent.generation + 1,
                parent: Some(idx),
            });
            frontier.push_back(nodes.len() - 1);
        }
    }
    Ok(ClusterTree {
        root_time: t0,
        horizon,
        nodes,
    })
}

/// Truncated Borel–Tanner law of the cluster size together with a check of
/// its generating function against `pi(u) = u exp(alpha (pi(u) - 1))`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterSizePmf {
    pub alpha: f64,
    /// `pmf[n - 1] = P(Z-bar = n)` for `n = 1..=n_max`.
    pub pmf: Vec<f64>,
    /// `1 - sum(pmf)`.
    pub tail: f64,
    /// Largest `|pi(u) - u exp(alpha (pi(u) - 1))|` over `u = 0.1, ..., 0.9`,
    /// with `pi` the truncated generating function.
    pub pgf_residual: f64,
}

impl ClusterSizePmf {
    pub fn prob(&self, n: usize) -> f64 {
        if n == 0 {
            0.0
        } else {
            self.pmf.get(n - 1).copied().unwrap_or(0.0)
        }
    }

    pub fn pgf(&self, u: f64) -> f64 {
        self.pmf
            .iter()
            .enumerate()
            .map(|(i, p)| u.powi(i as i32 + 1) * p)
            .sum()
    }

    pub fn mean(&self) -> f64 {
        self.pmf
            .iter()
            .enumerate()
            .map(|(i, p)| (i + 1) as f64 * p)
            .sum()
    }
}

/// `P(Z-bar = n) = e^{-alpha n} (alpha n)^{n-1} / n!`.
pub fn cluster_size_pmf(alpha: f64, n_max: usize) -> Result<ClusterSizePmf> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid("alpha", format!("cluster_size_pmf needs 0 < alpha < 1, got {alpha}")));
    }
    if n_max == 0 {
        return Err(invalid("n_max", "must be at least 1"));
    }
    let pmf: Vec<f64> = (1..=n_max)
        .map(|n| {
            let nf = n as f64;
            (-alpha * nf + (nf - 1.0) * (alpha * nf).ln() - ln_gamma(nf + 1.0)).exp()
        })
        .collect();
    let tail = (1.0 - pmf.iter().sum::<f64>()).max(0.0);
    let mut out = ClusterSizePmf {
        alpha,
        pmf,
        tail,
        pgf_residual: 0.0,
    };
    out.pgf_residual = (1..=9)
        .map(|k| {
            let u = k as f64 / 10.0;
            let pi = out.pgf(u);
            (pi - u * (alpha * (pi - 1.0)).exp()).abs()
        })
        .fold(0.0, f64::max);
    Ok(out)
}

/// `E[Z-bar] = 1 / (1 - alpha)`.
pub fn mean_cluster_size(alpha: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(RhpError::Supercritical { alpha });
    }
    Ok(1.0 / (1.0 - alpha))
}

/// Empirical `Z_n` over trees simulated without truncation.
pub fn generation_counts(trees: &[ClusterTree], n: u32) -> Result<Vec<usize>> {
    if trees.iter().any(|t| t.horizon.is_some()) {
        return Err(invalid("trees", "generation counts need untruncated clusters"));
    }
    Ok(trees.iter().map(|t| t.generation_size(n)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenerationMean {
    pub generation: u32,
    pub mean: f64,
    pub se: f64,
    pub expected: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterStats {
    pub alpha: f64,
    pub clusters: usize,
    pub mean_size: f64,
    pub mean_size_se: f64,
    pub expected_mean_size: f64,
    /// `(n, empirical, Borel–Tanner)` for `n = 1..=10`.
    pub pmf_head: Vec<(usize, f64, f64)>,
    pub size_fit: Option<ChiSquareResult>,
    pub first_generation_fit: Option<ChiSquareResult>,
    pub generation_means: Vec<GenerationMean>,
}

impl ClusterStats {
    pub fn compute(trees: &[ClusterTree], alpha: f64, max_generation: u32) -> Result<Self> {
        if trees.is_empty() {
            return Err(RhpError::InsufficientData("no clusters".into()));
        }
        let sizes: Vec<usize> = trees.iter().map(ClusterTree::size).collect();
        let sizes_f: Vec<f64> = sizes.iter().map(|&s| s as f64).collect();
        let (mean_size, mean_size_se) = mean_and_se(&sizes_f);
        let n = trees.len() as f64;
        let law = (alpha > 0.0).then(|| cluster_size_pmf(alpha, 2000)).transpose()?;
        let pmf_head = (1..=10)
            .map(|k| {
                let emp = sizes.iter().filter(|&&s| s == k).count() as f64 / n;
                let exact = match &law {
                    Some(l) => l.prob(k),
                    None => f64::from(u8::from(k == 1)),
                };
                (k, emp, exact)
            })
            .collect();
        let size_fit = law.as_ref().map(|l| chi_square_gof(&sizes, |k| l.prob(k), 0));
        let z1 = generation_counts(trees, 1)?;
        let first_generation_fit = (alpha > 0.0).then(|| chi_square_gof(&z1, |k| poisson_pmf(alpha, k), 0));
        let mut generation_means = Vec::new();
        for g in 0..=max_generation {
            let zs: Vec<f64> = generation_counts(trees, g)?.iter().map(|&z| z as f64).collect();
            let (mean, se) = mean_and_se(&zs);
            let expected = alpha.powi(g as i32);
            let pass = if se > 0.0 {
                (mean - expected).abs() <= 3.0 * se
            } else {
                mean == expected
            };
            generation_means.push(GenerationMean {
                generation: g,
                mean,
                se,
                expected,
                pass,
            });
        }
        Ok(Self {
            alpha,
            clusters: trees.len(),
            mean_size,
            mean_size_se,
            expected_mean_size: mean_cluster_size(alpha)?,
            pmf_head,
            size_fit,
            first_generation_fit,
            generation_means,
        })
    }
}
