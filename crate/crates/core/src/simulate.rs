//! Full renewal Hawkes realizations.
//!
//! Two independent constructions of the same law:
//!
//! * cluster superposition: renewal immigrants, each seeding a branching
//!   cluster truncated at the horizon;
//! * Ogata thinning against the conditional intensity
//!   `lambda(t) = mu(t - T_{I(t-)}) + sum_{t_i < t} h(t - t_i)`, where `mu`
//!   is the hazard of the interarrival law and `T_{I(t-)}` the last
//!   immigrant strictly before `t`.
//!
//! Both honor the same [`Convention`], so their outputs can be compared
//! replicate for replicate.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Open01};
use serde::{Deserialize, Serialize};

use crate::cluster::simulate_cluster;
use crate::distributions::{ExcitationKernel, KernelFamily, RenewalModel};
use crate::error::{invalid, Result, RhpError};
use crate::events::{Convention, DelaySpec, EventKind, RawEvent};
use crate::renewal::simulate_immigrants;

pub use crate::events::{EventRecord, EventStream};

/// Cluster representation: immigrants from the renewal process, each with
/// its cluster truncated at `horizon`.
pub fn simulate_rhp_cluster<R: Rng + ?Sized>(
    model: &RenewalModel,
    kernel: &ExcitationKernel,
    horizon: f64,
    convention: &Convention,
    rng: &mut R,
) -> Result<EventStream> {
    kernel.kernel_mass()?;
    let immigrants = simulate_immigrants(model, horizon, convention, rng)?;
    let mut raw = Vec::with_capacity(immigrants.len());
    for (cluster_id, imm) in immigrants.events.iter().enumerate() {
        let tree = simulate_cluster(kernel, imm.time, Some(horizon), rng)?;
        let offset = raw.len();
        raw.extend(tree.nodes.iter().map(|v| RawEvent {
            time: v.time,
            generation: v.generation,
            parent: v.parent.map(|p| p + offset),
            cluster_id,
        }));
    }
    EventStream::from_raw(raw, horizon, convention.clone(), 0)
}

/// Stationary variant: the immigrant process is delayed by the equilibrium
/// law `f0 = m (1 - F)`.
pub fn simulate_rhp_stationary<R: Rng + ?Sized>(
    model: &RenewalModel,
    kernel: &ExcitationKernel,
    horizon: f64,
    rng: &mut R,
) -> Result<EventStream> {
    model.rate()?;
    simulate_rhp_cluster(model, kernel, horizon, &Convention::stationary(), rng)
}

/// Running sum of kernel terms over the accepted history, evaluated at
/// nondecreasing query times.
#[derive(Debug, Clone)]
enum KernelAccumulator<'a> {
    Exponential {
        alpha: f64,
        beta: f64,
        /// `sum h(at - t_i)` over events so far.
        excitation: f64,
        at: f64,
        count: usize,
    },
    Tabulated {
        kernel: &'a ExcitationKernel,
        end: f64,
        times: Vec<f64>,
        /// Events before this index are beyond the kernel support.
        first_active: usize,
    },
}

impl<'a> KernelAccumulator<'a> {
    fn new(kernel: &'a ExcitationKernel) -> Self {
        match kernel.family() {
            KernelFamily::Exponential { alpha, beta } => Self::Exponential {
                alpha: *alpha,
                beta: *beta,
                excitation: 0.0,
                at: 0.0,
                count: 0,
            },
            KernelFamily::Tabulated(p) => Self::Tabulated {
                kernel,
                end: p.end(),
                times: Vec::new(),
                first_active: 0,
            },
        }
    }

    fn advance(&mut self, t: f64) {
        match self {
            Self::Exponential {
                beta,
                excitation,
                at,
                ..
            } => {
                if t > *at {
                    *excitation *= (-*beta * (t - *at)).exp();
                    *at = t;
                }
            }
            Self::Tabulated {
                end,
                times,
                first_active,
                ..
            } => {
                while *first_active < times.len() && t - times[*first_active] > *end {
                    *first_active += 1;
                }
            }
        }
    }

    /// Adds an event at `t`, which must not precede earlier queries.
    fn push(&mut self, t: f64) {
        self.advance(t);
        match self {
            Self::Exponential {
                alpha,
                beta,
                excitation,
                count,
                ..
            } => {
                *excitation += *alpha * *beta;
                *count += 1;
            }
            Self::Tabulated { times, .. } => times.push(t),
        }
    }

    /// `sum_{t_i < t} h(t - t_i)`.
    fn value(&mut self, t: f64) -> f64 {
        self.advance(t);
        match self {
            Self::Exponential { excitation, .. } => *excitation,
            Self::Tabulated {
                kernel,
                times,
                first_active,
                ..
            } => times[*first_active..]
                .iter()
                .filter(|&&ti| ti < t)
                .map(|&ti| kernel.value(t - ti))
                .sum(),
        }
    }

    /// `sum_{t_i < t} int_0^{t - t_i} h`.
    fn integral(&mut self, t: f64) -> f64 {
        self.advance(t);
        match self {
            Self::Exponential {
                alpha,
                beta,
                excitation,
                count,
                ..
            } => (*alpha * *count as f64 - *excitation / *beta).max(0.0),
            Self::Tabulated {
                kernel,
                times,
                first_active,
                ..
            } => {
                let alpha = kernel.alpha();
                alpha * *first_active as f64
                    + times[*first_active..]
                        .iter()
                        .filter(|&&ti| ti < t)
                        .map(|&ti| kernel.integral(t - ti))
                        .sum::<f64>()
            }
        }
    }

    /// Upper bound of the kernel part over `(t, t + w]` given the history.
    fn sup_over(&mut self, t: f64, w: f64) -> f64 {
        self.advance(t);
        match self {
            // nonincreasing: the value at the window start dominates
            Self::Exponential { excitation, .. } => *excitation,
            Self::Tabulated {
                kernel,
                times,
                first_active,
                ..
            } => times[*first_active..]
                .iter()
                .map(|&ti| kernel.sup_on(t - ti, t + w - ti))
                .sum(),
        }
    }
}

/// Simulator choice for a full realization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Cluster,
    Thinning,
}

impl Method {
    pub fn simulate<R: Rng + ?Sized>(
        self,
        model: &RenewalModel,
        kernel: &ExcitationKernel,
        horizon: f64,
        convention: &Convention,
        rng: &mut R,
    ) -> Result<EventStream> {
        match self {
            Method::Cluster => simulate_rhp_cluster(model, kernel, horizon, convention, rng),
            Method::Thinning => simulate_rhp_thinning(model, kernel, horizon, convention, rng),
        }
    }
}

impl std::str::FromStr for Method {
    type Err = RhpError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cluster" => Ok(Method::Cluster),
            "thinning" => Ok(Method::Thinning),
            _ => Err(invalid("method", format!("expected `cluster` or `thinning`, got `{s}`"))),
        }
    }
}

/// Tuning for the thinning simulator.
#[derive(Debug, Clone, Copy, PartialEq)]
#[derive(Default)]
pub struct ThinningOptions {
    /// Majorant window; defaults to a tenth of the mean interarrival time.
    pub lookahead: Option<f64>,
}


/// Ogata thinning against the renewal Hawkes intensity.
///
/// On each window `(t, t + w]` the intensity is bounded by the hazard
/// supremum over the elapsed-time interval plus the kernel supremum; the
/// bound is refreshed at every accepted point and at window expiry.
/// Accepted points are labeled immigrant or offspring (and given a parent)
/// by a categorical draw over the hazard term and the kernel summands.
pub fn simulate_rhp_thinning<R: Rng + ?Sized>(
    model: &RenewalModel,
    kernel: &ExcitationKernel,
    horizon: f64,
    convention: &Convention,
    rng: &mut R,
) -> Result<EventStream> {
    simulate_rhp_thinning_with(model, kernel, horizon, convention, ThinningOptions::default(), rng)
}

pub fn simulate_rhp_thinning_with<R: Rng + ?Sized>(
    model: &RenewalModel,
    kernel: &ExcitationKernel,
    horizon: f64,
    convention: &Convention,
    options: ThinningOptions,
    rng: &mut R,
) -> Result<EventStream> {
    kernel.kernel_mass()?;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(invalid("horizon", format!("must be positive and finite, got {horizon}")));
    }
    let count_origin = match &convention.delay {
        None => convention.count_origin,
        Some(DelaySpec::AtOrigin) => true,
        Some(_) => {
            return Err(invalid(
                "convention",
                "thinning supports the ordinary process only; use the cluster simulator for delayed immigrants",
            ))
        }
    };
    let lookahead = options
        .lookahead
        .unwrap_or(model.mean_interarrival() / 10.0);
    if !(lookahead > 0.0 && lookahead.is_finite()) {
        return Err(invalid("lookahead", format!("must be positive and finite, got {lookahead}")));
    }

    let mut raw: Vec<RawEvent> = Vec::new();
    let mut acc = KernelAccumulator::new(kernel);
    let mut last_immigrant = 0.0;
    let mut clusters = 0usize;
    if count_origin {
        raw.push(RawEvent {
            time: 0.0,
            generation: 0,
            parent: None,
            cluster_id: 0,
        });
        acc.push(0.0);
        clusters = 1;
    }

    let mut t = 0.0;
    'outer: while t < horizon {
        let elapsed = t - last_immigrant;
        let mut w = lookahead;
        let mut halvings = 0;
        let hazard_bound = loop {
            match model.hazard_sup(elapsed, elapsed + w) {
                Ok(b) => break b,
                Err(RhpError::HazardUndefined { .. }) if halvings < 60 => {
                    w *= 0.5;
                    halvings += 1;
                }
                Err(RhpError::HazardUndefined { t, survival }) => {
                    return Err(RhpError::UnboundedHazard(format!(
                        "survival {survival:e} at elapsed time {t}"
                    )))
                }
                Err(e) => return Err(e),
            }
        };
        let bound = hazard_bound + acc.sup_over(t, w);
        let window_end = t + w;
        let mut s = t;
        loop {
            if bound <= 0.0 {
                t = window_end;
                continue 'outer;
            }
            let gap: f64 = Exp1.sample(rng);
            s += gap / bound;
            if s > window_end {
                t = window_end;
                continue 'outer;
            }
            if s > horizon {
                break 'outer;
            }
            let hazard = model.hazard_at(s - last_immigrant)?;
            let excitation = acc.value(s);
            let intensity = hazard + excitation;
            debug_assert!(intensity <= bound * (1.0 + 1e-9), "majorant violated");
            let u: f64 = rng.sample(Open01);
            if u * bound > intensity {
                continue;
            }
            // accepted: attribute to the hazard term or to one kernel summand
            let v = rng.sample::<f64, _>(Open01) * intensity;
            let event = if v < hazard || excitation <= 0.0 {
                last_immigrant = s;
                clusters += 1;
                RawEvent {
                    time: s,
                    generation: 0,
                    parent: None,
                    cluster_id: clusters - 1,
                }
            } else {
                let parent = pick_parent(&raw, kernel, s, v - hazard);
                RawEvent {
                    time: s,
                    generation: raw[parent].generation + 1,
                    parent: Some(parent),
                    cluster_id: raw[parent].cluster_id,
                }
            };
            raw.push(event);
            acc.push(s);
            t = s;
            continue 'outer;
        }
    }
    EventStream::from_raw(raw, horizon, Convention::ordinary(count_origin), 0)
}

/// Walks back from the most recent event until the kernel summands exceed
/// `target`; falls back to the most recent contributor on rounding.
fn pick_parent(raw: &[RawEvent], kernel: &ExcitationKernel, s: f64, target: f64) -> usize {
    let mut acc = 0.0;
    let mut fallback = raw.len() - 1;
    for (i, e) in raw.iter().enumerate().rev() {
        let term = kernel.value(s - e.time);
        if term > 0.0 {
            acc += term;
            if fallback == raw.len() - 1 && kernel.value(s - raw[fallback].time) == 0.0 {
                fallback = i;
            }
            if acc > target {
                return i;
            }
        }
        if let Some(end) = kernel.support_end() {
            if s - e.time > end {
                break;
            }
        }
    }
    fallback
}

/// Reference for the hazard term at time `t`: elapsed time since the last
/// immigrant strictly before `t`, or the delay phase when none occurred.
enum HazardReference {
    Since(f64),
    StationaryDelay,
    DelayLaw,
}

fn hazard_reference(stream: &EventStream, t: f64) -> HazardReference {
    let before = stream.events.partition_point(|e| e.time < t);
    let last = stream.events[..before]
        .iter()
        .rev()
        .find(|e| e.kind == EventKind::Immigrant);
    match (last, &stream.convention.delay) {
        (Some(e), _) => HazardReference::Since(e.time),
        (None, None) | (None, Some(DelaySpec::AtOrigin)) => HazardReference::Since(0.0),
        (None, Some(DelaySpec::Stationary)) => HazardReference::StationaryDelay,
        (None, Some(DelaySpec::Law(_))) => HazardReference::DelayLaw,
    }
}

fn hazard_term(stream: &EventStream, model: &RenewalModel, t: f64) -> Result<f64> {
    match hazard_reference(stream, t) {
        HazardReference::Since(r) => model.hazard_at(t - r),
        HazardReference::StationaryDelay => {
            let m = model.rate()?;
            let surv0 = 1.0 - model.equilibrium_cdf(t)?;
            if surv0 < crate::distributions::SURVIVAL_FLOOR {
                return Err(RhpError::HazardUndefined { t, survival: surv0 });
            }
            Ok(m * model.survival(t) / surv0)
        }
        HazardReference::DelayLaw => match &stream.convention.delay {
            Some(DelaySpec::Law(law)) => law.hazard_at(t),
            _ => unreachable!(),
        },
    }
}

fn check_time(stream: &EventStream, t: f64) -> Result<()> {
    if !(t >= 0.0) {
        return Err(invalid("t", format!("must be nonnegative, got {t}")));
    }
    if t > stream.horizon {
        return Err(RhpError::BeyondHorizon {
            t,
            horizon: stream.horizon,
        });
    }
    Ok(())
}

/// `lambda(t) = mu(t - T_{I(t-)}) + sum_{t_i < t} h(t - t_i)`.
pub fn intensity_path(
    stream: &EventStream,
    model: &RenewalModel,
    kernel: &ExcitationKernel,
    t: f64,
) -> Result<f64> {
    check_time(stream, t)?;
    let excitation: f64 = stream
        .events
        .iter()
        .take_while(|e| e.time < t)
        .map(|e| kernel.value(t - e.time))
        .sum();
    Ok(hazard_term(stream, model, t)? + excitation)
}

/// The hazard part of the intensity alone.
pub fn baseline_intensity(stream: &EventStream, model: &RenewalModel, t: f64) -> Result<f64> {
    check_time(stream, t)?;
    hazard_term(stream, model, t)
}

/// Cumulative hazard of the immigrant clock over `[0, t]`, in closed form:
/// sums of `-ln(1 - F)` over inter-immigrant gaps, with the delay law on
/// the first segment for delayed streams.
fn hazard_compensator(stream: &EventStream, model: &RenewalModel, t: f64) -> Result<f64> {
    let before = stream.events.partition_point(|e| e.time < t);
    let immigrants = stream.events[..before]
        .iter()
        .filter(|e| e.kind == EventKind::Immigrant)
        .map(|e| e.time);
    let mut total = 0.0;
    let mut reference = None;
    for a in immigrants {
        match reference {
            Some(r) => total += model.cumulative_hazard(a - r)?,
            None => total += delay_cumulative_hazard(stream, model, a)?,
        }
        reference = Some(a);
    }
    total += match reference {
        Some(r) => model.cumulative_hazard(t - r)?,
        None => delay_cumulative_hazard(stream, model, t)?,
    };
    Ok(total)
}

/// Cumulative hazard accrued on `[0, t]` before the first immigrant.
fn delay_cumulative_hazard(stream: &EventStream, model: &RenewalModel, t: f64) -> Result<f64> {
    match &stream.convention.delay {
        None | Some(DelaySpec::AtOrigin) => model.cumulative_hazard(t),
        Some(DelaySpec::Stationary) => {
            let surv0 = 1.0 - model.equilibrium_cdf(t)?;
            if surv0 <= 0.0 {
                return Err(RhpError::HazardUndefined { t, survival: surv0 });
            }
            Ok(-surv0.ln())
        }
        Some(DelaySpec::Law(law)) => law.cumulative_hazard(t),
    }
}

/// `Lambda(t) = int_0^t lambda(s) ds`.
pub fn compensator(
    stream: &EventStream,
    model: &RenewalModel,
    kernel: &ExcitationKernel,
    t: f64,
) -> Result<f64> {
    check_time(stream, t)?;
    let excitation: f64 = stream
        .events
        .iter()
        .take_while(|e| e.time < t)
        .map(|e| kernel.integral(t - e.time))
        .sum();
    Ok(hazard_compensator(stream, model, t)? + excitation)
}

/// `Lambda(t_i)` at every event time, in one pass.
pub fn compensator_at_events(
    stream: &EventStream,
    model: &RenewalModel,
    kernel: &ExcitationKernel,
) -> Result<Vec<f64>> {
    let mut acc = KernelAccumulator::new(kernel);
    let mut out = Vec::with_capacity(stream.len());
    let mut hazard_done = 0.0;
    let mut reference: Option<f64> = None;
    for e in &stream.events {
        let t = e.time;
        let hazard_now = match reference {
            Some(r) => hazard_done + model.cumulative_hazard(t - r)?,
            None => delay_cumulative_hazard(stream, model, t)?,
        };
        out.push(hazard_now + acc.integral(t));
        if e.kind == EventKind::Immigrant {
            hazard_done = hazard_now;
            reference = Some(t);
        }
        acc.push(t);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{replicate, stream, Lane};
    use crate::stats::{ks_two_sample, mean_and_se};
    use crate::renewal::simulate_renewal;

    fn gamma() -> RenewalModel {
        RenewalModel::gamma(2.0, 1.0).unwrap()
    }

    fn exp_kernel() -> ExcitationKernel {
        ExcitationKernel::exponential(0.5, 1.0).unwrap()
    }

    #[test]
    fn zero_kernel_cluster_stream_equals_renewal_stream() {
        let model = gamma();
        let a = simulate_rhp_cluster(&model, &ExcitationKernel::zero(), 50.0, &Convention::default(), &mut stream(4)).unwrap();
        let b = simulate_renewal(&model, 50.0, true, &mut stream(4)).unwrap();
        assert_eq!(a.times(), b.times());
    }

    #[test]
    fn streams_are_well_formed_and_deterministic() {
        let model = gamma();
        let kernel = exp_kernel();
        for conv in [Convention::ordinary(true), Convention::ordinary(false)] {
            let a = simulate_rhp_cluster(&model, &kernel, 100.0, &conv, &mut stream(1)).unwrap();
            let b = simulate_rhp_cluster(&model, &kernel, 100.0, &conv, &mut stream(1)).unwrap();
            assert_eq!(a, b);
            a.check_invariants().unwrap();
            let c = simulate_rhp_thinning(&model, &kernel, 100.0, &conv, &mut stream(1)).unwrap();
            let d = simulate_rhp_thinning(&model, &kernel, 100.0, &conv, &mut stream(1)).unwrap();
            assert_eq!(c, d);
            c.check_invariants().unwrap();
            assert_eq!(a.events.first().map(|e| e.time == 0.0), Some(conv.count_origin));
            assert_eq!(c.events.first().map(|e| e.time == 0.0), Some(conv.count_origin));
        }
        let s = simulate_rhp_stationary(&model, &kernel, 100.0, &mut stream(2)).unwrap();
        s.check_invariants().unwrap();
    }

    #[test]
    fn classical_hawkes_rate() {
        let model = RenewalModel::exponential(1.0).unwrap();
        let kernel = exp_kernel();
        let conv = Convention::ordinary(false);
        let counts: Vec<f64> = replicate(200, 5, Lane::CLUSTER, |_, rng| {
            simulate_rhp_cluster(&model, &kernel, 1000.0, &conv, rng).unwrap().len() as f64
        });
        let (mean, se) = mean_and_se(&counts);
        // E N[0,T] = T/(1-alpha) - (alpha/beta)(1 - e^{-beta(1-alpha)T})/(1-alpha)^2 for the
        // Poisson-start process; the edge term is 2 events out of 2000
        let edge = 0.5 * (1.0 - (-0.5f64 * 1000.0).exp()) / 0.25;
        assert!(edge / 2000.0 < 0.01);
        assert!((mean - (2000.0 - edge)).abs() < 3.0 * se, "{mean} ± {se}");
        let thinned: Vec<f64> = replicate(200, 5, Lane::THINNING, |_, rng| {
            simulate_rhp_thinning(&model, &kernel, 1000.0, &conv, rng).unwrap().len() as f64
        });
        let (tm, tse) = mean_and_se(&thinned);
        assert!((tm - (2000.0 - edge)).abs() < 3.0 * tse, "{tm} ± {tse}");
    }

    #[test]
    fn zero_kernel_thinning_is_a_renewal_process() {
        let model = gamma();
        let conv = Convention::ordinary(false);
        let thin: Vec<f64> = replicate(4000, 6, Lane::THINNING, |_, rng| {
            let s = simulate_rhp_thinning(&model, &ExcitationKernel::zero(), 20.0, &conv, rng).unwrap();
            s.events.first().map_or(f64::INFINITY, |e| e.time)
        });
        let direct: Vec<f64> = replicate(4000, 6, Lane::CLUSTER, |_, rng| {
            let s = simulate_renewal(&model, 20.0, false, rng).unwrap();
            s.events.first().map_or(f64::INFINITY, |e| e.time)
        });
        assert!(ks_two_sample(&thin, &direct).p_value > 0.01);
    }

    #[test]
    fn gamma_count_distribution_matches_across_simulators() {
        let model = gamma();
        let kernel = exp_kernel();
        let conv = Convention::default();
        let a: Vec<f64> = replicate(2000, 7, Lane::CLUSTER, |_, rng| {
            simulate_rhp_cluster(&model, &kernel, 100.0, &conv, rng).unwrap().len() as f64
        });
        let b: Vec<f64> = replicate(2000, 7, Lane::THINNING, |_, rng| {
            simulate_rhp_thinning(&model, &kernel, 100.0, &conv, rng).unwrap().len() as f64
        });
        let ks = ks_two_sample(&a, &b);
        assert!(ks.p_value > 0.01, "{ks:?}");
    }

    #[test]
    fn generation_structure_matches_across_simulators() {
        let model = gamma();
        let kernel = exp_kernel();
        let conv = Convention::default();
        let gen1 = |s: &EventStream| s.generation_counts().get(1).copied().unwrap_or(0) as f64;
        let a: Vec<f64> = replicate(2000, 8, Lane::CLUSTER, |_, rng| {
            gen1(&simulate_rhp_cluster(&model, &kernel, 100.0, &conv, rng).unwrap())
        });
        let b: Vec<f64> = replicate(2000, 8, Lane::THINNING, |_, rng| {
            gen1(&simulate_rhp_thinning(&model, &kernel, 100.0, &conv, rng).unwrap())
        });
        assert!(ks_two_sample(&a, &b).p_value > 0.01);
    }

    #[test]
    fn tabulated_kernel_thinning_matches_cluster() {
        let model = RenewalModel::weibull(1.5, 1.0).unwrap();
        // non-monotone kernel: the majorant uses interval suprema
        let kernel = ExcitationKernel::tabulated(vec![0.0, 0.5, 1.5], vec![0.1, 0.6, 0.0]).unwrap();
        let conv = Convention::default();
        let a: Vec<f64> = replicate(2000, 9, Lane::CLUSTER, |_, rng| {
            simulate_rhp_cluster(&model, &kernel, 30.0, &conv, rng).unwrap().count_in(10.0, 30.0) as f64
        });
        let b: Vec<f64> = replicate(2000, 9, Lane::THINNING, |_, rng| {
            simulate_rhp_thinning(&model, &kernel, 30.0, &conv, rng).unwrap().count_in(10.0, 30.0) as f64
        });
        assert!(ks_two_sample(&a, &b).p_value > 0.01);
    }

    #[test]
    fn thinning_rejects_unbounded_hazard() {
        let model = RenewalModel::gamma(0.5, 1.0).unwrap();
        let r = simulate_rhp_thinning(&model, &exp_kernel(), 10.0, &Convention::default(), &mut stream(0));
        assert!(matches!(r, Err(RhpError::UnboundedHazard(_))));
        let r = simulate_rhp_thinning(&gamma(), &exp_kernel(), 10.0, &Convention::stationary(), &mut stream(0));
        assert!(r.is_err());
    }

    fn single_immigrant_stream() -> EventStream {
        EventStream::from_raw(
            vec![RawEvent { time: 0.0, generation: 0, parent: None, cluster_id: 0 }],
            10.0,
            Convention::ordinary(true),
            0,
        )
        .unwrap()
    }

    #[test]
    fn intensity_examples() {
        let model = RenewalModel::exponential(2.0).unwrap();
        let empty = EventStream::empty(10.0, Convention::ordinary(false));
        assert_eq!(intensity_path(&empty, &model, &exp_kernel(), 3.0).unwrap(), 2.0);
        let s = single_immigrant_stream();
        let lam = intensity_path(&s, &model, &exp_kernel(), 1.0).unwrap();
        assert!((lam - (2.0 + 0.5 * (-1f64).exp())).abs() < 1e-12);
        assert!((lam - 2.18394).abs() < 1e-5);
        assert!(intensity_path(&s, &model, &exp_kernel(), 11.0).is_err());
    }

    #[test]
    fn intensity_is_additive_over_history() {
        let model = gamma();
        let kernel = exp_kernel();
        let s = EventStream::from_raw(
            vec![
                RawEvent { time: 0.5, generation: 0, parent: None, cluster_id: 0 },
                RawEvent { time: 1.2, generation: 1, parent: Some(0), cluster_id: 0 },
            ],
            10.0,
            Convention::ordinary(false),
            0,
        )
        .unwrap();
        let t = 2.0;
        let expected = model.hazard_at(t - 0.5).unwrap() + kernel.value(t - 0.5) + kernel.value(t - 1.2);
        assert_eq!(intensity_path(&s, &model, &kernel, t).unwrap(), expected);
    }

    #[test]
    fn hazard_term_is_constant_for_exponential_model() {
        let model = RenewalModel::exponential(1.3).unwrap();
        let s = simulate_rhp_cluster(&model, &exp_kernel(), 50.0, &Convention::default(), &mut stream(3)).unwrap();
        for k in 0..500 {
            let t = k as f64 * 0.1;
            assert!((baseline_intensity(&s, &model, t).unwrap() - 1.3).abs() < 1e-12);
        }
    }

    #[test]
    fn compensator_examples() {
        let model = RenewalModel::exponential(2.0).unwrap();
        let empty = EventStream::empty(10.0, Convention::ordinary(false));
        assert!((compensator(&empty, &model, &ExcitationKernel::zero(), 4.0).unwrap() - 8.0).abs() < 1e-12);
        let s = single_immigrant_stream();
        let kernel = ExcitationKernel::exponential(0.5, 1.5).unwrap();
        for t in [0.3, 1.0, 4.0] {
            let lam = compensator(&s, &model, &kernel, t).unwrap();
            assert!((lam - (2.0 * t + 0.5 * (1.0 - (-1.5 * t).exp()))).abs() < 1e-12);
        }
    }

    // composite Simpson of the intensity between event times
    fn numeric_compensator(s: &EventStream, model: &RenewalModel, kernel: &ExcitationKernel, t: f64) -> f64 {
        let mut cuts: Vec<f64> = s.times().into_iter().filter(|&x| x < t).collect();
        cuts.insert(0, 0.0);
        cuts.push(t);
        cuts.dedup();
        let mut total = 0.0;
        for w in cuts.windows(2) {
            let n = 200;
            let h = (w[1] - w[0]) / n as f64;
            let f = |x: f64| intensity_path(s, model, kernel, x).unwrap();
            // shift endpoints inward so the left-limit convention is respected
            let eps = 1e-12;
            let mut acc = f(w[0] + eps) + f(w[1] - eps);
            for k in 1..n {
                acc += if k % 2 == 1 { 4.0 } else { 2.0 } * f(w[0] + k as f64 * h);
            }
            total += acc * h / 3.0;
        }
        total
    }

    #[test]
    fn compensator_matches_quadrature_of_intensity() {
        let model = gamma();
        let kernels = [exp_kernel(), ExcitationKernel::tabulated(vec![0.0, 0.5, 1.5], vec![0.1, 0.6, 0.0]).unwrap()];
        for kernel in &kernels {
            for conv in [Convention::ordinary(true), Convention::stationary()] {
                let s = simulate_rhp_cluster(&model, kernel, 15.0, &conv, &mut stream(21)).unwrap();
                let at_events = compensator_at_events(&s, &model, kernel).unwrap();
                for (e, lam) in s.events.iter().zip(&at_events) {
                    let direct = compensator(&s, &model, kernel, e.time).unwrap();
                    assert!((direct - lam).abs() < 1e-9, "{} vs {}", direct, lam);
                }
                for t in [2.5, 7.0, 15.0] {
                    let numeric = numeric_compensator(&s, &model, kernel, t);
                    let closed = compensator(&s, &model, kernel, t).unwrap();
                    assert!((numeric - closed).abs() < 1e-4 * closed.max(1.0), "t={t}: {numeric} vs {closed}");
                }
                let grid: Vec<f64> = (0..=150).map(|k| compensator(&s, &model, kernel, k as f64 * 0.1).unwrap()).collect();
                assert!(grid.windows(2).all(|w| w[1] >= w[0]));
            }
        }
    }

    #[test]
    fn residual_mean_is_zero() {
        let model = gamma();
        let kernel = exp_kernel();
        let streams = replicate(3000, 10, Lane::CLUSTER, |_, rng| {
            simulate_rhp_cluster(&model, &kernel, 30.0, &Convention::ordinary(false), rng).unwrap()
        });
        for (r, t) in [(0.0, 5.0), (5.0, 12.0), (12.0, 30.0)] {
            let resid: Vec<f64> = streams
                .iter()
                .map(|s| {
                    s.count_in(r, t) as f64 - (compensator(s, &model, &kernel, t).unwrap() - compensator(s, &model, &kernel, r).unwrap())
                })
                .collect();
            let (mean, se) = mean_and_se(&resid);
            assert!(mean.abs() < 3.0 * se, "({r},{t}]: {mean} ± {se}");
        }
    }

    #[test]
    fn stationary_window_rate() {
        let model = gamma();
        let kernel = exp_kernel();
        let streams = replicate(10000, 11, Lane::STATIONARY, |_, rng| {
            simulate_rhp_stationary(&model, &kernel, 210.0, rng).unwrap()
        });
        for t in [50.0, 100.0, 200.0] {
            let counts: Vec<f64> = streams.iter().map(|s| s.count_in(t, t + 10.0) as f64).collect();
            let (mean, se) = mean_and_se(&counts);
            assert!((mean - 10.0).abs() < 3.5 * se, "t={t}: {mean} ± {se}");
        }
    }

    #[test]
    fn exponential_stationary_matches_plain_without_origin() {
        let model = RenewalModel::exponential(1.0).unwrap();
        let kernel = exp_kernel();
        let a: Vec<f64> = replicate(2000, 12, Lane::STATIONARY, |_, rng| {
            simulate_rhp_stationary(&model, &kernel, 20.0, rng).unwrap().count_in(5.0, 15.0) as f64
        });
        let b: Vec<f64> = replicate(2000, 12, Lane::PLAIN, |_, rng| {
            simulate_rhp_cluster(&model, &kernel, 20.0, &Convention::ordinary(false), rng).unwrap().count_in(5.0, 15.0) as f64
        });
        assert!(ks_two_sample(&a, &b).p_value > 0.01);
    }

    #[test]
    fn tied_times_are_rejected() {
        let raw = vec![
            RawEvent { time: 1.0, generation: 0, parent: None, cluster_id: 0 },
            RawEvent { time: 1.0, generation: 0, parent: None, cluster_id: 1 },
        ];
        assert_eq!(
            EventStream::from_raw(raw, 2.0, Convention::default(), 0),
            Err(RhpError::TiedEvents(1.0))
        );
    }
}
