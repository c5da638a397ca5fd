//! Ordinary, delayed and stationary renewal processes, and the renewal
//! function `Phi(t) = E[N_R(t)] = sum_{n>=0} F^{*n}(t)` with its density
//! `phi = sum_{n>=1} f^{*n}`.
//!
//! `N_R(t)` counts the epochs `S_i <= t`; whether the origin `S_0 = 0` is
//! one of them is controlled by the `count_origin` flag. `Phi` always counts
//! it (`F^{*0}` is the unit step at 0), so `Phi(0) = 1`.

use rand::Rng;
use serde::Serialize;

use crate::distributions::RenewalModel;
use crate::error::{invalid, Result, RhpError};
use crate::events::{Convention, DelaySpec, EventStream, RawEvent};

/// Largest number of grid steps accepted by [`renewal_table`].
pub const MAX_TABLE_STEPS: f64 = 1e7;

/// Epochs `S_0 = 0` (only if `count_origin`), `S_1, S_2, ... <= horizon`.
pub fn simulate_renewal<R: Rng + ?Sized>(
    model: &RenewalModel,
    horizon: f64,
    count_origin: bool,
    rng: &mut R,
) -> Result<EventStream> {
    check_horizon(horizon)?;
    let mut raw = Vec::new();
    if count_origin {
        raw.push(immigrant(0.0, 0));
    }
    let first = model.sample_interarrival(rng);
    push_epochs(model, first, horizon, &mut raw, rng);
    EventStream::from_raw(raw, horizon, Convention::ordinary(count_origin), 0)
}

/// Delayed renewal process: first epoch from the delay law, later gaps from
/// `F`. The origin is not an event unless the delay is [`DelaySpec::AtOrigin`].
pub fn simulate_delayed_renewal<R: Rng + ?Sized>(
    model: &RenewalModel,
    delay: &DelaySpec,
    horizon: f64,
    rng: &mut R,
) -> Result<EventStream> {
    check_horizon(horizon)?;
    let first = match delay {
        DelaySpec::Stationary => model.sample_equilibrium_delay(rng)?,
        DelaySpec::AtOrigin => 0.0,
        DelaySpec::Law(law) => law.sample_interarrival(rng),
    };
    let mut raw = Vec::new();
    if first <= horizon {
        raw.push(immigrant(first, 0));
        let next = first + model.sample_interarrival(rng);
        push_epochs(model, next, horizon, &mut raw, rng);
    }
    let convention = Convention {
        count_origin: matches!(delay, DelaySpec::AtOrigin),
        delay: Some(delay.clone()),
    };
    EventStream::from_raw(raw, horizon, convention, 0)
}

/// Dispatches on the convention: delayed if a delay is given, ordinary
/// otherwise.
pub fn simulate_immigrants<R: Rng + ?Sized>(
    model: &RenewalModel,
    horizon: f64,
    convention: &Convention,
    rng: &mut R,
) -> Result<EventStream> {
    match &convention.delay {
        Some(delay) => simulate_delayed_renewal(model, delay, horizon, rng),
        None => simulate_renewal(model, horizon, convention.count_origin, rng),
    }
}

fn check_horizon(horizon: f64) -> Result<()> {
    if horizon > 0.0 && horizon.is_finite() {
        Ok(())
    } else {
        Err(invalid("horizon", format!("must be positive and finite, got {horizon}")))
    }
}

fn immigrant(time: f64, cluster_id: usize) -> RawEvent {
    RawEvent {
        time,
        generation: 0,
        parent: None,
        cluster_id,
    }
}

fn push_epochs<R: Rng + ?Sized>(
    model: &RenewalModel,
    mut t: f64,
    horizon: f64,
    raw: &mut Vec<RawEvent>,
    rng: &mut R,
) {
    while t <= horizon {
        let id = raw.len();
        raw.push(immigrant(t, id));
        t += model.sample_interarrival(rng);
    }
}

/// `Phi` and `phi` on the uniform grid `0, step, 2 step, ...` covering
/// `[0, horizon]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RenewalTable {
    pub step: f64,
    pub grid: Vec<f64>,
    pub phi_fn: Vec<f64>,
    pub phi_density: Vec<f64>,
}

impl RenewalTable {
    fn interpolate(&self, values: &[f64], t: f64) -> f64 {
        if t <= 0.0 {
            return values[0];
        }
        let x = t / self.step;
        let i = x.floor() as usize;
        if i + 1 >= values.len() {
            return *values.last().unwrap();
        }
        let w = x - i as f64;
        values[i] * (1.0 - w) + values[i + 1] * w
    }

    /// `Phi(t)` by linear interpolation; clamps beyond the grid.
    pub fn phi_at(&self, t: f64) -> f64 {
        self.interpolate(&self.phi_fn, t)
    }

    pub fn density_at(&self, t: f64) -> f64 {
        self.interpolate(&self.phi_density, t)
    }

    pub fn horizon(&self) -> f64 {
        *self.grid.last().unwrap()
    }
}

/// Solves `Phi = 1 + F * Phi` and `phi = f + F * phi` on a uniform grid.
///
/// Each Stieltjes cell `((j-1) step, j step]` carries the exact mass
/// `F(j step) - F((j-1) step)` and the unknown is averaged over the cell's
/// endpoints, which makes the scheme second order in `step`. The `j = 1`
/// term involves the current node and is solved for in closed form.
pub fn renewal_table(model: &RenewalModel, horizon: f64, step: f64) -> Result<RenewalTable> {
    check_horizon(horizon)?;
    if !(step > 0.0 && step.is_finite()) {
        return Err(invalid("step", format!("must be positive, got {step}")));
    }
    if horizon / step > MAX_TABLE_STEPS {
        return Err(invalid("step", "horizon/step exceeds 1e7"));
    }
    let n = (horizon / step - 1e-9).ceil().max(1.0) as usize;
    let grid: Vec<f64> = (0..=n).map(|k| k as f64 * step).collect();
    let density: Vec<f64> = grid.iter().map(|&t| model.density(t)).collect();
    if let Some((k, v)) = density.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(RhpError::DensityUndefined {
            t: grid[k],
            value: *v,
        });
    }
    let survival: Vec<f64> = grid.iter().map(|&t| model.survival(t)).collect();
    // mass[j] = F(j step) - F((j-1) step)
    let mut mass = vec![0.0; n + 1];
    for j in 1..=n {
        mass[j] = (survival[j - 1] - survival[j]).max(0.0);
    }

    let mut phi_fn = vec![0.0; n + 1];
    let mut phi_density = vec![0.0; n + 1];
    phi_fn[0] = 1.0;
    phi_density[0] = density[0];
    let denom = 1.0 - 0.5 * mass[1];
    for k in 1..=n {
        let mut acc_fn = 0.5 * mass[1] * phi_fn[k - 1];
        let mut acc_density = 0.5 * mass[1] * phi_density[k - 1];
        for j in 2..=k {
            let w = 0.5 * mass[j];
            acc_fn += w * (phi_fn[k - j] + phi_fn[k - j + 1]);
            acc_density += w * (phi_density[k - j] + phi_density[k - j + 1]);
        }
        phi_fn[k] = (1.0 + acc_fn) / denom;
        phi_density[k] = (density[k] + acc_density) / denom;
    }
    Ok(RenewalTable {
        step,
        grid,
        phi_fn,
        phi_density,
    })
}
