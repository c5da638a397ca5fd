//! Event records and time-sorted event streams shared by all simulators.

use serde::{Deserialize, Serialize};

use crate::distributions::RenewalModel;
use crate::error::{Result, RhpError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Immigrant,
    Offspring,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub time: f64,
    pub kind: EventKind,
    pub generation: u32,
    /// Index of the parent within the same stream.
    pub parent: Option<usize>,
    pub cluster_id: usize,
    pub replicate: usize,
}

/// Law of the first immigrant of a delayed renewal process.
#[derive(Debug, Clone, PartialEq)]
pub enum DelaySpec {
    /// Equilibrium delay with density `m (1 - F)`.
    Stationary,
    /// First epoch at the origin (the ordinary process with `S_0 = 0`).
    AtOrigin,
    Law(Box<RenewalModel>),
}

/// Whether the origin `S_0 = 0` is an event, and the delay law if the
/// immigrant process is delayed. All simulators honor the same convention.
#[derive(Debug, Clone, PartialEq)]
pub struct Convention {
    pub count_origin: bool,
    pub delay: Option<DelaySpec>,
}

impl Default for Convention {
    fn default() -> Self {
        Self {
            count_origin: true,
            delay: None,
        }
    }
}

impl Convention {
    pub fn ordinary(count_origin: bool) -> Self {
        Self {
            count_origin,
            delay: None,
        }
    }

    pub fn stationary() -> Self {
        Self {
            count_origin: false,
            delay: Some(DelaySpec::Stationary),
        }
    }
}

/// A point as produced by a simulator, before sorting. `parent` refers to
/// the position in the unsorted list.
#[derive(Debug, Clone, Copy)]
pub(crate) struct RawEvent {
    pub time: f64,
    pub generation: u32,
    pub parent: Option<usize>,
    pub cluster_id: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventStream {
    pub events: Vec<EventRecord>,
    pub horizon: f64,
    pub convention: Convention,
}

impl EventStream {
    pub fn empty(horizon: f64, convention: Convention) -> Self {
        Self {
            events: Vec::new(),
            horizon,
            convention,
        }
    }

    /// Sorts raw events by time, remaps parent links and rejects ties.
    pub(crate) fn from_raw(
        raw: Vec<RawEvent>,
        horizon: f64,
        convention: Convention,
        replicate: usize,
    ) -> Result<Self> {
        let mut order: Vec<usize> = (0..raw.len()).collect();
        order.sort_by(|&a, &b| raw[a].time.total_cmp(&raw[b].time));
        for w in order.windows(2) {
            if raw[w[0]].time == raw[w[1]].time {
                return Err(RhpError::TiedEvents(raw[w[0]].time));
            }
        }
        let mut position = vec![0usize; raw.len()];
        for (pos, &idx) in order.iter().enumerate() {
            position[idx] = pos;
        }
        let events = order
            .iter()
            .map(|&idx| {
                let r = raw[idx];
                EventRecord {
                    time: r.time,
                    kind: if r.generation == 0 {
                        EventKind::Immigrant
                    } else {
                        EventKind::Offspring
                    },
                    generation: r.generation,
                    parent: r.parent.map(|p| position[p]),
                    cluster_id: r.cluster_id,
                    replicate,
                }
            })
            .collect();
        Ok(Self {
            events,
            horizon,
            convention,
        })
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.events.iter().map(|e| e.time).collect()
    }

    pub fn with_replicate(mut self, replicate: usize) -> Self {
        for e in &mut self.events {
            e.replicate = replicate;
        }
        self
    }

    /// Number of events in the window `(a, b]`.
    pub fn count_in(&self, a: f64, b: f64) -> usize {
        let lo = self.events.partition_point(|e| e.time <= a);
        let hi = self.events.partition_point(|e| e.time <= b);
        hi - lo
    }

    pub fn immigrant_count(&self) -> usize {
        self.events
            .iter()
            .filter(|e| e.kind == EventKind::Immigrant)
            .count()
    }

    /// Event counts per generation; entry 0 counts immigrants.
    pub fn generation_counts(&self) -> Vec<usize> {
        let mut counts = Vec::new();
        for e in &self.events {
            let g = e.generation as usize;
            if counts.len() <= g {
                counts.resize(g + 1, 0);
            }
            counts[g] += 1;
        }
        counts
    }

    /// Checks ordering, parentage and the generation bookkeeping
    /// `N = N_R + sum_n N^(n)`.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        for w in self.events.windows(2) {
            if w[1].time <= w[0].time {
                return Err(format!("times not strictly increasing at {}", w[1].time));
            }
        }
        for (i, e) in self.events.iter().enumerate() {
            if (e.kind == EventKind::Immigrant) != (e.generation == 0) {
                return Err(format!("event {i}: kind/generation mismatch"));
            }
            match (e.kind, e.parent) {
                (EventKind::Immigrant, Some(_)) => {
                    return Err(format!("event {i}: immigrant with parent"))
                }
                (EventKind::Offspring, None) => {
                    return Err(format!("event {i}: offspring without parent"))
                }
                (EventKind::Offspring, Some(p)) => {
                    let parent = self.events.get(p).ok_or(format!("event {i}: bad parent"))?;
                    if parent.time >= e.time || parent.generation + 1 != e.generation {
                        return Err(format!("event {i}: parent not an earlier generation"));
                    }
                    if parent.cluster_id != e.cluster_id {
                        return Err(format!("event {i}: parent in another cluster"));
                    }
                }
                _ => {}
            }
            if e.time < 0.0 || e.time > self.horizon {
                return Err(format!("event {i} outside [0, horizon]"));
            }
        }
        let by_generation: usize = self.generation_counts().iter().sum();
        if by_generation != self.events.len() {
            return Err("generation counts do not sum to the total".into());
        }
        Ok(())
    }
}
