//! Aperiodic SRS triggering that tops up DMRS coverage, and the periodic
//! round-robin baseline.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::trace::PuschGrant;
use crate::types::{FrequencyGrid, RbRange, TddPattern, UeId};

pub const N_SETS: usize = 3;
pub const RESOURCES_PER_SET: usize = 2;
pub const N_RESOURCES: usize = N_SETS * RESOURCES_PER_SET;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SchedulerError {
    #[error("grid has {0} RBs, at least {N_RESOURCES} are needed")]
    GridTooSmall(usize),
    #[error("unregistered UE {0}")]
    UnregisteredUe(UeId),
    #[error("target rate of UE {ue} must be positive, got {rate}")]
    InvalidRate { ue: UeId, rate: f64 },
    #[error("time {t} precedes scheduler time {now}")]
    TimeReversal { t: f64, now: f64 },
    #[error("constraint violated: {0}")]
    Constraint(#[from] ConstraintViolation),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConstraintViolation {
    #[error("resource {0} assigned twice")]
    DoubleBooked(usize),
    #[error("UE {0} holds resources from more than one set")]
    MultipleSets(UeId),
    #[error("UE {0} holds more than {RESOURCES_PER_SET} resources")]
    TooManyResources(UeId),
    #[error("resource index {0} out of range")]
    UnknownResource(usize),
    #[error("full-band grant mixed with other grants")]
    FullBandConflict,
}

/// The six pre-configured SRS resources: three sets of two adjacent
/// resources, resource `k` belonging to set `k / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SrsResourceGrid {
    ranges: [RbRange; N_RESOURCES],
    n_rbs: usize,
}

impl SrsResourceGrid {
    /// Splits the grid into six contiguous ranges as evenly as possible,
    /// larger ranges first.
    pub fn build(grid: &FrequencyGrid) -> Result<Self, SchedulerError> {
        Self::with_rbs(grid.n_rbs())
    }

    pub fn with_rbs(n_rbs: usize) -> Result<Self, SchedulerError> {
        if n_rbs < N_RESOURCES {
            return Err(SchedulerError::GridTooSmall(n_rbs));
        }
        let base = n_rbs / N_RESOURCES;
        let extra = n_rbs % N_RESOURCES;
        let mut ranges = [RbRange::new(0, 0); N_RESOURCES];
        let mut start = 0;
        for (k, r) in ranges.iter_mut().enumerate() {
            let len = base + (k < extra) as usize;
            *r = RbRange::new(start, len);
            start += len;
        }
        Ok(Self { ranges, n_rbs })
    }

    pub fn n_rbs(&self) -> usize {
        self.n_rbs
    }

    pub fn resource(&self, k: usize) -> RbRange {
        self.ranges[k]
    }

    pub fn resources(&self) -> &[RbRange; N_RESOURCES] {
        &self.ranges
    }

    pub fn set_of(k: usize) -> usize {
        k / RESOURCES_PER_SET
    }

    pub fn different_set(k: usize, other: usize) -> bool {
        Self::set_of(k) != Self::set_of(other)
    }

    /// Resource containing RB `rb`, if any.
    pub fn resource_of_rb(&self, rb: usize) -> Option<usize> {
        self.ranges.iter().position(|r| r.range().contains(&rb))
    }

    /// `srs_bw_configs[r][k]`: 1 when RB `r` belongs to resource `k`.
    pub fn membership(&self) -> Vec<[bool; N_RESOURCES]> {
        (0..self.n_rbs)
            .map(|rb| core::array::from_fn(|k| self.ranges[k].range().contains(&rb)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SchedulerConfig {
    /// Resources are only granted while the best urgency exceeds this
    /// floor. The default −∞ grants every resource every uplink slot.
    pub urgency_floor: f64,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        Self { urgency_floor: f64::NEG_INFINITY }
    }
}

/// Per-(UE, RB) time of the last channel estimate and per-UE target rates.
#[derive(Debug, Clone, PartialEq)]
pub struct SchedulerState {
    last_est_time: Vec<f64>,
    tgt_rate: Vec<f64>,
    n_rbs: usize,
    now: f64,
}

impl SchedulerState {
    /// Every UE starts exactly due: `last_est_time = t0 − 1/tgt_rate`.
    pub fn new(tgt_rate: Vec<f64>, n_rbs: usize, t0: f64) -> Result<Self, SchedulerError> {
        for (ue, &rate) in tgt_rate.iter().enumerate() {
            if !(rate > 0.0 && rate.is_finite()) {
                return Err(SchedulerError::InvalidRate { ue, rate });
            }
        }
        let mut last_est_time = Vec::with_capacity(tgt_rate.len() * n_rbs);
        for &rate in &tgt_rate {
            last_est_time.extend(core::iter::repeat_n(t0 - 1.0 / rate, n_rbs));
        }
        Ok(Self { last_est_time, tgt_rate, n_rbs, now: t0 })
    }

    /// State with explicit last-estimation times, `last_est_time[u][r]`.
    pub fn from_parts(last_est_time: Vec<Vec<f64>>, tgt_rate: Vec<f64>, now: f64) -> Result<Self, SchedulerError> {
        let n_rbs = last_est_time.first().map_or(0, Vec::len);
        let mut state = Self::new(tgt_rate, n_rbs, now)?;
        if last_est_time.len() != state.n_ues() {
            return Err(SchedulerError::UnregisteredUe(last_est_time.len().min(state.n_ues())));
        }
        state.last_est_time = last_est_time.into_iter().flatten().collect();
        Ok(state)
    }

    pub fn n_ues(&self) -> usize {
        self.tgt_rate.len()
    }

    pub fn n_rbs(&self) -> usize {
        self.n_rbs
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn tgt_rate(&self, ue: UeId) -> f64 {
        self.tgt_rate[ue]
    }

    pub fn last_est_time(&self, ue: UeId, rb: usize) -> f64 {
        self.last_est_time[ue * self.n_rbs + rb]
    }

    fn row(&self, ue: UeId) -> &[f64] {
        &self.last_est_time[ue * self.n_rbs..(ue + 1) * self.n_rbs]
    }

    fn row_mut(&mut self, ue: UeId) -> &mut [f64] {
        &mut self.last_est_time[ue * self.n_rbs..(ue + 1) * self.n_rbs]
    }

    /// `ch_est_pri[u, r] = t − last_est_time[u, r] − 1/tgt_rate[u]`.
    pub fn priority(&self, ue: UeId, rb: usize, t: f64) -> f64 {
        t - self.last_est_time(ue, rb) - 1.0 / self.tgt_rate[ue]
    }

    /// Urgency of every (UE, resource): the priority summed over the
    /// resource's RBs.
    pub fn urgency(&self, grid: &SrsResourceGrid, t: f64) -> Vec<[f64; N_RESOURCES]> {
        (0..self.n_ues())
            .map(|u| {
                let row = self.row(u);
                let period = 1.0 / self.tgt_rate[u];
                core::array::from_fn(|k| grid.resource(k).range().map(|r| t - row[r] - period).sum())
            })
            .collect()
    }

    /// Marks `rbs` of `ue` as estimated at `t`.
    pub fn record_estimate(&mut self, ue: UeId, rbs: RbRange, t: f64) {
        for v in &mut self.row_mut(ue)[rbs.range()] {
            *v = t;
        }
    }

    /// One uplink slot of the greedy allocation, updating the state in place.
    pub fn step(
        &mut self,
        pusch: &[PuschGrant],
        grid: &SrsResourceGrid,
        t: f64,
        cfg: &SchedulerConfig,
    ) -> Result<SrsAllocation, SchedulerError> {
        if t < self.now {
            return Err(SchedulerError::TimeReversal { t, now: self.now });
        }
        if let Some(g) = pusch.iter().find(|g| g.ue >= self.n_ues()) {
            return Err(SchedulerError::UnregisteredUe(g.ue));
        }
        self.now = t;
        for g in pusch {
            let end = g.rbs.end().min(self.n_rbs);
            let start = g.rbs.start.min(end);
            self.record_estimate(g.ue, RbRange::new(start, end - start), t);
        }
        let mut urgency = self.urgency(grid, t);
        let mut grants = Vec::new();
        while let Some((u, k)) = argmax(&urgency) {
            if !(urgency[u][k] > cfg.urgency_floor) {
                break;
            }
            grants.push(SrsGrant { ue: u, resource: SrsResource::Aperiodic(k), rbs: grid.resource(k) });
            for row in urgency.iter_mut() {
                row[k] = f64::NEG_INFINITY;
            }
            for (other, v) in urgency[u].iter_mut().enumerate() {
                if SrsResourceGrid::different_set(k, other) {
                    *v = f64::NEG_INFINITY;
                }
            }
        }
        for g in &grants {
            self.record_estimate(g.ue, g.rbs, t);
        }
        Ok(SrsAllocation { grants })
    }
}

/// First maximum in UE-major, resource-minor order, skipping −∞.
fn argmax(urgency: &[[f64; N_RESOURCES]]) -> Option<(UeId, usize)> {
    let mut best: Option<(UeId, usize, f64)> = None;
    for (u, row) in urgency.iter().enumerate() {
        for (k, &v) in row.iter().enumerate() {
            if v == f64::NEG_INFINITY {
                continue;
            }
            if best.is_none_or(|(_, _, b)| v > b) {
                best = Some((u, k, v));
            }
        }
    }
    best.map(|(u, k, _)| (u, k))
}

/// Pure form of [`SchedulerState::step`]: old state in, allocation and new
/// state out.
pub fn generate_srs_alloc(
    state: &SchedulerState,
    pusch: &[PuschGrant],
    grid: &SrsResourceGrid,
    t: f64,
    cfg: &SchedulerConfig,
) -> Result<(SrsAllocation, SchedulerState), SchedulerError> {
    let mut next = state.clone();
    let alloc = next.step(pusch, grid, t, cfg)?;
    Ok((alloc, next))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum SrsResource {
    /// One of the six pre-configured aperiodic resources.
    Aperiodic(usize),
    /// Periodic full-band sounding.
    FullBand,
}

impl SrsResource {
    /// Resource index for logs; −1 for full-band sounding.
    pub fn log_index(&self) -> i64 {
        match self {
            SrsResource::Aperiodic(k) => *k as i64,
            SrsResource::FullBand => -1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SrsGrant {
    pub ue: UeId,
    pub resource: SrsResource,
    pub rbs: RbRange,
}

/// SRS grants of one uplink slot, in greedy pick order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SrsAllocation {
    pub grants: Vec<SrsGrant>,
}

impl SrsAllocation {
    pub fn is_empty(&self) -> bool {
        self.grants.is_empty()
    }

    pub fn for_ue(&self, ue: UeId) -> impl Iterator<Item = &SrsGrant> {
        self.grants.iter().filter(move |g| g.ue == ue)
    }

    /// RB ranges granted to `ue`, sorted and with adjacent ranges merged.
    pub fn merged_ranges(&self, ue: UeId) -> Vec<RbRange> {
        let mut ranges: Vec<RbRange> = self.for_ue(ue).map(|g| g.rbs).collect();
        ranges.sort();
        let mut out: Vec<RbRange> = Vec::with_capacity(ranges.len());
        for r in ranges {
            match out.last_mut() {
                Some(last) if last.end() >= r.start => {
                    let end = last.end().max(r.end());
                    last.len = end - last.start;
                }
                _ => out.push(r),
            }
        }
        out
    }

    /// The two hard constraints: no resource granted twice and every UE
    /// confined to one resource set (hence at most two resources).
    pub fn check_constraints(&self) -> Result<(), ConstraintViolation> {
        let full = self.grants.iter().filter(|g| g.resource == SrsResource::FullBand).count();
        if full > 0 {
            return if full == 1 && self.grants.len() == 1 { Ok(()) } else { Err(ConstraintViolation::FullBandConflict) };
        }
        let mut used = [false; N_RESOURCES];
        let mut set_of_ue: Vec<(UeId, usize, usize)> = Vec::new();
        for g in &self.grants {
            let SrsResource::Aperiodic(k) = g.resource else { unreachable!() };
            if k >= N_RESOURCES {
                return Err(ConstraintViolation::UnknownResource(k));
            }
            if core::mem::replace(&mut used[k], true) {
                return Err(ConstraintViolation::DoubleBooked(k));
            }
            let set = SrsResourceGrid::set_of(k);
            match set_of_ue.iter_mut().find(|(u, _, _)| *u == g.ue) {
                Some((_, s, count)) => {
                    if *s != set {
                        return Err(ConstraintViolation::MultipleSets(g.ue));
                    }
                    *count += 1;
                    if *count > RESOURCES_PER_SET {
                        return Err(ConstraintViolation::TooManyResources(g.ue));
                    }
                }
                None => set_of_ue.push((g.ue, set, 1)),
            }
        }
        Ok(())
    }
}

/// Round-robin full-band SRS: on the k-th uplink slot UE `k mod n_ues`
/// sounds the whole band. Non-uplink slots get nothing.
pub fn periodic_baseline(n_ues: usize, slot_index: u64, tdd: &TddPattern, grid: &FrequencyGrid) -> SrsAllocation {
    if n_ues == 0 || !tdd.is_uplink(slot_index) {
        return SrsAllocation::default();
    }
    let k = tdd.uplink_count_before(slot_index);
    SrsAllocation {
        grants: vec![SrsGrant {
            ue: (k % n_ues as u64) as UeId,
            resource: SrsResource::FullBand,
            rbs: RbRange::new(0, grid.n_rbs()),
        }],
    }
}
