//! PUSCH allocation traces: rescaling from the 100-RB capture grid,
//! active-UE selection and synthetic traffic patterns.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::types::{FrequencyGrid, RbRange, TddPattern, UeId};

/// Scaling from the 100-RB LTE capture grid to 272 RBs.
pub const DEFAULT_SCALE_FACTOR: f64 = 2.72;

/// RB granularity of rescaled and synthetic allocations.
pub const RB_GRANULARITY: usize = 4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TraceError {
    #[error("row {line}: num_rb must be positive")]
    NonPositiveLength { line: usize },
    #[error("row {line}: allocation [{start}, {end}) exceeds the {grid}-RB source grid")]
    OutOfGrid { line: usize, start: usize, end: usize, grid: usize },
    #[error("slot {slot}: ue {a} and ue {b} overlap")]
    Overlap { slot: u64, a: UeId, b: UeId },
    #[error("grant for ue {ue} outside the {n_rbs}-RB grid")]
    GrantOutOfGrid { ue: UeId, n_rbs: usize },
    #[error("need at least one UE")]
    NoUes,
}

/// One row of a sniffed PUSCH trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PuschRecord {
    pub frame: u64,
    pub slot: u64,
    pub rnti: u32,
    pub start_rb: usize,
    pub num_rb: usize,
}

impl PuschRecord {
    pub fn end_rb(&self) -> usize {
        self.start_rb + self.num_rb
    }

    /// Checks the record against a source grid. `line` is only used for the
    /// diagnostic.
    pub fn validate(&self, source_rbs: usize, line: usize) -> Result<(), TraceError> {
        if self.num_rb == 0 {
            return Err(TraceError::NonPositiveLength { line });
        }
        if self.end_rb() > source_rbs {
            return Err(TraceError::OutOfGrid { line, start: self.start_rb, end: self.end_rb(), grid: source_rbs });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RescaleStats {
    pub records: usize,
    pub clamped: usize,
}

/// Rescales one allocation onto a `target_rbs` grid.
///
/// Length: `round(num_rb × factor)`, then to the nearest multiple of 4 with
/// a minimum of 4. Start: `round(start_rb × factor)`, pulled down so the
/// allocation ends inside the grid.
pub fn rescale(record: &PuschRecord, factor: f64, target_rbs: usize) -> PuschRecord {
    rescale_tracked(record, factor, target_rbs).0
}

fn rescale_tracked(record: &PuschRecord, factor: f64, target_rbs: usize) -> (PuschRecord, bool) {
    let scaled = (record.num_rb as f64 * factor).round() as usize;
    let num = ((scaled + RB_GRANULARITY / 2) / RB_GRANULARITY * RB_GRANULARITY)
        .max(RB_GRANULARITY)
        .min(target_rbs);
    let start = (record.start_rb as f64 * factor).round() as usize;
    let clamped = start + num > target_rbs;
    let start = if clamped { target_rbs - num } else { start };
    (PuschRecord { start_rb: start, num_rb: num, ..*record }, clamped)
}

pub fn rescale_all(records: &[PuschRecord], factor: f64, target_rbs: usize) -> (Vec<PuschRecord>, RescaleStats) {
    let mut stats = RescaleStats { records: records.len(), clamped: 0 };
    let out = records
        .iter()
        .map(|r| {
            let (r, clamped) = rescale_tracked(r, factor, target_rbs);
            stats.clamped += clamped as usize;
            r
        })
        .collect();
    (out, stats)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PuschGrant {
    pub ue: UeId,
    pub rbs: RbRange,
}

/// PUSCH grants per absolute slot index on the emulation grid.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrafficSchedule {
    n_ues: usize,
    horizon_slots: u64,
    slots: BTreeMap<u64, Vec<PuschGrant>>,
    /// RNTI of each UE when the schedule came from a trace.
    pub rntis: Vec<u32>,
}

impl TrafficSchedule {
    pub fn new(n_ues: usize, horizon_slots: u64) -> Self {
        Self { n_ues, horizon_slots, slots: BTreeMap::new(), rntis: Vec::new() }
    }

    pub fn n_ues(&self) -> usize {
        self.n_ues
    }

    pub fn horizon_slots(&self) -> u64 {
        self.horizon_slots
    }

    pub fn is_empty(&self) -> bool {
        self.slots.values().all(Vec::is_empty)
    }

    pub fn grants(&self, slot: u64) -> &[PuschGrant] {
        self.slots.get(&slot).map_or(&[], Vec::as_slice)
    }

    pub fn push(&mut self, slot: u64, grant: PuschGrant) {
        self.slots.entry(slot).or_default().push(grant);
        self.horizon_slots = self.horizon_slots.max(slot + 1);
    }

    /// All (slot, grant) pairs in slot order.
    pub fn iter(&self) -> impl Iterator<Item = (u64, &PuschGrant)> {
        self.slots.iter().flat_map(|(&s, g)| g.iter().map(move |g| (s, g)))
    }

    pub fn total_rbs(&self, ue: UeId) -> usize {
        self.iter().filter(|(_, g)| g.ue == ue).map(|(_, g)| g.rbs.len).sum()
    }

    /// Checks bounds and that no two grants in a slot share an RB.
    pub fn validate(&self, n_rbs: usize) -> Result<(), TraceError> {
        for (&slot, grants) in &self.slots {
            for (i, a) in grants.iter().enumerate() {
                if a.rbs.end() > n_rbs || a.rbs.len == 0 {
                    return Err(TraceError::GrantOutOfGrid { ue: a.ue, n_rbs });
                }
                for b in &grants[i + 1..] {
                    if a.rbs.overlaps(&b.rbs) {
                        return Err(TraceError::Overlap { slot, a: a.ue, b: b.ue });
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SelectStats {
    pub distinct_ues: usize,
    pub kept_ues: usize,
    pub instants: usize,
    pub shifted: usize,
    pub dropped: usize,
}

impl SelectStats {
    /// Fewer distinct RNTIs than requested.
    pub fn short_of_ues(&self, requested: usize) -> bool {
        self.distinct_ues < requested
    }
}

/// Keeps the `n` RNTIs with the largest total RB count and lays their
/// allocations onto uplink slots of `tdd`.
///
/// UE ids are assigned in rank order (UE 0 has the most RBs, ties go to the
/// smaller RNTI). The k-th distinct (frame, slot) instant maps to the k-th
/// uplink slot. A record that collides with an earlier one in the same
/// instant moves up to the next free span; it is dropped when none fits.
pub fn select_top_n(
    records: &[PuschRecord],
    n: usize,
    n_rbs: usize,
    tdd: &TddPattern,
) -> Result<(TrafficSchedule, SelectStats), TraceError> {
    if n == 0 {
        return Err(TraceError::NoUes);
    }
    let mut totals: BTreeMap<u32, usize> = BTreeMap::new();
    for r in records {
        *totals.entry(r.rnti).or_default() += r.num_rb;
    }
    let mut ranked: Vec<(u32, usize)> = totals.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut stats = SelectStats { distinct_ues: ranked.len(), ..Default::default() };
    if ranked.len() < n {
        log::warn!("trace has {} distinct RNTIs, fewer than the {} requested", ranked.len(), n);
    }
    ranked.truncate(n);
    stats.kept_ues = ranked.len();
    let ue_of = |rnti: u32| ranked.iter().position(|&(r, _)| r == rnti);

    let mut instants: Vec<(u64, u64)> = records.iter().map(|r| (r.frame, r.slot)).collect();
    instants.sort_unstable();
    instants.dedup();
    stats.instants = instants.len();

    let mut schedule = TrafficSchedule::new(ranked.len(), 0);
    schedule.rntis = ranked.iter().map(|&(r, _)| r).collect();
    for (k, instant) in instants.iter().enumerate() {
        let slot = tdd.nth_uplink_slot(k as u64);
        let mut taken: Vec<RbRange> = Vec::new();
        for r in records.iter().filter(|r| (r.frame, r.slot) == *instant) {
            let Some(ue) = ue_of(r.rnti) else { continue };
            let wanted = RbRange::new(r.start_rb, r.num_rb.min(n_rbs));
            match first_free(&taken, wanted, n_rbs) {
                Some(rbs) => {
                    stats.shifted += (rbs != wanted) as usize;
                    taken.push(rbs);
                    schedule.push(slot, PuschGrant { ue, rbs });
                }
                None => stats.dropped += 1,
            }
        }
    }
    schedule.horizon_slots = tdd.period() * instants.len() as u64;
    Ok((schedule, stats))
}

/// Lowest start ≥ `wanted.start` at which `wanted.len` RBs are free.
fn first_free(taken: &[RbRange], wanted: RbRange, n_rbs: usize) -> Option<RbRange> {
    let mut start = wanted.start;
    loop {
        let candidate = RbRange::new(start, wanted.len);
        if candidate.end() > n_rbs {
            return None;
        }
        match taken.iter().filter(|t| t.overlaps(&candidate)).map(RbRange::end).max() {
            Some(end) => start = end,
            None => return Some(candidate),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum TrafficLevel {
    /// No PUSCH at all.
    Zero,
    Low,
    Medium,
    High,
    /// Every uplink slot splits the whole grid among all UEs.
    Full,
}

impl TrafficLevel {
    /// Stationary probability that a UE is in a burst.
    pub fn on_probability(&self) -> f64 {
        match self {
            TrafficLevel::Zero => 0.0,
            TrafficLevel::Low => 0.15,
            TrafficLevel::Medium => 0.4,
            TrafficLevel::High => 0.7,
            TrafficLevel::Full => 1.0,
        }
    }
}

/// Mean burst length of the on/off traffic model, in uplink slots.
pub const MEAN_BURST_SLOTS: f64 = 4.0;
const MIN_REQUEST_RBS: usize = 8;
const MAX_REQUEST_RBS: usize = 96;

/// Synthetic PUSCH pattern over `horizon_slots`, uplink slots only.
///
/// `Full` gives each UE `n_rbs / n` RBs with the remainder added to UE 0,
/// each rounded down to a multiple of 4, and rotates the order of the
/// chunks by one UE per uplink slot. When there are more UEs than
/// 4-RB chunks, the chunks rotate round-robin across slots. `Low`,
/// `Medium` and `High` run a per-UE on/off Markov chain seeded by `seed`.
pub fn synth_traffic(
    level: TrafficLevel,
    n_ues: usize,
    horizon_slots: u64,
    grid: &FrequencyGrid,
    tdd: &TddPattern,
    seed: u64,
) -> Result<TrafficSchedule, TraceError> {
    if n_ues == 0 {
        return Err(TraceError::NoUes);
    }
    let mut schedule = TrafficSchedule::new(n_ues, horizon_slots);
    match level {
        TrafficLevel::Zero => {}
        TrafficLevel::Full => fill_full(&mut schedule, n_ues, horizon_slots, grid.n_rbs(), tdd),
        _ => fill_bursty(&mut schedule, level, n_ues, horizon_slots, grid.n_rbs(), tdd, seed),
    }
    Ok(schedule)
}

/// Per-UE RB counts of the full-traffic split.
pub fn full_split(n_ues: usize, n_rbs: usize) -> Vec<usize> {
    let q = n_rbs / n_ues;
    let r = n_rbs % n_ues;
    (0..n_ues)
        .map(|u| {
            let share = if u == 0 { q + r } else { q };
            share / RB_GRANULARITY * RB_GRANULARITY
        })
        .collect()
}

fn fill_full(schedule: &mut TrafficSchedule, n_ues: usize, horizon: u64, n_rbs: usize, tdd: &TddPattern) {
    let chunks = n_rbs / RB_GRANULARITY;
    let uplink = (0..horizon).filter(|&s| tdd.is_uplink(s));
    if n_ues <= chunks {
        let split = full_split(n_ues, n_rbs);
        for (k, slot) in uplink.enumerate() {
            let mut start = 0;
            for i in 0..n_ues {
                let ue = (k + i) % n_ues;
                schedule.push(slot, PuschGrant { ue, rbs: RbRange::new(start, split[ue]) });
                start += split[ue];
            }
        }
    } else {
        for (k, slot) in uplink.enumerate() {
            for c in 0..chunks {
                let ue = (k * chunks + c) % n_ues;
                schedule.push(slot, PuschGrant { ue, rbs: RbRange::new(c * RB_GRANULARITY, RB_GRANULARITY) });
            }
        }
    }
    schedule.horizon_slots = horizon;
}

fn fill_bursty(
    schedule: &mut TrafficSchedule,
    level: TrafficLevel,
    n_ues: usize,
    horizon: u64,
    n_rbs: usize,
    tdd: &TddPattern,
    seed: u64,
) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = level.on_probability();
    let p_off = 1.0 / MEAN_BURST_SLOTS;
    let p_on = p * p_off / (1.0 - p);
    let mut on: Vec<bool> = (0..n_ues).map(|_| rng.random_bool(p)).collect();
    let max_units = MAX_REQUEST_RBS / RB_GRANULARITY;
    let min_units = MIN_REQUEST_RBS / RB_GRANULARITY;
    let grid_units = n_rbs / RB_GRANULARITY;
    for slot in (0..horizon).filter(|&s| tdd.is_uplink(s)) {
        for state in on.iter_mut() {
            *state = if *state { !rng.random_bool(p_off) } else { rng.random_bool(p_on.min(1.0)) };
        }
        let mut active: Vec<UeId> = (0..n_ues).filter(|&u| on[u]).collect();
        active.shuffle(&mut rng);
        active.truncate(grid_units);
        // sizes in 4-RB units
        let mut units: Vec<usize> = active.iter().map(|_| rng.random_range(min_units..=max_units)).collect();
        let mut total: usize = units.iter().sum();
        while total > grid_units {
            let i = (0..units.len()).max_by_key(|&i| (units[i], usize::MAX - i)).expect("non-empty");
            units[i] -= 1;
            total -= 1;
        }
        let mut free = grid_units - total;
        let mut cursor = 0;
        for (i, (&ue, &u)) in active.iter().zip(&units).enumerate() {
            let remaining = active.len() - i;
            let gap = if free > 0 { rng.random_range(0..=free / remaining) } else { 0 };
            free -= gap;
            cursor += gap;
            schedule.push(slot, PuschGrant { ue, rbs: RbRange::new(cursor * RB_GRANULARITY, u * RB_GRANULARITY) });
            cursor += u;
        }
    }
    schedule.horizon_slots = horizon;
}

/// Per-UE RB masks for one slot: `mask[ue][rb]`.
pub fn pusch_mask(grants: &[PuschGrant], n_ues: usize, n_rbs: usize) -> Vec<Vec<bool>> {
    let mut mask = vec![vec![false; n_rbs]; n_ues];
    for g in grants {
        for rb in g.rbs.range() {
            mask[g.ue][rb] = true;
        }
    }
    mask
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(frame: u64, slot: u64, rnti: u32, start_rb: usize, num_rb: usize) -> PuschRecord {
        PuschRecord { frame, slot, rnti, start_rb, num_rb }
    }

    #[test]
    fn rescale_examples() {
        assert_eq!(rescale(&rec(0, 0, 1, 0, 25), 2.72, 272).num_rb, 68);
        assert_eq!(rescale(&rec(0, 0, 1, 0, 1), 2.72, 272).num_rb, 4);
        let r = rescale(&rec(0, 0, 1, 90, 10), 2.72, 272);
        assert_eq!((r.start_rb, r.num_rb), (244, 28));
    }

    #[test]
    fn rescale_counts_clamps() {
        let (_, stats) = rescale_all(&[rec(0, 0, 1, 90, 10), rec(0, 0, 1, 0, 10)], 2.72, 272);
        assert_eq!(stats, RescaleStats { records: 2, clamped: 1 });
    }

    #[test]
    fn validate_rejects_bad_rows() {
        assert!(rec(0, 0, 1, 95, 10).validate(100, 3).is_err());
        assert!(rec(0, 0, 1, 0, 0).validate(100, 3).is_err());
        assert!(rec(0, 0, 1, 90, 10).validate(100, 3).is_ok());
    }

    #[test]
    fn top_n_keeps_largest() {
        let records = [rec(0, 0, 0xA, 0, 100), rec(0, 1, 0xB, 0, 50), rec(0, 2, 0xC, 0, 10)];
        let tdd = TddPattern::dddsu();
        let (s, stats) = select_top_n(&records, 2, 272, &tdd).unwrap();
        assert_eq!(s.rntis, [0xA, 0xB]);
        assert_eq!(s.n_ues(), 2);
        assert_eq!(stats.kept_ues, 2);
        assert_eq!(s.grants(4), &[PuschGrant { ue: 0, rbs: RbRange::new(0, 100) }]);
        assert_eq!(s.grants(9), &[PuschGrant { ue: 1, rbs: RbRange::new(0, 50) }]);
        assert!(s.grants(14).is_empty());
    }

    #[test]
    fn top_n_tie_prefers_smaller_rnti() {
        let records = [rec(0, 0, 0x20, 0, 8), rec(0, 0, 0x10, 8, 8), rec(0, 1, 0x30, 0, 8)];
        let (s, _) = select_top_n(&records, 2, 272, &TddPattern::dddsu()).unwrap();
        assert_eq!(s.rntis, [0x10, 0x20]);
    }

    #[test]
    fn top_n_with_too_few_ues_keeps_all() {
        let records = [rec(0, 0, 1, 0, 8)];
        let (s, stats) = select_top_n(&records, 5, 272, &TddPattern::dddsu()).unwrap();
        assert_eq!(s.n_ues(), 1);
        assert!(stats.short_of_ues(5));
    }

    #[test]
    fn collisions_shift_then_drop() {
        let records = [rec(0, 0, 1, 0, 8), rec(0, 0, 2, 4, 8), rec(0, 0, 3, 0, 8)];
        let (s, stats) = select_top_n(&records, 3, 20, &TddPattern::dddsu()).unwrap();
        let g = s.grants(4);
        assert_eq!(g[1].rbs, RbRange::new(8, 8));
        assert_eq!(stats.shifted, 1);
        assert_eq!(stats.dropped, 1);
        s.validate(20).unwrap();
    }

    #[test]
    fn full_split_examples() {
        assert_eq!(full_split(2, 272), [136, 136]);
        assert_eq!(full_split(3, 272), [92, 88, 88]);
        assert_eq!(full_split(10, 272), [28, 24, 24, 24, 24, 24, 24, 24, 24, 24]);
    }

    #[test]
    fn zero_and_full_patterns() {
        let g = FrequencyGrid::nr_100mhz();
        let tdd = TddPattern::dddsu();
        let z = synth_traffic(TrafficLevel::Zero, 4, 100, &g, &tdd, 0).unwrap();
        assert!(z.is_empty());
        let f = synth_traffic(TrafficLevel::Full, 2, 10, &g, &tdd, 0).unwrap();
        assert_eq!(f.grants(4).len(), 2);
        assert!(f.grants(3).is_empty());
        // the chunk order rotates by one UE per uplink slot
        assert_eq!(f.grants(4)[1], PuschGrant { ue: 1, rbs: RbRange::new(136, 136) });
        assert_eq!(f.grants(9)[1], PuschGrant { ue: 0, rbs: RbRange::new(136, 136) });
    }

    #[test]
    fn full_with_many_ues_rotates_chunks() {
        let g = FrequencyGrid::nr_100mhz();
        let f = synth_traffic(TrafficLevel::Full, 100, 50, &g, &TddPattern::dddsu(), 0).unwrap();
        f.validate(272).unwrap();
        assert!((0..100).all(|u| f.total_rbs(u) > 0));
    }

    #[test]
    fn bursty_levels_are_ordered() {
        let g = FrequencyGrid::nr_100mhz();
        let tdd = TddPattern::dddsu();
        let load = |level| {
            let s = synth_traffic(level, 10, 20_000, &g, &tdd, 7).unwrap();
            s.validate(272).unwrap();
            s.iter().map(|(_, g)| g.rbs.len).sum::<usize>()
        };
        let (low, med, high) = (load(TrafficLevel::Low), load(TrafficLevel::Medium), load(TrafficLevel::High));
        assert!(0 < low && low < med && med < high, "{low} {med} {high}");
    }

    #[test]
    fn bursty_is_deterministic() {
        let g = FrequencyGrid::nr_100mhz();
        let tdd = TddPattern::dddsu();
        let a = synth_traffic(TrafficLevel::Medium, 6, 500, &g, &tdd, 3).unwrap();
        let b = synth_traffic(TrafficLevel::Medium, 6, 500, &g, &tdd, 3).unwrap();
        assert_eq!(a, b);
    }
}
