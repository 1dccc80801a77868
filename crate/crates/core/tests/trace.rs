use carts_core::trace::*;
use carts_core::{FrequencyGrid, TddPattern};
use proptest::prelude::*;

fn assert_well_formed(s: &TrafficSchedule, n_rbs: usize, tdd: &TddPattern) {
    let mut slots: Vec<u64> = s.iter().map(|(slot, _)| slot).collect();
    slots.dedup();
    for slot in slots {
        assert!(tdd.is_uplink(slot), "grant on non-uplink slot {slot}");
        let grants = s.grants(slot);
        for (i, a) in grants.iter().enumerate() {
            assert!(a.rbs.len > 0 && a.rbs.end() <= n_rbs, "{a:?}");
            assert!(a.ue < s.n_ues());
            for b in &grants[i + 1..] {
                assert!(!a.rbs.overlaps(&b.rbs), "slot {slot}: {a:?} overlaps {b:?}");
            }
        }
    }
}

#[test]
fn rescale_examples() {
    let r = PuschRecord { frame: 12, slot: 3, rnti: 0x4601, start_rb: 10, num_rb: 25 };
    assert_eq!(rescale(&r, 2.72, 272).num_rb, 68);
    assert_eq!(rescale(&PuschRecord { num_rb: 1, ..r }, 2.72, 272).num_rb, 4);
    let edge = rescale(&PuschRecord { start_rb: 90, num_rb: 10, ..r }, 2.72, 272);
    assert_eq!((edge.start_rb, edge.num_rb), (244, 28));
}

#[test]
fn dddsu_has_one_uplink_slot_per_period() {
    let tdd = TddPattern::dddsu();
    let uplink: Vec<u64> = (0..20).filter(|&s| tdd.is_uplink(s)).collect();
    assert_eq!(uplink, [4, 9, 14, 19]);
    let full = synth_traffic(TrafficLevel::Full, 3, 20, &FrequencyGrid::nr_100mhz(), &tdd, 0).unwrap();
    assert_eq!(full.iter().filter(|(s, _)| *s == 4).count(), 3);
    assert!((0..20).filter(|s| !tdd.is_uplink(*s)).all(|s| full.grants(s).is_empty()));
}

#[test]
fn full_split_leaves_remainder_idle_when_not_a_multiple_of_four() {
    // 272 / 3 = 90 r 2: UE 0 is offered 92, the others 90; each is floored
    // to a multiple of 4.
    assert_eq!(full_split(3, 272), [92, 88, 88]);
    assert_eq!(full_split(2, 272), [136, 136]);
    for n in 1..=68 {
        let split = full_split(n, 272);
        assert!(split.iter().all(|&s| s % 4 == 0 && s > 0));
        assert!(split.iter().sum::<usize>() <= 272);
        assert!(272 - split.iter().sum::<usize>() < 4 * n);
    }
}

fn arb_records() -> impl Strategy<Value = Vec<PuschRecord>> {
    prop::collection::vec(
        (0u64..4, 0u64..10, 0u32..8, 0usize..100, 1usize..40).prop_map(|(frame, slot, rnti, start, len)| {
            let num_rb = len.min(100 - start).max(1);
            PuschRecord { frame, slot, rnti, start_rb: start.min(99), num_rb }
        }),
        0..120,
    )
}

proptest! {
    #[test]
    fn synthetic_schedules_never_overlap(
        level in prop_oneof![
            Just(TrafficLevel::Zero), Just(TrafficLevel::Low), Just(TrafficLevel::Medium),
            Just(TrafficLevel::High), Just(TrafficLevel::Full)
        ],
        n in 1usize..120,
        seed in any::<u64>(),
    ) {
        let grid = FrequencyGrid::nr_100mhz();
        let tdd = TddPattern::dddsu();
        let s = synth_traffic(level, n, 200, &grid, &tdd, seed).unwrap();
        assert_well_formed(&s, grid.n_rbs(), &tdd);
        prop_assert!(s.validate(grid.n_rbs()).is_ok());
        if level == TrafficLevel::Zero {
            prop_assert!(s.is_empty());
        }
    }

    #[test]
    fn selected_traces_never_overlap(records in arb_records(), n in 1usize..6) {
        let tdd = TddPattern::dddsu();
        let (scaled, _) = rescale_all(&records, 2.72, 272);
        let (s, stats) = select_top_n(&scaled, n, 272, &tdd).unwrap();
        assert_well_formed(&s, 272, &tdd);
        prop_assert!(s.n_ues() <= n);
        let placed = s.iter().count();
        let kept = scaled.iter().filter(|r| s.rntis.contains(&r.rnti)).count();
        prop_assert_eq!(placed + stats.dropped, kept);
    }

    #[test]
    fn rescale_matches_rounding_rule(start in 0usize..100, len in 1usize..=100, factor in 0.5f64..4.0) {
        let len = len.min(100 - start).max(1);
        let r = PuschRecord { frame: 0, slot: 0, rnti: 1, start_rb: start, num_rb: len };
        let out = rescale(&r, factor, 272);
        let scaled = (len as f64 * factor).round();
        let nearest4 = (4.0 * (scaled / 4.0 + 0.5).floor()).clamp(4.0, 272.0) as usize;
        prop_assert_eq!(out.num_rb, nearest4);
        prop_assert!(out.start_rb + out.num_rb <= 272);
        let wanted = (start as f64 * factor).round() as usize;
        prop_assert_eq!(out.start_rb, wanted.min(272 - out.num_rb));
    }

    #[test]
    fn rescale_is_monotone_and_fixed_at_unit_factor(a in 1usize..70, b in 1usize..70, factor in 0.5f64..3.9) {
        let rec = |num_rb| PuschRecord { frame: 0, slot: 0, rnti: 1, start_rb: 0, num_rb };
        let (lo, hi) = (a.min(b), a.max(b));
        prop_assert!(rescale(&rec(lo), factor, 272).num_rb <= rescale(&rec(hi), factor, 272).num_rb);
        let m4 = rec(4 * (lo / 4).max(1));
        prop_assert_eq!(rescale(&m4, 1.0, 272), m4);
    }
}
