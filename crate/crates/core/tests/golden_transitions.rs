//! The count machine as exported for clients must match the checked-in table,
//! which was written out by hand from the rules of the at-bat.

use atbat::game::{next_state_on_label, transition_table, Count, PitchLabel};
use serde_json::Value;

const GOLDEN: &str = include_str!("golden/transitions.json");

#[test]
fn exported_table_matches_golden_file() {
    let golden: Value = serde_json::from_str(GOLDEN).unwrap();
    let exported = serde_json::to_value(transition_table()).unwrap();
    assert_eq!(exported, golden);
}

#[test]
fn golden_file_covers_every_pair_once() {
    let golden: Vec<Value> = serde_json::from_str(GOLDEN).unwrap();
    assert_eq!(golden.len(), 12 * 6);
    let mut seen = std::collections::BTreeSet::new();
    for row in &golden {
        let count: Count = row["count"].as_str().unwrap().parse().unwrap();
        let event = PitchLabel::from_code(row["event"].as_str().unwrap()).unwrap();
        assert!(seen.insert((count, event.code())));
        assert_eq!(next_state_on_label(count, event).label(), row["next"].as_str().unwrap());
    }
}

#[test]
fn foul_with_two_strikes_stays_put() {
    for b in 0..4 {
        let c = Count::new(b, 2).unwrap();
        assert_eq!(next_state_on_label(c, PitchLabel::Foul).label(), c.label());
    }
}
