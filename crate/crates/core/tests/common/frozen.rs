//! Values produced by the oracle in this directory and checked against it
//! in `tests/oracle.rs`. Engine tests compare against these constants so
//! they need not rerun the oracle.

pub const WORDS: [&str; 6] = ["father", "mother", "master", "faster", "later", "water"];

/// Optimal cost of each word for one hand from the demonstration layout.
pub const SOLO_COST: [(&str, u32); 6] = [
    ("father", 6),
    ("mother", 6),
    ("master", 10),
    ("faster", 10),
    ("later", 8),
    ("water", 8),
];

/// The same with two hands and no turn taking.
pub const TWO_HAND_COST: [(&str, u32); 6] = [
    ("father", 6),
    ("mother", 6),
    ("master", 9),
    ("faster", 9),
    ("later", 7),
    ("water", 7),
];

/// (comply, avoid) for observing `unstack(h,e)`, one hand.
pub const SOLO_UNSTACK_HE: [(&str, Option<u32>, Option<u32>); 6] = [
    ("father", Some(8), Some(6)),
    ("mother", Some(8), Some(6)),
    ("master", Some(10), None),
    ("faster", Some(10), None),
    ("later", Some(8), None),
    ("water", Some(8), None),
];

/// (comply, avoid) for observing `unstack(h,e)`, two hands.
pub const TWO_HAND_UNSTACK_HE: [(&str, Option<u32>, Option<u32>); 6] = [
    ("father", Some(8), Some(6)),
    ("mother", Some(8), Some(6)),
    ("master", Some(9), None),
    ("faster", Some(9), None),
    ("later", Some(7), None),
    ("water", Some(7), None),
];

/// Posterior after `unstack(h,e)` with a uniform prior and beta 1.
pub const POSTERIOR_UNSTACK_HE: [(&str, f64); 6] = [
    ("father", 0.028124470946929325),
    ("mother", 0.028124470946929325),
    ("master", 0.23593776452653537),
    ("faster", 0.23593776452653537),
    ("later", 0.23593776452653537),
    ("water", 0.23593776452653537),
];

/// Longest shared prefix of optimal one-hand plans.
pub const WCD: [(&str, &str, usize); 3] = [("father", "mother", 2), ("later", "water", 6), ("father", "father", 6)];

/// The single optimal one-hand plan for "father".
pub const FATHER_PLAN: [&str; 6] = [
    "pickup(user,t)",
    "stack(user,t,h)",
    "pickup(user,a)",
    "stack(user,a,t)",
    "pickup(user,f)",
    "stack(user,f,a)",
];

/// Turn-taking cost of `on(t,h)` from the demonstration layout with the
/// agent to move (passes are free).
pub const JOINT_T_ON_H: u32 = 2;

pub fn solo_cost(word: &str) -> u32 {
    SOLO_COST.iter().find(|(w, _)| *w == word).unwrap().1
}
