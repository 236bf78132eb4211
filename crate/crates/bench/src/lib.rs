//! Benchmark inputs shared by the criterion targets.

pub const CASE_STUDY: &str = include_str!("../../core/corpus/store_attacker.sml");
pub const CEI: &str = include_str!("../../core/corpus/store_cei.sml");
pub const LISTS: &str = include_str!("../../core/corpus/lists.sml");
