mod hexbin;
mod priority;

pub use hexbin::{compute_ward_map, hex_center, hex_of_point, HexCell, WardMap, DEFAULT_HEX_RADIUS_MM};
pub use priority::{
    classify_member_tick, compute_priority_breakdown, lift_tick, Behaviour, MemberState,
    PriorityBreakdown, PriorityParams,
};
