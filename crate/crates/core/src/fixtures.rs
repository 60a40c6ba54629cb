//! Bundled data tables used throughout the examples and tests.

use crate::tables::{load_table, ContingencyTable};

pub const SWISS_JSON: &str = include_str!("../data/swiss.json");
pub const SWISS6_JSON: &str = include_str!("../data/swiss6.json");
pub const DIAG1_JSON: &str = include_str!("../data/diag1.json");
pub const STURMFELS3_JSON: &str = include_str!("../data/sturmfels3.json");
pub const INFLUENZA_JSON: &str = include_str!("../data/influenza.json");

/// 4x4 table with 4 on the diagonal and 2 elsewhere.
pub fn swiss() -> ContingencyTable {
    load_table(SWISS_JSON).expect("bundled fixture")
}

/// 6x6 analogue of [`swiss`].
pub fn swiss6() -> ContingencyTable {
    load_table(SWISS6_JSON).expect("bundled fixture")
}

/// 4x4 table with 1 on the diagonal and 2 elsewhere.
pub fn diag1() -> ContingencyTable {
    load_table(DIAG1_JSON).expect("bundled fixture")
}

/// The 3x3 table (5 1 1; 1 6 2; 1 2 6).
pub fn sturmfels3() -> ContingencyTable {
    load_table(STURMFELS3_JSON).expect("bundled fixture")
}

/// Four binary infection indicators for 263 individuals (Tecumseh, Michigan).
pub fn influenza() -> ContingencyTable {
    load_table(INFLUENZA_JSON).expect("bundled fixture")
}

/// Looks a bundled table up by file stem.
pub fn by_name(name: &str) -> Option<ContingencyTable> {
    let stem = name.trim_end_matches(".json");
    match stem {
        "swiss" => Some(swiss()),
        "swiss6" => Some(swiss6()),
        "diag1" => Some(diag1()),
        "sturmfels3" => Some(sturmfels3()),
        "influenza" => Some(influenza()),
        _ => None,
    }
}
