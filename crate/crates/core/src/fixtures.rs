//! The two bundled example families.

use crate::io::parse_family;
use crate::system_model::SystemFamily;

pub const EXAMPLE1_JSON: &str = include_str!("../fixtures/example1.json");
pub const EXAMPLE2_JSON: &str = include_str!("../fixtures/example2.json");

/// Three stable discrete subsystems on `R⁴` with a scalar disturbance.
pub fn example1() -> SystemFamily {
    parse_family(EXAMPLE1_JSON, "example1.json").expect("bundled example1.json is valid")
}

/// Two Hurwitz continuous subsystems on `R²`; `B = 0`.
pub fn example2() -> SystemFamily {
    parse_family(EXAMPLE2_JSON, "example2.json").expect("bundled example2.json is valid")
}
