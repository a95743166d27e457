//! The bundled example systems and sweep templates.

pub const SCALAR_IMPULSE: &str = include_str!("../systems/scalar_impulse.json");
pub const SIN_IMPULSE: &str = include_str!("../systems/sin_impulse.json");
pub const ROTATION_2X2: &str = include_str!("../systems/rotation_2x2.json");
pub const MARKUS_YAMABE: &str = include_str!("../systems/markus_yamabe.json");

/// Scalar impulse example with `A = 2` and the product `AC` as parameter `AC`.
pub const SCALAR_IMPULSE_TEMPLATE: &str = include_str!("../systems/scalar_impulse.template.json");
/// `z' = sin(2 pi t) z([t])` with jump factor `c` as parameter `c`.
pub const SIN_IMPULSE_TEMPLATE: &str = include_str!("../systems/sin_impulse.template.json");

/// `(file name, document)` for every bundled system.
pub const ALL: [(&str, &str); 4] = [
    ("scalar_impulse.json", SCALAR_IMPULSE),
    ("sin_impulse.json", SIN_IMPULSE),
    ("rotation_2x2.json", ROTATION_2X2),
    ("markus_yamabe.json", MARKUS_YAMABE),
];
