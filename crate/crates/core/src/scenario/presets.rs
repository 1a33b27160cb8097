//! Built-in scenarios.

pub const PRESETS: [&str; 4] = ["arch-90", "cantilever-morph", "stent-straight-quarter", "stent-curved-half"];

pub fn preset_text(name: &str) -> Option<&'static str> {
    match name {
        "arch-90" => Some(include_str!("../../presets/arch-90.toml")),
        "cantilever-morph" => Some(include_str!("../../presets/cantilever-morph.toml")),
        "stent-straight-quarter" => Some(include_str!("../../presets/stent-straight-quarter.toml")),
        "stent-curved-half" => Some(include_str!("../../presets/stent-curved-half.toml")),
        _ => None,
    }
}
