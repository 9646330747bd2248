//! Reference parameter sets, shipped as JSON under `presets/` at the
//! repository root and embedded here.

use crate::model::RawConfig;

pub const FIG3A_JSON: &str = include_str!("../../../presets/fig3a.json");
pub const FIG3E_JSON: &str = include_str!("../../../presets/fig3e.json");
pub const FIG4A_JSON: &str = include_str!("../../../presets/fig4a.json");
pub const FIG4D_JSON: &str = include_str!("../../../presets/fig4d.json");
pub const FIG6_CO_JSON: &str = include_str!("../../../presets/fig6_co.json");
pub const FIG6_COUNTER_JSON: &str = include_str!("../../../presets/fig6_counter.json");

/// All shipped presets as `(name, json)`.
pub const ALL: [(&str, &str); 6] = [
    ("fig3a", FIG3A_JSON),
    ("fig3e", FIG3E_JSON),
    ("fig4a", FIG4A_JSON),
    ("fig4d", FIG4D_JSON),
    ("fig6_co", FIG6_CO_JSON),
    ("fig6_counter", FIG6_COUNTER_JSON),
];

fn parse(text: &str) -> RawConfig {
    RawConfig::from_json(text).expect("shipped preset parses")
}

/// Three-photon resonance: Δ_B = 8, Δ_R = 3, Δ_C = 5 MHz.
pub fn fig3a() -> RawConfig {
    parse(FIG3A_JSON)
}

/// Two+one-photon resonance: Δ_B = Δ_R = 8, Δ_C = 0 MHz.
pub fn fig3e() -> RawConfig {
    parse(FIG3E_JSON)
}

pub fn fig4a() -> RawConfig {
    parse(FIG4A_JSON)
}

pub fn fig4d() -> RawConfig {
    parse(FIG4D_JSON)
}

/// [`fig3a`] with the ion oscillating at ν = 2π·1 MHz and all beams
/// co-propagating. Also available as `copropagating`.
pub fn fig6_co() -> RawConfig {
    parse(FIG6_CO_JSON)
}

/// As [`fig6_co`] but with the B beam counter-propagating. Also available
/// as `counter_B`.
pub fn fig6_counter() -> RawConfig {
    parse(FIG6_COUNTER_JSON)
}

/// Looks a preset up by file stem or geometry alias.
pub fn by_name(name: &str) -> Option<RawConfig> {
    let stem = match name.trim_end_matches(".json") {
        "copropagating" => "fig6_co",
        "counter_B" => "fig6_counter",
        other => other,
    };
    ALL.iter()
        .find(|(n, _)| *n == stem)
        .map(|(_, text)| parse(text))
}
