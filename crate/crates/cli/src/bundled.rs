//! Scenarios compiled into the binary.

use crate::config::Config;

pub const BUNDLED: &[(&str, &str)] = &[
    ("figure2", include_str!("../scenarios/figure2.cfg")),
    ("figure3", include_str!("../scenarios/figure3.cfg")),
    ("sde", include_str!("../scenarios/sde.cfg")),
    ("ringdown", include_str!("../scenarios/ringdown.cfg")),
];

/// Text of a bundled scenario, accepting an optional `.cfg` suffix.
pub fn find(name: &str) -> Option<&'static str> {
    let name = name.strip_suffix(".cfg").unwrap_or(name);
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

/// `(name, mode, description)` of every bundled scenario.
pub fn list() -> Vec<(&'static str, String, String)> {
    BUNDLED
        .iter()
        .map(|(n, text)| {
            let cfg = Config::parse(text).expect("bundled scenario parses");
            let get = |k: &str| cfg.get("scenario", k).map(|e| e.value.clone()).unwrap_or_default();
            (*n, get("mode"), get("description"))
        })
        .collect()
}
