//! Built-in scenarios, also shipped as JSON under `scenarios/`.
//!
//! `resistive` and `inductive` carry the calibrated noise used by the
//! validation protocols; the `_clean` variants are noiseless.

use std::path::Path;

use super::HostError;
use crate::simkernel::Scenario;

pub const PRESETS: [(&str, &str); 5] = [
    ("resistive", include_str!("../../scenarios/resistive.json")),
    ("inductive", include_str!("../../scenarios/inductive.json")),
    ("resistive_clean", include_str!("../../scenarios/resistive_clean.json")),
    ("inductive_clean", include_str!("../../scenarios/inductive_clean.json")),
    ("switched", include_str!("../../scenarios/switched.json")),
];

pub fn names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(name, _)| *name)
}

pub fn preset(name: &str) -> Option<Scenario> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| Scenario::from_json(text).expect("bundled scenarios are valid"))
}

/// Loads a scenario file, falling back to a preset of that name (with or
/// without a `.json` suffix) when no such file exists.
pub fn load(spec: &str) -> Result<Scenario, HostError> {
    let path = Path::new(spec);
    if path.is_file() {
        return Ok(Scenario::from_json(&std::fs::read_to_string(path)?)?);
    }
    let stem = path
        .file_name()
        .and_then(|f| f.to_str())
        .map(|f| f.strip_suffix(".json").unwrap_or(f))
        .unwrap_or(spec);
    preset(stem).ok_or_else(|| {
        HostError::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!(
                "no scenario file {spec:?} and no preset of that name (presets: {})",
                names().collect::<Vec<_>>().join(", ")
            ),
        ))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse_and_resolve() {
        for name in names() {
            let s = preset(name).unwrap();
            assert_eq!(s.id, name);
        }
        assert_eq!(load("resistive.json").unwrap().id, "resistive");
        assert_eq!(load("some/dir/inductive_clean.json").unwrap().id, "inductive_clean");
        assert!(load("nope").is_err());
    }
}
