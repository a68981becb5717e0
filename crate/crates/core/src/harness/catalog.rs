//! Scenario configs shipped with the crate.

const BUNDLED: &[(&str, &str)] = &[
    ("conformal-refine", include_str!("../../scenarios/conformal-refine.json")),
    ("conformal-rf", include_str!("../../scenarios/conformal-rf.json")),
    ("flat-static", include_str!("../../scenarios/flat-static.json")),
    ("sphere-bounded-ricci", include_str!("../../scenarios/sphere-bounded-ricci.json")),
    (
        "sphere-bounded-ricci-positive-h",
        include_str!("../../scenarios/sphere-bounded-ricci-positive-h.json"),
    ),
    ("sphere-equality", include_str!("../../scenarios/sphere-equality.json")),
    ("sphere-mixed", include_str!("../../scenarios/sphere-mixed.json")),
    ("sphere-mixed-positive-h", include_str!("../../scenarios/sphere-mixed-positive-h.json")),
    ("warped-rhf", include_str!("../../scenarios/warped-rhf.json")),
    ("warped-rhf-curved", include_str!("../../scenarios/warped-rhf-curved.json")),
    ("warped-rhf-flat", include_str!("../../scenarios/warped-rhf-flat.json")),
];

pub fn names() -> impl Iterator<Item = &'static str> {
    BUNDLED.iter().map(|(n, _)| *n)
}

/// JSON text of a bundled scenario.
pub fn get(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::config::parse_config;
    use crate::geometry::registry::global;

    #[test]
    fn bundled_scenarios_parse_and_name_themselves() {
        for name in names() {
            let cfg = parse_config(get(name).unwrap(), global()).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(cfg.name, name);
        }
        assert!(get("missing").is_none());
    }
}
