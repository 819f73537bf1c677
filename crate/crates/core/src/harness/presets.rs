//! Named scenarios.
//!
//! The small-scale presets reuse the `(U, C, K)` column triples of the
//! small-to-medium throughput table; the large ones are Scale I-III. Only the
//! shapes match the published setups: environment seeds, episode length and
//! discount were never published, so magnitudes are not reproducible.

use super::config::ScenarioConfig;

/// `(U, C, K)` triples of the small-to-medium comparison, in table order.
pub const TABLE_SHAPES: [(usize, usize, usize); 8] = [
    (5, 5, 1),
    (7, 10, 2),
    (10, 15, 3),
    (15, 20, 4),
    (5, 5, 2),
    (8, 10, 4),
    (12, 15, 6),
    (15, 20, 8),
];

pub const SCALE_SHAPES: [(&str, (usize, usize, usize)); 3] = [
    ("scale_i", (1000, 1000, 200)),
    ("scale_ii", (1500, 1500, 300)),
    ("scale_iii", (2000, 2000, 400)),
];

pub fn shape_id((u, c, k): (usize, usize, usize)) -> String {
    format!("u{u}_c{c}_k{k}")
}

/// Every table shape, shape-matched only.
pub fn table_presets() -> Vec<ScenarioConfig> {
    TABLE_SHAPES
        .iter()
        .map(|&s| ScenarioConfig::shape(&shape_id(s), s.0, s.1, s.2))
        .collect()
}

/// Looks up `u5_c5_k1`-style table shapes and `scale_i`/`scale_ii`/`scale_iii`.
pub fn preset(name: &str) -> Option<ScenarioConfig> {
    if let Some(&(id, (u, c, k))) = SCALE_SHAPES.iter().find(|(id, _)| *id == name) {
        return Some(ScenarioConfig::shape(id, u, c, k));
    }
    TABLE_SHAPES
        .iter()
        .find(|&&s| shape_id(s) == name)
        .map(|&s| ScenarioConfig::shape(name, s.0, s.1, s.2))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_resolve() {
        assert_eq!(table_presets().len(), 8);
        let s = preset("u15_c20_k8").unwrap();
        assert_eq!((s.num_users, s.num_channels, s.k_active), (15, 20, 8));
        assert_eq!(preset("scale_ii").unwrap().num_users, 1500);
        assert!(preset("u1_c1_k1").is_none());
    }
}
