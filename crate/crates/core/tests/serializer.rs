use std::collections::BTreeMap;

use proptest::prelude::*;
use regex::Regex;

use specalloc::allocation::RawAction;
use specalloc::netenv::{ChannelId, EnvConfig, Environment, UserId};
use specalloc::serializer::{
    estimate_tokens, parse_action, render_action, serialize, summarize_state, DetailLevel,
};

/// Independent statement of the accepted grammar. Captures the body.
fn reference_grammar() -> Regex {
    Regex::new(r"^action\s*=\s*\{(\s*(?:\d+\s*:\s*\d+\s*(?:,\s*\d+\s*:\s*\d+\s*)*,?\s*)?)\}").unwrap()
}

fn reference_parse(text: &str) -> Option<Result<RawAction, ()>> {
    let opener = Regex::new(r"^action\s*=\s*\{").unwrap();
    let start = text
        .match_indices("action")
        .map(|(i, _)| i)
        .filter(|&i| {
            let prev = text[..i].chars().next_back();
            !prev.is_some_and(|c| c.is_ascii_alphanumeric() || c == '_')
                && opener.is_match(&text[i..])
        })
        .last()?;
    let Some(caps) = reference_grammar().captures(&text[start..]) else {
        return Some(Err(()));
    };
    let entry = Regex::new(r"(\d+)\s*:\s*(\d+)").unwrap();
    let body = caps.get(1).map_or("", |m| m.as_str());
    let mut out = BTreeMap::new();
    for e in entry.captures_iter(body) {
        out.insert(UserId(e[1].parse().unwrap()), ChannelId(e[2].parse().unwrap()));
    }
    Some(Ok(out))
}

fn noisy_text() -> impl Strategy<Value = String> {
    let piece = prop_oneof![
        Just("action".to_string()),
        Just("action = {".to_string()),
        Just("=".to_string()),
        Just("{".to_string()),
        Just("}".to_string()),
        Just(":".to_string()),
        Just(",".to_string()),
        Just(" ".to_string()),
        Just("\n".to_string()),
        Just("x".to_string()),
        Just("-".to_string()),
        Just(".".to_string()),
        "[0-9]{1,6}".prop_map(|s| s),
    ];
    prop::collection::vec(piece, 0..40).prop_map(|v| v.concat())
}

fn spaced_render() -> impl Strategy<Value = (RawAction, String)> {
    let ws = || prop_oneof![Just(""), Just(" "), Just("  "), Just("\n"), Just("\t")];
    (
        prop::collection::btree_map(0u32..5000, 0u32..5000, 0..12),
        prop::collection::vec((ws(), ws(), ws(), ws()), 12),
        any::<bool>(),
        any::<bool>(),
    )
        .prop_map(|(m, spaces, trailing, fenced)| {
            let map: RawAction = m.into_iter().map(|(u, c)| (UserId(u), ChannelId(c))).collect();
            let mut body = String::new();
            for (i, ((u, c), (a, b, d, e))) in map.iter().zip(spaces.iter()).enumerate() {
                if i > 0 {
                    body.push(',');
                }
                body.push_str(&format!("{a}{u}{b}:{d}{c}{e}"));
            }
            if trailing && !map.is_empty() {
                body.push_str(", ");
            }
            let literal = format!("action ={body_sp}{{{body}}}", body_sp = spaces[0].1);
            let text = if fenced {
                format!("Plan below.\n```python\n# greedy\n{literal}\n```\nDone.")
            } else {
                literal
            };
            (map, text)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn parser_agrees_with_reference_grammar(text in noisy_text()) {
        let got = parse_action(&text);
        match reference_parse(&text) {
            None => prop_assert!(got.is_err()),
            Some(Err(())) => prop_assert!(got.is_err(), "accepted {text:?}"),
            Some(Ok(map)) => prop_assert_eq!(got.ok(), Some(map), "{:?}", text),
        }
    }

    #[test]
    fn whitespace_and_trailing_commas_are_canonical((map, text) in spaced_render()) {
        prop_assert_eq!(parse_action(&text).unwrap(), map);
    }

    #[test]
    fn render_round_trip(m in prop::collection::btree_map(any::<u32>(), any::<u32>(), 0..64)) {
        let map: RawAction = m.into_iter().map(|(u, c)| (UserId(u), ChannelId(c))).collect();
        prop_assert_eq!(parse_action(&render_action(&map)).unwrap(), map);
    }

    #[test]
    fn token_estimate_is_subadditive(a in ".{0,64}", b in ".{0,64}") {
        let joined = format!("{a}{b}");
        prop_assert!(estimate_tokens(&joined) <= estimate_tokens(&a) + estimate_tokens(&b) + 1);
        prop_assert!(estimate_tokens(&joined) >= estimate_tokens(&a));
    }
}

fn two_pass(values: &[f64]) -> (f64, f64, f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (min, max, mean, var.sqrt())
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

#[test]
fn statistics_match_two_pass_oracle() {
    for seed in 0..20 {
        let mut cfg = EnvConfig::shape(10, 10, 10);
        cfg.occupied_fraction = 0.3;
        let state = Environment::new(cfg, seed).unwrap().state(0).unwrap();
        let summary = summarize_state(&state);
        let idle: Vec<_> = state.channels().iter().filter(|c| !c.occupied).collect();
        let powers: Vec<f64> = state
            .active_ids()
            .iter()
            .flat_map(|&u| std::iter::repeat_n(state.user_power(u).unwrap(), idle.len()))
            .collect();
        let bws: Vec<f64> = idle.iter().map(|c| c.bandwidth_hz).collect();
        for (got, values) in [(summary.power_stats, powers), (summary.bandwidth_stats, bws)] {
            let got = got.unwrap();
            let (min, max, mean, std) = two_pass(&values);
            assert!(close(got.min, min) && close(got.max, max), "seed {seed}");
            assert!(close(got.mean, mean), "seed {seed}: {} vs {mean}", got.mean);
            assert!(close(got.std, std), "seed {seed}: {} vs {std}", got.std);
            assert!(got.std >= 0.0 && got.min <= got.mean && got.mean <= got.max);
        }
        assert_eq!(summary.idle_count, 7);
    }
}

#[test]
fn equal_bandwidths_have_zero_spread() {
    let mut cfg = EnvConfig::shape(6, 6, 3);
    cfg.bandwidth_min_hz = 10e6;
    cfg.bandwidth_max_hz = 10e6;
    let state = Environment::new(cfg, 1).unwrap().state(0).unwrap();
    assert_eq!(summarize_state(&state).bandwidth_stats.unwrap().std, 0.0);
}

#[test]
fn budget_ladder_on_large_cell() {
    let state = Environment::new(EnvConfig::shape(1500, 1500, 300), 5)
        .unwrap()
        .state(0)
        .unwrap();
    let levels: Vec<DetailLevel> = [1024, 2048, 4096, 32768]
        .iter()
        .map(|&b| {
            let bundle = serialize(&state, b).unwrap();
            assert!(bundle.token_estimate <= b);
            assert_eq!(bundle.token_estimate, estimate_tokens(&bundle.prompt_text()));
            bundle.detail
        })
        .collect();
    assert!(levels.windows(2).all(|w| w[0] <= w[1]), "{levels:?}");
    assert_eq!(levels[1], DetailLevel::StatsOnly);
    assert_eq!(levels[3], DetailLevel::Full);
}
