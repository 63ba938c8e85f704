//! Native checks of the functions the browser demo calls.

use netdilemma_web::{evolve_json, ring_round_json, stimulus_json};
use serde_json::Value;

fn parse(text: &str) -> Value {
    serde_json::from_str(text).unwrap()
}

#[test]
fn alternating_ring_round() {
    let out = parse(&ring_round_json(2, 6, "CDCDCDCD").unwrap());
    assert_eq!(out["n"], 8);
    assert_eq!(out["assortment"], -1.0);
    assert_eq!(out["cooperation"], 0.5);
    for i in 0..8 {
        let expected = if i % 2 == 0 { -20 } else { 120 };
        assert_eq!(out["net"][i], expected);
    }
    assert_eq!(out["edges"].as_array().unwrap().len(), 8);
}

#[test]
fn uniform_profile_has_no_assortment() {
    let out = parse(&ring_round_json(4, 2, "cccccc").unwrap());
    assert!(out["assortment"].is_null());
    // Four neighbours, each paying 10 and sending 20.
    assert!(out["net"].as_array().unwrap().iter().all(|v| v == 40));
}

#[test]
fn bad_inputs_are_reported() {
    assert!(ring_round_json(2, 2, "CXD").unwrap_err().contains("C or D"));
    assert!(ring_round_json(3, 2, "CDCDCD").is_err());
    assert!(ring_round_json(2, 0, "CDCD").is_err());
    assert!(evolve_json(25, 2, 6, false, 1.0, 50_000, 100, 1).unwrap_err().contains("below"));
    assert!(stimulus_json("nobody", 1, 1).is_err());
    assert!(stimulus_json("all_c", 9, 1).is_err());
}

#[test]
fn evolve_series_shape_and_determinism() {
    let a = evolve_json(12, 2, 6, false, 1.0, 10, 4, 7).unwrap();
    let b = evolve_json(12, 2, 6, false, 1.0, 10, 4, 7).unwrap();
    assert_eq!(a, b);
    let points = parse(&a);
    let points = points.as_array().unwrap();
    assert_eq!(points.len(), 10);
    for (i, p) in points.iter().enumerate() {
        assert_eq!(p["round"], i + 1);
        assert_eq!(p["runs"], 4);
        let mean = p["mean"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&mean));
    }
    let mixed = parse(&evolve_json(12, 4, 2, true, 1.0, 5, 2, 7).unwrap());
    assert_eq!(mixed.as_array().unwrap().len(), 5);
}

#[test]
fn stimulus_series() {
    let out = parse(&stimulus_json("tit_for_tat_majority", 1, 3).unwrap());
    let series: Vec<f64> = out["cooperation"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    let expected: Vec<f64> = (1..=25).map(|r| if r <= 6 { 1.0 } else { 0.0 }).collect();
    assert_eq!(series, expected);
    assert_eq!(out["change_round"], 5);
    assert_eq!(out["runs"], 10);
}
