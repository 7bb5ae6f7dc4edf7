use serde_json::Value;
use wsn_myopic_web::{coord_structure, dec_structure, tradeoff_curve};

fn parse(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

#[test]
fn coord_points_follow_thresholds() {
    let out = parse(&coord_structure(0.0859, 0.96, 20.0, 0.25, 5, 97));
    let v0 = out["thresholds"][0].as_f64().unwrap();
    assert!((v0 - 0.33).abs() < 0.01);
    let pts = out["points"].as_array().unwrap();
    assert_eq!(pts.len(), 97);
    for p in pts {
        let active = p["t_active"].as_u64().unwrap() > 0;
        assert_eq!(active, p["v"].as_f64().unwrap() > v0);
    }
}

#[test]
fn dec_points_idle_below_threshold() {
    let out = parse(&dec_structure(0.05, 0.96, 20.0, 0.25, 5, 20, 25));
    let v_idle = out["v_idle"].as_f64().unwrap();
    for p in out["points"].as_array().unwrap() {
        let z = p["zeta"].as_f64().unwrap();
        assert_eq!(z > 0.0, p["v"].as_f64().unwrap() > v_idle);
        assert!(p["cost"].as_f64().unwrap() <= p["v"].as_f64().unwrap() + 1e-12);
    }
}

#[test]
fn tradeoff_is_monotone() {
    let out = parse(&tradeoff_curve(0.25, 0.96, 6, 4, 0.01));
    let c = out["curve"].as_array().unwrap();
    assert_eq!(c.len(), 48);
    for w in c.windows(2) {
        assert!(w[1]["network_cost"].as_f64() < w[0]["network_cost"].as_f64());
        assert!(w[1]["mse"].as_f64() > w[0]["mse"].as_f64());
    }
    assert!(out["selected"].is_object());
}

#[test]
fn errors_are_reported_as_json() {
    let out = parse(&coord_structure(0.9, 0.96, 20.0, 0.25, 5, 10));
    assert!(out["error"].as_str().unwrap().contains("lambda_th"));
    let out = parse(&dec_structure(0.05, 0.96, 20.0, 0.25, 5, 2, 10));
    assert!(out["error"].as_str().unwrap().contains("num_sns"));
}
