use contractivity_web::{certify_json, generate_json, simulate_json};
use serde_json::Value;

#[test]
fn small_negative_diagonal_is_certified_everywhere_and_skew_is_not() {
    let cells: Value =
        serde_json::from_str(&certify_json(&[-0.4, 0.0, 0.0, -0.4], 0.5, 0.5).unwrap()).unwrap();
    let cells = cells.as_array().unwrap();
    assert_eq!(cells.len(), 8);
    assert!(cells.iter().all(|c| c["certified"] == true));

    let skew: Value =
        serde_json::from_str(&certify_json(&[0.0, 4.0, -4.0, 0.0], 0.01, 0.5).unwrap()).unwrap();
    let fr_ct_mone = skew
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["condition"] == "FR/CT/MONE")
        .unwrap();
    assert_eq!(fr_ct_mone["certified"], false);
}

#[test]
fn rejects_malformed_input() {
    assert!(certify_json(&[1.0, 2.0, 3.0], 0.1, 0.5).is_err());
    assert!(certify_json(&[-1.0], 0.1, 1.5).is_err());
    assert!(generate_json(0, 0.5, 1).is_err());
    assert!(simulate_json(&[0.0; 4], false, &[1.0], &[0.0, 0.0], 1.0).is_err());
}

#[test]
fn generated_weights_are_reproducible_and_certified() {
    let a = generate_json(4, 0.5, 9).unwrap();
    assert_eq!(a, generate_json(4, 0.5, 9).unwrap());
    let v: Value = serde_json::from_str(&a).unwrap();
    assert!(v["margin"].as_f64().unwrap() <= 1e-8);
    let w: Vec<f64> = v["w"]
        .as_array()
        .unwrap()
        .iter()
        .flat_map(|r| r.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()))
        .collect();
    let sim: Value = serde_json::from_str(
        &simulate_json(
            &w,
            false,
            &[1.0, -1.0, 0.5, 0.0],
            &[-1.0, 0.0, 0.0, 1.0],
            10.0,
        )
        .unwrap(),
    )
    .unwrap();
    assert!(sim["rate"].as_f64().unwrap() >= 0.45);
}

#[test]
fn simulation_distance_shrinks() {
    let sim: Value = serde_json::from_str(
        &simulate_json(&[0.2, 0.1, -0.1, 0.2], true, &[1.0, 0.0], &[0.0, 1.0], 5.0).unwrap(),
    )
    .unwrap();
    let d = sim["distance"].as_array().unwrap();
    assert!(d.last().unwrap().as_f64().unwrap() < 0.1 * d[0].as_f64().unwrap());
    assert_eq!(
        sim["t"].as_array().unwrap().len(),
        sim["x"].as_array().unwrap().len()
    );
}
