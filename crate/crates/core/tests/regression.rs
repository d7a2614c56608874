//! Frozen values for the canonical truss. The published frequencies belong
//! to a different geometry, so these pin this model only.

use sparse_damage::experiments::DamageScenario;
use sparse_damage::fem::{canonical_truss, StiffnessParams};
use sparse_damage::modal::frequency_changes;
use sparse_damage::sensitivity::modes_at;

const NOMINAL_HZ: [f64; 16] = [
    128.2676509794028, 229.55053916971778, 246.5369139964794, 387.9385852486581,
    490.36640056618114, 518.628328704057, 614.9734452780946, 686.2676798393699,
    688.1484961413112, 723.9833717146938, 820.9885986246937, 869.8725552843343,
    891.764773667408, 924.4885677196381, 1011.5313966989448, 1094.5312601817432,
];

const CHANGE_20: [f64; 16] = [
    -0.002199066352163436, -0.013935547116214123, -0.006414413922456791,
    -0.00014055160250477084, -0.018101207997433304, -0.010968758819529075,
    -0.0022473637740016497, -0.021673934498311523, -0.00030626142870452923,
    -0.003277761888550263, -0.014398557324270084, -0.01118896254880887,
    -0.005164356227151025, -0.023064980020870554, -0.007000470614262824,
    -0.005806313164868504,
];

#[test]
fn nominal_frequencies() {
    let model = canonical_truss::<f64>();
    let modal = modes_at(&model, &StiffnessParams::nominal(20), 16).unwrap();
    for (f, want) in modal.frequencies.iter().zip(NOMINAL_HZ) {
        assert!((f - want).abs() < 1e-9 * want, "{f} vs {want}");
    }
}

#[test]
fn twenty_percent_frequency_changes() {
    let model = canonical_truss::<f64>();
    let a = modes_at(&model, &StiffnessParams::nominal(20), 16).unwrap();
    let b = modes_at(&model, &DamageScenario::canonical(0.2).truth_params(20), 16).unwrap();
    let change = frequency_changes(&a, &b).unwrap();
    for (c, want) in change.iter().zip(CHANGE_20) {
        assert!((c - want).abs() < 1e-9, "{c} vs {want}");
    }
    // every frequency drops, the largest by about 2.3 %, the mean by about 0.9 %
    assert!(change.iter().all(|c| *c < 0.0));
    let max = change.amax();
    let mean = change.iter().map(|c| c.abs()).sum::<f64>() / 16.0;
    assert!((max - 0.0231).abs() < 1e-4);
    assert!((mean - 0.0091).abs() < 1e-4);
}
