use std::path::PathBuf;

use sparse_damage::fem::{
    assemble_mass, canonical_truss, load_model, CANONICAL_AREA, CANONICAL_CONNECTIVITY,
    CANONICAL_DENSITY,
};

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

#[test]
fn shipped_canonical_model_matches_builder() {
    let text = std::fs::read_to_string(data("canonical_truss.json")).unwrap();
    let loaded = load_model::<f64>(&text).unwrap();
    assert_eq!(loaded, canonical_truss::<f64>());
}

#[test]
fn canonical_geometry() {
    let model = canonical_truss::<f64>();
    assert_eq!(model.n_elements(), 20);
    assert_eq!(model.n_dof(), 16);
    // chords and verticals are 1 m, diagonals √2 m
    for (id, (i, j)) in CANONICAL_CONNECTIVITY.iter().enumerate() {
        let (xi, yi) = ((i % 5) as f64, (i / 5) as f64);
        let (xj, yj) = ((j % 5) as f64, (j / 5) as f64);
        let expected = ((xj - xi).powi(2) + (yj - yi).powi(2)).sqrt();
        assert!((model.element_length(id).unwrap() - expected).abs() < 1e-14);
        let want = if id < 12 { 1.0 } else { 2f64.sqrt() };
        assert!((expected - want).abs() < 1e-14);
    }
    // labels 2 and 18 are the bottom chord 1–2 and the diagonal 3–7
    assert_eq!(CANONICAL_CONNECTIVITY[1], (1, 2));
    assert_eq!(CANONICAL_CONNECTIVITY[17], (3, 7));
}

#[test]
fn canonical_free_mass() {
    // free DOFs carry the mass of everything except the two pinned nodes
    let model = canonical_truss::<f64>();
    let rho_a = CANONICAL_DENSITY * CANONICAL_AREA;
    let mut node_mass = [0.0; 10];
    for &(i, j) in CANONICAL_CONNECTIVITY.iter() {
        let (xi, yi) = ((i % 5) as f64, (i / 5) as f64);
        let (xj, yj) = ((j % 5) as f64, (j / 5) as f64);
        let half = rho_a * ((xj - xi).powi(2) + (yj - yi).powi(2)).sqrt() / 2.0;
        node_mass[i] += half;
        node_mass[j] += half;
    }
    let free: f64 = node_mass.iter().enumerate().filter(|(n, _)| *n != 0 && *n != 4).map(|(_, m)| 2.0 * m).sum();
    let trace: f64 = assemble_mass(&model).diagonal().sum();
    assert!((trace - free).abs() < 1e-9 * free);
}
