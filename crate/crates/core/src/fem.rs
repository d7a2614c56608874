//! Planar truss finite-element model.
//!
//! Bars are two-node axial elements with two translational DOFs per node.
//! Damage is modelled as a per-element multiplier `θ_i` on the bar stiffness,
//! so the assembled stiffness is exactly `K(θ) = Σ θ_i K_i`. Mass is lumped
//! and does not depend on `θ`.

use nalgebra::{Cholesky, DMatrix, DVector, Matrix4};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("malformed model document: {0}")]
    Malformed(String),
    #[error("duplicate {kind} id {id}")]
    DuplicateId { kind: &'static str, id: usize },
    #[error("{kind} ids must be contiguous from 0 (missing id {missing})")]
    NonContiguousIds { kind: &'static str, missing: usize },
    #[error("unknown node id {node} referenced by {context}")]
    UnknownNode { node: usize, context: String },
    #[error("unknown element id {0}")]
    UnknownElement(usize),
    #[error("element {element} connects node {node} to itself")]
    SelfConnected { element: usize, node: usize },
    #[error("element {0} has zero length")]
    ZeroLengthBar(usize),
    #[error("element {element} has non-positive {property}")]
    NonPositiveProperty {
        element: usize,
        property: &'static str,
    },
    #[error("insufficient supports: {constrained} constrained DOFs, at least 3 required")]
    InsufficientSupports { constrained: usize },
    #[error("no free DOFs")]
    NoFreeDofs,
    #[error("model is a mechanism")]
    Mechanism,
    #[error("stiffness parameter vector has length {got}, model has {expected} elements")]
    ParamLength { expected: usize, got: usize },
    #[error("stiffness multiplier {index} is not positive")]
    NonPositiveTheta { index: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node<T: Real> {
    pub id: usize,
    pub x: T,
    pub y: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BarElement<T: Real> {
    pub id: usize,
    pub node_i: usize,
    pub node_j: usize,
    /// Pa
    pub elastic_modulus: T,
    /// m²
    pub area: T,
    /// kg/m³
    pub density: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Support {
    pub node: usize,
    pub fixed_x: bool,
    pub fixed_y: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    X,
    Y,
}

/// Mapping from `(node, direction)` to a free-DOF index.
///
/// Free DOFs are numbered node-major, x before y, skipping constrained ones.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DofMap {
    slots: Vec<Option<usize>>,
    n_free: usize,
}

impl DofMap {
    fn build(n_nodes: usize, supports: &[Support]) -> Self {
        let mut fixed = vec![false; 2 * n_nodes];
        for s in supports {
            fixed[2 * s.node] |= s.fixed_x;
            fixed[2 * s.node + 1] |= s.fixed_y;
        }
        let mut next = 0;
        let slots = fixed
            .iter()
            .map(|&f| {
                if f {
                    None
                } else {
                    next += 1;
                    Some(next - 1)
                }
            })
            .collect();
        Self {
            slots,
            n_free: next,
        }
    }

    /// Free-DOF index, or `None` when the DOF is constrained.
    pub fn index(&self, node: usize, direction: Direction) -> Option<usize> {
        let offset = match direction {
            Direction::X => 0,
            Direction::Y => 1,
        };
        self.slots[2 * node + offset]
    }

    pub fn n_free(&self) -> usize {
        self.n_free
    }

    pub fn n_constrained(&self) -> usize {
        self.slots.len() - self.n_free
    }

    fn element_slots(&self, i: usize, j: usize) -> [Option<usize>; 4] {
        [
            self.slots[2 * i],
            self.slots[2 * i + 1],
            self.slots[2 * j],
            self.slots[2 * j + 1],
        ]
    }
}

/// Per-element data cached at model construction.
#[derive(Clone, Debug, PartialEq)]
struct ElementGeometry<T: Real> {
    length: T,
    /// `(-c, -s, c, s)`: the bar's axial pattern in global coordinates.
    axial: [T; 4],
    /// `E·A/L`
    axial_stiffness: T,
    slots: [Option<usize>; 4],
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrussModel<T: Real> {
    nodes: Vec<Node<T>>,
    elements: Vec<BarElement<T>>,
    supports: Vec<Support>,
    dof_map: DofMap,
    geometry: Vec<ElementGeometry<T>>,
}

impl<T: Real> TrussModel<T> {
    /// Validates and builds a model. Nodes and elements may be given in any
    /// order; they are stored sorted by id.
    pub fn new(
        mut nodes: Vec<Node<T>>,
        mut elements: Vec<BarElement<T>>,
        supports: Vec<Support>,
    ) -> Result<Self, ModelError> {
        nodes.sort_by_key(|n| n.id);
        elements.sort_by_key(|e| e.id);
        check_ids("node", nodes.iter().map(|n| n.id))?;
        check_ids("element", elements.iter().map(|e| e.id))?;

        let n_nodes = nodes.len();
        for e in &elements {
            for node in [e.node_i, e.node_j] {
                if node >= n_nodes {
                    return Err(ModelError::UnknownNode {
                        node,
                        context: format!("element {}", e.id),
                    });
                }
            }
            if e.node_i == e.node_j {
                return Err(ModelError::SelfConnected {
                    element: e.id,
                    node: e.node_i,
                });
            }
            for (property, value) in [
                ("elastic_modulus", e.elastic_modulus),
                ("area", e.area),
                ("density", e.density),
            ] {
                if !(value > T::zero()) {
                    return Err(ModelError::NonPositiveProperty {
                        element: e.id,
                        property,
                    });
                }
            }
        }
        for s in &supports {
            if s.node >= n_nodes {
                return Err(ModelError::UnknownNode {
                    node: s.node,
                    context: "supports".into(),
                });
            }
        }

        let dof_map = DofMap::build(n_nodes, &supports);
        let mut geometry = Vec::with_capacity(elements.len());
        for e in &elements {
            let (a, b) = (&nodes[e.node_i], &nodes[e.node_j]);
            let dx = b.x - a.x;
            let dy = b.y - a.y;
            let length = (dx * dx + dy * dy).sqrt();
            if !(length > T::zero()) {
                return Err(ModelError::ZeroLengthBar(e.id));
            }
            let (c, s) = (dx / length, dy / length);
            geometry.push(ElementGeometry {
                length,
                axial: [-c, -s, c, s],
                axial_stiffness: e.elastic_modulus * e.area / length,
                slots: dof_map.element_slots(e.node_i, e.node_j),
            });
        }

        if dof_map.n_constrained() < 3 {
            return Err(ModelError::InsufficientSupports {
                constrained: dof_map.n_constrained(),
            });
        }
        if dof_map.n_free() == 0 {
            return Err(ModelError::NoFreeDofs);
        }

        Ok(Self {
            nodes,
            elements,
            supports,
            dof_map,
            geometry,
        })
    }

    pub fn nodes(&self) -> &[Node<T>] {
        &self.nodes
    }

    pub fn elements(&self) -> &[BarElement<T>] {
        &self.elements
    }

    pub fn supports(&self) -> &[Support] {
        &self.supports
    }

    pub fn dof_map(&self) -> &DofMap {
        &self.dof_map
    }

    pub fn n_dof(&self) -> usize {
        self.dof_map.n_free()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn element_length(&self, element_id: usize) -> Result<T, ModelError> {
        self.geometry
            .get(element_id)
            .map(|g| g.length)
            .ok_or(ModelError::UnknownElement(element_id))
    }

    /// `E·A/L · (tᵀφ)²` for element `element_id`, where `t` is the axial
    /// pattern restricted to free DOFs. This is `φᵀ K_i φ` without forming `K_i`.
    pub fn element_energy(&self, element_id: usize, phi: &[T]) -> T {
        let g = &self.geometry[element_id];
        let mut proj = T::zero();
        for (slot, t) in g.slots.iter().zip(g.axial) {
            if let Some(k) = slot {
                proj += t * phi[*k];
            }
        }
        g.axial_stiffness * proj * proj
    }

    /// Element `element_id`'s contribution `K_i` (at `θ_i = 1`) scattered into
    /// the free-DOF stiffness matrix.
    pub fn element_contribution(&self, element_id: usize) -> Result<DMatrix<T>, ModelError> {
        let g = self
            .geometry
            .get(element_id)
            .ok_or(ModelError::UnknownElement(element_id))?;
        let n = self.n_dof();
        let mut k = DMatrix::zeros(n, n);
        scatter(&mut k, g, T::one());
        Ok(k)
    }

    pub fn to_document(&self) -> ModelDocument {
        ModelDocument {
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeRecord {
                    id: n.id,
                    x: n.x.as_f64(),
                    y: n.y.as_f64(),
                })
                .collect(),
            elements: self
                .elements
                .iter()
                .map(|e| ElementRecord {
                    id: e.id,
                    i: e.node_i,
                    j: e.node_j,
                    elastic_modulus: e.elastic_modulus.as_f64(),
                    area: e.area.as_f64(),
                    density: e.density.as_f64(),
                })
                .collect(),
            supports: self
                .supports
                .iter()
                .map(|s| SupportRecord {
                    node: s.node,
                    fix_x: s.fixed_x,
                    fix_y: s.fixed_y,
                })
                .collect(),
        }
    }

    pub fn from_document(doc: &ModelDocument) -> Result<Self, ModelError> {
        let finite = |v: f64, what: &str| {
            if v.is_finite() {
                Ok(T::lit(v))
            } else {
                Err(ModelError::Malformed(format!("non-finite {what}")))
            }
        };
        let nodes = doc
            .nodes
            .iter()
            .map(|n| {
                Ok(Node {
                    id: n.id,
                    x: finite(n.x, "coordinate")?,
                    y: finite(n.y, "coordinate")?,
                })
            })
            .collect::<Result<Vec<_>, ModelError>>()?;
        let elements = doc
            .elements
            .iter()
            .map(|e| {
                Ok(BarElement {
                    id: e.id,
                    node_i: e.i,
                    node_j: e.j,
                    elastic_modulus: finite(e.elastic_modulus, "E")?,
                    area: finite(e.area, "A")?,
                    density: finite(e.density, "rho")?,
                })
            })
            .collect::<Result<Vec<_>, ModelError>>()?;
        let supports = doc
            .supports
            .iter()
            .map(|s| Support {
                node: s.node,
                fixed_x: s.fix_x,
                fixed_y: s.fix_y,
            })
            .collect();
        Self::new(nodes, elements, supports)
    }
}

fn check_ids(kind: &'static str, ids: impl Iterator<Item = usize>) -> Result<(), ModelError> {
    // ids arrive sorted
    let mut expected = 0;
    for id in ids {
        if id + 1 == expected {
            return Err(ModelError::DuplicateId { kind, id });
        }
        if id != expected {
            return Err(ModelError::NonContiguousIds {
                kind,
                missing: expected,
            });
        }
        expected += 1;
    }
    Ok(())
}

fn scatter<T: Real>(k: &mut DMatrix<T>, g: &ElementGeometry<T>, theta: T) {
    let scale = theta * g.axial_stiffness;
    for (a, ra) in g.slots.iter().enumerate() {
        let Some(ra) = ra else { continue };
        for (b, rb) in g.slots.iter().enumerate() {
            let Some(rb) = rb else { continue };
            k[(*ra, *rb)] += scale * g.axial[a] * g.axial[b];
        }
    }
}

/// Per-element stiffness multipliers `θ`; `1` is the nominal (healthy) state.
#[derive(Clone, Debug, PartialEq)]
pub struct StiffnessParams<T: Real> {
    pub theta: DVector<T>,
}

impl<T: Real> StiffnessParams<T> {
    pub fn nominal(n_elements: usize) -> Self {
        Self {
            theta: DVector::from_element(n_elements, T::one()),
        }
    }

    pub fn new(theta: DVector<T>) -> Self {
        Self { theta }
    }

    pub fn from_slice(theta: &[T]) -> Self {
        Self {
            theta: DVector::from_column_slice(theta),
        }
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    /// Checks length against the model and positivity of every multiplier.
    pub fn validate(&self, model: &TrussModel<T>) -> Result<(), ModelError> {
        if self.theta.len() != model.n_elements() {
            return Err(ModelError::ParamLength {
                expected: model.n_elements(),
                got: self.theta.len(),
            });
        }
        match self.theta.iter().position(|t| !(*t > T::zero())) {
            Some(index) => Err(ModelError::NonPositiveTheta { index }),
            None => Ok(()),
        }
    }
}

/// Diagonal lumped-mass matrix, stored as its diagonal (kg).
#[derive(Clone, Debug, PartialEq)]
pub struct LumpedMass<T: Real>(pub DVector<T>);

impl<T: Real> LumpedMass<T> {
    pub fn diagonal(&self) -> &DVector<T> {
        &self.0
    }

    pub fn to_matrix(&self) -> DMatrix<T> {
        DMatrix::from_diagonal(&self.0)
    }
}

/// 4×4 global-coordinate stiffness of a single bar, DOF order
/// `(u_i, v_i, u_j, v_j)`.
pub fn element_stiffness<T: Real>(
    model: &TrussModel<T>,
    element_id: usize,
    theta: T,
) -> Result<Matrix4<T>, ModelError> {
    let g = model
        .geometry
        .get(element_id)
        .ok_or(ModelError::UnknownElement(element_id))?;
    if !(theta > T::zero()) {
        return Err(ModelError::NonPositiveTheta { index: element_id });
    }
    let scale = theta * g.axial_stiffness;
    Ok(Matrix4::from_fn(|a, b| scale * g.axial[a] * g.axial[b]))
}

/// `K(θ) = Σ θ_i K_i` over free DOFs. Fails with [`ModelError::Mechanism`]
/// when the result is not positive definite.
pub fn assemble_stiffness<T: Real>(
    model: &TrussModel<T>,
    params: &StiffnessParams<T>,
) -> Result<DMatrix<T>, ModelError> {
    params.validate(model)?;
    let k = assemble_unchecked(model, params);
    if is_mechanism(&k) {
        return Err(ModelError::Mechanism);
    }
    Ok(k)
}

/// Singular or indefinite to working precision: Cholesky fails, or a pivot
/// is negligible next to the largest diagonal entry.
fn is_mechanism<T: Real>(k: &DMatrix<T>) -> bool {
    let Some(ch) = Cholesky::new(k.clone()) else {
        return true;
    };
    let l = ch.l_dirty();
    let min_pivot = (0..k.nrows()).fold(T::max_value().unwrap(), |acc, i| acc.min(l[(i, i)] * l[(i, i)]));
    let max_diag = (0..k.nrows()).fold(T::zero(), |acc, i| acc.max(k[(i, i)]));
    min_pivot <= T::tol(1e-13) * max_diag
}

pub(crate) fn assemble_unchecked<T: Real>(
    model: &TrussModel<T>,
    params: &StiffnessParams<T>,
) -> DMatrix<T> {
    let n = model.n_dof();
    let mut k = DMatrix::zeros(n, n);
    for (g, &theta) in model.geometry.iter().zip(params.theta.iter()) {
        scatter(&mut k, g, theta);
    }
    k
}

/// Lumped mass: each bar puts `ρAL/2` on both translational DOFs of each end
/// node. Constrained DOFs are dropped.
pub fn assemble_mass<T: Real>(model: &TrussModel<T>) -> LumpedMass<T> {
    let mut diag = DVector::zeros(model.n_dof());
    let half = T::lit(0.5);
    for (e, g) in model.elements.iter().zip(&model.geometry) {
        let share = half * e.density * e.area * g.length;
        for slot in g.slots.iter().flatten() {
            diag[*slot] += share;
        }
    }
    LumpedMass(diag)
}

pub const CANONICAL_ELASTIC_MODULUS: f64 = 70e9;
pub const CANONICAL_AREA: f64 = 0.01;
pub const CANONICAL_DENSITY: f64 = 2700.0;

/// Node pairs of the benchmark truss in element-id order (0-based ids; the
/// 1-based labels used in reports are these plus one).
///
/// Nodes 0..=4 are the bottom row at `x = 0..4`, nodes 5..=9 the top row.
/// Labels 1–4 bottom chords, 5–8 top chords, 9–12 verticals at `x = 0..3`,
/// 13–20 crossing diagonals, two per bay.
pub const CANONICAL_CONNECTIVITY: [(usize, usize); 20] = [
    (0, 1),
    (1, 2),
    (2, 3),
    (3, 4),
    (5, 6),
    (6, 7),
    (7, 8),
    (8, 9),
    (0, 5),
    (1, 6),
    (2, 7),
    (3, 8),
    (0, 6),
    (1, 5),
    (1, 7),
    (2, 6),
    (2, 8),
    (3, 7),
    (3, 9),
    (4, 8),
];

/// The 10-node, 20-bar, 4-bay benchmark truss pinned at both bottom corners.
pub fn canonical_truss<T: Real>() -> TrussModel<T> {
    let nodes = (0..10)
        .map(|id| Node {
            id,
            x: T::count(id % 5),
            y: T::count(id / 5),
        })
        .collect();
    let elements = CANONICAL_CONNECTIVITY
        .iter()
        .enumerate()
        .map(|(id, &(node_i, node_j))| BarElement {
            id,
            node_i,
            node_j,
            elastic_modulus: T::lit(CANONICAL_ELASTIC_MODULUS),
            area: T::lit(CANONICAL_AREA),
            density: T::lit(CANONICAL_DENSITY),
        })
        .collect();
    let supports = vec![
        Support {
            node: 0,
            fixed_x: true,
            fixed_y: true,
        },
        Support {
            node: 4,
            fixed_x: true,
            fixed_y: true,
        },
    ];
    TrussModel::new(nodes, elements, supports).expect("canonical truss is valid")
}

/// On-disk model document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub nodes: Vec<NodeRecord>,
    pub elements: Vec<ElementRecord>,
    pub supports: Vec<SupportRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeRecord {
    pub id: usize,
    pub x: f64,
    pub y: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElementRecord {
    pub id: usize,
    pub i: usize,
    pub j: usize,
    #[serde(rename = "E")]
    pub elastic_modulus: f64,
    #[serde(rename = "A")]
    pub area: f64,
    #[serde(rename = "rho")]
    pub density: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupportRecord {
    pub node: usize,
    pub fix_x: bool,
    pub fix_y: bool,
}

/// Parses and validates a JSON model document.
pub fn load_model<T: Real>(text: &str) -> Result<TrussModel<T>, ModelError> {
    let doc: ModelDocument =
        serde_json::from_str(text).map_err(|e| ModelError::Malformed(e.to_string()))?;
    TrussModel::from_document(&doc)
}
