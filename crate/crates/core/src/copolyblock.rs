//! Vertex sets of inner copolyblocks `L(V) = ∪_{v ∈ V} [v, M]` and the
//! cutting-cone update that refines them at a weakly nondominated point.

use thiserror::Error;

use crate::outcome::MpSolution;

/// Absolute coordinate tolerance for equality, dominance and duplicate tests.
pub const VERTEX_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CopolyblockError {
    #[error("vertex {0} is not in the set")]
    NotFound(u64),
    #[error("cut point {w:?} is not below vertex {z:?}")]
    NotBelow { z: Vec<f64>, w: Vec<f64> },
    #[error("cut point has length {got} but p = {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("vertex set is empty")]
    Empty,
    #[error("vertex {0} has no evaluated φ")]
    Pending(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vertex {
    pub id: u64,
    pub z: Vec<f64>,
    pub phi: Option<f64>,
    pub mp: Option<MpSolution>,
    /// `φ` of the parent, a valid lower bound for this vertex.
    pub phi_floor: f64,
    /// Joint point used to warm-start `MP(z)`.
    pub warm: Option<Vec<f64>>,
}

impl Vertex {
    fn new(id: u64, z: Vec<f64>) -> Self {
        Vertex { id, z, phi: None, mp: None, phi_floor: f64::NEG_INFINITY, warm: None }
    }

    pub fn is_infeasible(&self) -> bool {
        self.mp.as_ref().is_some_and(|s| !s.feasible)
    }
}

fn leq(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| *x <= y + VERTEX_TOL)
}

fn same(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= VERTEX_TOL)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VertexSet {
    lower: Vec<f64>,
    vertices: Vec<Vertex>,
    next_id: u64,
}

impl VertexSet {
    /// `{corner}` inside the box with lower corner `lower`.
    pub fn new(lower: Vec<f64>, corner: Vec<f64>) -> Self {
        VertexSet { lower, vertices: vec![Vertex::new(0, corner)], next_id: 1 }
    }

    /// Builds a set from raw points, dropping duplicates; ids follow input order.
    pub fn from_points(lower: Vec<f64>, points: Vec<Vec<f64>>) -> Self {
        let mut s = VertexSet { lower, vertices: Vec::new(), next_id: 0 };
        for z in points {
            s.insert(z);
        }
        s
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn vertices_mut(&mut self) -> &mut [Vertex] {
        &mut self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn get(&self, id: u64) -> Option<&Vertex> {
        self.vertices.iter().find(|v| v.id == id)
    }

    /// Inserts `z` unless a vertex within [`VERTEX_TOL`] exists; returns the new id.
    pub fn insert(&mut self, z: Vec<f64>) -> Option<u64> {
        if self.vertices.iter().any(|v| same(&v.z, &z)) {
            return None;
        }
        let id = self.next_id;
        self.next_id += 1;
        self.vertices.push(Vertex::new(id, z));
        Some(id)
    }

    /// Replaces vertex `id` by the children `z^i = v - (v_i - w_i) e^i`, skipping
    /// children whose moved coordinate lands on `m_i` within `boundary_tol`.
    /// Children inherit the parent's `φ` as floor. Returns the inserted ids.
    pub fn cut(&mut self, id: u64, w: &[f64], boundary_tol: f64) -> Result<Vec<u64>, CopolyblockError> {
        let pos = self.vertices.iter().position(|v| v.id == id).ok_or(CopolyblockError::NotFound(id))?;
        let parent = &self.vertices[pos];
        if w.len() != parent.z.len() {
            return Err(CopolyblockError::Dimension { expected: parent.z.len(), got: w.len() });
        }
        if !leq(w, &parent.z) {
            return Err(CopolyblockError::NotBelow { z: parent.z.clone(), w: w.to_vec() });
        }
        let parent = self.vertices.remove(pos);
        let floor = parent.phi.unwrap_or(f64::NEG_INFINITY).max(parent.phi_floor);
        let mut added = Vec::new();
        for (i, wi) in w.iter().enumerate() {
            if (wi - self.lower[i]).abs() <= boundary_tol {
                continue;
            }
            let mut z = parent.z.clone();
            z[i] = *wi;
            if let Some(child) = self.insert(z) {
                let v = self.vertices.last_mut().expect("just inserted");
                v.phi_floor = floor;
                v.warm = parent.warm.clone();
                added.push(child);
            }
        }
        Ok(added)
    }

    /// Drops vertices flagged infeasible and every vertex dominated from below by another.
    pub fn prune(&mut self) {
        self.vertices.retain(|v| !v.is_infeasible());
        let keep: Vec<bool> = self
            .vertices
            .iter()
            .map(|v| !self.vertices.iter().any(|o| o.id != v.id && leq(&o.z, &v.z) && !same(&o.z, &v.z)))
            .collect();
        let mut it = keep.into_iter();
        self.vertices.retain(|_| it.next().unwrap_or(true));
    }

    /// Removes the vertex `id` if present.
    pub fn remove(&mut self, id: u64) -> Option<Vertex> {
        let pos = self.vertices.iter().position(|v| v.id == id)?;
        Some(self.vertices.remove(pos))
    }

    /// The vertex with least cached `φ`, lowest id on ties.
    pub fn select_min_phi(&self) -> Result<(&Vertex, f64), CopolyblockError> {
        let mut best: Option<(&Vertex, f64)> = None;
        for v in &self.vertices {
            let phi = v.phi.ok_or(CopolyblockError::Pending(v.id))?;
            let better = match best {
                None => true,
                Some((b, bp)) => phi < bp || (phi == bp && v.id < b.id),
            };
            if better {
                best = Some((v, phi));
            }
        }
        best.ok_or(CopolyblockError::Empty)
    }
}
