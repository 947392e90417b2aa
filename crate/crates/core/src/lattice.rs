//! Rotated surface code geometry.
//!
//! Data qubits sit at integer points `(x, y)` with `0 <= x, y < d` (0-indexed).
//! Stabilizers are unit squares `S(x, y)` in the bulk and digons on the
//! boundary. X-type digons close the left (`x = 0`) and right (`x = d - 1`)
//! edges, Z-type digons the bottom (`y = 0`) and top (`y = d - 1`) edges.
//!
//! All coordinates are stored doubled so that measurement-qubit positions,
//! which live on half-integer points, stay exact.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Lattice point in doubled coordinates: `(x2, y2) = (2x, 2y)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Coord {
    pub x2: i32,
    pub y2: i32,
}

impl Coord {
    pub const fn new(x2: i32, y2: i32) -> Self {
        Self { x2, y2 }
    }

    /// Integer lattice point `(x, y)`.
    pub const fn data(x: i32, y: i32) -> Self {
        Self { x2: 2 * x, y2: 2 * y }
    }

    pub fn x(&self) -> f64 {
        self.x2 as f64 / 2.0
    }

    pub fn y(&self) -> f64 {
        self.y2 as f64 / 2.0
    }

    pub const fn offset(self, dx2: i32, dy2: i32) -> Self {
        Self { x2: self.x2 + dx2, y2: self.y2 + dy2 }
    }
}

impl std::fmt::Display for Coord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.x(), self.y())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FaceKind {
    X,
    Z,
}

/// Where a face sits. Digons are tagged by the boundary they close.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FaceRegion {
    Bulk,
    Left,
    Right,
    Bottom,
    Top,
}

impl FaceRegion {
    pub fn is_boundary(self) -> bool {
        !matches!(self, FaceRegion::Bulk)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Face {
    pub kind: FaceKind,
    pub region: FaceRegion,
    /// Data qubits in the support, sorted.
    pub qubits: Vec<Coord>,
    /// Position of the measurement qubit.
    pub meas: Coord,
}

/// Sparse Pauli operator on the data qubits, stored as X and Z bit masks.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PauliOperator {
    pub x: Vec<bool>,
    pub z: Vec<bool>,
}

impl PauliOperator {
    pub fn identity(n: usize) -> Self {
        Self { x: vec![false; n], z: vec![false; n] }
    }

    pub fn weight(&self) -> usize {
        self.x.iter().zip(&self.z).filter(|(x, z)| **x || **z).count()
    }

    pub fn is_identity(&self) -> bool {
        self.weight() == 0
    }

    /// Symplectic inner product is zero.
    pub fn commutes_with(&self, other: &PauliOperator) -> bool {
        let mut parity = false;
        for i in 0..self.x.len() {
            parity ^= (self.x[i] && other.z[i]) ^ (self.z[i] && other.x[i]);
        }
        !parity
    }

    /// Product up to phase.
    pub fn mul(&self, other: &PauliOperator) -> PauliOperator {
        PauliOperator {
            x: self.x.iter().zip(&other.x).map(|(a, b)| a ^ b).collect(),
            z: self.z.iter().zip(&other.z).map(|(a, b)| a ^ b).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SurfaceCode {
    pub d: usize,
    /// Row-major: index `y * d + x`.
    pub data_qubits: Vec<Coord>,
    /// Sorted by measurement coordinate `(y2, x2)`.
    pub faces: Vec<Face>,
    /// Column `x = 0`.
    pub logical_z_support: Vec<Coord>,
    /// Row `y = 0`.
    pub logical_x_support: Vec<Coord>,
}

fn square(x: i32, y: i32) -> Vec<Coord> {
    vec![Coord::data(x, y), Coord::data(x + 1, y), Coord::data(x, y + 1), Coord::data(x + 1, y + 1)]
}

fn digon_x(x: i32, y: i32) -> Vec<Coord> {
    vec![Coord::data(x, y), Coord::data(x + 1, y)]
}

fn digon_y(x: i32, y: i32) -> Vec<Coord> {
    vec![Coord::data(x, y), Coord::data(x, y + 1)]
}

/// Builds the distance-`d` rotated surface code.
pub fn build_surface_code(d: usize) -> Result<SurfaceCode> {
    if d < 3 || d % 2 == 0 {
        return Err(LabError::InvalidDistance(d));
    }
    let di = d as i32;
    let half = (di - 1) / 2;
    let mut faces = Vec::with_capacity(d * d - 1);

    for y in 0..di - 1 {
        for x in 0..di - 1 {
            let kind = if (x + y) % 2 == 1 { FaceKind::X } else { FaceKind::Z };
            faces.push(Face {
                kind,
                region: FaceRegion::Bulk,
                qubits: square(x, y),
                meas: Coord::new(2 * x + 1, 2 * y + 1),
            });
        }
    }
    for i in 0..half {
        faces.push(Face {
            kind: FaceKind::X,
            region: FaceRegion::Left,
            qubits: digon_y(0, 2 * i),
            meas: Coord::new(-1, 4 * i + 1),
        });
        faces.push(Face {
            kind: FaceKind::X,
            region: FaceRegion::Right,
            qubits: digon_y(di - 1, 2 * i + 1),
            meas: Coord::new(2 * di - 1, 4 * i + 3),
        });
        faces.push(Face {
            kind: FaceKind::Z,
            region: FaceRegion::Bottom,
            qubits: digon_x(2 * i + 1, 0),
            meas: Coord::new(4 * i + 3, -1),
        });
        faces.push(Face {
            kind: FaceKind::Z,
            region: FaceRegion::Top,
            qubits: digon_x(2 * i, di - 1),
            meas: Coord::new(4 * i + 1, 2 * di - 1),
        });
    }
    for f in &mut faces {
        f.qubits.sort();
    }
    faces.sort_by_key(|f| (f.meas.y2, f.meas.x2));

    let data_qubits = (0..di).flat_map(|y| (0..di).map(move |x| Coord::data(x, y))).collect();
    Ok(SurfaceCode {
        d,
        data_qubits,
        faces,
        logical_z_support: (0..di).map(|y| Coord::data(0, y)).collect(),
        logical_x_support: (0..di).map(|x| Coord::data(x, 0)).collect(),
    })
}

impl SurfaceCode {
    pub fn n(&self) -> usize {
        self.d * self.d
    }

    /// Index of a data qubit, or `None` if `c` is not a data qubit.
    pub fn data_index(&self, c: Coord) -> Option<usize> {
        if c.x2 % 2 != 0 || c.y2 % 2 != 0 {
            return None;
        }
        let (x, y) = (c.x2 / 2, c.y2 / 2);
        let d = self.d as i32;
        if (0..d).contains(&x) && (0..d).contains(&y) {
            Some((y * d + x) as usize)
        } else {
            None
        }
    }

    pub fn faces_of(&self, kind: FaceKind) -> impl Iterator<Item = (usize, &Face)> {
        self.faces.iter().enumerate().filter(move |(_, f)| f.kind == kind)
    }

    /// Index of the face whose measurement qubit sits at `meas`.
    pub fn face_at(&self, meas: Coord) -> Option<usize> {
        self.faces.iter().position(|f| f.meas == meas)
    }

    pub fn stabilizer_of(&self, face: &Face) -> PauliOperator {
        let mut op = PauliOperator::identity(self.n());
        for q in &face.qubits {
            let i = self.data_index(*q).expect("face qubit outside the lattice");
            match face.kind {
                FaceKind::X => op.x[i] = true,
                FaceKind::Z => op.z[i] = true,
            }
        }
        op
    }

    pub fn logical_z(&self) -> PauliOperator {
        let mut op = PauliOperator::identity(self.n());
        for q in &self.logical_z_support {
            op.z[self.data_index(*q).unwrap()] = true;
        }
        op
    }

    pub fn logical_x(&self) -> PauliOperator {
        let mut op = PauliOperator::identity(self.n());
        for q in &self.logical_x_support {
            op.x[self.data_index(*q).unwrap()] = true;
        }
        op
    }

    pub fn to_json(&self) -> serde_json::Value {
        let pair = |c: &Coord| serde_json::json!([c.x2, c.y2]);
        serde_json::json!({
            "d": self.d,
            "qubits": self.data_qubits.iter().map(pair).collect::<Vec<_>>(),
            "faces": self.faces.iter().map(|f| serde_json::json!({
                "kind": match f.kind { FaceKind::X => "X", FaceKind::Z => "Z" },
                "qubits": f.qubits.iter().map(pair).collect::<Vec<_>>(),
                "meas": pair(&f.meas),
            })).collect::<Vec<_>>(),
            "logical_z": self.logical_z_support.iter().map(pair).collect::<Vec<_>>(),
            "logical_x": self.logical_x_support.iter().map(pair).collect::<Vec<_>>(),
        })
    }
}
