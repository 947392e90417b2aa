//! Independent stabilizer-tableau check of the syndrome circuit, and the
//! single-fault detector footprint.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uflab::circuit::{build_syndrome_circuit, FaultSet, OpKind, Pauli, STEP_RESET};
use uflab::lattice::{build_surface_code, Coord, FaceKind, SurfaceCode};

/// Aaronson-Gottesman tableau on at most 64 qubits.
struct Tableau {
    n: usize,
    x: Vec<u64>,
    z: Vec<u64>,
    r: Vec<bool>,
}

fn g(x1: bool, z1: bool, x2: bool, z2: bool) -> i32 {
    let (x2, z2) = (x2 as i32, z2 as i32);
    match (x1, z1) {
        (false, false) => 0,
        (true, true) => z2 - x2,
        (true, false) => z2 * (2 * x2 - 1),
        (false, true) => x2 * (1 - 2 * z2),
    }
}

impl Tableau {
    fn new(n: usize) -> Self {
        let mut t = Tableau { n, x: vec![0; 2 * n + 1], z: vec![0; 2 * n + 1], r: vec![false; 2 * n + 1] };
        for i in 0..n {
            t.x[i] = 1 << i;
            t.z[i + n] = 1 << i;
        }
        t
    }

    fn bit(v: u64, j: usize) -> bool {
        v >> j & 1 == 1
    }

    fn rowsum(&mut self, h: usize, i: usize) {
        let mut sum = 2 * self.r[h] as i32 + 2 * self.r[i] as i32;
        for j in 0..self.n {
            sum += g(
                Self::bit(self.x[i], j),
                Self::bit(self.z[i], j),
                Self::bit(self.x[h], j),
                Self::bit(self.z[h], j),
            );
        }
        self.r[h] = sum.rem_euclid(4) == 2;
        self.x[h] ^= self.x[i];
        self.z[h] ^= self.z[i];
    }

    fn h(&mut self, a: usize) {
        for i in 0..2 * self.n {
            let (xa, za) = (Self::bit(self.x[i], a), Self::bit(self.z[i], a));
            self.r[i] ^= xa && za;
            if xa != za {
                self.x[i] ^= 1 << a;
                self.z[i] ^= 1 << a;
            }
        }
    }

    fn s(&mut self, a: usize) {
        for i in 0..2 * self.n {
            let (xa, za) = (Self::bit(self.x[i], a), Self::bit(self.z[i], a));
            self.r[i] ^= xa && za;
            if xa {
                self.z[i] ^= 1 << a;
            }
        }
    }

    fn cnot(&mut self, a: usize, b: usize) {
        for i in 0..2 * self.n {
            let (xa, za) = (Self::bit(self.x[i], a), Self::bit(self.z[i], a));
            let (xb, zb) = (Self::bit(self.x[i], b), Self::bit(self.z[i], b));
            self.r[i] ^= xa && zb && (xb == za);
            if xa {
                self.x[i] ^= 1 << b;
            }
            if zb {
                self.z[i] ^= 1 << a;
            }
        }
    }

    fn pauli_x(&mut self, a: usize) {
        for i in 0..2 * self.n {
            self.r[i] ^= Self::bit(self.z[i], a);
        }
    }

    /// Z-basis measurement: `(outcome, deterministic)`.
    fn measure(&mut self, a: usize, rng: &mut impl Rng) -> (bool, bool) {
        let n = self.n;
        if let Some(p) = (n..2 * n).find(|&p| Self::bit(self.x[p], a)) {
            for i in 0..2 * n {
                if i != p && Self::bit(self.x[i], a) {
                    self.rowsum(i, p);
                }
            }
            self.x[p - n] = self.x[p];
            self.z[p - n] = self.z[p];
            self.r[p - n] = self.r[p];
            self.x[p] = 0;
            self.z[p] = 1 << a;
            self.r[p] = rng.gen();
            return (self.r[p], false);
        }
        let s = 2 * n;
        self.x[s] = 0;
        self.z[s] = 0;
        self.r[s] = false;
        for i in 0..n {
            if Self::bit(self.x[i], a) {
                self.rowsum(s, i + n);
            }
        }
        (self.r[s], true)
    }

    fn reset(&mut self, a: usize, rng: &mut impl Rng) {
        if self.measure(a, rng).0 {
            self.pauli_x(a);
        }
    }
}

fn qubit_map(code: &SurfaceCode) -> HashMap<Coord, usize> {
    let n = code.n();
    let mut m: HashMap<Coord, usize> = code.data_qubits.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    m.extend(code.faces.iter().enumerate().map(|(i, f)| (f.meas, n + i)));
    m
}

/// Runs the syndrome rounds and returns `(outcome, deterministic)` per face
/// and round. With `keep_data` the initial data reset is skipped.
fn run_rounds(code: &SurfaceCode, t: &mut Tableau, keep_data: bool, rng: &mut impl Rng) -> Vec<Vec<(bool, bool)>> {
    let circuit = build_syndrome_circuit(code, 2).unwrap();
    let q = qubit_map(code);
    let face_of: HashMap<Coord, usize> = code.faces.iter().enumerate().map(|(i, f)| (f.meas, i)).collect();
    let mut out = vec![Vec::new(); code.faces.len()];
    for op in &circuit.ops {
        if op.round == circuit.rounds {
            break;
        }
        match op.kind {
            OpKind::ResetZero(c) if keep_data && op.round == 0 && op.step == STEP_RESET && !face_of.contains_key(&c) => {}
            OpKind::ResetZero(c) => t.reset(q[&c], rng),
            OpKind::ResetPlus(c) => {
                t.reset(q[&c], rng);
                t.h(q[&c]);
            }
            OpKind::Cnot { control, target } => t.cnot(q[&control], q[&target]),
            OpKind::MeasureZ(c) => out[face_of[&c]].push(t.measure(q[&c], rng)),
            OpKind::MeasureX(c) => {
                t.h(q[&c]);
                out[face_of[&c]].push(t.measure(q[&c], rng));
                t.h(q[&c]);
            }
        }
    }
    out
}

#[test]
fn stabilizer_measurements_are_projective() {
    let code = build_surface_code(3).unwrap();
    let n = code.n();
    let total = n + code.faces.len();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let mut t = Tableau::new(total);
        for _ in 0..60 {
            match rng.gen_range(0..3) {
                0 => t.h(rng.gen_range(0..n)),
                1 => t.s(rng.gen_range(0..n)),
                _ => {
                    let a = rng.gen_range(0..n);
                    let b = (a + rng.gen_range(1..n)) % n;
                    t.cnot(a, b);
                }
            }
        }
        let out = run_rounds(&code, &mut t, true, &mut rng);
        for (f, rounds) in out.iter().enumerate() {
            assert_eq!(rounds.len(), 2);
            assert!(rounds[1].1, "face {f}: repeated measurement is random");
            assert_eq!(rounds[0].0, rounds[1].0, "face {f}: repeated measurement disagrees");
        }
    }
}

#[test]
fn z_faces_are_trivial_after_data_reset() {
    let code = build_surface_code(3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut t = Tableau::new(code.n() + code.faces.len());
    let out = run_rounds(&code, &mut t, false, &mut rng);
    for (f, face) in code.faces.iter().enumerate() {
        match face.kind {
            FaceKind::Z => assert_eq!(out[f][0], (false, true)),
            FaceKind::X => assert!(!out[f][0].1 && out[f][1].1),
        }
    }
}

#[test]
fn single_faults_flip_at_most_two_detectors_per_type() {
    for d in [3, 5] {
        let code = build_surface_code(d).unwrap();
        let circuit = build_syndrome_circuit(&code, d).unwrap();
        for loc in &circuit.fault_locations {
            for p in Pauli::ALL {
                let shot = circuit.simulate_shot(&FaultSet::new(vec![(loc.id, p)]).unwrap()).unwrap();
                for kind in [FaceKind::X, FaceKind::Z] {
                    let k = shot.active_detectors(&code, kind).len();
                    assert!(k <= 2, "d={d} location {} {p:?} flips {k} {kind:?} detectors", loc.id);
                }
            }
        }
    }
}
