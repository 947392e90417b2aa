//! Syndrome-extraction circuit, circuit-level Pauli noise and Pauli-frame
//! simulation of memory-experiment shots.
//!
//! One round is: reset every measurement qubit (`|+>` for X faces, `|0>` for
//! Z faces), four CNOT layers, then measurement. The experiment starts by
//! resetting all data qubits to `|0>` and ends with a Z-basis readout of the
//! data qubits. Simulation is done relative to the noiseless reference run, so
//! every recorded bit is a flip with respect to that reference.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{param, LabError, Result};
use crate::lattice::{Coord, FaceKind, FaceRegion, SurfaceCode};

pub const STEP_RESET: usize = 0;
pub const STEP_MEASURE: usize = 5;
const STEPS: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OpKind {
    ResetPlus(Coord),
    ResetZero(Coord),
    Cnot { control: Coord, target: Coord },
    MeasureX(Coord),
    MeasureZ(Coord),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CircuitOp {
    /// `rounds` marks the final data readout.
    pub round: usize,
    pub step: usize,
    pub kind: OpKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Slot {
    AfterReset,
    /// Control qubit of a CNOT.
    AfterGateA,
    /// Target qubit of a CNOT.
    AfterGateB,
    BeforeMeasure,
    /// Data qubit not acted on during a step.
    Idle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FaultLocation {
    pub id: usize,
    pub op_ref: Option<usize>,
    pub slot: Slot,
    pub qubit: Coord,
    pub round: usize,
    pub step: usize,
    /// The Pauli is applied right before `ops[position]` executes.
    pub position: usize,
    /// Independent noise event this location belongs to; both qubits of a
    /// CNOT share one channel.
    pub channel: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];

    pub fn has_x(self) -> bool {
        matches!(self, Pauli::X | Pauli::Y)
    }

    pub fn has_z(self) -> bool {
        matches!(self, Pauli::Z | Pauli::Y)
    }

    pub fn index(self) -> usize {
        self as usize
    }

    fn from_bits(x: bool, z: bool) -> Option<Pauli> {
        match (x, z) {
            (true, false) => Some(Pauli::X),
            (true, true) => Some(Pauli::Y),
            (false, true) => Some(Pauli::Z),
            (false, false) => None,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Pauli::X => "X",
            Pauli::Y => "Y",
            Pauli::Z => "Z",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FaultSet {
    /// Sorted by location id; ids are distinct.
    pub entries: Vec<(usize, Pauli)>,
}

impl FaultSet {
    pub fn new(mut entries: Vec<(usize, Pauli)>) -> Result<Self> {
        entries.sort();
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(param("fault set contains a repeated location id"));
        }
        Ok(Self { entries })
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (id, p) in &self.entries {
            let _ = writeln!(s, "{id} {}", p.symbol());
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: &str| LabError::Parse { line: i + 1, msg: msg.to_string() };
            let mut it = line.split_whitespace();
            let id = it.next().and_then(|t| t.parse().ok()).ok_or_else(|| err("bad location id"))?;
            let p = match it.next() {
                Some("X") => Pauli::X,
                Some("Y") => Pauli::Y,
                Some("Z") => Pauli::Z,
                _ => return Err(err("expected X, Y or Z")),
            };
            if it.next().is_some() {
                return Err(err("trailing tokens"));
            }
            entries.push((id, p));
        }
        FaultSet::new(entries)
    }
}

/// Counter-based random stream: one independent ChaCha stream per shot.
pub struct RandomStream(ChaCha8Rng);

impl RandomStream {
    pub fn for_shot(seed: u64, shot: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(shot);
        Self(rng)
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.0
    }
}

/// Where a measurement record comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RecordKey {
    Face { face: usize, round: usize },
    Data { qubit: usize },
}

#[derive(Clone, Copy, Debug)]
enum SimOp {
    Reset(usize),
    Cnot(usize, usize),
    MeasX(usize),
    MeasZ(usize),
}

#[derive(Clone, Debug)]
pub struct Circuit {
    pub code: SurfaceCode,
    pub rounds: usize,
    pub ops: Vec<CircuitOp>,
    pub fault_locations: Vec<FaultLocation>,
    /// `channels[c]` lists the locations of channel `c` (one or two).
    pub channels: Vec<Vec<usize>>,
    pub records: Vec<RecordKey>,
    sim_ops: Vec<SimOp>,
    /// Record index produced by each op, if it is a measurement.
    op_record: Vec<Option<usize>>,
    face_records: Vec<Vec<usize>>,
    data_records: Vec<usize>,
    loc_qubit: Vec<usize>,
}

const DIR_LT: (i32, i32) = (-1, 1);
const DIR_LB: (i32, i32) = (-1, -1);
const DIR_RT: (i32, i32) = (1, 1);
const DIR_RB: (i32, i32) = (1, -1);

fn x_layer_member(region: FaceRegion, layer: usize) -> bool {
    match region {
        FaceRegion::Bulk => true,
        FaceRegion::Right => layer < 2,
        FaceRegion::Left => layer >= 2,
        _ => false,
    }
}

fn z_layer_member(region: FaceRegion, layer: usize) -> bool {
    match region {
        FaceRegion::Bulk => true,
        FaceRegion::Bottom => layer < 2,
        FaceRegion::Top => layer >= 2,
        _ => false,
    }
}

/// Builds `rounds` rounds of syndrome extraction for a memory experiment in
/// the Z basis.
pub fn build_syndrome_circuit(code: &SurfaceCode, rounds: usize) -> Result<Circuit> {
    if rounds == 0 {
        return Err(param("rounds must be at least 1"));
    }
    let x_dirs = [DIR_LT, DIR_LB, DIR_RT, DIR_RB];
    let z_dirs = [DIR_LT, DIR_RT, DIR_LB, DIR_RB];
    let mut ops = Vec::new();
    for round in 0..rounds {
        if round == 0 {
            for q in &code.data_qubits {
                ops.push(CircuitOp { round, step: STEP_RESET, kind: OpKind::ResetZero(*q) });
            }
        }
        for f in &code.faces {
            let kind = match f.kind {
                FaceKind::X => OpKind::ResetPlus(f.meas),
                FaceKind::Z => OpKind::ResetZero(f.meas),
            };
            ops.push(CircuitOp { round, step: STEP_RESET, kind });
        }
        for layer in 0..4 {
            for f in &code.faces {
                let kind = match f.kind {
                    FaceKind::X if x_layer_member(f.region, layer) => {
                        let (dx, dy) = x_dirs[layer];
                        OpKind::Cnot { control: f.meas, target: f.meas.offset(dx, dy) }
                    }
                    FaceKind::Z if z_layer_member(f.region, layer) => {
                        let (dx, dy) = z_dirs[layer];
                        OpKind::Cnot { control: f.meas.offset(dx, dy), target: f.meas }
                    }
                    _ => continue,
                };
                ops.push(CircuitOp { round, step: layer + 1, kind });
            }
        }
        for f in &code.faces {
            let kind = match f.kind {
                FaceKind::X => OpKind::MeasureX(f.meas),
                FaceKind::Z => OpKind::MeasureZ(f.meas),
            };
            ops.push(CircuitOp { round, step: STEP_MEASURE, kind });
        }
    }
    for q in &code.data_qubits {
        ops.push(CircuitOp { round: rounds, step: STEP_MEASURE, kind: OpKind::MeasureZ(*q) });
    }
    Circuit::from_ops(code, rounds, ops)
}

impl Circuit {
    /// Assembles a circuit from an op list, deriving the fault-location
    /// inventory and measurement records. Ops must be ordered by
    /// `(round, step)`.
    pub fn from_ops(code: &SurfaceCode, rounds: usize, ops: Vec<CircuitOp>) -> Result<Circuit> {
        let n = code.n();
        let meas_index: HashMap<Coord, usize> = code.faces.iter().enumerate().map(|(i, f)| (f.meas, n + i)).collect();
        let qubit_index = |c: Coord| -> Result<usize> {
            code.data_index(c)
                .or_else(|| meas_index.get(&c).copied())
                .ok_or_else(|| param(format!("op references unknown qubit {c}")))
        };
        if ops.windows(2).any(|w| (w[0].round, w[0].step) > (w[1].round, w[1].step)) {
            return Err(param("ops are not ordered by (round, step)"));
        }

        let mut sim_ops = Vec::with_capacity(ops.len());
        let mut op_record = Vec::with_capacity(ops.len());
        let mut records = Vec::new();
        let mut face_records = vec![vec![usize::MAX; rounds]; code.faces.len()];
        let mut data_records = vec![usize::MAX; n];
        for op in &ops {
            let sim = match op.kind {
                OpKind::ResetPlus(q) | OpKind::ResetZero(q) => SimOp::Reset(qubit_index(q)?),
                OpKind::Cnot { control, target } => SimOp::Cnot(qubit_index(control)?, qubit_index(target)?),
                OpKind::MeasureX(q) => SimOp::MeasX(qubit_index(q)?),
                OpKind::MeasureZ(q) => SimOp::MeasZ(qubit_index(q)?),
            };
            let rec = match sim {
                SimOp::MeasX(q) | SimOp::MeasZ(q) => {
                    let key = if q >= n {
                        if op.round >= rounds {
                            return Err(param("face measurement outside the round range"));
                        }
                        face_records[q - n][op.round] = records.len();
                        RecordKey::Face { face: q - n, round: op.round }
                    } else {
                        data_records[q] = records.len();
                        RecordKey::Data { qubit: q }
                    };
                    records.push(key);
                    Some(records.len() - 1)
                }
                _ => None,
            };
            sim_ops.push(sim);
            op_record.push(rec);
        }
        if face_records.iter().flatten().any(|r| *r == usize::MAX) || data_records.contains(&usize::MAX) {
            return Err(param("circuit does not measure every face each round and every data qubit at the end"));
        }

        let mut locs: Vec<FaultLocation> = Vec::new();
        let mut channels: Vec<Vec<usize>> = Vec::new();
        let push = |locs: &mut Vec<FaultLocation>, op_ref, slot, qubit, round, step, position, channel| {
            let id = locs.len();
            locs.push(FaultLocation { id, op_ref, slot, qubit, round, step, position, channel });
            id
        };
        let mut i = 0;
        while i < ops.len() {
            let (round, step) = (ops[i].round, ops[i].step);
            let mut j = i;
            let mut touched = vec![false; n];
            while j < ops.len() && (ops[j].round, ops[j].step) == (round, step) {
                let op = ops[j];
                match op.kind {
                    OpKind::ResetPlus(q) | OpKind::ResetZero(q) => {
                        let c = channels.len();
                        let id = push(&mut locs, Some(j), Slot::AfterReset, q, round, step, j + 1, c);
                        channels.push(vec![id]);
                        mark(code, &mut touched, q);
                    }
                    OpKind::Cnot { control, target } => {
                        let c = channels.len();
                        let a = push(&mut locs, Some(j), Slot::AfterGateA, control, round, step, j + 1, c);
                        let b = push(&mut locs, Some(j), Slot::AfterGateB, target, round, step, j + 1, c);
                        channels.push(vec![a, b]);
                        mark(code, &mut touched, control);
                        mark(code, &mut touched, target);
                    }
                    OpKind::MeasureX(q) | OpKind::MeasureZ(q) => {
                        let c = channels.len();
                        let id = push(&mut locs, Some(j), Slot::BeforeMeasure, q, round, step, j, c);
                        channels.push(vec![id]);
                        mark(code, &mut touched, q);
                    }
                }
                j += 1;
            }
            if round < rounds {
                for (qi, q) in code.data_qubits.iter().enumerate() {
                    if !touched[qi] {
                        let c = channels.len();
                        let id = push(&mut locs, None, Slot::Idle, *q, round, step, j, c);
                        channels.push(vec![id]);
                    }
                }
            }
            i = j;
        }
        let loc_qubit = locs.iter().map(|l| qubit_index(l.qubit)).collect::<Result<Vec<_>>>()?;
        Ok(Circuit {
            code: code.clone(),
            rounds,
            ops,
            fault_locations: locs,
            channels,
            records,
            sim_ops,
            op_record,
            face_records,
            data_records,
            loc_qubit,
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.code.n() + self.code.faces.len()
    }

    pub fn face_record(&self, face: usize, round: usize) -> usize {
        self.face_records[face][round]
    }

    pub fn data_record(&self, qubit: usize) -> usize {
        self.data_records[qubit]
    }

    /// One op per line: `ROUND STEP KIND args...`, coordinates doubled.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# d={} rounds={}", self.code.d, self.rounds);
        for op in &self.ops {
            let _ = write!(s, "{} {} ", op.round, op.step);
            let _ = match op.kind {
                OpKind::ResetPlus(q) => writeln!(s, "RX {} {}", q.x2, q.y2),
                OpKind::ResetZero(q) => writeln!(s, "RZ {} {}", q.x2, q.y2),
                OpKind::Cnot { control, target } => {
                    writeln!(s, "CX {} {} {} {}", control.x2, control.y2, target.x2, target.y2)
                }
                OpKind::MeasureX(q) => writeln!(s, "MX {} {}", q.x2, q.y2),
                OpKind::MeasureZ(q) => writeln!(s, "MZ {} {}", q.x2, q.y2),
            };
        }
        s
    }

    pub fn from_text(code: &SurfaceCode, text: &str) -> Result<Circuit> {
        let mut rounds = None;
        let mut ops = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let err = |msg: &str| LabError::Parse { line: i + 1, msg: msg.to_string() };
            let line = line.trim();
            if let Some(header) = line.strip_prefix('#') {
                for tok in header.split_whitespace() {
                    if let Some(r) = tok.strip_prefix("rounds=") {
                        rounds = Some(r.parse::<usize>().map_err(|_| err("bad rounds"))?);
                    }
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() < 5 {
                return Err(err("too few tokens"));
            }
            let num = |t: &str| t.parse::<i32>().map_err(|_| err("bad integer"));
            let round = toks[0].parse::<usize>().map_err(|_| err("bad round"))?;
            let step = toks[1].parse::<usize>().map_err(|_| err("bad step"))?;
            let c = Coord::new(num(toks[3])?, num(toks[4])?);
            let kind = match (toks[2], toks.len()) {
                ("RX", 5) => OpKind::ResetPlus(c),
                ("RZ", 5) => OpKind::ResetZero(c),
                ("MX", 5) => OpKind::MeasureX(c),
                ("MZ", 5) => OpKind::MeasureZ(c),
                ("CX", 7) => OpKind::Cnot { control: c, target: Coord::new(num(toks[5])?, num(toks[6])?) },
                _ => return Err(err("unknown op")),
            };
            if step >= STEPS {
                return Err(err("step out of range"));
            }
            ops.push(CircuitOp { round, step, kind });
        }
        let rounds = rounds
            .or_else(|| ops.iter().filter(|o| matches!(o.kind, OpKind::Cnot { .. })).map(|o| o.round + 1).max())
            .ok_or(LabError::Parse { line: 0, msg: "cannot determine round count".into() })?;
        Circuit::from_ops(code, rounds, ops)
    }

    /// Independently afflicts each noise channel with probability `p`.
    /// One-qubit channels draw uniformly from {X, Y, Z}; CNOT channels draw
    /// uniformly from the 15 non-identity two-qubit Paulis.
    pub fn sample_faults(&self, p: f64, stream: &mut RandomStream) -> Result<FaultSet> {
        if !(0.0..=1.0).contains(&p) || p.is_nan() {
            return Err(param(format!("probability {p} outside [0, 1]")));
        }
        let mut entries = Vec::new();
        let rng = stream.rng();
        let n = self.channels.len();
        let mut c = next_hit(rng, p, 0, n);
        while c < n {
            let locs = &self.channels[c];
            if locs.len() == 1 {
                let p = Pauli::ALL[rng.gen_range(0..3)];
                entries.push((locs[0], p));
            } else {
                let v: u8 = rng.gen_range(1..16);
                if let Some(pa) = Pauli::from_bits(v & 1 != 0, v & 2 != 0) {
                    entries.push((locs[0], pa));
                }
                if let Some(pb) = Pauli::from_bits(v & 4 != 0, v & 8 != 0) {
                    entries.push((locs[1], pb));
                }
            }
            c = next_hit(rng, p, c + 1, n);
        }
        entries.sort_unstable();
        Ok(FaultSet { entries })
    }

    /// Number of noise channels hit in a fault set.
    pub fn afflicted_channels(&self, faults: &FaultSet) -> usize {
        let mut chans: Vec<usize> = faults.entries.iter().map(|(l, _)| self.fault_locations[*l].channel).collect();
        chans.dedup();
        chans.len()
    }

    /// Pauli-frame simulation of one shot.
    pub fn simulate_shot(&self, faults: &FaultSet) -> Result<ShotOutcome> {
        let mut pending: Vec<(usize, usize, Pauli)> = Vec::with_capacity(faults.len());
        for &(loc, p) in &faults.entries {
            let fl = self
                .fault_locations
                .get(loc)
                .ok_or(LabError::Lookup { kind: "fault location", id: loc })?;
            pending.push((fl.position, self.qubit_of_location(fl), p));
        }
        pending.sort_by_key(|e| e.0);

        let nq = self.num_qubits();
        let mut fx = vec![false; nq];
        let mut fz = vec![false; nq];
        let mut rec = vec![false; self.records.len()];
        let mut next = 0;
        for (pos, op) in self.sim_ops.iter().enumerate() {
            while next < pending.len() && pending[next].0 == pos {
                let (_, q, p) = pending[next];
                fx[q] ^= p.has_x();
                fz[q] ^= p.has_z();
                next += 1;
            }
            match *op {
                SimOp::Reset(q) => {
                    fx[q] = false;
                    fz[q] = false;
                }
                SimOp::Cnot(c, t) => {
                    fx[t] ^= fx[c];
                    fz[c] ^= fz[t];
                }
                SimOp::MeasX(q) => rec[self.op_record[pos].unwrap()] = fz[q],
                SimOp::MeasZ(q) => rec[self.op_record[pos].unwrap()] = fx[q],
            }
        }
        Ok(self.outcome_from_records(&rec))
    }

    fn qubit_of_location(&self, fl: &FaultLocation) -> usize {
        self.loc_qubit[fl.id]
    }

    /// Bit-sliced frame simulation: each `u64` lane carries an independent
    /// fault configuration. Returns one lane word per measurement record.
    pub fn simulate_lanes(&self, faults: &[(usize, usize, Pauli)]) -> Vec<u64> {
        let mut pending: Vec<(usize, usize, u64, Pauli)> = faults
            .iter()
            .map(|&(lane, loc, p)| {
                let fl = &self.fault_locations[loc];
                (fl.position, self.qubit_of_location(fl), 1u64 << lane, p)
            })
            .collect();
        pending.sort_by_key(|e| e.0);
        let nq = self.num_qubits();
        let mut fx = vec![0u64; nq];
        let mut fz = vec![0u64; nq];
        let mut rec = vec![0u64; self.records.len()];
        let start = pending.first().map_or(self.sim_ops.len(), |e| e.0);
        let mut next = 0;
        for pos in start..self.sim_ops.len() {
            while next < pending.len() && pending[next].0 == pos {
                let (_, q, bit, p) = pending[next];
                if p.has_x() {
                    fx[q] ^= bit;
                }
                if p.has_z() {
                    fz[q] ^= bit;
                }
                next += 1;
            }
            match self.sim_ops[pos] {
                SimOp::Reset(q) => {
                    fx[q] = 0;
                    fz[q] = 0;
                }
                SimOp::Cnot(c, t) => {
                    fx[t] ^= fx[c];
                    fz[c] ^= fz[t];
                }
                SimOp::MeasX(q) => rec[self.op_record[pos].unwrap()] = fz[q],
                SimOp::MeasZ(q) => rec[self.op_record[pos].unwrap()] = fx[q],
            }
        }
        rec
    }

    pub fn outcome_from_records(&self, rec: &[bool]) -> ShotOutcome {
        let nf = self.code.faces.len();
        let meas: Vec<Vec<bool>> =
            (0..nf).map(|f| (0..self.rounds).map(|r| rec[self.face_records[f][r]]).collect()).collect();
        let final_data: Vec<bool> = self.data_records.iter().map(|&r| rec[r]).collect();
        let mut detectors = Vec::with_capacity(nf);
        for (f, face) in self.code.faces.iter().enumerate() {
            let m = &meas[f];
            let mut row: Vec<bool> = (0..self.rounds).map(|i| if i == 0 { m[0] } else { m[i - 1] ^ m[i] }).collect();
            if face.kind == FaceKind::Z {
                let parity = face
                    .qubits
                    .iter()
                    .fold(false, |acc, q| acc ^ final_data[self.code.data_index(*q).unwrap()]);
                row.push(m[self.rounds - 1] ^ parity);
            }
            detectors.push(row);
        }
        ShotOutcome { meas, final_data, detectors }
    }

    /// Record indices whose XOR forms detector `(face, row)`. Row `rounds` of
    /// a Z face is the synthetic detector closed by the data readout.
    pub fn detector_records(&self, face: usize, row: usize) -> Vec<usize> {
        let f = &self.code.faces[face];
        if row == 0 {
            vec![self.face_records[face][0]]
        } else if row < self.rounds {
            vec![self.face_records[face][row - 1], self.face_records[face][row]]
        } else {
            assert!(row == self.rounds && f.kind == FaceKind::Z, "no detector at row {row}");
            let mut v = vec![self.face_records[face][self.rounds - 1]];
            v.extend(f.qubits.iter().map(|q| self.data_records[self.code.data_index(*q).unwrap()]));
            v
        }
    }

    /// Record indices whose XOR is the logical Z readout.
    pub fn observable_records(&self) -> Vec<usize> {
        self.code
            .logical_z_support
            .iter()
            .map(|q| self.data_records[self.code.data_index(*q).unwrap()])
            .collect()
    }
}

fn mark(code: &SurfaceCode, touched: &mut [bool], q: Coord) {
    if let Some(i) = code.data_index(q) {
        touched[i] = true;
    }
}

/// Index of the next afflicted channel at or after `from`, by geometric
/// skipping; returns `n` when none remain.
fn next_hit(rng: &mut ChaCha8Rng, p: f64, from: usize, n: usize) -> usize {
    if p <= 0.0 {
        return n;
    }
    if p >= 1.0 {
        return from;
    }
    let u: f64 = 1.0 - rng.gen::<f64>();
    let skip = (u.ln() / (-p).ln_1p()).floor();
    if skip >= (n - from) as f64 {
        n
    } else {
        from + skip as usize
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShotOutcome {
    /// `meas[face][round]`, flips relative to the noiseless reference.
    pub meas: Vec<Vec<bool>>,
    pub final_data: Vec<bool>,
    /// `detectors[face][row]`; Z faces carry one extra synthetic row.
    pub detectors: Vec<Vec<bool>>,
}

impl ShotOutcome {
    pub fn active_detectors(&self, code: &SurfaceCode, kind: FaceKind) -> Vec<(usize, usize)> {
        let mut v = Vec::new();
        for (f, face) in code.faces.iter().enumerate() {
            if face.kind != kind {
                continue;
            }
            for (row, bit) in self.detectors[f].iter().enumerate() {
                if *bit {
                    v.push((f, row));
                }
            }
        }
        v
    }

    /// Parity of the final readout on the logical Z support.
    pub fn logical_z_flipped(&self, code: &SurfaceCode) -> bool {
        code.logical_z_support
            .iter()
            .fold(false, |acc, q| acc ^ self.final_data[code.data_index(*q).unwrap()])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_surface_code;

    fn circuit(d: usize, rounds: usize) -> Circuit {
        build_syndrome_circuit(&build_surface_code(d).unwrap(), rounds).unwrap()
    }

    #[test]
    fn rejects_zero_rounds() {
        let code = build_surface_code(3).unwrap();
        assert!(build_syndrome_circuit(&code, 0).is_err());
    }

    #[test]
    fn one_gate_per_qubit_per_step() {
        let c = circuit(5, 2);
        let mut seen = std::collections::HashSet::new();
        for op in &c.ops {
            let qs = match op.kind {
                OpKind::Cnot { control, target } => vec![control, target],
                OpKind::ResetPlus(q) | OpKind::ResetZero(q) | OpKind::MeasureX(q) | OpKind::MeasureZ(q) => vec![q],
            };
            for q in qs {
                assert!(seen.insert((op.round, op.step, q)), "qubit {q} used twice in step {}", op.step);
            }
        }
    }

    #[test]
    fn d3_schedule() {
        let c = circuit(3, 1);
        let cnots: Vec<_> = c.ops.iter().filter(|o| matches!(o.kind, OpKind::Cnot { .. })).collect();
        // bulk: 4 faces x 4 gates; digons: 4 faces x 2 gates
        assert_eq!(cnots.len(), 24);
        for layer in 1..=4 {
            assert_eq!(cnots.iter().filter(|o| o.step == layer).count(), 6);
        }
        // Z bulk face at (1/2, 1/2): first gate from its left-top data qubit.
        let m = Coord::new(1, 1);
        assert!(cnots.iter().any(|o| o.step == 1
            && o.kind == OpKind::Cnot { control: Coord::data(0, 1), target: m }));
        // X bulk face at (3/2, 1/2): third gate to its right-top data qubit.
        let m = Coord::new(3, 1);
        assert!(cnots.iter().any(|o| o.step == 3
            && o.kind == OpKind::Cnot { control: m, target: Coord::data(2, 1) }));
    }

    #[test]
    fn noiseless_shot_is_quiet() {
        let c = circuit(3, 3);
        let out = c.simulate_shot(&FaultSet::default()).unwrap();
        assert!(out.detectors.iter().flatten().all(|b| !b));
        assert!(out.final_data.iter().all(|b| !b));
    }

    #[test]
    fn text_round_trip() {
        let c = circuit(3, 2);
        let text = c.to_text();
        let back = Circuit::from_text(&c.code, &text).unwrap();
        assert_eq!(back.ops, c.ops);
        assert_eq!(back.fault_locations, c.fault_locations);
        let fs = FaultSet::new(vec![(3, Pauli::Y), (0, Pauli::X)]).unwrap();
        assert_eq!(FaultSet::from_text(&fs.to_text()).unwrap(), fs);
    }

    #[test]
    fn fault_set_rejects_duplicates() {
        assert!(FaultSet::new(vec![(1, Pauli::X), (1, Pauli::Z)]).is_err());
        assert!(FaultSet::from_text("1 Q").is_err());
    }

    #[test]
    fn sampling_extremes() {
        let c = circuit(3, 3);
        let mut s = RandomStream::for_shot(1, 0);
        assert!(c.sample_faults(0.0, &mut s).unwrap().is_empty());
        let all = c.sample_faults(1.0, &mut s).unwrap();
        assert_eq!(c.afflicted_channels(&all), c.channels.len());
        assert!(c.sample_faults(1.5, &mut s).is_err());
        assert!(c.sample_faults(-0.1, &mut s).is_err());
    }

    #[test]
    fn lanes_match_single_shot() {
        let c = circuit(3, 2);
        let locs = [5usize, 40, 77, 120];
        let faults: Vec<_> = locs.iter().enumerate().map(|(lane, &l)| (lane, l, Pauli::ALL[lane % 3])).collect();
        let lanes = c.simulate_lanes(&faults);
        for (lane, &l) in locs.iter().enumerate() {
            let fs = FaultSet::new(vec![(l, Pauli::ALL[lane % 3])]).unwrap();
            let out = c.simulate_shot(&fs).unwrap();
            for (r, key) in c.records.iter().enumerate() {
                let bit = lanes[r] >> lane & 1 == 1;
                let expect = match *key {
                    RecordKey::Face { face, round } => out.meas[face][round],
                    RecordKey::Data { qubit } => out.final_data[qubit],
                };
                assert_eq!(bit, expect);
            }
        }
    }
}
