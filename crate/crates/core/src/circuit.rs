//! Gate-level compilation of the number-phase unitary
//! U = exp(i Σ_{j<k} ω_jk n_j n_k).
//!
//! Qubit j is mode j under Jordan–Wigner with |1⟩ occupied, so
//! n_j = (1 − Z_j)/2 and every pair term splits into
//! e^{iω/4} · e^{−iωZ_j/4} · e^{−iωZ_k/4} · e^{iωZ_jZ_k/4}.
//! Gate angles θ below mean exp(iθZ) and exp(iθZ_aZ_b).

use std::collections::HashMap;
use std::fmt::Write as _;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hamiltonian::NonGaussianParams;
use crate::oracle::{pair_phase, MAX_DENSE_MODES};

/// Angles with smaller magnitude are dropped.
pub const PRUNE_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Gate {
    Rz { qubit: usize, angle: f64 },
    Zz { a: usize, b: usize, angle: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GateList {
    n_qubits: usize,
    gates: Vec<Gate>,
    global_phase: f64,
}

impl GateList {
    pub fn new(n_qubits: usize, gates: Vec<Gate>, global_phase: f64) -> Result<Self> {
        for g in &gates {
            match *g {
                Gate::Rz { qubit, .. } if qubit >= n_qubits => {
                    return Err(Error::IndexOutOfRange { index: qubit, bound: n_qubits })
                }
                Gate::Zz { a, b, .. } => {
                    if a.max(b) >= n_qubits {
                        return Err(Error::IndexOutOfRange { index: a.max(b), bound: n_qubits });
                    }
                    if a == b {
                        return Err(Error::Validation(format!("two-qubit gate on a single qubit {a}")));
                    }
                }
                _ => {}
            }
        }
        Ok(Self { n_qubits, gates, global_phase })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn global_phase(&self) -> f64 {
        self.global_phase
    }

    pub fn without_global_phase(&self) -> Self {
        Self { global_phase: 0.0, ..self.clone() }
    }

    pub fn rz_count(&self) -> usize {
        self.gates.iter().filter(|g| matches!(g, Gate::Rz { .. })).count()
    }

    pub fn zz_count(&self) -> usize {
        self.gates.len() - self.rz_count()
    }
}

pub fn emit_ufa(omega: &NonGaussianParams) -> GateList {
    let n = omega.n_modes();
    let w = omega.matrix();
    let mut gates = Vec::new();
    for j in 0..n {
        let angle = -0.25 * (0..n).map(|k| w[(j, k)]).sum::<f64>();
        if angle.abs() >= PRUNE_TOL {
            gates.push(Gate::Rz { qubit: j, angle });
        }
    }
    let mut global_phase = 0.0;
    for j in 0..n {
        for k in (j + 1)..n {
            let angle = 0.25 * w[(j, k)];
            global_phase += angle;
            if angle.abs() >= PRUNE_TOL {
                gates.push(Gate::Zz { a: j, b: k, angle });
            }
        }
    }
    GateList { n_qubits: n, gates, global_phase }
}

fn z(bit: usize) -> f64 {
    if bit == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Diagonal of the unitary realized by the gate list, global phase included.
pub fn dense_unitary_diagonal(gates: &GateList) -> Result<Vec<Complex64>> {
    let n = gates.n_qubits;
    if n > MAX_DENSE_MODES {
        return Err(Error::Resource(format!("dense check supports at most {MAX_DENSE_MODES} qubits, got {n}")));
    }
    Ok((0..1usize << n)
        .map(|s| {
            let mut phase = gates.global_phase;
            for g in &gates.gates {
                phase += match *g {
                    Gate::Rz { qubit, angle } => angle * z(s >> qubit & 1),
                    Gate::Zz { a, b, angle } => angle * z(s >> a & 1) * z(s >> b & 1),
                };
            }
            Complex64::from_polar(1.0, phase)
        })
        .collect())
}

/// Max-norm distance between the gate list and the directly exponentiated
/// number-phase unitary.
pub fn verify_dense(gates: &GateList, omega: &NonGaussianParams) -> Result<f64> {
    let n = omega.n_modes();
    if gates.n_qubits != n {
        return Err(Error::Dimension(format!("{} qubits for {n} modes", gates.n_qubits)));
    }
    let diag = dense_unitary_diagonal(gates)?;
    Ok(diag
        .iter()
        .enumerate()
        .map(|(s, d)| (d - Complex64::from_polar(1.0, pair_phase(omega.matrix(), s, n))).norm())
        .fold(0.0, f64::max))
}

pub fn to_qasm(gates: &GateList, use_rzz: bool) -> String {
    let mut out = String::new();
    writeln!(out, "OPENQASM 2.0;").unwrap();
    writeln!(out, "include \"qelib1.inc\";").unwrap();
    writeln!(out, "qreg q[{}];", gates.n_qubits).unwrap();
    writeln!(out, "// global_phase {:.16e}", gates.global_phase).unwrap();
    // rz(λ) = exp(−iλZ/2) and rzz(λ) = exp(−iλZZ/2)
    for g in &gates.gates {
        match *g {
            Gate::Rz { qubit, angle } => writeln!(out, "rz({:.16e}) q[{qubit}];", -2.0 * angle).unwrap(),
            Gate::Zz { a, b, angle } if use_rzz => {
                writeln!(out, "rzz({:.16e}) q[{a}],q[{b}];", -2.0 * angle).unwrap()
            }
            Gate::Zz { a, b, angle } => {
                writeln!(out, "cx q[{a}],q[{b}];").unwrap();
                writeln!(out, "rz({:.16e}) q[{b}];", -2.0 * angle).unwrap();
                writeln!(out, "cx q[{a}],q[{b}];").unwrap();
            }
        }
    }
    out
}

/// A circuit made only of `rz`, `rzz` and `cx`: every gate maps a basis
/// state to a single basis state times a phase.
#[derive(Debug, Clone, PartialEq)]
pub struct MonomialCircuit {
    pub n_qubits: usize,
    pub global_phase: f64,
    ops: Vec<QasmOp>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum QasmOp {
    Rz(usize, f64),
    Rzz(usize, usize, f64),
    Cx(usize, usize),
}

impl MonomialCircuit {
    /// Image (basis state, phase) of the basis state `s`.
    pub fn apply(&self, s: usize) -> (usize, f64) {
        let mut state = s;
        let mut phase = self.global_phase;
        for op in &self.ops {
            match *op {
                QasmOp::Rz(q, lambda) => phase -= 0.5 * lambda * z(state >> q & 1),
                QasmOp::Rzz(a, b, lambda) => phase -= 0.5 * lambda * z(state >> a & 1) * z(state >> b & 1),
                QasmOp::Cx(c, t) => {
                    if state >> c & 1 == 1 {
                        state ^= 1 << t;
                    }
                }
            }
        }
        (state, phase)
    }

    /// Diagonal of the circuit unitary, or a validation error if it
    /// permutes basis states.
    pub fn diagonal(&self) -> Result<Vec<Complex64>> {
        if self.n_qubits > MAX_DENSE_MODES {
            return Err(Error::Resource(format!("dense check supports at most {MAX_DENSE_MODES} qubits")));
        }
        (0..1usize << self.n_qubits)
            .map(|s| {
                let (t, phase) = self.apply(s);
                if t != s {
                    return Err(Error::Validation(format!("circuit maps basis state {s} to {t}")));
                }
                Ok(Complex64::from_polar(1.0, phase))
            })
            .collect()
    }
}

fn qasm_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn parse_qubit(token: &str, line: usize, n: Option<usize>) -> Result<usize> {
    let inner = token
        .trim()
        .strip_prefix("q[")
        .and_then(|t| t.strip_suffix(']'))
        .ok_or_else(|| qasm_err(line, format!("expected `q[i]`, got `{token}`")))?;
    let q: usize = inner.parse().map_err(|_| qasm_err(line, format!("bad qubit index `{inner}`")))?;
    let n = n.ok_or_else(|| qasm_err(line, "gate before `qreg` declaration"))?;
    if q >= n {
        return Err(qasm_err(line, format!("qubit {q} outside register of size {n}")));
    }
    Ok(q)
}

fn parse_angle(text: &str, line: usize) -> Result<f64> {
    text.trim().parse().map_err(|_| qasm_err(line, format!("bad angle `{text}`")))
}

/// Reads back the subset of OpenQASM 2.0 that [`to_qasm`] writes.
pub fn parse_qasm(text: &str) -> Result<MonomialCircuit> {
    let mut n: Option<usize> = None;
    let mut global_phase = 0.0;
    let mut ops = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let trimmed = raw.trim();
        if let Some(comment) = trimmed.strip_prefix("//") {
            if let Some(v) = comment.trim().strip_prefix("global_phase") {
                global_phase = parse_angle(v, line)?;
            }
            continue;
        }
        if trimmed.is_empty() {
            continue;
        }
        let stmt = trimmed
            .strip_suffix(';')
            .ok_or_else(|| qasm_err(line, "statement must end with `;`"))?
            .trim();
        if stmt.starts_with("OPENQASM") || stmt.starts_with("include") {
            continue;
        }
        if let Some(reg) = stmt.strip_prefix("qreg") {
            if n.is_some() {
                return Err(qasm_err(line, "only one quantum register is supported"));
            }
            let size = reg
                .trim()
                .strip_prefix("q[")
                .and_then(|t| t.strip_suffix(']'))
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| qasm_err(line, format!("bad register declaration `{stmt}`")))?;
            n = Some(size);
            continue;
        }
        let (head, args) = match stmt.find(' ') {
            Some(i) => (&stmt[..i], stmt[i + 1..].trim()),
            None => return Err(qasm_err(line, format!("cannot parse `{stmt}`"))),
        };
        let qubits: Vec<&str> = args.split(',').collect();
        let (name, param) = match head.find('(') {
            Some(i) => {
                let p = head[i + 1..]
                    .strip_suffix(')')
                    .ok_or_else(|| qasm_err(line, format!("unbalanced parameter list in `{head}`")))?;
                (&head[..i], Some(parse_angle(p, line)?))
            }
            None => (head, None),
        };
        let op = match (name, param, qubits.as_slice()) {
            ("rz", Some(l), [q]) => QasmOp::Rz(parse_qubit(q, line, n)?, l),
            ("rzz", Some(l), [a, b]) => QasmOp::Rzz(parse_qubit(a, line, n)?, parse_qubit(b, line, n)?, l),
            ("cx", None, [a, b]) => QasmOp::Cx(parse_qubit(a, line, n)?, parse_qubit(b, line, n)?),
            _ => return Err(qasm_err(line, format!("unsupported statement `{stmt}`"))),
        };
        ops.push(op);
    }
    let n_qubits = n.ok_or_else(|| qasm_err(1, "missing `qreg` declaration"))?;
    Ok(MonomialCircuit { n_qubits, global_phase, ops })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Connectivity {
    AllToAll,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResourceReport {
    pub n_qubits: usize,
    pub connectivity: Connectivity,
    pub rz_count: usize,
    pub zz_count: usize,
    pub cx_count: usize,
    /// Layers of the greedy edge colouring of the ZZ interaction graph.
    pub zz_depth: usize,
    /// ⌈log₂ N⌉, the depth below which no arrangement of dense ω can go.
    pub depth_lower_bound: usize,
    pub swap_upper_bound: usize,
    pub global_phase: f64,
    pub notes: Vec<String>,
}

fn greedy_edge_coloring(edges: &[(usize, usize)]) -> usize {
    let mut used: HashMap<usize, Vec<usize>> = HashMap::new();
    let mut colors = 0;
    for &(a, b) in edges {
        let taken = |v: usize, c: usize, used: &HashMap<usize, Vec<usize>>| used.get(&v).is_some_and(|cs| cs.contains(&c));
        let c = (0..).find(|&c| !taken(a, c, &used) && !taken(b, c, &used)).unwrap();
        used.entry(a).or_default().push(c);
        used.entry(b).or_default().push(c);
        colors = colors.max(c + 1);
    }
    colors
}

pub fn resource_report(gates: &GateList, connectivity: Connectivity) -> ResourceReport {
    let n = gates.n_qubits;
    let edges: Vec<(usize, usize)> = gates
        .gates
        .iter()
        .filter_map(|g| match *g {
            Gate::Zz { a, b, .. } => Some((a.min(b), a.max(b))),
            _ => None,
        })
        .collect();
    let zz = edges.len();
    let depth_lower_bound = if zz == 0 { 0 } else { (usize::BITS - (n - 1).leading_zeros()) as usize };
    let swap_upper_bound = match connectivity {
        Connectivity::AllToAll => 0,
        Connectivity::Linear => {
            // move one endpoint next to the other and back, or run one full
            // odd-even transposition sweep, which makes every pair adjacent once
            let naive: usize = edges.iter().map(|&(a, b)| 2 * (b - a - 1)).sum();
            if naive == 0 {
                0
            } else {
                naive.min(n * (n - 1) / 2)
            }
        }
    };
    let mut notes = vec![format!(
        "two-qubit gates come from pairs j<k only: at most {} for {n} qubits; a count of {} would also include the j=k terms, which reduce to single-qubit phases",
        n * n.saturating_sub(1) / 2,
        n * (n + 1) / 2
    )];
    if connectivity == Connectivity::Linear && swap_upper_bound > 0 {
        notes.push("linear routing: SWAP overhead grows linearly with the number of qubits per sweep".into());
    }
    ResourceReport {
        n_qubits: n,
        connectivity,
        rz_count: gates.rz_count(),
        zz_count: zz,
        cx_count: 2 * zz,
        zz_depth: greedy_edge_coloring(&edges),
        depth_lower_bound,
        swap_upper_bound,
        global_phase: gates.global_phase,
        notes,
    }
}
