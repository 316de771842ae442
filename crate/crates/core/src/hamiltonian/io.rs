//! Plain-text Hamiltonian files.
//!
//! ```text
//! NMODES 4
//! F 1 2 -1.0000000000000000e0 0.0000000000000000e0
//! H 1 3 3 1 2.0000000000000000e0
//! ```
//!
//! Indices are 1-based, unlisted entries are zero and `#` starts a comment.
//! Symmetry partners must be listed explicitly; the loader checks them
//! instead of filling them in.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;

use super::ManyBodyHamiltonian;
use crate::error::{Error, Result};
use crate::linalg::CMatrix;

pub fn write_hamiltonian(ham: &ManyBodyHamiltonian) -> String {
    let mut out = String::new();
    writeln!(out, "NMODES {}", ham.n_modes()).unwrap();
    for t in ham.one_body_terms() {
        writeln!(out, "F {} {} {:.16e} {:.16e}", t.p + 1, t.q + 1, t.value.re, t.value.im).unwrap();
    }
    for t in ham.two_body_terms() {
        writeln!(out, "H {} {} {} {} {:.16e}", t.p + 1, t.q + 1, t.r + 1, t.s + 1, t.value).unwrap();
    }
    out
}

pub fn save_hamiltonian(ham: &ManyBodyHamiltonian, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, write_hamiltonian(ham))?;
    Ok(())
}

pub fn load_hamiltonian(path: impl AsRef<Path>) -> Result<ManyBodyHamiltonian> {
    parse_hamiltonian(&std::fs::read_to_string(path)?)
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn parse_index(token: &str, line: usize, n: usize) -> Result<usize> {
    let i: usize = token.parse().map_err(|_| parse_err(line, format!("bad index `{token}`")))?;
    if i == 0 || i > n {
        return Err(parse_err(line, format!("index {i} outside 1..={n}")));
    }
    Ok(i - 1)
}

fn parse_float(token: &str, line: usize) -> Result<f64> {
    let v: f64 = token.parse().map_err(|_| parse_err(line, format!("bad number `{token}`")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("non-finite number `{token}`")));
    }
    Ok(v)
}

pub fn parse_hamiltonian(text: &str) -> Result<ManyBodyHamiltonian> {
    let mut n_modes: Option<usize> = None;
    let mut f = CMatrix::zeros(0, 0);
    let mut h: Vec<f64> = Vec::new();
    let mut seen_f = std::collections::HashSet::new();
    let mut seen_h = std::collections::HashSet::new();

    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = content.split_whitespace().collect();
        match (tokens[0], n_modes) {
            ("NMODES", None) => {
                if tokens.len() != 2 {
                    return Err(parse_err(line, "expected `NMODES <n>`"));
                }
                let n: usize = tokens[1].parse().map_err(|_| parse_err(line, format!("bad mode count `{}`", tokens[1])))?;
                if n == 0 {
                    return Err(parse_err(line, "mode count must be positive"));
                }
                n_modes = Some(n);
                f = CMatrix::zeros(n, n);
                h = vec![0.0; n.pow(4)];
            }
            ("NMODES", Some(_)) => return Err(parse_err(line, "duplicate NMODES header")),
            (_, None) => return Err(parse_err(line, "file must start with `NMODES <n>`")),
            ("F", Some(n)) => {
                if tokens.len() != 5 {
                    return Err(parse_err(line, "expected `F p q re im`"));
                }
                let p = parse_index(tokens[1], line, n)?;
                let q = parse_index(tokens[2], line, n)?;
                if !seen_f.insert((p, q)) {
                    return Err(parse_err(line, format!("duplicate entry F {} {}", p + 1, q + 1)));
                }
                f[(p, q)] = Complex64::new(parse_float(tokens[3], line)?, parse_float(tokens[4], line)?);
            }
            ("H", Some(n)) => {
                if tokens.len() != 6 {
                    return Err(parse_err(line, "expected `H p q r s value`"));
                }
                let p = parse_index(tokens[1], line, n)?;
                let q = parse_index(tokens[2], line, n)?;
                let r = parse_index(tokens[3], line, n)?;
                let s = parse_index(tokens[4], line, n)?;
                if !seen_h.insert((p, q, r, s)) {
                    return Err(parse_err(line, format!("duplicate entry H {} {} {} {}", p + 1, q + 1, r + 1, s + 1)));
                }
                h[((p * n + q) * n + r) * n + s] = parse_float(tokens[5], line)?;
            }
            (other, Some(_)) => return Err(parse_err(line, format!("unknown record `{other}`"))),
        }
    }
    if n_modes.is_none() {
        return Err(parse_err(1, "missing `NMODES <n>` header"));
    }
    ManyBodyHamiltonian::new(f, h)
}
