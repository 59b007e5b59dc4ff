//! JSON file formats.
//!
//! * matrix: `{"dim": d, "entries": [[re, im], ...]}` row-major,
//! * POVM: `{"space": [labels], "dim": d, "effects": {label: matrix}}`,
//! * quantum random variable: `{"space": [labels], "dim": d, "values": {label: matrix}}`,
//! * partition: list of lists of labels; filtration: list of partitions.
//!
//! Floats are written in shortest round-trip form, so re-parsing any
//! emitted file reproduces every value bit for bit.

use std::path::Path;

use indexmap::IndexMap;
use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::HermitianMatrix;
use crate::povm::Povm;
use crate::space::{Filtration, Partition, SampleSpace};
use crate::variable::QuantumRandomVariable;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixRecord {
    pub dim: usize,
    pub entries: Vec<[f64; 2]>,
}

impl TryFrom<MatrixRecord> for HermitianMatrix {
    type Error = Error;
    fn try_from(r: MatrixRecord) -> Result<Self> {
        let entries: Vec<Complex64> = r.entries.iter().map(|&[re, im]| Complex64::new(re, im)).collect();
        HermitianMatrix::from_entries(r.dim, &entries)
    }
}

impl From<HermitianMatrix> for MatrixRecord {
    fn from(m: HermitianMatrix) -> Self {
        let d = m.dim();
        let mut entries = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                let z = m.get(i, j);
                entries.push([z.re, z.im]);
            }
        }
        MatrixRecord { dim: d, entries }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PovmRecord {
    pub space: Vec<String>,
    pub dim: usize,
    pub effects: IndexMap<String, HermitianMatrix>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QrvRecord {
    pub space: Vec<String>,
    pub dim: usize,
    pub values: IndexMap<String, HermitianMatrix>,
}

fn ordered_values(
    space: &SampleSpace,
    dim: usize,
    mut map: IndexMap<String, HermitianMatrix>,
    what: &str,
) -> Result<Vec<HermitianMatrix>> {
    let mut out = Vec::with_capacity(space.len());
    for label in space.labels() {
        let m = map
            .shift_remove(label)
            .ok_or_else(|| Error::Parse(format!("missing {what} for point `{label}`")))?;
        if m.dim() != dim {
            return Err(Error::DimMismatch {
                expected: dim,
                found: m.dim(),
            });
        }
        out.push(m);
    }
    if let Some(extra) = map.keys().next() {
        return Err(Error::Parse(format!("{what} for unknown point `{extra}`")));
    }
    Ok(out)
}

impl TryFrom<PovmRecord> for Povm {
    type Error = Error;
    fn try_from(r: PovmRecord) -> Result<Self> {
        let space = SampleSpace::new(r.space)?;
        let effects = ordered_values(&space, r.dim, r.effects, "effect")?;
        Povm::new(space, effects)
    }
}

impl From<Povm> for PovmRecord {
    fn from(p: Povm) -> Self {
        PovmRecord {
            space: p.space().labels().map(String::from).collect(),
            dim: p.dim(),
            effects: p
                .space()
                .labels()
                .map(String::from)
                .zip(p.effects().iter().cloned())
                .collect(),
        }
    }
}

impl TryFrom<QrvRecord> for QuantumRandomVariable {
    type Error = Error;
    fn try_from(r: QrvRecord) -> Result<Self> {
        let space = SampleSpace::new(r.space)?;
        let values = ordered_values(&space, r.dim, r.values, "value")?;
        QuantumRandomVariable::new(space, values)
    }
}

impl From<QuantumRandomVariable> for QrvRecord {
    fn from(q: QuantumRandomVariable) -> Self {
        QrvRecord {
            space: q.space().labels().map(String::from).collect(),
            dim: q.dim(),
            values: q
                .space()
                .labels()
                .map(String::from)
                .zip(q.values().iter().cloned())
                .collect(),
        }
    }
}

/// Parses JSON, reporting line and column on failure.
pub fn from_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str(text)
        .map_err(|e| Error::Parse(format!("line {}, column {}: {e}", e.line(), e.column())))
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("records serialize")
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    from_json(&text).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn partition_from_json(space: &SampleSpace, text: &str) -> Result<Partition> {
    let blocks: Vec<Vec<String>> = from_json(text)?;
    Partition::from_labels(space, &blocks)
}

pub fn partition_to_json(space: &SampleSpace, p: &Partition) -> String {
    to_json(&p.to_labels(space))
}

pub fn filtration_from_json(space: &SampleSpace, text: &str) -> Result<Filtration> {
    let stages: Vec<Vec<Vec<String>>> = from_json(text)?;
    Filtration::from_labels(space, &stages)
}

pub fn filtration_to_json(space: &SampleSpace, f: &Filtration) -> String {
    to_json(&f.to_labels(space))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_round_trip_is_exact() {
        let m = HermitianMatrix::from_entries(
            2,
            &[
                Complex64::new(0.1, 0.0),
                Complex64::new(1.0 / 3.0, -2.0f64.sqrt()),
                Complex64::new(1.0 / 3.0, 2.0f64.sqrt()),
                Complex64::new(-1e-300, 0.0),
            ],
        )
        .unwrap();
        let back: HermitianMatrix = from_json(&to_json(&m)).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn povm_file_validates() {
        let text = r#"{"space": ["a", "b"], "dim": 1,
            "effects": {"b": {"dim": 1, "entries": [[0.75, 0]]},
                        "a": {"dim": 1, "entries": [[0.25, 0]]}}}"#;
        let p: Povm = from_json(text).unwrap();
        assert!(p.is_probability());
        assert_eq!(p.effect(0).trace(), 0.25);

        let bad = r#"{"space": ["a"], "dim": 1, "effects": {"a": {"dim": 1, "entries": [[1.5, 0]]}}}"#;
        assert!(from_json::<Povm>(bad).is_err());
        let missing = r#"{"space": ["a", "b"], "dim": 1, "effects": {"a": {"dim": 1, "entries": [[1, 0]]}}}"#;
        assert!(from_json::<Povm>(missing).is_err());
    }

    #[test]
    fn parse_errors_carry_location() {
        match from_json::<MatrixRecord>("{\"dim\": 1,\n \"entries\": [1]}") {
            Err(Error::Parse(msg)) => assert!(msg.contains("line 2"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn partition_round_trip() {
        let s = SampleSpace::new(["p", "q", "r"]).unwrap();
        let p = partition_from_json(&s, r#"[["r", "p"], ["q"]]"#).unwrap();
        assert_eq!(partition_from_json(&s, &partition_to_json(&s, &p)).unwrap(), p);
        assert!(partition_from_json(&s, r#"[["p"], ["zz"]]"#).is_err());
    }
}
