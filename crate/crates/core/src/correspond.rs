//! Frame correspondence for `◊⊤`, `□p→□□p` and `□p→p` against seriality,
//! transitivity and reflexivity.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kripke::KripkeSystem;
use crate::par::{self, Exec};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Frame {
    pub n: usize,
    pub edges: BTreeSet<(usize, usize)>,
}

impl Frame {
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        Frame { n, edges: edges.into_iter().collect() }
    }

    /// Frame of a Kripke system; domains are ignored.
    pub fn of_system(k: &KripkeSystem) -> Self {
        Frame { n: k.num_worlds(), edges: k.edges.clone() }
    }

    /// The relation whose `a*n+b` bit is set.
    pub fn from_bits(n: usize, bits: u64) -> Self {
        let mut edges = BTreeSet::new();
        for a in 0..n {
            for b in 0..n {
                if bits >> (a * n + b) & 1 == 1 {
                    edges.insert((a, b));
                }
            }
        }
        Frame { n, edges }
    }

    fn succ_masks(&self) -> Vec<u64> {
        let mut m = vec![0u64; self.n];
        for &(a, b) in &self.edges {
            m[a] |= 1 << b;
        }
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FrameProperties {
    pub serial: bool,
    pub reflexive: bool,
    pub transitive: bool,
}

pub fn frame_properties(f: &Frame) -> FrameProperties {
    let r = |a: usize, b: usize| f.edges.contains(&(a, b));
    let w = 0..f.n;
    FrameProperties {
        serial: w.clone().all(|x| (0..f.n).any(|y| r(x, y))),
        reflexive: w.clone().all(|x| r(x, x)),
        transitive: f.edges.iter().all(|&(x, y)| (0..f.n).all(|z| !r(y, z) || r(x, z))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Schema {
    DiaTop,
    Four,
    T,
}

impl Schema {
    pub const ALL: [Schema; 3] = [Schema::DiaTop, Schema::Four, Schema::T];

    pub fn formula(self) -> &'static str {
        match self {
            Schema::DiaTop => "◊⊤",
            Schema::Four => "□p → □□p",
            Schema::T => "□p → p",
        }
    }

    pub fn condition(self) -> &'static str {
        match self {
            Schema::DiaTop => "serial: ∀x∃y xRy",
            Schema::Four => "transitive: xRy ∧ yRz ⇒ xRz",
            Schema::T => "reflexive: xRx",
        }
    }

    pub fn property(self, p: FrameProperties) -> bool {
        match self {
            Schema::DiaTop => p.serial,
            Schema::Four => p.transitive,
            Schema::T => p.reflexive,
        }
    }
}

impl fmt::Display for Schema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Schema::DiaTop => "dia-top",
            Schema::Four => "4",
            Schema::T => "t",
        })
    }
}

impl FromStr for Schema {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dia-top" | "D" | "d" => Ok(Schema::DiaTop),
            "4" => Ok(Schema::Four),
            "t" | "T" => Ok(Schema::T),
            _ => Err(Error::InvalidBounds(format!("unknown schema `{s}` (dia-top, 4, t)"))),
        }
    }
}

/// Valuation of `p` (as a world bitset) under which the schema fails somewhere.
pub fn schema_counterexample(f: &Frame, s: Schema) -> Option<u64> {
    assert!(f.n <= 16, "frames above 16 worlds are out of range");
    let succ = f.succ_masks();
    let all = (1u64 << f.n) - 1;
    let boxed = |v: u64| -> u64 { (0..f.n).filter(|&w| succ[w] & !v == 0).fold(0, |acc, w| acc | 1 << w) };
    match s {
        Schema::DiaTop => {
            // no atom: one trivial valuation
            let dia_top = (0..f.n).filter(|&w| succ[w] != 0).fold(0u64, |acc, w| acc | 1 << w);
            (dia_top != all).then_some(0)
        }
        Schema::Four => (0..1u64 << f.n).find(|&v| {
            let b = boxed(v);
            b & !boxed(b) & all != 0
        }),
        Schema::T => (0..1u64 << f.n).find(|&v| boxed(v) & !v & all != 0),
    }
}

/// Holds at every world under every valuation of `p`.
pub fn validates_schema(f: &Frame, s: Schema) -> bool {
    schema_counterexample(f, s).is_none()
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Discrepancy {
    pub schema: Schema,
    pub frame: Frame,
    pub validates: bool,
    pub has_property: bool,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CorrespondenceRow {
    pub schema: Schema,
    pub formula: &'static str,
    pub condition: &'static str,
    pub frames: usize,
    pub validating: usize,
    pub with_property: usize,
    pub discrepancies: usize,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CorrespondenceReport {
    pub max_worlds: usize,
    pub rows: Vec<CorrespondenceRow>,
    pub discrepancies: Vec<Discrepancy>,
}

impl CorrespondenceReport {
    pub fn passed(&self) -> bool {
        self.discrepancies.is_empty()
    }
}

/// Every relation on `1..=max_worlds` worlds, both directions of each row.
pub fn correspondence_report(max_worlds: usize, schemas: &[Schema], exec: Exec) -> Result<CorrespondenceReport> {
    if max_worlds == 0 || max_worlds > 5 {
        return Err(Error::InvalidBounds("max worlds must lie in 1..=5".into()));
    }
    let mut rows: Vec<CorrespondenceRow> = schemas
        .iter()
        .map(|&s| CorrespondenceRow {
            schema: s,
            formula: s.formula(),
            condition: s.condition(),
            frames: 0,
            validating: 0,
            with_property: 0,
            discrepancies: 0,
        })
        .collect();
    let mut discrepancies = Vec::new();
    for n in 1..=max_worlds {
        let count = 1usize << (n * n);
        let results = par::map_range(exec, count, |bits| {
            let f = Frame::from_bits(n, bits as u64);
            let props = frame_properties(&f);
            schemas.iter().map(|&s| (validates_schema(&f, s), s.property(props))).collect::<Vec<_>>()
        });
        for (bits, res) in results.into_iter().enumerate() {
            for (row, (valid, prop)) in rows.iter_mut().zip(res) {
                row.frames += 1;
                row.validating += valid as usize;
                row.with_property += prop as usize;
                if valid != prop {
                    row.discrepancies += 1;
                    discrepancies.push(Discrepancy {
                        schema: row.schema,
                        frame: Frame::from_bits(n, bits as u64),
                        validates: valid,
                        has_property: prop,
                    });
                }
            }
        }
    }
    Ok(CorrespondenceReport { max_worlds, rows, discrepancies })
}

impl fmt::Display for CorrespondenceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "claim: the axiom holds in the algebra iff its frame condition holds on R")?;
        writeln!(f, "checked: all relations on at most {} worlds, one propositional atom", self.max_worlds)?;
        writeln!(f, "{:<14} | {:<30} | {:>7} | {:>9} | {:>8} | {:>13}", "formula", "condition on R", "frames", "validate", "property", "discrepancies")?;
        writeln!(f, "{}", "-".repeat(96))?;
        for r in &self.rows {
            let cond = if r.schema == Schema::Four { format!("{} (*)", r.condition) } else { r.condition.to_string() };
            writeln!(
                f,
                "{:<14} | {:<30} | {:>7} | {:>9} | {:>8} | {:>13}",
                r.formula, cond, r.frames, r.validating, r.with_property, r.discrepancies
            )?;
        }
        writeln!(f, "(*) the consequent is sometimes printed as yRz, which holds trivially; xRz is checked")?;
        Ok(())
    }
}
