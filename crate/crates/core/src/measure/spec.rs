//! JSON interchange for Williamson measures.
//!
//! ```json
//! {"type":"discrete","d":3,"atoms":[{"t":0.25,"w":0.875},{"t":0.75,"w":0.125}]}
//! ```
//!
//! Numbers may be written as decimals or as exact ratios `{"num":7,"den":8}`.
//! Density pieces are `{"lo","hi","coeffs"}` with an optional exponential
//! `"rate"`; `"hi": null` marks an unbounded last piece. Singular laws are
//! `{"family":"derham","p","blocks":[{"lo","hi","c","d"}],"tail":{"lo","width","c"}}`.
//! Setting `"rescale": true` normalizes the law for `d` before validation.

use serde::{Deserialize, Serialize};

use super::{
    rescale, Atom, Block, Density, DiscreteLaw, GeometricTail, Law, Piece, SingularLaw,
    WilliamsonMeasure,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(untagged)]
enum Num {
    Float(f64),
    Ratio { num: i64, den: i64 },
}

impl Num {
    fn value(self) -> Result<f64> {
        match self {
            Num::Float(x) => Ok(x),
            Num::Ratio { num, den } if den != 0 => Ok(num as f64 / den as f64),
            Num::Ratio { .. } => Err(Error::Spec("ratio with zero denominator".into())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Kind {
    Discrete,
    Abscont,
    Singular,
    Mixture,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AtomSpec {
    t: Num,
    w: Num,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PieceSpec {
    lo: Num,
    hi: Option<Num>,
    coeffs: Vec<Num>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rate: Option<Num>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BlockSpec {
    lo: Num,
    hi: Num,
    c: Num,
    d: Num,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TailSpec {
    lo: Num,
    width: Num,
    c: Num,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SingularSpec {
    family: String,
    p: Num,
    blocks: Vec<BlockSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tail: Option<TailSpec>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ComponentSpec {
    w: Num,
    spec: Box<MeasureSpec>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeasureSpec {
    #[serde(rename = "type")]
    kind: Kind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    d: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    atoms: Option<Vec<AtomSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tail: Option<Num>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pieces: Option<Vec<PieceSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    singular: Option<SingularSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mixture: Option<Vec<ComponentSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rescale: Option<bool>,
}

fn missing(kind: &str, field: &str) -> Error {
    Error::Spec(format!("{kind} spec requires \"{field}\""))
}

fn build_law(spec: &MeasureSpec) -> Result<Law> {
    let unexpected = |field: &str, present: bool| -> Result<()> {
        if present {
            Err(Error::Spec(format!("unexpected field \"{field}\" for this type")))
        } else {
            Ok(())
        }
    };
    match spec.kind {
        Kind::Discrete => {
            unexpected("pieces", spec.pieces.is_some())?;
            unexpected("singular", spec.singular.is_some())?;
            unexpected("mixture", spec.mixture.is_some())?;
            let atoms = spec
                .atoms
                .as_ref()
                .ok_or_else(|| missing("discrete", "atoms"))?
                .iter()
                .map(|a| Ok(Atom::new(a.t.value()?, a.w.value()?)))
                .collect::<Result<Vec<_>>>()?;
            let tail = spec.tail.map(Num::value).transpose()?.unwrap_or(0.0);
            Ok(Law::Discrete(DiscreteLaw::new(atoms, tail)?))
        }
        Kind::Abscont => {
            unexpected("atoms", spec.atoms.is_some())?;
            unexpected("singular", spec.singular.is_some())?;
            unexpected("mixture", spec.mixture.is_some())?;
            let pieces = spec
                .pieces
                .as_ref()
                .ok_or_else(|| missing("abscont", "pieces"))?
                .iter()
                .map(|p| {
                    Ok(Piece {
                        lo: p.lo.value()?,
                        hi: p.hi.map(Num::value).transpose()?.unwrap_or(f64::INFINITY),
                        coeffs: p.coeffs.iter().map(|c| c.value()).collect::<Result<_>>()?,
                        rate: p.rate.map(Num::value).transpose()?.unwrap_or(0.0),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Law::AbsolutelyContinuous(Density::piecewise(pieces)?))
        }
        Kind::Singular => {
            unexpected("atoms", spec.atoms.is_some())?;
            unexpected("pieces", spec.pieces.is_some())?;
            unexpected("mixture", spec.mixture.is_some())?;
            let s = spec
                .singular
                .as_ref()
                .ok_or_else(|| missing("singular", "singular"))?;
            if s.family != "derham" {
                return Err(Error::Spec(format!(
                    "unknown singular family \"{}\"",
                    s.family
                )));
            }
            let blocks = s
                .blocks
                .iter()
                .map(|b| {
                    Ok(Block {
                        lo: b.lo.value()?,
                        hi: b.hi.value()?,
                        c: b.c.value()?,
                        d: b.d.value()?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let tail = s
                .tail
                .as_ref()
                .map(|t| {
                    Ok::<_, Error>(GeometricTail {
                        lo: t.lo.value()?,
                        width: t.width.value()?,
                        c: t.c.value()?,
                    })
                })
                .transpose()?;
            Ok(Law::SingularContinuous(SingularLaw::new(
                s.p.value()?,
                blocks,
                tail,
            )?))
        }
        Kind::Mixture => {
            unexpected("atoms", spec.atoms.is_some())?;
            unexpected("pieces", spec.pieces.is_some())?;
            unexpected("singular", spec.singular.is_some())?;
            let parts = spec
                .mixture
                .as_ref()
                .ok_or_else(|| missing("mixture", "mixture"))?
                .iter()
                .map(|c| Ok((c.w.value()?, build_law(&c.spec)?)))
                .collect::<Result<Vec<_>>>()?;
            Law::mixture(parts)
        }
    }
}

fn law_spec(law: &Law) -> Result<MeasureSpec> {
    let mut spec = MeasureSpec {
        kind: Kind::Discrete,
        d: None,
        atoms: None,
        tail: None,
        pieces: None,
        singular: None,
        mixture: None,
        rescale: None,
    };
    match law {
        Law::Discrete(l) => {
            spec.atoms = Some(
                l.atoms()
                    .iter()
                    .map(|a| AtomSpec {
                        t: Num::Float(a.t),
                        w: Num::Float(a.w),
                    })
                    .collect(),
            );
            if l.tail_mass() > 0.0 {
                spec.tail = Some(Num::Float(l.tail_mass()));
            }
        }
        Law::AbsolutelyContinuous(Density::Piecewise(pieces)) => {
            spec.kind = Kind::Abscont;
            spec.pieces = Some(
                pieces
                    .iter()
                    .map(|p| PieceSpec {
                        lo: Num::Float(p.lo),
                        hi: p.hi.is_finite().then_some(Num::Float(p.hi)),
                        coeffs: p.coeffs.iter().map(|&c| Num::Float(c)).collect(),
                        rate: (p.rate != 0.0).then_some(Num::Float(p.rate)),
                    })
                    .collect(),
            );
        }
        Law::AbsolutelyContinuous(Density::BlackBox(_)) => {
            return Err(Error::Spec(
                "black-box densities have no JSON representation".into(),
            ));
        }
        Law::SingularContinuous(l) => {
            spec.kind = Kind::Singular;
            spec.singular = Some(SingularSpec {
                family: "derham".into(),
                p: Num::Float(l.p()),
                blocks: l
                    .blocks()
                    .iter()
                    .map(|b| BlockSpec {
                        lo: Num::Float(b.lo),
                        hi: Num::Float(b.hi),
                        c: Num::Float(b.c),
                        d: Num::Float(b.d),
                    })
                    .collect(),
                tail: l.tail().map(|t| TailSpec {
                    lo: Num::Float(t.lo),
                    width: Num::Float(t.width),
                    c: Num::Float(t.c),
                }),
            });
        }
        Law::Mixture(parts) => {
            spec.kind = Kind::Mixture;
            spec.mixture = Some(
                parts
                    .iter()
                    .map(|(w, l)| {
                        Ok(ComponentSpec {
                            w: Num::Float(*w),
                            spec: Box::new(law_spec(l)?),
                        })
                    })
                    .collect::<Result<_>>()?,
            );
        }
    }
    Ok(spec)
}

/// Parses and validates a measure spec.
pub fn parse_measure_spec(text: &str) -> Result<WilliamsonMeasure> {
    let spec: MeasureSpec =
        serde_json::from_str(text).map_err(|e| Error::Spec(format!("schema: {e}")))?;
    let d = spec.d.ok_or_else(|| missing("top-level", "d"))?;
    let law = build_law(&spec)?;
    if spec.rescale == Some(true) {
        Ok(rescale(&law, d)?.1)
    } else {
        WilliamsonMeasure::new(law, d)
    }
}

/// Serializes a measure in canonical form.
pub fn emit_measure_spec(gamma: &WilliamsonMeasure) -> Result<String> {
    let mut spec = law_spec(gamma.law())?;
    spec.d = Some(gamma.dim());
    serde_json::to_string(&spec).map_err(|e| Error::Spec(e.to_string()))
}
