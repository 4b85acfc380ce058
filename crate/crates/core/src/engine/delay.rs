use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::Stream;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DelayKind {
    NoDelay,
    Constant(usize),
    /// Inclusive on both ends.
    UniformBounded { lo: usize, hi: usize },
    /// `table[k % table.len()][agent]` is the delay of `agent` at step `k`.
    Schedule(Vec<Vec<usize>>),
}

/// How stale each agent's contribution is at each server step, together
/// with the declared bound `tau_max`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "DelayDocument", into = "DelayDocument")]
pub struct DelayModel {
    pub kind: DelayKind,
    pub tau_max: usize,
}

impl DelayModel {
    pub fn none() -> Self {
        DelayModel {
            kind: DelayKind::NoDelay,
            tau_max: 0,
        }
    }

    pub fn constant(delay: usize) -> Self {
        DelayModel {
            kind: DelayKind::Constant(delay),
            tau_max: delay,
        }
    }

    pub fn uniform(lo: usize, hi: usize) -> Result<Self> {
        let model = DelayModel {
            kind: DelayKind::UniformBounded { lo, hi },
            tau_max: hi,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn schedule(table: Vec<Vec<usize>>, tau_max: usize) -> Result<Self> {
        let model = DelayModel {
            kind: DelayKind::Schedule(table),
            tau_max,
        };
        model.validate()?;
        Ok(model)
    }

    /// Checks that every delay the model can produce lies in `[0, tau_max]`.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidDelay(msg));
        match &self.kind {
            DelayKind::NoDelay => Ok(()),
            DelayKind::Constant(c) if *c > self.tau_max => {
                bad(format!("constant delay {c} exceeds tau_max {}", self.tau_max))
            }
            DelayKind::Constant(_) => Ok(()),
            DelayKind::UniformBounded { lo, hi } if lo > hi => {
                bad(format!("empty delay range [{lo}, {hi}]"))
            }
            DelayKind::UniformBounded { hi, .. } if *hi > self.tau_max => {
                bad(format!("delay range bound {hi} exceeds tau_max {}", self.tau_max))
            }
            DelayKind::UniformBounded { .. } => Ok(()),
            DelayKind::Schedule(table) if table.is_empty() => bad("empty delay schedule".into()),
            DelayKind::Schedule(table) => match table.iter().flatten().max() {
                Some(&d) if d > self.tau_max => {
                    bad(format!("scheduled delay {d} exceeds tau_max {}", self.tau_max))
                }
                _ => Ok(()),
            },
        }
    }

    /// Delay of `agent` at server step `step`. Only `UniformBounded` consumes `rng`.
    pub fn draw(&self, agent: usize, step: usize, rng: &mut Stream) -> Result<usize> {
        match &self.kind {
            DelayKind::NoDelay => Ok(0),
            DelayKind::Constant(c) => Ok(*c),
            DelayKind::UniformBounded { lo, hi } => Ok(rng.random_range(*lo..=*hi)),
            DelayKind::Schedule(table) => {
                let row = &table[step % table.len()];
                row.get(agent).copied().ok_or_else(|| {
                    Error::InvalidDelay(format!(
                        "schedule row {} has no entry for agent {agent}",
                        step % table.len()
                    ))
                })
            }
        }
    }

    pub fn label(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for DelayModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            DelayKind::NoDelay => write!(f, "none"),
            DelayKind::Constant(c) => write!(f, "constant({c})"),
            DelayKind::UniformBounded { lo, hi } => write!(f, "uniform({lo},{hi})"),
            DelayKind::Schedule(t) => write!(f, "schedule({}x,max={})", t.len(), self.tau_max),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Variant {
    None,
    Constant,
    UniformBounded,
    Schedule,
}

#[derive(Serialize, Deserialize)]
struct DelayDocument {
    variant: Variant,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    params: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    table: Option<Vec<Vec<usize>>>,
    tau_max: usize,
}

impl TryFrom<DelayDocument> for DelayModel {
    type Error = Error;

    fn try_from(doc: DelayDocument) -> Result<Self> {
        let params = |count: usize| {
            if doc.params.len() == count {
                Ok(doc.params.clone())
            } else {
                Err(Error::InvalidDelay(format!(
                    "{:?} takes {count} params, got {}",
                    doc.variant,
                    doc.params.len()
                )))
            }
        };
        let kind = match doc.variant {
            Variant::None => DelayKind::NoDelay,
            Variant::Constant => DelayKind::Constant(params(1)?[0]),
            Variant::UniformBounded => {
                let p = params(2)?;
                DelayKind::UniformBounded { lo: p[0], hi: p[1] }
            }
            Variant::Schedule => DelayKind::Schedule(
                doc.table
                    .clone()
                    .ok_or_else(|| Error::InvalidDelay("schedule needs a table".into()))?,
            ),
        };
        let model = DelayModel {
            kind,
            tau_max: doc.tau_max,
        };
        model.validate()?;
        Ok(model)
    }
}

impl From<DelayModel> for DelayDocument {
    fn from(model: DelayModel) -> Self {
        let (variant, params, table) = match model.kind {
            DelayKind::NoDelay => (Variant::None, vec![], None),
            DelayKind::Constant(c) => (Variant::Constant, vec![c], None),
            DelayKind::UniformBounded { lo, hi } => (Variant::UniformBounded, vec![lo, hi], None),
            DelayKind::Schedule(t) => (Variant::Schedule, vec![], Some(t)),
        };
        DelayDocument {
            variant,
            params,
            table,
            tau_max: model.tau_max,
        }
    }
}
