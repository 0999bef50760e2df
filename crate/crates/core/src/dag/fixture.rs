//! Plain-text DAG fixtures, one block per line:
//!
//! ```text
//! # id creator whale parents...
//! G  genesis 0
//! B1 honest  0 G
//! B2 selfish 1 B1
//! ```
//!
//! The first block is the root and has no parents. `#` starts a comment.

use std::fmt;
use std::str::FromStr;

use super::{BlockDag, Creator};
use crate::error::{Error, Result};

impl FromStr for Creator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "genesis" | "g" => Ok(Creator::Genesis),
            "selfish" | "s" => Ok(Creator::Selfish),
            "honest" | "h" => Ok(Creator::Honest),
            other => Err(Error::InvalidParams(format!("unknown creator {other:?}"))),
        }
    }
}

impl BlockDag {
    pub fn parse(text: &str) -> Result<Self> {
        let mut dag: Option<BlockDag> = None;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let fail = |message: String| Error::Fixture {
                line: line_no,
                message,
            };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let name = fields.next().expect("non-empty line");
            let creator: Creator = fields
                .next()
                .ok_or_else(|| fail("missing creator".into()))?
                .parse()
                .map_err(|e: Error| fail(e.to_string()))?;
            let whale = match fields.next() {
                Some("0") => false,
                Some("1") => true,
                Some(other) => {
                    return Err(fail(format!("whale flag must be 0 or 1, got {other:?}")))
                }
                None => return Err(fail("missing whale flag".into())),
            };
            let parents: Vec<&str> = fields.collect();
            match dag.as_mut() {
                None => {
                    if !parents.is_empty() || creator != Creator::Genesis || whale {
                        return Err(fail(
                            "first block must be a genesis root without parents".into(),
                        ));
                    }
                    dag = Some(BlockDag::new(name));
                }
                Some(d) => {
                    if d.find(name).is_some() {
                        return Err(fail(format!("duplicate block {name}")));
                    }
                    if creator == Creator::Genesis {
                        return Err(fail("only the root may be genesis".into()));
                    }
                    let ids = parents
                        .iter()
                        .map(|p| d.find(p).ok_or_else(|| fail(format!("unknown parent {p}"))))
                        .collect::<Result<Vec<_>>>()?;
                    d.add_block(name, creator, whale, ids)
                        .map_err(|e| fail(e.to_string()))?;
                }
            }
        }
        dag.ok_or(Error::Fixture {
            line: 0,
            message: "empty fixture".into(),
        })
    }
}

impl FromStr for BlockDag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BlockDag::parse(s)
    }
}

impl fmt::Display for BlockDag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for block in self.blocks() {
            write!(
                f,
                "{} {} {}",
                block.name,
                block.creator,
                u8::from(block.whale)
            )?;
            for &p in &block.parents {
                write!(f, " {}", self.block(p).name)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}
