use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Regression,
    Binary,
    Preference,
}

/// Supervision attached to a feature matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Targets {
    Real(Vec<f64>),
    Binary(Vec<bool>),
    /// `(chosen, rejected)` row indices into the feature matrix.
    Pairs(Vec<(usize, usize)>),
}

impl Targets {
    pub fn kind(&self) -> TaskKind {
        match self {
            Targets::Real(_) => TaskKind::Regression,
            Targets::Binary(_) => TaskKind::Binary,
            Targets::Pairs(_) => TaskKind::Preference,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Targets::Real(v) => v.len(),
            Targets::Binary(v) => v.len(),
            Targets::Pairs(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Per-feature (and, for regression, per-target) z-scoring statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub feature_mean: Vec<f64>,
    pub feature_std: Vec<f64>,
    pub target_mean: f64,
    pub target_std: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub x: Matrix,
    pub targets: Targets,
    pub normalization: Option<Normalization>,
}

impl Dataset {
    pub fn new(x: Matrix, targets: Targets) -> Result<Self> {
        match &targets {
            Targets::Pairs(p) => {
                if let Some(&(a, b)) = p.iter().find(|(a, b)| *a >= x.rows() || *b >= x.rows()) {
                    return Err(Error::invalid(format!(
                        "preference pair ({a}, {b}) out of range for {} rows",
                        x.rows()
                    )));
                }
            }
            t if t.len() != x.rows() => {
                return Err(Error::invalid(format!(
                    "{} targets for {} rows",
                    t.len(),
                    x.rows()
                )));
            }
            Targets::Real(v) if v.iter().any(|y| !y.is_finite()) => {
                return Err(Error::numeric("non-finite regression target"));
            }
            _ => {}
        }
        Ok(Self {
            x,
            targets,
            normalization: None,
        })
    }

    pub fn regression(x: Matrix, y: Vec<f64>) -> Result<Self> {
        Self::new(x, Targets::Real(y))
    }

    pub fn binary(x: Matrix, y: Vec<bool>) -> Result<Self> {
        Self::new(x, Targets::Binary(y))
    }

    pub fn kind(&self) -> TaskKind {
        self.targets.kind()
    }

    /// Number of supervised examples (rows, or pairs for preference data).
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.x.cols()
    }

    pub fn real_targets(&self) -> Option<&[f64]> {
        match &self.targets {
            Targets::Real(v) => Some(v),
            _ => None,
        }
    }

    pub fn binary_targets(&self) -> Option<&[bool]> {
        match &self.targets {
            Targets::Binary(v) => Some(v),
            _ => None,
        }
    }

    /// Subset of examples. Preference data keeps every feature row and filters pairs.
    pub fn select(&self, idx: &[usize]) -> Dataset {
        let (x, targets) = match &self.targets {
            Targets::Real(v) => (
                self.x.select_rows(idx),
                Targets::Real(idx.iter().map(|&i| v[i]).collect()),
            ),
            Targets::Binary(v) => (
                self.x.select_rows(idx),
                Targets::Binary(idx.iter().map(|&i| v[i]).collect()),
            ),
            Targets::Pairs(p) => (
                self.x.clone(),
                Targets::Pairs(idx.iter().map(|&i| p[i]).collect()),
            ),
        };
        Dataset {
            x,
            targets,
            normalization: self.normalization.clone(),
        }
    }

    /// Appends the examples of `other`, which must have the same kind and width.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if self.dim() != other.dim() || self.kind() != other.kind() {
            return Err(Error::invalid("cannot concatenate datasets of different shape or kind"));
        }
        let x = Matrix::vstack(&[&self.x, &other.x])?;
        let offset = self.x.rows();
        let targets = match (&self.targets, &other.targets) {
            (Targets::Real(a), Targets::Real(b)) => Targets::Real([a.as_slice(), b].concat()),
            (Targets::Binary(a), Targets::Binary(b)) => Targets::Binary([a.as_slice(), b].concat()),
            (Targets::Pairs(a), Targets::Pairs(b)) => Targets::Pairs(
                a.iter()
                    .copied()
                    .chain(b.iter().map(|&(c, r)| (c + offset, r + offset)))
                    .collect(),
            ),
            _ => unreachable!("kinds checked above"),
        };
        Ok(Dataset {
            x,
            targets,
            normalization: self.normalization.clone(),
        })
    }

    /// Writes the canonical dump: a header line `x0,..,x{D-1},y` and one row per example.
    ///
    /// Binary targets are written as 0/1; preference data writes the feature rows
    /// followed by a `chosen,rejected` block.
    pub fn write_dump(&self, path: &Path) -> Result<()> {
        let io = |e| Error::io(path, e);
        let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
        let header: Vec<String> = (0..self.dim()).map(|j| format!("x{j}")).collect();
        let emit_rows = |f: &mut dyn Write, tail: &dyn Fn(usize) -> Option<String>| {
            for r in 0..self.x.rows() {
                let mut cells: Vec<String> = self.x.row(r).iter().map(|v| v.to_string()).collect();
                if let Some(t) = tail(r) {
                    cells.push(t);
                }
                writeln!(f, "{}", cells.join(",")).map_err(io)?;
            }
            Ok::<_, Error>(())
        };
        match &self.targets {
            Targets::Real(y) => {
                writeln!(f, "{},y", header.join(",")).map_err(io)?;
                emit_rows(&mut f, &|r| Some(y[r].to_string()))?;
            }
            Targets::Binary(y) => {
                writeln!(f, "{},y", header.join(",")).map_err(io)?;
                emit_rows(&mut f, &|r| Some(u8::from(y[r]).to_string()))?;
            }
            Targets::Pairs(p) => {
                writeln!(f, "{}", header.join(",")).map_err(io)?;
                emit_rows(&mut f, &|_| None)?;
                writeln!(f, "chosen,rejected").map_err(io)?;
                for (c, r) in p {
                    writeln!(f, "{c},{r}").map_err(io)?;
                }
            }
        }
        f.flush().map_err(io)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn length_checks() {
        let x = Matrix::zeros(3, 2);
        assert!(Dataset::regression(x.clone(), vec![1.0; 2]).is_err());
        assert!(Dataset::new(x.clone(), Targets::Pairs(vec![(0, 3)])).is_err());
        let d = Dataset::new(x, Targets::Pairs(vec![(0, 2), (1, 0)])).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.kind(), TaskKind::Preference);
    }

    #[test]
    fn concat_offsets_pairs() {
        let a = Dataset::new(Matrix::zeros(2, 1), Targets::Pairs(vec![(0, 1)])).unwrap();
        let c = a.concat(&a).unwrap();
        assert_eq!(c.targets, Targets::Pairs(vec![(0, 1), (2, 3)]));
    }

    #[test]
    fn dump_has_header_and_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let d = Dataset::binary(Matrix::from_rows(&[vec![0.5, 1.0]]).unwrap(), vec![true]).unwrap();
        d.write_dump(&path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "x0,x1,y\n0.5,1,1\n");
    }
}
