//! Composite Hilbert-space layout for the source–bath–ancilla–battery
//! system, with subsystem embedding and partial traces.
//!
//! Tensor factors are ordered (S, B, A, W); the battery is always the last
//! factor. A factor of dimension 1 denotes an absent subsystem.

use serde::{Deserialize, Serialize};

use crate::density::DensityMatrix;
use crate::error::{Error, Result};
use crate::operator::{CMatrix, HermitianOperator, MAX_TOTAL_DIM};

/// One of the four tensor factors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    Source = 0,
    Bath = 1,
    Ancilla = 2,
    Battery = 3,
}

impl Subsystem {
    /// Index-based lookup; rejects anything outside 0..4.
    pub fn from_index(index: usize) -> Result<Self> {
        match index {
            0 => Ok(Subsystem::Source),
            1 => Ok(Subsystem::Bath),
            2 => Ok(Subsystem::Ancilla),
            3 => Ok(Subsystem::Battery),
            _ => Err(Error::param("subsystem", "in 0..4", index)),
        }
    }
}

/// Ordered subsystem dimensions (S, B, A, W).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompositeSpace {
    dims: [usize; 4],
}

impl CompositeSpace {
    pub fn new(dims: [usize; 4]) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::param("dims", ">= 1 each", format!("{dims:?}")));
        }
        let total: usize = dims.iter().product();
        if total > MAX_TOTAL_DIM {
            return Err(Error::param(
                "total_dim",
                &format!("<= {MAX_TOTAL_DIM}"),
                total,
            ));
        }
        Ok(Self { dims })
    }

    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }

    pub fn dim_of(&self, s: Subsystem) -> usize {
        self.dims[s as usize]
    }

    pub fn battery_dim(&self) -> usize {
        self.dims[3]
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    fn split(&self, s: Subsystem) -> (usize, usize, usize) {
        let k = s as usize;
        let before: usize = self.dims[..k].iter().product();
        let after: usize = self.dims[k + 1..].iter().product();
        (before, self.dims[k], after)
    }

    /// `1_before ⊗ A ⊗ 1_after` acting as `A` on the given factor.
    pub fn embed(&self, a: &HermitianOperator, s: Subsystem) -> Result<HermitianOperator> {
        let (before, dk, after) = self.split(s);
        if a.dim() != dk {
            return Err(Error::DimensionMismatch {
                expected: dk,
                got: a.dim(),
            });
        }
        HermitianOperator::identity(before)
            .tensor(a)?
            .tensor(&HermitianOperator::identity(after))
    }

    /// `1_SBA ⊗ A` with the battery as last factor.
    pub fn embed_battery(&self, a: &HermitianOperator) -> Result<HermitianOperator> {
        self.embed(a, Subsystem::Battery)
    }

    /// Partial trace of a raw matrix over all factors except `keep`.
    pub fn partial_trace_matrix(&self, m: &CMatrix, keep: Subsystem) -> Result<CMatrix> {
        let total = self.total_dim();
        if m.nrows() != total || m.ncols() != total {
            return Err(Error::DimensionMismatch {
                expected: total,
                got: m.nrows(),
            });
        }
        let (before, dk, after) = self.split(keep);
        let mut out = CMatrix::zeros(dk, dk);
        for pre in 0..before {
            for post in 0..after {
                for a in 0..dk {
                    let row = (pre * dk + a) * after + post;
                    for b in 0..dk {
                        let col = (pre * dk + b) * after + post;
                        out[(a, b)] += m[(row, col)];
                    }
                }
            }
        }
        Ok(out)
    }

    /// Reduced state on the kept factor; trace and positivity preserved.
    pub fn partial_trace(&self, rho: &DensityMatrix, keep: Subsystem) -> Result<DensityMatrix> {
        let reduced = self.partial_trace_matrix(rho.matrix(), keep)?;
        DensityMatrix::new(HermitianOperator::new(reduced)?)
    }
}
