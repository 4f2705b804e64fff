use std::collections::BTreeMap;
use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};

use super::FaceBlocks;
use crate::basis::TrefftzBasis;
use crate::mesh::ElementId;

/// Block-sparse global system `A u = ℓ`.
///
/// Blocks are keyed by (trial element, test element); a block has the test
/// element's dofs as rows and the trial element's dofs as columns.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    pub bases: Vec<TrefftzBasis>,
    /// Element `e` owns dofs `offsets[e]..offsets[e + 1]`.
    pub offsets: Vec<usize>,
    pub blocks: BTreeMap<(ElementId, ElementId), DMatrix<f64>>,
    pub rhs: DVector<f64>,
}

impl LinearSystem {
    pub fn zeros(bases: Vec<TrefftzBasis>) -> Self {
        let mut offsets = Vec::with_capacity(bases.len() + 1);
        offsets.push(0);
        for b in &bases {
            offsets.push(offsets.last().unwrap() + b.len());
        }
        let dim = *offsets.last().unwrap();
        Self {
            bases,
            offsets,
            blocks: BTreeMap::new(),
            rhs: DVector::zeros(dim),
        }
    }

    pub fn dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn num_elements(&self) -> usize {
        self.bases.len()
    }

    pub fn range(&self, e: ElementId) -> std::ops::Range<usize> {
        self.offsets[e]..self.offsets[e + 1]
    }

    pub fn block(&self, trial: ElementId, test: ElementId) -> Option<&DMatrix<f64>> {
        self.blocks.get(&(trial, test))
    }

    /// Adds the contributions of one face.
    pub fn add_face(&mut self, fb: FaceBlocks) {
        for ((trial, test), b) in fb.blocks {
            match self.blocks.get_mut(&(trial, test)) {
                Some(existing) => *existing += b,
                None => {
                    self.blocks.insert((trial, test), b);
                }
            }
        }
        for (e, r) in fb.rhs {
            let range = self.range(e);
            let mut seg = self.rhs.rows_mut(range.start, range.len());
            seg += r;
        }
    }

    /// `A u`.
    pub fn matvec(&self, u: &DVector<f64>) -> DVector<f64> {
        let mut y = DVector::zeros(self.dim());
        for (&(trial, test), b) in &self.blocks {
            let (rt, rs) = (self.range(trial), self.range(test));
            let x = u.rows(rt.start, rt.len());
            let mut out = y.rows_mut(rs.start, rs.len());
            out.gemv(1.0, b, &x, 1.0);
        }
        y
    }

    /// The bilinear form A(trial; test) = testᵀ A trial.
    pub fn form(&self, trial: &DVector<f64>, test: &DVector<f64>) -> f64 {
        test.dot(&self.matvec(trial))
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.dim(), self.dim());
        for (&(trial, test), b) in &self.blocks {
            let (rt, rs) = (self.range(trial), self.range(test));
            a.view_mut((rs.start, rt.start), (rs.len(), rt.len())).copy_from(b);
        }
        a
    }

    /// Coordinate-format dump (1-based indices), followed by the right-hand side.
    pub fn write_matrix_market<W: Write>(&self, mut out: W) -> io::Result<()> {
        let nnz: usize = self.blocks.values().map(|b| b.iter().filter(|v| **v != 0.0).count()).sum();
        writeln!(out, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(out, "{} {} {}", self.dim(), self.dim(), nnz)?;
        for (&(trial, test), b) in &self.blocks {
            let (c0, r0) = (self.offsets[trial], self.offsets[test]);
            for j in 0..b.ncols() {
                for i in 0..b.nrows() {
                    if b[(i, j)] != 0.0 {
                        writeln!(out, "{} {} {:e}", r0 + i + 1, c0 + j + 1, b[(i, j)])?;
                    }
                }
            }
        }
        writeln!(out, "% rhs")?;
        for v in self.rhs.iter() {
            writeln!(out, "% {v:e}")?;
        }
        Ok(())
    }
}
