//! Compressed sparse row storage and triplet assembly.
//!
//! Assembly accumulates `(row, col, value)` triplets; duplicates are summed
//! when the triplets are compressed. The resulting [`CsrMatrix`] is immutable
//! apart from the explicit restriction and block helpers below.

use std::io::{BufRead, Write};
use std::path::Path;

use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use crate::error::{Error, Result};

/// Coordinate-format accumulator.
#[derive(Debug, Clone)]
pub struct TripletBuilder {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, cap: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::with_capacity(cap),
        }
    }

    #[inline]
    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        self.entries.push((row, col, value));
    }

    /// Adds `scale * block` with its top-left corner at `(row_off, col_off)`.
    pub fn add_block(&mut self, row_off: usize, col_off: usize, block: &CsrMatrix, scale: f64) {
        for (r, c, v) in block.iter() {
            self.push(row_off + r, col_off + c, scale * v);
        }
    }

    /// Adds `scale * blockᵀ` with its top-left corner at `(row_off, col_off)`.
    pub fn add_block_transposed(
        &mut self,
        row_off: usize,
        col_off: usize,
        block: &CsrMatrix,
        scale: f64,
    ) {
        for (r, c, v) in block.iter() {
            self.push(row_off + c, col_off + r, scale * v);
        }
    }

    pub fn extend(&mut self, other: TripletBuilder) {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        self.entries.extend(other.entries);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn build(mut self) -> CsrMatrix {
        // Stable: duplicates are summed in insertion order.
        self.entries.sort_by_key(|e| (e.0, e.1));
        let mut indptr = vec![0usize; self.nrows + 1];
        let mut indices = Vec::with_capacity(self.entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for &(r, c, v) in &self.entries {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..self.nrows {
            indptr[r + 1] += indptr[r];
        }
        CsrMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            indptr,
            indices,
            values,
        }
    }
}

/// Real sparse matrix in compressed row form.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut t = TripletBuilder::new(n, n);
        for i in 0..n {
            t.push(i, i, 1.0);
        }
        t.build()
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let mut t = TripletBuilder::new(nrows, ncols);
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    t.push(i, j, v);
                }
            }
        }
        t.build()
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nrows, self.ncols)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.indptr[r]..self.indptr[r + 1];
        match self.indices[span.clone()].binary_search(&c) {
            Ok(k) => self.values[span.start + k],
            Err(_) => 0.0,
        }
    }

    /// `y = self * x`
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols, "matvec: x has wrong length");
        assert_eq!(y.len(), self.nrows, "matvec: y has wrong length");
        for (r, yr) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.values[k] * x[self.indices[k]];
            }
            *yr = acc;
        }
    }

    /// `y = selfᵀ * x`
    pub fn matvec_transpose(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows, "matvec_transpose: x has wrong length");
        let mut y = vec![0.0; self.ncols];
        for (r, &xr) in x.iter().enumerate() {
            if xr == 0.0 {
                continue;
            }
            for k in self.indptr[r]..self.indptr[r + 1] {
                y[self.indices[k]] += self.values[k] * xr;
            }
        }
        y
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut t = TripletBuilder::with_capacity(self.ncols, self.nrows, self.nnz());
        for (r, c, v) in self.iter() {
            t.push(c, r, v);
        }
        t.build()
    }

    pub fn scaled(&self, s: f64) -> CsrMatrix {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// `self + s * other`
    pub fn add_scaled(&self, other: &CsrMatrix, s: f64) -> CsrMatrix {
        assert_eq!(self.shape(), other.shape());
        let mut t = TripletBuilder::with_capacity(self.nrows, self.ncols, self.nnz() + other.nnz());
        t.add_block(0, 0, self, 1.0);
        t.add_block(0, 0, other, s);
        t.build()
    }

    /// Keeps the rows and columns whose map entry is `Some`, renumbered.
    pub fn restrict(
        &self,
        row_map: &[Option<usize>],
        nrows: usize,
        col_map: &[Option<usize>],
        ncols: usize,
    ) -> CsrMatrix {
        assert_eq!(row_map.len(), self.nrows);
        assert_eq!(col_map.len(), self.ncols);
        let mut t = TripletBuilder::new(nrows, ncols);
        for (r, c, v) in self.iter() {
            if let (Some(rr), Some(cc)) = (row_map[r], col_map[c]) {
                t.push(rr, cc, v);
            }
        }
        t.build()
    }

    pub fn restrict_rows(&self, row_map: &[Option<usize>], nrows: usize) -> CsrMatrix {
        let cols: Vec<Option<usize>> = (0..self.ncols).map(Some).collect();
        self.restrict(row_map, nrows, &cols, self.ncols)
    }

    /// Dense copy of the sub-block `rows × cols`.
    pub fn dense_block(&self, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> Mat<f64> {
        let mut m = Mat::<f64>::zeros(rows.len(), cols.len());
        for r in rows.clone() {
            for (c, v) in self.row(r) {
                if cols.contains(&c) {
                    m[(r - rows.start, c - cols.start)] += v;
                }
            }
        }
        m
    }

    pub fn to_dense(&self) -> Mat<f64> {
        self.dense_block(0..self.nrows, 0..self.ncols)
    }

    pub fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let trip: Vec<Triplet<usize, usize, f64>> =
            self.iter().map(|(r, c, v)| Triplet::new(r, c, v)).collect();
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &trip)
            .map_err(|e| Error::Assembly(format!("sparse conversion failed: {e:?}")))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// `max |a_ij - a_ji|`
    pub fn asymmetry(&self) -> f64 {
        assert_eq!(self.nrows, self.ncols);
        let t = self.transpose();
        self.add_scaled(&t, -1.0).max_abs()
    }

    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        self.asymmetry() <= rel_tol * self.max_abs().max(f64::MIN_POSITIVE)
    }

    /// `xᵀ A y`
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        crate::linalg::dot(x, &self.matvec(y))
    }

    /// Writes the matrix in MatrixMarket coordinate format with 17
    /// significant digits.
    pub fn write_matrix_market(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", self.nrows, self.ncols, self.nnz())?;
        for (r, c, v) in self.iter() {
            writeln!(w, "{} {} {:.16e}", r + 1, c + 1, v)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a real general or symmetric MatrixMarket coordinate file.
    pub fn read_matrix_market(path: &Path) -> Result<CsrMatrix> {
        let file = std::fs::File::open(path)?;
        let reader = std::io::BufReader::new(file);
        let perr = |line: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut symmetric = false;
        let mut header_seen = false;
        let mut builder: Option<TripletBuilder> = None;
        for (idx, line) in reader.lines().enumerate() {
            let lineno = idx + 1;
            let line = line?;
            let trimmed = line.trim();
            if trimmed.starts_with("%%MatrixMarket") {
                let lower = trimmed.to_ascii_lowercase();
                if !lower.contains("coordinate") || !lower.contains("real") {
                    return Err(perr(lineno, "only real coordinate matrices are supported".into()));
                }
                symmetric = lower.contains("symmetric");
                header_seen = true;
                continue;
            }
            if trimmed.is_empty() || trimmed.starts_with('%') {
                continue;
            }
            if !header_seen {
                return Err(perr(lineno, "missing %%MatrixMarket banner".into()));
            }
            let parts: Vec<&str> = trimmed.split_whitespace().collect();
            match builder.as_mut() {
                None => {
                    if parts.len() != 3 {
                        return Err(perr(lineno, "expected `nrows ncols nnz`".into()));
                    }
                    let n: Vec<usize> = parts
                        .iter()
                        .map(|p| p.parse::<usize>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|e| perr(lineno, e.to_string()))?;
                    builder = Some(TripletBuilder::with_capacity(n[0], n[1], n[2]));
                }
                Some(b) => {
                    if parts.len() != 3 {
                        return Err(perr(lineno, "expected `row col value`".into()));
                    }
                    let r: usize = parts[0].parse().map_err(|e: std::num::ParseIntError| perr(lineno, e.to_string()))?;
                    let c: usize = parts[1].parse().map_err(|e: std::num::ParseIntError| perr(lineno, e.to_string()))?;
                    let v: f64 = parts[2].parse().map_err(|e: std::num::ParseFloatError| perr(lineno, e.to_string()))?;
                    if r == 0 || c == 0 || r > b.nrows || c > b.ncols {
                        return Err(perr(lineno, format!("index ({r}, {c}) out of range")));
                    }
                    b.push(r - 1, c - 1, v);
                    if symmetric && r != c {
                        b.push(c - 1, r - 1, v);
                    }
                }
            }
        }
        builder
            .map(TripletBuilder::build)
            .ok_or_else(|| perr(0, "missing size line".into()))
    }
}
