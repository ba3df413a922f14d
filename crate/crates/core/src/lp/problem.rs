//! Assembly of the vocabulary-selection LP as a sparse constraint system.
//!
//! Columns are laid out as `[free edges | priced edges | colours]`, blocks in
//! table order. Rows are the per-vertex flow equalities, then one coupling
//! inequality per priced edge (`p_e - c_colour(e) <= 0`), then a single
//! budget row (`sum c <= K`). Everything is ordered deterministically so two
//! assemblies of the same graph are identical.

use std::io::Write;

use crate::error::{Error, Result};
use crate::tokgraph::TokenisationGraph;

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseMatrix {
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>, cols: usize) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for row in &rows {
            debug_assert!(row.windows(2).all(|w| w[0].0 < w[1].0), "sorted, unique");
            for &(c, v) in row {
                debug_assert!(c < cols);
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            rows: rows.len(),
            cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    /// `out = A x`.
    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (i, out_i) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *out_i = acc;
        }
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut counts = vec![0usize; self.cols];
        for &c in &self.col_idx {
            counts[c] += 1;
        }
        let mut row_ptr = vec![0usize; self.cols + 1];
        for c in 0..self.cols {
            row_ptr[c + 1] = row_ptr[c] + counts[c];
        }
        let mut col_idx = vec![0usize; self.nnz()];
        let mut values = vec![0.0f64; self.nnz()];
        let mut next = row_ptr.clone();
        for r in 0..self.rows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.col_idx[k];
                col_idx[next[c]] = r;
                values[next[c]] = self.values[k];
                next[c] += 1;
            }
        }
        SparseMatrix {
            rows: self.cols,
            cols: self.rows,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Absolute row sums, for diagonal step sizes.
    pub fn row_abs_sums(&self) -> Vec<f64> {
        (0..self.rows)
            .map(|i| self.row(i).map(|(_, v)| v.abs()).sum())
            .collect()
    }
}

/// The assembled LP: minimise `objective . x` subject to the equality rows,
/// the `<=` inequality rows, and box bounds `0 <= x <= 1` on every column.
#[derive(Debug, Clone)]
pub struct LpProblem {
    pub budget: usize,
    pub n_free: usize,
    pub n_priced: usize,
    pub n_colours: usize,
    /// Per-column objective weight; edge columns carry their pretoken's
    /// occurrence count, colour columns cost nothing.
    pub objective: Vec<f64>,
    /// All constraint rows: `n_eq_rows` equalities first, then inequalities.
    pub constraint: SparseMatrix,
    /// Cached transpose of `constraint`.
    pub constraint_t: SparseMatrix,
    pub rhs: Vec<f64>,
    pub n_eq_rows: usize,
}

impl LpProblem {
    pub fn n_cols(&self) -> usize {
        self.n_free + self.n_priced + self.n_colours
    }

    pub fn n_rows(&self) -> usize {
        self.constraint.rows
    }

    pub fn n_ineq_rows(&self) -> usize {
        self.n_rows() - self.n_eq_rows
    }

    pub fn free_col(&self, i: usize) -> usize {
        debug_assert!(i < self.n_free);
        i
    }

    pub fn priced_col(&self, i: usize) -> usize {
        debug_assert!(i < self.n_priced);
        self.n_free + i
    }

    pub fn colour_col(&self, i: usize) -> usize {
        debug_assert!(i < self.n_colours);
        self.n_free + self.n_priced + i
    }

    /// Exports the problem in CPLEX LP text format for cross-checking with
    /// third-party solvers. Variables are named `f{i}`, `p{i}`, `c{i}`.
    pub fn dump_lp(&self, w: &mut dyn Write) -> std::io::Result<()> {
        let name = |col: usize| -> String {
            if col < self.n_free {
                format!("f{col}")
            } else if col < self.n_free + self.n_priced {
                format!("p{}", col - self.n_free)
            } else {
                format!("c{}", col - self.n_free - self.n_priced)
            }
        };
        writeln!(w, "Minimize")?;
        write!(w, " obj:")?;
        let mut first = true;
        for (col, &weight) in self.objective.iter().enumerate() {
            if weight != 0.0 {
                if first {
                    write!(w, " {} {}", weight, name(col))?;
                    first = false;
                } else {
                    write!(w, " + {} {}", weight, name(col))?;
                }
            }
        }
        writeln!(w)?;
        writeln!(w, "Subject To")?;
        for r in 0..self.n_rows() {
            let label = if r < self.n_eq_rows {
                format!("v{r}")
            } else if r + 1 < self.n_rows() {
                format!("k{}", r - self.n_eq_rows)
            } else {
                "budget".to_string()
            };
            write!(w, " {label}:")?;
            for (col, v) in self.constraint.row(r) {
                if v >= 0.0 {
                    write!(w, " + {} {}", v, name(col))?;
                } else {
                    write!(w, " - {} {}", -v, name(col))?;
                }
            }
            let op = if r < self.n_eq_rows { "=" } else { "<=" };
            writeln!(w, " {op} {}", self.rhs[r])?;
        }
        writeln!(w, "Bounds")?;
        for col in 0..self.n_cols() {
            writeln!(w, " 0 <= {} <= 1", name(col))?;
        }
        writeln!(w, "End")
    }

    /// Structural self-check used by tests: each invariant of the assembled
    /// system, verified directly against the stored sparse rows.
    pub fn validate(&self) -> Result<()> {
        let bad = |message: String| Error::InvalidArgument { message };
        if self.rhs.len() != self.n_rows() {
            return Err(bad("rhs length != row count".into()));
        }
        // Equality rows touch only edge columns with coefficients +-1.
        for r in 0..self.n_eq_rows {
            for (col, v) in self.constraint.row(r) {
                if col >= self.n_free + self.n_priced {
                    return Err(bad(format!("equality row {r} touches colour column")));
                }
                if v != 1.0 && v != -1.0 {
                    return Err(bad(format!("equality row {r} has coefficient {v}")));
                }
            }
        }
        // Each priced column appears in exactly one coupling row, paired with
        // exactly one colour column with coefficient -1.
        let mut seen = vec![0usize; self.n_priced];
        for r in self.n_eq_rows..self.n_rows().saturating_sub(1) {
            let entries: Vec<_> = self.constraint.row(r).collect();
            if entries.len() != 2 {
                return Err(bad(format!("coupling row {r} has {} entries", entries.len())));
            }
            let (pcol, pv) = entries[0];
            let (ccol, cv) = entries[1];
            if pv != 1.0 || cv != -1.0 {
                return Err(bad(format!("coupling row {r} coefficients {pv},{cv}")));
            }
            if !(self.n_free..self.n_free + self.n_priced).contains(&pcol) {
                return Err(bad(format!("coupling row {r} first entry not priced")));
            }
            if ccol < self.n_free + self.n_priced {
                return Err(bad(format!("coupling row {r} second entry not colour")));
            }
            seen[pcol - self.n_free] += 1;
        }
        if seen.iter().any(|&s| s != 1) {
            return Err(bad("a priced column is not coupled exactly once".into()));
        }
        // Exactly one budget row with coefficient 1 on every colour column.
        let r = self.n_rows() - 1;
        let entries: Vec<_> = self.constraint.row(r).collect();
        if entries.len() != self.n_colours
            || entries
                .iter()
                .enumerate()
                .any(|(i, &(c, v))| c != self.colour_col(i) || v != 1.0)
        {
            return Err(bad("budget row malformed".into()));
        }
        if self.rhs[r] != self.budget as f64 {
            return Err(bad("budget rhs mismatch".into()));
        }
        Ok(())
    }
}

/// Assembles the LP relaxation for `graph` with vocabulary budget `k`.
pub fn assemble_lp(graph: &TokenisationGraph, k: usize) -> Result<LpProblem> {
    let n_free = graph.num_free_edges();
    let n_priced = graph.num_priced_edges();
    let n_colours = graph.colours().len();
    let n_cols = n_free
        .checked_add(n_priced)
        .and_then(|v| v.checked_add(n_colours))
        .ok_or_else(|| Error::Overflow {
            what: "column count".to_string(),
        })?;
    let n_eq_rows = graph.num_vertices();
    let n_rows = n_eq_rows
        .checked_add(n_priced)
        .and_then(|v| v.checked_add(1))
        .ok_or_else(|| Error::Overflow {
            what: "row count".to_string(),
        })?;

    let mut objective = vec![0.0f64; n_cols];
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_rows];
    let mut rhs = vec![0.0f64; n_rows];

    for (t, block) in graph.blocks().iter().enumerate() {
        let n = block.len();
        let v0 = graph.vertex_offset(t);
        let f0 = graph.free_offset(t);
        let p0 = graph.priced_offset(t);
        let weight = block.weight as f64;
        rhs[v0] = -1.0;
        rhs[v0 + n] = 1.0;
        // Free byte-edges (i, i+1): leave vertex i, enter vertex i+1.
        for i in 0..n {
            objective[f0 + i] = weight;
            rows[v0 + i].push((f0 + i, -1.0));
            rows[v0 + i + 1].push((f0 + i, 1.0));
        }
        // Priced token-edges.
        for (e, edge) in block.priced.iter().enumerate() {
            let col = n_free + p0 + e;
            objective[col] = weight;
            rows[v0 + edge.start].push((col, -1.0));
            rows[v0 + edge.end].push((col, 1.0));
            // Coupling row p_e - c_colour <= 0.
            let row = n_eq_rows + p0 + e;
            rows[row].push((col, 1.0));
            rows[row].push((n_free + n_priced + edge.colour, -1.0));
        }
    }
    // Budget row.
    let budget_row = n_rows - 1;
    for c in 0..n_colours {
        rows[budget_row].push((n_free + n_priced + c, 1.0));
    }
    rhs[budget_row] = k as f64;

    for row in &mut rows {
        row.sort_by_key(|&(c, _)| c);
    }
    let constraint = SparseMatrix::from_rows(rows, n_cols);
    let constraint_t = constraint.transpose();
    Ok(LpProblem {
        budget: k,
        n_free,
        n_priced,
        n_colours,
        objective,
        constraint,
        constraint_t,
        rhs,
        n_eq_rows,
    })
}
