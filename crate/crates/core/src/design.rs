//! Column-oriented design matrices consumed by the Cox objective and solver.

/// Borrowed view of one design column.
#[derive(Debug, Clone, Copy)]
pub enum ColumnRef<'a> {
    /// 0/1 column; the slice holds the ascending row indices equal to one.
    Indicator(&'a [u32]),
    /// Real column stored sparsely: ascending row indices and their values.
    Sparse { rows: &'a [u32], values: &'a [f64] },
}

impl<'a> ColumnRef<'a> {
    pub fn rows(&self) -> &'a [u32] {
        match *self {
            ColumnRef::Indicator(rows) => rows,
            ColumnRef::Sparse { rows, .. } => rows,
        }
    }

    pub fn nnz(&self) -> usize {
        self.rows().len()
    }

    /// Value at position `k` of the stored entries.
    #[inline]
    pub fn value_at(&self, k: usize) -> f64 {
        match *self {
            ColumnRef::Indicator(_) => 1.0,
            ColumnRef::Sparse { values, .. } => values[k],
        }
    }

    pub fn is_indicator(&self) -> bool {
        matches!(self, ColumnRef::Indicator(_))
    }

    pub fn max_abs(&self) -> f64 {
        match *self {
            ColumnRef::Indicator(rows) => {
                if rows.is_empty() {
                    0.0
                } else {
                    1.0
                }
            }
            ColumnRef::Sparse { values, .. } => values.iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }

    /// Dense copy of the column.
    pub fn to_dense(&self, n_rows: usize) -> Vec<f64> {
        let mut out = vec![0.0; n_rows];
        for (k, &r) in self.rows().iter().enumerate() {
            out[r as usize] = self.value_at(k);
        }
        out
    }
}

/// A column-accessible design matrix.
pub trait DesignMatrix: Sync {
    fn n_rows(&self) -> usize;
    fn n_cols(&self) -> usize;
    fn column(&self, k: usize) -> ColumnRef<'_>;

    /// `X beta` over all rows.
    fn linear_predictor(&self, beta: &[f64]) -> Vec<f64> {
        let mut eta = vec![0.0; self.n_rows()];
        for (k, &b) in beta.iter().enumerate() {
            if b == 0.0 {
                continue;
            }
            let col = self.column(k);
            for (e, &r) in col.rows().iter().enumerate() {
                eta[r as usize] += b * col.value_at(e);
            }
        }
        eta
    }
}

/// Real-valued design stored column-sparse; zeros are dropped on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct RealDesign {
    n_rows: usize,
    rows: Vec<Vec<u32>>,
    values: Vec<Vec<f64>>,
}

impl RealDesign {
    /// Builds from dense columns, each of length `n_rows`.
    pub fn from_columns(n_rows: usize, columns: &[Vec<f64>]) -> Self {
        let mut rows = Vec::with_capacity(columns.len());
        let mut values = Vec::with_capacity(columns.len());
        for col in columns {
            assert_eq!(col.len(), n_rows, "column length must equal n_rows");
            let (r, v): (Vec<u32>, Vec<f64>) = col
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(i, v)| (i as u32, *v))
                .unzip();
            rows.push(r);
            values.push(v);
        }
        Self { n_rows, rows, values }
    }

    /// Builds from a row-major dense matrix.
    pub fn from_rows(matrix: &ndarray::Array2<f64>) -> Self {
        let cols: Vec<Vec<f64>> = matrix.columns().into_iter().map(|c| c.to_vec()).collect();
        Self::from_columns(matrix.nrows(), &cols)
    }

    pub fn select_columns(&self, cols: &[usize]) -> Self {
        Self {
            n_rows: self.n_rows,
            rows: cols.iter().map(|&k| self.rows[k].clone()).collect(),
            values: cols.iter().map(|&k| self.values[k].clone()).collect(),
        }
    }
}

impl DesignMatrix for RealDesign {
    fn n_rows(&self) -> usize {
        self.n_rows
    }

    fn n_cols(&self) -> usize {
        self.rows.len()
    }

    fn column(&self, k: usize) -> ColumnRef<'_> {
        ColumnRef::Sparse { rows: &self.rows[k], values: &self.values[k] }
    }
}

/// Empty design with `n_rows` rows and no columns (the null Cox model).
#[derive(Debug, Clone, Copy)]
pub struct EmptyDesign(pub usize);

impl DesignMatrix for EmptyDesign {
    fn n_rows(&self) -> usize {
        self.0
    }

    fn n_cols(&self) -> usize {
        0
    }

    fn column(&self, k: usize) -> ColumnRef<'_> {
        panic!("empty design has no column {k}")
    }
}
