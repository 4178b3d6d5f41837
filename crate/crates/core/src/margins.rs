//! Data matrices and the rank-based transform to standard α-Pareto margins.

use crate::error::{Error, Result};

/// Default marginal tail index after transformation.
pub const DEFAULT_ALPHA: f64 = 2.0;

/// An `n × d` matrix of finite observations, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    n: usize,
    d: usize,
    values: Vec<f64>,
    column_names: Option<Vec<String>>,
}

impl Sample {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(rows.len() * d);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::param(format!(
                    "row {} has {} entries, expected {d}",
                    i + 1,
                    row.len()
                )));
            }
            values.extend_from_slice(row);
        }
        Self::from_row_major(rows.len(), d, values)
    }

    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let d = columns.len();
        let n = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != n) {
            return Err(Error::param("columns have unequal lengths"));
        }
        let mut values = vec![0.0; n * d];
        for (j, col) in columns.iter().enumerate() {
            for (i, &x) in col.iter().enumerate() {
                values[i * d + j] = x;
            }
        }
        Self::from_row_major(n, d, values)
    }

    pub fn from_row_major(n: usize, d: usize, values: Vec<f64>) -> Result<Self> {
        if d == 0 {
            return Err(Error::param("sample needs at least one column"));
        }
        if values.len() != n * d {
            return Err(Error::param(format!(
                "{} values do not fill a {n} x {d} matrix",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|x| !x.is_finite()) {
            return Err(Error::Csv {
                row: pos / d + 1,
                column: pos % d + 1,
                message: "non-finite value".into(),
            });
        }
        Ok(Self {
            n,
            d,
            values,
            column_names: None,
        })
    }

    pub fn with_column_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.d {
            return Err(Error::param(format!(
                "{} column names for {} columns",
                names.len(),
                self.d
            )));
        }
        self.column_names = Some(names);
        Ok(self)
    }

    pub fn nrows(&self) -> usize {
        self.n
    }

    pub fn ncols(&self) -> usize {
        self.d
    }

    pub fn column_names(&self) -> Option<&[String]> {
        self.column_names.as_deref()
    }

    /// Column names, falling back to `col1..cold`.
    pub fn names_or_default(&self) -> Vec<String> {
        match &self.column_names {
            Some(names) => names.clone(),
            None => (1..=self.d).map(|j| format!("col{j}")).collect(),
        }
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.d + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.d..(row + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.d)
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        self.values.iter().skip(col).step_by(self.d).copied().collect()
    }

    pub fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.d).map(|j| self.column(j)).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// The two named columns (0-based) as a new `n × 2` sample.
    pub fn select_pair(&self, i: usize, j: usize) -> Result<Sample> {
        if i >= self.d || j >= self.d {
            return Err(Error::param(format!(
                "column index out of range for {} columns",
                self.d
            )));
        }
        let mut out = Sample::from_columns(&[self.column(i), self.column(j)])?;
        if let Some(names) = &self.column_names {
            out.column_names = Some(vec![names[i].clone(), names[j].clone()]);
        }
        Ok(out)
    }
}

/// Marginal tail index α > 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailIndex(f64);

impl TailIndex {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha.is_finite() && alpha > 0.0 {
            Ok(Self(alpha))
        } else {
            Err(Error::param(format!("tail index must be positive, got {alpha}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl Default for TailIndex {
    fn default() -> Self {
        Self(DEFAULT_ALPHA)
    }
}

#[derive(Debug, Clone)]
pub struct Transformed {
    pub sample: Sample,
    /// 0-based indices of columns whose values were all tied.
    pub degenerate_columns: Vec<usize>,
}

/// Average ranks (1-based) of `values`, ties sharing the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && values[idx[j]] == values[idx[i]] {
            j += 1;
        }
        // positions i..j (0-based) share rank mean of (i+1)..=j
        let r = (i + 1 + j) as f64 / 2.0;
        for &k in &idx[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    ranks
}

/// Maps one column to standard α-Pareto scale: `x ↦ (1 − F̂(x))^{−1/α}` with
/// `F̂ = rank / (n + 1)`.
pub fn pareto_transform_column(values: &[f64], alpha: TailIndex) -> Vec<f64> {
    let n1 = (values.len() + 1) as f64;
    let inv = 1.0 / alpha.value();
    average_ranks(values)
        .into_iter()
        .map(|r| (n1 / (n1 - r)).powf(inv))
        .collect()
}

pub fn pareto_transform(sample: &Sample, alpha: TailIndex) -> Result<Transformed> {
    if sample.nrows() < 2 {
        return Err(Error::InsufficientData(format!(
            "marginal transform needs n >= 2 rows, got {}",
            sample.nrows()
        )));
    }
    let mut degenerate_columns = Vec::new();
    let columns: Vec<Vec<f64>> = (0..sample.ncols())
        .map(|j| {
            let col = sample.column(j);
            if col.iter().all(|&x| x == col[0]) {
                degenerate_columns.push(j);
            }
            pareto_transform_column(&col, alpha)
        })
        .collect();
    let mut out = Sample::from_columns(&columns)?;
    out.column_names = sample.column_names.clone();
    Ok(Transformed {
        sample: out,
        degenerate_columns,
    })
}

/// Sign pattern of a two-column orientation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Orientation {
    pub flip_first: bool,
    pub flip_second: bool,
}

impl Orientation {
    pub const ALL: [Orientation; 4] = [
        Orientation { flip_first: false, flip_second: false },
        Orientation { flip_first: true, flip_second: false },
        Orientation { flip_first: false, flip_second: true },
        Orientation { flip_first: true, flip_second: true },
    ];

    pub fn label(self) -> &'static str {
        match (self.flip_first, self.flip_second) {
            (false, false) => "(x1,x2)",
            (true, false) => "(-x1,x2)",
            (false, true) => "(x1,-x2)",
            (true, true) => "(-x1,-x2)",
        }
    }
}

/// The four sign-flip combinations `(x1,x2), (−x1,x2), (x1,−x2), (−x1,−x2)`,
/// in that order.
pub fn orientations(pair: &Sample) -> Result<[(Orientation, Sample); 4]> {
    if pair.ncols() != 2 {
        return Err(Error::param(format!(
            "orientations need exactly two columns, got {}",
            pair.ncols()
        )));
    }
    Ok(Orientation::ALL.map(|o| {
        let values = pair
            .values
            .chunks_exact(2)
            .flat_map(|r| {
                [
                    if o.flip_first { -r[0] } else { r[0] },
                    if o.flip_second { -r[1] } else { r[1] },
                ]
            })
            .collect();
        let s = Sample {
            n: pair.n,
            d: 2,
            values,
            column_names: pair.column_names.clone(),
        };
        (o, s)
    }))
}
