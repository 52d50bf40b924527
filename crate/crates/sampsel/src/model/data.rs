//! Partially observed two-equation datasets.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A sample selection dataset: outcome covariates `x`, selection covariates
/// `w`, selection indicators `s`, and outcomes `y` observed exactly where
/// `s = 1`. Missing outcomes are represented as `None`, never as sentinel
/// numbers. Immutable after construction.
#[derive(Debug, Clone)]
pub struct Dataset {
    x: DMatrix<f64>,
    w: DMatrix<f64>,
    s: Vec<bool>,
    y: Vec<Option<f64>>,
    selected: Vec<usize>,
    missing: Vec<usize>,
}

impl Dataset {
    pub fn new(
        x: DMatrix<f64>,
        w: DMatrix<f64>,
        s: Vec<bool>,
        y: Vec<Option<f64>>,
    ) -> Result<Self> {
        let n = s.len();
        if n == 0 {
            return Err(Error::InvalidData("dataset must have at least one row".into()));
        }
        if x.nrows() != n || w.nrows() != n || y.len() != n {
            return Err(Error::InvalidData(format!(
                "row mismatch: x {}x{}, w {}x{}, s {}, y {}",
                x.nrows(),
                x.ncols(),
                w.nrows(),
                w.ncols(),
                n,
                y.len()
            )));
        }
        for (i, (si, yi)) in s.iter().zip(y.iter()).enumerate() {
            match (si, yi) {
                (true, None) => {
                    return Err(Error::InvalidData(format!(
                        "row {i}: selected but outcome missing"
                    )))
                }
                (false, Some(_)) => {
                    return Err(Error::InvalidData(format!(
                        "row {i}: not selected but outcome present"
                    )))
                }
                (_, Some(v)) if !v.is_finite() => {
                    return Err(Error::InvalidData(format!("row {i}: non-finite outcome")))
                }
                _ => {}
            }
        }
        if x.iter().any(|v| !v.is_finite()) || w.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite covariate entry".into()));
        }
        let selected: Vec<usize> = (0..n).filter(|&i| s[i]).collect();
        let missing: Vec<usize> = (0..n).filter(|&i| !s[i]).collect();
        Ok(Dataset {
            x,
            w,
            s,
            y,
            selected,
            missing,
        })
    }

    pub fn n(&self) -> usize {
        self.s.len()
    }

    /// Number of outcome covariates.
    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Number of selection covariates.
    pub fn q(&self) -> usize {
        self.w.ncols()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn s(&self) -> &[bool] {
        &self.s
    }

    pub fn y(&self) -> &[Option<f64>] {
        &self.y
    }

    /// Indices with s = 1, in row order.
    pub fn selected_rows(&self) -> &[usize] {
        &self.selected
    }

    /// Indices with s = 0, in row order.
    pub fn missing_rows(&self) -> &[usize] {
        &self.missing
    }

    pub fn n_selected(&self) -> usize {
        self.selected.len()
    }

    /// Observed outcomes in selected-row order.
    pub fn y_selected(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.selected.len(),
            self.selected.iter().map(|&i| self.y[i].unwrap()),
        )
    }

    /// Fitters require both selected and unselected rows; the Gibbs sampler
    /// does not.
    pub(crate) fn require_both_outcomes(&self) -> Result<()> {
        if self.selected.is_empty() || self.missing.is_empty() {
            return Err(Error::InvalidData(
                "model fitting requires at least one selected and one non-selected row".into(),
            ));
        }
        Ok(())
    }

    /// A new dataset keeping only the listed covariate columns (used by
    /// stepwise search over submodels).
    pub fn select_columns(&self, x_cols: &[usize], w_cols: &[usize]) -> Result<Dataset> {
        let n = self.n();
        let xsub = DMatrix::from_fn(n, x_cols.len(), |i, j| self.x[(i, x_cols[j])]);
        let wsub = DMatrix::from_fn(n, w_cols.len(), |i, j| self.w[(i, w_cols[j])]);
        Dataset::new(xsub, wsub, self.s.clone(), self.y.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (DMatrix<f64>, DMatrix<f64>, Vec<bool>, Vec<Option<f64>>) {
        let x = DMatrix::from_row_slice(3, 1, &[0.5, -0.2, 1.0]);
        let w = x.clone();
        let s = vec![true, false, true];
        let y = vec![Some(1.0), None, Some(-0.5)];
        (x, w, s, y)
    }

    #[test]
    fn valid_dataset_accepted() {
        let (x, w, s, y) = toy();
        let d = Dataset::new(x, w, s, y).unwrap();
        assert_eq!(d.n(), 3);
        assert_eq!(d.n_selected(), 2);
        assert_eq!(d.selected_rows(), &[0, 2]);
        assert_eq!(d.missing_rows(), &[1]);
    }

    #[test]
    fn observability_rule_enforced() {
        let (x, w, mut s, y) = toy();
        s[1] = true; // selected but y missing
        assert!(Dataset::new(x.clone(), w.clone(), s, y.clone()).is_err());
        let (_, _, s2, mut y2) = toy();
        y2[1] = Some(0.0); // present but not selected
        assert!(Dataset::new(x, w, s2, y2).is_err());
    }

    #[test]
    fn non_finite_rejected() {
        let (mut x, w, s, y) = toy();
        x[(0, 0)] = f64::NAN;
        assert!(Dataset::new(x, w, s, y).is_err());
    }

    #[test]
    fn empty_rejected() {
        assert!(Dataset::new(
            DMatrix::zeros(0, 1),
            DMatrix::zeros(0, 1),
            vec![],
            vec![]
        )
        .is_err());
    }
}
