//! Treatment-coded design matrices over categorical factors.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Categorical factor structure for the identity GLM: named factors with
/// level counts, treatment coding with an explicit intercept, optional
/// pairwise interactions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorSpec {
    factors: Vec<(String, usize)>,
    include_interactions: bool,
}

impl FactorSpec {
    pub fn new(factors: Vec<(String, usize)>, include_interactions: bool) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidConfig("no factors declared".into()));
        }
        for (name, levels) in &factors {
            if *levels < 2 {
                return Err(Error::InvalidConfig(format!(
                    "factor {name} has {levels} level(s); need at least 2"
                )));
            }
        }
        Ok(FactorSpec {
            factors,
            include_interactions,
        })
    }

    pub fn factors(&self) -> &[(String, usize)] {
        &self.factors
    }

    pub fn include_interactions(&self) -> bool {
        self.include_interactions
    }

    /// Intercept + per-factor dummies + optional pairwise interaction columns.
    pub fn n_columns(&self) -> usize {
        let main: usize = self.factors.iter().map(|(_, l)| l - 1).sum();
        let inter: usize = if self.include_interactions {
            let mut acc = 0;
            for i in 0..self.factors.len() {
                for j in (i + 1)..self.factors.len() {
                    acc += (self.factors[i].1 - 1) * (self.factors[j].1 - 1);
                }
            }
            acc
        } else {
            0
        };
        1 + main + inter
    }

    /// All factor-level combinations in mixed-radix order, first factor most
    /// significant. The canonical cell enumeration for balanced databases.
    pub fn all_cells(&self) -> Vec<Vec<usize>> {
        let mut cells = vec![Vec::new()];
        for (_, levels) in &self.factors {
            let mut next = Vec::with_capacity(cells.len() * levels);
            for cell in &cells {
                for l in 0..*levels {
                    let mut c = cell.clone();
                    c.push(l);
                    next.push(c);
                }
            }
            cells = next;
        }
        cells
    }

    pub fn validate_levels(&self, levels: &[usize]) -> Result<()> {
        if levels.len() != self.factors.len() {
            return Err(Error::InvalidConfig(format!(
                "{} levels given for {} factors",
                levels.len(),
                self.factors.len()
            )));
        }
        for (k, &level) in levels.iter().enumerate() {
            let (name, n_levels) = &self.factors[k];
            if level >= *n_levels {
                return Err(Error::InvalidLevel {
                    factor: name.clone(),
                    level,
                    n_levels: *n_levels,
                });
            }
        }
        Ok(())
    }

    /// One treatment-coded design row. Column order: intercept, then each
    /// factor's dummies in declaration order (levels 1..k, level 0 as the
    /// reference), then pairwise interaction blocks for factor pairs (i, j),
    /// i < j, in lexicographic pair order.
    pub fn design_row(&self, levels: &[usize]) -> Result<Vec<f64>> {
        self.validate_levels(levels)?;
        let mut row = Vec::with_capacity(self.n_columns());
        row.push(1.0);
        for (k, &level) in levels.iter().enumerate() {
            let n_levels = self.factors[k].1;
            for l in 1..n_levels {
                row.push(if level == l { 1.0 } else { 0.0 });
            }
        }
        if self.include_interactions {
            for i in 0..self.factors.len() {
                for j in (i + 1)..self.factors.len() {
                    for li in 1..self.factors[i].1 {
                        for lj in 1..self.factors[j].1 {
                            let on = levels[i] == li && levels[j] == lj;
                            row.push(if on { 1.0 } else { 0.0 });
                        }
                    }
                }
            }
        }
        Ok(row)
    }
}

/// Stack design rows for a table of per-row factor levels.
pub fn build_design_matrix(
    factor_levels_per_row: &[Vec<usize>],
    spec: &FactorSpec,
) -> Result<Array2<f64>> {
    let p = spec.n_columns();
    let mut design = Array2::<f64>::zeros((factor_levels_per_row.len(), p));
    for (i, levels) in factor_levels_per_row.iter().enumerate() {
        let row = spec.design_row(levels)?;
        for (j, v) in row.into_iter().enumerate() {
            design[[i, j]] = v;
        }
    }
    Ok(design)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::singular_values_and_right_vectors;

    fn sex_age(interactions: bool) -> FactorSpec {
        FactorSpec::new(
            vec![("sex".into(), 2), ("age".into(), 3)],
            interactions,
        )
        .unwrap()
    }

    #[test]
    fn two_by_three_with_interaction_has_six_columns() {
        assert_eq!(sex_age(true).n_columns(), 6);
    }

    #[test]
    fn single_factor_two_levels_gives_two_columns() {
        let spec = FactorSpec::new(vec![("sex".into(), 2)], false).unwrap();
        assert_eq!(spec.n_columns(), 2);
    }

    #[test]
    fn balanced_two_by_three_design_has_full_rank() {
        let spec = sex_age(true);
        let mut rows = Vec::new();
        for cell in spec.all_cells() {
            rows.push(cell.clone());
            rows.push(cell);
        }
        assert_eq!(rows.len(), 12);
        let design = build_design_matrix(&rows, &spec).unwrap();
        let svd = singular_values_and_right_vectors(&design);
        assert_eq!(svd.singular_values.len(), 6);
        assert!(svd.singular_values[5] > 1e-8);
    }

    #[test]
    fn unknown_level_rejected_with_names() {
        let spec = sex_age(false);
        match build_design_matrix(&[vec![0, 3]], &spec) {
            Err(Error::InvalidLevel {
                factor,
                level,
                n_levels,
            }) => {
                assert_eq!(factor, "age");
                assert_eq!(level, 3);
                assert_eq!(n_levels, 3);
            }
            other => panic!("expected invalid level, got {other:?}"),
        }
    }

    #[test]
    fn interaction_column_active_only_in_its_cell() {
        let spec = sex_age(true);
        // columns: intercept, sex1, age1, age2, sex1*age1, sex1*age2
        let row = spec.design_row(&[1, 2]).unwrap();
        assert_eq!(row, vec![1.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
        let row = spec.design_row(&[0, 0]).unwrap();
        assert_eq!(row, vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn degenerate_factor_counts_rejected() {
        assert!(FactorSpec::new(vec![("x".into(), 1)], false).is_err());
        assert!(FactorSpec::new(vec![], false).is_err());
    }
}
