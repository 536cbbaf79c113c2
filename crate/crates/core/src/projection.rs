//! Euclidean projections onto primal boxes and the dual sets `{v >= 0, |v|_1 <= B}`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box `[lower, upper]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxSet {
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

impl BoxSet {
    pub fn new(lower: DVector<f64>, upper: DVector<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::InvalidProblem(format!(
                "box bounds have lengths {} and {}",
                lower.len(),
                upper.len()
            )));
        }
        for (i, (lo, hi)) in lower.iter().zip(upper.iter()).enumerate() {
            if !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidProblem(format!("box coordinate {i} is unbounded")));
            }
            if lo > hi {
                return Err(Error::InvalidProblem(format!(
                    "box coordinate {i} has lower {lo} > upper {hi}"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, v: &DVector<f64>, tol: f64) -> bool {
        v.len() == self.dim()
            && v.iter()
                .zip(self.lower.iter().zip(self.upper.iter()))
                .all(|(x, (lo, hi))| *x >= lo - tol && *x <= hi + tol)
    }

    pub fn midpoint(&self) -> DVector<f64> {
        (&self.lower + &self.upper) * 0.5
    }

    pub fn diameter(&self) -> f64 {
        (&self.upper - &self.lower).norm()
    }

    /// Restriction to the given coordinates.
    pub fn restrict(&self, idx: &[usize]) -> BoxSet {
        BoxSet {
            lower: DVector::from_iterator(idx.len(), idx.iter().map(|&i| self.lower[i])),
            upper: DVector::from_iterator(idx.len(), idx.iter().map(|&i| self.upper[i])),
        }
    }
}

/// Clamp `v` into `set` componentwise.
pub fn project_box(set: &BoxSet, v: &DVector<f64>) -> DVector<f64> {
    debug_assert_eq!(set.dim(), v.len());
    DVector::from_iterator(
        v.len(),
        v.iter()
            .zip(set.lower.iter().zip(set.upper.iter()))
            .map(|(x, (lo, hi))| x.clamp(*lo, *hi)),
    )
}

/// The set `{v in R^dim : v >= 0, sum(v) <= radius}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonnegL1Ball {
    pub radius: f64,
    pub dim: usize,
}

impl NonnegL1Ball {
    pub fn new(radius: f64, dim: usize) -> Result<Self> {
        if !(radius >= 0.0) || !radius.is_finite() {
            return Err(Error::InvalidProblem(format!(
                "dual radius must be finite and nonnegative, got {radius}"
            )));
        }
        Ok(Self { radius, dim })
    }

    pub fn contains(&self, v: &DVector<f64>, tol: f64) -> bool {
        v.len() == self.dim
            && v.iter().all(|x| *x >= -tol)
            && v.iter().map(|x| x.max(0.0)).sum::<f64>() <= self.radius * (1.0 + tol) + tol
    }
}

/// Exact Euclidean projection onto `{v >= 0, |v|_1 <= B}` by sort and threshold.
pub fn project_nonneg_l1(set: &NonnegL1Ball, v: &DVector<f64>) -> DVector<f64> {
    debug_assert_eq!(set.dim, v.len());
    let clipped = v.map(|x| x.max(0.0));
    if clipped.sum() <= set.radius {
        return clipped;
    }
    if set.radius == 0.0 {
        return DVector::zeros(v.len());
    }
    let mut sorted: Vec<f64> = clipped.iter().copied().filter(|x| *x > 0.0).collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let candidate = (cumulative - set.radius) / (j + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        } else {
            break;
        }
    }
    clipped.map(|x| (x - theta).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    #[test]
    fn box_clamps_above_and_below() {
        let set = BoxSet::new(dv(&[0.0]), dv(&[10.0])).unwrap();
        assert_eq!(project_box(&set, &dv(&[12.0]))[0], 10.0);
        assert_eq!(project_box(&set, &dv(&[-3.0]))[0], 0.0);
        assert_eq!(project_box(&set, &dv(&[4.5]))[0], 4.5);
    }

    #[test]
    fn box_rejects_inverted_bounds() {
        assert!(BoxSet::new(dv(&[1.0]), dv(&[0.0])).is_err());
        assert!(BoxSet::new(dv(&[0.0]), dv(&[f64::INFINITY])).is_err());
    }

    #[test]
    fn l1_feasible_point_unchanged() {
        let set = NonnegL1Ball::new(1.0, 2).unwrap();
        assert_eq!(project_nonneg_l1(&set, &dv(&[0.1, 0.2])), dv(&[0.1, 0.2]));
    }

    #[test]
    fn l1_water_filling_example() {
        let set = NonnegL1Ball::new(1.0, 2).unwrap();
        let p = project_nonneg_l1(&set, &dv(&[0.6, 0.6]));
        assert!((p - dv(&[0.5, 0.5])).norm() < 1e-15);
    }

    #[test]
    fn l1_negative_orthant_goes_to_origin() {
        for b in [0.0, 1.0, 7.0] {
            let set = NonnegL1Ball::new(b, 2).unwrap();
            assert_eq!(project_nonneg_l1(&set, &dv(&[-1.0, -1.0])), dv(&[0.0, 0.0]));
        }
    }

    #[test]
    fn l1_zero_radius() {
        let set = NonnegL1Ball::new(0.0, 3).unwrap();
        assert_eq!(project_nonneg_l1(&set, &dv(&[1.0, -2.0, 3.0])), dv(&[0.0, 0.0, 0.0]));
    }

    #[test]
    fn l1_mixed_signs_threshold() {
        let set = NonnegL1Ball::new(1.0, 3).unwrap();
        let p = project_nonneg_l1(&set, &dv(&[2.0, 0.5, -1.0]));
        assert!((p - dv(&[1.0, 0.0, 0.0])).norm() < 1e-15);
    }
}
