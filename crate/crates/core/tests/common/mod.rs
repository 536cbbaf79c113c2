#![allow(dead_code)]

use nalgebra::DVector;

/// Coarse-to-fine grid search for the closest point of `{y >= 0, sum y <= radius}` to `v`.
pub fn brute_force_l1(v: &DVector<f64>, radius: f64) -> DVector<f64> {
    let d = v.len();
    let mut center = DVector::from_element(d, radius / 2.0);
    let mut half = radius / 2.0;
    let steps = 20usize;
    for _ in 0..6 {
        let h = 2.0 * half / steps as f64;
        let mut best = (f64::INFINITY, center.clone());
        let mut idx = vec![0usize; d];
        loop {
            let y = DVector::from_fn(d, |i, _| (center[i] - half + idx[i] as f64 * h).max(0.0));
            if y.sum() <= radius + 1e-12 {
                let dist = (&y - v).norm_squared();
                if dist < best.0 {
                    best = (dist, y);
                }
            }
            let mut k = 0;
            while k < d {
                idx[k] += 1;
                if idx[k] <= steps {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == d {
                break;
            }
        }
        center = best.1;
        half = 2.0 * h;
    }
    center
}

