//! Time derivatives of sampled series on a strictly increasing, possibly
//! nonuniform time grid: three-point centred formula inside, second-order
//! one-sided formulas at the two ends.

use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};

/// Stencil `[(index, weight); 3]` approximating `y'(t_i)`.
pub fn stencil(t: &[f64], i: usize) -> [(usize, f64); 3] {
    let n = t.len();
    debug_assert!(n >= 3 && i < n);
    if i == 0 {
        let (h1, h2) = (t[1] - t[0], t[2] - t[1]);
        [
            (0, -(2.0 * h1 + h2) / (h1 * (h1 + h2))),
            (1, (h1 + h2) / (h1 * h2)),
            (2, -h1 / (h2 * (h1 + h2))),
        ]
    } else if i == n - 1 {
        let (h1, h2) = (t[n - 2] - t[n - 3], t[n - 1] - t[n - 2]);
        [
            (n - 3, h2 / (h1 * (h1 + h2))),
            (n - 2, -(h1 + h2) / (h1 * h2)),
            (n - 1, (2.0 * h2 + h1) / (h2 * (h1 + h2))),
        ]
    } else {
        let (h1, h2) = (t[i] - t[i - 1], t[i + 1] - t[i]);
        [
            (i - 1, -h2 / (h1 * (h1 + h2))),
            (i, (h2 - h1) / (h1 * h2)),
            (i + 1, h1 / (h2 * (h1 + h2))),
        ]
    }
}

pub fn check_times(t: &[f64]) -> Result<()> {
    if t.len() < 3 {
        return Err(Error::TooFewSamples { needed: 3, got: t.len() });
    }
    if t.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("time grid must be strictly increasing"));
    }
    Ok(())
}

/// `dy/dt` at every sample time.
pub fn time_derivative(t: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    check_times(t)?;
    if y.len() != t.len() {
        return Err(Error::ShapeMismatch("series and time grid differ in length"));
    }
    Ok((0..t.len())
        .map(|i| stencil(t, i).iter().map(|&(j, w)| w * y[j]).sum())
        .collect())
}

/// Pointwise `∂f/∂t` of a field at snapshot `i`, given every snapshot's values.
pub fn field_time_derivative(t: &[f64], fields: &[&[f64]], i: usize) -> Result<Vec<f64>> {
    check_times(t)?;
    if fields.len() != t.len() || i >= t.len() {
        return Err(Error::ShapeMismatch("one field per sample time"));
    }
    let np = fields[0].len();
    let st = stencil(t, i);
    Ok((0..np).map(|p| st.iter().map(|&(j, w)| w * fields[j][p]).sum()).collect())
}
