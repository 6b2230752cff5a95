//! Decreasing rearrangements and Lorentz `L^{p,q}` functionals.
//!
//! With samples sorted as `a_0 >= a_1 >= ...` and cell volume `w`, the
//! rearrangement is the step function `u*(t) = a_j` on `[j w, (j+1) w)` and
//!
//! `||u||_{p,q}^q = sum_j a_j^q (p/q) w^{q/p} ((j+1)^{q/p} - j^{q/p})`,
//!
//! `||u||_{p,inf} = max_j a_j ((j+1) w)^{1/p}`.

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::reduce;
use rayon::prelude::*;

#[derive(Clone, Debug, PartialEq)]
pub struct Rearrangement {
    /// `|u|` sorted non-increasing.
    pub levels: Vec<f64>,
    /// Measure carried by each level (the cell volume).
    pub cell: f64,
}

impl Rearrangement {
    pub fn total_measure(&self) -> f64 {
        self.cell * self.levels.len() as f64
    }

    /// `(int_0^inf u*(t)^p dt)^(1/p)`.
    pub fn lebesgue_norm(&self, p: f64) -> f64 {
        let top = self.levels.first().copied().unwrap_or(0.0);
        if p.is_infinite() || top == 0.0 {
            return top;
        }
        let s = reduce::sum_map(&self.levels, |a| (a / top).powf(p));
        top * (s * self.cell).powf(1.0 / p)
    }

    /// `u*(t)`.
    pub fn value_at(&self, t: f64) -> f64 {
        let j = (t / self.cell).floor();
        if j < 0.0 {
            return self.levels.first().copied().unwrap_or(0.0);
        }
        self.levels.get(j as usize).copied().unwrap_or(0.0)
    }
}

pub fn decreasing_rearrangement(u: &ScalarField) -> Rearrangement {
    let mut levels: Vec<f64> = u.data().par_iter().map(|x| x.abs()).collect();
    levels.par_sort_unstable_by(|a, b| b.total_cmp(a));
    Rearrangement { levels, cell: u.grid().cell_volume() }
}

/// `(j+1)^s - j^s`, accurate for large `j`.
fn step_increment(j: usize, s: f64) -> f64 {
    if j == 0 {
        1.0
    } else {
        let jf = j as f64;
        jf.powf(s) * (s * (1.0 / jf).ln_1p()).exp_m1()
    }
}

pub fn lorentz_from_rearrangement(r: &Rearrangement, p: f64, q: f64) -> Result<f64> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::InvalidArgument(format!("Lorentz exponent p = {p} must lie in (1, inf)")));
    }
    if !(q >= 1.0) {
        return Err(Error::InvalidArgument(format!("Lorentz exponent q = {q} must be at least 1")));
    }
    let top = r.levels.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return Ok(0.0);
    }
    let w = r.cell;
    if q.is_infinite() {
        let m = r
            .levels
            .par_iter()
            .enumerate()
            .map(|(j, &a)| a * ((j + 1) as f64 * w).powf(1.0 / p))
            .reduce(|| 0.0, f64::max);
        return Ok(m);
    }
    let s = q / p;
    let levels = &r.levels;
    let sum = reduce::sum_range(levels.len(), |j| {
        let a = levels[j] / top;
        if a == 0.0 {
            0.0
        } else {
            a.powf(q) * step_increment(j, s)
        }
    });
    Ok(top * ((p / q) * w.powf(s) * sum).powf(1.0 / q))
}

/// `||u||_{L^{p,q}}` for `p` in `(1, inf)`, `q` in `[1, inf]`.
pub fn lorentz_norm(u: &ScalarField, p: f64, q: f64) -> Result<f64> {
    lorentz_from_rearrangement(&decreasing_rearrangement(u), p, q)
}

/// Sharp nesting constant: `||u||_{p,r} <= (q/p)^{1/q - 1/r} ||u||_{p,q}` for `q <= r`.
pub fn nesting_constant(p: f64, q: f64, r: f64) -> f64 {
    let inv_r = if r.is_infinite() { 0.0 } else { 1.0 / r };
    (q / p).powf(1.0 / q - inv_r)
}
