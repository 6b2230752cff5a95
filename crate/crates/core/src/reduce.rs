//! Order-fixed compensated reductions.
//!
//! Data is cut into fixed-size chunks, each chunk is summed with Neumaier
//! compensation, and the partial sums are combined sequentially. The chunking
//! does not depend on the thread count, so results are bit-identical under
//! any rayon pool size.

use rayon::prelude::*;

const CHUNK: usize = 4096;

#[derive(Clone, Copy, Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    #[inline]
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    fn value(self) -> f64 {
        self.sum + self.comp
    }
}

pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = Neumaier::default();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

/// Sum of `f(x)` over `data`.
pub fn sum_map(data: &[f64], f: impl Fn(f64) -> f64 + Sync) -> f64 {
    let partials: Vec<f64> = data
        .par_chunks(CHUNK)
        .map(|c| compensated_sum(c.iter().map(|&x| f(x))))
        .collect();
    compensated_sum(partials)
}

/// Sum of `f(i, x)` over `data`, where `i` is the flat index.
pub fn sum_indexed(data: &[f64], f: impl Fn(usize, f64) -> f64 + Sync) -> f64 {
    let partials: Vec<f64> = data
        .par_chunks(CHUNK)
        .enumerate()
        .map(|(c, chunk)| {
            let base = c * CHUNK;
            compensated_sum(chunk.iter().enumerate().map(|(j, &x)| f(base + j, x)))
        })
        .collect();
    compensated_sum(partials)
}

/// Sum of `f(i)` for `i` in `0..len`.
pub fn sum_range(len: usize, f: impl Fn(usize) -> f64 + Sync) -> f64 {
    let chunks = len.div_ceil(CHUNK);
    let partials: Vec<f64> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let end = ((c + 1) * CHUNK).min(len);
            compensated_sum((c * CHUNK..end).map(&f))
        })
        .collect();
    compensated_sum(partials)
}

/// Maximum of `f(x)`; NaN-free input assumed, empty input gives 0.
pub fn max_map(data: &[f64], f: impl Fn(f64) -> f64 + Sync) -> f64 {
    data.par_chunks(CHUNK)
        .map(|c| c.iter().fold(0.0f64, |m, &x| m.max(f(x))))
        .reduce(|| 0.0, f64::max)
}

pub fn max_abs(data: &[f64]) -> f64 {
    max_map(data, f64::abs)
}

/// Least-squares line `y = a + b x`; returns `(a, b)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    assert_eq!(xs.len(), ys.len(), "fit needs matching samples");
    let n = xs.len() as f64;
    let mx = compensated_sum(xs.iter().copied()) / n;
    let my = compensated_sum(ys.iter().copied()) / n;
    let sxy = compensated_sum(xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)));
    let sxx = compensated_sum(xs.iter().map(|x| (x - mx) * (x - mx)));
    let b = sxy / sxx;
    (my - b * mx, b)
}
