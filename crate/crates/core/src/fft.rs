//! Three-dimensional real-to-complex transforms on the half-complex layout.
//!
//! Forward: real samples `u[i1][i2][i3]` become coefficients `c[i1][i2][i3h]`
//! with `i3h` in `0..=n/2`, normalized so that
//! `u(x) = sum_k c_k exp(i k.x)` on the centered chart. The `(-1)^(m1+m2+m3)`
//! factor moves the phase origin from the box corner to `x = 0`.

use num_complex::Complex64;
use rayon::prelude::*;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::{Fft, FftPlanner};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

pub(crate) struct Plans {
    n: usize,
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

fn plans(n: usize) -> Arc<Plans> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Plans>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().expect("plan cache poisoned");
    map.entry(n)
        .or_insert_with(|| {
            let mut real = RealFftPlanner::<f64>::new();
            let mut cplx = FftPlanner::<f64>::new();
            Arc::new(Plans {
                n,
                r2c: real.plan_fft_forward(n),
                c2r: real.plan_fft_inverse(n),
                fwd: cplx.plan_fft_forward(n),
                inv: cplx.plan_fft_inverse(n),
            })
        })
        .clone()
}

#[inline]
fn parity(i: usize) -> f64 {
    if i & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Multiplies coefficient `(i1, i2, i3)` by `scale * (-1)^(i1+i2+i3)`, which equals
/// `(-1)^(m1+m2+m3)` for even `n`.
fn apply_phase(n: usize, data: &mut [Complex64], scale: f64) {
    let nh = n / 2 + 1;
    data.par_chunks_mut(nh).enumerate().for_each(|(line, c)| {
        let s0 = parity(line / n + line % n) * scale;
        for (i3, v) in c.iter_mut().enumerate() {
            *v *= s0 * parity(i3);
        }
    });
}

/// Complex transforms along the first two axes, in place.
fn transform_axes12(p: &Plans, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
    let n = p.n;
    let nh = n / 2 + 1;
    let slab = n * nh;

    data.par_chunks_mut(slab).for_each_init(
        || (vec![Complex64::default(); slab], vec![Complex64::default(); fft.get_inplace_scratch_len()]),
        |(buf, scratch), s| {
            for i2 in 0..n {
                for i3 in 0..nh {
                    buf[i3 * n + i2] = s[i2 * nh + i3];
                }
            }
            fft.process_with_scratch(buf, scratch);
            for i2 in 0..n {
                for i3 in 0..nh {
                    s[i2 * nh + i3] = buf[i3 * n + i2];
                }
            }
        },
    );

    let mut lines = vec![Complex64::default(); data.len()];
    {
        let src: &[Complex64] = data;
        lines.par_chunks_mut(n).enumerate().for_each_init(
            || vec![Complex64::default(); fft.get_inplace_scratch_len()],
            |scratch, (line, out)| {
                // line = i2 * nh + i3
                for (i1, o) in out.iter_mut().enumerate() {
                    *o = src[i1 * slab + line];
                }
                fft.process_with_scratch(out, scratch);
            },
        );
    }
    data.par_chunks_mut(slab).enumerate().for_each(|(i1, s)| {
        for (line, v) in s.iter_mut().enumerate() {
            *v = lines[line * n + i1];
        }
    });
}

pub(crate) fn forward(n: usize, input: &[f64]) -> Vec<Complex64> {
    let p = plans(n);
    let nh = n / 2 + 1;
    let scale = 1.0 / (n * n * n) as f64;
    let mut out = vec![Complex64::default(); n * n * nh];
    out.par_chunks_mut(nh).zip(input.par_chunks(n)).enumerate().for_each_init(
        || (p.r2c.make_input_vec(), p.r2c.make_scratch_vec()),
        |(buf, scratch), (_, (o, u))| {
            buf.copy_from_slice(u);
            p.r2c
                .process_with_scratch(buf, o, scratch)
                .expect("real-to-complex length mismatch");
        },
    );
    transform_axes12(&p, &mut out, &p.fwd);
    apply_phase(n, &mut out, scale);
    out
}

pub(crate) fn inverse(n: usize, coeffs: &[Complex64]) -> Vec<f64> {
    let p = plans(n);
    let nh = n / 2 + 1;
    let mut work = coeffs.to_vec();
    apply_phase(n, &mut work, 1.0);
    transform_axes12(&p, &mut work, &p.inv);
    let mut out = vec![0.0; n * n * n];
    out.par_chunks_mut(n).zip(work.par_chunks_mut(nh)).enumerate().for_each_init(
        || (p.c2r.make_scratch_vec(), p.c2r.make_output_vec()),
        |(scratch, buf), (_, (o, c))| {
            c[0].im = 0.0;
            c[nh - 1].im = 0.0;
            p.c2r
                .process_with_scratch(c, buf, scratch)
                .expect("complex-to-real length mismatch");
            o.copy_from_slice(buf);
        },
    );
    out
}
