//! Littlewood-Paley blocks, Besov norms and Bony's paraproduct split.
//!
//! The radial cutoff is `theta(t) = 1` for `t <= 3/4`, `0` for `t >= 4/3`, and
//! `g(4/3 - t) / (g(4/3 - t) + g(t - 3/4))` in between with `g(s) = exp(-1/s)`.
//! Then `chi(xi) = theta(|xi|)` and `phi(xi) = theta(|xi|/2) - theta(|xi|)`, so
//! the sums telescope: `chi + sum_{q < Q} phi(2^-q xi) = theta(2^-Q |xi|)`.
//! On a grid the top block `q_max` takes everything above `S_{q_max}`.

use crate::error::{Error, Result};
use crate::field::{ScalarField, SpectralField};
use crate::grid::Grid;
use crate::spectral;
use rayon::prelude::*;

const T_LO: f64 = 0.75;
const T_HI: f64 = 4.0 / 3.0;

fn bump_edge(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else {
        (-1.0 / s).exp()
    }
}

pub fn theta(t: f64) -> f64 {
    if t <= T_LO {
        1.0
    } else if t >= T_HI {
        0.0
    } else {
        let a = bump_edge(T_HI - t);
        let b = bump_edge(t - T_LO);
        a / (a + b)
    }
}

/// `d theta / dt`.
pub fn theta_prime(t: f64) -> f64 {
    if t <= T_LO || t >= T_HI {
        return 0.0;
    }
    let (s, u) = (T_HI - t, t - T_LO);
    let (a, b) = (bump_edge(s), bump_edge(u));
    // d/dt g(s) = -g(s)/s^2, d/dt g(u) = g(u)/u^2
    let (da, db) = (-a / (s * s), b / (u * u));
    (da * b - a * db) / ((a + b) * (a + b))
}

/// `chi` evaluated at modulus `r = |xi|`.
pub fn chi(r: f64) -> f64 {
    theta(r)
}

/// `phi` evaluated at modulus `r = |xi|`.
pub fn phi(r: f64) -> f64 {
    theta(0.5 * r) - theta(r)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DyadicPartition {
    grid: Grid,
    q_max: i32,
}

impl DyadicPartition {
    /// `q_max = floor(log2(k_nyquist)) - 1`; at least three blocks `-1, 0, 1` are required.
    pub fn new(grid: Grid) -> Result<Self> {
        let q_max = grid.nyquist().log2().floor() as i32 - 1;
        if q_max < 1 {
            return Err(Error::InvalidGrid(format!(
                "n = {}, L = {} resolves only {} dyadic blocks, need at least 3",
                grid.n,
                grid.half_width,
                (q_max + 2).max(0)
            )));
        }
        Ok(Self { grid, q_max })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn q_max(&self) -> i32 {
        self.q_max
    }

    /// Block indices `-1..=q_max`.
    pub fn blocks(&self) -> impl Iterator<Item = i32> {
        -1..=self.q_max
    }

    fn check_block(&self, q: i32) -> Result<()> {
        if q < -1 || q > self.q_max {
            return Err(Error::InvalidArgument(format!("block {q} outside [-1, {}]", self.q_max)));
        }
        Ok(())
    }

    /// Grid symbol of `Delta_q` at modulus `r`.
    pub fn block_symbol(&self, q: i32, r: f64) -> f64 {
        if q == -1 {
            chi(r)
        } else if q < self.q_max {
            phi(r * 0.5f64.powi(q))
        } else if q == self.q_max {
            1.0 - theta(r * 0.5f64.powi(q))
        } else {
            0.0
        }
    }

    /// Radial derivative `d/dr` of [`Self::block_symbol`].
    pub fn block_symbol_prime(&self, q: i32, r: f64) -> f64 {
        let c = 0.5f64.powi(q);
        if q == -1 {
            theta_prime(r)
        } else if q < self.q_max {
            0.5 * c * theta_prime(0.5 * c * r) - c * theta_prime(c * r)
        } else if q == self.q_max {
            -c * theta_prime(c * r)
        } else {
            0.0
        }
    }

    /// Grid symbol of `S_q = sum_{j <= q-1} Delta_j`.
    pub fn low_symbol(&self, q: i32, r: f64) -> f64 {
        if q <= -1 {
            0.0
        } else if q <= self.q_max {
            theta(r * 0.5f64.powi(q))
        } else {
            1.0
        }
    }

    pub fn delta_q(&self, u: &SpectralField, q: i32) -> Result<SpectralField> {
        self.check_block(q)?;
        let mut out = u.clone();
        out.scale_modes(|m| self.block_symbol(q, m.k2.sqrt()));
        Ok(out)
    }

    pub fn s_q(&self, u: &SpectralField, q: i32) -> Result<SpectralField> {
        self.check_block(q)?;
        let mut out = u.clone();
        out.scale_modes(|m| self.low_symbol(q, m.k2.sqrt()));
        Ok(out)
    }

    pub fn delta_q_field(&self, u: &ScalarField, q: i32) -> Result<ScalarField> {
        Ok(self.delta_q(&u.to_spectral()?, q)?.to_physical())
    }

    pub fn s_q_field(&self, u: &ScalarField, q: i32) -> Result<ScalarField> {
        Ok(self.s_q(&u.to_spectral()?, q)?.to_physical())
    }

    /// All blocks `Delta_q u`, `q = -1..=q_max`, in physical space.
    pub fn decompose(&self, u: &SpectralField) -> Vec<ScalarField> {
        self.blocks().map(|q| self.delta_q(u, q).expect("block in range").to_physical()).collect()
    }

    /// `||Delta_q u||_2` from the spectrum.
    pub fn block_l2(&self, u: &SpectralField, q: i32) -> f64 {
        let e = u.spectral_sum(|m, c| self.block_symbol(q, m.k2.sqrt()).powi(2) * c.norm_sqr());
        (u.grid().volume() * e).sqrt()
    }

    /// `||grad Delta_q u||_2 / (2^q ||Delta_q u||_2)`; `None` if the block is empty.
    pub fn bernstein_ratio(&self, u: &SpectralField, q: i32) -> Option<f64> {
        let vol = u.grid().volume();
        let lo = u.spectral_sum(|m, c| self.block_symbol(q, m.k2.sqrt()).powi(2) * c.norm_sqr());
        let hi = u.spectral_sum(|m, c| {
            let kd2 = m.kd[0] * m.kd[0] + m.kd[1] * m.kd[1] + m.kd[2] * m.kd[2];
            kd2 * self.block_symbol(q, m.k2.sqrt()).powi(2) * c.norm_sqr()
        });
        if lo <= 0.0 {
            return None;
        }
        Some((vol * hi).sqrt() / (2f64.powi(q) * (vol * lo).sqrt()))
    }
}

/// `(sum_q |a_q|^r)^(1/r)`, or the max for `r = inf`.
pub fn sequence_norm(a: &[f64], r: f64) -> f64 {
    if r.is_infinite() {
        a.iter().fold(0.0, |m, x| m.max(x.abs()))
    } else if r == 1.0 {
        crate::reduce::compensated_sum(a.iter().map(|x| x.abs()))
    } else {
        crate::reduce::compensated_sum(a.iter().map(|x| x.abs().powf(r))).powf(1.0 / r)
    }
}

/// `|| (2^{qs} ||Delta_q u||_p)_q ||_{l^r}` over `q = -1..=q_max`.
pub fn besov_norm(part: &DyadicPartition, u: &ScalarField, s: f64, p: f64, r: f64) -> Result<f64> {
    if !(p >= 1.0 && r >= 1.0) {
        return Err(Error::InvalidArgument(format!("Besov exponents p = {p}, r = {r} must be at least 1")));
    }
    part.grid().check_same(u.grid())?;
    let uh = u.to_spectral()?;
    let terms: Vec<f64> = part
        .blocks()
        .map(|q| {
            let norm = if p == 2.0 {
                part.block_l2(&uh, q)
            } else {
                part.delta_q(&uh, q).expect("block in range").to_physical().lebesgue_norm(p)
            };
            2f64.powf(q as f64 * s) * norm
        })
        .collect();
    Ok(sequence_norm(&terms, r))
}

/// `(sum_q |Delta_q u|^2)^(1/2)` pointwise.
pub fn square_function(part: &DyadicPartition, u: &ScalarField) -> Result<ScalarField> {
    let uh = u.to_spectral()?;
    let mut acc = ScalarField::zeros(*u.grid());
    for b in part.decompose(&uh) {
        acc.data_mut().par_iter_mut().zip(b.data()).for_each(|(a, x)| *a += x * x);
    }
    Ok(acc.map(f64::sqrt))
}

/// The three parts of `u w = T_u w + T_w u + R(u, w)`.
#[derive(Clone, Debug)]
pub struct Bony {
    pub t_u_w: ScalarField,
    pub t_w_u: ScalarField,
    pub remainder: ScalarField,
}

/// Paraproduct split with 2/3-dealiased operands and outputs; the parts sum
/// to `dealiased_product(u, w)`.
pub fn bony_decompose(part: &DyadicPartition, u: &ScalarField, w: &ScalarField) -> Result<Bony> {
    u.grid().check_same(w.grid())?;
    part.grid().check_same(u.grid())?;
    let uh = spectral::dealias(&u.to_spectral()?);
    let wh = spectral::dealias(&w.to_spectral()?);
    let bu = part.decompose(&uh);
    let bw = part.decompose(&wh);
    let g = *u.grid();
    let nb = bu.len();
    let zero = ScalarField::zeros(g);

    // block index b corresponds to q = b - 1
    let low = |blocks: &[ScalarField], b: usize| -> ScalarField {
        // S_{q-1} = sum of blocks with index < b - 1
        let mut s = zero.clone();
        for x in blocks.iter().take(b.saturating_sub(1)) {
            s.axpy(1.0, x);
        }
        s
    };
    let mut tuw = zero.clone();
    let mut twu = zero.clone();
    let mut rem = zero.clone();
    for b in 0..nb {
        tuw.axpy(1.0, &low(&bu, b).mul(&bw[b]));
        twu.axpy(1.0, &low(&bw, b).mul(&bu[b]));
        let mut near = zero.clone();
        for c in b.saturating_sub(1)..=(b + 1).min(nb - 1) {
            near.axpy(1.0, &bw[c]);
        }
        rem.axpy(1.0, &bu[b].mul(&near));
    }
    let clean = |f: &ScalarField| spectral::dealias(&f.fft()).to_physical();
    Ok(Bony { t_u_w: clean(&tuw), t_w_u: clean(&twu), remainder: clean(&rem) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(g: Grid, seed: u64) -> ScalarField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ScalarField::new(g, (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn theta_prime_matches_difference_quotient() {
        for i in 1..200 {
            let t = 0.7 + 0.7 * i as f64 / 200.0;
            let h = 1e-6;
            let fd = (theta(t + h) - theta(t - h)) / (2.0 * h);
            assert!((theta_prime(t) - fd).abs() <= 1e-6, "{t}");
        }
        let part = DyadicPartition::new(Grid::new(64, 8.0).unwrap()).unwrap();
        for q in part.blocks() {
            for i in 1..100 {
                let r = 0.05 * i as f64;
                let h = 1e-6;
                let fd = (part.block_symbol(q, r + h) - part.block_symbol(q, r - h)) / (2.0 * h);
                assert!((part.block_symbol_prime(q, r) - fd).abs() <= 1e-5, "{q} {r}");
            }
        }
    }

    #[test]
    fn theta_profile() {
        assert_eq!(theta(0.0), 1.0);
        assert_eq!(theta(0.75), 1.0);
        assert_eq!(theta(4.0 / 3.0), 0.0);
        let mut prev = 1.0;
        for i in 0..=200 {
            let t = 0.7 + i as f64 * 0.004;
            let v = theta(t);
            assert!(v <= prev && (0.0..=1.0).contains(&v));
            prev = v;
        }
    }

    #[test]
    fn q_max_and_rejection() {
        assert_eq!(DyadicPartition::new(Grid::new(64, 8.0).unwrap()).unwrap().q_max(), 2);
        assert_eq!(DyadicPartition::new(Grid::new(64, std::f64::consts::PI).unwrap()).unwrap().q_max(), 4);
        assert!(DyadicPartition::new(Grid::new(8, 8.0).unwrap()).is_err());
    }

    #[test]
    fn origin_belongs_to_low_block() {
        assert_eq!(chi(0.0), 1.0);
        for q in 0..10 {
            assert_eq!(phi(0.0 * 2f64.powi(-q)), 0.0);
        }
    }

    #[test]
    fn single_annulus_point() {
        for q0 in 0..6 {
            let r = 1.5 * 2f64.powi(q0);
            let terms: Vec<f64> = (0..10).map(|q| phi(r * 2f64.powi(-q))).collect();
            let nz = terms.iter().filter(|&&t| t != 0.0).count();
            assert!((1..=2).contains(&nz));
            let s: f64 = chi(r) + terms.iter().sum::<f64>();
            assert!((s - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn support_separation() {
        for i in 0..2000 {
            let r = i as f64 * 0.01;
            for p in 0..8 {
                for q in (p + 2)..10 {
                    assert_eq!(phi(r * 2f64.powi(-p)) * phi(r * 2f64.powi(-q)), 0.0);
                }
                if p >= 1 {
                    assert_eq!(chi(r) * phi(r * 2f64.powi(-p)), 0.0);
                }
            }
        }
    }

    #[test]
    fn blocks_reject_out_of_range() {
        let part = DyadicPartition::new(Grid::new(32, 2.0).unwrap()).unwrap();
        let u = SpectralField::zeros(*part.grid());
        assert!(part.delta_q(&u, part.q_max() + 1).is_err());
        assert!(part.delta_q(&u, -2).is_err());
    }

    #[test]
    fn single_mode_block_selection() {
        let g = Grid::new(32, std::f64::consts::PI).unwrap();
        let part = DyadicPartition::new(g).unwrap();
        // |k| = 3 sits at 1.5 * 2^1, strictly inside block 1
        let u = ScalarField::from_fn(g, |x| (3.0 * x[1]).cos());
        let uh = u.to_spectral().unwrap();
        let d1 = part.delta_q(&uh, 1).unwrap().to_physical();
        assert!(d1.sub(&u).max_abs() < 1e-13);
        for q in [-1, 3] {
            assert!(part.delta_q(&uh, q).unwrap().to_physical().max_abs() < 1e-14);
        }
    }

    #[test]
    fn besov_zero_and_sequence_norms() {
        let g = Grid::new(16, 1.0).unwrap();
        let part = DyadicPartition::new(g).unwrap();
        assert_eq!(besov_norm(&part, &ScalarField::zeros(g), 0.5, 2.0, 1.0).unwrap(), 0.0);
        assert_eq!(sequence_norm(&[3.0, -4.0], 2.0), 5.0);
        assert_eq!(sequence_norm(&[3.0, -4.0], f64::INFINITY), 4.0);
        assert_eq!(sequence_norm(&[3.0, -4.0], 1.0), 7.0);
        assert!(besov_norm(&part, &ScalarField::zeros(g), 0.5, 0.5, 1.0).is_err());
    }

    #[test]
    fn besov_p2_parseval_matches_quadrature() {
        let g = Grid::new(16, 1.0).unwrap();
        let part = DyadicPartition::new(g).unwrap();
        let u = random_field(g, 3);
        let a = besov_norm(&part, &u, 0.5, 2.0, 1.0).unwrap();
        let uh = u.to_spectral().unwrap();
        let b: f64 = part
            .blocks()
            .map(|q| 2f64.powf(0.5 * q as f64) * part.delta_q(&uh, q).unwrap().to_physical().l2_norm())
            .sum();
        assert!((a - b).abs() < 1e-12 * b);
    }

    #[test]
    fn bony_parts_sum_to_dealiased_product() {
        let g = Grid::new(32, 2.0).unwrap();
        let part = DyadicPartition::new(g).unwrap();
        let u = random_field(g, 4);
        let w = random_field(g, 5);
        let b = bony_decompose(&part, &u, &w).unwrap();
        let sum = b.t_u_w.add(&b.t_w_u).add(&b.remainder);
        let want = spectral::dealiased_mul(&u, &w);
        assert!(sum.sub(&want).l2_norm() <= 1e-10 * want.l2_norm());
    }
}
