//! Grid-sampled Brownian paths for `N` particles in three dimensions.
//!
//! Increments are drawn from a ChaCha stream selected by `(seed, stream)`.
//! Every step consumes a fixed number of 32-bit words, so a path is a pure
//! function of its key and never depends on how work is scheduled.
//! All integrands along a path are evaluated at left endpoints.

use crate::error::{Error, Result};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::io::{Read, Write};

#[derive(Clone, Debug, PartialEq)]
pub struct BrownianPath {
    pub dt: f64,
    pub n_steps: usize,
    pub n_particles: usize,
    /// `(n_steps + 1) * 3N` coordinates, row per time node.
    pub values: Vec<f64>,
    pub seed: u64,
    pub stream: u64,
}

/// Counter-based normal generator for one stream.
pub struct NormalStream {
    rng: ChaCha12Rng,
}

impl NormalStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        NormalStream { rng }
    }

    /// Position the stream at the start of block `index`, where every block
    /// holds `pairs` Box-Muller pairs (four words each).
    pub fn seek(&mut self, index: u64, pairs: usize) {
        self.rng.set_word_pos(index as u128 * pairs as u128 * 4);
    }

    fn uniform_open(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 1.0) * (1.0 / (1u64 << 53) as f64)
    }

    /// Two independent standard normals.
    pub fn pair(&mut self) -> (f64, f64) {
        let u1 = self.uniform_open();
        let u2 = self.uniform_open();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        (r * c, r * s)
    }

    /// Fill `out` with standard normals, consuming `ceil(len/2)` pairs.
    pub fn fill(&mut self, out: &mut [f64]) {
        let mut i = 0;
        while i < out.len() {
            let (a, b) = self.pair();
            out[i] = a;
            if i + 1 < out.len() {
                out[i + 1] = b;
            }
            i += 2;
        }
    }
}

/// Sample a path with `n_steps` increments of variance `dt` per coordinate.
pub fn sample_path(seed: u64, stream: u64, n_steps: usize, dt: f64, n_particles: usize) -> Result<BrownianPath> {
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("dt must be > 0, got {dt}")));
    }
    if n_particles == 0 {
        return Err(Error::Domain("need at least one particle".into()));
    }
    let dim = 3 * n_particles;
    let mut values = vec![0.0; (n_steps + 1) * dim];
    let mut gen = NormalStream::new(seed, stream);
    let sd = dt.sqrt();
    let mut z = vec![0.0; dim];
    for i in 0..n_steps {
        gen.fill(&mut z);
        let (prev, next) = values.split_at_mut((i + 1) * dim);
        let prev = &prev[i * dim..];
        for c in 0..dim {
            next[c] = prev[c] + sd * z[c];
        }
    }
    Ok(BrownianPath { dt, n_steps, n_particles, values, seed, stream })
}

impl BrownianPath {
    pub fn dim(&self) -> usize {
        3 * self.n_particles
    }

    pub fn t_final(&self) -> f64 {
        self.dt * self.n_steps as f64
    }

    /// All coordinates at node `i`.
    pub fn point(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.values[i * d..(i + 1) * d]
    }

    /// Position of particle `l` at node `i`.
    pub fn particle(&self, i: usize, l: usize) -> [f64; 3] {
        let p = self.point(i);
        [p[3 * l], p[3 * l + 1], p[3 * l + 2]]
    }

    /// Increment of particle `l` over step `i`.
    pub fn increment(&self, i: usize, l: usize) -> [f64; 3] {
        let a = self.particle(i, l);
        let b = self.particle(i + 1, l);
        [b[0] - a[0], b[1] - a[1], b[2] - a[2]]
    }

    fn check_index(&self, t_index: usize) -> Result<()> {
        if t_index > self.n_steps {
            return Err(Error::Index(format!("time index {t_index} beyond {} steps", self.n_steps)));
        }
        Ok(())
    }

    fn with_rows(&self, n_steps: usize, dt: f64, row: impl Fn(usize, usize) -> f64) -> BrownianPath {
        let d = self.dim();
        let mut values = Vec::with_capacity((n_steps + 1) * d);
        for i in 0..=n_steps {
            for c in 0..d {
                values.push(row(i, c));
            }
        }
        BrownianPath { dt, n_steps, n_particles: self.n_particles, values, seed: self.seed, stream: self.stream }
    }

    /// `s -> alpha_{t-s} - alpha_t` on `[0, t]`.
    pub fn reverse(&self, t_index: usize) -> Result<BrownianPath> {
        self.check_index(t_index)?;
        let d = self.dim();
        Ok(self.with_rows(t_index, self.dt, |i, c| self.values[(t_index - i) * d + c] - self.values[t_index * d + c]))
    }

    /// `s -> alpha_{t+s} - alpha_t`, for the remaining steps.
    pub fn shift(&self, t_index: usize) -> Result<BrownianPath> {
        self.check_index(t_index)?;
        let d = self.dim();
        Ok(self.with_rows(self.n_steps - t_index, self.dt, |i, c| {
            self.values[(t_index + i) * d + c] - self.values[t_index * d + c]
        }))
    }

    /// The path up to node `t_index`.
    pub fn truncate(&self, t_index: usize) -> Result<BrownianPath> {
        self.check_index(t_index)?;
        let d = self.dim();
        Ok(self.with_rows(t_index, self.dt, |i, c| self.values[i * d + c]))
    }

    /// Every `factor`-th node, a path with step `factor * dt`.
    pub fn coarsen(&self, factor: usize) -> Result<BrownianPath> {
        if factor == 0 || self.n_steps % factor != 0 {
            return Err(Error::Domain(format!("cannot coarsen {} steps by {factor}", self.n_steps)));
        }
        let d = self.dim();
        Ok(self.with_rows(self.n_steps / factor, self.dt * factor as f64, |i, c| self.values[i * factor * d + c]))
    }

    /// The reflected path `-alpha`.
    pub fn negated(&self) -> BrownianPath {
        let mut p = self.clone();
        p.values.iter_mut().for_each(|v| *v = -*v);
        p
    }

    /// Write the little-endian layout: `dt: f64, n_steps: u64, N: u64,
    /// seed: u64, stream: u64`, then `(n_steps + 1) * 3N` doubles.
    pub fn dump(&self, mut w: impl Write) -> Result<()> {
        w.write_all(&self.dt.to_le_bytes())?;
        w.write_all(&(self.n_steps as u64).to_le_bytes())?;
        w.write_all(&(self.n_particles as u64).to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        w.write_all(&self.stream.to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn load(mut r: impl Read) -> Result<BrownianPath> {
        let mut b = [0u8; 8];
        let mut next = |r: &mut dyn Read| -> Result<[u8; 8]> {
            r.read_exact(&mut b)?;
            Ok(b)
        };
        let dt = f64::from_le_bytes(next(&mut r)?);
        let n_steps = u64::from_le_bytes(next(&mut r)?) as usize;
        let n_particles = u64::from_le_bytes(next(&mut r)?) as usize;
        let seed = u64::from_le_bytes(next(&mut r)?);
        let stream = u64::from_le_bytes(next(&mut r)?);
        if !(dt > 0.0) || n_particles == 0 || n_particles > 1 << 20 || n_steps > 1 << 40 {
            return Err(Error::Config("corrupt path header".into()));
        }
        let len = (n_steps + 1) * 3 * n_particles;
        let mut values = Vec::with_capacity(len);
        for _ in 0..len {
            values.push(f64::from_le_bytes(next(&mut r)?));
        }
        if values[..3 * n_particles].iter().any(|v| *v != 0.0) {
            return Err(Error::Config("path does not start at the origin".into()));
        }
        Ok(BrownianPath { dt, n_steps, n_particles, values, seed, stream })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_path_is_origin() {
        let p = sample_path(1, 0, 0, 0.1, 2).unwrap();
        assert_eq!(p.values, vec![0.0; 6]);
    }

    #[test]
    fn deterministic_and_stream_dependent() {
        let a = sample_path(7, 3, 50, 0.01, 2).unwrap();
        let b = sample_path(7, 3, 50, 0.01, 2).unwrap();
        let c = sample_path(7, 4, 50, 0.01, 2).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn seek_addresses_blocks() {
        let mut g = NormalStream::new(5, 9);
        let mut first = [0.0; 6];
        let mut second = [0.0; 6];
        g.fill(&mut first);
        g.fill(&mut second);
        let mut h = NormalStream::new(5, 9);
        h.seek(1, 3);
        let mut again = [0.0; 6];
        h.fill(&mut again);
        assert_eq!(second, again);
    }

    #[test]
    fn reversal_is_an_involution() {
        let p = sample_path(11, 0, 40, 0.02, 1).unwrap();
        let r = p.reverse(40).unwrap();
        let back = r.reverse(40).unwrap();
        assert!(back.values.iter().zip(&p.values).all(|(a, b)| (a - b).abs() < 1e-14));
        assert_eq!(p.reverse(0).unwrap().values, vec![0.0; 3]);
        assert!(p.reverse(41).is_err());
    }

    #[test]
    fn shift_and_coarsen() {
        let p = sample_path(2, 1, 12, 0.05, 1).unwrap();
        let s = p.shift(4).unwrap();
        assert_eq!(s.n_steps, 8);
        for c in 0..3 {
            assert_eq!(s.values[3 * 8 + c], p.values[3 * 12 + c] - p.values[3 * 4 + c]);
        }
        let c = p.coarsen(4).unwrap();
        assert_eq!(c.n_steps, 3);
        assert_eq!(c.point(2), p.point(8));
        assert!((c.dt - 0.2).abs() < 1e-15);
    }

    #[test]
    fn dump_load_roundtrip() {
        let p = sample_path(3, 8, 10, 0.1, 2).unwrap();
        let mut buf = Vec::new();
        p.dump(&mut buf).unwrap();
        assert_eq!(buf.len(), 40 + 8 * 11 * 6);
        assert_eq!(BrownianPath::load(&buf[..]).unwrap(), p);
        assert!(BrownianPath::load(&buf[..20]).is_err());
    }
}
