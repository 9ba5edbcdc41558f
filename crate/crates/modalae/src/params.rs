//! Autoencoder parameters: initialization, flat coordinate access, and the
//! binary checkpoint format.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::rng::Rng;

/// Checkpoint file magic.
const MAGIC: &[u8; 4] = b"MAE1";

/// The full parameter vector θ = (W1, b1, W2, b2) of a single-hidden-layer
/// autoencoder with input dimension `d` and hidden dimension `m`.
///
/// Shapes: `w1` is m×d, `b1` has length m, `w2` is d×m, `b2` has length d.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamSet {
    pub w1: Mat,
    pub b1: Vec<f64>,
    pub w2: Mat,
    pub b2: Vec<f64>,
}

impl ParamSet {
    pub fn new(w1: Mat, b1: Vec<f64>, w2: Mat, b2: Vec<f64>) -> Result<Self> {
        let m = w1.rows();
        let d = w1.cols();
        if b1.len() != m || w2.rows() != d || w2.cols() != m || b2.len() != d {
            return Err(Error::Dimension(format!(
                "inconsistent parameter shapes: w1 {}x{}, b1 {}, w2 {}x{}, b2 {}",
                w1.rows(),
                w1.cols(),
                b1.len(),
                w2.rows(),
                w2.cols(),
                b2.len()
            )));
        }
        Ok(ParamSet { w1, b1, w2, b2 })
    }

    pub fn zeros(d: usize, m: usize) -> Self {
        ParamSet {
            w1: Mat::zeros(m, d),
            b1: vec![0.0; m],
            w2: Mat::zeros(d, m),
            b2: vec![0.0; d],
        }
    }

    /// (input dimension, hidden dimension).
    pub fn dims(&self) -> (usize, usize) {
        (self.w1.cols(), self.w1.rows())
    }

    pub fn all_finite(&self) -> bool {
        self.w1.all_finite()
            && self.w2.all_finite()
            && self.b1.iter().all(|x| x.is_finite())
            && self.b2.iter().all(|x| x.is_finite())
    }

    /// Total number of scalar coordinates.
    pub fn n_coords(&self) -> usize {
        let (d, m) = self.dims();
        m * d + m + d * m + d
    }

    pub fn coord(&self, i: usize) -> f64 {
        let (d, m) = self.dims();
        let (w1n, b1n, w2n) = (m * d, m, d * m);
        if i < w1n {
            self.w1.data()[i]
        } else if i < w1n + b1n {
            self.b1[i - w1n]
        } else if i < w1n + b1n + w2n {
            self.w2.data()[i - w1n - b1n]
        } else {
            self.b2[i - w1n - b1n - w2n]
        }
    }

    pub fn coord_mut(&mut self, i: usize) -> &mut f64 {
        let (d, m) = self.dims();
        let (w1n, b1n, w2n) = (m * d, m, d * m);
        if i < w1n {
            &mut self.w1.data_mut()[i]
        } else if i < w1n + b1n {
            &mut self.b1[i - w1n]
        } else if i < w1n + b1n + w2n {
            &mut self.w2.data_mut()[i - w1n - b1n]
        } else {
            &mut self.b2[i - w1n - b1n - w2n]
        }
    }

    /// Human-readable name of coordinate `i`, e.g. `w2[17]`.
    pub fn coord_name(&self, i: usize) -> String {
        let (d, m) = self.dims();
        let (w1n, b1n, w2n) = (m * d, m, d * m);
        if i < w1n {
            format!("w1[{}]", i)
        } else if i < w1n + b1n {
            format!("b1[{}]", i - w1n)
        } else if i < w1n + b1n + w2n {
            format!("w2[{}]", i - w1n - b1n)
        } else {
            format!("b2[{}]", i - w1n - b1n - w2n)
        }
    }

    /// θ ← θ - lr · g, in place.
    pub fn step(&mut self, grad: &ParamSet, lr: f64) {
        self.w1.add_scaled(&grad.w1, -lr);
        self.w2.add_scaled(&grad.w2, -lr);
        for (b, &g) in self.b1.iter_mut().zip(&grad.b1) {
            *b -= lr * g;
        }
        for (b, &g) in self.b2.iter_mut().zip(&grad.b2) {
            *b -= lr * g;
        }
    }

    /// Euclidean norm over all coordinates.
    pub fn norm(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n_coords() {
            let v = self.coord(i);
            s += v * v;
        }
        s.sqrt()
    }

    /// Write in the checkpoint format: 16-byte header (magic `MAE1`, then
    /// d, m, and a reserved word as little-endian u32), followed by W1, b1,
    /// W2, b2 as little-endian f64 in row-major order.
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        let (d, m) = self.dims();
        w.write_all(MAGIC)?;
        w.write_all(&(d as u32).to_le_bytes())?;
        w.write_all(&(m as u32).to_le_bytes())?;
        w.write_all(&0u32.to_le_bytes())?;
        for &x in self.w1.data() {
            w.write_all(&x.to_le_bytes())?;
        }
        for &x in &self.b1 {
            w.write_all(&x.to_le_bytes())?;
        }
        for &x in self.w2.data() {
            w.write_all(&x.to_le_bytes())?;
        }
        for &x in &self.b2 {
            w.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut header = [0u8; 16];
        r.read_exact(&mut header)
            .map_err(|_| Error::Format("checkpoint truncated before header end".into()))?;
        if &header[0..4] != MAGIC {
            return Err(Error::Format(format!(
                "bad checkpoint magic {:02x?}, expected {:02x?}",
                &header[0..4],
                MAGIC
            )));
        }
        let d = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
        let m = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
        let n_floats = m * d + m + d * m + d;
        let mut payload = vec![0u8; n_floats * 8];
        r.read_exact(&mut payload).map_err(|_| {
            Error::Format(format!(
                "checkpoint payload truncated: expected {} bytes for d={}, m={}",
                n_floats * 8,
                d,
                m
            ))
        })?;
        // Reject trailing bytes: the payload length must match the header.
        let mut extra = [0u8; 1];
        if r.read(&mut extra)? != 0 {
            return Err(Error::Format(format!(
                "checkpoint has trailing bytes beyond the d={}, m={} payload",
                d, m
            )));
        }
        let mut floats = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        let w1 = Mat::from_vec(m, d, floats.by_ref().take(m * d).collect())?;
        let b1: Vec<f64> = floats.by_ref().take(m).collect();
        let w2 = Mat::from_vec(d, m, floats.by_ref().take(d * m).collect())?;
        let b2: Vec<f64> = floats.by_ref().take(d).collect();
        ParamSet::new(w1, b1, w2, b2)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::read_from(&mut f)
    }
}

/// Glorot-uniform initialization: weights uniform in ±sqrt(6/(d+m)),
/// biases zero. Deterministic per generator state.
pub fn init_params(d: usize, m: usize, rng: &mut Rng) -> ParamSet {
    let bound = (6.0 / (d + m) as f64).sqrt();
    let w1 = Mat::from_vec(m, d, (0..m * d).map(|_| rng.uniform_in(-bound, bound)).collect())
        .expect("shape fixed by construction");
    let w2 = Mat::from_vec(d, m, (0..d * m).map(|_| rng.uniform_in(-bound, bound)).collect())
        .expect("shape fixed by construction");
    ParamSet {
        w1,
        b1: vec![0.0; m],
        w2,
        b2: vec![0.0; d],
    }
}
