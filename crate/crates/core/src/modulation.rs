//! Spatial-aware feature modulation.
//!
//! ```text
//! F1 = M_IF ⊙ F
//! F2 = F1 + ReLU(conv3x3(cat(M_GD, M_GG, M_PR)))
//! F3 = cat(M_IF, M_GD, M_GG, M_PR, F2)
//! ```

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::priors::PriorMapSet;
use crate::{Error, FeatureTensor, Result};

/// Projector input channels: ground depth, ground gradient, six Plücker.
pub const PROJECTOR_IN: usize = 8;
pub const KERNEL: usize = 3;
pub const WEIGHTS_MAGIC: &[u8; 4] = b"SFMW";

const TAPS: usize = KERNEL * KERNEL;

/// Weights of the 3×3 same-padded convolution, layout `[out][in][ky][kx]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectorWeights {
    c_out: usize,
    kernel: Vec<f64>,
    bias: Vec<f64>,
}

impl ProjectorWeights {
    pub fn new(c_out: usize, kernel: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if c_out == 0 {
            return Err(Error::WeightDimMismatch("C_out must be at least 1".into()));
        }
        if kernel.len() != c_out * PROJECTOR_IN * TAPS {
            return Err(Error::WeightDimMismatch(format!(
                "kernel has {} values, expected {c_out}x{PROJECTOR_IN}x3x3",
                kernel.len()
            )));
        }
        if bias.len() != c_out {
            return Err(Error::WeightDimMismatch(format!("bias has {} values, expected {c_out}", bias.len())));
        }
        if !kernel.iter().chain(&bias).all(|v| v.is_finite()) {
            return Err(Error::WeightDimMismatch("non-finite weight".into()));
        }
        Ok(Self { c_out, kernel, bias })
    }

    pub fn zeros(c_out: usize) -> Self {
        Self { c_out, kernel: vec![0.0; c_out * PROJECTOR_IN * TAPS], bias: vec![0.0; c_out] }
    }

    /// Xavier-uniform kernel, zero bias. Values are rounded through `f32`
    /// so they survive a save/load cycle unchanged.
    pub fn xavier_uniform(c_out: usize, seed: u64) -> Self {
        let fan_in = (PROJECTOR_IN * TAPS) as f64;
        let fan_out = (c_out * TAPS) as f64;
        let bound = (6.0 / (fan_in + fan_out)).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kernel =
            (0..c_out * PROJECTOR_IN * TAPS).map(|_| f64::from(rng.random_range(-bound..bound) as f32)).collect();
        Self { c_out, kernel, bias: vec![0.0; c_out] }
    }

    pub fn c_out(&self) -> usize {
        self.c_out
    }

    pub fn kernel(&self) -> &[f64] {
        &self.kernel
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    #[inline]
    pub fn weight(&self, o: usize, i: usize, ky: usize, kx: usize) -> f64 {
        self.kernel[((o * PROJECTOR_IN + i) * KERNEL + ky) * KERNEL + kx]
    }

    /// Binary layout: magic `SFMW`, `u32` LE `C_out`, then `f32` LE kernel
    /// followed by `f32` LE bias.
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(WEIGHTS_MAGIC)?;
        w.write_all(&(self.c_out as u32).to_le_bytes())?;
        for v in self.kernel.iter().chain(&self.bias) {
            w.write_all(&(*v as f32).to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut header = [0u8; 8];
        r.read_exact(&mut header)?;
        if &header[..4] != WEIGHTS_MAGIC {
            return Err(Error::Format("projector weights: bad magic".into()));
        }
        let c_out = u32::from_le_bytes(header[4..].try_into().unwrap()) as usize;
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        let expected = c_out * (PROJECTOR_IN * TAPS + 1) * 4;
        if bytes.len() != expected {
            return Err(Error::WeightDimMismatch(format!(
                "weights payload is {} bytes, expected {expected} for C_out = {c_out}",
                bytes.len()
            )));
        }
        let mut vals: Vec<f64> =
            bytes.chunks_exact(4).map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap()))).collect();
        let bias = vals.split_off(c_out * PROJECTOR_IN * TAPS);
        Self::new(c_out, vals, bias)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }
}

/// `F1 = M_IF ⊙ F`, broadcasting the single-channel map over all channels.
pub fn modulate_focal(f: &FeatureTensor, m_if: &FeatureTensor) -> Result<FeatureTensor> {
    if m_if.channels() != 1 {
        return Err(Error::ShapeMismatch(format!("M_IF has {} channels, expected 1", m_if.channels())));
    }
    m_if.check_spatial(f.height(), f.width(), "M_IF")?;
    let scale = m_if.as_slice();
    let mut out = f.clone();
    out.as_mut_slice()
        .par_chunks_mut(f.plane_len())
        .for_each(|plane| plane.iter_mut().zip(scale).for_each(|(v, s)| *v *= s));
    Ok(out)
}

/// The eight projector input channels. Ground depth and gradient are zero
/// where the prior mask is invalid.
pub fn projector_input(priors: &PriorMapSet) -> FeatureTensor {
    let mut input =
        FeatureTensor::concat(&[&priors.m_gd, &priors.m_gg, &priors.m_pr]).expect("prior maps share one shape");
    for c in 0..2 {
        for (v, &ok) in input.plane_mut(c).iter_mut().zip(&priors.valid) {
            if !ok {
                *v = 0.0;
            }
        }
    }
    input
}

/// Same-padded 3×3 convolution followed by ReLU.
///
/// Each output plane accumulates shifted copies of the input planes in a
/// fixed `(in, ky, kx)` order, so results do not depend on thread count.
pub fn conv3x3_relu(input: &FeatureTensor, w: &ProjectorWeights) -> Result<FeatureTensor> {
    if input.channels() != PROJECTOR_IN {
        return Err(Error::WeightDimMismatch(format!(
            "projector input has {} channels, expected {PROJECTOR_IN}",
            input.channels()
        )));
    }
    let (h, wd) = (input.height(), input.width());
    let mut out = FeatureTensor::zeros(w.c_out, h, wd);
    out.as_mut_slice().par_chunks_mut(h * wd).enumerate().for_each(|(o, plane)| {
        plane.fill(w.bias[o]);
        for i in 0..PROJECTOR_IN {
            let src = input.plane(i);
            for ky in 0..KERNEL {
                // output row y reads input row y + ky - 1
                let y0 = if ky == 0 { 1 } else { 0 };
                let y1 = if ky == 2 { h - 1 } else { h };
                for kx in 0..KERNEL {
                    let k = w.weight(o, i, ky, kx);
                    if k == 0.0 {
                        continue;
                    }
                    let x0 = if kx == 0 { 1 } else { 0 };
                    let x1 = if kx == 2 { wd - 1 } else { wd };
                    for y in y0..y1 {
                        let sy = y + ky - 1;
                        let dst = &mut plane[y * wd + x0..y * wd + x1];
                        let s = &src[sy * wd + x0 + kx - 1..sy * wd + x1 + kx - 1];
                        dst.iter_mut().zip(s).for_each(|(d, &v)| *d += k * v);
                    }
                }
            }
        }
        plane.iter_mut().for_each(|v| *v = v.max(0.0));
    });
    Ok(out)
}

/// `F2 = F1 + ReLU(conv3x3(cat(M_GD, M_GG, M_PR)))`.
pub fn spatial_embed(f1: &FeatureTensor, priors: &PriorMapSet, w: &ProjectorWeights) -> Result<FeatureTensor> {
    priors.m_gd.check_spatial(f1.height(), f1.width(), "prior maps")?;
    if w.c_out != f1.channels() {
        return Err(Error::WeightDimMismatch(format!(
            "projector emits {} channels, feature has {}",
            w.c_out,
            f1.channels()
        )));
    }
    let embedding = conv3x3_relu(&projector_input(priors), w)?;
    let mut out = f1.clone();
    out.as_mut_slice().iter_mut().zip(embedding.as_slice()).for_each(|(a, b)| *a += b);
    Ok(out)
}

/// `F3 = cat(raw prior stack, F2)`, `9 + C` channels.
pub fn assemble_spatial_feature(f2: &FeatureTensor, priors: &PriorMapSet) -> Result<FeatureTensor> {
    priors.m_gd.check_spatial(f2.height(), f2.width(), "prior maps")?;
    FeatureTensor::concat(&[&priors.raw_stack(), f2])
}

/// Runs the three stages and returns `(F1, F2, F3)`.
pub fn run_pipeline(
    f: &FeatureTensor,
    priors: &PriorMapSet,
    w: &ProjectorWeights,
) -> Result<(FeatureTensor, FeatureTensor, FeatureTensor)> {
    let f1 = modulate_focal(f, &priors.m_if)?;
    let f2 = spatial_embed(&f1, priors, w)?;
    let f3 = assemble_spatial_feature(&f2, priors)?;
    Ok((f1, f2, f3))
}
