//! Daubechies-4 filter bank, one-level QMF analysis and the iterated
//! multiresolution decomposition, plus the cascade construction of the
//! scaling and wavelet functions.
//!
//! Analysis with low-pass taps `h` and high-pass taps `g`:
//!
//! ```text
//! c[n] = Σ_k h[k − 2n] · x[k]
//! d[n] = Σ_k g[k − 2n] · x[k]
//! ```
//!
//! Detail index `n` is anchored at input index `2n`.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `Σh² = 1`, `Σh = √2`. Used for analysis.
    Orthonormal,
    /// Refinement-equation taps summing to 2. Used by [`cascade`].
    Refinement,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    #[default]
    Periodic,
    ZeroPad,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveletBasis {
    h: [f64; 4],
    g: [f64; 4],
    normalization: Normalization,
}

impl WaveletBasis {
    pub fn db4(normalization: Normalization) -> WaveletBasis {
        let s3 = 3f64.sqrt();
        let c = [
            (1.0 + s3) / 4.0,
            (3.0 + s3) / 4.0,
            (3.0 - s3) / 4.0,
            (1.0 - s3) / 4.0,
        ];
        let h = match normalization {
            Normalization::Refinement => c,
            Normalization::Orthonormal => c.map(|v| v / std::f64::consts::SQRT_2),
        };
        let g = std::array::from_fn(|k| if k % 2 == 0 { h[3 - k] } else { -h[3 - k] });
        WaveletBasis {
            h,
            g,
            normalization,
        }
    }

    pub fn low_pass(&self) -> &[f64; 4] {
        &self.h
    }

    pub fn high_pass(&self) -> &[f64; 4] {
        &self.g
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionLevel {
    pub level: usize,
    pub approx: Vec<f64>,
    pub detail: Vec<f64>,
    pub parent_length: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionTree {
    pub levels: Vec<DecompositionLevel>,
    pub original_length: usize,
    pub basis: WaveletBasis,
}

impl DecompositionTree {
    pub fn level(&self, j: usize) -> Option<&DecompositionLevel> {
        j.checked_sub(1).and_then(|i| self.levels.get(i))
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }
}

/// One level of analysis with periodic extension.
pub fn decompose_level(x: &[f64], basis: &WaveletBasis) -> Result<DecompositionLevel> {
    decompose_level_with(x, basis, Boundary::Periodic)
}

/// One level of analysis. Odd-length input is padded with one sample (the
/// periodic continuation `x[0]`, or zero) so both outputs have `⌈N/2⌉`
/// entries.
pub fn decompose_level_with(
    x: &[f64],
    basis: &WaveletBasis,
    boundary: Boundary,
) -> Result<DecompositionLevel> {
    if x.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "decomposition needs at least 2 samples, got {}",
            x.len()
        )));
    }
    if basis.normalization != Normalization::Orthonormal {
        return Err(Error::InvalidParameter(
            "analysis requires the orthonormal basis".into(),
        ));
    }
    let parent_length = x.len();
    let n = parent_length + parent_length % 2;
    let at = |k: usize| -> f64 {
        match boundary {
            Boundary::Periodic => {
                let i = k % n;
                if i < parent_length {
                    x[i]
                } else {
                    x[0]
                }
            }
            Boundary::ZeroPad => x.get(k).copied().unwrap_or(0.0),
        }
    };
    let half = n / 2;
    let mut approx = Vec::with_capacity(half);
    let mut detail = Vec::with_capacity(half);
    for m in 0..half {
        let mut c = 0.0;
        let mut d = 0.0;
        for k in 0..basis.len() {
            let v = at(2 * m + k);
            c += basis.h[k] * v;
            d += basis.g[k] * v;
        }
        approx.push(c);
        detail.push(d);
    }
    Ok(DecompositionLevel {
        level: 1,
        approx,
        detail,
        parent_length,
    })
}

/// `levels`-deep multiresolution decomposition; level `j` analyses the
/// approximation of level `j − 1`.
pub fn msd(x: &[f64], basis: &WaveletBasis, levels: usize) -> Result<DecompositionTree> {
    msd_with(x, basis, levels, Boundary::Periodic)
}

pub fn msd_with(
    x: &[f64],
    basis: &WaveletBasis,
    levels: usize,
    boundary: Boundary,
) -> Result<DecompositionTree> {
    if levels == 0 || levels >= usize::BITS as usize || x.len() < (1usize << levels) {
        return Err(Error::TooManyLevels(levels, x.len()));
    }
    let mut out = Vec::with_capacity(levels);
    let mut level = decompose_level_with(x, basis, boundary)?;
    for j in 2..=levels {
        let next = decompose_level_with(&level.approx, basis, boundary)?;
        out.push(level);
        level = DecompositionLevel { level: j, ..next };
    }
    out.push(level);
    Ok(DecompositionTree {
        levels: out,
        original_length: x.len(),
        basis: basis.clone(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cascade {
    /// Grid abscissae `i / density` on `[0, 3]`.
    pub x: Vec<f64>,
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
    pub iterations: usize,
    pub sup_diff: f64,
}

pub const CASCADE_TOLERANCE: f64 = 1e-6;

/// Iterates `φ(x) = Σ c_k φ(2x − k)` from the indicator of `[0, 1)` on a grid
/// of `density` points per unit until successive iterates differ by less than
/// [`CASCADE_TOLERANCE`], then builds `ψ(x) = Σ (−1)^k c_{3−k} φ(2x − k)`.
pub fn cascade(basis: &WaveletBasis, max_iterations: usize, density: usize) -> Result<Cascade> {
    if basis.normalization != Normalization::Refinement {
        return Err(Error::InvalidParameter(
            "cascade requires the refinement-normalised basis".into(),
        ));
    }
    if density == 0 {
        return Err(Error::InvalidParameter("grid density must be positive".into()));
    }
    let c = basis.h;
    let last = 3 * density;
    let x: Vec<f64> = (0..=last).map(|i| i as f64 / density as f64).collect();

    // φ(2·x_i − k) sits at grid index 2i − k·density
    let refine = |f: &[f64], taps: &[f64; 4]| -> Vec<f64> {
        (0..=last)
            .map(|i| {
                (0..4)
                    .filter_map(|k| (2 * i).checked_sub(k * density).map(|j| (k, j)))
                    .filter(|&(_, j)| j <= last)
                    .map(|(k, j)| taps[k] * f[j])
                    .sum()
            })
            .collect()
    };

    let mut phi: Vec<f64> = (0..=last).map(|i| if i < density { 1.0 } else { 0.0 }).collect();
    let mut sup_diff = f64::INFINITY;
    let mut iterations = 0;
    while iterations < max_iterations {
        let next = refine(&phi, &c);
        sup_diff = next
            .iter()
            .zip(&phi)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        phi = next;
        iterations += 1;
        if sup_diff < CASCADE_TOLERANCE {
            break;
        }
    }
    if !(sup_diff < CASCADE_TOLERANCE) {
        return Err(Error::NoConvergence {
            iterations,
            sup_diff,
        });
    }
    let wavelet_taps = [-c[3], c[2], -c[1], c[0]];
    let psi = refine(&phi, &wavelet_taps);
    Ok(Cascade {
        x,
        phi,
        psi,
        iterations,
        sup_diff,
    })
}

/// Trapezoidal integral of samples on a uniform grid with spacing `dx`.
pub fn trapezoid(y: &[f64], dx: f64) -> f64 {
    match y {
        [] | [_] => 0.0,
        [first, .., last] => dx * (y.iter().sum::<f64>() - 0.5 * (first + last)),
    }
}

impl Cascade {
    /// Two-column `x value` text, one block per function.
    pub fn to_text(&self, which: CascadeFunction) -> String {
        let values = match which {
            CascadeFunction::Phi => &self.phi,
            CascadeFunction::Psi => &self.psi,
        };
        let mut s = String::from("x value\n");
        for (x, v) in self.x.iter().zip(values) {
            let _ = writeln!(s, "{x:.10} {v:.12e}");
        }
        s
    }

    /// Writes `phi.txt` and `psi.txt` into `dir`.
    pub fn export(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|source| Error::Write {
            path: dir.to_path_buf(),
            source,
        })?;
        for (name, which) in [("phi.txt", CascadeFunction::Phi), ("psi.txt", CascadeFunction::Psi)] {
            let path = dir.join(name);
            let mut f = std::fs::File::create(&path).map_err(|source| Error::Write {
                path: path.clone(),
                source,
            })?;
            f.write_all(self.to_text(which).as_bytes())
                .map_err(|source| Error::Write { path, source })?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CascadeFunction {
    Phi,
    Psi,
}
