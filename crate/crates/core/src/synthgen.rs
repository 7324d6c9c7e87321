//! Synthetic low-rank plus diagonal test matrices and the `11ᵀ + I` toy operator.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{LordError, Result};
use crate::linalg::{frob2, thin_qr, Mat, Vector};
use crate::linop::{LinOp, DEFAULT_MATERIALIZE_CAP};

/// Singular values below this are dropped before the factors are drawn.
const SPECTRUM_FLOOR: f64 = 1e-18;

const STREAM_LEFT: u64 = 10;
const STREAM_RIGHT: u64 = 11;
const STREAM_NOISE: u64 = 12;
const STREAM_DIAG: u64 = 13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Exp,
    Poly,
    Noise,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Exp => "exp",
            Family::Poly => "poly",
            Family::Noise => "noise",
        }
    }

    /// Decay parameters of the standard benchmark families.
    pub fn standard_params(self) -> [f64; 3] {
        match self {
            Family::Exp => [0.5, 0.1, 0.01],
            Family::Poly => [2.0, 1.0, 0.5],
            Family::Noise => [0.0001, 0.01, 0.1],
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = LordError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "exp" => Ok(Family::Exp),
            "poly" => Ok(Family::Poly),
            "noise" => Ok(Family::Noise),
            other => Err(LordError::Config(format!("unknown matrix family '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub family: Family,
    pub t: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub k: usize,
    #[serde(default)]
    pub xi: f64,
    #[serde(default)]
    pub seed: u64,
    /// Allow decay parameters outside the standard nine families.
    #[serde(default)]
    pub allow_nonstandard: bool,
}

impl SynthSpec {
    pub fn new(family: Family, t: f64, n: usize, k: usize, xi: f64, seed: u64) -> Self {
        Self {
            family,
            t,
            n,
            k,
            xi,
            seed,
            allow_nonstandard: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(LordError::Config("N must be positive".into()));
        }
        if self.k > self.n {
            return Err(LordError::Config(format!("k = {} exceeds N = {}", self.k, self.n)));
        }
        let t_ok = match self.family {
            Family::Noise => self.t >= 0.0 && self.t.is_finite(),
            _ => self.t > 0.0 && self.t.is_finite(),
        };
        if !t_ok {
            return Err(LordError::Config(format!("invalid decay parameter t = {}", self.t)));
        }
        if !(self.xi >= 0.0 && self.xi.is_finite()) {
            return Err(LordError::Config(format!("xi must be non-negative, got {}", self.xi)));
        }
        if !self.allow_nonstandard
            && !self.family.standard_params().contains(&self.t)
        {
            return Err(LordError::Config(format!(
                "t = {} is not a standard {} parameter (set allow_nonstandard)",
                self.t, self.family
            )));
        }
        if self.n.saturating_mul(self.n) > DEFAULT_MATERIALIZE_CAP {
            return Err(LordError::TooLarge {
                rows: self.n,
                cols: self.n,
                cap: DEFAULT_MATERIALIZE_CAP,
            });
        }
        Ok(())
    }

    /// Singular values of the low-rank part for the `exp` and `poly` families.
    pub fn spectrum(&self) -> Vector {
        Vector::from_fn(self.n, |i, _| {
            if i < self.k {
                return 1.0;
            }
            let j = (i - self.k + 1) as f64;
            match self.family {
                Family::Exp => 10f64.powf(-self.t * j),
                Family::Poly => (j + 1.0).powf(-self.t),
                Family::Noise => 0.0,
            }
        })
    }
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Mat {
    Mat::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// `n×r` matrix with orthonormal columns, Haar-distributed.
pub fn random_orthonormal(n: usize, r: usize, rng: &mut ChaCha8Rng) -> Mat {
    let (mut q, rr) = thin_qr(&gaussian(n, r, rng));
    for (j, mut col) in q.column_iter_mut().enumerate() {
        if rr[(j, j)] < 0.0 {
            col.neg_mut();
        }
    }
    q
}

/// The dense low-rank (or, for `noise`, plateau plus noise) component `L`.
pub fn gen_lowrank(spec: &SynthSpec) -> Result<Mat> {
    spec.validate()?;
    let n = spec.n;
    match spec.family {
        Family::Noise => {
            let mut l = gaussian(n, n, &mut rng(spec.seed, STREAM_NOISE));
            l *= spec.t / (n as f64).sqrt();
            for i in 0..spec.k {
                l[(i, i)] += 1.0;
            }
            Ok(l)
        }
        Family::Exp | Family::Poly => {
            let sigma = spec.spectrum();
            let r = sigma.iter().take_while(|&&s| s >= SPECTRUM_FLOOR).count();
            if r == 0 {
                return Ok(Mat::zeros(n, n));
            }
            let mut u = random_orthonormal(n, r, &mut rng(spec.seed, STREAM_LEFT));
            let v = random_orthonormal(n, r, &mut rng(spec.seed, STREAM_RIGHT));
            for (j, mut col) in u.column_iter_mut().enumerate() {
                col *= sigma[j];
            }
            Ok(u * v.transpose())
        }
    }
}

/// `A = L + ξ·sqrt(‖L‖²_F / (N‖d‖²))·diag(d)`. Returns `A` and the scaled diagonal.
pub fn mix_diagonal(l: &Mat, d_raw: &Vector, xi: f64) -> Result<(Mat, Vector)> {
    let n = l.nrows();
    if !l.is_square() || d_raw.len() != n {
        return Err(LordError::shape("mix_diagonal", (n, n), (d_raw.len(), l.ncols())));
    }
    if !(xi >= 0.0 && xi.is_finite()) {
        return Err(LordError::InvalidInput(format!("xi must be non-negative, got {xi}")));
    }
    if xi == 0.0 {
        return Ok((l.clone(), Vector::zeros(n)));
    }
    let d2 = d_raw.norm_squared();
    if d2 == 0.0 {
        return Err(LordError::InvalidInput("zero diagonal cannot be rescaled".into()));
    }
    let scale = xi * (frob2(l) / (n as f64 * d2)).sqrt();
    let d = d_raw * scale;
    let mut a = l.clone();
    for i in 0..n {
        a[(i, i)] += d[i];
    }
    Ok((a, d))
}

/// A generated test matrix with its ground-truth parts.
#[derive(Debug, Clone)]
pub struct LordSample {
    pub a: Mat,
    pub lowrank: Mat,
    pub diag: Vector,
}

pub fn sample(spec: &SynthSpec) -> Result<LordSample> {
    let lowrank = gen_lowrank(spec)?;
    let d_raw = gaussian(spec.n, 1, &mut rng(spec.seed, STREAM_DIAG)).column(0).into_owned();
    let (a, diag) = mix_diagonal(&lowrank, &d_raw, spec.xi)?;
    Ok(LordSample { a, lowrank, diag })
}

/// `A = 11ᵀ + I`, applied as `x ↦ (Σx)1 + x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OnesPlusIdentity {
    n: usize,
}

impl OnesPlusIdentity {
    pub fn frobenius_norm2(&self) -> f64 {
        let n = self.n as f64;
        n * (n + 3.0)
    }
}

impl LinOp for OnesPlusIdentity {
    fn rows(&self) -> usize {
        self.n
    }
    fn cols(&self) -> usize {
        self.n
    }
    fn forward_unchecked(&self, b: &Mat) -> Mat {
        let mut out = b.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            col.add_scalar_mut(b.column(j).sum());
        }
        out
    }
    fn adjoint_unchecked(&self, b: &Mat) -> Mat {
        self.forward_unchecked(b)
    }
}

pub fn toy_operator(n: usize) -> Result<OnesPlusIdentity> {
    if n == 0 {
        return Err(LordError::Domain("toy operator needs N >= 1".into()));
    }
    Ok(OnesPlusIdentity { n })
}
