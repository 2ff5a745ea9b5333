//! Henon-map orbits and the keyed permutations derived from them.
//!
//! A [`SymKey`] is a starting point `(x0, y0)` on the plane together with the
//! map parameters and a burn-in length. The emitted sequence is the
//! x-coordinate of successive orbit points after the burn-in; ranking that
//! sequence (stable argsort) yields a [`Permutation`] used to scramble latent
//! vectors.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use thiserror::Error;

/// Any orbit coordinate beyond this magnitude is treated as escaping.
pub const DIVERGENCE_BOUND: f64 = 100.0;

/// Burn-in applied when a key file omits it.
pub const DEFAULT_BURN_IN: u32 = 1000;

/// Keys produced by [`SymKey::random`] are validated over this many steps past
/// the burn-in, which covers every latent length a payload header can carry.
pub const KEYGEN_HORIZON: usize = 1 << 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HenonError {
    #[error("orbit diverged at step {step}: ({x}, {y})")]
    Divergence { step: usize, x: f64, y: f64 },
    #[error("invalid henon parameters: a={a}, b={b}")]
    InvalidParams { a: f64, b: f64 },
    #[error("invalid starting point ({x}, {y}); coordinates must be finite and within ±{DIVERGENCE_BOUND}")]
    InvalidState { x: f64, y: f64 },
    #[error("sequence must contain at least one finite value")]
    BadSequence,
    #[error("length mismatch: vector has {vector} elements, permutation has {permutation}")]
    LengthMismatch { vector: usize, permutation: usize },
    #[error("not a permutation of 0..{0}")]
    NotBijection(usize),
    #[error("malformed key file: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HenonParams {
    pub a: f64,
    pub b: f64,
}

impl HenonParams {
    pub const CLASSICAL: HenonParams = HenonParams { a: 1.4, b: 0.3 };

    pub fn new(a: f64, b: f64) -> Result<Self, HenonError> {
        if !a.is_finite() || !b.is_finite() {
            return Err(HenonError::InvalidParams { a, b });
        }
        Ok(Self { a, b })
    }
}

impl Default for HenonParams {
    fn default() -> Self {
        Self::CLASSICAL
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HenonState {
    pub x: f64,
    pub y: f64,
}

impl HenonState {
    pub fn new(x: f64, y: f64) -> Result<Self, HenonError> {
        if in_bounds(x) && in_bounds(y) {
            Ok(Self { x, y })
        } else {
            Err(HenonError::InvalidState { x, y })
        }
    }
}

fn in_bounds(v: f64) -> bool {
    v.is_finite() && v.abs() <= DIVERGENCE_BOUND
}

/// One application of the map: `(1 - a*x^2 + y, b*x)`.
///
/// The evaluation order is fixed so orbits are bitwise reproducible.
pub fn henon_step(state: HenonState, params: HenonParams) -> Result<HenonState, HenonError> {
    let x = 1.0 - params.a * (state.x * state.x) + state.y;
    let y = params.b * state.x;
    if in_bounds(x) && in_bounds(y) {
        Ok(HenonState { x, y })
    } else {
        Err(HenonError::Divergence { step: 0, x, y })
    }
}

/// Iterator over successive orbit points, starting with the image of the seed.
pub struct Orbit {
    state: HenonState,
    params: HenonParams,
    step: usize,
}

impl Orbit {
    pub fn new(start: HenonState, params: HenonParams) -> Self {
        Self {
            state: start,
            params,
            step: 0,
        }
    }
}

impl Iterator for Orbit {
    type Item = Result<HenonState, HenonError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.step += 1;
        match henon_step(self.state, self.params) {
            Ok(next) => {
                self.state = next;
                Some(Ok(next))
            }
            Err(HenonError::Divergence { x, y, .. }) => Some(Err(HenonError::Divergence {
                step: self.step,
                x,
                y,
            })),
            Err(e) => Some(Err(e)),
        }
    }
}

/// The symmetric key: a starting point on the plane plus map parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymKey {
    pub x0: f64,
    pub y0: f64,
    pub params: HenonParams,
    pub burn_in: u32,
}

impl SymKey {
    /// A key with classical parameters and the default burn-in.
    pub fn new(x0: f64, y0: f64) -> Result<Self, HenonError> {
        Self::with_params(x0, y0, HenonParams::CLASSICAL, DEFAULT_BURN_IN)
    }

    pub fn with_params(
        x0: f64,
        y0: f64,
        params: HenonParams,
        burn_in: u32,
    ) -> Result<Self, HenonError> {
        HenonState::new(x0, y0)?;
        let params = HenonParams::new(params.a, params.b)?;
        Ok(Self {
            x0,
            y0,
            params,
            burn_in,
        })
    }

    pub fn start(&self) -> HenonState {
        HenonState {
            x: self.x0,
            y: self.y0,
        }
    }

    /// Check that the orbit stays bounded for `burn_in + m` steps.
    pub fn validate(&self, m: usize) -> Result<(), HenonError> {
        HenonState::new(self.x0, self.y0)?;
        HenonParams::new(self.params.a, self.params.b)?;
        let steps = self.burn_in as usize + m;
        for point in Orbit::new(self.start(), self.params).take(steps) {
            point?;
        }
        Ok(())
    }

    /// Same key with `x0` shifted by `delta`.
    pub fn perturbed(&self, delta: f64) -> Self {
        Self {
            x0: self.x0 + delta,
            ..*self
        }
    }

    /// Uniform draw from `|x0| <= 0.5, |y0| <= 0.2`, rejecting starting points
    /// whose orbit escapes within [`KEYGEN_HORIZON`] steps past the burn-in.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        loop {
            let x0 = rng.gen_range(-0.5..=0.5);
            let y0 = rng.gen_range(-0.2..=0.2);
            let key = SymKey {
                x0,
                y0,
                params: HenonParams::CLASSICAL,
                burn_in: DEFAULT_BURN_IN,
            };
            if key.validate(KEYGEN_HORIZON).is_ok() {
                return key;
            }
        }
    }

    /// `n` orbit points after the burn-in.
    pub fn trajectory(&self, n: usize) -> Result<Vec<HenonState>, HenonError> {
        HenonState::new(self.x0, self.y0)?;
        Orbit::new(self.start(), self.params)
            .skip(self.burn_in as usize)
            .take(n)
            .collect()
    }
}

/// Text form: `x0 y0` / `a b` / `burn_in`, one group per line.
impl fmt::Display for SymKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:?} {:?}", self.x0, self.y0)?;
        writeln!(f, "{:?} {:?}", self.params.a, self.params.b)?;
        writeln!(f, "{}", self.burn_in)
    }
}

impl FromStr for SymKey {
    type Err = HenonError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut lines = s.lines().map(str::trim).filter(|l| !l.is_empty());
        let parse_pair = |line: &str| -> Result<(f64, f64), HenonError> {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 2 {
                return Err(HenonError::Parse(format!(
                    "expected two numbers, got {line:?}"
                )));
            }
            let a = fields[0]
                .parse::<f64>()
                .map_err(|e| HenonError::Parse(format!("{:?}: {e}", fields[0])))?;
            let b = fields[1]
                .parse::<f64>()
                .map_err(|e| HenonError::Parse(format!("{:?}: {e}", fields[1])))?;
            Ok((a, b))
        };

        let first = lines
            .next()
            .ok_or_else(|| HenonError::Parse("empty key file".into()))?;
        let (x0, y0) = parse_pair(first)?;
        let params = match lines.next() {
            Some(line) => {
                let (a, b) = parse_pair(line)?;
                HenonParams::new(a, b)?
            }
            None => HenonParams::CLASSICAL,
        };
        let burn_in = match lines.next() {
            Some(line) => line
                .parse::<u32>()
                .map_err(|e| HenonError::Parse(format!("burn_in {line:?}: {e}")))?,
            None => DEFAULT_BURN_IN,
        };
        if let Some(extra) = lines.next() {
            return Err(HenonError::Parse(format!(
                "unexpected trailing line {extra:?}"
            )));
        }
        SymKey::with_params(x0, y0, params, burn_in)
    }
}

/// x-components of the `n` orbit points following the burn-in.
pub fn henon_sequence(key: &SymKey, n: usize) -> Result<Vec<f64>, HenonError> {
    Ok(key.trajectory(n)?.into_iter().map(|s| s.x).collect())
}

/// A bijection on `0..m`, stored as source indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    indices: Vec<usize>,
}

impl Permutation {
    pub fn identity(m: usize) -> Self {
        Self {
            indices: (0..m).collect(),
        }
    }

    pub fn from_indices(indices: Vec<usize>) -> Result<Self, HenonError> {
        let m = indices.len();
        let mut seen = vec![false; m];
        for &i in &indices {
            if i >= m || std::mem::replace(&mut seen[i], true) {
                return Err(HenonError::NotBijection(m));
            }
        }
        Ok(Self { indices })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Derive the permutation of length `m` for a key.
    pub fn from_key(key: &SymKey, m: usize) -> Result<Self, HenonError> {
        permutation_from_sequence(&henon_sequence(key, m)?)
    }
}

/// Stable ascending argsort: `indices[i]` is where the i-th smallest value sat.
pub fn permutation_from_sequence(seq: &[f64]) -> Result<Permutation, HenonError> {
    if seq.is_empty() || seq.iter().any(|v| !v.is_finite()) {
        return Err(HenonError::BadSequence);
    }
    let mut indices: Vec<usize> = (0..seq.len()).collect();
    indices.sort_by(|&i, &j| seq[i].total_cmp(&seq[j]));
    Ok(Permutation { indices })
}

/// `out[k] = v[p[k]]`.
pub fn shuffle<T: Copy>(v: &[T], p: &Permutation) -> Result<Vec<T>, HenonError> {
    check_len(v.len(), p)?;
    Ok(p.indices.iter().map(|&i| v[i]).collect())
}

/// Inverse of [`shuffle`]: `out[p[k]] = v[k]`.
pub fn deshuffle<T: Copy + Default>(v: &[T], p: &Permutation) -> Result<Vec<T>, HenonError> {
    check_len(v.len(), p)?;
    let mut out = vec![T::default(); v.len()];
    for (&src, &value) in p.indices.iter().zip(v) {
        out[src] = value;
    }
    Ok(out)
}

fn check_len(len: usize, p: &Permutation) -> Result<(), HenonError> {
    if len != p.len() {
        return Err(HenonError::LengthMismatch {
            vector: len,
            permutation: p.len(),
        });
    }
    Ok(())
}
