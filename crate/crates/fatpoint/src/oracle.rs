//! Dimension certification by interpolation over a prime field.
//!
//! For a concrete configuration with coordinates in F_p, the conditions
//! "multiplicity at least m at the point" are linear in the coefficients of a
//! degree-d curve. The rank of the condition matrix at random coordinates
//! bounds the generic rank from below; a witness reaching the expected rank
//! lifts to characteristic zero (the corresponding minor is a nonzero integer
//! polynomial in the coordinates), certifying the generic dimension or
//! emptiness. Certificates are one-sided: speciality is never certified.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::lattice::{expected_dim, Configuration, DivisorClass, Label};
use crate::scalar::Scalar;

/// Default modulus, the Mersenne prime 2^31 - 1 (fast folding reduction).
pub const DEFAULT_PRIME: u32 = 0x7FFF_FFFF;

/// Fallback modulus for re-certification, the largest prime below 2^31 - 1
/// with a reduction path through plain remainders.
pub const SECOND_PRIME: u32 = 2_147_483_629;

/// Errors from sampling, matrix construction, and certification.
#[derive(Debug, Error)]
pub enum OracleError {
    #[error("{p} is not prime")]
    NotPrime { p: u32 },
    #[error("field of size {p} cannot separate degree-{degree} conditions")]
    FieldTooSmall { p: u32, degree: i64 },
    #[error("field of size {p} is too small to sample distinct coordinates")]
    SamplingFailed { p: u32 },
    #[error("negative degree has no curves")]
    NegativeDegree,
    #[error("negative multiplicity at {0} (reduce the class first)")]
    NegativeMultiplicity(Label),
    #[error("point {parent} has multiplicity 0 but its infinitely near point carries conditions")]
    InvalidCluster { parent: Label },
    #[error("{label} is infinitely near a non-free point; chains of depth > 2 are unsupported")]
    UnsupportedChain { label: Label },
    #[error("instance exceeds the dense matrix budget ({rows} x {cols})")]
    ScaleOverflow { rows: u64, cols: u64 },
    #[error(transparent)]
    Lattice(#[from] crate::lattice::LatticeError),
    #[error("witness store: {0}")]
    Io(#[from] std::io::Error),
    #[error("witness store: {0}")]
    Json(#[from] serde_json::Error),
    #[error("cached witness at {path} does not match the requested instance")]
    CacheMismatch { path: PathBuf },
}

/// Entries of the dense matrix are capped at this many u32 cells (16 GiB);
/// the largest certified instance, degree 348 with ten 110-fold points, needs
/// 3.8e9 cells.
const MAX_CELLS: u64 = 1 << 32;

fn is_prime_u32(n: u32) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u32, 3, 5, 7, 11, 13] {
        if n == p {
            return true;
        }
        if n.is_multiple_of(p) {
            return false;
        }
    }
    let mut d = (n - 1) as u64;
    let mut s = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        s += 1;
    }
    'witness: for a in [2u64, 7, 61] {
        if a % n as u64 == 0 {
            continue;
        }
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == (n - 1) as u64 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == (n - 1) as u64 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

fn mul_mod(a: u64, b: u64, p: u32) -> u64 {
    a * b % p as u64
}

fn pow_mod(mut b: u64, mut e: u64, p: u32) -> u64 {
    b %= p as u64;
    let mut acc = 1u64;
    while e > 0 {
        if e & 1 == 1 {
            acc = mul_mod(acc, b, p);
        }
        b = mul_mod(b, b, p);
        e >>= 1;
    }
    acc
}

fn inv_mod(a: u32, p: u32) -> u32 {
    pow_mod(a as u64, (p - 2) as u64, p) as u32
}

/// Coordinates assigned to one point of a configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SamplePoint {
    /// A point of the plane.
    Free { x: u32, y: u32 },
    /// A direction (slope on the exceptional line) above the parent.
    Near { direction: u32 },
}

/// A configuration with concrete prime-field coordinates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigFp {
    pub p: u32,
    pub seed: u64,
    pub points: Vec<(Label, SamplePoint)>,
}

impl ConfigFp {
    fn sample_of(&self, label: &Label) -> Option<SamplePoint> {
        self.points
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, s)| *s)
    }
}

/// Assigns uniform random coordinates to every point, rejection-resampled so
/// that plane points are pairwise distinct and directions are distinct among
/// points infinitely near the same parent. Deterministic for fixed seed.
pub fn sample_config(
    cfg: &Configuration,
    p: u32,
    seed: u64,
) -> Result<ConfigFp, OracleError> {
    if !is_prime_u32(p) {
        return Err(OracleError::NotPrime { p });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut taken_points: HashSet<(u32, u32)> = HashSet::new();
    let mut taken_dirs: HashSet<(Label, u32)> = HashSet::new();
    let mut points = Vec::with_capacity(cfg.len());
    let budget = 64 * cfg.len() as u64 + 256;
    let mut draws = 0u64;
    for node in cfg.points() {
        let sample = loop {
            draws += 1;
            if draws > budget {
                return Err(OracleError::SamplingFailed { p });
            }
            match &node.parent {
                None => {
                    let x = rng.gen_range(0..p);
                    let y = rng.gen_range(0..p);
                    if taken_points.insert((x, y)) {
                        break SamplePoint::Free { x, y };
                    }
                }
                Some(parent) => {
                    let direction = rng.gen_range(0..p);
                    if taken_dirs.insert((parent.clone(), direction)) {
                        break SamplePoint::Near { direction };
                    }
                }
            }
        };
        points.push((node.label.clone(), sample));
    }
    Ok(ConfigFp { p, seed, points })
}

/// Identifies which linear condition a matrix row imposes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RowProvenance {
    pub label: Label,
    /// Taylor index (i, j) at a free point, or blow-up chart coefficient
    /// index (i, j) at an infinitely near point.
    pub order: (u32, u32),
}

/// Dense interpolation matrix over F_p. Columns are the coefficients of a
/// degree-d curve in the monomial order x^a y^b, a from 0 to d, then b.
#[derive(Clone, Debug)]
pub struct ConditionMatrix {
    pub p: u32,
    pub degree: i64,
    pub nrows: usize,
    pub ncols: usize,
    pub provenance: Vec<RowProvenance>,
    data: Vec<u32>,
}

impl ConditionMatrix {
    pub fn row(&self, i: usize) -> &[u32] {
        &self.data[i * self.ncols..(i + 1) * self.ncols]
    }
}

struct Binomials {
    p: u32,
    fact: Vec<u32>,
    inv_fact: Vec<u32>,
}

impl Binomials {
    fn new(n: usize, p: u32) -> Self {
        let mut fact = vec![1u32; n + 1];
        for i in 1..=n {
            fact[i] = mul_mod(fact[i - 1] as u64, i as u64, p) as u32;
        }
        let mut inv_fact = vec![1u32; n + 1];
        inv_fact[n] = inv_mod(fact[n], p);
        for i in (0..n).rev() {
            inv_fact[i] = mul_mod(inv_fact[i + 1] as u64, (i + 1) as u64, p) as u32;
        }
        Binomials { p, fact, inv_fact }
    }

    fn choose(&self, n: usize, k: usize) -> u64 {
        if k > n {
            return 0;
        }
        let nk = mul_mod(self.fact[n] as u64, self.inv_fact[k] as u64, self.p);
        mul_mod(nk, self.inv_fact[n - k] as u64, self.p)
    }
}

fn powers(base: u32, n: usize, p: u32) -> Vec<u32> {
    let mut out = vec![1u32; n + 1];
    for i in 1..=n {
        out[i] = mul_mod(out[i - 1] as u64, base as u64, p) as u32;
    }
    out
}

fn class_dims<T: Scalar>(l: &DivisorClass<T>, cfg: &Configuration) -> Result<(i64, Vec<i64>), OracleError> {
    let degree = l
        .degree()
        .to_i64()
        .ok_or(OracleError::ScaleOverflow { rows: u64::MAX, cols: u64::MAX })?;
    if degree < 0 {
        return Err(OracleError::NegativeDegree);
    }
    let mut mults = Vec::with_capacity(cfg.len());
    for node in cfg.points() {
        let m = l.mult(&node.label);
        if m < T::zero() {
            return Err(OracleError::NegativeMultiplicity(node.label.clone()));
        }
        mults.push(m.to_i64().ok_or(OracleError::ScaleOverflow {
            rows: u64::MAX,
            cols: u64::MAX,
        })?);
    }
    Ok((degree, mults))
}

/// Builds the interpolation matrix for the class over the sampled
/// configuration. A free point of multiplicity m contributes the Taylor
/// coefficients of order below m at the point; an infinitely near point of
/// multiplicity m2 under a parent of multiplicity m1 and direction w0
/// contributes the coefficients of u^(m1+i) w^j, i + j < m2, of
/// f(x0 + u, y0 + u(w0 + w)).
pub fn build_matrix<T: Scalar>(
    l: &DivisorClass<T>,
    cfg: &Configuration,
    config: &ConfigFp,
) -> Result<ConditionMatrix, OracleError> {
    let p = config.p;
    let (degree, mults) = class_dims(l, cfg)?;
    if (p as i64) <= degree {
        return Err(OracleError::FieldTooSmall { p, degree });
    }
    let d = degree as usize;
    let ncols = (d + 1) * (d + 2) / 2;
    let nrows: u64 = mults.iter().map(|&m| (m as u64) * (m as u64 + 1) / 2).sum();
    if nrows * ncols as u64 > MAX_CELLS {
        return Err(OracleError::ScaleOverflow {
            rows: nrows,
            cols: ncols as u64,
        });
    }
    let nrows = nrows as usize;

    let binom = Binomials::new(d, p);
    let mut data = vec![0u32; nrows * ncols];
    let mut provenance = Vec::with_capacity(nrows);
    let mut next_row = 0usize;

    let col_of =
        |alpha: usize, beta: usize| alpha * (d + 1) - alpha * alpha.saturating_sub(1) / 2 + beta;

    for (idx, node) in cfg.points().iter().enumerate() {
        let m = mults[idx];
        let label = &node.label;
        match node.parent.as_ref() {
            None => {
                if m == 0 {
                    continue;
                }
                let Some(SamplePoint::Free { x, y }) = config.sample_of(label) else {
                    return Err(OracleError::Lattice(
                        crate::lattice::LatticeError::UnknownLabel(label.clone()),
                    ));
                };
                let px = powers(x, d, p);
                let py = powers(y, d, p);
                for i in 0..m as usize {
                    for j in 0..(m as usize - i) {
                        let row = &mut data[next_row * ncols..(next_row + 1) * ncols];
                        for alpha in i..=d {
                            for beta in j..=(d - alpha) {
                                let v = mul_mod(
                                    mul_mod(binom.choose(alpha, i), binom.choose(beta, j), p),
                                    mul_mod(px[alpha - i] as u64, py[beta - j] as u64, p),
                                    p,
                                );
                                row[col_of(alpha, beta)] = v as u32;
                            }
                        }
                        provenance.push(RowProvenance {
                            label: label.clone(),
                            order: (i as u32, j as u32),
                        });
                        next_row += 1;
                    }
                }
            }
            Some(parent) => {
                if m == 0 {
                    continue;
                }
                if cfg.parent_of(parent).is_some() {
                    return Err(OracleError::UnsupportedChain {
                        label: label.clone(),
                    });
                }
                let parent_idx = cfg.position(parent).expect("validated parent");
                let m1 = mults[parent_idx];
                if m1 <= 0 {
                    return Err(OracleError::InvalidCluster {
                        parent: parent.clone(),
                    });
                }
                let Some(SamplePoint::Free { x, y }) = config.sample_of(parent) else {
                    return Err(OracleError::Lattice(
                        crate::lattice::LatticeError::UnknownLabel(parent.clone()),
                    ));
                };
                let Some(SamplePoint::Near { direction: w0 }) = config.sample_of(label) else {
                    return Err(OracleError::Lattice(
                        crate::lattice::LatticeError::UnknownLabel(label.clone()),
                    ));
                };
                let px = powers(x, d, p);
                let py = powers(y, d, p);
                let pw = powers(w0, d, p);
                for i in 0..m as usize {
                    for j in 0..(m as usize - i) {
                        let n = m1 as usize + i;
                        if n > d {
                            // Degree-d polynomials have no u^n coefficient:
                            // the condition is vacuous, the row stays zero.
                            provenance.push(RowProvenance {
                                label: label.clone(),
                                order: (i as u32, j as u32),
                            });
                            next_row += 1;
                            continue;
                        }
                        let row = &mut data[next_row * ncols..(next_row + 1) * ncols];
                        for alpha in 0..=d {
                            for beta in 0..=(d - alpha) {
                                let lo = j.max(n.saturating_sub(alpha));
                                let hi = beta.min(n);
                                let mut acc = 0u64;
                                for t in lo..=hi {
                                    let s = n - t;
                                    let term = mul_mod(
                                        mul_mod(binom.choose(alpha, s), binom.choose(beta, t), p),
                                        mul_mod(
                                            binom.choose(t, j),
                                            mul_mod(
                                                mul_mod(px[alpha - s] as u64, py[beta - t] as u64, p),
                                                pw[t - j] as u64,
                                                p,
                                            ),
                                            p,
                                        ),
                                        p,
                                    );
                                    acc = (acc + term) % p as u64;
                                }
                                row[col_of(alpha, beta)] = acc as u32;
                            }
                        }
                        provenance.push(RowProvenance {
                            label: label.clone(),
                            order: (i as u32, j as u32),
                        });
                        next_row += 1;
                    }
                }
            }
        }
    }
    debug_assert_eq!(next_row, nrows);
    Ok(ConditionMatrix {
        p,
        degree,
        nrows: next_row,
        ncols,
        provenance,
        data,
    })
}

const MERSENNE: u32 = DEFAULT_PRIME;

#[inline]
fn reduce_mersenne(mut x: u64) -> u32 {
    x = (x >> 31) + (x & MERSENNE as u64);
    x = (x >> 31) + (x & MERSENNE as u64);
    let mut r = x as u32;
    if r >= MERSENNE {
        r -= MERSENNE;
    }
    r
}

fn eliminate(
    a: &mut [u32],
    nrows: usize,
    ncols: usize,
    p: u32,
    reduce: impl Fn(u64) -> u32 + Copy + Sync,
) -> usize {
    let mut rank = 0usize;
    for col in 0..ncols {
        if rank == nrows {
            break;
        }
        let Some(pivot) = (rank..nrows).find(|&r| a[r * ncols + col] != 0) else {
            continue;
        };
        if pivot != rank {
            for j in col..ncols {
                a.swap(pivot * ncols + j, rank * ncols + j);
            }
        }
        let inv = inv_mod(a[rank * ncols + col], p) as u64;
        for j in col..ncols {
            let cell = &mut a[rank * ncols + j];
            *cell = reduce(*cell as u64 * inv);
        }
        let (top, below) = a.split_at_mut((rank + 1) * ncols);
        let pivot_row = &top[rank * ncols..];
        let clear = |row: &mut [u32]| {
            let f = row[col];
            if f == 0 {
                return;
            }
            let neg = (p - f) as u64;
            row[col] = 0;
            for j in (col + 1)..ncols {
                row[j] = reduce(row[j] as u64 + neg * pivot_row[j] as u64);
            }
        };
        if nrows - rank > 64 {
            below.par_chunks_mut(ncols).for_each(clear);
        } else {
            below.chunks_mut(ncols).for_each(clear);
        }
        rank += 1;
    }
    rank
}

/// Exact rank over F_p by row elimination (folding reduction for the default
/// Mersenne modulus). Deterministic.
pub fn rank_mod_p(m: &ConditionMatrix) -> usize {
    let mut data = m.data.clone();
    if m.p == MERSENNE {
        eliminate(&mut data, m.nrows, m.ncols, m.p, reduce_mersenne)
    } else {
        let p = m.p;
        eliminate(&mut data, m.nrows, m.ncols, p, move |x| (x % p as u64) as u32)
    }
}

/// One-sided certification status of a computed dimension.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CertStatus {
    /// dim equals the expected dimension; the witness lifts to
    /// characteristic zero.
    CertifiedNonspecial,
    /// Full column rank: the system is empty at general points.
    CertifiedEmpty,
    /// The computed value only bounds the generic dimension from above.
    UpperBoundOnly,
    /// No certifying witness within the retry budget.
    Inconclusive,
}

impl CertStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            CertStatus::CertifiedNonspecial => "CERTIFIED-NONSPECIAL",
            CertStatus::CertifiedEmpty => "CERTIFIED-EMPTY",
            CertStatus::UpperBoundOnly => "UPPER-BOUND-ONLY",
            CertStatus::Inconclusive => "INCONCLUSIVE",
        }
    }
}

/// A replayable rank witness.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RankWitness {
    pub p: u32,
    pub seed: u64,
    pub rank: usize,
}

/// Certified dimension of a linear system at sampled points.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CertifiedDim {
    pub dim: i64,
    pub status: CertStatus,
    pub trials_used: u32,
    pub witness: RankWitness,
}

/// Options for `generic_dim`.
#[derive(Clone, Copy, Debug)]
pub struct OracleOptions {
    pub p: u32,
    pub trials: u32,
    pub seed: u64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            p: DEFAULT_PRIME,
            trials: 3,
            seed: 1,
        }
    }
}

fn trial_seed(base: u64, trial: u32) -> u64 {
    base.wrapping_add(trial as u64)
}

/// Computes dim = ncols - rank - 1 minimized over trials and classifies the
/// result against the expected dimension. Emptiness takes precedence when
/// both readings apply (expected -1 reached by full column rank).
pub fn generic_dim<T: Scalar>(
    l: &DivisorClass<T>,
    cfg: &Configuration,
    opts: &OracleOptions,
) -> Result<CertifiedDim, OracleError> {
    assert!(opts.trials >= 1, "at least one trial");
    let (degree, _) = class_dims(l, cfg)?;
    let e = expected_dim(l)
        .to_i64()
        .expect("expected dim fits once the degree does");
    let ncols = (degree + 1) * (degree + 2) / 2;
    let mut best: Option<(i64, RankWitness)> = None;
    let mut trials_used = 0;
    for trial in 0..opts.trials {
        let seed = trial_seed(opts.seed, trial);
        let config = sample_config(cfg, opts.p, seed)?;
        let matrix = build_matrix(l, cfg, &config)?;
        let rank = rank_mod_p(&matrix);
        let dim = ncols - rank as i64 - 1;
        trials_used = trial + 1;
        let witness = RankWitness {
            p: opts.p,
            seed,
            rank,
        };
        if best.as_ref().is_none_or(|(b, _)| dim < *b) {
            best = Some((dim, witness));
        }
        if best.as_ref().is_some_and(|(b, _)| *b <= e) {
            break;
        }
    }
    let (dim, witness) = best.expect("at least one trial ran");
    let status = if dim == -1 {
        CertStatus::CertifiedEmpty
    } else if dim == e {
        CertStatus::CertifiedNonspecial
    } else {
        CertStatus::UpperBoundOnly
    };
    Ok(CertifiedDim {
        dim,
        status,
        trials_used,
        witness,
    })
}

/// Options for `certify_nonspecial`.
#[derive(Clone, Debug)]
pub struct CertifyOptions {
    pub primes: [u32; 2],
    pub trials: u32,
    pub seed: u64,
    pub cache_dir: Option<PathBuf>,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            primes: [DEFAULT_PRIME, SECOND_PRIME],
            trials: 3,
            seed: 1,
            cache_dir: None,
        }
    }
}

/// A certification record with its persistent witness.
#[derive(Clone, Debug)]
pub struct Certificate {
    pub result: CertifiedDim,
    pub witness: serde_json::Value,
    pub witness_path: Option<PathBuf>,
    pub cache_hit: bool,
}

/// Instance record plus the degree, multiplicities, and cluster edges it
/// was built from.
type InstanceParts = (serde_json::Value, i64, Vec<i64>, Vec<(usize, usize)>);

fn instance_json<T: Scalar>(
    l: &DivisorClass<T>,
    cfg: &Configuration,
) -> Result<InstanceParts, OracleError> {
    let (degree, mults) = class_dims(l, cfg)?;
    let clusters: Vec<(usize, usize)> = cfg
        .points()
        .iter()
        .enumerate()
        .filter_map(|(i, node)| {
            node.parent
                .as_ref()
                .map(|p| (cfg.position(p).expect("validated"), i))
        })
        .collect();
    let value = serde_json::json!({
        "d": degree,
        "mults": mults,
        "clusters": clusters.iter().map(|(a, b)| vec![*a, *b]).collect::<Vec<_>>(),
    });
    Ok((value, degree, mults, clusters))
}

fn hex_digest(hasher: Sha256) -> String {
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for byte in digest {
        let _ = write!(hex, "{byte:02x}");
    }
    hex
}

fn cache_key(instance: &serde_json::Value, p: u32, seed: u64) -> String {
    let mut hasher = Sha256::new();
    hasher.update(instance.to_string().as_bytes());
    hasher.update(p.to_le_bytes());
    hasher.update(seed.to_le_bytes());
    hex_digest(hasher)
}

fn run_key(instance: &serde_json::Value, opts: &OracleOptions) -> String {
    let mut hasher = Sha256::new();
    hasher.update(instance.to_string().as_bytes());
    hasher.update(opts.p.to_le_bytes());
    hasher.update(opts.seed.to_le_bytes());
    hasher.update(opts.trials.to_le_bytes());
    hex_digest(hasher)
}

/// Reads a stored witness, checking it describes exactly this instance.
fn load_witness(
    path: &PathBuf,
    instance: &serde_json::Value,
) -> Result<Option<(CertifiedDim, serde_json::Value)>, OracleError> {
    if !path.exists() {
        return Ok(None);
    }
    let value: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    let matches = value.get("d") == instance.get("d")
        && value.get("mults") == instance.get("mults")
        && value.get("clusters") == instance.get("clusters");
    if !matches {
        return Err(OracleError::CacheMismatch { path: path.clone() });
    }
    let status = value["status"]
        .as_str()
        .and_then(status_from_str)
        .ok_or_else(|| OracleError::CacheMismatch { path: path.clone() })?;
    let result = CertifiedDim {
        dim: value["dim"].as_i64().unwrap_or(-2),
        status,
        trials_used: value["trials"].as_u64().unwrap_or(0) as u32,
        witness: RankWitness {
            p: value["p"].as_u64().unwrap_or(0) as u32,
            seed: value["seed"].as_u64().unwrap_or(0),
            rank: value["rank"].as_u64().unwrap_or(0) as usize,
        },
    };
    Ok(Some((result, value)))
}

/// Full witness record: the instance fields plus the result and a timestamp.
fn witness_json(instance: &serde_json::Value, result: &CertifiedDim) -> serde_json::Value {
    let timestamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let mut value = instance.clone();
    let fields = value.as_object_mut().expect("instance is an object");
    fields.insert("p".into(), serde_json::json!(result.witness.p));
    fields.insert("seed".into(), serde_json::json!(result.witness.seed));
    fields.insert("rank".into(), serde_json::json!(result.witness.rank));
    fields.insert("dim".into(), serde_json::json!(result.dim));
    fields.insert("status".into(), serde_json::json!(result.status.as_str()));
    fields.insert("trials".into(), serde_json::json!(result.trials_used));
    fields.insert("timestamp".into(), serde_json::json!(timestamp));
    value
}

fn store_witness(
    path: &PathBuf,
    witness: &serde_json::Value,
) -> Result<(), OracleError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, serde_json::to_string_pretty(witness)?)?;
    Ok(())
}

/// [`generic_dim`] behind the content-addressed witness store: a witness
/// recorded for the same instance and options short-circuits the rank
/// computation, and a fresh result is stored before returning. Unlike
/// [`certify_nonspecial`] there are no fallback attempts and an
/// UPPER-BOUND-ONLY reading is reported as such. The key covers the
/// instance together with every option that can change the result.
pub fn cached_generic_dim<T: Scalar>(
    l: &DivisorClass<T>,
    cfg: &Configuration,
    opts: &OracleOptions,
    cache_dir: Option<&std::path::Path>,
) -> Result<Certificate, OracleError> {
    let (instance, _, _, _) = instance_json(l, cfg)?;
    let key = run_key(&instance, opts);
    let witness_path = cache_dir.map(|dir| dir.join(format!("{key}.json")));
    if let Some(path) = &witness_path {
        if let Some((result, witness)) = load_witness(path, &instance)? {
            return Ok(Certificate {
                result,
                witness,
                witness_path: witness_path.clone(),
                cache_hit: true,
            });
        }
    }
    let result = generic_dim(l, cfg, opts)?;
    let witness = witness_json(&instance, &result);
    if let Some(path) = &witness_path {
        store_witness(path, &witness)?;
    }
    Ok(Certificate {
        result,
        witness,
        witness_path,
        cache_hit: false,
    })
}

fn status_from_str(s: &str) -> Option<CertStatus> {
    Some(match s {
        "CERTIFIED-NONSPECIAL" => CertStatus::CertifiedNonspecial,
        "CERTIFIED-EMPTY" => CertStatus::CertifiedEmpty,
        "UPPER-BOUND-ONLY" => CertStatus::UpperBoundOnly,
        "INCONCLUSIVE" => CertStatus::Inconclusive,
        _ => return None,
    })
}

/// Certifies non-speciality (or emptiness), retrying with fresh seeds and the
/// fallback prime before reporting INCONCLUSIVE; the best upper bound found
/// is kept either way. Witnesses are persisted under `cache_dir`, keyed by a
/// content hash of the instance together with the primary prime and base
/// seed; a cached witness short-circuits recomputation.
pub fn certify_nonspecial<T: Scalar>(
    l: &DivisorClass<T>,
    cfg: &Configuration,
    opts: &CertifyOptions,
) -> Result<Certificate, OracleError> {
    let (instance, _, _, _) = instance_json(l, cfg)?;
    let key = cache_key(&instance, opts.primes[0], opts.seed);
    let witness_path = opts
        .cache_dir
        .as_ref()
        .map(|dir| dir.join(format!("{key}.json")));

    if let Some(path) = &witness_path {
        if let Some((result, witness)) = load_witness(path, &instance)? {
            return Ok(Certificate {
                result,
                witness,
                witness_path: witness_path.clone(),
                cache_hit: true,
            });
        }
    }

    let attempts = [
        (opts.primes[0], opts.seed),
        (opts.primes[0], opts.seed.wrapping_add(0x9E37_79B9)),
        (opts.primes[1], opts.seed),
    ];
    let mut best: Option<CertifiedDim> = None;
    let mut trials_total = 0;
    for (p, seed) in attempts {
        let run = generic_dim(
            l,
            cfg,
            &OracleOptions {
                p,
                trials: opts.trials,
                seed,
            },
        )?;
        trials_total += run.trials_used;
        let certified = matches!(
            run.status,
            CertStatus::CertifiedNonspecial | CertStatus::CertifiedEmpty
        );
        if best.as_ref().is_none_or(|b| run.dim < b.dim) {
            best = Some(run);
        }
        if certified {
            break;
        }
    }
    let mut result = best.expect("attempts nonempty");
    result.trials_used = trials_total;
    if !matches!(
        result.status,
        CertStatus::CertifiedNonspecial | CertStatus::CertifiedEmpty
    ) {
        result.status = CertStatus::Inconclusive;
    }

    let witness = witness_json(&instance, &result);
    if let Some(path) = &witness_path {
        store_witness(path, &witness)?;
    }
    Ok(Certificate {
        result,
        witness,
        witness_path,
        cache_hit: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cremona::shgh_dim;
    use crate::lattice::virtual_dim;

    fn free_class(d: i64, mults: &[i64]) -> (Configuration, DivisorClass<i64>) {
        let cfg = Configuration::free(mults.len());
        let class = DivisorClass::aligned(d, mults, &cfg);
        (cfg, class)
    }

    #[test]
    fn sampling_is_deterministic_and_distinct() {
        let cfg = Configuration::free(10);
        let a = sample_config(&cfg, DEFAULT_PRIME, 1).unwrap();
        let b = sample_config(&cfg, DEFAULT_PRIME, 1).unwrap();
        assert_eq!(a, b);
        let coords: HashSet<(u32, u32)> = a
            .points
            .iter()
            .map(|(_, s)| match s {
                SamplePoint::Free { x, y } => (*x, *y),
                SamplePoint::Near { .. } => panic!("free configuration"),
            })
            .collect();
        assert_eq!(coords.len(), 10);
    }

    #[test]
    fn sampling_rejects_too_small_fields() {
        let cfg = Configuration::free(10);
        assert!(matches!(
            sample_config(&cfg, 2, 1),
            Err(OracleError::SamplingFailed { p: 2 })
        ));
    }

    #[test]
    fn cluster_config_samples_one_direction() {
        let cfg = Configuration::with_clusters(1, 1);
        let s = sample_config(&cfg, DEFAULT_PRIME, 3).unwrap();
        let kinds: Vec<bool> = s
            .points
            .iter()
            .map(|(_, sp)| matches!(sp, SamplePoint::Free { .. }))
            .collect();
        assert_eq!(kinds, vec![true, true, false]);
    }

    #[test]
    fn evaluation_row_for_a_line() {
        let (cfg, l) = free_class(1, &[1]);
        let config = ConfigFp {
            p: DEFAULT_PRIME,
            seed: 0,
            points: vec![(Label::from("p1"), SamplePoint::Free { x: 2, y: 3 })],
        };
        let m = build_matrix(&l, &cfg, &config).unwrap();
        assert_eq!((m.nrows, m.ncols), (1, 3));
        // Columns: 1, y, x.
        assert_eq!(m.row(0), &[1, 3, 2]);
        assert_eq!(m.provenance[0].order, (0, 0));
    }

    #[test]
    fn row_counts_follow_cluster_weights() {
        let (cfg, l) = free_class(4, &[2, 2, 2, 2, 2]);
        let config = sample_config(&cfg, DEFAULT_PRIME, 1).unwrap();
        let m = build_matrix(&l, &cfg, &config).unwrap();
        assert_eq!((m.nrows, m.ncols), (15, 15));

        let cfg = Configuration::with_clusters(4, 2);
        let l = DivisorClass::aligned(24, &[11, 11, 11, 11, 4, 4, 4, 4], &cfg);
        let config = sample_config(&cfg, DEFAULT_PRIME, 1).unwrap();
        let m = build_matrix(&l, &cfg, &config).unwrap();
        assert_eq!(m.nrows, 4 * 66 + 2 * (10 + 10));
        assert_eq!(m.ncols, 325);
    }

    #[test]
    fn rank_of_trivial_matrices() {
        let zero = ConditionMatrix {
            p: DEFAULT_PRIME,
            degree: 1,
            nrows: 2,
            ncols: 3,
            provenance: vec![],
            data: vec![0; 6],
        };
        assert_eq!(rank_mod_p(&zero), 0);
        let mut data = vec![0u32; 9];
        for i in 0..3 {
            data[i * 3 + i] = 1;
        }
        let id = ConditionMatrix {
            p: DEFAULT_PRIME,
            degree: 1,
            nrows: 3,
            ncols: 3,
            provenance: vec![],
            data,
        };
        assert_eq!(rank_mod_p(&id), 3);
    }

    #[test]
    fn five_double_points_on_quartics() {
        let (cfg, l) = free_class(4, &[2, 2, 2, 2, 2]);
        let config = sample_config(&cfg, DEFAULT_PRIME, 1).unwrap();
        let m = build_matrix(&l, &cfg, &config).unwrap();
        assert_eq!(rank_mod_p(&m), 14);
        let cert = generic_dim(&l, &cfg, &OracleOptions::default()).unwrap();
        assert_eq!(cert.dim, 0);
        assert_eq!(cert.status, CertStatus::UpperBoundOnly);
    }

    #[test]
    fn unique_cubic_through_nine_points() {
        let (cfg, l) = free_class(3, &[1; 9]);
        let cert = generic_dim(&l, &cfg, &OracleOptions::default()).unwrap();
        assert_eq!(cert.dim, 0);
        assert_eq!(cert.status, CertStatus::CertifiedNonspecial);
    }

    #[test]
    fn sextic_multiplicity_wall_is_empty() {
        let (cfg, l) = free_class(19, &[6; 10]);
        let cert = generic_dim(&l, &cfg, &OracleOptions::default()).unwrap();
        assert_eq!(cert.dim, -1);
        assert_eq!(cert.status, CertStatus::CertifiedEmpty);
    }

    #[test]
    fn empty_class_with_no_points() {
        let cfg = Configuration::free(0);
        let l: DivisorClass<i64> = DivisorClass::of_degree(0);
        let cert = generic_dim(&l, &cfg, &OracleOptions::default()).unwrap();
        assert_eq!(cert.dim, 0);
        assert_eq!(cert.status, CertStatus::CertifiedNonspecial);
    }

    #[test]
    fn directional_condition_cuts_the_pencil() {
        let cfg = Configuration::with_clusters(0, 1);
        let l = DivisorClass::aligned(1, &[1, 1], &cfg);
        let cert = generic_dim(&l, &cfg, &OracleOptions::default()).unwrap();
        assert_eq!(cert.dim, 0);
        assert_eq!(cert.status, CertStatus::CertifiedNonspecial);
    }

    #[test]
    fn cluster_instance_matches_reduction() {
        let cfg = Configuration::with_clusters(4, 2);
        let l = DivisorClass::aligned(24, &[11, 11, 11, 11, 4, 4, 4, 4], &cfg);
        let cert = generic_dim(&l, &cfg, &OracleOptions::default()).unwrap();
        assert_eq!(cert.dim, 20);
        assert_eq!(cert.status, CertStatus::CertifiedNonspecial);
        assert_eq!(shgh_dim(&l, &cfg).unwrap().dim, 20);
    }

    #[test]
    fn invalid_cluster_and_small_field_errors() {
        let cfg = Configuration::with_clusters(0, 1);
        let l = DivisorClass::aligned(3, &[0, 2], &cfg);
        let config = sample_config(&cfg, DEFAULT_PRIME, 1).unwrap();
        assert!(matches!(
            build_matrix(&l, &cfg, &config),
            Err(OracleError::InvalidCluster { .. })
        ));

        let (cfg, l) = free_class(5, &[1]);
        let config = sample_config(&cfg, 5, 1).unwrap();
        assert!(matches!(
            build_matrix(&l, &cfg, &config),
            Err(OracleError::FieldTooSmall { p: 5, degree: 5 })
        ));
    }

    #[test]
    fn one_more_simple_point_costs_at_most_one() {
        for seed in 1..4 {
            let (cfg, l) = free_class(5, &[2, 2, 1, 1]);
            let a = generic_dim(&l, &cfg, &OracleOptions { seed, ..Default::default() })
                .unwrap()
                .dim;
            let (cfg2, l2) = free_class(5, &[2, 2, 1, 1, 1]);
            let b = generic_dim(&l2, &cfg2, &OracleOptions { seed, ..Default::default() })
                .unwrap()
                .dim;
            assert!(b == a || b == a - 1);
        }
    }

    #[test]
    fn oracle_respects_expected_dim_floor() {
        let (cfg, l) = free_class(7, &[3, 3, 2, 2, 1]);
        let cert = generic_dim(&l, &cfg, &OracleOptions::default()).unwrap();
        let e = expected_dim(&l);
        assert!(cert.dim >= e);
        assert_eq!(virtual_dim(&l), 35 - 6 - 6 - 3 - 3 - 1);
    }

    #[test]
    fn certification_persists_and_replays() {
        let dir = tempfile::tempdir().unwrap();
        let (cfg, l) = free_class(7, &[2, 1, 1, 1, 1, 1, 1]);
        let opts = CertifyOptions {
            cache_dir: Some(dir.path().to_path_buf()),
            ..Default::default()
        };
        let first = certify_nonspecial(&l, &cfg, &opts).unwrap();
        assert!(!first.cache_hit);
        assert_eq!(first.result.status, CertStatus::CertifiedNonspecial);
        assert_eq!(first.result.dim, expected_dim(&l));
        let path = first.witness_path.clone().unwrap();
        assert!(path.exists());

        let again = certify_nonspecial(&l, &cfg, &opts).unwrap();
        assert!(again.cache_hit);
        assert_eq!(again.result, first.result);

        let w = first.result.witness;
        let replay = generic_dim(
            &l,
            &cfg,
            &OracleOptions {
                p: w.p,
                trials: 1,
                seed: w.seed,
            },
        )
        .unwrap();
        assert_eq!(replay.witness.rank, w.rank);
    }

    #[test]
    fn special_systems_stay_uncertified() {
        let (cfg, l) = free_class(2, &[2, 2]);
        let cert = certify_nonspecial(&l, &cfg, &CertifyOptions::default()).unwrap();
        assert_eq!(cert.result.status, CertStatus::Inconclusive);
        assert_eq!(cert.result.dim, 0);
    }
}
