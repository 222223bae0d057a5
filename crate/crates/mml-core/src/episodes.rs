//! Episodic task construction: class-disjoint feature banks, seeded N-way
//! M-shot sampling, and a synthetic bank generator for desk-scale runs.
//!
//! ## Reproducibility contract
//!
//! Every random decision flows from an explicit 64-bit seed through a fixed,
//! platform-independent pipeline:
//!
//! * generator — ChaCha8 (`rand_chacha::ChaCha8Rng`), keyed with
//!   `seed_from_u64`;
//! * derived seeds — `mix_seed(seed, index)` applies the splitmix64
//!   finalizer to `seed + (index+1)·0x9E3779B97F4A7C15`;
//! * uniform integers — 64-bit rejection sampling ([`uniform_below`]);
//! * selection without replacement — partial Fisher–Yates over bank order;
//! * unit normals — Box–Muller on 53-bit uniforms ([`standard_normal`]).
//!
//! Identical seeds therefore produce bit-identical banks and episode streams
//! on every platform.

use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::descriptors::FeatureMap;
use crate::error::invalid_arg;
use crate::fmath;
use crate::Result;

/// Dataset split membership. Splits carry pairwise-disjoint class-id sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    /// Byte tag used by the bank file format.
    pub fn as_u8(self) -> u8 {
        match self {
            Split::Train => 0,
            Split::Val => 1,
            Split::Test => 2,
        }
    }

    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(Split::Train),
            1 => Some(Split::Val),
            2 => Some(Split::Test),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

/// One labelled class in a feature bank.
#[derive(Debug, Clone, PartialEq)]
pub struct BankClass {
    pub id: u32,
    pub split: Split,
    pub maps: Vec<FeatureMap>,
}

/// A collection of feature maps grouped by class, with disjoint
/// train/val/test label spaces and one shared map shape.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBank {
    shape: (usize, usize, usize),
    classes: Vec<BankClass>,
}

impl FeatureBank {
    /// Validates and wraps a set of classes: at least one class, at least
    /// one map per class, a single shared shape, and globally unique
    /// class ids (which makes the per-split id sets disjoint).
    pub fn new(classes: Vec<BankClass>) -> Result<Self> {
        let first = classes
            .first()
            .ok_or_else(|| invalid_arg!("feature bank needs at least one class"))?;
        let shape = first
            .maps
            .first()
            .ok_or_else(|| invalid_arg!("class {} has no images", first.id))?
            .shape();
        for class in &classes {
            if class.maps.is_empty() {
                return Err(invalid_arg!("class {} has no images", class.id));
            }
            for m in &class.maps {
                if m.shape() != shape {
                    return Err(invalid_arg!(
                        "class {} contains a map of shape {:?}, expected {:?}",
                        class.id,
                        m.shape(),
                        shape
                    ));
                }
            }
        }
        for (i, a) in classes.iter().enumerate() {
            for b in &classes[i + 1..] {
                if a.id == b.id {
                    return Err(invalid_arg!(
                        "class id {} appears more than once (splits {} and {})",
                        a.id,
                        a.split.name(),
                        b.split.name()
                    ));
                }
            }
        }
        Ok(Self { shape, classes })
    }

    /// `(C, H, W)` shared by every map in the bank.
    pub fn shape(&self) -> (usize, usize, usize) {
        self.shape
    }

    pub fn classes(&self) -> &[BankClass] {
        &self.classes
    }

    pub fn classes_in_split(&self, split: Split) -> Vec<&BankClass> {
        self.classes.iter().filter(|c| c.split == split).collect()
    }
}

/// Which bank entries an episode drew: class ids in selection order and
/// image indices (into each class's map list) for support and queries.
/// This is what episode-stream hashes are computed over.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpisodeDraw {
    pub class_ids: Vec<u32>,
    pub support_indices: Vec<Vec<u32>>,
    pub query_indices: Vec<Vec<u32>>,
}

impl EpisodeDraw {
    pub fn hash_into(&self, hasher: &mut StreamHasher) {
        for (pos, &id) in self.class_ids.iter().enumerate() {
            hasher.write_u32(id);
            for &i in &self.support_indices[pos] {
                hasher.write_u32(i);
            }
            for &i in &self.query_indices[pos] {
                hasher.write_u32(i);
            }
        }
    }
}

/// One N-way M-shot task: `support[n]` holds class `n`'s shots and each
/// query carries its true class index in `0..n_way`.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub n_way: usize,
    pub m_shot: usize,
    pub support: Vec<Vec<FeatureMap>>,
    pub queries: Vec<(FeatureMap, usize)>,
    pub draw: EpisodeDraw,
}

/// Samples one episode from the given split: `n_way` distinct classes
/// uniformly without replacement, then `m_shot + queries_per_class` distinct
/// images per class. Deterministic for a fixed seed.
pub fn sample_episode(
    bank: &FeatureBank,
    split: Split,
    n_way: usize,
    m_shot: usize,
    queries_per_class: usize,
    seed: u64,
) -> Result<Episode> {
    if n_way < 1 || m_shot < 1 || queries_per_class < 1 {
        return Err(invalid_arg!(
            "episode shape must be at least 1-way 1-shot with 1 query per class"
        ));
    }
    let classes = bank.classes_in_split(split);
    if classes.len() < n_way {
        return Err(invalid_arg!(
            "need {n_way} classes in split {}, bank has {} ({} short)",
            split.name(),
            classes.len(),
            n_way - classes.len()
        ));
    }
    let per_class = m_shot + queries_per_class;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let chosen = sample_without_replacement(&mut rng, classes.len(), n_way);
    let mut support = Vec::with_capacity(n_way);
    let mut queries = Vec::new();
    let mut draw = EpisodeDraw {
        class_ids: Vec::with_capacity(n_way),
        support_indices: Vec::with_capacity(n_way),
        query_indices: Vec::with_capacity(n_way),
    };

    for (pos, &ci) in chosen.iter().enumerate() {
        let class = classes[ci];
        if class.maps.len() < per_class {
            return Err(invalid_arg!(
                "class {} has {} images, need {per_class} ({} short) for {m_shot}-shot with {queries_per_class} queries",
                class.id,
                class.maps.len(),
                per_class - class.maps.len()
            ));
        }
        let picks = sample_without_replacement(&mut rng, class.maps.len(), per_class);
        let shots: Vec<FeatureMap> = picks[..m_shot]
            .iter()
            .map(|&i| class.maps[i].clone())
            .collect();
        for &i in &picks[m_shot..] {
            queries.push((class.maps[i].clone(), pos));
        }
        draw.class_ids.push(class.id);
        draw.support_indices
            .push(picks[..m_shot].iter().map(|&i| i as u32).collect());
        draw.query_indices
            .push(picks[m_shot..].iter().map(|&i| i as u32).collect());
        support.push(shots);
    }

    Ok(Episode {
        n_way,
        m_shot,
        support,
        queries,
        draw,
    })
}

/// Parameters of the synthetic feature-bank generator.
///
/// Class `i` draws a mean descriptor from `class_mean_scale·N(0, I)`; each
/// image's pixel descriptors are the class mean plus `noise_scale·N(0, I)`
/// noise. With `part_signal` on, each class additionally draws a spatial
/// pattern per channel (so part descriptors get class-specific directions)
/// and a permuted channel-gain profile (so class covariances differ).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub num_classes: usize,
    pub per_class: usize,
    pub shape: (usize, usize, usize),
    pub class_mean_scale: f64,
    pub noise_scale: f64,
    pub part_signal: bool,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let (c, h, w) = self.shape;
        if self.num_classes < 1 {
            return Err(invalid_arg!("num_classes must be >= 1"));
        }
        if self.per_class < 2 {
            return Err(invalid_arg!("per_class must be >= 2"));
        }
        if c < 1 || h < 1 || w < 1 {
            return Err(invalid_arg!("shape dimensions must be >= 1, got {:?}", self.shape));
        }
        if !self.class_mean_scale.is_finite() || self.class_mean_scale <= 0.0 {
            return Err(invalid_arg!(
                "class_mean_scale must be a finite value > 0, got {}",
                self.class_mean_scale
            ));
        }
        if !self.noise_scale.is_finite() || self.noise_scale <= 0.0 {
            return Err(invalid_arg!(
                "noise_scale must be a finite value > 0, got {}",
                self.noise_scale
            ));
        }
        Ok(())
    }
}

/// Generates a synthetic feature bank. Classes are assigned to splits by
/// index: `i % 5` of 0, 1, 2 → train, 3 → val, 4 → test (a 3:1:1 rotation),
/// so banks meant for 5-way evaluation on one split need `num_classes`
/// sized accordingly (e.g. 25 classes put 5 in test).
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<FeatureBank> {
    spec.validate()?;
    let (c, h, w) = spec.shape;
    let hw = h * w;
    let mut classes = Vec::with_capacity(spec.num_classes);
    for ci in 0..spec.num_classes {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(spec.seed, ci as u64));

        let mean: Vec<f64> = (0..c)
            .map(|_| spec.class_mean_scale * standard_normal(&mut rng))
            .collect();

        let (patterns, gains) = if spec.part_signal {
            let patterns: Vec<f64> = (0..c * hw).map(|_| standard_normal(&mut rng)).collect();
            let mut gains: Vec<f64> = if c > 1 {
                (0..c).map(|j| 0.5 + j as f64 / (c - 1) as f64).collect()
            } else {
                vec![1.0]
            };
            shuffle(&mut rng, &mut gains);
            (Some(patterns), gains)
        } else {
            (None, vec![1.0; c])
        };

        let mut maps = Vec::with_capacity(spec.per_class);
        for _ in 0..spec.per_class {
            let mut values = Vec::with_capacity(c * hw);
            for ch in 0..c {
                for p in 0..hw {
                    let noise = spec.noise_scale * standard_normal(&mut rng);
                    let signal = match &patterns {
                        Some(pat) => mean[ch] * pat[ch * hw + p],
                        None => mean[ch],
                    };
                    values.push((gains[ch] * (signal + noise)) as f32);
                }
            }
            maps.push(FeatureMap::new(c, h, w, values)?);
        }

        classes.push(BankClass {
            id: ci as u32,
            split: split_for_class_index(ci),
            maps,
        });
    }
    FeatureBank::new(classes)
}

/// Split rotation used by the synthetic generator.
pub fn split_for_class_index(i: usize) -> Split {
    match i % 5 {
        0..=2 => Split::Train,
        3 => Split::Val,
        _ => Split::Test,
    }
}

/// Derives an independent stream seed from a run seed and a task index:
/// the splitmix64 finalizer applied to `seed + (index+1)·0x9E3779B97F4A7C15`.
pub fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Unbiased uniform integer in `0..n` by 64-bit rejection sampling.
pub fn uniform_below(rng: &mut impl RngCore, n: usize) -> usize {
    debug_assert!(n > 0);
    let n = n as u64;
    // 2^64 mod n; values below this threshold would bias the modulus.
    let threshold = (u64::MAX % n).wrapping_add(1) % n;
    loop {
        let v = rng.next_u64();
        if v >= threshold {
            return (v % n) as usize;
        }
    }
}

/// First `k` indices of a partial Fisher–Yates pass over `0..n`.
fn sample_without_replacement(rng: &mut impl RngCore, n: usize, k: usize) -> Vec<usize> {
    debug_assert!(k <= n);
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = i + uniform_below(rng, n - i);
        idx.swap(i, j);
    }
    idx.truncate(k);
    idx
}

fn shuffle(rng: &mut impl RngCore, values: &mut [f64]) {
    for i in (1..values.len()).rev() {
        let j = uniform_below(rng, i + 1);
        values.swap(i, j);
    }
}

/// Standard normal deviate by Box–Muller on 53-bit uniforms in (0, 1).
pub fn standard_normal(rng: &mut impl RngCore) -> f64 {
    let u1 = ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0);
    let u2 = ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0);
    fmath::sqrt(-2.0 * fmath::ln(u1)) * libm::cos(2.0 * core::f64::consts::PI * u2)
}

/// FNV-1a 64-bit hasher with a stable, documented output — used to compare
/// episode streams across runs and sweep cells.
#[derive(Debug, Clone)]
pub struct StreamHasher(u64);

impl StreamHasher {
    pub fn new() -> Self {
        Self(0xcbf2_9ce4_8422_2325)
    }

    pub fn write_u32(&mut self, v: u32) {
        for byte in v.to_le_bytes() {
            self.0 ^= byte as u64;
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01B3);
        }
    }

    pub fn write_u64(&mut self, v: u64) {
        for byte in v.to_le_bytes() {
            self.0 ^= byte as u64;
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01B3);
        }
    }

    pub fn finish(&self) -> u64 {
        self.0
    }
}

impl Default for StreamHasher {
    fn default() -> Self {
        Self::new()
    }
}
