//! Strategies over the space of m-bit sign histories.
//!
//! A history of the `m` most recent signs is packed into an integer with the
//! most recent sign in bit 0 (`+1` is a set bit). A strategy is a lookup table
//! with one action per history, `P = 2^m` entries in total.

use std::collections::HashSet;

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};

/// Largest memory length accepted anywhere (tables of 2^20 entries).
pub const MAX_MEMORY: u32 = 20;

/// Default ceiling on `m` for full-space enumeration: 2^(2^4) = 65536 tables.
pub const DEFAULT_FSS_MAX_MEMORY: u32 = 4;

/// Above this the full space does not fit a 64-bit table index at all.
pub(crate) const FSS_HARD_MAX_MEMORY: u32 = 5;

fn check_memory(m: u32) -> Result<()> {
    if m == 0 || m > MAX_MEMORY {
        return Err(Error::config(
            "m",
            format!("memory length must be in 1..={MAX_MEMORY}, got {m}"),
        ));
    }
    Ok(())
}

/// The `m` most recent signs, packed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct History {
    m: u32,
    index: usize,
}

impl History {
    /// Packs `signs` (most recent first). Every entry must be -1 or +1.
    pub fn encode(signs: &[i8]) -> Result<Self> {
        let m = signs.len() as u32;
        if m == 0 || m > MAX_MEMORY {
            return Err(Error::Encoding(format!(
                "expected 1..={MAX_MEMORY} signs, got {}",
                signs.len()
            )));
        }
        let mut index = 0usize;
        for (k, &s) in signs.iter().enumerate() {
            match s {
                1 => index |= 1 << k,
                -1 => {}
                other => {
                    return Err(Error::Encoding(format!(
                        "sign {k} steps back is {other}, expected -1 or +1"
                    )))
                }
            }
        }
        Ok(History { m, index })
    }

    pub fn from_index(m: u32, index: usize) -> Result<Self> {
        check_memory(m).map_err(|_| Error::Encoding(format!("memory length {m} out of range")))?;
        if index >= 1 << m {
            return Err(Error::Encoding(format!(
                "index {index} out of range for m={m}"
            )));
        }
        Ok(History { m, index })
    }

    /// Signs, most recent first.
    pub fn decode(&self) -> Vec<i8> {
        (0..self.m)
            .map(|k| if self.index >> k & 1 == 1 { 1 } else { -1 })
            .collect()
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn memory(&self) -> u32 {
        self.m
    }

    /// Shifts `sign` in as the most recent entry; the oldest entry drops out.
    pub fn push(&mut self, sign: i8) {
        debug_assert!(sign == 1 || sign == -1, "history sign must be +-1");
        let mask = (1usize << self.m) - 1;
        self.index = ((self.index << 1) | usize::from(sign > 0)) & mask;
    }

    pub fn most_recent(&self) -> i8 {
        if self.index & 1 == 1 {
            1
        } else {
            -1
        }
    }
}

/// A lookup table from histories to actions.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Strategy {
    table: Vec<i8>,
    is_zero: bool,
}

impl Strategy {
    pub fn from_table(table: Vec<i8>) -> Result<Self> {
        let p = table.len();
        if p < 2 || !p.is_power_of_two() || p > 1 << MAX_MEMORY {
            return Err(Error::config(
                "strategy",
                format!("table length {p} is not 2^m for m in 1..={MAX_MEMORY}"),
            ));
        }
        if let Some(pos) = table.iter().position(|&a| a != 1 && a != -1) {
            return Err(Error::config(
                "strategy",
                format!("entry {pos} is {}, expected -1 or +1", table[pos]),
            ));
        }
        Ok(Strategy {
            table,
            is_zero: false,
        })
    }

    /// Builds the table whose entry `h` is +1 iff bit `h` of `bits` is set.
    pub fn from_bits(m: u32, bits: u64) -> Self {
        assert!(m <= 6, "bit-packed tables need m <= 6");
        let table = (0..1usize << m)
            .map(|h| if bits >> h & 1 == 1 { 1 } else { -1 })
            .collect();
        Strategy {
            table,
            is_zero: false,
        }
    }

    /// The stay-out strategy: every history maps to 0.
    pub fn zero(m: u32) -> Self {
        Strategy {
            table: vec![0; 1 << m],
            is_zero: true,
        }
    }

    pub fn action(&self, h: &History) -> i8 {
        self.table[h.index()]
    }

    pub fn table(&self) -> &[i8] {
        &self.table
    }

    pub fn is_zero(&self) -> bool {
        self.is_zero
    }

    pub fn memory(&self) -> u32 {
        self.table.len().trailing_zeros()
    }

    pub fn negated(&self) -> Self {
        Strategy {
            table: self.table.iter().map(|&a| -a).collect(),
            is_zero: self.is_zero,
        }
    }

    /// Fraction of histories on which the two tables disagree.
    pub fn hamming_distance(&self, other: &Strategy) -> f64 {
        assert_eq!(self.table.len(), other.table.len());
        let diff = self
            .table
            .iter()
            .zip(&other.table)
            .filter(|(a, b)| a != b)
            .count();
        diff as f64 / self.table.len() as f64
    }

    /// Compact label: the table as a string of `+`/`-` (`0` for the zero strategy),
    /// history index 0 first.
    pub fn label(&self) -> String {
        self.table
            .iter()
            .map(|&a| match a {
                1 => '+',
                -1 => '-',
                _ => '0',
            })
            .collect()
    }
}

/// Size of the full strategy space, `2^(2^m)`, if it fits in a `u64`.
pub fn fss_size(m: u32) -> Option<u64> {
    let p = 1u32.checked_shl(m)?;
    1u64.checked_shl(p)
}

/// Every table over m-bit histories, ordered by the table read as an integer.
pub fn generate_fss(m: u32) -> Result<Vec<Strategy>> {
    generate_fss_with_limit(m, DEFAULT_FSS_MAX_MEMORY)
}

pub fn generate_fss_with_limit(m: u32, max_memory: u32) -> Result<Vec<Strategy>> {
    check_memory(m)?;
    let limit = max_memory.min(FSS_HARD_MAX_MEMORY);
    if m > limit {
        return Err(Error::Capacity {
            what: format!("full strategy space for m={m} has 2^{} tables", 1u64 << m),
            limit: format!("m <= {limit}"),
        });
    }
    let count = fss_size(m).expect("checked above");
    Ok((0..count).map(|bits| Strategy::from_bits(m, bits)).collect())
}

/// Reduced strategy space: the Sylvester Walsh-Hadamard rows of order `2^m`
/// followed by their negations. Any two members are at normalized Hamming
/// distance 1/2, except a row and its negation (distance 1).
pub fn generate_rss(m: u32) -> Result<Vec<Strategy>> {
    check_memory(m)?;
    let p = 1usize << m;
    let rows: Vec<Strategy> = (0..p)
        .map(|i| {
            let table = (0..p)
                .map(|j| if (i & j).count_ones() % 2 == 0 { 1 } else { -1 })
                .collect();
            Strategy {
                table,
                is_zero: false,
            }
        })
        .collect();
    let negations: Vec<Strategy> = rows.iter().map(Strategy::negated).collect();
    Ok(rows.into_iter().chain(negations).collect())
}

/// Draws `s` distinct tables uniformly from the full space.
pub fn draw_strategies<R: Rng + ?Sized>(m: u32, s: usize, rng: &mut R) -> Result<Vec<Strategy>> {
    check_memory(m)?;
    if s == 0 {
        return Err(Error::config("s", "need at least one strategy per agent"));
    }
    let p = 1usize << m;
    if let Some(space) = fss_size(m) {
        if s as u64 > space {
            return Err(Error::Capacity {
                what: format!("{s} distinct strategies requested for m={m}"),
                limit: format!("{space} tables in the full space"),
            });
        }
    }
    if p <= 16 {
        let space = fss_size(m).expect("p <= 16") as usize;
        return Ok(index::sample(rng, space, s)
            .into_iter()
            .map(|bits| Strategy::from_bits(m, bits as u64))
            .collect());
    }
    // Space of at least 2^32 tables: rejection on the rare duplicate.
    let mut seen = HashSet::with_capacity(s);
    let mut out = Vec::with_capacity(s);
    while out.len() < s {
        let table: Vec<i8> = (0..p)
            .map(|_| if rng.random::<bool>() { 1 } else { -1 })
            .collect();
        if seen.insert(table.clone()) {
            out.push(Strategy {
                table,
                is_zero: false,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn encode_examples() {
        assert_eq!(History::encode(&[1]).unwrap().index(), 1);
        assert_eq!(History::encode(&[-1, -1, -1]).unwrap().index(), 0);
        // 1*2^0 + 0*2^1 + 1*2^2
        assert_eq!(History::encode(&[1, -1, 1]).unwrap().index(), 5);
    }

    #[test]
    fn encode_rejects_bad_input() {
        assert!(matches!(History::encode(&[]), Err(Error::Encoding(_))));
        assert!(matches!(History::encode(&[1, 0, -1]), Err(Error::Encoding(_))));
        assert!(matches!(History::encode(&[2]), Err(Error::Encoding(_))));
        assert!(History::from_index(3, 8).is_err());
    }

    #[test]
    fn encode_decode_exhaustive() {
        for m in 1..=10u32 {
            for idx in 0..1usize << m {
                let h = History::from_index(m, idx).unwrap();
                let back = History::encode(&h.decode()).unwrap();
                assert_eq!(back, h);
            }
        }
    }

    #[test]
    fn push_shifts_most_recent_into_bit_zero() {
        let mut h = History::encode(&[1, -1, 1]).unwrap();
        h.push(-1);
        assert_eq!(h.decode(), vec![-1, 1, -1]);
        h.push(1);
        assert_eq!(h.decode(), vec![1, -1, 1]);
        assert_eq!(h.most_recent(), 1);
    }

    #[test]
    fn actions() {
        let h = History::from_index(3, 5).unwrap();
        assert_eq!(Strategy::zero(3).action(&h), 0);
        assert!(Strategy::zero(3).is_zero());
        let plus = Strategy::from_table(vec![1; 8]).unwrap();
        for idx in 0..8 {
            assert_eq!(plus.action(&History::from_index(3, idx).unwrap()), 1);
        }
        let mut table = vec![1; 8];
        table[5] = -1;
        assert_eq!(Strategy::from_table(table).unwrap().action(&h), -1);
    }

    #[test]
    #[should_panic]
    fn action_out_of_range_panics() {
        let s = Strategy::from_table(vec![1, -1]).unwrap();
        s.action(&History::from_index(3, 6).unwrap());
    }

    #[test]
    fn fss_sizes_and_order() {
        assert_eq!(generate_fss(1).unwrap().len(), 4);
        assert_eq!(generate_fss(3).unwrap().len(), 256);
        let fss2 = generate_fss(2).unwrap();
        assert_eq!(fss2.len(), 16);
        for i in 0..fss2.len() {
            for j in i + 1..fss2.len() {
                assert_ne!(fss2[i], fss2[j]);
            }
        }
        assert_eq!(fss2[0].table(), &[-1, -1, -1, -1]);
        assert_eq!(fss2[1].table(), &[1, -1, -1, -1]);
        assert_eq!(fss2[15].table(), &[1, 1, 1, 1]);
    }

    #[test]
    fn fss_capacity_guard() {
        match generate_fss(5) {
            Err(Error::Capacity { limit, .. }) => assert!(limit.contains('4')),
            other => panic!("expected capacity error, got {other:?}"),
        }
        assert!(generate_fss_with_limit(6, 10).is_err());
    }

    #[test]
    fn rss_examples() {
        assert_eq!(generate_rss(3).unwrap().len(), 16);
        let mut rss1: Vec<_> = generate_rss(1).unwrap();
        let mut fss1 = generate_fss(1).unwrap();
        rss1.sort_by(|a, b| a.table().cmp(b.table()));
        fss1.sort_by(|a, b| a.table().cmp(b.table()));
        assert_eq!(rss1, fss1);

        let rss3 = generate_rss(3).unwrap();
        let mut pairs = 0;
        for i in 0..rss3.len() {
            for j in i + 1..rss3.len() {
                let d = rss3[i].hamming_distance(&rss3[j]);
                assert!(d == 0.5 || d == 1.0, "d={d}");
                pairs += 1;
            }
        }
        assert_eq!(pairs, 120);
    }

    #[test]
    fn draw_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut all = draw_strategies(1, 4, &mut rng).unwrap();
        all.sort_by(|a, b| a.table().cmp(b.table()));
        let mut fss = generate_fss(1).unwrap();
        fss.sort_by(|a, b| a.table().cmp(b.table()));
        assert_eq!(all, fss);

        let a = draw_strategies(3, 2, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = draw_strategies(3, 2, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);

        let d = draw_strategies(2, 16, &mut rng).unwrap();
        let distinct: HashSet<_> = d.iter().collect();
        assert_eq!(distinct.len(), 16);

        assert!(matches!(
            draw_strategies(2, 17, &mut rng),
            Err(Error::Capacity { .. })
        ));
    }

    #[test]
    fn draw_large_memory() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let d = draw_strategies(6, 10, &mut rng).unwrap();
        assert_eq!(d.len(), 10);
        assert!(d.iter().all(|s| s.table().len() == 64));
    }

    #[test]
    fn rejects_bad_tables() {
        assert!(Strategy::from_table(vec![1, 0]).is_err());
        assert!(Strategy::from_table(vec![1, 1, 1]).is_err());
    }
}
