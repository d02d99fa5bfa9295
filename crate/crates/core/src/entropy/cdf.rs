use crate::error::{Error, Result};

pub const FREQ_BITS: u32 = 16;
/// Every table's frequencies sum to this.
pub const FREQ_TOTAL: u32 = 1 << FREQ_BITS;

/// Cumulative frequencies `cum[0] = 0 < cum[1] < … < cum[K] = 65536`.
#[derive(Clone, Debug, Default)]
pub struct CdfTable {
    cum: Vec<u32>,
    scratch: Scratch,
}

/// Buffers reused by [`CdfTable::quantize_into`].
#[derive(Clone, Debug, Default)]
struct Scratch {
    freqs: Vec<u32>,
    rema: Vec<f64>,
    keys: Vec<u128>,
}

fn key(rema: f64, low: u64) -> u128 {
    (u128::from(rema.to_bits()) << 64) | u128::from(low)
}

impl PartialEq for CdfTable {
    fn eq(&self, other: &Self) -> bool {
        self.cum == other.cum
    }
}

impl Eq for CdfTable {}

impl CdfTable {
    pub fn from_frequencies(freqs: &[u32]) -> Result<Self> {
        if freqs.is_empty() || freqs.contains(&0) {
            return Err(Error::InvalidProbability("zero frequency".into()));
        }
        let mut cum = Vec::with_capacity(freqs.len() + 1);
        cum.push(0u32);
        let mut acc = 0u64;
        for &f in freqs {
            acc += u64::from(f);
            cum.push(acc.min(u64::from(u32::MAX)) as u32);
        }
        if acc != u64::from(FREQ_TOTAL) {
            return Err(Error::InvalidProbability(format!(
                "frequencies sum to {acc}"
            )));
        }
        Ok(Self {
            cum,
            scratch: Scratch::default(),
        })
    }

    /// Uniform table over `symbols` symbols (at most 65536).
    pub fn uniform(symbols: usize) -> Self {
        let base = FREQ_TOTAL as usize / symbols;
        let extra = FREQ_TOTAL as usize % symbols;
        let freqs: Vec<u32> = (0..symbols)
            .map(|s| (base + usize::from(s < extra)) as u32)
            .collect();
        Self::from_frequencies(&freqs).expect("uniform table is valid")
    }

    /// See [`quantize_probs`].
    pub fn from_probs(p: &[f64]) -> Result<Self> {
        let mut t = Self::default();
        t.quantize_into(p)?;
        Ok(t)
    }

    /// Recomputes this table from probabilities, reusing its allocation.
    pub fn quantize_into(&mut self, p: &[f64]) -> Result<()> {
        let k = p.len();
        if k == 0 || k > FREQ_TOTAL as usize {
            return Err(Error::InvalidProbability(format!("{k} symbols")));
        }
        let sum: f64 = p.iter().sum();
        if p.iter().any(|v| !v.is_finite() || *v < 0.0) || (sum - 1.0).abs() > 1e-5 {
            return Err(Error::InvalidProbability(format!("entries {p:?}")));
        }

        let scale = f64::from(FREQ_TOTAL);
        let Scratch { freqs, rema, keys } = &mut self.scratch;
        freqs.clear();
        rema.clear();
        let mut total: i64 = 0;
        for &v in p {
            let x = v * scale;
            // Truncation is floor for non-negative values.
            let f = x as u32;
            rema.push(x - f64::from(f));
            let f = f.max(1);
            freqs.push(f);
            total += i64::from(f);
        }

        let mut diff = i64::from(FREQ_TOTAL) - total;
        // Remainders are non-negative, so their bit patterns order like the
        // values; the low bits break ties toward the lowest symbol.
        if diff > 0 {
            keys.clear();
            keys.extend(
                rema.iter()
                    .enumerate()
                    .map(|(s, r)| key(*r, u64::MAX - s as u64)),
            );
        }
        // Largest remainders first.
        while diff > 0 {
            let n = (diff as usize).min(k);
            if n < k {
                keys.select_nth_unstable_by(n - 1, |a, b| b.cmp(a));
            }
            for &c in &keys[..n] {
                freqs[(u64::MAX - c as u64) as usize] += 1;
            }
            diff -= n as i64;
        }
        // Over-allocation only comes from the floor at 1; take it back from
        // the smallest remainders among symbols that can spare a count.
        while diff < 0 {
            keys.clear();
            keys.extend(
                (0..k)
                    .filter(|&s| freqs[s] > 1)
                    .map(|s| key(rema[s], s as u64)),
            );
            let n = ((-diff) as usize).min(keys.len());
            if n < keys.len() {
                keys.select_nth_unstable(n - 1);
            }
            for &c in &keys[..n] {
                freqs[c as u64 as usize] -= 1;
            }
            diff += n as i64;
        }

        self.cum.clear();
        self.cum.push(0);
        let mut acc = 0u32;
        for &f in freqs.iter() {
            acc += f;
            self.cum.push(acc);
        }
        debug_assert_eq!(acc, FREQ_TOTAL);
        Ok(())
    }

    pub fn symbols(&self) -> usize {
        self.cum.len() - 1
    }

    #[inline]
    pub fn cum(&self, s: usize) -> u32 {
        self.cum[s]
    }

    #[inline]
    pub fn freq(&self, s: usize) -> u32 {
        self.cum[s + 1] - self.cum[s]
    }

    pub fn cumulative(&self) -> &[u32] {
        &self.cum
    }

    /// Ideal code length of `s` under this table.
    pub fn cost_bits(&self, s: usize) -> f64 {
        f64::from(FREQ_BITS) - f64::from(self.freq(s)).log2()
    }

    /// Symbol whose interval contains `target` (`target < 65536`).
    #[inline]
    pub fn find(&self, target: u32) -> usize {
        // partition_point returns the first cum > target.
        self.cum[1..].partition_point(|&c| c <= target)
    }
}

/// Quantizes 16 probabilities to integer frequencies summing to 65536:
/// `floor(p · 65536)` floored at 1, then the total is corrected by largest
/// remainder (ties to the lowest index).
pub fn quantize_probs(p: &[f64; 16]) -> Result<CdfTable> {
    CdfTable::from_probs(p)
}
