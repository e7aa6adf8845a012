//! Digit re-encoding maps such as binary → quaternary.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::real::Real;

/// Reads `x ∈ [0,1]` in base `in_base` (digits restricted to `in_digits`),
/// replaces every digit through `table` and reads the result in base
/// `out_base`, truncated after `depth` digits.
///
/// Points with two expansions take the non-terminating one, so `0.5` in
/// binary reads as `0.0111…`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DigitMap {
    pub in_base: u32,
    pub in_digits: Vec<u32>,
    pub out_base: u32,
    /// Pairs `(input digit, output digit)`.
    pub table: Vec<(u32, u32)>,
    pub depth: usize,
}

pub const DEFAULT_DIGIT_DEPTH: usize = 30;

impl DigitMap {
    pub fn new(in_base: u32, in_digits: Vec<u32>, out_base: u32, table: Vec<(u32, u32)>, depth: usize) -> Result<Self> {
        if in_base < 2 || out_base < 2 {
            return Err(invalid("base", "bases must be at least 2"));
        }
        if depth == 0 {
            return Err(invalid("depth", "digit depth must be at least 1"));
        }
        let mut sorted = in_digits.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.is_empty() || sorted.len() != in_digits.len() || sorted.iter().any(|&d| d >= in_base) {
            return Err(invalid("in_digits", "digits must be distinct and below the input base"));
        }
        for &d in &sorted {
            match table.iter().filter(|(a, _)| *a == d).count() {
                1 => {}
                0 => return Err(invalid("table", format!("no image for digit {d}"))),
                _ => return Err(invalid("table", format!("digit {d} listed twice"))),
            }
        }
        if table.iter().any(|&(a, b)| b >= out_base || !sorted.contains(&a)) {
            return Err(invalid("table", "entries must map allowed digits to output digits"));
        }
        let mut images: Vec<u32> = sorted.iter().map(|d| lookup(&table, *d)).collect();
        images.sort_unstable();
        images.dedup();
        if images.len() != sorted.len() {
            return Err(invalid("table", "digit table is not injective"));
        }
        Ok(Self {
            in_base,
            in_digits: sorted,
            out_base,
            table,
            depth,
        })
    }

    /// Binary digits `{0,1}` sent to quaternary `{0,2}`, mapping `[0,1]` onto
    /// the quarter Cantor set.
    pub fn binary_to_quaternary() -> Self {
        Self::new(2, vec![0, 1], 4, vec![(0, 0), (1, 2)], DEFAULT_DIGIT_DEPTH).expect("valid table")
    }

    /// Ternary digits `{0,2}` sent to quaternary `{0,2}`, mapping the middle
    /// third Cantor set onto the quarter Cantor set.
    pub fn ternary_to_quaternary() -> Self {
        Self::new(3, vec![0, 2], 4, vec![(0, 0), (2, 2)], DEFAULT_DIGIT_DEPTH).expect("valid table")
    }

    pub fn with_depth(mut self, depth: usize) -> Result<Self> {
        if depth == 0 {
            return Err(invalid("depth", "digit depth must be at least 1"));
        }
        self.depth = depth;
        Ok(self)
    }

    pub fn out_digit(&self, d: u32) -> u32 {
        lookup(&self.table, d)
    }

    /// True when every digit of the input base is allowed.
    pub fn uses_full_input_alphabet(&self) -> bool {
        self.in_digits.len() == self.in_base as usize
    }

    /// The first `depth` input digits of `x`.
    pub fn digits<T: Real>(&self, x: T) -> Result<Vec<u32>> {
        let slack = T::lit(1e-12);
        if !(x >= -slack && x <= T::one() + slack) {
            return Err(self.violation(x));
        }
        let b = self.in_base;
        let bt = T::of(b as usize);
        let mut y = x.max(T::zero()).min(T::one());
        let mut tol = T::lit(1e-9);
        let growth = bt;
        let mut drift = T::epsilon() * T::lit(8.0);
        let mut out = Vec::with_capacity(self.depth);
        for _ in 0..self.depth {
            let s = y * bt;
            // Largest digit strictly below s: the non-terminating choice.
            let raw = (s.ceil() - T::one()).max(T::zero()).min(T::of(b as usize - 1));
            let mut d = raw.to_u32().unwrap_or(0);
            if !self.in_digits.contains(&d) {
                let mut best: Option<(u32, T)> = None;
                for &c in &self.in_digits {
                    let r = s - T::of(c as usize);
                    let miss = if r < T::zero() {
                        -r
                    } else if r > T::one() {
                        r - T::one()
                    } else {
                        T::zero()
                    };
                    if best.is_none_or(|(_, m)| miss < m) {
                        best = Some((c, miss));
                    }
                }
                let (c, miss) = best.expect("nonempty digit set");
                if miss > tol.max(drift) {
                    return Err(self.violation(x));
                }
                d = c;
            }
            out.push(d);
            y = (s - T::of(d as usize)).max(T::zero()).min(T::one());
            drift *= growth;
            tol = tol.max(drift);
        }
        Ok(out)
    }

    /// Evaluates the map at `x`.
    pub fn eval<T: Real>(&self, x: T) -> Result<T> {
        let digits = self.digits(x)?;
        let ob = T::of(self.out_base as usize);
        let mut acc = T::zero();
        for &d in digits.iter().rev() {
            acc = (acc + T::of(self.out_digit(d) as usize)) / ob;
        }
        Ok(acc)
    }

    fn violation<T: Real>(&self, x: T) -> Error {
        Error::DomainViolation {
            map: "digit-map",
            point: vec![x.as_f64()],
        }
    }
}

fn lookup(table: &[(u32, u32)], d: u32) -> u32 {
    table
        .iter()
        .find(|(a, _)| *a == d)
        .map(|(_, b)| *b)
        .expect("digit present in table")
}
