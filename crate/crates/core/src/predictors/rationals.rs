//! Enumeration of the rationals in `[0, 1]` by increasing denominator:
//! `0, 1, 1/2, 1/3, 2/3, 1/4, 3/4, 1/5, ...`.

use num_integer::Integer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rational {
    pub num: u64,
    pub den: u64,
}

impl Rational {
    pub fn value(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl std::fmt::Display for Rational {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// Stateless accessor; positions are 1-based.
#[derive(Debug, Clone, Copy, Default)]
pub struct RationalEnumeration;

impl RationalEnumeration {
    pub fn iter(&self) -> RationalIter {
        RationalIter { num: 0, den: 1 }
    }

    /// The `i`-th rational, `i >= 1`.
    pub fn at(&self, i: usize) -> Rational {
        assert!(i >= 1, "positions are 1-based");
        self.iter().nth(i - 1).unwrap()
    }

    pub fn prefix(&self, n: usize) -> Vec<Rational> {
        self.iter().take(n).collect()
    }

    /// 1-based position of `num/den` (reduced on the fly).
    pub fn position(&self, num: u64, den: u64) -> usize {
        let g = num.gcd(&den);
        let target = Rational {
            num: num / g,
            den: den / g,
        };
        self.iter().position(|r| r == target).unwrap() + 1
    }
}

#[derive(Debug, Clone)]
pub struct RationalIter {
    num: u64,
    den: u64,
}

impl Iterator for RationalIter {
    type Item = Rational;

    fn next(&mut self) -> Option<Rational> {
        let out = Rational {
            num: self.num,
            den: self.den,
        };
        if self.den == 1 && self.num == 0 {
            self.num = 1;
        } else {
            loop {
                if self.den == 1 {
                    self.den = 2;
                    self.num = 1;
                } else if self.num + 1 < self.den {
                    self.num += 1;
                } else {
                    self.den += 1;
                    self.num = 1;
                }
                if self.num.gcd(&self.den) == 1 {
                    break;
                }
            }
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn prefix_order() {
        let got: Vec<String> = RationalEnumeration.prefix(11).iter().map(|r| r.to_string()).collect();
        assert_eq!(
            got,
            ["0/1", "1/1", "1/2", "1/3", "2/3", "1/4", "3/4", "1/5", "2/5", "3/5", "4/5"]
        );
        assert_eq!(RationalEnumeration.position(1, 3), 4);
        assert_eq!(RationalEnumeration.position(2, 4), 3);
    }

    #[test]
    fn injective_and_dense_by_denominator() {
        let prefix = RationalEnumeration.prefix(5000);
        let set: HashSet<_> = prefix.iter().copied().collect();
        assert_eq!(set.len(), prefix.len());
        for d in 1..=60u64 {
            let bound = (d * (d + 3) / 2) as usize;
            let head: HashSet<_> = prefix.iter().take(bound).copied().collect();
            for q in 1..=d {
                for p in 0..=q {
                    if p.gcd(&q) == 1 {
                        assert!(head.contains(&Rational { num: p, den: q }), "{p}/{q} beyond {bound}");
                    }
                }
            }
        }
    }
}
