use std::fmt;

/// A subset of `[K]` encoded as a bit mask; bit `i` is message/location `i`
/// (0-based). K is at most 32.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Subset(u32);

pub const MAX_K: usize = 32;

impl Subset {
    pub const EMPTY: Subset = Subset(0);

    pub fn from_mask(mask: u32) -> Self {
        Subset(mask)
    }

    pub fn mask(self) -> u32 {
        self.0
    }

    pub fn full(k: usize) -> Self {
        assert!(k <= MAX_K);
        if k == MAX_K {
            Subset(u32::MAX)
        } else {
            Subset((1u32 << k) - 1)
        }
    }

    pub fn singleton(i: usize) -> Self {
        Subset(1 << i)
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(items: I) -> Self {
        items.into_iter().fold(Subset::EMPTY, |s, i| s.with(i))
    }

    pub fn with(self, i: usize) -> Self {
        Subset(self.0 | (1 << i))
    }

    pub fn contains(self, i: usize) -> bool {
        i < MAX_K && self.0 & (1 << i) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_within(self, k: usize) -> bool {
        self.0 & !Subset::full(k).0 == 0
    }

    /// Members in increasing order.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut rest = self.0;
        std::iter::from_fn(move || {
            if rest == 0 {
                None
            } else {
                let i = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(i)
            }
        })
    }

    /// All non-empty subsets of `[k]`, ordered by mask.
    pub fn all_nonempty(k: usize) -> impl Iterator<Item = Subset> {
        (1..=Subset::full(k).0).map(Subset)
    }

    /// 1-based member list, the form used in files and on the wire.
    pub fn to_one_based(self) -> Vec<usize> {
        self.iter().map(|i| i + 1).collect()
    }

    pub fn from_one_based(items: &[usize], k: usize) -> Option<Self> {
        let mut s = Subset::EMPTY;
        for &i in items {
            if i == 0 || i > k {
                return None;
            }
            s = s.with(i - 1);
        }
        Some(s)
    }
}

/// Serialized as the sorted list of 1-based members.
impl serde::Serialize for Subset {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(self.to_one_based())
    }
}

impl<'de> serde::Deserialize<'de> for Subset {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let items = Vec::<usize>::deserialize(d)?;
        Subset::from_one_based(&items, MAX_K).ok_or_else(|| serde::de::Error::custom(format!("bad subset {items:?}")))
    }
}

impl fmt::Debug for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// Prints 1-based, e.g. `{1,3}`.
impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (n, i) in self.iter().enumerate() {
            if n > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}", i + 1)?;
        }
        f.write_str("}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn membership_and_display() {
        let u = Subset::from_indices([0, 2]);
        assert!(u.contains(0) && !u.contains(1) && u.contains(2));
        assert_eq!(u.len(), 2);
        assert_eq!(u.to_string(), "{1,3}");
        assert_eq!(u.iter().collect::<Vec<_>>(), vec![0, 2]);
        assert_eq!(Subset::from_one_based(&[1, 3], 3), Some(u));
        assert_eq!(Subset::from_one_based(&[4], 3), None);
    }

    #[test]
    fn enumerates_nonempty() {
        assert_eq!(Subset::all_nonempty(3).count(), 7);
        assert_eq!(Subset::full(3).len(), 3);
        assert!(Subset::full(3).is_within(3));
        assert!(!Subset::singleton(3).is_within(3));
    }
}
