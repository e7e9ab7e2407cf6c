//! Symbolic key orders.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::symbol::Sym;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("key order is cyclic through {}", keys.join(", "))]
pub struct CycleError {
    pub keys: Vec<String>,
}

/// Where a fresh key goes relative to a linear order of key classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    /// Strictly between class `i - 1` and class `i`.
    Gap(usize),
    /// Equal to every key of class `i`.
    Join(usize),
}

/// A strict order over equivalence classes of key symbols, kept
/// transitively closed.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct KeyOrder {
    class_of: BTreeMap<Sym, usize>,
    classes: Vec<Vec<Sym>>,
    less: Vec<Vec<bool>>,
}

impl KeyOrder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Merges `eq` pairs into classes, then closes `lt` transitively.
    pub fn closure(lt: &[(Sym, Sym)], eq: &[(Sym, Sym)]) -> Result<KeyOrder, CycleError> {
        let mut keys: Vec<Sym> = Vec::new();
        for (a, b) in lt.iter().chain(eq) {
            for k in [a, b] {
                if !keys.contains(k) {
                    keys.push(*k);
                }
            }
        }
        keys.sort();
        let idx: BTreeMap<Sym, usize> = keys.iter().enumerate().map(|(i, k)| (*k, i)).collect();
        let mut parent: Vec<usize> = (0..keys.len()).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            let mut y = x;
            while p[y] != r {
                let n = p[y];
                p[y] = r;
                y = n;
            }
            r
        }
        for (a, b) in eq {
            let (ra, rb) = (find(&mut parent, idx[a]), find(&mut parent, idx[b]));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
        let mut root_class: BTreeMap<usize, usize> = BTreeMap::new();
        let mut classes: Vec<Vec<Sym>> = Vec::new();
        let mut class_of = BTreeMap::new();
        for (i, k) in keys.iter().enumerate() {
            let r = find(&mut parent, i);
            let c = *root_class.entry(r).or_insert_with(|| {
                classes.push(Vec::new());
                classes.len() - 1
            });
            classes[c].push(*k);
            class_of.insert(*k, c);
        }
        let n = classes.len();
        let mut less = vec![vec![false; n]; n];
        for (a, b) in lt {
            less[class_of[a]][class_of[b]] = true;
        }
        for k in 0..n {
            for i in 0..n {
                if less[i][k] {
                    for j in 0..n {
                        if less[k][j] {
                            less[i][j] = true;
                        }
                    }
                }
            }
        }
        if let Some(c) = (0..n).find(|&i| less[i][i]) {
            let mut cyc: Vec<String> = (0..n)
                .filter(|&j| less[c][j] && less[j][c])
                .flat_map(|j| classes[j].iter().map(|k| k.to_string()))
                .collect();
            cyc.sort();
            return Err(CycleError { keys: cyc });
        }
        Ok(KeyOrder {
            class_of,
            classes,
            less,
        })
    }

    /// A linear order from classes listed smallest first.
    pub fn from_chain(chain: &[Vec<Sym>]) -> KeyOrder {
        let mut class_of = BTreeMap::new();
        for (i, c) in chain.iter().enumerate() {
            for k in c {
                class_of.insert(*k, i);
            }
        }
        let n = chain.len();
        let less = (0..n).map(|i| (0..n).map(|j| i < j).collect()).collect();
        KeyOrder {
            class_of,
            classes: chain.to_vec(),
            less,
        }
    }

    pub fn contains(&self, k: Sym) -> bool {
        self.class_of.contains_key(&k)
    }

    pub fn keys(&self) -> impl Iterator<Item = Sym> + '_ {
        self.class_of.keys().copied()
    }

    pub fn is_empty(&self) -> bool {
        self.class_of.is_empty()
    }

    pub fn lt(&self, a: Sym, b: Sym) -> bool {
        match (self.class_of.get(&a), self.class_of.get(&b)) {
            (Some(&x), Some(&y)) => self.less[x][y],
            _ => false,
        }
    }

    pub fn eq(&self, a: Sym, b: Sym) -> bool {
        a == b
            || matches!((self.class_of.get(&a), self.class_of.get(&b)), (Some(x), Some(y)) if x == y)
    }

    /// Ground `lt` pairs, sorted.
    pub fn less_than_pairs(&self) -> Vec<(Sym, Sym)> {
        let mut out = Vec::new();
        for (a, &ca) in &self.class_of {
            for (b, &cb) in &self.class_of {
                if self.less[ca][cb] {
                    out.push((*a, *b));
                }
            }
        }
        out
    }

    /// Ground `eq` pairs between distinct keys, sorted.
    pub fn equal_pairs(&self) -> Vec<(Sym, Sym)> {
        let mut out = Vec::new();
        for (a, &ca) in &self.class_of {
            for (b, &cb) in &self.class_of {
                if a != b && ca == cb {
                    out.push((*a, *b));
                }
            }
        }
        out
    }

    /// Classes smallest first when the order is total.
    pub fn chain(&self) -> Option<Vec<Vec<Sym>>> {
        let n = self.classes.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&i| (0..n).filter(|&j| self.less[j][i]).count());
        for w in order.windows(2) {
            if !self.less[w[0]][w[1]] {
                return None;
            }
        }
        Some(order.into_iter().map(|i| self.classes[i].clone()).collect())
    }

    /// Every position a fresh key may take in a total order.
    pub fn placements(&self) -> Vec<Placement> {
        let n = self.chain().map_or(0, |c| c.len());
        let mut out = Vec::with_capacity(2 * n + 1);
        for i in 0..=n {
            out.push(Placement::Gap(i));
            if i < n {
                out.push(Placement::Join(i));
            }
        }
        out
    }

    /// Inserts `key` at `placement`; the order must be total.
    pub fn insert(&self, key: Sym, placement: Placement) -> KeyOrder {
        let mut chain = self.chain().expect("placement needs a total key order");
        match placement {
            Placement::Gap(i) => chain.insert(i, vec![key]),
            Placement::Join(i) => chain[i].push(key),
        }
        KeyOrder::from_chain(&chain)
    }

    /// The total order restricted to the keys `keep` accepts.
    pub fn restrict(&self, keep: impl Fn(Sym) -> bool) -> KeyOrder {
        let chain: Vec<Vec<Sym>> = self
            .chain()
            .expect("restriction needs a total key order")
            .into_iter()
            .map(|c| c.into_iter().filter(|k| keep(*k)).collect::<Vec<_>>())
            .filter(|c| !c.is_empty())
            .collect();
        KeyOrder::from_chain(&chain)
    }

    /// Merges another total order whose keys were each placed relative
    /// to a common prefix; used when combining independent fresh keys.
    pub fn union(&self, other: &KeyOrder) -> Result<KeyOrder, CycleError> {
        let mut lt = self.less_than_pairs();
        lt.extend(other.less_than_pairs());
        let mut eq = self.equal_pairs();
        eq.extend(other.equal_pairs());
        for k in self.keys().chain(other.keys()) {
            eq.push((k, k));
        }
        KeyOrder::closure(&lt, &eq)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(x: &str) -> Sym {
        Sym::new(x)
    }

    #[test]
    fn transitive_closure() {
        let o = KeyOrder::closure(&[(s("kh"), s("kx")), (s("kx"), s("kt"))], &[]).unwrap();
        assert!(o.lt(s("kh"), s("kt")));
        assert!(!o.lt(s("kt"), s("kh")));
        assert_eq!(o.less_than_pairs().len(), 3);
    }

    #[test]
    fn empty_order() {
        let o = KeyOrder::closure(&[], &[]).unwrap();
        assert!(o.is_empty());
    }

    #[test]
    fn cycle_is_reported() {
        let err = KeyOrder::closure(&[(s("a"), s("b")), (s("b"), s("a"))], &[]).unwrap_err();
        assert_eq!(err.keys, vec!["a", "b"]);
    }

    #[test]
    fn eq_merges_classes() {
        let o = KeyOrder::closure(&[(s("a"), s("b"))], &[(s("b"), s("c"))]).unwrap();
        assert!(o.lt(s("a"), s("c")));
        assert!(o.eq(s("b"), s("c")));
        assert!(KeyOrder::closure(&[(s("a"), s("b"))], &[(s("a"), s("b"))]).is_err());
    }

    #[test]
    fn placements_cover_gaps_and_classes() {
        let o = KeyOrder::from_chain(&[vec![s("kh")], vec![s("kt")]]);
        assert_eq!(o.placements().len(), 5);
        let o2 = o.insert(s("kn"), Placement::Gap(1));
        assert!(o2.lt(s("kh"), s("kn")) && o2.lt(s("kn"), s("kt")));
        let o3 = o.insert(s("kn"), Placement::Join(1));
        assert!(o3.eq(s("kn"), s("kt")));
    }
}
