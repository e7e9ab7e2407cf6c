//! Interned identifiers.
//!
//! Every constant, predicate and variable name is interned once and then
//! passed around as a `Sym`. Ordering compares the underlying text so that
//! canonical orders do not depend on interning order.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::sync::{LazyLock, RwLock};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Default)]
struct Interner {
    names: Vec<&'static str>,
    ids: HashMap<&'static str, u32>,
}

static INTERNER: LazyLock<RwLock<Interner>> = LazyLock::new(|| RwLock::new(Interner::default()));

thread_local! {
    // Names are append-only, so each thread keeps a lock-free copy.
    static NAMES: RefCell<Vec<&'static str>> = const { RefCell::new(Vec::new()) };
}

#[derive(Copy, Clone, PartialEq, Eq, Hash)]
pub struct Sym(u32);

impl Sym {
    pub fn new(text: &str) -> Sym {
        if let Some(&id) = INTERNER.read().expect("interner poisoned").ids.get(text) {
            return Sym(id);
        }
        let mut guard = INTERNER.write().expect("interner poisoned");
        if let Some(&id) = guard.ids.get(text) {
            return Sym(id);
        }
        let leaked: &'static str = Box::leak(text.to_owned().into_boxed_str());
        let id = guard.names.len() as u32;
        guard.names.push(leaked);
        guard.ids.insert(leaked, id);
        Sym(id)
    }

    pub fn as_str(self) -> &'static str {
        let i = self.0 as usize;
        NAMES.with(|local| {
            if let Some(s) = local.borrow().get(i) {
                return *s;
            }
            let mut local = local.borrow_mut();
            let global = INTERNER.read().expect("interner poisoned");
            let from = local.len();
            local.extend_from_slice(&global.names[from..]);
            local[i]
        })
    }

    /// Variables start with an uppercase letter or an underscore.
    pub fn is_variable_name(text: &str) -> bool {
        text.chars()
            .next()
            .is_some_and(|c| c.is_ascii_uppercase() || c == '_')
    }
}

impl Ord for Sym {
    fn cmp(&self, other: &Self) -> Ordering {
        if self.0 == other.0 {
            Ordering::Equal
        } else {
            self.as_str().cmp(other.as_str())
        }
    }
}

impl PartialOrd for Sym {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Sym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_str())
    }
}

impl fmt::Display for Sym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl From<&str> for Sym {
    fn from(text: &str) -> Self {
        Sym::new(text)
    }
}

impl Serialize for Sym {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Sym {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        Ok(Sym::new(&text))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interning_is_stable() {
        let a = Sym::new("edge");
        let b = Sym::new("edge");
        assert_eq!(a, b);
        assert_eq!(a.as_str(), "edge");
    }

    #[test]
    fn ordering_follows_text() {
        let z = Sym::new("zz_order_probe");
        let a = Sym::new("aa_order_probe");
        assert!(a < z);
    }
}
