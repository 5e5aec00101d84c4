use std::collections::BTreeMap;

use super::strategies::{Greedy, LinUcb, LinUcbW, Policy, UniformRandom};
use crate::error::{Error, Result};

pub type PolicyFactory = fn() -> Box<dyn Policy>;

/// Name-keyed policy constructors, resolved at run time from configuration.
#[derive(Clone, Default)]
pub struct PolicyRegistry {
    factories: BTreeMap<String, PolicyFactory>,
}

impl PolicyRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    /// `linucb`, `linucbw`, `greedy` and `random`.
    pub fn with_builtins() -> Self {
        let mut reg = Self::empty();
        reg.insert("linucb", || Box::new(LinUcb));
        reg.insert("linucbw", || Box::new(LinUcbW));
        reg.insert("greedy", || Box::new(Greedy));
        reg.insert("random", || Box::new(UniformRandom));
        reg
    }

    fn insert(&mut self, name: &str, factory: PolicyFactory) {
        self.factories.insert(name.to_string(), factory);
    }

    pub fn register(&mut self, name: &str, factory: PolicyFactory) -> Result<()> {
        if self.factories.contains_key(name) {
            return Err(Error::invalid(format!(
                "policy '{name}' is already registered"
            )));
        }
        self.insert(name, factory);
        Ok(())
    }

    pub fn create(&self, name: &str) -> Result<Box<dyn Policy>> {
        self.factories.get(name).map(|f| f()).ok_or_else(|| {
            Error::invalid(format!(
                "unknown policy '{name}' (known: {})",
                self.names().collect::<Vec<_>>().join(", ")
            ))
        })
    }

    pub fn contains(&self, name: &str) -> bool {
        self.factories.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }
}
