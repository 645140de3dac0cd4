//! Name-keyed registries for interchangeable strategies.
//!
//! Each strategy family (propagation models, PMF models, window schemes)
//! keeps a static table of constructors keyed by the name used in
//! configuration files. Lookups on unknown names fail with the list of
//! registered names so a typo is easy to spot.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

pub struct Registry<F: 'static> {
    kind: &'static str,
    entries: BTreeMap<&'static str, F>,
}

impl<F: 'static> Registry<F> {
    pub fn new(kind: &'static str) -> Self {
        Self {
            kind,
            entries: BTreeMap::new(),
        }
    }

    pub fn with(mut self, name: &'static str, ctor: F) -> Self {
        let previous = self.entries.insert(name, ctor);
        assert!(previous.is_none(), "duplicate {} '{}'", self.kind, name);
        self
    }

    pub fn get(&self, name: &str) -> Result<&F> {
        self.entries.get(name).ok_or_else(|| Error::UnknownStrategy {
            kind: self.kind,
            name: name.to_string(),
            expected: self.names().join(", "),
        })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }
}
