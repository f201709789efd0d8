//! Name-keyed registries of interchangeable strategies.
//!
//! Each family (electrode chemistry, forecaster, dispatch solver) is a trait
//! object; a registry maps a stable name to a factory so that the variant can
//! be picked from a config file or the command line.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::Error;

type Factory<T, A> = Box<dyn Fn(&A) -> Box<T> + Send + Sync>;

struct Entry<T: ?Sized, A> {
    description: &'static str,
    build: Factory<T, A>,
}

/// Factories for one strategy family. `A` is the argument bundle handed to
/// every factory (options parsed from config).
pub struct Registry<T: ?Sized, A = ()> {
    kind: &'static str,
    entries: BTreeMap<&'static str, Entry<T, A>>,
}

impl<T: ?Sized, A> Registry<T, A> {
    pub fn new(kind: &'static str) -> Self {
        Self {
            kind,
            entries: BTreeMap::new(),
        }
    }

    /// Registers a factory; a later registration under the same name wins.
    pub fn register<F>(&mut self, name: &'static str, description: &'static str, build: F)
    where
        F: Fn(&A) -> Box<T> + Send + Sync + 'static,
    {
        self.entries.insert(
            name,
            Entry {
                description,
                build: Box::new(build),
            },
        );
    }

    pub fn with<F>(mut self, name: &'static str, description: &'static str, build: F) -> Self
    where
        F: Fn(&A) -> Box<T> + Send + Sync + 'static,
    {
        self.register(name, description, build);
        self
    }

    pub fn build(&self, name: &str, args: &A) -> Result<Box<T>, Error> {
        match self.entries.get(name) {
            Some(entry) => Ok((entry.build)(args)),
            None => Err(Error::UnknownStrategy {
                kind: self.kind,
                name: name.to_string(),
                available: self.names().collect::<Vec<_>>().join(", "),
            }),
        }
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.entries.keys().copied()
    }

    pub fn describe(&self) -> impl Iterator<Item = (&'static str, &'static str)> + '_ {
        self.entries.iter().map(|(k, e)| (*k, e.description))
    }

    pub fn kind(&self) -> &'static str {
        self.kind
    }
}

impl<T: ?Sized, A> fmt::Debug for Registry<T, A> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Registry")
            .field("kind", &self.kind)
            .field("entries", &self.entries.keys().collect::<Vec<_>>())
            .finish()
    }
}
