use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A named, ordered, finite set of symbol labels.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Alphabet {
    name: String,
    symbols: Vec<String>,
}

impl Alphabet {
    pub fn new<N, I, S>(name: N, symbols: I) -> Result<Self>
    where
        N: Into<String>,
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let name = name.into();
        let symbols: Vec<String> = symbols.into_iter().map(Into::into).collect();
        if symbols.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "alphabet `{name}` must have at least one symbol"
            )));
        }
        if symbols.len() > usize::from(u8::MAX) + 1 {
            return Err(Error::InvalidParameter(format!(
                "alphabet `{name}` has {} symbols; at most 256 are supported",
                symbols.len()
            )));
        }
        for (i, s) in symbols.iter().enumerate() {
            if symbols[..i].contains(s) {
                return Err(Error::InvalidParameter(format!(
                    "alphabet `{name}` repeats symbol `{s}`"
                )));
            }
        }
        Ok(Self { name, symbols })
    }

    /// Alphabet with symbols `"0"`, `"1"`, ..., `size - 1`.
    pub fn indexed(name: impl Into<String>, size: usize) -> Result<Self> {
        Self::new(name, (0..size).map(|i| i.to_string()))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn size(&self) -> usize {
        self.symbols.len()
    }

    pub fn symbol(&self, index: usize) -> &str {
        &self.symbols[index]
    }

    pub fn index_of(&self, symbol: &str) -> Result<usize> {
        self.symbols
            .iter()
            .position(|s| s == symbol)
            .ok_or_else(|| Error::UnknownSymbol {
                alphabet: self.name.clone(),
                symbol: symbol.to_string(),
            })
    }

    /// Same symbols under a different name.
    pub fn renamed(&self, name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            symbols: self.symbols.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_and_duplicates() {
        assert!(Alphabet::new("A", Vec::<String>::new()).is_err());
        assert!(Alphabet::new("A", ["a", "b", "a"]).is_err());
        let a = Alphabet::new("A", ["a", "b"]).unwrap();
        assert_eq!(a.index_of("b").unwrap(), 1);
        assert!(matches!(a.index_of("c"), Err(Error::UnknownSymbol { .. })));
    }
}
