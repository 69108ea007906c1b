//! Symbols, indices and one-hot vectors.

use crate::{Error, Result};

/// Ordered set of distinct symbols, sorted ascending by code point.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Alphabet {
    symbols: Vec<char>,
}

impl Alphabet {
    /// The distinct symbols of `text`.
    pub fn from_text(text: &str) -> Result<Self> {
        if text.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        Ok(Self::from_symbols(text.chars()))
    }

    /// Sorts and deduplicates `symbols`.
    pub fn from_symbols(symbols: impl IntoIterator<Item = char>) -> Self {
        let mut symbols: Vec<char> = symbols.into_iter().collect();
        symbols.sort_unstable();
        symbols.dedup();
        Alphabet { symbols }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[char] {
        &self.symbols
    }

    pub fn symbol(&self, index: usize) -> Option<char> {
        self.symbols.get(index).copied()
    }

    pub fn index_of(&self, symbol: char) -> Option<usize> {
        self.symbols.binary_search(&symbol).ok()
    }

    pub fn encode(&self, text: &str) -> Result<SymbolSequence> {
        let indices = text
            .chars()
            .enumerate()
            .map(|(position, symbol)| {
                self.index_of(symbol)
                    .ok_or(Error::UnknownSymbol { symbol, position })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SymbolSequence {
            indices,
            alphabet_size: self.len(),
        })
    }

    pub fn decode(&self, seq: &SymbolSequence) -> Result<String> {
        seq.indices()
            .iter()
            .map(|&i| {
                self.symbol(i).ok_or(Error::IndexOutOfRange {
                    index: i,
                    size: self.len(),
                })
            })
            .collect()
    }

    pub fn to_text(&self) -> String {
        self.symbols.iter().collect()
    }
}

/// A sequence of symbol indices, each below `alphabet_size`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymbolSequence {
    indices: Vec<usize>,
    alphabet_size: usize,
}

impl SymbolSequence {
    pub fn new(indices: Vec<usize>, alphabet_size: usize) -> Result<Self> {
        if let Some(&index) = indices.iter().find(|&&i| i >= alphabet_size) {
            return Err(Error::IndexOutOfRange {
                index,
                size: alphabet_size,
            });
        }
        Ok(SymbolSequence {
            indices,
            alphabet_size,
        })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn into_indices(self) -> Vec<usize> {
        self.indices
    }
}

pub fn one_hot(index: usize, size: usize) -> Result<Vec<f64>> {
    if index >= size {
        return Err(Error::IndexOutOfRange { index, size });
    }
    let mut v = vec![0.0; size];
    v[index] = 1.0;
    Ok(v)
}
