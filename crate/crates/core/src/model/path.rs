use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One information channel about skill.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PathId {
    /// Semantic visual features.
    V,
    /// Tool motion.
    T,
    /// Skill proxy.
    P,
    /// Event or gesture workflow.
    E,
}

impl PathId {
    /// Canonical concatenation order.
    pub const ALL: [PathId; 4] = [PathId::V, PathId::T, PathId::P, PathId::E];

    pub fn letter(self) -> char {
        match self {
            PathId::V => 'V',
            PathId::T => 'T',
            PathId::P => 'P',
            PathId::E => 'E',
        }
    }

    pub fn from_letter(c: char) -> Result<Self> {
        match c.to_ascii_uppercase() {
            'V' => Ok(PathId::V),
            'T' => Ok(PathId::T),
            'P' => Ok(PathId::P),
            'E' => Ok(PathId::E),
            other => Err(Error::Config(format!("unknown path '{other}'"))),
        }
    }

    pub fn is_proxy(self) -> bool {
        self == PathId::P
    }

    /// Default embedding size: 20 / 4 / 1 / 4 for V / T / P / E.
    pub fn default_embed_dim(self) -> usize {
        match self {
            PathId::V => 20,
            PathId::T => 4,
            PathId::P => 1,
            PathId::E => 4,
        }
    }
}

impl fmt::Display for PathId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

/// A non-empty set of paths kept in canonical `V, T, P, E` order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PathSet(Vec<PathId>);

impl PathSet {
    pub fn new(ids: impl IntoIterator<Item = PathId>) -> Result<Self> {
        let mut v: Vec<PathId> = ids.into_iter().collect();
        v.sort();
        v.dedup();
        if v.is_empty() {
            return Err(Error::Config("path set must not be empty".into()));
        }
        Ok(Self(v))
    }

    pub fn all() -> Self {
        Self(PathId::ALL.to_vec())
    }

    pub fn ids(&self) -> &[PathId] {
        &self.0
    }

    pub fn contains(&self, id: PathId) -> bool {
        self.0.contains(&id)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = PathId> + '_ {
        self.0.iter().copied()
    }
}

impl FromStr for PathSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let ids = s
            .chars()
            .filter(|c| !matches!(c, ',' | ' '))
            .map(PathId::from_letter)
            .collect::<Result<Vec<_>>>()?;
        PathSet::new(ids)
    }
}

impl TryFrom<String> for PathSet {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<PathSet> for String {
    fn from(p: PathSet) -> String {
        p.to_string()
    }
}

impl fmt::Display for PathSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for id in &self.0 {
            write!(f, "{id}")?;
        }
        Ok(())
    }
}

/// Which of a path's functions carry parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LearnedFns {
    pub encoder: bool,
    pub scorer: bool,
    pub weigher: bool,
    pub predictor: bool,
}

/// Per-path configuration.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathSpec {
    pub id: PathId,
    pub input_dim: usize,
    pub embed_dim: usize,
    pub encoder_layers: usize,
    pub kernel_size: usize,
    pub hidden: usize,
    pub learned: LearnedFns,
}

impl PathSpec {
    /// Defaults: two kernel-3 conv layers, hidden width 16, default embedding size.
    ///
    /// The proxy path is fixed: identity encoder and scorer, uniform weights,
    /// no predictor.
    pub fn new(id: PathId, input_dim: usize) -> Self {
        let learned = !id.is_proxy();
        Self {
            id,
            input_dim,
            embed_dim: if learned {
                id.default_embed_dim()
            } else {
                input_dim
            },
            encoder_layers: 2,
            kernel_size: 3,
            hidden: 16,
            learned: LearnedFns {
                encoder: learned,
                scorer: learned,
                weigher: learned,
                predictor: learned,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.embed_dim == 0 {
            return Err(Error::Config(format!(
                "path {}: dimensions must be positive",
                self.id
            )));
        }
        if !self.learned.encoder && self.embed_dim != self.input_dim {
            return Err(Error::Config(format!(
                "path {}: identity encoder needs embed_dim == input_dim",
                self.id
            )));
        }
        if !self.learned.scorer && self.embed_dim != 1 {
            return Err(Error::Config(format!(
                "path {}: identity scorer needs a single-channel embedding, got {}",
                self.id, self.embed_dim
            )));
        }
        if self.learned.encoder && (self.encoder_layers == 0 || self.kernel_size % 2 == 0) {
            return Err(Error::Config(format!(
                "path {}: encoder needs at least one layer and an odd kernel",
                self.id
            )));
        }
        if (self.learned.scorer || self.learned.weigher || self.learned.predictor)
            && self.hidden == 0
        {
            return Err(Error::Config(format!(
                "path {}: hidden width must be positive",
                self.id
            )));
        }
        Ok(())
    }
}
