//! Instrument class identifiers and the registry that names them.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Palette index of an instrument class. Index 0 is reserved for background.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassId(pub u32);

impl ClassId {
    pub const BLUNT_DISSECTOR: ClassId = ClassId(1);
    pub const CUP_FORCEPS: ClassId = ClassId(2);
    pub const KERRISONS: ClassId = ClassId(3);
    pub const PITUITARY_RONGEURS: ClassId = ClassId(4);

    /// The four instruments retained for analysis, in metric-catalogue order.
    pub const INSTRUMENTS: [ClassId; 4] = [
        Self::BLUNT_DISSECTOR,
        Self::CUP_FORCEPS,
        Self::KERRISONS,
        Self::PITUITARY_RONGEURS,
    ];
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Bidirectional mapping between class names and palette indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassRegistry {
    classes: BTreeMap<u32, String>,
}

impl Default for ClassRegistry {
    fn default() -> Self {
        let classes = [
            (1, "BluntDissector"),
            (2, "CupForceps"),
            (3, "Kerrisons"),
            (4, "PituitaryRongeurs"),
        ]
        .into_iter()
        .map(|(i, n)| (i, n.to_string()))
        .collect();
        Self { classes }
    }
}

impl ClassRegistry {
    pub fn new(classes: BTreeMap<u32, String>) -> Result<Self> {
        if classes.contains_key(&0) {
            return Err(Error::Config("class index 0 is reserved for background".into()));
        }
        Ok(Self { classes })
    }

    pub fn contains(&self, id: ClassId) -> bool {
        self.classes.contains_key(&id.0)
    }

    pub fn check(&self, id: ClassId) -> Result<ClassId> {
        if self.contains(id) {
            Ok(id)
        } else {
            Err(Error::UnknownClass(id.to_string()))
        }
    }

    pub fn name(&self, id: ClassId) -> Option<&str> {
        self.classes.get(&id.0).map(String::as_str)
    }

    /// Resolves a class by name (case-insensitive, ignoring spaces and
    /// underscores) or by its numeric index.
    pub fn lookup(&self, name: &str) -> Result<ClassId> {
        let norm = |s: &str| {
            s.chars()
                .filter(|c| !matches!(c, ' ' | '_' | '-'))
                .flat_map(char::to_lowercase)
                .collect::<String>()
        };
        let wanted = norm(name);
        if let Some((&id, _)) = self.classes.iter().find(|(_, n)| norm(n) == wanted) {
            return Ok(ClassId(id));
        }
        match name.trim().parse::<u32>() {
            Ok(id) if self.classes.contains_key(&id) => Ok(ClassId(id)),
            _ => Err(Error::UnknownClass(name.to_string())),
        }
    }

    pub fn ids(&self) -> impl Iterator<Item = ClassId> + '_ {
        self.classes.keys().map(|&k| ClassId(k))
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }
}
