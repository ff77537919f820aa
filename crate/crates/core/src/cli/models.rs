use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// The three uni-modal models and their four fusion combinations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelKind {
    Bertc,
    Gcan,
    Vit,
    BertcVit,
    GcanVit,
    BertcGcan,
    BertcGcanVit,
}

impl ModelKind {
    pub const ALL: [ModelKind; 7] = [
        ModelKind::Bertc,
        ModelKind::Gcan,
        ModelKind::Vit,
        ModelKind::BertcVit,
        ModelKind::GcanVit,
        ModelKind::BertcGcan,
        ModelKind::BertcGcanVit,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Bertc => "bertc",
            ModelKind::Gcan => "gcan",
            ModelKind::Vit => "vit",
            ModelKind::BertcVit => "bertc-vit",
            ModelKind::GcanVit => "gcan-vit",
            ModelKind::BertcGcan => "bertc-gcan",
            ModelKind::BertcGcanVit => "bertc-gcan-vit",
        }
    }

    /// Member models of a fusion combination, empty for uni-modal ones.
    pub fn members(&self) -> &'static [ModelKind] {
        use ModelKind::*;
        match self {
            Bertc | Gcan | Vit => &[],
            BertcVit => &[Bertc, Vit],
            GcanVit => &[Gcan, Vit],
            BertcGcan => &[Bertc, Gcan],
            BertcGcanVit => &[Bertc, Gcan, Vit],
        }
    }

    pub fn is_fusion(&self) -> bool {
        !self.members().is_empty()
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = ModelKind::ALL.iter().map(|m| m.name()).collect();
                Error::invalid(format!("unknown model `{s}` (expected one of {})", names.join(", ")))
            })
    }
}
