//! MeSH condition categories used as fixed effects, with the 2011
//! Medicare Part D spending (bn USD) that breaks ties between categories.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ConditionCategory {
    Cardiovascular,
    Mental,
    NutritionalMetabolic,
    Endocrine,
    Nervous,
    Respiratory,
    Digestive,
    Musculoskeletal,
    Neoplasms,
    Urogenital,
    Immune,
    PathologicalSigns,
    SkinConnective,
    ChemicallyInduced,
    Congenital,
    Other,
}

impl ConditionCategory {
    /// The fifteen named categories (excludes `Other`), in table order.
    pub const NAMED: [ConditionCategory; 15] = [
        ConditionCategory::Cardiovascular,
        ConditionCategory::Mental,
        ConditionCategory::NutritionalMetabolic,
        ConditionCategory::Endocrine,
        ConditionCategory::Nervous,
        ConditionCategory::Respiratory,
        ConditionCategory::Digestive,
        ConditionCategory::Musculoskeletal,
        ConditionCategory::Neoplasms,
        ConditionCategory::Urogenital,
        ConditionCategory::Immune,
        ConditionCategory::PathologicalSigns,
        ConditionCategory::SkinConnective,
        ConditionCategory::ChemicallyInduced,
        ConditionCategory::Congenital,
    ];

    pub fn code(self) -> &'static str {
        use ConditionCategory::*;
        match self {
            Cardiovascular => "C14",
            Mental => "F03",
            NutritionalMetabolic => "C18",
            Endocrine => "C19",
            Nervous => "C10",
            Respiratory => "C08/C09",
            Digestive => "C06",
            Musculoskeletal => "C05",
            Neoplasms => "C04",
            Urogenital => "C12/C13",
            Immune => "C20",
            PathologicalSigns => "C23",
            SkinConnective => "C17",
            ChemicallyInduced => "C25",
            Congenital => "C16",
            Other => "other",
        }
    }

    pub fn name(self) -> &'static str {
        use ConditionCategory::*;
        match self {
            Cardiovascular => "Cardiovascular Diseases",
            Mental => "Mental Disorders",
            NutritionalMetabolic => "Nutritional and Metabolic Diseases",
            Endocrine => "Endocrine System Diseases",
            Nervous => "Nervous System Diseases",
            Respiratory => "Respiratory Tract Diseases/Otorhinolaryngologic Diseases",
            Digestive => "Digestive System Diseases",
            Musculoskeletal => "Musculoskeletal Diseases",
            Neoplasms => "Neoplasms",
            Urogenital => "Male Urogenital Diseases/Female Urogenital Diseases and Pregnancy Complications",
            Immune => "Immune System Diseases",
            PathologicalSigns => "Pathological Conditions, Signs and Symptoms",
            SkinConnective => "Skin and Connective Tissue Diseases",
            ChemicallyInduced => "Chemically-Induced Disorders",
            Congenital => "Congenital, Hereditary, and Neonatal Diseases and Abnormalities",
            Other => "Other",
        }
    }

    /// Total Medicare D spending in 2011, bn USD.
    pub fn default_spending(self) -> f64 {
        use ConditionCategory::*;
        match self {
            Cardiovascular => 13.215,
            Mental => 12.336,
            NutritionalMetabolic => 8.957,
            Endocrine => 8.45,
            Nervous => 5.956,
            Respiratory => 5.945,
            Digestive => 4.377,
            Musculoskeletal => 2.888,
            Neoplasms => 2.64,
            Urogenital => 2.262,
            Immune => 1.355,
            PathologicalSigns => 0.812,
            SkinConnective => 0.683,
            ChemicallyInduced => 0.17,
            Congenital => 0.101,
            Other => 0.0,
        }
    }

    /// Category of a top-level MeSH tree prefix such as `C14`.
    pub fn from_tree_prefix(prefix: &str) -> Option<ConditionCategory> {
        use ConditionCategory::*;
        Some(match prefix {
            "C14" => Cardiovascular,
            "F03" => Mental,
            "C18" => NutritionalMetabolic,
            "C19" => Endocrine,
            "C10" => Nervous,
            "C08" | "C09" => Respiratory,
            "C06" => Digestive,
            "C05" => Musculoskeletal,
            "C04" => Neoplasms,
            "C12" | "C13" => Urogenital,
            "C20" => Immune,
            "C23" => PathologicalSigns,
            "C17" => SkinConnective,
            "C25" => ChemicallyInduced,
            "C16" => Congenital,
            _ => return None,
        })
    }
}

impl fmt::Display for ConditionCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for ConditionCategory {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("other") {
            return Ok(ConditionCategory::Other);
        }
        ConditionCategory::NAMED
            .into_iter()
            .find(|c| c.code() == s || c.code().split('/').any(|p| p == s))
            .ok_or_else(|| format!("unknown condition category `{s}`"))
    }
}

/// Maps MeSH terms to condition categories.
///
/// A term resolves to tree numbers either through the optional term map or
/// by being a tree number itself (`C14`, `C14.280.647`). Among all matched
/// categories the one with the largest spending wins; no match gives
/// `Other`.
#[derive(Debug, Clone)]
pub struct CategoryTable {
    spending: BTreeMap<ConditionCategory, f64>,
    term_tree_numbers: BTreeMap<String, BTreeSet<String>>,
}

impl Default for CategoryTable {
    fn default() -> Self {
        CategoryTable {
            spending: ConditionCategory::NAMED
                .into_iter()
                .map(|c| (c, c.default_spending()))
                .collect(),
            term_tree_numbers: BTreeMap::new(),
        }
    }
}

impl CategoryTable {
    pub fn with_spending(mut self, category: ConditionCategory, spending: f64) -> Self {
        if category != ConditionCategory::Other {
            self.spending.insert(category, spending);
        }
        self
    }

    pub fn with_term(mut self, term: &str, tree_number: &str) -> Self {
        self.term_tree_numbers
            .entry(term.trim().to_lowercase())
            .or_default()
            .insert(tree_number.trim().to_string());
        self
    }

    pub fn spending(&self, category: ConditionCategory) -> f64 {
        self.spending.get(&category).copied().unwrap_or(0.0)
    }

    fn categories_of_term(&self, term: &str) -> Vec<ConditionCategory> {
        let key = term.trim().to_lowercase();
        let mut out = Vec::new();
        if let Some(trees) = self.term_tree_numbers.get(&key) {
            out.extend(trees.iter().filter_map(|t| tree_category(t)));
        }
        if let Some(c) = tree_category(term.trim()) {
            out.push(c);
        }
        out
    }

    pub fn assign<'a>(&self, mesh: impl IntoIterator<Item = &'a String>) -> ConditionCategory {
        mesh.into_iter()
            .flat_map(|t| self.categories_of_term(t))
            .max_by(|a, b| {
                self.spending(*a)
                    .total_cmp(&self.spending(*b))
                    // deterministic on equal spending: earlier table entry wins
                    .then_with(|| b.cmp(a))
            })
            .unwrap_or(ConditionCategory::Other)
    }
}

fn tree_category(tree: &str) -> Option<ConditionCategory> {
    let bytes = tree.as_bytes();
    if bytes.len() < 3
        || !bytes[0].is_ascii_uppercase()
        || !bytes[1].is_ascii_digit()
        || !bytes[2].is_ascii_digit()
    {
        return None;
    }
    let rest = &tree[3..];
    if !rest.is_empty() && !rest.starts_with('.') {
        return None;
    }
    if !rest
        .split('.')
        .skip(1)
        .all(|part| !part.is_empty() && part.bytes().all(|b| b.is_ascii_digit()))
    {
        return None;
    }
    ConditionCategory::from_tree_prefix(&tree[..3])
}
