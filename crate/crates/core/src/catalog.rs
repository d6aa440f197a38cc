//! Catalog view of a knowledge base: which modules diagnose what.

use serde::{Deserialize, Serialize};

use crate::model::{Ident, KnowledgeBase};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropSummary {
    pub module: Ident,
    pub question_count: usize,
    /// Distinct diagnosis names in rule order.
    pub diagnoses: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KbSummary {
    pub title: String,
    pub version: u64,
    /// Every module except the entry module, in declaration order.
    pub crops: Vec<CropSummary>,
}

impl KbSummary {
    pub fn of(kb: &KnowledgeBase) -> KbSummary {
        let crops = kb
            .modules
            .iter()
            .filter(|m| m.name != kb.entry)
            .map(|m| {
                let mut diagnoses: Vec<String> = Vec::new();
                for d in m.diagnoses() {
                    if !diagnoses.contains(&d.name) {
                        diagnoses.push(d.name.clone());
                    }
                }
                CropSummary {
                    module: m.name.clone(),
                    question_count: m.questions.len(),
                    diagnoses,
                }
            })
            .collect();
        KbSummary {
            title: kb.title.clone(),
            version: kb.version,
            crops,
        }
    }

    pub fn crop(&self, module: &str) -> Option<&CropSummary> {
        self.crops.iter().find(|c| c.module == module)
    }
}
