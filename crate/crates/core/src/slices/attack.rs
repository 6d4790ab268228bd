use std::sync::Arc;

use serde_json::Value;

use super::{with_columns, BuildOutput, Provenance, Slice, SliceBuilder, SliceCategory, SliceMembership};
use crate::dataset::{Dataset, Example};
use crate::error::{Error, Result};
use crate::identifier::Identifier;

pub type PerturbFn = dyn Fn(&Example, &[&str]) -> std::result::Result<Example, String> + Send + Sync;

/// Wraps a pure example-to-example perturbation as a slice builder. Only the
/// selected columns are taken from the perturbed example, so labels and any
/// other columns always carry over unchanged.
#[derive(Clone)]
pub struct Perturbation {
    identifier: Identifier,
    category: SliceCategory,
    display_name: String,
    perturb: Arc<PerturbFn>,
}

impl Perturbation {
    pub fn new<F>(identifier: Identifier, category: SliceCategory, perturb: F) -> Result<Self>
    where
        F: Fn(&Example, &[&str]) -> std::result::Result<Example, String> + Send + Sync + 'static,
    {
        if !matches!(category, SliceCategory::Attack | SliceCategory::Transformation) {
            return Err(Error::InvalidParameter(format!(
                "perturbations produce attack or transformation slices, not {category}"
            )));
        }
        Ok(Perturbation {
            display_name: identifier.canonical(),
            identifier,
            category,
            perturb: Arc::new(perturb),
        })
    }

    /// Adapter for an external attack, identified by `identifier`.
    pub fn attack<F>(identifier: Identifier, perturb: F) -> Self
    where
        F: Fn(&Example, &[&str]) -> std::result::Result<Example, String> + Send + Sync + 'static,
    {
        Self::new(identifier, SliceCategory::Attack, perturb).expect("attack category is valid")
    }

    pub fn with_display_name(mut self, name: impl Into<String>) -> Self {
        self.display_name = name.into();
        self
    }
}

impl SliceBuilder for Perturbation {
    fn identifier(&self) -> Identifier {
        self.identifier.clone()
    }

    fn category(&self) -> SliceCategory {
        self.category
    }

    fn build_with_lineage(&self, dataset: &Dataset, columns: &[&str], parent: &Provenance) -> Result<BuildOutput> {
        dataset.check_columns(columns)?;
        let mut new_cols: Vec<Vec<Value>> = vec![Vec::with_capacity(dataset.len()); columns.len()];
        for row in 0..dataset.len() {
            let out = (self.perturb)(&dataset.row(row), columns).map_err(|message| Error::OpFailed {
                op: self.identifier.canonical(),
                row,
                message,
            })?;
            for (ci, col) in columns.iter().enumerate() {
                new_cols[ci].push(out.get(col).cloned().unwrap_or(Value::Null));
            }
        }
        let mut data = dataset.clone();
        for (col, values) in columns.iter().zip(new_cols) {
            data = data.replace_column(col, values)?;
        }
        let step = with_columns(self.identifier.clone(), columns);
        let data = data.with_identifier(step.clone());
        Ok(BuildOutput {
            dataset: dataset.clone(),
            membership: SliceMembership::from_columns(
                &[vec![true; dataset.len()]],
                dataset.len(),
                vec![self.display_name.clone()],
            ),
            slices: vec![Slice {
                data,
                category: self.category,
                lineage: parent.then(step),
                display_name: self.display_name.clone(),
            }],
        })
    }
}

/// Appends `suffix` (after a space) to every selected text column.
pub fn fixed_suffix(suffix: &str) -> Result<Perturbation> {
    if suffix.is_empty() {
        return Err(Error::InvalidParameter("suffix must be non-empty".into()));
    }
    let id = Identifier::new("FixedSuffix").with("suffix", suffix);
    let owned = suffix.to_string();
    let p = Perturbation::attack(id, move |ex, cols| {
        let mut values = ex.values().clone();
        for c in cols {
            match values.get_mut(*c) {
                Some(Value::String(s)) => {
                    s.push(' ');
                    s.push_str(&owned);
                }
                Some(Value::Null) | None => {}
                Some(_) => return Err(format!("column `{c}` is not text")),
            }
        }
        Ok(Example::new(values))
    });
    Ok(p.with_display_name(format!("FixedSuffix({suffix})")))
}
