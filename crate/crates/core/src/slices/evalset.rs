use super::{with_columns, BuildOutput, Provenance, Slice, SliceBuilder, SliceCategory, SliceMembership};
use crate::dataset::{Column, Dataset};
use crate::error::{Error, Result};
use crate::identifier::Identifier;

/// Wraps an external dataset as an evaluation-set slice after checking it has
/// every `required` column with a compatible kind.
pub fn wrap_eval_set(dataset: &Dataset, name: &str, required: &[Column]) -> Result<Slice> {
    let mut problems = Vec::new();
    for want in required {
        match dataset.column(&want.name) {
            None => problems.push(format!("{} (missing)", want.name)),
            Some(have) if have.kind != want.kind => {
                problems.push(format!("{} (expected {}, found {})", want.name, want.kind.as_str(), have.kind.as_str()))
            }
            Some(_) => {}
        }
    }
    if !problems.is_empty() {
        return Err(Error::SchemaMismatch(problems));
    }
    let columns: Vec<&str> = required.iter().map(|c| c.name.as_str()).collect();
    let step = EvalSetStep { name: name.to_string() };
    let out = step.build(dataset, &columns)?;
    Ok(out.slices.into_iter().next().expect("one slice"))
}

/// Identity step recorded in evaluation-set lineage.
pub(super) struct EvalSetStep {
    pub(super) name: String,
}

impl SliceBuilder for EvalSetStep {
    fn identifier(&self) -> Identifier {
        Identifier::new("EvalSet").with("name", self.name.clone())
    }

    fn category(&self) -> SliceCategory {
        SliceCategory::Evalset
    }

    fn build_with_lineage(&self, dataset: &Dataset, columns: &[&str], parent: &Provenance) -> Result<BuildOutput> {
        let step = with_columns(self.identifier(), columns);
        let slice = Slice {
            data: dataset.with_identifier(step.clone()),
            category: SliceCategory::Evalset,
            lineage: parent.then(step),
            display_name: self.name.clone(),
        };
        Ok(BuildOutput {
            dataset: dataset.clone(),
            membership: SliceMembership::from_columns(&[vec![true; dataset.len()]], dataset.len(), vec![self.name.clone()]),
            slices: vec![slice],
        })
    }
}
