//! Running slice builders against stored datasets, optionally adding the
//! result to a bench.

use serde::{Deserialize, Serialize};
use slicebench::slices::{BuilderRegistry, Provenance, SliceCategory};
use slicebench::Identifier;

use crate::error::{Result, ServiceError};
use crate::workspace::{check_id, Workspace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildRequest {
    pub dataset: String,
    /// Canonical builder spec including `columns`, e.g.
    /// `Length(intervals="[0%,10%]", columns="text")`.
    pub builder: String,
    /// Bench that receives the slices; its minor version is bumped.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub testbench: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceSummary {
    pub display_name: String,
    pub category: SliceCategory,
    pub size: usize,
    pub lineage: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildOutcome {
    pub slices: Vec<SliceSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub testbench: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub version: Option<String>,
}

pub fn run_builder(ws: &Workspace, req: &BuildRequest) -> Result<BuildOutcome> {
    let dataset = ws.load_dataset(&req.dataset)?;
    let spec = Identifier::parse(&req.builder)?;
    let registry = BuilderRegistry::new().with_cache(ws.cache()?);
    let (builder, columns) = registry.resolve(&spec)?;
    let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
    let out = builder.build(&dataset, &cols)?;
    let slices = out
        .slices
        .iter()
        .map(|s| SliceSummary {
            display_name: s.display_name.clone(),
            category: s.category,
            size: s.len(),
            lineage: s.lineage.clone(),
        })
        .collect();
    let mut outcome = BuildOutcome {
        slices,
        testbench: None,
        version: None,
    };
    if let Some(id) = &req.testbench {
        check_id("testbench", id)?;
        let bench = ws.load_bench(id)?;
        if bench.identifier.canonical() != *id {
            return Err(ServiceError::BadRequest(format!("bench directory `{id}` holds another bench")));
        }
        let next = bench.add_slices(out.slices)?.bump_minor();
        ws.save_bench(&next)?;
        outcome.testbench = Some(id.clone());
        outcome.version = Some(next.version.to_string());
    }
    Ok(outcome)
}
