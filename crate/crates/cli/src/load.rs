use std::path::Path;

use fairdiv::valuation::{PiecewiseConstant, SpecSegment, ValuationSpec};
use serde::Deserialize;

use crate::CliError;

/// Reads a JSON array of valuation specs. Syntax errors name the file, line
/// and column; schema errors name the JSON path of the offending field.
pub fn load_valuations(path: &Path) -> Result<Vec<PiecewiseConstant>, CliError> {
    let shown = path.display();
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Validation(format!("{shown}: {e}")))?;
    let items: Vec<serde_json::Value> = serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("{shown}:{}:{}: {e}", e.line(), e.column())))?;
    if items.is_empty() {
        return Err(CliError::Validation(format!("{shown}: no valuations")));
    }
    items
        .into_iter()
        .enumerate()
        .map(|(i, item)| {
            let spec =
                spec_of(item).map_err(|e| CliError::Validation(format!("{shown}: at [{i}]{e}")))?;
            spec.to_piecewise()
                .map_err(|e| CliError::Validation(format!("{shown}: at [{i}]: {e}")))
        })
        .collect()
}

#[derive(Deserialize)]
struct Segments {
    segments: Vec<SpecSegment>,
}

/// Dispatches on `type` by hand: a tagged-enum derive buffers its input and
/// would lose the path to a bad field. Errors start with the path suffix.
fn spec_of(mut item: serde_json::Value) -> Result<ValuationSpec, String> {
    let kind = match item.as_object_mut().map(|o| o.remove("type")) {
        Some(Some(serde_json::Value::String(kind))) => kind,
        Some(_) => return Err(".type: missing or not a string".into()),
        None => return Err(": expected an object".into()),
    };
    fn body<T: serde::de::DeserializeOwned>(item: serde_json::Value) -> Result<T, String> {
        serde_path_to_error::deserialize(item).map_err(|e| format!(".{}: {}", e.path(), e.inner()))
    }
    match kind.as_str() {
        "piecewise_constant" => Ok(ValuationSpec::PiecewiseConstant {
            segments: body::<Segments>(item)?.segments,
        }),
        "balanced_value_tree" => Ok(ValuationSpec::BalancedValueTree(body(item)?)),
        other => Err(format!(".type: unknown valuation type `{other}`")),
    }
}
