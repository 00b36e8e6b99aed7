//! Pegasus DAX subset: `<job id name runtime>` elements and
//! `<child ref>`/`<parent ref>` dependency blocks.

use std::collections::HashMap;
use std::fmt::Write as _;

use super::{Pattern, WorkflowError, WorkflowTemplate};

/// Capacity (compute units per second) that DAX runtimes are anchored to:
/// the fastest default catalog type reproduces the recorded runtime.
pub const REFERENCE_CAPACITY: f64 = 48.0;

pub fn parse_dax(xml_text: &str) -> Result<WorkflowTemplate, WorkflowError> {
    parse_dax_with_capacity(xml_text, REFERENCE_CAPACITY)
}

/// Parses a DAX document; each task's size is `runtime * reference_capacity`.
pub fn parse_dax_with_capacity(
    xml_text: &str,
    reference_capacity: f64,
) -> Result<WorkflowTemplate, WorkflowError> {
    let doc = roxmltree::Document::parse(xml_text).map_err(|e| WorkflowError::Parse {
        line: e.pos().row,
        message: e.to_string(),
    })?;
    let root = doc.root_element();
    let name = root.attribute("name").unwrap_or("dax").to_string();
    let pattern = guess_pattern(&name);

    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut sizes = Vec::new();
    for job in root.children().filter(|n| n.has_tag_name_local("job")) {
        let line = doc.text_pos_at(job.range().start).row;
        let id = job.attribute("id").ok_or_else(|| WorkflowError::Parse {
            line,
            message: "<job> without id attribute".into(),
        })?;
        let runtime = job
            .attribute("runtime")
            .ok_or_else(|| WorkflowError::InvalidJob {
                job: id.to_string(),
                message: "missing runtime attribute".into(),
            })?;
        let runtime: f64 = runtime.trim().parse().map_err(|_| WorkflowError::InvalidJob {
            job: id.to_string(),
            message: format!("runtime `{runtime}` is not a number"),
        })?;
        if !(runtime.is_finite() && runtime > 0.0) {
            return Err(WorkflowError::InvalidJob {
                job: id.to_string(),
                message: format!("runtime must be positive, got {runtime}"),
            });
        }
        if index.insert(id, sizes.len()).is_some() {
            return Err(WorkflowError::InvalidJob {
                job: id.to_string(),
                message: "duplicate job id".into(),
            });
        }
        sizes.push(runtime * reference_capacity);
    }

    let lookup = |r: &str| {
        index.get(r).copied().ok_or_else(|| WorkflowError::InvalidJob {
            job: r.to_string(),
            message: "dependency references an undeclared job".into(),
        })
    };
    let mut edges = Vec::new();
    for child in root.children().filter(|n| n.has_tag_name_local("child")) {
        let line = doc.text_pos_at(child.range().start).row;
        let child_ref = child.attribute("ref").ok_or_else(|| WorkflowError::Parse {
            line,
            message: "<child> without ref attribute".into(),
        })?;
        let to = lookup(child_ref)?;
        for parent in child.children().filter(|n| n.has_tag_name_local("parent")) {
            let parent_ref = parent.attribute("ref").ok_or_else(|| WorkflowError::Parse {
                line: doc.text_pos_at(parent.range().start).row,
                message: "<parent> without ref attribute".into(),
            })?;
            edges.push((lookup(parent_ref)?, to));
        }
    }
    WorkflowTemplate::from_edges(name, pattern, &sizes, &edges)
}

trait LocalName {
    fn has_tag_name_local(&self, name: &str) -> bool;
}

impl LocalName for roxmltree::Node<'_, '_> {
    fn has_tag_name_local(&self, name: &str) -> bool {
        self.is_element() && self.tag_name().name() == name
    }
}

fn guess_pattern(name: &str) -> Pattern {
    let lower = name.to_ascii_lowercase();
    Pattern::GENERATED
        .into_iter()
        .find(|p| lower.contains(&p.to_string().to_ascii_lowercase()))
        .unwrap_or(Pattern::Custom)
}

/// Writes a template as a DAX document with `runtime = size / reference_capacity`.
pub fn to_dax(template: &WorkflowTemplate, reference_capacity: f64) -> String {
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        out,
        "<adag xmlns=\"http://pegasus.isi.edu/schema/DAX\" name=\"{}\" jobCount=\"{}\">",
        xml_escape(template.name()),
        template.len()
    );
    for task in template.tasks() {
        let _ = writeln!(
            out,
            "  <job id=\"ID{:05}\" name=\"task{}\" runtime=\"{}\"/>",
            task.id,
            task.id,
            task.size / reference_capacity
        );
    }
    for task in template.tasks().iter().filter(|t| !t.predecessors.is_empty()) {
        let _ = writeln!(out, "  <child ref=\"ID{:05}\">", task.id);
        for p in &task.predecessors {
            let _ = writeln!(out, "    <parent ref=\"ID{p:05}\"/>");
        }
        out.push_str("  </child>\n");
    }
    out.push_str("</adag>\n");
    out
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}
