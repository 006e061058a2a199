//! Per-sample attention records and a Graphviz overlay of one sample's
//! attention on the knowledge graph.

use crate::data::Sample;
use crate::error::Result;
use crate::graph::KnowledgeGraph;
use crate::math::softmax;
use crate::model::GrmModel;
use crate::scalar::Scalar;
use serde::Serialize;
use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttendedObject {
    pub object: String,
    pub alpha: f64,
    /// Knowledge-graph edge weight.
    pub weight: f64,
    /// Whether the object was detected above the model's threshold.
    pub detected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelationshipAttention {
    pub relationship: String,
    pub score: f64,
    pub probability: f64,
    /// Neighbor objects, highest attention first.
    pub objects: Vec<AttendedObject>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Explanation {
    pub id: u64,
    pub label: String,
    pub predicted: String,
    pub relationships: Vec<RelationshipAttention>,
}

impl Explanation {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("explanation serializes")
    }
}

pub fn explain<T: Scalar>(model: &GrmModel<T>, graph: &KnowledgeGraph, sample: &Sample<T>) -> Result<Explanation> {
    let pred = model.forward(sample, graph)?;
    let probs = softmax(&pred.scores);
    let eps1 = T::lit(model.config.eps1);
    let detected: Vec<usize> = sample.detections_above(eps1).map(|d| d.object).collect();
    let names = graph.object_names();
    let relationships = graph
        .relationship_names()
        .iter()
        .enumerate()
        .map(|(r, name)| RelationshipAttention {
            relationship: name.clone(),
            score: pred.scores[r].to_f64_lossy(),
            probability: probs[r].to_f64_lossy(),
            objects: pred
                .attention
                .ranked(r)
                .into_iter()
                .map(|(o, a)| AttendedObject {
                    object: names[o].clone(),
                    alpha: a.to_f64_lossy(),
                    weight: graph.weight(r, o),
                    detected: detected.contains(&o),
                })
                .collect(),
        })
        .collect();
    let rel = graph.relationship_names();
    Ok(Explanation {
        id: sample.id,
        label: rel[sample.label].clone(),
        predicted: rel[pred.argmax()].clone(),
        relationships,
    })
}

/// The graph with edges drawn by attention: pen width grows with `α`,
/// detected objects are filled and the predicted relationship is bold.
pub fn attention_dot(graph: &KnowledgeGraph, e: &Explanation) -> String {
    let m = graph.num_relationships();
    let mut out = format!("graph sample_{} {{\n  layout=neato;\n  overlap=false;\n", e.id);
    let _ = writeln!(out, "  label=\"sample {} label={} predicted={}\";", e.id, e.label, e.predicted);
    for (i, r) in e.relationships.iter().enumerate() {
        let style = if r.relationship == e.predicted { ", style=bold" } else { "" };
        let _ = writeln!(
            out,
            "  n{i} [label=\"{}\\np={:.3}\", shape=box, color=red{style}];",
            r.relationship, r.probability
        );
    }
    let detected: Vec<&str> = e
        .relationships
        .iter()
        .flat_map(|r| r.objects.iter().filter(|o| o.detected).map(|o| o.object.as_str()))
        .collect();
    for (o, name) in graph.object_names().iter().enumerate() {
        let fill = if detected.contains(&name.as_str()) { ", style=filled, fillcolor=lightblue" } else { "" };
        let _ = writeln!(out, "  n{} [label=\"{name}\", shape=ellipse, color=blue{fill}];", m + o);
    }
    let index: std::collections::HashMap<&str, usize> =
        graph.object_names().iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    for (i, r) in e.relationships.iter().enumerate() {
        for obj in &r.objects {
            let _ = writeln!(
                out,
                "  n{i} -- n{} [label=\"{:.2}\", penwidth={:.3}];",
                m + index[obj.object.as_str()],
                obj.alpha,
                0.3 + 4.0 * obj.alpha
            );
        }
    }
    out.push_str("}\n");
    out
}
