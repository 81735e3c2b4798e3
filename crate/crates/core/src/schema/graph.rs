use thiserror::Error;

use super::model::{QuestionCondition, SurveySchema};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown topic `{0}`")]
pub struct UnknownTopic(pub String);

/// Decision-tree view of one topic: every node of the topic with its
/// outgoing conditions, ascending by priority.
#[derive(Debug, Clone)]
pub struct TopicGraph<'a> {
    pub topic_id: &'a str,
    vertices: Vec<(&'a str, Vec<&'a QuestionCondition>)>,
}

impl<'a> TopicGraph<'a> {
    /// Node ids in document order.
    pub fn vertices(&self) -> impl Iterator<Item = &'a str> + '_ {
        self.vertices.iter().map(|(id, _)| *id)
    }

    pub fn outgoing(&self, node_id: &str) -> Option<&[&'a QuestionCondition]> {
        self.vertices
            .iter()
            .find(|(id, _)| *id == node_id)
            .map(|(_, edges)| edges.as_slice())
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.vertices.iter().map(|(_, e)| e.len()).sum()
    }

    /// `(node id, [condition ids])` pairs, handy for assertions and display.
    pub fn adjacency(&self) -> Vec<(&'a str, Vec<&'a str>)> {
        self.vertices
            .iter()
            .map(|(id, edges)| (*id, edges.iter().map(|c| c.id.as_str()).collect()))
            .collect()
    }
}

pub fn topic_graph<'a>(schema: &'a SurveySchema, topic_id: &str) -> Result<TopicGraph<'a>, UnknownTopic> {
    let topic = schema.topic(topic_id).ok_or_else(|| UnknownTopic(topic_id.to_owned()))?;
    let vertices = schema
        .nodes
        .iter()
        .filter(|n| n.topic_id == topic.id)
        .map(|n| (n.id.as_str(), schema.outgoing(&n.id)))
        .collect();
    Ok(TopicGraph {
        topic_id: &topic.id,
        vertices,
    })
}
