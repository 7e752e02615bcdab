//! Inference with a trained model. No optimizer or dataset state is
//! involved: a [`Cadren`] loaded from a checkpoint scores any graph.

use std::collections::BTreeSet;

use cadren_autodiff::Tape;

use crate::graph::Graph;
use crate::metrics::RankedList;

use super::bundle::Cadren;
use super::forward::{forward, ForwardOutput};
use super::inputs::ExampleInputs;
use super::ModelError;

impl Cadren {
    pub fn prepare(&self, graph: &Graph, ca: &BTreeSet<String>) -> Result<ExampleInputs, ModelError> {
        ExampleInputs::build(graph, ca, self.provider(), &self.regression, &self.config)
    }

    /// Forward pass with no corruption, on frozen parameters.
    pub fn forward_inputs(&self, inputs: &ExampleInputs) -> Result<ForwardOutput, ModelError> {
        let mut tape = Tape::new();
        let bound = self.params.bind_frozen(&mut tape);
        let fv = forward(&mut tape, &bound, inputs, &self.config, None)?;
        Ok(ForwardOutput::collect(&tape, &fv))
    }

    /// `I_final` for every node, in graph order.
    pub fn score(&self, graph: &Graph, ca: &BTreeSet<String>) -> Result<Vec<f64>, ModelError> {
        let inputs = self.prepare(graph, ca)?;
        Ok(self.forward_inputs(&inputs)?.i_final)
    }

    /// Nodes by descending `I_final`, ties by ascending id.
    pub fn infer(&self, graph: &Graph, ca: &BTreeSet<String>) -> Result<RankedList, ModelError> {
        let scores = self.score(graph, ca)?;
        let ids: Vec<&str> = graph.nodes().iter().map(|n| n.id.as_str()).collect();
        Ok(RankedList::new(&ids, &scores))
    }
}
