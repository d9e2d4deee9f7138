//! Masked feed-forward networks induced by layered DAGs.
//!
//! Every DAG vertex becomes a hidden unit in the layer the layering assigned
//! to it. Weights live in dense per-layer-pair matrices with a binary mask of
//! the same shape; a masked-out entry holds weight 0 at all times. Layer 0
//! receives the full input, and every sink (in whatever layer it lives) is
//! wired densely to the output logits.

mod checkpoint;
mod init;
mod pass;
mod prune;

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Dag, LayeredDag};

pub use checkpoint::{CheckpointMeta, CHECKPOINT_MAGIC, CHECKPOINT_SCHEMA_VERSION};
pub use init::{init_weights, InitMethod};
pub use pass::{ForwardCache, Gradients};
pub(crate) use pass::argmax as argmax_of;
pub use prune::prune_random;

/// Endpoint of a weight group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LayerRef {
    Input,
    Hidden(usize),
    Output,
}

/// A dense weight matrix `target_units x source_units` and its mask.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightGroup {
    source: LayerRef,
    target: LayerRef,
    weights: Array2<f64>,
    mask: Array2<bool>,
}

impl WeightGroup {
    fn new(source: LayerRef, target: LayerRef, mask: Array2<bool>) -> Self {
        Self {
            source,
            target,
            weights: Array2::zeros(mask.raw_dim()),
            mask,
        }
    }

    pub fn source(&self) -> LayerRef {
        self.source
    }

    pub fn target(&self) -> LayerRef {
        self.target
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn mask(&self) -> &Array2<bool> {
        &self.mask
    }

    /// Both endpoints are hidden layers.
    pub fn is_hidden(&self) -> bool {
        matches!((self.source, self.target), (LayerRef::Hidden(_), LayerRef::Hidden(_)))
    }

    pub fn is_skip(&self) -> bool {
        matches!((self.source, self.target), (LayerRef::Hidden(s), LayerRef::Hidden(l)) if l > s + 1)
    }

    pub fn active_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    fn apply_mask(&mut self) {
        self.weights.zip_mut_with(&self.mask, |w, &m| {
            if !m {
                *w = 0.0;
            }
        });
    }

    fn mask_holds(&self) -> bool {
        self.weights.iter().zip(self.mask.iter()).all(|(&w, &m)| m || w == 0.0)
    }
}

static NEXT_NETWORK_ID: AtomicU64 = AtomicU64::new(1);

fn fresh_id() -> u64 {
    NEXT_NETWORK_ID.fetch_add(1, Ordering::Relaxed)
}

/// Feed-forward network with masked weight groups and ReLU hidden units.
#[derive(Debug)]
pub struct MaskedNetwork {
    input_dim: usize,
    output_dim: usize,
    layer_units: Vec<usize>,
    layer_vertices: Vec<Vec<usize>>,
    groups: Vec<WeightGroup>,
    /// One vector per hidden layer, then the output bias last.
    biases: Vec<Array1<f64>>,
    incoming: Vec<Vec<usize>>,
    outgoing: Vec<Vec<usize>>,
    id: u64,
    version: u64,
}

impl Clone for MaskedNetwork {
    fn clone(&self) -> Self {
        Self {
            input_dim: self.input_dim,
            output_dim: self.output_dim,
            layer_units: self.layer_units.clone(),
            layer_vertices: self.layer_vertices.clone(),
            groups: self.groups.clone(),
            biases: self.biases.clone(),
            incoming: self.incoming.clone(),
            outgoing: self.outgoing.clone(),
            id: fresh_id(),
            version: 0,
        }
    }
}

impl PartialEq for MaskedNetwork {
    fn eq(&self, other: &Self) -> bool {
        self.input_dim == other.input_dim
            && self.output_dim == other.output_dim
            && self.layer_units == other.layer_units
            && self.layer_vertices == other.layer_vertices
            && self.groups == other.groups
            && self.biases == other.biases
    }
}

impl MaskedNetwork {
    fn assemble(
        input_dim: usize,
        output_dim: usize,
        layer_vertices: Vec<Vec<usize>>,
        mut groups: Vec<WeightGroup>,
    ) -> Self {
        groups.sort_by_key(|g| (g.target, g.source));
        let layer_units: Vec<usize> = layer_vertices.iter().map(Vec::len).collect();
        let depth = layer_units.len();
        let mut biases: Vec<Array1<f64>> = layer_units.iter().map(|&n| Array1::zeros(n)).collect();
        biases.push(Array1::zeros(output_dim));
        let mut incoming = vec![Vec::new(); depth + 1];
        let mut outgoing = vec![Vec::new(); depth];
        for (i, g) in groups.iter().enumerate() {
            match g.target {
                LayerRef::Hidden(l) => incoming[l].push(i),
                LayerRef::Output => incoming[depth].push(i),
                LayerRef::Input => unreachable!("no group targets the input"),
            }
            if let LayerRef::Hidden(s) = g.source {
                outgoing[s].push(i);
            }
        }
        Self {
            input_dim,
            output_dim,
            layer_units,
            layer_vertices,
            groups,
            biases,
            incoming,
            outgoing,
            id: fresh_id(),
            version: 0,
        }
    }

    /// Fully connected stack `input -> hidden[0] -> ... -> hidden[k-1] -> output`.
    /// Hidden units are numbered consecutively layer by layer.
    pub fn dense(input_dim: usize, hidden: &[usize], output_dim: usize) -> Result<Self> {
        if hidden.is_empty() || hidden.contains(&0) {
            return Err(Error::InvalidParameter("dense network needs non-empty hidden layers".into()));
        }
        if input_dim == 0 || output_dim == 0 {
            return Err(Error::InvalidParameter("input and output dimensions must be positive".into()));
        }
        let mut next = 0;
        let layer_vertices: Vec<Vec<usize>> = hidden
            .iter()
            .map(|&n| {
                let ids = (next..next + n).collect();
                next += n;
                ids
            })
            .collect();
        let mut groups = vec![WeightGroup::new(
            LayerRef::Input,
            LayerRef::Hidden(0),
            Array2::from_elem((hidden[0], input_dim), true),
        )];
        for l in 1..hidden.len() {
            groups.push(WeightGroup::new(
                LayerRef::Hidden(l - 1),
                LayerRef::Hidden(l),
                Array2::from_elem((hidden[l], hidden[l - 1]), true),
            ));
        }
        groups.push(WeightGroup::new(
            LayerRef::Hidden(hidden.len() - 1),
            LayerRef::Output,
            Array2::from_elem((output_dim, hidden[hidden.len() - 1]), true),
        ));
        Ok(Self::assemble(input_dim, output_dim, layer_vertices, groups))
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn layer_units(&self) -> &[usize] {
        &self.layer_units
    }

    /// Graph vertex id of every unit, per layer.
    pub fn layer_vertices(&self) -> &[Vec<usize>] {
        &self.layer_vertices
    }

    pub fn depth(&self) -> usize {
        self.layer_units.len()
    }

    pub fn hidden_units(&self) -> usize {
        self.layer_units.iter().sum()
    }

    pub fn groups(&self) -> &[WeightGroup] {
        &self.groups
    }

    pub fn biases(&self) -> &[Array1<f64>] {
        &self.biases
    }

    pub(crate) fn version_key(&self) -> (u64, u64) {
        (self.id, self.version)
    }

    fn touch(&mut self) {
        self.version += 1;
    }

    /// Sets one weight; masked-out positions are rejected.
    pub fn set_weight(&mut self, group: usize, row: usize, col: usize, value: f64) -> Result<()> {
        let g = self
            .groups
            .get_mut(group)
            .ok_or_else(|| Error::InvalidParameter(format!("no group {group}")))?;
        match g.mask.get((row, col)) {
            Some(true) => {
                g.weights[(row, col)] = value;
                self.touch();
                Ok(())
            }
            Some(false) => Err(Error::Precondition(format!(
                "position ({row}, {col}) of group {group} is masked"
            ))),
            None => Err(Error::InvalidParameter(format!("position ({row}, {col}) out of range"))),
        }
    }

    /// Mutable access to a bias vector (hidden layers first, output last).
    pub fn bias_mut(&mut self, layer: usize) -> &mut Array1<f64> {
        self.touch();
        &mut self.biases[layer]
    }

    /// Visits every trainable tensor: group weights (masked) then biases.
    pub(crate) fn for_each_param_mut(
        &mut self,
        mut weights: impl FnMut(usize, &mut Array2<f64>, &Array2<bool>),
        mut biases: impl FnMut(usize, &mut Array1<f64>),
    ) {
        self.touch();
        for (i, g) in self.groups.iter_mut().enumerate() {
            weights(i, &mut g.weights, &g.mask);
        }
        for (i, b) in self.biases.iter_mut().enumerate() {
            biases(i, b);
        }
    }

    /// Re-zeroes every masked-out weight.
    pub fn enforce_masks(&mut self) {
        self.touch();
        self.groups.iter_mut().for_each(WeightGroup::apply_mask);
    }

    /// Checks that every masked-out position holds weight zero.
    pub fn check_masks(&self) -> Result<()> {
        match self.groups.iter().position(|g| !g.mask_holds()) {
            Some(group) => Err(Error::MaskViolation { group }),
            None => Ok(()),
        }
    }

    /// Active mask entries plus bias lengths.
    pub fn param_count(&self) -> usize {
        self.groups.iter().map(WeightGroup::active_count).sum::<usize>()
            + self.biases.iter().map(Array1::len).sum::<usize>()
    }

    /// Active entries among hidden-to-hidden groups.
    pub fn hidden_connection_count(&self) -> usize {
        self.groups.iter().filter(|g| g.is_hidden()).map(WeightGroup::active_count).sum()
    }

    /// Binary masks of all groups, in group order.
    pub fn mask_pattern(&self) -> Vec<Array2<bool>> {
        self.groups.iter().map(|g| g.mask.clone()).collect()
    }
}

/// Builds the masked network for a layered DAG.
pub fn build_network(ld: &LayeredDag, input_dim: usize, output_dim: usize) -> Result<MaskedNetwork> {
    if ld.vertex_count() == 0 {
        return Err(Error::InvalidParameter("layered DAG has no vertices".into()));
    }
    if input_dim == 0 || output_dim == 0 {
        return Err(Error::InvalidParameter("input and output dimensions must be positive".into()));
    }
    let layers = ld.layers();
    let mut position = vec![0usize; ld.vertex_count()];
    for layer in layers {
        for (i, &v) in layer.iter().enumerate() {
            position[v] = i;
        }
    }

    let mut groups = vec![WeightGroup::new(
        LayerRef::Input,
        LayerRef::Hidden(0),
        Array2::from_elem((layers[0].len(), input_dim), true),
    )];

    let mut hidden: BTreeMap<(usize, usize), Array2<bool>> = BTreeMap::new();
    for l in 1..layers.len() {
        hidden.insert((l - 1, l), Array2::from_elem((layers[l].len(), layers[l - 1].len()), false));
    }
    for (u, v) in ld.dag().edges() {
        let (s, l) = (ld.layer_index(u), ld.layer_index(v));
        let mask = hidden
            .entry((s, l))
            .or_insert_with(|| Array2::from_elem((layers[l].len(), layers[s].len()), false));
        mask[(position[v], position[u])] = true;
    }
    groups.extend(
        hidden
            .into_iter()
            .map(|((s, l), mask)| WeightGroup::new(LayerRef::Hidden(s), LayerRef::Hidden(l), mask)),
    );

    for (l, layer) in layers.iter().enumerate() {
        let mut mask = Array2::from_elem((output_dim, layer.len()), false);
        let mut any = false;
        for (i, &v) in layer.iter().enumerate() {
            if ld.dag().out_degree(v) == 0 {
                mask.column_mut(i).fill(true);
                any = true;
            }
        }
        if any {
            groups.push(WeightGroup::new(LayerRef::Hidden(l), LayerRef::Output, mask));
        }
    }

    Ok(MaskedNetwork::assemble(input_dim, output_dim, layers.to_vec(), groups))
}

/// The DAG formed by the hidden units and the active hidden-group entries.
pub fn network_to_graph(net: &MaskedNetwork) -> Result<Dag> {
    let n = net.layer_vertices.iter().flatten().max().map_or(0, |m| m + 1);
    let mut edges = Vec::with_capacity(net.hidden_connection_count());
    for g in net.groups.iter().filter(|g| g.is_hidden()) {
        let (LayerRef::Hidden(s), LayerRef::Hidden(l)) = (g.source, g.target) else {
            unreachable!()
        };
        for ((row, col), &m) in g.mask.indexed_iter() {
            if m {
                edges.push((net.layer_vertices[s][col], net.layer_vertices[l][row]));
            }
        }
    }
    Dag::from_edges(n, &edges)
}
