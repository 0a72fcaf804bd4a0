//! Huffman coding tree for hierarchical softmax.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::Rng;

use crate::nncore::Parameter;
use crate::{Error, Result};

/// Binary Huffman tree over `V` leaves with `V - 1` internal nodes.
///
/// Internal nodes are numbered in creation order, so the root is node `V - 2`.
/// `paths[w]` lists the internal nodes from the root down to leaf `w`, and
/// `codes[w][j]` is the branch taken at `paths[w][j]` (0 or 1).
#[derive(Debug, Clone, PartialEq)]
pub struct HuffmanTree {
    pub paths: Vec<Vec<usize>>,
    pub codes: Vec<Vec<u8>>,
    /// One row per internal node.
    pub node_vectors: Parameter,
}

/// Builds the tree from token counts. Among equal counts the smaller node id
/// (leaves before internal nodes) is merged first; the first node popped takes
/// branch 0. Node vectors start at zero.
pub fn build_huffman(counts: &[u64], dim: usize) -> Result<HuffmanTree> {
    let v = counts.len();
    if v < 2 {
        return Err(Error::data(format!("hierarchical softmax needs at least 2 words, got {v}")));
    }
    let mut heap: BinaryHeap<Reverse<(u64, usize)>> =
        counts.iter().enumerate().map(|(i, &c)| Reverse((c, i))).collect();
    // parent[node] and branch[node] for all 2V-1 nodes (leaves then internals)
    let mut parent = vec![usize::MAX; 2 * v - 1];
    let mut branch = vec![0u8; 2 * v - 1];
    let mut next = v;
    while heap.len() > 1 {
        let Reverse((c0, n0)) = heap.pop().unwrap();
        let Reverse((c1, n1)) = heap.pop().unwrap();
        parent[n0] = next;
        parent[n1] = next;
        branch[n1] = 1;
        heap.push(Reverse((c0 + c1, next)));
        next += 1;
    }
    let root = 2 * v - 2;
    let mut paths = Vec::with_capacity(v);
    let mut codes = Vec::with_capacity(v);
    for leaf in 0..v {
        let mut path = Vec::new();
        let mut code = Vec::new();
        let mut node = leaf;
        while node != root {
            code.push(branch[node]);
            node = parent[node];
            path.push(node - v);
        }
        path.reverse();
        code.reverse();
        paths.push(path);
        codes.push(code);
    }
    Ok(HuffmanTree {
        paths,
        codes,
        node_vectors: Parameter::zeros(&[v - 1, dim]),
    })
}

impl HuffmanTree {
    pub fn num_leaves(&self) -> usize {
        self.paths.len()
    }

    pub fn num_internal(&self) -> usize {
        self.node_vectors.value.shape()[0]
    }

    pub fn code_len(&self, word: usize) -> usize {
        self.codes[word].len()
    }

    pub(crate) fn randomize<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        crate::nncore::init_uniform(self.node_vectors.value.data_mut(), crate::nncore::INIT_RANGE, rng);
    }
}
