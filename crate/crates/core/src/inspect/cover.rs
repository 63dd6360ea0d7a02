use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cover {
    /// Chosen set ids in selection order.
    pub selected: Vec<usize>,
    /// For each universe element, the first selected set that covers it.
    pub covered_by: Vec<Option<usize>>,
    /// Elements no candidate covers.
    pub uncovered: Vec<usize>,
}

impl Cover {
    pub fn covered_count(&self) -> usize {
        self.covered_by.iter().filter(|c| c.is_some()).count()
    }
}

#[derive(PartialEq, Eq)]
struct Key {
    gain: usize,
    id: Reverse<usize>,
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.gain, self.id).cmp(&(other.gain, other.id))
    }
}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Greedy set cover over elements `0..universe`: repeatedly take the set
/// adding the most uncovered elements, lowest id on ties, until nothing
/// adds coverage. Gains are re-evaluated lazily since they only shrink.
pub fn select_cover<S: AsRef<[usize]>>(sets: &[S], universe: usize) -> Cover {
    let mut covered_by: Vec<Option<usize>> = vec![None; universe];
    let gain_of = |s: &[usize], covered: &[Option<usize>]| s.iter().filter(|&&e| e < universe && covered[e].is_none()).count();
    let mut heap: BinaryHeap<Key> = sets
        .iter()
        .enumerate()
        .map(|(id, s)| Key { gain: gain_of(s.as_ref(), &covered_by), id: Reverse(id) })
        .filter(|k| k.gain > 0)
        .collect();
    let mut selected = Vec::new();
    while let Some(top) = heap.pop() {
        let id = top.id.0;
        let gain = gain_of(sets[id].as_ref(), &covered_by);
        if gain == 0 {
            continue;
        }
        let fresh = Key { gain, id: Reverse(id) };
        if heap.peek().is_some_and(|next| *next > fresh) {
            heap.push(fresh);
            continue;
        }
        for &e in sets[id].as_ref() {
            if e < universe && covered_by[e].is_none() {
                covered_by[e] = Some(id);
            }
        }
        selected.push(id);
    }
    let uncovered = (0..universe).filter(|&e| covered_by[e].is_none()).collect();
    Cover { selected, covered_by, uncovered }
}
