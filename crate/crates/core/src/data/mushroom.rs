//! Conversion of the UCI Mushroom file (`agaricus-lepiota.data`) into a
//! labeled hypergraph.
//!
//! Each distinct `(attribute, value)` pair is a node and each species a
//! hyperedge over its 22 attribute values. Edible species are inliers and
//! poisonous ones anomalies. There are no node features, so each node gets
//! a one-hot identity row. `?` (missing) is kept as an ordinary value.

use std::collections::BTreeMap;
use std::io::BufRead;

use ndarray::Array2;

use super::{Label, LabeledHypergraphDataset};
use crate::error::{HadError, Result};
use crate::hypergraph::io::content_lines;
use crate::hypergraph::Hypergraph;

pub const NUM_ATTRIBUTES: usize = 22;

pub fn convert_uci_mushroom<R: BufRead>(
    reader: R,
    source_name: &str,
) -> Result<LabeledHypergraphDataset> {
    let mut rows = Vec::new();
    for item in content_lines(reader, source_name) {
        let (line_no, line) = item?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != NUM_ATTRIBUTES + 1 {
            return Err(HadError::parse(
                source_name,
                line_no,
                format!(
                    "expected {} comma-separated fields, found {}",
                    NUM_ATTRIBUTES + 1,
                    fields.len()
                ),
            ));
        }
        let label = match fields[0] {
            "e" => Label::Inlier,
            "p" => Label::Anomaly,
            other => {
                return Err(HadError::parse(
                    source_name,
                    line_no,
                    format!("unknown class `{other}`"),
                ))
            }
        };
        rows.push((
            label,
            fields[1..]
                .iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>(),
        ));
    }

    // Node ids in (attribute, value) order, independent of row order.
    let mut nodes: BTreeMap<(usize, String), usize> = BTreeMap::new();
    for (_, values) in &rows {
        for (a, v) in values.iter().enumerate() {
            nodes.entry((a, v.clone())).or_insert(0);
        }
    }
    for (id, slot) in nodes.values_mut().enumerate() {
        *slot = id;
    }

    let mut labels = Vec::with_capacity(rows.len());
    let mut edges = Vec::with_capacity(rows.len());
    for (label, values) in rows {
        labels.push(label);
        edges.push(
            values
                .into_iter()
                .enumerate()
                .map(|(a, v)| nodes[&(a, v)])
                .collect::<Vec<_>>(),
        );
    }
    let n = nodes.len();
    let h = Hypergraph::new(n, edges, Array2::eye(n))?;
    LabeledHypergraphDataset::new("mushroom", h, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
p,x,s,n,t,p,f,c,n,k,e,e,s,s,w,w,p,w,o,p,k,s,u
e,x,s,y,t,a,f,c,b,k,e,c,s,s,w,w,p,w,o,p,n,n,g
e,b,s,w,t,l,f,c,b,n,e,c,s,s,w,w,p,w,o,p,n,n,m
";

    #[test]
    fn converts_sample_rows() {
        let ds = convert_uci_mushroom(SAMPLE.as_bytes(), "sample").unwrap();
        assert_eq!(
            ds.labels,
            vec![Label::Anomaly, Label::Inlier, Label::Inlier]
        );
        let h = &ds.hypergraph;
        assert!(h.edges().iter().all(|e| e.len() == NUM_ATTRIBUTES));
        assert_eq!(h.features(), &Array2::<f64>::eye(h.num_nodes()));
        // Rows 2 and 3 differ in 5 of 22 attributes.
        let shared = h.edge(1).iter().filter(|v| h.edge(2).contains(v)).count();
        assert_eq!(shared, 17);
    }

    #[test]
    fn rejects_malformed_rows() {
        let err = convert_uci_mushroom("e,x,s\n".as_bytes(), "m").unwrap_err();
        assert!(matches!(err, HadError::Parse { line: 1, .. }));
        let bad_class = SAMPLE.replacen('p', "q", 1);
        assert!(convert_uci_mushroom(bad_class.as_bytes(), "m").is_err());
    }
}
