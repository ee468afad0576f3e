//! JSON file formats for graphs and pyramids.
//!
//! Floats are written in shortest round-trip form, so a parsed value always
//! serializes back to the same bytes.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::pyramid::{DecimationSelector, PartitionMeta, Pyramid};

/// Largest node count accepted from a file.
pub const MAX_NODES: usize = 2048;

pub type EdgeEntry = (usize, usize, f64);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphFile {
    pub n: usize,
    pub edges: Vec<EdgeEntry>,
}

fn parse_error(e: serde_json::Error) -> Error {
    Error::Parse(e.to_string())
}

fn check_node_count(n: usize) -> Result<()> {
    if n > MAX_NODES {
        return Err(Error::Parse(format!("{n} nodes exceeds the limit of {MAX_NODES}")));
    }
    Ok(())
}

fn validate_edges(n: usize, edges: &[EdgeEntry]) -> Result<()> {
    let mut seen = HashSet::with_capacity(edges.len());
    for &(i, j, w) in edges {
        if i >= j {
            return Err(Error::Parse(format!("edge [{i}, {j}] must satisfy i < j")));
        }
        if j >= n {
            return Err(Error::Parse(format!("edge [{i}, {j}] out of range for {n} nodes")));
        }
        if !(w.is_finite() && w > 0.0) {
            return Err(Error::Parse(format!("edge [{i}, {j}] has invalid weight {w}")));
        }
        if !seen.insert((i, j)) {
            return Err(Error::Parse(format!("duplicate edge [{i}, {j}]")));
        }
    }
    Ok(())
}

fn edges_of(g: &Graph) -> Result<Vec<EdgeEntry>> {
    if g.has_self_loops() {
        return Err(Error::InvalidGraph(
            "self-loops cannot be written to an edge list".into(),
        ));
    }
    Ok(g.edges())
}

fn graph_from_edges(n: usize, edges: &[EdgeEntry]) -> Result<Graph> {
    Graph::from_edges(n, edges)
}

impl GraphFile {
    pub fn from_graph(g: &Graph) -> Result<Self> {
        check_node_count(g.n())?;
        Ok(GraphFile {
            n: g.n(),
            edges: edges_of(g)?,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let file: GraphFile = serde_json::from_str(text).map_err(parse_error)?;
        file.validate()?;
        Ok(file)
    }

    pub fn validate(&self) -> Result<()> {
        check_node_count(self.n)?;
        validate_edges(self.n, &self.edges)
    }

    pub fn to_graph(&self) -> Result<Graph> {
        self.validate()?;
        graph_from_edges(self.n, &self.edges)
    }

    /// Compact JSON followed by a newline.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("finite values serialize") + "\n"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelFile {
    /// Pooling step this level was emitted at.
    pub level: usize,
    pub n: usize,
    /// Indices into the previous emitted level (or the source graph).
    pub kept: Vec<usize>,
    pub edges: Vec<EdgeEntry>,
    pub cut_log: Vec<PartitionMeta>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PyramidFile {
    pub source_n: usize,
    pub epsilon: f64,
    pub requested_levels: Vec<usize>,
    pub truncated: bool,
    pub levels: Vec<LevelFile>,
}

impl PyramidFile {
    pub fn from_pyramid(p: &Pyramid) -> Result<Self> {
        check_node_count(p.source_n)?;
        let levels = p
            .levels
            .iter()
            .map(|l| {
                Ok(LevelFile {
                    level: l.level,
                    n: l.n(),
                    kept: l.keep.kept().to_vec(),
                    edges: edges_of(&l.sparsified)?,
                    cut_log: l.cut_log.clone(),
                })
            })
            .collect::<Result<_>>()?;
        Ok(PyramidFile {
            source_n: p.source_n,
            epsilon: p.epsilon,
            requested_levels: p.requested_levels.clone(),
            truncated: p.truncated,
            levels,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let file: PyramidFile = serde_json::from_str(text).map_err(parse_error)?;
        file.validate()?;
        Ok(file)
    }

    pub fn validate(&self) -> Result<()> {
        check_node_count(self.source_n)?;
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::Parse(format!("invalid epsilon {}", self.epsilon)));
        }
        if self.requested_levels.is_empty() || self.requested_levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Parse(
                "requested levels must be non-empty and strictly increasing".into(),
            ));
        }
        if self.levels.len() > self.requested_levels.len()
            || (!self.truncated && self.levels.len() != self.requested_levels.len())
        {
            return Err(Error::Parse("level count does not match the requested levels".into()));
        }
        let mut parent_n = self.source_n;
        let mut steps_done = 0;
        for (k, level) in self.levels.iter().enumerate() {
            if level.level != self.requested_levels[k] {
                return Err(Error::Parse(format!(
                    "level {} emitted where {} was requested",
                    level.level, self.requested_levels[k]
                )));
            }
            if level.kept.len() != level.n || level.n >= parent_n || level.n == 0 {
                return Err(Error::Parse(format!(
                    "level {} does not shrink its parent",
                    level.level
                )));
            }
            DecimationSelector::new(level.kept.clone(), parent_n).map_err(|e| Error::Parse(e.to_string()))?;
            validate_edges(level.n, &level.edges)?;
            if level.cut_log.len() != level.level + 1 - steps_done {
                return Err(Error::Parse(format!(
                    "level {} has a cut log of the wrong length",
                    level.level
                )));
            }
            for meta in &level.cut_log {
                let lambda_ok = meta.lambda_s_max.is_none_or(|l| l.is_finite());
                if !(meta.gamma.is_finite() && (0.0..=1.0).contains(&meta.gamma) && lambda_ok) {
                    return Err(Error::Parse(format!(
                        "level {} has an invalid cut log entry",
                        level.level
                    )));
                }
            }
            steps_done = level.level + 1;
            parent_n = level.n;
        }
        Ok(())
    }

    pub fn selectors(&self) -> Result<Vec<DecimationSelector>> {
        let mut parent_n = self.source_n;
        self.levels
            .iter()
            .map(|l| {
                let s = DecimationSelector::new(l.kept.clone(), parent_n)?;
                parent_n = l.n;
                Ok(s)
            })
            .collect()
    }

    pub fn graphs(&self) -> Result<Vec<Graph>> {
        self.levels.iter().map(|l| graph_from_edges(l.n, &l.edges)).collect()
    }

    /// Compact JSON followed by a newline.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("finite values serialize") + "\n"
    }
}

/// Parses a comma-separated list of pyramid levels such as `0,1,2`.
pub fn parse_levels(text: &str) -> Result<Vec<usize>> {
    let levels = text
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|e| Error::Parse(format!("bad level {t:?}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    if levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Parse("levels must be strictly increasing".into()));
    }
    Ok(levels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{gen_grid, gen_sensor};
    use crate::pyramid::build_pyramid;
    use proptest::prelude::*;

    fn corpus(target: &str) -> Vec<(String, Vec<u8>)> {
        let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("../../fuzz/corpus")
            .join(target);
        let mut seeds: Vec<_> = std::fs::read_dir(&dir)
            .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
            .map(|entry| {
                let path = entry.unwrap().path();
                (path.display().to_string(), std::fs::read(&path).unwrap())
            })
            .collect();
        seeds.sort();
        assert!(!seeds.is_empty(), "no seeds in {}", dir.display());
        seeds
    }

    #[test]
    fn graph_file_corpus() {
        let mut accepted = 0;
        for (name, bytes) in corpus("graph_file") {
            let Ok(text) = std::str::from_utf8(&bytes) else {
                continue;
            };
            let Ok(file) = GraphFile::parse(text) else { continue };
            let g = file.to_graph().unwrap_or_else(|e| panic!("{name}: {e}"));
            let again = GraphFile::parse(&GraphFile::from_graph(&g).unwrap().to_json()).unwrap();
            assert_eq!(again.to_graph().unwrap(), g, "{name}");
            accepted += 1;
        }
        assert!(accepted > 0);
    }

    #[test]
    fn pyramid_file_corpus() {
        for (name, bytes) in corpus("pyramid_file") {
            let text = std::str::from_utf8(&bytes).unwrap();
            let file = PyramidFile::parse(text).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(file.selectors().unwrap().len(), file.graphs().unwrap().len());
            assert_eq!(file.to_json(), text, "{name}");
        }
    }

    #[test]
    fn levels_list_corpus() {
        for (name, bytes) in corpus("levels_list") {
            let Ok(text) = std::str::from_utf8(&bytes) else {
                continue;
            };
            if let Ok(levels) = parse_levels(text) {
                assert!(levels.windows(2).all(|w| w[0] < w[1]), "{name}");
            }
        }
    }

    #[test]
    fn graph_file_round_trip() {
        let g = gen_sensor(20, 3, None, 1).unwrap();
        let file = GraphFile::from_graph(&g).unwrap();
        let text = file.to_json();
        let parsed = GraphFile::parse(&text).unwrap();
        assert_eq!(parsed, file);
        assert_eq!(parsed.to_json(), text);
        assert_eq!(parsed.to_graph().unwrap(), g);
    }

    #[test]
    fn graph_file_accepts_integer_weights_and_any_order() {
        let f = GraphFile::parse(r#"{"n": 3, "edges": [[1, 2, 2], [0, 1, 0.5]]}"#).unwrap();
        let g = f.to_graph().unwrap();
        assert_eq!(g.weight(2, 1), 2.0);
        assert_eq!(g.weight(0, 1), 0.5);
    }

    #[test]
    fn graph_file_rejections() {
        for bad in [
            r#"{"n": 2, "edges": [[1, 0, 1.0]]}"#,
            r#"{"n": 2, "edges": [[0, 0, 1.0]]}"#,
            r#"{"n": 2, "edges": [[0, 2, 1.0]]}"#,
            r#"{"n": 2, "edges": [[0, 1, 0.0]]}"#,
            r#"{"n": 2, "edges": [[0, 1, -1.0]]}"#,
            r#"{"n": 2, "edges": [[0, 1, 1.0], [0, 1, 2.0]]}"#,
            r#"{"n": 99999, "edges": []}"#,
            r#"{"n": 2, "edges": [], "extra": 1}"#,
            r#"{"n": -1, "edges": []}"#,
            r#"{"n": 2}"#,
            r#"{"n": 2, "edges": [[0, 1]]}"#,
            "not json",
        ] {
            assert!(matches!(GraphFile::parse(bad), Err(Error::Parse(_))), "{bad}");
        }
    }

    #[test]
    fn pyramid_file_round_trip() {
        let g = gen_grid(8, 8).unwrap();
        let p = build_pyramid(&g, &[0, 2], 1e-2, 4).unwrap();
        let file = PyramidFile::from_pyramid(&p).unwrap();
        let text = file.to_json();
        let parsed = PyramidFile::parse(&text).unwrap();
        assert_eq!(parsed, file);
        assert_eq!(parsed.to_json(), text);
        let selectors = parsed.selectors().unwrap();
        assert_eq!(selectors, p.selectors().into_iter().cloned().collect::<Vec<_>>());
        let graphs = parsed.graphs().unwrap();
        assert_eq!(graphs[1], p.levels[1].sparsified);
    }

    #[test]
    fn pyramid_file_rejects_broken_chains() {
        let g = gen_grid(6, 6).unwrap();
        let p = build_pyramid(&g, &[0, 1], 1e-2, 0).unwrap();
        let good = PyramidFile::from_pyramid(&p).unwrap();

        let mut bad = good.clone();
        bad.levels[1].kept.push(1000);
        assert!(bad.validate().is_err());
        let mut bad = good.clone();
        let extra = bad.levels[1].cut_log[0];
        bad.levels[1].cut_log.push(extra);
        assert!(bad.validate().is_err());
        let mut bad = good.clone();
        bad.levels.pop();
        assert!(bad.validate().is_err());
        bad.truncated = true;
        assert!(bad.validate().is_ok());
        let mut bad = good.clone();
        bad.requested_levels = vec![1, 0];
        assert!(bad.validate().is_err());
        let mut bad = good;
        bad.epsilon = -1.0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn levels_list() {
        assert_eq!(parse_levels("0,1,2").unwrap(), vec![0, 1, 2]);
        assert_eq!(parse_levels(" 3 ").unwrap(), vec![3]);
        assert!(parse_levels("1,1").is_err());
        assert!(parse_levels("2,1").is_err());
        assert!(parse_levels("a").is_err());
        assert!(parse_levels("").is_err());
        assert!(parse_levels("-1").is_err());
    }

    proptest! {
        #[test]
        fn weights_round_trip_exactly(w in prop::collection::vec(1e-300f64..1e300, 1..10)) {
            let n = w.len() + 1;
            let edges: Vec<EdgeEntry> = w.iter().enumerate().map(|(i, &x)| (i, i + 1, x)).collect();
            let file = GraphFile { n, edges };
            let text = file.to_json();
            let parsed = GraphFile::parse(&text).unwrap();
            prop_assert_eq!(&parsed, &file);
            prop_assert_eq!(parsed.to_json(), text);
        }
    }
}
