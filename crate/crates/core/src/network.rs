//! Directed road-network graph over which trajectories are simulated.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// One directed link (a single travel direction of a road segment).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Link {
    pub id: String,
    pub from: String,
    pub to: String,
}

/// Validated directed graph. Link order is the canonical iteration order
/// for everything downstream, which keeps runs deterministic.
#[derive(Debug, Clone)]
pub struct RoadNetwork {
    links: Vec<Link>,
    nodes: Vec<String>,
    /// Outgoing link indices per node index.
    out_links: Vec<Vec<usize>>,
    node_index: HashMap<String, usize>,
}

impl RoadNetwork {
    pub fn new(links: Vec<Link>) -> Result<Self> {
        if links.is_empty() {
            return Err(Error::Input("network has no links".into()));
        }
        let mut node_index: HashMap<String, usize> = HashMap::new();
        let mut nodes: Vec<String> = Vec::new();
        let mut seen_ids: HashMap<&str, usize> = HashMap::new();
        for (i, link) in links.iter().enumerate() {
            if link.id.contains(',') || link.from.contains(',') || link.to.contains(',') {
                return Err(Error::Input(format!("identifier {:?} contains a comma", link.id)));
            }
            if let Some(prev) = seen_ids.insert(&link.id, i) {
                return Err(Error::Input(format!(
                    "duplicate link id {:?} (rows {} and {})",
                    link.id, prev, i
                )));
            }
            for node in [&link.from, &link.to] {
                if !node_index.contains_key(node) {
                    node_index.insert(node.clone(), nodes.len());
                    nodes.push(node.clone());
                }
            }
        }
        let mut out_links = vec![Vec::new(); nodes.len()];
        for (i, link) in links.iter().enumerate() {
            out_links[node_index[&link.from]].push(i);
        }
        let net = RoadNetwork { links, nodes, out_links, node_index };
        if !net.is_weakly_connected() {
            return Err(Error::Input("network is not weakly connected".into()));
        }
        Ok(net)
    }

    fn is_weakly_connected(&self) -> bool {
        let n = self.nodes.len();
        let mut undirected = vec![Vec::new(); n];
        for link in &self.links {
            let (a, b) = (self.node_index[&link.from], self.node_index[&link.to]);
            undirected[a].push(b);
            undirected[b].push(a);
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &w in &undirected[v] {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count == n
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn link_index(&self, id: &str) -> Option<usize> {
        self.links.iter().position(|l| l.id == id)
    }

    /// Links that can follow `link` on a path (those leaving its target node).
    pub fn successors(&self, link: usize) -> &[usize] {
        &self.out_links[self.node_index[&self.links[link].to]]
    }

    /// The default experiment topology: a 4x4 alternating one-way grid,
    /// 24 directed links. Even rows run east, odd rows west; odd columns
    /// run south, even columns north, so every node has an outgoing link.
    pub fn grid4x4() -> Self {
        let node = |r: usize, c: usize| format!("n{r}{c}");
        let mut links = Vec::with_capacity(24);
        for r in 0..4 {
            for c in 0..3 {
                if r % 2 == 0 {
                    links.push(Link { id: format!("E{r}{c}"), from: node(r, c), to: node(r, c + 1) });
                } else {
                    links.push(Link { id: format!("W{r}{c}"), from: node(r, c + 1), to: node(r, c) });
                }
            }
        }
        for c in 0..4 {
            for r in 0..3 {
                if c % 2 == 1 {
                    links.push(Link { id: format!("S{r}{c}"), from: node(r, c), to: node(r + 1, c) });
                } else {
                    links.push(Link { id: format!("N{r}{c}"), from: node(r + 1, c), to: node(r, c) });
                }
            }
        }
        RoadNetwork::new(links).expect("built-in grid is valid")
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("link_id,from_node,to_node\n");
        for l in &self.links {
            writeln!(out, "{},{},{}", l.id, l.from, l.to).expect("writing to string cannot fail");
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines();
        match lines.next() {
            Some("link_id,from_node,to_node") => {}
            other => {
                return Err(Error::Parse(format!(
                    "{}: expected header link_id,from_node,to_node, got {other:?}",
                    path.display()
                )))
            }
        }
        let mut links = Vec::new();
        for (lineno, line) in lines.enumerate() {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(Error::Parse(format!("{}:{}: malformed row", path.display(), lineno + 2)));
            }
            links.push(Link {
                id: fields[0].to_string(),
                from: fields[1].to_string(),
                to: fields[2].to_string(),
            });
        }
        RoadNetwork::new(links)
    }
}
