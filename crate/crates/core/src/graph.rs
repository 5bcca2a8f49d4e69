//! Undirected communication graphs, their Laplacian spectrum and the
//! random geometric generator used for sensor deployments.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// λ₂ above this value declares the graph connected.
pub const CONNECTIVITY_TOLERANCE: f64 = 1e-8;

/// Number of full redraws before random geometric generation gives up.
pub const MAX_GENERATION_ATTEMPTS: usize = 10_000;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("invalid graph: {0}")]
    Invalid(String),
    #[error("agent index {index} out of range for {n_agents} agents")]
    IndexOutOfRange { index: usize, n_agents: usize },
    #[error("no connected graph with {n_agents} agents and radius {radius} after {attempts} draws")]
    GenerationFailed {
        n_agents: usize,
        radius: f64,
        attempts: usize,
    },
    #[error("graph json: {0}")]
    Json(String),
}

/// Simple undirected graph with a cached Laplacian spectrum.
///
/// Immutable after construction.
#[derive(Debug, Clone)]
pub struct NetworkGraph {
    n_agents: usize,
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
    laplacian: DMatrix<f64>,
    spectrum: Vec<f64>,
    coords: Option<Vec<[f64; 2]>>,
}

impl NetworkGraph {
    /// Builds a graph from 0-based edge pairs. Pairs may be given in either
    /// orientation; self-loops, duplicates and out-of-range endpoints are
    /// rejected.
    pub fn new(n_agents: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        if n_agents == 0 {
            return Err(GraphError::Invalid("graph needs at least one agent".into()));
        }
        let mut seen = BTreeSet::new();
        for &(u, v) in edges {
            if u >= n_agents || v >= n_agents {
                return Err(GraphError::Invalid(format!(
                    "edge ({}, {}) has an endpoint outside 1..={}",
                    u + 1,
                    v + 1,
                    n_agents
                )));
            }
            if u == v {
                return Err(GraphError::Invalid(format!("self-loop at agent {}", u + 1)));
            }
            let key = (u.min(v), u.max(v));
            if !seen.insert(key) {
                return Err(GraphError::Invalid(format!(
                    "duplicate edge ({}, {})",
                    key.0 + 1,
                    key.1 + 1
                )));
            }
        }
        let edges: Vec<(usize, usize)> = seen.into_iter().collect();

        let mut neighbors = vec![Vec::new(); n_agents];
        let mut laplacian = DMatrix::zeros(n_agents, n_agents);
        for &(u, v) in &edges {
            neighbors[u].push(v);
            neighbors[v].push(u);
            laplacian[(u, v)] = -1.0;
            laplacian[(v, u)] = -1.0;
            laplacian[(u, u)] += 1.0;
            laplacian[(v, v)] += 1.0;
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }

        let mut spectrum: Vec<f64> = SymmetricEigen::new(laplacian.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        spectrum.sort_by(f64::total_cmp);

        Ok(Self {
            n_agents,
            edges,
            neighbors,
            laplacian,
            spectrum,
            coords: None,
        })
    }

    /// Builds a graph from 1-based edge pairs, as found in files.
    pub fn from_one_based(n_agents: usize, edges: &[[usize; 2]]) -> Result<Self, GraphError> {
        let mut zero_based = Vec::with_capacity(edges.len());
        for &[u, v] in edges {
            if u == 0 || v == 0 {
                return Err(GraphError::Invalid(format!(
                    "edge ({u}, {v}) uses index 0; agents are numbered from 1"
                )));
            }
            zero_based.push((u - 1, v - 1));
        }
        Self::new(n_agents, &zero_based)
    }

    pub fn with_coords(mut self, coords: Vec<[f64; 2]>) -> Self {
        assert_eq!(coords.len(), self.n_agents, "one coordinate pair per agent");
        self.coords = Some(coords);
        self
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    /// Edges as 0-based pairs `(n, l)` with `n < l`, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn coords(&self) -> Option<&[[f64; 2]]> {
        self.coords.as_deref()
    }

    /// Neighbourhood Ω_n, sorted ascending.
    pub fn neighbors(&self, n: usize) -> Result<&[usize], GraphError> {
        self.neighbors
            .get(n)
            .map(Vec::as_slice)
            .ok_or(GraphError::IndexOutOfRange {
                index: n,
                n_agents: self.n_agents,
            })
    }

    pub fn degree(&self, n: usize) -> Result<usize, GraphError> {
        self.neighbors(n).map(<[usize]>::len)
    }

    /// L = D − A.
    pub fn laplacian(&self) -> &DMatrix<f64> {
        &self.laplacian
    }

    /// Laplacian eigenvalues in ascending order.
    pub fn laplacian_spectrum(&self) -> &[f64] {
        &self.spectrum
    }

    /// Algebraic connectivity λ₂(L), clamped at zero. A single agent has no
    /// second eigenvalue and reports 0.
    pub fn fiedler_value(&self) -> f64 {
        self.spectrum.get(1).copied().unwrap_or(0.0).max(0.0)
    }

    /// Largest Laplacian eigenvalue λ_N(L).
    pub fn spectral_radius(&self) -> f64 {
        self.spectrum.last().copied().unwrap_or(0.0)
    }

    pub fn is_connected(&self) -> bool {
        self.n_agents == 1 || self.fiedler_value() > CONNECTIVITY_TOLERANCE
    }

    /// Stacked product `(L ⊗ I_M) x` for an agent-major vector of `N·M`
    /// entries, evaluated row by row over the Laplacian matrix.
    ///
    /// Each block is accumulated as `Σ_{l≠n} (−L_nl)(x_n − x_l)` in
    /// ascending `l`, which equals `Σ_l L_nl x_l` because the rows of `L`
    /// sum to zero.
    pub fn laplacian_kron_apply(&self, x: &[f64], block: usize) -> Vec<f64> {
        assert_eq!(x.len(), self.n_agents * block, "stacked vector length");
        let mut out = vec![0.0; x.len()];
        for n in 0..self.n_agents {
            let xn = &x[n * block..(n + 1) * block];
            let acc = &mut out[n * block..(n + 1) * block];
            for l in 0..self.n_agents {
                let weight = -self.laplacian[(n, l)];
                if l == n || weight == 0.0 {
                    continue;
                }
                let xl = &x[l * block..(l + 1) * block];
                for k in 0..block {
                    acc[k] += weight * (xn[k] - xl[k]);
                }
            }
        }
        out
    }

    pub fn to_file(&self) -> GraphFile {
        GraphFile {
            n_agents: self.n_agents,
            edges: self.edges.iter().map(|&(u, v)| [u + 1, v + 1]).collect(),
            coords: self.coords.clone(),
        }
    }

    pub fn from_file(file: &GraphFile) -> Result<Self, GraphError> {
        let graph = Self::from_one_based(file.n_agents, &file.edges)?;
        match &file.coords {
            Some(c) if c.len() != file.n_agents => Err(GraphError::Invalid(format!(
                "{} coordinates for {} agents",
                c.len(),
                file.n_agents
            ))),
            Some(c) => Ok(graph.with_coords(c.clone())),
            None => Ok(graph),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("graph serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        let file: GraphFile =
            serde_json::from_str(text).map_err(|e| GraphError::Json(e.to_string()))?;
        Self::from_file(&file)
    }
}

/// On-disk graph description. Edges are 1-based with `n < l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphFile {
    pub n_agents: usize,
    pub edges: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coords: Option<Vec<[f64; 2]>>,
}

/// Samples `n_agents` points uniformly on the unit square and links every
/// pair at Euclidean distance `<= radius`, redrawing the whole deployment
/// until the graph is connected.
pub fn generate_random_geometric<R: Rng + ?Sized>(
    n_agents: usize,
    radius: f64,
    rng: &mut R,
) -> Result<NetworkGraph, GraphError> {
    if n_agents == 0 {
        return Err(GraphError::Invalid("graph needs at least one agent".into()));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(GraphError::Invalid(format!(
            "radius must be positive and finite, got {radius}"
        )));
    }
    for _ in 0..MAX_GENERATION_ATTEMPTS {
        let coords: Vec<[f64; 2]> = (0..n_agents)
            .map(|_| [rng.random::<f64>(), rng.random::<f64>()])
            .collect();
        let mut edges = Vec::new();
        for u in 0..n_agents {
            for v in u + 1..n_agents {
                let dx = coords[u][0] - coords[v][0];
                let dy = coords[u][1] - coords[v][1];
                if (dx * dx + dy * dy).sqrt() <= radius {
                    edges.push((u, v));
                }
            }
        }
        let graph = NetworkGraph::new(n_agents, &edges)?;
        if graph.is_connected() {
            return Ok(graph.with_coords(coords));
        }
    }
    Err(GraphError::GenerationFailed {
        n_agents,
        radius,
        attempts: MAX_GENERATION_ATTEMPTS,
    })
}
