//! Weighted graphs b over discrete measure spaces (X, m), the formal
//! Laplacian Lφ(x) = (1/m(x)) Σ_y b(x,y)(φ(x) − φ(y)), weighted degree,
//! combinatorial (BFS) distance, and polynomial volume-growth fitting.

use std::collections::HashMap;
use std::collections::VecDeque;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite weighted graph: symmetric edge weights b with b(x,x) = 0 and a
/// measure m of full support. Immutable after construction.
#[derive(Debug, Clone)]
pub struct WeightedGraph {
    names: Vec<String>,
    index: HashMap<String, usize>,
    /// Adjacency lists (neighbor, weight); each undirected edge stored in
    /// both lists.
    adj: Vec<Vec<(usize, f64)>>,
    measure: Vec<f64>,
}

impl WeightedGraph {
    /// Build from named vertices, undirected edges (each listed once), and
    /// per-vertex masses (m ≡ 1 when `None`).
    pub fn new(
        names: Vec<String>,
        edges: &[(usize, usize, f64)],
        measure: Option<Vec<f64>>,
    ) -> Result<Self> {
        let n = names.len();
        if n == 0 {
            return Err(Error::InvalidGraph("vertex set is empty".into()));
        }
        let measure = measure.unwrap_or_else(|| vec![1.0; n]);
        if measure.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: measure.len(),
            });
        }
        if measure.iter().any(|&m| !(m > 0.0) || !m.is_finite()) {
            return Err(Error::InvalidGraph(
                "measure must be strictly positive and finite on every vertex".into(),
            ));
        }
        let mut index = HashMap::with_capacity(n);
        for (i, name) in names.iter().enumerate() {
            if index.insert(name.clone(), i).is_some() {
                return Err(Error::InvalidGraph(format!("duplicate vertex id {name:?}")));
            }
        }
        let mut adj = vec![Vec::new(); n];
        for &(x, y, w) in edges {
            if x >= n || y >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge ({x},{y}) references a vertex outside 0..{n}"
                )));
            }
            if x == y {
                return Err(Error::InvalidGraph(format!(
                    "loop at vertex {:?}: b(x,x) must vanish",
                    names[x]
                )));
            }
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::InvalidGraph(format!(
                    "edge weight b({:?},{:?}) = {w} must be positive and finite",
                    names[x], names[y]
                )));
            }
            adj[x].push((y, w));
            adj[y].push((x, w));
        }
        for (i, row) in adj.iter().enumerate() {
            let sum: f64 = row.iter().map(|&(_, w)| w).sum();
            if !sum.is_finite() {
                return Err(Error::InvalidGraph(format!(
                    "row sum at vertex {:?} is not finite",
                    names[i]
                )));
            }
        }
        Ok(WeightedGraph {
            names,
            index,
            adj,
            measure,
        })
    }

    fn numbered(n: usize, edges: &[(usize, usize, f64)]) -> Self {
        let names = (0..n).map(|i| i.to_string()).collect();
        WeightedGraph::new(names, edges, None).expect("generator produced a valid graph")
    }

    /// Path graph on n vertices with unit weights and counting measure.
    pub fn path(n: usize) -> Self {
        let edges: Vec<_> = (0..n.saturating_sub(1)).map(|i| (i, i + 1, 1.0)).collect();
        Self::numbered(n, &edges)
    }

    /// Cycle on n ≥ 3 vertices.
    pub fn cycle(n: usize) -> Self {
        let mut edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1, 1.0)).collect();
        edges.push((n - 1, 0, 1.0));
        Self::numbered(n, &edges)
    }

    /// nx × ny patch of ℤ² with unit weights.
    pub fn grid(nx: usize, ny: usize) -> Self {
        let id = |i: usize, j: usize| i * ny + j;
        let mut edges = Vec::new();
        for i in 0..nx {
            for j in 0..ny {
                if i + 1 < nx {
                    edges.push((id(i, j), id(i + 1, j), 1.0));
                }
                if j + 1 < ny {
                    edges.push((id(i, j), id(i, j + 1), 1.0));
                }
            }
        }
        Self::numbered(nx * ny, &edges)
    }

    /// Discrete torus (ℤ/n₁) × … × (ℤ/n_k) with unit weights.
    pub fn torus(dims: &[usize]) -> Self {
        assert!(!dims.is_empty() && dims.iter().all(|&d| d >= 3));
        let n: usize = dims.iter().product();
        let strides: Vec<usize> = {
            let mut s = vec![1; dims.len()];
            for i in (0..dims.len() - 1).rev() {
                s[i] = s[i + 1] * dims[i + 1];
            }
            s
        };
        let mut edges = Vec::new();
        for flat in 0..n {
            for (axis, &d) in dims.iter().enumerate() {
                let coord = flat / strides[axis] % d;
                let next = flat + strides[axis] * ((coord + 1) % d) - strides[axis] * coord;
                // forward edges once each; the wrap edge (next < flat) only
                // arises from coord = d−1 and is not generated elsewhere
                edges.push((flat.min(next), flat.max(next), 1.0));
            }
        }
        Self::numbered(n, &edges)
    }

    /// Star with k unit edges from the center (vertex 0).
    pub fn star(k: usize) -> Self {
        let edges: Vec<_> = (1..=k).map(|i| (0, i, 1.0)).collect();
        Self::numbered(k + 1, &edges)
    }

    /// n isolated vertices (L = 0).
    pub fn edgeless(n: usize) -> Self {
        Self::numbered(n, &[])
    }

    /// Random connected graph on n vertices: a random spanning tree plus a
    /// few extra edges, with weights and masses in [0.5, 2].
    pub fn random_connected<R: rand::Rng>(rng: &mut R, n: usize) -> Self {
        assert!(n >= 1);
        let mut edges = Vec::new();
        for v in 1..n {
            let u = rng.gen_range(0..v);
            edges.push((u, v, rng.gen_range(0.5..2.0)));
        }
        let extra = if n > 2 { rng.gen_range(0..n) } else { 0 };
        for _ in 0..extra {
            let u = rng.gen_range(0..n);
            let v = rng.gen_range(0..n);
            if u != v && !edges.iter().any(|&(a, b, _)| (a, b) == (u.min(v), u.max(v))) {
                edges.push((u.min(v), u.max(v), rng.gen_range(0.5..2.0)));
            }
        }
        let measure: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..2.0)).collect();
        let names = (0..n).map(|i| i.to_string()).collect();
        WeightedGraph::new(names, &edges, Some(measure)).expect("random graph is valid")
    }

    pub fn with_measure(mut self, measure: Vec<f64>) -> Result<Self> {
        if measure.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: measure.len(),
            });
        }
        if measure.iter().any(|&m| !(m > 0.0)) {
            return Err(Error::InvalidGraph("measure must be positive".into()));
        }
        self.measure = measure;
        Ok(self)
    }

    /// Load from an edge-list CSV (`src,dst,weight`, undirected edges listed
    /// once) and an optional measure CSV (`vertex,mass`); a missing measure
    /// file means m ≡ 1.
    pub fn from_csv(edges_path: &Path, measure_path: Option<&Path>) -> Result<Self> {
        let text = fs::read_to_string(edges_path).map_err(|e| Error::Parse {
            path: edges_path.display().to_string(),
            line: 0,
            message: e.to_string(),
        })?;
        let mut names: Vec<String> = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut intern = |name: &str, names: &mut Vec<String>| -> usize {
            *index.entry(name.to_string()).or_insert_with(|| {
                names.push(name.to_string());
                names.len() - 1
            })
        };
        let mut edges = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if lineno == 0 {
                if line != "src,dst,weight" {
                    return Err(Error::Parse {
                        path: edges_path.display().to_string(),
                        line: 1,
                        message: format!("expected header `src,dst,weight`, got {line:?}"),
                    });
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            let err = |message: String| Error::Parse {
                path: edges_path.display().to_string(),
                line: lineno + 1,
                message,
            };
            if parts.len() != 3 {
                return Err(err(format!("expected 3 fields, got {}", parts.len())));
            }
            let w: f64 = parts[2]
                .trim()
                .parse()
                .map_err(|_| err(format!("invalid weight {:?}", parts[2])))?;
            let x = intern(parts[0].trim(), &mut names);
            let y = intern(parts[1].trim(), &mut names);
            edges.push((x, y, w));
        }
        let measure = match measure_path {
            None => None,
            Some(mpath) => {
                let mtext = fs::read_to_string(mpath).map_err(|e| Error::Parse {
                    path: mpath.display().to_string(),
                    line: 0,
                    message: e.to_string(),
                })?;
                let mut masses = vec![None; names.len()];
                for (lineno, line) in mtext.lines().enumerate() {
                    let line = line.trim();
                    let err = |message: String| Error::Parse {
                        path: mpath.display().to_string(),
                        line: lineno + 1,
                        message,
                    };
                    if lineno == 0 {
                        if line != "vertex,mass" {
                            return Err(err(format!(
                                "expected header `vertex,mass`, got {line:?}"
                            )));
                        }
                        continue;
                    }
                    if line.is_empty() {
                        continue;
                    }
                    let parts: Vec<&str> = line.split(',').collect();
                    if parts.len() != 2 {
                        return Err(err(format!("expected 2 fields, got {}", parts.len())));
                    }
                    let v = *index
                        .get(parts[0].trim())
                        .ok_or_else(|| err(format!("unknown vertex {:?}", parts[0])))?;
                    let m: f64 = parts[1]
                        .trim()
                        .parse()
                        .map_err(|_| err(format!("invalid mass {:?}", parts[1])))?;
                    masses[v] = Some(m);
                }
                if let Some(missing) = masses.iter().position(|m| m.is_none()) {
                    return Err(Error::InvalidGraph(format!(
                        "measure file assigns no mass to vertex {:?}",
                        names[missing]
                    )));
                }
                Some(masses.into_iter().map(|m| m.unwrap()).collect())
            }
        };
        WeightedGraph::new(names, &edges, measure)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn vertex_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn measure(&self) -> &[f64] {
        &self.measure
    }

    pub fn total_mass(&self) -> f64 {
        self.measure.iter().sum()
    }

    pub fn neighbors(&self, x: usize) -> &[(usize, f64)] {
        &self.adj[x]
    }

    /// Lφ(x) = (1/m(x)) Σ_y b(x,y)(φ(x) − φ(y)), sparse evaluation.
    pub fn apply_laplacian(&self, phi: &[f64]) -> Result<Vec<f64>> {
        if phi.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: phi.len(),
            });
        }
        Ok((0..self.len())
            .map(|x| {
                let s: f64 = self.adj[x]
                    .iter()
                    .map(|&(y, b)| b * (phi[x] - phi[y]))
                    .sum();
                s / self.measure[x]
            })
            .collect())
    }

    /// Deg(x) = (1/m(x)) Σ_y b(x,y) together with its supremum (the
    /// bounded-geometry witness).
    pub fn weighted_degree(&self) -> (Vec<f64>, f64) {
        let deg: Vec<f64> = (0..self.len())
            .map(|x| self.adj[x].iter().map(|&(_, b)| b).sum::<f64>() / self.measure[x])
            .collect();
        let sup = deg.iter().cloned().fold(0.0, f64::max);
        (deg, sup)
    }

    /// Breadth-first combinatorial distances from x; `None` marks vertices
    /// in other components.
    pub fn combinatorial_distance(&self, x: usize) -> DistanceMap {
        let mut dist = vec![None; self.len()];
        dist[x] = Some(0);
        let mut queue = VecDeque::from([x]);
        while let Some(v) = queue.pop_front() {
            let d = dist[v].unwrap();
            for &(w, _) in &self.adj[v] {
                if dist[w].is_none() {
                    dist[w] = Some(d + 1);
                    queue.push_back(w);
                }
            }
        }
        let connected = dist.iter().all(|d| d.is_some());
        DistanceMap { dist, connected }
    }

    /// Volumes V_r(x) = Σ_{d(x,y) ≤ r} m(y) for r = 0..=r_max.
    pub fn ball_volumes(&self, x: usize, r_max: usize) -> Vec<f64> {
        let dm = self.combinatorial_distance(x);
        let mut vols = vec![0.0; r_max + 1];
        for (y, d) in dm.dist.iter().enumerate() {
            if let Some(d) = *d {
                if d <= r_max {
                    vols[d] += self.measure[y];
                }
            }
        }
        for r in 1..=r_max {
            vols[r] += vols[r - 1];
        }
        vols
    }

    /// Least-squares fit of V_r(x) ≤ d·r^θ on the window [r_max/2, r_max].
    pub fn fit_volume_growth(&self, x: usize, r_max: usize) -> Result<VolumeGrowthFit> {
        if r_max < 2 {
            return Err(Error::Domain("volume fit needs r_max ≥ 2".into()));
        }
        let vols = self.ball_volumes(x, r_max);
        let r_lo = (r_max / 2).max(1);
        let window: Vec<(f64, f64)> = (r_lo..=r_max)
            .map(|r| ((r as f64).ln(), vols[r].ln()))
            .collect();
        let n = window.len() as f64;
        let mean_x = window.iter().map(|p| p.0).sum::<f64>() / n;
        let mean_y = window.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = window.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
        let sxy: f64 = window
            .iter()
            .map(|p| (p.0 - mean_x) * (p.1 - mean_y))
            .sum();
        // a saturated (e.g. single-vertex) graph has constant volumes
        let theta = if sxx > 0.0 && sxy.abs() > 0.0 {
            (sxy / sxx).max(0.0)
        } else {
            0.0
        };
        // minimal d so that V_r ≤ d·r^θ holds on the window
        let constant = (r_lo..=r_max)
            .map(|r| vols[r] / (r as f64).powf(theta))
            .fold(0.0, f64::max);
        let residuals = (r_lo..=r_max)
            .map(|r| constant * (r as f64).powf(theta) - vols[r])
            .collect();
        Ok(VolumeGrowthFit {
            basepoint: x,
            theta,
            constant,
            threshold_r0: r_lo.saturating_sub(1) as f64,
            residuals,
            volumes: vols,
        })
    }
}

/// Combinatorial distances from a basepoint, with a connectivity flag.
#[derive(Debug, Clone)]
pub struct DistanceMap {
    /// d(x, y) per vertex y; `None` when y is unreachable.
    pub dist: Vec<Option<usize>>,
    pub connected: bool,
}

/// Witness for V_r(x) ≤ d·r^θ on the fitted window.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VolumeGrowthFit {
    pub basepoint: usize,
    pub theta: f64,
    pub constant: f64,
    pub threshold_r0: f64,
    /// Slack d·r^θ − V_r per radius in the window (nonnegative).
    pub residuals: Vec<f64>,
    /// V_r(x) for r = 0..=r_max.
    pub volumes: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_vertex() -> WeightedGraph {
        WeightedGraph::new(
            vec!["a".into(), "b".into()],
            &[(0, 1, 1.0)],
            None,
        )
        .unwrap()
    }

    #[test]
    fn laplacian_two_vertex() {
        let g = two_vertex();
        assert_eq!(g.apply_laplacian(&[1.0, 0.0]).unwrap(), vec![1.0, -1.0]);
    }

    #[test]
    fn laplacian_annihilates_constants() {
        for g in [
            WeightedGraph::path(7),
            WeightedGraph::cycle(5),
            WeightedGraph::star(4),
            WeightedGraph::grid(3, 4),
        ] {
            let ones = vec![1.0; g.len()];
            let lap = g.apply_laplacian(&ones).unwrap();
            assert!(lap.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn torus_is_regular_with_wraps() {
        let g = WeightedGraph::torus(&[5, 5]);
        let (deg, sup) = g.weighted_degree();
        assert!(deg.iter().all(|&d| d == 4.0), "every vertex has 4 neighbors");
        assert_eq!(sup, 4.0);
        let edge_count: usize = (0..g.len()).map(|x| g.neighbors(x).len()).sum();
        assert_eq!(edge_count, 2 * 2 * 25);
        // every ball around any vertex looks the same; V_2 of ℤ² is 13
        let v = g.ball_volumes(7, 2);
        assert_eq!(v, vec![1.0, 5.0, 13.0]);
    }

    #[test]
    fn laplacian_path_interior() {
        let g = WeightedGraph::path(3);
        assert_eq!(
            g.apply_laplacian(&[0.0, 1.0, 0.0]).unwrap(),
            vec![-1.0, 2.0, -1.0]
        );
    }

    #[test]
    fn weighted_degree_examples() {
        let g = two_vertex();
        let (deg, sup) = g.weighted_degree();
        assert_eq!(deg, vec![1.0, 1.0]);
        assert_eq!(sup, 1.0);

        let g = WeightedGraph::path(3);
        assert_eq!(g.weighted_degree().0, vec![1.0, 2.0, 1.0]);

        let k = 5;
        let mut m = vec![1.0; k + 1];
        m[0] = 2.0;
        let star = WeightedGraph::star(k).with_measure(m).unwrap();
        assert_eq!(star.weighted_degree().0[0], k as f64 / 2.0);
    }

    #[test]
    fn quadratic_form_nonnegative() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let g = WeightedGraph::grid(4, 5)
            .with_measure((0..20).map(|i| 0.5 + 0.1 * i as f64).collect())
            .unwrap();
        for _ in 0..50 {
            let phi: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let lap = g.apply_laplacian(&phi).unwrap();
            let form: f64 = phi
                .iter()
                .zip(&lap)
                .zip(g.measure())
                .map(|((p, l), m)| p * l * m)
                .sum();
            assert!(form >= -1e-12);
        }
    }

    #[test]
    fn m_weighted_symmetry() {
        let g = WeightedGraph::cycle(6)
            .with_measure((0..6).map(|i| 1.0 + i as f64).collect())
            .unwrap();
        let n = g.len();
        // M·L symmetric where M = diag(m)
        let mut mat = vec![vec![0.0; n]; n];
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let col = g.apply_laplacian(&e).unwrap();
            for i in 0..n {
                mat[i][j] = g.measure()[i] * col[i];
            }
        }
        for i in 0..n {
            for j in 0..n {
                assert!((mat[i][j] - mat[j][i]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn bfs_distances() {
        let g = WeightedGraph::path(5);
        let dm = g.combinatorial_distance(0);
        assert!(dm.connected);
        assert_eq!(
            dm.dist,
            vec![Some(0), Some(1), Some(2), Some(3), Some(4)]
        );
        assert_eq!(g.combinatorial_distance(3).dist[3], Some(0));

        // two disjoint edges
        let g = WeightedGraph::new(
            (0..4).map(|i| i.to_string()).collect(),
            &[(0, 1, 1.0), (2, 3, 1.0)],
            None,
        )
        .unwrap();
        let dm = g.combinatorial_distance(0);
        assert!(!dm.connected);
        assert_eq!(dm.dist[2], None);
    }

    #[test]
    fn volume_growth_line() {
        // path segment of ℤ, counting measure: V_r = 2r + 1 from the middle
        let g = WeightedGraph::path(201);
        let fit = g.fit_volume_growth(100, 40).unwrap();
        assert!((fit.theta - 1.0).abs() < 0.1, "theta = {}", fit.theta);
        // window bound holds by construction
        assert!(fit.residuals.iter().all(|&r| r >= -1e-9));
    }

    #[test]
    fn volume_growth_grid() {
        let g = WeightedGraph::grid(81, 81);
        let center = 40 * 81 + 40;
        let fit = g.fit_volume_growth(center, 30).unwrap();
        // ball counting oracle: |B_r| = 2r² + 2r + 1 in ℤ²
        let oracle: Vec<f64> = (0..=30).map(|r| (2 * r * r + 2 * r + 1) as f64).collect();
        for (r, &v) in oracle.iter().enumerate() {
            assert_eq!(g.ball_volumes(center, 30)[r], v);
        }
        assert!((fit.theta - 2.0).abs() < 0.15, "theta = {}", fit.theta);
    }

    #[test]
    fn volume_growth_single_vertex() {
        let g = WeightedGraph::edgeless(1);
        let fit = g.fit_volume_growth(0, 5).unwrap();
        assert!(fit.theta.abs() < 1e-9);
    }

    #[test]
    fn volumes_monotone_and_saturate() {
        let g = WeightedGraph::torus(&[4, 4]);
        let vols = g.ball_volumes(0, 10);
        assert!(vols.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(*vols.last().unwrap(), g.total_mass());
    }

    #[test]
    fn csv_round_trip_and_errors() {
        use std::io::Write;
        let dir = tempfile::tempdir().unwrap();
        let edges = dir.path().join("edges.csv");
        let measure = dir.path().join("m.csv");
        let mut f = std::fs::File::create(&edges).unwrap();
        writeln!(f, "src,dst,weight\na,b,1.0\nb,c,2.0").unwrap();
        let mut f = std::fs::File::create(&measure).unwrap();
        writeln!(f, "vertex,mass\na,1.0\nb,2.0\nc,1.5").unwrap();
        let g = WeightedGraph::from_csv(&edges, Some(&measure)).unwrap();
        assert_eq!(g.len(), 3);
        assert_eq!(g.measure()[g.vertex_index("b").unwrap()], 2.0);

        let bad = dir.path().join("bad.csv");
        let mut f = std::fs::File::create(&bad).unwrap();
        writeln!(f, "src,dst,weight\na,b").unwrap();
        let err = WeightedGraph::from_csv(&bad, None).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_graphs() {
        assert!(WeightedGraph::new(vec!["a".into()], &[(0, 0, 1.0)], None).is_err());
        assert!(
            WeightedGraph::new(vec!["a".into(), "b".into()], &[(0, 1, -1.0)], None).is_err()
        );
        assert!(WeightedGraph::new(
            vec!["a".into(), "b".into()],
            &[],
            Some(vec![1.0, 0.0])
        )
        .is_err());
    }
}
