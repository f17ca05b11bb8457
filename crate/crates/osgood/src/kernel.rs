//! Closed-form heat-kernel families on discretized metric measure spaces,
//! with validators for the kernel axioms (mass ≤ 1, symmetry,
//! Chapman–Kolmogorov, strong continuity) and the scaling lower bound
//! p_t(x,y) ≥ t^{−α/β}·Φ(d(x,y)/t^{1/β}).
//!
//! Continuum spaces are represented as quadrature point clouds on flat tori,
//! so periodicity controls the truncation mass defect.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::semigroup::SemigroupAction;

/// Regular quadrature grid on a flat torus of dimension `dim` with the given
/// period per axis; `mesh` points per axis, each carrying mass (period/mesh)^dim.
#[derive(Debug, Clone)]
pub struct TorusMesh {
    pub dim: usize,
    pub mesh: usize,
    pub period: f64,
    points: Vec<Vec<f64>>,
    masses: Vec<f64>,
}

impl TorusMesh {
    pub fn new(dim: usize, mesh: usize, period: f64) -> Result<Self> {
        if dim == 0 || dim > 3 {
            return Err(Error::InvalidKernel(format!(
                "torus dimension must be 1..=3, got {dim}"
            )));
        }
        if mesh < 4 {
            return Err(Error::InvalidKernel("torus mesh must be ≥ 4".into()));
        }
        if !(period > 0.0) {
            return Err(Error::InvalidKernel("torus period must be positive".into()));
        }
        let h = period / mesh as f64;
        let n = mesh.pow(dim as u32);
        let mut points = Vec::with_capacity(n);
        for flat in 0..n {
            let mut coords = Vec::with_capacity(dim);
            let mut rest = flat;
            for _ in 0..dim {
                coords.push((rest % mesh) as f64 * h);
                rest /= mesh;
            }
            points.push(coords);
        }
        let masses = vec![h.powi(dim as i32); n];
        Ok(TorusMesh {
            dim,
            mesh,
            period,
            points,
            masses,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    /// Geodesic distance on the flat torus.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let mut acc = 0.0;
        for (a, b) in self.points[i].iter().zip(&self.points[j]) {
            let d = (a - b).abs();
            let d = d.min(self.period - d);
            acc += d * d;
        }
        acc.sqrt()
    }
}

/// Closed-form kernel family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum KernelFamily {
    /// p_t(x,y) = (4πt)^{−N/2} exp(−d²/(4t)).
    Gaussian,
    /// Heavy-tailed stable-like kernel
    /// p_t(x,y) = c·t^{−N/β}(1 + (d/t^{1/β})²)^{−(N+β)/2} with β ∈ (0,2).
    /// For β = 1, N = 1 and the default c this is the exact Cauchy kernel;
    /// otherwise it is a rational stand-in comparable to the stable density.
    FractionalStable { beta: f64, c: f64 },
}

/// Data of the certified lower bound (α, β, Φ).
pub struct LowerBound {
    pub alpha: f64,
    pub beta: f64,
    pub phi: Box<dyn Fn(f64) -> f64 + Sync>,
}

/// A kernel family over a torus mesh together with its lower-bound data.
pub struct KernelModel {
    pub space: TorusMesh,
    pub family: KernelFamily,
}

/// Default mass-normalizing constant of the fractional family:
/// ∫_{ℝ^N} c (1+|x|²)^{−(N+β)/2} dx = 1.
pub fn fractional_constant(dim: usize, beta: f64) -> f64 {
    let n = dim as f64;
    gamma((n + beta) / 2.0) / (std::f64::consts::PI.powf(n / 2.0) * gamma(beta / 2.0))
}

impl KernelModel {
    pub fn gaussian(space: TorusMesh) -> Self {
        KernelModel {
            space,
            family: KernelFamily::Gaussian,
        }
    }

    pub fn fractional(space: TorusMesh, beta: f64, c: Option<f64>) -> Result<Self> {
        if !(beta > 0.0 && beta < 2.0) {
            return Err(Error::InvalidKernel(format!(
                "fractional kernel needs β ∈ (0,2), got {beta}"
            )));
        }
        let c = c.unwrap_or_else(|| fractional_constant(space.dim, beta));
        Ok(KernelModel {
            space,
            family: KernelFamily::FractionalStable { beta, c },
        })
    }

    /// Kernel value from the geodesic distance.
    pub fn eval_at_distance(&self, t: f64, d: f64) -> f64 {
        let n = self.space.dim as f64;
        match &self.family {
            KernelFamily::Gaussian => {
                (4.0 * std::f64::consts::PI * t).powf(-n / 2.0) * (-d * d / (4.0 * t)).exp()
            }
            KernelFamily::FractionalStable { beta, c } => {
                let s = d / t.powf(1.0 / beta);
                c * t.powf(-n / beta) * (1.0 + s * s).powf(-(n + beta) / 2.0)
            }
        }
    }

    pub fn eval(&self, t: f64, x: usize, y: usize) -> f64 {
        self.eval_at_distance(t, self.space.distance(x, y))
    }

    /// The (α, β, Φ) triple certified for this family: the Gaussian bound is
    /// an identity, the fractional bound reuses the shipped constant c.
    pub fn lower_bound(&self) -> LowerBound {
        let n = self.space.dim as f64;
        match self.family {
            KernelFamily::Gaussian => LowerBound {
                alpha: n,
                beta: 2.0,
                phi: Box::new(move |s| {
                    (4.0 * std::f64::consts::PI).powf(-n / 2.0) * (-s * s / 4.0).exp()
                }),
            },
            KernelFamily::FractionalStable { beta, c } => LowerBound {
                alpha: n,
                beta,
                phi: Box::new(move |s| c * (1.0 + s * s).powf(-(n + beta) / 2.0)),
            },
        }
    }

    /// Validate (p1)–(p4) on the discretization: mass residual, asymmetry,
    /// Chapman–Kolmogorov residual over sample pairs, and strong-continuity
    /// residual ‖S(t)φ − φ‖₂ at the smallest grid t for a bump sample.
    pub fn validate_axioms(&self, t_grid: &[f64], sample_points: &[usize]) -> Result<AxiomReport> {
        if t_grid.is_empty() || sample_points.is_empty() {
            return Err(Error::Domain("axiom grids must be nonempty".into()));
        }
        if t_grid.iter().any(|&t| !(t > 0.0)) {
            return Err(Error::Domain("axiom time grid must be positive".into()));
        }
        let n = self.space.len();
        if sample_points.iter().any(|&x| x >= n) {
            return Err(Error::Domain("sample point out of range".into()));
        }
        let w = self.space.masses();

        let mut mass = AxiomResidual::default();
        let mut asym = AxiomResidual::default();
        let mut ck = AxiomResidual::default();
        for &t in t_grid {
            for &x in sample_points {
                let total: f64 = (0..n).map(|y| self.eval(t, x, y) * w[y]).sum();
                mass.update((total - 1.0).max(0.0), (t, x, x));
                for &y in sample_points {
                    asym.update((self.eval(t, x, y) - self.eval(t, y, x)).abs(), (t, x, y));
                    let direct = self.eval(2.0 * t, x, y);
                    let composed: f64 = (0..n)
                        .map(|z| self.eval(t, x, z) * self.eval(t, z, y) * w[z])
                        .sum();
                    ck.update((direct - composed).abs(), (t, x, y));
                }
            }
        }

        // (p4): a smooth periodic bump, tested at the smallest time
        let t0 = t_grid.iter().cloned().fold(f64::INFINITY, f64::min);
        let bump: Vec<f64> = (0..n)
            .map(|i| {
                let d = self.space.distance(i, 0);
                (-d * d).exp()
            })
            .collect();
        let action = KernelSemigroup::new(self);
        let moved = action.apply(t0, &bump)?;
        let num: f64 = moved
            .iter()
            .zip(&bump)
            .zip(w)
            .map(|((a, b), m)| (a - b) * (a - b) * m)
            .sum();
        let den: f64 = bump.iter().zip(w).map(|(b, m)| b * b * m).sum();
        let continuity = (num / den).sqrt();

        Ok(AxiomReport {
            mass,
            symmetry: asym,
            chapman_kolmogorov: ck,
            continuity,
            continuity_time: t0,
        })
    }

    /// min over samples of p_t(x,y) − t^{−α/β}·Φ(d/t^{1/β}).
    pub fn lower_bound_check(&self, t_grid: &[f64], pairs: &[(usize, usize)]) -> Result<f64> {
        let lb = self.lower_bound();
        let mut worst = f64::INFINITY;
        for &t in t_grid {
            if !(t > 0.0) {
                return Err(Error::Domain("lower-bound time grid must be positive".into()));
            }
            for &(x, y) in pairs {
                let d = self.space.distance(x, y);
                let bound = t.powf(-lb.alpha / lb.beta) * (lb.phi)(d / t.powf(1.0 / lb.beta));
                worst = worst.min(self.eval(t, x, y) - bound);
            }
        }
        Ok(worst)
    }

    /// Quadrature-weighted semigroup action usable by the blow-up and
    /// mild-solver modules.
    pub fn semigroup(&self) -> KernelSemigroup<'_> {
        KernelSemigroup::new(self)
    }
}

/// Worst residual of one axiom with the witnessing (t, x, y).
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct AxiomResidual {
    pub worst: f64,
    pub witness: (f64, usize, usize),
}

impl AxiomResidual {
    fn update(&mut self, value: f64, witness: (f64, usize, usize)) {
        if value > self.worst {
            self.worst = value;
            self.witness = witness;
        }
    }
}

/// Per-axiom residual report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AxiomReport {
    pub mass: AxiomResidual,
    pub symmetry: AxiomResidual,
    pub chapman_kolmogorov: AxiomResidual,
    /// ‖S(t₀)φ − φ‖₂ / ‖φ‖₂ for a bump sample at the smallest grid time.
    pub continuity: f64,
    pub continuity_time: f64,
}

impl AxiomReport {
    /// Pass/fail at the given residual threshold (continuity is judged
    /// against its own mesh-scaled threshold).
    pub fn passes(&self, residual_tol: f64, continuity_tol: f64) -> bool {
        self.mass.worst <= residual_tol
            && self.symmetry.worst <= residual_tol
            && self.chapman_kolmogorov.worst <= residual_tol
            && self.continuity <= continuity_tol
    }
}

/// S(t)φ(x) = Σ_y p_t(x,y) φ(y) w(y) on the quadrature cloud.
pub struct KernelSemigroup<'a> {
    model: &'a KernelModel,
}

impl<'a> KernelSemigroup<'a> {
    pub fn new(model: &'a KernelModel) -> Self {
        KernelSemigroup { model }
    }
}

impl SemigroupAction for KernelSemigroup<'_> {
    fn dim(&self) -> usize {
        self.model.space.len()
    }

    fn masses(&self) -> &[f64] {
        self.model.space.masses()
    }

    fn apply(&self, t: f64, phi: &[f64]) -> Result<Vec<f64>> {
        if t < 0.0 || t.is_nan() {
            return Err(Error::Domain(format!("semigroup time must be ≥ 0, got {t}")));
        }
        let n = self.model.space.len();
        if phi.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: phi.len(),
            });
        }
        if t == 0.0 {
            return Ok(phi.to_vec());
        }
        let w = self.model.space.masses();
        Ok((0..n)
            .map(|x| (0..n).map(|y| self.model.eval(t, x, y) * phi[y] * w[y]).sum())
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian_1d(mesh: usize) -> KernelModel {
        KernelModel::gaussian(TorusMesh::new(1, mesh, 20.0).unwrap())
    }

    #[test]
    fn gaussian_axioms_fine_mesh() {
        let k = gaussian_1d(256);
        let samples: Vec<usize> = (0..256).step_by(32).collect();
        let rep = k
            .validate_axioms(&[0.01, 0.1, 1.0], &samples)
            .unwrap();
        assert!(rep.mass.worst <= 5e-3, "mass residual {}", rep.mass.worst);
        assert_eq!(rep.symmetry.worst, 0.0);
        assert!(
            rep.chapman_kolmogorov.worst <= 5e-3,
            "CK residual {}",
            rep.chapman_kolmogorov.worst
        );
    }

    #[test]
    fn refinement_halves_residuals() {
        // pick a time where the coarse mesh under-resolves the kernel
        let coarse = gaussian_1d(64);
        let fine = gaussian_1d(128);
        let t = [0.02];
        let rc = coarse.validate_axioms(&t, &[0, 8, 16]).unwrap();
        let rf = fine.validate_axioms(&t, &[0, 16, 32]).unwrap();
        assert!(
            rf.chapman_kolmogorov.worst * 2.0 <= rc.chapman_kolmogorov.worst,
            "coarse {} fine {}",
            rc.chapman_kolmogorov.worst,
            rf.chapman_kolmogorov.worst
        );
    }

    #[test]
    fn gaussian_lower_bound_is_identity() {
        let k = gaussian_1d(64);
        let pairs: Vec<(usize, usize)> = (0..64).map(|i| (0, i)).collect();
        let slack = k.lower_bound_check(&[0.05, 0.5, 2.0], &pairs).unwrap();
        assert!(slack.abs() <= 1e-15, "slack {slack}");
    }

    #[test]
    fn fractional_lower_bound_and_mass() {
        let mesh = TorusMesh::new(1, 256, 40.0).unwrap();
        let k = KernelModel::fractional(mesh, 1.0, None).unwrap();
        // β = 1, N = 1 is the Cauchy kernel: c = 1/π
        if let KernelFamily::FractionalStable { c, .. } = k.family {
            assert!((c - 1.0 / std::f64::consts::PI).abs() < 1e-12);
        }
        let pairs: Vec<(usize, usize)> = (0..256).step_by(8).map(|i| (0, i)).collect();
        let slack = k.lower_bound_check(&[0.1, 1.0], &pairs).unwrap();
        assert!(slack >= -1e-12);
        let rep = k.validate_axioms(&[0.5], &[0, 64, 128]).unwrap();
        assert!(rep.mass.worst == 0.0, "mass must stay ≤ 1, residual {}", rep.mass.worst);
    }

    #[test]
    fn inflated_constant_breaks_mass() {
        let mesh = TorusMesh::new(1, 128, 40.0).unwrap();
        let c = 3.0 * fractional_constant(1, 1.0);
        let k = KernelModel::fractional(mesh, 1.0, Some(c)).unwrap();
        let rep = k.validate_axioms(&[0.5], &[0]).unwrap();
        assert!(rep.mass.worst > 0.1);
    }

    #[test]
    fn zero_phi_bound_trivial() {
        let k = gaussian_1d(32);
        // Φ ≡ 0 gives nonnegative slack trivially: kernel values are ≥ 0
        for t in [0.1, 1.0] {
            for i in 0..32 {
                assert!(k.eval(t, 0, i) >= 0.0);
            }
        }
    }

    #[test]
    fn semigroup_preserves_constants() {
        let k = gaussian_1d(128);
        let action = k.semigroup();
        let ones = vec![1.0; action.dim()];
        let out = action.apply(0.5, &ones).unwrap();
        for v in out {
            assert!((v - 1.0).abs() <= 5e-3);
        }
    }

    #[test]
    fn point_mass_decay_matches_gaussian() {
        let k = gaussian_1d(512);
        let action = k.semigroup();
        let n = action.dim();
        // point mass: density 1/h at one node
        let h = 20.0 / 512.0;
        let mut a = vec![0.0; n];
        a[0] = 1.0 / h;
        for t in [0.5, 1.0] {
            let out = action.apply(t, &a).unwrap();
            let expected = (4.0 * std::f64::consts::PI * t).powf(-0.5);
            assert!(
                (out[0] - expected).abs() <= 5e-3 * expected,
                "t={t}: {} vs {expected}",
                out[0]
            );
        }
    }

    #[test]
    fn continuity_residual_shrinks_with_t() {
        let k = gaussian_1d(256);
        let r_small = k.validate_axioms(&[0.01], &[0]).unwrap();
        let r_large = k.validate_axioms(&[1.0], &[0]).unwrap();
        assert!(r_small.continuity < r_large.continuity);
    }
}
