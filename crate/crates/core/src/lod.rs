//! Localized orthogonal decomposition of the P1 order-parameter space.
//!
//! Corrector columns solve patch saddle problems
//!
//! ```text
//! [ K_A  P^T ] [q]   [ K_A iota_z ]
//! [ P    0   ] [mu] = [ 0          ]
//! ```
//!
//! with `P` the L2 moments against the coarse hats of the closed patch, so
//! every column lies in the kernel of the coarse L2 projection.

use std::sync::Arc;
use std::thread;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fem::assemble::{covariant_matrix, shared_scalar_mass};
use crate::fem::field::{scalar_prolongation, ComplexField, VectorField};
use crate::fem::space::shared_mesh;
use crate::mesh::expand_patch_with;
use crate::solve::Factor;
use crate::sparse::{Csr, HermitianOperator};

type C = Complex64;

const CG_TOLERANCE: f64 = 1e-13;

/// Worker count from `GLLOD_WORKERS`, defaulting to the available cores.
pub fn worker_count() -> usize {
    std::env::var("GLLOD_WORKERS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

/// Coarse L2 projection onto the P1 space of `coarse_level`, acting on
/// fine P1 functions.
pub struct CoarseProjection {
    pub coarse_level: u32,
    pub fine_level: u32,
    /// Fine x coarse prolongation.
    pub iota: Csr<f64>,
    /// Coarse x fine, the transpose of `iota`.
    pub iota_t: Csr<f64>,
    pub fine_mass: Arc<Csr<f64>>,
    /// Coarse x fine mixed mass `iota^T M_fine`.
    pub mixed: Csr<f64>,
    pub coarse_mass: Csr<f64>,
    factor: Factor<f64>,
}

impl std::fmt::Debug for CoarseProjection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CoarseProjection")
            .field("coarse_level", &self.coarse_level)
            .field("fine_level", &self.fine_level)
            .finish()
    }
}

pub fn build_projection(coarse_level: u32, fine_level: u32) -> Result<CoarseProjection> {
    if coarse_level > fine_level {
        return Err(Error::LevelMismatch(format!(
            "coarse level {coarse_level} above fine level {fine_level}"
        )));
    }
    let iota = scalar_prolongation(coarse_level, fine_level)?;
    let iota_t = iota.adjoint();
    let fine_mass = shared_scalar_mass(fine_level)?;
    let mixed = iota_t.matmul(&fine_mass);
    let coarse_mass = mixed.matmul(&iota);
    let factor = Factor::cholesky(&coarse_mass, "coarse mass")?;
    Ok(CoarseProjection {
        coarse_level,
        fine_level,
        iota,
        iota_t,
        fine_mass,
        mixed,
        coarse_mass,
        factor,
    })
}

impl CoarseProjection {
    pub fn coarse_dim(&self) -> usize {
        self.iota.ncols()
    }

    pub fn fine_dim(&self) -> usize {
        self.iota.nrows()
    }

    /// Coarse coefficients of the L2 projection of a fine function.
    pub fn apply(&self, fine: &[C]) -> Vec<C> {
        let rhs = self.mixed.mul_complex(fine);
        let re: Vec<f64> = rhs.iter().map(|v| v.re).collect();
        let im: Vec<f64> = rhs.iter().map(|v| v.im).collect();
        let sol = self.factor.solve_many(&[re, im]);
        sol[0]
            .iter()
            .zip(&sol[1])
            .map(|(&a, &b)| C::new(a, b))
            .collect()
    }

    /// The projection as a fine function.
    pub fn project(&self, fine: &[C]) -> Vec<C> {
        self.iota.mul_complex(&self.apply(fine))
    }

    /// Removes the coarse component: `(1 - iota pi) phi`, an element of the detail space.
    pub fn detail(&self, fine: &[C]) -> Vec<C> {
        let p = self.project(fine);
        fine.iter().zip(p).map(|(a, b)| a - b).collect()
    }
}

/// Localization and resolution options of the corrector build.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LodOptions {
    pub layers: usize,
    /// Resolution constant in `H <= c_res / kappa`.
    pub c_res: f64,
    /// Turn a violated resolution condition into an error.
    pub strict: bool,
}

impl Default for LodOptions {
    fn default() -> Self {
        LodOptions {
            layers: 4,
            c_res: 1.0,
            strict: false,
        }
    }
}

/// Unknowns and constraints of one patch problem.
#[derive(Clone, Debug)]
struct LocalProblem {
    free: Vec<usize>,
    constraints: Vec<usize>,
    saturated: bool,
}

/// The multiscale space `(1 - C) V_H` represented on the fine mesh.
#[derive(Clone)]
pub struct LodSpace {
    pub projection: Arc<CoarseProjection>,
    problems: Arc<Vec<LocalProblem>>,
    pub kappa: f64,
    pub options: LodOptions,
    pub a_hat: VectorField,
    /// Fine x coarse corrector.
    pub corrector: Csr<C>,
    /// Fine x coarse basis `iota - C`.
    pub basis: Csr<C>,
    pub warnings: Vec<String>,
}

impl std::fmt::Debug for LodSpace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LodSpace")
            .field("coarse_level", &self.coarse_level())
            .field("fine_level", &self.fine_level())
            .field("layers", &self.options.layers)
            .field("kappa", &self.kappa)
            .finish()
    }
}

/// Checks `H <= c_res / kappa`; returns a warning or an error in strict mode.
pub fn resolution_check(coarse_level: u32, kappa: f64, opts: &LodOptions) -> Result<Option<String>> {
    let h = 1.0 / (1u64 << coarse_level) as f64;
    if h * kappa <= opts.c_res {
        return Ok(None);
    }
    let msg = format!(
        "coarse mesh size {h} violates H <= c_res/kappa = {}",
        opts.c_res / kappa
    );
    if opts.strict {
        Err(Error::Config(msg))
    } else {
        Ok(Some(msg))
    }
}

fn local_problems(proj: &CoarseProjection, layers: usize) -> Result<Vec<LocalProblem>> {
    let coarse = shared_mesh(proj.coarse_level)?;
    let fine = shared_mesh(proj.fine_level)?;
    let adj = coarse.node_triangles();
    (0..coarse.num_nodes())
        .map(|z| {
            let patch = expand_patch_with(&coarse, &fine, &adj, z, layers)?;
            Ok(LocalProblem {
                free: patch.free_fine_nodes(),
                saturated: patch.covers_domain(&coarse),
                constraints: patch.coarse_nodes,
            })
        })
        .collect()
}

/// Factorizes the saddle system of one patch.
fn factor_local(k: &Csr<C>, proj: &CoarseProjection, prob: &LocalProblem, map: &mut [usize], id: usize) -> Result<Factor<C>> {
    let nf = prob.free.len();
    for (i, &f) in prob.free.iter().enumerate() {
        map[f] = i;
    }
    let mut trips = Vec::with_capacity(nf * 7 + 2 * prob.constraints.len() * 16);
    for (i, &f) in prob.free.iter().enumerate() {
        let (cs, vs) = k.row(f);
        for (&c, &v) in cs.iter().zip(vs) {
            if map[c] != usize::MAX {
                trips.push((i, map[c], v));
            }
        }
    }
    for (j, &y) in prob.constraints.iter().enumerate() {
        let (cs, vs) = proj.mixed.row(y);
        for (&c, &v) in cs.iter().zip(vs) {
            if map[c] != usize::MAX {
                trips.push((nf + j, map[c], C::new(v, 0.0)));
                trips.push((map[c], nf + j, C::new(v, 0.0)));
            }
        }
    }
    for &f in &prob.free {
        map[f] = usize::MAX;
    }
    let n = nf + prob.constraints.len();
    let a = Csr::from_triplets(n, n, &trips);
    Factor::lu(&a, &format!("corrector saddle system of patch {id}"))
}

/// Right-hand side `(K iota_z)` restricted to the patch unknowns, padded with zero moments.
fn local_rhs(k: &Csr<C>, proj: &CoarseProjection, prob: &LocalProblem, z: usize, work: &mut [f64]) -> Vec<C> {
    let (cs, vs) = proj.iota_t.row(z);
    for (&c, &v) in cs.iter().zip(vs) {
        work[c] = v;
    }
    let mut rhs = vec![C::new(0.0, 0.0); prob.free.len() + prob.constraints.len()];
    for (i, &f) in prob.free.iter().enumerate() {
        let (kc, kv) = k.row(f);
        let mut s = C::new(0.0, 0.0);
        for (&c, &v) in kc.iter().zip(kv) {
            let w = work[c];
            if w != 0.0 {
                s += v * w;
            }
        }
        rhs[i] = s;
    }
    for &c in cs {
        work[c] = 0.0;
    }
    rhs
}

/// Patch operators with local numbering: `K_FF` and the moment rows `P_ZF`.
fn local_matrices(k: &Csr<C>, proj: &CoarseProjection, prob: &LocalProblem, map: &mut [usize]) -> (Csr<C>, Csr<f64>) {
    for (i, &f) in prob.free.iter().enumerate() {
        map[f] = i;
    }
    // `map` is increasing on the sorted free list, so filtered rows stay sorted
    let filter = |cs: &[usize], out_c: &mut Vec<usize>| -> Vec<usize> {
        let mut keep = Vec::with_capacity(cs.len());
        for (p, &c) in cs.iter().enumerate() {
            if map[c] != usize::MAX {
                out_c.push(map[c]);
                keep.push(p);
            }
        }
        keep
    };
    let mut kp = vec![0];
    let mut kc = Vec::with_capacity(prob.free.len() * 7);
    let mut kv = Vec::with_capacity(prob.free.len() * 7);
    for &f in &prob.free {
        let (cs, vs) = k.row(f);
        for p in filter(cs, &mut kc) {
            kv.push(vs[p]);
        }
        kp.push(kc.len());
    }
    let mut pp = vec![0];
    let mut pc = Vec::new();
    let mut pv = Vec::new();
    for &y in &prob.constraints {
        let (cs, vs) = proj.mixed.row(y);
        for p in filter(cs, &mut pc) {
            pv.push(vs[p]);
        }
        pp.push(pc.len());
    }
    for &f in &prob.free {
        map[f] = usize::MAX;
    }
    let nf = prob.free.len();
    (
        Csr::from_parts(nf, nf, kp, kc, kv),
        Csr::from_parts(prob.constraints.len(), nf, pp, pc, pv),
    )
}

fn shape_key(p: &Csr<f64>) -> u64 {
    use std::hash::{Hash, Hasher};
    let mut h = std::collections::hash_map::DefaultHasher::new();
    p.ncols().hash(&mut h);
    p.row_ptr().hash(&mut h);
    p.col_idx().hash(&mut h);
    for v in p.values() {
        v.to_bits().hash(&mut h);
    }
    h.finish()
}

/// Factor of the Gram matrix `P P^T` of the moment rows.
fn gram_factor(p: &Csr<f64>) -> Option<faer::linalg::solvers::Llt<f64>> {
    let nz = p.nrows();
    let mut work = vec![0.0; p.ncols()];
    let mut g = faer::Mat::<f64>::zeros(nz, nz);
    for a in 0..nz {
        let (ca, va) = p.row(a);
        for (&c, &v) in ca.iter().zip(va) {
            work[c] = v;
        }
        for b in a..nz {
            let (cb, vb) = p.row(b);
            let s: f64 = cb.iter().zip(vb).map(|(&c, &v)| work[c] * v).sum();
            g[(a, b)] = s;
            g[(b, a)] = s;
        }
        for &c in ca {
            work[c] = 0.0;
        }
    }
    g.llt(faer::Side::Lower).ok()
}

/// Conjugate gradients for `K q = b` restricted to `ker P`, using the
/// Euclidean projector `1 - P^T (P P^T)^{-1} P`.
fn projected_cg(
    k: &Csr<C>,
    p: &Csr<f64>,
    gram: &faer::linalg::solvers::Llt<f64>,
    b: &[C],
    tolerance: f64,
) -> Option<Vec<C>> {
    use faer::linalg::solvers::Solve;
    let nz = p.nrows();
    let project = |v: &mut Vec<C>| {
        let pv = p.mul_complex(v);
        let rhs = faer::Mat::<f64>::from_fn(nz, 2, |i, j| if j == 0 { pv[i].re } else { pv[i].im });
        let y = gram.solve(&rhs);
        let yc: Vec<C> = (0..nz).map(|i| C::new(y[(i, 0)], y[(i, 1)])).collect();
        let corr = p.transpose_mul_complex(&yc);
        for (vi, ci) in v.iter_mut().zip(corr) {
            *vi -= ci;
        }
    };
    let n = b.len();
    let mut r = b.to_vec();
    project(&mut r);
    let bn = crate::sparse::norm2(&r);
    let mut x = vec![C::new(0.0, 0.0); n];
    if bn == 0.0 {
        return Some(x);
    }
    let mut d = r.clone();
    let mut rr = crate::sparse::dot(&r, &r).re;
    let max_iter = 20 * (n as f64).sqrt() as usize + 200;
    for _ in 0..max_iter {
        let mut q = k.mul_vec(&d);
        project(&mut q);
        let dq = crate::sparse::dot(&d, &q).re;
        if !(dq > 0.0) {
            return None;
        }
        let alpha = rr / dq;
        for i in 0..n {
            x[i] += d[i] * alpha;
            r[i] -= q[i] * alpha;
        }
        let rr_new = crate::sparse::dot(&r, &r).re;
        if rr_new.sqrt() <= tolerance * bn {
            return Some(x);
        }
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            d[i] = r[i] + d[i] * beta;
        }
    }
    None
}

/// Corrector columns for a contiguous range of patches, as (fine row, value) lists.
fn solve_range(
    k: &Csr<C>,
    proj: &CoarseProjection,
    problems: &[LocalProblem],
    range: std::ops::Range<usize>,
) -> Result<Vec<Vec<(usize, C)>>> {
    let mut map = vec![usize::MAX; proj.fine_dim()];
    let mut work = vec![0.0; proj.fine_dim()];
    let mut grams: std::collections::HashMap<u64, Option<faer::linalg::solvers::Llt<f64>>> =
        std::collections::HashMap::new();
    let mut out = Vec::with_capacity(range.len());
    for z in range {
        let prob = &problems[z];
        if prob.saturated {
            out.push(Vec::new());
            continue;
        }
        let rhs = local_rhs(k, proj, prob, z, &mut work);
        let nf = prob.free.len();
        let (kl, pl) = local_matrices(k, proj, prob, &mut map);
        let gram = grams.entry(shape_key(&pl)).or_insert_with(|| gram_factor(&pl));
        let sol = match gram.as_ref().and_then(|g| projected_cg(&kl, &pl, g, &rhs[..nf], CG_TOLERANCE)) {
            Some(x) => x,
            None => factor_local(k, proj, prob, &mut map, z)?.solve(&rhs),
        };
        out.push(prob.free.iter().zip(&sol).map(|(&r, &v)| (r, v)).collect());
    }
    Ok(out)
}

/// Columns of all saturated patches, which share a single factorization.
fn solve_saturated(k: &Csr<C>, proj: &CoarseProjection, problems: &[LocalProblem]) -> Result<Vec<(usize, Vec<(usize, C)>)>> {
    let centers: Vec<usize> = (0..problems.len()).filter(|&z| problems[z].saturated).collect();
    let Some(&first) = centers.first() else {
        return Ok(Vec::new());
    };
    let prob = &problems[first];
    let mut map = vec![usize::MAX; proj.fine_dim()];
    let mut work = vec![0.0; proj.fine_dim()];
    let f = factor_local(k, proj, prob, &mut map, first)?;
    let mut out = Vec::with_capacity(centers.len());
    for chunk in centers.chunks(32) {
        let rhs: Vec<Vec<C>> = chunk.iter().map(|&z| local_rhs(k, proj, prob, z, &mut work)).collect();
        for (&z, sol) in chunk.iter().zip(f.solve_many(&rhs)) {
            out.push((z, prob.free.iter().zip(&sol).map(|(&r, &v)| (r, v)).collect()));
        }
    }
    Ok(out)
}

fn assemble_columns(
    k: &Csr<C>,
    proj: &CoarseProjection,
    problems: &[LocalProblem],
) -> Result<Csr<C>> {
    let nc = problems.len();
    let workers = worker_count().min(nc).max(1);
    let chunk = nc.div_ceil(workers);
    let mut columns: Vec<Vec<(usize, C)>> = if workers == 1 {
        solve_range(k, proj, problems, 0..nc)?
    } else {
        let parts: Vec<Result<Vec<Vec<(usize, C)>>>> = thread::scope(|s| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    let r = (w * chunk).min(nc)..((w + 1) * chunk).min(nc);
                    s.spawn(move || solve_range(k, proj, problems, r))
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("corrector worker")).collect()
        });
        let mut cols = Vec::with_capacity(nc);
        for p in parts {
            cols.extend(p?);
        }
        cols
    };
    for (z, col) in solve_saturated(k, proj, problems)? {
        columns[z] = col;
    }
    let mut trips = Vec::with_capacity(columns.iter().map(|c| c.len()).sum());
    for (z, col) in columns.iter().enumerate() {
        trips.extend(col.iter().map(|&(r, v)| (r, z, v)));
    }
    Ok(Csr::from_triplets(proj.fine_dim(), nc, &trips))
}

/// Builds the localized correctors for the potential `a_hat`.
pub fn build_corrector(
    proj: Arc<CoarseProjection>,
    a_hat: &VectorField,
    kappa: f64,
    options: LodOptions,
) -> Result<LodSpace> {
    if a_hat.level > proj.fine_level {
        return Err(Error::LevelMismatch(format!(
            "potential level {} above corrector fine level {}",
            a_hat.level, proj.fine_level
        )));
    }
    let warnings = resolution_check(proj.coarse_level, kappa, &options)?
        .into_iter()
        .collect();
    let problems = Arc::new(local_problems(&proj, options.layers)?);
    let mut space = LodSpace {
        projection: proj,
        problems,
        kappa,
        options,
        a_hat: a_hat.clone(),
        corrector: Csr::zeros(0, 0),
        basis: Csr::zeros(0, 0),
        warnings,
    };
    space.rebuild()?;
    Ok(space)
}

/// Recomputes every corrector column for `a_new`, reusing patches and projection.
pub fn update_corrector(space: &LodSpace, a_new: &VectorField) -> Result<LodSpace> {
    if a_new.level != space.a_hat.level || a_new.degree != space.a_hat.degree {
        return Err(Error::LevelMismatch(
            "updated potential must live in the same vector space".into(),
        ));
    }
    let mut s = space.clone();
    s.a_hat = a_new.clone();
    s.rebuild()?;
    Ok(s)
}

/// `B^H op B` for an operator on the fine mesh of the space.
pub fn coarse_galerkin(space: &LodSpace, op: &HermitianOperator) -> Result<HermitianOperator> {
    if op.dim() != space.basis.nrows() {
        return Err(Error::Dimension {
            expected: space.basis.nrows(),
            got: op.dim(),
        });
    }
    Ok(HermitianOperator::new(
        op.matrix.congruence(&space.basis),
        format!("LOD Galerkin restriction of {}", op.descriptor),
    ))
}

impl LodSpace {
    fn rebuild(&mut self) -> Result<()> {
        let proj = &self.projection;
        let k = covariant_matrix(proj.fine_level, &self.a_hat, self.kappa)?;
        self.corrector = assemble_columns(&k, proj, &self.problems)?;
        let iota = proj.iota.to_complex();
        self.basis = iota.linear_combination(C::new(1.0, 0.0), &self.corrector, C::new(-1.0, 0.0))?;
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.projection.coarse_dim()
    }

    pub fn coarse_level(&self) -> u32 {
        self.projection.coarse_level
    }

    pub fn fine_level(&self) -> u32 {
        self.projection.fine_level
    }

    /// Fine representation `B x` of coarse LOD coefficients.
    pub fn to_fine(&self, x: &[C]) -> ComplexField {
        ComplexField {
            level: self.fine_level(),
            values: self.basis.mul_vec(x),
        }
    }

    /// `B^H y`.
    pub fn restrict(&self, y: &[C]) -> Vec<C> {
        self.basis.adjoint_mul_vec(y)
    }

    /// Corrector column `C lambda_z` as a fine field.
    pub fn corrector_column(&self, z: usize) -> Vec<C> {
        let mut e = vec![C::new(0.0, 0.0); self.dim()];
        e[z] = C::new(1.0, 0.0);
        self.corrector.mul_vec(&e)
    }

    /// Fine nodes carrying unknowns in the patch of coarse node `z`.
    pub fn patch_nodes(&self, z: usize) -> &[usize] {
        &self.problems[z].free
    }

    /// Coefficients of the best L2 approximation of a fine field in the space.
    pub fn l2_fit(&self, fine: &[C]) -> Result<Vec<C>> {
        let m = self.projection.fine_mass.to_complex();
        let g = m.congruence(&self.basis);
        let rhs = self.restrict(&m.mul_vec(fine));
        Ok(Factor::hermitian(&g, "LOD mass")?.solve(&rhs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::dot;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_complex(n: usize, rng: &mut ChaCha8Rng) -> Vec<C> {
        (0..n)
            .map(|_| C::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    }

    #[test]
    fn projection_reproduces_coarse_functions() {
        let p = build_projection(2, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = random_complex(p.coarse_dim(), &mut rng);
        let fine = p.iota.mul_complex(&c);
        let back = p.apply(&fine);
        assert!(back.iter().zip(&c).all(|(a, b)| (a - b).norm() < 1e-12));
        let phi = random_complex(p.fine_dim(), &mut rng);
        let once = p.project(&phi);
        let twice = p.project(&once);
        assert!(once.iter().zip(&twice).all(|(a, b)| (a - b).norm() < 1e-12));
    }

    #[test]
    fn global_correctors_lie_in_kernel_and_are_optimal() {
        let kappa = 8.0;
        let p = Arc::new(build_projection(2, 4).unwrap());
        let a = VectorField::zeros(4, 2).unwrap();
        let opts = LodOptions { layers: 8, ..Default::default() };
        let lod = build_corrector(p.clone(), &a, kappa, opts).unwrap();
        let k = covariant_matrix(4, &a, kappa).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..5 {
            let x = random_complex(lod.dim(), &mut rng);
            let cx = lod.corrector.mul_vec(&x);
            let pi = p.apply(&cx);
            let xn = crate::sparse::norm2(&x);
            assert!(crate::sparse::norm2(&pi) <= 1e-10 * xn);
            let v = lod.basis.mul_vec(&x);
            let w = p.detail(&random_complex(p.fine_dim(), &mut rng));
            let form = dot(&w, &k.mul_vec(&v)).re;
            assert!(form.abs() < 1e-10, "{form}");
        }
    }

    #[test]
    fn projected_cg_matches_saddle_factorization() {
        let p = build_projection(3, 5).unwrap();
        let a = VectorField::interpolate(5, 2, |x| [x[1] * (1.0 - x[1]), 2.0 * x[0] * x[0]]).unwrap();
        let k = covariant_matrix(5, &a, 5.0).unwrap();
        let problems = local_problems(&p, 1).unwrap();
        let mut map = vec![usize::MAX; p.fine_dim()];
        let mut work = vec![0.0; p.fine_dim()];
        let cols = solve_range(&k, &p, &problems, 0..problems.len()).unwrap();
        for z in [0, 10, 40] {
            let prob = &problems[z];
            assert!(!prob.saturated);
            let rhs = local_rhs(&k, &p, prob, z, &mut work);
            let direct = factor_local(&k, &p, prob, &mut map, z).unwrap().solve(&rhs);
            let scale = crate::sparse::norm2(&direct[..prob.free.len()]);
            let err = cols[z]
                .iter()
                .zip(&direct)
                .map(|(&(_, v), d)| (v - d).norm())
                .fold(0.0, f64::max);
            assert!(err <= 1e-9 * scale, "{err} {scale}");
        }
    }

    #[test]
    fn update_with_same_potential_is_bitwise_equal() {
        let p = Arc::new(build_projection(2, 3).unwrap());
        let a = VectorField::interpolate(3, 1, |x| [x[1] * (1.0 - x[1]), 0.5 * x[0] * (1.0 - x[0])]).unwrap();
        let opts = LodOptions { layers: 1, ..Default::default() };
        let lod = build_corrector(p, &a, 3.0, opts).unwrap();
        let again = update_corrector(&lod, &a).unwrap();
        assert_eq!(lod.corrector, again.corrector);
    }

    #[test]
    fn columns_stay_inside_patches() {
        let p = Arc::new(build_projection(2, 4).unwrap());
        let a = VectorField::zeros(4, 1).unwrap();
        let opts = LodOptions { layers: 0, ..Default::default() };
        let lod = build_corrector(p, &a, 4.0, opts).unwrap();
        for z in 0..lod.dim() {
            let col = lod.corrector_column(z);
            let inside = lod.patch_nodes(z);
            for (i, v) in col.iter().enumerate() {
                if v.norm() != 0.0 {
                    assert!(inside.binary_search(&i).is_ok());
                }
            }
        }
    }

    #[test]
    fn resolution_guard() {
        let opts = LodOptions::default();
        assert!(resolution_check(5, 6.0, &opts).unwrap().is_none());
        assert!(resolution_check(2, 6.0, &opts).unwrap().is_some());
        let strict = LodOptions { strict: true, ..opts };
        assert!(resolution_check(2, 6.0, &strict).is_err());
    }
}
