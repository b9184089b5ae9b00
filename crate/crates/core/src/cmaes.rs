//! (mu/mu_w, lambda) CMA-ES with rank-one and rank-mu covariance updates and
//! cumulative step-size adaptation, used to fit program coefficients.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::evalcore::PreparedSet;
use crate::graph::ProgramGraph;

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct CmaesConfig {
    pub population: usize,
    pub max_generations: usize,
    /// Generations before the no-improvement rule may stop the run.
    pub min_generations: usize,
    pub sigma0: f64,
    pub seed: u64,
    /// Record (generation, best error) pairs.
    pub trace: bool,
}

impl Default for CmaesConfig {
    fn default() -> Self {
        CmaesConfig {
            population: 128,
            max_generations: 10_000,
            min_generations: 100,
            sigma0: 0.3,
            seed: 0,
            trace: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CmaesResult {
    pub best_x: Vec<f64>,
    pub best_f: f64,
    pub generations: usize,
    pub evaluations: usize,
    /// Best-so-far objective after each generation when tracing.
    pub trace: Vec<(usize, f64)>,
}

/// Magnitudes `10^-alpha` with `alpha ~ U[0, 8]` and a fair random sign.
pub fn init_coefficients<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Vec<f64> {
    (0..k)
        .map(|_| {
            let alpha: f64 = rng.gen_range(0.0..=8.0);
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            sign * 10f64.powf(-alpha)
        })
        .collect()
}

/// Like [`init_coefficients`] but keeping the sign of each given value
/// (zero counts as positive).
pub fn init_coefficients_signed<R: Rng + ?Sized>(signs: &[f64], rng: &mut R) -> Vec<f64> {
    signs
        .iter()
        .map(|&s| {
            let alpha: f64 = rng.gen_range(0.0..=8.0);
            let m = 10f64.powf(-alpha);
            if s.is_sign_negative() {
                -m
            } else {
                m
            }
        })
        .collect()
}

fn sanitize(f: f64) -> f64 {
    if f.is_nan() {
        f64::INFINITY
    } else {
        f
    }
}

/// Minimizes `objective` from `x0`.
pub fn minimize<F: FnMut(&[f64]) -> f64>(mut objective: F, x0: &[f64], config: &CmaesConfig) -> CmaesResult {
    let n = x0.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut trace = Vec::new();
    let f0 = sanitize(objective(x0));
    if n == 0 {
        return CmaesResult {
            best_x: Vec::new(),
            best_f: f0,
            generations: 0,
            evaluations: 1,
            trace,
        };
    }
    let lambda = config.population.max(4);
    let mu = lambda / 2;
    let raw: Vec<f64> = (0..mu).map(|i| ((mu as f64) + 0.5).ln() - ((i + 1) as f64).ln()).collect();
    let wsum: f64 = raw.iter().sum();
    let w: Vec<f64> = raw.iter().map(|v| v / wsum).collect();
    let mueff = 1.0 / w.iter().map(|v| v * v).sum::<f64>();
    let nf = n as f64;
    let cc = (4.0 + mueff / nf) / (nf + 4.0 + 2.0 * mueff / nf);
    let cs = (mueff + 2.0) / (nf + mueff + 5.0);
    let c1 = 2.0 / ((nf + 1.3).powi(2) + mueff);
    let cmu = (1.0 - c1).min(2.0 * (mueff - 2.0 + 1.0 / mueff) / ((nf + 2.0).powi(2) + mueff));
    let damps = 1.0 + 2.0 * (((mueff - 1.0) / (nf + 1.0)).sqrt() - 1.0).max(0.0) + cs;
    let chi_n = nf.sqrt() * (1.0 - 1.0 / (4.0 * nf) + 1.0 / (21.0 * nf * nf));

    let mut mean = DVector::from_column_slice(x0);
    let mut sigma = config.sigma0;
    let mut pc = DVector::<f64>::zeros(n);
    let mut ps = DVector::<f64>::zeros(n);
    let mut b = DMatrix::<f64>::identity(n, n);
    let mut d = DVector::<f64>::from_element(n, 1.0);
    let mut c = DMatrix::<f64>::identity(n, n);
    let mut inv_sqrt_c = DMatrix::<f64>::identity(n, n);

    let mut best_x = x0.to_vec();
    let mut best_f = f0;
    let mut best_hist = Vec::with_capacity(1024);
    let mut evaluations = 1;
    let mut generation = 0;
    let mut ys: Vec<DVector<f64>> = Vec::with_capacity(lambda);
    let mut fit: Vec<(f64, usize)> = Vec::with_capacity(lambda);
    let mut xbuf = vec![0.0; n];

    while generation < config.max_generations {
        ys.clear();
        fit.clear();
        for k in 0..lambda {
            let z = DVector::<f64>::from_fn(n, |_, _| rng.sample(StandardNormal));
            let y = &b * d.component_mul(&z);
            for i in 0..n {
                xbuf[i] = mean[i] + sigma * y[i];
            }
            let f = sanitize(objective(&xbuf));
            evaluations += 1;
            if f < best_f {
                best_f = f;
                best_x.copy_from_slice(&xbuf);
            }
            ys.push(y);
            fit.push((f, k));
        }
        fit.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        generation += 1;
        best_hist.push(best_f);
        if config.trace {
            trace.push((generation, best_f));
        }

        let mut yw = DVector::<f64>::zeros(n);
        for (i, &(_, k)) in fit.iter().take(mu).enumerate() {
            yw.axpy(w[i], &ys[k], 1.0);
        }
        mean.axpy(sigma, &yw, 1.0);

        ps = &ps * (1.0 - cs) + (&inv_sqrt_c * &yw) * (cs * (2.0 - cs) * mueff).sqrt();
        let ps_norm = ps.norm();
        let hsig = ps_norm / (1.0 - (1.0 - cs).powi(2 * generation as i32)).sqrt() / chi_n < 1.4 + 2.0 / (nf + 1.0);
        let hs = if hsig { 1.0 } else { 0.0 };
        pc = &pc * (1.0 - cc) + &yw * (hs * (cc * (2.0 - cc) * mueff).sqrt());

        let mut rank_mu = DMatrix::<f64>::zeros(n, n);
        for (i, &(_, k)) in fit.iter().take(mu).enumerate() {
            rank_mu.ger(w[i], &ys[k], &ys[k], 1.0);
        }
        let old = (1.0 - hs) * cc * (2.0 - cc);
        c = &c * (1.0 - c1 - cmu) + (&pc * pc.transpose() + &c * old) * c1 + rank_mu * cmu;
        sigma *= ((cs / damps) * (ps_norm / chi_n - 1.0)).exp();

        // symmetrize, then refresh B and D
        c = (&c + c.transpose()) * 0.5;
        let eig = SymmetricEigen::new(c.clone());
        if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
            break;
        }
        b = eig.eigenvectors;
        d = eig.eigenvalues.map(|v| v.max(1e-300).sqrt());
        let dinv = d.map(|v| 1.0 / v);
        inv_sqrt_c = &b * DMatrix::from_diagonal(&dinv) * b.transpose();

        if best_f == 0.0 || !sigma.is_finite() || sigma < 1e-300 || mean.iter().any(|v| !v.is_finite()) {
            break;
        }
        // stop once the latest half of all generations brought no improvement
        if generation >= config.min_generations && best_hist[generation / 2 - 1] <= best_f {
            break;
        }
    }

    CmaesResult {
        best_x,
        best_f,
        generations: generation,
        evaluations,
        trace,
    }
}

/// Fits the graph's coefficients to `trainset`, starting from `±10^-alpha`
/// with the sign of each currently bound coefficient.
pub fn train_coefficients(graph: &ProgramGraph, trainset: &PreparedSet, config: &CmaesConfig) -> (Vec<f64>, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9e37_79b9_7f4a_7c15);
    let x0 = init_coefficients_signed(graph.coeffs(), &mut rng);
    train_from(graph, trainset, config, &x0)
}

/// Runs CMA-ES from the given starting coefficients.
pub fn train_from(graph: &ProgramGraph, trainset: &PreparedSet, config: &CmaesConfig, x0: &[f64]) -> (Vec<f64>, f64) {
    let tape = crate::graph::Tape::compile(graph);
    let mut scratch = trainset.scratch();
    let mode = trainset.mode();
    let mut bound = vec![0.0; x0.len()];
    let res = minimize(
        |c| {
            for (b, &v) in bound.iter_mut().zip(c) {
                *b = mode.bind(v);
            }
            trainset.max_error(&tape, &bound, &mut scratch)
        },
        x0,
        config,
    );
    let coeffs: Vec<f64> = res.best_x.iter().map(|&v| mode.bind(v)).collect();
    (coeffs, res.best_f)
}
