use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::{CalibrationError, CalibrationInputs};

/// Scaled covariance `K̂ = K / σ_q²`:
/// `[same paper] + bias_ratio·[same rater] + noise_ratio·[same paper and rater]`.
pub fn build_covariance(inputs: &CalibrationInputs, bias_ratio: f64, noise_ratio: f64) -> DMatrix<f64> {
    let n = inputs.len();
    DMatrix::from_fn(n, n, |e, f| {
        let same_paper = inputs.paper_of[e] == inputs.paper_of[f];
        let same_rater = inputs.rater_of[e] == inputs.rater_of[f];
        let mut k = 0.0;
        if same_paper {
            k += 1.0;
        }
        if same_rater {
            k += bias_ratio;
        }
        if same_paper && same_rater {
            k += noise_ratio;
        }
        k
    })
}

fn cholesky(khat: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>, CalibrationError> {
    Cholesky::new(khat.clone()).ok_or(CalibrationError::NotPositiveDefinite)
}

fn chol_log_det(chol: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

fn check_dims(s: &[f64], khat: &DMatrix<f64>) -> Result<(), CalibrationError> {
    if khat.nrows() != s.len() || khat.ncols() != s.len() {
        return Err(CalibrationError::DimensionMismatch { expected: s.len(), got: khat.nrows() });
    }
    Ok(())
}

/// Negative log-likelihood of `s ~ N(μ_q·1, σ_q²·K̂)`, dense route.
pub fn nll(s: &[f64], khat: &DMatrix<f64>, sigma_q2: f64, mu_q: f64) -> Result<f64, CalibrationError> {
    check_dims(s, khat)?;
    let chol = cholesky(khat)?;
    let r = DVector::from_iterator(s.len(), s.iter().map(|x| x - mu_q));
    let quad = r.dot(&chol.solve(&r));
    let n = s.len() as f64;
    Ok(0.5 * n * (2.0 * std::f64::consts::PI * sigma_q2).ln() + 0.5 * chol_log_det(&chol) + quad / (2.0 * sigma_q2))
}

/// Closed-form maximizer of the likelihood in `σ_q²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaQ {
    pub value: f64,
    /// The centered scores are identically zero, so `value` is 0.
    pub degenerate: bool,
}

impl SigmaQ {
    fn from_quad(quad: f64, n: usize) -> SigmaQ {
        let value = quad / n as f64;
        SigmaQ { value, degenerate: value <= 0.0 }
    }
}

/// `σ_q² = (s − μ_q)ᵀ K̂⁻¹ (s − μ_q) / N`, dense route.
pub fn fit_sigma_q(s: &[f64], khat: &DMatrix<f64>, mu_q: f64) -> Result<SigmaQ, CalibrationError> {
    check_dims(s, khat)?;
    let chol = cholesky(khat)?;
    let r = DVector::from_iterator(s.len(), s.iter().map(|x| x - mu_q));
    Ok(SigmaQ::from_quad(r.dot(&chol.solve(&r)), s.len()))
}

/// Factorization of `K̂` that exploits its structure.
///
/// `K̂ = A + β Z Zᵀ` where `A = εI + (same-paper indicator)` is block diagonal
/// with blocks `εI + 11ᵀ` (inverted in closed form) and `Z` maps entries to
/// raters. By the Woodbury identity only `G = I + β Zᵀ A⁻¹ Z`, one row per
/// rater, needs a Cholesky factorization.
pub struct StructuredFactor<'a> {
    inputs: &'a CalibrationInputs,
    bias_ratio: f64,
    noise_ratio: f64,
    paper_sizes: Vec<usize>,
    g: Cholesky<f64, Dyn>,
    log_det: f64,
}

impl<'a> StructuredFactor<'a> {
    pub fn new(inputs: &'a CalibrationInputs, bias_ratio: f64, noise_ratio: f64) -> Result<Self, CalibrationError> {
        if !(noise_ratio > 0.0) || !(bias_ratio >= 0.0) {
            return Err(CalibrationError::BadHyperparams(format!(
                "need noise ratio > 0 and bias ratio >= 0, got {noise_ratio} and {bias_ratio}"
            )));
        }
        let eps = noise_ratio;
        let mut paper_sizes = vec![0usize; inputs.n_papers()];
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); inputs.n_papers()];
        for (e, &p) in inputs.paper_of.iter().enumerate() {
            paper_sizes[p] += 1;
            members[p].push(inputs.rater_of[e]);
        }

        let r = inputs.n_raters();
        let mut w = DMatrix::<f64>::zeros(r, r);
        for &rater in &inputs.rater_of {
            w[(rater, rater)] += 1.0 / eps;
        }
        for (p, raters) in members.iter().enumerate() {
            let c = 1.0 / (eps * (eps + paper_sizes[p] as f64));
            for &a in raters {
                for &b in raters {
                    w[(a, b)] -= c;
                }
            }
        }
        let g = DMatrix::identity(r, r) + w * bias_ratio;
        let g = Cholesky::new(g).ok_or(CalibrationError::NotPositiveDefinite)?;

        let log_det_a: f64 = paper_sizes
            .iter()
            .map(|&n| (n as f64 - 1.0) * eps.ln() + (eps + n as f64).ln())
            .sum();
        let log_det = log_det_a + chol_log_det(&g);
        Ok(StructuredFactor { inputs, bias_ratio, noise_ratio, paper_sizes, g, log_det })
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    fn a_inv(&self, x: &[f64]) -> Vec<f64> {
        let eps = self.noise_ratio;
        let mut sums = vec![0.0; self.paper_sizes.len()];
        for (e, &p) in self.inputs.paper_of.iter().enumerate() {
            sums[p] += x[e];
        }
        x.iter()
            .zip(&self.inputs.paper_of)
            .map(|(&xe, &p)| (xe - sums[p] / (eps + self.paper_sizes[p] as f64)) / eps)
            .collect()
    }

    fn rater_sums(&self, x: &[f64]) -> DVector<f64> {
        let mut t = DVector::zeros(self.inputs.n_raters());
        for (e, &r) in self.inputs.rater_of.iter().enumerate() {
            t[r] += x[e];
        }
        t
    }

    /// `K̂⁻¹ x`.
    pub fn solve(&self, x: &[f64]) -> Vec<f64> {
        let u = self.a_inv(x);
        if self.bias_ratio == 0.0 {
            return u;
        }
        let v = self.g.solve(&self.rater_sums(&u));
        let spread: Vec<f64> = self.inputs.rater_of.iter().map(|&r| v[r]).collect();
        let correction = self.a_inv(&spread);
        u.iter().zip(correction).map(|(a, c)| a - self.bias_ratio * c).collect()
    }

    /// `xᵀ K̂⁻¹ x`.
    pub fn quad(&self, x: &[f64]) -> f64 {
        x.iter().zip(self.solve(x)).map(|(a, b)| a * b).sum()
    }

    /// Cholesky factor of `G = I + β Zᵀ A⁻¹ Z`.
    pub fn rater_system(&self) -> &Cholesky<f64, Dyn> {
        &self.g
    }

    /// Profiled `σ_q²` and the NLL at that value.
    pub fn profile(&self, centered: &[f64]) -> (SigmaQ, f64) {
        let n = centered.len();
        let sq = SigmaQ::from_quad(self.quad(centered), n);
        let nll = if sq.degenerate {
            f64::NAN
        } else {
            let nf = n as f64;
            0.5 * nf * (2.0 * std::f64::consts::PI * sq.value).ln() + 0.5 * self.log_det + 0.5 * nf
        };
        (sq, nll)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::review_data::PaperId;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn inputs(rows: &[(&str, &str, f64)]) -> CalibrationInputs {
        CalibrationInputs::new(rows.iter().map(|&(p, r, s)| (PaperId::new(p).unwrap(), r.to_string(), s, 1.0))).unwrap()
    }

    fn random_inputs(rng: &mut ChaCha8Rng, n: usize, papers: usize, raters: usize) -> CalibrationInputs {
        let mut seen = std::collections::BTreeSet::new();
        let mut rows = Vec::new();
        while rows.len() < n {
            let p = rng.gen_range(0..papers);
            let r = rng.gen_range(0..raters);
            if seen.insert((p, r)) {
                rows.push((PaperId::new(format!("p{p}")).unwrap(), format!("r{r}"), rng.gen_range(-7.0..8.0), 1.0));
            }
        }
        CalibrationInputs::new(rows).unwrap()
    }

    #[test]
    fn covariance_examples() {
        // N = 1 cannot form inputs, so check the diagonal on a two-entry set
        let two_papers = inputs(&[("a", "x", 1.0), ("b", "y", 2.0)]);
        let k = build_covariance(&two_papers, 0.3, 0.7);
        assert_eq!(k[(0, 0)], 1.0 + 0.3 + 0.7);
        assert_eq!(k[(0, 1)], 0.0);

        let same_paper = inputs(&[("a", "x", 1.0), ("a", "y", 2.0)]);
        assert_eq!(build_covariance(&same_paper, 0.3, 0.7)[(0, 1)], 1.0);

        let same_rater = inputs(&[("a", "x", 1.0), ("b", "x", 2.0)]);
        assert_eq!(build_covariance(&same_rater, 0.3, 0.7)[(1, 0)], 0.3);
    }

    #[test]
    fn covariance_symmetric_and_diagonally_dominant_per_row() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let inp = random_inputs(&mut rng, 30, 8, 6);
        let k = build_covariance(&inp, 0.5, 0.2);
        assert_eq!(k, k.transpose());
        for e in 0..k.nrows() {
            for f in 0..k.ncols() {
                if e != f {
                    assert!(k[(e, e)] > k[(e, f)]);
                }
            }
        }
    }

    #[test]
    fn scalar_nll() {
        let k = DMatrix::from_element(1, 1, 1.0);
        let v = nll(&[2.0], &k, 1.0, 2.0).unwrap();
        assert!((v - 0.5 * (2.0 * std::f64::consts::PI).ln()).abs() < 1e-14);
    }

    #[test]
    fn identity_kernel_sigma_is_second_moment() {
        let s = [1.0, -2.0, 3.0, -2.0];
        let sq = fit_sigma_q(&s, &DMatrix::identity(4, 4), 0.0).unwrap();
        assert!((sq.value - 18.0 / 4.0).abs() < 1e-14);
        // calculus: minimizing N/2 log σ² + Q/(2σ²) over σ² gives Q/N
        let q: f64 = s.iter().map(|x| x * x).sum();
        let best = (1..2000)
            .map(|i| i as f64 * 0.005)
            .min_by(|a, b| {
                let f = |v: f64| 2.0 * v.ln() + q / (2.0 * v);
                f(*a).total_cmp(&f(*b))
            })
            .unwrap();
        assert!((best - sq.value).abs() < 0.005);
    }

    #[test]
    fn zero_residual_is_degenerate() {
        let sq = fit_sigma_q(&[1.5, 1.5], &DMatrix::identity(2, 2), 1.5).unwrap();
        assert_eq!(sq.value, 0.0);
        assert!(sq.degenerate);
    }

    #[test]
    fn quadratic_term_is_homogeneous() {
        let k = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let quad = |s: &[f64], sq2: f64| nll(s, &k, sq2, 0.0).unwrap() - nll(&[0.0, 0.0], &k, sq2, 0.0).unwrap();
        assert!((quad(&[1.0, -1.0], 1.0) - quad(&[2.0, -2.0], 4.0)).abs() < 1e-12);
    }

    #[test]
    fn non_pd_is_an_error() {
        let k = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(nll(&[0.0, 0.0], &k, 1.0, 0.0), Err(CalibrationError::NotPositiveDefinite)));
    }

    #[test]
    fn structured_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..20 {
            let inp = random_inputs(&mut rng, 10 + trial * 3, 12, 7);
            let (beta, eps) = (rng.gen_range(0.0..3.0), rng.gen_range(0.01..2.0));
            let k = build_covariance(&inp, beta, eps);
            let chol = Cholesky::new(k.clone()).unwrap();
            let f = StructuredFactor::new(&inp, beta, eps).unwrap();
            assert!((f.log_det() - chol_log_det(&chol)).abs() < 1e-9 * (1.0 + f.log_det().abs()));
            let x: Vec<f64> = (0..inp.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let dense = chol.solve(&DVector::from_column_slice(&x));
            for (a, b) in f.solve(&x).iter().zip(dense.iter()) {
                assert!((a - b).abs() < 1e-9, "{a} vs {b}");
            }
            let mu = inp.mean_score();
            let centered = inp.centered(mu);
            let (sq, value) = f.profile(&centered);
            let dense_sq = fit_sigma_q(&inp.scores, &k, mu).unwrap();
            assert!((sq.value - dense_sq.value).abs() < 1e-9 * dense_sq.value);
            assert!((value - nll(&inp.scores, &k, sq.value, mu).unwrap()).abs() < 1e-8);
        }
    }

    #[test]
    fn zero_bias_ratio_is_handled() {
        let inp = inputs(&[("a", "x", 1.0), ("a", "y", 2.0), ("b", "x", 0.0)]);
        let f = StructuredFactor::new(&inp, 0.0, 0.5).unwrap();
        let k = build_covariance(&inp, 0.0, 0.5);
        let chol = Cholesky::new(k).unwrap();
        assert!((f.log_det() - chol_log_det(&chol)).abs() < 1e-12);
        assert!(StructuredFactor::new(&inp, 0.1, 0.0).is_err());
    }
}
